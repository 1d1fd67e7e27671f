"""Discrete functions on a periodic box and their Fourier transforms.

Each axis carries the uniform grid ``t_j = -L + j * 2L/N`` (``j = 0..N-1``),
so the plane ``t = 0`` sits at index ``N // 2``.  Discrete frequencies are
``pi * k / L``.

Transforms follow the convention used by every operator in the package::

    f_hat(xi) = (2 pi)^{-d} * sum_j f(t_j) exp(-i t_j . xi) * h^d
    f(t)      = sum_k f_hat(xi_k) exp(+i t . xi_k) * dxi^d

so that synthesis carries ``exp(+i t xi)`` and ``Op(1)`` is the identity.

Half-space supports are *closed*: values on the face plane ``t_j = 0`` are
kept (they are the boundary values), values with ``t_j > 0`` are zero.
"""

from __future__ import annotations

import dataclasses
import io
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"PSIG1"


class GridError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class Support:
    """Where a grid function lives.

    ``kind`` is ``"full"``, ``"half"`` or ``"face"``.  ``axes`` lists the
    (own-index) axes on which the function is restricted to ``t <= 0``.
    For faces, ``face_axis`` records the ambient axis that was removed.
    """

    kind: str = "full"
    axes: frozenset = frozenset()
    face_axis: int | None = None

    def __post_init__(self):
        if self.kind not in ("full", "half", "face"):
            raise GridError(f"unknown support kind {self.kind!r}")
        object.__setattr__(self, "axes", frozenset(int(a) for a in self.axes))
        if self.kind == "full" and self.axes:
            raise GridError("full-space support cannot carry half-space axes")
        if self.kind == "half" and not self.axes:
            raise GridError("half-space support needs at least one axis")
        if self.kind == "face" and self.face_axis is None:
            raise GridError("face support needs face_axis")


FULL = Support()


def halfspaces(*axes: int) -> Support:
    return Support("half", frozenset(axes)) if axes else FULL


def face(face_axis: int, *axes: int) -> Support:
    return Support("face", frozenset(axes), face_axis)


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclasses.dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray
    L: tuple
    support: Support = FULL

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        L = tuple(float(v) for v in np.broadcast_to(self.L, (vals.ndim,)))
        if vals.ndim < 1 or vals.ndim > 3:
            raise GridError("grid functions have 1 to 3 axes")
        for n in vals.shape:
            if not _is_pow2(n):
                raise GridError(f"grid size {n} is not a power of two")
        if any(v <= 0 for v in L):
            raise GridError("half widths must be positive")
        if not np.all(np.isfinite(vals)):
            raise GridError("grid values must be finite")
        for a in self.support.axes:
            if not 0 <= a < vals.ndim:
                raise GridError(f"support axis {a} out of range")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "L", L)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def h(self) -> tuple:
        return tuple(2 * L / n for L, n in zip(self.L, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def coords(self, axis: int) -> np.ndarray:
        return axis_coords(self.L[axis], self.shape[axis])

    def mesh(self) -> tuple:
        return np.meshgrid(*[self.coords(a) for a in range(self.ndim)], indexing="ij")

    def freqs(self, axis: int) -> np.ndarray:
        return axis_freqs(self.L[axis], self.shape[axis])

    def freq_mesh(self) -> tuple:
        return np.meshgrid(*[self.freqs(a) for a in range(self.ndim)], indexing="ij")

    def with_values(self, values, support: Support | None = None) -> "GridFunction":
        return GridFunction(values, self.L, self.support if support is None else support)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values, _join(self.support, other.support))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values, _join(self.support, other.support))

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            _check_same_grid(self, c)
            return self.with_values(self.values * c.values)
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _join(a: Support, b: Support) -> Support:
    if a == b:
        return a
    if a.kind == "face" or b.kind == "face":
        raise GridError("cannot combine face and volume functions")
    common = a.axes & b.axes
    return halfspaces(*sorted(common))


def _check_same_grid(f: GridFunction, g: GridFunction):
    if f.shape != g.shape or not np.allclose(f.L, g.L):
        raise GridError("grid functions live on different grids")


def axis_coords(L: float, n: int) -> np.ndarray:
    return -L + np.arange(n) * (2 * L / n)


def axis_freqs(L: float, n: int) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=2 * L / n)


def zero_index(n: int) -> int:
    return n // 2


def region_mask(shape: Sequence[int], axes: Iterable[int]) -> np.ndarray:
    """Boolean mask of the closed region ``t_a <= 0`` for ``a`` in axes."""
    mask = np.ones(shape, dtype=bool)
    for a in axes:
        idx = np.arange(shape[a]) <= zero_index(shape[a])
        sl = [None] * len(shape)
        sl[a] = slice(None)
        mask = mask & idx[tuple(sl)]
    return mask


def from_function(func, L, N, support: Support = FULL) -> GridFunction:
    """Sample ``func(*coords)`` on the grid and zero it outside ``support``."""
    N = tuple(int(n) for n in np.atleast_1d(N))
    L = tuple(float(l) for l in np.broadcast_to(L, (len(N),)))
    mesh = np.meshgrid(*[axis_coords(l, n) for l, n in zip(L, N)], indexing="ij")
    vals = np.asarray(func(*mesh), dtype=complex) * np.ones(N)
    if support.axes:
        vals = np.where(region_mask(N, support.axes), vals, 0.0)
    return GridFunction(vals, L, support)


# ---------------------------------------------------------------- transforms


@dataclasses.dataclass(frozen=True, eq=False)
class FourierData:
    coefficients: np.ndarray
    L: tuple
    kind: str
    axes: tuple
    support: Support = FULL


def _phase(L, n):
    # exp(-i t_0 xi_k) with t_0 = -L
    return np.exp(1j * L * axis_freqs(L, n))


def _transform(f: GridFunction, axes: tuple, kind: str) -> FourierData:
    vals = np.fft.fftn(f.values, axes=axes)
    scale = 1.0
    for a in axes:
        sl = [None] * f.ndim
        sl[a] = slice(None)
        vals = vals * _phase(f.L[a], f.shape[a])[tuple(sl)]
        scale *= f.h[a] / (2 * np.pi)
    return FourierData(vals * scale, f.L, kind, axes, f.support)


def fft_full(f: GridFunction) -> FourierData:
    """Transform over every axis (``f_hat(xi, eta)``)."""
    if f.support.kind == "face":
        raise GridError("fft_full expects a volume function; use fft_partial on faces")
    return _transform(f, tuple(range(f.ndim)), "Full")


def fft_partial(f: GridFunction, normal_axis: int = -1) -> FourierData:
    """Transform over the tangential axes only (``f_tilde(xi, rho)``)."""
    normal_axis %= f.ndim
    axes = tuple(a for a in range(f.ndim) if a != normal_axis)
    return _transform(f, axes, "PartialTangential")


def inverse(data: FourierData) -> GridFunction:
    vals = data.coefficients
    scale = 1.0
    shape = vals.shape
    for a in data.axes:
        L, n = data.L[a], shape[a]
        sl = [None] * vals.ndim
        sl[a] = slice(None)
        vals = vals * np.conj(_phase(L, n))[tuple(sl)]
        scale *= (2 * np.pi) / (2 * L / n)
    out = np.fft.ifftn(vals, axes=data.axes) * scale
    return GridFunction(out, data.L, data.support)


def normal_dft(data: FourierData, normal_axis: int = -1) -> FourierData:
    """Apply the remaining normal-axis transform to partial data."""
    if data.kind != "PartialTangential":
        raise GridError("normal_dft expects partial data")
    a = normal_axis % data.coefficients.ndim
    n = data.coefficients.shape[a]
    L = data.L[a]
    sl = [None] * data.coefficients.ndim
    sl[a] = slice(None)
    vals = np.fft.fft(data.coefficients, axis=a) * _phase(L, n)[tuple(sl)] * (2 * L / n) / (2 * np.pi)
    return FourierData(vals, data.L, "Full", tuple(sorted(data.axes + (a,))), data.support)


# ---------------------------------------------------------------- support ops


def extend_by_zero(f: GridFunction, axes: Iterable[int]) -> GridFunction:
    """``f^{E_J}``: zero for ``t_j > 0``, support shrinks to ``I minus J``.

    The face plane itself keeps its (boundary) values.
    """
    axes = frozenset(axes)
    if not axes:
        return f
    if f.support.kind != "half" or not axes <= f.support.axes:
        raise GridError(f"axes {sorted(axes)} are not half-space axes of the support")
    vals = np.where(region_mask(f.shape, f.support.axes), f.values, 0.0)
    rest = f.support.axes - axes
    return f.with_values(vals, halfspaces(*sorted(rest)))


def restrict_to_region(f: GridFunction, axes: Iterable[int]) -> GridFunction:
    axes = frozenset(axes) | (f.support.axes if f.support.kind == "half" else frozenset())
    vals = np.where(region_mask(f.shape, axes), f.values, 0.0)
    return f.with_values(vals, halfspaces(*sorted(axes)))


def restrict_boundary(f: GridFunction, axis: int) -> GridFunction:
    """Values on the plane ``t_axis = 0`` as a face function."""
    axis %= f.ndim
    if f.ndim < 2:
        raise GridError("cannot restrict a one-axis function")
    if f.support.kind == "face":
        raise GridError("restricting a face function is not supported")
    vals = np.take(f.values, zero_index(f.shape[axis]), axis=axis)
    L = tuple(l for a, l in enumerate(f.L) if a != axis)
    remaining = sorted(a - (a > axis) for a in f.support.axes if a != axis)
    return GridFunction(vals, L, face(axis, *remaining))


def limit_from_below(f: GridFunction, axis: int) -> GridFunction:
    """Quadratic Richardson extrapolation of ``t_axis -> 0^-`` from the planes
    ``-h, -2h, -3h``."""
    axis %= f.ndim
    z = zero_index(f.shape[axis])
    p1, p2, p3 = (np.take(f.values, z - k, axis=axis) for k in (1, 2, 3))
    vals = 3 * p1 - 3 * p2 + p3
    L = tuple(l for a, l in enumerate(f.L) if a != axis)
    remaining = sorted(a - (a > axis) for a in f.support.axes if a != axis)
    return GridFunction(vals, L, face(axis, *remaining))


def embed_face(g: GridFunction, axis: int, L_axis: float, N_axis: int) -> np.ndarray:
    """Zero array on the ambient grid carrying ``g`` on the plane ``t_axis = 0``."""
    shape = list(g.shape)
    shape.insert(axis, N_axis)
    out = np.zeros(shape, dtype=complex)
    idx = [slice(None)] * len(shape)
    idx[axis] = zero_index(N_axis)
    out[tuple(idx)] = g.values
    return out


# ---------------------------------------------------------------- binary I/O

_TAGS = {"full": 0, "half": 1, "face": 2}


def to_bytes(f: GridFunction) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", f.ndim))
    buf.write(struct.pack(f"<{f.ndim}I", *f.shape))
    buf.write(struct.pack(f"<{f.ndim}d", *f.L))
    buf.write(struct.pack("<B", _TAGS[f.support.kind]))
    if f.support.kind == "face":
        buf.write(struct.pack("<B", f.support.face_axis))
    if f.support.kind in ("half", "face"):
        axes = sorted(f.support.axes)
        buf.write(struct.pack("<B", len(axes)))
        buf.write(struct.pack(f"<{len(axes)}B", *axes))
    data = np.empty(f.values.shape + (2,), dtype="<f8")
    data[..., 0] = f.values.real
    data[..., 1] = f.values.imag
    buf.write(np.ascontiguousarray(data).tobytes(order="C"))
    return buf.getvalue()


def from_bytes(raw: bytes) -> GridFunction:
    if raw[:5] != MAGIC:
        raise GridError("bad magic, not a PSIG1 grid file")
    pos = 5

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise GridError("truncated grid file")
        out = struct.unpack_from(fmt, raw, pos)
        pos += size
        return out

    (dim,) = take("<I")
    if not 1 <= dim <= 3:
        raise GridError(f"unsupported dimension {dim}")
    shape = take(f"<{dim}I")
    L = take(f"<{dim}d")
    (tag,) = take("<B")
    kind = {v: k for k, v in _TAGS.items()}.get(tag)
    if kind is None:
        raise GridError(f"unknown support tag {tag}")
    face_axis = None
    axes = ()
    if kind == "face":
        (face_axis,) = take("<B")
    if kind in ("half", "face"):
        (count,) = take("<B")
        axes = take(f"<{count}B")
    n = int(np.prod(shape)) * 2
    if len(raw) - pos != 8 * n:
        raise GridError("sample block has the wrong length")
    data = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(tuple(shape) + (2,))
    vals = data[..., 0] + 1j * data[..., 1]
    return GridFunction(vals, L, Support(kind, frozenset(axes), face_axis))


def save(f: GridFunction, path) -> None:
    Path(path).write_bytes(to_bytes(f))


def load(path) -> GridFunction:
    return from_bytes(Path(path).read_bytes())
