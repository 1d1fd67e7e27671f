"""Sobolev norms on the box, on half-space regions and on faces, plus the
exponent-fitting harness that turns an estimate ``|A f| <= C |f|`` into a
log-log slope over a dilation family.

Three norm flavours are used:

* ``sobolev_norm``: the multiplier norm ``(sum (1+|k|^2)^alpha |f_hat|^2)^{1/2}``
  of the stored samples (a half-space function counts as its zero extension).
* ``region_norm``: an intrinsic norm on the closed region ``t_a <= 0``.
  Integer orders integrate spectral derivatives of a smooth reflection
  extension over the region; fractional orders take the multiplier norm of
  that extension; negative orders take the multiplier norm of the zero
  extension.
* ``weighted_norm``: sums of region norms of monomially weighted functions.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import math
from typing import Callable, Sequence

import numpy as np

from . import grid
from .grid import GridFunction

GREGORY = np.array([17, 59, 43, 49]) / 48
REFLECTION_TERMS = 6


class NormError(ValueError):
    pass


# ---------------------------------------------------------------- multiplier norms


def _freq_weight(shape, L, alpha):
    k2 = sum(f ** 2 for f in np.meshgrid(*[grid.axis_freqs(l, n) for l, n in zip(L, shape)], indexing="ij"))
    return (1 + k2) ** alpha


def multiplier_norm(values: np.ndarray, L: Sequence[float], alpha: float) -> float:
    values = np.asarray(values)
    cell = np.prod([2 * l / n for l, n in zip(L, values.shape)])
    F = np.fft.fftn(values)
    total = np.sum(_freq_weight(values.shape, L, alpha) * np.abs(F) ** 2) * cell / values.size
    out = float(np.sqrt(total))
    if not np.isfinite(out):
        raise NormError("non-finite norm")
    return out


def sobolev_norm(f: GridFunction, alpha: float) -> float:
    """Multiplier norm of the stored samples; faces use their own
    (tangential) frequencies."""
    return multiplier_norm(f.values, f.L, alpha)


# ---------------------------------------------------------------- region norms


@functools.lru_cache(maxsize=None)
def reflection_coefficients(terms: int = REFLECTION_TERMS) -> np.ndarray:
    """``c_i`` with ``sum_i c_i (-i)^p = 1`` for ``p < terms``, so that
    ``E f(t) = sum_i c_i f(-i t)`` (``t > 0``) matches ``terms - 1``
    derivatives of ``f`` at ``t = 0``."""
    i = np.arange(1, terms + 1)
    V = np.vander(-i.astype(float), terms, increasing=True).T
    return np.linalg.solve(V, np.ones(terms))


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(s > 0, np.exp(-1 / np.where(s > 0, s, 1)), 0.0)
        b = np.where(s < 1, np.exp(-1 / np.where(s < 1, 1 - s, 1)), 0.0)
    return a / (a + b)


def reflect_extend(values: np.ndarray, axes: Sequence[int], terms: int = REFLECTION_TERMS) -> np.ndarray:
    """Smooth extension across ``t_a = 0`` from the samples on ``t_a <= 0``:
    ``E f(t) = phi(t) sum_i c_i f(-i t)`` for ``t > 0``.

    Reflected points ``-i t`` fall on grid points.  The taper ``phi`` equals
    one on ``[0, L / 2 terms]`` and vanishes beyond ``0.9 L / terms``, so
    every reflected point stays inside the box.
    """
    out = np.array(values, dtype=complex)
    c = reflection_coefficients(terms)
    for a in axes:
        moved = np.moveaxis(out, a, 0)
        n = moved.shape[0]
        z = grid.zero_index(n)
        m = np.arange(1, n - z)
        t = m / n  # in units of 2L
        lo, hi = 0.25 / terms, 0.45 / terms
        phi = smooth_step((hi - t) / (hi - lo))
        ext = np.zeros_like(moved[z + 1:])
        for j in np.flatnonzero(phi > 0):
            mm = m[j]
            for i, ci in enumerate(c, start=1):
                ext[j] += ci * moved[z - i * mm]
            ext[j] *= phi[j]
        moved[z + 1:] = ext
    return out


def spectral_derivative(values: np.ndarray, L: Sequence[float], beta: Sequence[int]) -> np.ndarray:
    if not any(beta):
        return np.asarray(values, dtype=complex)
    F = np.fft.fftn(values)
    for a, b in enumerate(beta):
        if b:
            sl = [None] * F.ndim
            sl[a] = slice(None)
            F = F * ((1j * grid.axis_freqs(L[a], F.shape[a])) ** b)[tuple(sl)]
    return np.fft.ifftn(F)


def region_weights(shape, L, axes, local: bool = False) -> np.ndarray:
    """Quadrature weights on the closed region ``t_a <= 0`` (``a`` in axes)
    with fourth-order end corrections at the face.  ``local`` restricts to
    the inner window ``|t| <= L/2`` (and ``-L/2 <= t_a <= 0``)."""
    w = np.ones(shape)
    for a, (n, l) in enumerate(zip(shape, L)):
        h = 2 * l / n
        t = grid.axis_coords(l, n)
        wa = np.full(n, h)
        if local:
            wa[np.abs(t) > l / 2 + 1e-12] = 0.0
        if a in axes:
            z = grid.zero_index(n)
            wa[z + 1:] = 0.0
            wa[z - 3: z + 1] = GREGORY[::-1] * h
        sl = [None] * len(shape)
        sl[a] = slice(None)
        w = w * wa[tuple(sl)]
    return w


def _multi_indices(ndim, total):
    for beta in itertools.product(range(total + 1), repeat=ndim):
        if sum(beta) <= total:
            yield beta


def _multinomial(alpha, beta):
    rest = alpha - sum(beta)
    return math.factorial(alpha) // (math.factorial(rest) * math.prod(math.factorial(b) for b in beta))


def window_taper(shape, L) -> np.ndarray:
    """Smooth cutoff equal to one on ``|t| <= L/2`` and zero for ``|t| >= 0.9 L``."""
    w = np.ones(shape)
    for a, (n, l) in enumerate(zip(shape, L)):
        t = np.abs(grid.axis_coords(l, n))
        sl = [None] * len(shape)
        sl[a] = slice(None)
        w = w * smooth_step((0.9 * l - t) / (0.4 * l))[tuple(sl)]
    return w


def region_norm(f: GridFunction, alpha: float, axes: Sequence[int] | None = None, local: bool = False) -> float:
    """Intrinsic ``W^alpha`` norm on the closed region ``t_a <= 0``.

    For integer ``alpha >= 0`` this is
    ``(sum_{|b| <= alpha} multinom(alpha; b) |d^b f|^2_{L^2(region)})^{1/2}``,
    which matches the multiplier norm on the full box.  ``local`` integrates
    over the inner window only; the function is tapered outside the window
    first so that far-field defects do not leak into spectral derivatives.
    """
    if axes is None:
        axes = sorted(f.support.axes) if f.support.kind == "half" else []
    axes = list(axes)
    values = np.where(grid.region_mask(f.shape, axes), f.values, 0.0)
    integer = float(alpha).is_integer() and alpha >= 0
    if local and integer:
        values = values * window_taper(f.shape, f.L)
    if alpha < 0:
        return multiplier_norm(values, f.L, alpha)
    if axes:
        values = reflect_extend(values, axes)
    if not integer:
        return multiplier_norm(values, f.L, alpha)
    return _integer_norm(values, f.L, int(alpha), axes, local)


def _integer_norm(values, L, alpha, axes, local):
    alpha = int(alpha)
    w = region_weights(values.shape, L, axes, local)
    total = 0.0
    for beta in _multi_indices(values.ndim, alpha):
        d = spectral_derivative(values, L, beta)
        total += _multinomial(alpha, beta) * float(np.sum(w * np.abs(d) ** 2))
    out = math.sqrt(total)
    if not np.isfinite(out):
        raise NormError("non-finite norm")
    return out


def local_norm(f: GridFunction, s: float, axes: Sequence[int] | None = None) -> float:
    """``W^s_loc`` norm over the inner window ``[-L/2, L/2]^n x [-L/2, 0]``."""
    return region_norm(f, s, axes, local=True)


# ---------------------------------------------------------------- weighted norms


@dataclasses.dataclass(frozen=True)
class SobolevSpec:
    """Norm selector.

    ``region`` is "full", "half" or "face"; ``axes`` are the half-space axes
    for "half".  With ``s > 0`` the norm is the weighted sum
    ``sum_{j<=s} |rho^{(s-j) k} f|_{W^{alpha+s-j}}`` with the monomial taken
    over ``weight_axes``.
    """

    alpha: float = 0.0
    s: int = 0
    k: int = 1
    weight_axes: tuple = ()
    region: str = "full"
    axes: tuple = ()
    local: bool = False

    def __post_init__(self):
        if self.region not in ("full", "half", "face"):
            raise NormError(f"unknown region {self.region!r}")
        if int(self.s) != self.s or self.s < 0:
            raise NormError("weighted norms need a non-negative integer s")
        if self.k < 1:
            raise NormError("weight exponent k must be positive")
        if self.region == "half" and not self.axes:
            raise NormError("half-space region needs axes")
        if self.region == "half" and not set(self.weight_axes) <= set(self.axes):
            raise NormError("weight axes must be half-space axes of the region")

    def norm(self, f: GridFunction) -> float:
        if self.region == "face" and f.support.kind != "face" and f.ndim > 1:
            raise NormError("face norm needs a face function")
        if self.s == 0:
            return self._plain(f, self.alpha)
        return weighted_norm(f, self)

    def _plain(self, f, alpha):
        if self.region == "half":
            return region_norm(f, alpha, self.axes, self.local)
        if self.local:
            return region_norm(f, alpha, [], True)
        return sobolev_norm(f, alpha)


def weighted_norm(f: GridFunction, spec: SobolevSpec) -> float:
    if spec.region == "half" and f.support.kind == "half" and not set(spec.axes) <= f.support.axes:
        raise NormError("spec region does not match the function's support")
    mesh = f.mesh()
    total = 0.0
    for j in range(spec.s + 1):
        power = (spec.s - j) * spec.k
        w = np.ones(f.shape)
        for a in spec.weight_axes:
            w = w * mesh[a] ** power
        total += spec._plain(f.with_values(f.values * w), spec.alpha + spec.s - j)
    return total


# ---------------------------------------------------------------- extensions


@dataclasses.dataclass
class ExtensionReport:
    N: list
    weighted: list
    unweighted: list
    weighted_increment_ratio: float
    unweighted_rate: float
    weighted_converges: bool
    unweighted_diverges: bool


def verify_weighted_extension(func: Callable, L, N, axis: int, s: int, support_axes: Sequence[int],
                              ladder=(1, 2, 4)) -> ExtensionReport:
    """Compare ``|rho_j^s f^{E_j}|_{W^s}`` and ``|f^{E_j}|_{W^s}`` on a
    refinement ladder; ``f^{E_j}`` is the extension by zero across
    ``rho_j = 0``, remaining half-space axes keep their intrinsic norm."""
    N = np.atleast_1d(N)
    rest = [a for a in support_axes if a != axis]
    weighted, unweighted, sizes = [], [], []
    for r in ladder:
        f = grid.from_function(func, L, tuple(int(n * r) for n in N), grid.halfspaces(*support_axes))
        fe = grid.extend_by_zero(f, [axis])
        w = fe.mesh()[axis] ** s
        weighted.append(region_norm(fe.with_values(fe.values * w), s, rest))
        unweighted.append(region_norm(fe, s, rest))
        sizes.append(int(N[0] * r))
    d = np.abs(np.diff(weighted))
    ratio = float(d[-1] / d[0]) if d[0] > 1e-14 else 0.0
    h = 1.0 / np.asarray(sizes, dtype=float)
    un = np.asarray(unweighted)
    rate = float(np.polyfit(np.log(h), np.log(un), 1)[0]) if np.all(un > 0) else 0.0
    return ExtensionReport(sizes, weighted, unweighted, ratio, rate,
                           weighted_converges=ratio <= 0.75 or d[0] <= 1e-12,
                           unweighted_diverges=rate <= -0.25)


# ---------------------------------------------------------------- exponent fits


@dataclasses.dataclass
class ExponentReport:
    lambdas: list
    ratios: list
    slope: float
    constant: float

    def __post_init__(self):
        r = np.asarray(self.ratios, dtype=float)
        if not (np.all(np.isfinite(r)) and np.all(r > 0)):
            raise NormError("ratios must be finite and positive")

    def passed(self, tol: float = 0.1) -> bool:
        return self.slope <= tol

    def csv_fields(self) -> dict:
        return {
            "lambdas": " ".join(f"{v:g}" for v in self.lambdas),
            "ratios": " ".join(f"{v:.6g}" for v in self.ratios),
            "slope": f"{self.slope:.6g}",
            "constant": f"{self.constant:.6g}",
        }


def fit_slope(lambdas, ratios) -> float:
    return float(np.polyfit(np.log(np.asarray(lambdas, float)), np.log(np.asarray(ratios, float)), 1)[0])


def exponent_report(lambdas, ratios) -> ExponentReport:
    lambdas = [float(v) for v in lambdas]
    ratios = [float(v) for v in ratios]
    if not all(np.isfinite(r) and r > 0 for r in ratios):
        raise NormError("ratios must be finite and positive")
    return ExponentReport(lambdas, ratios, fit_slope(lambdas, ratios), max(ratios))


def _as_norm(spec):
    return spec.norm if isinstance(spec, SobolevSpec) else spec


def fit_estimate(operator: Callable, family: Sequence[GridFunction], in_spec, out_spec,
                 lambdas: Sequence[float] | None = None) -> ExponentReport:
    """Ratios ``|operator f_l|_out / |f_l|_in`` over a dilation family and
    their log-log slope against ``l``.  Specs may be ``SobolevSpec`` or any
    callable norm."""
    if len(family) < 4:
        raise NormError("need at least four family members")
    lambdas = [2.0 ** i for i in range(len(family))] if lambdas is None else list(lambdas)
    nin, nout = _as_norm(in_spec), _as_norm(out_spec)
    ratios = []
    for f in family:
        d = nin(f)
        if d == 0:
            raise NormError("zero input norm")
        ratios.append(nout(operator(f)) / d)
    return exponent_report(lambdas, ratios)
