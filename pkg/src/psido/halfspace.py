"""Actions of pseudodifferential operators on full-space functions,
half-space functions and boundary layers ``g_b(x) x delta(rho)``.

Multiplier actions are applied as ``ifft(a * fft(f))``; the phase and
scaling factors of the continuous transform cancel.  Boundary layers are
never sampled in the normal direction: the normal transform of
``g_b x delta`` is ``g_b~(xi)`` for every ``eta``, so the action reduces to
the one-dimensional kernel ``K(xi, rho) = (1/2 pi) int a e^{i rho eta} d eta``.
"""

from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
from scipy import integrate

from . import grid
from .grid import GridError, GridFunction
from .symbols import Symbol, SymbolError, boundary_kernel, boundary_symbol, eta_derivative, laurent_coefficients

COST_CAP = 2 ** 26


class OperatorError(ValueError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryDistribution:
    """``g_b x delta(rho_axis)`` on an ambient grid whose normal axis has
    half width ``L_normal`` and ``N_normal`` points."""

    density: GridFunction
    axis: int
    L_normal: float
    N_normal: int

    def __post_init__(self):
        d = self.density
        if d.support.kind != "face":
            object.__setattr__(self, "density", GridFunction(d.values, d.L, grid.face(self.axis, *d.support.axes)))
        if self.density.ndim > 2:
            raise GridError("boundary densities have at most two axes")

    @property
    def ambient_ndim(self) -> int:
        return self.density.ndim + 1

    @property
    def ambient_L(self) -> tuple:
        L = list(self.density.L)
        L.insert(self.axis, self.L_normal)
        return tuple(L)

    @property
    def ambient_shape(self) -> tuple:
        s = list(self.density.shape)
        s.insert(self.axis, self.N_normal)
        return tuple(s)

    def normal_coords(self) -> np.ndarray:
        return grid.axis_coords(self.L_normal, self.N_normal)

    def half_planes(self) -> np.ndarray:
        """Indices of the planes ``rho <= 0``."""
        return np.arange(grid.zero_index(self.N_normal) + 1)


def boundary_distribution(g_b: GridFunction, axis: int = -1, L_normal: float | None = None,
                          N_normal: int | None = None) -> BoundaryDistribution:
    ndim = g_b.ndim + 1
    axis %= ndim
    L_normal = g_b.L[0] if L_normal is None else L_normal
    N_normal = g_b.shape[0] if N_normal is None else N_normal
    return BoundaryDistribution(g_b, axis, float(L_normal), int(N_normal))


# ---------------------------------------------------------------- helpers


def _ambient_freqs(face_freqs: tuple, axis: int) -> tuple:
    f = list(face_freqs)
    f.insert(axis, np.zeros_like(face_freqs[0]) if face_freqs else np.zeros(()))
    return tuple(f)


def _face_freq_mesh(g: GridFunction) -> tuple:
    return tuple(np.meshgrid(*[g.freqs(a) for a in range(g.ndim)], indexing="ij"))


def tangential_action(g: GridFunction, kernel, dep_axes, cost_cap=COST_CAP) -> np.ndarray:
    """Apply ``kernel(face_freqs, face_coords) -> (P,) + face_shape`` as a
    tangential multiplier to ``g``.  When the kernel depends on the face
    coordinates in ``dep_axes`` the sum is evaluated point by point."""
    axes = tuple(range(1, g.ndim + 1))
    G = np.fft.fftn(g.values)[None]
    freqs = _face_freq_mesh(g)
    if not dep_axes:
        return np.fft.ifftn(kernel(freqs, None) * G, axes=axes)
    combos = int(np.prod([g.shape[a] for a in dep_axes]))
    if combos * g.values.size > cost_cap:
        raise OperatorError(f"coordinate-dependent action exceeds the cost cap ({combos} x {g.values.size})")
    out = None
    for idx in itertools.product(*[range(g.shape[a]) for a in dep_axes]):
        coords = [0.0] * g.ndim
        sl = [slice(None)] * g.ndim
        for a, i in zip(dep_axes, idx):
            coords[a] = g.coords(a)[i]
            sl[a] = i
        full = np.fft.ifftn(kernel(freqs, tuple(coords)) * G, axes=axes)
        if out is None:
            out = np.zeros(full.shape, dtype=complex)
        out[(slice(None),) + tuple(sl)] = full[(slice(None),) + tuple(sl)]
    return out


def _coords_for(sym: Symbol, face_coords, face_ndim: int, axis: int, normal: float):
    if not sym.x_dependent:
        return None
    c = list(face_coords) if face_coords is not None else [0.0] * face_ndim
    c.insert(axis, normal)
    return tuple(c)


def _face_dep_axes(sym: Symbol, axis: int) -> list:
    out = []
    for a in range(sym.ndim):
        if a != axis and sym.depends_on_coord(a):
            out.append(a - (a > axis))
    return out


def assemble(g: BoundaryDistribution, planes: np.ndarray, values: np.ndarray) -> GridFunction:
    vals = np.zeros(g.ambient_shape, dtype=complex)
    moved = np.moveaxis(vals, g.axis, 0)
    moved[planes] = values
    return GridFunction(vals, g.ambient_L, grid.halfspaces(g.axis))


def _check_dims(sym: Symbol, ndim: int):
    if sym.ndim != ndim:
        raise OperatorError(f"symbol has {sym.ndim} axes, grid has {ndim}")


# ---------------------------------------------------------------- full space


def quantize(sym: Symbol, f: GridFunction, cost_cap: int = COST_CAP) -> GridFunction:
    """``Op(a) f``; ``f`` is treated as a full-space function (half-space
    functions are used as their zero extension)."""
    _check_dims(sym, f.ndim)
    F = np.fft.fftn(f.values)
    freqs = f.freq_mesh()
    dep = [a for a in range(f.ndim) if sym.depends_on_coord(a)]
    if not dep:
        out = np.fft.ifftn(sym(freqs) * F)
        return GridFunction(out, f.L, grid.FULL)
    combos = int(np.prod([f.shape[a] for a in dep]))
    if combos * f.values.size > cost_cap:
        raise OperatorError(f"coordinate-dependent quantization exceeds the cost cap ({combos} x {f.values.size})")
    out = np.zeros(f.shape, dtype=complex)
    for idx in itertools.product(*[range(f.shape[a]) for a in dep]):
        coords = [0.0] * f.ndim
        sl = [slice(None)] * f.ndim
        for a, i in zip(dep, idx):
            coords[a] = f.coords(a)[i]
            sl[a] = i
        full = np.fft.ifftn(sym(freqs, tuple(coords)) * F)
        out[tuple(sl)] = full[tuple(sl)]
    return GridFunction(out, f.L, grid.FULL)


# ---------------------------------------------------------------- boundary layers


def apply_to_boundary(sym: Symbol, g: BoundaryDistribution, planes=None) -> GridFunction:
    """``Op(a)(g_b x delta)`` on ``rho <= 0`` by residues at the lower poles.

    The face plane carries the limit from below.  Values above the face are
    left at zero.
    """
    _check_dims(sym, g.ambient_ndim)
    poles = sym.poles(g.axis)
    if poles is None or not any(p.half_plane == "lower" for p in poles):
        raise OperatorError("symbol has no lower half-plane pole in the normal frequency")
    if any(p.order > 2 for p in poles):
        raise OperatorError("poles of order greater than 2 are not supported")
    planes = g.half_planes() if planes is None else np.asarray(planes)
    rho = g.normal_coords()[planes]
    face_ndim = g.density.ndim
    normal_dep = sym.depends_on_coord(g.axis)

    def kernel(freqs, face_coords):
        af = _ambient_freqs(freqs, g.axis)
        if not normal_dep:
            return boundary_kernel(sym, af, rho, g.axis, _coords_for(sym, face_coords, face_ndim, g.axis, 0.0))
        return np.stack([boundary_kernel(sym, af, np.array([r]), g.axis,
                                         _coords_for(sym, face_coords, face_ndim, g.axis, r))[0] for r in rho])

    vals = tangential_action(g.density, kernel, _face_dep_axes(sym, g.axis))
    return assemble(g, planes, vals)


def _direct_kernel_qawf(sym, af, rho, axis, coords, active):
    shape = af[0].shape
    out = np.zeros((len(rho),) + shape, dtype=complex)
    flat_idx = np.flatnonzero(active)
    for fi in flat_idx:
        pt = [np.asarray(f).ravel()[fi] for f in af]

        def a_of(eta, pt=pt):
            fs = tuple(np.asarray(eta, dtype=float) if a == axis else pt[a] for a in range(len(pt)))
            return complex(sym(fs, coords))

        def even(eta):
            return a_of(eta) + a_of(-eta)

        def odd(eta):
            return a_of(eta) - a_of(-eta)

        for pi, r in enumerate(rho):
            w = abs(r)
            if w == 0:
                re = integrate.quad(lambda e: even(e).real, 0, np.inf, limit=500)[0]
                im = integrate.quad(lambda e: even(e).imag, 0, np.inf, limit=500)[0]
                val = re + 1j * im
            else:
                c_re = integrate.quad(lambda e: even(e).real, 0, np.inf, weight="cos", wvar=w, limlst=200)[0]
                c_im = integrate.quad(lambda e: even(e).imag, 0, np.inf, weight="cos", wvar=w, limlst=200)[0]
                s_re = integrate.quad(lambda e: odd(e).real, 0, np.inf, weight="sin", wvar=w, limlst=200)[0]
                s_im = integrate.quad(lambda e: odd(e).imag, 0, np.inf, weight="sin", wvar=w, limlst=200)[0]
                val = (c_re + 1j * c_im) + 1j * np.sign(r) * (s_re + 1j * s_im)
            out[(pi,) + np.unravel_index(fi, shape)] = val / (2 * np.pi)
    return out


def _direct_kernel_trapezoid(sym, af, rho, axis, coords, h, periods=8, refine=8):
    """Oversampled FFT quadrature of the eta integral; the rho samples must be
    multiples of ``h``."""
    n_rho = len(rho)
    M = int(2 ** math.ceil(math.log2(periods * refine * max(n_rho, 2) * 2)))
    H = h / refine
    eta = 2 * np.pi * np.fft.fftfreq(M, d=H)
    deta = 2 * np.pi / (M * H)
    fs = tuple(eta.reshape((M,) + (1,) * af[0].ndim) if a == axis else np.asarray(f)[None]
               for a, f in enumerate(af))
    vals = sym(fs, coords)
    series = np.fft.ifft(vals, axis=0) * M * deta / (2 * np.pi)
    steps = np.rint(rho / H).astype(int) % M
    return series[steps]


def apply_to_boundary_direct(sym: Symbol, g: BoundaryDistribution, planes=None, method: str = "qawf",
                             tol: float = 1e-14) -> GridFunction:
    """``Op(a)(g_b x delta)`` on ``rho <= 0`` by eta quadrature per
    tangential frequency; works without pole data.

    ``method="qawf"`` uses Fourier-weighted adaptive quadrature on the
    frequencies where ``g_b`` is active; ``"trapezoid"`` uses an oversampled
    FFT over eta (fast, for large frequency families).
    """
    _check_dims(sym, g.ambient_ndim)
    if sym.order > -1:
        raise OperatorError("eta quadrature needs order <= -1")
    planes = g.half_planes() if planes is None else np.asarray(planes)
    rho = g.normal_coords()[planes]
    if sym.order > -2 and np.any(rho == 0):
        keep = rho < 0
        planes, rho = planes[keep], rho[keep]
    face_ndim = g.density.ndim
    G = np.fft.fftn(g.density.values)
    active = np.abs(G) > tol * max(np.abs(G).max(), 1e-300)
    h = 2 * g.L_normal / g.N_normal
    if sym.depends_on_coord(g.axis):
        raise OperatorError("direct boundary action does not support normal-coordinate dependence")

    def kernel(freqs, face_coords):
        af = _ambient_freqs(freqs, g.axis)
        coords = _coords_for(sym, face_coords, face_ndim, g.axis, 0.0)
        if method == "qawf":
            return _direct_kernel_qawf(sym, af, rho, g.axis, coords, active)
        if method == "trapezoid":
            return _direct_kernel_trapezoid(sym, af, rho, g.axis, coords, h)
        raise OperatorError(f"unknown method {method!r}")

    vals = tangential_action(g.density, kernel, _face_dep_axes(sym, g.axis))
    return assemble(g, planes, vals)


def rho_compose(sym: Symbol, g: BoundaryDistribution, p: int = 1) -> GridFunction:
    """``Op((i d/deta)^p a)(g_b x delta)``, which equals ``rho^p A(g_b x delta)``."""
    if p < 0 or int(p) != p:
        raise OperatorError("power must be a non-negative integer")
    d = sym
    for _ in range(p):
        d = eta_derivative(d, g.axis)
    poles = d.poles(g.axis)
    if poles is not None and all(q.order <= 2 for q in poles) and any(q.half_plane == "lower" for q in poles):
        return apply_to_boundary(d, g)
    return apply_to_boundary_direct(d, g)


def restrict_compose(sym: Symbol, g: BoundaryDistribution, method: str = "auto") -> GridFunction:
    """``R A (g_b x delta) = Op_b(alpha) g_b`` with ``alpha`` the boundary symbol."""
    _check_dims(sym, g.ambient_ndim)
    face_ndim = g.density.ndim

    def kernel(freqs, face_coords):
        af = _ambient_freqs(freqs, g.axis)
        coords = _coords_for(sym, face_coords, face_ndim, g.axis, 0.0)
        return boundary_symbol(sym, 0.0, g.axis, af, coords, method)[None]

    vals = tangential_action(g.density, kernel, _face_dep_axes(sym, g.axis))[0]
    return GridFunction(vals, g.density.L, g.density.support)


def boundary_operator(multiplier, g: GridFunction, coord_dependent: bool = False) -> GridFunction:
    """``Op_b(b) g`` for a tangential multiplier ``b(freqs[, coords])``."""
    dep = list(range(g.ndim)) if coord_dependent else []

    def kernel(freqs, coords):
        return np.asarray(multiplier(freqs, coords) if coord_dependent else multiplier(freqs))[None]

    return GridFunction(tangential_action(g, kernel, dep)[0], g.L, g.support)


# ---------------------------------------------------------------- half-space interior


GAUSS_NODES = 16


def _stencils(P: int):
    """Interpolation offsets (relative to the right end ``i`` of the cell
    ``[rho_{i-1}, rho_i]``) for the first, interior and last cells."""
    if P < 4:
        return (-1, 0), (-1, 0), (-1, 0)
    return (-1, 0, 1, 2), (-2, -1, 0, 1), (-3, -2, -1, 0)


def _cell_weights(q, h, offsets, power):
    """``int_0^h l_m(rho_i - s) s^power e^{iqs} ds`` for the Lagrange basis
    on ``offsets``; shape ``(len(offsets),) + q.shape``."""
    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    s = 0.5 * h * (x + 1)
    w = 0.5 * h * w
    tau = -s / h
    basis = np.ones((len(offsets), len(s)))
    for m, om in enumerate(offsets):
        for l, ol in enumerate(offsets):
            if l != m:
                basis[m] *= (tau - ol) / (om - ol)
    ex = np.exp(1j * np.asarray(q)[..., None] * s)
    return np.einsum("mg,...g->m...", basis * w * s ** power, ex)


def exp_convolution(ft: np.ndarray, q, h: float, order: int = 1):
    """``I(rho_i) = int_{rho_0}^{rho_i} f(t) e^{iq(rho_i - t)} dt`` (and, for
    ``order = 2``, ``J`` with the extra factor ``rho_i - t``) along axis 0
    for ``Im q > 0``.

    Each cell integrates a local cubic interpolant of ``f`` against the exact
    exponential, so the error is fourth order in ``h`` uniformly in ``q``
    (for ``|q h|`` up to about 10); the recursion only multiplies by the
    decaying factor ``e^{iqh}``.
    """
    ft = np.asarray(ft, dtype=complex)
    P = ft.shape[0]
    q = np.asarray(q)
    shape = np.broadcast_shapes(ft.shape[1:], q.shape)
    I = np.zeros((P,) + shape, dtype=complex)
    J = np.zeros((P,) + shape, dtype=complex) if order > 1 else None
    e = np.exp(1j * q * h)
    first, mid, last = _stencils(P)
    W1 = {o: _cell_weights(q, h, o, 0) for o in {first, mid, last}}
    W2 = {o: _cell_weights(q, h, o, 1) for o in {first, mid, last}} if order > 1 else None
    for i in range(1, P):
        offs = first if i == 1 else (last if i == P - 1 else mid)
        fm = [ft[i + o] for o in offs]
        I[i] = e * I[i - 1] + sum(w * f for w, f in zip(W1[offs], fm))
        if order > 1:
            J[i] = e * (J[i - 1] + h * I[i - 1]) + sum(w * f for w, f in zip(W2[offs], fm))
    return I, J


def volterra_transform(ft: np.ndarray, q, coeffs, h: float, half: str = "upper") -> np.ndarray:
    """Pole contribution to ``int K(rho - t) f~(t) dt`` along axis 0.

    ``ft`` holds ``f~`` on consecutive planes ``rho_0 < ... < rho_z`` (axis 0);
    ``coeffs`` are the Laurent coefficients ``c_{-1}, c_{-2}`` at the pole
    ``q``.  For an upper pole this is

        i * sum_n c_{-n} int_{-inf}^{rho} f~(t) (i(rho - t))^{n-1}/(n-1)! e^{iq(rho - t)} dt

    (a Volterra integral); for a lower pole the integral runs over
    ``(rho, rho_z)`` with prefactor ``-i``.
    """
    ft = np.asarray(ft, dtype=complex)
    order = len(coeffs)
    if half == "upper":
        I, J = exp_convolution(ft, q, h, order)
        pref, jsign = 1j, 1.0
    else:
        # reflect t -> -t: the lower pole becomes an upper pole of -q
        I, J = exp_convolution(ft[::-1], -np.asarray(q), h, order)
        I = I[::-1]
        J = J[::-1] if J is not None else None
        pref, jsign = -1j, -1.0
    val = coeffs[0] * I
    if order > 1:
        val = val + coeffs[1] * 1j * jsign * J
    return pref * val


def volterra_apply(sym: Symbol, f: GridFunction, axis: int = -1, include_lower: bool = False) -> GridFunction:
    """Upper-pole (Volterra) part of ``Op(a) f`` for ``f`` supported in
    ``rho_axis <= 0``.  With ``include_lower`` the lower-pole part is added,
    which reproduces the full action restricted to the half space."""
    _check_dims(sym, f.ndim)
    axis %= f.ndim
    poles = sym.poles(axis)
    if poles is None:
        raise OperatorError("symbol is not meromorphic in the normal frequency")
    upper = [p for p in poles if p.half_plane == "upper"]
    if not upper:
        raise OperatorError("symbol has no upper half-plane pole")
    if any(not p.elliptic_imaginary for p in upper):
        raise OperatorError("upper pole is not elliptic imaginary; the kernel would not decay")
    if any(p.order > 2 for p in poles):
        raise OperatorError("poles of order greater than 2 are not supported")
    if sym.depends_on_coord(axis):
        raise OperatorError("volterra_apply does not support normal-coordinate dependence")
    n = f.shape[axis]
    z = grid.zero_index(n)
    h = f.h[axis]
    vals = np.where(grid.region_mask(f.shape, [axis]), f.values, 0.0)
    vals = np.moveaxis(vals, axis, 0)[: z + 1]
    face_g = GridFunction(vals[0], tuple(l for a, l in enumerate(f.L) if a != axis))
    tang_axes = tuple(range(1, f.ndim))
    Ft = np.fft.fftn(vals, axes=tang_axes)
    use = [p for p in poles if include_lower or p.half_plane == "upper"]
    dep = _face_dep_axes(sym, axis)

    def kernel(freqs, face_coords):
        af = _ambient_freqs(freqs, axis)
        coords = _coords_for(sym, face_coords, f.ndim - 1, axis, 0.0)
        total = np.zeros(Ft.shape, dtype=complex)
        for p in use:
            coeffs = laurent_coefficients(sym, p, poles, af, coords)
            total += volterra_transform(Ft, p.location(af, coords), coeffs, h, p.half_plane)
        return total

    if not dep:
        res = np.fft.ifftn(kernel(_face_freq_mesh(face_g), None), axes=tang_axes)
    else:
        res = np.zeros(Ft.shape, dtype=complex)
        combos = int(np.prod([face_g.shape[a] for a in dep]))
        if combos * Ft.size > COST_CAP:
            raise OperatorError("coordinate-dependent action exceeds the cost cap")
        for idx in itertools.product(*[range(face_g.shape[a]) for a in dep]):
            coords = [0.0] * face_g.ndim
            sl = [slice(None)] * face_g.ndim
            for a, i in zip(dep, idx):
                coords[a] = face_g.coords(a)[i]
                sl[a] = i
            full = np.fft.ifftn(kernel(_face_freq_mesh(face_g), tuple(coords)), axes=tang_axes)
            res[(slice(None),) + tuple(sl)] = full[(slice(None),) + tuple(sl)]
    out = np.zeros(np.moveaxis(np.empty(f.shape), axis, 0).shape, dtype=complex)
    out[: z + 1] = res
    return GridFunction(np.moveaxis(out, 0, axis), f.L, grid.halfspaces(axis))
