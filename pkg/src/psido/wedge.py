"""Intersections of coordinate half-spaces ``H_I = {rho_j < 0, j in I}``.

The ambient layout is ``(x, rho_1, rho_2)``: axis 0 is tangential, the
half-space axes are 1 and 2.  Face ``j`` is the plane ``rho_j = 0``; its grid
is the ambient grid with axis ``j`` removed, so on either face the remaining
normal coordinate sits at own index 1.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import grid, halfspace, sobolev
from .bvp import BVPError, EllipticOperatorSpec
from .grid import GridFunction
from .halfspace import BoundaryDistribution, OperatorError
from .sobolev import ExponentReport, SobolevSpec
from .symbols import Symbol, SymbolError, decompose, reduced_elliptic

DEFAULT_LAMBDAS = (1, 2, 4, 8)


@dataclasses.dataclass(frozen=True)
class WedgeConfig:
    I: tuple = (1, 2)
    n: int = 3

    def __post_init__(self):
        I = tuple(int(a) for a in self.I)
        object.__setattr__(self, "I", I)
        if self.n not in (2, 3):
            raise grid.GridError("total dimension must be 2 or 3")
        if len(set(I)) != len(I) or not 1 <= len(I) <= 2:
            raise grid.GridError("need one or two distinct half-space axes")
        if len(I) > self.n or any(not 0 <= a < self.n for a in I):
            raise grid.GridError("half-space axes out of range")

    @property
    def m(self) -> int:
        return len(self.I)

    @property
    def faces(self) -> tuple:
        return self.I

    def other(self, j: int) -> tuple:
        return tuple(a for a in self.I if a != j)

    def face_axes(self, j: int) -> tuple:
        """Half-space axes of face ``j`` in face-own indices."""
        return tuple(a - (a > j) for a in self.other(j))


@dataclasses.dataclass(frozen=True, eq=False)
class FaceDistribution:
    """``g_b^E x delta_j`` with ``g_b`` stored on the full face grid and zero
    outside the wedge part of the face."""

    density: GridFunction
    axis: int
    L: tuple
    N: tuple
    wedge: WedgeConfig = WedgeConfig()

    def __post_init__(self):
        w, j = self.wedge, self.axis
        if j not in w.I:
            raise grid.GridError(f"axis {j} is not a half-space axis")
        d = self.density
        if d.ndim != w.n - 1:
            raise grid.GridError("face density has the wrong dimension")
        axes = w.face_axes(j)
        vals = np.where(grid.region_mask(d.shape, axes), d.values, 0.0)
        object.__setattr__(self, "density", GridFunction(vals, d.L, grid.face(j, *axes)))
        object.__setattr__(self, "L", tuple(float(v) for v in self.L))
        object.__setattr__(self, "N", tuple(int(v) for v in self.N))

    def boundary(self) -> BoundaryDistribution:
        return BoundaryDistribution(self.density, self.axis, self.L[self.axis], self.N[self.axis])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.density.values)


def face_distribution(func, j: int, L, N, wedge: WedgeConfig = WedgeConfig()) -> FaceDistribution:
    """Sample ``func`` (taking the face coordinates) on face ``j`` of the
    ambient grid ``(L, N)``."""
    L, N = tuple(L), tuple(N)
    fL = tuple(v for a, v in enumerate(L) if a != j)
    fN = tuple(v for a, v in enumerate(N) if a != j)
    return FaceDistribution(grid.from_function(func, fL, fN), j, L, N, wedge)


def cross_symbol(alpha: float, normal_axis: int, ndim: int = 3, mass: float = 1.0) -> Symbol:
    """Meromorphic order ``-alpha - 1`` symbol ``c^{1-alpha} / (eta^2 + c^2)``."""
    return reduced_elliptic(ndim, normal_axis, mass, shift=1 - alpha)


# ---------------------------------------------------------------- boundary actions


def _direct_action(sym: Symbol, g: BoundaryDistribution, planes: np.ndarray) -> GridFunction:
    """Oversampled eta quadrature, one tangential frequency row at a time."""
    if sym.x_dependent:
        raise OperatorError("direct wedge action needs a coordinate-free symbol")
    rho = g.normal_coords()[planes]
    h = 2 * g.L_normal / g.N_normal
    d = g.density
    G = np.fft.fftn(d.values)
    freqs = halfspace._face_freq_mesh(d)
    K = np.zeros((len(rho),) + d.shape, dtype=complex)
    for i in range(d.shape[0]):
        af = halfspace._ambient_freqs(tuple(f[i] for f in freqs), g.axis)
        K[:, i] = halfspace._direct_kernel_trapezoid(sym, af, rho, g.axis, None, h)
    vals = np.fft.ifftn(K * G[None], axes=tuple(range(1, d.ndim + 1)))
    return halfspace.assemble(g, planes, vals)


def boundary_action(sym: Symbol, g: FaceDistribution, method: str = "auto", N_decompose: int = 6) -> GridFunction:
    """``A(g_b^E x delta_j)`` on every plane of the ambient grid (both sides
    of the face), support marked as the full space.

    ``method="auto"`` uses residues for meromorphic symbols and the
    principal/remainder split otherwise; ``"direct"`` forces eta quadrature.
    """
    bd = g.boundary()
    planes = np.arange(bd.N_normal)
    if method == "direct":
        out = _direct_action(sym, bd, planes)
    elif method in ("auto", "residue"):
        poles = sym.poles(bd.axis)
        if poles is not None and poles and all(p.order <= 2 for p in poles):
            out = halfspace.apply_to_boundary(sym, bd, planes)
        elif method == "residue":
            raise OperatorError("symbol is not meromorphic in the normal frequency")
        else:
            try:
                dec = decompose(sym, N_decompose, bd.axis)
            except SymbolError as exc:
                raise OperatorError(f"symbol is not decomposable: {exc}") from exc
            out = halfspace.apply_to_boundary(dec.principal, bd, planes)
            if dec.remainder.expr != 0:
                out = out + _direct_action(dec.remainder, bd, planes)
    else:
        raise OperatorError(f"unknown method {method!r}")
    return out.with_values(out.values, grid.FULL)


def lre_cross(j: int, k: int, alpha: float, sym: Symbol, g: FaceDistribution) -> GridFunction:
    """``R_k A (g_b^E x delta_j)`` on the full face ``k``; ``sym`` has order
    ``-alpha - 1``."""
    w = g.wedge
    if j == k:
        raise OperatorError("cross operator needs two different faces")
    if j != g.axis or k not in w.I:
        raise OperatorError("faces do not match the distribution")
    if alpha < 0.5:
        raise OperatorError("alpha must be at least 1/2")
    if abs(sym.order + alpha + 1) > 1e-9:
        raise OperatorError(f"symbol order {sym.order} does not equal -alpha - 1 = {-alpha - 1}")
    out_L = tuple(v for a, v in enumerate(g.L) if a != k)
    if g.is_zero:
        shape = tuple(v for a, v in enumerate(g.N) if a != k)
        return GridFunction(np.zeros(shape, dtype=complex), out_L, grid.face(k))
    amb = boundary_action(sym, g)
    out = grid.restrict_boundary(amb, k)
    return GridFunction(out.values, out.L, grid.face(k))


def _as_distribution(f: GridFunction, j: int, template: FaceDistribution) -> FaceDistribution:
    return FaceDistribution(f, j, template.L, template.N, template.wedge)


def lre_self(j: int, variant: str, params: dict, g: FaceDistribution) -> GridFunction:
    """Face ``j`` to face ``j`` operators.

    ``RestrictCompose``: ``params = {"sym", "alpha"}``, symbol of order
    ``-alpha - 1``, restriction of the residue action.
    ``TangentialOp``: ``params = {"alpha"}``, ``Op_b((1 + |xi|^2)^{-alpha/2})``.
    ``Composition``: ``params = {"alpha1", "alpha2", "sym1", "sym2"}``
    (symbols optional), the cross operator to the other face and back.
    """
    if j != g.axis:
        raise OperatorError("face does not match the distribution")
    if variant == "RestrictCompose":
        sym, alpha = params["sym"], params["alpha"]
        if alpha < 1 or abs(sym.order + alpha + 1) > 1e-9:
            raise OperatorError("RestrictCompose needs alpha >= 1 and a symbol of order -alpha - 1")
        bd = g.boundary()
        z = grid.zero_index(bd.N_normal)
        amb = halfspace.apply_to_boundary(sym, bd, np.array([z]))
        out = grid.restrict_boundary(amb, j)
        return GridFunction(out.values, out.L, g.density.support)
    if variant == "TangentialOp":
        alpha = params["alpha"]
        return halfspace.boundary_operator(
            lambda freqs: (1 + sum(f ** 2 for f in freqs)) ** (-alpha / 2), g.density)
    if variant == "Composition":
        a1, a2 = params["alpha1"], params["alpha2"]
        if "alpha" in params and abs(a1 + a2 - params["alpha"]) > 1e-12:
            raise OperatorError("alpha1 + alpha2 must equal alpha")
        if min(a1, a2) < 0.5:
            raise OperatorError("composition orders must be at least 1/2")
        (k,) = g.wedge.other(j)
        s2 = params.get("sym2") or cross_symbol(a2, j, g.wedge.n)
        s1 = params.get("sym1") or cross_symbol(a1, k, g.wedge.n)
        mid = lre_cross(j, k, a2, s2, g)
        return lre_cross(k, j, a1, s1, _as_distribution(mid, k, g))
    raise OperatorError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------- dilation families


def dilation_grid(lam: float, N_rho: int = 64, L_rho: float = 16.0, n: int = 3):
    """Ambient ``(L, N)`` for family member ``lam``: the rho boxes shrink as
    ``1/lam`` at fixed resolution, the x box stays ``[-pi, pi)``."""
    Nx = max(16, 2 ** math.ceil(math.log2(4 * lam)))
    L = (math.pi,) + (L_rho / lam,) * (n - 1)
    N = (Nx,) + (N_rho,) * (n - 1)
    return L, N


def face_family(j: int, lambdas=DEFAULT_LAMBDAS, N_rho: int = 64, L_rho: float = 16.0,
                wedge: WedgeConfig = WedgeConfig(), vanishing: bool = False) -> list:
    """``g_lam(x, t) = cos(lam x) e^{lam t}`` (times ``lam t`` if ``vanishing``)
    on face ``j``."""
    out = []
    for lam in lambdas:
        L, N = dilation_grid(lam, N_rho, L_rho, wedge.n)

        def func(x, t, lam=lam):
            prof = np.exp(lam * np.minimum(t, 0))
            return np.cos(lam * x) * (lam * t * prof if vanishing else prof)

        out.append(face_distribution(func, j, L, N, wedge))
    return out


def wedge_family(lambdas=DEFAULT_LAMBDAS, N_rho: int = 64, L_rho: float = 16.0,
                 wedge: WedgeConfig = WedgeConfig()) -> list:
    """``f_lam = cos(lam x) e^{lam (rho_1 + rho_2)}`` on ``H_I``."""
    out = []
    for lam in lambdas:
        L, N = dilation_grid(lam, N_rho, L_rho, wedge.n)

        def func(x, r1, r2, lam=lam):
            return np.cos(lam * x) * np.exp(lam * (np.minimum(r1, 0) + np.minimum(r2, 0)))

        out.append(grid.from_function(func, L, N, grid.halfspaces(*wedge.I)))
    return out


def _face_in_spec(alpha, s, k, wedge, j):
    axes = wedge.face_axes(j)
    return SobolevSpec(alpha, s, k, weight_axes=axes, region="half", axes=axes)


def _fit(op, family, in_norm, out_norm, lambdas):
    return sobolev.fit_estimate(op, family, in_norm, out_norm, lambdas)


# ---------------------------------------------------------------- estimate drivers


def verify_wedge_boundary_estimate(sym: Symbol, j: int = 1, beta: float = 1.5, s: int = 1, k: int = 1,
                                   path: str = "meromorphic", lambdas=DEFAULT_LAMBDAS, N_rho: int = 64,
                                   wedge: WedgeConfig = WedgeConfig(), family=None) -> ExponentReport:
    """Fit ``|A(g^E x delta_j)|_{W^{beta-1/2,s}(R^n, rho, k)}`` against
    ``|g_b|_{W^{beta-alpha,s}(face, rho_j^, k)}`` with ``alpha = -order``."""
    alpha = -sym.order
    if alpha < 1:
        raise OperatorError("operator order must be at most -1")
    if path == "meromorphic":
        if beta < 0.5 or beta - alpha > 0.5:
            raise OperatorError("need beta >= 1/2 and beta - alpha <= 1/2")
        method = "auto"
    elif path == "generic":
        if beta > alpha - 0.5:
            raise OperatorError("generic path needs beta <= alpha - 1/2")
        method = "direct"
    else:
        raise OperatorError(f"unknown path {path!r}")
    family = family if family is not None else face_family(j, lambdas, N_rho, wedge=wedge)
    out_spec = SobolevSpec(beta - 0.5, s, k, weight_axes=wedge.I, region="full")
    in_spec = _face_in_spec(beta - alpha, s, k, wedge, j)
    return _fit(lambda g: boundary_action(sym, g, method), family,
                lambda g: in_spec.norm(g.density), out_spec, lambdas)


def verify_wedge_interior_estimate(sym: Symbol, s: int = 1, k: int = 1, omit: int | None = None,
                                   lambdas=DEFAULT_LAMBDAS, N_rho: int = 64,
                                   wedge: WedgeConfig = WedgeConfig(), family=None) -> ExponentReport:
    """Fit ``|A f|_{W^{alpha,s}(R^n, rho, k)}`` against ``|f|_{W^{0,s}(H_I, rho, k)}``;
    ``omit`` drops one axis from the weight."""
    alpha = -sym.order
    if alpha < 1:
        raise OperatorError("interior estimate needs alpha >= 1")
    weight = tuple(a for a in wedge.I if a != omit)
    family = family if family is not None else wedge_family(lambdas, N_rho, wedge=wedge)
    out_spec = SobolevSpec(alpha, s, k, weight_axes=weight, region="full")
    in_spec = SobolevSpec(0, s, k, weight_axes=weight, region="half", axes=wedge.I)

    def op(f):
        return halfspace.quantize(sym, grid.extend_by_zero(f, wedge.I))

    return _fit(op, family, in_spec, out_spec, lambdas)


def verify_lre_estimate(alpha: float = 1.5, beta: float = 1.0, s: int = 1, lam: int = 1, j: int = 1,
                        k: int = 2, lambdas=DEFAULT_LAMBDAS, N_rho: int = 64,
                        wedge: WedgeConfig = WedgeConfig(), sym: Symbol | None = None) -> ExponentReport:
    """Fit ``|LRE^{jk} g|_{W^{beta,s}(face k, rho_k^, lam)}`` against
    ``|g_b|_{W^{beta-alpha,s}(face j, rho_j^, lam)}``."""
    if beta < 0 or beta - alpha > 0.5 or beta - alpha < -0.5:
        raise OperatorError("need beta >= 0 and -1/2 <= beta - alpha <= 1/2")
    sym = sym or cross_symbol(alpha, j, wedge.n)
    family = face_family(j, lambdas, N_rho, wedge=wedge)
    out_spec = SobolevSpec(beta, s, lam, weight_axes=wedge.face_axes(k), region="full")
    in_spec = _face_in_spec(beta - alpha, s, lam, wedge, j)
    return _fit(lambda g: lre_cross(j, k, alpha, sym, g), family,
                lambda g: in_spec.norm(g.density), out_spec, lambdas)


def verify_composition_estimate(alpha1: float = 1.0, alpha2: float = 0.5, beta: float = 1.0, s: int = 1,
                                lam: int = 1, j: int = 1, lambdas=DEFAULT_LAMBDAS, N_rho: int = 64,
                                wedge: WedgeConfig = WedgeConfig()) -> ExponentReport:
    """Fit the face-``j`` composition through the other face against the
    weighted input norm with ``alpha = alpha1 + alpha2``."""
    if beta < alpha1:
        raise OperatorError("composition estimate needs beta >= alpha1")
    alpha = alpha1 + alpha2
    family = face_family(j, lambdas, N_rho, wedge=wedge)
    spec_out = SobolevSpec(beta, s, lam, weight_axes=wedge.face_axes(j), region="full")
    in_spec = _face_in_spec(beta - alpha, s, lam, wedge, j)
    params = {"alpha1": alpha1, "alpha2": alpha2, "alpha": alpha}
    return _fit(lambda g: lre_self(j, "Composition", params, g), family,
                lambda g: in_spec.norm(g.density), spec_out, lambdas)


# ---------------------------------------------------------------- quarter-space BVP


def _check_bvp(spec: EllipticOperatorSpec, wedge: WedgeConfig):
    if wedge.m != 2 or wedge.n != 3 or wedge.I != (1, 2):
        raise BVPError("weighted BVP check needs the wedge (x, rho_1, rho_2) with I = (1, 2)")
    if not spec.flat or spec.s_expr != 0 or spec.tangential_dim != 1:
        raise BVPError("weighted BVP check needs constant (flat) coefficients")


def odd_reflect(values: np.ndarray, axis: int) -> np.ndarray:
    """Odd extension of the ``t <= 0`` part across ``t = 0``; the periodic
    end plane ``t = -L`` is its own mirror and is set to zero."""
    v = np.moveaxis(np.asarray(values), axis, 0).copy()
    n = v.shape[0]
    z = grid.zero_index(n)
    for i in range(z + 1, n):
        v[i] = -v[n - i]
    v[z] = 0.0
    v[0] = 0.0
    return np.moveaxis(v, 0, axis)


def quarter_poisson(spec: EllipticOperatorSpec, g1: GridFunction, g2: GridFunction, L, N) -> GridFunction:
    """Dirichlet problem ``Gamma u = 0`` on ``{rho_1, rho_2 <= 0}`` with data
    ``g_j`` on face ``j``: half-space Poisson extension of the odd reflection
    of each face density across the other face (exact for flat Gamma)."""
    _check_bvp(spec, WedgeConfig())
    face_spec = EllipticOperatorSpec(tangential_dim=2, mass=spec.mass)
    from .bvp import poisson
    total = np.zeros(tuple(N), dtype=complex)
    for j, g in ((1, g1), (2, g2)):
        odd = g.with_values(odd_reflect(g.values, 1), grid.face(j))
        v = poisson(face_spec, GridFunction(odd.values, odd.L), L[j], N[j]).values
        if j == 1:
            v = np.moveaxis(v, 2, 1)
        total += v
    total = np.where(grid.region_mask(total.shape, (1, 2)), total, 0.0)
    return GridFunction(total, tuple(L), grid.halfspaces(1, 2))


def quarter_green(spec: EllipticOperatorSpec, f: GridFunction) -> GridFunction:
    """``Gamma u = f`` on the quarter space with ``u = 0`` on both faces and
    on the far planes ``rho = -L``.

    Spectral in ``x``; in ``(rho_1, rho_2)`` the fourth-order compact
    nine-point scheme, diagonalized by the type-I sine transform.  Both rho
    axes must share one spacing.
    """
    _check_bvp(spec, WedgeConfig())
    from scipy import fft as sfft
    if not np.isclose(f.h[1], f.h[2]) or f.shape[1] != f.shape[2]:
        raise BVPError("quarter-space solve needs equal rho grids")
    h = f.h[1]
    z = grid.zero_index(f.shape[1])
    M = z
    Q = np.fft.fft(f.values[:, : z + 1, : z + 1], axis=0)
    lap = np.zeros_like(Q)
    lap[:, 1:-1, :] += (Q[:, 2:, :] - 2 * Q[:, 1:-1, :] + Q[:, :-2, :]) / h ** 2
    lap[:, :, 1:-1] += (Q[:, :, 2:] - 2 * Q[:, :, 1:-1] + Q[:, :, :-2]) / h ** 2
    rhs = (Q + h ** 2 / 12 * lap)[:, 1:-1, 1:-1]
    R = sfft.dstn(rhs, type=1, axes=(1, 2))
    lam = -(4 / h ** 2) * np.sin(np.arange(1, M) * np.pi / (2 * M)) ** 2
    l1, l2 = lam[None, :, None], lam[None, None, :]
    xi2 = (f.freqs(0) ** 2 + spec.mass ** 2)[:, None, None]
    S = -(l1 + l2 + h ** 2 / 6 * l1 * l2) + xi2 * (1 + h ** 2 / 12 * (l1 + l2))
    inner = sfft.idstn(R / S, type=1, axes=(1, 2))
    u = np.zeros(f.shape, dtype=complex)
    u[:, 1:z, 1:z] = np.fft.ifft(inner, axis=0)
    return GridFunction(u, f.L, grid.halfspaces(1, 2))


def manufactured_wedge_green(spec: EllipticOperatorSpec, N_x: int = 16, N_rho: int = 128, L_rho: float = 12.0,
                             k: int = 2) -> float:
    """Relative local ``W^1`` error of the quarter-space Green operator on
    ``u = rho_1 rho_2 e^{rho_1 + rho_2} sin(k x)``."""
    _check_bvp(spec, WedgeConfig())
    L, N = (math.pi, L_rho, L_rho), (N_x, N_rho, N_rho)
    m2 = spec.mass ** 2

    def phi(t):
        return t * np.exp(np.minimum(t, 0))

    def phi2(t):
        return (t + 2) * np.exp(np.minimum(t, 0))

    u = grid.from_function(lambda x, a, b: phi(a) * phi(b) * np.sin(k * x), L, N, grid.halfspaces(1, 2))
    f = grid.from_function(
        lambda x, a, b: ((k ** 2 + m2) * phi(a) * phi(b) - phi2(a) * phi(b) - phi(a) * phi2(b)) * np.sin(k * x),
        L, N, grid.halfspaces(1, 2))
    G = quarter_green(spec, f)
    err = sobolev.local_norm(G - u, 1, (1, 2))
    return err / sobolev.local_norm(u, 1, (1, 2))


def verify_weighted_bvp(spec: EllipticOperatorSpec, wedge: WedgeConfig = WedgeConfig(), s: int = 1, k: int = 1,
                        lambdas=DEFAULT_LAMBDAS, N_rho: int = 64, L_rho: float = 16.0) -> tuple:
    """``(poisson_report, green_report)`` for the weighted quarter-space
    estimates.  Poisson: ``|P g|_{W^{1,s}(rho, k)}`` against
    ``sum_j |g_j|_{W^{1/2,s}(face_j, rho_j^, k)}``; Green:
    ``|G f|_{W^{1,s}(rho_1^, k)}`` against ``|f|_{W^{0,s}(rho_1^, k)}``."""
    _check_bvp(spec, wedge)
    faces1 = face_family(1, lambdas, N_rho, L_rho, wedge, vanishing=True)
    faces2 = face_family(2, lambdas, N_rho, L_rho, wedge, vanishing=True)
    pairs = list(zip(faces1, faces2))
    in_face = _face_in_spec(0.5, s, k, wedge, 1)
    out_p = SobolevSpec(1, s, k, weight_axes=(1, 2), region="half", axes=(1, 2))

    def p_in(pair):
        return sum(in_face.norm(g.density) for g in pair)

    def p_op(pair):
        return quarter_poisson(spec, pair[0].density, pair[1].density, pair[0].L, pair[0].N)

    poisson_report = _fit(p_op, pairs, p_in, out_p, lambdas)
    fam = wedge_family(lambdas, N_rho, L_rho, wedge)
    out_g = SobolevSpec(1, s, k, weight_axes=(2,), region="half", axes=(1, 2))
    in_g = SobolevSpec(0, s, k, weight_axes=(2,), region="half", axes=(1, 2))
    green_report = _fit(lambda f: quarter_green(spec, f), fam, in_g, out_g, lambdas)
    return poisson_report, green_report
