"""The model elliptic operator

    Gamma = -d_rho^2 - sum d_j^2 + sum c_ij(x) d_i d_j + s(x, rho) d_rho + m^2

on the half space ``rho <= 0`` (normal axis last) and its boundary
operators: the Dirichlet-to-Neumann map, the Poisson and Green operators,
the boundary factor of ``Theta^-`` and multiplication by powers of rho.

With ``Xi(x, xi) = (|xi|^2 - sum c_ij xi_i xi_j + m^2)^{1/2}`` the principal
symbol is ``eta^2 + Xi^2``.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import sympy as sp

from . import grid, halfspace, sobolev
from .grid import GridFunction
from .symbols import K, Y, parse_expression

TANGENTIAL_LAYOUTS = {1: ("x",), 2: ("x1", "x2")}


class BVPError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class EllipticOperatorSpec:
    """Coefficients as expression strings in the tangential coordinates
    (``x`` or ``x1, x2``); ``s_coef`` may also use ``rho``.  ``c`` is a
    square table of rows, empty for the flat Laplacian."""

    tangential_dim: int = 1
    c: tuple = ()
    s_coef: str = "0"
    mass: float = 0.0

    def __post_init__(self):
        n = self.tangential_dim
        if n not in (1, 2):
            raise BVPError("tangential dimension must be 1 or 2")
        if self.mass < 0:
            raise BVPError("mass must be non-negative")
        c = tuple(tuple(str(v) for v in row) for row in self.c)
        if c and (len(c) != n or any(len(row) != n for row in c)):
            raise BVPError(f"coefficient table must be {n}x{n}")
        object.__setattr__(self, "c", c)
        exprs = self.c_exprs
        for i in range(n):
            for j in range(n):
                if sp.simplify(exprs[i][j] - exprs[j][i]) != 0:
                    raise BVPError("coefficient table must be symmetric")

    @property
    def c_exprs(self) -> list:
        n = self.tangential_dim
        if not self.c:
            return [[sp.Integer(0)] * n for _ in range(n)]
        layout = TANGENTIAL_LAYOUTS[n]
        return [[parse_expression(v, layout) for v in row] for row in self.c]

    @property
    def s_expr(self) -> sp.Expr:
        return parse_expression(self.s_coef, TANGENTIAL_LAYOUTS[self.tangential_dim] + ("rho",))

    @property
    def constant(self) -> bool:
        return not any(e.free_symbols for row in self.c_exprs for e in row)

    @property
    def flat(self) -> bool:
        return all(e == 0 for row in self.c_exprs for e in row)

    def coefficients(self, coords) -> np.ndarray:
        """``c_ij`` at the tangential points ``coords``; shape (n, n) + shape."""
        n = self.tangential_dim
        coords = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[c.shape for c in coords])
        out = np.zeros((n, n) + shape)
        for i, row in enumerate(self.c_exprs):
            for j, e in enumerate(row):
                out[i, j] = np.broadcast_to(sp.lambdify(Y[:n], e, "numpy")(*coords), shape)
        return out

    def ellipticity_constant(self, L=np.pi, samples: int = 64) -> float:
        """``min_x`` smallest eigenvalue of ``I - C(x)`` over a sample grid."""
        n = self.tangential_dim
        pts = np.meshgrid(*[grid.axis_coords(L, samples)] * n, indexing="ij")
        C = self.coefficients(pts).reshape(n, n, -1)
        A = np.eye(n)[..., None] - C
        eig = np.linalg.eigvalsh(np.moveaxis(A, -1, 0))
        return float(eig.min())


@dataclasses.dataclass(frozen=True)
class XiSymbol:
    spec: EllipticOperatorSpec

    def __post_init__(self):
        c0 = self.spec.ellipticity_constant()
        if c0 <= 0:
            raise BVPError(f"ellipticity violated: c0 = {c0:.3g}")
        object.__setattr__(self, "c0", c0)

    def squared(self, freqs, coords=None) -> np.ndarray:
        n = self.spec.tangential_dim
        out = sum(np.asarray(f, dtype=float) ** 2 for f in freqs) + self.spec.mass ** 2
        if not self.spec.flat:
            coords = coords if coords is not None else (0.0,) * n
            C = self.spec.coefficients(coords)
            for i in range(n):
                for j in range(n):
                    out = out - C[i, j] * freqs[i] * freqs[j]
        return out

    def __call__(self, freqs, coords=None) -> np.ndarray:
        return np.sqrt(np.maximum(self.squared(freqs, coords), 0.0))

    def expr(self) -> sp.Expr:
        """``Xi^2`` as an expression in ``k0..`` and ``y0..`` (tangential axes first)."""
        n = self.spec.tangential_dim
        e = sum(K[i] ** 2 for i in range(n)) + sp.nsimplify(self.spec.mass) ** 2
        for i, row in enumerate(self.spec.c_exprs):
            for j, c in enumerate(row):
                e -= c * K[i] * K[j]
        return e


def xi_symbol(spec: EllipticOperatorSpec) -> XiSymbol:
    return XiSymbol(spec)


def _tangential_axes(spec):
    return list(range(spec.tangential_dim))


def _face_kernel(xi: XiSymbol, fn):
    """Wrap ``fn(Xi)`` as a kernel for the tangential action."""
    def kernel(freqs, coords):
        return np.asarray(fn(xi(freqs, coords)))
    return kernel


def _dep(spec):
    return [] if spec.constant else _tangential_axes(spec)


# ---------------------------------------------------------------- boundary maps


def dno(spec: EllipticOperatorSpec, g_b: GridFunction) -> GridFunction:
    """Principal Dirichlet-to-Neumann map ``Op_b(Xi) g_b``."""
    xi = xi_symbol(spec)
    vals = halfspace.tangential_action(g_b, _face_kernel(xi, lambda X: X[None]), _dep(spec))[0]
    return GridFunction(vals, g_b.L, g_b.support)


def poisson(spec: EllipticOperatorSpec, g_b: GridFunction, L_normal: float, N_normal: int) -> GridFunction:
    """``v(x, rho) = sum_xi g~(xi) e^{i x xi} e^{rho Xi(x, xi)}`` on ``rho <= 0``."""
    xi = xi_symbol(spec)
    g = halfspace.boundary_distribution(g_b, -1, L_normal, N_normal)
    planes = g.half_planes()
    rho = g.normal_coords()[planes]
    r = rho.reshape((-1,) + (1,) * g_b.ndim)
    vals = halfspace.tangential_action(g_b, _face_kernel(xi, lambda X: np.exp(r * X[None])), _dep(spec))
    return halfspace.assemble(g, planes, vals)


# ---------------------------------------------------------------- applying Gamma


def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives ``0..m`` at ``x0`` on the
    nodes ``x`` (Fornberg's recursion); shape ``(m + 1, len(x))``."""
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def normal_derivative_matrix(P: int, h: float, m: int, points: int = 13) -> np.ndarray:
    """Dense ``P x P`` matrix of the ``m``-th derivative on ``P`` equispaced
    planes, using the ``points`` nearest nodes (one-sided near the ends)."""
    D = np.zeros((P, P))
    x = np.arange(P) * h
    points = min(points, P)
    for i in range(P):
        lo = min(max(i - points // 2, 0), P - points)
        D[i, lo: lo + points] = fd_weights(x[i], x[lo: lo + points], m)[m]
    return D


def apply_gamma(spec: EllipticOperatorSpec, u: GridFunction, extend: bool = True) -> GridFunction:
    """``Gamma u``: spectral derivatives in ``x``; in ``rho``, high-order
    one-sided finite differences on the planes ``rho <= 0`` for half-space
    functions, spectral derivatives for full-space functions (or when
    ``extend`` is false)."""
    n = spec.tangential_dim
    if u.ndim != n + 1:
        raise BVPError("grid must have the tangential axes plus one normal axis")
    normal = n
    half = extend and u.support.kind == "half" and normal in u.support.axes
    vals = np.where(grid.region_mask(u.shape, u.support.axes), u.values, 0.0) if u.support.kind == "half" else u.values
    z = grid.zero_index(u.shape[normal])

    def d(beta):
        if half and beta[normal]:
            tang = list(beta)
            tang[normal] = 0
            base = sobolev.spectral_derivative(vals, u.L, tang)
            planes = np.moveaxis(base, normal, 0)[: z + 1]
            D = normal_derivative_matrix(z + 1, u.h[normal], beta[normal])
            out = np.zeros_like(np.moveaxis(base, normal, 0))
            out[: z + 1] = np.tensordot(D, planes, axes=(1, 0))
            return np.moveaxis(out, 0, normal)
        return sobolev.spectral_derivative(vals, u.L, beta)

    def unit(*axes):
        b = [0] * u.ndim
        for a in axes:
            b[a] += 1
        return b

    out = -d(unit(normal, normal)) + spec.mass ** 2 * vals
    for j in range(n):
        out = out - d(unit(j, j))
    if not spec.flat:
        mesh = u.mesh()
        C = spec.coefficients(mesh[:n])
        for i in range(n):
            for j in range(n):
                out = out + C[i, j] * d(unit(i, j))
    s = spec.s_expr
    if s != 0:
        mesh = u.mesh()
        sv = sp.lambdify(list(Y[: n + 1]), s, "numpy")(*mesh)
        out = out + sv * d(unit(normal))
    if u.support.kind == "half":
        out = np.where(grid.region_mask(u.shape, u.support.axes), out, 0.0)
    return u.with_values(out)


def harmonicity_residual(spec: EllipticOperatorSpec, u: GridFunction) -> float:
    """``|Gamma u|_{L^2(window)} / |u|_{L^2(window)}`` on the inner window."""
    r = apply_gamma(spec, u)
    nu = sobolev.local_norm(u, 0)
    return sobolev.local_norm(r, 0) / nu if nu > 0 else 0.0


# ---------------------------------------------------------------- Green operator


def _frozen_solve(spec, vals, L_tang, h, xi, strict=True):
    """Dirichlet solve with the symbol frozen at each tangential point.

    ``vals`` holds ``f`` on the planes ``rho_0..0`` (axis 0).  Per frequency
    the solution is ``U - U(0) e^{rho Xi}`` with the whole-space part
    ``U(rho) = (1 / 2 Xi) int f~(t) e^{-Xi |rho - t|} dt``, split into the
    two exponential convolutions.
    """
    n = vals.ndim - 1
    tang = tuple(range(1, n + 1))
    Ft = np.fft.fftn(vals, axes=tang)
    face_g = GridFunction(np.zeros(vals.shape[1:]), L_tang)
    freqs = tuple(np.meshgrid(*[face_g.freqs(a) for a in range(n)], indexing="ij"))
    P = vals.shape[0]
    rho = h * (np.arange(P) - (P - 1)).reshape((-1,) + (1,) * n)
    zero_mode = (slice(None),) + (0,) * n
    if spec.mass == 0 and strict:
        scale = max(np.max(np.abs(Ft)), 1e-300)
        if np.max(np.abs(Ft[zero_mode])) > 1e-12 * scale:
            raise BVPError("zero tangential frequency is not invertible with m = 0")

    def solve(coords):
        X = xi(freqs, coords)
        safe = np.where(X > 0, X, 1.0)
        up, _ = halfspace.exp_convolution(Ft, 1j * safe, h)
        low, _ = halfspace.exp_convolution(Ft[::-1], 1j * safe, h)
        U = (up + low[::-1]) / (2 * safe)
        G = U - U[-1] * np.exp(rho * safe)
        return np.where(X > 0, G, 0.0)

    if spec.constant:
        return np.fft.ifftn(solve(None), axes=tang)
    out = np.zeros(vals.shape, dtype=complex)
    for idx in np.ndindex(*face_g.shape):
        coords = tuple(face_g.coords(a)[i] for a, i in enumerate(idx))
        out[(slice(None),) + idx] = np.fft.ifftn(solve(coords), axes=tang)[(slice(None),) + idx]
    return out


def green(spec: EllipticOperatorSpec, f: GridFunction, corrections: int = 1) -> GridFunction:
    """Dirichlet solution of ``Gamma u = f``, ``u = 0`` at ``rho = 0``.

    This is the whole-space inverse of the zero extension of ``f`` minus the
    Poisson extension of its trace, evaluated per tangential frequency from
    the exact kernels of ``1 / (eta^2 + Xi^2)``.  With ``x``-dependent
    coefficients the symbol is frozen per point and ``corrections`` parametrix
    steps are applied to the residual.
    """
    n = spec.tangential_dim
    normal = n
    if f.ndim != n + 1:
        raise BVPError("grid must have the tangential axes plus one normal axis")
    xi = xi_symbol(spec)
    z = grid.zero_index(f.shape[normal])
    h = f.h[normal]
    region = grid.halfspaces(normal)

    def solve(values, strict=True):
        planes = np.moveaxis(values, normal, 0)[: z + 1]
        sol = _frozen_solve(spec, planes, f.L[:n], h, xi, strict)
        full = np.zeros(np.moveaxis(values, normal, 0).shape, dtype=complex)
        full[: z + 1] = sol
        return GridFunction(np.moveaxis(full, 0, normal), f.L, region)

    u = solve(f.values)
    if not spec.constant:
        for _ in range(corrections):
            r = f.values - apply_gamma(spec, u).values
            r = np.where(grid.region_mask(f.shape, [normal]), r, 0.0)
            u = u + solve(r, strict=False)
    return u


# ---------------------------------------------------------------- Theta^- boundary factor


def face_quadrature_weights(n: int, h: float) -> np.ndarray:
    """Weights for ``int_{-L}^{0}`` on the planes ``0..z`` with fourth-order
    end correction at the face."""
    z = grid.zero_index(n)
    w = np.full(z + 1, h)
    w[z - 3:] = sobolev.GREGORY[::-1] * h
    return w


def theta_minus_boundary(spec: EllipticOperatorSpec, f: GridFunction) -> GridFunction:
    """``-int_{-inf}^0 f~(xi, t) e^{t Xi(x, xi)} dt`` per frequency, synthesized
    in ``x`` (point by point when the coefficients depend on ``x``).

    This is the boundary normal derivative of the Green operator computed
    from the contour-integrated kernel; it is exact for constant
    coefficients.
    """
    n = spec.tangential_dim
    normal = n
    xi = xi_symbol(spec)
    N = f.shape[normal]
    z = grid.zero_index(N)
    t = grid.axis_coords(f.L[normal], N)[: z + 1]
    w = face_quadrature_weights(N, f.h[normal])
    vals = np.moveaxis(f.values, normal, 0)[: z + 1]
    tang_L = f.L[:n]
    tang = tuple(range(1, n + 1))
    Ft = np.fft.fftn(vals, axes=tang)
    face_g = GridFunction(vals[0], tang_L)
    freqs = tuple(np.meshgrid(*[face_g.freqs(a) for a in range(n)], indexing="ij"))
    tt = t.reshape((-1,) + (1,) * n)
    ww = w.reshape((-1,) + (1,) * n)

    def combine(coords):
        X = xi(freqs, coords)
        return -np.sum(ww * Ft * np.exp(tt * X[None]), axis=0)

    if spec.constant:
        out = np.fft.ifftn(combine(None))
    else:
        out = np.zeros(face_g.shape, dtype=complex)
        for idx in np.ndindex(*face_g.shape):
            coords = tuple(face_g.coords(a)[i] for a, i in enumerate(idx))
            out[idx] = np.fft.ifftn(combine(coords))[idx]
    return GridFunction(out, tang_L, grid.face(normal))


def green_boundary_derivative(spec: EllipticOperatorSpec, f: GridFunction) -> GridFunction:
    """``R d_rho G f`` from the computed Green solution (one-sided
    fourth-order difference at the face)."""
    u = green(spec, f)
    normal = spec.tangential_dim
    h = f.h[normal]
    z = grid.zero_index(f.shape[normal])
    p = [np.take(u.values, z - k, axis=normal) for k in range(5)]
    d = (25 * p[0] - 48 * p[1] + 36 * p[2] - 16 * p[3] + 3 * p[4]) / (12 * h)
    return GridFunction(d, f.L[:normal], grid.face(normal))


# ---------------------------------------------------------------- Ligocka map


def ligocka_multiply(spec: EllipticOperatorSpec, u: GridFunction, p: int, tol: float = 1e-6) -> GridFunction:
    """``rho^p u`` for a Gamma-harmonic ``u``; rejects ``u`` whose relative
    harmonicity residual on the inner window exceeds ``tol``."""
    if p < 0 or int(p) != p:
        raise BVPError("p must be a non-negative integer")
    if p == 0:
        return u
    res = harmonicity_residual(spec, u)
    if res > tol:
        raise BVPError(f"harmonicity residual {res:.3g} exceeds {tol:g}")
    rho = u.mesh()[spec.tangential_dim]
    return u.with_values(u.values * rho ** p)
