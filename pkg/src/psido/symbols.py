"""Symbols a(x, rho, xi, eta) with optional meromorphic structure in one
frequency variable.

Symbols are stored as sympy expressions in the per-axis frequency variables
``k0, k1, ...`` and coordinates ``y0, y1, ...`` (axis order of the grid the
symbol acts on).  Poles with respect to a chosen normal axis are found
symbolically; Laurent coefficients at those poles are computed numerically
by trapezoidal contour integration around each pole.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import re
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy import integrate

MAX_DIM = 3
K = sp.symbols("k0:3", real=True)
Y = sp.symbols("y0:3", real=True)

CONTOUR_POINTS = 64


class SymbolError(ValueError):
    pass


# ---------------------------------------------------------------- grammar

_FREQ_NAME = {"x": "xi", "x1": "xi1", "x2": "xi2", "rho": "eta", "rho1": "eta1", "rho2": "eta2"}
DEFAULT_LAYOUTS = {1: ("x",), 2: ("x", "rho"), 3: ("x", "rho1", "rho2")}
_FUNCS = {"exp": sp.exp, "sqrt": sp.sqrt, "sin": sp.sin, "cos": sp.cos}
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),]))")


def _names(layout: Sequence[str]) -> dict:
    names = {}
    for axis, coord in enumerate(layout):
        if coord not in _FREQ_NAME:
            raise SymbolError(f"unknown coordinate name {coord!r}")
        names[coord] = Y[axis]
        names[_FREQ_NAME[coord]] = K[axis]
    return names


def parse_expression(text: str, layout: Sequence[str]) -> sp.Expr:
    """Parse an ASCII expression over the layout's coordinate and frequency
    names, e.g. ``"1/(1 + xi^2 + eta^2)"`` for layout ``("x", "rho")``.

    Grammar: numbers, names, ``+ - * / ^ **``, parentheses, and the functions
    exp, sqrt, sin, cos.  ``I`` is the imaginary unit and ``pi`` is pi.
    """
    if not text.isascii():
        raise SymbolError("expressions must be ASCII")
    names = _names(layout)
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SymbolError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        num, ident, op = m.groups()
        if num is not None:
            tokens.append(("num", num))
        elif ident is not None:
            tokens.append(("id", ident))
        else:
            tokens.append(("op", "**" if op == "^" else op))
    return _Parser(tokens, names).parse()


class _Parser:
    """Recursive descent: expr := term (('+'|'-') term)*; term := unary (('*'|'/') unary)*;
    unary := ('-'|'+') unary | power; power := atom ('**' unary)?"""

    def __init__(self, tokens, names):
        self.t = tokens
        self.i = 0
        self.names = names

    def peek(self):
        return self.t[self.i] if self.i < len(self.t) else (None, None)

    def eat(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise SymbolError(f"expected {value!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        if self.i != len(self.t):
            raise SymbolError(f"trailing input at token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.eat()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.eat()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.eat()
            return -self.unary()
        if self.peek()[1] == "+":
            self.eat()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "**":
            self.eat()
            return base ** self.unary()
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.eat()
            return sp.nsimplify(val) if "." not in val and "e" not in val.lower() else sp.Float(val)
        if kind == "id":
            self.eat()
            if val in _FUNCS:
                self.eat("(")
                arg = self.expr()
                self.eat(")")
                return _FUNCS[val](arg)
            if val == "I":
                return sp.I
            if val == "pi":
                return sp.pi
            if val in self.names:
                return self.names[val]
            raise SymbolError(f"unknown name {val!r}")
        if val == "(":
            self.eat()
            e = self.expr()
            self.eat(")")
            return e
        raise SymbolError(f"unexpected token {val!r}")


# ---------------------------------------------------------------- evaluation


@functools.lru_cache(maxsize=512)
def _lambdify(expr: sp.Expr, ndim: int):
    args = list(K[:ndim]) + list(Y[:ndim])
    return sp.lambdify(args, expr, modules="numpy")


def _evaluate_expr(expr, ndim, freqs, coords):
    f = _lambdify(expr, ndim)
    coords = tuple(coords) if coords is not None else (0.0,) * ndim
    args = [np.asarray(v, dtype=complex) for v in freqs] + [np.asarray(c, dtype=complex) for c in coords]
    with np.errstate(all="ignore"):
        out = f(*args)
    shape = np.broadcast_shapes(*[np.shape(a) for a in freqs])
    return np.broadcast_to(np.asarray(out, dtype=complex), np.broadcast_shapes(shape, np.shape(out)))


@dataclasses.dataclass(frozen=True)
class PoleData:
    """One pole (in the normal frequency) of a meromorphic symbol.

    ``location`` maps (freqs, coords) to the complex pole position; the
    entry of ``freqs`` at the normal axis is ignored.  ``half_plane`` is
    "upper" or "lower".
    """

    location_expr: sp.Expr
    ndim: int
    axis: int
    order: int
    half_plane: str
    elliptic_imaginary: bool = True

    def location(self, freqs, coords=None) -> np.ndarray:
        return _evaluate_expr(self.location_expr, self.ndim, freqs, coords)


@dataclasses.dataclass(frozen=True, eq=False)
class Symbol:
    expr: sp.Expr
    ndim: int
    order: float
    label: str = ""
    factor: Callable | None = None  # tangential multiplier, e.g. a cutoff
    principal: "Symbol | None" = None
    _poles: dict = dataclasses.field(default_factory=dict, repr=False)

    @property
    def x_dependent(self) -> bool:
        return bool(self.expr.free_symbols & set(Y[: self.ndim]))

    def depends_on_coord(self, axis: int) -> bool:
        return Y[axis] in self.expr.free_symbols

    def __call__(self, freqs, coords=None, check=True) -> np.ndarray:
        out = _evaluate_expr(self.expr, self.ndim, freqs, coords)
        if self.factor is not None:
            out = out * self.factor(freqs)
        if check and not np.all(np.isfinite(out)):
            raise SymbolError(f"symbol {self.label or self.expr} is not finite on the samples (pole hit?)")
        return out

    def with_expr(self, expr, order=None, label=None) -> "Symbol":
        return Symbol(sp.sympify(expr), self.ndim, self.order if order is None else order,
                      label or self.label, self.factor)

    def __add__(self, other: "Symbol") -> "Symbol":
        if self.factor is not None or other.factor is not None:
            raise SymbolError("cannot add symbols carrying tangential factors")
        return Symbol(self.expr + other.expr, self.ndim, max(self.order, other.order),
                      f"{self.label}+{other.label}")

    def poles(self, axis: int = -1) -> list | None:
        """Poles in frequency ``axis``, or None if the symbol is not
        meromorphic (rational) in that variable."""
        axis %= self.ndim
        if axis not in self._poles:
            self._poles[axis] = _find_poles(self.expr, self.ndim, axis)
        return self._poles[axis]

    def is_meromorphic(self, axis: int = -1) -> bool:
        p = self.poles(axis)
        return p is not None and len(p) > 0


def _find_poles(expr, ndim, axis):
    eta = K[axis]
    e = sp.together(expr)
    num, den = sp.fraction(e, exact=True)
    if not den.has(eta):
        return [] if _entire_in(num, eta) else None
    if not den.is_polynomial(eta) or not _entire_in(num, eta):
        return None
    poly = sp.Poly(den, eta)
    roots = sp.roots(poly)
    if sum(roots.values()) != poly.degree():
        return None
    poles = []
    probe = _probe_freqs(ndim)
    for q, mult in roots.items():
        q = _canonical_sqrt(q)
        vals = _evaluate_expr(q, ndim, probe, None)
        im = vals.imag
        if np.all(im < 0):
            half = "lower"
        elif np.all(im > 0):
            half = "upper"
        else:
            raise SymbolError(f"pole {q} crosses the real axis on the sampled frequencies")
        tang = np.sqrt(sum(np.asarray(f) ** 2 for a, f in enumerate(probe) if a != axis))
        big = tang >= 1
        elliptic = bool(np.all(np.abs(im[big]) >= 0.1 * (1 + tang[big]))) if np.any(big) else True
        poles.append(PoleData(q, ndim, axis, int(mult), half, elliptic))
    return poles


def _canonical_sqrt(expr):
    # sqrt(-X) with X > 0 becomes I*sqrt(X); complex numpy evaluation of
    # sqrt(-X) is branch-ambiguous when X carries a signed-zero imaginary part.
    return expr.replace(
        lambda e: isinstance(e, sp.Pow) and e.exp == sp.S.Half and (-e.base).is_positive,
        lambda e: sp.I * sp.sqrt(sp.expand(-e.base)),
    )


def _entire_in(expr, eta) -> bool:
    if not expr.has(eta):
        return True
    if expr.is_polynomial(eta):
        return True
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Pow) and node.base.has(eta) and not (node.exp.is_Integer and node.exp >= 0):
            return False
        if isinstance(node, sp.Function) and node.has(eta) and not isinstance(node, (sp.exp, sp.sin, sp.cos)):
            return False
    return True


def _probe_freqs(ndim):
    vals = np.concatenate([-np.logspace(-2, 3, 12), [0.0], np.logspace(-2, 3, 12)])
    grids = np.meshgrid(*([vals] * ndim), indexing="ij") if ndim <= 2 else np.meshgrid(
        *([vals[::3]] * ndim), indexing="ij")
    return tuple(g.ravel() for g in grids)


# ---------------------------------------------------------------- residues


def laurent_coefficients(sym: Symbol, pole: PoleData, all_poles: list, freqs, coords=None):
    """Coefficients ``c_{-n}`` (n = 1..order) of the Laurent expansion of the
    symbol at ``pole``, on the broadcast shape of ``freqs``.

    Computed as ``c_{-n} = (1 / 2 pi i) \\oint a(eta) (eta - q)^{n-1} d eta``
    on a circle of radius half the distance to the nearest other pole.
    """
    axis = pole.axis
    q = pole.location(freqs, coords)
    radius = np.full(q.shape, np.inf)
    for other in all_poles:
        if other is pole:
            continue
        d = np.abs(other.location(freqs, coords) - q)
        radius = np.minimum(radius, 0.5 * d)
    fallback = 0.5 * np.maximum(np.abs(q.imag), 1e-3)
    radius = np.where(np.isfinite(radius), radius, fallback)
    radius = np.minimum(radius, np.maximum(0.9 * np.abs(q.imag), 1e-6))
    theta = 2 * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS
    w = radius[..., None] * np.exp(1j * theta)
    eta = q[..., None] + w
    f2 = []
    for a, f in enumerate(freqs):
        f2.append(eta if a == axis else np.asarray(f)[..., None])
    c = None if coords is None else tuple(np.asarray(v)[..., None] for v in coords)
    vals = sym(tuple(f2), c, check=False)
    return [np.mean(vals * w ** n, axis=-1) for n in range(1, pole.order + 1)]


def boundary_kernel(sym: Symbol, freqs, rho, axis: int = -1, coords=None, side: str = "auto"):
    """``K(rho) = (1/2 pi) int a(eta) exp(i rho eta) d eta`` by residues.

    ``rho`` is a 1-D array of normal coordinates; output has shape
    ``(len(rho),) + broadcast(freqs)``.  Negative ``rho`` (and ``rho = 0``,
    taken as the limit from below) close the contour in the lower half plane.
    """
    axis %= sym.ndim
    poles = sym.poles(axis)
    if poles is None:
        raise SymbolError("symbol is not meromorphic in the normal frequency")
    if any(p.order > 2 for p in poles):
        raise SymbolError("poles of order greater than 2 are not supported")
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    shape = np.broadcast_shapes(*[np.shape(f) for f in freqs])
    out = np.zeros((len(rho),) + shape, dtype=complex)
    below = rho <= 0 if side == "auto" else np.full(rho.shape, side == "lower")
    r = rho.reshape((-1,) + (1,) * len(shape))
    for pole in poles:
        use = below if pole.half_plane == "lower" else ~below
        if not np.any(use):
            continue
        coeffs = laurent_coefficients(sym, pole, poles, freqs, coords)
        q = pole.location(freqs, coords)
        with np.errstate(over="ignore", invalid="ignore"):
            ex = np.exp(1j * r * q)
        ex = np.where(np.isfinite(ex), ex, 0.0)
        term = sum(c * (1j * r) ** (n) / math.factorial(n) for n, c in enumerate(coeffs))
        sign = -1j if pole.half_plane == "lower" else 1j
        out[use] += (sign * term * ex)[use]
    return out


# ---------------------------------------------------------------- calculus


def eta_derivative(sym: Symbol, axis: int = -1) -> Symbol:
    """``i * d a / d eta``; order drops by one, pole orders rise by one."""
    axis %= sym.ndim
    if sym.factor is not None:
        out = Symbol(sp.I * sp.diff(sym.expr, K[axis]), sym.ndim, sym.order - 1,
                     f"i d/deta({sym.label})", sym.factor)
    else:
        out = sym.with_expr(sp.I * sp.diff(sym.expr, K[axis]), sym.order - 1, f"i d/deta({sym.label})")
    return out


def bump(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) on |r| < 1, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    return out


def apply_cutoff(sym: Symbol, radius: float, axis: int = -1) -> Symbol:
    """Multiply by the tangential bump ``chi(|xi| / R)``."""
    if radius <= 0:
        raise SymbolError("cutoff radius must be positive")
    axis %= sym.ndim
    prev = sym.factor

    def chi(freqs):
        tang = sum(np.abs(np.asarray(f)) ** 2 for a, f in enumerate(freqs) if a != axis)
        val = bump(np.sqrt(tang) / radius)
        return val if prev is None else val * prev(freqs)

    return Symbol(sym.expr, sym.ndim, sym.order, f"chi_{radius}*{sym.label}", chi)


def lambda_symbol(s: float, ndim: int = 2, axes: Sequence[int] | None = None) -> Symbol:
    """``(1 + sum_{a in axes} k_a^2)^{-|s|/2}``; all axes by default.

    Passing ``axes`` without the normal axis gives the tangential variant.
    """
    axes = range(ndim) if axes is None else axes
    base = 1 + sum(K[a] ** 2 for a in axes)
    expr = base ** (-sp.nsimplify(abs(s)) / 2)
    return Symbol(expr, ndim, -abs(float(s)), f"Lambda^-{abs(s)}")


def from_string(text: str, ndim: int = 2, order: float | None = None, layout=None, label=None) -> Symbol:
    layout = layout or DEFAULT_LAYOUTS[ndim]
    if len(layout) != ndim:
        raise SymbolError("layout length does not match dimension")
    expr = parse_expression(text, layout)
    sym = Symbol(expr, ndim, 0.0 if order is None else float(order), label or text)
    if order is None:
        fit = validate_symbol(sym).order_fit
        sym = Symbol(expr, ndim, round(2 * fit) / 2, label or text)
    return sym


def inverse_elliptic(ndim: int = 2, mass: float = 1.0, power: int = 1) -> Symbol:
    """``(m^2 + |k|^2)^{-power}``."""
    base = sp.nsimplify(mass) ** 2 + sum(K[a] ** 2 for a in range(ndim))
    return Symbol(base ** (-power), ndim, -2.0 * power, f"(m^2+|k|^2)^-{power}")


def reduced_elliptic(ndim: int = 2, axis: int = -1, mass: float = 1.0, shift: float = 1) -> Symbol:
    """``c^{shift} / (eta^2 + c^2)`` with ``c = sqrt(m^2 + |xi|^2)``: order ``shift - 2``.

    Half-integer shifts are allowed; the symbol stays meromorphic in eta.
    For ``shift < 0`` the declared order is the tangential one: the boundary
    symbol ``c^{shift-1}/2`` decays like it, while the isotropic growth along
    the eta axis stays ``-2``.
    """
    axis %= ndim
    c2 = sp.nsimplify(mass) ** 2 + sum(K[a] ** 2 for a in range(ndim) if a != axis)
    expr = c2 ** (sp.nsimplify(shift) / 2) / (K[axis] ** 2 + c2)
    return Symbol(expr, ndim, float(shift) - 2.0, f"c^{shift}/(eta^2+c^2)")


# ---------------------------------------------------------------- validation


@dataclasses.dataclass
class SymbolReport:
    order_fit: float
    constant: float
    derivative_orders: dict
    per_coordinate_constants: list

    def as_dict(self):
        return dataclasses.asdict(self)


def _slope(r, vals):
    vals = np.asarray(vals, dtype=float)
    good = vals > 0
    if good.sum() < 2:
        return -np.inf
    return float(np.polyfit(np.log(r[good]), np.log(vals[good]), 1)[0])


def validate_symbol(sym: Symbol, radii=None, directions: int = 16, coords_samples=None) -> SymbolReport:
    """Sample ``|a|`` on dyadic spheres and fit the growth exponent.

    Returns the log-log slope of ``max |a|`` against the radius, the constant
    ``C = max |a| / (1 + r^2)^{k/2}`` for the declared order ``k``, the fitted
    exponents of the first finite differences in every frequency variable,
    and per-coordinate-sample constants.
    """
    radii = 2.0 ** np.arange(4, 13) if radii is None else np.asarray(radii, dtype=float)
    n = sym.ndim
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(directions, n))
    dirs[:n] = np.eye(n)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radii[:, None, None] * dirs[None]
    coords_samples = coords_samples or [None]
    if sym.x_dependent and coords_samples == [None]:
        coords_samples = [tuple([c] * n) for c in (-1.0, -0.25, 0.0)]
    per_coord = []
    maxes = np.zeros(len(radii))
    dmax = {a: np.zeros(len(radii)) for a in range(n)}
    for cs in coords_samples:
        freqs = tuple(pts[..., a] for a in range(n))
        vals = np.abs(sym(freqs, cs))
        if not np.all(np.isfinite(vals)):
            raise SymbolError("non-finite symbol value on the validation lattice")
        m = vals.max(axis=1)
        maxes = np.maximum(maxes, m)
        per_coord.append(float(np.max(m / (1 + radii ** 2) ** (sym.order / 2))))
        for a in range(n):
            step = 1e-4 * (1 + radii)[:, None]
            fp = list(freqs)
            fm = list(freqs)
            fp[a] = freqs[a] + step
            fm[a] = freqs[a] - step
            d = np.abs(sym(tuple(fp), cs) - sym(tuple(fm), cs)) / (2 * step)
            dmax[a] = np.maximum(dmax[a], d.max(axis=1))
    return SymbolReport(
        order_fit=_slope(radii, maxes),
        constant=max(per_coord),
        derivative_orders={a: _slope(radii, dmax[a]) for a in range(n)},
        per_coordinate_constants=per_coord,
    )


# ---------------------------------------------------------------- restriction


def boundary_symbol(sym: Symbol, rho0: float = 0.0, axis: int = -1, freqs=None, coords=None,
                    method: str = "auto") -> np.ndarray:
    """``alpha(xi) = (1/2 pi) int a(xi, eta) d eta`` at ``rho0`` on tangential
    frequency samples ``freqs`` (the normal entry is ignored).

    ``method`` is "residue", "quadrature" or "auto" (residues whenever pole
    data exist).  Order ``k = -1`` is accepted only with pole data.
    """
    axis %= sym.ndim
    meromorphic = sym.poles(axis) is not None
    if method == "auto":
        method = "residue" if meromorphic else "quadrature"
    if sym.order > -1:
        raise SymbolError("boundary_symbol needs order <= -1")
    if sym.order > -2 and method != "residue":
        raise SymbolError("order -1 symbols need the residue path")
    if coords is not None and sym.depends_on_coord(axis):
        coords = tuple(rho0 if a == axis else c for a, c in enumerate(coords))
    if method == "residue":
        if not meromorphic:
            raise SymbolError("no pole data for the residue path")
        return boundary_kernel(sym, freqs, np.array([0.0]), axis, coords)[0]
    shape = np.broadcast_shapes(*[np.shape(f) for f in freqs])
    flat = [np.broadcast_to(np.asarray(f, dtype=float), shape).ravel() for f in freqs]

    def integrand(eta):
        fs = tuple(np.full_like(flat[a], eta) if a == axis else flat[a] for a in range(sym.ndim))
        v = sym(fs, coords)
        return np.concatenate([v.real, v.imag])

    val, err = integrate.quad_vec(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11, limit=2000)
    if not np.all(np.isfinite(val)):
        raise SymbolError("quadrature did not converge")
    half = len(val) // 2
    return ((val[:half] + 1j * val[half:]) / (2 * np.pi)).reshape(shape)


# ---------------------------------------------------------------- decomposition


@dataclasses.dataclass(frozen=True)
class SymbolDecomposition:
    principal: Symbol
    remainder: Symbol
    N: int
    remainder_order_fit: float


def decompose(sym: Symbol, N: int, axis: int = -1) -> SymbolDecomposition:
    """Split into a meromorphic principal part and an order ``<= -N``
    remainder.  Terms of the sum that are rational in the normal frequency
    form the principal part unless an explicit ``principal`` is attached."""
    axis %= sym.ndim
    if N < abs(sym.order):
        raise SymbolError("N must be at least |k|")
    if sym.principal is not None:
        principal = sym.principal
    else:
        terms = sp.Add.make_args(sp.expand(sym.expr, deep=False, mul=False, multinomial=False))
        mero = [t for t in terms if _find_poles(t, sym.ndim, axis)]
        if not mero:
            raise SymbolError("no meromorphic part found")
        principal = Symbol(sp.Add(*mero), sym.ndim, sym.order, f"principal({sym.label})")
    remainder = Symbol(sp.simplify(sym.expr - principal.expr) if sym.principal is not None
                       else sym.expr - principal.expr, sym.ndim, -float(N), f"remainder({sym.label})")
    if remainder.expr == 0:
        fit = -np.inf
    else:
        fit = validate_symbol(remainder, radii=2.0 ** np.arange(1, 6)).order_fit
    if fit > -N + 0.5:
        raise SymbolError(f"remainder order fit {fit:.2f} exceeds -{N}")
    return SymbolDecomposition(principal, remainder, N, fit)
