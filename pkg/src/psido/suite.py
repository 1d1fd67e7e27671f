"""Theorem-verification fixtures.

Each entry of ``CHECKS`` maps an identifier to one fixture and one module
operation.  A check returns a ``CheckResult`` with the headline metric, its
tolerance and per-case rows for the CSV report.  Families are generated
deterministically; ``seed`` only affects the random boundary data of the
cutoff check.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
import sympy as sp

from . import bvp, grid, halfspace, sobolev, symbols, wedge
from .bvp import EllipticOperatorSpec
from .grid import GridFunction
from .sobolev import ExponentReport

SLOPE_TOL = 0.1


@dataclasses.dataclass
class CheckResult:
    name: str
    metric: str
    value: float
    tolerance: float
    passed: bool
    rows: list = dataclasses.field(default_factory=list)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.metric} = {self.value:.4g} (tolerance {self.tolerance:g})"


def _slope_rows(case: str, report: ExponentReport) -> dict:
    return {"case": case, **report.csv_fields()}


def _worst_slope(name: str, reports: dict, tol: float, metric: str = "max slope") -> CheckResult:
    worst = max(r.slope for r in reports.values())
    rows = [_slope_rows(case, r) for case, r in reports.items()]
    return CheckResult(name, metric, worst, tol, worst <= tol, rows)


# ---------------------------------------------------------------- families


def half_grid(lam: float, N_rho: int = 128, L_rho: float = 16.0):
    """``(L, N)`` on ``(x, rho)``: the rho box shrinks like ``1/lam`` at fixed
    resolution so every member is resolved alike."""
    Nx = max(16, 2 ** math.ceil(math.log2(4 * lam)))
    return (math.pi, L_rho / lam), (Nx, N_rho)


def face_cos(lam: float, N_rho: int = 128, L_rho: float = 16.0) -> halfspace.BoundaryDistribution:
    L, N = half_grid(lam, N_rho, L_rho)
    g = grid.from_function(lambda x: np.cos(lam * x), (L[0],), (N[0],))
    return halfspace.boundary_distribution(g, -1, L[1], N[1])


def half_exp(lam: float, N_rho: int = 128, L_rho: float = 16.0, trig=np.cos) -> GridFunction:
    L, N = half_grid(lam, N_rho, L_rho)
    return grid.from_function(lambda x, r: trig(lam * x) * np.exp(lam * np.minimum(r, 0)), L, N,
                              grid.halfspaces(1))


# ---------------------------------------------------------------- half-space checks


def check_estinvell(lambdas=(2, 4, 8, 16), orders=(-2, -3), s_values=(0, 1, 2), tol=SLOPE_TOL) -> CheckResult:
    """Local ``W^s`` norm of ``A(g x delta)`` against ``|g_b|_{W^{s+k+1/2}}``
    for meromorphic symbols of order ``k``."""
    syms = {-2: symbols.inverse_elliptic(2, 1.0), -3: symbols.reduced_elliptic(2, -1, 1.0, shift=-1)}
    reports = {}
    for k in orders:
        sym = syms[k]
        gs = [face_cos(lam) for lam in lambdas]
        outs = [halfspace.apply_to_boundary(sym, g) for g in gs]
        for s in s_values:
            ratios = [sobolev.local_norm(o, s) / sobolev.sobolev_norm(g.density, s + k + 0.5)
                      for o, g in zip(outs, gs)]
            reports[f"order={k} s={s}"] = sobolev.exponent_report(lambdas, ratios)
    return _worst_slope("estinvell", reports, tol)


def check_sobint(lambdas=(2, 4, 8, 16), tol=SLOPE_TOL) -> CheckResult:
    """Volterra part ``A^{q+} f`` in ``W^1`` against ``f`` in ``W^{1+k}``, ``k = -2``."""
    sym = symbols.inverse_elliptic(2, 1.0)
    fam = [half_exp(lam) for lam in lambdas]
    rep = sobolev.fit_estimate(lambda f: halfspace.volterra_apply(sym, f), fam,
                               lambda f: sobolev.region_norm(f, -1.0),
                               lambda u: sobolev.region_norm(u, 1.0), lambdas)
    return _worst_slope("sobint", {"s=1": rep}, tol)


def check_errbndry(lambdas=(2, 4, 8, 16), tol=SLOPE_TOL) -> CheckResult:
    """Eta-quadrature action of ``Lambda^{-3}`` on ``g x delta``: ``W^1``
    output against ``|g_b|_{W^{-1/2}}``."""
    sym = symbols.lambda_symbol(3, 2)
    gs = [face_cos(lam) for lam in lambdas]
    ratios = [sobolev.region_norm(halfspace.apply_to_boundary_direct(sym, g, method="trapezoid"), 1.0)
              / sobolev.sobolev_norm(g.density, -0.5) for g in gs]
    return _worst_slope("errbndry", {"s=1": sobolev.exponent_report(lambdas, ratios)}, tol)


def check_errint(lambdas=(2, 4, 8, 16), s_values=(0, 1, 2), tol=SLOPE_TOL) -> CheckResult:
    """``|A f|_{W^s, loc}`` against ``|f|_{L^2}`` for ``A`` of order ``-2`` and
    ``0 <= s <= 2`` on half-space data extended by zero."""
    sym = symbols.lambda_symbol(2, 2)
    fam = [half_exp(lam) for lam in lambdas]
    outs = [halfspace.quantize(sym, grid.extend_by_zero(f, [1])) for f in fam]
    reports = {}
    for s in s_values:
        ratios = [sobolev.region_norm(o, s, [1], local=True) / sobolev.region_norm(f, 0)
                  for o, f in zip(outs, fam)]
        reports[f"s={s}"] = sobolev.exponent_report(lambdas, ratios)
    return _worst_slope("errint", reports, tol)


def restrict_symbols() -> dict:
    return {
        "(1+xi^2+eta^2)^-1": symbols.inverse_elliptic(2, 1.0),
        "(1+xi^2+eta^2)^-2": symbols.inverse_elliptic(2, 1.0, power=2),
        "c^-1/(eta^2+c^2)": symbols.reduced_elliptic(2, -1, 1.0, shift=-1),
        "1/((eta^2+1+xi^2)(eta^2+4+xi^2))": symbols.from_string("1/((eta**2+1+xi**2)*(eta**2+4+xi**2))", 2, -4),
    }


def _restrict_data(L_rho=1.0, N_rho=256, N_x=32):
    g = grid.from_function(lambda x: np.cos(x) + 0.5 * np.sin(2 * x), (math.pi,), (N_x,))
    return halfspace.boundary_distribution(g, -1, L_rho, N_rho)


def check_restrict(tol=1e-5) -> CheckResult:
    """``restrict_compose`` against the extrapolated limit ``rho -> 0^-`` of
    the residue action."""
    g = _restrict_data()
    rows, worst = [], 0.0
    for name, sym in restrict_symbols().items():
        face = halfspace.restrict_compose(sym, g)
        lim = grid.limit_from_below(halfspace.apply_to_boundary(sym, g), -1)
        err = float(np.max(np.abs(face.values - lim.values)) / np.max(np.abs(face.values)))
        rows.append({"case": name, "relative_sup_error": f"{err:.3e}"})
        worst = max(worst, err)
    return CheckResult("restrict", "max relative sup error", worst, tol, worst <= tol, rows)


def liglem_symbols() -> dict:
    out = dict(restrict_symbols())
    out.pop("(1+xi^2+eta^2)^-2")
    return out


def check_liglem(tol=1e-6) -> CheckResult:
    """``rho A(g x delta)`` against ``Op(i d_eta a)(g x delta)``."""
    g = halfspace.boundary_distribution(
        grid.from_function(lambda x: np.cos(x) + 0.5 * np.sin(2 * x), (math.pi,), (32,)), -1, 8.0, 128)
    rows, worst = [], 0.0
    for name, sym in liglem_symbols().items():
        a = halfspace.apply_to_boundary(sym, g)
        rho = a.mesh()[1]
        d = halfspace.rho_compose(sym, g, 1)
        err = float(np.max(np.abs(rho * a.values - d.values)))
        rows.append({"case": name, "sup_difference": f"{err:.3e}"})
        worst = max(worst, err)
    return CheckResult("liglem", "max sup difference", worst, tol, worst <= tol, rows)


def cutoff_derivative_ratio(sym: symbols.Symbol, g: halfspace.BoundaryDistribution, max_order: int = 3) -> float:
    """``max_{a+b <= max_order} sup_{rho<0} |d_x^a d_rho^b A(g x delta)| / |g_b|_{L^2}``.

    Normal derivatives multiply the symbol by ``(i eta)^b``; the residue
    formula stays valid strictly inside ``rho < 0``.
    """
    eta = symbols.K[sym.ndim - 1]
    z = grid.zero_index(g.N_normal)
    planes = np.arange(z)
    best = 0.0
    for b in range(max_order + 1):
        sb = sym.with_expr(sym.expr * (sp.I * eta) ** b, sym.order + b) if b else sym
        vals = halfspace.apply_to_boundary(sb, g, planes)
        for a in range(max_order + 1 - b):
            d = sobolev.spectral_derivative(vals.values, vals.L, (a, 0))[:, :z] if a else vals.values[:, :z]
            best = max(best, float(np.max(np.abs(d))))
    norm = sobolev.sobolev_norm(g.density, 0)
    return best / norm


def check_symbolcut(N: int = 64, radius: float = 8.0, seed: int = 0, per_band: int = 3, tol=0.10) -> CheckResult:
    """Running maximum of the derivative ratios of ``A_chi(g x delta)`` over
    random data in dyadic frequency bands up to ``N/4``; the bound must have
    saturated (relative variation over the upper bands within ``tol``).  The
    same data without the cutoff is reported for contrast."""
    rng = np.random.default_rng(seed)
    base = symbols.inverse_elliptic(2, 1.0)
    cut = symbols.apply_cutoff(base, radius)
    L = math.pi
    bands, b = [], 1
    while b <= N // 4:
        bands.append(b)
        b *= 2
    running, rows, C = [], [], 0.0
    for b in bands:
        freqs = [f for f in range(b, min(2 * b, N // 4 + 1))]
        band_max, plain_max = 0.0, 0.0
        for _ in range(per_band):
            amp = rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs))
            x = grid.axis_coords(L, N)
            vals = sum(a * np.exp(1j * f * x) for a, f in zip(amp, freqs))
            g = halfspace.boundary_distribution(GridFunction(vals, (L,)), -1, 4.0, 64)
            band_max = max(band_max, cutoff_derivative_ratio(cut, g))
            plain_max = max(plain_max, cutoff_derivative_ratio(base, g))
        C = max(C, band_max)
        running.append(C)
        rows.append({"band": b, "cutoff_ratio": f"{band_max:.6g}", "running_max": f"{C:.6g}",
                     "uncut_ratio": f"{plain_max:.6g}"})
    upper = running[len(running) // 2:]
    variation = (max(upper) - min(upper)) / max(upper)
    return CheckResult("symbolcut", "running-max variation over upper bands", variation, tol,
                       variation <= tol, rows)


def check_poissest(lambdas=(2, 4, 8, 16, 32), s_values=(0, 1), tol=SLOPE_TOL) -> CheckResult:
    """``|P g|_{W^{s+1/2}}`` against ``|g|_{W^s}`` for the flat Laplacian."""
    spec = EllipticOperatorSpec()
    reports = {}
    for s in s_values:
        ratios = []
        for lam in lambdas:
            g = face_cos(lam)
            u = bvp.poisson(spec, g.density, g.L_normal, g.N_normal)
            ratios.append(sobolev.region_norm(u, s + 0.5) / sobolev.sobolev_norm(g.density, s))
        reports[f"s={s}"] = sobolev.exponent_report(lambdas, ratios)
    return _worst_slope("poissest", reports, tol)


def check_greenest(lambdas=(2, 4, 8, 16), tol=SLOPE_TOL) -> CheckResult:
    """``|G f|_{W^2}`` against ``|f|_{L^2}`` on the half space."""
    spec = EllipticOperatorSpec()
    fam = [half_exp(lam, trig=np.sin) for lam in lambdas]
    rep = sobolev.fit_estimate(lambda f: bvp.green(spec, f), fam,
                               lambda f: sobolev.region_norm(f, 0), lambda u: sobolev.region_norm(u, 2),
                               lambdas)
    return _worst_slope("greenest", {"s=0": rep}, tol)


def manufactured_green_error(k: int, N: int = 256, N_x: int = 64, L_rho: float = 8.0,
                             spec: EllipticOperatorSpec | None = None) -> float:
    """Relative local ``W^1`` error of ``green`` on ``u = rho e^rho sin(k x)``
    (flat Laplacian)."""
    spec = spec or EllipticOperatorSpec()
    u, f = manufactured_pair(k, N, N_x, L_rho)
    G = bvp.green(spec, f)
    return sobolev.local_norm(G - u, 1) / sobolev.local_norm(u, 1)


def manufactured_pair(k: int, N: int = 256, N_x: int = 64, L_rho: float = 8.0, coef=None):
    """``u = rho e^rho sin(k x)`` and ``f = Gamma u`` for
    ``Gamma = -d_rho^2 - (1 - c(x)) d_x^2``."""
    L, shape = (math.pi, L_rho), (N_x, N)
    c = coef or (lambda x: 0.0 * x)

    def uf(x, r):
        r = np.minimum(r, 0)
        return r * np.exp(r) * np.sin(k * x)

    def ff(x, r):
        r = np.minimum(r, 0)
        return (-(r + 2) + (1 - c(x)) * k ** 2 * r) * np.exp(r) * np.sin(k * x)

    region = grid.halfspaces(1)
    return grid.from_function(uf, L, shape, region), grid.from_function(ff, L, shape, region)


THETA_COEF = "0.2*sin(x)**2"


def theta_minus_errors(ks=(4, 8, 16), coef: str = THETA_COEF, N_rho: int = 512, L_rho: float = 4.0) -> dict:
    """Relative ``L^2`` error of ``theta_minus_boundary(Gamma u_k)`` against the
    exact boundary derivative ``sin(k x)`` of ``u_k = rho e^rho sin(k x)``."""
    spec = EllipticOperatorSpec(c=((coef,),))
    cfun = lambda x: spec.coefficients((x,))[0, 0]
    out = {}
    for k in ks:
        Nx = max(64, 8 * k)
        _, f = manufactured_pair(k, N_rho, Nx, L_rho, cfun)
        th = bvp.theta_minus_boundary(spec, f)
        exact = np.sin(k * th.coords(0))
        out[k] = float(np.linalg.norm(th.values - exact) / np.linalg.norm(exact))
    return out


def check_greender(ks=(4, 8, 16), coef: str = THETA_COEF, tol=-0.8) -> CheckResult:
    errs = theta_minus_errors(ks, coef)
    rate = sobolev.fit_slope(list(errs), list(errs.values()))
    rows = [{"k": k, "relative_l2_error": f"{e:.6g}"} for k, e in errs.items()]
    return CheckResult("greender", "fitted error rate in k", rate, tol, rate <= tol, rows)


def check_ligocka(lambdas=(2, 4, 8, 16, 32), p_values=(1, 2), s_values=(0, 1), tol=SLOPE_TOL) -> CheckResult:
    """``|rho^p u|_{W^{s+p}}`` against ``|u|_{W^s}`` for ``u = P(cos(lam x))``."""
    spec = EllipticOperatorSpec()
    us = []
    for lam in lambdas:
        g = face_cos(lam, L_rho=8.0)
        us.append(bvp.poisson(spec, g.density, g.L_normal, g.N_normal))
    reports = {}
    for p in p_values:
        outs = [bvp.ligocka_multiply(spec, u, p) for u in us]
        for s in s_values:
            ratios = [sobolev.region_norm(o, s + p) / sobolev.region_norm(u, s) for o, u in zip(outs, us)]
            reports[f"p={p} s={s}"] = sobolev.exponent_report(lambdas, ratios)
    return _worst_slope("ligocka", reports, tol)


def check_rhoext(L: float = 8.0, N: int = 64, tol: float = 0.75) -> CheckResult:
    """Refinement ladders of ``|rho_1 f^{E_1}|_{W^1}`` and ``|f^{E_1}|_{W^1}``
    for ``f = e^{rho_1 + rho_2}`` on the quarter plane."""
    rep = sobolev.verify_weighted_extension(
        lambda a, b: np.exp(np.minimum(a, 0) + np.minimum(b, 0)), (L, L), (N, N), 0, 1, (0, 1))
    rows = [{"N": n, "weighted": f"{w:.8g}", "unweighted": f"{u:.8g}"}
            for n, w, u in zip(rep.N, rep.weighted, rep.unweighted)]
    rows.append({"N": "summary", "weighted": f"increment_ratio={rep.weighted_increment_ratio:.4g}",
                 "unweighted": f"rate={rep.unweighted_rate:.4g}"})
    ok = rep.weighted_increment_ratio <= tol and rep.unweighted_diverges
    return CheckResult("rhoext", "weighted increment ratio", rep.weighted_increment_ratio, tol, ok, rows)


# ---------------------------------------------------------------- wedge checks

WEDGE_N = 128


def wedge_elliptic() -> symbols.Symbol:
    return symbols.from_string("1/(1+xi**2+eta1**2+eta2**2)", 3, -2, layout=("x", "rho1", "rho2"))


def check_ellbndrydist(N_rho: int = WEDGE_N, tol=SLOPE_TOL) -> CheckResult:
    rep = wedge.verify_wedge_boundary_estimate(wedge_elliptic(), beta=1.5, N_rho=N_rho)
    return _worst_slope("ellbndrydist", {"alpha=2 beta=3/2 s=1 k=1": rep}, tol)


def check_errweighted(N_rho: int = WEDGE_N, tol=SLOPE_TOL) -> CheckResult:
    rep = wedge.verify_wedge_boundary_estimate(symbols.lambda_symbol(2, 3), beta=1.0, path="generic", N_rho=N_rho)
    return _worst_slope("errweighted", {"alpha=2 beta=1 s=1 k=1": rep}, tol)


def check_wghtdfull(N_rho: int = WEDGE_N, tol=SLOPE_TOL) -> CheckResult:
    sym = symbols.lambda_symbol(2, 3)
    reports = {"full weight": wedge.verify_wedge_interior_estimate(sym, N_rho=N_rho),
               "weight without rho_1": wedge.verify_wedge_interior_estimate(sym, omit=1, N_rho=N_rho)}
    return _worst_slope("wghtdfull", reports, tol)


def check_lre(N_rho: int = WEDGE_N, tol=SLOPE_TOL) -> CheckResult:
    rep = wedge.verify_lre_estimate(alpha=1.5, beta=1.0, s=1, lam=1, N_rho=N_rho)
    return _worst_slope("lre", {"alpha=3/2 beta=1 s=1": rep}, tol)


def check_compest(N_rho: int = WEDGE_N, tol=SLOPE_TOL) -> CheckResult:
    rep = wedge.verify_composition_estimate(alpha1=1.0, alpha2=0.5, beta=1.0, N_rho=N_rho)
    return _worst_slope("compest", {"alpha1=1 alpha2=1/2 beta=1": rep}, tol)


def _bvp_reports(s: int, N_rho: int):
    return wedge.verify_weighted_bvp(EllipticOperatorSpec(), s=s, k=1, N_rho=N_rho)


def check_poisswghtd(N_rho: int = 64, tol=0.15) -> CheckResult:
    p, _ = _bvp_reports(1, N_rho)
    return _worst_slope("poisswghtd", {"s=1 k=1": p}, tol)


def check_wghtdgreen(N_rho: int = 128, tol=5e-3) -> CheckResult:
    err = wedge.manufactured_wedge_green(EllipticOperatorSpec(), N_rho=N_rho)
    _, g = _bvp_reports(1, 64)
    rows = [{"case": "manufactured", "relative_w1_error": f"{err:.3e}"}, _slope_rows("s=1 k=1 slope", g)]
    return CheckResult("wghtdgreen", "manufactured relative W1 error", err, tol,
                       err <= tol and g.slope <= SLOPE_TOL, rows)


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "estinvell": check_estinvell,
    "sobint": check_sobint,
    "errbndry": check_errbndry,
    "errint": check_errint,
    "restrict": check_restrict,
    "liglem": check_liglem,
    "symbolcut": check_symbolcut,
    "poissest": check_poissest,
    "greenest": check_greenest,
    "greender": check_greender,
    "ligocka": check_ligocka,
    "rhoext": check_rhoext,
    "ellbndrydist": check_ellbndrydist,
    "errweighted": check_errweighted,
    "wghtdfull": check_wghtdfull,
    "lre": check_lre,
    "compest": check_compest,
    "poisswghtd": check_poisswghtd,
    "wghtdgreen": check_wghtdgreen,
}


def run_check(name: str, **kwargs) -> CheckResult:
    if name not in CHECKS:
        raise KeyError(f"unknown theorem identifier {name!r}")
    return CHECKS[name](**kwargs)

