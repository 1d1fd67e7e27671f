import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fd_oracle import dirichlet_solve
from psido import bvp, grid, sobolev, suite
from psido.bvp import BVPError, EllipticOperatorSpec

VARIABLE = EllipticOperatorSpec(c=(("0.2*sin(x)**2",),))


def variable_c(x):
    return 0.2 * np.sin(x) ** 2


def test_spec_validation():
    with pytest.raises(BVPError):
        EllipticOperatorSpec(tangential_dim=3)
    with pytest.raises(BVPError):
        EllipticOperatorSpec(mass=-1)
    with pytest.raises(BVPError):
        EllipticOperatorSpec(tangential_dim=2, c=(("0",),))
    with pytest.raises(BVPError):
        EllipticOperatorSpec(tangential_dim=2, c=(("0", "x1"), ("0", "0")))
    with pytest.raises(BVPError):
        bvp.xi_symbol(EllipticOperatorSpec(c=(("1.5",),)))


def test_ellipticity_constant():
    assert EllipticOperatorSpec().ellipticity_constant() == pytest.approx(1.0)
    assert VARIABLE.ellipticity_constant() == pytest.approx(0.8, abs=1e-3)


@given(st.floats(-50, 50), st.floats(-np.pi, np.pi), st.floats(0, 3))
def test_xi_lower_bound_and_zero_frequency(xi, x, m):
    spec = EllipticOperatorSpec(c=(("0.2*sin(x)**2",),), mass=m)
    X = bvp.xi_symbol(spec)
    c0 = spec.ellipticity_constant()
    val = X((np.array(xi),), (np.array(x),))
    assert val >= np.sqrt(c0 * xi ** 2 + m ** 2) * (1 - 1e-9)
    assert X((np.array(0.0),), (np.array(x),)) == pytest.approx(m)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2))
def test_flat_dno_is_the_modulus_multiplier(seed, m):
    g = grid.GridFunction(np.random.default_rng(seed).standard_normal(64), (np.pi,))
    out = bvp.dno(EllipticOperatorSpec(mass=m), g)
    xi = g.freqs(0)
    expected = np.fft.ifft(np.sqrt(xi ** 2 + m ** 2) * np.fft.fft(g.values))
    assert np.max(abs(out.values - expected)) <= 1e-10 * np.max(abs(expected))


def test_dno_two_tangential_axes():
    g = grid.from_function(lambda a, b: np.cos(a) * np.cos(2 * b), (np.pi, np.pi), (16, 16))
    out = bvp.dno(EllipticOperatorSpec(tangential_dim=2), g)
    assert np.allclose(out.values, np.sqrt(5) * g.values, atol=1e-12)


def _fd_dno_error(spec, c, lam, ppw):
    nx = ppw * lam
    g = grid.from_function(lambda x: np.cos(lam * x), (np.pi,), (nx,))
    L = 16 / lam
    _, du = dirichlet_solve(g.values, c, L, int(round(L / (2 * np.pi / nx))))
    d = bvp.dno(spec, g).values
    window = np.abs(g.coords(0)) <= np.pi / 2
    return np.linalg.norm((du - d)[window]) / np.linalg.norm(d[window])


def test_fd_oracle_converges_on_flat_problem():
    flat = lambda x: 0 * x
    errs = [_fd_dno_error(EllipticOperatorSpec(), flat, 2, ppw) for ppw in (16, 32, 64)]
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_variable_dno_against_finite_differences():
    # refinement and frequency grow together: the O(h) and O(1/lambda) parts both shrink
    errs = [_fd_dno_error(VARIABLE, variable_c, lam, ppw) for lam, ppw in ((2, 16), (4, 32), (8, 64))]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


@given(st.integers(0, 6))
def test_poisson_exact_extension(k):
    g = grid.from_function(lambda x: np.cos(k * x), (np.pi,), (32,))
    v = bvp.poisson(EllipticOperatorSpec(), g, 8.0, 64)
    x, r = v.mesh()
    mask = grid.region_mask(v.shape, [1])
    assert np.allclose(v.values[mask], (np.cos(k * x) * np.exp(k * r))[mask], atol=1e-12)
    assert np.allclose(grid.restrict_boundary(v, 1).values, g.values, atol=1e-14)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 32 - 1))
def test_poisson_maximum_principle(seed):
    r = np.random.default_rng(seed)
    coef = r.standard_normal(8)
    x = grid.axis_coords(np.pi, 64)
    vals = sum(c * np.cos(k * x + k) for k, c in enumerate(coef))
    g = grid.GridFunction(vals, (np.pi,))
    v = bvp.poisson(EllipticOperatorSpec(), g, 8.0, 64)
    assert np.max(abs(v.values)) <= np.max(abs(vals)) * 1.05


def test_poisson_residual_is_one_order_lower():
    g = grid.from_function(lambda x: np.cos(4 * x), (np.pi,), (64,))
    flat = bvp.poisson(EllipticOperatorSpec(), g, 8.0, 512)
    assert bvp.harmonicity_residual(EllipticOperatorSpec(), flat) < 1e-8
    # with x-dependent coefficients only the principal part is annihilated:
    # |Gamma P g| / |P g| grows like k, not k^2
    for k in (2, 4, 8):
        g = grid.from_function(lambda x: np.cos(k * x), (np.pi,), (64,))
        assert bvp.harmonicity_residual(VARIABLE, bvp.poisson(VARIABLE, g, 8.0, 512)) < 0.15 * k


def test_green_trace_vanishes():
    _, f = suite.manufactured_pair(3, 128, 32)
    u = bvp.green(EllipticOperatorSpec(), f)
    trace = grid.restrict_boundary(u, 1)
    assert sobolev.sobolev_norm(trace, 0) <= 1e-6 * sobolev.sobolev_norm(f, 0)


def test_green_parametrix_corrections_converge():
    u, f = suite.manufactured_pair(2, 128, 32, coef=variable_c)
    errs = [sobolev.local_norm(bvp.green(VARIABLE, f, n) - u, 1) / sobolev.local_norm(u, 1) for n in (0, 1, 2)]
    assert errs[0] / errs[1] > 5 and errs[1] / errs[2] > 5
    assert errs[2] < 1e-3


def test_green_rejects_zero_mode_without_mass():
    f = grid.from_function(lambda x, r: np.exp(np.minimum(r, 0)) + 0 * x, (np.pi, 8.0), (16, 64), grid.halfspaces(1))
    with pytest.raises(BVPError):
        bvp.green(EllipticOperatorSpec(), f)
    u = bvp.green(EllipticOperatorSpec(mass=1.0), f)
    assert np.all(np.isfinite(u.values))


@pytest.mark.parametrize("k", [2, 4])
def test_boundary_derivative_of_green(k):
    _, f = suite.manufactured_pair(k, 256, 64)
    spec = EllipticOperatorSpec()
    exact = np.sin(k * grid.axis_coords(np.pi, 64))
    th = bvp.theta_minus_boundary(spec, f)
    fd = bvp.green_boundary_derivative(spec, f)
    assert np.max(abs(th.values - exact)) < 1e-3
    assert np.max(abs(fd.values - exact)) < 1e-4
    assert th.support.kind == "face"


def test_apply_gamma_on_manufactured_pair():
    u, f = suite.manufactured_pair(3, 256, 32, coef=variable_c)
    r = bvp.apply_gamma(VARIABLE, u)
    assert sobolev.local_norm(r - f, 0) < 1e-6 * sobolev.local_norm(f, 0)


@given(st.integers(0, 6), st.integers(1, 3))
def test_fd_weights_exact_on_polynomials(deg, m):
    x = np.linspace(0, 1, 8)
    w = bvp.fd_weights(0.3, x, m)
    coef = np.arange(1, deg + 2, dtype=float)
    p = np.polynomial.Polynomial(coef)
    assert np.dot(w[m], p(x)) == pytest.approx(p.deriv(m)(0.3), abs=1e-7 * (1 + abs(p.deriv(m)(0.3))))


def test_ligocka_multiply_checks_harmonicity():
    g = grid.from_function(lambda x: np.cos(2 * x), (np.pi,), (32,))
    spec = EllipticOperatorSpec()
    u = bvp.poisson(spec, g, 8.0, 128)
    out = bvp.ligocka_multiply(spec, u, 2)
    assert np.allclose(out.values, u.values * u.mesh()[1] ** 2)
    assert bvp.ligocka_multiply(spec, u, 0) is u
    with pytest.raises(BVPError):
        bvp.ligocka_multiply(spec, u, -1)
    noisy = u.with_values(u.values * (1 + 0.1 * np.cos(u.mesh()[0])))
    with pytest.raises(BVPError):
        bvp.ligocka_multiply(spec, noisy, 1)
