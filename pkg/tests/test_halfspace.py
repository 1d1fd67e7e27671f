import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psido import grid, halfspace, symbols
from psido.halfspace import OperatorError


def cos_face(k, L_rho=4.0, N_rho=64, N_x=32):
    g = grid.from_function(lambda x: np.cos(k * x), (np.pi,), (N_x,))
    return halfspace.boundary_distribution(g, -1, L_rho, N_rho)


def layer(k, rho, x):
    """Exact ``Op(1/(1+xi^2+eta^2))(cos(kx) x delta)``."""
    c = np.sqrt(1 + k ** 2)
    return np.cos(k * x) * np.exp(-c * abs(rho)) / (2 * c)


def test_quantize_constant_symbol_on_eigenfunction():
    f = grid.from_function(lambda x, y: np.cos(x) * np.cos(2 * y), (np.pi, np.pi), (16, 16))
    out = halfspace.quantize(symbols.inverse_elliptic(2), f)
    assert np.allclose(out.values, f.values / 6, atol=1e-14)


def test_quantize_coordinate_dependent():
    sym = symbols.from_string("(2+sin(x))/(1+xi^2+eta^2)", 2, -2)
    f = grid.from_function(lambda x, y: np.cos(2 * x) + 0 * y, (np.pi, np.pi), (16, 8))
    out = halfspace.quantize(sym, f)
    x, _ = f.mesh()
    assert np.allclose(out.values, (2 + np.sin(x)) * np.cos(2 * x) / 5, atol=1e-13)


def test_quantize_cost_cap():
    sym = symbols.from_string("(2+sin(x)*sin(rho))/(1+xi^2+eta^2)", 2, -2)
    f = grid.from_function(lambda x, y: x * y, (1.0, 1.0), (32, 32))
    with pytest.raises(OperatorError):
        halfspace.quantize(sym, f, cost_cap=1000)


@given(st.integers(0, 6))
def test_layer_potential_exact(k):
    g = cos_face(k)
    out = halfspace.apply_to_boundary(symbols.inverse_elliptic(2), g)
    x, r = out.mesh()
    mask = grid.region_mask(out.shape, [1])
    assert np.allclose(out.values[mask], layer(k, r, x)[mask], atol=1e-12)
    assert np.all(out.values[~mask] == 0)
    assert out.support == grid.halfspaces(1)


def test_layer_potential_coordinate_dependent():
    sym = symbols.from_string("(2+sin(x))/(1+xi^2+eta^2)", 2, -2)
    out = halfspace.apply_to_boundary(sym, cos_face(3))
    x, r = out.mesh()
    mask = grid.region_mask(out.shape, [1])
    assert np.allclose(out.values[mask], ((2 + np.sin(x)) * layer(3, r, x))[mask], atol=1e-12)


def test_direct_quadrature_matches_residues():
    sym = symbols.inverse_elliptic(2, power=2)
    g = cos_face(2, N_rho=32)
    a = halfspace.apply_to_boundary(sym, g)
    b = halfspace.apply_to_boundary_direct(sym, g, method="qawf")
    assert np.max(abs(a.values - b.values)) < 1e-9 * np.max(abs(a.values))


def test_trapezoid_quadrature_inside_and_on_face():
    sym = symbols.inverse_elliptic(2, power=2)
    g = cos_face(2, N_rho=32)
    a = halfspace.apply_to_boundary(sym, g)
    b = halfspace.apply_to_boundary_direct(sym, g, method="trapezoid")
    inside = abs(a.values - b.values)[:, : grid.zero_index(32)]
    assert inside.max() < 1e-6 * np.max(abs(a.values))
    # the truncated eta integral on the face converges at first order for order -2
    face_err = []
    for N in (32, 64, 128):
        g = cos_face(2, N_rho=N)
        sym = symbols.inverse_elliptic(2)
        a = grid.restrict_boundary(halfspace.apply_to_boundary(sym, g), 1).values
        b = grid.restrict_boundary(halfspace.apply_to_boundary_direct(sym, g, method="trapezoid"), 1).values
        face_err.append(np.max(abs(a - b)))
    assert face_err[0] / face_err[1] > 1.9 and face_err[1] / face_err[2] > 1.9


def test_direct_rejects_low_decay():
    with pytest.raises(OperatorError):
        halfspace.apply_to_boundary_direct(symbols.lambda_symbol(0.5, 2), cos_face(1))


@given(st.integers(0, 5))
def test_restrict_compose_closed_form(k):
    out = halfspace.restrict_compose(symbols.inverse_elliptic(2), cos_face(k))
    c = np.sqrt(1 + k ** 2)
    assert np.allclose(out.values, np.cos(k * out.coords(0)) / (2 * c), atol=1e-13)
    assert out.support.kind == "face"


@settings(max_examples=8)
@given(st.integers(0, 5), st.sampled_from([1, 2]))
def test_rho_multiplication_identity(k, p):
    sym = symbols.inverse_elliptic(2)
    g = cos_face(k)
    a = halfspace.apply_to_boundary(sym, g)
    r = a.mesh()[1]
    assert np.allclose(r ** p * a.values, halfspace.rho_compose(sym, g, p).values, atol=1e-10)


def test_rho_compose_power_validation():
    with pytest.raises(OperatorError):
        halfspace.rho_compose(symbols.inverse_elliptic(2), cos_face(1), -1)


def test_boundary_operator_dno_multiplier():
    g = grid.from_function(lambda x: np.cos(3 * x), (np.pi,), (32,))
    out = halfspace.boundary_operator(lambda f: np.abs(f[0]), g)
    assert np.allclose(out.values, 3 * g.values, atol=1e-13)


def test_operator_error_paths():
    g = cos_face(1)
    with pytest.raises(OperatorError):
        halfspace.apply_to_boundary(symbols.inverse_elliptic(3), g)
    with pytest.raises(OperatorError):
        halfspace.apply_to_boundary(symbols.lambda_symbol(1, 2), g)
    with pytest.raises(OperatorError):
        halfspace.apply_to_boundary(symbols.inverse_elliptic(2, power=3), g)


def _exp_volume_action(r, c):
    """Exact ``(c^2 - d_rho^2)^{-1}`` applied to the zero extension of ``e^rho``, at ``rho <= 0``."""
    return np.exp(r) / (2 * c * (c + 1)) + (np.exp(c * r) - np.exp(r)) / (2 * c * (1 - c))


def test_volterra_full_action_matches_closed_form():
    f = grid.from_function(lambda x, r: np.cos(x) * np.exp(np.minimum(r, 0)), (np.pi, 16.0), (16, 512),
                           grid.halfspaces(1))
    out = halfspace.volterra_apply(symbols.inverse_elliptic(2), f, include_lower=True)
    x, r = out.mesh()
    mask = grid.region_mask(out.shape, [1])
    exact = np.cos(x) * _exp_volume_action(r, np.sqrt(2))
    assert np.max(abs(out.values - exact)[mask]) < 1e-7


def test_exp_convolution_is_fourth_order():
    q = 2j + 1.0
    errs = []
    for P in (33, 65, 129):
        t = np.linspace(0, 2, P)
        h = t[1] - t[0]
        I, _ = halfspace.exp_convolution(np.cos(t), q, h)
        # int_0^T cos(s) e^{iq(T-s)} ds in closed form
        T = t[-1]
        a = 1j * q
        exact = (np.exp(a * T) * a - a * np.cos(T) + np.sin(T)) / (a ** 2 + 1)
        errs.append(abs(I[-1] - exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)


def test_volterra_needs_upper_pole():
    sym = symbols.from_string("1/((eta - I*sqrt(1+xi^2))^2)", 2, -2)
    f = grid.from_function(lambda x, r: np.exp(np.minimum(r, 0)) + 0 * x, (np.pi, 4.0), (8, 32), grid.halfspaces(1))
    out = halfspace.volterra_apply(sym, f)
    assert np.all(np.isfinite(out.values))
    with pytest.raises(OperatorError):
        halfspace.volterra_apply(symbols.from_string("1/((eta + I*sqrt(1+xi^2))^2)", 2, -2), f)


def test_residue_and_direct_paths_agree_on_test_symbols():
    from psido import suite
    g = cos_face(2, L_rho=2.0, N_rho=16, N_x=8)
    for name, sym in suite.restrict_symbols().items():
        a = halfspace.apply_to_boundary(sym, g)
        b = halfspace.apply_to_boundary_direct(sym, g, method="qawf")
        assert np.max(abs(a.values - b.values)) <= 1e-6 * np.max(abs(a.values)), name


def test_smoothing_composition_is_bounded_uniformly_in_frequency():
    from psido import sobolev, suite
    sym = symbols.inverse_elliptic(2)
    ratios = []
    for k in (1, 2, 4, 8, 16):
        f = grid.from_function(lambda x, r: np.cos(k * x) * np.exp(np.minimum(r, 0)), (np.pi, 4.0), (64, 64),
                               grid.halfspaces(1))
        # mollifier of order -12, then restriction to the face
        Mf = halfspace.quantize(symbols.lambda_symbol(12, 2), f)
        g = halfspace.boundary_distribution(grid.restrict_boundary(Mf, 1), -1, 4.0, 64)
        ratios.append(suite.cutoff_derivative_ratio(sym, g) * sobolev.sobolev_norm(g.density, 0)
                      / sobolev.sobolev_norm(f, 0))
    assert max(ratios) <= 2 * ratios[0]
    assert ratios[-1] < ratios[0]
