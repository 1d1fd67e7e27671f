import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psido import grid
from psido.grid import GridError, GridFunction

# (1/2pi) int exp(-t^2/2) exp(-1.5 i t) dt, by scipy quad
GAUSS_HAT_15 = 0.12951759566589174

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
pow2 = st.sampled_from([4, 8, 16, 32])


def test_face_index_is_origin():
    for n in (4, 16, 256):
        t = grid.axis_coords(3.0, n)
        assert t[grid.zero_index(n)] == 0.0


def test_gaussian_transform_matches_quadrature():
    f = grid.from_function(lambda t: np.exp(-t ** 2 / 2), (20.0,), (256,))
    F = grid.fft_full(f)
    xi = f.freqs(0)
    expected = np.exp(-xi ** 2 / 2) / np.sqrt(2 * np.pi)
    assert np.allclose(F.coefficients, expected, atol=1e-12)


def test_gaussian_transform_frozen_value():
    # box chosen so that 1.5 is a grid frequency: pi / L * m = 1.5
    f = grid.from_function(lambda t: np.exp(-t ** 2 / 2), (6 * np.pi,), (512,))
    xi = f.freqs(0)
    i = int(np.flatnonzero(np.isclose(xi, 1.5))[0])
    assert grid.fft_full(f).coefficients[i] == pytest.approx(GAUSS_HAT_15, abs=1e-12)


@given(st.sampled_from([(8,), (4, 8), (4, 4, 8)]), st.integers(0, 2 ** 32 - 1))
def test_transform_roundtrip(shape, seed):
    r = np.random.default_rng(seed)
    vals = r.standard_normal(shape) + 1j * r.standard_normal(shape)
    f = GridFunction(vals, (1.3,) * len(shape))
    back = grid.inverse(grid.fft_full(f))
    assert np.allclose(back.values, vals, atol=1e-12)


@given(arrays(complex, (4, 16), elements=st.complex_numbers(max_magnitude=10, allow_nan=False)))
def test_partial_then_normal_equals_full(vals):
    f = GridFunction(vals, (2.0, 0.5))
    full = grid.fft_full(f).coefficients
    two_step = grid.normal_dft(grid.fft_partial(f, 1), 1).coefficients
    assert np.allclose(full, two_step, atol=1e-10)


@given(pow2, st.floats(0.5, 10), st.integers(0, 2 ** 32 - 1))
def test_parseval(n, L, seed):
    r = np.random.default_rng(seed)
    f = GridFunction(r.standard_normal(n), (L,))
    F = grid.fft_full(f).coefficients
    lhs = np.sum(abs(f.values) ** 2) * f.h[0]
    rhs = 2 * np.pi * np.sum(abs(F) ** 2) * np.pi / L
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(st.sampled_from([(8,), (4, 8), (2, 4, 4)]), st.integers(0, 2 ** 32 - 1),
       st.sampled_from(["full", "half", "face"]))
def test_bytes_roundtrip_is_exact(shape, seed, kind):
    r = np.random.default_rng(seed)
    vals = r.standard_normal(shape) + 1j * r.standard_normal(shape)
    support = {"full": grid.FULL, "half": grid.halfspaces(len(shape) - 1),
               "face": grid.face(len(shape) - 1, 0)}[kind]
    f = GridFunction(vals, tuple(1.0 + a for a in range(len(shape))), support)
    raw = grid.to_bytes(f)
    g = grid.from_bytes(raw)
    assert np.array_equal(g.values, f.values)
    assert g.L == f.L and g.support == f.support
    assert grid.to_bytes(g) == raw


def test_bytes_rejects_corruption():
    raw = grid.to_bytes(GridFunction(np.ones(8), (1.0,)))
    with pytest.raises(GridError):
        grid.from_bytes(b"XXXXX" + raw[5:])
    with pytest.raises(GridError):
        grid.from_bytes(raw[:-3])
    with pytest.raises(GridError):
        grid.from_bytes(raw[:8])


def test_save_and_load(tmp_path):
    f = grid.from_function(lambda x, r: x * r, (1.0, 2.0), (8, 8), grid.halfspaces(1))
    grid.save(f, tmp_path / "f.psig")
    g = grid.load(tmp_path / "f.psig")
    assert np.array_equal(f.values, g.values)


@pytest.mark.parametrize("vals, L", [(np.ones(6), (1.0,)), (np.ones(8), (0.0,)),
                                     (np.full(8, np.nan), (1.0,)), (np.ones((2,) * 4), (1.0,) * 4)])
def test_invalid_grids(vals, L):
    with pytest.raises(GridError):
        GridFunction(vals, L)


def test_values_are_read_only():
    f = GridFunction(np.ones(4), (1.0,))
    with pytest.raises(ValueError):
        f.values[0] = 2


def test_from_function_zeroes_outside_support():
    f = grid.from_function(lambda x, r: 1 + 0 * x, (1.0, 1.0), (8, 8), grid.halfspaces(1))
    z = grid.zero_index(8)
    assert np.all(f.values[:, z + 1:] == 0)
    assert np.all(f.values[:, : z + 1] == 1)


def test_extend_by_zero_and_restrict():
    f = grid.from_function(lambda a, b: np.exp(a + b), (1.0, 1.0), (8, 8), grid.halfspaces(0, 1))
    e = grid.extend_by_zero(f, [0])
    assert e.support == grid.halfspaces(1)
    assert np.array_equal(e.values, f.values)
    with pytest.raises(GridError):
        grid.extend_by_zero(e, [0])
    face = grid.restrict_boundary(f, 1)
    assert face.shape == (8,)
    assert face.support.kind == "face" and face.support.axes == frozenset({0})


def test_limit_from_below_is_exact_for_quadratics():
    f = grid.from_function(lambda x, r: np.cos(x) * (1 + r + r ** 2), (np.pi, 1.0), (8, 32))
    lim = grid.limit_from_below(f, 1)
    assert np.allclose(lim.values, np.cos(lim.coords(0)), atol=1e-12)


def test_mixing_face_and_volume_is_an_error():
    vol = GridFunction(np.ones(8), (1.0,))
    fc = GridFunction(np.ones(8), (1.0,), grid.face(1))
    with pytest.raises(GridError):
        vol + fc
    with pytest.raises(GridError):
        vol + GridFunction(np.ones(16), (1.0,))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(0,), (1,), (0, 1)]))
def test_extend_then_restrict_is_identity(seed, axes):
    r = np.random.default_rng(seed)
    f = grid.from_function(lambda a, b: r.standard_normal(a.shape), (1.0, 2.0), (8, 16), grid.halfspaces(0, 1))
    e = grid.extend_by_zero(f, axes)
    back = grid.restrict_to_region(e, axes)
    assert np.array_equal(back.values, f.values)
    assert back.support == f.support


@given(st.integers(0, 2 ** 32 - 1), finite, finite)
def test_transforms_are_linear(seed, a, b):
    r = np.random.default_rng(seed)
    f = GridFunction(r.standard_normal((8, 8)), (1.0, 1.0))
    g = GridFunction(r.standard_normal((8, 8)), (1.0, 1.0))
    lhs = grid.fft_full(a * f + b * g).coefficients
    rhs = a * grid.fft_full(f).coefficients + b * grid.fft_full(g).coefficients
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))
