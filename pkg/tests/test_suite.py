import inspect

import numpy as np
import pytest

from psido import suite

HALF_SPACE_IDS = ["estinvell", "sobint", "errbndry", "errint", "greenest"]


def test_every_identifier_has_one_check():
    ids = list(suite.CHECKS)
    assert len(ids) == 19 and len(set(ids)) == 19
    fns = list(suite.CHECKS.values())
    assert len(set(fns)) == len(fns)
    for name, fn in suite.CHECKS.items():
        assert fn.__name__ == f"check_{name}"
        assert "tol" in inspect.signature(fn).parameters


def test_unknown_identifier():
    with pytest.raises(KeyError):
        suite.run_check("nope")


@pytest.mark.parametrize("name", HALF_SPACE_IDS)
def test_half_space_estimates_pass(name):
    res = suite.run_check(name)
    assert res.passed, res.summary()
    assert all(np.isfinite(float(r["slope"])) for r in res.rows)


def test_tolerance_override_flips_verdict():
    res = suite.run_check("sobint", tol=-1.0)
    assert not res.passed
    assert res.summary().startswith("FAIL sobint")


def test_cutoff_check_is_seed_deterministic_and_uncut_ratios_grow():
    a = suite.check_symbolcut(seed=7)
    b = suite.check_symbolcut(seed=7)
    assert a.rows == b.rows
    uncut = [float(r["uncut_ratio"]) for r in a.rows]
    cut = [float(r["cutoff_ratio"]) for r in a.rows]
    assert max(uncut) > 3 * max(cut)


def test_manufactured_pair_consistency():
    u, f = suite.manufactured_pair(2, 64, 16)
    assert u.shape == f.shape == (16, 64)
    assert u.support == f.support
