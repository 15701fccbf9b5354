from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropix.chain import ChainSpec, Interval, TailModel, preset, restrict, tridiagonal


def test_constant_preset_has_constant_tails(constant):
    assert constant.left.kind == "constant" and constant.right.kind == "constant"
    assert (constant.beta_l, constant.beta_r) == (1.0, 2.0)
    assert constant.delta_beta == 1.0


def test_step_J_values():
    spec = preset("step_J")
    assert spec.J(0) == 0.5 and spec.J(-7) == 0.5
    assert spec.J(1) == 1.0 and spec.J(9) == 1.0


def test_equilibrium_spec_is_valid():
    spec = preset("constant", beta_l=1.0, beta_r=1.0)
    assert spec.delta_beta == 0.0


@pytest.mark.parametrize("bad", [dict(beta_l=0.0), dict(beta_r=-1.0)])
def test_nonpositive_beta_rejected(bad):
    with pytest.raises(ValueError):
        preset("constant", **bad)


def test_zero_coupling_rejected():
    with pytest.raises(ValueError):
        preset("constant", J=0.0)
    with pytest.raises(ValueError):
        TailModel((1.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        preset("tabulated", window=[(0, 0.0, 0.0)])


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        preset("almost_mathieu")


def test_restrict_constant():
    J, lam = restrict(preset("constant"), Interval(-1, 1))
    np.testing.assert_array_equal(J, [1.0, 1.0])
    np.testing.assert_array_equal(lam, [0.0, 0.0, 0.0])


def test_restrict_step_J_cut_bond_is_left():
    J, lam = restrict(preset("step_J"), Interval(-1, 1))
    np.testing.assert_array_equal(J, [0.5, 0.5])
    np.testing.assert_array_equal(lam, [0.0, 0.0, 0.0])


def test_restrict_periodic2_phase():
    J, _ = restrict(preset("periodic2"), Interval(0, 3))
    np.testing.assert_array_equal(J, [1.0, 2.0, 1.0])
    J, _ = restrict(preset("periodic2", phase=1), Interval(0, 3))
    np.testing.assert_array_equal(J, [2.0, 1.0, 2.0])


def test_window_overrides_tails():
    spec = preset("tabulated", window=[(0, 0.3, 0.1), (2, 1.5, -0.2)])
    J, lam = restrict(spec, Interval(-1, 3))
    np.testing.assert_allclose(J, [1.0, 0.3, 1.0, 1.5])
    np.testing.assert_allclose(lam, [0.0, 0.1, 0.0, -0.2, 0.0])
    assert spec.window_range == (0, 2)


def test_interval_invariants():
    with pytest.raises(ValueError):
        Interval(1, 3)
    with pytest.raises(ValueError):
        Interval(-2, 0)
    iv = Interval.of_size(7)
    assert iv.N == 7 and iv.lo <= 0 < iv.hi
    assert Interval.symmetric(3).sites.tolist() == [-3, -2, -1, 0, 1, 2, 3]


def test_v_max():
    assert preset("periodic2", lam=(0.0, 0.5)).v_max == 2 * 2.0 + 0.5


def test_dict_round_trip():
    spec = preset("tabulated", window=[(0, 0.3, 0.1)], left=(0.5, 0.2), right={"J": [1.0, 2.0], "lam": [0.0, 0.1], "phase": 1})
    assert ChainSpec.from_dict(spec.to_dict()) == spec
    assert ChainSpec.from_dict({"preset": "step_J"}) == preset("step_J")


def test_tridiagonal():
    h = tridiagonal([1.0, 2.0], [0.5, 0.0, -0.5])
    np.testing.assert_array_equal(h, [[0.5, 1, 0], [1, 0, 2], [0, 2, -0.5]])


@settings(max_examples=40, deadline=None)
@given(
    lo=st.integers(-8, 0),
    hi=st.integers(1, 8),
    inner=st.integers(0, 3),
    phase=st.integers(0, 2),
)
def test_restrict_nesting(lo, hi, inner, phase):
    spec = preset("tabulated", window=[(-1, 0.7, 0.2), (3, 1.3, -0.4)], left={"J": [1.0, 2.0, 3.0], "lam": [0.1, 0.2, 0.3], "phase": phase})
    big = Interval(lo - inner, hi + inner)
    J_big, lam_big = restrict(spec, big)
    J, lam = restrict(spec, Interval(lo, hi))
    np.testing.assert_array_equal(J_big[inner : inner + len(J)], J)
    np.testing.assert_array_equal(lam_big[inner : inner + len(lam)], lam)


@settings(max_examples=40, deadline=None)
@given(x=st.integers(-50, 50), phase=st.integers(0, 2))
def test_tail_periodicity(x, phase):
    spec = preset("periodic2", J=(1.0, 2.0), lam=(0.3, -0.1), phase=phase)
    if x + 2 <= 0 or x >= 1:
        assert spec.J(x) == spec.J(x + 2)
        assert spec.lam(x) == spec.lam(x + 2)
