import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgediff.schedule import build_schedule, coarse_posterior_var, query


@pytest.fixture(scope="module")
def t4():
    return build_schedule(4, 1.0)


class TestHandValues:
    # T=4, s=1 evaluated by hand from the closed forms.
    def test_marginal_var(self, t4):
        np.testing.assert_allclose(t4.marginal_var, [0.0, 0.375, 0.5, 0.375, 0.0], atol=1e-15)

    def test_transition_var(self, t4):
        assert t4.transition_var[1] == pytest.approx(0.375, abs=1e-15)
        assert t4.transition_var[2] == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert t4.transition_var[3] == pytest.approx(0.25, abs=1e-15)
        assert t4.transition_var[4] == 0.0

    def test_posterior_var(self, t4):
        assert t4.posterior_var[1] == 0.0
        assert t4.posterior_var[2] == pytest.approx(0.25, abs=1e-15)
        assert t4.posterior_var[3] == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_reverse_coefficients(self, t4):
        assert t4.coef_state[2] == pytest.approx(1.0, abs=1e-15)
        assert t4.coef_cond[2] == pytest.approx(0.0, abs=1e-15)
        assert t4.coef_noise[2] == pytest.approx(0.5, abs=1e-15)
        assert t4.coef_state[2] + t4.coef_cond[2] == pytest.approx(1.0, abs=1e-15)

    def test_t1000_midpoint(self):
        sch = build_schedule(1000, 1.0)
        assert sch.mix[500] == 0.5
        assert sch.marginal_var[500] == 0.5


def _assert_invariants(sch, tol=1e-12):
    T, s = sch.T, sch.s
    mv, mix, tv, pv = sch.marginal_var, sch.mix, sch.transition_var, sch.posterior_var
    assert mix[0] == 0.0 and mix[T] == 1.0
    assert np.all(np.diff(mix) > 0)
    assert mv[0] == 0.0 and mv[T] == 0.0
    assert np.all(mv[1:T] > 0)
    np.testing.assert_allclose(mv, mv[::-1], atol=tol)
    if T % 2 == 0:
        assert abs(mv[T // 2] - s / 2.0) <= tol
        assert np.argmax(mv) == T // 2
    r = (1.0 - mix[1:]) / (1.0 - mix[:-1])
    np.testing.assert_allclose(mv[1:], r * r * mv[:-1] + tv[1:], atol=tol)
    np.testing.assert_allclose(pv[1:T], tv[1:T] * mv[: T - 1] / mv[1:T], atol=tol)
    assert pv[1] == 0.0
    assert tv[T] == 0.0
    assert np.all(pv[1:T] >= 0.0)
    assert np.all(pv[1:T] <= mv[: T - 1] + tol)
    np.testing.assert_allclose(sch.coef_state[1:T] + sch.coef_cond[1:T], 1.0, atol=tol)


@pytest.mark.parametrize("T", [2, 3, 10, 37, 1000])
@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 4.0])
def test_invariants_acceptance_grid(T, s):
    _assert_invariants(build_schedule(T, s))


@settings(max_examples=30, deadline=None)
@given(T=st.integers(min_value=2, max_value=300), s=st.floats(min_value=0.05, max_value=16.0))
def test_invariants_random(T, s):
    _assert_invariants(build_schedule(T, s))


class TestDegenerate:
    def test_nan_slots(self, t4):
        assert np.isnan(t4.posterior_var[4])
        assert np.isnan(t4.coef_state[4])
        assert np.isnan(t4.coef_cond[4])
        assert np.isnan(t4.coef_noise[4])
        assert np.isnan(t4.transition_var[0])

    def test_query_start(self, t4):
        entry = query(t4, 0)
        assert entry.mix == 0.0 and entry.marginal_var == 0.0
        assert entry.transition_var is None and entry.coef_state is None
        assert entry.degenerate

    def test_query_end(self, t4):
        entry = query(t4, 4)
        assert entry.mix == 1.0 and entry.marginal_var == 0.0
        assert entry.transition_var == 0.0
        assert entry.posterior_var is None and entry.coef_noise is None
        assert entry.degenerate

    def test_query_interior(self, t4):
        entry = query(t4, 2)
        assert not entry.degenerate
        assert entry.coef_state == pytest.approx(1.0)
        assert entry.coef_cond == pytest.approx(0.0)
        assert entry.coef_noise == pytest.approx(0.5)

    def test_query_out_of_range(self, t4):
        with pytest.raises(ValueError):
            query(t4, 5)
        with pytest.raises(ValueError):
            query(t4, -1)
        with pytest.raises(TypeError):
            query(t4, 1.5)


class TestBuildValidation:
    @pytest.mark.parametrize("T", [0, 1, -3])
    def test_bad_T(self, T):
        with pytest.raises(ValueError):
            build_schedule(T, 1.0)

    def test_non_integer_T(self):
        with pytest.raises(TypeError):
            build_schedule(4.0, 1.0)

    @pytest.mark.parametrize("s", [0.0, -1.0, math.nan, math.inf])
    def test_bad_s(self, s):
        with pytest.raises(ValueError):
            build_schedule(10, s)

    def test_arrays_read_only(self, t4):
        with pytest.raises(ValueError):
            t4.marginal_var[1] = 9.0


class TestCoarsePosteriorVar:
    def test_adjacent_matches_schedule_bitwise(self):
        sch = build_schedule(50, 2.0)
        for t in range(2, 50):
            assert coarse_posterior_var(sch, t - 1, t) == sch.posterior_var[t]

    def test_bounded_by_prev_marginal(self):
        sch = build_schedule(100, 1.0)
        for prev, cur in [(1, 5), (10, 80), (40, 99), (3, 4)]:
            pv = coarse_posterior_var(sch, prev, cur)
            assert 0.0 <= pv <= sch.marginal_var[prev]

    def test_rejects_bad_pairs(self):
        sch = build_schedule(10, 1.0)
        with pytest.raises(ValueError):
            coarse_posterior_var(sch, 5, 5)
        with pytest.raises(ValueError):
            coarse_posterior_var(sch, 3, 10)
