import math

import numpy as np
import pytest

from bridgediff.nn import NoisePredictor
from bridgediff.process import reverse_mean
from bridgediff.sampling import (
    SamplerPlan,
    accelerated_sample,
    ancestral_sample,
    make_grid,
    write_trajectory_csv,
)
from bridgediff.schedule import build_schedule
from bridgediff.seeding import rng_for


@pytest.fixture(scope="module")
def schedule():
    return build_schedule(30, 1.0)


@pytest.fixture(scope="module")
def model(schedule):
    rng = rng_for(31, "sampler-model")
    model = NoisePredictor.create(2, (12, 12), 8, rng)
    for arr in model.params():
        arr += 0.1 * rng.standard_normal(arr.shape)
    return model


class TestMakeGrid:
    def test_full_grid(self):
        assert make_grid(1000, 1000) == tuple(range(1, 1001))

    def test_single_step(self):
        assert make_grid(1000, 1) == (1000,)

    def test_rounding_rule(self):
        assert make_grid(10, 5) == (2, 4, 6, 8, 10)

    def test_always_ends_at_T(self):
        for T, S in [(7, 3), (100, 7), (1000, 200), (2, 2)]:
            grid = make_grid(T, S)
            assert grid[-1] == T
            assert grid[0] >= 1
            assert all(b > a for a, b in zip(grid, grid[1:]))
            assert len(grid) == S

    def test_bounds(self):
        with pytest.raises(ValueError):
            make_grid(10, 0)
        with pytest.raises(ValueError):
            make_grid(10, 11)


class TestSamplerPlan:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerPlan(grid=())
        with pytest.raises(ValueError):
            SamplerPlan(grid=(3, 3, 5))
        with pytest.raises(ValueError):
            SamplerPlan(grid=(0, 5))
        with pytest.raises(ValueError):
            SamplerPlan(grid=(1, 5), eta=1.5)


class TestAncestral:
    def test_same_seed_bitwise(self, schedule, model):
        y = np.array([0.4, -0.9])
        a, _ = ancestral_sample(schedule, model.eps_fn(30), y, seed=5)
        b, _ = ancestral_sample(schedule, model.eps_fn(30), y, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_trajectory_endpoints(self, schedule, model):
        y = np.array([1.0, 0.25])
        x0, traj = ancestral_sample(schedule, model.eps_fn(30), y, seed=6,
                                    record_trajectory=True)
        assert traj[0][0] == 30
        np.testing.assert_array_equal(traj[0][1], y)
        assert traj[-1][0] == 0
        np.testing.assert_array_equal(traj[-1][1], x0)
        assert np.all(np.isfinite(x0))
        assert len(traj) == 31  # T, T-1, ..., 1, 0

    def test_middle_steps_match_reverse_mean(self, schedule, model):
        # Replay the chain's noise stream and check each interior update
        # against the coefficient-form reverse mean.
        T = schedule.T
        seed = 7
        _, traj = ancestral_sample(schedule, model.eps_fn(T), np.array([0.2, -0.4]),
                                   seed=seed, record_trajectory=True)
        states = dict(traj)
        y = states[T]
        rng = rng_for(seed, "chain")
        rng.standard_normal(2)  # the T -> T-1 draw
        for cur in range(T - 1, 1, -1):
            z = rng.standard_normal(2)
            eps = model.forward(states[cur], cur, T)
            ref = reverse_mean(schedule, states[cur], y, eps, cur)
            expected = ref.mean + math.sqrt(ref.var) * z
            np.testing.assert_allclose(states[cur - 1], expected, atol=1e-12)

    def test_first_move_is_marginal_around_reconstruction(self, schedule, model):
        T = schedule.T
        seed = 8
        y = np.array([0.1, 0.9])
        _, traj = ancestral_sample(schedule, model.eps_fn(T), y, seed=seed,
                                   record_trajectory=True)
        states = dict(traj)
        rng = rng_for(seed, "chain")
        z = rng.standard_normal(2)
        x0_hat = y - model.forward(y, T, T)
        expected = (
            (1 - schedule.mix[T - 1]) * x0_hat
            + schedule.mix[T - 1] * y
            + math.sqrt(schedule.marginal_var[T - 1]) * z
        )
        np.testing.assert_allclose(states[T - 1], expected, atol=1e-15)

    def test_final_step_is_noiseless_reconstruction(self, schedule, model):
        T = schedule.T
        x0, traj = ancestral_sample(schedule, model.eps_fn(T), np.array([0.5, 0.5]),
                                    seed=9, record_trajectory=True)
        states = dict(traj)
        expected = states[1] - model.forward(states[1], 1, T)
        np.testing.assert_array_equal(x0, expected)

    def test_nonfinite_state_aborts_with_step(self, schedule):
        def bad_eps(x, t):
            return np.full_like(x, np.nan) if t == 17 else np.zeros_like(x)

        with pytest.raises(FloatingPointError, match="t=17"):
            ancestral_sample(schedule, bad_eps, np.zeros(2), seed=1)


class TestAccelerated:
    def test_full_grid_eta1_bitwise_equal_to_ancestral(self, schedule, model):
        for seed in (11, 12, 13):
            y = rng_for(seed, "y").normal(size=2)
            ref, ref_traj = ancestral_sample(schedule, model.eps_fn(30), y, seed=seed,
                                             record_trajectory=True)
            plan = SamplerPlan(grid=tuple(range(1, 31)), eta=1.0, seed=seed,
                               record_trajectory=True)
            out, traj = accelerated_sample(schedule, model.eps_fn(30), y, plan)
            np.testing.assert_array_equal(out, ref)
            assert len(traj) == len(ref_traj)
            for (ta, sa), (tb, sb) in zip(traj, ref_traj):
                assert ta == tb
                np.testing.assert_array_equal(sa, sb)

    def test_eta_zero_is_deterministic(self, schedule, model):
        y = np.array([0.2, 0.6])
        grid = make_grid(30, 6)
        outs = []
        for seed in (1, 2, 3):
            plan = SamplerPlan(grid=grid, eta=0.0, seed=seed)
            out, _ = accelerated_sample(schedule, model.eps_fn(30), y, plan)
            outs.append(out)
        np.testing.assert_array_equal(outs[0], outs[1])
        np.testing.assert_array_equal(outs[1], outs[2])

    def test_single_point_grid_is_one_shot(self, schedule, model):
        y = np.array([0.3, -0.3])
        plan = SamplerPlan(grid=(30,), eta=1.0, seed=4, record_trajectory=True)
        out, traj = accelerated_sample(schedule, model.eps_fn(30), y, plan)
        np.testing.assert_array_equal(out, y - model.forward(y, 30, 30))
        assert [t for t, _ in traj] == [30, 0]

    def test_coarse_grid_runs_and_starts_at_y(self, schedule, model):
        y = np.array([1.2, -0.8])
        plan = SamplerPlan(grid=make_grid(30, 5), eta=1.0, seed=5, record_trajectory=True)
        out, traj = accelerated_sample(schedule, model.eps_fn(30), y, plan)
        np.testing.assert_array_equal(traj[0][1], y)
        assert traj[0][0] == 30
        assert traj[-1][0] == 0
        assert np.all(np.isfinite(out))

    def test_grid_must_end_at_T(self, schedule, model):
        plan = SamplerPlan(grid=(1, 2, 29), eta=1.0, seed=1)
        with pytest.raises(ValueError):
            accelerated_sample(schedule, model.eps_fn(30), np.zeros(2), plan)


class TestTrajectoryExport:
    def test_csv_round_values(self, schedule, model, tmp_path):
        y = np.array([0.4, 0.7])
        plan = SamplerPlan(grid=make_grid(30, 4), eta=1.0, seed=6, record_trajectory=True)
        _, traj = accelerated_sample(schedule, model.eps_fn(30), y, plan)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,dim_0,dim_1"
        assert len(lines) == len(traj) + 1
        for (t, state), line in zip(traj, lines[1:]):
            fields = line.split(",")
            assert int(fields[0]) == t
            assert [float(f) for f in fields[1:]] == list(state)
