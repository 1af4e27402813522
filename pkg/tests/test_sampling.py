import numpy as np
import pytest

from ridekit.errors import ConfigError, InvalidInput
from ridekit.road import straight_grid, synth_profile
from ridekit.sampling import (
    InputDistribution,
    SamplePlan,
    default_input_distributions,
    lhs,
    run_batch,
)
from ridekit.vehicle import Scenario, SpeedProfile, simulate


class TestDistributions:
    def test_validation(self):
        with pytest.raises(ConfigError):
            InputDistribution("v_dev", "gaussian", (0.0, 0.0))
        with pytest.raises(ConfigError):
            InputDistribution("mu_rs", "uniform", (1.0, 0.5))
        with pytest.raises(ConfigError):
            InputDistribution("x", "poisson", (1.0, 2.0))

    def test_defaults_match_standard_scenario(self):
        dists = {d.name: d for d in default_input_distributions()}
        assert dists["v_dev"].kind == "gaussian" and dists["v_dev"].params == (0.0, 0.2)
        assert dists["l_p"].kind == "gaussian" and dists["l_p"].params == (0.0, 0.2)
        assert dists["mu_rs"].kind == "uniform" and dists["mu_rs"].params == (0.6, 1.0)

    def test_shifted_speed_mean(self):
        dists = {d.name: d for d in default_input_distributions(v_dev_mean=-5.0)}
        assert dists["v_dev"].params == (-5.0, 0.2)

    def test_gaussian_inverse_cdf_accuracy(self):
        # round trip through the CDF must be far tighter than 1e-9
        dist = InputDistribution("v_dev", "gaussian", (0.0, 1.0))
        u = np.linspace(1e-6, 1 - 1e-6, 1001)
        assert np.max(np.abs(dist.cdf(dist.inv_cdf(u)) - u)) < 1e-12


class TestLhs:
    def test_single_sample_uniform(self):
        plan = lhs([InputDistribution("mu_rs", "uniform", (0.0, 1.0))], n=1, seed=0)
        assert plan.matrix.shape == (1, 1)
        assert 0.0 < plan.matrix[0, 0] < 1.0

    def test_four_strata_uniform(self):
        plan = lhs([InputDistribution("mu_rs", "uniform", (0.0, 1.0))], n=4, seed=3)
        values = np.sort(plan.matrix[:, 0])
        for k, v in enumerate(values):
            assert k / 4 <= v < (k + 1) / 4

    def test_gaussian_moments(self):
        plan = lhs([InputDistribution("v_dev", "gaussian", (0.0, 0.2))], n=1000, seed=1)
        column = plan.matrix[:, 0]
        assert abs(column.mean()) < 0.02
        assert abs(column.std() - 0.2) < 0.02

    def test_stratification_exact_every_column(self):
        dists = default_input_distributions()
        n = 128
        plan = lhs(dists, n=n, seed=9)
        for j, dist in enumerate(dists):
            strata = np.floor(dist.cdf(plan.matrix[:, j]) * n).astype(int)
            assert sorted(strata) == list(range(n)), dist.name

    def test_deterministic_per_seed(self):
        dists = default_input_distributions()
        assert np.array_equal(lhs(dists, 64, seed=5).matrix, lhs(dists, 64, seed=5).matrix)
        assert not np.array_equal(lhs(dists, 64, seed=5).matrix, lhs(dists, 64, seed=6).matrix)

    def test_columns_use_independent_streams(self):
        # two variables with identical distributions must not sample identically
        dists = [
            InputDistribution("v_dev", "gaussian", (0.0, 1.0)),
            InputDistribution("l_p", "gaussian", (0.0, 1.0)),
        ]
        plan = lhs(dists, 32, seed=4)
        assert not np.allclose(plan.matrix[:, 0], plan.matrix[:, 1])

    def test_shifted_site_yields_negative_deviations(self):
        plan = lhs(default_input_distributions(v_dev_mean=-5.0), n=1000, seed=11)
        v_dev = plan.column("v_dev")
        assert np.all(v_dev < -3.8)  # mu + 6 sigma

    def test_invalid_n(self):
        with pytest.raises(InvalidInput):
            lhs(default_input_distributions(), 0, seed=0)

    def test_plan_csv_round_trip(self, tmp_path):
        plan = lhs(default_input_distributions(), 16, seed=2)
        path = tmp_path / "plan.csv"
        path.write_text(plan.to_csv_text())
        back = SamplePlan.from_csv(path, seed=2)
        assert back.names == plan.names
        assert np.array_equal(back.matrix, plan.matrix)


@pytest.fixture(scope="module")
def batch_setup():
    grid = straight_grid(synth_profile(120.0, 0.1, "B", 31), 0.1)
    scenario = Scenario(road=grid, target_speed=SpeedProfile.constant(15.0))
    return grid, scenario


class TestRunBatch:
    def test_zero_deviation_row_equals_direct_call(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        plan = SamplePlan(names=("v_dev", "l_p", "mu_rs"), matrix=np.array([[0.0, 0.0, 1.0]]), seed=0)
        batch = run_batch(plan, scenario, car, geometry, dt=1e-3)
        direct = simulate(scenario.with_inputs(0.0, 0.0, 1.0), car, geometry, dt=1e-3)
        assert batch.failures == []
        assert np.array_equal(batch.responses[0].a_z.values, direct.a_z.values)

    def test_same_seed_bit_identical(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        dists = default_input_distributions()
        plans = [lhs(dists, 4, seed=8), lhs(dists, 4, seed=8)]
        batches = [run_batch(p, scenario, car, geometry, dt=2e-3) for p in plans]
        for a, b in zip(batches[0].responses, batches[1].responses):
            assert np.array_equal(a.v_x.values, b.v_x.values)
            assert np.array_equal(a.a_z.values, b.a_z.values)

    def test_failures_collected_batch_continues(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        plan = SamplePlan(
            names=("v_dev", "l_p", "mu_rs"),
            matrix=np.array([[0.0, 0.0, 1.0], [-15.0, 0.0, 1.0], [0.0, 0.0, 0.9]]),
            seed=0,
        )  # second row commands negative speed -> failure
        batch = run_batch(plan, scenario, car, geometry, dt=2e-3)
        assert [i for i, _ in batch.failures] == [1]
        assert batch.responses[1] is None
        assert batch.responses[0] is not None and batch.responses[2] is not None
        assert len(batch.successful()) == 2

    def test_parallel_matches_serial(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        plan = lhs(default_input_distributions(), 4, seed=13)
        serial = run_batch(plan, scenario, car, geometry, dt=2e-3, jobs=1)
        threaded = run_batch(plan, scenario, car, geometry, dt=2e-3, jobs=3)
        for a, b in zip(serial.responses, threaded.responses):
            assert np.array_equal(a.a_z.values, b.a_z.values)

    def test_unknown_plan_column_rejected(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        plan = SamplePlan(names=("v_dev", "wind"), matrix=np.zeros((1, 2)), seed=0)
        with pytest.raises(ConfigError):
            run_batch(plan, scenario, car, geometry)

    def test_row_permutation_permutes_outputs(self, batch_setup, car, geometry):
        _, scenario = batch_setup
        plan = lhs(default_input_distributions(), 3, seed=21)
        permuted = SamplePlan(names=plan.names, matrix=plan.matrix[::-1].copy(), seed=21)
        batch = run_batch(plan, scenario, car, geometry, dt=2e-3)
        flipped = run_batch(permuted, scenario, car, geometry, dt=2e-3)
        for a, b in zip(batch.responses, flipped.responses[::-1]):
            assert np.array_equal(a.a_z.values, b.a_z.values)
