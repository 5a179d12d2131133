"""Scenario definitions, replica determinism, Monte Carlo aggregation."""

import numpy as np
import pytest

from neurograph import InputError
from neurograph.estimate import FitOptions
from neurograph.experiments import (
    DEFAULT_EPSILON_GRID,
    MetricsReport,
    make_scenario,
    monte_carlo,
    run_replica,
    scenario_matrix,
    write_report,
)


class TestScenarioMatrices:
    def test_scenario_1_entries(self):
        w = scenario_matrix(1).weights
        assert w[4, 2] == -4  # fifth neuron onto third
        assert w[0, 2] == 1
        np.testing.assert_array_equal(np.diag(w), 0)
        assert (w != 0).sum() == 18  # one mutually disconnected pair

    def test_scenario_2_entries(self):
        w = scenario_matrix(2).weights
        assert w[4, 3] == -12
        assert w[0, 2] == 3
        np.testing.assert_array_equal(np.diag(w), 0)

    def test_scenario_3_mixed(self):
        w = scenario_matrix(3).weights
        assert w[0, 4] == 3
        assert w[2, 4] == -12
        assert w[3, 4] == -4

    def test_scenario_4_counts_and_determinism(self):
        w = scenario_matrix(4, base_seed=123).weights
        assert w.shape == (20, 20)
        np.testing.assert_array_equal(np.diag(w), 0)
        off = w[~np.eye(20, dtype=bool)]
        assert (off != 0).sum() == 152  # 40% of 380
        assert (off == 4.0).sum() == 122  # round(0.8 * 152)
        assert (off == -1.0).sum() == 30
        again = scenario_matrix(4, base_seed=123).weights
        np.testing.assert_array_equal(w, again)
        other = scenario_matrix(4, base_seed=124).weights
        assert (w != other).any()

    def test_invalid_id(self):
        with pytest.raises(InputError):
            scenario_matrix(5)


class TestRunReplica:
    def test_deterministic(self):
        spec = make_scenario(1, base_seed=3, replicas=2, t_grid=(300,))
        a = run_replica(spec, 300, 0)
        b = run_replica(spec, 300, 0)
        np.testing.assert_array_equal(a[0].weights, b[0].weights)
        np.testing.assert_array_equal(a[2], b[2])
        for eps in DEFAULT_EPSILON_GRID:
            np.testing.assert_array_equal(a[1][eps], b[1][eps])

    def test_replicas_differ(self):
        spec = make_scenario(1, base_seed=3, replicas=2, t_grid=(300,))
        a = run_replica(spec, 300, 0)
        b = run_replica(spec, 300, 1)
        assert (a[0].weights != b[0].weights).any()

    def test_diagonal_exactly_zero(self):
        spec = make_scenario(1, base_seed=0, replicas=1, t_grid=(200,))
        w_hat, _, _ = run_replica(spec, 200, 0)
        np.testing.assert_array_equal(np.diag(w_hat.weights), 0.0)

    def test_null_truth_small_errors_at_large_t(self):
        from neurograph.model import WeightMatrix
        from neurograph.experiments import ScenarioSpec

        spec = ScenarioSpec(
            scenario_id=1,
            weights=WeightMatrix.zeros(3),
            t_grid=(4000,),
            replicas=1,
            memory_cap=20,
            base_seed=5,
        )
        _, _, sq = run_replica(spec, 4000, 0)
        assert sq.max() < 0.25


@pytest.fixture(scope="module")
def small_report():
    spec = make_scenario(
        1, base_seed=11, replicas=4, t_grid=(300, 900),
        epsilon_grid=(1e-4, 1e-2),
    )
    return spec, monte_carlo(spec, workers=2)


class TestMonteCarlo:
    def test_report_shape(self, small_report):
        spec, rep = small_report
        assert isinstance(rep, MetricsReport)
        assert set(rep.mse) == {300, 900}
        assert rep.mse[300].shape == (5, 5)
        assert set(rep.proportion_correct) == {
            (t, e) for t in (300, 900) for e in (1e-4, 1e-2)
        }
        assert rep.flagged == []

    def test_mse_decreases_with_horizon(self, small_report):
        _, rep = small_report
        # aggregate over all weights; per-weight monotonicity is the
        # acceptance suite's job at full replica count
        assert rep.mse[900].mean() < rep.mse[300].mean()
        assert rep.frobenius_mean[900] < rep.frobenius_mean[300]

    def test_rates_are_rates(self, small_report):
        _, rep = small_report
        for table in (rep.proportion_correct, rep.fp_rate, rep.fn_rate):
            for v in table.values():
                assert 0.0 <= v <= 1.0

    def test_matches_run_replica(self, small_report):
        # The pooled path shares one simulation across horizons; results
        # must equal the public single-horizon entry point exactly.
        spec, rep = small_report
        sqs = [run_replica(spec, 900, r)[2] for r in range(spec.replicas)]
        np.testing.assert_allclose(rep.mse[900], np.mean(sqs, axis=0), rtol=1e-12)

    def test_serial_equals_parallel(self):
        spec = make_scenario(
            1, base_seed=2, replicas=3, t_grid=(250,), epsilon_grid=(1e-3,)
        )
        serial = monte_carlo(spec, workers=1)
        parallel = monte_carlo(spec, workers=3)
        np.testing.assert_array_equal(serial.mse[250], parallel.mse[250])
        assert serial.proportion_correct == parallel.proportion_correct


class TestWriteReport:
    def test_emits_all_files(self, tmp_path):
        spec = make_scenario(
            1, base_seed=1, replicas=2, t_grid=(200,), epsilon_grid=(1e-3,)
        )
        rep = monte_carlo(spec, workers=1)
        write_report(rep, tmp_path, wall_time_s=1.0)
        for name in (
            "mse.csv",
            "distance.csv",
            "selection.csv",
            "false_positive_rate.csv",
            "false_negative_rate.csv",
            "true_matrix.csv",
            "manifest.json",
        ):
            assert (tmp_path / name).exists(), name
        mse = (tmp_path / "mse.csv").read_text().splitlines()
        assert mse[0] == "weight,true_value,T=200"
        assert len(mse) == 1 + 20  # header + ordered pairs

    def test_reruns_are_byte_identical(self, tmp_path):
        spec = make_scenario(
            1, base_seed=1, replicas=2, t_grid=(200,), epsilon_grid=(1e-3,)
        )
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        write_report(monte_carlo(spec, workers=1), a_dir)
        write_report(monte_carlo(spec, workers=2), b_dir)
        for name in ("mse.csv", "selection.csv", "distance.csv"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
