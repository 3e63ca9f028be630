import math

import numpy as np
import pytest

from dynroc.cohort import build_analysis_cohort, load_cohort, write_cohort
from dynroc.simulate import MarkerDistribution, SimConfig, mc_true_auc, simulate_cohort


class TestMarkerDistribution:
    def test_parse(self):
        d = MarkerDistribution.parse("normal:70,25")
        assert (d.kind, d.a, d.b) == ("normal", 70.0, 25.0)
        d = MarkerDistribution.parse("uniform:-1,1")
        assert (d.kind, d.a, d.b) == ("uniform", -1.0, 1.0)

    def test_parse_rejects_garbage(self):
        for bad in ("normal", "normal:1", "exp:1,2", "uniform:3,1"):
            with pytest.raises(ValueError):
                MarkerDistribution.parse(bad)

    def test_round_trip_str(self):
        d = MarkerDistribution.parse("uniform:20,110")
        assert MarkerDistribution.parse(str(d)) == d


class TestSimulateCohort:
    def test_deterministic_bit_identical(self):
        cfg = SimConfig(n_patients=50, log_hazard_slope=0.5, baseline_hazard=0.2,
                        drift_per_year=-0.2, noise_sd=0.3, censor_rate=0.05,
                        admin_horizon=12.0, seed=77)
        assert simulate_cohort(cfg) == simulate_cohort(cfg)

    def test_null_beta_marker_independent_of_death(self):
        cfg = SimConfig(n_patients=5000, log_hazard_slope=0.0, baseline_hazard=0.2,
                        admin_horizon=50.0, seed=1)
        cohort = simulate_cohort(cfg)
        m0 = np.array([cohort.baseline_value("fev1pct", p) for p in cohort.patient_ids])
        logt = np.log([cohort.outcome(p).time for p in cohort.patient_ids])
        r = np.corrcoef(m0, logt)[0, 1]
        assert abs(r) < 3.0 / math.sqrt(len(m0))

    def test_frozen_trajectory(self):
        cfg = SimConfig(n_patients=40, log_hazard_slope=0.4, baseline_hazard=0.15,
                        admin_horizon=10.0, seed=4)  # noise_sd=0, drift=0
        cohort = simulate_cohort(cfg)
        for series in cohort.marker_series("fev1pct").values():
            assert len(set(series.values)) == 1

    def test_exponential_mean_when_beta_zero(self):
        cfg = SimConfig(n_patients=5000, log_hazard_slope=0.0, baseline_hazard=0.2,
                        censor_rate=0.0, admin_horizon=math.inf, seed=6)
        cohort = simulate_cohort(cfg)
        times = np.array([o.time for o in cohort.outcomes])
        assert all(o.is_death for o in cohort.outcomes)
        mean, se = times.mean(), times.std() / math.sqrt(len(times))
        assert abs(mean - 5.0) < 3 * se

    def test_markers_annual_until_followup(self):
        cfg = SimConfig(n_patients=200, log_hazard_slope=0.6, baseline_hazard=0.25,
                        censor_rate=0.1, admin_horizon=8.0, seed=9)
        cohort = simulate_cohort(cfg)
        for pid in cohort.patient_ids:
            t_obs = cohort.outcome(pid).time
            times = cohort.marker_series("fev1pct")[pid].times
            assert times[0] == 0.0
            assert times == tuple(float(k) for k in range(int(math.floor(t_obs)) + 1))

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n_patients=1)
        with pytest.raises(ValueError):
            SimConfig(n_patients=10, baseline_hazard=0.0)
        with pytest.raises(ValueError):
            SimConfig(n_patients=10, admin_horizon=0.0)
        with pytest.raises(ValueError):
            SimConfig(n_patients=10, noise_sd=-1.0)

    def test_flows_through_registry_csv_path(self, tmp_path):
        cfg = SimConfig(n_patients=30, log_hazard_slope=0.5, baseline_hazard=0.2,
                        censor_rate=0.05, admin_horizon=10.0, seed=11)
        cohort = simulate_cohort(cfg)
        write_cohort(cohort, tmp_path / "p.csv", tmp_path / "r.csv")
        loaded = load_cohort(tmp_path / "p.csv", tmp_path / "r.csv")
        assert loaded.patients == cohort.patients
        assert loaded.markers == cohort.markers
        assert loaded.outcomes == cohort.outcomes
        analysis = build_analysis_cohort(loaded, "fev1pct")
        assert analysis.exclusions.total_excluded == 0


class TestMcTrueAuc:
    def test_null_beta_half_everywhere(self):
        cfg = SimConfig(n_patients=100, log_hazard_slope=0.0, baseline_hazard=0.15,
                        admin_horizon=20.0, seed=3)
        oracle = mc_true_auc(cfg, grid=[1.0, 5.0, 10.0], mc_n=1_000_000)
        for v in oracle.true_auc:
            assert abs(v - 0.5) < 0.01

    def test_deterministic_inverse_relation_gives_one(self):
        # frozen marker, death time strictly decreasing in the marker
        cfg = SimConfig(n_patients=100, log_hazard_slope=4.0, baseline_hazard=0.05,
                        baseline_marker=MarkerDistribution("uniform", 0.0, 1.0),
                        admin_horizon=30.0, seed=5)
        oracle = mc_true_auc(cfg, grid=[2.0, 5.0], mc_n=50_000, time_tolerance=0.002)
        for v, n in zip(oracle.true_auc, oracle.n_cases):
            if n >= 100:
                assert v > 0.995

    def test_determinism(self):
        cfg = SimConfig(n_patients=100, log_hazard_slope=1.0, baseline_hazard=0.1,
                        admin_horizon=20.0, seed=8)
        a = mc_true_auc(cfg, grid=[1.0, 3.0], mc_n=30_000)
        b = mc_true_auc(cfg, grid=[1.0, 3.0], mc_n=30_000)
        assert a == b

    def test_low_case_grid_point_flagged(self):
        cfg = SimConfig(n_patients=100, log_hazard_slope=0.0, baseline_hazard=0.001,
                        admin_horizon=100.0, seed=2)
        oracle = mc_true_auc(cfg, grid=[0.5], mc_n=1000)
        assert oracle.flagged()[0]

    def test_positive_beta_frozen_marker_bounded_away_from_half_early(self):
        cfg = SimConfig(n_patients=100, log_hazard_slope=1.0, baseline_hazard=0.1,
                        admin_horizon=20.0, seed=21)
        oracle = mc_true_auc(cfg, grid=[0.5, 1.0, 2.0], mc_n=100_000)
        assert all(v > 0.7 for v in oracle.true_auc)

    def test_matches_closed_form_at_time_zero(self):
        # frozen standard-normal marker, beta=1: AUC(0+) = Phi(1/sqrt(2))
        from scipy.stats import norm

        cfg = SimConfig(n_patients=100, log_hazard_slope=1.0, baseline_hazard=0.1,
                        admin_horizon=20.0, seed=42)
        oracle = mc_true_auc(cfg, grid=[0.05], mc_n=400_000)
        assert abs(oracle.true_auc[0] - norm.cdf(1.0 / math.sqrt(2.0))) < 0.01

    def test_estimator_recovers_oracle_midrange(self):
        from dynroc.accuracy import auc_curve, incident_percentiles, updated_marker_scores

        cfg = SimConfig(n_patients=1500, log_hazard_slope=1.0, baseline_hazard=0.1,
                        admin_horizon=15.0, seed=10)
        cohort = simulate_cohort(cfg)
        scores = updated_marker_scores(cohort, "fev1pct")
        pct = incident_percentiles(scores, cohort.outcomes)
        grid = [2.0, 5.0, 8.0]
        curve = auc_curve(pct, grid=grid, span=0.15)
        oracle = mc_true_auc(cfg, grid=grid, mc_n=200_000)
        for est, truth in zip(curve.estimate, oracle.true_auc):
            assert abs(est - truth) < 0.05
