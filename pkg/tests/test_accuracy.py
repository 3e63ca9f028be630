import math

import numpy as np
import pytest

from dynroc.accuracy import (
    BaselineScores,
    UpdatedScores,
    auc_curve,
    baseline_marker_scores,
    bootstrap_bands,
    case_percentile,
    compare_update_policies,
    control_threshold,
    default_grid,
    incident_percentiles,
    resample_cohort,
    source_patient_id,
    subgroup_curves,
    tpf_at_fpf_curve,
    updated_marker_scores,
    windowed_mean_percentiles,
)
from dynroc.cohort import SurvivalOutcome
from dynroc.cox import ScoreSeries, base_model, fit_cox
from dynroc.errors import EvaluationError
from dynroc.simulate import SimConfig, simulate_cohort
from dynroc.subgroups import parse_stratifier

from conftest import outcomes_cohort
from oracles import (
    brute_incident_percentiles,
    brute_tpf_contributions,
    random_outcome_set,
    random_scores,
)


def O(pid, t, event="death"):
    return SurvivalOutcome(pid, t, event)


class TestCasePercentile:
    def test_hand_enumeration(self):
        assert case_percentile(2.0, [4.0, 1.0, 3.0]) == 1 / 3

    def test_perfect_marker(self):
        assert case_percentile(5.0, [1.0, 2.0, 3.0]) == 1.0

    def test_midrank_tie(self):
        assert case_percentile(2.0, [2.0, 1.0, 3.0]) == (1 + 0.5) / 3

    def test_empty_controls(self):
        with pytest.raises(EvaluationError):
            case_percentile(1.0, [])


class TestIncidentPercentiles:
    def test_spec_walkthrough(self):
        outcomes = [O("p1", 1.0), O("p2", 2.0), O("p3", 3.0), O("p4", 4.0)]
        scores = BaselineScores({"p1": 2.0, "p2": 4.0, "p3": 1.0, "p4": 3.0})
        result = incident_percentiles(scores, outcomes)
        assert [c.percentile for c in result] == [1 / 3, 1.0, 0.0]
        assert result.skipped_no_controls == 1  # the t=4 case has no controls

    def test_perfect_ranking(self):
        outcomes = [O(f"p{i}", float(i + 1)) for i in range(5)]
        scores = BaselineScores({f"p{i}": float(10 - i) for i in range(5)})
        result = incident_percentiles(scores, outcomes)
        assert all(c.percentile == 1.0 for c in result)

    def test_single_tied_pair(self):
        outcomes = [O("a", 1.0), O("b", 2.0, "censored")]
        scores = BaselineScores({"a": 5.0, "b": 5.0})
        result = incident_percentiles(scores, outcomes)
        assert [c.percentile for c in result] == [0.5]

    def test_tied_deaths_compared_to_controls_only(self):
        outcomes = [O("a", 1.0), O("b", 1.0), O("c", 2.0, "censored"), O("d", 3.0)]
        scores = BaselineScores({"a": 9.0, "b": 0.0, "c": 4.0, "d": 5.0})
        result = incident_percentiles(scores, outcomes)
        by_pid = {c.patient_id: c for c in result}
        # a vs {c,d}: above both; b vs {c,d}: below both; co-case never compared
        assert by_pid["a"].percentile == 1.0
        assert by_pid["b"].percentile == 0.0
        assert by_pid["a"].n_controls == 2

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(17)
        for trial in range(300):
            outcomes = random_outcome_set(rng, int(rng.integers(2, 13)))
            scores = random_scores(rng, outcomes, tied=bool(trial % 2))
            accessor = BaselineScores(scores)
            got = incident_percentiles(accessor, outcomes)
            expected = brute_incident_percentiles(lambda pid, t: scores[pid], outcomes)
            assert [(c.time, c.patient_id) for c in got] == [(t, p) for t, p, _ in expected]
            for c, (_, _, pct) in zip(got, expected):
                assert c.percentile == pct  # identical rational arithmetic

    def test_updated_scores_locf(self):
        series = [
            ScoreSeries("a", ((0.0, 1.0), (2.0, 9.0))),
            ScoreSeries("b", ((0.0, 5.0),)),
            ScoreSeries("c", ((0.0, 3.0), (1.0, 4.0))),
        ]
        outcomes = [O("a", 2.5), O("b", 3.0, "censored"), O("c", 4.0)]
        result = incident_percentiles(UpdatedScores(series), outcomes)
        # a at t=2.5 uses score 9 vs controls b=5, c=4 -> percentile 1.0
        assert result.percentiles[0].percentile == 1.0

    def test_score_missing_at_time_raises(self):
        series = [ScoreSeries("a", ((1.0, 1.0),)), ScoreSeries("b", ((0.0, 2.0),))]
        outcomes = [O("a", 0.5), O("b", 2.0, "censored")]
        with pytest.raises(EvaluationError, match="at or before"):
            incident_percentiles(UpdatedScores(series), outcomes)


class TestAucCurve:
    def percentiles(self):
        outcomes = [O("a", 1.0), O("b", 2.0), O("c", 3.0), O("d", 9.0, "censored")]
        scores = BaselineScores({"a": 0.2, "b": 1.0, "c": 0.5, "d": 2.0})
        return incident_percentiles(scores, outcomes)

    def test_span_one_is_flat_global_mean(self):
        pct = self.percentiles()
        curve = auc_curve(pct, grid=[1.0, 2.0, 3.0], span=1.0)
        mean = float(np.mean([c.percentile for c in pct]))
        assert all(v == mean for v in curve.estimate)

    def test_all_ones_gives_one(self):
        outcomes = [O(f"p{i}", float(i + 1)) for i in range(4)]
        scores = BaselineScores({f"p{i}": float(9 - i) for i in range(4)})
        curve = auc_curve(incident_percentiles(scores, outcomes), span=0.5)
        assert all(v == 1.0 for v in curve.estimate)

    def test_single_case_window(self):
        from dynroc.accuracy import CasePercentile, IncidentPercentiles

        pct = IncidentPercentiles(
            percentiles=(
                CasePercentile(1.0, "a", 0.2, 3),
                CasePercentile(2.0, "b", 0.6, 2),
                CasePercentile(3.0, "c", 1.0, 1),
            ),
            skipped_no_controls=0,
        )
        curve = auc_curve(pct, grid=[1.0, 2.0, 3.0], span=1e-9)
        assert curve.estimate == (0.2, 0.6, 1.0)

    def test_estimates_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            outcomes = random_outcome_set(rng, 20)
            if not any(o.is_death for o in outcomes):
                continue
            scores = BaselineScores(random_scores(rng, outcomes))
            pct = incident_percentiles(scores, outcomes)
            if len(pct) == 0:
                continue
            curve = auc_curve(pct, span=0.3)
            assert all(0.0 <= v <= 1.0 for v in curve.estimate)

    def test_default_grid_thinning(self):
        times = np.linspace(0, 10, 1000)
        grid = default_grid(times)
        assert len(grid) <= 200
        assert grid[0] == 0.0 and grid[-1] == 10.0


class TestTpfCurve:
    def test_threshold_higher_rule(self):
        controls = list(range(1, 101))
        assert control_threshold(controls, 0.05) == 95.0

    def test_case_96_beats_threshold(self):
        outcomes = [O("case", 1.0)] + [O(f"c{i}", 2.0, "censored") for i in range(1, 101)]
        scores = {f"c{i}": float(i) for i in range(1, 101)}
        scores["case"] = 96.0
        curve = tpf_at_fpf_curve(BaselineScores(scores), outcomes, fpf=0.05, grid=[1.0], span=1.0)
        assert curve.estimate == (1.0,)

    def test_perfect_marker_all_one(self):
        outcomes = [O(f"p{i}", float(i + 1)) for i in range(6)]
        scores = BaselineScores({f"p{i}": float(20 - i) for i in range(6)})
        for fpf in (0.05, 0.2, 0.5):
            curve = tpf_at_fpf_curve(scores, outcomes, fpf=fpf, span=0.4)
            assert all(v == 1.0 for v in curve.estimate)

    def test_case_below_all_controls_zero(self):
        outcomes = [O("case", 1.0), O("c1", 2.0, "censored"), O("c2", 3.0, "censored")]
        scores = BaselineScores({"case": -5.0, "c1": 0.0, "c2": 1.0})
        curve = tpf_at_fpf_curve(scores, outcomes, fpf=0.05, grid=[1.0], span=1.0)
        assert curve.estimate == (0.0,)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            outcomes = random_outcome_set(rng, int(rng.integers(3, 13)))
            if not any(o.is_death for o in outcomes):
                continue
            scores = random_scores(rng, outcomes)
            expected = brute_tpf_contributions(lambda p, t: scores[p], outcomes, 0.1)
            if not expected:
                continue
            grid = sorted({t for t, _, _ in expected})
            curve = tpf_at_fpf_curve(BaselineScores(scores), outcomes, fpf=0.1,
                                     grid=grid, span=1.0)
            mean = sum(c for _, _, c in expected) / len(expected)
            assert all(v == mean for v in curve.estimate)

    def test_realized_fpf_never_exceeds_nominal(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            controls = rng.normal(size=int(rng.integers(1, 40)))
            for fpf in (0.05, 0.1, 0.25):
                thr = control_threshold(controls, fpf)
                assert (controls > thr).mean() <= fpf + 1e-12

    def test_tpf_le_one_and_one_when_auc_one(self):
        outcomes = [O(f"p{i}", float(i + 1)) for i in range(5)]
        scores = BaselineScores({f"p{i}": float(30 - i) for i in range(5)})
        pct = incident_percentiles(scores, outcomes)
        auc = auc_curve(pct, span=0.4)
        tpf = tpf_at_fpf_curve(scores, outcomes, fpf=0.05, grid=auc.grid, span=0.4)
        assert all(v == 1.0 for v in auc.estimate)
        assert all(v == 1.0 for v in tpf.estimate)


class TestRankInvariance:
    def transforms(self):
        return [
            lambda s: math.exp(s),
            lambda s: 3.7 * s - 2.25,
            lambda s: s**3 + 5 * s,
        ]

    def test_all_outputs_bit_identical(self):
        rng = np.random.default_rng(31)
        for trial in range(25):
            outcomes = random_outcome_set(rng, 25, tie_grid=True)
            if sum(o.is_death for o in outcomes) < 2:
                continue
            raw = random_scores(rng, outcomes, tied=bool(trial % 2))
            base_acc = BaselineScores(raw)
            base_pct = incident_percentiles(base_acc, outcomes)
            if len(base_pct) == 0:
                continue
            base_auc = auc_curve(base_pct, span=0.25)
            base_tpf = tpf_at_fpf_curve(base_acc, outcomes, fpf=0.05, grid=base_auc.grid, span=0.25)
            base_win = windowed_mean_percentiles(base_acc, outcomes, 1.0, 6.0)
            for f in self.transforms():
                acc = BaselineScores({p: f(s) for p, s in raw.items()})
                assert incident_percentiles(acc, outcomes) == base_pct
                assert auc_curve(incident_percentiles(acc, outcomes), span=0.25) == base_auc
                assert tpf_at_fpf_curve(acc, outcomes, fpf=0.05, grid=base_auc.grid, span=0.25) == base_tpf
                assert windowed_mean_percentiles(acc, outcomes, 1.0, 6.0) == base_win


class TestBootstrap:
    def test_degenerate_perfect_marker_bands_collapse(self):
        outcomes = [O(f"p{i}", float(i + 1)) for i in range(8)]
        cohort = outcomes_cohort(outcomes, {f"p{i}": float(50 - i) for i in range(8)})

        def builder(c):
            scores = baseline_marker_scores(c, "fev1pct")
            return auc_curve(incident_percentiles(scores, c.outcomes), grid=[2.0, 4.0], span=1.0)

        curve = bootstrap_bands(builder, cohort, replicates=60, seed=1)
        assert curve.lower == curve.estimate == curve.upper

    def test_same_seed_identical_bands(self):
        cfg = SimConfig(n_patients=60, log_hazard_slope=1.0, baseline_hazard=0.15,
                        admin_horizon=10.0, seed=3)
        cohort = simulate_cohort(cfg)
        grid = [2.0, 5.0]

        def builder(c):
            scores = baseline_marker_scores(c, "fev1pct")
            return auc_curve(incident_percentiles(scores, c.outcomes), grid=grid, span=0.3)

        a = bootstrap_bands(builder, cohort, replicates=80, seed=42)
        b = bootstrap_bands(builder, cohort, replicates=80, seed=42)
        assert a == b
        c = bootstrap_bands(builder, cohort, replicates=80, seed=43)
        assert c != a

    def test_threaded_matches_serial(self):
        cfg = SimConfig(n_patients=40, log_hazard_slope=0.8, baseline_hazard=0.2,
                        admin_horizon=8.0, seed=5)
        cohort = simulate_cohort(cfg)

        def builder(c):
            scores = baseline_marker_scores(c, "fev1pct")
            return auc_curve(incident_percentiles(scores, c.outcomes), grid=[2.0], span=0.5)

        serial = bootstrap_bands(builder, cohort, replicates=60, seed=7, threads=1)
        threaded = bootstrap_bands(builder, cohort, replicates=60, seed=7, threads=4)
        assert serial == threaded

    def test_bands_bracket_estimate(self):
        cfg = SimConfig(n_patients=80, log_hazard_slope=0.6, baseline_hazard=0.15,
                        censor_rate=0.05, admin_horizon=12.0, seed=9)
        cohort = simulate_cohort(cfg)

        def builder(c):
            scores = baseline_marker_scores(c, "fev1pct")
            return auc_curve(incident_percentiles(scores, c.outcomes), grid=[3.0, 6.0], span=0.4)

        curve = bootstrap_bands(builder, cohort, replicates=100, seed=11)
        for lo, est, hi in zip(curve.lower, curve.estimate, curve.upper):
            assert lo <= est <= hi

    def test_replicate_floor(self):
        cohort = outcomes_cohort([O("a", 1.0), O("b", 2.0)], {"a": 1.0, "b": 0.0})
        with pytest.raises(ValueError):
            bootstrap_bands(lambda c: None, cohort, replicates=10)

    def test_null_scores_within_three_bootstrap_se_of_half(self):
        cfg = SimConfig(n_patients=400, log_hazard_slope=0.0, baseline_hazard=0.15,
                        censor_rate=0.02, admin_horizon=15.0, seed=19)
        cohort = simulate_cohort(cfg)
        pct = incident_percentiles(updated_marker_scores(cohort, "fev1pct"), cohort.outcomes)
        times = pct.times()
        grid = list(np.quantile(times, [0.2, 0.4, 0.6, 0.8]))

        def builder(c):
            return auc_curve(incident_percentiles(updated_marker_scores(c, "fev1pct"),
                                                  c.outcomes), grid=grid, span=0.2)

        curve = bootstrap_bands(builder, cohort, replicates=100, level=0.95, seed=4)
        for lo, est, hi in zip(curve.lower, curve.estimate, curve.upper):
            se = (hi - lo) / (2 * 1.96)
            assert abs(est - 0.5) <= 3 * se

    def test_resample_preserves_patient_bundles(self):
        cfg = SimConfig(n_patients=30, log_hazard_slope=0.5, baseline_hazard=0.2,
                        admin_horizon=10.0, seed=2)
        cohort = simulate_cohort(cfg)
        rng = np.random.default_rng(0)
        resampled = resample_cohort(cohort, rng)
        assert resampled.n_patients == cohort.n_patients
        for p in resampled.patients:
            src = source_patient_id(p.patient_id)
            orig = cohort.patient(src)
            assert p.last_followup_time == orig.last_followup_time
            assert resampled.outcome(p.patient_id).time == cohort.outcome(src).time
        series = resampled.marker_series("fev1pct")
        for pid, s in series.items():
            src = source_patient_id(pid)
            assert s.observations == cohort.marker_series("fev1pct")[src].observations


class TestUpdateComparison:
    def fitted_drift_cohort(self, seed=21, n=150):
        cfg = SimConfig(n_patients=n, log_hazard_slope=-0.8, baseline_hazard=0.15,
                        drift_per_year=-0.3, noise_sd=0.5, admin_horizon=10.0, seed=seed)
        cohort = simulate_cohort(cfg)
        return cohort, fit_cox(cohort, base_model())

    def test_identical_policies_all_zero(self):
        cohort, fit = self.fitted_drift_cohort()
        table = compare_update_policies(fit, cohort, interval_a=1.0, interval_b=1.0)
        assert len(table.rows) > 0
        assert all(r.difference == 0.0 for r in table.rows)

    def test_refresh_aligned_windows_exactly_zero(self):
        cohort, fit = self.fitted_drift_cohort(seed=22)
        table = compare_update_policies(fit, cohort, interval_a=1.0, interval_b=2.0, window=1.0)
        aligned = [r for r in table.rows if (r.window_start / 2.0) == round(r.window_start / 2.0)]
        assert len(aligned) > 0
        assert all(r.difference == 0.0 for r in aligned)

    def test_difference_column_is_b_minus_a(self):
        cohort, fit = self.fitted_drift_cohort(seed=23)
        table = compare_update_policies(fit, cohort, interval_a=1.0, interval_b=2.0)
        for r in table.rows:
            assert r.difference == r.policy_b - r.policy_a

    def test_non_multiple_interval_rejected(self):
        cohort, fit = self.fitted_drift_cohort(seed=24)
        with pytest.raises(ValueError, match="multiple"):
            compare_update_policies(fit, cohort, interval_a=1.0, interval_b=1.5)


class TestSubgroups:
    def test_constant_stratifier_single_group_equals_unstratified(self):
        cfg = SimConfig(n_patients=60, log_hazard_slope=1.0, baseline_hazard=0.2,
                        admin_horizon=10.0, seed=13)
        cohort = simulate_cohort(cfg)
        scores = updated_marker_scores(cohort, "fev1pct")
        strat = parse_stratifier("marker_le:-999", "fev1pct")  # everyone is 'gt'
        result = subgroup_curves(cohort, strat, scores, span=0.3)
        assert set(result.curves) == {"gt-999"}
        whole = auc_curve(incident_percentiles(scores, cohort.outcomes), span=0.3)
        assert result.curves["gt-999"] == whole

    def test_duplicated_halves_identical_curves(self):
        outcomes_a = [O(f"a{i}", float(i + 1)) for i in range(6)]
        outcomes_b = [O(f"b{i}", float(i + 1)) for i in range(6)]
        values = {}
        for i in range(6):
            values[f"a{i}"] = float(i % 3)
            values[f"b{i}"] = float(i % 3)
        cohort = outcomes_cohort(outcomes_a + outcomes_b, values)
        # sexes split the halves symmetrically
        from dataclasses import replace

        patients = tuple(
            replace(p, sex="female" if p.patient_id.startswith("a") else "male")
            for p in cohort.patients
        )
        cohort = type(cohort)(patients, cohort.markers, cohort.outcomes)
        scores = baseline_marker_scores(cohort, "fev1pct")
        result = subgroup_curves(cohort, parse_stratifier("sex", "fev1pct"), scores, span=0.5)
        f = result.curves["female"]
        m = result.curves["male"]
        assert f.estimate == m.estimate

    def test_subgroup_without_deaths_reported_unavailable(self):
        outcomes = [O("a1", 1.0), O("a2", 3.0, "censored"), O("b1", 2.0, "censored"),
                    O("b2", 4.0, "censored")]
        values = {"a1": 10.0, "a2": 50.0, "b1": 20.0, "b2": 60.0}
        cohort = outcomes_cohort(outcomes, values)
        from dataclasses import replace

        patients = tuple(
            replace(p, sex="female" if p.patient_id.startswith("a") else "male")
            for p in cohort.patients
        )
        cohort = type(cohort)(patients, cohort.markers, cohort.outcomes)
        scores = baseline_marker_scores(cohort, "fev1pct")
        result = subgroup_curves(cohort, parse_stratifier("sex", "fev1pct"), scores)
        assert "female" in result.curves
        assert "male" in result.unavailable

    def test_risk_sets_formed_within_subgroup(self):
        # female case's percentile must ignore the higher-scored male control
        outcomes = [O("f1", 1.0), O("f2", 5.0, "censored"), O("m1", 9.0, "censored")]
        values = {"f1": 5.0, "f2": 1.0, "m1": 100.0}
        cohort = outcomes_cohort(outcomes, values)
        from dataclasses import replace

        patients = tuple(
            replace(p, sex="female" if p.patient_id.startswith("f") else "male")
            for p in cohort.patients
        )
        cohort = type(cohort)(patients, cohort.markers, cohort.outcomes)
        scores = baseline_marker_scores(cohort, "fev1pct")
        result = subgroup_curves(cohort, parse_stratifier("sex", "fev1pct"), scores, span=1.0)
        assert result.curves["female"].estimate == (1.0,)
