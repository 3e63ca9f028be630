"""Time-varying prognostic accuracy from incident cases and dynamic controls.

At every death time the risk set is split into the subjects dying exactly
then (cases) and those surviving beyond it (controls). Each case receives
the percentile of its score among the control scores (mid-rank for ties);
the accuracy curve is the nearest-neighbor local average of those case
percentiles over time. Sensitivity at a fixed false-positive fraction is
computed the same way from per-case 0/1 exceedance of the control-score
quantile threshold.

Everything here consumes score ranks only: any strictly increasing
transform of the scores leaves all outputs bit-identical.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .cohort import LongitudinalCohort, MarkerSeries, SurvivalOutcome
from .cox import ScoreSeries
from .errors import EvaluationError

DEFAULT_SPAN = 0.10
DEFAULT_FPF = 0.05
MAX_GRID_POINTS = 200

KIND_AUC = "auc"
KIND_TPF = "tpf_at_fpf"

_RESAMPLE_TAG = "#b"


# ---------------------------------------------------------------------------
# Score accessors


def source_patient_id(patient_id: str) -> str:
    """Strip the duplicate tag added by :func:`resample_cohort`."""
    idx = patient_id.find(_RESAMPLE_TAG)
    return patient_id if idx < 0 else patient_id[:idx]


class BaselineScores:
    """Constant-in-time scores, one per patient."""

    def __init__(self, scores: Mapping[str, float]):
        self._ids = list(scores)
        self._values = np.array([scores[pid] for pid in self._ids], dtype=float)
        self._index = {pid: i for i, pid in enumerate(self._ids)}

    def index_of(self, patient_ids: Sequence[str]) -> np.ndarray:
        idx = np.empty(len(patient_ids), dtype=int)
        for i, pid in enumerate(patient_ids):
            j = self._index.get(pid)
            if j is None:
                j = self._index.get(source_patient_id(pid))
            if j is None:
                raise EvaluationError(f"no score available for patient {pid!r}")
            idx[i] = j
        return idx

    def values(self, index: np.ndarray, t: float) -> np.ndarray:
        return self._values[index]


class UpdatedScores:
    """Last-measured-value scores: step functions evaluated by LOCF at any time.

    Series are stored as one padded (n, max_len) matrix so a lookup at time t
    is a vectorized column pick even when patients follow different schedules.
    """

    def __init__(self, series: Iterable[ScoreSeries | MarkerSeries]):
        series = list(series)
        if not series:
            raise EvaluationError("UpdatedScores needs at least one series")
        self._ids = [s.patient_id for s in series]
        self._index = {pid: i for i, pid in enumerate(self._ids)}
        width = max(len(s.times) for s in series)
        if width == 0:
            raise EvaluationError("UpdatedScores needs nonempty series")
        self._times = np.full((len(series), width), np.inf)
        self._values = np.full((len(series), width), np.nan)
        for i, s in enumerate(series):
            k = len(s.times)
            self._times[i, :k] = s.times
            self._values[i, :k] = s.values

    def index_of(self, patient_ids: Sequence[str]) -> np.ndarray:
        idx = np.empty(len(patient_ids), dtype=int)
        for i, pid in enumerate(patient_ids):
            j = self._index.get(pid)
            if j is None:
                j = self._index.get(source_patient_id(pid))
            if j is None:
                raise EvaluationError(f"no score series for patient {pid!r}")
            idx[i] = j
        return idx

    def values(self, index: np.ndarray, t: float) -> np.ndarray:
        counts = (self._times[index] <= t).sum(axis=1)
        if (counts == 0).any():
            offender = self._ids[int(index[int(np.argmin(counts))])]
            raise EvaluationError(f"patient {offender}: no score measured at or before t={t}")
        return self._values[index, counts - 1]


def baseline_marker_scores(cohort: LongitudinalCohort, marker_name: str) -> BaselineScores:
    """The raw baseline marker value used directly as a risk score."""
    out = {}
    for pid, series in cohort.marker_series(marker_name).items():
        v = series.value_at(0.0)
        if v is not None:
            out[pid] = v
    if not out:
        raise EvaluationError(f"no baseline values of marker '{marker_name}'")
    return BaselineScores(out)


def updated_marker_scores(cohort: LongitudinalCohort, marker_name: str) -> UpdatedScores:
    """The raw marker trajectory used directly as a time-varying risk score."""
    series = list(cohort.marker_series(marker_name).values())
    if not series:
        raise EvaluationError(f"no series of marker '{marker_name}' in cohort")
    return UpdatedScores(series)


# ---------------------------------------------------------------------------
# Incident percentiles


@dataclass(frozen=True)
class CasePercentile:
    """Concordance of one incident case against its risk-set controls."""

    time: float
    patient_id: str
    percentile: float
    n_controls: int


@dataclass(frozen=True)
class IncidentPercentiles:
    """Per-case percentiles, sorted by (time, patient_id), plus skip diagnostics."""

    percentiles: tuple[CasePercentile, ...]
    skipped_no_controls: int

    def __iter__(self):
        return iter(self.percentiles)

    def __len__(self):
        return len(self.percentiles)

    def times(self) -> np.ndarray:
        return np.array([c.time for c in self.percentiles])

    def values(self) -> np.ndarray:
        return np.array([c.percentile for c in self.percentiles])


def case_percentile(case_score: float, control_scores: Sequence[float]) -> float:
    """Fraction of controls scored below the case, counting ties at half weight."""
    controls = np.asarray(control_scores, dtype=float)
    if controls.size == 0:
        raise EvaluationError("case_percentile requires at least one control")
    less = int(np.count_nonzero(controls < case_score))
    equal = int(np.count_nonzero(controls == case_score))
    return (less + 0.5 * equal) / controls.size


def _sorted_outcome_arrays(outcomes: Sequence[SurvivalOutcome]):
    ordered = sorted(outcomes, key=lambda o: (o.time, o.patient_id))
    times = np.array([o.time for o in ordered])
    is_death = np.array([o.is_death for o in ordered])
    pids = [o.patient_id for o in ordered]
    return ordered, times, is_death, pids


def _per_case(scores, outcomes, contribution: Callable[[np.ndarray, np.ndarray], np.ndarray]):
    records: list[tuple[float, str, float, int]] = []
    _, times, is_death, pids = _sorted_outcome_arrays(outcomes)
    index = scores.index_of(pids)
    skipped = 0
    for t in np.unique(times[is_death]):
        start = int(np.searchsorted(times, t, side="right"))
        case_pos = np.nonzero((times == t) & is_death)[0]
        if start >= times.size:
            skipped += case_pos.size
            continue
        sel = np.concatenate([index[case_pos], index[start:]])
        vals = scores.values(sel, float(t))
        case_vals = vals[: case_pos.size]
        ctrl_sorted = np.sort(vals[case_pos.size :])
        contrib = contribution(case_vals, ctrl_sorted)
        for p, c in zip(case_pos, contrib):
            records.append((float(t), pids[p], float(c), ctrl_sorted.size))
    return records, skipped


def _percentile_contribution(case_vals: np.ndarray, ctrl_sorted: np.ndarray) -> np.ndarray:
    less = np.searchsorted(ctrl_sorted, case_vals, side="left")
    upto = np.searchsorted(ctrl_sorted, case_vals, side="right")
    return (less + 0.5 * (upto - less)) / ctrl_sorted.size


def incident_percentiles(scores, outcomes: Sequence[SurvivalOutcome]) -> IncidentPercentiles:
    """One percentile per death; tied same-time cases are each compared against
    the controls only. Cases whose risk set has no controls are skipped and counted."""
    records, skipped = _per_case(scores, outcomes, _percentile_contribution)
    return IncidentPercentiles(
        percentiles=tuple(CasePercentile(t, pid, c, n) for t, pid, c, n in records),
        skipped_no_controls=skipped,
    )


# ---------------------------------------------------------------------------
# Curves


@dataclass(frozen=True)
class AccuracyCurve:
    """Point estimates of AUC(t) or TPF(t) on a time grid, with optional bands."""

    grid: tuple[float, ...]
    estimate: tuple[float, ...]
    lower: tuple[float, ...] | None
    upper: tuple[float, ...] | None
    kind: str
    span: float
    fpf: float | None = None

    def __post_init__(self):
        if self.kind not in (KIND_AUC, KIND_TPF):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if any(not (0.0 <= v <= 1.0) for v in self.estimate):
            raise ValueError("curve estimates must lie in [0, 1]")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("lower and upper bands must be given together")
        if self.lower is not None:
            for lo, est, hi in zip(self.lower, self.estimate, self.upper):
                if not (lo <= est <= hi):
                    raise ValueError("bands must bracket the estimate pointwise")

    @property
    def has_bands(self) -> bool:
        return self.lower is not None


def default_grid(times: Sequence[float], max_points: int = MAX_GRID_POINTS) -> tuple[float, ...]:
    """Observed death times, thinned evenly to at most ``max_points``."""
    unique = np.unique(np.asarray(times, dtype=float))
    if unique.size == 0:
        raise EvaluationError("no event times to build a grid from")
    if unique.size <= max_points:
        return tuple(float(t) for t in unique)
    pick = np.unique(np.linspace(0, unique.size - 1, max_points).round().astype(int))
    return tuple(float(t) for t in unique[pick])


def _window_average(
    case_times: np.ndarray, case_values: np.ndarray, grid: Sequence[float], span: float
) -> np.ndarray:
    if not (0.0 < span <= 1.0):
        raise ValueError("span must lie in (0, 1]")
    n = case_times.size
    if n == 0:
        raise EvaluationError("no evaluable cases")
    k = min(n, max(1, math.ceil(span * n)))
    out = np.empty(len(grid))
    for i, t in enumerate(grid):
        order = np.argsort(np.abs(case_times - t), kind="stable")
        out[i] = case_values[order[:k]].mean()
    return out


def auc_curve(
    percentiles: IncidentPercentiles | Iterable[CasePercentile],
    grid: Sequence[float] | None = None,
    span: float = DEFAULT_SPAN,
) -> AccuracyCurve:
    """Local average of case percentiles over the nearest ceil(span * n_cases)
    cases by |death time - t|, truncated at the data boundaries."""
    cases = sorted(percentiles, key=lambda c: (c.time, c.patient_id))
    if not cases:
        raise EvaluationError("no case percentiles to smooth")
    times = np.array([c.time for c in cases])
    values = np.array([c.percentile for c in cases])
    if grid is None:
        grid = default_grid(times)
    est = _window_average(times, values, grid, span)
    return AccuracyCurve(
        grid=tuple(float(t) for t in grid),
        estimate=tuple(float(v) for v in est),
        lower=None,
        upper=None,
        kind=KIND_AUC,
        span=span,
    )


def control_threshold(control_scores: Sequence[float], fpf: float) -> float:
    """Smallest control score with at least a (1 - fpf) fraction of controls at
    or below it ("higher" empirical quantile), so the realized FPF never
    exceeds the nominal one."""
    if not (0.0 < fpf < 1.0):
        raise ValueError("fpf must lie in (0, 1)")
    ctrl = np.sort(np.asarray(control_scores, dtype=float))
    if ctrl.size == 0:
        raise EvaluationError("control_threshold requires at least one control")
    k = math.ceil(ctrl.size * (1.0 - fpf) - 1e-9)
    k = min(max(k, 1), ctrl.size)
    return float(ctrl[k - 1])


def tpf_at_fpf_curve(
    scores,
    outcomes: Sequence[SurvivalOutcome],
    fpf: float = DEFAULT_FPF,
    grid: Sequence[float] | None = None,
    span: float = DEFAULT_SPAN,
) -> AccuracyCurve:
    """Sensitivity at a fixed false-positive fraction, smoothed like the AUC curve.

    Each case contributes 1 if its score exceeds the (1 - fpf) control-score
    quantile of its own risk set, 0.5 on a tie with the threshold, else 0.
    """
    if not (0.0 < fpf < 1.0):
        raise ValueError("fpf must lie in (0, 1)")

    def contribution(case_vals: np.ndarray, ctrl_sorted: np.ndarray) -> np.ndarray:
        k = math.ceil(ctrl_sorted.size * (1.0 - fpf) - 1e-9)
        k = min(max(k, 1), ctrl_sorted.size)
        threshold = ctrl_sorted[k - 1]
        return np.where(
            case_vals > threshold, 1.0, np.where(case_vals == threshold, 0.5, 0.0)
        )

    records, _ = _per_case(scores, outcomes, contribution)
    if not records:
        raise EvaluationError("no evaluable cases")
    times = np.array([r[0] for r in records])
    values = np.array([r[2] for r in records])
    if grid is None:
        grid = default_grid(times)
    est = _window_average(times, values, grid, span)
    return AccuracyCurve(
        grid=tuple(float(t) for t in grid),
        estimate=tuple(float(v) for v in est),
        lower=None,
        upper=None,
        kind=KIND_TPF,
        span=span,
        fpf=fpf,
    )


# ---------------------------------------------------------------------------
# Cluster bootstrap


def resample_cohort(cohort: LongitudinalCohort, rng: np.random.Generator) -> LongitudinalCohort:
    """Patient-level resample with replacement; all of a patient's data moves
    together. Repeated draws get a '#b<k>' id suffix to keep ids unique."""
    n = cohort.n_patients
    draws = rng.integers(0, n, size=n)
    counts: dict[str, int] = {}
    patients = []
    markers = []
    outcomes = []
    marker_by_pid: dict[str, list[MarkerSeries]] = {}
    for m in cohort.markers:
        marker_by_pid.setdefault(m.patient_id, []).append(m)
    from dataclasses import replace as _replace

    for d in draws:
        p = cohort.patients[int(d)]
        pid = p.patient_id
        k = counts.get(pid, 0)
        counts[pid] = k + 1
        new_id = pid if k == 0 else f"{pid}{_RESAMPLE_TAG}{k}"
        patients.append(p if k == 0 else _replace(p, patient_id=new_id))
        o = cohort.outcome(pid)
        outcomes.append(o if k == 0 else _replace(o, patient_id=new_id))
        for m in marker_by_pid.get(pid, ()):
            markers.append(m if k == 0 else _replace(m, patient_id=new_id))
    return LongitudinalCohort(
        patients=tuple(patients),
        markers=tuple(markers),
        outcomes=tuple(outcomes),
        analysis_marker=cohort.analysis_marker,
    )


def bootstrap_bands(
    curve_builder: Callable[[LongitudinalCohort], AccuracyCurve],
    cohort: LongitudinalCohort,
    replicates: int = 500,
    level: float = 0.95,
    seed: int = 0,
    threads: int = 1,
) -> AccuracyCurve:
    """Pointwise percentile bands from a patient-level (cluster) bootstrap.

    Replicates draw from per-replicate substreams of the seed, so the result
    does not depend on execution order. A replicate without any death is
    redrawn up to 10 times before giving up. Bands are widened to include the
    point estimate where the percentile interval would not.
    """
    if replicates < 50:
        raise ValueError("replicates must be >= 50")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    base = curve_builder(cohort)
    grid = base.grid

    def one_replicate(r: int) -> np.ndarray:
        rng = np.random.default_rng([seed, r])
        for _ in range(10):
            resampled = resample_cohort(cohort, rng)
            if not any(o.is_death for o in resampled.outcomes):
                continue
            curve = curve_builder(resampled)
            if curve.grid != grid:
                raise EvaluationError("curve_builder must evaluate on a fixed grid")
            return np.asarray(curve.estimate)
        raise EvaluationError(f"bootstrap replicate {r}: no deaths after 10 redraws")

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_replicate, range(replicates)))
    else:
        rows = [one_replicate(r) for r in range(replicates)]
    matrix = np.vstack(rows)
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(matrix, alpha, axis=0)
    upper = np.quantile(matrix, 1.0 - alpha, axis=0)
    est = np.asarray(base.estimate)
    lower = np.minimum(lower, est)
    upper = np.maximum(upper, est)
    return AccuracyCurve(
        grid=grid,
        estimate=base.estimate,
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        kind=base.kind,
        span=base.span,
        fpf=base.fpf,
    )


# ---------------------------------------------------------------------------
# Update-frequency comparison


@dataclass(frozen=True)
class UpdateComparisonRow:
    window_start: float
    window_end: float
    policy_a: float
    policy_b: float
    difference: float


@dataclass(frozen=True)
class UpdateComparisonTable:
    """Windowed mean case percentiles under two refresh policies; difference = b - a."""

    rows: tuple[UpdateComparisonRow, ...]
    interval_a: float
    interval_b: float

    def differences(self) -> np.ndarray:
        return np.array([r.difference for r in self.rows])


def windowed_mean_percentiles(
    scores, outcomes: Sequence[SurvivalOutcome], window: float, horizon: float
) -> list[tuple[float, float, float | None]]:
    """Mean case percentile per consecutive window [k*w, (k+1)*w); None when
    the window holds no evaluable case."""
    pct = incident_percentiles(scores, outcomes)
    times = pct.times()
    values = pct.values()
    out = []
    start = 0.0
    while start < horizon - 1e-12:
        end = start + window
        mask = (times >= start) & (times < end)
        mean = float(values[mask].mean()) if mask.any() else None
        out.append((start, end, mean))
        start = end
    return out


def _marker_spacing(cohort: LongitudinalCohort, marker_name: str) -> float | None:
    gaps = []
    for series in cohort.marker_series(marker_name).values():
        times = series.times
        gaps.extend(b - a for a, b in zip(times, times[1:]))
    return min(gaps) if gaps else None


def marker_policy_scores(
    cohort: LongitudinalCohort, marker_name: str, interval: float, horizon: float
) -> UpdatedScores:
    """The raw marker refreshed every ``interval`` years, LOCF between refreshes."""
    from .cohort import annual_schedule
    from .cox import ScoreSeries

    schedule = annual_schedule(horizon, interval)
    series = []
    for pid, s in cohort.marker_series(marker_name).items():
        obs = []
        for t in schedule:
            v = s.value_at(t)
            if v is not None:
                obs.append((t, v))
        if obs:
            series.append(ScoreSeries(pid, tuple(obs)))
    return UpdatedScores(series)


def compare_update_policies(
    fit,
    cohort: LongitudinalCohort,
    interval_a: float = 1.0,
    interval_b: float = 2.0,
    window: float = 1.0,
    marker_name: str | None = None,
) -> UpdateComparisonTable:
    """Windowed AUC with the marker refreshed every ``interval_a`` versus every
    ``interval_b`` years (LOCF between refreshes). In windows whose scores are
    refreshed identically under both policies the difference is exactly zero.

    With ``fit=None`` the raw marker itself (named by ``marker_name``) is the
    score; otherwise the fit's linear predictor is recomputed at each refresh.
    """
    from .cohort import annual_schedule
    from .cox import time_varying_scores

    for interval in (interval_a, interval_b):
        if interval <= 0:
            raise ValueError("update intervals must be positive")
    if fit is None and marker_name is None:
        raise ValueError("compare_update_policies needs a fit or a marker_name")
    marker = fit.spec.marker_name if fit is not None else marker_name
    spacing = _marker_spacing(cohort, marker)
    if spacing is not None and spacing > 0:
        for interval in (interval_a, interval_b):
            ratio = interval / spacing
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(
                    f"update interval {interval} is not a multiple of the marker "
                    f"schedule spacing {spacing}"
                )
    if window <= 0:
        raise ValueError("window must be positive")
    horizon = cohort.max_followup()
    if fit is None:
        scores_a = marker_policy_scores(cohort, marker, interval_a, horizon)
        scores_b = marker_policy_scores(cohort, marker, interval_b, horizon)
    else:
        scores_a = UpdatedScores(
            time_varying_scores(fit, cohort, annual_schedule(horizon, interval_a))
        )
        scores_b = UpdatedScores(
            time_varying_scores(fit, cohort, annual_schedule(horizon, interval_b))
        )
    means_a = windowed_mean_percentiles(scores_a, cohort.outcomes, window, horizon)
    means_b = windowed_mean_percentiles(scores_b, cohort.outcomes, window, horizon)
    rows = []
    for (s, e, a), (_, _, b) in zip(means_a, means_b):
        if a is None or b is None:
            continue
        rows.append(
            UpdateComparisonRow(
                window_start=s, window_end=e, policy_a=a, policy_b=b, difference=b - a
            )
        )
    return UpdateComparisonTable(rows=tuple(rows), interval_a=interval_a, interval_b=interval_b)


# ---------------------------------------------------------------------------
# Subgroups


@dataclass(frozen=True)
class SubgroupCurves:
    """Per-stratum accuracy curves; strata without evaluable deaths land in
    ``unavailable`` with a reason instead of a curve."""

    curves: dict[str, AccuracyCurve]
    unavailable: dict[str, str]


def subgroup_curves(
    cohort: LongitudinalCohort,
    stratifier,
    scores,
    grid: Sequence[float] | None = None,
    span: float = DEFAULT_SPAN,
) -> SubgroupCurves:
    """AUC curves computed independently within each stratum: risk sets are
    formed from the stratum's own outcomes only."""
    from .subgroups import split_cohort

    parts = split_cohort(cohort, stratifier)
    curves: dict[str, AccuracyCurve] = {}
    unavailable: dict[str, str] = {}
    for label, sub in parts.items():
        if not any(o.is_death for o in sub.outcomes):
            unavailable[label] = "no deaths in subgroup"
            continue
        pct = incident_percentiles(scores, sub.outcomes)
        if len(pct) == 0:
            unavailable[label] = "no evaluable cases (all risk sets lacked controls)"
            continue
        curves[label] = auc_curve(pct, grid=grid, span=span)
    return SubgroupCurves(curves=curves, unavailable=unavailable)


# ---------------------------------------------------------------------------
# Serialization


def write_accuracy_csv(curve: AccuracyCurve, path: str | Path) -> None:
    """CSV columns: time,estimate,lower,upper (band cells empty without bands)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "estimate", "lower", "upper"])
        for i, t in enumerate(curve.grid):
            lower = repr(float(curve.lower[i])) if curve.lower is not None else ""
            upper = repr(float(curve.upper[i])) if curve.upper is not None else ""
            writer.writerow([repr(float(t)), repr(float(curve.estimate[i])), lower, upper])


def read_accuracy_csv(path: str | Path) -> dict[str, np.ndarray | None]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    time = np.array([float(r["time"]) for r in rows])
    estimate = np.array([float(r["estimate"]) for r in rows])
    has_bands = rows and rows[0]["lower"] != ""
    lower = np.array([float(r["lower"]) for r in rows]) if has_bands else None
    upper = np.array([float(r["upper"]) for r in rows]) if has_bands else None
    return {"time": time, "estimate": estimate, "lower": lower, "upper": upper}


def write_update_comparison_csv(table: UpdateComparisonTable, path: str | Path) -> None:
    """CSV columns: window_start,window_end,policy_a,policy_b,difference."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", "window_end", "policy_a", "policy_b", "difference"])
        for r in table.rows:
            writer.writerow(
                [
                    repr(float(r.window_start)),
                    repr(float(r.window_end)),
                    repr(float(r.policy_a)),
                    repr(float(r.policy_b)),
                    repr(float(r.difference)),
                ]
            )
