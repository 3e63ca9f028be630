"""Longitudinal registry cohort: CSV ingestion, analysis-cohort rules, LOCF imputation.

Times are fractional years from the cohort baseline. Cohorts are immutable
after construction and safe to share read-only across threads.
"""
from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CohortError, SchemaError

SEXES = ("female", "male")
RACES = ("white", "african_american", "other")
GENOTYPES = ("f508_homozygous", "f508_heterozygous", "other", "missing")
CULTURE_STATUSES = ("yes", "no", "not_cultured")

EVENT_DEATH = "death"
EVENT_CENSORED = "censored"

DEFAULT_MARKER = "fev1pct"
UNDER_AGE_THRESHOLD = 5.5

PATIENT_COLUMNS = (
    "patient_id",
    "baseline_age",
    "sex",
    "race",
    "genotype",
    "weight_pct",
    "height_pct",
    "staph_status",
    "cepacia_status",
    "pancreatic_insufficient",
    "death_time",
    "transplant_time",
    "last_followup_time",
)
RECORD_COLUMNS = ("patient_id", "time", "marker_name", "value")


@dataclass(frozen=True)
class PatientRecord:
    """One registry patient: baseline covariates and follow-up endpoints."""

    patient_id: str
    baseline_age: float
    sex: str
    race: str
    genotype: str
    weight_pct: float | None
    height_pct: float | None
    staph_status: str
    cepacia_status: str
    pancreatic_insufficient: bool | None
    death_time: float | None
    transplant_time: float | None
    last_followup_time: float

    def __post_init__(self):
        if self.baseline_age < 0:
            raise ValueError(f"patient {self.patient_id}: baseline_age must be >= 0")
        if self.sex not in SEXES:
            raise ValueError(f"patient {self.patient_id}: bad sex {self.sex!r}")
        if self.race not in RACES:
            raise ValueError(f"patient {self.patient_id}: bad race {self.race!r}")
        if self.genotype not in GENOTYPES:
            raise ValueError(f"patient {self.patient_id}: bad genotype {self.genotype!r}")
        if self.staph_status not in CULTURE_STATUSES:
            raise ValueError(f"patient {self.patient_id}: bad staph_status {self.staph_status!r}")
        if self.cepacia_status not in CULTURE_STATUSES:
            raise ValueError(f"patient {self.patient_id}: bad cepacia_status {self.cepacia_status!r}")
        if self.last_followup_time < 0:
            raise ValueError(f"patient {self.patient_id}: last_followup_time must be >= 0")
        for name in ("death_time", "transplant_time"):
            value = getattr(self, name)
            if value is not None and value > self.last_followup_time:
                raise ValueError(
                    f"patient {self.patient_id}: {name} {value} exceeds last_followup_time "
                    f"{self.last_followup_time}"
                )
        for name in ("weight_pct", "height_pct"):
            value = getattr(self, name)
            if value is not None and not (0.0 <= value <= 100.0):
                raise ValueError(f"patient {self.patient_id}: {name} must lie in [0, 100]")


@dataclass(frozen=True)
class MarkerSeries:
    """Time-stamped scalar measurements for one patient, LOCF-evaluable at any time.

    ``missing_times`` records scheduled times that preceded the first
    observation when the series came out of :func:`locf_impute`.
    """

    patient_id: str
    marker_name: str
    observations: tuple[tuple[float, float], ...]
    missing_times: tuple[float, ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.observations]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(
                f"patient {self.patient_id}: marker '{self.marker_name}' times must be strictly increasing"
            )

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.observations)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.observations)

    def first_time(self) -> float:
        if not self.observations:
            raise CohortError(f"patient {self.patient_id}: empty marker series '{self.marker_name}'")
        return self.observations[0][0]

    def value_at(self, t: float) -> float | None:
        """Last observed value at time <= t, or None before the first observation."""
        i = bisect_right(self.times, t) - 1
        if i < 0:
            return None
        return self.observations[i][1]


@dataclass(frozen=True)
class SurvivalOutcome:
    """Follow-up time (> 0, years) plus a death/censored indicator."""

    patient_id: str
    time: float
    event: str

    def __post_init__(self):
        if self.time <= 0:
            raise ValueError(f"patient {self.patient_id}: outcome time must be > 0")
        if self.event not in (EVENT_DEATH, EVENT_CENSORED):
            raise ValueError(f"patient {self.patient_id}: bad event {self.event!r}")

    @property
    def is_death(self) -> bool:
        return self.event == EVENT_DEATH


def outcome_from_record(record: PatientRecord) -> SurvivalOutcome:
    """Derive the survival outcome under the transplant-censoring rule.

    Death counts as the event only when no transplant occurred at or before
    it; otherwise the patient is censored at the earlier of transplant and
    last follow-up. A same-day death and transplant is censored (treated as
    post-intervention).
    """
    death = record.death_time
    transplant = record.transplant_time
    if death is not None and (transplant is None or transplant > death):
        return SurvivalOutcome(record.patient_id, death, EVENT_DEATH)
    t = record.last_followup_time
    if transplant is not None:
        t = min(transplant, t)
    return SurvivalOutcome(record.patient_id, t, EVENT_CENSORED)


@dataclass(frozen=True)
class ExclusionCounts:
    total_excluded: int
    excluded_under_age: int


@dataclass(frozen=True)
class LongitudinalCohort:
    """Patients, their marker series, and one survival outcome per patient."""

    patients: tuple[PatientRecord, ...]
    markers: tuple[MarkerSeries, ...]
    outcomes: tuple[SurvivalOutcome, ...]
    analysis_marker: str | None = None
    exclusions: ExclusionCounts | None = None

    def __post_init__(self):
        ids = [p.patient_id for p in self.patients]
        id_set = set(ids)
        if len(id_set) != len(ids):
            raise ValueError("duplicate patient_id in cohort")
        if len(self.outcomes) != len(self.patients):
            raise ValueError("exactly one outcome per patient required")
        for o in self.outcomes:
            if o.patient_id not in id_set:
                raise ValueError(f"outcome for unknown patient {o.patient_id!r}")
        seen = set()
        for m in self.markers:
            if m.patient_id not in id_set:
                raise ValueError(f"marker series for unknown patient {m.patient_id!r}")
            key = (m.patient_id, m.marker_name)
            if key in seen:
                raise ValueError(f"duplicate marker series {key}")
            seen.add(key)
        object.__setattr__(self, "_patient_index", {p.patient_id: p for p in self.patients})
        object.__setattr__(self, "_outcome_index", {o.patient_id: o for o in self.outcomes})

    @property
    def n_patients(self) -> int:
        return len(self.patients)

    @property
    def patient_ids(self) -> tuple[str, ...]:
        return tuple(p.patient_id for p in self.patients)

    def patient(self, patient_id: str) -> PatientRecord:
        return self._patient_index[patient_id]

    def outcome(self, patient_id: str) -> SurvivalOutcome:
        return self._outcome_index[patient_id]

    def marker_series(self, marker_name: str) -> dict[str, MarkerSeries]:
        return {m.patient_id: m for m in self.markers if m.marker_name == marker_name}

    def marker_names(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for m in self.markers:
            seen.setdefault(m.marker_name, None)
        return tuple(seen)

    def baseline_value(self, marker_name: str, patient_id: str) -> float | None:
        series = self.marker_series(marker_name).get(patient_id)
        if series is None:
            return None
        return series.value_at(0.0)

    def subset(self, patient_ids: Iterable[str]) -> "LongitudinalCohort":
        """Cohort restricted to the given patients, preserving order."""
        keep = set(patient_ids)
        return LongitudinalCohort(
            patients=tuple(p for p in self.patients if p.patient_id in keep),
            markers=tuple(m for m in self.markers if m.patient_id in keep),
            outcomes=tuple(o for o in self.outcomes if o.patient_id in keep),
            analysis_marker=self.analysis_marker,
        )

    def max_followup(self) -> float:
        return max(o.time for o in self.outcomes)


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_float(raw: str, *, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise SchemaError(f"{where}: could not parse number {raw!r}") from None


def _parse_optional_float(raw: str, *, where: str) -> float | None:
    if raw == "":
        return None
    return _parse_float(raw, where=where)


def _parse_enum(raw: str, allowed: Sequence[str], *, where: str) -> str:
    if raw not in allowed:
        raise SchemaError(f"{where}: expected one of {allowed}, got {raw!r}")
    return raw


def _parse_optional_bool(raw: str, *, where: str) -> bool | None:
    if raw == "":
        return None
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise SchemaError(f"{where}: expected 'true', 'false' or empty, got {raw!r}")


def _check_header(actual: Sequence[str] | None, expected: Sequence[str], path: Path) -> None:
    if actual is None:
        raise SchemaError(f"{path.name}: file is empty")
    unknown = [c for c in actual if c not in expected]
    missing = [c for c in expected if c not in actual]
    if unknown:
        raise SchemaError(f"{path.name}: unknown column(s) {unknown}")
    if missing:
        raise SchemaError(f"{path.name}: missing column(s) {missing}")


def load_cohort(patients_path: str | Path, records_path: str | Path) -> LongitudinalCohort:
    """Parse the patients/records CSV pair into a cohort. No imputation is done.

    Malformed rows raise :class:`SchemaError` naming the file and row number
    (header is row 1). Outcomes are derived from the endpoint columns under
    the transplant-censoring rule.
    """
    patients_path = Path(patients_path)
    records_path = Path(records_path)
    for p in (patients_path, records_path):
        if not p.exists():
            raise SchemaError(f"input file not found: {p}")

    patients: list[PatientRecord] = []
    with open(patients_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, PATIENT_COLUMNS, patients_path)
        seen_ids: set[str] = set()
        for rownum, row in enumerate(reader, start=2):
            where = f"{patients_path.name} row {rownum}"
            if None in row or any(v is None for v in row.values()):
                raise SchemaError(f"{where}: wrong number of fields")
            pid = row["patient_id"]
            if not pid:
                raise SchemaError(f"{where}: empty patient_id")
            if pid in seen_ids:
                raise SchemaError(f"{where}: duplicate patient_id {pid!r}")
            seen_ids.add(pid)
            try:
                record = PatientRecord(
                    patient_id=pid,
                    baseline_age=_parse_float(row["baseline_age"], where=f"{where}: baseline_age"),
                    sex=_parse_enum(row["sex"], SEXES, where=f"{where}: sex"),
                    race=_parse_enum(row["race"], RACES, where=f"{where}: race"),
                    genotype=_parse_enum(
                        row["genotype"] or "missing", GENOTYPES, where=f"{where}: genotype"
                    ),
                    weight_pct=_parse_optional_float(row["weight_pct"], where=f"{where}: weight_pct"),
                    height_pct=_parse_optional_float(row["height_pct"], where=f"{where}: height_pct"),
                    staph_status=_parse_enum(
                        row["staph_status"], CULTURE_STATUSES, where=f"{where}: staph_status"
                    ),
                    cepacia_status=_parse_enum(
                        row["cepacia_status"], CULTURE_STATUSES, where=f"{where}: cepacia_status"
                    ),
                    pancreatic_insufficient=_parse_optional_bool(
                        row["pancreatic_insufficient"], where=f"{where}: pancreatic_insufficient"
                    ),
                    death_time=_parse_optional_float(row["death_time"], where=f"{where}: death_time"),
                    transplant_time=_parse_optional_float(
                        row["transplant_time"], where=f"{where}: transplant_time"
                    ),
                    last_followup_time=_parse_float(
                        row["last_followup_time"], where=f"{where}: last_followup_time"
                    ),
                )
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from None
            patients.append(record)

    id_set = {p.patient_id for p in patients}
    series_obs: dict[tuple[str, str], list[tuple[float, float, int]]] = {}
    series_order: list[tuple[str, str]] = []
    with open(records_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, RECORD_COLUMNS, records_path)
        for rownum, row in enumerate(reader, start=2):
            where = f"{records_path.name} row {rownum}"
            if None in row or any(v is None for v in row.values()):
                raise SchemaError(f"{where}: wrong number of fields")
            pid = row["patient_id"]
            if pid not in id_set:
                raise SchemaError(f"{where}: unknown patient_id {pid!r}")
            marker = row["marker_name"]
            if not marker:
                raise SchemaError(f"{where}: empty marker_name")
            t = _parse_float(row["time"], where=f"{where}: time")
            if t < 0:
                raise SchemaError(f"{where}: time must be >= 0, got {t}")
            if row["value"] == "":
                # scheduled-but-missing measurement; LOCF works off observed points only
                continue
            value = _parse_float(row["value"], where=f"{where}: value")
            key = (pid, marker)
            if key not in series_obs:
                series_obs[key] = []
                series_order.append(key)
            series_obs[key].append((t, value, rownum))

    markers: list[MarkerSeries] = []
    for key in series_order:
        pid, marker = key
        obs = sorted(series_obs[key])
        for (t1, _, r1), (t2, _, r2) in zip(obs, obs[1:]):
            if t1 == t2:
                raise SchemaError(
                    f"{records_path.name} rows {r1} and {r2}: duplicate time {t1} for "
                    f"patient {pid!r} marker {marker!r}"
                )
        markers.append(MarkerSeries(pid, marker, tuple((t, v) for t, v, _ in obs)))

    try:
        outcomes = tuple(outcome_from_record(p) for p in patients)
    except ValueError as exc:
        raise SchemaError(f"{patients_path.name}: {exc}") from None
    return LongitudinalCohort(patients=tuple(patients), markers=tuple(markers), outcomes=outcomes)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_cohort(cohort: LongitudinalCohort, patients_path: str | Path, records_path: str | Path) -> None:
    """Write the registry CSV pair. Inverse of :func:`load_cohort` (round-trip stable)."""
    with open(patients_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATIENT_COLUMNS)
        for p in cohort.patients:
            writer.writerow(
                [
                    p.patient_id,
                    _fmt(float(p.baseline_age)),
                    p.sex,
                    p.race,
                    p.genotype,
                    _fmt(p.weight_pct if p.weight_pct is None else float(p.weight_pct)),
                    _fmt(p.height_pct if p.height_pct is None else float(p.height_pct)),
                    p.staph_status,
                    p.cepacia_status,
                    _fmt(p.pancreatic_insufficient),
                    _fmt(p.death_time if p.death_time is None else float(p.death_time)),
                    _fmt(p.transplant_time if p.transplant_time is None else float(p.transplant_time)),
                    _fmt(float(p.last_followup_time)),
                ]
            )
    with open(records_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for m in cohort.markers:
            for t, v in m.observations:
                writer.writerow([m.patient_id, _fmt(float(t)), m.marker_name, _fmt(float(v))])


# ---------------------------------------------------------------------------
# Analysis-cohort construction and imputation


def build_analysis_cohort(cohort: LongitudinalCohort, marker_name: str) -> LongitudinalCohort:
    """Drop patients without a time-0 value of ``marker_name``; count exclusions.

    Patients whose first marker observation falls after time 0 are excluded,
    not back-filled. The under-age exclusion count (baseline age < 5.5 years)
    is tracked separately for reporting parity.
    """
    series = cohort.marker_series(marker_name)
    keep: list[str] = []
    excluded = 0
    excluded_under_age = 0
    for p in cohort.patients:
        s = series.get(p.patient_id)
        if s is not None and s.value_at(0.0) is not None:
            keep.append(p.patient_id)
        else:
            excluded += 1
            if p.baseline_age < UNDER_AGE_THRESHOLD:
                excluded_under_age += 1
    if not keep:
        raise CohortError(f"no patient has a baseline value of marker '{marker_name}'")
    trimmed = cohort.subset(keep)
    return replace(
        trimmed,
        analysis_marker=marker_name,
        exclusions=ExclusionCounts(total_excluded=excluded, excluded_under_age=excluded_under_age),
    )


def locf_impute(series: MarkerSeries, schedule: Sequence[float]) -> MarkerSeries:
    """Evaluate the series at each scheduled time by last observation carried forward.

    Scheduled times before the first observation are flagged in
    ``missing_times`` rather than back-filled. Idempotent for a fixed schedule.
    """
    if not series.observations:
        raise CohortError(f"patient {series.patient_id}: empty marker series '{series.marker_name}'")
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    imputed: list[tuple[float, float]] = []
    missing: list[float] = []
    for t in schedule:
        value = series.value_at(t)
        if value is None:
            missing.append(t)
        else:
            imputed.append((t, value))
    return MarkerSeries(
        patient_id=series.patient_id,
        marker_name=series.marker_name,
        observations=tuple(imputed),
        missing_times=tuple(missing),
    )


def annual_schedule(horizon: float, interval: float = 1.0) -> tuple[float, ...]:
    """Times 0, interval, 2*interval, ... up to and including the horizon."""
    if interval <= 0:
        raise ValueError("interval must be positive")
    out: list[float] = []
    k = 0
    while k * interval <= horizon + 1e-9:
        out.append(k * interval)
        k += 1
    return tuple(out)
