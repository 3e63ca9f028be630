"""Risk sets and Kaplan-Meier estimation over survival outcomes.

All functions are pure and thread-safe on immutable outcome collections.
Tie convention: deaths at a time t precede censorings at t, so subjects
censored exactly at t remain in the product-limit risk set at t but belong
to neither the case nor the control side of the classification risk set.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cohort import SurvivalOutcome
from .errors import CohortError


@dataclass(frozen=True)
class RiskSet:
    """Binary classification of the risk set at one time: incident cases vs dynamic controls."""

    time: float
    case_ids: tuple[str, ...]
    control_ids: tuple[str, ...]


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous survival step function; value before the first time is 1."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    se: tuple[float, ...] | None = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("step curve times must be strictly increasing")
        if any(v2 > v1 for v1, v2 in zip(self.values, self.values[1:])):
            raise ValueError("survival values must be non-increasing")
        if any(not (0.0 <= v <= 1.0) for v in self.values):
            raise ValueError("survival values must lie in [0, 1]")

    def survival_at(self, t: float) -> float:
        value = 1.0
        for time, v in zip(self.times, self.values):
            if time <= t:
                value = v
            else:
                break
        return value


def risk_set_at(outcomes: Iterable[SurvivalOutcome], t: float) -> RiskSet:
    """Cases die exactly at t; controls have outcome time strictly beyond t.

    Subjects censored exactly at t belong to neither side.
    """
    if t <= 0:
        raise ValueError("risk-set time must be > 0")
    cases = sorted(o.patient_id for o in outcomes if o.is_death and o.time == t)
    controls = sorted(o.patient_id for o in outcomes if o.time > t)
    return RiskSet(time=t, case_ids=tuple(cases), control_ids=tuple(controls))


def event_times(outcomes: Iterable[SurvivalOutcome]) -> np.ndarray:
    """Sorted unique death times."""
    return np.unique([o.time for o in outcomes if o.is_death])


def kaplan_meier(outcomes: Sequence[SurvivalOutcome]) -> StepCurve:
    """Product-limit estimate with Greenwood standard errors.

    Censorings tied with deaths count as at risk at that time. The survival
    factor at each death time is computed as (n_i - d_i) / n_i so that the
    hand-checkable fixtures come out as exact rationals.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise CohortError("kaplan_meier requires a nonempty outcome collection")
    all_times = np.sort(np.asarray([o.time for o in outcomes], dtype=float))
    death_times = event_times(outcomes)
    if death_times.size == 0:
        return StepCurve(times=(), values=(), se=())
    deaths = np.sort(np.asarray([o.time for o in outcomes if o.is_death], dtype=float))

    values: list[float] = []
    ses: list[float] = []
    surv = 1.0
    greenwood = 0.0
    for t in death_times:
        n_at_risk = all_times.size - int(np.searchsorted(all_times, t, side="left"))
        d = int(np.searchsorted(deaths, t, side="right") - np.searchsorted(deaths, t, side="left"))
        surv *= (n_at_risk - d) / n_at_risk
        if n_at_risk > d:
            greenwood += d / (n_at_risk * (n_at_risk - d))
            ses.append(surv * float(np.sqrt(greenwood)))
        else:
            ses.append(float("nan"))
        values.append(surv)
    return StepCurve(times=tuple(float(t) for t in death_times), values=tuple(values), se=tuple(ses))


def write_step_curve_csv(curve: StepCurve, path: str | Path) -> None:
    """CSV columns: time,survival[,se]. NaN standard errors serialize as empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if curve.se is not None:
            writer.writerow(["time", "survival", "se"])
            for t, v, s in zip(curve.times, curve.values, curve.se):
                writer.writerow([repr(float(t)), repr(float(v)), "" if np.isnan(s) else repr(float(s))])
        else:
            writer.writerow(["time", "survival"])
            for t, v in zip(curve.times, curve.values):
                writer.writerow([repr(float(t)), repr(float(v))])
