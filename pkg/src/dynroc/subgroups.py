"""Subgroup stratifiers: the four baseline splits used for risk-group reporting.

Rule mini-language (all splits use baseline values):
  marker_le:<x>     two groups, marker <= x vs > x         labels le<x>, gt<x>
  age_bands:<a,b>   bands [0,a], (a,b), [b,inf)            labels le<a>, <a>to<b>, ge<b>
  sex               one group per sex
  genotype          one group per genotype level (incl. missing)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .cohort import LongitudinalCohort
from .errors import EvaluationError


@dataclass(frozen=True)
class Stratifier:
    name: str
    assign: Callable[[LongitudinalCohort], dict[str, str]]


def _num(x: float) -> str:
    return f"{x:g}"


def parse_stratifier(rule: str, marker_name: str) -> Stratifier:
    """Parse a subgroup rule; raises EvaluationError on unknown or malformed rules."""
    if rule == "sex":

        def by_sex(cohort: LongitudinalCohort) -> dict[str, str]:
            return {p.patient_id: p.sex for p in cohort.patients}

        return Stratifier("sex", by_sex)

    if rule == "genotype":

        def by_genotype(cohort: LongitudinalCohort) -> dict[str, str]:
            return {p.patient_id: p.genotype for p in cohort.patients}

        return Stratifier("genotype", by_genotype)

    if rule.startswith("marker_le:"):
        raw = rule.split(":", 1)[1]
        try:
            cut = float(raw)
        except ValueError:
            raise EvaluationError(f"bad marker_le cutpoint {raw!r}") from None
        lo, hi = f"le{_num(cut)}", f"gt{_num(cut)}"

        def by_marker(cohort: LongitudinalCohort) -> dict[str, str]:
            series = cohort.marker_series(marker_name)
            out = {}
            for p in cohort.patients:
                s = series.get(p.patient_id)
                v = s.value_at(0.0) if s is not None else None
                if v is None:
                    continue  # no baseline marker: not assignable to either side
                out[p.patient_id] = lo if v <= cut else hi
            return out

        return Stratifier(f"marker_le:{_num(cut)}", by_marker)

    if rule.startswith("age_bands:"):
        raw = rule.split(":", 1)[1]
        try:
            cuts = [float(tok) for tok in raw.split(",") if tok != ""]
        except ValueError:
            raise EvaluationError(f"bad age_bands cutpoints {raw!r}") from None
        if not cuts or any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise EvaluationError("age_bands cutpoints must be strictly increasing and nonempty")
        labels = [f"le{_num(cuts[0])}"]
        for a, b in zip(cuts, cuts[1:]):
            labels.append(f"{_num(a)}to{_num(b)}")
        labels.append(f"ge{_num(cuts[-1])}")

        def by_age(cohort: LongitudinalCohort) -> dict[str, str]:
            out = {}
            for p in cohort.patients:
                age = p.baseline_age
                if age <= cuts[0]:
                    out[p.patient_id] = labels[0]
                elif age >= cuts[-1]:
                    out[p.patient_id] = labels[-1]
                else:
                    for i in range(len(cuts) - 1):
                        if age <= cuts[i + 1]:
                            out[p.patient_id] = labels[i + 1]
                            break
            return out

        return Stratifier(f"age_bands:{raw}", by_age)

    raise EvaluationError(f"unknown subgroup rule {rule!r}")


def split_cohort(cohort: LongitudinalCohort, stratifier: Stratifier) -> dict[str, LongitudinalCohort]:
    """Nonempty sub-cohorts keyed by stratum label, in first-appearance order."""
    assignment = stratifier.assign(cohort)
    by_label: dict[str, list[str]] = {}
    for p in cohort.patients:
        label = assignment.get(p.patient_id)
        if label is None:
            continue
        by_label.setdefault(label, []).append(p.patient_id)
    if not by_label:
        raise EvaluationError(f"stratifier '{stratifier.name}' assigned no patients")
    return {label: cohort.subset(pids) for label, pids in by_label.items()}
