import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dynroc.cohort import LongitudinalCohort, MarkerSeries, PatientRecord, SurvivalOutcome


def make_patient(pid, *, age=20.0, sex="female", death=None, transplant=None, followup=10.0, **kw):
    defaults = dict(
        race="white",
        genotype="missing",
        weight_pct=50.0,
        height_pct=50.0,
        staph_status="no",
        cepacia_status="no",
        pancreatic_insufficient=True,
    )
    defaults.update(kw)
    return PatientRecord(
        patient_id=pid,
        baseline_age=age,
        sex=sex,
        death_time=death,
        transplant_time=transplant,
        last_followup_time=followup,
        **defaults,
    )


def make_cohort(rows, marker_name="fev1pct"):
    """rows: list of (pid, marker observations [(t, v), ...], death, followup, extra-kwargs)."""
    patients, markers, outcomes = [], [], []
    for row in rows:
        pid, obs, death, followup = row[:4]
        kw = row[4] if len(row) > 4 else {}
        p = make_patient(pid, death=death, followup=followup, **kw)
        patients.append(p)
        if obs:
            markers.append(MarkerSeries(pid, marker_name, tuple(obs)))
        from dynroc.cohort import outcome_from_record

        outcomes.append(outcome_from_record(p))
    return LongitudinalCohort(tuple(patients), tuple(markers), tuple(outcomes))


def outcomes_cohort(outcomes, marker_values=None, marker_name="fev1pct"):
    """Wrap bare outcomes into a full cohort; marker defaults to a constant."""
    patients, markers = [], []
    for o in outcomes:
        death = o.time if o.is_death else None
        patients.append(make_patient(o.patient_id, death=death, followup=o.time))
        v = 0.0 if marker_values is None else marker_values[o.patient_id]
        markers.append(MarkerSeries(o.patient_id, marker_name, ((0.0, float(v)),)))
    return LongitudinalCohort(tuple(patients), tuple(markers), tuple(outcomes))


@pytest.fixture
def km_fixture_outcomes():
    return [
        SurvivalOutcome("a", 1.0, "death"),
        SurvivalOutcome("b", 1.5, "censored"),
        SurvivalOutcome("c", 2.0, "death"),
    ]
