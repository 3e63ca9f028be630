"""Synthetic longitudinal cohorts with a controllable marker-survival link,
plus a large-sample Monte-Carlo oracle for the true incident AUC curve.

The generative law: the baseline marker is drawn from a configurable
distribution and then takes annual random-walk steps (drift plus Gaussian
noise). The hazard is baseline_hazard * exp(log_hazard_slope * M(t)) with
M(t) piecewise constant on the annual grid, so death times are sampled
exactly by composing exponentials segment by segment. Censoring is an
independent exponential plus administrative cutoff at the horizon.

Determinism: every patient (and every Monte-Carlo batch) uses its own
substream derived from the master seed by index, so identical configs yield
bit-identical cohorts regardless of execution order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cohort import (
    DEFAULT_MARKER,
    LongitudinalCohort,
    MarkerSeries,
    PatientRecord,
    outcome_from_record,
)

_MAX_YEARS = 10_000  # safety cap when admin_horizon is infinite


@dataclass(frozen=True)
class MarkerDistribution:
    """Baseline marker law: normal(mean, sd) or uniform(lo, hi)."""

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("normal", "uniform"):
            raise ValueError(f"unknown marker distribution {self.kind!r}")
        if self.kind == "normal" and self.b < 0:
            raise ValueError("normal sd must be >= 0")
        if self.kind == "uniform" and self.b <= self.a:
            raise ValueError("uniform needs lo < hi")

    def draw(self, rng: np.random.Generator, size: int | None = None):
        if self.kind == "normal":
            return rng.normal(self.a, self.b, size=size)
        return rng.uniform(self.a, self.b, size=size)

    @classmethod
    def parse(cls, text: str) -> "MarkerDistribution":
        """Parse 'normal:MEAN,SD' or 'uniform:LO,HI'."""
        try:
            kind, params = text.split(":", 1)
            a, b = (float(tok) for tok in params.split(","))
        except ValueError:
            raise ValueError(f"bad marker distribution {text!r}; want kind:a,b") from None
        return cls(kind=kind, a=a, b=b)

    def __str__(self) -> str:
        return f"{self.kind}:{self.a:g},{self.b:g}"


@dataclass(frozen=True)
class SimConfig:
    n_patients: int
    baseline_marker: MarkerDistribution = MarkerDistribution("normal", 0.0, 1.0)
    drift_per_year: float = 0.0
    noise_sd: float = 0.0
    log_hazard_slope: float = 0.0
    baseline_hazard: float = 0.1
    censor_rate: float = 0.0
    admin_horizon: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.n_patients < 2:
            raise ValueError("n_patients must be >= 2")
        if self.baseline_hazard <= 0:
            raise ValueError("baseline_hazard must be > 0")
        if not self.admin_horizon > 0:
            raise ValueError("admin_horizon must be > 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.censor_rate < 0:
            raise ValueError("censor_rate must be >= 0")


def _patient_rng(seed: int, index: int) -> np.random.Generator:
    # namespace 1: per-patient substreams
    return np.random.default_rng([seed, 1, index])


def _mc_batch_rng(seed: int, batch: int) -> np.random.Generator:
    # namespace 2: Monte-Carlo batch substreams (disjoint from patient streams)
    return np.random.default_rng([seed, 2, batch])


def _simulate_one(config: SimConfig, index: int):
    """One patient's marker path, death time and censoring time.

    Draw order is fixed (baseline marker, death exponential, censoring,
    covariates, then noise increments as the path extends), so the output is
    a pure function of (seed, index).
    """
    rng = _patient_rng(config.seed, index)
    m0 = float(config.baseline_marker.draw(rng))
    e_death = float(rng.exponential())
    if config.censor_rate > 0:
        c_time = float(rng.exponential(1.0 / config.censor_rate))
    else:
        c_time = math.inf
    covariates = {
        "baseline_age": float(np.round(rng.uniform(6.0, 45.0), 2)),
        "sex": "female" if rng.random() < 0.5 else "male",
        "race": ("white", "african_american", "other")[int(rng.choice(3, p=[0.95, 0.04, 0.01]))],
        "genotype": ("f508_homozygous", "f508_heterozygous", "other", "missing")[
            int(rng.choice(4, p=[0.40, 0.28, 0.08, 0.24]))
        ],
        "weight_pct": float(np.round(rng.uniform(0.5, 99.5), 1)),
        "height_pct": float(np.round(rng.uniform(0.5, 99.5), 1)),
        "staph_status": ("yes", "no", "not_cultured")[int(rng.choice(3, p=[0.27, 0.62, 0.11]))],
        "cepacia_status": ("yes", "no", "not_cultured")[int(rng.choice(3, p=[0.03, 0.86, 0.11]))],
        "pancreatic_insufficient": bool(rng.random() < 0.85),
    }

    horizon = config.admin_horizon
    max_years = _MAX_YEARS if math.isinf(horizon) else int(math.ceil(horizon))
    values = [m0]
    death_time = math.inf
    cumulative = 0.0
    year = 0
    while year < max_years:
        rate = config.baseline_hazard * math.exp(config.log_hazard_slope * values[year])
        if cumulative + rate >= e_death and rate > 0:
            death_time = year + (e_death - cumulative) / rate
            break
        cumulative += rate
        values.append(values[year] + config.drift_per_year + config.noise_sd * float(rng.standard_normal()))
        year += 1
    return values, death_time, c_time, covariates


def simulate_cohort(config: SimConfig) -> LongitudinalCohort:
    """Generate a cohort under the configured law; bit-identical given the config."""
    patients = []
    markers = []
    width = len(str(config.n_patients))
    for i in range(config.n_patients):
        values, death_time, c_time, cov = _simulate_one(config, i)
        t_obs = min(death_time, c_time, config.admin_horizon)
        died = death_time <= min(c_time, config.admin_horizon)
        if math.isinf(t_obs):
            # infinite horizon, no censoring, no death within the year cap
            t_obs, died = float(_MAX_YEARS), False
        if t_obs <= 0:  # cannot happen: hazard segments have positive length
            raise AssertionError("non-positive follow-up time")
        pid = f"p{i:0{width}d}"
        record = PatientRecord(
            patient_id=pid,
            baseline_age=cov["baseline_age"],
            sex=cov["sex"],
            race=cov["race"],
            genotype=cov["genotype"],
            weight_pct=cov["weight_pct"],
            height_pct=cov["height_pct"],
            staph_status=cov["staph_status"],
            cepacia_status=cov["cepacia_status"],
            pancreatic_insufficient=cov["pancreatic_insufficient"],
            death_time=float(t_obs) if died else None,
            transplant_time=None,
            last_followup_time=float(t_obs),
        )
        patients.append(record)
        n_obs = int(math.floor(t_obs)) + 1
        obs = tuple((float(k), float(values[k])) for k in range(min(n_obs, len(values))))
        markers.append(MarkerSeries(patient_id=pid, marker_name=DEFAULT_MARKER, observations=obs))
    outcomes = tuple(outcome_from_record(p) for p in patients)
    return LongitudinalCohort(
        patients=tuple(patients),
        markers=tuple(markers),
        outcomes=outcomes,
        analysis_marker=DEFAULT_MARKER,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo oracle for the true AUC(t)


@dataclass(frozen=True)
class OracleCurve:
    """Definitional AUC(t) under the generative law, by large-sample Monte Carlo."""

    grid: tuple[float, ...]
    true_auc: tuple[float, ...]
    mc_samples: int
    n_cases: tuple[int, ...]
    time_tolerance: float

    def flagged(self, min_cases: int = 100) -> tuple[bool, ...]:
        """Grid points whose case count fell below ``min_cases``."""
        return tuple(n < min_cases for n in self.n_cases)


def _batch_paths(config: SimConfig, rng: np.random.Generator, size: int, n_years: int):
    """Vectorized marker paths (size, n_years+1) and exact death times.

    Deaths beyond n_years come back as +inf; the draw order matches across
    regenerations of the same batch.
    """
    m0 = config.baseline_marker.draw(rng, size)
    steps = config.drift_per_year + config.noise_sd * rng.standard_normal((size, n_years))
    paths = np.empty((size, n_years + 1))
    paths[:, 0] = m0
    np.cumsum(steps, axis=1, out=paths[:, 1:])
    paths[:, 1:] += m0[:, None]
    e_death = rng.exponential(size=size)
    rates = config.baseline_hazard * np.exp(config.log_hazard_slope * paths[:, :-1])
    cum = np.cumsum(rates, axis=1)
    reached = cum >= e_death[:, None]
    first = np.argmax(reached, axis=1)
    any_death = reached.any(axis=1)
    prev = np.where(first > 0, np.take_along_axis(cum, np.maximum(first - 1, 0)[:, None], axis=1)[:, 0], 0.0)
    rate_at = np.take_along_axis(rates, first[:, None], axis=1)[:, 0]
    rate_safe = np.where(rate_at > 0, rate_at, 1.0)
    death = np.where(any_death, first + (e_death - prev) / rate_safe, np.inf)
    return paths, death


def mc_true_auc(
    config: SimConfig,
    grid: Sequence[float],
    mc_n: int = 1_000_000,
    time_tolerance: float = 0.05,
    batch_size: int = 100_000,
) -> OracleCurve:
    """Estimate P(case marker > control marker) at each grid time by simulating
    ``mc_n`` subjects from the censoring-free generative law.

    Cases die within ``time_tolerance`` of t and contribute their marker value
    in effect at death; controls survive beyond t + tolerance and contribute
    their value at t. Ties count half. Deterministic given config.seed.
    """
    grid = [float(t) for t in grid]
    if any(t < 0 for t in grid):
        raise ValueError("grid times must be >= 0")
    if mc_n < 1:
        raise ValueError("mc_n must be positive")
    n_years = int(math.ceil(max(grid) + time_tolerance)) + 1
    n_batches = int(math.ceil(mc_n / batch_size))
    sizes = [min(batch_size, mc_n - b * batch_size) for b in range(n_batches)]

    # pass 1: collect case marker values per grid point
    case_values: list[list[np.ndarray]] = [[] for _ in grid]
    for b, size in enumerate(sizes):
        rng = _mc_batch_rng(config.seed, b)
        paths, death = _batch_paths(config, rng, size, n_years)
        for g, t in enumerate(grid):
            lo, hi = max(t - time_tolerance, 0.0), t + time_tolerance
            mask = (death >= lo) & (death <= hi)
            if mask.any():
                cols = np.minimum(np.floor(death[mask]).astype(int), n_years)
                case_values[g].append(paths[mask, cols])
    cases_sorted = [
        np.sort(np.concatenate(vals)) if vals else np.empty(0) for vals in case_values
    ]

    # pass 2: regenerate the same batches and rank controls against the cases
    wins = np.zeros(len(grid))
    n_controls = np.zeros(len(grid), dtype=np.int64)
    for b, size in enumerate(sizes):
        rng = _mc_batch_rng(config.seed, b)
        paths, death = _batch_paths(config, rng, size, n_years)
        for g, t in enumerate(grid):
            cs = cases_sorted[g]
            if cs.size == 0:
                continue
            alive = death > t + time_tolerance
            if not alive.any():
                continue
            col = min(int(math.floor(t)), n_years)
            ctrl = paths[alive, col]
            below = np.searchsorted(cs, ctrl, side="left")
            upto = np.searchsorted(cs, ctrl, side="right")
            # per control: cases above it count 1, ties count 1/2
            wins[g] += float((cs.size - upto).sum() + 0.5 * (upto - below).sum())
            n_controls[g] += int(ctrl.size)
    auc = np.full(len(grid), np.nan)
    counts = np.array([cs.size for cs in cases_sorted], dtype=np.int64)
    ok = (counts > 0) & (n_controls > 0)
    auc[ok] = wins[ok] / (counts[ok].astype(float) * n_controls[ok].astype(float))
    return OracleCurve(
        grid=tuple(grid),
        true_auc=tuple(float(v) for v in auc),
        mc_samples=mc_n,
        n_cases=tuple(int(c) for c in counts),
        time_tolerance=time_tolerance,
    )
