"""Cox proportional-hazards fitting on baseline data, with spline terms,
cross-validated baseline risk scores, and routinely updated risk scores.

The partial likelihood is maximized by Newton iterations with step-halving.
Ties are handled by the Efron correction by default; a Breslow path exists
so that the two can be compared on tie-free data, where they coincide.
Design columns are centered before iteration and the centering is stored in
the fit, so predictions are reproducible and score differences between
subjects are unaffected by it.

No baseline hazard is estimated: every downstream accuracy measure consumes
only the ranks of the linear predictor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cohort import LongitudinalCohort, PatientRecord
from .errors import ConvergenceError, FitError, RankDeficiencyError, SeparationError
from .splines import SplineBasis, basis_from_quantiles

MAX_ITERATIONS = 25
REL_LOGLIK_TOL = 1e-9
SCORE_SUP_TOL = 1e-8
SCORE_AT_SOLUTION_TOL = 1e-6
# monotone-likelihood guard: a coefficient past this magnitude counts as
# separation only when its Wald ratio |beta|/se has collapsed, i.e. the
# likelihood is flat at that scale; weakly identified but convergent spline
# coefficients keep Wald ratios of order one and pass
SEPARATION_BOUND = 15.0
SEPARATION_WALD_RATIO = 0.05

ENC_SPLINE = "spline"
ENC_LINEAR = "linear"
ENC_INDICATORS = "indicators"

# reference level first; indicator columns are emitted for the remaining levels
_INDICATOR_LEVELS = {
    "sex": ("female", "male"),
    "staph_status": ("no", "yes", "not_cultured"),
    "cepacia_status": ("no", "yes", "not_cultured"),
    "pancreatic_insufficient": ("false", "true"),
    "race": ("white", "african_american", "other"),
    "genotype": ("f508_homozygous", "f508_heterozygous", "other", "missing"),
}


@dataclass(frozen=True)
class Term:
    """One model term: a covariate name plus its encoding."""

    covariate: str
    encoding: str
    df: int = 4

    def __post_init__(self):
        if self.encoding not in (ENC_SPLINE, ENC_LINEAR, ENC_INDICATORS):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.encoding == ENC_SPLINE and self.df < 3:
            raise ValueError(f"spline term '{self.covariate}' needs df >= 3, got {self.df}")


@dataclass(frozen=True)
class ModelSpec:
    """Terms of a Cox model together with the marker the model tracks over time."""

    terms: tuple[Term, ...]
    marker_name: str

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a model needs at least one term")
        names = [t.covariate for t in self.terms]
        if len(set(names)) != len(names):
            raise ValueError("duplicate covariate in model spec")

    @property
    def marker_term(self) -> Term | None:
        for t in self.terms:
            if t.covariate == self.marker_name:
                return t
        return None


def _continuous_term(covariate: str, df: int) -> Term:
    # df = 1 degenerates to the raw linear term; 2 has no natural-spline analogue
    if df == 1:
        return Term(covariate, ENC_LINEAR)
    return Term(covariate, ENC_SPLINE, df)


def base_model(marker_name: str = "fev1pct", df: int = 4) -> ModelSpec:
    """Marker-only model with a natural cubic spline on the marker (df=1: linear)."""
    return ModelSpec(terms=(_continuous_term(marker_name, df),), marker_name=marker_name)


def multivariate_model(marker_name: str = "fev1pct", df: int = 4) -> ModelSpec:
    """Marker plus age, sex, weight percentile, pancreatic insufficiency and
    the two culture statuses; continuous terms as natural cubic splines."""
    return ModelSpec(
        terms=(
            _continuous_term(marker_name, df),
            _continuous_term("baseline_age", df),
            Term("sex", ENC_INDICATORS),
            _continuous_term("weight_pct", df),
            Term("pancreatic_insufficient", ENC_INDICATORS),
            Term("staph_status", ENC_INDICATORS),
            Term("cepacia_status", ENC_INDICATORS),
        ),
        marker_name=marker_name,
    )


@dataclass
class CoxFit:
    """A converged fit: coefficients, per-term spline bases, centering, diagnostics."""

    spec: ModelSpec
    coefficients: np.ndarray
    column_names: tuple[str, ...]
    basis_defs: dict[str, SplineBasis]
    centering: np.ndarray
    log_partial_likelihood: float
    iterations: int
    converged: bool
    ties: str = "efron"

    def coefficient(self, column: str) -> float:
        return float(self.coefficients[self.column_names.index(column)])

    def to_json_dict(self) -> dict:
        return {
            "model": {
                "marker_name": self.spec.marker_name,
                "terms": [
                    {"covariate": t.covariate, "encoding": t.encoding, "df": t.df}
                    for t in self.spec.terms
                ],
            },
            "coefficients": {
                name: float(b) for name, b in zip(self.column_names, self.coefficients)
            },
            "basis_defs": {
                cov: {"knots": list(b.knots), "boundary": list(b.boundary)}
                for cov, b in self.basis_defs.items()
            },
            "centering": [float(c) for c in self.centering],
            "log_partial_likelihood": float(self.log_partial_likelihood),
            "iterations": self.iterations,
            "converged": self.converged,
            "ties": self.ties,
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "CoxFit":
        spec = ModelSpec(
            terms=tuple(
                Term(t["covariate"], t["encoding"], int(t.get("df", 4)))
                for t in payload["model"]["terms"]
            ),
            marker_name=payload["model"]["marker_name"],
        )
        names = tuple(payload["coefficients"])
        return cls(
            spec=spec,
            coefficients=np.array([payload["coefficients"][n] for n in names], dtype=float),
            column_names=names,
            basis_defs={
                cov: SplineBasis(knots=tuple(b["knots"]), boundary=tuple(b["boundary"]))
                for cov, b in payload["basis_defs"].items()
            },
            centering=np.asarray(payload["centering"], dtype=float),
            log_partial_likelihood=float(payload["log_partial_likelihood"]),
            iterations=int(payload["iterations"]),
            converged=bool(payload["converged"]),
            ties=payload.get("ties", "efron"),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "CoxFit":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ScoreSeries:
    """Risk score (linear-predictor units) for one patient over a time schedule."""

    patient_id: str
    observations: tuple[tuple[float, float], ...]

    def __post_init__(self):
        times = [t for t, _ in self.observations]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"patient {self.patient_id}: score times must be strictly increasing")

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.observations)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.observations)

    def value_at(self, t: float) -> float | None:
        value = None
        for time, v in self.observations:
            if time <= t:
                value = v
            else:
                break
        return value


# ---------------------------------------------------------------------------
# Covariate extraction and design assembly


def _raw_value(record: PatientRecord, covariate: str, marker_value: float | None, marker_name: str):
    """Raw covariate value for one patient; None means missing."""
    if covariate == marker_name:
        return marker_value
    if covariate == "baseline_age":
        return record.baseline_age
    if covariate == "weight_pct":
        return record.weight_pct
    if covariate == "height_pct":
        return record.height_pct
    if covariate == "sex":
        return record.sex
    if covariate == "race":
        return record.race
    if covariate == "genotype":
        return record.genotype
    if covariate == "staph_status":
        return record.staph_status
    if covariate == "cepacia_status":
        return record.cepacia_status
    if covariate == "pancreatic_insufficient":
        if record.pancreatic_insufficient is None:
            return None
        return "true" if record.pancreatic_insufficient else "false"
    raise FitError(f"unknown covariate '{covariate}'")


def baseline_covariates(cohort: LongitudinalCohort, patient_id: str, spec: ModelSpec) -> dict:
    """Raw covariate mapping for one patient, marker taken at time 0."""
    record = cohort.patient(patient_id)
    marker_value = cohort.baseline_value(spec.marker_name, patient_id)
    return {
        t.covariate: _raw_value(record, t.covariate, marker_value, spec.marker_name)
        for t in spec.terms
    }


def _complete_case_ids(cohort: LongitudinalCohort, spec: ModelSpec) -> list[str]:
    """Patients with every model covariate present (marker evaluated at time 0)."""
    series = cohort.marker_series(spec.marker_name)
    kept = []
    for p in cohort.patients:
        s = series.get(p.patient_id)
        marker_value = s.value_at(0.0) if s is not None else None
        values = (
            _raw_value(p, t.covariate, marker_value, spec.marker_name) for t in spec.terms
        )
        if all(v is not None for v in values):
            kept.append(p.patient_id)
    return kept


def _term_columns(term: Term, values, basis_defs: dict[str, SplineBasis], train: bool):
    """Design block and column names for one term over an aligned value sequence."""
    if term.encoding == ENC_LINEAR:
        x = np.asarray(values, dtype=float)
        return x[:, None], [term.covariate]
    if term.encoding == ENC_SPLINE:
        x = np.asarray(values, dtype=float)
        if train and term.covariate not in basis_defs:
            try:
                basis_defs[term.covariate] = basis_from_quantiles(x, term.df)
            except ValueError as exc:
                raise FitError(f"covariate '{term.covariate}': {exc}") from None
        basis = basis_defs.get(term.covariate)
        if basis is None:
            raise FitError(f"no stored spline basis for covariate '{term.covariate}'")
        block = basis.design(x)
        names = [f"{term.covariate}:ns{j}" for j in range(1, basis.df + 1)]
        return block, names
    levels = _INDICATOR_LEVELS.get(term.covariate)
    if levels is None:
        raise FitError(f"covariate '{term.covariate}' has no indicator encoding")
    tokens = list(values)
    bad = next((tok for tok in tokens if tok not in levels), None)
    if bad is not None:
        raise FitError(f"covariate '{term.covariate}': unexpected level {bad!r}")
    cols = []
    names = []
    for level in levels[1:]:
        cols.append(np.array([1.0 if tok == level else 0.0 for tok in tokens]))
        names.append(f"{term.covariate}:{level}")
    return np.column_stack(cols), names


def _design_matrix(
    cohort: LongitudinalCohort,
    spec: ModelSpec,
    patient_ids: Sequence[str],
    basis_defs: dict[str, SplineBasis] | None = None,
):
    """Uncentered design matrix for the given patients (must be complete cases)."""
    train = basis_defs is None
    basis_defs = {} if basis_defs is None else dict(basis_defs)
    series = cohort.marker_series(spec.marker_name)
    per_term_values = {t.covariate: [] for t in spec.terms}
    for pid in patient_ids:
        record = cohort.patient(pid)
        s = series.get(pid)
        marker_value = s.value_at(0.0) if s is not None else None
        for t in spec.terms:
            value = _raw_value(record, t.covariate, marker_value, spec.marker_name)
            if value is None:
                raise FitError(f"patient {pid}: missing covariate '{t.covariate}'")
            per_term_values[t.covariate].append(value)
    blocks = []
    names: list[str] = []
    for t in spec.terms:
        block, block_names = _term_columns(t, per_term_values[t.covariate], basis_defs, train)
        blocks.append(block)
        names.extend(block_names)
    return np.hstack(blocks), tuple(names), basis_defs


def _first_dependent_column(x_centered: np.ndarray, names: Sequence[str]) -> str | None:
    """Name of the first column that adds no rank, or None if full rank."""
    n, p = x_centered.shape
    if np.linalg.matrix_rank(x_centered) == p:
        return None
    rank = 0
    for j in range(p):
        new_rank = np.linalg.matrix_rank(x_centered[:, : j + 1])
        if new_rank == rank:
            return names[j]
        rank = new_rank
    return names[-1]


# ---------------------------------------------------------------------------
# Partial likelihood (Efron / Breslow)


def _check_separation(beta: np.ndarray, hess: np.ndarray, names: Sequence[str]) -> None:
    big = np.abs(beta) > SEPARATION_BOUND
    if not big.any():
        return
    try:
        cov = np.linalg.inv(-hess)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.zeros_like(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        wald = np.where(se > 0, np.abs(beta) / se, 0.0)
    flagged = big & (wald < SEPARATION_WALD_RATIO)
    if flagged.any():
        j = int(np.nonzero(flagged)[0][0])
        raise SeparationError(
            f"monotone partial likelihood detected: coefficient '{names[j]}' exceeds "
            f"{SEPARATION_BOUND:g} in magnitude while the likelihood is flat there "
            "(a covariate separates the risk sets)"
        )


class _PartialLikelihood:
    """Log partial likelihood, gradient and Hessian over precomputed risk-set indices."""

    def __init__(self, x: np.ndarray, times: np.ndarray, events: np.ndarray, ties: str):
        if ties not in ("efron", "breslow"):
            raise ValueError(f"ties must be 'efron' or 'breslow', got {ties!r}")
        order = np.argsort(times, kind="stable")
        self.x = x[order]
        self.times = times[order]
        self.events = events[order]
        self.ties = ties
        self.n, self.p = self.x.shape
        death_times = np.unique(self.times[self.events])
        # groups[k]: indices of deaths at the k-th unique death time
        self.death_groups = []
        self.entry_groups = []  # subjects entering the risk set between consecutive death times
        prev_cut = np.inf
        for t in death_times[::-1]:
            in_group = np.nonzero((self.times == t) & self.events)[0]
            entering = np.nonzero((self.times >= t) & (self.times < prev_cut))[0]
            self.death_groups.append(in_group)
            self.entry_groups.append(entering)
            prev_cut = t
        self.n_deaths = int(self.events.sum())

    def evaluate(self, beta: np.ndarray):
        """Returns (loglik, gradient, hessian); hessian is of the log likelihood."""
        lp = self.x @ beta
        shift = lp.max() if lp.size else 0.0
        w = np.exp(lp - shift)
        xp0 = 0.0
        xp1 = np.zeros(self.p)
        xp2 = np.zeros((self.p, self.p))
        loglik = 0.0
        grad = np.zeros(self.p)
        hess = np.zeros((self.p, self.p))
        for entering, dying in zip(self.entry_groups, self.death_groups):
            if entering.size:
                we = w[entering]
                ve = self.x[entering]
                xp0 += we.sum()
                xp1 += we @ ve
                xp2 += (ve * we[:, None]).T @ ve
            vd = self.x[dying]
            wd = w[dying]
            m = dying.size
            loglik += float((lp[dying] - shift).sum())
            grad += vd.sum(axis=0)
            if self.ties == "efron" and m > 1:
                xp0f = wd.sum()
                xp1f = wd @ vd
                xp2f = (vd * wd[:, None]).T @ vd
                frac = np.arange(m) / m
                denom = xp0 - frac * xp0f
                loglik -= float(np.log(denom).sum())
                numer = xp1[None, :] - np.outer(frac, xp1f)
                ratio = numer / denom[:, None]
                grad -= ratio.sum(axis=0)
                mat2 = (xp2[None, :, :] - frac[:, None, None] * xp2f) / denom[:, None, None]
                hess += mat2.sum(axis=0) - np.einsum("ri,rj->ij", ratio, ratio)
            else:
                loglik -= m * math.log(xp0)
                mean = xp1 / xp0
                grad -= m * mean
                hess += m * (xp2 / xp0 - np.outer(mean, mean))
        return loglik, grad, -hess


def fit_cox(
    cohort: LongitudinalCohort,
    spec: ModelSpec,
    ties: str = "efron",
    patient_ids: Sequence[str] | None = None,
) -> CoxFit:
    """Maximize the Cox partial likelihood on baseline data by Newton iteration.

    Convergence requires the score sup-norm to come down to 1e-8, or the
    relative log-likelihood change to fall below 1e-9 with the score already
    below 1e-6; at most 25 iterations with step-halving on any step that
    fails to improve the likelihood.

    Raises
    ------
    RankDeficiencyError
        if a centered design column carries no information (names the column).
    SeparationError
        if the fitted log-hazard spread exceeds 15, the scale-free analogue of
        a diverging coefficient (monotone likelihood).
    ConvergenceError
        if the iteration budget is exhausted.
    """
    if patient_ids is None:
        patient_ids = _complete_case_ids(cohort, spec)
    patient_ids = list(patient_ids)
    if not patient_ids:
        raise FitError("no complete-case patients for this model")
    outcomes = [cohort.outcome(pid) for pid in patient_ids]
    times = np.array([o.time for o in outcomes])
    events = np.array([o.is_death for o in outcomes])
    if int(events.sum()) < 2:
        raise FitError(f"need at least 2 deaths to fit, got {int(events.sum())}")

    x, names, basis_defs = _design_matrix(cohort, spec, patient_ids)
    centering = x.mean(axis=0)
    xc = x - centering
    offending = _first_dependent_column(xc, names)
    if offending is not None:
        raise RankDeficiencyError(offending)

    pl = _PartialLikelihood(xc, times, events, ties)
    beta = np.zeros(xc.shape[1])
    loglik, grad, hess = pl.evaluate(beta)
    iterations = 0
    converged = False
    while iterations < MAX_ITERATIONS:
        iterations += 1
        try:
            delta = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Hessian during Newton iteration") from None
        step = 1.0
        new = None
        slack = 1e-12 * (abs(loglik) + 1.0)
        for _ in range(30):
            candidate = beta + step * delta
            val = pl.evaluate(candidate)
            if np.isfinite(val[0]) and val[0] >= loglik - slack:
                new = (candidate, val)
                break
            step /= 2.0
        if new is None:
            raise ConvergenceError("step-halving failed to improve the partial likelihood")
        candidate, (new_loglik, new_grad, new_hess) = new
        _check_separation(candidate, new_hess, names)
        rel_change = abs(new_loglik - loglik) / (abs(loglik) + 1.0)
        beta, loglik, grad, hess = candidate, new_loglik, new_grad, new_hess
        sup = float(np.max(np.abs(grad)))
        if sup <= SCORE_SUP_TOL or (rel_change < REL_LOGLIK_TOL and sup <= SCORE_AT_SOLUTION_TOL):
            converged = True
            break
    if not converged:
        _check_separation(beta, hess, names)
        raise ConvergenceError(f"no convergence in {MAX_ITERATIONS} Newton iterations")
    return CoxFit(
        spec=spec,
        coefficients=beta,
        column_names=names,
        basis_defs=basis_defs,
        centering=centering,
        log_partial_likelihood=loglik,
        iterations=iterations,
        converged=converged,
        ties=ties,
    )


# ---------------------------------------------------------------------------
# Prediction


def _design_row(fit: CoxFit, covariates: Mapping[str, object]) -> np.ndarray:
    blocks = []
    for t in fit.spec.terms:
        if t.covariate not in covariates:
            raise FitError(f"missing covariate '{t.covariate}'")
        block, _ = _term_columns(t, [covariates[t.covariate]], dict(fit.basis_defs), train=False)
        blocks.append(block)
    return np.hstack(blocks)[0]


def linear_predictor(fit: CoxFit, covariates: Mapping[str, object]) -> float:
    """Risk score for one covariate mapping; higher means higher predicted risk."""
    row = _design_row(fit, covariates)
    return float((row - fit.centering) @ fit.coefficients)


def baseline_scores(fit: CoxFit, cohort: LongitudinalCohort) -> dict[str, float]:
    """Linear predictor at baseline for every complete-case patient."""
    pids = _complete_case_ids(cohort, fit.spec)
    if not pids:
        return {}
    x, _, _ = _design_matrix(cohort, fit.spec, pids, basis_defs=fit.basis_defs)
    scores = (x - fit.centering) @ fit.coefficients
    return {pid: float(s) for pid, s in zip(pids, scores)}


@dataclass(frozen=True)
class CvScores:
    """Cross-validated baseline scores plus the fold bookkeeping used to audit them."""

    scores: tuple[tuple[str, float], ...]
    fold_of: Mapping[str, int]
    folds: int
    seed: int

    def as_dict(self) -> dict[str, float]:
        return dict(self.scores)


def cv_fold_assignment(patient_ids: Sequence[str], folds: int, seed: int) -> dict[str, int]:
    """Uniform random partition into folds, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(patient_ids))
    return {patient_ids[int(idx)]: pos % folds for pos, idx in enumerate(order)}


def cv_baseline_scores(
    cohort: LongitudinalCohort, spec: ModelSpec, folds: int = 10, seed: int = 0
) -> CvScores:
    """Score every complete-case patient from the fit that excludes their fold.

    Knots and centering are recomputed on each training split, so no
    information from a held-out patient reaches the model that scores them.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    pids = _complete_case_ids(cohort, spec)
    if len(pids) < folds:
        raise FitError(f"cannot split {len(pids)} patients into {folds} folds")
    fold_of = cv_fold_assignment(pids, folds, seed)
    scores: dict[str, float] = {}
    for k in range(folds):
        held_out = [pid for pid in pids if fold_of[pid] == k]
        training = [pid for pid in pids if fold_of[pid] != k]
        if not held_out:
            continue
        assert not set(held_out) & set(training)
        n_deaths = sum(1 for pid in training if cohort.outcome(pid).is_death)
        if n_deaths < 2:
            raise FitError(f"training split for fold {k} has {n_deaths} deaths (< 2)")
        fit_k = fit_cox(cohort, spec, patient_ids=training)
        x, _, _ = _design_matrix(cohort, spec, held_out, basis_defs=fit_k.basis_defs)
        fold_scores = (x - fit_k.centering) @ fit_k.coefficients
        for pid, s in zip(held_out, fold_scores):
            scores[pid] = float(s)
    return CvScores(
        scores=tuple((pid, scores[pid]) for pid in pids),
        fold_of=fold_of,
        folds=folds,
        seed=seed,
    )


def time_varying_scores(
    fit: CoxFit, cohort: LongitudinalCohort, schedule: Sequence[float]
) -> list[ScoreSeries]:
    """Risk score per patient at each scheduled time with the marker refreshed by
    LOCF and all other covariates held at baseline."""
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    spec = fit.spec
    pids = _complete_case_ids(cohort, spec)
    if not pids:
        return []
    series = cohort.marker_series(spec.marker_name)
    # split the design into the marker block (recomputed per time) and the rest
    marker_term = spec.marker_term
    if marker_term is None:
        base = baseline_scores(fit, cohort)
        return [
            ScoreSeries(pid, tuple((t, base[pid]) for t in schedule)) for pid in pids
        ]
    x, names, _ = _design_matrix(cohort, spec, pids, basis_defs=fit.basis_defs)
    marker_cols = np.array(
        [j for j, name in enumerate(names) if name.split(":")[0] == marker_term.covariate],
        dtype=int,
    )
    other_cols = np.array(
        [j for j in range(len(names)) if j not in set(marker_cols.tolist())], dtype=int
    )
    centered = x - fit.centering
    fixed_part = (
        centered[:, other_cols] @ fit.coefficients[other_cols] if other_cols.size else 0.0
    )
    beta_marker = fit.coefficients[marker_cols]
    mu_marker = fit.centering[marker_cols]
    basis = fit.basis_defs.get(marker_term.covariate)

    per_time_scores = []
    for t in schedule:
        values = np.empty(len(pids))
        for i, pid in enumerate(pids):
            v = series[pid].value_at(t)
            if v is None:
                raise FitError(
                    f"patient {pid}: schedule time {t} precedes the first marker observation"
                )
            values[i] = v
        if marker_term.encoding == ENC_SPLINE:
            block = basis.design(values)
        else:
            block = values[:, None]
        per_time_scores.append(fixed_part + (block - mu_marker) @ beta_marker)
    result = []
    for i, pid in enumerate(pids):
        obs = tuple((float(t), float(per_time_scores[j][i])) for j, t in enumerate(schedule))
        result.append(ScoreSeries(pid, obs))
    return result


def write_score_series_csv(series_list: Iterable[ScoreSeries], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "time", "score"])
        for s in series_list:
            for t, v in s.observations:
                writer.writerow([s.patient_id, repr(float(t)), repr(float(v))])


def write_cv_scores_csv(cv: CvScores, path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "score", "fold"])
        for pid, score in cv.scores:
            writer.writerow([pid, repr(float(score)), cv.fold_of[pid]])
