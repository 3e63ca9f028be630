"""dynroc: time-varying prognostic accuracy for survival risk scores.

Evaluates baseline and routinely updated risk predictions on longitudinal
cohorts with incident-case / dynamic-control classification accuracy:
AUC(t) curves, sensitivity at fixed specificity, cluster-bootstrap bands,
subgroup curves and update-frequency comparisons. Ships a Cox model fitter
with natural-spline terms, a Kaplan-Meier estimator, a seeded cohort
simulator and a Monte-Carlo oracle for verification.
"""

__version__ = "0.1.0"

from .accuracy import (
    AccuracyCurve,
    BaselineScores,
    CasePercentile,
    IncidentPercentiles,
    UpdateComparisonTable,
    UpdatedScores,
    auc_curve,
    baseline_marker_scores,
    bootstrap_bands,
    case_percentile,
    compare_update_policies,
    default_grid,
    incident_percentiles,
    resample_cohort,
    subgroup_curves,
    tpf_at_fpf_curve,
    updated_marker_scores,
)
from .cohort import (
    LongitudinalCohort,
    MarkerSeries,
    PatientRecord,
    SurvivalOutcome,
    annual_schedule,
    build_analysis_cohort,
    load_cohort,
    locf_impute,
    write_cohort,
)
from .cox import (
    CoxFit,
    CvScores,
    ModelSpec,
    ScoreSeries,
    Term,
    base_model,
    baseline_scores,
    cv_baseline_scores,
    fit_cox,
    linear_predictor,
    multivariate_model,
    time_varying_scores,
)
from .errors import (
    CohortError,
    ConvergenceError,
    DynrocError,
    EvaluationError,
    FitError,
    RankDeficiencyError,
    SchemaError,
    SeparationError,
)
from .simulate import MarkerDistribution, OracleCurve, SimConfig, mc_true_auc, simulate_cohort
from .splines import SplineBasis, basis_from_quantiles, natural_spline_basis
from .subgroups import Stratifier, parse_stratifier, split_cohort
from .survival import RiskSet, StepCurve, event_times, kaplan_meier, risk_set_at
