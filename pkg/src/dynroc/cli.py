"""Command-line entry point: seeded, reproducible batch runs that write CSV
outputs, SVG figures rendered from those CSVs, and a run manifest."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .accuracy import (
    BaselineScores,
    UpdatedScores,
    auc_curve,
    baseline_marker_scores,
    bootstrap_bands,
    compare_update_policies,
    default_grid,
    incident_percentiles,
    marker_policy_scores,
    subgroup_curves,
    tpf_at_fpf_curve,
    write_accuracy_csv,
    write_update_comparison_csv,
)
from .cohort import (
    DEFAULT_MARKER,
    annual_schedule,
    build_analysis_cohort,
    load_cohort,
    write_cohort,
)
from .cox import (
    CoxFit,
    base_model,
    cv_baseline_scores,
    fit_cox,
    multivariate_model,
    time_varying_scores,
    write_cv_scores_csv,
    write_score_series_csv,
)
from .errors import DynrocError
from .manifest import build_manifest
from .simulate import MarkerDistribution, SimConfig, simulate_cohort
from .subgroups import parse_stratifier, split_cohort
from .survival import kaplan_meier, write_step_curve_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line usage errors, exit code 2
        self.exit(2, f"dynroc: usage error: {message}\n")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DYNROC_THREADS", "1")))
    except ValueError:
        return 1


def _model_spec(name: str, marker: str, df: int = 4):
    if name == "base":
        return base_model(marker, df=df)
    if name == "multivariate":
        return multivariate_model(marker, df=df)
    raise DynrocError(f"unknown model {name!r}")


def _score_accessor(args, cohort):
    """baseline: cross-validated baseline score (or raw baseline marker);
    updated: score refreshed on the update-interval grid (or LOCF marker)."""
    if args.model == "raw":
        if args.mode == "baseline":
            return baseline_marker_scores(cohort, args.marker)
        return marker_policy_scores(
            cohort, args.marker, args.update_interval, cohort.max_followup()
        )
    spec = _model_spec(args.model, args.marker, args.df)
    if args.mode == "baseline":
        cv = cv_baseline_scores(cohort, spec, folds=args.cv_folds, seed=args.seed)
        return BaselineScores(cv.as_dict())
    fit = fit_cox(cohort, spec)
    schedule = annual_schedule(cohort.max_followup(), args.update_interval)
    return UpdatedScores(time_varying_scores(fit, cohort, schedule))


def _prepare_out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_analysis_cohort(args):
    cohort = load_cohort(args.patients, args.records)
    analysis = build_analysis_cohort(cohort, args.marker)
    excl = analysis.exclusions
    if excl is not None and excl.total_excluded:
        print(
            f"excluded {excl.total_excluded} patient(s) without a baseline "
            f"'{args.marker}' value ({excl.excluded_under_age} under age 5.5)"
        )
    return analysis


def cmd_simulate(args) -> int:
    config = SimConfig(
        n_patients=args.n,
        baseline_marker=MarkerDistribution.parse(args.marker_dist),
        drift_per_year=args.drift,
        noise_sd=args.noise_sd,
        log_hazard_slope=args.beta,
        baseline_hazard=args.baseline_hazard,
        censor_rate=args.censor_rate,
        admin_horizon=args.horizon,
        seed=args.seed,
    )
    cohort = simulate_cohort(config)
    out = _prepare_out_dir(args.out_dir)
    patients_path = out / "patients.csv"
    records_path = out / "records.csv"
    write_cohort(cohort, patients_path, records_path)
    n_deaths = sum(1 for o in cohort.outcomes if o.is_death)
    manifest = build_manifest(
        "simulate",
        __version__,
        parameters={
            "n": args.n,
            "marker_dist": str(config.baseline_marker),
            "beta": args.beta,
            "lambda": args.baseline_hazard,
            "drift": args.drift,
            "noise_sd": args.noise_sd,
            "censor_rate": args.censor_rate,
            "horizon": args.horizon,
        },
        input_paths={},
        seed=args.seed,
        outputs=[patients_path, records_path],
    )
    manifest.write(out / "manifest.json")
    print(f"simulated {cohort.n_patients} patients ({n_deaths} deaths) -> {out}")
    return 0


def cmd_fit(args) -> int:
    cohort = _load_analysis_cohort(args)
    spec = _model_spec(args.model, args.marker, args.df)
    fit = fit_cox(cohort, spec)
    out = _prepare_out_dir(args.out_dir)
    model_path = out / "model.json"
    fit.save(model_path)
    outputs = [model_path]
    if args.cv_folds:
        cv = cv_baseline_scores(cohort, spec, folds=args.cv_folds, seed=args.seed)
        scores_path = out / "cv_scores.csv"
        write_cv_scores_csv(cv, scores_path)
        outputs.append(scores_path)
    manifest = build_manifest(
        "fit",
        __version__,
        parameters={
            "model": args.model,
            "marker": args.marker,
            "df": args.df,
            "cv_folds": args.cv_folds,
        },
        input_paths={"patients": args.patients, "records": args.records},
        seed=args.seed,
        outputs=outputs,
    )
    manifest.write(out / "manifest.json")
    print(
        f"fit {args.model} model: {len(fit.column_names)} columns, "
        f"log PL {fit.log_partial_likelihood:.4f}, {fit.iterations} iterations -> {out}"
    )
    return 0


def cmd_score(args) -> int:
    fit = CoxFit.load(args.fit)
    cohort = load_cohort(args.patients, args.records)
    cohort = build_analysis_cohort(cohort, fit.spec.marker_name)
    schedule = annual_schedule(cohort.max_followup(), args.interval)
    series = time_varying_scores(fit, cohort, schedule)
    out = _prepare_out_dir(args.out_dir)
    scores_path = out / "scores.csv"
    write_score_series_csv(series, scores_path)
    manifest = build_manifest(
        "score",
        __version__,
        parameters={"interval": args.interval},
        input_paths={"fit": args.fit, "patients": args.patients, "records": args.records},
        seed=None,
        outputs=[scores_path],
    )
    manifest.write(out / "manifest.json")
    print(f"scored {len(series)} patients at {len(schedule)} times -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    from .plots import render_accuracy_plot

    cohort = _load_analysis_cohort(args)
    out = _prepare_out_dir(args.out_dir)
    common = {
        "model": args.model,
        "marker": args.marker,
        "df": args.df,
        "mode": args.mode,
        "metric": args.metric,
        "span": args.span,
        "fpf": args.fpf,
        "bootstrap": args.bootstrap,
        "cv_folds": args.cv_folds,
        "update_interval": args.update_interval,
        "subgroup": args.subgroup,
        "compare_intervals": args.compare_intervals,
    }
    inputs = {"patients": args.patients, "records": args.records}

    if args.compare_intervals:
        try:
            a, b = (float(tok) for tok in args.compare_intervals.split(","))
        except ValueError:
            raise DynrocError(
                f"bad --compare-intervals {args.compare_intervals!r}; want two numbers a,b"
            ) from None
        if args.model == "raw":
            table = compare_update_policies(
                None, cohort, interval_a=a, interval_b=b, marker_name=args.marker
            )
        else:
            fit = fit_cox(cohort, _model_spec(args.model, args.marker, args.df))
            table = compare_update_policies(fit, cohort, interval_a=a, interval_b=b)
        table_path = out / "update_comparison.csv"
        write_update_comparison_csv(table, table_path)
        manifest = build_manifest(
            "evaluate", __version__, common, inputs, args.seed, [table_path]
        )
        manifest.write(out / "manifest.json")
        print(f"compared update intervals {a:g} vs {b:g} over {len(table.rows)} windows -> {out}")
        return 0

    accessor = _score_accessor(args, cohort)
    stem = f"{args.metric}_{args.mode}"
    outputs = []

    if args.subgroup:
        stratifier = parse_stratifier(args.subgroup, args.marker)
        if args.metric != "auc":
            raise DynrocError("--subgroup currently reports the AUC metric only")
        result = subgroup_curves(cohort, stratifier, accessor, span=args.span)
        if not result.curves:
            raise DynrocError("no subgroup had an evaluable case")
        csv_paths = {}
        parts = split_cohort(cohort, stratifier)
        for label, curve in result.curves.items():
            if args.bootstrap:
                grid = curve.grid

                def builder(c, _grid=grid):
                    return auc_curve(incident_percentiles(accessor, c.outcomes), grid=_grid, span=args.span)

                curve = bootstrap_bands(
                    builder, parts[label], replicates=args.bootstrap, seed=args.seed,
                    threads=args.threads,
                )
            path = out / f"{stem}_{label}.csv"
            write_accuracy_csv(curve, path)
            csv_paths[label] = path
            outputs.append(path)
        for label, reason in result.unavailable.items():
            print(f"subgroup {label}: unavailable ({reason})")
        svg_path = out / f"{stem}.svg"
        render_accuracy_plot(csv_paths, svg_path, kind="auc")
        outputs.append(svg_path)
        manifest = build_manifest("evaluate", __version__, common, inputs, args.seed, outputs)
        manifest.write(out / "manifest.json")
        print(f"wrote {len(csv_paths)} subgroup curves -> {out}")
        return 0

    percentiles = incident_percentiles(accessor, cohort.outcomes)
    if len(percentiles) == 0:
        raise DynrocError("no evaluable cases (every risk set lacked controls)")
    grid = default_grid(percentiles.times())

    if args.metric == "auc":
        def builder(c):
            return auc_curve(incident_percentiles(accessor, c.outcomes), grid=grid, span=args.span)
    else:
        def builder(c):
            return tpf_at_fpf_curve(accessor, c.outcomes, fpf=args.fpf, grid=grid, span=args.span)

    if args.bootstrap:
        curve = bootstrap_bands(
            builder, cohort, replicates=args.bootstrap, seed=args.seed, threads=args.threads
        )
    else:
        curve = builder(cohort)
    csv_path = out / f"{stem}.csv"
    write_accuracy_csv(curve, csv_path)
    svg_path = out / f"{stem}.svg"
    render_accuracy_plot({"": csv_path}, svg_path, kind=curve.kind, fpf=curve.fpf)
    outputs = [csv_path, svg_path]
    if percentiles.skipped_no_controls:
        print(f"note: skipped {percentiles.skipped_no_controls} case(s) with no controls")
    manifest = build_manifest("evaluate", __version__, common, inputs, args.seed, outputs)
    manifest.write(out / "manifest.json")
    print(f"wrote {stem}.csv and {stem}.svg ({len(grid)} grid points) -> {out}")
    return 0


def cmd_km(args) -> int:
    from .plots import render_km_plot

    cohort = _load_analysis_cohort(args)
    out = _prepare_out_dir(args.out_dir)
    outputs = []
    csv_paths = {}
    if args.subgroup:
        stratifier = parse_stratifier(args.subgroup, args.marker)
        parts = split_cohort(cohort, stratifier)
        for label, sub in parts.items():
            curve = kaplan_meier(sub.outcomes)
            path = out / f"km_{label}.csv"
            write_step_curve_csv(curve, path)
            csv_paths[label] = path
            outputs.append(path)
    else:
        curve = kaplan_meier(cohort.outcomes)
        path = out / "km.csv"
        write_step_curve_csv(curve, path)
        csv_paths[""] = path
        outputs.append(path)
    svg_path = out / "km.svg"
    render_km_plot(csv_paths, svg_path)
    outputs.append(svg_path)
    manifest = build_manifest(
        "km",
        __version__,
        parameters={"marker": args.marker, "subgroup": args.subgroup},
        input_paths={"patients": args.patients, "records": args.records},
        seed=None,
        outputs=outputs,
    )
    manifest.write(out / "manifest.json")
    print(f"wrote {len(csv_paths)} KM curve(s) -> {out}")
    return 0


def _add_data_flags(p) -> None:
    p.add_argument("--patients", required=True, help="patients.csv path")
    p.add_argument("--records", required=True, help="records.csv (long-format measurements)")
    p.add_argument("--marker", default=DEFAULT_MARKER, help="marker name in records.csv")


def build_parser() -> _Parser:
    parser = _Parser(prog="dynroc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dynroc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic registry cohort")
    p.add_argument("--n", type=int, required=True, help="number of patients")
    p.add_argument("--beta", type=float, default=0.0, help="log-hazard slope per marker unit")
    p.add_argument("--lambda", dest="baseline_hazard", type=float, default=0.1,
                   help="baseline hazard (events per year)")
    p.add_argument("--drift", type=float, default=0.0, help="marker drift per year")
    p.add_argument("--noise-sd", type=float, default=0.0, help="sd of annual marker steps")
    p.add_argument("--censor-rate", type=float, default=0.0, help="exponential censoring rate")
    p.add_argument("--horizon", type=float, default=20.0, help="administrative censoring horizon")
    p.add_argument("--marker-dist", default="normal:0,1",
                   help="baseline marker law, normal:MEAN,SD or uniform:LO,HI")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", help="fit a Cox model on baseline data")
    _add_data_flags(p)
    p.add_argument("--model", choices=("base", "multivariate"), default="base")
    p.add_argument("--df", type=int, default=4,
                   help="spline degrees of freedom for continuous terms (1 = linear)")
    p.add_argument("--cv-folds", type=int, default=0,
                   help="also write cross-validated baseline scores with this many folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("score", help="time-varying risk scores from a saved fit")
    p.add_argument("--fit", required=True, help="model.json from the fit command")
    p.add_argument("--patients", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--interval", type=float, default=1.0, help="score refresh interval, years")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("evaluate", help="time-varying accuracy curves")
    _add_data_flags(p)
    p.add_argument("--model", choices=("base", "multivariate", "raw"), default="base",
                   help="Cox model for the score, or 'raw' for the marker itself")
    p.add_argument("--df", type=int, default=4,
                   help="spline degrees of freedom for continuous terms (1 = linear)")
    p.add_argument("--mode", choices=("baseline", "updated"), default="updated",
                   help="baseline: cross-validated baseline score; updated: refreshed score")
    p.add_argument("--metric", choices=("auc", "tpf"), default="auc")
    p.add_argument("--fpf", type=float, default=0.05, help="fixed false-positive fraction (tpf)")
    p.add_argument("--span", type=float, default=0.10, help="fraction of cases per window")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B",
                   help="patient-level bootstrap replicates for 95%% bands")
    p.add_argument("--cv-folds", type=int, default=10, help="folds for the baseline score")
    p.add_argument("--update-interval", type=float, default=1.0,
                   help="refresh interval for the updated score, years")
    p.add_argument("--subgroup", default=None,
                   help="marker_le:<x> | age_bands:<a,b> | sex | genotype")
    p.add_argument("--compare-intervals", default=None, metavar="A,B",
                   help="compare two update intervals; writes update_comparison.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("km", help="Kaplan-Meier survival curves")
    _add_data_flags(p)
    p.add_argument("--subgroup", default=None,
                   help="marker_le:<x> | age_bands:<a,b> | sex | genotype")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_km)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (DynrocError, ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"dynroc: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
