"""vgfit CLI - Variance-Gamma densities, fits and goodness-of-fit tests.

Usage:
    vgfit density [--params MU,DELTA,SIGMA,ALPHA,THETA] [--delta D ...] [--alpha A ...] [--order K]
    vgfit fit --input prices.csv [--model {avg,svg,clm}] [--init {moments,default,explicit}]
    vgfit ks --input prices.csv [--model clm | --summary AVG2_summary.json] [--null-density]
    vgfit simulate [--params ...] [--n COUNT] [--seed S]
    vgfit report AVG2_summary.json SVG2_summary.json ...

Every failure ends the process with one stderr line
``error kind=<kind> code=<exit>: <reason>`` and exit status 1 (usage),
2 (data) or 3 (numerical).
"""

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from scipy import integrate

from vgfit import (
    PARAM_NAMES,
    ClmParams,
    ConfigError,
    ConvergenceError,
    DataError,
    FitConfig,
    FitReport,
    FitSummary,
    FrftGrid,
    OutlierRule,
    ReturnSample,
    RunConfig,
    RunSpec,
    VgfitError,
    VgParams,
    __version__,
    clm_density,
    clm_loglik,
    density_grid,
    eval_at,
    filter_outliers,
    fit_clm,
    fit_mle,
    format_density_table,
    format_estimates_table,
    format_ks_table,
    format_trace_table,
    grid_moments,
    init_method_of_moments,
    ks_null_pdf,
    ks_test,
    load_config,
    load_prices,
    load_report,
    load_returns,
    log_returns,
    sample,
    save_grid,
    save_report,
    save_sample,
)
from vgfit.data import PRICE_COLUMNS, RETURN_COLUMN, artifact_header
from vgfit.variance_gamma import HESSIAN_PAIRS

logger = logging.getLogger("vgfit")

REPORT_ORDER = ["AVG1", "SVG1", "AVG2", "SVG2", "CLM"]
_INIT_SUFFIX = {"moments": "1", "default": "2", "explicit": "x"}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1 and a parsable reason."""

    def error(self, message):
        self.print_usage(sys.stderr)
        _fail(ConfigError(message))


def _fail(error: VgfitError):
    reason = str(error).replace("\n", "; ")
    print(f"error kind={error.kind} code={error.exit_code}: {reason}", file=sys.stderr)
    sys.exit(error.exit_code)


def _parse_params(text: str | None) -> VgParams | None:
    """Parse 'mu,delta,sigma,alpha,theta'."""
    if text is None:
        return None
    try:
        return VgParams.from_vector(float(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigError(f"--params expects five comma-separated numbers {','.join(PARAM_NAMES)}: {e}")


def _parse_outlier_rule(text: str) -> OutlierRule:
    """Parse 'none', 'KIND:THRESHOLD' or 'KIND:count=N' with KIND abs_threshold or z_score."""
    kind, _, value = text.partition(":")
    try:
        if kind == "none":
            return OutlierRule()
        if value.startswith("count="):
            return OutlierRule(kind=kind, target_count=int(value[len("count="):]))
        return OutlierRule(kind=kind, threshold=float(value))
    except (ValueError, PydanticValidationError) as e:
        raise ConfigError(f"invalid --outlier-rule {text!r}: {e}")


def _resolve_config(args) -> RunConfig:
    """Config file (if any) with command-line overrides applied."""
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    updates = {}
    if hasattr(args, "a") and (args.a is not None or args.n is not None or args.gamma is not None):
        base = config.grid
        gamma = args.gamma if args.gamma is not None else (base.gamma if base.gamma != base.beta else None)
        updates["grid"] = FrftGrid.from_support(
            a=args.a if args.a is not None else base.a,
            n=args.n if args.n is not None else base.n,
            gamma=gamma,
        ).model_dump()
    if getattr(args, "scale", None) is not None:
        updates["scale"] = args.scale
    if getattr(args, "outlier_rule", None) is not None:
        updates["outlier_rule"] = _parse_outlier_rule(args.outlier_rule).model_dump()
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if not updates:
        return config
    try:
        return RunConfig.model_validate({**config.model_dump(), **updates})
    except PydanticValidationError as e:
        raise ConfigError(f"invalid option: {e.errors()[0]['msg']}")


def _load_sample(path: str | None, config: RunConfig) -> ReturnSample:
    """Returns from a price CSV or a return CSV, filtered by the configured rule."""
    if path is None:
        raise ConfigError("--input is required")
    header = ""
    try:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith("#"):
                    header = line.strip()
                    break
    except OSError as e:
        raise DataError(f"cannot read file: {e}", path=path)
    columns = [c.strip() for c in header.split(",")]
    if columns == PRICE_COLUMNS:
        returns = log_returns(load_prices(path), scale=config.scale)
    elif RETURN_COLUMN in columns:
        returns = load_returns(path)
    else:
        raise DataError(f"expected a price ({','.join(PRICE_COLUMNS)}) or '{RETURN_COLUMN}' CSV", path=path)
    filtered = filter_outliers(returns, config.outlier_rule)
    logger.info("sample of %d returns (%d removed)", len(filtered), len(filtered.removed))
    return filtered


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fit(sample: ReturnSample, model: str, init: str, explicit: VgParams | None, config: RunConfig) -> FitReport:
    if model == "clm":
        params = fit_clm(sample)
        return FitReport(
            label="CLM", model_tag="CLM", params=params, loglik=clm_loglik(sample, params), n_obs=len(sample)
        )
    symmetric = model == "svg"
    if init == "moments":
        start = init_method_of_moments(sample, symmetric=symmetric)
    elif init == "explicit":
        if explicit is None:
            raise ConfigError("--init explicit requires --params")
        start = explicit
    else:
        start = VgParams.default()
    fit_config = FitConfig(
        init=start, max_iters=config.max_iters, grad_tol=config.grad_tol, symmetric=symmetric, grid=config.grid
    )
    return fit_mle(sample, fit_config, label=f"{model.upper()}{_INIT_SUFFIX[init]}")


def cmd_density(args):
    """Tabulate densities (and derivatives) on the FRFT output grid."""
    config = _resolve_config(args)
    params = _parse_params(args.params)
    if params is None and args.summary:
        fitted = load_report(args.summary).report.params
        if isinstance(fitted, ClmParams):
            raise ConfigError("density needs VG parameters; the summary holds a CLM fit")
        params = fitted
    params = params or VgParams.default()
    if args.delta and args.alpha:
        raise ConfigError("sweep either --delta or --alpha, not both")

    variants = [("f", params)]
    sweep = {}
    for name in ("delta", "alpha"):
        values = getattr(args, name)
        if values:
            sweep[name] = values
            variants = [(f"f_{name}={v:g}", VgParams(**{**params.model_dump(), name: v})) for v in values]

    spec = RunSpec(
        subcommand="density", params=params, config=config, input=args.input,
        summaries=[args.summary] if args.summary else [], out_dir=args.out_dir, sweep=sweep,
        histogram_bins=args.histogram, order=args.order,
    )
    grid = config.grid
    tolerance = args.tail_tolerance if args.strict_tail else None
    columns = {"x": grid.output_nodes}
    moment_rows = []
    for label, p in variants:
        dg = density_grid(p, grid, order=args.order, tail_tolerance=tolerance)
        columns[label] = dg.f
        if dg.df is not None:
            for j, pname in enumerate(PARAM_NAMES):
                columns[f"{label}:d_{pname}"] = dg.df[j]
        if dg.d2f is not None:
            for idx, (k, j) in enumerate(HESSIAN_PAIRS):
                columns[f"{label}:d2_{PARAM_NAMES[k]}_{PARAM_NAMES[j]}"] = dg.d2f[idx]
        moment_rows.append((label, dg.mass(), grid_moments(dg)))

    out = _out_dir(args)
    save_grid(out / "density.csv", columns, spec)
    print(format_density_table(moment_rows, args.format))

    if args.histogram:
        data = _load_sample(args.input, config)
        counts, edges = np.histogram(data.values, bins=args.histogram, density=True)
        centres = (edges[:-1] + edges[1:]) / 2
        clm = fit_clm(data)
        dg = density_grid(params, grid, tail_tolerance=None)
        save_grid(
            out / "histogram.csv",
            {"x": centres, "empirical": counts, "vg": eval_at(dg, centres), "clm": clm_density(clm.mu, clm.sigma, centres)},
            spec,
        )


def cmd_fit(args):
    """Fit a model by maximum likelihood and test it with KS."""
    config = _resolve_config(args)
    explicit = _parse_params(args.params)
    spec = RunSpec(
        subcommand="fit", model=args.model, init=args.init, params=explicit, config=config,
        input=args.input, out_dir=args.out_dir,
    )
    data = _load_sample(args.input, config)
    report = _fit(data, args.model, args.init, explicit, config)
    ks = ks_test(data, report.params, config.grid)
    summary = FitSummary(
        tool="vgfit", version=__version__, spec=spec, source=data.source_meta,
        removed=data.removed, report=report, ks=ks,
    )
    save_report(summary, _out_dir(args))

    if report.iterations:
        print(format_trace_table(report.iterations, args.format))
    print(format_estimates_table([report], args.format))
    print(format_ks_table([(report.label, ks)], args.format))
    if not report.converged:
        raise ConvergenceError(
            f"{report.label} stopped after {len(report.iterations)} iterates above grad_tol={config.grad_tol:g}"
        )


def cmd_ks(args):
    """KS goodness-of-fit of a fitted model, optionally with the null density of D_n."""
    config = _resolve_config(args)
    spec = RunSpec(
        subcommand="ks", model=args.model, config=config, input=args.input,
        summaries=[args.summary] if args.summary else [], out_dir=args.out_dir,
        null_density=args.null_density,
    )
    out = _out_dir(args)
    n = args.sample_size

    if args.input:
        data = _load_sample(args.input, config)
        if args.summary:
            report = load_report(args.summary).report
        else:
            report = _fit(data, args.model, "default", None, config)
        ks = ks_test(data, report.params, report.grid or config.grid)
        save_grid(
            out / f"ks_{report.label}.csv",
            {"model": [report.label], "d_n": [ks.d_n], "d_plus": [ks.d_plus], "d_minus": [ks.d_minus],
             "n": [ks.n], "p_value": [ks.p_value]},
            spec,
        )
        print(format_ks_table([(report.label, ks)], args.format))
        n = n or ks.n
    elif not args.null_density:
        raise ConfigError("ks needs --input (or --null-density with --sample-size)")

    if args.null_density:
        if not n:
            raise ConfigError("--null-density needs --input or --sample-size")
        d = np.linspace(0.2, 2.4, 221) / math.sqrt(n)
        pdf = ks_null_pdf(n, d)
        save_grid(out / "ks_null_density.csv", {"d": d, "pdf": pdf}, spec)
        mass = integrate.trapezoid(pdf, d)
        mean = integrate.trapezoid(d * pdf, d) / mass
        sd = math.sqrt(integrate.trapezoid((d - mean) ** 2 * pdf, d) / mass)
        logger.info("null density of D_%d: mass %.6f, mean %.6f, sd %.6f", n, mass, mean, sd)


def cmd_simulate(args):
    """Draw a synthetic VG return sample."""
    config = _resolve_config(args)
    params = _parse_params(args.params) or VgParams.default()
    spec = RunSpec(subcommand="simulate", params=params, config=config, out_dir=args.out_dir, count=args.count)
    values = sample(params, args.count, config.seed)
    save_sample(
        ReturnSample(values=values, source_meta=f"simulated seed={config.seed}"),
        _out_dir(args) / "sample.csv",
        spec,
    )


def cmd_report(args):
    """Merge fit summaries into one comparison table."""
    summaries = [load_report(path) for path in args.summaries]
    if not summaries:
        raise ConfigError("report needs at least one summary file")

    def order(s: FitSummary):
        label = s.report.label
        return (REPORT_ORDER.index(label) if label in REPORT_ORDER else len(REPORT_ORDER), label)

    summaries.sort(key=order)
    spec = RunSpec(subcommand="report", summaries=list(args.summaries), out_dir=args.out_dir)
    text = "\n\n".join([
        format_estimates_table([s.report for s in summaries], args.format),
        format_ks_table([(s.report.label, s.ks) for s in summaries if s.ks is not None], args.format),
    ])
    print(text)
    if args.format == "markdown":
        out = _out_dir(args) / "report.md"
        header = f"<!-- vgfit {__version__} spec: {spec.model_dump_json()} -->\n"
    else:
        out = _out_dir(args) / "report.txt"
        header = artifact_header(spec)
    out.write_text(f"{header}{text}\n", encoding="utf-8")


def _add_common(parser: argparse.ArgumentParser, grid: bool = True):
    parser.add_argument("--config", type=str, default=None, help="Run config file (YAML or JSON)")
    if grid:
        parser.add_argument("--a", type=float, default=None, help="CF support width (default: 20)")
        parser.add_argument("--n", type=int, default=None, help="FRFT grid size, a power of two (default: 2048)")
        parser.add_argument("--gamma", type=float, default=None, help="Output step (default: a/n)")
        parser.add_argument("--scale", type=float, default=None, help="Return multiplier (default: 100)")
        parser.add_argument(
            "--outlier-rule", type=str, default=None,
            help="none, abs_threshold:T, z_score:K or KIND:count=N (default: none)",
        )
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: 0)")
    parser.add_argument("--out-dir", type=str, default=".", help="Directory for artifacts (default: .)")
    parser.add_argument(
        "--format", "-f", type=str, choices=["ascii", "markdown"], default="ascii",
        help="Table format (default: ascii)",
    )
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v for INFO, -vv for DEBUG")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vgfit",
        description="vgfit: Variance-Gamma return models via fractional Fourier inversion",
    )
    parser.add_argument("--version", action="version", version=f"vgfit {__version__}")
    subparsers = parser.add_subparsers(
        title="subcommands",
        help="Use 'vgfit <command> --help' for command-specific help",
        dest="command",
        parser_class=_Parser,
    )

    density_parser = subparsers.add_parser("density", help="Tabulate VG densities on the FRFT grid")
    _add_common(density_parser)
    density_parser.add_argument("--params", type=str, default=None, help="mu,delta,sigma,alpha,theta")
    density_parser.add_argument("--summary", type=str, default=None, help="Take parameters from a fit summary")
    density_parser.add_argument("--delta", type=float, action="append", help="Sweep delta (repeatable)")
    density_parser.add_argument("--alpha", type=float, action="append", help="Sweep alpha (repeatable)")
    density_parser.add_argument("--order", type=int, choices=[0, 1, 2], default=0, help="Derivative order")
    density_parser.add_argument("--histogram", type=int, default=None, help="Histogram bins of --input vs fitted densities")
    density_parser.add_argument("--input", type=str, default=None, help="Price or return CSV (for --histogram)")
    density_parser.add_argument("--strict-tail", action="store_true", help="Fail when the CF has not decayed")
    density_parser.add_argument("--tail-tolerance", type=float, default=1e-6, help="Tail limit for --strict-tail")
    density_parser.set_defaults(func=cmd_density)

    fit_parser = subparsers.add_parser("fit", help="Maximum-likelihood fit with KS test")
    _add_common(fit_parser)
    fit_parser.add_argument("--input", type=str, default=None, help="Price or return CSV")
    fit_parser.add_argument("--model", choices=["avg", "svg", "clm"], default="avg", help="Model (default: avg)")
    fit_parser.add_argument(
        "--init", choices=["moments", "default", "explicit"], default="default", help="Starting values"
    )
    fit_parser.add_argument("--params", type=str, default=None, help="Explicit init mu,delta,sigma,alpha,theta")
    fit_parser.set_defaults(func=cmd_fit)

    ks_parser = subparsers.add_parser("ks", help="Kolmogorov-Smirnov test of a fitted model")
    _add_common(ks_parser)
    ks_parser.add_argument("--input", type=str, default=None, help="Price or return CSV")
    ks_parser.add_argument("--model", choices=["avg", "svg", "clm"], default="clm", help="Model to fit when no --summary")
    ks_parser.add_argument("--summary", type=str, default=None, help="Fit summary JSON with the parameters")
    ks_parser.add_argument("--null-density", action="store_true", help="Write the null density of D_n")
    ks_parser.add_argument("--sample-size", type=int, default=None, help="n for --null-density without --input")
    ks_parser.set_defaults(func=cmd_ks)

    simulate_parser = subparsers.add_parser("simulate", help="Draw a synthetic VG return sample")
    _add_common(simulate_parser, grid=False)
    simulate_parser.add_argument("--params", type=str, default=None, help="mu,delta,sigma,alpha,theta")
    simulate_parser.add_argument("--count", "--n", dest="count", type=int, default=1000, help="Sample size")
    simulate_parser.set_defaults(func=cmd_simulate)

    report_parser = subparsers.add_parser("report", help="Compare fit summaries")
    _add_common(report_parser, grid=False)
    report_parser.add_argument("summaries", nargs="*", help="Summary JSON files")
    report_parser.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None):
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        sys.exit(0)

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)

    try:
        args.func(args)
    except VgfitError as e:
        _fail(e)
    except PydanticValidationError as e:
        _fail(ConfigError(f"invalid value: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}"))


if __name__ == "__main__":
    main()
