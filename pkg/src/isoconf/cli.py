"""Command line: ``isoconf {estimate,ci,quantile,simulate}``.

Exit codes: 0 success, 2 usage, 3 data, 4 numeric non-convergence.
"""

import argparse
import sys

import numpy as np

from . import __version__
from .bootstrap import (
    METHOD_BOOT,
    METHOD_BOOT_BIAS,
    METHOD_LR,
    METHOD_RATIO,
    BootstrapConfig,
    ci_type1,
    ci_type2,
    density_ratio_ci,
    replication_rngs,
)
from .current_status import CurrentStatusSample, lr_ci, mle
from .errors import CacheError, IsoconfError, NumericError
from .grenander import WeightedSample, grenander_mle, lr_ci_density
from .io import read_current_status_csv, read_times_csv, write_csv
from .limit_dist import (
    DEFAULT_LEVELS,
    LimitProcessConfig,
    build_table,
    cache_read,
    cache_write,
    reference_table,
)
from .sim_bench import (
    CURRENT_STATUS,
    DESK,
    MONOTONE_DENSITY,
    PAPER,
    TRUNCEXP02,
    UNIFORM02,
    DesignSpec,
    coverage_experiment,
    gen_current_status,
    lr_null_distribution_experiment,
    mu_scaling_experiment,
    coverage_grid,
)
from .smle import (
    asymptotic_bias_truncexp,
    ci_bandwidth,
    estimation_bandwidth,
    smle_cdf,
    smle_density,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MODELS = (CURRENT_STATUS, MONOTONE_DENSITY, "current-duration")
CI_METHODS = (METHOD_LR, METHOD_BOOT, METHOD_BOOT_BIAS, METHOD_RATIO)
TIGHT = "smle-boot-tight"

# figure -> (truth, methods, bandwidth rule, tightened alpha, kind)
FIGURES = {
    4: (UNIFORM02, (METHOD_LR, METHOD_BOOT), "ci", None, "coverage"),
    5: (UNIFORM02, (METHOD_LR, METHOD_BOOT), "ci", None, "bands"),
    6: (TRUNCEXP02, (METHOD_BOOT, METHOD_BOOT_BIAS), "estimation", None, "coverage"),
    7: (TRUNCEXP02, (METHOD_BOOT, TIGHT), "ci", 0.04, "coverage"),
    8: (TRUNCEXP02, (TIGHT, METHOD_LR), "ci", 0.04, "coverage"),
    9: (TRUNCEXP02, (TIGHT, METHOD_LR), "ci", 0.04, "bands"),
}


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bandwidth(text):
    if text == "auto":
        return text
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("bandwidth must be 'auto' or a positive number") from None
    if not h > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return h


def build_parser():
    parser = argparse.ArgumentParser(
        prog="isoconf",
        description="Isotonic MLEs, smoothed MLEs and pointwise confidence intervals.",
    )
    parser.add_argument("--version", action="version", version=f"isoconf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", required=True, help="output file")
    common.add_argument("--seed", type=int, default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", "-i", required=True, help="input CSV")
    data.add_argument("--model", choices=MODELS, default=CURRENT_STATUS)
    data.add_argument("--bandwidth", type=_bandwidth, default="auto")
    data.add_argument("--upper", type=float, help="right end b of the support (default: largest observation)")

    est = sub.add_parser("estimate", parents=[common, data], help="MLE or SMLE")
    kind = est.add_mutually_exclusive_group()
    kind.add_argument("--mle", dest="smooth", action="store_false", help="step-function MLE (default)")
    kind.add_argument("--smle", dest="smooth", action="store_true", help="smoothed MLE on a grid")
    est.add_argument("--grid", type=int, default=101, help="grid size for --smle")
    est.set_defaults(smooth=False)

    ci = sub.add_parser("ci", parents=[common, data], help="pointwise confidence band")
    ci.add_argument("--method", choices=CI_METHODS, default=METHOD_LR)
    ci.add_argument("--level", type=float, default=0.95)
    ci.add_argument("--points", type=_floats, help="evaluation points (default: b k/100, k=1..99)")
    ci.add_argument("--quantile", type=float, help="LR critical value")
    ci.add_argument("--quantile-cache", help="quantile cache written by 'isoconf quantile'")
    ci.add_argument("--B", type=int, default=1000, help="bootstrap replications")
    ci.add_argument("--tighten", type=float, help="alpha' used for the bootstrap percentiles")

    qu = sub.add_parser("quantile", parents=[common], help="simulate quantiles of the limit distribution")
    qu.add_argument("--levels", type=_floats, default=list(DEFAULT_LEVELS))
    qu.add_argument("--c", type=float, default=3.0, help="horizon")
    qu.add_argument("--delta", type=float, default=0.005, help="grid step")
    qu.add_argument("--R", type=int, default=10000, help="replications")

    sim = sub.add_parser("simulate", parents=[common], help="simulation experiments")
    what = sim.add_mutually_exclusive_group(required=True)
    what.add_argument("--figure", type=int, choices=sorted(FIGURES))
    what.add_argument("--experiment", choices=("coverage", "mu-scaling", "lr-null"))
    scale = sim.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", dest="paper_scale", action="store_false", default=False)
    scale.add_argument("--paper-scale", dest="paper_scale", action="store_true")
    sim.add_argument("--model", choices=(CURRENT_STATUS, MONOTONE_DENSITY), default=CURRENT_STATUS)
    sim.add_argument("--truth", choices=(UNIFORM02, TRUNCEXP02), default=UNIFORM02)
    sim.add_argument("--methods", default=f"{METHOD_LR},{METHOD_BOOT}")
    sim.add_argument("--points", type=_floats)
    sim.add_argument("--n", type=int)
    sim.add_argument("--n-list", type=_ints, default=[250, 1000, 4000])
    sim.add_argument("--R", type=int, help="replications")
    sim.add_argument("--B", type=int, help="bootstrap replications")
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--quantile", type=float)
    sim.add_argument("--quantile-cache")
    return parser


def _header(args):
    flags = " ".join(
        f"--{k.replace('_', '-')}={_flag_text(v)}"
        for k, v in sorted(vars(args).items())
        if k not in ("command", "output") and v is not None
    )
    return [f"isoconf {__version__}", f"command: {args.command}", f"seed: {args.seed}", f"flags: {flags}"]


def _flag_text(v):
    if isinstance(v, (list, tuple)):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _upper(args, times):
    return args.upper if args.upper is not None else float(np.max(times))


def _critical_value(args):
    if args.quantile is not None:
        return args.quantile
    if args.quantile_cache is not None:
        return cache_read(args.quantile_cache).lookup(args.level)
    raise UsageError(
        "the LR method needs a critical value: pass --quantile Q or --quantile-cache FILE "
        "(create one with 'isoconf quantile --output FILE')"
    )


def _load_current_status(path):
    times, deltas = read_current_status_csv(path)
    return CurrentStatusSample.from_unsorted(times, deltas, allow_ties=True)


def cmd_estimate(args):
    header = _header(args)
    if args.model == CURRENT_STATUS:
        sample = _load_current_status(args.input)
        F = mle(sample)
        if not args.smooth:
            write_csv(args.output, ["t", "value"], zip(F.knots, F.values), header)
            return
        b = _upper(args, sample.times)
        h = estimation_bandwidth(b, sample.n) if args.bandwidth == "auto" else args.bandwidth
        grid = np.linspace(0.0, b, args.grid)
        values = smle_cdf(F, h, b)(grid)
        write_csv(args.output, ["t", "value"], zip(grid, values), header + [f"bandwidth: {h!r}", f"upper: {b!r}"])
        return
    raw = read_times_csv(args.input)
    ws = WeightedSample.from_observations(raw)
    g = grenander_mle(ws)
    if not args.smooth:
        write_csv(args.output, ["t", "value"], zip(g.knots, g.values), header)
        return
    b = _upper(args, raw)
    h = estimation_bandwidth(b, ws.n) if args.bandwidth == "auto" else args.bandwidth
    grid = np.linspace(0.0, b, args.grid)
    values = smle_density(g, h, b)(grid)
    header = header + [f"bandwidth: {h!r}", f"upper: {b!r}"]
    if args.model == "current-duration":
        survival = np.clip(values / values[0], 0.0, 1.0)
        write_csv(args.output, ["t", "value", "survival"], zip(grid, values, survival), header)
    else:
        write_csv(args.output, ["t", "value"], zip(grid, values), header)


def _band_rows(band):
    for t, lo, hi, est in zip(band.t, band.lower, band.upper, band.estimate):
        yield t, lo, hi, est, band.method


BAND_COLUMNS = ["t", "lower", "upper", "estimate", "method"]


def cmd_ci(args):
    header = _header(args)
    if args.method == METHOD_LR:
        q = _critical_value(args)
        if args.model == CURRENT_STATUS:
            sample = _load_current_status(args.input)
            distinct = CurrentStatusSample(sample.times, sample.indicators)
            points = _points(args, sample.times)
            F = mle(distinct)
            rows = [(t, *lr_ci(distinct, t, args.level, q), F(t), METHOD_LR) for t in points]
        else:
            raw = read_times_csv(args.input)
            ws = WeightedSample.from_observations(raw)
            points = _points(args, raw)
            g = grenander_mle(ws)
            rows = [(t, *lr_ci_density(ws, t, args.level, q), g(t), METHOD_LR) for t in points]
        write_csv(args.output, BAND_COLUMNS, rows, header + [f"quantile: {q!r}"])
        return

    if args.method == METHOD_RATIO:
        raw = read_times_csv(args.input)
        b = _upper(args, raw)
        h = ci_bandwidth(b, len(raw)) if args.bandwidth == "auto" else args.bandwidth
        config = BootstrapConfig(B=args.B, level=args.level, tighten=args.tighten,
                                 bandwidth=h, seed=args.seed, upper=b)
        band = density_ratio_ci(raw, _points(args, raw), config)
    else:
        if args.model != CURRENT_STATUS:
            raise UsageError(f"--method {args.method} needs --model {CURRENT_STATUS}")
        sample = _load_current_status(args.input)
        b = _upper(args, sample.times)
        h = ci_bandwidth(b, sample.n) if args.bandwidth == "auto" else args.bandwidth
        config = BootstrapConfig(B=args.B, level=args.level, tighten=args.tighten,
                                 bandwidth=h, seed=args.seed, upper=b)
        points = _points(args, sample.times)
        if args.method == METHOD_BOOT:
            band = ci_type1(sample, points, config)
        else:
            band = ci_type2(sample, points, config, lambda t: asymptotic_bias_truncexp(t, h, b))
    extra = [f"bandwidth: {band.meta['h']!r}", f"upper: {band.meta['b']!r}",
             f"degenerate bootstrap draws: {int(np.sum(band.meta['invalid']))}"]
    write_csv(args.output, BAND_COLUMNS, _band_rows(band), header + extra)


def _points(args, times):
    if args.points:
        return np.array(args.points)
    return coverage_grid(_upper(args, times))


def cmd_quantile(args):
    config = LimitProcessConfig(c=args.c, delta=args.delta, R=args.R, seed=args.seed)
    cache_write(args.output, build_table(config, args.levels))


def _sim_quantile(args):
    if args.quantile is not None:
        return args.quantile, "flag"
    if args.quantile_cache is not None:
        return cache_read(args.quantile_cache).lookup(args.level), args.quantile_cache
    return reference_table().lookup(args.level), "built-in reference table"


def _coverage(design, methods, R, seed, points, args, bandwidth, tighten, B):
    q = None
    plain = [m for m in methods if m != TIGHT]
    noncov = {}
    if METHOD_LR in plain:
        q, _ = _sim_quantile(args)
    if plain:
        rep = coverage_experiment(design, plain, R, seed, points, args.level, q, B, bandwidth)
        noncov.update(rep.noncoverage)
    if TIGHT in methods:
        rep = coverage_experiment(design, [METHOD_BOOT], R, seed, points, args.level, None, B,
                                  bandwidth, tighten=tighten)
        noncov[TIGHT] = rep.noncoverage[METHOD_BOOT]
    return noncov, q


def cmd_simulate(args):
    profile = PAPER if args.paper_scale else DESK
    n = args.n or profile.n
    R = args.R or profile.R
    B = args.B or profile.B
    header = _header(args) + [f"profile: n={n} R={R} B={B}"]

    if args.experiment == "mu-scaling":
        truth = args.truth if args.model == CURRENT_STATUS else TRUNCEXP02
        med = mu_scaling_experiment(args.model, truth, args.n_list, R, args.seed)
        rows = [(nn, m, R) for nn, m in zip(args.n_list, med)]
        write_csv(args.output, ["n", "median_abs_mu", "reps"], rows, header + [f"truth: {truth}"])
        return
    if args.experiment == "lr-null":
        truth = args.truth if args.model == CURRENT_STATUS else TRUNCEXP02
        draws = lr_null_distribution_experiment(DesignSpec(args.model, truth, n), R, args.seed)
        write_csv(args.output, ["replication", "stat"], enumerate(draws), header + [f"truth: {truth}"])
        return

    if args.figure is not None:
        truth, methods, rule, tighten, kind = FIGURES[args.figure]
    else:
        truth, rule, tighten, kind = args.truth, "ci", None, "coverage"
        methods = tuple(m for m in args.methods.split(",") if m)
    design = DesignSpec(CURRENT_STATUS, truth, n)
    b = design.truth.upper
    bandwidth = ci_bandwidth(b, n) if rule == "ci" else estimation_bandwidth(b, n)
    points = np.array(args.points) if args.points else coverage_grid(b)
    header = header + [f"truth: {truth}", f"bandwidth: {bandwidth!r}"]

    if kind == "bands":
        rows = _one_sample_bands(design, methods, points, args, bandwidth, tighten, B)
        write_csv(args.output, BAND_COLUMNS, rows, header)
        return
    noncov, q = _coverage(design, methods, R, args.seed, points, args, bandwidth, tighten, B)
    if q is not None:
        header.append(f"quantile: {q!r}")
    rows = [(t, m, p, R) for m in methods for t, p in zip(points, noncov[m])]
    write_csv(args.output, ["t", "method", "noncoverage", "reps"], rows, header)


def _one_sample_bands(design, methods, points, args, bandwidth, tighten, B):
    rng = replication_rngs(args.seed, 1)[0]
    sample = gen_current_status(design, rng)
    b = design.truth.upper
    rows = []
    for method in methods:
        if method == METHOD_LR:
            q, _ = _sim_quantile(args)
            distinct = CurrentStatusSample(sample.times, sample.indicators)
            F = mle(distinct)
            rows += [(t, *lr_ci(distinct, t, args.level, q), F(t), METHOD_LR) for t in points]
        else:
            config = BootstrapConfig(B=B, level=args.level, bandwidth=bandwidth, seed=args.seed,
                                     upper=b, tighten=tighten if method == TIGHT else None)
            band = ci_type1(sample, points, config)
            rows += [(t, lo, hi, est, method) for t, lo, hi, est, _ in _band_rows(band)]
    return rows


COMMANDS = {
    "estimate": cmd_estimate,
    "ci": cmd_ci,
    "quantile": cmd_quantile,
    "simulate": cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"isoconf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"isoconf: numeric error: {exc} {exc.residuals}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IsoconfError, CacheError, OSError) as exc:
        print(f"isoconf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
