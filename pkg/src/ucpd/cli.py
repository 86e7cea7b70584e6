"""Command-line interface: simulate, compute, test, critvals, validate.

Settings come from an optional ``--config`` file of ``key = value`` lines
(keys are flag names without the leading dashes; ``-`` and ``_`` are
interchangeable) and from flags.  Flags win over the file, the file wins over
built-in defaults.

Exit status: 0 on success, 1 on a usage or input error, 2 on a numerical
failure.
"""

import argparse
import json
import os
import sys

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

from .changepoint import MCSettings, integral_test, sup_test
from .covariance import CovarianceModel, THEOREM2_VARIANTS, longrun_table
from .data import (
    FIELD_LABELS,
    EvalGrid,
    MalformedInputError,
    dump_json,
    read_series_csv,
    write_series_csv,
)
from .datagen import FAMILIES, GeneratorSpec, generate, inject_change
from .gaussian_limit import FUNCTIONALS, NumericalError, build_field, critical_value_table
from .kernels import BUILTIN_KERNELS, MARGINALS, fit_components, make_kernel
from .uprocess import FIELD_EVALUATORS
from .validation import report_json, validate_convergence

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

DEFAULTS = {
    "kernel": "difference",
    "kernel_params": "",
    "marginal": "uniform01",
    "components": "closed_form",
    "R": 1.0,
    "s_count": None,
    "t_stride": 1,
    "t_points": None,
    "m": 2000,
    "seed": 0,
    "alpha": "0.05",
    "functional": "sup_abs",
    "mu": None,
    "max_lag": None,
    "taper": "bartlett",
    "covariance": "derived",
    "threads": 1,
    "labels": "en,Wn,Rn",
    "family": "iid",
    "phi": 0.0,
    "coefficients": "",
    "burn_in": None,
    "n": 1000,
    "ns": "200,800,3200",
    "change_t0": None,
    "shift": 0.0,
    "format": "csv",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _add_common(p):
    p.add_argument("--config", help="key=value settings file; flags override it")
    p.add_argument("--output", help="output path")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="cap on worker and BLAS threads")


def _add_kernel(p):
    p.add_argument("--kernel", choices=sorted(BUILTIN_KERNELS))
    p.add_argument("--kernel-params", help="comma list such as a1=2,b2=0.5")
    p.add_argument("--marginal", choices=sorted(MARGINALS))


def _add_grid(p):
    p.add_argument("--R", type=float)
    p.add_argument("--s-count", type=int)
    p.add_argument("--t-stride", type=int)
    p.add_argument("--t-points", help="comma list of fractions k/n, replaces --t-stride")


def _add_generator(p):
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--phi", type=float)
    p.add_argument("--coefficients", help="MA coefficients, comma separated")
    p.add_argument("--burn-in", type=int)


def _add_mc(p):
    p.add_argument("--m", type=int)
    p.add_argument("--alpha")
    p.add_argument("--functional", choices=FUNCTIONALS)
    p.add_argument("--mu", help="comma list of non-negative weights, one per s-point")
    p.add_argument("--max-lag", type=int)
    p.add_argument("--taper", choices=("bartlett", "truncated"))
    p.add_argument("--covariance", choices=sorted(THEOREM2_VARIANTS))


def build_parser():
    parser = _Parser(prog="ucpd", description="U-process change-point toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="write a generated series to CSV")
    _add_common(p)
    _add_generator(p)
    p.add_argument("--marginal", choices=sorted(MARGINALS))
    p.add_argument("--n", type=int)
    p.add_argument("--change-t0", type=float, help="inject a shift after [n t0]")
    p.add_argument("--shift", type=float)

    p = sub.add_parser("compute", help="evaluate process fields on a grid")
    _add_common(p)
    p.add_argument("--input", help="single-column CSV series")
    _add_kernel(p)
    _add_grid(p)
    p.add_argument("--labels", help=f"comma list from {','.join(FIELD_LABELS)}")
    p.add_argument("--components", choices=("closed_form", "fitted"))
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("test", help="run the sup or mu-weighted change-point test")
    _add_common(p)
    p.add_argument("--input", help="single-column CSV series")
    _add_kernel(p)
    _add_grid(p)
    _add_mc(p)

    p = sub.add_parser("critvals", help="Monte Carlo critical values of the limit functionals")
    _add_common(p)
    p.add_argument("--input", help="series whose fitted long-run covariance is used")
    _add_kernel(p)
    _add_grid(p)
    _add_mc(p)
    _add_generator(p)
    p.add_argument("--n", type=int, help="n for the t-grid when no input is given")

    p = sub.add_parser("validate", help="convergence study of sup|e'_n|")
    _add_common(p)
    _add_kernel(p)
    _add_generator(p)
    p.add_argument("--R", type=float)
    p.add_argument("--s-count", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--ns", help="ascending comma list of sample sizes")
    return parser


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for row, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise UsageError(f"{path}:{row}: expected key = value, got {text!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve(parser, argv):
    """Merge flags, config file and defaults into a namespace."""
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    config = read_config(args.config) if args.config else {}
    for key, raw in config.items():
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, key) is None:
            act = actions[key]
            value = act.type(raw) if act.type else raw
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"config {key}={raw!r}: choose from {sorted(act.choices)}")
            setattr(args, key, value)
    for key in actions:
        if getattr(args, key, None) is None and key in DEFAULTS:
            setattr(args, key, DEFAULTS[key])
    return args


# -- commands -------------------------------------------------------------------


def _kernel_params(text):
    params = {}
    for tok in str(text or "").split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" not in tok:
            raise UsageError(f"kernel parameter {tok!r} is not name=value")
        k, v = tok.split("=", 1)
        params[k.strip()] = float(v)
    return params


def _model(args):
    return make_kernel(args.kernel, args.marginal, **_kernel_params(args.kernel_params))


def _grid(args, n):
    if args.s_count is not None and args.s_count < 1:
        raise UsageError("--s-count must be at least 1")
    if args.t_points:
        s = EvalGrid.default(n, args.R, args.s_count).s_points
        return EvalGrid.from_t_points(s, _floats(args.t_points), n, args.R)
    return EvalGrid.default(n, args.R, args.s_count, args.t_stride)


def _spec(args, n=None):
    return GeneratorSpec(
        family=args.family,
        marginal=args.marginal,
        n=args.n if n is None else n,
        seed=args.seed,
        burn_in=args.burn_in,
        phi=args.phi,
        coefficients=_floats(args.coefficients),
    )


def _need(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _alphas(args):
    return _floats(args.alpha)


def cmd_simulate(args, out):
    _need(args, "output")
    spec = _spec(args)
    sample = generate(spec)
    if args.change_t0 is not None:
        sample = inject_change(sample, args.change_t0, args.shift)
    write_series_csv(args.output, sample, header=json.dumps(sample.provenance, sort_keys=True))
    print(f"wrote {sample.n} values to {args.output}", file=out)


def cmd_compute(args, out):
    _need(args, "input", "output")
    sample = read_series_csv(args.input)
    labels = [lab.strip() for lab in args.labels.split(",") if lab.strip()]
    bad = [lab for lab in labels if lab not in FIELD_LABELS]
    if bad:
        raise UsageError(f"unknown labels {bad}; choose from {','.join(FIELD_LABELS)}")
    model = _model(args)
    if args.components == "fitted":
        model = fit_components(model.kernel_only(), sample)
    grid = _grid(args, sample.n)
    os.makedirs(args.output, exist_ok=True)
    for lab in labels:
        field = FIELD_EVALUATORS[lab](sample, model, grid)
        path = os.path.join(args.output, f"{lab}.{args.format}")
        if args.format == "csv":
            field.to_csv(path)
        else:
            field.to_json(path)
        print(f"{lab}: sup|.|={field.sup_abs():.6g} -> {path}", file=out)


def _mc(args):
    return MCSettings(args.m, args.seed, args.max_lag, args.taper, args.covariance)


def cmd_test(args, out):
    _need(args, "input")
    sample = read_series_csv(args.input)
    alphas = _alphas(args)
    if len(alphas) != 1:
        raise UsageError("test takes a single --alpha")
    grid = _grid(args, sample.n)
    kernel = _model(args)
    if args.functional == "sup_abs":
        report = sup_test(sample, grid, alphas[0], _mc(args), kernel)
    else:
        if args.mu is None:
            raise UsageError("--mu is required for the integral_mu functional")
        report = integral_test(sample, grid, _floats(args.mu), alphas[0], _mc(args), kernel)
    if args.output:
        report.to_json(args.output)
    print(report.summary(), file=out)


def cmd_critvals(args, out):
    _need(args, "output")
    kernel = _model(args)
    if args.input:
        sample = read_series_csv(args.input)
        grid = _grid(args, sample.n)
        cm = CovarianceModel("fitted", args.max_lag, args.taper, sample)
        C = longrun_table(cm, fit_components(kernel.kernel_only(), sample), grid.s_points)
    else:
        spec = _spec(args)
        grid = _grid(args, args.n)
        C = longrun_table(CovarianceModel("closed_form", args.max_lag, series_model=spec), kernel, grid.s_points)
    formula = THEOREM2_VARIANTS[args.covariance]
    field = build_field(grid, lambda s, t, s2, t2: formula(t, t2, s, s2, C))
    weights = _floats(args.mu) if args.mu is not None else None
    if args.functional == "integral_mu" and weights is None:
        raise UsageError("--mu is required for the integral_mu functional")
    table = critical_value_table(field, _alphas(args), args.functional, args.m, args.seed, weights)
    dump_json(table, args.output)
    for rec in table:
        print(f"alpha={rec['alpha']:g} {rec['functional']} critical_value={rec['value']:.6g}", file=out)


def cmd_validate(args, out):
    _need(args, "output")
    ns = _ints(args.ns)
    spec = _spec(args, n=max(ns) if ns else 2)
    report = validate_convergence(spec, ns, args.m, args.seed, kernel=args.kernel, R=args.R,
                                  s_count=11 if args.s_count is None else args.s_count,
                                  threads=args.threads)
    report_json(report, args.output)
    for row in report["rows"]:
        print(f"n={row['n']} ks={row['ks_distance']:.4f} mean_sup_Rn={row['mean_sup_Rn']:.4g}", file=out)


COMMANDS = {
    "simulate": cmd_simulate,
    "compute": cmd_compute,
    "test": cmd_test,
    "critvals": cmd_critvals,
    "validate": cmd_validate,
}


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = resolve(parser, argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        with threadpool_limits(limits=args.threads):
            COMMANDS[args.command](args, out)
    except MalformedInputError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except (NumericalError, linalg.LinAlgError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=err)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
