"""Command-line front end over CSV/JSON files.

Subcommands: validate, eval, integral-range, simulate, predict, fit, mc-study.
Exit codes: 0 success (and valid kernel), 2 invalid kernel parameters,
1 usage or input-file error.  Every output artifact embeds the tool version,
the resolved configuration and the seed, and re-running with the same
configuration reproduces the numeric payload byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, kernels, mle, sim
from .covmat import PointSet, assemble, simple_krige
from .errors import DomainError, HyperkernelError, InvalidKernelError

USAGE_ERROR = 1
INVALID_KERNEL = 2


class _InputError(Exception):
    """Bad or missing input file; maps to the usage exit code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_ERROR)


# ---------------------------------------------------------------------------
# deterministic serialisation (floats at 17 significant digits)
# ---------------------------------------------------------------------------


def _float_str(x):
    x = float(x)
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _json_str(obj):
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_str(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_str(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj)!r}")


def _csv_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _meta_line(config, seed):
    meta = {"tool": "hyperkernel", "version": __version__, "seed": seed, "config": config}
    return "# " + _json_str(meta)


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_csv(path, header, rows, config, seed):
    lines = [_meta_line(config, seed), ",".join(header)]
    lines.extend(",".join(_csv_cell(v) for v in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


def _read_table(path):
    """Parse a CSV with a header row; '#' lines are ignored.

    Returns (header, rows as float lists).  Raises _InputError naming the
    offending file line on malformed numeric cells.
    """
    header = None
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise _InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if header is None:
                header = [c.strip() for c in cells]
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise _InputError(f"{path}: malformed row at line {lineno}: {exc}") from exc
            if len(rows[-1]) != len(header):
                raise _InputError(
                    f"{path}: line {lineno} has {len(rows[-1])} cells, expected {len(header)}"
                )
    if header is None:
        raise _InputError(f"{path}: missing header row")
    return header, rows


def _load_points_values(path):
    header, rows = _read_table(path)
    if "value" not in header:
        raise _InputError(f"{path}: expected a 'value' column")
    vi = header.index("value")
    data = np.asarray(rows, dtype=float)
    coord_idx = [i for i, h in enumerate(header) if h != "value"]
    return PointSet(data[:, coord_idx]), data[:, vi]


# ---------------------------------------------------------------------------
# kernel construction from flags
# ---------------------------------------------------------------------------

_FAMILIES = ("matern", "gw", "gh", "h", "h-reparam-b", "h-reparam-mu")

_REQUIRED_FLAGS = {
    "matern": ("nu", "alpha"),
    "gw": ("kappa", "mu", "beta"),
    "gh": ("delta", "beta", "gamma", "a"),
    "h": ("kappa", "mu", "a"),
    "h-reparam-b": ("kappa", "mu", "alpha"),
    "h-reparam-mu": ("kappa", "mu", "alpha"),
}


def _add_kernel_flags(p, lists=False):
    conv = str if lists else float
    p.add_argument("--family", required=True, choices=_FAMILIES)
    p.add_argument("--d", required=True, type=int, help="ambient dimension")
    for flag in ("nu", "alpha", "kappa", "mu", "beta", "gamma", "delta", "a"):
        p.add_argument(f"--{flag}", type=conv)


def _build_spec(args, parser, overrides=None):
    family = args.family
    vals = {}
    for flag in _REQUIRED_FLAGS[family]:
        v = (overrides or {}).get(flag, getattr(args, flag))
        if v is None:
            parser.error(f"--{flag} is required for --family {family}")
        vals[flag] = float(v)
    d = args.d
    if family == "matern":
        return kernels.Matern(vals["nu"], vals["alpha"], d)
    if family == "gw":
        return kernels.GeneralizedWendland(vals["kappa"], vals["mu"], vals["beta"], d)
    if family == "gh":
        return kernels.GaussHypergeometric(vals["delta"], vals["beta"], vals["gamma"], vals["a"], d)
    if family == "h":
        return kernels.Hypergeometric(vals["kappa"], vals["mu"], vals["a"], d)
    if family == "h-reparam-b":
        return kernels.HypergeometricBSupport(vals["kappa"], vals["mu"], vals["alpha"], d)
    return kernels.HypergeometricMuSupport(vals["kappa"], vals["mu"], vals["alpha"], d)


def _spec_config(args):
    cfg = {"family": args.family, "d": args.d}
    for flag in _REQUIRED_FLAGS[args.family]:
        cfg[flag] = float(getattr(args, flag))
    return cfg


def _grid_design(args, parser):
    lo = [float(v) for v in args.lower.split(",")]
    hi = [float(v) for v in args.upper.split(",")]
    if len(lo) != len(hi):
        parser.error("--lower and --upper must have the same dimension")
    return sim.GridDesign(
        args.increments,
        tuple(zip(lo, hi)),
        perturbation_halfwidth=args.perturbation,
        seed=args.grid_seed,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_validate(args, parser):
    spec = _build_spec(args, parser)
    report = kernels.validate(spec)
    payload = {
        "valid": report.valid,
        "binding_constraint": report.binding_constraint,
        "lower_bound_mu": report.lower_bound_mu,
        "tool": "hyperkernel",
        "version": __version__,
        "seed": None,
        "config": _spec_config(args),
    }
    sys.stdout.write(_json_str(payload) + "\n")
    return 0 if report.valid else INVALID_KERNEL


def _cmd_eval(args, parser):
    spec = _build_spec(args, parser)
    kernels._require_valid(spec)
    xmax = args.xmax
    if xmax is None:
        support = kernels.effective_support(spec, check=False)
        if not math.isfinite(support):
            parser.error("--xmax is required for globally supported kernels")
        xmax = support
    if args.closed_form and args.general:
        parser.error("--closed-form and --general are mutually exclusive")
    method = "auto"
    if args.closed_form:
        method = "closed_form"
    if args.general:
        method = "general"
    xs = np.linspace(0.0, xmax, args.steps)
    phis = kernels.correlation(spec, xs, method=method)
    config = _spec_config(args)
    config.update({"xmax": xmax, "steps": args.steps, "method": method})
    _write_csv(args.out, ["x", "correlation"], zip(xs, phis), config, None)
    return 0


def _cmd_integral_range(args, parser):
    lists = {}
    for flag in _REQUIRED_FLAGS[args.family]:
        raw = getattr(args, flag)
        if raw is None:
            parser.error(f"--{flag} is required for --family {args.family}")
        lists[flag] = [float(v) for v in str(raw).split(",")]
    names = list(lists)
    rows = []

    def rec(i, chosen):
        if i == len(names):
            spec = _build_spec(args, parser, overrides=chosen)
            result = kernels.integral_range(spec)
            rows.append(
                [args.family, args.d]
                + [chosen[nm] for nm in names]
                + [result.value, result.method]
            )
            return
        for v in lists[names[i]]:
            rec(i + 1, {**chosen, names[i]: v})

    rec(0, {})
    config = {"family": args.family, "d": args.d, **{nm: lists[nm] for nm in names}}
    _write_csv(
        args.out, ["family", "d"] + names + ["integral_range", "method"], rows, config, None
    )
    return 0


def _points_from_args(args, parser):
    if args.points is not None:
        header, rows = _read_table(args.points)
        coords = np.asarray(rows, dtype=float)
        return PointSet(coords)
    return sim.perturbed_grid(_grid_design(args, parser))


def _cmd_simulate(args, parser):
    spec = _build_spec(args, parser)
    points = _points_from_args(args, parser)
    if args.tukey_h is not None:
        fields = sim.simulate_gaussian(spec, 1.0, args.nugget, points, args.n_reps, args.seed)
        fields = sim.tukey_h(fields, math.sqrt(args.sigma2), args.tukey_h)
    else:
        fields = sim.simulate_gaussian(spec, args.sigma2, args.nugget, points, args.n_reps, args.seed)
    config = _spec_config(args)
    config.update(
        {
            "sigma2": args.sigma2,
            "nugget": args.nugget,
            "n_reps": args.n_reps,
            "tukey_h": args.tukey_h,
        }
    )
    header = [f"x{i + 1}" for i in range(points.dim)] + [
        f"rep{j + 1}" for j in range(args.n_reps)
    ]
    rows = np.hstack([points.coords, fields])
    _write_csv(args.out, header, rows, config, args.seed)
    return 0


def _cmd_predict(args, parser):
    spec = _build_spec(args, parser)
    data_points, data_values = _load_points_values(args.data)
    header, rows = _read_table(args.targets)
    tdata = np.asarray(rows, dtype=float)
    truth = None
    if "value" in header:
        truth = tdata[:, header.index("value")]
        tcoords = tdata[:, [i for i, h in enumerate(header) if h != "value"]]
    else:
        tcoords = tdata
    targets = PointSet(tcoords)
    if targets.dim != data_points.dim:
        raise DomainError("target dimension does not match data dimension")
    preds, variances = simple_krige(
        spec, args.sigma2, args.nugget, data_points, data_values, targets
    )
    config = _spec_config(args)
    config.update({"sigma2": args.sigma2, "nugget": args.nugget, "data": args.data, "targets": args.targets})
    out_header = [f"x{i + 1}" for i in range(targets.dim)] + ["prediction", "variance"]
    out_rows = np.hstack([targets.coords, preds[:, None], variances[:, None]])
    _write_csv(args.out, out_header, out_rows, config, None)
    if truth is not None:
        err = preds - truth
        metrics = {
            "rmse": float(np.sqrt(np.mean(err**2))),
            "mae": float(np.mean(np.abs(err))),
            "n_targets": len(truth),
            "tool": "hyperkernel",
            "version": __version__,
            "seed": None,
        }
        sys.stdout.write(_json_str(metrics) + "\n")
    return 0


def _cmd_fit(args, parser):
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    points, values = _load_points_values(args.data)

    class _Shim:
        pass

    shim = _Shim()
    shim.family = cfg["family"]
    shim.d = int(cfg["d"])
    for flag in ("nu", "alpha", "kappa", "mu", "beta", "gamma", "delta", "a"):
        setattr(shim, flag, cfg.get(flag))
    template = _build_spec(shim, parser)
    free = tuple(cfg.get("free", ("sigma2", "support_or_scale")))
    bounds = {k: tuple(v) for k, v in cfg.get("bounds", {}).items()}
    fit_config = mle.FitConfig(
        free_params=free,
        bounds=bounds,
        sigma2=float(cfg.get("sigma2", 1.0)),
        nugget=float(cfg.get("nugget", 0.0)),
        restarts=int(cfg.get("restarts", 5)),
        tolerance=float(cfg.get("tolerance", 1e-6)),
        max_iter=int(cfg.get("max_iter", 400)),
        seed=int(cfg.get("seed", 0)),
    )
    result = mle.fit(fit_config, template, points, values)
    try:
        errors = mle.std_errors(
            result.spec,
            result.estimates["sigma2"],
            points,
            values,
            free,
            nugget=result.estimates["nugget"],
        )
    except HyperkernelError:
        errors = None
    cov = assemble(
        result.spec, result.estimates["sigma2"], result.estimates["nugget"], points, storage="csr"
    )
    k = len(free)
    payload = {
        "estimates": result.estimates,
        "std_errors": errors,
        "loglik": result.loglik,
        "aic": 2.0 * k - 2.0 * result.loglik,
        "microergodic": result.microergodic,
        "converged": result.converged,
        "n_evals": result.n_evals,
        "pct_zero": cov.pct_zero,
        "tool": "hyperkernel",
        "version": __version__,
        "seed": fit_config.seed,
        "config": cfg,
    }
    _write_text(args.out, _json_str(payload) + "\n")
    return 0


def _cmd_mc_study(args, parser):
    design = _grid_design(args, parser)
    kappas = [float(v) for v in args.kappa.split(",")]
    mus = [float(v) for v in args.mu.split(",")]
    supports = [float(v) for v in args.a.split(",")]
    configs = [
        sim.McStudyConfig(k, m, a, sigma2=args.sigma2)
        for k in kappas
        for m in mus
        for a in supports
    ]
    report = sim.run_mc_study(
        configs,
        design,
        args.n_reps,
        args.seed,
        restarts=args.restarts,
        tolerance=args.tolerance,
        threads=args.threads,
    )
    config = {
        "kappa": kappas,
        "mu": mus,
        "a": supports,
        "sigma2": args.sigma2,
        "n_reps": args.n_reps,
        "increments": args.increments,
        "lower": args.lower,
        "upper": args.upper,
        "perturbation": args.perturbation,
        "grid_seed": args.grid_seed,
        "restarts": args.restarts,
    }
    header = [
        "kappa",
        "mu",
        "a",
        "bias_sigma2",
        "sd_sigma2",
        "bias_support",
        "sd_support",
        "bias_microergodic",
        "sd_microergodic",
        "n_used",
        "n_failed",
    ]
    rows = [
        [
            r.kappa,
            r.mu,
            r.a,
            r.bias_sigma2,
            r.sd_sigma2,
            r.bias_support,
            r.sd_support,
            r.bias_microergodic,
            r.sd_microergodic,
            r.n_used,
            r.n_failed,
        ]
        for r in report.rows
    ]
    _write_csv(args.out, header, rows, config, args.seed)
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _build_parser():
    parser = _Parser(prog="hyperkernel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hyperkernel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check kernel validity (exit 0 valid, 2 invalid)")
    _add_kernel_flags(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("eval", help="tabulate the correlation over a distance grid")
    _add_kernel_flags(p)
    p.add_argument("--xmax", type=float)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--closed-form", action="store_true", dest="closed_form")
    p.add_argument("--general", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("integral-range", help="integral-range table over parameter grids")
    _add_kernel_flags(p, lists=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_integral_range)

    p = sub.add_parser("simulate", help="draw Gaussian (or Tukey-h) random fields")
    _add_kernel_flags(p)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--nugget", type=float, default=0.0)
    p.add_argument("--n-reps", type=int, default=1, dest="n_reps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tukey-h", type=float, default=None, dest="tukey_h")
    p.add_argument("--points", default=None, help="CSV of locations (overrides grid flags)")
    p.add_argument("--increments", type=float, default=0.05)
    p.add_argument("--lower", default="0,0")
    p.add_argument("--upper", default="1,1")
    p.add_argument("--perturbation", type=float, default=0.0)
    p.add_argument("--grid-seed", type=int, default=0, dest="grid_seed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("predict", help="simple kriging at target locations")
    _add_kernel_flags(p)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--nugget", type=float, default=0.0)
    p.add_argument("--data", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("fit", help="maximum-likelihood fit from a data CSV and config JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("mc-study", help="bias/sd Monte Carlo study over (kappa, mu, a) cells")
    p.add_argument("--kappa", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n-reps", type=int, required=True, dest="n_reps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--increments", type=float, default=0.05)
    p.add_argument("--lower", default="0,0")
    p.add_argument("--upper", default="1,1")
    p.add_argument("--perturbation", type=float, default=0.01)
    p.add_argument("--grid-seed", type=int, default=0, dest="grid_seed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_mc_study)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    except _InputError as exc:
        sys.stderr.write(f"hyperkernel: error: {exc}\n")
        return USAGE_ERROR
    except InvalidKernelError as exc:
        sys.stderr.write(f"hyperkernel: invalid kernel: {exc}\n")
        return INVALID_KERNEL
    except (DomainError, HyperkernelError) as exc:
        sys.stderr.write(f"hyperkernel: error: {exc}\n")
        return INVALID_KERNEL
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"hyperkernel: error: {exc}\n")
        return USAGE_ERROR


def entrypoint():
    raise SystemExit(main())
