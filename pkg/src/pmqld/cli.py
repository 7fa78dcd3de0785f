"""Command-line interface.

Subcommands print one JSON report document to standard output (``--pretty``
renders a human-readable table instead). ``sample`` prints a seed line and
one draw per line unless ``--report`` is given.

Exit status: 0 success, 2 usage error, 3 data error, 4 estimation failure.
The default seed comes from the ``PMQLD_SEED`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import core, gof
from .errors import (
    ConvergenceError,
    DataError,
    DomainError,
    EstimationError,
    GofError,
    NumericError,
    ParameterError,
    PmqldError,
    StudyError,
)
from .estimation import confidence_intervals, fit_mme
from .mc_study import StudyConfig, run_study
from .sampling import RandomSource, sample, sample_zmpmqld
from .table import FrequencyTable
from .zeromod import ZmParams

__all__ = [
    "SCHEMA_VERSION",
    "REPORT_SCHEMA",
    "FIXTURES",
    "read_frequency_csv",
    "resolve_data",
    "make_report",
    "cmd_fit",
    "cmd_compare",
    "cmd_sample",
    "cmd_describe",
    "cmd_mc_study",
    "main",
]

SCHEMA_VERSION = "1.0"
SEED_ENV = "PMQLD_SEED"
FIXTURES = ("seizure", "roots", "consumer_goods")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command", "inputs", "results", "timestamps"],
    "properties": {
        "schema_version": {"type": "string"},
        "command": {"enum": ["fit", "compare", "sample", "describe", "mc-study"]},
        "inputs": {"type": "object"},
        "results": {"type": "object"},
        "timestamps": {
            "type": "object",
            "required": ["started", "finished"],
            "properties": {"started": {"type": "string"}, "finished": {"type": "string"}},
        },
    },
    "additionalProperties": False,
}


# ---------------------------------------------------------------------------
# data input


def read_frequency_csv(path):
    """Read a frequency table from CSV.

    Two layouts are accepted: a ``count,frequency`` header followed by
    integer pairs, or an ``x`` header followed by one observation per line.
    Lines starting with ``#`` and blank lines are ignored. A final count
    written as ``>=k`` marks an open class; its observations are taken as
    ``k``.

    Raises
    ------
    DataError
        On a missing file, a malformed row (with its line number) or an empty table.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_frequency_csv(text, str(path))


def parse_frequency_csv(text, source="<string>"):
    lines = [
        (i, line)
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise DataError(f"{source}: no data")
    header_no, header_line = lines[0]
    header = [h.strip().lower() for h in next(csv.reader([header_line]))]
    body = lines[1:]
    if not body:
        raise DataError(f"{source}: no data rows after the header")
    if header == ["count", "frequency"]:
        pairs = []
        open_tail = False
        for k, (lineno, line) in enumerate(body):
            cells = [c.strip() for c in next(csv.reader([line]))]
            if len(cells) != 2:
                raise DataError(f"{source}:{lineno}: expected 2 fields, got {len(cells)}")
            value, freq = cells
            if value.startswith(">="):
                if k != len(body) - 1:
                    raise DataError(f"{source}:{lineno}: only the last row may be an open '>=' class")
                open_tail = True
                value = value[2:].strip()
            pairs.append((_parse_int(value, source, lineno), _parse_int(freq, source, lineno)))
        values = [v for v, _ in pairs]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DataError(f"{source}: count values must be strictly increasing")
        return FrequencyTable(np.array(values), np.array([f for _, f in pairs]), open_tail)
    if header == ["x"]:
        obs = []
        for lineno, line in body:
            obs.append(_parse_int(line.strip(), source, lineno))
        return FrequencyTable.from_observations(obs)
    raise DataError(
        f"{source}:{header_no}: header must be 'count,frequency' or 'x', got {header_line.strip()!r}"
    )


def _parse_int(text, source, lineno):
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"{source}:{lineno}: {text!r} is not an integer") from None
    if value < 0:
        raise DataError(f"{source}:{lineno}: negative value {value}")
    return value


def fixture_path(name):
    stem = name[:-4] if name.endswith(".csv") else name
    if stem not in FIXTURES:
        raise DataError(f"unknown fixture {name!r}; bundled: {', '.join(FIXTURES)}")
    return resources.files("pmqld").joinpath("data", f"{stem}.csv")


def resolve_data(source):
    """Load a file path, or a bundled fixture by name (``seizure``, ``roots.csv``, ...)."""
    p = Path(source)
    if p.exists():
        return read_frequency_csv(p)
    with resources.as_file(fixture_path(p.name)) as fp:
        return read_frequency_csv(fp)


# ---------------------------------------------------------------------------
# reports


def _now():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc).isoformat()
    return _dt.datetime.now(tz=_dt.timezone.utc).isoformat()


def make_report(command, inputs, results, started):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "results": results,
        "timestamps": {"started": started, "finished": _now()},
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _table_inputs(source, table):
    return {"data": str(source), "n": table.n, "rows": table.rows, "open_tail": table.open_tail}


# ---------------------------------------------------------------------------
# commands


def cmd_fit(data, model="pmqld", method="mle", level=0.95):
    """Fit one model; the report carries estimates, errors, intervals and the chi-square test."""
    started = _now()
    table = resolve_data(data) if not isinstance(data, FrequencyTable) else data
    name = gof.canonical_model_name(model)
    method = method.lower()
    if method == "mme":
        if name != "PMQLD":
            raise ParameterError("the moment method is implemented for the PMQLD model only")
        fit = fit_mme(table)
    elif method == "mle":
        fit = gof.fit_model(name, table)
    else:
        raise ParameterError(f"unknown method {method!r}; use 'mle' or 'mme'")
    cells = gof.table_cells(table)
    observed = gof.observed_counts(table, cells)
    expected = gof.expected_counts(fit.params, table.n, cells)
    results = {"fit": fit.as_dict(), "at_boundary": bool(fit.diagnostics.get("at_boundary", False))}
    try:
        report = gof.chi_square_gof(observed, expected, fit.k, [c.label for c in cells])
        results["gof"] = report.as_dict()
    except PmqldError as exc:
        results["gof"] = None
        results["gof_error"] = str(exc)
    if fit.std_errors is not None:
        results["confidence_intervals"] = {
            k: list(v) for k, v in confidence_intervals(fit, level).items()
        }
        results["level"] = level
    inputs = _table_inputs(data, table) | {"model": name, "method": method.upper()}
    return make_report("fit", _jsonable(inputs), _jsonable(results), started), fit


def cmd_compare(data, models, threshold=1.0):
    started = _now()
    table = resolve_data(data) if not isinstance(data, FrequencyTable) else data
    comparison = gof.compare_models(table, models, threshold=threshold)
    inputs = _table_inputs(data, table) | {"models": [gof.canonical_model_name(m) for m in models]}
    return make_report("compare", _jsonable(inputs), _jsonable(comparison.as_dict()), started), comparison


def cmd_sample(theta, alpha, delta, n, seed, algorithm="alg2", phi=None):
    started = _now()
    params = core.new_params(theta, alpha, delta)
    rng = RandomSource(seed)
    if phi is not None:
        draws = sample_zmpmqld(ZmParams(phi, params), n, rng)
    else:
        draws = sample(params, n, rng, algorithm)
    inputs = {
        "theta": theta,
        "alpha": alpha,
        "delta": delta,
        "phi": phi,
        "n": n,
        "seed": seed,
        "algorithm": algorithm,
    }
    report = make_report("sample", _jsonable(inputs), {"samples": [int(v) for v in draws]}, started)
    return report, draws


def cmd_describe(theta, alpha, delta, xmax=10, quantiles=(0.25, 0.5, 0.75, 0.9, 0.99)):
    started = _now()
    params = core.new_params(theta, alpha, delta)
    if int(xmax) != xmax or xmax < 0:
        raise ParameterError(f"xmax must be a nonnegative integer, got {xmax}")
    xs = np.arange(int(xmax) + 1)
    m = core.moments(params)
    shape = core.classify_shape(params)
    results = {
        "table": [
            {"x": int(x), "pmf": float(core.pmf(params, int(x))), "cdf": float(core.cdf(params, int(x)))}
            for x in xs
        ],
        "moments": {
            "mean": m.mean,
            "variance": m.variance,
            "dispersion_index": m.dispersion_index,
            "skewness": m.skewness,
            "kurtosis": m.kurtosis,
            "raw_moments": list(m.raw_moments),
        },
        "shape": {
            "kind": shape.kind.value,
            "mode_locations": shape.mode_locations,
            "global_mode": shape.global_mode,
            "scanned_up_to": shape.scanned_up_to,
            "zero_mode_condition": shape.zero_mode_condition,
            "log_concave": shape.log_concave,
        },
        "quantiles": {repr(float(u)): core.quantile(params, u) for u in quantiles},
    }
    inputs = {"theta": theta, "alpha": alpha, "delta": delta, "xmax": int(xmax), "quantiles": list(quantiles)}
    return make_report("describe", _jsonable(inputs), _jsonable(results), started), results


def cmd_mc_study(theta, alpha, delta, replications=200, sizes=(60, 100, 200, 300), seed=0, algorithm="alg2"):
    started = _now()
    config = StudyConfig(core.new_params(theta, alpha, delta), tuple(sizes), replications, seed, algorithm)
    table = run_study(config)
    inputs = {
        "theta": theta,
        "alpha": alpha,
        "delta": delta,
        "replications": replications,
        "sizes": list(config.sample_sizes),
        "seed": seed,
        "algorithm": algorithm,
    }
    results = {"rows": table.as_dicts(), "csv": table.to_csv()}
    return make_report("mc-study", _jsonable(inputs), _jsonable(results), started), table


# ---------------------------------------------------------------------------
# rendering


def _fmt(v, digits=4):
    if v is None:
        return "-"
    return f"{v:.{digits}f}"


def render_pretty(report):
    cmd = report["command"]
    res = report["results"]
    out = []
    if cmd == "fit":
        fit = res["fit"]
        out.append(f"{fit['model']} ({fit['method']}), n = {fit['n_obs']}")
        ses = fit["std_errors"] or [None] * len(fit["names"])
        for name, est, se in zip(fit["names"], fit["estimates"], ses):
            out.append(f"  {name:>6} = {_fmt(est)}  (se {_fmt(se)})")
        out.append(f"  -2logL = {_fmt(fit['neg2_loglik'], 2)}   AIC = {_fmt(fit['aic'], 2)}")
        if res.get("gof"):
            g = res["gof"]
            out.append(f"  chi2 = {_fmt(g['statistic'], 2)}  df = {g['df']}  p = {_fmt(g['p_value'], 3)}")
    elif cmd == "compare":
        rows = res["rows"]
        names = [r["model"] for r in rows]
        out.append("count  observed  " + "  ".join(f"{n:>9}" for n in names))
        for i, (label, obs) in enumerate(zip(res["cells"], res["observed"])):
            exp = [f"{r['expected'][i]:9.2f}" if r["expected"] else f"{'-':>9}" for r in rows]
            out.append(f"{label:>5}  {obs:8d}  " + "  ".join(exp))
        for key, digits in (("neg2_loglik", 2), ("aic", 2)):
            vals = [f"{r['fit'][key]:9.{digits}f}" if r["fit"] else f"{'-':>9}" for r in rows]
            out.append(f"{key:>15}  " + "  ".join(vals))
        chi = [f"{r['gof']['statistic']:9.2f}" if r["gof"] else f"{'-':>9}" for r in rows]
        pv = [f"{r['gof']['p_value']:9.3f}" if r["gof"] else f"{'-':>9}" for r in rows]
        out.append(f"{'chi2':>15}  " + "  ".join(chi))
        out.append(f"{'p-value':>15}  " + "  ".join(pv))
        out.append(f"best by AIC: {res['best']}")
    elif cmd == "describe":
        out.append("   x        pmf        cdf")
        for row in res["table"]:
            out.append(f"{row['x']:4d}  {row['pmf']:.6g}  {row['cdf']:.6g}")
        for key, val in res["moments"].items():
            if key != "raw_moments":
                out.append(f"{key:>16} = {val:.6g}")
        out.append(f"shape: {res['shape']['kind']} at {res['shape']['mode_locations']}")
        for u, q in res["quantiles"].items():
            out.append(f"quantile({u}) = {q}")
    elif cmd == "mc-study":
        out.append(res["csv"].rstrip("\n"))
    elif cmd == "sample":
        out.extend(str(v) for v in res["samples"])
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# argument parsing


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_params(p, defaults=None):
    names = ("theta", "alpha", "delta")
    for name, default in zip(names, defaults or (None,) * 3):
        p.add_argument(f"--{name}", type=float, required=default is None, default=default)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pmqld", description="Poisson modified quasi-Lindley count models."
    )
    parser.add_argument("--pretty", action="store_true", help="human-readable output")
    # accept --pretty after the subcommand as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model to a frequency table")
    p.add_argument("--data", required=True, help="CSV path or bundled fixture name")
    p.add_argument("--model", default="pmqld", help=f"one of {', '.join(gof.MODEL_NAMES)}")
    p.add_argument("--method", default="mle", choices=["mle", "mme"])
    p.add_argument("--level", type=float, default=0.95, help="confidence level for Wald intervals")

    p = sub.add_parser("compare", parents=[common], help="fit several models and rank them by AIC")
    p.add_argument("--data", required=True)
    p.add_argument("--models", default="GD,NBD,PLD,PMQLD,ZMPMQLD")
    p.add_argument("--threshold", type=float, default=1.0, help="pool cells with expected below this")

    p = sub.add_parser("sample", parents=[common], help="draw PMQLD or zero-modified PMQLD variates")
    # without parameters, sample the PLD(1) member
    _add_params(p, defaults=(1.0, 1.0, 2.0))
    p.add_argument("--phi", type=float, default=None, help="zero-modification parameter")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--algorithm", default="alg2", choices=["alg1", "alg2"])
    p.add_argument("--report", action="store_true", help="emit a JSON report instead of lines")

    p = sub.add_parser("describe", parents=[common], help="tabulate pmf, cdf, moments, shape and quantiles")
    _add_params(p)
    p.add_argument("--xmax", type=int, default=10)
    p.add_argument("--quantiles", type=_float_list, default=[0.25, 0.5, 0.75, 0.9, 0.99])

    p = sub.add_parser("mc-study", parents=[common], help="Monte Carlo bias and MSE of the MLE")
    _add_params(p)
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--sizes", type=_int_list, default=[60, 100, 200, 300])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--algorithm", default="alg2", choices=["alg1", "alg2"])
    p.add_argument("--csv", default=None, help="also write the study table to this file")
    return parser


def _dispatch(args, stdout):
    if args.command == "fit":
        report, _ = cmd_fit(args.data, args.model, args.method, args.level)
    elif args.command == "compare":
        models = [m for m in args.models.split(",") if m.strip()]
        report, _ = cmd_compare(args.data, models, args.threshold)
    elif args.command == "sample":
        seed = _default_seed() if args.seed is None else args.seed
        report, draws = cmd_sample(
            args.theta, args.alpha, args.delta, args.n, seed, args.algorithm, args.phi
        )
        if not args.report and not args.pretty:
            stdout.write(f"# seed={seed}\n")
            stdout.write("".join(f"{int(v)}\n" for v in draws))
            return
    elif args.command == "describe":
        report, _ = cmd_describe(args.theta, args.alpha, args.delta, args.xmax, args.quantiles)
    else:
        seed = _default_seed() if args.seed is None else args.seed
        report, table = cmd_mc_study(
            args.theta, args.alpha, args.delta, args.replications, args.sizes, seed, args.algorithm
        )
        if args.csv:
            Path(args.csv).write_text(table.to_csv(), encoding="utf-8")
    if args.pretty:
        stdout.write(render_pretty(report))
    else:
        stdout.write(json.dumps(report, indent=2) + "\n")


def main(argv=None, stdout=None, stderr=None):
    """Entry point; returns the process exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _dispatch(args, stdout)
    except (ParameterError, DomainError, GofError) as exc:
        stderr.write(f"pmqld: error: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        stderr.write(f"pmqld: data error: {exc}\n")
        return EXIT_DATA
    except (ConvergenceError, EstimationError, StudyError, NumericError) as exc:
        stderr.write(f"pmqld: estimation failed: {exc}\n")
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
