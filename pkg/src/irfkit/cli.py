"""Command-line interface: ``irfkit {test,simulate,irf,multiplier,replicate}``.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 usage, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from irfkit import __version__
from irfkit.dgpsim import RNG_ALGORITHM, DgpSpec, simulate
from irfkit.diagnostics import acf, ljung_box, panel_serial_test
from irfkit.errors import DataError, IngestionError, IrfkitError, NumericalError
from irfkit.irf import ESTIMATORS, IrfResult, IrfSpec, LeadsRule, cumulative_multiplier, estimate, nonlinear_lp
from irfkit.replicate import FIGURES, replicate
from irfkit.tscore import CsvSchema, Panel, Series, load_csv
from irfkit.varmod import cholesky_irf, fit_var, varx_irf

__all__ = ["main"]

DEFAULT_TEST_LAGS = "5,10,20,40,60"
VAR_ESTIMATORS = ("var-endog", "var-x")


class UsageError(IrfkitError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if not out or any(v < 1 for v in out):
        raise UsageError(f"lag orders must be positive integers, got {text!r}")
    return out


def _build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="irfkit", description="Impulse responses to persistent shocks.")
    parser.add_argument("--version", action="version", version=f"irfkit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file with option values (flags override it)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--threads", type=int, default=None, help="worker thread hint (IRFKIT_THREADS overrides)")
        subs[name] = p
        return p

    p = add("test", "Serial-correlation tests and correlograms for series in a CSV.")
    p.add_argument("--input", required=False, help="input CSV")
    p.add_argument("--columns", default=None, help="comma-separated value columns (default: all)")
    p.add_argument("--lags", default=DEFAULT_TEST_LAGS, help="lag orders to test")
    p.add_argument("--statistic", choices=("ljung-box", "box-pierce"), default="ljung-box")
    p.add_argument("--acf-lags", type=int, default=None, help="correlogram length (default: largest lag)")
    p.add_argument("--ci-level", type=float, default=0.95, help="Bartlett band level")
    p.add_argument("--period-col", default="period")
    p.add_argument("--entity-col", default="entity")
    p.add_argument("--na-policy", choices=("reject", "drop_rows"), default="reject")

    p = add("simulate", "Simulate one of the built-in data generating processes.")
    p.add_argument("--kind", choices=("simple", "extended", "iv", "external_shock"), default="extended")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=None, help="independent stream index")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="DGP parameter override")
    p.add_argument("--shock-csv", default=None, help="shock series for kind=external_shock")
    p.add_argument("--shock-column", default=None)

    p = add("irf", "Estimate an impulse response from CSV data.")
    p.add_argument("--data", required=False, help="input CSV")
    p.add_argument("--y", default="y", help="outcome column")
    p.add_argument("--shock", default="x", help="shock column (endogenous regressor for IV)")
    p.add_argument("--estimator", choices=ESTIMATORS + VAR_ESTIMATORS, default="lp")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--leads", default=None, help="lead rule: h, fixed:L or capped:L")
    p.add_argument("--lead-cap", type=int, default=None, help="cap the conservative rule at L leads")
    p.add_argument(
        "--controls",
        default=None,
        help="comma list of NAME:P (lags 1..P) or NAME:A-B (lags A..B); 'none' for no controls "
        "(default: outcome and shock with --control-lags lags)",
    )
    p.add_argument("--control-lags", type=int, default=4)
    p.add_argument("--nw-bandwidth", type=int, default=None)
    p.add_argument("--state", default=None, help="binary state column for nonlinear_lp")
    p.add_argument("--state-timing", choices=("lagged", "current"), default="lagged")
    p.add_argument("--state-leads", action="store_true", help="fixed-state counterfactual paths")
    p.add_argument("--instrument", default=None)
    p.add_argument("--lead-source", default=None, help="column whose leads enter lp_iv_leads (default: instrument)")
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--dlm-lags", type=int, default=None)
    p.add_argument("--shock-ar-order", type=int, default=1)
    p.add_argument("--pad-tail-leads", action="store_true")
    p.add_argument("--var-lags", type=int, default=1, help="VAR lag order p")
    p.add_argument("--varx-lags", type=int, default=None, help="VAR-X shock lags q (default: horizon)")
    p.add_argument("--period-col", default="period")
    p.add_argument("--na-policy", choices=("reject", "drop_rows"), default="reject")

    p = add("multiplier", "Cumulative multiplier of two impulse-response JSON files.")
    p.add_argument("--num", required=False)
    p.add_argument("--den", required=False)
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("replicate", "Regenerate the plot data of a reference simulation figure.")
    p.add_argument("figure", nargs="?", default=None, help=f"one of {', '.join(FIGURES)}")
    p.add_argument("--T", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--replications", type=int, default=10_000, help="figB3 only")
    p.add_argument("--shock-csv", default=None)
    p.add_argument("--shock-column", default=None)
    return parser, subs


def _resolve(argv: Sequence[str] | None) -> argparse.Namespace:
    parser, subs = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("irfkit: a command is required: " + ", ".join(subs))
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise IngestionError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise UsageError("config file must hold a JSON object")
        payload = {k.replace("-", "_"): v for k, v in payload.items()}
        payload.pop("command", None)
        known = {a.dest for a in subs[args.command]._actions}
        unknown = sorted(set(payload) - known - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys for {args.command!r}: {unknown}")
        subs[args.command].set_defaults(**payload)
        args = parser.parse_args(argv)
    return args


def _threads(args) -> int | None:
    env = os.environ.get("IRFKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"IRFKIT_THREADS must be an integer, got {env!r}") from None
    return args.threads


def _echo(args) -> dict:
    skip = {"config", "out", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _manifest(out: Path, args, outputs: list[str], extra: dict | None = None) -> None:
    payload = {
        "tool": "irfkit",
        "version": __version__,
        "command": args.command,
        "config": _echo(args),
        "seed": getattr(args, "seed", None),
        "rng": RNG_ALGORITHM,
        "outputs": sorted(outputs),
    }
    payload.update(extra or {})
    _dump(out / "manifest.json", payload)


def _fmt(v: float) -> str:
    return repr(float(v)) if np.isfinite(v) else ""


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) in (None, "")]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


_LABELS = {"ljung_box": "Box-Pierce ({m})", "box_pierce": "Box-Pierce ({m}), uncorrected", "panel_joint": "panel joint ({m})"}


def _report_row(series: str, m: int, result, nobs: int) -> dict:
    # the small-sample corrected statistic carries the conventional table label
    return {
        "series": series,
        "m": m,
        "label": _LABELS[result.kind].format(m=m),
        "kind": result.kind,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "nobs": nobs,
        "per_lag": result.to_dict()["per_lag"],
    }


def cmd_test(args, out: Path) -> list[str]:
    _require(args, "input")
    lags = _int_list(args.lags)
    columns = None if args.columns is None else tuple(c.strip() for c in args.columns.split(",") if c.strip())
    data = load_csv(args.input, CsvSchema(columns, args.period_col, args.entity_col), args.na_policy)
    corrected = args.statistic == "ljung-box"
    rows, outputs = [], []
    if isinstance(data, Panel):
        for var in data.variables:
            for m in lags:
                r = panel_serial_test(data, var, m)
                rows.append(_report_row(var, m, r, sum(len(data.series(e, var)) for e in data.entities)))
    else:
        for name, s in data.items():
            for m in lags:
                rows.append(_report_row(name, m, ljung_box(s, m, corrected), len(s)))
            corr = acf(s, args.acf_lags or max(lags))
            band = corr.bands(args.ci_level)
            fname = f"correlogram_{name}.csv"
            with (out / fname).open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["lag", "acf", "bartlett_se", "band_lo", "band_hi"])
                for k, r_k, se_k, b in zip(corr.lags, corr.acf, corr.bartlett_se, band):
                    w.writerow([int(k), _fmt(r_k), _fmt(se_k), _fmt(-b), _fmt(b)])
            outputs.append(fname)
    _dump(out / "test_report.json", {"statistic": args.statistic, "rows_dropped": data.rows_dropped, "results": rows})
    with (out / "test_report.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "m", "label", "kind", "statistic", "p_value", "nobs"])
        for r in rows:
            w.writerow([r["series"], r["m"], r["label"], r["kind"], _fmt(r["statistic"]), _fmt(r["p_value"]), r["nobs"]])
    return outputs + ["test_report.json", "test_report.csv"]


def _parse_params(items) -> dict[str, float]:
    if isinstance(items, dict):
        return {k: float(v) for k, v in items.items()}
    params = {}
    for item in items or ():
        key, sep, value = str(item).partition("=")
        if not sep:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: not a number: {value!r}") from None
    return params


def _load_shock(path: str, column: str | None) -> Series:
    data = load_csv(path, CsvSchema(None if column is None else (column,), "period", None))
    if isinstance(data, Panel):
        raise DataError("shock CSV must hold a single time series, not a panel")
    if column is None:
        if len(data) != 1:
            raise UsageError(f"shock CSV has columns {list(data)}; choose one with --shock-column")
        column = next(iter(data))
    return data[column]


def cmd_simulate(args, out: Path) -> list[str]:
    shock = _load_shock(args.shock_csv, args.shock_column) if args.shock_csv else None
    if args.kind == "external_shock" and shock is None:
        raise UsageError("simulate --kind external_shock needs --shock-csv")
    spec = DgpSpec(args.kind, _parse_params(args.param), args.T, args.seed, shock)
    simulate(spec, args.replicate).to_csv(out / "data.csv")
    return ["data.csv"]


def _parse_controls(text: str | None, args, table) -> list:
    if text is None:
        # distributed-lag regressions already carry the shock's lags
        names = [] if args.estimator in ("dlm", "dlm_innovation") else [args.y, args.shock]
        return [(table(n), args.control_lags) for n in names if args.control_lags > 0]
    if text.strip().lower() == "none":
        return []
    out = []
    for item in text.split(","):
        name, sep, lags = item.strip().partition(":")
        if not sep:
            raise UsageError(f"control {item!r} must look like NAME:P or NAME:A-B")
        try:
            if "-" in lags:
                lo, hi = (int(v) for v in lags.split("-", 1))
                spec = list(range(lo, hi + 1))
            else:
                spec = int(lags)
        except ValueError:
            raise UsageError(f"bad lag specification in control {item!r}") from None
        out.append((table(name), spec))
    return out


def _leads_rule(args) -> LeadsRule | None:
    if args.estimator not in ("lp_leads", "lp_iv_leads", "nonlinear_lp"):
        if args.leads is not None or args.lead_cap is not None:
            raise UsageError(f"--leads/--lead-cap do not apply to estimator {args.estimator!r}")
        return None
    if args.lead_cap is not None:
        if args.leads not in (None, "h", "conservative", "conservative_h"):
            raise UsageError("--lead-cap combines only with the conservative rule")
        return LeadsRule("capped", args.lead_cap)
    if args.leads is None:
        return None if args.estimator == "nonlinear_lp" else LeadsRule()
    return LeadsRule.parse(args.leads)


def cmd_irf(args, out: Path) -> list[str]:
    _require(args, "data")
    data = load_csv(args.data, CsvSchema(None, args.period_col, None), args.na_policy)
    if isinstance(data, Panel):
        raise DataError("irf expects a single time series CSV (no entity column)")

    def table(name):
        try:
            return data[name]
        except KeyError:
            raise IngestionError(f"column {name!r} not in {args.data}; have {list(data)}") from None

    y, shock = table(args.y), table(args.shock)
    threads = _threads(args)
    if args.estimator == "var-endog":
        fit = fit_var({shock.name: shock, y.name: y}, args.var_lags)
        resp = cholesky_irf(fit, args.horizon, shock.name)
        result = resp[y.name]
        result = replace(result, ci_level=args.ci_level, paths={f"response:{k}": v for k, v in resp.items()})
    elif args.estimator == "var-x":
        q = args.horizon if args.varx_lags is None else args.varx_lags
        result = varx_irf({y.name: y}, shock, args.var_lags, q, args.horizon)[y.name]
    else:
        controls = _parse_controls(args.controls, args, table)
        spec = IrfSpec(
            estimator=args.estimator,
            H=args.horizon,
            controls=controls,
            leads_rule=_leads_rule(args),
            shock_ar_order=args.shock_ar_order,
            nw_bandwidth=args.nw_bandwidth,
            ci_level=args.ci_level,
            dlm_lags=args.dlm_lags,
            pad_tail_leads=args.pad_tail_leads,
            state_timing=args.state_timing,
        )
        if args.estimator == "nonlinear_lp" and args.state is None:
            raise UsageError("--state is required for nonlinear_lp")
        if args.estimator.startswith("lp_iv") and args.instrument is None:
            raise UsageError("--instrument is required for lp_iv estimators")
        if args.estimator == "nonlinear_lp":
            result = nonlinear_lp(y, shock, table(args.state), spec, state_leads=args.state_leads, threads=threads)
        else:
            result = estimate(
                spec,
                y,
                shock,
                instrument=table(args.instrument) if args.instrument else None,
                lead_source=table(args.lead_source) if args.lead_source else None,
                threads=threads,
            )
    (out / "irf.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "irf.csv").write_text(result.to_csv(), encoding="utf-8")
    return ["irf.json", "irf.csv"]


def _read_result(path: str) -> IrfResult:
    try:
        return IrfResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise IngestionError(f"file not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path} is not an impulse-response JSON file: {exc}") from None


def cmd_multiplier(args, out: Path) -> list[str]:
    _require(args, "num", "den")
    num, den = _read_result(args.num), _read_result(args.den)
    values = cumulative_multiplier(num, den, args.tol)
    undefined = [int(h) for h in np.flatnonzero(~np.isfinite(values))]
    payload = {
        "horizons": list(range(values.size)),
        "multiplier": [None if not np.isfinite(v) else float(v) for v in values],
        "undefined": undefined,
        "numerator": num.estimator,
        "denominator": den.estimator,
        "warnings": [f"multiplier undefined at h={h}: denominator partial sum near zero" for h in undefined],
    }
    _dump(out / "multiplier.json", payload)
    with (out / "multiplier.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "value"])
        for h, v in enumerate(values):
            w.writerow([h, _fmt(v)])
    return ["multiplier.json", "multiplier.csv"]


def cmd_replicate(args, out: Path) -> tuple[list[str], dict]:
    if args.figure is None:
        raise UsageError(f"replicate: a figure id is required; valid ids: {', '.join(FIGURES)}")
    if args.figure not in FIGURES:
        raise UsageError(f"replicate: unknown figure {args.figure!r}; valid ids: {', '.join(FIGURES)}")
    shock = _load_shock(args.shock_csv, args.shock_column) if args.shock_csv else None
    curves = replicate(args.figure, args.T, args.seed, args.horizon, _threads(args), shock, args.replications)
    outputs, legend = [], {}
    for key, curve in curves.items():
        fname = f"{args.figure}_{key}.csv"
        with (out / fname).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h", "value"])
            for h, v in zip(curve.horizons, curve.values):
                w.writerow([int(h), _fmt(v)])
        outputs.append(fname)
        legend[fname] = curve.legend
    return outputs, {"figure": args.figure, "description": FIGURES[args.figure][0], "curves": legend}


COMMANDS = {
    "test": cmd_test,
    "simulate": cmd_simulate,
    "irf": cmd_irf,
    "multiplier": cmd_multiplier,
    "replicate": cmd_replicate,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _resolve(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        produced = COMMANDS[args.command](args, out)
        extra = None
        if isinstance(produced, tuple):
            produced, extra = produced
        _manifest(out, args, produced, extra)
        return 0
    except IrfkitError as exc:
        print(f"irfkit: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"irfkit: numerical error: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except OSError as exc:
        print(f"irfkit: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
