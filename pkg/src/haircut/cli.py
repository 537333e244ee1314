"""Command-line interface: ``haircut {estimate,haircut,sens,roll,rawhc}``.

Settings resolve as command-line flags > ``--config`` JSON > defaults, and
every output carries the resolved settings.  CSV outputs start with
``# key=value`` lines.  Exit codes are 0 (ok), 1 (bad input),
2 (numerical non-convergence) and 3 (unattainable haircut target).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Any

from . import __version__
from .analytics import STANDARD_SHIFTS, empirical_var_es, read_shifts_csv, sensitivity_table
from .errors import (
    DomainError,
    EstimationError,
    HaircutError,
    InputError,
    InversionError,
    ModelError,
    UnattainableTargetError,
)
from .estimation import (
    LIKELIHOOD_CONFIG,
    MAX_EVALUATIONS,
    MIN_OBSERVATIONS,
    estimate_staged,
    read_price_csv,
    rolling_estimate,
)
from .levy import DejdParams, cumulants, load_model, model_to_dict
from .loss import LossSetup, expected_loss, put_moneyness
from .solver import (
    RatingTarget,
    RatingTargetTable,
    expected_shortfall,
    haircut_economic_capital,
    haircut_expected_loss,
    haircut_first_loss,
    load_rating_table,
    value_at_risk,
)
from .transform import InversionConfig, TransformKind, stabilized_invert

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_UNATTAINABLE = 0, 1, 2, 3

log = logging.getLogger("haircut")

DEFAULTS: dict[str, dict[str, Any]] = {
    "common": {"target_rel_error": 1e-9, "shift_c": 1.0, "max_n": 2**15, "output": None, "seed": 0},
    "estimate": {"prices": None, "max_evals": MAX_EVALUATIONS, "min_obs": MIN_OBSERVATIONS},
    "haircut": {
        "model": None,
        "prices": None,
        "mpr": 10,
        "g": 0.0,
        "criterion": "el",
        "ratings": None,
        "target": None,
        "q": None,
        "c0": 0.01,
        "measure": "var",
        "max_evals": MAX_EVALUATIONS,
    },
    "sens": {"model": None, "shifts": None, "mpr": 10, "g": 0.0, "ratings": "moodys_ig", "top": 3},
    "roll": {
        "prices": None,
        "window_years": 5,
        "step": "quarterly",
        "start": None,
        "end": None,
        "max_evals": MAX_EVALUATIONS,
        "min_obs": MIN_OBSERVATIONS,
    },
    "rawhc": {"prices": None, "horizon": 10, "var_q": 0.99, "es_q": 0.975},
}


# -- argument parsing ---------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haircut", description="Collateral haircuts from jump-diffusion models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with settings (flags override it)")
    common.add_argument("-o", "--output", help="write here instead of stdout")
    common.add_argument("--target-rel-error", type=float, help="inversion truncation target (default 1e-9)")
    common.add_argument("--shift-c", type=float, help="initial inversion shift constant C (default 1)")
    common.add_argument("--max-n", type=int, help="largest series length N (default 32768)")
    common.add_argument("--seed", type=int, help="recorded for reproducibility; no command draws random numbers")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common], help="staged maximum-likelihood fit (JSON)")
    e.add_argument("prices", nargs="?", help="CSV with header date,price")
    e.add_argument("--max-evals", type=int)
    e.add_argument("--min-obs", type=int)

    h = sub.add_parser("haircut", parents=[common], help="haircuts for a criterion (CSV)")
    h.add_argument("--model", help="model JSON")
    h.add_argument("--prices", help="price CSV; the model is the staged 6p estimate")
    h.add_argument("--mpr", type=int, help="margin period of risk in days (default 10)")
    h.add_argument("--g", type=float, help="liquidity discount (default 0)")
    h.add_argument("--criterion", choices=["el", "pd", "var", "es", "ec"])
    h.add_argument("--ratings", help="moodys_ig, sp_ig or a rating CSV (el/pd)")
    h.add_argument("--target", type=float, help="single EL or PD budget instead of a rating table")
    h.add_argument("--q", type=float, help="confidence level (var/es default 0.99, ec default 0.999)")
    h.add_argument("--c0", type=float, help="economic capital budget (ec)")
    h.add_argument("--measure", choices=["var", "es"], help="economic capital measure (ec)")
    h.add_argument("--max-evals", type=int)

    s = sub.add_parser("sens", parents=[common], help="haircut sensitivity table (CSV)")
    s.add_argument("--model", help="DEJD model JSON")
    s.add_argument("--shifts", help="CSV with header parameter,delta (default: standard bumps)")
    s.add_argument("--mpr", type=int)
    s.add_argument("--g", type=float)
    s.add_argument("--ratings")
    s.add_argument("--top", type=int, help="use the first TOP ratings (default 3; 0 = all)")

    r = sub.add_parser("roll", parents=[common], help="rolling quarterly 6p estimates (CSV)")
    r.add_argument("prices", nargs="?")
    r.add_argument("--window-years", type=int)
    r.add_argument("--step", choices=["quarterly"])
    r.add_argument("--start", help="first as-of date (ISO)")
    r.add_argument("--end", help="last as-of date (ISO)")
    r.add_argument("--max-evals", type=int)
    r.add_argument("--min-obs", type=int)

    w = sub.add_parser("rawhc", parents=[common], help="empirical VaR/ES haircuts (CSV)")
    w.add_argument("prices", nargs="?")
    w.add_argument("--horizon", type=int)
    w.add_argument("--var-q", type=float)
    w.add_argument("--es-q", type=float)
    return p


def resolve(command: str, flags: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    """Defaults, then the config file, then explicit flags."""
    settings = {**DEFAULTS["common"], **DEFAULTS[command]}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"config {config_path}: expected a JSON object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = sorted(set(doc) - set(settings))
        if unknown:
            raise InputError(f"config {config_path}: unknown keys for '{command}': {unknown}")
        settings.update(doc)
    settings.update({k: v for k, v in flags.items() if k in settings and v is not None})
    settings["command"] = command
    return settings


def _inversion_config(st) -> InversionConfig:
    try:
        return InversionConfig(shift_C=float(st["shift_c"]), target_rel_error=float(st["target_rel_error"]),
                               max_N=int(st["max_n"]))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad inversion settings: {exc}") from exc


def _require(st, key, what):
    if st.get(key) in (None, ""):
        raise InputError(f"{st['command']}: {what} is required")
    return st[key]


# -- output -------------------------------------------------------------------


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def _num(x: float) -> str:
    return f"{x:.6g}"


def _metadata(st: dict, extra: dict | None = None) -> list[str]:
    meta = {k: v for k, v in st.items() if k != "output"}
    meta.update(extra or {})
    return [f"# {k}={json.dumps(meta[k], sort_keys=True)}" for k in sorted(meta)]


def _csv_text(meta: list[str], header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        try:
            Path(output).write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise InputError(f"cannot write {output}: {exc}") from exc
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------


def cmd_estimate(st) -> int:
    path = _require(st, "prices", "a price CSV")
    prices = read_price_csv(path)
    results = estimate_staged(prices.returns(), LIKELIHOOD_CONFIG, int(st["max_evals"]), int(st["min_obs"]))
    doc = {"config": {k: v for k, v in st.items() if k != "output"}, "stages": [r.to_dict() for r in results]}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", st["output"])
    return EXIT_OK if results[-1].converged else EXIT_NONCONVERGED


def _model_from(st):
    if bool(st.get("model")) == bool(st.get("prices")):
        raise InputError("give exactly one model source: --model or --prices")
    if st.get("model"):
        return load_model(st["model"]), {}
    r6 = estimate_staged(read_price_csv(st["prices"]).returns(), LIKELIHOOD_CONFIG, int(st["max_evals"]))[2]
    if not r6.converged:
        raise EstimationError(f"6p estimate did not converge: {r6.message}")
    return r6.params.to_model(), {"estimated_model": model_to_dict(r6.params)}


def _targets(st, kind: str) -> RatingTargetTable:
    if st.get("target") is not None:
        return RatingTargetTable((RatingTarget("target", float(st["target"]), kind),))
    name = st.get("ratings") or ("moodys_ig" if kind == "EL" else "sp_ig")
    return load_rating_table(name)


def _diag(model, setup, h, config, kind):
    """(C, N) that the inversion settled on at the solved haircut."""
    k = put_moneyness(h, setup.g)
    arg = k if kind is TransformKind.PUT else -k
    res = stabilized_invert(kind, model, setup.horizon, arg, config)
    return _num(res.shift_C), str(res.N)


def cmd_haircut(st) -> int:
    config = _inversion_config(st)
    model, extra = _model_from(st)
    g = float(st["g"])
    setup = LossSetup(int(st["mpr"]), g)
    crit = str(st["criterion"]).lower()
    if crit in ("el", "pd"):
        kind = crit.upper()
        table = _targets(st, kind)
        solve = haircut_expected_loss if kind == "EL" else haircut_first_loss
        tkind = TransformKind.PUT if kind == "EL" else TransformKind.CDF
        header = ["rating", "rate", "kind", "haircut_pct"] + (["addon_pct"] if g > 0 else []) + ["shift_C", "N"]
        rows = []
        for entry in table:
            h = solve(model, setup, entry.rate, config)
            row = [entry.rating, f"{entry.rate:.6g}", kind, _pct(h)]
            if g > 0:
                row.append(_pct(h - solve(model, setup.with_discount(0.0), entry.rate, config)))
            rows.append(row + list(_diag(model, setup, h, config, tkind)))
        _emit(_csv_text(_metadata(st, extra), header, rows), st["output"])
        return EXIT_OK
    if crit in ("var", "es"):
        q = float(st["q"] if st["q"] is not None else 0.99)
        value = (value_at_risk if crit == "var" else expected_shortfall)(model, setup, q, config)
        rows = [[crit.upper(), _num(q), _pct(value)]]
        _emit(_csv_text(_metadata(st, extra), ["criterion", "q", "haircut_pct"], rows), st["output"])
        return EXIT_OK
    q = float(st["q"] if st["q"] is not None else 0.999)
    c0 = float(st["c0"])
    measure = str(st["measure"]).upper()
    h = haircut_economic_capital(model, setup, c0, measure, q, config)
    el = expected_loss(model, setup, h, config)
    rows = [[f"EC-{measure}", _num(q), _num(c0), _pct(h), _num(el)]]
    _emit(_csv_text(_metadata(st, extra), ["criterion", "q", "c0", "haircut_pct", "expected_loss"], rows), st["output"])
    return EXIT_OK


def cmd_sens(st) -> int:
    config = _inversion_config(st)
    path = _require(st, "model", "--model")
    try:
        params = DejdParams.from_model(load_model(path))
    except ModelError as exc:
        raise InputError(f"{path}: sensitivities need a double-exponential model ({exc})") from exc
    shifts = read_shifts_csv(st["shifts"]) if st.get("shifts") else list(STANDARD_SHIFTS)
    table = load_rating_table(st["ratings"])
    top = int(st["top"])
    if top > 0:
        table = table.head(top)
    try:
        res = sensitivity_table(params, LossSetup(int(st["mpr"]), float(st["g"])), table, shifts, config)
    except ModelError as exc:
        raise InputError(str(exc)) from exc
    rows = [["base"] + [_pct(h) for h in res.base]]
    rows += [[label] + [f"{d:.2f}" for d in deltas] for label, deltas in res.rows()]
    extra = {"units": "base row: haircut %, shift rows: change in percentage points, EL criterion"}
    _emit(_csv_text(_metadata(st, extra), ["shift"] + list(res.ratings), rows), st["output"])
    return EXIT_OK


def _iso(value, what):
    if value in (None, ""):
        return None
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise InputError(f"bad {what} date {value!r}") from exc


def cmd_roll(st) -> int:
    prices = read_price_csv(_require(st, "prices", "a price CSV"))
    if st["step"] != "quarterly":
        raise InputError(f"unsupported step {st['step']!r}; only 'quarterly'")
    res = rolling_estimate(
        prices,
        int(st["window_years"]),
        _iso(st["start"], "start"),
        _iso(st["end"], "end"),
        max_evaluations=int(st["max_evals"]),
        min_obs=int(st["min_obs"]),
    )
    for note in res.skipped:
        print(f"notice: {note}", file=sys.stderr)
    header = ["as_of", "window_start", "n", *DejdParams.FIELDS, "log_likelihood", "converged",
              "sample_skewness", "sample_kurtosis", "model_skewness", "model_kurtosis"]
    rows = []
    for w in res.windows:
        r = w.result
        mm = cumulants(r.params.to_model(), 1.0 / 252.0)
        rows.append([w.as_of.isoformat(), w.window_start.isoformat(), r.sample_stats.n,
                     *[_num(v) for v in r.params.as_tuple()], f"{r.log_likelihood:.6f}", int(r.converged),
                     _num(r.sample_stats.skewness), _num(r.sample_stats.kurtosis),
                     _num(mm.skewness), _num(mm.kurtosis)])
    _emit(_csv_text(_metadata(st, {"skipped": res.skipped}), header, rows), st["output"])
    return EXIT_OK if all(w.result.converged for w in res.windows) else EXIT_NONCONVERGED


def cmd_rawhc(st) -> int:
    prices = read_price_csv(_require(st, "prices", "a price CSV"))
    res = empirical_var_es(prices.prices, int(st["horizon"]), float(st["var_q"]), float(st["es_q"]))
    for note in res.diagnostics:
        print(f"notice: {note}", file=sys.stderr)
    rows = [["VaR", _num(res.q_var), _pct(res.var)], ["ES", _num(res.q_es), _pct(res.es)]]
    extra = {"n_windows": res.n_windows, "diagnostics": list(res.diagnostics)}
    _emit(_csv_text(_metadata(st, extra), ["measure", "q", "haircut_pct"], rows), st["output"])
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "haircut": cmd_haircut, "sens": cmd_sens, "roll": cmd_roll, "rawhc": cmd_rawhc}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        st = resolve(args.command, flags, args.config)
        return COMMANDS[args.command](st)
    except UnattainableTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNATTAINABLE
    except (EstimationError, InversionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (InputError, ModelError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HaircutError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
