"""Command-line interface.

    lcforecast generate --couples 70 --days 30 --out data/
    lcforecast evaluate --events data/events.csv --profiles data/profiles.csv --out run/
    lcforecast fit --curves run/curves.csv --out run/
    lcforecast forecast --curves run/curves.csv --prefix 15 --horizon 730 --targets 0.8,0.9
    lcforecast correlate --curves run/curves.csv
    lcforecast report --out run/

Global flags (``--seed``, ``--config``, ``--out``) may appear before or after
the subcommand.  Exit codes: 0 success, 2 partial (some curve unfittable),
1 error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import harness
from .curvefit import UNITS_IN_DAYS, InsufficientDataError, fit_gompertz, forecast_from_prefix
from .data_model import DataError, parse_event_log, write_event_log
from .synthgen import DEFAULT_SEED, CommunityConfig, ConfigError, generate, load_config

log = logging.getLogger("lcforecast")

EVENTS_FILE = "events.csv"
PROFILES_FILE = "profiles.csv"
CURVES_FILE = "curves.csv"


def _targets(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"targets must be comma-separated numbers, got {text!r}")
    if any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError("targets must lie strictly between 0 and 1")
    return vals


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # Subparsers get SUPPRESS defaults so a flag given before the subcommand survives.
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(None), help="master seed (default: config value or %d)" % DEFAULT_SEED)
    p.add_argument("--config", type=Path, default=d(None), help="INI config file")
    p.add_argument("--out", type=Path, default=d(Path("out")), help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", type=Path, help="events file (default: OUT/events.csv)")
    p.add_argument("--profiles", type=Path, help="profiles file (default: OUT/profiles.csv)")
    p.add_argument("--days", type=int, help="day-prefix evaluation points")
    p.add_argument("--weeks", type=int, help="weekly points for the ethnicity task (max 65)")
    p.add_argument("--tasks", help="comma-separated subset of: " + ",".join(harness.TASK_NAMES))


def _forecast_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prefix", type=int, help="fit on the first K points (default 15)")
    p.add_argument("--horizon", type=float, help="extrapolate to this many days (default 730)")
    p.add_argument("--targets", type=_targets, help="accuracy targets, e.g. 0.8,0.9")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcforecast", description=__doc__.split("\n")[0], parents=[_global_flags(True)])
    sub = parser.add_subparsers(dest="command", required=True)
    g = _global_flags(False)

    p = sub.add_parser("generate", parents=[g], help="write a synthetic events/profiles pair")
    p.add_argument("--couples", type=int, help="number of couples (default 70)")
    p.add_argument("--days", type=int, help="days of events (default 30)")
    p.add_argument("--weeks", type=int, help="weeks of events; overrides --days")
    p.add_argument("--boost", type=float, help="partner Bluetooth proximity boost")
    p.add_argument("--homophily", type=float, help="same-ethnicity SMS contact weight")

    p = sub.add_parser("evaluate", parents=[g], help="learning curves CSV from an event log")
    _run_flags(p)

    p = sub.add_parser("fit", parents=[g], help="Gompertz fits of a curves CSV")
    p.add_argument("--curves", type=Path, help="curves CSV (default: OUT/curves.csv)")

    p = sub.add_parser("forecast", parents=[g], help="prefix forecasts of a curves CSV")
    p.add_argument("--curves", type=Path, help="curves CSV (default: OUT/curves.csv)")
    _forecast_flags(p)

    p = sub.add_parser("correlate", parents=[g], help="Pearson matrix of a curves CSV")
    p.add_argument("--curves", type=Path, help="curves CSV (default: OUT/curves.csv)")

    p = sub.add_parser("report", parents=[g], help="generate if needed, then evaluate, fit, forecast, plot")
    _run_flags(p)
    _forecast_flags(p)
    return parser


# --------------------------------------------------------------------------- config


def _read_run_section(path: Path | None) -> dict:
    if path is None:
        return {}
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config {path}")
    if not cp.has_section("run"):
        return {}
    known = {"days": int, "seed": int, "prefix_k": int, "horizon": float, "hidden_fraction": float, "weeks": int, "folds": int, "label_repeats": int}
    out: dict = {}
    for k, v in cp.items("run"):
        if k == "targets":
            out[k] = _targets(v)
        elif k == "tasks":
            out[k] = [t.strip() for t in v.split(",") if t.strip()]
        elif k in known:
            out[k] = known[k](v)
        else:
            raise ConfigError(f"unknown [run] key {k!r}")
    return out


def community_config(args) -> CommunityConfig:
    cfg = load_config(args.config) if args.config else CommunityConfig()
    days = getattr(args, "days", None)
    if getattr(args, "weeks", None) and args.command == "generate":
        days = 7 * args.weeks
    return cfg.with_overrides(
        seed=args.seed,
        n_couples=getattr(args, "couples", None),
        days=days,
        partner_proximity_boost=getattr(args, "boost", None),
        ethnic_sms_homophily=getattr(args, "homophily", None),
    ).validate()


def run_config(args) -> harness.RunConfig:
    run = _read_run_section(args.config)
    kw = {
        "days": getattr(args, "days", None) or run.get("days", 30),
        "seed": args.seed if args.seed is not None else run.get("seed", DEFAULT_SEED),
        "prefix_k": getattr(args, "prefix", None) or run.get("prefix_k", 15),
        "horizon": getattr(args, "horizon", None) or run.get("horizon", 730.0),
        "targets": getattr(args, "targets", None) or run.get("targets", (0.7, 0.8, 0.9)),
        "hidden_fraction": run.get("hidden_fraction", 0.3),
        "weeks": getattr(args, "weeks", None) or run.get("weeks"),
        "folds": run.get("folds", 10),
        "label_repeats": run.get("label_repeats", 10),
    }
    tasks = getattr(args, "tasks", None)
    kw["tasks"] = harness.resolve_tasks(tasks.split(",") if tasks else run.get("tasks"))
    return harness.RunConfig(**kw)


# --------------------------------------------------------------------------- commands


def _load_log(args):
    events = args.events or args.out / EVENTS_FILE
    profiles = args.profiles or args.out / PROFILES_FILE
    return parse_event_log(events, profiles)


def cmd_generate(args) -> int:
    cfg = community_config(args)
    _, ev = generate(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_event_log(ev, args.out / EVENTS_FILE, args.out / PROFILES_FILE)
    log.info("wrote %d events for %d participants to %s", len(ev.events), len(ev.participants), args.out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = run_config(args)
    curves = harness.run_incremental(_load_log(args), cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    harness.write_curves_csv(curves, args.out / CURVES_FILE)
    missing = sum(len(tc.missing) for tc in curves)
    log.info("wrote %d curves (%d missing points) to %s", len(curves), missing, args.out / CURVES_FILE)
    return 0


def _curves(args):
    return harness.read_curves_csv(args.curves or args.out / CURVES_FILE)


def cmd_fit(args) -> int:
    code = 0
    for c in _curves(args):
        try:
            fr = fit_gompertz(c)
        except InsufficientDataError as exc:
            print(f"{c.task}: unfittable ({exc})", file=sys.stderr)
            code = 2
            continue
        harness._write_json(args.out / "fits" / f"{c.task}.json", fr.to_dict())
        print(f"{c.task}: a={fr.params.a:.4f} b={fr.params.b:.4f} c={fr.params.c:.4f} rse={fr.rse:.4f}")
    return code


def cmd_forecast(args) -> int:
    cfg = run_config(args)
    code = 0
    for c in _curves(args):
        k = min(cfg.prefix_k, len(c))
        try:
            fc = forecast_from_prefix(c, k, cfg.horizon / UNITS_IN_DAYS[c.unit], cfg.targets)
        except InsufficientDataError as exc:
            print(f"{c.task}: unfittable ({exc})", file=sys.stderr)
            code = 2
            continue
        harness._write_json(args.out / "forecasts" / f"{c.task}_prefix.json", fc.to_dict())
        reach = ", ".join(
            f"{y:g}: {fc.t_for[y]:.1f} {c.unit}s" if fc.t_for[y] is not None else f"{y:g}: {fc.status[y]}" for y in fc.t_for
        )
        print(f"{c.task}: asymptote {fc.asymptote:.4f} from {k} points; {reach}")
    return code


def cmd_correlate(args) -> int:
    curves = _curves(args)
    if len(curves) < 2:
        print("need at least two curves to correlate", file=sys.stderr)
        return 1
    from .curvefit import correlation_matrix

    names = [c.task for c in curves]
    r = correlation_matrix(curves)
    harness.write_correlation_csv(names, r, args.out / "correlation.csv")
    print(json.dumps({a: {b: None if r[i, j] != r[i, j] else round(float(r[i, j]), 4) for j, b in enumerate(names)} for i, a in enumerate(names)}, indent=1))
    return 0


def cmd_report(args) -> int:
    cfg = run_config(args)
    events = args.events or args.out / EVENTS_FILE
    profiles = args.profiles or args.out / PROFILES_FILE
    if not (Path(events).exists() and Path(profiles).exists()):
        if args.events or args.profiles:
            raise FileNotFoundError(f"missing input {events if not Path(events).exists() else profiles}")
        need = max(cfg.days, cfg.ethnicity_span_days())
        gen_args = argparse.Namespace(**{**vars(args), "command": "generate", "days": need, "weeks": None})
        ccfg = community_config(gen_args)
        _, ev = generate(ccfg)
        args.out.mkdir(parents=True, exist_ok=True)
        write_event_log(ev, events, profiles)
    bundle = harness.run_pipeline(_load_log(args), cfg, args.out)
    for r in bundle.reports:
        name = r.task.spec.name
        if r.ok:
            print(f"{name}: a={r.fit.params.a:.4f} rse={r.fit.rse:.4f} prefix asymptote={r.forecast_prefix.asymptote:.4f}")
        else:
            print(f"{name}: {'; '.join(r.diagnostics)}", file=sys.stderr)
    return bundle.exit_code


COMMANDS = {
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "correlate": cmd_correlate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
