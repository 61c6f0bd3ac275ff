"""Command-line entry points: run, synth, report.

`run` drives ingest -> replay -> evaluate and writes all artifacts plus a
manifest (config echo and input hashes) so a run is reproducible from its
output directory alone. `synth` writes a synthetic panel. `report`
re-renders results.csv from previously written per-event files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict

from . import __version__
from .aggregate import MODE_DESCRIPTIONS, default_mode_matrix, modes_by_label
from .evaluate import (
    ModeResult,
    PanelSource,
    SurprisePair,
    average_stat,
    descriptive_stats,
    median_stat,
    run_mode_matrix,
    surprise_improvement,
    trend_stat,
)
from .ingest import FilterConfig, cross_check_actuals, parse_actuals, parse_estimates
from .synth import SynthSpec, generate

logger = logging.getLogger(__name__)


def _setup_logging() -> None:
    level = os.environ.get("ESTAGG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _read_config_file(path: str) -> dict[str, str]:
    """Simple key=value config; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _write_results_csv(path: str, results: list[ModeResult]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("mode,description,n_events,median,average,trend,r_squared,trend_supplementary\n")
        for r in results:
            fh.write(
                ",".join(
                    [
                        r.label,
                        '"%s"' % r.description,
                        str(r.n_events),
                        _fmt(r.median),
                        _fmt(r.average),
                        _fmt(r.trend),
                        _fmt(r.r_squared),
                        "1" if r.trend_supplementary else "0",
                    ]
                )
                + "\n"
            )


def cmd_run(args: argparse.Namespace) -> int:
    cfg_file = _read_config_file(args.config) if args.config else {}

    def setting(flag_value, key, cast, default):
        if flag_value is not None:
            return flag_value
        if key in cfg_file:
            return cast(cfg_file[key])
        return default

    estimates_path = setting(args.estimates, "estimates", str, None)
    actuals_path = setting(args.actuals, "actuals", str, None)
    check_path = setting(args.actuals_check, "actuals_check", str, None)
    out_dir = setting(args.out, "out", str, None)
    burn_in = setting(args.burn_in, "burn_in", int, 24)
    mode_sel = setting(args.modes, "modes", str, "all")
    fcfg = FilterConfig(
        min_analysts=setting(args.min_analysts, "min_analysts", int, 8),
        surprise_cap_cents=setting(args.surprise_cap_cents, "surprise_cap_cents", int, 50),
        min_lead_hours=setting(args.min_lead_hours, "min_lead_hours", int, 48),
        max_age_days=setting(args.max_age_days, "max_age_days", int, 365),
    )
    exponent = setting(args.exponent, "exponent", float, 1.2)

    if not estimates_path or not actuals_path or not out_dir:
        print("run requires --estimates, --actuals and --out (flags or config)", file=sys.stderr)
        return 2
    if burn_in < 1:
        print("burn-in must be >= 1 (a previous-period model is required)", file=sys.stderr)
        return 2

    written: list[str] = []
    try:
        for p in [estimates_path, actuals_path] + ([check_path] if check_path else []):
            if not os.path.isfile(p):
                raise FileNotFoundError(p)

        estimates, est_rejects = parse_estimates(estimates_path)
        actuals, act_rejects = parse_actuals(actuals_path)
        if check_path:
            check, _ = parse_actuals(check_path)
            actuals = cross_check_actuals(actuals, check, keep_missing=fcfg.keep_unchecked_actuals)

        if mode_sel == "all":
            modes = default_mode_matrix(exponent)
        else:
            modes = modes_by_label([m.strip() for m in mode_sel.split(",") if m.strip()], exponent)

        source = PanelSource(estimates, actuals, fcfg)
        results, details = run_mode_matrix(source, modes, burn_in)

        os.makedirs(out_dir, exist_ok=True)

        def out(name: str) -> str:
            p = os.path.join(out_dir, name)
            written.append(p)
            return p

        _write_results_csv(out("results.csv"), results)

        panel = source.default_panel()
        report = {
            "ingest": json.loads(panel.report.to_json()),
            "parse_rejects": {"estimates": len(est_rejects), "actuals": len(act_rejects)},
            "descriptive": descriptive_stats(panel) if panel.events else None,
        }
        with open(out("ingest_report.json"), "w", newline="\n") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")

        models_dir = os.path.join(out_dir, "models")
        os.makedirs(models_dir, exist_ok=True)
        for mode in modes:
            rr = details[mode.label]
            p = os.path.join(models_dir, f"{mode.label}.csv")
            written.append(p)
            with open(p, "w", newline="\n") as fh:
                fh.write("period_year,period_quarter,b_age,b_freq,b_ncos,b_top10,b_exp,b_mae,n_obs,rss\n")
                for m in rr.models:
                    betas = ",".join(repr(float(b)) for b in m.beta)
                    fh.write(f"{m.quarter[0]},{m.quarter[1]},{betas},{m.n_obs},{repr(m.rss)}\n")

            with open(out(f"events_{mode.label}.csv"), "w", newline="\n") as fh:
                fh.write(
                    "firm_id,period_year,period_quarter,actual_cents,simple_consensus,improved,"
                    "n_analysts,fallback_reason,in_evaluation\n"
                )
                for o in rr.outcomes:
                    fh.write(
                        f"{o.firm_id},{o.period[0]},{o.period[1]},{o.actual_cents},"
                        f"{repr(o.simple_consensus)},{repr(o.improved)},{o.n_analysts},"
                        f"{o.fallback_reason or ''},{1 if o.quarter_offset >= burn_in else 0}\n"
                    )

            pairs = [
                SurprisePair(o.simple_consensus - o.actual_cents, o.improved - o.actual_cents)
                for o in rr.outcomes
                if o.quarter_offset >= burn_in
            ]
            with open(out(f"scatter_{mode.label}.csv"), "w", newline="\n") as fh:
                fh.write("original_surprise,improved_surprise\n")
                for p_ in pairs:
                    fh.write(f"{repr(p_.original)},{repr(p_.improved)}\n")
            trend = trend_stat(pairs) if pairs else None
            sidecar = {
                "n": len(pairs),
                "trend": trend[0] if trend else None,
                "r_squared": trend[1] if trend else None,
            }
            with open(out(f"scatter_{mode.label}.json"), "w", newline="\n") as fh:
                json.dump(sidecar, fh, indent=2, sort_keys=True)
                fh.write("\n")

        manifest = {
            "version": __version__,
            "config": {
                "estimates": estimates_path,
                "actuals": actuals_path,
                "actuals_check": check_path,
                "burn_in": burn_in,
                "modes": [m.label for m in modes],
                "exponent": exponent,
                "filter": asdict(fcfg) | {"horizon_codes": sorted(fcfg.horizon_codes)},
            },
            "inputs": {
                os.path.basename(p): _sha256(p)
                for p in [estimates_path, actuals_path] + ([check_path] if check_path else [])
            },
        }
        with open(out("manifest.json"), "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except Exception as exc:  # remove partial outputs before failing
        for p in written:
            try:
                os.remove(p)
            except OSError:
                pass
        print(f"run failed: {exc}", file=sys.stderr)
        return 1

    for r in results:
        med = f"{100 * r.median:.1f}%" if r.median is not None else "n/a"
        avg = f"{100 * r.average:.1f}%" if r.average is not None else "n/a"
        print(f"{r.label:<14} median={med:>8} average={avg:>8} n={r.n_events}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg_file = _read_config_file(args.config) if args.config else {}

    def setting(flag_value, key, cast, default):
        if flag_value is not None:
            return flag_value
        if key in cfg_file:
            return cast(cfg_file[key])
        return default

    try:
        spec = SynthSpec(
            n_firms=setting(args.n_firms, "n_firms", int, 50),
            n_analysts=setting(args.n_analysts, "n_analysts", int, 200),
            n_quarters=setting(args.n_quarters, "n_quarters", int, 40),
            analysts_per_event=setting(args.analysts_per_event, "analysts_per_event", int, 8),
            bias_scale=setting(args.bias_scale, "bias_scale", float, 5.0),
            skill_spread=setting(args.skill_spread, "skill_spread", float, 1.0),
            noise_scale=setting(args.noise_scale, "noise_scale", float, 3.0),
            common_scale=setting(args.common_scale, "common_scale", float, 5.0),
            negative_surprise_target=setting(
                args.negative_surprise_target, "negative_surprise_target", float, 0.3
            ),
            seed=setting(args.seed, "seed", int, 12345),
        )
        paths = generate(spec, args.out)
    except ValueError as exc:
        print(f"synth failed: {exc}", file=sys.stderr)
        return 1
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = args.run_dir
    results: list[ModeResult] = []
    event_files = sorted(f for f in os.listdir(run_dir) if f.startswith("events_") and f.endswith(".csv"))
    if not event_files:
        print(f"no events_*.csv files in {run_dir}", file=sys.stderr)
        return 1
    for fname in event_files:
        label = fname[len("events_") : -len(".csv")]
        pairs = []
        with open(os.path.join(run_dir, fname), newline="") as fh:
            for row in csv.DictReader(fh):
                if row["in_evaluation"] != "1":
                    continue
                actual = float(row["actual_cents"])
                pairs.append(
                    SurprisePair(
                        float(row["simple_consensus"]) - actual,
                        float(row["improved"]) - actual,
                    )
                )
        trend = trend_stat(pairs) if pairs else None
        results.append(
            ModeResult(
                label=label,
                description=MODE_DESCRIPTIONS.get(label, label),
                n_events=len(pairs),
                median=median_stat([surprise_improvement(p.original, p.improved) for p in pairs]) if pairs else None,
                average=average_stat(pairs) if pairs else None,
                trend=trend[0] if trend else None,
                r_squared=trend[1] if trend else None,
                trend_supplementary=label != "full",
            )
        )
    _write_results_csv(os.path.join(run_dir, "results.csv"), results)
    print(f"results.csv rebuilt from {len(event_files)} event files")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="estagg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="ingest, replay and evaluate a panel")
    run.add_argument("--estimates")
    run.add_argument("--actuals")
    run.add_argument("--actuals-check", dest="actuals_check")
    run.add_argument("--out")
    run.add_argument("--modes", help='"all" or comma-separated mode labels')
    run.add_argument("--burn-in", dest="burn_in", type=int)
    run.add_argument("--min-analysts", dest="min_analysts", type=int)
    run.add_argument("--surprise-cap-cents", dest="surprise_cap_cents", type=int)
    run.add_argument("--min-lead-hours", dest="min_lead_hours", type=int)
    run.add_argument("--max-age-days", dest="max_age_days", type=int)
    run.add_argument("--exponent", type=float)
    run.add_argument("--config")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="generate a synthetic panel")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--n-firms", dest="n_firms", type=int)
    synth.add_argument("--n-analysts", dest="n_analysts", type=int)
    synth.add_argument("--n-quarters", dest="n_quarters", type=int)
    synth.add_argument("--analysts-per-event", dest="analysts_per_event", type=int)
    synth.add_argument("--bias-scale", dest="bias_scale", type=float)
    synth.add_argument("--skill-spread", dest="skill_spread", type=float)
    synth.add_argument("--noise-scale", dest="noise_scale", type=float)
    synth.add_argument("--common-scale", dest="common_scale", type=float)
    synth.add_argument("--negative-surprise-target", dest="negative_surprise_target", type=float)
    synth.add_argument("--config")
    synth.set_defaults(func=cmd_synth)

    report = sub.add_parser("report", help="re-render results.csv from per-event files")
    report.add_argument("--run-dir", dest="run_dir", required=True)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
