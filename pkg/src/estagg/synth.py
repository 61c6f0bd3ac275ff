"""Deterministic synthetic panels with known ground truth.

Each (analyst, firm) pair carries a fixed additive bias, each analyst a
fixed noise multiplier (the differential-expertise knob), and each
firm-quarter a common shift that calibrates the negative-surprise share.
The latent parameters are emitted alongside the data so tests never
re-derive them from generator internals.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone
from statistics import NormalDist

import numpy as np

ESTIMATE_HEADER = "analyst_id,broker_id,firm_id,period_year,period_quarter,estimate_ts,horizon_code,value_cents"
ACTUAL_HEADER = "firm_id,period_year,period_quarter,announce_ts,value_cents"


@dataclass(frozen=True)
class SynthSpec:
    n_firms: int = 50
    n_analysts: int = 200
    n_quarters: int = 40
    analysts_per_event: int = 8
    bias_scale: float = 5.0  # sd of per-(analyst, firm) true bias, cents
    skill_spread: float = 1.0  # analyst noise multipliers drawn from [1, spread]
    noise_scale: float = 3.0  # base idiosyncratic noise sd, cents
    common_scale: float = 5.0  # sd of the per-event common shift, cents
    negative_surprise_target: float = 0.3
    age_coupling: float = 0.0  # extra noise per unit of forecast-age fraction
    heavy_tails: bool = False
    base_eps_cents: float = 100.0
    eps_scale: float = 30.0  # sd of the realized outcome around the base
    start_year: int = 2004
    seed: int = 12345

    def validate(self) -> None:
        if self.analysts_per_event > self.n_analysts:
            raise ValueError("analysts_per_event exceeds n_analysts")
        for name in ("bias_scale", "noise_scale", "common_scale", "eps_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.skill_spread < 1.0:
            raise ValueError("skill_spread must be >= 1")
        if not 0.0 < self.negative_surprise_target < 1.0:
            raise ValueError("negative_surprise_target must be a fraction")


def _fmt_ts(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _quarter_end(year: int, quarter: int) -> datetime:
    if quarter == 4:
        nxt = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
    else:
        nxt = datetime(year, 3 * quarter + 1, 1, tzinfo=timezone.utc)
    return nxt - timedelta(days=1)


def generate_rows(spec: SynthSpec):
    """Produce (estimate_rows, actual_rows, ground_truth) deterministically."""
    spec.validate()
    root = np.random.SeedSequence(spec.seed)
    global_rng = np.random.default_rng(root.spawn(1)[0])
    firm_seeds = root.spawn(spec.n_firms + 1)[1:]

    analyst_ids = [f"A{i:04d}" for i in range(spec.n_analysts)]
    n_brokers = max(3, spec.n_analysts // 6)
    broker_weights = np.arange(1, n_brokers + 1, dtype=float)
    broker_weights /= broker_weights.sum()
    broker_of = {
        a: f"B{int(k):03d}"
        for a, k in zip(analyst_ids, global_rng.choice(n_brokers, size=spec.n_analysts, p=broker_weights))
    }
    skills = {a: float(s) for a, s in zip(analyst_ids, global_rng.uniform(1.0, spec.skill_spread, spec.n_analysts))}

    if spec.common_scale > 0:
        shift_mu = spec.common_scale * NormalDist().inv_cdf(spec.negative_surprise_target)
    else:
        shift_mu = 0.0

    estimate_rows = []
    actual_rows = []
    biases: dict[str, dict[str, float]] = {}
    coverage: dict[str, list[str]] = {}

    for f in range(spec.n_firms):
        firm = f"F{f:03d}"
        rng = np.random.default_rng(firm_seeds[f])
        covering = sorted(rng.choice(spec.n_analysts, size=spec.analysts_per_event, replace=False).tolist())
        cov_ids = [analyst_ids[i] for i in covering]
        coverage[firm] = cov_ids
        biases[firm] = {a: float(rng.normal(0.0, spec.bias_scale)) if spec.bias_scale > 0 else 0.0 for a in cov_ids}
        offset_h = int(rng.integers(0, 120))

        for q in range(spec.n_quarters):
            year = spec.start_year + q // 4
            quarter = q % 4 + 1
            announce_dt = _quarter_end(year, quarter) + timedelta(days=30, hours=offset_h)
            announce_ts = int(announce_dt.timestamp())
            actual = int(round(spec.base_eps_cents + (rng.normal(0.0, spec.eps_scale) if spec.eps_scale > 0 else 0.0)))
            actual_rows.append((firm, year, quarter, _fmt_ts(announce_ts), actual))
            shift = rng.normal(shift_mu, spec.common_scale) if spec.common_scale > 0 else 0.0
            for a in cov_ids:
                age_days = float(rng.uniform(3.0, 120.0))
                est_ts = announce_ts - int(round(age_days * 86400))
                sd = skills[a] * spec.noise_scale * (1.0 + spec.age_coupling * age_days / 120.0)
                if spec.heavy_tails:
                    z = rng.standard_t(3) / np.sqrt(3.0)
                else:
                    z = rng.standard_normal()
                value = int(round(actual + shift + biases[firm][a] + sd * z))
                estimate_rows.append(
                    (a, broker_of[a], firm, year, quarter, _fmt_ts(est_ts), 6, value)
                )

    ground_truth = {
        "spec": asdict(spec),
        "skills": skills,
        "brokers": broker_of,
        "biases": biases,
        "coverage": coverage,
        "common_shift_mu": shift_mu,
    }
    return estimate_rows, actual_rows, ground_truth


def generate(spec: SynthSpec, out_dir: str) -> dict[str, str]:
    """Write estimates.csv, actuals.csv and ground_truth.json."""
    estimate_rows, actual_rows, ground_truth = generate_rows(spec)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "estimates": os.path.join(out_dir, "estimates.csv"),
        "actuals": os.path.join(out_dir, "actuals.csv"),
        "ground_truth": os.path.join(out_dir, "ground_truth.json"),
    }
    with open(paths["estimates"], "w", newline="\n") as fh:
        fh.write(ESTIMATE_HEADER + "\n")
        for row in estimate_rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    with open(paths["actuals"], "w", newline="\n") as fh:
        fh.write(ACTUAL_HEADER + "\n")
        for row in actual_rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    with open(paths["ground_truth"], "w", newline="\n") as fh:
        json.dump(ground_truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
