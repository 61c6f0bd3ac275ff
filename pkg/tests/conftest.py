import pytest

from estagg.ingest import Actual, Estimate
from estagg.periods import parse_ts
from estagg.synth import SynthSpec, generate_rows


def estimates_from_rows(rows):
    return [
        Estimate(
            analyst_id=r[0],
            broker_id=r[1],
            firm_id=r[2],
            period=(r[3], r[4]),
            estimate_ts=parse_ts(r[5]),
            horizon_code=r[6],
            value_cents=r[7],
        )
        for r in rows
    ]


def actuals_from_rows(rows):
    return [
        Actual(firm_id=r[0], period=(r[1], r[2]), announce_ts=parse_ts(r[3]), value_cents=r[4])
        for r in rows
    ]


def load_synth(spec: SynthSpec):
    est_rows, act_rows, ground_truth = generate_rows(spec)
    return estimates_from_rows(est_rows), actuals_from_rows(act_rows), ground_truth


@pytest.fixture(scope="session")
def small_panel_inputs():
    """A small deterministic panel reused by several integration tests."""
    spec = SynthSpec(
        n_firms=8,
        n_analysts=40,
        n_quarters=12,
        analysts_per_event=9,
        bias_scale=5.0,
        noise_scale=3.0,
        common_scale=2.0,
        seed=20240817,
    )
    return load_synth(spec)
