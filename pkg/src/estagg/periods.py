"""Calendar-quarter helpers shared across the pipeline."""

from datetime import datetime, timezone

Quarter = tuple[int, int]  # (year, quarter 1..4)


def quarter_of_ts(ts: int) -> Quarter:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return (dt.year, (dt.month - 1) // 3 + 1)


def quarter_index(q: Quarter) -> int:
    """Monotone integer index; consecutive quarters differ by exactly 1."""
    year, qq = q
    return year * 4 + (qq - 1)


def quarter_from_index(idx: int) -> Quarter:
    return (idx // 4, idx % 4 + 1)


def parse_ts(text: str) -> int:
    """ISO-8601 timestamp to unix seconds; naive values are taken as UTC."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_ts(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
