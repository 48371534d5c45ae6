"""
Report rendering: CSV/JSON stats rows and JSON documents for the other commands.
"""
import json
from typing import Any, Dict, Iterator, List

from pydantic import BaseModel

from src.primes.gaps import ChunkStats, GapChunk, RecordTracker, fraction_below_one

STATS_HEADER = "n,p_n,p_next,g,h,g_bar,h_bar"


def fmt_real(value: float) -> str:
    """15 significant digits"""
    return f"{value:.15g}"


def stats_rows(chunk: GapChunk, stats: ChunkStats, stride: int = 1) -> Iterator[Dict[str, Any]]:
    """Rows for every n in the chunk divisible by stride"""
    for i in (chunk.n % stride == 0).nonzero()[0].tolist():
        yield {
            "n": int(chunk.n[i]),
            "p_n": int(chunk.p[i]),
            "p_next": int(chunk.q[i]),
            "g": int(chunk.g[i]),
            "h": float(chunk.h[i]),
            "g_bar": float(stats.g_bar[i]),
            "h_bar": float(stats.h_bar[i]),
        }


def stats_csv_row(row: Dict[str, Any]) -> str:
    return ",".join((
        str(row["n"]), str(row["p_n"]), str(row["p_next"]), str(row["g"]),
        fmt_real(row["h"]), fmt_real(row["g_bar"]), fmt_real(row["h_bar"]),
    ))


def stats_json_row(row: Dict[str, Any]) -> str:
    return json.dumps({
        **row,
        "h": float(fmt_real(row["h"])),
        "g_bar": float(fmt_real(row["g_bar"])),
        "h_bar": float(fmt_real(row["h_bar"])),
    })


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(item) for item in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    return obj


def to_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline"""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def tracker_summary(tracker: RecordTracker) -> Dict[str, Any]:
    """Record tracker plus the derived statistics shown by `records` and `verify`"""
    summary: Dict[str, Any] = {
        "total": tracker.total,
        "count_h_below_one": tracker.count_h_below_one,
        "min_prefix_surplus": tracker.min_prefix_surplus,
        "max_g_events": [list(e) for e in tracker.max_g_events],
        "max_h_events": [list(e) for e in tracker.max_h_events],
    }
    if tracker.total:
        summary["fraction_below_one"] = fraction_below_one(tracker)
        summary["half_or_more_every_prefix"] = tracker.min_prefix_surplus >= 0
        n, h = tracker.max_h_events[-1]
        summary["max_h"] = {"n": n, "h": h}
        n, g = tracker.max_g_events[-1]
        summary["max_g"] = {"n": n, "g": g}
    return summary


def outcome_lines(outcomes: List[BaseModel]) -> Iterator[str]:
    """One console line per claim outcome"""
    for outcome in outcomes:
        glyph = "✓" if outcome.violations == 0 else "✗"
        line = f"{glyph} {outcome.claim:<20} checked={outcome.checked_n:,} violations={outcome.violations:,}"
        if outcome.first_violation is not None:
            fv = outcome.first_violation
            line += f" first n={fv.n} ({fmt_real(fv.lhs)} vs {fmt_real(fv.rhs)})"
        yield line
