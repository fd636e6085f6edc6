"""Trace files and the metrics derived from them.

A run directory holds::

    manifest.json          config, seed, artifact paths, tool version, wall times
    events.jsonl           epoch, clock, node, adversary and counter records
    blocks/node_<id>.jsonl confirmed chain as seen by each validating node
    summary.json           metrics recomputed from the files above
    heights.csv            per-height throughput table of the reference chain

:func:`summarize` only ever looks at a :class:`Trace`, whether it was just
produced in memory or loaded back from disk, so the summary written by a run
and the one produced later by ``povf report`` cannot disagree.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from povf import __version__
from povf.metrics import (
    average_tps,
    block_counts,
    gini,
    instantaneous_tps,
    std_dev,
    to_decimal,
)
from povf.sim.runner import SimReport

MANIFEST = "manifest.json"
EVENTS = "events.jsonl"
BLOCKS_DIR = "blocks"
SUMMARY = "summary.json"
HEIGHTS = "heights.csv"
CSV_COLUMNS = ("height", "timestamp", "tx_count", "consensus_time_ms",
               "instantaneous_tps", "cumulative_average_tps")


class TraceError(ValueError):
    pass


@dataclass
class Trace:
    manifest: dict
    events: list[dict]
    block_logs: dict[int, list[dict]]


@dataclass
class _Row:
    height: int
    timestamp: int
    tx_count: int


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def trace_from_report(report: SimReport, config_path: Optional[str] = None) -> Trace:
    cfg = report.config
    manifest = {
        "tool": "povf",
        "version": __version__,
        "config_path": config_path,
        "config": cfg.to_dict(),
        "rng_seed": cfg.rng_seed,
        "reference_node": report.reference_node,
        "validating_nodes": sorted(report.block_logs),
        "genesis_hash": report.genesis.hash.hex(),
        "artifacts": {
            "events": EVENTS,
            "block_logs": {str(n): f"{BLOCKS_DIR}/node_{n}.jsonl" for n in sorted(report.block_logs)},
            "summary": SUMMARY,
            "heights": HEIGHTS,
        },
    }
    events: list[dict] = []
    for rec in report.epochs:
        events.append(dict(rec, type="epoch"))
    for rec in report.clock_samples:
        events.append(dict(rec, type="clock"))
    for rec in report.adversary_active:
        events.append(dict(rec, type="adversary_active"))
    for rec in report.nodes:
        events.append(dict(rec, type="node"))
    if report.adversary is not None:
        events.append(dict(report.adversary, type="adversary"))
    events.append(dict(report.counters, type="counters"))
    # normalise through JSON so in-memory and on-disk traces are identical
    events = [json.loads(_dumps(e)) for e in events]
    logs = {n: [json.loads(_dumps(r)) for r in rows] for n, rows in report.block_logs.items()}
    return Trace(json.loads(_dumps(manifest)), events, logs)


def write_trace(trace: Trace, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / BLOCKS_DIR).mkdir(exist_ok=True)
    with open(out_dir / EVENTS, "w") as fh:
        for e in trace.events:
            fh.write(_dumps(e) + "\n")
    for n, rows in trace.block_logs.items():
        with open(out_dir / BLOCKS_DIR / f"node_{n}.jsonl", "w") as fh:
            for r in rows:
                fh.write(_dumps(r) + "\n")
    with open(out_dir / MANIFEST, "w") as fh:
        fh.write(json.dumps(trace.manifest, sort_keys=True, indent=2) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
    return out


def load_trace(trace_dir: str | Path) -> Trace:
    trace_dir = Path(trace_dir)
    mpath = trace_dir / MANIFEST
    if not mpath.is_file():
        raise TraceError(f"no {MANIFEST} in {trace_dir}")
    try:
        manifest = json.loads(mpath.read_text())
        artifacts = manifest["artifacts"]
        events = _read_jsonl(trace_dir / artifacts["events"])
        logs = {int(n): _read_jsonl(trace_dir / p) for n, p in artifacts["block_logs"].items()}
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise TraceError(f"corrupt trace in {trace_dir}: {exc}") from None
    return Trace(manifest, events, logs)


# -- metrics --------------------------------------------------------------------

def _dec(v) -> Optional[float]:
    return None if v is None else to_decimal(v)


def chain_rows(rows: list[dict]) -> list[_Row]:
    return [_Row(r["height"], r["timestamp"], r["tx_count"]) for r in rows]


def height_table(rows: list[dict]) -> list[dict]:
    """Per-height throughput of a confirmed chain (first row has no rate)."""
    blocks = chain_rows(rows)
    out = []
    total = 0
    for i, b in enumerate(blocks):
        row = {"height": b.height, "timestamp": b.timestamp, "tx_count": b.tx_count,
               "consensus_time_ms": None, "instantaneous_tps": None,
               "cumulative_average_tps": None}
        if i > 0:
            prev = blocks[i - 1]
            total += b.tx_count
            row["consensus_time_ms"] = b.timestamp - prev.timestamp
            if b.timestamp > prev.timestamp:
                row["instantaneous_tps"] = _dec(instantaneous_tps(prev, b))
            if b.timestamp > blocks[0].timestamp:
                row["cumulative_average_tps"] = _dec(Fraction(total * 1000,
                                                              b.timestamp - blocks[0].timestamp))
        out.append(row)
    return out


def fork_check(logs: dict[int, list[dict]]) -> dict:
    """Compare confirmed chains of all validating nodes height by height."""
    by_height: dict[int, set] = {}
    for rows in logs.values():
        for r in rows:
            by_height.setdefault(r["height"], set()).add(r["block_hash"])
    conflicts = sorted(h for h, s in by_height.items() if len(s) > 1)
    lengths = [len(rows) for rows in logs.values()]
    return {"fork_free": not conflicts, "conflicting_heights": conflicts[:50],
            "nodes_compared": len(logs),
            "min_confirmed_height": (min(lengths) - 1) if lengths else None,
            "max_confirmed_height": (max(lengths) - 1) if lengths else None}


def summarize_counts(counts: list[int]) -> dict:
    return {"block_counts": counts, "gini": _dec(gini(counts)) if sum(counts) else None,
            "gini_exact": str(gini(counts)) if sum(counts) else None,
            "std_dev": _dec(std_dev(counts)) if counts else None}


def summarize(trace: Trace) -> dict:
    cfg = trace.manifest["config"]
    ref = str(trace.manifest["reference_node"])
    logs = trace.block_logs
    if int(ref) not in logs:
        raise TraceError(f"reference node {ref} has no block log")
    chain = logs[int(ref)]
    blocks = chain_rows(chain)
    out: dict[str, Any] = {"reference_node": int(ref), "rng_seed": trace.manifest["rng_seed"]}
    regular = chain[1:]
    out["blocks_confirmed"] = len(regular)
    out["transactions_confirmed"] = sum(r["tx_count"] for r in regular)
    try:
        out["average_tps"] = _dec(average_tps(blocks))
        out["average_tps_exact"] = str(average_tps(blocks))
    except ValueError:
        out["average_tps"] = out["average_tps_exact"] = None
    inst = [instantaneous_tps(a, b) for a, b in zip(blocks, blocks[1:])
            if b.timestamp > a.timestamp]
    out["max_instantaneous_tps"] = _dec(max(inst)) if inst else None

    proposers = [r["public_key"] for r in regular]
    out.update(summarize_counts(block_counts(proposers)))
    out["proposer_count"] = len(out["block_counts"])

    nodes = [e for e in trace.events if e["type"] == "node"]
    by_pk = {}
    for p in proposers:
        by_pk[p] = by_pk.get(p, 0) + 1
    out["node_confirmed_blocks"] = {str(n["node"]): by_pk.get(n["public_key"], 0) for n in nodes}
    out["node_heartbeat_rejections"] = sum(n["heartbeat_rejections"] for n in nodes)

    epochs = [e for e in trace.events if e["type"] == "epoch"]
    omega = cfg["omega"]
    # adversarial identities are selected by the same rule, so they count too
    sel = [e["selected"] + e["selected_adversary"] for e in epochs]
    out["selected_per_epoch"] = sel
    over = [s for s, e in zip(sel, epochs) if e["live_nodes"] > omega]
    band = (omega - 3 * math.sqrt(omega), omega + 3 * math.sqrt(omega))
    out["selected_band"] = [_dec(band[0]), _dec(band[1])]
    out["epochs_over_omega"] = len(over)
    out["selected_mean_over_omega"] = _dec(Fraction(sum(over), len(over))) if over else None
    out["selected_in_band_fraction"] = (
        _dec(Fraction(sum(1 for s in over if band[0] <= s <= band[1]), len(over)))
        if over else None)
    out["selected_mean"] = _dec(Fraction(sum(sel), len(sel))) if sel else None

    clock = [e for e in trace.events if e["type"] == "clock"]
    out["max_clock_offset_ms"] = max((c["spread_ms"] for c in clock), default=None)
    settle = 60_000
    late = [c["spread_ms"] for c in clock if c["t"] >= settle]
    out["max_clock_offset_after_60s_ms"] = max(late, default=None)

    out["forks"] = fork_check(logs)

    adv = next((e for e in trace.events if e["type"] == "adversary"), None)
    if adv is not None:
        adv_blocks = sum(1 for r in regular if r.get("adversarial"))
        out["adversary"] = {
            "kind": adv["kind"],
            "identities": len(adv["identities"]),
            "counters": adv["counters"],
            "blocks_confirmed": adv_blocks,
            "confirmed_share": _dec(Fraction(adv_blocks, len(regular))) if regular else None,
        }
        active = [e for e in trace.events if e["type"] == "adversary_active"]
        window = cfg["t_max_ms"] + cfg["clock_tolerance_ms"]
        out["adversary"]["max_active_after_t_max"] = max(
            (a["max_active"] for a in active if a["t"] >= window), default=None)
        out["adversary"]["max_active"] = max((a["max_active"] for a in active), default=None)
    counters = next((e for e in trace.events if e["type"] == "counters"), {})
    out["rejections"] = {k: v for k, v in counters.items()
                         if k != "type" and "." in k and not k.endswith(".accepted")}
    out["accepted"] = {k: v for k, v in counters.items() if k.endswith(".accepted")}
    return out


def heights_csv(trace: Trace) -> str:
    ref = trace.manifest["reference_node"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in height_table(trace.block_logs[ref]):
        w.writerow(["" if row[c] is None else row[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def write_run(report: SimReport, out_dir: str | Path, config_path: Optional[str] = None) -> dict:
    """Write every artifact, then summarise from the files just written.

    Nothing written depends on wall-clock time, so the same config and seed
    reproduce every file byte for byte.
    """
    out_dir = Path(out_dir)
    trace = trace_from_report(report, config_path)
    write_trace(trace, out_dir)
    loaded = load_trace(out_dir)
    summary = summarize(loaded)
    (out_dir / SUMMARY).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    (out_dir / HEIGHTS).write_text(heights_csv(loaded))
    return summary
