"""Hits@K curves, hybrid-policy arithmetic, and latency accounting over
trajectory records.

Rates are percentages in [0, 100]. The cumulative convention counts a
session as a hit at length t if its target ranked within K at any round
<= t; errored rounds count as misses at their round.
"""

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import (
    EmptyTraceSet,
    InconsistentHorizon,
    OutOfRange,
    UnpairedSessions,
)

CONVENTIONS = ("cumulative", "per_round")

STAGES = ("generate", "embed", "retrieve", "agent")


@dataclass(frozen=True)
class HitsCurve:
    k: int
    rates: tuple          # one per dialog length 0..T
    n_sessions: int
    convention: str


def round2(rate: float) -> float:
    """Half-up rounding to 2 decimals, as in the reported tables."""
    return float(Decimal(repr(rate)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def group_sessions(records) -> dict:
    """Group trajectory records by session, rounds sorted ascending."""
    sessions = {}
    for rec in records:
        sessions.setdefault(rec.session_id, []).append(rec)
    for rounds in sessions.values():
        rounds.sort(key=lambda r: r.round)
    return sessions


def _horizon(sessions) -> int:
    horizons = {rounds[-1].round for rounds in sessions.values()}
    if len(horizons) != 1:
        raise InconsistentHorizon(f"sessions end at different rounds: {sorted(horizons)}")
    return horizons.pop()


def _hit_matrix(sessions, k: int) -> np.ndarray:
    """(n_sessions, T+1) boolean per-round hit indicators; gaps are misses."""
    horizon = _horizon(sessions)
    hits = np.zeros((len(sessions), horizon + 1), dtype=bool)
    for i, sid in enumerate(sorted(sessions)):
        for rec in sessions[sid]:
            if rec.rank_of_target is not None and rec.rank_of_target <= k:
                hits[i, rec.round] = True
    return hits


def hits_curve(records, k: int, convention: str = "cumulative") -> HitsCurve:
    """Hits@K rate per dialog length over a set of session trajectories."""
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    sessions = group_sessions(records)
    if not sessions:
        raise EmptyTraceSet("no trajectory records")
    hits = _hit_matrix(sessions, k)
    if convention == "cumulative":
        hits = np.maximum.accumulate(hits, axis=1)
    rates = tuple(100.0 * float(col.mean()) for col in hits.T)
    return HitsCurve(k=k, rates=rates, n_sessions=len(sessions),
                     convention=convention)


def random_select_rate(p: float, verbal_rate: float, visual_rate: float) -> float:
    """Expected rate of per-query random channel assignment: convex mix."""
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"p={p} not in [0,1]")
    for name, rate in (("verbal", verbal_rate), ("visual", visual_rate)):
        if not 0.0 <= rate <= 100.0:
            raise OutOfRange(f"{name} rate {rate} not in [0,100]")
    return (1.0 - p) * verbal_rate + p * visual_rate


def oracle_rate(pairs) -> float:
    """Best-of-both channel selection: per-session union of hits.

    pairs: iterable of (verbal_hit, visual_hit) booleans, one per session.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyTraceSet("no paired sessions")
    union = sum(1 for v, w in pairs if v or w)
    return 100.0 * union / len(pairs)


def pair_hits_by_target(verbal_records, visual_records, k: int):
    """Per-target (verbal_hit, visual_hit) cumulative indicators per length.

    Returns (targets, verbal_hits, visual_hits) where the hit arrays are
    (n_targets, T+1) booleans aligned on sorted target id.
    """
    out = []
    for records in (verbal_records, visual_records):
        sessions = group_sessions(records)
        if not sessions:
            raise EmptyTraceSet("no trajectory records")
        by_target = {}
        for sid, rounds in sessions.items():
            target = rounds[0].target_id
            if target in by_target:
                raise UnpairedSessions(f"duplicate sessions for target {target!r}")
            by_target[target] = sid
        hits = _hit_matrix(sessions, k)
        hits = np.maximum.accumulate(hits, axis=1)
        order = {sid: i for i, sid in enumerate(sorted(sessions))}
        out.append((by_target, hits, order))
    (verbal_map, verbal_hits, verbal_order) = out[0]
    (visual_map, visual_hits, visual_order) = out[1]
    if set(verbal_map) != set(visual_map):
        raise UnpairedSessions("verbal and visual runs cover different targets")
    if verbal_hits.shape[1] != visual_hits.shape[1]:
        raise InconsistentHorizon("verbal and visual runs have different horizons")
    targets = sorted(verbal_map)
    v_rows = np.array([verbal_hits[verbal_order[verbal_map[t]]] for t in targets])
    w_rows = np.array([visual_hits[visual_order[visual_map[t]]] for t in targets])
    return targets, v_rows, w_rows


def hybrid_report(verbal_records, visual_records, k: int, p: float) -> dict:
    """Table of verbal/visual/oracle/random-select rates per dialog length."""
    targets, v_hits, w_hits = pair_hits_by_target(verbal_records, visual_records, k)
    lengths = range(v_hits.shape[1])
    rows = []
    for t in lengths:
        verbal = 100.0 * float(v_hits[:, t].mean())
        visual = 100.0 * float(w_hits[:, t].mean())
        oracle = oracle_rate(zip(v_hits[:, t], w_hits[:, t]))
        random_select = random_select_rate(p, verbal, visual)
        rows.append({
            "dialog_length": t,
            "verbal": round2(verbal),
            "visual": round2(visual),
            "oracle": round2(oracle),
            "random_select": round2(random_select),
            "verbal_to_oracle": round2(oracle - verbal),
            "verbal_to_random": round2(random_select - verbal),
        })
    return {"k": k, "p": p, "n_sessions": len(targets), "rows": rows}


def compare_modes(sources: dict, k: int, convention: str = "cumulative") -> dict:
    """Aligned Hits@K table, one column per mode, one row per dialog length."""
    if not sources:
        raise EmptyTraceSet("no trajectory sources")
    curves = {mode: hits_curve(records, k, convention)
              for mode, records in sources.items()}
    horizons = {len(curve.rates) for curve in curves.values()}
    if len(horizons) != 1:
        raise InconsistentHorizon("modes have different dialog horizons")
    return curves


def curves_to_csv(curves: dict) -> str:
    """CSV with header dialog_length,<mode1>,... ; LF endings, 2 decimals."""
    modes = list(curves)
    lines = ["dialog_length," + ",".join(modes)]
    n_lengths = len(next(iter(curves.values())).rates)
    for t in range(n_lengths):
        cells = [f"{round2(curves[m].rates[t]):.2f}" for m in modes]
        lines.append(f"{t}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def _percentile95(values: np.ndarray) -> float:
    # nearest-rank definition, matches a plain sort-based recount
    return float(np.percentile(values, 95, method="inverted_cdf"))


def latency_report(records) -> dict:
    """Per-mode, per-stage mean/median/p95 latencies in ms."""
    if not records:
        raise EmptyTraceSet("no trajectory records")
    by_mode = {}
    for rec in records:
        by_mode.setdefault(rec.mode, []).append(rec)
    report = {}
    for mode, recs in sorted(by_mode.items()):
        stages = {}
        for stage in STAGES:
            values = np.array([r.latency_ms[stage] for r in recs
                               if r.latency_ms.get(stage) is not None], dtype=float)
            if values.size == 0:
                stages[stage] = None
                continue
            stages[stage] = {
                "mean": float(values.mean()),
                "median": float(np.median(values)),
                "p95": _percentile95(values),
                "count": int(values.size),
            }
        report[mode] = {"rounds": len(recs), "stages": stages}
    return report
