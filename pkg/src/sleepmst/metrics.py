"""Complexity measurements collected per run, plus CSV/JSON export.

Awake rounds are counted per scheduled-awake round even if the node neither
sent nor received anything that round; waiting costs energy too.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field


@dataclass
class Metrics:
    n: int
    awake_rounds: list[int]
    total_rounds: int
    messages_sent: int
    bits_sent: int
    max_edge_round_bits: int
    fragment_trajectory: list[int] = field(default_factory=list)
    phase_awake: list[list[int]] = field(default_factory=list)  # per-phase deltas
    stage_awake: dict = field(default_factory=dict)  # tradeoff: stage -> per-node awake
    phases: int = 0

    @property
    def awake_max(self) -> int:
        return max(self.awake_rounds, default=0)

    @property
    def awake_avg(self) -> float:
        if not self.awake_rounds:
            return 0.0
        return sum(self.awake_rounds) / len(self.awake_rounds)

    def check(self) -> None:
        assert self.awake_max >= self.awake_avg >= 0
        assert self.total_rounds >= self.awake_max
        traj = self.fragment_trajectory
        assert all(a >= b for a, b in zip(traj, traj[1:])), "F_i must be non-increasing"


CSV_FIELDS = ("run_id", "algo", "n", "m", "N", "D", "k", "seed", "awake_max",
              "awake_avg", "total_rounds", "messages", "bits", "phases",
              "oracle_match")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6g")
    return "" if value is None else str(value)


def csv_header() -> str:
    return ",".join(CSV_FIELDS)


def export(record, fmt: str = "csv") -> str:
    """Serialize one run record (a mapping with the CSV_FIELDS keys).

    CSV yields a single row in the stable field order; JSON mirrors the same
    fields and adds the fragment-count trajectory F_i when present.
    """
    if fmt == "csv":
        return ",".join(_fmt(record.get(name)) for name in CSV_FIELDS)
    if fmt == "json":
        obj = {}
        for name in CSV_FIELDS:
            value = record.get(name)
            if isinstance(value, float):
                value = float(format(value, ".6g"))
            obj[name] = value
        if "fragment_trajectory" in record:
            obj["fragment_trajectory"] = list(record["fragment_trajectory"])
        return json.dumps(obj, sort_keys=False)
    raise ValueError(f"unknown export format: {fmt}")


def record_from(metrics: Metrics, *, run_id, algo, n, m, N, D=None, k=None,
                seed=None, oracle_match=None) -> dict:
    rec = {
        "run_id": run_id, "algo": algo, "n": n, "m": m, "N": N, "D": D, "k": k,
        "seed": seed,
        "awake_max": metrics.awake_max,
        "awake_avg": metrics.awake_avg,
        "total_rounds": metrics.total_rounds,
        "messages": metrics.messages_sent,
        "bits": metrics.bits_sent,
        "phases": metrics.phases,
        "oracle_match": oracle_match,
        "fragment_trajectory": list(metrics.fragment_trajectory),
    }
    return rec


def parse_csv_row(row: str) -> dict:
    values = row.split(",")
    if len(values) != len(CSV_FIELDS):
        raise ValueError("CSV row does not match the record schema")
    return dict(zip(CSV_FIELDS, values))
