"""Evaluation metrics: feasible success rate, chain breaks, time-to-solution, gap.

Two success notions coexist and are never conflated: the per-read feasible
rate counts constraint-satisfying decodes, while the ground-state rate counts
annealer calls in which at least one read reached the reference energy. TTS
builds on the latter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from annealopt.backend import ReadSet
from annealopt.tsp import decode_tour

GROUND_STATE_TOL = 1e-9


@dataclass
class MetricReport:
    """One experiment run's headline numbers."""

    best_energy: float
    p_succ: float
    cbf: float
    tts_us: float | None
    gap_percent: float | None
    reads_total: int
    t_f_us: float

    def to_json_dict(self) -> dict:
        return {
            "best_energy": None if self.best_energy is None else float(self.best_energy),
            "p_succ": float(self.p_succ),
            "cbf": float(self.cbf),
            "tts_us": None if self.tts_us is None else float(self.tts_us),
            "gap_percent": None if self.gap_percent is None else float(self.gap_percent),
            "reads_total": int(self.reads_total),
            "t_f_us": float(self.t_f_us),
        }

    @staticmethod
    def csv_header() -> list[str]:
        return ["best_energy", "p_succ", "cbf", "tts_us", "gap_percent", "reads_total", "t_f_us"]

    def csv_row(self) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [
            fmt(self.best_energy),
            fmt(self.p_succ),
            fmt(self.cbf),
            fmt(self.tts_us),
            fmt(self.gap_percent),
            str(int(self.reads_total)),
            fmt(self.t_f_us),
        ]


def success_probability(rs: ReadSet, n_cities: int) -> float:
    """Fraction of reads whose bitstring decodes to a valid tour."""
    if rs.n_reads == 0:
        return 0.0
    feasible = sum(
        1 for r in range(rs.n_reads) if decode_tour(rs.bitstrings[r], n_cities)[0]
    )
    return feasible / rs.n_reads


def tts(t_f_us: float, p: float, q: float = 0.99) -> float | None:
    """Expected time to hit the ground state at confidence q.

    ``t_f * ln(1 - q) / ln(1 - p)``. Returns None (undefined) at p = 0 and
    t_f at p = 1, where the formula degenerates.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {q}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability must be in [0, 1], got {p}")
    if p == 0.0:
        return None
    if p == 1.0:
        return float(t_f_us)
    return float(t_f_us * math.log(1.0 - q) / math.log(1.0 - p))


def gap_percent(e_method: float, e_ref: float) -> float:
    """Relative optimality gap, in percent, against a positive reference energy."""
    if e_ref <= 0:
        raise ValueError(f"reference energy must be positive, got {e_ref}")
    return float(100.0 * (e_method - e_ref) / e_ref)


def ground_state_rate(rs_batches: list[ReadSet], e_star: float, tol: float = GROUND_STATE_TOL) -> float:
    """Fraction of read batches containing at least one ground-state read."""
    if not rs_batches:
        return 0.0
    hits = sum(1 for rs in rs_batches if np.any(rs.energies <= e_star + tol))
    return hits / len(rs_batches)
