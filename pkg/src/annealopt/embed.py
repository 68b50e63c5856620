"""Zephyr clique-embedding capacity, reference statistics, and chain-length bounds.

The reference rows for 2 to 10 cities are hardware-heuristic measurements
shipped as data; they cannot be regenerated without the device toolchain.
Larger sizes extrapolate with the standard constructive clique template, in
which a complete graph on ``16m - 8`` vertices embeds with chains of length
exactly ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# n_cities -> (logical variables, physical qubits, mean chain length)
CLIQUE_TABLE = {
    2: (4, 4, 1.00),
    3: (9, 22, 2.44),
    4: (16, 40, 2.50),
    5: (25, 88, 3.52),
    6: (36, 161, 4.47),
    7: (49, 267, 5.45),
    8: (64, 416, 6.50),
    9: (81, 687, 8.48),
    10: (100, 1151, 11.51),
}

TABLE_MAX_N = max(CLIQUE_TABLE)


@dataclass(frozen=True)
class EmbeddingStats:
    n_cities: int
    logical: int
    physical: int
    mean_chain_len: float
    source: str  # "table" or "constructive"


def zephyr_size(m: int, t: int) -> tuple[int, int]:
    """Qubit count ``8 t m^2 + 4 t m`` and maximum degree ``4 t + 4`` of a Zephyr graph."""
    if m < 1 or t < 1:
        raise ValueError(f"need m >= 1 and t >= 1, got m={m}, t={t}")
    return 8 * t * m * m + 4 * t * m, 4 * t + 4


def constructive_m(logical: int) -> int:
    """Smallest grid parameter whose standard clique embedding fits ``logical`` variables."""
    if logical < 1:
        raise ValueError(f"need at least one logical variable, got {logical}")
    return math.ceil((logical + 8) / 16)


def clique_stats(n_cities: int) -> EmbeddingStats:
    """Reference statistics for the n^2-variable tour QUBO.

    Sizes covered by the reference table are returned verbatim; larger sizes
    use the constructive template with chain length ``m`` and ``L * m``
    physical qubits.
    """
    if n_cities < 2:
        raise ValueError(f"need at least 2 cities, got {n_cities}")
    if n_cities in CLIQUE_TABLE:
        logical, physical, mean_len = CLIQUE_TABLE[n_cities]
        return EmbeddingStats(n_cities, logical, physical, mean_len, "table")
    logical = n_cities * n_cities
    m = constructive_m(logical)
    return EmbeddingStats(n_cities, logical, logical * m, float(m), "constructive")


def table_chain_lengths(n_cities: int) -> list[int]:
    """Integer per-variable chain lengths consistent with the reference row.

    The physical-qubit total is split as evenly as possible: the first
    ``physical mod logical`` chains take the longer length.
    """
    stats = clique_stats(n_cities)
    base, extra = divmod(stats.physical, stats.logical)
    return [base + 1] * extra + [base] * (stats.logical - extra)


def max_embeddable(k_max: int) -> int:
    """Largest city count whose n^2-clique fits a device of clique capacity ``k_max``."""
    if k_max < 0:
        raise ValueError(f"clique capacity must be nonnegative, got {k_max}")
    return math.isqrt(k_max)


def chain_bounds(logical: int) -> tuple[float, float]:
    """(lower, upper) mean-chain-length bounds for a clique on ``logical`` variables.

    Upper is the constructive bound ``(L + 8) / 8``; lower is the
    separator-style ``sqrt(L)`` with its unknown constant taken as one. At
    tiny L the unit-constant lower bound can exceed the upper bound; callers
    that report the pair are expected to clamp and annotate (see
    ``embed_stats_rows``).
    """
    if logical < 1:
        raise ValueError(f"need at least one logical variable, got {logical}")
    return math.sqrt(logical), (logical + 8) / 8.0


def embed_stats_rows(n_values: list[int]) -> list[dict]:
    """Rows for the embed-stats report: table columns plus clamped bound columns."""
    rows = []
    for n in n_values:
        stats = clique_stats(n)
        lower, upper = chain_bounds(stats.logical)
        clamped = lower > upper
        rows.append(
            {
                "n_cities": stats.n_cities,
                "logical": stats.logical,
                "physical": stats.physical,
                "chain_len_mean": stats.mean_chain_len,
                "source": stats.source,
                "bound_lower": min(lower, upper),
                "bound_upper": upper,
                "bounds_clamped": clamped,
            }
        )
    return rows
