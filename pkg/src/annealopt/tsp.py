"""TSP instances and their QUBO / Ising encodings.

Variables are laid out city-major: ``x[i * n + k] = 1`` means city ``i`` is
visited at tour step ``k``. A closed tour of ``n`` cities therefore uses
``n**2`` binary variables. The QUBO combines the tour-length objective with
one-hot penalties on every city row and every step column; the constant
produced by expanding the penalty squares is kept in ``Qubo.offset`` so that
reported energies match the combined objective literally.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HELD_KARP_MAX_CITIES = 18
DEFAULT_PENALTY_FACTOR = 10.0
COORD_BOX = 100.0


@dataclass(frozen=True, eq=False)
class TspInstance:
    """Euclidean TSP instance: city coordinates plus the distance matrix."""

    n_cities: int
    coords: np.ndarray  # (n, 2)
    dist: np.ndarray    # (n, n), symmetric, zero diagonal

    def to_json_dict(self) -> dict:
        return {
            "n": int(self.n_cities),
            "seed": getattr(self, "_seed", None),
            "coords": [[float(x), float(y)] for x, y in self.coords],
        }


@dataclass(frozen=True, eq=False)
class Qubo:
    """Upper-triangular QUBO; the diagonal holds the linear terms."""

    dim: int
    coeffs: np.ndarray  # (dim, dim) upper triangular
    penalty: float
    offset: float


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Ising model with fields ``h``, couplings ``J[(i, j)]`` for i < j, and a constant offset."""

    n_spins: int
    h: np.ndarray
    couplings: dict
    offset: float

    def dense_j(self) -> np.ndarray:
        """Symmetric dense coupling matrix with zero diagonal."""
        jd = np.zeros((self.n_spins, self.n_spins))
        for (i, j), v in self.couplings.items():
            jd[i, j] += v
            jd[j, i] += v
        return jd


def generate_instance(n: int, seed: int) -> TspInstance:
    """Draw ``n`` cities uniformly from the coordinate box using PCG64(seed).

    The same (n, seed) pair always yields a bit-identical instance.
    """
    if n < 1:
        raise ValueError(f"need at least one city, got n={n}")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, COORD_BOX, size=(n, 2))
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(dist, 0.0)
    inst = TspInstance(n_cities=n, coords=coords, dist=dist)
    object.__setattr__(inst, "_seed", int(seed))
    return inst


def instance_from_coords(coords: np.ndarray) -> TspInstance:
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(dist, 0.0)
    return TspInstance(n_cities=coords.shape[0], coords=coords, dist=dist)


def save_instance(inst: TspInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inst.to_json_dict(), sort_keys=True) + "\n")


def load_instance(path: str | Path) -> TspInstance:
    """Load an instance from JSON; distances are recomputed, never deserialized."""
    data = json.loads(Path(path).read_text())
    inst = instance_from_coords(np.array(data["coords"], dtype=float))
    if data.get("seed") is not None:
        object.__setattr__(inst, "_seed", int(data["seed"]))
    return inst


def _var(i: int, k: int, n: int) -> int:
    return i * n + k


def build_qubo(inst: TspInstance, penalty: float | None = None) -> Qubo:
    """Compile the instance into penalty form.

    ``penalty`` defaults to 10x the largest inter-city distance, which keeps
    every constraint-violating assignment strictly above any closed tour.
    A penalty at or below max(dist) is accepted with a warning.
    """
    n = inst.n_cities
    d = inst.dist
    max_d = float(d.max())
    if penalty is None:
        penalty = DEFAULT_PENALTY_FACTOR * max_d if max_d > 0 else 1.0
    penalty = float(penalty)
    if penalty <= 0:
        raise ValueError(f"penalty must be positive, got {penalty}")
    if penalty <= max_d:
        warnings.warn(
            f"penalty {penalty} does not dominate max distance {max_d}; "
            "minima may be infeasible",
            stacklevel=2,
        )

    dim = n * n
    q = np.zeros((dim, dim))
    offset = 0.0

    def add(a: int, b: int, c: float) -> None:
        if a == b:
            q[a, a] += c
        elif a < b:
            q[a, b] += c
        else:
            q[b, a] += c

    # One-hot penalty per city row: penalty * (1 - sum_k x_{i,k})^2.
    for i in range(n):
        offset += penalty
        for k in range(n):
            add(_var(i, k, n), _var(i, k, n), -penalty)
        for k1 in range(n):
            for k2 in range(k1 + 1, n):
                add(_var(i, k1, n), _var(i, k2, n), 2.0 * penalty)

    # One-hot penalty per step column: penalty * (1 - sum_i x_{i,k})^2.
    for k in range(n):
        offset += penalty
        for i in range(n):
            add(_var(i, k, n), _var(i, k, n), -penalty)
        for i1 in range(n):
            for i2 in range(i1 + 1, n):
                add(_var(i1, k, n), _var(i2, k, n), 2.0 * penalty)

    # Tour length: d[i, j] whenever city i at step k is followed by city j.
    for k in range(n):
        nk = (k + 1) % n
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                add(_var(i, k, n), _var(j, nk, n), float(d[i, j]))

    return Qubo(dim=dim, coeffs=q, penalty=penalty, offset=offset)


def qubo_energy(q: Qubo, x: np.ndarray) -> float:
    """Energy ``x^T Q x + offset`` of a bitstring."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != q.dim:
        raise ValueError(f"bitstring length {x.shape[0]} != QUBO dim {q.dim}")
    return float(x @ q.coeffs @ x + q.offset)


def decode_tour(x: np.ndarray, n: int) -> tuple[bool, list[int] | None]:
    """Check the one-hot constraints; return the visiting order when feasible.

    Feasible means every city row and every step column of the n-by-n
    assignment matrix sums to exactly one. Infeasible bitstrings are a normal
    outcome, not an error.
    """
    x = np.asarray(x).ravel()
    if x.shape[0] != n * n:
        raise ValueError(f"bitstring length {x.shape[0]} != n^2 = {n * n}")
    a = x.reshape(n, n).astype(int)
    if not (np.all(a.sum(axis=1) == 1) and np.all(a.sum(axis=0) == 1)):
        return False, None
    tour = [int(np.argmax(a[:, k])) for k in range(n)]
    return True, tour


def tour_length(inst: TspInstance, tour: list[int]) -> float:
    n = len(tour)
    return float(sum(inst.dist[tour[k], tour[(k + 1) % n]] for k in range(n)))


def qubo_to_ising(q: Qubo) -> IsingModel:
    """Exact change of variables x = (sigma + 1) / 2."""
    dim = q.dim
    h = np.zeros(dim)
    couplings: dict = {}
    offset = q.offset
    for i in range(dim):
        c = float(q.coeffs[i, i])
        if c != 0.0:
            h[i] += c / 2.0
            offset += c / 2.0
        for j in range(i + 1, dim):
            c = float(q.coeffs[i, j])
            if c == 0.0:
                continue
            couplings[(i, j)] = couplings.get((i, j), 0.0) + c / 4.0
            h[i] += c / 4.0
            h[j] += c / 4.0
            offset += c / 4.0
    return IsingModel(n_spins=dim, h=h, couplings=couplings, offset=offset)


def ising_energy(m: IsingModel, spins: np.ndarray) -> float:
    """Canonical Ising energy ``h . sigma + sum_{i<j} J_ij sigma_i sigma_j`` (offset excluded).

    Every energy stored next to a sampled state is produced by this one
    function so that recomputation reproduces stored values bit for bit.
    """
    spins = np.asarray(spins, dtype=float).ravel()
    if spins.shape[0] != m.n_spins:
        raise ValueError(f"state length {spins.shape[0]} != n_spins {m.n_spins}")
    e = float(m.h @ spins)
    for (i, j), v in m.couplings.items():
        e += v * spins[i] * spins[j]
    return e


def exact_solve(inst: TspInstance) -> tuple[list[int], float]:
    """Held-Karp dynamic program; exact for up to 18 cities.

    Ties between optimal tours break toward the lexicographically smallest
    city order starting from city 0.
    """
    n = inst.n_cities
    if n > HELD_KARP_MAX_CITIES:
        raise ValueError(f"exact solver supports n <= {HELD_KARP_MAX_CITIES}, got {n}")
    if n == 1:
        return [0], 0.0
    d = inst.dist
    full = (1 << n) - 1
    # g[mask, j]: cheapest completion from city j back to 0, having already
    # visited exactly the cities in mask (mask always contains 0 and j).
    g = np.full((full + 1, n), np.inf)
    g[full, :] = d[:, 0]
    for mask in range(full - 1, 0, -1):
        if not mask & 1:
            continue
        absent = [k for k in range(n) if not (mask >> k) & 1]
        if not absent:
            continue
        best = np.full(n, np.inf)
        for k in absent:
            cand = d[:, k] + g[mask | (1 << k), k]
            np.minimum(best, cand, out=best)
        for j in range(n):
            if (mask >> j) & 1:
                g[mask, j] = best[j]

    length = float(g[1, 0])
    tour = [0]
    mask, j = 1, 0
    while mask != full:
        target = g[mask, j]
        for k in range(n):
            if (mask >> k) & 1:
                continue
            val = d[j, k] + g[mask | (1 << k), k]
            if val <= target + 1e-9 * max(1.0, abs(target)):
                tour.append(k)
                mask |= 1 << k
                j = k
                break
    return tour, length


def brute_force_solve(inst: TspInstance) -> tuple[list[int], float]:
    """Full permutation enumeration from a fixed start; reference oracle only."""
    n = inst.n_cities
    if n == 1:
        return [0], 0.0
    best_len = math.inf
    best_tour: list[int] = []
    for perm in itertools.permutations(range(1, n)):
        tour = [0, *perm]
        length = tour_length(inst, tour)
        if length < best_len - 1e-15 or (
            abs(length - best_len) <= 1e-9 and tour < best_tour
        ):
            best_len = length
            best_tour = tour
    return best_tour, float(best_len)
