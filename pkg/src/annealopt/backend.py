"""Annealer stand-in: path-integral simulated quantum annealing plus analog noise.

The sampler runs Metropolis dynamics on ``trotter_slices`` coupled replicas of
the problem spins. The rendered schedule grid is read by linear interpolation
at each sweep's virtual time; the transverse weight ``A(s) = 1 - s`` scales
the tunneling field ``Gamma(s) = gamma0 * A(s)`` while the problem weight
``B(s) = s`` scales (h, J). Adjacent replicas are bound by the classical
mapping of the transverse field, ``J_perp(s) = -(P / (2 beta)) *
ln tanh(beta Gamma(s) / P)``. Each read is an independent restart; the
returned state is the replica with the lowest problem energy.

The noise injector perturbs programmed fields and couplers with relative
Gaussian misspecification errors and sprinkles ghost couplings onto a random
fraction of absent edges, mimicking integrated control errors of analog
hardware. The chain layer expands logical spins into ferromagnetic paths and
resolves physical reads back by majority vote, flagging broken chains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from annealopt.schedule import ScheduleGrid
from annealopt.tsp import IsingModel, ising_energy

GAMMA0_DEFAULT = 3.0
MAX_FLIPS_PER_READ = 10 ** 8
_GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class NoiseConfig:
    """Relative scales of the analog-error model; all dimensionless in [0, 1]."""

    sigma_h_rel: float = 0.05
    sigma_j_rel: float = 0.02
    rho_ghost: float = 0.02
    sigma_ghost_rel: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("sigma_h_rel", "sigma_j_rel", "rho_ghost", "sigma_ghost_rel"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True, eq=False)
class AnnealRequest:
    model: IsingModel
    grid: ScheduleGrid
    reads: int
    sweeps_per_us: float = 10.0
    trotter_slices: int = 20
    beta: float = 1.0
    gamma0: float = GAMMA0_DEFAULT
    seed: int = 0

    def __post_init__(self) -> None:
        if self.reads < 1:
            raise ValueError(f"reads must be >= 1, got {self.reads}")
        if self.trotter_slices < 2:
            raise ValueError(f"need >= 2 Trotter slices, got {self.trotter_slices}")


@dataclass(eq=False)
class ReadSet:
    """Per-read logical bitstrings with their energies in QUBO units.

    ``chain_breaks`` has one row of per-chain flags per read; it is empty
    (shape (R, 0)) when no chain layer was involved.
    """

    bitstrings: np.ndarray      # (R, L) uint8
    energies: np.ndarray        # (R,)
    chain_breaks: np.ndarray    # (R, n_chains) bool

    @property
    def n_reads(self) -> int:
        return self.bitstrings.shape[0]

    def best_index(self) -> int:
        return int(np.argmin(self.energies))


@dataclass(frozen=True)
class ChainLayout:
    """Chain length per logical spin and the ferromagnetic intra-chain strength."""

    lengths: tuple
    kappa: float

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if any(l < 1 for l in self.lengths):
            raise ValueError("chain lengths must be >= 1")

    @property
    def n_physical(self) -> int:
        return int(sum(self.lengths))

    def spans(self) -> list[tuple[int, int]]:
        """Physical index range [start, stop) of each chain."""
        out, pos = [], 0
        for l in self.lengths:
            out.append((pos, pos + int(l)))
            pos += int(l)
        return out


def perturb_ising(m: IsingModel, nc: NoiseConfig) -> IsingModel:
    """Apply misspecification noise to (h, J) and ghost couplings to absent edges.

    Sigmas are relative to the dynamic ranges max|h| and max|J|. Unit draws
    happen in a fixed order (all h, all existing J, then the ghost layer), so
    the same seed produces proportionally scaled perturbations when only the
    relative sigmas change.
    """
    rng = np.random.default_rng(nc.seed)
    n = m.n_spins
    max_h = float(np.max(np.abs(m.h))) if n else 0.0
    keys = sorted(m.couplings)
    vals = np.array([m.couplings[k] for k in keys]) if keys else np.empty(0)
    max_j = float(np.max(np.abs(vals))) if keys else 0.0

    eps_h = rng.standard_normal(n)
    eps_j = rng.standard_normal(len(keys))

    sigma_h = nc.sigma_h_rel * max_h
    sigma_j = nc.sigma_j_rel * max_j
    new_h = m.h + sigma_h * eps_h if sigma_h > 0 else m.h.copy()
    new_couplings = dict(zip(keys, vals + sigma_j * eps_j)) if sigma_j > 0 else dict(m.couplings)

    iu, ju = np.triu_indices(n, k=1)
    existing = set(keys)
    absent = [(int(i), int(j)) for i, j in zip(iu, ju) if (int(i), int(j)) not in existing]
    if absent:
        chosen = rng.random(len(absent)) < nc.rho_ghost
        eps_g = rng.standard_normal(len(absent))
        sigma_g = nc.sigma_ghost_rel * max_j
        if sigma_g > 0:
            for (i, j), hit, e in zip(absent, chosen, eps_g):
                if hit:
                    new_couplings[(i, j)] = sigma_g * float(e)
    return IsingModel(n_spins=n, h=new_h, couplings=new_couplings, offset=m.offset)


@njit(cache=True)
def _sqa_reads(h, jd, b_arr, jp_arr, beta, n_slices, seeds, out_states):  # pragma: no cover
    n_reads = seeds.shape[0]
    n_sweeps = b_arr.shape[0]
    n_spins = h.shape[0]
    coef = beta / n_slices
    for r in range(n_reads):
        np.random.seed(seeds[r])
        spins = np.empty((n_slices, n_spins), dtype=np.float64)
        for p in range(n_slices):
            for i in range(n_spins):
                spins[p, i] = 1.0 if np.random.random() < 0.5 else -1.0
        fields = np.zeros((n_slices, n_spins))
        for p in range(n_slices):
            for i in range(n_spins):
                acc = 0.0
                for j in range(n_spins):
                    acc += jd[i, j] * spins[p, j]
                fields[p, i] = acc
        for w in range(n_sweeps):
            b = b_arr[w]
            jp = jp_arr[w]
            for p in range(n_slices):
                pm = p - 1 if p > 0 else n_slices - 1
                pp = p + 1 if p < n_slices - 1 else 0
                for i in range(n_spins):
                    s = spins[p, i]
                    # Flip cost: problem part -2 s B (beta/P) (h + F), replica
                    # part +2 s J_perp (s_prev + s_next), in action units.
                    ds = 2.0 * s * (
                        jp * (spins[pm, i] + spins[pp, i])
                        - coef * b * (h[i] + fields[p, i])
                    )
                    if ds <= 0.0 or np.random.random() < np.exp(-ds):
                        spins[p, i] = -s
                        for j in range(n_spins):
                            fields[p, j] -= 2.0 * s * jd[j, i]
        best_e = np.inf
        best_p = 0
        for p in range(n_slices):
            e = 0.0
            for i in range(n_spins):
                e += h[i] * spins[p, i]
                e += 0.5 * fields[p, i] * spins[p, i]
            if e < best_e:
                best_e = e
                best_p = p
        for i in range(n_spins):
            out_states[r, i] = 1 if spins[best_p, i] > 0 else 0


def sqa_sample(req: AnnealRequest) -> ReadSet:
    """Run the path-integral sampler for every read of the request.

    Monte-Carlo effort scales with the annealing time: the sweep count is
    ``round(sweeps_per_us * T)``. Requests above the per-read flip-attempt cap
    are rejected rather than silently truncated.
    """
    model = req.model
    n_spins = model.n_spins
    total_t = req.grid.total_time
    n_sweeps = max(1, int(round(req.sweeps_per_us * total_t)))
    if n_sweeps * req.trotter_slices * n_spins > MAX_FLIPS_PER_READ:
        raise RuntimeError(
            f"request exceeds {MAX_FLIPS_PER_READ} spin-flip attempts per read; "
            "reduce T, sweeps_per_us, or trotter_slices"
        )

    t_mid = (np.arange(n_sweeps) + 0.5) / n_sweeps * total_t
    s_mid = np.interp(t_mid, req.grid.times, req.grid.values)
    b_arr = s_mid
    gamma = np.maximum(req.gamma0 * (1.0 - s_mid), _GAMMA_FLOOR)
    jp_arr = -0.5 * np.log(np.tanh(req.beta * gamma / req.trotter_slices))

    seeds = np.array(
        [np.random.SeedSequence((req.seed, r)).generate_state(1)[0] for r in range(req.reads)],
        dtype=np.int64,
    )
    jd = _dense_symmetric(model)
    states = np.zeros((req.reads, n_spins), dtype=np.uint8)
    _sqa_reads(model.h, jd, b_arr, jp_arr, float(req.beta), int(req.trotter_slices), seeds, states)

    energies = np.array(
        [ising_energy(model, 2.0 * states[r].astype(np.float64) - 1.0) + model.offset
         for r in range(req.reads)]
    )
    return ReadSet(
        bitstrings=states,
        energies=energies,
        chain_breaks=np.zeros((req.reads, 0), dtype=bool),
    )


def _dense_symmetric(model: IsingModel) -> np.ndarray:
    cached = getattr(model, "_dense_sym", None)
    if cached is None:
        cached = model.dense_j()
        object.__setattr__(model, "_dense_sym", cached)
    return cached


def chain_extend(m: IsingModel, layout: ChainLayout) -> IsingModel:
    """Expand each logical spin into a ferromagnetic path of physical spins.

    The logical field splits evenly across the chain; logical couplings attach
    to the first physical spin of each chain; consecutive chain spins are
    bound with coupling ``-kappa``.
    """
    if len(layout.lengths) != m.n_spins:
        raise ValueError(
            f"layout has {len(layout.lengths)} chains for {m.n_spins} logical spins"
        )
    spans = layout.spans()
    n_phys = layout.n_physical
    h = np.zeros(n_phys)
    couplings: dict = {}
    for v, (start, stop) in enumerate(spans):
        share = m.h[v] / (stop - start)
        for q in range(start, stop):
            h[q] = share
        for q in range(start, stop - 1):
            couplings[(q, q + 1)] = -layout.kappa
    for (u, v), val in m.couplings.items():
        a, b = spans[u][0], spans[v][0]
        lo, hi = (a, b) if a < b else (b, a)
        couplings[(lo, hi)] = couplings.get((lo, hi), 0.0) + val
    return IsingModel(n_spins=n_phys, h=h, couplings=couplings, offset=m.offset)


def resolve_chains(
    physical_read: np.ndarray,
    layout: ChainLayout,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Collapse a physical read to logical bits by majority vote per chain.

    A chain is broken when its spins disagree; exact ties resolve by a coin
    flip from ``rng`` (a fixed-seed generator when none is supplied).
    """
    bits = np.asarray(physical_read).ravel()
    if bits.shape[0] != layout.n_physical:
        raise ValueError(
            f"read length {bits.shape[0]} != total physical spins {layout.n_physical}"
        )
    if rng is None:
        rng = np.random.default_rng(0)
    n = len(layout.lengths)
    logical = np.zeros(n, dtype=np.uint8)
    broken = np.zeros(n, dtype=bool)
    for v, (start, stop) in enumerate(layout.spans()):
        chunk = bits[start:stop]
        ones = int(chunk.sum())
        size = stop - start
        broken[v] = 0 < ones < size
        if 2 * ones > size:
            logical[v] = 1
        elif 2 * ones < size:
            logical[v] = 0
        else:
            logical[v] = rng.integers(0, 2)
    return logical, broken


def cbf(rs: ReadSet) -> float:
    """Mean fraction of broken chains per read; 0 with a warning if no chain layer."""
    if rs.chain_breaks.size == 0:
        warnings.warn("read set has no chain information; CBF reported as 0", stacklevel=2)
        return 0.0
    return float(rs.chain_breaks.mean(axis=1).mean())


def readset_to_json_dict(rs: ReadSet, n_cities: int | None = None) -> dict:
    """Summary export: energies, CBF, feasible fraction, and the best bitstring."""
    from annealopt.metrics import success_probability

    best = rs.best_index()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cbf_val = cbf(rs)
    out = {
        "energies": [float(e) for e in rs.energies],
        "cbf": cbf_val,
        "best_bitstring": "".join(str(int(b)) for b in rs.bitstrings[best]),
    }
    out["p_feasible"] = (
        success_probability(rs, n_cities) if n_cities is not None else None
    )
    return out
