"""Comparison methods: schedule-space random and greedy search, classical SA and GA.

Random and greedy search consume exactly the evaluation budget and the same
read-growth profile as the trust-region optimizer, which keeps method
comparisons read-for-read fair. Simulated annealing and the genetic algorithm
attack the problem directly, bypassing schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from annealopt.backend import ReadSet
from annealopt.schedule import DesignVector, ScheduleBounds, sample_random
from annealopt.tsp import IsingModel, Qubo, TspInstance, ising_energy, qubo_to_ising, tour_length
from annealopt.turbo import (
    BudgetConfig,
    HistoryEntry,
    OptimizationHistory,
    _objective_result,
    adaptive_reads,
    eval_budget,
)

GS_STEP_LOG_T = 1.5
GS_STEP_THETA_FRAC = 0.1
GS_STEP_DECAY = 0.7
SA_DEFAULT_READS = 2000
SA_DEFAULT_SWEEPS = 1000


@dataclass
class GsState:
    """Greedy-search walker: the current point plus per-coordinate step sizes."""

    current: DesignVector
    step_log_t: float
    step_theta: np.ndarray
    evals_used: int = 0
    best_f: float = math.inf


def _record(history, dv, reads, energy, feas, best_f, t_eval, event) -> None:
    prev = history.entries[-1].feasible_best if history.entries else None
    cands = [v for v in (prev, feas) if v is not None]
    history.entries.append(
        HistoryEntry(
            iteration=len(history.entries) + 1,
            dv=dv,
            reads=reads,
            energy=energy,
            feasible_energy=feas,
            best_f=best_f,
            feasible_best=min(cands) if cands else None,
            t_eval_us=t_eval,
            tr_sides=None,
            event=event,
        )
    )


def random_search(
    objective,
    bounds: ScheduleBounds,
    cfg: BudgetConfig,
    seed: int,
    fixed_t: float | None = None,
    fixed_reads: int | None = None,
) -> OptimizationHistory:
    """Independent draws from the search box, incumbent kept, budget matched."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    history = OptimizationHistory(method="rs", bounds=bounds)
    used = 0.0
    best = math.inf
    for i in range(cfg.max_evals):
        dv = sample_random(bounds, rng, fixed_t=fixed_t)
        reads = fixed_reads if fixed_reads is not None else adaptive_reads(i / cfg.max_evals, cfg)
        t_eval = eval_budget(dv.T, reads, cfg)
        if cfg.qpu_limit is not None and used + t_eval > cfg.qpu_limit:
            break
        energy, feas = _objective_result(objective(dv, reads))
        used += t_eval
        event = "improve" if energy < best else ""
        best = min(best, energy)
        _record(history, dv, reads, energy, feas, best, t_eval, event)
    history.qpu_time_used = used
    return history


def greedy_search(
    objective,
    bounds: ScheduleBounds,
    cfg: BudgetConfig,
    seed: int,
    fixed_t: float | None = None,
    fixed_reads: int | None = None,
    step_log_t: float = GS_STEP_LOG_T,
    step_theta_frac: float = GS_STEP_THETA_FRAC,
    decay: float = GS_STEP_DECAY,
) -> OptimizationHistory:
    """Coordinate-wise hill descent from the geometric-mean annealing time.

    One random coordinate is perturbed per step: T moves multiplicatively in
    the log domain, coefficients move by a clipped linear step. Only strictly
    improving moves are taken; when both signs fail, that coordinate's step
    decays.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    history = OptimizationHistory(method="gs", bounds=bounds)
    t_geo = math.sqrt(bounds.t_min * bounds.t_max)
    start_t = float(fixed_t) if fixed_t is not None else t_geo
    state = GsState(
        current=DesignVector(T=start_t, thetas=np.zeros(bounds.M)),
        step_log_t=step_log_t,
        step_theta=np.array(
            [step_theta_frac * (bounds.theta_box(m)[1]) for m in range(1, bounds.M + 1)]
        ),
    )
    used = 0.0

    def try_eval(dv: DesignVector, event: str) -> float | None:
        nonlocal used
        reads = (
            fixed_reads
            if fixed_reads is not None
            else adaptive_reads(state.evals_used / cfg.max_evals, cfg)
        )
        t_eval = eval_budget(dv.T, reads, cfg)
        if cfg.qpu_limit is not None and used + t_eval > cfg.qpu_limit:
            return None
        energy, feas = _objective_result(objective(dv, reads))
        state.evals_used += 1
        used += t_eval
        improved = energy < state.best_f
        state.best_f = min(state.best_f, energy)
        _record(history, dv, reads, energy, feas, state.best_f,
                t_eval, "improve" if improved else event)
        return energy

    coords = list(range(bounds.n_dims))
    if fixed_t is not None:
        coords = coords[1:]

    start_energy = try_eval(state.current, event="init")
    if start_energy is None:
        history.complete = False
        return history
    f_cur = start_energy

    while state.evals_used < cfg.max_evals and coords:
        j = coords[int(rng.integers(len(coords)))]
        accepted = False
        for sign in (1.0, -1.0):
            if state.evals_used >= cfg.max_evals:
                break
            cand = _perturb(state, bounds, j, sign)
            energy = try_eval(cand, event="")
            if energy is None:
                history.qpu_time_used = used
                return history
            if energy < f_cur:
                state.current = cand
                f_cur = energy
                accepted = True
                break
        if not accepted:
            if j == 0:
                state.step_log_t = 1.0 + (state.step_log_t - 1.0) * decay
            else:
                state.step_theta[j - 1] *= decay
    history.qpu_time_used = used
    return history


def _perturb(state: GsState, bounds: ScheduleBounds, j: int, sign: float) -> DesignVector:
    if j == 0:
        factor = state.step_log_t if sign > 0 else 1.0 / state.step_log_t
        t = min(max(state.current.T * factor, bounds.t_min), bounds.t_max)
        return DesignVector(T=t, thetas=state.current.thetas.copy())
    m = j  # harmonic index is 1-based like the coordinate index
    lo, hi = bounds.theta_box(m)
    thetas = state.current.thetas.copy()
    thetas[m - 1] = min(max(thetas[m - 1] + sign * state.step_theta[m - 1], lo), hi)
    return DesignVector(T=state.current.T, thetas=thetas)


@njit(cache=True)
def _sa_reads(h, jd, betas, init_spins, seeds, out_states):  # pragma: no cover
    n_reads, n_spins = init_spins.shape
    n_sweeps = betas.shape[0]
    for r in range(n_reads):
        np.random.seed(seeds[r])
        spins = init_spins[r].astype(np.float64)
        fields = np.zeros(n_spins)
        for i in range(n_spins):
            acc = 0.0
            for j in range(n_spins):
                acc += jd[i, j] * spins[j]
            fields[i] = acc
        for w in range(n_sweeps):
            beta = betas[w]
            for i in range(n_spins):
                de = -2.0 * spins[i] * (h[i] + fields[i])
                if de <= 0.0 or np.random.random() < np.exp(-beta * de):
                    s = spins[i]
                    spins[i] = -s
                    for j in range(n_spins):
                        fields[j] -= 2.0 * s * jd[j, i]
        for i in range(n_spins):
            out_states[r, i] = 1 if spins[i] > 0 else 0


def initial_spin_states(seed: int, reads: int, n_spins: int) -> np.ndarray:
    """Per-read random starting spins, derived from (seed, read index)."""
    out = np.empty((reads, n_spins), dtype=np.int8)
    for r in range(reads):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        out[r] = rng.choice(np.array([-1, 1], dtype=np.int8), size=n_spins)
    return out


def auto_beta_schedule(model: IsingModel, sweeps: int) -> np.ndarray:
    """Geometric ramp scaled to the model's own energy range, neal-style."""
    jd = np.zeros((model.n_spins, model.n_spins))
    for (i, j), v in model.couplings.items():
        jd[i, j] += abs(v)
        jd[j, i] += abs(v)
    reach = np.abs(model.h) + jd.sum(axis=1)
    de_max = 2.0 * float(reach.max()) if reach.size else 0.0
    nz = [abs(v) for v in model.couplings.values() if v != 0.0]
    nz += [abs(v) for v in model.h if v != 0.0]
    de_min = 2.0 * min(nz) if nz else 1.0
    beta_hot = math.log(2.0) / de_max if de_max > 0 else 0.1
    beta_cold = math.log(100.0) / de_min if de_min > 0 else 10.0
    beta_cold = max(beta_cold, beta_hot * 2.0)
    if sweeps == 1:
        return np.array([beta_cold])
    ratio = (beta_cold / beta_hot) ** (1.0 / (sweeps - 1))
    return beta_hot * ratio ** np.arange(sweeps)


def simulated_annealing(
    q: Qubo,
    sweeps: int = SA_DEFAULT_SWEEPS,
    beta_schedule: tuple[float, float] | None = None,
    reads: int = SA_DEFAULT_READS,
    seed: int = 0,
) -> ReadSet:
    """Single-flip Metropolis on the QUBO's Ising image with a geometric beta ramp."""
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")
    if reads < 1:
        raise ValueError(f"reads must be >= 1, got {reads}")
    model = qubo_to_ising(q)
    if beta_schedule is None:
        betas = auto_beta_schedule(model, sweeps)
    else:
        hot, cold = beta_schedule
        if sweeps == 1:
            betas = np.array([float(cold)])
        else:
            ratio = (cold / hot) ** (1.0 / (sweeps - 1))
            betas = hot * ratio ** np.arange(sweeps)
    init = initial_spin_states(seed, reads, model.n_spins)
    seeds = np.array(
        [np.random.SeedSequence((seed, r, 1)).generate_state(1)[0] for r in range(reads)],
        dtype=np.int64,
    )
    jd = model.dense_j()
    states = np.zeros((reads, model.n_spins), dtype=np.uint8)
    _sa_reads(model.h, jd, betas, init, seeds, states)
    energies = np.array(
        [ising_energy(model, 2.0 * states[r].astype(np.float64) - 1.0) + model.offset
         for r in range(reads)]
    )
    return ReadSet(
        bitstrings=states,
        energies=energies,
        chain_breaks=np.zeros((reads, 0), dtype=bool),
    )


@dataclass
class GaResult:
    tour: list[int]
    length: float
    best_per_generation: list[float] = field(default_factory=list)


def genetic_algorithm(
    inst: TspInstance,
    pop: int = 50,
    generations: int = 200,
    seed: int = 0,
    mutation_rate: float = 0.2,
    tournament: int = 3,
) -> GaResult:
    """Permutation-encoded evolutionary search for the shortest closed tour.

    Tournament selection, order crossover, swap mutation, and one elite copied
    unchanged each generation, so the best fitness never regresses.
    """
    if pop < 2:
        raise ValueError(f"population must be >= 2, got {pop}")
    n = inst.n_cities
    rng = np.random.default_rng(seed)
    population = [list(rng.permutation(n)) for _ in range(pop)]
    fitness = np.array([tour_length(inst, t) for t in population])
    best_hist = []

    def select() -> list[int]:
        idx = rng.integers(0, pop, size=tournament)
        return population[int(idx[np.argmin(fitness[idx])])]

    for _ in range(generations):
        order = int(np.argmin(fitness))
        best_hist.append(float(fitness[order]))
        next_pop = [list(population[order])]  # elitism
        while len(next_pop) < pop:
            child = _order_crossover(select(), select(), rng) if n > 1 else [0]
            if n > 1 and rng.random() < mutation_rate:
                a, b = rng.integers(0, n, size=2)
                child[a], child[b] = child[b], child[a]
            next_pop.append(child)
        population = next_pop
        fitness = np.array([tour_length(inst, t) for t in population])

    best = int(np.argmin(fitness))
    best_hist.append(float(fitness[best]))
    return GaResult(
        tour=[int(c) for c in population[best]],
        length=float(fitness[best]),
        best_per_generation=best_hist,
    )


def _order_crossover(p1: list[int], p2: list[int], rng: np.random.Generator) -> list[int]:
    n = len(p1)
    a, b = sorted(rng.integers(0, n, size=2))
    child = [-1] * n
    child[a:b + 1] = p1[a:b + 1]
    taken = set(child[a:b + 1])
    pos = (b + 1) % n
    for k in range(n):
        gene = p2[(b + 1 + k) % n]
        if gene not in taken:
            child[pos] = gene
            pos = (pos + 1) % n
    return child
