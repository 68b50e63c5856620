"""Trust-region Bayesian optimization of annealing schedules.

One axis-aligned trust region is kept around the incumbent in normalized
coordinates. Each iteration fits the GP surrogate on all observations,
maximizes expected improvement inside the region with multi-start coordinate
descent, picks a read count from the linear read-growth profile, charges the
evaluation against the annealer-time budget, and then expands, shrinks, or
restarts the region depending on whether the new energy improved the
incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from annealopt import gp
from annealopt.schedule import DesignVector, ScheduleBounds

SQRT_2PI = math.sqrt(2.0 * math.pi)

RHO_DEFAULT = 0.5
PATIENCE_DEFAULT = 3
DELTA_INIT_DEFAULT = 0.4
DELTA_MIN_DEFAULT = 1.0 / 2 ** 6
DELTA_MAX_DEFAULT = 1.0
PROPOSE_MAX_PASSES = 200


@dataclass
class TrustRegion:
    """Axis-aligned box around the incumbent, in unit-cube coordinates."""

    center: np.ndarray
    sides: np.ndarray
    no_improve: int = 0
    patience: int = PATIENCE_DEFAULT
    rho: float = RHO_DEFAULT
    delta_min: float = DELTA_MIN_DEFAULT
    delta_init: float = DELTA_INIT_DEFAULT
    delta_max: float = DELTA_MAX_DEFAULT

    @classmethod
    def fresh(cls, center: np.ndarray, **kwargs) -> "TrustRegion":
        tr = cls(center=np.asarray(center, dtype=float).copy(), sides=None, **kwargs)  # type: ignore[arg-type]
        tr.sides = np.full(len(tr.center), tr.delta_init)
        return tr

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Intersection with the unit cube."""
        lo = np.clip(self.center - self.sides, 0.0, 1.0)
        hi = np.clip(self.center + self.sides, 0.0, 1.0)
        return lo, hi


@dataclass
class BudgetConfig:
    """Per-run evaluation and annealer-time budgets.

    Times are in microseconds. ``qpu_limit=None`` disables the time guard;
    ``n_init=None`` defaults to twice the design dimension.
    """

    t_prog: float = 20000.0
    t_readout: float = 100.0
    t_overhead: float = 0.0
    qpu_limit: float | None = None
    max_evals: int = 40
    r_min: int = 250
    r_max: int = 900
    xi: float = 0.01
    n_init: int | None = None
    restarts: int = 10

    def __post_init__(self) -> None:
        if min(self.t_prog, self.t_readout, self.t_overhead) < 0:
            raise ValueError("times must be nonnegative")
        if self.r_min > self.r_max:
            raise ValueError(f"need r_min <= r_max, got {self.r_min} > {self.r_max}")


@dataclass
class TurboState:
    """Mutable loop state: dataset, incumbent, trust region, budget counters."""

    bounds: ScheduleBounds
    dataset: list = field(default_factory=list)  # [(DesignVector, energy)]
    incumbent: DesignVector | None = None
    incumbent_f: float = math.inf
    tr: TrustRegion | None = None
    evals_used: int = 0
    qpu_time_used: float = 0.0
    fixed_t: float | None = None

    def unit_x(self) -> np.ndarray:
        return np.array([self.bounds.to_unit(dv) for dv, _ in self.dataset])

    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.dataset])


@dataclass
class HistoryEntry:
    iteration: int
    dv: DesignVector
    reads: int
    energy: float
    feasible_energy: float | None
    best_f: float
    feasible_best: float | None
    t_eval_us: float
    tr_sides: np.ndarray | None
    event: str


@dataclass
class OptimizationHistory:
    method: str
    bounds: ScheduleBounds
    entries: list[HistoryEntry] = field(default_factory=list)
    complete: bool = True
    qpu_time_used: float = 0.0

    @property
    def best(self) -> HistoryEntry:
        return min(self.entries, key=lambda e: e.energy)

    @property
    def best_energy(self) -> float:
        return min(e.energy for e in self.entries)

    @property
    def best_feasible_energy(self) -> float | None:
        vals = [e.feasible_energy for e in self.entries if e.feasible_energy is not None]
        return min(vals) if vals else None

    def csv_header(self) -> list[str]:
        m = self.bounds.M
        return (
            ["iter", "T_us"]
            + [f"theta_{m_}" for m_ in range(1, m + 1)]
            + ["reads", "energy", "feasible_best", "t_eval_us", "tr_side_geomean", "event", "method"]
        )

    def csv_rows(self) -> list[list[str]]:
        rows = []
        for e in self.entries:
            if e.tr_sides is None:
                geo = ""
            else:
                geo = repr(float(np.exp(np.mean(np.log(np.maximum(e.tr_sides, 1e-300))))))
            fb = "" if e.feasible_best is None else repr(float(e.feasible_best))
            rows.append(
                [str(e.iteration), repr(float(e.dv.T))]
                + [repr(float(t)) for t in e.dv.thetas]
                + [str(int(e.reads)), repr(float(e.energy)), fb,
                   repr(float(e.t_eval_us)), geo, e.event, self.method]
            )
        return rows

    def write_csv(self, path, config_comment: str | None = None) -> None:
        lines = []
        if config_comment is not None:
            lines.append("# " + config_comment)
        lines.append(",".join(self.csv_header()))
        for row in self.csv_rows():
            lines.append(",".join(row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def expected_improvement(mean, sd, f_best: float, xi: float = 0.0):
    """EI for minimization: ``(f* - mu - xi) Phi(z) + sd phi(z)``; zero at sd = 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    imp = f_best - mean - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / np.where(sd > 0, sd, 1.0), 0.0)
    phi = np.exp(-0.5 * z * z) / SQRT_2PI
    ei = np.where(sd > 0, imp * ndtr(z) + sd * phi, 0.0)
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def adaptive_reads(progress: float, cfg: BudgetConfig) -> int:
    """Linear read growth from r_min at the start to r_max at full progress."""
    progress = min(max(float(progress), 0.0), 1.0)
    return int(math.floor(cfg.r_min + progress * (cfg.r_max - cfg.r_min) + 0.5))


def eval_budget(t_anneal_us: float, reads: int, cfg: BudgetConfig) -> float:
    """Wall-clock estimate of one annealer call, in microseconds."""
    return float(cfg.t_prog + reads * (t_anneal_us + cfg.t_readout + cfg.t_overhead))


def _free_dims(bounds: ScheduleBounds, fixed_t: float | None) -> np.ndarray:
    free = np.ones(bounds.n_dims, dtype=bool)
    if fixed_t is not None:
        free[0] = False
    return free


def propose(state: TurboState, model: gp.GpModel, cfg: BudgetConfig,
            rng: np.random.Generator | None = None) -> DesignVector:
    """Maximize EI inside the trust region with multi-start coordinate descent.

    All restarts advance in lockstep so EI can be evaluated in vectorized
    batches; the best walker (lowest index on ties) wins, which keeps the
    proposal deterministic for a given generator state.
    """
    tr = state.tr
    lo, hi = tr.box()
    free = _free_dims(state.bounds, state.fixed_t)
    if state.fixed_t is not None:
        pinned = state.bounds.to_unit(
            DesignVector(T=state.fixed_t, thetas=np.zeros(state.bounds.M))
        )[0]
        lo[0] = hi[0] = pinned
    span = hi - lo
    if np.all(span <= 0.0):
        return state.bounds.from_unit(np.clip(tr.center, lo, hi))

    rng = rng or np.random.default_rng(0)
    n_walk = max(1, cfg.restarts)
    walkers = lo + rng.uniform(size=(n_walk, len(lo))) * span
    ei_w = _ei_at(model, walkers, state.incumbent_f, cfg.xi)

    steps = span / 4.0
    for _ in range(PROPOSE_MAX_PASSES):
        moved = False
        for j in range(len(lo)):
            if not free[j] or span[j] <= 0.0 or steps[j] <= 0.0:
                continue
            for sign in (1.0, -1.0):
                cand = walkers.copy()
                cand[:, j] = np.clip(cand[:, j] + sign * steps[j], lo[j], hi[j])
                ei_c = _ei_at(model, cand, state.incumbent_f, cfg.xi)
                better = ei_c > ei_w
                if np.any(better):
                    walkers[better] = cand[better]
                    ei_w = np.where(better, ei_c, ei_w)
                    moved = True
        if not moved:
            steps *= 0.5
            rel = steps[free & (span > 0)] / span[free & (span > 0)]
            if rel.size == 0 or float(rel.max()) < 1e-3:
                break
    best = int(np.argmax(ei_w))
    return state.bounds.from_unit(walkers[best])


def _ei_at(model: gp.GpModel, xs: np.ndarray, f_best: float, xi: float) -> np.ndarray:
    means, variances = gp.posterior_batch(model, xs)
    return expected_improvement(means, np.sqrt(variances), f_best, xi)


def update(state: TurboState, s_new: DesignVector, e_new: float) -> str:
    """Record an observation and apply the expand / shrink / restart rule.

    Returns the trust-region event label: ``expand`` (or ``improve`` when the
    sides were already capped), ``shrink``, ``restart``, or ``""`` when only
    the stagnation counter advanced.
    """
    state.dataset.append((s_new, float(e_new)))
    tr = state.tr
    if e_new < state.incumbent_f:
        state.incumbent = s_new
        state.incumbent_f = float(e_new)
        if tr is None:
            return "improve"
        tr.no_improve = 0
        new_sides = np.minimum(tr.sides / tr.rho, tr.delta_max)
        event = "expand" if np.any(new_sides > tr.sides) else "improve"
        tr.sides = new_sides
        tr.center = state.bounds.to_unit(s_new)
        return event
    if tr is None:
        return ""
    tr.no_improve += 1
    if tr.no_improve < tr.patience:
        return ""
    tr.no_improve = 0
    proposed = tr.sides * tr.rho
    tr.center = state.bounds.to_unit(state.incumbent)
    if np.any(proposed < tr.delta_min):
        tr.sides = np.full(len(tr.sides), tr.delta_init)
        return "restart"
    tr.sides = proposed
    return "shrink"


def _objective_result(res) -> tuple[float, float | None]:
    """Objective callbacks may return a bare energy or an object with
    ``energy`` / ``feasible_energy`` attributes."""
    if hasattr(res, "energy"):
        return float(res.energy), getattr(res, "feasible_energy", None)
    return float(res), float(res)


def run_turbo(
    objective,
    bounds: ScheduleBounds,
    cfg: BudgetConfig,
    seed: int,
    fixed_t: float | None = None,
    fixed_reads: int | None = None,
    tr_kwargs: dict | None = None,
    gp_seed_base: int | None = None,
) -> OptimizationHistory:
    """Run the full loop: space-filling init, then fit / propose / evaluate / update.

    ``objective(dv, reads)`` supplies the energy feedback. The run stops at
    ``max_evals`` evaluations or as soon as the next call would push the
    accumulated annealer time past ``qpu_limit``. ``fixed_t`` freezes the
    annealing time (the T dimension is masked out of the search) and
    ``fixed_reads`` freezes the read count, which together reduce the loop to
    shape-only optimization.
    """
    ss = np.random.SeedSequence(seed)
    seeds = ss.generate_state(4)
    rng_propose = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    gp_base = gp_seed_base if gp_seed_base is not None else int(seeds[2] % 2 ** 31)

    state = TurboState(bounds=bounds, fixed_t=fixed_t)
    history = OptimizationHistory(method="turbo", bounds=bounds)
    dims = bounds.n_dims
    n_init = cfg.n_init if cfg.n_init is not None else 2 * dims
    n_init = max(1, min(n_init, cfg.max_evals))
    free = _free_dims(bounds, fixed_t)
    n_free = int(free.sum())

    def reads_for_next() -> int:
        if fixed_reads is not None:
            return int(fixed_reads)
        return adaptive_reads(state.evals_used / cfg.max_evals, cfg)

    def evaluate(dv: DesignVector, event: str | None) -> bool:
        """Charge the budget and record one evaluation; False when the guard trips."""
        reads = reads_for_next()
        t_eval = eval_budget(dv.T, reads, cfg)
        if cfg.qpu_limit is not None and state.qpu_time_used + t_eval > cfg.qpu_limit:
            return False
        energy, feas = _objective_result(objective(dv, reads))
        state.evals_used += 1
        state.qpu_time_used += t_eval
        label = event if event is not None else update(state, dv, energy)
        if event is not None:
            state.dataset.append((dv, energy))
            if energy < state.incumbent_f:
                state.incumbent, state.incumbent_f = dv, energy
        prev = history.entries[-1].feasible_best if history.entries else None
        cands = [v for v in (prev, feas) if v is not None]
        history.entries.append(
            HistoryEntry(
                iteration=state.evals_used,
                dv=dv,
                reads=reads,
                energy=energy,
                feasible_energy=feas,
                best_f=state.incumbent_f,
                feasible_best=min(cands) if cands else None,
                t_eval_us=t_eval,
                tr_sides=None if state.tr is None else state.tr.sides.copy(),
                event=label,
            )
        )
        return True

    # Space-filling initial design over the free dimensions.
    sampler = qmc.LatinHypercube(d=n_free, seed=int(seeds[0]))
    unit_init = sampler.random(n=n_init)
    for row in unit_init:
        u = np.zeros(dims)
        u[free] = row
        dv = bounds.from_unit(u)
        if fixed_t is not None:
            dv = DesignVector(T=float(fixed_t), thetas=dv.thetas)
        if not evaluate(dv, event="init"):
            history.complete = False
            history.qpu_time_used = state.qpu_time_used
            return history
        if state.evals_used >= cfg.max_evals:
            break

    state.tr = TrustRegion.fresh(bounds.to_unit(state.incumbent), **(tr_kwargs or {}))

    while state.evals_used < cfg.max_evals:
        model = gp.fit(
            state.unit_x(), state.energies(),
            gp.GpFitConfig(seed=gp_base + state.evals_used),
        )
        dv = propose(state, model, cfg, rng=rng_propose)
        if fixed_t is not None:
            dv = DesignVector(T=float(fixed_t), thetas=dv.thetas)
        if not evaluate(dv, event=None):
            break

    history.qpu_time_used = state.qpu_time_used
    return history
