"""Experiment orchestration: wiring instances, schedules, optimizers, and metrics.

A run cell is one (city count, instance seed, repetition) triple. For the
schedule methods the cell builds the instance and its QUBO, assembles the
objective closure (render the schedule grid, optionally extend chains with
the reference layout, optionally perturb with analog noise, sample the
backend, score the minimum energy over the reads), executes the chosen
optimizer, and writes a history CSV plus a JSON report. Everything is
deterministic given the configuration; every output embeds the resolved
configuration so runs are self-describing.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from annealopt import baselines, embed, metrics, turbo
from annealopt.backend import (
    AnnealRequest,
    ChainLayout,
    NoiseConfig,
    ReadSet,
    chain_extend,
    perturb_ising,
    readset_to_json_dict,
    resolve_chains,
    sqa_sample,
)
from annealopt.schedule import DesignVector, ScheduleBounds, default_bounds, render_grid
from annealopt.tsp import (
    HELD_KARP_MAX_CITIES,
    IsingModel,
    Qubo,
    TspInstance,
    build_qubo,
    decode_tour,
    exact_solve,
    generate_instance,
    qubo_energy,
    qubo_to_ising,
    save_instance,
)

SCHEDULE_METHODS = ("turbo", "rs", "gs")
CLASSICAL_METHODS = ("sa", "ga", "exact")
BACKENDS = ("sqa_noiseless", "sqa_noisy")


@dataclass
class ExperimentConfig:
    """Resolved knobs of one experiment; defaults reproduce the joint-optimization setup."""

    n_cities: tuple = (3,)
    seeds: tuple = (0,)
    method: str = "turbo"
    backend: str = "sqa_noiseless"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    bounds: ScheduleBounds = field(default_factory=default_bounds)
    budget: turbo.BudgetConfig = field(default_factory=turbo.BudgetConfig)
    fixed_t: float | None = None
    fixed_reads: int | None = None
    chains: str = "off"  # off | table
    repetitions: int = 10
    output_dir: str = "runs"
    grid_points: int = 12
    resolution: float = 1e-4
    sweeps_per_us: float = 10.0
    trotter_slices: int = 20
    beta: float = 1.0
    gamma0: float = 3.0
    chain_strength_scale: float = 1.0
    penalty: float | None = None
    sa_sweeps: int = 1000
    sa_reads: int = 2000
    ga_pop: int = 50
    ga_generations: int = 200

    def __post_init__(self) -> None:
        if not self.n_cities or not self.seeds:
            raise ValueError("n_cities and seeds must be nonempty")
        if self.method not in SCHEDULE_METHODS + CLASSICAL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.chains not in ("off", "table"):
            raise ValueError(f"chains must be 'off' or 'table', got {self.chains!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.fixed_t is not None and not (
            self.bounds.t_min <= self.fixed_t <= self.bounds.t_max
        ):
            raise ValueError(f"fixed_t={self.fixed_t} outside schedule bounds")

    def to_dict(self) -> dict:
        return {
            "n_cities": list(self.n_cities),
            "seeds": list(self.seeds),
            "method": self.method,
            "backend": self.backend,
            "noise": asdict(self.noise),
            "bounds": asdict(self.bounds),
            "budget": asdict(self.budget),
            "fixed_t": self.fixed_t,
            "fixed_reads": self.fixed_reads,
            "chains": self.chains,
            "repetitions": self.repetitions,
            "output_dir": str(self.output_dir),
            "grid_points": self.grid_points,
            "resolution": self.resolution,
            "sweeps_per_us": self.sweeps_per_us,
            "trotter_slices": self.trotter_slices,
            "beta": self.beta,
            "gamma0": self.gamma0,
            "chain_strength_scale": self.chain_strength_scale,
            "penalty": self.penalty,
            "sa_sweeps": self.sa_sweeps,
            "sa_reads": self.sa_reads,
            "ga_pop": self.ga_pop,
            "ga_generations": self.ga_generations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "noise" in data and isinstance(data["noise"], dict):
            data["noise"] = NoiseConfig(**data["noise"])
        if "bounds" in data and isinstance(data["bounds"], dict):
            data["bounds"] = ScheduleBounds(**data["bounds"])
        if "budget" in data and isinstance(data["budget"], dict):
            data["budget"] = turbo.BudgetConfig(**data["budget"])
        for key in ("n_cities", "seeds"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass
class EvalOutcome:
    energy: float
    feasible_energy: float | None


@dataclass
class EvalRecord:
    index: int
    t_us: float
    reads: int
    energy: float
    feasible_energy: float | None
    n_feasible: int
    cbf: float
    energies: np.ndarray


class SqaObjective:
    """Objective closure: design vector plus read count in, minimum energy out.

    Keeps per-evaluation records (read energies, feasibility counts, chain
    breaks) so run-level metrics can be assembled afterwards without
    re-sampling.
    """

    def __init__(self, inst: TspInstance, qubo: Qubo, cfg: ExperimentConfig, cell_seed: int):
        self.inst = inst
        self.qubo = qubo
        self.cfg = cfg
        self.cell_seed = cell_seed
        self.logical = qubo_to_ising(qubo)
        self.layout = self._build_layout()
        self.base_model = (
            chain_extend(self.logical, self.layout) if self.layout is not None else self.logical
        )
        self.records: list[EvalRecord] = []
        self.readsets: list[ReadSet] = []
        self.calls = 0

    def _build_layout(self) -> ChainLayout | None:
        if self.cfg.chains != "table":
            return None
        lengths = embed.table_chain_lengths(self.inst.n_cities)
        max_j = max((abs(v) for v in self.logical.couplings.values()), default=1.0)
        kappa = self.cfg.chain_strength_scale * max_j
        return ChainLayout(lengths=tuple(lengths), kappa=kappa)

    def __call__(self, dv: DesignVector, reads: int) -> EvalOutcome:
        idx = self.calls
        self.calls += 1
        cfg = self.cfg
        grid = render_grid(dv, cfg.grid_points, cfg.resolution)

        model = self.base_model
        if cfg.backend == "sqa_noisy":
            noise = NoiseConfig(
                sigma_h_rel=cfg.noise.sigma_h_rel,
                sigma_j_rel=cfg.noise.sigma_j_rel,
                rho_ghost=cfg.noise.rho_ghost,
                sigma_ghost_rel=cfg.noise.sigma_ghost_rel,
                seed=_derive_seed(self.cell_seed, idx, 2),
            )
            model = perturb_ising(model, noise)

        req = AnnealRequest(
            model=model,
            grid=grid,
            reads=reads,
            sweeps_per_us=cfg.sweeps_per_us,
            trotter_slices=cfg.trotter_slices,
            beta=cfg.beta,
            gamma0=cfg.gamma0,
            seed=_derive_seed(self.cell_seed, idx, 1),
        )
        physical = sqa_sample(req)

        n = self.inst.n_cities
        if self.layout is not None:
            tie_rng = np.random.default_rng(
                np.random.SeedSequence((self.cell_seed, idx, 3))
            )
            logical_bits = np.zeros((reads, n * n), dtype=np.uint8)
            breaks = np.zeros((reads, len(self.layout.lengths)), dtype=bool)
            for r in range(reads):
                logical_bits[r], breaks[r] = resolve_chains(
                    physical.bitstrings[r], self.layout, rng=tie_rng
                )
        else:
            logical_bits = physical.bitstrings
            breaks = physical.chain_breaks

        # Sample energies are always scored against the clean penalty QUBO,
        # even when the backend annealed a perturbed or chain-extended model.
        energies = np.array([qubo_energy(self.qubo, logical_bits[r]) for r in range(reads)])
        rs = ReadSet(bitstrings=logical_bits, energies=energies, chain_breaks=breaks)

        feas_mask = np.array(
            [decode_tour(logical_bits[r], n)[0] for r in range(reads)], dtype=bool
        )
        feasible_energy = float(energies[feas_mask].min()) if feas_mask.any() else None
        if breaks.size:
            cbf_val = float(breaks.mean(axis=1).mean())
        else:
            cbf_val = 0.0
        record = EvalRecord(
            index=idx,
            t_us=float(dv.T),
            reads=reads,
            energy=float(energies.min()),
            feasible_energy=feasible_energy,
            n_feasible=int(feas_mask.sum()),
            cbf=cbf_val,
            energies=energies,
        )
        self.records.append(record)
        self.readsets.append(rs)
        return EvalOutcome(energy=record.energy, feasible_energy=feasible_energy)

    def run_metrics(self, e_star: float | None) -> metrics.MetricReport:
        recs = self.records
        total_reads = sum(r.reads for r in recs)
        total_feasible = sum(r.n_feasible for r in recs)
        feas = [r.feasible_energy for r in recs if r.feasible_energy is not None]
        best_feasible = min(feas) if feas else None
        best_idx = int(np.argmin([r.energy for r in recs]))
        best_energy = best_feasible if best_feasible is not None else recs[best_idx].energy
        t_f = recs[best_idx].t_us
        gap = None
        tts_val = None
        if e_star is not None:
            if best_feasible is not None:
                gap = metrics.gap_percent(best_feasible, e_star)
            p_gs = metrics.ground_state_rate(self.readsets, e_star)
            tts_val = metrics.tts(t_f, p_gs)
        return metrics.MetricReport(
            best_energy=best_energy,
            p_succ=total_feasible / total_reads if total_reads else 0.0,
            cbf=recs[best_idx].cbf,
            tts_us=tts_val,
            gap_percent=gap,
            reads_total=total_reads,
            t_f_us=t_f,
        )


def _cell_tag(method: str, n: int, seed: int, rep: int) -> str:
    return f"{method}_N{n}_seed{seed}_rep{rep}"


def run_schedule_cell(
    cfg: ExperimentConfig, n: int, seed: int, rep: int
) -> tuple[turbo.OptimizationHistory, metrics.MetricReport, SqaObjective]:
    """One optimizer run for one instance and repetition."""
    inst = generate_instance(n, seed)
    qubo = build_qubo(inst, cfg.penalty)
    cell_seed = _derive_seed(seed, rep, 100)
    objective = SqaObjective(inst, qubo, cfg, cell_seed)
    opt_seed = _derive_seed(seed, rep, 200)

    if cfg.method == "turbo":
        history = turbo.run_turbo(
            objective, cfg.bounds, cfg.budget, opt_seed,
            fixed_t=cfg.fixed_t, fixed_reads=cfg.fixed_reads,
        )
    elif cfg.method == "rs":
        history = baselines.random_search(
            objective, cfg.bounds, cfg.budget, opt_seed,
            fixed_t=cfg.fixed_t, fixed_reads=cfg.fixed_reads,
        )
    elif cfg.method == "gs":
        history = baselines.greedy_search(
            objective, cfg.bounds, cfg.budget, opt_seed,
            fixed_t=cfg.fixed_t, fixed_reads=cfg.fixed_reads,
        )
    else:
        raise ValueError(f"{cfg.method!r} is not a schedule method")

    e_star = exact_solve(inst)[1] if n <= HELD_KARP_MAX_CITIES else None
    return history, objective.run_metrics(e_star), objective


def run_classical_cell(cfg: ExperimentConfig, n: int, seed: int, rep: int) -> dict:
    """One SA / GA / exact run; returns the report payload."""
    inst = generate_instance(n, seed)
    e_star = exact_solve(inst)[1] if n <= HELD_KARP_MAX_CITIES else None
    cell_seed = _derive_seed(seed, rep, 300)
    t0 = time.perf_counter()
    if cfg.method == "exact":
        tour, length = exact_solve(inst)
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        return {
            "best_energy": length,
            "tour": tour,
            "gap_percent": 0.0,
            "p_succ": 1.0,
            "wall_ms": wall_ms,
        }
    if cfg.method == "sa":
        qubo = build_qubo(inst, cfg.penalty)
        rs = baselines.simulated_annealing(
            qubo, sweeps=cfg.sa_sweeps, reads=cfg.sa_reads, seed=cell_seed
        )
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        p_succ = metrics.success_probability(rs, n)
        feas = [
            float(rs.energies[r])
            for r in range(rs.n_reads)
            if decode_tour(rs.bitstrings[r], n)[0]
        ]
        best = min(feas) if feas else float(rs.energies.min())
        gap = metrics.gap_percent(best, e_star) if (feas and e_star is not None) else None
        return {
            "best_energy": best,
            "gap_percent": gap,
            "p_succ": p_succ,
            "reads_total": rs.n_reads,
            "wall_ms": wall_ms,
        }
    if cfg.method == "ga":
        res = baselines.genetic_algorithm(
            inst, pop=cfg.ga_pop, generations=cfg.ga_generations, seed=cell_seed
        )
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        gap = metrics.gap_percent(res.length, e_star) if e_star is not None else None
        return {
            "best_energy": res.length,
            "tour": res.tour,
            "gap_percent": gap,
            "p_succ": 1.0,
            "wall_ms": wall_ms,
        }
    raise ValueError(f"{cfg.method!r} is not a classical method")


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Execute every (n, seed, repetition) cell and write reports under output_dir."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    try:
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:  # pragma: no cover - environment specific
        raise OSError(f"output directory {out_dir} is not writable") from exc

    config_json = json.dumps(cfg.to_dict(), sort_keys=True)
    reports: list[dict] = []
    for n in cfg.n_cities:
        for seed in cfg.seeds:
            per_rep: list[dict] = []
            for rep in range(cfg.repetitions):
                tag = _cell_tag(cfg.method, n, seed, rep)
                payload: dict = {
                    "method": cfg.method,
                    "n_cities": n,
                    "seed": seed,
                    "rep": rep,
                    "config": cfg.to_dict(),
                }
                if cfg.method in SCHEDULE_METHODS:
                    history, report, objective = run_schedule_cell(cfg, n, seed, rep)
                    history.method = cfg.method
                    history.write_csv(
                        out_dir / f"history_{tag}.csv", config_comment="config " + config_json
                    )
                    best_idx = int(np.argmin([r.energy for r in objective.records]))
                    payload.update(
                        {
                            "metrics": report.to_json_dict(),
                            "complete": history.complete,
                            "incumbent": {
                                "T_us": history.best.dv.T,
                                "thetas": [float(t) for t in history.best.dv.thetas],
                                "reads": history.best.reads,
                            },
                            "best_readset": readset_to_json_dict(
                                objective.readsets[best_idx], n_cities=n
                            ),
                        }
                    )
                else:
                    payload.update(run_classical_cell(cfg, n, seed, rep))
                (out_dir / f"report_{tag}.json").write_text(
                    json.dumps(payload, sort_keys=True, indent=1) + "\n"
                )
                per_rep.append(payload)
                reports.append(payload)
            _write_aggregate(out_dir, cfg, n, seed, per_rep)
    _write_summary(out_dir, cfg, reports)
    return reports


def _metric_values(payloads: list[dict], key: str) -> list[float]:
    vals = []
    for p in payloads:
        v = p.get("metrics", p).get(key)
        if v is not None:
            vals.append(float(v))
    return vals


AGGREGATE_KEYS = ("best_energy", "p_succ", "cbf", "tts_us", "gap_percent", "t_f_us", "wall_ms")


def _write_aggregate(out_dir: Path, cfg: ExperimentConfig, n: int, seed: int, payloads: list[dict]) -> None:
    agg: dict = {
        "method": cfg.method,
        "n_cities": n,
        "seed": seed,
        "repetitions": len(payloads),
        "config": cfg.to_dict(),
    }
    for key in AGGREGATE_KEYS:
        vals = _metric_values(payloads, key)
        if vals:
            agg[key] = {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals)),
                "count": len(vals),
            }
    path = out_dir / f"aggregate_{cfg.method}_N{n}_seed{seed}.json"
    path.write_text(json.dumps(agg, sort_keys=True, indent=1) + "\n")


def _write_summary(out_dir: Path, cfg: ExperimentConfig, reports: list[dict]) -> None:
    """Long-format CSV: one row per (cell, metric), plot-ready."""
    lines = ["method,n_cities,seed,rep,metric,value"]
    for p in reports:
        source = p.get("metrics", p)
        for key in AGGREGATE_KEYS + ("reads_total",):
            v = source.get(key)
            if v is None:
                continue
            lines.append(
                f"{p['method']},{p['n_cities']},{p['seed']},{p['rep']},{key},{float(v)!r}"
            )
    (out_dir / f"summary_{cfg.method}.csv").write_text("\n".join(lines) + "\n")


def write_instances(n_values: list[int], seeds: list[int], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in n_values:
        for seed in seeds:
            inst = generate_instance(n, seed)
            path = out / f"instance_N{n}_seed{seed}.json"
            save_instance(inst, path)
            paths.append(path)
    return paths
