"""Annealing-schedule optimization toolkit.

A desk-scale pipeline for tuning quantum-annealing schedules: TSP instances
compiled to penalty-form QUBOs, Fourier-parameterized schedules, a
trust-region Bayesian optimizer, a simulated-quantum-annealing backend with
an analog-noise injector, classical baselines, and an evaluation-metrics
suite with a CLI harness on top.
"""

from annealopt.tsp import (
    TspInstance,
    Qubo,
    IsingModel,
    generate_instance,
    build_qubo,
    qubo_energy,
    decode_tour,
    qubo_to_ising,
    ising_energy,
    exact_solve,
    tour_length,
)
from annealopt.schedule import (
    DesignVector,
    ScheduleBounds,
    ScheduleGrid,
    eval_schedule,
    render_grid,
    default_bounds,
    sample_random,
)
from annealopt.gp import GpModel, GpFitConfig, matern52, fit, posterior, log_marginal_likelihood
from annealopt.turbo import (
    TrustRegion,
    TurboState,
    BudgetConfig,
    expected_improvement,
    propose,
    update,
    adaptive_reads,
    eval_budget,
    run_turbo,
)
from annealopt.backend import (
    NoiseConfig,
    AnnealRequest,
    ReadSet,
    ChainLayout,
    perturb_ising,
    sqa_sample,
    chain_extend,
    resolve_chains,
    cbf,
)
from annealopt.embed import EmbeddingStats, zephyr_size, clique_stats, max_embeddable, chain_bounds
from annealopt.baselines import random_search, greedy_search, simulated_annealing, genetic_algorithm
from annealopt.metrics import MetricReport, success_probability, tts, gap_percent, ground_state_rate
from annealopt.harness import ExperimentConfig, run_experiment

__version__ = "0.1.0"
