"""Gaussian-process regression with a Matern-5/2 ARD kernel plus white noise.

Inputs are expected in the unit cube (the schedule bounds handle the mapping,
with T in log coordinates); targets are standardized internally and posterior
quantities are returned in the original units. Hyperparameters are found by
multi-start L-BFGS-B on the log marginal likelihood in log coordinates, with
analytic gradients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

SQRT5 = math.sqrt(5.0)
NOISE_FLOOR = 1e-8
JITTERS = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass
class GpFitConfig:
    restarts: int = 5
    seed: int = 0
    maxiter: int = 80
    ls_bounds: tuple[float, float] = (5e-3, 2.0)
    sv_bounds: tuple[float, float] = (1e-3, 1e3)
    nv_bounds: tuple[float, float] = (NOISE_FLOOR, 1.0)
    init_lengthscale: float = 1.0
    init_signal_var: float = 1.0
    init_noise_var: float = 1e-4


@dataclass(frozen=True, eq=False)
class GpModel:
    """Fitted surrogate with a cached Cholesky factor of K + noise * I."""

    X: np.ndarray              # (n, p) unit-cube inputs
    y: np.ndarray              # (n,) standardized targets
    y_mean: float
    y_std: float
    lengthscales: np.ndarray   # (p,)
    signal_var: float
    noise_var: float
    chol: np.ndarray           # lower triangular
    alpha: np.ndarray          # (K + noise I)^{-1} y

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def matern52(x: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray, signal_var: float) -> float:
    """Kernel value ``sv * (1 + sqrt5 d + 5/3 d^2) exp(-sqrt5 d)`` at scaled distance d."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ls = np.asarray(lengthscales, dtype=float)
    if x.shape != x2.shape or x.shape != ls.shape:
        raise ValueError("dimension mismatch between inputs and length-scales")
    if np.any(ls <= 0):
        raise ValueError("length-scales must be strictly positive")
    d = math.sqrt(float((((x - x2) / ls) ** 2).sum()))
    return float(signal_var * (1.0 + SQRT5 * d + 5.0 / 3.0 * d * d) * math.exp(-SQRT5 * d))


def _kernel_matrix(xa: np.ndarray, xb: np.ndarray, ls: np.ndarray, sv: float) -> np.ndarray:
    diff = xa[:, None, :] - xb[None, :, :]
    d2 = ((diff / ls) ** 2).sum(axis=-1)
    d = np.sqrt(np.maximum(d2, 0.0))
    return sv * (1.0 + SQRT5 * d + 5.0 / 3.0 * d2) * np.exp(-SQRT5 * d)


def _chol_with_jitter(k: np.ndarray) -> tuple[np.ndarray, float]:
    scale = max(float(np.mean(np.diag(k))), 1.0)
    for jit in JITTERS:
        try:
            return cholesky(k + jit * scale * np.eye(k.shape[0]), lower=True), jit
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("kernel matrix not positive definite after jitter ladder")


def _lml_value_and_grad(
    log_params: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient wrt log hyperparameters.

    Parameter layout: [log ls_1 .. log ls_p, log sv, log nv].
    """
    n, p = x.shape
    ls = np.exp(log_params[:p])
    sv = math.exp(log_params[p])
    nv = math.exp(log_params[p + 1])

    diff = x[:, None, :] - x[None, :, :]
    scaled2 = (diff / ls) ** 2          # (n, n, p)
    d2 = scaled2.sum(axis=-1)
    d = np.sqrt(np.maximum(d2, 0.0))
    expterm = np.exp(-SQRT5 * d)
    k_signal = sv * (1.0 + SQRT5 * d + 5.0 / 3.0 * d2) * expterm
    k = k_signal + nv * np.eye(n)

    low, _ = _chol_with_jitter(k)
    alpha = cho_solve((low, True), y)
    lml = (
        -0.5 * float(y @ alpha)
        - float(np.log(np.diag(low)).sum())
        - 0.5 * n * math.log(2.0 * math.pi)
    )

    k_inv = cho_solve((low, True), np.eye(n))
    a = np.outer(alpha, alpha) - k_inv   # dLML/dtheta = 0.5 tr(a dK/dtheta)

    grad = np.empty(p + 2)
    # dK/dlog ls_j = (5/3) sv (1 + sqrt5 d) exp(-sqrt5 d) * (diff_j / ls_j)^2
    base = 5.0 / 3.0 * sv * (1.0 + SQRT5 * d) * expterm
    for j in range(p):
        grad[j] = 0.5 * float((a * (base * scaled2[:, :, j])).sum())
    grad[p] = 0.5 * float((a * k_signal).sum())
    grad[p + 1] = 0.5 * nv * float(np.trace(a))
    return lml, grad


def build_model(
    x: np.ndarray,
    y: np.ndarray,
    lengthscales: np.ndarray,
    signal_var: float,
    noise_var: float,
    standardize: bool = True,
) -> GpModel:
    """Assemble a model at fixed hyperparameters (no optimization)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError("need matching, nonempty inputs and targets")
    if standardize:
        y_mean = float(y.mean())
        y_std = float(y.std())
        if y_std < 1e-12:
            y_std = 1.0
        ys = (y - y_mean) / y_std
    else:
        y_mean, y_std = 0.0, 1.0
        ys = y.copy()
    ls = np.asarray(lengthscales, dtype=float) * np.ones(x.shape[1])
    noise_var = max(float(noise_var), NOISE_FLOOR)
    k = _kernel_matrix(x, x, ls, signal_var) + noise_var * np.eye(x.shape[0])
    low, _ = _chol_with_jitter(k)
    alpha = cho_solve((low, True), ys)
    return GpModel(
        X=x, y=ys, y_mean=y_mean, y_std=y_std,
        lengthscales=ls, signal_var=float(signal_var), noise_var=noise_var,
        chol=low, alpha=alpha,
    )


def fit(x: np.ndarray, y: np.ndarray, config: GpFitConfig | None = None) -> GpModel:
    """Maximize the log marginal likelihood from several deterministic starts.

    The first start is the fixed default point; the remaining starts are drawn
    log-uniformly inside the search box from a seeded generator, so a fit is
    reproducible given (data, config). The returned model is at least as good
    as every start point.
    """
    cfg = config or GpFitConfig()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    n, p = x.shape
    if n < 1 or n != y.shape[0]:
        raise ValueError("need matching, nonempty inputs and targets")

    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std < 1e-12:
        y_std = 1.0
    ys = (y - y_mean) / y_std

    lo = np.log(np.array([cfg.ls_bounds[0]] * p + [cfg.sv_bounds[0], cfg.nv_bounds[0]]))
    hi = np.log(np.array([cfg.ls_bounds[1]] * p + [cfg.sv_bounds[1], cfg.nv_bounds[1]]))
    opt_bounds = list(zip(lo, hi))

    def clipped(v: np.ndarray) -> np.ndarray:
        return np.clip(v, lo, hi)

    starts = [
        clipped(np.log(np.array(
            [cfg.init_lengthscale] * p + [cfg.init_signal_var, cfg.init_noise_var]
        )))
    ]
    rng = np.random.default_rng(cfg.seed)
    for _ in range(max(0, cfg.restarts - 1)):
        starts.append(rng.uniform(lo, hi))

    def objective(v: np.ndarray) -> tuple[float, np.ndarray]:
        val, grad = _lml_value_and_grad(v, x, ys)
        return -val, -grad

    best_params, best_lml = None, -np.inf
    for start in starts:
        start_lml, _ = _lml_value_and_grad(start, x, ys)
        if start_lml > best_lml:
            best_params, best_lml = start, start_lml
        try:
            res = minimize(
                objective, start, jac=True, method="L-BFGS-B",
                bounds=opt_bounds, options={"maxiter": cfg.maxiter},
            )
        except np.linalg.LinAlgError:
            continue
        cand = clipped(res.x)
        cand_lml, _ = _lml_value_and_grad(cand, x, ys)
        if cand_lml > best_lml:
            best_params, best_lml = cand, cand_lml

    ls = np.exp(best_params[:p])
    sv = math.exp(best_params[p])
    nv = max(math.exp(best_params[p + 1]), NOISE_FLOOR)
    k = _kernel_matrix(x, x, ls, sv) + nv * np.eye(n)
    low, _ = _chol_with_jitter(k)
    alpha = cho_solve((low, True), ys)
    return GpModel(
        X=x, y=ys, y_mean=y_mean, y_std=y_std,
        lengthscales=ls, signal_var=sv, noise_var=nv, chol=low, alpha=alpha,
    )


def posterior_batch(model: GpModel, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at a batch of points, in original target units."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if np.any(xs < -1e-9) or np.any(xs > 1.0 + 1e-9):
        warnings.warn("query point outside the unit cube; clamping", stacklevel=2)
        xs = np.clip(xs, 0.0, 1.0)
    ks = _kernel_matrix(xs, model.X, model.lengthscales, model.signal_var)  # (m, n)
    mean_std = ks @ model.alpha
    v = solve_triangular(model.chol, ks.T, lower=True)
    var_std = np.maximum(model.signal_var - (v ** 2).sum(axis=0), 0.0)
    return model.y_mean + model.y_std * mean_std, (model.y_std ** 2) * var_std


def posterior(model: GpModel, x: np.ndarray) -> tuple[float, float]:
    means, variances = posterior_batch(model, np.atleast_2d(x))
    return float(means[0]), float(variances[0])


def log_marginal_likelihood(model: GpModel) -> float:
    """LML of the stored (standardized) targets, from the cached factor."""
    n = model.n
    return float(
        -0.5 * model.y @ model.alpha
        - np.log(np.diag(model.chol)).sum()
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def lml_gradient(model: GpModel) -> np.ndarray:
    """Gradient of the LML wrt [log ls_1..p, log sv, log nv] at the model's hyperparameters."""
    log_params = np.concatenate(
        (np.log(model.lengthscales), [math.log(model.signal_var), math.log(model.noise_var)])
    )
    _, grad = _lml_value_and_grad(log_params, model.X, model.y)
    return grad


def lml_at(model: GpModel, log_params: np.ndarray) -> float:
    """LML of the model's data at arbitrary log hyperparameters (finite-difference helper)."""
    val, _ = _lml_value_and_grad(np.asarray(log_params, dtype=float), model.X, model.y)
    return val
