"""Numerical search for the best antenna restricted to a monitored subspace.

The environment splits as ``H_E = H_hat (+) H_tilde`` with ``dim H_hat = k``.
The antenna projector is ``P0 = W (+) 1`` where ``W`` is a rank ``k // 2``
projector on the first ``k`` basis vectors.  ``W`` is written as
``V P_ref V^dag`` with ``V = exp(G)`` and ``G`` a k x k anti-Hermitian
generator, so every iterate is an exact projector of the right rank and the
search runs over ``k**2`` unconstrained real numbers.

Guessing probability only needs ``a = U0|0>`` and ``b = U1|0>``:

    Pguess = 1/2 + 1/2 (c + ||Y^dag a_hat||^2 - ||Y^dag b_hat||^2)

where ``Y`` are the first ``k // 2`` columns of ``V``, hats denote the first
``k`` components and ``c`` is the (fixed) weight difference on ``H_tilde``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg_core import LinalgError, Projector, UnitaryOperator, haar_random_unitary
from .scenario import collective_gamma, helstrom_ceiling, pguess_closed_form

log = logging.getLogger(__name__)

# Default instance counts per environment dimension.
DEFAULT_INSTANCES = {20: 15, 50: 8, 100: 11, 200: 4}


def n_params(k: int) -> int:
    return k * k


def generator_from_params(params: np.ndarray, k: int) -> np.ndarray:
    """Anti-Hermitian ``k x k`` matrix from ``k**2`` reals.

    Layout: ``k`` diagonal imaginary parts, then the real parts and then the
    imaginary parts of the strict upper triangle in ``np.triu_indices`` order.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (k * k,):
        raise LinalgError(f"expected {k * k} parameters for k={k}, got {params.shape}")
    iu = np.triu_indices(k, 1)
    m = iu[0].size
    g = np.zeros((k, k), dtype=np.complex128)
    g[iu] = params[k:k + m] + 1j * params[k + m:]
    g = g - g.conj().T
    g[np.diag_indices(k)] = 1j * params[:k]
    return g


def params_gradient(grad_g: np.ndarray, k: int) -> np.ndarray:
    """Pull a complex gradient ``df = Re<grad_g, dG>`` back to the parameters."""
    iu = np.triu_indices(k, 1)
    il = (iu[1], iu[0])
    upper, lower = grad_g[iu], grad_g[il]
    return np.concatenate([
        np.diag(grad_g).imag,
        upper.real - lower.real,
        upper.imag + lower.imag,
    ])


@dataclass(frozen=True, eq=False)
class AntennaParam:
    k: int
    params: np.ndarray

    def __post_init__(self):
        if self.k < 2:
            raise LinalgError("monitored subspace needs k >= 2")
        p = np.array(self.params, dtype=float).reshape(-1)
        if p.size != n_params(self.k):
            raise LinalgError(f"k={self.k} needs {n_params(self.k)} parameters, got {p.size}")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @classmethod
    def zero(cls, k: int) -> "AntennaParam":
        return cls(k, np.zeros(n_params(k)))

    @property
    def rank(self) -> int:
        return self.k // 2

    def generator(self) -> np.ndarray:
        return generator_from_params(self.params, self.k)

    def unitary(self) -> UnitaryOperator:
        return UnitaryOperator(_ExpMap(self.params, self.k).v)


class _ExpMap:
    """``V = exp(G)`` through the eigendecomposition of ``H = -iG``.

    Keeps the eigenbasis around so the adjoint Frechet derivative of the
    exponential costs two matrix products.
    """

    def __init__(self, params: np.ndarray, k: int):
        h = -1j * generator_from_params(params, k)
        lam, q = np.linalg.eigh(h)
        self.lam, self.q = lam, q
        self.phase = np.exp(1j * lam)
        self.v = (q * self.phase) @ q.conj().T

    def columns(self, r: int) -> np.ndarray:
        return (self.q * self.phase) @ self.q[:r].conj().T

    def adjoint_derivative(self, x: np.ndarray) -> np.ndarray:
        """Adjoint of ``E -> d/dt exp(G + tE)`` applied to ``x``."""
        lam = self.lam
        mid = np.exp(0.5j * (lam[:, None] + lam[None, :]))
        phi = mid * np.sinc((lam[:, None] - lam[None, :]) / (2 * np.pi))
        q = self.q
        return q @ ((q.conj().T @ x @ q) * phi.conj()) @ q.conj().T


class _Objective:
    def __init__(self, u0, u1, k: int):
        a = np.asarray(u0, dtype=np.complex128)[:, 0]
        b = np.asarray(u1, dtype=np.complex128)[:, 0]
        d = a.size
        if b.size != d:
            raise LinalgError("u0 and u1 act on different environments")
        if not 2 <= k <= d:
            raise LinalgError(f"k must lie in [2, {d}], got {k}")
        self.k, self.r = k, k // 2
        self.a_hat, self.b_hat = a[:k], b[:k]
        self.tail = float(np.vdot(a[k:], a[k:]).real - np.vdot(b[k:], b[k:]).real)

    def value(self, params) -> tuple:
        em = _ExpMap(params, self.k)
        y = em.columns(self.r)
        alpha = self.a_hat.conj() @ y
        beta = self.b_hat.conj() @ y
        f = 0.5 + 0.5 * (self.tail + np.vdot(alpha, alpha).real - np.vdot(beta, beta).real)
        return f, (em, alpha, beta)

    def gradient(self, cache) -> np.ndarray:
        em, alpha, beta = cache
        grad_v = np.zeros((self.k, self.k), dtype=np.complex128)
        grad_v[:, :self.r] = np.outer(self.a_hat, alpha) - np.outer(self.b_hat, beta)
        return params_gradient(em.adjoint_derivative(grad_v), self.k)


def constrained_projector(param: AntennaParam, env_dim: int) -> Projector:
    """``V P_ref V^dag (+) 1`` on the full environment."""
    k = param.k
    if not 2 <= k <= env_dim:
        raise LinalgError(f"k must lie in [2, {env_dim}], got {k}")
    y = _ExpMap(param.params, k).columns(param.rank)
    p = np.eye(env_dim, dtype=np.complex128)
    p[:k, :k] = y @ y.conj().T
    return Projector(p)


def pguess_objective(u0, u1, p0) -> float:
    return pguess_closed_form(u0, u1, p0)


def objective_and_gradient(u0, u1, param: AntennaParam):
    """Pguess and its gradient with respect to the generator parameters."""
    obj = _Objective(u0, u1, param.k)
    f, cache = obj.value(param.params)
    return f, obj.gradient(cache)


@dataclass
class OptimizerOptions:
    max_iters: int = 2000
    step_size: float = 1.0
    restarts: int = 5
    tol: float = 1e-10
    window: int = 20
    max_step_growth: float = 2.0 ** 20
    init_scale: float = 1.0


@dataclass
class AntennaResult:
    best_pguess: float
    best_param: AntennaParam
    trace: list
    iterations: int
    converged: bool
    restart_values: list = field(default_factory=list)


def _ascend(obj: _Objective, x0: np.ndarray, opts: OptimizerOptions):
    """Gradient ascent with step halving on decrease and doubling on success."""
    x = x0
    f, cache = obj.value(x)
    trace = [f]
    step = opts.step_size
    max_step = opts.step_size * opts.max_step_growth
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = obj.gradient(cache)
        if not np.any(g):
            converged = True
            break
        for _ in range(64):
            x_t = x + step * g
            f_t, cache_t = obj.value(x_t)
            if f_t >= f:
                break
            step *= 0.5
        else:
            # no ascent direction left at machine precision
            converged = True
            break
        x, f, cache = x_t, f_t, cache_t
        trace.append(f)
        step = min(2.0 * step, max_step)
        if len(trace) > opts.window and trace[-1] - trace[-1 - opts.window] < opts.tol:
            converged = True
            break
    return f, x, trace, it, converged


def optimize_antenna(u0, u1, k: int, rng: np.random.Generator,
                     opts: Optional[OptimizerOptions] = None) -> AntennaResult:
    """Maximize Pguess over rank ``k // 2`` projectors on the monitored block.

    Restart 0 starts from the zero generator (the diagonal reference
    projector); the remaining ``opts.restarts - 1`` start from Gaussian
    generators drawn from ``rng``.  Non-convergence is reported through
    ``converged`` rather than raised.
    """
    opts = opts or OptimizerOptions()
    obj = _Objective(u0, u1, k)
    best = None
    values = []
    for i in range(max(1, opts.restarts)):
        if i == 0:
            x0 = np.zeros(n_params(k))
        else:
            x0 = opts.init_scale * rng.standard_normal(n_params(k))
        res = _ascend(obj, x0, opts)
        values.append(res[0])
        if best is None or res[0] > best[0]:
            best = res
    f, x, trace, iters, converged = best
    return AntennaResult(
        best_pguess=float(f),
        best_param=AntennaParam(k, x),
        trace=trace,
        iterations=iters,
        converged=converged,
        restart_values=values,
    )


def default_k_grid(env_dim: int, points: int = 10) -> list:
    """``points`` evenly spaced integers from 2 to ``env_dim`` inclusive."""
    grid = np.unique(np.round(np.linspace(2, env_dim, points)).astype(int))
    return [int(k) for k in grid]


def derive_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(x) for x in key]).generate_state(1, np.uint64)[0])


@dataclass
class SweepConfig:
    env_dims: list = field(default_factory=lambda: sorted(DEFAULT_INSTANCES))
    k_grid: dict = field(default_factory=dict)
    instances: dict = field(default_factory=lambda: dict(DEFAULT_INSTANCES))
    restarts: int = 5
    max_iters: int = 2000
    step_size: float = 1.0
    k_points: int = 10
    seed: int = 0

    def __post_init__(self):
        self.env_dims = [int(d) for d in self.env_dims]
        if not self.env_dims:
            raise ValueError("env_dims must not be empty")
        self.k_grid = {int(d): [int(k) for k in ks] for d, ks in self.k_grid.items()}
        self.instances = {int(d): int(n) for d, n in self.instances.items()}
        for d in self.env_dims:
            if d < 2:
                raise ValueError(f"environment dimension {d} is below 2")
            ks = self.ks(d)
            if not ks or min(ks) < 2 or max(ks) > d:
                raise ValueError(f"k values for D={d} must lie in [2, {d}], got {ks}")
            if self.n_instances(d) < 1:
                raise ValueError(f"D={d} needs at least one instance")
        if self.restarts < 1 or self.max_iters < 1 or self.step_size <= 0 or self.k_points < 1:
            raise ValueError("restarts, max_iters, k_points and step_size must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def ks(self, d: int) -> list:
        return self.k_grid.get(d) or default_k_grid(d, self.k_points)

    def n_instances(self, d: int) -> int:
        return self.instances.get(d, DEFAULT_INSTANCES.get(d, 1))

    def options(self) -> OptimizerOptions:
        return OptimizerOptions(max_iters=self.max_iters, step_size=self.step_size,
                                restarts=self.restarts)


@dataclass(frozen=True)
class SweepRecord:
    env_dim: int
    k: int
    instance: int
    seed: int
    pguess: float
    ceiling: float
    iterations: int
    converged: bool

    @property
    def k_over_d(self) -> float:
        return self.k / self.env_dim


@dataclass(frozen=True)
class SweepAggregate:
    env_dim: int
    k: int
    k_over_d: float
    mean: float
    std: float
    mean_ceiling: float
    n: int


@dataclass
class SweepResult:
    records: list
    aggregates: list


def aggregate(records) -> list:
    """Unweighted mean and sample std over instances for each (D, k)."""
    cells = {}
    for r in records:
        cells.setdefault((r.env_dim, r.k), []).append(r)
    out = []
    for (d, k) in sorted(cells):
        vals = np.array([r.pguess for r in cells[(d, k)]])
        ceil = np.array([r.ceiling for r in cells[(d, k)]])
        std = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
        out.append(SweepAggregate(d, k, k / d, float(np.mean(vals)), std,
                                  float(np.mean(ceil)), int(vals.size)))
    return out


def _sweep_cell(task, opts: OptimizerOptions) -> SweepRecord:
    d, inst, inst_seed, k, opt_seed, u0, u1 = task
    res = optimize_antenna(u0, u1, k, np.random.default_rng(opt_seed), opts)
    ceiling = helstrom_ceiling(collective_gamma(u0, u1))
    log.debug("D=%d inst=%d k=%d pguess=%.6f iters=%d", d, inst, k, res.best_pguess, res.iterations)
    return SweepRecord(d, k, inst, inst_seed, res.best_pguess, ceiling, res.iterations, res.converged)


def sample_instance(env_dim: int, seed: int):
    rng = np.random.default_rng(seed)
    return haar_random_unitary(env_dim, rng), haar_random_unitary(env_dim, rng)


def run_sweep(config: SweepConfig, threads: int = 1) -> SweepResult:
    """Optimize every (D, instance, k) cell and aggregate over instances.

    Seeds are derived from ``(config.seed, D, instance)`` for the Haar pair and
    ``(config.seed, D, instance, k)`` for the optimizer restarts, so results do
    not depend on ``threads`` or on the execution order.
    """
    opts = config.options()
    tasks = []
    for d in config.env_dims:
        for inst in range(config.n_instances(d)):
            inst_seed = derive_seed(config.seed, d, inst)
            u0, u1 = sample_instance(d, inst_seed)
            for k in config.ks(d):
                tasks.append((d, inst, inst_seed, k, derive_seed(config.seed, d, inst, k), u0, u1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: _sweep_cell(t, opts), tasks))
    else:
        records = [_sweep_cell(t, opts) for t in tasks]
    return SweepResult(records=records, aggregates=aggregate(records))
