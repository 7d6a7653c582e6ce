"""Analytic model of an environment made of N qubits.

Each environment qubit is hit by an imperfect CNOT whose target operation is
``P(theta) = [[sin, cos], [cos, -sin]]``.  With ``U0 = 1`` and
``U1 = P(theta)^{(x)N}`` everything reduces to scalar formulas in ``theta``
and ``N``: the decoherence factor ``|sin theta|^N``, the single-qubit
Helstrom success ``(1 + |cos theta|)/2``, majority voting over ``n``
intercepted qubits, and its Chernoff/KL lower bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp, xlog1py, xlogy

from .linalg_core import Projector, UnitaryOperator, kron

MAX_MATRIX_QUBITS = 12


class CapabilityError(RuntimeError):
    """The request exceeds what the dense-matrix path can represent."""


def canonical_theta(theta: float) -> float:
    """Map ``theta`` into [0, pi/2] keeping ``|sin|`` and ``|cos|``."""
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    t = math.fmod(abs(theta), math.pi)
    return math.pi - t if t > math.pi / 2 else t


@dataclass(frozen=True)
class ImperfectCnotModel:
    theta: float
    n_env: int

    def __post_init__(self):
        if self.n_env < 1:
            raise ValueError("the environment needs at least one qubit")
        object.__setattr__(self, "theta", canonical_theta(float(self.theta)))

    @property
    def gamma(self) -> float:
        return gamma_closed_form(self.theta, self.n_env)

    @property
    def helstrom_p(self) -> float:
        return helstrom_success(self.theta)

    def pguess(self, n_intercepted: int) -> float:
        if not 1 <= n_intercepted <= self.n_env:
            raise ValueError(f"n_intercepted must lie in [1, {self.n_env}]")
        return majority_pguess(n_intercepted, self.helstrom_p, helstrom_failure(self.theta))


@dataclass(frozen=True)
class InterceptionModel:
    """Eavesdropper resources: ``n = mu(-ln gamma) / (-ln|sin theta|)`` qubits."""

    gamma: float
    mu: Callable[[float], float]
    n_intercepted: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.n_intercepted < 0:
            raise ValueError("n_intercepted must be nonnegative")

    @property
    def mu_at(self) -> float:
        return float(self.mu(-math.log(self.gamma)))

    def lower_bound(self) -> float:
        return pguess_lower_bound(self.gamma, self.mu_at)


def p_oslash(theta: float) -> UnitaryOperator:
    s, c = math.sin(theta), math.cos(theta)
    return UnitaryOperator(np.array([[s, c], [c, -s]], dtype=np.complex128))


def env_unitaries(model: ImperfectCnotModel):
    """Dense ``(U0, U1)`` on ``2**N`` dimensions."""
    if model.n_env > MAX_MATRIX_QUBITS:
        raise CapabilityError(
            f"N={model.n_env} exceeds the dense limit of {MAX_MATRIX_QUBITS} qubits; "
            "use gamma_closed_form instead"
        )
    p = p_oslash(model.theta).matrix
    u1 = kron(*([p] * model.n_env))
    return UnitaryOperator(np.eye(2 ** model.n_env)), UnitaryOperator(u1)


def log_abs_sin(theta: float) -> float:
    """``ln|sin theta|`` with full relative accuracy on the whole circle.

    Near multiples of pi/2 the naive ``log(sin)`` loses all relative digits
    of a tiny result, so the branch is chosen by which of |sin|, |cos| is
    small.
    """
    s, c = abs(math.sin(theta)), abs(math.cos(theta))
    if s < 0.5:
        return math.log(s) if s > 0.0 else -math.inf
    if c < 0.5:
        return 0.5 * math.log1p(-c * c)
    return 0.5 * math.log(0.5 * (1.0 - math.cos(2.0 * theta)))


def log_gamma_closed_form(theta: float, n_env: int) -> float:
    """``ln Gamma = N ln|sin theta|``; stays finite far below double underflow."""
    ls = log_abs_sin(theta)
    if ls == -math.inf:
        return -math.inf
    return n_env * ls


def gamma_closed_form(theta: float, n_env: int) -> float:
    return math.exp(log_gamma_closed_form(theta, n_env))


def min_env_qubits(gamma_target: float, theta: float) -> int:
    """Smallest N with ``|sin theta|^N <= gamma_target``."""
    if not 0.0 < gamma_target < 1.0:
        raise ValueError("gamma_target must lie strictly inside (0, 1)")
    if abs(math.sin(theta)) in (0.0, 1.0):
        raise ValueError("theta must avoid multiples of pi/2 (|sin theta| in {0, 1})")
    ls = log_abs_sin(theta)
    lg = math.log(gamma_target)
    ratio = lg / ls
    n = max(1, math.ceil(ratio))
    # ceil() of a ratio that is an integer up to rounding overshoots by one
    if n > 1 and (n - 1) * ls <= lg + 1e-12 * abs(lg):
        n -= 1
    return n


def helstrom_success(theta: float) -> float:
    return 0.5 * (1.0 + abs(math.cos(theta)))


def helstrom_failure(theta: float) -> float:
    """``1 - helstrom_success(theta)`` without cancellation near theta = 0."""
    return math.sin(canonical_theta(theta) / 2) ** 2


def helstrom_single(theta: float):
    """Single-qubit Helstrom measurement for ``|0>`` vs ``P(theta)|0>``.

    Returns the projector onto the "guess U0" outcome and the success
    probability ``(1 + |cos theta|)/2``.  For ``cos theta >= 0`` the projector
    is ``[[cos^2(t/2), -sin(t)/2], [-sin(t)/2, sin^2(t/2)]]``; when
    ``cos theta < 0`` that outcome is anti-correlated, so its complement is
    returned instead.
    """
    h = theta / 2
    m = np.array(
        [[math.cos(h) ** 2, -math.sin(theta) / 2], [-math.sin(theta) / 2, math.sin(h) ** 2]],
        dtype=np.complex128,
    )
    if math.cos(theta) < 0:
        m = np.eye(2) - m
    proj = Projector(m)
    if proj.rank != 1:
        raise ArithmeticError("Helstrom projector is not rank one")
    return proj, helstrom_success(theta)


@lru_cache(maxsize=512)
def _log_comb(n: int) -> np.ndarray:
    # math.log of the exact integer keeps full precision for any n
    return np.array([math.log(math.comb(n, j)) for j in range(n + 1)])


def _log_pmf(n: int, p: float, q: Optional[float]) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    j = np.arange(n + 1)
    log_q = xlog1py(n - j, -p) if q is None else xlogy(n - j, q)
    return _log_comb(n) + xlogy(j, p) + log_q


def _tails(x: float, n: int, p: float, q: Optional[float]):
    """``(P[X <= x], P[X > x])``; the smaller one is summed, the other is 1 - it."""
    k = math.floor(x)
    if k < 0:
        return 0.0, 1.0
    if k >= n:
        return 1.0, 0.0
    lp = _log_pmf(n, p, q)
    lower = math.exp(logsumexp(lp[: k + 1]))
    upper = math.exp(logsumexp(lp[k + 1:]))
    if lower <= upper:
        return min(lower, 1.0), 1.0 - min(lower, 1.0)
    return 1.0 - min(upper, 1.0), min(upper, 1.0)


def binom_cdf(x: float, n: int, p: float, q: Optional[float] = None) -> float:
    """``P[X <= x]`` for ``X ~ Bin(n, p)`` by log-space summation.

    ``q`` optionally supplies ``1 - p`` when it is known more accurately
    than the subtraction would give.
    """
    return _tails(x, n, p, q)[0]


def binom_sf(x: float, n: int, p: float, q: Optional[float] = None) -> float:
    """``P[X > x]``."""
    return _tails(x, n, p, q)[1]


def majority_pguess(n: int, p: float, q: Optional[float] = None) -> float:
    """Success of a majority vote over ``n`` independent guesses.

    ``1 - F(n/2; n, p)``: an exact tie for even ``n`` counts as a failure.
    """
    if n < 1:
        raise ValueError("n must be positive")
    return binom_sf(n / 2, n, p, q)


def kl_bernoulli(a: float, p: float, q: Optional[float] = None) -> float:
    """``KL(Bern(a) || Bern(p))``; ``q`` may carry an accurate ``1 - p``."""
    q = 1.0 - p if q is None else q
    if not (0.0 < a < 1.0 and 0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("KL divergence needs a and p strictly inside (0, 1)")
    return a * math.log(a / p) + (1.0 - a) * math.log((1.0 - a) / q)


def chernoff_tail_bound(a: float, n: int, p: float, q: Optional[float] = None) -> float:
    """Upper bound ``exp(-n KL(a||p))`` on the binomial CDF ``F(a n; n, p)``."""
    if not a < p:
        raise ValueError(f"the lower-tail bound needs a < p (got a={a}, p={p})")
    return math.exp(-n * kl_bernoulli(a, p, q))


def pguess_lower_bound(gamma: float, mu_at: float) -> float:
    """``1 - exp(-mu(-ln gamma))``; ``mu_at`` is the already-evaluated exponent."""
    if mu_at < 0:
        raise ValueError("mu must be nonnegative")
    return -math.expm1(-mu_at)


class TradeoffPoint(NamedTuple):
    pguess: float
    gamma: float
    slack: float


def tradeoff_check(theta: float, n_env: int) -> TradeoffPoint:
    """Majority-vote Pguess with every qubit intercepted, against Gamma.

    ``slack = pguess + gamma - 1`` is nonnegative whenever the trade-off
    ``Pguess + Gamma >= 1`` holds.
    """
    pg = majority_pguess(n_env, helstrom_success(theta), helstrom_failure(theta))
    g = gamma_closed_form(theta, n_env)
    return TradeoffPoint(pg, g, pg + g - 1.0)
