"""The system / apparatus / environment / antenna interaction chain.

The measured qubit S starts in |+>, the apparatus A, environment E and
antenna V all start in |0>.  Three controlled unitaries act in order:

* ``U_SA``: CNOT from S onto A (premeasurement in the computational basis),
* ``U_AE``: ``|0><0| (x) U0 + |1><1| (x) U1`` (decoherence of A),
* ``U_EV``: ``P0 (x) 1 + P1 (x) X`` (passive antenna reading E).

Production code evaluates the closed forms in O(D^2) by acting on ``|0>_E``
only.  :func:`sequential_final_state` multiplies the full ``8D x 8D``
unitaries and is kept as the independent check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg_core import (
    ATOL,
    DensityOperator,
    LinalgError,
    Projector,
    StateVector,
    UnitaryOperator,
    kron,
    reduced_state,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
KET0 = np.array([1, 0], dtype=np.complex128)
KET_PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2.0)
PROJ0 = np.diag([1.0, 0.0]).astype(np.complex128)
PROJ1 = np.diag([0.0, 1.0]).astype(np.complex128)

# Subsystem positions in the (S, A, E, V) ordering.
S, A, E, V = 0, 1, 2, 3


class ConsistencyError(ArithmeticError):
    """Two independent evaluation paths disagree beyond tolerance."""


@dataclass(frozen=True, eq=False)
class EavesdropScenario:
    """One attack instance: environment dynamics and the antenna projector."""

    u0: UnitaryOperator
    u1: UnitaryOperator
    p0: Projector

    def __post_init__(self):
        for name in ("u0", "u1"):
            val = getattr(self, name)
            if not isinstance(val, UnitaryOperator):
                object.__setattr__(self, name, UnitaryOperator(val))
        if not isinstance(self.p0, Projector):
            object.__setattr__(self, "p0", Projector(self.p0))
        if not (self.u0.dim == self.u1.dim == self.p0.dim):
            raise LinalgError(
                f"environment dims disagree: u0={self.u0.dim}, u1={self.u1.dim}, p0={self.p0.dim}"
            )

    @property
    def env_dim(self) -> int:
        return self.u0.dim

    @property
    def dims(self) -> tuple:
        return (2, 2, self.env_dim, 2)

    @property
    def p1(self) -> np.ndarray:
        return np.eye(self.env_dim) - self.p0.matrix


def build_usa() -> UnitaryOperator:
    return UnitaryOperator(kron(PROJ0, np.eye(2)) + kron(PROJ1, SIGMA_X))


def build_uae(u0, u1) -> UnitaryOperator:
    m0, m1 = np.asarray(u0, dtype=np.complex128), np.asarray(u1, dtype=np.complex128)
    if m0.shape != m1.shape:
        raise LinalgError(f"u0 {m0.shape} and u1 {m1.shape} differ in shape")
    return UnitaryOperator(kron(PROJ0, m0) + kron(PROJ1, m1))


def build_uev(p0) -> UnitaryOperator:
    p = np.asarray(p0, dtype=np.complex128)
    return UnitaryOperator(kron(p, np.eye(2)) + kron(np.eye(p.shape[0]) - p, SIGMA_X))


def _env_records(sc: EavesdropScenario):
    """``U0|0>`` and ``U1|0>``, i.e. the first columns of the unitaries."""
    return sc.u0.matrix[:, 0], sc.u1.matrix[:, 0]


def final_state_saev(sc: EavesdropScenario) -> StateVector:
    """Final four-party state from its closed form.

    ``(P0 U0|0000> + P1 U0|0001> + P0 U1|1100> + P1 U1|1101>) / sqrt(2)``
    where the operators act on the E slot.
    """
    a, b = _env_records(sc)
    p0 = sc.p0.matrix
    p1 = sc.p1
    psi = np.zeros((2, 2, sc.env_dim, 2), dtype=np.complex128)
    psi[0, 0, :, 0] = p0 @ a
    psi[0, 0, :, 1] = p1 @ a
    psi[1, 1, :, 0] = p0 @ b
    psi[1, 1, :, 1] = p1 @ b
    return StateVector(sc.dims, psi.reshape(-1) / np.sqrt(2.0))


def sequential_final_state(sc: EavesdropScenario) -> StateVector:
    """Same state as :func:`final_state_saev` by explicit matrix products."""
    d = sc.env_dim
    psi0 = kron(KET_PLUS[:, None], KET0[:, None], np.eye(d)[:, :1], KET0[:, None])[:, 0]
    u_sa = kron(build_usa(), np.eye(2 * d))
    u_ae = kron(np.eye(2), build_uae(sc.u0, sc.u1), np.eye(2))
    u_ev = kron(np.eye(4), build_uev(sc.p0))
    return StateVector(sc.dims, u_ev @ (u_ae @ (u_sa @ psi0)))


def phi_sae(u0, u1) -> StateVector:
    """State after premeasurement and decoherence, before the antenna acts."""
    a = np.asarray(u0, dtype=np.complex128)[:, 0]
    b = np.asarray(u1, dtype=np.complex128)[:, 0]
    phi = np.zeros((2, 2, a.size), dtype=np.complex128)
    phi[0, 0] = a
    phi[1, 1] = b
    return StateVector((2, 2, a.size), phi.reshape(-1) / np.sqrt(2.0))


def decoherence_overlap(u0, u1) -> complex:
    """``<0| U1^dag U0 |0>``, the complex corner of the S-A state (times 2)."""
    a = np.asarray(u0, dtype=np.complex128)[:, 0]
    b = np.asarray(u1, dtype=np.complex128)[:, 0]
    if a.shape != b.shape:
        raise LinalgError("u0 and u1 act on different environments")
    return complex(np.vdot(b, a))


def collective_gamma(u0, u1) -> float:
    """Collective decoherence factor ``|<0| U1^dag U0 |0>|``, clipped to [0, 1]."""
    return min(1.0, abs(decoherence_overlap(u0, u1)))


def rho_sa(sc: EavesdropScenario) -> DensityOperator:
    """Reduced S-A state.  The antenna plays no role here.

    Only the four corners are nonzero: 1/2 on the diagonal at ``|00>`` and
    ``|11>`` and ``<0|U1^dag U0|0>/2`` in position (00, 11).
    """
    return reduced_state(phi_sae(sc.u0, sc.u1), keep=(S, A))


def rho_sa_closed_form(u0, u1) -> np.ndarray:
    g = decoherence_overlap(u0, u1)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = m[3, 3] = 0.5
    m[0, 3] = g / 2
    m[3, 0] = np.conj(g) / 2
    return m


def rho_av(sc: EavesdropScenario) -> DensityOperator:
    """Reduced apparatus-antenna state, basis order ``|AV>`` with A slow.

    Diagonal entries are ``(<U0†P0U0>, <U0†P1U0>, <U1†P0U1>, <U1†P1U1>) / 2``
    for ``|00>, |01>, |10>, |11>``; off-diagonals vanish.
    """
    return reduced_state(final_state_saev(sc), keep=(A, V))


def rho_av_diagonal_closed_form(sc: EavesdropScenario) -> np.ndarray:
    a, b = _env_records(sc)
    p0 = sc.p0.matrix
    w0a = np.vdot(a, p0 @ a).real
    w0b = np.vdot(b, p0 @ b).real
    return np.array([w0a, 1.0 - w0a, w0b, 1.0 - w0b]) / 2


def pguess_closed_form(u0, u1, p0) -> float:
    """``<0|(U0† P0 U0 + U1† P1 U1)|0> / 2`` evaluated on ``U_i|0>`` only."""
    a = np.asarray(u0, dtype=np.complex128)[:, 0]
    b = np.asarray(u1, dtype=np.complex128)[:, 0]
    p = np.asarray(p0, dtype=np.complex128)
    return 0.5 * (1.0 + np.vdot(a, p @ a).real - np.vdot(b, p @ b).real)


def guessing_probability(sc: EavesdropScenario) -> float:
    """Probability that the antenna bit equals the apparatus bit.

    Computed from the diagonal of ``rho_av`` and cross-checked against
    :func:`pguess_closed_form`; a disagreement above ``ATOL`` raises
    :class:`ConsistencyError`.
    """
    r = rho_av(sc).matrix
    via_trace = float((r[0, 0] + r[3, 3]).real)
    closed = pguess_closed_form(sc.u0, sc.u1, sc.p0)
    if abs(via_trace - closed) > ATOL:
        raise ConsistencyError(f"Pguess paths disagree: {via_trace!r} vs {closed!r}")
    return min(1.0, max(0.0, via_trace))


def helstrom_ceiling(gamma: float) -> float:
    """Best success probability for telling ``U0|0>`` from ``U1|0>``."""
    return 0.5 * (1.0 + np.sqrt(max(0.0, 1.0 - gamma * gamma)))
