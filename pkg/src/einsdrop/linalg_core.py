"""Dense complex linear algebra used by the S-A-E-V simulation.

Operators are plain ``complex128`` numpy arrays.  The small validated types
below (:class:`StateVector`, :class:`UnitaryOperator`, :class:`Projector`,
:class:`DensityOperator`) wrap an array, check their invariants once at
construction and freeze the underlying buffer.

Subsystem ordering follows the ket notation: the first factor is the
slowest-varying index, so ``|s a e v>`` has flat index
``((s*dA + a)*dE + e)*dV + v``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Tolerances shared by every module.
ATOL = 1e-9
RANK_ATOL = 1e-6
PSD_ATOL = 1e-9


class LinalgError(ValueError):
    """Raised on shape mismatches and violated operator invariants."""


def as_complex_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array."""
    m = np.asarray(getattr(a, "matrix", a), dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise LinalgError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise LinalgError("matrix has non-finite entries")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def _square(a) -> np.ndarray:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on a tensor product of subsystems."""

    dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise LinalgError(f"invalid subsystem dims {self.dims}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise LinalgError(f"{amps.size} amplitudes do not fit dims {dims}")
        if not np.all(np.isfinite(amps)):
            raise LinalgError("state has non-finite amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > ATOL:
            raise LinalgError(f"state is not normalized (norm {np.linalg.norm(amps)!r})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _square(self.matrix)
        err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if err > ATOL:
            raise LinalgError(f"matrix is not unitary (max |U^dag U - 1| = {err:.3g})")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector; ``rank`` is read off the trace."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _square(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > ATOL:
            raise LinalgError("projector is not Hermitian")
        if np.max(np.abs(m @ m - m)) > ATOL:
            raise LinalgError("projector is not idempotent")
        tr = np.trace(m).real
        if abs(tr - round(tr)) > RANK_ATOL:
            raise LinalgError(f"projector trace {tr!r} is not an integer rank")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def complement(self) -> "Projector":
        return Projector(np.eye(self.dim) - self.matrix)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _square(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > ATOL:
            raise LinalgError("density operator is not Hermitian")
        if abs(np.trace(m) - 1.0) > ATOL:
            raise LinalgError(f"density operator has trace {np.trace(m)!r}")
        if np.linalg.eigvalsh(m).min() < -PSD_ATOL:
            raise LinalgError("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor slowest."""
    if not factors:
        raise LinalgError("kron needs at least one factor")
    out = as_complex_matrix(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_complex_matrix(f))
    return out


def dagger(a) -> np.ndarray:
    return as_complex_matrix(a).conj().T


def basis_state(dims: Sequence[int], digits: Sequence[int]) -> StateVector:
    """Computational basis ket ``|digits>`` on subsystems ``dims``."""
    if len(dims) != len(digits):
        raise LinalgError("one digit per subsystem is required")
    amps = np.zeros(int(np.prod(dims)), dtype=np.complex128)
    amps[np.ravel_multi_index(tuple(digits), tuple(dims))] = 1.0
    return StateVector(tuple(dims), amps)


def _check_keep(dims: Sequence[int], keep: Iterable[int]) -> list:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise LinalgError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise LinalgError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    return keep


def partial_trace(rho, dims: Sequence[int], keep: Iterable[int]) -> DensityOperator:
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    rho : DensityOperator or array_like
        Operator on the full space, ``prod(dims)`` square.
    dims : sequence of int
        Subsystem dimensions, slowest index first.
    keep : iterable of int
        Subsystems to retain; the result keeps them in their original order.
    """
    m = _square(rho)
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise LinalgError(f"dims {dims} do not match operator dimension {m.shape[0]}")
    keep = _check_keep(dims, keep)
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = m.reshape(dims + dims)
    # Contract each traced ket index with its bra index.
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    for i in traced:
        bra[i] = ket[i]
    out = "".join(ket[i] for i in keep) + "".join(bra[i] for i in keep)
    red = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep]))
    return DensityOperator(red.reshape(d, d))


def reduced_state(psi: StateVector, keep: Iterable[int]) -> DensityOperator:
    """Reduced density operator of a pure state, without forming |psi><psi|."""
    keep = _check_keep(psi.dims, keep)
    traced = [i for i in range(len(psi.dims)) if i not in keep]
    t = np.transpose(psi.amplitudes.reshape(psi.dims), keep + traced)
    d = int(np.prod([psi.dims[i] for i in keep]))
    t = t.reshape(d, -1)
    return DensityOperator(t @ t.conj().T)


def haar_random_unitary(d: int, rng: np.random.Generator) -> UnitaryOperator:
    """Sample a ``d x d`` unitary from the Haar measure.

    QR-decomposes a complex Ginibre matrix and multiplies each column of Q
    by the phase of the matching diagonal entry of R, which makes the
    decomposition unique and the distribution exactly Haar.
    """
    if d < 1:
        raise LinalgError("dimension must be positive")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return UnitaryOperator(q * phases[np.newaxis, :])


def matrix_element(bra, a, ket) -> complex:
    """``<bra| a |ket>`` for state vectors (or plain 1-D arrays)."""
    m = as_complex_matrix(a)
    u = np.asarray(bra, dtype=np.complex128).reshape(-1)
    v = np.asarray(ket, dtype=np.complex128).reshape(-1)
    if m.shape != (u.size, v.size):
        raise LinalgError(f"cannot form <{u.size}|{m.shape}|{v.size}>")
    return complex(np.vdot(u, m @ v))
