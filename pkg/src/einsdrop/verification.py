"""Self-check suite behind ``einsdrop verify``.

Each check returns ``(passed, detail)``; :func:`run_checks` collects them in a
fixed order so the report is reproducible for a given seed.
"""
from __future__ import annotations

import math

import numpy as np

from . import qubit_env as qe
from .antenna_optimizer import optimize_antenna
from .linalg_core import ATOL, Projector, haar_random_unitary
from .scenario import (
    EavesdropScenario,
    collective_gamma,
    final_state_saev,
    guessing_probability,
    helstrom_ceiling,
    pguess_closed_form,
    rho_av,
    rho_av_diagonal_closed_form,
    rho_sa,
    rho_sa_closed_form,
    sequential_final_state,
)

THETA_GRID = [round(0.05 * i, 2) for i in range(1, 32)]
N_GRID = range(1, 201)


def random_projector(d: int, rng: np.random.Generator) -> Projector:
    rank = int(rng.integers(0, d + 1))
    basis = haar_random_unitary(d, rng).matrix[:, :rank]
    return Projector(basis @ basis.conj().T)


def random_scenario(d: int, rng: np.random.Generator) -> EavesdropScenario:
    return EavesdropScenario(haar_random_unitary(d, rng), haar_random_unitary(d, rng),
                             random_projector(d, rng))


def _scenarios(seed: int, count: int = 50, dims=(2, 8, 20)):
    rng = np.random.default_rng(seed)
    return [random_scenario(dims[i % len(dims)], rng) for i in range(count)]


def check_rho_sa(seed):
    worst = 0.0
    for sc in _scenarios(seed):
        worst = max(worst, np.max(np.abs(rho_sa(sc).matrix - rho_sa_closed_form(sc.u0, sc.u1))))
    return worst < ATOL, f"max deviation {worst:.2e}"


def check_final_state(seed):
    worst = 0.0
    for sc in _scenarios(seed):
        diff = final_state_saev(sc).amplitudes - sequential_final_state(sc).amplitudes
        worst = max(worst, np.max(np.abs(diff)))
    return worst < ATOL, f"max amplitude deviation {worst:.2e}"


def check_pguess_paths(seed):
    worst = 0.0
    for sc in _scenarios(seed):
        r = rho_av(sc).matrix
        worst = max(worst, np.max(np.abs(np.diag(r).real - rho_av_diagonal_closed_form(sc))))
        worst = max(worst, np.max(np.abs(r - np.diag(np.diag(r)))))
        worst = max(worst, abs(guessing_probability(sc) - pguess_closed_form(sc.u0, sc.u1, sc.p0)))
    return worst < ATOL, f"max deviation {worst:.2e}"


def check_kl_identity(seed):
    worst = max(
        abs(qe.kl_bernoulli(0.5, qe.helstrom_success(t), qe.helstrom_failure(t)) + qe.log_abs_sin(t))
        for t in np.linspace(0.0, math.pi / 2, 1002)[1:-1]
    )
    return worst < 1e-12, f"max |KL + ln|sin|| {worst:.2e}"


def check_chernoff(seed):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        p = float(rng.uniform(0.02, 0.98))
        a = float(rng.uniform(0.01, p))
        worst = max(worst, qe.binom_cdf(a * n, n, p) - qe.chernoff_tail_bound(a, n, p))
    return worst <= 0.0, f"max F - bound {worst:.2e}"


def check_tradeoff(seed):
    worst = min(qe.tradeoff_check(t, n).slack for t in THETA_GRID for n in N_GRID)
    return worst >= -1e-12, f"min slack {worst:.2e}"


def check_toy_gamma(seed):
    lg = qe.log_gamma_closed_form(math.pi / 4, 20)
    err = abs(lg + 10 * math.log(2))
    return err <= 1e-15, f"Gamma={math.exp(lg):.6e}, |ln err| {err:.1e}"


def check_toy_pguess(seed):
    p = qe.helstrom_success(math.pi / 4)
    vals = [qe.majority_pguess(n, p) for n in (1, 3, 5)]
    ok = all(abs(v - ref) <= 0.005 for v, ref in zip(vals, (0.85, 0.94, 0.98)))
    return ok, "Pguess " + ", ".join(f"{v:.4f}" for v in vals)


def check_bound(seed):
    x = 40 * math.log(10)
    vals = [qe.pguess_lower_bound(1e-40, f * x) for f in (0.01, 0.05)]
    ok = all(abs(v - ref) <= 0.005 for v, ref in zip(vals, (0.6, 0.99)))
    return ok, "bounds " + ", ".join(f"{v:.4f}" for v in vals)


def check_helstrom_ceiling(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        u0, u1 = haar_random_unitary(8, rng), haar_random_unitary(8, rng)
        res = optimize_antenna(u0, u1, 8, rng)
        worst = max(worst, abs(res.best_pguess - helstrom_ceiling(collective_gamma(u0, u1))))
    return worst < 1e-3, f"max gap to ceiling {worst:.2e}"


CHECKS = [
    ("rho_SA corner structure", check_rho_sa),
    ("closed-form vs sequential SAEV state", check_final_state),
    ("Pguess dual path and rho_AV diagonal", check_pguess_paths),
    ("KL identity KL(1/2||p) = -ln|sin|", check_kl_identity),
    ("Chernoff bound dominance", check_chernoff),
    ("trade-off Pguess + Gamma >= 1", check_tradeoff),
    ("toy Gamma = 2^-10 (N=20, pi/4)", check_toy_gamma),
    ("toy Pguess 0.85/0.94/0.98", check_toy_pguess),
    ("bound 0.6/0.99 at Gamma=1e-40", check_bound),
    ("Helstrom ceiling at D=8", check_helstrom_ceiling),
]


def run_checks(seed: int = 0):
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
