"""Joint sparse coding and sparse-outlier estimation by ADMM.

Minimizes::

    0.5 * ||Y - D Psi - R||_F^2 + alpha * ||Psi||_1 + beta * ||R||_1

over the codes ``Psi`` (K x L) and the outliers ``R`` (P x L), with the
split ``Z = Psi`` and scaled multiplier ``M``. One iteration is::

    Psi <- (D^T D + mu I)^-1 (D^T (Y - R) + mu (Z + M))
    R   <- soft(Y - D Psi, beta)
    Z   <- soft(Psi - M, alpha / mu)
    M   <- M + (Z - Psi)

``mu`` is doubled (halved) when the primal residual exceeds (falls below)
ten times the dual one, with ``M`` rescaled to match.

The run stops once primal + dual + ``||R_new - R_old||`` is at most
``epsilon``. The outlier term matters: while the primal residual sits at
zero, halving ``mu`` shrinks the dual residual by itself, and without a
check on ``R`` the loop can stop far from the optimum.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from spotlier import kernels
from spotlier.imaging import atomic_write


@dataclass
class RobustCodingProblem:
    y: np.ndarray
    d: np.ndarray
    alpha: float = 1e-5
    beta: float = 0.1

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        if self.y.ndim != 2 or self.d.ndim != 2:
            raise ValueError("y and d must be 2-D")
        if self.d.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"dictionary has {self.d.shape[0]} rows but data has {self.y.shape[0]}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")


@dataclass
class AdmmState:
    psi: np.ndarray
    r: np.ndarray
    z: np.ndarray
    m: np.ndarray
    mu: float
    iter: int = 0

    @classmethod
    def zeros(cls, prob, mu):
        k = prob.d.shape[1]
        p, n = prob.y.shape
        return cls(np.zeros((k, n)), np.zeros((p, n)), np.zeros((k, n)), np.zeros((k, n)), mu)


@dataclass
class RobustCodingResult:
    psi: np.ndarray
    r: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool
    mu: float
    r_change: float = np.nan  # ||R_new - R_old|| at the last iteration
    mu_range: tuple = (np.nan, np.nan)
    trace: list = field(default_factory=list)  # (iter, objective, primal, dual, mu)


def soft(x, tau):
    """Elementwise ``sign(x) * max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    if np.ndim(x) == 0:
        return float(kernels.soft_threshold(np.array([x], dtype=np.float64), tau)[0])
    return kernels.soft_threshold(x, tau)


def objective(prob, psi, r):
    fit = prob.y - prob.d @ psi - r
    return float(0.5 * np.sum(fit * fit) + prob.alpha * np.abs(psi).sum()
                 + prob.beta * np.abs(r).sum())


class _Solver:
    """Caches the Cholesky factor of ``D^T D + mu I`` for the current mu."""

    def __init__(self, d):
        self.d = d
        self.gram = d.T @ d
        self.mu = None
        self.factor = None

    def solve(self, rhs, mu):
        if mu != self.mu:
            a = self.gram + mu * np.eye(self.gram.shape[0])
            self.factor = cho_factor(a, lower=True, check_finite=False)
            self.mu = mu
        return cho_solve(self.factor, rhs, check_finite=False)


def psi_update(state, prob, solver=None):
    if not (np.all(np.isfinite(state.r)) and np.all(np.isfinite(state.z))
            and np.all(np.isfinite(state.m))):
        raise FloatingPointError("non-finite ADMM state")
    solver = solver or _Solver(prob.d)
    rhs = prob.d.T @ (prob.y - state.r) + state.mu * (state.z + state.m)
    return solver.solve(rhs, state.mu)


def r_update(state, prob):
    return soft(prob.y - prob.d @ state.psi, prob.beta)


def z_update(state, prob):
    return soft(state.psi - state.m, prob.alpha / state.mu)


def m_update(state):
    return state.m + (state.z - state.psi)


def residuals(prev, nxt):
    primal = float(np.linalg.norm(nxt.z - nxt.psi))
    dual = float(nxt.mu * np.linalg.norm(nxt.z - prev.z))
    return primal, dual


def adapt_mu(mu, primal, dual, m):
    if primal > 10 * dual:
        return 2 * mu, m / 2
    if dual > 10 * primal:
        return mu / 2, m * 2
    return mu, m


def default_epsilon(prob):
    return np.sqrt(prob.y.size) * 1e-6


def robust_sparse_code(prob, mu0=1.0, max_iters=500, epsilon=None, trace=False):
    """Run ADMM from all-zero iterates until ``primal + dual + ||dR|| <= epsilon``.

    ``epsilon`` defaults to ``sqrt(P * L) * 1e-6``.
    """
    if mu0 <= 0:
        raise ValueError("mu0 must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    eps = default_epsilon(prob) if epsilon is None else epsilon
    solver = _Solver(prob.d)
    dty = prob.d.T @ prob.y
    state = AdmmState.zeros(prob, mu0)
    mu_lo = mu_hi = mu0
    rows = []
    converged = False
    primal = dual = r_change = np.inf

    for it in range(1, max_iters + 1):
        mu = state.mu
        psi = solver.solve(dty - prob.d.T @ state.r + mu * (state.z + state.m), mu)
        r = soft(prob.y - prob.d @ psi, prob.beta)
        z = soft(psi - state.m, prob.alpha / mu)
        m = state.m + (z - psi)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(m))):
            raise FloatingPointError(f"non-finite ADMM iterate at iteration {it}")

        primal = float(np.linalg.norm(z - psi))
        dual = float(mu * np.linalg.norm(z - state.z))
        r_change = float(np.linalg.norm(r - state.r))
        if trace:
            rows.append((it, objective(prob, psi, r), primal, dual, mu))
        if primal + dual + r_change <= eps:
            state = AdmmState(psi, r, z, m, mu, it)
            converged = True
            break
        mu, m = adapt_mu(mu, primal, dual, m)
        mu_lo, mu_hi = min(mu_lo, mu), max(mu_hi, mu)
        state = AdmmState(psi, r, z, m, mu, it)

    return RobustCodingResult(
        psi=state.psi, r=state.r, iterations=state.iter,
        primal_residual=primal, dual_residual=dual,
        objective=objective(prob, state.psi, state.r), converged=converged,
        mu=state.mu, r_change=r_change, mu_range=(mu_lo, mu_hi), trace=rows)


def write_trace(path, rows):
    lines = ["iter,objective,primal,dual,mu"]
    lines += [f"{i},{o!r},{p!r},{d!r},{mu!r}" for i, o, p, d, mu in rows]
    atomic_write(path, ("\n".join(lines) + "\n").encode())
