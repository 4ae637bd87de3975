"""Comparison estimators: iterative hard thresholding and convex relaxations.

Pooled-data programs act on ``B`` (``p x L``) with every row in the simplex,
which already implies the box ``[0, 1]``.  QGT programs act on ``beta`` in
``[0, 1]^p``.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .model import Prior
from .solvers import SolverConfig, SolverReport, project_box, project_simplex_rows, solve_first_order


def counts_from_proportions(pi_star, p: int) -> np.ndarray:
    """Integer category quotas ``pi* p``; the proportions must make them integral."""
    counts = np.asarray(pi_star, dtype=float) * p
    rounded = np.rint(counts)
    if np.max(np.abs(counts - rounded)) > 1e-6:
        raise ValidationError("pi* p must be integral for every category")
    return rounded.astype(int)


def hard_threshold(V, counts) -> np.ndarray:
    """Greedy one-hot assignment under category quotas.

    Repeatedly take the largest remaining entry whose item is unassigned and
    whose category still has room; ties follow row-major order.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    p, L = V.shape
    counts = np.asarray(counts, dtype=int)
    if counts.size != L or counts.sum() != p or np.any(counts < 0):
        raise ValidationError("quotas must be nonnegative and sum to p")
    order = np.argsort(-V, axis=None, kind="stable")
    out = np.zeros((p, L))
    done = np.zeros(p, dtype=bool)
    room = counts.copy()
    assigned = 0
    for flat in order:
        j, l = divmod(int(flat), L)
        if done[j] or room[l] == 0:
            continue
        out[j, l] = 1.0
        done[j] = True
        room[l] -= 1
        assigned += 1
        if assigned == p:
            break
    return out


def iht(tY, tX, counts, K: int = 100, B0=None) -> dict:
    """``B^{k+1} = H(B^k + tX^T (tY - tX B^k))`` from ``B^0 = 0``.

    Stops early at a fixed point of the update.
    """
    tX = np.asarray(tX, dtype=float)
    tY = np.atleast_2d(np.asarray(tY, dtype=float))
    p, L = tX.shape[1], tY.shape[1]
    counts = np.asarray(counts, dtype=int)
    if counts.size != L or counts.sum() != p:
        raise ValidationError("category counts must sum to p")
    B = np.zeros((p, L)) if B0 is None else np.asarray(B0, dtype=float)
    it = 0
    for it in range(1, K + 1):
        nxt = hard_threshold(B + tX.T @ (tY - tX @ B), counts)
        if np.array_equal(nxt, B):
            break
        B = nxt
    return {"B": B, "iterations": it, "residual": float(np.linalg.norm(tY - tX @ B))}


def _log_prior_cost(prior, p: int) -> np.ndarray:
    pi = Prior.of(prior).probs
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    if np.any(~np.isfinite(logpi)):
        raise ValidationError("log-prior objective needs every pi_l > 0")
    return np.tile(-logpi, (p, 1))


def solve_pooled_lp(Y, X, prior, cfg: SolverConfig | None = None) -> SolverReport:
    """Relaxed MAP program: minimise ``-sum_l log(pi_l) 1^T B_{:,l}`` subject to
    ``X B = Y`` and simplex rows.  A uniform prior makes the objective constant
    on the feasible set, so the feasibility least-squares problem is solved."""
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    pi = Prior.of(prior).probs
    p, L = X.shape[1], pi.size
    if Y.shape != (X.shape[0], L):
        raise ValidationError(f"Y has shape {Y.shape}, expected {(X.shape[0], L)}")
    x0 = np.tile(pi, (p, 1))
    cfg = cfg or SolverConfig()
    if np.allclose(pi, pi[0]):
        rep = solve_first_order(X, Y, np.zeros((p, L)), project_simplex_rows, x0, weight=1.0, cfg=cfg)
        resid = float(np.max(np.abs(X @ rep.x - Y))) / max(1.0, float(np.max(np.abs(Y))))
        rep.residual = resid
        rep.objective = float(p * np.log(L))
        rep.status = "optimal" if resid <= cfg.tol else "infeasible"
        return rep
    return solve_first_order(X, Y, _log_prior_cost(pi, p), project_simplex_rows, x0,
                             constraint="equality", cfg=cfg)


def pooled_cvx_objective(B, Y, X, prior, sigma: float) -> float:
    B = np.asarray(B, dtype=float)
    p = B.shape[0]
    r = np.asarray(Y, dtype=float) - np.asarray(X, dtype=float) @ B
    return float(np.sum(r * r) / (2 * p * sigma**2) + np.sum(_log_prior_cost(prior, p) * B))


def solve_pooled_cvx(Y, X, prior, sigma: float, cfg: SolverConfig | None = None, x0=None) -> SolverReport:
    """Relaxed MAP program under Gaussian noise:
    ``(1/(2 p sigma^2)) |Y - X B|^2 - sum_l log(pi_l) 1^T B_{:,l}`` over simplex rows."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    pi = Prior.of(prior).probs
    p = X.shape[1]
    x0 = np.tile(pi, (p, 1)) if x0 is None else x0
    rep = solve_first_order(X, Y, _log_prior_cost(pi, p), project_simplex_rows, x0,
                            weight=1.0 / (p * sigma**2), cfg=cfg)
    return rep


def solve_qgt_lp(y, X, cfg: SolverConfig | None = None) -> SolverReport:
    """``min |beta|_1`` subject to ``X beta = y`` and ``0 <= beta <= 1``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    p = X.shape[1]
    return solve_first_order(X, y, np.ones(p), project_box, np.zeros(p), constraint="equality", cfg=cfg)


def solve_qgt_bpdn(y, X, lam: float, cfg: SolverConfig | None = None) -> SolverReport:
    """``min |beta|_1`` subject to ``|y - X beta|_inf <= lam sqrt(p)`` and the box."""
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    p = X.shape[1]
    if lam == 0:
        return solve_qgt_lp(y, X, cfg)
    return solve_first_order(X, y, np.ones(p), project_box, np.zeros(p), constraint="linf",
                             radius=lam * np.sqrt(p), cfg=cfg)


def threshold_relaxed(x, zeta: float) -> np.ndarray:
    return (np.asarray(x, dtype=float) > zeta).astype(float)
