"""First-order solver for the small convex programs used as baselines.

Problems have the form::

    minimise   c.x + (w/2) ||A x - b||^2
    subject to x in P,   A x - b in C (optional)

where ``P`` is a product of row simplices or the unit box (handled by exact
projection) and ``C`` is ``{0}`` or an ``l_inf`` ball (handled by an augmented
Lagrangian).  Each block of inner iterations runs monotone FISTA on the
augmented objective at fixed multipliers; after the block the multipliers are
updated and the penalty grows geometrically while the constraint is violated.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    inner_iters: int = 500
    tol: float = 1e-6           # primal residual relative to max(1, |b|_inf)
    obj_tol: float = 1e-9       # relative objective change between blocks
    rho0: float = 1.0
    rho_growth: float = 10.0
    rho_max: float = 1e8

    def __post_init__(self):
        if min(self.max_iters, self.inner_iters) < 1:
            raise ValidationError("iteration budgets must be positive")
        if self.tol <= 0 or self.obj_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.rho0 <= 0 or self.rho_growth < 1 or self.rho_max < self.rho0:
            raise ValidationError("invalid penalty schedule")


@dataclass
class SolverReport:
    status: str
    objective: float
    residual: float
    iterations: int
    x: np.ndarray = field(repr=False, default=None)
    history: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {"status": self.status, "objective": self.objective,
                "residuals": {"constraint": self.residual}, "iterations": self.iterations}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def project_simplex_rows(V) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex (sort based)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    L = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, L + 1)
    cond = U - css / idx > 0
    rho = L - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


def project_box(V, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return np.clip(V, lo, hi)


def _constraint_projection(kind: str | None, radius: float):
    if kind is None:
        return None
    if kind == "equality":
        return lambda r: np.zeros_like(r)
    if kind == "linf":
        return lambda r: np.clip(r, -radius, radius)
    raise ValidationError(f"unknown constraint kind {kind!r}")


def solve_first_order(A, b, c, project, x0, weight: float = 0.0, constraint: str | None = None,
                      radius: float = 0.0, cfg: SolverConfig | None = None) -> SolverReport:
    """Minimise ``c.x + (weight/2)|Ax - b|^2`` over ``project``'s set, optionally
    with ``Ax - b`` constrained to ``{0}`` or ``[-radius, radius]``.

    ``x`` may be a matrix; ``A`` acts on its rows' index (``A @ x``).
    """
    cfg = cfg or SolverConfig()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    x = project(np.asarray(x0, dtype=float))
    proj_C = _constraint_projection(constraint, radius)
    norm_A2 = float(np.linalg.norm(A, 2) ** 2) if A.size else 0.0
    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    lam = np.zeros_like(b)
    rho = cfg.rho0 / max(norm_A2, 1e-300) if proj_C is not None else 0.0

    def base_obj(x):
        r = A @ x - b
        return float(np.sum(c * x) + 0.5 * weight * np.sum(r * r))

    def aug(x, want_grad=True):
        r = A @ x - b
        val = float(np.sum(c * x) + 0.5 * weight * np.sum(r * r))
        gr = weight * r
        if proj_C is not None:
            v = r + lam / rho
            d = v - proj_C(v)
            val += 0.5 * rho * float(np.sum(d * d))
            gr = gr + rho * d
        return (val, c + A.T @ gr) if want_grad else val

    def violation(x):
        if proj_C is None:
            return 0.0
        r = A @ x - b
        return float(np.max(np.abs(r - proj_C(r)))) / scale if r.size else 0.0

    history = [base_obj(x)]
    it = 0
    prev_block_obj = history[0]
    status = "max_iters"
    while it < cfg.max_iters:
        step = 1.0 / max((weight + rho) * norm_A2, 1e-300)
        fx = aug(x, want_grad=False)
        y, t = x.copy(), 1.0
        stalled = False
        for _ in range(min(cfg.inner_iters, cfg.max_iters - it)):
            it += 1
            _, g = aug(y)
            z = project(y - step * g)
            fz = aug(z, want_grad=False)
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            x_old = x
            # monotone variant: keep the better of the old point and the prox step
            if fz <= fx:
                x, fx = z, fz
            y = x + (t / t_next) * (z - x) + ((t - 1) / t_next) * (x - x_old)
            t = t_next
            history.append(base_obj(x))
            if np.max(np.abs(z - x_old)) <= 1e-13 * max(1.0, float(np.max(np.abs(x)))):
                stalled = True
                break
        viol = violation(x)
        obj = history[-1]
        obj_change = abs(obj - prev_block_obj) / max(1.0, abs(obj))
        prev_block_obj = obj
        if proj_C is None:
            if stalled or obj_change <= cfg.obj_tol:
                status = "optimal"
                break
            continue
        if viol <= cfg.tol and (stalled or obj_change <= cfg.obj_tol):
            status = "optimal"
            break
        r = A @ x - b
        v = r + lam / rho
        lam = rho * (v - proj_C(v))
        if viol > cfg.tol:
            rho = min(rho * cfg.rho_growth, cfg.rho_max / max(norm_A2, 1e-300))
    viol = violation(x)
    if status != "optimal":
        if proj_C is not None and viol > cfg.tol:
            status = "infeasible"
        elif proj_C is not None:
            status = "optimal"
    return SolverReport(status=status, objective=base_obj(x), residual=viol, iterations=it,
                        x=x, history=history)
