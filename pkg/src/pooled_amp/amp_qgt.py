"""Scalar AMP for quantitative group testing (binary signal, one column).

Same iteration as the matrix case with ``L = 1``; ``f`` is the posterior
probability of being defective and ``g`` the conditional-mean residual, which
is nonlinear in ``u`` under uniform noise.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .denoisers import SIMPSON_NODES, qgt_denoise_f, qgt_denoise_g, qgt_f_derivative
from .errors import SolverError, ValidationError
from .model import DesignPair, NoiseSpec, role_stream
from .quadrature import GaussianQuadSpec
from .state_evolution import QGT_GAP_TOL, limiting_fpr_fnr, qgt_information_gap, se_qgt_run


@dataclass(frozen=True)
class QgtConfig:
    K: int = 10
    onsager_mode: str = "empirical-jacobian"
    quad: GaussianQuadSpec = field(default_factory=GaussianQuadSpec)
    init_kind: str = "iid"
    n_nodes: int = SIMPSON_NODES
    freeze_on_convergence: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("K must be at least 1")
        if self.onsager_mode not in ("empirical-jacobian", "deterministic-se"):
            raise ValidationError("unknown onsager_mode")
        if self.init_kind not in ("iid", "row-constant"):
            raise ValidationError("init_kind must be 'iid' or 'row-constant'")


@dataclass
class QgtTrace:
    theta: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    beta_hat: list = field(default_factory=list)
    r_hat: list = field(default_factory=list)
    C: list = field(default_factory=list)
    F: list = field(default_factory=list)
    se_states: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    frozen_at: int | None = None

    @property
    def final_state(self):
        return self.se_states[-1]

    def estimate(self, zeta: float = 0.5) -> np.ndarray:
        """Hard estimate of the defective indicator at threshold ``zeta``."""
        return threshold_final(self.beta[-1], self.final_state.mu, zeta)


def threshold_final(beta_K, mu_beta_K: float, zeta: float) -> np.ndarray:
    """Indicator of ``beta^K_j / mu_beta^K > zeta``."""
    if mu_beta_K is None or not mu_beta_K > 0:
        raise ValidationError("mu_beta must be positive to threshold (uninformative run)")
    return (np.asarray(beta_K, dtype=float) / mu_beta_K > zeta).astype(float)


def empirical_fpr_fnr(beta, S_hat):
    """False positive and false negative rates; None when the denominator is zero."""
    beta = np.asarray(beta).astype(bool)
    S_hat = np.asarray(S_hat).astype(bool)
    neg, pos = (~beta).sum(), beta.sum()
    fpr = float((S_hat & ~beta).sum() / neg) if neg else None
    fnr = float((~S_hat & beta).sum() / pos) if pos else None
    return fpr, fnr


def empirical_sq_corr(beta_hat, beta):
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta = np.asarray(beta, dtype=float)
    den = (beta_hat @ beta_hat) * (beta @ beta)
    return float((beta_hat @ beta) ** 2 / den) if den > 0 else None


def run_qgt_amp(ty, design: DesignPair, pi: float, noise: NoiseSpec | None = None,
                cfg: QgtConfig | None = None, seed=0, beta_true=None,
                se_states: list | None = None) -> QgtTrace:
    cfg = cfg or QgtConfig()
    noise = noise or NoiseSpec.none()
    tX = design.tX
    n, p = tX.shape
    ty = np.asarray(ty, dtype=float).ravel()
    if ty.size != n:
        raise ValidationError(f"ty has length {ty.size}, expected {n}")
    delta, alpha = design.delta, design.alpha
    if se_states is None:
        se_states = se_qgt_run(pi, delta, cfg.K, noise, cfg.quad, alpha, cfg.init_kind, cfg.n_nodes)
    if len(se_states) < cfg.K + 1:
        raise ValidationError("companion SE trajectory is shorter than K")
    trace = QgtTrace(se_states=list(se_states[:cfg.K + 1]))

    if cfg.init_kind == "iid":
        b_hat = (role_stream(seed, "init").random(p) < pi).astype(float)
    else:
        b_hat = np.full(p, float(pi))
    trace.beta.append(None)
    trace.beta_hat.append(b_hat)
    r_prev = np.zeros(n)
    F = 0.0
    _record(trace, 0, b_hat, beta_true, None)
    for k in range(cfg.K):
        state = se_states[k]
        if cfg.freeze_on_convergence and k > 0 and qgt_information_gap(state.Sigma) < QGT_GAP_TOL:
            trace.frozen_at = k
            break
        theta = tX @ b_hat - F * r_prev
        r_hat, dg = qgt_denoise_g(theta, ty, state.Sigma, noise, delta, alpha, cfg.n_nodes,
                                  with_derivative=True)
        C = float(np.mean(dg))
        if cfg.onsager_mode == "deterministic-se" and state.k > 0:
            C = float(state.g_jac_mean)
        b = tX.T @ r_hat - C * b_hat
        if not (np.all(np.isfinite(r_hat)) and np.all(np.isfinite(b))):
            raise SolverError(f"non-finite AMP iterate at iteration {k}", iteration=k)
        nxt = se_states[k + 1]
        sigma = np.sqrt(nxt.tau)
        b_hat, df = qgt_f_derivative(b, nxt.mu, sigma, pi)
        F = float(df.sum() / n)
        if cfg.onsager_mode == "deterministic-se":
            F = nxt.f_jac_mean / delta
        trace.theta.append(theta)
        trace.r_hat.append(r_hat)
        trace.C.append(C)
        trace.beta.append(b)
        trace.beta_hat.append(b_hat)
        trace.F.append(F)
        _record(trace, k + 1, b_hat, beta_true, nxt)
        r_prev = r_hat
    while len(trace.beta_hat) <= cfg.K:
        k = len(trace.beta_hat)
        trace.beta.append(trace.beta[-1])
        trace.beta_hat.append(trace.beta_hat[-1])
        _record(trace, k, trace.beta_hat[-1], beta_true, se_states[k])
    return trace


def _record(trace: QgtTrace, k: int, b_hat, beta_true, state):
    row = {"k": k}
    if beta_true is not None:
        row["sq_corr"] = empirical_sq_corr(b_hat, beta_true)
    if state is not None:
        row["se_sq_corr"] = state.metrics.get("sq_corr")
        row["mu_beta"] = state.mu
    trace.metrics.append(row)


def fpr_fnr_curve(trace: QgtTrace, beta, zetas) -> list[dict]:
    """Empirical and limiting FPR/FNR at each threshold."""
    st = trace.final_state
    rows = []
    for z in zetas:
        fpr, fnr = empirical_fpr_fnr(beta, trace.estimate(z))
        fpr_t, fnr_t = limiting_fpr_fnr(st.mu, st.sigma, z)
        rows.append({"zeta": float(z), "fpr_emp": fpr, "fnr_emp": fnr,
                     "fpr_theory": fpr_t, "fnr_theory": fnr_t})
    return rows


CURVE_COLUMNS = ("zeta", "fpr_emp", "fnr_emp", "fpr_theory", "fnr_theory")


def curve_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for r in rows:
        w.writerow(["" if r[c] is None else f"{r[c]:.9g}" for c in CURVE_COLUMNS])
    return buf.getvalue()
