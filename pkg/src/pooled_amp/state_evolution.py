"""Deterministic state evolution (SE) for matrix AMP and its scalar QGT case.

For Bayes-optimal denoisers one step maps ``Sigma^k`` to
``Mu_B^{k+1} = Tau_B^{k+1} = E[g g^T]`` and then to ``Sigma^{k+1}`` through
expectations over ``s = Mu_B e_l + N(0, Tau_B)``.  The older ``M, Q, A, R`` recursion is
implemented separately, with its own posterior map, so that the two can be
checked against each other.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .denoisers import (
    condition, denoise_f, f_jacobian, gaussian_noise_var, qgt_condition, qgt_denoise_f,
    qgt_denoise_g, qgt_f_derivative,
)
from .errors import ValidationError
from .linalg import PINV_CUTOFF, clip_psd, complement_basis, pinv_sym, sup_norm, sym
from .model import NoiseSpec, Prior
from .quadrature import GaussianQuadSpec, weighted_mean_se

INIT_KINDS = ("prior-product", "row-constant", "iid-categorical")
# Var[Z | Z^k] below this fraction of Var[Z] counts as full recovery; must
# exceed the pseudoinverse cutoff so no direction is silently dropped
GAP_TOL = 1e-9
QGT_GAP_TOL = 1e-12


@dataclass(frozen=True)
class SeState:
    """SE parameters at iteration ``k``; ``Mu_B``/``Tau_B`` are None at ``k = 0``."""

    k: int
    Sigma: np.ndarray
    Mu_B: np.ndarray | None = None
    Tau_B: np.ndarray | None = None
    Mu_Theta: np.ndarray | None = None
    Tau_Theta: np.ndarray | None = None
    F_mean: np.ndarray | None = None        # E[f'_{k}] at this state's Mu_B
    metrics: dict = field(default_factory=dict)
    pinv_cutoff: float = PINV_CUTOFF

    @property
    def L(self) -> int:
        return self.Sigma.shape[0] // 2

    @property
    def blocks(self):
        L = self.L
        S = self.Sigma
        return S[:L, :L], S[:L, L:], S[L:, :L], S[L:, L:]

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {"k": self.k, "Sigma": arr(self.Sigma), "Mu_B": arr(self.Mu_B),
                "Tau_B": arr(self.Tau_B), "Mu_Theta": arr(self.Mu_Theta),
                "Tau_Theta": arr(self.Tau_Theta), "metrics": dict(self.metrics),
                "pinv_cutoff": self.pinv_cutoff}


def _theta_params(Sigma):
    L = Sigma.shape[0] // 2
    S11, S12, S21, S22 = Sigma[:L, :L], Sigma[:L, L:], Sigma[L:, :L], Sigma[L:, L:]
    S11_inv = np.linalg.inv(S11)
    return S21 @ S11_inv, sym(S22 - S21 @ S11_inv @ S12)


def sigma0(prior, delta: float, init_kind: str = "prior-product") -> np.ndarray:
    """Initial covariance of ``(Z, Z^0)`` for a given initializer."""
    pi = Prior.of(prior).probs
    if init_kind not in INIT_KINDS:
        raise ValidationError(f"init_kind must be one of {INIT_KINDS}")
    outer = np.outer(pi, pi)
    S22 = np.diag(pi) if init_kind == "iid-categorical" else outer
    return np.block([[np.diag(pi), outer], [outer, S22]]) / delta


def se_init(prior, delta: float, init_kind: str = "prior-product") -> SeState:
    """``k = 0`` state.  ``prior-product`` (alias ``row-constant``) uses B0 rows = pi;
    ``iid-categorical`` uses i.i.d. one-hot rows drawn from pi."""
    prior = Prior.of(prior)
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if np.any(prior.probs <= 0):
        raise ValidationError("Sigma_11 is singular: drop categories with zero probability")
    Sigma = sigma0(prior, delta, init_kind)
    Mu_T, Tau_T = _theta_params(Sigma)
    return SeState(k=0, Sigma=Sigma, Mu_Theta=Mu_T, Tau_Theta=Tau_T)


# ----- expectations over the signal-side Gaussian channel -------------------------

def signal_expectations(Mu_B, Tau_B, prior, quad: GaussianQuadSpec, jacobian: bool = False,
                        hard: bool = True) -> dict:
    """Moments of ``f(Mu_B e_l + G)``, ``G ~ N(0, Tau_B)``, ``l ~ pi``.

    Returns ``BF = E[B f^T]``, ``FF = E[f f^T]``, ``f_mean``, the soft and
    quantized correlations, the MSE and (optionally) ``E[df/ds]``.  Standard
    errors are reported for the Monte Carlo backend.
    """
    probs = Prior.of(prior).probs
    L = probs.size
    pts, wts = quad.nodes(Tau_B)
    BF = np.zeros((L, L))
    FF = np.zeros((L, L))
    FF_se = np.zeros((L, L))
    BF_se = np.zeros((L, L))
    jac = np.zeros((L, L))
    for l in range(L):
        if probs[l] == 0:
            continue
        S = Mu_B[:, l] + pts
        if jacobian:
            f, J = f_jacobian(S, Mu_B, Tau_B, probs)
            jac += probs[l] * np.tensordot(wts, J, axes=(0, 0))
        else:
            f = denoise_f(S, Mu_B, Tau_B, probs)
        m, se = weighted_mean_se(f, wts)
        BF[l] = probs[l] * m
        BF_se[l] = probs[l] * se
        ff = f[:, :, None] * f[:, None, :]
        m2, se2 = weighted_mean_se(ff, wts)
        FF += probs[l] * m2
        FF_se += (probs[l] * se2) ** 2
    out = {"BF": BF, "FF": sym(FF), "f_mean": BF.sum(axis=0), "BF_se": BF_se,
           "FF_se": np.sqrt(FF_se), "corr_soft": float(np.trace(BF)),
           "mse": float(np.trace(FF) - 2 * np.trace(BF) + 1.0)}
    if jacobian:
        out["jac"] = jac
    if hard:
        out["corr_hard"] = quantized_correlation(Mu_B, Tau_B, probs, quad)
    return out


def quantized_correlation(Mu_B, Tau_B, prior, quad: GaussianQuadSpec) -> float:
    """``P(argmax f(Mu_B B + G) = B)``; always evaluated by Monte Carlo because
    the integrand is an indicator."""
    probs = Prior.of(prior).probs
    mc = quad if quad.is_mc else GaussianQuadSpec("monte-carlo", quad.n_samples, seed=quad.seed)
    pts, _ = mc.nodes(Tau_B)
    total = 0.0
    for l in range(probs.size):
        if probs[l] == 0:
            continue
        f = denoise_f(Mu_B[:, l] + pts, Mu_B, Tau_B, probs)
        total += probs[l] * np.mean(f.argmax(axis=1) == l)
    return float(total)


def information_gap(Sigma) -> float:
    """Largest eigenvalue of ``Cov[Z | Z^k]`` relative to ``max Var[Z_l]``."""
    L = Sigma.shape[0] // 2
    return condition(Sigma).gap / float(np.max(np.diag(Sigma)[:L]))


def se_converged(state: SeState) -> bool:
    return information_gap(state.Sigma) < GAP_TOL


def se_step_bayes(state: SeState, prior, delta: float, noise: NoiseSpec | None = None,
                  quad: GaussianQuadSpec | None = None, alpha: float = 0.5) -> SeState:
    """One SE step with Bayes-optimal denoisers."""
    prior = Prior.of(prior)
    quad = quad or GaussianQuadSpec()
    cond = condition(state.Sigma, gaussian_noise_var(noise, delta, alpha))
    Mu = clip_psd(cond.info, name="Mu_B")
    ex = signal_expectations(Mu, Mu, prior, quad, jacobian=True)
    S11 = np.diag(prior.probs) / delta
    S12 = ex["BF"] / delta
    Sigma = clip_psd(np.block([[S11, S12], [S12.T, ex["FF"] / delta]]), name="Sigma")
    Mu_T, Tau_T = _theta_params(Sigma)
    metrics = {"correlation": ex["corr_soft"], "correlation_quantized": ex["corr_hard"],
               "mse": ex["mse"], "trace_tau_b": float(np.trace(Mu)),
               "bayes_sigma_gap": sup_norm(S12 - ex["FF"] / delta)}
    return SeState(k=state.k + 1, Sigma=Sigma, Mu_B=Mu, Tau_B=Mu.copy(), Mu_Theta=Mu_T,
                   Tau_Theta=Tau_T, F_mean=ex["jac"], metrics=metrics)


def se_run(prior, delta: float, K: int = 10, noise: NoiseSpec | None = None,
           quad: GaussianQuadSpec | None = None, alpha: float = 0.5,
           init_kind: str = "prior-product", early_stop: bool = False) -> list[SeState]:
    """States ``k = 0..K``.

    Once ``Z`` is fully revealed (``information_gap < GAP_TOL``) the last state
    is repeated, flagged ``converged``; with ``early_stop`` the same happens when
    ``||Sigma^{k+1} - Sigma^k||_inf < 1e-10``.
    """
    states = [se_init(prior, delta, init_kind)]
    while len(states) <= K:
        last = states[-1]
        if last.k > 0 and se_converged(last):
            break
        nxt = se_step_bayes(last, prior, delta, noise, quad, alpha)
        states.append(nxt)
        if early_stop and last.k > 0 and sup_norm(nxt.Sigma - last.Sigma) < 1e-10:
            break
    while len(states) <= K:
        last = states[-1]
        states.append(replace(last, k=last.k + 1, metrics={**last.metrics, "converged": True}))
    return states


def se_predict_metrics(state: SeState, prior, quad: GaussianQuadSpec | None = None) -> dict:
    """Limiting MSE and correlation of ``f_k(Mu_B B + G_B)``."""
    if state.k < 1:
        raise ValidationError("metrics are defined for k >= 1")
    ex = signal_expectations(state.Mu_B, state.Tau_B, prior, quad or GaussianQuadSpec())
    return {"mse": ex["mse"], "correlation": ex["corr_soft"],
            "correlation_quantized": ex["corr_hard"]}


def effective_noise_cov(state: SeState, pseudo: bool = False):
    """``N = Mu^{-1} Tau Mu^{-T}`` for the Theta and B channels.

    Pooled-data ``Mu_B`` is singular along the all-ones direction; pass
    ``pseudo=True`` to use pseudoinverses there instead of raising.
    """
    out = []
    for M, T in ((state.Mu_Theta, state.Tau_Theta), (state.Mu_B, state.Tau_B)):
        if M is None:
            out.append(None)
            continue
        M = np.atleast_2d(M)
        if np.linalg.matrix_rank(M, tol=PINV_CUTOFF * max(sup_norm(M), 1e-300)) < M.shape[0]:
            if not pseudo:
                raise ValidationError("Mu is singular; effective noise covariance undefined")
            Minv = np.linalg.pinv(M, rcond=PINV_CUTOFF)
        else:
            Minv = np.linalg.inv(M)
        out.append(sym(Minv @ np.atleast_2d(T) @ Minv.T))
    return tuple(out)


def se_trajectory_json(states) -> str:
    return json.dumps([s.to_dict() for s in states])


def se_summary_rows(states) -> list[dict]:
    rows = []
    for s in states:
        if s.k == 0:
            continue
        rows.append({"k": s.k, "correlation": s.metrics.get("correlation_quantized"),
                     "correlation_soft": s.metrics.get("correlation"),
                     "mse": s.metrics.get("mse"), "trace_tau_b": s.metrics.get("trace_tau_b")})
    return rows


# ----- the M, Q, A, R recursion --------------------------------------------------------

@dataclass(frozen=True)
class AlaouiSeState:
    k: int
    M: np.ndarray
    Q: np.ndarray
    A: np.ndarray
    R: np.ndarray


def _alaoui_AR(M, Q, pi, delta):
    A = (np.diag(pi) - M - M.T + Q) / delta
    R = np.diag(Q @ np.ones(pi.size)) - Q
    return clip_psd(A, name="A"), sym(R)


def alaoui_se_init(prior, delta: float) -> AlaouiSeState:
    pi = Prior.of(prior).probs
    M = np.outer(pi, pi)
    A, R = _alaoui_AR(M, M.copy(), pi, delta)
    return AlaouiSeState(k=1, M=M, Q=M.copy(), A=A, R=R)


def eta(Z, Gamma, probs, floor: float | None = None):
    """Posterior over the one-hot means ``e_l`` for ``z = e_l + N(0, Gamma)``."""
    Z = np.atleast_2d(Z)
    probs = np.asarray(probs, dtype=float)
    L = probs.size
    # Gamma vanishes along the ones vector; invert on its complement with the
    # same eigenvalue floor as the conditioning step
    U = complement_basis(L)
    w, V = np.linalg.eigh(sym(U.T @ Gamma @ U))
    if floor is None:
        floor = PINV_CUTOFF * max(float(np.max(np.abs(w))), 1e-300)
    W = U @ V
    P = (W / np.maximum(w, floor)) @ W.T
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    expo = np.empty((Z.shape[0], L))
    for l in range(L):
        D = Z - np.eye(L)[l]
        expo[:, l] = logp[l] - 0.5 * np.einsum("ij,jk,ik->i", D, P, D)
    expo -= expo.max(axis=1, keepdims=True)
    w = np.exp(expo)
    return w / w.sum(axis=1, keepdims=True)


def alaoui_se_step(state: AlaouiSeState, prior, delta: float,
                   quad: GaussianQuadSpec | None = None, with_se: bool = False):
    pi = Prior.of(prior).probs
    quad = quad or GaussianQuadSpec()
    L = pi.size
    pts, wts = quad.nodes(state.A)     # samples of A^{1/2} G
    Gamma = state.R / delta
    M = np.zeros((L, L))
    Q = np.zeros((L, L))
    M_se = np.zeros((L, L))
    Q_se = np.zeros((L, L))
    for l in range(L):
        e = eta(np.eye(L)[l] + pts, Gamma, pi, floor=PINV_CUTOFF * pi.max() / delta)
        m, se = weighted_mean_se(e, wts)
        M[:, l] = pi[l] * m
        M_se[:, l] = pi[l] * se
        m2, se2 = weighted_mean_se(e[:, :, None] * e[:, None, :], wts)
        Q += pi[l] * m2
        Q_se += (pi[l] * se2) ** 2
    Q = sym(Q)
    A, R = _alaoui_AR(M, Q, pi, delta)
    nxt = AlaouiSeState(k=state.k + 1, M=M, Q=Q, A=A, R=R)
    if with_se:
        return nxt, {"M": M_se, "Q": np.sqrt(Q_se)}
    return nxt


def check_se_equivalence(K: int, prior, delta: float, quad: GaussianQuadSpec | None = None) -> dict:
    """Run both recursions on the same quadrature and compare

    ``A^{k+1}`` and ``R^{k+1}/delta`` with ``(Mu_B^{k+1})^+`` for ``k < K``, and
    ``M^{k+2}``, ``Q^{k+2}`` with ``E[f B^T]``, ``E[f f^T]`` for ``k + 2 <= K``.
    """
    prior = Prior.of(prior)
    quad = quad or GaussianQuadSpec()
    ours = se_init(prior, delta, "prior-product")
    theirs = alaoui_se_init(prior, delta)
    fam = {"A": [], "R": [], "M": [], "Q": []}
    mc_se = {"A": [], "R": [], "M": [], "Q": []}
    L = prior.L
    # standard errors feeding the next A/R comparison (zero at the closed-form base case)
    carry = {"A": 0.0, "R": 0.0}
    compared = 0
    for k in range(K):
        if k > 0 and se_converged(ours):
            break
        compared = k + 1
        # our step gives Mu_B^{k+1} and the moments at that Mu_B
        cond = condition(ours.Sigma)
        Mu = clip_psd(cond.info, name="Mu_B")
        Mu_inv = pinv_sym(Mu)
        fam["A"].append(sup_norm(theirs.A - Mu_inv))
        fam["R"].append(sup_norm(theirs.R / delta - Mu_inv))
        mc_se["A"].append(carry["A"])
        mc_se["R"].append(carry["R"])
        if k + 1 >= K:
            break
        ex = signal_expectations(Mu, Mu, prior, quad, hard=False)
        theirs, se = alaoui_se_step(theirs, prior, delta, quad, with_se=True)
        fam["M"].append(sup_norm(theirs.M - ex["BF"].T))
        fam["Q"].append(sup_norm(theirs.Q - ex["FF"]))
        se_M, se_Q = sup_norm(se["M"]), sup_norm(se["Q"])
        se_BF, se_FF = sup_norm(ex["BF_se"]), sup_norm(ex["FF_se"])
        mc_se["M"].append(float(np.hypot(se_M, se_BF)))
        mc_se["Q"].append(float(np.hypot(se_Q, se_FF)))
        # A = (diag(pi) - M - M^T + Q)/delta, R = diag(Q 1) - Q, ours (diag(pi) - E[B f^T])/delta
        carry = {"A": (2 * se_M + se_Q + se_BF) / delta,
                 "R": ((L + 1) * se_Q + se_BF) / delta}
        S11 = np.diag(prior.probs) / delta
        Sigma = np.block([[S11, ex["BF"] / delta], [ex["BF"].T / delta, ex["FF"] / delta]])
        ours = SeState(k=ours.k + 1, Sigma=clip_psd(Sigma), Mu_B=Mu, Tau_B=Mu)
    per_family = {name: (max(v) if v else 0.0) for name, v in fam.items()}
    report = {"K": K, "delta": delta, "prior": prior.probs.tolist(), "quad": quad.to_dict(),
              "iterations_compared": compared, "per_iteration": fam, "max_by_family": per_family,
              "max_discrepancy": max(per_family.values()), "pinv_cutoff": PINV_CUTOFF}
    if quad.is_mc:
        report["mc_standard_error"] = mc_se
        # worst ratio of discrepancy to its standard error, iteration by iteration
        ratios = [d / s for name in fam for d, s in zip(fam[name], mc_se[name]) if s > 0]
        report["max_se_ratio"] = max(ratios) if ratios else 0.0
    return report


# ----- scalar SE for quantitative group testing ---------------------------------------

@dataclass(frozen=True)
class QgtSeState:
    """Scalar SE state; ``tau`` is the variance of ``G_beta`` so ``sigma = sqrt(tau)``."""

    k: int
    Sigma: np.ndarray
    mu: float | None = None
    tau: float | None = None
    mu_theta: float | None = None
    tau_theta: float | None = None
    f_jac_mean: float | None = None
    g_jac_mean: float | None = None
    metrics: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float | None:
        return None if self.tau is None else float(np.sqrt(self.tau))

    def to_dict(self) -> dict:
        return {"k": self.k, "Sigma": np.asarray(self.Sigma).tolist(), "mu": self.mu,
                "tau": self.tau, "mu_theta": self.mu_theta, "tau_theta": self.tau_theta,
                "metrics": dict(self.metrics)}


def se_qgt_init(pi: float, delta: float, init_kind: str = "iid") -> QgtSeState:
    """``iid``: beta0 i.i.d. Bernoulli(pi); ``row-constant``: beta0 = pi entrywise."""
    if not 0 < pi < 1:
        raise ValidationError("defective probability must lie in (0, 1)")
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if init_kind not in ("iid", "row-constant", "prior-product"):
        raise ValidationError("init_kind must be 'iid' or 'row-constant'")
    s22 = pi if init_kind == "iid" else pi**2
    Sigma = np.array([[pi, pi**2], [pi**2, s22]]) / delta
    return QgtSeState(k=0, Sigma=Sigma, mu_theta=Sigma[1, 0] / Sigma[0, 0],
                      tau_theta=Sigma[1, 1] - Sigma[1, 0] ** 2 / Sigma[0, 0])


def _qgt_channel(Sigma, noise, delta, alpha, quad, n_nodes):
    """``E[g^2]`` and ``E[dg/du]`` over ``(Z, Z^k) ~ N(0, Sigma)`` and the noise."""
    noise = noise or NoiseSpec.none()
    if noise.kind != "uniform" or noise.is_noiseless:
        c = qgt_condition(Sigma, gaussian_noise_var(noise, delta, alpha))
        return (c.cov - c.cov_uy) / c.cov**2, (c.Ku - c.A) / c.cov
    half = noise.rescaled_halfwidth(delta, alpha)
    pts, wts = quad.nodes(Sigma)
    if quad.is_mc:
        psi = np.random.default_rng(quad.seed + 1).uniform(-half, half, pts.shape[0])
        Z, u = pts[:, 0], pts[:, 1]
        g, dg = qgt_denoise_g(u, Z + psi, Sigma, noise, delta, alpha, n_nodes, with_derivative=True)
        return float(np.mean(g**2)), float(np.mean(dg))
    xl, wl = np.polynomial.legendre.leggauss(48)
    psi, wpsi = half * xl, wl / 2.0
    Z = np.repeat(pts[:, 0], psi.size)
    u = np.repeat(pts[:, 1], psi.size)
    w = np.outer(wts, wpsi).ravel()
    g, dg = qgt_denoise_g(u, Z + np.tile(psi, pts.shape[0]), Sigma, noise, delta, alpha,
                          n_nodes, with_derivative=True)
    return float(w @ g**2), float(w @ dg)


def qgt_signal_expectations(mu: float, tau: float, pi: float, quad: GaussianQuadSpec) -> dict:
    sigma = np.sqrt(tau)
    pts, wts = quad.nodes(np.array([[tau]]))
    g = pts[:, 0]
    f1, d1 = qgt_f_derivative(mu + g, mu, sigma, pi)
    f0, d0 = qgt_f_derivative(g, mu, sigma, pi)
    Ebf = pi * (wts @ f1)
    Eff = pi * (wts @ f1**2) + (1 - pi) * (wts @ f0**2)
    jac = pi * (wts @ d1) + (1 - pi) * (wts @ d0)
    return {"Ebf": float(Ebf), "Eff": float(Eff), "jac": float(jac),
            "sq_corr": float(Ebf**2 / (Eff * pi)) if Eff > 0 else 0.0,
            "mse": float(Eff - 2 * Ebf + pi)}


def se_qgt_step(state: QgtSeState, pi: float, delta: float, noise: NoiseSpec | None = None,
                quad: GaussianQuadSpec | None = None, alpha: float = 0.5,
                n_nodes: int = 201) -> QgtSeState:
    quad = quad or GaussianQuadSpec()
    info, g_jac = _qgt_channel(state.Sigma, noise, delta, alpha, quad, n_nodes)
    if info <= 0:
        raise ValidationError("SE produced a non-positive mu_beta")
    ex = qgt_signal_expectations(info, info, pi, quad)
    Sigma = np.array([[pi, ex["Ebf"]], [ex["Ebf"], ex["Eff"]]]) / delta
    metrics = {"sq_corr": ex["sq_corr"], "mse": ex["mse"],
               "bayes_sigma_gap": abs(ex["Ebf"] - ex["Eff"]) / delta}
    return QgtSeState(k=state.k + 1, Sigma=Sigma, mu=float(info), tau=float(info),
                      mu_theta=Sigma[1, 0] / Sigma[0, 0],
                      tau_theta=Sigma[1, 1] - Sigma[1, 0] ** 2 / Sigma[0, 0],
                      f_jac_mean=ex["jac"], g_jac_mean=g_jac, metrics=metrics)


def qgt_information_gap(Sigma) -> float:
    """``Var[Z | Z^k] / Var[Z]`` for the scalar channel."""
    return float(qgt_condition(Sigma).cov / Sigma[0, 0])


def se_qgt_run(pi: float, delta: float, K: int = 10, noise: NoiseSpec | None = None,
               quad: GaussianQuadSpec | None = None, alpha: float = 0.5,
               init_kind: str = "iid", n_nodes: int = 201) -> list[QgtSeState]:
    """States ``k = 0..K``; once the gap falls below ``QGT_GAP_TOL`` the last state
    is repeated and flagged ``converged``."""
    states = [se_qgt_init(pi, delta, init_kind)]
    while len(states) <= K:
        last = states[-1]
        if last.k > 0 and qgt_information_gap(last.Sigma) < QGT_GAP_TOL:
            break
        states.append(se_qgt_step(last, pi, delta, noise, quad, alpha, n_nodes))
    while len(states) <= K:
        last = states[-1]
        states.append(replace(last, k=last.k + 1, metrics={**last.metrics, "converged": True}))
    return states


def limiting_fpr_fnr(mu_beta_K: float, sigma_beta_K: float, zeta):
    """``(1 - Phi(mu zeta / sigma), 1 - Phi(mu (1 - zeta) / sigma))``; sigma is a std dev."""
    if sigma_beta_K <= 0:
        raise ValidationError("sigma_beta must be positive")
    ratio = mu_beta_K / sigma_beta_K
    zeta = np.asarray(zeta, dtype=float)
    fpr = norm.sf(ratio * zeta)
    fnr = norm.sf(ratio * (1 - zeta))
    if fpr.ndim == 0:
        return float(fpr), float(fnr)
    return fpr, fnr
