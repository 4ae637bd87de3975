"""Bayes-optimal AMP denoisers and their Jacobians.

``f`` maps a row of the signal-side iterate to the posterior mean of the
signal row given ``s = Mu_B b + N(0, Tau_B)``.  ``g`` maps a row of the
test-side iterate ``u`` and the observation ``y`` to
``Cov[Z|u]^+ (E[Z|u, y] - E[Z|u])`` with ``(Z, u)`` jointly Gaussian with
covariance ``Sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import ValidationError
from .linalg import PINV_CUTOFF, floored_inverse, pinv, pinv_sym, sym
from .model import NoiseSpec

SIMPSON_NODES = 201


def _log_prior(probs):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(probs, dtype=float))


def _f_logits(S, Mu, Tau, probs):
    W = pinv_sym(Tau) @ Mu
    const = 0.5 * np.einsum("kl,kl->l", Mu, W)
    return _log_prior(probs) + S @ W - const, W


def denoise_f(S, Mu_B, Tau_B, prior) -> np.ndarray:
    """Posterior means ``E[B | Mu_B B + G = s]`` row by row, in log space."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    probs = np.asarray(getattr(prior, "probs", prior), dtype=float)
    Mu_B, Tau_B = np.atleast_2d(Mu_B), np.atleast_2d(Tau_B)
    logits, _ = _f_logits(S, Mu_B, Tau_B, probs)
    top = logits.max(axis=1, keepdims=True)
    bad = ~np.isfinite(top[:, 0])
    E = np.exp(logits - np.where(np.isfinite(top), top, 0.0))
    out = E / E.sum(axis=1, keepdims=True)
    if bad.any():
        out[bad] = _nearest_mean(S[bad], Mu_B, Tau_B, probs)
    return out


def _nearest_mean(S, Mu, Tau, probs):
    P = pinv_sym(Tau)
    L = Mu.shape[0]
    dist = np.stack([np.einsum("ij,jk,ik->i", S - Mu[:, l], P, S - Mu[:, l]) for l in range(L)], axis=1)
    dist[:, np.asarray(probs) == 0] = np.inf
    return np.eye(L)[dist.argmin(axis=1)]


def f_jacobian(S, Mu_B, Tau_B, prior):
    """Values and Jacobians ``d f_l / d s_m`` (shape ``(p, L, L)``)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    probs = np.asarray(getattr(prior, "probs", prior), dtype=float)
    f = denoise_f(S, Mu_B, Tau_B, probs)
    W = pinv_sym(Tau_B) @ np.atleast_2d(Mu_B)
    cov = np.einsum("il,lm->ilm", f, np.eye(f.shape[1])) - f[:, :, None] * f[:, None, :]
    return f, cov @ W.T


@dataclass(frozen=True)
class Conditioning:
    """Gaussian conditioning of ``Z`` on ``u`` and on ``(u, y)``.

    ``E[Z|u] = A u``; ``E[Z|u, y] = Ku u + Ky y``; ``Cov_inv = Cov[Z|u]^+``.
    """

    A: np.ndarray
    cov: np.ndarray
    cov_inv: np.ndarray
    Ku: np.ndarray
    Ky: np.ndarray
    cov_uy: np.ndarray

    @property
    def g_jacobian(self) -> np.ndarray:
        return self.cov_inv @ (self.Ku - self.A)

    @property
    def gap(self) -> float:
        """Largest eigenvalue of ``Cov[Z|u]``; zero means ``Z`` is fully revealed."""
        return float(np.linalg.eigvalsh(self.cov).max())

    @property
    def info(self) -> np.ndarray:
        """``E[g g^T] = Cov^+ (Cov[Z|u] - Cov[Z|u,y]) Cov^+``, written as
        ``Cov^+ - Cov^+ Cov[Z|u,y] Cov^+`` so floored directions stay informative."""
        return sym(self.cov_inv - self.cov_inv @ self.cov_uy @ self.cov_inv)


def split_sigma(Sigma):
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    L = Sigma.shape[0] // 2
    return Sigma[:L, :L], Sigma[:L, L:], Sigma[L:, :L], Sigma[L:, L:]


def condition(Sigma, noise_var: float | None = None) -> Conditioning:
    """Conditioning maps for ``y = Z`` (``noise_var`` None) or ``y = Z + N(0, v I)``."""
    S11, S12, S21, S22 = split_sigma(Sigma)
    L = S11.shape[0]
    A = S12 @ pinv(S22)
    cov = sym(S11 - A @ S21)
    # Z.1 = Z^k.1 for one-hot signals, so the ones direction is exactly null;
    # any other collapsed direction is floored at a fraction of Var[Z]
    cov_inv = floored_inverse(cov, PINV_CUTOFF * np.max(np.abs(np.diag(S11))))
    if noise_var is None:
        Ku, Ky, cov_uy = np.zeros((L, L)), np.eye(L), np.zeros((L, L))
    else:
        cross = np.hstack([S12, S11])
        joint = np.block([[S22, S21], [S12, S11 + noise_var * np.eye(L)]])
        K = cross @ pinv(sym(joint))
        Ku, Ky = K[:, :L], K[:, L:]
        cov_uy = sym(S11 - K @ cross.T)
    return Conditioning(A=A, cov=cov, cov_inv=cov_inv, Ku=Ku, Ky=Ky, cov_uy=cov_uy)


def gaussian_noise_var(noise: NoiseSpec | None, delta: float, alpha: float):
    if noise is None or noise.is_noiseless:
        return None
    if noise.kind != "gaussian":
        raise ValidationError("matrix denoisers support Gaussian noise only")
    return noise.rescaled_variance(delta, alpha)


def denoise_g(Theta, tY, Sigma, noise: NoiseSpec | None = None, delta: float = 1.0,
              alpha: float = 0.5, cond: Conditioning | None = None) -> np.ndarray:
    """Rows ``Cov[Z|u]^+ (E[Z|u, y] - E[Z|u])`` for ``u = Theta_i``, ``y = tY_i``."""
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    tY = np.atleast_2d(np.asarray(tY, dtype=float))
    if Theta.shape != tY.shape:
        raise ValidationError("Theta and tY must have the same shape")
    c = cond or condition(Sigma, gaussian_noise_var(noise, delta, alpha))
    resid = Theta @ (c.Ku - c.A).T + tY @ c.Ky.T
    return resid @ c.cov_inv.T


# ----- scalar (QGT) denoisers -------------------------------------------------

def qgt_denoise_f(s, mu, sigma, pi):
    """``P(beta = 1 | mu beta + sigma N(0,1) = s)`` for ``beta ~ Bernoulli(pi)``."""
    s = np.asarray(s, dtype=float)
    if sigma <= 0:
        if mu == 0:
            return np.full(s.shape, float(pi))
        return (np.sign(mu) * (s - mu / 2) > 0).astype(float)
    if pi <= 0 or pi >= 1:
        return np.full(s.shape, float(pi > 0))
    logit = np.log(pi) - np.log1p(-pi) + mu * (s - mu / 2) / sigma**2
    return expit(logit)


def qgt_f_derivative(s, mu, sigma, pi):
    f = qgt_denoise_f(s, mu, sigma, pi)
    return f, f * (1 - f) * mu / sigma**2


def simpson_weights(n_nodes: int, half: float):
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValidationError("Simpson's rule needs an odd node count of at least 3")
    nodes = np.linspace(-half, half, n_nodes)
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return nodes, w * (nodes[1] - nodes[0]) / 3.0


def qgt_conditional_mean_uniform(u, y, Sigma, half: float, n_nodes: int = SIMPSON_NODES,
                                 with_derivative: bool = False):
    """``E[Z | Z^k = u, Z + Psi = y]`` for ``Psi ~ Uniform[-half, half]``.

    Integrates over the noise value with a composite Simpson rule; the
    weights are ``N_2((y - psi, u); 0, Sigma)`` evaluated in log space.
    Optionally returns ``dE/du = -P_12 Var_w(y - psi)`` with ``P = Sigma^{-1}``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if half <= 0:
        return (y.copy(), np.zeros_like(y)) if with_derivative else y.copy()
    P = np.linalg.inv(np.asarray(Sigma, dtype=float).reshape(2, 2))
    psi, w = simpson_weights(n_nodes, half)
    z = y[:, None] - psi[None, :]
    logw = -0.5 * (P[0, 0] * z**2 + 2 * P[0, 1] * z * u[:, None])
    logw += np.log(w)[None, :]
    logw -= logsumexp(logw, axis=1, keepdims=True)
    wts = np.exp(logw)
    mean = np.sum(wts * z, axis=1)
    if not with_derivative:
        return mean
    var = np.sum(wts * (z - mean[:, None]) ** 2, axis=1)
    return mean, -P[0, 1] * var


@dataclass(frozen=True)
class ScalarConditioning:
    A: float
    cov: float
    Ku: float
    Ky: float
    cov_uy: float


def qgt_condition(Sigma, noise_var: float | None = None) -> ScalarConditioning:
    S = np.asarray(Sigma, dtype=float).reshape(2, 2)
    s11, s12, s22 = S[0, 0], S[0, 1], S[1, 1]
    A = s12 / s22 if s22 > 0 else 0.0
    cov = s11 - A * s12
    if noise_var is None:
        return ScalarConditioning(A, cov, 0.0, 1.0, 0.0)
    K = np.array([s12, s11]) @ pinv(np.array([[s22, s12], [s12, s11 + noise_var]]))
    cov_uy = s11 - K @ np.array([s12, s11])
    return ScalarConditioning(A, cov, float(K[0]), float(K[1]), float(cov_uy))


def qgt_denoise_g(u, y, Sigma, noise: NoiseSpec | None = None, delta: float = 1.0,
                  alpha: float = 0.5, n_nodes: int = SIMPSON_NODES, with_derivative: bool = False):
    """Scalar ``g = (E[Z|u, y] - E[Z|u]) / Var[Z|u]``, optionally with ``dg/du``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    noise = noise or NoiseSpec.none()
    if noise.kind == "uniform" and not noise.is_noiseless:
        c = qgt_condition(Sigma)
        half = noise.rescaled_halfwidth(delta, alpha)
        mean, dmean = qgt_conditional_mean_uniform(u, y, Sigma, half, n_nodes, with_derivative=True)
    else:
        c = qgt_condition(Sigma, gaussian_noise_var(noise, delta, alpha))
        mean = c.Ku * u + c.Ky * y
        dmean = np.full_like(u, c.Ku)
    if c.cov <= 0:
        raise ValidationError("Var[Z | Z^k] must be positive")
    g = (mean - c.A * u) / c.cov
    if with_derivative:
        return g, (dmean - c.A) / c.cov
    return g
