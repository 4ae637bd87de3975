"""Matrix AMP for pooled data with Bayes-optimal denoisers.

One iteration::

    Theta^k   = tX Bhat^k - Rhat^{k-1} F_k^T
    Rhat^k    = g_k(Theta^k, tY)
    B^{k+1}   = tX^T Rhat^k - Bhat^k C_k^T
    Bhat^{k+1} = f_{k+1}(B^{k+1})

The denoisers read their parameters from a companion SE run with the prior
assumed known.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .denoisers import condition, denoise_f, denoise_g, f_jacobian, gaussian_noise_var
from .errors import SolverError, ValidationError
from .model import DesignPair, NoiseSpec, Observations, Prior, role_stream
from .quadrature import GaussianQuadSpec
from .state_evolution import INIT_KINDS, SeState, se_converged, se_run

ONSAGER_MODES = ("empirical-jacobian", "deterministic-se")


@dataclass(frozen=True)
class AmpConfig:
    K: int = 10
    onsager_mode: str = "empirical-jacobian"
    quantize_final: bool = True
    quad: GaussianQuadSpec = field(default_factory=GaussianQuadSpec)
    init_kind: str = "iid-categorical"
    # stop updating once the companion SE reports Z fully revealed; past that
    # point g amplifies finite-sample error by the inverse of a vanishing gap
    freeze_on_convergence: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValidationError("K must be at least 1")
        if self.onsager_mode not in ONSAGER_MODES:
            raise ValidationError(f"onsager_mode must be one of {ONSAGER_MODES}")
        if self.init_kind not in INIT_KINDS:
            raise ValidationError(f"init_kind must be one of {INIT_KINDS}")

    def to_dict(self) -> dict:
        return {"K": self.K, "onsager_mode": self.onsager_mode,
                "quantize_final": self.quantize_final, "quad": self.quad.to_dict(),
                "init_kind": self.init_kind, "freeze_on_convergence": self.freeze_on_convergence}


@dataclass
class AmpTrace:
    """Iterates indexed by ``k``: ``B_hat[k]`` is ``Bhat^k`` (``B[0]`` is None)."""

    Theta: list = field(default_factory=list)
    B: list = field(default_factory=list)
    B_hat: list = field(default_factory=list)
    R_hat: list = field(default_factory=list)
    C: list = field(default_factory=list)
    F: list = field(default_factory=list)
    se_states: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    estimate: np.ndarray | None = None
    frozen_at: int | None = None

    @property
    def K(self) -> int:
        return len(self.B_hat) - 1

    def to_csv(self) -> str:
        return trace_csv(self)


def quantize(B_hat) -> np.ndarray:
    """Row-wise one-hot of the argmax; ties go to the lowest index."""
    B_hat = np.atleast_2d(np.asarray(B_hat, dtype=float))
    if not np.all(np.isfinite(B_hat)):
        raise ValidationError("cannot quantize non-finite rows")
    return np.eye(B_hat.shape[1])[B_hat.argmax(axis=1)]


def empirical_metrics(B_hat, B) -> dict:
    B_hat = np.asarray(B_hat, dtype=float)
    B = np.asarray(B, dtype=float)
    if B_hat.shape != B.shape:
        raise ValidationError(f"shape mismatch {B_hat.shape} vs {B.shape}")
    p = B.shape[0]
    return {"correlation": float(np.sum(B_hat * B) / p),
            "mse": float(np.sum((B_hat - B) ** 2) / p)}


def onsager_C(state: SeState, noise: NoiseSpec | None, delta: float, alpha: float) -> np.ndarray:
    """Average Jacobian of ``g_k`` in ``u``.

    For the noiseless and Gaussian-noise channels ``g`` is linear in ``u``, so
    the empirical average and the SE expectation coincide.
    """
    return condition(state.Sigma, gaussian_noise_var(noise, delta, alpha)).g_jacobian


def onsager_F(S=None, state: SeState | None = None, prior=None, n: int | None = None,
              delta: float | None = None, mode: str = "empirical-jacobian") -> np.ndarray:
    """``(1/n) sum_j df/ds`` at rows ``S`` (empirical) or ``E[df/ds] / delta`` (SE)."""
    if state is None:
        raise ValidationError("onsager_F needs the SE state that parametrises f")
    if mode == "deterministic-se":
        if state.F_mean is None or delta is None:
            raise ValidationError("deterministic mode needs F_mean and delta")
        return state.F_mean / delta
    _, J = f_jacobian(S, state.Mu_B, state.Tau_B, prior)
    return J.sum(axis=0) / n


def _init_estimate(p: int, prior: Prior, kind: str, seed) -> np.ndarray:
    if kind == "iid-categorical":
        labels = role_stream(seed, "init").choice(prior.L, size=p, p=prior.probs)
        return np.eye(prior.L)[labels]
    return np.tile(prior.probs, (p, 1))


def _check_finite(name: str, M: np.ndarray, k: int):
    if not np.all(np.isfinite(M)):
        raise SolverError(f"non-finite entries in {name} at iteration {k}", iteration=k)


def run_amp(obs: Observations, design: DesignPair, prior, noise: NoiseSpec | None = None,
            cfg: AmpConfig | None = None, seed=0, B_true=None,
            se_states: list | None = None) -> AmpTrace:
    """Run ``cfg.K`` AMP iterations; ``se_states`` may be a precomputed companion
    trajectory (from ``se_run`` with the same prior, delta, noise and init)."""
    cfg = cfg or AmpConfig()
    prior = Prior.of(prior)
    noise = noise or NoiseSpec.none()
    tX, tY = design.tX, np.atleast_2d(obs.tY)
    n, p = tX.shape
    L = prior.L
    if tY.shape != (n, L):
        raise ValidationError(f"tY has shape {tY.shape}, expected {(n, L)}")
    delta, alpha = design.delta, design.alpha
    if se_states is None:
        se_states = se_run(prior, delta, cfg.K, noise, cfg.quad, alpha, cfg.init_kind)
    if len(se_states) < cfg.K + 1:
        raise ValidationError("companion SE trajectory is shorter than K")
    trace = AmpTrace(se_states=list(se_states[:cfg.K + 1]))

    B_hat = _init_estimate(p, prior, cfg.init_kind, seed)
    trace.B.append(None)
    trace.B_hat.append(B_hat)
    trace.F.append(np.zeros((L, L)))
    R_prev = np.zeros((n, L))
    F = np.zeros((L, L))
    _record(trace, 0, B_hat, B_true, None)
    for k in range(cfg.K):
        state = se_states[k]
        if cfg.freeze_on_convergence and k > 0 and se_converged(state):
            trace.frozen_at = k
            break
        Theta = tX @ B_hat - R_prev @ F.T
        _check_finite("Theta", Theta, k)
        cond = condition(state.Sigma, gaussian_noise_var(noise, delta, alpha))
        R_hat = denoise_g(Theta, tY, state.Sigma, noise, delta, alpha, cond=cond)
        C = cond.g_jacobian
        _check_finite("R_hat", R_hat, k)
        B_next = tX.T @ R_hat - B_hat @ C.T
        _check_finite("B", B_next, k + 1)
        nxt = se_states[k + 1]
        B_hat = denoise_f(B_next, nxt.Mu_B, nxt.Tau_B, prior)
        F = onsager_F(B_next, nxt, prior, n, delta, cfg.onsager_mode)
        _check_finite("B_hat", B_hat, k + 1)
        trace.Theta.append(Theta)
        trace.R_hat.append(R_hat)
        trace.C.append(C)
        trace.B.append(B_next)
        trace.B_hat.append(B_hat)
        trace.F.append(F)
        _record(trace, k + 1, B_hat, B_true, nxt)
        R_prev = R_hat
    # a frozen run keeps its last estimate for the remaining iterations
    while len(trace.B_hat) <= cfg.K:
        k = len(trace.B_hat)
        trace.B.append(trace.B[-1])
        trace.B_hat.append(trace.B_hat[-1])
        trace.F.append(trace.F[-1])
        _record(trace, k, trace.B_hat[-1], B_true, se_states[k])
    final = trace.B_hat[-1]
    trace.estimate = quantize(final) if cfg.quantize_final else final
    return trace


def _record(trace: AmpTrace, k: int, B_hat, B_true, state: SeState | None):
    row = {"k": k}
    if B_true is not None:
        soft = empirical_metrics(B_hat, B_true)
        hard = empirical_metrics(quantize(B_hat), B_true)
        row.update(correlation=hard["correlation"], correlation_soft=soft["correlation"],
                   mse=soft["mse"])
    if state is not None and state.metrics:
        row.update(se_correlation=state.metrics.get("correlation_quantized"),
                   se_correlation_soft=state.metrics.get("correlation"),
                   se_mse=state.metrics.get("mse"),
                   trace_tau_b=state.metrics.get("trace_tau_b"))
    trace.metrics.append(row)


TRACE_COLUMNS = ("iteration", "correlation", "mse", "trace_tau_b", "se_correlation")


def trace_csv(trace: AmpTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in trace.metrics:
        vals = [row["k"]] + [row.get(c) for c in TRACE_COLUMNS[1:]]
        w.writerow(["" if v is None else (f"{v:.9g}" if isinstance(v, float) else v) for v in vals])
    return buf.getvalue()


def trace_json(trace: AmpTrace, full: bool = False) -> str:
    """Metrics per iteration; with ``full`` also every iterate matrix."""
    out = {"metrics": trace.metrics, "frozen_at": trace.frozen_at,
           "se": [s.to_dict() for s in trace.se_states]}
    if full:
        def dump(seq):
            return [None if m is None else np.asarray(m).tolist() for m in seq]
        out.update(Theta=dump(trace.Theta), B=dump(trace.B), B_hat=dump(trace.B_hat),
                   R_hat=dump(trace.R_hat), C=dump(trace.C), F=dump(trace.F))
    return json.dumps(out)
