"""Problem instances: signals, Bernoulli designs, noise, centring and rescaling.

Pooled data observes ``Y = X B + Psi`` where ``B`` is ``p x L`` with one-hot rows
and ``X`` is an ``n x p`` Bernoulli(alpha) pooling design.  QGT is the scalar
case with a binary vector ``beta`` in place of ``B``.  AMP runs on the centred
and rescaled pair ``(tX, tY)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# role tags for independent random streams within one trial
ROLES = {"signal": 0, "design": 1, "noise": 2, "init": 3}


def stream(seed, *key: int) -> np.random.Generator:
    """Generator that is a pure function of ``(seed, *key)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def role_stream(seed, role: str) -> np.random.Generator:
    return stream(seed, ROLES[role])


@dataclass(frozen=True)
class Prior:
    """Categorical distribution over ``L >= 2`` categories."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).ravel()
        if probs.size < 2:
            raise ValidationError("a prior needs at least two categories")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValidationError(f"prior entries must be nonnegative, got {probs}")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"prior must sum to 1 (sum={probs.sum():.15g})")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def L(self) -> int:
        return self.probs.size

    @classmethod
    def of(cls, value) -> "Prior":
        return value if isinstance(value, Prior) else cls(np.asarray(value, dtype=float))

    def shifted(self, eps: float) -> np.ndarray:
        """``[pi_1 + eps, pi_2 - eps, pi_3, ...]``, the mismatched estimate."""
        out = self.probs.copy()
        out[0] += eps
        out[1] -= eps
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise on raw test outcomes.

    ``gaussian``: ``Psi_i ~ N(0, p sigma^2 I_L)``.
    ``uniform``: ``Psi_i ~ Uniform[-lambda sqrt(p), lambda sqrt(p)]`` (QGT only).
    """

    kind: str = "none"
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "uniform"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not np.isfinite(self.level) or self.level < 0:
            raise ValidationError("noise level must be a finite nonnegative number")

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls("none", 0.0)

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseSpec":
        return cls("gaussian", float(sigma))

    @classmethod
    def uniform(cls, lam: float) -> "NoiseSpec":
        return cls("uniform", float(lam))

    @property
    def is_noiseless(self) -> bool:
        return self.kind == "none" or self.level == 0.0

    def rescaled_variance(self, delta: float, alpha: float) -> float:
        """Variance of one entry of the rescaled noise (Gaussian case)."""
        if self.kind != "gaussian":
            raise ValidationError("rescaled variance is defined for Gaussian noise")
        return self.level**2 / (delta * alpha * (1 - alpha))

    def rescaled_halfwidth(self, delta: float, alpha: float) -> float:
        """Half-width of the rescaled uniform noise."""
        if self.kind != "uniform":
            raise ValidationError("rescaled half-width is defined for uniform noise")
        return self.level / np.sqrt(delta * alpha * (1 - alpha))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "level": self.level}


@dataclass(frozen=True)
class DesignPair:
    """Raw Bernoulli design and its centred, rescaled counterpart."""

    X: np.ndarray
    tX: np.ndarray
    alpha: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def delta(self) -> float:
        return self.n / self.p

    @property
    def scale(self) -> float:
        return np.sqrt(self.n * self.alpha * (1 - self.alpha))


@dataclass(frozen=True)
class Observations:
    Y: np.ndarray
    tY: np.ndarray
    pi_used: np.ndarray


@dataclass(frozen=True)
class QgtInstance:
    beta: np.ndarray
    design: DesignPair
    y: np.ndarray
    ty: np.ndarray
    noise: NoiseSpec = field(default_factory=NoiseSpec.none)


def gen_signal(p: int, prior, seed) -> np.ndarray:
    """``p x L`` matrix whose rows are i.i.d. one-hot draws from ``prior``."""
    prior = Prior.of(prior)
    if p < 1:
        raise ValidationError("p must be at least 1")
    rng = role_stream(seed, "signal") if not isinstance(seed, np.random.Generator) else seed
    labels = rng.choice(prior.L, size=p, p=prior.probs)
    return np.eye(prior.L)[labels]


def empirical_proportions(B: np.ndarray) -> np.ndarray:
    B = np.asarray(B)
    return B.sum(axis=0) / B.shape[0]


def center_design(X: np.ndarray, alpha: float) -> np.ndarray:
    n = X.shape[0]
    return (X - alpha) / np.sqrt(n * alpha * (1 - alpha))


def make_design(X: np.ndarray, alpha: float) -> DesignPair:
    X = np.asarray(X, dtype=float)
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    return DesignPair(X=X, tX=center_design(X, alpha), alpha=float(alpha))


def gen_design(n: int, p: int, alpha: float, seed) -> DesignPair:
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1 or p < 1:
        raise ValidationError("n and p must be at least 1")
    rng = role_stream(seed, "design") if not isinstance(seed, np.random.Generator) else seed
    X = (rng.random((n, p)) < alpha).astype(float)
    return make_design(X, alpha)


@dataclass(frozen=True)
class WhiteNoiseReport:
    mean: float
    n_var: float
    third_moment: float
    expected_third: float | None
    mean_ok: bool
    var_ok: bool
    third_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.var_ok and self.third_ok


def two_point_third_moment(n: int, p: int, alpha: float) -> float:
    """``p E|tX_ij|^3`` for the centred two-point entry distribution."""
    a = alpha * (1 - alpha)
    return p * (1.0 / (n * a)) ** 1.5 * a * ((1 - alpha) ** 2 + alpha**2)


def check_white_noise(tX: np.ndarray, tol: float = 0.05, mean_tol: float = 1e-2,
                      third_tol: float = 0.25, alpha: float | None = None) -> WhiteNoiseReport:
    """Empirical moment checks for a generalised white noise matrix.

    Entries should have mean 0, variance ``1/n`` and a vanishing scaled third
    moment.  When ``alpha`` is given the third moment is also compared to the
    two-point closed form within 10%.
    """
    tX = np.asarray(tX, dtype=float)
    n, p = tX.shape
    mean = float(tX.mean())
    n_var = float(n * tX.var())
    third = float(p * np.mean(np.abs(tX) ** 3))
    expected = None
    third_ok = third <= third_tol
    if alpha is not None:
        expected = two_point_third_moment(n, p, alpha)
        third_ok = third_ok and abs(third - expected) <= 0.1 * expected
    return WhiteNoiseReport(
        mean=mean, n_var=n_var, third_moment=third, expected_third=expected,
        mean_ok=abs(mean) <= mean_tol, var_ok=abs(n_var - 1) <= tol, third_ok=third_ok,
    )


def draw_noise(shape, p: int, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if noise.is_noiseless:
        return np.zeros(shape)
    if noise.kind == "gaussian":
        return rng.normal(0.0, np.sqrt(p) * noise.level, size=shape)
    half = noise.level * np.sqrt(p)
    return rng.uniform(-half, half, size=shape)


def forward(B: np.ndarray, design: DesignPair, noise: NoiseSpec | None = None, seed=0) -> np.ndarray:
    """Raw outcomes ``Y = X B + Psi``; ``B`` may be ``p x L`` or a length-p vector."""
    noise = noise or NoiseSpec.none()
    B = np.asarray(B, dtype=float)
    if B.shape[0] != design.p:
        raise ValidationError(f"signal has {B.shape[0]} rows but the design has {design.p} columns")
    if noise.kind == "uniform" and B.ndim == 2 and B.shape[1] > 1:
        raise ValidationError("uniform noise is only defined for the scalar (QGT) model")
    Y = design.X @ B
    rng = role_stream(seed, "noise") if not isinstance(seed, np.random.Generator) else seed
    return Y + draw_noise(Y.shape, design.p, noise, rng)


def rescale(Y: np.ndarray, design: DesignPair, pi_used) -> Observations:
    """``tY = (Y - alpha p pi_used) / sqrt(n alpha (1 - alpha))``."""
    pi_used = np.asarray(pi_used, dtype=float)
    if pi_used.ndim == 1 and pi_used.size > 1 and abs(pi_used.sum() - 1) > 1e-9:
        raise ValidationError("pi_used must sum to 1")
    tY = (np.asarray(Y, dtype=float) - design.alpha * design.p * pi_used) / design.scale
    return Observations(Y=np.asarray(Y, dtype=float), tY=tY, pi_used=pi_used)


def gen_qgt_instance(p: int, pi: float, alpha: float, n: int, noise: NoiseSpec | None = None,
                     seed=0) -> QgtInstance:
    """Binary signal, Bernoulli design, outcomes and rescaled outcomes."""
    if not 0 < pi < 1:
        raise ValidationError(f"defective probability must lie in (0, 1), got {pi}")
    noise = noise or NoiseSpec.none()
    beta = (role_stream(seed, "signal").random(p) < pi).astype(float)
    design = gen_design(n, p, alpha, role_stream(seed, "design"))
    y = forward(beta, design, noise, role_stream(seed, "noise"))
    ty = rescale(y, design, beta.mean()).tY
    return QgtInstance(beta=beta, design=design, y=y, ty=ty, noise=noise)


def instance_record(n: int, p: int, alpha: float, seed, prior) -> dict:
    """Self-describing manifest entry; matrices are regenerated from the seed."""
    seed_repr = seed if isinstance(seed, int) else {
        "entropy": int(seed.entropy), "spawn_key": [int(k) for k in seed.spawn_key]}
    return {"n": int(n), "p": int(p), "alpha": float(alpha), "seed": seed_repr,
            "prior": np.atleast_1d(np.asarray(prior, dtype=float)).tolist()}
