import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pooled_amp.amp_pooled import (
    TRACE_COLUMNS, AmpConfig, empirical_metrics, onsager_C, onsager_F, quantize, run_amp, trace_json,
)
from pooled_amp.denoisers import condition, denoise_f, denoise_g, f_jacobian
from pooled_amp.errors import SolverError, ValidationError
from pooled_amp.model import (
    NoiseSpec, empirical_proportions, forward, gen_design, gen_signal, rescale,
)
from pooled_amp.quadrature import GaussianQuadSpec
from pooled_amp.state_evolution import SeState, se_run

GH = GaussianQuadSpec("gauss-hermite", n_nodes=40)
GH_ORACLE = GaussianQuadSpec("gauss-hermite", n_nodes=150)


def instance(p, delta, prior, seed, noise=None):
    n = round(delta * p)
    B = gen_signal(p, prior, seed)
    d = gen_design(n, p, 0.5, seed)
    obs = rescale(forward(B, d, noise, seed), d, empirical_proportions(B))
    return B, d, obs


def random_pd(rng, L, scale=1.0):
    A = rng.standard_normal((L, L))
    return scale * (A @ A.T / L + 0.3 * np.eye(L))


# ----- f ---------------------------------------------------------------------------

def test_f_equidistant_point():
    out = denoise_f([[0.5, 0.5]], np.eye(2), np.eye(2), [0.5, 0.5])
    assert np.allclose(out, [[0.5, 0.5]])


def test_f_hand_value():
    out = denoise_f([[1.0, 0.0]], np.eye(2), np.eye(2), [0.5, 0.5])
    assert np.allclose(out, np.array([[1.0, np.exp(-1)]]) / (1 + np.exp(-1)))
    assert out[0, 0] == pytest.approx(0.7311, abs=1e-4)


def test_f_degenerate_prior():
    rng = np.random.default_rng(0)
    out = denoise_f(rng.standard_normal((20, 2)) * 5, np.eye(2), np.eye(2), [1.0, 0.0])
    assert np.array_equal(out, np.tile([1.0, 0.0], (20, 1)))


def test_f_extreme_inputs_stay_finite():
    S = np.array([[1e300, -1e300], [-1e300, 1e300], [0.0, 0.0]])
    out = denoise_f(S, 1e3 * np.eye(2), np.eye(2), [0.5, 0.5])
    assert np.all(np.isfinite(out))
    assert np.allclose(out.sum(axis=1), 1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), L=st.integers(2, 4), scale=st.floats(0.01, 50))
def test_f_rows_on_simplex(seed, L, scale):
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(L))
    Mu = random_pd(rng, L, scale)
    S = rng.standard_normal((30, L)) * 3 * scale
    out = denoise_f(S, Mu, Mu, pi)
    assert np.all(out >= 0) and np.all(out <= 1)
    assert np.max(np.abs(out.sum(axis=1) - 1)) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_f_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    L = 3
    pi = rng.dirichlet(np.ones(L))
    Mu, Tau = random_pd(rng, L), random_pd(rng, L)
    S = rng.standard_normal((100, L))
    _, J = f_jacobian(S, Mu, Tau, pi)
    h = 1e-5
    for m in range(L):
        e = np.zeros(L)
        e[m] = h
        fd = (denoise_f(S + e, Mu, Tau, pi) - denoise_f(S - e, Mu, Tau, pi)) / (2 * h)
        assert np.max(np.abs(J[:, :, m] - fd)) <= 1e-6


# ----- g ---------------------------------------------------------------------------

def bayes_sigma():
    return se_run([0.3, 0.7], 0.5, 2, quad=GH_ORACLE)[2].Sigma


def test_g_zero_when_observation_matches_iterate():
    Sigma = bayes_sigma()
    u = np.random.default_rng(1).standard_normal((10, 2))
    assert np.max(np.abs(denoise_g(u, u, Sigma))) <= 1e-6


def test_g_identity_gap():
    Sigma = np.block([[2 * np.eye(2), np.eye(2)], [np.eye(2), np.eye(2)]])
    rng = np.random.default_rng(2)
    u = rng.standard_normal((8, 2))
    d = rng.standard_normal((8, 1)) * np.array([1.0, -1.0])   # pooled residuals sum to zero
    assert np.allclose(denoise_g(u, u + d, Sigma), d)


def test_g_small_noise_is_continuous():
    Sigma = bayes_sigma()
    rng = np.random.default_rng(3)
    u = rng.standard_normal((10, 2))
    y = u + rng.standard_normal((10, 1)) * np.array([1.0, -1.0])
    clean = denoise_g(u, y, Sigma)
    noisy = denoise_g(u, y, Sigma, NoiseSpec.gaussian(1e-6), delta=0.5, alpha=0.5)
    assert np.max(np.abs(noisy - clean)) <= 1e-6


def test_g_jacobian_is_constant_and_exact():
    Sigma = bayes_sigma()
    L = 2
    for noise in (None, NoiseSpec.gaussian(0.2)):
        cond = condition(Sigma, None if noise is None else noise.rescaled_variance(0.5, 0.5))
        rng = np.random.default_rng(4)
        u, y = rng.standard_normal((5, L)), rng.standard_normal((5, L))
        h = 1e-5
        for m in range(L):
            e = np.zeros(L)
            e[m] = h
            fd = (denoise_g(u + e, y, Sigma, noise, 0.5, 0.5)
                  - denoise_g(u - e, y, Sigma, noise, 0.5, 0.5)) / (2 * h)
            assert np.allclose(fd, cond.g_jacobian[:, m], atol=1e-6)


def test_onsager_c_noiseless_closed_form():
    Sigma = bayes_sigma()
    state = SeState(k=2, Sigma=Sigma)
    S11, S21 = Sigma[:2, :2], Sigma[2:, :2]
    expected = -np.linalg.pinv(S11 - S21, rcond=1e-10)
    assert np.allclose(onsager_C(state, None, 0.5, 0.5), expected, atol=1e-6)


def test_onsager_f_degenerate_prior_is_zero():
    state = SeState(k=1, Sigma=np.eye(4), Mu_B=np.eye(2), Tau_B=np.eye(2))
    S = np.random.default_rng(5).standard_normal((40, 2))
    assert np.allclose(onsager_F(S, state, [1.0, 0.0], 20), 0)


def test_onsager_f_needs_state():
    with pytest.raises(ValidationError):
        onsager_F(np.zeros((2, 2)))


# ----- quantization and metrics -------------------------------------------------------

def test_quantize_examples():
    assert np.array_equal(quantize([[0.9, 0.1]]), [[1, 0]])
    assert np.array_equal(quantize([[0.5, 0.5]]), [[1, 0]])
    one_hot = np.eye(3)[[2, 0, 1]]
    assert np.array_equal(quantize(one_hot), one_hot)
    with pytest.raises(ValidationError):
        quantize([[np.nan, 0.2]])


def test_metric_examples():
    B = gen_signal(40, [0.5, 0.5], 8)
    assert empirical_metrics(B, B) == {"correlation": 1.0, "mse": 0.0}
    assert empirical_metrics(np.full_like(B, 0.5), B)["correlation"] == pytest.approx(0.5)
    B_hat = B.copy()
    B_hat[:10] = B_hat[:10, ::-1]
    assert empirical_metrics(B_hat, B)["correlation"] == pytest.approx(30 / 40)
    with pytest.raises(ValidationError):
        empirical_metrics(B[:5], B)


# ----- full runs -------------------------------------------------------------------

def test_square_design_recovers_signal():
    B, d, obs = instance(500, 1.0, [0.5, 0.5], 0)
    tr = run_amp(obs, d, [0.5, 0.5], cfg=AmpConfig(K=10, quad=GH), seed=1, B_true=B)
    assert empirical_metrics(tr.estimate, B)["correlation"] >= 0.99
    # sanity oracle: the square 0/1 design is invertible, so Y determines B exactly
    assert np.allclose(np.linalg.solve(d.X, obs.Y), B, atol=1e-8)


def test_initial_estimate_is_independent():
    p = 500
    B, d, obs = instance(p, 0.5, [0.5, 0.5], 2)
    tr = run_amp(obs, d, [0.5, 0.5], cfg=AmpConfig(K=1, quad=GH), seed=3, B_true=B)
    assert abs(tr.metrics[0]["correlation"] - 0.5) <= 3 * np.sqrt(0.25 / p)


def test_iterates_stay_on_simplex():
    prior = [0.2, 0.3, 0.5]
    B, d, obs = instance(300, 0.6, prior, 4, NoiseSpec.gaussian(0.1))
    tr = run_amp(obs, d, prior, NoiseSpec.gaussian(0.1), AmpConfig(K=6, quad=GH), seed=5, B_true=B)
    assert tr.K == 6 and len(tr.metrics) == 7
    for Bh in tr.B_hat:
        assert np.max(np.abs(Bh.sum(axis=1) - 1)) <= 1e-10
        assert Bh.min() >= 0 and Bh.max() <= 1
    n, p = d.tX.shape
    for k in range(len(tr.Theta)):
        assert tr.Theta[k].shape == (n, 3) and tr.R_hat[k].shape == (n, 3)
        assert tr.B[k + 1].shape == (p, 3) and tr.C[k].shape == (3, 3)


def test_permuting_categories_permutes_iterates():
    prior = np.array([0.2, 0.3, 0.5])
    perm = np.array([2, 0, 1])
    B, d, obs = instance(300, 0.5, prior, 6)
    cfg = AmpConfig(K=5, quad=GH, init_kind="row-constant")
    a = run_amp(obs, d, prior, cfg=cfg, seed=0)
    obs_p = rescale(obs.Y[:, perm], d, obs.pi_used[perm])
    b = run_amp(obs_p, d, prior[perm], cfg=cfg, seed=0)
    for x, y in zip(a.B_hat, b.B_hat):
        assert np.max(np.abs(x[:, perm] - y)) <= 1e-8


def test_onsager_modes_agree():
    B, d, obs = instance(2000, 0.5, [0.5, 0.5], 7)
    se = se_run([0.5, 0.5], d.delta, 10, quad=GH, init_kind="iid-categorical")
    emp = run_amp(obs, d, [0.5, 0.5], cfg=AmpConfig(quad=GH), seed=1, se_states=se)
    det = run_amp(obs, d, [0.5, 0.5], cfg=AmpConfig(quad=GH, onsager_mode="deterministic-se"),
                  seed=1, se_states=se)
    for Fe, Fd in zip(emp.F[1:], det.F[1:]):
        assert np.max(np.abs(Fe - Fd)) <= 0.1
    for Ce, Cd in zip(emp.C, det.C):
        assert np.max(np.abs(Ce - Cd)) <= 0.1


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.7])
def test_tracks_state_evolution_per_iteration(delta):
    prior = [0.5, 0.5]
    p = 500
    se = se_run(prior, round(delta * p) / p, 10, init_kind="iid-categorical")
    runs = []
    for seed in range(10):
        B, d, obs = instance(p, delta, prior, 100 + seed)
        runs.append(run_amp(obs, d, prior, seed=seed, B_true=B, se_states=se).metrics)
    for k in range(1, 11):
        emp = np.mean([m[k]["correlation"] for m in runs])
        assert abs(emp - runs[0][k]["se_correlation"]) <= 0.05


def test_non_finite_observations_abort_with_iteration():
    B, d, obs = instance(60, 0.5, [0.5, 0.5], 8)
    tY = obs.tY.copy()
    tY[3, 0] = np.nan
    bad = type(obs)(Y=obs.Y, tY=tY, pi_used=obs.pi_used)
    with pytest.raises(SolverError) as exc:
        run_amp(bad, d, [0.5, 0.5], cfg=AmpConfig(K=3, quad=GH))
    assert exc.value.iteration == 0


def test_config_and_shape_validation():
    with pytest.raises(ValidationError):
        AmpConfig(K=0)
    with pytest.raises(ValidationError):
        AmpConfig(onsager_mode="other")
    B, d, obs = instance(40, 0.5, [0.5, 0.5], 9)
    with pytest.raises(ValidationError):
        run_amp(obs, d, [0.2, 0.3, 0.5], cfg=AmpConfig(K=2, quad=GH))


def test_trace_export():
    B, d, obs = instance(100, 0.5, [0.5, 0.5], 10)
    tr = run_amp(obs, d, [0.5, 0.5], cfg=AmpConfig(K=3, quad=GH), B_true=B)
    lines = tr.to_csv().strip().split("\n")
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 5
    brief = json.loads(trace_json(tr))
    assert "B_hat" not in brief and len(brief["metrics"]) == 4
    full = json.loads(trace_json(tr, full=True))
    assert np.allclose(full["B_hat"][2], tr.B_hat[2])
    assert AmpConfig().to_dict()["onsager_mode"] == "empirical-jacobian"
