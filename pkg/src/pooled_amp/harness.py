"""Configuration-driven Monte Carlo experiments and result emission.

Every (grid point, trial) pair gets its own seed ``SeedSequence(seed,
spawn_key=(grid_index, trial))``; inside a trial the signal, design, noise and
AMP initializer draw from separate role streams.  SE predictions are computed
once per grid point.  QGT AMP follows a companion SE run at the instance's own
defective fraction; those runs are cached since the fraction takes few values.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .amp_pooled import AmpConfig, quantize, run_amp
from .amp_qgt import QgtConfig, empirical_fpr_fnr, empirical_sq_corr, run_qgt_amp
from .baselines import (
    counts_from_proportions, iht, solve_pooled_cvx, solve_pooled_lp, solve_qgt_bpdn,
    solve_qgt_lp, threshold_relaxed,
)
from .errors import SolverError, ValidationError
from .model import (
    NoiseSpec, Prior, empirical_proportions, forward, gen_design, gen_qgt_instance, gen_signal,
    rescale, role_stream,
)
from .quadrature import GaussianQuadSpec
from .state_evolution import limiting_fpr_fnr, se_qgt_run, se_run

PROBLEMS = ("pooled", "qgt")
METHODS = {"pooled": ("amp", "se-only", "iht", "lp", "cvx"),
           "qgt": ("amp", "se-only", "lp", "bpdn")}
CSV_COLUMNS = ("method", "delta", "noise", "zeta", "metric", "mean", "std", "theory",
               "trials", "n", "prior", "failures")


@dataclass
class ExperimentConfig:
    problem: str = "pooled"
    p: int = 500
    delta_grid: list = field(default_factory=lambda: [0.5])
    # pooled: one prior or a list of priors; qgt: one defective probability or a list
    prior: list | float = field(default_factory=lambda: [0.5, 0.5])
    alpha: float = 0.5
    noise_kind: str = "none"
    noise_levels: list = field(default_factory=lambda: [0.0])
    K: int = 10
    n_trials: int = 10
    methods: list = field(default_factory=lambda: ["amp", "se-only"])
    zeta_grid: list = field(default_factory=list)
    epsilon: float = 0.0
    seed: int = 0
    out: str = "results"
    quad: dict = field(default_factory=dict)
    threads: int = 1
    record_runtime: bool = False
    debug_dump: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValidationError(f"problem must be one of {PROBLEMS}")
        if not self.delta_grid or not self.noise_levels:
            raise ValidationError("grids must be non-empty")
        if self.n_trials < 1 or self.K < 1 or self.p < 1:
            raise ValidationError("p, K and n_trials must be at least 1")
        bad = [m for m in self.methods if m not in METHODS[self.problem]]
        if bad or not self.methods:
            raise ValidationError(f"methods {bad} not available for {self.problem}")
        for d in self.delta_grid:
            if d <= 0 or round(d * self.p) < 1:
                raise ValidationError(f"delta={d} gives n < 1")
        NoiseSpec(self.noise_kind, 0.0)
        self.priors()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, overrides) -> "ExperimentConfig":
        data = asdict(self)
        for item in overrides or []:
            if "=" not in item:
                raise ValidationError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[key.strip()] = value
        return ExperimentConfig.from_dict(data)

    def priors(self) -> list:
        if self.problem == "qgt":
            vals = self.prior if isinstance(self.prior, list) else [self.prior]
            for v in vals:
                if not 0 < float(v) < 1:
                    raise ValidationError("qgt prior must lie in (0, 1)")
            return [float(v) for v in vals]
        pr = self.prior
        if pr and isinstance(pr[0], (list, tuple)):
            return [Prior.of(q) for q in pr]
        return [Prior.of(pr)]

    def quad_spec(self) -> GaussianQuadSpec:
        return GaussianQuadSpec(**self.quad)

    def noise(self, level: float) -> NoiseSpec:
        return NoiseSpec(self.noise_kind if level > 0 else "none", float(level))


@dataclass
class ResultRow:
    method: str
    delta: float
    noise: float
    zeta: float | None
    metric: str
    mean: float | None
    std: float | None
    theory: float | None
    trials: int
    n: int
    prior: str
    failures: int = 0
    runtime: float | None = None


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    trials: list = field(default_factory=list)    # per-trial values (debug dump)

    def find(self, **match) -> list:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]


def trial_seed(master: int, grid_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(grid_index), int(trial)))


def aggregate(values) -> tuple:
    """Order-independent mean and sample standard deviation of the defined values."""
    vals = sorted(float(v) for v in values if v is not None and np.isfinite(v))
    if not vals:
        return None, None
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def _prior_label(prior) -> str:
    if isinstance(prior, Prior):
        return "[" + ",".join(f"{v:.6g}" for v in prior.probs) + "]"
    return f"{prior:.6g}"


# ----- per-trial method runs ---------------------------------------------------------

def _pooled_trial(cfg: ExperimentConfig, prior: Prior, delta: float, noise: NoiseSpec,
                  ss, se_states) -> dict:
    p, n = cfg.p, round(delta * cfg.p)
    B = gen_signal(p, prior, role_stream(ss, "signal"))
    design = gen_design(n, p, cfg.alpha, role_stream(ss, "design"))
    Y = forward(B, design, noise, role_stream(ss, "noise"))
    pi_hat = empirical_proportions(B)
    pi_used = pi_hat.copy()
    if cfg.epsilon:
        pi_used[0] += cfg.epsilon
        pi_used[1] -= cfg.epsilon
    obs = rescale(Y, design, pi_used)
    out = {}
    for method in cfg.methods:
        if method == "se-only":
            continue
        t0 = time.perf_counter()
        try:
            if method == "amp":
                amp_cfg = AmpConfig(K=cfg.K, quad=cfg.quad_spec())
                tr = run_amp(obs, design, prior, noise, amp_cfg, role_stream(ss, "init"), B, se_states)
                last = tr.metrics[-1]
                vals = {"correlation": last["correlation"], "mse": last["mse"]}
            elif method == "iht":
                B_iht = iht(obs.tY, design.tX, counts_from_proportions(pi_hat, p), K=cfg.K * 10)["B"]
                vals = {"correlation": float(np.sum(B_iht * B) / p)}
            elif method == "lp":
                rep = solve_pooled_lp(Y, design.X, prior)
                vals = {"correlation": float(np.sum(quantize(rep.x) * B) / p)}
            elif method == "cvx":
                if noise.is_noiseless:
                    raise ValidationError("cvx needs a positive noise level")
                rep = solve_pooled_cvx(Y, design.X, prior, noise.level)
                vals = {"correlation": float(np.sum(quantize(rep.x) * B) / p)}
        except (SolverError, ValidationError) as exc:
            vals = {"error": str(exc)}
        vals["runtime"] = time.perf_counter() - t0
        out[method] = vals
    return out


@lru_cache(maxsize=256)
def _companion_qgt_se(pi: float, delta: float, K: int, noise: NoiseSpec, quad: GaussianQuadSpec,
                      alpha: float) -> tuple:
    return tuple(se_qgt_run(pi, delta, K, noise, quad, alpha, "iid"))


def _qgt_trial(cfg: ExperimentConfig, pi: float, delta: float, noise: NoiseSpec, ss,
               se_states) -> dict:
    p, n = cfg.p, round(delta * cfg.p)
    inst = gen_qgt_instance(p, pi, cfg.alpha, n, noise, ss)
    ty = inst.ty
    beta = inst.beta
    # AMP uses the same proportion that centred ty (pi_hat, shifted under mismatch)
    pi_used = float(beta.mean()) + cfg.epsilon
    if cfg.epsilon:
        ty = ty - cfg.alpha * p * cfg.epsilon / inst.design.scale
    if not 0 < pi_used < 1:
        pi_used = pi
    out = {}
    for method in cfg.methods:
        if method == "se-only":
            continue
        t0 = time.perf_counter()
        try:
            if method == "amp":
                qcfg = QgtConfig(K=cfg.K, quad=cfg.quad_spec())
                se_used = _companion_qgt_se(pi_used, delta, cfg.K, noise, qcfg.quad, cfg.alpha)
                tr = run_qgt_amp(ty, inst.design, pi_used, noise, qcfg, role_stream(ss, "init"), beta, se_used)
                vals = {"sq_corr": tr.metrics[-1]["sq_corr"]}
                for z in cfg.zeta_grid:
                    fpr, fnr = empirical_fpr_fnr(beta, tr.estimate(z))
                    vals[("fpr", z)], vals[("fnr", z)] = fpr, fnr
            else:
                if method == "lp":
                    if not noise.is_noiseless:
                        raise ValidationError("lp is the noiseless program; use bpdn")
                    rep = solve_qgt_lp(inst.y, inst.design.X)
                else:
                    rep = solve_qgt_bpdn(inst.y, inst.design.X, noise.level)
                if rep.status != "optimal":
                    raise SolverError(f"{method} returned status {rep.status}")
                vals = {"sq_corr": empirical_sq_corr(rep.x, beta)}
                for z in cfg.zeta_grid:
                    fpr, fnr = empirical_fpr_fnr(beta, threshold_relaxed(rep.x, z))
                    vals[("fpr", z)], vals[("fnr", z)] = fpr, fnr
        except (SolverError, ValidationError) as exc:
            vals = {"error": str(exc)}
        vals["runtime"] = time.perf_counter() - t0
        out[method] = vals
    return out


# ----- SE predictions ----------------------------------------------------------------

def _se_predictions(cfg: ExperimentConfig, prior, delta: float, noise: NoiseSpec):
    quad = cfg.quad_spec()
    if cfg.problem == "pooled":
        states = se_run(prior, delta, cfg.K, noise, quad, cfg.alpha, "iid-categorical")
        m = states[-1].metrics
        return states, {"correlation": m["correlation_quantized"], "mse": m["mse"]}
    states = se_qgt_run(prior, delta, cfg.K, noise, quad, cfg.alpha, "iid")
    last = states[-1]
    theory = {"sq_corr": last.metrics["sq_corr"]}
    for z in cfg.zeta_grid:
        theory[("fpr", z)], theory[("fnr", z)] = limiting_fpr_fnr(last.mu, last.sigma, z)
    return states, theory


def se_trajectories(cfg: ExperimentConfig) -> list:
    """Full SE trajectory (all matrices) for every grid point."""
    out = []
    for prior, delta, level in grid_points(cfg):
        states, _ = _se_predictions(cfg, prior, delta, cfg.noise(level))
        out.append({"prior": _prior_label(prior), "delta": delta, "noise": level,
                    "states": [st.to_dict() for st in states]})
    return out


def grid_points(cfg: ExperimentConfig) -> list:
    pts = []
    for prior in cfg.priors():
        for delta in cfg.delta_grid:
            for level in cfg.noise_levels:
                pts.append((prior, float(delta), float(level)))
    return pts


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable()
    trial_fn = _pooled_trial if cfg.problem == "pooled" else _qgt_trial
    for gi, (prior, delta, level) in enumerate(grid_points(cfg)):
        noise = cfg.noise(level)
        needs_se = any(m in ("amp", "se-only") for m in cfg.methods)
        t0 = time.perf_counter()
        states, theory = _se_predictions(cfg, prior, delta, noise) if needs_se else (None, {})
        se_time = time.perf_counter() - t0
        n = round(delta * cfg.p)

        def one(trial):
            return trial_fn(cfg, prior, delta, noise, trial_seed(cfg.seed, gi, trial), states)

        trials = list(range(cfg.n_trials))
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(one, trials))
        else:
            results = [one(t) for t in trials]
        label = _prior_label(prior)
        for trial, res in zip(trials, results):
            table.trials.append({"grid_index": gi, "trial": trial, "delta": delta, "noise": level,
                                 "prior": label, "results": _jsonable(res)})
        for method in cfg.methods:
            if method == "se-only":
                for key, val in theory.items():
                    metric, zeta = key if isinstance(key, tuple) else (key, None)
                    table.rows.append(ResultRow("se-only", delta, level, zeta, metric, val, 0.0, val,
                                                0, n, label, 0, se_time if cfg.record_runtime else None))
                continue
            per = [r[method] for r in results]
            failures = sum("error" in v for v in per)
            ok = [v for v in per if "error" not in v]
            keys = [k for k in (ok[0] if ok else {}) if k != "runtime"]
            runtime = aggregate([v["runtime"] for v in per])[0] if cfg.record_runtime else None
            for key in keys:
                metric, zeta = key if isinstance(key, tuple) else (key, None)
                mean, std = aggregate([v.get(key) for v in ok])
                th = theory.get(key) if method == "amp" else None
                count = sum(v.get(key) is not None for v in ok)
                table.rows.append(ResultRow(method, delta, level, zeta, metric, mean, std, th,
                                            count, n, label, failures, runtime))
            if not ok:
                table.rows.append(ResultRow(method, delta, level, None, "failed", None, None, None,
                                            0, n, label, failures, runtime))
    return table


def _flat_key(k) -> str:
    return f"{k[0]}@{k[1]:g}" if isinstance(k, tuple) else k


def _jsonable(res: dict) -> dict:
    out = {}
    for method, vals in res.items():
        out[method] = {_flat_key(k): v for k, v in vals.items() if k != "runtime"}
    return out


# ----- emission ----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def table_csv(table: ResultTable, with_runtime: bool = False) -> str:
    cols = CSV_COLUMNS + (("runtime",) if with_runtime else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in table.rows:
        w.writerow([_fmt(getattr(row, c)) for c in cols])
    return buf.getvalue()


def emit_csv(table: ResultTable, path, with_runtime: bool = False) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table_csv(table, with_runtime))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def table_to_json(table: ResultTable) -> str:
    return json.dumps({"rows": [asdict(r) for r in table.rows], "trials": table.trials},
                      indent=1, sort_keys=True)


def table_from_json(text: str) -> ResultTable:
    data = json.loads(text)
    return ResultTable(rows=[ResultRow(**r) for r in data["rows"]], trials=data.get("trials", []))


def emit_json(table: ResultTable, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table_to_json(table))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# ----- tY scaling diagnostic ---------------------------------------------------------

def scaling_diagnostic(cfg: ExperimentConfig, p_values=(500, 2000), epsilon: float = 0.05) -> dict:
    """Mean ``|tY|`` under exact and shifted ``pi_used`` as ``p`` grows."""
    if cfg.problem != "pooled":
        raise ValidationError("scaling diagnostic is defined for the pooled problem")
    prior = cfg.priors()[0]
    delta = float(cfg.delta_grid[0])
    exact, shifted, zscores = {}, {}, {}
    for pi_idx, p in enumerate(p_values):
        n = round(delta * p)
        ex_abs, sh_abs, means = [], [], []
        for trial in range(cfg.n_trials):
            ss = trial_seed(cfg.seed, pi_idx, trial)
            B = gen_signal(p, prior, role_stream(ss, "signal"))
            design = gen_design(n, p, cfg.alpha, role_stream(ss, "design"))
            Y = forward(B, design, None)
            pi_hat = empirical_proportions(B)
            tY = rescale(Y, design, pi_hat).tY
            pi_shift = pi_hat.copy()
            pi_shift[0] += epsilon
            pi_shift[1] -= epsilon
            tY_s = rescale(Y, design, pi_shift).tY
            ex_abs.append(np.mean(np.abs(tY)))
            sh_abs.append(np.mean(np.abs(tY_s[:, 0])))
            means.append(tY)
        rows = np.vstack(means)
        exact[p] = float(np.mean(ex_abs))
        shifted[p] = float(np.mean(sh_abs))
        # given B the rows of tY are i.i.d. with mean exactly zero, so pool them
        col_se = rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
        zscores[p] = (np.abs(rows.mean(axis=0)) / np.where(col_se > 0, col_se, np.inf)).tolist()
    p0, p1 = p_values[0], p_values[-1]
    ratio_exact = exact[p1] / exact[p0]
    ratio_shift = shifted[p1] / shifted[p0]
    max_z = max(max(z) for z in zscores.values())
    return {"p_values": list(p_values), "delta": delta, "epsilon": epsilon,
            "prior": _prior_label(prior), "mean_abs_exact": exact, "mean_abs_shifted": shifted,
            "ratio_exact": ratio_exact, "ratio_shifted": ratio_shift,
            "expected_shift_ratio": float(np.sqrt(p1 / p0)), "column_mean_z": zscores,
            "exact_ok": 0.8 <= ratio_exact <= 1.25, "shifted_ok": 1.7 <= ratio_shift <= 2.3,
            "zero_mean_ok": max_z <= 3.0}
