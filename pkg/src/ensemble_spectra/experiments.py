"""Monte Carlo experiments on the largest eigenvalue and its concentration.

Every sample is an independent work item with its own child seed derived from
``(seed, experiment, n, ensemble, index)``, so results are bit-identical for a
given seed regardless of ``workers``.  Means and variances use ``math.fsum``.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy import stats

from . import enumeration
from .ensembles import MicSamplerConfig, mic_edge_count_pair_bits
from .entropy import relative_entropy_edge_count, relative_entropy_enumerated
from .graph import DEGREE_SEQUENCE, EDGE_COUNT, ConstraintSpec, num_pairs, triu_pairs
from .reporting import rows_to_csv, write_text
from .seeding import make_rng
from .spectral import expansion_estimate, fk_prediction, top_eigenpair

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ScheduledConstraint",
    "TableReport",
    "DeltaReport",
    "VarianceReport",
    "ConcentrationReport",
    "TransferReport",
    "schedule_constraint",
    "delta_experiment",
    "variance_check",
    "degree_concentration_stat",
    "ratio_concentration",
    "lambda_ratio_gap",
    "lambda2_tail",
    "transfer_check",
    "clopper_pearson_upper",
    "fit_tail_model",
]

EXPERIMENT_CODES = {
    "delta": 1,
    "variance": 2,
    "degree_concentration": 3,
    "ratio_concentration": 4,
    "lambda_gap": 5,
    "transfer": 6,
    "lambda2_tail": 7,
}
SCHEDULES = ("constant", "ultra_dense")
ESTIMATORS = ("lambda1", "degree_ratio", "expansion")
EVENT_SCALES = ("sqrt", "log")
TRANSFER_EVENTS = ("ratio_deviation", "empty", "gamma")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Constraint family, sizes and sampling budget of one experiment.

    ``p`` is the target density for ``schedule="constant"``; the
    ``"ultra_dense"`` schedule uses ``1 - n^{-1/2}`` instead.  ``regime_beta``
    only flags rows outside the validity window of the eigenvalue asymptotics.
    ``gamma`` and ``event_scale`` define the ratio-deviation event: the
    deviation threshold is ``gamma / sqrt(n)`` ("sqrt") or
    ``gamma * log(n) / sqrt(n)`` ("log").
    """

    kind: str = DEGREE_SEQUENCE
    schedule: str = "constant"
    p: float = 0.5
    n_list: tuple = (200, 400, 800)
    samples_per_n: int = 300
    seed: int = 0
    estimators: tuple = ("lambda1",)
    regime_beta: float = 6.0
    sampler: MicSamplerConfig = field(default_factory=MicSamplerConfig)
    lambda_tol: float = 1e-10
    gamma: float = 0.4
    event_scale: str = "log"
    ci_level: float = 0.99
    enumeration_cap: int = 6
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if isinstance(self.sampler, dict):
            object.__setattr__(self, "sampler", MicSamplerConfig.from_dict(self.sampler))
        if self.kind not in (DEGREE_SEQUENCE, EDGE_COUNT):
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"density p={self.p} outside [0, 1]")
        if not self.n_list or min(self.n_list) < 2:
            raise ConfigError("n_list must be non-empty with every n >= 2")
        if self.samples_per_n < 2:
            raise ConfigError("samples_per_n must be at least 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        if self.event_scale not in EVENT_SCALES:
            raise ConfigError(f"event_scale must be one of {EVENT_SCALES}")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def density(self, n: int) -> float:
        if self.schedule == "ultra_dense":
            return 1.0 - n**-0.5
        return self.p

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_list"] = list(self.n_list)
        out["estimators"] = list(self.estimators)
        out["sampler"] = self.sampler.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @property
    def digest(self) -> str:
        """Hash of everything that affects results (seed and workers excluded)."""
        data = self.to_dict()
        data.pop("seed")
        data.pop("workers")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ScheduledConstraint:
    spec: ConstraintSpec
    target: int
    p: float


def schedule_constraint(kind: str, n: int, p: float) -> ScheduledConstraint:
    """Round a density to an exact graphical constraint and its matched canonical p.

    Degree: ``d = round(p (n-1))``, minus one when ``n d`` is odd, and
    ``p = d / (n-1)``.  Edge count: ``L = round(p M)`` and ``p = L / M``.
    """
    if kind == DEGREE_SEQUENCE:
        d = math.floor(p * (n - 1) + 0.5)
        if (n * d) % 2:
            d -= 1
        return ScheduledConstraint(ConstraintSpec.constant_degree(n, d), d, d / (n - 1))
    m = num_pairs(n)
    L = math.floor(p * m + 0.5)
    return ScheduledConstraint(ConstraintSpec.edge_count(n, L), L, L / m)


# per-sample kernel ------------------------------------------------------------------

_DENSE_NEEDS = {"lambda1", "lambda2", "rnorm2", "expansion", "converged"}
_TOP_NEEDS = {"lambda1", "rnorm2", "expansion", "converged"}


def _sample_kernel(task):
    ensemble, n, p, L, seed, stream, needs, tol = task
    rng = make_rng(seed, *stream)
    m = num_pairs(n)
    if ensemble == "can":
        bits = rng.random(m) < p
    else:
        bits = mic_edge_count_pair_bits(n, L, rng, 1)[0]
    rows, cols = triu_pairs(n)
    r_on, c_on = rows[bits], cols[bits]
    k = (np.bincount(r_on, minlength=n) + np.bincount(c_on, minlength=n)).astype(np.float64)
    out = {}
    s1 = math.fsum(k)
    s2 = math.fsum(k * k)
    out["sum_k"] = s1
    out["sum_k2"] = s2
    out["edges"] = s1 / 2.0
    out["ratio"] = s2 / s1 if s1 else math.nan
    theta = (n - 1) * p
    out["dev2"] = math.fsum((k - theta) ** 2)
    if _DENSE_NEEDS.intersection(needs):
        a = np.zeros((n, n))
        a[r_on, c_on] = 1.0
        a[c_on, r_on] = 1.0
        if _TOP_NEEDS.intersection(needs):
            top = top_eigenpair(a, tol)
            out["lambda1"] = top.value
            out["converged"] = float(top.converged)
            if "rnorm2" in needs:
                out["rnorm2"] = n - float(top.vector.sum()) ** 2
        if "lambda2" in needs:
            out["lambda2"] = float(scipy.linalg.eigvalsh(a, subset_by_index=[n - 2, n - 2])[0])
        if "expansion" in needs:
            out["expansion"] = expansion_estimate(a, p, 3) if 0.0 < p < 1.0 else out["lambda1"]
    return tuple(out[name] for name in needs)


def _run(tasks, workers: int):
    if workers <= 1 or len(tasks) < 2:
        return [_sample_kernel(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sample_kernel, tasks, chunksize=chunk))


def _collect(config: ExperimentConfig, experiment: str, ensemble: str, n: int, p: float, L: int,
             needs: tuple, samples: int) -> dict:
    code = EXPERIMENT_CODES[experiment]
    ens_code = 0 if ensemble == "can" else 1
    tasks = [
        (ensemble, n, p, L, int(config.seed), (code, n, ens_code, i), needs, config.lambda_tol)
        for i in range(samples)
    ]
    results = _run(tasks, config.workers)
    arr = np.asarray(results, dtype=np.float64).reshape(samples, len(needs))
    return {name: arr[:, j] for j, name in enumerate(needs)}


def _mean_stderr_var(x) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=np.float64)
    k = len(x)
    mean = math.fsum(x) / k
    var = math.fsum((x - mean) ** 2) / (k - 1)
    return mean, math.sqrt(var / k), var


def clopper_pearson_upper(hits: int, trials: int, level: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper confidence bound for a binomial rate."""
    if hits >= trials:
        return 1.0
    return float(stats.beta.ppf(level, hits + 1, trials - hits))


def fit_tail_model(ns, rates) -> dict:
    """Fit ``rate = exp(-nu (log n)^xi)`` by least squares on
    ``log(-log rate) = log nu + xi log log n``; needs two usable rates."""
    pts = [(math.log(math.log(n)), math.log(-math.log(r))) for n, r in zip(ns, rates) if 0.0 < r < 1.0 and n > 2]
    if len(pts) < 2:
        return {"xi": math.nan, "nu": math.nan, "points": len(pts)}
    x, y = np.array(pts).T
    xi, log_nu = np.polyfit(x, y, 1)
    return {"xi": float(xi), "nu": float(math.exp(log_nu)), "points": len(pts)}


# reports ---------------------------------------------------------------------------------

@dataclass
class TableReport:
    experiment: str
    config: ExperimentConfig
    header: tuple
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return rows_to_csv(self.header, self.rows)

    def filename(self) -> str:
        return f"{self.experiment}_{self.config.digest}_{self.config.seed}.csv"

    def write(self, out_dir) -> Path:
        return write_text(Path(out_dir) / self.filename(), self.to_csv())

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def row_for(self, n: int, **match) -> dict:
        for row in self.rows:
            if row["n"] == n and all(row[k] == v for k, v in match.items()):
                return row
        raise KeyError(n)

    @property
    def nonconverged(self) -> int:
        return int(sum(row.get("nonconverged", 0) for row in self.rows))


class DeltaReport(TableReport):
    pass


class VarianceReport(TableReport):
    pass


class ConcentrationReport(TableReport):
    pass


class TransferReport(TableReport):
    pass


# Δ_n ----------------------------------------------------------------------------------------

DELTA_HEADER = (
    "n", "target", "p_can", "samples",
    "can_mean", "can_stderr", "can_var",
    "mic_mean", "mic_stderr", "mic_exact",
    "delta", "delta_stderr",
    "fk_prediction", "fk_error_scale", "in_regime",
    "can_degree_ratio_mean", "can_expansion_mean", "nonconverged",
)


def delta_experiment(config: ExperimentConfig) -> DeltaReport:
    """E_can[λ1] - E_mic[λ1] per n.

    For the constant-degree constraint every microcanonical graph is
    d-regular, so E_mic[λ1] = d exactly; the edge-count microcanonical
    ensemble is sampled.
    """
    needs = ["lambda1", "converged"]
    if "degree_ratio" in config.estimators:
        needs.append("ratio")
    if "expansion" in config.estimators:
        needs.append("expansion")
    needs = tuple(needs)
    rows = []
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        can = _collect(config, "delta", "can", n, sc.p, sc.target, needs, config.samples_per_n)
        can_mean, can_se, can_var = _mean_stderr_var(can["lambda1"])
        nonconv = int(len(can["converged"]) - can["converged"].sum())
        if config.kind == DEGREE_SEQUENCE:
            mic_mean, mic_se, mic_exact = float(sc.target), 0.0, True
        else:
            mic = _collect(config, "delta", "mic", n, sc.p, sc.target, ("lambda1", "converged"),
                           config.samples_per_n)
            mic_mean, mic_se, _ = _mean_stderr_var(mic["lambda1"])
            mic_exact = False
            nonconv += int(len(mic["converged"]) - mic["converged"].sum())
        fk = fk_prediction(n, sc.p, config.regime_beta)
        rows.append({
            "n": n,
            "target": sc.target,
            "p_can": sc.p,
            "samples": config.samples_per_n,
            "can_mean": can_mean,
            "can_stderr": can_se,
            "can_var": can_var,
            "mic_mean": mic_mean,
            "mic_stderr": mic_se,
            "mic_exact": mic_exact,
            "delta": can_mean - mic_mean,
            "delta_stderr": math.hypot(can_se, mic_se),
            "fk_prediction": fk.value,
            "fk_error_scale": fk.error_scale,
            "in_regime": fk.in_regime,
            "can_degree_ratio_mean": _mean_stderr_var(can["ratio"])[0] if "ratio" in can else math.nan,
            "can_expansion_mean": _mean_stderr_var(can["expansion"])[0] if "expansion" in can else math.nan,
            "nonconverged": nonconv,
        })
    return DeltaReport("delta", config, DELTA_HEADER, rows)


# variance of λ1 ------------------------------------------------------------------------------------

VARIANCE_HEADER = (
    "n", "p_can", "samples", "mean_lambda1", "mean_stderr", "fk_prediction",
    "shift", "shift_target", "variance", "variance_target", "var_ci_low", "var_ci_high",
    "target_in_ci", "nonconverged",
)


def variance_check(config: ExperimentConfig) -> VarianceReport:
    """Canonical mean shift λ1 - (n-1)p against 1-p and variance against 2p(1-p)."""
    rows = []
    alpha = 1.0 - config.ci_level
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        can = _collect(config, "variance", "can", n, p, sc.target, ("lambda1", "converged"),
                       config.samples_per_n)
        mean, se, var = _mean_stderr_var(can["lambda1"])
        k = config.samples_per_n
        lo = (k - 1) * var / stats.chi2.ppf(1.0 - alpha / 2, k - 1)
        hi = (k - 1) * var / stats.chi2.ppf(alpha / 2, k - 1)
        target = 2.0 * p * (1.0 - p)
        rows.append({
            "n": n,
            "p_can": p,
            "samples": k,
            "mean_lambda1": mean,
            "mean_stderr": se,
            "fk_prediction": fk_prediction(n, p, config.regime_beta).value,
            "shift": mean - (n - 1) * p,
            "shift_target": 1.0 - p,
            "variance": var,
            "variance_target": target,
            "var_ci_low": float(lo),
            "var_ci_high": float(hi),
            "target_in_ci": bool(lo <= target <= hi),
            "nonconverged": int(k - can["converged"].sum()),
        })
    return VarianceReport("variance", config, VARIANCE_HEADER, rows)


# concentration statistics -------------------------------------------------------------------------

CONC_HEADER = (
    "n", "statistic", "ensemble", "samples", "mean", "q90", "q99", "q999",
    "scale", "q99_scaled", "event", "event_hits", "event_rate_upper", "nonconverged",
)


def _conc_row(n, statistic, ensemble, values, scale, event="", hits=0, nonconverged=0, level=0.95):
    values = np.asarray(values, dtype=np.float64)
    q90, q99, q999 = np.quantile(values, [0.9, 0.99, 0.999])
    k = len(values)
    return {
        "n": n,
        "statistic": statistic,
        "ensemble": ensemble,
        "samples": k,
        "mean": math.fsum(values) / k,
        "q90": float(q90),
        "q99": float(q99),
        "q999": float(q999),
        "scale": scale,
        "q99_scaled": float(q99) / scale if scale else math.nan,
        "event": event,
        "event_hits": int(hits),
        "event_rate_upper": clopper_pearson_upper(int(hits), k, level) if event else math.nan,
        "nonconverged": nonconverged,
    }


def _tail_fits(rows) -> dict:
    fits = {}
    keys = sorted({(r["statistic"], r["event"], r["ensemble"]) for r in rows if r["event"]})
    for stat, event, ens in keys:
        sel = [r for r in rows if (r["statistic"], r["event"], r["ensemble"]) == (stat, event, ens)]
        rates = [r["event_hits"] / r["samples"] for r in sel]
        fits[f"{stat}:{event}:{ens}"] = fit_tail_model([r["n"] for r in sel], rates)
    return fits


def degree_concentration_stat(config: ExperimentConfig) -> ConcentrationReport:
    """Quantiles of ``|sum_i (K_i - Θ)^2 - σ² n (n-1)|`` on the n^{3/2} scale.

    The rare event counted is ``|sum_i (K_i - Θ)^2 - σ² n²| >= 2 σ² n²``;
    with σ² = 0 the event is vacuous and never counted.
    """
    rows = []
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        s2 = p * (1.0 - p)
        can = _collect(config, "degree_concentration", "can", n, p, sc.target, ("dev2",),
                       config.samples_per_n)
        dev2 = can["dev2"]
        stat = np.abs(dev2 - s2 * n * (n - 1))
        hits = int(np.sum(np.abs(dev2 - s2 * n * n) >= 2.0 * s2 * n * n)) if s2 > 0 else 0
        rows.append(_conc_row(n, "degree_deviation", "can", stat, n**1.5, "dev_ge_2_sigma2_n2", hits))
    return ConcentrationReport("degree_concentration", config, CONC_HEADER, rows, {"tail_fit": _tail_fits(rows)})


def _event_threshold(config: ExperimentConfig, n: int) -> float:
    """Threshold on the sqrt(n)-scaled ratio statistic."""
    if config.event_scale == "log":
        return config.gamma * math.log(n)
    return config.gamma


def _ratio_stats(n, p, sum_k, sum_k2, edges):
    mu, s2 = p, p * (1.0 - p)
    offset = s2 / mu if mu > 0 else 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(sum_k > 0, sum_k2 / np.where(sum_k > 0, sum_k, 1.0), 0.0)
    dev = math.sqrt(n) * np.abs(ratio - sum_k / n - offset)
    hoeff = np.abs(edges - num_pairs(n) * mu) / n
    return dev, hoeff


def ratio_concentration(config: ExperimentConfig) -> ConcentrationReport:
    """Ratio statistic ``sqrt(n) |ΣK²/ΣK - ΣK/n - σ²/μ|`` and the edge-sum
    statistic ``|Σ_{i<j} a_ij - M μ| / n``, canonical and microcanonical.

    The degree-constrained microcanonical graphs are all d-regular, so their
    statistics are exact constants; edge-count graphs are sampled.
    """
    rows = []
    needs = ("sum_k", "sum_k2", "edges")
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        thr = _event_threshold(config, n)
        hoeff_thr = math.sqrt(math.log(n))
        event = f"ratio_dev_ge_{config.gamma:g}_{config.event_scale}"
        can = _collect(config, "ratio_concentration", "can", n, p, sc.target, needs, config.samples_per_n)
        dev, hoeff = _ratio_stats(n, p, can["sum_k"], can["sum_k2"], can["edges"])
        rows.append(_conc_row(n, "ratio_deviation", "can", dev, 1.0, event, np.sum(dev >= thr)))
        rows.append(_conc_row(n, "edge_sum_deviation", "can", hoeff, 1.0, "ge_sqrt_log_n",
                              np.sum(hoeff >= hoeff_thr)))
        if config.kind == DEGREE_SEQUENCE:
            d, k = sc.target, config.samples_per_n
            sum_k = np.full(k, float(n * d))
            sum_k2 = np.full(k, float(n * d * d))
            edges = np.full(k, n * d / 2.0)
            ens = "mic_exact"
        else:
            mic = _collect(config, "ratio_concentration", "mic", n, p, sc.target, needs, config.samples_per_n)
            sum_k, sum_k2, edges = mic["sum_k"], mic["sum_k2"], mic["edges"]
            ens = "mic"
        dev, hoeff = _ratio_stats(n, p, sum_k, sum_k2, edges)
        rows.append(_conc_row(n, "ratio_deviation", ens, dev, 1.0, event, np.sum(dev >= thr)))
        rows.append(_conc_row(n, "edge_sum_deviation", ens, hoeff, 1.0, "ge_sqrt_log_n",
                              np.sum(hoeff >= hoeff_thr)))
    return ConcentrationReport("ratio_concentration", config, CONC_HEADER, rows, {"tail_fit": _tail_fits(rows)})


LAMBDA2_BETAS = (2.5, 3.0)


def lambda_ratio_gap(config: ExperimentConfig) -> ConcentrationReport:
    """``sqrt(n) |ΣK²/ΣK - λ1|`` quantiles, λ2 tail counts and ``||r||²`` counts."""
    rows = []
    needs = ("lambda1", "converged", "ratio", "lambda2", "rnorm2")
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        sigma = math.sqrt(p * (1.0 - p))
        can = _collect(config, "lambda_gap", "can", n, p, sc.target, needs, config.samples_per_n)
        nonconv = int(config.samples_per_n - can["converged"].sum())
        ratio = np.nan_to_num(can["ratio"], nan=0.0)
        gap = math.sqrt(n) * np.abs(ratio - can["lambda1"])
        rows.append(_conc_row(n, "ratio_lambda1_gap", "can", gap, 1.0, nonconverged=nonconv))
        scale = sigma * math.sqrt(n)
        for beta in LAMBDA2_BETAS:
            hits = np.sum(can["lambda2"] >= beta * scale) if scale > 0 else 0
            rows.append(_conc_row(n, "lambda2", "can", can["lambda2"], scale,
                                  f"ge_{beta:g}_sigma_sqrt_n", hits))
        r_thr = 4.0 * sigma**2 / p**2 if p > 0 else math.inf
        rows.append(_conc_row(n, "r_norm2", "can", can["rnorm2"], 1.0, "ge_4_sigma2_over_mu2",
                              np.sum(can["rnorm2"] >= r_thr) if sigma > 0 else 0))
    return ConcentrationReport("lambda_gap", config, CONC_HEADER, rows, {"tail_fit": _tail_fits(rows)})


def lambda2_tail(config: ExperimentConfig) -> ConcentrationReport:
    """λ2 alone on the ``sigma sqrt(n)`` scale, with tail counts.

    Same λ2 rows as ``lambda_ratio_gap`` without the power iteration for λ1,
    so large sample counts stay cheap.
    """
    rows = []
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        scale = math.sqrt(p * (1.0 - p) * n)
        can = _collect(config, "lambda2_tail", "can", n, p, sc.target, ("lambda2",), config.samples_per_n)
        for beta in LAMBDA2_BETAS:
            hits = np.sum(can["lambda2"] >= beta * scale) if scale > 0 else 0
            rows.append(_conc_row(n, "lambda2", "can", can["lambda2"], scale,
                                  f"ge_{beta:g}_sigma_sqrt_n", hits))
    return ConcentrationReport("lambda2_tail", config, CONC_HEADER, rows, {"tail_fit": _tail_fits(rows)})


# transfer scale -----------------------------------------------------------------------------------

TRANSFER_HEADER = (
    "n", "kind", "target", "p_can", "method", "s_n", "exp_neg_s_n", "samples", "hits",
    "p_event", "p_event_upper", "is_bound", "ratio", "ratio_upper", "gamma_identity",
)


def _ratio_event_batch(config: ExperimentConfig, n: int, p: float):
    thr = _event_threshold(config, n)

    def predicate(adj):
        k = adj.sum(axis=2)
        dev, _ = _ratio_stats(n, p, k.sum(axis=1), (k * k).sum(axis=1), k.sum(axis=1) / 2.0)
        return dev >= thr

    return predicate


def _entropy_and_identity(spec: ConstraintSpec, p: float, cap: int) -> tuple[float, float, float]:
    """``(S_n, log P_can(Γ) from an independent route, identity P_can(Γ) e^{S_n})``."""
    if spec.is_degree:
        report = relative_entropy_enumerated(spec, cap_n=cap)
        # the identity is computed from an explicit per-member product
        size = report.gamma_size
        d = spec.constant_target
        m = num_pairs(spec.n)
        e = spec.n * d // 2
        log_pg = math.log(size) + (e * math.log(p) if e else 0.0) + ((m - e) * math.log1p(-p) if m - e else 0.0)
        return report.s_n, log_pg, math.exp(log_pg + report.s_n)
    m = num_pairs(spec.n)
    s = relative_entropy_edge_count(spec.n, spec.target).s_n
    log_pg = float(stats.binom.logpmf(spec.target, m, p))
    return s, log_pg, math.exp(log_pg + s)


def transfer_check(config: ExperimentConfig, event: str = "ratio_deviation", level: float = 0.95) -> TransferReport:
    """Canonical probability of the bad event ``E^c`` against ``e^{-S_n}``.

    Events: ``"ratio_deviation"`` (ratio deviation above threshold), ``"empty"``
    (E^c = ∅) and ``"gamma"`` (E = Γ, so E^c is the complement of Γ).  Sizes
    up to ``enumeration_cap`` are computed exactly by enumeration, larger
    ones by canonical sampling (edge-count constraints only, since S_n is
    otherwise unavailable).  Zero-hit estimates use the Clopper-Pearson
    upper bound in the ratio.
    """
    if event not in TRANSFER_EVENTS:
        raise ConfigError(f"unknown transfer event {event!r}")
    rows = []
    for n in config.n_list:
        sc = schedule_constraint(config.kind, n, config.density(n))
        p = sc.p
        exact = n <= config.enumeration_cap
        if not exact and config.kind == DEGREE_SEQUENCE:
            raise ConfigError(f"degree-constraint entropy needs n <= {config.enumeration_cap}")
        s_n, log_pg, identity = _entropy_and_identity(sc.spec, p, max(config.enumeration_cap, 2))
        samples, hits = 0, 0
        if event == "empty":
            p_event = p_upper = 0.0
            bound = False
        elif exact:
            if event == "gamma":
                p_event = max(0.0, 1.0 - math.exp(log_pg))
            else:
                p_event = enumeration.exact_canonical_probability(sc.spec, _ratio_event_batch(config, n, p))
            p_upper, bound = p_event, False
        else:
            samples = config.samples_per_n
            can = _collect(config, "transfer", "can", n, p, sc.target, ("sum_k", "sum_k2", "edges"), samples)
            if event == "gamma":
                hits = int(np.sum(can["edges"] != sc.target))
            else:
                dev, _ = _ratio_stats(n, p, can["sum_k"], can["sum_k2"], can["edges"])
                hits = int(np.sum(dev >= _event_threshold(config, n)))
            p_event = hits / samples
            p_upper = clopper_pearson_upper(hits, samples, level)
            bound = hits == 0
        exp_neg_s = math.exp(-s_n)
        rows.append({
            "n": n,
            "kind": config.kind,
            "target": sc.target,
            "p_can": p,
            "method": "exact" if exact or event == "empty" else "monte_carlo",
            "s_n": s_n,
            "exp_neg_s_n": exp_neg_s,
            "samples": samples,
            "hits": hits,
            "p_event": p_event,
            "p_event_upper": p_upper,
            "is_bound": bound,
            "ratio": (p_upper if bound else p_event) / exp_neg_s,
            "ratio_upper": p_upper / exp_neg_s,
            "gamma_identity": identity,
        })
    return TransferReport("transfer", config, TRANSFER_HEADER, rows, {"event": event})


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of ``config`` with non-None overrides applied (re-validated)."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    try:
        return replace(config, **clean)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
