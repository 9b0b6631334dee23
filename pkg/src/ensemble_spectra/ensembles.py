"""Canonical and microcanonical ensembles under degree or edge-count constraints.

The canonical ensemble is an independent-edge law with pair probabilities
``p_ij`` tuned so the constraint holds on average.  The microcanonical
ensemble is uniform on the graphs meeting the constraint exactly; it is
sampled by a uniform edge subset (edge count), by half-edge pairing with
rejection, or by a double-edge-swap Markov chain (degree sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import expit

from .graph import (
    ConstraintSpec,
    Graph,
    degrees,
    havel_hakimi,
    is_graphical,
    num_pairs,
    pair_index,
    triu_pairs,
)
from .seeding import make_rng

__all__ = [
    "CalibrationError",
    "SamplerError",
    "CanonicalModel",
    "MicSamplerConfig",
    "calibrate",
    "canonical_logprob",
    "hamiltonian",
    "log_partition",
    "sample_canonical",
    "canonical_pair_bits",
    "sample_mic_edge_count",
    "mic_edge_count_pair_bits",
    "sample_mic_degrees",
    "mic_degree_chain",
    "sample_mic",
    "resolve_method",
    "EdgeSwapChain",
]

EDGE_SWAP = "edge_swap_mcmc"
PAIRING = "pairing_rejection"
EDGE_SUBSET = "uniform_edge_subset"
METHODS = (EDGE_SWAP, PAIRING, EDGE_SUBSET)


class CalibrationError(ValueError):
    """The constraint cannot be realized on average (or the solver failed)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CanonicalModel:
    """Calibrated independent-edge law.

    ``p`` is set when all pairs share one probability; otherwise the per-pair
    log-probabilities are stored in bit order (see ``graph.triu_pairs``).  For
    heterogeneous models ``mu`` and ``sigma2`` are pair averages.
    """

    n: int
    spec: ConstraintSpec
    theta_star: np.ndarray
    p: float | None
    mu: float
    sigma2: float
    residual: float
    p_exact: Fraction | None = None
    iterations: int = 0
    _log_p: np.ndarray | None = field(default=None, repr=False)
    _log_q: np.ndarray | None = field(default=None, repr=False)

    @property
    def homogeneous(self) -> bool:
        return self.p is not None

    @property
    def theta_expected_degree_residual(self) -> float:
        return self.residual

    def pair_probabilities(self) -> np.ndarray:
        m = num_pairs(self.n)
        if self.homogeneous:
            return np.full(m, self.p)
        return np.exp(self._log_p)

    def pair_log_probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """``(log p_ij, log(1 - p_ij))`` per pair, with ``-inf`` at the boundary."""
        m = num_pairs(self.n)
        if self.homogeneous:
            with np.errstate(divide="ignore"):
                return np.full(m, np.log(self.p)), np.full(m, np.log1p(-self.p))
        return self._log_p, self._log_q

    @property
    def pair_prob(self) -> np.ndarray:
        """Symmetric ``n x n`` matrix of edge probabilities, zero diagonal."""
        rows, cols = triu_pairs(self.n)
        out = np.zeros((self.n, self.n))
        probs = self.pair_probabilities()
        out[rows, cols] = probs
        out[cols, rows] = probs
        return out

    def expected_constraint(self):
        if self.spec.is_degree:
            return self.pair_prob.sum(axis=1)
        return float(self.pair_probabilities().sum())


# calibration -------------------------------------------------------------

def _homogeneous_model(spec, p_exact: Fraction, theta: np.ndarray) -> CanonicalModel:
    p = float(p_exact)
    return CanonicalModel(
        n=spec.n,
        spec=spec,
        theta_star=theta,
        p=p,
        mu=p,
        sigma2=p * (1.0 - p),
        residual=0.0,
        p_exact=p_exact,
    )


def _logit_theta(p: float) -> float:
    # P(edge) = e^{-theta} / (1 + e^{-theta})
    if p <= 0.0:
        return math.inf
    if p >= 1.0:
        return -math.inf
    return math.log((1.0 - p) / p)


def _pair_logs(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # p = 1 / (1 + e^{-s}):  log p = -log(1 + e^{-s}),  log(1-p) = -log(1 + e^{s})
    return -np.logaddexp(0.0, -s), -np.logaddexp(0.0, s)


def _reduce_boundary(target: list[int]):
    """Fix all pairs at vertices whose (residual) degree is 0 or maximal.

    Returns the free vertex list, their residual targets and a dict of fixed
    pair values keyed by ``(i, j)`` with ``i < j``.
    """
    free = list(range(len(target)))
    residual = list(target)
    fixed = {}
    changed = True
    while changed and free:
        changed = False
        m = len(free)
        for v in free:
            if residual[v] == 0 or residual[v] == m - 1:
                value = 1 if residual[v] == m - 1 and m > 1 else 0
                for u in free:
                    if u != v:
                        fixed[(min(u, v), max(u, v))] = value
                        residual[u] -= value
                residual[v] = 0
                free.remove(v)
                changed = True
                break
    return free, [residual[v] for v in free], fixed


def _expected_degrees(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = u[:, None] + u[None, :]
    p = expit(s)
    np.fill_diagonal(p, 0.0)
    return p, p.sum(axis=1)


def _fixed_point(k: np.ndarray, tol: float, max_iter: int):
    """x_i <- k_i / sum_j x_j / (1 + x_i x_j); damped once it oscillates.

    Gives up early (returning the current iterate) when progress stalls,
    which happens on faces of the degree polytope where x diverges.
    """
    x = k / math.sqrt(k.sum())
    damped = False
    prev_res = math.inf
    checkpoint = math.inf
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        xx = np.outer(x, x)
        denom = x[None, :] / (1.0 + xx)
        np.fill_diagonal(denom, 0.0)
        x_new = k / denom.sum(axis=1)
        x = 0.5 * (x + x_new) if damped else x_new
        p = np.outer(x, x)
        p = p / (1.0 + p)
        np.fill_diagonal(p, 0.0)
        res = float(np.abs(p.sum(axis=1) - k).max())
        if res <= tol:
            break
        if res > prev_res and not damped:
            damped = True
        prev_res = res
        if it % 500 == 0:
            if res > 0.5 * checkpoint:
                break
            checkpoint = res
    return np.log(x), res, it


def _newton(k: np.ndarray, u: np.ndarray, tol: float, max_iter: int = 500):
    """Newton's method with backtracking on the convex dual in u = log x."""

    def objective(v):
        s = v[:, None] + v[None, :]
        iu = np.triu_indices(len(v), 1)
        return float(np.logaddexp(0.0, s[iu]).sum() - k @ v)

    f = objective(u)
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        p, ed = _expected_degrees(u)
        grad = ed - k
        res = float(np.abs(grad).max())
        if res <= tol:
            break
        w = p * (1.0 - p)
        hess = w + np.diag(w.sum(axis=1))
        step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        t = 1.0
        while t > 1e-12:
            cand = u + t * step
            f_cand = objective(cand)
            if f_cand <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        u, f = cand, f_cand
    return u, res, it


def _calibrate_degrees(spec: ConstraintSpec, tol: float, max_iter: int) -> CanonicalModel:
    n = spec.n
    k_full = np.asarray(spec.target, dtype=float)
    free, k_free, fixed = _reduce_boundary(list(spec.target))
    rows, cols = triu_pairs(n)
    s_pairs = np.zeros(num_pairs(n))
    theta = np.zeros(n)
    iterations = 0
    if free:
        k = np.asarray(k_free, dtype=float)
        u, res, iterations = _fixed_point(k, tol, max_iter)
        if res > tol:
            u, res, extra = _newton(k, u, tol)
            iterations += extra
        theta[free] = -u
        u_full = np.zeros(n)
        u_full[free] = u
        # pairs touching a fixed vertex are overwritten below
        s_pairs = u_full[rows] + u_full[cols]
    for v in range(n):
        if v not in free:
            # fixed vertices: their pairs are deterministic, theta diverges
            theta[v] = math.inf if spec.target[v] == 0 else -math.inf
    log_p, log_q = _pair_logs(s_pairs)
    for (i, j), value in fixed.items():
        idx = pair_index(n, i, j)
        log_p[idx] = 0.0 if value else -math.inf
        log_q[idx] = -math.inf if value else 0.0
    probs = np.exp(log_p)
    pair_mat = np.zeros((n, n))
    pair_mat[rows, cols] = probs
    pair_mat[cols, rows] = probs
    residual = float(np.abs(pair_mat.sum(axis=1) - k_full).max())
    if residual > max(tol, 1e-8):
        raise CalibrationError(
            f"degree calibration did not converge: residual {residual:.3e}", residual
        )
    mu = float(probs.mean()) if len(probs) else 0.0
    sigma2 = float((probs * (1.0 - probs)).mean()) if len(probs) else 0.0
    return CanonicalModel(
        n=n,
        spec=spec,
        theta_star=theta,
        p=None,
        mu=mu,
        sigma2=sigma2,
        residual=residual,
        iterations=iterations,
        _log_p=log_p,
        _log_q=log_q,
    )


def calibrate(spec: ConstraintSpec, tol: float = 1e-10, max_iter: int = 100_000) -> CanonicalModel:
    """Solve E_can[C] = C* for the Lagrange multipliers of the constraint."""
    if not is_graphical(spec):
        raise CalibrationError(f"constraint is not graphical: {spec.to_dict()}")
    n = spec.n
    m = num_pairs(n)
    if not spec.is_degree:
        p_exact = Fraction(spec.target, m) if m else Fraction(0)
        return _homogeneous_model(spec, p_exact, np.array([_logit_theta(float(p_exact))]))
    d = spec.constant_target
    if d is not None:
        p_exact = Fraction(d, n - 1) if n > 1 else Fraction(0)
        theta = np.full(n, 0.5 * _logit_theta(float(p_exact)))
        return _homogeneous_model(spec, p_exact, theta)
    return _calibrate_degrees(spec, tol, max_iter)


def canonical_logprob(model: CanonicalModel, g: Graph) -> float:
    """log P_can(g); ``-inf`` when g uses a pair the model forbids (or vice versa)."""
    if g.n != model.n:
        raise ValueError(f"graph has n={g.n}, model has n={model.n}")
    bits = g.pair_bits()
    if model.homogeneous:
        p = model.p
        m, e = num_pairs(model.n), g.edge_count
        if (p == 0.0 and e) or (p == 1.0 and e < m):
            return -math.inf
        out = 0.0
        if e:
            out += e * math.log(p)
        if m - e:
            out += (m - e) * math.log1p(-p)
        return out
    log_p, log_q = model.pair_log_probabilities()
    return float(np.where(bits, log_p, log_q).sum())


def hamiltonian(model: CanonicalModel, g: Graph) -> float:
    """H(g, theta*) = <theta*, C(g)>; requires finite multipliers."""
    if not np.all(np.isfinite(model.theta_star)):
        raise ValueError("Hamiltonian undefined: multipliers diverge at boundary degrees")
    if model.spec.is_degree:
        return float(model.theta_star @ degrees(g))
    return float(model.theta_star[0] * g.edge_count)


def log_partition(model: CanonicalModel) -> float:
    if not np.all(np.isfinite(model.theta_star)):
        raise ValueError("partition function undefined: multipliers diverge")
    th = model.theta_star
    if model.spec.is_degree:
        rows, cols = triu_pairs(model.n)
        return float(np.logaddexp(0.0, -(th[rows] + th[cols])).sum())
    return num_pairs(model.n) * float(np.logaddexp(0.0, -th[0]))


# sampling ------------------------------------------------------------------

def canonical_pair_bits(model: CanonicalModel, rng, size: int = 1) -> np.ndarray:
    """``(size, M)`` boolean draws of the independent-edge law."""
    rng = make_rng(rng)
    m = num_pairs(model.n)
    u = rng.random((size, m))
    if model.homogeneous:
        return u < model.p
    return u < model.pair_probabilities()


def sample_canonical(model: CanonicalModel, rng_seed) -> Graph:
    return Graph.from_pair_bits(model.n, canonical_pair_bits(model, rng_seed, 1)[0])


def mic_edge_count_pair_bits(n: int, L: int, rng, size: int = 1) -> np.ndarray:
    m = num_pairs(n)
    if not 0 <= L <= m:
        raise ValueError(f"edge count {L} outside [0, {m}]")
    rng = make_rng(rng)
    out = np.zeros((size, m), dtype=bool)
    if size == 1:
        # numpy's tail-shuffle path: a partial Fisher-Yates over pair indices
        out[0, rng.choice(m, size=L, replace=False, shuffle=False)] = True
        return out
    # batched partial Fisher-Yates, one row per draw, L swap steps
    perm = np.tile(np.arange(m), (size, 1))
    idx = np.arange(size)
    for t in range(L):
        j = t + rng.integers(0, m - t, size)
        perm[idx, t], perm[idx, j] = perm[idx, j], perm[idx, t].copy()
    np.put_along_axis(out, perm[:, :L], True, axis=1)
    return out


def sample_mic_edge_count(n: int, L: int, rng_seed) -> Graph:
    return Graph.from_pair_bits(n, mic_edge_count_pair_bits(n, L, rng_seed, 1)[0])


@dataclass(frozen=True)
class MicSamplerConfig:
    """Microcanonical sampler settings.

    ``method=None`` picks pairing with rejection for max degree <= 3 and
    n <= 10^4, else the edge-swap chain.  ``None`` swap counts default to
    20 |E| (burn-in) and 5 |E| (thinning).
    """

    method: str | None = None
    burn_in_swaps: int | None = None
    thinning_swaps: int | None = None
    max_rejections: int = 100_000

    def __post_init__(self):
        if self.method is not None and self.method not in METHODS:
            raise ValueError(f"unknown sampler method {self.method!r}")
        if self.burn_in_swaps is not None and self.burn_in_swaps < 0:
            raise ValueError("burn_in_swaps must be >= 0")
        if self.thinning_swaps is not None and self.thinning_swaps < 1:
            raise ValueError("thinning_swaps must be >= 1")
        if self.max_rejections < 0:
            raise ValueError("max_rejections must be >= 0")

    def swaps(self, n_edges: int) -> tuple[int, int]:
        burn = 20 * n_edges if self.burn_in_swaps is None else self.burn_in_swaps
        thin = max(1, 5 * n_edges) if self.thinning_swaps is None else self.thinning_swaps
        return burn, thin

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "burn_in_swaps": self.burn_in_swaps,
            "thinning_swaps": self.thinning_swaps,
            "max_rejections": self.max_rejections,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> "MicSamplerConfig":
        return cls(**(data or {}))


def resolve_method(spec: ConstraintSpec, config: MicSamplerConfig | None = None) -> str:
    config = config or MicSamplerConfig()
    if not spec.is_degree:
        return EDGE_SUBSET
    if config.method is not None:
        if config.method == EDGE_SUBSET:
            raise ValueError("uniform_edge_subset only samples edge-count constraints")
        return config.method
    if max(spec.target) <= 3 and spec.n <= 10_000:
        return PAIRING
    return EDGE_SWAP


def _pairing_rejection(target, rng, max_rejections: int) -> Graph:
    n = len(target)
    stubs = np.repeat(np.arange(n), target)
    for _ in range(max_rejections + 1):
        perm = rng.permutation(stubs)
        a, b = perm[0::2], perm[1::2]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        if len(np.unique(keys)) < len(keys):
            continue
        return Graph.from_edges(n, zip(lo.tolist(), hi.tolist()))
    raise SamplerError(f"pairing rejected more than {max_rejections} times")


class EdgeSwapChain:
    """Double-edge-swap Markov chain on graphs with a fixed degree sequence.

    A move picks an ordered pair of distinct edges (a, b), (c, d) and a coin
    that may flip the second one, then proposes (a, d), (c, b).  Proposals that
    would create a loop or a multi-edge leave the state unchanged.  The
    proposal is symmetric, so the stationary law is uniform.
    """

    _BLOCK = 4096

    def __init__(self, start: Graph, rng):
        self.n = start.n
        self._rng = make_rng(rng)
        self._edges = start.edges()
        self._present = {pair_index(self.n, a, b) for a, b in self._edges}
        self.attempts = 0
        self.accepted = 0
        self._stream = None

    def _randoms(self):
        m = len(self._edges)
        while True:
            e1 = self._rng.integers(0, m, self._BLOCK)
            e2 = self._rng.integers(0, m - 1, self._BLOCK)
            coin = self._rng.integers(0, 2, self._BLOCK)
            yield from zip(e1.tolist(), e2.tolist(), coin.tolist())

    def step(self, swaps: int = 1) -> None:
        m = len(self._edges)
        if m < 2:
            self.attempts += swaps
            return
        if self._stream is None:
            self._stream = self._randoms()
        edges, present, n, stream = self._edges, self._present, self.n, self._stream
        accepted = 0
        for _ in range(swaps):
            e1, e2, coin = next(stream)
            if e2 >= e1:
                e2 += 1
            a, b = edges[e1]
            c, d = edges[e2]
            if coin:
                c, d = d, c
            if a == d or c == b:
                continue
            k_ad = pair_index(n, a, d)
            k_cb = pair_index(n, c, b)
            if k_ad in present or k_cb in present:
                continue
            present.discard(pair_index(n, a, b))
            present.discard(pair_index(n, c, d))
            present.add(k_ad)
            present.add(k_cb)
            edges[e1] = (a, d)
            edges[e2] = (c, b)
            accepted += 1
        self.attempts += swaps
        self.accepted += accepted

    def graph(self) -> Graph:
        bits = np.zeros(num_pairs(self.n), dtype=bool)
        bits[list(self._present)] = True
        return Graph.from_pair_bits(self.n, bits)


def _check_degree_spec(spec: ConstraintSpec) -> None:
    if not spec.is_degree:
        raise ValueError("expected a degree-sequence constraint")
    if not is_graphical(spec):
        raise CalibrationError(f"degree sequence is not graphical: {spec.target}")


def mic_degree_chain(spec: ConstraintSpec, config: MicSamplerConfig | None, rng_seed, n_samples: int):
    """Yield ``n_samples`` thinned edge-swap states: the first after burn-in,
    then one every ``thinning_swaps`` swaps."""
    _check_degree_spec(spec)
    config = config or MicSamplerConfig(method=EDGE_SWAP)
    start = havel_hakimi(spec.target)
    burn, thin = config.swaps(start.edge_count)
    chain = EdgeSwapChain(start, rng_seed)
    chain.step(burn)
    for i in range(n_samples):
        if i:
            chain.step(thin)
        yield chain.graph()


def sample_mic_degrees(spec: ConstraintSpec, config: MicSamplerConfig | None, rng_seed) -> Graph:
    _check_degree_spec(spec)
    config = config or MicSamplerConfig()
    method = resolve_method(spec, config)
    rng = make_rng(rng_seed)
    if method == PAIRING:
        return _pairing_rejection(spec.target, rng, config.max_rejections)
    return next(mic_degree_chain(spec, config, rng, 1))


def sample_mic(spec: ConstraintSpec, rng_seed, config: MicSamplerConfig | None = None) -> Graph:
    if spec.is_degree:
        return sample_mic_degrees(spec, config, rng_seed)
    return sample_mic_edge_count(spec.n, spec.target, rng_seed)
