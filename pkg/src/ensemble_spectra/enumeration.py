"""Exhaustive ground truth over all labeled graphs on n <= 8 vertices.

Graph t is the integer bitmask whose bit k marks pair k in ``triu_pairs``
order.  Masks are processed in fixed-size chunks; per-chunk partial sums are
merged in chunk order with ``math.fsum``, so results do not depend on how
chunks are spread over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .ensembles import CanonicalModel, calibrate
from .graph import ConstraintSpec, Graph, is_graphical, num_pairs, triu_pairs

__all__ = [
    "CAP_N",
    "CHUNK",
    "EnsembleTable",
    "FUNCTIONALS",
    "register_functional",
    "masks_to_bits",
    "masks_to_adjacency",
    "gamma_masks",
    "exact_gamma_size",
    "enumerate_gamma_logprob",
    "exact_expectation",
    "exact_canonical_probability",
    "transfer_identity_check",
    "transfer_identity_errors",
    "event_family",
    "ensemble_table",
    "golden_rows",
    "write_golden",
    "read_golden",
    "GOLDEN_PATH",
    "GOLDEN_SPECS",
    "GOLDEN_FUNCTIONALS",
]

CAP_N = 8
CHUNK = 1 << 16
GOLDEN_PATH = Path(__file__).parent / "data" / "golden_enumeration.csv"
GOLDEN_HEADER = ("spec_hash", "functional", "mic_value", "can_value", "gamma_size")


class CapExceededError(ValueError):
    pass


def _check_cap(spec: ConstraintSpec, cap_n: int) -> None:
    if cap_n > CAP_N:
        raise CapExceededError(f"enumeration cap cannot exceed {CAP_N}")
    if spec.n > cap_n:
        raise CapExceededError(f"n={spec.n} exceeds the enumeration cap {cap_n}")


# batch kernels ---------------------------------------------------------------

def masks_to_bits(n: int, masks: np.ndarray) -> np.ndarray:
    """``(k, M)`` uint8 pair indicators for an array of bitmasks."""
    m = num_pairs(n)
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(np.uint8)


def _incidence(n: int) -> np.ndarray:
    rows, cols = triu_pairs(n)
    inc = np.zeros((num_pairs(n), n), dtype=np.int16)
    inc[np.arange(len(rows)), rows] = 1
    inc[np.arange(len(cols)), cols] = 1
    return inc


def _bits_to_degrees(n: int, bits: np.ndarray) -> np.ndarray:
    return bits.astype(np.int16) @ _incidence(n)


def masks_to_adjacency(n: int, masks: np.ndarray) -> np.ndarray:
    """``(k, n, n)`` float adjacency matrices for an array of bitmasks."""
    bits = masks_to_bits(n, masks)
    rows, cols = triu_pairs(n)
    adj = np.zeros((len(bits), n, n))
    adj[:, rows, cols] = bits
    adj[:, cols, rows] = bits
    return adj


def _f_lambda1(adj):
    return np.linalg.eigvalsh(adj)[:, -1]


def _f_lambda2(adj):
    return np.linalg.eigvalsh(adj)[:, -2]


def _f_degree_ratio(adj):
    k = adj.sum(axis=2)
    total = k.sum(axis=1)
    sq = (k * k).sum(axis=1)
    # the empty graph contributes 0 so expectations stay defined
    return np.divide(sq, total, out=np.zeros_like(sq), where=total > 0)


def _f_edge_count(adj):
    return adj.sum(axis=(1, 2)) / 2.0


FUNCTIONALS = {
    "lambda1": _f_lambda1,
    "lambda2": _f_lambda2,
    "degree_ratio": _f_degree_ratio,
    "edge_count": _f_edge_count,
}


def register_functional(name: str, fn) -> None:
    """Register ``fn(adj) -> values`` taking a ``(k, n, n)`` adjacency batch.

    Functions must be importable module-level callables to run with workers.
    """
    FUNCTIONALS[name] = fn


def _resolve(functional):
    if callable(functional):
        return functional
    try:
        return FUNCTIONALS[functional]
    except KeyError:
        raise ValueError(f"unknown functional {functional!r}") from None


# chunked sweep ----------------------------------------------------------------

def _ranges(n: int):
    total = 1 << num_pairs(n)
    return [(start, min(start + CHUNK, total)) for start in range(0, total, CHUNK)]


def _map_chunks(fn, args_list, workers):
    if workers is None or workers <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def _gamma_chunk(spec: ConstraintSpec, start: int, stop: int) -> np.ndarray:
    masks = np.arange(start, stop, dtype=np.int64)
    bits = masks_to_bits(spec.n, masks)
    if spec.is_degree:
        keep = np.all(_bits_to_degrees(spec.n, bits) == np.asarray(spec.target), axis=1)
    else:
        keep = bits.sum(axis=1) == spec.target
    return masks[keep]


def gamma_masks(spec: ConstraintSpec, cap_n: int = CAP_N, workers: int | None = 1) -> np.ndarray:
    """Sorted bitmasks of every graph meeting the constraint exactly."""
    _check_cap(spec, cap_n)
    if not spec.in_range():
        return np.zeros(0, dtype=np.int64)
    parts = _map_chunks(_gamma_chunk, [(spec, a, b) for a, b in _ranges(spec.n)], workers)
    return np.concatenate(parts)


def exact_gamma_size(spec: ConstraintSpec, cap_n: int = CAP_N, workers: int | None = 1) -> int:
    return int(len(gamma_masks(spec, cap_n, workers)))


def _log_probs(model: CanonicalModel, bits: np.ndarray) -> np.ndarray:
    log_p, log_q = model.pair_log_probabilities()
    return np.where(bits.astype(bool), log_p, log_q).sum(axis=1)


def enumerate_gamma_logprob(spec: ConstraintSpec, cap_n: int = CAP_N, workers: int | None = 1,
                            model: CanonicalModel | None = None) -> tuple[int, float]:
    """``(|Γ|, log P_can(Γ))`` by summing member probabilities."""
    masks = gamma_masks(spec, cap_n, workers)
    if len(masks) == 0:
        raise ValueError(f"constraint has no realization: {spec.to_dict()}")
    model = model or calibrate(spec)
    logs = _log_probs(model, masks_to_bits(spec.n, masks))
    return len(masks), float(logsumexp(logs))


def _p_can_exact(model: CanonicalModel, edge_counts) -> Fraction | None:
    if model.p_exact is None:
        return None
    p, m = model.p_exact, num_pairs(model.n)
    return sum((p**e * (1 - p) ** (m - e) for e in edge_counts), Fraction(0))


def _expectation_chunk(model: CanonicalModel, names, start: int, stop: int):
    n = model.n
    masks = np.arange(start, stop, dtype=np.int64)
    bits = masks_to_bits(n, masks)
    weights = np.exp(_log_probs(model, bits))
    adj = masks_to_adjacency(n, masks)
    sums = [math.fsum(weights * _resolve(name)(adj)) for name in names]
    return math.fsum(weights), sums


def _can_expectations(model: CanonicalModel, names, workers):
    parts = _map_chunks(
        _expectation_chunk, [(model, names, a, b) for a, b in _ranges(model.n)], workers
    )
    total = math.fsum(t for t, _ in parts)
    values = [math.fsum(s[i] for _, s in parts) for i in range(len(names))]
    return total, values


def _mic_expectations(spec: ConstraintSpec, masks, names):
    adj = masks_to_adjacency(spec.n, masks)
    return [math.fsum(_resolve(name)(adj)) / len(masks) for name in names]


def exact_expectation(spec: ConstraintSpec, functional, cap_n: int = CAP_N,
                      workers: int | None = 1) -> tuple[float, float]:
    """``(E_mic[f], E_can[f])``: average over Γ and P_can-weighted sum over all graphs."""
    _check_cap(spec, cap_n)
    masks = gamma_masks(spec, cap_n, workers)
    if len(masks) == 0:
        raise ValueError(f"constraint has no realization: {spec.to_dict()}")
    model = calibrate(spec)
    (mic,) = _mic_expectations(spec, masks, [functional])
    _, (can,) = _can_expectations(model, [functional], workers)
    return mic, can


def _event_chunk(model: CanonicalModel, predicate, start: int, stop: int) -> float:
    masks = np.arange(start, stop, dtype=np.int64)
    weights = np.exp(_log_probs(model, masks_to_bits(model.n, masks)))
    hit = np.asarray(predicate(masks_to_adjacency(model.n, masks)), dtype=bool)
    return math.fsum(weights[hit])


def exact_canonical_probability(spec: ConstraintSpec, predicate, cap_n: int = CAP_N,
                                model: CanonicalModel | None = None) -> float:
    """P_can of the event ``predicate(adj)`` summed over every graph on n vertices."""
    _check_cap(spec, cap_n)
    model = model or calibrate(spec)
    return math.fsum(_event_chunk(model, predicate, a, b) for a, b in _ranges(spec.n))


# transfer identity ---------------------------------------------------------------

def event_family(spec: ConstraintSpec):
    """Named batch predicates: single-edge presence, degree and λ1 thresholds."""
    n = spec.n
    rows, cols = triu_pairs(n)
    events = [("all", lambda adj: np.ones(len(adj), dtype=bool)),
              ("none", lambda adj: np.zeros(len(adj), dtype=bool))]
    for i, j in zip(rows.tolist(), cols.tolist()):
        events.append((f"edge_{i}_{j}", lambda adj, i=i, j=j: adj[:, i, j] > 0))
    for v in range(n):
        for t in range(1, n):
            events.append((f"deg_{v}_ge_{t}", lambda adj, v=v, t=t: adj[:, v].sum(axis=1) >= t))
    for t in np.linspace(0.5, n - 1, 2 * n):
        events.append((f"lambda1_ge_{t:.3f}", lambda adj, t=t: _f_lambda1(adj) >= t - 1e-9))
    return events


def transfer_identity_errors(spec: ConstraintSpec, events, cap_n: int = CAP_N) -> dict:
    """``|P_mic(B) - P_can(B ∩ Γ) / P_can(Γ)|`` for each named event B."""
    _check_cap(spec, cap_n)
    masks = gamma_masks(spec, cap_n)
    if len(masks) == 0:
        raise ValueError(f"constraint has no realization: {spec.to_dict()}")
    model = calibrate(spec)
    weights = np.exp(_log_probs(model, masks_to_bits(spec.n, masks)))
    p_gamma = math.fsum(weights)
    adj = masks_to_adjacency(spec.n, masks)
    out = {}
    for name, predicate in events:
        hit = np.asarray(predicate(adj), dtype=bool)
        p_mic = hit.sum() / len(masks)
        p_can = math.fsum(weights[hit]) / p_gamma
        out[name] = abs(p_mic - p_can)
    return out


def transfer_identity_check(spec: ConstraintSpec, event, cap_n: int = CAP_N) -> float:
    return transfer_identity_errors(spec, [("event", event)], cap_n)["event"]


# tables and golden values -----------------------------------------------------------

@dataclass(frozen=True)
class EnsembleTable:
    n: int
    spec: ConstraintSpec
    gamma_size: int
    mic: dict = field(default_factory=dict)
    can: dict = field(default_factory=dict)
    p_can_gamma: float = 0.0
    p_can_gamma_exact: Fraction | None = None
    total_probability: float = 1.0


def ensemble_table(spec: ConstraintSpec, functionals=("lambda1", "lambda2", "degree_ratio", "edge_count"),
                   cap_n: int = CAP_N, workers: int | None = 1) -> EnsembleTable:
    _check_cap(spec, cap_n)
    if not is_graphical(spec):
        raise ValueError(f"constraint is not graphical: {spec.to_dict()}")
    masks = gamma_masks(spec, cap_n, workers)
    model = calibrate(spec)
    names = list(functionals)
    mic = _mic_expectations(spec, masks, names)
    total, can = _can_expectations(model, names, workers)
    bits = masks_to_bits(spec.n, masks)
    p_gamma = math.fsum(np.exp(_log_probs(model, bits)))
    return EnsembleTable(
        n=spec.n,
        spec=spec,
        gamma_size=len(masks),
        mic=dict(zip(names, mic)),
        can=dict(zip(names, can)),
        p_can_gamma=p_gamma,
        p_can_gamma_exact=_p_can_exact(model, bits.sum(axis=1).tolist()),
        total_probability=total,
    )


GOLDEN_SPECS = (
    ConstraintSpec.edge_count(4, 3),
    ConstraintSpec.constant_degree(4, 2),
    ConstraintSpec.degree_sequence((2, 2, 1, 1)),
    ConstraintSpec.edge_count(5, 5),
    ConstraintSpec.constant_degree(5, 2),
    ConstraintSpec.degree_sequence((3, 2, 2, 2, 1)),
    ConstraintSpec.edge_count(6, 6),
    ConstraintSpec.constant_degree(6, 2),
)
GOLDEN_FUNCTIONALS = ("lambda1", "lambda2", "degree_ratio", "edge_count")


def golden_rows(specs=GOLDEN_SPECS, functionals=GOLDEN_FUNCTIONALS, workers: int | None = 1):
    rows = []
    for spec in specs:
        table = ensemble_table(spec, functionals, workers=workers)
        for name in functionals:
            rows.append((spec.digest, name, table.mic[name], table.can[name], table.gamma_size))
    return rows


def write_golden(path=GOLDEN_PATH, rows=None) -> Path:
    path = Path(path)
    rows = golden_rows() if rows is None else rows
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GOLDEN_HEADER)
        for digest, name, mic, can, size in rows:
            writer.writerow([digest, name, format(mic, ".17g"), format(can, ".17g"), size])
    return path


def read_golden(path=GOLDEN_PATH) -> list[tuple]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != GOLDEN_HEADER:
            raise ValueError(f"unexpected golden header {header}")
        return [(d, f, float(m), float(c), int(g)) for d, f, m, c, g in reader]


def graph_of(n: int, mask: int) -> Graph:
    return Graph.from_mask(n, int(mask))
