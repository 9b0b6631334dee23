"""Independent brute-force references used by the tests.

Nothing here imports the package's enumeration or entropy code: graphs are
built with itertools, probabilities with exact fractions and eigenvalues with
numpy's dense solver on each graph separately.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def all_pairs(n):
    return list(itertools.combinations(range(n), 2))


def all_graphs(n):
    """Yield (edge_set, adjacency) for every labeled graph on n vertices."""
    pairs = all_pairs(n)
    for choice in itertools.product((0, 1), repeat=len(pairs)):
        adj = np.zeros((n, n))
        edges = []
        for (i, j), on in zip(pairs, choice):
            if on:
                adj[i, j] = adj[j, i] = 1.0
                edges.append((i, j))
        yield edges, adj


def degree_tuple(adj):
    return tuple(int(x) for x in adj.sum(axis=1))


def realized_degree_sequences(n):
    return {degree_tuple(adj) for _, adj in all_graphs(n)}


def homogeneous_stats(n, p: Fraction, member, functional):
    """(|Γ|, E_mic f, E_can f, P_can(Γ)) for a homogeneous model with rational p."""
    m = n * (n - 1) // 2
    size = 0
    mic_sum = 0.0
    can_sum = 0.0
    p_gamma = Fraction(0)
    for edges, adj in all_graphs(n):
        e = len(edges)
        w = p**e * (1 - p) ** (m - e)
        value = functional(adj)
        can_sum += float(w) * value
        if member(adj):
            size += 1
            mic_sum += value
            p_gamma += w
    return size, mic_sum / size, can_sum, p_gamma


def top_eigenvalue(adj):
    return float(np.linalg.eigvalsh(adj)[-1])


def binomial_entropy(n, L):
    """-log P(Bin(M, L/M) = L) with exact integer binomial coefficients."""
    m = n * (n - 1) // 2
    p = Fraction(L, m)
    prob = math.comb(m, L) * p**L * (1 - p) ** (m - L)
    return -math.log(prob)
