import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_spectra.ensembles import (
    CalibrationError,
    MicSamplerConfig,
    SamplerError,
    calibrate,
    canonical_logprob,
    canonical_pair_bits,
    hamiltonian,
    log_partition,
    mic_degree_chain,
    mic_edge_count_pair_bits,
    resolve_method,
    sample_canonical,
    sample_mic,
    sample_mic_degrees,
)
from ensemble_spectra.seeding import make_rng
from ensemble_spectra.graph import ConstraintSpec, Graph, degrees, in_gamma, num_pairs

from oracles import all_graphs, realized_degree_sequences

C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def bits_to_codes(bits):
    return bits.astype(np.int64) @ (1 << np.arange(bits.shape[1], dtype=np.int64))


def assert_uniform_counts(counts, support, draws, sigmas=5.0):
    """Every state in ``support`` hit about draws/len(support) times, nothing else."""
    assert set(counts) <= set(support)
    q = 1.0 / len(support)
    sd = math.sqrt(draws * q * (1 - q))
    for state in support:
        assert abs(counts.get(state, 0) - draws * q) <= sigmas * sd, (state, counts.get(state, 0))


# calibration ---------------------------------------------------------------

def test_calibrate_edge_count():
    model = calibrate(ConstraintSpec.edge_count(4, 3))
    assert model.p_exact == Fraction(1, 2)
    assert model.p == 0.5 and model.sigma2 == 0.25
    assert model.theta_star[0] == 0.0


def test_calibrate_constant_degree():
    model = calibrate(ConstraintSpec.constant_degree(4, 2))
    assert model.p_exact == Fraction(2, 3)
    np.testing.assert_allclose(model.pair_prob.sum(axis=1), 2.0)


def test_calibrate_boundary_is_deterministic():
    model = calibrate(ConstraintSpec.edge_count(4, 0))
    assert model.p == 0.0
    full = calibrate(ConstraintSpec.constant_degree(5, 4))
    assert full.p == 1.0


def test_calibrate_heterogeneous_face():
    model = calibrate(ConstraintSpec.degree_sequence((2, 2, 1, 1)))
    assert model.residual <= 1e-8
    np.testing.assert_allclose(model.expected_constraint(), [2, 2, 1, 1], atol=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_calibrate_all_graphical_sequences(n):
    for seq in sorted(realized_degree_sequences(n)):
        model = calibrate(ConstraintSpec.degree_sequence(seq))
        assert model.residual <= 1e-8, seq
        np.testing.assert_allclose(model.expected_constraint(), seq, atol=1e-8)


def test_calibrate_rejects_non_graphical():
    with pytest.raises(CalibrationError):
        calibrate(ConstraintSpec.constant_degree(3, 1))
    with pytest.raises(CalibrationError):
        calibrate(ConstraintSpec.edge_count(4, 7))


# log-probabilities -----------------------------------------------------------

def test_logprob_examples():
    model = calibrate(ConstraintSpec.constant_degree(4, 2))
    # p = 2/3 on C4: (2/3)^4 (1/3)^2 = 16/729
    assert canonical_logprob(model, C4) == pytest.approx(math.log(16 / 729), abs=1e-12)
    empty_model = calibrate(ConstraintSpec.edge_count(4, 0))
    assert canonical_logprob(empty_model, C4) == -math.inf
    assert canonical_logprob(empty_model, Graph.empty(4)) == 0.0


def test_logprob_dimension_mismatch():
    with pytest.raises(ValueError):
        canonical_logprob(calibrate(ConstraintSpec.edge_count(5, 3)), C4)


@pytest.mark.parametrize(
    "spec",
    [
        ConstraintSpec.edge_count(4, 2),
        ConstraintSpec.constant_degree(5, 2),
        ConstraintSpec.degree_sequence((3, 2, 2, 2, 1)),
        ConstraintSpec.degree_sequence((2, 2, 1, 1)),
        ConstraintSpec.edge_count(6, 7),
    ],
)
def test_logprob_constant_on_gamma(spec):
    # canonical weight depends on g only through the constraint value
    model = calibrate(spec)
    values = []
    for edges, _ in all_graphs(spec.n):
        g = Graph.from_edges(spec.n, edges)
        if in_gamma(g, spec):
            values.append(canonical_logprob(model, g))
    assert values
    assert max(values) - min(values) <= 1e-10


@pytest.mark.parametrize(
    "spec",
    [
        ConstraintSpec.edge_count(5, 4),
        ConstraintSpec.constant_degree(6, 3),
        ConstraintSpec.degree_sequence((3, 2, 2, 2, 1)),
    ],
)
def test_logprob_is_gibbs_form(spec):
    model = calibrate(spec)
    rng = np.random.default_rng(3)
    for _ in range(20):
        bits = rng.random(num_pairs(spec.n)) < 0.5
        g = Graph.from_pair_bits(spec.n, bits)
        expected = -hamiltonian(model, g) - log_partition(model)
        assert canonical_logprob(model, g) == pytest.approx(expected, abs=1e-10)


def test_hamiltonian_undefined_at_boundary():
    model = calibrate(ConstraintSpec.degree_sequence((3, 1, 1, 1)))
    with pytest.raises(ValueError):
        hamiltonian(model, Graph.empty(4))


def test_logprob_sums_to_one_small():
    model = calibrate(ConstraintSpec.degree_sequence((2, 2, 1, 1)))
    total = math.fsum(
        math.exp(canonical_logprob(model, Graph.from_edges(4, edges))) for edges, _ in all_graphs(4)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


# samplers ------------------------------------------------------------------

def test_canonical_degenerate_p():
    g0 = sample_canonical(calibrate(ConstraintSpec.edge_count(6, 0)), 1)
    assert g0 == Graph.empty(6)
    g1 = sample_canonical(calibrate(ConstraintSpec.edge_count(6, 15)), 1)
    assert g1 == Graph.complete(6)


def test_canonical_frequencies_n4_half():
    draws = 1_000_000
    model = calibrate(ConstraintSpec.edge_count(4, 3))
    counts = Counter(bits_to_codes(canonical_pair_bits(model, 11, draws)).tolist())
    assert_uniform_counts(counts, range(64), draws)


def test_mic_edge_count_frequencies_batched():
    draws = 1_000_000
    bits = mic_edge_count_pair_bits(4, 3, 12, draws)
    assert np.all(bits.sum(axis=1) == 3)
    support = [sum(1 << k for k in c) for c in itertools.combinations(range(6), 3)]
    counts = Counter(bits_to_codes(bits).tolist())
    assert_uniform_counts(counts, support, draws)


def test_mic_edge_count_frequencies_single():
    draws = 20_000
    counts = Counter(sample_mic(ConstraintSpec.edge_count(4, 2), make_rng(13, i)).mask for i in range(draws))
    support = [sum(1 << k for k in c) for c in itertools.combinations(range(6), 2)]
    assert_uniform_counts(counts, support, draws)


def test_mic_edge_count_rejects_out_of_range():
    with pytest.raises(ValueError):
        mic_edge_count_pair_bits(4, 7, 0)


def _cycles_n4():
    spec = ConstraintSpec.constant_degree(4, 2)
    return [Graph.from_edges(4, e).mask for e, _ in all_graphs(4) if in_gamma(Graph.from_edges(4, e), spec)]


def test_mic_pairing_frequencies_d2():
    draws = 20_000
    spec = ConstraintSpec.constant_degree(4, 2)
    assert resolve_method(spec) == "pairing_rejection"
    counts = Counter(sample_mic_degrees(spec, None, make_rng(14, i)).mask for i in range(draws))
    assert_uniform_counts(counts, _cycles_n4(), draws)


def test_mic_edge_swap_frequencies_d2():
    draws = 100_000
    spec = ConstraintSpec.constant_degree(4, 2)
    config = MicSamplerConfig(method="edge_swap_mcmc", burn_in_swaps=50, thinning_swaps=10)
    counts = Counter(g.mask for g in mic_degree_chain(spec, config, 15, draws))
    # thinned chain draws are nearly independent at this thinning
    assert_uniform_counts(counts, _cycles_n4(), draws, sigmas=6.0)


def test_edge_swap_heterogeneous_uniform():
    spec = ConstraintSpec.degree_sequence((3, 2, 2, 2, 1))
    support = [
        Graph.from_edges(5, e).mask for e, _ in all_graphs(5) if in_gamma(Graph.from_edges(5, e), spec)
    ]
    draws = 40_000
    config = MicSamplerConfig(method="edge_swap_mcmc", burn_in_swaps=100, thinning_swaps=20)
    counts = Counter(g.mask for g in mic_degree_chain(spec, config, 16, draws))
    assert_uniform_counts(counts, support, draws, sigmas=6.0)


@given(st.integers(0, 2**32), st.sampled_from([(3, 3, 2, 2, 2, 2), (4, 4, 3, 3, 2, 2), (2, 2, 2, 2, 2, 2, 2, 2)]))
@settings(max_examples=30, deadline=None)
def test_mic_degree_samples_are_in_gamma(seed, seq):
    spec = ConstraintSpec.degree_sequence(seq)
    for method in ("edge_swap_mcmc", "pairing_rejection"):
        g = sample_mic(spec, seed, MicSamplerConfig(method=method))
        assert tuple(degrees(g).tolist()) == seq


def test_pairing_rejection_gives_up():
    # K4 from 12 random stubs is rarely simple, so one attempt usually fails
    spec = ConstraintSpec.constant_degree(4, 3)
    config = MicSamplerConfig(method="pairing_rejection", max_rejections=0)
    failures = 0
    for seed in range(20):
        try:
            assert sample_mic(spec, seed, config) == Graph.complete(4)
        except SamplerError:
            failures += 1
    assert failures > 0


def test_sampler_is_deterministic_in_seed():
    spec = ConstraintSpec.constant_degree(30, 4)
    assert sample_mic(spec, 7) == sample_mic(spec, 7)
    assert sample_mic(spec, 7) != sample_mic(spec, 8)
    model = calibrate(spec)
    assert sample_canonical(model, make_rng(5, 1)) == sample_canonical(model, make_rng(5, 1))


def test_canonical_mean_constraint():
    spec = ConstraintSpec.degree_sequence((5, 4, 4, 3, 3, 2, 2, 1))
    model = calibrate(spec)
    draws = 20_000
    bits = canonical_pair_bits(model, 17, draws)
    mean_edges = bits.sum(axis=1).mean()
    sd = math.sqrt((model.pair_probabilities() * (1 - model.pair_probabilities())).sum())
    assert abs(mean_edges - sum(spec.target) / 2) <= 4 * sd / math.sqrt(draws)


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        MicSamplerConfig(method="bogus")
    with pytest.raises(ValueError):
        MicSamplerConfig(thinning_swaps=0)
    with pytest.raises(ValueError):
        resolve_method(ConstraintSpec.constant_degree(4, 2), MicSamplerConfig(method="uniform_edge_subset"))
    assert resolve_method(ConstraintSpec.constant_degree(10, 4)) == "edge_swap_mcmc"
    assert MicSamplerConfig.from_dict(MicSamplerConfig(burn_in_swaps=3).to_dict()).burn_in_swaps == 3


def test_mic_rejects_non_graphical():
    with pytest.raises(CalibrationError):
        sample_mic(ConstraintSpec.constant_degree(3, 1), 0)
