"""Model-layer tests: types, validation, sampling distributions."""

import math

import numpy as np
import pytest
from scipy import stats

from rcslab import (
    BitstringHistogram,
    DistributionMatrix,
    ErrorKind,
    ErrorLabel,
    ErrorWeights,
    InfeasibleMixtureError,
    InvalidInputError,
    RowKind,
    SideHistograms,
    UnsupportedRowKindError,
    WeightConstraint,
    mixture_distribution,
    sample_bitstrings_multinomial,
    sample_bitstrings_poissonized,
    sample_dirichlet_matrix,
    sample_side_info,
)


def two_row_matrix():
    rows = np.array([[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]])
    labels = (ErrorLabel(ErrorKind.IDEAL), ErrorLabel(ErrorKind.CUSTOM))
    return DistributionMatrix(rows, labels)


# ---------------------------------------------------------------------------
# Types and validation


def test_error_label_json_round_trip():
    lab = ErrorLabel(ErrorKind.DEPHASE_2Q, (3, 4), layer=5)
    back = ErrorLabel.from_json(lab.to_json())
    assert back == lab
    assert "Dephase2q" in str(lab)


def test_error_label_defaults():
    lab = ErrorLabel(ErrorKind.IDEAL)
    assert lab.qubits == ()
    assert lab.layer is None


def test_distribution_matrix_shape_props():
    pi = two_row_matrix()
    assert pi.k == 2
    assert pi.d == 4
    assert all(rk is RowKind.PROBABILITY for rk in pi.row_kinds)


def test_distribution_matrix_rejects_negative_probability():
    rows = np.array([[0.5, 0.6, -0.1, 0.0]])
    with pytest.raises(InvalidInputError):
        DistributionMatrix(rows, (ErrorLabel(ErrorKind.IDEAL),))


def test_distribution_matrix_rejects_bad_row_sum():
    rows = np.array([[0.5, 0.3, 0.1, 0.0]])
    with pytest.raises(InvalidInputError):
        DistributionMatrix(rows, (ErrorLabel(ErrorKind.IDEAL),))


def test_signed_row_must_sum_to_zero():
    rows = np.array([[0.5, -0.2, -0.2, 0.0]])
    with pytest.raises(InvalidInputError):
        DistributionMatrix(
            rows,
            (ErrorLabel(ErrorKind.READOUT_10, (0,)),),
            row_kinds=(RowKind.SIGNED_PERTURBATION,),
        )


def test_signed_row_accepted_when_zero_sum():
    rows = np.array([[0.5, -0.2, -0.2, -0.1]])
    pi = DistributionMatrix(
        rows,
        (ErrorLabel(ErrorKind.READOUT_10, (0,)),),
        row_kinds=(RowKind.SIGNED_PERTURBATION,),
    )
    assert pi.row_kinds[0] is RowKind.SIGNED_PERTURBATION


def test_distribution_matrix_min_sizes():
    with pytest.raises(InvalidInputError):
        DistributionMatrix(np.ones((1, 1)), (ErrorLabel(ErrorKind.IDEAL),))
    with pytest.raises(InvalidInputError):
        DistributionMatrix(np.empty((0, 4)), ())


def test_error_weights_simplex_validation():
    labels = (ErrorLabel(ErrorKind.IDEAL), ErrorLabel(ErrorKind.CUSTOM))
    ErrorWeights(np.array([0.6, 0.4]), labels, WeightConstraint.SIMPLEX)
    with pytest.raises(InvalidInputError):
        ErrorWeights(np.array([0.6, 0.5]), labels, WeightConstraint.SIMPLEX)
    with pytest.raises(InvalidInputError):
        ErrorWeights(np.array([1.1, -0.1]), labels, WeightConstraint.SIMPLEX)


def test_error_weights_cone_validation():
    labels = (ErrorLabel(ErrorKind.IDEAL),)
    ErrorWeights(np.array([2.5]), labels, WeightConstraint.NONNEGATIVE_CONE)
    with pytest.raises(InvalidInputError):
        ErrorWeights(
            np.array([-1e-6]), labels, WeightConstraint.NONNEGATIVE_CONE
        )


def test_error_weights_unconstrained_allows_anything():
    w = ErrorWeights(np.array([-3.0, 7.0]))
    assert w.constraint is WeightConstraint.UNCONSTRAINED
    assert len(w.labels) == 2


def test_histogram_round_trips():
    h = BitstringHistogram.from_dict(8, {3: 2, 5: 1})
    assert h.total == 3
    assert h.support_size == 2
    assert h.as_dict() == {3: 2, 5: 1}
    dense = h.to_dense()
    assert dense.shape == (8,)
    assert BitstringHistogram.from_dense(dense).as_dict() == h.as_dict()


def test_histogram_sorted_and_validated():
    h = BitstringHistogram.from_dict(4, {2: 1, 0: 3})
    assert list(h.indices) == [0, 2]
    with pytest.raises(InvalidInputError):
        BitstringHistogram.from_dict(4, {4: 1})
    with pytest.raises(InvalidInputError):
        BitstringHistogram.from_dict(4, {1: -2})


def test_side_histograms_consistency():
    h1 = BitstringHistogram.from_dict(4, {0: 2})
    h2 = BitstringHistogram.from_dict(4, {3: 2})
    v = SideHistograms((h1, h2))
    assert (v.k, v.d, v.m) == (2, 4, 2)
    h_bad_d = BitstringHistogram.from_dict(8, {0: 2})
    with pytest.raises(InvalidInputError):
        SideHistograms((h1, h_bad_d))
    h_bad_m = BitstringHistogram.from_dict(4, {0: 3})
    with pytest.raises(InvalidInputError):
        SideHistograms((h1, h_bad_m))


# ---------------------------------------------------------------------------
# Dirichlet matrix sampling


def test_dirichlet_single_row_normalized():
    pi = sample_dirichlet_matrix(1, 4, rng_seed=7)
    row = pi.rows[0]
    assert abs(row.sum() - 1.0) < 1e-12
    assert np.all(row > 0)


def test_dirichlet_row_means_forced_by_normalization():
    pi = sample_dirichlet_matrix(3, 65536, rng_seed=1)
    for row in pi.rows:
        assert abs(row.mean() - 1.0 / 65536) < 1e-17


def test_dirichlet_moments_match_porter_thomas():
    # E[pi^l] ~ l!/d^l; 5% relative at d=4096 over 1000 pooled rows
    d = 4096
    acc2 = acc3 = 0.0
    draws = 1000
    for seed in range(draws):
        row = sample_dirichlet_matrix(1, d, rng_seed=seed).rows[0]
        acc2 += np.mean(row**2)
        acc3 += np.mean(row**3)
    for ell, acc in ((2, acc2 / draws), (3, acc3 / draws)):
        target = math.factorial(ell) / d**ell
        assert abs(acc - target) / target < 0.05


def test_dirichlet_determinism_and_validation():
    a = sample_dirichlet_matrix(2, 64, rng_seed=11)
    b = sample_dirichlet_matrix(2, 64, rng_seed=11)
    assert np.array_equal(a.rows, b.rows)
    with pytest.raises(InvalidInputError):
        sample_dirichlet_matrix(0, 8, rng_seed=0)
    with pytest.raises(InvalidInputError):
        sample_dirichlet_matrix(1, 1, rng_seed=0)


# ---------------------------------------------------------------------------
# Mixture evaluation


def test_mixture_uniform_rows():
    rows = np.full((3, 8), 1 / 8)
    labels = tuple(ErrorLabel(ErrorKind.CUSTOM, (i,)) for i in range(3))
    pi = DistributionMatrix(rows, labels)
    c = ErrorWeights(np.array([0.2, 0.3, 0.5]), labels, WeightConstraint.SIMPLEX)
    np.testing.assert_allclose(mixture_distribution(pi, c), 1 / 8)


def test_mixture_direct_arithmetic():
    pi = two_row_matrix()
    c = ErrorWeights(np.array([0.7, 0.3]), pi.labels, WeightConstraint.SIMPLEX)
    np.testing.assert_allclose(
        mixture_distribution(pi, c), [0.31, 0.27, 0.23, 0.19], atol=1e-15
    )


def test_mixture_white_noise_model():
    rng = np.random.default_rng(5)
    ideal = rng.dirichlet(np.ones(16))
    rows = np.stack([ideal, np.full(16, 1 / 16)])
    labels = (ErrorLabel(ErrorKind.IDEAL), ErrorLabel(ErrorKind.WHITE_NOISE))
    pi = DistributionMatrix(rows, labels)
    f = 0.62
    c = ErrorWeights(np.array([f, 1 - f]), labels, WeightConstraint.SIMPLEX)
    np.testing.assert_allclose(
        mixture_distribution(pi, c), f * ideal + (1 - f) / 16, atol=1e-15
    )


def test_mixture_linearity():
    pi = two_row_matrix()
    rng = np.random.default_rng(3)
    c1 = rng.dirichlet(np.ones(2))
    c2 = rng.dirichlet(np.ones(2))
    alpha = 0.37
    mix = mixture_distribution(
        pi, ErrorWeights(alpha * c1 + (1 - alpha) * c2)
    )
    parts = alpha * mixture_distribution(pi, ErrorWeights(c1)) + (
        1 - alpha
    ) * mixture_distribution(pi, ErrorWeights(c2))
    np.testing.assert_allclose(mix, parts, atol=1e-12)


def test_mixture_infeasible_rejected():
    from rcslab import readout_perturbation_row

    base = np.array([0.4, 0.3, 0.2, 0.1])
    signed = readout_perturbation_row(base, ErrorKind.READOUT_10, (0,))
    pi = DistributionMatrix(
        np.stack([base, signed]),
        (ErrorLabel(ErrorKind.IDEAL), ErrorLabel(ErrorKind.READOUT_10, (0,))),
        row_kinds=(RowKind.PROBABILITY, RowKind.SIGNED_PERTURBATION),
    )
    with pytest.raises(InfeasibleMixtureError):
        mixture_distribution(pi, ErrorWeights(np.array([0.1, 1.5])))


# ---------------------------------------------------------------------------
# Bitstring sampling


def test_multinomial_point_mass():
    p = np.zeros(8)
    p[0] = 1.0
    h = sample_bitstrings_multinomial(p, 100, rng_seed=0)
    assert h.as_dict() == {0: 100}


def test_multinomial_binomial_concentration():
    p = np.array([0.5, 0.5])
    n = 10**6
    h = sample_bitstrings_multinomial(p, n, rng_seed=42)
    sigma = np.sqrt(n / 4)
    assert abs(h.as_dict().get(0, 0) - n / 2) < 5 * sigma


def test_multinomial_mean_frequencies():
    p = np.array([0.31, 0.27, 0.23, 0.19])
    n = 10**5
    reps = 200
    acc = np.zeros(4)
    for seed in range(reps):
        acc += sample_bitstrings_multinomial(p, n, rng_seed=seed).to_dense()
    freq = acc / (n * reps)
    se = np.sqrt(p * (1 - p) / (n * reps))
    assert np.all(np.abs(freq - p) < 3 * se)


def test_multinomial_rejects_unnormalized():
    with pytest.raises(InvalidInputError):
        sample_bitstrings_multinomial(np.array([0.5, 0.4]), 10, rng_seed=0)


def test_poissonized_zero_rate_empty():
    h = sample_bitstrings_poissonized(np.array([1.0]), 0, rng_seed=0)
    assert h.total == 0
    assert h.support_size == 0


def test_poissonized_mean_total():
    n = 50
    reps = 10**4
    total = sum(
        sample_bitstrings_poissonized(np.array([1.0]), n, rng_seed=s).total
        for s in range(reps)
    )
    assert abs(total / reps - n) < 3 * np.sqrt(n / reps)


def test_poissonized_conditioned_on_total_is_multinomial():
    """Condition d=2 Poisson draws on a fixed total; counts are binomial."""
    p = np.array([0.4, 0.6])
    n = 50
    hits = []
    for seed in range(4000):
        h = sample_bitstrings_poissonized(p, n, rng_seed=seed)
        if h.total == n:
            hits.append(h.as_dict().get(0, 0))
    assert len(hits) > 100
    lo, hi = 10, 31
    edges = list(range(lo, hi))
    obs = np.histogram(hits, bins=[-0.5] + [e + 0.5 for e in edges] + [n + 0.5])[0]
    probs = stats.binom.pmf(np.arange(0, n + 1), n, p[0])
    exp_bins = [probs[: lo + 1].sum()]
    exp_bins += [probs[e + 1] for e in edges[:-1]]
    exp_bins += [probs[hi:].sum()]
    chi2 = stats.chisquare(obs, np.array(exp_bins) * len(hits))
    assert chi2.pvalue > 1e-3


def test_poissonized_rejects_negative_rate():
    with pytest.raises(InvalidInputError):
        sample_bitstrings_poissonized(np.array([1.0]), -5, rng_seed=0)


def test_sampling_determinism():
    p = np.array([0.25, 0.25, 0.25, 0.25])
    a = sample_bitstrings_multinomial(p, 1000, rng_seed=9)
    b = sample_bitstrings_multinomial(p, 1000, rng_seed=9)
    assert a.as_dict() == b.as_dict()
    c = sample_bitstrings_poissonized(p, 1000, rng_seed=9)
    d = sample_bitstrings_poissonized(p, 1000, rng_seed=9)
    assert c.as_dict() == d.as_dict()


# ---------------------------------------------------------------------------
# Side information


def test_side_info_zero_m():
    pi = two_row_matrix()
    v = sample_side_info(pi, 0, rng_seed=0)
    assert v.m == 0
    assert all(h.total == 0 for h in v)


def test_side_info_point_mass():
    rows = np.zeros((1, 8))
    rows[0, 3] = 1.0
    pi = DistributionMatrix(rows, (ErrorLabel(ErrorKind.IDEAL),))
    v = sample_side_info(pi, 7, rng_seed=1)
    assert v.histograms[0].as_dict() == {3: 7}


def test_side_info_total_variation():
    # Expected TV at d=256, m=1e4 is ~0.056 (half-l1 of multinomial
    # noise), so the bound carries a little slack above that; the
    # 4x-larger m run checks it actually shrinks like 1/sqrt(m).
    pi = sample_dirichlet_matrix(2, 256, rng_seed=17)
    v = sample_side_info(pi, 10**4, rng_seed=18)
    tv_small = [
        0.5 * np.abs(h.to_dense() / h.total - row).sum()
        for row, h in zip(pi.rows, v)
    ]
    assert max(tv_small) < 0.07
    v4 = sample_side_info(pi, 4 * 10**4, rng_seed=18)
    tv_big = [
        0.5 * np.abs(h.to_dense() / h.total - row).sum()
        for row, h in zip(pi.rows, v4)
    ]
    assert max(tv_big) < 0.05
    assert max(tv_big) < 0.7 * max(tv_small)


def test_side_info_rejects_signed_rows():
    base = np.array([0.4, 0.3, 0.2, 0.1])
    from rcslab import readout_perturbation_row

    signed = readout_perturbation_row(base, ErrorKind.READOUT_10, (0,))
    pi = DistributionMatrix(
        np.stack([base, signed]),
        (ErrorLabel(ErrorKind.IDEAL), ErrorLabel(ErrorKind.READOUT_10, (0,))),
        row_kinds=(RowKind.PROBABILITY, RowKind.SIGNED_PERTURBATION),
    )
    with pytest.raises(UnsupportedRowKindError):
        sample_side_info(pi, 5, rng_seed=0)
