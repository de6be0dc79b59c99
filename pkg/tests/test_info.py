import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moegate._validation import DomainError, SimplexError
from moegate.info import (
    LN2,
    binary_entropy,
    channel_mutual_information,
    dpi_gap,
    entropy,
    inv_binary_entropy,
    joint_from_channel,
    mutual_information,
)
from moegate.selfcheck import random_markov_joint

# h(0.11) evaluated with math.log term by term
H_011 = 0.34651533691866615


def brute_mi(joint):
    """Loop-based I(A;B); independent of the vectorised implementation."""
    rows, cols = len(joint), len(joint[0])
    pa = [sum(joint[i][j] for j in range(cols)) for i in range(rows)]
    pb = [sum(joint[i][j] for i in range(rows)) for j in range(cols)]
    total = 0.0
    for i, j in itertools.product(range(rows), range(cols)):
        if joint[i][j] > 0:
            total += joint[i][j] * math.log(joint[i][j] / (pa[i] * pb[j]))
    return total


def bsc(p):
    return np.array([[1 - p, p], [p, 1 - p]])


prob_vectors = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(
    lambda v: sum(v) > 1e-3
).map(lambda v: np.array(v) / sum(v))


class TestEntropy:
    def test_uniform_two(self):
        assert entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-15)

    def test_point_mass(self):
        assert entropy([0.0, 1.0, 0.0]) == 0.0

    def test_bernoulli_011(self):
        assert entropy([0.11, 0.89]) == pytest.approx(H_011, abs=1e-12)

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [], [[0.5, 0.5]], [np.nan, 1.0]])
    def test_rejects_non_simplex(self, bad):
        with pytest.raises(SimplexError):
            entropy(bad)

    def test_tiny_negative_clamped(self):
        assert entropy([1.0 + 1e-13, -1e-13]) == 0.0

    @given(prob_vectors)
    def test_bounds(self, p):
        h = entropy(p)
        assert 0.0 <= h <= math.log(p.size) + 1e-12

    @given(prob_vectors, st.randoms())
    def test_permutation_invariant(self, p, r):
        q = list(p)
        r.shuffle(q)
        assert entropy(q) == pytest.approx(entropy(p), abs=1e-12)


class TestBinaryEntropy:
    def test_values(self):
        assert binary_entropy(0.5) == pytest.approx(LN2, abs=1e-15)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.11) == pytest.approx(H_011, abs=1e-12)

    @pytest.mark.parametrize("p", [-1e-3, 1.0001, float("nan")])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            binary_entropy(p)

    @given(st.floats(0.0, 1.0))
    def test_symmetric(self, p):
        assert binary_entropy(p) == pytest.approx(binary_entropy(1.0 - p), abs=1e-12)


class TestInverseBinaryEntropy:
    def test_endpoints(self):
        assert inv_binary_entropy(LN2) == 0.5
        assert inv_binary_entropy(0.0) == 0.0

    def test_round_trip_011(self):
        assert inv_binary_entropy(binary_entropy(0.11)) == pytest.approx(0.11, abs=1e-9)

    def test_slack_above_ln2(self):
        assert inv_binary_entropy(LN2 + 5e-13) == 0.5

    @pytest.mark.parametrize("h", [-1e-6, LN2 + 1e-6])
    def test_domain(self, h):
        with pytest.raises(DomainError):
            inv_binary_entropy(h)

    @given(st.floats(0.0, 0.5))
    def test_round_trip(self, p):
        assert inv_binary_entropy(binary_entropy(p)) == pytest.approx(p, abs=1e-9)

    @given(st.floats(0.0, LN2))
    def test_residual(self, h):
        assert abs(binary_entropy(inv_binary_entropy(h)) - h) <= 1e-10


class TestMutualInformation:
    def test_independent(self):
        assert mutual_information(np.full((3, 4), 1 / 12)) == pytest.approx(0.0, abs=1e-15)

    def test_diagonal(self):
        assert mutual_information(np.eye(2) / 2) == pytest.approx(LN2, abs=1e-15)

    def test_bsc_joint(self):
        joint = 0.5 * bsc(0.11)
        assert mutual_information(joint) == pytest.approx(LN2 - H_011, abs=1e-12)
        assert mutual_information(joint) == pytest.approx(brute_mi(joint.tolist()), abs=1e-15)

    def test_rejects_unnormalised(self):
        with pytest.raises(SimplexError):
            mutual_information(np.ones((2, 2)))

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            shape = rng.integers(1, 6, size=2)
            joint = rng.dirichlet(np.ones(shape.prod())).reshape(shape)
            joint[rng.random(shape) < 0.2] = 0.0
            joint /= joint.sum()
            assert mutual_information(joint) == pytest.approx(brute_mi(joint.tolist()), abs=1e-12)

    @settings(max_examples=200)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_nonnegative_and_bounded(self, a, b, seed):
        joint = np.random.default_rng(seed).dirichlet(np.ones(a * b)).reshape(a, b)
        mi = mutual_information(joint)
        assert mi >= 0.0
        assert mi <= min(entropy(joint.sum(1)), entropy(joint.sum(0))) + 1e-12

    def test_zero_iff_product(self, rng):
        pa, pb = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
        assert mutual_information(np.outer(pa, pb)) < 1e-15
        skewed = np.outer(pa, pb)
        skewed[0, 0] += 0.05
        skewed[1, 1] -= 0.05 * min(1, skewed[1, 1] / 0.05)
        skewed /= skewed.sum()
        assert mutual_information(skewed) > 1e-6


class TestChannelMutualInformation:
    def test_constant_channel(self):
        ch = np.tile([0.2, 0.3, 0.5], (4, 1))
        assert channel_mutual_information([0.1, 0.2, 0.3, 0.4], ch) == pytest.approx(0.0, abs=1e-15)

    def test_identity(self):
        assert channel_mutual_information([0.5, 0.5], np.eye(2)) == pytest.approx(LN2, abs=1e-15)

    def test_bsc(self):
        assert channel_mutual_information([0.5, 0.5], bsc(0.11)) == pytest.approx(
            LN2 - H_011, abs=1e-12
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            channel_mutual_information([0.5, 0.5], np.eye(3))

    def test_rejects_bad_rows(self):
        with pytest.raises(SimplexError):
            channel_mutual_information([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]])

    def test_same_as_joint_path(self, rng):
        for _ in range(50):
            k, n = rng.integers(1, 7, size=2)
            p = rng.dirichlet(np.ones(k))
            ch = rng.dirichlet(np.ones(n), size=k)
            assert channel_mutual_information(p, ch) == pytest.approx(
                mutual_information(joint_from_channel(p, ch)), abs=1e-12
            )


class TestDPI:
    def test_severed_chain(self):
        ps = np.array([0.3, 0.7])
        pw_s = np.array([[0.4, 0.6], [0.4, 0.6]])
        pl_w = np.array([[0.9, 0.1], [0.2, 0.8]])
        joint = ps[:, None, None] * pw_s[:, :, None] * pl_w[None]
        i_sw, i_sl = dpi_gap(joint)
        assert i_sw == pytest.approx(0.0, abs=1e-15)
        assert i_sl == pytest.approx(0.0, abs=1e-15)

    def test_lossless_chain(self):
        joint = 0.5 * np.eye(2)[:, :, None] * np.eye(2)[None, :, :]
        i_sw, i_sl = dpi_gap(joint)
        assert i_sw == pytest.approx(LN2, abs=1e-15)
        assert i_sl == pytest.approx(LN2, abs=1e-15)

    def test_random_3x3x3_against_enumeration(self, rng):
        ps = rng.dirichlet(np.ones(3))
        pw_s = rng.dirichlet(np.ones(3), size=3)
        pl_w = rng.dirichlet(np.ones(3), size=3)
        joint = np.zeros((3, 3, 3))
        for s, w, l in itertools.product(range(3), repeat=3):
            joint[s, w, l] = ps[s] * pw_s[s, w] * pl_w[w, l]
        sw = [[sum(joint[s, w, l] for l in range(3)) for w in range(3)] for s in range(3)]
        sl = [[sum(joint[s, w, l] for w in range(3)) for l in range(3)] for s in range(3)]
        i_sw, i_sl = dpi_gap(joint)
        assert i_sw == pytest.approx(brute_mi(sw), abs=1e-12)
        assert i_sl == pytest.approx(brute_mi(sl), abs=1e-12)
        assert i_sl <= i_sw + 1e-12

    def test_randomised_chains(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            i_sw, i_sl = dpi_gap(random_markov_joint(rng))
            assert i_sl <= i_sw + 1e-12

    def test_rejects_unnormalised(self):
        with pytest.raises(SimplexError):
            dpi_gap(np.ones((2, 2, 2)))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            dpi_gap(np.eye(2) / 2)
