import math

import numpy as np
import pytest

from fgwpred.errors import OutOfRangeError
from fgwpred.synth import SbmSpec, make_dataset, sample_graph, split_probability


class TestSplitProbability:
    @pytest.mark.parametrize("x, p", [(2.0, 0.01), (2.5, 0.4545), (1.0, 0.01), (6.0, 0.01)])
    def test_examples(self, x, p):
        assert split_probability(x) == pytest.approx(p, abs=1e-12)

    def test_continuity_toward_intra(self):
        assert split_probability(2.999999) == pytest.approx(0.899, abs=1e-5)

    @pytest.mark.parametrize("x", [0.99, 6.01, -1.0])
    def test_out_of_range(self, x):
        with pytest.raises(OutOfRangeError):
            split_probability(x)
        with pytest.raises(OutOfRangeError):
            sample_graph(x, 0)


class TestSpec:
    def test_even_allocation(self):
        assert SbmSpec(3.0, 43).block_sizes() == [15, 14, 14]
        assert SbmSpec(6.0, 40).block_sizes() == [7, 7, 7, 7, 6, 6]

    def test_emerging_block_is_tail_of_block_zero(self):
        blocks = SbmSpec(2.5, 41).assignment()
        # block 0 has 21 nodes; its last 10 form the emerging block 2
        assert list(blocks[:11]) == [0] * 11
        assert list(blocks[11:21]) == [2] * 10
        assert np.all(blocks[21:] == 1)

    def test_integer_x_no_emergence(self):
        spec = SbmSpec(6.0, 44)
        assert set(spec.assignment()) == set(range(6))
        assert spec.probability_matrix().shape == (6, 6)

    def test_probabilities(self):
        P = SbmSpec(3.25, 40).probability_matrix()
        assert P.shape == (4, 4)
        np.testing.assert_array_equal(np.diag(P), 0.9)
        assert P[0, 3] == P[3, 0] == pytest.approx(split_probability(3.25))
        assert P[1, 2] == 0.01 and P[1, 3] == 0.01


class TestSampleGraph:
    def test_one_block_density(self):
        rng = np.random.default_rng(0)
        edges = pairs = 0
        for _ in range(200):
            g = sample_graph(1.0, rng)
            assert set(np.unique(g.F)) == {0.0}
            edges += g.C.sum() / 2
            pairs += g.n * (g.n - 1) / 2
        assert abs(edges / pairs - 0.9) <= 0.02

    def test_six_blocks(self):
        g = sample_graph(6.0, 3)
        assert set(np.unique(g.F).astype(int)) == set(range(6))

    @pytest.mark.parametrize("x", [1.0, 1.7, 2.5, 3.01, 4.9, 6.0])
    def test_label_range_and_size(self, x):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = sample_graph(x, rng)
            assert 40 <= g.n <= 45
            labels = g.F.ravel()
            assert np.all(labels == np.round(labels))
            assert labels.min() >= 0 and labels.max() <= math.ceil(x) - 1

    def test_valid_adjacency(self):
        g = sample_graph(3.3, 4)
        np.testing.assert_array_equal(g.C, g.C.T)
        assert np.all(np.diag(g.C) == 0) and set(np.unique(g.C)) <= {0.0, 1.0}

    @pytest.mark.parametrize("x", [2.5, 4.2])
    def test_split_density(self, x):
        rng = np.random.default_rng(7)
        edges = pairs = 0
        for _ in range(500):
            g = sample_graph(x, rng)
            blocks = SbmSpec(x, g.n).assignment()
            a = np.flatnonzero(blocks == 0)
            b = np.flatnonzero(blocks == int(x))
            edges += g.C[np.ix_(a, b)].sum()
            pairs += a.size * b.size
        assert abs(edges / pairs - split_probability(x)) <= 0.03

    def test_emerging_label_rate(self):
        rng = np.random.default_rng(2)
        new = total = 0
        for _ in range(300):
            g = sample_graph(2.3, rng)
            em = SbmSpec(2.3, g.n).assignment() == 2
            new += np.sum(g.F[em, 0] == 2)
            total += em.sum()
        assert abs(new / total - 0.3) <= 0.03

    def test_seeded(self):
        assert sample_graph(3.7, 11).same_as(sample_graph(3.7, 11))

    def test_one_hot(self):
        g = sample_graph(4.0, 0, one_hot=True)
        assert g.d == 6
        np.testing.assert_array_equal(g.F.sum(1), 1.0)


class TestDataset:
    def test_paper_size(self):
        X, Y = make_dataset(50, seed=0)
        assert X.shape == (50,) and len(Y) == 50
        assert X.min() >= 1 and X.max() <= 6

    def test_single(self):
        X, Y = make_dataset(1, seed=5)
        assert len(X) == 1 and 40 <= Y[0].n <= 45

    def test_deterministic(self):
        X1, Y1 = make_dataset(10, seed=3)
        X2, Y2 = make_dataset(10, seed=3)
        np.testing.assert_array_equal(X1, X2)
        assert all(a.same_as(b) for a, b in zip(Y1, Y2))

    def test_seeds_differ(self):
        assert not np.array_equal(make_dataset(5, seed=0)[0], make_dataset(5, seed=1)[0])

    def test_empty(self):
        with pytest.raises(ValueError):
            make_dataset(0)
