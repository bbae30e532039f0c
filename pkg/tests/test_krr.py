import json

import numpy as np
import pytest

from conftest import random_labeled
from fgwpred.barycenter import normalize_weights
from fgwpred.errors import (
    DimMismatchError,
    EmptyCandidateSetError,
    NotPositiveDefiniteError,
    ParseError,
    WeightError,
)
from fgwpred.fgw import FgwProblem, solve_fgw
from fgwpred.graph import Permutation, permute
from fgwpred.krr import (
    Kernel,
    candidate_scores,
    decode_candidates,
    fgw_matrix,
    fit,
    fit_krr,
    gram_matrix,
    load_model,
    predict,
    predict_result,
    save_model,
    truncate_weights,
    weights_at,
)


def _fgw(a, b, beta=0.5):
    return solve_fgw(FgwProblem(a, b, beta), restarts=4, seed=0).value


class TestKernel:
    def test_single_point(self):
        np.testing.assert_array_equal(gram_matrix(Kernel("gaussian", 2.0), [[0.3]]), [[1.0]])

    def test_linear_orthonormal(self):
        np.testing.assert_array_equal(gram_matrix(Kernel("linear"), np.eye(3)), np.eye(3))

    def test_gaussian_value(self):
        K = gram_matrix(Kernel("gaussian", 1.0), [0.0, 1.0])
        assert K[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)
        np.testing.assert_array_equal(np.diag(K), 1.0)
        np.testing.assert_array_equal(K, K.T)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            Kernel("linear")(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_precomputed_checks(self):
        with pytest.raises(NotPositiveDefiniteError):
            gram_matrix(Kernel("precomputed"), [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotPositiveDefiniteError):
            gram_matrix(Kernel("precomputed"), [[1.0, 0.5], [0.1, 1.0]])
        K = gram_matrix(Kernel("precomputed"), [[1.0, 0.5], [0.5, 1.0]])
        np.testing.assert_array_equal(K, [[1.0, 0.5], [0.5, 1.0]])

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            Kernel("gaussian", 0.0)


class TestFit:
    def test_identity_gram(self):
        model = fit_krr(np.eye(2), 0.5)
        np.testing.assert_allclose(weights_at(model, kx=[1.0, 0.0]), [2 / 3, 0.0], atol=1e-15)

    def test_interpolation(self):
        X = np.linspace(1, 6, 10)
        model = fit(X, [None] * 10, Kernel("gaussian", 1.0), 1e-8)
        for i, x in enumerate(X):
            assert np.max(np.abs(weights_at(model, x) - np.eye(10)[i])) <= 1e-3

    def test_ridge_dominance(self, rng):
        X = rng.random(5)
        model = fit(X, [None] * 5, Kernel("gaussian", 1.0), 1e6)
        kx = Kernel("gaussian", 1.0)(X, [[0.4]]).ravel()
        np.testing.assert_allclose(weights_at(model, 0.4), kx / 1e6, rtol=1e-5)

    def test_factorization_and_residual(self, rng):
        X = rng.random((8, 2))
        model = fit(X, [None] * 8, Kernel("gaussian", 3.0), 1e-3)
        A = model.K + model.lam * np.eye(8)
        v = rng.random(8)
        assert np.max(np.abs(A @ model.solve(A @ v) - A @ v)) <= 1e-8
        x = rng.random(2)
        kx = model.kernel(model.inputs, x[None]).ravel()
        assert np.max(np.abs(A @ weights_at(model, x) - kx)) <= 1e-8

    def test_lambda_positive(self):
        with pytest.raises(ValueError):
            fit_krr(np.eye(2), 0.0)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            fit_krr(np.array([[1.0, 3.0], [3.0, 1.0]]), 1e-3)

    def test_raw_weights_can_be_negative(self):
        X = np.array([0.0, 0.5, 1.0])
        model = fit(X, [None] * 3, Kernel("gaussian", 5.0), 1e-6)
        assert weights_at(model, 1.3).min() < 0


class TestTruncate:
    def test_examples(self):
        a = np.array([0.5, 0.3, 0.2])
        np.testing.assert_array_equal(truncate_weights(a, 3), a)
        np.testing.assert_array_equal(truncate_weights(a, 1), [0.5, 0, 0])
        np.testing.assert_array_equal(truncate_weights([0.4, 0.4, 0.2], 1), [0.4, 0, 0])

    def test_signed_order(self):
        np.testing.assert_array_equal(truncate_weights([-0.9, 0.1, 0.05], 2), [0, 0.1, 0.05])

    @pytest.mark.parametrize("k", [0, 4])
    def test_range(self, k):
        with pytest.raises(ValueError):
            truncate_weights([0.1, 0.2, 0.3], k)


@pytest.fixture
def small_model(rng):
    X = np.array([1.0, 2.0, 3.0, 4.0])
    graphs = [random_labeled(rng, int(n)) for n in (4, 5, 5, 6)]
    return fit(X, graphs, Kernel("gaussian", 1.0), 1e-8)


class TestPredict:
    def test_identical_graphs(self, rng):
        g = random_labeled(rng, 5)
        model = fit(rng.random(4), [g] * 4, Kernel("gaussian", 1.0), 1e-2)
        assert _fgw(predict(model, 0.5, n=5), g) <= 1e-6

    @pytest.mark.parametrize("i", range(4))
    def test_training_point_top1(self, small_model, i):
        z = small_model.graphs[i]
        pred = predict(small_model, small_model.inputs[i], n=z.n, top_k=1)
        assert _fgw(pred, z) <= 1e-6

    def test_top1_is_closest_template(self, small_model):
        x = 2.4
        j = int(np.argmax(weights_at(small_model, x)))
        res = predict_result(small_model, x, n=5, top_k=1)
        np.testing.assert_array_equal(res.weights, np.eye(4)[j])

    def test_midway_symmetric(self, rng):
        model = fit([0.0, 2.0], [random_labeled(rng, 4), random_labeled(rng, 4)],
                    Kernel("gaussian", 0.5), 1e-3)
        w = normalize_weights(weights_at(model, 1.0))
        assert abs(w[0] - w[1]) <= 1e-12

    def test_all_truncated_nonpositive(self, rng):
        model = fit_krr(np.eye(2), 1.0, graphs=[random_labeled(rng, 3)] * 2)
        with pytest.raises(WeightError):
            predict(model, n=3, kx=[-1.0, -2.0], top_k=1)

    @pytest.mark.parametrize("n", [5, 20, 40])
    def test_resolutions(self, small_model, n):
        assert predict(small_model, 2.5, n=n, top_k=3).n == n


class TestDecode:
    def test_single_kept_template(self, small_model, rng):
        z = small_model.graphs[2]
        cands = [random_labeled(rng, 5), z, random_labeled(rng, 6)]
        ranked = decode_candidates(small_model, small_model.inputs[2], cands, top_k=1)
        assert ranked[0][0] == 1 and ranked[0][2] == 0.0

    def test_isomorphic_candidate_first(self, small_model, rng):
        z = small_model.graphs[0]
        iso = permute(z, Permutation.random(z.n, rng))
        cands = [random_labeled(rng, 4), iso]
        ranked = decode_candidates(small_model, small_model.inputs[0], cands, top_k=1)
        assert ranked[0][0] == 1 and ranked[0][2] <= 1e-6

    def test_uniform_two_templates(self, rng):
        t1, t2 = random_labeled(rng, 4), random_labeled(rng, 5)
        D = fgw_matrix([t1, t2], [t1, t2])
        model = fit_krr(np.eye(2), 1.0, graphs=[t1, t2])
        ranked = decode_candidates(model, None, [t1, t2], kx=[2.0, 2.0], distances=D)
        # alpha = (1, 1): each score is the cross term only
        assert D[0, 0] == 0.0 and D[1, 1] == 0.0
        assert [r[2] for r in ranked] == pytest.approx([D[0, 1], D[1, 0]])
        if D[0, 1] == D[1, 0]:
            assert [r[0] for r in ranked] == [0, 1]

    def test_ties_by_index(self, rng):
        t = random_labeled(rng, 4)
        model = fit_krr(np.eye(1), 1.0, graphs=[t])
        ranked = decode_candidates(model, None, [t, t, t], kx=[1.0])
        assert [r[0] for r in ranked] == [0, 1, 2]

    def test_scale_invariant_ranking(self, small_model, rng):
        cands = [random_labeled(rng, int(n)) for n in rng.integers(4, 7, 6)]
        D = fgw_matrix(cands, small_model.graphs)
        alpha = weights_at(small_model, 2.7)
        s1 = candidate_scores(alpha, cands, small_model.graphs, distances=D)
        s2 = candidate_scores(3.0 * alpha, cands, small_model.graphs, distances=D)
        assert list(np.argsort(s1, kind="stable")) == list(np.argsort(s2, kind="stable"))

    def test_precomputed_matches_solver(self, small_model, rng):
        cands = [random_labeled(rng, 5) for _ in range(3)]
        a = decode_candidates(small_model, 2.2, cands, top_k=2)
        D = fgw_matrix(cands, small_model.graphs)
        b = decode_candidates(small_model, 2.2, cands, top_k=2, distances=D)
        assert [r[0] for r in a] == [r[0] for r in b]
        np.testing.assert_allclose([r[2] for r in a], [r[2] for r in b], atol=1e-15)

    def test_empty(self, small_model):
        with pytest.raises(EmptyCandidateSetError):
            decode_candidates(small_model, 1.0, [])


class TestPersistence:
    def test_roundtrip(self, small_model, tmp_path):
        save_model(tmp_path / "m.json", small_model, beta=0.5, top_k=3)
        model, meta = load_model(tmp_path / "m.json")
        assert meta == {"beta": 0.5, "top_k": 3}
        np.testing.assert_array_equal(weights_at(model, 2.5), weights_at(small_model, 2.5))
        assert all(a.same_as(b) for a, b in zip(model.graphs, small_model.graphs))

    def test_bad_file(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"kind": "neural"}))
        with pytest.raises(ParseError):
            load_model(tmp_path / "m.json")
