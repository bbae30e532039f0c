import numpy as np
import pytest

from conftest import random_labeled
from fgwpred.barycenter import solve_barycenter
from fgwpred.experiments import (
    eval_topk,
    eval_weights_sweep,
    interpolation_curve,
    interpolation_points,
    rank_candidates,
    select_krr,
    topk_from_positions,
    truth_position,
    validation_split,
)
from fgwpred.errors import InsufficientTrainingDataError
from fgwpred.fgw import FgwProblem, solve_fgw
from fgwpred.krr import Kernel, decode_candidates, fit, weights_at


@pytest.fixture
def krr_task(rng):
    X = np.linspace(1.0, 4.0, 6)
    graphs = [random_labeled(rng, int(n)) for n in rng.integers(3, 6, 6)]
    model = fit(X, graphs, Kernel("gaussian", 1.0), 1e-2)
    Xt = np.array([1.3, 2.2, 3.1, 3.8])
    truths = [random_labeled(rng, 4) for _ in Xt]
    cands = [[random_labeled(rng, 4), t, random_labeled(rng, 5), random_labeled(rng, 3)]
             for t in truths]
    return model, Xt, truths, cands


class TestTopk:
    def test_singleton_candidates(self, krr_task):
        model, Xt, truths, _ = krr_task
        rep = eval_topk(model, Xt, truths, [[t] for t in truths], ks=(1, 10))
        assert rep.topk == {1: 1.0, 10: 1.0} and rep.n_test == 4

    def test_truth_absent(self, krr_task, rng):
        model, Xt, truths, cands = krr_task
        others = [[c for c in cs if not c.same_as(t)] for cs, t in zip(cands, truths)]
        rep = eval_topk(model, Xt, truths, others, ks=(1, 2, 3))
        assert all(v == 0.0 for v in rep.topk.values())

    def test_hand_ranked(self):
        # scores: c0 = 0.75, c1 = 0.5, c2 = 0.4 -> ranking [2, 1, 0]
        D = np.array([[1.0, 0.0], [0.0, 2.0], [0.4, 0.4]])
        ranking = rank_candidates(np.array([0.75, 0.25]), [None] * 3, [None] * 2, 0.5,
                                  distances=D)
        assert list(ranking) == [2, 1, 0]
        cands = [random_labeled(np.random.default_rng(i), 3) for i in range(3)]
        positions = [truth_position(ranking, cands, cands[i]) for i in (1, 2, 0)]
        assert positions == [1, 0, 2]
        assert topk_from_positions(positions, [1, 2, 3]) == {1: 1 / 3, 2: 2 / 3, 3: 1.0}

    def test_matches_decode(self, krr_task):
        model, Xt, truths, cands = krr_task
        rep = eval_topk(model, Xt, truths, cands, ks=(1, 2, 4), top_k=3)
        pos = []
        for x, t, cs in zip(Xt, truths, cands):
            order = [r[0] for r in decode_candidates(model, x, cs, top_k=3)]
            pos.append(truth_position(order, cs, t))
        assert rep.topk == topk_from_positions(pos, (1, 2, 4))

    def test_monotone_in_k(self, krr_task):
        model, Xt, truths, cands = krr_task
        acc = list(eval_topk(model, Xt, truths, cands, ks=(1, 2, 3, 4)).topk.values())
        assert all(0 <= a <= 1 for a in acc) and np.all(np.diff(acc) >= 0)
        assert acc[-1] == 1.0


class TestSweep:
    def test_keep_all_is_untruncated(self, krr_task):
        model, Xt, truths, cands = krr_task
        sweep = eval_weights_sweep(model, Xt, truths, cands, keeps=(6,), ks=(1, 2))
        assert sweep[6] == eval_topk(model, Xt, truths, cands, ks=(1, 2), top_k=None).topk

    def test_keep_one_is_closest_template(self, krr_task):
        model, Xt, truths, cands = krr_task
        sweep = eval_weights_sweep(model, Xt, truths, cands, keeps=(1,), ks=(1, 2))
        pos = []
        for x, t, cs in zip(Xt, truths, cands):
            j = int(np.argmax(weights_at(model, x)))
            d = [solve_fgw(FgwProblem(c, model.graphs[j])).value for c in cs]
            pos.append(truth_position(list(np.argsort(d, kind="stable")), cs, t))
        assert sweep[1] == topk_from_positions(pos, (1, 2))

    def test_keeps_capped(self, krr_task):
        model, Xt, truths, cands = krr_task
        assert set(eval_weights_sweep(model, Xt, truths, cands, keeps=(1, 50))) == {1, 6}


class TestInterpolation:
    def test_curve_thresholds(self):
        pts = [(0.1, 0.05), (0.3, 0.2), (0.5, 0.1)]
        rows = interpolation_curve(pts, [-1.0, 0.2, 0.6])
        assert rows[0] == (-1.0, 3, pytest.approx(0.3), pytest.approx(0.35 / 3))
        assert rows[1] == (0.2, 2, pytest.approx(0.4), pytest.approx(0.15))
        assert len(rows) == 2  # nothing above 0.6

    def test_barycenter_beats_closest_on_blend(self, rng):
        t1, t2 = random_labeled(rng, 4), random_labeled(rng, 4)
        model = fit([0.0, 2.0], [t1, t2], Kernel("gaussian", 0.5), 1e-3)
        w = weights_at(model, 1.0)
        truth = solve_barycenter([t1, t2], w, 4).graph
        (d0, d_pred), = interpolation_points(model, [1.0], [truth], top_k=2)
        assert d_pred <= 1e-6 < d0
        (_, _, m0, mp), = interpolation_curve([(d0, d_pred)], [0.0])
        assert mp <= m0


class TestSelectKrr:
    def test_split(self):
        tr, va = validation_split(10, 0)
        assert len(va) == 2 and sorted([*tr, *va]) == list(range(10))
        with pytest.raises(InsufficientTrainingDataError):
            validation_split(1, 0)

    def test_single_grid_point(self, krr_task):
        model, *_ = krr_task
        sel = select_krr(model.inputs, model.graphs, lambda_grid=[0.1], gamma_grid=[2.0])
        assert (sel.lam, sel.gamma) == (0.1, 2.0) and len(sel.table) == 1

    def test_exhaustive_grid_oracle(self, rng):
        X = rng.uniform(1, 6, 10)
        graphs = [random_labeled(rng, int(n)) for n in rng.integers(3, 6, 10)]
        lams, gammas = [1e-8, 1e-2, 10.0], [0.1, 1.0, 10.0]
        sel = select_krr(X, graphs, lambda_grid=lams, gamma_grid=gammas, top_k=3, seed=4)
        tr, va = validation_split(10, 4)
        cands = [graphs[i] for i in va]
        best = -1.0
        for g in gammas:
            for lam in lams:
                m = fit(X[tr], [graphs[i] for i in tr], Kernel("gaussian", g), lam)
                hits = 0
                for v in va:
                    order = [r[0] for r in decode_candidates(m, X[v], cands, top_k=3)]
                    hits += cands[order[0]].same_as(graphs[v])
                best = max(best, hits / len(va))
        assert sel.top1 == best
        assert max(row[2] for row in sel.table) == best
        assert (sel.gamma, sel.lam, sel.top1) in sel.table

    def test_linear_kernel_ignores_gamma(self, krr_task):
        model, *_ = krr_task
        sel = select_krr(model.inputs, model.graphs, "linear", lambda_grid=[1.0],
                         gamma_grid=[3.0, 4.0])
        assert len(sel.table) == 1 and sel.gamma == 1.0
