import json

import numpy as np
import pytest

from robustgsl.errors import DivergenceError, ValidationError
from robustgsl.gcn import accuracy
from robustgsl.learner import (
    HyperParams,
    TrainResult,
    ablation_variant,
    fit_fixed_structure,
    learn_structure,
    train,
    train_two_stage,
)

FAST = dict(outer_iters=30, eta_prime=0.1)


def test_hyperparam_defaults_and_validation():
    hp = HyperParams()
    assert hp.tau >= 1 and hp.outer_iters == 400 and hp.mode == "joint"
    for bad in (dict(alpha=-1.0), dict(tau=0), dict(mode="x"), dict(eta_prime=0.0), dict(patience=0)):
        with pytest.raises(ValidationError):
            HyperParams(**bad)
    with pytest.raises(ValidationError):
        HyperParams.from_json({"nope": 1})
    assert HyperParams.from_json(hp.to_json()) == hp


def test_ablation_variant_keeps_one_weight():
    hp = HyperParams(alpha=0.1, beta=0.2, gamma=0.3, lam=0.4)
    v = ablation_variant(hp, "lambda", 2.0)
    assert (v.alpha, v.beta, v.gamma, v.lam) == (0.0, 0.0, 0.0, 2.0)
    v = ablation_variant(hp, "beta", 1.0)
    assert (v.alpha, v.beta, v.gamma, v.lam) == (0.0, 1.0, 0.0, 0.0)
    assert v.eta == hp.eta
    with pytest.raises(ValidationError):
        ablation_variant(hp, "delta", 1.0)
    with pytest.raises(ValidationError):
        ablation_variant(hp, "alpha", -1.0)


def test_zero_weights_keep_S_equal_to_A(small_sbm):
    hp = HyperParams(alpha=0, beta=0, gamma=0, lam=0, **FAST)
    res = train(small_sbm, hp)
    np.testing.assert_array_equal(res.learned_S, small_sbm.adjacency)


def test_zero_weight_joint_matches_gcn_only(small_sbm):
    hp = HyperParams(alpha=0, beta=0, gamma=0, lam=0, **FAST)
    joint = train(small_sbm, hp)
    only = train(small_sbm, hp.replace(mode="gcn_only"))
    assert joint.params.allclose(only.params, rtol=0, atol=0)
    assert joint.history == only.history


def test_history_and_snapshot_consistency(small_sbm):
    g = small_sbm
    res = train(g, HyperParams(**FAST))
    assert len(res.history) == FAST["outer_iters"]
    assert [h["iteration"] for h in res.history] == list(range(1, 31))
    assert res.best_val_accuracy == max(h["val_accuracy"] for h in res.history)
    assert res.history[res.best_iteration - 1]["val_accuracy"] == res.best_val_accuracy
    # re-evaluating the returned pair reproduces the recorded numbers exactly
    assert accuracy(res.params, g.features, res.learned_S, g.labels, g.val_idx) == res.best_val_accuracy
    assert accuracy(res.params, g.features, res.learned_S, g.labels, g.test_idx) == res.test_accuracy
    S = res.learned_S
    assert np.array_equal(S, S.T) and S.min() >= 0 and S.max() <= 1


def test_training_is_deterministic(small_sbm):
    a = train(small_sbm, HyperParams(**FAST))
    b = train(small_sbm, HyperParams(**FAST))
    np.testing.assert_array_equal(a.learned_S, b.learned_S)
    assert a.params.allclose(b.params, rtol=0, atol=0)


def test_patience_stops_early(small_sbm):
    # a huge step saturates the softmax, after which validation stops improving
    res = train(small_sbm, HyperParams(patience=3, outer_iters=200, eta_prime=1e6))
    assert len(res.history) < 200
    assert len(res.history) - res.best_iteration == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(small_sbm):
    huge = small_sbm.with_adjacency(small_sbm.adjacency)
    huge.features = small_sbm.features * 1e306
    with pytest.raises(DivergenceError):
        train(huge, HyperParams(**FAST))


def test_missing_training_nodes_rejected(small_sbm):
    g = small_sbm
    from robustgsl.graph import Graph

    bare = Graph(g.adjacency, g.features, g.labels, [], g.val_idx, g.test_idx)
    with pytest.raises(ValidationError):
        train(bare, HyperParams(**FAST))


def test_two_stage_with_zero_weights_is_gcn_only(small_sbm):
    hp = HyperParams(alpha=0, beta=0, lam=0, **FAST)
    np.testing.assert_array_equal(learn_structure(small_sbm, hp), small_sbm.adjacency)
    two = train_two_stage(small_sbm, hp)
    only = fit_fixed_structure(small_sbm, small_sbm.adjacency, hp)
    assert two.method == "prognn_two"
    assert two.params.allclose(only.params, rtol=0, atol=0)


def test_result_json_round_trip(small_sbm, tmp_path):
    res = train(small_sbm, HyperParams(**FAST))
    for sparse in (False, True):
        obj = json.loads(json.dumps(res.to_json(sparse=sparse)))
        back = TrainResult.from_json(obj)
        assert back.best_val_accuracy == res.best_val_accuracy
        assert back.history == res.history
        if sparse:
            kept = res.learned_S > 1e-4
            np.testing.assert_array_equal(back.learned_S[kept], res.learned_S[kept])
            assert np.all(back.learned_S[~kept] == 0)
        else:
            np.testing.assert_array_equal(back.learned_S, res.learned_S)
