"""Model construction, training oracles, and serialization round trips."""

import json

import numpy as np
import pytest

from labrisk import nn
from labrisk.model import (ModelError, ModelIOError, RiskAssessment,
                           RiskModel, RiskModelConfig, finetune, load_model,
                           pretrain, save_model, train_ensemble)
from labrisk.preprocess import NormalizationParams


def tiny_config(d=5, **kw):
    base = dict(n_features=d, hidden_width=6, latent_dim=3,
                pretrain_epochs=2, finetune_epochs=2, batch_size=4, seed=0)
    base.update(kw)
    return RiskModelConfig(**base)


def dummy_params(d):
    names = tuple(f"m{i}" for i in range(d))
    return NormalizationParams(
        median={n: 0.0 for n in names}, iqd={n: 1.0 for n in names},
        log_transform={n: False for n in names},
        detection_limit={n: 0.0 for n in names},
        feature_order=names, fitted_on="development",
        scale_demographics=True)


def test_parameter_count():
    cfg = tiny_config(d=5)
    model = RiskModel(cfg, rng=np.random.default_rng(0))
    # encoder: Linear(10,6)+BN(6), Linear(6,6)+BN(6) x2; heads 6->3 x2;
    # decoder: Linear(3,6)+BN(6), Linear(6,6)+BN(6) x2, Linear(6,5); cls 3->1.
    expected = ((10 * 6 + 6) + (6 * 6 + 6) * 2 + 12 * 3  # encoder + BN gammas/betas
                + 2 * (6 * 3 + 3)                         # mu/logvar heads
                + (3 * 6 + 6) + (6 * 6 + 6) * 2 + 12 * 3  # decoder stack + BN
                + (6 * 5 + 5)                             # final projection
                + (3 * 1 + 1))                            # classifier
    assert model.num_parameters() == expected
    assert sum(p.size for p in model.parameters()) == expected


@pytest.mark.parametrize("seed", range(3))
def test_pretrain_loss_gradient_check(seed):
    rng = np.random.default_rng(seed)
    cfg = tiny_config(d=4)
    model = RiskModel(cfg, rng=rng)
    values = rng.normal(size=(6, 4))
    mask = (rng.random((6, 4)) < 0.8).astype(float)
    keep = mask * (rng.random((6, 4)) < 0.75)
    noise = rng.normal(size=(6, cfg.latent_dim))

    def loss():
        return model.pretrain_loss_and_grads(values, mask, keep, noise)[0]

    loss()
    analytic = [g.copy() for g in model.gradients()]
    assert nn.grad_check(loss, model.parameters(), analytic) < 1e-4


@pytest.mark.parametrize("seed", range(3))
def test_finetune_loss_gradient_check(seed):
    rng = np.random.default_rng(100 + seed)
    cfg = tiny_config(d=4)
    model = RiskModel(cfg, rng=rng)
    values = rng.normal(size=(6, 4))
    mask = (rng.random((6, 4)) < 0.8).astype(float)
    labels = (rng.random(6) < 0.5).astype(float)
    noise = rng.normal(size=(6, cfg.latent_dim))

    def loss():
        return model.finetune_loss_and_grads(values, mask, labels, noise)[0]

    loss()
    analytic = [g.copy() for g in model.gradients()]
    assert nn.grad_check(loss, model.parameters(), analytic) < 1e-4


def separable_data(n=120, d=5, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(float)
    x = rng.normal(size=(n, d)) + 2.5 * y[:, None]
    mask = np.ones((n, d))
    return x, mask, y


def test_finetune_separates_easy_classes():
    x, mask, y = separable_data()
    cfg = tiny_config(d=5, pretrain_epochs=5, finetune_epochs=60, lr=1e-2)
    rng = np.random.default_rng(1)
    model = RiskModel(cfg, rng=rng)
    pretrain(model, x, mask, rng)
    finetune(model, x, mask, y, rng)
    scores = model.predict_scores(x, mask)
    # Training AUC on linearly separable data should be near perfect.
    from labrisk.metrics import roc
    assert roc(scores, y).auc > 0.95


def test_pretrain_reduces_reconstruction_loss():
    x, mask, _ = separable_data(seed=3)
    cfg = tiny_config(d=5, pretrain_epochs=40, lr=1e-2)
    rng = np.random.default_rng(2)
    model = RiskModel(cfg, rng=rng)
    history = pretrain(model, x, mask, rng)
    losses = [h["loss"] for h in history]
    assert losses[-1] < losses[0]


def test_finetune_rejects_single_class():
    x, mask, _ = separable_data(n=20)
    cfg = tiny_config(d=5)
    rng = np.random.default_rng(0)
    model = RiskModel(cfg, rng=rng)
    with pytest.raises(ModelError):
        finetune(model, x, mask, np.zeros(20), rng)


def test_risk_assessment_clamps_ci():
    a = RiskAssessment.from_scores(np.array([0.95, 0.99, 1.0, 0.97]),
                                   ci_scale=3.0)
    assert 0.0 <= a.ci[0] <= a.ci[1] <= 1.0
    assert a.std == pytest.approx(
        np.std([0.95, 0.99, 1.0, 0.97]))  # population std


def trained_ensemble(seed=0, n_members=3):
    x, mask, y = separable_data(n=90, seed=seed)
    pids = [f"p{i // 3}" for i in range(90)]  # 3 encounters per patient
    cfg = tiny_config(d=5, pretrain_epochs=2, finetune_epochs=4, seed=seed)
    return train_ensemble(x, mask, y, pids, dummy_params(5), cfg,
                          n_members=n_members), (x, mask, y)


def test_ensemble_prediction_shape_and_range():
    ens, (x, mask, _) = trained_ensemble()
    scores = ens.predict_batch(x, mask)
    assert scores.shape == (90, 3)
    assert np.all((scores >= 0) & (scores <= 1))
    a = ens.predict(x[0], mask[0])
    assert len(a.per_member_scores) == 3
    assert a.ci[0] <= a.mean <= a.ci[1]


def test_ensemble_members_differ():
    ens, (x, mask, _) = trained_ensemble()
    scores = ens.predict_batch(x, mask)
    assert not np.allclose(scores[:, 0], scores[:, 1])


def test_train_ensemble_deterministic():
    from labrisk.model import ensemble_to_dict
    e1, _ = trained_ensemble(seed=5)
    e2, _ = trained_ensemble(seed=5)
    d1 = ensemble_to_dict(e1)
    d2 = ensemble_to_dict(e2)
    assert json.dumps(d1, sort_keys=True) == json.dumps(d2, sort_keys=True)


def test_save_load_round_trip(tmp_path):
    ens, (x, mask, _) = trained_ensemble(seed=7)
    path = tmp_path / "model.json"
    save_model(ens, path, extras={"note": [1, 2, 3]})
    loaded, extras = load_model(path)
    assert extras["note"] == [1, 2, 3]
    np.testing.assert_array_equal(loaded.predict_batch(x, mask),
                                  ens.predict_batch(x, mask))


def test_load_detects_corruption(tmp_path):
    ens, _ = trained_ensemble(seed=8)
    path = tmp_path / "model.json"
    save_model(ens, path)
    doc = json.loads(path.read_text())
    doc["payload"]["members"][0]["tensors"][0]["weight"][0][0] += 1.0
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelIOError):
        load_model(path)


def test_config_validation():
    with pytest.raises(ModelError):
        tiny_config(d=0).validate()
    with pytest.raises(ModelError):
        tiny_config(mask_fraction=1.0).validate()
    with pytest.raises(ModelError):
        tiny_config(batch_size=1).validate()
