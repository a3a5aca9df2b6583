"""Gradient and numerics checks for the hand-written network layers."""

import numpy as np
import pytest

from labrisk import nn


def _rng(seed):
    return np.random.default_rng(seed)


def test_linear_forward_matches_manual():
    rng = _rng(0)
    layer = nn.Linear(4, 3, rng)
    x = rng.normal(size=(5, 4))
    np.testing.assert_allclose(layer.forward(x), x @ layer.weight.T + layer.bias)


@pytest.mark.parametrize("seed", range(10))
def test_linear_grad_check(seed):
    rng = _rng(seed)
    layer = nn.Linear(6, 4, rng)
    x = rng.normal(size=(7, 6))
    w = rng.normal(size=(7, 4))  # fixed projection so the loss is scalar

    def loss():
        return float((layer.forward(x) * w).sum())

    layer.forward(x)
    layer.backward(w)
    err = nn.grad_check(loss, layer.params(), layer.grads())
    assert err < 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_batchnorm_grad_check(seed):
    rng = _rng(seed)
    layer = nn.BatchNorm(5)
    x = rng.normal(size=(8, 5)) * 2.0 + 1.0
    w = rng.normal(size=(8, 5))

    def loss():
        return float((layer.forward(x.copy(), train=True) * w).sum())

    layer.forward(x.copy(), train=True)
    layer.backward(w)
    err = nn.grad_check(loss, layer.params(), layer.grads())
    assert err < 1e-6


def test_batchnorm_input_gradient():
    rng = _rng(3)
    layer = nn.BatchNorm(4)
    x = rng.normal(size=(6, 4))
    w = rng.normal(size=(6, 4))
    layer.forward(x, train=True)
    dx = layer.backward(w)
    num = np.zeros_like(x)
    step = 1e-6
    for i in range(x.size):
        pert = x.copy().reshape(-1)
        pert[i] += step
        hi = float((nn_forward_fresh(layer, pert.reshape(x.shape)) * w).sum())
        pert[i] -= 2 * step
        lo = float((nn_forward_fresh(layer, pert.reshape(x.shape)) * w).sum())
        num.reshape(-1)[i] = (hi - lo) / (2 * step)
    np.testing.assert_allclose(dx, num, rtol=1e-5, atol=1e-7)


def nn_forward_fresh(layer, x):
    """Forward pass that leaves running statistics untouched."""
    saved = (layer.running_mean.copy(), layer.running_var.copy())
    out = layer.forward(x, train=True)
    layer.running_mean, layer.running_var = saved
    return out


def test_batchnorm_eval_uses_running_stats():
    rng = _rng(4)
    layer = nn.BatchNorm(3)
    for _ in range(200):
        layer.forward(rng.normal(loc=2.0, scale=3.0, size=(32, 3)), train=True)
    out = layer.forward(np.full((2, 3), 2.0), train=False)
    # An input at the running mean normalizes near zero -> output near beta.
    np.testing.assert_allclose(out, np.broadcast_to(layer.beta, (2, 3)),
                               atol=0.15)


def test_batchnorm_rejects_single_row_training():
    layer = nn.BatchNorm(3)
    with pytest.raises(nn.ShapeError):
        layer.forward(np.zeros((1, 3)), train=True)


def test_activations():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(nn.leaky_relu(x),
                               np.where(x > 0, x, 0.2 * x))
    np.testing.assert_allclose(nn.relu(x), np.maximum(x, 0.0))
    assert nn.sigmoid(np.array([0.0]))[0] == 0.5
    # Stability at extreme logits: finite and correctly saturated.
    big = nn.sigmoid(np.array([1000.0, -1000.0]))
    assert big[0] == 1.0 and big[1] == 0.0


def test_masked_mse_grad_zero_where_masked():
    rng = _rng(5)
    recon = rng.normal(size=(4, 6))
    target = rng.normal(size=(4, 6))
    mask = (rng.random((4, 6)) < 0.5).astype(float)
    loss, grad = nn.masked_mse(recon, target, mask)
    assert np.all(grad[mask == 0] == 0.0)
    k = max(1.0, mask.sum())
    expected = float((((recon - target) * mask) ** 2).sum() / k)
    assert loss == pytest.approx(expected, rel=1e-12)

    def f():
        return nn.masked_mse(recon, target, mask)[0]

    assert nn.grad_check(f, [recon], [grad]) < 1e-6


def test_kl_divergence_grad_check():
    rng = _rng(6)
    mu = rng.normal(size=(5, 4))
    logvar = rng.normal(size=(5, 4)) * 0.3
    loss, dmu, dlv = nn.kl_divergence(mu, logvar)
    assert loss >= 0.0

    def f():
        return nn.kl_divergence(mu, logvar)[0]

    assert nn.grad_check(f, [mu, logvar], [dmu, dlv]) < 1e-6


def test_kl_zero_at_standard_normal():
    mu = np.zeros((3, 2))
    logvar = np.zeros((3, 2))
    loss, dmu, dlv = nn.kl_divergence(mu, logvar)
    assert loss == 0.0
    assert np.all(dmu == 0.0) and np.all(dlv == 0.0)


def test_bce_with_logits_matches_plain_bce_and_grad():
    rng = _rng(7)
    logits = rng.normal(size=12) * 3
    y = (rng.random(12) < 0.5).astype(float)
    loss, grad = nn.bce_with_logits(logits, y)
    assert loss == pytest.approx(nn.bce(nn.sigmoid(logits), y), rel=1e-10)

    def f():
        return nn.bce_with_logits(logits, y)[0]

    assert nn.grad_check(f, [logits], [grad]) < 1e-6


def test_bce_with_logits_stable_at_extremes():
    loss, grad = nn.bce_with_logits(np.array([500.0, -500.0]),
                                    np.array([1.0, 0.0]))
    assert 0.0 <= loss < 1e-100
    assert np.all(np.isfinite(grad))


def test_reparameterize_deterministic_given_noise():
    mu = np.array([[1.0, -1.0]])
    logvar = np.array([[0.0, np.log(4.0)]])
    noise = np.array([[2.0, -1.0]])
    z = nn.reparameterize(mu, logvar, noise)
    np.testing.assert_allclose(z, [[3.0, -3.0]])


def test_adam_minimizes_quadratic():
    p = np.array([5.0, -3.0])
    opt = nn.Adam([p], lr=0.1)
    for _ in range(500):
        opt.step([2 * p])
    assert np.abs(p).max() < 1e-3


def test_check_finite_raises():
    layer = nn.Linear(2, 2, _rng(8))
    with pytest.raises(nn.NumericsError):
        layer.forward(np.array([[np.nan, 0.0]]))
