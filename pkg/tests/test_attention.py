import numpy as np
import pytest

from breathcount.attention import (
    CLASSES,
    AttentionClassifier,
    ModelFormatError,
    ModelShape,
    _layernorm,
    _layernorm_back,
    _softmax,
)

TINY = ModelShape(input_size=16, patch_size=8, embed_dim=16, n_heads=2, n_layers=1, mlp_dim=24)


@pytest.fixture
def model():
    return AttentionClassifier(shape=TINY, seed=0)


@pytest.fixture
def batch():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 16, 16))
    y = np.array([2, 3, 5, 7, 2, 5])
    return x, y


def test_logit_shape_and_softmax_sums(model, batch):
    x, _ = batch
    logits, _ = model.forward(x)
    assert logits.shape == (6, 4)
    probs = _softmax(logits)
    assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6)


def test_first_batch_loss_near_log4(model, batch):
    # with near-uniform initial logits, cross entropy over 4 balanced
    # classes starts at ln(4)
    x, y = batch
    loss, _ = model.loss_and_grads(x, y)
    assert loss == pytest.approx(np.log(4.0), abs=0.25)


def test_predict_returns_class_labels(model, batch):
    x, _ = batch
    preds = model.predict(x)
    assert preds.shape == (6,)
    assert set(preds.tolist()) <= set(CLASSES)


def test_gradients_finite(model, batch):
    x, y = batch
    _, grads = model.loss_and_grads(x, y)
    for name, g in grads.items():
        assert np.all(np.isfinite(g)), name
    assert set(grads) == set(model.params)


def _numeric_grad(model, x, y, name, indices, eps=1e-6):
    grad = np.zeros(len(indices))
    flat = model.params[name].reshape(-1)
    for out_i, idx in enumerate(indices):
        orig = flat[idx]
        flat[idx] = orig + eps
        lp, _ = model.loss_and_grads(x, y)
        flat[idx] = orig - eps
        lm, _ = model.loss_and_grads(x, y)
        flat[idx] = orig
        grad[out_i] = (lp - lm) / (2 * eps)
    return grad


def test_head_gradient_matches_finite_differences(model, batch):
    x, y = batch
    _, grads = model.loss_and_grads(x, y)
    for name in ("head.w", "head.b"):
        analytic = grads[name].reshape(-1)
        indices = list(range(analytic.size))
        numeric = _numeric_grad(model, x, y, name, indices)
        denom = np.maximum(np.abs(numeric), 1e-8)
        rel = np.abs(analytic[indices] - numeric) / denom
        assert rel.max() < 1e-4, f"{name}: max rel err {rel.max():.2e}"


@pytest.mark.parametrize(
    "name",
    ["embed.w", "pos", "enc0.ln1.g", "enc0.attn.wq", "enc0.attn.wo", "enc0.mlp.w1"],
)
def test_interior_gradients_match_finite_differences(model, batch, name):
    x, y = batch
    _, grads = model.loss_and_grads(x, y)
    analytic = grads[name].reshape(-1)
    rng = np.random.default_rng(0)
    indices = rng.choice(analytic.size, size=min(12, analytic.size), replace=False)
    numeric = _numeric_grad(model, x, y, name, list(indices))
    denom = np.maximum(np.abs(numeric), 1e-7)
    rel = np.abs(analytic[indices] - numeric) / denom
    assert rel.max() < 1e-4, f"{name}: max rel err {rel.max():.2e}"


def test_layernorm_backward_closed_form():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 5, 8))
    g = rng.normal(size=8)
    b = rng.normal(size=8)
    dy = rng.normal(size=x.shape)
    _, cache = _layernorm(x, g, b)
    dx, _, _ = _layernorm_back(dy, cache, g)
    eps = 1e-6
    idx = (1, 2, 3)
    xp = x.copy(); xp[idx] += eps
    xm = x.copy(); xm[idx] -= eps
    yp, _ = _layernorm(xp, g, b)
    ym, _ = _layernorm(xm, g, b)
    numeric = ((yp - ym) * dy).sum() / (2 * eps)
    assert dx[idx] == pytest.approx(numeric, rel=1e-5)


def test_checkpoint_round_trip(tmp_path, model, batch):
    x, _ = batch
    path = tmp_path / "model.bin"
    model.save(path)
    loaded = AttentionClassifier.load(path)
    a, _ = model.forward(x)
    b, _ = loaded.forward(x)
    # float32 storage rounds the weights
    assert np.allclose(a, b, atol=1e-4)
    assert loaded.shape == model.shape


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
    with pytest.raises(ModelFormatError):
        AttentionClassifier.load(path)


def test_deterministic_init():
    a = AttentionClassifier(shape=TINY, seed=42)
    b = AttentionClassifier(shape=TINY, seed=42)
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])


def test_label_outside_class_set_rejected(model):
    x = np.zeros((1, 16, 16))
    with pytest.raises(ValueError):
        model.loss_and_grads(x, np.array([4]))


def test_shape_validation():
    with pytest.raises(ValueError):
        ModelShape(input_size=30, patch_size=8).validate()
    with pytest.raises(ValueError):
        ModelShape(embed_dim=30, n_heads=4).validate()
