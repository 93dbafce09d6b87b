"""Small patch-attention classifier over rasterized breathing profiles.

A 32x32 profile raster is split into patches, linearly embedded, passed
through two pre-norm self-attention encoder blocks, mean-pooled, and
mapped to logits over the group-size classes {2, 3, 5, 7}. Forward and
backward passes are plain numpy (float64) so training is deterministic
for a fixed seed and gradients can be checked against finite differences.

Checkpoint format: 8-byte magic BCAT\\x00\\x01\\x00\\x00, little-endian
uint32 header length, JSON header (hyperparameters, classes, parameter
names and shapes in storage order), then the parameters as little-endian
float32 in that order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

CLASSES = (2, 3, 5, 7)
MODEL_MAGIC = b"BCAT\x00\x01\x00\x00"
_LN_EPS = 1e-5


class ModelFormatError(IOError):
    """Checkpoint file is not a readable model."""


@dataclass(frozen=True)
class ModelShape:
    input_size: int = 32
    patch_size: int = 8
    embed_dim: int = 32
    n_heads: int = 2
    n_layers: int = 2
    mlp_dim: int = 64

    @property
    def n_patches(self) -> int:
        side = self.input_size // self.patch_size
        return side * side

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.n_heads

    def validate(self) -> None:
        if self.input_size % self.patch_size != 0:
            raise ValueError("input_size must be a multiple of patch_size")
        if self.embed_dim % self.n_heads != 0:
            raise ValueError("embed_dim must be a multiple of n_heads")


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _linear(x, w, b):
    return x @ w + b


def _linear_back(dy, x, w):
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv_std
    return g * xhat + b, (xhat, inv_std)


def _layernorm_back(dy, cache, g):
    xhat, inv_std = cache
    dg = (dy * xhat).reshape(-1, dy.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * g
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


class AttentionClassifier:
    """Patch-embedding + self-attention encoder + linear head."""

    def __init__(self, shape: ModelShape = ModelShape(), seed: int = 0):
        shape.validate()
        self.shape = shape
        self.classes = CLASSES
        rng = np.random.default_rng([seed, 0x6D6F646C])
        s = shape
        self.params: dict[str, np.ndarray] = {}

        def init(name, *dims, scale=None):
            if scale is None:
                scale = 1.0 / np.sqrt(dims[0])
            self.params[name] = rng.normal(0.0, scale, size=dims)

        def zeros(name, *dims):
            self.params[name] = np.zeros(dims)

        init("embed.w", s.patch_dim, s.embed_dim)
        zeros("embed.b", s.embed_dim)
        init("pos", s.n_patches, s.embed_dim, scale=0.02)
        for layer in range(s.n_layers):
            p = f"enc{layer}."
            self.params[p + "ln1.g"] = np.ones(s.embed_dim)
            zeros(p + "ln1.b", s.embed_dim)
            init(p + "attn.wq", s.embed_dim, s.embed_dim)
            zeros(p + "attn.bq", s.embed_dim)
            init(p + "attn.wk", s.embed_dim, s.embed_dim)
            zeros(p + "attn.bk", s.embed_dim)
            init(p + "attn.wv", s.embed_dim, s.embed_dim)
            zeros(p + "attn.bv", s.embed_dim)
            init(p + "attn.wo", s.embed_dim, s.embed_dim)
            zeros(p + "attn.bo", s.embed_dim)
            self.params[p + "ln2.g"] = np.ones(s.embed_dim)
            zeros(p + "ln2.b", s.embed_dim)
            init(p + "mlp.w1", s.embed_dim, s.mlp_dim)
            zeros(p + "mlp.b1", s.mlp_dim)
            init(p + "mlp.w2", s.mlp_dim, s.embed_dim)
            zeros(p + "mlp.b2", s.embed_dim)
        init("head.w", s.embed_dim, len(CLASSES))
        zeros("head.b", len(CLASSES))

    # -- forward / backward -------------------------------------------------

    def _patches(self, x: np.ndarray) -> np.ndarray:
        s = self.shape
        b = x.shape[0]
        side = s.input_size // s.patch_size
        p = x.reshape(b, side, s.patch_size, side, s.patch_size)
        return p.transpose(0, 1, 3, 2, 4).reshape(b, s.n_patches, s.patch_dim)

    def forward(self, x: np.ndarray):
        """Logits (batch, n_classes) and the cache needed for backward."""
        s = self.shape
        p = self.params
        patches = self._patches(np.asarray(x, dtype=np.float64))
        h = _linear(patches, p["embed.w"], p["embed.b"]) + p["pos"]
        cache: dict = {"patches": patches, "layers": []}
        for layer in range(s.n_layers):
            pre = f"enc{layer}."
            lc: dict = {"h_in": h}
            n1, lc["ln1"] = _layernorm(h, p[pre + "ln1.g"], p[pre + "ln1.b"])
            lc["n1"] = n1
            q = _linear(n1, p[pre + "attn.wq"], p[pre + "attn.bq"])
            k = _linear(n1, p[pre + "attn.wk"], p[pre + "attn.bk"])
            v = _linear(n1, p[pre + "attn.wv"], p[pre + "attn.bv"])
            bsz, t, _ = q.shape
            qh = q.reshape(bsz, t, s.n_heads, s.head_dim).transpose(0, 2, 1, 3)
            kh = k.reshape(bsz, t, s.n_heads, s.head_dim).transpose(0, 2, 1, 3)
            vh = v.reshape(bsz, t, s.n_heads, s.head_dim).transpose(0, 2, 1, 3)
            scores = qh @ kh.transpose(0, 1, 3, 2) / np.sqrt(s.head_dim)
            attn = _softmax(scores, axis=-1)
            ctx = attn @ vh
            merged = ctx.transpose(0, 2, 1, 3).reshape(bsz, t, s.embed_dim)
            lc.update(qh=qh, kh=kh, vh=vh, attn=attn, merged=merged)
            a_out = _linear(merged, p[pre + "attn.wo"], p[pre + "attn.bo"])
            h = h + a_out
            lc["h_mid"] = h
            n2, lc["ln2"] = _layernorm(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
            lc["n2"] = n2
            m1 = _linear(n2, p[pre + "mlp.w1"], p[pre + "mlp.b1"])
            relu = np.maximum(m1, 0.0)
            lc.update(m1=m1, relu=relu)
            h = h + _linear(relu, p[pre + "mlp.w2"], p[pre + "mlp.b2"])
            cache["layers"].append(lc)
        pooled = h.mean(axis=1)
        cache["pooled"] = pooled
        logits = _linear(pooled, p["head.w"], p["head.b"])
        return logits, cache

    def backward(self, dlogits: np.ndarray, cache: dict) -> dict[str, np.ndarray]:
        s = self.shape
        p = self.params
        grads: dict[str, np.ndarray] = {}
        dpooled, grads["head.w"], grads["head.b"] = _linear_back(
            dlogits, cache["pooled"], p["head.w"]
        )
        dh = np.repeat(dpooled[:, None, :], s.n_patches, axis=1) / s.n_patches
        for layer in reversed(range(s.n_layers)):
            pre = f"enc{layer}."
            lc = cache["layers"][layer]
            # MLP block
            drelu, grads[pre + "mlp.w2"], grads[pre + "mlp.b2"] = _linear_back(
                dh, lc["relu"], p[pre + "mlp.w2"]
            )
            dm1 = drelu * (lc["m1"] > 0.0)
            dn2, grads[pre + "mlp.w1"], grads[pre + "mlp.b1"] = _linear_back(
                dm1, lc["n2"], p[pre + "mlp.w1"]
            )
            dh_mid, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = _layernorm_back(
                dn2, lc["ln2"], p[pre + "ln2.g"]
            )
            dh = dh + dh_mid
            # Attention block
            dmerged, grads[pre + "attn.wo"], grads[pre + "attn.bo"] = _linear_back(
                dh, lc["merged"], p[pre + "attn.wo"]
            )
            bsz, t = dmerged.shape[0], dmerged.shape[1]
            dctx = dmerged.reshape(bsz, t, s.n_heads, s.head_dim).transpose(0, 2, 1, 3)
            dattn = dctx @ lc["vh"].transpose(0, 1, 3, 2)
            dvh = lc["attn"].transpose(0, 1, 3, 2) @ dctx
            attn = lc["attn"]
            dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
            dscores /= np.sqrt(s.head_dim)
            dqh = dscores @ lc["kh"]
            dkh = dscores.transpose(0, 1, 3, 2) @ lc["qh"]
            dq = dqh.transpose(0, 2, 1, 3).reshape(bsz, t, s.embed_dim)
            dk = dkh.transpose(0, 2, 1, 3).reshape(bsz, t, s.embed_dim)
            dv = dvh.transpose(0, 2, 1, 3).reshape(bsz, t, s.embed_dim)
            dn1_q, grads[pre + "attn.wq"], grads[pre + "attn.bq"] = _linear_back(
                dq, lc["n1"], p[pre + "attn.wq"]
            )
            dn1_k, grads[pre + "attn.wk"], grads[pre + "attn.bk"] = _linear_back(
                dk, lc["n1"], p[pre + "attn.wk"]
            )
            dn1_v, grads[pre + "attn.wv"], grads[pre + "attn.bv"] = _linear_back(
                dv, lc["n1"], p[pre + "attn.wv"]
            )
            dh_in, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = _layernorm_back(
                dn1_q + dn1_k + dn1_v, lc["ln1"], p[pre + "ln1.g"]
            )
            dh = dh + dh_in
        grads["pos"] = dh.sum(axis=0)
        _, grads["embed.w"], grads["embed.b"] = _linear_back(
            dh, cache["patches"], p["embed.w"]
        )
        return grads

    # -- losses / inference --------------------------------------------------

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        """Mean cross-entropy over the batch plus gradients for every parameter."""
        logits, cache = self.forward(x)
        idx = self._label_indices(labels)
        probs = _softmax(logits, axis=-1)
        batch = len(idx)
        loss = float(-np.log(probs[np.arange(batch), idx] + 1e-300).mean())
        dlogits = probs.copy()
        dlogits[np.arange(batch), idx] -= 1.0
        dlogits /= batch
        return loss, self.backward(dlogits, cache)

    def _label_indices(self, labels: np.ndarray) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        try:
            return np.array([lookup[int(v)] for v in labels])
        except KeyError as exc:
            raise ValueError(f"label {exc} outside class set {self.classes}") from exc

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return _softmax(logits, axis=-1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        probs = self.predict_proba(x)
        return np.array([self.classes[i] for i in probs.argmax(axis=-1)])

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        names = sorted(self.params)
        header = {
            "format_version": 1,
            "classes": list(self.classes),
            "shape": {
                "input_size": self.shape.input_size,
                "patch_size": self.shape.patch_size,
                "embed_dim": self.shape.embed_dim,
                "n_heads": self.shape.n_heads,
                "n_layers": self.shape.n_layers,
                "mlp_dim": self.shape.mlp_dim,
            },
            "params": [{"name": n, "shape": list(self.params[n].shape)} for n in names],
        }
        payload = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)
            for n in names:
                fh.write(self.params[n].astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "AttentionClassifier":
        with open(path, "rb") as fh:
            magic = fh.read(len(MODEL_MAGIC))
            if magic != MODEL_MAGIC:
                raise ModelFormatError(f"{path}: bad model magic {magic!r}")
            (header_len,) = struct.unpack("<I", fh.read(4))
            try:
                header = json.loads(fh.read(header_len).decode("utf-8"))
            except ValueError as exc:
                raise ModelFormatError(f"{path}: unreadable model header") from exc
            model = cls(shape=ModelShape(**header["shape"]))
            for entry in header["params"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape))
                raw = fh.read(count * 4)
                if len(raw) != count * 4:
                    raise ModelFormatError(f"{path}: truncated parameter {entry['name']}")
                if entry["name"] not in model.params or model.params[entry["name"]].shape != shape:
                    raise ModelFormatError(f"{path}: unexpected parameter {entry['name']} {shape}")
                model.params[entry["name"]] = (
                    np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
                )
        return model
