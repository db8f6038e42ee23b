"""Minimal deterministic neural-network engine plus a linear-SVM baseline.

Dense layers, LSTM cells, softmax/MSE/BCE losses and bias-corrected Adam,
all in 64-bit floats with analytically verified gradients (the test suite
checks every backward pass against central finite differences). Training is
bitwise deterministic given (seed, dataset, hyperparameters) on one thread;
inference on frozen parameters is safe for concurrent callers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, IoError, ParseError, ShapeMismatch

CHECKPOINT_MAGIC = b"GSNN0001"
GRAD_CLIP_NORM = 5.0  # global-norm clip for recurrent training


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow on finite inputs).

    The exponent is clipped at +-45, beyond which the result is already 0.0
    or 1.0 to full float64 precision.
    """
    return 1.0 / (1.0 + np.exp(-np.clip(z, -45.0, 45.0)))


def standardize_fit(x: np.ndarray):
    """Per-column mean/std for feature standardization.

    The std is floored relative to the feature scale: a column that is
    nearly constant on the training split must not multiply unseen inputs
    by millions, so the divisor never drops below the floor.
    """
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    floor = 1e-3 * (1.0 + np.abs(mean))
    return mean, np.maximum(std, floor)


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    input_dim: int
    hidden_dim: int
    w_i: np.ndarray  # [H, D+H]
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray  # [H]
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def stacked(self):
        """Gate weights stacked [4H, D+H] and biases [4H], order i,f,o,g."""
        w = np.concatenate([self.w_i, self.w_f, self.w_o, self.w_g], axis=0)
        b = np.concatenate([self.b_i, self.b_f, self.b_o, self.b_g])
        return w, b


@dataclass
class DenseParams:
    w: np.ndarray  # [out, in]
    b: np.ndarray  # [out]
    activation: str = "identity"  # "relu" | "identity" | "softmax"


@dataclass
class ModelParams:
    """Versioned container of all trainable arrays for one task model."""
    kind: str  # FaultType | BusLocator | Congestion | SolarPower | SubsetSurrogate | SvmBaseline
    layers: list = field(default_factory=list)  # LstmParams / DenseParams, input->output
    arrays: dict = field(default_factory=dict)  # frozen constants (feature scalers, SVM weights)
    metadata: dict = field(default_factory=dict)


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmParams:
    bound = 1.0 / np.sqrt(input_dim + hidden_dim)
    def w():
        return rng.uniform(-bound, bound, size=(hidden_dim, input_dim + hidden_dim))
    return LstmParams(
        input_dim=input_dim, hidden_dim=hidden_dim,
        w_i=w(), w_f=w(), w_o=w(), w_g=w(),
        b_i=np.zeros(hidden_dim), b_f=np.zeros(hidden_dim),
        b_o=np.zeros(hidden_dim), b_g=np.zeros(hidden_dim),
    )


def init_dense(in_dim: int, out_dim: int, activation: str,
               rng: np.random.Generator) -> DenseParams:
    bound = 1.0 / np.sqrt(in_dim)
    return DenseParams(
        w=rng.uniform(-bound, bound, size=(out_dim, in_dim)),
        b=np.zeros(out_dim),
        activation=activation,
    )


def param_dict(model: ModelParams) -> dict:
    """Flat name -> array view of every trainable tensor, in layer order."""
    out = {}
    for li, layer in enumerate(model.layers):
        if isinstance(layer, LstmParams):
            for name in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g"):
                out[f"layer{li}.{name}"] = getattr(layer, name)
        else:
            out[f"layer{li}.w"] = layer.w
            out[f"layer{li}.b"] = layer.b
    return out


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

def _step_batch(w_t, b, hd, x, h, c):
    """One cell step; w_t is the stacked gate matrix pre-transposed [D+H, 4H]."""
    inp = np.concatenate([x, h], axis=1)
    za = inp @ w_t + b
    gates = sigmoid(za[:, :3 * hd])
    gi = gates[:, :hd]
    gf = gates[:, hd:2 * hd]
    go = gates[:, 2 * hd:]
    gg = np.tanh(za[:, 3 * hd:])
    c_new = gf * c + gi * gg
    h_new = go * np.tanh(c_new)
    return h_new, c_new, (inp, c, gi, gf, go, gg, c_new)


def lstm_step(params: LstmParams, x, h, c):
    """One LSTM cell application: returns (h', c')."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    c = np.asarray(c, dtype=float)
    if x.shape != (params.input_dim,):
        raise ShapeMismatch(f"x has shape {x.shape}, expected ({params.input_dim},)")
    if h.shape != (params.hidden_dim,) or c.shape != (params.hidden_dim,):
        raise ShapeMismatch(f"state must have shape ({params.hidden_dim},)")
    w, b = params.stacked()
    h_new, c_new, _ = _step_batch(np.ascontiguousarray(w.T), b, params.hidden_dim,
                                  x[None, :], h[None, :], c[None, :])
    return h_new[0], c_new[0]


def lstm_encode(params: LstmParams, trace) -> np.ndarray:
    """Run the cell over all T samples from a zero state; return the final h."""
    samples = trace.samples if hasattr(trace, "samples") else np.asarray(trace, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != params.input_dim:
        raise ShapeMismatch(
            f"trace has shape {samples.shape}, expected (T, {params.input_dim})")
    h, _ = lstm_forward_batch(params, samples[None, :, :], want_cache=False)
    return h[0]


def lstm_forward_batch(params: LstmParams, x_btd: np.ndarray, want_cache: bool = True):
    """Batched unrolled forward pass; x is [B, T, D]. Returns (h_final, caches)."""
    b_sz, t_steps, d = x_btd.shape
    if d != params.input_dim:
        raise ShapeMismatch(f"input dim {d} != {params.input_dim}")
    hd = params.hidden_dim
    w, b = params.stacked()
    w_t = np.ascontiguousarray(w.T)
    h = np.zeros((b_sz, hd))
    c = np.zeros((b_sz, hd))
    caches = [] if want_cache else None
    for t in range(t_steps):
        h, c, cache = _step_batch(w_t, b, hd, x_btd[:, t, :], h, c)
        if want_cache:
            caches.append(cache)
    return h, caches


def lstm_backward_batch(params: LstmParams, caches, dh_final: np.ndarray) -> dict:
    """Backprop through time given the gradient at the final hidden state.

    Per-step gate gradients are collected and reduced with one large matrix
    product at the end (far faster than accumulating rank-B updates).
    Returns gradients keyed like the LstmParams tensor names.
    """
    w, _ = params.stacked()
    hd = params.hidden_dim
    d = params.input_dim
    b_sz = dh_final.shape[0]
    t_steps = len(caches)
    dh = dh_final.copy()
    dc = np.zeros_like(dh)
    dz_all = np.empty((t_steps * b_sz, 4 * hd))
    inp_all = np.empty((t_steps * b_sz, d + hd))
    for k, cache in enumerate(reversed(caches)):
        inp, c_prev, gi, gf, go, gg, c_new = cache
        tc = np.tanh(c_new)
        dc += dh * go * (1.0 - tc * tc)
        dz = dz_all[k * b_sz:(k + 1) * b_sz]
        dz[:, :hd] = (dc * gg) * gi * (1.0 - gi)
        dz[:, hd:2 * hd] = (dc * c_prev) * gf * (1.0 - gf)
        dz[:, 2 * hd:3 * hd] = (dh * tc) * go * (1.0 - go)
        dz[:, 3 * hd:] = (dc * gi) * (1.0 - gg * gg)
        inp_all[k * b_sz:(k + 1) * b_sz] = inp
        dh = (dz @ w)[:, d:]
        dc *= gf
    dw = dz_all.T @ inp_all
    db = dz_all.sum(axis=0)
    return {
        "w_i": dw[:hd], "w_f": dw[hd:2 * hd], "w_o": dw[2 * hd:3 * hd], "w_g": dw[3 * hd:],
        "b_i": db[:hd], "b_f": db[hd:2 * hd], "b_o": db[2 * hd:3 * hd], "b_g": db[3 * hd:],
    }


# ---------------------------------------------------------------------------
# Dense layers
# ---------------------------------------------------------------------------

def _softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def dense_forward(params: DenseParams, x: np.ndarray) -> np.ndarray:
    """Affine map plus activation; accepts a vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.w.shape[1]:
        raise ShapeMismatch(
            f"input dim {x.shape[-1]} != weight columns {params.w.shape[1]}")
    z = x @ params.w.T + params.b
    if params.activation == "relu":
        return np.maximum(z, 0.0)
    if params.activation == "softmax":
        return _softmax(z)
    return z


def mlp_forward(layers, x: np.ndarray):
    """Forward through a stack of DenseParams; returns (output, caches)."""
    caches = []
    out = np.asarray(x, dtype=float)
    for layer in layers:
        z = out @ layer.w.T + layer.b
        caches.append((out, z))
        if layer.activation == "relu":
            out = np.maximum(z, 0.0)
        elif layer.activation == "softmax":
            out = _softmax(z)
        else:
            out = z
    return out, caches


def mlp_backward(layers, caches, d_out: np.ndarray):
    """Backprop a stack of DenseParams given the gradient at the output.

    The final layer must be pre-activation ("identity") or "relu"; softmax
    heads are trained through softmax_xent, which differentiates the fused
    softmax + cross-entropy directly.
    """
    grads = []
    dz = d_out
    for layer, (x_in, z) in zip(reversed(layers), reversed(caches)):
        if layer.activation == "relu":
            dz = dz * (z > 0.0)
        elif layer.activation == "softmax":
            raise ShapeMismatch("softmax layers are trained via softmax_xent")
        dw = dz.T @ x_in
        db = dz.sum(axis=0)
        grads.append({"w": dw, "b": db})
        dz = dz @ layer.w
    grads.reverse()
    return grads, dz


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def softmax_xent(logits: np.ndarray, labels):
    """Mean cross-entropy of softmax(logits) vs integer labels; stabilized.

    Returns (loss, d_loss/d_logits) with the gradient shaped like logits.
    """
    logits = np.asarray(logits, dtype=float)
    squeeze = logits.ndim == 1
    if squeeze:
        logits = logits[None, :]
        labels = np.array([labels])
    labels = np.asarray(labels, dtype=int)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeMismatch("label out of range for logit width")
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = float(-log_p[np.arange(n), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, (grad[0] if squeeze else grad)


def mse(pred, target):
    """Mean squared error and its gradient with respect to pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float((diff * diff).mean()) if diff.size else 0.0
    grad = 2.0 * diff / max(diff.size, 1)
    return loss, grad


def bce_logits(logits, targets):
    """Binary cross-entropy on logits (stable) and its gradient."""
    logits = np.asarray(logits, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if logits.shape != targets.shape:
        raise ShapeMismatch(f"logits shape {logits.shape} != targets {targets.shape}")
    loss = float(np.mean(
        np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))))
    grad = (sigmoid(logits) - targets) / max(logits.size, 1)
    return loss, grad


# ---------------------------------------------------------------------------
# Adam optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    step: int
    m: dict
    v: dict
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        step=0,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_update(state: AdamState, params: dict, grads: dict):
    """Bias-corrected Adam step, applied in place; returns (params, state)."""
    state.step += 1
    t = state.step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient {key} has shape {g.shape}, expected {p.shape}")
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def clip_gradients(grads: dict, max_norm: float = GRAD_CLIP_NORM) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return float(norm)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

def _layer_tensors(layer):
    if isinstance(layer, LstmParams):
        return [(n, getattr(layer, n))
                for n in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")]
    return [("w", layer.w), ("b", layer.b)]


def save_model(model: ModelParams, path) -> None:
    """Write a checkpoint: magic, JSON header with offsets, float64 payload."""
    tensors = []  # (array,) in payload order
    offset = 0

    def register(arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype=float)
        entry = [offset, list(arr.shape)]
        tensors.append(arr)
        offset += arr.size
        return entry

    layers_meta = []
    for layer in model.layers:
        if isinstance(layer, LstmParams):
            meta = {"type": "lstm", "input_dim": layer.input_dim,
                    "hidden_dim": layer.hidden_dim, "tensors": {}}
        else:
            meta = {"type": "dense", "activation": layer.activation, "tensors": {}}
        for name, arr in _layer_tensors(layer):
            meta["tensors"][name] = register(arr)
        layers_meta.append(meta)
    arrays_meta = {name: register(arr) for name, arr in sorted(model.arrays.items())}

    header = {
        "format_version": 1,
        "kind": model.kind,
        "metadata": model.metadata,
        "layers": layers_meta,
        "arrays": arrays_meta,
        "total_floats": offset,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for arr in tensors:
                fh.write(arr.astype("<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_model(path) -> ModelParams:
    """Read a checkpoint written by save_model; bitwise round-trip."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ParseError(f"{path} is not a gridseer checkpoint (bad magic)")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"corrupt checkpoint header in {path}: {exc}") from exc
    payload = np.frombuffer(blob[16 + header_len:], dtype="<f8")
    if payload.size != header["total_floats"]:
        raise ParseError(
            f"checkpoint payload has {payload.size} floats, "
            f"header declares {header['total_floats']}")

    def fetch(entry):
        off, shape = entry
        size = int(np.prod(shape)) if shape else 1
        return payload[off:off + size].reshape(shape).astype(float)

    layers = []
    for meta in header["layers"]:
        if meta["type"] == "lstm":
            kw = {n: fetch(meta["tensors"][n]) for n in meta["tensors"]}
            layers.append(LstmParams(input_dim=meta["input_dim"],
                                     hidden_dim=meta["hidden_dim"], **kw))
        else:
            layers.append(DenseParams(w=fetch(meta["tensors"]["w"]),
                                      b=fetch(meta["tensors"]["b"]),
                                      activation=meta["activation"]))
    arrays = {name: fetch(entry) for name, entry in header["arrays"].items()}
    return ModelParams(kind=header["kind"], layers=layers, arrays=arrays,
                       metadata=header["metadata"])


# ---------------------------------------------------------------------------
# Linear SVM baseline (one-vs-rest, hinge loss + L2, subgradient descent)
# ---------------------------------------------------------------------------

def svm_train(features: np.ndarray, labels, epochs: int = 30, seed: int = 0,
              lam: float = 1e-4, lr0: float = 0.05, batch_size: int = 256) -> ModelParams:
    """Train a linear one-vs-rest SVM; deterministic given the seed."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"features {x.shape} do not match {y.shape[0]} labels")
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabels("svm_train needs at least two classes")

    mean, std = standardize_fit(x)

    n, d = x.shape
    k = classes.size
    targets = np.where(y[:, None] == classes[None, :], 1.0, -1.0)  # [n, k]
    w = np.zeros((k, d))
    b = np.zeros(k)

    rng = np.random.default_rng(seed)
    total_steps = max(1, epochs * ((n + batch_size - 1) // batch_size))
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = (x[idx] - mean) / std
            tb = targets[idx]
            scores = xb @ w.T + b
            viol = (tb * scores) < 1.0
            coeff = np.where(viol, tb, 0.0)  # [B, k]
            grad_w = lam * w - coeff.T @ xb / idx.size
            grad_b = -coeff.mean(axis=0)
            lr = lr0 / (1.0 + 5.0 * step / total_steps)
            w -= lr * grad_w
            b -= lr * grad_b
            step += 1

    return ModelParams(
        kind="SvmBaseline",
        layers=[],
        arrays={"w": w, "b": b, "feat_mean": mean, "feat_std": std,
                "classes": classes.astype(float)},
        metadata={"seed": seed, "epochs": epochs, "lambda": lam, "lr0": lr0},
    )


def svm_predict(model: ModelParams, features: np.ndarray) -> np.ndarray:
    """Predicted labels for a feature matrix (argmax one-vs-rest score)."""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    w = model.arrays["w"]
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"features have {x.shape[1]} columns, model expects {w.shape[1]}")
    xs = (x - model.arrays["feat_mean"]) / model.arrays["feat_std"]
    scores = xs @ w.T + model.arrays["b"]
    classes = model.arrays["classes"]
    return classes[np.argmax(scores, axis=1)].astype(int)
