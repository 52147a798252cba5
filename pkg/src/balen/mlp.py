"""Small dense network with exact reverse-mode gradients and Adam.

Everything is float64 numpy. Layers compute x @ W + b with an elementwise
activation between them and a linear head. Per-layer freezing supports the
two-step recipe: pretrain every layer on the ID set, then fine-tune only the
unfrozen tail against the regularized objective while the rest stays
bit-identical.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .jsonio import dump, load
from .kernels import adam_update
from .losses import cross_entropy_loss, total_objective

ACTIVATIONS = ("tanh", "relu")


@dataclass
class Mlp:
    dims: tuple
    activation: str
    weights: list
    biases: list
    frozen: list

    @property
    def feature_dim(self):
        return self.dims[0]

    @property
    def class_count(self):
        return self.dims[-1]

    @property
    def layer_count(self):
        return len(self.dims) - 1


def mlp_init(dims, seed, activation="tanh"):
    """Fresh network, W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise InvalidArgument(f"need at least input and output dims, got {dims}")
    if any(d < 1 for d in dims):
        raise InvalidArgument(f"all layer dims must be positive, got {dims}")
    if activation not in ACTIVATIONS:
        raise InvalidArgument(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims=dims, activation=activation, weights=weights, biases=biases,
               frozen=[False] * (len(dims) - 1))


def clone_model(model):
    return Mlp(dims=model.dims, activation=model.activation,
               weights=[w.copy() for w in model.weights],
               biases=[b.copy() for b in model.biases],
               frozen=list(model.frozen))


def freeze_all_but_last(model):
    """Mark every layer except the classification head as non-trainable."""
    model.frozen = [True] * (model.layer_count - 1) + [False]
    return model


def _check_input(model, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise InvalidArgument(
            f"input shape {x.shape} does not match feature dim {model.feature_dim}")
    return x


def forward_trace(model, x):
    """Logits plus the per-layer inputs needed to run backprop."""
    a = _check_input(model, x)
    inputs = [a]
    last = model.layer_count - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if i == last:
            return z, inputs
        a = np.tanh(z) if model.activation == "tanh" else np.maximum(z, 0.0)
        inputs.append(a)
    raise AssertionError("unreachable")


def forward(model, x):
    logits, _ = forward_trace(model, x)
    return logits


def backprop(model, inputs, grad_logits):
    """Exact gradients {layer: (dW, db)} for unfrozen layers.

    grad_logits must already carry any batch-mean factor; frozen layers get
    no entry but still pass the signal through.
    """
    delta = np.asarray(grad_logits, dtype=np.float64)
    if delta.shape != (inputs[0].shape[0], model.class_count):
        raise InvalidArgument(f"grad_logits shape {delta.shape} does not match model")
    grads = {}
    for i in range(model.layer_count - 1, -1, -1):
        if not model.frozen[i]:
            grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ model.weights[i].T
            a = inputs[i]
            delta = delta * (1.0 - a * a) if model.activation == "tanh" else delta * (a > 0.0)
    return grads


@dataclass
class OptimizerState:
    """Adam moments per trainable tensor, keyed like backprop's grads."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def init_optimizer(model):
    state = OptimizerState()
    for i in range(model.layer_count):
        if not model.frozen[i]:
            state.m[i] = (np.zeros_like(model.weights[i]), np.zeros_like(model.biases[i]))
            state.v[i] = (np.zeros_like(model.weights[i]), np.zeros_like(model.biases[i]))
    return state


def adam_step(model, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update over the gradient dict."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for i, (dw, db) in grads.items():
        if model.frozen[i]:
            raise InvalidArgument(f"gradient supplied for frozen layer {i}")
        adam_update(model.weights[i].ravel(), dw.ravel(),
                    state.m[i][0].ravel(), state.v[i][0].ravel(),
                    lr, beta1, beta2, eps, bc1, bc2)
        adam_update(model.biases[i].ravel(), db.ravel(),
                    state.m[i][1].ravel(), state.v[i][1].ravel(),
                    lr, beta1, beta2, eps, bc1, bc2)


def cosine_lr(lr0, step, total_steps):
    """Half-cosine decay from lr0 at step 0 toward 0 at total_steps."""
    if total_steps < 1:
        raise InvalidArgument(f"total_steps must be positive, got {total_steps}")
    if step < 0 or step > total_steps:
        raise InvalidArgument(f"step {step} outside [0, {total_steps}]")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def pretrain_standard(model, features, labels, epochs, lr=0.01, batch_size=128, seed=0):
    """Plain cross-entropy training over the labeled set; returns loss history."""
    x = _check_input(model, features)
    y = np.asarray(labels, dtype=np.int64)
    n = x.shape[0]
    if y.shape != (n,):
        raise InvalidArgument(f"labels shape {y.shape} does not match {n} samples")
    if epochs < 0:
        raise InvalidArgument("epochs must be nonnegative")
    steps_per_epoch = max(1, -(-n // batch_size))
    total = max(1, epochs * steps_per_epoch)
    state = init_optimizer(model)
    rng = np.random.default_rng(seed)
    history = []
    step = 0
    for _ in range(epochs):
        perm = rng.permutation(n)
        for s in range(steps_per_epoch):
            idx = perm[s * batch_size:(s + 1) * batch_size]
            logits, trace = forward_trace(model, x[idx])
            value, grad = cross_entropy_loss(logits, y[idx])
            adam_step(model, backprop(model, trace, grad), state,
                      cosine_lr(lr, step, total))
            step += 1
            history.append(value)
    return history


class _WrapSampler:
    """Endless shuffled batches over a fixed pool, reshuffling at each wrap."""

    def __init__(self, n, rng):
        self.n = n
        self.rng = rng
        self.perm = rng.permutation(n)
        self.pos = 0

    def take(self, count):
        out = []
        while count > 0:
            if self.pos == self.n:
                self.perm = self.rng.permutation(self.n)
                self.pos = 0
            got = min(count, self.n - self.pos)
            out.append(self.perm[self.pos:self.pos + got])
            self.pos += got
            count -= got
        return np.concatenate(out)


def finetune_balanced(model, id_features, id_labels, ood_features, prior, cfg,
                      epochs, lr=0.001, batch_in=128, batch_out=256, seed=0):
    """Regularized fine-tuning pass; one epoch walks the ID set once.

    OOD batches come from a wrap-around shuffled cursor so every step sees
    fresh auxiliary samples. Optimizer state starts from zero. Returns a
    per-step history of the objective and its terms.
    """
    x_in = _check_input(model, id_features)
    y_in = np.asarray(id_labels, dtype=np.int64)
    x_out = _check_input(model, ood_features)
    n_in, n_out = x_in.shape[0], x_out.shape[0]
    if y_in.shape != (n_in,):
        raise InvalidArgument(f"labels shape {y_in.shape} does not match {n_in} samples")
    if n_out == 0:
        raise InvalidArgument("no auxiliary samples to fine-tune against")
    if all(model.frozen):
        raise InvalidArgument("every layer is frozen; nothing to fine-tune")
    if epochs < 0:
        raise InvalidArgument("epochs must be nonnegative")

    snapshot = clone_model(model) if cfg.z_source == "pretrained" else None
    steps_per_epoch = max(1, -(-n_in // batch_in))
    total = max(1, epochs * steps_per_epoch)
    state = init_optimizer(model)
    ss_in, ss_out = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(ss_in)
    out_sampler = _WrapSampler(n_out, np.random.default_rng(ss_out))
    history = []
    step = 0
    for _ in range(epochs):
        perm = rng.permutation(n_in)
        for s in range(steps_per_epoch):
            idx_in = perm[s * batch_in:(s + 1) * batch_in]
            idx_out = out_sampler.take(batch_out)
            xb_out = x_out[idx_out]
            logits_in, trace_in = forward_trace(model, x_in[idx_in])
            logits_out, trace_out = forward_trace(model, xb_out)
            z_logits = forward(snapshot, xb_out) if snapshot is not None else None
            batch = total_objective(logits_in, y_in[idx_in], logits_out, prior, cfg,
                                    z_logits_out=z_logits)
            grads_in = backprop(model, trace_in, batch.grad_logits_in)
            grads_out = backprop(model, trace_out, batch.grad_logits_out)
            merged = {}
            for i in set(grads_in) | set(grads_out):
                zw = np.zeros_like(model.weights[i])
                zb = np.zeros_like(model.biases[i])
                for g in (grads_in, grads_out):
                    if i in g:
                        zw += g[i][0]
                        zb += g[i][1]
                merged[i] = (zw, zb)
            adam_step(model, merged, state, cosine_lr(lr, step, total))
            step += 1
            history.append({"value": batch.value, **batch.terms})
    return history


def save_model(path, model):
    """Write the network as deterministic JSON; round trips bit-exactly."""
    doc = {
        "dims": list(model.dims),
        "activation": model.activation,
        "frozen": [bool(f) for f in model.frozen],
        "layers": [{"w": w.tolist(), "b": b.tolist()}
                   for w, b in zip(model.weights, model.biases)],
    }
    dump(doc, path)


def load_model(path):
    doc = load(path)
    dims = tuple(int(d) for d in doc["dims"])
    weights = [np.array(layer["w"], dtype=np.float64) for layer in doc["layers"]]
    biases = [np.array(layer["b"], dtype=np.float64) for layer in doc["layers"]]
    model = Mlp(dims=dims, activation=doc["activation"], weights=weights,
                biases=biases, frozen=[bool(f) for f in doc["frozen"]])
    if len(weights) != model.layer_count:
        raise InvalidArgument("layer list does not match dims")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise InvalidArgument(f"layer {i} has wrong shape")
    return model
