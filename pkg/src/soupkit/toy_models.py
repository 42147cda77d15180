"""Toy dense encoders and their training machinery.

The encoder is a stack of dense layers with tanh activations and a final
linear projection to the embedding dimension.  Parameter tensors live in
float32 (the checkpoint dtype); all arithmetic, the optimizer state
included, runs in float64, and trained parameters are rounded back to
float32 once at the end of training.  Forward and backward passes are
written out by hand; every gradient here is checked against central finite
differences in the test suite.

Canonical tensor names: ``layer{i}.weight`` / ``layer{i}.bias`` for the
encoder (i counted from the input), ``head.{name}....`` for task heads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, ShapeMismatch, Unsupported
from .seeding import hash64, make_rng
from .tensor_store import TensorSet

# Embeddings are plain (batch, embed_dim) float64 arrays.
EmbeddingMatrix = np.ndarray

_ENCODER_NAME = re.compile(r"^layer(\d+)\.(weight|bias)$")

CLASSIFIER_W = "head.classifier.weight"
CLASSIFIER_B = "head.classifier.bias"
DECODER_W = "head.decoder.weight"
DECODER_B = "head.decoder.bias"
PROJ_LAYERS = ("head.proj.layer0", "head.proj.layer1")


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    hidden_dims: tuple[int, ...] = (64, 64)
    embed_dim: int = 32

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden_dims, self.embed_dim)
        if any(int(d) < 1 for d in dims):
            raise Unsupported(f"all dimensions must be positive, got {dims}")
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.embed_dim)


@dataclass(frozen=True)
class TrainConfig:
    """Supervised fine-tuning settings.

    Exactly one of ``steps`` and ``epochs`` must be set.  With ``lpft``
    enabled, a linear-probe phase first trains only the classifier head for
    ``lpft_steps`` steps at the fixed ``lpft_lr`` before the full network
    unfreezes.
    """

    steps: int | None = None
    epochs: int | None = None
    batch_size: int = 64
    peak_lr: float = 1e-3
    warmup_frac: float = 0.1
    weight_decay: float = 0.01
    lpft: bool = False
    lpft_steps: int = 200
    lpft_lr: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if (self.steps is None) == (self.epochs is None):
            raise Unsupported("set exactly one of steps and epochs")
        for name in ("steps", "epochs"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise Unsupported(f"{name} must be nonnegative")
        if self.batch_size < 1:
            raise Unsupported("batch_size must be positive")
        if not 0.0 <= self.warmup_frac <= 1.0:
            raise Unsupported("warmup_frac must lie in [0, 1]")
        if self.peak_lr <= 0 or self.lpft_lr <= 0:
            raise Unsupported("learning rates must be positive")
        if self.weight_decay < 0:
            raise Unsupported("weight_decay must be nonnegative")


# ---------------------------------------------------------------------------
# initialization

def _uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_stock(cfg: EncoderConfig, seed: int) -> TensorSet:
    """Freshly initialized encoder: scaled-uniform weights, zero biases.

    Draw order is layer-major from the input, so the result is a pure
    function of (cfg, seed).
    """
    rng = make_rng(seed)
    dims = cfg.dims
    entries = {}
    for i in range(len(dims) - 1):
        entries[f"layer{i}.weight"] = _uniform_fan_in(rng, dims[i], (dims[i], dims[i + 1]))
        entries[f"layer{i}.bias"] = np.zeros(dims[i + 1])
    return TensorSet(entries)


def init_classifier_head(embed_dim: int, num_classes: int, seed: int) -> dict[str, np.ndarray]:
    rng = make_rng(seed)
    return {
        CLASSIFIER_W: _uniform_fan_in(rng, embed_dim, (embed_dim, num_classes)),
        CLASSIFIER_B: np.zeros(num_classes),
    }


def init_decoder_head(embed_dim: int, output_dim: int, seed: int) -> dict[str, np.ndarray]:
    rng = make_rng(seed)
    return {
        DECODER_W: _uniform_fan_in(rng, embed_dim, (embed_dim, output_dim)),
        DECODER_B: np.zeros(output_dim),
    }


def init_projection_head(
    embed_dim: int, seed: int, hidden_dim: int = 32, out_dim: int = 16
) -> dict[str, np.ndarray]:
    rng = make_rng(seed)
    return {
        f"{PROJ_LAYERS[0]}.weight": _uniform_fan_in(rng, embed_dim, (embed_dim, hidden_dim)),
        f"{PROJ_LAYERS[0]}.bias": np.zeros(hidden_dim),
        f"{PROJ_LAYERS[1]}.weight": _uniform_fan_in(rng, hidden_dim, (hidden_dim, out_dim)),
        f"{PROJ_LAYERS[1]}.bias": np.zeros(out_dim),
    }


# ---------------------------------------------------------------------------
# forward / backward

@dataclass(frozen=True)
class _Layer:
    weight: str
    bias: str
    tanh: bool


def _as_workspace(params) -> dict[str, np.ndarray]:
    if isinstance(params, TensorSet):
        return {n: a.astype(np.float64) for n, a in params.items()}
    return params


def workspace(params: TensorSet) -> dict[str, np.ndarray]:
    """Writable float64 copies of every tensor, keyed by name."""
    return {n: a.astype(np.float64) for n, a in params.items()}


def from_workspace(ws: dict[str, np.ndarray], names=None) -> TensorSet:
    """Round float64 working values to float32 storage, once."""
    keep = ws if names is None else {n: ws[n] for n in names}
    return TensorSet({n: a.astype(np.float32) for n, a in keep.items()})


def encoder_names(names) -> list[str]:
    return sorted(n for n in names if _ENCODER_NAME.match(n))


def encoder_stack(names) -> list[_Layer]:
    """Recover the dense stack from canonical tensor names.

    The last layer is linear; every earlier layer is tanh.
    """
    indices = sorted(
        {int(m.group(1)) for n in names if (m := _ENCODER_NAME.match(n))}
    )
    if not indices:
        raise ShapeMismatch("no encoder tensors (layer{i}.weight) present")
    if indices != list(range(len(indices))):
        raise ShapeMismatch(f"encoder layer indices must be contiguous from 0, got {indices}")
    last = indices[-1]
    stack = []
    for i in indices:
        w, b = f"layer{i}.weight", f"layer{i}.bias"
        if w not in names or b not in names:
            raise ShapeMismatch(f"encoder layer {i} is missing weight or bias")
        stack.append(_Layer(w, b, tanh=(i != last)))
    return stack


def projection_stack() -> list[_Layer]:
    return [
        _Layer(f"{PROJ_LAYERS[0]}.weight", f"{PROJ_LAYERS[0]}.bias", tanh=True),
        _Layer(f"{PROJ_LAYERS[1]}.weight", f"{PROJ_LAYERS[1]}.bias", tanh=False),
    ]


def stack_forward(ws, stack, x):
    """Run the dense stack; returns (output, caches for backward)."""
    h = x
    caches = []
    for layer in stack:
        w, b = ws[layer.weight], ws[layer.bias]
        if h.shape[1] != w.shape[0]:
            raise ShapeMismatch(
                f"{layer.weight} expects width {w.shape[0]}, input has width {h.shape[1]}"
            )
        pre = h @ w + b
        out = np.tanh(pre) if layer.tanh else pre
        caches.append((h, out if layer.tanh else None))
        h = out
    return h, caches


def stack_backward(ws, stack, caches, d_out, grads):
    """Accumulate parameter gradients into ``grads``; returns d_input."""
    g = d_out
    for layer, (x_in, tanh_out) in zip(reversed(stack), reversed(caches)):
        if layer.tanh:
            g = g * (1.0 - tanh_out * tanh_out)
        grads[layer.weight] = grads.get(layer.weight, 0.0) + x_in.T @ g
        grads[layer.bias] = grads.get(layer.bias, 0.0) + g.sum(axis=0)
        g = g @ ws[layer.weight].T
    return g


def forward_embed(params, batch) -> EmbeddingMatrix:
    """Embed a (batch, input_dim) array; returns (batch, embed_dim) float64."""
    ws = _as_workspace(params)
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"batch must be 2-D, got shape {x.shape}")
    stack = encoder_stack(list(ws))
    out, _ = stack_forward(ws, stack, x)
    return out


# ---------------------------------------------------------------------------
# losses

def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy_loss_grad(ws, x, y, with_grads: bool = True):
    """Mean softmax cross-entropy of the classifier head over a batch."""
    stack = encoder_stack(list(ws))
    z, caches = stack_forward(ws, stack, x)
    wc, bc = ws[CLASSIFIER_W], ws[CLASSIFIER_B]
    logits = z @ wc + bc
    b = x.shape[0]
    p = softmax(logits)
    loss = float(-np.log(np.maximum(p[np.arange(b), y], 1e-300)).mean())
    if not with_grads:
        return loss, None
    dlogits = p.copy()
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    grads = {CLASSIFIER_W: z.T @ dlogits, CLASSIFIER_B: dlogits.sum(axis=0)}
    d_embed = dlogits @ wc.T
    stack_backward(ws, stack, caches, d_embed, grads)
    return loss, grads


def classifier_logits(params, batch) -> np.ndarray:
    ws = _as_workspace(params)
    if CLASSIFIER_W not in ws:
        raise ShapeMismatch("params carry no classifier head")
    z = forward_embed(ws, batch)
    return z @ ws[CLASSIFIER_W] + ws[CLASSIFIER_B]


# ---------------------------------------------------------------------------
# optimizer and schedule

@dataclass
class AdamWState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adamw_step(
    ws,
    grads,
    state: AdamWState,
    lr: float,
    weight_decay: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One decoupled-weight-decay Adam update, in place, on float64 values.

    Decay multiplies the parameter before the moment update is applied and
    is not folded into the gradient.
    """
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name in sorted(grads):
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(ws[name])
            state.v[name] = np.zeros_like(ws[name])
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        if weight_decay:
            ws[name] -= lr * weight_decay * ws[name]
        ws[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def warmup_steps(total_steps: int, warmup_frac: float) -> int:
    if warmup_frac <= 0.0 or total_steps <= 0:
        return 0
    return min(total_steps, max(1, round(warmup_frac * total_steps)))


def lr_at(step: int, total_steps: int, peak_lr: float, warmup_frac: float) -> float:
    """Linear warmup to peak_lr, then cosine decay toward 0.

    With warmup enabled, step 0 runs at lr 0 and the end of warmup runs at
    exactly peak_lr; the final step's lr approaches 0 as the cosine closes.
    """
    w = warmup_steps(total_steps, warmup_frac)
    if step < w:
        return peak_lr * step / w
    span = max(1, total_steps - w)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * (step - w) / span))


# ---------------------------------------------------------------------------
# batching

def steps_per_epoch(n: int, batch_size: int) -> int:
    return max(1, n // batch_size)


def batch_indices(
    n: int, batch_size: int, step: int, seed: int, tag: str = "epoch"
) -> np.ndarray:
    """Index block for a global step under per-epoch reshuffling.

    Each epoch shuffles 0..n-1 with a stream derived from (seed, tag,
    epoch); batches are consecutive blocks of the permutation and a ragged
    tail smaller than batch_size is dropped (unless the whole set is
    smaller than one batch, which then forms a single full-set batch).
    """
    spe = steps_per_epoch(n, batch_size)
    epoch, pos = divmod(step, spe)
    perm = make_rng(hash64(seed, tag, epoch)).permutation(n)
    if n < batch_size:
        return perm
    return perm[pos * batch_size : (pos + 1) * batch_size]


# ---------------------------------------------------------------------------
# supervised training

def _resolve_steps(cfg, n: int) -> int:
    if cfg.steps is not None:
        return cfg.steps
    return cfg.epochs * steps_per_epoch(n, cfg.batch_size)


def train_supervised(stock: TensorSet, data, cfg: TrainConfig) -> TensorSet:
    """Fine-tune encoder plus classifier head with AdamW and cross-entropy.

    If the stock has no classifier head, one is initialized from a stream
    derived from cfg.seed; if it has one, the class count must match the
    data.  With zero steps (and lpft off) the encoder comes back bit-exact.
    """
    x = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.labels)
    if x.shape[0] < 1:
        raise Unsupported("training data is empty")
    num_classes = int(data.num_classes)

    ws = workspace(stock)
    if CLASSIFIER_W in ws:
        if ws[CLASSIFIER_W].shape[1] != num_classes:
            raise ShapeMismatch(
                f"classifier head expects {ws[CLASSIFIER_W].shape[1]} classes, "
                f"data has {num_classes}"
            )
    else:
        embed_dim = forward_embed(ws, x[:1]).shape[1]
        head = init_classifier_head(embed_dim, num_classes, hash64(cfg.seed, "classifier_head"))
        ws.update(head)

    n = x.shape[0]
    total = _resolve_steps(cfg, n)

    if cfg.lpft:
        head_names = {CLASSIFIER_W, CLASSIFIER_B}
        state = AdamWState()
        for t in range(cfg.lpft_steps):
            idx = batch_indices(n, cfg.batch_size, t, cfg.seed, tag="lpft_epoch")
            loss, grads = cross_entropy_loss_grad(ws, x[idx], y[idx])
            if not math.isfinite(loss):
                raise Diverged(f"probe loss became {loss} at step {t}")
            head_grads = {k: v for k, v in grads.items() if k in head_names}
            adamw_step(ws, head_grads, state, cfg.lpft_lr, cfg.weight_decay)

    state = AdamWState()
    for t in range(total):
        idx = batch_indices(n, cfg.batch_size, t, cfg.seed)
        loss, grads = cross_entropy_loss_grad(ws, x[idx], y[idx])
        if not math.isfinite(loss):
            raise Diverged(f"loss became {loss} at step {t}")
        adamw_step(ws, grads, state, lr_at(t, total, cfg.peak_lr, cfg.warmup_frac), cfg.weight_decay)

    return from_workspace(ws)


# ---------------------------------------------------------------------------
# gradient dispatch

LOSS_IDS = ("cross_entropy", "masked_recon", "infonce", "dim_contrastive")


def gradients(params: TensorSet, batch, loss_id: str, **kwargs) -> dict[str, np.ndarray]:
    """Analytic gradients of one loss with respect to every tensor.

    ``batch`` is (x, y) for cross_entropy and a plain input array for the
    self-supervised losses.  Stochastic draws (masks, augmentations) come
    from ``seed``; evaluating the matching public loss with a generator
    built from the same seed reproduces the identical realization, which is
    what the finite-difference checks rely on.  Tensors a loss does not
    touch get zero gradients.
    """
    if loss_id not in LOSS_IDS:
        raise Unsupported(f"unknown loss {loss_id!r}, expected one of {LOSS_IDS}")
    ws = workspace(params)
    if loss_id == "cross_entropy":
        x, y = batch
        _, grads = cross_entropy_loss_grad(ws, np.asarray(x, np.float64), np.asarray(y))
    else:
        from . import ssl_objectives as ssl

        x = np.asarray(batch, dtype=np.float64)
        rng = make_rng(kwargs.get("seed", 0))
        if loss_id == "masked_recon":
            mask = ssl.draw_recon_mask(rng, x.shape[0], x.shape[1], kwargs.get("mask_ratio", 0.75))
            _, grads = ssl.masked_recon_core(ws, x, mask, with_grads=True)
        elif loss_id == "infonce":
            aug = kwargs.get("aug") or ssl.AugParams()
            v1, v2 = ssl.draw_views(rng, x, aug)
            _, grads = ssl.infonce_core(
                ws, v1, v2, kwargs.get("temperature", 0.1), with_grads=True
            )
        else:
            aug = kwargs.get("aug") or ssl.AugParams()
            v1, v2 = ssl.draw_views(rng, x, aug)
            _, grads = ssl.dim_contrastive_core(
                ws, v1, v2, kwargs.get("variance_target", 1.0), with_grads=True
            )
    for name in params.names:
        if name not in grads:
            grads[name] = np.zeros(params[name].shape, dtype=np.float64)
    return grads
