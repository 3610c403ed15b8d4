"""DenseNet-style convolutional classifier over scalogram images.

Four softmax outputs over (NSR, AFIB, OTHER, NOISE). Composite layer is
pre-activation: batch norm -> ReLU -> 3x3 convolution, with channel
concatenation inside each dense block; transitions are 1x1 convolution
plus 2x2 average pooling; the head is a final norm/ReLU, global average
pooling and an affine layer.

All layers carry hand-written exact backward passes; gradient correctness
against central finite differences is the module's central numerical
property. Tensors are NHWC. Parameters live in one flat float64 vector
with a named layout; training may run its inner loop in float32 (the
flat vector and all inference surfaces stay float64).
"""
from __future__ import annotations

import ctypes
import hashlib
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .preprocess import Segment, normalize, resample_segment, MODEL_SAMPLING_RATE_HZ
from . import scalogram as sg

CLASS_ORDER = ("NSR", "AFIB", "OTHER", "NOISE")

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.9
_PROB_FLOOR = 1e-12

_CHECKPOINT_MAGIC = b"ECGSTUDY-DNET-1\n"

_M_MMAP_THRESHOLD = -3  # glibc mallopt parameter id
_allocator_tuned = False


def _tune_allocator() -> None:
    """Ask glibc to serve large blocks from the heap instead of mmap.

    The training loop churns through multi-megabyte activation buffers;
    with the default threshold every one round-trips through mmap/munmap
    and the resulting page faults dominate the step time. No-op off glibc.
    """
    global _allocator_tuned
    if _allocator_tuned:
        return
    _allocator_tuned = True
    try:
        ctypes.CDLL(None).mallopt(_M_MMAP_THRESHOLD, 1 << 30)
    except (OSError, AttributeError):
        pass


class ModelError(ValueError):
    pass


class ShapeError(ModelError):
    pass


class NumericError(ArithmeticError):
    """Non-finite value encountered during training."""


@dataclass(frozen=True)
class ModelConfig:
    height: int = 64
    width: int = 256
    channels: int = 1
    n_blocks: int = 3
    layers_per_block: int = 4
    growth_rate: int = 12
    initial_channels: int = 16
    compression: float = 0.5
    n_classes: int = 4

    def __post_init__(self):
        for name in ("height", "width", "channels", "n_blocks", "layers_per_block",
                     "growth_rate", "initial_channels", "n_classes"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be positive")
        if not (0 < self.compression <= 1):
            raise ModelError(f"compression must be in (0, 1], got {self.compression}")
        down = 2 ** (self.n_blocks - 1)  # one 2x2 pool per transition
        if self.height % down or self.width % down:
            raise ModelError(
                f"input {self.height}x{self.width} not divisible by the "
                f"{down}x pooling factor"
            )


@dataclass(frozen=True)
class LayoutEntry:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _build_layout(config: ModelConfig) -> tuple[list[LayoutEntry], list[str], int]:
    """Named trainable tensors plus the list of batch-norm layer names."""
    entries: list[LayoutEntry] = []
    bn_names: list[str] = []
    offset = 0

    def add(name, shape):
        nonlocal offset
        entries.append(LayoutEntry(name, tuple(shape), offset))
        offset += int(np.prod(shape))

    def add_bn(name, channels):
        add(f"{name}.gamma", (channels,))
        add(f"{name}.beta", (channels,))
        bn_names.append(name)
        return channels

    c = config.initial_channels
    add("conv0.w", (3, 3, config.channels, c))
    for b in range(config.n_blocks):
        entry_channels = c
        for l in range(config.layers_per_block):
            # Channel bookkeeping: input to layer l is entry + l * growth.
            assert c == entry_channels + l * config.growth_rate
            add_bn(f"block{b}.layer{l}.bn", c)
            add(f"block{b}.layer{l}.conv.w", (3, 3, c, config.growth_rate))
            c += config.growth_rate
        if b < config.n_blocks - 1:
            add_bn(f"trans{b}.bn", c)
            c_out = max(1, int(np.floor(c * config.compression)))
            add(f"trans{b}.conv.w", (1, 1, c, c_out))
            c = c_out
    add_bn("head.bn", c)
    add("head.fc.w", (c, config.n_classes))
    add("head.fc.b", (config.n_classes,))
    return entries, bn_names, offset


@dataclass
class Params:
    """Flat trainable vector + layout, plus non-trainable norm statistics."""

    config: ModelConfig
    vector: np.ndarray  # float64, 1-D
    layout: tuple[LayoutEntry, ...]
    bn_mean: dict[str, np.ndarray]
    bn_var: dict[str, np.ndarray]

    def view(self, name: str, vector: np.ndarray | None = None) -> np.ndarray:
        vec = self.vector if vector is None else vector
        entry = self._index[name]
        return vec[entry.offset: entry.offset + entry.size].reshape(entry.shape)

    def __post_init__(self):
        self._index = {e.name: e for e in self.layout}

    @property
    def model_version(self) -> str:
        return hashlib.sha256(self.vector.tobytes()).hexdigest()[:12]

    def copy(self) -> "Params":
        return Params(
            config=self.config,
            vector=self.vector.copy(),
            layout=self.layout,
            bn_mean={k: v.copy() for k, v in self.bn_mean.items()},
            bn_var={k: v.copy() for k, v in self.bn_var.items()},
        )


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray  # length 4, order CLASS_ORDER
    model_version: str

    @property
    def predicted_class(self) -> str:
        return CLASS_ORDER[int(np.argmax(self.probabilities))]

    def as_dict(self) -> dict[str, float]:
        return {c: float(p) for c, p in zip(CLASS_ORDER, self.probabilities)}


def init_params(config: ModelConfig, seed: int) -> Params:
    """He-initialized convolutions, identity norms, zeroed affine head."""
    layout, bn_names, total = _build_layout(config)
    rng = np.random.default_rng(seed)
    vector = np.zeros(total, dtype=np.float64)
    params = Params(
        config=config,
        vector=vector,
        layout=tuple(layout),
        bn_mean={n: np.zeros(_bn_channels(layout, n)) for n in bn_names},
        bn_var={n: np.ones(_bn_channels(layout, n)) for n in bn_names},
    )
    for entry in layout:
        v = params.view(entry.name)
        if entry.name.endswith("conv.w") or entry.name == "conv0.w":
            fan_in = int(np.prod(entry.shape[:3]))
            v[...] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=entry.shape)
        elif entry.name.endswith(".gamma"):
            v[...] = 1.0
        # betas and the affine head stay zero
    return params


def _bn_channels(layout, name):
    for e in layout:
        if e.name == f"{name}.gamma":
            return e.shape[0]
    raise KeyError(name)


# ---------------------------------------------------------------------------
# Layer primitives (forward returns a cache consumed by backward)

def _conv2d_forward(x, w):
    kh, kw, ci, co = w.shape
    n, h, wd, _ = x.shape
    if kh == 1 and kw == 1:
        y = (x.reshape(-1, ci) @ w.reshape(ci, co)).reshape(n, h, wd, co)
        return y, (x, w)
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    y = np.zeros((n, h, wd, co), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i:i + h, j:j + wd, :].reshape(-1, ci)
            y += (xs @ w[i, j]).reshape(n, h, wd, co)
    return y, (xp, w)


def _conv2d_backward(cache, dy):
    xc, w = cache
    kh, kw, ci, co = w.shape
    n, h, wd, _ = dy.shape
    dy2 = dy.reshape(-1, co)
    if kh == 1 and kw == 1:
        x = xc
        dw = np.zeros_like(w)
        dw[0, 0] = x.reshape(-1, ci).T @ dy2
        dx = (dy2 @ w.reshape(ci, co).T).reshape(x.shape)
        return dx, dw
    xp = xc
    ph, pw = kh // 2, kw // 2
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i:i + h, j:j + wd, :].reshape(-1, ci)
            dw[i, j] = xs.T @ dy2
            dxp[:, i:i + h, j:j + wd, :] += (dy2 @ w[i, j].T).reshape(n, h, wd, ci)
    dx = dxp[:, ph:ph + h, pw:pw + wd, :]
    return dx, dw


def _bn_forward(x, gamma, beta, running_mean, running_var, train, update_stats):
    if train:
        axes = (0, 1, 2)
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        if update_stats:
            running_mean *= _BN_MOMENTUM
            running_mean += (1 - _BN_MOMENTUM) * mu.astype(np.float64)
            running_var *= _BN_MOMENTUM
            running_var += (1 - _BN_MOMENTUM) * var.astype(np.float64)
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
    ivstd = 1.0 / np.sqrt(var + _BN_EPS)
    xhat = (x - mu) * ivstd
    y = gamma * xhat + beta
    return y, (xhat, ivstd, gamma, train)


def _bn_backward(cache, dy):
    xhat, ivstd, gamma, train = cache
    dgamma = (dy * xhat).sum(axis=(0, 1, 2))
    dbeta = dy.sum(axis=(0, 1, 2))
    dxhat = dy * gamma
    if not train:
        return dxhat * ivstd, dgamma, dbeta
    m = xhat.shape[0] * xhat.shape[1] * xhat.shape[2]
    # Gradient through the batch statistics themselves.
    dx = (ivstd / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 1, 2))
        - xhat * (dxhat * xhat).sum(axis=(0, 1, 2))
    )
    return dx, dgamma, dbeta


def _avgpool2_forward(x):
    n, h, w, c = x.shape
    y = x.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))
    return y, x.shape


def _avgpool2_backward(shape, dy):
    n, h, w, c = shape
    dx = np.repeat(np.repeat(dy, 2, axis=1), 2, axis=2) / 4.0
    return dx.astype(dy.dtype)


# ---------------------------------------------------------------------------
# Full network

def _forward_net(params: Params, x: np.ndarray, train: bool, update_stats: bool,
                 vector: np.ndarray | None = None):
    """Logits plus a tape of composite-step caches for the backward pass.

    Tape entries (reverse-walked by :func:`_backward_net`):
      ("dense", layer_name, c_prev, bn_cache, relu_mask, conv_cache)
      ("trans", name, bn_cache, relu_mask, conv_cache, pool_shape)
      ("head",  feat, relu_mask, bn_cache, gap_shape)
      ("conv0", conv_cache)
    """
    cfg = params.config
    vec = params.vector if vector is None else vector
    tape = []

    def bn(name, h):
        return _bn_forward(
            h, params.view(f"{name}.gamma", vec).astype(h.dtype, copy=False),
            params.view(f"{name}.beta", vec).astype(h.dtype, copy=False),
            params.bn_mean[name], params.bn_var[name], train, update_stats,
        )

    def conv(name, h):
        return _conv2d_forward(h, params.view(f"{name}.w", vec).astype(h.dtype, copy=False))

    h, cache0 = conv("conv0", x)
    tape.append(("conv0", cache0))
    for b in range(cfg.n_blocks):
        for l in range(cfg.layers_per_block):
            name = f"block{b}.layer{l}"
            a, bn_cache = bn(f"{name}.bn", h)
            mask = a > 0
            new, conv_cache = conv(f"{name}.conv", a * mask)
            tape.append(("dense", name, h.shape[-1], bn_cache, mask, conv_cache))
            h = np.concatenate([h, new], axis=-1)
        if b < cfg.n_blocks - 1:
            name = f"trans{b}"
            a, bn_cache = bn(f"{name}.bn", h)
            mask = a > 0
            y, conv_cache = conv(f"{name}.conv", a * mask)
            h, pool_shape = _avgpool2_forward(y)
            tape.append(("trans", name, bn_cache, mask, conv_cache, pool_shape))
    a, bn_cache = bn("head.bn", h)
    mask = a > 0
    a = a * mask
    feat = a.mean(axis=(1, 2))
    tape.append(("head", feat, mask, bn_cache, a.shape))
    w = params.view("head.fc.w", vec).astype(h.dtype, copy=False)
    b_ = params.view("head.fc.b", vec).astype(h.dtype, copy=False)
    logits = feat @ w + b_
    return logits, tape


def _backward_net(params: Params, tape, dlogits) -> np.ndarray:
    """Exact reverse-mode gradient; same layout as the trainable vector."""
    grad = np.zeros_like(params.vector)

    def gview(name):
        return params.view(name, grad)

    entry = tape.pop()
    kind, feat, mask, bn_cache, gap_shape = entry
    assert kind == "head"
    w = params.view("head.fc.w").astype(dlogits.dtype)
    gview("head.fc.w")[...] += feat.T @ dlogits
    gview("head.fc.b")[...] += dlogits.sum(axis=0)
    d = dlogits @ w.T
    n, hh, ww, c = gap_shape
    d = np.broadcast_to(d[:, None, None, :] / (hh * ww), gap_shape).astype(dlogits.dtype)
    d = d * mask
    d, dgamma, dbeta = _bn_backward(bn_cache, d)
    gview("head.bn.gamma")[...] += dgamma
    gview("head.bn.beta")[...] += dbeta

    while tape:
        entry = tape.pop()
        if entry[0] == "dense":
            _, name, c_prev, bn_cache, mask, conv_cache = entry
            d_prev = np.ascontiguousarray(d[..., :c_prev])
            d_new = np.ascontiguousarray(d[..., c_prev:])
            da, dw = _conv2d_backward(conv_cache, d_new)
            gview(f"{name}.conv.w")[...] += dw
            da = da * mask
            dh, dgamma, dbeta = _bn_backward(bn_cache, da)
            gview(f"{name}.bn.gamma")[...] += dgamma
            gview(f"{name}.bn.beta")[...] += dbeta
            d = d_prev + dh
        elif entry[0] == "trans":
            _, name, bn_cache, mask, conv_cache, pool_shape = entry
            d = _avgpool2_backward(pool_shape, d)
            da, dw = _conv2d_backward(conv_cache, d)
            gview(f"{name}.conv.w")[...] += dw
            da = da * mask
            d, dgamma, dbeta = _bn_backward(bn_cache, da)
            gview(f"{name}.bn.gamma")[...] += dgamma
            gview(f"{name}.bn.beta")[...] += dbeta
        elif entry[0] == "conv0":
            _, conv_cache = entry
            _, dw = _conv2d_backward(conv_cache, d)
            gview("conv0.w")[...] += dw
        else:  # pragma: no cover
            raise AssertionError(entry[0])
    return grad


# ---------------------------------------------------------------------------
# Public surface

def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_images(config: ModelConfig, images: np.ndarray) -> np.ndarray:
    images = np.asarray(images)
    expected = (config.height, config.width, config.channels)
    if images.ndim == 3:
        images = images[None]
    if images.ndim != 4 or images.shape[1:] != expected:
        raise ShapeError(
            f"expected images of shape (n,) + {expected}, got {images.shape}"
        )
    return images


def forward(params: Params, images: np.ndarray, mode: str = "eval",
            update_stats: bool = False, dtype=np.float64) -> np.ndarray:
    """Class probabilities, one row per image, order ``CLASS_ORDER``.

    Eval mode is a deterministic function of (params, image) alone; train
    mode normalizes with batch statistics (and updates the running ones
    when ``update_stats`` is set).
    """
    if mode not in ("train", "eval"):
        raise ModelError(f"mode must be 'train' or 'eval', got {mode!r}")
    images = _check_images(params.config, images).astype(dtype, copy=False)
    logits, _ = _forward_net(params, images, mode == "train", update_stats)
    return _softmax(logits.astype(np.float64))


def predict(params: Params, image: np.ndarray) -> Prediction:
    probs = forward(params, image, mode="eval")[0]
    return Prediction(probabilities=probs, model_version=params.model_version)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean -log p[label], probabilities clamped below at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.ndim != 1 or len(labels) != len(probs):
        raise ModelError(f"labels shape {labels.shape} does not match {len(probs)} predictions")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ModelError(f"labels must lie in [0, {probs.shape[1]}), got {labels}")
    p = np.clip(probs[np.arange(len(labels)), labels], _PROB_FLOOR, None)
    return float(-np.log(p).mean())


def _loss_grad_probs(params: Params, images: np.ndarray, labels: np.ndarray,
                     update_stats: bool, dtype):
    images = _check_images(params.config, images).astype(dtype, copy=False)
    labels = np.asarray(labels)
    logits, tape = _forward_net(params, images, train=True, update_stats=update_stats)
    probs = _softmax(logits.astype(np.float64))
    loss = cross_entropy(probs, labels)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(labels)), labels] = 1.0
    dlogits = ((probs - onehot) / len(labels)).astype(dtype, copy=False)
    g = _backward_net(params, tape, dlogits)
    return loss, g, probs


def loss_and_grad(params: Params, images: np.ndarray, labels: np.ndarray,
                  update_stats: bool = False, dtype=np.float64) -> tuple[float, np.ndarray]:
    """Cross-entropy loss and its exact gradient (train-mode forward)."""
    loss, g, _ = _loss_grad_probs(params, images, labels, update_stats, dtype)
    return loss, g


def grad(params: Params, images: np.ndarray, labels: np.ndarray,
         dtype=np.float64) -> np.ndarray:
    return loss_and_grad(params, images, labels, dtype=dtype)[1]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 12
    batch_size: int = 16
    seed: int = 0
    dtype: str = "float32"  # inner-loop compute; vector stays float64
    lr_decay: float = 1.0   # multiplicative per-epoch decay
    stat_passes: int = 1    # forward-only passes refreshing batch-norm stats


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train(params: Params, images: np.ndarray, labels: np.ndarray,
          config: TrainConfig = TrainConfig()) -> tuple[Params, list[EpochStats]]:
    """SGD with momentum; deterministic per-epoch shuffling from the seed."""
    images = _check_images(params.config, images)
    labels = np.asarray(labels)
    if len(images) == 0:
        raise ModelError("empty training set")
    present = set(labels.tolist())
    if present != set(range(params.config.n_classes)):
        missing = sorted(set(range(params.config.n_classes)) - present)
        raise ModelError(f"training set is missing classes {missing}")

    _tune_allocator()
    dtype = np.dtype(config.dtype).type
    params = params.copy()
    rng = np.random.default_rng(config.seed)
    velocity = np.zeros_like(params.vector)
    history: list[EpochStats] = []
    lr = config.lr
    for epoch in range(config.epochs):
        order = rng.permutation(len(images))
        losses = []
        correct = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                loss, g, probs = _loss_grad_probs(
                    params, images[idx], labels[idx], update_stats=True, dtype=dtype
                )
            except NumericError as exc:
                raise NumericError(
                    f"training diverged at epoch {epoch}, batch {start // config.batch_size}: {exc}"
                ) from exc
            velocity *= config.momentum
            velocity -= lr * g
            params.vector += velocity
            losses.append(loss * len(idx))
            correct += int((probs.argmax(axis=1) == labels[idx]).sum())
        history.append(EpochStats(
            epoch=epoch,
            loss=float(np.sum(losses) / len(images)),
            accuracy=correct / len(images),
        ))
        lr *= config.lr_decay
    # The running averages lag behind the final weights (they blend batch
    # statistics observed under every intermediate parameter state), which
    # wrecks eval-mode inference after short schedules.  Refresh them with
    # forward-only passes at the final weights.
    for _ in range(config.stat_passes):
        for start in range(0, len(images), config.batch_size):
            forward(params, images[start:start + config.batch_size],
                    mode="train", update_stats=True, dtype=dtype)
    return params, history


# ---------------------------------------------------------------------------
# Inference pipeline over raw segments

class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def segment_to_image(segment: Segment, config: ModelConfig,
                     grid: sg.ScaleGrid | None = None) -> np.ndarray:
    """resample -> normalize -> cwt -> fixed-size model input."""
    grid = grid or sg.scale_grid(n_scales=config.height)
    try:
        seg = resample_segment(segment, MODEL_SAMPLING_RATE_HZ)
    except Exception as exc:
        raise PipelineError("resample", exc) from exc
    try:
        x = normalize(seg.samples)
    except Exception as exc:
        raise PipelineError("normalize", exc) from exc
    try:
        scal = sg.cwt(x, grid, seg.sampling_rate_hz, segment_id=segment.segment_id)
    except Exception as exc:
        raise PipelineError("cwt", exc) from exc
    try:
        return sg.to_model_input(scal, height=config.height, width=config.width)
    except Exception as exc:
        raise PipelineError("to_model_input", exc) from exc


def predict_pipeline(params: Params, segment: Segment) -> Prediction:
    image = segment_to_image(segment, params.config)
    try:
        return predict(params, image)
    except Exception as exc:
        raise PipelineError("forward", exc) from exc


# ---------------------------------------------------------------------------
# Checkpoint file: magic, JSON header, float64 LE payloads, sha256 checksum

def save_checkpoint(params: Params, path) -> None:
    header = {
        "config": params.config.__dict__,
        "layout": [[e.name, list(e.shape), e.offset] for e in params.layout],
        "bn_names": sorted(params.bn_mean),
        "model_version": params.model_version,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = params.vector.astype("<f8").tobytes()
    stats = b"".join(
        params.bn_mean[n].astype("<f8").tobytes() + params.bn_var[n].astype("<f8").tobytes()
        for n in sorted(params.bn_mean)
    )
    body = (
        _CHECKPOINT_MAGIC
        + struct.pack("<I", len(header_bytes)) + header_bytes
        + struct.pack("<Q", len(payload)) + payload
        + struct.pack("<Q", len(stats)) + stats
    )
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as fh:
        fh.write(body + digest)


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> Params:
    blob = open(path, "rb").read()
    if len(blob) < len(_CHECKPOINT_MAGIC) + 32 or not blob.startswith(_CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a model checkpoint")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch")
    off = len(_CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", body, off)
    off += 4
    header = json.loads(body[off:off + hlen].decode("utf-8"))
    off += hlen
    (plen,) = struct.unpack_from("<Q", body, off)
    off += 8
    vector = np.frombuffer(body[off:off + plen], dtype="<f8").astype(np.float64)
    off += plen
    (slen,) = struct.unpack_from("<Q", body, off)
    off += 8
    stats_blob = body[off:off + slen]

    config = ModelConfig(**header["config"])
    layout = tuple(LayoutEntry(n, tuple(s), o) for n, s, o in header["layout"])
    bn_mean, bn_var = {}, {}
    pos = 0
    for name in header["bn_names"]:
        c = _bn_channels(layout, name)
        bn_mean[name] = np.frombuffer(stats_blob, dtype="<f8", count=c, offset=pos).copy()
        pos += 8 * c
        bn_var[name] = np.frombuffer(stats_blob, dtype="<f8", count=c, offset=pos).copy()
        pos += 8 * c
    return Params(config=config, vector=vector, layout=layout,
                  bn_mean=bn_mean, bn_var=bn_var)
