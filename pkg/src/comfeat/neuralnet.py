"""The fusion regressor, trained from scratch: per-branch 1D convolution and
global max-pooling over the feature axis, concatenation of the pooled branch
codes, a small fully-connected stack with inverted dropout, and a linear
scalar head regressed with MSE.

Everything is explicit numpy in double precision: forward, exact analytic
backprop, Adam, He-uniform init, and a byte-exact weight file format (CFWT).
No ML framework underneath, so every gradient is checkable against finite
differences.

Parameter layout (canonical order, used for gradient accumulation, Adam
updates, and serialization):

    conv{i}.w  (conv_filters, kernel_size)   one per branch, branch order
    conv{i}.b  (conv_filters,)
    fc{j}.w    (fcn_dims[j], fan_in)         hidden stack order
    fc{j}.b    (fcn_dims[j],)
    out.w      (1, fcn_dims[-1])
    out.b      (1,)
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .spectral import FeatureVector

TRAIN = "train"
INFER = "infer"


class BadConfig(ValueError):
    pass


class InputTooShort(ValueError):
    """Conv input shorter than the kernel."""


class BranchMismatch(ValueError):
    """Inputs disagree with the configured branches (count, order, or dim)."""


class EmptyBatch(ValueError):
    pass


class BadProbability(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class BadMagic(ValueError):
    pass


class BadVersion(ValueError):
    pass


class Truncated(ValueError):
    pass


class ConfigMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; branches are (source, input_dim) in fusion
    order. The concatenated code is conv_filters values per branch."""

    branches: tuple
    conv_filters: int = 32
    kernel_size: int = 3
    fcn_dims: tuple = (256, 90)
    dropout_p: float = 0.2
    seed: int = 0

    def __post_init__(self):
        branches = tuple((str(s), int(d)) for s, d in self.branches)
        fcn_dims = tuple(int(d) for d in self.fcn_dims)
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "fcn_dims", fcn_dims)
        if not branches:
            raise BadConfig("at least one branch required")
        if self.kernel_size < 1 or self.conv_filters < 1:
            raise BadConfig("conv_filters and kernel_size must be positive")
        for source, dim in branches:
            if dim < self.kernel_size:
                raise BadConfig(f"branch {source!r} dim {dim} < kernel_size {self.kernel_size}")
        if not fcn_dims or any(d < 1 for d in fcn_dims):
            raise BadConfig("fcn_dims must be non-empty and positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise BadProbability(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.seed < 0:
            raise BadConfig("seed must be non-negative")

    @property
    def fused_dim(self) -> int:
        return self.conv_filters * len(self.branches)

    def to_json(self) -> str:
        doc = {
            "branches": [[s, d] for s, d in self.branches],
            "conv_filters": self.conv_filters,
            "kernel_size": self.kernel_size,
            "fcn_dims": list(self.fcn_dims),
            "dropout_p": self.dropout_p,
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            doc = json.loads(text)
            return cls(
                branches=tuple((s, d) for s, d in doc["branches"]),
                conv_filters=doc["conv_filters"],
                kernel_size=doc["kernel_size"],
                fcn_dims=tuple(doc["fcn_dims"]),
                dropout_p=doc["dropout_p"],
                seed=doc["seed"],
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            if isinstance(exc, (BadConfig, BadProbability)):
                raise ConfigMismatch(str(exc)) from exc
            raise ConfigMismatch(f"bad config JSON: {exc}") from exc


def param_shapes(config: ModelConfig) -> dict:
    """Canonical name -> shape map; iteration order is the serialization
    and accumulation order."""
    shapes: dict[str, tuple] = {}
    for i, (_, dim) in enumerate(config.branches):
        shapes[f"conv{i}.w"] = (config.conv_filters, config.kernel_size)
        shapes[f"conv{i}.b"] = (config.conv_filters,)
    fan_in = config.fused_dim
    for j, width in enumerate(config.fcn_dims):
        shapes[f"fc{j}.w"] = (width, fan_in)
        shapes[f"fc{j}.b"] = (width,)
        fan_in = width
    shapes["out.w"] = (1, fan_in)
    shapes["out.b"] = (1,)
    return shapes


@dataclass
class FusionModel:
    config: ModelConfig
    params: dict

    def __post_init__(self):
        expected = param_shapes(self.config)
        if set(self.params) != set(expected):
            raise ShapeMismatch("parameter names do not match the config")
        for name, shape in expected.items():
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            self.params[name] = arr


def init_model(config: ModelConfig) -> FusionModel:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases, fully driven
    by config.seed."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[1]
            bound = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return FusionModel(config=config, params=params)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv1d(x: np.ndarray, filters: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Valid 1-D convolution (stride 1, single input channel) + ReLU.

    out[f, i] = relu(b_f + sum_k filters[f, k] * x[i + k]), shape
    (n_filters, L - kernel + 1).
    """
    return relu(_correlate(x, filters, biases))


def _correlate(x: np.ndarray, filters: np.ndarray, biases: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    kernel = filters.shape[1]
    if x.shape[0] < kernel:
        raise InputTooShort(f"input length {x.shape[0]} < kernel {kernel}")
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel)  # (T, K)
    return (windows @ filters.T + biases).T  # (F, T)


def global_max_pool(feature_map: np.ndarray) -> np.ndarray:
    """Max over the time/position axis of an (F, T) map."""
    feature_map = np.asarray(feature_map, dtype=np.float64)
    if feature_map.ndim != 2 or feature_map.shape[1] < 1:
        raise ValueError("need an (F, T) map with T >= 1")
    return feature_map.max(axis=1)


def dropout(v: np.ndarray, p: float, mode: str = TRAIN,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout: train mode zeroes elements with probability p and
    scales survivors by 1/(1-p); infer mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise BadProbability(f"p must be in [0, 1), got {p}")
    if mode == INFER or p == 0.0:
        return np.asarray(v, dtype=np.float64)
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = rng.random(np.shape(v)) >= p
    return np.asarray(v, dtype=np.float64) * keep / (1.0 - p)


def _check_inputs(config: ModelConfig, inputs) -> list[np.ndarray]:
    if len(inputs) != len(config.branches):
        raise BranchMismatch(f"model has {len(config.branches)} branches, got {len(inputs)} inputs")
    xs = []
    for vec, (source, dim) in zip(inputs, config.branches):
        if isinstance(vec, FeatureVector):
            if vec.source != source:
                raise BranchMismatch(f"branch expects source {source!r}, got {vec.source!r}")
            values = vec.values
        else:
            values = np.asarray(vec, dtype=np.float64)
        if values.shape != (dim,):
            raise BranchMismatch(f"branch {source!r} expects dim {dim}, got {values.shape}")
        xs.append(values)
    return xs


def _forward(model: FusionModel, xs: list[np.ndarray], train: bool,
             rng: np.random.Generator | None):
    cfg = model.config
    p = model.params
    cache = {"branches": [], "layers": []} if train else None

    pooled_blocks = []
    for i, x in enumerate(xs):
        pre = _correlate(x, p[f"conv{i}.w"], p[f"conv{i}.b"])  # (F, T)
        post = relu(pre)
        argmax = post.argmax(axis=1)  # first max wins on ties
        pooled = post[np.arange(post.shape[0]), argmax]
        pooled_blocks.append(pooled)
        if train:
            cache["branches"].append({"x": x, "pre": pre, "argmax": argmax})

    h = np.concatenate(pooled_blocks)
    if train:
        cache["fused"] = h

    for j in range(len(cfg.fcn_dims)):
        z = p[f"fc{j}.w"] @ h + p[f"fc{j}.b"]
        a = relu(z)
        if train and cfg.dropout_p > 0.0:
            scaled_mask = (rng.random(a.shape) >= cfg.dropout_p) / (1.0 - cfg.dropout_p)
        else:
            scaled_mask = None
        out = a if scaled_mask is None else a * scaled_mask
        if train:
            cache["layers"].append({"h_in": h, "z": z, "mask": scaled_mask})
        h = out

    pred = float((p["out.w"] @ h)[0] + p["out.b"][0])
    if train:
        cache["h_last"] = h
    return pred, cache


def forward(model: FusionModel, inputs, mode: str = INFER,
            rng: np.random.Generator | None = None):
    """Run the fusion network on one FeatureVector per branch.

    Infer mode returns the scalar prediction (dropout disabled); train mode
    returns (prediction, cache) with the activations backprop needs.
    """
    if mode not in (TRAIN, INFER):
        raise ValueError(f"mode must be {TRAIN!r} or {INFER!r}")
    xs = _check_inputs(model.config, inputs)
    train = mode == TRAIN
    if train and rng is None and model.config.dropout_p > 0.0:
        raise ValueError("train mode with dropout needs an rng")
    pred, cache = _forward(model, xs, train, rng)
    return (pred, cache) if train else pred


def mse_loss(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeMismatch(f"pred/target shapes differ: {preds.shape} vs {targets.shape}")
    if preds.size < 1:
        raise EmptyBatch("mse_loss needs at least one element")
    return float(np.mean((preds - targets) ** 2))


def _backward(model: FusionModel, cache: dict, dpred: float, grads: dict):
    cfg = model.config
    p = model.params

    grads["out.w"] += dpred * cache["h_last"][np.newaxis, :]
    grads["out.b"] += dpred
    dh = p["out.w"][0] * dpred

    for j in reversed(range(len(cfg.fcn_dims))):
        layer = cache["layers"][j]
        if layer["mask"] is not None:
            dh = dh * layer["mask"]
        dz = dh * (layer["z"] > 0.0)
        grads[f"fc{j}.w"] += np.outer(dz, layer["h_in"])
        grads[f"fc{j}.b"] += dz
        dh = p[f"fc{j}.w"].T @ dz

    offset = 0
    for i in range(len(cfg.branches)):
        branch = cache["branches"][i]
        dpool = dh[offset : offset + cfg.conv_filters]
        offset += cfg.conv_filters
        pre, argmax, x = branch["pre"], branch["argmax"], branch["x"]
        # max-pool routes each filter's gradient to its (first) argmax
        # position; ReLU then gates it on the pre-activation sign.
        dz_at_max = dpool * (pre[np.arange(pre.shape[0]), argmax] > 0.0)
        kernel = cfg.kernel_size
        windows = np.lib.stride_tricks.sliding_window_view(x, kernel)
        grads[f"conv{i}.w"] += dz_at_max[:, np.newaxis] * windows[argmax]
        grads[f"conv{i}.b"] += dz_at_max


def loss_and_gradients(model: FusionModel, batch,
                       rng: np.random.Generator | None = None):
    """MSE over a batch of (inputs, target) pairs and its exact gradient.

    Dropout masks are drawn once per sample in ascending batch order and
    reused in the backward pass, so the gradients differentiate the realized
    (mask-conditioned) loss. Accumulation order is fixed for determinism.
    """
    batch = list(batch)
    if not batch:
        raise EmptyBatch("empty batch")
    if model.config.dropout_p > 0.0 and rng is None:
        raise ValueError("training with dropout needs an rng")

    grads = {name: np.zeros(shape) for name, shape in param_shapes(model.config).items()}
    n = len(batch)
    loss = 0.0
    for inputs, target in batch:
        xs = _check_inputs(model.config, inputs)
        pred, cache = _forward(model, xs, True, rng)
        residual = pred - float(target)
        loss += residual * residual / n
        _backward(model, cache, 2.0 * residual / n, grads)
    return loss, grads


@dataclass
class AdamState:
    """Adam moments and hyperparameters; m/v are shaped like the params."""

    t: int
    m: dict
    v: dict
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}
        return cls(t=0, m=zeros(), v=zeros(), lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: dict, grads: dict):
    """One Adam update, in place on params and state; returns both.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) with the standard
    bias-corrected moments.
    """
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeMismatch("params, grads, and state must share the same keys")
    for k in params:
        if np.shape(params[k]) != np.shape(grads[k]):
            raise ShapeMismatch(f"{k}: param shape {np.shape(params[k])} vs grad {np.shape(grads[k])}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k in params:
        g = grads[k]
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        params[k] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


# --- CFWT weight files ------------------------------------------------------

WEIGHTS_MAGIC = b"CFWT"
WEIGHTS_VERSION = 1
_WEIGHTS_HEADER = struct.Struct("<4sHI")  # magic, version, config JSON length


def save_weights(model: FusionModel) -> bytes:
    """Serialize config (canonical JSON) + tensors (little-endian float64,
    canonical order). load_weights inverts this bit-exactly."""
    config_json = model.config.to_json().encode("utf-8")
    blob = _WEIGHTS_HEADER.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, len(config_json))
    blob += config_json
    for name in param_shapes(model.config):
        blob += model.params[name].astype("<f8").tobytes()
    return blob


def load_weights(data: bytes) -> FusionModel:
    if len(data) < _WEIGHTS_HEADER.size:
        raise Truncated("shorter than the CFWT header")
    magic, version, json_len = _WEIGHTS_HEADER.unpack_from(data)
    if magic != WEIGHTS_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != WEIGHTS_VERSION:
        raise BadVersion(f"unsupported version {version}")
    pos = _WEIGHTS_HEADER.size
    config_json = data[pos : pos + json_len]
    if len(config_json) < json_len:
        raise Truncated("config JSON cut short")
    try:
        config = ModelConfig.from_json(config_json.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigMismatch(f"config JSON is not UTF-8: {exc}") from exc
    pos += json_len

    params = {}
    for name, shape in param_shapes(config).items():
        n_bytes = 8 * int(np.prod(shape))
        chunk = data[pos : pos + n_bytes]
        if len(chunk) < n_bytes:
            raise Truncated(f"tensor {name} cut short")
        params[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        pos += n_bytes
    return FusionModel(config=config, params=params)


def model_digest(model: FusionModel) -> str:
    """Stable SHA-256 hex digest of the serialized model."""
    return hashlib.sha256(save_weights(model)).hexdigest()


def clone_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}
