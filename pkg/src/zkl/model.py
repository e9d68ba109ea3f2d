"""Multi-layer perceptron with a softmax head, written against flat parameters.

Parameters live in one flat float64 vector. Flattening order is frozen:
layer by layer from input to output, each layer's weight matrix
(shape ``(fan_out, fan_in)``) in row-major order followed by its bias.
Logits are ``z = W_L a_{L-1} + b_L`` with ``a_l = act(W_l a_{l-1} + b_l)``.

``relu`` is available but not smooth; the Taylor-remainder checks used
throughout assume ``tanh``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FormatError, RejectedInputError
from .rng import StreamKey, Tag

ACTIVATIONS = ("tanh", "relu")
CHECKPOINT_MAGIC = b"ZKL1"


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 64
    hidden_dims: tuple[int, ...] = (128,)
    output_dim: int = 10
    activation: str = "tanh"
    init_scale: float = 1.0
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.output_dim < 2:
            raise RejectedInputError(f"output_dim must be >= 2, got {self.output_dim}")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise RejectedInputError("all layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise RejectedInputError(f"activation must be one of {ACTIVATIONS}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) for every layer."""
        dims = self.layer_dims
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def num_params(self) -> int:
        return sum(o * i + o for o, i in self.shapes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        return cls(**d)


def _offsets(cfg: MlpConfig):
    off = 0
    for o, i in cfg.shapes:
        yield off, off + o * i, off + o * i + o, (o, i)
        off += o * i + o


def unflatten(theta: np.ndarray, cfg: MlpConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W, b)`` per layer into ``theta``; no copies."""
    theta = check_params(theta, cfg)
    return [(theta[w0:b0].reshape(shape), theta[b0:end]) for w0, b0, end, shape in _offsets(cfg)]


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in layers])


def check_params(theta, cfg: MlpConfig) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (cfg.num_params,):
        raise RejectedInputError(f"expected {cfg.num_params} parameters, got shape {theta.shape}")
    return theta


def _check_input(x, cfg: MlpConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (cfg.input_dim,):
        raise RejectedInputError(f"input must have length {cfg.input_dim}, got shape {x.shape}")
    return x


def init_params(cfg: MlpConfig) -> np.ndarray:
    """Weights ~ N(0, init_scale^2 / fan_in), biases zero."""
    theta = np.zeros(cfg.num_params)
    for layer, (w0, b0, _, (o, i)) in enumerate(_offsets(cfg)):
        gen = StreamKey(cfg.init_seed, layer, 0, Tag.INIT).generator()
        theta[w0:b0] = gen.standard_normal(o * i) * (cfg.init_scale / np.sqrt(i))
    return theta


def _act(pre: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(pre) if kind == "tanh" else np.maximum(pre, 0.0)


def _act_grad(pre: np.ndarray, post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - post * post
    return (pre > 0).astype(np.float64)


def _forward(theta, cfg, x):
    layers = unflatten(theta, cfg)
    acts, pres = [x], []
    a = x
    for W, b in layers[:-1]:
        pre = W @ a + b
        a = _act(pre, cfg.activation)
        pres.append(pre)
        acts.append(a)
    W, b = layers[-1]
    return W @ a + b, layers, acts, pres


def forward_logits(theta, cfg: MlpConfig, x) -> np.ndarray:
    x = _check_input(x, cfg)
    if x.ndim != 1:
        raise RejectedInputError("forward_logits takes a single input vector")
    return _forward(theta, cfg, x)[0]


def logits_batch(theta, cfg: MlpConfig, X) -> np.ndarray:
    """Logits for every row of ``X`` (n x input_dim) -> (n x V)."""
    X = np.atleast_2d(_check_input(X, cfg))
    a = X
    layers = unflatten(theta, cfg)
    for W, b in layers[:-1]:
        a = _act(a @ W.T + b, cfg.activation)
    W, b = layers[-1]
    return a @ W.T + b


def logits_many_params(thetas, cfg: MlpConfig, x) -> np.ndarray:
    """Logits of one input under a stack of parameter vectors (B x d) -> (B x V)."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.ndim != 2 or thetas.shape[1] != cfg.num_params:
        raise RejectedInputError(f"expected (B, {cfg.num_params}) parameter stack, got {thetas.shape}")
    x = _check_input(x, cfg)
    B = thetas.shape[0]
    a = np.broadcast_to(x, (B, cfg.input_dim))
    for layer, (w0, b0, end, (o, i)) in enumerate(_offsets(cfg)):
        W = thetas[:, w0:b0].reshape(B, o, i)
        pre = np.einsum("boi,bi->bo", W, a) + thetas[:, b0:end]
        a = pre if layer == len(cfg.shapes) - 1 else _act(pre, cfg.activation)
    return a


def logsumexp(z, axis=-1) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(z - m), axis=axis))


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return z - np.expand_dims(logsumexp(z), -1)


def _check_label(y, V: int) -> int:
    y = int(y)
    if not 0 <= y < V:
        raise RejectedInputError(f"label {y} out of range for {V} classes")
    return y


def loss_ce(z, y) -> float:
    """Cross-entropy -log softmax(z)[y]."""
    z = np.asarray(z, dtype=np.float64)
    y = _check_label(y, z.shape[-1])
    return float(max(logsumexp(z) - z[y], 0.0))


def mean_loss(theta, cfg: MlpConfig, X, labels) -> float:
    Z = logits_batch(theta, cfg, X)
    labels = np.asarray(labels, dtype=np.int64)
    return float(np.mean(logsumexp(Z) - Z[np.arange(len(labels)), labels]))


def grad_loss_logits(z, y) -> np.ndarray:
    """G = softmax(z) - e_y."""
    z = np.asarray(z, dtype=np.float64)
    y = _check_label(y, z.shape[-1])
    g = softmax(z)
    g[y] -= 1.0
    return g


def _backprop(cfg, layers, acts, pres, cot: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Reverse accumulation of cotangents ``cot`` (V x k) into ``out`` (d x k)."""
    k = cot.shape[1]
    delta = cot
    offsets = list(_offsets(cfg))
    for layer in range(len(layers) - 1, -1, -1):
        w0, b0, end, (o, i) = offsets[layer]
        a_in = acts[layer]
        np.multiply(delta[:, None, :], a_in[None, :, None], out=out[w0:b0].reshape(o, i, k))
        out[b0:end] = delta
        if layer:
            W = layers[layer][0]
            delta = (W.T @ delta) * _act_grad(pres[layer - 1], acts[layer], cfg.activation)[:, None]
    return out


def jacobian_logits(theta, cfg: MlpConfig, x) -> np.ndarray:
    """d x V matrix whose column i is grad_theta z_i(x).

    All V reverse passes run together: the seed cotangent is the identity,
    one column per logit.
    """
    x = _check_input(x, cfg)
    z, layers, acts, pres = _forward(theta, cfg, x)
    V = cfg.output_dim
    return _backprop(cfg, layers, acts, pres, np.eye(V), np.empty((cfg.num_params, V)))


def grad_loss_params(theta, cfg: MlpConfig, x, y) -> np.ndarray:
    """Gradient of the cross-entropy loss w.r.t. the flat parameters (direct backprop)."""
    x = _check_input(x, cfg)
    z, layers, acts, pres = _forward(theta, cfg, x)
    g = grad_loss_logits(z, y)
    return _backprop(cfg, layers, acts, pres, g[:, None], np.empty((cfg.num_params, 1)))[:, 0]


def save_params(path, theta, cfg: MlpConfig) -> None:
    """Write ``ZKL1 | u32 LE json length | json cfg | d float64 LE``."""
    theta = check_params(theta, cfg)
    text = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(text)))
        f.write(text)
        f.write(theta.astype("<f8").tobytes())


def load_params(path) -> tuple[np.ndarray, MlpConfig]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not a ZKL1 checkpoint", 0)
    if len(data) < 8:
        raise FormatError("truncated header", len(data))
    (n,) = struct.unpack_from("<I", data, 4)
    if len(data) < 8 + n:
        raise FormatError("truncated config", len(data))
    cfg = MlpConfig.from_dict(json.loads(data[8:8 + n].decode("utf-8")))
    payload = data[8 + n:]
    if len(payload) != 8 * cfg.num_params:
        raise FormatError(
            f"expected {cfg.num_params} parameters, found {len(payload) / 8:g}", 8 + n + len(payload)
        )
    return np.frombuffer(payload, dtype="<f8").astype(np.float64), cfg
