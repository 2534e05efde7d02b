"""Stacked-GRU detector: activations, initialization, forward, loss, BPTT.

Layout conventions (row vectors throughout):

* a day of T readings is a length-T sequence of scalar inputs;
* layer l consumes a (T, B, in) sequence and emits its states (T, B, N);
* gate weights are stacked in column blocks [z | r | h], so U is (in, 3N),
  W is (N, 3N) and b is (3N,);
* the last layer's final state feeds the (N, 2) output projection. Output
  index 0 is the malicious class, index 1 honest.

With ``literal_layer_softmax`` every layer below the top additionally passes
softmax(s_t V_l + b_l) upward instead of its raw states.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels

PROB_CLIP = 1e-7
CHECKPOINT_FORMAT = "theftgru-model/1"
GATES = ("z", "r", "h")


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    HARD_SIGMOID = "hard_sigmoid"
    TANH = "tanh"
    SOFTMAX = "softmax"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace(" ", "_").replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown activation {name!r}") from None

    @property
    def label(self):
        return {"sigmoid": "Sigmoid", "relu": "Relu", "hard_sigmoid": "Hard Sigmoid",
                "tanh": "Tanh", "softmax": "Softmax"}[self.value]


HIDDEN_ACTIVATIONS = (Activation.SIGMOID, Activation.RELU, Activation.HARD_SIGMOID, Activation.TANH)
OUTPUT_ACTIVATIONS = (Activation.SIGMOID, Activation.SOFTMAX)

_GATE_CODE = {
    Activation.SIGMOID: kernels.SIGMOID,
    Activation.RELU: kernels.RELU,
    Activation.HARD_SIGMOID: kernels.HARD_SIGMOID,
    Activation.TANH: kernels.TANH,
}


def softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def activation(kind, x):
    kind = Activation.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind == Activation.SOFTMAX:
        return softmax(x)
    return kernels.reference.gate(_GATE_CODE[kind], x)[0]


def activation_grad(kind, x):
    """Elementwise derivative; ReLU and hard-sigmoid kinks take the value 0."""
    kind = Activation.parse(kind)
    if kind == Activation.SOFTMAX:
        raise ValueError("softmax is not elementwise; use softmax_backward")
    return kernels.reference.gate(_GATE_CODE[kind], np.asarray(x, dtype=np.float64))[1]


def softmax_backward(p, dp):
    return p * (dp - (dp * p).sum(axis=-1, keepdims=True))


def glorot_uniform(fan_in, fan_out, rng):
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fans must be positive")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class GruLayerParams:
    U: np.ndarray  # (in, 3N)
    W: np.ndarray  # (N, 3N)
    b: np.ndarray  # (3N,)
    V: np.ndarray = None  # (N, 2), literal per-layer projection only
    b_o: np.ndarray = None

    @property
    def N(self):
        return self.W.shape[0]

    @property
    def in_dim(self):
        return self.U.shape[0]

    def block(self, name, gate):
        n = self.N
        i = GATES.index(gate)
        a = getattr(self, name)
        return a[..., i * n:(i + 1) * n]

    # per-gate views
    U_z = property(lambda self: self.block("U", "z"))
    U_r = property(lambda self: self.block("U", "r"))
    U_h = property(lambda self: self.block("U", "h"))
    W_z = property(lambda self: self.block("W", "z"))
    W_r = property(lambda self: self.block("W", "r"))
    W_h = property(lambda self: self.block("W", "h"))
    b_z = property(lambda self: self.block("b", "z"))
    b_r = property(lambda self: self.block("b", "r"))
    b_h = property(lambda self: self.block("b", "h"))


@dataclass
class ModelParams:
    layers: list
    V: np.ndarray  # (N, 2)
    b_o: np.ndarray  # (2,)
    hidden_activation: Activation = Activation.SIGMOID
    output_activation: Activation = Activation.SOFTMAX
    seq_len: int = 48
    literal_layer_softmax: bool = False
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.hidden_activation = Activation.parse(self.hidden_activation)
        self.output_activation = Activation.parse(self.output_activation)
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"{self.hidden_activation} is not a hidden activation")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"{self.output_activation} is not an output activation")
        if not self.layers:
            raise ValueError("need at least one GRU layer")

    @property
    def L(self):
        return len(self.layers)

    @property
    def N(self):
        return self.layers[0].N

    def tensors(self):
        """Name -> array (live references, updated in place by optimizers)."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"layer{i}.U"] = layer.U
            out[f"layer{i}.W"] = layer.W
            out[f"layer{i}.b"] = layer.b
            if layer.V is not None:
                out[f"layer{i}.V"] = layer.V
                out[f"layer{i}.b_o"] = layer.b_o
        out["out.V"] = self.V
        out["out.b_o"] = self.b_o
        return out

    def copy(self):
        m = init_like(self)
        for name, arr in self.tensors().items():
            m.tensors()[name][...] = arr
        return m


def init_model(L, N, seq_len=48, hidden_activation="sigmoid", output_activation="softmax",
               rng=None, literal_layer_softmax=False):
    """Glorot-uniform weights per gate matrix, zero biases."""
    if rng is None:
        raise ValueError("an explicit rng is required")
    if L < 1 or N < 1:
        raise ValueError("L and N must be >= 1")
    layers = []
    in_dim = 1
    for i in range(L):
        U = np.hstack([glorot_uniform(in_dim, N, rng) for _ in GATES])
        W = np.hstack([glorot_uniform(N, N, rng) for _ in GATES])
        layer = GruLayerParams(U, W, np.zeros(3 * N))
        if literal_layer_softmax and i < L - 1:
            layer.V = glorot_uniform(N, 2, rng)
            layer.b_o = np.zeros(2)
            in_dim = 2
        else:
            in_dim = N
        layers.append(layer)
    return ModelParams(layers, glorot_uniform(N, 2, rng), np.zeros(2), hidden_activation,
                       output_activation, seq_len, literal_layer_softmax)


def init_like(model):
    layers = []
    for layer in model.layers:
        layers.append(GruLayerParams(
            np.zeros_like(layer.U), np.zeros_like(layer.W), np.zeros_like(layer.b),
            None if layer.V is None else np.zeros_like(layer.V),
            None if layer.b_o is None else np.zeros_like(layer.b_o)))
    return ModelParams(layers, np.zeros_like(model.V), np.zeros_like(model.b_o),
                       model.hidden_activation, model.output_activation, model.seq_len,
                       model.literal_layer_softmax)


@dataclass
class LayerCache:
    inputs: np.ndarray  # (T, B, in)
    S: np.ndarray  # (T+1, B, N), S[0] = s0
    Z: np.ndarray
    R: np.ndarray
    H: np.ndarray
    GZ: np.ndarray
    GR: np.ndarray
    proj: np.ndarray = None  # literal mode: (T, B, 2) softmax outputs
    mask: np.ndarray = None  # inverted-dropout multipliers on this layer's output


@dataclass
class ForwardCache:
    model: ModelParams
    version: int
    layers: list
    last: np.ndarray  # (B, N) post-dropout final state fed to the output layer
    logits: np.ndarray
    probs: np.ndarray


class StaleCache(RuntimeError):
    pass


def gru_forward(layer, inputs, s0=None, hidden_activation="sigmoid"):
    """Run one GRU layer over ``inputs`` (T, B, in). Returns (states, cache)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != layer.in_dim:
        raise ValueError(f"input shape {inputs.shape} incompatible with in_dim={layer.in_dim}")
    T, B, _ = inputs.shape
    if T < 1:
        raise ValueError("sequence length must be >= 1")
    N = layer.N
    s0 = np.zeros((B, N)) if s0 is None else np.broadcast_to(s0, (B, N))
    xu = (inputs.reshape(T * B, -1) @ layer.U + layer.b).reshape(T, B, 3 * N)
    code = _GATE_CODE[Activation.parse(hidden_activation)]
    S, Z, R, H, GZ, GR = kernels.gru_forward(xu, layer.W, s0, code)
    return S[1:], LayerCache(inputs, S, Z, R, H, GZ, GR)


def gru_backward(layer, cache, dstates):
    """Gradients of one layer given d(loss)/d(states) of shape (T, B, N).

    Returns (grads dict with U, W, b; d inputs; d s0).
    """
    T, B, N = dstates.shape
    dA, ds0 = kernels.gru_backward(np.ascontiguousarray(dstates), cache.S, cache.Z, cache.R,
                                   cache.H, cache.GZ, cache.GR, layer.W)
    flat = dA.reshape(T * B, 3 * N)
    prev = cache.S[:-1].reshape(T * B, N)
    dW = np.empty_like(layer.W)
    dW[:, :2 * N] = prev.T @ flat[:, :2 * N]
    dW[:, 2 * N:] = (prev * cache.R.reshape(T * B, N)).T @ flat[:, 2 * N:]
    grads = {"U": cache.inputs.reshape(T * B, -1).T @ flat, "W": dW, "b": flat.sum(axis=0)}
    dinputs = (flat @ layer.U.T).reshape(T, B, -1)
    return grads, dinputs, ds0


def _dropout_mask(shape, rate, rng):
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def model_forward(model, X, training=False, dropout_rate=0.2, rng=None, masks=None):
    """Class probabilities for a batch of day vectors ``X`` (B, T).

    In training mode inverted dropout multiplies each layer's output sequence;
    pass ``masks`` (one array per layer) to replay a previous draw.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected (batch, T) day vectors, got shape {X.shape}")
    if X.shape[1] != model.seq_len:
        raise ValueError(f"day vectors have length {X.shape[1]}, model expects {model.seq_len}")
    use_dropout = training and (masks is not None or dropout_rate > 0)
    if use_dropout and masks is None and rng is None:
        raise ValueError("training-mode dropout needs an rng")
    seq = X.T[:, :, None]
    caches = []
    for i, layer in enumerate(model.layers):
        states, c = gru_forward(layer, seq, None, model.hidden_activation)
        out = states
        if layer.V is not None:
            c.proj = softmax(states @ layer.V + layer.b_o)
            out = c.proj
        if use_dropout:
            c.mask = masks[i] if masks is not None else _dropout_mask(out.shape, dropout_rate, rng)
            out = out * c.mask
        caches.append(c)
        seq = out
    last = seq[-1]
    logits = last @ model.V + model.b_o
    if model.output_activation == Activation.SOFTMAX:
        probs = softmax(logits)
    else:
        probs = expit(logits)
    return probs, ForwardCache(model, model.version, caches, last, logits, probs)


def one_hot(labels):
    """Malicious (1) -> (1, 0); honest (0) -> (0, 1)."""
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 (honest) or 1 (malicious)")
    return np.stack([labels == 1, labels == 0], axis=1).astype(np.float64)


def _check_one_hot(y):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2 or not np.isin(y, (0.0, 1.0)).all() or not (y.sum(1) == 1).all():
        raise ValueError("targets must be one-hot 2-vectors")
    return y


def cross_entropy(probs, y):
    """Mean binary cross-entropy over both output units, probabilities clipped."""
    y = _check_one_hot(y)
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    S = len(y)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum() / S)


def cross_entropy_grad(probs, y):
    """d(cost)/d(probs); zero where clipping is active."""
    y = _check_one_hot(y)
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    g = -(y / p - (1.0 - y) / (1.0 - p)) / len(y)
    return np.where((probs > PROB_CLIP) & (probs < 1.0 - PROB_CLIP), g, 0.0)


def model_backward(model, cache, y):
    """Gradients of the mean cross-entropy w.r.t. every tensor of ``model``.

    Keys match ``model.tensors()``.
    """
    if cache.model is not model or cache.version != model.version:
        raise StaleCache("forward cache does not belong to the current model parameters")
    y = _check_one_hot(y)
    if len(y) != len(cache.probs):
        raise ValueError("label count differs from the cached batch")
    dp = cross_entropy_grad(cache.probs, y)
    if model.output_activation == Activation.SOFTMAX:
        dlogits = softmax_backward(cache.probs, dp)
    else:
        dlogits = dp * cache.probs * (1.0 - cache.probs)
    grads = {"out.V": cache.last.T @ dlogits, "out.b_o": dlogits.sum(axis=0)}

    top = cache.layers[-1]
    T, B = top.S.shape[0] - 1, top.S.shape[1]
    dout = np.zeros((T, B, model.N if top.proj is None else 2))
    dout[-1] = dlogits @ model.V.T
    for i in range(model.L - 1, -1, -1):
        layer, c = model.layers[i], cache.layers[i]
        if c.mask is not None:
            dout = dout * c.mask
        if c.proj is not None:
            dlog = softmax_backward(c.proj, dout)
            states = c.S[1:]
            grads[f"layer{i}.V"] = states.reshape(T * B, -1).T @ dlog.reshape(T * B, 2)
            grads[f"layer{i}.b_o"] = dlog.sum(axis=(0, 1))
            dstates = dlog @ layer.V.T
        else:
            dstates = dout
        g, dinputs, _ = gru_backward(layer, c, dstates)
        for k, v in g.items():
            grads[f"layer{i}.{k}"] = v
        dout = dinputs
    return grads


def predict_classes(probs):
    """argmax over (malicious, honest); ties go to honest. Returns labels 0/1."""
    probs = np.asarray(probs)
    return (probs[:, 0] > probs[:, 1]).astype(np.int64)


def _tensor_entries(model):
    for i, layer in enumerate(model.layers):
        for name in ("U", "W", "b"):
            for gate in GATES:
                yield f"layer{i}.{name}_{gate}", layer.block(name, gate)
        if layer.V is not None:
            yield f"layer{i}.V", layer.V
            yield f"layer{i}.b_o", layer.b_o
    yield "out.V", model.V
    yield "out.b_o", model.b_o


def save_checkpoint(model):
    """Serialize to a JSON string; per-gate tensors, row-major flat data."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "L": model.L,
        "N": model.N,
        "T": model.seq_len,
        "input_dim": 1,
        "hidden_activation": model.hidden_activation.value,
        "output_activation": model.output_activation.value,
        "literal_layer_softmax": model.literal_layer_softmax,
        "tensors": [{"name": name, "shape": list(a.shape), "data": np.ravel(a).tolist()}
                    for name, a in _tensor_entries(model)],
    }
    return json.dumps(doc)


def load_checkpoint(text):
    doc = json.loads(text)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    model = init_model(doc["L"], doc["N"], doc["T"], doc["hidden_activation"],
                       doc["output_activation"], rng=np.random.default_rng(0),
                       literal_layer_softmax=doc["literal_layer_softmax"])
    targets = dict(_tensor_entries(model))
    seen = set()
    for t in doc["tensors"]:
        dst = targets.get(t["name"])
        if dst is None:
            raise ValueError(f"unexpected tensor {t['name']!r}")
        if list(dst.shape) != t["shape"]:
            raise ValueError(f"tensor {t['name']} has shape {t['shape']}, expected {list(dst.shape)}")
        dst[...] = np.array(t["data"], dtype=np.float64).reshape(t["shape"])
        seen.add(t["name"])
    missing = set(targets) - seen
    if missing:
        raise ValueError(f"checkpoint lacks tensors {sorted(missing)}")
    return model
