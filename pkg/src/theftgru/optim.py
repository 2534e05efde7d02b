"""Gradient-descent update rules used by the hyper-parameter search.

Gradients passed to :meth:`Optimizer.step` are already averaged over the
mini-batch. Parameters are updated in place.
"""

import enum
from dataclasses import dataclass, field

import numpy as np


class OptimizerKind(str, enum.Enum):
    SGD = "SGD"
    ADADELTA = "Adadelta"
    ADAGRAD = "Adagrad"
    ADAM = "Adam"
    ADAMAX = "Adamax"
    NADAM = "Nadam"
    RMSPROP = "RMSprop"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        for k in cls:
            if k.value.lower() == str(name).lower():
                return k
        raise ValueError(f"unknown optimizer {name!r}")


DEFAULT_LR = {
    OptimizerKind.SGD: 0.01,
    OptimizerKind.ADAGRAD: 0.01,
    OptimizerKind.ADADELTA: 1.0,
    OptimizerKind.RMSPROP: 0.001,
    OptimizerKind.ADAM: 0.001,
    OptimizerKind.ADAMAX: 0.002,
    OptimizerKind.NADAM: 0.002,
}


@dataclass
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = None
    rho: float = None  # RMSprop 0.9, Adadelta 0.95
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = None  # 1e-8, Adadelta 1e-6

    def __post_init__(self):
        self.kind = OptimizerKind.parse(self.kind)
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.kind]
        if self.rho is None:
            self.rho = 0.95 if self.kind == OptimizerKind.ADADELTA else 0.9
        if self.epsilon is None:
            self.epsilon = 1e-6 if self.kind == OptimizerKind.ADADELTA else 1e-8
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        for name in ("rho", "beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class OptimizerState:
    step: int = 0
    slots: dict = field(default_factory=dict)

    def slot(self, name, like):
        s = self.slots.get(name)
        if s is None:
            s = self.slots[name] = np.zeros_like(like)
        return s


class NonFiniteGradient(FloatingPointError):
    pass


class Optimizer:
    def __init__(self, config=None, **kwargs):
        self.config = config if config is not None else OptimizerConfig(**kwargs)
        self.state = OptimizerState()

    def step(self, params, grads):
        """Apply one update to every array in ``params`` (dict name -> array)."""
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                raise KeyError(f"no gradient for {name}")
            if np.shape(g) != p.shape:
                raise ValueError(f"gradient for {name} has shape {np.shape(g)}, expected {p.shape}")
            if not np.isfinite(g).all():
                raise NonFiniteGradient(f"non-finite gradient in {name}")
        self.state.step += 1
        for name, p in params.items():
            self._update(name, p, np.asarray(grads[name], dtype=np.float64))
        return params

    def _update(self, name, p, g):
        c, st, t = self.config, self.state, self.state.step
        lr, eps = c.learning_rate, c.epsilon
        k = c.kind
        if k == OptimizerKind.SGD:
            p -= lr * g
        elif k == OptimizerKind.ADAGRAD:
            acc = st.slot(name + ".acc", p)
            acc += g * g
            p -= lr * g / (np.sqrt(acc) + eps)
        elif k == OptimizerKind.RMSPROP:
            v = st.slot(name + ".v", p)
            v *= c.rho
            v += (1 - c.rho) * g * g
            p -= lr * g / (np.sqrt(v) + eps)
        elif k == OptimizerKind.ADADELTA:
            eg = st.slot(name + ".eg2", p)
            ed = st.slot(name + ".edx2", p)
            eg *= c.rho
            eg += (1 - c.rho) * g * g
            dx = np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
            ed *= c.rho
            ed += (1 - c.rho) * dx * dx
            p -= lr * dx
        elif k == OptimizerKind.ADAM:
            m, v = st.slot(name + ".m", p), st.slot(name + ".v", p)
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            m_hat = m / (1 - c.beta1 ** t)
            v_hat = v / (1 - c.beta2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        elif k == OptimizerKind.ADAMAX:
            m, u = st.slot(name + ".m", p), st.slot(name + ".u", p)
            m *= c.beta1
            m += (1 - c.beta1) * g
            np.maximum(c.beta2 * u, np.abs(g), out=u)
            p -= lr / (1 - c.beta1 ** t) * m / (u + eps)
        elif k == OptimizerKind.NADAM:
            m, v = st.slot(name + ".m", p), st.slot(name + ".v", p)
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            # Nesterov look-ahead on the bias-corrected first moment
            m_bar = (c.beta1 * m / (1 - c.beta1 ** (t + 1))
                     + (1 - c.beta1) * g / (1 - c.beta1 ** t))
            v_hat = v / (1 - c.beta2 ** t)
            p -= lr * m_bar / (np.sqrt(v_hat) + eps)
        else:
            raise ValueError(f"unsupported optimizer {k}")
