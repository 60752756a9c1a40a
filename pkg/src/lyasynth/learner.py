"""Training of candidate networks on a finite sample set.

The loss at a sample s combines both stability conditions through a Leaky
ReLU with a small margin eps:

    L(s) = LR(Vdot(s) + eps, a) + LR(-V(s) + eps, a)

so samples violating either condition are penalized linearly while
satisfied samples are rewarded with slope a.  Vdot is evaluated from the
weight matrices directly: the forward pass carries a tangent vector t_i
alongside each layer value z_i,

    t_0 = f(x),   t_i = s_i'(p_i) * (W_i t_{i-1}),   Vdot = W_out t_k,

which equals grad V(x) . f(x) without symbolic differentiation.  The
backward pass differentiates the full loss (both paths) with respect to
every weight; see loss_and_gradients.  Training is full-batch gradient
descent with per-parameter first/second-moment scaling, so a run is
deterministic given its inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import DomainSpec, VectorField
from .network import MODE_FREE, MODE_ONES, MODE_POSITIVE, Lnn

AUTO = "auto"

INITIAL = "initial"
COUNTEREXAMPLE = "counterexample"
NEIGHBORHOOD = "neighborhood"

LogSink = Callable[[dict], None]


class TrainingOverflowError(RuntimeError):
    """Non-finite loss during training."""

    def __init__(self, epoch: int, sample_index: int, point: tuple[float, ...]):
        super().__init__(
            f"non-finite loss at epoch {epoch} for sample {sample_index} at {point}"
        )
        self.epoch = epoch
        self.sample_index = sample_index
        self.point = point


class SampleSet:
    """Training points inside the domain, with per-point provenance.

    The origin is never admitted: the stability conditions exclude it, and a
    zero sample would contribute a constant, gradient-free loss term.
    """

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        self.points: list[tuple[float, ...]] = []
        self.provenance: list[str] = []
        self._array: np.ndarray | None = None

    def add(self, point: Sequence[float], provenance: str = INITIAL) -> None:
        point = tuple(float(v) for v in point)
        if all(v == 0.0 for v in point):
            raise ValueError("the origin cannot be a training sample")
        if not self.domain.contains([Fraction(v) for v in point]):
            raise ValueError(f"sample {point} lies outside the domain")
        self.points.append(point)
        self.provenance.append(provenance)
        self._array = None

    def extend(self, points: Sequence[Sequence[float]], provenance: str) -> None:
        for p in points:
            self.add(p, provenance)

    def as_array(self) -> np.ndarray:
        if self._array is None:
            self._array = np.array(self.points, dtype=float)
        return self._array

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float = 0.01
    slope_a: float | str = AUTO
    learning_rate: float = 0.05
    max_epochs: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.slope_a != AUTO and not float(self.slope_a) > 0:
            raise ValueError("slope_a must be positive or 'auto'")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")


def leaky_relu(p: float, a: float) -> float:
    """p for p >= 0, a*p otherwise (a > 0)."""
    return p if p >= 0 else a * p


def _resolve_slope(cfg: LearnerConfig) -> float:
    if cfg.slope_a == AUTO:
        raise ValueError("slope 'auto' must be resolved against a sample set first")
    return float(cfg.slope_a)


def sample_loss(
    net: Lnn, field: VectorField, s: Sequence[float], cfg: LearnerConfig
) -> tuple[float, float, float]:
    """Per-sample loss and its two components (Vdot term, V term)."""
    a = _resolve_slope(cfg)
    v, _ = net.forward(s)
    vdot = net.vdot(field, s)
    l1 = leaky_relu(vdot + cfg.epsilon, a)
    l2 = leaky_relu(-v + cfg.epsilon, a)
    return l1 + l2, l1, l2


def classify_samples(
    net: Lnn, field: VectorField, samples: Sequence[Sequence[float]]
) -> tuple[list[tuple[float, ...]], list[tuple[float, ...]]]:
    """Split samples into those satisfying both conditions (Vdot < 0 and
    V > 0) and the rest."""
    points = [tuple(float(v) for v in s) for s in samples]
    if not points:
        return [], []
    x = np.array(points, dtype=float)
    values, _, _ = net.forward_batch(x)
    vdots = np.einsum("ij,ij->i", net.gradient_batch(x), field.eval_float_batch(x))
    good = (vdots < 0.0) & (values > 0.0)
    minus = [p for p, ok in zip(points, good) if ok]
    plus = [p for p, ok in zip(points, good) if not ok]
    return minus, plus


def auto_slope(samples: SampleSet | Sequence[Sequence[float]], field: VectorField) -> float:
    """Slope matched to the dynamics' scale: the reciprocal of |f| at the
    largest-magnitude sample, rounded to the closest power of 10."""
    points = list(samples)
    if not points:
        raise ValueError("cannot derive a slope from an empty sample set")
    largest = max(points, key=lambda p: math.hypot(*p))
    magnitude = math.hypot(*field.eval_float(list(largest)))
    if magnitude == 0.0:
        warnings.warn("f vanishes at the largest-magnitude sample; using slope 1")
        return 1.0
    return 10.0 ** round(-math.log10(magnitude))


# ---------------------------------------------------------------------------
# Full-batch loss gradient.
# ---------------------------------------------------------------------------

@dataclass
class BatchLoss:
    loss: float
    margins_vdot: np.ndarray  # Vdot + eps per sample
    margins_v: np.ndarray  # -V + eps per sample
    values: np.ndarray
    vdots: np.ndarray
    hidden_grads: list[np.ndarray]
    out_grad: np.ndarray  # gradient w.r.t. the raw output parameters


def loss_and_gradients(
    net: Lnn, field: VectorField, x: np.ndarray, epsilon: float, a: float
) -> BatchLoss:
    """Mean loss over the batch and its gradient w.r.t. every weight.

    The backward pass mirrors the paired forward recursions.  Writing
    s1 = s'(p_i) and s2 = s''(p_i), the tangent layer t_i = s1 * (W_i
    t_{i-1}) contributes both through its linear part and through p_i, so
    with adjoints dz/dt for the two chains:

        c_i   = dt_i * s1                       (adjoint of W_i t_{i-1})
        dp_i  = dz_i * s1 + dt_i * q_i * s2     (q_i = W_i t_{i-1})
        dW_i  = dp_i^T z_{i-1} + c_i^T t_{i-1}
        dz_{i-1} = dp_i W_i,   dt_{i-1} = c_i W_i
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    degrees = net.shape.activation_degrees

    # Overflow is not an error here: train() detects the non-finite loss and
    # reports the offending epoch and sample.
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_and_gradients(net, field, x, m, degrees, epsilon, a)


def _loss_and_gradients(net, field, x, m, degrees, epsilon, a) -> BatchLoss:
    # Paired forward pass.
    z_layers = [x]
    t_layers = [field.eval_float_batch(x)]
    p_layers: list[np.ndarray] = []
    q_layers: list[np.ndarray] = []
    for w, d in zip(net.hidden_weights, degrees):
        p = z_layers[-1] @ w.T
        q = t_layers[-1] @ w.T
        p_layers.append(p)
        q_layers.append(q)
        z_layers.append(p**d)
        t_layers.append(d * p ** (d - 1) * q)
    w_out = net.output_weights
    values = z_layers[-1] @ w_out
    vdots = t_layers[-1] @ w_out

    margins_vdot = vdots + epsilon
    margins_v = -values + epsilon
    loss = float(
        np.mean(
            np.where(margins_vdot >= 0, margins_vdot, a * margins_vdot)
            + np.where(margins_v >= 0, margins_v, a * margins_v)
        )
    )

    # dJ/dVdot and dJ/dV; at the kink the negative-branch slope a applies.
    alpha = np.where(margins_vdot > 0, 1.0, a) / m
    beta = -np.where(margins_v > 0, 1.0, a) / m

    out_grad_eff = z_layers[-1].T @ beta + t_layers[-1].T @ alpha
    dz = beta[:, None] * w_out[None, :]
    dt = alpha[:, None] * w_out[None, :]

    hidden_grads: list[np.ndarray] = [np.empty(0)] * len(net.hidden_weights)
    for i in range(len(net.hidden_weights) - 1, -1, -1):
        w, d, p, q = net.hidden_weights[i], degrees[i], p_layers[i], q_layers[i]
        s1 = d * p ** (d - 1)
        s2 = d * (d - 1) * p ** (d - 2)
        c = dt * s1
        dp = dz * s1 + dt * q * s2
        hidden_grads[i] = dp.T @ z_layers[i] + c.T @ t_layers[i]
        dz = dp @ w
        dt = c @ w

    # Map the effective output gradient onto the raw parameters.
    if net.last_layer_mode == MODE_ONES:
        out_grad = np.zeros_like(net.out_raw)
    elif net.last_layer_mode == MODE_POSITIVE:
        out_grad = out_grad_eff / (1.0 + np.exp(-net.out_raw))  # softplus chain
    else:
        out_grad = out_grad_eff
    return BatchLoss(loss, margins_vdot, margins_v, values, vdots, hidden_grads, out_grad)


class _Adam:
    def __init__(self, shapes: list[tuple[int, ...]], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def train(
    net: Lnn,
    field: VectorField,
    samples: SampleSet,
    cfg: LearnerConfig,
    log_sink: LogSink | None = None,
) -> Lnn:
    """Train in place until every sample satisfies Vdot <= -eps and
    V >= eps, or the epoch budget runs out.  Returns the same network."""
    if len(samples) == 0:
        raise ValueError("cannot train on an empty sample set")
    if cfg.max_epochs == 0:
        return net
    a = auto_slope(samples, field) if cfg.slope_a == AUTO else float(cfg.slope_a)
    x = samples.as_array()
    params = list(net.hidden_weights) + [net.out_raw]
    adam = _Adam([p.shape for p in params], cfg.learning_rate)
    for epoch in range(cfg.max_epochs):
        batch = loss_and_gradients(net, field, x, cfg.epsilon, a)
        if not np.isfinite(batch.loss):
            with np.errstate(invalid="ignore"):
                per_sample = batch.margins_vdot + batch.margins_v
            bad = np.flatnonzero(~np.isfinite(per_sample))
            index = int(bad[0]) if bad.size else 0
            raise TrainingOverflowError(epoch, index, samples.points[index])
        if log_sink is not None:
            violations = int(np.sum((batch.vdots >= 0) | (batch.values <= 0)))
            log_sink({"epoch": epoch, "mean_loss": batch.loss, "violations": violations})
        if (batch.margins_vdot <= 0).all() and (batch.margins_v <= 0).all():
            break
        adam.step(params, batch.hidden_grads + [batch.out_grad])
    return net


def resolved_config(cfg: LearnerConfig, samples: SampleSet, field: VectorField) -> LearnerConfig:
    """cfg with 'auto' slope replaced by its concrete value for this set."""
    if cfg.slope_a != AUTO:
        return cfg
    return replace(cfg, slope_a=auto_slope(samples, field))
