"""Candidate networks: feed-forward, bias-free, monomial-power activations.

The network computes V(x) by alternating linear maps with element-wise
powers p -> p^d (d >= 2), and has a single activation-free output neuron.
With no bias anywhere and activations vanishing at zero, V(0) = 0 holds by
construction.  The input gradient is accumulated right-to-left from the
pre-activations stored during the forward pass, so no symbolic
differentiation of V is ever needed:

    grad V(x) = W_out * diag(s_k'(p_k)) W_k * ... * diag(s_1'(p_1)) W_1

Three output-layer modes are supported: free weights, weights fixed to
ones, and a positive reparameterization (softplus of an unconstrained
parameter) that keeps every output weight strictly positive.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import VectorField

MODE_FREE = "free"
MODE_ONES = "ones"
MODE_POSITIVE = "positive"
LAST_LAYER_MODES = (MODE_FREE, MODE_ONES, MODE_POSITIVE)


@dataclass(frozen=True)
class NetworkShape:
    input_dim: int
    hidden_widths: tuple[int, ...]
    activation_degrees: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        object.__setattr__(self, "activation_degrees", tuple(self.activation_degrees))
        if self.input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        if len(self.hidden_widths) < 1:
            raise ValueError("need at least one hidden layer")
        if len(self.activation_degrees) != len(self.hidden_widths):
            raise ValueError("one activation degree per hidden layer")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be at least 1")
        if any(d < 2 for d in self.activation_degrees):
            raise ValueError("activation degrees must be at least 2")

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)

    @property
    def total_degree(self) -> int:
        out = 1
        for d in self.activation_degrees:
            out *= d
        return out


@dataclass
class EvalTrace:
    """Layer values and pre-activations from one forward pass.

    layer_values[0] is the input x; layer_values[-1] is the scalar V(x).
    pre_activations[i] is W_{i+1} applied to layer i's value.
    """

    layer_values: list[np.ndarray]
    pre_activations: list[np.ndarray]


# Positive-output reparameterization: w = exp(u), clipped so the effective
# weight never under- or overflows.  The log scale lets the output layer
# span the extreme coefficient ratios wide domains demand within a few
# dozen optimizer steps.
_EXP_CLIP = 700.0


def positive_map(raw: np.ndarray) -> np.ndarray:
    return np.exp(np.clip(raw, -_EXP_CLIP, _EXP_CLIP))


def positive_map_inverse(w: float) -> float:
    if w <= 0:
        raise ValueError("positive weights must be positive")
    return float(np.log(w))


class Lnn:
    """Mutable candidate network.

    hidden_weights[i] has shape (h_{i+1}, h_i) with h_0 = input_dim, acting
    on column conventions W @ z.  out_raw holds the output layer's raw
    parameters of shape (h_k,); the effective output weights depend on the
    mode (see output_weights).
    """

    def __init__(
        self,
        shape: NetworkShape,
        hidden_weights: Sequence[np.ndarray],
        out_raw: np.ndarray,
        last_layer_mode: str,
        seed: int = 0,
    ):
        if last_layer_mode not in LAST_LAYER_MODES:
            raise ValueError(f"unknown last-layer mode {last_layer_mode!r}")
        dims = (shape.input_dim, *shape.hidden_widths)
        if len(hidden_weights) != shape.depth:
            raise ValueError("wrong number of hidden weight matrices")
        for i, w in enumerate(hidden_weights):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(
                    f"layer {i + 1} weights have shape {w.shape}, expected {(dims[i + 1], dims[i])}"
                )
        if out_raw.shape != (shape.hidden_widths[-1],):
            raise ValueError("output weights have the wrong shape")
        self.shape = shape
        self.hidden_weights = [np.array(w, dtype=float) for w in hidden_weights]
        self.out_raw = np.array(out_raw, dtype=float)
        self.last_layer_mode = last_layer_mode
        self.seed = seed

    @property
    def input_dim(self) -> int:
        return self.shape.input_dim

    @property
    def output_weights(self) -> np.ndarray:
        """Effective output weights; strictly positive in positive mode."""
        if self.last_layer_mode == MODE_ONES:
            return np.ones_like(self.out_raw)
        if self.last_layer_mode == MODE_POSITIVE:
            return positive_map(self.out_raw)
        return self.out_raw.copy()

    def copy(self) -> "Lnn":
        return Lnn(
            self.shape,
            [w.copy() for w in self.hidden_weights],
            self.out_raw.copy(),
            self.last_layer_mode,
            self.seed,
        )

    # -- forward / gradient -------------------------------------------------

    def forward(self, x: Sequence[float]) -> tuple[float, EvalTrace]:
        if len(x) != self.input_dim:
            raise ValueError(f"input has {len(x)} coordinates, expected {self.input_dim}")
        z = np.asarray(x, dtype=float)
        layer_values = [z]
        pre_activations = []
        for w, degree in zip(self.hidden_weights, self.shape.activation_degrees):
            p = w @ z
            pre_activations.append(p)
            z = p**degree
            layer_values.append(z)
        v = float(self.output_weights @ z)
        layer_values.append(np.array([v]))
        return v, EvalTrace(layer_values, pre_activations)

    def gradient(self, trace: EvalTrace) -> np.ndarray:
        """Input gradient accumulated from the trace's pre-activations."""
        if len(trace.pre_activations) != self.shape.depth:
            raise ValueError("trace does not match this network's depth")
        row = self.output_weights.copy()
        for w, degree, p in zip(
            reversed(self.hidden_weights),
            reversed(self.shape.activation_degrees),
            reversed(trace.pre_activations),
        ):
            if p.shape != (w.shape[0],):
                raise ValueError("trace does not match this network's layer widths")
            row = (row * degree * p ** (degree - 1)) @ w
        return row

    def gradient_at(self, x: Sequence[float]) -> np.ndarray:
        _, trace = self.forward(x)
        return self.gradient(trace)

    def vdot(self, field: VectorField, x: Sequence[float]) -> float:
        """Lie derivative value grad V(x) . f(x)."""
        if field.dimension != self.input_dim:
            raise ValueError("vector field dimension does not match the network input")
        return float(self.gradient_at(x) @ np.asarray(field.eval_float(list(x))))

    # -- batched versions (row-per-sample conventions) -----------------------

    def forward_batch(self, points: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
        """Values, layer activations, and pre-activations for (m, n) input."""
        z = np.asarray(points, dtype=float)
        activations = [z]
        pres = []
        for w, degree in zip(self.hidden_weights, self.shape.activation_degrees):
            p = z @ w.T
            pres.append(p)
            z = p**degree
            activations.append(z)
        return z @ self.output_weights, activations, pres

    def gradient_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        _, _, pres = self.forward_batch(points)
        rows = np.broadcast_to(self.output_weights, (points.shape[0], self.output_weights.size)).copy()
        for w, degree, p in zip(
            reversed(self.hidden_weights),
            reversed(self.shape.activation_degrees),
            reversed(pres),
        ):
            rows = (rows * degree * p ** (degree - 1)) @ w
        return rows


def init_network(shape: NetworkShape, last_layer_mode: str, seed: int) -> Lnn:
    """Deterministic initialization: zero-mean hidden weights scaled by
    1/sqrt(fan-in); the output layer per mode."""
    rng = np.random.default_rng(seed)
    dims = (shape.input_dim, *shape.hidden_widths)
    hidden = [
        rng.normal(0.0, 1.0 / np.sqrt(dims[i]), size=(dims[i + 1], dims[i]))
        for i in range(shape.depth)
    ]
    h_last = shape.hidden_widths[-1]
    if last_layer_mode == MODE_ONES:
        out_raw = np.ones(h_last)
    elif last_layer_mode == MODE_POSITIVE:
        # Raw parameters near log(1) = 0 so effective weights start near 1.
        out_raw = rng.normal(0.0, 0.1, size=h_last)
    else:
        out_raw = rng.normal(0.0, 1.0 / np.sqrt(h_last), size=h_last)
    return Lnn(shape, hidden, out_raw, last_layer_mode, seed)


# ---------------------------------------------------------------------------
# Checkpoints: plain text, floats via repr() so reload is bit-exact.
# ---------------------------------------------------------------------------

def save_checkpoint(net: Lnn, target: str | Path | io.TextIOBase) -> None:
    lines = [
        "lnn-checkpoint v1",
        f"input_dim: {net.shape.input_dim}",
        "hidden_widths: " + ",".join(map(str, net.shape.hidden_widths)),
        "activation_degrees: " + ",".join(map(str, net.shape.activation_degrees)),
        f"last_layer_mode: {net.last_layer_mode}",
        f"seed: {net.seed}",
    ]
    for i, w in enumerate(net.hidden_weights, start=1):
        lines.append(f"W{i}: " + " ".join(repr(float(v)) for v in w.ravel()))
    lines.append("Wout: " + " ".join(repr(float(v)) for v in net.out_raw))
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def load_checkpoint(source: str | Path | io.TextIOBase) -> Lnn:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    fields: dict[str, str] = {}
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != "lnn-checkpoint v1":
        raise ValueError("not a network checkpoint")
    for line in lines[1:]:
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    shape = NetworkShape(
        int(fields["input_dim"]),
        tuple(int(v) for v in fields["hidden_widths"].split(",")),
        tuple(int(v) for v in fields["activation_degrees"].split(",")),
    )
    dims = (shape.input_dim, *shape.hidden_widths)
    hidden = []
    for i in range(shape.depth):
        flat = np.array([float(v) for v in fields[f"W{i + 1}"].split()])
        hidden.append(flat.reshape(dims[i + 1], dims[i]))
    out_raw = np.array([float(v) for v in fields["Wout"].split()])
    return Lnn(shape, hidden, out_raw, fields["last_layer_mode"], int(fields["seed"]))
