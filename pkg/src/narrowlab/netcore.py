"""Network data model: affine layers, forward evaluation, zero padding,
full-rank perturbation, grid sup-norm comparison, and file round-trip.

A network is a chain of (affine, activation) layers followed by one final
affine map.  Depth counts activation layers; width is the largest hidden
dimension.  All values are immutable after construction and every operation
here is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .activations import Activation


class NetFormatError(ValueError):
    """Raised when a network file is malformed; message names the location."""


class PerturbationError(RuntimeError):
    """Raised when random perturbation cannot reach full rank within budget."""


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> W x + b with W of shape (out_dim, in_dim)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        b = np.array(self.b, dtype=float)
        if W.ndim != 2:
            raise ValueError(f"W must be 2-d, got shape {W.shape}")
        if b.ndim != 1 or b.shape[0] != W.shape[0]:
            raise ValueError(
                f"b must have length {W.shape[0]} to match W, got shape {b.shape}"
            )
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise ValueError("affine map entries must be finite")
        object.__setattr__(self, "W", _freeze(W))
        object.__setattr__(self, "b", _freeze(b))

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def __call__(self, x):
        """Apply to a single vector (d,) or a batch (N, d)."""
        return np.asarray(x, dtype=float) @ self.W.T + self.b


def identity_affine(dim: int) -> AffineMap:
    return AffineMap(np.eye(dim), np.zeros(dim))


@dataclass(frozen=True, eq=False)
class NeuralNet:
    """Alternating affine/activation layers plus a final affine map.

    layers holds (AffineMap, Activation) pairs applied in order; final is the
    closing affine map.  Adjacent dimensions must chain.
    """

    layers: tuple
    final: AffineMap

    def __post_init__(self):
        layers = tuple(self.layers)
        for entry in layers:
            if not (len(entry) == 2 and isinstance(entry[0], AffineMap)
                    and isinstance(entry[1], Activation)):
                raise ValueError("layers must be (AffineMap, Activation) pairs")
        dims = [aff.out_dim for aff, _ in layers]
        for i in range(len(layers) - 1):
            if layers[i + 1][0].in_dim != dims[i]:
                raise ValueError(
                    f"layer {i + 1} expects input dim {layers[i + 1][0].in_dim}, "
                    f"but layer {i} outputs {dims[i]}"
                )
        if layers and self.final.in_dim != dims[-1]:
            raise ValueError(
                f"final affine expects input dim {self.final.in_dim}, "
                f"but last hidden layer outputs {dims[-1]}"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].in_dim if self.layers else self.final.in_dim

    @property
    def output_dim(self) -> int:
        return self.final.out_dim

    @property
    def depth(self) -> int:
        """Number of activation layers."""
        return len(self.layers)

    @property
    def width(self) -> int:
        """Largest hidden dimension (0 for an affine-only net)."""
        return max((aff.out_dim for aff, _ in self.layers), default=0)

    def __call__(self, x):
        return forward(self, x)


def forward(net: NeuralNet, x):
    """Evaluate the network at a vector (d,) or batch (N, d)."""
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != net.input_dim:
        raise ValueError(
            f"input has dimension {arr.shape[-1]}, network expects {net.input_dim}"
        )
    out = arr
    for aff, act in net.layers:
        out = act(aff(out))
    return net.final(out)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box: product of [lows_i, highs_i]."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        lows = np.atleast_1d(np.array(self.lows, dtype=float))
        highs = np.atleast_1d(np.array(self.highs, dtype=float))
        if lows.shape != highs.shape or lows.ndim != 1:
            raise ValueError("lows and highs must be 1-d arrays of equal length")
        if not (np.isfinite(lows).all() and np.isfinite(highs).all()):
            raise ValueError("box bounds must be finite")
        if (lows > highs).any():
            raise ValueError("every low must be <= the matching high")
        object.__setattr__(self, "lows", _freeze(lows))
        object.__setattr__(self, "highs", _freeze(highs))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Box":
        return cls(np.array([lo]), np.array([hi]))

    @property
    def dim(self) -> int:
        return self.lows.shape[0]

    def grid(self, per_axis: int) -> np.ndarray:
        """Uniform grid as an array of shape (per_axis**dim, dim)."""
        if per_axis < 2:
            raise ValueError("per_axis must be >= 2")
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lows, self.highs)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def zero_pad(net: NeuralNet, k: int) -> NeuralNet:
    """Widen every hidden layer to dimension k by zero rows/columns.

    The padded coordinates feed zero weights downstream, so outputs are
    bit-identical to the original network.
    """
    if k < net.width:
        raise ValueError(f"k={k} is below the current width {net.width}")
    if not net.layers:
        return net
    new_layers = []
    prev = net.input_dim
    for aff, act in net.layers:
        W = np.zeros((k, prev))
        W[: aff.out_dim, : aff.in_dim] = aff.W
        b = np.zeros(k)
        b[: aff.out_dim] = aff.b
        new_layers.append((AffineMap(W, b), act))
        prev = k
    Wf = np.zeros((net.final.out_dim, k))
    Wf[:, : net.final.in_dim] = net.final.W
    return NeuralNet(tuple(new_layers), AffineMap(Wf, net.final.b))


def is_full_rank(A, tol_factor: float = 1e-10) -> bool:
    """True iff numerical rank equals min(rows, cols).

    Singular values below tol_factor * max(rows, cols) * s_max count as zero.
    """
    A = np.asarray(A, dtype=float)
    if min(A.shape) == 0:
        return True
    s = np.linalg.svd(A, compute_uv=False)
    cutoff = tol_factor * max(A.shape) * s[0]
    return int(np.count_nonzero(s > cutoff)) == min(A.shape)


def perturb_to_full_rank(net: NeuralNet, delta: float, seed: int,
                         max_retries: int = 100) -> NeuralNet:
    """Nudge rank-deficient weight matrices until every one is full rank.

    Adds uniform noise in (-delta/2, delta/2) entrywise, so the entrywise
    change stays below delta.  Biases are untouched.  Deterministic for a
    fixed seed (PCG64 behind numpy's default_rng).  Raises PerturbationError
    with the retry count if a matrix refuses to become full rank, which
    signals a pathological tolerance setting rather than bad luck.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    rng = np.random.default_rng(seed)
    affines = [aff for aff, _ in net.layers] + [net.final]
    changed = False
    fixed = []
    for idx, aff in enumerate(affines):
        W = aff.W
        tries = 0
        while not is_full_rank(W):
            tries += 1
            if tries > max_retries:
                raise PerturbationError(
                    f"matrix {idx} still rank-deficient after {max_retries} retries"
                )
            W = aff.W + rng.uniform(-delta / 2, delta / 2, size=aff.W.shape)
        if W is aff.W:
            fixed.append(aff)
        else:
            changed = True
            fixed.append(AffineMap(W, aff.b))
    if not changed:
        return net
    acts = [act for _, act in net.layers]
    return NeuralNet(tuple(zip(fixed[:-1], acts)), fixed[-1])


def _as_batch_output(value, n_points):
    out = np.asarray(value, dtype=float)
    if out.ndim == 1:
        out = out.reshape(n_points, 1)
    return out


def sup_gap(f, g, domain: Box, grid_per_axis: int) -> float:
    """Max infinity-norm gap between f and g over a uniform grid on the box.

    f and g may be NeuralNets, Activations, or any callable accepting a
    (N, dim) batch.  The result is a sound-up-to-grid estimate of the true
    supremum.
    """
    pts = domain.grid(grid_per_axis)
    fv = _as_batch_output(f(pts), len(pts))
    gv = _as_batch_output(g(pts), len(pts))
    if fv.shape != gv.shape:
        raise ValueError(f"output shapes differ: {fv.shape} vs {gv.shape}")
    return float(np.max(np.abs(fv - gv)))


def _activation_to_token(act: Activation) -> dict:
    return {"kind": act.kind, "beta": act.beta, "lambda": act.lam}


def _activation_from_token(tok, where: str) -> Activation:
    if not isinstance(tok, dict) or "kind" not in tok:
        raise NetFormatError(f"{where}: activation token must be an object with 'kind'")
    try:
        return Activation(
            str(tok["kind"]),
            beta=float(tok.get("beta", 1.0)),
            lam=float(tok.get("lambda", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise NetFormatError(f"{where}: {exc}") from exc


def _matrix_from(obj, where: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NetFormatError(f"{where}: not a numeric array") from exc
    if arr.ndim != 2:
        raise NetFormatError(f"{where}: expected a matrix (list of rows)")
    return arr

def _vector_from(obj, where: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NetFormatError(f"{where}: not a numeric array") from exc
    if arr.ndim != 1:
        raise NetFormatError(f"{where}: expected a flat vector")
    return arr


def save(net: NeuralNet, path) -> None:
    """Write the network as a human-readable JSON document.

    Floats are serialized with shortest round-trip repr, so load(save(net))
    reproduces every weight bitwise.
    """
    doc = {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "layers": [
            {
                "W": aff.W.tolist(),
                "b": aff.b.tolist(),
                "activation": _activation_to_token(act),
            }
            for aff, act in net.layers
        ],
        "final": {"W": net.final.W.tolist(), "b": net.final.b.tolist()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load(path) -> NeuralNet:
    """Read a network file written by save; weights are taken verbatim."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise NetFormatError("top level: expected an object")
    for key in ("input_dim", "output_dim", "layers", "final"):
        if key not in doc:
            raise NetFormatError(f"top level: missing field '{key}'")
    if not isinstance(doc["layers"], list):
        raise NetFormatError("layers: expected an array")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        where = f"layers[{i}]"
        if not isinstance(entry, dict):
            raise NetFormatError(f"{where}: expected an object")
        for key in ("W", "b", "activation"):
            if key not in entry:
                raise NetFormatError(f"{where}: missing field '{key}'")
        W = _matrix_from(entry["W"], f"{where}.W")
        b = _vector_from(entry["b"], f"{where}.b")
        act = _activation_from_token(entry["activation"], f"{where}.activation")
        try:
            layers.append((AffineMap(W, b), act))
        except ValueError as exc:
            raise NetFormatError(f"{where}: {exc}") from exc
    fin = doc["final"]
    if not isinstance(fin, dict) or "W" not in fin or "b" not in fin:
        raise NetFormatError("final: expected an object with 'W' and 'b'")
    try:
        final = AffineMap(_matrix_from(fin["W"], "final.W"),
                          _vector_from(fin["b"], "final.b"))
        net = NeuralNet(tuple(layers), final)
    except ValueError as exc:
        raise NetFormatError(f"final: {exc}") from exc
    if net.input_dim != int(doc["input_dim"]):
        raise NetFormatError(
            f"input_dim: declared {doc['input_dim']}, matrices give {net.input_dim}"
        )
    if net.output_dim != int(doc["output_dim"]):
        raise NetFormatError(
            f"output_dim: declared {doc['output_dim']}, matrices give {net.output_dim}"
        )
    return net
