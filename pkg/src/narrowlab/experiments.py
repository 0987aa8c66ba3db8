"""Disk-to-disk regression experiments with a deterministic Adam loop.

The target family multiplies the polar angle of a point by an integer while
keeping its radius.  Datasets are lattice samples of the closed unit disk,
built on an integer grid so that train/validation disjointness is exact in
floating point.  Training is full-batch, seeded, and bitwise reproducible on
one platform; the generator is PCG64 (numpy's default_rng), so runs are
reproducible from the seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .activations import Activation
from .netcore import AffineMap, NeuralNet


@dataclass(frozen=True, eq=False)
class Dataset:
    """Input/target pairs with every input inside the closed unit disk."""

    inputs: np.ndarray
    targets: np.ndarray
    role: str = "train"

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float)
        y = np.array(self.targets, dtype=float)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError("inputs and targets must be (N, d) with equal N")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset entries must be finite")
        if x.shape[1] == 2:
            r2 = np.sum(x * x, axis=1)
            if (r2 > 1.0 + 1e-12).any():
                raise ValueError("inputs must lie in the closed unit disk")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def pairs(self):
        return list(zip(self.inputs, self.targets))


def rot_k(p, k: int):
    """Multiply the polar angle by k, keeping the radius; fixes the origin."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != 2:
        raise ValueError("points must be 2-dimensional")
    r = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.stack([r * np.cos(k * theta), r * np.sin(k * theta)], axis=1)
    return out[0] if single else out


def _disk_lattice(step_hundredths: int) -> np.ndarray:
    """Integer lattice points (in hundredths) of [-1,1]^2 inside the disk."""
    us = np.arange(-100, 101, step_hundredths)
    uu, vv = np.meshgrid(us, us, indexing="ij")
    keep = uu * uu + vv * vv <= 100 * 100
    return np.stack([uu[keep], vv[keep]], axis=1)


def gen_disk(k: int):
    """Training and validation sets for the angle-multiplication target.

    Training inputs are the 0.02-spaced lattice points of [-1,1]^2 inside the
    closed unit disk; validation inputs the 0.05-spaced ones minus every point
    already in the training lattice.  Both grids are built from one integer
    lattice in hundredths, so the exclusion (both coordinates even in
    hundredth-of-five units) is exact and the float coordinate sets are
    disjoint, not merely far apart.
    """
    train_units = _disk_lattice(2)
    val_units = _disk_lattice(5)
    shared = (val_units[:, 0] % 2 == 0) & (val_units[:, 1] % 2 == 0)
    val_units = val_units[~shared]
    train_x = train_units / 100.0
    val_x = val_units / 100.0
    return (
        Dataset(train_x, rot_k(train_x, k), role="train"),
        Dataset(val_x, rot_k(val_x, k), role="validation"),
    )


def mse_losses(net: NeuralNet, train: Dataset, val: Dataset):
    """Mean squared errors (train, validation), normalized by N times the
    output dimension."""
    return _mse(net, train), _mse(net, val)


def _mse(f, ds: Dataset) -> float:
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    pred = np.asarray(f(ds.inputs), dtype=float)
    if pred.shape != ds.targets.shape:
        raise ValueError(
            f"output shape {pred.shape} does not match targets {ds.targets.shape}"
        )
    diff = pred - ds.targets
    n_out = ds.targets.shape[1]
    return float(np.sum(diff * diff) / (len(ds) * n_out))


def gradients(net: NeuralNet, batch: Dataset):
    """Reverse-mode gradients of the batch MSE with respect to parameters.

    Returns a list of (dW, db) pairs in network order, hidden layers first
    and the final affine map last, shapes matching the parameters.  At
    activation kinks the below-branch derivative convention applies.
    """
    X, Y = batch.inputs, batch.targets
    if len(batch) == 0:
        raise ValueError("dataset is empty")
    if X.shape[1] != net.input_dim or Y.shape[1] != net.output_dim:
        raise ValueError("dataset dimensions do not match the network")
    posts = [X]
    derivs = []
    a = X
    for aff, act in net.layers:
        z = aff(a)
        a, d = act.value_and_deriv(z)
        posts.append(a)
        derivs.append(d)
    pred = net.final(a)
    delta = 2.0 * (pred - Y) / (Y.shape[0] * Y.shape[1])
    grads = [None] * (len(net.layers) + 1)
    grads[-1] = (delta.T @ posts[-1], delta.sum(axis=0))
    w_next = net.final.W
    for i in range(len(net.layers) - 1, -1, -1):
        delta = (delta @ w_next) * derivs[i]
        grads[i] = (delta.T @ posts[i], delta.sum(axis=0))
        w_next = net.layers[i][0].W
    return grads


@dataclass(frozen=True)
class TrainConfig:
    """Adam settings and the success protocol.

    The learning rate starts at lr_init and drops by lr_decay once per
    decay_interval_steps, floored at lr_floor so it stays positive on
    arbitrarily long runs.  Success requires both losses below
    success_threshold at an evaluation point.
    """

    lr_init: float = 1e-4
    lr_decay: float = 5e-6
    decay_interval_steps: int = 2_000_000
    max_steps: int = 500_000
    success_threshold: float = 1e-4
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_interval: int = 1_000
    lr_floor: float = 1e-5

    def __post_init__(self):
        if not self.lr_init > 0:
            raise ValueError("lr_init must be positive")
        if self.lr_decay < 0:
            raise ValueError("lr_decay must be nonnegative")
        if not self.lr_floor > 0:
            raise ValueError("lr_floor must be positive")
        for name in ("decay_interval_steps", "max_steps", "eval_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.success_threshold > 0:
            raise ValueError("success_threshold must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be positive")

    def lr_at(self, step: int) -> float:
        """Learning rate applied at the given 1-based step."""
        drops = (step - 1) // self.decay_interval_steps
        return max(self.lr_init - self.lr_decay * drops, self.lr_floor)


@dataclass(frozen=True, eq=False)
class TrainReport:
    """Outcome of one training run.

    success is exactly (final_train_loss < threshold and final_val_loss <
    threshold); loss_curve holds (step, train_loss, val_loss) samples taken
    at each evaluation.
    """

    final_train_loss: float
    final_val_loss: float
    steps: int
    success: bool
    threshold: float
    loss_curve: tuple
    net: NeuralNet

    def __post_init__(self):
        expected = (self.final_train_loss < self.threshold
                    and self.final_val_loss < self.threshold)
        if self.success != expected:
            raise ValueError("success flag contradicts losses vs threshold")


def _act_into(act: Activation, z, a_out, d_out):
    """Write act(z) to a_out and act'(z) to d_out, reusing the buffers.

    Exponential-family kinds use exp instead of expm1 here: exp vectorizes,
    expm1 does not, and the one-ulp value difference is irrelevant to
    training.  Falls back to value_and_deriv for kinds without a fused form.
    """
    if act.kind == "ELU" or (act.kind == "SELU" and act.lam == 1.0):
        beta = act.beta
        np.minimum(z, 0.0, out=d_out)
        np.exp(d_out, out=d_out)
        np.maximum(z, 0.0, out=a_out)
        if beta == 1.0:
            a_out += d_out
            a_out -= 1.0
        else:
            a_out += beta * (d_out - 1.0)
            d_out *= beta
            d_out[z > 0] = 1.0
        return
    a, d = act.value_and_deriv(z)
    a_out[:] = a
    d_out[:] = d


def _act_values(act: Activation, z):
    """act(z) by the same arithmetic as _act_into, allocating the result."""
    a_out = np.empty_like(z)
    d_scratch = np.empty_like(z)
    _act_into(act, z, a_out, d_scratch)
    return a_out


def _param_views(theta: np.ndarray, dims):
    views = []
    off = 0
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        w = theta[off:off + d_out * d_in].reshape(d_out, d_in)
        off += d_out * d_in
        b = theta[off:off + d_out]
        off += d_out
        views.append((w, b))
    return views


def _param_count(dims) -> int:
    return sum(o * i + o for i, o in zip(dims[:-1], dims[1:]))


def train(width: int, depth: int, act: Activation, data, cfg: TrainConfig) -> TrainReport:
    """Full-batch Adam on a width-uniform net; deterministic given cfg.seed.

    depth counts activation layers; depth 0 trains the bare affine map.
    Weights start uniform in +-sqrt(6 / (fan_in + fan_out)), biases at zero.
    Evaluates both losses every cfg.eval_interval steps and stops early once
    both drop below cfg.success_threshold.
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    train_ds, val_ds = data
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("datasets must be nonempty")
    X, Y = train_ds.inputs, train_ds.targets
    dims = [X.shape[1]] + [width] * depth + [Y.shape[1]]

    rng = np.random.default_rng(cfg.seed)
    theta = np.zeros(_param_count(dims))
    views = _param_views(theta, dims)
    for w, _ in views:
        bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[:] = rng.uniform(-bound, bound, size=w.shape)

    grad = np.zeros_like(theta)
    gviews = _param_views(grad, dims)
    scale = 2.0 / (Y.shape[0] * Y.shape[1])

    n_pts = X.shape[0]
    z_buf = [np.empty((n_pts, d)) for d in dims[1:-1]]
    a_buf = [np.empty((n_pts, d)) for d in dims[1:-1]]
    d_buf = [np.empty((n_pts, d)) for d in dims[1:-1]]
    delta_buf = [np.empty((n_pts, d)) for d in dims[1:]]
    ones_n = np.ones(n_pts)

    def fill_grad():
        a = X
        for i in range(depth):
            w, b = views[i]
            np.matmul(a, w.T, out=z_buf[i])
            z_buf[i] += b
            _act_into(act, z_buf[i], a_buf[i], d_buf[i])
            a = a_buf[i]
        w_f, b_f = views[-1]
        delta = delta_buf[-1]
        np.matmul(a, w_f.T, out=delta)
        delta += b_f
        delta -= Y
        delta *= scale
        np.matmul(delta.T, a, out=gviews[-1][0])
        np.matmul(delta.T, ones_n, out=gviews[-1][1])
        w_next = w_f
        for i in range(depth - 1, -1, -1):
            np.matmul(delta, w_next, out=delta_buf[i])
            delta = delta_buf[i]
            delta *= d_buf[i]
            prev = a_buf[i - 1] if i > 0 else X
            np.matmul(delta.T, prev, out=gviews[i][0])
            np.matmul(delta.T, ones_n, out=gviews[i][1])
            w_next = views[i][0]

    def loss_at(xs, ys):
        a = xs
        for w, b in views[:-1]:
            a = _act_values(act, a @ w.T + b)
        w_f, b_f = views[-1]
        diff = a @ w_f.T + b_f - ys
        return float(np.sum(diff * diff) / (ys.shape[0] * ys.shape[1]))

    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    curve = []
    l_train = loss_at(X, Y)
    l_val = loss_at(val_ds.inputs, val_ds.targets)
    steps_run = 0
    for t in range(1, cfg.max_steps + 1):
        fill_grad()
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * np.square(grad)
        denom = np.sqrt(v / (1.0 - b2 ** t))
        denom += eps
        theta -= (cfg.lr_at(t) / (1.0 - b1 ** t)) * m / denom
        steps_run = t
        if t % cfg.eval_interval == 0 or t == cfg.max_steps:
            l_train = loss_at(X, Y)
            l_val = loss_at(val_ds.inputs, val_ds.targets)
            curve.append((t, l_train, l_val))
            if l_train < cfg.success_threshold and l_val < cfg.success_threshold:
                break

    layers = tuple((AffineMap(w, b), act) for w, b in views[:-1])
    net = NeuralNet(layers=layers, final=AffineMap(*views[-1]))
    return TrainReport(
        final_train_loss=l_train,
        final_val_loss=l_val,
        steps=steps_run,
        success=bool(l_train < cfg.success_threshold
                     and l_val < cfg.success_threshold),
        threshold=cfg.success_threshold,
        loss_curve=tuple(curve),
        net=net,
    )


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Reports per depth plus the smallest depth that met the criterion."""

    width: int
    k: int
    depths: tuple
    reports: tuple
    minimal_depth: int | None


def depth_sweep(width: int, act: Activation, k: int, depths, cfg: TrainConfig,
                data=None) -> SweepResult:
    """Train one net per depth, each with a fresh derived seed.

    depths must be nonempty and strictly ascending.  Supplying data reuses a
    prebuilt (train, val) pair; otherwise the disk dataset for k is built.
    """
    depths = list(depths)
    if not depths:
        raise ValueError("depths must be nonempty")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError("depths must be strictly ascending")
    if data is None:
        data = gen_disk(k)
    reports = []
    for index, depth in enumerate(depths):
        cfg_d = replace(cfg, seed=cfg.seed + index)
        reports.append(train(width, depth, act, data, cfg_d))
    minimal = next((d for d, r in zip(depths, reports) if r.success), None)
    return SweepResult(
        width=width, k=k, depths=tuple(depths),
        reports=tuple(reports), minimal_depth=minimal,
    )


def save_dataset(ds: Dataset, path) -> None:
    """Write the dataset as delimited text with a header row."""
    table = np.hstack([ds.inputs, ds.targets])
    np.savetxt(path, table, fmt="%.17g", delimiter=",",
               header="x,y,target_x,target_y", comments="")


def load_dataset(path, role: str = "train") -> Dataset:
    """Read a dataset written by save_dataset."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != 4:
        raise ValueError(f"expected 4 columns, got {table.shape[1]}")
    return Dataset(table[:, :2], table[:, 2:], role=role)
