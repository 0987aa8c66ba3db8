"""Scalar activation functions and iterated-composition utilities.

Every activation here is piecewise closed-form and monotone nondecreasing.
Both branch formulas agree at each break point, so values do not depend on
which branch claims the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = (
    "ReLU",
    "LeakyReLU",
    "ELU",
    "CELU",
    "SELU",
    "Softplus",
    "HardTanh",
    "ReLU6",
)

# Kinds whose definition actually reads beta.
_PARAMETRIC = frozenset({"LeakyReLU", "ELU", "CELU", "SELU", "Softplus"})


@dataclass(frozen=True)
class Activation:
    """A scalar activation, applied componentwise to array input.

    kind is one of KINDS.  beta parametrizes LeakyReLU / ELU / CELU / SELU /
    Softplus and is ignored by the rest; lam is the extra outer scale used
    only by SELU.  SELU with lam=1 coincides with ELU at the same beta.
    """

    kind: str
    beta: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not (np.isfinite(self.beta) and np.isfinite(self.lam)):
            raise ValueError("activation parameters must be finite")
        if self.kind in _PARAMETRIC and not self.beta > 0:
            raise ValueError(f"{self.kind} requires beta > 0, got {self.beta}")
        if self.kind == "SELU" and not self.lam > 0:
            raise ValueError(f"SELU requires lam > 0, got {self.lam}")

    def __call__(self, x):
        """Evaluate componentwise.  Scalar in, scalar out; arrays keep shape."""
        arr = np.asarray(x, dtype=float)
        out = _apply(self.kind, arr, self.beta, self.lam)
        if arr.ndim == 0:
            return float(out)
        return out

    def deriv(self, x):
        """Pointwise derivative.

        At break points the derivative of the branch immediately below is
        used (so ReLU'(0) = 0, HardTanh'(1) = 1, HardTanh'(-1) = 0).
        """
        arr = np.asarray(x, dtype=float)
        out = _apply_deriv(self.kind, arr, self.beta, self.lam)
        if arr.ndim == 0:
            return float(out)
        return out

    def value_and_deriv(self, x):
        """Evaluate value and pointwise derivative in one pass.

        Shares the transcendental between the two outputs, so this is the
        cheap path for training loops.  The derivative follows the same
        below-branch convention as deriv(); values match __call__ exactly
        and derivatives match deriv() within one ulp of 1 absolutely (the
        shared expm1 costs a cancellation only where the derivative itself
        is vanishing).
        """
        arr = np.asarray(x, dtype=float)
        val, der = _apply_both(self.kind, arr, self.beta, self.lam)
        if arr.ndim == 0:
            return float(val), float(der)
        return val, der

    def label(self) -> str:
        """Short human-readable tag, e.g. 'ELU(beta=1)'."""
        if self.kind == "SELU":
            return f"SELU(lam={self.lam:g}, beta={self.beta:g})"
        if self.kind in _PARAMETRIC:
            return f"{self.kind}(beta={self.beta:g})"
        return self.kind


def _apply(kind, x, beta, lam):
    if kind == "ReLU":
        return np.maximum(x, 0.0)
    if kind == "LeakyReLU":
        return np.where(x >= 0, x, beta * x)
    if kind == "ELU":
        return np.where(x >= 0, x, beta * np.expm1(np.minimum(x, 0.0)))
    if kind == "CELU":
        return np.where(x >= 0, x, beta * np.expm1(np.minimum(x, 0.0) / beta))
    if kind == "SELU":
        return lam * np.where(x >= 0, x, beta * np.expm1(np.minimum(x, 0.0)))
    if kind == "Softplus":
        # Stable rewrite of (1/beta) * log(1 + exp(beta*x)): the direct form
        # overflows for moderately large x although the function is benign.
        return np.maximum(x, 0.0) + np.log1p(np.exp(-beta * np.abs(x))) / beta
    if kind == "HardTanh":
        return np.clip(x, -1.0, 1.0)
    if kind == "ReLU6":
        return np.clip(x, 0.0, 6.0)
    raise AssertionError(kind)


def _apply_deriv(kind, x, beta, lam):
    if kind == "ReLU":
        return np.where(x > 0, 1.0, 0.0)
    if kind == "LeakyReLU":
        return np.where(x > 0, 1.0, beta)
    if kind == "ELU":
        return np.where(x > 0, 1.0, beta * np.exp(np.minimum(x, 0.0)))
    if kind == "CELU":
        return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0) / beta))
    if kind == "SELU":
        return lam * np.where(x > 0, 1.0, beta * np.exp(np.minimum(x, 0.0)))
    if kind == "Softplus":
        z = beta * x
        t = np.exp(-np.abs(z))
        return np.where(z >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    if kind == "HardTanh":
        return np.where((x > -1.0) & (x <= 1.0), 1.0, 0.0)
    if kind == "ReLU6":
        return np.where((x > 0.0) & (x <= 6.0), 1.0, 0.0)
    raise AssertionError(kind)


def _apply_both(kind, x, beta, lam):
    if kind == "ReLU":
        return np.maximum(x, 0.0), np.where(x > 0, 1.0, 0.0)
    if kind == "LeakyReLU":
        return np.where(x >= 0, x, beta * x), np.where(x > 0, 1.0, beta)
    if kind == "ELU":
        em1 = np.expm1(np.minimum(x, 0.0))
        return (np.where(x >= 0, x, beta * em1),
                np.where(x > 0, 1.0, beta * (em1 + 1.0)))
    if kind == "CELU":
        em1 = np.expm1(np.minimum(x, 0.0) / beta)
        return (np.where(x >= 0, x, beta * em1),
                np.where(x > 0, 1.0, em1 + 1.0))
    if kind == "SELU":
        em1 = np.expm1(np.minimum(x, 0.0))
        return (lam * np.where(x >= 0, x, beta * em1),
                lam * np.where(x > 0, 1.0, beta * (em1 + 1.0)))
    if kind == "Softplus":
        t = np.exp(-beta * np.abs(x))
        val = np.maximum(x, 0.0) + np.log1p(t) / beta
        der = np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
        return val, der
    if kind == "HardTanh":
        return np.clip(x, -1.0, 1.0), np.where((x > -1.0) & (x <= 1.0), 1.0, 0.0)
    if kind == "ReLU6":
        return np.clip(x, 0.0, 6.0), np.where((x > 0.0) & (x <= 6.0), 1.0, 0.0)
    raise AssertionError(kind)


RELU = Activation("ReLU")


def iterate(act: Activation, n: int, x):
    """n-fold composition act(act(...act(x))), n >= 1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out = act(x)
    for _ in range(n - 1):
        out = act(out)
    return out


def check_iteration_hypotheses(act, c, samples=1001, x_lo=-100.0):
    """Grid evidence that iterating act converges to ReLU.

    Checks, on sampled grids, that act is the identity for x >= 0 and that
    the ratio act(x)/x stays within [0, b] for some b < 1 on [x_lo, c] with
    c < 0.  Returns (holds, b) where b is the largest sampled ratio.  This is
    a finite sample, reported as evidence rather than proof.
    """
    if not c < 0:
        raise ValueError(f"c must be negative, got {c}")
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    if not x_lo < c:
        raise ValueError(f"x_lo={x_lo} must lie left of c={c}")
    neg = np.linspace(x_lo, c, samples)
    ratios = np.asarray(act(neg)) / neg
    b = float(ratios.max())
    pos = np.linspace(0.0, -x_lo, samples)
    identity_ok = np.array_equal(np.asarray(act(pos)), pos)
    holds = bool(identity_ok and (ratios >= 0).all() and b < 1.0)
    return holds, b


def iterated_relu_error(act, n, domain, grid=10001):
    """Sup of |act^n(x) - ReLU(x)| over a uniform grid on a 1-d domain.

    domain may be a (lo, hi) pair or any object with 1-d lows/highs fields.
    """
    lo, hi = _bounds_1d(domain)
    xs = np.linspace(lo, hi, grid)
    cur = iterate(act, n, xs)
    return float(np.max(np.abs(cur - RELU(xs))))


def _bounds_1d(domain):
    lows = getattr(domain, "lows", None)
    if lows is not None:
        lows = np.atleast_1d(lows)
        highs = np.atleast_1d(domain.highs)
        if lows.size != 1:
            raise ValueError("domain must be 1-dimensional")
        return float(lows[0]), float(highs[0])
    lo, hi = domain
    return float(lo), float(hi)
