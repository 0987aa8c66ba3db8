"""Certificates that a map on the unit cube must take one value twice.

The pieces: a family of piecewise-linear maps whose odd/even component pairs
ride on disjoint plateaus, a box root-existence check from opposite-face sign
conditions, and the product-condition arithmetic (M and epsilon) that turns a
sup gap bound into a non-injectivity certificate with an explicit approximate
collision.  Every supremum here is a grid estimate; certificates record the
resolution and are sound up to that grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .netcore import Box


class CertificationRefused(RuntimeError):
    """The requested certificate cannot be issued; .reason says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True, eq=False)
class IntervalPairs:
    """Per coordinate i, one interval pair ([a_i1, a_i2], [b_i1, b_i2]).

    The two intervals of each pair must be disjoint and inside [0, 1].
    """

    a_pairs: np.ndarray
    b_pairs: np.ndarray

    def __post_init__(self):
        a = np.array(self.a_pairs, dtype=float)
        b = np.array(self.b_pairs, dtype=float)
        if a.ndim != 2 or a.shape[1] != 2 or a.shape != b.shape:
            raise ValueError("interval pairs must be (m, 2) arrays of equal shape")
        for name, arr in (("a", a), ("b", b)):
            if (arr[:, 0] > arr[:, 1]).any():
                raise ValueError(f"{name}-intervals must have lo <= hi")
            if (arr < 0).any() or (arr > 1).any():
                raise ValueError(f"{name}-intervals must lie inside [0, 1]")
        overlap = ~((a[:, 1] < b[:, 0]) | (b[:, 1] < a[:, 0]))
        if overlap.any():
            i = int(np.argmax(overlap))
            raise ValueError(f"interval pair {i} overlaps: {a[i]} vs {b[i]}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_pairs", a)
        object.__setattr__(self, "b_pairs", b)

    @property
    def m(self) -> int:
        return self.a_pairs.shape[0]


def canonical_pairs(m: int) -> IntervalPairs:
    """The standard choice [0, 1/5] vs [4/5, 1] in every coordinate."""
    return IntervalPairs(
        np.tile([0.0, 0.2], (m, 1)),
        np.tile([0.8, 1.0], (m, 1)),
    )


def _odd_component(t):
    """Rises to a plateau at 2, falls back to 0: the first of each pair."""
    t = np.asarray(t, dtype=float)
    return np.select(
        [t <= 0.3, t <= 0.5, t <= 0.7],
        [10 * t - 1, np.full_like(t, 2.0), 7 - 10 * t],
        default=0.0,
    )


def _even_component(t):
    """Flat at 0, rises to 2, falls to -1 at t=1: the second of each pair."""
    t = np.asarray(t, dtype=float)
    return np.select(
        [t <= 0.3, t <= 0.5, t <= 0.7],
        [np.zeros_like(t), 10 * t - 3, np.full_like(t, 2.0)],
        default=9 - 10 * t,
    )


@dataclass(frozen=True)
class GMap:
    """Map [0,1]^m -> R^{2m}; components 2k-1, 2k depend only on coordinate k."""

    m: int

    def __call__(self, t):
        pts, single = _as_points(t, self.m)
        out = np.empty((pts.shape[0], 2 * self.m))
        for k in range(self.m):
            out[:, 2 * k] = _odd_component(pts[:, k])
            out[:, 2 * k + 1] = _even_component(pts[:, k])
        return out[0] if single else out


@dataclass(frozen=True)
class GStarMap:
    """The first n components of GMap(m), m < n <= 2m."""

    m: int
    n: int

    def __call__(self, t):
        full = GMap(self.m)(t)
        return full[..., : self.n]


def build_g(m: int) -> GMap:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return GMap(m)


def build_gstar(m: int, n: int) -> GStarMap:
    if not m < n <= 2 * m:
        raise ValueError(f"need m < n <= 2m, got m={m}, n={n}")
    return GStarMap(m, n)


def _as_points(t, m: int):
    arr = np.asarray(t, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != m:
        raise ValueError(f"points must have dimension {m}, got {pts.shape[1]}")
    if (pts < -1e-12).any() or (pts > 1 + 1e-12).any():
        raise ValueError("input lies outside the unit cube")
    return pts, single


def _eval_rows(f, pts: np.ndarray) -> np.ndarray:
    out = np.asarray(f(pts), dtype=float)
    if out.ndim == 1:
        out = out.reshape(-1, 1)
    return out


def _face_points(lows, highs, axis: int, value: float, grid: int) -> np.ndarray:
    """Grid over the box face where the given axis is pinned to value."""
    n = len(lows)
    others = [i for i in range(n) if i != axis]
    if others:
        sub = Box(np.asarray(lows)[others], np.asarray(highs)[others]).grid(grid)
    else:
        sub = np.zeros((1, 0))
    return np.insert(sub, axis, value, axis=1)


def pm_root(f, box: Box, signs, grid: int = 101):
    """Certify a zero of f in the box from opposite-face sign conditions.

    For each axis i the product signs[i] * f_i must be >= 0 everywhere on the
    low face and <= 0 on the high face, checked on a per-face grid.  When the
    conditions hold a zero exists; the returned point is the grid minimizer
    of the sup-norm residual, polished by damped bisection along coordinate
    lines.  Returns (certified, approx_root or None).  Certification is up to
    the grid: sign violations between grid nodes are not seen.
    """
    n = box.dim
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (n,) or not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be a vector of +1/-1 entries, one per axis")
    for i in range(n):
        low_vals = _eval_rows(f, _face_points(box.lows, box.highs, i, box.lows[i], grid))[:, i]
        if (signs[i] * low_vals < 0).any():
            return False, None
        high_vals = _eval_rows(f, _face_points(box.lows, box.highs, i, box.highs[i], grid))[:, i]
        if (signs[i] * high_vals > 0).any():
            return False, None

    pts = box.grid(grid)
    residuals = np.max(np.abs(_eval_rows(f, pts)), axis=1)
    start = pts[int(np.argmin(residuals))]
    return True, _polish_root(f, box, start)


def _polish_root(f, box: Box, start: np.ndarray, sweeps: int = 200) -> np.ndarray:
    n = box.dim

    def fvec(x):
        return _eval_rows(f, x[None, :])[0]

    def residual(x):
        return float(np.max(np.abs(fvec(x))))

    x = np.array(start, dtype=float)
    best_r, best_x = residual(x), x.copy()
    for _ in range(sweeps):
        for i in range(n):
            lo, hi = float(box.lows[i]), float(box.highs[i])
            xa, xb = x.copy(), x.copy()
            xa[i], xb[i] = lo, hi
            va, vb = fvec(xa)[i], fvec(xb)[i]
            if va == 0.0:
                target = lo
            elif vb == 0.0:
                target = hi
            elif va * vb > 0:
                continue
            else:
                a_, b_ = lo, hi
                for _ in range(80):
                    mid = 0.5 * (a_ + b_)
                    xm = x.copy()
                    xm[i] = mid
                    vm = fvec(xm)[i]
                    if vm == 0.0:
                        a_ = b_ = mid
                        break
                    if va * vm < 0:
                        b_ = mid
                    else:
                        a_, va = mid, vm
                target = 0.5 * (a_ + b_)
            # Half step: a full coordinate update cycles on rotation-like
            # systems, the damped one contracts.
            x[i] += 0.5 * (target - x[i])
        r = residual(x)
        if r < best_r:
            best_r, best_x = r, x.copy()
        if best_r < 1e-13:
            break
    return best_x


def _pair_face_terms(g, pairs: IntervalPairs, grid: int):
    """Per coordinate k: grid sups of the two face products and the matching
    absolute-sum denominators, for the odd and even components."""
    m = pairs.m
    a, b = pairs.a_pairs, pairs.b_pairs
    x_grid = Box(a[:, 0], a[:, 1]).grid(grid)
    y_grid = Box(b[:, 0], b[:, 1]).grid(grid)
    gx = _eval_rows(g, x_grid)
    gy = _eval_rows(g, y_grid)
    if gx.shape[1] < 2 * m:
        raise ValueError(f"map must have at least {2 * m} components")
    terms = []
    for k in range(m):
        fa1 = _eval_rows(g, _face_points(a[:, 0], a[:, 1], k, a[k, 0], grid))[:, 2 * k]
        fa2 = _eval_rows(g, _face_points(a[:, 0], a[:, 1], k, a[k, 1], grid))[:, 2 * k]
        bvals = gy[:, 2 * k]
        odd_prod, odd_abs = _outer_extrema(fa1, fa2, bvals)

        fb1 = _eval_rows(g, _face_points(b[:, 0], b[:, 1], k, b[k, 0], grid))[:, 2 * k + 1]
        fb2 = _eval_rows(g, _face_points(b[:, 0], b[:, 1], k, b[k, 1], grid))[:, 2 * k + 1]
        cvals = gx[:, 2 * k + 1]
        even_prod, even_abs = _outer_extrema(fb1, fb2, cvals)
        terms.append((odd_prod, odd_abs, even_prod, even_abs))
    return terms


def _outer_extrema(u1, u2, v):
    """Max over all (i, j) of (u1_i - v_j)(u2_i - v_j) and of
    |u1_i - v_j| + |u2_i - v_j|, chunked to bound memory."""
    max_prod = -np.inf
    max_abs = 0.0
    chunk = max(1, 10_000_000 // max(1, len(u1)))
    for s in range(0, len(v), chunk):
        vc = v[s:s + chunk]
        d1 = u1[:, None] - vc[None, :]
        d2 = u2[:, None] - vc[None, :]
        max_prod = max(max_prod, float(np.max(d1 * d2)))
        max_abs = max(max_abs, float(np.max(np.abs(d1) + np.abs(d2))))
    return max_prod, max_abs


def compute_M(g, pairs: IntervalPairs, grid: int = 101) -> float:
    """Grid estimate of the face-product maximum; negative M is the
    non-injectivity workhorse."""
    terms = _pair_face_terms(g, pairs, grid)
    return max(max(t[0], t[2]) for t in terms)


def compute_epsilon(g, pairs: IntervalPairs, M: float, grid: int = 101) -> float:
    """Tolerance below which any map within it of g inherits the collision.

    Returns 0.9 times the minimum of 1/2 and the per-coordinate quotients
    (-M) / (2 * sup + 1); the certificate needs strictly-below, and the 0.9
    turns that into a reproducible margin.
    """
    if not M < 0:
        raise ValueError(f"M must be negative, got {M}")
    terms = _pair_face_terms(g, pairs, grid)
    bound = 0.5
    for odd_prod, odd_abs, even_prod, even_abs in terms:
        bound = min(bound, -M / (2 * odd_abs + 1.0), -M / (2 * even_abs + 1.0))
    return 0.9 * bound


@dataclass(frozen=True, eq=False)
class SelfIntersectionCertificate:
    """Witness that f takes one value at two distinct cube points.

    Valid because M < 0 forces opposite-face sign products for any map
    within epsilon of the reference, and the measured gap stayed below
    epsilon.  Sound up to grid_resolution.
    """

    pairs: IntervalPairs
    M: float
    epsilon: float
    grid_resolution: int
    t1: np.ndarray
    t2: np.ndarray
    collision_residual: float

    def to_dict(self) -> dict:
        return {
            "a_intervals": self.pairs.a_pairs.tolist(),
            "b_intervals": self.pairs.b_pairs.tolist(),
            "M": self.M,
            "epsilon": self.epsilon,
            "grid_resolution": self.grid_resolution,
            "collision": {
                "t1": np.asarray(self.t1).tolist(),
                "t2": np.asarray(self.t2).tolist(),
                "residual": self.collision_residual,
            },
            "soundness": "grid estimate; sups checked at grid_resolution points per axis",
        }


def certify_self_intersection(f, g, pairs: IntervalPairs,
                              grid: int = 101) -> SelfIntersectionCertificate:
    """Issue a non-injectivity certificate for f, or refuse with a reason.

    Computes M and epsilon for the reference map g, measures the sup gap
    between f and g on the unit cube grid, and on success locates an
    approximate collision pair for f.
    """
    M = compute_M(g, pairs, grid)
    if M >= 0:
        raise CertificationRefused(
            f"face products do not certify: M={M:.6g} is not negative"
        )
    eps = compute_epsilon(g, pairs, M, grid)
    m = pairs.m
    cube = Box(np.zeros(m), np.ones(m))
    pts = cube.grid(grid)
    gap = float(np.max(np.abs(_eval_rows(f, pts) - _eval_rows(g, pts))))
    if gap >= eps:
        raise CertificationRefused(
            f"sup gap {gap:.6g} is not below epsilon {eps:.6g}"
        )
    t1, t2, residual = find_collision(f, pairs, grid)
    return SelfIntersectionCertificate(
        pairs=pairs, M=M, epsilon=eps, grid_resolution=grid,
        t1=t1, t2=t2, collision_residual=residual,
    )


def find_collision(f, pairs: IntervalPairs, grid: int = 101):
    """Best near-collision (t1, t2, residual) of f over the interval boxes.

    Scans the product grid with an inf-norm nearest-neighbor query, then
    polishes with coordinate-wise golden-section descent from the best cell.
    """
    m = pairs.m
    a, b = pairs.a_pairs, pairs.b_pairs
    x_box = Box(a[:, 0], a[:, 1])
    y_box = Box(b[:, 0], b[:, 1])
    X = x_box.grid(grid)
    Y = y_box.grid(grid)
    FX = _eval_rows(f, X)
    FY = _eval_rows(f, Y)
    tree = cKDTree(FX)
    dist, idx = tree.query(FY, k=1, p=np.inf)
    j = int(np.argmin(dist))
    x0, y0 = X[idx[j]], Y[j]

    lows = np.concatenate([a[:, 0], b[:, 0]])
    highs = np.concatenate([a[:, 1], b[:, 1]])
    spacing = (highs - lows) / (grid - 1)

    def objective(z):
        fx = _eval_rows(f, z[None, :m])[0]
        fy = _eval_rows(f, z[None, m:])[0]
        return float(np.max(np.abs(fx - fy)))

    z = np.concatenate([x0, y0])
    value = objective(z)
    for _ in range(100):
        if value < 1e-13:
            break
        for d in range(2 * m):
            lo = max(lows[d], z[d] - spacing[d])
            hi = min(highs[d], z[d] + spacing[d])
            z[d], value = _golden_line(objective, z, d, lo, hi, value)
    return z[:m].copy(), z[m:].copy(), value


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_line(objective, z, d, lo, hi, current):
    """Golden-section minimization of objective along coordinate d."""
    best_t, best_v = z[d], current

    def at(t):
        zz = z.copy()
        zz[d] = t
        return objective(zz)

    a_, b_ = lo, hi
    c_ = b_ - _INVPHI * (b_ - a_)
    d_ = a_ + _INVPHI * (b_ - a_)
    fc, fd = at(c_), at(d_)
    for _ in range(60):
        if fc < fd:
            b_, d_, fd = d_, c_, fc
            c_ = b_ - _INVPHI * (b_ - a_)
            fc = at(c_)
        else:
            a_, c_, fc = c_, d_, fd
            d_ = a_ + _INVPHI * (b_ - a_)
            fd = at(d_)
        if b_ - a_ < 1e-14:
            break
    for t, v in ((c_, fc), (d_, fd)):
        if v < best_v:
            best_t, best_v = t, v
    z[d] = best_t
    return best_t, best_v
