"""Explicit networks that realize one activation family inside another.

Each builder returns a ConstructionReport whose measured grid gap is checked
against the requested tolerance at build time; a builder that cannot meet its
own guarantee raises instead of returning a bad report.  All constructions
are width-1 chains; substitute_activations lifts them componentwise into
wider networks with diagonal affine stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .activations import Activation
from .netcore import AffineMap, Box, NeuralNet, sup_gap


class ConstructionError(RuntimeError):
    """A builder could not meet its accuracy guarantee."""


@dataclass(frozen=True, eq=False)
class ConstructionReport:
    """A built net plus its verified accuracy statement.

    measured_gap is the grid sup-norm distance to the target on valid_domain
    and is guaranteed <= epsilon (checked when the report is created).
    stages counts the logical construction stages, not affine maps.
    """

    net: NeuralNet
    epsilon: float
    valid_domain: Box
    measured_gap: float
    stages: int

    def __post_init__(self):
        if self.measured_gap > self.epsilon:
            raise ConstructionError(
                f"measured gap {self.measured_gap:.6g} exceeds epsilon {self.epsilon:.6g}"
            )


class _Chain:
    """Builds a width-1 net by composing scalar affine maps and activations.

    Consecutive affine maps are fused, so the finished net alternates one
    affine map per activation layer plus a single final affine map.
    """

    def __init__(self):
        self._layers = []
        self._a = 1.0
        self._c = 0.0

    def affine(self, a: float, c: float):
        self._a = a * self._a
        self._c = a * self._c + c

    def activation(self, act: Activation):
        self._layers.append((AffineMap([[self._a]], [self._c]), act))
        self._a, self._c = 1.0, 0.0

    def net(self) -> NeuralNet:
        return NeuralNet(tuple(self._layers), AffineMap([[self._a]], [self._c]))

    def value(self, x: float) -> float:
        """Evaluate the chain built so far, pending affine included."""
        out = float(x)
        for aff, act in self._layers:
            out = act(float(aff.W[0, 0]) * out + float(aff.b[0]))
        return self._a * out + self._c


def _identity_report(target: Activation, epsilon: float, K: Box, grid: int):
    chain = _Chain()
    net = chain.net()
    gap = sup_gap(net, target, K, grid)
    return ConstructionReport(net, epsilon, K, gap, stages=0)


def _require_interval(K: Box) -> tuple[float, float]:
    if K.dim != 1:
        raise ValueError(f"domain must be 1-dimensional, got dim {K.dim}")
    return float(K.lows[0]), float(K.highs[0])


def _stage_count(q: float) -> int:
    """Ceiling of q with a 1e-12 relative guard, so quotients like
    (0.1*3)/0.3 that land one ulp above an integer do not add a stage."""
    return max(1, math.ceil(q * (1.0 - 1e-12)))


def leaky_reciprocal(alpha: float) -> NeuralNet:
    """Width-1 net computing the slope-1/alpha leaky rectifier from the
    slope-alpha one, via two sign flips around a single activation layer."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    chain = _Chain()
    chain.affine(-1.0, 0.0)
    chain.activation(Activation("LeakyReLU", beta=alpha))
    chain.affine(-1.0 / alpha, 0.0)
    return chain.net()


def _push_leaky_power(chain: _Chain, beta: float, exponent: int):
    """Append layers computing LeakyReLU with slope beta**exponent.

    Positive exponents stack plain layers; negative exponents stack the
    reciprocal block.  Exponent 0 contributes nothing (identity).
    """
    act = Activation("LeakyReLU", beta=beta)
    if exponent >= 0:
        for _ in range(exponent):
            chain.activation(act)
    else:
        for _ in range(-exponent):
            chain.affine(-1.0, 0.0)
            chain.activation(act)
            chain.affine(-1.0 / beta, 0.0)


def _bracket_exponents(alpha: float, beta: float) -> tuple[int, int]:
    """Integer exponents (e1, e2) with beta**e1 < alpha < beta**e2 adjacent.

    Returns the unique consecutive pair around alpha, or (j, j) when alpha
    is itself the power beta**j to within 1e-12 relative.
    """
    e = math.log(alpha) / math.log(beta)
    j = round(e)
    if abs(beta ** j - alpha) <= 1e-12 * alpha:
        return j, j
    lo_exp, hi_exp = math.floor(e), math.ceil(e)
    if beta ** lo_exp < beta ** hi_exp:
        small, big = lo_exp, hi_exp
    else:
        small, big = hi_exp, lo_exp
    return small, big


def power_bracket(alpha: float, beta: float) -> tuple[float, float]:
    """The consecutive powers (beta1, beta2) of beta with beta1 < alpha < beta2.

    If alpha is an exact power both values equal alpha.
    """
    e1, e2 = _bracket_exponents(alpha, beta)
    return beta ** e1, beta ** e2


def leaky_shift(alpha: float, beta: float, epsilon: float) -> float:
    """The stage offset b = (1/beta1 - 1/alpha) / (1/beta1 - 1/beta2) * epsilon
    used between the alternating slope corrections."""
    beta1, beta2 = power_bracket(alpha, beta)
    if beta1 == beta2:
        return 0.0
    return (1.0 / beta1 - 1.0 / alpha) / (1.0 / beta1 - 1.0 / beta2) * epsilon


def build_leaky_from_leaky(alpha: float, beta: float, epsilon: float, K: Box,
                           grid: int = 10001) -> ConstructionReport:
    """Approximate the slope-alpha leaky rectifier with slope-beta layers.

    Exact when alpha is an integer power of beta (possibly negative, via the
    reciprocal block).  Otherwise alpha is bracketed between consecutive
    powers beta1 < alpha < beta2 and corrected by an alternating sequence of
    shifted slope ratios; stage 2k is accurate within epsilon down to
    -k*epsilon/alpha and exact on [0, inf).
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not beta > 0 or beta == 1:
        raise ValueError(f"beta must be positive and != 1, got {beta}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    lo, _hi = _require_interval(K)
    target = Activation("LeakyReLU", beta=alpha)

    e1, e2 = _bracket_exponents(alpha, beta)
    if e1 == e2:
        chain = _Chain()
        _push_leaky_power(chain, beta, e1)
        net = chain.net()
        gap = sup_gap(net, target, K, grid)
        return ConstructionReport(net, epsilon, K, gap, stages=net.depth)
    if lo >= 0:
        return _identity_report(target, epsilon, K, grid)

    k_stages = _stage_count(alpha * abs(lo) / epsilon)
    b = leaky_shift(alpha, beta, epsilon)

    chain = _Chain()
    _push_leaky_power(chain, beta, e2)
    chain.affine(1.0, b)
    _push_leaky_power(chain, beta, e1 - e2)
    chain.affine(1.0, -b)
    for k in range(2, k_stages + 1):
        shift = (k - 1) * epsilon
        chain.affine(1.0, shift)
        _push_leaky_power(chain, beta, e2 - e1)
        chain.affine(1.0, -shift)
        chain.affine(1.0, shift + b)
        _push_leaky_power(chain, beta, e1 - e2)
        chain.affine(1.0, -shift - b)
    net = chain.net()
    gap = sup_gap(net, target, K, grid)
    return ConstructionReport(net, epsilon, K, gap, stages=2 * k_stages)


def build_leaky_from_elu(alpha: float, epsilon: float, K: Box,
                         grid: int = 10001) -> ConstructionReport:
    """Approximate the slope-alpha leaky rectifier with a stack of scaled
    exponential-linear layers.

    Stage n interpolates the target exactly at the knot -n*epsilon/alpha and
    leaves everything to the right of the previous knot untouched, so N =
    ceil(alpha*|min K|/epsilon) stages cover K with error at most epsilon.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    lo, _hi = _require_interval(K)
    target = Activation("LeakyReLU", beta=alpha)
    if lo >= 0 or alpha == 1.0:
        return _identity_report(target, epsilon, K, grid)

    n_stages = _stage_count(alpha * abs(lo) / epsilon)
    chain = _Chain()
    for n in range(1, n_stages + 1):
        shift = (n - 1) * epsilon
        prev = chain.value(-n * epsilon / alpha)
        k_n = -epsilon / math.expm1(prev + shift)
        chain.affine(1.0, shift)
        chain.activation(Activation("ELU", beta=k_n))
        chain.affine(1.0, -shift)
    net = chain.net()
    gap = sup_gap(net, target, K, grid)
    return ConstructionReport(net, epsilon, K, gap, stages=n_stages)


def build_relu_from_softplus(beta: float, epsilon: float,
                             domain: Box | None = None,
                             grid: int = 10001) -> ConstructionReport:
    """Approximate ReLU by x -> Softplus_beta(n x)/n with n = ceil(2/(beta*eps)).

    The gap is one-sided (the smooth curve lies above the rectifier) and
    bounded by 2/(n*beta) everywhere, so the guarantee holds on all of R;
    the report's domain is just where the gap was measured.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if domain is None:
        domain = Box.interval(-20.0, 20.0)
    _require_interval(domain)
    n = _stage_count(2.0 / (beta * epsilon))
    chain = _Chain()
    chain.affine(float(n), 0.0)
    chain.activation(Activation("Softplus", beta=beta))
    chain.affine(1.0 / n, 0.0)
    net = chain.net()
    gap = sup_gap(net, Activation("ReLU"), domain, grid)
    return ConstructionReport(net, epsilon, domain, gap, stages=1)


def build_relu_from_iteration(act: Activation, epsilon: float, domain: Box,
                              grid: int = 10001,
                              max_layers: int = 1 << 16) -> ConstructionReport:
    """Approximate ReLU by iterating one activation enough times.

    Works for activations that fix the nonnegative axis and contract the
    negative axis (slope ratio bounded below 1); the layer count is found by
    doubling then bisecting on the measured grid error, which is monotone
    nonincreasing under those hypotheses.
    """
    from .activations import check_iteration_hypotheses, iterated_relu_error

    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    lo, _hi = _require_interval(domain)
    c = lo / 2 if lo < 0 else -1e-3
    holds, ratio_bound = check_iteration_hypotheses(act, c, x_lo=min(-100.0, 2 * lo))
    if not holds:
        raise ConstructionError(
            f"{act.label()} fails the iteration hypotheses near c={c:g} "
            f"(largest ratio {ratio_bound:.6g}); it cannot converge to ReLU"
        )

    def error(n):
        return iterated_relu_error(act, n, domain, grid=grid)

    n = 1
    while error(n) > epsilon:
        n *= 2
        if n > max_layers:
            raise ConstructionError(
                f"no layer count up to {max_layers} reaches epsilon={epsilon:g}"
            )
    lo_n, hi_n = max(1, n // 2), n
    while lo_n < hi_n:
        mid = (lo_n + hi_n) // 2
        if error(mid) <= epsilon:
            hi_n = mid
        else:
            lo_n = mid + 1
    n = hi_n

    chain = _Chain()
    for _ in range(n):
        chain.activation(act)
    net = chain.net()
    return ConstructionReport(net, epsilon, domain, error(n), stages=n)


def _scalar_target_gap(scalar_net: NeuralNet, act: Activation, interval: Box,
                       grid: int) -> float:
    return sup_gap(scalar_net, act, interval, grid)


def elu_substitution(grid: int = 10001):
    """Scalar builder replacing leaky-rectifier layers with exponential-linear
    stacks; identity layers (slope 1) pass through unchanged."""

    def build(act: Activation, eps: float, interval: Box) -> ConstructionReport:
        if act.kind != "LeakyReLU":
            raise ConstructionError(
                f"ELU substitution expects LeakyReLU layers, got {act.label()}"
            )
        return build_leaky_from_elu(act.beta, eps, interval, grid=grid)

    return build


def leaky_substitution(beta: float, grid: int = 10001):
    """Scalar builder replacing slope-alpha leaky layers with slope-beta ones."""

    def build(act: Activation, eps: float, interval: Box) -> ConstructionReport:
        if act.kind != "LeakyReLU":
            raise ConstructionError(
                f"leaky substitution expects LeakyReLU layers, got {act.label()}"
            )
        return build_leaky_from_leaky(act.beta, beta, eps, interval, grid=grid)

    return build


def softplus_substitution(beta: float = 1.0, grid: int = 10001):
    """Scalar builder replacing ReLU layers with scaled softplus curves."""

    def build(act: Activation, eps: float, interval: Box) -> ConstructionReport:
        if act.kind != "ReLU":
            raise ConstructionError(
                f"softplus substitution expects ReLU layers, got {act.label()}"
            )
        return build_relu_from_softplus(beta, eps, domain=interval, grid=grid)

    return build


def iteration_substitution(inner: Activation, grid: int = 10001):
    """Scalar builder replacing ReLU layers with an iterated-activation stack."""

    def build(act: Activation, eps: float, interval: Box) -> ConstructionReport:
        if act.kind != "ReLU":
            raise ConstructionError(
                f"iteration substitution expects ReLU layers, got {act.label()}"
            )
        return build_relu_from_iteration(inner, eps, interval, grid=grid)

    return build


def _operator_inf_norm(W: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(W), axis=1))) if W.size else 0.0


def _compose_affine(second: AffineMap, first: AffineMap) -> AffineMap:
    return AffineMap(second.W @ first.W, second.W @ first.b + second.b)


def _scale_shift_after(aff: AffineMap, a: float, c: float) -> AffineMap:
    """(a*I, c*1) applied after aff."""
    return AffineMap(a * aff.W, a * aff.b + c)


def substitute_activations(net: NeuralNet, target_builder, epsilon: float,
                           K: Box, grid_per_axis: int | None = None) -> NeuralNet:
    """Replace every activation layer by a width-preserving scalar stack.

    The scalar construction for each layer is applied componentwise through
    diagonal affine maps, so hidden dimensions are unchanged.  The error
    budget splits epsilon equally across layers and scales each share by a
    grid-estimated Lipschitz factor of the downstream composition; the final
    network is grid-checked end to end against the original and rejected if
    the budget was optimistic.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n_layers = net.depth
    if n_layers == 0:
        return net
    if grid_per_axis is None:
        grid_per_axis = {1: 10001, 2: 101}.get(K.dim, 21)

    pts = K.grid(grid_per_axis)
    pre_acts = []
    out = pts
    for aff, act in net.layers:
        z = aff(out)
        pre_acts.append(z)
        out = act(z)

    slopes = [float(np.max(np.abs(act.deriv(z))))
              for (aff, act), z in zip(net.layers, pre_acts)]
    norms = [_operator_inf_norm(aff.W) for aff, _ in net.layers]
    final_norm = _operator_inf_norm(net.final.W)

    downstream = [0.0] * n_layers
    running = final_norm
    for i in range(n_layers - 1, -1, -1):
        downstream[i] = running
        if i > 0:
            running *= slopes[i] * norms[i]

    budgets = [epsilon / (n_layers * max(lam, 1e-12)) for lam in downstream]

    pads = []
    p = 0.0
    for i in range(n_layers):
        p *= norms[i]
        pads.append(p)
        p = slopes[i] * p + budgets[i]

    new_layers = []
    pending = None
    for i, (aff, act) in enumerate(net.layers):
        width = aff.out_dim
        pending = aff if pending is None else _compose_affine(aff, pending)
        z_lo = float(pre_acts[i].min()) - pads[i]
        z_hi = float(pre_acts[i].max()) + pads[i]
        try:
            rep = target_builder(act, budgets[i], Box.interval(z_lo, z_hi))
        except ConstructionError as exc:
            raise ConstructionError(f"layer {i}: {exc}") from exc
        for saff, sact in rep.net.layers:
            a, c = float(saff.W[0, 0]), float(saff.b[0])
            if pending is None:
                pending = AffineMap(a * np.eye(width), c * np.ones(width))
            else:
                pending = _scale_shift_after(pending, a, c)
            new_layers.append((pending, sact))
            pending = None
        fa, fc = float(rep.net.final.W[0, 0]), float(rep.net.final.b[0])
        if pending is None:
            pending = AffineMap(fa * np.eye(width), fc * np.ones(width))
        else:
            pending = _scale_shift_after(pending, fa, fc)
    final = net.final if pending is None else _compose_affine(net.final, pending)
    new_net = NeuralNet(tuple(new_layers), final)

    achieved = sup_gap(net, new_net, K, grid_per_axis)
    if achieved > epsilon:
        raise ConstructionError(
            f"substituted network misses the budget: gap {achieved:.6g} > "
            f"epsilon {epsilon:.6g}"
        )
    return new_net


@dataclass(frozen=True)
class DepthWitnessVerdict:
    """Outcome of the single-hidden-neuron feasibility search."""

    feasible: bool
    epsilon: float
    best_error: float
    best_params: tuple
    best_form: int


def _kinked_target(x):
    """The benchmark: identity on [0, 1], slope 0.2 on [-1, 0]."""
    return np.where(x >= 0, x, 0.2 * x)


def _form_point_errors(form: int, a, b, c: float):
    """Sup error of the two-slope candidate against the benchmark, evaluated
    at the only points where the piecewise-linear difference can peak:
    x in {-1, c, 0, 1}."""
    fc = 0.2 * c if c <= 0 else c
    if form == 1:
        at_m1 = np.abs(-a + b + 0.2)
        at_c = np.abs(a * c + b - fc)
        at_0 = np.abs(b - 9 * a * c) if c <= 0 else np.abs(b)
        at_1 = np.abs(10 * a + b - 9 * a * c - 1)
    else:
        at_m1 = np.abs(-10 * a + b + 0.2)
        at_c = np.abs(10 * a * c + b - fc)
        at_0 = np.abs(b + 9 * a * c) if c <= 0 else np.abs(b)
        at_1 = np.abs(a + b + 9 * a * c - 1)
    return np.maximum(np.maximum(at_m1, at_c), np.maximum(at_0, at_1))


def depth_witness_check(epsilon: float, grid: int = 201) -> DepthWitnessVerdict:
    """Search both two-slope candidate forms for a fit within epsilon.

    A single hidden leaky unit with slope ratio 10 produces exactly the
    candidates parametrized here by (a, b, c): slopes (a, 10a) or (10a, a)
    meeting at the kink x=c.  The search is a dense grid over a, b in
    [-5, 5], c in [-1, 1] followed by a simplex refinement; the verdict says
    whether any candidate beats epsilon at the four peak points.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    avals = np.linspace(-5.0, 5.0, grid)
    bvals = np.linspace(-5.0, 5.0, grid)
    cvals = np.linspace(-1.0, 1.0, grid)
    A = avals[:, None]
    B = bvals[None, :]
    best = (np.inf, (0.0, 0.0, 0.0), 1)
    for form in (1, 2):
        for c in cvals:
            err = _form_point_errors(form, A, B, float(c))
            flat = int(np.argmin(err))
            val = float(err.flat[flat])
            if val < best[0]:
                ia, ib = np.unravel_index(flat, err.shape)
                best = (val, (float(avals[ia]), float(bvals[ib]), float(c)), form)

    def objective(params, form):
        a = float(np.clip(params[0], -5.0, 5.0))
        b = float(np.clip(params[1], -5.0, 5.0))
        c = float(np.clip(params[2], -1.0, 1.0))
        return float(_form_point_errors(form, a, b, c))

    best_val, best_params, best_form = best
    for form in (1, 2):
        res = optimize.minimize(
            objective, np.array(best_params), args=(form,),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
        )
        refined = objective(res.x, form)
        if refined < best_val:
            best_val = refined
            best_params = (
                float(np.clip(res.x[0], -5.0, 5.0)),
                float(np.clip(res.x[1], -5.0, 5.0)),
                float(np.clip(res.x[2], -1.0, 1.0)),
            )
            best_form = form

    return DepthWitnessVerdict(
        feasible=bool(best_val < epsilon),
        epsilon=epsilon,
        best_error=best_val,
        best_params=best_params,
        best_form=best_form,
    )
