"""Tests for root certification, the reference maps, and collision finding."""

import numpy as np
import pytest

from narrowlab.certifier import (
    CertificationRefused,
    IntervalPairs,
    build_g,
    build_gstar,
    canonical_pairs,
    certify_self_intersection,
    compute_M,
    compute_epsilon,
    find_collision,
    pm_root,
)
from narrowlab.netcore import Box


def test_interval_pairs_validation():
    IntervalPairs([[0.0, 0.2]], [[0.8, 1.0]])
    pytest.raises(ValueError, lambda: IntervalPairs([[0.0, 0.5]], [[0.4, 1.0]]))
    pytest.raises(ValueError, lambda: IntervalPairs([[0.2, 0.1]], [[0.8, 1.0]]))
    pytest.raises(ValueError, lambda: IntervalPairs([[0.0, 0.2]], [[0.8, 1.1]]))
    pytest.raises(ValueError, lambda: IntervalPairs([[-0.1, 0.2]], [[0.8, 1.0]]))
    # intervals touching at one point still count as overlapping
    pytest.raises(ValueError, lambda: IntervalPairs([[0.0, 0.5]], [[0.5, 1.0]]))


def test_canonical_pairs():
    pairs = canonical_pairs(3)
    assert pairs.m == 3
    np.testing.assert_array_equal(pairs.a_pairs, np.tile([0.0, 0.2], (3, 1)))
    np.testing.assert_array_equal(pairs.b_pairs, np.tile([0.8, 1.0], (3, 1)))


def test_reference_map_values():
    g = build_g(1)
    assert g(np.array([0.3]))[0] == 2.0
    assert g(np.array([0.5]))[1] == 2.0
    np.testing.assert_array_equal(g(np.array([0.75])), [0.0, 1.5])
    np.testing.assert_array_equal(g(np.array([0.1])), [0.0, 0.0])
    np.testing.assert_array_equal(g(np.array([0.9])), [0.0, 0.0])


def test_reference_map_branch_continuity():
    g = build_g(1)
    # at each knot the two adjacent closed forms give the same value
    for t, odd, even in [(0.3, 2.0, 0.0), (0.5, 2.0, 2.0), (0.7, 0.0, 2.0)]:
        np.testing.assert_array_equal(g(np.array([t])), [odd, even])
    # continuity across the knots on a fine grid
    ts = np.linspace(0.0, 1.0, 100001)
    vals = g(ts[:, None])
    assert np.abs(np.diff(vals, axis=0)).max() < 1.1e-4


def test_reference_map_batches_and_validation():
    g = build_g(2)
    out = g(np.array([[0.3, 0.75], [0.5, 0.5]]))
    np.testing.assert_array_equal(out[0], [2.0, 0.0, 0.0, 1.5])
    np.testing.assert_array_equal(out[1], [2.0, 2.0, 2.0, 2.0])
    pytest.raises(ValueError, lambda: g(np.array([1.5, 0.0])))
    pytest.raises(ValueError, lambda: build_g(0))


def test_truncated_reference_map():
    gs = build_gstar(1, 2)
    g = build_g(1)
    ts = np.linspace(0, 1, 101)[:, None]
    np.testing.assert_array_equal(gs(ts), g(ts))
    gs = build_gstar(2, 3)
    np.testing.assert_array_equal(gs(np.array([0.3, 0.3])), [2.0, 0.0, 2.0])
    pytest.raises(ValueError, lambda: build_gstar(2, 2))
    pytest.raises(ValueError, lambda: build_gstar(2, 5))


def test_pm_root_scalar():
    certified, root = pm_root(lambda x: x, Box.interval(-1, 1), [-1])
    assert certified
    assert abs(root[0]) < 1e-8


def test_pm_root_linear_system():
    def f(p):
        p = np.atleast_2d(p)
        return np.stack([p[:, 0] - p[:, 1], p[:, 0] + p[:, 1]], axis=1)

    certified, root = pm_root(f, Box([-1, -1], [1, 1]), [-1, -1], grid=41)
    assert certified
    assert np.max(np.abs(f(root))) < 1e-8
    assert np.max(np.abs(root)) < 1e-6


def test_pm_root_no_sign_change_refused():
    certified, root = pm_root(lambda x: x * x + 1.0, Box.interval(-1, 1), [-1])
    assert not certified and root is None
    certified, root = pm_root(lambda x: x * x + 1.0, Box.interval(-1, 1), [1])
    assert not certified and root is None


def test_pm_root_signs_validation():
    pytest.raises(ValueError, lambda: pm_root(lambda x: x, Box.interval(-1, 1), [2]))
    pytest.raises(ValueError, lambda: pm_root(lambda x: x, Box.interval(-1, 1), [-1, 1]))


def test_pm_root_residual_shrinks_with_grid():
    def f(x):
        return x ** 3 - 0.3

    box = Box.interval(0.0, 1.0)
    residuals = []
    for grid in (11, 21, 41, 81):
        certified, root = pm_root(f, box, [-1], grid=grid)
        assert certified
        residuals.append(abs(float(f(root[0]))))
    for a, b in zip(residuals, residuals[1:]):
        assert b <= a + 1e-12
    assert residuals[-1] < 1e-8


def test_compute_M_canonical():
    pairs = canonical_pairs(1)
    assert compute_M(build_g(1), pairs, grid=101) == -1.0
    assert compute_M(build_g(2), canonical_pairs(2), grid=51) < 0
    assert compute_M(build_g(3), canonical_pairs(3), grid=11) < 0


def test_compute_M_nonnegative_for_constant_map():
    pairs = canonical_pairs(1)
    const = lambda t: np.zeros(np.atleast_2d(t).shape[0])[:, None] * np.ones(2)
    assert compute_M(const, pairs, grid=21) == 0.0


def test_compute_epsilon_canonical():
    pairs = canonical_pairs(1)
    g = build_g(1)
    M = compute_M(g, pairs, grid=101)
    eps = compute_epsilon(g, pairs, M, grid=101)
    # -M = 1 and both face sups are 2, so the quotient is 1/5, scaled by 0.9
    assert eps == 0.9 * (1.0 / 5.0)
    pytest.raises(ValueError, lambda: compute_epsilon(g, pairs, 0.0, grid=11))


def test_compute_epsilon_scaling():
    pairs = canonical_pairs(1)
    g = build_g(1)

    def scaled(c):
        return lambda t: c * g(t)

    M1 = compute_M(g, pairs, grid=51)
    M2 = compute_M(scaled(2.0), pairs, grid=51)
    assert M2 == 4.0 * M1
    # recomputation oracle: quotient becomes c^2|M| / (2c*sup + 1)
    eps2 = compute_epsilon(scaled(2.0), pairs, M2, grid=51)
    assert eps2 == pytest.approx(0.9 * min(0.5, 4.0 / 9.0), abs=1e-15)
    # shrinking the map can only shrink the certified tolerance linearly
    eps_half = compute_epsilon(scaled(0.5), pairs, compute_M(scaled(0.5), pairs, 51),
                               grid=51)
    eps1 = compute_epsilon(g, pairs, M1, grid=51)
    assert eps_half <= 0.5 * eps1 + 1e-15


def test_certify_self_test_issues_certificate():
    pairs = canonical_pairs(1)
    g = build_g(1)
    cert = certify_self_intersection(g, g, pairs, grid=101)
    assert cert.M == -1.0
    assert cert.epsilon == 0.9 * 0.2
    assert cert.collision_residual < 1e-9
    assert 0.0 <= cert.t1[0] <= 0.2
    assert 0.8 <= cert.t2[0] <= 1.0
    doc = cert.to_dict()
    assert doc["M"] == -1.0
    assert doc["collision"]["residual"] < 1e-9
    assert "grid" in doc["soundness"]


def test_certify_refuses_distant_map():
    pairs = canonical_pairs(1)
    g = build_g(1)
    far = lambda t: g(t) + 1.0
    with pytest.raises(CertificationRefused) as err:
        certify_self_intersection(far, g, pairs, grid=51)
    assert "gap" in err.value.reason


def test_certify_refuses_nonnegative_M():
    pairs = canonical_pairs(1)
    const = lambda t: np.zeros((np.atleast_2d(t).shape[0], 2))
    with pytest.raises(CertificationRefused) as err:
        certify_self_intersection(const, const, pairs, grid=21)
    assert "M" in err.value.reason


def test_find_collision_reference_map():
    pairs = canonical_pairs(1)
    t1, t2, gap = find_collision(build_g(1), pairs, grid=101)
    assert gap < 1e-9
    assert 0.0 <= t1[0] <= 0.2 and 0.8 <= t2[0] <= 1.0


def test_find_collision_injective_map_keeps_positive_gap():
    pairs = canonical_pairs(1)
    ident = lambda t: np.atleast_2d(t).repeat(2, axis=1)
    t1, t2, gap = find_collision(ident, pairs, grid=21)
    # the boxes are 0.6 apart, so an injective map cannot collide
    assert gap >= 0.6 - 1e-12


def test_find_collision_constant_map():
    pairs = canonical_pairs(1)
    const = lambda t: np.zeros((np.atleast_2d(t).shape[0], 2))
    _, _, gap = find_collision(const, pairs, grid=11)
    assert gap == 0.0
