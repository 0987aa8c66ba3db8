"""Tests for the scalar activation catalogue and iteration utilities."""

import math

import numpy as np
import pytest

from narrowlab.activations import (
    KINDS,
    Activation,
    check_iteration_hypotheses,
    iterate,
    iterated_relu_error,
)

ALL_ACTS = [
    Activation("ReLU"),
    Activation("LeakyReLU", beta=0.2),
    Activation("ELU", beta=1.0),
    Activation("ELU", beta=0.5),
    Activation("CELU", beta=2.0),
    Activation("SELU", beta=1.6733, lam=1.0507),
    Activation("Softplus", beta=1.0),
    Activation("Softplus", beta=4.0),
    Activation("HardTanh"),
    Activation("ReLU6"),
]


def test_closed_form_values():
    assert Activation("LeakyReLU", beta=0.2)(-1.0) == -0.2
    assert Activation("ELU", beta=1.0)(0.0) == 0.0
    assert Activation("Softplus", beta=1.0)(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert Activation("ELU", beta=1.0)(-math.log(2)) == pytest.approx(-0.5, abs=1e-15)
    assert Activation("ReLU")(-3.0) == 0.0
    assert Activation("ReLU")(3.0) == 3.0
    assert Activation("HardTanh")(2.5) == 1.0
    assert Activation("HardTanh")(-2.5) == -1.0
    assert Activation("ReLU6")(7.0) == 6.0
    # CELU at x=-beta: beta * (e^{-1} - 1)
    assert Activation("CELU", beta=2.0)(-2.0) == pytest.approx(2 * math.expm1(-1), abs=1e-15)
    # SELU scales the whole curve by lam
    assert Activation("SELU", beta=1.0, lam=2.0)(3.0) == 6.0


def test_vector_eval_matches_scalar():
    xs = np.linspace(-5, 5, 41)
    for act in ALL_ACTS:
        vec = act(xs)
        assert vec.shape == xs.shape
        for i, x in enumerate(xs):
            assert vec[i] == act(float(x)), act.label()


def test_scalar_in_scalar_out():
    y = Activation("ELU", beta=1.0)(-1.0)
    assert isinstance(y, float)


def test_branch_boundaries_agree():
    # Both closed-form branches give the same value at each break point.
    assert Activation("LeakyReLU", beta=0.3)(0.0) == 0.0
    assert Activation("ELU", beta=0.7)(0.0) == 0.0
    assert Activation("CELU", beta=0.7)(0.0) == 0.0
    assert Activation("SELU", beta=0.7, lam=1.3)(0.0) == 0.0
    assert Activation("HardTanh")(1.0) == 1.0
    assert Activation("HardTanh")(-1.0) == -1.0
    assert Activation("ReLU6")(0.0) == 0.0
    assert Activation("ReLU6")(6.0) == 6.0


def test_monotone_nondecreasing_everywhere():
    xs = np.linspace(-20, 20, 2001)
    for act in ALL_ACTS:
        ys = act(xs)
        assert (np.diff(ys) >= 0).all(), act.label()


def test_invalid_parameters_rejected():
    pytest.raises(ValueError, lambda: Activation("ELU", beta=0.0))
    pytest.raises(ValueError, lambda: Activation("LeakyReLU", beta=-0.1))
    pytest.raises(ValueError, lambda: Activation("Softplus", beta=0.0))
    pytest.raises(ValueError, lambda: Activation("SELU", beta=1.0, lam=0.0))
    pytest.raises(ValueError, lambda: Activation("Swish"))
    pytest.raises(ValueError, lambda: Activation("ELU", beta=float("nan")))
    # ReLU ignores beta, so a nonsense beta is fine there
    Activation("ReLU", beta=-3.0)


def test_deriv_below_branch_convention():
    assert Activation("ReLU").deriv(0.0) == 0.0
    assert Activation("ELU", beta=0.5).deriv(0.0) == 0.5
    assert Activation("LeakyReLU", beta=0.2).deriv(0.0) == 0.2
    assert Activation("HardTanh").deriv(1.0) == 1.0
    assert Activation("HardTanh").deriv(-1.0) == 0.0
    assert Activation("ReLU6").deriv(6.0) == 1.0
    assert Activation("ReLU6").deriv(0.0) == 0.0


def test_deriv_matches_finite_differences():
    # Away from break points the analytic derivative must agree with a
    # central difference.
    xs = np.concatenate([np.linspace(-4, -0.5, 10), np.linspace(0.5, 4, 10)])
    h = 1e-6
    for act in ALL_ACTS:
        if act.kind in ("HardTanh", "ReLU6"):
            continue
        num = (act(xs + h) - act(xs - h)) / (2 * h)
        np.testing.assert_allclose(act.deriv(xs), num, atol=1e-6, err_msg=act.label())


def test_value_and_deriv_consistency():
    xs = np.linspace(-30, 30, 601)
    for act in ALL_ACTS:
        val, der = act.value_and_deriv(xs)
        assert np.array_equal(val, act(xs)), act.label()
        np.testing.assert_allclose(der, act.deriv(xs), rtol=0, atol=2.3e-16,
                                   err_msg=act.label())


def test_softplus_large_arguments_stable():
    sp = Activation("Softplus", beta=1.0)
    assert sp(1000.0) == 1000.0
    assert sp(-1000.0) == 0.0
    val, der = sp.value_and_deriv(np.array([800.0, -800.0]))
    assert np.isfinite(val).all() and np.isfinite(der).all()


def test_iterate_basic():
    leaky = Activation("LeakyReLU", beta=0.5)
    assert iterate(leaky, 3, -8.0) == -1.0
    for act in ALL_ACTS:
        if act.kind in ("HardTanh", "ReLU6", "SELU"):
            continue
        if act.kind == "Softplus":
            continue
        assert iterate(act, 100, 2.0) == 2.0, act.label()
    pytest.raises(ValueError, lambda: iterate(leaky, 0, 1.0))


def test_iterate_matches_direct_composition():
    act = Activation("ELU", beta=0.5)
    x = -1.0
    expected = x
    for _ in range(10):
        expected = act(expected)
    assert iterate(act, 10, -1.0) == expected
    assert -1.0 < expected < 0.0


def test_iterate_composes():
    act = Activation("ELU", beta=0.8)
    for m, n in [(1, 1), (2, 3), (5, 2)]:
        for x in (-2.0, -0.3, 0.7):
            assert iterate(act, m + n, x) == iterate(act, m, iterate(act, n, x))


def test_selu_with_unit_lam_equals_elu():
    xs = np.linspace(-10, 10, 501)
    for beta in (0.5, 1.0, 1.7):
        selu = Activation("SELU", beta=beta, lam=1.0)
        elu = Activation("ELU", beta=beta)
        assert np.array_equal(selu(xs), elu(xs))
        sv, sd = selu.value_and_deriv(xs)
        ev, ed = elu.value_and_deriv(xs)
        assert np.array_equal(sv, ev)
        assert np.array_equal(sd, ed)


def test_hypothesis_check_leaky():
    holds, b = check_iteration_hypotheses(Activation("LeakyReLU", beta=0.3), c=-1.0)
    assert holds and b == pytest.approx(0.3, abs=1e-15)
    holds, b = check_iteration_hypotheses(Activation("LeakyReLU", beta=1.5), c=-1.0)
    assert not holds and b == pytest.approx(1.5, abs=1e-15)


def test_hypothesis_check_elu():
    act = Activation("ELU", beta=0.5)
    holds, b = check_iteration_hypotheses(act, c=-1.0)
    assert holds and 0 < b < 1
    # The ratio 0.5*expm1(x)/x is largest at the right end of [-100, -1].
    assert b == pytest.approx(0.5 * math.expm1(-1.0) / -1.0, abs=1e-12)


def test_hypothesis_check_rejects_relu_breakers():
    # HardTanh is not the identity on all of [0, 100].
    holds, _ = check_iteration_hypotheses(Activation("HardTanh"), c=-1.0)
    assert not holds
    pytest.raises(ValueError, lambda: check_iteration_hypotheses(
        Activation("ELU"), c=0.5))
    pytest.raises(ValueError, lambda: check_iteration_hypotheses(
        Activation("ELU"), c=-1.0, samples=1))


def test_iterated_relu_error_leaky_exact():
    act = Activation("LeakyReLU", beta=0.5)
    err = iterated_relu_error(act, 20, (-1.0, 1.0))
    assert abs(err - 0.5 ** 20) < 1e-12


def test_iterated_relu_error_relu_idempotent():
    assert iterated_relu_error(Activation("ReLU"), 1, (-5.0, 5.0)) == 0.0


def test_iterated_relu_error_geometric_ratio():
    act = Activation("LeakyReLU", beta=0.5)
    errs = [iterated_relu_error(act, n, (-2.0, 2.0), grid=101) for n in (1, 2, 3, 4)]
    for a, b in zip(errs, errs[1:]):
        assert b / a == 0.5


def test_iterated_relu_error_elu_decreasing():
    act = Activation("ELU", beta=0.5)
    errs = [iterated_relu_error(act, n, (-2.0, 2.0), grid=2001)
            for n in (1, 2, 4, 8, 16, 32)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert iterated_relu_error(act, 30, (-2.0, 2.0)) < 1e-3


def test_kinds_catalogue_is_complete():
    assert set(KINDS) == {"ReLU", "LeakyReLU", "ELU", "CELU", "SELU",
                          "Softplus", "HardTanh", "ReLU6"}
