import math
from fractions import Fraction

import numpy as np
import pytest

from chainfrac.errors import DomainError
from chainfrac.expressions import Expression, parse_number
from chainfrac.potentials import (SINGULAR, DeadLoad, LennardJones, LiveLoad, OneSidedQuartic,
                                  QuadraticWell, TabulatedModel, ZeroLoad, eval_derivatives, eval_j1,
                                  eval_j2, load_from_dict, model_from_dict)


def lj_exact(z, c1=1, c2=2):
    z = Fraction(z)
    return c1 / z**12 - c2 / z**6


def test_j1_values(lj):
    assert eval_j1(lj, 1.0) == -1.0
    assert eval_j1(lj, 0.5) == 3968.0 == float(lj_exact(Fraction(1, 2)))
    assert eval_j1(lj, -0.5) == SINGULAR
    assert eval_j1(lj, 0.0) == SINGULAR


def test_j2_values(lj):
    assert eval_j2(lj, 0.5) == -1.0
    assert eval_j2(lj, 1.0) == -0.031005859375 == float(lj_exact(2))
    assert eval_j2(lj, 0.0) == SINGULAR


def test_derivatives(lj):
    assert eval_derivatives(lj, 1.0, 1) == pytest.approx(0.0, abs=1e-14)
    z = (13 / 7) ** (1 / 6)
    assert eval_derivatives(lj, z, 2) == pytest.approx(0.0, abs=1e-12)
    assert eval_derivatives(lj, 2.0, 1) == pytest.approx(-12 * 2**-13 + 12 * 2**-7, rel=1e-14)
    assert eval_derivatives(lj, 2.0, 1) > 0


def test_derivatives_match_finite_differences(lj):
    z = np.linspace(0.6, 3.0, 50)
    h = 1e-6
    fd = (lj._j1(z + h) - lj._j1(z - h)) / (2 * h)
    assert np.allclose(lj._dj1(z, 1), fd, rtol=1e-6, atol=1e-8)
    fd2 = (lj._j2(z + h) - lj._j2(z - h)) / (2 * h)
    assert np.allclose(lj._dj2(z, 1), fd2, rtol=1e-6, atol=1e-8)


def test_lj_minimizer(lj):
    z, v = lj.j1_minimizer()
    assert z == pytest.approx(1.0, abs=1e-12)
    assert v == -1.0


def test_lj_rejects_bad_coefficients():
    with pytest.raises(DomainError):
        LennardJones(-1.0, 2.0)


def test_nnn_switch_off():
    m = LennardJones(1.0, 2.0, nnn=(0.0, 0.0))
    assert m._j2(np.array([0.7, 1.3])).tolist() == [0.0, 0.0]


def test_tabulated_model_interpolates():
    z = np.linspace(0.5, 4.0, 400)
    m = TabulatedModel(z, 1 / z**12 - 2 / z**6, j1_inf=0.0)
    assert float(m._j1(np.asarray(1.3))) == pytest.approx(1 / 1.3**12 - 2 / 1.3**6, abs=1e-4)
    assert float(m._j1(np.asarray(-1.0))) == SINGULAR


def test_model_from_dict_roundtrip(lj):
    assert model_from_dict(lj.to_dict()).to_dict() == lj.to_dict()
    with pytest.raises(DomainError):
        model_from_dict({"kind": "morse"})


def test_loads():
    x = np.array([0.0, 0.5, 1.0])
    w = np.array([1.0, 2.0, 3.0])
    assert np.all(ZeroLoad().phi(x, w) == 0)
    d = DeadLoad("x - 1/2")
    assert np.allclose(d.phi(x, w), -(x - 0.5) * w)
    assert np.allclose(d.dphi_du(x, w), -(x - 0.5))
    q = QuadraticWell("x^2")
    assert np.allclose(q.phi(x, w), (w - x**2) ** 2)
    assert np.allclose(q.dphi_du(x, w), 2 * (w - x**2))
    o = OneSidedQuartic("x", 1)
    assert np.allclose(o.phi(x, w), np.maximum(w - x, 0) ** 4)
    live = LiveLoad("-w")
    assert np.allclose(live.phi(x, w), 0.5 * w**2, atol=1e-10)


def test_load_from_dict_constants():
    q = load_from_dict({"kind": "quadratic_well", "w": "1.5*gamma*x^2 + (ell - 1.5*gamma)*x"},
                       {"gamma": 1.0, "ell": 2.0})
    assert float(q.w_tilde(np.asarray(1.0))) == pytest.approx(2.0)
    with pytest.raises(DomainError, match="supported kinds"):
        load_from_dict({"kind": "gravity"})


def test_expression_grammar():
    e = Expression("sin(x)^2 + cos(x)^2 - exp(0)")
    assert np.allclose(e(np.linspace(0, 3, 7)), 0.0)
    assert parse_number("2*gamma", {"gamma": 1.5}) == 3.0
    with pytest.raises(DomainError):
        Expression("import os")
    assert math.isclose(float(Expression("pi")(np.asarray(0.0))), math.pi)
