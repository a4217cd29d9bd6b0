import numpy as np

from chainfrac.axioms import validate_axioms
from chainfrac.effective import build_effective
from chainfrac.potentials import LennardJones, TabulatedModel


def test_lennard_jones_passes_all(lj, eff):
    rep = validate_axioms(lj, eff)
    assert rep.passed, rep.summary()
    assert [r.name for r in rep.results] == ["convexity", "regularity", "symmetric_split", "tails", "unique_minimum", "barrier"]
    w = rep["unique_minimum"].witness
    assert w["gamma"] < w["gamma_c"] and w["margin"] > 0


def test_quadratic_table_fails_barrier():
    z = np.linspace(0.01, 5.0, 500)
    m = TabulatedModel(z, (z - 1.0) ** 2, j1_inf=16.0, barrier_guard=0.3)
    rep = validate_axioms(m, build_effective(m, strict=False))
    assert not rep["barrier"].passed
    assert "barrier" in [r.name for r in rep.failures()]


def test_strong_nnn_repulsion_fails_minimum():
    m = LennardJones(1.0, 2.0, nnn=(4000.0, 0.0))
    rep = validate_axioms(m, build_effective(m, strict=False))
    assert not rep.passed
    assert rep.to_dict()["passed"] is False
