import math

import numpy as np
import pytest

from chainfrac.discrete import (ChainState, MinimizeOpts, energy_hn, gradient_hn, minimize_hn, refine_state,
                                rescaled_energy)
from chainfrac.errors import BoundaryViolation, DomainError, NoFeasibleStart
from chainfrac.potentials import DeadLoad, QuadraticWell, ZeroLoad


def fd_gradient(state, model, load, h=1e-6):
    g = np.zeros(state.n - 3)
    free = state.free
    for k in range(len(free)):
        e = np.zeros_like(free)
        e[k] = h
        g[k] = (energy_hn(state.with_free(free + e), model, load)
                - energy_hn(state.with_free(free - e), model, load)) / (2 * h)
    return g


def test_state_boundary_conditions():
    st = ChainState.affine(8, 2.0, 0.9, 1.1)
    assert st.u[0] == 0 and st.u[-1] == 2.0
    assert st.u[1] == pytest.approx(0.9 / 8) and st.u[-2] == pytest.approx(2.0 - 1.1 / 8)
    u = st.u.copy()
    u[1] += 0.01
    with pytest.raises(BoundaryViolation):
        ChainState(8, 2.0, 0.9, 1.1, u)
    with pytest.raises(DomainError):
        ChainState.affine(3, 1.0, 1.0, 1.0)


def test_affine_energy_n4(lj):
    s = 0.9
    st = ChainState.affine(4, s, s, s)
    j1, j2 = float(lj._j1(np.asarray(s))), float(lj._j2(np.asarray(s)))
    ref = 0.25 * (4 * j1 + 3 * j2)
    assert energy_hn(st, lj, ZeroLoad()) == pytest.approx(ref, rel=1e-14)
    # Phi = -u: subtract lambda^2 s (0 + 1 + 2 + 3 + 4)
    assert energy_hn(st, lj, DeadLoad("1")) == pytest.approx(ref - 0.25 * s * 0.25 * 10, rel=1e-14)


def test_nonpositive_bond_is_singular(lj):
    st = ChainState.affine(6, 1.0, 1.0, 1.0)
    free = st.free.copy()
    free[1] = free[0] - 0.01
    assert energy_hn(st.with_free(free), lj, ZeroLoad()) == math.inf


def test_gradient_matches_fd(lj):
    rng = np.random.default_rng(3)
    st = ChainState.from_slopes(16, 1.5, 1.0, 1.0, rng.uniform(0.8, 2.0, 14))
    load = DeadLoad("x - 1/2")
    g = gradient_hn(st, lj, load)
    assert np.allclose(g, fd_gradient(st, lj, load), rtol=1e-6, atol=1e-9)


def test_stationary_affine_chain(lj):
    # J1'(s) + J2'(s) = 0 at the symmetric-branch minimizer: the affine chain is critical inside
    s = ((1 + 2.0**-12) / (1 + 2.0**-6)) ** (1 / 6)
    g = gradient_hn(ChainState.affine(32, s, s, s), lj, ZeroLoad())
    assert np.max(np.abs(g)) < 1e-12


def test_minimizer_compressive_is_affine(lj, eff):
    ell = 0.8 * eff.gamma
    rep = minimize_hn(ChainState.affine(32, ell, ell, ell), lj, ZeroLoad(), gamma=eff.gamma)
    assert rep.reason == "converged"
    assert np.max(np.abs(rep.state.slopes - ell)) < 1e-8
    assert np.max(np.abs(gradient_hn(rep.state, lj, ZeroLoad()))) <= 1e-9


def test_minimizer_tension_concentrates(lj, eff):
    g = eff.gamma
    rep = minimize_hn(ChainState.affine(64, 2 * g, g, g), lj, ZeroLoad(), gamma=g)
    steep = np.nonzero(rep.state.slopes > 2 * g)[0]
    assert len(steep) == 1
    assert np.all(np.delete(rep.state.slopes, steep) < 1.01 * g)
    assert rep.to_dict()["candidate_global_minimizer"] is True


def test_quadratic_well_tracks_target(lj, eff):
    g = eff.gamma
    ell = 2 * g
    w = QuadraticWell(f"1.5*{g!r}*x^2 + ({ell!r} - 1.5*{g!r})*x")
    dist = []
    for n in (32, 128):
        rep = minimize_hn(ChainState.affine(n, ell, g, g), lj, w, gamma=g)
        x = rep.state.x
        dist.append(float(np.mean(np.abs(rep.state.u - w.w_tilde(x)))))
    assert dist[1] < dist[0]


def test_no_feasible_start(lj):
    # lambda (theta0 + theta1) = ell leaves no length for the interior bonds
    st = ChainState(4, 0.5, 2.0, 2.0, np.array([0.0, 0.5, 0.25, 0.0, 0.5]))
    with pytest.raises(NoFeasibleStart):
        minimize_hn(st, lj, ZeroLoad())


def test_deterministic(lj, eff):
    g = eff.gamma
    opts = MinimizeOpts(seed=7)
    a = minimize_hn(ChainState.affine(24, 2 * g, g, g), lj, DeadLoad("-1"), opts, gamma=g)
    b = minimize_hn(ChainState.affine(24, 2 * g, g, g), lj, DeadLoad("-1"), opts, gamma=g)
    assert np.array_equal(a.state.u, b.state.u) and a.energy == b.energy


def test_refine_keeps_single_crack(lj, eff):
    g = eff.gamma
    rep = minimize_hn(ChainState.affine(32, 2 * g, g, g), lj, ZeroLoad(), gamma=g)
    st = refine_state(rep.state, 64, g)
    assert st.n == 64 and np.count_nonzero(st.slopes > 1.5 * g) == 1


def test_rescaled_energy_zero_case(lj):
    st = ChainState.affine(10, 1.0, 1.0, 1.0)
    assert rescaled_energy(st, lj, ZeroLoad(), energy_hn(st, lj, ZeroLoad())) == 0.0
