import json
import math

import numpy as np
import pytest

from chainfrac.effective import (EffectiveProfile, build_effective, certify_quadratic_lower_bound, compute_j0,
                                 effective_table, j0_star_star, residual_r)
from chainfrac.errors import CertificateFailure, DomainError
from chainfrac.potentials import LennardJones

A = 1 + 2.0**-12
B = 1 + 2.0**-6
# symmetric branch J0 = A z^-12 - 2 B z^-6: closed-form minimizer and minimum
GAMMA = (A / B) ** (1 / 6)
J0_GAMMA = -B * B / A
# J0 at 1.12, 2 and 50 from a brute-force scan over the split (independent grid search)
J0_AT_1_12 = -0.77408
J0_AT_2 = -0.50186


def brute_j0(z, n=400001):
    b = np.linspace(0.0, z - 0.3, n)
    v = (1 / (2 * z) ** 12 - 2 / (2 * z) ** 6) + 0.5 * (
        (1 / (z + b) ** 12 - 2 / (z + b) ** 6) + (1 / (z - b) ** 12 - 2 / (z - b) ** 6))
    return float(np.min(v))


def test_compute_j0_symmetric_below_threshold(lj):
    j0, b = compute_j0(lj, 0.9)
    assert b == 0.0
    assert j0 == pytest.approx(float(lj._j1(np.asarray(0.9)) + lj._j2(np.asarray(0.9))), abs=1e-12)


def test_compute_j0_at_one(lj):
    assert compute_j0(lj, 1.0)[0] == pytest.approx(-1.031005859375, abs=1e-12)


def test_compute_j0_escape_tail(lj):
    assert compute_j0(lj, 50.0)[0] == pytest.approx(-0.5, abs=1e-3)


@pytest.mark.parametrize("z,ref", [(1.12, J0_AT_1_12), (2.0, J0_AT_2)])
def test_compute_j0_against_brute_force(lj, z, ref):
    j0, _ = compute_j0(lj, z)
    assert j0 == pytest.approx(ref, abs=1e-5)
    assert j0 <= brute_j0(z) + 1e-12


def test_compute_j0_domain(lj):
    with pytest.raises(DomainError):
        compute_j0(lj, 0.0)


def test_gamma_matches_closed_form(eff):
    assert eff.gamma == pytest.approx(GAMMA, abs=1e-9)
    assert eff.j0_at_gamma == pytest.approx(J0_GAMMA, abs=1e-12)
    assert eff.gamma < 1.0
    assert eff.j0_at_gamma <= -1.031005859375


def test_gamma_without_nnn():
    p = build_effective(LennardJones(1.0, 2.0, nnn=(0.0, 0.0)))
    assert p.gamma == pytest.approx(1.0, abs=1e-9)
    assert p.j0_at_gamma == pytest.approx(-1.0, abs=1e-12)


def test_threshold_and_margin(eff):
    assert eff.gamma < eff.gamma_c < (13 * A / (7 * B)) ** (1 / 6)
    assert eff.split_certified
    assert eff.j0_infinity == -0.5


def test_envelope_values(eff):
    g = eff.gamma
    assert j0_star_star(eff, g) == pytest.approx(eff.j0_at_gamma, abs=1e-12)
    assert j0_star_star(eff, 10 * g) == eff.j0_at_gamma
    assert j0_star_star(eff, g / 2) > eff.j0_at_gamma
    assert j0_star_star(eff, g / 2) == pytest.approx(eff.j0(g / 2), abs=0)
    with pytest.raises(DomainError):
        j0_star_star(eff, -1.0)


def test_residual_examples(lj, eff):
    assert abs(residual_r(lj, eff, 0.9, 0.9)) <= 1e-9
    c = certify_quadratic_lower_bound(lj, eff)
    assert c > 0
    assert residual_r(lj, eff, 0.8, 1.0) >= c * 0.2**2
    assert residual_r(lj, eff, 0.7, 0.9) / 0.04 >= c
    assert residual_r(lj, eff, 1.5, 1.5) >= 0
    assert residual_r(lj, eff, -0.1, 1.0) == math.inf


def test_certificate_rejects_diagonal(lj, eff):
    t = np.linspace(0.5, 1.0, 5)
    with pytest.raises(DomainError):
        certify_quadratic_lower_bound(lj, eff, points=(t, t))


def test_certificate_failure_reports_witness(lj, eff):
    # a J0 shifted upwards makes R negative
    class Flat:
        gamma_c = eff.gamma_c
        def j0(self, z, exact=True):
            return np.asarray(lj._j1(np.asarray(z)) + lj._j2(np.asarray(z))) + 100.0
    with pytest.raises(CertificateFailure):
        certify_quadratic_lower_bound(lj, Flat(), points=(np.array([0.8]), np.array([0.9])))


def test_table_and_roundtrip(eff):
    t = effective_table(eff)
    assert set(t) == {"z", "j0", "j0_star_star", "splitter_b"}
    doc = json.loads(json.dumps(eff.to_json()))
    back = EffectiveProfile.from_json(doc)
    assert back.to_json() == eff.to_json()
    z = np.linspace(0.5, 5.0, 31)
    assert np.array_equal(back.j0(z), eff.j0(z))


def test_table_interpolation_close_to_exact(eff):
    z = np.linspace(eff.gamma_c, 8.0, 25)
    assert np.max(np.abs(eff.j0(z) - eff.j0(z, exact=True))) < 1e-6
