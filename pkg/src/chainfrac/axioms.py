"""Numerical checks of the structural hypotheses on J1, J2 and J0.

Each check samples the relevant functions and reports pass/fail with a
witness; nothing here raises on a failed hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effective import solve_inf_convolution


@dataclass
class AxiomResult:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "witness": self.witness}


@dataclass
class AxiomReport:
    results: list

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self):
        return [r for r in self.results if not r.passed]

    def to_dict(self):
        return {"passed": self.passed, "results": [r.to_dict() for r in self.results]}

    def summary(self):
        return "\n".join(f"[{r.name}] {'pass' if r.passed else 'FAIL'}: {r.detail}" for r in self.results)


def _check_convexity(model, eff, samples):
    top = eff.gamma_c + eff.convexity_margin
    z = np.geomspace(model.barrier_guard * 0.5, top * (1 - 1e-9), samples)
    d1 = model._dj1(z, 2)
    d0 = d1 + model._dj2(z, 2)
    bad1 = np.nonzero(~(d1 > 0))[0]
    bad0 = np.nonzero(~(d0 > 0))[0]
    # the closed form J1 + J2 is J0 only where the split stays symmetric
    zs = z[z >= eff.gamma_c]
    _, b, _ = solve_inf_convolution(model, zs, eff.search, eff.j1_argmin) if len(zs) else (None, np.zeros(0), None)
    asym = zs[b != 0]
    ok = len(bad1) == 0 and len(bad0) == 0 and len(asym) == 0
    witness = {"upper": top}
    if len(bad1):
        witness["j1_second_nonpositive_at"] = float(z[bad1[0]])
    if len(bad0):
        witness["j0_second_nonpositive_at"] = float(z[bad0[0]])
    if len(asym):
        witness["asymmetric_split_at"] = float(asym[0])
    return AxiomResult("convexity", ok, f"J0'' > 0 and J1'' > 0 on {len(z)} samples of (0, {top:.6g})", witness)


def _check_regularity(model, eff, samples):
    z = np.geomspace(model.barrier_guard, 10.0 * eff.j1_argmin, samples)
    vals = [model._dj1(z, k) for k in (1, 2)] + [model._dj2(z, k) for k in (1, 2)]
    bad = [i for i, v in enumerate(vals) if not np.all(np.isfinite(v))]
    return AxiomResult("regularity", not bad, f"finite first and second derivatives on {len(z)} samples",
                       {"nonfinite_channels": bad})


def _check_splitting(model, eff, samples):
    z = np.linspace(model.barrier_guard, eff.gamma_c, samples + 2)[1:-1]
    _, b, _ = solve_inf_convolution(model, z, eff.search, eff.j1_argmin)
    bad = np.nonzero(b != 0)[0]
    ok = len(bad) == 0 and eff.split_certified
    witness = {} if ok else {"z": float(z[bad[0]]) if len(bad) else None,
                             "b": float(b[bad[0]]) if len(bad) else None}
    return AxiomResult("symmetric_split", ok, f"symmetric split b* = 0 on {len(z)} samples below gamma_c", witness)


def _check_tails(model, eff, tol):
    far = 1e4 * eff.j1_argmin
    t1 = abs(float(model._j1(np.asarray(far))) - model.j1_inf)
    t2 = abs(float(model._j2(np.asarray(far))) - model.j2_inf)
    t0 = abs(eff.j0(far) - eff.j0_infinity)
    ok = max(t1, t2, t0) <= tol
    return AxiomResult("tails", ok, f"tails at z={far:g} within {tol:g} of their limits",
                       {"j1": t1, "j2": t2, "j0": t0, "j0_infinity": eff.j0_infinity})


def _check_minimum(model, eff):
    above = eff.grid >= eff.gamma_c
    inf_above = float(np.min(eff.j0_values[above])) if above.any() else math.inf
    inf_above = min(inf_above, eff.j0_infinity)
    ok = eff.gamma < eff.gamma_c and inf_above > eff.j0_at_gamma
    return AxiomResult("unique_minimum", ok, "unique minimum gamma < gamma_c and inf over [gamma_c, inf) above J0(gamma)",
                       {"gamma": eff.gamma, "gamma_c": eff.gamma_c, "margin": eff.gamma_c - eff.gamma,
                        "j0_at_gamma": eff.j0_at_gamma, "inf_above_gamma_c": inf_above})


def _check_barrier(model, threshold=1e6):
    g = model.barrier_guard
    z = np.linspace(g * 1e-3, g, 400)
    v = model._j1(z)
    neg = [float(model._j1(np.asarray(t))) for t in (0.0, -0.5)]
    decreasing = bool(np.all(np.diff(v) < 0))
    big = float(v[-1]) > threshold
    singular = all(math.isinf(x) and x > 0 for x in neg)
    ok = decreasing and big and singular
    return AxiomResult("barrier", ok, f"J1 decreasing on (0, {g:.6g}], J1(guard) > {threshold:g}, singular for z <= 0",
                       {"j1_at_guard": float(v[-1]), "decreasing": decreasing, "singular_nonpositive": singular})


def validate_axioms(model, effective, samples=2000, tail_tol=1e-3):
    """Sample the structural hypotheses for ``model`` and its effective profile."""
    return AxiomReport([
        _check_convexity(model, effective, samples),
        _check_regularity(model, effective, samples),
        _check_splitting(model, effective, 64),
        _check_tails(model, effective, tail_tol),
        _check_minimum(model, effective),
        _check_barrier(model),
    ])
