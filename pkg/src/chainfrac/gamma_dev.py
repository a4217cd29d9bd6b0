"""First-order analysis of discrete configurations.

Even/odd coarsening of a chain, slope-capped competitors built from it, the
exact splitting of the interaction energy into effective-potential and
residual parts, the resulting lower bound for the rescaled energy, and
compactness diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuum import ContinuumProfile, energy_h
from .discrete import energy_channels, energy_hn
from .effective import residual_r
from .errors import ConstructionFailure
from .potentials import ZeroLoad


def _anchors(n, parity):
    """Interpolation nodes: even nodes (parity 0) or odd nodes (parity 1), plus both ends."""
    idx = list(range(parity, n + 1, 2))
    if idx[0] != 0:
        idx.insert(0, 0)
    if idx[-1] != n:
        idx.append(n)
    return idx


def _interpolant(state, anchors):
    nodes = np.asarray(anchors, dtype=float) / state.n
    nodes[-1] = 1.0
    slopes = np.diff(state.u[anchors]) / np.diff(np.asarray(anchors) / state.n)
    return ContinuumProfile(nodes, slopes, (), state.ell, check=False)


def build_even_odd(state):
    """Affine interpolations of u through the even and the odd nodes (ends included)."""
    return _interpolant(state, _anchors(state.n, 0)), _interpolant(state, _anchors(state.n, 1))


@dataclass
class Competitor:
    profile: ContinuumProfile
    coarse: ContinuumProfile
    trace: list
    closeness: float

    def to_dict(self):
        return {"profile": self.profile.to_json(), "trace": self.trace, "closeness": self.closeness}


@dataclass
class CompetitorPair:
    v1: Competitor
    v2: Competitor

    @property
    def closeness(self):
        return max(self.v1.closeness, self.v2.closeness)

    def to_dict(self):
        return {"v1": self.v1.to_dict(), "v2": self.v2.to_dict(), "closeness": self.closeness}


def _competitor(state, anchors, gamma):
    n, u = state.n, state.u
    lam = 1.0 / n
    xs, slopes, jumps, trace = [0.0], [], [], []
    for a, b in zip(anchors[:-1], anchors[1:]):
        m = (u[b] - u[a]) / ((b - a) * lam)
        if b - a != 2 or not m > gamma:
            xs.append(b * lam)
            slopes.append(m)
            continue
        jl = u[a + 1] - u[a] - gamma * lam
        jr = u[a + 2] - u[a + 1] - gamma * lam
        shift = 0.0
        if jl < 0:
            shift, jr, jl = -jl, jr + jl, 0.0
        elif jr < 0:
            shift, jl, jr = jr, jl + jr, 0.0
        xs.extend([(a + 0.5) * lam, (a + 1.5) * lam, b * lam])
        slopes.extend([gamma, gamma, gamma])
        jumps.extend([((a + 0.5) * lam, jl), ((a + 1.5) * lam, jr)])
        trace.append({"block": [int(a), int(b)], "coarse_slope": float(m), "jump_left": float(jl),
                      "jump_right": float(jr), "shift": float(shift)})
    xs = np.asarray(xs)
    xs[-1] = 1.0
    bad = [j for j in jumps if j[1] < -1e-12 * (1.0 + abs(state.ell))]
    if bad:
        raise ConstructionFailure(f"negative jumps after translation: {bad}", trace)
    jumps = [(x, max(a, 0.0)) for x, a in jumps if a != 0.0]
    prof = ContinuumProfile(xs, np.asarray(slopes), jumps, state.ell, check=False)
    if abs(prof.compatibility_error()) > 1e-9 * (1.0 + abs(state.ell)):
        raise ConstructionFailure("competitor does not reach ell", trace)
    vals = _values_at_nodes(prof, n)
    closeness = float(np.max(np.abs(vals - u)) / lam)
    return prof, trace, closeness


def _values_at_nodes(profile, n):
    """v(i lambda) for i = 0..n; integer nodes never carry competitor jumps inside (0, 1)."""
    x = np.arange(n + 1) / n
    v = profile(x)
    v[0] = 0.0 if profile.node_jumps[0] == 0 else v[0]
    v[-1] = profile.ell
    return v


def build_competitors(state, gamma):
    """Slope-capped competitors v1 (even coarsening) and v2 (odd coarsening).

    On each two-bond block whose coarse slope exceeds gamma the profile is
    replaced by three slope-gamma pieces through u at the block's three
    nodes, with jumps half a bond from the middle node; a negative jump is
    removed by translating the middle piece.
    """
    pair = []
    for parity in (0, 1):
        anchors = _anchors(state.n, parity)
        prof, trace, c = _competitor(state, anchors, gamma)
        pair.append(Competitor(prof, _interpolant(state, anchors), trace, c))
    return CompetitorPair(*pair)


def _int_j0(profile, effective, envelope=False):
    f = effective.j0_star_star if envelope else effective.j0
    return float(np.sum(profile.widths * f(profile.slopes)))


def splitting_terms(state, model, effective):
    """Right-hand side pieces of the exact NN + NNN splitting."""
    lam = state.lam
    s = state.slopes
    v1, v2 = build_even_odd(state)
    half = 0.5 * _int_j0(v1, effective) + 0.5 * _int_j0(v2, effective)
    r = residual_r(model, effective, s[1:], s[:-1], exact=False)
    r_sum = float(np.sum(r))
    ends = s[[0, -1]]
    boundary = 0.5 * lam * float(np.sum(model._j1(ends) - effective.j0(ends)))
    return {"half_integrals": half, "r_sum": r_sum, "boundary": boundary, "r_terms": r}


def splitting_identity_check(state, model, effective):
    """|NN + NNN - (1/2 int J0(v1') + 1/2 int J0(v2') + lambda sum R + boundary)|."""
    ch = energy_channels(state, model, ZeroLoad())
    lhs = ch["nn"] + ch["nnn"]
    t = splitting_terms(state, model, effective)
    rhs = t["half_integrals"] + state.lam * t["r_sum"] + t["boundary"]
    return abs(lhs - rhs)


@dataclass
class LowerBound:
    lhs: float
    rhs_main: float
    slack: float
    envelope_gap: float
    r_sum: float

    def to_dict(self):
        return dict(self.__dict__)


def first_order_lower_bound(state, model, effective, load, competitors=None, quad_points=8):
    """LHS = [H_n - H(v1)/2 - H(v2)/2]/lambda against its envelope-gap + R-sum part."""
    lam = state.lam
    pair = competitors or build_competitors(state, effective.gamma)
    hn = energy_hn(state, model, load)
    h1 = energy_h(pair.v1.profile, effective, load, quad_points)
    h2 = energy_h(pair.v2.profile, effective, load, quad_points)
    lhs = (hn - 0.5 * h1 - 0.5 * h2) / lam
    gap = 0.0
    for c in (pair.v1.coarse, pair.v2.coarse):
        gap += _int_j0(c, effective) - _int_j0(c, effective, envelope=True)
    gap /= 2.0 * lam
    r_sum = float(np.sum(residual_r(model, effective, state.slopes[1:], state.slopes[:-1], exact=False)))
    rhs = gap + r_sum
    return LowerBound(lhs, rhs, lhs - rhs, gap, r_sum)


@dataclass
class CompactnessRecord:
    n: int
    count_stretched: dict
    count_oscillation: dict
    excess_sq: float
    min_slope: float
    eps_out_of_range: list = field(default_factory=list)
    h1n: float | None = None

    def to_dict(self):
        return {"n": self.n, "count_stretched": {str(k): v for k, v in self.count_stretched.items()},
                "count_oscillation": {str(k): v for k, v in self.count_oscillation.items()},
                "excess_sq": self.excess_sq, "min_slope": self.min_slope,
                "eps_out_of_range": self.eps_out_of_range, "h1n": self.h1n}


def compactness_diagnostics(state, gamma, gamma_c, eps_list=(0.05,)):
    """Counts of stretched and oscillating bonds, the squared excess below gamma_c, the minimal slope."""
    s = state.slopes
    stretched = {float(e): int(np.count_nonzero(s >= gamma + e)) for e in eps_list}
    osc = {float(e): int(np.count_nonzero(np.abs(np.diff(s)) >= e)) for e in eps_list}
    sub = s[s <= gamma_c]
    excess = float(np.sum(np.maximum(sub - gamma, 0.0) ** 2))
    limit = 0.5 * (gamma_c - gamma)
    flagged = [float(e) for e in eps_list if not 0 < e < limit]
    return CompactnessRecord(state.n, stretched, osc, excess, float(np.min(s)), flagged)


@dataclass
class JumpEstimate:
    flagged: list
    runs: list  # (first covered bond, last covered bond, x_start, x_end, amplitude)

    @property
    def count(self):
        return len(self.runs)

    def to_dict(self):
        return {"flagged": self.flagged, "runs": [list(r) for r in self.runs]}


def jump_detect_sqrt_n(state):
    """Indices i with (u^{i+2} - u^i)/(2 lambda) > sqrt(n) and the jumps of the frozen profile.

    On [i lambda, (i+2) lambda) the limit candidate is held at u^i for every
    flagged i; each maximal run of covered bonds becomes one jump whose
    amplitude is the rise of u across the run.
    """
    n = state.n
    m = state.nnn_slopes
    flagged = [int(i) for i in np.nonzero(m > math.sqrt(n))[0]]
    covered = np.zeros(n, dtype=bool)
    for i in flagged:
        covered[i:i + 2] = True
    runs = []
    k = 0
    while k < n:
        if covered[k]:
            start = k
            while k < n and covered[k]:
                k += 1
            amp = float(state.u[k] - state.u[start])
            runs.append((start, k - 1, start / n, k / n, amp))
        else:
            k += 1
    return JumpEstimate(flagged, runs)
