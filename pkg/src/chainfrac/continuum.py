"""Continuum limit functional H on piecewise-affine profiles with jumps.

    H(u) = int_0^1 J0**(u') + Phi(x, u) dx,  D^s u >= 0,  u(0-) = 0, u(1+) = ell.

A profile is piecewise affine on a partition of [0, 1] with non-negative
jumps at nodes; jumps at 0 and 1 are allowed and mean u(0+) > 0 or
u(1-) < ell.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .errors import DomainError, NonConvergence, SignStructureViolation
from .potentials import SINGULAR

log = logging.getLogger(__name__)

PROFILE_VERSION = 1


def _gauss(points):
    t, w = np.polynomial.legendre.leggauss(points)
    return 0.5 * (t + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# profiles


class ContinuumProfile:
    """Piecewise-affine u with slopes per cell and jumps located at nodes."""

    def __init__(self, nodes, slopes, jumps=(), ell=None, check=True):
        nodes = np.asarray(nodes, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2 or slopes.shape != (len(nodes) - 1,):
            raise DomainError("need m + 1 nodes and m slopes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must increase strictly from 0 to 1")
        jumps = sorted((float(x), float(a)) for x, a in jumps)
        # put every jump on a node, splitting cells where needed
        extra = [x for x, _ in jumps if not np.any(np.isclose(nodes, x, rtol=0, atol=1e-14))]
        if extra:
            new = np.union1d(nodes, extra)
            cell = np.searchsorted(nodes, new[:-1], side="right") - 1
            slopes = slopes[cell]
            nodes = new
        amp = np.zeros(len(nodes))
        for x, a in jumps:
            k = int(np.argmin(np.abs(nodes - x)))
            amp[k] += a
        self.nodes = nodes
        self.slopes = slopes
        self.node_jumps = amp
        total = float(np.sum(slopes * np.diff(nodes)) + np.sum(amp))
        self.ell = total if ell is None else float(ell)
        if check and abs(total - self.ell) > 1e-9 * (1.0 + abs(self.ell)):
            raise DomainError(f"compatibility violated: slopes and jumps add to {total!r}, ell = {self.ell!r}")

    @classmethod
    def affine(cls, ell, m=1):
        return cls(np.linspace(0.0, 1.0, m + 1), np.full(m, float(ell)), (), ell)

    @property
    def widths(self):
        return np.diff(self.nodes)

    @property
    def jumps(self):
        idx = np.nonzero(self.node_jumps)[0]
        return [(float(self.nodes[k]), float(self.node_jumps[k])) for k in idx]

    @property
    def admissible(self):
        return bool(np.all(self.slopes > 0) and np.all(self.node_jumps >= 0))

    def limits(self):
        """(u(x_k-), u(x_k+)) at every node."""
        inc = self.slopes * self.widths
        minus = np.zeros(len(self.nodes))
        plus = np.zeros(len(self.nodes))
        acc = 0.0
        for k in range(len(self.nodes)):
            minus[k] = acc
            acc += self.node_jumps[k]
            plus[k] = acc
            if k < len(inc):
                acc += inc[k]
        return minus, plus

    def __call__(self, x):
        """u(x) taking the right limit at jump nodes (left limit at x = 1)."""
        x = np.asarray(x, dtype=float)
        _, plus = self.limits()
        k = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, len(self.slopes) - 1)
        return plus[k] + self.slopes[k] * (x - self.nodes[k])

    def compatibility_error(self):
        return float(np.sum(self.slopes * self.widths) + np.sum(self.node_jumps) - self.ell)

    def to_json(self):
        return {"version": PROFILE_VERSION, "nodes": self.nodes.tolist(), "slopes": self.slopes.tolist(),
                "jumps": [list(j) for j in self.jumps], "ell": self.ell}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["nodes"], doc["slopes"], [tuple(j) for j in doc["jumps"]], doc["ell"])

    def __repr__(self):
        return f"ContinuumProfile(cells={len(self.slopes)}, jumps={self.jumps}, ell={self.ell!r})"


# ---------------------------------------------------------------------------
# energy


def _cell_points(profile, points):
    t, w = _gauss(points)
    h = profile.widths
    _, plus = profile.limits()
    x = profile.nodes[:-1, None] + h[:, None] * t[None, :]
    u = plus[:-1, None] + (profile.slopes * h)[:, None] * t[None, :]
    return x, u, h[:, None] * w[None, :]


def energy_h(profile, effective, load, quad_points=8):
    """H(profile); singular when a slope is non-positive or a jump negative."""
    if not profile.admissible:
        return SINGULAR
    bulk = float(np.sum(profile.widths * effective.j0_star_star(profile.slopes)))
    x, u, w = _cell_points(profile, quad_points)
    return bulk + float(np.sum(w * load.phi(x, u)))


# ---------------------------------------------------------------------------
# crack predictor


@dataclass
class CrackPrediction:
    x: np.ndarray
    F: np.ndarray
    max_f: float
    M: list  # (a, b) pairs; a == b for isolated points

    def points(self):
        return [a for a, b in self.M if a == b]

    def endpoints(self):
        out = []
        for a, b in self.M:
            out.extend([a] if a == b else [a, b])
        return out

    def distance(self, x):
        """Distance from x to the set M."""
        x = np.asarray(x, dtype=float)
        d = np.full(x.shape, np.inf)
        for a, b in self.M:
            d = np.minimum(d, np.maximum(0.0, np.maximum(a - x, x - b)))
        return d

    def to_json(self):
        return {"max_F": self.max_f, "M": [{"start": a, "end": b} for a, b in self.M]}


def crack_predictor_f(load, profile=None, grid=4097, tol=None, quad_points=8, refine=True):
    """F(x) = int_x^1 -dPhi/du(y, u(y)) dy on a uniform grid and its argmax set M.

    ``profile`` supplies u for displacement-dependent loads (default: the
    affine profile with unit elongation is irrelevant for dead loads).
    """
    x = np.linspace(0.0, 1.0, grid)
    t, w = _gauss(quad_points)
    h = np.diff(x)
    y = x[:-1, None] + h[:, None] * t[None, :]
    u = profile(y) if profile is not None else np.zeros_like(y)
    seg = np.sum(-load.dphi_du(y, u) * w[None, :], axis=1) * h
    F = np.zeros(grid)
    F[:-1] = np.cumsum(seg[::-1])[::-1]
    fmax = float(np.max(F))
    band = 1e-8 * (1.0 + abs(fmax)) if tol is None else tol
    idx = np.nonzero(F >= fmax - band)[0]
    runs = np.split(idx, np.nonzero(np.diff(idx) > 1)[0] + 1)
    M = []
    for r in runs:
        a, b = float(x[r[0]]), float(x[r[-1]])
        if a == b and refine and 0 < r[0] < grid - 1:
            a = b = _refine_peak(load, profile, x[r[0] - 1], x[r[0] + 1], float(x[r[0]]))
        M.append((a, b))
    return CrackPrediction(x, F, fmax, M)


def _refine_peak(load, profile, lo, hi, guess):
    # F' = dPhi/du(x, u(x)), positive before an interior maximum and negative after
    def g(s):
        u = profile(np.asarray(s)) if profile is not None else 0.0
        return float(load.dphi_du(np.asarray(s), u))

    try:
        if g(lo) > 0 > g(hi):
            return float(brentq(g, lo, hi, xtol=1e-14))
    except ValueError:
        pass
    return guess


# ---------------------------------------------------------------------------
# minimization of H over profiles on a uniform mesh


@dataclass(frozen=True)
class InfHOpts:
    resolutions: tuple = (128, 512, 2048)
    tol: float = 1e-5
    grad_tol: float = 1e-10
    max_iter: int = 400
    quad_points: int = 8
    free_jumps: bool = False
    max_fixed_point: int = 10


class _MeshProblem:
    """H restricted to a uniform mesh, with jumps allowed at candidate nodes.

    Unknowns: left limits Y_1..Y_m (Y_m = u(1-)) and jumps J_c >= 0 at the
    candidate nodes c; the right limit at node k is Y_k + J_k and the jump at
    x = 1 is ell - Y_m >= 0.
    """

    def __init__(self, effective, load, ell, m, candidates, quad_points):
        self.eff, self.load, self.ell, self.m = effective, load, ell, m
        self.h = 1.0 / m
        self.nodes = np.linspace(0.0, 1.0, m + 1)
        self.cand = np.array(sorted(set(int(c) for c in candidates) | {0}), dtype=int)
        self.nvar = m + len(self.cand)
        self.t, w = _gauss(quad_points)
        self.w = w * self.h
        self.xq = self.nodes[:-1, None] + self.h * self.t[None, :]
        self.lb = np.full(self.nvar, -np.inf)
        self.lb[m:] = 0.0
        self.ub = np.full(self.nvar, np.inf)
        self.ub[m - 1] = ell
        jv = np.full(m + 1, -1)
        jv[self.cand] = m + np.arange(len(self.cand))
        self.jvar = jv

    def unpack(self, z):
        Y = np.concatenate([[0.0], z[:self.m]])
        Jn = np.zeros(self.m + 1)
        Jn[self.cand] = z[self.m:]
        p = Y[:-1] + Jn[:-1]
        q = Y[1:]
        return p, q, Jn

    def energy(self, z):
        p, q, _ = self.unpack(z)
        a = (q - p) / self.h
        if np.any(a <= 0):
            return math.inf
        u = p[:, None] * (1 - self.t) + q[:, None] * self.t
        return self.h * float(np.sum(self.eff.j0_star_star(a))) + float(np.sum(self.w * self.load.phi(self.xq, u)))

    def _scatter(self, dp, dq):
        m = self.m
        g = np.zeros(self.nvar)
        g[:m - 1] += dp[1:]  # Y_k for k = 1..m-1 as left end of cell k
        jk = self.jvar[:-1]
        mask = jk >= 0
        g[jk[mask]] += dp[mask]
        g[:m] += dq  # Y_{k+1} as right end of cell k
        return g

    def gradient(self, z):
        p, q, _ = self.unpack(z)
        a = (q - p) / self.h
        u = p[:, None] * (1 - self.t) + q[:, None] * self.t
        fu = self.load.dphi_du(self.xq, u) * self.w
        d = self.eff.j0ss_prime(a)
        dp = -d + np.sum(fu * (1 - self.t), axis=1)
        dq = d + np.sum(fu * self.t, axis=1)
        return self._scatter(dp, dq)

    def hessian(self, z):
        p, q, _ = self.unpack(z)
        m = self.m
        a = (q - p) / self.h
        u = p[:, None] * (1 - self.t) + q[:, None] * self.t
        fuu = self.load.d2phi_du2(self.xq, u) * self.w
        c = self.eff.j0ss_second(a) / self.h
        hpp = c + np.sum(fuu * (1 - self.t) ** 2, axis=1)
        hpq = -c + np.sum(fuu * self.t * (1 - self.t), axis=1)
        hqq = c + np.sum(fuu * self.t ** 2, axis=1)
        k = np.arange(m)
        yl = np.where(k >= 1, k - 1, -1)  # variable of Y_k
        jl = self.jvar[:-1]
        yr = k  # variable of Y_{k+1}
        rows, cols, vals = [], [], []

        def add(r, c_, v):
            mask = (r >= 0) & (c_ >= 0)
            rows.append(r[mask])
            cols.append(c_[mask])
            vals.append(v[mask])

        for left in (yl, jl):
            for left2 in (yl, jl):
                add(left, left2, hpp)
            add(left, yr, hpq)
            add(yr, left, hpq)
        add(yr, yr, hqq)
        return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(self.nvar, self.nvar))

    def initial(self, warm=None):
        m = self.m
        if warm is not None:
            minus, plus = warm.limits()
            Yfull = np.interp(self.nodes, warm.nodes, minus)
            # left limits between nodes of the warm profile follow u itself
            inside = ~np.isin(self.nodes, warm.nodes)
            Yfull[inside] = warm(self.nodes[inside])
            z = np.zeros(self.nvar)
            z[:m] = Yfull[1:]
            for j, c in enumerate(self.cand):
                xc = self.nodes[c]
                hit = np.isclose(warm.nodes, xc, atol=1e-14)
                z[m + j] = float(warm.node_jumps[hit][0]) if hit.any() else 0.0
            z[m - 1] = min(z[m - 1], self.ell)
            if math.isfinite(self.energy(z)):
                return z
        s0 = min(self.ell, 0.95 * self.eff.gamma)
        z = np.zeros(self.nvar)
        z[:m] = s0 * self.nodes[1:]
        return z

    def profile(self, z):
        p, q, Jn = self.unpack(z)
        a = (q - p) / self.h
        jumps = [(float(self.nodes[k]), float(Jn[k])) for k in range(self.m) if Jn[k] > 0]
        end = self.ell - q[-1]
        if end > 0:
            jumps.append((1.0, float(end)))
        return ContinuumProfile(self.nodes, a, jumps, self.ell, check=False)


def _projected_newton(prob, z, opts):
    """Bound-constrained damped Newton with an active set and LM regularisation."""
    f = prob.energy(z)
    if not math.isfinite(f):
        raise NonConvergence("initial mesh profile is infeasible")
    mu = 1e-8
    stall = 0
    pg_norm = math.inf
    for it in range(1, opts.max_iter + 1):
        g = prob.gradient(z)
        pg = z - np.clip(z - g, prob.lb, prob.ub)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm <= opts.grad_tol:
            return z, f, pg_norm, it, "converged"
        at_lb = (z <= prob.lb + 1e-15) & (g > 0)
        at_ub = (z >= prob.ub - 1e-15) & (g < 0)
        free = ~(at_lb | at_ub)
        H = prob.hessian(z)
        Hf = H[free][:, free]
        scale = max(float(np.max(np.abs(Hf.diagonal()))), 1e-12)
        d = np.zeros_like(z)
        d[free] = spsolve((Hf + mu * scale * sparse.identity(Hf.shape[0], format="csr")).tocsc(), -g[free])
        if not np.all(np.isfinite(d)) or g @ d >= 0:
            d = -g
            d[~free] = 0.0
        t = 1.0
        noise = 1e-14 * (1.0 + abs(f))
        accepted = False
        while t > 1e-16:
            trial = np.clip(z + t * d, prob.lb, prob.ub)
            ft = prob.energy(trial)
            if ft <= f + 1e-4 * float(g @ (trial - z)):
                accepted = True
                break
            if t == 1.0 and ft <= f + noise:
                gt = prob.gradient(trial)
                pgt = trial - np.clip(trial - gt, prob.lb, prob.ub)
                if np.max(np.abs(pgt)) < pg_norm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if mu < 1e6:
                mu *= 100.0
                continue
            return z, f, pg_norm, it, "line_search_stalled"
        mu = max(mu * 0.1, 1e-14) if t == 1.0 else min(mu * 10.0, 1e6)
        stall = stall + 1 if f - ft <= noise else 0
        z, f = trial, ft
        if stall >= 20:
            return z, f, pg_norm, it, "rounding_floor"
    return z, f, pg_norm, opts.max_iter, "max_iter"


def _candidates(prediction, m, free_jumps):
    if free_jumps:
        return range(m)
    out = {0}
    for xm in prediction.endpoints():
        k = int(round(xm * m))
        if 0 <= k < m:
            out.add(k)
    return out


def _inverse_stress(effective, sigma, iters=80):
    """Slope a <= gamma with J0**'(a) = sigma (gamma where sigma >= 0)."""
    sigma = np.asarray(sigma, dtype=float)
    lo = np.full(sigma.shape, 1e-3 * effective.gamma)
    hi = np.full(sigma.shape, effective.gamma)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = effective.j0_prime(mid) < sigma
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(sigma >= 0, effective.gamma, 0.5 * (lo + hi))


def _solve_linear_load(effective, load, ell, m, candidates, quad_points):
    """Exact mesh minimizer when dPhi/du does not depend on u.

    With slopes a_k and jumps J_j as unknowns the load term is linear,
    sum_k c_k a_k + sum_j d_j J_j, and optimality reads
    J0**'(a_k) = mu - c_k / h, with mu <= d_j for every candidate jump and
    equality where a jump is open. mu is fixed by the total length.
    """
    h = 1.0 / m
    nodes = np.linspace(0.0, 1.0, m + 1)
    t, w = _gauss(quad_points)
    xq = nodes[:-1, None] + h * t[None, :]
    force = -load.dphi_du(xq, np.zeros_like(xq))  # f(x) = -dPhi/du
    cell_int = np.sum(force * w, axis=1) * h
    tail = np.concatenate([np.cumsum(cell_int[::-1])[::-1], [0.0]])  # F at nodes
    inner = np.sum(force * w * (h * t), axis=1) * h
    c = -(h * tail[1:] + inner)
    cand = np.array(sorted(set(int(k) for k in candidates) | {0, m}), dtype=int)
    d = -tail[cand]
    cap = c / h
    mu_max = min(float(d.min()), float(cap.min()))

    def length(mu):
        return float(np.sum(h * _inverse_stress(effective, np.minimum(mu - cap, 0.0))))

    full = length(mu_max)
    if full >= ell:
        lo = mu_max - 1.0
        while length(lo) >= ell:
            lo = mu_max - 2.0 * (mu_max - lo)
        mu = brentq(lambda v: length(v) - ell, lo, mu_max, xtol=1e-15, rtol=1e-15)
        slopes = _inverse_stress(effective, np.minimum(mu - cap, 0.0))
        jumps = []
    else:
        mu = mu_max
        slopes = _inverse_stress(effective, np.minimum(mu - cap, 0.0))
        excess = ell - float(np.sum(h * slopes))
        band = 1e-12 * (1.0 + abs(mu_max))
        open_jumps = cand[d <= mu_max + band]
        if len(open_jumps):
            jumps = [(float(nodes[open_jumps[-1]]), excess)]
        else:
            k = int(np.argmin(cap))
            slopes[k] += excess / h
            jumps = []
    # the bisection leaves a tiny length mismatch; put it on the stiffest cell
    slopes = slopes + (ell - float(np.sum(h * slopes)) - sum(a for _, a in jumps)) / (m * h)
    return ContinuumProfile(nodes, slopes, jumps, ell, check=False), float(mu)


def minimize_on_mesh(effective, load, ell, m, candidates, opts=None, warm=None):
    opts = opts or InfHOpts()
    if not load.depends_on_u:
        profile, mu = _solve_linear_load(effective, load, ell, m, candidates, opts.quad_points)
        return profile, energy_h(profile, effective, load, opts.quad_points), 0.0, 1, "multiplier"
    prob = _MeshProblem(effective, load, ell, m, candidates, opts.quad_points)
    z, f, pg, it, reason = _projected_newton(prob, prob.initial(warm), opts)
    return prob.profile(z), f, pg, it, reason


@dataclass
class InfHResult:
    value: float
    profile: ContinuumProfile
    energies: dict = field(default_factory=dict)
    order: float = 1.0
    prediction: CrackPrediction | None = None
    fixed_point_iterations: int = 0
    fixed_point_converged: bool = True
    min_slope: float = 0.0
    details: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.profile

    def to_json(self):
        return {"inf_h": self.value, "energies": {str(k): v for k, v in self.energies.items()},
                "richardson_order": self.order, "min_slope": self.min_slope,
                "fixed_point_iterations": self.fixed_point_iterations,
                "fixed_point_converged": self.fixed_point_converged,
                "M": self.prediction.to_json() if self.prediction else None,
                "profile": self.profile.to_json(), "details": self.details}


def estimate_inf_h(effective, load, ell, opts=None):
    """Minimize H over mesh profiles at several resolutions and extrapolate.

    Jumps are allowed at 0, 1 and the endpoints/points of the argmax set M of
    F. For displacement-dependent loads M is recomputed from the current
    minimizer until it stops changing.
    """
    opts = opts or InfHOpts()
    if not ell > 0:
        raise DomainError(f"ell must be positive, got {ell!r}")
    res = sorted(opts.resolutions)
    m0 = res[0]
    profile = ContinuumProfile.affine(ell)
    pred = crack_predictor_f(load, profile)
    cands = _candidates(pred, m0, opts.free_jumps)
    iters, converged = 0, True
    if load.depends_on_u:
        converged = False
        for iters in range(1, opts.max_fixed_point + 1):
            profile, *_ = minimize_on_mesh(effective, load, ell, m0, cands, opts)
            pred = crack_predictor_f(load, profile)
            new = _candidates(pred, m0, opts.free_jumps)
            if set(new) == set(cands):
                converged = True
                break
            cands = new
        if not converged:
            log.warning("argmax set of F did not settle after %d iterations", iters)
    energies, details = {}, {}
    warm = None
    for m in res:
        mc = _candidates(pred, m, opts.free_jumps)
        profile, f, pg, it, reason = minimize_on_mesh(effective, load, ell, m, mc, opts, warm)
        energies[m] = f
        details[m] = {"grad_norm": pg, "iterations": it, "reason": reason}
        warm = profile
    value, order = _richardson([energies[m] for m in res], res)
    if len(res) >= 2 and abs(value - energies[res[-1]]) > opts.tol:
        raise NonConvergence(f"extrapolated inf H {value!r} differs from finest {energies[res[-1]]!r} "
                             f"by more than {opts.tol:g}")
    return InfHResult(value, profile, energies, order, pred, iters, converged,
                      float(np.min(profile.slopes)), details)


def _richardson(values, res):
    if len(values) < 3:
        return values[-1], 1.0
    e1, e2, e3 = values[-3:]
    r = res[-1] / res[-2]
    d1, d2 = e1 - e2, e2 - e3
    if abs(d2) <= 1e-14 * (1.0 + abs(e3)):
        return e3, 1.0
    ratio = d1 / d2 if d2 != 0 else 0.0
    order = float(np.clip(math.log(ratio) / math.log(r), 1.0, 4.0)) if ratio > 1 else 1.0
    return e3 - d2 / (r**order - 1.0), order


# ---------------------------------------------------------------------------
# optimality diagnostics


@dataclass
class ELReport:
    residual: float
    max_slope_jump: float
    test_resolution: int

    def to_dict(self):
        return {"residual": self.residual, "max_slope_jump": self.max_slope_jump,
                "test_resolution": self.test_resolution}


def euler_lagrange_residual(profile, effective, load, test_resolution=256, slope_tol=1e-6, quad_points=8):
    """Weak Euler-Lagrange residual against hat functions, plus slope continuity below gamma."""
    N = test_resolution
    y = np.linspace(0.0, 1.0, N + 1)
    br = np.union1d(profile.nodes, y)
    a0, b0 = br[:-1], br[1:]
    mid = 0.5 * (a0 + b0)
    cell = np.clip(np.searchsorted(profile.nodes, mid, side="right") - 1, 0, len(profile.slopes) - 1)
    tcell = np.clip(np.searchsorted(y, mid, side="right") - 1, 0, N - 1)
    slope = profile.slopes[cell]
    stress = effective.j0ss_prime(slope)
    width = b0 - a0
    t, w = _gauss(quad_points)
    xq = a0[:, None] + width[:, None] * t[None, :]
    uq = profile(xq)
    fq = load.dphi_du(xq, uq) * (width[:, None] * w[None, :])
    # on test cell c the hat of node c decreases, the hat of node c+1 increases
    phi_right = (xq - y[tcell][:, None]) * N
    phi_left = 1.0 - phi_right
    R = np.zeros(N + 1)
    np.add.at(R, tcell, -stress * width * N + np.sum(fq * phi_left, axis=1))
    np.add.at(R, tcell + 1, stress * width * N + np.sum(fq * phi_right, axis=1))
    residual = float(np.max(np.abs(R[1:-1])))
    s = profile.slopes
    low = (s[:-1] < effective.gamma - slope_tol) & (s[1:] < effective.gamma - slope_tol)
    jumps = np.abs(np.diff(s))[low]
    return ELReport(residual, float(np.max(jumps)) if len(jumps) else 0.0, N)


@dataclass
class JumpReport:
    x0: float
    u_minus: float
    u_plus: float
    phi_minus: float
    phi_plus: float
    phi_min: float
    discrepancy_minus: float | None
    discrepancy_plus: float | None
    boundary: bool

    def to_dict(self):
        return dict(self.__dict__)


def jump_discrepancy_check(profile, load, samples=1024):
    """Compare Phi at both sides of each jump with its minimum across the jump.

    Interior jumps need both sides minimal; at x = 0 only the right side and
    at x = 1 only the left side is constrained.
    """
    minus, plus = profile.limits()
    out = []
    for k in np.nonzero(profile.node_jumps)[0]:
        x0 = float(profile.nodes[k])
        lo, hi = float(minus[k]), float(plus[k])
        if k == len(profile.nodes) - 1:
            hi = profile.ell
        w = np.linspace(lo, hi, samples)
        vals = load.phi(np.full_like(w, x0), w)
        pmin = float(np.min(vals))
        pm, pp = float(vals[0]), float(vals[-1])
        boundary = bool(k == 0 or k == len(profile.nodes) - 1)
        dm = None if k == 0 else pm - pmin
        dp = None if k == len(profile.nodes) - 1 else pp - pmin
        out.append(JumpReport(x0, lo, hi, pm, pp, pmin, dm, dp, boundary))
    return out


# ---------------------------------------------------------------------------
# slope capping


def sign_structure(load, profile=None, x_samples=2049, w_samples=65, spread=None):
    """Per-x sign of dPhi/du, checked to be independent of w.

    Returns (x, sign) with sign in {-1, 0, 1}; raises SignStructureViolation
    with a witness (x, w1, w2) if both signs occur at one x.
    """
    x = np.linspace(0.0, 1.0, x_samples)
    if profile is not None:
        minus, plus = profile.limits()
        umin, umax = float(min(minus.min(), plus.min())), float(max(minus.max(), plus.max(), profile.ell))
    else:
        umin, umax = 0.0, 1.0
    spread = (1.0 + abs(umax - umin)) if spread is None else spread
    w = np.linspace(umin - spread, umax + spread, w_samples)
    vals = load.dphi_du(x[:, None], w[None, :])
    pos = vals > 0
    neg = vals < 0
    mixed = np.nonzero(pos.any(axis=1) & neg.any(axis=1))[0]
    if len(mixed):
        i = mixed[0]
        w1 = float(w[np.nonzero(pos[i])[0][0]])
        w2 = float(w[np.nonzero(neg[i])[0][0]])
        raise SignStructureViolation(
            f"sign of dPhi/du at x={float(x[i])!r} depends on w (positive at w={w1!r}, negative at w={w2!r})",
            (float(x[i]), w1, w2))
    sign = np.where(pos.any(axis=1), 1, np.where(neg.any(axis=1), -1, 0))
    return x, sign, float(np.mean(w))


def _pieces(load, x, sign, wref):
    """Split [0,1] where the sign of dPhi/du flips; returns [(a, b, sign)]."""
    nz = np.nonzero(sign)[0]
    if len(nz) == 0:
        return [(0.0, 1.0, 0)]
    cuts = []
    for i, j in zip(nz[:-1], nz[1:]):
        if sign[i] != sign[j]:
            if j == i + 1:
                f = lambda s: float(load.dphi_du(np.asarray(s), np.asarray(wref)))
                try:
                    cuts.append(float(brentq(f, x[i], x[j], xtol=1e-14)))
                except ValueError:
                    cuts.append(0.5 * (x[i] + x[j]))
            else:
                cuts.append(0.5 * (x[i + 1] + x[j - 1]))
    edges = [0.0] + cuts + [1.0]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        inside = sign[(x >= a) & (x <= b)]
        s = int(inside[np.nonzero(inside)[0][0]]) if np.any(inside) else 0
        out.append((a, b, s))
    return out


def cap_and_relocate(profile, load, effective):
    """Cap slopes at gamma and move the removed length to piece endpoints.

    [0, 1] is split where the sign of dPhi/du changes. Where Phi is
    nondecreasing in w the capped profile is anchored at the left end of the
    piece (so it lies below u); where it is nonincreasing it is anchored so
    that it ends at u's value at the right end (so it lies above u). Jumps
    at 0 and 1 restore the end values.
    """
    gamma = effective.gamma
    x, sign, wref = sign_structure(load, profile)
    pieces = _pieces(load, x, sign, wref)
    cuts = [a for a, _, _ in pieces[1:]]
    base = ContinuumProfile(profile.nodes, profile.slopes, profile.jumps + [(c, 0.0) for c in cuts],
                            profile.ell, check=False)
    nodes, slopes = base.nodes, base.slopes
    minus, plus = base.limits()
    capped = np.minimum(slopes, gamma)
    widths = base.widths
    new_jumps = np.zeros(len(nodes))
    value_left = 0.0  # running u~ at the left end of the current piece
    for a, b, s in pieces:
        ia = int(np.argmin(np.abs(nodes - a)))
        ib = int(np.argmin(np.abs(nodes - b)))
        rise = float(np.sum(capped[ia:ib] * widths[ia:ib]))
        if s < 0:
            # end at u(b-): start higher by the removed stretch and jumps
            start = float(minus[ib]) - rise
        else:
            start = float(plus[ia])
        new_jumps[ia] += start - value_left
        value_left = start + rise
    new_jumps[-1] += profile.ell - value_left
    if np.any(new_jumps < -1e-12 * (1.0 + abs(profile.ell))):
        raise SignStructureViolation("relocation produced a negative jump", (float(nodes[np.argmin(new_jumps)]),
                                                                             math.nan, math.nan))
    new_jumps = np.maximum(new_jumps, 0.0)
    jumps = [(float(nodes[k]), float(new_jumps[k])) for k in np.nonzero(new_jumps)[0]]
    return ContinuumProfile(nodes, capped, jumps, profile.ell, check=False)
