"""Discrete chain energy H_n, its gradient and a multi-start minimizer.

A configuration is u^0..u^n with lambda = 1/n, u^0 = 0, u^n = ell,
u^1 = lambda theta0 and u^{n-1} = ell - lambda theta1. The free coordinates
are u^2..u^{n-2}.

    H_n = sum_i lambda J1(s_i) + sum_i lambda J2(m_i) + sum_i lambda Phi(i lambda, u^i)

with s_i = (u^{i+1} - u^i)/lambda and m_i = (u^{i+2} - u^i)/(2 lambda).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

from .errors import BoundaryViolation, DomainError, NoFeasibleStart, SingularState
from .potentials import SINGULAR

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChainState:
    n: int
    ell: float
    theta0: float
    theta1: float
    u: np.ndarray

    def __post_init__(self):
        if self.n < 4:
            raise DomainError(f"chain needs n >= 4, got {self.n}")
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.n + 1,):
            raise DomainError(f"expected {self.n + 1} displacements, got shape {u.shape}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        tol = 1e-12 * (1.0 + abs(self.ell))
        lam = 1.0 / self.n
        checks = [("u^0", u[0], 0.0), ("u^n", u[-1], self.ell),
                  ("u^1", u[1], lam * self.theta0), ("u^{n-1}", u[-2], self.ell - lam * self.theta1)]
        bad = [f"{name}={got!r} (expected {want!r})" for name, got, want in checks if abs(got - want) > tol]
        if bad:
            raise BoundaryViolation("boundary conditions violated: " + ", ".join(bad))

    @property
    def lam(self):
        return 1.0 / self.n

    @property
    def x(self):
        return np.arange(self.n + 1) / self.n

    @property
    def slopes(self):
        return np.diff(self.u) * self.n

    @property
    def nnn_slopes(self):
        return (self.u[2:] - self.u[:-2]) * (0.5 * self.n)

    @property
    def free(self):
        return self.u[2:-2].copy()

    @property
    def feasible(self):
        return bool(np.all(self.slopes > 0))

    def with_free(self, free):
        u = np.array(self.u)
        u[2:-2] = free
        return ChainState(self.n, self.ell, self.theta0, self.theta1, u)

    @classmethod
    def from_free(cls, n, ell, theta0, theta1, free):
        u = np.empty(n + 1)
        u[0], u[1], u[-2], u[-1] = 0.0, theta0 / n, ell - theta1 / n, ell
        u[2:-2] = free
        return cls(n, ell, theta0, theta1, u)

    @classmethod
    def affine(cls, n, ell, theta0, theta1):
        """Boundary nodes fixed, interior linear between u^1 and u^{n-1}."""
        lam = 1.0 / n
        a, b = lam * theta0, ell - lam * theta1
        u = np.empty(n + 1)
        u[1:-1] = np.linspace(a, b, n - 1)
        u[0], u[-1] = 0.0, ell
        return cls(n, ell, theta0, theta1, u)

    @classmethod
    def from_slopes(cls, n, ell, theta0, theta1, slopes):
        """Build a state from the n - 2 interior bond slopes s_1..s_{n-2}.

        The slopes are shifted uniformly so that the boundary conditions hold.
        """
        lam = 1.0 / n
        s = np.asarray(slopes, dtype=float)
        span = ell - lam * (theta0 + theta1)
        s = s + (span - lam * s.sum()) / (lam * len(s))
        u = np.empty(n + 1)
        u[0] = 0.0
        u[1] = lam * theta0
        u[2:] = u[1] + lam * np.cumsum(np.append(s, theta1))
        u[-1], u[-2] = ell, ell - lam * theta1
        return cls(n, ell, theta0, theta1, u)

    def to_rows(self):
        s = np.append(self.slopes, np.nan)
        return [(i, float(x), float(v), float(sl)) for i, (x, v, sl) in enumerate(zip(self.x, self.u, s))]


def energy_channels(state, model, load):
    """NN, NNN and load contributions to H_n, each singular-propagating."""
    lam = state.lam
    s, m = state.slopes, state.nnn_slopes
    if np.any(s <= 0) or np.any(m <= 0):
        nn = SINGULAR if np.any(s <= 0) else lam * float(np.sum(model._j1(s)))
        return {"nn": nn, "nnn": SINGULAR, "load": lam * float(np.sum(load.phi(state.x, state.u)))}
    return {
        "nn": lam * float(np.sum(model._j1(s))),
        "nnn": lam * float(np.sum(model._j2(m))),
        "load": lam * float(np.sum(load.phi(state.x, state.u))),
    }


def energy_hn(state, model, load):
    """H_n of ``state``; singular if any NN or NNN slope is non-positive."""
    lam = state.lam
    s, m = state.slopes, state.nnn_slopes
    if np.any(s <= 0) or np.any(m <= 0):
        return SINGULAR
    return lam * float(np.sum(model._j1(s)) + np.sum(model._j2(m)) + np.sum(load.phi(state.x, state.u)))


def _full_gradient(u, n, model, load, x):
    lam = 1.0 / n
    s = np.diff(u) * n
    m = (u[2:] - u[:-2]) * (0.5 * n)
    d1 = model._dj1(s, 1)
    d2 = model._dj2(m, 1)
    g = np.zeros(n + 1)
    g[1:] += d1
    g[:-1] -= d1
    g[2:] += 0.5 * d2
    g[:-2] -= 0.5 * d2
    g += lam * load.dphi_du(x, u)
    return g


def gradient_hn(state, model, load):
    """dH_n/du^i for the free indices i = 2..n-2."""
    s = state.slopes
    if np.any(s <= model.barrier_guard):
        k = int(np.argmin(s))
        raise SingularState(f"bond {k} has slope {s[k]!r} <= barrier guard {model.barrier_guard!r}")
    return _full_gradient(state.u, state.n, model, load, state.x)[2:-2]


def _hessian_banded(u, n, model, load, x):
    """Upper banded storage (3 x n_free) of the Hessian on the free indices."""
    lam = 1.0 / n
    s = np.diff(u) * n
    m = (u[2:] - u[:-2]) * (0.5 * n)
    a = model._dj1(s, 2) * n
    b = model._dj2(m, 2) * (0.25 * n)
    size = n + 1
    diag = np.zeros(size)
    off1 = np.zeros(size - 1)
    off2 = np.zeros(size - 2)
    diag[1:] += a
    diag[:-1] += a
    off1 -= a
    diag[2:] += b
    diag[:-2] += b
    off2 -= b
    diag += lam * load.d2phi_du2(x, u)
    k = size - 4
    ab = np.zeros((3, k))
    ab[2] = diag[2:-2]
    ab[1, 1:] = off1[2:-2]
    ab[0, 2:] = off2[2:-2]
    return ab


@dataclass(frozen=True)
class MinimizeOpts:
    tol: float = 1e-9
    max_iter: int = 500
    restarts: int = 8
    seed: int = 0
    gd_iters: int = 25
    crack_sites: tuple = ()
    warm_start: ChainState | None = None
    jobs: int = 1
    degeneracy_state_tol: float = 1e-6
    degeneracy_energy_tol: float = 1e-10


@dataclass
class MinimizeReport:
    state: ChainState
    energy: float
    grad_norm: float
    iterations: int
    restarts_used: int
    reason: str
    start: str = "affine"
    degenerate: bool = False
    candidates: list = field(default_factory=list)

    def to_dict(self):
        return {
            "n": self.state.n, "ell": self.state.ell, "theta0": self.state.theta0, "theta1": self.state.theta1,
            "energy": self.energy, "grad_norm": self.grad_norm, "iterations": self.iterations,
            "restarts_used": self.restarts_used, "reason": self.reason, "start": self.start,
            "degenerate": self.degenerate, "candidate_global_minimizer": True,
            "candidates": self.candidates,
        }


def _descend(state, model, load, opts):
    """Backtracking gradient descent followed by a damped Newton polish.

    Every accepted step keeps all slopes above the barrier guard and does
    not increase the energy.
    """
    n = state.n
    x = state.x
    u = np.array(state.u)
    guard = model.barrier_guard

    def energy(v):
        s = np.diff(v) * n
        if np.any(s <= guard):
            return math.inf
        m = (v[2:] - v[:-2]) * (0.5 * n)
        return (np.sum(model._j1(s)) + np.sum(model._j2(m)) + np.sum(load.phi(x, v))) / n

    f = energy(u)
    if not math.isfinite(f):
        raise SingularState("initial configuration has a bond at or below the barrier guard")
    step = 1.0 / n
    reason = "max_iter"
    it = 0
    gnorm = math.inf
    for it in range(1, opts.max_iter + 1):
        g = _full_gradient(u, n, model, load, x)
        g[:2] = 0.0
        g[-2:] = 0.0
        gnorm = float(np.max(np.abs(g))) if n > 4 else float(abs(g[2]))
        if gnorm <= opts.tol:
            reason = "converged"
            break
        if it <= opts.gd_iters:
            d = -g
        else:
            ab = _hessian_banded(u, n, model, load, x)
            rhs = -g[2:-2]
            shift = 0.0
            scale = max(float(np.max(np.abs(ab[2]))), 1e-300)
            while True:
                try:
                    abs_ = ab.copy()
                    abs_[2] += shift
                    c = cholesky_banded(abs_)
                    d_free = cho_solve_banded((c, False), rhs)
                    break
                except LinAlgError:
                    shift = max(2.0 * shift, 1e-10 * scale)
            d = np.zeros_like(u)
            d[2:-2] = d_free
            step = 1.0
        slope = float(g @ d)
        if slope >= 0:
            d = -g
            slope = -float(g @ g)
        t = step
        noise = 1e-14 * (1.0 + abs(f))
        while True:
            trial = u + t * d
            ft = energy(trial)
            if ft <= f + 1e-4 * t * slope:
                break
            if t == 1.0 and it > opts.gd_iters and ft <= f + noise:
                # energy change is below rounding: judge the Newton step by the gradient
                gt = _full_gradient(trial, n, model, load, x)[2:-2]
                if np.max(np.abs(gt)) < gnorm:
                    break
            t *= 0.5
            if t < 1e-20:
                break
        if not ft <= f + noise:
            reason = "line_search_stalled"
            break
        if it <= opts.gd_iters:
            step = min(4.0 * t, 1.0)
        u, f = trial, ft
    state = ChainState(n, state.ell, state.theta0, state.theta1, u)
    return state, f, gnorm, it, reason


def _crack_start(n, ell, theta0, theta1, bond, sigma):
    """Interior bonds at slope sigma except ``bond``, which carries the remainder."""
    lam = 1.0 / n
    span = ell - lam * (theta0 + theta1)
    s = np.full(n - 2, sigma)
    s[bond - 1] = 0.0
    s[bond - 1] = (span - lam * s.sum()) / lam
    if s[bond - 1] <= sigma:
        return None
    return ChainState.from_slopes(n, ell, theta0, theta1, s)


def refine_state(prev, n, cap):
    """Transfer a minimizer to a new ``n``, keeping each steep bond a single bond.

    Slopes above ``cap`` are split into a capped part, interpolated in x, and
    an excess that is deposited on the new bond containing the old midpoint.
    """
    s_prev = prev.slopes
    mids = (np.arange(prev.n) + 0.5) / prev.n
    capped = np.minimum(s_prev, cap)
    excess = (s_prev - capped) / prev.n
    lam = 1.0 / n
    new_mid = (np.arange(1, n - 1) + 0.5) * lam
    s = np.interp(new_mid, mids, capped)
    idx = np.clip((mids * n).astype(int), 1, n - 2)
    np.add.at(s, idx - 1, excess / lam)
    try:
        state = ChainState.from_slopes(n, prev.ell, prev.theta0, prev.theta1, s)
    except DomainError:
        return None
    return state


def _starts(n, ell, theta0, theta1, model, opts, gamma):
    lam = 1.0 / n
    span = ell - lam * (theta0 + theta1)
    if span <= 0:
        raise NoFeasibleStart(f"ell - lambda (theta0 + theta1) = {span!r} leaves no room for positive slopes")
    starts = [("affine", ChainState.affine(n, ell, theta0, theta1))]
    if opts.warm_start is not None:
        w = refine_state(opts.warm_start, n, gamma)
        if w is not None:
            starts.append(("warm", w))
    avg = span / (lam * (n - 2))
    sigma = min(gamma, 0.9 * avg) if gamma is not None else 0.9 * avg
    bonds = []
    for xs in opts.crack_sites:
        b0 = int(round(xs * n - 0.5))
        bonds.extend(range(b0 - 2, b0 + 3))
    rng = np.random.default_rng(opts.seed)
    interior = np.arange(1, n - 1)
    k = min(opts.restarts, len(interior))
    bonds.extend(int(b) for b in rng.choice(interior, size=k, replace=False))
    seen = set()
    for b in bonds:
        b = min(max(b, 1), n - 2)
        if b in seen:
            continue
        seen.add(b)
        st = _crack_start(n, ell, theta0, theta1, b, sigma)
        if st is not None:
            starts.append((f"crack@{b}", st))
    return starts


def minimize_hn(initial, model, load, opts=None, gamma=None):
    """Multi-start local minimization of H_n; returns the best candidate.

    ``initial`` supplies n, ell and the boundary slopes and is used as the
    affine start. ``gamma`` (the minimizer of J0) sets the slope of the
    non-cracked bonds in the single-crack starts.
    """
    opts = opts or MinimizeOpts()
    n, ell, t0, t1 = initial.n, initial.ell, initial.theta0, initial.theta1
    starts = _starts(n, ell, t0, t1, model, opts, gamma)
    if initial.feasible and np.min(initial.slopes) > model.barrier_guard:
        starts[0] = ("initial", initial)
    starts = [(name, st) for name, st in starts if np.min(st.slopes) > model.barrier_guard]
    if not starts:
        raise NoFeasibleStart("every start has a bond at or below the barrier guard")

    def run(item):
        name, st = item
        return (name,) + _descend(st, model, load, opts)

    if opts.jobs > 1:
        with ThreadPoolExecutor(opts.jobs) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    results.sort(key=lambda r: r[2])
    best = results[0]
    degenerate = False
    for other in results[1:]:
        if abs(other[2] - best[2]) < opts.degeneracy_energy_tol and \
                np.max(np.abs(other[1].u - best[1].u)) > opts.degeneracy_state_tol:
            degenerate = True
            break
    log.debug("n=%d best start %s energy %.15g over %d starts", n, best[0], best[2], len(results))
    return MinimizeReport(
        state=best[1], energy=float(best[2]), grad_norm=best[3], iterations=best[4],
        restarts_used=len(results), reason=best[5], start=best[0], degenerate=degenerate,
        candidates=[{"start": r[0], "energy": float(r[2]), "reason": r[5]} for r in results],
    )


def rescaled_energy(state, model, load, inf_h):
    """(H_n - inf H) / lambda."""
    return (energy_hn(state, model, load) - inf_h) * state.n
