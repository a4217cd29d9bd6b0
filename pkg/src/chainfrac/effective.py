"""Effective potential J0 (inf-convolution of J1 and J2), its minimizer and envelope.

J0(z) = J2(z) + min_b 1/2 (J1(z + b) + J1(z - b)).

Below the convexity threshold ``gamma_c`` the minimizing split is symmetric
(b = 0) and J0 = J1 + J2 in closed form; the profile uses that branch only
after the tabulated solve has confirmed b = 0 on every sample there.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import AxiomViolation, CertificateFailure, DomainError
from .potentials import SINGULAR, model_from_dict

PROFILE_VERSION = 1
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchParams:
    scan_points: int = 2048
    tol: float = 1e-10
    grid_size: int = 4096
    margin: float = 0.02
    z_max_factor: float = 100.0
    chunk: int = 256


def _split_value(model, z, b):
    return 0.5 * (model._j1(z + b) + model._j1(z - b))


def _golden(fun, lo, hi, tol):
    """Vectorised golden-section search for the minimum of ``fun`` on [lo, hi]."""
    a, c = lo.copy(), hi.copy()
    x1 = c - _INVPHI * (c - a)
    x2 = a + _INVPHI * (c - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(200):
        if np.all(c - a <= tol):
            break
        left = f1 < f2
        c = np.where(left, x2, c)
        a = np.where(left, a, x1)
        x1 = c - _INVPHI * (c - a)
        x2 = a + _INVPHI * (c - a)
        f1, f2 = fun(x1), fun(x2)
    mid = 0.5 * (a + c)
    return mid, fun(mid)


def solve_inf_convolution(model, z, search=None, j1_argmin=None):
    """Solve the infimum defining J0 for an array of slopes.

    Returns ``(j0, b, escape)`` arrays: the infimum, the canonical split
    b >= 0 with arms (z + b, z - b), and whether the escape candidate (one arm
    at the minimizer of J1) beat the refined scan.
    """
    search = search or SearchParams()
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0):
        raise DomainError("J0 is defined for z > 0 only")
    if j1_argmin is None:
        j1_argmin = model.j1_minimizer()[0]
    delta = model.barrier_guard
    j0 = np.empty_like(z)
    b_out = np.zeros_like(z)
    escape = np.zeros(z.shape, dtype=bool)
    for start in range(0, len(z), search.chunk):
        zc = z[start:start + search.chunk]
        sl = slice(start, start + len(zc))
        bmax = np.maximum(zc - delta, 0.0)
        t = np.linspace(0.0, 1.0, search.scan_points)
        bgrid = bmax[:, None] * t[None, :]
        vals = _split_value(model, zc[:, None], bgrid)
        k = np.argmin(vals, axis=1)
        step = bmax / (search.scan_points - 1)
        lo = np.maximum(bgrid[np.arange(len(zc)), k] - step, 0.0)
        hi = np.minimum(bgrid[np.arange(len(zc)), k] + step, bmax)
        b_ref, v_ref = _golden(lambda b: _split_value(model, zc, b), lo, hi, search.tol)
        v0 = _split_value(model, zc, np.zeros_like(zc))
        # ties within rounding go to the symmetric split
        use0 = v0 <= v_ref + 1e-14 * (1.0 + np.abs(v0))
        b_best = np.where(use0, 0.0, b_ref)
        v_best = np.where(use0, v0, v_ref)
        be = zc - j1_argmin
        ok = (be > 0) & (be < bmax)
        ve = np.where(ok, _split_value(model, zc, np.where(ok, be, 0.0)), np.inf)
        esc = ve < v_best
        b_out[sl] = np.where(esc, be, b_best)
        j0[sl] = model._j2(zc) + np.where(esc, ve, v_best)
        escape[sl] = esc
    return j0, b_out, escape


def compute_j0(model, z, search=None):
    """Return ``(J0(z), b*)`` for a single slope ``z > 0``."""
    if not z > 0:
        raise DomainError(f"J0 is defined for z > 0 only, got {z!r}")
    j0, b, _ = solve_inf_convolution(model, [z], search)
    return float(j0[0]), float(b[0])


def _first_inflection(curv, lo, hi, n=20001):
    """First point in (lo, hi) where ``curv`` changes sign from + to -."""
    z = np.geomspace(lo, hi, n)
    c = curv(z)
    neg = np.nonzero(c <= 0)[0]
    neg = neg[neg > 0]
    if len(neg) == 0:
        return math.inf
    a, b = z[neg[0] - 1], z[neg[0]]
    for _ in range(200):
        m = 0.5 * (a + b)
        if curv(np.asarray(m)) > 0:
            a = m
        else:
            b = m
        if b - a < 1e-15 * b:
            break
    return 0.5 * (a + b)


@dataclass(frozen=True, eq=False)
class EffectiveProfile:
    """Tabulated J0 on a log grid with its minimizer, threshold and asymptote."""

    model: object
    grid: np.ndarray
    j0_values: np.ndarray
    splitter: np.ndarray
    gamma: float
    j0_at_gamma: float
    gamma_c: float
    convexity_margin: float
    j0_infinity: float
    z_max: float
    j1_argmin: float
    j1_min: float
    split_certified: bool
    search: SearchParams = field(default_factory=SearchParams)
    escape: np.ndarray | None = None

    def __post_init__(self):
        hi = self.grid >= min(self.gamma_c, self.grid[-1]) * (1 - 1e-12)
        idx = np.nonzero(hi)[0]
        start = max(idx[0] - 1, 0) if len(idx) else 0
        object.__setattr__(self, "_table", PchipInterpolator(self.grid[start:], self.j0_values[start:]))
        object.__setattr__(self, "_cache", {})

    # -- J0 -------------------------------------------------------------
    def _symmetric(self, z):
        return self.model._j1(z) + self.model._j2(z)

    def _exact(self, z):
        out = np.empty_like(z)
        missing = [v for v in np.unique(z) if v not in self._cache]
        if missing:
            vals, _, _ = solve_inf_convolution(self.model, np.array(missing), self.search, self.j1_argmin)
            self._cache.update(zip(missing, vals))
        for i, v in enumerate(z.ravel()):
            out.flat[i] = self._cache[v]
        return out

    def _tail(self, z):
        # escape split: one arm at argmin J1, the other carries the rest
        return self.model._j2(z) + 0.5 * (self.j1_min + self.model._j1(2.0 * z - self.j1_argmin))

    def j0(self, z, exact=False):
        """J0 at ``z``; singular for z <= 0.

        The closed form is used below ``gamma_c`` (once certified). Above it
        the cached table is interpolated, or the infimum re-solved when
        ``exact`` is set; beyond ``z_max`` the escape split is used.
        """
        za = np.asarray(z, dtype=float)
        zf = np.atleast_1d(za).astype(float)
        out = np.full(zf.shape, SINGULAR)
        pos = zf > 0
        low = pos & (zf < self.gamma_c) if self.split_certified else np.zeros_like(pos)
        far = pos & (zf > self.z_max)
        mid = pos & ~low & ~far
        if low.any():
            out[low] = self._symmetric(zf[low])
        if far.any():
            out[far] = self._tail(zf[far])
        if mid.any():
            out[mid] = self._exact(zf[mid]) if exact else self._table(zf[mid])
        return float(out[0]) if za.ndim == 0 else out.reshape(za.shape)

    def j0_prime(self, z):
        """dJ0/dz on the symmetric branch (z < gamma_c)."""
        z = np.asarray(z, dtype=float)
        if self.split_certified:
            return self.model.dj1(z, 1) + self.model.dj2(z, 1)
        h = 1e-6 * z
        return (self.j0(z + h, exact=True) - self.j0(z - h, exact=True)) / (2 * h)

    def j0_second(self, z):
        z = np.asarray(z, dtype=float)
        if self.split_certified:
            return self.model.dj1(z, 2) + self.model.dj2(z, 2)
        h = 1e-4 * z
        return (self.j0(z + h, exact=True) - 2 * self.j0(z, exact=True) + self.j0(z - h, exact=True)) / h**2

    # -- envelope -------------------------------------------------------
    def j0_star_star(self, z):
        return j0_star_star(self, z)

    def j0ss_prime(self, z):
        z = np.asarray(z, dtype=float)
        zc = np.minimum(z, self.gamma)
        return np.where(z < self.gamma, self.j0_prime(zc), 0.0)

    def j0ss_second(self, z):
        z = np.asarray(z, dtype=float)
        zc = np.minimum(z, self.gamma)
        return np.where(z < self.gamma, self.j0_second(zc), 0.0)

    # -- serialisation --------------------------------------------------
    def to_json(self):
        return {
            "version": PROFILE_VERSION,
            "model": self.model.to_dict(),
            "search": asdict(self.search),
            "grid": self.grid.tolist(),
            "j0": self.j0_values.tolist(),
            "splitter": self.splitter.tolist(),
            "gamma": self.gamma,
            "j0_at_gamma": self.j0_at_gamma,
            "gamma_c": self.gamma_c,
            "convexity_margin": self.convexity_margin,
            "j0_infinity": self.j0_infinity,
            "z_max": self.z_max,
            "j1_argmin": self.j1_argmin,
            "j1_min": self.j1_min,
            "split_certified": self.split_certified,
        }

    @classmethod
    def from_json(cls, doc):
        if doc.get("version") != PROFILE_VERSION:
            raise DomainError(f"unsupported effective profile version {doc.get('version')!r}")
        return cls(
            model=model_from_dict(doc["model"]),
            grid=np.asarray(doc["grid"], dtype=float),
            j0_values=np.asarray(doc["j0"], dtype=float),
            splitter=np.asarray(doc["splitter"], dtype=float),
            gamma=doc["gamma"], j0_at_gamma=doc["j0_at_gamma"], gamma_c=doc["gamma_c"],
            convexity_margin=doc["convexity_margin"], j0_infinity=doc["j0_infinity"],
            z_max=doc["z_max"], j1_argmin=doc["j1_argmin"], j1_min=doc["j1_min"],
            split_certified=doc["split_certified"], search=SearchParams(**doc["search"]),
        )


def convexity_threshold(model, margin=0.02, hi=None):
    """Return ``(gamma_c, c, inflection_j1, inflection_j0)``.

    gamma_c is the smaller of the inflection points of J1 and of the
    symmetric branch J1 + J2, shrunk by ``margin``; c is ``margin`` times it.
    """
    lo = model.barrier_guard * 0.5
    hi = hi or 100.0 * model.j1_minimizer()[0]
    infl1 = _first_inflection(lambda z: model._dj1(z, 2), lo, hi)
    infl0 = _first_inflection(lambda z: model._dj1(z, 2) + model._dj2(z, 2), lo, hi)
    base = min(infl1, infl0)
    if not math.isfinite(base):
        base = hi
    return float(base * (1.0 - margin)), float(margin * base), float(infl1), float(infl0)


def minimize_j0(model, search=None, *, _grid=None, _values=None, gamma_c=None, j1_argmin=None):
    """Locate the minimizer gamma of J0 and J0(gamma).

    Dense scan followed by bisection on the envelope derivative
    J0'(z) = J2'(z) + (J1'(z + b) + J1'(z - b)) / 2 at the optimal split.
    """
    search = search or SearchParams()
    if j1_argmin is None:
        j1_argmin = model.j1_minimizer()[0]
    if gamma_c is None:
        gamma_c = convexity_threshold(model, search.margin)[0]
    if _grid is None:
        _grid = np.geomspace(model.barrier_guard, search.z_max_factor * j1_argmin, search.grid_size)
        _values, _, _ = solve_inf_convolution(model, _grid, search, j1_argmin)
    k = int(np.argmin(_values))
    vmin = _values[k]
    scale = 1e-12 * (1.0 + abs(vmin))
    rivals = np.nonzero(_values <= vmin + scale)[0]
    if np.any(np.abs(_grid[rivals] - _grid[k]) > 1e-6 * max(1.0, _grid[k])):
        raise AxiomViolation(f"J0 minimum is not unique: near-minimal values at {_grid[rivals].tolist()}")

    def dj0(z):
        _, b, _ = solve_inf_convolution(model, [z], search, j1_argmin)
        b = b[0]
        return float(model._dj2(np.asarray(z), 1) + 0.5 * (model._dj1(np.asarray(z + b), 1)
                                                           + model._dj1(np.asarray(z - b), 1)))

    lo = _grid[max(k - 1, 0)]
    hi = _grid[min(k + 1, len(_grid) - 1)]
    if dj0(lo) < 0 < dj0(hi):
        while hi - lo > search.tol:
            m = 0.5 * (lo + hi)
            if dj0(m) < 0:
                lo = m
            else:
                hi = m
        gamma = float(0.5 * (lo + hi))
    else:
        gamma = float(_grid[k])
    j0g, _ = compute_j0(model, gamma, search)
    d = 1e-6 * max(1.0, gamma)
    left, _ = compute_j0(model, gamma - d, search) if gamma - d > 0 else (math.inf, 0)
    right, _ = compute_j0(model, gamma + d, search)
    if not (left > j0g and right > j0g):
        raise AxiomViolation(f"J0 has a flat valley around gamma={gamma!r} wider than {d:g}")
    if not gamma < gamma_c:
        raise AxiomViolation(f"minimizer gamma={gamma!r} is not below gamma_c={gamma_c!r}")
    return gamma, j0g


def build_effective(model, search=None, strict=True):
    """Tabulate J0 for ``model`` and locate gamma, gamma_c and the tail value.

    With ``strict=False`` a failed minimum check falls back to the grid
    argmin so that the axiom checker can still report on the model.
    """
    search = search or SearchParams()
    zs, j1min = model.j1_minimizer()
    z_max = search.z_max_factor * zs
    gamma_c, c, _, _ = convexity_threshold(model, search.margin, hi=z_max)
    grid = np.geomspace(model.barrier_guard, z_max, search.grid_size)
    values, split, escape = solve_inf_convolution(model, grid, search, zs)
    certified = bool(np.all(split[grid < gamma_c] == 0.0))
    try:
        gamma, j0g = minimize_j0(model, search, _grid=grid, _values=values, gamma_c=gamma_c, j1_argmin=zs)
    except AxiomViolation:
        if strict:
            raise
        k = int(np.argmin(values))
        gamma, j0g = float(grid[k]), float(values[k])
    j0_inf = model.j2_inf + 0.5 * (j1min + model.j1_inf)
    return EffectiveProfile(model=model, grid=grid, j0_values=values, splitter=split, gamma=gamma,
                            j0_at_gamma=j0g, gamma_c=gamma_c, convexity_margin=c, j0_infinity=j0_inf,
                            z_max=z_max, j1_argmin=zs, j1_min=j1min, split_certified=certified, search=search,
                            escape=escape)


def j0_star_star(profile, z):
    """Convex envelope: J0(z) below gamma, J0(gamma) above."""
    za = np.asarray(z, dtype=float)
    if np.any(za <= 0):
        raise DomainError("J0** is evaluated for z > 0 only")
    out = np.where(za < profile.gamma, profile.j0(np.minimum(za, profile.gamma)), profile.j0_at_gamma)
    return float(out) if za.ndim == 0 else out


def residual_r(model, profile, z1, z2, exact=True):
    """R(z1, z2) = (J1(z1) + J1(z2))/2 + J2(m) - J0(m), m = (z1 + z2)/2."""
    z1a = np.asarray(z1, dtype=float)
    z2a = np.asarray(z2, dtype=float)
    m = 0.5 * (z1a + z2a)
    feasible = (z1a > 0) & (z2a > 0)
    with np.errstate(invalid="ignore"):
        mm = np.where(feasible, m, 1.0)
        r = 0.5 * (model._j1(z1a) + model._j1(z2a)) + model._j2(mm) - profile.j0(mm, exact=exact)
    r = np.where(feasible, r, SINGULAR)
    return float(r) if r.ndim == 0 else r


def certify_quadratic_lower_bound(model, profile, points=None, samples=160, axis_margin=1e-3):
    """Largest c with R(z1, z2) >= c (z1 - z2)^2 on samples of (0, gamma_c)^2.

    ``points`` may supply an explicit ``(z1, z2)`` sample; otherwise a uniform
    ``samples x samples`` grid kept ``axis_margin`` away from the edges is used.
    """
    if points is None:
        t = np.linspace(axis_margin, profile.gamma_c - axis_margin, samples)
        z1, z2 = np.meshgrid(t, t, indexing="ij")
    else:
        z1, z2 = (np.asarray(p, dtype=float) for p in points)
    z1, z2 = z1.ravel(), z2.ravel()
    off = z1 != z2
    if not off.any():
        raise DomainError("sample contains only diagonal points; the ratio is undefined there")
    z1, z2 = z1[off], z2[off]
    if np.any((z1 <= 0) | (z2 <= 0) | (z1 >= profile.gamma_c) | (z2 >= profile.gamma_c)):
        raise DomainError("sample points must lie in the open square (0, gamma_c)^2")
    ratio = residual_r(model, profile, z1, z2) / (z1 - z2) ** 2
    c = float(np.min(ratio))
    if not c > 0:
        k = int(np.argmin(ratio))
        raise CertificateFailure(f"R/(z1-z2)^2 = {c!r} at ({z1[k]!r}, {z2[k]!r})")
    return c


def effective_table(profile):
    """Columns (z, j0, j0_star_star, splitter_b) on the profile grid."""
    z = profile.grid
    return {"z": z, "j0": profile.j0_values, "j0_star_star": j0_star_star(profile, z),
            "splitter_b": profile.splitter}
