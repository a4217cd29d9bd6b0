"""Interaction potentials J1, J2 and external load potentials Phi.

Energies are returned as floats or arrays; the singular branch (slopes
z <= 0) is represented by ``SINGULAR`` (``+inf``), which propagates through
sums, so infeasible configurations compare as worse than any feasible one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError
from .expressions import Expression

SINGULAR = math.inf


def _scalar_or_array(template, out):
    return float(out) if np.ndim(template) == 0 else out


def _lj(z, c1, c2, order=0):
    z = np.asarray(z, dtype=float)
    pos = z > 0
    zs = np.where(pos, z, 1.0)
    if order == 0:
        val = c1 * zs**-12 - c2 * zs**-6
        return np.where(pos, val, SINGULAR)
    if order == 1:
        val = -12.0 * c1 * zs**-13 + 6.0 * c2 * zs**-7
    elif order == 2:
        val = 156.0 * c1 * zs**-14 - 42.0 * c2 * zs**-8
    elif order == 3:
        val = -2184.0 * c1 * zs**-15 + 336.0 * c2 * zs**-9
    else:
        raise ValueError(f"unsupported derivative order {order}")
    return np.where(pos, val, np.nan)


class InteractionModel:
    """Nearest (J1) and next-to-nearest (J2) neighbour pair potentials.

    Subclasses implement ``_j1``/``_j2`` and their derivatives for arrays of
    slopes. ``barrier_guard`` is the smallest bond slope the solvers accept.
    """

    kind = "abstract"
    barrier_guard: float

    def j1(self, z):
        return _scalar_or_array(z, self._j1(np.asarray(z, dtype=float)))

    def j2(self, z):
        return _scalar_or_array(z, self._j2(np.asarray(z, dtype=float)))

    def dj1(self, z, order=1):
        return _scalar_or_array(z, self._dj1(np.asarray(z, dtype=float), order))

    def dj2(self, z, order=1):
        return _scalar_or_array(z, self._dj2(np.asarray(z, dtype=float), order))

    # Tail values J_j(infinity); required to be finite.
    j1_inf = 0.0
    j2_inf = 0.0

    def j1_minimizer(self):
        """Return ``(z*, J1(z*))`` for the global minimizer of J1 on (0, inf)."""
        z = np.geomspace(self.barrier_guard * 0.5, self.barrier_guard * 400, 20001)
        v = self._j1(z)
        k = int(np.argmin(v))
        lo, hi = z[max(k - 1, 0)], z[min(k + 1, len(z) - 1)]
        d = lambda t: float(self._dj1(np.asarray(t), 1))
        if d(lo) < 0 < d(hi):
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if d(mid) < 0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15 * hi:
                    break
            zs = float(0.5 * (lo + hi))
        else:
            zs = float(z[k])
        return zs, float(self._j1(np.asarray(zs)))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class LennardJones(InteractionModel):
    """J1(z) = c1 z^-12 - c2 z^-6 and J2(z) = J1(2z).

    ``nnn`` optionally replaces the coefficients of the J2 channel,
    J2(z) = c1' (2z)^-12 - c2' (2z)^-6; ``nnn=(0, 0)`` switches it off.
    """

    c1: float = 1.0
    c2: float = 2.0
    nnn: tuple | None = None
    barrier_guard: float = field(default=None)

    kind = "lennard_jones"

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise DomainError("Lennard-Jones coefficients must be positive")
        if self.nnn is not None:
            object.__setattr__(self, "nnn", tuple(float(c) for c in self.nnn))
        if self.barrier_guard is None:
            # J1(0.3 r0) > 1e6 for the default coefficients; scale with r0
            r0 = (2.0 * self.c1 / self.c2) ** (1.0 / 6.0)
            object.__setattr__(self, "barrier_guard", 0.3 * r0)

    def _j1(self, z):
        return _lj(z, self.c1, self.c2)

    def _j2(self, z):
        if self.nnn is None:
            return self._j1(2.0 * z)
        return _lj(2.0 * z, *self.nnn)

    def _dj1(self, z, order):
        return _lj(z, self.c1, self.c2, order)

    def _dj2(self, z, order):
        c1, c2 = (self.c1, self.c2) if self.nnn is None else self.nnn
        return 2.0**order * _lj(2.0 * z, c1, c2, order)

    def to_dict(self):
        d = {"kind": self.kind, "c1": self.c1, "c2": self.c2, "barrier_guard": self.barrier_guard}
        if self.nnn is not None:
            d["nnn"] = list(self.nnn)
        return d


class TabulatedModel(InteractionModel):
    """J1 given by samples, interpolated with a monotone cubic (PCHIP).

    J2(z) = J1(2z). Beyond the last sample J1 takes its recorded asymptote
    ``j1_inf`` (default: the last sample value).
    """

    kind = "tabulated"

    def __init__(self, z, j1, j1_inf=None, barrier_guard=None):
        z = np.asarray(z, dtype=float)
        j1 = np.asarray(j1, dtype=float)
        if z.ndim != 1 or z.shape != j1.shape or len(z) < 4:
            raise DomainError("tabulated model needs matching 1-D arrays with at least 4 samples")
        if np.any(np.diff(z) <= 0) or z[0] <= 0:
            raise DomainError("tabulated slopes must be positive and strictly increasing")
        self.z = z
        self.values = j1
        self.j1_inf = float(j1[-1] if j1_inf is None else j1_inf)
        self.j2_inf = self.j1_inf
        self.barrier_guard = float(z[0] if barrier_guard is None else barrier_guard)
        self._interp = PchipInterpolator(z, j1, extrapolate=True)
        self._d1 = self._interp.derivative(1)
        self._d2 = self._interp.derivative(2)

    def _j1(self, z):
        pos = z > 0
        zs = np.where(pos, z, self.z[0])
        val = np.where(zs > self.z[-1], self.j1_inf, self._interp(zs))
        return np.where(pos, val, SINGULAR)

    def _j2(self, z):
        return self._j1(2.0 * z)

    def _dj1(self, z, order):
        if order not in (1, 2):
            raise ValueError(f"unsupported derivative order {order}")
        d = self._d1 if order == 1 else self._d2
        zs = np.where(z > 0, z, self.z[0])
        val = np.where(zs > self.z[-1], 0.0, d(zs))
        return np.where(z > 0, val, np.nan)

    def _dj2(self, z, order):
        return 2.0**order * self._dj1(2.0 * z, order)

    def to_dict(self):
        return {"kind": self.kind, "z": self.z.tolist(), "j1": self.values.tolist(),
                "j1_inf": self.j1_inf, "barrier_guard": self.barrier_guard}


def model_from_dict(spec):
    kind = spec.get("kind")
    if kind == "lennard_jones":
        return LennardJones(float(spec.get("c1", 1.0)), float(spec.get("c2", 2.0)),
                            nnn=spec.get("nnn"), barrier_guard=spec.get("barrier_guard"))
    if kind == "tabulated":
        return TabulatedModel(spec["z"], spec["j1"], spec.get("j1_inf"), spec.get("barrier_guard"))
    raise DomainError(f"unknown potential kind {kind!r}; supported: lennard_jones, tabulated")


def eval_j1(model, z):
    return model.j1(z)


def eval_j2(model, z):
    return model.j2(z)


def eval_derivatives(model, z, order, channel=1):
    """Analytic derivative of J1 (``channel=1``) or J2 (``channel=2``)."""
    if np.any(np.asarray(z) <= 0):
        raise DomainError(f"derivatives are defined for z > 0 only, got {z!r}")
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order!r}")
    return model.dj1(z, order) if channel == 1 else model.dj2(z, order)


# ---------------------------------------------------------------------------
# External loads


def _fd_dw(f, x, w, h=1e-6):
    step = h * (1.0 + np.abs(w))
    return (f(x, w + step) - f(x, w - step)) / (2.0 * step)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class ExternalLoad:
    """External potential Phi(x, w) with its first two w-derivatives."""

    kind = "abstract"
    # whether dphi_du depends on the displacement
    depends_on_u = True

    def phi(self, x, w):
        raise NotImplementedError

    def dphi_du(self, x, w):
        raise NotImplementedError

    def d2phi_du2(self, x, w):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict_safe()})"

    def to_dict_safe(self):
        try:
            return self.to_dict()
        except (TypeError, NotImplementedError):
            return {"kind": self.kind}


def _text(fn):
    if isinstance(fn, Expression):
        return fn.text
    raise TypeError("load built from a Python callable is not serializable")


def _as_fn(f, variables):
    # strings are parsed with the expression grammar; callables pass through
    return Expression(f, variables) if isinstance(f, str) else f


def _broadcast(x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.broadcast_arrays(x, w)


class ZeroLoad(ExternalLoad):
    kind = "zero"
    depends_on_u = False

    def phi(self, x, w):
        x, w = _broadcast(x, w)
        return np.zeros(x.shape)

    dphi_du = phi
    d2phi_du2 = phi

    def to_dict(self):
        return {"kind": self.kind}


class DeadLoad(ExternalLoad):
    """Phi(x, w) = -f(x) w."""

    kind = "dead_load"
    depends_on_u = False

    def __init__(self, f):
        self.f = _as_fn(f, ("x",))

    def phi(self, x, w):
        x, w = _broadcast(x, w)
        return -self.f(x) * w

    def dphi_du(self, x, w):
        x, w = _broadcast(x, w)
        return -np.asarray(self.f(x), dtype=float) * np.ones_like(w)

    def d2phi_du2(self, x, w):
        x, w = _broadcast(x, w)
        return np.zeros(x.shape)

    def to_dict(self):
        return {"kind": self.kind, "f": _text(self.f)}


class LiveLoad(ExternalLoad):
    """Phi(x, w) = -int_0^w f(x, s) ds for a force density f(x, w)."""

    kind = "live_load"

    def __init__(self, f):
        f = self.f = _as_fn(f, ("x", "w"))
        self._dfdw = f.diff("w") if isinstance(f, Expression) else None

    def phi(self, x, w):
        x, w = _broadcast(x, w)
        s = 0.5 * w[..., None] * (_GL_X + 1.0)
        vals = self.f(x[..., None], s)
        return -0.5 * w * np.sum(_GL_W * vals, axis=-1)

    def dphi_du(self, x, w):
        x, w = _broadcast(x, w)
        return -np.asarray(self.f(x, w), dtype=float)

    def d2phi_du2(self, x, w):
        x, w = _broadcast(x, w)
        if self._dfdw is not None:
            return -self._dfdw(x, w)
        return -_fd_dw(self.f, x, w)

    def to_dict(self):
        return {"kind": self.kind, "f": _text(self.f)}


class QuadraticWell(ExternalLoad):
    """Phi(x, w) = (w - w_tilde(x))^2."""

    kind = "quadratic_well"

    def __init__(self, w_tilde):
        self.w_tilde = _as_fn(w_tilde, ("x",))

    def phi(self, x, w):
        x, w = _broadcast(x, w)
        return (w - self.w_tilde(x)) ** 2

    def dphi_du(self, x, w):
        x, w = _broadcast(x, w)
        return 2.0 * (w - self.w_tilde(x))

    def d2phi_du2(self, x, w):
        x, w = _broadcast(x, w)
        return np.full(x.shape, 2.0)

    def to_dict(self):
        return {"kind": self.kind, "w": _text(self.w_tilde)}


class OneSidedQuartic(ExternalLoad):
    """Phi(x, w) = (sign * (w - w_tilde(x)))_+^4."""

    kind = "one_sided_quartic"

    def __init__(self, w_tilde, sign=1):
        if sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        self.w_tilde = _as_fn(w_tilde, ("x",))
        self.sign = sign

    def _pos(self, x, w):
        x, w = _broadcast(x, w)
        return np.maximum(self.sign * (w - self.w_tilde(x)), 0.0)

    def phi(self, x, w):
        return self._pos(x, w) ** 4

    def dphi_du(self, x, w):
        return 4.0 * self.sign * self._pos(x, w) ** 3

    def d2phi_du2(self, x, w):
        return 12.0 * self._pos(x, w) ** 2

    def to_dict(self):
        return {"kind": self.kind, "w": _text(self.w_tilde), "sign": self.sign}


LOAD_KINDS = ("zero", "dead_load", "live_load", "quadratic_well", "one_sided_quartic")


def load_from_dict(spec, constants=None):
    """Build a load from its config form, e.g. ``{"kind": "dead_load", "f": "x - 1/2"}``."""
    kind = spec.get("kind")
    if kind == "zero":
        return ZeroLoad()
    if kind == "dead_load":
        return DeadLoad(Expression(spec["f"], ("x",), constants))
    if kind == "live_load":
        return LiveLoad(Expression(spec["f"], ("x", "w"), constants))
    if kind == "quadratic_well":
        return QuadraticWell(Expression(spec["w"], ("x",), constants))
    if kind == "one_sided_quartic":
        return OneSidedQuartic(Expression(spec["w"], ("x",), constants), int(spec.get("sign", 1)))
    raise DomainError(f"unknown load kind {kind!r}; supported kinds: {', '.join(LOAD_KINDS)}")
