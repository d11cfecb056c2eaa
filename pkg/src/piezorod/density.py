"""Hysteresis weight densities with analytic primitives and temperature derivatives.

A density model assigns a nonnegative weight ``psi(theta, r, v)`` to every
threshold ``r > 0`` and internal deflection ``v``.  All models evaluate, with
full numpy broadcasting over their arguments:

    psi                    the weight itself; even in v
    g                      primitive of psi in v from 0 (odd in v)
    g1                     first-moment primitive int_0^v v' psi dv' (even in v)
    psi_theta, psi_theta2  temperature derivatives of psi (zero for theta <= 0)
    g_theta, g_theta2      temperature derivatives of g
    g1_theta               temperature derivative of g1

The canonical family is

    psi(theta, r, v) = a0 exp(-r / r_decay) * phi(|v| - h(log(1 + theta^+)))

with the compactly supported C^2 bump ``phi(s) = phi0 * (s(1-s))^3`` on (0, 1)
and the shift ``h(s) = h0 * s^3 / (1 + s^2)``.  Every primitive of phi is a
polynomial, so no inner quadrature is needed anywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError, DensityConstructionError, InvalidThresholdError

_EVAL_KINDS = ("psi", "psi_theta", "psi_theta2", "g", "g_theta", "g_theta2",
               "g1", "g1_theta")


def _bump(s):
    # phi0-free bump (s(1-s))^3; callers multiply by phi0
    w = s * (1.0 - s)
    return w * w * w


def _bump_d1(s):
    w = s * (1.0 - s)
    return 3.0 * w * w * (1.0 - 2.0 * s)


def _bump_d2(s):
    return 6.0 * s * (1.0 - s) * (1.0 - 5.0 * s + 5.0 * s * s)


def _bump_int(s):
    # int_0^s (t(1-t))^3 dt, valid on [0, 1]
    s2 = s * s
    return (s2 * s2) * (0.25 + s * (-0.6 + s * (0.5 - s / 7.0)))


def _bump_moment(s):
    # int_0^s t (t(1-t))^3 dt, valid on [0, 1]
    s2 = s * s
    return (s2 * s2 * s) * (0.2 + s * (-0.5 + s * (3.0 / 7.0 - s / 8.0)))


BUMP_INT_FULL = 1.0 / 140.0     # int_0^1 (s(1-s))^3 ds
BUMP_MOMENT_FULL = 1.0 / 280.0  # int_0^1 s (s(1-s))^3 ds
BUMP_MAX = 1.0 / 64.0           # max_s (s(1-s))^3


def _clip01(s):
    return np.minimum(np.maximum(s, 0.0), 1.0)


class _FrozenCanonical:
    """Canonical density bound to fixed (theta, r): the shift state and the
    threshold weights are computed once, which matters in root-finder loops."""

    __slots__ = ("ar", "H", "Hp")

    def __init__(self, den, theta, r):
        self.ar = den.a(r) * den.phi0
        H, Hp, _ = den._shift_state(theta)
        self.H = H
        self.Hp = Hp

    def g(self, v):
        s = _clip01(np.abs(v) - self.H)
        return np.sign(v) * self.ar * _bump_int(s)

    def g1(self, v):
        s = _clip01(np.abs(v) - self.H)
        return self.ar * (_bump_moment(s) + self.H * _bump_int(s))

    def g_theta(self, v):
        s = _clip01(np.abs(v) - self.H)
        return -np.sign(v) * self.ar * self.Hp * _bump(s)

    def g1_theta(self, v):
        av = np.abs(v)
        s = _clip01(av - self.H)
        return self.ar * self.Hp * (_bump_int(s) - av * _bump(s))


class _FrozenUniform:
    """Uniform test density bound to a fixed threshold grid."""

    __slots__ = ("amp_r", "v_hi")

    def __init__(self, den, r):
        self.amp_r = np.where(den._in_r(r), den.amplitude, 0.0)
        self.v_hi = den.v_hi

    def g(self, v):
        return self.amp_r * np.minimum(np.maximum(v, -self.v_hi), self.v_hi)

    def g1(self, v):
        return 0.5 * self.amp_r * np.minimum(np.abs(v), self.v_hi) ** 2

    def g_theta(self, v):
        return np.zeros(np.broadcast(self.amp_r, v).shape)

    g1_theta = g_theta


class _FrozenGeneric:
    """Fallback binding for densities without a specialized fast path."""

    __slots__ = ("den", "theta", "r")

    def __init__(self, den, theta, r):
        self.den = den
        self.theta = theta
        self.r = r

    def g(self, v):
        return self.den.g(self.theta, self.r, v)

    def g1(self, v):
        return self.den.g1(self.theta, self.r, v)

    def g_theta(self, v):
        return self.den.g_theta(self.theta, self.r, v)

    def g1_theta(self, v):
        return self.den.g1_theta(self.theta, self.r, v)


class CanonicalDensity:
    """Exponential-in-r, shifted-bump-in-v density with temperature feedback.

    The shift ``h(log(1+theta))`` moves the bump outward as temperature grows,
    widening the hysteresis loops.  ``h0`` controls the strength; construction
    rejects values for which h' or h'' leave [0, 1] / [-1, 1].
    """

    kind = "canonical"
    has_theta_derivs = True
    has_second_derivs = True

    def __init__(self, a0=0.1, r_decay=1.0, phi0=64.0, h0=0.5):
        if a0 < 0.0:
            raise DensityConstructionError("a0 must be >= 0")
        if r_decay <= 0.0:
            raise DensityConstructionError("r_decay must be > 0")
        if phi0 < 0.0:
            raise DensityConstructionError("phi0 must be >= 0")
        if h0 < 0.0:
            raise DensityConstructionError("h0 must be >= 0")
        self.a0 = float(a0)
        self.r_decay = float(r_decay)
        self.phi0 = float(phi0)
        self.h0 = float(h0)
        self._check_shift_bounds()

    # -- shift function h and its derivatives ------------------------------

    def _h(self, s):
        return self.h0 * s ** 3 / (1.0 + s * s)

    def _h_d1(self, s):
        return self.h0 * s * s * (s * s + 3.0) / (1.0 + s * s) ** 2

    def _h_d2(self, s):
        return 2.0 * self.h0 * s * (3.0 - s * s) / (1.0 + s * s) ** 3

    def _check_shift_bounds(self):
        s = np.linspace(0.0, 60.0, 6001)
        d1 = self._h_d1(s)
        d2 = self._h_d2(s)
        if np.any(d1 < -1e-12) or np.any(d1 > 1.0 + 1e-12):
            raise DensityConstructionError(
                f"h0={self.h0} drives h' outside [0, 1] (max {d1.max():.4g})")
        if np.any(np.abs(d2) > 1.0 + 1e-12):
            raise DensityConstructionError(
                f"h0={self.h0} drives |h''| above 1 (max {np.abs(d2).max():.4g})")

    def _shift_state(self, theta):
        """Return (H, Hp, Hq): shift, its theta-derivative factor and the
        second-derivative companion, all zero for theta <= 0."""
        theta = np.asarray(theta, dtype=float)
        pos = theta > 0.0
        L = np.log1p(np.where(pos, theta, 0.0))
        H = np.where(pos, self._h(L), 0.0)
        denom = 1.0 + np.where(pos, theta, 0.0)
        Hp = np.where(pos, self._h_d1(L) / denom, 0.0)
        Hq = np.where(pos, (self._h_d1(L) - self._h_d2(L)) / denom ** 2, 0.0)
        return H, Hp, Hq

    def a(self, r):
        return self.a0 * np.exp(-np.asarray(r, dtype=float) / self.r_decay)

    # -- evaluations --------------------------------------------------------

    def psi(self, theta, r, v):
        H, _, _ = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return self.a(r) * self.phi0 * _bump(s)

    def psi_theta(self, theta, r, v):
        H, Hp, _ = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return -self.a(r) * self.phi0 * Hp * _bump_d1(s)

    def psi_theta2(self, theta, r, v):
        H, Hp, Hq = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return self.a(r) * self.phi0 * (Hp * Hp * _bump_d2(s) + Hq * _bump_d1(s))

    def g(self, theta, r, v):
        H, _, _ = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return np.sign(v) * self.a(r) * self.phi0 * _bump_int(s)

    def g_theta(self, theta, r, v):
        H, Hp, _ = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return -np.sign(v) * self.a(r) * self.phi0 * Hp * _bump(s)

    def g_theta2(self, theta, r, v):
        H, Hp, Hq = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return np.sign(v) * self.a(r) * self.phi0 * (
            Hp * Hp * _bump_d1(s) + Hq * _bump(s))

    def g1(self, theta, r, v):
        H, _, _ = self._shift_state(theta)
        s = np.clip(np.abs(v) - H, 0.0, 1.0)
        return self.a(r) * self.phi0 * (_bump_moment(s) + H * _bump_int(s))

    def g1_theta(self, theta, r, v):
        # int_0^v v' psi_theta dv' by parts: a * H' * (Phi(s) - |v| phi(s))
        H, Hp, _ = self._shift_state(theta)
        av = np.abs(v)
        s = np.clip(av - H, 0.0, 1.0)
        return self.a(r) * self.phi0 * Hp * (_bump_int(s) - av * _bump(s))

    def freeze(self, theta, r):
        return _FrozenCanonical(self, theta, r)

    # -- support and bounds --------------------------------------------------

    def v_support(self, theta_max):
        H, _, _ = self._shift_state(np.maximum(theta_max, 0.0))
        return float(1.0 + H)

    def sup_g(self, r):
        """Upper bound of |g| over v and theta for each threshold."""
        return self.a(r) * self.phi0 * BUMP_INT_FULL

    def sup_psi(self, r):
        return self.a(r) * self.phi0 * BUMP_MAX

    def psi0_bound(self):
        """Bound on the double integral of psi over all (r, v)."""
        return self.a0 * self.r_decay * self.phi0 * BUMP_INT_FULL

    def r_support(self, tail_tol=1e-8):
        """Radius beyond which the (1+r)-weighted tail mass is below tail_tol
        of the total."""
        lam = self.r_decay
        if self.a0 == 0.0:
            return lam
        total = lam * (1.0 + lam)

        def tail(R):
            return lam * (1.0 + R + lam) * np.exp(-R / lam)

        lo, hi = 0.0, lam
        while tail(hi) > tail_tol * total:
            hi *= 2.0
            if hi > 1e6 * lam:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if tail(mid) > tail_tol * total:
                lo = mid
            else:
                hi = mid
        return hi

    def tail_fraction(self, r_max):
        lam = self.r_decay
        return float((1.0 + r_max + lam) * np.exp(-r_max / lam) / (1.0 + lam))


class UniformTestDensity:
    """Flat density: psi = amplitude on 0 < r < r_hi, |v| < v_hi.

    Temperature independent; every integral has a closed form, which makes it
    the reference model for cross-checking the quadrature paths.
    """

    kind = "uniform-test"
    has_theta_derivs = True
    has_second_derivs = True

    def __init__(self, amplitude=1.0, r_hi=1.0, v_hi=1.0):
        if amplitude < 0.0:
            raise DensityConstructionError("amplitude must be >= 0")
        if r_hi <= 0.0 or v_hi <= 0.0:
            raise DensityConstructionError("r_hi and v_hi must be > 0")
        self.amplitude = float(amplitude)
        self.r_hi = float(r_hi)
        self.v_hi = float(v_hi)

    def _in_r(self, r):
        r = np.asarray(r, dtype=float)
        return (r > 0.0) & (r < self.r_hi)

    def psi(self, theta, r, v):
        v = np.asarray(v, dtype=float)
        inside = self._in_r(r) & (np.abs(v) < self.v_hi)
        return np.where(inside, self.amplitude, 0.0) + 0.0 * np.asarray(theta)

    def psi_theta(self, theta, r, v):
        return np.zeros(np.broadcast(theta, r, v).shape)

    psi_theta2 = psi_theta

    def g(self, theta, r, v):
        out = self.amplitude * np.clip(v, -self.v_hi, self.v_hi)
        return np.where(self._in_r(r), out, 0.0) + 0.0 * np.asarray(theta)

    def g_theta(self, theta, r, v):
        return np.zeros(np.broadcast(theta, r, v).shape)

    g_theta2 = g_theta
    g1_theta = g_theta

    def g1(self, theta, r, v):
        out = 0.5 * self.amplitude * np.minimum(np.abs(v), self.v_hi) ** 2
        return np.where(self._in_r(r), out, 0.0) + 0.0 * np.asarray(theta)

    def freeze(self, theta, r):
        return _FrozenUniform(self, r)

    def v_support(self, theta_max):
        return self.v_hi

    def sup_g(self, r):
        return np.where(self._in_r(r), self.amplitude * self.v_hi, 0.0)

    def sup_psi(self, r):
        return np.where(self._in_r(r), self.amplitude, 0.0)

    def psi0_bound(self):
        return self.amplitude * self.r_hi * self.v_hi

    def r_support(self, tail_tol=1e-8):
        return self.r_hi

    def tail_fraction(self, r_max):
        return 0.0 if r_max >= self.r_hi * (1.0 - 1e-12) else 1.0


class TabulatedDensity:
    """Density sampled on a rectangular (theta, r, v) grid.

    The v grid must start at 0; evenness in v is implied.  Primitives are
    cumulative trapezoids over v, temperature derivatives are grid gradients,
    and evaluation interpolates bilinearly in (theta, v) at each r node.
    Queries at r values off the grid snap to the nearest node.
    """

    kind = "tabulated"

    def __init__(self, theta_grid, r_grid, v_grid, psi_table):
        theta_grid = np.asarray(theta_grid, dtype=float)
        r_grid = np.asarray(r_grid, dtype=float)
        v_grid = np.asarray(v_grid, dtype=float)
        psi_table = np.asarray(psi_table, dtype=float)
        if psi_table.shape != (theta_grid.size, r_grid.size, v_grid.size):
            raise DensityConstructionError(
                "psi table shape does not match the grids")
        if v_grid[0] != 0.0:
            raise DensityConstructionError("v grid must start at 0")
        if np.any(r_grid <= 0.0):
            raise DensityConstructionError("r grid must be strictly positive")
        for name, grid in (("theta", theta_grid), ("r", r_grid), ("v", v_grid)):
            if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
                raise DensityConstructionError(f"{name} grid must be increasing")
        if np.any(psi_table < 0.0):
            raise DensityConstructionError("psi samples must be nonnegative")
        self.theta_grid = theta_grid
        self.r_grid = r_grid
        self.v_grid = v_grid
        self.psi_table = psi_table
        dv = v_grid
        self.g_table = _cumtrapz(psi_table, dv, axis=2)
        self.g1_table = _cumtrapz(psi_table * dv, dv, axis=2)
        self.has_theta_derivs = theta_grid.size >= 3
        self.has_second_derivs = theta_grid.size >= 3
        if self.has_theta_derivs:
            self.psi_th = np.gradient(psi_table, theta_grid, axis=0)
            self.g_th = np.gradient(self.g_table, theta_grid, axis=0)
            self.g1_th = np.gradient(self.g1_table, theta_grid, axis=0)
            self.psi_th2 = np.gradient(self.psi_th, theta_grid, axis=0)
            self.g_th2 = np.gradient(self.g_th, theta_grid, axis=0)

    def _interp(self, table, theta, r, v, odd):
        theta = np.asarray(theta, dtype=float)
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast(theta, r, v).shape
        theta_b = np.broadcast_to(theta, shape).ravel()
        r_b = np.broadcast_to(r, shape).ravel()
        v_b = np.broadcast_to(v, shape).ravel()

        ri = np.searchsorted(self.r_grid, r_b)
        ri = np.clip(ri, 0, self.r_grid.size - 1)
        left = np.clip(ri - 1, 0, self.r_grid.size - 1)
        pick_left = np.abs(self.r_grid[left] - r_b) <= np.abs(self.r_grid[ri] - r_b)
        ri = np.where(pick_left, left, ri)

        tq = np.clip(theta_b, self.theta_grid[0], self.theta_grid[-1])
        ti = np.clip(np.searchsorted(self.theta_grid, tq) - 1, 0,
                     max(self.theta_grid.size - 2, 0))
        if self.theta_grid.size > 1:
            t0 = self.theta_grid[ti]
            t1 = self.theta_grid[ti + 1]
            wt = np.where(t1 > t0, (tq - t0) / np.where(t1 > t0, t1 - t0, 1.0), 0.0)
        else:
            wt = np.zeros_like(tq)

        av = np.abs(v_b)
        vq = np.clip(av, self.v_grid[0], self.v_grid[-1])
        vi = np.clip(np.searchsorted(self.v_grid, vq) - 1, 0,
                     max(self.v_grid.size - 2, 0))
        if self.v_grid.size > 1:
            v0 = self.v_grid[vi]
            v1 = self.v_grid[vi + 1]
            wv = np.where(v1 > v0, (vq - v0) / np.where(v1 > v0, v1 - v0, 1.0), 0.0)
            vi1 = vi + 1
        else:
            wv = np.zeros_like(vq)
            vi1 = vi

        if self.theta_grid.size > 1:
            ti1 = ti + 1
        else:
            ti1 = ti
        out = ((1 - wt) * (1 - wv) * table[ti, ri, vi]
               + (1 - wt) * wv * table[ti, ri, vi1]
               + wt * (1 - wv) * table[ti1, ri, vi]
               + wt * wv * table[ti1, ri, vi1])
        if odd:
            out = out * np.sign(v_b)
        return out.reshape(shape)

    def _need_derivs(self):
        if not self.has_theta_derivs:
            raise CapabilityError(
                "tabulated density has too few theta samples for derivatives")

    def psi(self, theta, r, v):
        return self._interp(self.psi_table, theta, r, v, odd=False)

    def g(self, theta, r, v):
        return self._interp(self.g_table, theta, r, v, odd=True)

    def g1(self, theta, r, v):
        return self._interp(self.g1_table, theta, r, v, odd=False)

    def _deriv_gate(self, table, theta, r, v, odd):
        self._need_derivs()
        out = self._interp(table, theta, r, v, odd=odd)
        return np.where(np.asarray(theta, dtype=float) > 0.0, out, 0.0)

    def psi_theta(self, theta, r, v):
        return self._deriv_gate(self.psi_th, theta, r, v, odd=False)

    def psi_theta2(self, theta, r, v):
        return self._deriv_gate(self.psi_th2, theta, r, v, odd=False)

    def g_theta(self, theta, r, v):
        return self._deriv_gate(self.g_th, theta, r, v, odd=True)

    def g_theta2(self, theta, r, v):
        return self._deriv_gate(self.g_th2, theta, r, v, odd=True)

    def g1_theta(self, theta, r, v):
        return self._deriv_gate(self.g1_th, theta, r, v, odd=False)

    def freeze(self, theta, r):
        return _FrozenGeneric(self, theta, r)

    def v_support(self, theta_max):
        return float(self.v_grid[-1])

    def sup_g(self, r):
        sup = self.g_table[:, :, -1].max(axis=0)
        return self._nearest_r(sup, r)

    def sup_psi(self, r):
        sup = self.psi_table.max(axis=(0, 2))
        return self._nearest_r(sup, r)

    def _nearest_r(self, per_node, r):
        r = np.asarray(r, dtype=float)
        ri = np.clip(np.searchsorted(self.r_grid, r), 0, self.r_grid.size - 1)
        left = np.clip(ri - 1, 0, self.r_grid.size - 1)
        pick_left = np.abs(self.r_grid[left] - r) <= np.abs(self.r_grid[ri] - r)
        return per_node[np.where(pick_left, left, ri)]

    def psi0_bound(self):
        w = _trapezoid_weights(self.r_grid)
        return float(np.max(np.einsum("j,tjv->t", w,
                                      _trapz_v(self.psi_table, self.v_grid))))

    def r_support(self, tail_tol=1e-8):
        return float(self.r_grid[-1])

    def tail_fraction(self, r_max):
        return 0.0 if r_max >= self.r_grid[-1] * (1.0 - 1e-12) else 1.0


def _cumtrapz(y, x, axis):
    y = np.asarray(y, dtype=float)
    dx = np.diff(x)
    shape = [1] * y.ndim
    shape[axis] = dx.size
    dx = dx.reshape(shape)
    mid = 0.5 * (np.take(y, range(1, y.shape[axis]), axis=axis)
                 + np.take(y, range(0, y.shape[axis] - 1), axis=axis))
    out = np.zeros_like(y)
    idx = [slice(None)] * y.ndim
    idx[axis] = slice(1, None)
    out[tuple(idx)] = np.cumsum(mid * dx, axis=axis)
    return out


def _trapz_v(table, v_grid):
    w = _trapezoid_weights(v_grid)
    return np.einsum("v,tjv->tjv", w, table)


def _trapezoid_weights(x):
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return np.array([1.0])
    w = np.zeros_like(x)
    d = np.diff(x)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def make_canonical_density(a0, r_decay, phi0, h0):
    """Construct the canonical density family; raises on bad parameters."""
    return CanonicalDensity(a0=a0, r_decay=r_decay, phi0=phi0, h0=h0)


def load_tabulated_density(path):
    """Read a tabulated density from a CSV with header theta,r,v,psi.

    The samples must form a full rectangular grid in (theta, r, v).
    """
    raw = np.genfromtxt(path, delimiter=",", names=True)
    for col in ("theta", "r", "v", "psi"):
        if col not in (raw.dtype.names or ()):
            raise DensityConstructionError(f"CSV is missing column '{col}'")
    theta = np.unique(raw["theta"])
    r = np.unique(raw["r"])
    v = np.unique(raw["v"])
    if theta.size * r.size * v.size != raw.size:
        raise DensityConstructionError(
            "CSV samples do not form a rectangular (theta, r, v) grid")
    order = np.lexsort((raw["v"], raw["r"], raw["theta"]))
    table = raw["psi"][order].reshape(theta.size, r.size, v.size)
    return TabulatedDensity(theta, r, v, table)


def density_eval(model, theta, r, v, what):
    """Evaluate one of the model's functions at (theta, r, v).

    ``what`` is one of psi, psi_theta, psi_theta2, g, g_theta, g_theta2,
    g1, g1_theta.  Thresholds must be positive; derivative requests check the
    model's capability flags.
    """
    if what not in _EVAL_KINDS:
        raise ValueError(f"unknown evaluation kind '{what}'")
    if np.any(np.asarray(r) <= 0.0):
        raise InvalidThresholdError("threshold r must be > 0")
    if "theta" in what and not model.has_theta_derivs:
        raise CapabilityError(f"density kind '{model.kind}' lacks theta derivatives")
    if what.endswith("2") and not model.has_second_derivs:
        raise CapabilityError(f"density kind '{model.kind}' lacks second derivatives")
    return getattr(model, what)(theta, r, v)


def threshold_grid(density, n_nodes=64, rule="gauss", tail_tol=1e-8):
    """Quadrature nodes and weights covering the density's r support.

    ``gauss`` places Gauss-Legendre nodes on (0, r_max); ``midpoint`` a uniform
    midpoint rule, which keeps kink-induced errors local.  Tabulated densities
    always use their own grid with trapezoid weights.
    """
    if getattr(density, "kind", None) == "tabulated":
        r = density.r_grid
        return r.copy(), _trapezoid_weights(r)
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    r_max = density.r_support(tail_tol=tail_tol)
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        r = 0.5 * r_max * (x + 1.0)
        w = 0.5 * r_max * w
    elif rule == "midpoint":
        h = r_max / n_nodes
        r = (np.arange(n_nodes) + 0.5) * h
        w = np.full(n_nodes, h)
    else:
        raise ValueError(f"unknown quadrature rule '{rule}'")
    return r, w
