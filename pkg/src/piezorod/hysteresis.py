"""Rate-independent play operators and their aggregation into hysteresis outputs.

A play element with threshold ``r`` keeps a memory value ``xi`` that moves only
when the input drags the dead zone ``|q - xi| <= r`` along.  A ``PlayBank``
holds one family of such elements over a quadrature grid of thresholds; summing
a density primitive over the bank yields the aggregate output ``P``, the stored
potential ``U``, their temperature derivatives and the exact dissipation of a
monotone step.

Banks broadcast: ``xi`` may carry leading axes (one bank per spatial node), and
every operation is vectorized over them.  All functions are pure; advancing a
bank returns a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, InvalidThresholdError

_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class PlayState:
    """One play element: threshold radius and current memory value."""
    r: float
    xi: float


@dataclass
class HystOutputs:
    """Aggregated hysteresis outputs of one bank state."""
    P: np.ndarray
    U: np.ndarray
    P_theta: np.ndarray
    U_theta: np.ndarray
    dissipation_increment: np.ndarray


@dataclass
class PlayBank:
    """A family of play elements over an increasing threshold grid.

    ``xi`` has shape (..., J) aligned with ``r_grid`` (J,); the quadrature
    ``weights`` turn sums over the grid into integrals over the threshold
    continuum.  ``last_q`` records the input the bank was last advanced to.
    """

    r_grid: np.ndarray
    weights: np.ndarray
    xi: np.ndarray
    last_q: np.ndarray

    def __post_init__(self):
        self.r_grid = np.asarray(self.r_grid, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        self.last_q = np.asarray(self.last_q, dtype=float)
        if self.r_grid.ndim != 1:
            raise ValueError("r_grid must be one-dimensional")
        if self.r_grid.shape != self.weights.shape:
            raise ValueError("r_grid and weights must have the same length")
        if np.any(self.r_grid <= 0.0):
            raise InvalidThresholdError("all thresholds must be > 0")
        if self.r_grid.size > 1 and np.any(np.diff(self.r_grid) <= 0.0):
            raise ValueError("r_grid must be strictly increasing")
        if np.any(self.weights <= 0.0):
            raise ValueError("all quadrature weights must be positive")
        if self.xi.shape[-1] != self.r_grid.size:
            raise ValueError("xi's last axis must match the threshold grid")

    @classmethod
    def virgin(cls, r_grid, weights, shape=()):
        """Bank with all memory values at zero and input history at zero."""
        r_grid = np.asarray(r_grid, dtype=float)
        xi = np.zeros(tuple(shape) + (r_grid.size,))
        return cls(r_grid, weights, xi, np.zeros(tuple(shape)))

    @classmethod
    def from_initial(cls, q0, r_grid, weights):
        """Bank seeded with the virgin-curve memory for initial input q0."""
        r_grid = np.asarray(r_grid, dtype=float)
        q0 = np.asarray(q0, dtype=float)
        xi = play_init(q0[..., None], r_grid)
        return cls(r_grid, weights, xi, q0)

    @property
    def states(self):
        if self.xi.ndim != 1:
            raise ValueError("per-element states only exist for a single bank")
        return [PlayState(float(r), float(x)) for r, x in zip(self.r_grid, self.xi)]

    def copy(self):
        return PlayBank(self.r_grid, self.weights, self.xi.copy(),
                        np.array(self.last_q, dtype=float))


def play_init(q0, r):
    """Initial memory value max(q0 - r, min(0, q0 + r)) of a virgin element."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise InvalidThresholdError("threshold r must be > 0")
    return np.clip(0.0, np.asarray(q0, dtype=float) - r, np.asarray(q0) + r)


def play_update(xi_prev, q_new, r):
    """Projection update min(q + r, max(q - r, xi)); exact for a monotone move."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise InvalidThresholdError("threshold r must be > 0")
    q_new = np.asarray(q_new, dtype=float)
    return np.clip(np.asarray(xi_prev, dtype=float), q_new - r, q_new + r)


def _advance_xi(xi, q, r):
    # hot-path kernel: no validation, q broadcast against the threshold axis
    qb = q[..., None]
    return np.minimum(np.maximum(xi, qb - r), qb + r)


def _bank_unchecked(r_grid, weights, xi, last_q):
    # hot-path constructor: grids already validated at solver setup
    bank = object.__new__(PlayBank)
    bank.r_grid = r_grid
    bank.weights = weights
    bank.xi = xi
    bank.last_q = last_q
    return bank


def bank_advance(bank, q_new):
    """Advance every element of the bank to the new input value."""
    q_new = np.asarray(q_new, dtype=float)
    xi = _advance_xi(bank.xi, q_new, bank.r_grid)
    return PlayBank(bank.r_grid, bank.weights, xi, q_new)


def _check_tail(bank, density):
    # weights sum to the covered radius for grids built on (0, r_max)
    cover = max(float(bank.r_grid[-1]), float(bank.weights.sum()))
    frac = density.tail_fraction(cover)
    if frac > _TAIL_TOL:
        import warnings
        warnings.warn(
            f"threshold grid truncates {frac:.2e} of the density's tail mass "
            f"(declared tolerance {_TAIL_TOL:.0e})",
            RuntimeWarning, stacklevel=3)


def eval_P(bank, theta, density):
    """Aggregate output: quadrature of the primitive g over the bank."""
    _check_tail(bank, density)
    theta_b = np.asarray(theta, dtype=float)[..., None]
    return density.g(theta_b, bank.r_grid, bank.xi) @ bank.weights


def eval_U(bank, theta, density):
    """Stored potential: quadrature of the first-moment primitive; >= 0."""
    _check_tail(bank, density)
    theta_b = np.asarray(theta, dtype=float)[..., None]
    return density.g1(theta_b, bank.r_grid, bank.xi) @ bank.weights


def eval_theta_derivs(bank, theta, density):
    """Temperature derivatives (dP/dtheta, dU/dtheta) of the aggregates."""
    from .density import density_eval  # capability validation lives there
    theta_b = np.asarray(theta, dtype=float)[..., None]
    p_th = density_eval(density, theta_b, bank.r_grid, bank.xi, "g_theta")
    u_th = density_eval(density, theta_b, bank.r_grid, bank.xi, "g1_theta")
    return p_th @ bank.weights, u_th @ bank.weights


def dissipation_increment(bank_old, bank_new, theta, density):
    """Energy dissipated by one monotone advance at frozen temperature.

    Exact time integral of r |xi_dot| psi over the step, evaluated through the
    primitive: sum of w_j r_j |g(xi_new) - g(xi_old)|.  Always nonnegative.
    """
    if bank_old.r_grid.shape != bank_new.r_grid.shape or \
            np.any(bank_old.r_grid != bank_new.r_grid):
        raise GridMismatchError("banks live on different threshold grids")
    theta_b = np.asarray(theta, dtype=float)[..., None]
    g_new = density.g(theta_b, bank_new.r_grid, bank_new.xi)
    g_old = density.g(theta_b, bank_old.r_grid, bank_old.xi)
    return np.abs(g_new - g_old) @ (bank_new.weights * bank_new.r_grid)


def step_energy_identity_check(bank_old, bank_new, q_new):
    """Max residual of the per-element balance dxi (q - xi_new) = r |dxi|.

    Whenever an element moves, the projection pins q - xi_new to +-r, so the
    residual is zero up to rounding for every drive.
    """
    dxi = bank_new.xi - bank_old.xi
    q = np.asarray(q_new, dtype=float)[..., None]
    resid = dxi * (q - bank_new.xi) - bank_new.r_grid * np.abs(dxi)
    return np.max(np.abs(resid))


def hyst_outputs(bank_old, bank_new, theta, density):
    """Bundle P, U, their theta-derivatives and the step's dissipation."""
    P = eval_P(bank_new, theta, density)
    U = eval_U(bank_new, theta, density)
    P_th, U_th = eval_theta_derivs(bank_new, theta, density)
    diss = dissipation_increment(bank_old, bank_new, theta, density)
    return HystOutputs(P, U, P_th, U_th, diss)
