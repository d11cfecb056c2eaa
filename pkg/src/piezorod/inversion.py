"""Per-step inversion of the feedback relation q + A * P[q] = B.

The residual F(q) = q + A * P(advance(bank, q)) - B is strictly increasing with
slope >= 1 (the density is nonnegative, the play update is nondecreasing in q
and A >= 0), so the root is unique and bracketed by B -+ A * Pmax.  A
safeguarded regula-falsi / bisection hybrid (Illinois variant) finds it without
derivatives; candidate advances always restart from the same prior bank state,
and only the accepted root's advance is committed.

All routines broadcast over leading axes, so one call solves every spatial
node of a discretized rod at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BracketError, ConvergenceError
from .hysteresis import PlayBank, _advance_xi, play_init

_DEFAULT_TOL = 1e-10


@dataclass
class FeedbackCoeffs:
    """Gain A = (1 + kappa alpha) / (kappa f) and drive B = -e eps / (kappa f)."""
    A: np.ndarray
    B: np.ndarray


@dataclass
class LipschitzCertificate:
    """Empirical check of the sup-norm stability bound of the inversion."""
    worst_ratio: float
    bound: float
    M: float
    M1: float
    n_trials: int
    passed: bool
    ratios: np.ndarray


def feedback_coeffs(eps, material):
    eps = np.asarray(eps, dtype=float)
    kf = material.kappa * material.f(eps)
    A = (1.0 + material.kappa * material.alpha(eps)) / kf
    B = -material.e * eps / kf
    return FeedbackCoeffs(A, B)


def _solve_q_arrays(xi0, r, w, theta, A, B, density, tol=_DEFAULT_TOL,
                    max_iter=200, q_warm=None, virgin=False, check_gain=True,
                    frozen=None, p_max=None):
    """Root of F(q) = q + A*P(q) - B for stacked banks; returns (q, residual)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    theta_b = np.asarray(theta, dtype=float)[..., None]
    if check_gain and np.any(A < 0.0):
        raise BracketError("feedback gain A must be >= 0 for a monotone residual")
    if frozen is None:
        frozen = density.freeze(theta_b, r)

    shape = np.broadcast(A, B, np.asarray(theta, dtype=float)).shape
    if p_max is None:
        p_max = float(np.max(density.sup_g(r) @ w))
    pad = tol + 1e-12 * (1.0 + np.max(np.abs(B)) + np.max(A) * p_max)
    lo_cold = np.broadcast_to(B - A * p_max - pad, shape).astype(float).copy()
    hi_cold = np.broadcast_to(B + A * p_max + pad, shape).astype(float).copy()

    if virgin:
        def F(q):
            zi = np.minimum(np.maximum(0.0, q[..., None] - r), q[..., None] + r)
            return q + A * (frozen.g(zi) @ w) - B
    else:
        def F(q):
            return q + A * (frozen.g(_advance_xi(xi0, q, r)) @ w) - B

    if q_warm is not None:
        d = np.maximum(100.0 * tol, 1e-4 * (1.0 + np.abs(q_warm)))
        lo = np.maximum(np.asarray(q_warm, dtype=float) - d, lo_cold)
        hi = np.minimum(np.asarray(q_warm, dtype=float) + d, hi_cold)
        flo = F(lo)
        fhi = F(hi)
        # fall back to the guaranteed bracket where the warm window missed
        miss = (flo > 0.0) | (fhi < 0.0)
        if np.any(miss):
            lo = np.where(miss, lo_cold, lo)
            hi = np.where(miss, hi_cold, hi)
            flo = np.where(miss, F(lo_cold), flo)
            fhi = np.where(miss, F(hi_cold), fhi)
    else:
        lo, hi = lo_cold, hi_cold
        flo = F(lo)
        fhi = F(hi)

    if np.any(flo > 0.0) or np.any(fhi < 0.0):
        raise BracketError(
            "residual does not change sign over the admissible bracket; "
            "the density violates its declared output bound")

    q_best = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    f_best = np.where(np.abs(flo) <= np.abs(fhi), flo, fhi)
    # +1: last replaced upper end, -1: lower, 0: none yet (Illinois memory)
    side = np.zeros(shape, dtype=np.int8)

    for it in range(max_iter):
        if np.all(np.abs(f_best) <= tol):
            break
        span = hi - lo
        denom = fhi - flo
        frac = np.where(denom > 0.0,
                        -flo / np.where(denom > 0.0, denom, 1.0), 0.5)
        if (it + 1) % 4 == 0:
            frac = np.full_like(frac, 0.5)  # periodic bisection safeguard
        frac = np.clip(frac, 1e-3, 1.0 - 1e-3)
        x = lo + frac * span
        fx = F(x)

        better = np.abs(fx) < np.abs(f_best)
        q_best = np.where(better, x, q_best)
        f_best = np.where(better, fx, f_best)

        up = fx >= 0.0
        # Illinois: replacing the same side twice halves the stale residual
        flo = np.where(up & (side == 1), 0.5 * flo, flo)
        fhi = np.where(~up & (side == -1), 0.5 * fhi, fhi)
        hi = np.where(up, x, hi)
        fhi = np.where(up, fx, fhi)
        lo = np.where(~up, x, lo)
        flo = np.where(~up, fx, flo)
        side = np.where(up, 1, -1).astype(np.int8)

    resid = np.abs(f_best)
    if np.any(resid > tol):
        raise ConvergenceError(
            f"inversion did not reach tol={tol:g} in {max_iter} iterations",
            best_residual=float(np.max(resid)))
    return q_best, resid


def solve_q(bank, theta, coeffs, density, tol=_DEFAULT_TOL, max_iter=200,
            q_warm=None, virgin_init=False):
    """Solve q + A * P(theta)[q] = B against the bank's prior state.

    Returns the root q and the bank advanced to it.  ``virgin_init`` solves
    instead against the virgin initial-memory curve, which is how the very
    first input of a trajectory is determined.
    """
    q, _ = _solve_q_arrays(bank.xi, bank.r_grid, bank.weights, theta,
                           coeffs.A, coeffs.B, density, tol=tol,
                           max_iter=max_iter, q_warm=q_warm, virgin=virgin_init)
    if virgin_init:
        xi = play_init(q[..., None], bank.r_grid)
        new_bank = PlayBank(bank.r_grid, bank.weights, xi, q)
    else:
        from .hysteresis import bank_advance
        new_bank = bank_advance(bank, q)
    return q, new_bank


def estimate_inversion_constants(density, material, r_grid, weights,
                                 theta_max=20.0, eps_max=10.0,
                                 n_eps=801, n_theta=241, n_v=241):
    """Sampled constants (M, M1, A*) of the combined operator A(eps)*psi.

    M bounds the integral over r of the sup of the weighted density; M1 bounds
    the integral of the parameter-gradient envelope.  Both are evaluated on the
    bank's threshold grid so they describe the discretized operator exactly.
    """
    eps = np.linspace(-eps_max, eps_max, n_eps)
    A_vals = (1.0 + material.kappa * material.alpha(eps)) / \
        (material.kappa * material.f(eps))
    A_star = float(max(A_vals.max(), 1.0 / (material.kappa * material.f0)))
    A_prime = np.gradient(A_vals, eps)
    L_A = float(np.max(np.abs(A_prime)))

    thetas = np.concatenate(([0.0], np.geomspace(1e-3, theta_max, n_theta - 1)))
    v_hi = density.v_support(theta_max)
    v = np.linspace(0.0, v_hi, n_v)

    # sup over theta of psi and |psi_theta| at each (r, v)
    th = thetas[:, None, None]
    psi_sup = density.psi(th, r_grid[None, :, None], v[None, None, :]).max(axis=0)
    if density.has_theta_derivs:
        psith_sup = np.abs(
            density.psi_theta(th, r_grid[None, :, None], v[None, None, :])
        ).max(axis=0)
    else:
        psith_sup = np.zeros_like(psi_sup)

    M = float((A_star * psi_sup.max(axis=1)) @ weights)
    K = np.sqrt((L_A * psi_sup) ** 2 + (A_star * psith_sup) ** 2)
    # integrate over v (even extension doubles the half-line integral)
    v_w = np.zeros_like(v)
    if v.size > 1:
        dv = np.diff(v)
        v_w[:-1] += 0.5 * dv
        v_w[1:] += 0.5 * dv
    M1 = float(2.0 * (K @ v_w) @ weights)
    return M, M1, A_star


def _piecewise_linear_path(rng, n_segments, n_samples, amp):
    knots = rng.uniform(-amp, amp, size=n_segments + 1)
    t_knots = np.linspace(0.0, 1.0, n_segments + 1)
    t = np.linspace(0.0, 1.0, n_samples)
    return np.interp(t, t_knots, knots)


def lipschitz_certificate(trials, density, material, seed=0, r_grid=None,
                          weights=None, n_samples=160, n_segments=8,
                          w_amp=0.5, eps_amp=1.0, theta_lo=0.2, theta_hi=5.0,
                          tol=_DEFAULT_TOL):
    """Monte-Carlo check of |q - q_hat| <= e^M (sup|w - w_hat| + M1 sup|u - u_hat|).

    Generates paired random piecewise-linear drives and parameter paths, solves
    both inversion sequences step by step, and records the worst ratio of the
    left side to the right side.  Passing means the bound held on every trial.
    """
    from .density import threshold_grid

    if r_grid is None or weights is None:
        r_grid, weights = threshold_grid(density, n_nodes=48)
    M, M1, _ = estimate_inversion_constants(density, material, r_grid, weights)
    bound = float(np.exp(M))
    rng = np.random.default_rng(seed)

    ratios = np.zeros(trials)
    for trial in range(trials):
        paths = {}
        for name, amp in (("w", w_amp), ("w_hat", w_amp),
                          ("eps", eps_amp), ("eps_hat", eps_amp)):
            paths[name] = _piecewise_linear_path(rng, n_segments, n_samples, amp)
        th = theta_lo + (theta_hi - theta_lo) * np.abs(
            _piecewise_linear_path(rng, n_segments, n_samples, 1.0))
        th_hat = theta_lo + (theta_hi - theta_lo) * np.abs(
            _piecewise_linear_path(rng, n_segments, n_samples, 1.0))

        qs = np.zeros((2, n_samples))
        for branch, (w_path, e_path, t_path) in enumerate(
                ((paths["w"], paths["eps"], th),
                 (paths["w_hat"], paths["eps_hat"], th_hat))):
            bank = PlayBank.virgin(r_grid, weights)
            q_prev = None
            for i in range(n_samples):
                A = (1.0 + material.kappa * material.alpha(e_path[i])) / \
                    (material.kappa * material.f(e_path[i]))
                coeffs = FeedbackCoeffs(np.asarray(A), np.asarray(w_path[i]))
                q, bank = solve_q(bank, t_path[i], coeffs, density, tol=tol,
                                  q_warm=q_prev, virgin_init=(i == 0))
                qs[branch, i] = q
                q_prev = q

        dw = np.abs(paths["w"] - paths["w_hat"])
        du = np.hypot(paths["eps"] - paths["eps_hat"], th - th_hat)
        denom = np.maximum.accumulate(dw) + M1 * np.maximum.accumulate(du)
        num = np.abs(qs[0] - qs[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0.0, num / np.where(denom > 0, denom, 1.0),
                             np.where(num > 0.0, np.inf, 0.0))
        ratios[trial] = ratio.max()

    worst = float(ratios.max()) if trials else 0.0
    # allow for the root solver's own residual tolerance in the comparison
    passed = bool(worst <= bound * (1.0 + 1e-9))
    return LipschitzCertificate(worst_ratio=worst, bound=bound, M=M, M1=M1,
                                n_trials=trials, passed=passed, ratios=ratios)
