"""Quasi-static hysteresis loop traces, decoupled from the rod dynamics.

Two drive modes: cycling the auxiliary input q directly through the play bank
(the (q, P) loops whose enclosed area equals the dissipated energy), and
cycling the strain quasi-statically through the feedback inversion (the
(eps, sigma) loops and the butterfly-shaped (q, U) trace).
"""

from __future__ import annotations

import numpy as np

from .density import threshold_grid
from .hysteresis import PlayBank, bank_advance, dissipation_increment, eval_P, eval_U
from .inversion import FeedbackCoeffs, solve_q


def triangle_drive(amplitude, cycles, samples_per_leg):
    """Piecewise-linear drive 0 -> a -> -a -> a -> ... with full end cycles.

    Returns (path, last_cycle_start): the index at which the final closed
    a -> -a -> a cycle begins.
    """
    a = float(amplitude)
    n = int(samples_per_leg)
    legs = [np.linspace(0.0, a, n + 1)]
    for _ in range(int(cycles)):
        legs.append(np.linspace(a, -a, 2 * n + 1)[1:])
        legs.append(np.linspace(-a, a, 2 * n + 1)[1:])
    path = np.concatenate(legs)
    last_cycle_start = path.size - 4 * n - 1
    return path, last_cycle_start


def loop_area(q, P):
    """Trapezoid estimate of the circulation integral of q dP along the path."""
    q = np.asarray(q, dtype=float)
    P = np.asarray(P, dtype=float)
    return float(np.sum(0.5 * (q[1:] + q[:-1]) * np.diff(P)))


def q_loop_trace(density, theta, amplitude, cycles, samples_per_leg,
                 r_nodes=64, r_rule="gauss"):
    """Drive a virgin bank through triangular q cycles at fixed temperature.

    Returns a dict with the drive, outputs (P, U), per-step dissipation
    increments and the cumulative dissipation, plus the enclosed area and
    summed dissipation of the last closed cycle.
    """
    r, w = threshold_grid(density, n_nodes=r_nodes, rule=r_rule)
    path, cyc0 = triangle_drive(amplitude, cycles, samples_per_leg)
    bank = PlayBank.virgin(r, w)
    n = path.size
    P = np.zeros(n)
    U = np.zeros(n)
    diss = np.zeros(n)
    for i, q in enumerate(path):
        new_bank = bank_advance(bank, q)
        diss[i] = dissipation_increment(bank, new_bank, theta, density)
        P[i] = eval_P(new_bank, theta, density)
        U[i] = eval_U(new_bank, theta, density)
        bank = new_bank
    area = abs(loop_area(path[cyc0:], P[cyc0:]))
    cycle_diss = float(np.sum(diss[cyc0 + 1:]))
    return {"q": path, "P": P, "U": U, "diss_inc": diss,
            "diss_cum": np.cumsum(diss), "last_cycle_start": cyc0,
            "cycle_area": area, "cycle_dissipation": cycle_diss}


def strain_loop_trace(material, density, theta, amplitude, cycles,
                      samples_per_leg, r_nodes=64, r_rule="gauss",
                      tol=1e-10):
    """Drive the strain quasi-statically and solve the feedback equation.

    The stress uses the rate-free bracket (u_xt = 0) with the electric field
    eliminated, evaluated at the clipped temperature.
    """
    r, w = threshold_grid(density, n_nodes=r_nodes, rule=r_rule)
    eps_path, cyc0 = triangle_drive(amplitude, cycles, samples_per_leg)
    bank = PlayBank.virgin(r, w)
    theta_hat = material.cutoff(theta)
    n = eps_path.size
    out = {k: np.zeros(n) for k in ("q", "P", "U", "sigma", "E_field")}
    q_prev = None
    for i, eps in enumerate(eps_path):
        kf = material.kappa * material.f(eps)
        coeffs = FeedbackCoeffs(
            np.asarray((1.0 + material.kappa * material.alpha(eps)) / kf),
            np.asarray(-material.e * eps / kf))
        q, bank = solve_q(bank, theta_hat, coeffs, density, tol=tol,
                          q_warm=q_prev, virgin_init=(i == 0))
        P = eval_P(bank, theta_hat, density)
        U = eval_U(bank, theta_hat, density)
        E = -(material.e * eps + P) / material.kappa
        sigma = (material.c * eps - material.e * E
                 + material.f_prime(eps) * U
                 + 0.5 * material.alpha_prime(eps) * P ** 2
                 - material.beta * theta_hat)
        out["q"][i] = q
        out["P"][i] = P
        out["U"][i] = U
        out["sigma"][i] = sigma
        out["E_field"][i] = E
        q_prev = q
    out["eps"] = eps_path
    out["last_cycle_start"] = cyc0
    return out
