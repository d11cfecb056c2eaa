"""Spectral Galerkin solver for the coupled rod momentum / heat system.

Displacement expands in the orthonormal sine basis s_k (clamped end at x = 0,
moment-free ends), temperature in the cosine basis c_k (insulated ends).  The
semi-discrete system per mode is

    rho u_k'' + nu lam_k u_k' + (gamma lam_k^2 + (c + e^2/kappa) lam_k) u_k
        = -integral(nonlinear stress * s_k')
    M(theta_hat) theta' + mu_heat Lam theta = integral(heat sources * c_k)

with lam_k = (k pi / ell)^2.  One time step is IMEX: the hysteresis stack is
advanced explicitly at frozen strain and clipped temperature (one feedback
inversion per node), the diagonal linear mechanical part integrates with
TR-BDF2 (A/L-stable, second order), and the heat equation with backward Euler
on a quadrature-assembled heat-capacity mass matrix.  Nonlinear sources are
projected by composite trapezoid on a uniform node grid with at least 4m+1
points, so bilinear modal products integrate exactly.
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .density import threshold_grid
from .errors import (InvalidInitialDataError, InvalidMaterialError,
                     PiezorodError, SolverError)
from .hysteresis import (PlayBank, HystOutputs, _advance_xi,
                         _bank_unchecked)
from .inversion import FeedbackCoeffs, _solve_q_arrays, feedback_coeffs, play_init

TRACE_COLUMNS = ("t", "E_total", "E_kin", "E_elastic", "E_couple", "E_hyst",
                 "E_feedback", "E_electro", "E_caloric", "E_entropy_coupling",
                 "diss_rate", "min_theta", "D_resid", "q_resid")

SNAPSHOT_COLUMNS = ("x", "u", "u_x", "theta", "q", "P", "sigma", "E_field")

_TRBDF2_GAMMA = 2.0 - np.sqrt(2.0)


@dataclass
class Discretization:
    """Bases, node grid and modal coefficients shared by all steps."""

    m: int
    n_nodes: int
    ell: float
    x: np.ndarray = field(init=False)
    wq: np.ndarray = field(init=False)
    S: np.ndarray = field(init=False)    # s_k(x_i), (m, N)
    Sp: np.ndarray = field(init=False)   # s_k'(x_i)
    C: np.ndarray = field(init=False)    # c_k(x_i), (m+1, N)
    Cp: np.ndarray = field(init=False)   # c_k'(x_i)
    lam: np.ndarray = field(init=False)        # (k pi / ell)^2, k = 1..m
    lam_theta: np.ndarray = field(init=False)  # same with lam_0 = 0

    def __post_init__(self):
        m, N, ell = self.m, self.n_nodes, self.ell
        if m < 1:
            raise ValueError("mode count m must be >= 1")
        if N < 4 * m + 1:
            raise ValueError(f"need at least {4 * m + 1} nodes for m={m} modes")
        self.x = np.linspace(0.0, ell, N)
        h = ell / (N - 1)
        self.wq = np.full(N, h)
        self.wq[0] = self.wq[-1] = 0.5 * h
        k = np.arange(1, m + 1)[:, None]
        arg = k * np.pi * self.x[None, :] / ell
        amp = np.sqrt(2.0 / ell)
        self.S = amp * np.sin(arg)
        self.Sp = amp * (k * np.pi / ell) * np.cos(arg)
        kc = np.arange(0, m + 1)[:, None]
        argc = kc * np.pi * self.x[None, :] / ell
        self.C = amp * np.cos(argc)
        self.C[0, :] = 1.0 / np.sqrt(ell)
        self.Cp = -amp * (kc * np.pi / ell) * np.sin(argc)
        self.lam = (np.arange(1, m + 1) * np.pi / ell) ** 2
        self.lam_theta = (np.arange(0, m + 1) * np.pi / ell) ** 2


@dataclass
class Fields:
    """Node-wise synthesis of the modal state."""
    x: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    u_t: np.ndarray
    u_xt: np.ndarray
    theta: np.ndarray
    theta_x: np.ndarray
    theta_hat: np.ndarray


@dataclass
class GalerkinState:
    """Modal coefficients plus the per-node hysteresis memory."""
    disc: Discretization
    u: np.ndarray          # (m,)
    udot: np.ndarray       # (m,)
    theta: np.ndarray      # (m+1,)
    bank: PlayBank         # xi stacked (N, J)
    prev_G: np.ndarray     # (N,)
    q: np.ndarray          # (N,), root the bank was last advanced to
    time: float = 0.0
    thetadot: np.ndarray | None = None  # present only in regularized mode


@dataclass
class StepDiagnostics:
    q_resid: float
    d_resid: float
    diss_rate: float
    entropy_production: float
    min_theta: float
    diss_increment_min: float
    cutoff_theta_hi: bool
    cutoff_theta_neg: bool
    cutoff_visc: bool


@dataclass
class TraceRecord:
    t: float
    E_total: float
    E_kin: float
    E_elastic: float
    E_couple: float
    E_hyst: float
    E_feedback: float
    E_electro: float
    E_caloric: float
    E_entropy_coupling: float
    diss_rate: float
    min_theta: float
    D_resid: float
    q_resid: float

    def as_row(self):
        return [getattr(self, c) for c in TRACE_COLUMNS]


def stress_bracket(fields, hyst, material):
    """Integrand multiplying s_k' in the momentum projection.

    nu u_xt + c u_x + (e/kappa)(e u_x + P) + f'(u_x) U
    + (1/2) alpha'(u_x) P^2 - beta theta_hat
    """
    m = material
    return (m.nu * fields.u_xt + m.c * fields.u_x
            + (m.e / m.kappa) * (m.e * fields.u_x + hyst.P)
            + m.f_prime(fields.u_x) * hyst.U
            + 0.5 * m.alpha_prime(fields.u_x) * hyst.P ** 2
            - m.beta * fields.theta_hat)


def thermal_sources(fields, hyst, q, prev_G, dt, material):
    """Heat source H per node and the coupling term G it differentiates.

    H = nu K_R(u_xt^2) - beta theta_hat u_xt + f(u_x) * diss/dt
        - theta_hat (G - prev_G)/dt,     G = f(u_x)(q P_theta - U_theta).

    The dissipation enters through the exact per-step increment, realizing the
    identity q dP/dt - dU/dt = integral of r |xi_dot| psi over thresholds.
    """
    m = material
    f_eps = m.f(fields.u_x)
    G = f_eps * (q * hyst.P_theta - hyst.U_theta)
    H = (m.nu * m.cutoff(fields.u_xt ** 2)
         - m.beta * fields.theta_hat * fields.u_xt
         + f_eps * hyst.dissipation_increment / dt
         - fields.theta_hat * (G - prev_G) / dt)
    return H, G


class RodSolver:
    """Bundles material, density and discretization options for stepping."""

    def __init__(self, material, density, r_nodes=64, r_rule="gauss",
                 tail_tol=1e-8, tol_q=1e-10, max_iter=200,
                 regularized_theta=False):
        self.material = material
        self.density = density
        self.r_grid, self.r_weights = threshold_grid(
            density, n_nodes=r_nodes, rule=r_rule, tail_tol=tail_tol)
        self.tol_q = float(tol_q)
        self.max_iter = int(max_iter)
        self.regularized_theta = bool(regularized_theta)
        self._p_max = float(np.max(density.sup_g(self.r_grid) @ self.r_weights))
        self._trbdf2_cache = {}

    # -- setup ---------------------------------------------------------------

    def _project_component(self, func_or_coeffs, basis, n_coeffs):
        """Modal coefficients of one initial field.

        Callables are projected with a dense Gauss-Legendre rule; sequences are
        taken as coefficients directly (padded with zeros).
        """
        ell = self.material.ell
        if func_or_coeffs is None:
            return np.zeros(n_coeffs)
        if callable(func_or_coeffs):
            n_gl = max(256, 8 * n_coeffs)
            xg, wg = np.polynomial.legendre.leggauss(n_gl)
            xg = 0.5 * ell * (xg + 1.0)
            wg = 0.5 * ell * wg
            vals = np.asarray(func_or_coeffs(xg), dtype=float)
            if basis == "sin":
                k = np.arange(1, n_coeffs + 1)[:, None]
                bk = np.sqrt(2.0 / ell) * np.sin(k * np.pi * xg[None, :] / ell)
            else:
                k = np.arange(0, n_coeffs)[:, None]
                bk = np.sqrt(2.0 / ell) * np.cos(k * np.pi * xg[None, :] / ell)
                bk[0, :] = 1.0 / np.sqrt(ell)
            return bk @ (wg * vals)
        if np.isscalar(func_or_coeffs):
            value = float(func_or_coeffs)
            if basis == "cos":
                out = np.zeros(n_coeffs)
                out[0] = value * np.sqrt(ell)
                return out
            if value != 0.0:
                raise InvalidInitialDataError(
                    "a nonzero constant displacement violates u(0) = 0")
            return np.zeros(n_coeffs)
        coeffs = np.asarray(func_or_coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size > n_coeffs:
            raise InvalidInitialDataError(
                f"expected at most {n_coeffs} coefficients, got {coeffs.shape}")
        out = np.zeros(n_coeffs)
        out[:coeffs.size] = coeffs
        return out

    def project_initial(self, u0, u1, theta0, m, n_nodes=None):
        """Build the initial state: modal projections, virgin-curve hysteresis
        memory at the initial feedback root, and the coupling term history."""
        n_nodes = n_nodes if n_nodes else 8 * m + 1
        disc = Discretization(m=m, n_nodes=n_nodes, ell=self.material.ell)
        u = self._project_component(u0, "sin", m)
        udot = self._project_component(u1, "sin", m)
        theta = self._project_component(theta0, "cos", m + 1)

        theta_nodes = theta @ disc.C
        if np.any(theta_nodes <= 0.0):
            raise InvalidInitialDataError(
                f"initial temperature must be positive on the node grid "
                f"(min {theta_nodes.min():.4g})")

        u_x = u @ disc.Sp
        theta_hat = self.material.cutoff(theta_nodes)
        coeffs = feedback_coeffs(u_x, self.material)
        q0, _ = _solve_q_arrays(
            None, self.r_grid, self.r_weights, theta_hat,
            coeffs.A, coeffs.B, self.density, tol=self.tol_q,
            max_iter=self.max_iter, virgin=True)
        xi0 = play_init(q0[..., None], self.r_grid)
        bank = PlayBank(self.r_grid, self.r_weights, xi0, q0)

        p_th = self.density.g_theta(theta_hat[:, None], self.r_grid, xi0) \
            @ self.r_weights
        u_th = self.density.g1_theta(theta_hat[:, None], self.r_grid, xi0) \
            @ self.r_weights
        prev_G = self.material.f(u_x) * (q0 * p_th - u_th)

        thetadot = np.zeros(m + 1) if self.regularized_theta else None
        return GalerkinState(disc=disc, u=u, udot=udot, theta=theta, bank=bank,
                             prev_G=prev_G, q=q0, time=0.0, thetadot=thetadot)

    # -- field synthesis ------------------------------------------------------

    def reconstruct_fields(self, state):
        d = state.disc
        u = state.u @ d.S
        u_x = state.u @ d.Sp
        u_xx = -(state.u * d.lam) @ d.S
        u_t = state.udot @ d.S
        u_xt = state.udot @ d.Sp
        theta = state.theta @ d.C
        theta_x = state.theta @ d.Cp
        return Fields(x=d.x, u=u, u_x=u_x, u_xx=u_xx, u_t=u_t, u_xt=u_xt,
                      theta=theta, theta_x=theta_x,
                      theta_hat=self.material.cutoff(theta))

    def evaluate_on(self, state, x):
        """Synthesize (u, theta) on an arbitrary grid."""
        ell = self.material.ell
        m = state.disc.m
        x = np.asarray(x, dtype=float)
        k = np.arange(1, m + 1)[:, None]
        S = np.sqrt(2.0 / ell) * np.sin(k * np.pi * x[None, :] / ell)
        kc = np.arange(0, m + 1)[:, None]
        C = np.sqrt(2.0 / ell) * np.cos(kc * np.pi * x[None, :] / ell)
        C[0, :] = 1.0 / np.sqrt(ell)
        return state.u @ S, state.theta @ C

    # -- hysteresis bundle ----------------------------------------------------

    def _hyst_at(self, xi_old, xi_new, theta_hat, frozen=None):
        r, w = self.r_grid, self.r_weights
        if frozen is None:
            frozen = self.density.freeze(theta_hat[:, None], r)
        g_new = frozen.g(xi_new)
        P = g_new @ w
        U = frozen.g1(xi_new) @ w
        P_th = frozen.g_theta(xi_new) @ w
        U_th = frozen.g1_theta(xi_new) @ w
        if xi_old is None:
            diss = np.zeros_like(P)
        else:
            diss = np.abs(g_new - frozen.g(xi_old)) @ (w * r)
        return HystOutputs(P, U, P_th, U_th, diss)

    # -- time stepping --------------------------------------------------------

    def _mech_rhs(self, d, fields, hyst):
        d_nl = ((self.material.e / self.material.kappa) * hyst.P
                + self.material.f_prime(fields.u_x) * hyst.U
                + 0.5 * self.material.alpha_prime(fields.u_x) * hyst.P ** 2
                - self.material.beta * fields.theta_hat)
        return -(d.Sp @ (d.wq * d_nl))

    def _trbdf2_map(self, d, dt):
        """Per-mode transfer map of one TR-BDF2 step of
        rho u'' + a u' + K u = F with F frozen over the step:
        (u, v) -> T @ (u, v) + S * F.  Cached per (modes, dt)."""
        key = (d.m, d.ell, dt)
        cached = self._trbdf2_cache.get(key)
        if cached is not None:
            return cached
        m = self.material
        a = m.nu * d.lam
        K = m.gamma * d.lam ** 2 + (m.c + m.e ** 2 / m.kappa) * d.lam
        rho = m.rho
        g = _TRBDF2_GAMMA

        h1 = 0.5 * g * dt
        det1 = (rho + h1 * a) + h1 * h1 * K
        # stage 1 (trapezoidal to t + g*dt) as a linear map
        A11 = (rho + h1 * a - h1 * h1 * K) / det1
        A12 = 2.0 * rho * h1 / det1
        A1F = 2.0 * h1 * h1 / det1
        A21 = -2.0 * h1 * K / det1
        A22 = (rho - h1 * a - h1 * h1 * K) / det1
        A2F = 2.0 * h1 / det1

        c1 = 1.0 / (g * (2.0 - g))
        c2 = (1.0 - g) ** 2 / (g * (2.0 - g))
        h2 = (1.0 - g) / (2.0 - g) * dt
        det2 = (rho + h2 * a) + h2 * h2 * K
        # stage 2 (second-order backward difference) composed with stage 1
        s1u = c1 * A11 - c2
        s1v = c1 * A12
        s1F = c1 * A1F
        s2u = rho * c1 * A21
        s2v = rho * (c1 * A22 - c2)
        s2F = rho * c1 * A2F + h2

        T11 = (s1u * (rho + h2 * a) + h2 * s2u) / det2
        T12 = (s1v * (rho + h2 * a) + h2 * s2v) / det2
        S1 = (s1F * (rho + h2 * a) + h2 * s2F) / det2
        T21 = (s2u - h2 * K * s1u) / det2
        T22 = (s2v - h2 * K * s1v) / det2
        S2 = (s2F - h2 * K * s1F) / det2
        cached = (T11, T12, S1, T21, T22, S2)
        self._trbdf2_cache[key] = cached
        return cached

    def _trbdf2(self, d, u, v, F, dt):
        T11, T12, S1, T21, T22, S2 = self._trbdf2_map(d, dt)
        return T11 * u + T12 * v + S1 * F, T21 * u + T22 * v + S2 * F

    def step(self, state, dt):
        """Advance one IMEX step of size dt; returns (state, diagnostics)."""
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        d = state.disc
        mat = self.material
        fields = self.reconstruct_fields(state)

        coeffs = feedback_coeffs(fields.u_x, mat)
        frozen = self.density.freeze(fields.theta_hat[:, None], self.r_grid)
        q, resid = _solve_q_arrays(
            state.bank.xi, self.r_grid, self.r_weights, fields.theta_hat,
            coeffs.A, coeffs.B, self.density, tol=self.tol_q,
            max_iter=self.max_iter, q_warm=state.q, check_gain=False,
            frozen=frozen, p_max=self._p_max)
        xi_new = _advance_xi(state.bank.xi, q, self.r_grid)
        hyst = self._hyst_at(state.bank.xi, xi_new, fields.theta_hat,
                             frozen=frozen)

        E_node = -(mat.e * fields.u_x + hyst.P) / mat.kappa
        d_resid = float(np.max(np.abs(
            mat.e * fields.u_x + mat.kappa * E_node + hyst.P)))

        H, G = thermal_sources(fields, hyst, q, state.prev_G, dt, mat)

        F_mech = self._mech_rhs(d, fields, hyst)
        u_new, v_new = self._trbdf2(d, state.u, state.udot, F_mech, dt)

        cv = mat.C_V(fields.theta_hat)
        if np.any(cv <= 0.0):
            raise InvalidMaterialError("heat capacity must stay positive")
        wcv = d.wq * cv
        M = (d.C * wcv) @ d.C.T
        F_th = d.C @ (d.wq * H)
        Lam = np.diag(mat.mu_heat * d.lam_theta)
        if self.regularized_theta:
            eps_m = 1.0 / d.m
            thdot = state.thetadot
            lhs = (eps_m / dt) * np.eye(d.m + 1) + M + 0.5 * dt * Lam
            rhs = F_th + (eps_m / dt) * thdot \
                - Lam @ (state.theta + 0.5 * dt * thdot)
            thdot_new = np.linalg.solve(lhs, rhs)
            theta_new = state.theta + 0.5 * dt * (thdot + thdot_new)
        else:
            thdot_new = None
            theta_new = np.linalg.solve(M + dt * Lam, M @ state.theta
                                        + dt * F_th)

        f_eps = mat.f(fields.u_x)
        diss_rate = float(np.sum(d.wq * f_eps * hyst.dissipation_increment) / dt)
        entropy = float(np.sum(d.wq * (mat.nu * fields.u_xt ** 2
                                       + f_eps * hyst.dissipation_increment / dt)))
        theta_nodes_new = theta_new @ d.C
        diag = StepDiagnostics(
            q_resid=float(np.max(resid)),
            d_resid=d_resid,
            diss_rate=diss_rate,
            entropy_production=entropy,
            min_theta=float(theta_nodes_new.min()),
            diss_increment_min=float(hyst.dissipation_increment.min()),
            cutoff_theta_hi=bool(np.any(fields.theta > mat.R)),
            cutoff_theta_neg=bool(np.any(fields.theta < 0.0)),
            cutoff_visc=bool(np.any(fields.u_xt ** 2 > mat.R)),
        )
        new_state = GalerkinState(
            disc=d, u=u_new, udot=v_new, theta=theta_new,
            bank=_bank_unchecked(self.r_grid, self.r_weights, xi_new, q),
            prev_G=G, q=q, time=state.time + dt, thetadot=thdot_new)
        return new_state, diag

    # -- diagnostics -----------------------------------------------------------

    def total_energy(self, state, diag=None):
        """Energy breakdown of a state; the total is the sum of the parts."""
        d = state.disc
        mat = self.material
        fields = self.reconstruct_fields(state)
        hyst = self._hyst_at(None, state.bank.xi, fields.theta_hat)

        kin = 0.5 * mat.rho * float(state.udot @ state.udot)
        elastic = 0.5 * mat.c * float((d.lam * state.u) @ state.u)
        couple = 0.5 * mat.gamma * float((d.lam ** 2 * state.u) @ state.u)
        f_eps = mat.f(fields.u_x)
        hyst_E = float(np.sum(d.wq * f_eps * hyst.U))
        feedback = float(np.sum(d.wq * 0.5 * mat.alpha(fields.u_x) * hyst.P ** 2))
        electro = float(np.sum(
            d.wq * (mat.e * fields.u_x + hyst.P) ** 2 / (2.0 * mat.kappa)))
        caloric = float(np.sum(d.wq * mat.C_V_hat(fields.theta)))
        coupling = float(np.sum(d.wq * fields.theta_hat * f_eps
                                * (state.q * hyst.P_theta - hyst.U_theta)))
        total = (kin + elastic + couple + hyst_E + feedback + electro
                 + caloric + coupling)
        return TraceRecord(
            t=state.time, E_total=total, E_kin=kin, E_elastic=elastic,
            E_couple=couple, E_hyst=hyst_E, E_feedback=feedback,
            E_electro=electro, E_caloric=caloric, E_entropy_coupling=coupling,
            diss_rate=diag.diss_rate if diag else 0.0,
            min_theta=diag.min_theta if diag else
            float((state.theta @ d.C).min()),
            D_resid=diag.d_resid if diag else 0.0,
            q_resid=diag.q_resid if diag else 0.0)

    def entropy_production(self, state_prev, state_new, dt):
        """Quadrature of nu u_xt^2 + f(u_x) * diss/dt over the step; >= 0."""
        d = state_prev.disc
        fields = self.reconstruct_fields(state_prev)
        th = fields.theta_hat[:, None]
        diss = np.abs(self.density.g(th, self.r_grid, state_new.bank.xi)
                      - self.density.g(th, self.r_grid, state_prev.bank.xi)) \
            @ (self.r_weights * self.r_grid)
        f_eps = self.material.f(fields.u_x)
        return float(np.sum(d.wq * (self.material.nu * fields.u_xt ** 2
                                    + f_eps * diss / dt)))

    def observables(self, state):
        """Node-wise stress, field, entropy and constraint residual."""
        mat = self.material
        fields = self.reconstruct_fields(state)
        hyst = self._hyst_at(None, state.bank.xi, fields.theta_hat)
        E_node = -(mat.e * fields.u_x + hyst.P) / mat.kappa
        d_resid = mat.e * fields.u_x + mat.kappa * E_node + hyst.P
        sigma = stress_bracket(fields, hyst, mat)
        S = (-mat.F0_prime(np.maximum(fields.theta, 1e-12 * mat.theta_c))
             + mat.beta * fields.u_x
             + mat.f(fields.u_x) * (state.q * hyst.P_theta - hyst.U_theta))
        return {"x": fields.x, "sigma": sigma, "D_residual": d_resid,
                "E": E_node, "S": S, "q": state.q, "P": hyst.P, "U": hyst.U,
                "u": fields.u, "u_x": fields.u_x, "theta": fields.theta}


@dataclass
class SimulationResult:
    traces: list
    snapshots: list
    final_state: GalerkinState | None
    step_t: np.ndarray
    step_diss_rate: np.ndarray
    step_entropy: np.ndarray
    step_min_theta: np.ndarray
    step_q_resid: np.ndarray
    step_d_resid: np.ndarray
    summary: dict
    completed: bool
    error: str | None = None


def run_simulation(config):
    """Execute a configured scenario with a fixed step size.

    Traces and field snapshots are recorded every ``output_stride`` steps
    (always including the initial and final instants).  A step failure aborts
    the loop but returns everything recorded so far.
    """
    from .config import build_density, build_material

    material = build_material(config)
    density = build_density(config)
    disc = config.discretization
    solver = RodSolver(material, density,
                       r_nodes=config.density.r_nodes,
                       r_rule=config.density.r_rule,
                       tail_tol=config.density.tail_tol,
                       tol_q=disc.tol_q,
                       regularized_theta=disc.regularized_theta)
    n_nodes = disc.nodes if disc.nodes else 8 * disc.m + 1
    u0, u1, theta0 = config.initial.resolve(material)
    t_start = _time.perf_counter()
    state = solver.project_initial(u0, u1, theta0, disc.m, n_nodes)

    n_steps = int(round(disc.t_final / disc.dt))
    stride = max(1, int(disc.output_stride))

    traces = [solver.total_energy(state)]
    snapshots = [(0.0, _snapshot(solver, state))]
    step_arrays = {k: np.zeros(n_steps) for k in
                   ("t", "diss_rate", "entropy", "min_theta", "q_resid",
                    "d_resid")}
    cut_hi = cut_neg = cut_visc = False
    min_diss_inc = np.inf
    completed = True
    error = None
    n_done = 0

    for n in range(n_steps):
        try:
            state, diag = solver.step(state, disc.dt)
        except PiezorodError as exc:
            completed = False
            error = f"{type(exc).__name__}: {exc}"
            break
        n_done = n + 1
        step_arrays["t"][n] = state.time
        step_arrays["diss_rate"][n] = diag.diss_rate
        step_arrays["entropy"][n] = diag.entropy_production
        step_arrays["min_theta"][n] = diag.min_theta
        step_arrays["q_resid"][n] = diag.q_resid
        step_arrays["d_resid"][n] = diag.d_resid
        cut_hi |= diag.cutoff_theta_hi
        cut_neg |= diag.cutoff_theta_neg
        cut_visc |= diag.cutoff_visc
        min_diss_inc = min(min_diss_inc, diag.diss_increment_min)
        if n_done % stride == 0 or n_done == n_steps:
            traces.append(solver.total_energy(state, diag))
            snapshots.append((state.time, _snapshot(solver, state)))

    for key in step_arrays:
        step_arrays[key] = step_arrays[key][:n_done]

    runtime = _time.perf_counter() - t_start
    summary = {
        "completed": completed,
        "error": error,
        "n_steps": n_done,
        "final_time": state.time,
        "final_energy": traces[-1].E_total,
        "energy_components": {c: getattr(traces[-1], c) for c in
                              TRACE_COLUMNS[1:10]},
        "max_q_resid": float(step_arrays["q_resid"].max()) if n_done else 0.0,
        "max_D_resid": float(step_arrays["d_resid"].max()) if n_done else 0.0,
        "min_theta": float(step_arrays["min_theta"].min()) if n_done else
        traces[0].min_theta,
        "min_dissipation_increment": float(min_diss_inc) if n_done else 0.0,
        "min_entropy_production": float(step_arrays["entropy"].min())
        if n_done else 0.0,
        "diss_rate_max": float(step_arrays["diss_rate"].max()) if n_done else 0.0,
        "cutoff_activated": {"theta_ceiling": cut_hi, "theta_negative": cut_neg,
                             "viscous_heating": cut_visc},
        "seed": config.seed,
        "runtime_s": runtime,
    }
    return SimulationResult(
        traces=traces, snapshots=snapshots, final_state=state,
        step_t=step_arrays["t"], step_diss_rate=step_arrays["diss_rate"],
        step_entropy=step_arrays["entropy"],
        step_min_theta=step_arrays["min_theta"],
        step_q_resid=step_arrays["q_resid"],
        step_d_resid=step_arrays["d_resid"],
        summary=summary, completed=completed, error=error)


def _snapshot(solver, state):
    obs = solver.observables(state)
    return {"x": obs["x"], "u": obs["u"], "u_x": obs["u_x"],
            "theta": obs["theta"], "q": obs["q"], "P": obs["P"],
            "sigma": obs["sigma"], "E_field": obs["E"]}


def save_checkpoint(path, state, config_hash=""):
    """Serialize the full state (coefficients plus hysteresis memory) as JSON."""
    payload = {
        "time": state.time,
        "config_hash": config_hash,
        "m": state.disc.m,
        "n_nodes": state.disc.n_nodes,
        "ell": state.disc.ell,
        "u": state.u.tolist(),
        "udot": state.udot.tolist(),
        "theta": state.theta.tolist(),
        "thetadot": state.thetadot.tolist() if state.thetadot is not None
        else None,
        "prev_G": state.prev_G.tolist(),
        "q": state.q.tolist(),
        "bank": {
            "r_grid": state.bank.r_grid.tolist(),
            "weights": state.bank.weights.tolist(),
            "xi": state.bank.xi.tolist(),
            "last_q": state.bank.last_q.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Restore a state saved by save_checkpoint."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    disc = Discretization(m=payload["m"], n_nodes=payload["n_nodes"],
                          ell=payload["ell"])
    bank = PlayBank(np.array(payload["bank"]["r_grid"]),
                    np.array(payload["bank"]["weights"]),
                    np.array(payload["bank"]["xi"]),
                    np.array(payload["bank"]["last_q"]))
    thetadot = payload["thetadot"]
    return GalerkinState(
        disc=disc, u=np.array(payload["u"]), udot=np.array(payload["udot"]),
        theta=np.array(payload["theta"]), bank=bank,
        prev_G=np.array(payload["prev_G"]), q=np.array(payload["q"]),
        time=payload["time"],
        thetadot=np.array(thetadot) if thetadot is not None else None)
