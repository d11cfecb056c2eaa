"""Material coefficients and the constitutive functions built on them.

Scalar constants follow the rod model: density rho, viscosity nu, elastic
modulus c, piezoelectric coupling e, permittivity kappa, couple-stress modulus
gamma, thermal expansion beta, reference temperature theta_c, heat conductivity
mu_heat, heat-capacity floor c0, cut-off level R and rod length ell.

The strain-dependent self-similarity weight f and feedback gain alpha use the
rational presets

    f(eps)     = f0 + (f1 - f0) / (1 + eps^2)
    alpha(eps) = alpha0 / (1 + eps^2)

and the caloric law is selected by ``cv_model``:

    growth    C_V(theta) = c0 (1 + (theta^+)^(1/3))
    constant  C_V(theta) = c0
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

CV_MODELS = ("growth", "constant")


@dataclass(frozen=True)
class MaterialParams:
    rho: float = 1.0
    nu: float = 0.05
    c: float = 1.0
    e: float = 0.5
    kappa: float = 1.0
    gamma: float = 0.02
    beta: float = 0.1
    theta_c: float = 1.0
    mu_heat: float = 0.1
    c0: float = 1.0
    R: float = 50.0
    ell: float = 1.0
    f0: float = 0.5
    f1: float = 1.0
    alpha0: float = 0.5
    cv_model: str = "growth"

    # -- constitutive functions ---------------------------------------------

    def f(self, eps):
        return self.f0 + (self.f1 - self.f0) / (1.0 + np.square(eps))

    def f_prime(self, eps):
        return -2.0 * eps * (self.f1 - self.f0) / (1.0 + np.square(eps)) ** 2

    def alpha(self, eps):
        return self.alpha0 / (1.0 + np.square(eps))

    def alpha_prime(self, eps):
        return -2.0 * eps * self.alpha0 / (1.0 + np.square(eps)) ** 2

    def C_V(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.cv_model == "constant":
            return np.full_like(theta, self.c0)
        return self.c0 * (1.0 + np.cbrt(np.maximum(theta, 0.0)))

    def C_V_hat(self, theta):
        """Integral of C_V(K_R(s)) from 0 to theta, in closed form."""
        theta = np.asarray(theta, dtype=float)
        if self.cv_model == "constant":
            return self.c0 * theta
        R = self.R
        th_pos = np.clip(theta, 0.0, R)
        core = self.c0 * (th_pos + 0.75 * th_pos ** (4.0 / 3.0))
        above = self.c0 * (1.0 + np.cbrt(R)) * np.maximum(theta - R, 0.0)
        below = self.c0 * np.minimum(theta, 0.0)
        return core + above + below

    def F0_prime(self, theta):
        """Derivative of the caloric free energy; needs theta > 0.

        Pinned so that -F0'(theta_c) = c0 for both caloric models.
        """
        theta = np.maximum(np.asarray(theta, dtype=float), 1e-12 * self.theta_c)
        base = -self.c0 * (np.log(theta / self.theta_c) + 1.0)
        if self.cv_model == "constant":
            return base
        return base - 3.0 * self.c0 * (np.cbrt(theta) - np.cbrt(self.theta_c))

    def cutoff(self, z):
        """K_R(z) = min(R, z^+)."""
        return np.clip(z, 0.0, self.R)

    def A_star(self, eps_max=50.0, n=2001):
        """Supremum of (1 + kappa alpha) / (kappa f) over all strains."""
        eps = np.linspace(-eps_max, eps_max, n)
        vals = (1.0 + self.kappa * self.alpha(eps)) / (self.kappa * self.f(eps))
        asymptote = 1.0 / (self.kappa * self.f0)
        return float(max(vals.max(), asymptote))

    def with_(self, **kw):
        return replace(self, **kw)

    def validate(self, prefix="material"):
        """Return a list of violated invariants (empty when valid)."""
        errs = []
        for name in ("rho", "kappa", "gamma", "mu_heat", "c0", "ell", "R",
                     "theta_c"):
            if getattr(self, name) <= 0.0:
                errs.append(f"{prefix}.{name}: must be > 0")
        for name in ("nu", "beta", "c"):
            if getattr(self, name) < 0.0:
                errs.append(f"{prefix}.{name}: must be >= 0")
        if self.f0 <= 0.0:
            errs.append(f"{prefix}.f0: must be > 0")
        if self.f1 < self.f0:
            errs.append(f"{prefix}.f1: must be >= f0")
        if self.cv_model not in CV_MODELS:
            errs.append(f"{prefix}.cv_model: must be one of {CV_MODELS}")
        if self.kappa > 0.0:
            eps = np.linspace(-50.0, 50.0, 2001)
            if np.any(1.0 + self.kappa * self.alpha(eps) < 0.0):
                errs.append(f"{prefix}.alpha0: 1 + kappa*alpha(eps) must stay >= 0")
        return errs
