"""Numerical admissibility checks for a density / material pairing.

The model is well posed when the density satisfies thirteen integral and
symmetry conditions (items density.i .. density.xiii below) and the material
functions satisfy three structural conditions (material.i .. material.iii).
The checker evaluates every condition on a sampling grid, reports the tightest
constants consistent with the samples, and flags near-threshold items as
marginal.  Verdicts are sampled evidence, not proofs; the grid is recorded in
the report.

Key reported constants:

    psi0    the smallest envelope bounding the output-scale items (iii .. ix)
    delta   f1 times the largest of the derivative-scale items (x .. xii)
    A_star  sup of the feedback gain over all strains
    M, M1   discrete-operator constants used by the inversion certificate

The final gate (item density.xiii) requires delta < 1 and
(7 + 3 A* psi0) delta <= c0 / 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .density import threshold_grid
from .inversion import estimate_inversion_constants

MARGINAL_FRACTION = 0.1


@dataclass
class SamplingSpec:
    n_theta: int = 64
    theta_max: float = 1e3
    n_v: int = 128
    n_eps: int = 801
    eps_max: float = 50.0
    r_nodes: int = 64
    tail_tol: float = 1e-8

    def describe(self):
        return {
            "n_theta": self.n_theta, "theta_max": self.theta_max,
            "n_v": self.n_v, "n_eps": self.n_eps, "eps_max": self.eps_max,
            "r_nodes": self.r_nodes,
        }


@dataclass
class ItemResult:
    estimate: float
    bound: float
    passed: bool
    marginal: bool = False
    detail: str = ""


@dataclass
class HypothesisReport:
    items: dict
    psi0: float
    delta: float
    A_star: float
    M: float
    M1: float
    sampling: dict
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(all(item.passed for item in self.items.values()))
        self.psi0 = float(self.psi0)
        self.delta = float(self.delta)

    def failing_items(self):
        return [key for key, item in self.items.items() if not item.passed]

    def to_dict(self):
        return {
            "passed": self.passed,
            "constants": {"psi0": self.psi0, "delta": self.delta,
                          "A_star": self.A_star, "M": self.M, "M1": self.M1},
            "sampling": self.sampling,
            "items": {
                key: {"estimate": float(item.estimate),
                      "bound": float(item.bound),
                      "pass": bool(item.passed),
                      "marginal": bool(item.marginal),
                      "detail": item.detail}
                for key, item in self.items.items()
            },
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def _trapezoid_weights(x):
    w = np.zeros_like(x)
    if x.size > 1:
        d = np.diff(x)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def hypothesis_report(density, material, sampling=None):
    """Evaluate every admissibility item on the sampling grid."""
    sp = sampling or SamplingSpec()
    r, w_r = threshold_grid(density, n_nodes=sp.r_nodes, tail_tol=sp.tail_tol)

    thetas = np.concatenate(([0.0],
                             np.geomspace(1e-3, sp.theta_max, sp.n_theta - 1)))
    v_hi = max(density.v_support(sp.theta_max), 1e-12)
    v = np.linspace(0.0, v_hi, sp.n_v)
    w_v = _trapezoid_weights(v)

    th = thetas[:, None, None]
    rr = r[None, :, None]
    vv = v[None, None, :]

    psi = density.psi(th, rr, vv)                      # (T, J, V)
    have_d1 = density.has_theta_derivs
    have_d2 = density.has_second_derivs
    psi_th = density.psi_theta(th, rr, vv) if have_d1 else None
    g_th = density.g_theta(th, rr, vv) if have_d1 else None
    psi_th2 = density.psi_theta2(th, rr, vv) if have_d2 else None
    g_th2 = density.g_theta2(th, rr, vv) if have_d2 else None

    items = {}

    # -- symmetry / sign / gating ------------------------------------------
    neg_theta = np.array([-5.0, -1.0, -0.1, 0.0])[:, None, None]
    psi_neg_v = density.psi(th, rr, -vv)
    even_err = float(np.max(np.abs(psi - psi_neg_v)))
    min_psi = float(psi.min())
    ok_i = even_err <= 1e-12 and min_psi >= -1e-12
    items["density.i"] = ItemResult(
        estimate=max(even_err, -min_psi), bound=0.0, passed=ok_i,
        detail="max evenness violation vs min sampled value "
               f"{min_psi:.3e}")

    if have_d1:
        gate = float(np.max(np.abs(density.psi_theta(neg_theta, rr, vv))))
    else:
        gate = 0.0
    items["density.ii"] = ItemResult(
        estimate=gate, bound=0.0, passed=gate <= 1e-14,
        detail="theta derivative sampled at nonpositive temperatures")

    # -- output-scale items (iii .. ix) define psi0 --------------------------
    est = {}
    est["iii"] = float(np.max(np.einsum("j,tjv->tv", w_r * (1.0 + r), psi)))
    est["iv"] = float(np.max(np.einsum("j,v,tjv->t", w_r, w_v, psi)))
    mom = np.einsum("j,v,tjv->t", w_r, w_v * v, psi)
    est["v"] = float(np.max(mom / (1.0 + np.maximum(thetas, 0.0))))
    vmom = np.einsum("j,tjv->tv", w_r, psi) * v[None, :]
    est["vi"] = float(np.max(
        vmom / (1.0 + np.maximum(thetas, 0.0)[:, None] ** (1.0 / 6.0))))
    if have_d1:
        weight_vii = vv + th * (1.0 + rr)
        est["vii"] = float(np.max(np.einsum(
            "v,tjv->t", w_v, np.einsum("j,tjv->tjv", w_r,
                                       weight_vii * np.abs(psi_th)))))
        est["viii"] = float(np.max(
            (1.0 + thetas)[:, None]
            * np.einsum("j,tjv->tv", w_r * (1.0 + r), np.abs(psi_th))))
        # cumulative v-integral, sup over the upper limit K
        cum_g = np.cumsum(w_v[None, None, :] * g_th, axis=2)
        est["ix"] = float(np.max(np.abs(
            (1.0 + thetas)[:, None] * np.einsum("j,tjv->tv", w_r, cum_g))))
    else:
        est["vii"] = est["viii"] = est["ix"] = 0.0

    psi0 = max(est.values())
    for key in ("iii", "iv", "v", "vi", "vii", "viii", "ix"):
        items[f"density.{key}"] = ItemResult(
            estimate=est[key], bound=psi0, passed=bool(np.isfinite(est[key])))

    # -- derivative-scale items (x .. xii) define delta ----------------------
    destm = {}
    if have_d1:
        destm["x"] = float(np.max(
            np.einsum("j,v,tjv->t", w_r, w_v, np.abs(psi_th))))
    else:
        destm["x"] = 0.0
    if have_d2:
        destm["xi"] = float(np.max(np.abs(
            (1.0 + thetas)
            * np.einsum("j,v,tjv->t", w_r * r, w_v, psi_th2))))
        cum_g2 = np.cumsum(w_v[None, None, :] * g_th2, axis=2)
        destm["xii"] = float(np.max(np.abs(
            (1.0 + thetas)[:, None] * np.einsum("j,tjv->tv", w_r, cum_g2))))
    else:
        destm["xi"] = destm["xii"] = 0.0

    delta = material.f1 * max(destm.values())
    delta_bound = delta / material.f1 if material.f1 > 0 else 0.0
    for key in ("x", "xi", "xii"):
        near = destm[key] >= (1.0 - MARGINAL_FRACTION) * delta_bound > 0.0
        items[f"density.{key}"] = ItemResult(
            estimate=destm[key], bound=delta_bound,
            passed=bool(np.isfinite(destm[key])), marginal=bool(near))

    A_star = material.A_star(eps_max=sp.eps_max, n=sp.n_eps)
    gate_lhs = (7.0 + 3.0 * A_star * psi0) * delta
    gate_rhs = material.c0 / 2.0
    ok_xiii = bool(delta < 1.0 and gate_lhs <= gate_rhs)
    items["density.xiii"] = ItemResult(
        estimate=gate_lhs, bound=gate_rhs, passed=ok_xiii,
        marginal=bool(gate_lhs >= (1.0 - MARGINAL_FRACTION) * gate_rhs),
        detail=f"delta={delta:.4g} (must stay below 1)")

    # -- material items -------------------------------------------------------
    eps = np.linspace(-sp.eps_max, sp.eps_max, sp.n_eps)
    f_vals = material.f(eps)
    fp_vals = material.f_prime(eps)
    lip_f = float(np.max(np.abs(np.diff(f_vals) / np.diff(eps))))
    lip_fp = float(np.max(np.abs(np.diff(fp_vals) / np.diff(eps))))
    growth = float(np.max(1.0 + np.abs(eps) * np.abs(fp_vals)))
    in_band = bool(np.all(f_vals >= material.f0 - 1e-12)
                   and np.all(f_vals <= material.f1 + 1e-12)
                   and material.f0 > 0.0)
    items["material.i"] = ItemResult(
        estimate=max(lip_f, lip_fp, growth), bound=float("inf"),
        passed=in_band and np.isfinite(lip_f) and np.isfinite(lip_fp),
        detail=f"f range [{f_vals.min():.4g}, {f_vals.max():.4g}], "
               f"Lip(f)={lip_f:.4g}, Lip(f')={lip_fp:.4g}, "
               f"sup(1+|eps||f'|)={growth:.4g}")

    a_vals = material.alpha(eps)
    ap_vals = material.alpha_prime(eps)
    lip_a = float(np.max(np.abs(np.diff(a_vals) / np.diff(eps))))
    lip_ap = float(np.max(np.abs(np.diff(ap_vals) / np.diff(eps))))
    min_gate = float(np.min(1.0 + material.kappa * a_vals))
    items["material.ii"] = ItemResult(
        estimate=-min_gate, bound=0.0,
        passed=min_gate >= -1e-12 and np.isfinite(lip_a) and np.isfinite(lip_ap),
        detail=f"min(1+kappa*alpha)={min_gate:.4g}, A*={A_star:.4g}, "
               f"Lip(alpha)={lip_a:.4g}, Lip(alpha')={lip_ap:.4g}")

    cv = material.C_V(thetas)
    need = material.c0 * (1.0 + np.maximum(thetas, 0.0) ** (1.0 / 3.0))
    gap = cv - need
    worst = int(np.argmin(gap))
    items["material.iii"] = ItemResult(
        estimate=float(gap.min()), bound=0.0,
        passed=bool(np.all(gap >= -1e-12)),
        detail=(f"worst margin at theta={thetas[worst]:.4g}: "
                f"C_V={cv[worst]:.4g} vs required {need[worst]:.4g}"))

    M, M1, _ = estimate_inversion_constants(density, material, r, w_r)

    return HypothesisReport(items=items, psi0=psi0, delta=delta,
                            A_star=A_star, M=M, M1=M1,
                            sampling=sp.describe())
