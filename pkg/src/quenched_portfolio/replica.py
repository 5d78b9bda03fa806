"""Large-N (replica) predictions for the six inverse-risk-matrix moments.

For independent returns with per-asset mean r and variance v, and
``<f(r, v)>`` the average of f over assets, the moments concentrate on

    g0 = <1/v>   / (a-1)      f0 = <1/v> <1/v>    / (a-1)^3 + <1/v^2>    / (a-1)^2
    g1 = <r/v>   / (a-1)      f1 = <1/v> <r/v>    / (a-1)^3 + <r/v^2>    / (a-1)^2
    g2 = <r^2/v> / (a-1)      f2 = <1/v> <r^2/v>  / (a-1)^3 + <r^2/v^2>  / (a-1)^2

with ``a = p/N > 1``. The g's are the (k, theta) Hessian of phi(0) and the
f's the Hessian of phi'(0), where phi is the log-partition function of a
Gaussian integral with source ``k e + theta r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AsymptoticRegimeError
from .model import AssetParameters
from .moments import MomentSet


@dataclass(frozen=True)
class QuenchedAverages:
    """Asset averages of v^-1, v^-1 r, v^-1 r^2, v^-2, v^-2 r, v^-2 r^2 (and log v)."""

    m_v1: float
    m_v1r: float
    m_v1r2: float
    m_v2: float
    m_v2r: float
    m_v2r2: float
    m_logv: float = 0.0

    def source(self, k: float, theta: float) -> float:
        """<(k + theta r)^2 / v>"""
        return k * k * self.m_v1 + 2.0 * k * theta * self.m_v1r + theta * theta * self.m_v1r2

    def source2(self, k: float, theta: float) -> float:
        """<(k + theta r)^2 / v^2>"""
        return k * k * self.m_v2 + 2.0 * k * theta * self.m_v2r + theta * theta * self.m_v2r2


@dataclass(frozen=True)
class ReplicaPrediction:
    moments: MomentSet
    chi_s: float
    q_s: float
    chi_tilde_s: float
    q_tilde_s: float
    alpha: float

    def to_dict(self) -> dict:
        out = self.moments.to_dict()
        out.update(
            chi_s=self.chi_s,
            q_s=self.q_s,
            chi_tilde_s=self.chi_tilde_s,
            q_tilde_s=self.q_tilde_s,
            alpha=self.alpha,
        )
        return out


def quenched_averages(params: AssetParameters) -> QuenchedAverages:
    r, v = params.means, params.variances
    inv = 1.0 / v
    inv2 = inv * inv
    return QuenchedAverages(
        m_v1=float(np.mean(inv)),
        m_v1r=float(np.mean(inv * r)),
        m_v1r2=float(np.mean(inv * r * r)),
        m_v2=float(np.mean(inv2)),
        m_v2r=float(np.mean(inv2 * r)),
        m_v2r2=float(np.mean(inv2 * r * r)),
        m_logv=float(np.mean(np.log(v))),
    )


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 1.0:
        raise AsymptoticRegimeError(
            f"alpha = p/N must exceed 1 for the large-N formulas, got {alpha}"
        )
    return alpha


def replica_moments(avgs: QuenchedAverages, alpha: float) -> MomentSet:
    a1 = _check_alpha(alpha) - 1.0
    c3 = avgs.m_v1 / a1**3
    c2 = 1.0 / a1**2
    return MomentSet.from_raw(
        avgs.m_v1 / a1,
        avgs.m_v1r / a1,
        avgs.m_v1r2 / a1,
        c3 * avgs.m_v1 + c2 * avgs.m_v2,
        c3 * avgs.m_v1r + c2 * avgs.m_v2r,
        c3 * avgs.m_v1r2 + c2 * avgs.m_v2r2,
    )


def replica_order_parameters(
    avgs: QuenchedAverages, alpha: float, k: float, theta: float
) -> tuple[float, float, float, float]:
    """Saddle-point values ``(chi_s, q_s, chi_tilde_s, q_tilde_s)``."""
    alpha = _check_alpha(alpha)
    a1 = alpha - 1.0
    src = avgs.source(k, theta)
    return 1.0 / a1, alpha * src / a1**3, a1, src / a1


def replica_phi(
    avgs: QuenchedAverages, alpha: float, k: float, theta: float, mean_log_v: float
) -> tuple[float, float]:
    """``(phi(0), phi'(0))`` at the saddle point, as functions of the source (k, theta)."""
    alpha = _check_alpha(alpha)
    a1 = alpha - 1.0
    src = avgs.source(k, theta)
    phi0 = (
        -0.5 * alpha * math.log(alpha)
        + 0.5 * (alpha + 1.0) * math.log(a1)
        + 0.5
        - 0.5 * mean_log_v
        + src / (2.0 * a1)
    )
    dphi0 = (
        avgs.m_v1 / (2.0 * a1)
        + avgs.m_v1 * src / (2.0 * a1**3)
        + avgs.source2(k, theta) / (2.0 * a1**2)
    )
    return phi0, dphi0


def replica_prediction(
    avgs: QuenchedAverages, alpha: float, k: float = 0.0, theta: float = 0.0
) -> ReplicaPrediction:
    """Moments plus order parameters evaluated at source (k, theta)."""
    chi, q, chi_t, q_t = replica_order_parameters(avgs, alpha, k, theta)
    return ReplicaPrediction(
        moments=replica_moments(avgs, alpha),
        chi_s=chi, q_s=q, chi_tilde_s=chi_t, q_tilde_s=q_t, alpha=float(alpha),
    )
