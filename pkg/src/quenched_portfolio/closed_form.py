"""Extremal portfolios under the budget and risk constraints, in closed form.

Maximizing (or minimizing) the expected return ``r.w`` subject to

    e.w = N                 (budget)
    w.J.w / 2 = N tau eps0  (risk, tau >= 1, eps0 = 1/(2 g0))

gives, with ``u = J^{-1}(r - R1 e)``,

    w_pm = (J^{-1} e  pm  sqrt((tau-1)/V) u) / g0
    R_pm = R1 pm sqrt(V (tau-1))

``u`` is orthogonal to ``e``, so the risk budget above eps0 is spent entirely
along ``u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateReturnsError, InfeasibleRiskError, InternalError
from .model import RiskMatrix
from .moments import MomentSet

V_RTOL = 1e-10


@dataclass(frozen=True)
class PortfolioSolution:
    w_plus: np.ndarray
    w_minus: np.ndarray
    r_plus: float
    r_minus: float
    theta_plus: Optional[float]  # None at tau == 1, where the multiplier diverges
    theta_minus: Optional[float]
    k_plus: Optional[float]
    k_minus: Optional[float]
    tau: float
    eps: float

    @property
    def n_assets(self) -> int:
        return self.w_plus.size

    def to_dict(self) -> dict:
        return {
            "w_plus": [float(x) for x in self.w_plus],
            "w_minus": [float(x) for x in self.w_minus],
            "R_plus": self.r_plus,
            "R_minus": self.r_minus,
            "theta_plus": self.theta_plus,
            "theta_minus": self.theta_minus,
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "tau": self.tau,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PortfolioSolution":
        return cls(
            w_plus=np.array(data["w_plus"], dtype=np.float64),
            w_minus=np.array(data["w_minus"], dtype=np.float64),
            r_plus=data["R_plus"], r_minus=data["R_minus"],
            theta_plus=data["theta_plus"], theta_minus=data["theta_minus"],
            k_plus=data["k_plus"], k_minus=data["k_minus"],
            tau=data["tau"], eps=data["eps"],
        )


@dataclass(frozen=True)
class GeometryStats:
    """Concentrations q_w+/q_w-, overlap c, mean square difference Delta, correlation rho."""

    q_w_plus: float
    q_w_minus: float
    overlap_c: float
    delta: float
    rho: float

    def to_dict(self) -> dict:
        return {
            "q_w_plus": self.q_w_plus,
            "q_w_minus": self.q_w_minus,
            "c": self.overlap_c,
            "Delta": self.delta,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryStats":
        return cls(
            q_w_plus=data["q_w_plus"], q_w_minus=data["q_w_minus"],
            overlap_c=data["c"], delta=data["Delta"], rho=data["rho"],
        )


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if math.isnan(tau) or tau < 1.0:
        raise InfeasibleRiskError(
            f"risk tolerance tau={tau} is below 1: no portfolio has risk under eps0"
        )
    return tau


def _check_spread(moments: MomentSet) -> None:
    if not moments.v_big > V_RTOL * abs(moments.g2):
        raise DegenerateReturnsError(
            f"return spread V={moments.v_big:g} is numerically zero; "
            "the extremal direction is undefined"
        )


def solve_portfolio(
    moments: MomentSet, risk: RiskMatrix, means: np.ndarray, tau: float
) -> PortfolioSolution:
    """Maximal- and minimal-return portfolios at risk ``tau * eps0`` per asset."""
    tau = _check_tau(tau)
    if tau > 1.0:
        _check_spread(moments)
    means = np.asarray(means, dtype=np.float64).reshape(-1)
    if moments.solves is not None and moments.solves[0].size == means.size:
        y, z = moments.solves
    else:
        sol = risk.solve(np.column_stack([np.ones(means.size), means]))
        y, z = sol[:, 0], sol[:, 1]

    eps = tau * moments.eps0
    base = y / moments.g0
    if tau == 1.0:
        return PortfolioSolution(
            w_plus=base, w_minus=base.copy(),
            r_plus=moments.r1, r_minus=moments.r1,
            theta_plus=None, theta_minus=None, k_plus=None, k_minus=None,
            tau=tau, eps=eps,
        )

    u = z - moments.r1 * y
    step = math.sqrt((tau - 1.0) / moments.v_big) / moments.g0
    spread = math.sqrt(moments.v_big * (tau - 1.0))
    theta = moments.g0 * math.sqrt(moments.v_big / (tau - 1.0))
    return PortfolioSolution(
        w_plus=base + step * u,
        w_minus=base - step * u,
        r_plus=moments.r1 + spread,
        r_minus=moments.r1 - spread,
        theta_plus=theta,
        theta_minus=-theta,
        k_plus=theta / moments.g0 - moments.r1,
        k_minus=-theta / moments.g0 - moments.r1,
        tau=tau,
        eps=eps,
    )


def geometry_statistics(solution: PortfolioSolution) -> GeometryStats:
    """Geometry of (w+, w-) computed directly from the vectors."""
    wp, wm = solution.w_plus, solution.w_minus
    n = wp.size
    pp, mm, pm = float(wp @ wp), float(wm @ wm), float(wp @ wm)
    if not (pp > 0 and mm > 0):
        raise InternalError("zero-norm portfolio cannot satisfy the budget constraint")
    diff = wp - wm
    rho = pm / math.sqrt(pp * mm)
    return GeometryStats(
        q_w_plus=pp / n,
        q_w_minus=mm / n,
        overlap_c=pm / n,
        delta=float(diff @ diff) / n,
        rho=min(1.0, max(-1.0, rho)),
    )


def closed_form_statistics(moments: MomentSet, tau: float) -> GeometryStats:
    """Geometry of (w+, w-) from the six moments alone."""
    tau = _check_tau(tau)
    m = moments
    if tau == 1.0:
        q = m.f0 / m.g0**2
        return GeometryStats(q_w_plus=q, q_w_minus=q, overlap_c=q, delta=0.0, rho=1.0)
    _check_spread(m)

    scale = m.f0 * (tau - 1.0) / (m.g0**2 * m.v_big)
    shift = m.f1 / m.f0 - m.g1 / m.g0
    b = math.sqrt(m.v_big / (tau - 1.0))
    a_term = m.v_f + shift**2 - b * b
    return GeometryStats(
        q_w_plus=scale * (m.v_f + (shift + b) ** 2),
        q_w_minus=scale * (m.v_f + (shift - b) ** 2),
        overlap_c=-scale * a_term,
        delta=4.0 * scale * (m.v_f + shift**2),
        rho=-a_term / math.sqrt(a_term**2 + 4.0 * b * b * m.v_f),
    )


@dataclass(frozen=True)
class FrontierCurve:
    points: list[tuple[float, float]]
    r1: float
    v_big: float
    eps0: float

    def to_csv(self, path: str | Path) -> None:
        lines = [
            f"# R1={self.r1!r},V={self.v_big!r},eps0={self.eps0!r}",
            "R,eps",
        ]
        lines += [f"{r!r},{e!r}" for r, e in self.points]
        Path(path).write_text("\n".join(lines) + "\n")


def frontier_risk(moments: MomentSet, r: np.ndarray | float) -> np.ndarray | float:
    """Minimal risk per asset that admits expected return ``r`` per asset."""
    return (1.0 + (np.asarray(r) - moments.r1) ** 2 / moments.v_big) / (2.0 * moments.g0)


def frontier(moments: MomentSet, r_min: float, r_max: float, n_points: int) -> FrontierCurve:
    """Sample the efficient-frontier parabola on ``n_points`` equally spaced returns.

    The vertex (R1, eps0) is inserted when it falls strictly inside the range
    and is not already a grid point.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not r_max > r_min:
        raise ValueError("r_max must exceed r_min")
    if not moments.v_big > 0:
        raise DegenerateReturnsError("frontier undefined when V <= 0")
    grid = np.linspace(r_min, r_max, n_points)
    if r_min < moments.r1 < r_max and moments.r1 not in grid:
        grid = np.sort(np.append(grid, moments.r1))
    eps = frontier_risk(moments, grid)
    return FrontierCurve(
        points=[(float(r), float(e)) for r, e in zip(grid, eps)],
        r1=moments.r1,
        v_big=moments.v_big,
        eps0=moments.eps0,
    )
