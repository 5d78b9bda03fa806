"""Quadratic forms of the inverse risk matrix.

With ``y = J^{-1} e`` and ``z = J^{-1} r`` from one Cholesky factorization:

    g0 = e.y/N   g1 = r.y/N   g2 = r.z/N
    f0 = y.y/N   f1 = y.z/N   f2 = z.z/N

so the ``J^{-2}`` forms never need a second solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .model import RiskMatrix

FIELD_NAMES = ("g0", "g1", "g2", "f0", "f1", "f2", "R1", "V", "Vf", "eps0")


@dataclass(frozen=True)
class MomentSet:
    g0: float
    g1: float
    g2: float
    f0: float
    f1: float
    f2: float
    r1: float
    v_big: float
    v_f: float
    eps0: float
    # (y, z) = (J^-1 e, J^-1 r), kept so portfolio construction needs no new factorization
    solves: Optional[tuple[np.ndarray, np.ndarray]] = field(
        default=None, repr=False, compare=False
    )

    @classmethod
    def from_raw(cls, g0, g1, g2, f0, f1, f2, solves=None) -> "MomentSet":
        g0, g1, g2, f0, f1, f2 = (float(x) for x in (g0, g1, g2, f0, f1, f2))
        r1 = g1 / g0
        rf = f1 / f0
        return cls(
            g0=g0, g1=g1, g2=g2, f0=f0, f1=f1, f2=f2,
            r1=r1,
            v_big=g2 / g0 - r1 * r1,
            v_f=f2 / f0 - rf * rf,
            eps0=1.0 / (2.0 * g0),
            solves=solves,
        )

    def raw(self) -> np.ndarray:
        return np.array([self.g0, self.g1, self.g2, self.f0, self.f1, self.f2])

    def to_dict(self) -> dict:
        return dict(zip(FIELD_NAMES, (
            self.g0, self.g1, self.g2, self.f0, self.f1, self.f2,
            self.r1, self.v_big, self.v_f, self.eps0,
        )))

    @classmethod
    def from_dict(cls, data: dict) -> "MomentSet":
        return cls(
            g0=data["g0"], g1=data["g1"], g2=data["g2"],
            f0=data["f0"], f1=data["f1"], f2=data["f2"],
            r1=data["R1"], v_big=data["V"], v_f=data["Vf"], eps0=data["eps0"],
        )


def compute_moments(risk: RiskMatrix, means: np.ndarray) -> MomentSet:
    """Empirical moments g0..f2 and derived R1, V, Vf, eps0 for one risk matrix.

    Raises SingularMatrixError when J is not numerically positive definite.
    """
    means = np.asarray(means, dtype=np.float64).reshape(-1)
    n = risk.n_assets
    if means.size != n:
        raise ValueError(f"expected {n} means, got {means.size}")
    sol = risk.solve(np.column_stack([np.ones(n), means]))
    y = np.ascontiguousarray(sol[:, 0])
    z = np.ascontiguousarray(sol[:, 1])
    return MomentSet.from_raw(
        y.sum() / n,
        means @ y / n,
        means @ z / n,
        y @ y / n,
        y @ z / n,
        z @ z / n,
        solves=(y, z),
    )


def batch_raw_moments(js: np.ndarray, means: np.ndarray) -> np.ndarray:
    """(T, 6) raw moments for a stack of risk matrices; NaN rows mark singular ones."""
    return _kernels.batch_moments(js, means)
