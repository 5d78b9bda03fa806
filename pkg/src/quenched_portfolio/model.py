"""Investment universe, synthetic return histories and the risk matrix.

The risk matrix is the scaled Gram matrix of the modified (mean-subtracted)
return rates,

    J_ij = (1/N) sum_mu x_{i mu} x_{j mu},     x_{i mu} = xbar_{i mu} - r_i,

for N assets observed over p periods. ``J`` is invertible (generically) only
when ``p > N``; ``alpha = p / N`` is the period-to-asset ratio.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .errors import ConfigError, RegularityError

FAMILIES = ("gaussian", "uniform", "two-point")

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class AssetParameters:
    """True per-asset mean returns ``means`` (r_i) and variances ``variances`` (v_i)."""

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64).reshape(-1)
        variances = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if means.shape != variances.shape:
            raise ConfigError(
                f"means ({means.size}) and variances ({variances.size}) differ in length"
            )
        if means.size < 2:
            raise ConfigError("need at least 2 assets")
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(variances)):
            raise ConfigError("means and variances must be finite")
        if np.any(variances <= 0):
            raise ConfigError("all variances must be positive")
        means.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def n_assets(self) -> int:
        return self.means.size

    @classmethod
    def uniform(cls, n_assets: int, mean: float = 0.0, variance: float = 1.0) -> "AssetParameters":
        return cls(np.full(n_assets, mean), np.full(n_assets, variance))

    @classmethod
    def from_dict(cls, data: dict) -> "AssetParameters":
        try:
            assets = data["assets"]
            means = [float(a["r"]) for a in assets]
            variances = [float(a["v"]) for a in assets]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(
                'asset parameters must look like {"assets": [{"r": .., "v": ..}, ...]}'
            ) from exc
        return cls(np.array(means), np.array(variances))

    def to_dict(self) -> dict:
        return {
            "assets": [
                {"r": float(r), "v": float(v)} for r, v in zip(self.means, self.variances)
            ]
        }


def load_params(path: str | Path) -> AssetParameters:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return AssetParameters.from_dict(data)


def save_params(params: AssetParameters, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ReturnSample:
    """One realization of the N x p return table.

    ``modified`` is ``raw - means[:, None]`` unless the sample was built with
    ``subtract_sample_mean=True`` (exploratory use only).
    """

    raw: np.ndarray
    modified: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.raw.shape[0]

    @property
    def n_periods(self) -> int:
        return self.raw.shape[1]

    @property
    def alpha(self) -> float:
        return self.n_periods / self.n_assets

    @classmethod
    def from_raw(
        cls,
        raw: np.ndarray,
        means: np.ndarray,
        *,
        subtract_sample_mean: bool = False,
    ) -> "ReturnSample":
        raw = np.asarray(raw, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64).reshape(-1)
        if raw.ndim != 2:
            raise ConfigError(f"return table must be 2-D, got shape {raw.shape}")
        n, p = raw.shape
        if means.size != n:
            raise ConfigError(f"return table has {n} assets but {means.size} means were given")
        if p <= n:
            raise RegularityError(
                f"need more periods than assets (p > N) for a regular risk matrix; got p={p}, N={n}"
            )
        center = raw.mean(axis=1) if subtract_sample_mean else means
        modified = raw - center[:, None]
        raw.setflags(write=False)
        modified.setflags(write=False)
        return cls(raw, modified)


def make_rng(seed: Seed) -> np.random.Generator:
    """Counter-based Philox generator keyed by an int or a tuple of ints.

    Tuples give independent streams, e.g. ``(base_seed, n_idx, alpha_idx, trial)``.
    """
    words = (seed,) if np.isscalar(seed) else tuple(seed)
    for w in words:
        if not (isinstance(w, (int, np.integer)) and 0 <= int(w) < 2**64):
            raise ConfigError(f"seed words must be unsigned 64-bit integers, got {w!r}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(w) for w in words])))


def _standard_draws(rng: np.random.Generator, family: str, shape: tuple[int, int]) -> np.ndarray:
    # zero mean, unit variance
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), shape)
    if family == "two-point":
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    raise ConfigError(f"unknown distribution family {family!r}; choose from {FAMILIES}")


def generate_returns(
    params: AssetParameters,
    n_periods: int,
    seed: Seed,
    family: str = "gaussian",
) -> ReturnSample:
    """Draw an independent N x p return table with mean r_i and variance v_i per asset."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown distribution family {family!r}; choose from {FAMILIES}")
    if n_periods <= params.n_assets:
        raise RegularityError(
            f"need more periods than assets (p > N); got p={n_periods}, N={params.n_assets}"
        )
    rng = make_rng(seed)
    z = _standard_draws(rng, family, (params.n_assets, n_periods))
    raw = params.means[:, None] + np.sqrt(params.variances)[:, None] * z
    return ReturnSample.from_raw(raw, params.means)


@dataclass(frozen=True, eq=False)
class RiskMatrix:
    """Symmetric risk matrix ``J``; the Cholesky factor is computed once and cached."""

    j: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.j.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        """Lower Cholesky factor; raises SingularMatrixError if J is not positive definite."""
        return _kernels.cholesky(self.j)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return _kernels.cho_solve(self.factor, b)


def gram(x: np.ndarray) -> np.ndarray:
    """``x x^T / N`` for an N x p array, made exactly symmetric."""
    n = x.shape[0]
    g = (x @ x.T) / n
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def build_risk_matrix(sample: ReturnSample | np.ndarray) -> RiskMatrix:
    """Risk matrix from a ReturnSample, or directly from an N x p modified-return array.

    The array form skips the p > N check so that tiny hand-built cases work;
    singular matrices are reported later, when the factor is needed.
    """
    x = sample.modified if isinstance(sample, ReturnSample) else np.asarray(sample, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"modified returns must be 2-D, got shape {x.shape}")
    j = gram(x)
    j.setflags(write=False)
    return RiskMatrix(j)


def risk_from_matrix(j: np.ndarray) -> RiskMatrix:
    """Wrap an explicit symmetric matrix (used for analytic test instances)."""
    j = np.array(j, dtype=np.float64)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise ConfigError(f"risk matrix must be square, got shape {j.shape}")
    if not np.array_equal(j, j.T):
        raise ConfigError("risk matrix must be exactly symmetric")
    j.setflags(write=False)
    return RiskMatrix(j)


def read_returns_csv(path: str | Path) -> np.ndarray:
    """Raw N x p return table: one row per asset, ``#`` lines are comments."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            rows.append([float(tok) for tok in s.split(",")])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: non-numeric entry ({exc})") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(rows)


def write_returns_csv(raw: np.ndarray, path: str | Path) -> None:
    n, p = raw.shape
    header = "# asset," + ",".join(f"period_{k + 1}" for k in range(p))
    lines = [header] + [",".join(repr(float(x)) for x in row) for row in raw]
    Path(path).write_text("\n".join(lines) + "\n")
