"""Monte Carlo convergence sweeps and independent numerical checks.

``run_convergence`` compares empirical moments (and, optionally, portfolio
statistics at given risk tolerances) against the large-N predictions.
``numeric_max_return_oracle`` and ``feasible_sampler`` never touch the
closed-form code; they exist to check it.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .closed_form import closed_form_statistics
from .errors import (
    ConfigError,
    InfeasibleRiskError,
    InternalError,
    OracleDivergenceError,
    SingularMatrixError,
)
from .model import FAMILIES, AssetParameters, RiskMatrix, generate_returns, gram, make_rng
from .moments import MomentSet
from .replica import quenched_averages, replica_moments

CONVERGENCE_RTOL = 0.05
MAX_SKIP_FRACTION = 0.05
MOMENT_NAMES = ("g0", "g1", "g2", "f0", "f1", "f2")
# bytes of stacked risk matrices handed to one batched kernel call
_CHUNK_BYTES = 64 * 2**20


@dataclass(frozen=True)
class AssetFamily:
    """Parametric universe: mean/variance patterns tiled to any number of assets."""

    mean_pattern: tuple[float, ...]
    variance_pattern: tuple[float, ...]

    def at(self, n_assets: int) -> AssetParameters:
        means = np.resize(np.asarray(self.mean_pattern, dtype=np.float64), n_assets)
        variances = np.resize(np.asarray(self.variance_pattern, dtype=np.float64), n_assets)
        return AssetParameters(means, variances)

    def to_dict(self) -> dict:
        return {"means": list(self.mean_pattern), "variances": list(self.variance_pattern)}


@dataclass(frozen=True)
class SweepConfig:
    params: Union[AssetParameters, AssetFamily]
    n_values: tuple[int, ...]
    alpha_values: tuple[float, ...]
    tau_values: tuple[float, ...] = ()
    trials: int = 100
    base_seed: int = 0
    family: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "alpha_values", tuple(float(a) for a in self.alpha_values))
        object.__setattr__(self, "tau_values", tuple(float(t) for t in self.tau_values))
        if not self.n_values or not self.alpha_values:
            raise ConfigError("n_values and alpha_values must be non-empty")
        if any(n < 2 for n in self.n_values):
            raise ConfigError("every N must be >= 2")
        if any(not a > 1.0 for a in self.alpha_values):
            raise ConfigError("every alpha must exceed 1")
        if any(not t >= 1.0 for t in self.tau_values):
            raise ConfigError("every tau must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if isinstance(self.params, AssetParameters):
            bad = [n for n in self.n_values if n != self.params.n_assets]
            if bad:
                raise ConfigError(
                    f"explicit asset list has N={self.params.n_assets}; cannot sweep N={bad}"
                )
        for n in self.n_values:
            for a in self.alpha_values:
                if periods_for(n, a) <= n:
                    raise ConfigError(f"alpha={a} at N={n} rounds to p <= N")

    def params_at(self, n_assets: int) -> AssetParameters:
        if isinstance(self.params, AssetFamily):
            return self.params.at(n_assets)
        return self.params

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        try:
            raw = data["params"]
            if "assets" in raw:
                params = AssetParameters.from_dict(raw)
            else:
                params = AssetFamily(
                    tuple(float(x) for x in raw["means"]),
                    tuple(float(x) for x in raw["variances"]),
                )
            return cls(
                params=params,
                n_values=data["n_values"],
                alpha_values=data["alpha_values"],
                tau_values=data.get("tau_values", ()),
                trials=int(data.get("trials", 100)),
                base_seed=int(data.get("base_seed", 0)),
                family=data.get("family", "gaussian"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed sweep config: {exc!r}") from exc

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "n_values": list(self.n_values),
            "alpha_values": list(self.alpha_values),
            "tau_values": list(self.tau_values),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "family": self.family,
        }


def periods_for(n_assets: int, alpha: float) -> int:
    return int(round(alpha * n_assets))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    alpha: float
    quantity: str
    replica: float
    mean: float
    stderr: float
    rel_error: float
    median_rel_error: float

    def to_dict(self) -> dict:
        return {
            "N": self.n, "alpha": self.alpha, "quantity": self.quantity,
            "replica": self.replica, "mean": self.mean, "stderr": self.stderr,
            "rel_error": self.rel_error, "median_rel_error": self.median_rel_error,
        }


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    metadata: dict = field(default_factory=dict)

    def row(self, n: int, alpha: float, quantity: str) -> ConvergenceRow:
        for r in self.rows:
            if r.n == n and r.alpha == alpha and r.quantity == quantity:
                return r
        raise KeyError((n, alpha, quantity))

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={json.dumps(self.metadata[key], sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "alpha", "quantity", "replica", "mean", "stderr", "rel_error"])
        for r in self.rows:
            w.writerow([r.n, repr(r.alpha), r.quantity, repr(r.replica), repr(r.mean),
                        repr(r.stderr), repr(r.rel_error)])
        return buf.getvalue()

    def write(self, out_dir: str | Path, stem: str = "convergence") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath, cpath = out / f"{stem}.json", out / f"{stem}.csv"
        jpath.write_text(self.to_json())
        cpath.write_text(self.to_csv())
        return jpath, cpath


def _sample_moments(config: SweepConfig, i_n: int, i_a: int) -> tuple[np.ndarray, int]:
    """(trials_kept, 6) raw moments for one (N, alpha) cell and the skip count."""
    n = config.n_values[i_n]
    p = periods_for(n, config.alpha_values[i_a])
    params = config.params_at(n)
    chunk = max(1, min(config.trials, _CHUNK_BYTES // (8 * n * n)))
    out = []
    for start in range(0, config.trials, chunk):
        stop = min(config.trials, start + chunk)
        js = np.empty((stop - start, n, n))
        for t in range(start, stop):
            sample = generate_returns(
                params, p, (config.base_seed, i_n, i_a, t), config.family
            )
            js[t - start] = gram(sample.modified)
        out.append(_kernels.batch_moments(js, params.means))
    raw = np.concatenate(out)
    ok = np.all(np.isfinite(raw), axis=1)
    return raw[ok], int((~ok).sum())


def _summarize(values: np.ndarray, target: float) -> tuple[float, float, float, float]:
    target = float(target)
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    scale = abs(target) if target != 0 else 1.0
    rel = abs(mean - target) / scale
    med = float(np.median(np.abs(values - target))) / scale
    return mean, stderr, rel, med


def _quantities(ms: MomentSet, taus: Sequence[float]) -> dict[str, float]:
    out = dict(zip(MOMENT_NAMES, ms.raw().tolist()))
    out["R1"] = ms.r1
    out["V"] = ms.v_big
    for tau in taus:
        geo = closed_form_statistics(ms, tau)
        spread = math.sqrt(ms.v_big * (tau - 1.0))
        out[f"R_plus[tau={tau:g}]"] = ms.r1 + spread
        out[f"Delta[tau={tau:g}]"] = geo.delta
        out[f"rho[tau={tau:g}]"] = geo.rho
    return out


def run_convergence(config: SweepConfig) -> ConvergenceReport:
    """Empirical-vs-replica comparison over every (N, alpha) in the sweep."""
    rows: list[ConvergenceRow] = []
    skipped: dict[str, int] = {}
    for i_n, n in enumerate(config.n_values):
        params = config.params_at(n)
        avgs = quenched_averages(params)
        for i_a, alpha in enumerate(config.alpha_values):
            raw, n_skip = _sample_moments(config, i_n, i_a)
            skipped[f"N={n},alpha={alpha:g}"] = n_skip
            if n_skip > MAX_SKIP_FRACTION * config.trials:
                raise SingularMatrixError(
                    f"{n_skip}/{config.trials} singular risk matrices at N={n}, alpha={alpha:g} "
                    f"(limit {MAX_SKIP_FRACTION:.0%})"
                )
            alpha_eff = periods_for(n, alpha) / n
            predicted = _quantities(replica_moments(avgs, alpha_eff), config.tau_values)
            per_trial = [_quantities(MomentSet.from_raw(*m), config.tau_values) for m in raw]
            for name in sorted(predicted):
                vals = np.array([q[name] for q in per_trial])
                mean, se, rel, med = _summarize(vals, predicted[name])
                rows.append(ConvergenceRow(n, alpha, name, float(predicted[name]), mean, se, rel, med))
    rows.sort(key=lambda r: (r.n, r.alpha, r.quantity))
    metadata = {
        "base_seed": config.base_seed,
        "trials": config.trials,
        "family": config.family,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "tolerance_rel": CONVERGENCE_RTOL,
        "skipped_trials": skipped,
        "config": config.to_dict(),
    }
    return ConvergenceReport(rows, metadata)


# ---------------------------------------------------------------------------
# independent checks


def _kkt_newton(j, r, eps, sign, max_iter, tol):
    n = r.size
    e = np.ones(n)
    y = np.linalg.solve(j, e)
    w_min = y * (n / y.sum())
    eps_min = 0.5 * (w_min @ j @ w_min) / n
    d = sign * (r - r.mean())
    djd = d @ j @ d
    if not djd > 0:
        raise OracleDivergenceError("mean returns are constant; no ascent direction")
    w = w_min + math.sqrt(max(2.0 * n * (eps - eps_min), 0.0) / djd) * d
    jw = j @ w
    (k, theta), *_ = np.linalg.lstsq(np.column_stack([e, -jw]), -r, rcond=None)

    def residual(w, k, theta):
        jw = j @ w
        f1 = r + k * e - theta * jw
        f2 = e @ w - n
        f3 = 0.5 * (w @ jw) - n * eps
        scale1 = np.max(np.abs(r)) + abs(k) + abs(theta) * np.max(np.abs(jw))
        scaled = max(np.max(np.abs(f1)) / scale1, abs(f2) / n, abs(f3) / (n * eps))
        return np.concatenate([f1, [f2, f3]]), scaled

    f, err = residual(w, k, theta)
    for _ in range(max_iter):
        if err < tol:
            return w, k, theta
        jw = j @ w
        jac = np.zeros((n + 2, n + 2))
        jac[:n, :n] = -theta * j
        jac[:n, n] = e
        jac[:n, n + 1] = -jw
        jac[n, :n] = e
        jac[n + 1, :n] = jw
        step = np.linalg.solve(jac, -f)
        t = 1.0
        merit = f @ f
        for _ in range(40):
            cand = (w + t * step[:n], k + t * step[n], theta + t * step[n + 1])
            f_new, err_new = residual(*cand)
            if f_new @ f_new < merit or err_new < tol:
                break
            t *= 0.5
        w, k, theta = cand
        f, err = f_new, err_new
    if err < tol:
        return w, k, theta
    raise OracleDivergenceError(f"KKT Newton did not converge in {max_iter} iterations (residual {err:.3g})")


def numeric_max_return_oracle(
    risk: RiskMatrix,
    means: np.ndarray,
    tau: float,
    *,
    maximize: bool = True,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Extremal-return portfolio by damped Newton on the full KKT system.

    Solves ``r + k e = theta J w``, ``e.w = N``, ``w.J.w/2 = N tau eps0`` in
    (w, k, theta) from feasible starts on both sides of the minimum-risk
    portfolio, and returns the stationary point with the highest (or, with
    ``maximize=False``, lowest) return per asset.
    """
    if not tau > 1.0:
        raise InfeasibleRiskError(f"oracle needs tau > 1, got {tau}")
    j = np.asarray(risk.j, dtype=np.float64)
    r = np.asarray(means, dtype=np.float64).reshape(-1)
    n = r.size
    y = np.linalg.solve(j, np.ones(n))
    eps = tau * 0.5 * n / y.sum()
    found = []
    for sign in (1.0, -1.0):
        try:
            w, _, _ = _kkt_newton(j, r, eps, sign, max_iter, tol)
        except (OracleDivergenceError, np.linalg.LinAlgError):
            continue
        found.append((r @ w / n, w))
    if not found:
        raise OracleDivergenceError("KKT Newton failed from both starting points")
    ret, w = max(found, key=lambda t: t[0]) if maximize else min(found, key=lambda t: t[0])
    return w, float(ret)


def feasible_sampler(
    risk: RiskMatrix,
    means: np.ndarray,
    tau: float,
    count: int,
    seed: int,
) -> np.ndarray:
    """``count`` random portfolios meeting the budget and risk constraints exactly.

    Each is the minimum-risk portfolio plus a random direction inside the
    budget hyperplane, scaled onto the risk ellipsoid. Returns a (count, N)
    array.
    """
    if tau < 1.0:
        raise InfeasibleRiskError(f"tau={tau} is below 1")
    if count < 0:
        raise ValueError("count must be >= 0")
    j = np.asarray(risk.j, dtype=np.float64)
    n = j.shape[0]
    if count == 0:
        return np.empty((0, n))
    y = np.linalg.solve(j, np.ones(n))
    w_min = y * (n / y.sum())
    eps_min = 0.5 * (w_min @ j @ w_min) / n
    extra = 2.0 * n * eps_min * (tau - 1.0)

    rng = make_rng(seed)
    d = rng.standard_normal((count, n))
    d -= d.mean(axis=1, keepdims=True)
    djd = np.einsum("ci,ij,cj->c", d, j, d)
    if not np.all(djd > 0):
        raise InternalError("degenerate sampling direction")
    t = np.sqrt(extra / djd)
    return w_min + t[:, None] * d
