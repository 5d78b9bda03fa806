"""Dense SPD kernels: Cholesky factorization, triangular solves, batched moments.

Two interchangeable backends live here. The numba backend compiles explicit
loops with ``@njit`` and runs batched trials in parallel with ``prange``; the
numpy backend delegates to LAPACK through numpy/scipy. The backend is chosen
once at import from the ``PRL_NUMBA`` environment variable (``0``/``false``/
``off`` forces numpy) and can be switched at runtime with :func:`set_backend`.
The compiled loops beat blocked LAPACK only for small matrices, so the numba
backend hands matrices larger than ``NUMBA_MAX_N`` to the numpy path.

Both backends share one contract: a pivot ``L_kk**2`` below
``PIVOT_RTOL * max(diag(J))`` marks the matrix singular.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, SingularMatrixError

PIVOT_RTOL = 1e-12
# crossover measured with benchmarks/bench_kernels.py (single thread)
NUMBA_MAX_N = 96

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # skip the system TBB probe, which warns on old TBB builds
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f

    prange = range


def _env_backend() -> str:
    flag = os.environ.get("PRL_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return "numpy"
    return "numba" if HAVE_NUMBA else "numpy"


_BACKEND = _env_backend()


def get_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` for subsequent kernel calls."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ConfigError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ConfigError("numba backend requested but numba is not installed")
    _BACKEND = name


def thread_cap() -> int:
    """Worker count from ``PRL_THREADS`` (absent or 0 means all cores)."""
    raw = os.environ.get("PRL_THREADS", "").strip()
    ncpu = os.cpu_count() or 1
    if not raw:
        return ncpu
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"PRL_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("PRL_THREADS must be >= 0")
    return ncpu if n == 0 else n


# ---------------------------------------------------------------------------
# numba backend


@njit(cache=True)
def _chol_nb(a, rtol):
    n = a.shape[0]
    L = np.zeros((n, n))
    dmax = 0.0
    for i in range(n):
        if a[i, i] > dmax:
            dmax = a[i, i]
    if not dmax > 0.0:
        return L, False
    tol = rtol * dmax
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if not s > tol:
                    return L, False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True)
def _cho_solve_nb(L, b):
    # b is (n, m); forward then backward substitution, row-contiguous access
    n, m = b.shape
    x = b.copy()
    for c in range(m):
        for i in range(n):
            s = x[i, c]
            for k in range(i):
                s -= L[i, k] * x[k, c]
            x[i, c] = s / L[i, i]
        for i in range(n - 1, -1, -1):
            x[i, c] = x[i, c] / L[i, i]
            xi = x[i, c]
            for k in range(i):
                x[k, c] -= L[i, k] * xi
    return x


@njit(cache=True)
def _raw_moments_nb(L, means):
    n = means.shape[0]
    rhs = np.empty((n, 2))
    for i in range(n):
        rhs[i, 0] = 1.0
        rhs[i, 1] = means[i]
    sol = _cho_solve_nb(L, rhs)
    out = np.zeros(6)
    for i in range(n):
        y = sol[i, 0]
        z = sol[i, 1]
        out[0] += y
        out[1] += means[i] * y
        out[2] += means[i] * z
        out[3] += y * y
        out[4] += y * z
        out[5] += z * z
    for q in range(6):
        out[q] /= n
    return out


@njit(cache=True, parallel=True)
def _batch_moments_nb(js, means, rtol):
    t = js.shape[0]
    out = np.full((t, 6), np.nan)
    for s in prange(t):
        L, ok = _chol_nb(js[s], rtol)
        if ok:
            out[s, :] = _raw_moments_nb(L, means)
    return out


# ---------------------------------------------------------------------------
# numpy backend


def _chol_np(a: np.ndarray, rtol: float) -> tuple[np.ndarray, bool]:
    dmax = float(np.max(np.diag(a))) if a.size else 0.0
    if not dmax > 0.0:
        return np.zeros_like(a), False
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return np.zeros_like(a), False
    if not np.min(np.diag(L)) ** 2 > rtol * dmax:
        return L, False
    return L, True


def _cho_solve_np(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def _raw_moments_np(L: np.ndarray, means: np.ndarray) -> np.ndarray:
    n = means.shape[0]
    sol = _cho_solve_np(L, np.column_stack([np.ones(n), means]))
    y, z = sol[:, 0], sol[:, 1]
    return np.array(
        [y.sum(), means @ y, means @ z, y @ y, y @ z, z @ z]
    ) / n


def _batch_moments_np(js: np.ndarray, means: np.ndarray, rtol: float) -> np.ndarray:
    def one(j):
        L, ok = _chol_np(j, rtol)
        return _raw_moments_np(L, means) if ok else np.full(6, np.nan)

    workers = min(thread_cap(), len(js)) or 1
    if workers == 1:
        rows = [one(j) for j in js]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, js))
    return np.array(rows).reshape(len(js), 6)


# ---------------------------------------------------------------------------
# public dispatch


def _use_numba(n: int) -> bool:
    return _BACKEND == "numba" and n <= NUMBA_MAX_N


def cholesky(j: np.ndarray, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Lower Cholesky factor of ``j``; raises SingularMatrixError on a small pivot."""
    a = np.ascontiguousarray(j, dtype=np.float64)
    if _use_numba(a.shape[0]):
        L, ok = _chol_nb(a, rtol)
    else:
        L, ok = _chol_np(a, rtol)
    if not ok:
        raise SingularMatrixError(
            "risk matrix is not positive definite "
            f"(pivot below {rtol:g} x max diagonal); need p > N and a non-degenerate sample"
        )
    return L


def cho_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) x = b`` for a vector or an (n, m) block of right-hand sides."""
    b = np.asarray(b, dtype=np.float64)
    vec = b.ndim == 1
    rhs = np.ascontiguousarray(b.reshape(-1, 1) if vec else b)
    if _use_numba(rhs.shape[0]):
        x = _cho_solve_nb(np.ascontiguousarray(L), rhs)
    else:
        x = _cho_solve_np(L, rhs)
    return x[:, 0] if vec else x


def batch_moments(js: np.ndarray, means: np.ndarray, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Raw moments (g0, g1, g2, f0, f1, f2) for a stack of risk matrices.

    Returns a (T, 6) array; rows for singular matrices are NaN.
    """
    js = np.ascontiguousarray(js, dtype=np.float64)
    means = np.ascontiguousarray(means, dtype=np.float64)
    if _use_numba(means.shape[0]):
        numba.set_num_threads(min(thread_cap(), numba.config.NUMBA_NUM_THREADS))
        return _batch_moments_nb(js, means, rtol)
    return _batch_moments_np(js, means, rtol)
