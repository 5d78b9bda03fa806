"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 50 100 200 400] [--trials 100] [--repeat 3] [--raw]

Times one Cholesky factor + two-column solve, and the batched per-trial moment
computation used by convergence sweeps, on Wishart-type risk matrices with
alpha = 2. Reports the best of ``--repeat`` runs after a warm-up call (which
absorbs JIT compilation) and the max relative difference between backends.
``--raw`` disables the size crossover so the numba loops run at every N.
"""
import argparse
import time

import numpy as np

from quenched_portfolio import _kernels
from quenched_portfolio.model import gram


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--raw", action="store_true", help="numba loops at every size")
    args = ap.parse_args()
    if args.raw:
        _kernels.NUMBA_MAX_N = 10**9

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"threads: {_kernels.thread_cap()}")
    print(f"{'N':>5} {'kernel':<14} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max rel diff':>13}")
    for n in args.sizes:
        means = rng.normal(1.0, 0.5, n)
        js = np.stack([gram(rng.standard_normal((n, 2 * n))) for _ in range(args.trials)])
        rhs = np.column_stack([np.ones(n), means])

        results = {}
        for name in ("numpy", "numba"):
            _kernels.set_backend(name)
            single = lambda: _kernels.cho_solve(_kernels.cholesky(js[0]), rhs)
            batch = lambda: _kernels.batch_moments(js, means)
            results[name] = (
                best_time(single, args.repeat), single(),
                best_time(batch, args.repeat), batch(),
            )
        t_np1, x_np, t_np2, b_np = results["numpy"]
        t_nb1, x_nb, t_nb2, b_nb = results["numba"]
        d1 = np.max(np.abs(x_np - x_nb) / np.abs(x_np))
        d2 = np.max(np.abs(b_np - b_nb) / np.abs(b_np))
        print(f"{n:>5} {'factor+solve':<14} {t_np1 * 1e3:>11.3f} {t_nb1 * 1e3:>11.3f} {t_np1 / t_nb1:>8.2f} {d1:>13.1e}")
        print(f"{n:>5} {f'batch x{args.trials}':<14} {t_np2 * 1e3:>11.3f} {t_nb2 * 1e3:>11.3f} {t_np2 / t_nb2:>8.2f} {d2:>13.1e}")


if __name__ == "__main__":
    main()
