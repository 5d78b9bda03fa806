"""Command-line interface.

Exit codes: 0 success, 1 invalid input or flags, 2 computation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .closed_form import (
    closed_form_statistics,
    frontier,
    geometry_statistics,
    solve_portfolio,
)
from .errors import (
    AsymptoticRegimeError,
    ConfigError,
    DegenerateReturnsError,
    InfeasibleRiskError,
    PortfolioError,
    RegularityError,
)
from .experiments import SweepConfig, run_convergence
from .model import (
    FAMILIES,
    ReturnSample,
    build_risk_matrix,
    generate_returns,
    load_params,
    read_returns_csv,
    write_returns_csv,
)
from .moments import compute_moments
from .replica import quenched_averages, replica_prediction

VERIFY_RTOL = 1e-8

# errors that mean "bad input" rather than "the computation failed"
_INPUT_ERRORS = (ConfigError, RegularityError, InfeasibleRiskError, AsymptoticRegimeError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _dump_json(data: dict, path: str | Path) -> None:
    # float repr is the shortest string that round-trips a double
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def _load_sample(csv_path: str, params_path: str) -> tuple:
    params = load_params(params_path)
    raw = read_returns_csv(csv_path)
    if raw.shape[0] != params.n_assets:
        raise ConfigError(
            f"{csv_path} has {raw.shape[0]} asset rows but {params_path} lists {params.n_assets} assets"
        )
    return params, ReturnSample.from_raw(raw, params.means)


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1.0)


def cmd_generate(args) -> int:
    params = load_params(args.params)
    sample = generate_returns(params, args.periods, args.seed, args.family)
    write_returns_csv(sample.raw, args.out)
    print(f"N={sample.n_assets} p={sample.n_periods} alpha={sample.alpha!r}")
    return 0


def cmd_optimize(args) -> int:
    if not args.tau >= 1.0:
        raise InfeasibleRiskError(f"--tau must be >= 1, got {args.tau}")
    params, sample = _load_sample(args.returns, args.params)
    risk = build_risk_matrix(sample)
    moments = compute_moments(risk, params.means)
    solution = solve_portfolio(moments, risk, params.means, args.tau)
    vec = geometry_statistics(solution)
    closed = closed_form_statistics(moments, args.tau)
    if args.verify:
        bad = [
            k for k, a in vec.to_dict().items()
            if not _close(a, closed.to_dict()[k], VERIFY_RTOL)
        ]
        if bad:
            raise PortfolioError(f"vector and closed-form statistics disagree on {bad}")
    _dump_json(
        {
            "N": sample.n_assets,
            "p": sample.n_periods,
            "alpha": sample.alpha,
            "moments": moments.to_dict(),
            "solution": solution.to_dict(),
            "geometry": vec.to_dict(),
            "geometry_closed_form": closed.to_dict(),
        },
        args.out,
    )
    print(f"R_plus={solution.r_plus!r} R_minus={solution.r_minus!r} "
          f"Delta={vec.delta!r} rho={vec.rho!r}")
    return 0


def cmd_frontier(args) -> int:
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    if not args.rmax > args.rmin:
        raise ConfigError("--rmax must exceed --rmin")
    params, sample = _load_sample(args.returns, args.params)
    risk = build_risk_matrix(sample)
    moments = compute_moments(risk, params.means)
    curve = frontier(moments, args.rmin, args.rmax, args.points)
    curve.to_csv(args.out)
    print(f"R1={curve.r1!r} V={curve.v_big!r} eps0={curve.eps0!r} points={len(curve.points)}")
    return 0


def cmd_replica(args) -> int:
    params = load_params(args.params)
    pred = replica_prediction(quenched_averages(params), args.alpha, args.k, args.theta)
    _dump_json(pred.to_dict(), args.out)
    m = pred.moments
    print(f"g0={m.g0!r} f0={m.f0!r} R1={m.r1!r} V={m.v_big!r}")
    return 0


def cmd_sweep(args) -> int:
    try:
        data = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    config = SweepConfig.from_dict(data)
    report = run_convergence(config)
    jpath, cpath = report.write(args.out)
    worst = max(report.rows, key=lambda r: r.rel_error)
    print(f"wrote {jpath} and {cpath}; worst rel_error {worst.rel_error:.4g} ({worst.quantity}, N={worst.n})")
    return 0


def _finite_float(s: str) -> float:
    x = float(s)
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"{s!r} is not a finite number")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quenched-portfolio", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="draw a synthetic return table")
    p.add_argument("params", help="asset-parameter JSON")
    p.add_argument("--periods", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("optimize", help="extremal portfolios and their geometry")
    p.add_argument("returns", help="return-table CSV")
    p.add_argument("params", help="asset-parameter JSON")
    p.add_argument("--tau", type=_finite_float, required=True)
    p.add_argument("--out", required=True, help="output JSON")
    p.add_argument("--verify", action="store_true",
                   help="fail unless vector and closed-form statistics agree to 1e-8")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("frontier", help="efficient-frontier parabola as CSV")
    p.add_argument("returns")
    p.add_argument("params")
    p.add_argument("--rmin", type=_finite_float, required=True)
    p.add_argument("--rmax", type=_finite_float, required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("replica", help="large-N moment predictions")
    p.add_argument("params")
    p.add_argument("--alpha", type=_finite_float, required=True)
    p.add_argument("--k", type=_finite_float, default=0.0, help="source k for order parameters")
    p.add_argument("--theta", type=_finite_float, default=0.0,
                   help="source theta for order parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replica)

    p = sub.add_parser("sweep", help="Monte Carlo convergence study")
    p.add_argument("config", help="sweep-config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PortfolioError, ArithmeticError, OSError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2
