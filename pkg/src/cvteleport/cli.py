"""Command-line interface: point queries, CSV sweeps and verification suites.

Exit codes: 0 success, 1 a verification case failed, 2 usage error,
3 I/O error, 4 a convergence ladder hit its ceiling.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math
import os
import sys
import tempfile

from .analytic import capacity, channel_fidelity
from .channel import ChannelParams
from .errors import ConvergenceFailure, CVTeleportError, TailMassExceeded
from .fock import TruncationConfig
from .verify import (
    DEFAULT_DIM_MAX,
    ENTROPIC_TOL,
    STATE_TOL,
    SUITES,
    numeric_capacity,
    numeric_fidelity,
    run_suite,
    verify_capacity,
    verify_fidelity,
)

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONVERGENCE = 4


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    quantity: str
    nbar: float
    T_grid: tuple
    s_grid: tuple
    output_path: str
    include_numeric: bool = False
    dim: int | None = None
    seed: int | None = None


def parse_complex(text):
    """Parse ``a+bi`` style complex numbers (``1``, ``2i``, ``-1.5+0.5i``)."""
    if not text or any(ch.isspace() for ch in text) or "j" in text:
        raise UsageError(f"invalid complex number {text!r}")
    try:
        return complex(text.replace("i", "j"))
    except ValueError:
        raise UsageError(f"invalid complex number {text!r}") from None


def parse_grid(text):
    """Expand ``start:stop:step``; ``stop`` is included when the step lands on it."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like start:stop:step, got {text!r}") from None
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise UsageError(f"grid values must be finite: {text!r}")
    if step <= 0:
        raise UsageError(f"grid step must be > 0: {text!r}")
    if start > stop:
        raise UsageError(f"grid start must not exceed stop: {text!r}")
    span = (stop - start) / step
    count = math.floor(span + 1e-12)
    values = [start + k * step for k in range(count + 1)]
    if abs(span - round(span)) <= 1e-12 * max(1.0, abs(span)):
        values[-1] = stop
    return tuple(values)


def _fmt(x):
    return "nan" if x is None else f"{x:.12g}"


def _check_range(name, value, lo=None, hi=None, lo_open=False):
    if value is None:
        return
    if not math.isfinite(value):
        raise UsageError(f"--{name} must be finite")
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise UsageError(f"--{name} must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        raise UsageError(f"--{name} must be <= {hi}, got {value}")


def _channel_params(args):
    has_ts = args.T is not None or args.s is not None
    if args.nbar_s is not None:
        if has_ts:
            raise UsageError("give either --T and --s or --nbar-s, not both")
        _check_range("nbar-s", args.nbar_s, 0)
        return ChannelParams.from_noise(args.nbar_s)
    if args.T is None or args.s is None:
        raise UsageError("need --T and --s, or --nbar-s")
    _check_range("T", args.T, 0, 1)
    _check_range("s", args.s, 0)
    return ChannelParams.from_ts(args.T, args.s)


def _check_common(args):
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if getattr(args, "dim", None) is not None and args.dim < 2:
        raise UsageError("--dim must be >= 2")
    if getattr(args, "tol", None) is not None:
        _check_range("tol", args.tol, 0, lo_open=True)


def _numeric_cfg(dim, tol):
    return TruncationConfig(dim, tail_tol=min(1e-6, tol / 100))


def cmd_capacity(args, out):
    params = _channel_params(args)
    _check_range("nbar", args.nbar, 0)
    tol = args.tol or ENTROPIC_TOL
    value = capacity(args.nbar, params)
    fields = [("nbar", args.nbar), ("T", params.T), ("s", params.s),
              ("nbar_s", params.nbar_s), ("capacity_bits", value)]
    if args.numeric:
        if args.dim is None:
            numeric = verify_capacity(args.nbar, params, tol).cases[0].numeric
        else:
            numeric = numeric_capacity(args.nbar, params, _numeric_cfg(args.dim, tol))
        fields += [("numeric_bits", numeric), ("abs_error", abs(numeric - value))]
    print(" ".join(f"{k}={_fmt(v)}" for k, v in fields), file=out)
    return 0


def cmd_fidelity(args, out):
    params = _channel_params(args)
    alpha = parse_complex(args.alpha)
    value = channel_fidelity(params)
    fields = [("T", params.T), ("s", params.s), ("nbar_s", params.nbar_s), ("fidelity", value)]
    line = " ".join(f"{k}={_fmt(v)}" for k, v in fields)
    if args.numeric:
        tol = args.tol or STATE_TOL
        if args.dim is None:
            numeric = verify_fidelity(alpha, params, tol).cases[0].numeric
        else:
            numeric = numeric_fidelity(alpha, params, TruncationConfig(args.dim))
        line += f" alpha={args.alpha} numeric_fidelity={_fmt(numeric)} abs_error={_fmt(abs(numeric - value))}"
    print(line, file=out)
    return 0


def _sweep_row(task):
    spec, T, s = task
    params = ChannelParams.from_ts(T, s)
    if spec.quantity == "capacity":
        value = capacity(spec.nbar, params)
    else:
        value = channel_fidelity(params)
    row = [T, s, spec.nbar, params.nbar_s, value]
    if spec.include_numeric:
        if spec.quantity == "capacity":
            if spec.dim is None:
                numeric = verify_capacity(spec.nbar, params).cases[0].numeric
            else:
                numeric = numeric_capacity(spec.nbar, params, _numeric_cfg(spec.dim, ENTROPIC_TOL))
        else:
            alpha = math.sqrt(spec.nbar)
            cfg = (TruncationConfig.for_mean(spec.nbar + params.nbar_s) if spec.dim is None
                   else TruncationConfig(spec.dim))
            numeric = numeric_fidelity(alpha, params, cfg)
        row += [numeric, abs(numeric - value)]
    return ",".join(f"{v:.12g}" for v in row)


def run_sweep(spec, jobs=1):
    """Write the sweep CSV atomically; rows are T-major, then s."""
    tasks = [(spec, T, s) for T in spec.T_grid for s in spec.s_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    header = "T,s,nbar,nbar_s,value"
    if spec.include_numeric:
        header += ",numeric_value,abs_error"
    text = header + "\n" + "".join(r + "\n" for r in rows)
    _atomic_write(spec.output_path, text)
    return len(rows)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_sweep(args, out):
    _check_range("nbar", args.nbar, 0)
    T_grid = parse_grid(args.T_grid)
    s_grid = parse_grid(args.s_grid)
    if T_grid[0] < 0 or T_grid[-1] > 1:
        raise UsageError("--T-grid must stay within [0, 1]")
    if s_grid[0] < 0:
        raise UsageError("--s-grid must be >= 0")
    spec = SweepSpec(args.quantity, args.nbar, T_grid, s_grid, args.output,
                     args.numeric, args.dim, args.seed)
    n = run_sweep(spec, args.jobs)
    print(f"wrote {n} rows to {args.output}", file=out)
    return 0


def cmd_verify(args, out):
    if args.dim_max < 2:
        raise UsageError("--dim-max must be >= 2")
    seed = 0 if args.seed is None else args.seed
    report = run_suite(args.suite, args.tol, args.dim_max, seed, args.jobs)
    print(report.table(), file=out)
    _atomic_write(args.report, report.records())
    return 0 if report.passed else EXIT_FAIL


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker processes for sweeps and suites (default 1)")
    parser.add_argument("--seed", type=int, default=default,
                        help="seed for Monte-Carlo checks (64-bit unsigned)")


def _channel_flags(parser):
    parser.add_argument("--T", type=float, help="transmission coefficient in [0, 1]")
    parser.add_argument("--s", type=float, help="squeezing parameter (>= 0)")
    parser.add_argument("--nbar-s", dest="nbar_s", type=float,
                        help="noise variance, instead of --T and --s")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cvteleport",
        description="Classical capacity and fidelity of the continuous-variable teleportation channel.",
    )
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", parents=[common], help="closed-form capacity at one point")
    p.add_argument("--nbar", type=float, required=True, help="mean photon number budget")
    _channel_flags(p)
    p.add_argument("--numeric", action="store_true", help="also compute the numeric Holevo quantity")
    p.add_argument("--dim", type=int, help="fixed truncation for --numeric (default: converge)")
    p.add_argument("--tol", type=float, help=f"numeric tolerance (default {ENTROPIC_TOL:g})")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("fidelity", parents=[common], help="closed-form channel fidelity")
    _channel_flags(p)
    p.add_argument("--numeric", action="store_true", help="also compute <alpha|out|alpha> numerically")
    p.add_argument("--alpha", default="0", help="coherent amplitude, e.g. 1+0.5i (default 0)")
    p.add_argument("--dim", type=int, help="fixed truncation for --numeric")
    p.add_argument("--tol", type=float, help=f"numeric tolerance (default {STATE_TOL:g})")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("sweep", parents=[common], help="CSV over a (T, s) grid")
    p.add_argument("--quantity", choices=("capacity", "fidelity"), required=True)
    p.add_argument("--nbar", type=float, default=0.2,
                   help="mean photon number; the figure parameters are 0.2 and 0.8 (default 0.2)")
    p.add_argument("--T-grid", dest="T_grid", default="0:1:0.05", help="start:stop:step (default 0:1:0.05)")
    p.add_argument("--s-grid", dest="s_grid", default="0:2:0.1", help="start:stop:step (default 0:2:0.1)")
    p.add_argument("--output", required=True, help="CSV path")
    p.add_argument("--numeric", action="store_true", help="add numeric_value and abs_error columns")
    p.add_argument("--dim", type=int, help="fixed truncation for --numeric")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="run oracle suites")
    p.add_argument("--suite", choices=("all",) + SUITES, default="all")
    p.add_argument("--tol", type=float,
                   help="tolerance for every comparison (default 1e-4 entropic, 1e-6 states)")
    p.add_argument("--dim-max", dest="dim_max", type=int, default=DEFAULT_DIM_MAX,
                   help=f"truncation ceiling (default {DEFAULT_DIM_MAX})")
    p.add_argument("--report", default="verification_report.txt", help="machine-readable report path")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_common(args)
        return args.func(args, out)
    except UsageError as exc:
        parser.error(str(exc))
    except TailMassExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CVTeleportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())
