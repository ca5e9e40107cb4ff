"""``orik`` command line: verify, bench, madcount, offsets, erf.

Exit codes: 0 ok, 1 a check or run failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import MAD_OPS, erf_map, mad_count, write_pgm
from .bench import BENCH_OPS, append_csv, runtime_grid, run_bench
from .blocks import NetworkConfig
from .geometry import DISCRETIZATIONS, PARAMETERIZATIONS, ConvConfig, InvalidConfigError, offsets_for
from .tensor import default_threads
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(v):
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {v}")
    return n


def _nonneg(v):
    n = int(v)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {v}")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="orik", description="Oriented 1D depthwise convolution toolkit.")
    sub = p.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", help="run self-check suites")
    v.add_argument("--suite", default="all", choices=("all",) + SUITES)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--json", action="store_true", help="one JSON object per check")

    b = sub.add_parser("bench", help="time a convolution")
    b.add_argument("--op", default="dw1d", choices=BENCH_OPS)
    b.add_argument("--n", type=_positive, default=1)
    b.add_argument("--c", type=_positive, default=64)
    b.add_argument("--h", type=_positive, default=56)
    b.add_argument("--w", type=_positive, default=None)
    b.add_argument("--k", type=_positive, default=31)
    b.add_argument("--angle", type=float, default=0.0)
    b.add_argument("--dirs", type=_positive, default=1)
    b.add_argument("--stride", type=_positive, default=1)
    b.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    b.add_argument("--threads", type=_positive, default=None)
    b.add_argument("--reps", type=_positive, default=100)
    b.add_argument("--warmup", type=_nonneg, default=10)
    b.add_argument("--csv", default=None, help="append one row per run to this file")
    b.add_argument("--grid", action="store_true",
                   help="run the K x H x mode x angle grid (N and C from --grid-n/--grid-c)")
    b.add_argument("--grid-n", type=_positive, default=64)
    b.add_argument("--grid-c", type=_positive, default=512)

    m = sub.add_parser("madcount", help="closed-form multiply-adds per output element")
    m.add_argument("--op", required=True, choices=MAD_OPS)
    m.add_argument("--k", type=_positive, default=None)
    m.add_argument("--cprime", type=_positive, default=None)

    o = sub.add_parser("offsets", help="print the (dh, dw) offset table")
    o.add_argument("--k", type=_positive, required=True)
    o.add_argument("--pad", type=float, default=None)
    o.add_argument("--angle", type=float, required=True)
    o.add_argument("--param", choices=PARAMETERIZATIONS, default="rotation")
    o.add_argument("--disc", choices=DISCRETIZATIONS, default="round-down")
    o.add_argument("--even-pad", type=int, nargs=2, default=None, metavar=("PAD_H", "PAD_W"))

    e = sub.add_parser("erf", help="effective receptive field map as binary PGM")
    e.add_argument("--config", required=True, help="NetworkConfig JSON file")
    e.add_argument("--samples", type=_positive, default=4)
    e.add_argument("--size", type=_positive, default=64)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--params-seed", type=int, default=0)
    e.add_argument("--out", required=True)
    return p


def cmd_verify(args, out):
    failed = 0
    for c in run_suite(args.suite, args.seed):
        failed += not c.passed
        if args.json:
            out.write(json.dumps(c.as_dict()) + "\n")
        else:
            out.write(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:<6} {c.name:<46} {c.metric:.6g}\n")
    if not args.json:
        out.write(f"{'all checks passed' if not failed else f'{failed} check(s) failed'}\n")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_bench(args, out):
    dtype = np.float32 if args.dtype == "f32" else np.float64
    threads = args.threads if args.threads is not None else default_threads()
    if args.grid:
        rows = runtime_grid(args.grid_n, args.grid_c)
    else:
        rows = [dict(op=args.op, N=args.n, C=args.c, H=args.h, K=args.k, angle=args.angle)]
    for row in rows:
        W = args.w if (args.w is not None and not args.grid) else row["H"]
        r = run_bench(row["op"], row["N"], row["C"], row["H"], W, row["K"], row["angle"], args.dirs,
                      args.stride, dtype, threads, args.reps, args.warmup)
        out.write(f"{r.op_id} N={r.N} C={r.C} H={r.H} W={r.W} K={r.K} angle={r.angle_deg:g} "
                  f"threads={r.threads}: {r.mean_ns / 1e6:.4f} ms +- {r.std_ns / 1e6:.4f} ms "
                  f"({r.reps} reps, {r.warmup} warmup)\n")
        if args.csv:
            append_csv(r, args.csv)
    return EXIT_OK


def cmd_madcount(args, out):
    out.write(f"{mad_count(args.op, args.k, args.cprime).per_element_mads}\n")
    return EXIT_OK


def cmd_offsets(args, out):
    cfg = ConvConfig(args.k, pad=args.pad, parameterization=args.param, discretization=args.disc,
                     even_pad=tuple(args.even_pad) if args.even_pad else None)
    table = offsets_for(cfg, args.angle)
    for k, (dh, dw) in enumerate(table.as_tuples()):
        frac = "" if table.frac is None else f" {table.frac[k][0]:.17g} {table.frac[k][1]:.17g}"
        out.write(f"{k} {dh} {dw}{frac}\n")
    return EXIT_OK


def cmd_erf(args, out):
    try:
        cfg = NetworkConfig.from_json(args.config)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"cannot load config {args.config}: {exc}") from exc
    m = erf_map(cfg, args.params_seed, args.samples, args.size, args.seed)
    write_pgm(m, args.out)
    out.write(f"wrote {args.out} ({m.shape[1]}x{m.shape[0]}, nonzero {int(np.count_nonzero(m))})\n")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bench": cmd_bench, "madcount": cmd_madcount,
            "offsets": cmd_offsets, "erf": cmd_erf}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.cmd](args, out)
    except (UsageError, InvalidConfigError) as exc:
        print(f"orik {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"orik {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
