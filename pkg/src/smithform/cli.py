"""Command-line interface: compute, verify, gen, bench."""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time

import numpy as np

from . import certify, gen, massager
from .matcore import (
    IntMat,
    MatrixFormatError,
    SmithDiagonal,
    load_matrix,
    save_matrix,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_SINGULAR = 3
EXIT_RESTART_LIMIT = 4


def _mat_to_strings(m: IntMat):
    return [[str(m[i, j]) for j in range(m.cols)] for i in range(m.rows)]


def _mat_from_strings(rows):
    return IntMat.from_rows([[int(v) for v in row] for row in rows])


def result_to_json(a_rows: int, sm: massager.SmithMassager, stats: massager.MassagerStats) -> dict:
    return {
        "n": a_rows,
        "invariant_factors": [str(f) for f in sm.s],
        "timings": {
            "lif_s": round(stats.lif_s, 3),
            "im_s": round(stats.im_s, 3),
            "uc_s": round(stats.uc_s, 3),
            "total_s": round(stats.total_s, 3),
        },
        "restarts": stats.restarts,
        "iterations": [{"r": r, "modulus_bits": b} for r, b in stats.iterations],
        "seed": stats.seed,
        "massager": {
            "U": _mat_to_strings(sm.u),
            "M": _mat_to_strings(sm.m),
            "T": _mat_to_strings(sm.t),
        },
    }


def massager_from_json(doc: dict) -> massager.SmithMassager:
    block = doc["massager"]
    return massager.SmithMassager(
        u=_mat_from_strings(block["U"]),
        m=_mat_from_strings(block["M"]),
        t=_mat_from_strings(block["T"]),
        s=SmithDiagonal.of([int(f) for f in doc["invariant_factors"]]),
    )


def cmd_compute(args) -> int:
    try:
        a = load_matrix(args.infile)
    except (OSError, MatrixFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    cfg = massager.MassagerConfig(seed=args.seed)
    try:
        sm, stats = massager.compute_smith_massager(a, cfg)
    except massager.SingularInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except massager.RestartLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESTART_LIMIT
    doc = result_to_json(a.rows, sm, stats)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    print("n:", a.rows)
    print("invariant factors:", " ".join(str(f) for f in sm.s))
    t = doc["timings"]
    print(f"timings: LIF {t['lif_s']}s  IM {t['im_s']}s  UC {t['uc_s']}s  total {t['total_s']}s")
    print(f"restarts: {stats.restarts}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        a = load_matrix(args.infile)
        with open(args.result, encoding="utf-8") as fh:
            doc = json.load(fh)
        sm = massager_from_json(doc)
    except (OSError, MatrixFormatError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    report = certify.verify_massager(a, sm, with_oracle=args.oracle, oracle_limit=200)
    for name, ok in report.to_dict().items():
        if name == "all_pass":
            continue
        if ok is None:
            print(f"{name}: skipped")
        else:
            print(f"{name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if report.all_pass() else EXIT_CHECK_FAILED


def cmd_gen(args) -> int:
    rng = random.Random(args.seed)
    if args.family == "vandermonde":
        if not gen.is_prime(args.n):
            print(f"warning: {args.n} is not prime; the matrix may be singular", file=sys.stderr)
        a = gen.vandermonde_mod(args.n)
    elif args.family == "random":
        a = gen.random_nonsingular(args.n, args.bits, rng)
    else:
        print(f"error: unknown family {args.family!r}", file=sys.stderr)
        return EXIT_PARSE
    save_matrix(a, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        print("error: --sizes must be a comma-separated list of integers", file=sys.stderr)
        return EXIT_PARSE
    if args.family == "vandermonde":
        bad = [n for n in sizes if not gen.is_prime(n)]
        if bad:
            print(f"error: non-prime sizes {bad} rejected for the vandermonde family", file=sys.stderr)
            return EXIT_PARSE
    rows = ["n,smith_s,dgemm_equiv_s,ratio"]
    rng = random.Random(args.seed)
    for n in sizes:
        if args.family == "vandermonde":
            a = gen.vandermonde_mod(n)
        else:
            a = gen.random_nonsingular(n, args.bits, rng)
        smith_times, dgemm_times = [], []
        for trial in range(args.trials):
            t0 = time.perf_counter()
            massager.compute_smith_massager(a, massager.MassagerConfig(seed=(args.seed or 0) + trial))
            smith_times.append(time.perf_counter() - t0)
            x = np.random.default_rng(trial).random((n, n))
            y = np.random.default_rng(trial + 1).random((n, n))
            t0 = time.perf_counter()
            np.matmul(x, y)
            dgemm_times.append(time.perf_counter() - t0)
        smith_s = sorted(smith_times)[len(smith_times) // 2]
        dgemm_s = sorted(dgemm_times)[len(dgemm_times) // 2]
        rows.append(f"{n},{smith_s:.6f},{dgemm_s:.6f},{smith_s / max(dgemm_s, 1e-12):.3f}")
    out = "\n".join(rows) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(out)
    sys.stdout.write(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smith", description="Smith normal form and Smith massager of integer matrices")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="compute the Smith form and massager")
    c.add_argument("--in", dest="infile", required=True, help="matrix text file")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--json", default=None, help="write the JSON result here")
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="verify a computed result")
    v.add_argument("--in", dest="infile", required=True)
    v.add_argument("--result", required=True, help="JSON result from compute")
    v.add_argument("--oracle", action="store_true", help="also compare against the slow oracle (n <= 200)")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a test matrix")
    g.add_argument("--family", required=True, choices=["vandermonde", "random"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--bits", type=int, default=8)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="benchmark against a dense float multiply")
    b.add_argument("--sizes", required=True, help="comma-separated dimensions")
    b.add_argument("--trials", type=int, default=3)
    b.add_argument("--csv", default=None)
    b.add_argument("--family", default="vandermonde", choices=["vandermonde", "random"])
    b.add_argument("--bits", type=int, default=8)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
