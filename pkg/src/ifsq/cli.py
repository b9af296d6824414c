"""Command line entry point: ``ifsq <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error. Output is
built in memory and written only once the command has succeeded, so a failed
run never leaves a partial ``--out`` file behind.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from fractions import Fraction

from . import compression, metrics, stats, sweep, tensor_io
from .quantizer import BoundParams, LevelSpec, decode_index, encode_index

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _alpha_spec(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range must be lo:hi:step")
        try:
            return sweep.alpha_grid(*(float(p) for p in parts))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return _float_list(text)


def _int_spec(text: str) -> list[int]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError("range must be lo:hi[:step]")
        try:
            lo, hi, *step = (int(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer range {text!r}")
        step = step[0] if step else 1
        if step < 1 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad integer range {text!r}")
        return list(range(lo, hi + 1, step))
    return _int_list(text)


def _clip(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("clip must be lo,hi")
    return vals[0], vals[1]


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _default_seed() -> int:
    env = os.environ.get("IFSQ_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"IFSQ_SEED must be an integer, got {env!r}")


def build_parser(default_seed: int = 0) -> _Parser:
    parser = _Parser(prog="ifsq", description="Finite scalar quantization laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=default_seed,
                        help="random seed (default: $IFSQ_SEED or 0)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=_positive_int, default=1,
                        help="worker threads; output does not depend on this")

    p = sub.add_parser("sweep", parents=[common], help="KS/RMSE-to-uniform over slopes")
    p.add_argument("--alphas", type=_alpha_spec, default="1.0:2.4:0.05",
                   help="lo:hi:step (inclusive) or comma list")
    p.add_argument("--n", type=_positive_int, default=sweep.DEFAULT_N)

    p = sub.add_parser("analyze", parents=[common], help="report for one quantization scheme")
    p.add_argument("--scheme", choices=stats.Scheme.KINDS, default="ifsq")
    p.add_argument("--source", choices=("normal", "uniform"), default="normal")
    p.add_argument("--levels", type=_positive_int, default=9)
    p.add_argument("--n", type=_positive_int, default=500_000)
    p.add_argument("--clip", type=_clip, default=(-3.0, 3.0), help="lo,hi")
    p.add_argument("--alpha", type=float, default=1.6, help="slope for the ifsq scheme")

    p = sub.add_parser("figure1", parents=[common],
                       help="equal-interval vs equal-probability comparison")
    p.add_argument("--levels", type=_positive_int, default=9)
    p.add_argument("--n", type=_positive_int, default=500_000)
    p.add_argument("--clip", type=_clip, default=(-3.0, 3.0), help="lo,hi")

    p = sub.add_parser("encode", parents=[common], help="digits -> token index")
    p.add_argument("--levels", type=_int_list, required=True, help="e.g. 3,3,3,3")
    p.add_argument("--digits", type=_int_list, action="append", required=True,
                   help="e.g. 2,2,1,0 (repeatable)")

    p = sub.add_parser("decode", parents=[common], help="token index -> digits")
    p.add_argument("--levels", type=_int_list, required=True)
    p.add_argument("--index", type=int, action="append", required=True, help="repeatable")

    p = sub.add_parser("cr", parents=[common], help="compression ratio table")
    p.add_argument("--variant", choices=compression.VARIANTS, default="ifsq")
    p.add_argument("--f", type=_int_spec, default=[8], help="downsample factor(s)")
    p.add_argument("--d", type=_int_spec, default=[4], help="latent dim(s)")
    p.add_argument("--bits", type=_int_spec, default=[4], help="bit count(s), e.g. 2:8")

    p = sub.add_parser("metrics", parents=[common], help="STS/NTS over layer tensor files")
    p.add_argument("files", nargs="+",
                   help="input embedding tensor followed by one tensor per layer")
    p.add_argument("--series", type=_float_list,
                   help="one value per layer; Pearson r against STS and NTS is appended")
    return parser


def _emit(args, header, rows, payload) -> str:
    if args.format == "json":
        return tensor_io.format_json(payload)
    return tensor_io.format_csv(header, rows)


def cmd_sweep(args) -> str:
    rows = sweep.alpha_sweep(args.alphas, args.n, args.seed, args.workers)
    best = min(rows, key=lambda r: r.ks)
    payload = {"rows": [asdict(r) for r in rows], "argmin_ks_alpha": best.alpha}
    return _emit(args, tensor_io.SWEEP_HEADER,
                 [(r.alpha, r.ks, r.rmse, r.n, r.seed) for r in rows], payload)


def _report_payload(report: stats.DistributionReport, profile=None) -> dict:
    out = report.summary()
    out["bins"] = [asdict(b) for b in report.bins]
    if profile is not None:
        out["error_profile"] = profile
    return out


def cmd_analyze(args) -> str:
    if args.source == "normal":
        source = stats.Source.normal()
    else:
        source = stats.Source.uniform(*args.clip)
    params = BoundParams.with_slope(args.alpha)
    scheme = stats.Scheme(args.scheme, args.levels, tuple(args.clip), params)
    samples = stats.sample(source, args.n, args.seed, args.workers)
    report = stats.scheme_report(samples, scheme)
    profile = stats.error_profile(samples, scheme)
    rows = [(b.bin, b.count, b.prob, b.center, b.mse_contrib) for b in report.bins]
    return _emit(args, tensor_io.SCHEME_HEADER, rows, _report_payload(report, profile))


def cmd_figure1(args) -> str:
    reports = stats.figure1_reports(args.levels, args.n, args.seed, args.workers,
                                    tuple(args.clip))
    if args.format == "json":
        return tensor_io.format_json({"reports": [_report_payload(r) for r in reports]})
    header = ("scheme", "source", "entropy_bits", "utilization",
              "nonzero_bin_fraction", "mse") + tensor_io.SCHEME_HEADER
    rows = [
        (r.scheme, r.source, r.entropy_bits, r.utilization, r.nonzero_bin_fraction, r.mse,
         b.bin, b.count, b.prob, b.center, b.mse_contrib)
        for r in reports for b in r.bins
    ]
    return tensor_io.format_csv(header, rows)


def cmd_encode(args) -> str:
    levels = LevelSpec(args.levels)
    indices = [encode_index(d, levels) for d in args.digits]
    payload = {"levels": list(levels.levels),
               "codes": [{"digits": d, "index": i} for d, i in zip(args.digits, indices)]}
    return _emit(args, ("index",), [(i,) for i in indices], payload)


def cmd_decode(args) -> str:
    levels = LevelSpec(args.levels)
    digits = [decode_index(i, levels).tolist() for i in args.index]
    payload = {"levels": list(levels.levels),
               "codes": [{"digits": d, "index": i} for d, i in zip(digits, args.index)]}
    header = ("index",) + tuple(f"d{j}" for j in range(levels.dim))
    return _emit(args, header, [(i, *d) for i, d in zip(args.index, digits)], payload)


def cmd_cr(args) -> str:
    rows, records = [], []
    for f in args.f:
        for d in args.d:
            for bits in args.bits:
                spec = compression.CompressionSpec(args.variant, f, d, bits)
                exact, floored = compression.compression_ratio(spec)
                exact = Fraction(exact)
                rows.append((args.variant, f, d, bits, exact.numerator, exact.denominator,
                             float(exact), floored))
                records.append({"variant": args.variant, "f": f, "d": d, "bits": bits,
                                "numerator": exact.numerator,
                                "denominator": exact.denominator,
                                "exact": float(exact), "floored": floored})
    header = ("variant", "f", "d", "bits", "numerator", "denominator", "exact", "floored")
    return _emit(args, header, rows, {"rows": records})


def cmd_metrics(args) -> str:
    if len(args.files) < 2:
        raise UsageError("metrics needs the input embedding plus at least one layer file")
    h0 = tensor_io.read_tensor(args.files[0], 0)
    results = [
        metrics.layer_metrics(tensor_io.read_tensor(path, k), h0, k)
        for k, path in enumerate(args.files[1:], start=1)
    ]
    for r in results:
        if r.zero_rows:
            print(f"warning: layer {r.layer} has {r.zero_rows} zero rows (cosine taken as 0)",
                  file=sys.stderr)
    rows = [(r.layer, r.sts, r.nts) for r in results]
    payload = {"layers": [asdict(r) for r in results]}
    if args.series is not None:
        if len(args.series) != len(results):
            raise ValueError(f"--series has {len(args.series)} values for {len(results)} layers")
        r_sts = metrics.pearson([r.sts for r in results], args.series)
        r_nts = metrics.pearson([r.nts for r in results], args.series)
        rows.append(("pearson", r_sts, r_nts))
        payload["pearson"] = {"sts": r_sts, "nts": r_nts}
    return _emit(args, tensor_io.METRICS_HEADER, rows, payload)


COMMANDS = {
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "figure1": cmd_figure1,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "cr": cmd_cr,
    "metrics": cmd_metrics,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser(_default_seed()).parse_args(argv)
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except (ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DATA
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: {exc}", file=stderr)
            return EXIT_DATA
    else:
        stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
