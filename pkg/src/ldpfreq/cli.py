"""Command-line entry point: ``ldpfreq run`` and ``ldpfreq audit``."""

from __future__ import annotations

import argparse
import csv
import io
import sys

from .audit import audit_grid, audit_protocol
from .errors import LDPError
from .harness import ExperimentConfig, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_AUDIT = 0, 2, 3

PROTOCOL_CHOICES = (
    "grr", "sue", "oue", "blh", "olh", "ss",
    "l-grr", "l-sue", "l-oue", "l-soue", "l-osue", "dbitflippm",
)


def _ks(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpfreq", description="LDP multiple frequency estimation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a data collection and print estimates")
    run.add_argument("--task", choices=("single", "long", "mdim", "long-mdim"), default="single")
    run.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="grr")
    run.add_argument("--solution", choices=("spl", "smp", "rsfd"))
    run.add_argument("--fake-mode", choices=("zero", "rnd"), default="zero")
    run.add_argument("--eps", type=float)
    run.add_argument("--eps-perm", type=float)
    run.add_argument("--eps-1", type=float)
    run.add_argument("--n", type=int, default=10_000)
    dom = run.add_mutually_exclusive_group()
    dom.add_argument("--k", type=int)
    dom.add_argument("--ks", type=_ks)
    run.add_argument("--d", type=int, dest="d_bits", help="dBitFlipPM sampled buckets per user")
    run.add_argument("--collections", type=int, default=1)
    run.add_argument("--dist", default="uniform", help="uniform | zipf:<a> | point:<v> | weights:<w,...>")
    run.add_argument("--seed", type=_u64, default=0)
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--postprocess", action="store_true", help="clip to [0,1] and renormalize")
    run.add_argument("--out", choices=("json", "csv"), default="json")
    run.add_argument("--output", default="-", help="result path (default stdout)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--dump-reports", metavar="PATH", help="write first-collection reports as JSON lines")

    audit = sub.add_parser("audit", help="enumerate channels and check realized epsilon")
    audit.add_argument("--protocol", choices=PROTOCOL_CHOICES)
    audit.add_argument("--eps", type=float)
    audit.add_argument("--eps-perm", type=float)
    audit.add_argument("--eps-1", type=float)
    audit.add_argument("--k", type=int, default=3)
    audit.add_argument("--d", type=int, dest="d_bits")
    audit.add_argument("--seed", type=_u64, default=0, help="hash seed (LH) or bucket-sample seed (dBitFlipPM)")
    audit.add_argument("--grid", action="store_true", help="audit every mechanism over the standard grid")
    return parser


def _config(args) -> ExperimentConfig:
    if args.ks is not None:
        ks = args.ks
    elif args.k is not None:
        ks = (args.k,)
    else:
        ks = (5,)
    return ExperimentConfig(
        task=args.task,
        protocol=args.protocol,
        solution=args.solution,
        fake_mode=args.fake_mode,
        eps=args.eps,
        eps_perm=args.eps_perm,
        eps_1=args.eps_1,
        n=args.n,
        ks=ks,
        d_bits=args.d_bits,
        collections=args.collections,
        dist=args.dist,
        seed=args.seed,
        trials=args.trials,
        postprocess=args.postprocess,
    )


def _render(result, fmt: str) -> str:
    if fmt == "json":
        return result.to_json() + "\n"
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(result.csv_rows())
    return buf.getvalue()


def cmd_run(args) -> int:
    sink = open(args.dump_reports, "w") if args.dump_reports else None
    try:
        result = run_experiment(_config(args), workers=max(1, args.workers), report_sink=sink)
    finally:
        if sink:
            sink.close()
    text = _render(result, args.out)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.grid:
        results = audit_grid()
    else:
        if args.protocol is None:
            raise LDPError("audit needs --protocol or --grid")
        name = args.protocol.upper()
        if name.startswith("L-") or name == "DBITFLIPPM":
            if args.eps_perm is None or (name != "DBITFLIPPM" and args.eps_1 is None):
                raise LDPError("longitudinal audits need --eps-perm (and --eps-1)")
        elif args.eps is None:
            raise LDPError("audit needs --eps")
        results = audit_protocol(
            name, args.k, eps=args.eps, eps_perm=args.eps_perm, eps_1=args.eps_1, d_bits=args.d_bits, seed=args.seed
        )
    for r in results:
        print(r.line())
    if not args.grid and any(r.relation == "infeasible" for r in results):
        print("error: no mechanism exists for this budget pair", file=sys.stderr)
        return EXIT_INVALID
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} audits passed")
    return EXIT_AUDIT if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_audit(args)
    except LDPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
