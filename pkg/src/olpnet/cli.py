"""Command-line entry point: ``olpnet --command {mnist,mg,verify,bench} ...``.

Exit codes: 0 success, 1 invalid arguments, 2 missing or corrupt data,
3 numeric failure (overflow, singular system, failed verification).
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

from olpnet import experiments
from olpnet.errors import ArgumentError, DataFormatError, OlpError

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="olpnet", description="Online pseudoinverse learning experiments.")
    p.add_argument("--command", required=True, choices=experiments.COMMANDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=_int_list, default=(), metavar="M[,M...]",
                   help="hidden layer size; a list runs a sweep (mnist) or a table (bench)")
    p.add_argument("--mode", choices=("static", "adaptive"), default="static")
    p.add_argument("--images", type=Path, help="MNIST training images (IDX)")
    p.add_argument("--labels", type=Path, help="MNIST training labels (IDX)")
    p.add_argument("--test-images", type=Path, help="default: t10k-images-idx3-ubyte next to --images")
    p.add_argument("--test-labels", type=Path, help="default: t10k-labels-idx1-ubyte next to --labels")
    p.add_argument("--taps", type=_int_list, default=experiments.DEFAULT_TAPS, metavar="a,b,c,d")
    p.add_argument("--horizon", type=int, default=experiments.DEFAULT_HORIZON)
    p.add_argument("--steps", type=int, default=10000, help="Mackey-Glass steps after the transient")
    p.add_argument("--limit", type=_int_list, default=(), metavar="K[,K...]",
                   help="training samples (mnist) or stream lengths (bench)")
    p.add_argument("--out", type=Path, help="CSV output path")
    p.add_argument("--scale", type=float, default=None, help="input weight/bias range [-scale, scale)")
    p.add_argument("--no-bias", dest="bias", action="store_false", help="hidden units without bias")
    p.add_argument("--x0", type=float, default=1.2, help="Mackey-Glass constant history")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _thread_limit():
    limit = os.environ.get("OLP_THREADS")
    if not limit:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(limit))


def _report(config: experiments.RunConfig) -> int:
    if config.command == "mnist":
        for r in experiments.run_mnist(config):
            print(f"M={r.hidden} trained={r.curve.samples_seen[-1]} test_error={r.final_error:.4f}")
        return EXIT_OK
    if config.command == "mg":
        r = experiments.run_mg(config)
        print(f"nrmse_static={r.nrmse_static:.6f} nrmse_adaptive={r.nrmse_adaptive:.6f}")
        return EXIT_OK
    if config.command == "verify":
        rep = experiments.run_verify(config)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} cases={len(rep.rows)} max_deviation={rep.max_deviation:.3e} tolerance={rep.tolerance:.0e}")
        return EXIT_OK if rep.passed else EXIT_NUMERIC
    for row in experiments.run_bench(config):
        print(f"M={row.m} K={row.k} olp_reals={row.olp_reals} batch_reals={row.batch_reals} "
              f"sec_per_update={row.sec_per_update:.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = experiments.RunConfig(
            command=args.command, seed=args.seed, hidden=args.hidden, mode=args.mode,
            images=args.images, labels=args.labels, test_images=args.test_images,
            test_labels=args.test_labels, taps=args.taps, horizon=args.horizon, steps=args.steps,
            limit=args.limit, out=args.out, scale=args.scale, bias=args.bias, x0=args.x0,
        )
        with _thread_limit():
            return _report(config)
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OlpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
