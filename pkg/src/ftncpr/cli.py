"""Command-line entry point: ``ftncpr simulate`` and ``ftncpr gain``."""
import argparse
import logging
import sys
import time

from .config import load_config
from .errors import ConfigError, NotMeasurableError, ParameterError
from .harness import compute_osnr_gain, emit_results, read_results, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_CELLS, EXIT_IO = 0, 1, 2, 3

QUICK_SYMBOLS = 8192

log = logging.getLogger("ftncpr")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed base must fit in 64 unsigned bits")
    return v


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; argparse's own code 2 is taken
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="ftncpr", description="FTN-QPSK carrier recovery simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a BER-vs-OSNR sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides output.path)")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--seed-base", type=_u64)
    s.add_argument("--scheme", choices=("conventional", "corrected", "both"), default="both")
    s.add_argument("--quick", action="store_true", help=f"{QUICK_SYMBOLS} symbols, one seed")

    g = sub.add_parser("gain", help="OSNR gain of the corrected scheme from a results CSV")
    g.add_argument("--in", dest="csv", required=True)
    g.add_argument("--target-ber", type=float, default=1e-2)
    g.add_argument("--linewidth", type=float, required=True)
    return p


def _simulate(args):
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed_base is not None:
            changes["seed_base"] = args.seed_base
        if args.scheme != "both":
            changes["schemes"] = (args.scheme,)
        if args.out:
            changes["output_path"] = args.out
        if args.quick:
            changes["link"] = cfg.link.with_(n_symbols=QUICK_SYMBOLS)
            changes["seeds"] = cfg.seeds[:1]
        cfg = cfg.with_(**changes)
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    t0 = time.perf_counter()
    records = run_sweep(cfg, parallel=args.parallel)
    try:
        csv_path, svg_path = emit_results(records, cfg.output_path)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    failed = [r for r in records if not r.ok]
    print(f"{len(records)} cells in {time.perf_counter() - t0:.1f} s -> {csv_path}, {svg_path}")
    for scheme in cfg.schemes:
        slips = sum(r.cycle_slips for r in records if r.scheme == scheme)
        print(f"{scheme}: {slips} cycle slips absorbed by segment-wise ambiguity resolution")
    if set(cfg.schemes) == {"conventional", "corrected"}:
        for lw in cfg.linewidths_hz:
            try:
                gain = compute_osnr_gain(records, linewidth=lw, ber_target=cfg.ber_target)
                print(f"gain @ {lw / 1e3:g} kHz, BER {cfg.ber_target:g}: {gain:.2f} dB")
            except NotMeasurableError as exc:
                print(f"gain @ {lw / 1e3:g} kHz: not measurable ({exc})")
    if failed:
        for r in failed:
            print(f"failed cell: {r.scheme} lw={r.linewidth_hz:g} osnr={r.osnr_db:g} seed={r.seed}: {r.status}",
                  file=sys.stderr)
        return EXIT_CELLS
    return EXIT_OK


def _gain(args):
    try:
        records = read_results(args.csv)
    except OSError as exc:
        print(f"cannot read {args.csv}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, ValueError) as exc:
        print(f"malformed results file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        gain = compute_osnr_gain(records, linewidth=args.linewidth, ber_target=args.target_ber)
    except NotMeasurableError as exc:
        print(f"not measurable: {exc}", file=sys.stderr)
        return EXIT_CELLS
    print(f"{gain:.2f}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "simulate":
        return _simulate(args)
    return _gain(args)


if __name__ == "__main__":
    sys.exit(main())
