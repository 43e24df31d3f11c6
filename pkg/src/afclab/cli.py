"""
Command-line entry point.

    afclab run    --forward-kind iir_ap --L-GN 15 --out run.csv
    afclab sweep  --axis L_GN --values 2:30 --seeds 0 1 2 --out sweep.csv
    afclab probe  --forward-kind delay --alpha 1
    afclab gen    feedback-path --seed 2 --out f.txt

Every scenario field can be given as a flag (``--L-A``, ``--mode`` ...) and
overrides the values read from ``--config``.
"""

import argparse
import csv
import io
import sys

from .harness.config import FIELDS, coerce, load_config
from .harness.io import save_coefficients
from .harness.scenario import probe, run_scenario
from .harness.sweep import AXES, SweepRow, config_for, fmt, rows_to_csv, sweep
from .harness.synthetic import make_ar_model, make_feedback_path


def parse_values(items, axis):
    """Expand ``a:b`` (inclusive) and ``a:b:step`` ranges; plain items pass through."""
    out = []
    for item in items:
        if ":" in item and axis != "snr_db":
            parts = [int(p) for p in item.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            out.extend(range(start, stop + 1, step))
        else:
            out.append(coerce(axis, item))
    return out


def add_scenario_flags(parser):
    group = parser.add_argument_group("scenario fields")
    for name in FIELDS:
        if name == "seed":
            continue
        group.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar="VALUE")
    parser.add_argument("--config", help="YAML or JSON file with scenario fields")
    parser.add_argument("--seed", type=int, default=None, help="replicate seed (feedback/forward path draw)")
    parser.add_argument("--out", help="output file (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="afclab", description="Closed-loop 2ch-AFC identifiability laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single scenario")
    add_scenario_flags(p)

    p = sub.add_parser("sweep", help="sweep one axis over several replicate seeds")
    add_scenario_flags(p)
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--values", nargs="+", required=True, help="values or inclusive ranges a:b[:step]")
    p.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--summary", help="also write mean/std per axis value to this CSV")

    p = sub.add_parser("probe", help="condition number of R only (no estimate)")
    add_scenario_flags(p)
    p.add_argument("--axis", choices=AXES)
    p.add_argument("--values", nargs="+")
    p.add_argument("--seeds", nargs="+", type=int)

    p = sub.add_parser("gen", help="write a synthetic feedback path or AR model, one coefficient per line")
    add_scenario_flags(p)
    p.add_argument("what", choices=("feedback-path", "ar-model", "forward-num", "forward-den"))
    return parser


def config_from(args):
    overrides = {name: getattr(args, name, None) for name in FIELDS}
    return load_config(args.config, **overrides)


def emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    cfg = config_from(args)
    row = SweepRow("-", cfg.seed, report=run_scenario(cfg))
    emit(rows_to_csv("scenario", [row], cfg), args.out)


def cmd_sweep(args):
    cfg = config_from(args)
    result = sweep(cfg, args.axis, parse_values(args.values, args.axis), args.seeds, args.workers)
    emit(result.to_csv(), args.out)
    if args.summary:
        emit(result.summary_csv(), args.summary)


def cmd_probe(args):
    cfg = config_from(args)
    if args.axis:
        if not args.values:
            raise SystemExit("probe: --axis needs --values")
        seeds = args.seeds or [cfg.seed]
        jobs = [(v, s) for v in parse_values(args.values, args.axis) for s in seeds]
        axis = args.axis
    else:
        jobs = [("-", cfg.seed)]
        axis = "scenario"
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()} axis={axis}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = None
    for value, seed in jobs:
        run_cfg = cfg.replace(seed=seed) if value == "-" else config_for(cfg, axis, value, seed)
        info = probe(run_cfg)
        if header is None:
            header = [axis, "seed", *info]
            writer.writerow(header)
        writer.writerow([fmt(value), seed, *(fmt(v) for v in info.values())])
    emit(buf.getvalue(), args.out)


def cmd_gen(args):
    cfg = config_from(args)
    if args.what == "feedback-path":
        taps = make_feedback_path(cfg.L_F, cfg.seed, cfg.decay_tau)
    elif args.what == "ar-model":
        taps = make_ar_model(cfg.L_D, cfg.ar_seed, cfg.sample_rate)
    else:
        g = cfg.forward_spec().build()
        taps = g.numerator if args.what == "forward-num" else g.denominator
    if args.out:
        save_coefficients(args.out, taps)
    else:
        sys.stdout.write("".join(f"{t:.17g}\n" for t in taps))


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "probe": cmd_probe, "gen": cmd_gen}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"afclab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
