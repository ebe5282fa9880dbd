"""
Command line front end.

    csidrive run SCENARIO [--out DIR] [--seed N] [--no-plots]
    csidrive sweep SCENARIO --param PATH --values LIST [--out FILE] [--workers N]
    csidrive plot TRACE.csv [--out DIR]
    csidrive metrics TRACE.csv [--scenario FILE]

Exit codes: 0 success, 1 controller fault, 2 invalid input,
3 numerical blow-up, 4 I/O failure.
"""
import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from csidrive.engine import StallWarning, run_scenario
from csidrive.errors import NumericBlowupError, ParameterError
from csidrive.metrics import compute_metrics
from csidrive.outputs import SCENARIO_FILE, read_trace_csv, write_outputs
from csidrive.scenario import parse_scenario, set_parameter

EXIT_OK, EXIT_FAULT, EXIT_INPUT, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3, 4


def _fail(code, msg):
    print(f"csidrive: error: {msg}", file=sys.stderr)
    return code


def parse_values(text):
    """Split a comma list; each item is read as JSON, else kept as a string."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            out.append(item)
    return out


def cmd_run(args):
    sc = parse_scenario(args.scenario)
    if args.seed is not None:
        sc = set_parameter(sc, "sim.rng_seed", args.seed)
    out = Path(args.out) if args.out else Path("runs") / Path(args.scenario).stem
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StallWarning)
        trace, metrics = run_scenario(sc)
    for w in caught:
        if issubclass(w.category, StallWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    write_outputs(trace, metrics, out, sc)
    if not args.no_plots:
        from csidrive.plots import emit_plots
        emit_plots(trace, out)
    print(json.dumps(metrics.to_dict(), indent=2))
    print(f"outputs in {out}", file=sys.stderr)
    if metrics.fault:
        return _fail(EXIT_FAULT, metrics.fault)
    return EXIT_OK


def cmd_sweep(args):
    from csidrive.sweep import run_sweep, write_sweep_csv

    base = parse_scenario(args.scenario)
    values = parse_values(args.values)
    if not values:
        return _fail(EXIT_INPUT, "--values is empty")
    set_parameter(base, args.param, values[0])  # reject a bad path before running
    rows = run_sweep(base, args.param, values, workers=args.workers)
    out = Path(args.out) if args.out else Path(f"sweep_{args.param.replace('.', '_')}.csv")
    write_sweep_csv(rows, out)
    for r in rows:
        status = r["error"] or r["fault"] or "ok"
        print(f"{args.param}={r['value']!r}: {status}")
    print(f"table in {out}", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args):
    from csidrive.plots import emit_plots

    trace = read_trace_csv(args.trace)
    if len(trace["t"]) == 0:
        return _fail(EXIT_INPUT, f"{args.trace} holds no records")
    out = Path(args.out) if args.out else Path(args.trace).parent
    for p in emit_plots(trace, out):
        print(p)
    return EXIT_OK


def cmd_metrics(args):
    trace = read_trace_csv(args.trace)
    scen = Path(args.scenario) if args.scenario else Path(args.trace).parent / SCENARIO_FILE
    cfg = parse_scenario(scen).metrics if scen.exists() else None
    print(json.dumps(compute_metrics(trace, cfg).to_dict(), indent=2))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="csidrive",
                                 description="Sensorless CSI-fed PMSM startup simulator.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", help="output directory (default runs/<scenario name>)")
    p.add_argument("--seed", type=int, help="override sim.rng_seed")
    p.add_argument("--no-plots", action="store_true", help="skip the SVG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="vary one parameter")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted parameter, e.g. transition.hc_dtheta")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", help="result CSV (default sweep_<param>.csv)")
    p.add_argument("--workers", type=int, default=None, help="parallel processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="figures from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--out", help="output directory (default: next to the trace)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("metrics", help="recompute metrics from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--scenario", help="scenario for metric windows "
                   "(default: scenario.resolved.json next to the trace)")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        return _fail(EXIT_INPUT, str(exc))
    except NumericBlowupError as exc:
        return _fail(EXIT_BLOWUP, str(exc))
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))


if __name__ == "__main__":
    sys.exit(main())
