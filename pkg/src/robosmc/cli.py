"""Command-line front end.

Three subcommands:

* ``check``     - evaluate queries against a model and write a report;
* ``simulate``  - sample trajectories and export them as CSV traces;
* ``predictor`` - replay a recorded arrival log through the window
                  predictor and emit its per-batch decisions.

Every run is reproducible from its own output: the report echoes the
full configuration (including a randomly drawn seed when ``--seed`` is
omitted), results carry no wall-clock data, and rerunning with the
echoed configuration reproduces the files byte for byte.  Timings go
to stderr only.

Exit codes: 0 when everything passed, 1 when a safety-style query
(invariant, leads-to or deadlock-freedom) was falsified, 2 for usage,
parse or model errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .automata import ModelError
from .casestudy import EnvSpec, VERIFICATION_QUERIES, aligned_ranges
from .engine import Monitor, SimConfig, simulate_run, trace_to_csv
from .expressions import ParseError
from .modelfile import BUILTIN_MODELS, ModelFileError, load_options, resolve_model
from .predictor import Thresholds, replay
from .queries import parse_query
from .smc import CENSOR, VIOLATE, evaluate_queries


class MalformedLine(Exception):
    """An arrival log line that is not a non-negative number."""


FALSIFIABLE = ("always", "leadsto", "no-deadlock")


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

def _thresholds(text: str) -> Thresholds:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            f"expected four comma-separated values, got {text!r}")
    try:
        return Thresholds(*(float(p) for p in parts))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True,
                   help=f"built-in model ({', '.join(BUILTIN_MODELS)}) "
                        f"or a YAML model file")
    p.add_argument("--options", metavar="FILE",
                   help="YAML overrides for the built-in model constants")
    p.add_argument("--thresholds", type=_thresholds, metavar="T1,T2,T3,T4",
                   help="predictor thresholds; gap bands realign to match")


def _add_sim_args(p: argparse.ArgumentParser):
    p.add_argument("--horizon", type=float, default=10800.0,
                   help="run length in model seconds (default 10800)")
    p.add_argument("--seed", type=int,
                   help="base seed; drawn randomly (and echoed) if omitted")
    p.add_argument("--max-steps", type=int, default=1_000_000,
                   help="per-run jump cap (default 1000000)")


def _resolve(args):
    options = load_options(args.options) if args.options else {}
    if args.thresholds is not None:
        if args.model not in BUILTIN_MODELS:
            raise ModelFileError("--thresholds only applies to the built-in "
                                 "models; set them in the model file instead")
        base = options.get("env") or EnvSpec()
        options["env"] = replace(base, thresholds=args.thresholds,
                                 ranges=aligned_ranges(args.thresholds))
    return resolve_model(args.model, options)


def _pick_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int.from_bytes(os.urandom(8), "little") % 2**63
    print(f"no --seed given; drew {seed} (pass --seed {seed} to reproduce)",
          file=sys.stderr)
    return seed


def _config(args, seed: int) -> SimConfig:
    return SimConfig(horizon=args.horizon, seed=seed, max_steps=args.max_steps)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    network = _resolve(args)

    texts: list[str] = []
    if args.queries:
        if args.queries == "builtin":
            texts.extend(VERIFICATION_QUERIES)
        else:
            content = Path(args.queries).read_text(encoding="utf-8")
            texts.extend(text for _, text in _numbered_queries(content))
    texts.extend(args.query or [])
    queries = [parse_query(t) for t in texts]

    seed = _pick_seed(args)
    config = _config(args, seed)
    workers = None if args.sequential else args.workers

    start = time.perf_counter()
    results = evaluate_queries(
        network, config, queries,
        monitored_runs=args.runs, epsilon=args.epsilon, alpha=args.alpha,
        confidence=args.confidence, leadsto_pending=args.leadsto_pending,
        workers=workers)
    elapsed = time.perf_counter() - start
    print(f"evaluated {len(results)} queries in {elapsed:.1f} s",
          file=sys.stderr)

    report = {
        "tool": f"robosmc {__version__}",
        "command": "check",
        "config": {
            "model": args.model,
            "options": args.options,
            "queries": texts,
            "horizon": args.horizon,
            "seed": seed,
            "runs": args.runs,
            "epsilon": args.epsilon,
            "alpha": args.alpha,
            "confidence": args.confidence,
            "thresholds": ([args.thresholds.t1, args.thresholds.t2,
                            args.thresholds.t3, args.thresholds.t4]
                           if args.thresholds else None),
            "leadsto_pending": args.leadsto_pending,
            "max_steps": args.max_steps,
            "sequential": bool(args.sequential),
        },
        "results": [r.to_dict() for r in results],
    }
    failed = [r for r in results
              if r.kind in FALSIFIABLE and r.verdict == "falsified"]
    report["failed"] = len(failed)
    body = json.dumps(report, indent=2) + "\n"

    if args.format == "json":
        print(body, end="")
    elif args.format == "csv":
        print(_results_csv(results), end="")
    else:
        print(_results_table(results), end="")

    if args.out_dir:
        out = Path(args.out_dir)
        _write(out / "report.json", body)
        _write(out / "report.txt", _results_table(results))
        for i, r in enumerate(results):
            if r.evidence is not None:
                _write(out / f"evidence_q{i + 1}_trial{r.evidence_trial}.csv",
                       trace_to_csv(r.evidence))

    if failed and not args.exit_zero:
        return 1
    return 0


def _numbered_queries(content: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        out.append((lineno, line))
    return out


def _results_table(results) -> str:
    rows = [(str(i + 1), r.query, r.label())
            for i, r in enumerate(results)]
    widths = [max((len(row[c]) for row in rows), default=1)
              for c in range(3)]
    header = ("#".rjust(widths[0]), "query".ljust(widths[1]), "result")
    lines = ["  ".join(header).rstrip()]
    lines.append("-" * min(100, sum(widths) + 4))
    for num, query, label in rows:
        lines.append("  ".join((num.rjust(widths[0]),
                                query.ljust(widths[1]), label)).rstrip())
    return "\n".join(lines) + "\n"


def _results_csv(results) -> str:
    import csv
    import io
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "query", "kind", "verdict", "estimate",
                     "ci_lo", "ci_hi", "runs_used", "evidence_trial"])
    for i, r in enumerate(results):
        writer.writerow([
            i + 1, r.query, r.kind, r.verdict,
            "" if r.estimate is None else f"{r.estimate:.6f}",
            "" if r.ci is None else f"{r.ci[0]:.6f}",
            "" if r.ci is None else f"{r.ci[1]:.6f}",
            r.runs_used,
            "" if r.evidence_trial is None else r.evidence_trial,
        ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    network = _resolve(args)
    seed = _pick_seed(args)
    config = _config(args, seed)
    monitors = tuple(Monitor(text, text) for text in args.monitor or [])
    out = Path(args.out_dir)

    tracked = [v for v in ("energy", "energy2", "arrivals")
               if any(var.name == v for var in network.variables)]
    runs = []
    for trial in range(args.runs):
        trace = simulate_run(network, config, monitors, trial=trial)
        _write(out / f"trace_{trial:03d}.csv", trace_to_csv(trace))
        final = trace.final_state
        entry = {
            "trial": trial,
            "final_time": round(final.time, 6),
            "terminated_by": trace.terminated_by,
            "events": len(trace.events),
        }
        for v in tracked:
            entry[v] = round(final.valuation[v], 6)
        window = final.aux.get("predictor")
        if window is not None:
            entry["goIdle_history"] = [d.go_idle for d in window.decisions]
        runs.append(entry)

    summary = {
        "tool": f"robosmc {__version__}",
        "command": "simulate",
        "config": {
            "model": args.model,
            "options": args.options,
            "horizon": args.horizon,
            "seed": seed,
            "runs": args.runs,
            "monitors": list(args.monitor or []),
            "max_steps": args.max_steps,
        },
        "runs": runs,
    }
    _write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    print(f"wrote {args.runs} trace(s) and summary.json to {out}",
          file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# predictor
# ---------------------------------------------------------------------------

def cmd_predictor(args) -> int:
    values = []
    content = Path(args.arrivals).read_text(encoding="utf-8")
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            value = float(line)
        except ValueError:
            raise MalformedLine(
                f"{args.arrivals}:{lineno}: not a number: {line!r}") from None
        if value < 0:
            raise MalformedLine(
                f"{args.arrivals}:{lineno}: negative arrival gap {value}")
        values.append(value)

    window = replay(values, thresholds=args.thresholds)
    lines = ["batch,TI1,TI2,TI3,TI4,TI5,q2,q3,goIdle"]
    for batch, d in enumerate(window.decisions, start=1):
        lines.append(",".join(map(str, (
            batch, *d.counts, d.fast_count, d.slow_count, d.go_idle))))
    body = "\n".join(lines) + "\n"

    if args.out:
        _write(Path(args.out), body)
    else:
        print(body, end="")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robosmc",
        description="Statistical model checking for stochastic hybrid "
                    "automata networks.")
    parser.add_argument("--version", action="version",
                        version=f"robosmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser(
        "check", help="evaluate queries against a model")
    _add_model_args(check)
    _add_sim_args(check)
    check.add_argument("--queries", metavar="FILE",
                       help="query file (one per line, # comments) or the "
                            "word 'builtin' for the bundled suite")
    check.add_argument("--query", action="append", metavar="TEXT",
                       help="inline query (repeatable)")
    check.add_argument("--runs", type=int, default=1000,
                       help="runs per monitored query (default 1000)")
    check.add_argument("--epsilon", type=float, default=0.05,
                       help="probability estimate half-width (default 0.05)")
    check.add_argument("--alpha", type=float, default=0.05,
                       help="probability estimate error level (default 0.05)")
    check.add_argument("--confidence", type=float, default=0.95,
                       help="expectation CI level (default 0.95)")
    check.add_argument("--leadsto-pending", choices=(CENSOR, VIOLATE),
                       default=CENSOR,
                       help="how to score leads-to obligations still open "
                            "at the horizon (default censor)")
    check.add_argument("--format", choices=("table", "json", "csv"),
                       default="table", help="stdout format (default table)")
    check.add_argument("--out-dir", metavar="DIR",
                       help="also write report.json, report.txt and "
                            "evidence traces here")
    check.add_argument("--workers", type=int,
                       help="worker processes for run batches")
    check.add_argument("--sequential", action="store_true",
                       help="force single-process evaluation")
    check.add_argument("--exit-zero", action="store_true",
                       help="exit 0 even when a safety query is falsified")
    check.set_defaults(fn=cmd_check)

    sim = sub.add_parser("simulate", help="sample trajectories to CSV")
    _add_model_args(sim)
    _add_sim_args(sim)
    sim.add_argument("--runs", type=int, default=1,
                     help="number of trajectories (default 1)")
    sim.add_argument("--monitor", action="append", metavar="EXPR",
                     help="expression sampled at every event (repeatable)")
    sim.add_argument("--out-dir", default="simout", metavar="DIR",
                     help="directory for traces and summary (default simout)")
    sim.set_defaults(fn=cmd_simulate)

    pred = sub.add_parser(
        "predictor", help="replay an arrival log through the predictor")
    pred.add_argument("--arrivals", required=True, metavar="FILE",
                      help="text file with one arrival gap per line")
    pred.add_argument("--thresholds", type=_thresholds, metavar="T1,T2,T3,T4",
                      help="histogram thresholds (default the model's)")
    pred.add_argument("--out", metavar="FILE",
                      help="write the decision CSV here instead of stdout")
    pred.set_defaults(fn=cmd_predictor)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ModelError, ParseError, ModelFileError, MalformedLine) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
