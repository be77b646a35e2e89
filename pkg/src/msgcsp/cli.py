"""Command-line driver.

Every subcommand prints a short human-readable summary to stdout and, with
``--out``, writes its JSON artifact (stable key order) to a file.  Exit
status is 0 only when every check the command performed passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .core import (
    ConstraintSystem,
    MAX_LINEAR_EXTENSION_EVENTS,
    Trace,
    assign_lamport_clocks,
    build_pomset,
    canonical_json,
    count_linear_extensions,
    derive_happens_before,
    validate_partial_order,
)
from .errors import DeadlockError, MsgCspError, OrderViolationError
from .realizer import realize, terminal_outcome_set
from .reflink import sweep
from .simulator import Scenario, choices_from_values, enumerate_outcomes, load_scenario, run_scenario
from .solver import solve_bruteforce, solve_search
from .trace2csp import compile_trace

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_DEADLOCK = 3


def _fmt(v: Sequence[str]) -> str:
    return json.dumps(list(v), ensure_ascii=False)


def _emit(args: argparse.Namespace, payload: Any) -> None:
    if args.out:
        text = payload if isinstance(payload, str) else canonical_json(payload)
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [tok.strip() for tok in text.split(",")]


def _resolve_choices(s: Scenario, tokens: list[str]) -> dict:
    """Map CLI tokens to choice values; ``v1`` is shorthand for ``c(v1)`` when unambiguous."""
    resolved = []
    for (p, _), tok in zip(s.choice_points, tokens):
        dom = s.domains[p]
        if tok not in dom and f"c({tok})" in dom:
            tok = f"c({tok})"
        resolved.append(tok)
    resolved.extend(tokens[len(s.choice_points):])
    return choices_from_values(s, resolved)


def cmd_simulate(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    trace = run_scenario(s, args.seed, _resolve_choices(s, _split(args.choices)))
    final = trace.final_valuation
    accepted = s.acceptance.accepts(final)
    print(f"scenario {s.name}  seed {args.seed}")
    print(f"events {len(trace.events)}  observations {len(trace.observations)}")
    print(f"final valuation {_fmt(final)}")
    print(f"verdict {'ACCEPTED' if accepted else 'REJECTED'}")
    _emit(args, trace.to_json())
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    outcomes = enumerate_outcomes(s)
    print(f"scenario {s.name}: {len(outcomes)} accepted outcome(s)")
    for v in outcomes:
        print(f"  {_fmt(v)}")
    _emit(args, [list(v) for v in outcomes])
    return EXIT_OK


def cmd_compile(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    trace = Trace.from_json(Path(args.trace).read_text(encoding="utf-8")) if args.trace else None
    csp = compile_trace(s, trace, factor=args.factor)
    print(f"scenario {s.name}: {csp.n} participants, {len(csp.constraints)} constraint(s)")
    for i, d in enumerate(csp.domains):
        print(f"  S{i} = {_fmt(d)}")
    if csp.unsatisfiable_by_evidence:
        print(f"  unsatisfiable by evidence: emptied {sorted(csp.emptied)}")
    _emit(args, csp.to_json())
    return EXIT_OK


def _load_csp(path: str) -> ConstraintSystem:
    return ConstraintSystem.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_solve(args: argparse.Namespace) -> int:
    csp = _load_csp(args.csp)
    sols = solve_search(csp) if args.method == "search" else solve_bruteforce(csp)
    print(f"{len(sols)} solution(s) ({args.method})")
    for v in sols:
        print(f"  {_fmt(v)}")
    _emit(args, [list(v) for v in sols])
    return EXIT_OK


def cmd_realize(args: argparse.Namespace) -> int:
    csp = _load_csp(args.csp)
    start = _split(args.start) if args.start else [d[0] for d in csp.domains]
    run = realize(csp, start, args.seed)
    print(f"start {_fmt(run.start)}  seed {args.seed}  rounds {run.rounds}  "
          f"certificates {len(run.transcript)}")
    print(run.outcome_line())
    _emit(args, run.to_dict())
    return EXIT_OK


def equivalence_report(s: Scenario, seed: int = 0) -> dict[str, Any]:
    outcomes = enumerate_outcomes(s)
    csp = compile_trace(s)
    brute = solve_bruteforce(csp)
    search = solve_search(csp)
    realized = terminal_outcome_set(csp, seed)
    rejects = sum(1 for v in csp.valuations() if not realize(csp, v, seed).accepted)
    same = set(outcomes) == set(brute) == set(search) == set(realized)
    return {
        "scenario": s.name,
        "seed": seed,
        "enumerate_outcomes": [list(v) for v in outcomes],
        "compile_solve_bruteforce": [list(v) for v in brute],
        "compile_solve_search": [list(v) for v in search],
        "realizer_terminal_outcomes": [list(v) for v in realized],
        "realizer_starts": csp.product_size(),
        "realizer_rejects": rejects,
        "result": "PASS" if same else "FAIL",
    }


def cmd_equivalence(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    report = equivalence_report(s, args.seed)
    print(f"scenario {s.name}")
    for key in ("enumerate_outcomes", "compile_solve_bruteforce", "compile_solve_search",
                "realizer_terminal_outcomes"):
        vals = report[key]
        print(f"  {key:28s} {len(vals):4d}  {' '.join(_fmt(v) for v in vals)}")
    print(f"  realizer starts {report['realizer_starts']}, REJECT from {report['realizer_rejects']}")
    print(report["result"])
    _emit(args, report)
    return EXIT_OK if report["result"] == "PASS" else EXIT_CHECK_FAILED


def analyze_trace(trace: Trace) -> dict[str, Any]:
    rel = derive_happens_before(trace)
    report = validate_partial_order(rel)
    out: dict[str, Any] = {
        "events": len(trace.events),
        "partial_order": {
            "ok": report.ok,
            "violations": [{"axiom": v.axiom, "events": list(v.events)} for v in report.violations],
        },
    }
    if not report.ok:
        out.update(clocks=None, clocks_monotone=False, pomset=None, linear_extensions=None)
        return out
    clocks = assign_lamport_clocks(trace)
    bad = [[a, b] for a, b in sorted(rel.pairs) if not clocks[a] < clocks[b]]
    pomset = build_pomset(trace)
    out["clocks"] = {e.id: clocks[e.id] for e in trace.events}
    out["clocks_monotone"] = not bad
    out["clock_violations"] = bad
    out["pomset"] = {
        "labels": {eid: [p, kind] for eid, (p, kind) in sorted(pomset.labels.items())},
        "order_pairs": len(rel.pairs),
        "incomparable_pairs": len(pomset.incomparable_pairs()),
        "total": pomset.is_total(),
    }
    out["linear_extensions"] = (
        count_linear_extensions(pomset) if len(pomset) <= MAX_LINEAR_EXTENSION_EVENTS else None)
    return out


def cmd_analyze(args: argparse.Namespace) -> int:
    trace = Trace.from_json(Path(args.trace).read_text(encoding="utf-8"))
    report = analyze_trace(trace)
    po = report["partial_order"]
    print(f"trace {trace.scenario or '<unnamed>'}: {report['events']} events")
    print(f"partial order: {'ok' if po['ok'] else 'VIOLATED'}")
    for v in po["violations"]:
        print(f"  {v['axiom']}: {', '.join(v['events'])}")
    if report["clocks"] is not None:
        print("lamport clocks:")
        for ev in trace.events:
            print(f"  {ev.id:10s} P{ev.process} {ev.kind.value:8s} t={report['clocks'][ev.id]}")
        print(f"clock monotonicity: {'ok' if report['clocks_monotone'] else 'VIOLATED'}")
        pom = report["pomset"]
        print(f"pomset: {report['events']} events, {pom['order_pairs']} ordered pairs, "
              f"{pom['incomparable_pairs']} incomparable pairs")
        le = report["linear_extensions"]
        print(f"linear extensions: {le if le is not None else f'skipped (> {MAX_LINEAR_EXTENSION_EVENTS} events)'}")
    _emit(args, report)
    return EXIT_OK if po["ok"] and report["clocks_monotone"] else EXIT_CHECK_FAILED


def cmd_link(args: argparse.Namespace) -> int:
    report = sweep(args.loss, args.attempts, args.seeds)
    print(f"reflective link sweep: {args.seeds} seeds per rate, max_attempts={args.attempts}")
    for rate in report["rates"]:
        pairs = "  ".join(f"{k}={v}" for k, v in rate["pairs"].items())
        print(f"  p={rate['loss']:<5} divergences={rate['divergences']}  {pairs}")
    print("ok" if report["ok"] else "DIVERGENCE OBSERVED")
    _emit(args, report)
    return EXIT_OK if report["ok"] else EXIT_CHECK_FAILED


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _loss(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("loss must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msgcsp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write the JSON artifact here")
        return p

    p = add("simulate", cmd_simulate, "run a scenario once and record its trace")
    p.add_argument("scenario")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--choices", help="comma list of values for the choice points, in script order")

    p = add("enumerate", cmd_enumerate, "exhaustively list accepted outcomes")
    p.add_argument("scenario")

    p = add("compile", cmd_compile, "compile a scenario (and optional trace) to a CSP")
    p.add_argument("scenario")
    p.add_argument("--trace", help="trace JSON produced by 'simulate'")
    p.add_argument("--factor", action="store_true", help="pairwise constraints for rule predicates")

    p = add("solve", cmd_solve, "solve a CSP file")
    p.add_argument("csp")
    p.add_argument("--method", choices=("search", "bruteforce"), default="search")

    p = add("realize", cmd_realize, "run the certificate-exchange protocol on a CSP file")
    p.add_argument("csp")
    p.add_argument("--start", help="comma list of initial proposals (default: first values)")
    p.add_argument("--seed", type=_seed, default=0)

    p = add("equivalence", cmd_equivalence, "check both representation directions on a scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=_seed, default=0)

    p = add("analyze", cmd_analyze, "order analysis of a trace")
    p.add_argument("trace")

    p = add("link", cmd_link, "seeded sweep of the reflective link")
    p.add_argument("--loss", type=_loss, nargs="+", default=[0.0, 0.1, 0.3, 0.7, 1.0])
    p.add_argument("--attempts", type=int, default=5)
    p.add_argument("--seeds", type=int, default=1000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DeadlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEADLOCK
    except OrderViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (MsgCspError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
