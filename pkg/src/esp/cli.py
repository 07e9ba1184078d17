"""Command-line interface.

Verbs mirror the pipeline stages: ``analyze``, ``assess``, ``mitigate``,
``hide``, ``report``, ``plan``, plus ``serve`` for the HTTP API and UI.
``--json`` prints the produced artifact to stdout; ``--seed`` is accepted
and reserved for future stochastic features.
"""

from __future__ import annotations

import argparse
import json
import sys

from .canonical import canonical_dumps
from .errors import EspError, StageError
from .model import OVERHEAD_NAMES, OverheadVector
from .session import MitigateOptions, SessionDir, analyze


def parse_budget(text: str, base: OverheadVector | None) -> OverheadVector:
    """``client_time=20,server_time=10``; unnamed components keep the KB
    budget value (0 when the KB sets none)."""
    values = base.as_dict() if base is not None else {name: 0.0 for name in OVERHEAD_NAMES}
    for piece in filter(None, (p.strip() for p in text.split(","))):
        name, sep, raw = piece.partition("=")
        name = name.strip()
        if not sep or name not in OVERHEAD_NAMES:
            raise EspError(f"bad budget component {piece!r} (expected name=value with name in {OVERHEAD_NAMES})")
        try:
            values[name] = float(raw)
        except ValueError:
            raise EspError(f"bad budget value {raw!r} for {name}")
    return OverheadVector(**values)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--session", help="session directory")
    parser.add_argument("--kb", help="knowledge base file")
    parser.add_argument("--seed", type=int, default=None, help="reserved")
    parser.add_argument("--json", action="store_true", help="print the produced artifact as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esp", description="software-protection risk analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="scan sources / load a model and frame the session")
    p.add_argument("--src", help="annotated C source tree")
    p.add_argument("--model", help="pre-built application-model JSON file")
    p.add_argument("--out", required=True, help="session directory to create")
    _common(p)

    p = sub.add_parser("assess", help="infer and score attack paths")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--max-paths", type=int, default=None)
    _common(p)

    p = sub.add_parser("report", help="regenerate the risk report")
    _common(p)

    p = sub.add_parser("mitigate", help="enumerate and rank protection solutions")
    p.add_argument("--budget", help="overhead budgets, e.g. client_time=20,client_memory=30")
    p.add_argument("--lmax", type=int, default=None)
    p.add_argument("--effort", type=int, default=None)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--beam", type=int, default=None)
    _common(p)

    p = sub.add_parser("hide", help="refine a solution with asset hiding")
    p.add_argument("--solution", default="top", help="solution id (default: top-ranked)")
    p.add_argument("--solution-file", default=None, help="JSON file with an edited solution to refine")
    p.add_argument("--gamma", type=int, default=None)
    _common(p)

    p = sub.add_parser("plan", help="export a deployment plan")
    p.add_argument("--solution", default="top", help="solution id, 'top' or 'hidden'")
    _common(p)

    p = sub.add_parser("serve", help="serve the HTTP API and UI")
    p.add_argument("--root", required=True, help="directory holding session directories")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8437)
    p.add_argument("--static", default=None, help="built UI bundle to serve at /")
    _common(p)

    return parser


def _require_session(args) -> SessionDir:
    if not args.session:
        raise EspError("--session is required")
    return SessionDir(args.session)


def _emit(args, doc, summary: str) -> None:
    if args.json:
        sys.stdout.write(canonical_dumps(doc))
    else:
        print(summary)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.message}", file=sys.stderr)
        return 2
    except EspError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "analyze":
        session = analyze(args.kb, args.out, src=args.src, model_path=args.model)
        sd = SessionDir(args.out)
        _emit(args, sd.manifest(), f"session {session.hash[:12]} written to {args.out}")
        return 0

    if args.command == "assess":
        sd = _require_session(args)
        doc = sd.assess(args.max_depth, args.max_paths)
        _emit(
            args,
            doc,
            f"{len(doc['paths'])} attack paths ({doc['gated_out']} gated out of {doc['total_inferred']})",
        )
        return 0

    if args.command == "report":
        sd = _require_session(args)
        doc = sd.report()
        _emit(args, doc, f"application risk {doc['application_risk']:.4f} over {len(doc['paths'])} paths")
        return 0

    if args.command == "mitigate":
        sd = _require_session(args)
        session = sd.load()
        budgets = None
        if args.budget is not None:
            budgets = parse_budget(args.budget, session.kb.thresholds.budgets)
        options = MitigateOptions(
            budgets=budgets, lmax=args.lmax, effort=args.effort, top=args.top, beam=args.beam
        )
        doc = sd.run_mitigation(options)
        top = doc["solutions"][0] if doc["solutions"] else None
        summary = (
            f"{doc['candidates_played']} candidates played; top solution "
            f"{top['id']} P={top['protection_index']:.4f} game={top['game_value']:.4f}"
            if top
            else "no candidates"
        )
        _emit(args, doc, summary)
        return 0

    if args.command == "hide":
        sd = _require_session(args)
        solution_doc = None
        if args.solution_file:
            with open(args.solution_file, "r", encoding="utf-8") as fh:
                solution_doc = json.load(fh)
        doc = sd.run_hiding(args.solution, gamma=args.gamma, solution_doc=solution_doc)
        _emit(
            args,
            doc,
            f"confusion {doc['confusion_index']:.4f} ({doc['status']}); "
            f"{len(doc['selected'])} hiding deployments on top of {doc['base']}",
        )
        return 0

    if args.command == "plan":
        sd = _require_session(args)
        doc = sd.export_plan(args.solution)
        _emit(args, doc, f"plan {doc['plan_hash'][:12]} with {len(doc['directives'])} directives")
        return 0

    if args.command == "serve":
        import uvicorn

        from .api import create_app

        app = create_app(args.root, static_dir=args.static)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    raise EspError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
