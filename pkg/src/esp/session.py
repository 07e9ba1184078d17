"""Session persistence and pipeline orchestration.

A session directory holds the canonical KB and application-model documents
plus one JSON artifact per completed stage (assessment, mitigation, hiding)
and exported deployment plans. Artifacts are canonical JSON with no
timestamps, so identical inputs produce byte-identical directories. Every
artifact records the session hash it was computed from; editing the framing
data changes the hash and thereby marks older artifacts as stale.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import hiding as hiding_mod
from .attacks import AttackPath, InferenceLimits, PathStep, gate_by_attacker, infer_paths
from .canonical import content_hash, sha256_hex, write_canonical
from .errors import Diagnostic, EspError, StageError, UnknownSolutionError
from .ingest import scan_sources, with_secondary_assets
from .mitigation import (
    Assignment,
    Evaluator,
    SearchOptions,
    Solution,
    estimate_overhead,
    mitigate,
    play_game,
)
from .model import (
    ApplicationModel,
    Asset,
    AttackerModel,
    KnowledgeBase,
    MetricVector,
    OverheadVector,
    Session,
    Thresholds,
    app_from_doc,
    app_to_doc,
    kb_from_doc,
    kb_to_doc,
    load_app,
    load_kb,
    snapshot,
    validate_app,
    validate_kb,
)
from .risk import aggregate, report_markdown

MANIFEST = "manifest.json"
KB_FILE = "kb.json"
APP_FILE = "app_model.json"
ATTACKS_FILE = "attacks.json"
REPORT_FILE = "risk_report.json"
REPORT_MD_FILE = "risk_report.md"
SOLUTIONS_FILE = "solutions.json"
HIDDEN_FILE = "hidden_solution.json"
LP_FILE = "hiding_model.lp"
FAILED_MARKER = "FAILED"


@dataclass
class MitigateOptions:
    budgets: OverheadVector | None = None
    lmax: int | None = None
    effort: int | None = None
    beam: int | None = None
    top: int = 10
    search: SearchOptions = SearchOptions()


class SessionDir:
    """One risk-analysis session on disk."""

    def __init__(self, path: str):
        self.path = str(path)

    # -- plumbing ---------------------------------------------------------

    def _file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def exists(self) -> bool:
        return os.path.isfile(self._file(MANIFEST))

    def read_json(self, name: str) -> dict:
        import json

        with open(self._file(name), "r", encoding="utf-8") as fh:
            return json.load(fh)

    def write_artifact(self, name: str, doc) -> None:
        write_canonical(self._file(name), doc)

    def manifest(self) -> dict:
        return self.read_json(MANIFEST)

    def _update_manifest(self, **changes) -> None:
        doc = self.manifest() if self.exists() else {"stages": {}, "plans": {}}
        stages = changes.pop("stages", None)
        if stages:
            doc.setdefault("stages", {}).update(stages)
        plans = changes.pop("plans", None)
        if plans:
            doc.setdefault("plans", {}).update(plans)
        doc.update(changes)
        write_canonical(self._file(MANIFEST), doc)

    def _fail(self, stage: str, error: EspError) -> None:
        self._update_manifest(stages={stage: {"status": "FAILED", "error": error.to_dict(stage)}})
        write_canonical(self._file(FAILED_MARKER), {"stage": stage, "message": error.message})

    def _clear_failure(self) -> None:
        marker = self._file(FAILED_MARKER)
        if os.path.exists(marker):
            os.remove(marker)

    def load(self) -> Session:
        kb = load_kb(self._file(KB_FILE))
        app = load_app(self._file(APP_FILE))
        return snapshot(kb, app)

    # -- framing ----------------------------------------------------------

    def init_from(self, kb: KnowledgeBase, app: ApplicationModel) -> Session:
        os.makedirs(self.path, exist_ok=True)
        kb_bytes = write_canonical(self._file(KB_FILE), kb_to_doc(kb))
        app_bytes = write_canonical(self._file(APP_FILE), app_to_doc(app))
        session = snapshot(kb, app)
        self._update_manifest(
            session=session.hash,
            kb_hash=sha256_hex(kb_bytes),
            app_hash=sha256_hex(app_bytes),
            stages={"framing": {"status": "ok", "session": session.hash}},
        )
        self._clear_failure()
        return session

    def framing_doc(self) -> dict:
        session = self.load()
        return {
            "session": session.hash,
            "assets": [
                {
                    "part": a.part,
                    "requirements": sorted(a.requirements),
                    "weight": float(a.weight),
                    "role": a.role,
                }
                for a in sorted(session.app.assets, key=lambda a: a.part)
            ],
            "attacker": {
                "expertise": session.kb.attacker.expertise,
                "effort_budget": session.kb.attacker.effort_budget,
            },
            "budgets": session.kb.thresholds.budgets.as_dict() if session.kb.thresholds.budgets else None,
            "parts": [
                {"id": p.id, "kind": p.kind, "name": p.name}
                for p in sorted(session.app.parts, key=lambda p: p.id)
            ],
            "catalog": [
                {
                    "id": pi.id,
                    "protection": pi.protection,
                    "config": pi.config,
                    "requirements": sorted(session.kb.protections_by_id[pi.protection].requirements)
                    if pi.protection in session.kb.protections_by_id
                    else [],
                }
                for pi in sorted(session.kb.protection_instances, key=lambda pi: pi.id)
            ],
        }

    def update_framing(self, framing: dict) -> tuple[list[Diagnostic], Session | None]:
        """Apply edited assets / attacker / budgets; rejected when the edit
        violates model invariants. Returns (diagnostics, new session)."""
        kb = load_kb(self._file(KB_FILE))
        app = load_app(self._file(APP_FILE))

        if "assets" in framing:
            assets = [
                Asset(
                    part=str(a["part"]),
                    requirements=frozenset(str(r) for r in a.get("requirements", [])),
                    weight=float(a.get("weight", 1.0)),
                    role=str(a.get("role", "primary")),
                )
                for a in framing["assets"]
            ]
            app = ApplicationModel(
                parts=list(app.parts),
                assets=assets,
                call_edges=list(app.call_edges),
                adjacency=list(app.adjacency),
            )
        if "attacker" in framing:
            doc = framing["attacker"] or {}
            if "effort_budget" in doc:
                effort = None if doc["effort_budget"] is None else int(doc["effort_budget"])
            else:
                effort = kb.attacker.effort_budget
            kb.attacker = AttackerModel(
                expertise=str(doc.get("expertise", kb.attacker.expertise)),
                effort_budget=effort,
            )
        if "budgets" in framing:
            budgets = framing["budgets"]
            thr = kb.thresholds
            kb.thresholds = Thresholds(
                max_depth=thr.max_depth,
                max_paths_per_asset=thr.max_paths_per_asset,
                secondary_asset_depth=thr.secondary_asset_depth,
                secondary_asset_factor=thr.secondary_asset_factor,
                lmax=thr.lmax,
                beam_width=thr.beam_width,
                aggregator=thr.aggregator,
                metric_bands=thr.metric_bands,
                budgets=OverheadVector.from_dict(budgets) if budgets is not None else None,
            )

        diagnostics = [d for d in validate_kb(kb) + validate_app(app) if d.severity == "error"]
        if diagnostics:
            return diagnostics, None
        return [], self.init_from(kb, app)

    # -- assessment -------------------------------------------------------

    def assess(self, max_depth: int | None = None, max_paths: int | None = None) -> dict:
        session = self.load()
        limits = InferenceLimits(
            max_depth or session.kb.thresholds.max_depth,
            max_paths or session.kb.thresholds.max_paths_per_asset,
        )
        paths = infer_paths(session, limits)
        gated = gate_by_attacker(paths, session.kb.attacker, session.kb)
        attacks_doc = {
            "session": session.hash,
            "limits": {"max_depth": limits.max_depth, "max_paths_per_asset": limits.max_paths_per_asset},
            "attacker": {
                "expertise": session.kb.attacker.expertise,
                "effort_budget": session.effort_budget,
            },
            "total_inferred": len(paths),
            "gated_out": len(paths) - len(gated),
            "paths": [p.to_dict() for p in gated],
        }
        report = aggregate(session, gated)
        report_doc = report.to_doc(session.app)
        self.write_artifact(ATTACKS_FILE, attacks_doc)
        self.write_artifact(REPORT_FILE, report_doc)
        with open(self._file(REPORT_MD_FILE), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report_markdown(report_doc))
        self._update_manifest(
            stages={
                "assessment": {
                    "status": "ok",
                    "session": session.hash,
                    "kb_hash": self.manifest().get("kb_hash"),
                    "artifacts": [ATTACKS_FILE, REPORT_FILE, REPORT_MD_FILE],
                }
            }
        )
        return attacks_doc

    def report(self) -> dict:
        """Regenerate the risk report from the stored attack paths."""
        session = self.load()
        gated = self.load_paths()
        report_doc = aggregate(session, gated).to_doc(session.app)
        self.write_artifact(REPORT_FILE, report_doc)
        with open(self._file(REPORT_MD_FILE), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report_markdown(report_doc))
        return report_doc

    def load_paths(self) -> list[AttackPath]:
        doc = self.read_json(ATTACKS_FILE)
        return [
            AttackPath(
                asset=p["asset"],
                requirement=p["requirement"],
                steps=tuple(
                    PathStep(rule=s["rule"], binding=tuple(sorted(s.get("binding", {}).items())))
                    for s in p["steps"]
                ),
            )
            for p in doc["paths"]
        ]

    # -- mitigation -------------------------------------------------------

    def run_mitigation(self, options: MitigateOptions | None = None) -> dict:
        options = options or MitigateOptions()
        session = self.load()
        paths = self.load_paths()
        budgets = options.budgets if options.budgets is not None else session.kb.thresholds.budgets
        lmax = options.lmax or session.kb.thresholds.lmax
        effort = options.effort if options.effort is not None else session.effort_budget
        beam = options.beam or session.kb.thresholds.beam_width
        ranked = mitigate(
            session,
            paths,
            budgets=budgets,
            lmax=lmax,
            effort=effort,
            beam=beam,
            search=options.search,
        )
        doc = {
            "session": session.hash,
            "budgets": budgets.as_dict() if budgets is not None else None,
            "lmax": lmax,
            "effort": effort,
            "beam": beam,
            "candidates_played": len(ranked),
            "solutions": [sol.to_doc(value) for sol, value in ranked[: options.top]],
        }
        self.write_artifact(SOLUTIONS_FILE, doc)
        self._update_manifest(
            stages={
                "mitigation": {
                    "status": "ok",
                    "session": session.hash,
                    "kb_hash": self.manifest().get("kb_hash"),
                    "artifacts": [SOLUTIONS_FILE],
                }
            }
        )
        return doc

    def _solution_from_doc(self, doc: dict) -> Solution:
        assignment: Assignment = tuple(
            sorted((part, tuple(seq)) for part, seq in doc["sequences"].items() if seq)
        )
        return Solution(
            assignment=assignment,
            predicted_metrics={
                part: MetricVector.from_dict(m) for part, m in doc.get("predicted_metrics", {}).items()
            },
            overhead=OverheadVector.from_dict(doc["overhead"]),
            protection_index=float(doc["protection_index"]),
            discouraged_penalty=float(doc.get("discouraged_penalty", 1.0)),
            enlargements=tuple(
                (e["part"], e["extends_to"], e["pi"]) for e in doc.get("enlargements", [])
            ),
        )

    def find_solution(self, solution_id: str) -> tuple[Solution, dict]:
        if os.path.isfile(self._file(SOLUTIONS_FILE)):
            for sdoc in self.read_json(SOLUTIONS_FILE)["solutions"]:
                if sdoc["id"] == solution_id or solution_id == "top":
                    return self._solution_from_doc(sdoc), sdoc
        if os.path.isfile(self._file(HIDDEN_FILE)):
            sdoc = self.read_json(HIDDEN_FILE)["solution"]
            if solution_id in ("hidden", sdoc["id"]):
                return self._solution_from_doc(sdoc), sdoc
        raise UnknownSolutionError(f"no solution {solution_id!r} in this session")

    # -- what-if ----------------------------------------------------------

    def evaluate_what_if(self, edited: dict) -> dict:
        """Validate and score an edited solution without touching artifacts."""
        session = self.load()
        kb, app = session.kb, session.app
        diagnostics: list[Diagnostic] = []

        if "sequences" in edited:
            raw = [(part, list(seq)) for part, seq in sorted(edited["sequences"].items())]
        else:
            by_part: dict[str, list[str]] = {}
            for entry in edited.get("applied", []):
                by_part.setdefault(str(entry["part"]), []).append(str(entry["pi"]))
            raw = sorted(by_part.items())

        known = True
        for part, seq in raw:
            if part not in app.parts_by_id:
                diagnostics.append(Diagnostic("error", part, f"unknown part `{part}`"))
                known = False
            for pi in seq:
                if pi not in kb.pis_by_id:
                    diagnostics.append(Diagnostic("error", pi, f"unknown protection instance `{pi}`"))
                    known = False
        if not known:
            return {
                "valid": False,
                "diagnostics": [d.to_dict() for d in diagnostics],
                "protection_index": None,
                "game_value": None,
                "overhead": None,
            }

        assignment: Assignment = tuple((part, tuple(seq)) for part, seq in raw if seq)
        lmax = kb.thresholds.lmax
        budgets = kb.thresholds.budgets
        if os.path.isfile(self._file(SOLUTIONS_FILE)):
            sol_doc = self.read_json(SOLUTIONS_FILE)
            lmax = sol_doc.get("lmax", lmax)
            budgets = OverheadVector.from_dict(sol_doc["budgets"]) if sol_doc.get("budgets") else None

        forbidden = set(kb.precedence.forbidden)
        for part, seq in assignment:
            if len(seq) > lmax:
                diagnostics.append(
                    Diagnostic("error", part, f"sequence length {len(seq)} exceeds lmax {lmax}")
                )
            singles: set[str] = set()
            for pi in set(seq):
                if seq.count(pi) > kb.hiding.gamma:
                    diagnostics.append(
                        Diagnostic("error", part, f"instance {pi} deployed more than gamma={kb.hiding.gamma} times")
                    )
            for pi in seq:
                protection = kb.protection_of(pi)
                if protection.singleton:
                    if protection.id in singles:
                        diagnostics.append(
                            Diagnostic("error", part, f"singleton protection {protection.id} applied twice")
                        )
                    singles.add(protection.id)
            for i, earlier in enumerate(seq):
                for later in seq[i + 1 :]:
                    if (earlier, later) in forbidden:
                        diagnostics.append(
                            Diagnostic("error", part, f"forbidden pair ({earlier}, {later})")
                        )

        seq_by_part = dict(assignment)
        for group in kb.precedence.correlation_sets:
            present = [p for p in group if p in app.parts_by_id]
            sequences = {tuple(seq_by_part.get(p, ())) for p in present}
            if len(sequences) > 1:
                diagnostics.append(
                    Diagnostic("error", ",".join(sorted(present)), "correlated parts carry different sequences")
                )

        overhead = estimate_overhead(assignment, session)
        if not overhead.within(budgets):
            over = [
                comp
                for comp in overhead.as_dict()
                if budgets is not None and overhead.get(comp) > budgets.get(comp) + 1e-9
            ]
            diagnostics.append(
                Diagnostic("error", ",".join(over), f"overhead exceeds budget on {', '.join(over)}")
            )

        paths = self.load_paths() if os.path.isfile(self._file(ATTACKS_FILE)) else []
        evaluator = Evaluator(session, paths)
        solution = evaluator.build_solution(assignment)
        ranked = play_game(session, [solution], effort=session.effort_budget, evaluator=evaluator)
        game_value = ranked[0][1]

        return {
            "valid": not any(d.severity == "error" for d in diagnostics),
            "diagnostics": [d.to_dict() for d in diagnostics],
            "protection_index": solution.protection_index,
            "game_value": game_value,
            "overhead": overhead.as_dict(),
            "predicted_metrics": {p: m.as_dict() for p, m in sorted(solution.predicted_metrics.items())},
            "solution": solution.to_doc(game_value),
        }

    # -- hiding -----------------------------------------------------------

    def run_hiding(
        self,
        solution_id: str = "top",
        gamma: int | None = None,
        solution_doc: dict | None = None,
    ) -> dict:
        """Refine a ranked solution, or an accepted what-if edit passed as an
        inline solution document."""
        session = self.load()
        if solution_doc is not None:
            base = self._solution_from_doc(solution_doc)
        else:
            base, _ = self.find_solution(solution_id)
        model = hiding_mod.build_model(session, base, gamma=gamma)
        result = hiding_mod.solve(model, node_cap=session.kb.hiding.node_cap)
        paths = self.load_paths() if os.path.isfile(self._file(ATTACKS_FILE)) else []
        evaluator = Evaluator(session, paths)
        hidden = hiding_mod.translate(result, base, session, model, evaluator=evaluator)
        ranked = play_game(session, [hidden], effort=session.effort_budget, evaluator=evaluator)
        doc = {
            "session": session.hash,
            "base": base.id,
            "gamma": model.gamma,
            "confusion_index": result.confusion.value,
            "status": result.status,
            "variables": len(model.variables),
            "rows": len(model.rows),
            "selected": [
                {
                    "name": v.name,
                    "kind": v.kind,
                    "pi": v.pi,
                    "part": v.part,
                    "replica": v.replica,
                    "extends_to": v.extends_to,
                }
                for v in result.selected(model)
            ],
            "solution": hidden.to_doc(ranked[0][1]),
        }
        with open(self._file(LP_FILE), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(hiding_mod.lp_format(model))
        self.write_artifact(HIDDEN_FILE, doc)
        self._update_manifest(
            stages={
                "hiding": {
                    "status": "ok",
                    "session": session.hash,
                    "kb_hash": self.manifest().get("kb_hash"),
                    "artifacts": [HIDDEN_FILE, LP_FILE],
                    "base": base.id,
                }
            }
        )
        return doc

    # -- deployment plan ---------------------------------------------------

    def export_plan(self, solution_id: str) -> dict:
        session = self.load()
        solution, _doc = self.find_solution(solution_id)
        directives = []
        for applied in solution.applied:
            pi = session.kb.pis_by_id.get(applied.pi)
            directives.append(
                {
                    "action": "apply",
                    "pi": applied.pi,
                    "part": applied.part,
                    "config": pi.config if pi is not None else "default",
                }
            )
        for part, extends_to, pi_id in solution.enlargements:
            pi = session.kb.pis_by_id.get(pi_id)
            directives.append(
                {
                    "action": "enlarge",
                    "pi": pi_id,
                    "part": extends_to,
                    "config": pi.config if pi is not None else "default",
                }
            )
        plan_hash = content_hash(directives)
        doc = {
            "session": session.hash,
            "solution": solution.id,
            "directives": directives,
            "plan_hash": plan_hash,
        }
        name = f"plan_{solution.id}.json"
        self.write_artifact(name, doc)
        self._update_manifest(plans={solution.id: {"file": name, "plan_hash": plan_hash}})
        return doc


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class PipelineOptions:
    max_depth: int | None = None
    max_paths: int | None = None
    mitigate: MitigateOptions | None = None
    gamma: int | None = None
    hide_solution: str = "top"


def analyze(kb_path: str, out_dir: str, src: str | None = None, model_path: str | None = None) -> Session:
    """Framing stage: load the KB, ingest sources or a model file, derive
    secondary assets, snapshot."""
    session_dir = SessionDir(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    try:
        if kb_path is None or not os.path.isfile(kb_path):
            raise EspError(f"knowledge base not found: {kb_path}")
        kb = load_kb(kb_path)
        if model_path is not None:
            app = load_app(model_path)
        elif src is not None:
            app = scan_sources(src)
        else:
            raise EspError("analyze needs --src or --model")
        app = with_secondary_assets(
            app,
            depth=kb.thresholds.secondary_asset_depth,
            factor=kb.thresholds.secondary_asset_factor,
        )
        errors = [d for d in validate_app(app) if d.severity == "error"]
        if errors:
            raise EspError("; ".join(f"{d.entity}: {d.message}" for d in errors))
    except EspError as exc:
        session_dir._fail("framing", exc)
        raise StageError("framing", exc.message, exc.refs) from exc
    return session_dir.init_from(kb, app)


def run_pipeline(
    kb_path: str,
    out_dir: str,
    src: str | None = None,
    model_path: str | None = None,
    options: PipelineOptions | None = None,
) -> SessionDir:
    """analyze -> assess -> mitigate -> hide, writing all artifacts."""
    options = options or PipelineOptions()
    analyze(kb_path, out_dir, src=src, model_path=model_path)
    session_dir = SessionDir(out_dir)
    for stage, runner in (
        ("assessment", lambda: session_dir.assess(options.max_depth, options.max_paths)),
        ("mitigation", lambda: session_dir.run_mitigation(options.mitigate)),
        ("hiding", lambda: session_dir.run_hiding(options.hide_solution, gamma=options.gamma)),
    ):
        try:
            runner()
        except EspError as exc:
            session_dir._fail(stage, exc)
            raise StageError(stage, exc.message, exc.refs) from exc
    return session_dir
