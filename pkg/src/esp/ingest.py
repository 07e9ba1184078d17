"""Annotated C source ingestion.

A lightweight lexical scanner (comment/string-aware tokenization plus brace
matching) turns a source tree into the application model: one part per
function, per annotated region, per annotated variable; complexity metrics
per part; a textual call graph; adjacency between consecutive sibling
regions; and call-graph-derived secondary assets.

Annotation grammar::

    #pragma esp asset begin(<req>[,<req>][, weight=<float>][, id=<name>])
    #pragma esp asset end
    #pragma esp var(<identifier>, <req>[, weight=<float>])

Regions must be properly nested inside a single function; a region that
crosses a function boundary is rejected as overlapping-but-not-nested.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

from .errors import AnnotationError
from .model import (
    ApplicationModel,
    ApplicationPart,
    Asset,
    MetricVector,
    REQUIREMENTS,
    Span,
)

C_KEYWORDS = frozenset(
    """auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary""".split()
)

DECISION_KEYWORDS = frozenset({"if", "for", "while", "case"})
DECISION_OPERATORS = frozenset({"&&", "||", "?"})

# Multi-character operators first so the tokenizer is greedy.
_OPERATORS = (
    "<<=", ">>=", "...",
    "==", "!=", "<=", ">=", "&&", "||", "->", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
    "=", "+", "-", "*", "/", "%", "<", ">", "!", "&", "|", "^", "~", "?", ":", ".",
)
_SEPARATORS = frozenset("();,{}[]")

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"(?:0[xX][0-9a-fA-F]+|\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+|\d+)(?:[uUlLfF]*)")

_PRAGMA_RE = re.compile(r"^\s*#\s*pragma\s+esp\b(.*)$")
_ASSET_BEGIN_RE = re.compile(r"^\s*asset\s+begin\s*\((.*)\)\s*$")
_ASSET_END_RE = re.compile(r"^\s*asset\s+end\s*$")
_VAR_RE = re.compile(r"^\s*var\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | char | op | sep
    text: str
    line: int


@dataclass(frozen=True)
class Annotation:
    kind: str  # always "asset"
    requirements: frozenset[str]
    weight: float
    begin: int
    end: int
    explicit_id: str | None = None


@dataclass(frozen=True)
class CallGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def out_degree(self, node: str) -> int:
        return sum(1 for a, _ in self.edges if a == node)


@dataclass
class SourceFile:
    path: str  # relative path, used in spans
    lines: list[str]
    tokens: list[Token]
    code_lines: set[int]  # 1-based lines with code outside comments
    regions: list[Annotation] = field(default_factory=list)
    variables: list[tuple[str, frozenset, float, int]] = field(default_factory=list)


@dataclass
class FunctionDef:
    name: str
    file: str
    begin: int  # signature line
    body_begin: int  # index into file token list of '{'
    body_end: int  # index of matching '}'
    end: int  # line of '}'


# ---------------------------------------------------------------------------
# Lexing


def _lex(text: str, path: str) -> tuple[list[Token], set[int]]:
    """Tokenize C-ish source; returns tokens and the set of lines holding
    code (non-comment, non-blank)."""
    tokens: list[Token] = []
    code_lines: set[int] = set()
    i, line = 0, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            i += 2
            while i < n and not text.startswith("*/", i):
                if text[i] == "\n":
                    line += 1
                i += 1
            i = min(i + 2, n)
            continue
        code_lines.add(line)
        if ch == '"' or ch == "'":
            quote, start = ch, i
            i += 1
            while i < n and text[i] != quote:
                if text[i] == "\\":
                    i += 1
                elif text[i] == "\n":
                    line += 1
                i += 1
            i = min(i + 1, n)
            tokens.append(Token("string" if quote == '"' else "char", text[start:i], line))
            continue
        m = _NUMBER_RE.match(text, i)
        if m and (ch.isdigit() or ch == "."):
            tokens.append(Token("number", m.group(), line))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), line))
            i = m.end()
            continue
        matched = False
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("op", op, line))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in _SEPARATORS:
            tokens.append(Token("sep", ch, line))
        elif ch == "#":
            tokens.append(Token("op", "#", line))
        # anything else (stray backslash etc.) is skipped
        i += 1
    return tokens, code_lines


# ---------------------------------------------------------------------------
# Annotations


def _parse_pragma_args(body: str, path: str, line: int) -> tuple[frozenset[str], float, str | None]:
    requirements: set[str] = set()
    weight = 1.0
    explicit_id = None
    for raw in filter(None, (p.strip() for p in body.split(","))):
        if "=" in raw:
            key, _, value = raw.partition("=")
            key, value = key.strip(), value.strip()
            if key == "weight":
                try:
                    weight = float(value)
                except ValueError:
                    raise AnnotationError(f"bad weight {value!r}", path, line)
                if not (weight > 0) or not math.isfinite(weight):
                    raise AnnotationError(f"weight must be positive, got {value}", path, line)
            elif key == "id":
                if not _IDENT_RE.fullmatch(value):
                    raise AnnotationError(f"bad id {value!r}", path, line)
                explicit_id = value
            else:
                raise AnnotationError(f"unknown annotation option {key!r}", path, line)
        elif raw in REQUIREMENTS:
            requirements.add(raw)
        else:
            raise AnnotationError(f"unknown requirement {raw!r}", path, line)
    if not requirements:
        raise AnnotationError("annotation needs at least one requirement", path, line)
    return frozenset(requirements), weight, explicit_id


def _collect_annotations(src: SourceFile) -> None:
    open_stack: list[tuple[int, frozenset, float, str | None]] = []
    for lineno, raw in enumerate(src.lines, start=1):
        m = _PRAGMA_RE.match(raw)
        if m is None:
            continue
        rest = m.group(1)
        mb = _ASSET_BEGIN_RE.match(rest)
        if mb:
            reqs, weight, explicit_id = _parse_pragma_args(mb.group(1), src.path, lineno)
            open_stack.append((lineno, reqs, weight, explicit_id))
            continue
        if _ASSET_END_RE.match(rest):
            if not open_stack:
                raise AnnotationError("asset end without matching begin", src.path, lineno)
            begin, reqs, weight, explicit_id = open_stack.pop()
            src.regions.append(
                Annotation("asset", reqs, weight, begin=begin, end=lineno, explicit_id=explicit_id)
            )
            continue
        mv = _VAR_RE.match(rest)
        if mv:
            pieces = [p.strip() for p in mv.group(1).split(",")]
            if not pieces or not _IDENT_RE.fullmatch(pieces[0]):
                raise AnnotationError("var annotation needs an identifier", src.path, lineno)
            reqs, weight, _ = _parse_pragma_args(",".join(pieces[1:]), src.path, lineno)
            src.variables.append((pieces[0], reqs, weight, lineno))
            continue
        raise AnnotationError(f"malformed esp pragma: {raw.strip()!r}", src.path, lineno)
    if open_stack:
        begin = open_stack[-1][0]
        raise AnnotationError(f"asset begin at line {begin} without matching end", src.path, begin)
    src.regions.sort(key=lambda a: (a.begin, a.end))


# ---------------------------------------------------------------------------
# Function extraction


def _extract_functions(src: SourceFile) -> list[FunctionDef]:
    tokens = src.tokens
    functions: list[FunctionDef] = []
    depth = 0
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind == "sep" and tok.text == "{":
            depth += 1
        elif tok.kind == "sep" and tok.text == "}":
            depth = max(0, depth - 1)
        elif depth == 0 and tok.kind == "ident" and tok.text not in C_KEYWORDS:
            # candidate: ident ( ... ) {
            j = i + 1
            if j < n and tokens[j].kind == "sep" and tokens[j].text == "(":
                paren = 1
                j += 1
                while j < n and paren:
                    t = tokens[j]
                    if t.kind == "sep" and t.text == "(":
                        paren += 1
                    elif t.kind == "sep" and t.text == ")":
                        paren -= 1
                    j += 1
                if j < n and tokens[j].kind == "sep" and tokens[j].text == "{":
                    brace = 1
                    body_begin = j
                    j += 1
                    while j < n and brace:
                        t = tokens[j]
                        if t.kind == "sep" and t.text == "{":
                            brace += 1
                        elif t.kind == "sep" and t.text == "}":
                            brace -= 1
                        j += 1
                    body_end = j - 1
                    # signature starts at the beginning of the declaration line
                    functions.append(
                        FunctionDef(
                            name=tok.text,
                            file=src.path,
                            begin=tok.line,
                            body_begin=body_begin,
                            body_end=body_end,
                            end=tokens[body_end].line if body_end < n else tok.line,
                        )
                    )
                    i = j
                    continue
        i += 1
    return functions


# ---------------------------------------------------------------------------
# Metrics


def _tokens_in_lines(tokens: list[Token], begin: int, end: int) -> list[Token]:
    return [t for t in tokens if begin <= t.line <= end]


def _cyclomatic(tokens: list[Token]) -> int:
    count = 0
    for t in tokens:
        if t.kind == "ident" and t.text in DECISION_KEYWORDS:
            count += 1
        elif t.kind == "op" and t.text in DECISION_OPERATORS:
            count += 1
    return 1 + count


def _halstead(tokens: list[Token]) -> tuple[float, int]:
    operators: dict[str, int] = {}
    operands: dict[str, int] = {}
    for t in tokens:
        if t.kind == "op" and t.text in _OPERATORS:
            operators[t.text] = operators.get(t.text, 0) + 1
        elif t.kind == "ident" and t.text not in C_KEYWORDS:
            operands[t.text] = operands.get(t.text, 0) + 1
        elif t.kind in ("number", "string", "char"):
            operands[t.text] = operands.get(t.text, 0) + 1
    eta = len(operators) + len(operands)
    n_total = sum(operators.values()) + sum(operands.values())
    volume = n_total * math.log2(eta) if eta > 0 else 0.0
    return volume, sum(operands.values())


def _sloc(code_lines: set[int], begin: int, end: int) -> int:
    return sum(1 for ln in code_lines if begin <= ln <= end)


def _metrics_for_span(src: SourceFile, begin: int, end: int) -> MetricVector:
    tokens = _tokens_in_lines(src.tokens, begin, end)
    volume, operand_count = _halstead(tokens)
    return MetricVector(
        sloc=_sloc(src.code_lines, begin, end),
        cyclomatic=_cyclomatic(tokens),
        call_fanout=0,
        halstead_volume=volume,
        operand_count=operand_count,
    )


# ---------------------------------------------------------------------------
# Scanning


def _read_sources(root: str) -> list[SourceFile]:
    paths = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for fname in filenames:
            if fname.endswith((".c", ".h")):
                full = os.path.join(dirpath, fname)
                paths.append((os.path.relpath(full, root), full))
    paths.sort()
    if not paths:
        raise AnnotationError(f"no .c/.h files under {root}")
    sources = []
    for rel, full in paths:
        with open(full, "r", encoding="utf-8") as fh:
            text = fh.read()
        tokens, code_lines = _lex(text, rel)
        src = SourceFile(path=rel.replace(os.sep, "/"), lines=text.split("\n"), tokens=tokens, code_lines=code_lines)
        _collect_annotations(src)
        sources.append(src)
    return sources


def _unique_id(base: str, taken: set[str], qualifier: str) -> str:
    if base not in taken:
        return base
    candidate = f"{base}@{qualifier}"
    suffix = 2
    while candidate in taken:
        candidate = f"{base}@{qualifier}~{suffix}"
        suffix += 1
    return candidate


def scan_sources(root: str) -> ApplicationModel:
    """Scan a source tree into an application model.

    Parts and assets are ordered by file path then line, ids are stable for
    a given tree, and the call graph and per-part metrics are filled in.
    """
    sources = _read_sources(root)

    parts: list[ApplicationPart] = []
    assets: list[Asset] = []
    taken: set[str] = set()
    fn_defs: list[tuple[FunctionDef, str]] = []  # (def, part id)
    name_to_part: dict[str, str] = {}

    for src in sources:
        for fn in _extract_functions(src):
            pid = _unique_id(fn.name, taken, src.path)
            taken.add(pid)
            parts.append(
                ApplicationPart(
                    id=pid,
                    kind="function",
                    name=fn.name,
                    parent=None,
                    span=Span(src.path, fn.begin, fn.end),
                    metrics=_metrics_for_span(src, fn.begin, fn.end),
                )
            )
            fn_defs.append((fn, pid))
            name_to_part.setdefault(fn.name, pid)

    # annotated regions: must sit strictly inside one function
    adjacency: list[tuple[str, str]] = []
    for src in sources:
        per_function: dict[str, list[tuple[int, str]]] = {}
        for idx, region in enumerate(src.regions, start=1):
            host = None
            for fn, pid in fn_defs:
                if fn.file == src.path and fn.begin <= region.begin and region.end <= fn.end:
                    host = (fn, pid)
                    break
            if host is None:
                overlapping = [
                    fn.name
                    for fn, _ in fn_defs
                    if fn.file == src.path and not (region.end < fn.begin or fn.end < region.begin)
                ]
                if overlapping:
                    raise AnnotationError(
                        f"annotated region overlaps function {overlapping[0]!r} without nesting",
                        src.path,
                        region.begin,
                    )
                raise AnnotationError("annotated region outside any function", src.path, region.begin)
            fn, host_pid = host
            base = region.explicit_id or f"{host_pid}#r{idx}"
            rid = _unique_id(base, taken, src.path)
            taken.add(rid)
            span = Span(src.path, region.begin + 1, region.end - 1)
            parts.append(
                ApplicationPart(
                    id=rid,
                    kind="code-region",
                    name=base,
                    parent=host_pid,
                    span=span,
                    metrics=_metrics_for_span(src, span.begin, span.end),
                )
            )
            assets.append(Asset(part=rid, requirements=region.requirements, weight=region.weight, role="primary"))
            per_function.setdefault(host_pid, []).append((region.begin, rid))
        for siblings in per_function.values():
            siblings.sort()
            for (_, left), (_, right) in zip(siblings, siblings[1:]):
                adjacency.append((left, right))

    for src in sources:
        for name, reqs, weight, lineno in src.variables:
            parent = None
            for fn, pid in fn_defs:
                if fn.file == src.path and fn.begin <= lineno <= fn.end:
                    parent = pid
                    break
            vid = _unique_id(name, taken, src.path)
            taken.add(vid)
            parts.append(
                ApplicationPart(
                    id=vid,
                    kind="variable",
                    name=name,
                    parent=parent,
                    span=Span(src.path, lineno, lineno),
                    metrics=MetricVector(sloc=1, cyclomatic=0, call_fanout=0, halstead_volume=0.0, operand_count=1),
                )
            )
            assets.append(Asset(part=vid, requirements=reqs, weight=weight, role="primary"))

    # textual call graph: ident followed by '(' inside a body, naming a function
    edges: set[tuple[str, str]] = set()
    declared = set(name_to_part)
    by_path = {src.path: src for src in sources}
    for fn, pid in fn_defs:
        body = by_path[fn.file].tokens[fn.body_begin : fn.body_end + 1]
        for tok, nxt in zip(body, body[1:]):
            if (
                tok.kind == "ident"
                and tok.text in declared
                and tok.text not in C_KEYWORDS
                and nxt.kind == "sep"
                and nxt.text == "("
            ):
                edges.add((pid, name_to_part[tok.text]))

    fanout: dict[str, int] = {}
    for caller, _callee in edges:
        fanout[caller] = fanout.get(caller, 0) + 1
    parts = [
        p if p.kind != "function" else ApplicationPart(
            id=p.id, kind=p.kind, name=p.name, parent=p.parent, span=p.span,
            metrics=MetricVector(
                sloc=p.metrics.sloc,
                cyclomatic=p.metrics.cyclomatic,
                call_fanout=fanout.get(p.id, 0),
                halstead_volume=p.metrics.halstead_volume,
                operand_count=p.metrics.operand_count,
            ),
        )
        for p in parts
    ]

    return ApplicationModel(
        parts=parts,
        assets=assets,
        call_edges=sorted(edges),
        adjacency=sorted(set(adjacency)),
    )


def build_call_graph(app: ApplicationModel, sources: str | None = None) -> CallGraph:
    """Call graph over function parts; parallel edges collapsed.

    When ``sources`` is given the tree is rescanned, otherwise the model's
    recorded edges are used.
    """
    if sources is not None:
        app = scan_sources(sources)
    return CallGraph(
        nodes=tuple(sorted(p.id for p in app.functions())),
        edges=tuple(sorted(set(app.call_edges))),
    )


def compute_metrics(part: ApplicationPart, sources: str, call_graph: CallGraph | None = None) -> MetricVector:
    """Recompute the metric vector of one part from its source span."""
    if part.span is None:
        raise AnnotationError(f"part {part.id} has no resolvable span")
    if part.kind == "variable":
        return MetricVector(sloc=1, cyclomatic=0, call_fanout=0, halstead_volume=0.0, operand_count=1)
    for src in _read_sources(sources):
        if src.path == part.span.file:
            m = _metrics_for_span(src, part.span.begin, part.span.end)
            fanout = call_graph.out_degree(part.id) if call_graph and part.kind == "function" else 0
            return MetricVector(
                sloc=m.sloc,
                cyclomatic=m.cyclomatic,
                call_fanout=fanout,
                halstead_volume=m.halstead_volume,
                operand_count=m.operand_count,
            )
    raise AnnotationError(f"source file {part.span.file} not found under {sources}")


def derive_secondary_assets(
    app: ApplicationModel,
    cg: CallGraph,
    depth: int = 1,
    factor: float = 0.25,
) -> list[Asset]:
    """Secondary assets: non-asset functions within ``depth`` call steps of a
    primary-asset function inherit its requirements at ``factor`` x weight.

    Deduplicated per function keeping the maximum weight (requirements of
    equally-weighted winners are merged). Re-running on a model that already
    contains the result is a fixed point, since only primary assets seed the
    walk.
    """
    primary_fns = app.asset_bearing_functions(roles=("primary",))
    bearing_any = app.asset_bearing_functions(roles=("primary", "secondary"))
    asset_parts = set(app.assets_by_part)
    # reverse reachability: for each primary function, callers within `depth`
    preds: dict[str, set[str]] = {}
    for caller, callee in cg.edges:
        preds.setdefault(callee, set()).add(caller)

    candidates: dict[str, tuple[float, frozenset[str]]] = {}
    for fn_id, fn_assets in sorted(primary_fns.items()):
        frontier = {fn_id}
        seen = {fn_id}
        for _ in range(depth):
            frontier = {p for node in frontier for p in preds.get(node, ())} - seen
            if not frontier:
                break
            seen |= frontier
            for caller in sorted(frontier):
                part = app.parts_by_id.get(caller)
                if part is None or part.kind != "function":
                    continue
                if caller in asset_parts or caller in bearing_any:
                    continue
                for asset in fn_assets:
                    weight = factor * asset.weight
                    if caller not in candidates or weight > candidates[caller][0]:
                        candidates[caller] = (weight, asset.requirements)
                    elif weight == candidates[caller][0]:
                        candidates[caller] = (weight, candidates[caller][1] | asset.requirements)

    return [
        Asset(part=fn, requirements=reqs, weight=weight, role="secondary")
        for fn, (weight, reqs) in sorted(candidates.items())
    ]


def with_secondary_assets(app: ApplicationModel, depth: int = 1, factor: float = 0.25) -> ApplicationModel:
    """Model with derived secondary assets merged in."""
    cg = build_call_graph(app)
    extra = derive_secondary_assets(app, cg, depth=depth, factor=factor)
    if not extra:
        return app
    return ApplicationModel(
        parts=list(app.parts),
        assets=list(app.assets) + extra,
        call_edges=list(app.call_edges),
        adjacency=list(app.adjacency),
    )
