"""Domain model: knowledge base, application model, and session snapshots.

The knowledge base holds everything that is independent of one concrete
application: attack-step rules, protections and their instances, precedence
constraints, the attacker model, threshold tables and hiding parameters.
The application model holds the scanned program: parts, assets, call edges
and adjacency. A session is an immutable, content-hashed pairing of both.

Documents are UTF-8 JSON; the canonical on-disk form is produced by
``save_kb``/``save_app`` (sorted keys, 2-space indent, LF) and loading a
canonical file and saving it again is byte-identical.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .canonical import canonical_bytes, session_hash, write_canonical
from .errors import (
    DanglingReferenceError,
    Diagnostic,
    DiagnosticSink,
    EspError,
    KbParseError,
    RangeError,
)

REQUIREMENTS = ("confidentiality", "integrity")
PART_KINDS = ("function", "code-region", "variable")
ASSET_ROLES = ("primary", "secondary")
METRIC_NAMES = ("sloc", "cyclomatic", "call_fanout", "halstead_volume", "operand_count")
OVERHEAD_NAMES = ("client_time", "server_time", "client_memory", "server_memory", "network_traffic")
ATTRIBUTE_NAMES = ("complexity", "required_skill", "tool_availability", "tool_usability")
EXPERTISE_RANK = {"geek": 1, "amateur": 2, "professional": 3, "guru": 4}

GOAL_PREDICATE = "breached"


# ---------------------------------------------------------------------------
# Value vectors


@dataclass(frozen=True)
class MetricVector:
    sloc: int = 0
    cyclomatic: int = 1
    call_fanout: int = 0
    halstead_volume: float = 0.0
    operand_count: int = 0

    def as_dict(self) -> dict:
        return {
            "sloc": self.sloc,
            "cyclomatic": self.cyclomatic,
            "call_fanout": self.call_fanout,
            "halstead_volume": float(self.halstead_volume),
            "operand_count": self.operand_count,
        }

    def get(self, name: str) -> float:
        return getattr(self, name)

    @staticmethod
    def from_dict(doc: dict, kind: str = "function") -> "MetricVector":
        default_cyclo = 0 if kind == "variable" else 1
        return MetricVector(
            sloc=int(doc.get("sloc", 0)),
            cyclomatic=int(doc.get("cyclomatic", default_cyclo)),
            call_fanout=int(doc.get("call_fanout", 0)),
            halstead_volume=float(doc.get("halstead_volume", 0.0)),
            operand_count=int(doc.get("operand_count", 0)),
        )


@dataclass(frozen=True)
class OverheadVector:
    client_time: float = 0.0
    server_time: float = 0.0
    client_memory: float = 0.0
    server_memory: float = 0.0
    network_traffic: float = 0.0

    def as_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in OVERHEAD_NAMES}

    def get(self, name: str) -> float:
        return getattr(self, name)

    def __add__(self, other: "OverheadVector") -> "OverheadVector":
        return OverheadVector(**{n: getattr(self, n) + getattr(other, n) for n in OVERHEAD_NAMES})

    def __sub__(self, other: "OverheadVector") -> "OverheadVector":
        return OverheadVector(**{n: getattr(self, n) - getattr(other, n) for n in OVERHEAD_NAMES})

    def within(self, budget: "OverheadVector | None", tol: float = 1e-9) -> bool:
        if budget is None:
            return True
        return all(getattr(self, n) <= getattr(budget, n) + tol for n in OVERHEAD_NAMES)

    @staticmethod
    def from_dict(doc: dict) -> "OverheadVector":
        return OverheadVector(**{n: float(doc.get(n, 0.0)) for n in OVERHEAD_NAMES})

    @staticmethod
    def zero() -> "OverheadVector":
        return OverheadVector()


@dataclass(frozen=True)
class AttributeVector:
    complexity: int = 3
    required_skill: int = 3
    tool_availability: int = 3
    tool_usability: int = 3

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in ATTRIBUTE_NAMES}

    def get(self, name: str) -> int:
        return getattr(self, name)

    @staticmethod
    def from_dict(doc: dict) -> "AttributeVector":
        return AttributeVector(**{n: int(doc.get(n, 3)) for n in ATTRIBUTE_NAMES})


# ---------------------------------------------------------------------------
# Term language (Datalog-like: one variable sort plus nullary predicates)

_VARIABLE_RE = re.compile(r"^[A-Z][A-Za-z0-9_]*$")
_SYMBOL_RE = re.compile(r"^[^\s(),]+$")


def is_variable(symbol: str) -> bool:
    return bool(_VARIABLE_RE.match(symbol))


@dataclass(frozen=True)
class Term:
    """A predicate applied to variable or constant arguments."""

    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)

    def substitute(self, binding: dict[str, str]) -> "Term":
        return Term(self.name, tuple(binding.get(a, a) for a in self.args))

    def variables(self) -> tuple[str, ...]:
        return tuple(a for a in self.args if is_variable(a))


def parse_term(text: str, where: str = "term") -> Term:
    text = text.strip()
    if "(" not in text:
        if not _SYMBOL_RE.match(text):
            raise KbParseError(f"malformed {where} {text!r}")
        return Term(text)
    if not text.endswith(")"):
        raise KbParseError(f"malformed {where} {text!r}: missing ')'")
    name, _, rest = text.partition("(")
    name = name.strip()
    body = rest[:-1].strip()
    if not _SYMBOL_RE.match(name):
        raise KbParseError(f"malformed {where} {text!r}: bad predicate name")
    if not body:
        return Term(name)
    args = tuple(a.strip() for a in body.split(","))
    for a in args:
        if not a or not _SYMBOL_RE.match(a):
            raise KbParseError(f"malformed {where} {text!r}: bad argument {a!r}")
    return Term(name, args)


# ---------------------------------------------------------------------------
# Knowledge-base entities


@dataclass(frozen=True)
class MetricBand:
    """Attribute modifier driven by one metric: below ``low`` apply
    ``delta_low``, above ``high`` apply ``delta_high``."""

    metric: str
    low: float
    high: float
    attribute: str
    delta_low: int
    delta_high: int

    def as_list(self) -> list:
        return [self.metric, self.low, self.high, self.attribute, self.delta_low, self.delta_high]

    @staticmethod
    def from_list(row: list) -> "MetricBand":
        if not isinstance(row, (list, tuple)) or len(row) != 6:
            raise KbParseError(f"metric band must have 6 entries, got {row!r}")
        return MetricBand(str(row[0]), float(row[1]), float(row[2]), str(row[3]), int(row[4]), int(row[5]))

    def delta_for(self, value: float) -> int:
        if value < self.low:
            return self.delta_low
        if value > self.high:
            return self.delta_high
        return 0


@dataclass(frozen=True)
class AttackStepRule:
    """An inference rule. Rules carrying ``attributes`` are attack steps and
    appear in linearized paths; rules without are derivation-only."""

    id: str
    head: Term
    premises: tuple[Term, ...] = ()
    tags: tuple[str, ...] = ()
    attributes: AttributeVector | None = None
    metric_modifiers: tuple[MetricBand, ...] = ()

    @property
    def is_step(self) -> bool:
        return self.attributes is not None


@dataclass(frozen=True)
class Protection:
    id: str
    requirements: frozenset[str]
    singleton: bool = False
    resilience: float = 0.5
    fingerprint: float = 0.5


@dataclass(frozen=True)
class ProtectionInstance:
    """A concrete configuration of a protection.

    ``attribute_deltas`` maps an attack-step rule id or step-class tag to a
    sparse attribute delta. ``metric_scale``/``metric_offset`` define the
    affine metric transform (identity/zero by default). ``overhead_coeffs``
    maps each overhead component to a sparse row over metric names.
    """

    id: str
    protection: str
    config: str = "default"
    attribute_deltas: dict = field(default_factory=dict)
    metric_scale: dict = field(default_factory=dict)
    metric_offset: dict = field(default_factory=dict)
    overhead_coeffs: dict = field(default_factory=dict)

    def delta_for_rule(self, rule: AttackStepRule) -> dict[str, int]:
        """Sum of all delta entries matching the rule id or one of its tags."""
        total: dict[str, int] = {}
        for key in (rule.id, *rule.tags):
            entry = self.attribute_deltas.get(key)
            if entry:
                for attr, delta in entry.items():
                    total[attr] = total.get(attr, 0) + int(delta)
        return total

    def has_nonzero_delta_for(self, rule: AttackStepRule) -> bool:
        return any(v != 0 for v in self.delta_for_rule(rule).values())

    def transform_metrics(self, m: MetricVector) -> MetricVector:
        values = {}
        for target in METRIC_NAMES:
            row = self.metric_scale.get(target)
            if row is None:
                acc = m.get(target)
            else:
                acc = sum(float(c) * m.get(src) for src, c in row.items())
            acc += float(self.metric_offset.get(target, 0.0))
            values[target] = max(acc, 0.0)
        return MetricVector(
            sloc=int(round(values["sloc"])),
            cyclomatic=int(round(values["cyclomatic"])),
            call_fanout=int(round(values["call_fanout"])),
            halstead_volume=values["halstead_volume"],
            operand_count=int(round(values["operand_count"])),
        )

    def overhead_for(self, m: MetricVector) -> OverheadVector:
        return OverheadVector(
            **{
                comp: sum(float(c) * m.get(metric) for metric, c in self.overhead_coeffs.get(comp, {}).items())
                for comp in OVERHEAD_NAMES
            }
        )


@dataclass(frozen=True)
class Synergy:
    pair: tuple[str, str]  # unordered; stored sorted
    delta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PrecedenceRules:
    forbidden: tuple[tuple[str, str], ...] = ()
    discouraged: tuple[tuple[str, str, float], ...] = ()  # (earlier, later, penalty)
    synergies: tuple[Synergy, ...] = ()
    correlation_sets: tuple[tuple[str, ...], ...] = ()

    def discouraged_penalty(self, earlier: str, later: str) -> float | None:
        for a, b, penalty in self.discouraged:
            if a == earlier and b == later:
                return penalty
        return None


@dataclass(frozen=True)
class AttackerModel:
    expertise: str = "amateur"
    effort_budget: int | None = None  # None: defaults to the number of assets

    @property
    def rank(self) -> int:
        return EXPERTISE_RANK[self.expertise]

    def effective_effort(self, asset_count: int) -> int:
        if self.effort_budget is not None:
            return self.effort_budget
        return asset_count


DEFAULT_METRIC_BANDS = (
    MetricBand("cyclomatic", 5.0, 25.0, "complexity", -1, 1),
    MetricBand("sloc", 20.0, 200.0, "complexity", -1, 1),
)


@dataclass(frozen=True)
class Thresholds:
    max_depth: int = 8
    max_paths_per_asset: int = 64
    secondary_asset_depth: int = 1
    secondary_asset_factor: float = 0.25
    lmax: int = 3
    beam_width: int = 256
    aggregator: str = "product"
    metric_bands: tuple[MetricBand, ...] = DEFAULT_METRIC_BANDS
    budgets: OverheadVector | None = None


@dataclass(frozen=True)
class HidingParams:
    gamma: int = 2
    beta_replication: float = 1.0
    beta_enlargement: float = 0.05
    beta_shadowing: float = 0.5
    node_cap: int = 1_000_000


@dataclass
class KnowledgeBase:
    predicates: dict[str, int] = field(default_factory=dict)  # name -> arity
    rules: list[AttackStepRule] = field(default_factory=list)
    protections: list[Protection] = field(default_factory=list)
    protection_instances: list[ProtectionInstance] = field(default_factory=list)
    precedence: PrecedenceRules = PrecedenceRules()
    attacker: AttackerModel = AttackerModel()
    thresholds: Thresholds = Thresholds()
    hiding: HidingParams = HidingParams()

    def __post_init__(self):
        self.rules_by_id = {r.id: r for r in self.rules}
        self.protections_by_id = {p.id: p for p in self.protections}
        self.pis_by_id = {pi.id: pi for pi in self.protection_instances}

    def protection_of(self, pi_id: str) -> Protection:
        return self.protections_by_id[self.pis_by_id[pi_id].protection]

    def step_rules(self) -> list[AttackStepRule]:
        return [r for r in self.rules if r.is_step]

    def declared_tags(self) -> set[str]:
        tags: set[str] = set()
        for rule in self.rules:
            tags.update(rule.tags)
        return tags


# ---------------------------------------------------------------------------
# Application model


@dataclass(frozen=True)
class Span:
    file: str
    begin: int
    end: int

    def as_dict(self) -> dict:
        return {"file": self.file, "begin": self.begin, "end": self.end}


@dataclass(frozen=True)
class ApplicationPart:
    id: str
    kind: str
    name: str
    parent: str | None = None
    span: Span | None = None
    metrics: MetricVector = MetricVector()


@dataclass(frozen=True)
class Asset:
    part: str
    requirements: frozenset[str]
    weight: float = 1.0
    role: str = "primary"


@dataclass
class ApplicationModel:
    parts: list[ApplicationPart] = field(default_factory=list)
    assets: list[Asset] = field(default_factory=list)
    call_edges: list[tuple[str, str]] = field(default_factory=list)
    adjacency: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.parts_by_id = {p.id: p for p in self.parts}
        self.assets_by_part = {a.part: a for a in self.assets}

    def functions(self) -> list[ApplicationPart]:
        return [p for p in self.parts if p.kind == "function"]

    def enclosing_function(self, part_id: str) -> str | None:
        seen = set()
        current = self.parts_by_id.get(part_id)
        while current is not None and current.id not in seen:
            if current.kind == "function":
                return current.id
            seen.add(current.id)
            current = self.parts_by_id.get(current.parent) if current.parent else None
        return None

    def asset_bearing_functions(self, roles: tuple[str, ...] = ("primary",)) -> dict[str, list[Asset]]:
        """Function id -> assets anchored in it (on the function itself or a
        contained part)."""
        out: dict[str, list[Asset]] = {}
        for asset in self.assets:
            if asset.role not in roles:
                continue
            part = self.parts_by_id.get(asset.part)
            if part is None:
                continue
            fn = part.id if part.kind == "function" else self.enclosing_function(part.id)
            if fn is not None:
                out.setdefault(fn, []).append(asset)
        return out

    def adjacent_to(self, part_id: str) -> list[str]:
        out = []
        for a, b in self.adjacency:
            if a == part_id:
                out.append(b)
            elif b == part_id:
                out.append(a)
        return sorted(set(out))


# ---------------------------------------------------------------------------
# Session snapshot


@dataclass(frozen=True)
class Session:
    kb: KnowledgeBase
    app: ApplicationModel
    hash: str

    @property
    def effort_budget(self) -> int:
        return self.kb.attacker.effective_effort(len(self.app.assets))


def snapshot(kb: KnowledgeBase, app: ApplicationModel) -> Session:
    """Freeze a validated pair into a content-hashed session."""
    return Session(kb=kb, app=app, hash=session_hash(kb_to_doc(kb), app_to_doc(app)))


# ---------------------------------------------------------------------------
# KB serialization

_KB_KEYS = ("attack_steps", "attacker", "hiding", "precedence", "protection_instances", "protections", "thresholds")


def kb_to_doc(kb: KnowledgeBase) -> dict:
    return {
        "attack_steps": {
            "predicates": [f"{name}/{arity}" for name, arity in sorted(kb.predicates.items())],
            "rules": [
                {
                    "id": r.id,
                    "head": str(r.head),
                    "premises": [str(p) for p in r.premises],
                    "tags": list(r.tags),
                    **({"attributes": r.attributes.as_dict()} if r.attributes is not None else {}),
                    "metric_modifiers": [b.as_list() for b in r.metric_modifiers],
                }
                for r in sorted(kb.rules, key=lambda r: r.id)
            ],
        },
        "protections": [
            {
                "id": p.id,
                "requirements": sorted(p.requirements),
                "singleton": p.singleton,
                "resilience": float(p.resilience),
                "fingerprint": float(p.fingerprint),
            }
            for p in sorted(kb.protections, key=lambda p: p.id)
        ],
        "protection_instances": [
            {
                "id": pi.id,
                "protection": pi.protection,
                "config": pi.config,
                "attribute_deltas": {k: {a: int(v) for a, v in sorted(d.items())} for k, d in sorted(pi.attribute_deltas.items())},
                "metric_transform": {
                    "scale": {t: {s: float(c) for s, c in sorted(row.items())} for t, row in sorted(pi.metric_scale.items())},
                    "offset": {t: float(v) for t, v in sorted(pi.metric_offset.items())},
                },
                "overhead_coeffs": {c: {m: float(v) for m, v in sorted(row.items())} for c, row in sorted(pi.overhead_coeffs.items())},
            }
            for pi in sorted(kb.protection_instances, key=lambda pi: pi.id)
        ],
        "precedence": {
            "forbidden": sorted([list(p) for p in kb.precedence.forbidden]),
            "discouraged": [
                {"pair": [a, b], "penalty": float(d)}
                for a, b, d in sorted(kb.precedence.discouraged)
            ],
            "synergies": [
                {"pair": list(s.pair), "delta": {a: int(v) for a, v in sorted(s.delta.items())}}
                for s in sorted(kb.precedence.synergies, key=lambda s: s.pair)
            ],
            "correlation_sets": sorted([sorted(group) for group in kb.precedence.correlation_sets]),
        },
        "attacker": {
            "expertise": kb.attacker.expertise,
            "effort_budget": kb.attacker.effort_budget,
        },
        "thresholds": {
            "max_depth": kb.thresholds.max_depth,
            "max_paths_per_asset": kb.thresholds.max_paths_per_asset,
            "secondary_asset_depth": kb.thresholds.secondary_asset_depth,
            "secondary_asset_factor": float(kb.thresholds.secondary_asset_factor),
            "lmax": kb.thresholds.lmax,
            "beam_width": kb.thresholds.beam_width,
            "aggregator": kb.thresholds.aggregator,
            "metric_bands": [b.as_list() for b in kb.thresholds.metric_bands],
            "budgets": kb.thresholds.budgets.as_dict() if kb.thresholds.budgets is not None else None,
        },
        "hiding": {
            "gamma": kb.hiding.gamma,
            "beta_replication": float(kb.hiding.beta_replication),
            "beta_enlargement": float(kb.hiding.beta_enlargement),
            "beta_shadowing": float(kb.hiding.beta_shadowing),
            "node_cap": kb.hiding.node_cap,
        },
    }


def _parse_predicates(items: list) -> dict[str, int]:
    predicates: dict[str, int] = {}
    for item in items:
        text = str(item)
        name, sep, arity = text.partition("/")
        if not sep:
            raise KbParseError(f"predicate declaration {text!r} must be name/arity")
        try:
            predicates[name] = int(arity)
        except ValueError:
            raise KbParseError(f"predicate declaration {text!r} has non-integer arity")
    return predicates


def kb_from_doc(doc: dict) -> KnowledgeBase:
    if not isinstance(doc, dict):
        raise KbParseError("KB document must be a JSON object")
    unknown = set(doc) - set(_KB_KEYS)
    if unknown:
        raise KbParseError(f"unknown top-level KB keys: {sorted(unknown)}")

    steps_doc = doc.get("attack_steps", {}) or {}
    predicates = _parse_predicates(steps_doc.get("predicates", []))
    rules = []
    for rdoc in steps_doc.get("rules", []):
        rid = str(rdoc.get("id", ""))
        if not rid:
            raise KbParseError("attack-step rule without id")
        head = parse_term(str(rdoc["head"]), where=f"head of rule {rid}")
        premises = tuple(parse_term(str(p), where=f"premise of rule {rid}") for p in rdoc.get("premises", []))
        attrs_doc = rdoc.get("attributes")
        attributes = AttributeVector.from_dict(attrs_doc) if attrs_doc is not None else None
        bands = tuple(MetricBand.from_list(row) for row in rdoc.get("metric_modifiers", []))
        rules.append(
            AttackStepRule(
                id=rid,
                head=head,
                premises=premises,
                tags=tuple(str(t) for t in rdoc.get("tags", [])),
                attributes=attributes,
                metric_modifiers=bands,
            )
        )

    protections = [
        Protection(
            id=str(p["id"]),
            requirements=frozenset(str(r) for r in p.get("requirements", [])),
            singleton=bool(p.get("singleton", False)),
            resilience=float(p.get("resilience", 0.5)),
            fingerprint=float(p.get("fingerprint", 0.5)),
        )
        for p in doc.get("protections", [])
    ]

    instances = []
    for pdoc in doc.get("protection_instances", []):
        transform = pdoc.get("metric_transform", {}) or {}
        instances.append(
            ProtectionInstance(
                id=str(pdoc["id"]),
                protection=str(pdoc.get("protection", "")),
                config=str(pdoc.get("config", "default")),
                attribute_deltas={
                    str(k): {str(a): int(v) for a, v in (d or {}).items()}
                    for k, d in (pdoc.get("attribute_deltas", {}) or {}).items()
                },
                metric_scale={
                    str(t): {str(s): float(c) for s, c in (row or {}).items()}
                    for t, row in (transform.get("scale", {}) or {}).items()
                },
                metric_offset={str(t): float(v) for t, v in (transform.get("offset", {}) or {}).items()},
                overhead_coeffs={
                    str(c): {str(m): float(v) for m, v in (row or {}).items()}
                    for c, row in (pdoc.get("overhead_coeffs", {}) or {}).items()
                },
            )
        )

    prec_doc = doc.get("precedence", {}) or {}
    discouraged = []
    for entry in prec_doc.get("discouraged", []):
        if isinstance(entry, dict):
            pair = entry.get("pair", [])
            penalty = float(entry.get("penalty", 0.9))
        else:
            pair, penalty = entry, 0.9
        if len(pair) != 2:
            raise KbParseError(f"discouraged pair must have 2 elements, got {pair!r}")
        discouraged.append((str(pair[0]), str(pair[1]), penalty))
    forbidden = []
    for pair in prec_doc.get("forbidden", []):
        if len(pair) != 2:
            raise KbParseError(f"forbidden pair must have 2 elements, got {pair!r}")
        forbidden.append((str(pair[0]), str(pair[1])))
    synergies = []
    for sdoc in prec_doc.get("synergies", []):
        pair = sdoc.get("pair", [])
        if len(pair) != 2:
            raise KbParseError(f"synergy pair must have 2 elements, got {pair!r}")
        a, b = sorted((str(pair[0]), str(pair[1])))
        synergies.append(Synergy(pair=(a, b), delta={str(k): int(v) for k, v in (sdoc.get("delta", {}) or {}).items()}))
    precedence = PrecedenceRules(
        forbidden=tuple(forbidden),
        discouraged=tuple(discouraged),
        synergies=tuple(synergies),
        correlation_sets=tuple(tuple(str(p) for p in group) for group in prec_doc.get("correlation_sets", [])),
    )

    att_doc = doc.get("attacker", {}) or {}
    attacker = AttackerModel(
        expertise=str(att_doc.get("expertise", "amateur")),
        effort_budget=None if att_doc.get("effort_budget") is None else int(att_doc["effort_budget"]),
    )

    thr_doc = doc.get("thresholds", {}) or {}
    budgets_doc = thr_doc.get("budgets")
    thresholds = Thresholds(
        max_depth=int(thr_doc.get("max_depth", 8)),
        max_paths_per_asset=int(thr_doc.get("max_paths_per_asset", 64)),
        secondary_asset_depth=int(thr_doc.get("secondary_asset_depth", 1)),
        secondary_asset_factor=float(thr_doc.get("secondary_asset_factor", 0.25)),
        lmax=int(thr_doc.get("lmax", 3)),
        beam_width=int(thr_doc.get("beam_width", 256)),
        aggregator=str(thr_doc.get("aggregator", "product")),
        metric_bands=tuple(MetricBand.from_list(row) for row in thr_doc["metric_bands"])
        if "metric_bands" in thr_doc
        else DEFAULT_METRIC_BANDS,
        budgets=OverheadVector.from_dict(budgets_doc) if budgets_doc is not None else None,
    )

    hid_doc = doc.get("hiding", {}) or {}
    hiding = HidingParams(
        gamma=int(hid_doc.get("gamma", 2)),
        beta_replication=float(hid_doc.get("beta_replication", 1.0)),
        beta_enlargement=float(hid_doc.get("beta_enlargement", 0.05)),
        beta_shadowing=float(hid_doc.get("beta_shadowing", 0.5)),
        node_cap=int(hid_doc.get("node_cap", 1_000_000)),
    )

    return KnowledgeBase(
        predicates=predicates,
        rules=rules,
        protections=protections,
        protection_instances=instances,
        precedence=precedence,
        attacker=attacker,
        thresholds=thresholds,
        hiding=hiding,
    )


# ---------------------------------------------------------------------------
# Application-model serialization


def app_to_doc(app: ApplicationModel) -> dict:
    return {
        "parts": [
            {
                "id": p.id,
                "kind": p.kind,
                "name": p.name,
                "parent": p.parent,
                "span": p.span.as_dict() if p.span else None,
                "metrics": p.metrics.as_dict(),
            }
            for p in sorted(app.parts, key=lambda p: p.id)
        ],
        "assets": [
            {
                "part": a.part,
                "requirements": sorted(a.requirements),
                "weight": float(a.weight),
                "role": a.role,
            }
            for a in sorted(app.assets, key=lambda a: a.part)
        ],
        "call_edges": sorted([list(e) for e in set(app.call_edges)]),
        "adjacency": sorted([list(e) for e in set(app.adjacency)]),
    }


def app_from_doc(doc: dict) -> ApplicationModel:
    if not isinstance(doc, dict):
        raise KbParseError("application model must be a JSON object")
    parts = []
    for pdoc in doc.get("parts", []):
        span_doc = pdoc.get("span")
        span = Span(str(span_doc["file"]), int(span_doc["begin"]), int(span_doc["end"])) if span_doc else None
        kind = str(pdoc.get("kind", "function"))
        parts.append(
            ApplicationPart(
                id=str(pdoc["id"]),
                kind=kind,
                name=str(pdoc.get("name", pdoc["id"])),
                parent=None if pdoc.get("parent") is None else str(pdoc["parent"]),
                span=span,
                metrics=MetricVector.from_dict(pdoc.get("metrics", {}) or {}, kind=kind),
            )
        )
    assets = [
        Asset(
            part=str(adoc["part"]),
            requirements=frozenset(str(r) for r in adoc.get("requirements", [])),
            weight=float(adoc.get("weight", 1.0)),
            role=str(adoc.get("role", "primary")),
        )
        for adoc in doc.get("assets", [])
    ]
    call_edges = [(str(a), str(b)) for a, b in doc.get("call_edges", [])]
    adjacency = [(str(a), str(b)) for a, b in doc.get("adjacency", [])]
    return ApplicationModel(parts=parts, assets=assets, call_edges=call_edges, adjacency=adjacency)


# ---------------------------------------------------------------------------
# Validation


def _check_range(sink: DiagnosticSink, entity: str, name: str, value, low, high, code: str = "range-error") -> None:
    if not (low <= value <= high) or not math.isfinite(value):
        sink.items.append(Diagnostic("error", entity, f"{name} must be in {low}..{high}, got {value}"))


def validate_kb(kb: KnowledgeBase) -> list[Diagnostic]:
    """Check every KB invariant; empty list iff the KB is valid."""
    sink = DiagnosticSink()
    declared = dict(kb.predicates)
    declared.setdefault(GOAL_PREDICATE, 2)

    seen_rule_ids: set[str] = set()
    for rule in kb.rules:
        if rule.id in seen_rule_ids:
            sink.error(rule.id, f"duplicate rule id {rule.id}")
        seen_rule_ids.add(rule.id)
        for term in (rule.head, *rule.premises):
            if term.name not in declared:
                sink.items.append(
                    Diagnostic("error", rule.id, f"undeclared predicate `{term.name}` in rule {rule.id}")
                )
            elif declared[term.name] != term.arity:
                sink.error(rule.id, f"predicate {term.name} used with arity {term.arity}, declared {declared[term.name]}")
        if rule.attributes is not None:
            for attr in ATTRIBUTE_NAMES:
                value = rule.attributes.get(attr)
                if not (1 <= value <= 5):
                    sink.error(rule.id, f"{attr} must be in 1..5, got {value}")
        for band in rule.metric_modifiers:
            _validate_band(sink, rule.id, band)

    seen_prot: set[str] = set()
    for prot in kb.protections:
        if prot.id in seen_prot:
            sink.error(prot.id, f"duplicate protection id {prot.id}")
        seen_prot.add(prot.id)
        for req in prot.requirements:
            if req not in REQUIREMENTS:
                sink.error(prot.id, f"unknown requirement {req!r}")
        if not (0.0 < prot.resilience <= 1.0):
            sink.error(prot.id, f"resilience must be in (0, 1], got {prot.resilience}")
        if not (0.0 <= prot.fingerprint <= 1.0):
            sink.error(prot.id, f"fingerprint must be in [0, 1], got {prot.fingerprint}")

    tags = kb.declared_tags()
    seen_pi: set[str] = set()
    for pi in kb.protection_instances:
        if pi.id in seen_pi:
            sink.error(pi.id, f"duplicate protection instance id {pi.id}")
        seen_pi.add(pi.id)
        if pi.protection not in kb.protections_by_id:
            sink.items.append(
                Diagnostic("error", pi.id, f"dangling protection reference `{pi.protection}` in instance {pi.id}")
            )
        for target, deltas in pi.attribute_deltas.items():
            if target not in kb.rules_by_id and target not in tags:
                sink.items.append(
                    Diagnostic("error", pi.id, f"dangling delta target `{target}` in instance {pi.id} (no rule or tag)")
                )
            for attr in deltas:
                if attr not in ATTRIBUTE_NAMES:
                    sink.error(pi.id, f"unknown attribute {attr!r} in delta for {target}")
        for target, row in pi.metric_scale.items():
            if target not in METRIC_NAMES:
                sink.error(pi.id, f"unknown metric {target!r} in transform")
            for src, coeff in row.items():
                if src not in METRIC_NAMES:
                    sink.error(pi.id, f"unknown metric {src!r} in transform row {target}")
                if not math.isfinite(coeff):
                    sink.error(pi.id, f"non-finite transform coefficient for {target}<-{src}")
        for target, value in pi.metric_offset.items():
            if target not in METRIC_NAMES:
                sink.error(pi.id, f"unknown metric {target!r} in transform offset")
            if not math.isfinite(value):
                sink.error(pi.id, f"non-finite transform offset for {target}")
        for comp, row in pi.overhead_coeffs.items():
            if comp not in OVERHEAD_NAMES:
                sink.error(pi.id, f"unknown overhead component {comp!r}")
            for metric, coeff in row.items():
                if metric not in METRIC_NAMES:
                    sink.error(pi.id, f"unknown metric {metric!r} in overhead row {comp}")
                if not math.isfinite(coeff) or coeff < 0:
                    sink.error(pi.id, f"overhead coefficient {comp}/{metric} must be finite and >= 0, got {coeff}")

    prec = kb.precedence
    pi_ids = set(kb.pis_by_id)
    discouraged_pairs = {(a, b) for a, b, _ in prec.discouraged}
    for pair in prec.forbidden:
        if pair in discouraged_pairs:
            sink.error(f"{pair[0]}->{pair[1]}", f"pair {pair} listed as both forbidden and discouraged")
        for pid in pair:
            if pid not in pi_ids:
                sink.error(pid, f"dangling protection instance `{pid}` in forbidden pair")
    for a, b, penalty in prec.discouraged:
        if not (0.0 < penalty < 1.0):
            sink.error(f"{a}->{b}", f"discouraged penalty must be in (0, 1), got {penalty}")
        for pid in (a, b):
            if pid not in pi_ids:
                sink.error(pid, f"dangling protection instance `{pid}` in discouraged pair")
    for syn in prec.synergies:
        for pid in syn.pair:
            if pid not in pi_ids:
                sink.error(pid, f"dangling protection instance `{pid}` in synergy")
        for attr in syn.delta:
            if attr not in ATTRIBUTE_NAMES:
                sink.error("synergy", f"unknown attribute {attr!r} in synergy delta")
    seen_parts: set[str] = set()
    for group in prec.correlation_sets:
        for pid in group:
            if pid in seen_parts:
                sink.error(pid, f"part {pid} appears in more than one correlation set")
            seen_parts.add(pid)

    if kb.attacker.expertise not in EXPERTISE_RANK:
        sink.error("attacker", f"unknown expertise {kb.attacker.expertise!r}")
    if kb.attacker.effort_budget is not None and kb.attacker.effort_budget <= 0:
        sink.error("attacker", f"effort budget must be positive, got {kb.attacker.effort_budget}")

    thr = kb.thresholds
    for name, value in (
        ("max_depth", thr.max_depth),
        ("max_paths_per_asset", thr.max_paths_per_asset),
        ("lmax", thr.lmax),
        ("beam_width", thr.beam_width),
    ):
        if value <= 0:
            sink.error("thresholds", f"{name} must be positive, got {value}")
    if thr.secondary_asset_depth < 0:
        sink.error("thresholds", f"secondary_asset_depth must be >= 0, got {thr.secondary_asset_depth}")
    if thr.secondary_asset_factor <= 0:
        sink.error("thresholds", f"secondary_asset_factor must be positive, got {thr.secondary_asset_factor}")
    if thr.aggregator not in ("product", "sum", "max"):
        sink.error("thresholds", f"unknown aggregator {thr.aggregator!r}")
    for band in thr.metric_bands:
        _validate_band(sink, "thresholds", band)
    if thr.budgets is not None:
        for comp in OVERHEAD_NAMES:
            if thr.budgets.get(comp) < 0:
                sink.error("thresholds", f"budget {comp} must be >= 0")

    if kb.hiding.gamma < 1:
        sink.error("hiding", f"gamma must be >= 1, got {kb.hiding.gamma}")
    for name in ("beta_replication", "beta_enlargement", "beta_shadowing"):
        value = getattr(kb.hiding, name)
        if not math.isfinite(value) or value < 0:
            sink.error("hiding", f"{name} must be finite and >= 0, got {value}")
    if kb.hiding.node_cap <= 0:
        sink.error("hiding", f"node_cap must be positive, got {kb.hiding.node_cap}")

    return sink.items


def _validate_band(sink: DiagnosticSink, entity: str, band: MetricBand) -> None:
    if band.metric not in METRIC_NAMES:
        sink.error(entity, f"unknown metric {band.metric!r} in metric band")
    if band.attribute not in ATTRIBUTE_NAMES:
        sink.error(entity, f"unknown attribute {band.attribute!r} in metric band")
    if band.low > band.high:
        sink.error(entity, f"metric band low {band.low} exceeds high {band.high}")


def validate_app(app: ApplicationModel) -> list[Diagnostic]:
    sink = DiagnosticSink()
    seen: set[str] = set()
    for part in app.parts:
        if part.id in seen:
            sink.error(part.id, f"duplicate part id {part.id}")
        seen.add(part.id)
        if part.kind not in PART_KINDS:
            sink.error(part.id, f"unknown part kind {part.kind!r}")
        m = part.metrics
        if m.sloc < 0 or m.call_fanout < 0 or m.operand_count < 0 or m.halstead_volume < 0:
            sink.error(part.id, "metrics must be non-negative")
        if part.kind == "variable":
            if m.cyclomatic != 0:
                sink.error(part.id, f"variable cyclomatic must be 0, got {m.cyclomatic}")
        elif m.cyclomatic < 1:
            sink.error(part.id, f"cyclomatic must be >= 1, got {m.cyclomatic}")

    for part in app.parts:
        if part.parent is not None:
            parent = app.parts_by_id.get(part.parent)
            if parent is None:
                sink.error(part.id, f"dangling parent `{part.parent}`")
            elif part.kind == "code-region" and parent.kind != "function":
                sink.error(part.id, "code-region parent must be a function")
        # containment must be acyclic
        hops, current = 0, part
        while current is not None and current.parent is not None:
            current = app.parts_by_id.get(current.parent)
            hops += 1
            if hops > len(app.parts):
                sink.error(part.id, "containment cycle detected")
                break

    seen_assets: set[str] = set()
    for asset in app.assets:
        if asset.part in seen_assets:
            sink.error(asset.part, f"duplicate asset for part {asset.part}")
        seen_assets.add(asset.part)
        if asset.part not in app.parts_by_id:
            sink.error(asset.part, f"dangling asset part `{asset.part}`")
        if not asset.requirements:
            sink.error(asset.part, "asset requirements must be non-empty")
        for req in asset.requirements:
            if req not in REQUIREMENTS:
                sink.error(asset.part, f"unknown requirement {req!r}")
        if not (asset.weight > 0) or not math.isfinite(asset.weight):
            sink.error(asset.part, f"asset weight must be positive, got {asset.weight}")
        if asset.role not in ASSET_ROLES:
            sink.error(asset.part, f"unknown asset role {asset.role!r}")

    fn_ids = {p.id for p in app.functions()}
    for caller, callee in app.call_edges:
        if caller not in fn_ids or callee not in fn_ids:
            sink.error(f"{caller}->{callee}", "call edge references unknown function")
    for a, b in app.adjacency:
        if a not in app.parts_by_id or b not in app.parts_by_id:
            sink.error(f"{a}~{b}", "adjacency references unknown part")
    return sink.items


# ---------------------------------------------------------------------------
# File I/O


def _raise_for_diagnostics(diagnostics: list[Diagnostic]) -> None:
    errors = [d for d in diagnostics if d.severity == "error"]
    if not errors:
        return
    first = errors[0]
    summary = "; ".join(f"{d.entity}: {d.message}" for d in errors[:5])
    if len(errors) > 5:
        summary += f" (+{len(errors) - 5} more)"
    if "dangling" in first.message or "undeclared" in first.message:
        raise DanglingReferenceError(summary, refs=[d.entity for d in errors])
    if "must be in" in first.message:
        raise RangeError(summary, refs=[d.entity for d in errors])
    raise EspError(summary, refs=[d.entity for d in errors])


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise KbParseError(str(exc.msg), line=exc.lineno, column=exc.colno) from exc


def load_kb(path) -> KnowledgeBase:
    kb = kb_from_doc(_load_json(path))
    _raise_for_diagnostics(validate_kb(kb))
    return kb


def save_kb(path, kb: KnowledgeBase) -> bytes:
    return write_canonical(path, kb_to_doc(kb))


def kb_canonical_bytes(kb: KnowledgeBase) -> bytes:
    return canonical_bytes(kb_to_doc(kb))


def load_app(path) -> ApplicationModel:
    app = app_from_doc(_load_json(path))
    _raise_for_diagnostics(validate_app(app))
    return app


def save_app(path, app: ApplicationModel) -> bytes:
    return write_canonical(path, app_to_doc(app))
