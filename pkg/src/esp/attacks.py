"""Attack-path discovery by backward chaining.

For every asset and every requirement it declares, the engine enumerates all
proof trees of ``breached(requirement, part)`` over the KB rules, then
linearizes each tree post-order (premises left to right) into an ordered
step sequence. Only rules carrying attributes are steps; attribute-free
rules group alternatives or bridge goals and leave no step behind.

Pruning: a path may hold at most ``max_depth`` steps, a rule may be used at
most once per root-to-leaf branch (cycle safety), and at most
``max_paths_per_asset`` paths survive per asset after deterministic
ordering. Free premise variables range over asset part ids.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    AttackerModel,
    AttackStepRule,
    GOAL_PREDICATE,
    KnowledgeBase,
    REQUIREMENTS,
    Session,
    Term,
    is_variable,
)


@dataclass(frozen=True)
class PathStep:
    rule: str
    binding: tuple[tuple[str, str], ...]  # sorted (variable, constant) pairs

    def binding_dict(self) -> dict[str, str]:
        return dict(self.binding)


@dataclass(frozen=True)
class AttackPath:
    asset: str
    requirement: str
    steps: tuple[PathStep, ...]

    @property
    def depth(self) -> int:
        return len(self.steps)

    def signature(self) -> tuple:
        return (self.asset, tuple(s.rule for s in self.steps), self.requirement, tuple(s.binding for s in self.steps))

    def rule_ids(self) -> tuple[str, ...]:
        return tuple(s.rule for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "asset": self.asset,
            "requirement": self.requirement,
            "depth": self.depth,
            "steps": [{"rule": s.rule, "binding": s.binding_dict()} for s in self.steps],
        }


@dataclass(frozen=True)
class InferenceLimits:
    max_depth: int = 8
    max_paths_per_asset: int = 64


@dataclass(frozen=True)
class _Proof:
    rule: AttackStepRule
    binding: tuple[tuple[str, str], ...]
    children: tuple["_Proof", ...]
    steps: int  # number of attack steps in this subtree


def _bridge_rules(kb: KnowledgeBase) -> list[AttackStepRule]:
    """Implicit goal bridges breached(r, A) <- breach_<r>(A) for each
    requirement whose breach predicate the KB declares."""
    bridges = []
    for req in REQUIREMENTS:
        pred = f"breach_{req}"
        if kb.predicates.get(pred) == 1:
            bridges.append(
                AttackStepRule(
                    id=f"__breached_{req}",
                    head=Term(GOAL_PREDICATE, (req, "A")),
                    premises=(Term(pred, ("A",)),),
                )
            )
    return bridges


def _match_head(head: Term, goal: Term) -> dict[str, str] | None:
    """Unify a rule head with a ground goal; returns the head binding."""
    if head.name != goal.name or head.arity != goal.arity:
        return None
    binding: dict[str, str] = {}
    for pattern, value in zip(head.args, goal.args):
        if is_variable(pattern):
            if binding.get(pattern, value) != value:
                return None
            binding[pattern] = value
        elif pattern != value:
            return None
    return binding


class _Prover:
    def __init__(self, rules: list[AttackStepRule], domain: list[str]):
        self.rules = sorted(rules, key=lambda r: r.id)
        self.domain = domain  # ground terms free variables may take

    def prove(self, goal: Term, used: frozenset[str], budget: int):
        """Yield proofs of a ground goal using at most ``budget`` steps."""
        for rule in self.rules:
            if rule.id in used:
                continue
            binding = _match_head(rule.head, goal)
            if binding is None:
                continue
            own = 1 if rule.is_step else 0
            if own > budget:
                continue
            for premise_proofs, full_binding in self._prove_premises(
                rule.premises, binding, used | {rule.id}, budget - own
            ):
                steps = own + sum(p.steps for p in premise_proofs)
                yield _Proof(
                    rule=rule,
                    binding=tuple(sorted(full_binding.items())),
                    children=tuple(premise_proofs),
                    steps=steps,
                )

    def _prove_premises(self, premises, binding: dict[str, str], used: frozenset[str], budget: int):
        if not premises:
            yield [], binding
            return
        first, rest = premises[0], premises[1:]
        grounded = first.substitute(binding)
        free = sorted(set(grounded.variables()))
        for assignment in self._groundings(free):
            extended = dict(binding)
            extended.update(assignment)
            goal = grounded.substitute(assignment)
            for proof in self.prove(goal, used, budget):
                remaining = budget - proof.steps
                for rest_proofs, full_binding in self._prove_premises(rest, extended, used, remaining):
                    yield [proof] + rest_proofs, full_binding

    def _groundings(self, free: list[str]):
        if not free:
            yield {}
            return
        first, rest = free[0], free[1:]
        for value in self.domain:
            for tail in self._groundings(rest):
                assignment = {first: value}
                assignment.update(tail)
                yield assignment


def _linearize(proof: _Proof, out: list[PathStep]) -> None:
    for child in proof.children:
        _linearize(child, out)
    if proof.rule.is_step:
        head_vars = set(proof.rule.head.variables())
        for premise in proof.rule.premises:
            head_vars.update(premise.variables())
        binding = tuple((var, val) for var, val in proof.binding if var in head_vars)
        out.append(PathStep(rule=proof.rule.id, binding=binding))


def infer_paths(session: Session, limits: InferenceLimits | None = None) -> list[AttackPath]:
    """All attack paths against every asset requirement, deterministically
    ordered by (asset id, rule-id sequence) and truncated to the limits."""
    kb, app = session.kb, session.app
    if limits is None:
        limits = InferenceLimits(kb.thresholds.max_depth, kb.thresholds.max_paths_per_asset)
    if limits.max_depth <= 0 or limits.max_paths_per_asset <= 0:
        raise ValueError("inference limits must be positive")

    domain = sorted({a.part for a in app.assets})
    prover = _Prover(list(kb.rules) + _bridge_rules(kb), domain)

    results: list[AttackPath] = []
    for asset in sorted(app.assets, key=lambda a: a.part):
        found: set[tuple] = set()
        per_asset: list[AttackPath] = []
        for requirement in sorted(asset.requirements):
            goal = Term(GOAL_PREDICATE, (requirement, asset.part))
            for proof in prover.prove(goal, frozenset(), limits.max_depth):
                steps: list[PathStep] = []
                _linearize(proof, steps)
                if not steps:
                    continue
                path = AttackPath(asset=asset.part, requirement=requirement, steps=tuple(steps))
                if path.signature() in found:
                    continue
                found.add(path.signature())
                per_asset.append(path)
        per_asset.sort(key=lambda p: p.signature())
        results.extend(per_asset[: limits.max_paths_per_asset])
    return results


def gate_by_attacker(paths: list[AttackPath], attacker: AttackerModel, kb: KnowledgeBase) -> list[AttackPath]:
    """Drop paths holding a step beyond the attacker: required skill must not
    exceed the capability rank by more than one."""
    cap = attacker.rank + 1
    kept = []
    for path in paths:
        feasible = True
        for step in path.steps:
            rule = kb.rules_by_id.get(step.rule)
            if rule is not None and rule.attributes is not None and rule.attributes.required_skill > cap:
                feasible = False
                break
        if feasible:
            kept.append(path)
    return kept


def step_target_part(step: PathStep, kb: KnowledgeBase, known_parts, fallback: str) -> str:
    """The application part a step works on: the first head argument bound to
    a known part, else the attacked asset part."""
    rule = kb.rules_by_id.get(step.rule)
    if rule is None:
        return fallback
    binding = step.binding_dict()
    for arg in rule.head.args:
        value = binding.get(arg, arg) if is_variable(arg) else arg
        if value in known_parts:
            return value
    return fallback
