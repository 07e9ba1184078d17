"""Mitigation: candidate solutions and the defender/attacker game.

A candidate solution assigns each protectable part an ordered sequence of
protection instances (correlated parts share one sequence). Candidates are
enumerated lexicographically under layering, singleton, forbidden-pair,
correlation and overhead-budget constraints; each gets a protection index

    P = discouraged_penalty * sum_a w_a * (R0_a - R_a(solution))

against the vanilla asset risks R0. The defender move is the candidate; the
attacker then spends an effort budget one unit at a time on attack paths,
restoring path risk toward its vanilla value by

    r_p(e) = r_van - (r_van - r_sol) * rho_p ** e

with rho_p the mean resilience of the protections covering the path. The
game value of a candidate is the minimum P over attacker allocations,
searched depth-first with a value-preserving bound prune ("alpha-beta") and
a transposition table keyed by the per-path investment vector.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
from dataclasses import dataclass

from .errors import EspError
from .model import (
    KnowledgeBase,
    MetricVector,
    OVERHEAD_NAMES,
    OverheadVector,
    Session,
)
from .attacks import AttackPath, step_target_part
from .risk import asset_risk, compose_metrics, evaluate_path, modify_attributes, path_index, step_index


@dataclass(frozen=True)
class AppliedPI:
    pi: str
    part: str
    layer: int  # 1-based position within the part's sequence

    def to_dict(self) -> dict:
        return {"pi": self.pi, "part": self.part, "layer": self.layer}


Assignment = tuple[tuple[str, tuple[str, ...]], ...]  # sorted (part, sequence)


def assignment_signature(assignment: Assignment) -> str:
    return ";".join(f"{part}:{','.join(seq)}" for part, seq in assignment)


@dataclass(frozen=True)
class Solution:
    """An ordered deployment of protection instances, with its predictions."""

    assignment: Assignment
    predicted_metrics: dict
    overhead: OverheadVector
    protection_index: float
    discouraged_penalty: float
    enlargements: tuple[tuple[str, str, str], ...] = ()  # (part, extended part, pi)

    @property
    def applied(self) -> list[AppliedPI]:
        out = []
        for part, seq in self.assignment:
            for layer, pi in enumerate(seq, start=1):
                out.append(AppliedPI(pi=pi, part=part, layer=layer))
        return out

    @property
    def id(self) -> str:
        payload = assignment_signature(self.assignment) + "|" + ";".join(
            f"{a}>{b}:{pi}" for a, b, pi in self.enlargements
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    def signature(self) -> tuple:
        return (self.assignment, self.enlargements)

    def sequences(self) -> dict[str, list[str]]:
        return {part: list(seq) for part, seq in self.assignment}

    def is_empty(self) -> bool:
        return not self.assignment and not self.enlargements

    def total_overhead(self) -> float:
        return sum(self.overhead.as_dict().values())

    def to_doc(self, game_value: float | None = None) -> dict:
        doc = {
            "id": self.id,
            "applied": [a.to_dict() for a in self.applied],
            "sequences": {part: list(seq) for part, seq in self.assignment},
            "predicted_metrics": {part: m.as_dict() for part, m in sorted(self.predicted_metrics.items())},
            "overhead": self.overhead.as_dict(),
            "protection_index": self.protection_index,
            "discouraged_penalty": self.discouraged_penalty,
            "enlargements": [{"part": a, "extends_to": b, "pi": pi} for a, b, pi in self.enlargements],
        }
        if game_value is not None:
            doc["game_value"] = game_value
        return doc


@dataclass(frozen=True)
class SearchOptions:
    use_alpha_beta: bool = True
    use_transposition: bool = True


# ---------------------------------------------------------------------------
# Suitability and prediction


def suitable_pis(session: Session, paths: list[AttackPath]) -> dict[str, list[str]]:
    """Asset part -> protection instances that shift an attribute of some
    step targeting it and whose protection addresses a requirement of the
    asset."""
    kb, app = session.kb, session.app
    parts = app.parts_by_id
    rules_seen: dict[str, set[str]] = {}
    for path in paths:
        for step in path.steps:
            target = step_target_part(step, kb, parts, path.asset)
            rules_seen.setdefault(target, set()).add(step.rule)
    out: dict[str, list[str]] = {}
    for part, rules in rules_seen.items():
        asset = app.assets_by_part.get(part)
        if asset is None:
            continue
        hits = []
        for pi in kb.protection_instances:
            protection = kb.protections_by_id.get(pi.protection)
            if protection is None or not (protection.requirements & asset.requirements):
                continue
            if any(pi.has_nonzero_delta_for(kb.rules_by_id[r]) for r in rules if r in kb.rules_by_id):
                hits.append(pi.id)
        if hits:
            out[part] = sorted(hits)
    return out


def predict_metrics(part_metrics: MetricVector, sequence, kb: KnowledgeBase, lmax: int | None = None) -> MetricVector:
    """Metrics after applying the sequence left to right."""
    sequence = list(sequence)
    if lmax is None:
        lmax = kb.thresholds.lmax
    if len(sequence) > lmax:
        raise EspError(f"sequence of {len(sequence)} instances exceeds the predictor limit of {lmax}")
    return compose_metrics(kb, part_metrics, sequence)


def estimate_overhead(assignment: Assignment, session: Session) -> OverheadVector:
    """Component-wise sum of per-instance overheads, each a linear form over
    the vanilla metrics of the part it is applied to."""
    kb, app = session.kb, session.app
    total = OverheadVector.zero()
    for part, seq in assignment:
        metrics = app.parts_by_id[part].metrics if part in app.parts_by_id else MetricVector()
        for pi_id in seq:
            total = total + kb.pis_by_id[pi_id].overhead_for(metrics)
    return total


def discouraged_penalty(assignment: Assignment, kb: KnowledgeBase) -> float:
    penalty = 1.0
    for _part, seq in assignment:
        for earlier, later in zip(seq, seq[1:]):
            factor = kb.precedence.discouraged_penalty(earlier, later)
            if factor is not None:
                penalty *= factor
    return penalty


# ---------------------------------------------------------------------------
# Candidate enumeration


def _sequence_ok(seq: tuple[str, ...], kb: KnowledgeBase) -> bool:
    singleton_seen: set[str] = set()
    for pi_id in seq:
        if seq.count(pi_id) > kb.hiding.gamma:  # global per-region deployment cap
            return False
        protection = kb.protection_of(pi_id)
        if protection.singleton:
            if protection.id in singleton_seen:
                return False
            singleton_seen.add(protection.id)
    forbidden = set(kb.precedence.forbidden)
    if forbidden:
        for i, earlier in enumerate(seq):
            for later in seq[i + 1 :]:
                if (earlier, later) in forbidden:
                    return False
    return True


def _group_sequences(pis: list[str], lmax: int, kb: KnowledgeBase) -> list[tuple[str, ...]]:
    out: list[tuple[str, ...]] = []
    for length in range(lmax + 1):
        for seq in itertools.product(pis, repeat=length):
            if _sequence_ok(seq, kb):
                out.append(seq)
    out.sort()
    return out


def correlation_groups(session: Session, suitable: dict[str, list[str]]) -> list[tuple[tuple[str, ...], list[str]]]:
    """Protectable part groups and their allowed instances. Parts sharing a
    correlation set form one group (allowed = intersection over members with
    a suitable list); others stand alone."""
    kb, app = session.kb, session.app
    grouped: set[str] = set()
    groups: list[tuple[tuple[str, ...], list[str]]] = []
    for members in kb.precedence.correlation_sets:
        present = tuple(sorted(p for p in members if p in app.parts_by_id))
        if not present:
            continue
        listed = [set(suitable[p]) for p in present if p in suitable]
        if not listed:
            grouped.update(present)
            continue
        allowed = sorted(set.intersection(*listed))
        grouped.update(present)
        if allowed:
            groups.append((present, allowed))
    for part in sorted(suitable):
        if part not in grouped:
            groups.append(((part,), suitable[part]))
    groups.sort(key=lambda g: g[0])
    return groups


def _prepare_groups(session: Session, suitable: dict[str, list[str]], budgets, lmax: int):
    """Per-group sequence options with their overhead as 5-tuples; sequences
    that alone break a budget are dropped (they can never become feasible
    since contributions are non-negative and additive)."""
    budget_t = tuple(budgets.get(n) for n in OVERHEAD_NAMES) if budgets is not None else None
    groups = correlation_groups(session, suitable)
    per_group = []
    for members, allowed in groups:
        options = []
        for seq in _group_sequences(allowed, lmax, session.kb):
            assignment = tuple((part, seq) for part in members if seq)
            overhead = estimate_overhead(assignment, session)
            over_t = tuple(overhead.get(n) for n in OVERHEAD_NAMES)
            if seq and budget_t is not None and any(o > b + 1e-9 for o, b in zip(over_t, budget_t)):
                continue
            options.append((seq, over_t))
        per_group.append(options)
    return groups, per_group, budget_t


def enumerate_candidates(
    session: Session,
    suitable: dict[str, list[str]],
    budgets: OverheadVector | None,
    lmax: int | None = None,
):
    """Yield every feasible assignment in lexicographic order.

    Per-group sequences respect layering length, singleton and forbidden
    constraints; the running overhead is pruned against the budgets.
    """
    kb = session.kb
    if lmax is None:
        lmax = kb.thresholds.lmax
    groups, per_group, budget_t = _prepare_groups(session, suitable, budgets, lmax)
    zero = (0.0,) * len(OVERHEAD_NAMES)

    def rec(idx: int, acc: list[tuple[str, tuple[str, ...]]], used: tuple[float, ...]):
        if idx == len(groups):
            yield tuple(sorted(acc))
            return
        members, _ = groups[idx]
        for seq, over_t in per_group[idx]:
            if seq:
                total = tuple(u + o for u, o in zip(used, over_t))
                if budget_t is not None and any(t > b + 1e-9 for t, b in zip(total, budget_t)):
                    continue
                yield from rec(idx + 1, acc + [(part, seq) for part in members], total)
            else:
                yield from rec(idx + 1, acc, used)

    yield from rec(0, [], zero)


# ---------------------------------------------------------------------------
# Candidate evaluation


class Evaluator:
    """Scores assignments against the gated paths, memoizing per-part
    sequence predictions and per-step modified indices."""

    def __init__(self, session: Session, paths: list[AttackPath]):
        self.session = session
        self.kb = session.kb
        self.app = session.app
        self.paths = paths
        self.aggregator = self.kb.thresholds.aggregator
        self.vanilla = [evaluate_path(session, p) for p in paths]
        self.vanilla_asset_risk = self._asset_risks([ev.index for ev in self.vanilla])
        self._metric_memo: dict[tuple[str, tuple[str, ...]], MetricVector] = {}
        self._index_memo: dict[tuple[str, tuple[str, ...], str], float] = {}
        self.weights = {a.part: a.weight for a in self.app.assets}

    def _asset_risks(self, indices: list[float]) -> dict[str, float]:
        per_asset: dict[str, list[float]] = {}
        for path, idx in zip(self.paths, indices):
            per_asset.setdefault(path.asset, []).append(idx)
        return {part: asset_risk(vals) for part, vals in per_asset.items()}

    def predicted_for(self, part: str, seq: tuple[str, ...]) -> MetricVector:
        key = (part, seq)
        if key not in self._metric_memo:
            base = self.app.parts_by_id[part].metrics if part in self.app.parts_by_id else MetricVector()
            self._metric_memo[key] = compose_metrics(self.kb, base, seq)
        return self._metric_memo[key]

    def _step_index(self, rule_id: str, target: str, seq: tuple[str, ...]) -> float:
        key = (target, seq, rule_id)
        if key not in self._index_memo:
            rule = self.kb.rules_by_id[rule_id]
            metrics = self.predicted_for(target, seq)
            self._index_memo[key] = step_index(modify_attributes(rule, metrics, list(seq), self.kb))
        return self._index_memo[key]

    def path_indices(self, assignment: Assignment) -> list[float]:
        seq_by_part = dict(assignment)
        out = []
        for path, vanilla_ev in zip(self.paths, self.vanilla):
            indices = []
            for step_ev in vanilla_ev.steps:
                seq = seq_by_part.get(step_ev.target)
                if seq:
                    indices.append(self._step_index(step_ev.rule, step_ev.target, tuple(seq)))
                else:
                    indices.append(step_ev.index)
            out.append(path_index(indices, self.aggregator))
        return out

    def protection_index(self, assignment: Assignment, solution_indices: list[float] | None = None) -> float:
        if solution_indices is None:
            solution_indices = self.path_indices(assignment)
        sol_risk = self._asset_risks(solution_indices)
        delta = sum(
            weight * (self.vanilla_asset_risk.get(part, 0.0) - sol_risk.get(part, 0.0))
            for part, weight in self.weights.items()
        )
        return discouraged_penalty(assignment, self.kb) * delta

    def path_resilience(self, assignment: Assignment) -> list[float]:
        """Mean protection resilience over applied-PI occurrences covering
        each path's target parts; 0 for uncovered paths."""
        seq_by_part = dict(assignment)
        out = []
        for vanilla_ev in self.vanilla:
            targets = {s.target for s in vanilla_ev.steps}
            rhos = []
            for target in sorted(targets):
                for pi_id in seq_by_part.get(target, ()):
                    rhos.append(self.kb.protection_of(pi_id).resilience)
            out.append(sum(rhos) / len(rhos) if rhos else 0.0)
        return out

    def build_solution(self, assignment: Assignment) -> Solution:
        indices = self.path_indices(assignment)
        predicted = {part: self.predicted_for(part, seq) for part, seq in assignment}
        return Solution(
            assignment=assignment,
            predicted_metrics=predicted,
            overhead=estimate_overhead(assignment, self.session),
            protection_index=self.protection_index(assignment, indices),
            discouraged_penalty=discouraged_penalty(assignment, self.kb),
        )


class _CandidateScan:
    """Fused candidate enumeration and protection-index scoring.

    Path indices decompose over the step targets for every supported
    aggregator, so the scan keeps per-path per-target factors up to date
    while walking the group-assignment tree and only rolls up asset risks
    at the leaves. Keeps the ``beam`` best candidates by protection index,
    ties resolved toward earlier (lexicographically smaller) candidates.
    """

    def __init__(self, evaluator: Evaluator, suitable, budgets, lmax: int, beam: int):
        self.ev = evaluator
        self.beam = beam
        self.groups, self.per_group, self.budget_t = _prepare_groups(
            evaluator.session, suitable, budgets, lmax
        )
        agg = evaluator.aggregator
        self.combine = {"product": math.prod, "sum": sum, "max": max}[agg]

        self.steps_at: dict[tuple[int, str], list[str]] = {}
        self.path_targets: list[tuple[str, ...]] = []
        for i, ev in enumerate(evaluator.vanilla):
            targets: dict[str, list] = {}
            for step in ev.steps:
                targets.setdefault(step.target, []).append((step.rule, step.index))
            self.path_targets.append(tuple(sorted(targets)))
            for target, pairs in targets.items():
                self.steps_at[(i, target)] = [rule for rule, _ in pairs]
        self.factors: list[dict[str, float]] = [
            {
                target: self.combine(idx for rule, idx in self._vanilla_pairs(i, target))
                for target in self.path_targets[i]
            }
            for i in range(len(evaluator.vanilla))
        ]
        self.values: list[float] = [self.combine(f.values()) for f in self.factors]

        slots: dict[str, int] = {}
        self.asset_slot: list[int] = []
        for path in evaluator.paths:
            self.asset_slot.append(slots.setdefault(path.asset, len(slots)))
        self.slot_weight = [0.0] * len(slots)
        self.slot_r0 = [0.0] * len(slots)
        for part, slot in slots.items():
            self.slot_weight[slot] = evaluator.weights.get(part, 0.0)
            self.slot_r0[slot] = evaluator.vanilla_asset_risk.get(part, 0.0)
        self.n_slots = len(slots)

        self.touched: dict[str, list[int]] = {}
        for i, targets in enumerate(self.path_targets):
            for target in targets:
                self.touched.setdefault(target, []).append(i)

        self._agg_memo: dict[tuple[str, tuple[str, ...]], list[tuple[int, float]]] = {}
        self._penalty_memo: dict[tuple[str, ...], float] = {}

    def _vanilla_pairs(self, i: int, target: str):
        for step in self.ev.vanilla[i].steps:
            if step.target == target:
                yield step.rule, step.index

    def _aggregate_rows(self, part: str, seq: tuple[str, ...]) -> list[tuple[int, float]]:
        key = (part, seq)
        rows = self._agg_memo.get(key)
        if rows is None:
            rows = []
            for i in self.touched.get(part, ()):
                rules = self.steps_at[(i, part)]
                rows.append(
                    (i, self.combine(self.ev._step_index(rule, part, seq) for rule in rules))
                )
            self._agg_memo[key] = rows
        return rows

    def _seq_penalty(self, seq: tuple[str, ...]) -> float:
        factor = self._penalty_memo.get(seq)
        if factor is None:
            factor = 1.0
            kb = self.ev.kb
            for earlier, later in zip(seq, seq[1:]):
                delta = kb.precedence.discouraged_penalty(earlier, later)
                if delta is not None:
                    factor *= delta
            self._penalty_memo[seq] = factor
        return factor

    def run(self) -> list[Assignment]:
        heap: list[tuple[float, int, Assignment]] = []
        zero = (0.0,) * len(OVERHEAD_NAMES)
        leaf_counter = [0]
        combine = self.combine
        factors, values = self.factors, self.values

        def leaf(acc: list, penalty: float):
            surv = [1.0] * self.n_slots
            for i, value in enumerate(values):
                surv[self.asset_slot[i]] *= 1.0 - value
            delta = 0.0
            for s in range(self.n_slots):
                delta += self.slot_weight[s] * (self.slot_r0[s] - (1.0 - surv[s]))
            p = penalty * delta
            leaf_counter[0] += 1
            order = -leaf_counter[0]
            if len(heap) < self.beam:
                heapq.heappush(heap, (p, order, tuple(sorted(acc))))
            elif (p, order) > heap[0][:2]:
                heapq.heappushpop(heap, (p, order, tuple(sorted(acc))))

        def rec(idx: int, acc: list, used: tuple, penalty: float):
            if idx == len(self.groups):
                leaf(acc, penalty)
                return
            members, _ = self.groups[idx]
            for seq, over_t in self.per_group[idx]:
                if not seq:
                    rec(idx + 1, acc, used, penalty)
                    continue
                total = tuple(u + o for u, o in zip(used, over_t))
                if self.budget_t is not None and any(
                    t > b + 1e-9 for t, b in zip(total, self.budget_t)
                ):
                    continue
                changes = []
                for part in members:
                    for i, aggregate in self._aggregate_rows(part, seq):
                        changes.append((i, part, factors[i][part], values[i]))
                        factors[i][part] = aggregate
                        values[i] = combine(factors[i].values())
                new_penalty = penalty
                for _ in members:
                    new_penalty *= self._seq_penalty(seq)
                rec(idx + 1, acc + [(part, seq) for part in members], total, new_penalty)
                for i, part, old_factor, old_value in reversed(changes):
                    factors[i][part] = old_factor
                    values[i] = old_value

        rec(0, [], zero, 1.0)
        ranked = sorted(heap, key=lambda row: (-row[0], -row[1]))
        return [row[2] for row in ranked]


# ---------------------------------------------------------------------------
# The protection game


@dataclass
class GameState:
    """Attacker progress against one candidate: per-path invested effort."""

    solution_id: str
    invested: tuple[int, ...]
    remaining: int
    score: float

    def to_dict(self) -> dict:
        return {
            "solution": self.solution_id,
            "invested": list(self.invested),
            "remaining": self.remaining,
            "score": self.score,
        }


class _Game:
    def __init__(self, evaluator: Evaluator, solution: Solution, effort: int, search: SearchOptions):
        self.ev = evaluator
        self.solution = solution
        self.effort = effort
        self.search = search
        self.penalty = solution.discouraged_penalty
        self.r_van = [ev.index for ev in evaluator.vanilla]
        self.r_sol = evaluator.path_indices(solution.assignment)
        self.rho = evaluator.path_resilience(solution.assignment)
        self.assets = [p.asset for p in evaluator.paths]
        self.tt: dict[tuple[int, ...], float] = {}

    def eroded_index(self, i: int, units: int) -> float:
        van, sol = self.r_van[i], self.r_sol[i]
        return van - (van - sol) * (self.rho[i] ** units)

    def value_of(self, counts: tuple[int, ...]) -> float:
        per_asset: dict[str, float] = {}
        for i, asset in enumerate(self.assets):
            survive = per_asset.get(asset, 1.0)
            per_asset[asset] = survive * (1.0 - self.eroded_index(i, counts[i]))
        delta = 0.0
        for part, weight in self.ev.weights.items():
            risk_now = 1.0 - per_asset[part] if part in per_asset else self.ev.vanilla_asset_risk.get(part, 0.0)
            delta += weight * (self.ev.vanilla_asset_risk.get(part, 0.0) - risk_now)
        return self.penalty * delta

    def optimistic_bound(self, counts: tuple[int, ...], remaining: int) -> float:
        """Value when every path independently takes whichever of 0 or all
        remaining units suits the attacker best, a relaxation of the shared
        budget, so never above the true subtree minimum."""
        boosted = tuple(
            c + remaining if self.eroded_index(i, c + remaining) >= self.eroded_index(i, c) else c
            for i, c in enumerate(counts)
        )
        return self.value_of(boosted)

    def play(self) -> float:
        if not self.ev.paths or self.effort == 0:
            return self.solution.protection_index
        return self._search(tuple([0] * len(self.ev.paths)), self.effort)

    def _search(self, counts: tuple[int, ...], remaining: int) -> float:
        if remaining == 0:
            return self.value_of(counts)
        if self.search.use_transposition:
            cached = self.tt.get(counts)
            if cached is not None:
                return cached
        best = float("inf")
        for i in range(len(counts)):
            child = tuple(c + 1 if j == i else c for j, c in enumerate(counts))
            if self.search.use_alpha_beta and best < float("inf"):
                if self.optimistic_bound(child, remaining - 1) >= best:
                    continue  # cannot lower this node's minimum
            value = self._search(child, remaining - 1)
            if value < best:
                best = value
        if self.search.use_transposition:
            self.tt[counts] = best
        return best


def play_game(
    session: Session,
    candidates: list[Solution],
    effort: int | None = None,
    search: SearchOptions = SearchOptions(),
    evaluator: Evaluator | None = None,
    paths: list[AttackPath] | None = None,
) -> list[tuple[Solution, float]]:
    """Rank candidates by their worst-case protection index after the
    attacker optimally spends the effort budget."""
    if evaluator is None:
        if paths is None:
            raise ValueError("play_game needs an evaluator or the gated paths")
        evaluator = Evaluator(session, paths)
    if effort is None:
        effort = session.effort_budget
    ranked = []
    for solution in candidates:
        value = _Game(evaluator, solution, effort, search).play()
        ranked.append((solution, value))
    ranked.sort(key=lambda sv: (-sv[1], sv[0].total_overhead(), assignment_signature(sv[0].assignment)))
    return ranked


def mitigate(
    session: Session,
    paths: list[AttackPath],
    budgets: OverheadVector | None = None,
    lmax: int | None = None,
    effort: int | None = None,
    beam: int | None = None,
    search: SearchOptions = SearchOptions(),
) -> list[tuple[Solution, float]]:
    """Full mitigation stage: enumerate, score, beam by protection index,
    play the game, rank."""
    kb = session.kb
    if budgets is None:
        budgets = kb.thresholds.budgets
    if lmax is None:
        lmax = kb.thresholds.lmax
    if beam is None:
        beam = kb.thresholds.beam_width

    evaluator = Evaluator(session, paths)
    suitable = suitable_pis(session, paths)
    survivors = _CandidateScan(evaluator, suitable, budgets, lmax, beam).run()
    if () not in survivors:  # the empty solution always plays (game value 0 floor)
        survivors.append(())
    candidates = [evaluator.build_solution(a) for a in survivors]
    return play_game(session, candidates, effort=effort, search=search, evaluator=evaluator)
