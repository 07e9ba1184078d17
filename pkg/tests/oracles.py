"""Independent brute-force oracles and randomized instance generators.

These deliberately avoid the engine's code paths: the proof enumerator
grounds rules up front and works propositionally, the candidate and game
oracles enumerate with itertools and recompute risk through the public
one-path evaluator, and the knapsack oracle enumerates all 2^n assignments
with numpy.
"""

from __future__ import annotations

import itertools
import math
import random

import numpy as np

from esp.model import (
    ApplicationModel,
    ApplicationPart,
    Asset,
    AttackerModel,
    AttackStepRule,
    AttributeVector,
    KnowledgeBase,
    MetricVector,
    OverheadVector,
    PrecedenceRules,
    Protection,
    ProtectionInstance,
    Synergy,
    Term,
    Thresholds,
    is_variable,
)
from esp.risk import asset_risk, evaluate_path


# ---------------------------------------------------------------------------
# Exhaustive proof enumeration (attack-path oracle)


def _ground_rules(kb: KnowledgeBase, domain: list[str]):
    grounded = []
    for rule in kb.rules:
        variables = sorted({v for t in (rule.head, *rule.premises) for v in t.variables()})
        for combo in itertools.product(domain, repeat=len(variables)):
            binding = dict(zip(variables, combo))
            grounded.append(
                (
                    rule,
                    binding,
                    rule.head.substitute(binding),
                    tuple(p.substitute(binding) for p in rule.premises),
                )
            )
    return grounded


def oracle_paths(kb: KnowledgeBase, app: ApplicationModel, max_depth: int) -> set:
    """Set of (asset part, requirement, ((rule, binding items), ...)) for all
    proofs with at most ``max_depth`` attack steps."""
    domain = sorted({a.part for a in app.assets})
    grounded = _ground_rules(kb, domain)
    by_head: dict[Term, list] = {}
    for entry in grounded:
        by_head.setdefault(entry[2], []).append(entry)

    memo: dict[tuple, list] = {}

    def prove(atom: Term, used: frozenset) -> list:
        """All (steps tuple, step count) proofs of a ground atom with at most
        max_depth steps (heavier subproofs can never be part of one)."""
        key = (atom, used)
        cached = memo.get(key)
        if cached is not None:
            return cached
        results = []
        for rule, binding, _head, premises in by_head.get(atom, ()):
            if rule.id in used:
                continue
            sub_used = used | {rule.id}
            per_premise = []
            dead = False
            for premise in premises:
                proofs = prove(premise, sub_used)
                if not proofs:
                    dead = True
                    break
                per_premise.append(proofs)
            if dead:
                continue
            own = ((rule.id, tuple(sorted(binding.items()))),) if rule.is_step else ()
            own_count = 1 if rule.is_step else 0
            min_tail = [0] * (len(per_premise) + 1)
            for k in range(len(per_premise) - 1, -1, -1):
                min_tail[k] = min_tail[k + 1] + min(c for _, c in per_premise[k])

            def combine(k: int, steps_acc: tuple, count_acc: int):
                if count_acc + min_tail[k] + own_count > max_depth:
                    return
                if k == len(per_premise):
                    results.append((steps_acc + own, count_acc + own_count))
                    return
                for steps, count in per_premise[k]:
                    combine(k + 1, steps_acc + steps, count_acc + count)

            combine(0, (), 0)
        memo[key] = results
        return results

    out = set()
    for asset in app.assets:
        for req in sorted(asset.requirements):
            goals = []
            if kb.predicates.get(f"breach_{req}") == 1:
                goals.append(Term(f"breach_{req}", (asset.part,)))
            goals.append(Term("breached", (req, asset.part)))
            for goal in goals:
                for steps, _count in prove(goal, frozenset()):
                    if steps:
                        out.add((asset.part, req, steps))
    return out


def engine_paths_as_set(paths) -> set:
    return {(p.asset, p.requirement, tuple((s.rule, s.binding) for s in p.steps)) for p in paths}


# ---------------------------------------------------------------------------
# Exhaustive candidate enumeration (mitigation oracle)


def oracle_overhead(assignment, session) -> dict:
    total = {name: 0.0 for name in OverheadVector().as_dict()}
    for part, seq in assignment:
        metrics = session.app.parts_by_id[part].metrics
        for pi_id in seq:
            pi = session.kb.pis_by_id[pi_id]
            for comp, row in pi.overhead_coeffs.items():
                total[comp] += sum(coeff * metrics.get(metric) for metric, coeff in row.items())
    return total


def oracle_candidates(session, suitable, budgets, lmax) -> set:
    """All feasible assignments by filtering the full cross product."""
    kb = session.kb
    group_of = {}
    for i, group in enumerate(kb.precedence.correlation_sets):
        for part in group:
            group_of[part] = i

    keys = []
    grouped: dict[int, list[str]] = {}
    for part in sorted(suitable):
        if part in group_of:
            grouped.setdefault(group_of[part], []).append(part)
        else:
            keys.append((part,))
    for gid, members in sorted(grouped.items()):
        all_members = sorted(p for p in kb.precedence.correlation_sets[gid] if p in session.app.parts_by_id)
        keys.append(tuple(all_members))

    def sequences_for(parts):
        with_lists = [set(suitable[p]) for p in parts if p in suitable]
        if not with_lists:
            return [()]
        allowed = sorted(set.intersection(*with_lists))
        seqs = []
        for length in range(lmax + 1):
            for seq in itertools.product(allowed, repeat=length):
                seqs.append(seq)
        return seqs

    def ok(seq):
        seen_singletons = set()
        for pi in seq:
            if seq.count(pi) > kb.hiding.gamma:
                return False
            prot = kb.protection_of(pi)
            if prot.singleton:
                if prot.id in seen_singletons:
                    return False
                seen_singletons.add(prot.id)
        for i in range(len(seq)):
            for j in range(i + 1, len(seq)):
                if (seq[i], seq[j]) in set(kb.precedence.forbidden):
                    return False
        return True

    out = set()
    options = [[s for s in sequences_for(parts) if ok(s)] for parts in sorted(keys)]
    for combo in itertools.product(*options):
        assignment = tuple(
            sorted(
                (part, seq)
                for parts, seq in zip(sorted(keys), combo)
                if seq
                for part in parts
            )
        )
        over = oracle_overhead(assignment, session)
        if budgets is not None and any(over[c] > budgets.get(c) + 1e-9 for c in over):
            continue
        out.add(assignment)
    return out


# ---------------------------------------------------------------------------
# Exhaustive game (defender/attacker oracle)


def oracle_solution_metrics(session, paths, assignment):
    """(vanilla indices, solution indices, rho per path, penalty, P)."""
    kb = session.kb
    applied = {part: list(seq) for part, seq in assignment}
    vanilla = [evaluate_path(session, p) for p in paths]
    under = [evaluate_path(session, p, applied_by_part=applied) for p in paths]
    rhos = []
    for ev in vanilla:
        occurrences = []
        for target in sorted({s.target for s in ev.steps}):
            for pi_id in applied.get(target, []):
                occurrences.append(kb.protection_of(pi_id).resilience)
        rhos.append(sum(occurrences) / len(occurrences) if occurrences else 0.0)

    penalty = 1.0
    for _part, seq in assignment:
        for a, b in zip(seq, seq[1:]):
            d = kb.precedence.discouraged_penalty(a, b)
            if d is not None:
                penalty *= d
    return vanilla, under, rhos, penalty


def oracle_value(session, paths, vanilla, under, rhos, penalty, counts):
    by_asset: dict[str, list[float]] = {}
    for i, path in enumerate(paths):
        van, sol = vanilla[i].index, under[i].index
        restored = van - (van - sol) * (rhos[i] ** counts[i])
        by_asset.setdefault(path.asset, []).append(restored)
    van_by_asset: dict[str, list[float]] = {}
    for i, path in enumerate(paths):
        van_by_asset.setdefault(path.asset, []).append(vanilla[i].index)
    weights = {a.part: a.weight for a in session.app.assets}
    delta = 0.0
    for part, weight in weights.items():
        r0 = asset_risk(van_by_asset.get(part, []))
        now = asset_risk(by_asset.get(part, []))
        delta += weight * (r0 - now)
    return penalty * delta


def oracle_game_value(session, paths, assignment, effort) -> float:
    vanilla, under, rhos, penalty = oracle_solution_metrics(session, paths, assignment)
    if not paths or effort == 0:
        return oracle_value(session, paths, vanilla, under, rhos, penalty, [0] * len(paths))
    best = math.inf
    for chosen in itertools.combinations_with_replacement(range(len(paths)), effort):
        counts = [0] * len(paths)
        for i in chosen:
            counts[i] += 1
        value = oracle_value(session, paths, vanilla, under, rhos, penalty, counts)
        best = min(best, value)
    return best


def oracle_protection_index(session, paths, assignment) -> float:
    vanilla, under, rhos, penalty = oracle_solution_metrics(session, paths, assignment)
    return oracle_value(session, paths, vanilla, under, rhos, penalty, [0] * len(paths))


# ---------------------------------------------------------------------------
# Exhaustive 0/1 knapsack oracle


_BITS_CACHE: dict[int, "np.ndarray"] = {}


def _bit_columns(n: int) -> "np.ndarray":
    bits = _BITS_CACHE.get(n)
    if bits is None:
        count = 1 << n
        bits = ((np.arange(count, dtype=np.uint32)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)
        _BITS_CACHE[n] = bits
    return bits


def oracle_milp(model) -> tuple[float, tuple[int, ...]]:
    """Optimal value and one optimal assignment by full enumeration."""
    n = len(model.variables)
    bits = _bit_columns(n)
    count = 1 << n
    feasible = np.ones(count, dtype=bool)
    for row in model.rows:
        lhs = np.zeros(count)
        for idx, coeff in row.coeffs:
            lhs += coeff * bits[:, idx]
        feasible &= lhs <= row.bound + 1e-9
    totals = np.zeros(count)
    for idx, variable in enumerate(model.variables):
        if variable.coefficient:
            totals += variable.coefficient * bits[:, idx]
    totals[~feasible] = -np.inf
    best = int(np.argmax(totals))
    assignment = tuple(int((best >> k) & 1) for k in range(n))
    return float(totals[best]), assignment


def oracle_milp_feasible(model, assignment) -> bool:
    for row in model.rows:
        lhs = sum(coeff for idx, coeff in row.coeffs if assignment[idx] == 1)
        if lhs > row.bound + 1e-9:
            return False
    return True


# ---------------------------------------------------------------------------
# Random instance generators (all seeded, deterministic)

REQS = ("confidentiality", "integrity")
TAGS = ("static_analysis", "dynamic_analysis", "tampering", "data_leak")


def random_kb(rng: random.Random, max_rules: int = 12, max_assets: int = 3):
    """Random KB + app for the attack-path oracle."""
    n_assets = rng.randint(1, max_assets)
    parts = [f"p{i}" for i in range(n_assets)]
    app = ApplicationModel(
        parts=[
            ApplicationPart(id=p, kind="variable", name=p, metrics=MetricVector(1, 0, 0, 0.0, 1))
            for p in parts
        ],
        assets=[
            Asset(part=p, requirements=frozenset(rng.sample(REQS, rng.randint(1, 2))), weight=rng.uniform(0.5, 3))
            for p in parts
        ],
    )

    predicates = {"breach_confidentiality": 1, "breach_integrity": 1}
    n_unary = rng.randint(1, 5)
    n_nullary = rng.randint(0, 2)
    for i in range(n_unary):
        predicates[f"u{i}"] = 1
    for i in range(n_nullary):
        predicates[f"e{i}"] = 0

    def random_atom(allow_breach=False):
        name = rng.choice(sorted(predicates))
        while not allow_breach and name.startswith("breach_"):
            name = rng.choice(sorted(predicates))
        if predicates[name] == 0:
            return name
        arg = rng.choice(["A", "A", "A", rng.choice(parts)])
        return f"{name}({arg})"

    rules = []
    n_rules = rng.randint(3, max_rules)
    for i in range(n_rules):
        rid = f"r{i}"
        if i < 2:
            head = f"breach_{REQS[i % 2]}(A)"
        else:
            head = random_atom()
        n_prem = rng.choice([0, 0, 1, 1, 1, 2])
        premises = [random_atom() for _ in range(n_prem)]
        is_step = rng.random() < 0.7
        rules.append(
            AttackStepRule(
                id=rid,
                head=_parse(head),
                premises=tuple(_parse(p) for p in premises),
                tags=tuple(rng.sample(TAGS, rng.randint(0, 2))),
                attributes=AttributeVector(
                    rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 5)
                )
                if is_step
                else None,
            )
        )
    kb = KnowledgeBase(
        predicates=predicates,
        rules=rules,
        attacker=AttackerModel(expertise=rng.choice(list(("geek", "amateur", "professional", "guru")))),
        thresholds=Thresholds(metric_bands=()),
    )
    return kb, app


def _parse(text: str):
    from esp.model import parse_term

    return parse_term(text)


def random_hiding_model(rng: random.Random, max_vars: int = 20):
    """Random 0/1 model in the solver's shape: non-negative objective,
    budget rows, and structural rows (symmetry chains, pair exclusions)."""
    from esp.hiding import HidingModel, HidingVariable, Row

    n = rng.randint(2, max_vars)
    variables = [
        HidingVariable(
            name=f"v{i}",
            kind="replicate",
            pi=f"pi{i}",
            part=f"r{i}",
            replica=1,
            coefficient=round(rng.uniform(0.0, 10.0), 3) if rng.random() < 0.9 else 0.0,
        )
        for i in range(n)
    ]
    rows = []
    for b in range(rng.randint(1, 5)):
        coeffs = []
        for i in range(n):
            if rng.random() < 0.7:
                coeffs.append((i, round(rng.uniform(0.1, 5.0), 3)))
        bound = round(rng.uniform(0.0, 12.0), 3) if rng.random() < 0.9 else 0.0
        rows.append(Row(label=f"budget_{b}", coeffs=tuple(coeffs), bound=bound, budget=True))
    # symmetry-style chains
    if n >= 2 and rng.random() < 0.6:
        i, j = sorted(rng.sample(range(n), 2))
        rows.append(Row(label=f"sym_{i}_{j}", coeffs=((i, -1.0), (j, 1.0)), bound=0.0))
    # exclusion pairs
    for _ in range(rng.randint(0, 2)):
        if n >= 2:
            i, j = rng.sample(range(n), 2)
            rows.append(Row(label=f"excl_{i}_{j}", coeffs=((i, 1.0), (j, 1.0)), bound=1.0))
    return HidingModel(variables=variables, rows=rows, gamma=2)


def game_instance_size(session, paths, suitable, lmax: int) -> int:
    """Upper bound on the candidate count (used to skip pathological draws
    so exhaustive oracles stay fast)."""
    total = 1
    for _part, pis in suitable.items():
        per_part = sum(len(pis) ** k for k in range(lmax + 1))
        total *= per_part
    return total


def random_game_instance(rng: random.Random):
    """Small random session for the game oracle: <= 3 assets, <= 4 PIs,
    lmax <= 2, effort <= 2."""
    kb, app = random_kb(rng, max_rules=8, max_assets=3)

    n_prot = rng.randint(1, 3)
    protections = [
        Protection(
            id=f"prot{i}",
            requirements=frozenset(rng.sample(REQS, rng.randint(1, 2))),
            singleton=rng.random() < 0.3,
            resilience=round(rng.uniform(0.1, 1.0), 3),
            fingerprint=round(rng.uniform(0.0, 1.0), 3),
        )
        for i in range(n_prot)
    ]
    n_pis = rng.randint(1, 4)
    step_ids = [r.id for r in kb.rules if r.is_step]
    pis = []
    for i in range(n_pis):
        deltas = {}
        for target in rng.sample(step_ids + list(TAGS), rng.randint(1, min(3, len(step_ids) + len(TAGS)))):
            deltas[target] = {
                rng.choice(["complexity", "required_skill", "tool_availability", "tool_usability"]): rng.choice(
                    [-2, -1, 1, 1, 2, 3]
                )
            }
        pis.append(
            ProtectionInstance(
                id=f"pi{i}",
                protection=protections[rng.randrange(n_prot)].id,
                config="std",
                attribute_deltas=deltas,
                metric_scale={"sloc": {"sloc": round(rng.uniform(0.8, 2.0), 2)}} if rng.random() < 0.5 else {},
                metric_offset={"sloc": rng.randint(0, 30)} if rng.random() < 0.5 else {},
                overhead_coeffs={
                    "client_time": {"sloc": round(rng.uniform(0.0, 2.0), 2)},
                    "client_memory": {"sloc": round(rng.uniform(0.0, 2.0), 2)},
                },
            )
        )

    pi_ids = [pi.id for pi in pis]
    forbidden = []
    discouraged = []
    synergies = []
    if len(pi_ids) >= 2 and rng.random() < 0.4:
        a, b = rng.sample(pi_ids, 2)
        forbidden.append((a, b))
    if len(pi_ids) >= 2 and rng.random() < 0.4:
        a, b = rng.sample(pi_ids, 2)
        if (a, b) not in forbidden:
            discouraged.append((a, b, round(rng.uniform(0.5, 0.95), 2)))
    if len(pi_ids) >= 2 and rng.random() < 0.4:
        a, b = sorted(rng.sample(pi_ids, 2))
        synergies.append(Synergy(pair=(a, b), delta={"complexity": rng.choice([-1, 1, 2])}))
    correlation = ()
    asset_parts = [a.part for a in app.assets]
    if len(asset_parts) >= 2 and rng.random() < 0.3:
        correlation = (tuple(sorted(rng.sample(asset_parts, 2))),)

    kb.protections = protections
    kb.protection_instances = pis
    kb.precedence = PrecedenceRules(
        forbidden=tuple(forbidden),
        discouraged=tuple(discouraged),
        synergies=tuple(synergies),
        correlation_sets=correlation,
    )
    kb.attacker = AttackerModel(
        expertise=rng.choice(("geek", "amateur", "professional", "guru")),
        effort_budget=rng.randint(0, 2) or None,
    )
    if rng.random() < 0.7:
        budgets = OverheadVector(
            client_time=round(rng.uniform(0.0, 8.0), 1),
            client_memory=round(rng.uniform(0.0, 8.0), 1),
            server_time=8.0,
            server_memory=8.0,
            network_traffic=8.0,
        )
    else:
        budgets = None
    kb.thresholds = Thresholds(lmax=rng.randint(1, 2), metric_bands=(), budgets=budgets)
    kb.__post_init__()
    effort = rng.randint(0, 2)
    return kb, app, effort


def random_e2e_instance(rng: random.Random):
    """Random session with regions and adjacency so the hiding stage has
    replication / enlargement / shadowing targets."""
    kb, _one_var_app, effort = random_game_instance(rng)

    parts = [
        ApplicationPart(
            id="fn",
            kind="function",
            name="fn",
            metrics=MetricVector(rng.randint(10, 60), rng.randint(1, 12), 0, rng.uniform(0, 400), rng.randint(0, 40)),
        )
    ]
    n_regions = rng.randint(1, 3)
    for i in range(n_regions):
        parts.append(
            ApplicationPart(
                id=f"rg{i}",
                kind="code-region",
                name=f"rg{i}",
                parent="fn",
                metrics=MetricVector(rng.randint(2, 30), rng.randint(1, 8), 0, rng.uniform(0, 200), rng.randint(0, 20)),
            )
        )
    assets = [Asset(part="rg0", requirements=frozenset(rng.sample(REQS, rng.randint(1, 2))), weight=rng.uniform(0.5, 3))]
    if rng.random() < 0.5:
        parts.append(ApplicationPart(id="val", kind="variable", name="val", metrics=MetricVector(1, 0, 0, 0.0, 1)))
        assets.append(Asset(part="val", requirements=frozenset(rng.sample(REQS, rng.randint(1, 2))), weight=rng.uniform(0.5, 2)))
    adjacency = []
    for i in range(n_regions - 1):
        if rng.random() < 0.7:
            adjacency.append((f"rg{i}", f"rg{i + 1}"))
    app = ApplicationModel(parts=parts, assets=assets, adjacency=adjacency)

    # rebind correlation sets to parts that exist here
    groups = ()
    if rng.random() < 0.25 and len(assets) >= 2:
        groups = (tuple(sorted(a.part for a in assets[:2])),)
    kb.precedence = PrecedenceRules(
        forbidden=kb.precedence.forbidden,
        discouraged=kb.precedence.discouraged,
        synergies=kb.precedence.synergies,
        correlation_sets=groups,
    )
    if kb.thresholds.budgets is None and rng.random() < 0.8:
        kb.thresholds = Thresholds(
            lmax=kb.thresholds.lmax,
            metric_bands=(),
            budgets=OverheadVector(
                client_time=rng.uniform(0, 40),
                client_memory=rng.uniform(0, 40),
                server_time=20.0,
                server_memory=20.0,
                network_traffic=20.0,
            ),
        )
    kb.__post_init__()
    return kb, app, effort
