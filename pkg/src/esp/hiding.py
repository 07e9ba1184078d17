"""Asset hiding: fingerprint replication, enlargement and shadowing.

The chosen base solution leaves recognizable protection fingerprints on the
asset regions. This module builds a 0-1 model whose variables replicate a
deployed instance onto non-asset regions (x, up to gamma replicas),
enlarge the coverage of a region's top instance onto an adjacent region (y),
or shadow a protected region with an extra stealthier instance (z). The
linear confusion index is maximized subject to the residual overhead
budgets, replica-symmetry rows, and forbidden-pair exclusion rows; the
solver is a best-first branch-and-bound with a surrogate fractional
knapsack bound. The optimum is translated back into a solution that keeps
the base deployment fixed and only appends.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field

from .errors import InfeasibleModelError, TranslationError
from .mitigation import Assignment, Evaluator, Solution, discouraged_penalty, estimate_overhead
from .model import (
    METRIC_NAMES,
    MetricVector,
    OverheadVector,
    OVERHEAD_NAMES,
    Session,
)
from .risk import compose_metrics


@dataclass(frozen=True)
class HidingVariable:
    name: str
    kind: str  # replicate | enlarge | shadow
    pi: str
    part: str
    replica: int = 0  # replicate only
    extends_to: str = ""  # enlarge only
    coefficient: float = 0.0  # confusion contribution
    overhead: OverheadVector = OverheadVector()


@dataclass(frozen=True)
class Row:
    label: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    bound: float
    budget: bool = False  # budget rows feed the surrogate bound


@dataclass
class HidingModel:
    variables: list[HidingVariable]
    rows: list[Row]
    gamma: int
    base_id: str = ""

    def objective(self) -> list[float]:
        return [v.coefficient for v in self.variables]


@dataclass(frozen=True)
class ConfusionIndex:
    value: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SolveResult:
    assignment: tuple[int, ...]
    confusion: ConfusionIndex
    status: str  # optimal | suboptimal
    explored: int

    def selected(self, model: HidingModel) -> list[HidingVariable]:
        return [v for v, bit in zip(model.variables, self.assignment) if bit]


# ---------------------------------------------------------------------------
# Model construction


def _normalized_metrics(app) -> dict[str, tuple[float, ...]]:
    maxima = {name: 0.0 for name in METRIC_NAMES}
    for part in app.parts:
        for name in METRIC_NAMES:
            maxima[name] = max(maxima[name], float(part.metrics.get(name)))
    out = {}
    for part in app.parts:
        out[part.id] = tuple(
            float(part.metrics.get(name)) / maxima[name] if maxima[name] > 0 else 0.0
            for name in METRIC_NAMES
        )
    return out


def _similarity_to_assets(app) -> dict[str, float]:
    """1 / (1 + L1 distance) between a part's normalized metrics and the mean
    normalized metrics of the asset parts."""
    normalized = _normalized_metrics(app)
    asset_vectors = [normalized[a.part] for a in app.assets if a.part in normalized]
    if asset_vectors:
        mean = tuple(sum(col) / len(asset_vectors) for col in zip(*asset_vectors))
    else:
        mean = tuple(0.0 for _ in METRIC_NAMES)
    return {
        pid: 1.0 / (1.0 + sum(abs(a - b) for a, b in zip(vec, mean)))
        for pid, vec in normalized.items()
    }


_NAME_RE = re.compile(r"[^A-Za-z0-9]")


def _var_name(kind: str, *pieces: str, taken: set[str]) -> str:
    base = "_".join([kind, *(_NAME_RE.sub("_", p) for p in pieces if p)])
    name, suffix = base, 2
    while name in taken:
        name = f"{base}_{suffix}"
        suffix += 1
    taken.add(name)
    return name


def build_model(
    session: Session,
    base: Solution,
    gamma: int | None = None,
    budgets: OverheadVector | None = None,
) -> HidingModel:
    """Hiding model for one base solution under the residual budgets."""
    kb, app = session.kb, session.app
    if gamma is None:
        gamma = kb.hiding.gamma
    if budgets is None:
        budgets = kb.thresholds.budgets
    residual = None
    if budgets is not None:
        residual = budgets - base.overhead
        for comp in OVERHEAD_NAMES:
            if residual.get(comp) < -1e-9:
                raise InfeasibleModelError(
                    f"base solution already exceeds the {comp} budget by {-residual.get(comp):.4g}"
                )

    sequences = dict(base.assignment)
    base_pis = sorted({pi for seq in sequences.values() for pi in seq})
    asset_parts = set(app.assets_by_part)
    regions = [
        p for p in sorted(app.parts, key=lambda p: p.id)
        if p.kind in ("function", "code-region") and p.id not in asset_parts
    ]
    similarity = _similarity_to_assets(app)
    forbidden = set(kb.precedence.forbidden)

    variables: list[HidingVariable] = []
    taken: set[str] = set()
    beta = kb.hiding

    # x: replicate a deployed instance onto a non-asset region, k = 1..gamma
    for pi_id in base_pis:
        pi = kb.pis_by_id[pi_id]
        protection = kb.protections_by_id[pi.protection]
        replicas = 1 if protection.singleton else gamma
        if (pi_id, pi_id) in forbidden:
            replicas = 1
        coeff_base = beta.beta_replication * protection.fingerprint
        for region in regions:
            for k in range(1, replicas + 1):
                variables.append(
                    HidingVariable(
                        name=_var_name("x", pi_id, region.id, str(k), taken=taken),
                        kind="replicate",
                        pi=pi_id,
                        part=region.id,
                        replica=k,
                        coefficient=coeff_base * similarity[region.id],
                        overhead=pi.overhead_for(region.metrics),
                    )
                )

    # y: enlarge the top instance of a protected asset region onto a neighbour
    for part_id in sorted(sequences):
        seq = sequences[part_id]
        if not seq:
            continue
        top_pi = kb.pis_by_id[seq[-1]]
        top_fp = kb.protections_by_id[top_pi.protection].fingerprint
        for neighbour in session.app.adjacent_to(part_id):
            if neighbour == part_id:
                continue
            n_part = app.parts_by_id[neighbour]
            variables.append(
                HidingVariable(
                    name=_var_name("y", part_id, neighbour, taken=taken),
                    kind="enlarge",
                    pi=top_pi.id,
                    part=part_id,
                    extends_to=neighbour,
                    coefficient=beta.beta_enlargement * top_fp * n_part.metrics.sloc,
                    overhead=top_pi.overhead_for(n_part.metrics),
                )
            )

    # z: shadow a protected asset region with one extra instance
    for part_id in sorted(sequences):
        seq = sequences[part_id]
        if not seq:
            continue
        base_fp = kb.protections_by_id[kb.pis_by_id[seq[-1]].protection].fingerprint
        part = app.parts_by_id[part_id]
        for pi in sorted(kb.protection_instances, key=lambda p: p.id):
            protection = kb.protections_by_id[pi.protection]
            if protection.singleton and any(kb.pis_by_id[s].protection == protection.id for s in seq):
                continue
            if seq.count(pi.id) + 1 > gamma:
                continue
            if any((earlier, pi.id) in forbidden for earlier in seq):
                continue
            variables.append(
                HidingVariable(
                    name=_var_name("z", pi.id, part_id, taken=taken),
                    kind="shadow",
                    pi=pi.id,
                    part=part_id,
                    coefficient=beta.beta_shadowing * base_fp * (1.0 - protection.fingerprint),
                    overhead=pi.overhead_for(part.metrics),
                )
            )

    index_of = {v.name: i for i, v in enumerate(variables)}
    rows: list[Row] = []

    if residual is not None:
        for comp in OVERHEAD_NAMES:
            coeffs = tuple(
                (i, v.overhead.get(comp)) for i, v in enumerate(variables) if v.overhead.get(comp) > 0
            )
            rows.append(Row(label=f"budget_{comp}", coeffs=coeffs, bound=residual.get(comp), budget=True))

    # replica symmetry: x_{p,r,k+1} <= x_{p,r,k}
    by_replica: dict[tuple[str, str], list[HidingVariable]] = {}
    for v in variables:
        if v.kind == "replicate":
            by_replica.setdefault((v.pi, v.part), []).append(v)
    for (pi_id, region_id), group in sorted(by_replica.items()):
        group.sort(key=lambda v: v.replica)
        for lower, upper in zip(group, group[1:]):
            rows.append(
                Row(
                    label=f"sym_{upper.name}",
                    coeffs=((index_of[lower.name], -1.0), (index_of[upper.name], 1.0)),
                    bound=0.0,
                )
            )

    # forbidden-pair exclusions among co-located additions (translation
    # appends in id order, so only the earlier->later direction can occur)
    repl_regions: dict[str, list[tuple[str, HidingVariable]]] = {}
    for v in variables:
        if v.kind == "replicate":
            repl_regions.setdefault(v.part, []).append((v.pi, v))
    for region_id, group in sorted(repl_regions.items()):
        pis_here = sorted({pi for pi, _ in group})
        for i, p1 in enumerate(pis_here):
            for p2 in pis_here[i + 1 :]:
                clash = (p1, p2) in forbidden
                singleton_clash = (
                    kb.pis_by_id[p1].protection == kb.pis_by_id[p2].protection
                    and kb.protections_by_id[kb.pis_by_id[p1].protection].singleton
                )
                if not clash and not singleton_clash:
                    continue
                for _, v1 in [g for g in group if g[0] == p1]:
                    for _, v2 in [g for g in group if g[0] == p2]:
                        rows.append(
                            Row(
                                label=f"excl_{v1.name}_{v2.name}",
                                coeffs=((index_of[v1.name], 1.0), (index_of[v2.name], 1.0)),
                                bound=1.0,
                            )
                        )

    shadow_regions: dict[str, list[HidingVariable]] = {}
    for v in variables:
        if v.kind == "shadow":
            shadow_regions.setdefault(v.part, []).append(v)
    for region_id, group in sorted(shadow_regions.items()):
        group.sort(key=lambda v: v.pi)
        for i, v1 in enumerate(group):
            for v2 in group[i + 1 :]:
                clash = (v1.pi, v2.pi) in forbidden
                singleton_clash = (
                    kb.pis_by_id[v1.pi].protection == kb.pis_by_id[v2.pi].protection
                    and kb.protections_by_id[kb.pis_by_id[v1.pi].protection].singleton
                )
                if clash or singleton_clash:
                    rows.append(
                        Row(
                            label=f"excl_{v1.name}_{v2.name}",
                            coeffs=((index_of[v1.name], 1.0), (index_of[v2.name], 1.0)),
                            bound=1.0,
                        )
                    )

    return HidingModel(variables=variables, rows=rows, gamma=gamma, base_id=base.id)


# ---------------------------------------------------------------------------
# Branch and bound


@dataclass(order=True)
class _Node:
    sort_key: tuple
    fixed: tuple[int, ...] = field(compare=False)  # -1 free, 0/1 fixed


def _row_feasible_partial(row: Row, fixed: tuple[int, ...]) -> bool:
    """Can the row still be satisfied? Free variables take their most
    favourable value (0 for positive coefficients, 1 for negative)."""
    low = 0.0
    for idx, coeff in row.coeffs:
        bit = fixed[idx]
        if bit == 1:
            low += coeff
        elif bit == -1 and coeff < 0:
            low += coeff
    return low <= row.bound + 1e-9


def _row_satisfied(row: Row, values: tuple[int, ...]) -> bool:
    lhs = sum(coeff for idx, coeff in row.coeffs if values[idx] == 1)
    return lhs <= row.bound + 1e-9


def _surrogate_weights(model: HidingModel) -> tuple[list[float], float, list[int]]:
    """Weights of the surrogate knapsack: budget rows normalized by their
    bounds and summed. Variables with positive coefficient in a zero-bound
    row are forced to 0."""
    n = len(model.variables)
    weights = [0.0] * n
    forced_zero: set[int] = set()
    capacity = 0.0
    for row in model.rows:
        if not row.budget:
            continue
        if row.bound <= 0:
            for idx, coeff in row.coeffs:
                if coeff > 0:
                    forced_zero.add(idx)
            continue
        capacity += 1.0
        for idx, coeff in row.coeffs:
            weights[idx] += coeff / row.bound
    return weights, capacity, sorted(forced_zero)


def _fractional_bound(
    model: HidingModel,
    fixed: tuple[int, ...],
    weights: list[float],
    capacity: float,
    order: list[int],
) -> float:
    value = 0.0
    used = 0.0
    for idx, v in enumerate(model.variables):
        if fixed[idx] == 1:
            value += v.coefficient
            used += weights[idx]
    remaining = capacity - used
    if capacity > 0 and remaining < -1e-9:
        return float("-inf")  # surrogate already violated: subtree infeasible
    for idx in order:
        if fixed[idx] != -1:
            continue
        coeff = model.variables[idx].coefficient
        weight = weights[idx]
        if capacity == 0.0 or weight <= 1e-12:
            value += coeff
        elif weight <= remaining:
            value += coeff
            remaining -= weight
        else:
            if remaining > 0:
                value += coeff * (remaining / weight)
            break
    return value


def solve(model: HidingModel, node_cap: int | None = None) -> SolveResult:
    """Maximize the confusion index over feasible 0/1 assignments.

    Best-first branch and bound; nodes are explored by highest fractional
    bound (ties toward older nodes), branching on the lowest free variable.
    The all-zero assignment is always feasible by construction.
    """
    n = len(model.variables)
    if node_cap is None:
        node_cap = 1_000_000
    weights, capacity, forced_zero = _surrogate_weights(model)
    ratio_order = sorted(
        range(n),
        key=lambda i: (
            -(model.variables[i].coefficient / weights[i])
            if weights[i] > 1e-12
            else float("-inf"),
            i,
        ),
    )

    start = [-1] * n
    for idx in forced_zero:
        start[idx] = 0
    root = tuple(start)

    best_value = 0.0
    best_assignment = tuple([0] * n)
    counter = 0
    heap: list[_Node] = []

    def push(fixed: tuple[int, ...]):
        nonlocal counter
        bound = _fractional_bound(model, fixed, weights, capacity, ratio_order)
        if bound == float("-inf"):
            return
        counter += 1
        heapq.heappush(heap, _Node(sort_key=(-bound, counter), fixed=fixed))

    push(root)
    explored = 0
    status = "optimal"
    while heap:
        explored += 1
        if explored > node_cap:
            status = "suboptimal"
            break
        node = heapq.heappop(heap)
        bound = -node.sort_key[0]
        if bound <= best_value + 1e-12:
            continue
        fixed = node.fixed
        free_idx = next((i for i, b in enumerate(fixed) if b == -1), None)
        if free_idx is None:
            if all(_row_satisfied(row, fixed) for row in model.rows):
                value = sum(v.coefficient for v, bit in zip(model.variables, fixed) if bit == 1)
                if value > best_value + 1e-12:
                    best_value = value
                    best_assignment = fixed
            continue
        for bit in (1, 0):  # highest-bound child first: taking the item keeps the bound
            child = list(fixed)
            child[free_idx] = bit
            child_t = tuple(child)
            if bit == 1 and not all(_row_feasible_partial(row, child_t) for row in model.rows):
                continue
            push(child_t)

    return SolveResult(
        assignment=tuple(max(0, b) for b in best_assignment),
        confusion=ConfusionIndex(best_value),
        status=status,
        explored=explored,
    )


# ---------------------------------------------------------------------------
# Translation back into a solution


def translate(
    result: SolveResult,
    base: Solution,
    session: Session,
    model: HidingModel,
    evaluator: Evaluator | None = None,
) -> Solution:
    """Append the selected hiding deployments to the base solution.

    Replications are appended ordered by (region, instance, replica),
    shadows last per region; enlargements only extend span bookkeeping.
    All precedence constraints are re-validated.
    """
    kb = session.kb
    selected = result.selected(model)
    sequences = {part: list(seq) for part, seq in base.assignment}

    replications = sorted(
        (v for v in selected if v.kind == "replicate"),
        key=lambda v: (v.part, v.pi, v.replica),
    )
    for v in replications:
        sequences.setdefault(v.part, []).append(v.pi)

    shadows = sorted((v for v in selected if v.kind == "shadow"), key=lambda v: (v.part, v.pi))
    for v in shadows:
        sequences.setdefault(v.part, []).append(v.pi)

    enlargements = tuple(
        (v.part, v.extends_to, v.pi)
        for v in sorted((v for v in selected if v.kind == "enlarge"), key=lambda v: (v.part, v.extends_to))
    )

    forbidden = set(kb.precedence.forbidden)
    for part, seq in sequences.items():
        for i, earlier in enumerate(seq):
            for later in seq[i + 1 :]:
                if (earlier, later) in forbidden:
                    raise TranslationError(
                        f"hiding introduced forbidden pair ({earlier}, {later}) on {part}",
                        refs=[earlier, later, part],
                    )

    assignment: Assignment = tuple(sorted((part, tuple(seq)) for part, seq in sequences.items() if seq))
    extra_overhead = OverheadVector.zero()
    for v in selected:
        extra_overhead = extra_overhead + v.overhead

    predicted = {}
    for part, seq in assignment:
        base_metrics = session.app.parts_by_id[part].metrics if part in session.app.parts_by_id else MetricVector()
        predicted[part] = compose_metrics(kb, base_metrics, seq)

    if evaluator is not None:
        protection_index = evaluator.protection_index(assignment)
    else:
        protection_index = base.protection_index

    return Solution(
        assignment=assignment,
        predicted_metrics=predicted,
        overhead=base.overhead + extra_overhead,
        protection_index=protection_index,
        discouraged_penalty=discouraged_penalty(assignment, kb),
        enlargements=enlargements,
    )


# ---------------------------------------------------------------------------
# LP text dump


def lp_format(model: HidingModel) -> str:
    """Standard LP-format text (lp_solve dialect) for external cross-checks."""
    lines = ["/* asset-hiding model: maximize the confusion index */"]
    terms = [f"{v.coefficient:.6g} {v.name}" for v in model.variables]
    lines.append("max: " + (" + ".join(terms) if terms else "0") + ";")
    lines.append("")
    for row in model.rows:
        parts = []
        for idx, coeff in row.coeffs:
            name = model.variables[idx].name
            if coeff < 0:
                parts.append(f"- {abs(coeff):.6g} {name}")
            else:
                parts.append(f"+ {coeff:.6g} {name}" if parts else f"{coeff:.6g} {name}")
        body = " ".join(parts) if parts else "0"
        lines.append(f"{row.label}: {body} <= {row.bound:.6g};")
    if model.variables:
        lines.append("")
        lines.append("bin " + ", ".join(v.name for v in model.variables) + ";")
    return "\n".join(lines) + "\n"
