"""Risk indices: attribute modification, step/path/asset/application scores.

Per attack step, the base attributes are shifted by metric bands (evaluated
on the metrics of the step's target part, as predicted under any applied
protection instances), by the deltas of those instances, and by activated
synergy pairs; the sum is clamped into 1..5. A step index is the geometric
mean of the four normalized eases, a path index the product of its step
indices (sum/max selectable), asset risk the noisy-or over the asset's
paths, and application risk the asset-weighted sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .attacks import AttackPath, step_target_part
from .model import (
    ATTRIBUTE_NAMES,
    AttackStepRule,
    AttributeVector,
    KnowledgeBase,
    MetricVector,
    Session,
)


def clamp_attribute(value: int) -> int:
    return max(1, min(5, value))


def ease_values(attrs: AttributeVector) -> tuple[float, float, float, float]:
    return (
        (6 - attrs.complexity) / 5,
        (6 - attrs.required_skill) / 5,
        attrs.tool_availability / 5,
        attrs.tool_usability / 5,
    )


def geometric_mean(values) -> float:
    values = list(values)
    product = 1.0
    for v in values:
        product *= v
    return product ** (1.0 / len(values))


def step_index(attrs: AttributeVector) -> float:
    """Attack-step risk index in (0, 1]."""
    return geometric_mean(ease_values(attrs))


def path_index(step_indices, aggregator: str = "product") -> float:
    indices = list(step_indices)
    if not indices:
        raise ValueError("a path needs at least one step")
    if aggregator == "product":
        product = 1.0
        for v in indices:
            product *= v
        return product
    if aggregator == "sum":
        return sum(indices)
    if aggregator == "max":
        return max(indices)
    raise ValueError(f"unknown aggregator {aggregator!r}")


def asset_risk(path_indices) -> float:
    """Noisy-or aggregation: more independent paths raise risk, bounded by 1."""
    survive = 1.0
    for r in path_indices:
        survive *= 1.0 - r
    return 1.0 - survive


def compose_metrics(kb: KnowledgeBase, base: MetricVector, sequence) -> MetricVector:
    """Left-to-right affine composition of the sequence's metric transforms."""
    metrics = base
    for pi_id in sequence:
        metrics = kb.pis_by_id[pi_id].transform_metrics(metrics)
    return metrics


def modify_attributes(
    rule: AttackStepRule,
    target_metrics: MetricVector,
    applied: list[str],
    kb: KnowledgeBase,
) -> AttributeVector:
    """Clamped base + metric-band deltas + applied-PI deltas + synergy deltas.

    ``target_metrics`` must already be the predicted metrics of the step's
    target part under ``applied`` (the per-part PI sequence).
    """
    deltas = {name: 0 for name in ATTRIBUTE_NAMES}
    for band in (*kb.thresholds.metric_bands, *rule.metric_modifiers):
        deltas[band.attribute] += band.delta_for(target_metrics.get(band.metric))
    for pi_id in applied:
        for attr, delta in kb.pis_by_id[pi_id].delta_for_rule(rule).items():
            deltas[attr] += delta
    if applied:
        present = set(applied)
        for synergy in kb.precedence.synergies:
            a, b = synergy.pair
            if a in present and b in present:
                for attr, delta in synergy.delta.items():
                    deltas[attr] += delta
    base = rule.attributes if rule.attributes is not None else AttributeVector()
    return AttributeVector(
        **{name: clamp_attribute(base.get(name) + deltas[name]) for name in ATTRIBUTE_NAMES}
    )


@dataclass(frozen=True)
class StepEvaluation:
    rule: str
    target: str
    base: AttributeVector
    modified: AttributeVector
    index: float


@dataclass(frozen=True)
class PathEvaluation:
    path: AttackPath
    steps: tuple[StepEvaluation, ...]
    index: float


def evaluate_path(
    session: Session,
    path: AttackPath,
    applied_by_part: dict[str, list[str]] | None = None,
    predicted_metrics: dict[str, MetricVector] | None = None,
    aggregator: str | None = None,
) -> PathEvaluation:
    """Score one path, optionally under a solution's per-part PI sequences.

    ``predicted_metrics`` caches part metrics under the solution; missing
    parts are computed on the fly (vanilla metrics when unprotected).
    """
    kb, app = session.kb, session.app
    applied_by_part = applied_by_part or {}
    aggregator = aggregator or kb.thresholds.aggregator
    parts = app.parts_by_id
    steps: list[StepEvaluation] = []
    for step in path.steps:
        rule = kb.rules_by_id[step.rule]
        target = step_target_part(step, kb, parts, path.asset)
        sequence = applied_by_part.get(target, [])
        if predicted_metrics is not None and target in predicted_metrics:
            metrics = predicted_metrics[target]
        else:
            base = parts[target].metrics if target in parts else MetricVector()
            metrics = compose_metrics(kb, base, sequence)
        modified = modify_attributes(rule, metrics, sequence, kb)
        base_attrs = rule.attributes if rule.attributes is not None else AttributeVector()
        steps.append(
            StepEvaluation(
                rule=rule.id,
                target=target,
                base=base_attrs,
                modified=modified,
                index=step_index(modified),
            )
        )
    return PathEvaluation(
        path=path,
        steps=tuple(steps),
        index=path_index((s.index for s in steps), aggregator),
    )


@dataclass
class RiskReport:
    session_hash: str
    aggregator: str
    evaluations: list[PathEvaluation]
    asset_risks: dict[str, float]
    application_risk: float
    attacker: dict = field(default_factory=dict)

    def ranked(self) -> list[PathEvaluation]:
        return sorted(
            self.evaluations,
            key=lambda ev: (-ev.index, ev.path.asset, ev.path.signature()),
        )

    def to_doc(self, app) -> dict:
        return {
            "session": self.session_hash,
            "aggregator": self.aggregator,
            "attacker": self.attacker,
            "application_risk": self.application_risk,
            "assets": [
                {
                    "part": a.part,
                    "role": a.role,
                    "weight": float(a.weight),
                    "requirements": sorted(a.requirements),
                    "risk": self.asset_risks.get(a.part, 0.0),
                }
                for a in sorted(app.assets, key=lambda a: a.part)
            ],
            "paths": [
                {
                    "asset": ev.path.asset,
                    "requirement": ev.path.requirement,
                    "index": ev.index,
                    "depth": ev.path.depth,
                    "steps": [
                        {
                            "rule": s.rule,
                            "target": s.target,
                            "binding": step.binding_dict(),
                            "base": s.base.as_dict(),
                            "modified": s.modified.as_dict(),
                            "index": s.index,
                        }
                        for s, step in zip(ev.steps, ev.path.steps)
                    ],
                }
                for ev in self.ranked()
            ],
        }


def aggregate(
    session: Session,
    paths: list[AttackPath],
    evaluations: list[PathEvaluation] | None = None,
    aggregator: str | None = None,
) -> RiskReport:
    """Roll per-path indices up to asset and application risk."""
    kb, app = session.kb, session.app
    aggregator = aggregator or kb.thresholds.aggregator
    if evaluations is None:
        evaluations = [evaluate_path(session, p, aggregator=aggregator) for p in paths]
    by_asset: dict[str, list[float]] = {}
    for ev in evaluations:
        by_asset.setdefault(ev.path.asset, []).append(ev.index)
    asset_risks = {part: asset_risk(indices) for part, indices in by_asset.items()}
    application = sum(a.weight * asset_risks.get(a.part, 0.0) for a in app.assets)
    return RiskReport(
        session_hash=session.hash,
        aggregator=aggregator,
        evaluations=evaluations,
        asset_risks=asset_risks,
        application_risk=application,
        attacker={
            "expertise": kb.attacker.expertise,
            "effort_budget": session.effort_budget,
        },
    )


def asset_risk_map(session: Session, evaluations: list[PathEvaluation]) -> dict[str, float]:
    by_asset: dict[str, list[float]] = {}
    for ev in evaluations:
        by_asset.setdefault(ev.path.asset, []).append(ev.index)
    return {part: asset_risk(indices) for part, indices in by_asset.items()}


def report_markdown(doc: dict) -> str:
    """Human-readable summary of a risk report document."""
    lines = [
        "# Risk report",
        "",
        f"Session: `{doc['session']}`",
        f"Attacker: {doc['attacker']['expertise']} (effort budget {doc['attacker']['effort_budget']})",
        f"Application risk: {doc['application_risk']:.4f}",
        "",
        "## Assets",
        "",
        "| part | role | weight | requirements | risk |",
        "| --- | --- | --- | --- | --- |",
    ]
    for asset in doc["assets"]:
        lines.append(
            f"| {asset['part']} | {asset['role']} | {asset['weight']:g} "
            f"| {', '.join(asset['requirements'])} | {asset['risk']:.4f} |"
        )
    lines += ["", "## Attack paths (ranked)", ""]
    if not doc["paths"]:
        lines.append("No feasible attack paths for this attacker.")
    for rank, path in enumerate(doc["paths"], start=1):
        lines.append(
            f"{rank}. `{path['asset']}` / {path['requirement']}: index {path['index']:.4f}"
        )
        for step in path["steps"]:
            lines.append(
                f"    - {step['rule']} @ {step['target']} (index {step['index']:.4f})"
            )
    return "\n".join(lines) + "\n"
