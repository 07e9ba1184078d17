from __future__ import annotations

import os

import pytest

from esp.demo import demo_kb, write_demo_sources
from esp.ingest import scan_sources, with_secondary_assets
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
    Protection,
    ProtectionInstance,
    Thresholds,
    parse_term,
    snapshot,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDENS = os.path.join(os.path.dirname(__file__), "goldens")


def rule(rid, head, premises=(), tags=(), attrs=None, bands=()):
    return AttackStepRule(
        id=rid,
        head=parse_term(head),
        premises=tuple(parse_term(p) for p in premises),
        tags=tuple(tags),
        attributes=attrs,
        metric_modifiers=tuple(bands),
    )


def spec_example_kb() -> KnowledgeBase:
    """The worked backward-chaining example: one integrity goal, two proofs."""
    attrs = AttributeVector(3, 2, 4, 4)
    return KnowledgeBase(
        predicates={
            "breach_integrity": 1,
            "tamper_dyn": 1,
            "located": 1,
            "static_locate": 1,
            "dyn_locate": 1,
            "debugger": 0,
            "app_running": 0,
        },
        rules=[
            rule("breach_integrity", "breach_integrity(V)", ["tamper_dyn(V)"]),
            rule("tamper_dyn", "tamper_dyn(V)", ["located(V)", "debugger"], attrs=attrs),
            rule("located_s", "located(V)", ["static_locate(V)"]),
            rule("located_d", "located(V)", ["dyn_locate(V)"]),
            rule("dyn_locate", "dyn_locate(V)", ["app_running"], attrs=attrs),
            rule("static_locate", "static_locate(V)", [], attrs=attrs),
            rule("debugger", "debugger", [], attrs=attrs),
            rule("app_running", "app_running", [], attrs=attrs),
        ],
        attacker=AttackerModel(expertise="guru", effort_budget=1),
        thresholds=Thresholds(metric_bands=()),
    )


def one_variable_app(part_id: str = "v", requirements=("integrity",), weight: float = 1.0) -> ApplicationModel:
    return ApplicationModel(
        parts=[
            ApplicationPart(
                id=part_id,
                kind="variable",
                name=part_id,
                metrics=MetricVector(sloc=1, cyclomatic=0, call_fanout=0, halstead_volume=0.0, operand_count=1),
            )
        ],
        assets=[Asset(part=part_id, requirements=frozenset(requirements), weight=weight)],
    )


def simple_protection(pid="prot", requirements=("confidentiality", "integrity"), singleton=False, resilience=0.5, fingerprint=0.5):
    return Protection(pid, frozenset(requirements), singleton=singleton, resilience=resilience, fingerprint=fingerprint)


def simple_pi(pid, protection="prot", deltas=None, scale=None, offset=None, coeffs=None, config="default"):
    return ProtectionInstance(
        id=pid,
        protection=protection,
        config=config,
        attribute_deltas=deltas or {},
        metric_scale=scale or {},
        metric_offset=offset or {},
        overhead_coeffs=coeffs or {},
    )


@pytest.fixture(scope="session")
def demo_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo-src")
    write_demo_sources(str(root))
    return str(root)


@pytest.fixture(scope="session")
def demo_session(demo_tree):
    kb = demo_kb(8)
    app = with_secondary_assets(
        scan_sources(demo_tree),
        depth=kb.thresholds.secondary_asset_depth,
        factor=kb.thresholds.secondary_asset_factor,
    )
    return snapshot(kb, app)


@pytest.fixture()
def spec_kb():
    return spec_example_kb()


@pytest.fixture()
def budgetless():
    return None


def zero_budget() -> OverheadVector:
    return OverheadVector.zero()
