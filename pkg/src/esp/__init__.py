"""Decision-support engine for MATE software protection.

Pipeline: annotated-source ingestion -> attack-path inference -> risk
scoring -> game-theoretic mitigation -> asset-hiding refinement, persisted
as content-hashed session directories with a CLI (`esp`) and an HTTP API.
"""

from .attacks import AttackPath, InferenceLimits, gate_by_attacker, infer_paths
from .errors import Diagnostic, EspError
from .ingest import build_call_graph, compute_metrics, derive_secondary_assets, scan_sources
from .hiding import build_model, lp_format, solve, translate
from .mitigation import (
    AppliedPI,
    SearchOptions,
    Solution,
    enumerate_candidates,
    estimate_overhead,
    mitigate,
    play_game,
    predict_metrics,
    suitable_pis,
)
from .model import (
    ApplicationModel,
    Asset,
    AttackerModel,
    AttributeVector,
    KnowledgeBase,
    MetricVector,
    OverheadVector,
    Protection,
    ProtectionInstance,
    Session,
    load_app,
    load_kb,
    save_app,
    save_kb,
    snapshot,
    validate_app,
    validate_kb,
)
from .risk import aggregate, modify_attributes, path_index, step_index
from .session import SessionDir, analyze, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AppliedPI",
    "ApplicationModel",
    "Asset",
    "AttackPath",
    "AttackerModel",
    "AttributeVector",
    "Diagnostic",
    "EspError",
    "InferenceLimits",
    "KnowledgeBase",
    "MetricVector",
    "OverheadVector",
    "Protection",
    "ProtectionInstance",
    "SearchOptions",
    "Session",
    "SessionDir",
    "Solution",
    "aggregate",
    "analyze",
    "build_call_graph",
    "build_model",
    "compute_metrics",
    "derive_secondary_assets",
    "enumerate_candidates",
    "estimate_overhead",
    "gate_by_attacker",
    "infer_paths",
    "load_app",
    "load_kb",
    "lp_format",
    "mitigate",
    "modify_attributes",
    "path_index",
    "play_game",
    "predict_metrics",
    "run_pipeline",
    "save_app",
    "save_kb",
    "scan_sources",
    "snapshot",
    "solve",
    "step_index",
    "suitable_pis",
    "translate",
    "validate_app",
    "validate_kb",
]
