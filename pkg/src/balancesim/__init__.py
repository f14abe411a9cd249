"""Signed-interaction dynamics among agents, with balance analytics."""

from .graph import (
    BalancedTriadClass,
    InteractionMatrix,
    Sign,
    TriadView,
    classify_balanced_triad,
    edge_and_cycle_counts,
    enumerate_triad_initializations,
    enumerate_triads,
    is_clustering_balanced,
    is_structurally_balanced,
    is_symmetric,
    triad_cycle_product,
)
from .kinds import InteractionKind, PromptDialect, UpdateMechanism
from .dynamics import (
    ExperimentConfig,
    InitMode,
    SettingKey,
    Trajectory,
    UpdateContext,
    build_context,
    random_initialization,
    run_simulation,
    synchronous_step,
)
from .parser import ParsedAnswer, coerce_reported_sign, extract_sign, scan_keywords

__version__ = "0.1.0"
