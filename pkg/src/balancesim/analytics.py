"""Balance frequency, triad diversity, stability and keyword statistics."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .dynamics import DecisionRecord, SettingKey, Trajectory
from .graph import (
    BalancedTriadClass,
    InteractionMatrix,
    TriadView,
    classify_balanced_triad,
    edge_and_cycle_counts,
    enumerate_triads,
    is_clustering_balanced,
    is_structurally_balanced,
)
from .parser import DEFAULT_KEYWORDS, KeywordHits, cooccurrence_report

log = logging.getLogger(__name__)

DEFAULT_REFUSAL_THRESHOLD = 0.9


def group_by_setting(trajectories: Iterable[Trajectory]) -> dict[SettingKey, list[Trajectory]]:
    groups: dict[SettingKey, list[Trajectory]] = defaultdict(list)
    for tr in trajectories:
        groups[tr.setting].append(tr)
    return dict(groups)


@dataclass
class BalanceRow:
    setting: SettingKey
    simulations: int = 0
    valid: int = 0
    invalid: int = 0
    aborted: int = 0
    refusals: int = 0
    balanced: int = 0
    structural: int = 0
    reported: bool = True

    @property
    def frequency(self) -> Optional[float]:
        """Percent of valid simulations ending clustering-balanced."""
        return 100.0 * self.balanced / self.valid if self.valid else None

    @property
    def frequency_inclusive(self) -> Optional[float]:
        """Same numerator over every finished simulation, invalid ones included."""
        done = self.valid + self.invalid
        return 100.0 * self.balanced / done if done else None

    @property
    def label(self) -> str:
        """S when every balanced outcome is structural, C otherwise, x when none."""
        if not self.reported:
            return "---"
        if self.balanced == 0:
            return "x"
        return "S" if self.structural == self.balanced else "C"


def balance_frequency(
    trajectories: Iterable[Trajectory], refusal_threshold: float = DEFAULT_REFUSAL_THRESHOLD
) -> dict[SettingKey, BalanceRow]:
    report: dict[SettingKey, BalanceRow] = {}
    for key, group in group_by_setting(trajectories).items():
        row = BalanceRow(key, simulations=len(group))
        for tr in group:
            row.refusals += tr.refusals
            if tr.status == "aborted":
                row.aborted += 1
            elif tr.status == "invalid":
                row.invalid += 1
            else:
                row.valid += 1
                if is_clustering_balanced(tr.final):
                    row.balanced += 1
                    row.structural += is_structurally_balanced(tr.final)
        finished = row.valid + row.invalid
        row.reported = finished > 0 and row.invalid / finished <= refusal_threshold
        report[key] = row
    return report


def triad_class_histogram(finals: Iterable[InteractionMatrix]) -> dict[BalancedTriadClass, int]:
    """Count balanced triad classes over balanced final states.

    A balanced population contributes one increment per triad, so m=6 adds
    20 and m=10 adds 120; unbalanced finals add nothing.
    """
    counts = {c: 0 for c in BalancedTriadClass}
    for M in finals:
        if not is_clustering_balanced(M):
            continue
        for t in enumerate_triads(M.m):
            cls = classify_balanced_triad(TriadView.of(M, *t))
            assert cls is not None
            counts[cls] += 1
    return counts


def unchanged_from_start(tr: Trajectory, require_all_steps: bool = True) -> bool:
    start = tr.matrices[0]
    if require_all_steps:
        return all(M == start for M in tr.matrices)
    return tr.final == start


def stability_initially_balanced(trajectories: Sequence[Trajectory], require_all_steps: bool = True) -> Optional[float]:
    """Fraction of balanced-start trajectories whose signs never change.

    Only trajectories starting from a clustering-balanced state are counted.
    """
    pool = [tr for tr in trajectories if is_clustering_balanced(tr.matrices[0])]
    if not pool:
        return None
    return sum(unchanged_from_start(tr, require_all_steps) for tr in pool) / len(pool)


def last_half_window(T: int, rounds: Optional[int] = None) -> int:
    """First time index of the stability window; the window is t..T."""
    if rounds is None:
        rounds = math.ceil(T / 2)
        if T != 10:
            log.info("T=%d: stability window covers the last %d update rounds", T, rounds)
    return max(0, T - rounds)


def is_stable_last_half(tr: Trajectory, rounds: Optional[int] = None) -> bool:
    T = len(tr.matrices) - 1
    start = last_half_window(T, rounds)
    window = tr.matrices[start:]
    return all(M == window[0] for M in window)


def stability_last_half(trajectories: Sequence[Trajectory], rounds: Optional[int] = None) -> Optional[float]:
    if not trajectories:
        return None
    return sum(is_stable_last_half(tr, rounds) for tr in trajectories) / len(trajectories)


def time_series(tr: Trajectory) -> list[tuple[int, int, int]]:
    return [edge_and_cycle_counts(M) for M in tr.matrices]


@dataclass
class KeywordRow:
    setting: SettingKey
    responses: int = 0
    expected: Optional[int] = None
    hits: dict[str, int] = field(default_factory=dict)
    occurrences: dict[str, int] = field(default_factory=dict)
    cognitive_alone: Optional[float] = None

    def percent(self, term: str) -> float:
        return 100.0 * self.hits.get(term, 0) / self.responses if self.responses else 0.0


def keyword_frequency_report(
    trajectories: Iterable[Trajectory], terms: Sequence[str] = DEFAULT_KEYWORDS
) -> dict[SettingKey, KeywordRow]:
    """Percent of responses mentioning each term, per setting.

    Aborted simulations are excluded. The response count is checked against
    T * m * (m - 1) per simulation.
    """
    report: dict[SettingKey, KeywordRow] = {}
    for key, group in group_by_setting(trajectories).items():
        done = [tr for tr in group if tr.status != "aborted"]
        row = KeywordRow(key, hits={t: 0 for t in terms}, occurrences={t: 0 for t in terms})
        row.expected = sum(tr.config.decisions_per_simulation for tr in done)
        all_hits: list[KeywordHits] = []
        for tr in done:
            for rec in tr.decisions:
                row.responses += 1
                h = KeywordHits(rec.keywords)
                all_hits.append(h)
                for t in terms:
                    c = rec.keywords.get(t, 0)
                    row.occurrences[t] += c
                    row.hits[t] += c > 0
        if row.responses != row.expected:
            log.warning("%s: %d responses recorded, %d expected", key.slug, row.responses, row.expected)
        row.cognitive_alone = cooccurrence_report(all_hits)
        report[key] = row
    return report


def decision_records(trajectories: Iterable[Trajectory]) -> Iterable[DecisionRecord]:
    for tr in trajectories:
        yield from tr.decisions
