"""CSV tables and SVG charts derived from trajectories.

Output is byte-stable for identical input: rows are sorted, floats use a
fixed format, and SVGs carry no timestamps or random ids.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import analytics
from .dynamics import SettingKey, Trajectory
from .graph import BalancedTriadClass
from .parser import DEFAULT_KEYWORDS

KEY_FIELDS = ["model", "kind", "mechanism", "m"]


def _fmt(x: Optional[float], digits: int = 2) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def _key_cells(key: SettingKey) -> list:
    return [key.model, key.kind.value, key.mechanism.value, key.m]


def _sort_key(key: SettingKey):
    return (key.model, key.m, key.kind.value, key.mechanism.value)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def balance_table(trajectories, refusal_threshold=analytics.DEFAULT_REFUSAL_THRESHOLD) -> str:
    report = analytics.balance_frequency(trajectories, refusal_threshold)
    header = KEY_FIELDS + ["simulations", "valid", "invalid", "aborted", "refusals", "balanced",
                           "structural", "frequency", "frequency_inclusive", "type", "reported"]
    rows = []
    for key in sorted(report, key=_sort_key):
        r = report[key]
        rows.append(_key_cells(key) + [r.simulations, r.valid, r.invalid, r.aborted, r.refusals, r.balanced,
                                       r.structural, _fmt(r.frequency), _fmt(r.frequency_inclusive), r.label,
                                       int(r.reported)])
    return _csv_text(header, rows)


def histogram_table(trajectories) -> str:
    header = KEY_FIELDS + ["balanced_populations"] + [c.label for c in BalancedTriadClass]
    rows = []
    for key, group in sorted(analytics.group_by_setting(trajectories).items(), key=lambda kv: _sort_key(kv[0])):
        finals = [tr.final for tr in group if tr.valid]
        counts = analytics.triad_class_histogram(finals)
        n_bal = sum(1 for M in finals if analytics.is_clustering_balanced(M))
        rows.append(_key_cells(key) + [n_bal] + [counts[c] for c in BalancedTriadClass])
    return _csv_text(header, rows)


def stability_table(trajectories, refusal_threshold=analytics.DEFAULT_REFUSAL_THRESHOLD,
                    rounds: Optional[int] = None) -> str:
    """Per-setting stability plus one pooled row per model over reported settings."""
    groups = analytics.group_by_setting(trajectories)
    balance = analytics.balance_frequency(trajectories, refusal_threshold)
    header = KEY_FIELDS + ["balanced_starts", "unchanged", "unchanged_fraction",
                           "simulations", "last_half_stable", "last_half_fraction"]

    def row(cells, pool):
        pool = [tr for tr in pool if tr.status != "aborted"]
        starts = [tr for tr in pool if analytics.is_clustering_balanced(tr.matrices[0])]
        unchanged = sum(analytics.unchanged_from_start(tr) for tr in starts)
        stable = sum(analytics.is_stable_last_half(tr, rounds) for tr in pool)
        return cells + [len(starts), unchanged, _fmt(unchanged / len(starts) if starts else None, 4),
                        len(pool), stable, _fmt(stable / len(pool) if pool else None, 4)]

    rows = []
    pooled: dict[tuple[str, int], list[Trajectory]] = defaultdict(list)
    for key in sorted(groups, key=_sort_key):
        rows.append(row(_key_cells(key), groups[key]))
        if balance[key].reported:
            pooled[(key.model, key.m)].extend(groups[key])
    for (model, m), pool in sorted(pooled.items()):
        rows.append(row([model, "all", "all", m], pool))
    return _csv_text(header, rows)


def keyword_table(trajectories, terms: Sequence[str] = DEFAULT_KEYWORDS) -> str:
    report = analytics.keyword_frequency_report(trajectories, terms)
    header = KEY_FIELDS + ["responses", "expected_responses"] + [f"pct:{t}" for t in terms] + \
        [f"count:{t}" for t in terms] + ["cognitive_without_dissonance"]
    rows = []
    for key in sorted(report, key=_sort_key):
        r = report[key]
        rows.append(_key_cells(key) + [r.responses, r.expected] + [_fmt(r.percent(t)) for t in terms]
                    + [r.occurrences[t] for t in terms] + [_fmt(r.cognitive_alone, 4)])
    return _csv_text(header, rows)


def time_series_table(group: Sequence[Trajectory]) -> str:
    rows = []
    for tr in sorted(group, key=lambda tr: tr.simulation):
        if tr.status == "aborted":
            continue
        for t, (pos, neg, cyc) in enumerate(analytics.time_series(tr)):
            rows.append([tr.simulation, tr.init_index, t, pos, neg, cyc])
    return _csv_text(["simulation", "init_index", "t", "positive_edges", "negative_edges", "positive_cycles"], rows)


def build_tables(trajectories: Sequence[Trajectory], refusal_threshold=analytics.DEFAULT_REFUSAL_THRESHOLD,
                 rounds: Optional[int] = None) -> dict[str, str]:
    """File name -> CSV text for every report."""
    trajectories = list(trajectories)
    tables = {
        "balance_frequency.csv": balance_table(trajectories, refusal_threshold),
        "triad_histogram.csv": histogram_table(trajectories),
        "stability.csv": stability_table(trajectories, refusal_threshold, rounds),
        "keyword_frequency.csv": keyword_table(trajectories),
    }
    for key, group in analytics.group_by_setting(trajectories).items():
        tables[f"time_series_{key.slug}.csv"] = time_series_table(group)
    return tables


def _svg_figures(trajectories: Sequence[Trajectory]) -> dict[str, bytes]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out: dict[str, bytes] = {}
    with matplotlib.rc_context({"svg.hashsalt": "balancesim", "svg.fonttype": "none"}):

        def save(fig, name):
            buf = io.BytesIO()
            fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
            plt.close(fig)
            out[name] = buf.getvalue()

        groups = analytics.group_by_setting(trajectories)
        balance = analytics.balance_frequency(trajectories)
        keys = sorted(groups, key=_sort_key)
        fig, ax = plt.subplots(figsize=(max(4, len(keys) * 0.9), 3.5))
        ax.bar(range(len(keys)), [balance[k].frequency or 0.0 for k in keys])
        ax.set_xticks(range(len(keys)), [f"{k.kind.value[:3]}/{k.mechanism.value[0].upper()}\nm={k.m}" for k in keys])
        ax.set_ylim(0, 100)
        ax.set_ylabel("% balanced")
        fig.tight_layout()
        save(fig, "balance_frequency.svg")

        for key in keys:
            group = groups[key]
            counts = analytics.triad_class_histogram(tr.final for tr in group if tr.valid)
            total = sum(counts.values())
            fig, ax = plt.subplots(figsize=(4, 3))
            ax.bar([c.label for c in BalancedTriadClass],
                   [100.0 * counts[c] / total if total else 0.0 for c in BalancedTriadClass])
            ax.set_ylim(0, 100)
            ax.set_ylabel("% of balanced triads")
            fig.tight_layout()
            save(fig, f"triad_histogram_{key.slug}.svg")

            series = [analytics.time_series(tr) for tr in group if tr.status != "aborted"]
            if series:
                length = min(len(s) for s in series)
                fig, ax = plt.subplots(figsize=(4, 3))
                for idx, name in ((2, "positive cycles"), (0, "positive"), (1, "negative")):
                    ax.plot(range(length), [sum(s[t][idx] for s in series) / len(series) for t in range(length)],
                            label=name)
                ax.set_xlabel("iteration")
                ax.legend()
                fig.tight_layout()
                save(fig, f"time_series_{key.slug}.svg")
    return out


def write_reports(trajectories: Sequence[Trajectory], out_dir: Path, charts: bool = True,
                  refusal_threshold=analytics.DEFAULT_REFUSAL_THRESHOLD, rounds: Optional[int] = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    trajectories = list(trajectories)
    for name, text in build_tables(trajectories, refusal_threshold, rounds).items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8", newline="")
        written.append(path)
    if charts and trajectories:
        for name, data in _svg_figures(trajectories).items():
            path = out_dir / name
            path.write_bytes(data)
            written.append(path)
    return sorted(written)
