"""Brute-force oracles that never touch the cycle-product predicates.

A signed complete graph is clustering-balanced iff its agents can be split
into factions with +1 inside every faction and -1 across factions, and
structurally balanced iff such a split exists with at most two factions.
The oracles enumerate every set partition of the agents and rebuild the
unique matrix it induces.
"""

from __future__ import annotations

import itertools


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for idx in range(len(part)):
            yield part[:idx] + [[first] + part[idx]] + part[idx + 1:]
        yield [[first]] + part


def faction_matrix(m, partition):
    label = {}
    for f, block in enumerate(partition):
        for a in block:
            label[a] = f
    return tuple(
        (1 if label[i] == label[j] else -1) for i in range(m) for j in range(m) if i != j
    )


def balanced_states(m, max_factions=None):
    """Off-diagonal sign tuples of every faction-induced matrix."""
    out = set()
    for part in set_partitions(range(m)):
        if max_factions is not None and len(part) > max_factions:
            continue
        out.add(faction_matrix(m, part))
    return out


def oracle_structural(m, values):
    return tuple(values) in balanced_states(m, max_factions=2)


def oracle_clustering(m, values):
    return tuple(values) in balanced_states(m)


def oracle_cycle_counts(m, rows):
    """Walk every ordered 3-cycle explicitly and dedupe by rotation."""
    pos = sum(1 for i in range(m) for j in range(m) if i != j and rows[i][j] > 0)
    neg = sum(1 for i in range(m) for j in range(m) if i != j and rows[i][j] < 0)
    seen = set()
    cycles = 0
    for a, b, c in itertools.permutations(range(m), 3):
        rotations = {(a, b, c), (b, c, a), (c, a, b)}
        key = min(rotations)
        if key in seen:
            continue
        seen.add(key)
        if rows[a][b] * rows[b][c] * rows[c][a] == 1:
            cycles += 1
    return pos, neg, cycles
