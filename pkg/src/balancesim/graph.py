"""Signed directed interaction state and balance predicates.

Signs are stored as plain ints in {-1, 0, +1}; :class:`Sign` is an IntEnum so
values compare and multiply like ints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Optional, Sequence


class Sign(IntEnum):
    NEGATIVE = -1
    NEUTRAL = 0
    POSITIVE = 1

    @property
    def word(self) -> str:
        return self.name.lower()

    def __mul__(self, other):  # type: ignore[override]
        return Sign(int(self) * int(other))

    __rmul__ = __mul__


# Directed entry order for the 64 triad initializations; bit b of the index
# sets entry b (bit 0 -> -1, bit 1 -> +1).
TRIAD_ENTRY_ORDER: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))


@dataclass(frozen=True)
class InteractionMatrix:
    """Directed signs ``s_ij`` for ``m`` agents at one instant.

    ``entries`` is the row-major m*m flattening. Diagonal slots hold 0 as
    padding only; self-interaction is undefined and never read.
    """

    m: int
    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 3:
            raise ValueError(f"need at least 3 agents, got m={self.m}")
        if len(self.entries) != self.m * self.m:
            raise ValueError("entries must have m*m slots")
        for idx, v in enumerate(self.entries):
            if v not in (-1, 0, 1):
                raise ValueError(f"invalid sign {v!r}")
            if idx % (self.m + 1) == 0 and v != 0:
                raise ValueError("diagonal slots must be 0 padding")

    @classmethod
    def from_pairs(cls, m: int, signs: dict[tuple[int, int], int]) -> InteractionMatrix:
        flat = [0] * (m * m)
        for (i, j), v in signs.items():
            if i == j:
                raise ValueError("self-interaction is undefined")
            flat[i * m + j] = int(v)
        missing = [(i, j) for i in range(m) for j in range(m) if i != j and (i, j) not in signs]
        if missing:
            raise ValueError(f"missing entries: {missing[:5]}")
        return cls(m, tuple(flat))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Optional[int]]]) -> InteractionMatrix:
        """Build from an m x m nested list; diagonal values are ignored."""
        m = len(rows)
        flat = []
        for i, row in enumerate(rows):
            if len(row) != m:
                raise ValueError("rows must be square")
            for j, v in enumerate(row):
                flat.append(0 if i == j else int(v))  # type: ignore[arg-type]
        return cls(m, tuple(flat))

    @classmethod
    def uniform(cls, m: int, value: int) -> InteractionMatrix:
        return cls(m, tuple(0 if i == j else int(value) for i in range(m) for j in range(m)))

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        self._check(i, j)
        return self.entries[i * self.m + j]

    def _check(self, i: int, j: int) -> None:
        if not (0 <= i < self.m and 0 <= j < self.m):
            raise IndexError(f"agent index out of range for m={self.m}: ({i}, {j})")
        if i == j:
            raise IndexError("self-interaction is undefined")

    def pairs(self) -> Iterator[tuple[int, int]]:
        m = self.m
        for i in range(m):
            for j in range(m):
                if i != j:
                    yield i, j

    def values(self) -> list[int]:
        return [self.entries[i * self.m + j] for i, j in self.pairs()]

    def with_updates(self, updates: dict[tuple[int, int], int]) -> InteractionMatrix:
        flat = list(self.entries)
        for (i, j), v in updates.items():
            self._check(i, j)
            flat[i * self.m + j] = int(v)
        return InteractionMatrix(self.m, tuple(flat))

    def has_neutral(self) -> bool:
        return any(v == 0 for v in self.values())

    def rows(self) -> list[list[Optional[int]]]:
        m = self.m
        return [[None if i == j else self.entries[i * m + j] for j in range(m)] for i in range(m)]

    def to_list(self) -> list[int]:
        """Off-diagonal entries in (i ascending, j ascending) order."""
        return self.values()

    @classmethod
    def from_list(cls, m: int, values: Sequence[int]) -> InteractionMatrix:
        pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
        if len(values) != len(pairs):
            raise ValueError(f"expected {len(pairs)} values for m={m}")
        return cls.from_pairs(m, dict(zip(pairs, values)))

    def __str__(self) -> str:
        sym = {1: "+", -1: "-", 0: "0", None: "."}
        return "\n".join(" ".join(sym[v] for v in row) for row in self.rows())


@dataclass(frozen=True)
class TriadView:
    i: int
    j: int
    k: int
    s_ij: int
    s_ji: int
    s_jk: int
    s_kj: int
    s_ki: int
    s_ik: int

    @classmethod
    def of(cls, M: InteractionMatrix, i: int, j: int, k: int) -> TriadView:
        if not i < j < k:
            raise ValueError("triad indices must satisfy i < j < k")
        return cls(i, j, k, M[i, j], M[j, i], M[j, k], M[k, j], M[k, i], M[i, k])

    def is_symmetric(self) -> bool:
        return self.s_ij == self.s_ji and self.s_jk == self.s_kj and self.s_ki == self.s_ik

    def signs(self) -> tuple[int, int, int, int, int, int]:
        return (self.s_ij, self.s_ji, self.s_jk, self.s_kj, self.s_ki, self.s_ik)


class BalancedTriadClass(Enum):
    """Balanced symmetric triads keyed by (s_ij, s_jk, s_ki) with i < j < k."""

    NNP = (-1, -1, 1)
    NPN = (-1, 1, -1)
    PNN = (1, -1, -1)
    PPP = (1, 1, 1)
    NNN = (-1, -1, -1)

    @property
    def structural(self) -> bool:
        a, b, c = self.value
        return a * b * c == 1

    @property
    def label(self) -> str:
        return "(" + ",".join("+" if v > 0 else "-" for v in self.value) + ")"


def is_symmetric(M: InteractionMatrix) -> bool:
    e, m = M.entries, M.m
    return all(e[i * m + j] == e[j * m + i] for i in range(m) for j in range(i + 1, m))


def triad_cycle_product(M: InteractionMatrix, i: int, j: int, k: int) -> Sign:
    if len({i, j, k}) != 3:
        raise ValueError("triad indices must be distinct")
    return Sign(M[i, j] * M[j, k] * M[k, i])


def enumerate_triads(m: int) -> list[tuple[int, int, int]]:
    if m < 3:
        raise ValueError(f"need at least 3 agents, got m={m}")
    return list(itertools.combinations(range(m), 3))


def _balanced(M: InteractionMatrix, allow_all_negative: bool) -> bool:
    if M.has_neutral() or not is_symmetric(M):
        return False
    e, m = M.entries, M.m
    for i, j, k in itertools.combinations(range(m), 3):
        a, b, c = e[i * m + j], e[j * m + k], e[k * m + i]
        if a * b * c == 1:
            continue
        if allow_all_negative and a + b + c == -3:
            continue
        return False
    return True


def is_structurally_balanced(M: InteractionMatrix) -> bool:
    return _balanced(M, allow_all_negative=False)


def is_clustering_balanced(M: InteractionMatrix) -> bool:
    return _balanced(M, allow_all_negative=True)


def classify_balanced_triad(T: TriadView) -> Optional[BalancedTriadClass]:
    if not T.is_symmetric():
        return None
    key = (T.s_ij, T.s_jk, T.s_ki)
    if 0 in key:
        return None
    try:
        return BalancedTriadClass(key)
    except ValueError:
        return None


def balanced_triad_classes(M: InteractionMatrix) -> list[Optional[BalancedTriadClass]]:
    """Class (or None) of every triad of ``M`` in lexicographic order."""
    return [classify_balanced_triad(TriadView.of(M, *t)) for t in enumerate_triads(M.m)]


def edge_and_cycle_counts(M: InteractionMatrix) -> tuple[int, int, int]:
    """Positive directed entries, negative directed entries, positive 3-cycles.

    Both orientations of each triad are counted as separate cycles.
    """
    vals = M.values()
    pos = sum(1 for v in vals if v > 0)
    neg = sum(1 for v in vals if v < 0)
    e, m = M.entries, M.m
    cycles = 0
    for i, j, k in itertools.combinations(range(m), 3):
        if e[i * m + j] * e[j * m + k] * e[k * m + i] == 1:
            cycles += 1
        if e[i * m + k] * e[k * m + j] * e[j * m + i] == 1:
            cycles += 1
    return pos, neg, cycles


def triad_initialization(index: int) -> InteractionMatrix:
    if not 0 <= index < 64:
        raise ValueError(f"triad initialization index must be in [0, 64), got {index}")
    signs = {pair: (1 if (index >> bit) & 1 else -1) for bit, pair in enumerate(TRIAD_ENTRY_ORDER)}
    return InteractionMatrix.from_pairs(3, signs)


def enumerate_triad_initializations() -> list[InteractionMatrix]:
    return [triad_initialization(idx) for idx in range(64)]


def balanced_triad_matrix(cls: BalancedTriadClass) -> InteractionMatrix:
    """The symmetric m=3 matrix realizing a balanced triad class."""
    a, b, c = cls.value
    return InteractionMatrix.from_pairs(3, {(0, 1): a, (1, 0): a, (1, 2): b, (2, 1): b, (2, 0): c, (0, 2): c})


def all_ternary_matrices(m: int = 3) -> Iterable[InteractionMatrix]:
    n = m * (m - 1)
    for combo in itertools.product((-1, 0, 1), repeat=n):
        yield InteractionMatrix.from_list(m, combo)
