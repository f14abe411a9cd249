"""Synchronous update protocol, initialization and trajectory recording."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterator, NamedTuple, Optional

import numpy as np

from .graph import (
    BalancedTriadClass,
    InteractionMatrix,
    Sign,
    balanced_triad_matrix,
    triad_initialization,
)
from .kinds import InteractionKind, PromptDialect, UpdateMechanism
from .parser import PARSER_VERSION, ParsedAnswer, coerce_reported_sign, scan_keywords

if TYPE_CHECKING:
    from .agents import AgentBackend

log = logging.getLogger(__name__)


class InitMode(str, Enum):
    EXHAUSTIVE_TRIAD = "exhaustive_triad"
    RADEMACHER = "rademacher"
    # the five balanced symmetric triads, for the stability-from-balance study
    BALANCED_TRIAD = "balanced_triad"


class Peer(NamedTuple):
    index: int
    focal_sign: int  # s_ik
    target_sign: int  # s_jk
    toward_focal: int  # s_ki


@dataclass(frozen=True)
class UpdateContext:
    focal: int
    target: int
    kind: InteractionKind
    mechanism: UpdateMechanism
    reference: int
    current: int
    peers: tuple[Peer, ...]
    iteration: int = 0

    @property
    def m(self) -> int:
        return len(self.peers) + 2


def build_context(
    M: InteractionMatrix,
    i: int,
    j: int,
    kind: InteractionKind,
    mechanism: UpdateMechanism,
    iteration: int = 0,
) -> UpdateContext:
    """What agent ``i`` is shown before deciding its new sign toward ``j``.

    ``reference`` is ``s_ij`` under homophily and ``s_ji`` under influence.
    Each peer carries ``s_ik``, ``s_jk`` and ``s_ki`` from the same snapshot.
    """
    if i == j:
        raise ValueError("focal and target must differ")
    current = M[i, j]
    reference = current if UpdateMechanism(mechanism) is UpdateMechanism.HOMOPHILY else M[j, i]
    peers = tuple(Peer(k, M[i, k], M[j, k], M[k, i]) for k in range(M.m) if k != i and k != j)
    return UpdateContext(i, j, InteractionKind(kind), UpdateMechanism(mechanism), reference, current, peers, iteration)


@dataclass(frozen=True)
class SettingKey:
    kind: InteractionKind
    mechanism: UpdateMechanism
    m: int
    model: str

    @property
    def slug(self) -> str:
        return f"{self.model}_{self.kind.value}_{self.mechanism.value}_m{self.m}"

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "mechanism": self.mechanism.value, "m": self.m, "model": self.model}

    @classmethod
    def from_dict(cls, d: dict) -> SettingKey:
        return cls(InteractionKind(d["kind"]), UpdateMechanism(d["mechanism"]), int(d["m"]), str(d["model"]))


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 3
    n: int = 10
    T: int = 10
    kind: InteractionKind = InteractionKind.RELATIONSHIP
    mechanism: UpdateMechanism = UpdateMechanism.HOMOPHILY
    backend: str = "rule"
    seed: int = 0
    init_mode: InitMode = InitMode.EXHAUSTIVE_TRIAD
    dialect: PromptDialect = PromptDialect.LLAMA
    model: str = ""

    def __post_init__(self) -> None:
        for name, enum in (("kind", InteractionKind), ("mechanism", UpdateMechanism),
                           ("init_mode", InitMode), ("dialect", PromptDialect)):
            object.__setattr__(self, name, enum(getattr(self, name)))
        if self.m < 3:
            raise ValueError("m must be at least 3")
        if self.init_mode in (InitMode.EXHAUSTIVE_TRIAD, InitMode.BALANCED_TRIAD) and self.m != 3:
            raise ValueError(f"{self.init_mode.value} initialization requires m = 3")
        if self.n < 1 or self.T < 0:
            raise ValueError("need n >= 1 and T >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def model_label(self) -> str:
        return self.model or self.backend

    @property
    def setting(self) -> SettingKey:
        return SettingKey(self.kind, self.mechanism, self.m, self.model_label)

    @property
    def simulation_count(self) -> int:
        per = {InitMode.EXHAUSTIVE_TRIAD: 64, InitMode.BALANCED_TRIAD: 5, InitMode.RADEMACHER: 1}
        return per[self.init_mode] * self.n

    @property
    def decisions_per_simulation(self) -> int:
        return self.T * self.m * (self.m - 1)

    def init_index(self, simulation: int) -> int:
        if self.init_mode is InitMode.RADEMACHER:
            return simulation
        return simulation // self.n

    def initialization(self, simulation: int) -> InteractionMatrix:
        if not 0 <= simulation < self.simulation_count:
            raise IndexError(f"simulation {simulation} out of range")
        idx = self.init_index(simulation)
        if self.init_mode is InitMode.EXHAUSTIVE_TRIAD:
            return triad_initialization(idx)
        if self.init_mode is InitMode.BALANCED_TRIAD:
            return balanced_triad_matrix(list(BalancedTriadClass)[idx])
        return random_initialization(self.m, simulation_rng(self.seed, idx))

    def initializations(self) -> Iterator[tuple[int, int, InteractionMatrix]]:
        for sim in range(self.simulation_count):
            yield sim, self.init_index(sim), self.initialization(sim)


def simulation_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one simulation, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def random_initialization(m: int, rng: np.random.Generator) -> InteractionMatrix:
    if m < 3:
        raise ValueError("m must be at least 3")
    draws = rng.integers(0, 2, size=m * (m - 1)) * 2 - 1
    return InteractionMatrix.from_list(m, [int(v) for v in draws])


@dataclass(frozen=True)
class DecisionRecord:
    t: int
    focal: int
    target: int
    prompt_hash: str
    raw: str
    parsed: ParsedAnswer
    sign: int
    refusal: bool
    keywords: dict[str, int]
    latency: float = 0.0
    experiment_id: str = ""
    simulation: int = 0
    init_index: int = 0
    setting: str = ""
    parser_version: str = PARSER_VERSION

    def to_json(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "setting": self.setting,
            "simulation": self.simulation,
            "init_index": self.init_index,
            "t": self.t,
            "focal": self.focal,
            "target": self.target,
            "prompt_hash": self.prompt_hash,
            "raw": self.raw,
            "parsed": self.parsed.value,
            "sign": self.sign,
            "refusal": self.refusal,
            "keywords": {k: v for k, v in self.keywords.items() if v},
            "latency": self.latency,
            "parser_version": self.parser_version,
        }

    @classmethod
    def from_json(cls, d: dict) -> DecisionRecord:
        return cls(
            t=int(d["t"]), focal=int(d["focal"]), target=int(d["target"]),
            prompt_hash=d["prompt_hash"], raw=d["raw"], parsed=ParsedAnswer(d["parsed"]),
            sign=int(d["sign"]), refusal=bool(d["refusal"]), keywords=dict(d.get("keywords", {})),
            latency=float(d.get("latency", 0.0)), experiment_id=d.get("experiment_id", ""),
            simulation=int(d.get("simulation", 0)), init_index=int(d.get("init_index", 0)),
            setting=d.get("setting", ""), parser_version=d.get("parser_version", PARSER_VERSION),
        )


class SimulationAborted(Exception):
    """A decision could not be obtained at all (transport or protocol failure)."""


def _decide(agent: AgentBackend, ctx: UpdateContext, dialect: PromptDialect) -> tuple[UpdateContext, object, str]:
    from .prompts import render_prompt

    prompt = render_prompt(ctx, dialect)
    return ctx, agent.decide(ctx), hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def synchronous_step(
    M: InteractionMatrix,
    agent: AgentBackend,
    kind: InteractionKind,
    mechanism: UpdateMechanism,
    iteration: int = 1,
    dialect: PromptDialect = PromptDialect.LLAMA,
    executor: Optional[Executor] = None,
) -> tuple[InteractionMatrix, list[DecisionRecord]]:
    """Every ordered pair decides from the snapshot ``M``; signs land together.

    A refusal keeps the previous sign and is flagged on its record. Any
    exception raised by the agent propagates.
    """
    contexts = [build_context(M, i, j, kind, mechanism, iteration) for i, j in M.pairs()]
    if executor is None:
        results = [_decide(agent, ctx, dialect) for ctx in contexts]
    else:
        results = list(executor.map(lambda c: _decide(agent, c, dialect), contexts))

    updates: dict[tuple[int, int], int] = {}
    records: list[DecisionRecord] = []
    for ctx, decision, phash in results:
        parsed = decision.parsed
        refusal = parsed is ParsedAnswer.REFUSAL
        sign = M[ctx.focal, ctx.target] if refusal else int(coerce_reported_sign(parsed))
        updates[(ctx.focal, ctx.target)] = sign
        records.append(DecisionRecord(
            t=iteration, focal=ctx.focal, target=ctx.target, prompt_hash=phash,
            raw=decision.justification, parsed=parsed, sign=sign, refusal=refusal,
            keywords={k: v for k, v in scan_keywords(decision.justification).counts.items() if v},
            latency=decision.latency,
        ))
    return M.with_updates(updates), records


@dataclass
class Trajectory:
    config: ExperimentConfig
    matrices: list[InteractionMatrix]
    decisions: list[DecisionRecord] = field(default_factory=list)
    simulation: int = 0
    init_index: int = 0
    status: str = "complete"  # complete | invalid (had refusals) | aborted
    error: str = ""

    @property
    def setting(self) -> SettingKey:
        return self.config.setting

    @property
    def refusals(self) -> int:
        return sum(1 for d in self.decisions if d.refusal)

    @property
    def valid(self) -> bool:
        return self.status == "complete"

    @property
    def final(self) -> InteractionMatrix:
        return self.matrices[-1]


def run_simulation(
    cfg: ExperimentConfig,
    init: InteractionMatrix,
    agent: AgentBackend,
    simulation: int = 0,
    init_index: int = 0,
    experiment_id: str = "",
    executor: Optional[Executor] = None,
) -> Trajectory:
    if init.has_neutral():
        raise ValueError("initial interactions must be -1 or +1")
    if init.m != cfg.m:
        raise ValueError(f"initial matrix has m={init.m}, config expects m={cfg.m}")
    from .gateway import GatewayError

    traj = Trajectory(cfg, [init], simulation=simulation, init_index=init_index)
    M = init
    setting = cfg.setting.slug
    for t in range(1, cfg.T + 1):
        try:
            M, records = synchronous_step(M, agent, cfg.kind, cfg.mechanism, t, cfg.dialect, executor)
        except GatewayError as exc:
            log.warning("simulation %d aborted at t=%d: %s", simulation, t, exc)
            traj.status = "aborted"
            traj.error = f"{type(exc).__name__}: {exc}"
            return traj
        traj.matrices.append(M)
        traj.decisions.extend(
            replace(r, experiment_id=experiment_id, simulation=simulation, init_index=init_index, setting=setting)
            for r in records
        )
    if traj.refusals:
        traj.status = "invalid"
    return traj
