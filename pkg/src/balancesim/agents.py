"""Agent decision back-ends.

Deterministic agents answer in the same "My new ... will be <sign>." form an
LLM uses, so their logs replay through the real parser.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Protocol

from .dynamics import DecisionRecord, UpdateContext
from .gateway import ChatClient, EndpointConfig
from .kinds import InteractionKind, PromptDialect
from .parser import ParsedAnswer, extract_sign
from .prompts import render_prompt, sign_word


@dataclass(frozen=True)
class AgentDecision:
    parsed: ParsedAnswer
    justification: str
    latency: float = 0.0


class AgentBackend(Protocol):
    label: str

    def decide(self, ctx: UpdateContext) -> AgentDecision: ...


class FixtureError(KeyError):
    pass


def statement(ctx: UpdateContext, sign: int) -> str:
    if ctx.kind is InteractionKind.RELATIONSHIP:
        return f"My new relationship with Individual {ctx.target} will be {sign_word(sign)}."
    return f"My new {ctx.kind.value} of Individual {ctx.target} will be {sign_word(sign)}."


_ANSWER = {1: ParsedAnswer.POSITIVE, -1: ParsedAnswer.NEGATIVE, 0: ParsedAnswer.NEUTRAL}


class RuleAgent:
    """Majority vote over shared third parties: sign of sum_k s_ik * s_jk.

    A zero sum falls back to the reference sign of the context.
    """

    label = "rule"

    def decide(self, ctx: UpdateContext) -> AgentDecision:
        total = sum(p.focal_sign * p.target_sign for p in ctx.peers)
        sign = (total > 0) - (total < 0) if total else ctx.reference
        agree = sum(1 for p in ctx.peers if p.focal_sign * p.target_sign > 0)
        text = (
            f"{statement(ctx, sign)}\n\nExplanation: {agree} of {len(ctx.peers)} third parties are viewed "
            f"the same way by both of us (net {total:+d})."
        )
        return AgentDecision(_ANSWER[sign], text)


class ConstantAgent:
    def __init__(self, sign: int):
        if sign not in (-1, 0, 1):
            raise ValueError(f"invalid sign {sign!r}")
        self.sign = int(sign)
        self.label = f"constant{sign:+d}"

    def decide(self, ctx: UpdateContext) -> AgentDecision:
        return AgentDecision(_ANSWER[self.sign], statement(ctx, self.sign))


class EchoAgent:
    """Repeats its current sign; every trajectory is constant."""

    label = "echo"

    def decide(self, ctx: UpdateContext) -> AgentDecision:
        return AgentDecision(_ANSWER[ctx.current], statement(ctx, ctx.current))


class ScriptedAgent:
    """Replays recorded raw responses keyed by (iteration, focal, target)."""

    label = "scripted"

    def __init__(
        self,
        transcript: Mapping[tuple[int, int, int], str],
        kind: InteractionKind,
        dialect: PromptDialect = PromptDialect.LLAMA,
    ):
        self.transcript = dict(transcript)
        self.kind = InteractionKind(kind)
        self.dialect = PromptDialect(dialect)

    @classmethod
    def from_records(cls, records: Iterable[DecisionRecord | dict], kind, dialect=PromptDialect.LLAMA) -> ScriptedAgent:
        script = {}
        for r in records:
            if isinstance(r, dict):
                script[(int(r["t"]), int(r["focal"]), int(r["target"]))] = r["raw"]
            else:
                script[(r.t, r.focal, r.target)] = r.raw
        return cls(script, kind, dialect)

    def decide(self, ctx: UpdateContext) -> AgentDecision:
        key = (ctx.iteration, ctx.focal, ctx.target)
        try:
            raw = self.transcript[key]
        except KeyError:
            raise FixtureError(f"no recorded response for (t, focal, target) = {key}") from None
        return AgentDecision(extract_sign(raw, self.kind, self.dialect), raw)


class LLMAgent:
    def __init__(self, client: ChatClient, dialect: PromptDialect = PromptDialect.LLAMA, label: Optional[str] = None):
        self.client = client
        self.dialect = PromptDialect(dialect)
        self.label = label or client.cfg.model

    def decide(self, ctx: UpdateContext) -> AgentDecision:
        prompt = render_prompt(ctx, self.dialect)
        start = time.perf_counter()
        raw = self.client.complete(prompt)
        latency = time.perf_counter() - start
        return AgentDecision(extract_sign(raw, ctx.kind, self.dialect), raw, latency)


def make_agent(
    backend: str,
    dialect: PromptDialect = PromptDialect.LLAMA,
    endpoint: Optional[EndpointConfig] = None,
    client: Optional[ChatClient] = None,
) -> AgentBackend:
    """Agent for a back-end selector: rule, echo, constant:+1/-1/0, llm."""
    if backend == "rule":
        return RuleAgent()
    if backend == "echo":
        return EchoAgent()
    if backend.startswith("constant"):
        _, _, value = backend.partition(":")
        return ConstantAgent(int(value or 1))
    if backend == "llm":
        if client is None:
            client = ChatClient(endpoint or EndpointConfig())
        return LLMAgent(client, dialect)
    raise ValueError(f"unknown agent back-end {backend!r}")
