"""Prompt templates shown to LLM agents.

Three agents use the single-triad wording, larger populations the
multi-triad wording (one line per third party, blank line before the
question). Agents are named "Individual <index>".
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from .kinds import InteractionKind, PromptDialect, UpdateMechanism

if TYPE_CHECKING:
    from .dynamics import UpdateContext

log = logging.getLogger(__name__)

_WORDS = {1: "positive", -1: "negative", 0: "neutral"}


def sign_word(value: int) -> str:
    if value == 0:
        # the published templates only ever show positive/negative
        log.debug("rendering a neutral sign into a prompt")
    return _WORDS[int(value)]


def _own_sentence(kind: InteractionKind, other: int, sign: int) -> str:
    if kind is InteractionKind.RELATIONSHIP:
        return f"Your current relationship with Individual {other} is {sign_word(sign)}."
    return f"You have a {sign_word(sign)} {kind.value} of Individual {other}."


def _third_party_sentence(kind: InteractionKind, src: int, dst: int, sign: int) -> str:
    if kind is InteractionKind.RELATIONSHIP:
        return f"Individual {src} has a {sign_word(sign)} relationship with Individual {dst}."
    return f"Individual {src} has a {sign_word(sign)} {kind.value} of Individual {dst}."


def _toward_you_sentence(kind: InteractionKind, src: int, sign: int) -> str:
    if kind is InteractionKind.RELATIONSHIP:
        return f"Individual {src} has a {sign_word(sign)} relationship with you."
    return f"Individual {src} has a {sign_word(sign)} {kind.value} of you."


def _question(kind: InteractionKind, target: int) -> str:
    if kind is InteractionKind.RELATIONSHIP:
        return f"Will your new relationship with respect to Individual {target} be negative or positive?"
    return f"Will your new {kind.value} of Individual {target} be negative or positive?"


def _instruction(kind: InteractionKind, dialect: PromptDialect) -> str:
    if dialect is PromptDialect.LLAMA:
        # appraisal and opinion prompts share the word "appraisal" here
        noun = "relationship" if kind is InteractionKind.RELATIONSHIP else "appraisal"
        return f"State the {noun} first, and then provide an explanation."
    k = kind.value
    not_allowed = "" if kind is InteractionKind.RELATIONSHIP else f'A "neutral" {k} is not allowed. '
    return (
        f'Your must always choose either a "positive" or "negative" {k}, even if you are uncertain '
        f"or do not have enough information. {not_allowed}"
        f'Your response must be in the following format:\n"New {k}: [write here "positive" or "negative"]." '
        f'and then "Justification for answer: [write here the justification for the new {k}]."'
    )


def _peer_pair(ctx: UpdateContext, peer) -> str:
    kind = ctx.kind
    first = _third_party_sentence(kind, ctx.target, peer.index, peer.target_sign)
    if ctx.mechanism is UpdateMechanism.HOMOPHILY:
        second = _own_sentence(kind, peer.index, peer.focal_sign)
    else:
        second = _toward_you_sentence(kind, peer.index, peer.toward_focal)
    return f"{first} {second}"


def render_prompt(ctx: UpdateContext, dialect: PromptDialect = PromptDialect.LLAMA) -> str:
    dialect = PromptDialect(dialect)
    kind = ctx.kind
    opening = _own_sentence(kind, ctx.target, ctx.current)
    tail = f"{_question(kind, ctx.target)} {_instruction(kind, dialect)}"
    pairs = [_peer_pair(ctx, p) for p in ctx.peers]
    if len(pairs) == 1:
        return f"{opening} {pairs[0]} \n{tail}"
    return opening + "\n" + "\n".join(pairs) + "\n\n" + tail
