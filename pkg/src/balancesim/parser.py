"""Sign extraction from agent responses and keyword scanning of justifications."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .graph import Sign
from .kinds import InteractionKind, PromptDialect

# Bump whenever extraction rules change; stored on every decision record so
# replays can flag answers that would now parse differently.
PARSER_VERSION = "1"


class ParsedAnswer(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    NEUTRAL_OR_POSITIVE = "neutral_or_positive"
    NEUTRAL_OR_NEGATIVE = "neutral_or_negative"
    REFUSAL = "refusal"


_SIGNED = {"positive": ParsedAnswer.POSITIVE, "negative": ParsedAnswer.NEGATIVE}
_NEUTRAL_OR = {"positive": ParsedAnswer.NEUTRAL_OR_POSITIVE, "negative": ParsedAnswer.NEUTRAL_OR_NEGATIVE}

# Markup an answer may be wrapped in: **bold**, quotes, brackets, colons.
_JUNK = r"[\s\*\"'`\[\]\(\):_]*"
_HEDGE = r"(?:slightly|somewhat|mildly|more|very)\s+"

_ANSWER_AT_START = re.compile(
    _JUNK
    + r"(?:(?P<neutral_or>neutral\s+or\s+(?:" + _HEDGE + r")?(?P<nor_pol>positive|negative))"
    + r"|(?:" + _HEDGE + r")?(?P<pol>positive|negative)"
    + r"|(?P<neutral>neutral))\b",
    re.IGNORECASE,
)
_WILL_BE = re.compile(r"\bwill\s+be\b", re.IGNORECASE)
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+|\n+")
_HEDGED_ANYWHERE = re.compile(
    r"\bneutral\s+or\s+(?:" + _HEDGE + r")?(?P<nor_pol>positive|negative)\b"
    r"|\bslightly\s+(?P<pol>positive|negative)\b",
    re.IGNORECASE,
)
_INABILITY = re.compile(r"\buncertain\b|\bcannot\s+(?:be\s+)?determine|\bimpossible\s+to\s+determine", re.IGNORECASE)


def _answer_at_start(text: str) -> Optional[ParsedAnswer]:
    match = _ANSWER_AT_START.match(text)
    if not match:
        return None
    if match.group("neutral_or"):
        return _NEUTRAL_OR[match.group("nor_pol").lower()]
    if match.group("pol"):
        return _SIGNED[match.group("pol").lower()]
    return ParsedAnswer.NEUTRAL


def _sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_END.split(text) if s.strip()]


def _parse_free_text(raw: str) -> ParsedAnswer:
    # 1. the statement-of-answer sentence ("... will be negative.")
    for sentence in _sentences(raw):
        will = _WILL_BE.search(sentence)
        if will:
            found = _answer_at_start(sentence[will.end():])
            if found is not None:
                return found
    # 2. a leading standalone polarity word
    found = _answer_at_start(raw)
    if found is not None:
        return found
    if _INABILITY.search(raw):
        return ParsedAnswer.REFUSAL
    # 3. hedged forms anywhere in the text
    hedged = _HEDGED_ANYWHERE.search(raw)
    if hedged:
        if hedged.group("nor_pol"):
            return _NEUTRAL_OR[hedged.group("nor_pol").lower()]
        return _SIGNED[hedged.group("pol").lower()]
    return ParsedAnswer.REFUSAL


def extract_sign(raw: str, kind: InteractionKind, dialect: PromptDialect = PromptDialect.LLAMA) -> ParsedAnswer:
    """Map a raw response to exactly one :class:`ParsedAnswer`.

    The Mistral dialect first looks for the structured ``New <kind>:``
    header; otherwise (and for Llama) the free-text rules apply in order.
    Unparseable text is a refusal, never neutral.
    """
    if not raw or not raw.strip():
        return ParsedAnswer.REFUSAL
    kind = InteractionKind(kind)
    if PromptDialect(dialect) is PromptDialect.MISTRAL:
        header = re.search(r"\bnew\s+" + kind.value + r"\s*:", raw, re.IGNORECASE)
        if header:
            found = _answer_at_start(raw[header.end():])
            if found is not None:
                return found
    return _parse_free_text(raw)


def coerce_reported_sign(parsed: ParsedAnswer) -> Sign:
    if parsed is ParsedAnswer.REFUSAL:
        raise ValueError("a refusal has no sign")
    return {
        ParsedAnswer.POSITIVE: Sign.POSITIVE,
        ParsedAnswer.NEGATIVE: Sign.NEGATIVE,
        ParsedAnswer.NEUTRAL: Sign.NEUTRAL,
        ParsedAnswer.NEUTRAL_OR_POSITIVE: Sign.POSITIVE,
        ParsedAnswer.NEUTRAL_OR_NEGATIVE: Sign.NEGATIVE,
    }[parsed]


DEFAULT_KEYWORDS: tuple[str, ...] = (
    "structural balance",
    "clustering balance",
    "social balance",
    "cognitive",
    "dissonance",
    "cognitive dissonance",
)


@dataclass(frozen=True)
class KeywordSpec:
    terms: tuple[str, ...] = DEFAULT_KEYWORDS
    _patterns: tuple[re.Pattern, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pats = tuple(
            re.compile(r"\b" + r"\s+".join(map(re.escape, t.split())) + r"\b", re.IGNORECASE)
            for t in self.terms
        )
        object.__setattr__(self, "_patterns", pats)


DEFAULT_KEYWORD_SPEC = KeywordSpec()


@dataclass(frozen=True)
class KeywordHits:
    counts: dict[str, int]

    def contains(self, term: str) -> bool:
        return self.counts.get(term, 0) > 0

    def present(self) -> list[str]:
        return [t for t, c in self.counts.items() if c > 0]


def scan_keywords(raw: str, spec: KeywordSpec = DEFAULT_KEYWORD_SPEC) -> KeywordHits:
    return KeywordHits({t: len(p.findall(raw)) for t, p in zip(spec.terms, spec._patterns)})


def cooccurrence_report(hits: Iterable[KeywordHits]) -> Optional[float]:
    """Share of responses mentioning "cognitive" without "cognitive dissonance".

    None when no response mentions "cognitive" at all.
    """
    with_word = 0
    alone = 0
    for h in hits:
        if h.contains("cognitive"):
            with_word += 1
            if not h.contains("cognitive dissonance"):
                alone += 1
    if with_word == 0:
        return None
    return alone / with_word
