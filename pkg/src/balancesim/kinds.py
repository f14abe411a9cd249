"""Setting enums shared across modules."""

from enum import Enum


class InteractionKind(str, Enum):
    RELATIONSHIP = "relationship"
    APPRAISAL = "appraisal"
    OPINION = "opinion"


class UpdateMechanism(str, Enum):
    HOMOPHILY = "homophily"
    INFLUENCE = "influence"


class PromptDialect(str, Enum):
    LLAMA = "llama"
    MISTRAL = "mistral"
