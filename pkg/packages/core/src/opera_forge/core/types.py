"""Enumerations shared across opera-forge modules."""

from enum import StrEnum


class Modality(StrEnum):
    """Kind of respiratory sound in a clip."""

    BREATH = "breath"
    COUGH = "cough"
    LUNG = "lung"
    SNORE = "snore"
    VOWEL = "vowel"


class PadPolicy(StrEnum):
    REPEAT = "repeat"
    ZERO = "zero"


class EncoderKind(StrEnum):
    CNN = "cnn"
    VIT = "vit"


class PretrainMethod(StrEnum):
    """Self-supervised objective used for pretraining."""

    CONTRASTIVE = "contrastive"
    GENERATIVE = "generative"
    HYBRID = "hybrid"


class SplitStrategy(StrEnum):
    OFFICIAL = "official"
    PARTICIPANT_INDEPENDENT = "participant_independent"
    LOSO = "loso"


class TaskKind(StrEnum):
    BINARY = "binary"
    MULTICLASS = "multiclass"
    REGRESSION = "regression"


class Metric(StrEnum):
    AUROC = "auroc"
    MAE = "mae"
    MAPE = "mape"


class Direction(StrEnum):
    """Whether larger metric values rank better."""

    HIGHER_BETTER = "higher_better"
    LOWER_BETTER = "lower_better"
