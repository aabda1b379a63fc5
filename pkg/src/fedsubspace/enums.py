"""Enumerations used across the simulator."""

from __future__ import annotations

import enum


class Regime(enum.Enum):
    """Gradient oracle available to the clients."""

    POPULATION = "population"
    FINITE_SAMPLE = "finite"


class MonitorLevel(enum.Enum):
    """How much per-round observation the engine performs."""

    OFF = "off"
    GLOBAL = "global"
    FULL = "full"


class ExperimentKind(enum.Enum):
    """Experiment requested from the command line."""

    TRAIN = "train"
    FINETUNE = "finetune"
    LOWERBOUND = "lowerbound"
    CONCENTRATION = "concentration"
    SWEEP = "sweep"


class TrainingMethod(enum.Enum):
    """Pretraining algorithm compared in fine-tuning sweeps."""

    FEDAVG = "fedavg"
    DGD = "dgd"


class StreamTag(enum.Enum):
    """Purpose of a random stream; mixed into every stream key."""

    GROUND_TRUTH = "ground_truth"
    HEADS = "heads"
    INIT = "init"
    BATCH = "batch"
    CLIENTS = "clients"
    FINETUNE = "finetune"
    NEW_HEAD = "new_head"
    TRIAL = "trial"
    PLANT = "plant"
    GRAM_FACTORS = "gram_factors"
    GRAM_SAMPLES = "gram_samples"
    HEAD_EVENT = "head_event"


# Codes are part of the reproducibility contract: never renumber.
STREAM_TAG_BY_INT: dict[int, StreamTag] = {
    0: StreamTag.GROUND_TRUTH,
    1: StreamTag.HEADS,
    2: StreamTag.INIT,
    3: StreamTag.BATCH,
    4: StreamTag.CLIENTS,
    5: StreamTag.FINETUNE,
    6: StreamTag.NEW_HEAD,
    7: StreamTag.TRIAL,
    8: StreamTag.PLANT,
    9: StreamTag.GRAM_FACTORS,
    10: StreamTag.GRAM_SAMPLES,
    11: StreamTag.HEAD_EVENT,
}
