"""Experiment configuration files.

The format is flat ``key = value`` text. ``#`` starts a comment, blank
lines are ignored and list values are comma separated::

    # FedAvg with two local steps
    kind = train
    d = 100
    tau = 2
    n_values = 5, 10, 25, 50

Unknown or repeated keys are errors. Omitted keys take the defaults of
:class:`ExperimentConfig` and :class:`~fedsubspace.models.SimConfig`.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ._helpers import _parse_enum
from .enums import ExperimentKind, MonitorLevel, Regime
from .exceptions import ConfigParseError, InvalidConfigError
from .models import SimConfig


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse_or_none(text: str) -> Any:
        if text.lower() in ("none", "null", ""):
            return None
        return parse(text)

    return parse_or_none


def _parse_list(parse: Callable[[str], Any]) -> Callable[[str], tuple[Any, ...]]:
    def parse_items(text: str) -> tuple[Any, ...]:
        items = [item.strip() for item in text.split(",")]
        if not all(items):
            raise ValueError("empty list item")
        return tuple(parse(item) for item in items)

    return parse_items


def _parse_str(text: str) -> str:
    if not text:
        raise ValueError("empty value")
    return text


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "kind": lambda text: _parse_enum(ExperimentKind, text),
    "d": _parse_int,
    "k": _parse_int,
    "M": _parse_int,
    "m": _parse_optional(_parse_int),
    "tau": _parse_int,
    "alpha": _parse_float,
    "T": _parse_int,
    "regime": lambda text: _parse_enum(Regime, text),
    "batch_size": _parse_optional(_parse_int),
    "noise_sigma": _parse_float,
    "seed": _parse_int,
    "delta0_target": _parse_optional(_parse_float),
    "monitor": lambda text: _parse_enum(MonitorLevel, text),
    "c3": _parse_float,
    "rate_const": _parse_float,
    "threads": _parse_optional(_parse_int),
    "trials": _parse_int,
    "n_values": _parse_list(_parse_int),
    "tau_prime": _parse_int,
    "alpha_ft": _parse_float,
    "finetune_noise_sigma": _parse_float,
    "delta0_values": _parse_list(_parse_float),
    "tau_values": _parse_list(_parse_int),
    "d1": _parse_int,
    "d2": _parse_int,
    "b_values": _parse_list(_parse_int),
    "M_values": _parse_list(_parse_int),
    "conc_b": _parse_int,
    "conc_trials": _parse_int,
    "event_trials": _parse_int,
    "event_T": _parse_int,
    "out": _parse_str,
}

_SIM_KEYS = frozenset(
    {
        "d",
        "k",
        "M",
        "m",
        "tau",
        "alpha",
        "T",
        "regime",
        "batch_size",
        "noise_sigma",
        "seed",
        "delta0_target",
        "monitor",
        "c3",
        "rate_const",
        "threads",
    }
)


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: the training setup plus kind-specific
    settings.

    Parameters
    ----------
    kind:
        Which experiment to run.
    sim:
        Training configuration shared by every kind.
    out:
        Output directory for CSV files and ``summary.json``.
    trials:
        End-to-end repetitions (fine-tuning, sweeps).
    n_values:
        Sample counts of the new client in fine-tuning.
    tau_prime, alpha_ft, finetune_noise_sigma:
        Fine-tuning steps, step size and label noise of the new client.
    delta0_values:
        Initial distances of the lower-bound construction.
    tau_values:
        Local step counts compared by a sweep.
    d1, d2, b_values, M_values, conc_b, conc_trials:
        Gram-deviation experiments.
    event_trials, event_T:
        Head-subsampling event experiment.
    """

    kind: ExperimentKind = ExperimentKind.TRAIN
    sim: SimConfig = field(default_factory=SimConfig)
    out: str = "out"
    trials: int = 10
    n_values: tuple[int, ...] = (5, 10, 25, 50)
    tau_prime: int = 200
    alpha_ft: float = 0.01
    finetune_noise_sigma: float = 0.1
    delta0_values: tuple[float, ...] = (0.1, 0.3, 0.5)
    tau_values: tuple[int, ...] = (1, 2)
    d1: int = 5
    d2: int = 5
    b_values: tuple[int, ...] = (100, 1000, 10000)
    M_values: tuple[int, ...] = (1, 10, 100)
    conc_b: int = 100
    conc_trials: int = 30
    event_trials: int = 10000
    event_T: int = 10

    def replace(self, **changes: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        """Raise :class:`InvalidConfigError` on the first violated invariant."""
        self.sim.validate()
        if not self.out:
            raise InvalidConfigError("out must be a non-empty path")
        if self.trials < 1:
            raise InvalidConfigError("trials must be at least 1")
        if not self.n_values or min(self.n_values) < 1:
            raise InvalidConfigError("n_values must be positive counts")
        if self.tau_prime < 1:
            raise InvalidConfigError("tau_prime must be at least 1")
        if not self.alpha_ft > 0.0:
            raise InvalidConfigError("alpha_ft must be positive")
        if self.finetune_noise_sigma < 0.0:
            raise InvalidConfigError("finetune_noise_sigma must be non-negative")
        if not self.delta0_values or not all(0.0 < x <= 0.5 for x in self.delta0_values):
            raise InvalidConfigError("delta0_values must lie in (0, 0.5]")
        if not self.tau_values or min(self.tau_values) < 1:
            raise InvalidConfigError("tau_values must be at least 1")
        if self.d1 < 1 or self.d2 < 1:
            raise InvalidConfigError("d1 and d2 must be at least 1")
        for name in ("b_values", "M_values"):
            values = getattr(self, name)
            if not values or values[0] < 1 or any(b <= a for a, b in zip(values, values[1:])):
                raise InvalidConfigError(f"{name} must be positive and strictly increasing")
        if self.conc_b < 1:
            raise InvalidConfigError("conc_b must be at least 1")
        if self.conc_trials < 30:
            raise InvalidConfigError("conc_trials must be at least 30")
        if self.event_trials < 1 or self.event_T < 1:
            raise InvalidConfigError("event_trials and event_T must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        data = self.sim.to_dict()
        data.update(
            {
                "kind": self.kind.value,
                "out": self.out,
                "trials": self.trials,
                "n_values": list(self.n_values),
                "tau_prime": self.tau_prime,
                "alpha_ft": self.alpha_ft,
                "finetune_noise_sigma": self.finetune_noise_sigma,
                "delta0_values": list(self.delta0_values),
                "tau_values": list(self.tau_values),
                "d1": self.d1,
                "d2": self.d2,
                "b_values": list(self.b_values),
                "M_values": list(self.M_values),
                "conc_b": self.conc_b,
                "conc_trials": self.conc_trials,
                "event_trials": self.event_trials,
                "event_T": self.event_T,
            }
        )
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Build and validate a config from flat, already-typed values."""
        unknown = set(data) - set(_CONVERTERS)
        if unknown:
            raise InvalidConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
        sim = SimConfig.from_dict({key: data[key] for key in data if key in _SIM_KEYS})
        extra = {key: data[key] for key in data if key not in _SIM_KEYS and key != "kind"}
        for key in ("n_values", "delta0_values", "tau_values", "b_values", "M_values"):
            if key in extra:
                extra[key] = tuple(extra[key])
        kind = _parse_enum(ExperimentKind, data.get("kind")) or ExperimentKind.TRAIN
        config = cls(kind=kind, sim=sim, **extra)
        config.validate()
        return config


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text.

    Raises
    ------
    ConfigParseError
        For malformed lines, unknown or repeated keys and unparsable values;
        the error carries the offending ``key`` and ``line``.
    InvalidConfigError
        When the parsed values violate a configuration invariant.
    """
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigParseError("missing key", line=lineno)
        if key not in _CONVERTERS:
            raise ConfigParseError(f"unknown key '{key}'", key=key, line=lineno)
        if key in values:
            raise ConfigParseError(f"duplicate key '{key}'", key=key, line=lineno)
        try:
            values[key] = _CONVERTERS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigParseError(
                f"invalid value {value!r} for '{key}': {exc}", key=key, line=lineno
            ) from exc
    return ExperimentConfig.from_dict(values)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and parse a UTF-8 configuration file."""
    return parse_config(Path(path).read_text(encoding="utf-8"))
