"""Data models shared by the simulator modules."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from ._helpers import _format_flag, _format_float, _json_float, _parse_enum
from .enums import MonitorLevel, Regime
from .exceptions import InvalidConfigError

FloatArray = NDArray[np.float64]


# ---------------------------------------------------------------------------
# Planted problem
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GroundTruth:
    """The planted system: orthonormal ``b_star`` (d x k), one head per client
    (rows of ``heads``, shape M x k) and the label-noise level."""

    b_star: FloatArray
    heads: FloatArray
    noise_sigma: float = 0.0

    @property
    def d(self) -> int:
        return int(self.b_star.shape[0])

    @property
    def k(self) -> int:
        return int(self.b_star.shape[1])

    @property
    def M(self) -> int:
        return int(self.heads.shape[0])

    @property
    def w_bar(self) -> FloatArray:
        """Mean ground-truth head."""
        return np.asarray(self.heads.mean(axis=0), dtype=np.float64)

    def target(self, client: int) -> FloatArray:
        """Return the client's ground-truth product ``B_* w_{*,i}``."""
        return self.b_star @ self.heads[client]


@dataclass(frozen=True)
class DiversityStats:
    """Task-diversity statistics of a set of ground-truth heads.

    ``kappa_max`` is ``inf`` when the heads are not diverse (``mu == 0``).
    """

    mu: float
    L_max: float
    gamma: float
    H: float
    kappa_max: float
    w_bar: tuple[float, ...]

    @property
    def is_diverse(self) -> bool:
        return self.mu > 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "mu": _json_float(self.mu),
            "L_max": _json_float(self.L_max),
            "gamma": _json_float(self.gamma),
            "H": _json_float(self.H),
            "kappa_max": _json_float(self.kappa_max),
            "w_bar": [_json_float(x) for x in self.w_bar],
        }


@dataclass(frozen=True, eq=False)
class Batch:
    """A mini-batch for one client: samples as rows of ``X`` and labels ``y``."""

    X: FloatArray
    y: FloatArray

    @property
    def size(self) -> int:
        return int(self.X.shape[0])


# ---------------------------------------------------------------------------
# Trainable state
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ModelState:
    """The trainable pair: representation ``B`` (d x k) and head ``w`` (k)."""

    B: FloatArray
    w: FloatArray

    @property
    def product(self) -> FloatArray:
        return self.B @ self.w

    def is_finite(self, limit: float = math.inf) -> bool:
        """True when every entry is finite and bounded by *limit* in magnitude."""
        if not (np.all(np.isfinite(self.B)) and np.all(np.isfinite(self.w))):
            return False
        largest = max(float(np.max(np.abs(self.B))), float(np.max(np.abs(self.w), initial=0.0)))
        return largest <= limit


@dataclass(frozen=True, eq=False)
class LocalTrajectory:
    """The local iterates of one client during one round.

    ``states[0]`` is the round's global state; ``states[s]`` follows *s*
    local steps.
    """

    client: int
    states: tuple[ModelState, ...]

    @property
    def final(self) -> ModelState:
        return self.states[-1]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MonitorConstants:
    """Explicit constants of the inductive hypotheses."""

    c3: float = 4800.0
    rate_const: float = 0.04
    rtol: float = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Full description of one training run.

    Parameters
    ----------
    d, k, M:
        Ambient dimension, representation rank and number of clients.
    m:
        Clients sampled per round; ``None`` means all ``M``.
    tau:
        Local steps per round (``tau=1`` with ``m=M`` is D-GD).
    alpha:
        Local step size.
    T:
        Number of communication rounds.
    regime:
        Population gradients or mini-batch gradients of size ``batch_size``.
    delta0_target:
        Plant the initialization at this principal angle distance to ``B_*``.
    monitor:
        Amount of per-round observation.
    threads:
        Worker threads for client updates; ``None`` defers to ``SIM_THREADS``.
    """

    d: int = 100
    k: int = 5
    M: int = 40
    m: int | None = None
    tau: int = 2
    alpha: float = 0.4
    T: int = 2000
    regime: Regime = Regime.POPULATION
    batch_size: int | None = None
    noise_sigma: float = 0.0
    seed: int = 0
    delta0_target: float | None = None
    monitor: MonitorLevel = MonitorLevel.GLOBAL
    constants: MonitorConstants = field(default_factory=MonitorConstants)
    threads: int | None = None

    @property
    def clients_per_round(self) -> int:
        return self.M if self.m is None else self.m

    @property
    def is_dgd(self) -> bool:
        return self.tau == 1 and self.clients_per_round == self.M

    def replace(self, **changes: Any) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def as_dgd(self) -> SimConfig:
        """The same run with one local step and full participation."""
        return self.replace(tau=1, m=None)

    def validate(self) -> None:
        """Raise :class:`InvalidConfigError` on the first violated invariant."""
        if self.k < 1 or self.k >= self.d:
            raise InvalidConfigError(f"need 1 <= k < d, got d={self.d}, k={self.k}")
        if self.M < 1:
            raise InvalidConfigError("M must be at least 1")
        if not 1 <= self.clients_per_round <= self.M:
            raise InvalidConfigError(f"m must be between 1 and M={self.M}, got {self.m}")
        if self.tau < 1:
            raise InvalidConfigError("tau must be at least 1")
        if not self.alpha > 0.0:
            raise InvalidConfigError("alpha must be positive")
        if self.T < 0:
            raise InvalidConfigError("T must be non-negative")
        if self.noise_sigma < 0.0:
            raise InvalidConfigError("noise_sigma must be non-negative")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")
        if self.regime is Regime.FINITE_SAMPLE and (
            self.batch_size is None or self.batch_size < 1
        ):
            raise InvalidConfigError("finite-sample regime needs batch_size >= 1")
        if self.threads is not None and self.threads < 1:
            raise InvalidConfigError("threads must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "d": self.d,
            "k": self.k,
            "M": self.M,
            "m": self.clients_per_round,
            "tau": self.tau,
            "alpha": self.alpha,
            "T": self.T,
            "regime": self.regime.value,
            "batch_size": self.batch_size,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "delta0_target": self.delta0_target,
            "monitor": self.monitor.value,
            "c3": self.constants.c3,
            "rate_const": self.constants.rate_const,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SimConfig:
        defaults = cls()
        regime = _parse_enum(Regime, data.get("regime")) or defaults.regime
        monitor = _parse_enum(MonitorLevel, data.get("monitor")) or defaults.monitor
        constants = MonitorConstants(
            c3=float(data.get("c3", defaults.constants.c3)),
            rate_const=float(data.get("rate_const", defaults.constants.rate_const)),
        )
        delta0 = data.get("delta0_target")
        batch_size = data.get("batch_size")
        threads = data.get("threads")
        return cls(
            d=int(data.get("d", defaults.d)),
            k=int(data.get("k", defaults.k)),
            M=int(data.get("M", defaults.M)),
            m=None if data.get("m") is None else int(data["m"]),
            tau=int(data.get("tau", defaults.tau)),
            alpha=float(data.get("alpha", defaults.alpha)),
            T=int(data.get("T", defaults.T)),
            regime=regime,
            batch_size=None if batch_size is None else int(batch_size),
            noise_sigma=float(data.get("noise_sigma", defaults.noise_sigma)),
            seed=int(data.get("seed", defaults.seed)),
            delta0_target=None if delta0 is None else float(delta0),
            monitor=monitor,
            constants=constants,
            threads=None if threads is None else int(threads),
        )


# ---------------------------------------------------------------------------
# Monitoring
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HypothesisBounds:
    """Right-hand sides of the inductive hypotheses for one run.

    Bounds that depend on ``kappa_max`` or ``mu`` are ``None`` when the heads
    are not diverse; ``rate`` is the per-round contraction factor.
    """

    a1: float
    a2: float
    a3: float | None
    rate: float | None
    a1_loc: float | None
    a2_loc: float
    a3_loc: float | None
    a4_loc_factor: float
    E0: float

    def to_dict(self) -> dict[str, Any]:
        return {name: _json_float(value) for name, value in dataclasses.asdict(self).items()}


@dataclass(frozen=True)
class GlobalHypothesisFlags:
    """Outcome of the global hypotheses; ``None`` means not applicable."""

    a1: bool | None = None
    a2: bool | None = None
    a3: bool | None = None
    a4: bool | None = None
    a5: bool | None = None

    def all_hold(self) -> bool:
        return all(flag is not False for flag in dataclasses.astuple(self))

    def to_dict(self) -> dict[str, bool | None]:
        return {
            "A1": self.a1,
            "A2": self.a2,
            "A3": self.a3,
            "A4": self.a4,
            "A5": self.a5,
        }


@dataclass(frozen=True)
class LocalHypothesisFlags:
    """Worst case of the local hypotheses over sampled clients and steps.

    ``worst_margin`` is the smallest relative slack ``(bound - value) / bound``
    seen; it is negative when some inequality failed.
    """

    a1_loc: bool | None = None
    a2_loc: bool | None = None
    a3_loc: bool | None = None
    a4_loc: bool | None = None
    worst_margin: float = math.inf

    def all_hold(self) -> bool:
        return all(
            flag is not False for flag in (self.a1_loc, self.a2_loc, self.a3_loc, self.a4_loc)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "A1_loc": self.a1_loc,
            "A2_loc": self.a2_loc,
            "A3_loc": self.a3_loc,
            "A4_loc": self.a4_loc,
            "worst_margin": _json_float(self.worst_margin),
        }


ROUND_COLUMNS: tuple[str, ...] = (
    "t",
    "dist",
    "delta_norm",
    "w_norm",
    "grad_norm_global",
    "A1",
    "A2",
    "A3",
    "A4",
    "A5",
    "A1_loc",
    "A2_loc",
    "A3_loc",
    "A4_loc",
    "prior_weight_measured",
    "prior_weight_predicted",
)


@dataclass(frozen=True)
class RoundMetrics:
    """Observables of the global state after round ``t`` (``t=0`` is the
    initialization).

    Flags describe the inequalities at this round only; aggregate them with
    :func:`fedsubspace.monitors.check_global_hypotheses`.
    """

    t: int
    dist: float
    delta_norm: float
    w_norm: float
    grad_norm_global: float
    perp_norm: float
    E0: float
    a1_residual: float | None = None
    global_flags: GlobalHypothesisFlags | None = None
    local_flags: LocalHypothesisFlags | None = None
    prior_weight_measured: float | None = None
    prior_weight_predicted: float | None = None

    def to_row(self) -> list[str]:
        """Render the fixed CSV columns of :data:`ROUND_COLUMNS`."""
        g = self.global_flags or GlobalHypothesisFlags()
        loc = self.local_flags or LocalHypothesisFlags()
        return [
            str(self.t),
            _format_float(self.dist),
            _format_float(self.delta_norm),
            _format_float(self.w_norm),
            _format_float(self.grad_norm_global),
            *(_format_flag(f) for f in (g.a1, g.a2, g.a3, g.a4, g.a5)),
            *(_format_flag(f) for f in (loc.a1_loc, loc.a2_loc, loc.a3_loc, loc.a4_loc)),
            _format_float(self.prior_weight_measured),
            _format_float(self.prior_weight_predicted),
        ]

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "t": self.t,
            "dist": _json_float(self.dist),
            "delta_norm": _json_float(self.delta_norm),
            "w_norm": _json_float(self.w_norm),
            "grad_norm_global": _json_float(self.grad_norm_global),
            "perp_norm": _json_float(self.perp_norm),
            "E0": _json_float(self.E0),
            "a1_residual": _json_float(self.a1_residual),
            "prior_weight_measured": _json_float(self.prior_weight_measured),
            "prior_weight_predicted": _json_float(self.prior_weight_predicted),
        }
        if self.global_flags is not None:
            data.update(self.global_flags.to_dict())
        if self.local_flags is not None:
            data.update(self.local_flags.to_dict())
        return data


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TrainingResult:
    """Everything produced by one training run."""

    ground_truth: GroundTruth
    initial_state: ModelState
    final_state: ModelState
    stats: DiversityStats
    dist0: float
    initial_metrics: RoundMetrics | None = None
    metrics: tuple[RoundMetrics, ...] = ()

    @property
    def E0(self) -> float:
        return 1.0 - self.dist0**2


@dataclass(frozen=True, eq=False)
class FineTuneTrace:
    """Per-step product error ``||B_s w_s - B_* w_new||^2`` for ``s = 0..tau'``."""

    errors: FloatArray
    n: int

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])


@dataclass(frozen=True, eq=False)
class AdversarialPair:
    """Two ground truths D-GD cannot tell apart from a shared initialization.

    ``b0`` has orthonormal columns; training starts from ``b0 / sqrt(alpha)``.
    """

    b_star: FloatArray
    b_star_prime: FloatArray
    b0: FloatArray
    delta0: float


@dataclass(frozen=True, eq=False)
class LowerBoundReport:
    """Outcome of running D-GD against both members of an adversarial pair."""

    delta0: float
    T: int
    bit_identical: bool
    max_trajectory_gap: float
    dist_to_star: FloatArray
    dist_to_star_prime: FloatArray
    separation: float
    separation_bound: float
    separation_bound_sqrt: float
    triangle_slack: float
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def final_max_dist(self) -> float:
        return max(float(self.dist_to_star[-1]), float(self.dist_to_star_prime[-1]))

    @property
    def case(self) -> str:
        """Which ground truth D-GD stayed far from."""
        if self.dist_to_star[-1] >= self.dist_to_star_prime[-1]:
            return "star"
        return "star_prime"

    @property
    def triangle_holds(self) -> bool:
        return self.triangle_slack >= -1e-8

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta0": self.delta0,
            "T": self.T,
            "bit_identical": self.bit_identical,
            "max_trajectory_gap": _json_float(self.max_trajectory_gap),
            "final_dist_star": _json_float(float(self.dist_to_star[-1])),
            "final_dist_star_prime": _json_float(float(self.dist_to_star_prime[-1])),
            "final_max_dist": _json_float(self.final_max_dist),
            "case": self.case,
            "separation": _json_float(self.separation),
            "separation_bound": _json_float(self.separation_bound),
            "separation_bound_sqrt": _json_float(self.separation_bound_sqrt),
            "triangle_slack": _json_float(self.triangle_slack),
            "triangle_holds": self.triangle_holds,
            "residuals": {key: _json_float(value) for key, value in self.residuals.items()},
        }


@dataclass(frozen=True)
class DeviationCurve:
    """Monte Carlo deviation statistics along a sequence of sample sizes.

    ``fitted_slope`` is the log-log slope of the mean deviation; it is
    ``nan`` with ``slope_defined=False`` when it cannot be fitted.
    """

    sample_sizes: tuple[int, ...]
    mean_deviation: tuple[float, ...]
    quantile95: tuple[float, ...]
    fitted_slope: float
    slope_defined: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_sizes": list(self.sample_sizes),
            "mean_deviation": [_json_float(x) for x in self.mean_deviation],
            "quantile95": [_json_float(x) for x in self.quantile95],
            "fitted_slope": _json_float(self.fitted_slope),
            "slope_defined": self.slope_defined,
        }


@dataclass(frozen=True)
class EventRateReport:
    """Frequency of the head-subsampling event over Monte Carlo trials."""

    m: int
    trials: int
    successes: int
    threshold: float
    mean_bound: float
    second_moment_bound: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.m,
            "trials": self.trials,
            "successes": self.successes,
            "rate": self.rate,
            "threshold": _json_float(self.threshold),
            "mean_bound": _json_float(self.mean_bound),
            "second_moment_bound": _json_float(self.second_moment_bound),
        }
