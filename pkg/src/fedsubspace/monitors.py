"""Per-round observables and runtime checks of the convergence hypotheses.

Global hypotheses (round ``t``):

* A1: ``||w_t - alpha (I + Delta_t) B_t^T B_* wbar_t|| <= 91 alpha^2.5 tau L^3``
* A2: ``||w_t|| <= 2 sqrt(alpha) L``
* A3: ``||Delta_t|| <= c3 alpha^2 tau L^2 kappa^2 / E0``
* A4: ``||B_perp^T B_t|| <= (1 - r alpha^2 tau mu^2 E0) ||B_perp^T B_{t-1}||``
* A5: ``dist_t <= (1 - r alpha^2 tau mu^2 E0)^(t-1)``

Local hypotheses (client ``i``, step ``s``) bound the head residual by
``4 c3 alpha^2.5 tau L^3 kappa^2 / E0``, the head norm by ``2 sqrt(alpha) L``,
the local Delta by ``2 c3 alpha^2 tau L^2 kappa^2 / E0`` and the local
distance by ``1.1 dist_t``. Here ``L = L_max``, ``kappa = kappa_max``,
``r = 0.04`` and ``E0 = 1 - dist_0^2``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Sequence

import numpy as np

from .enums import MonitorLevel, Regime
from .exceptions import DegenerateHeadError
from .linalg import (
    min_singular_value,
    principal_angle_distance,
    projection_residual_norm,
    spectral_norm,
)
from .models import (
    DiversityStats,
    FloatArray,
    GlobalHypothesisFlags,
    GroundTruth,
    HypothesisBounds,
    LocalHypothesisFlags,
    LocalTrajectory,
    ModelState,
    RoundMetrics,
    SimConfig,
)

logger = logging.getLogger(__name__)


def _holds(value: float, bound: float, rtol: float) -> bool:
    return value <= bound + rtol * abs(bound)


def _all_of(flags: Sequence[bool | None]) -> bool | None:
    applicable = [flag for flag in flags if flag is not None]
    if not applicable:
        return None
    return all(applicable)


def delta_matrix(B: FloatArray, alpha: float) -> FloatArray:
    """``I_k - alpha B^T B``."""
    return np.eye(B.shape[1]) - alpha * (B.T @ B)


def global_grad_norm(state: ModelState, ground_truth: GroundTruth) -> float:
    """Frobenius norm of the gradient of the average population loss."""
    residual = state.product - ground_truth.b_star @ ground_truth.w_bar
    grad_w = state.B.T @ residual
    grad_b_norm = float(np.linalg.norm(residual)) * float(np.linalg.norm(state.w))
    return math.sqrt(float(grad_w @ grad_w) + grad_b_norm**2)


def hypothesis_bounds(stats: DiversityStats, config: SimConfig, E0: float) -> HypothesisBounds:
    """Evaluate every hypothesis bound for one run.

    A non-positive ``E0`` makes the ``1/E0`` bounds infinite.
    """
    alpha, tau = config.alpha, config.tau
    L = stats.L_max
    c3 = config.constants.c3
    inv_e0 = 1.0 / E0 if E0 > 0.0 else math.inf
    diverse = stats.is_diverse
    kappa2 = stats.kappa_max**2
    return HypothesisBounds(
        a1=91.0 * alpha**2.5 * tau * L**3,
        a2=2.0 * math.sqrt(alpha) * L,
        a3=c3 * alpha**2 * tau * L**2 * kappa2 * inv_e0 if diverse else None,
        rate=(
            1.0 - config.constants.rate_const * alpha**2 * tau * stats.mu**2 * E0
            if diverse
            else None
        ),
        a1_loc=4.0 * c3 * alpha**2.5 * tau * L**3 * kappa2 * inv_e0 if diverse else None,
        a2_loc=2.0 * math.sqrt(alpha) * L,
        a3_loc=2.0 * c3 * alpha**2 * tau * L**2 * kappa2 * inv_e0 if diverse else None,
        a4_loc_factor=1.1,
        E0=E0,
    )


def evaluate_global(
    current: RoundMetrics,
    previous: RoundMetrics | None,
    bounds: HypothesisBounds,
    rtol: float = 1e-9,
) -> GlobalHypothesisFlags:
    """Check the global inequalities at ``current.t``."""
    a1 = None if current.a1_residual is None else _holds(current.a1_residual, bounds.a1, rtol)
    a3 = None if bounds.a3 is None else _holds(current.delta_norm, bounds.a3, rtol)
    a4 = a5 = None
    if bounds.rate is not None:
        if previous is not None:
            a4 = _holds(current.perp_norm, bounds.rate * previous.perp_norm, rtol)
        if current.t >= 1:
            a5 = _holds(current.dist, bounds.rate ** (current.t - 1), rtol)
    return GlobalHypothesisFlags(
        a1=a1,
        a2=_holds(current.w_norm, bounds.a2, rtol),
        a3=a3,
        a4=a4,
        a5=a5,
    )


def check_global_hypotheses(
    trajectory: Sequence[RoundMetrics],
    stats: DiversityStats,
    config: SimConfig,
) -> GlobalHypothesisFlags:
    """Whether each global hypothesis held at every recorded round.

    A leading ``t=0`` entry (the initialization) only serves as the
    predecessor for the contraction check.
    """
    if not trajectory:
        raise ValueError("trajectory must be nonempty")
    bounds = hypothesis_bounds(stats, config, trajectory[0].E0)
    rtol = config.constants.rtol
    per_round: list[GlobalHypothesisFlags] = []
    previous: RoundMetrics | None = None
    for metrics in trajectory:
        if metrics.t >= 1:
            per_round.append(evaluate_global(metrics, previous, bounds, rtol))
        previous = metrics
    return GlobalHypothesisFlags(
        a1=_all_of([flags.a1 for flags in per_round]),
        a2=_all_of([flags.a2 for flags in per_round]),
        a3=_all_of([flags.a3 for flags in per_round]),
        a4=_all_of([flags.a4 for flags in per_round]),
        a5=_all_of([flags.a5 for flags in per_round]),
    )


class _LocalTally:
    """Running conjunction of the local checks plus the tightest margin."""

    def __init__(self, rtol: float) -> None:
        self.rtol = rtol
        self.flags: dict[str, bool | None] = {}
        self.worst_margin = math.inf

    def check(self, name: str, value: float, bound: float | None) -> None:
        if bound is None:
            self.flags.setdefault(name, None)
            return
        ok = _holds(value, bound, self.rtol)
        previous = self.flags.get(name)
        self.flags[name] = ok if previous is None else previous and ok
        if math.isfinite(bound):
            margin = (bound - value) / bound if bound > 0.0 else bound - value
            self.worst_margin = min(self.worst_margin, margin)


def check_local_hypotheses(
    local_trajectories: Sequence[LocalTrajectory],
    ground_truth: GroundTruth,
    stats: DiversityStats,
    config: SimConfig,
    E0: float,
) -> LocalHypothesisFlags:
    """Worst case of the local hypotheses over clients and local steps."""
    bounds = hypothesis_bounds(stats, config, E0)
    alpha = config.alpha
    tally = _LocalTally(config.constants.rtol)
    for trajectory in local_trajectories:
        target = ground_truth.target(trajectory.client)
        dist_t = principal_angle_distance(trajectory.states[0].B, ground_truth.b_star)
        for before, after in zip(trajectory.states, trajectory.states[1:]):
            head_residual = after.w - alpha * (before.B.T @ target)
            tally.check("a1_loc", float(np.linalg.norm(head_residual)), bounds.a1_loc)
            tally.check("a2_loc", float(np.linalg.norm(after.w)), bounds.a2_loc)
            tally.check("a3_loc", spectral_norm(delta_matrix(after.B, alpha)), bounds.a3_loc)
            tally.check(
                "a4_loc",
                principal_angle_distance(after.B, ground_truth.b_star),
                bounds.a4_loc_factor * dist_t,
            )
    return LocalHypothesisFlags(
        a1_loc=tally.flags.get("a1_loc"),
        a2_loc=tally.flags.get("a2_loc"),
        a3_loc=tally.flags.get("a3_loc"),
        a4_loc=tally.flags.get("a4_loc"),
        worst_margin=tally.worst_margin,
    )


def prior_weight_diagnostics(
    local_trajectories: Sequence[LocalTrajectory],
    B_t: FloatArray,
    b_star: FloatArray,
    alpha: float,
    heads: FloatArray,
) -> tuple[float, float]:
    """Measured and predicted norm of the prior weight of one round.

    Parameters
    ----------
    local_trajectories:
        The round's local iterates, one per sampled client.
    B_t:
        Global representation at the start of the round.
    b_star:
        Ground-truth representation.
    alpha:
        Local step size.
    heads:
        Ground-truth heads of the sampled clients, in trajectory order.

    Returns
    -------
    tuple
        ``(measured, predicted)`` where *measured* is
        ``||mean_i prod_s (I - alpha w_{i,s} w_{i,s}^T)||_2`` and *predicted*
        is ``1 - alpha sigma_min^2(B_*^T B_t) muhat^2``.

    Raises
    ------
    DegenerateHeadError
        If a sampled ground-truth head is zero.
    """
    W = np.atleast_2d(np.asarray(heads, dtype=np.float64))
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateHeadError("a sampled ground-truth head is zero")
    k = B_t.shape[1]
    identity = np.eye(k)
    total = np.zeros((k, k))
    for trajectory in local_trajectories:
        product = identity.copy()
        for state in trajectory.states[:-1]:
            product = product @ (identity - alpha * np.outer(state.w, state.w))
        total += product
    measured = spectral_norm(total / len(local_trajectories))

    normalized = W / norms[:, None]
    mu_hat_sq = min_singular_value(normalized.T @ normalized / W.shape[0])
    sigma = min_singular_value(b_star.T @ B_t)
    predicted = 1.0 - alpha * sigma**2 * mu_hat_sq
    return measured, predicted


class Monitor:
    """Computes :class:`RoundMetrics` for one training run.

    ``E0`` is fixed from the measured distance of the initialization. The
    monitor only reads the states it is given.

    Parameters
    ----------
    ground_truth:
        The planted instance being learned.
    stats:
        Diversity statistics of its heads.
    config:
        The run configuration; ``config.monitor`` selects the checks.
    initial_state:
        The global state at ``t=0``.
    """

    def __init__(
        self,
        ground_truth: GroundTruth,
        stats: DiversityStats,
        config: SimConfig,
        initial_state: ModelState,
    ) -> None:
        self._ground_truth = ground_truth
        self._stats = stats
        self._config = config
        self.dist0 = principal_angle_distance(initial_state.B, ground_truth.b_star)
        self.E0 = 1.0 - self.dist0**2
        self.bounds = hypothesis_bounds(stats, config, self.E0)
        self._previous: RoundMetrics | None = None

    def _observables(self, t: int, state: ModelState) -> RoundMetrics:
        b_star = self._ground_truth.b_star
        return RoundMetrics(
            t=t,
            dist=principal_angle_distance(state.B, b_star),
            delta_norm=spectral_norm(delta_matrix(state.B, self._config.alpha)),
            w_norm=float(np.linalg.norm(state.w)),
            grad_norm_global=global_grad_norm(state, self._ground_truth),
            perp_norm=projection_residual_norm(b_star, state.B),
            E0=self.E0,
        )

    def initial_metrics(self, state: ModelState) -> RoundMetrics:
        """Observables of the initialization (no hypothesis flags)."""
        metrics = self._observables(0, state)
        self._previous = metrics
        return metrics

    def observe(
        self,
        t: int,
        state: ModelState,
        local_trajectories: Sequence[LocalTrajectory],
    ) -> RoundMetrics:
        """Metrics of the global state *state* produced by round ``t - 1``."""
        gt = self._ground_truth
        alpha = self._config.alpha
        clients = [trajectory.client for trajectory in local_trajectories]
        sampled_heads = gt.heads[clients]
        metrics = self._observables(t, state)

        delta = delta_matrix(state.B, alpha)
        signal = state.B.T @ (gt.b_star @ sampled_heads.mean(axis=0))
        a1_residual = float(np.linalg.norm(state.w - alpha * (signal + delta @ signal)))
        metrics = dataclasses.replace(metrics, a1_residual=a1_residual)

        flags = evaluate_global(metrics, self._previous, self.bounds, self._config.constants.rtol)
        local_flags = None
        if self._config.monitor is MonitorLevel.FULL:
            local_flags = check_local_hypotheses(
                local_trajectories, gt, self._stats, self._config, self.E0
            )

        measured = predicted = None
        if self._config.regime is Regime.POPULATION:
            try:
                measured, predicted = prior_weight_diagnostics(
                    local_trajectories,
                    local_trajectories[0].states[0].B,
                    gt.b_star,
                    alpha,
                    sampled_heads,
                )
            except DegenerateHeadError:
                logger.debug("round %d: prior weight undefined for a zero head", t)

        metrics = dataclasses.replace(
            metrics,
            global_flags=flags,
            local_flags=local_flags,
            prior_weight_measured=measured,
            prior_weight_predicted=predicted,
        )
        self._previous = metrics
        return metrics
