"""FedAvg and D-GD rounds in the population and finite-sample regimes.

Example
-------
>>> from fedsubspace import SimConfig, run_training
>>> result = run_training(SimConfig(d=20, k=3, M=10, T=50))
>>> result.metrics[-1].t
50
"""

from __future__ import annotations

import contextlib
import logging
import os
from collections.abc import Iterator
from concurrent.futures import Executor, ThreadPoolExecutor

import numpy as np

from .enums import MonitorLevel, Regime, StreamTag
from .exceptions import DimensionError, DivergedError, InvalidSampleSizeError
from .linalg import principal_angle_distance
from .models import (
    Batch,
    FineTuneTrace,
    FloatArray,
    GroundTruth,
    LocalTrajectory,
    ModelState,
    RoundMetrics,
    SimConfig,
    TrainingResult,
)
from .monitors import Monitor
from .problem import diversity_stats, gen_ground_truth, gen_init, sample_batch
from .rng import counter_stream, stream_key

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
THREADS_ENV = "SIM_THREADS"


# -- local updates ----------------------------------------------------------


def _product_step(state: ModelState, target: FloatArray, alpha: float) -> ModelState:
    residual = state.B @ state.w - target
    return ModelState(
        B=state.B - alpha * np.outer(residual, state.w),
        w=state.w - alpha * (state.B.T @ residual),
    )


def local_step_population(
    state: ModelState,
    b_star: FloatArray,
    w_star_i: FloatArray,
    alpha: float,
) -> ModelState:
    """One gradient step on ``f_i(B, w) = 1/2 ||B w - B_* w_{*,i}||^2``.

    Both blocks are evaluated at the incoming state.
    """
    return _product_step(state, b_star @ w_star_i, alpha)


def local_step_finite(state: ModelState, batch: Batch, alpha: float) -> ModelState:
    """One gradient step on the empirical loss ``1/(2b) ||y - X B w||^2``."""
    error = batch.X @ (state.B @ state.w) - batch.y
    gradient = batch.X.T @ error / batch.size
    return ModelState(
        B=state.B - alpha * np.outer(gradient, state.w),
        w=state.w - alpha * (state.B.T @ gradient),
    )


def dgd_step(state: ModelState, mean_target: FloatArray, alpha: float) -> ModelState:
    """Closed-form D-GD update driven only by the product ``B_* wbar_*``."""
    return _product_step(state, mean_target, alpha)


def run_local(
    state: ModelState,
    ground_truth: GroundTruth,
    client: int,
    tau: int,
    round_t: int,
    config: SimConfig,
) -> LocalTrajectory:
    """Run *tau* local steps of *client* from the global *state*.

    In the finite-sample regime step ``s`` uses a fresh batch from the stream
    ``(seed, BATCH, round_t, client, s)``.
    """
    states = [state]
    current = state
    for s in range(tau):
        if config.regime is Regime.POPULATION:
            current = local_step_population(
                current, ground_truth.b_star, ground_truth.heads[client], config.alpha
            )
        else:
            assert config.batch_size is not None
            batch = sample_batch(
                ground_truth,
                client,
                config.batch_size,
                stream_key(config.seed, StreamTag.BATCH, round_t, client, s),
            )
            current = local_step_finite(current, batch, config.alpha)
        states.append(current)
    return LocalTrajectory(client=client, states=tuple(states))


# -- rounds -----------------------------------------------------------------


def sample_clients(M: int, m: int, round_t: int, seed: int) -> list[int]:
    """Sorted indices of the *m* clients sampled without replacement in a round."""
    if not 1 <= m <= M:
        raise InvalidSampleSizeError(f"cannot sample {m} of {M} clients")
    stream = counter_stream(stream_key(seed, StreamTag.CLIENTS, round_t))
    return sorted(stream.partial_shuffle(M, m))


def average_states(states: list[ModelState]) -> ModelState:
    """Equal-weight average of both blocks, summed in list order."""
    B = states[0].B.copy()
    w = states[0].w.copy()
    for state in states[1:]:
        B += state.B
        w += state.w
    return ModelState(B=B / len(states), w=w / len(states))


def global_round(
    global_state: ModelState,
    ground_truth: GroundTruth,
    round_t: int,
    config: SimConfig,
    *,
    monitor: Monitor | None = None,
    executor: Executor | None = None,
) -> tuple[ModelState, RoundMetrics | None]:
    """Execute round *round_t*: sample clients, update locally, average.

    Returns
    -------
    tuple
        The next global state and its metrics (``None`` without a monitor).
    """
    clients = sample_clients(ground_truth.M, config.clients_per_round, round_t, config.seed)

    def local(client: int) -> LocalTrajectory:
        # error state is per thread; the caller's does not reach pool workers
        with np.errstate(over="ignore", invalid="ignore"):
            return run_local(global_state, ground_truth, client, config.tau, round_t, config)

    if executor is None:
        trajectories = [local(client) for client in clients]
    else:
        trajectories = list(executor.map(local, clients))

    next_state = average_states([trajectory.final for trajectory in trajectories])
    if not next_state.is_finite(DIVERGENCE_LIMIT):
        raise DivergedError(round_t + 1)
    metrics = None
    if monitor is not None:
        metrics = monitor.observe(round_t + 1, next_state, trajectories)
    return next_state, metrics


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: *requested*, else ``SIM_THREADS``, else all cores."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


@contextlib.contextmanager
def _client_pool(threads: int, clients_per_round: int) -> Iterator[Executor | None]:
    if threads <= 1 or clients_per_round <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=min(threads, clients_per_round)) as pool:
        yield pool


def run_training(
    config: SimConfig,
    *,
    ground_truth: GroundTruth | None = None,
    init_state: ModelState | None = None,
) -> TrainingResult:
    """Run ``config.T`` rounds of FedAvg (D-GD when ``tau=1`` and ``m=M``).

    Parameters
    ----------
    config:
        The run configuration.
    ground_truth:
        Use this instance instead of sampling one from ``config.seed``.
    init_state:
        Start from this state instead of :func:`fedsubspace.problem.gen_init`.

    Raises
    ------
    DivergedError
        If an entry of the global state exceeds ``1e12`` in magnitude or
        stops being finite. The metrics recorded so far are attached.
    """
    config.validate()
    gt = ground_truth
    if gt is None:
        gt = gen_ground_truth(config.d, config.k, config.M, config.noise_sigma, config.seed)
    if gt.b_star.shape != (config.d, config.k) or gt.M != config.M:
        raise DimensionError(
            f"instance {gt.b_star.shape} with M={gt.M} does not match "
            f"config d={config.d}, k={config.k}, M={config.M}"
        )
    state = init_state
    if state is None:
        state = gen_init(gt, config.alpha, config.delta0_target, config.seed)
    stats = diversity_stats(gt.heads)

    monitor = None
    initial_metrics = None
    if config.monitor is not MonitorLevel.OFF:
        monitor = Monitor(gt, stats, config, state)
        initial_metrics = monitor.initial_metrics(state)
        dist0 = monitor.dist0
    else:
        dist0 = principal_angle_distance(state.B, gt.b_star)

    logger.info(
        "training %s d=%d k=%d M=%d m=%d tau=%d alpha=%g T=%d regime=%s",
        "D-GD" if config.is_dgd else "FedAvg",
        config.d,
        config.k,
        config.M,
        config.clients_per_round,
        config.tau,
        config.alpha,
        config.T,
        config.regime.value,
    )
    initial = state
    metrics: list[RoundMetrics] = []
    threads = resolve_threads(config.threads)
    with _client_pool(threads, config.clients_per_round) as pool:
        for t in range(config.T):
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    state, round_metrics = global_round(
                        state, gt, t, config, monitor=monitor, executor=pool
                    )
            except DivergedError as exc:
                logger.error("diverged at round %d", exc.round_t)
                raise DivergedError(exc.round_t, metrics) from exc
            if round_metrics is not None:
                metrics.append(round_metrics)
                logger.debug(
                    "round %d dist=%.6e grad=%.6e",
                    round_metrics.t,
                    round_metrics.dist,
                    round_metrics.grad_norm_global,
                )

    if metrics:
        logger.info("finished %d rounds, dist %.6e", config.T, metrics[-1].dist)
    else:
        logger.info("finished %d rounds", config.T)
    return TrainingResult(
        ground_truth=gt,
        initial_state=initial,
        final_state=state,
        stats=stats,
        dist0=dist0,
        initial_metrics=initial_metrics,
        metrics=tuple(metrics),
    )


# -- fine-tuning ------------------------------------------------------------


def finetune(
    pretrained: ModelState,
    new_client: GroundTruth,
    tau_prime: int,
    alpha_ft: float,
    b: int,
    seed: int,
) -> FineTuneTrace:
    """Adapt a pretrained model to an unseen client with full-batch steps.

    One batch of *b* samples is drawn from the stream ``(seed, FINETUNE)``
    and reused for all *tau_prime* steps.

    Parameters
    ----------
    pretrained:
        Starting representation and head.
    new_client:
        Single-head instance sharing ``B_*`` (see
        :func:`fedsubspace.problem.gen_new_client`).
    tau_prime:
        Number of steps.
    alpha_ft:
        Fine-tuning step size.
    b:
        Number of samples of the new client.
    seed:
        Master seed of the batch stream.
    """
    if tau_prime < 1:
        raise ValueError("tau_prime must be at least 1")
    if not alpha_ft > 0.0:
        raise ValueError("alpha_ft must be positive")
    batch = sample_batch(new_client, 0, b, stream_key(seed, StreamTag.FINETUNE))
    target = new_client.target(0)
    errors = np.empty(tau_prime + 1)
    state = pretrained
    errors[0] = _squared_error(state, target)
    for s in range(1, tau_prime + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            state = local_step_finite(state, batch, alpha_ft)
        if not state.is_finite(DIVERGENCE_LIMIT):
            raise DivergedError(s)
        errors[s] = _squared_error(state, target)
    return FineTuneTrace(errors=errors, n=b)


def _squared_error(state: ModelState, target: FloatArray) -> float:
    diff = state.product - target
    return float(diff @ diff)

