"""Planted instances, initializations, client data and task diversity."""

from __future__ import annotations

import logging
import math

import numpy as np
from numpy.typing import ArrayLike

from .enums import StreamTag
from .exceptions import DimensionError, TargetInfeasibleError
from .linalg import min_singular_value, orthogonal_complement, orthonormalize, spectral_norm
from .models import Batch, DiversityStats, FloatArray, GroundTruth, ModelState
from .rng import StreamKey, counter_stream, stream_key

logger = logging.getLogger(__name__)


def gen_ground_truth(
    d: int,
    k: int,
    M: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> GroundTruth:
    """Sample a planted instance.

    ``B_*`` is the orthonormal factor of a Gaussian ``d x k`` matrix and the
    ``M`` heads are i.i.d. ``N(0, I_k)``.

    Raises
    ------
    DimensionError
        Unless ``1 <= k < d`` and ``M >= 1``.
    """
    if not 1 <= k < d:
        raise DimensionError(f"need 1 <= k < d, got d={d}, k={k}")
    if M < 1:
        raise DimensionError("need at least one client")
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be non-negative")
    gaussian = counter_stream(stream_key(seed, StreamTag.GROUND_TRUTH)).normal((d, k))
    b_star, _ = orthonormalize(gaussian)
    heads = counter_stream(stream_key(seed, StreamTag.HEADS)).normal((M, k))
    logger.debug("ground truth d=%d k=%d M=%d seed=%d", d, k, M, seed)
    return GroundTruth(b_star=b_star, heads=heads, noise_sigma=float(noise_sigma))


def gen_new_client(ground_truth: GroundTruth, noise_sigma: float, seed: int) -> GroundTruth:
    """A single unseen client on the same representation, for fine-tuning."""
    head = counter_stream(stream_key(seed, StreamTag.NEW_HEAD)).normal((1, ground_truth.k))
    return GroundTruth(b_star=ground_truth.b_star, heads=head, noise_sigma=float(noise_sigma))


def diversity_stats(heads: ArrayLike) -> DiversityStats:
    """Diversity statistics of the ground-truth heads (one per row)."""
    W = np.atleast_2d(np.asarray(heads, dtype=np.float64))
    if W.shape[0] == 0:
        raise ValueError("need at least one head")
    M, k = W.shape
    w_bar = W.mean(axis=0)
    centered = W - w_bar
    gamma = math.sqrt(float(np.mean(np.sum(centered**2, axis=1))))
    covariance = centered.T @ centered / M
    mu = math.sqrt(min_singular_value(covariance))

    second_moment = W.T @ W / M
    h4 = float(np.mean([spectral_norm(np.outer(w, w) - second_moment) ** 2 for w in W]))
    L_max = float(np.max(np.linalg.norm(W, axis=1)))
    kappa = L_max / mu if mu > 0.0 else math.inf
    return DiversityStats(
        mu=mu,
        L_max=L_max,
        gamma=gamma,
        H=h4**0.25,
        kappa_max=kappa,
        w_bar=tuple(float(x) for x in w_bar),
    )


def head_sampling_threshold(stats: DiversityStats, alpha: float, T: int, M: int) -> float:
    """Clients per round above which the subsampled head statistics stay
    close to the full-population ones with overwhelming probability.

    Returns ``min(M, 20((gamma/L)^2 + (H/L)^4) (alpha L)^-4 log(kT))``.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    L = stats.L_max
    if L == 0.0:
        return 1.0
    k = len(stats.w_bar)
    value = (
        20.0
        * ((stats.gamma / L) ** 2 + (stats.H / L) ** 4)
        * (alpha * L) ** -4
        * math.log(k * max(T, 1))
    )
    return min(float(M), value)


def theorem_step_size(
    stats: DiversityStats,
    delta0: float,
    tau: int,
    c3: float = 4800.0,
) -> float:
    """Largest step size covered by the convergence guarantee,
    ``(1 - delta0) / (c3 sqrt(tau) L_max kappa_max^2)``."""
    if not stats.is_diverse:
        raise ValueError("step size is undefined for heads with mu = 0")
    if not 0.0 <= delta0 < 1.0:
        raise ValueError("delta0 must be in [0, 1)")
    return (1.0 - delta0) / (c3 * math.sqrt(tau) * stats.L_max * stats.kappa_max**2)


def _planted_basis(b_star: FloatArray, delta0: float, seed: int) -> FloatArray:
    """Orthonormal basis at distance *delta0* from ``col(b_star)``.

    One principal direction is tilted by ``arcsin(delta0)`` into the
    complement; the other ``k - 1`` stay inside ``col(b_star)``.
    """
    d, k = b_star.shape
    mixing = counter_stream(stream_key(seed, StreamTag.PLANT, 0)).normal((k, k))
    rotation, _ = orthonormalize(mixing)
    rotated = b_star @ rotation
    complement = orthogonal_complement(b_star)
    direction = counter_stream(stream_key(seed, StreamTag.PLANT, 1)).normal(d - k)
    u = complement @ (direction / np.linalg.norm(direction))
    basis = rotated.copy()
    basis[:, 0] = math.sqrt(1.0 - delta0**2) * rotated[:, 0] + delta0 * u
    return basis


def gen_init(
    ground_truth: GroundTruth,
    alpha: float,
    delta0_target: float | None = None,
    seed: int = 0,
) -> ModelState:
    """Initial global state ``(B_0, w_0 = 0)`` with ``alpha B_0^T B_0 = I``.

    Parameters
    ----------
    ground_truth:
        The planted instance.
    alpha:
        Step size; ``B_0`` is an orthonormal basis scaled by ``1/sqrt(alpha)``.
    delta0_target:
        When given, the basis is planted at exactly this principal angle
        distance to ``B_*``; otherwise it is a random Gaussian basis.
    seed:
        Master seed of the init streams.

    Raises
    ------
    TargetInfeasibleError
        If *delta0_target* is not in ``(0, 1)``.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    d, k = ground_truth.b_star.shape
    if k >= d:
        raise DimensionError(f"need k < d, got d={d}, k={k}")
    if delta0_target is None:
        gaussian = counter_stream(stream_key(seed, StreamTag.INIT)).normal((d, k))
        basis, _ = orthonormalize(gaussian)
    else:
        if not 0.0 < delta0_target < 1.0:
            raise TargetInfeasibleError(f"delta0_target must be in (0, 1), got {delta0_target}")
        basis = _planted_basis(ground_truth.b_star, delta0_target, seed)
    return ModelState(B=basis / math.sqrt(alpha), w=np.zeros(k))


def sample_batch(ground_truth: GroundTruth, client_index: int, b: int, key: StreamKey) -> Batch:
    """Draw ``b`` Gaussian samples for one client with labels
    ``y = X B_* w_{*,i} + noise``."""
    if b < 1:
        raise ValueError("batch size must be at least 1")
    if not 0 <= client_index < ground_truth.M:
        raise IndexError(f"client {client_index} out of range for M={ground_truth.M}")
    stream = counter_stream(key)
    X = stream.normal((b, ground_truth.d))
    noise = stream.normal(b)
    y = X @ ground_truth.target(client_index)
    if ground_truth.noise_sigma > 0.0:
        y = y + ground_truth.noise_sigma * noise
    return Batch(X=X, y=y)
