"""Adversarial instances on which D-GD cannot recover the representation.

D-GD only sees the ground truth through the product ``B_* wbar_*``. Given an
initialization ``B_0`` whose column space contains that product, reflecting
the rest of ``col(B_*)`` about ``col(B_0)`` yields a second orthonormal
``B_*'`` with the same product and the same distance to ``B_0``. D-GD runs
identically against both, so it ends far from at least one of them.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from numpy.typing import ArrayLike

from .engine import dgd_step
from .enums import StreamTag
from .exceptions import (
    ContainmentViolatedError,
    DegenerateMeanHeadError,
    RankError,
    TargetInfeasibleError,
)
from .linalg import orthogonal_complement, orthonormalize, principal_angle_distance
from .models import AdversarialPair, FloatArray, LowerBoundReport, ModelState
from .rng import counter_stream, stream_key

logger = logging.getLogger(__name__)

_MEAN_HEAD_TOL = 1e-12
_CONTAINMENT_TOL = 1e-8
_TRIANGLE_TOL = 1e-8


def _mean_head_direction(heads: ArrayLike, k: int) -> tuple[FloatArray, float]:
    if k < 2:
        raise RankError("the construction needs k > 1")
    w_bar = np.atleast_2d(np.asarray(heads, dtype=np.float64)).mean(axis=0)
    norm = float(np.linalg.norm(w_bar))
    if norm < _MEAN_HEAD_TOL:
        raise DegenerateMeanHeadError(f"mean head has norm {norm:.3e}")
    return w_bar / norm, norm


def make_b0_containing_product(
    b_star: FloatArray,
    heads: ArrayLike,
    delta0: float,
    seed: int,
) -> FloatArray:
    """Orthonormal ``B_0`` with ``B_* wbar_*`` as its first column direction
    and ``dist(B_0, B_*) = delta0``.

    The other columns tilt the complement of the product direction inside
    ``col(B_*)`` by ``arcsin(delta0)`` towards random directions orthogonal to
    ``col(B_*)``.

    Raises
    ------
    RankError
        If ``k == 1``.
    DegenerateMeanHeadError
        If the mean head vanishes.
    TargetInfeasibleError
        If *delta0* is not in ``(0, 1/2]``.
    """
    d, k = b_star.shape
    u_bar, _ = _mean_head_direction(heads, k)
    if not 0.0 < delta0 <= 0.5:
        raise TargetInfeasibleError(f"delta0 must be in (0, 0.5], got {delta0}")
    product_dir = b_star @ u_bar
    b_tilde = b_star @ orthogonal_complement(u_bar[:, None])

    mixing = counter_stream(stream_key(seed, StreamTag.PLANT, 2)).normal((k - 1, k - 1))
    rotation, _ = orthonormalize(mixing)
    columns = b_tilde @ rotation
    tilted = min(k - 1, d - k)
    outward = counter_stream(stream_key(seed, StreamTag.PLANT, 3)).normal((d - k, tilted))
    u_perp = orthogonal_complement(b_star) @ orthonormalize(outward)[0]
    columns[:, :tilted] = math.sqrt(1.0 - delta0**2) * columns[:, :tilted] + delta0 * u_perp
    return np.column_stack([product_dir, columns])


def construct_adversarial(
    B0: FloatArray,
    b_star: FloatArray,
    heads: ArrayLike,
) -> AdversarialPair:
    """Build ``B_*'`` from an initialization containing the product.

    Returns
    -------
    AdversarialPair
        With ``B_*' = B_* ubar ubar^T + (2 B0t B0t^T B*t - B*t) V*t^T`` where
        ``B0t`` and ``B*t = B_* V*t`` span the parts of ``col(B_0)`` and
        ``col(B_*)`` orthogonal to the product direction.

    Raises
    ------
    ContainmentViolatedError
        If ``B_* wbar_*`` is not in ``col(B0)`` within ``1e-8``.
    """
    k = b_star.shape[1]
    u_bar, _ = _mean_head_direction(heads, k)
    Q0, _ = orthonormalize(B0)
    product_dir = b_star @ u_bar
    v0 = Q0.T @ product_dir
    containment = float(np.linalg.norm(product_dir - Q0 @ v0))
    if containment > _CONTAINMENT_TOL:
        raise ContainmentViolatedError(
            f"B_* wbar_* lies {containment:.3e} away from col(B0)"
        )
    v0 /= np.linalg.norm(v0)
    b0_tilde = Q0 @ orthogonal_complement(v0[:, None])
    v_star_tilde = orthogonal_complement(u_bar[:, None])
    b_star_tilde = b_star @ v_star_tilde
    reflected = 2.0 * b0_tilde @ (b0_tilde.T @ b_star_tilde) - b_star_tilde
    b_star_prime = np.outer(product_dir, u_bar) + reflected @ v_star_tilde.T
    return AdversarialPair(
        b_star=b_star,
        b_star_prime=b_star_prime,
        b0=Q0,
        delta0=principal_angle_distance(Q0, b_star),
    )


def pair_residuals(pair: AdversarialPair, heads: ArrayLike) -> dict[str, float]:
    """How far the pair is from each of its defining invariants (0 is exact).

    ``separation`` is the shortfall of ``dist(B_*, B_*')`` below
    ``2 delta0 sqrt(1 - delta0^2)``.
    """
    k = pair.b_star.shape[1]
    identity = np.eye(k)
    w_bar = np.atleast_2d(np.asarray(heads, dtype=np.float64)).mean(axis=0)
    orthonormality = max(
        float(np.linalg.norm(pair.b_star.T @ pair.b_star - identity)),
        float(np.linalg.norm(pair.b_star_prime.T @ pair.b_star_prime - identity)),
    )
    product = float(np.linalg.norm(pair.b_star @ w_bar - pair.b_star_prime @ w_bar))
    distance = max(
        abs(principal_angle_distance(pair.b0, pair.b_star) - pair.delta0),
        abs(principal_angle_distance(pair.b0, pair.b_star_prime) - pair.delta0),
    )
    separation = principal_angle_distance(pair.b_star, pair.b_star_prime)
    bound = 2.0 * pair.delta0 * math.sqrt(1.0 - pair.delta0**2)
    return {
        "orthonormality": orthonormality,
        "product": product,
        "distance": distance,
        "separation": max(0.0, bound - separation),
    }


def paired_dgd_experiment(
    pair: AdversarialPair,
    heads: ArrayLike,
    alpha: float,
    T: int,
) -> LowerBoundReport:
    """Run D-GD from ``(B_0 / sqrt(alpha), 0)`` against both ground truths.

    D-GD only sees the product ``B_* wbar_*``. When the two products agree
    within ``1e-8`` both runs are driven by the one computed from ``B_*``,
    so their iterates are bit-identical; otherwise each run uses its own
    product and a warning is logged. ``max_trajectory_gap`` records the
    largest entrywise difference between the two iterate sequences.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    W = np.atleast_2d(np.asarray(heads, dtype=np.float64))
    w_bar = W.mean(axis=0)
    target = pair.b_star @ w_bar
    target_prime = pair.b_star_prime @ w_bar
    product_gap = float(np.linalg.norm(target - target_prime))
    if product_gap <= _CONTAINMENT_TOL:
        target_prime = target
    else:
        logger.warning("products of the pair differ by %.3e; runs will drift", product_gap)
    k = pair.b0.shape[1]
    start = ModelState(B=pair.b0 / math.sqrt(alpha), w=np.zeros(k))

    state = state_prime = start
    dist_star = np.empty(T + 1)
    dist_prime = np.empty(T + 1)
    dist_star[0] = principal_angle_distance(start.B, pair.b_star)
    dist_prime[0] = principal_angle_distance(start.B, pair.b_star_prime)
    bit_identical = True
    gap = 0.0
    for t in range(1, T + 1):
        state = dgd_step(state, target, alpha)
        state_prime = dgd_step(state_prime, target_prime, alpha)
        gap = max(
            gap,
            float(np.max(np.abs(state.B - state_prime.B))),
            float(np.max(np.abs(state.w - state_prime.w))),
        )
        bit_identical = (
            bit_identical
            and np.array_equal(state.B, state_prime.B)
            and np.array_equal(state.w, state_prime.w)
        )
        dist_star[t] = principal_angle_distance(state.B, pair.b_star)
        dist_prime[t] = principal_angle_distance(state.B, pair.b_star_prime)

    separation = principal_angle_distance(pair.b_star, pair.b_star_prime)
    delta0 = pair.delta0
    triangle_slack = min(
        dist_prime[-1] - (separation - dist_star[-1]),
        dist_star[-1] - (separation - dist_prime[-1]),
    )
    report = LowerBoundReport(
        delta0=delta0,
        T=T,
        bit_identical=bool(bit_identical),
        max_trajectory_gap=gap,
        dist_to_star=dist_star,
        dist_to_star_prime=dist_prime,
        separation=separation,
        separation_bound=2.0 * delta0 * math.sqrt(1.0 - delta0**2),
        separation_bound_sqrt=2.0 * delta0 * math.sqrt(1.0 - delta0),
        triangle_slack=float(triangle_slack),
        residuals=pair_residuals(pair, W),
    )
    logger.info(
        "delta0=%.3f separation=%.6f bounds (sqrt form %.6f, squared form %.6f) "
        "final max dist %.6f case=%s",
        delta0,
        separation,
        report.separation_bound_sqrt,
        report.separation_bound,
        report.final_max_dist,
        report.case,
    )
    if triangle_slack < -_TRIANGLE_TOL:
        logger.warning("triangle inequality violated by %.3e", -triangle_slack)
    return report
