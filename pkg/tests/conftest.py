"""Shared test fixtures."""

import math
from pathlib import Path

import numpy as np
import pytest

from fedsubspace import GroundTruth, SimConfig, gen_ground_truth


def jacobi_singular_values(A, tol=1e-15, max_sweeps=100):
    """Singular values of *A* (descending) by one-sided Jacobi rotations.

    Independent of the production code path; used only as a test oracle.
    """
    U = np.array(A, dtype=np.float64, copy=True)
    if U.shape[0] < U.shape[1]:
        U = U.T.copy()
    n = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(U[:, p] @ U[:, p])
                beta = float(U[:, q] @ U[:, q])
                gamma = float(U[:, p] @ U[:, q])
                if abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                col_p = U[:, p].copy()
                U[:, p] = c * col_p - s * U[:, q]
                U[:, q] = s * col_p + c * U[:, q]
        if not rotated:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


@pytest.fixture
def oracle():
    return jacobi_singular_values


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_truth() -> GroundTruth:
    return gen_ground_truth(20, 3, 10, noise_sigma=0.0, seed=0)


@pytest.fixture
def small_config() -> SimConfig:
    return SimConfig(d=20, k=3, M=10, tau=2, alpha=0.05, T=20, seed=0)


@pytest.fixture
def write_config(tmp_path: Path):
    """Write configuration text to a file and return its path."""

    def _write(text: str, name: str = "experiment.conf") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


# ---------------------------------------------------------------------------
# Reusable configuration text
# ---------------------------------------------------------------------------


@pytest.fixture
def tiny_train_text(tmp_path: Path) -> str:
    return "\n".join(
        [
            "# tiny training run",
            "kind = train",
            "d = 12",
            "k = 2",
            "M = 6",
            "tau = 2",
            "alpha = 0.05",
            "T = 15",
            "seed = 3",
            f"out = {tmp_path / 'out'}",
            "",
        ]
    )
