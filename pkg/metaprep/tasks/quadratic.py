from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from metaprep.autodiff import Tensor, functional as F
from metaprep.errors import ConfigError, InstabilityError
from metaprep.tasks.stream import SeedStream


@dataclass(frozen=True, eq=False)
class QuadraticTask:
    """L(theta) = 1/2 (theta - c)^T A (theta - c) with diagonal A > 0"""

    curvature: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        curvature = np.asarray(self.curvature, dtype=np.float64).reshape(-1)
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if curvature.shape != center.shape:
            raise ConfigError('center', "curvature and center differ in "
                              "length")
        if np.any(curvature <= 0):
            raise ConfigError('curvature', "entries must be positive")
        object.__setattr__(self, 'curvature', curvature)
        object.__setattr__(self, 'center', center)

    @property
    def dim(self) -> int:
        return self.curvature.size

    def loss(self, theta: Tensor) -> Tensor:
        offset = F.sub(theta, Tensor(self.center))
        weighted = F.mul(F.mul(offset, offset), Tensor(self.curvature))
        return F.mul(Tensor(0.5), F.sum(weighted))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.curvature * (np.asarray(theta) - self.center)


def random_quadratic_task(stream: SeedStream, dim: int, low: float = 0.5,
                          high: float = 2.0) -> QuadraticTask:
    return QuadraticTask(stream.generator.uniform(low, high, dim),
                         stream.normal(size=dim))


def quadratic_meta_gradient_oracle(task: QuadraticTask, theta0: np.ndarray,
                                   alpha: float, k: int) -> np.ndarray:
    """closed-form gradient of L(theta_k(theta0)) for k SGD steps

    With a constant Hessian A, k steps contract the offset to
    theta_k - c = (I - alpha A)^k (theta0 - c), and the chain rule gives
    (I - alpha A)^k A (theta_k - c).

    Raises:
        InstabilityError: alpha * max(A) >= 2

    Returns:
        np.ndarray: the meta-gradient
    """
    if alpha * np.max(task.curvature) >= 2.0:
        raise InstabilityError(
            f"alpha={alpha} diverges for curvature up to "
            f"{np.max(task.curvature)}")
    contraction = (1.0 - alpha * task.curvature) ** k
    offset_k = contraction * (np.asarray(theta0, dtype=np.float64) -
                              task.center)
    return contraction * task.curvature * offset_k
