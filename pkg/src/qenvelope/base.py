"""Common regularizer interface used by the solvers."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np


class Regularizer(ABC):
    """A penalty with a value and a weighted proximal map.

    Implementations minimize ``value(x) + rho * ||x - z||^2`` in :meth:`prox`.
    All implementations are pure functions of their inputs and safe to call
    concurrently.
    """

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """Evaluate the penalty at ``x``."""

    @abstractmethod
    def prox(self, z: np.ndarray, rho: float = 1.0, tol: float = 1e-9) -> np.ndarray:
        """Return a global minimizer of ``value(x) + rho * ||x - z||^2``."""
