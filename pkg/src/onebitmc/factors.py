"""Factor pairs ``(U, V)`` standing for the matrix ``U @ V.T``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class FactoredPoint:
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=float, ndmin=2)
        V = np.array(self.V, dtype=float, ndmin=2)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
            raise DomainError(f"factor shapes {U.shape} and {V.shape} do not agree")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    def matrix(self) -> np.ndarray:
        return self.U @ self.V.T

    def scaled(self, c: float) -> "FactoredPoint":
        return FactoredPoint(c * self.U, c * self.V)

    def inject(self) -> "FactoredPoint":
        """Append a zero column to both factors; the product is unchanged."""
        zu = np.zeros((self.U.shape[0], 1))
        zv = np.zeros((self.V.shape[0], 1))
        return FactoredPoint(np.hstack([self.U, zu]), np.hstack([self.V, zv]))

    def copy(self) -> "FactoredPoint":
        return FactoredPoint(self.U.copy(), self.V.copy())
