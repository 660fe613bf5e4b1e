"""Small symmetric matrices with cached determinant and definiteness."""
from __future__ import annotations

from functools import cached_property

import numpy as np

__all__ = ["SymMatrix"]


class SymMatrix:
    """An immutable M x M symmetric matrix.

    Only the upper triangle of the input is read, so the stored matrix is
    symmetric exactly.
    """

    __slots__ = ("_a", "__dict__")

    def __init__(self, a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        up = np.triu(a)
        sym = up + np.triu(a, 1).T
        sym.setflags(write=False)
        self._a = sym

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __getitem__(self, idx):
        return self._a[idx]

    @cached_property
    def det(self) -> float:
        if self.dim == 1:
            return float(self._a[0, 0])
        if self.dim == 2:
            a = self._a
            return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
        return float(np.linalg.det(self._a))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._a)

    @cached_property
    def is_positive_definite(self) -> bool:
        try:
            np.linalg.cholesky(self._a)
        except np.linalg.LinAlgError:
            return False
        return bool(np.all(np.isfinite(self._a)))

    def is_positive_semidefinite(self, tol: float = 1e-12) -> bool:
        ev = self.eigenvalues
        return bool(ev.min() >= -tol * max(1.0, abs(ev).max()))

    def inverse(self) -> "SymMatrix":
        return SymMatrix(np.linalg.inv(self._a))

    def scaled(self, c: float) -> "SymMatrix":
        return SymMatrix(c * self._a)

    def max_rel_deviation(self, other) -> float:
        """``max|A - B| / max|B|`` (infinity norms over entries)."""
        b = np.asarray(other, dtype=float)
        return float(np.max(np.abs(self._a - b)) / np.max(np.abs(b)))

    def tolist(self) -> list:
        return self._a.tolist()

    def __repr__(self) -> str:
        return f"SymMatrix({self._a.tolist()!r})"
