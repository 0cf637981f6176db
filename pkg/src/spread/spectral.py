"""Perron pair of nonnegative matrices and the irreducibility guard."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, SpectralStructureError

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class NonnegMatrix:
    """Square nonnegative matrix with labeled rows/columns.

    Entries are kept exact (int or Fraction); ``to_numpy`` gives floats.
    """

    labels: tuple[str, ...]
    entries: tuple[tuple, ...]

    def __post_init__(self):
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise ValueError("matrix labels must be unique")
        if len(self.entries) != n or any(len(r) != n for r in self.entries):
            raise ValueError(f"matrix must be {n}x{n}")
        if any(x < 0 for r in self.entries for x in r):
            raise ValueError("matrix entries must be nonnegative")

    @classmethod
    def from_rows(cls, labels: Sequence[str], rows) -> "NonnegMatrix":
        return cls(tuple(labels), tuple(tuple(_exact(x) for x in r) for r in rows))

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[self.labels.index(i)][self.labels.index(j)]

    def row(self, label: str) -> tuple:
        return self.entries[self.labels.index(label)]

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.entries], dtype=float)

    def scaled(self, c) -> "NonnegMatrix":
        return NonnegMatrix(self.labels, tuple(tuple(x * c for x in r) for r in self.entries))


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, np.integer):
        return int(x)
    return float(x)


@dataclass(frozen=True)
class PerronPair:
    rho: float
    w: np.ndarray
    residual: float
    iterations: int
    labels: tuple[str, ...] = ()

    def component(self, label: str) -> float:
        return float(self.w[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {lab: float(x) for lab, x in zip(self.labels, self.w)}


@dataclass(frozen=True)
class IrreducibilityReport:
    irreducible: bool
    components: tuple[tuple[int, ...], ...]

    def __bool__(self):
        return self.irreducible


def _as_array(M) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(M, NonnegMatrix):
        return M.to_numpy(), M.labels
    A = np.array([[float(x) for x in r] for r in M], dtype=float)
    return A, tuple(str(i) for i in range(A.shape[0]))


def strongly_connected_components(A: np.ndarray) -> list[tuple[int, ...]]:
    """Components of the digraph i -> j for A[i, j] > 0, via transitive closure."""
    n = A.shape[0]
    reach = (A > 0) | np.eye(n, dtype=bool)
    # repeated squaring of the boolean adjacency gives the reachability closure
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    mutual = reach & reach.T
    seen = set()
    comps = []
    for i in range(n):
        if i in seen:
            continue
        comp = tuple(int(j) for j in np.flatnonzero(mutual[i]))
        seen.update(comp)
        comps.append(comp)
    return comps


def is_irreducible(M) -> IrreducibilityReport:
    A, _ = _as_array(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if (A < 0).any():
        raise ValueError("matrix must be nonnegative")
    comps = strongly_connected_components(A)
    return IrreducibilityReport(len(comps) == 1, tuple(comps))


def perron(M, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> PerronPair:
    """Maximal eigenvalue and normalized left eigenvector of an irreducible matrix.

    Power iteration on the transpose of ``M + I``: the shift keeps the same
    eigenvectors and makes the Perron root strictly dominant even when ``M``
    is periodic.  Starts from the uniform vector; stops once
    ``max|wM - rho w| <= tol``.
    """
    A, labels = _as_array(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError("matrix must be square and nonempty")
    if (A < 0).any():
        raise ValueError("matrix must be nonnegative")
    report = is_irreducible(A)
    if not report:
        raise SpectralStructureError(
            f"matrix is reducible; strongly connected components {list(report.components)}",
            report.components,
        )
    n = A.shape[0]
    shifted = A + np.eye(n)
    w = np.full(n, 1.0 / n)
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = w @ shifted
        y /= y.sum()
        wM = y @ A
        rho = float(wM.sum())
        residual = float(np.max(np.abs(wM - rho * y)))
        w = y
        if residual <= tol:
            return PerronPair(rho, w, residual, it, labels)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )
