"""Dense symmetric linear algebra and scatter-matrix partitioning.

Conventions used throughout the package:

* data matrices are variables-by-observations (rows are variables),
* scatter means ``X @ X.T`` without division by the number of observations,
* Cholesky factors are lower-triangular.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import (
    DimensionMismatch,
    EmptyQuery,
    NotPositiveDefinite,
    QueryIsEverything,
    UnknownVariable,
)

# Relative pivot floor: a Cholesky pivot at or below this fraction of the
# largest diagonal entry is treated as numerically indefinite.
PIVOT_RTOL = 1e-12


def _chol_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with a pivot-indexed failure report."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(
            f"matrix is not positive definite (pivot {info - 1} failed)",
            pivot_index=info - 1,
        )
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of dpotrf")
    floor = PIVOT_RTOL * max(float(np.max(np.diag(a))), 0.0)
    pivots = np.diag(c) ** 2
    small = np.flatnonzero(pivots <= floor)
    if small.size:
        j = int(small[0])
        raise NotPositiveDefinite(
            f"Cholesky pivot {j} is {pivots[j]:.3e}, at or below the "
            f"{PIVOT_RTOL:g} * max-diagonal floor {floor:.3e}",
            pivot_index=j,
        )
    return c


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T equal to the source matrix."""

    lower: np.ndarray
    dim: int

    def logdet(self) -> float:
        """Log-determinant of the factored matrix."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


class SpdMatrix:
    """A symmetric positive definite matrix, validated on construction.

    The input is symmetrized as ``(a + a.T) / 2`` before factorization, so
    callers may pass matrices with roundoff-level asymmetry.  Construction
    fails with :class:`NotPositiveDefinite` if any Cholesky pivot is at or
    below ``1e-12`` times the largest diagonal entry.
    """

    __slots__ = ("values", "chol_lower")

    def __init__(self, values: np.ndarray):
        a = np.asarray(values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NotPositiveDefinite("matrix has non-finite entries")
        a = (a + a.T) / 2.0
        self.values = a
        self.chol_lower = _chol_lower(a)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def factor(self) -> CholeskyFactor:
        return CholeskyFactor(lower=self.chol_lower, dim=self.dim)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return chol_solve(self.factor(), b)

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpdMatrix(dim={self.dim})"


def cholesky(m: SpdMatrix | np.ndarray) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If factorization fails; the exception carries the index of the
        first failing pivot.
    """
    if isinstance(m, SpdMatrix):
        return m.factor()
    a = np.asarray(m, dtype=float)
    a = (a + a.T) / 2.0
    lower = _chol_lower(a)
    return CholeskyFactor(lower=lower, dim=a.shape[0])


def chol_solve(factor: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` given the Cholesky factor of A.

    ``b`` may be a vector or a matrix of stacked right-hand sides.
    """
    b = np.asarray(b, dtype=float)
    n = factor.dim
    if b.shape[0] != n:
        raise DimensionMismatch(
            f"right-hand side has leading dimension {b.shape[0]}, expected {n}"
        )
    y = solve_triangular(factor.lower, b, lower=True)
    return solve_triangular(factor.lower, y, lower=True, trans="T")


def chol_inverse(factor: CholeskyFactor) -> np.ndarray:
    """Full inverse from a Cholesky factor (symmetrized)."""
    inv = chol_solve(factor, np.eye(factor.dim))
    return (inv + inv.T) / 2.0


@dataclass
class DataMatrix:
    """Variables-by-observations data with unique variable names."""

    values: np.ndarray
    names: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("data must be a 2-d array")
        if len(self.names) != self.values.shape[0]:
            raise DimensionMismatch(
                f"{len(self.names)} names for {self.values.shape[0]} variable rows"
            )
        if len(set(self.names)) != len(self.names):
            raise UnknownVariable("variable names must be unique")

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.values.shape[1]


@dataclass
class PartitionedCov:
    """Scatter matrix split into query/other blocks.

    ``s11`` is query-by-query, ``s12`` query-by-other, ``s22`` other-by-other.
    ``n`` is the effective number of observations (reduced by one when the
    scatter was computed from centered data).  The reassembled matrix must be
    symmetric positive semi-definite; blocks may be singular when n is small.
    """

    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray
    n: int
    query_names: list[str] = field(default_factory=list)
    other_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.s11 = np.asarray(self.s11, dtype=float)
        self.s12 = np.asarray(self.s12, dtype=float)
        self.s22 = np.asarray(self.s22, dtype=float)
        p, q = self.s12.shape
        if self.s11.shape != (p, p) or self.s22.shape != (q, q):
            raise DimensionMismatch(
                f"inconsistent block shapes {self.s11.shape}, "
                f"{self.s12.shape}, {self.s22.shape}"
            )
        if self.n < 0:
            raise DimensionMismatch("effective observation count must be >= 0")
        full = self.assemble()
        if not np.all(np.isfinite(full)):
            raise DimensionMismatch("scatter blocks contain non-finite entries")
        scale = max(float(np.max(np.abs(full))), 1.0)
        w = np.linalg.eigvalsh(full)
        if w[0] < -1e-8 * scale:
            raise NotPositiveDefinite(
                f"reassembled scatter has eigenvalue {w[0]:.3e} < 0"
            )

    @property
    def p(self) -> int:
        return self.s12.shape[0]

    @property
    def q(self) -> int:
        return self.s12.shape[1]

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.s11, self.s12])
        bottom = np.hstack([self.s12.T, self.s22])
        return np.vstack([top, bottom])


def partition_scatter(
    x: DataMatrix, query: list[str], center: bool = True
) -> PartitionedCov:
    """Scatter of the data with the query variables ordered first.

    Parameters
    ----------
    x : DataMatrix
        Variables-by-observations data.
    query : list of str
        Names of the query variables, in the order their block should use.
    center : bool
        Subtract each variable's mean before forming the scatter.  When set,
        the effective observation count drops by one.

    Returns
    -------
    PartitionedCov
        Blocks of ``X @ X.T`` after reordering (and optional centering).
    """
    if len(query) == 0:
        raise EmptyQuery("query set is empty")
    if len(set(query)) != len(query):
        raise UnknownVariable("query names must be unique")
    index = {name: i for i, name in enumerate(x.names)}
    missing = [name for name in query if name not in index]
    if missing:
        raise UnknownVariable(f"unknown query variables: {missing}")
    if len(query) == x.n_vars:
        raise QueryIsEverything(
            "query covers every variable; nothing is left to blanket against"
        )
    query_idx = [index[name] for name in query]
    other_idx = [i for i in range(x.n_vars) if i not in set(query_idx)]
    order = query_idx + other_idx
    vals = x.values[order, :]
    n = x.n_obs
    if center:
        vals = vals - vals.mean(axis=1, keepdims=True)
        n = max(n - 1, 0)
    s = vals @ vals.T
    s = (s + s.T) / 2.0
    p = len(query_idx)
    return PartitionedCov(
        s11=s[:p, :p],
        s12=s[:p, p:],
        s22=s[p:, p:],
        n=n,
        query_names=[x.names[i] for i in query_idx],
        other_names=[x.names[i] for i in other_idx],
    )
