"""Dense and sparse linear-algebra substrate.

Thin, contract-checked wrappers around the LAPACK and SuperLU routines the
rest of the package builds on: LU and Cholesky factorizations with explicit
singularity detection, norms, a power-iteration spectral-norm estimate, and
a dense symmetric eigensolver. Dense matrices are numpy arrays, sparse ones
are scipy.sparse arrays in CSR/CSC form; vectors are 1-d numpy arrays.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NotSPD, SingularMatrix

__all__ = [
    "PIVOT_RTOL",
    "LuFactor",
    "CholeskyFactor",
    "is_sparse",
    "lu_factor",
    "solve",
    "cholesky",
    "matvec",
    "norm2",
    "spectral_norm_estimate",
    "dense_sym_eig",
]

# A pivot below PIVOT_RTOL * max|A| is treated as an exact zero: the factor
# would amplify roundoff past any useful accuracy, so we refuse it outright.
PIVOT_RTOL = 1e-14


def is_sparse(A) -> bool:
    return sp.issparse(A)


def _require_square(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")


def _require_finite(A):
    data = A.data if is_sparse(A) else A
    if data.size and not np.all(np.isfinite(data)):
        raise ValueError("matrix contains NaN or Inf entries")


def _max_abs(A) -> float:
    data = A.data if is_sparse(A) else A
    return float(np.max(np.abs(data))) if data.size else 0.0


@dataclass
class LuFactor:
    """LU factorization with partial pivoting, dense or sparse.

    The dense variant stores the packed LAPACK factor, the sparse variant a
    SuperLU object. ``lower``/``upper``/``perm_rows``/``perm_cols`` expose
    the factors so the permuted product can be checked directly:
    ``A[perm_rows][:, perm_cols] == lower @ upper`` up to roundoff.
    """

    shape: tuple[int, int]
    kind: str  # "dense" | "sparse"
    _lu: Any = field(default=None, repr=False)
    _piv: Any = field(default=None, repr=False)
    _splu: Any = field(default=None, repr=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.shape[0]:
            raise DimensionMismatch(
                f"factor of shape {self.shape} cannot solve rhs of shape {b.shape}"
            )
        if self.kind == "dense":
            rhs = b
            if np.iscomplexobj(rhs) and not np.iscomplexobj(self._lu):
                x = sla.lu_solve((self._lu, self._piv), rhs.real)
                y = sla.lu_solve((self._lu, self._piv), rhs.imag)
                return x + 1j * y
            return sla.lu_solve((self._lu, self._piv), rhs)
        if np.iscomplexobj(b) and self._splu.U.dtype.kind != "c":
            return self._splu.solve(np.ascontiguousarray(b.real)) + 1j * self._splu.solve(
                np.ascontiguousarray(b.imag)
            )
        return self._splu.solve(b)

    @property
    def perm_rows(self) -> np.ndarray:
        if self.kind == "dense":
            perm = np.arange(self.shape[0])
            for i, p in enumerate(self._piv):
                perm[i], perm[p] = perm[p], perm[i]
            return perm
        return np.asarray(self._splu.perm_r)

    @property
    def perm_cols(self) -> np.ndarray:
        if self.kind == "dense":
            return np.arange(self.shape[1])
        return np.asarray(self._splu.perm_c)

    @property
    def lower(self):
        if self.kind == "dense":
            return np.tril(self._lu, -1) + np.eye(self.shape[0], dtype=self._lu.dtype)
        return self._splu.L

    @property
    def upper(self):
        if self.kind == "dense":
            return np.triu(self._lu)
        return self._splu.U


def lu_factor(A) -> LuFactor:
    """Factor a square matrix as P*A*Q = L*U with partial pivoting.

    Dense inputs go through LAPACK getrf (Q = identity), sparse inputs
    through SuperLU with its default column ordering. Raises
    ``SingularMatrix`` when the smallest pivot falls below
    ``PIVOT_RTOL * max|A|``.
    """
    _require_square(A)
    _require_finite(A)
    scale = _max_abs(A)
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    if is_sparse(A):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fac = spla.splu(sp.csc_matrix(A))
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SingularMatrix(str(exc)) from exc
        pivots = np.abs(fac.U.diagonal())
        if pivots.size == 0 or pivots.min() < PIVOT_RTOL * scale:
            raise SingularMatrix("sparse LU produced a negligible pivot")
        return LuFactor(shape=A.shape, kind="sparse", _splu=fac)
    A = np.asarray(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = sla.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_RTOL * scale:
        raise SingularMatrix("dense LU produced a negligible pivot")
    return LuFactor(shape=A.shape, kind="dense", _lu=lu, _piv=piv)


def solve(factor: LuFactor, b: np.ndarray) -> np.ndarray:
    """Solve A x = b given an ``LuFactor`` of A."""
    return factor.solve(b)


@dataclass
class CholeskyFactor:
    """Lower-triangular Cholesky factor of a dense SPD matrix."""

    lower: np.ndarray

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.lower.shape[0]:
            raise DimensionMismatch(
                f"factor of order {self.lower.shape[0]} cannot solve rhs of shape {b.shape}"
            )
        y = sla.solve_triangular(self.lower, b, lower=True)
        return sla.solve_triangular(self.lower.T, y, lower=False)


SYMMETRY_RTOL = 1e-12


def cholesky(M) -> CholeskyFactor:
    """Cholesky-factor a symmetric positive definite matrix (densified).

    The input must be symmetric to within ``SYMMETRY_RTOL`` relative
    asymmetry; positive definiteness is established by the factorization
    itself. Failure of either raises ``NotSPD``.
    """
    _require_square(M)
    _require_finite(M)
    Md = M.toarray() if is_sparse(M) else np.asarray(M, dtype=float)
    scale = np.max(np.abs(Md)) if Md.size else 0.0
    if scale == 0.0 or np.max(np.abs(Md - Md.T)) > SYMMETRY_RTOL * scale:
        raise NotSPD("matrix is not symmetric to working accuracy")
    try:
        L = sla.cholesky(Md, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotSPD(f"Cholesky failed: {exc}") from exc
    return CholeskyFactor(lower=L)


def matvec(A, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"cannot multiply shape {A.shape} by shape {x.shape}")
    return A @ x


def norm2(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x)))


def spectral_norm_estimate(A, iters: int = 50, seed: int = 0) -> float:
    """Estimate the spectral norm of A by power iteration on A*A.

    Returns a lower bound on ||A||_2 that improves monotonically with
    ``iters`` in exact arithmetic (it is the square root of a Rayleigh
    quotient of the positive semidefinite matrix A*A).
    """
    if A.shape[0] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    if np.iscomplexobj(A.data if is_sparse(A) else A):
        v = v + 1j * rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    AH = A.conj().T
    for _ in range(max(1, iters)):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = nw
        v = AH @ w
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return float(est)
        v /= nv
    return float(est)


def dense_sym_eig(S) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues (ascending) and orthonormal eigenvectors of a dense
    symmetric matrix. Raises ``NotSymmetric`` on asymmetric input."""
    from .errors import NotSymmetric

    _require_square(S)
    Sd = S.toarray() if is_sparse(S) else np.asarray(S)
    _require_finite(Sd)
    scale = np.max(np.abs(Sd)) if Sd.size else 0.0
    if scale > 0.0 and np.max(np.abs(Sd - Sd.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric to working accuracy")
    w, V = np.linalg.eigh(Sd)
    return w, V
