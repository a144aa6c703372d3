"""Small sparse/dense linear-algebra kernel.

Sparse storage is backed by :mod:`scipy.sparse` (row-compressed, with a
cached row-compressed transpose so that ``Q @ x`` and ``Q.T @ x`` both run
as sequential row sweeps). The dense least-squares solver is a Householder
QR with column pivoting followed by a complete orthogonal decomposition,
which yields the minimum-norm solution for rank-deficient systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import CgStagnation, DimensionMismatch, NotPositiveDefinite


class SparseMatrix:
    """Immutable sparse matrix with row-major layout and a lazy transpose."""

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=float, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr
        self._csr_t = None

    @classmethod
    def from_triplets(cls, rows, cols, values, shape):
        coo = sp.coo_matrix((values, (rows, cols)), shape=shape)
        if coo.nnz:
            keys = np.asarray(rows, dtype=np.int64) * shape[1] + np.asarray(cols, dtype=np.int64)
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate (row, col) entries")
        return cls(coo)

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def csr_t(self) -> sp.csr_matrix:
        if self._csr_t is None:
            self._csr_t = self._csr.T.tocsr()
            self._csr_t.sort_indices()
        return self._csr_t

    @property
    def T(self) -> "SparseMatrix":
        out = SparseMatrix.__new__(SparseMatrix)
        out._csr = self.csr_t
        out._csr_t = self._csr
        return out

    def matvec(self, x):
        return spmv(self, x)

    def rmatvec(self, x):
        return spmv(self, x, transpose=True)

    def __matmul__(self, x):
        if isinstance(x, SparseMatrix):
            return SparseMatrix(self._csr @ x._csr)
        return spmv(self, x)

    def column(self, j: int) -> np.ndarray:
        return self.csr_t[j].toarray().ravel()

    def columns(self, idx) -> np.ndarray:
        """Dense ``rows x len(idx)`` block of the selected columns."""
        return self.csr_t[np.asarray(idx, dtype=np.int64)].toarray().T

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def spmv(M: SparseMatrix, x, transpose: bool = False) -> np.ndarray:
    """Sparse matrix-vector product ``M @ x`` (or ``M.T @ x``)."""
    x = np.asarray(x, dtype=float)
    A = M.csr_t if transpose else M.csr
    if x.shape[0] != A.shape[1]:
        raise DimensionMismatch(
            f"operand has length {x.shape[0]}, expected {A.shape[1]}")
    return A @ x


@dataclass(frozen=True)
class LinearOperator:
    """Square operator given by its action ``x -> A x``."""

    n: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __matmul__(self, x):
        return self.apply(x)

    @classmethod
    def normal_plus_shift(cls, Q: SparseMatrix, rho: float, assemble: bool = True) -> "LinearOperator":
        """The operator ``Q Q^T + rho I``.

        With ``assemble`` the sparse product is formed once (for incidence
        matrices it has ``n + 2m`` nonzeros at most), otherwise every
        application costs one product with ``Q^T`` and one with ``Q``.
        """
        n = Q.shape[0]
        if assemble:
            A = (Q.csr @ Q.csr_t + rho * sp.identity(n, format="csr")).tocsr()
            A.sum_duplicates()
            return cls(n, A.dot)
        csr, csr_t = Q.csr, Q.csr_t
        return cls(n, lambda x: csr @ (csr_t @ x) + rho * x)


def _as_operator(A) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(A, LinearOperator):
        return A.apply
    if callable(A) and not hasattr(A, "shape"):
        return A
    return lambda x: A @ x


class CgResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def conjugate_gradient(A, b, x0=None, tol: float = 1e-10, max_iter: int | None = None,
                       check: bool = True) -> CgResult:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    ``residual`` is the true relative residual ``||A x - b|| / ||b||``. The
    recursively updated residual drifts from the true one in finite
    precision, so on apparent convergence the true residual is recomputed
    and the iteration restarted from it if it is still above ``tol``.

    Raises
    ------
    CgStagnation
        If ``check`` is true and ``tol`` was not reached in ``max_iter``
        iterations. With ``check=False`` the result is returned with
        ``converged=False`` instead.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    op = _as_operator(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != b.shape:
        raise DimensionMismatch("x0 and b differ in shape")

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CgResult(np.zeros(n), 0, 0.0, True)
    target = tol * bnorm

    r = b - op(x)
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > target and it < max_iter:
        p = r.copy()
        rr = r @ r
        while it < max_iter:
            Ap = op(p)
            pAp = p @ Ap
            if pAp <= 0.0:
                break
            step = rr / pAp
            x += step * p
            Ap *= step
            r -= Ap
            it += 1
            rr_new = r @ r
            if np.sqrt(rr_new) <= target:
                break
            p *= rr_new / rr
            p += r
            rr = rr_new
        # restart from the true residual
        r = b - op(x)
        rnorm_new = np.linalg.norm(r)
        if rnorm_new > target and rnorm_new >= rnorm and pAp > 0.0 and it < max_iter:
            # no progress since the last restart: further sweeps cannot help
            rnorm = rnorm_new
            break
        rnorm = rnorm_new
        if pAp <= 0.0:
            break

    result = CgResult(x, it, rnorm / bnorm, rnorm <= target)
    if check and not result.converged:
        raise CgStagnation(
            f"CG stopped at relative residual {result.residual:.3e} > {tol:.1e} "
            f"after {it} iterations", result)
    return result


def _householder(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit Householder vector ``v`` with ``(I - 2vv^T) x = -sign(x0)||x|| e1``."""
    normx = np.linalg.norm(x)
    v = x.copy()
    if normx == 0.0:
        return v, 0.0
    v[0] += np.copysign(normx, x[0])
    v /= np.linalg.norm(v)
    return v, -np.copysign(normx, x[0])


def householder_qr(A, pivoting: bool = False):
    """Householder QR factorisation ``A[:, perm] = Q R`` (thin ``Q``).

    Returns ``(Q, R, perm)``; ``perm`` is the identity when ``pivoting``
    is false. With pivoting, columns are chosen by largest remaining norm,
    so ``|R[k, k]|`` is non-increasing and reveals numerical rank.
    """
    R = np.array(A, dtype=float, ndmin=2)
    m, n = R.shape
    k = min(m, n)
    perm = np.arange(n)
    vs = []
    for i in range(k):
        if pivoting:
            norms = np.einsum("ij,ij->j", R[i:, i:], R[i:, i:])
            j = i + int(np.argmax(norms))
            if j != i:
                R[:, [i, j]] = R[:, [j, i]]
                perm[[i, j]] = perm[[j, i]]
        v, _ = _householder(R[i:, i])
        vs.append(v)
        R[i:, i:] -= 2.0 * np.outer(v, v @ R[i:, i:])
        R[i + 1:, i] = 0.0
    Qm = np.eye(m, k)
    for i in range(k - 1, -1, -1):
        v = vs[i]
        Qm[i:, :] -= 2.0 * np.outer(v, v @ Qm[i:, :])
    return Qm, R[:k, :], perm


def least_squares_solve(A, b, rcond: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A x = b``.

    Rank-deficient ``A`` is handled by a complete orthogonal decomposition:
    pivoted QR exposes the numerical rank ``r``, then a second QR of the
    leading ``r`` rows of ``R`` (transposed) gives the minimum-norm member
    of the solution set. ``b`` may be a vector or a matrix of right-hand
    sides.
    """
    A = np.array(A, dtype=float, ndmin=2)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape[0] != m:
        raise DimensionMismatch(f"A has {m} rows but b has {b.shape[0]}")
    vector = b.ndim == 1
    B = b.reshape(m, -1)
    if n == 0:
        return np.zeros((0,) if vector else (0, B.shape[1]))
    if m == 0:
        return np.zeros((n,) if vector else (n, B.shape[1]))

    Qm, R, perm = householder_qr(A, pivoting=True)
    if rcond is None:
        rcond = max(m, n) * np.finfo(float).eps
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size else 0.0
    rank = int(np.sum(diag > rcond * scale)) if scale > 0 else 0

    c = Qm[:, :rank].T @ B
    X = np.zeros((n, B.shape[1]))
    if rank == n:
        X[perm] = scipy.linalg.solve_triangular(R[:n, :n], c)
    elif rank > 0:
        # R1 = [R11 R12] (rank x n); R1^T = V T gives R1 = T^T V^T
        V, T, _ = householder_qr(R[:rank, :].T)
        z = scipy.linalg.solve_triangular(T, c, trans="T")
        X[perm] = V @ z
    return X.ravel() if vector else X


def pseudo_inverse_svd(A, rcond: float | None = None) -> np.ndarray:
    """SVD-based Moore-Penrose pseudo-inverse, used as a test oracle."""
    return np.linalg.pinv(np.asarray(A, dtype=float), rcond=1e-12 if rcond is None else rcond)


@dataclass(frozen=True)
class SpdFactor:
    """Cached Cholesky factor of a symmetric positive definite matrix."""

    cho: tuple
    n: int

    def solve(self, b):
        return spd_solve(self, b)


def spd_factorize(A) -> SpdFactor:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(A).max(initial=0.0))):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        cho = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return SpdFactor(cho, A.shape[0])


def spd_solve(handle: SpdFactor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != handle.n:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, expected {handle.n}")
    return scipy.linalg.cho_solve(handle.cho, b)
