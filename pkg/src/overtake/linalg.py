"""Batched dense LU factorization for stacks of small matrices.

``numpy.linalg.solve`` refactors on every call and scipy's ``lu_factor`` is
not batched; the fundamental matrix needs one factorization per grid node,
reused for every horizon, so the factors are kept here.
"""

from __future__ import annotations

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class BatchedLU:
    """Partial-pivoting LU of a stack ``A`` with shape ``(N, n, n)``.

    ``P A = L U`` per batch entry, with ``L`` unit lower triangular stored
    below the diagonal of :attr:`lu` and ``U`` on and above it.
    """

    def __init__(self, A):
        A = np.array(A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("expected a stack of square matrices")
        N, n, _ = A.shape
        perm = np.tile(np.arange(n), (N, 1))
        rows = np.arange(N)
        for k in range(n):
            p = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
            swap = p != k
            if np.any(swap):
                r = rows[swap]
                A[r, k], A[r, p[swap]] = A[r, p[swap]].copy(), A[r, k].copy()
                perm[r, k], perm[r, p[swap]] = perm[r, p[swap]].copy(), perm[r, k].copy()
            piv = A[:, k, k]
            if np.any(piv == 0.0):
                raise SingularMatrixError(f"exactly singular matrix at batch index {int(np.argmax(piv == 0.0))}")
            if k + 1 < n:
                A[:, k + 1 :, k] /= piv[:, None]
                A[:, k + 1 :, k + 1 :] -= A[:, k + 1 :, k, None] * A[:, k, None, k + 1 :]
        self.lu = A
        self.perm = perm
        self.n = n
        self.lu.setflags(write=False)
        self.perm.setflags(write=False)

    def __len__(self):
        return self.lu.shape[0]

    def solve(self, b, index=slice(None)) -> np.ndarray:
        """Solve ``A[index] x = b`` where ``b`` has shape ``(k, n)`` or ``(k, n, r)``."""
        lu = self.lu[index]
        perm = self.perm[index]
        b = np.asarray(b, dtype=float)
        vec = b.ndim == 2
        if vec:
            b = b[..., None]
        x = np.take_along_axis(b, perm[..., None], axis=1).copy()
        n = self.n
        for i in range(1, n):
            x[:, i] -= np.einsum("kj,kjr->kr", lu[:, i, :i], x[:, :i])
        for i in range(n - 1, -1, -1):
            if i + 1 < n:
                x[:, i] -= np.einsum("kj,kjr->kr", lu[:, i, i + 1 :], x[:, i + 1 :])
            x[:, i] /= lu[:, i, i, None]
        return x[..., 0] if vec else x
