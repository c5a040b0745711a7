"""Sparse SPD factorization with an optional CHOLMOD backend."""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

logger = logging.getLogger(__name__)

try:  # pragma: no cover - depends on the environment
    from sksparse.cholmod import cholesky as _cholmod
except ImportError:  # pragma: no cover
    _cholmod = None


class SolverError(ArithmeticError):
    """Linear solve failed; ``residual`` carries the relative residual if known."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SPDSolver:
    """Factorization of a sparse symmetric positive definite matrix.

    ``method`` is ``"direct"`` (CHOLMOD when importable, SuperLU otherwise)
    or ``"cg"`` (Jacobi-preconditioned conjugate gradients).
    """

    def __init__(self, A, method: str = "direct", tol: float = 1e-12):
        A = sparse.csc_matrix(A)
        self.A = A
        self.method = method
        self.tol = tol
        self.n = A.shape[0]
        if self.n == 0:
            self.backend = "empty"
            self._solve = lambda b: np.zeros_like(b)
        elif method == "direct":
            if _cholmod is not None:
                self.backend = "cholmod"
                self._solve = _cholmod(A)
            else:
                self.backend = "superlu"
                try:
                    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
                except RuntimeError as exc:
                    raise SolverError(f"factorization failed: {exc}") from None
                self._solve = lu.solve
        elif method == "cg":
            self.backend = "cg"
            d = A.diagonal()
            if np.any(d <= 0):
                raise SolverError("matrix has a non-positive diagonal")
            self._precond = sparse.diags(1.0 / d)
            self._solve = self._cg
        else:
            raise ValueError(f"unknown solver method {method!r}")

    def _cg(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            return np.column_stack([self._cg(b[:, k]) for k in range(b.shape[1])])
        x, info = spla.cg(self.A, b, rtol=self.tol, atol=0.0, maxiter=10 * self.n, M=self._precond)
        if info != 0:
            raise SolverError("conjugate gradients did not converge", self.relative_residual(x, b))
        return x

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverError("solve produced non-finite values")
        return x

    def relative_residual(self, x, b) -> float:
        r = self.A @ x - b
        nb = np.linalg.norm(b)
        return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
