"""Mixed finite-element discretization of the biharmonic Dirichlet/Neumann problem.

With ``v`` standing for the Laplacian of ``u``, testing ``v = Lap u``
against every hat function and integrating by parts gives

    M v + L u = -N d0                 (all vertices)
    (L v)_i = 0                       (interior vertices)

where ``d0`` is the inward normal derivative. Substituting the boundary
values ``u_B = u0`` leaves the saddle system

    [ M        L[:, I] ] [ v   ]   [ b ]
    [ L[I, :]  0       ] [ u_I ] = [ 0 ],    b = -L[:, B] u0 - N d0,

and eliminating ``v`` the SPD reduced system
``(L[I, :] M^-1 L[:, I]) u_I = L[I, :] M^-1 b``.

``d0`` lives on side slots (see :class:`ribbonpatch.mesh.SideAssignment`),
so a corner carries one normal derivative per incident side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import mesh as _mesh
from ._linalg import SolverError, SPDSolver
from .mesh import TriMesh

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class BoundaryConditions:
    """Sampled boundary data.

    ``u0`` is aligned with ``mesh.boundary_vertices``; ``d0`` with the side
    slots. Either may be 1-D (a scalar problem) or carry trailing columns
    (one per coordinate).
    """

    u0: np.ndarray
    d0: np.ndarray

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        d0 = np.asarray(self.d0, dtype=float)
        if u0.shape[1:] != d0.shape[1:]:
            raise ValueError("u0 and d0 must have the same trailing shape")
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(d0))):
            raise ValueError("boundary conditions must be finite")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "d0", d0)

    def __add__(self, other):
        return BoundaryConditions(self.u0 + other.u0, self.d0 + other.d0)

    def __rmul__(self, a):
        return BoundaryConditions(a * self.u0, a * self.d0)


@dataclass(frozen=True)
class Solution:
    u: np.ndarray
    v: np.ndarray
    residual: float


class BiharmonicSystem:
    """Assembled operators and the factorized interior system for one mesh.

    Parameters
    ----------
    mesh : TriMesh
        Domain mesh carrying a side assignment.
    consistent_mass : bool
        Use the consistent mass matrix; the sparse saddle system is then
        factorized instead of the reduced form.
    lump_boundary : bool
        Lump the boundary mass ``N``.
    method : {"direct", "cg"}
        Solver for the reduced system.
    tol : float
        Relative tolerance for ``cg``.
    """

    def __init__(
        self,
        mesh: TriMesh,
        consistent_mass: bool = False,
        lump_boundary: bool = False,
        method: str = "direct",
        tol: float = 1e-12,
    ):
        _mesh.require_sides(mesh)
        self.mesh = mesh
        self.consistent_mass = consistent_mass
        self.lump_boundary = lump_boundary
        self.L = _mesh.cotangent_weights(mesh).tocsr()
        self.M = (_mesh.consistent_mass(mesh) if consistent_mass else _mesh.lumped_mass(mesh)).tocsr()
        self.N = _mesh.slot_boundary_mass(mesh, lumped=lump_boundary)
        self.interior_index = mesh.interior_vertices
        self.boundary_index = mesh.boundary_vertices
        self.n = mesh.n_vertices
        self._L_ci = self.L[:, self.interior_index].tocsc()
        self._L_ic = self.L[self.interior_index].tocsr()
        self._L_cb = self.L[:, self.boundary_index].tocsr()

        if consistent_mass:
            n_i = len(self.interior_index)
            S = sparse.bmat([[self.M, self._L_ci], [self._L_ic, sparse.csr_matrix((n_i, n_i))]]).tocsc()
            self.reduced = None
            self._saddle = S
            self._saddle_lu = spla.splu(S)
        else:
            self._minv = 1.0 / self.M.diagonal()
            self.reduced = (self._L_ic @ sparse.diags(self._minv) @ self._L_ci).tocsc()
            self.reduced = 0.5 * (self.reduced + self.reduced.T)
            self.factorization = SPDSolver(self.reduced, method=method, tol=tol)

    @property
    def n_slots(self) -> int:
        return self.N.shape[1]

    def _check(self, bc: BoundaryConditions):
        if len(bc.u0) != len(self.boundary_index):
            raise ValueError(f"u0 has {len(bc.u0)} rows, expected {len(self.boundary_index)} boundary vertices")
        if len(bc.d0) != self.n_slots:
            raise ValueError(f"d0 has {len(bc.d0)} rows, expected {self.n_slots} slots")

    def rhs(self, bc: BoundaryConditions) -> np.ndarray:
        self._check(bc)
        return -(self._L_cb @ bc.u0) - self.N @ bc.d0

    def solve(self, bc: BoundaryConditions) -> Solution:
        b = self.rhs(bc)
        u = np.empty((self.n,) + b.shape[1:])
        u[self.boundary_index] = bc.u0
        if len(self.interior_index) == 0:
            v = self._apply_minv(b)
            return Solution(u, v, 0.0)
        if self.consistent_mass:
            n_i = len(self.interior_index)
            rhs = np.concatenate([b, np.zeros((n_i,) + b.shape[1:])])
            x = self._saddle_lu.solve(rhs)
            x = x + self._saddle_lu.solve(rhs - self._saddle @ x)
            res = _relres(self._saddle, x, rhs)
            v, u[self.interior_index] = x[: self.n], x[self.n :]
        else:
            f = self._L_ic @ (self._minv.reshape((-1,) + (1,) * (b.ndim - 1)) * b)
            x = self.factorization.solve(f)
            res = _relres(self.reduced, x, f)
            if res > RESIDUAL_TOL:
                x = x + self.factorization.solve(f - self.reduced @ x)
                res = _relres(self.reduced, x, f)
            u[self.interior_index] = x
            v = self._apply_minv(b - self._L_ci @ x)
        if res > RESIDUAL_TOL:
            raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:.0e}", res)
        return Solution(u, v, res)

    def _apply_minv(self, y):
        if self.consistent_mass:
            return spla.spsolve(self.M.tocsc(), y)
        return self._minv.reshape((-1,) + (1,) * (np.ndim(y) - 1)) * y


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def assemble_rhs(system: BiharmonicSystem, bc: BoundaryConditions) -> np.ndarray:
    """``b = -L[:, B] u0 - N d0`` per coordinate."""
    return system.rhs(bc)


def solve_biharmonic(system: BiharmonicSystem, bc: BoundaryConditions) -> np.ndarray:
    return system.solve(bc).u


def solve_saddle_dense(system: BiharmonicSystem, bc: BoundaryConditions, return_v: bool = False):
    """Dense solve of the full mixed system, independent of the reduced path.

    Unknowns are ``[v; u]`` over all vertices. The first block row is the
    weak Laplacian ``M v + L u = -N d0``; the second is ``(L v)_i = 0`` at
    interior vertices and the identity ``u_i = u0_i`` at boundary ones.
    """
    n = system.n
    L = system.L.toarray()
    M = system.M.toarray()
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = M
    A[:n, n:] = L
    A[n + system.interior_index, :n] = L[system.interior_index]
    A[n + system.boundary_index, n + system.boundary_index] = 1.0
    d0 = np.asarray(bc.d0, dtype=float)
    rhs = np.zeros((2 * n,) + d0.shape[1:])
    rhs[:n] = -(system.N.toarray() @ d0)
    rhs[n + system.boundary_index] = bc.u0
    if np.linalg.matrix_rank(A) < 2 * n:
        raise SolverError("saddle matrix is singular; constraints are mis-assembled")
    x = np.linalg.solve(A, rhs)
    return (x[n:], x[:n]) if return_v else x[n:]


@dataclass(frozen=True)
class HermiteOperators:
    """Responses of the interior vertices to unit boundary data.

    ``H0[:, j]`` answers ``u0 = e_j`` (boundary vertex ``j``) and ``H1[:, p]``
    answers ``d0 = e_p`` (slot ``p``); rows follow ``interior_index``.
    """

    interior_index: np.ndarray
    boundary_index: np.ndarray
    H0: np.ndarray
    H1: np.ndarray

    def evaluate(self, u0, d0) -> np.ndarray:
        """Full per-vertex values ``H0 u0 + H1 d0`` with ``u0`` on the boundary."""
        u0 = np.asarray(u0, dtype=float)
        n = len(self.interior_index) + len(self.boundary_index)
        out = np.empty((n,) + u0.shape[1:])
        out[self.boundary_index] = u0
        out[self.interior_index] = self.H0 @ u0 + self.H1 @ np.asarray(d0, dtype=float)
        return out


def hermite_operators(system: BiharmonicSystem) -> HermiteOperators:
    nb, ns = len(system.boundary_index), system.n_slots
    I = system.interior_index
    h0 = system.solve(BoundaryConditions(np.eye(nb), np.zeros((ns, nb)))).u[I]
    h1 = system.solve(BoundaryConditions(np.zeros((nb, ns)), np.eye(ns))).u[I]
    return HermiteOperators(I, system.boundary_index, h0, h1)
