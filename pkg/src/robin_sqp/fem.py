"""P1 finite-element matrices on a :class:`~robin_sqp.mesh.Mesh`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, simplex_measures


def _monomial_integrals(m: int, order: int) -> np.ndarray:
    """Exact integrals of products of barycentric coordinates over a unit-measure m-simplex.

    Returns an array with ``order`` axes of length m+1, using
    ``int lambda^alpha = |S| m! alpha! / (m + |alpha|)!``.
    """
    shape = (m + 1,) * order
    out = np.empty(shape)
    for idx in np.ndindex(*shape):
        counts = np.bincount(np.array(idx), minlength=m + 1)
        num = math.factorial(m) * math.prod(math.factorial(c) for c in counts)
        out[idx] = num / math.factorial(m + order)
    return out


@dataclass(frozen=True)
class FemMatrices:
    """Assembled P1 operators.

    ``stiffness``, ``mass`` and the boundary mass act on global nodal vectors.
    ``lumped_mass`` is the row-sum diagonal of ``mass``; ``boundary_lumped``
    is the row-sum diagonal of the boundary mass restricted to boundary nodes
    (length ``mesh.n_boundary``).
    """

    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    lumped_mass: np.ndarray
    boundary_mass: sp.csr_matrix
    boundary_lumped: np.ndarray
    _face_nodes: np.ndarray = field(repr=False)
    _face_areas: np.ndarray = field(repr=False)
    _triple: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    def boundary_matrix(self, c: np.ndarray) -> sp.csr_matrix:
        """Exact ``int_Gamma c phi_i phi_j`` for a P1 boundary coefficient.

        ``c`` holds values at the boundary nodes (length ``n_boundary``).
        """
        c = np.asarray(c, dtype=float)
        cf = c[self._face_nodes]  # (F, m+1)
        local = np.einsum("abc,fa->fbc", self._triple, cf) * self._face_areas[:, None, None]
        glob = self.mesh.boundary_nodes[self._face_nodes]
        k = glob.shape[1]
        rows = np.repeat(glob, k, axis=1).ravel()
        cols = np.tile(glob, (1, k)).ravel()
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(self.n, self.n))

    def lumped_boundary_matrix(self, c: np.ndarray) -> sp.csr_matrix:
        """Diagonal ``D_Gamma c`` placed on the boundary nodes of the global matrix."""
        diag = np.zeros(self.n)
        diag[self.mesh.boundary_nodes] = self.boundary_lumped * np.asarray(c, dtype=float)
        return sp.diags(diag, format="csr")

    def boundary_load(self, g: np.ndarray) -> np.ndarray:
        """``int_Gamma g phi_i`` for the P1 interpolant of ``g`` on the boundary."""
        full = np.zeros(self.n)
        full[self.mesh.boundary_nodes] = g
        return self.boundary_mass @ full

    def boundary_trilinear(self, y_b: np.ndarray, p_b: np.ndarray) -> np.ndarray:
        """``int_Gamma psi_j y p`` for P1 boundary functions given by boundary values."""
        yf = y_b[self._face_nodes]
        pf = p_b[self._face_nodes]
        local = np.einsum("abc,fb,fc->fa", self._triple, yf, pf) * self._face_areas[:, None]
        out = np.zeros(self.mesh.n_boundary)
        np.add.at(out, self._face_nodes, local)
        return out


def assemble(mesh: Mesh) -> FemMatrices:
    """Assemble stiffness, mass and boundary matrices for P1 elements."""
    d = mesh.dim
    x = mesh.nodes[mesh.elements]  # (E, d+1, d)
    jac = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))  # columns are edges
    vol = np.abs(np.linalg.det(jac)) / math.factorial(d)
    inv = np.linalg.inv(jac)  # rows are gradients of lambda_1..lambda_d
    grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)  # (E, d+1, d)

    k_loc = np.einsum("eid,dk,ejk->eij", grads, mesh.diffusion, grads) * vol[:, None, None]
    m_ref = _monomial_integrals(d, 2)
    m_loc = m_ref[None, :, :] * vol[:, None, None]

    n = mesh.n_nodes
    k = d + 1
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    stiffness = sp.csr_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n))
    mass = sp.csr_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n))
    stiffness = (0.5 * (stiffness + stiffness.T)).tocsr()
    lumped = np.asarray(mass.sum(axis=1)).ravel()

    m = d - 1
    pos = mesh.boundary_position()
    face_nodes = pos[mesh.boundary_faces]
    areas = simplex_measures(mesh.nodes, mesh.boundary_faces)
    fm_loc = _monomial_integrals(m, 2)[None, :, :] * areas[:, None, None]
    kb = m + 1
    brow = np.repeat(mesh.boundary_faces, kb, axis=1).ravel()
    bcol = np.tile(mesh.boundary_faces, (1, kb)).ravel()
    bmass = sp.csr_matrix((fm_loc.ravel(), (brow, bcol)), shape=(n, n))
    blumped = np.asarray(bmass.sum(axis=1)).ravel()[mesh.boundary_nodes]

    return FemMatrices(
        mesh=mesh,
        stiffness=stiffness,
        mass=mass,
        lumped_mass=lumped,
        boundary_mass=bmass,
        boundary_lumped=blumped,
        _face_nodes=face_nodes,
        _face_areas=areas,
        _triple=_monomial_integrals(m, 3),
    )
