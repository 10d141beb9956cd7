"""Uniform simplicial meshes of the unit square and cube.

Every grid cell is split along its main diagonal (Friedrichs-Keller in 2D,
the six-tetrahedra Kuhn split in 3D).  With all cells split the same way the
meshes are nested under uniform refinement, which is what makes the simple
midpoint prolongation in :mod:`robin_sqp.transfer` exact for P1 functions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform simplicial mesh of (0, 1)^dim with mesh size ``2**-level``.

    Nodes are numbered lexicographically in their coordinates (first axis
    slowest).  ``boundary_nodes`` lists the global indices of nodes on the
    boundary in increasing order; boundary faces refer to global indices.
    """

    dim: int
    level: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_faces: np.ndarray
    boundary_nodes: np.ndarray
    diffusion: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary_nodes.shape[0]

    @property
    def points_per_axis(self) -> int:
        return 2**self.level + 1

    def element_volumes(self) -> np.ndarray:
        return np.abs(_signed_volumes(self.nodes, self.elements))

    def face_areas(self) -> np.ndarray:
        return simplex_measures(self.nodes, self.boundary_faces)

    def boundary_position(self) -> np.ndarray:
        """Map from global node index to boundary index (-1 for interior)."""
        pos = np.full(self.n_nodes, -1, dtype=np.int64)
        pos[self.boundary_nodes] = np.arange(self.n_boundary)
        return pos

    def dump(self) -> str:
        """Plain-text listing: one node per line, then one element per line."""
        lines = [f"# nodes {self.n_nodes} dim {self.dim} level {self.level}"]
        for i, x in enumerate(self.nodes):
            lines.append(f"{i} " + " ".join(f"{c:.17g}" for c in x))
        lines.append(f"# elements {self.elements.shape[0]}")
        for e, conn in enumerate(self.elements):
            lines.append(f"{e} " + " ".join(str(c) for c in conn))
        return "\n".join(lines) + "\n"


def _signed_volumes(nodes: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    x = nodes[simplices]
    jac = x[:, 1:, :] - x[:, :1, :]
    d = nodes.shape[1]
    return np.linalg.det(jac) / math.factorial(d)


def simplex_measures(nodes: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Measures of (possibly lower-dimensional) simplices embedded in R^d."""
    x = nodes[simplices]
    edges = x[:, 1:, :] - x[:, :1, :]
    m = edges.shape[1]
    gram = np.einsum("fid,fjd->fij", edges, edges)
    return np.sqrt(np.abs(np.linalg.det(gram))) / math.factorial(m)


def build_uniform_mesh(dim: int, level: int, diffusion=None) -> Mesh:
    """Build the uniform mesh of (0, 1)^dim with ``2**level`` cells per axis.

    ``diffusion`` is the constant symmetric positive-definite matrix of the
    elliptic operator; it defaults to the identity (the Laplacian).
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim!r}")
    if not isinstance(level, (int, np.integer)) or level < 1:
        raise ValueError(f"level must be a positive integer, got {level!r}")
    level = int(level)

    if diffusion is None:
        diffusion = np.eye(dim)
    diffusion = np.asarray(diffusion, dtype=float)
    if diffusion.shape != (dim, dim):
        raise ValueError(f"diffusion must be {dim}x{dim}")
    if not np.allclose(diffusion, diffusion.T) or np.linalg.eigvalsh(diffusion)[0] <= 0:
        raise ValueError("diffusion matrix must be symmetric positive definite")

    n_cells = 2**level
    n_ax = n_cells + 1
    grid = np.stack(
        np.meshgrid(*([np.arange(n_ax)] * dim), indexing="ij"), axis=-1
    ).reshape(-1, dim)
    nodes = grid / n_cells
    strides = np.array([n_ax ** (dim - 1 - a) for a in range(dim)])

    # Kuhn simplices of the reference cube: walk from the origin corner to the
    # opposite corner, adding one unit vector at a time in permuted order.
    local = []
    for perm in itertools.permutations(range(dim)):
        corner = np.zeros(dim, dtype=np.int64)
        verts = [corner.copy()]
        for axis in perm:
            corner[axis] += 1
            verts.append(corner.copy())
        local.append(np.array(verts))
    local = np.array(local)  # (d!, d+1, d)

    cells = np.stack(
        np.meshgrid(*([np.arange(n_cells)] * dim), indexing="ij"), axis=-1
    ).reshape(-1, dim)
    verts = cells[:, None, None, :] + local[None, :, :, :]
    elements = (verts @ strides).reshape(-1, dim + 1)

    vol = _signed_volumes(nodes, elements)
    flip = vol < 0
    elements[flip, 0], elements[flip, 1] = elements[flip, 1], elements[flip, 0].copy()

    on_bdry = np.any((grid == 0) | (grid == n_cells), axis=1)
    boundary_nodes = np.flatnonzero(on_bdry)
    boundary_faces = _boundary_faces(grid, elements, n_cells)

    return Mesh(
        dim=dim,
        level=level,
        nodes=nodes,
        elements=elements,
        boundary_faces=boundary_faces,
        boundary_nodes=boundary_nodes,
        diffusion=diffusion,
    )


def _boundary_faces(grid: np.ndarray, elements: np.ndarray, n_cells: int) -> np.ndarray:
    dim = grid.shape[1]
    faces = []
    for drop in range(dim + 1):
        keep = [j for j in range(dim + 1) if j != drop]
        cand = elements[:, keep]
        coords = grid[cand]  # (E, d, d)
        lo = np.all(coords == 0, axis=1)
        hi = np.all(coords == n_cells, axis=1)
        faces.append(cand[np.any(lo | hi, axis=1)])
    faces = np.concatenate(faces)
    # canonical order for reproducibility
    faces = np.sort(faces, axis=1)
    order = np.lexsort(faces.T[::-1])
    return faces[order]
