"""Prolongation of space-time fields from one uniform level to the next."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh
from .timegrid import TimeGrid


def _check_nested(mc: Mesh, mf: Mesh, tc: TimeGrid | None, tf: TimeGrid | None) -> None:
    if mc.dim != mf.dim or mf.level != mc.level + 1:
        raise ValueError(
            f"fine mesh (dim {mf.dim}, level {mf.level}) is not one refinement of "
            f"coarse mesh (dim {mc.dim}, level {mc.level})"
        )
    if tc is not None and tf is not None:
        if tf.steps != 2 * tc.steps or not np.isclose(tf.T, tc.T):
            raise ValueError(
                f"fine time grid ({tf.steps} steps, T={tf.T}) does not halve "
                f"coarse time grid ({tc.steps} steps, T={tc.T})"
            )


def prolong_nodal(values: np.ndarray, mesh_coarse: Mesh, mesh_fine: Mesh) -> np.ndarray:
    """P1 interpolation of nodal vectors (last axis) onto the refined mesh.

    Every fine node is the midpoint of a coarse edge (or a coarse node); the
    coarse endpoints are obtained per axis as ``floor(I/2)`` and ``ceil(I/2)``.
    """
    _check_nested(mesh_coarse, mesh_fine, None, None)
    d = mesh_fine.dim
    nf = mesh_fine.points_per_axis
    nc = mesh_coarse.points_per_axis
    idx = np.stack(np.meshgrid(*([np.arange(nf)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    strides = np.array([nc ** (d - 1 - a) for a in range(d)])
    lo = (idx // 2) @ strides
    hi = ((idx + 1) // 2) @ strides
    values = np.asarray(values, dtype=float)
    return 0.5 * (values[..., lo] + values[..., hi])


def prolong_state(field, mesh_coarse, mesh_fine, timegrid_coarse, timegrid_fine) -> np.ndarray:
    """Prolong a node-in-time field of shape (N+1, n): P1 in space, linear in time."""
    _check_nested(mesh_coarse, mesh_fine, timegrid_coarse, timegrid_fine)
    field = np.asarray(field, dtype=float)
    if field.shape != (timegrid_coarse.steps + 1, mesh_coarse.n_nodes):
        raise ValueError(f"state field has shape {field.shape}, grids disagree")
    space = prolong_nodal(field, mesh_coarse, mesh_fine)
    out = np.empty((timegrid_fine.steps + 1, mesh_fine.n_nodes))
    out[0::2] = space
    out[1::2] = 0.5 * (space[:-1] + space[1:])
    return out


def prolong_control(field, mesh_coarse, mesh_fine, timegrid_coarse, timegrid_fine) -> np.ndarray:
    """Prolong a boundary control of shape (N, n_boundary).

    P1 interpolation along the boundary; each coarse interval value is
    copied to the two fine intervals it contains.
    """
    _check_nested(mesh_coarse, mesh_fine, timegrid_coarse, timegrid_fine)
    field = np.asarray(field, dtype=float)
    if field.shape != (timegrid_coarse.steps, mesh_coarse.n_boundary):
        raise ValueError(f"control field has shape {field.shape}, grids disagree")
    full = np.zeros((field.shape[0], mesh_coarse.n_nodes))
    full[:, mesh_coarse.boundary_nodes] = field
    fine = prolong_nodal(full, mesh_coarse, mesh_fine)[:, mesh_fine.boundary_nodes]
    return np.repeat(fine, 2, axis=0)
