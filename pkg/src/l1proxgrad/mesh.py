"""Uniform triangulations of the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of (0,1)^2 with P1 nodes and P0 cells.

    nodes      -- (n_nodes, 2) coordinates
    triangles  -- (n_triangles, 3) node indices, counterclockwise
    areas      -- (n_triangles,) triangle areas
    boundary_node -- (n_nodes,) True for nodes on the boundary
    level      -- number of grid cells per side
    """

    nodes: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray
    boundary_node: np.ndarray
    level: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def build_uniform_mesh(level: int) -> Mesh:
    """Uniform triangulation with ``(level+1)**2`` nodes and ``2*level**2`` triangles.

    Nodes are numbered row by row (x fastest). Every grid square is cut
    along its lower-left to upper-right diagonal into two triangles, which
    are stored consecutively, squares again in row-major order.
    """
    if int(level) != level or level < 1:
        raise ValueError(f"mesh level must be a positive integer, got {level!r}")
    n = int(level)
    h = 1.0 / n
    ticks = np.arange(n + 1) * h
    ticks[-1] = 1.0
    x, y = np.meshgrid(ticks, ticks)
    nodes = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    areas = _signed_areas(nodes, triangles)
    boundary = (
        (nodes[:, 0] == 0.0) | (nodes[:, 0] == 1.0) | (nodes[:, 1] == 0.0) | (nodes[:, 1] == 1.0)
    )
    for arr in (nodes, triangles, areas, boundary):
        arr.setflags(write=False)
    return Mesh(nodes, triangles, areas, boundary, n)


def _signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (nodes[triangles[:, k]] for k in range(3))
    e1, e2 = p1 - p0, p2 - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def triangle_mean_of_nodal(field, mesh: Mesh) -> np.ndarray:
    """Average of the three vertex values on every triangle (P1 -> P0)."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise ValueError(
            f"nodal field has shape {field.shape}, expected ({mesh.n_nodes},)"
        )
    return field[mesh.triangles].mean(axis=1)
