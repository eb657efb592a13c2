"""Structured triangulations of rectangles and uniform red refinement."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    grad_basis: np.ndarray  # (3, 2)
    centroid: np.ndarray  # (2,)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation of a rectangle.

    ``vertices`` is ``(nv, 2)``, ``triangles`` is ``(nt, 3)`` with
    counterclockwise vertex order, ``boundary`` flags vertices on the
    rectangle's edges.  For a refined mesh ``parent_edges[k]`` holds the
    two coarse vertices whose midpoint is vertex ``nv_coarse + k``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    bounds: tuple[float, float, float, float]
    generation: int = 0
    parent_edges: np.ndarray | None = None

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary):
            arr.flags.writeable = False
        if self.parent_edges is not None:
            self.parent_edges.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def domain_area(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return (xmax - xmin) * (ymax - ymin)

    @cached_property
    def _geometry(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = self.vertices[self.triangles]  # (nt, 3, 2)
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
        g0 = -g1 - g2
        grads = np.stack([g0, g1, g2], axis=1)
        centroids = pts.mean(axis=1)
        return 0.5 * det, grads, centroids

    @property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def grads(self) -> np.ndarray:
        """Barycentric basis gradients, shape ``(nt, 3, 2)``."""
        return self._geometry[1]

    @property
    def centroids(self) -> np.ndarray:
        return self._geometry[2]

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def interior_index(self) -> np.ndarray:
        """Map vertex -> position among interior vertices, -1 on the boundary."""
        idx = np.full(self.n_vertices, -1, dtype=np.int64)
        idx[self.interior] = np.arange(self.interior.size)
        return idx

    @cached_property
    def h_max(self) -> float:
        pts = self.vertices[self.triangles]
        edges = pts - np.roll(pts, 1, axis=1)
        return float(np.sqrt((edges ** 2).sum(axis=2)).max())

    def check(self) -> None:
        """Raise ``ValueError`` if an element is degenerate or clockwise."""
        if np.any(self.areas <= 0.0):
            raise ValueError("mesh has non-positive signed element area")


def structured_rectangle(xmin: float, ymin: float, xmax: float, ymax: float, n: int) -> TriMesh:
    """``n x n`` cells, each split along its lower-left to upper-right diagonal."""
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"degenerate rectangle ({xmin}, {ymin}, {xmax}, {ymax})")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    i, j = i.ravel(), j.ravel()
    x = xmin + (xmax - xmin) * i / n
    y = ymin + (ymax - ymin) * j / n
    # pin the far edges exactly
    x[i == n] = xmax
    y[j == n] = ymax
    vertices = np.column_stack([x, y])
    boundary = (i == 0) | (i == n) | (j == 0) | (j == n)

    ci, cj = np.meshgrid(np.arange(n), np.arange(n))
    ci, cj = ci.ravel(), cj.ravel()
    v00 = cj * (n + 1) + ci
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return TriMesh(vertices, triangles.astype(np.int64), boundary,
                   (float(xmin), float(ymin), float(xmax), float(ymax)))


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Red refinement: every triangle is split into four by its edge midpoints.

    Old vertices keep their indices; midpoints are appended in sorted edge
    order, keyed on vertex pairs so no coordinate hashing is involved.
    """
    tri = mesh.triangles
    nv = mesh.n_vertices
    local = np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1)  # (nt, 3, 2)
    lo = local.min(axis=2)
    hi = local.max(axis=2)
    keys = (lo * nv + hi).ravel()
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    edges = np.column_stack([uniq // nv, uniq % nv])
    mid = (nv + inverse).reshape(-1, 3)
    m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    children = np.stack([
        np.column_stack([v0, m01, m20]),
        np.column_stack([m01, v1, m12]),
        np.column_stack([m20, m12, v2]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)

    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    # an edge owned by a single triangle lies on the boundary
    boundary = np.concatenate([mesh.boundary, counts == 1])
    return TriMesh(vertices, children, boundary, mesh.bounds,
                   mesh.generation + 1, parent_edges=edges)


def refine(mesh: TriMesh, times: int) -> TriMesh:
    for _ in range(times):
        mesh = refine_uniform(mesh)
    return mesh


def element_geometry(mesh: TriMesh, k: int) -> ElementGeometry:
    if not (0 <= k < mesh.n_triangles):
        raise IndexError(f"element index {k} out of range for {mesh.n_triangles} triangles")
    return ElementGeometry(float(mesh.areas[k]), mesh.grads[k].copy(), mesh.centroids[k].copy())


def prolongate(coarse: np.ndarray, fine: TriMesh) -> np.ndarray:
    """Nodal values of a coarse P1 function on its red refinement."""
    if fine.parent_edges is None:
        raise ValueError("mesh was not produced by refine_uniform")
    coarse = np.asarray(coarse, dtype=float)
    mids = 0.5 * (coarse[fine.parent_edges[:, 0]] + coarse[fine.parent_edges[:, 1]])
    out = np.concatenate([coarse, mids])
    if out.size != fine.n_vertices:
        raise ValueError("coarse vector does not match the parent mesh")
    return out


def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text export: header ``nv nt``, then ``x y flag`` and ``i j k`` lines."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x:.17e} {y:.17e} {int(b)}"
              for (x, y), b in zip(mesh.vertices, mesh.boundary)]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    rows = Path(path).read_text().split("\n")
    nv, nt = (int(s) for s in rows[0].split())
    vdata = np.array([r.split() for r in rows[1:1 + nv]], dtype=float)
    tdata = np.array([r.split() for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64)
    vertices = vdata[:, :2].copy()
    boundary = vdata[:, 2] != 0
    bounds = (float(vertices[:, 0].min()), float(vertices[:, 1].min()),
              float(vertices[:, 0].max()), float(vertices[:, 1].max()))
    return TriMesh(vertices, tdata.reshape(-1, 3), boundary, bounds)
