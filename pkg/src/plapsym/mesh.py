"""Conforming triangulations of the sampled domain and the boundary tube volume."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import triangle

from ._p1 import superlevel_area
from .errors import MeshError

MIN_ANGLE_DEG = 20.0


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flag: np.ndarray
    h: float

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @property
    def area(self):
        return float(self.signed_areas.sum())

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def basis_gradients(self):
        """(T, 3, 2) gradients of the three barycentric hat functions per triangle."""
        p = self.vertices[self.triangles]
        twice = 2.0 * self.signed_areas
        g = np.empty((len(p), 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / twice
            g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / twice
        return g

    @cached_property
    def boundary_edges(self):
        """(E, 2) vertex pairs oriented counterclockwise, and the owning triangle per edge."""
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        owner = np.tile(np.arange(len(tri)), 3)
        key = np.sort(edges, axis=1)
        _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        single = counts[inverse.ravel()] == 1
        return edges[single], owner[single]

    def edge_lengths(self):
        p = self.vertices[self.triangles]
        return np.stack([np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)], axis=1)

    def angles_deg(self):
        lengths = self.edge_lengths()  # edge i joins vertices i and i + 1
        a, b, c = lengths[:, 1], lengths[:, 2], lengths[:, 0]  # opposite vertices 0, 1, 2
        ang0 = np.arccos(np.clip((b ** 2 + c ** 2 - a ** 2) / (2 * b * c), -1, 1))
        ang1 = np.arccos(np.clip((a ** 2 + c ** 2 - b ** 2) / (2 * a * c), -1, 1))
        return np.degrees(np.stack([ang0, ang1, np.pi - ang0 - ang1], axis=1))

    def to_text(self):
        lines = [f"{self.n_vertices} {self.n_triangles}"]
        lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(self.vertices.tolist(), self.boundary_flag)]
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, h=float("nan")):
        rows = text.strip().splitlines()
        nv, nt = (int(v) for v in rows[0].split())
        vert = np.array([[float(v) for v in r.split()] for r in rows[1:1 + nv]])
        tri = np.array([[int(v) for v in r.split()] for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64)
        return cls(vert[:, :2].copy(), tri.reshape(-1, 3), vert[:, 2].astype(bool), h)

    def translated(self, shift):
        return Mesh(self.vertices + np.asarray(shift, dtype=float), self.triangles,
                    self.boundary_flag, self.h)


def triangulate(curve, h, max_rounds=8):
    """Quality constrained Delaunay mesh of the polygon through ``curve.points``.

    Ruppert refinement is delegated to Shewchuk's Triangle with a 20 degree
    minimum angle; triangles with an edge longer than 1.5 h are refined again
    until none remain.
    """
    if not h > 0:
        raise MeshError("h must be positive")
    if h >= curve.perimeter / 16:
        raise MeshError(f"h={h} too coarse for perimeter {curve.perimeter:.4g}")
    pts = np.asarray(curve.points, dtype=float)
    n = len(pts)
    segs = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    target_area = np.sqrt(3) / 4 * h * h
    geom = {"vertices": pts, "segments": segs}
    try:
        out = triangle.triangulate(geom, f"pq{MIN_ANGLE_DEG:g}a{target_area:.15f}Q")
        for _ in range(max_rounds):
            mesh = _to_mesh(out, h)
            long_edge = mesh.edge_lengths().max(axis=1) > 1.5 * h
            if not long_edge.any():
                break
            limits = np.where(long_edge, 0.5 * np.abs(mesh.signed_areas), -1.0)
            out = triangle.triangulate(
                {**out, "triangle_max_area": limits}, f"rpq{MIN_ANGLE_DEG:g}aQ")
        else:
            raise MeshError("edge-length refinement did not terminate")
    except RuntimeError as exc:  # Triangle aborts on invalid input
        raise MeshError(f"triangulation failed: {exc}") from exc
    if np.any(mesh.signed_areas <= 0):
        raise MeshError("triangulation produced inverted triangles")
    return mesh


def refine_around(mesh, point, h_fine, grading=0.1, max_rounds=16):
    """Refine ``mesh`` so the local size grows like h_fine + grading * |x - point|.

    Sizes are capped at ``mesh.h``; the boundary polygon is kept as a
    constrained segment set, so the domain is unchanged.
    """
    if not 0 < h_fine <= mesh.h or grading <= 0:
        raise MeshError("refine_around needs 0 < h_fine <= h and grading > 0")
    point = np.asarray(point, dtype=float)
    out = {"vertices": mesh.vertices, "triangles": mesh.triangles,
           "segments": mesh.boundary_edges[0],
           "vertex_markers": mesh.boundary_flag.astype(np.int32)[:, None]}
    refined = mesh
    try:
        for _ in range(max_rounds):
            centroids = refined.vertices[refined.triangles].mean(axis=1)
            size = np.minimum(mesh.h, h_fine + grading * np.hypot(*(centroids - point).T))
            target = np.sqrt(3) / 4 * size ** 2
            too_big = np.abs(refined.signed_areas) > 1.5 * target
            if not too_big.any():
                return refined
            out = triangle.triangulate({**out, "triangle_max_area": np.where(too_big, target, -1.0)},
                                       f"rpq{MIN_ANGLE_DEG:g}aQ")
            refined = _to_mesh(out, mesh.h)
    except RuntimeError as exc:
        raise MeshError(f"graded refinement failed: {exc}") from exc
    raise MeshError("graded refinement did not terminate")


def _to_mesh(out, h):
    vertices = np.asarray(out["vertices"], dtype=float)
    tri = np.asarray(out["triangles"], dtype=np.int64)
    markers = np.asarray(out.get("vertex_markers", np.zeros((len(vertices), 1)))).ravel()
    return Mesh(vertices, tri, markers != 0, float(h))


def distance_to_polyline(points, polyline, chunk=4096):
    """Euclidean distance from each point to the closed polyline."""
    a = np.asarray(polyline, dtype=float)
    d = np.roll(a, -1, axis=0) - a
    dd = np.einsum("ij,ij->i", d, d)
    pts = np.asarray(points, dtype=float)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk, None, :] - a[None, :, :]
        t = np.clip(np.einsum("ijk,jk->ij", p, d) / dd, 0.0, 1.0)
        diff = p - t[..., None] * d[None, :, :]
        out[s:s + chunk] = np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))
    return out


def tube_volume(mesh, curve, delta):
    """|{x in Omega : dist(x, boundary) <= delta}| for the meshed polygon.

    The distance is interpolated piecewise linearly and the sub-level area is
    clipped exactly per triangle.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return 0.0
    dist = distance_to_polyline(mesh.vertices, curve.points)
    dist[mesh.boundary_flag] = 0.0
    return mesh.area - superlevel_area(mesh, dist, delta)


def tube_volume_bound(curve, delta, N=2):
    """Upper bound (1 + delta M0^-)^{N-1} H^{N-1}(boundary) delta on the tube volume."""
    return (1.0 + delta * curve.M0_minus) ** (N - 1) * curve.perimeter * delta
