"""Planar convex geometry: QuickHull, facet polytopes, halfspace clipping.

Everything here is 2-D only. Polygons are ``(m, 2)`` float arrays in
counter-clockwise order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, DegenerateInput, InvalidInput

COLLINEAR_TOL = 1e-12
BOX_SCALE = 1e4


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area (positive for CCW ordering)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_perimeter(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


def _cross(o, a, pts):
    return (a[0] - o[0]) * (pts[:, 1] - o[1]) - (a[1] - o[1]) * (pts[:, 0] - o[0])


@dataclass(frozen=True)
class Hull2D:
    vertices: np.ndarray

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def __len__(self):
        return len(self.vertices)


def _partition(pts, a, b, out):
    # Emit hull points strictly to the right of a->b, ordered from a towards b.
    if len(pts) == 0:
        return
    side = _cross(a, b, pts)
    scale = math.hypot(b[0] - a[0], b[1] - a[1])
    mask = side < -COLLINEAR_TOL * max(scale, 1.0)
    pts = pts[mask]
    if len(pts) == 0:
        return
    far = pts[np.argmin(side[mask])]
    _partition(pts, a, far, out)
    out.append(far)
    _partition(pts, far, b, out)


def quickhull(points) -> Hull2D:
    """Convex hull of a planar point set.

    Vertices come back counter-clockwise starting at the lowest (then
    leftmost) vertex. Points on or within ``1e-12`` of a hull edge are not
    reported as vertices.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInput("points must have shape (n, 2)")
    if len(pts) < 3:
        raise DegenerateInput(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("points must be finite")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    left, right = pts[order[0]], pts[order[-1]]
    if np.array_equal(left, right):
        raise DegenerateInput("all points coincide")

    hull = [left]
    _partition(pts, left, right, hull)  # lower chain
    hull.append(right)
    _partition(pts, right, left, hull)  # upper chain
    verts = _drop_collinear(np.array(hull))
    if len(verts) < 3:
        raise DegenerateInput("points are collinear")

    start = np.lexsort((verts[:, 0], verts[:, 1]))[0]
    return Hull2D(np.roll(verts, -start, axis=0))


def _drop_collinear(v):
    keep = []
    n = len(v)
    for i in range(n):
        p, c, nx = v[i - 1], v[i], v[(i + 1) % n]
        cr = (c[0] - p[0]) * (nx[1] - c[1]) - (c[1] - p[1]) * (nx[0] - c[0])
        if cr > COLLINEAR_TOL * max(1.0, np.abs(v).max()):
            keep.append(c)
    return np.array(keep).reshape(-1, 2)


@dataclass
class PolytopeScore:
    """Facet description ``{z : A z <= b}`` of a bounded convex polygon.

    Rows of ``A`` are stored with unit norm, so ``max_j A_j z - b_j`` is a
    signed distance (in the units of ``z``) and inflating every offset by
    ``q`` grows the region isotropically.
    """

    A: np.ndarray
    b: np.ndarray
    _profile: tuple | None = field(default=None, init=False, repr=False, compare=False)
    _profile_done: bool = field(default=False, init=False, repr=False, compare=False)
    _areas: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[1] != 2 or A.shape[0] != b.shape[0]:
            raise InvalidInput("A must be (r, 2) and b must have length r")
        if A.shape[0] < 3:
            raise InvalidInput("a bounded polygon needs at least 3 facets")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= 0):
            raise InvalidInput("facet normals must be nonzero")
        self.A = A / norms[:, None]
        self.b = b / norms

    @property
    def r(self) -> int:
        return self.A.shape[0]

    def score(self, residual) -> np.ndarray | float:
        z = np.asarray(residual, dtype=float)
        vals = z @ self.A.T - self.b
        return vals.max(axis=-1)

    def vertices(self, q: float = 0.0) -> np.ndarray:
        return halfspace_area(self.A, self.b, q)[1]

    def area(self, q: float = 0.0) -> float:
        """Area of ``{z : A z <= b + q}``; uses a closed form for ``q >= 0``."""
        if q == math.inf:
            return math.inf
        if q == -math.inf:
            return 0.0
        if q >= 0:
            prof = self._offset_profile()
            if prof is not None:
                a0, p0, c = prof
                return a0 + p0 * q + c * q * q
        # Thresholds repeat while the window quantile sits on the same score.
        q = float(q)
        if q not in self._areas:
            if len(self._areas) > 4096:
                self._areas.clear()
            self._areas[q] = halfspace_area(self.A, self.b, q)[0]
        return self._areas[q]

    def _offset_profile(self):
        # Outward offset of a polygon whose facets are all active:
        # area(q) = A0 + P0 q + q^2 sum tan(phi_j / 2), phi_j the turning angles.
        if self._profile_done:
            return self._profile
        self._profile_done = True
        area, verts = halfspace_area(self.A, self.b, 0.0)
        if len(verts) != self.r or area <= 0:
            return None
        on = np.abs(verts @ self.A.T - self.b) < 1e-9 * max(1.0, float(np.abs(self.b).max()))
        if not np.all(on.sum(axis=0) == 2):
            return None
        ang = np.sort(np.arctan2(self.A[:, 1], self.A[:, 0]))
        turn = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
        if np.any(turn <= 0) or np.any(turn >= np.pi):
            return None
        self._profile = (area, polygon_perimeter(verts), float(np.tan(turn / 2).sum()))
        return self._profile

    def validate(self, tol: float = 1e-9) -> None:
        verts = self.vertices(0.0)
        if len(verts) < 3:
            raise DegenerateGeometry("polytope is empty or degenerate")
        if np.any(verts @ self.A.T - self.b > tol * max(1.0, float(np.abs(self.b).max()))):
            raise DegenerateGeometry("polytope vertex violates a facet")
        if np.abs(verts).max() >= BOX_SCALE * max(1.0, float(np.abs(self.b).max())) * 0.5:
            raise DegenerateGeometry("polytope is unbounded")


def hull_to_polytope(hull: Hull2D) -> PolytopeScore:
    v = np.asarray(hull.vertices, dtype=float)
    edge = np.roll(v, -1, axis=0) - v
    normal = np.column_stack([edge[:, 1], -edge[:, 0]])
    normal /= np.linalg.norm(normal, axis=1)[:, None]
    b = np.einsum("ij,ij->i", normal, v)
    return PolytopeScore(normal, b)


def _clip(poly, a, c):
    d = poly @ a - c
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        di, dj = d[i], d[j]
        if di <= 0:
            out.append(poly[i])
        if (di < 0 < dj) or (dj < 0 < di):
            t = di / (di - dj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if not out:
        return np.empty((0, 2))
    return np.array(out)


def halfspace_area(A, b, q: float = 0.0):
    """Area and vertices of ``{z : A z <= b + q}`` by clipping a large box.

    Rows of ``A`` must have unit norm. Returns ``(0.0, empty)`` for an
    empty intersection.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if q == math.inf:
        return math.inf, np.empty((0, 2))
    off = b + q
    half = BOX_SCALE * max(1.0, float(np.abs(off).max()))
    poly = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    for a, c in zip(A, off):
        poly = _clip(poly, a, c)
        if len(poly) == 0:
            break
    if len(poly) >= 3:
        poly = _dedupe(poly)
    area = polygon_area(poly) if len(poly) >= 3 else 0.0
    if q > 0 and len(poly) < 3:
        raise DegenerateGeometry(f"inflated region at q={q} has {len(poly)} vertices")
    return max(area, 0.0), poly


def _dedupe(poly, tol=1e-12):
    keep = np.linalg.norm(poly - np.roll(poly, 1, axis=0), axis=1) > tol * max(1.0, np.abs(poly).max())
    return poly[keep] if keep.sum() >= 3 else poly[:0]


def _point_polygon_distance(p, poly) -> float:
    # Zero inside a CCW convex polygon, else distance to the nearest edge.
    e = np.roll(poly, -1, axis=0) - poly
    rel = p - poly
    if np.all(e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0] >= 0):
        return 0.0
    t = np.clip(np.einsum("ij,ij->i", rel, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    return float(np.linalg.norm(rel - t[:, None] * e, axis=1).min())


def hausdorff_distance(poly_a, poly_b) -> float:
    """Hausdorff distance between two convex CCW polygons.

    Distance to a convex set is convex, so the supremum sits at a vertex.
    """
    a = np.asarray(poly_a, dtype=float)
    b = np.asarray(poly_b, dtype=float)
    return max(
        max(_point_polygon_distance(v, b) for v in a),
        max(_point_polygon_distance(v, a) for v in b),
    )
