"""Planar C^2 domains: sampling, isoperimetric and normal-alignment deficits.

All boundary integrals use trapezoidal weights on a uniform parameter grid,
which is spectrally accurate for smooth closed curves.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from ._optimize import minimize_convex_2d
from .errors import ConfigError, CurveSimplicityError, PostProcessingError

FAMILIES = ("disk", "ellipse", "star")

# isoperimetric constant in the plane: perimeter(B_1) / |B_1|^{1/2}
C2 = 2.0 * np.sqrt(np.pi)

MAX_TURNING_ANGLE = 0.5


@dataclass(frozen=True)
class DomainSpec:
    family: str = "disk"
    R: float = 1.0
    a: float = 1.0
    b: float = 1.0
    amp: float = 0.0
    k: int = 0
    n_boundary: int = 256
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown domain family {self.family!r}; expected one of {FAMILIES}")
        if self.n_boundary < 64:
            raise ConfigError("n_boundary must be >= 64")
        if self.family in ("disk", "star") and not self.R > 0:
            raise ConfigError("R must be positive")
        if self.family == "ellipse" and not (self.a > 0 and self.b > 0):
            raise ConfigError("ellipse semi-axes must be positive")
        if self.family == "star" and int(self.k) != self.k:
            raise ConfigError("star frequency k must be an integer")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def label(self):
        if self.family == "disk":
            return f"disk(R={self.R:g})"
        if self.family == "ellipse":
            return f"ellipse(a={self.a:g},b={self.b:g})"
        return f"star(R={self.R:g},amp={self.amp:g},k={self.k:d})"


@dataclass(frozen=True)
class BoundaryCurve:
    """Counterclockwise samples of a closed curve.

    ``points[i]`` is joined to ``points[(i + 1) % n]``; the closing point is
    not repeated.
    """

    points: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    arc_weights: np.ndarray
    area: float

    @property
    def perimeter(self):
        return float(self.arc_weights.sum())

    @property
    def n(self):
        return len(self.points)

    @property
    def C_Omega(self):
        return 2.0 * self.area / self.perimeter

    @property
    def M0_minus(self):
        return float(max(0.0, np.max(-self.curvature)))

    @property
    def centroid(self):
        # first moments via the divergence theorem: int x dA = 1/2 int x <x, nu> ds
        w = self.arc_weights
        xn = np.einsum("ij,ij->i", self.points, self.normals)
        return (self.points * (w * xn)[:, None]).sum(axis=0) / (3.0 * self.area)

    @property
    def diameter(self):
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.hypot(*span))

    def segments(self):
        return np.stack([self.points, np.roll(self.points, -1, axis=0)], axis=1)

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        return BoundaryCurve(self.points + shift, self.normals, self.curvature,
                             self.arc_weights, self.area)

    def scaled(self, lam):
        return BoundaryCurve(self.points * lam, self.normals, self.curvature / lam,
                             self.arc_weights * lam, self.area * lam ** 2)


@dataclass
class GeometryReport:
    area: float
    perimeter: float
    C_Omega: float
    iso_deficit: float
    normal_deficit: float
    eps: float
    M0_minus: float
    x0_star: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _parametrize(spec, theta):
    """Position, first and second derivative with respect to theta."""
    c, s = np.cos(theta), np.sin(theta)
    if spec.family in ("disk", "ellipse"):
        a, b = (spec.R, spec.R) if spec.family == "disk" else (spec.a, spec.b)
        x = np.stack([a * c, b * s], axis=1)
        dx = np.stack([-a * s, b * c], axis=1)
        ddx = -x
    else:
        k, amp, R = spec.k, spec.amp, spec.R
        r = R * (1.0 + amp * np.cos(k * theta))
        dr = -R * amp * k * np.sin(k * theta)
        ddr = -R * amp * k ** 2 * np.cos(k * theta)
        x = np.stack([r * c, r * s], axis=1)
        dx = np.stack([dr * c - r * s, dr * s + r * c], axis=1)
        ddx = np.stack([ddr * c - 2 * dr * s - r * c, ddr * s + 2 * dr * c - r * s], axis=1)
    return x + np.asarray(spec.center), dx, ddx


def build_boundary(spec):
    """Sample ``spec`` with analytic normals and curvature."""
    n = int(spec.n_boundary)
    if spec.family == "star":
        dense = np.linspace(0, 2 * np.pi, 64 * max(n, abs(spec.k) * 16), endpoint=False)
        if np.min(1.0 + spec.amp * np.cos(spec.k * dense)) <= 0:
            raise CurveSimplicityError("radius function r(theta) is not positive")
    theta = 2 * np.pi * np.arange(n) / n
    x, dx, ddx = _parametrize(spec, theta)
    speed = np.hypot(dx[:, 0], dx[:, 1])
    normals = np.stack([dx[:, 1], -dx[:, 0]], axis=1) / speed[:, None]
    curvature = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed ** 3
    dtheta = 2 * np.pi / n
    arc_weights = speed * dtheta
    rel = x - np.asarray(spec.center)
    area = 0.5 * np.sum(rel[:, 0] * dx[:, 1] - rel[:, 1] * dx[:, 0]) * dtheta
    curve = BoundaryCurve(x, normals, curvature, arc_weights, float(area))
    check_simple(curve)
    return curve


def check_simple(curve):
    """Reject polylines that cannot stand for a simple C^2 curve.

    Besides genuine self-intersection this rejects samplings whose normal
    turns by more than ``MAX_TURNING_ANGLE`` between neighbouring points:
    such a polyline no longer follows the curve it samples.
    """
    if curve.area <= 0:
        raise CurveSimplicityError("curve is not counterclockwise")
    nrm = curve.normals
    cosang = np.clip(np.einsum("ij,ij->i", nrm, np.roll(nrm, -1, axis=0)), -1, 1)
    turning = np.arccos(cosang)
    if turning.max() > MAX_TURNING_ANGLE:
        raise CurveSimplicityError(
            f"normal turns by {turning.max():.3f} rad between samples "
            f"(limit {MAX_TURNING_ANGLE}); increase n_boundary or reduce amp")
    if polyline_self_intersects(curve.points):
        raise CurveSimplicityError("sampled polyline self-intersects")


def polyline_self_intersects(points, chunk=512):
    """True if two non-adjacent edges of the closed polyline intersect."""
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    idx = np.arange(n)

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - \
               (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    for start in range(0, n, chunk):
        i = idx[start:start + chunk, None]
        a, b = p[i[:, 0]][:, None, :], q[i[:, 0]][:, None, :]
        c, d = p[None, :, :], q[None, :, :]
        o1, o2 = orient(a, b, c), orient(a, b, d)
        o3, o4 = orient(c, d, a), orient(c, d, b)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        gap = (idx[None, :] - i) % n
        hit &= (gap > 1) & (gap < n - 1)
        if hit.any():
            return True
    return False


def isoperimetric_deficit(curve):
    """(P - P(B_R)) / P(B_R) with |B_R| = |Omega|."""
    ball_perimeter = C2 * np.sqrt(curve.area)
    return float((curve.perimeter - ball_perimeter) / ball_perimeter)


def alignment_objective(curve, weights=None):
    """x0 -> int |C_Omega - <x - x0, nu>| w dH^1 as a vectorizable callable."""
    w = curve.arc_weights if weights is None else curve.arc_weights * weights
    base = curve.C_Omega - np.einsum("ij,ij->i", curve.points, curve.normals)
    nrm = curve.normals

    def objective(x0):
        x0 = np.asarray(x0, dtype=float)
        vals = base[..., :] + np.tensordot(x0, nrm.T, axes=([-1], [0]))
        return np.sum(np.abs(vals) * w, axis=-1)

    return objective


def normal_deficit(curve, weights=None, x_start=None, tol=1e-10, max_iter=500, seed=0):
    """min over x0 of int |C_Omega - <x - x0, nu>| dH^1, and the minimizer.

    ``weights`` multiplies the arclength measure pointwise (used for the
    flux-weighted variant of the same objective).
    """
    objective = alignment_objective(curve, weights)
    start = curve.centroid if x_start is None else np.asarray(x_start, dtype=float)
    x0, value = minimize_convex_2d(objective, start, scale=0.05 * curve.diameter,
                                   tol=tol, max_iter=max_iter, seed=seed)
    return float(value), x0


def domain_eps(curve, **kwargs):
    iso = isoperimetric_deficit(curve)
    nd, x0 = normal_deficit(curve, **kwargs)
    return GeometryReport(area=curve.area, perimeter=curve.perimeter, C_Omega=curve.C_Omega,
                          iso_deficit=iso, normal_deficit=nd, eps=iso + nd,
                          M0_minus=curve.M0_minus, x0_star=[float(v) for v in x0])


def star_curvature(R, amp, k, theta):
    """Closed-form signed curvature of r(theta) = R(1 + amp cos(k theta))."""
    r = R * (1 + amp * np.cos(k * theta))
    dr = -R * amp * k * np.sin(k * theta)
    ddr = -R * amp * k ** 2 * np.cos(k * theta)
    return (r ** 2 + 2 * dr ** 2 - r * ddr) / (r ** 2 + dr ** 2) ** 1.5


# -- symmetric difference with a disk ----------------------------------------

def disk_segments_intersection_area(segments, center, R):
    """Area of (region) ∩ B_R(center), the region given by its oriented boundary.

    ``segments`` has shape (k, 2, 2); the region lies to the left of every
    segment.  Each segment contributes the signed area of B_R ∩ triangle
    (center, a, b), which is exact.
    """
    seg = np.asarray(segments, dtype=float) - np.asarray(center, dtype=float)
    a, b = seg[:, 0, :], seg[:, 1, :]
    d = b - a
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - R * R
    disc = B * B - A * C
    has = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(has, disc, 0.0))
    Asafe = np.where(A > 0, A, 1.0)
    s1 = np.where(has, np.clip((-B - sq) / Asafe, 0.0, 1.0), 0.0)
    s2 = np.where(has, np.clip((-B + sq) / Asafe, 0.0, 1.0), 0.0)
    total = np.zeros(len(seg))
    for lo, hi in ((np.zeros_like(s1), s1), (s1, s2), (s2, np.ones_like(s2))):
        p = a + lo[:, None] * d
        q = a + hi[:, None] * d
        mid = 0.5 * (p + q)
        inside = np.einsum("ij,ij->i", mid, mid) <= R * R
        cross = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
        dot = np.einsum("ij,ij->i", p, q)
        sector = 0.5 * R * R * np.arctan2(cross, dot)
        total += np.where(inside, 0.5 * cross, sector)
    return float(total.sum())


def segments_area_centroid(segments):
    seg = np.asarray(segments, dtype=float)
    a, b = seg[:, 0, :], seg[:, 1, :]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    area = 0.5 * cross.sum()
    if area <= 0:
        raise PostProcessingError("region is empty")
    cen = ((a + b) * cross[:, None]).sum(axis=0) / (6.0 * area)
    return float(area), cen


def symmetric_difference_area(segments, center, R):
    area, _ = segments_area_centroid(segments)
    inter = disk_segments_intersection_area(segments, center, R)
    return area + np.pi * R * R - 2.0 * inter


def ball_match(region, R=None, tol=1e-9, seed=0):
    """min over x of |E Δ B_R(x)| for a region E given by oriented boundary segments.

    ``region`` is a ``LevelSet`` (its super-level side) or a (k, 2, 2) array.
    ``R`` defaults to the radius of the disk with the same area.
    """
    segments = getattr(region, "segments", region)
    if len(segments) == 0:
        raise PostProcessingError("ball_match: empty region")
    area, cen = segments_area_centroid(segments)
    if R is None:
        R = np.sqrt(area / np.pi)
    fun = lambda x: symmetric_difference_area(segments, x, R)
    x, value = minimize_convex_2d(fun, cen, scale=0.1 * R, tol=tol, seed=seed)
    return max(float(value), 0.0), x
