"""Level sets of a P1 field and the distribution functions built on them.

The per-level integrals use the coarea structure of P1 data: inside a
triangle the gradient is constant, so a level segment carries exactly one
value of |grad u|.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ._optimize import minimize_convex_2d
from ._p1 import level_segments, sample_on_grid, superlevel_integral
from .errors import LevelSetError

N_DIM = 2
TABLE_COLUMNS = ("t", "mu", "surf", "I", "K", "int_grad_pm1", "int_grad_inv", "beta")


@dataclass
class LevelSet:
    t: float
    segments: np.ndarray
    grad: np.ndarray
    owners: np.ndarray

    @property
    def seg_lengths(self):
        d = self.segments[:, 1] - self.segments[:, 0]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def length(self):
        return float(self.seg_lengths.sum())

    @property
    def enclosed_area(self):
        """Area of the super-level set by Green's formula on the oriented segments."""
        a, b = self.segments[:, 0], self.segments[:, 1]
        return float(0.5 * np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))

    def integrate(self, values):
        return float(np.sum(self.seg_lengths * values))


def extract_level(u, t):
    """Marching-triangles extraction of {u = t} for 0 < t < max u."""
    M = u.max
    if not 0 < t < M:
        raise LevelSetError(f"level t={t!r} outside (0, {M!r})")
    seg, own = level_segments(u.mesh, u.values, t, u.gradient)
    return LevelSet(float(t), seg, u.grad_norm[own], own)


def default_t_grid(M, t_levels=64, band=0.02):
    return np.linspace(band * M, (1.0 - band) * M, t_levels)


@dataclass
class DistributionTables:
    t_grid: np.ndarray
    mu: np.ndarray
    surf: np.ndarray
    I: np.ndarray
    K: np.ndarray
    int_grad_pm1: np.ndarray
    int_grad_inv: np.ndarray
    beta: np.ndarray
    M: float
    p: float
    area: float
    enclosed: np.ndarray = None
    gauss_green_mismatch: np.ndarray = None
    sigma_min: float = 0.0
    extra: dict = field(default_factory=dict)

    def columns(self):
        cols = {name: getattr(self, name if name != "t" else "t_grid") for name in TABLE_COLUMNS}
        cols.update(self.extra)
        return cols

    def to_csv(self, header_comment=None):
        cols = self.columns()
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(cols))
        for row in zip(*cols.values()):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def per_level_integrals(u, t, p, sigma_min):
    lev = extract_level(u, t)
    if len(lev.segments) == 0:
        raise LevelSetError(f"empty level set at interior level t={t!r}")
    ell = lev.seg_lengths
    g = lev.grad
    return {
        "surf": float(ell.sum()),
        "int_grad_pm1": float(np.sum(ell * g ** (p - 1))),
        "int_grad_inv": float(np.sum(ell / np.maximum(g, sigma_min))),
        "enclosed": lev.enclosed_area,
    }


def beta_from_averages(avg_inv, avg_pm1, p):
    """beta_t = (avg 1/|grad u|)^{1/p'} / (avg |grad u|^{p-1})^{1/(p(p-1))}."""
    pc = p / (p - 1.0)
    return avg_inv ** (1.0 / pc) / avg_pm1 ** (1.0 / (p * (p - 1.0)))


def distribution_tables(u, f, p=None, t_levels=64, t_grid=None):
    """mu, I, K, level-set lengths and |grad u| moments on a grid of levels.

    ``I(t)`` integrates the P1 interpolant of f(u) over {u > t}, matching the
    load vector of the solver.  The Gauss-Green mismatch
    |I(t) - int_{u=t} |grad u|^{p-1}| / I(t) is stored per level.
    """
    p = u.p if p is None else p
    M = u.max
    t_grid = default_t_grid(M, t_levels) if t_grid is None else np.asarray(t_grid, dtype=float)
    sigma_min = 1e-8 * float(u.grad_norm.max())
    fv = f(u.values)
    expo = (p - N_DIM) / (N_DIM * (p - 1.0))
    rows = {k: [] for k in ("mu", "I", "surf", "int_grad_pm1", "int_grad_inv", "enclosed")}
    for t in t_grid:
        rows["mu"].append(superlevel_integral(u.mesh, u.values, t))
        rows["I"].append(superlevel_integral(u.mesh, u.values, t, fv))
        for key, val in per_level_integrals(u, t, p, sigma_min).items():
            rows[key].append(val)
    arr = {k: np.asarray(v) for k, v in rows.items()}
    K = arr["I"] ** (p / (p - 1.0)) * arr["mu"] ** expo
    avg_inv = arr["int_grad_inv"] / arr["surf"]
    avg_pm1 = arr["int_grad_pm1"] / arr["surf"]
    beta = beta_from_averages(avg_inv, avg_pm1, p)
    mismatch = np.abs(arr["I"] - arr["int_grad_pm1"]) / arr["I"]
    return DistributionTables(
        t_grid=t_grid, mu=arr["mu"], surf=arr["surf"], I=arr["I"], K=K,
        int_grad_pm1=arr["int_grad_pm1"], int_grad_inv=arr["int_grad_inv"], beta=beta,
        M=M, p=p, area=u.mesh.area, enclosed=arr["enclosed"],
        gauss_green_mismatch=mismatch, sigma_min=sigma_min)


# -- Schwarz rearrangement -----------------------------------------------------

@dataclass
class SchwarzProfile:
    """Radially nonincreasing u* equimeasurable with u, centred at the origin.

    Stored as decreasing levels ``t`` against increasing radii ``r`` with
    pi r^2 = mu(t).
    """

    r: np.ndarray
    t: np.ndarray

    @property
    def M(self):
        return float(self.t[0])

    @property
    def radius(self):
        return float(self.r[-1])

    def r_star(self, t):
        return np.interp(t, self.t[::-1], self.r[::-1])

    def __call__(self, radius):
        return np.interp(np.abs(radius), self.r, self.t, right=0.0)

    def at(self, points, center=(0.0, 0.0)):
        pts = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
        return self(np.hypot(pts[..., 0], pts[..., 1]))

    def distribution(self, t):
        return np.pi * self.r_star(t) ** 2

    def gradient_p_norm(self, p):
        """int |grad u*|^p dx for the piecewise-linear radial profile."""
        dr = np.diff(self.r)
        dt = -np.diff(self.t)
        ok = dr > 0
        slope = dt[ok] / dr[ok]
        ring = np.pi * (self.r[1:][ok] ** 2 - self.r[:-1][ok] ** 2)
        return float(np.sum(slope ** p * ring))


def schwarz_rearrangement(u, n_levels=1024):
    """u*(x) = sup{t : mu(t) <= pi |x|^2}, by monotone inversion of mu."""
    M = u.max
    t = np.linspace(0.0, M, n_levels + 1)
    mu = np.array([superlevel_integral(u.mesh, u.values, s) for s in t[:-1]] + [0.0])
    mu[0] = u.mesh.area
    # make mu strictly decreasing so that the inverse is single valued
    mu = mu + 1e-14 * mu[0] * (n_levels - np.arange(n_levels + 1)) / n_levels
    mu = np.minimum.accumulate(mu)
    r = np.sqrt(mu / np.pi)
    return SchwarzProfile(r=r[::-1].copy(), t=t[::-1].copy())


def l1_grid(u, spacing=None, pad=None):
    """Cartesian midpoint grid over the padded bounding box, anchored at its corner."""
    mesh = u.mesh
    spacing = mesh.h / 2 if spacing is None else spacing
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    pad = float(np.hypot(*(hi - lo))) if pad is None else pad
    nx = int(np.ceil((hi[0] - lo[0] + 2 * pad) / spacing))
    ny = int(np.ceil((hi[1] - lo[1] + 2 * pad) / spacing))
    xs = lo[0] - pad + (np.arange(nx) + 0.5) * spacing
    ys = lo[1] - pad + (np.arange(ny) + 0.5) * spacing
    return xs, ys, spacing


def l1_distance(u, ustar=None, x_start=None, spacing=None, tol=1e-9, seed=0):
    """min over x0 of int |u(x) - u*(x + x0)| dx and the minimizer x0.

    u is extended by zero outside the mesh; u*(. + x0) is centred at -x0.
    """
    ustar = schwarz_rearrangement(u) if ustar is None else ustar
    xs, ys, dx = l1_grid(u, spacing)
    ugrid = sample_on_grid(u.mesh, u.values, xs, ys)
    X, Y = np.meshgrid(xs, ys)
    cell = dx * dx

    def objective(x0):
        rad = np.hypot(X + x0[0], Y + x0[1])
        return float(np.abs(ugrid - ustar(rad)).sum() * cell)

    if x_start is None:
        mass = ugrid.sum()
        x_start = -np.array([(ugrid * X).sum() / mass, (ugrid * Y).sum() / mass])
    x0, value = minimize_convex_2d(objective, np.asarray(x_start, dtype=float),
                                   scale=0.1 * ustar.radius, tol=tol, seed=seed)
    return float(value), x0


# -- near-critical set ---------------------------------------------------------

@dataclass
class CriticalMeasure:
    sigma: np.ndarray
    measure: np.ndarray
    slope: float
    log_const: float


def critical_measure(u, sigma_grid):
    """M_u(sigma) = |{|grad u| <= sigma}| by triangle-area accumulation, plus a log-log fit."""
    sigma = np.asarray(sigma_grid, dtype=float)
    g = u.grad_norm
    order = np.argsort(g)
    cum = np.concatenate([[0.0], np.cumsum(np.abs(u.mesh.signed_areas)[order])])
    measure = cum[np.searchsorted(g[order], sigma, side="right")]
    ok = (measure > 0) & (sigma > 0) & (measure < u.mesh.area)
    if ok.sum() >= 2:
        slope, log_c = np.polyfit(np.log(sigma[ok]), np.log(measure[ok]), 1)
    else:
        slope, log_c = float("nan"), float("nan")
    return CriticalMeasure(sigma, measure, float(slope), float(log_c))
