"""Level-set and boundary deficits, the integral identity linking them, and Pohozaev.

Boundary data come from the mesh: on each boundary edge u vanishes at both
endpoints, so the P1 gradient of the adjacent triangle is normal to the edge
and |du/dnu| is its magnitude.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from ._optimize import minimize_convex_2d
from .errors import PostProcessingError
from .geometry import C2, ball_match, isoperimetric_deficit
from .levelsets import N_DIM, distribution_tables, extract_level

# -- per-level deficits ----------------------------------------------------------


def W_profile(mu, I, f_at_t, p, N=N_DIM):
    """W(t) = p' mu^{(p-N)/(N(p-1))} f(t) + (p-N)/(N(p-1)) I mu^{(p-pN)/(N(p-1))}."""
    pc = p / (p - 1.0)
    k = (p - N) / (N * (p - 1.0))
    return pc * mu ** k * f_at_t + k * I * mu ** ((p - p * N) / (N * (p - 1.0)))


def D1_profile(int_grad_pm1, int_grad_inv, surf, p):
    return int_grad_pm1 ** (1.0 / (p - 1.0)) * int_grad_inv - surf ** (p / (p - 1.0))


def D2_profile(surf, mu, p):
    pc = p / (p - 1.0)
    return surf ** pc - (C2 * np.sqrt(mu)) ** pc


def Dlevel_profile(surf, mu):
    ball = C2 * np.sqrt(mu)
    return (surf - ball) / ball


@dataclass
class LevelDeficits:
    t: np.ndarray
    W: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    Dlevel: np.ndarray
    Df: np.ndarray

    def columns(self):
        return {"D1": self.D1, "D2": self.D2, "Dlevel": self.Dlevel, "W": self.W, "Df": self.Df}


def level_deficits(tables, p, f):
    """W, D1, D2, the per-level isoperimetric deficit and D_f on the table levels."""
    W = W_profile(tables.mu, tables.I, f(tables.t_grid), p)
    D1 = D1_profile(tables.int_grad_pm1, tables.int_grad_inv, tables.surf, p)
    D2 = D2_profile(tables.surf, tables.mu, p)
    Dl = Dlevel_profile(tables.surf, tables.mu)
    Df = hoelder_deficit(tables, p)
    return LevelDeficits(tables.t_grid, W, D1, D2, Dl, Df)


# -- quantitative Hoelder --------------------------------------------------------


def hoelder_deficit_from_averages(avg_inv, avg_pm1, p):
    """D_f = (avg 1/g)^{p-1} (avg g^{p-1}) - 1."""
    return avg_inv ** (p - 1.0) * avg_pm1 - 1.0


def hoelder_deficit_samples(values, weights, p):
    """D_f for a weighted sample of a positive function (weights = measure of each atom)."""
    g = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    return float(hoelder_deficit_from_averages(np.sum(w / g) / total, np.sum(w * g ** (p - 1)) / total, p))


def hoelder_deficit(tables, p):
    return hoelder_deficit_from_averages(
        tables.int_grad_inv / tables.surf, tables.int_grad_pm1 / tables.surf, p)


def hoelder_rate(Df, p):
    """D_f^{1/p} for p >= 2, (D_f^{p-1} + D_f^{1/(p-1)})^{1/p} for 1 < p < 2."""
    Df = np.maximum(np.asarray(Df, dtype=float), 0.0)
    if p >= 2:
        return Df ** (1.0 / p)
    return (Df ** (p - 1.0) + Df ** (1.0 / (p - 1.0))) ** (1.0 / p)


@dataclass
class HoelderCheck:
    t: np.ndarray
    Df: np.ndarray
    deviation: np.ndarray
    beta: np.ndarray
    ratio: np.ndarray


def hoelder_check(u, tables, p):
    """Mean deviation of 1/|grad u| from beta_t on each level and its ratio to beta_t * rate(D_f).

    The ratio estimates the unknown constant of the quantitative Hoelder
    inequality; it is reported, never asserted.
    """
    dev = np.empty(len(tables.t_grid))
    for i, t in enumerate(tables.t_grid):
        lev = extract_level(u, t)
        g = np.maximum(lev.grad, tables.sigma_min)
        dev[i] = lev.integrate(np.abs(1.0 / g - tables.beta[i])) / lev.length
    Df = hoelder_deficit(tables, p)
    rate = tables.beta * hoelder_rate(Df, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rate > 0, dev / rate, np.nan)
    return HoelderCheck(tables.t_grid, Df, dev, tables.beta, ratio)


# -- boundary quantities ---------------------------------------------------------


@dataclass
class BoundaryFlux:
    """Per boundary edge: length, midpoint, outward unit normal, |du/dnu|."""

    lengths: np.ndarray
    midpoints: np.ndarray
    normals: np.ndarray
    flux: np.ndarray

    def integrate(self, values):
        return float(np.sum(self.lengths * values))

    def moment(self, q):
        return self.integrate(self.flux ** q)


def boundary_flux(u):
    mesh = u.mesh
    edges, owners = mesh.boundary_edges
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    d = b - a
    L = np.hypot(d[:, 0], d[:, 1])
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / L[:, None]
    g = u.grad_norm[owners]
    if not np.any(g > 0):
        raise PostProcessingError("boundary gradient vanishes identically")
    return BoundaryFlux(L, 0.5 * (a + b), normals, g)


def D5_at(bf, curve, p, x0):
    support = np.einsum("ij,ij->i", bf.midpoints - np.asarray(x0, dtype=float), bf.normals)
    return bf.integrate((curve.C_Omega - support) * bf.flux ** p)


@dataclass
class BoundaryDeficits:
    D3: float
    D4: float
    D5: float
    x0: list
    D5_center: float
    flux_p: float
    flux_pm1: float


def boundary_deficits(u, curve, p=None, x_start=None, tol=1e-10, seed=0):
    """D3, D4 and D5 at the flux-weighted alignment centre x0*.

    D5 is affine in x0, so |D5| has no useful minimizer; x0* instead minimizes
    int |C_Omega - <x - x0, nu>| |du/dnu|^p, the flux-weighted counterpart of
    the normal deficit, and D5 is reported (signed) there.
    """
    p = u.p if p is None else p
    pc = p / (p - 1.0)
    bf = boundary_flux(u)
    P = curve.perimeter
    fp, fpm1 = bf.moment(p), bf.moment(p - 1)
    D3 = fp - fpm1 ** pc / P ** (1.0 / (p - 1.0))
    D4 = (P / (C2 * np.sqrt(curve.area))) ** pc - 1.0
    wts = bf.lengths * bf.flux ** p
    base = curve.C_Omega - np.einsum("ij,ij->i", bf.midpoints, bf.normals)

    def objective(x0):
        return float(np.sum(np.abs(base + bf.normals @ np.asarray(x0)) * wts))

    start = curve.centroid if x_start is None else np.asarray(x_start, dtype=float)
    x0, _ = minimize_convex_2d(objective, start, scale=0.05 * curve.diameter, tol=tol, seed=seed)
    return BoundaryDeficits(
        D3=float(D3), D4=float(D4), D5=D5_at(bf, curve, p, x0), x0=[float(v) for v in x0],
        D5_center=D5_at(bf, curve, p, curve.centroid), flux_p=fp, flux_pm1=fpm1)


# -- integral identities ---------------------------------------------------------


def identity_levels(M, n_levels=512):
    """Midpoint levels covering all of (0, M)."""
    return (np.arange(n_levels) + 0.5) * M / n_levels


@dataclass
class IdentityResidual:
    lhs: float
    rhs: float
    resid: float
    scale: float
    level_term: float
    D3_term: float
    D4_term: float
    D5_term: float
    int_WD1: float
    int_WD2: float


def identity_residual(u, f, curve, bdef, p=None, n_levels=512):
    """Both sides of the identity tying the level deficits to the boundary deficits.

    lhs = int_0^M W (D1 + D2) dt + c^{p'} |Omega| / P * D3,
    rhs = (int f(u))^{p'} c^{p'} |Omega| / P^{p'} * D4 + (c^{p'}/N) D5(x0),
    with c = 2 sqrt(pi), P the perimeter.  The t-integral uses its own dense
    midpoint grid over (0, M).  ``resid`` is |lhs - rhs| normalized by the
    larger of |lhs|, |rhs| and (c^{p'}/N) C_Omega int |du/dnu|^p.
    """
    p = u.p if p is None else p
    pc = p / (p - 1.0)
    t = identity_levels(u.max, n_levels)
    tab = distribution_tables(u, f, p, t_grid=t)
    W = W_profile(tab.mu, tab.I, f(t), p)
    D1 = D1_profile(tab.int_grad_pm1, tab.int_grad_inv, tab.surf, p)
    D2 = D2_profile(tab.surf, tab.mu, p)
    dt = u.max / n_levels
    int_WD1 = float(np.sum(W * D1) * dt)
    int_WD2 = float(np.sum(W * D2) * dt)
    cpc = C2 ** pc
    A, P = curve.area, curve.perimeter
    total_f = float(np.sum(np.abs(u.mesh.signed_areas) * f(u.values)[u.mesh.triangles].mean(axis=1)))
    D3_term = cpc * A / P * bdef.D3
    D4_term = total_f ** pc * cpc * A / P ** pc * bdef.D4
    D5_term = cpc / N_DIM * bdef.D5
    lhs = int_WD1 + int_WD2 + D3_term
    rhs = D4_term + D5_term
    scale = cpc / N_DIM * curve.C_Omega * bdef.flux_p
    resid = abs(lhs - rhs) / max(abs(lhs), abs(rhs), scale)
    return IdentityResidual(lhs=float(lhs), rhs=float(rhs), resid=float(resid), scale=float(scale),
                            level_term=int_WD1 + int_WD2, D3_term=float(D3_term),
                            D4_term=float(D4_term), D5_term=float(D5_term),
                            int_WD1=int_WD1, int_WD2=int_WD2)


def _edge_midpoint_quadrature(mesh, values, integrand):
    """int_Omega integrand(u) dx with the edge-midpoint rule (exact for quadratics)."""
    v = values[mesh.triangles]
    mids = 0.5 * (v + np.roll(v, -1, axis=1))
    return float(np.sum(np.abs(mesh.signed_areas) * integrand(mids).mean(axis=1)))


@dataclass
class PohozaevResidual:
    lhs: float
    rhs: float
    x0: list
    rhs_gradient: list

    @property
    def rel_mismatch(self):
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs))


def pohozaev_lhs(u, f, p=None, N=N_DIM):
    """int_Omega N F(u) + ((p - N)/p) u f(u)."""
    p = u.p if p is None else p
    return _edge_midpoint_quadrature(
        u.mesh, u.values, lambda s: N * f.primitive(s) + (p - N) / p * s * f(s))


def pohozaev_rhs(u, x0=(0.0, 0.0), p=None, bf=None):
    """(1/p') int_{boundary} |du/dnu|^p <x - x0, nu>."""
    p = u.p if p is None else p
    bf = boundary_flux(u) if bf is None else bf
    support = np.einsum("ij,ij->i", bf.midpoints - np.asarray(x0, dtype=float), bf.normals)
    return (p - 1.0) / p * bf.integrate(bf.flux ** p * support)


def pohozaev_residual(u, f, curve=None, p=None, x0=(0.0, 0.0)):
    p = u.p if p is None else p
    bf = boundary_flux(u)
    grad = -(p - 1.0) / p * (bf.lengths * bf.flux ** p) @ bf.normals
    return PohozaevResidual(lhs=pohozaev_lhs(u, f, p), rhs=pohozaev_rhs(u, x0, p, bf),
                            x0=[float(v) for v in x0], rhs_gradient=[float(v) for v in grad])


# -- lower bound on W -----------------------------------------------------------


def W_lower_bound(f, p, area, M, N=N_DIM):
    """C1 with W(t) >= C1, split by the sign of p - N.

    Checks the hypotheses on f first (positivity, and the sandwich for p < N).
    """
    phi0 = f.check_assumptions(p, M, N)
    k = (p - N) / (N * (p - 1.0))
    if p == N:
        return p / (p - 1.0) * phi0
    if p > N:
        return k * area ** k * phi0
    return area ** k * phi0


# -- reporting ------------------------------------------------------------------


def isoperimetric_ratios(u, levels_frac=(0.25, 0.5, 0.75), seed=0):
    """(|E_t Δ B|/|E_t|)^2 / D(E_t) on a few super-level sets E_t.

    Estimates the constant of the quantitative isoperimetric inequality from
    below; reported only.
    """
    out = []
    for frac in levels_frac:
        lev = extract_level(u, frac * u.max)
        area = lev.enclosed_area
        asym, _ = ball_match(lev, seed=seed)
        deficit = (lev.length - C2 * np.sqrt(area)) / (C2 * np.sqrt(area))
        ratio = (asym / area) ** 2 / deficit if deficit > 0 else float("nan")
        out.append({"t_frac": frac, "asymmetry": asym / area, "deficit": deficit, "ratio": ratio})
    return out


@dataclass
class DeficitReport:
    config_hash: str
    geometry: dict
    p: float
    M: float
    t: list
    W: list
    D1: list
    D2: list
    Dlevel: list
    hoelder_Df: list
    D3: float
    D4: float
    D5: float
    x0: list
    identity_lhs: float
    identity_rhs: float
    identity_resid: float
    identity_scale: float
    identity_terms: dict
    pohozaev_lhs: float
    pohozaev_rhs: float
    W_min: float
    W_lower: float
    W_lower_holds: bool
    l1_distance: float
    l1_x0: list
    M_u: dict
    gradient_bound: dict
    gauss_green_max_mismatch: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
