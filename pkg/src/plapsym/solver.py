"""P1 finite elements for -div(|grad u|^{p-2} grad u) = f(u), u = 0 on the boundary.

The nonlinear problem is solved by damped Picard (Kacanov) iteration: the
coefficient (|grad u|^2 + delta^2)^{(p-2)/2} and the source f(u) are frozen at
the previous iterate, which leaves an SPD linear system per step.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import AssumptionError, ConfigError, ConvergenceError, PositivityError

log = logging.getLogger(__name__)

N_DIM = 2


@dataclass(frozen=True)
class Nonlinearity:
    """f(s) = c0 (constant), c0 + c1 s (affine) or a piecewise-linear table."""

    kind: str = "constant"
    c0: float = 1.0
    c1: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "table"):
            raise ConfigError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "table":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or len(tab) < 2:
                raise ConfigError("table nonlinearity needs >= 2 (s, f) samples")
            if np.any(np.diff(tab[:, 0]) <= 0) or tab[0, 0] > 0:
                raise ConfigError("table abscissae must increase and start at s <= 0")
            object.__setattr__(self, "table", tuple(map(tuple, tab.tolist())))

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @classmethod
    def affine(cls, c0, c1):
        return cls("affine", float(c0), float(c1))

    @classmethod
    def from_samples(cls, s, f):
        return cls("table", table=tuple(zip(map(float, s), map(float, f))))

    @classmethod
    def parse(cls, text):
        """``"1.0"``, ``"constant:1"``, ``"affine:1,0.5"`` or ``"table:0:1,1:2"``."""
        text = str(text).strip()
        kind, _, rest = text.partition(":")
        try:
            if not rest:
                return cls.constant(float(kind))
            if kind == "constant":
                return cls.constant(float(rest))
            if kind == "affine":
                c0, c1 = (float(v) for v in rest.split(","))
                return cls.affine(c0, c1)
            if kind == "table":
                pairs = [item.split(":") for item in rest.split(",")]
                return cls("table", table=tuple((float(s), float(v)) for s, v in pairs))
        except ValueError as exc:
            raise ConfigError(f"cannot parse nonlinearity {text!r}: {exc}") from exc
        raise ConfigError(f"cannot parse nonlinearity {text!r}")

    def describe(self):
        if self.kind == "constant":
            return f"constant:{self.c0!r}"
        if self.kind == "affine":
            return f"affine:{self.c0!r},{self.c1!r}"
        return "table:" + ",".join(f"{s!r}:{v!r}" for s, v in self.table)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full_like(s, self.c0)
        if self.kind == "affine":
            return self.c0 + self.c1 * s
        tab = np.asarray(self.table)
        return np.interp(s, tab[:, 0], tab[:, 1])

    def primitive(self, s):
        """F(s) = int_0^s f."""
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return self.c0 * s
        if self.kind == "affine":
            return self.c0 * s + 0.5 * self.c1 * s * s
        tab = np.asarray(self.table)
        knots = tab[:, 0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(knots) * (tab[1:, 1] + tab[:-1, 1]))])
        cum -= np.interp(0.0, knots, cum)
        j = np.clip(np.searchsorted(knots, s, side="right") - 1, 0, len(knots) - 1)
        fs = self(s)
        return cum[j] + 0.5 * (s - knots[j]) * (tab[j, 1] + fs)

    def _grid(self, M):
        pts = np.linspace(0.0, M, 2049)
        if self.kind == "table":
            knots = np.asarray(self.table)[:, 0]
            pts = np.union1d(pts, knots[(knots >= 0) & (knots <= M)])
        return pts

    def phi0(self, M):
        """Lower bound of f on [0, M]."""
        return float(np.min(self(self._grid(M))))

    def sup(self, M):
        return float(np.max(self(self._grid(M))))

    def lipschitz(self, M):
        s = self._grid(M)
        if self.kind != "table":
            return abs(self.c1) if self.kind == "affine" else 0.0
        return float(np.max(np.abs(np.diff(self(s)) / np.diff(s))))

    def check_positive(self, M):
        """phi0 = min f on [0, M]; raises unless it is positive."""
        phi0 = self.phi0(M)
        if phi0 <= 0:
            raise AssumptionError(f"f must be positive on [0, {M:g}]; min is {phi0:g}")
        return phi0

    def check_assumptions(self, p, M, N=N_DIM):
        """Verify f >= phi0 > 0 on [0, M] and assumption (a) when p < N.

        Returns phi0.  For p < N the largest nonincreasing minorant
        phi(s) = min_{r <= s} f(r) is used and f <= N/(N-p) phi is checked on
        a fine grid.
        """
        phi0 = self.check_positive(M)
        fs = self(self._grid(M))
        if p < N:
            phi = np.minimum.accumulate(fs)
            ratio = float(np.max(fs / phi))
            limit = N / (N - p)
            if ratio > limit * (1 + 1e-12):
                raise AssumptionError(
                    f"assumption (a) fails: phi <= f <= N/(N-p) phi needs max f/phi <= "
                    f"{limit:g}, got {ratio:g}")
        return phi0


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    delta_reg: float = None
    picard_tol: float = 1e-8
    picard_max: int = 500
    cg_tol: float = 1e-12
    damping: float = 0.7
    residual_tol: float = 1e-6

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.delta_reg is not None and not self.delta_reg > 0:
            raise ConfigError("delta_reg must be positive")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class Field:
    mesh: object
    values: np.ndarray
    p: float = 2.0
    info: dict = field(default_factory=dict)

    @cached_property
    def gradient(self):
        G = self.mesh.basis_gradients
        return np.einsum("ti,tik->tk", self.values[self.mesh.triangles], G)

    @cached_property
    def grad_norm(self):
        return np.hypot(self.gradient[:, 0], self.gradient[:, 1])

    @property
    def max(self):
        return float(self.values.max())

    @property
    def argmax(self):
        return self.mesh.vertices[int(np.argmax(self.values))]

    def to_text(self):
        return "".join(f"{v!r}\n" for v in self.values.tolist())

    @classmethod
    def from_text(cls, mesh, text, p=2.0):
        vals = np.array([float(r) for r in text.split()])
        if len(vals) != mesh.n_vertices:
            raise ConfigError("u.txt length does not match the mesh")
        return cls(mesh, vals, p)

    def translated(self, shift):
        return Field(self.mesh.translated(shift), self.values, self.p, dict(self.info))


# -- assembly ------------------------------------------------------------------

def _pattern(mesh):
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], (len(tri), 3, 3)).ravel()
    cols = np.broadcast_to(tri[:, None, :], (len(tri), 3, 3)).ravel()
    return rows, cols


def stiffness_matrix(mesh, coef):
    G = mesh.basis_gradients
    local = np.einsum("tik,tjk->tij", G, G) * (coef * mesh.signed_areas)[:, None, None]
    rows, cols = _pattern(mesh)
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def mass_matrix(mesh):
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.signed_areas[:, None, None] * ref[None]
    rows, cols = _pattern(mesh)
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def coefficient(grad_norm, p, delta):
    return (grad_norm ** 2 + delta ** 2) ** ((p - 2.0) / 2.0)


def _pcg(A, b, x0, rtol):
    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda r: r / diag)
    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, M=precond, maxiter=20 * A.shape[0])
    if info != 0:
        raise ConvergenceError(f"conjugate gradients stopped with info={info}", last_iterate=x)
    return x


def weak_residual(field_, f, delta=0.0, interior_only=True):
    """r_i = int a(grad u) grad u . grad phi_i - int f(u) phi_i for every hat function."""
    mesh = field_.mesh
    a = coefficient(field_.grad_norm, field_.p, delta)
    r = stiffness_matrix(mesh, a) @ field_.values - mass_matrix(mesh) @ f(field_.values)
    if interior_only:
        r = r[~mesh.boundary_flag]
    return r


def solve(mesh, f, cfg=None):
    """Weak P1 solution of the p-Laplace Dirichlet problem on ``mesh``."""
    cfg = cfg or SolverConfig()
    p = cfg.p
    interior = ~mesh.boundary_flag
    M_mass = mass_matrix(mesh)
    Mi = M_mass[interior]

    def load(u):
        return Mi @ f(u)

    # p = 2 problem with the constant source phi0 as the initial iterate
    u = np.zeros(mesh.n_vertices)
    K2 = stiffness_matrix(mesh, np.ones(mesh.n_triangles))[interior][:, interior]
    b0 = Mi @ np.ones(mesh.n_vertices)
    u[interior] = _pcg(K2, b0, None, cfg.cg_tol)
    u *= f.phi0(u.max())
    diameter = float(np.ptp(mesh.vertices, axis=0).max())
    delta = cfg.delta_reg if cfg.delta_reg is not None else 1e-6 * u.max() / diameter

    history = []
    converged = False
    for it in range(1, cfg.picard_max + 1):
        gnorm = np.hypot(*np.einsum("ti,tik->kt", u[mesh.triangles], mesh.basis_gradients))
        a = coefficient(gnorm, p, delta)
        A = stiffness_matrix(mesh, a)
        b = load(u)
        v = u.copy()
        v[interior] = _pcg(A[interior][:, interior], b, u[interior], cfg.cg_tol)
        u_new = u + cfg.damping * (v - u)
        change = np.linalg.norm(u_new - u) / max(np.linalg.norm(u_new), 1e-300)
        u = u_new
        if change <= cfg.picard_tol:
            gnorm = np.hypot(*np.einsum("ti,tik->kt", u[mesh.triangles], mesh.basis_gradients))
            r = (stiffness_matrix(mesh, coefficient(gnorm, p, delta)) @ u)[interior] - load(u)
            res = float(np.max(np.abs(r)) / max(np.max(np.abs(load(u))), 1e-300))
        else:
            res = float("nan")
        history.append((change, res))
        if change <= cfg.picard_tol and res <= cfg.residual_tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"Picard iteration did not converge in {cfg.picard_max} steps "
            f"(last change {history[-1][0]:.3e})", last_iterate=u, history=history)
    if u[interior].min() < -1e-10 * max(u.max(), 1e-300):
        raise PositivityError(f"solution lost positivity: min interior value {u[interior].min():.3e}")
    log.debug("Picard converged in %d iterations (p=%g)", it, p)
    return Field(mesh, u, p, {"iterations": it, "history": history, "delta_reg": delta,
                              "residual": history[-1][1]})


# -- closed forms and diagnostics ----------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """u(r) = ((p-1)/p) (c/N)^{1/(p-1)} (R^{p'} - r^{p'}) on the ball B_R."""

    p: float
    N: int
    R: float
    c: float

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    def __call__(self, r):
        r = np.minimum(np.abs(np.asarray(r, dtype=float)), self.R)
        pc = self.p_conj
        return (self.p - 1) / self.p * (self.c / self.N) ** (1 / (self.p - 1)) * (self.R ** pc - r ** pc)

    def grad_norm(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return (self.c * r / self.N) ** (1.0 / (self.p - 1))

    @property
    def max(self):
        return float(self(0.0))


def radial_oracle(p, N=2, R=1.0, c=1.0):
    if not (p > 1 and N >= 2 and R > 0 and c > 0):
        raise ConfigError("radial oracle needs p > 1, N >= 2, R > 0, c > 0")
    return RadialProfile(float(p), int(N), float(R), float(c))


@dataclass
class GradientBoundReport:
    grad_max: float
    grad_max_boundary: float
    M: float
    f_sup: float
    beta: float
    bound: float
    holds: bool
    P_max: float
    P_argmax: list
    critical_point: list
    argmax_to_critical: float
    argmax_near_critical: bool


def gradient_bound_check(u, f, curve, N=N_DIM):
    """Evaluate the P-function and the explicit gradient bound it yields.

    P = (1/p')|grad u|^p - int_u^M f + beta (u - M) with
    beta = (N-1) M0^- |grad u|_{L^inf(boundary)}^{p-1} + 1; the maximum
    principle for P gives |grad u|^p <= M sup f + M beta.
    """
    mesh, p = u.mesh, u.p
    pc = p / (p - 1.0)
    M = u.max
    g = u.grad_norm
    _, owners = mesh.boundary_edges
    g_bdry = float(g[owners].max())
    beta = (N - 1) * curve.M0_minus * g_bdry ** (p - 1) + 1.0
    f_sup = f.sup(M)
    bound = (M * f_sup + M * beta) ** (1.0 / p)
    u_tri = u.values[mesh.triangles].mean(axis=1)
    P = g ** p / pc - (f.primitive(M) - f.primitive(u_tri)) + beta * (u_tri - M)
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    k_max = int(np.argmax(P))
    crit = mesh.vertices[int(np.argmax(u.values))]
    dist = float(np.linalg.norm(centroids[k_max] - crit))
    grad_max = float(g.max())
    return GradientBoundReport(
        grad_max=grad_max, grad_max_boundary=g_bdry, M=M, f_sup=f_sup, beta=beta,
        bound=bound, holds=grad_max <= bound, P_max=float(P[k_max]),
        P_argmax=centroids[k_max].tolist(), critical_point=crit.tolist(),
        argmax_to_critical=dist, argmax_near_critical=dist <= 2 * mesh.h)
