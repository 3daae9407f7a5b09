"""scikit-learn style front ends over the functional API.

``PLaplaceSolver`` fits a discrete solution to a domain and predicts u at
points, ``SchwarzSymmetrizer`` fits the radial rearrangement of a solution
and transforms points to u* values, and ``SymmetryAnalyzer`` fits the full
deficit report of a fitted solver.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from ._p1 import evaluate_at
from .deficits import (boundary_deficits, identity_residual, level_deficits,
                       pohozaev_residual, W_lower_bound)
from .errors import ConfigError
from .geometry import BoundaryCurve, DomainSpec, build_boundary, domain_eps
from .levelsets import (critical_measure, distribution_tables, l1_distance,
                        schwarz_rearrangement)
from .mesh import triangulate
from .solver import Field, Nonlinearity, SolverConfig, solve


def _as_curve(X):
    if isinstance(X, BoundaryCurve):
        return X
    if isinstance(X, DomainSpec):
        return build_boundary(X)
    if isinstance(X, dict):
        return build_boundary(DomainSpec(**X))
    raise ConfigError(f"expected a DomainSpec, BoundaryCurve or dict, got {type(X).__name__}")


def _as_nonlinearity(f):
    return f if isinstance(f, Nonlinearity) else Nonlinearity.parse(f)


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class PLaplaceSolver(BaseEstimator):
    """Discrete solution of -Delta_p u = f(u) with zero boundary values.

    ``fit(X)`` takes a ``DomainSpec`` (or a dict of its fields, or an already
    sampled ``BoundaryCurve``); ``predict(points)`` returns u with zero
    extension outside the domain.
    """

    def __init__(self, p=2.0, f="constant:1", h=0.05, delta_reg=None, picard_tol=1e-8,
                 picard_max=500, cg_tol=1e-12, damping=0.7):
        self.p = p
        self.f = f
        self.h = h
        self.delta_reg = delta_reg
        self.picard_tol = picard_tol
        self.picard_max = picard_max
        self.cg_tol = cg_tol
        self.damping = damping

    def fit(self, X, y=None):
        self.curve_ = _as_curve(X)
        self.nonlinearity_ = _as_nonlinearity(self.f)
        cfg = SolverConfig(p=float(self.p), delta_reg=self.delta_reg, picard_tol=self.picard_tol,
                           picard_max=int(self.picard_max), cg_tol=self.cg_tol,
                           damping=self.damping)
        self.mesh_ = triangulate(self.curve_, float(self.h))
        self.field_ = solve(self.mesh_, self.nonlinearity_, cfg)
        self.n_iter_ = self.field_.info["iterations"]
        return self

    def predict(self, X):
        _check_fitted(self, "field_")
        pts = check_array(X, ensure_min_features=2)
        if pts.shape[1] != 2:
            raise ConfigError("points must have two columns")
        return evaluate_at(self.mesh_, self.field_.values, pts)

    def score(self, X, y):
        """Negative max-norm error against reference values ``y``."""
        return -float(np.max(np.abs(self.predict(X) - np.asarray(y, dtype=float))))


class SchwarzSymmetrizer(TransformerMixin, BaseEstimator):
    """Radially nonincreasing rearrangement u* of a fitted field."""

    def __init__(self, n_levels=1024, seed=0):
        self.n_levels = n_levels
        self.seed = seed

    def fit(self, X, y=None):
        field = X.field_ if isinstance(X, PLaplaceSolver) else X
        if not isinstance(field, Field):
            raise ConfigError("SchwarzSymmetrizer.fit expects a Field or a fitted PLaplaceSolver")
        self.field_ = field
        self.profile_ = schwarz_rearrangement(field, int(self.n_levels))
        return self

    def transform(self, X):
        """u* at the given points (the profile is centred at the origin)."""
        _check_fitted(self, "profile_")
        pts = check_array(X, ensure_min_features=2)
        return self.profile_.at(pts)

    def l1_distance(self):
        """min over x0 of int |u(x) - u*(x + x0)| dx and the minimizer."""
        _check_fitted(self, "profile_")
        return l1_distance(self.field_, self.profile_, seed=self.seed)


class SymmetryAnalyzer(BaseEstimator):
    """Level-set and boundary deficits, identity residuals and the domain deficit.

    ``fit`` takes a fitted ``PLaplaceSolver``.
    """

    def __init__(self, t_levels=64, identity_levels=512, sigma_fracs=(0.05, 0.1, 0.15, 0.2, 0.25,
                                                                     0.3, 0.35, 0.4), seed=0):
        self.t_levels = t_levels
        self.identity_levels = identity_levels
        self.sigma_fracs = sigma_fracs
        self.seed = seed

    def fit(self, X, y=None):
        if not isinstance(X, PLaplaceSolver):
            raise ConfigError("SymmetryAnalyzer.fit expects a fitted PLaplaceSolver")
        _check_fitted(X, "field_")
        u, f, curve, p = X.field_, X.nonlinearity_, X.curve_, X.field_.p
        self.geometry_ = domain_eps(curve, seed=self.seed)
        self.tables_ = distribution_tables(u, f, p, int(self.t_levels))
        self.level_deficits_ = level_deficits(self.tables_, p, f)
        self.boundary_deficits_ = boundary_deficits(u, curve, p, seed=self.seed)
        self.identity_ = identity_residual(u, f, curve, self.boundary_deficits_, p,
                                           int(self.identity_levels))
        self.pohozaev_ = pohozaev_residual(u, f, curve, p, x0=self.boundary_deficits_.x0)
        self.W_lower_ = W_lower_bound(f, p, curve.area, u.max)
        sig = np.asarray(self.sigma_fracs, dtype=float) * float(u.grad_norm.max())
        self.critical_measure_ = critical_measure(u, sig)
        return self

    def transform(self, X=None):
        """Per-level deficit table as a (levels, 6) array: t, W, D1, D2, Dlevel, Df."""
        _check_fitted(self, "level_deficits_")
        ld = self.level_deficits_
        return np.column_stack([ld.t, ld.W, ld.D1, ld.D2, ld.Dlevel, ld.Df])
