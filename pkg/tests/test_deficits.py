import numpy as np
import pytest

from conftest import ELLIPSE, STAR, solution
from oracles import pohozaev_disk
from plapsym import (Nonlinearity, W_lower_bound, boundary_deficits, distribution_tables,
                     identity_residual, level_deficits, pohozaev_residual)
from plapsym.deficits import (D1_profile, boundary_flux, hoelder_check, hoelder_deficit_samples,
                              pohozaev_rhs, W_profile)
from plapsym.errors import AssumptionError


def deficits_for(p, h, **kw):
    c, u, f = solution(p, h, **kw)
    tab = distribution_tables(u, f, p)
    return c, u, f, tab, level_deficits(tab, p, f), boundary_deficits(u, c, p)


class TestLevelDeficits:
    def test_W_constant_on_disk_p2(self):
        *_, ld, _ = deficits_for(2.0, 0.05)
        np.testing.assert_allclose(ld.W, 2.0, rtol=1e-12)

    @staticmethod
    def _disk_errors(p, h):
        *_, tab, ld, _ = deficits_for(p, h)
        scale = tab.surf ** (p / (p - 1))
        return np.array([np.max(ld.D1 / scale), np.max(ld.D2 / scale), np.max(ld.Dlevel)])

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_disk_equality_cases_converge(self, p):
        coarse, fine = self._disk_errors(p, 0.05), self._disk_errors(p, 0.025)
        assert np.all(coarse < 0.02)
        assert np.all(fine < coarse / 2)

    def test_ellipse_positive_and_decreasing(self):
        mids = []
        for a in (1.2, 1.1, 1.05):
            *_, ld, _ = deficits_for(2.0, 0.05, family="ellipse", a=a, b=1 / a)
            assert np.all(ld.D2[:-3] > 0) and np.all(ld.Dlevel[:-3] > 0)
            mids.append((np.median(ld.D2), np.median(ld.Dlevel)))
        assert mids[0][0] > mids[1][0] > mids[2][0]
        assert mids[0][1] > mids[1][1] > mids[2][1]

    def test_W_formula_independent(self):
        mu, I, ft = np.array([2.0]), np.array([1.5]), np.array([0.7])
        p, N = 3.0, 2
        expected = 1.5 * 2.0 ** 0.25 * 0.7 + 0.25 * 1.5 * 2.0 ** (-0.75)
        assert W_profile(mu, I, ft, p, N)[0] == pytest.approx(expected, rel=1e-14)

    def test_D1_relates_to_hoelder_deficit(self):
        *_, tab, ld, _ = deficits_for(2.5, 0.05, **ELLIPSE)
        p = 2.5
        expected = tab.surf ** (p / (p - 1)) * ((1 + ld.Df) ** (1 / (p - 1)) - 1)
        np.testing.assert_allclose(D1_profile(tab.int_grad_pm1, tab.int_grad_inv, tab.surf, p),
                                   expected, rtol=1e-9, atol=1e-14)


class TestBoundaryDeficits:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_disk(self, p):
        *_, bd = deficits_for(p, 0.05)
        assert abs(bd.D4) < 1e-6
        assert bd.D3 < 1e-3 * bd.flux_p
        assert abs(bd.D5_center) < 0.01 * bd.flux_p

    def test_positive_on_ellipse(self):
        *_, bd = deficits_for(2.0, 0.05, **ELLIPSE)
        assert bd.D3 > 0 and bd.D4 > 0

    def test_zero_gradient_rejected(self):
        from plapsym import PostProcessingError
        from plapsym.solver import Field
        _, u, _ = solution(2.0, 0.1)
        with pytest.raises(PostProcessingError):
            boundary_flux(Field(u.mesh, np.zeros_like(u.values), 2.0))


class TestIdentity:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_disk_both_sides_small(self, p):
        c, u, f, *_, bd = deficits_for(p, 0.05)
        ir = identity_residual(u, f, c, bd)
        assert ir.resid <= 0.05
        assert abs(ir.lhs) <= 0.01 * ir.scale and abs(ir.rhs) <= 0.01 * ir.scale

    def test_ellipse(self):
        c, u, f, *_, bd = deficits_for(2.0, 0.03, **ELLIPSE)
        ir = identity_residual(u, f, c, bd)
        assert ir.lhs > 0 and ir.rhs > 0
        assert ir.resid <= 0.05

    def test_star(self):
        c, u, f, *_, bd = deficits_for(2.5, 0.03, **STAR)
        ir = identity_residual(u, f, c, bd)
        assert ir.lhs > 0 and ir.rhs > 0
        assert ir.resid <= 0.08


class TestPohozaev:
    def test_disk_p2(self):
        c, u, f = solution(2.0, 0.03)
        pr = pohozaev_residual(u, f, c, x0=(0.0, 0.0))
        assert pr.lhs == pytest.approx(np.pi / 4, rel=0.03)
        assert pr.rhs == pytest.approx(np.pi / 4, rel=0.03)

    def test_disk_p3_against_radial_quadrature(self):
        c, u, f = solution(3.0, 0.03)
        lhs, rhs = pohozaev_disk(3.0)
        assert lhs == pytest.approx(rhs, rel=1e-10)  # the oracle satisfies the identity itself
        pr = pohozaev_residual(u, f, c)
        assert pr.lhs == pytest.approx(lhs, rel=0.03)
        assert pr.rhs == pytest.approx(lhs, rel=0.03)

    def test_affine_in_x0(self):
        c, u, f = solution(2.5, 0.05, **STAR)
        pr = pohozaev_residual(u, f, c)
        for x0 in ([0.3, -0.2], [-1.0, 2.0], [5.0, 5.0]):
            diff = pohozaev_rhs(u, x0) - pohozaev_rhs(u, (0.0, 0.0))
            assert diff == pytest.approx(np.dot(x0, pr.rhs_gradient), abs=1e-8)


class TestHoelder:
    def test_two_atom_example(self):
        assert hoelder_deficit_samples([1.0, 2.0], [0.5, 0.5], 2.0) == pytest.approx(0.125, abs=1e-15)

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_disk_small_and_converging(self, p):
        coarse = np.max(np.abs(deficits_for(p, 0.05)[4].Df))
        fine = np.max(np.abs(deficits_for(p, 0.025)[4].Df))
        assert coarse < 0.02 and fine < coarse / 2

    def test_ellipse_positive(self):
        *_, ld, _ = deficits_for(2.0, 0.05, **ELLIPSE)
        assert np.all(ld.Df > 0)

    def test_deviation_vanishes_with_deficit(self):
        _, u, _, tab, ld, _ = deficits_for(3.0, 0.05)
        hc = hoelder_check(u, tab, 3.0)
        assert np.all(hc.deviation >= 0)
        small = ld.Df < 1e-4
        assert np.all(hc.deviation[small] <= 0.05 * hc.beta[small])


class TestWLowerBound:
    def test_p_equals_n(self):
        assert W_lower_bound(Nonlinearity.constant(1.0), 2.0, np.pi, 0.25) == pytest.approx(2.0)

    def test_p3(self):
        assert W_lower_bound(Nonlinearity.constant(1.0), 3.0, np.pi, 0.5) == pytest.approx(np.pi ** 0.25 / 4)

    def test_p_below_n(self):
        assert W_lower_bound(Nonlinearity.constant(1.0), 1.5, np.pi, 0.2) == pytest.approx(np.pi ** -0.5)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_linear_in_phi0(self, p):
        one = W_lower_bound(Nonlinearity.constant(1.0), p, 2.0, 0.3)
        two = W_lower_bound(Nonlinearity.constant(2.0), p, 2.0, 0.3)
        assert two == pytest.approx(2 * one)

    def test_names_failed_sandwich(self):
        with pytest.raises(AssumptionError, match="N/\\(N-p\\)"):
            W_lower_bound(Nonlinearity.affine(1.0, 10.0), 1.5, np.pi, 1.0)

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_disk_holds(self, p):
        c, u, f, tab, ld, _ = deficits_for(p, 0.05)
        assert ld.W.min() >= W_lower_bound(f, p, c.area, u.max) - 1e-3


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("shape", ["disk", "ellipse", "star"])
def test_all_deficits_nonnegative(p, shape):
    kw = {"disk": {}, "ellipse": ELLIPSE, "star": STAR}[shape]
    *_, tab, ld, bd = deficits_for(p, 0.05, **kw)
    slack = 1e-9 * np.max(tab.surf ** (p / (p - 1)))
    for name in ("D1", "D2", "Dlevel", "Df"):
        assert np.all(getattr(ld, name) >= -slack), name
    assert bd.D3 >= -1e-12 and bd.D4 >= -1e-12 and bd.D5 >= -1e-12
