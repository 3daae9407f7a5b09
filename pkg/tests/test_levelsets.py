import numpy as np
import pytest

from conftest import ELLIPSE, mesh_for, solution
from oracles import radial_u
from plapsym import LevelSetError, critical_measure, distribution_tables, extract_level
from plapsym.levelsets import l1_distance, schwarz_rearrangement
from plapsym._p1 import superlevel_area
from plapsym.solver import Field


def oracle_field(h, p=2.0):
    m = mesh_for(h)
    return Field(m, radial_u(np.linalg.norm(m.vertices, axis=1), p), p)


class TestExtractLevel:
    def test_disk_length(self):
        lev = extract_level(oracle_field(0.05), 0.1)
        assert lev.length == pytest.approx(2 * np.pi * np.sqrt(0.6), rel=0.02)

    def test_shrinks_near_max(self):
        u = oracle_field(0.05)
        lengths = [extract_level(u, frac * u.max).length for frac in (0.9, 0.99, 0.999999)]
        assert lengths[0] > lengths[1] > lengths[2] and lengths[2] < 0.02

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.5, 1.5])
    def test_outside_range(self, frac):
        u = oracle_field(0.1)
        with pytest.raises(LevelSetError):
            extract_level(u, frac * u.max)

    def test_enclosed_area_equals_mu(self):
        _, u, _ = solution(2.0, 0.05, **ELLIPSE)
        for frac in (0.1, 0.5, 0.9):
            t = frac * u.max
            lev = extract_level(u, t)
            assert lev.enclosed_area == pytest.approx(superlevel_area(u.mesh, u.values, t), rel=1e-10)

    def test_segment_endpoints_on_level(self):
        _, u, _ = solution(2.0, 0.05, **ELLIPSE)
        from plapsym._p1 import evaluate_at
        lev = extract_level(u, 0.37 * u.max)
        ends = lev.segments.reshape(-1, 2)
        np.testing.assert_allclose(evaluate_at(u.mesh, u.values, ends), lev.t, atol=1e-12)


class TestDistributionTables:
    def test_disk_p2_values(self):
        _, u, f = solution(2.0, 0.05)
        tab = distribution_tables(u, f, 2.0, t_grid=[0.1])
        assert tab.mu[0] == pytest.approx(0.6 * np.pi, rel=0.02)
        assert tab.I[0] == pytest.approx(tab.mu[0], rel=1e-12)
        assert tab.int_grad_pm1[0] == pytest.approx(0.6 * np.pi, rel=0.02)

    def test_K_at_zero(self):
        _, u, f = solution(2.0, 0.05)
        tab = distribution_tables(u, f, 2.0, t_grid=[1e-9 * u.max])
        assert tab.K[0] == pytest.approx(np.pi ** 2, rel=0.04)

    def test_beta_at_zero(self):
        _, u, f = solution(2.0, 0.05)
        tab = distribution_tables(u, f, 2.0, t_grid=[1e-9 * u.max])
        assert tab.beta[0] == pytest.approx(2.0, rel=0.03)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_invariants(self, p):
        _, u, f = solution(p, 0.05, **ELLIPSE)
        tab = distribution_tables(u, f, p)
        assert np.all(np.diff(tab.t_grid) > 0) and tab.t_grid[0] > 0 and tab.t_grid[-1] < tab.M
        assert np.all(np.diff(tab.mu) <= 0) and np.all(np.diff(tab.I) <= 0)
        assert tab.mu[0] <= u.mesh.area
        for col in tab.columns().values():
            assert np.all(np.isfinite(col))
        # level-set isoperimetric inequality
        assert np.all(tab.surf >= 2 * np.sqrt(np.pi) * np.sqrt(tab.mu) - 1e-12)

    def test_default_grid(self):
        _, u, f = solution(2.0, 0.1)
        tab = distribution_tables(u, f)
        assert len(tab.t_grid) == 64
        assert tab.t_grid[0] == pytest.approx(0.02 * u.max) and tab.t_grid[-1] == pytest.approx(0.98 * u.max)

    def test_coarea_closure(self):
        _, u, f = solution(2.0, 0.05, **ELLIPSE)
        n = 400
        t = (np.arange(n) + 0.5) * u.max / n
        tab = distribution_tables(u, f, 2.0, t_grid=t)
        lhs = np.sum(tab.int_grad_inv) * u.max / n
        M0 = critical_measure(u, [0.0]).measure[0]
        assert lhs == pytest.approx(u.mesh.area - M0, rel=0.03)

    def test_csv_header(self):
        _, u, f = solution(2.0, 0.1)
        text = distribution_tables(u, f, t_levels=5).to_csv("config_hash=abc")
        lines = text.splitlines()
        assert lines[0] == "# config_hash=abc"
        assert lines[1] == "t,mu,surf,I,K,int_grad_pm1,int_grad_inv,beta"
        assert len(lines) == 7

    def test_gauss_green_disk(self):
        _, u, f = solution(2.0, 0.05)
        tab = distribution_tables(u, f)
        assert tab.gauss_green_mismatch.max() <= 0.03


class TestSchwarz:
    def test_radial_function_is_its_own_rearrangement(self):
        _, u, _ = solution(2.0, 0.05)
        d, x0 = l1_distance(u)
        assert d <= 0.05 ** 2  # O(h) with a small constant on the unit disk
        assert np.linalg.norm(x0) < 0.05

    def test_equimeasurable(self):
        _, u, _ = solution(2.0, 0.05, **ELLIPSE)
        us = schwarz_rearrangement(u)
        t = np.linspace(0.02, 0.98, 20) * u.max
        mu = np.array([superlevel_area(u.mesh, u.values, s) for s in t])
        np.testing.assert_allclose(us.distribution(t), mu, rtol=1e-3)

    def test_profile_monotone(self):
        _, u, _ = solution(3.0, 0.05, **ELLIPSE)
        us = schwarz_rearrangement(u)
        r = np.linspace(0, us.radius * 1.1, 200)
        assert np.all(np.diff(us(r)) <= 0)
        assert us(0.0) == pytest.approx(u.max) and us(us.radius * 1.05) == 0.0

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_polya_szego(self, p):
        _, u, _ = solution(p, 0.05, **ELLIPSE)
        energy = np.sum(np.abs(u.mesh.signed_areas) * u.grad_norm ** p)
        assert schwarz_rearrangement(u).gradient_p_norm(p) <= energy + 1e-6

    def test_translation_invariance(self):
        _, u, _ = solution(2.0, 0.05, **ELLIPSE)
        d0, x0 = l1_distance(u)
        d1, x1 = l1_distance(u.translated((3.0, 5.0)))
        assert d1 == pytest.approx(d0, abs=1e-6)
        np.testing.assert_allclose(x1, np.asarray(x0) - [3.0, 5.0], atol=1e-4)

    def test_ellipse_family_increasing(self):
        d = [l1_distance(solution(2.0, 0.05, family="ellipse", a=a, b=1 / a)[1])[0]
             for a in (1.05, 1.1, 1.2)]
        assert d[0] < d[1] < d[2]


class TestCriticalMeasure:
    def test_disk_p2_quarter(self):
        _, u, _ = solution(2.0, 0.02)
        assert critical_measure(u, [0.25]).measure[0] == pytest.approx(np.pi / 4, rel=0.03)

    def test_saturates(self):
        _, u, _ = solution(2.0, 0.05)
        cm = critical_measure(u, [u.grad_norm.max(), 10.0])
        np.testing.assert_allclose(cm.measure, u.mesh.area, rtol=1e-12)

    def test_monotone(self):
        _, u, _ = solution(3.0, 0.05, **ELLIPSE)
        cm = critical_measure(u, np.linspace(0, 1, 50))
        assert np.all(np.diff(cm.measure) >= 0)
