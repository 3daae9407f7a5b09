import numpy as np
import pytest

from conftest import curve_for, mesh_for
from plapsym import MeshError, refine_around, triangulate
from plapsym.mesh import Mesh, distance_to_polyline, tube_volume, tube_volume_bound


def polygon_area(points):
    x, y = points.T
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


class TestTriangulate:
    def test_disk_coarse(self):
        c, m = curve_for("disk", R=1.0), mesh_for(0.1, "disk", R=1.0)
        assert 300 <= m.n_vertices <= 1500
        assert abs(m.area - polygon_area(c.points)) <= 1e-10 * polygon_area(c.points)

    def test_refinement_ratio(self):
        ratio = mesh_for(0.05, "disk", R=1.0).n_triangles / mesh_for(0.1, "disk", R=1.0).n_triangles
        assert 4 / 1.6 <= ratio <= 4 * 1.6

    @pytest.mark.parametrize("kw", [dict(family="ellipse", a=1.2, b=1 / 1.2),
                                    dict(family="star", R=1.0, amp=0.05, k=5)])
    def test_quality(self, kw):
        h = 0.05
        m = mesh_for(h, **kw)
        c = curve_for(**kw)
        assert m.angles_deg().min() >= 20.0 - 1e-9
        assert m.edge_lengths().max() <= 1.5 * h
        assert np.all(m.signed_areas > 0)
        d = distance_to_polyline(m.vertices[m.boundary_flag], c.points)
        assert d.max() < 1e-12

    def test_boundary_edges_form_closed_loop(self):
        m = mesh_for(0.1, "disk", R=1.0)
        edges, _ = m.boundary_edges
        assert np.all(m.boundary_flag[edges])
        counts = np.bincount(edges.ravel(), minlength=m.n_vertices)
        assert set(counts[m.boundary_flag]) == {2}

    def test_too_coarse(self):
        with pytest.raises(MeshError):
            triangulate(curve_for("disk", R=1.0), 0.5)

    def test_text_round_trip(self):
        m = mesh_for(0.1, "disk", R=1.0)
        text = m.to_text()
        assert text.splitlines()[0] == f"{m.n_vertices} {m.n_triangles}"
        back = Mesh.from_text(text, m.h)
        np.testing.assert_array_equal(back.vertices, m.vertices)
        np.testing.assert_array_equal(back.triangles, m.triangles)
        np.testing.assert_array_equal(back.boundary_flag, m.boundary_flag)

    def test_area_convergence_in_boundary_samples(self):
        errs = [abs(triangulate(curve_for("disk", R=1.0, n_boundary=n), 0.1).area - np.pi)
                for n in (64, 128, 256)]
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        np.testing.assert_allclose(rates, 2.0, atol=0.05)


class TestTubeVolume:
    def test_disk_annulus(self):
        c, m = curve_for("disk", R=1.0), mesh_for(0.05, "disk", R=1.0)
        assert tube_volume(m, c, 0.1) == pytest.approx(0.19 * np.pi, rel=0.02)

    def test_zero_delta(self):
        assert tube_volume(mesh_for(0.1, "disk", R=1.0), curve_for("disk", R=1.0), 0.0) == 0.0

    def test_bound_on_disk(self):
        c, m = curve_for("disk", R=1.0), mesh_for(0.05, "disk", R=1.0)
        assert tube_volume_bound(c, 0.1) == pytest.approx(2 * np.pi * 0.1, rel=1e-6)
        assert tube_volume(m, c, 0.1) <= tube_volume_bound(c, 0.1) + 1e-9

    @pytest.mark.parametrize("kw", [dict(family="star", R=1.0, amp=0.05, k=5),
                                    dict(family="ellipse", a=1.2, b=1 / 1.2)])
    def test_monotone_and_saturates(self, kw):
        c, m = curve_for(**kw), mesh_for(0.05, **kw)
        deltas = np.linspace(0, 1.2 * c.diameter, 25)
        vols = [tube_volume(m, c, d) for d in deltas]
        assert np.all(np.diff(vols) >= -1e-12)
        assert vols[-1] == pytest.approx(m.area, rel=1e-12)
        for d, v in zip(deltas, vols):
            assert v <= tube_volume_bound(c, d) + 1e-3 * m.area

    def test_negative_delta(self):
        with pytest.raises(ValueError):
            tube_volume(mesh_for(0.1, "disk", R=1.0), curve_for("disk", R=1.0), -0.1)


@pytest.fixture(scope="module")
def graded():
    base = mesh_for(0.05)
    return base, refine_around(base, [0.2, -0.1], 0.002, grading=0.1)


class TestGradedRefinement:
    def test_domain_and_boundary_unchanged(self, graded):
        base, fine = graded
        assert fine.area == pytest.approx(base.area, rel=1e-12)
        np.testing.assert_array_equal(np.sort(fine.vertices[fine.boundary_flag], axis=0),
                                      np.sort(base.vertices[base.boundary_flag], axis=0))

    def test_sizes_follow_grading(self, graded):
        _, fine = graded
        cent = fine.vertices[fine.triangles].mean(axis=1)
        d = np.hypot(cent[:, 0] - 0.2, cent[:, 1] + 0.1)
        size = np.minimum(0.05, 0.002 + 0.1 * d)
        assert np.all(np.abs(fine.signed_areas) <= 1.5 * np.sqrt(3) / 4 * size ** 2)
        assert fine.edge_lengths().min() < 0.004
        assert fine.angles_deg().min() >= 20.0 - 1e-6

    def test_rejects_bad_sizes(self):
        with pytest.raises(MeshError):
            refine_around(mesh_for(0.1), [0.0, 0.0], 0.2)
