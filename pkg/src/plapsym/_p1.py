"""Exact clipping of piecewise-linear fields on triangles.

Every function here is exact for P1 data: super-level sets of a linear
function on a triangle are polygons, so their areas, the integrals of other
P1 fields over them, and their boundaries are computed in closed form.
"""

import numpy as np


def _sorted(mesh, values):
    v = values[mesh.triangles]
    order = np.argsort(v, axis=1, kind="stable")
    rows = np.arange(len(v))[:, None]
    return v[rows, order], mesh.triangles[rows, order]


def superlevel_integral(mesh, values, t, weights=None):
    """int_{values > t} w dx with ``w`` a per-vertex P1 field (1 if None)."""
    vs, idx = _sorted(mesh, np.asarray(values, dtype=float))
    area = np.abs(mesh.signed_areas)
    if weights is None:
        w = np.ones_like(vs)
    else:
        w = np.asarray(weights, dtype=float)[idx]
    v0, v1, v2 = vs[:, 0], vs[:, 1], vs[:, 2]
    full = t < v0
    one_below = (v0 <= t) & (t < v1)
    one_above = (v1 <= t) & (t < v2)
    out = np.zeros(len(vs))
    out[full] = area[full] * w[full].mean(axis=1)

    m = one_below
    if m.any():
        s1 = (t - v0[m]) / (v1[m] - v0[m])
        s2 = (t - v0[m]) / (v2[m] - v0[m])
        ww = w[m]
        wa = ww[:, 0] + s1 * (ww[:, 1] - ww[:, 0])
        wb = ww[:, 0] + s2 * (ww[:, 2] - ww[:, 0])
        small = area[m] * s1 * s2
        out[m] = area[m] * ww.mean(axis=1) - small * (ww[:, 0] + wa + wb) / 3.0

    m = one_above
    if m.any():
        s0 = (v2[m] - t) / (v2[m] - v0[m])
        s1 = (v2[m] - t) / (v2[m] - v1[m])
        ww = w[m]
        wc = ww[:, 2] + s0 * (ww[:, 0] - ww[:, 2])
        wd = ww[:, 2] + s1 * (ww[:, 1] - ww[:, 2])
        out[m] = area[m] * s0 * s1 * (ww[:, 2] + wc + wd) / 3.0
    return float(out.sum())


def superlevel_area(mesh, values, t):
    return superlevel_integral(mesh, values, t)


def level_segments(mesh, values, t, gradients):
    """Segments of {values = t}, oriented with the super-level set on the left.

    Returns ``(segments (k, 2, 2), triangle index (k,))``.
    """
    vs, idx = _sorted(mesh, np.asarray(values, dtype=float))
    v0, v1, v2 = vs[:, 0], vs[:, 1], vs[:, 2]
    P = mesh.vertices[idx]
    segs, owners = [], []

    m = np.nonzero((v0 <= t) & (t < v1))[0]
    if len(m):
        s1 = (t - v0[m]) / (v1[m] - v0[m])
        s2 = (t - v0[m]) / (v2[m] - v0[m])
        a = P[m, 0] + s1[:, None] * (P[m, 1] - P[m, 0])
        b = P[m, 0] + s2[:, None] * (P[m, 2] - P[m, 0])
        segs.append(np.stack([a, b], axis=1))
        owners.append(m)
    m = np.nonzero((v1 <= t) & (t < v2))[0]
    if len(m):
        s0 = (v2[m] - t) / (v2[m] - v0[m])
        s1 = (v2[m] - t) / (v2[m] - v1[m])
        c = P[m, 2] + s0[:, None] * (P[m, 0] - P[m, 2])
        d = P[m, 2] + s1[:, None] * (P[m, 1] - P[m, 2])
        segs.append(np.stack([c, d], axis=1))
        owners.append(m)
    if not segs:
        return np.zeros((0, 2, 2)), np.zeros(0, dtype=np.int64)
    seg = np.concatenate(segs)
    own = np.concatenate(owners)
    d = seg[:, 1] - seg[:, 0]
    g = gradients[own]
    flip = d[:, 0] * g[:, 1] - d[:, 1] * g[:, 0] < 0
    seg[flip] = seg[flip][:, ::-1]
    keep = np.einsum("ij,ij->i", d, d) > 0
    return seg[keep], own[keep]


def sample_on_grid(mesh, values, xs, ys, fill=0.0):
    """Evaluate the P1 field at all points of the tensor grid ``xs`` x ``ys``.

    Points outside the mesh get ``fill``.  Returns an array of shape
    ``(len(ys), len(xs))``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    out = np.full((len(ys), len(xs)), np.nan)
    P = mesh.vertices[mesh.triangles]
    lo, hi = P.min(axis=1), P.max(axis=1)
    i0 = np.clip(np.ceil((lo[:, 0] - xs[0]) / dx).astype(int), 0, len(xs))
    i1 = np.clip(np.floor((hi[:, 0] - xs[0]) / dx).astype(int), -1, len(xs) - 1)
    j0 = np.clip(np.ceil((lo[:, 1] - ys[0]) / dy).astype(int), 0, len(ys))
    j1 = np.clip(np.floor((hi[:, 1] - ys[0]) / dy).astype(int), -1, len(ys) - 1)
    span = int(max((i1 - i0).max(initial=0), (j1 - j0).max(initial=0))) + 1
    twice = 2.0 * mesh.signed_areas
    vals = np.asarray(values, dtype=float)[mesh.triangles]
    for di in range(span):
        for dj in range(span):
            ii, jj = i0 + di, j0 + dj
            ok = (ii <= i1) & (jj <= j1)
            if not ok.any():
                continue
            tri = np.nonzero(ok)[0]
            x, y = xs[ii[tri]], ys[jj[tri]]
            p = P[tri]
            l1 = ((p[:, 1, 0] - x) * (p[:, 2, 1] - y) - (p[:, 2, 0] - x) * (p[:, 1, 1] - y)) / twice[tri]
            l2 = ((p[:, 2, 0] - x) * (p[:, 0, 1] - y) - (p[:, 0, 0] - x) * (p[:, 2, 1] - y)) / twice[tri]
            l3 = 1.0 - l1 - l2
            inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l3 >= -1e-12)
            tri = tri[inside]
            u = (l1[inside] * vals[tri, 0] + l2[inside] * vals[tri, 1] + l3[inside] * vals[tri, 2])
            out[jj[tri], ii[tri]] = u
    out[np.isnan(out)] = fill
    return out


def evaluate_at(mesh, values, points, fill=0.0, k=12):
    """P1 interpolation at scattered points; points outside the mesh get ``fill``.

    Candidate triangles come from the ``k`` nearest centroids; points they
    miss fall back to a scan over all triangles.
    """
    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = mesh.vertices[mesh.triangles]
    vals = np.asarray(values, dtype=float)[mesh.triangles]
    twice = 2.0 * mesh.signed_areas
    k = min(k, len(P))
    _, cand = cKDTree(P.mean(axis=1)).query(pts, k=k)
    cand = np.asarray(cand).reshape(len(pts), k)
    out = np.full(len(pts), np.nan)

    def bary(tri, x):
        p = P[tri]
        l1 = ((p[..., 1, 0] - x[..., 0]) * (p[..., 2, 1] - x[..., 1])
              - (p[..., 2, 0] - x[..., 0]) * (p[..., 1, 1] - x[..., 1])) / twice[tri]
        l2 = ((p[..., 2, 0] - x[..., 0]) * (p[..., 0, 1] - x[..., 1])
              - (p[..., 0, 0] - x[..., 0]) * (p[..., 2, 1] - x[..., 1])) / twice[tri]
        return np.stack([l1, l2, 1.0 - l1 - l2], axis=-1)

    lam = bary(cand, pts[:, None, :])
    inside = np.all(lam >= -1e-12, axis=-1)
    hit = inside.any(axis=1)
    j = np.argmax(inside, axis=1)
    rows = np.nonzero(hit)[0]
    tri = cand[rows, j[rows]]
    out[rows] = np.einsum("ij,ij->i", lam[rows, j[rows]], vals[tri])
    for i in np.nonzero(~hit)[0]:
        lam_all = bary(np.arange(len(P)), np.broadcast_to(pts[i], (len(P), 2)))
        ok = np.nonzero(np.all(lam_all >= -1e-12, axis=1))[0]
        out[i] = lam_all[ok[0]] @ vals[ok[0]] if len(ok) else fill
    return out
