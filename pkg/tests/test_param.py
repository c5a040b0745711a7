import numpy as np
import pytest
from scipy.spatial import cKDTree

from ribbonpatch import domains, param
from ribbonpatch import mesh as M


def box_dn_h_series(terms=200):
    """Inward derivative of the 0/1 box solution at the bottom midpoint of the unit square.

    h = y + sum_k (2 / (k pi)) sin(k pi y) cosh(k pi (x - 1/2)) / cosh(k pi / 2)
    """
    k = np.arange(1, terms + 1)
    return 1.0 + np.sum(2.0 / np.cosh(k * np.pi / 2))


def box_h_series(x, y, terms=400):
    k = np.arange(1, terms + 1)[:, None]
    return y + np.sum(2 / (k * np.pi) * np.sin(k * np.pi * y) * np.cosh(k * np.pi * (x - 0.5)) / np.cosh(k * np.pi / 2), axis=0)


def mirror_map(mesh, axis_x):
    p = mesh.vertices.copy()
    p[:, 0] = 2 * axis_x - p[:, 0]
    d, idx = cKDTree(mesh.vertices).query(p)
    assert d.max() < 1e-12
    return idx


# ---------------------------------------------------------------------------
# harmonic_field


def test_constant_data(mesh):
    f = param.harmonic_field(mesh, np.full(len(mesh.boundary_vertices), 2.5))
    np.testing.assert_allclose(f, 2.5, atol=1e-12)


def test_linear_data_reproduced(mesh):
    g = {int(v): 1.5 * x - 0.5 * y for v, (x, y) in zip(mesh.boundary_vertices, mesh.vertices[mesh.boundary_vertices])}
    f = param.harmonic_field(mesh, g)
    np.testing.assert_allclose(f, 1.5 * mesh.vertices[:, 0] - 0.5 * mesh.vertices[:, 1], atol=1e-10)


def test_missing_dirichlet_value():
    m = domains.unit_square(2)
    with pytest.raises(ValueError):
        param.harmonic_field(m, {0: 1.0})


def test_maximum_principle_non_obtuse():
    rng = np.random.default_rng(2)
    for m in (domains.unit_square(6), domains.fan_mesh(domains.regular_polygon(5), 5), domains.grid_mesh(7, 5)):
        assert m.quality()["n_obtuse"] == 0
        g = rng.uniform(-1, 3, len(m.boundary_vertices))
        f = param.harmonic_field(m, g)
        assert f.min() >= g.min() - 1e-12 and f.max() <= g.max() + 1e-12


# ---------------------------------------------------------------------------
# side_parameterization


def test_dirichlet_rows_exact(mesh):
    for sp in param.all_side_parameterizations(mesh):
        np.testing.assert_array_equal(sp.s_field[sp.vertices], sp.params)
        np.testing.assert_array_equal(sp.h_field[sp.vertices], 0.0)
        assert len(sp.dn_s) == len(sp.dn_h) == len(sp.vertices)


def test_h_field_matches_series_on_square():
    # the data jump at the two bottom corners, so compare away from them
    errs = []
    for n in (8, 16, 32):
        m = domains.unit_square(n)
        sp = param.side_parameterization(m, 0)
        p = m.vertices
        far = np.minimum(np.linalg.norm(p, axis=1), np.linalg.norm(p - [1.0, 0.0], axis=1)) > 0.25
        errs.append(np.abs(sp.h_field[far] - box_h_series(p[far, 0], p[far, 1])).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_dn_h_converges_to_series_value():
    target = box_dn_h_series()
    assert target == pytest.approx(2.014967, abs=1e-6)
    errs = []
    for n in (8, 16, 32):
        m = domains.unit_square(n)
        sp = param.side_parameterization(m, 0)
        i = int(np.argmin(np.abs(sp.params - 0.5)))
        assert sp.params[i] == 0.5
        errs.append(abs(sp.dn_h[i] - target))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3
    # second order on this mesh family
    assert np.log2(errs[1] / errs[2]) > 1.5


def test_mirror_symmetry_on_square():
    m = domains.unit_square(8)
    sp = param.side_parameterization(m, 0)
    idx = mirror_map(m, 0.5)
    np.testing.assert_allclose(sp.s_field[idx], 1 - sp.s_field, atol=1e-10)
    np.testing.assert_allclose(sp.h_field[idx], sp.h_field, atol=1e-10)
    np.testing.assert_allclose(sp.dn_h[::-1], sp.dn_h, atol=1e-10)
    np.testing.assert_allclose(sp.dn_s[::-1], -sp.dn_s, atol=1e-10)


def test_fields_in_unit_interval_on_non_obtuse_meshes():
    for m in (domains.unit_square(6), domains.fan_mesh(domains.regular_polygon(5), 6), domains.grid_mesh(6, 9)):
        for sp in param.all_side_parameterizations(m):
            for f in (sp.s_field, sp.h_field):
                assert f.min() >= -1e-12 and f.max() <= 1 + 1e-12
            h_in = sp.h_field[m.interior_vertices]
            assert h_in.min() > 0 and h_in.max() < 1
            assert sp.dn_h[1:-1].min() >= -1e-8


def test_hole_loop_gets_half_for_s(meshes):
    m = meshes["square-annulus"]
    s = param.s_dirichlet(m, 0)
    hole = np.isin(m.boundary_vertices, m.boundary_loops[1])
    np.testing.assert_array_equal(s[hole], 0.5)
    h = param.h_dirichlet(m, 0)
    np.testing.assert_array_equal(h[hole], 1.0)


def test_clamp_linear_data_is_continuous(meshes):
    m = meshes["pentagon-fan"]
    s = param.s_dirichlet(m, 2)
    lp = m.boundary_loops[0]
    vals = s[: len(lp)]
    # one jump from 1 back to 0 is impossible: the data ramp down over far sides
    jumps = np.abs(np.diff(np.append(vals, vals[0])))
    assert jumps.max() < 0.5


def test_nearest_extension():
    m = domains.unit_square(4)
    s = param.s_dirichlet(m, 0, mode="nearest")
    p = m.vertices[m.boundary_vertices]
    top = np.isclose(p[:, 1], 1.0)
    np.testing.assert_allclose(s[top], p[top, 0])
    sp = param.side_parameterization(m, 0, s_extension="nearest")
    np.testing.assert_array_equal(sp.s_field[sp.vertices], sp.params)


def test_one_sided_gradient_option():
    m = domains.unit_square(16)
    a = param.side_parameterization(m, 0, gradient="area")
    b = param.side_parameterization(m, 0, gradient="one-sided")
    np.testing.assert_array_equal(a.s_field, b.s_field)
    i = int(np.argmin(np.abs(a.params - 0.5)))
    assert abs(a.dn_h[i] - b.dn_h[i]) < 0.1 * a.dn_h[i]
    assert b.dn_h[1:-1].min() > 0


def test_bad_options_and_side():
    m = domains.unit_square(2)
    with pytest.raises(IndexError):
        param.side_parameterization(m, 4)
    with pytest.raises(ValueError):
        param.side_parameterization(m, 0, gradient="bogus")
    with pytest.raises(ValueError):
        param.side_parameterization(m, 0, s_extension="bogus")


def test_mesh_without_sides_rejected():
    m = domains.unit_square(2)
    bare = M.TriMesh.from_arrays(m.vertices, m.triangles)
    with pytest.raises(M.SideAssignmentError):
        param.side_parameterization(bare, 0)


def test_fields_are_read_only():
    sp = param.side_parameterization(domains.unit_square(2), 0)
    with pytest.raises(ValueError):
        sp.h_field[0] = 1.0


# ---------------------------------------------------------------------------
# normal_derivative


def test_normal_derivative_identity_and_zero():
    ds, dh = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.5, 4.0])
    np.testing.assert_array_equal(param.normal_derivative(0.0, 1.0, (ds, dh)), dh)
    np.testing.assert_array_equal(param.normal_derivative(0.0, 0.0, (ds, dh)), 0.0)


def test_normal_derivative_is_linear():
    rng = np.random.default_rng(0)
    f = param.normal_derivative
    for _ in range(20):
        a1, a2, b1, b2, c = rng.standard_normal(5)
        P, Q = rng.standard_normal((2, 2, 3))
        # in the derivative pair
        np.testing.assert_allclose(f(c * a1 + a2, c * b1 + b2, P), c * f(a1, b1, P) + f(a2, b2, P), atol=1e-12)
        # in the ribbon partials
        np.testing.assert_allclose(f(a1, b1, c * P + Q), c * f(a1, b1, P) + f(a1, b1, Q), atol=1e-12)


def test_normal_derivative_broadcasts():
    dn = np.array([0.0, 1.0, 2.0])
    P = (np.ones((3, 3)), np.tile([0.0, 1.0, 0.0], (3, 1)))
    out = param.normal_derivative(dn, dn, P)
    np.testing.assert_allclose(out[2], [2, 4, 2])


def test_flat_bottom_ribbon_cross_derivative():
    """Ribbon (s, h, 0) on the bottom: the chain rule gives (0, dn_h, 0), dn_h tending to the box value."""
    from ribbonpatch.spline import Ribbon

    r = Ribbon.bezier([[[0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]])
    target = box_dn_h_series()
    errs = []
    for n in (8, 16, 32):
        m = domains.unit_square(n)
        sp = param.side_parameterization(m, 0)
        i = int(np.argmin(np.abs(sp.params - 0.5)))
        d = param.normal_derivative(sp.dn_s[i], sp.dn_h[i], r.eval_partials(0.5, 0.0))
        assert abs(d[0]) < 1e-12 and d[2] == 0.0
        errs.append(abs(d[1] - target))
    assert errs[0] > errs[1] > errs[2]
