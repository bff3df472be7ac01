import math

import numpy as np
import pytest

from detshock import free_boundary as fb
from detshock import geometry as ge
from detshock.csvio import read_table
from detshock.errors import FoldedGridError, GeometryError
from detshock.gas_model import GasParams

G2 = GasParams(2.0, 1.0)
TH30 = math.radians(30.0)


@pytest.fixture(scope="module")
def golden_domain():
    body = ge.default_body(TH30, 1.0)
    L = 4.0 * ge.lower_cutoff_height(body, 1.0)
    shock = fb.seed_shock(body, 1.0, L, G2, 0.05)
    return ge.build_cutoff_domain(body, shock, 1.0, L, 3.0)


@pytest.mark.parametrize("theta_deg,h0", [(30.0, 1.0), (20.0, 0.5), (45.0, 2.0), (60.0, 1.3)])
def test_default_body_nose_and_axioms(theta_deg, h0):
    theta = math.radians(theta_deg)
    body = ge.default_body(theta, h0)
    assert body.b0 == pytest.approx(0.5 * h0 / math.tan(theta), rel=1e-14)
    flags = ge.check_axioms(body)
    assert flags["blunt"] and flags["convex"]


def test_default_body_derivatives_consistent():
    body = ge.default_body(TH30, 1.0)
    x = np.linspace(0.0, 2.0, 20001)
    # the third derivative has a corner at h0, so skip the nodes beside it there
    smooth = np.abs(x - 1.0) > 2.5e-4
    for k in range(3):
        fd = np.gradient(body.b(x, k), x, edge_order=2)
        keep = smooth[2:-2] if k == 2 else slice(None)
        np.testing.assert_allclose(fd[2:-2][keep], body.b(x, k + 1)[2:-2][keep], atol=5e-6)


def test_wedge_is_not_blunt():
    flags = ge.check_axioms(ge.wedge_body(TH30, 1.0))
    assert not flags["symmetric"]
    assert not flags["blunt"]


def test_body_rejects_bad_angles():
    with pytest.raises(GeometryError):
        ge.default_body(0.0)
    with pytest.raises(GeometryError):
        ge.default_body(TH30, -1.0)


def test_lower_cutoff_height_reference():
    body = ge.default_body(TH30, 1.0)
    k = math.tan(TH30)
    expected = 4.0 / k * ((1.0 + k * k) / k + 1.0 - body.b0)
    assert ge.lower_cutoff_height(body, 1.0) == pytest.approx(expected, rel=1e-14)
    assert ge.lower_cutoff_height(body, 1.0) == pytest.approx(16.928, abs=1e-3)


def test_p3_for_background_with_zero_slope():
    body = ge.default_body(TH30, 1.0)
    k = body.kappa_w
    L = 20.0
    x2 = ge.shock_nodes(L, 32, 0.0)
    shock = ge.ShockCurve(x2, np.zeros_like(x2), (0.0, 0.0))
    dom = ge.build_cutoff_domain(body, shock, body.b0, L)
    np.testing.assert_allclose(dom.p3, L * k / (1.0 + k * k) * np.array([1.0, k]), rtol=1e-14)


def test_p3_reference_point():
    body = ge.default_body(math.radians(45.0), 1.0)
    x2 = ge.shock_nodes(10.0, 40, 0.0)
    shock = ge.ShockCurve(x2, 0.2 * x2, (0.2, 0.2))
    dom = ge.build_cutoff_domain(body, shock, 0.5, 10.0)
    np.testing.assert_allclose(dom.p3, [6.0, 6.0], atol=1e-12)
    np.testing.assert_allclose(dom.p2, [2.0, 10.0], atol=1e-12)
    np.testing.assert_allclose(dom.p1, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(dom.p0, [0.5, 0.0], atol=1e-15)


def test_seed_gap_diagnostic(golden_domain):
    assert golden_domain.min_gap >= 0.75 * golden_domain.d0


def test_domain_rejects_bad_shocks():
    body = ge.default_body(TH30, 1.0)
    x2 = ge.shock_nodes(30.0, 40, 0.0)
    with pytest.raises(GeometryError, match="start"):
        ge.build_cutoff_domain(body, ge.ShockCurve(x2, np.full_like(x2, 0.1)), 1.0, 30.0)
    crossing = body.b0 - 1.0 + 3.0 * x2
    with pytest.raises(GeometryError, match="touches"):
        ge.build_cutoff_domain(body, ge.ShockCurve(x2, crossing, (3.0, 3.0)), 1.0, 30.0)
    short = ge.shock_nodes(0.5, 16, 0.0)
    with pytest.raises(GeometryError, match="increase L"):
        ge.build_cutoff_domain(body, ge.ShockCurve(short, np.full_like(short, body.b0 - 1.0)), 1.0, 0.5)


def test_shock_curve_validation_and_blend():
    x2 = np.linspace(0.0, 1.0, 8)
    with pytest.raises(GeometryError):
        ge.ShockCurve(x2[::-1], x2)
    a = ge.ShockCurve(x2, x2, (1.0, 1.0))
    b = ge.ShockCurve(x2, 3.0 * x2, (3.0, 3.0))
    c = a.blend(b, 0.5)
    np.testing.assert_allclose(c.f, 2.0 * x2, atol=1e-15)
    assert c(0.37, 1) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(GeometryError):
        a.blend(ge.ShockCurve(np.linspace(0, 2, 8), x2), 0.5)


def test_shock_csv_round_trip(tmp_path, golden_domain):
    path = tmp_path / "shock.csv"
    ge.write_shock_csv(path, golden_domain.shock, ["k=v"])
    tab = read_table(path)
    np.testing.assert_array_equal(tab["x2"], golden_domain.shock.x2)
    np.testing.assert_array_equal(tab["f"], golden_domain.shock.f)


def _rectangle(width=3.0, height=2.0):
    a, b, c, d = (np.array(p, dtype=float) for p in ([0, 0], [width, 0], [0, height], [width, height]))
    return ge.ArcDomain(left=ge.LineArc(a, c), right=ge.LineArc(b, d), bottom=ge.LineArc(a, b), top=ge.LineArc(c, d))


def test_rectangle_grid_is_tensor_product():
    grid = ge.make_grid(_rectangle(), 9, 11)
    s, t = np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 11), indexing="ij")
    np.testing.assert_allclose(grid.x[..., 0], 3.0 * s, atol=1e-14)
    np.testing.assert_allclose(grid.x[..., 1], 2.0 * t, atol=1e-14)
    np.testing.assert_allclose(grid.jac, np.broadcast_to([[3.0, 0.0], [0.0, 2.0]], grid.jac.shape), atol=1e-13)
    np.testing.assert_allclose(grid.hess, 0.0, atol=1e-13)


def test_grid_size_and_folding():
    with pytest.raises(GeometryError):
        ge.make_grid(_rectangle(), 4, 20)
    dom = _rectangle()
    flipped = ge.ArcDomain(left=dom.right, right=dom.left, bottom=dom.bottom.__class__(dom.bottom.end, dom.bottom.start),
                           top=dom.top.__class__(dom.top.end, dom.top.start))
    with pytest.raises(FoldedGridError):
        ge.make_grid(flipped, 9, 9)


def test_golden_grid_jacobians(golden_domain):
    grid = ge.make_grid(golden_domain, 64, 128)
    assert np.all(grid.det > 0.0)
    # inverse metric really is the inverse
    eye = np.einsum("...ij,...jk->...ik", grid.jac, grid.inv)
    np.testing.assert_allclose(eye, np.broadcast_to(np.eye(2), eye.shape), atol=1e-10)


def test_boundary_node_residency(golden_domain):
    dom = golden_domain
    grid = ge.make_grid(dom, 24, 48)
    shock_side = grid.x[0, :]
    body_side = grid.x[-1, :]
    np.testing.assert_allclose(shock_side[:, 0], dom.shock(shock_side[:, 1]), atol=1e-12)
    np.testing.assert_allclose(body_side[:, 0], dom.body.b(body_side[:, 1]), atol=1e-12)
    np.testing.assert_allclose(grid.x[:, 0, 1], 0.0, atol=1e-14)
    cut = grid.x[:, -1] - dom.p2
    direction = (dom.p3 - dom.p2) / np.linalg.norm(dom.p3 - dom.p2)
    cross = cut[:, 0] * direction[1] - cut[:, 1] * direction[0]
    np.testing.assert_allclose(cross, 0.0, atol=1e-10)
    assert grid.tags[0, 0] == "P1" and grid.tags[-1, 0] == "P0"
    assert grid.tags[0, -1] == "P2" and grid.tags[-1, -1] == "P3"
    # the cut is perpendicular to the wedge
    assert abs(np.dot(direction, [math.cos(TH30), math.sin(TH30)])) < 1e-12


def test_arc_lengths_converge_at_second_order(golden_domain):
    sizes = np.array([16, 32, 64, 128, 256])
    lengths = [ge.make_grid(golden_domain, n, 2 * n).arc_lengths() for n in sizes]
    for key in ("shock", "body", "sym", "cutoff"):
        vals = np.array([d[key] for d in lengths])
        diffs = np.abs(np.diff(vals))
        if diffs[0] < 1e-12:
            continue  # straight arcs are exact
        # |change| * n^2 stays bounded; a first-order sequence would grow 16-fold
        scaled = diffs * sizes[1:] ** 2
        assert scaled.max() / scaled.min() <= 4.0, (key, scaled)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_fourth_order_derivative_exact_on_quartics(k):
    x = np.linspace(-1.0, 2.0, 13)
    h = x[1] - x[0]
    coeffs = np.array([0.3, -1.2, 0.5, 2.0, -0.7])
    values = np.polyval(coeffs, x)
    exact = np.polyval(np.polyder(coeffs), x)
    arr = np.moveaxis(np.broadcast_to(values, (3, 2, 13)), 2, k).copy()
    got = ge.fourth_order_derivative(arr, h, axis=k)
    ref = np.moveaxis(np.broadcast_to(exact, (3, 2, 13)), 2, k)
    np.testing.assert_allclose(got, ref, atol=1e-11)


def test_fourth_order_derivative_short_axis_fallback():
    v = np.array([0.0, 1.0, 4.0])
    np.testing.assert_allclose(ge.fourth_order_derivative(v, 1.0, 0), [0.0, 2.0, 4.0], atol=1e-14)


def test_grid_gradient_exact_on_affine():
    grid = ge.make_grid(_rectangle(), 12, 9)
    values = 2.0 * grid.x[..., 0] - 3.5 * grid.x[..., 1] + 1.0
    grad = grid.gradient(values)
    np.testing.assert_allclose(grad[..., 0], 2.0, atol=1e-12)
    np.testing.assert_allclose(grad[..., 1], -3.5, atol=1e-12)


def test_grid_gradient_converges_on_curved_grid():
    body = ge.default_body(TH30, 1.0)
    L = 4.0 * ge.lower_cutoff_height(body, 1.0)
    shock = fb.seed_shock(body, 1.0, L, G2, 0.05, profile="background")
    dom = ge.build_cutoff_domain(body, shock, 1.0, L, 3.0)
    errors = []
    for n in (32, 64, 128):
        grid = ge.make_grid(dom, n, 2 * n)
        values = np.sin(0.1 * grid.x[..., 0]) + 0.05 * grid.x[..., 1]
        exact = 0.1 * np.cos(0.1 * grid.x[..., 0])
        errors.append(float(np.max(np.abs(grid.gradient(values)[..., 0] - exact))))
    assert errors[0] / errors[1] > 3.5 and errors[1] / errors[2] > 3.5


def test_rotation_properties():
    for theta in np.linspace(0.1, 1.4, 7):
        r = ge.rotation_matrix(theta)
        np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-15)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(ge.rotate_to_eta([math.cos(theta), math.sin(theta)], theta), [0.0, 1.0], atol=1e-15)


def test_morph_properties(golden_domain):
    dom_a = golden_domain
    x2 = dom_a.shock.x2
    other = ge.ShockCurve(x2, dom_a.shock.f - 0.1 * np.sin(x2 / dom_a.L * math.pi), dom_a.shock.end_slopes)
    dom_b = ge.build_cutoff_domain(dom_a.body, other, dom_a.d0, dom_a.L, dom_a.stretch)
    heights = np.linspace(0.0, dom_a.L, 50)
    mapping = ge.morph_domains(dom_a, dom_b)
    on_shock = np.stack([dom_a.shock(heights), heights], axis=-1)
    on_body = np.stack([dom_a.body.b(heights), heights], axis=-1)
    np.testing.assert_allclose(mapping(on_shock)[:, 0], dom_b.shock(heights), atol=1e-12)
    np.testing.assert_allclose(mapping(on_body), on_body, atol=1e-12)
    ident = ge.morph_domains(dom_a, dom_a)
    pts = 0.5 * (on_shock + on_body)
    np.testing.assert_allclose(ident(pts), pts, atol=1e-12)
    with pytest.raises(GeometryError):
        mapping(np.array([[0.0, 2.0 * dom_a.L]]))


def test_grid_csv_has_tags(tmp_path, golden_domain):
    grid = ge.make_grid(golden_domain, 10, 12)
    path = tmp_path / "grid.csv"
    ge.write_grid_csv(path, grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,x1,x2,tag"
    assert len(lines) == 1 + 120
    assert lines[1].endswith(",P1")
