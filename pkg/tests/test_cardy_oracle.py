import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import beta

from cardylab import fixtures
from cardylab.cardy_oracle import (
    ProbeOffArc,
    SlitNotSupported,
    barycentric,
    build_triangle_map,
    cardy_rectangle,
    cardy_value,
    equicontinuity_sweep,
    grid_cardy_value,
    perturbation_family,
)
from cardylab.geometry import Polyline

VA, VB, VC = np.exp(2j * np.pi / 3), np.exp(-2j * np.pi / 3), 1.0


@pytest.fixture(scope="module")
def triangle_map():
    return build_triangle_map(fixtures.equilateral_triangle(0.5))


@pytest.fixture(scope="module")
def square_map():
    return build_triangle_map(fixtures.unit_square())


def affine_to_target(z, a, b):
    """The similarity taking a, b to the target's a and b corners."""
    return VA + (z - a) * (VB - VA) / (b - a)


# ---------------------------------------------------------------- identity and disk oracles
def test_equilateral_triangle_maps_by_a_similarity(triangle_map):
    pts = np.array([[0.5, 0.3], [0.3, 0.2], [0.6, 0.5], [0.5, 0.1], [0.45, 0.7]])
    got = triangle_map(pts)
    want = affine_to_target(pts[:, 0] + 1j * pts[:, 1], 0.0, 1.0)
    assert np.abs(got - want).max() < 1e-5


def disk_to_triangle(z, za):
    """Independent quadrature of the disk map sending za * (cube roots of one) to the corners."""
    w = z / za
    f = lambda t, part: part((1 - (t * w) ** 3) ** (-2 / 3))
    integral = z * complex(quad(f, 0, 1, args=(np.real,))[0], quad(f, 0, 1, args=(np.imag,))[0])
    side = beta(1 / 3, 1 / 3) / 3
    return integral * np.exp(1j * np.pi / 6) / side


@pytest.mark.parametrize("n", [240, 480])
def test_regular_polygon_approaches_the_disk_map(n):
    # marks at vertices n/4, 7n/12 and 11n/12 sit at i, i w and i w^2
    dom = fixtures.regular_polygon(n, marks=(n // 4, 7 * n // 12, 11 * n // 12), probe=None)
    m = build_triangle_map(dom)
    pts = [0.0, 0.3 + 0.2j, -0.4 + 0.1j, 0.1 - 0.5j, 0.55j]
    err = max(abs(m(np.array([[p.real, p.imag]]))[0] - disk_to_triangle(p, 1j)) for p in pts)
    assert err < (np.pi / n) ** 2


def test_disk_oracle_sends_marks_to_corners():
    # the integrand has an integrable endpoint singularity exactly at the marks
    w = np.exp(2j * np.pi / 3)
    assert abs(disk_to_triangle(1j, 1j) - VA) < 1e-6
    assert abs(disk_to_triangle(1j * w, 1j) - VB) < 1e-6
    assert abs(disk_to_triangle(1j * w * w, 1j) - VC) < 1e-6


@pytest.mark.parametrize("name", ["square", "pentagon", "l_shape", "slit_square"])
def test_marks_go_to_zero_one_and_infinity(name):
    dom = fixtures.ALL[name]()
    m = build_triangle_map(dom)
    # in the normalized half plane b, c, a sit at 0, 1 and infinity
    for k in "abc":
        x = m.boundary_eta(dom.mark_params[k])
        if k == "a":
            assert abs(x) > 1e6
        else:
            assert x == pytest.approx({"b": 0.0, "c": 1.0}[k], abs=1e-9)


# ---------------------------------------------------------------- Cardy values
def test_cardy_value_at_the_ends_of_arc_a(square_map):
    assert cardy_value(square_map, (1.0, 0.0)).value == pytest.approx(0.0, abs=1e-9)
    assert cardy_value(square_map, (0.0, 1.0)).value == pytest.approx(1.0, abs=1e-9)


def test_triangle_midpoint_is_one_half(triangle_map):
    v = cardy_value(triangle_map)
    assert v.value == pytest.approx(0.5, abs=1e-6)
    assert v.accuracy <= 1e-6


@pytest.mark.parametrize("t", [0.1, 0.25, 0.75, 0.9])
def test_triangle_values_are_affine(t):
    v = cardy_value(build_triangle_map(fixtures.equilateral_triangle(t)))
    assert v.value == pytest.approx(t, abs=1e-5)


def test_probe_off_arc_a_is_refused(square_map):
    with pytest.raises(ProbeOffArc):
        cardy_value(square_map, (0.5, 0.0))
    with pytest.raises(ProbeOffArc):
        cardy_value(build_triangle_map(fixtures.rectangle(1.0, probe=False)))


def test_square_is_one_half(square_map):
    assert cardy_value(square_map, (1.0, 1.0)).value == pytest.approx(0.5, abs=1e-6)
    assert cardy_rectangle(1.0).value == pytest.approx(0.5, abs=1e-12)


def test_rectangle_values_fall_with_aspect():
    aspects = np.geomspace(0.05, 400, 40)
    vals = [cardy_rectangle(r).value for r in aspects]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[0] > 0.999 and 0 < vals[-1] < 1e-100


@pytest.mark.parametrize("aspect", [0.5, 2.0])
def test_closed_form_matches_the_conformal_map(aspect):
    z = cardy_value(build_triangle_map(fixtures.rectangle(aspect))).value
    assert abs(z - cardy_rectangle(aspect).value) < 1e-4


def test_grid_back_end_matches_on_a_pentagon():
    dom = fixtures.pentagon()
    assert abs(grid_cardy_value(dom).value - cardy_value(build_triangle_map(dom)).value) < 1e-3


def test_grid_back_end_refuses_slits():
    with pytest.raises(SlitNotSupported):
        grid_cardy_value(fixtures.slit_square())


# ---------------------------------------------------------------- invariants
def interior_grid(dom, n=25):
    xmin, ymin, xmax, ymax = dom.outer.bbox()
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, n), np.linspace(ymin, ymax, n))
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return pts[dom.contains(pts) & (dom.boundary_distance(pts) > 0.02 * dom.diameter)]


@pytest.mark.parametrize("name", ["square", "l_shape", "slit_square", "hexagon"])
def test_barycentric_weights_sum_to_one(name):
    dom = fixtures.ALL[name]()
    w = barycentric(build_triangle_map(dom)(interior_grid(dom)))
    assert np.abs(w.sum(axis=1) - 1).max() < 1e-12
    assert (w > -1e-9).all()


@pytest.mark.parametrize("name", ["square", "l_shape", "slit_square"])
def test_map_is_injective_on_a_grid(name):
    dom = fixtures.ALL[name]()
    pts = interior_grid(dom)
    img = build_triangle_map(dom)(pts)
    d_img = np.abs(img[:, None] - img[None, :])
    d_dom = np.hypot(*(pts[:, None] - pts[None, :]).transpose(2, 0, 1))
    off = ~np.eye(len(pts), dtype=bool)
    assert d_img[off & (d_dom > 1e-9)].min() > 1e-6


@pytest.mark.parametrize("name", ["square", "l_shape", "slit_square", "pentagon"])
def test_boundary_values_rise_along_arc_a(name):
    dom = fixtures.ALL[name]()
    m = build_triangle_map(dom)
    tb, tc = dom.mark_params["b"], dom.mark_params["c"]
    L = dom.traversal.total
    ts = tb + np.linspace(0, (tc - tb) % L, 60)
    eta = np.array([m.boundary_eta(t) for t in ts])
    assert np.all(np.diff(eta) >= -1e-12)
    assert eta[0] == pytest.approx(0, abs=1e-9) and eta[-1] == pytest.approx(1, abs=1e-9)


@settings(max_examples=25)
@given(x=st.floats(0.05, 0.95), y=st.floats(0.05, 0.95))
def test_u_stays_in_the_unit_interval(square_map, x, y):
    u = square_map.u(np.array([[x, y]]))[0]
    assert -1e-9 <= u <= 1 + 1e-9


# ---------------------------------------------------------------- equicontinuity
BASE = Polyline([(0.5, 0), (0.5, 0.2), (0.45, 0.35), (0.5, 0.5)])


def test_identical_slit_has_zero_difference():
    tab = equicontinuity_sweep(fixtures.unit_square(), BASE, [(0.01, BASE)])
    assert tab.rows[0].difference == 0.0


def test_perturbation_beyond_delta_is_refused():
    far = Polyline([(0.5, 0), (0.5, 0.2), (0.45, 0.35), (0.6, 0.5)])
    with pytest.raises(ValueError):
        equicontinuity_sweep(fixtures.unit_square(), BASE, [(0.01, far)])


@pytest.fixture(scope="module")
def sweep():
    fam = perturbation_family(BASE, (0.04, 0.02, 0.01), 5, 7)
    return equicontinuity_sweep(fixtures.unit_square(), BASE, fam)


def test_envelope_shrinks_with_delta(sweep):
    env = sweep.envelope()
    assert list(env) == [0.04, 0.02, 0.01]
    assert sweep.is_monotone()
    # frozen from the sweep itself
    assert sweep.base_value == pytest.approx(0.474577, abs=1e-5)
    assert list(env.values()) == pytest.approx([0.041618, 0.016810, 0.007450], abs=1e-5)
    assert all(r.frechet <= r.delta for r in sweep.rows)


def test_one_vertex_moved_a_tenth_of_a_tile_stays_under_the_envelope(sweep):
    eps = 1 / 32
    moved = Polyline([(0.5, 0), (0.5, 0.2), (0.45 + eps / 10, 0.35), (0.5, 0.5)])
    tab = equicontinuity_sweep(fixtures.unit_square(), BASE, [(eps / 10, moved)])
    assert tab.rows[0].difference < sweep.envelope()[0.01]
