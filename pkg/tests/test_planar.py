import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hermitian_bergman.errors import DomainError
from hermitian_bergman.planar import PlanarDomain, _disc_rect_area, _linear_power_integral


def chord_area(rect, R):
    # area of rect ∩ disc by 1-D quadrature of the vertical chord length
    x0, x1, y0, y1 = rect

    def length(x):
        if abs(x) >= R:
            return 0.0
        s = np.sqrt(R * R - x * x)
        return max(0.0, min(y1, s) - max(y0, -s))

    kinks = [-R, R] + [sg * np.sqrt(R * R - y * y) for y in (y0, y1) if abs(y) < R for sg in (-1, 1)]
    pts = [p for p in kinks if x0 < p < x1] or None
    return integrate.quad(length, x0, x1, points=pts, limit=200, epsabs=1e-14)[0]


@pytest.mark.parametrize("rect", [(-0.3, 0.2, 0.1, 0.9), (0.6, 0.9, 0.6, 0.9), (-1.2, -0.8, -0.1, 0.3),
                                  (0.95, 1.1, -0.2, 0.0), (-0.5, 0.5, -0.5, 0.5), (1.0, 1.2, 1.0, 1.2)])
def test_disc_rect_area_against_chord_quadrature(rect):
    got = _disc_rect_area(*(np.array([v]) for v in rect), 1.0)[0]
    assert got == pytest.approx(chord_area(rect, 1.0), abs=1e-12)


@pytest.mark.parametrize("dom, area", [(PlanarDomain.disc(resolution=64), np.pi),
                                       (PlanarDomain.square(resolution=64), 4.0),
                                       (PlanarDomain.annulus(0.5, 1.0, resolution=64), 0.75 * np.pi),
                                       (PlanarDomain.disc(0.3, resolution=33), 0.09 * np.pi)])
def test_grid_total_area_is_exact(dom, area):
    # only slivers below 1e-9 of a subcell are dropped
    assert dom.grid.area.sum() == pytest.approx(area, rel=1e-9)


@pytest.mark.parametrize("dom", [PlanarDomain.disc(resolution=48), PlanarDomain.square(resolution=48),
                                 PlanarDomain.annulus(resolution=48)])
def test_grid_nodes_inside_and_comparability(dom):
    gr = dom.grid
    assert np.all(dom.rho(gr.nodes) < 0)
    assert np.all(dom.distance(gr.nodes) > 0)
    c1, c2 = dom.comparability()
    assert 0 < c1 <= c2 < np.inf


def test_full_cells_are_not_split_far_from_boundary():
    dom = PlanarDomain.disc(resolution=96)
    gr = dom.grid
    deep = dom.distance(gr.nodes) > 0.1
    assert np.all(~gr.band[deep]) and np.all(gr.full[deep])


@pytest.mark.parametrize("alpha", [-0.8, -0.5, -0.2, 0.5, 1.5])
def test_rho_moments_on_disc(alpha):
    # int_D (1 - |z|^2)^alpha dA = pi / (alpha + 1)
    dom = PlanarDomain.disc(resolution=128)
    assert dom.moment(alpha).sum() == pytest.approx(np.pi / (alpha + 1), rel=1e-3)


@pytest.mark.parametrize("alpha", [-0.5, 0.5, 1.5])
def test_delta_moments(alpha):
    # disc: 2 pi int_0^1 (1-r)^alpha r dr; square: 8 int_0^1 t^alpha (1-t) dt
    disc = PlanarDomain.disc(resolution=128)
    assert disc.moment(alpha, "delta").sum() == pytest.approx(2 * np.pi / ((alpha + 1) * (alpha + 2)), rel=1e-3)
    sq = PlanarDomain.square(resolution=128)
    assert sq.moment(alpha, "delta").sum() == pytest.approx(8 * (1 / (alpha + 1) - 1 / (alpha + 2)), rel=1e-3)


def test_moment_rejects_nonintegrable_power():
    with pytest.raises(DomainError):
        PlanarDomain.disc(resolution=16).moment(-1.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.05, 1.0), b=st.floats(-2, 2), c=st.floats(-2, 2), alpha=st.sampled_from([-0.6, -0.3, 0.4]))
def test_linear_power_integral_against_quadrature(a, b, c, alpha):
    x0, x1, y0, y1 = -0.3, 0.2, -0.25, 0.35
    got = _linear_power_integral(np.array([a]), np.array([b]), np.array([c]), np.array([x0]), np.array([x1]),
                                 np.array([y0]), np.array([y1]), alpha)[0]

    def inner(x):
        # exact inner integral in y of the positive part
        f = lambda y: max(a + b * x + c * y, 0.0) ** alpha if a + b * x + c * y > 0 else 0.0
        pts = [-(a + b * x) / c] if c != 0 and y0 < -(a + b * x) / c < y1 else None
        return integrate.quad(f, y0, y1, points=pts, limit=200)[0]

    # the outer integrand has kinks (or an integrable singularity when c = 0)
    # where the zero line a + b x + c y = 0 meets the edges y = y0, y1
    kinks = [-(a + c * y) / b for y in (y0, y1)] if b != 0 else []
    pts = [k for k in kinks if x0 < k < x1] or None
    ref = integrate.quad(inner, x0, x1, points=pts, limit=200)[0]
    assert got == pytest.approx(ref, rel=1e-5, abs=1e-9)


def test_weighted_integral_example_values():
    dom = PlanarDomain.disc(resolution=128)
    assert dom.integrate(np.ones(len(dom.grid))).real == pytest.approx(np.pi, rel=1e-12)
    assert dom.integrate(np.ones(len(dom.grid)), alpha=-0.5).real == pytest.approx(2 * np.pi, rel=1e-3)
