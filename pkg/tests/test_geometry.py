import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermitian_bergman import geometry as geo
from hermitian_bergman import models
from hermitian_bergman.errors import DomainError, SingularMetricError
from hermitian_bergman.geometry import ChartPoint, HermitianForm, MetricField, ScalarField

from . import oracles
from .helpers import random_points


def test_chart_point_validation():
    assert ChartPoint([1, 2j]).dim == 2
    with pytest.raises(DomainError):
        ChartPoint([np.nan, 0])
    with pytest.raises(ValueError):
        ChartPoint(np.zeros((0,)))


def test_complex_hessian_examples():
    z = np.array([0.3 + 0.1j, -0.7 + 0.4j])
    norm2 = models.norm2_weight(2)
    assert np.allclose(geo.complex_hessian(norm2.with_fd(), z).matrix, np.eye(2), atol=1e-7)
    re_sq = ScalarField(eval=lambda w: np.real(w[..., 0] ** 2), dim=2)
    assert np.allclose(geo.complex_hessian(re_sq, z).matrix, 0, atol=1e-7)
    log_norm = ScalarField(eval=lambda w: np.log(np.sum(np.abs(w) ** 2, axis=-1)), dim=2)
    H = geo.complex_hessian(log_norm, np.array([1.0, 0.0])).matrix
    assert np.allclose(H, [[0, 0], [0, 1]], atol=1e-7)


def test_christoffel_examples():
    assert np.allclose(geo.christoffel(models.euclidean(2), [0.3, 1j]), 0)
    Gam = geo.christoffel(models.hopf(2), ChartPoint([1, 0]))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = expected[1, 0, 1] = -1  # Gamma^l_{1k} = -delta_kl
    assert np.allclose(Gam, expected, atol=1e-14)


def test_conformal_christoffel_against_fd(rng):
    g = models.conformal(2, c=[1.0, 0.0])
    z = random_points(rng, 5, 2, 0.5)
    Gam = geo.christoffel(g, z)
    dphi = np.array([0.5, 0.0])
    expected = np.einsum("j,kl->ljk", dphi, np.eye(2))
    assert np.allclose(Gam, np.broadcast_to(expected, Gam.shape), atol=1e-14)
    assert np.allclose(geo.christoffel(g.with_fd(), z), Gam, atol=1e-8)


def test_torsion_examples(rng):
    T = geo.torsion_coeffs(models.hopf(2), [1, 0]).coeffs
    assert T[1, 0, 1] == pytest.approx(-1)
    assert T[0, 0, 1] == pytest.approx(0)
    assert np.allclose(T, -np.swapaxes(T, -1, -2))
    z = random_points(rng, 100, 2)
    assert np.max(np.abs(geo.torsion_coeffs(models.euclidean(2), z).coeffs)) == 0
    assert np.max(np.abs(geo.torsion_coeffs(models.fubini_study(2), z).coeffs)) <= 1e-8


def test_hopf_torsion_closed_form(rng):
    n = 3
    z = random_points(rng, 20, n)
    T = geo.torsion_coeffs(models.hopf(n), z).coeffs
    r2 = np.sum(np.abs(z) ** 2, axis=-1)[:, None, None, None]
    zb = np.conj(z)
    eye = np.eye(n)
    # T^l_{jk} = -(zbar_j delta_kl - zbar_k delta_jl)/|z|^2
    expected = -(zb[:, None, :, None] * eye[:, None, :] - zb[:, None, None, :] * eye[:, :, None]) / r2
    assert np.allclose(T, expected, atol=1e-13)


@pytest.mark.parametrize("factory", [oracles.hopf_matrix, oracles.fubini_study_matrix])
def test_christoffel_and_curvature_symbolic_oracle(factory, rng):
    n = 2
    Gs, z, zb = factory(n)
    Gam_s = oracles.christoffel(Gs, z, zb)
    Th_s = oracles.curvature_trace(Gs, z, zb)
    metric = models.hopf(n) if factory is oracles.hopf_matrix else models.fubini_study(n)
    for p in random_points(rng, 3, n, 0.7):
        Gam = geo.christoffel(metric, p)
        Th = geo.curvature_trace(metric, p).matrix
        for l in range(n):
            for j in range(n):
                for k in range(n):
                    assert Gam[l, j, k] == pytest.approx(oracles.evaluate(Gam_s[l][j][k], z, zb, p), abs=1e-12)
        for j in range(n):
            for k in range(n):
                assert Th[j, k] == pytest.approx(oracles.evaluate(Th_s[j, k], z, zb, p), abs=1e-11)


def test_curvature_examples(rng):
    assert np.allclose(geo.curvature_trace(models.euclidean(2), [1, 2]).matrix, 0)
    assert np.allclose(geo.curvature_trace(models.hopf(2), [1, 0]).matrix, np.diag([0, 2]), atol=1e-14)
    fs = models.fubini_study(2)
    z = random_points(rng, 20, 2)
    assert np.allclose(geo.curvature_trace(fs, z).matrix, 3 * fs(z), atol=1e-6)
    assert np.allclose(geo.curvature_trace(fs.with_fd(), z).matrix, 3 * fs(z), atol=1e-6)


def test_torsion_norm_form_examples(rng):
    assert np.allclose(geo.torsion_norm_form(models.fubini_study(2), [0.2, 0.1j]).matrix, 0, atol=1e-12)
    assert np.allclose(geo.torsion_norm_form(models.hopf(2), [1, 0]).matrix, np.diag([0, 1]), atol=1e-14)
    g = models.hopf(3)
    z = random_points(rng, 20, 3)
    Q = geo.torsion_norm_form(g, z)
    ev = Q.metric_eigvalsh(g(z))
    assert np.allclose(ev, np.broadcast_to([0, 1, 1], ev.shape), atol=1e-6)
    # kernel spanned by W_1: operator form is the transpose, Q(Z, .) vanishes on Z = z
    assert np.allclose(np.einsum("pj,pjk->pk", z, Q.matrix), 0, atol=1e-10)
    assert np.all(Q.eigvalsh() >= -1e-10)


def test_kahler_comparison_weight_examples():
    e, h = models.euclidean(2), models.hopf(2)
    assert geo.kahler_comparison_weight(h, h, [0.3, 0.2]) == 0
    c = 3.0
    hc = MetricField(eval=lambda z: c * h(z), dim=2)
    assert geo.kahler_comparison_weight(h, hc, [0.3, 0.2]) == pytest.approx(-2 * np.log(c))
    assert geo.kahler_comparison_weight(e, h, [1, 0]) == pytest.approx(0, abs=1e-15)
    assert geo.kahler_comparison_weight(e, h, [2, 0]) == pytest.approx(np.log(16))


def test_kahler_comparison_weight_hessian_identity(rng):
    g, gt = models.fubini_study(2), models.hopf(2)
    weight = ScalarField(eval=lambda z: geo.kahler_comparison_weight(g, gt, z), dim=2)
    for p in random_points(rng, 5, 2, 0.8):
        lhs = geo.complex_hessian(weight, p).matrix
        rhs = geo.curvature_trace(gt, p).matrix - geo.curvature_trace(g, p).matrix
        assert np.allclose(lhs, rhs, atol=1e-5)


def test_singular_metric_raises():
    bad = MetricField(eval=lambda z: np.diag([1.0, 1e-16]).astype(complex), dim=2)
    with pytest.raises(SingularMetricError):
        geo.christoffel(bad, [0, 0])
    with pytest.raises(SingularMetricError):
        geo.log_det(np.diag([1.0, -1.0]))


def test_fd_stencil_domain_error():
    with pytest.raises(DomainError):
        geo.christoffel(models.hopf(2).with_fd(1e-4), [1e-4, 0])


@pytest.mark.parametrize("metric", ["hopf", "fubini-study", "conformal"])
def test_analytic_vs_fd_order(metric, rng):
    g = {"hopf": models.hopf(2), "fubini-study": models.fubini_study(2),
         "conformal": models.conformal(2, c=[1 + 1j, 0.5], q=0.7)}[metric]
    z = random_points(rng, 4, 2, 0.5) + 0.6
    ref_G = geo.christoffel(g, z)
    errs = [np.max(np.abs(geo.christoffel(g.with_fd(h), z) - ref_G)) for h in (1e-2, 1e-3)]
    order = np.log10(errs[0] / errs[1])
    assert order >= 1.8
    ref_T = geo.curvature_trace(g, z).matrix
    errs = [np.max(np.abs(geo.curvature_trace(g.with_fd(h), z).matrix - ref_T)) for h in (1e-2, 1e-3)]
    if metric == "conformal":
        # log det is quadratic here, so the stencil is exact up to rounding
        assert max(errs) < 1e-8
    else:
        assert np.log10(errs[0] / errs[1]) >= 1.8
    assert np.max(np.abs(geo.curvature_trace(g.with_fd(1e-4), z).matrix - ref_T)) < 1e-5


def test_curvature_frame_invariance(rng):
    # g'(w) = A^T g(A w) conj(A) is the pull-back along z = A w; scalars Theta(Z, Zbar) agree
    g = models.hopf(2)
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    pulled = MetricField(eval=lambda w: A.T @ g(w @ A.T) @ np.conj(A), dim=2)
    for _ in range(5):
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        Zw = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        lhs = geo.curvature_trace(pulled, w)(Zw)
        rhs = geo.curvature_trace(g, A @ w)(A @ Zw)
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_torsion_norm_form_is_psd(vals):
    z = np.array(vals[:3]) + 1j * np.array(vals[3:])
    if np.linalg.norm(z) < 1e-3:
        z = z + 0.5
    for g in (models.hopf(3), models.conformal(3, c=[1, 0.5j, 0], q=0.3)):
        assert geo.torsion_norm_form(g, z).min_eig() >= -1e-10


def test_hermitian_form_algebra(rng):
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    H = HermitianForm(M + M.conj().T)
    Z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    assert np.isclose(H(Z), Z @ H.matrix @ np.conj(Z))
    assert abs(H(Z).imag) < 1e-12
    assert np.allclose((2 * H - H).matrix, H.matrix)
    assert H.hermitian_defect() < 1e-15


@pytest.mark.parametrize("n", [2, 3])
def test_kahler_differential_matches_torsion(n, rng):
    z = models.HopfChart(n, 0.5).sample(20, rng)
    g = models.hopf(n)
    domega, tau_omega = geo.kahler_differential_check(g, z)
    assert np.max(np.abs(domega - tau_omega)) <= 1e-5
    # independent closed form: d omega = -d log|z|^2 ^ omega for the Hopf metric
    dlog = np.conj(z) / np.sum(np.abs(z) ** 2, axis=-1, keepdims=True)
    G = g(z)
    wedge = dlog[:, :, None, None] * G[:, None, :, :] - dlog[:, None, :, None] * G[:, :, None, :]
    assert np.allclose(tau_omega, -0.5j * wedge, atol=1e-12)


def test_kahler_differential_vanishes_for_kahler(rng):
    z = random_points(rng, 20, 2)
    domega, tau_omega = geo.kahler_differential_check(models.fubini_study(2), z)
    assert np.max(np.abs(domega)) <= 1e-6
    assert np.max(np.abs(tau_omega)) <= 1e-12
