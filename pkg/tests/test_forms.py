import numpy as np
import pytest
import sympy as sp

from hermitian_bergman import forms as F
from hermitian_bergman import geometry as geo
from hermitian_bergman import models
from hermitian_bergman.errors import HolomorphyError, SupportError
from hermitian_bergman.forms import QuadratureBox, VectorField10, ZeroOneForm
from hermitian_bergman.geometry import ScalarField

from . import oracles
from .helpers import random_points



def _one(n):
    return ScalarField(
        eval=lambda z: np.ones(z.shape[:-1]),
        dim=n,
        grad=lambda z: np.zeros(z.shape, dtype=complex),
        hess=lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex),
        name="one",
    )


def affine_form(n, c=None, L=None, K=None):
    c = np.zeros(n) if c is None else c
    return ZeroOneForm.affine_times(_one(n), c, L, K)


# ---------------------------------------------------------------- divergence


def test_divergence_examples():
    e = models.euclidean(2)
    Z = VectorField10.linear(np.diag([1.0, 0.0]))
    assert F.divergence(e, Z, [0.4, 0.1j]) == pytest.approx(1)
    assert F.divergence(e, VectorField10.constant([1, 2j]), [0.4, 0.1j]) == pytest.approx(0)


def test_divergence_hopf_symbolic_oracle(rng):
    n = 2
    Gs, z, zb = oracles.hopf_matrix(n)
    Gam = oracles.christoffel(Gs, z, zb)
    Zs = list(z)  # W_1
    T = [[[Gam[l][j][k] - Gam[l][k][j] for k in range(n)] for j in range(n)] for l in range(n)]
    div = sum(sp.diff(Zs[j], z[j]) for j in range(n)) + sum(
        (Gam[j][j][k] - T[j][j][k]) * Zs[k] for j in range(n) for k in range(n)
    )
    for p in [np.array([1.0, 0.0])] + list(random_points(rng, 3, n)):
        assert F.divergence(models.hopf(n), VectorField10.euler(n), p) == pytest.approx(
            oracles.evaluate(div, z, zb, p), abs=1e-12
        )


# ---------------------------------------------------------------- adjoint


def test_dbar_star_examples():
    e = models.euclidean(2)
    zero = models.zero_weight(2)
    u_bar = affine_form(2, K=np.diag([1.0, 0.0]))  # zbar_1 dzbar_1
    assert F.dbar_star_psi(e, zero, u_bar, [0.3, 0.2j]) == pytest.approx(0)
    u = affine_form(2, L=np.diag([1.0, 0.0]))  # z_1 dzbar_1
    assert F.dbar_star_psi(e, zero, u, [0.3, 0.2j]) == pytest.approx(-1)
    assert F.dbar_star_psi(e, models.norm2_weight(2), u, [1.0, 0.0]) == pytest.approx(0)


def test_dbar_star_matches_fd_of_raised_components(rng):
    g = models.hopf(2)
    psi = models.norm2_weight(2)
    u = affine_form(2, [0.2, 1j], rng.standard_normal((2, 2)), rng.standard_normal((2, 2)))
    z = random_points(rng, 4, 2)

    def raised(w):
        return F.raise_index(u(w), np.linalg.inv(g(w)))

    dU = np.stack([np.trace(m) for m in F.fd.wirtinger_gradient(raised, z)[0]])
    logdet_d = F.fd.wirtinger_gradient(lambda w: geo.log_det(g(w)), z)[0]
    U = raised(z)
    expected = -dU - np.sum(logdet_d * U, axis=-1) + np.sum(psi.d(z) * U, axis=-1)
    assert np.allclose(F.dbar_star_psi(g, psi, u, z), expected, atol=1e-7)


def test_adjoint_ibp_zero_and_support():
    quad = QuadratureBox([-1, -1], [1, 1], 32)
    zero = ScalarField(eval=lambda z: np.zeros(z.shape[:-1]), dim=1, support=([0.0, 0.0], [0.0, 0.0]))
    e = models.euclidean(1)
    assert F.adjoint_ibp_residual(e, models.zero_weight(1), zero, VectorField10.coordinate(1, 0), quad) == 0
    wide = F.bump([0.0], 2.0)
    with pytest.raises(SupportError):
        F.adjoint_ibp_residual(e, models.zero_weight(1), wide, VectorField10.coordinate(1, 0), quad)


def test_adjoint_ibp_euclidean_gaussians():
    f = F.gaussian([0.1 + 0.05j], 0.25)
    quad = QuadratureBox.around(f.support, 64)
    res = F.adjoint_ibp_residual(models.euclidean(1), models.zero_weight(1), f, VectorField10.coordinate(1, 0), quad)
    assert res < 1e-6


def test_adjoint_ibp_hopf_converges():
    f = F.bump([0.6 + 0.1j, 0.3 - 0.2j], 0.3)
    h = F.gaussian([0.5, 0.2j], 0.4)
    res = [
        F.adjoint_ibp_residual(models.hopf(2), models.zero_weight(2), f, VectorField10.euler(2),
                               QuadratureBox.around(f.support, r), h=h)
        for r in (12, 24, 36)
    ]
    assert res[-1] < 1e-3
    assert res[0] > res[1] > res[2]
    assert np.log2(res[0] / res[1]) >= 1.5


# ---------------------------------------------------------------- commutator


def test_commutator_flat_examples():
    e = models.euclidean(2)
    psi = models.norm2_weight(2)
    one = _one(2)
    d1, d2 = VectorField10.coordinate(2, 0), VectorField10.coordinate(2, 1)
    lhs, rhs = F.commutator_check(e, psi, d1, d1, one, [0.2, 0.1j])
    assert lhs == pytest.approx(1, abs=1e-6) and rhs == pytest.approx(1)
    lhs, rhs = F.commutator_check(e, psi, d1, d2, one, [0.2, 0.1j])
    assert lhs == pytest.approx(0, abs=1e-6) and rhs == pytest.approx(0)


def test_commutator_hopf_example():
    d2 = VectorField10.coordinate(2, 1)
    lhs, rhs = F.commutator_check(models.hopf(2), models.zero_weight(2), d2, d2, _one(2), [1.0, 0.0])
    assert rhs == pytest.approx(2)
    assert abs(lhs - rhs) <= 1e-4


def test_commutator_rejects_nonholomorphic():
    Z = VectorField10(coeffs=lambda z: np.conj(z), dim=2, holomorphic=True)
    with pytest.raises(HolomorphyError):
        F.commutator_check(models.euclidean(2), models.zero_weight(2), Z, Z, _one(2), [0.1, 0.2])
    unflagged = VectorField10(coeffs=lambda z: z, dim=2)
    with pytest.raises(HolomorphyError):
        F.commutator_check(models.euclidean(2), models.zero_weight(2), unflagged, unflagged, _one(2), [0.1, 0.2])


# ---------------------------------------------------------------- dbar on forms


def test_dbar_01_examples(rng):
    u = affine_form(2, K=np.array([[0, 1.0], [0, 0]]))  # zbar_2 dzbar_1
    z = random_points(rng, 3, 2)
    outs = [F.dbar_01(g, u, z) for g in (models.euclidean(2), models.hopf(2), models.fubini_study(2))]
    assert np.allclose(outs[0][:, 0, 1], -1)
    assert np.allclose(outs[0][:, 1, 0], 1)
    for o in outs[1:]:
        assert np.max(np.abs(o - outs[0])) <= 1e-10


def test_dbar_01_matches_naive_expression(rng):
    u = affine_form(3, rng.standard_normal(3), rng.standard_normal((3, 3)), rng.standard_normal((3, 3)) * 1j)
    z = random_points(rng, 5, 3)
    naive = u.dbar(z) - np.swapaxes(u.dbar(z), -1, -2)
    assert np.allclose(F.dbar_01(models.hopf(3), u, z), naive, atol=1e-12)


def test_dbar_squared_vanishes(rng):
    for _ in range(20):
        a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        b = rng.standard_normal((2, 2))
        f = ScalarField(
            eval=lambda z, a=a, b=b: np.real(np.exp(z @ a) + np.einsum("...j,jk,...k->...", z, b, np.conj(z))),
            dim=2,
            step=1e-3,
        )
        u = ZeroOneForm.dbar_of(f)
        assert np.max(np.abs(F.dbar_01(models.hopf(2), u, random_points(rng, 2, 2, 0.5)))) < 1e-5


# ---------------------------------------------------------------- torsion identity


def test_tau_identity_examples(rng):
    dz1 = affine_form(2, [1.0, 0.0])
    dz2 = affine_form(2, [0.0, 1.0])
    h = models.hopf(2)
    lhs, rhs = F.tau_identity_check(h, dz2, dz2, [1.0, 0.0])
    assert lhs == pytest.approx(1) and rhs == pytest.approx(1)
    lhs, rhs = F.tau_identity_check(h, dz1, dz2, [1.0, 0.0])
    assert lhs == pytest.approx(0) and rhs == pytest.approx(0)
    lhs, rhs = F.tau_identity_check(models.fubini_study(2), dz1, dz2, random_points(rng, 3, 2))
    assert np.allclose(lhs, 0, atol=1e-12) and np.allclose(rhs, 0, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_tau_identity_random_hopf(n, rng):
    z = random_points(rng, 50, n)
    u = affine_form(n, rng.standard_normal(n), rng.standard_normal((n, n)), 1j * rng.standard_normal((n, n)))
    v = affine_form(n, 1j * rng.standard_normal(n), rng.standard_normal((n, n)), rng.standard_normal((n, n)))
    lhs, rhs = F.tau_identity_check(models.hopf(n), u, v, z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8


def test_dual_torsion_form_matches_torsion_norm(rng):
    # |tau Z^flat|^2 read through the (0,1)-form u = conj(Z^flat) equals Q(Z, Zbar)
    g = models.hopf(3)
    z = random_points(rng, 10, 3)
    Z = random_points(rng, 10, 3)
    G = g(z)
    flat = np.einsum("pk,pjk->pj", Z, np.conj(G))
    u = ZeroOneForm(coeffs=lambda w: flat, dim=3)
    lhs, _ = F.tau_identity_check(g, u, u, z)
    assert np.allclose(lhs.real, geo.torsion_norm_form(g, z)(Z).real, atol=1e-10)


# ---------------------------------------------------------------- twisted identity


def test_bkmkh_zero_form():
    b = F.bump([0.1, 0.2], 0.3)
    u = ZeroOneForm(coeffs=lambda z: np.zeros(z.shape, dtype=complex), dim=2,
                    dz=lambda z: np.zeros(z.shape + (2,), dtype=complex),
                    dzbar=lambda z: np.zeros(z.shape + (2,), dtype=complex), support=b.support)
    res = F.bkmkh_residual(models.euclidean(2), models.zero_weight(2), _one(2), u, QuadratureBox.around(b.support, 8))
    assert res.residual == 0


def test_bkmkh_rejects_bad_inputs():
    b = F.bump([0.1, 0.2], 0.3)
    u = ZeroOneForm.from_scalar(b, [1, 0])
    with pytest.raises(SupportError):
        F.bkmkh_residual(models.euclidean(2), models.zero_weight(2), _one(2), u,
                         QuadratureBox([-0.1] * 4, [0.1] * 4, 8))
    neg = F.affine_real(2, -1.0, [0, 0])
    with pytest.raises(SupportError):
        F.bkmkh_residual(models.euclidean(2), models.zero_weight(2), neg, u, QuadratureBox.around(b.support, 8))


def test_bkmkh_flat_classical_case():
    b = F.bump([0.1 + 0.2j, -0.3 + 0.1j], 0.3)
    u = ZeroOneForm.from_scalar(b, [1, 0])
    res = F.bkmkh_residual(models.euclidean(2), models.zero_weight(2), _one(2), u, QuadratureBox.around(b.support, 32))
    assert res.residual < 1e-4


def test_bkmkh_flat_twisted_convergence():
    b = F.bump([0.1 + 0.2j, -0.3 + 0.1j], 0.3)
    u = ZeroOneForm.affine_times(b, [1, 0.5j], [[0.3, 1j], [0, 0.2]], [[0, 0.4], [0.5j, 0]])
    kappa = F.affine_real(2, 2.0, [0.5, 0.3j])
    res = [F.bkmkh_residual(models.euclidean(2), models.norm2_weight(2), kappa, u,
                            QuadratureBox.around(b.support, r)).residual for r in (12, 24)]
    assert res[1] < 1e-4
    assert np.log2(res[0] / res[1]) >= 1.5


def test_bkmkh_hopf_case():
    b = F.bump([0.6 + 0.1j, 0.3 - 0.2j], 0.3)
    u = ZeroOneForm.from_scalar(b, [0, 1])
    kappa = F.affine_real(2, 2.0, [1, 0])
    res = [F.bkmkh_residual(models.hopf(2), models.zero_weight(2), kappa, u,
                            QuadratureBox.around(b.support, r)) for r in (16, 32)]
    assert res[1].relative < 1e-2
    assert res[0].residual > res[1].residual
