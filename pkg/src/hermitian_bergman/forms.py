"""Operators on functions, vector fields and (0,1)-forms.

A (0,1)-form ``u = sum_j u_j dzbar_j`` is stored through its coordinate
coefficients ``u_j``. Its raised components are ``u^j = sum_a u_a g^{abar j}``
and the pointwise inner product of two (0,1)-forms is
``<u, v> = sum_{a,b} u_a conj(v_b) g^{abar b}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import fd
from .errors import HolomorphyError, NumericalError, SupportError
from .geometry import (
    MetricField,
    ScalarField,
    as_coords,
    christoffel,
    curvature_trace,
    inverse_metric,
    orthonormal_frame,
    torsion_coeffs,
)

# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class VectorField10:
    """A (1,0) vector field ``Z = sum_j Z^j d_j``.

    ``jac[..., j, k]`` is ``d_j Z^k``; ``jac_bar[..., j, k]`` is ``dbar_j Z^k``.
    """

    coeffs: Callable
    dim: int
    jac: Callable | None = None
    jac_bar: Callable | None = None
    holomorphic: bool = False
    step: float = fd.DEFAULT_STEP
    name: str = "Z"

    def __call__(self, z) -> np.ndarray:
        v = np.asarray(self.coeffs(as_coords(z)), dtype=complex)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite coefficients of {self.name}")
        return v

    def dz(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.jac is not None:
            return np.asarray(self.jac(z), dtype=complex)
        return fd.wirtinger_gradient(self.coeffs, z, self.step)[0]

    def dzbar(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.jac_bar is not None:
            return np.asarray(self.jac_bar(z), dtype=complex)
        return fd.wirtinger_gradient(self.coeffs, z, self.step)[1]

    @classmethod
    def constant(cls, vec) -> "VectorField10":
        vec = np.asarray(vec, dtype=complex)
        n = vec.shape[0]
        zero = lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex)  # noqa: E731
        return cls(
            coeffs=lambda z: np.broadcast_to(vec, z.shape).copy(),
            dim=n,
            jac=zero,
            jac_bar=zero,
            holomorphic=True,
            name="constant",
        )

    @classmethod
    def coordinate(cls, n: int, j: int) -> "VectorField10":
        """The coordinate field ``d_j`` (zero-based ``j``)."""
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        return cls.constant(e)

    @classmethod
    def linear(cls, M) -> "VectorField10":
        """Holomorphic linear field with coefficients ``Z^k = sum_j M[k, j] z_j``."""
        M = np.asarray(M, dtype=complex)
        n = M.shape[0]
        return cls(
            coeffs=lambda z: z @ M.T,
            dim=n,
            jac=lambda z: np.broadcast_to(M.T, z.shape[:-1] + (n, n)).copy(),
            jac_bar=lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex),
            holomorphic=True,
            name="linear",
        )

    @classmethod
    def euler(cls, n: int) -> "VectorField10":
        """The radial field ``W_1 = sum_j z_j d_j``."""
        return cls.linear(np.eye(n))


@dataclass(frozen=True)
class ZeroOneForm:
    """A (0,1)-form with coefficients ``u_k``.

    ``dz[..., j, k] = d_j u_k`` and ``dzbar[..., j, k] = dbar_j u_k``.
    ``support`` is an optional real box ``(lower, upper)`` in the ordering
    ``(Re z_1..Re z_n, Im z_1..Im z_n)``.
    """

    coeffs: Callable
    dim: int
    dz: Callable | None = None
    dzbar: Callable | None = None
    support: tuple | None = None
    step: float = fd.DEFAULT_STEP
    name: str = "u"

    def __call__(self, z) -> np.ndarray:
        v = np.asarray(self.coeffs(as_coords(z)), dtype=complex)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite coefficients of {self.name}")
        return v

    def d(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.dz is not None:
            return np.asarray(self.dz(z), dtype=complex)
        return fd.wirtinger_gradient(self.coeffs, z, self.step)[0]

    def dbar(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.dzbar is not None:
            return np.asarray(self.dzbar(z), dtype=complex)
        return fd.wirtinger_gradient(self.coeffs, z, self.step)[1]

    @classmethod
    def from_scalar(cls, f: ScalarField, direction) -> "ZeroOneForm":
        """``u = f * sum_k c_k dzbar_k`` for a constant vector ``c``."""
        c = np.asarray(direction, dtype=complex)
        return cls(
            coeffs=lambda z: np.asarray(f(z))[..., None] * c,
            dim=f.dim,
            dz=lambda z: f.d(z)[..., :, None] * c,
            dzbar=lambda z: f.dbar(z)[..., :, None] * c,
            support=f.support,
            name=f"{f.name}*dzbar",
        )

    @classmethod
    def affine_times(cls, f: ScalarField, const, lin=None, antilin=None) -> "ZeroOneForm":
        """``u_k = f(z) (c_k + sum_j L[k, j] z_j + sum_j K[k, j] zbar_j)``."""
        c = np.asarray(const, dtype=complex)
        n = c.shape[0]
        L = np.zeros((n, n), complex) if lin is None else np.asarray(lin, dtype=complex)
        K = np.zeros((n, n), complex) if antilin is None else np.asarray(antilin, dtype=complex)

        def p(z):
            return c + z @ L.T + np.conj(z) @ K.T

        def coeffs(z):
            return np.asarray(f(z))[..., None] * p(z)

        def dz(z):
            return f.d(z)[..., :, None] * p(z)[..., None, :] + np.asarray(f(z))[..., None, None] * L.T

        def dzbar(z):
            return f.dbar(z)[..., :, None] * p(z)[..., None, :] + np.asarray(f(z))[..., None, None] * K.T

        return cls(coeffs=coeffs, dim=n, dz=dz, dzbar=dzbar, support=f.support, name=f"{f.name}*affine")

    @classmethod
    def dbar_of(cls, f: ScalarField) -> "ZeroOneForm":
        """``u = dbar f`` with coefficients from central differences of ``f``."""
        return cls(coeffs=lambda z: f.dbar(z), dim=f.dim, step=f.step, name=f"dbar {f.name}")


@dataclass(frozen=True)
class QuadratureBox:
    """Midpoint tensor grid on a box in ``R^{2n}``.

    Real coordinates are ordered ``(Re z_1..Re z_n, Im z_1..Im z_n)``.
    """

    lower: np.ndarray
    upper: np.ndarray
    resolution: int | tuple = 32

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.shape[0] % 2:
            raise ValueError("box bounds must be two vectors of even length 2n")
        if np.any(hi <= lo):
            raise ValueError("box must have positive extent along every axis")
        res = np.broadcast_to(np.asarray(self.resolution, dtype=int), lo.shape).copy()
        if np.any(res < 1):
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", tuple(int(r) for r in res))

    @property
    def dim(self) -> int:
        return self.lower.shape[0] // 2

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod((self.upper - self.lower) / np.asarray(self.resolution)))

    def contains(self, box: tuple | None) -> bool:
        if box is None:
            return False
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        return bool(np.all(lo >= self.lower) and np.all(hi <= self.upper))

    def chunks(self, size: int = 1 << 18) -> Iterator[tuple[np.ndarray, float]]:
        """Yield ``(z, weight)`` with ``z`` of shape ``(m, n)`` in a fixed order."""
        res = np.asarray(self.resolution)
        h = (self.upper - self.lower) / res
        n = self.dim
        total = self.n_nodes
        for start in range(0, total, size):
            idx = np.unravel_index(np.arange(start, min(start + size, total)), self.resolution)
            x = self.lower + (np.stack(idx, axis=-1) + 0.5) * h
            yield x[:, :n] + 1j * x[:, n:], self.cell_volume

    @classmethod
    def around(cls, box: tuple, resolution, pad: float = 0.05) -> "QuadratureBox":
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        w = hi - lo
        return cls(lo - pad * w, hi + pad * w, resolution)


# ---------------------------------------------------------------- test functions


def bump(center, width: float) -> ScalarField:
    """Compactly supported bump ``exp(1 - 1/(1-q))``, ``q = |z-c|^2/width^2``."""
    c = np.asarray(center, dtype=complex)
    n = c.shape[0]
    w2 = float(width) ** 2
    eye = np.eye(n)

    def parts(z):
        d = z - c
        q = np.sum(np.abs(d) ** 2, axis=-1) / w2
        inside = q < 1
        qi = np.where(inside, q, 0.0)
        b = np.where(inside, np.exp(1 - 1 / (1 - qi)), 0.0)
        return d, qi, b, inside

    def ev(z):
        return parts(z)[2]

    def grad(z):
        d, q, b, _ = parts(z)
        return -(b / (w2 * (1 - q) ** 2))[..., None] * np.conj(d)

    def hess(z):
        d, q, b, _ = parts(z)
        p1 = -1 / (1 - q) ** 2
        p2 = -2 / (1 - q) ** 3
        dq = np.conj(d) / w2
        outer = dq[..., :, None] * np.conj(dq)[..., None, :]
        return b[..., None, None] * ((p2 + p1**2)[..., None, None] * outer + p1[..., None, None] * eye / w2)

    lo = np.concatenate([c.real, c.imag]) - width
    hi = np.concatenate([c.real, c.imag]) + width
    return ScalarField(eval=ev, dim=n, grad=grad, hess=hess, support=(lo, hi), name="bump")


def gaussian(center, width: float, cutoff: float = 6.0) -> ScalarField:
    """Gaussian ``exp(-|z-c|^2/width^2)``; treated as supported in ``|x - c| <= cutoff*width``."""
    c = np.asarray(center, dtype=complex)
    n = c.shape[0]
    w2 = float(width) ** 2
    eye = np.eye(n)

    def ev(z):
        return np.exp(-np.sum(np.abs(z - c) ** 2, axis=-1) / w2)

    def grad(z):
        return -ev(z)[..., None] * np.conj(z - c) / w2

    def hess(z):
        dq = np.conj(z - c) / w2
        outer = dq[..., :, None] * np.conj(dq)[..., None, :]
        return ev(z)[..., None, None] * (outer - eye / w2)

    lo = np.concatenate([c.real, c.imag]) - cutoff * width
    hi = np.concatenate([c.real, c.imag]) + cutoff * width
    return ScalarField(eval=ev, dim=n, grad=grad, hess=hess, support=(lo, hi), name="gaussian")


def affine_real(n: int, const: float, coeff) -> ScalarField:
    """Real affine function ``const + Re(sum_j a_j z_j)``."""
    a = np.asarray(coeff, dtype=complex)
    return ScalarField(
        eval=lambda z: const + np.real(z @ a),
        dim=n,
        grad=lambda z: np.broadcast_to(a / 2, z.shape).copy(),
        hess=lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex),
        name="affine",
    )


# ---------------------------------------------------------------- pointwise operators


def raise_index(u: np.ndarray, Ginv: np.ndarray) -> np.ndarray:
    """Raised components ``u^j = sum_a u_a g^{abar j}``."""
    return np.einsum("...a,...aj->...j", u, Ginv)


def form_inner(a: np.ndarray, b: np.ndarray, Ginv: np.ndarray) -> np.ndarray:
    """Pointwise inner product of (0,1)-forms."""
    return np.einsum("...a,...ab,...b->...", a, Ginv, np.conj(b))


def _divergence_parts(g: MetricField, z: np.ndarray):
    Gam = christoffel(g, z)
    T = torsion_coeffs(g, z).coeffs
    # c_k = sum_j (Gamma^j_{jk} - T^j_{jk}), the zeroth-order divergence coefficient
    c = np.einsum("...jjk->...k", Gam) - np.einsum("...jjk->...k", T)
    return Gam, T, c


def divergence(g: MetricField, Z: VectorField10, z) -> np.ndarray:
    """``Div Z = sum_j [d_j Z^j + sum_k (Gamma^j_{jk} - T^j_{jk}) Z^k]``."""
    z = as_coords(z)
    _, _, c = _divergence_parts(g, z)
    return np.einsum("...jj->...", Z.dz(z)) + np.einsum("...k,...k->...", c, Z(z))


def dbar_star_psi(g: MetricField, psi: ScalarField, u: ZeroOneForm, z) -> np.ndarray:
    """Weighted formal adjoint ``sum_j (Wbar_j)^*_psi u^j`` in the coordinate frame.

    Each term is ``-d_j u^j - Div(d_j) u^j + (d_j psi) u^j``.
    """
    z = as_coords(z)
    return _dbar_star(g, psi, u, z)


def _dbar_star(g, psi, u, z, G=None, Ginv=None, dG=None, c=None):
    if G is None:
        G = g(z)
        Ginv = inverse_metric(G)
        dG = g.dG(z)
        c = _divergence_parts(g, z)[2]
    uc = u(z)
    du = u.d(z)
    U = raise_index(uc, Ginv)
    # d_j Ginv = -Ginv (d_j G) Ginv
    dGinv = -np.einsum("...ab,...jbc,...cd->...jad", Ginv, dG, Ginv)
    dU = np.einsum("...ja,...aj->...", du, Ginv) + np.einsum("...a,...jaj->...", uc, dGinv)
    return -dU - np.einsum("...j,...j->...", c, U) + np.einsum("...j,...j->...", psi.d(z), U)


def dbar_01(g: MetricField, u: ZeroOneForm, z) -> np.ndarray:
    """Coefficients ``[..., j, k] = (dbar u)(dbar_j, dbar_k)``.

    Assembled from ``(1/2) sum_j theta^j ^ (nabla + nabla^T)_{Wbar_j} u``; the
    connection terms are symmetric in ``j, k`` and cancel on antisymmetrization.
    """
    z = as_coords(z)
    return _dbar_01(u.dbar(z), u(z), christoffel(g, z))


def _dbar_01(dbu, uc, Gam):
    conn = np.einsum("...ljk,...l->...jk", np.conj(Gam), uc)
    b = dbu - 0.5 * (conn + np.swapaxes(conn, -1, -2))
    return b - np.swapaxes(b, -1, -2)


def nabla_T_bar(dbu: np.ndarray, uc: np.ndarray, Gam: np.ndarray) -> np.ndarray:
    """``N[..., j, k] = (nabla^T_{dbar_j} u)(dbar_k) = dbar_j u_k - sum_l conj(Gamma^l_{kj}) u_l``."""
    return dbu - np.einsum("...lkj,...l->...jk", np.conj(Gam), uc)


def torsion_action(uc: np.ndarray, Ton: np.ndarray) -> np.ndarray:
    """``(tau u)(Ebar_a, Ebar_b) = u(T(Ebar_a, Ebar_b)) = sum_l conj(T^l_ab) u_l``."""
    return np.einsum("...lab,...l->...ab", np.conj(Ton), uc)


def _two_tensor_norm2(N: np.ndarray, A: np.ndarray) -> np.ndarray:
    # components on the orthonormal co-frame: N(Ebar_a, Ebar_b) = conj(A)^T N conj(A)
    Ab = np.conj(A)
    M = np.einsum("...ja,...jk,...kb->...ab", Ab, N, Ab)
    return np.sum(np.abs(M) ** 2, axis=(-1, -2))


def tau_identity_check(g: MetricField, u: ZeroOneForm, v: ZeroOneForm, z) -> tuple[complex, complex]:
    """Both sides of ``<tau u, tau v> = (1/2) <(nabla^T - nabla) u, (nabla^T - nabla) v>``.

    The left side sums ``u(T(Ebar_a, Ebar_b)) conj(v(T(Ebar_a, Ebar_b)))`` over
    ``a < b`` in an orthonormal frame. The right side uses
    ``(nabla^T - nabla)_{dbar_j} u = sum_k u(T(dbar_j, dbar_k)) dzbar_k`` in
    the coordinate frame, contracted with the inverse metric.
    """
    z = as_coords(z)
    G = g(z)
    A = orthonormal_frame(G)
    T = torsion_coeffs(g, z).coeffs
    Ton = np.einsum("...ja,...kb,...ljk->...lab", A, A, T)
    tu = torsion_action(u(z), Ton)
    tv = torsion_action(v(z), Ton)
    n = G.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    lhs = np.sum(tu[..., iu, ju] * np.conj(tv[..., iu, ju]), axis=-1)

    Ginv = inverse_metric(G)
    Du = np.einsum("...ljk,...l->...jk", np.conj(T), u(z))
    Dv = np.einsum("...ljk,...l->...jk", np.conj(T), v(z))
    rhs = 0.5 * np.einsum("...ja,...jk,...ab,...kb->...", Du, Ginv, Ginv, np.conj(Dv))
    return lhs, rhs


# ---------------------------------------------------------------- adjoint and commutator


def _zbar_of(Z: VectorField10, f_dbar: np.ndarray, zc: np.ndarray) -> np.ndarray:
    return np.einsum("...j,...j->...", np.conj(Z(zc)), f_dbar)


def _zbar_star(g, psi, Z: VectorField10, h: ScalarField | Callable, z, dh=None):
    """``(Zbar)^*_psi h = -Z h - (Div Z) h + (Z psi) h`` at ``z``."""
    Zc = Z(z)
    hv = np.asarray(h(z))
    if dh is None:
        dh = h.d(z) if isinstance(h, ScalarField) else fd.wirtinger_gradient(h, z)[0]
    Zh = np.einsum("...j,...j->...", Zc, dh)
    Zpsi = np.einsum("...j,...j->...", Zc, psi.d(z))
    return -Zh - divergence(g, Z, z) * hv + Zpsi * hv


def adjoint_ibp_residual(
    g: MetricField,
    psi: ScalarField,
    f: ScalarField,
    Z: VectorField10,
    quad: QuadratureBox,
    h: ScalarField | None = None,
) -> float:
    """``|<Zbar f, h>_psi - <f, (Zbar)^*_psi h>_psi|`` by midpoint quadrature.

    ``f`` must carry a support box contained in ``quad``. The volume form is
    ``det g`` times Lebesgue measure. The default test function ``h`` is a
    Gaussian centred in the box, multiplied by ``1 + z_1`` through its centre
    offset so that it is not radially symmetric.
    """
    if not quad.contains(f.support):
        raise SupportError("f is not supported inside the quadrature box")
    if h is None:
        mid = 0.5 * (quad.lower + quad.upper)
        n = quad.dim
        center = mid[:n] + 1j * mid[n:] + 0.1
        h = gaussian(center, 0.5 * float(np.min(quad.upper - quad.lower)))
    total = 0.0 + 0.0j
    for z, w in quad.chunks():
        fv = f(z)
        if not np.any(fv):
            continue
        G = g(z)
        vol = np.real(np.linalg.det(G)) * np.exp(-psi(z)) * w
        left = _zbar_of(Z, f.dbar(z), z) * np.conj(h(z))
        right = fv * np.conj(_zbar_star(g, psi, Z, h, z))
        total += np.sum((left - right) * vol)
    return float(abs(total))


def _require_holomorphic(Z: VectorField10, z: np.ndarray, tol: float = 1e-6):
    if not Z.holomorphic:
        raise HolomorphyError(f"vector field {Z.name} is not flagged holomorphic")
    defect = np.max(np.abs(fd.wirtinger_gradient(Z.coeffs, z, Z.step)[1]), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(Z(z)), initial=0.0)))
    if defect > tol * scale:
        raise HolomorphyError(f"vector field {Z.name} fails the holomorphy check ({defect:.2e})")


def commutator_check(
    g: MetricField,
    psi: ScalarField,
    Z1: VectorField10,
    Z2: VectorField10,
    phi: ScalarField,
    z,
    step: float = fd.DEFAULT_STEP,
) -> tuple[complex, complex]:
    """Both sides of ``[Zbar_2, (Zbar_1)^*_psi] phi = (Theta + d dbar psi)(Z_1, Zbar_2) phi``.

    The left side applies the adjoint formula pointwise and takes the outer
    derivatives by central differences.
    """
    z = as_coords(z)
    _require_holomorphic(Z1, z)
    _require_holomorphic(Z2, z)

    def a_phi(w):
        return _zbar_star(g, psi, Z1, phi, w)

    def zbar2_phi(w):
        return _zbar_of(Z2, phi.dbar(w), w)

    dbar_aphi = fd.wirtinger_gradient(a_phi, z, step)[1]
    first = _zbar_of(Z2, dbar_aphi, z)
    d_b = fd.wirtinger_gradient(zbar2_phi, z, step)[0]
    second = _zbar_star(g, psi, Z1, zbar2_phi, z, dh=d_b)
    lhs = first - second

    H = curvature_trace(g, z).matrix + psi.ddbar(z)
    rhs = np.einsum("...j,...jk,...k->...", Z1(z), H, np.conj(Z2(z))) * phi(z)
    return lhs, rhs


# ---------------------------------------------------------------- twisted identity


@dataclass(frozen=True)
class BKMKHResult:
    """Integrals of the twisted Bochner-Kodaira identity for one grid."""

    lhs: float
    rhs: float
    terms: dict

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.residual / scale if scale > 0 else 0.0


def bkmkh_residual(
    g: MetricField,
    psi: ScalarField,
    kappa: ScalarField,
    u: ZeroOneForm,
    quad: QuadratureBox,
    chunk: int = 1 << 17,
) -> BKMKHResult:
    """Evaluate both sides of the twisted identity for a compactly supported form.

    Left: ``||sqrt(k) dbar u||^2 + ||sqrt(k) dbar*_psi u||^2``.
    Right: ``||sqrt(k) nabla-bar^T u||^2 - ||sqrt(k) tau u||^2
    + 2 Re(dbar*_psi u, <u, dbar k>) + ((k Theta + k d dbar psi - d dbar k) u, u)``.
    All integrals use ``e^{-psi} det g`` against Lebesgue measure on ``quad``.
    """
    if not quad.contains(u.support):
        raise SupportError("u is not supported inside the quadrature box")
    names = ("dbar", "dbar_star", "nabla_T", "tau", "twist", "curvature")
    acc = dict.fromkeys(names, 0.0)
    lo, hi = (np.asarray(b) for b in u.support)
    n = quad.dim
    for z, w in quad.chunks(chunk):
        x = np.concatenate([z.real, z.imag], axis=-1)
        keep = np.all((x >= lo) & (x <= hi), axis=-1)
        if not np.any(keep):
            continue
        z = z[keep]
        uc = u(z)
        nz = np.any(uc != 0, axis=-1)
        if not np.any(nz):
            continue
        z, uc = z[nz], uc[nz]
        k = kappa(z)
        if np.any(k <= 0):
            raise SupportError("kappa must be positive on the support of u")

        G = g(z)
        Ginv = inverse_metric(G)
        dG = g.dG(z)
        Gam, T, c = _divergence_parts(g, z)
        A = orthonormal_frame(G)
        Ton = np.einsum("...ja,...kb,...ljk->...lab", A, A, T)
        Theta = curvature_trace(g, z).matrix
        vol = np.real(np.linalg.det(G)) * np.exp(-psi(z)) * w

        dbu = u.dbar(z)
        a = _dbar_01(dbu, uc, Gam)
        dbar_sq = 0.5 * np.real(np.einsum("...jk,...jl,...km,...lm->...", a, Ginv, Ginv, np.conj(a)))
        ds = _dbar_star(g, psi, u, z, G, Ginv, dG, c)
        nT = _two_tensor_norm2(nabla_T_bar(dbu, uc, Gam), A)
        tau_sq = 0.5 * np.sum(np.abs(torsion_action(uc, Ton)) ** 2, axis=(-1, -2))
        U = raise_index(uc, Ginv)
        u_dk = np.einsum("...b,...b->...", U, kappa.d(z))  # <u, dbar kappa>
        twist = 2 * np.real(ds * np.conj(u_dk))
        H = k[:, None, None] * (Theta + psi.ddbar(z)) - kappa.ddbar(z)
        curv = np.real(np.einsum("...j,...jk,...k->...", U, H, np.conj(U)))

        acc["dbar"] += float(np.sum(k * dbar_sq * vol))
        acc["dbar_star"] += float(np.sum(k * np.abs(ds) ** 2 * vol))
        acc["nabla_T"] += float(np.sum(k * nT * vol))
        acc["tau"] += float(np.sum(k * tau_sq * vol))
        acc["twist"] += float(np.sum(twist * vol))
        acc["curvature"] += float(np.sum(curv * vol))

    lhs = acc["dbar"] + acc["dbar_star"]
    rhs = acc["nabla_T"] - acc["tau"] + acc["twist"] + acc["curvature"]
    return BKMKHResult(lhs=lhs, rhs=rhs, terms=acc)
