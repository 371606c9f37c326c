"""Chart-local Hermitian geometry.

A metric is stored as the matrix ``G[j, k] = g_{j kbar}``, so the Hermitian
inner product of two (1,0) vectors is ``<Z, W> = Z^T G conj(W)``. A (1,1)-form
``Theta`` is stored as ``M[j, k] = Theta(d_j, dbar_k)``, whose quadratic value is
``Theta(Z, Zbar) = Z^T M conj(Z)``.

All functions accept batched points of shape ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import fd
from .errors import DomainError, NumericalError, SingularMetricError

PIVOT_FLOOR = 1e-14
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ChartPoint:
    """Local holomorphic coordinates of a point in a chart."""

    coords: np.ndarray
    chart_id: str = "0"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=complex))
        if c.ndim != 1 or c.shape[0] < 1:
            raise ValueError("a chart point needs a 1-d coordinate vector with n >= 1")
        if not np.all(np.isfinite(c)):
            raise DomainError("chart coordinates must be finite")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


def as_coords(z) -> np.ndarray:
    """Coordinates of a :class:`ChartPoint` or array-like as a complex array."""
    if isinstance(z, ChartPoint):
        return z.coords
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise DomainError("chart coordinates must be finite")
    return z


def _hermitian_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0))


@dataclass(frozen=True)
class HermitianForm:
    """A (1,1)-form in the coordinate frame, ``matrix[..., j, k] = Theta(d_j, dbar_k)``."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[-1]

    def __call__(self, Z, W=None) -> np.ndarray:
        """Evaluate ``Theta(Z, Wbar)``; ``W`` defaults to ``Z``."""
        Z = np.asarray(Z, dtype=complex)
        W = Z if W is None else np.asarray(W, dtype=complex)
        return np.einsum("...j,...jk,...k->...", Z, self.matrix, np.conj(W))

    def hermitian_defect(self) -> float:
        return _hermitian_defect(self.matrix)

    def symmetrized(self) -> "HermitianForm":
        m = self.matrix
        return HermitianForm(0.5 * (m + np.conj(np.swapaxes(m, -1, -2))))

    def eigvalsh(self) -> np.ndarray:
        """Eigenvalues of the symmetrized coordinate matrix, ascending."""
        return np.linalg.eigvalsh(self.symmetrized().matrix)

    def metric_eigvalsh(self, G: np.ndarray) -> np.ndarray:
        """Eigenvalues of the form relative to the metric ``G``.

        These are the values ``lambda`` with ``Theta(Z, Zbar) = lambda |Z|_g^2``
        on eigenvectors, i.e. the eigenvalues in a unitary frame.
        """
        L = metric_cholesky(G)
        Linv = np.linalg.inv(L)
        # Theta(Z,Zbar) = x^H M x with x = conj(Z); |Z|^2 = x^H G x.
        C = Linv @ self.symmetrized().matrix @ np.conj(np.swapaxes(Linv, -1, -2))
        return np.linalg.eigvalsh(0.5 * (C + np.conj(np.swapaxes(C, -1, -2))))

    def min_eig(self) -> np.ndarray:
        return self.eigvalsh()[..., 0]

    def __add__(self, other: "HermitianForm") -> "HermitianForm":
        return HermitianForm(self.matrix + other.matrix)

    def __sub__(self, other: "HermitianForm") -> "HermitianForm":
        return HermitianForm(self.matrix - other.matrix)

    def __neg__(self) -> "HermitianForm":
        return HermitianForm(-self.matrix)

    def __mul__(self, c) -> "HermitianForm":
        c = np.asarray(c)
        return HermitianForm(self.matrix * c[..., None, None])

    __rmul__ = __mul__


@dataclass(frozen=True)
class TorsionCoefficients:
    """Torsion ``coeffs[..., l, j, k] = T^l_{jk}``, antisymmetric in ``j, k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        object.__setattr__(self, "coeffs", 0.5 * (c - np.swapaxes(c, -1, -2)))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[-1]


@dataclass(frozen=True)
class ScalarField:
    """A function on a chart with optional analytic derivatives.

    Parameters
    ----------
    eval : callable
        Maps points ``(..., n)`` to values ``(...)``.
    dim : int
        Complex dimension ``n``.
    grad : callable, optional
        ``d f / d z_j`` with shape ``(..., n)``.
    grad_bar : callable, optional
        ``d f / d zbar_j``. For real fields it defaults to ``conj(grad)``.
    hess : callable, optional
        ``d^2 f / d z_j d zbar_k`` with shape ``(..., n, n)``.
    real : bool
        Whether the field is real valued.
    deriv_mode : {"analytic", "fd"}
        ``"fd"`` ignores the callbacks and uses central differences.
    support : tuple of arrays, optional
        Real box ``(lower, upper)`` in the ordering ``(Re z_1..Re z_n, Im z_1..Im z_n)``
        outside of which the field vanishes.
    """

    eval: Callable
    dim: int
    grad: Callable | None = None
    grad_bar: Callable | None = None
    hess: Callable | None = None
    real: bool = True
    deriv_mode: str = "analytic"
    step: float = fd.DEFAULT_STEP
    domain: Callable | None = None
    support: tuple | None = None
    name: str = "scalar"

    def __call__(self, z) -> np.ndarray:
        v = np.asarray(self.eval(as_coords(z)))
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite value of {self.name}")
        return v.real if self.real and np.iscomplexobj(v) else v

    def _use_analytic(self, cb) -> bool:
        return self.deriv_mode == "analytic" and cb is not None

    def d(self, z) -> np.ndarray:
        z = as_coords(z)
        if self._use_analytic(self.grad):
            return np.asarray(self.grad(z), dtype=complex)
        return fd.wirtinger_gradient(self.eval, z, self.step, self.domain)[0]

    def dbar(self, z) -> np.ndarray:
        z = as_coords(z)
        if self._use_analytic(self.grad_bar):
            return np.asarray(self.grad_bar(z), dtype=complex)
        if self.real and self._use_analytic(self.grad):
            return np.conj(self.grad(z))
        return fd.wirtinger_gradient(self.eval, z, self.step, self.domain)[1]

    def ddbar(self, z) -> np.ndarray:
        z = as_coords(z)
        if self._use_analytic(self.hess):
            return np.asarray(self.hess(z), dtype=complex)
        return fd.mixed_hessian(self.eval, z, self.step, self.domain)

    def with_fd(self, step: float = fd.DEFAULT_STEP) -> "ScalarField":
        return replace(self, deriv_mode="fd", step=step)


@dataclass(frozen=True)
class MetricField:
    """A chart-local Hermitian metric ``G[..., j, k] = g_{j kbar}(z)``.

    Parameters
    ----------
    eval : callable
        Points ``(..., n)`` to Hermitian positive-definite matrices ``(..., n, n)``.
    dim : int
        Complex dimension.
    first_deriv : callable, optional
        ``dG[..., j, k, m] = d g_{k mbar} / d z_j``.
    second_deriv : callable, optional
        ``ddG[..., j, l, k, m] = d^2 g_{k mbar} / d z_j d zbar_l``.
    deriv_mode : {"analytic", "fd"}
    step : float
        Finite-difference step.
    kahler : bool
        Informational flag for registry metrics known to be Kähler.
    """

    eval: Callable
    dim: int
    first_deriv: Callable | None = None
    second_deriv: Callable | None = None
    deriv_mode: str = "analytic"
    step: float = fd.DEFAULT_STEP
    domain: Callable | None = None
    kahler: bool = False
    name: str = "metric"
    params: dict = field(default_factory=dict)

    def __call__(self, z) -> np.ndarray:
        G = np.asarray(self.eval(as_coords(z)), dtype=complex)
        if not np.all(np.isfinite(G)):
            raise NumericalError(f"non-finite value of metric {self.name}")
        scale = max(1.0, float(np.max(np.abs(G), initial=0.0)))
        if _hermitian_defect(G) > HERMITIAN_TOL * scale:
            raise NumericalError(f"metric {self.name} is not conjugate-symmetric")
        return G

    def dG(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.deriv_mode == "analytic" and self.first_deriv is not None:
            return np.asarray(self.first_deriv(z), dtype=complex)
        return fd.wirtinger_gradient(self.eval, z, self.step, self.domain)[0]

    def ddG(self, z) -> np.ndarray:
        z = as_coords(z)
        if self.deriv_mode == "analytic" and self.second_deriv is not None:
            return np.asarray(self.second_deriv(z), dtype=complex)
        return fd.mixed_hessian(self.eval, z, self.step, self.domain)

    def with_fd(self, step: float = fd.DEFAULT_STEP) -> "MetricField":
        return replace(self, deriv_mode="fd", step=step)


def metric_cholesky(G: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``G = L L^H``; small pivots raise."""
    G = np.asarray(G, dtype=complex)
    scale = np.max(np.abs(G), axis=(-1, -2), keepdims=True)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric is not positive definite") from exc
    piv = np.abs(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
    if np.any(piv <= PIVOT_FLOOR * scale[..., 0]):
        raise SingularMetricError("metric factorization pivot below threshold")
    return L


def log_det(G: np.ndarray) -> np.ndarray:
    """``log det G`` through the triangular factor."""
    L = metric_cholesky(G)
    return 2.0 * np.sum(np.log(np.abs(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)


def inverse_metric(G: np.ndarray) -> np.ndarray:
    """``Ginv[m, l] = g^{mbar l}``, the matrix inverse of ``G``."""
    metric_cholesky(G)
    return np.linalg.inv(G)


def orthonormal_frame(G: np.ndarray) -> np.ndarray:
    """Columns ``A[:, a]`` of an orthonormal frame ``E_a = sum_j A[j, a] d_j``.

    Built from the triangular factor, so ``A^T G conj(A) = I``.
    """
    L = metric_cholesky(G)
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def complex_hessian(f: ScalarField, z) -> HermitianForm:
    """Mixed derivative matrix ``H[j, k] = d_j dbar_k f``."""
    H = f.ddbar(as_coords(z))
    if not np.all(np.isfinite(H)):
        raise NumericalError("non-finite complex Hessian")
    return HermitianForm(H)


def christoffel(g: MetricField, z) -> np.ndarray:
    """Chern connection coefficients ``Gamma[..., l, j, k] = Gamma^l_{jk}``.

    ``Gamma^l_{jk} = sum_m (d_j g_{k mbar}) g^{mbar l}``.
    """
    z = as_coords(z)
    G = g(z)
    Ginv = inverse_metric(G)
    Gam = np.einsum("...jkm,...ml->...ljk", g.dG(z), Ginv)
    if not np.all(np.isfinite(Gam)):
        raise NumericalError("non-finite Christoffel coefficients")
    return Gam


def torsion_coeffs(g: MetricField, z) -> TorsionCoefficients:
    """``T^l_{jk} = Gamma^l_{jk} - Gamma^l_{kj}`` (coordinate fields commute)."""
    Gam = christoffel(g, z)
    return TorsionCoefficients(Gam - np.swapaxes(Gam, -1, -2))


def _logdet_hessian_analytic(g: MetricField, z: np.ndarray) -> np.ndarray:
    # d_j dbar_l log det G = tr(Ginv d_j dbar_l G) - tr(Ginv dbar_l G Ginv d_j G)
    G = g(z)
    Ginv = inverse_metric(G)
    dG = g.dG(z)
    ddG = g.ddG(z)
    # dbar_l g_{k mbar} = conj(d_l g_{m kbar})
    dbG = np.conj(np.swapaxes(dG, -1, -2))
    t1 = np.einsum("...mk,...jlkm->...jl", Ginv, ddG)
    t2 = np.einsum("...ab,...lbc,...cd,...jda->...jl", Ginv, dbG, Ginv, dG)
    return t1 - t2


def curvature_trace(g: MetricField, z) -> HermitianForm:
    """``Theta_M = -d dbar log det g`` in the coordinate frame."""
    z = as_coords(z)
    if g.deriv_mode == "analytic" and g.second_deriv is not None:
        H = _logdet_hessian_analytic(g, z)
    else:
        H = fd.mixed_hessian(lambda w: log_det(g(w)), z, g.step, g.domain)
    if not np.all(np.isfinite(H)):
        raise NumericalError("non-finite curvature trace")
    return HermitianForm(-H)


def torsion_in_frame(g: MetricField, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Torsion expressed on an orthonormal frame.

    Returns ``(A, G, Ton)`` where ``A`` is the frame and ``Ton[..., l, a, b]`` are
    the coordinate components of ``T(E_a, E_b)``.
    """
    z = as_coords(z)
    G = g(z)
    A = orthonormal_frame(G)
    T = torsion_coeffs(g, z).coeffs
    Ton = np.einsum("...ja,...kb,...ljk->...lab", A, A, T)
    return A, G, Ton


def torsion_norm_form(g: MetricField, z) -> HermitianForm:
    """Hermitian form ``Q`` with ``Q(Z, Zbar) = |tau Z^flat|^2``.

    ``Q(Z, Zbar) = sum_{a<b} |<T(E_a, E_b), Z>|^2`` over an orthonormal frame.
    """
    _, G, Ton = torsion_in_frame(g, z)
    n = G.shape[-1]
    # v_ab[m] = sum_l T_ab^l G[l, m], so <T_ab, Z> = v_ab . conj(Z)
    v = np.einsum("...lab,...lm->...abm", Ton, G)
    iu, ju = np.triu_indices(n, 1)
    vp = v[..., iu, ju, :]
    Q = np.einsum("...pa,...pb->...ab", np.conj(vp), vp)
    return HermitianForm(Q)


def kahler_comparison_weight(g: MetricField, g_tilde: MetricField, z) -> np.ndarray:
    """``log det g - log det g_tilde`` at ``z``."""
    z = as_coords(z)
    return log_det(g(z)) - log_det(g_tilde(z))


def hermitian_inner(G: np.ndarray, Z: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``<Z, W> = Z^T G conj(W)``."""
    return np.einsum("...j,...jk,...k->...", Z, G, np.conj(W))


def pullback_metric(g: MetricField, A: np.ndarray) -> MetricField:
    """Pull ``g`` back along the linear map ``z = A w``.

    ``g'(w) = A^T g(A w) conj(A)``; derivative callbacks are transformed
    by the chain rule so analytic mode is preserved.
    """
    A = np.asarray(A, dtype=complex)
    Ab = np.conj(A)

    def fwd(w):
        return w @ A.T

    def ev(w):
        return np.einsum("aj,...ab,bk->...jk", A, g(fwd(w)), Ab)

    first = second = None
    if g.deriv_mode == "analytic" and g.first_deriv is not None:
        def first(w):
            return np.einsum("aj,bk,cm,...abc->...jkm", A, A, Ab, g.dG(fwd(w)))
    if g.deriv_mode == "analytic" and g.second_deriv is not None:
        def second(w):
            return np.einsum("aj,dl,bk,cm,...adbc->...jlkm", A, Ab, A, Ab, g.ddG(fwd(w)))
    return MetricField(eval=ev, dim=g.dim, first_deriv=first, second_deriv=second,
                       kahler=g.kahler, name=f"{g.name}-pullback")


def pullback_scalar(f: ScalarField, A: np.ndarray) -> ScalarField:
    """``f'(w) = f(A w)`` with transformed derivative callbacks."""
    A = np.asarray(A, dtype=complex)
    Ab = np.conj(A)

    def fwd(w):
        return w @ A.T

    grad = hess = None
    if f.deriv_mode == "analytic" and f.grad is not None:
        def grad(w):
            return f.d(fwd(w)) @ A
    if f.deriv_mode == "analytic" and f.hess is not None:
        def hess(w):
            return np.einsum("aj,...ab,bk->...jk", A, f.ddbar(fwd(w)), Ab)
    grad_bar = None
    if not f.real and f.grad_bar is not None:
        def grad_bar(w):
            return f.dbar(fwd(w)) @ Ab
    return ScalarField(eval=lambda w: f(fwd(w)), dim=f.dim, grad=grad, grad_bar=grad_bar, hess=hess,
                       real=f.real, name=f"{f.name}-pullback")


def kahler_differential_check(g: MetricField, z, step: float = fd.DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Compare the (2,1) part of ``d omega`` with ``tau omega``.

    ``omega = (i/2) sum g_{k mbar} dz_k ^ dzbar_m``. The left array holds
    ``d omega(d_a, d_b, dbar_k)`` from central differences of the metric
    coefficients, the right array ``omega(T(d_a, d_b), dbar_k)`` from the
    torsion coefficients.

    Returns
    -------
    domega, tau_omega : ndarray, shape (..., n, n, n)
        Indexed ``[a, b, k]``; antisymmetric in ``(a, b)``.
    """
    z = as_coords(z)
    dG = fd.wirtinger_gradient(g.eval, z, step, g.domain)[0]
    domega = 0.5j * (dG - np.swapaxes(dG, -3, -2))
    T = torsion_coeffs(g, z).coeffs
    tau_omega = 0.5j * np.einsum("...lab,...lk->...abk", T, g(z))
    return domega, tau_omega
