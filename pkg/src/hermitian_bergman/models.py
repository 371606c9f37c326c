"""Built-in metrics, weights, defining functions and model domains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dfcheck import DFProblem, DomainSample
from .errors import DomainError
from .geometry import HermitianForm, MetricField, ScalarField, as_coords

# ---------------------------------------------------------------- metrics


def _eye(z: np.ndarray) -> np.ndarray:
    n = z.shape[-1]
    return np.broadcast_to(np.eye(n, dtype=complex), z.shape[:-1] + (n, n)).copy()


def _norm2(z: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(z) ** 2, axis=-1)


def euclidean(n: int) -> MetricField:
    """Flat metric ``g = I``."""
    _check_dim(n)
    return MetricField(
        eval=_eye,
        dim=n,
        first_deriv=lambda z: np.zeros(z.shape[:-1] + (n, n, n), dtype=complex),
        second_deriv=lambda z: np.zeros(z.shape[:-1] + (n, n, n, n), dtype=complex),
        kahler=True,
        name="euclidean",
        params={"n": n},
    )


def hopf(n: int, a: complex = 0.5) -> MetricField:
    """Scale-invariant metric ``g = |z|^{-2} I`` on the punctured space."""
    _check_dim(n)
    if not 0 < abs(a) < 1:
        raise ValueError("the Hopf modulus must satisfy 0 < |a| < 1")
    eye = np.eye(n)

    def ev(z):
        return _eye(z) / _norm2(z)[..., None, None]

    def d1(z):
        r2 = _norm2(z)[..., None, None, None]
        return -np.conj(z)[..., :, None, None] * eye / r2**2

    def d2(z):
        r2 = _norm2(z)[..., None, None]
        zb = np.conj(z)
        inner = -eye / r2**2 + 2 * zb[..., :, None] * z[..., None, :] / r2**3
        return inner[..., :, :, None, None] * eye

    return MetricField(
        eval=ev,
        dim=n,
        first_deriv=d1,
        second_deriv=d2,
        domain=lambda z: _norm2(z) > 0,
        name="hopf",
        params={"n": n, "a": a},
    )


def fubini_study(n: int) -> MetricField:
    """Fubini-Study metric in the affine chart, ``g = I/s - zbar z^T / s^2``."""
    _check_dim(n)
    eye = np.eye(n)

    def ev(z):
        s = 1 + _norm2(z)
        zb = np.conj(z)
        return eye / s[..., None, None] - zb[..., :, None] * z[..., None, :] / s[..., None, None] ** 2

    def d1(z):
        # d_j g_{k mbar}
        s = (1 + _norm2(z))[..., None, None, None]
        zb = np.conj(z)
        zbj = zb[..., :, None, None]
        zbk = zb[..., None, :, None]
        zm = z[..., None, None, :]
        return (
            -eye[None, :, :] * zbj / s**2
            - zbk * eye[:, None, :] / s**2
            + 2 * zbk * zm * zbj / s**3
        )

    def d2(z):
        # d_j dbar_l g_{k mbar}, axes (j, l, k, m)
        s = (1 + _norm2(z))[..., None, None, None, None]
        zb = np.conj(z)
        e = eye
        zb_j = zb[..., :, None, None, None]
        z_l = z[..., None, :, None, None]
        zb_k = zb[..., None, None, :, None]
        z_m = z[..., None, None, None, :]
        d_km = e[None, None, :, :]
        d_jl = e[:, :, None, None]
        d_jm = e[:, None, None, :]
        d_kl = e[None, :, :, None]
        return (
            -d_km * d_jl / s**2
            + 2 * d_km * zb_j * z_l / s**3
            - d_kl * d_jm / s**2
            + 2 * zb_k * d_jm * z_l / s**3
            + 2 * (d_kl * z_m * zb_j + zb_k * z_m * d_jl) / s**3
            - 6 * zb_k * z_m * zb_j * z_l / s**4
        )

    return MetricField(eval=ev, dim=n, first_deriv=d1, second_deriv=d2, kahler=True,
                       name="fubini-study", params={"n": n})


def conformal(n: int, c: Sequence[complex] | None = None, q: float = 0.0) -> MetricField:
    """Conformally flat metric ``e^phi I`` with ``phi = Re(c . z) + q |z|^2``.

    Kähler only when ``n = 1``.
    """
    _check_dim(n)
    c = np.zeros(n, dtype=complex) if c is None else np.asarray(c, dtype=complex)
    eye = np.eye(n)

    def phi(z):
        return np.real(z @ c) + q * _norm2(z)

    def dphi(z):
        return c / 2 + q * np.conj(z)

    def ev(z):
        return np.exp(phi(z))[..., None, None] * eye

    def d1(z):
        return (np.exp(phi(z))[..., None] * dphi(z))[..., :, None, None] * eye

    def d2(z):
        dp = dphi(z)
        inner = q * eye + dp[..., :, None] * np.conj(dp)[..., None, :]
        return (np.exp(phi(z))[..., None, None] * inner)[..., :, :, None, None] * eye

    return MetricField(eval=ev, dim=n, first_deriv=d1, second_deriv=d2, kahler=(n == 1),
                       name="conformal", params={"n": n, "c": c.tolist(), "q": q})


def product(factors: Sequence[MetricField]) -> MetricField:
    """Block-diagonal product metric; factor ``i`` acts on its own coordinate slice."""
    dims = [f.dim for f in factors]
    n = sum(dims)
    offs = np.concatenate([[0], np.cumsum(dims)])
    slices = [slice(offs[i], offs[i + 1]) for i in range(len(factors))]

    def ev(z):
        out = np.zeros(z.shape[:-1] + (n, n), dtype=complex)
        for f, s in zip(factors, slices):
            out[..., s, s] = f(z[..., s])
        return out

    def d1(z):
        out = np.zeros(z.shape[:-1] + (n, n, n), dtype=complex)
        for f, s in zip(factors, slices):
            out[..., s, s, s] = f.dG(z[..., s])
        return out

    def d2(z):
        out = np.zeros(z.shape[:-1] + (n, n, n, n), dtype=complex)
        for f, s in zip(factors, slices):
            out[..., s, s, s, s] = f.ddG(z[..., s])
        return out

    analytic = all(f.deriv_mode == "analytic" and f.second_deriv is not None for f in factors)
    return MetricField(
        eval=ev,
        dim=n,
        first_deriv=d1 if analytic else None,
        second_deriv=d2 if analytic else None,
        kahler=all(f.kahler for f in factors),
        name="product",
        params={"factors": [f.name for f in factors]},
    )


def _check_dim(n: int):
    if int(n) != n or n < 1:
        raise ValueError("dimension must be a positive integer")


# ---------------------------------------------------------------- scalar fields


def zero_weight(n: int) -> ScalarField:
    return ScalarField(
        eval=lambda z: np.zeros(z.shape[:-1]),
        dim=n,
        grad=lambda z: np.zeros(z.shape, dtype=complex),
        hess=lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex),
        name="zero",
    )


def norm2_weight(n: int) -> ScalarField:
    """``|z|^2``."""
    eye = np.eye(n, dtype=complex)
    return ScalarField(
        eval=_norm2,
        dim=n,
        grad=lambda z: np.conj(z),
        hess=lambda z: np.broadcast_to(eye, z.shape[:-1] + (n, n)).copy(),
        name="norm2",
    )


def two_re_z1_weight(n: int) -> ScalarField:
    """``2 Re z_1``, pluriharmonic."""
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    return ScalarField(
        eval=lambda z: 2 * np.real(z[..., 0]),
        dim=n,
        grad=lambda z: np.broadcast_to(e1, z.shape).copy(),
        hess=lambda z: np.zeros(z.shape[:-1] + (n, n), dtype=complex),
        name="two_re_z1",
    )


def ball_defining(n: int, radius: float = 1.0) -> ScalarField:
    """``|z|^2 - radius^2``."""
    eye = np.eye(n, dtype=complex)
    return ScalarField(
        eval=lambda z: _norm2(z) - radius**2,
        dim=n,
        grad=lambda z: np.conj(z),
        hess=lambda z: np.broadcast_to(eye, z.shape[:-1] + (n, n)).copy(),
        name="ball",
    )


def shifted_norm_defining(n: int, offset: float = 1.0) -> ScalarField:
    """``-offset - |z|^2``: negative everywhere, with ``-rho`` strictly plurisubharmonic."""
    eye = np.eye(n, dtype=complex)
    return ScalarField(
        eval=lambda z: -offset - _norm2(z),
        dim=n,
        grad=lambda z: -np.conj(z),
        hess=lambda z: -np.broadcast_to(eye, z.shape[:-1] + (n, n)).copy(),
        name="shifted_norm",
    )


# ---------------------------------------------------------------- square domain


def square_defining(z) -> np.ndarray:
    """Defining function of the square ``|Re z| < 1, |Im z| < 1``.

    Inside: ``(y^2-1)(x^2-1)/(|z|^2-2)``. On the boundary and outside:
    ``max(y^2-1, x^2-1)``.
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    A = y * y - 1
    B = x * x - 1
    inside = (np.abs(x) < 1) & (np.abs(y) < 1)
    C = np.where(inside, x * x + y * y - 2, -1.0)
    return np.where(inside, A * B / C, np.maximum(A, B))


def square_real_derivs(z) -> tuple[np.ndarray, ...]:
    """Real derivatives ``(r, r_x, r_y, r_xx, r_yy, r_xy)`` of the inside branch."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    if np.any((np.abs(x) >= 1) | (np.abs(y) >= 1)):
        raise DomainError("square defining function derivatives requested off the open square")
    A = y * y - 1
    B = x * x - 1
    N = A * B
    C = x * x + y * y - 2
    Nx, Ny = 2 * x * A, 2 * y * B
    Nxx, Nyy, Nxy = 2 * A, 2 * B, 4 * x * y
    Cx, Cy = 2 * x, 2 * y
    r = N / C
    rx = (Nx * C - N * Cx) / C**2
    ry = (Ny * C - N * Cy) / C**2
    # second derivatives of N/C with C_xx = C_yy = 2, C_xy = 0
    rxx = Nxx / C - 2 * Nx * Cx / C**2 - N * 2 / C**2 + 2 * N * Cx**2 / C**3
    ryy = Nyy / C - 2 * Ny * Cy / C**2 - N * 2 / C**2 + 2 * N * Cy**2 / C**3
    rxy = Nxy / C - (Nx * Cy + Ny * Cx) / C**2 + 2 * N * Cx * Cy / C**3
    return r, rx, ry, rxx, ryy, rxy


def square_wirtinger(z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(r, d r/dz, d^2 r/dz dzbar)`` on the open square."""
    r, rx, ry, rxx, ryy, _ = square_real_derivs(z)
    return r, 0.5 * (rx - 1j * ry), 0.25 * (rxx + ryy)


def square_field(n: int = 1, coordinate: int = 0) -> ScalarField:
    """Square defining function of ``z_coordinate`` viewed on ``C^n``."""

    def ev(z):
        return square_defining(z[..., coordinate])

    def grad(z):
        out = np.zeros(z.shape, dtype=complex)
        out[..., coordinate] = square_wirtinger(z[..., coordinate])[1]
        return out

    def hess(z):
        out = np.zeros(z.shape[:-1] + (n, n), dtype=complex)
        out[..., coordinate, coordinate] = square_wirtinger(z[..., coordinate])[2]
        return out

    return ScalarField(eval=ev, dim=n, grad=grad, hess=hess, name="square")


# ---------------------------------------------------------------- Hopf chart


@dataclass(frozen=True)
class HopfChart:
    """Fundamental annulus ``|a| < |z| <= 1`` of the Hopf quotient."""

    n: int
    a: complex = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < abs(self.a) < 1:
            raise ValueError("the Hopf modulus must satisfy 0 < |a| < 1")

    @property
    def metric(self) -> MetricField:
        return hopf(self.n, self.a)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform in ``log|z|`` on ``(log|a|, 0]`` times uniform direction."""
        g = rng.standard_normal((count, self.n)) + 1j * rng.standard_normal((count, self.n))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        la = np.log(abs(self.a))
        t = la + (0.0 - la) * (1.0 - rng.random(count))
        return g * np.exp(t)[:, None]


def hopf_closed_forms(n: int, z) -> tuple[HermitianForm, HermitianForm]:
    """Closed-form curvature trace and torsion form of the Hopf metric.

    ``Theta(Z, Zbar) = n |Z|^2 - n |<Z, W_1>|^2`` and
    ``Q(Z, Zbar) = |Z|^2 - |<Z, W_1>|^2`` with ``W_1 = sum z_j d_j``,
    norms taken in the Hopf metric.
    """
    z = as_coords(z)
    r2 = _norm2(z)
    if np.any(r2 == 0):
        raise DomainError("the Hopf metric is undefined at z = 0")
    G = np.eye(z.shape[-1]) / r2[..., None, None]
    # <Z, W_1> = sum_j Z_j conj(z_j) / |z|^2 = Z . w with w = conj(z)/|z|^2
    w = np.conj(z) / r2[..., None]
    Q = G - w[..., :, None] * np.conj(w)[..., None, :]
    return HermitianForm(n * Q), HermitianForm(Q)


# ---------------------------------------------------------------- product domain


def product_domain_assemble(n: int, a: complex = 0.5) -> DFProblem:
    """Square times Hopf: metric ``diag(1, Hopf_{n-1})``, ``psi = 0``, ``rho(z) = r(z_1)``."""
    if n < 2:
        raise ValueError("the product domain needs n >= 2")
    metric = product([euclidean(1), hopf(n - 1, a)])
    return DFProblem(metric=metric, weight=zero_weight(n), defining=square_field(n, 0))


def square_grid(k: int = 21) -> np.ndarray:
    """Cell-centred ``k x k`` grid on the square, as complex numbers."""
    t = -1 + (2 * np.arange(k) + 1) / k
    X, Y = np.meshgrid(t, t, indexing="ij")
    return (X + 1j * Y).ravel()


def product_sample(n: int, grid: int = 21, hopf_points: int = 50, seed: int = 0, a: complex = 0.5) -> DomainSample:
    """Square grid times Hopf annulus points, every combination."""
    rng = np.random.default_rng(seed)
    sq = square_grid(grid)
    hp = HopfChart(n - 1, a).sample(hopf_points, rng)
    pts = np.concatenate(
        [np.repeat(sq, len(hp))[:, None], np.tile(hp, (len(sq), 1))], axis=1
    )
    return DomainSample(points=pts, rho=square_defining(pts[:, 0]))


def square_shell(count: int, rng: np.random.Generator, lo: float = 1e-3, hi: float = 1e-2) -> np.ndarray:
    """Points of the square with ``-rho`` in ``[lo, hi]``, by rejection."""
    out = []
    while sum(len(o) for o in out) < count:
        side = rng.integers(4, size=4 * count)
        depth = rng.uniform(0, 4 * hi, size=4 * count)
        along = rng.uniform(-1 + 4 * hi, 1 - 4 * hi, size=4 * count)
        z = np.choose(side, [1 - depth + 1j * along, -1 + depth + 1j * along,
                             along + 1j * (1 - depth), along - 1j * (1 - depth)])
        r = square_defining(z)
        out.append(z[(r <= -lo) & (r >= -hi)])
    return np.concatenate(out)[:count]


def product_shell(n: int, count: int = 200, hopf_points: int = 10, seed: int = 0, a: complex = 0.5) -> DomainSample:
    rng = np.random.default_rng(seed + 1)
    sq = square_shell(count, rng)
    hp = HopfChart(n - 1, a).sample(hopf_points, rng)
    pts = np.concatenate([np.repeat(sq, len(hp))[:, None], np.tile(hp, (len(sq), 1))], axis=1)
    return DomainSample(points=pts, rho=square_defining(pts[:, 0]))


def ball_sample(n: int, per_axis: int = 20, margin: float = 1e-3) -> DomainSample:
    """Cell-centred grid of ``[-1, 1]^{2n}`` kept where ``|z|^2 - 1 <= -margin``."""
    t = -1 + (2 * np.arange(per_axis) + 1) / per_axis
    grids = np.meshgrid(*([t] * (2 * n)), indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=-1)
    z = x[:, :n] + 1j * x[:, n:]
    rho = np.sum(np.abs(z) ** 2, axis=-1) - 1
    keep = rho <= -margin
    return DomainSample(points=z[keep], rho=rho[keep])


# ---------------------------------------------------------------- registries

METRICS = {
    "euclidean": euclidean,
    "hopf": hopf,
    "fubini-study": fubini_study,
    "conformal": conformal,
}

WEIGHTS = {
    "zero": zero_weight,
    "norm2": norm2_weight,
    "two_re_z1": two_re_z1_weight,
}
