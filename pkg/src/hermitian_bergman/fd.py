"""Central finite differences in Wirtinger coordinates.

Points are complex arrays of shape ``(..., n)``. Derivative indices are
inserted directly after the batch axes, so for a function with output
shape ``(..., *out)`` the gradient has shape ``(..., n, *out)`` and the
mixed Hessian ``(..., n, n, *out)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError

DEFAULT_STEP = 1e-4


def _checked(f: Callable, domain: Callable | None):
    if domain is None:
        return f

    def g(z):
        inside = np.asarray(domain(z))
        if not np.all(inside):
            raise DomainError("finite-difference stencil leaves the field's domain")
        return f(z)

    return g


def _shift(z: np.ndarray, j: int, step: complex) -> np.ndarray:
    zz = z.copy()
    zz[..., j] += step
    return zz


def _finite(a: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite finite-difference result")
    return a


def wirtinger_gradient(
    f: Callable, z: np.ndarray, h: float = DEFAULT_STEP, domain: Callable | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(df/dz_j, df/dzbar_j)`` by central differences.

    Uses ``d/dz = (d/dx - i d/dy)/2`` and ``d/dzbar = (d/dx + i d/dy)/2``
    with second-order central stencils in each real direction.
    """
    z = np.asarray(z, dtype=complex)
    f = _checked(f, domain)
    n = z.shape[-1]
    axis = z.ndim - 1
    dz, dzb = [], []
    for j in range(n):
        fx = (np.asarray(f(_shift(z, j, h))) - np.asarray(f(_shift(z, j, -h)))) / (2 * h)
        fy = (np.asarray(f(_shift(z, j, 1j * h))) - np.asarray(f(_shift(z, j, -1j * h)))) / (2 * h)
        dz.append(0.5 * (fx - 1j * fy))
        dzb.append(0.5 * (fx + 1j * fy))
    return _finite(np.stack(dz, axis=axis)), _finite(np.stack(dzb, axis=axis))


def mixed_hessian(
    f: Callable, z: np.ndarray, h: float = DEFAULT_STEP, domain: Callable | None = None
) -> np.ndarray:
    """Return ``H[..., j, k] = d^2 f / dz_j dzbar_k`` by 4-point stencils.

    The real Hessian in the ``2n`` coordinates ``(x_1..x_n, y_1..y_n)`` is
    formed first and then combined as
    ``H_jk = (f_xjxk + f_yjyk + i (f_xjyk - f_yjxk)) / 4``.
    """
    z = np.asarray(z, dtype=complex)
    f = _checked(f, domain)
    n = z.shape[-1]
    dirs = [1.0] * n + [1j] * n
    idx = list(range(n)) * 2

    def step(a, sa, b, sb):
        zz = z.copy()
        zz[..., idx[a]] += sa * h * dirs[a]
        zz[..., idx[b]] += sb * h * dirs[b]
        return np.asarray(f(zz))

    real = {}
    for a in range(2 * n):
        for b in range(a, 2 * n):
            val = (step(a, 1, b, 1) - step(a, 1, b, -1) - step(a, -1, b, 1) + step(a, -1, b, -1)) / (
                4 * h * h
            )
            real[a, b] = real[b, a] = val

    rows = []
    for j in range(n):
        row = []
        for k in range(n):
            row.append(
                0.25 * (real[j, k] + real[n + j, n + k] + 1j * (real[j, n + k] - real[n + j, k]))
            )
        rows.append(np.stack(row, axis=z.ndim - 1))
    return _finite(np.stack(rows, axis=z.ndim - 1))
