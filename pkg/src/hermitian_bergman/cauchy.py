"""Solid Cauchy transform on a planar grid.

``w(z) = -(1/pi) int_Omega g(zeta) / (zeta - z) dA(zeta)`` solves
``dbar w = g``. Far cells use the midpoint rule with the cell mass. The 3x3
block of cells around a target uses a piecewise-linear model of ``g`` on each
cell and integrates ``1/(zeta - z)`` and ``conj(zeta - z)/(zeta - z)`` over the
rectangle in closed form, so the transform is exactly ``dbar``-inverting on
each cell's linear model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .errors import NumericalError
from .planar import PlanarDomain


@numba.njit(cache=True)
def _g0(x, y):
    # primitive of 1/w in both variables: -i w log w
    if x == 0.0 and y == 0.0:
        return 0j
    w = complex(x, y)
    return -1j * w * np.log(w)


@numba.njit(cache=True)
def _g1(x, y):
    # primitive of conj(w)/w: -i |w|^2 log w + i x^2 / 2
    if x == 0.0 and y == 0.0:
        return 0j
    w = complex(x, y)
    return -1j * (x * x + y * y) * np.log(w) + 0.5j * x * x


@numba.njit(cache=True)
def _quadrant(X, Y, which):
    # int_0^X int_0^Y k(x + iy) dy dx for k = 1/w (which=0) or conj(w)/w (which=1)
    a = abs(X)
    b = abs(Y)
    if which == 0:
        J = _g0(a, b) - _g0(0.0, b) - _g0(a, 0.0)
    else:
        J = _g1(a, b) - _g1(0.0, b) - _g1(a, 0.0)
    if X >= 0.0 and Y >= 0.0:
        return J
    if X < 0.0 and Y < 0.0:
        return -J if which == 0 else J
    if X < 0.0:
        return np.conj(J) if which == 0 else -np.conj(J)
    return -np.conj(J)


@numba.njit(cache=True)
def _rect(x0, x1, y0, y1, which):
    return (_quadrant(x1, y1, which) - _quadrant(x0, y1, which)
            - _quadrant(x1, y0, which) + _quadrant(x0, y0, which))


@numba.njit(cache=True)
def _kernel(tx, ty, nx, ny, rects, dens, ga, gb, mass):
    out = np.empty(tx.size, dtype=np.complex128)
    for t in range(tx.size):
        px = tx[t]
        py = ty[t]
        acc = 0j
        for j in range(nx.size):
            x0 = rects[j, 0]
            x1 = rects[j, 1]
            y0 = rects[j, 2]
            y1 = rects[j, 3]
            wd = x1 - x0
            ht = y1 - y0
            if x0 - wd <= px <= x1 + wd and y0 - ht <= py <= y1 + ht:
                i0 = _rect(x0 - px, x1 - px, y0 - py, y1 - py, 0)
                i1 = _rect(x0 - px, x1 - px, y0 - py, y1 - py, 1)
                dz = complex(px - nx[j], py - ny[j])
                acc += (dens[j] + ga[j] * dz + gb[j] * np.conj(dz)) * i0 + ga[j] * wd * ht + gb[j] * i1
            else:
                acc += mass[j] / complex(nx[j] - px, ny[j] - py)
        out[t] = -acc / np.pi
    return out


def rect_integrals(rect, z) -> tuple[complex, complex]:
    """``(int 1/(zeta - z), int conj(zeta - z)/(zeta - z))`` over a rectangle."""
    x0, x1, y0, y1 = (float(v) for v in rect)
    z = complex(z)
    args = (x0 - z.real, x1 - z.real, y0 - z.imag, y1 - z.imag)
    return complex(_rect(*args, 0)), complex(_rect(*args, 1))


@dataclass
class CauchyTransform:
    """Evaluable solid Cauchy transform of grid data.

    Attributes
    ----------
    dom : PlanarDomain
    rhs : callable
        The source ``g``.
    density, grad_z, grad_zbar : ndarray
        Per-cell linear model ``g_j + a_j (zeta - zeta_j) + b_j conj(zeta - zeta_j)``.
    mass : ndarray
        ``int_cell g dA`` used for far cells.
    """

    dom: PlanarDomain
    rhs: Callable
    density: np.ndarray
    grad_z: np.ndarray
    grad_zbar: np.ndarray
    mass: np.ndarray

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        gr = self.dom.grid
        flat = z.ravel()
        out = _kernel(flat.real.copy(), flat.imag.copy(), gr.nodes.real.copy(), gr.nodes.imag.copy(),
                      np.ascontiguousarray(gr.rects), self.density, self.grad_z, self.grad_zbar, self.mass)
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite Cauchy transform value")
        return out.reshape(z.shape)

    def dbar(self, z, step: float | None = None) -> np.ndarray:
        """Central-difference ``dbar`` of the transform at ``z``."""
        z = np.asarray(z, dtype=complex)
        s = 1e-3 * self.dom.grid.cell if step is None else step
        pts = np.concatenate([z + s, z - s, z + 1j * s, z - 1j * s])
        v = self(pts).reshape(4, *z.shape)
        return 0.5 * ((v[0] - v[1]) / (2 * s) + 1j * (v[2] - v[3]) / (2 * s))

    def residual(self, points=None, step: float | None = None) -> float:
        """Relative RMS of ``dbar w - g`` over interior test points."""
        z = interior_test_points(self.dom) if points is None else np.asarray(points, dtype=complex)
        g = np.asarray(self.rhs(z), dtype=complex)
        res = self.dbar(z, step) - g
        scale = max(np.sqrt(np.mean(np.abs(g) ** 2)), 1e-300)
        return float(np.sqrt(np.mean(np.abs(res) ** 2)) / scale) if np.any(g != 0) else float(np.max(np.abs(res)))


def _wirtinger_fd(f: Callable, z: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    fx = (f(z + s) - f(z - s)) / (2 * s)
    fy = (f(z + 1j * s) - f(z - 1j * s)) / (2 * s)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def cauchy_solve(dom: PlanarDomain, rhs: Callable, mass: np.ndarray | None = None,
                 linear: bool = True) -> CauchyTransform:
    """Particular solution of ``dbar w = rhs`` on ``dom``.

    Parameters
    ----------
    dom : PlanarDomain
    rhs : callable
        Complex array to complex array; must be finite at the grid nodes.
    mass : ndarray, optional
        Per-node integrals of ``rhs`` (for sources with integrable boundary
        singularities). Defaults to ``rhs(node) * area``.
    linear : bool
        Use the piecewise-linear model on full cells (else piecewise constant).
    """
    gr = dom.grid
    g = np.asarray(rhs(gr.nodes), dtype=complex)
    if not np.all(np.isfinite(g)):
        raise NumericalError("right-hand side is not finite on the grid")
    m = g * gr.area if mass is None else np.asarray(mass, dtype=complex)
    rect_area = (gr.rects[:, 1] - gr.rects[:, 0]) * (gr.rects[:, 3] - gr.rects[:, 2])
    density = np.where(gr.full, g, m / rect_area)
    ga = np.zeros_like(g)
    gb = np.zeros_like(g)
    if linear and np.any(gr.full):
        idx = np.flatnonzero(gr.full)
        ga[idx], gb[idx] = _wirtinger_fd(lambda w: np.asarray(rhs(w), dtype=complex),
                                         gr.nodes[idx], 1e-3 * gr.cell)
    return CauchyTransform(dom, rhs, density, ga, gb, m)


def interior_test_points(dom: PlanarDomain, per_axis: int = 24, depth: float = 0.25) -> np.ndarray:
    """Points with ``delta >= depth * max delta``, kept off cell edges."""
    x0, x1, y0, y1 = dom.bbox
    t = (np.arange(per_axis) + 0.5) / per_axis
    X, Y = np.meshgrid(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, indexing="ij")
    z = (X + 1j * Y).ravel()
    z = z[dom.inside(z)]
    d = dom.distance(z)
    z = z[d >= depth * d.max()]
    # nudge into the cell interior: at least a tenth of a cell from each edge
    h = dom.grid.cell
    bx, by = dom.bbox[0], dom.bbox[2]

    def nudge(c, base):
        frac = (c - base) / h - np.floor((c - base) / h)
        frac = np.clip(frac, 0.1, 0.9)
        return base + h * (np.floor((c - base) / h) + frac)

    return nudge(z.real, bx) + 1j * nudge(z.imag, by)
