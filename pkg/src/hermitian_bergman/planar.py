"""Planar domains and their quadrature grids.

A domain carries a defining function ``rho`` (negative inside), the exact
boundary distance ``delta`` and a midpoint grid on its bounding box. Cells cut
by the boundary get their exact area; cells in a thin band along the boundary
are split into subcells, and integrals against singular powers of ``-rho`` or
``delta`` use per-node moments of the power (product integration) instead of
point values.

Functions of one complex variable take and return arrays of complex ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import DomainError, NumericalError
from .geometry import ScalarField

# linear moments fall back to lower-dimensional formulas below this ratio
_DEGENERATE = 1e-3


@dataclass(frozen=True)
class PlanarGrid:
    """Quadrature nodes of a planar domain.

    Attributes
    ----------
    nodes : ndarray, complex (N,)
        Evaluation points, all strictly inside the domain.
    area : ndarray (N,)
        Exact area of ``cell ∩ domain``.
    rects : ndarray (N, 4)
        Cell rectangles ``(x0, x1, y0, y1)``.
    band : ndarray of bool (N,)
        Nodes in the boundary band (moments use the linear model there).
    full : ndarray of bool (N,)
        Cells lying entirely inside the domain.
    cell : float
        Base cell width.
    """

    nodes: np.ndarray
    area: np.ndarray
    rects: np.ndarray
    band: np.ndarray
    full: np.ndarray
    cell: float

    def __len__(self) -> int:
        return self.nodes.size


@dataclass
class PlanarDomain:
    """Bounded planar domain with defining function and exact distance.

    Use the constructors :meth:`disc`, :meth:`square` and :meth:`annulus`.

    Parameters
    ----------
    kind : str
    params : dict
    resolution : int
        Base grid cells per axis of the bounding box.
    band : int
        Cells within ``band`` cell widths of the boundary are subdivided.
    sub : int
        Subdivision factor per axis in the band.
    """

    kind: str
    params: dict
    resolution: int = 256
    band: int = 1
    sub: int = 4
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------------ factories
    @classmethod
    def disc(cls, radius: float = 1.0, **kw) -> "PlanarDomain":
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls("disc", {"radius": float(radius)}, **kw)

    @classmethod
    def square(cls, **kw) -> "PlanarDomain":
        """The square ``(-1, 1)^2`` with the piecewise defining function."""
        return cls("square", {}, **kw)

    @classmethod
    def annulus(cls, inner: float = 0.5, outer: float = 1.0, **kw) -> "PlanarDomain":
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        return cls("annulus", {"inner": float(inner), "outer": float(outer)}, **kw)

    def refined(self, resolution: int) -> "PlanarDomain":
        return PlanarDomain(self.kind, dict(self.params), resolution, self.band, self.sub)

    # ------------------------------------------------------------------ geometry
    @property
    def bbox(self) -> tuple[float, float, float, float]:
        r = self.params.get("radius", self.params.get("outer", 1.0))
        return (-r, r, -r, r)

    def rho(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "disc":
            return np.abs(z) ** 2 - self.params["radius"] ** 2
        if self.kind == "square":
            return models.square_defining(z)
        a, b = self.params["inner"] ** 2, self.params["outer"] ** 2
        t = np.abs(z) ** 2
        return (t - a) * (t - b) / b

    def rho_derivs(self, z) -> tuple[np.ndarray, np.ndarray]:
        """``(d rho/dz, d^2 rho/dz dzbar)`` at interior points."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "disc":
            return np.conj(z), np.ones(z.shape)
        if self.kind == "square":
            _, rz, rzz = models.square_wirtinger(z)
            return rz, rzz
        a, b = self.params["inner"] ** 2, self.params["outer"] ** 2
        t = np.abs(z) ** 2
        return np.conj(z) * (2 * t - a - b) / b, (4 * t - a - b) / b

    def distance(self, z) -> np.ndarray:
        """Exact distance to the boundary (for interior points)."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "disc":
            return self.params["radius"] - np.abs(z)
        if self.kind == "square":
            return np.minimum(1 - np.abs(z.real), 1 - np.abs(z.imag))
        r = np.abs(z)
        return np.minimum(r - self.params["inner"], self.params["outer"] - r)

    def _distance_grad(self, z: np.ndarray) -> np.ndarray:
        # real gradient of delta encoded as gx + i gy
        if self.kind == "disc":
            return -z / np.maximum(np.abs(z), 1e-300)
        if self.kind == "square":
            x, y = z.real, z.imag
            use_x = 1 - np.abs(x) <= 1 - np.abs(y)
            return np.where(use_x, -np.sign(x) + 0j, -1j * np.sign(y))
        u = z / np.maximum(np.abs(z), 1e-300)
        r = np.abs(z)
        return np.where(r - self.params["inner"] <= self.params["outer"] - r, u, -u)

    def _level(self, flavor: str, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # (value, real gradient as complex) of -rho or delta
        if flavor == "delta":
            return self.distance(z), self._distance_grad(z)
        if flavor == "rho":
            rz, _ = self.rho_derivs(z)
            # grad(-rho) = -(rho_x + i rho_y) with rho_z = (rho_x - i rho_y)/2
            return -self.rho(z), -2 * np.conj(rz)
        raise ValueError(f"unknown flavor {flavor!r}; use 'rho' or 'delta'")

    def inside(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x0, x1, y0, y1 = self.bbox
        box = (z.real > x0) & (z.real < x1) & (z.imag > y0) & (z.imag < y1)
        with np.errstate(invalid="ignore"):
            return box & (self.rho(np.where(box, z, 0)) < 0)

    # ------------------------------------------------------------------ cell areas
    def cell_area(self, rects: np.ndarray) -> np.ndarray:
        """Exact area of each rectangle intersected with the domain."""
        x0, x1, y0, y1 = (rects[:, i] for i in range(4))
        if self.kind == "disc":
            return _disc_rect_area(x0, x1, y0, y1, self.params["radius"])
        if self.kind == "square":
            w = np.clip(np.minimum(x1, 1) - np.maximum(x0, -1), 0, None)
            h = np.clip(np.minimum(y1, 1) - np.maximum(y0, -1), 0, None)
            return w * h
        return (_disc_rect_area(x0, x1, y0, y1, self.params["outer"])
                - _disc_rect_area(x0, x1, y0, y1, self.params["inner"]))

    # ------------------------------------------------------------------ grid
    @property
    def grid(self) -> PlanarGrid:
        if "grid" not in self._cache:
            self._cache["grid"] = self._build_grid()
        return self._cache["grid"]

    def _build_grid(self) -> PlanarGrid:
        x0, x1, y0, y1 = self.bbox
        R = self.resolution
        h = (x1 - x0) / R
        xs = x0 + h * np.arange(R)
        ys = y0 + h * np.arange(R)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        rects = np.stack([X.ravel(), X.ravel() + h, Y.ravel(), Y.ravel() + h], axis=1)
        centers, area, full = self._classify(rects, h)
        keep = area > 0
        rects, area, centers, full = rects[keep], area[keep], centers[keep], full[keep]
        full_area = h * h
        banded = ~full | (self.distance(centers) < self.band * h)

        core = ~banded
        parts = [(centers[core], np.full(core.sum(), full_area), rects[core],
                  np.zeros(core.sum(), bool), np.ones(core.sum(), bool))]
        if np.any(banded):
            parts.append(self._split(rects[banded], h / self.sub))
        nodes, areas, rr, band, full = (np.concatenate(c) for c in zip(*parts))
        if not np.all(self.rho(nodes) < 0):
            raise NumericalError("grid node outside the domain")
        return PlanarGrid(nodes, areas, rr, band, full, h)

    def _split(self, rects: np.ndarray, hs: float):
        m = self.sub
        off = hs * np.arange(m)
        ox, oy = np.meshgrid(off, off, indexing="ij")
        sx = (rects[:, None, 0] + ox.ravel()[None]).ravel()
        sy = (rects[:, None, 2] + oy.ravel()[None]).ravel()
        sub = np.stack([sx, sx + hs, sy, sy + hs], axis=1)
        nodes, area, full = self._classify(sub, hs)
        # slivers below this size carry no measurable mass
        keep = area > 1e-9 * hs * hs
        sub, area, full, nodes = sub[keep], area[keep], full[keep], nodes[keep]
        if np.any(~full):
            pn, ok = self._partial_nodes(sub[~full])
            nodes[~full] = pn
            drop = np.flatnonzero(~full)[~ok]
            keep2 = np.ones(area.size, bool)
            keep2[drop] = False
            sub, area, full, nodes = sub[keep2], area[keep2], full[keep2], nodes[keep2]
        return nodes, area, sub, np.ones(area.size, bool), full

    def _classify(self, rects: np.ndarray, size: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # a cell is full when the distance ball at its centre covers it; the
        # closed-form areas are used for the rest (they lose digits to
        # cancellation, so they are not used to detect full cells)
        centers = (rects[:, 0] + rects[:, 1]) / 2 + 1j * (rects[:, 2] + rects[:, 3]) / 2
        full = self.distance(centers) >= size * np.sqrt(0.5)
        area = np.full(centers.size, size * size)
        if np.any(~full):
            area[~full] = np.clip(self.cell_area(rects[~full]), 0.0, size * size)
        return centers, area, full

    def _partial_nodes(self, rects: np.ndarray, k: int = 8) -> tuple[np.ndarray, np.ndarray]:
        # mean of the inside points of a k x k subsample; nearest inside sample if
        # the mean falls outside (non-convex pieces); finer sampling for slivers
        t = (np.arange(k) + 0.5) / k
        tx, ty = np.meshgrid(t, t, indexing="ij")
        w = rects[:, 1] - rects[:, 0]
        hgt = rects[:, 3] - rects[:, 2]
        pts = (rects[:, None, 0] + w[:, None] * tx.ravel()) + 1j * (rects[:, None, 2] + hgt[:, None] * ty.ravel())
        ins = self.rho(pts) < 0
        cnt = ins.sum(axis=1)
        ok = cnt > 0
        mean = np.where(ok, np.sum(np.where(ins, pts, 0), axis=1) / np.maximum(cnt, 1), 0)
        bad = ok & ~(self.rho(mean) < 0)
        if np.any(bad):
            dist = np.where(ins[bad], np.abs(pts[bad] - mean[bad, None]), np.inf)
            mean[bad] = pts[bad][np.arange(bad.sum()), np.argmin(dist, axis=1)]
        if np.any(~ok) and k < 32:
            sub_nodes, sub_ok = self._partial_nodes(rects[~ok], 4 * k)
            mean[~ok] = sub_nodes
            ok[~ok] = sub_ok
        elif np.any(~ok):
            # slivers: the corner or nearest-to-origin point with the smallest rho
            r = rects[~ok]
            cand = np.stack([r[:, 0] + 1j * r[:, 2], r[:, 0] + 1j * r[:, 3], r[:, 1] + 1j * r[:, 2],
                             r[:, 1] + 1j * r[:, 3],
                             np.clip(0, r[:, 0], r[:, 1]) + 1j * np.clip(0, r[:, 2], r[:, 3])], axis=1)
            rv = self.rho(cand)
            best = cand[np.arange(r.shape[0]), np.argmin(rv, axis=1)]
            mean[~ok] = best
            ok[~ok] = np.min(rv, axis=1) < 0
        return mean, ok

    # ------------------------------------------------------------------ moments
    def moment(self, alpha: float, flavor: str = "rho") -> np.ndarray:
        """Per-node weights ``int_cell w^alpha dA`` with ``w = -rho`` or ``delta``.

        Each cell integrates the linearization of ``w`` at its node exactly,
        rescaled so that the clipped area equals the exact cell area. This
        keeps the rule accurate for negative ``alpha`` next to the boundary,
        where point values of ``w^alpha`` are far off.
        """
        alpha = float(alpha)
        if alpha <= -1:
            raise DomainError(f"w^{alpha} is not integrable up to the boundary")
        key = ("moment", round(alpha, 14), flavor)
        if key in self._cache:
            return self._cache[key]
        gr = self.grid
        val, grad = self._level(flavor, gr.nodes)
        if np.any(val <= 0):
            raise NumericalError("non-positive level value at a node")
        if alpha == 0:
            out = gr.area
        else:
            r = gr.rects
            zc = gr.nodes
            args = (val, grad.real, grad.imag,
                    r[:, 0] - zc.real, r[:, 1] - zc.real, r[:, 2] - zc.imag, r[:, 3] - zc.imag)
            out = gr.area * _linear_power_integral(*args, alpha) / _linear_power_integral(*args, 0.0)
        self._cache[key] = out
        return out

    def comparability(self) -> tuple[float, float]:
        """Measured ``(c1, c2)`` with ``c1 delta <= -rho <= c2 delta`` on the nodes."""
        z = self.grid.nodes
        ratio = -self.rho(z) / self.distance(z)
        return float(ratio.min()), float(ratio.max())

    def integrate(self, values, psi=None, alpha: float = 0.0, flavor: str = "rho") -> complex:
        """``sum values * e^{-psi} * moment(alpha)`` over the grid nodes."""
        w = self.moment(alpha, flavor) * np.exp(-weight_values(psi, self.grid.nodes))
        return complex(np.sum(np.asarray(values) * w))


def _disc_quadrant(a: np.ndarray, b: np.ndarray, R: float) -> np.ndarray:
    # area of {0 <= x <= a, 0 <= y <= b} inside the disc of radius R, a, b >= 0
    a = np.minimum(a, R)
    b = np.minimum(b, R)

    def prim(x):
        return 0.5 * (x * np.sqrt(np.maximum(R * R - x * x, 0)) + R * R * np.arcsin(np.clip(x / R, -1, 1)))

    m = np.minimum(a, np.sqrt(np.maximum(R * R - b * b, 0)))
    return b * m + prim(a) - prim(m)


def _disc_rect_area(x0, x1, y0, y1, R: float) -> np.ndarray:
    def signed(X, Y):
        return np.sign(X) * np.sign(Y) * _disc_quadrant(np.abs(X), np.abs(Y), R)

    return signed(x1, y1) - signed(x0, y1) - signed(x1, y0) + signed(x0, y0)


def _linear_power_integral(a, b, c, x0, x1, y0, y1, alpha: float) -> np.ndarray:
    """``int_{[x0,x1]x[y0,y1]} (a + b x + c y)_+^alpha dx dy``, elementwise."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    hx, hy = x1 - x0, y1 - y0
    scale = np.abs(a) + np.abs(b) * hx + np.abs(c) * hy
    bx = np.abs(b) * hx >= _DEGENERATE * scale
    cy = np.abs(c) * hy >= _DEGENERATE * scale

    def p2(t):
        return np.maximum(t, 0) ** (alpha + 2) / ((alpha + 1) * (alpha + 2))

    def p1(t):
        return np.maximum(t, 0) ** (alpha + 1) / (alpha + 1)

    out = np.empty(a.shape)
    both = bx & cy
    if np.any(both):
        A, B, C = a[both], b[both], c[both]
        X0, X1, Y0, Y1 = x0[both], x1[both], y0[both], y1[both]
        out[both] = (p2(A + B * X1 + C * Y1) - p2(A + B * X0 + C * Y1)
                     - p2(A + B * X1 + C * Y0) + p2(A + B * X0 + C * Y0)) / (B * C)
    onlyx = bx & ~cy
    if np.any(onlyx):
        A = a[onlyx] + c[onlyx] * 0.5 * (y0[onlyx] + y1[onlyx])
        B = b[onlyx]
        out[onlyx] = hy[onlyx] * (p1(A + B * x1[onlyx]) - p1(A + B * x0[onlyx])) / B
    onlyy = cy & ~bx
    if np.any(onlyy):
        A = a[onlyy] + b[onlyy] * 0.5 * (x0[onlyy] + x1[onlyy])
        C = c[onlyy]
        out[onlyy] = hx[onlyy] * (p1(A + C * y1[onlyy]) - p1(A + C * y0[onlyy])) / C
    flat = ~bx & ~cy
    if np.any(flat):
        A = a[flat] + b[flat] * 0.5 * (x0[flat] + x1[flat]) + c[flat] * 0.5 * (y0[flat] + y1[flat])
        out[flat] = hx[flat] * hy[flat] * np.maximum(A, 0) ** alpha
    return out


def _annulus_field(inner: float, outer: float) -> ScalarField:
    a, b = inner**2, outer**2

    def ev(z):
        t = np.abs(z[..., 0]) ** 2
        return (t - a) * (t - b) / b

    def grad(z):
        t = np.abs(z[..., 0]) ** 2
        return (np.conj(z[..., 0]) * (2 * t - a - b) / b)[..., None]

    def hess(z):
        t = np.abs(z[..., 0]) ** 2
        return ((4 * t - a - b) / b + 0j)[..., None, None]

    return ScalarField(eval=ev, dim=1, grad=grad, hess=hess, name="annulus")


def defining_field(dom: PlanarDomain) -> ScalarField:
    """The defining function of ``dom`` as a one-variable :class:`ScalarField`."""
    if dom.kind == "disc":
        return models.ball_defining(1, dom.params["radius"])
    if dom.kind == "square":
        return models.square_field(1)
    return _annulus_field(dom.params["inner"], dom.params["outer"])


def weight_values(psi, z) -> np.ndarray:
    """Evaluate a planar weight given as ``None``, a ScalarField or a callable."""
    z = np.asarray(z, dtype=complex)
    if psi is None:
        return np.zeros(z.shape)
    if isinstance(psi, ScalarField):
        return np.asarray(psi(z[..., None]), dtype=float)
    return np.asarray(psi(z), dtype=float)
