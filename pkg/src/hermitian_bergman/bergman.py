"""Weighted Bergman projections and related experiments on planar domains.

Functions on the grid are handled as ``values * (-rho)**power`` where
``values`` is sampled at the nodes and ``power`` carries a boundary
singularity. Every weighted integral then becomes a sum of sampled values
against per-node moments of a power of ``-rho`` (see
:meth:`PlanarDomain.moment`), which keeps the discrete inner products
consistent between the different weights in play.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import models
from .cauchy import CauchyTransform, cauchy_solve, interior_test_points
from .dfcheck import DFProblem, DomainSample, b_margin
from .errors import DomainError, NumericalError
from .planar import PlanarDomain, defining_field, weight_values

COND_LIMIT = 1e12
# singular values below this fraction of the largest are discarded
RANK_RTOL = 1e-14
# ratios below this are quadrature leakage (P v = 0 by symmetry) and compare absolutely
RATIO_FLOOR = 1e-3


def _values(v, z: np.ndarray) -> np.ndarray:
    if callable(v):
        out = np.asarray(v(z), dtype=complex)
        return np.broadcast_to(out, z.shape).copy() if out.ndim == 0 else out
    out = np.asarray(v, dtype=complex)
    if out.shape != z.shape:
        raise ValueError("node values must match the grid")
    return out


# ---------------------------------------------------------------- basis and projection


@dataclass
class HoloBasis:
    """Scaled monomials ``(z/R)^k`` orthogonalized against a grid weight.

    The weight is ``e^{-psi} (-rho)^alpha``. The weighted design matrix
    ``S = sqrt(w) Phi`` is factored by SVD; its squared condition number is
    the condition number of the Gram matrix.

    Parameters
    ----------
    dom : PlanarDomain
    degree : int
        Highest exponent ``N``; ``laurent=True`` uses ``-N..N``.
    psi : ScalarField or callable, optional
    alpha : float
        Power of ``-rho`` in the weight.
    """

    dom: PlanarDomain
    degree: int = 25
    psi: object = None
    alpha: float = 0.0
    laurent: bool = False
    _fac: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        lo = -self.degree if self.laurent else 0
        self.exponents = np.arange(lo, self.degree + 1)
        self.scale = float(np.max(np.abs(self.dom.grid.nodes)))
        gr = self.dom.grid
        self.node_psi = weight_values(self.psi, gr.nodes)
        self.weights = np.exp(-self.node_psi) * self.dom.moment(self.alpha)
        Phi = self.evaluate(gr.nodes)
        S = np.sqrt(self.weights)[:, None] * Phi
        U, sig, Vh = np.linalg.svd(S, full_matrices=False)
        keep = sig > RANK_RTOL * sig[0]
        self.phi = Phi
        self.U, self.sig, self.Vh = U[:, keep], sig[keep], Vh[keep]
        self.rank = int(keep.sum())
        self.cond = float((sig[0] / sig[-1]) ** 2) if sig[-1] > 0 else math.inf

    @property
    def size(self) -> int:
        return self.exponents.size

    @property
    def flagged(self) -> bool:
        return self.cond > COND_LIMIT or self.rank < self.size

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (z[..., None] / self.scale) ** self.exponents

    def derivative(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        k = self.exponents
        return k / self.scale * (z[..., None] / self.scale) ** (k - 1)

    def gram(self) -> np.ndarray:
        """``G[j, k] = <phi_j, phi_k>`` under the basis weight."""
        return np.einsum("i,ij,ik->jk", self.weights, self.phi, np.conj(self.phi))

    def coefficients(self, values: np.ndarray, power: float = 0.0) -> np.ndarray:
        """Scaled-basis coefficients of the projection of ``values * (-rho)^power``."""
        wv = np.exp(-self.node_psi) * self.dom.moment(self.alpha + power)
        y = wv * values / np.sqrt(self.weights)
        return self.Vh.conj().T @ ((self.U.conj().T @ y) / self.sig)


@dataclass
class ProjectionResult:
    """Output of a weighted projection.

    Attributes
    ----------
    coeffs : ndarray
        Coefficients of the monomials ``z^k`` (unscaled).
    values : ndarray
        Projection sampled at the grid nodes.
    diagnostics : dict
        ``cond``, ``flagged``, ``idempotence`` and ``rank``.
    """

    basis: HoloBasis
    scaled: np.ndarray
    values: np.ndarray
    diagnostics: dict

    @property
    def coeffs(self) -> np.ndarray:
        return self.scaled / self.basis.scale ** self.basis.exponents

    def __call__(self, z) -> np.ndarray:
        return self.basis.evaluate(z) @ self.scaled


def gram_and_project(dom: PlanarDomain, v, psi=None, degree: int = 25, power: float = 0.0,
                     basis: HoloBasis | None = None) -> ProjectionResult:
    """Orthogonal projection of ``v (-rho)^power`` onto truncated holomorphic functions.

    ``v`` is a callable on complex arrays or an array of node values. The
    inner product is ``<f, g> = int f conj(g) e^{-psi} dA``.
    """
    basis = HoloBasis(dom, degree, psi) if basis is None else basis
    vals = _values(v, dom.grid.nodes)
    if not np.all(np.isfinite(vals)):
        raise DomainError("function is not finite on the grid")
    if basis.alpha + power <= -1:
        raise DomainError("function is not integrable against the weight")
    c = basis.coefficients(vals, power)
    pv = basis.phi @ c
    again = basis.phi @ basis.coefficients(pv)
    scale = max(float(np.sqrt(np.sum(basis.weights * np.abs(pv) ** 2))), 1e-300)
    idem = float(np.sqrt(np.sum(basis.weights * np.abs(again - pv) ** 2))) / scale
    diag = {"cond": basis.cond, "flagged": basis.flagged, "rank": basis.rank, "idempotence": idem}
    if basis.flagged:
        warnings.warn(f"Gram matrix condition number {basis.cond:.3g} exceeds {COND_LIMIT:g}", stacklevel=2)
    return ProjectionResult(basis, c, pv, diag)


# ---------------------------------------------------------------- norms


def weighted_norm(dom: PlanarDomain, u, s: float, flavor: str = "delta", psi=None,
                  power: float = 0.0) -> float:
    """``|| w^{-s} u ||`` in ``L^2(e^{-psi})`` with ``w = delta`` or ``-rho``.

    ``power`` marks ``u = values * (-rho)^power`` (only with ``flavor="rho"``).
    """
    if s >= 0.5:
        warnings.warn("the weighted norm is a Sobolev proxy only for s < 1/2", stacklevel=2)
    if power and flavor != "rho":
        raise ValueError("a singular factor is only supported with flavor='rho'")
    vals = _values(u, dom.grid.nodes)
    alpha = -2 * s + 2 * power
    if alpha <= -1:
        raise DomainError("norm is infinite: weight not integrable")
    return math.sqrt(dom.integrate(np.abs(vals) ** 2, psi, alpha, flavor).real)


def inner_psi(dom: PlanarDomain, a: np.ndarray, b: np.ndarray, psi=None, power: float = 0.0) -> complex:
    """``sum a conj(b) e^{-psi} moment(power)`` for node values."""
    return dom.integrate(a * np.conj(b), psi, power)


# ---------------------------------------------------------------- test families


@dataclass(frozen=True)
class TestFunction:
    """``v = p(z) (-rho)^{-t}`` with a smooth factor ``p``."""

    name: str
    p: Callable
    t: float = 0.0


def conjugate_power_family(max_power: int = 3, ts: Sequence[float] = (0.0, 0.2)) -> list[TestFunction]:
    """``zbar^m (-rho)^{-t}`` for ``m <= max_power``."""
    out = []
    for t in ts:
        for m in range(max_power + 1):
            out.append(TestFunction(f"zbar^{m}*w^-{t:g}", lambda z, m=m: np.conj(z) ** m, float(t)))
    return out


def random_polynomial_family(count: int, seed: int = 0, degree: int = 3,
                             ts: Sequence[float] = (0.0, 0.2)) -> list[TestFunction]:
    """Random combinations of ``z^j zbar^k`` (``j + k <= degree``)."""
    rng = np.random.default_rng(seed)
    pairs = [(j, k) for j in range(degree + 1) for k in range(degree + 1 - j)]
    out = []
    for i in range(count):
        c = rng.standard_normal(len(pairs)) + 1j * rng.standard_normal(len(pairs))

        def p(z, c=c):
            return sum(ci * z**j * np.conj(z) ** k for ci, (j, k) in zip(c, pairs))

        out.append(TestFunction(f"random{i}*w^-{ts[i % len(ts)]:g}", p, float(ts[i % len(ts)])))
    return out


def default_family(seed: int = 0) -> list[TestFunction]:
    """Twenty test functions: eight conjugate powers and twelve random polynomials."""
    return conjugate_power_family() + random_polynomial_family(12, seed)


# ---------------------------------------------------------------- operator bound


def b_theory(s: float) -> float:
    """``B = (1 - 2s) / (2s)``, the margin of ``(-rho)^{2s}`` on convex domains."""
    return (1 - 2 * s) / (2 * s)


def operator_bound(B: float) -> float:
    """``sqrt(1 + B) / (sqrt(1 + B) - 1)``."""
    r = math.sqrt(1 + B)
    return r / (r - 1)


def planar_b_margin(dom: PlanarDomain, eta: float, psi=None) -> float:
    """Measured margin ``B`` for ``kappa = (-rho)^eta`` over the grid nodes."""
    weight = psi if psi is not None else models.zero_weight(1)
    p = DFProblem(models.euclidean(1), weight, defining_field(dom), eta)
    return b_margin(p, DomainSample(dom.grid.nodes[:, None]))


@dataclass
class OperatorBoundReport:
    s: float
    B: float
    bound: float
    slack: float
    rows: list
    skipped: list
    cond: float
    flagged: bool

    @property
    def max_ratio(self) -> float:
        vals = [r[k] for r in self.rows for k in ("plus", "minus") if r.get(k) is not None]
        return max(vals) if vals else math.nan

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound * (1 + self.slack)


def operator_bound_experiment(dom: PlanarDomain, s: float, family: Sequence[TestFunction] | None = None,
                              psi=None, degree: int = 25, slack: float = 0.1, B: float | None = None,
                              basis: HoloBasis | None = None) -> OperatorBoundReport:
    """Ratios ``||(-rho)^{+-s} P v|| / ||(-rho)^{+-s} v||`` against the operator bound.

    The minus ratio is skipped (and listed) when ``(-rho)^{-s} v`` is not
    square integrable.
    """
    if not 0 < s < 0.5:
        raise ValueError("need 0 < s < 1/2")
    family = default_family() if family is None else family
    basis = HoloBasis(dom, degree, psi) if basis is None else basis
    B = b_theory(s) if B is None else B
    nodes = dom.grid.nodes
    rows, skipped = [], []
    for f in family:
        pv = f.p(nodes)
        c = basis.coefficients(pv, -f.t)
        proj = basis.phi @ c
        row = {"name": f.name}
        for key, sign in (("plus", 1.0), ("minus", -1.0)):
            a = sign * 2 * s
            if a - 2 * f.t <= -1:
                row[key] = None
                skipped.append((f.name, key))
                continue
            num = dom.integrate(np.abs(proj) ** 2, psi, a).real
            den = dom.integrate(np.abs(pv) ** 2, psi, a - 2 * f.t).real
            row[key] = math.sqrt(num / den)
        rows.append(row)
    return OperatorBoundReport(s, B, operator_bound(B), slack, rows, skipped, basis.cond, basis.flagged)


def projection_laws(dom: PlanarDomain, psi=None, degree: int = 25, pairs: int = 20, seed: int = 0,
                    basis: HoloBasis | None = None) -> dict:
    """Idempotence, self-adjointness and contraction defects on random pairs."""
    basis = HoloBasis(dom, degree, psi) if basis is None else basis
    fam = random_polynomial_family(2 * pairs, seed, ts=(0.0,))
    nodes = dom.grid.nodes
    idem = adj = contr = 0.0
    for i in range(pairs):
        v = fam[2 * i].p(nodes)
        w = fam[2 * i + 1].p(nodes)
        pv = basis.phi @ basis.coefficients(v)
        pw = basis.phi @ basis.coefficients(w)
        ppv = basis.phi @ basis.coefficients(pv)
        nv = math.sqrt(inner_psi(dom, v, v, psi).real)
        nw = math.sqrt(inner_psi(dom, w, w, psi).real)
        npv = math.sqrt(inner_psi(dom, pv, pv, psi).real)
        idem = max(idem, math.sqrt(inner_psi(dom, ppv - pv, ppv - pv, psi).real) / npv)
        adj = max(adj, abs(inner_psi(dom, pv, w, psi) - inner_psi(dom, v, pw, psi)) / (nv * nw))
        contr = max(contr, npv / nv - 1.0)
    return {"idempotence": idem, "self_adjointness": adj, "contraction_excess": contr, "cond": basis.cond}


def boas_straube_check(dom: PlanarDomain, eta: float = 0.5, family: Sequence[TestFunction] | None = None,
                       psi=None, degree: int = 25) -> float:
    """Max relative gap between ``P v`` and ``P(kappa^{-1} P_kappa(kappa v))``.

    ``kappa = (-rho)^eta`` and ``P_kappa`` projects in ``L^2(psi + log kappa)``.
    """
    family = (conjugate_power_family(3, (0.0,)) + random_polynomial_family(6, 1, ts=(0.0,))
              if family is None else family)
    plain = HoloBasis(dom, degree, psi)
    twisted = HoloBasis(dom, degree, psi, alpha=-eta)
    nodes = dom.grid.nodes
    worst = 0.0
    for f in family:
        pv = f.p(nodes)
        direct = plain.phi @ plain.coefficients(pv, -f.t)
        # kappa v = p (-rho)^{eta - t}; the twisted weight contributes (-rho)^{-eta}
        H = twisted.phi @ twisted.coefficients(pv, eta - f.t)
        back = plain.phi @ plain.coefficients(H, -eta)
        gap = math.sqrt(inner_psi(dom, direct - back, direct - back, psi).real)
        worst = max(worst, gap / math.sqrt(inner_psi(dom, direct, direct, psi).real))
    return worst


def truncation_stability(dom: PlanarDomain, s: float, degree: int = 25, extra: int = 5,
                         family: Sequence[TestFunction] | None = None, psi=None) -> float:
    """Largest relative change of the reported ratios from ``degree`` to ``degree + extra``."""
    a = operator_bound_experiment(dom, s, family, psi, degree)
    b = operator_bound_experiment(dom, s, family, psi, degree + extra)
    worst = 0.0
    for ra, rb in zip(a.rows, b.rows):
        for k in ("plus", "minus"):
            if ra[k] is not None:
                worst = max(worst, abs(rb[k] - ra[k]) / max(abs(ra[k]), RATIO_FLOOR))
    return worst


# ---------------------------------------------------------------- twisted solution


@dataclass
class TwistedResult:
    """``u = (w - h) (-rho)^{-eta}`` with diagnostics.

    Attributes
    ----------
    values : ndarray
        ``w - h`` at the grid nodes.
    power : float
        ``-eta``.
    transform : CauchyTransform
        The particular solution ``w``.
    h : ProjectionResult
        Holomorphic correction.
    diagnostics : dict
        ``residual``, ``ratio``, ``bound``, ``B``, ``B_measured``,
        ``orthogonality``, ``cond``, ``flagged``.
    """

    values: np.ndarray
    power: float
    transform: CauchyTransform | None
    h: ProjectionResult | None
    diagnostics: dict

    def __call__(self, z) -> np.ndarray:
        if self.transform is None:
            return np.zeros(np.shape(z), dtype=complex)
        z = np.asarray(z, dtype=complex)
        dom = self.transform.dom
        return (self.transform(z) - self.h(z)) * (-dom.rho(z)) ** self.power


def twisted_solution(dom: PlanarDomain, f: Callable, eta: float, psi=None, degree: int = 25,
                     B_est: float | None = None, slack: float = 0.1, check_points=None,
                     constant: bool = False) -> TwistedResult:
    """Solve ``dbar u = kappa^{-1}(f - u) dbar kappa`` with ``u`` orthogonal to holomorphic functions.

    ``kappa = (-rho)^eta``. With ``w`` the Cauchy transform of ``f dbar kappa``
    and ``h = P_{psi + log kappa} w``, ``u = kappa^{-1}(w - h)`` satisfies the
    equation and ``<u, phi>_psi = 0`` for every basis element. ``constant=True``
    takes ``kappa`` constant, for which ``u = 0``.

    Diagnostics compare ``||u|| / ||f||`` in ``L^2(psi - log kappa)`` with
    ``(1 + B)^{-1/2} (1 + slack)``.
    """
    gr = dom.grid
    fv = np.asarray(f(gr.nodes), dtype=complex)
    if constant or eta == 0:
        diag = {"residual": 0.0, "ratio": 0.0, "bound": 1.0 + slack, "B": 0.0, "B_measured": math.nan,
                "orthogonality": 0.0, "cond": math.nan, "flagged": False}
        return TwistedResult(np.zeros_like(fv), 0.0, None, None, diag)
    if not 0 < eta < 1:
        raise ValueError("need 0 < eta < 1")
    B = b_theory(eta / 2) if B_est is None else B_est
    B_meas = planar_b_margin(dom, eta, psi)
    if B > B_meas * (1 + 1e-9):
        warnings.warn(f"B_est = {B:g} exceeds the measured margin {B_meas:g}", stacklevel=2)

    def kappa_dbar(z):
        rz, _ = dom.rho_derivs(z)
        return -eta * (-dom.rho(z)) ** (eta - 1) * np.conj(rz)

    def rhs(z):
        return np.asarray(f(z), dtype=complex) * kappa_dbar(z)

    rz, _ = dom.rho_derivs(gr.nodes)
    mass = fv * (-eta) * np.conj(rz) * dom.moment(eta - 1)
    wt = cauchy_solve(dom, rhs, mass=mass)
    wn = wt(gr.nodes)
    basis = HoloBasis(dom, degree, psi, alpha=-eta)
    h = gram_and_project(dom, wn, psi, degree, basis=basis)
    diff = wn - h.values

    norm_u = math.sqrt(dom.integrate(np.abs(diff) ** 2, psi, -eta).real)
    norm_f = math.sqrt(dom.integrate(np.abs(fv) ** 2, psi, eta).real)
    phi = HoloBasis(dom, degree, psi).phi
    ortho = max(abs(dom.integrate(diff * np.conj(phi[:, k]), psi, -eta)) for k in range(phi.shape[1]))
    result = TwistedResult(diff, -eta, wt, h, {})

    z = interior_test_points(dom) if check_points is None else np.asarray(check_points, dtype=complex)
    st = 1e-3 * gr.cell
    uu = result(np.concatenate([z, z + st, z - st, z + 1j * st, z - 1j * st])).reshape(5, -1)
    dbar_u = 0.5 * ((uu[1] - uu[2]) + 1j * (uu[3] - uu[4])) / (2 * st)
    kap = (-dom.rho(z)) ** eta
    target = (np.asarray(f(z), dtype=complex) - uu[0]) * kappa_dbar(z) / kap
    residual = float(np.sqrt(np.mean(np.abs(dbar_u - target) ** 2) / np.mean(np.abs(target) ** 2)))
    if not np.isfinite(residual):
        raise NumericalError("non-finite twisted residual")
    result.diagnostics = {
        "residual": residual,
        "ratio": norm_u / norm_f,
        "bound": (1 + B) ** -0.5 * (1 + slack),
        "B": B,
        "B_measured": B_meas,
        # normalized by the finite L^2(psi - log kappa) norm of u
        "orthogonality": ortho / norm_u,
        "cond": basis.cond,
        "flagged": basis.flagged,
    }
    return result


# ---------------------------------------------------------------- Sobolev proxies


def detraz_ratio(dom: PlanarDomain, u: Callable, du: Callable, s: float) -> float:
    """``|| delta^{1-s} u' || / || delta^{-s} u ||``."""
    if not 0 < s < 0.5:
        raise ValueError("need 0 < s < 1/2")
    nodes = dom.grid.nodes
    den = dom.integrate(np.abs(_values(u, nodes)) ** 2, None, -2 * s, "delta").real
    if den <= 0:
        raise ValueError("zero denominator: u vanishes on the grid")
    num = dom.integrate(np.abs(_values(du, nodes)) ** 2, None, 2 - 2 * s, "delta").real
    return math.sqrt(num / den)


def detraz_sweep(dom: PlanarDomain, powers: Sequence[int], s: float) -> dict:
    """Ratios for ``u = z^m`` and the log-log growth exponent over the upper half of ``powers``."""
    ms = np.asarray(list(powers))
    ratios = np.array([detraz_ratio(dom, lambda z, m=m: z**m, lambda z, m=m: m * z ** (m - 1), s) for m in ms])
    tail = ms >= ms[len(ms) // 2]
    ok = tail & (ratios > 0)
    slope = float(np.polyfit(np.log(ms[ok]), np.log(ratios[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return {"powers": ms.tolist(), "ratios": ratios.tolist(), "max": float(ratios.max()), "growth": slope}


def cauchy_estimate_sweep(max_power: int = 20, radii: Sequence[float] = (0.1, 0.5),
                          resolution: int = 128) -> dict:
    """Smallest ``C`` with ``|u'(0)|^2 <= C R^{-4} int_{B(0,R)} |u|^2`` for ``u = z^m``.

    The ball integrals are computed by quadrature on the disc of radius ``R``.
    """
    needed = 0.0
    rows = []
    for R in radii:
        dom = PlanarDomain.disc(R, resolution=resolution)
        for m in range(max_power + 1):
            integral = dom.integrate(np.abs(dom.grid.nodes ** m) ** 2).real
            deriv2 = 1.0 if m == 1 else 0.0
            c = deriv2 * R**4 / integral
            rows.append({"R": R, "m": m, "C_needed": c})
            needed = max(needed, c)
    return {"C_needed": needed, "rows": rows}
