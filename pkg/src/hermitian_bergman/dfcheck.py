"""Pointwise curvature inequality for ``kappa = (-rho)^eta`` and exponent sweeps.

For a metric ``g``, weight ``psi`` and defining function ``rho`` the form

    F_eta = kappa (Theta + d dbar psi) - d dbar kappa - kappa Q

is assembled in the coordinate frame, where ``Theta`` is the curvature trace
and ``Q`` the torsion form. The inequality holds at a point iff ``F_eta`` is
positive semidefinite there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CheckFailure, DomainError
from .geometry import (
    HermitianForm,
    MetricField,
    ScalarField,
    as_coords,
    curvature_trace,
    torsion_norm_form,
)

PSD_TOL_ANALYTIC = 1e-8
PSD_TOL_FD = 1e-5
KERNEL_RTOL = 1e-10
# squared gradient norm below which d rho is treated as zero
DEGENERATE_GRAD2 = 1e-24


@dataclass(frozen=True)
class DFProblem:
    """Metric, weight ``psi``, defining function ``rho`` and exponent ``eta``."""

    metric: MetricField
    weight: ScalarField
    defining: ScalarField
    eta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    def with_eta(self, eta: float) -> "DFProblem":
        return DFProblem(self.metric, self.weight, self.defining, float(eta))

    @property
    def analytic(self) -> bool:
        m = self.metric
        fields = (self.weight, self.defining)
        return (
            m.deriv_mode == "analytic"
            and m.first_deriv is not None
            and m.second_deriv is not None
            and all(f.deriv_mode == "analytic" and f.grad is not None and f.hess is not None for f in fields)
        )

    @property
    def default_psd_tol(self) -> float:
        return PSD_TOL_ANALYTIC if self.analytic else PSD_TOL_FD


@dataclass(frozen=True)
class DomainSample:
    """Interior sample points with optional distances and quadrature weights."""

    points: np.ndarray
    rho: np.ndarray | None = None
    distance: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=complex)))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class DFReport:
    """Outcome of an exponent sweep."""

    etas: list
    min_eigs: list
    worst_points: list
    passes: list
    b_estimates: list
    psd_tol: float
    refined_eta: float | None = None
    shell_min_eigs: list | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passing_etas(self) -> list:
        return [e for e, p in zip(self.etas, self.passes) if p]

    @property
    def best_eta(self) -> float | None:
        ok = self.passing_etas
        return max(ok) if ok else None

    def rows(self) -> list[dict]:
        out = []
        for i, eta in enumerate(self.etas):
            out.append(
                {
                    "eta": eta,
                    "min_eig": self.min_eigs[i],
                    "worst_point": self.worst_points[i],
                    "B": self.b_estimates[i],
                    "pass": self.passes[i],
                }
            )
        return out


# ---------------------------------------------------------------- pointwise pieces


def _neg_rho(rho: ScalarField, z: np.ndarray) -> np.ndarray:
    r = np.asarray(rho(z), dtype=float)
    if np.any(r >= 0):
        raise DomainError("defining function must be negative at every evaluation point")
    return -r


def _rank_one(drho: np.ndarray) -> np.ndarray:
    # [j, k] = d_j rho dbar_k rho for real rho
    return drho[..., :, None] * np.conj(drho)[..., None, :]


def kappa_derivatives(rho: ScalarField, eta: float, z) -> tuple[np.ndarray, np.ndarray, HermitianForm]:
    """``kappa = (-rho)^eta`` with its ``d`` and ``d dbar`` derivatives."""
    z = as_coords(z)
    m = _neg_rho(rho, z)
    drho = rho.d(z)
    kappa = m**eta
    dkappa = -(eta * m ** (eta - 1))[..., None] * drho
    dd = -(eta * m ** (eta - 1))[..., None, None] * rho.ddbar(z) - (eta * (1 - eta) * m ** (eta - 2))[
        ..., None, None
    ] * _rank_one(drho)
    return kappa, dkappa, HermitianForm(dd)


@dataclass(frozen=True)
class _Parts:
    curvature: np.ndarray  # Theta + d dbar psi
    torsion: np.ndarray  # Q
    m: np.ndarray  # -rho
    drho: np.ndarray
    ddrho: np.ndarray


def _parts(p: DFProblem, z: np.ndarray) -> _Parts:
    return _Parts(
        curvature=curvature_trace(p.metric, z).matrix + p.weight.ddbar(z),
        torsion=torsion_norm_form(p.metric, z).matrix,
        m=_neg_rho(p.defining, z),
        drho=p.defining.d(z),
        ddrho=p.defining.ddbar(z),
    )


def df_form(p: DFProblem, z) -> HermitianForm:
    """``F = kappa (Theta + d dbar psi) - d dbar kappa - kappa Q`` at ``z``."""
    z = as_coords(z)
    kappa, _, ddk = kappa_derivatives(p.defining, p.eta, z)
    Theta = curvature_trace(p.metric, z).matrix + p.weight.ddbar(z)
    Q = torsion_norm_form(p.metric, z).matrix
    k = np.asarray(kappa)[..., None, None]
    return HermitianForm(k * Theta - ddk.matrix - k * Q)


def _psi_matrix(parts: _Parts, eta: float) -> np.ndarray:
    return parts.curvature + (eta / parts.m)[..., None, None] * parts.ddrho - parts.torsion


def psi_form(p: DFProblem, eta: float, z) -> HermitianForm:
    """``Psi_eta = Theta + d dbar psi + eta (-rho)^{-1} d dbar rho - Q``.

    With it, ``F_eta = (-rho)^eta [Psi_eta + eta (1 - eta) (-rho)^{-2} d rho dbar rho]``.
    """
    return HermitianForm(_psi_matrix(_parts(p, as_coords(z)), eta))


def _f_from_parts(parts: _Parts, eta: float) -> np.ndarray:
    m = parts.m
    kappa = (m**eta)[..., None, None]
    return kappa * (
        _psi_matrix(parts, eta) + (eta * (1 - eta) / m**2)[..., None, None] * _rank_one(parts.drho)
    )


def psi_interpolation_check(p: DFProblem, a: float, b: float, s: float, z) -> tuple[HermitianForm, HermitianForm]:
    """``Psi_{2s}`` against ``((b - 2s) Psi_a + (2s - a) Psi_b) / (b - a)``."""
    if a == b:
        raise ValueError("interpolation needs a != b")
    if not min(a, b) <= 2 * s <= max(a, b):
        raise ValueError("2s must lie between a and b")
    parts = _parts(p, as_coords(z))
    lhs = _psi_matrix(parts, 2 * s)
    rhs = ((b - 2 * s) * _psi_matrix(parts, a) + (2 * s - a) * _psi_matrix(parts, b)) / (b - a)
    return HermitianForm(lhs), HermitianForm(rhs)


def interpolation_margin(p: DFProblem, a: float, b: float, s: float, z, Z) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``F_{2s}(Z) >= (b-2s)(2s-a) (-rho)^{2s-2} |d rho(Z)|^2``.

    This lower bound follows from positivity of ``F`` at ``eta = a`` and ``eta = b``.
    """
    z = as_coords(z)
    Z = np.asarray(Z, dtype=complex)
    parts = _parts(p, z)
    F = HermitianForm(_f_from_parts(parts, 2 * s))
    d_rho_Z = np.einsum("...j,...j->...", Z, parts.drho)
    rhs = (b - 2 * s) * (2 * s - a) * parts.m ** (2 * s - 2) * np.abs(d_rho_Z) ** 2
    return np.real(F(Z)), rhs


# ---------------------------------------------------------------- margins and sweeps


def _pointwise_b(F: np.ndarray, drho: np.ndarray, c: np.ndarray, psd_tol: float) -> np.ndarray:
    """Largest ``B`` with ``F >= B c d rho dbar rho`` pointwise (``inf`` where unconstrained)."""
    H = 0.5 * (F + np.conj(np.swapaxes(F, -1, -2)))
    lam, V = np.linalg.eigh(H)
    if np.any(lam[..., 0] < -psd_tol):
        raise CheckFailure("curvature form is not positive semidefinite at some sample")
    # with x = conj(Z): F(Z, Zbar) = x^H H x and |d rho(Z)|^2 = |v^H x|^2 for v = d rho,
    # so the minimum ratio is 1 / (v^H H^+ v) unless v meets the kernel of H
    v = drho
    proj = np.abs(np.einsum("...ji,...j->...i", np.conj(V), v)) ** 2
    scale = np.maximum(np.max(np.abs(lam), axis=-1, keepdims=True), 1.0)
    ker = lam <= KERNEL_RTOL * scale
    vnorm = np.sum(np.abs(v) ** 2, axis=-1)
    in_kernel = np.any(ker & (proj > KERNEL_RTOL * vnorm[..., None]), axis=-1)
    inv = np.sum(np.where(ker, 0.0, proj / np.where(ker, 1.0, lam)), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(inv > 0, 1.0 / (inv * c), np.inf)
    b = np.where(in_kernel, 0.0, b)
    return np.where(vnorm <= DEGENERATE_GRAD2, np.inf, b)


def b_margin_pointwise(p: DFProblem, z, psd_tol: float | None = None) -> np.ndarray:
    """Per-point margin ``B(z)`` for ``F >= B eta^2 (-rho)^{eta-2} d rho dbar rho``."""
    z = as_coords(z)
    tol = p.default_psd_tol if psd_tol is None else psd_tol
    parts = _parts(p, z)
    F = _f_from_parts(parts, p.eta)
    c = p.eta**2 * parts.m ** (p.eta - 2)
    return _pointwise_b(F, parts.drho, c, tol)


def b_margin(p: DFProblem, sample: DomainSample, psd_tol: float | None = None) -> float:
    """Infimum over samples of the pointwise margin; ``inf`` when nothing constrains it."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return float(np.min(b_margin_pointwise(p, sample.points, psd_tol)))


def _min_eigs(parts: _Parts, eta: float) -> np.ndarray:
    F = _f_from_parts(parts, eta)
    return np.linalg.eigvalsh(0.5 * (F + np.conj(np.swapaxes(F, -1, -2))))[..., 0]


def df_sweep(
    p: DFProblem,
    sample: DomainSample,
    etas=None,
    psd_tol: float | None = None,
    margin: float = 1e-3,
    refine: bool = False,
    refine_tol: float = 1e-3,
    shell: DomainSample | None = None,
) -> DFReport:
    """Minimum eigenvalue of ``F_eta`` over the sample for each ``eta`` in the grid.

    ``eta`` passes iff the minimum is ``>= -psd_tol``. With ``refine`` the
    transition between the largest passing grid value and the next failing
    one is bisected to ``refine_tol``. The optional ``shell`` sample is
    evaluated for information only.
    """
    if len(sample) == 0:
        raise ValueError("empty sample")
    etas = [round(0.05 * i, 10) for i in range(21)] if etas is None else [float(e) for e in etas]
    if any(not 0 <= e <= 1 for e in etas):
        raise ValueError("eta grid must lie in [0, 1]")
    tol = p.default_psd_tol if psd_tol is None else psd_tol
    z = sample.points
    parts = _parts(p, z)
    if np.any(parts.m < margin):
        raise DomainError("sample points must satisfy rho <= -margin")

    rep = DFReport(etas=etas, min_eigs=[], worst_points=[], passes=[], b_estimates=[], psd_tol=tol)
    for eta in etas:
        mins = _min_eigs(parts, eta)
        i = int(np.argmin(mins))
        ok = bool(mins[i] >= -tol)
        rep.min_eigs.append(float(mins[i]))
        rep.worst_points.append([complex(c) for c in z[i]])
        rep.passes.append(ok)
        if ok:
            F = _f_from_parts(parts, eta)
            c = eta**2 * parts.m ** (eta - 2)
            rep.b_estimates.append(float(np.min(_pointwise_b(F, parts.drho, c, tol))))
        else:
            rep.b_estimates.append(float("nan"))

    if refine:
        rep.refined_eta = _refine(parts, etas, rep.passes, tol, refine_tol)
    if shell is not None and len(shell):
        sparts = _parts(p, shell.points)
        rep.shell_min_eigs = [float(np.min(_min_eigs(sparts, eta))) for eta in etas]
    return rep


def _refine(parts: _Parts, etas: list, passes: list, tol: float, step: float) -> float | None:
    order = np.argsort(etas)
    lo = hi = None
    for i in order:
        if passes[i]:
            lo = etas[i]
        elif lo is not None:
            hi = etas[i]
            break
    if lo is None:
        return None
    if hi is None:
        return lo
    while hi - lo > step:
        mid = 0.5 * (lo + hi)
        if np.min(_min_eigs(parts, mid)) >= -tol:
            lo = mid
        else:
            hi = mid
    return lo
