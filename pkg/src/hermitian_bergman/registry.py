"""Named factories that configuration files refer to.

Every registry maps a name to a callable whose keyword arguments are the
parameters a config may pass. ``resolve`` checks names and parameters without
building anything, so schema validation stays cheap.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import models
from .dfcheck import DFProblem, DomainSample
from .planar import PlanarDomain


@dataclass(frozen=True)
class DFSetup:
    """Problem, gating sample and optional informational shell for a sweep."""

    problem: DFProblem
    sample: DomainSample
    shell: DomainSample | None = None


def product_setup(n: int = 2, grid: int = 21, hopf_points: int = 50, a: float = 0.5,
                  shell_points: int = 200, seed: int = 0) -> DFSetup:
    """Square times Hopf annulus with the square's defining function."""
    shell = models.product_shell(n, shell_points, 10, seed, a) if shell_points else None
    return DFSetup(models.product_domain_assemble(n, a), models.product_sample(n, grid, hopf_points, seed, a), shell)


def ball_setup(n: int = 2, per_axis: int = 12, weight: str = "zero", seed: int = 0) -> DFSetup:
    """Euclidean unit ball with ``rho = |z|^2 - 1``."""
    if weight not in models.WEIGHTS:
        raise KeyError(weight)
    p = DFProblem(models.euclidean(n), models.WEIGHTS[weight](n), models.ball_defining(n))
    return DFSetup(p, models.ball_sample(n, per_axis))


def hopf_shifted_setup(n: int = 2, points: int = 200, offset: float = 1.0, seed: int = 0) -> DFSetup:
    """Hopf metric with ``rho = -offset - |z|^2``: fails for every positive exponent."""
    p = DFProblem(models.hopf(n), models.zero_weight(n), models.shifted_norm_defining(n, offset))
    pts = models.HopfChart(n).sample(points, np.random.default_rng(seed))
    return DFSetup(p, DomainSample(pts))


def disc(radius: float = 1.0, resolution: int = 256) -> PlanarDomain:
    return PlanarDomain.disc(radius, resolution=resolution)


def square(resolution: int = 256) -> PlanarDomain:
    return PlanarDomain.square(resolution=resolution)


def annulus(inner: float = 0.5, outer: float = 1.0, resolution: int = 256) -> PlanarDomain:
    return PlanarDomain.annulus(inner, outer, resolution=resolution)


def _one(z):
    return np.ones_like(z)


SOURCES: dict[str, Callable] = {
    "one": lambda: _one,
    "z": lambda: (lambda z: z),
    "z2": lambda: (lambda z: z**2),
    "zbar": lambda: np.conj,
    "exp": lambda: np.exp,
}

METRICS = models.METRICS
WEIGHTS = models.WEIGHTS
DF_DOMAINS = {"product": product_setup, "ball": ball_setup, "hopf-shifted": hopf_shifted_setup}
PLANAR_DOMAINS = {"disc": disc, "square": square, "annulus": annulus}

REGISTRIES = {
    "metric": METRICS,
    "weight": WEIGHTS,
    "df-domain": DF_DOMAINS,
    "planar-domain": PLANAR_DOMAINS,
    "source": SOURCES,
}


def resolve(registry: str, name: str, params: dict | None = None, supplied=()) -> Callable:
    """Return the factory for ``name`` after checking that ``params`` bind to it.

    ``supplied`` names arguments the caller adds at build time.

    Raises
    ------
    KeyError
        Unknown name, with message ``unknown registry entry``.
    TypeError
        Parameters that the factory does not accept.
    """
    table = REGISTRIES[registry]
    if name not in table:
        raise KeyError(f"unknown registry entry '{name}' in {registry} (known: {', '.join(sorted(table))})")
    factory = table[name]
    try:
        inspect.signature(factory).bind(**(params or {}), **dict.fromkeys(supplied))
    except TypeError as exc:
        raise TypeError(f"invalid parameters for {registry} '{name}': {exc}") from None
    return factory


def build(registry: str, name: str, params: dict | None = None, **extra):
    params = dict(params or {})
    factory = resolve(registry, name, params, tuple(extra))
    return factory(**params, **extra)
