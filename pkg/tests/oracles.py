"""Symbolic oracles: z and zbar are treated as independent symbols."""

import numpy as np
import sympy as sp


def symbols(n):
    z = sp.symbols(f"z1:{n + 1}")
    zb = sp.symbols(f"zb1:{n + 1}")
    return z, zb


def conj_expr(expr, z, zb):
    """Conjugate an expression built from z, zbar and real constants."""
    sub = {**{a: b for a, b in zip(z, zb)}, **{b: a for a, b in zip(z, zb)}}
    return sp.conjugate(expr).subs({sp.conjugate(s): s for s in list(z) + list(zb)}).xreplace(sub)


def evaluate(expr, z, zb, point):
    sub = {**{a: complex(p) for a, p in zip(z, point)}, **{b: complex(np.conj(p)) for b, p in zip(zb, point)}}
    return complex(sp.N(expr.subs(sub), 30))


def christoffel(G, z, zb):
    """Gamma[l][j][k] = sum_m d_j G[k, m] Ginv[m, l]."""
    n = len(z)
    Ginv = sp.simplify(G.inv())
    return [[[sum(sp.diff(G[k, m], z[j]) * Ginv[m, l] for m in range(n)) for k in range(n)]
             for j in range(n)] for l in range(n)]


def curvature_trace(G, z, zb):
    ld = sp.log(sp.simplify(G.det()))
    n = len(z)
    return sp.Matrix(n, n, lambda j, k: -sp.diff(ld, z[j], zb[k]))


def hopf_matrix(n):
    z, zb = symbols(n)
    r2 = sum(a * b for a, b in zip(z, zb))
    return sp.eye(n) / r2, z, zb


def fubini_study_matrix(n):
    z, zb = symbols(n)
    s = 1 + sum(a * b for a, b in zip(z, zb))
    return sp.Matrix(n, n, lambda j, k: sp.KroneckerDelta(j, k) / s - zb[j] * z[k] / s**2), z, zb
