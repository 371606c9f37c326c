"""End-to-end acceptance suite: one test and one printed PASS/FAIL line per criterion.

Each criterion runs the shipped configs in ``configs/`` (or the library at the
stated parameters), checks the stated tolerances and runtime budget, and
prints its line before asserting so failures are still reported.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from hermitian_bergman import cli
from hermitian_bergman.experiments import run_config

CONFIGS = Path(__file__).parents[1] / "configs"

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, elapsed: float, budget: float, detail: str):
        within = elapsed < budget
        line = (f"ACCEPTANCE {number:>2} {'PASS' if ok and within else 'FAIL'}  {title}  "
                f"[{elapsed:.1f} s / {budget:.0f} s]  {detail}")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line

    return emit


def _checks(rep, prefix=""):
    return {c.name: c for c in rep.checks if c.name.startswith(prefix)}


def _run(*names):
    t0 = time.perf_counter()
    reps = [run_config(CONFIGS / n) for n in names]
    return reps, time.perf_counter() - t0


def test_criterion_01_hopf_closed_forms(verdict):
    reps, dt = _run("hopf_n2.yaml", "hopf_n3.yaml")
    worst = {}
    for rep in reps:
        assert rep.config["points"] == 100
        for name, c in _checks(rep, "hopf/").items():
            assert c.tol == 1e-6
            worst[name] = max(worst.get(name, 0.0), c.value)
    ok = all(v <= 1e-6 for v in worst.values()) and len(worst) == 6
    verdict(1, "Hopf closed forms, n=2,3, 100 points", ok, dt, 10,
            f"max entrywise={max(worst.values()):.1e}")


def test_criterion_02_kahler_torsion(verdict):
    reps, dt = _run("euclidean.yaml", "fubini_study.yaml")
    tors = max(_checks(r)["kahler/torsion_max"].value for r in reps)
    pos = _checks(reps[1])["fubini-study/curvature_min_eig"]
    ok = tors <= 1e-8 and pos.passed and pos.value > 0 and all(r.config["points"] == 100 for r in reps)
    verdict(2, "Kahler torsion vanishing, FS curvature positive", ok, dt, 10,
            f"max |T|={tors:.1e}, FS min eig={pos.value:.3f}")


def test_criterion_03_kahler_differential(verdict):
    reps, dt = _run("hopf_n2.yaml")
    c = _checks(reps[0])["kahler_form/d_omega_vs_tau_omega"]
    ok = c.passed and c.value <= 1e-5 and reps[0].config["differential_points"] == 20 \
        and reps[0].config["fd_step"] == 1e-4
    verdict(3, "d omega = tau omega on Hopf, 20 points, h=1e-4", ok, dt, 10, f"max coeff gap={c.value:.1e}")


def test_criterion_04_commutator(verdict):
    reps, dt = _run("euclidean.yaml", "hopf_n2.yaml")
    vals = [c.value for r in reps for c in r.checks if c.name.startswith("commutator/")]
    ok = len(vals) == 6 and max(vals) <= 1e-4 and all(r.config["commutator_points"] == 20 for r in reps)
    verdict(4, "commutator identity, {Euclidean, Hopf} x 3 weights", ok, dt, 30, f"max |lhs-rhs|={max(vals):.1e}")


def test_criterion_05_bkmkh(verdict):
    reps, dt = _run("bkmkh_euclidean.yaml", "bkmkh_hopf.yaml")
    finals = [_checks(r)["final_relative_residual"] for r in reps]
    steps = [_checks(r)["residual_step_ratio_max"] for r in reps]
    ok = all(f.passed for f in finals) and all(s.value < 1 for s in steps) \
        and all(r.config["resolutions"] == [16, 32, 48] for r in reps)
    verdict(5, "twisted identity residual decreasing over 16,32,48", ok, dt, 600,
            "final relative=" + ", ".join(f"{f.value:.1e}" for f in finals))


def test_criterion_06_product_sweep(verdict):
    reps, dt = _run("product_df_n2.yaml", "product_df_n3.yaml")
    mins = [c for r in reps for c in r.checks if c.name.endswith("/min_eig") and c.gating]
    etas = [e for r in reps for e in r.config["etas"]]
    ok = len(mins) == 42 and all(c.passed for c in mins) and etas == [round(0.05 * i, 10) for i in range(21)] * 2
    verdict(6, "product domain passes every eta in 0..1 step 0.05, n=2,3", ok, dt, 120,
            f"worst min eig={min(c.value for c in mins):.1e}")


def test_criterion_07_interpolation(verdict):
    t0 = time.perf_counter()
    rep = run_config({"kind": "df-sweep", "domain": {"name": "product", "params": {"n": 2, "shell_points": 0}},
                      "etas": [0.0, 1.0], "interpolation": {"instances": 100, "samples": 100, "tol": 1e-12}})
    dt = time.perf_counter() - t0
    c = _checks(rep, "interpolation/")
    ok = c["interpolation/identity"].value <= 1e-12 and c["interpolation/inequality"].passed \
        and c["interpolation/inequality_with_shift"].passed
    verdict(7, "interpolation identity and derived inequality", ok, dt, 30,
            f"identity defect={c['interpolation/identity'].value:.1e}, "
            f"min margin={c['interpolation/inequality'].value:.2e}")


def test_criterion_08_twisted_solution(verdict):
    reps, dt = _run("twisted_disc.yaml", "twisted_square.yaml")
    res = [c for r in reps for c in r.checks if c.name.endswith("/residual")]
    ratios = [c for r in reps for c in r.checks if c.name.endswith("/norm_ratio")]
    ok = len(res) == 4 and all(c.value <= 1e-2 for c in res) \
        and all(c.value <= c.bound * 1.10 and c.tol == 0.1 for c in ratios)
    for c in ratios:
        s = float(c.name.split("/")[0][2:])
        assert c.bound == pytest.approx((1 + (1 - 2 * s) / (2 * s)) ** -0.5)
    verdict(8, "twisted solution, disc and square, s=0.1,0.25", ok, dt, 300,
            f"max residual={max(c.value for c in res):.1e}, "
            f"max ratio/bound={max(c.value / c.bound for c in ratios):.3f}")


def test_criterion_09_bergman_bounds(verdict):
    reps, dt = _run("bergman_disc.yaml", "bergman_square.yaml")
    ratios = [c for r in reps for c in r.checks if c.name.endswith("/max_ratio")]
    laws = [c for r in reps for c in r.checks if c.name.startswith("laws/")]
    bs = [c for r in reps for c in r.checks if c.name == "boas_straube"]
    ok = len(ratios) == 8 and all(c.value <= c.bound * 1.10 for c in ratios) \
        and all(c.value <= 1e-8 for c in laws) and all(c.value <= 1e-6 for c in bs) \
        and all(_checks(r)["bound_at_quarter"].passed for r in reps)
    for c in ratios:
        s = float(c.name.split("/")[0][2:])
        B = (1 - 2 * s) / (2 * s)
        assert c.bound == pytest.approx(np.sqrt(1 + B) / (np.sqrt(1 + B) - 1))
    verdict(9, "weighted Bergman bound, projection laws, factorization", ok, dt, 300,
            f"max ratio/bound={max(c.value / c.bound for c in ratios):.3f}, "
            f"laws={max(c.value for c in laws):.1e}, factorization={max(c.value for c in bs):.1e}")


def test_criterion_10_detraz(verdict):
    reps, dt = _run("detraz_square.yaml")
    c = _checks(reps[0])
    stab = c["stability/256->384"]
    growth = [v for k, v in c.items() if k.endswith("growth_exponent")]
    ok = stab.value <= 0.05 and all(g.passed for g in growth) and reps[0].config["max_power"] == 30
    verdict(10, "Detraz ratios for z^m, m<=30, square, s=1/4", ok, dt, 120,
            f"max ratio={c['res=384/max_ratio'].value:.4f}, change 256->384={stab.value:.1e}")


def test_criterion_11_determinism(verdict, tmp_path, capsys):
    t0 = time.perf_counter()
    names = ("hopf_n2.yaml", "product_df_n2.yaml", "detraz_square.yaml")
    for run in ("a", "b"):
        for n in names:
            cli.main(["run", "--config", str(CONFIGS / n), "--out", str(tmp_path / run), "--format", "csv"])
    capsys.readouterr()
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = [(tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files]
    verdict(11, "repeated runs give byte-identical CSV", len(files) == 3 and all(same), time.perf_counter() - t0,
            600, f"{sum(same)}/{len(files)} files identical")
