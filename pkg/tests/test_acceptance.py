"""Acceptance criteria 1 to 10, each at its stated tolerance.

Every test prints one PASS/FAIL line (visible with or without -s) before
asserting, so a full run lists the verdict of each criterion.
"""

import filecmp
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from rtgrowth import cli
from rtgrowth import oracle as orc
from rtgrowth import synthesis as syn
from rtgrowth.assembly import assemble
from rtgrowth.config import RunConfig
from rtgrowth.dispersion import (Physics, STABLE, growth_rate, half_rate_band, k_grid,
                                 refine_peak, sweep)
from rtgrowth.eigensolver import lipschitz_constant, min_eig
from rtgrowth.modes import reconstruct, residuals, rotate
from rtgrowth.profile import ConstantProfile, sup_buoyancy_ratio

EPS = np.finfo(float).eps


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def default():
    cfg = RunConfig()
    p = cli.build_profile(cfg)
    return cfg, p, cli.build_grid(cfg, p), cli.build_physics(cfg)


@pytest.fixture(scope="module")
def default_sweep(default):
    cfg, p, grid, phys = default
    ks = k_grid(1e-2, 1e2, 64, "log")
    t0 = time.perf_counter()
    curve = sweep(p, grid, ks, phys)
    elapsed = time.perf_counter() - t0
    return curve, elapsed


@pytest.fixture(scope="module")
def band(default, default_sweep):
    cfg, p, grid, phys = default
    curve, _ = default_sweep
    peak = refine_peak(curve, p, grid, phys)
    return half_rate_band(curve, p, grid, phys, peak=peak)


def test_criterion_01_fixed_point_certificate(default_sweep, report):
    curve, elapsed = default_sweep
    unstable = [r for r in curve.results if r.unstable]
    worst = max(r.fixed_point_residual for r in unstable)
    # every row must carry a certificate: a non-unstable row would have none
    ok = (len(unstable) == 64 and worst <= 1e-10 and elapsed < 30.0)
    report(1, ok, f"64 k at N=1024: {len(unstable)} certified, max |s*-sqrt(-alpha)| = "
                  f"{worst:.2e} (<= 1e-10), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_criterion_02_bound_suite(default, default_sweep, report):
    cfg, p, grid, phys = default
    curve, _ = default_sweep
    sup = math.sqrt(phys.g * sup_buoyancy_ratio(p))
    v2gk = sum(r.lam ** 2 > 2 * phys.g * r.k for r in curve.results if r.unstable)
    vsup = sum(r.lam > sup for r in curve.results if r.unstable)
    small = growth_rate(p, grid, 1e-3, phys)
    small_ok = (not small.unstable) or small.lam <= math.sqrt(2 * phys.g * 1e-3)
    ok = v2gk == 0 and vsup == 0 and small_ok
    report(2, ok, f"violations lambda^2<=2gk: {v2gk}, lambda<=sqrt(g sup): {vsup}; "
                  f"lambda(1e-3) = {small.lam:.4e} <= {math.sqrt(2e-3 * phys.g):.4e}")
    assert ok


def test_criterion_03_alpha_monotone_lipschitz(default, report):
    cfg, p, grid, phys = default
    rng = np.random.default_rng(cfg["seed"])
    worst_mono = -math.inf
    worst_ratio = 0.0
    for k in (0.3, 1.0, 4.0):
        forms = assemble(p, grid, k, phys.mu, phys.g)
        pairs = np.sort(rng.uniform(0.01, 2.0, size=(20, 2)), axis=1)
        K_hat = lipschitz_constant(forms, pairs.ravel())
        for s1, s2 in pairs:
            a1, a2 = min_eig(forms, s1).alpha, min_eig(forms, s2).alpha
            worst_mono = max(worst_mono, a1 - a2)
            worst_ratio = max(worst_ratio, abs(a2 - a1) / abs(s2 - s1) / K_hat)
    ok = worst_mono <= 1e-12 and worst_ratio <= 1.0
    report(3, ok, f"20 pairs x 3 k: max alpha(s1)-alpha(s2) = {worst_mono:.2e} (<= 1e-12), "
                  f"max |da/ds| / K-hat = {worst_ratio:.4f} (<= 1)")
    assert ok


def test_criterion_04_oracle_equality(default, report):
    cfg, p, grid, phys = default
    xi = (1.0, 0.0)
    t0 = time.perf_counter()
    res = growth_rate(p, grid, 1.0, phys)
    lam = res.lam
    system = orc.StaggeredSystem(p, grid, xi, phys.mu, phys.g)
    init = system.project(orc.state_from_mode(res.psi, lam, xi, p, grid))
    fit = orc.measure_growth(p, grid, xi, phys.mu, phys.g, init, lam / 100, 10 / lam,
                             system=system)
    half = orc.measure_growth(p, grid, xi, phys.mu, phys.g, init, lam / 200, 10 / lam,
                              system=system)
    elapsed = time.perf_counter() - t0
    extrap = orc.richardson(fit.rate, half.rate)
    e1 = abs(fit.rate - lam) / lam
    e2 = abs(extrap - lam) / lam
    ok = e1 < 0.02 and e2 < 0.005 and elapsed < 60.0
    report(4, ok, f"lambda(1) = {lam:.8f}, oracle {fit.rate:.8f} (rel {e1:.2e} < 2e-2), "
                  f"Richardson {extrap:.8f} (rel {e2:.2e} < 5e-3), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_05_ode_residual(default, report):
    cfg, p, grid, phys = default
    L = grid.half_width
    res = {}
    for n in (1024, 2048, 4096):
        g = type(grid)(L, n)
        r = growth_rate(p, g, 1.0, phys)
        m = reconstruct(r.psi, r.lam, (1.0, 0.0), p, g, phys.mu)
        res[n] = (residuals(m, p, phys.g)["ode"], g.h)
    o1 = math.log(res[1024][0] / res[2048][0]) / math.log(res[1024][1] / res[2048][1])
    o2 = math.log(res[2048][0] / res[4096][0]) / math.log(res[2048][1] / res[4096][1])
    ok = res[2048][0] < 1e-4 and abs(o1 - 2) <= 0.3 and abs(o2 - 2) <= 0.3
    report(5, ok, f"ODE residual N=2048: {res[2048][0]:.3e} (< 1e-4); observed orders "
                  f"{o1:.3f}, {o2:.3f} (2 +- 0.3)")
    assert ok


def test_criterion_06_algebraic_identities(default, report):
    cfg, p, grid, phys = default
    r = growth_rate(p, grid, 1.0, phys)
    base = reconstruct(r.psi, r.lam, (1.0, 0.0), p, grid, phys.mu)
    worst_div = 0.0
    for xi in ((1.0, 0.0), (0.6, 0.8), (-0.28, 0.96)):
        m = reconstruct(r.psi, r.lam, xi, p, grid, phys.mu)
        worst_div = max(worst_div, float(np.max(np.abs(m.divergence()))
                                         / np.max(np.abs(m.dpsi))))
    worst_rot = 0.0
    for angle in (math.pi / 2, math.pi):
        c, s = round(math.cos(angle)), round(math.sin(angle))
        direct = reconstruct(r.psi, r.lam, (float(c), float(s)), p, grid, phys.mu)
        rot = rotate(base, angle)
        for name in ("psi", "pi", "phi", "theta"):
            worst_rot = max(worst_rot, float(np.max(np.abs(getattr(direct, name)
                                                           - getattr(rot, name)))))
    xi = (0.6, 0.8)
    m = reconstruct(r.psi, r.lam, xi, p, grid, phys.mu)
    m1 = reconstruct(r.psi, r.lam, (-xi[0], xi[1]), p, grid, phys.mu)
    m2 = reconstruct(r.psi, r.lam, (xi[0], -xi[1]), p, grid, phys.mu)
    parity = max(np.max(np.abs(m1.phi + m.phi)), np.max(np.abs(m1.theta - m.theta)),
                 np.max(np.abs(m2.phi - m.phi)), np.max(np.abs(m2.theta + m.theta)),
                 np.max(np.abs(m1.psi - m.psi)), np.max(np.abs(m2.psi - m.psi)),
                 np.max(np.abs(m1.pi - m.pi)), np.max(np.abs(m2.pi - m.pi)))
    ok = worst_div <= 4 * EPS and worst_rot <= 1e-12 and parity <= 1e-12
    report(6, ok, f"divergence {worst_div:.2e} (<= 4 eps relative), rotation 90/180 "
                  f"{worst_rot:.2e}, parity {parity:.2e} (<= 1e-12)")
    assert ok


def test_criterion_07_sandwich(default, band, report):
    cfg, p, grid, phys = default
    R1, R2, Lam = band
    sf = syn.build_spectral_field(p, grid, phys, syn.default_bump(R1, R2), quadrature="polar",
                                  n_r=24, n_theta=32, Lambda=Lam, max_order=2)
    lam0, Lam_used = sf.bounds()
    rows = syn.sandwich_table(sf, [0.5, 1.0, 2.0], [0, 1, 2])
    bad = [r for r in rows if not r["ok"]]
    u3 = syn.sobolev_norm(sf, 0.0, 0, "u3")
    ok = not bad and u3 > 0 and lam0 == pytest.approx(Lam / 2, rel=1e-12)
    report(7, ok, f"band [{R1:.4f}, {R2:.4f}], lambda0 = {lam0:.6f} = Lambda/2, "
                  f"{len(rows) - len(bad)}/{len(rows)} sandwich rows hold, "
                  f"||u3(0)|| = {u3:.3e} > 0")
    assert ok


def test_criterion_08_parseval(default, band, report):
    cfg, p, grid, phys = default
    R1, R2, Lam = band
    box = syn.Box(period=2 * math.pi / max(R1, R2 / 12), nx=64, ny=64, z_stride=8)
    sf = syn.build_spectral_field(p, grid, phys, syn.default_bump(R1, R2),
                                  quadrature="lattice", box=box, Lambda=Lam, max_order=0)
    worst = 0.0
    for t in (0.0, 1.0, 2.0):
        snap = syn.synthesize(sf, t, box)
        for name in ("rho", "u1", "u2", "u3", "q", "u"):
            four = syn.sobolev_norm(sf, t, 0, name)
            worst = max(worst, abs(snap.l2(name) - four) / four)
    ok = worst < 1e-6
    report(8, ok, f"{sf.n_nodes} lattice nodes, max |physical L2 - Fourier H0| / H0 = "
                  f"{worst:.2e} (< 1e-6)")
    assert ok


def test_criterion_09_stability_degeneracies(default, default_sweep, report):
    cfg, p, grid, phys = default
    curve, _ = default_sweep
    ks = curve.k
    const = sweep(ConstantProfile(1.0), grid, ks, phys)
    false_unstable = sum(r.status != STABLE for r in const.results)
    viscous = sweep(p, grid, ks, Physics(10 * phys.mu, phys.g))
    increases = 0
    for a, b in zip(curve.results, viscous.results):
        if b.unstable and (not a.unstable or b.lam > a.lam):
            increases += 1
    ok = false_unstable == 0 and increases == 0
    report(9, ok, f"constant profile: {false_unstable} non-stable of {len(ks)} k; "
                  f"mu x10: {increases} increases of lambda")
    assert ok


def _run_cli(out, jobs):
    env = dict(os.environ)
    for cmd in ("profile-check", "dispersion", "mode", "verify", "synthesize"):
        d = os.path.join(out, cmd)
        proc = subprocess.run([sys.executable, "-m", "rtgrowth", cmd, "--out", d,
                               "--jobs", str(jobs)], capture_output=True, text=True, env=env)
        assert proc.returncode == 0, proc.stderr


def _tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False, cmp.left_only + cmp.right_only
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False, mismatch + errors
    for sub in cmp.common_dirs:
        ok, diff = _tree_equal(os.path.join(a, sub), os.path.join(b, sub))
        if not ok:
            return ok, diff
    return True, []


def _count_files(d):
    return sum(len(files) for _, _, files in os.walk(d))


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path, report):
    a, b = str(tmp_path / "jobs1"), str(tmp_path / "jobs2")
    _run_cli(a, 1)
    _run_cli(b, 2)
    ok, diff = _tree_equal(a, b)
    report(10, ok, f"default config, 5 commands, --jobs 1 vs --jobs 2: "
                   f"{_count_files(a)} files, differing: {diff or 'none'}")
    assert ok
