import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtgrowth import eigensolver as es
from rtgrowth.assembly import Grid1D, assemble
from rtgrowth.eigensolver import (EigenSolverError, lipschitz_constant, min_eig,
                                  rayleigh_quotient, upper_bound_line)
from rtgrowth.profile import ConstantProfile, sup_buoyancy_ratio

# mollified step (1, 2, 0.5), mu = 0.1, g = 1, k = 1, s = 0.05, L = 11.
# Dense generalized eigensolves at N = 512, 1024, 2048 and a three-level
# Richardson fit (a + c h^2 + d h^3), computed once and frozen here.
ALPHA_2048 = -0.16189545841415243
ALPHA_STAR = -0.16189255327910868


@pytest.fixture(scope="module")
def forms512(step, phys):
    return assemble(step, Grid1D(11.0, 512), 1.0, phys.mu, phys.g)


@pytest.fixture(scope="module")
def forms1024(step, phys):
    return assemble(step, Grid1D(11.0, 1024), 1.0, phys.mu, phys.g)


def test_banded_matches_dense(forms512):
    for s in (0.01, 0.05, 0.3, 1.0):
        a = min_eig(forms512, s, method="banded")
        b = min_eig(forms512, s, method="dense")
        assert a.alpha == pytest.approx(b.alpha, rel=1e-11, abs=1e-13)
        assert np.allclose(a.psi, b.psi, atol=1e-8)


def test_regression_alpha_star(step, phys):
    f = assemble(step, Grid1D(11.0, 2048), 1.0, phys.mu, phys.g)
    res = min_eig(f, 0.05)
    assert res.alpha < 0
    assert res.alpha == pytest.approx(ALPHA_2048, rel=1e-10)


def test_alpha_converges_to_richardson_value(step, phys):
    errs = []
    for n in (512, 1024, 2048):
        f = assemble(step, Grid1D(11.0, n), 1.0, phys.mu, phys.g)
        errs.append(abs(min_eig(f, 0.05).alpha - ALPHA_STAR))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((rates > 1.7) & (rates < 2.3)), rates


def test_result_invariants(forms1024):
    res = min_eig(forms1024, 0.05)
    assert forms1024.constraint(res.psi) == pytest.approx(1.0, rel=1e-12)
    assert res.residual_norm < 1e-10
    i = int(np.argmax(np.abs(res.psi)))
    assert res.psi[i] > 0
    assert res.unstable


def test_rayleigh_quotient_of_eigenvector(forms1024):
    res = min_eig(forms1024, 0.2)
    assert rayleigh_quotient(forms1024, 0.2, res.psi) == pytest.approx(res.alpha, rel=1e-12)
    full = forms1024.grid.expand(res.psi)
    assert rayleigh_quotient(forms1024, 0.2, full) == pytest.approx(res.alpha, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_trials_bounded_by_alpha(seed):
    from rtgrowth.profile import MollifiedStep
    p = MollifiedStep(1.0, 2.0, 0.5)
    f = _small_forms(p)
    alpha = min_eig(f, 0.1).alpha
    v = np.random.default_rng(seed).standard_normal(f.grid.n_interior)
    assert rayleigh_quotient(f, 0.1, v) >= alpha - 1e-12


_CACHE = {}


def _small_forms(p):
    if "f" not in _CACHE:
        _CACHE["f"] = assemble(p, Grid1D.for_profile(p, 256), 1.0, 0.1, 1.0)
    return _CACHE["f"]


def _best_bump(forms, s, centers, widths):
    x = forms.grid.nodes[1:-1]
    return min(rayleigh_quotient(forms, s, np.exp(-((x - c) / w) ** 2))
               for c in centers for w in widths)


def test_gaussian_bump_trials(forms1024):
    s = 0.05
    alpha = min_eig(forms1024, s).alpha
    rng = np.random.default_rng(7)
    x = forms1024.grid.nodes[1:-1]
    vals = []
    for _ in range(50):
        c = rng.uniform(-4, 4)
        w = rng.uniform(0.3, 3.0)
        vals.append(rayleigh_quotient(forms1024, s, np.exp(-((x - c) / w) ** 2)))
    assert min(vals) >= alpha
    # measured tightness of the best single bump centered on supp rho'
    best = _best_bump(forms1024, s, np.linspace(-1.5, 1.5, 13), np.linspace(0.2, 3.0, 29))
    assert alpha <= best <= 0.75 * alpha


@pytest.mark.xfail(strict=True, reason="the minimizer has exponential tails and an "
                   "off-center peak; single Gaussian bumps reach only ~77% of alpha")
def test_gaussian_bump_within_ten_percent(forms1024):
    s = 0.05
    alpha = min_eig(forms1024, s).alpha
    best = _best_bump(forms1024, s, np.linspace(-1.5, 1.5, 13), np.linspace(0.2, 3.0, 29))
    assert best <= 0.9 * alpha


def test_constant_profile_alpha_nonnegative():
    p = ConstantProfile(1.0)
    f = assemble(p, Grid1D(6.0, 256), 1.0, 0.1, 1.0, buoyancy_ratio=0.0)
    for s in (1e-4, 0.1, 2.0):
        res = min_eig(f, s)
        assert res.alpha >= 0
        assert not res.unstable


def test_alpha_lower_bound(step, forms512):
    r = sup_buoyancy_ratio(step)
    for s in (1e-6, 1e-3, 0.1, 1.0):
        assert min_eig(forms512, s).alpha >= -forms512.g * r


@pytest.mark.parametrize("k", [0.3, 1.0, 4.0])
def test_alpha_monotone_and_lipschitz(step, phys, k):
    f = assemble(step, Grid1D(11.0, 512), k, phys.mu, phys.g)
    rng = np.random.default_rng(int(10 * k))
    pairs = np.sort(rng.uniform(0.01, 1.0, size=(10, 2)), axis=1)
    K_hat = lipschitz_constant(f, pairs.ravel())
    for s1, s2 in pairs:
        a1, a2 = min_eig(f, s1).alpha, min_eig(f, s2).alpha
        assert a1 <= a2 + 1e-12
        assert abs(a2 - a1) <= K_hat * abs(s2 - s1) * (1 + 1e-9)


def test_upper_bound_line(forms512):
    c1, c2 = upper_bound_line(forms512)
    assert c1 > 0 and c2 > 0
    for s in (1e-3, 0.05, 0.3, 2.0):
        assert min_eig(forms512, s).alpha <= -c1 + s * c2 + 1e-14


def test_eigenvector_decays_at_the_ends(step, phys):
    grid = Grid1D(step.support_radius + 16.0, 1400)
    res = min_eig(assemble(step, grid, 1.0, phys.mu, phys.g), 0.35)
    ends = np.abs(res.psi[[0, 1, -2, -1]])
    assert ends.max() < 1e-8 * np.abs(res.psi).max()


def test_warm_start_agrees(forms1024):
    a = min_eig(forms1024, 0.3)
    b = min_eig(forms1024, 0.31, guess=a.psi)
    c = min_eig(forms1024, 0.31)
    assert b.alpha == pytest.approx(c.alpha, rel=1e-12)


def test_failure_is_explicit(forms512, monkeypatch):
    def broken(*args, **kwargs):
        raise es.spla.ArpackNoConvergence("no convergence", [], [])
    monkeypatch.setattr(es, "_arpack", broken)
    with pytest.raises(EigenSolverError, match="no certified"):
        min_eig(forms512, 0.1, method="banded")


def test_wrong_guess_is_not_accepted(forms512):
    # a guess orthogonal-ish to the minimizer converges elsewhere; the
    # certificate must reject it and fall through to a correct solve
    true = min_eig(forms512, 0.1)
    x = forms512.grid.nodes[1:-1]
    guess = np.sin(40 * x) * np.exp(-x * x / 50)
    res = min_eig(forms512, 0.1, guess=guess)
    assert res.alpha == pytest.approx(true.alpha, rel=1e-12)


def test_input_validation(forms512):
    with pytest.raises(ValueError):
        min_eig(forms512, 0.0)
    n = forms512.grid.n_interior
    with pytest.raises(ValueError):
        rayleigh_quotient(forms512, 0.1, np.zeros(n))
    with pytest.raises(ValueError):
        rayleigh_quotient(forms512, 0.1, np.ones(n + 2))
    with pytest.raises(ValueError):
        rayleigh_quotient(forms512, 0.1, np.ones(n + 5))


def test_sign_convention_tie_break():
    v = np.array([0.0, -2.0, 1.0, 2.0])
    assert es._fix_sign(v).tolist() == [0.0, 2.0, -1.0, -2.0]
    assert math.isclose(es._fix_sign(np.array([1.0, -1.0]))[0], 1.0)
