"""Fixed-point closure s = sqrt(-alpha(s)) and the dispersion curve lambda(k)."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .assembly import Grid1D, assemble
from .eigensolver import STABLE_TOL, alpha_below, min_eig
from .profile import sup_buoyancy_ratio

UNSTABLE = "unstable"
STABLE = "stable"
FAILED = "failed"

_SEED_FACTOR = 1e-6
_SEED_HALVINGS = 8
_CHOLESKY_WIDTH = 1e-7
_FRAK_S_CAP = 1e6


@dataclass(frozen=True, eq=False)
class GrowthResult:
    k: float
    status: str
    lam: float = math.nan
    s_star: float = math.nan
    alpha_at_s_star: float = math.nan
    psi: np.ndarray | None = field(default=None, repr=False)  # full nodal vector
    fixed_point_residual: float = math.nan
    eigen_residual: float = math.nan
    bracket_used: tuple = ()
    message: str = ""

    @property
    def unstable(self):
        return self.status == UNSTABLE


@dataclass(frozen=True)
class Physics:
    mu: float
    g: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("physics.mu must be positive")
        if not self.g > 0:
            raise ValueError("physics.g must be positive")


def _G_from_alpha(s, alpha):
    return s - math.sqrt(max(-alpha, 0.0))


def growth_rate(p, grid, k, physics, tol=1e-10, ratio=None):
    """Growth rate lambda(k) as the fixed point s = sqrt(-alpha(s)).

    G(s) = s - sqrt(max(-alpha(s), 0)) is nondecreasing, so bisection is
    safe. The bracket is first narrowed with inertia tests
    (G(s) < 0 iff A(s) + s^2 B is indefinite) and then finished with
    eigen-solves so that |G| <= tol on the returned point.
    """
    if ratio is None:
        ratio = sup_buoyancy_ratio(p)
    forms = assemble(p, grid, k, physics.mu, physics.g, buoyancy_ratio=ratio)
    bound = math.sqrt(physics.g * ratio)
    s_hi = bound + 1.0
    if bound == 0.0:
        return GrowthResult(k=float(k), status=STABLE, bracket_used=(0.0, s_hi),
                            message="no positive buoyancy ratio")
    s_lo = _SEED_FACTOR * bound
    for _ in range(_SEED_HALVINGS + 1):
        if alpha_below(forms, s_lo, -STABLE_TOL):
            break
        s_lo *= 0.5
    else:
        return GrowthResult(k=float(k), status=STABLE, bracket_used=(s_lo, s_hi),
                            message="alpha(s) >= 0 at every probed s")
    bracket = (s_lo, s_hi)

    def G_negative(s):
        return alpha_below(forms, s, -s * s)

    lo, hi = s_lo, s_hi
    shrink = 0
    while not G_negative(lo):
        # fixed point lies below the seed: slide the bracket down
        hi, lo = lo, 0.5 * lo
        shrink += 1
        if shrink > 200:
            return GrowthResult(k=float(k), status=FAILED, bracket_used=bracket,
                                message="could not bracket the fixed point from below")
    if G_negative(hi):
        return GrowthResult(k=float(k), status=FAILED, bracket_used=bracket,
                            message="G(s_hi) < 0 contradicts the buoyancy bound")
    while hi - lo > _CHOLESKY_WIDTH * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if G_negative(mid):
            lo = mid
        else:
            hi = mid

    # eigen-solve finish; widen by the Cholesky resolution if the endpoints
    # disagree with the accurate G
    cache = {}
    guess = [None]

    def G(s):
        if s not in cache:
            res = min_eig(forms, s, guess=guess[0])
            guess[0] = res.psi
            cache[s] = (_G_from_alpha(s, res.alpha), res)
        return cache[s][0]

    width = hi - lo
    for _ in range(60):
        if G(lo) < 0:
            break
        lo = max(lo - width, 0.5 * lo)
        width *= 2
    for _ in range(60):
        if G(hi) > 0:
            break
        hi = hi + width
        width *= 2
    best = lo if abs(G(lo)) <= abs(G(hi)) else hi
    while abs(G(best)) > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = G(mid)
        if gm < 0:
            lo = mid
        else:
            hi = mid
        if abs(gm) < abs(G(best)):
            best = mid
    g_best, res = cache[best]
    lam = math.sqrt(max(-res.alpha, 0.0))
    status = UNSTABLE if lam > 0 else STABLE
    return GrowthResult(k=float(k), status=status, lam=best, s_star=best,
                        alpha_at_s_star=res.alpha, psi=grid.expand(res.psi),
                        fixed_point_residual=abs(g_best),
                        eigen_residual=res.residual_norm, bracket_used=bracket)


def estimate_frak_S(p, grid, k, physics, ratio=None, rel_tol=1e-12):
    """Sign change of alpha(s): sup{s : alpha < 0 on (0, s)}.

    Returns 0.0 when alpha is never negative and ``math.inf`` when alpha is
    still negative at the cap.
    """
    if ratio is None:
        ratio = sup_buoyancy_ratio(p)
    forms = assemble(p, grid, k, physics.mu, physics.g, buoyancy_ratio=ratio)
    bound = math.sqrt(physics.g * ratio)
    if bound == 0.0:
        return 0.0
    lo = _SEED_FACTOR * bound
    for _ in range(_SEED_HALVINGS + 1):
        if alpha_below(forms, lo, -STABLE_TOL):
            break
        lo *= 0.5
    else:
        return 0.0
    hi = max(2 * lo, bound + 1.0)
    while alpha_below(forms, hi, -STABLE_TOL):
        lo, hi = hi, 2 * hi
        if hi > _FRAK_S_CAP:
            return math.inf
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if alpha_below(forms, mid, -STABLE_TOL):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _growth_task(args):
    p, grid, k, physics, tol, ratio = args
    try:
        return growth_rate(p, grid, k, physics, tol=tol, ratio=ratio)
    except Exception as exc:  # keep the sweep alive; the row carries the failure
        return GrowthResult(k=float(k), status=FAILED, message=f"{type(exc).__name__}: {exc}")


def map_growth(p, grid, ks, physics, tol=1e-10, jobs=1, ratio=None):
    """growth_rate over ``ks``; results in input order regardless of ``jobs``."""
    if ratio is None:
        ratio = sup_buoyancy_ratio(p)
    tasks = [(p, grid, float(k), physics, tol, ratio) for k in ks]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_growth_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [_growth_task(t) for t in tasks]


@dataclass(eq=False)
class DispersionCurve:
    results: list
    g: float
    ratio: float

    @property
    def k(self):
        return np.array([r.k for r in self.results])

    @property
    def lam(self):
        return np.array([r.lam if r.unstable else np.nan for r in self.results])

    @property
    def Lambda(self):
        vals = [r.lam for r in self.results if r.unstable]
        return max(vals) if vals else None

    def lambda0(self, R1, R2):
        vals = [r.lam for r in self.results if R1 <= r.k <= R2 and r.unstable]
        return min(vals) if vals else None

    @property
    def sup_bound(self):
        return math.sqrt(self.g * self.ratio)

    def bound_checks(self):
        """Per-bound booleans over every unstable row."""
        ok_pos = ok_2gk = ok_sup = True
        for r in self.results:
            if not r.unstable:
                continue
            ok_pos &= r.lam > 0
            ok_2gk &= r.lam ** 2 <= 2 * self.g * r.k
            ok_sup &= r.lam <= self.sup_bound
        band_ok = True
        L = self.Lambda
        if L is not None:
            band_ok = all(r.lam <= L for r in self.results if r.unstable)
        return {"lambda_positive": bool(ok_pos), "lambda_sq_le_2gk": bool(ok_2gk),
                "lambda_le_sup_bound": bool(ok_sup), "lambda0_le_Lambda": bool(band_ok)}

    def max_adjacent_jump(self):
        lam = self.lam
        d = np.abs(np.diff(lam))
        d = d[np.isfinite(d)]
        return float(d.max()) if d.size else 0.0

    @property
    def failures(self):
        return [r for r in self.results if r.status == FAILED]


def sweep(p, grid, k_list, physics, tol=1e-10, jobs=1):
    k_list = np.asarray(k_list, dtype=float)
    if k_list.ndim != 1 or k_list.size == 0:
        raise ValueError("k_list must be a non-empty 1-D sequence")
    if np.any(k_list <= 0) or np.any(np.diff(k_list) <= 0):
        raise ValueError("k_list must be positive and strictly increasing")
    ratio = sup_buoyancy_ratio(p)
    results = map_growth(p, grid, k_list, physics, tol=tol, jobs=jobs, ratio=ratio)
    return DispersionCurve(results=results, g=physics.g, ratio=ratio)


def k_grid(k_min=1e-2, k_max=1e2, n_k=64, spacing="log"):
    if spacing == "log":
        return np.geomspace(k_min, k_max, n_k)
    if spacing == "linear":
        return np.linspace(k_min, k_max, n_k)
    raise ValueError("spacing must be 'log' or 'linear'")


def _lam_at(p, grid, physics, ratio, tol):
    def f(k):
        r = growth_rate(p, grid, k, physics, tol=tol, ratio=ratio)
        return r.lam if r.unstable else 0.0
    return f


def refine_peak(curve, p, grid, physics, tol=1e-10):
    """Maximize lambda(k) around the best sweep point. Returns (k_peak, Lambda)."""
    lam = curve.lam
    if not np.any(np.isfinite(lam)):
        return None, None
    i = int(np.nanargmax(lam))
    ks = curve.k
    lo = ks[max(i - 1, 0)]
    hi = ks[min(i + 1, len(ks) - 1)]
    f = _lam_at(p, grid, physics, curve.ratio, tol)
    if lo == hi:
        return float(ks[i]), float(lam[i])
    res = minimize_scalar(lambda lk: -f(math.exp(lk)), bounds=(math.log(lo), math.log(hi)),
                          method="bounded", options={"xatol": 1e-6})
    k_best, lam_best = math.exp(res.x), -float(res.fun)
    if lam_best < lam[i]:
        return float(ks[i]), float(lam[i])
    return k_best, lam_best


def half_rate_band(curve, p, grid, physics, tol=1e-10, peak=None, fraction=0.5):
    """Band [R1, R2] around the peak on which lambda >= fraction * Lambda,
    with lambda(R1) = lambda(R2) = fraction * Lambda.

    Uses the refined peak unless ``peak`` = (k_peak, Lambda) is supplied.
    Returns (R1, R2, Lambda) or None if the sweep does not straddle the level.
    """
    if peak is None:
        peak = refine_peak(curve, p, grid, physics, tol=tol)
    k_peak, Lam = peak
    if Lam is None:
        return None
    level = fraction * Lam
    f = _lam_at(p, grid, physics, curve.ratio, tol)
    ks, lam = curve.k, np.nan_to_num(curve.lam, nan=0.0)
    left = [kk for kk, ll in zip(ks, lam) if kk < k_peak and ll < level]
    right = [kk for kk, ll in zip(ks, lam) if kk > k_peak and ll < level]
    if not left or not right:
        return None
    a = max(left)
    b = min(right)
    # nearest sweep points inside the level set on each side
    R1 = brentq(lambda kk: f(kk) - level, a, k_peak, xtol=1e-12, rtol=1e-12)
    R2 = brentq(lambda kk: f(kk) - level, k_peak, b, xtol=1e-12, rtol=1e-12)
    return R1, R2, Lam
