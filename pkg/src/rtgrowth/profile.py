"""Steady density profiles rho(x3) and their derived constants."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

# Gauss-Legendre order for the mollifier CDF. The bump is flat to all orders at
# its endpoints, so the rule converges super-algebraically; 128 nodes reach
# roundoff on the unit interval.
_GL_ORDER = 128
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


_BUMP_MASS = float(_bump(_GL_NODES) @ _GL_WEIGHTS)


def mollifier(x, width):
    """Unit-mass bump kernel supported on (-width, width)."""
    return _bump(np.asarray(x, dtype=float) / width) / (_BUMP_MASS * width)


def mollifier_cdf(x, width):
    """Integral of :func:`mollifier` from -width to x."""
    u = np.clip(np.asarray(x, dtype=float) / width, -1.0, 1.0)
    # integrate over the shorter tail and use symmetry for the rest
    a = -np.abs(u)
    half = 0.5 * (a + 1.0)
    mid = 0.5 * (a - 1.0)
    nodes = mid[..., None] + half[..., None] * _GL_NODES
    tail = half * (_bump(nodes) @ _GL_WEIGHTS) / _BUMP_MASS
    return np.where(u <= 0.0, tail, 1.0 - tail)


class DensityProfile:
    """Base class for a steady profile.

    Subclasses provide ``_rho``/``_drho``; ``scale`` multiplies both, which
    leaves every buoyancy ratio unchanged.
    """

    kind = "abstract"

    def __init__(self, support_radius, rho_min, scale=1.0):
        self.support_radius = float(support_radius)
        self.scale = float(scale)
        self.rho_min = float(rho_min) * self.scale

    def rho(self, x):
        return self.scale * self._rho(np.asarray(x, dtype=float))

    def drho(self, x):
        return self.scale * self._drho(np.asarray(x, dtype=float))

    def scaled(self, c):
        if c <= 0:
            raise ValueError("scale factor must be positive")
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.scale = self.scale * c
        new.rho_min = self.rho_min * c
        return new

    def params(self):
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items() if k != "kind")
        return f"{type(self).__name__}({args})"

    def check(self, n=4001):
        """Sampled checks of positivity, compact support of drho, and the
        existence of a point with drho > 0. Returns a dict of booleans."""
        S = self.support_radius
        x = np.linspace(-S - 5.0, S + 5.0, n)
        r = self.rho(x)
        d = self.drho(x)
        outside = np.abs(x) > S
        return {
            "rho_positive": bool(np.all(r >= self.rho_min * (1 - 1e-12)) and self.rho_min > 0),
            "drho_compact": bool(np.all(d[outside] == 0.0)),
            "rt_unstable_somewhere": bool(np.any(d > 0.0)),
        }


class ConstantProfile(DensityProfile):
    """Homogeneous fluid; no buoyancy."""

    kind = "constant"

    def __init__(self, rho0=1.0, scale=1.0):
        if rho0 <= 0:
            raise ValueError("rho0 must be positive")
        self.rho0 = float(rho0)
        super().__init__(support_radius=0.0, rho_min=rho0, scale=scale)

    def _rho(self, x):
        return np.full_like(x, self.rho0, dtype=float)

    def _drho(self, x):
        return np.zeros_like(x, dtype=float)

    def params(self):
        return {"kind": self.kind, "rho0": self.rho0}


class MollifiedStep(DensityProfile):
    """Three-level step (light / mean / heavy, jumps at x3 = -1 and +1)
    convolved with a bump of half-width ``mollify_width``."""

    kind = "mollified_step"

    def __init__(self, rho_light, rho_heavy, mollify_width, scale=1.0):
        if not rho_light > 0:
            raise ValueError("rho_light must be positive")
        if not rho_heavy > rho_light:
            raise ValueError("rho_heavy must exceed rho_light")
        if not 0 < mollify_width < 1:
            raise ValueError("mollify_width must lie in (0, 1)")
        self.rho_light = float(rho_light)
        self.rho_heavy = float(rho_heavy)
        self.mollify_width = float(mollify_width)
        super().__init__(support_radius=1.0 + mollify_width, rho_min=rho_light, scale=scale)

    def _rho(self, x):
        jump = 0.5 * (self.rho_heavy - self.rho_light)
        eps = self.mollify_width
        return (self.rho_light
                + jump * mollifier_cdf(x + 1.0, eps)
                + jump * mollifier_cdf(x - 1.0, eps))

    def _drho(self, x):
        jump = 0.5 * (self.rho_heavy - self.rho_light)
        eps = self.mollify_width
        return jump * (mollifier(x + 1.0, eps) + mollifier(x - 1.0, eps))

    def params(self):
        return {"kind": self.kind, "rho_light": self.rho_light,
                "rho_heavy": self.rho_heavy, "mollify_width": self.mollify_width}


class TabulatedProfile(DensityProfile):
    """Cubic spline through (x3, rho) samples with zero end slopes; held
    constant outside the table."""

    kind = "tabulated"

    def __init__(self, x, rho, scale=1.0):
        x = np.asarray(x, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if x.ndim != 1 or x.shape != rho.shape or x.size < 4:
            raise ValueError("table needs matching 1-D columns with at least 4 rows")
        if np.any(np.diff(x) <= 0):
            raise ValueError("table x3 column must be strictly increasing")
        if np.any(rho <= 0):
            raise ValueError("tabulated density must be positive")
        self.x = x
        self.values = rho
        self._spline = CubicSpline(x, rho, bc_type="clamped")
        self._dspline = self._spline.derivative()
        # exact minimum of the piecewise cubic: interior critical points and knots
        crit = self._dspline.roots(extrapolate=False)
        rmin = float(min(rho.min(), np.min(self._spline(crit)) if crit.size else np.inf))
        if rmin <= 0:
            raise ValueError("spline through the table dips to non-positive density")
        super().__init__(support_radius=max(abs(x[0]), abs(x[-1])), rho_min=rmin, scale=scale)

    def _rho(self, x):
        return self._spline(np.clip(x, self.x[0], self.x[-1]))

    def _drho(self, x):
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        return np.where(inside, self._dspline(np.clip(x, self.x[0], self.x[-1])), 0.0)

    def params(self):
        return {"kind": self.kind, "table": [[float(a), float(b)] for a, b in zip(self.x, self.values)]}


def make_mollified_step(rho_light, rho_heavy, mollify_width):
    return MollifiedStep(rho_light, rho_heavy, mollify_width)


def profile_from_config(block):
    """Build a profile from a config mapping (``kind`` plus parameters)."""
    kind = block.get("kind")
    if kind == "mollified_step":
        return MollifiedStep(block["rho_light"], block["rho_heavy"], block["mollify_width"])
    if kind == "tabulated":
        table = np.asarray(block["table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ValueError("profile.table must be a list of [x3, rho] rows")
        return TabulatedProfile(table[:, 0], table[:, 1])
    if kind == "constant":
        return ConstantProfile(block.get("rho0", 1.0))
    raise ValueError(f"profile.kind must be mollified_step, tabulated or constant, got {kind!r}")


@lru_cache(maxsize=32)
def sup_buoyancy_ratio(p, n_samples=100_001):
    """sup over x3 of max(rho'/rho, 0).

    Dense sampling on [-S, S] followed by a bounded Brent refinement around
    the best sample.
    """
    S = p.support_radius
    if S == 0.0:
        return 0.0
    x = np.linspace(-S, S, n_samples)
    ratio = p.drho(x) / p.rho(x)
    i = int(np.argmax(ratio))
    best = float(ratio[i])
    if best <= 0.0:
        return 0.0
    h = x[1] - x[0]
    lo, hi = max(-S, x[i] - h), min(S, x[i] + h)

    def neg(z):
        return -float(p.drho(np.array([z]))[0] / p.rho(np.array([z]))[0])

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, S)})
    return max(best, -float(res.fun))


def buoyancy_bound(p, g):
    """Upper bound sqrt(g * sup rho'/rho) on every growth rate."""
    return math.sqrt(g * sup_buoyancy_ratio(p))
