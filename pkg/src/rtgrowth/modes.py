"""Full normal mode (phi, theta, psi, pi) for a horizontal frequency xi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stencils import derivative


@dataclass(frozen=True, eq=False)
class GrowingMode:
    xi: tuple
    lam: float
    mu: float
    x: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    dpsi: np.ndarray = field(repr=False)
    d2psi: np.ndarray = field(repr=False)
    d3psi: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @property
    def k(self):
        return math.hypot(*self.xi)

    @property
    def h(self):
        return self.x[1] - self.x[0]

    def divergence(self):
        """xi1*phi + xi2*theta + psi' at every node."""
        return self.xi[0] * self.phi + self.xi[1] * self.theta + self.dpsi


def reconstruct(psi, lam, xi, p, grid, mu):
    """Pressure and horizontal velocity amplitudes from psi and lambda.

    pi = [mu psi''' - (lam rho + mu k^2) psi'] / k^2 and
    (phi, theta) = -(xi1, xi2) psi' / k^2.
    """
    xi1, xi2 = float(xi[0]), float(xi[1])
    k2 = xi1 * xi1 + xi2 * xi2
    if k2 == 0.0:
        raise ValueError("xi must be nonzero")
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.n_points,):
        raise ValueError("psi must be a full nodal vector on the grid")
    h = grid.h
    d1 = derivative(psi, h, 1)
    d2 = derivative(psi, h, 2)
    d3 = derivative(psi, h, 3)
    rho = p.rho(grid.nodes)
    pi = (mu * d3 - (lam * rho + mu * k2) * d1) / k2
    phi = -xi1 * d1 / k2
    theta = -xi2 * d1 / k2
    return GrowingMode(xi=(xi1, xi2), lam=float(lam), mu=float(mu), x=grid.nodes,
                       psi=psi, dpsi=d1, d2psi=d2, d3psi=d3, pi=pi, phi=phi, theta=theta)


def rotate(mode, angle):
    """Rotate (xi, (phi, theta)) together by ``angle``; psi, pi unchanged."""
    c, s = math.cos(angle), math.sin(angle)
    xi1, xi2 = mode.xi
    return GrowingMode(xi=(c * xi1 - s * xi2, s * xi1 + c * xi2), lam=mode.lam, mu=mode.mu,
                       x=mode.x, psi=mode.psi, dpsi=mode.dpsi, d2psi=mode.d2psi,
                       d3psi=mode.d3psi, pi=mode.pi,
                       phi=c * mode.phi - s * mode.theta, theta=s * mode.phi + c * mode.theta)


def _l2(v, w):
    return math.sqrt(float((v * v) @ w))


def _relative(terms, w):
    total = sum(terms)
    scale = max(_l2(t, w) for t in terms)
    return 0.0 if scale == 0.0 else _l2(total, w) / scale


def residuals(m, p, g, skip=2):
    """Relative L2 residuals of the normal-mode system and of the fourth-order
    ODE for psi, each normalized by the largest term of its equation.

    The ``skip`` nodes at each clamped end are left out: there the truncated
    problem imposes psi' = 0, which the whole-line equations do not.
    """
    x, h, lam, mu = m.x, m.h, m.lam, m.mu
    w = np.full(x.size, h)
    w[:skip + 1] = 0.0
    w[x.size - skip - 1:] = 0.0
    w[skip] = w[x.size - skip - 1] = 0.5 * h
    xi1, xi2 = m.xi
    k2 = xi1 * xi1 + xi2 * xi2
    rho = p.rho(x)
    drho = p.drho(x)
    psi = m.psi

    def momentum(u, xi_c):
        u2 = derivative(u, h, 2)
        return [lam ** 2 * rho * u, -lam * xi_c * m.pi, lam * mu * (k2 * u - u2)]

    d4 = derivative(psi, h, 4)
    # pi' from its closed form rather than by differencing pi again
    dpi = (mu * d4 - lam * drho * m.dpsi - (lam * rho + mu * k2) * m.d2psi) / k2
    vertical = [lam ** 2 * rho * psi, lam * dpi, lam * mu * (k2 * psi - m.d2psi), -g * drho * psi]
    ode = [-lam ** 2 * k2 * rho * psi,
           lam ** 2 * derivative(rho * m.dpsi, h, 1),
           -lam * mu * k2 * k2 * psi,
           2 * lam * mu * k2 * m.d2psi,
           -lam * mu * d4,
           g * k2 * drho * psi]
    return {
        "momentum_1": _relative(momentum(m.phi, xi1), w),
        "momentum_2": _relative(momentum(m.theta, xi2), w),
        "momentum_3": _relative(vertical, w),
        "ode": _relative(ode, w),
        "divergence": float(np.max(np.abs(m.divergence()))),
    }


def h2_norm(v, h):
    """Discrete H^2 norm of nodal samples (trapezoid in x3)."""
    w = np.full(v.size, h)
    w[0] = w[-1] = 0.5 * h
    d1 = derivative(v, h, 1)
    d2 = derivative(v, h, 2)
    return math.sqrt(float((v * v + d1 * d1 + d2 * d2) @ w))


def mode_norms(m):
    """H^2 norms of psi, pi, phi, theta and the L2 norm of psi."""
    h = m.h
    w = np.full(m.x.size, h)
    w[0] = w[-1] = 0.5 * h
    return {
        "psi_H2": h2_norm(m.psi, h),
        "pi_H2": h2_norm(m.pi, h),
        "phi_H2": h2_norm(m.phi, h),
        "theta_H2": h2_norm(m.theta, h),
        "psi_L2": _l2(m.psi, w),
    }


def write_mode(path, m, report, extra=None):
    """Columnar text: x3, psi, dpsi, pi, phi, theta with a commented header."""
    header = [f"xi1 = {m.xi[0]!r}", f"xi2 = {m.xi[1]!r}", f"lambda = {m.lam!r}",
              f"mu = {m.mu!r}"]
    header += [f"residual.{k} = {v!r}" for k, v in report.items()]
    for k, v in (extra or {}).items():
        header.append(f"{k} = {v}")
    header.append("x3 psi dpsi pi phi theta")
    cols = np.column_stack([m.x, m.psi, m.dpsi, m.pi, m.phi, m.theta])
    np.savetxt(path, cols, fmt="%.17e", header="\n".join(header), comments="# ")


def read_mode(path):
    """Inverse of :func:`write_mode`; returns (header dict, columns dict)."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if " = " in body:
                key, val = body.split(" = ", 1)
                meta[key] = val
    data = np.loadtxt(path, comments="#")
    names = ["x3", "psi", "dpsi", "pi", "phi", "theta"]
    return meta, {n: data[:, i] for i, n in enumerate(names)}
