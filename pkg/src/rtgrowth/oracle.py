"""Time-stepping check of the growth rate at a fixed horizontal frequency.

The linearized equations are Fourier-transformed in x' and integrated in
x3 on a staggered grid: psi (vertical velocity) and sigma (density) live on
the nodes, the horizontal amplitudes phi, theta and the pressure q on the
cell midpoints. Each step solves the implicit Stokes-like saddle system
for (velocity, pressure) with the buoyancy force taken from the previous
step, then updates the density explicitly with the new vertical velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SaddleSolveError(RuntimeError):
    """The velocity/pressure system could not be factorized."""


@dataclass(frozen=True, eq=False)
class LinearState:
    sigma: np.ndarray   # nodes
    phi_u: np.ndarray   # midpoints
    theta_u: np.ndarray  # midpoints
    psi_u: np.ndarray   # nodes, zero at both ends
    t: float = 0.0


class StaggeredSystem:
    """Discrete operators for one (profile, grid, xi, mu, g) combination."""

    def __init__(self, p, grid, xi, mu, g):
        self.grid = grid
        self.xi = (float(xi[0]), float(xi[1]))
        self.k2 = self.xi[0] ** 2 + self.xi[1] ** 2
        if self.k2 == 0.0:
            raise ValueError("xi must be nonzero")
        self.mu = float(mu)
        self.g = float(g)
        N, h = grid.n_points, grid.h
        self.N, self.h = N, h
        self.nc = N - 1          # cells / midpoints
        self.nn = N - 2          # interior nodes carrying psi
        self.rho_c = p.rho(grid.midpoints)
        self.rho_n = p.rho(grid.nodes)
        self.drho_n = p.drho(grid.nodes)

        nc, nn = self.nc, self.nn
        # midpoint Laplacian with no-slip ghost phi_{-1/2} = -phi_{1/2}
        main = -2.0 * np.ones(nc)
        main[0] = main[-1] = -3.0
        Lc = sp.diags([np.ones(nc - 1), main, np.ones(nc - 1)], [-1, 0, 1]) / h ** 2
        Ln = sp.diags([np.ones(nn - 1), -2.0 * np.ones(nn), np.ones(nn - 1)], [-1, 0, 1]) / h ** 2
        # node -> midpoint difference restricted to interior nodes
        Dn = sp.diags([-np.ones(nc), np.ones(nc)], [0, 1], shape=(nc, N)) / h
        self.Dplus = Dn.tocsr()[:, 1:-1]
        # everything below is multiplied by h (lumped mass weights)
        self.M = sp.block_diag([h * sp.diags(self.rho_c), h * sp.diags(self.rho_c),
                                h * sp.diags(self.rho_n[1:-1])]).tocsr()
        Vc = h * self.mu * (self.k2 * sp.identity(nc) - Lc)
        Vn = h * self.mu * (self.k2 * sp.identity(nn) - Ln)
        self.V = sp.block_diag([Vc, Vc, Vn]).tocsr()
        # divergence at midpoints: xi1 phi + xi2 theta + (psi_{c+1} - psi_c)/h
        self.Div = h * sp.hstack([self.xi[0] * sp.identity(nc), self.xi[1] * sp.identity(nc),
                                  self.Dplus]).tocsr()
        self._lu = {}

    # -- state helpers -------------------------------------------------
    def pack(self, s):
        return np.concatenate([s.phi_u, s.theta_u, s.psi_u[1:-1]])

    def unpack(self, u, sigma, t):
        nc = self.nc
        psi = np.zeros(self.N)
        psi[1:-1] = u[2 * nc:]
        return LinearState(sigma=sigma, phi_u=u[:nc].copy(), theta_u=u[nc:2 * nc].copy(),
                           psi_u=psi, t=t)

    def divergence(self, s):
        return (self.xi[0] * s.phi_u + self.xi[1] * s.theta_u
                + np.diff(s.psi_u) / self.h)

    def kinetic(self, s):
        u = self.pack(s)
        return 0.5 * float(u @ (self.M @ u))

    def dissipation(self, s):
        u = self.pack(s)
        return float(u @ (self.V @ u))

    def psi_norm(self, s):
        return math.sqrt(float(self.grid.integrate(s.psi_u ** 2)))

    # -- saddle solves -------------------------------------------------
    def _factor(self, key, Auu):
        if key not in self._lu:
            nq = self.nc
            Z = sp.csr_matrix((nq, nq))
            S = sp.bmat([[Auu, -self.Div.T], [-self.Div, Z]]).tocsc()
            try:
                self._lu[key] = spla.splu(S)
            except RuntimeError as exc:
                raise SaddleSolveError(f"saddle factorization failed: {exc}") from exc
        return self._lu[key]

    def solve(self, key, Auu, rhs_u):
        lu = self._factor(key, Auu)
        rhs = np.concatenate([rhs_u, np.zeros(self.nc)])
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SaddleSolveError("saddle solve produced non-finite values")
        n = rhs_u.size
        return x[:n], x[n:]

    def project(self, s):
        """Mass-weighted projection of the velocity onto the discretely
        divergence-free set."""
        u, _ = self.solve("project", self.M, self.M @ self.pack(s))
        return self.unpack(u, s.sigma.copy(), s.t)

    def step(self, s, dt):
        """One semi-implicit step: implicit viscosity and pressure, explicit
        buoyancy, then sigma <- sigma - dt * rho' * psi_new."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        u_old = self.pack(s)
        force = np.zeros_like(u_old)
        force[2 * self.nc:] = -self.h * self.g * s.sigma[1:-1]
        rhs = self.M @ u_old / dt + force
        u, _ = self.solve(("step", dt), self.M / dt + self.V, rhs)
        new = self.unpack(u, s.sigma, s.t + dt)
        sigma = s.sigma - dt * self.drho_n * new.psi_u
        return replace(new, sigma=sigma)

    def energy_residual(self, old, new):
        """Relative imbalance of the discrete energy law over one step:
        dK/dt + dissipation + g * sum(sigma psi) = 0 up to O(dt)."""
        dt = new.t - old.t
        dK = (self.kinetic(new) - self.kinetic(old)) / dt
        D = self.dissipation(new)
        work = self.g * self.h * float(old.sigma[1:-1] @ new.psi_u[1:-1])
        scale = max(abs(dK), abs(D), abs(work))
        return 0.0 if scale == 0.0 else abs(dK + D + work) / scale


def step(state, dt, p, grid, xi, mu, g):
    """Convenience wrapper building the operators for a single step."""
    return StaggeredSystem(p, grid, xi, mu, g).step(state, dt)


def state_from_mode(psi, lam, xi, p, grid):
    """Seed from a nodal eigenfunction psi with rate lam:
    horizontal velocity from the discrete divergence, sigma = -rho' psi / lam."""
    psi = np.asarray(psi, dtype=float).copy()
    psi[0] = psi[-1] = 0.0
    k2 = xi[0] ** 2 + xi[1] ** 2
    dpsi = np.diff(psi) / grid.h
    return LinearState(sigma=-p.drho(grid.nodes) * psi / lam,
                       phi_u=-xi[0] * dpsi / k2, theta_u=-xi[1] * dpsi / k2, psi_u=psi)


def random_state(system, seed=0):
    """Random velocity and density, projected to be divergence-free."""
    rng = np.random.default_rng(seed)
    N, nc = system.N, system.nc
    psi = rng.standard_normal(N)
    psi[0] = psi[-1] = 0.0
    raw = LinearState(sigma=rng.standard_normal(N) * (system.drho_n != 0),
                      phi_u=rng.standard_normal(nc), theta_u=rng.standard_normal(nc),
                      psi_u=psi)
    return system.project(raw)


@dataclass(frozen=True, eq=False)
class GrowthFit:
    rate: float
    drift: float
    dt: float
    n_steps: int
    t: np.ndarray = field(repr=False)
    log_norm: np.ndarray = field(repr=False)
    increment: np.ndarray = field(repr=False)
    max_divergence: float = 0.0
    max_energy_residual: float = 0.0


def measure_growth(p, grid, xi, mu, g, init, dt, T, system=None):
    """Integrate to time T and fit the slope of log||psi_u|| over the final
    half of the record. The state is renormalized every step, so the log
    norm is accumulated from per-step increments."""
    system = system or StaggeredSystem(p, grid, xi, mu, g)
    n = int(round(T / dt))
    if n < 2:
        raise ValueError("T must cover at least two steps")
    s = init
    norm0 = system.psi_norm(s)
    if norm0 == 0.0:
        zeros = np.zeros(n + 1)
        return GrowthFit(rate=math.nan, drift=0.0, dt=dt, n_steps=n,
                         t=dt * np.arange(n + 1), log_norm=zeros, increment=zeros[1:])
    s = _rescale(s, 1.0 / norm0)
    inc = np.empty(n)
    max_div = 0.0
    max_en = 0.0
    for i in range(n):
        new = system.step(s, dt)
        max_div = max(max_div, float(np.max(np.abs(system.divergence(new)))))
        if i % 64 == 0:
            max_en = max(max_en, system.energy_residual(s, new))
        nrm = system.psi_norm(new)
        inc[i] = math.log(nrm)
        s = _rescale(new, 1.0 / nrm)
    t = dt * np.arange(n + 1)
    log_norm = np.concatenate([[math.log(norm0)], math.log(norm0) + np.cumsum(inc)])
    half = n // 2
    slope = np.polyfit(t[half:], log_norm[half:], 1)[0]
    tail = inc[half:]
    drift = float(np.max(np.abs(tail - tail.mean())) / dt)
    return GrowthFit(rate=float(slope), drift=drift, dt=dt, n_steps=n, t=t,
                     log_norm=log_norm, increment=inc, max_divergence=max_div,
                     max_energy_residual=max_en)


def _rescale(s, c):
    return LinearState(sigma=s.sigma * c, phi_u=s.phi_u * c, theta_u=s.theta_u * c,
                       psi_u=s.psi_u * c, t=s.t)


def richardson(rate_dt, rate_half):
    """First-order extrapolation in dt."""
    return 2.0 * rate_half - rate_dt
