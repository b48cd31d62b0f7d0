"""Discrete quadratic forms for the energy E(psi, s) and the constraint J(psi).

Unknowns are the interior nodal values of psi on a truncated interval
[-L, L]. The end values are clamped (psi = psi' = 0); psi' = 0 is imposed by
a mirrored ghost node, which keeps every form symmetric pentadiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

DEFAULT_MARGIN = 10.0


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 64:
            raise ValueError("grid needs at least 64 points")
        if not self.half_width > 0:
            raise ValueError("grid half_width must be positive")

    @classmethod
    def for_profile(cls, p, n_points, margin=DEFAULT_MARGIN):
        return cls(p.support_radius + margin, n_points)

    @property
    def h(self):
        return 2.0 * self.half_width / (self.n_points - 1)

    @cached_property
    def nodes(self):
        return -self.half_width + self.h * np.arange(self.n_points)

    @cached_property
    def midpoints(self):
        x = self.nodes
        return 0.5 * (x[1:] + x[:-1])

    @cached_property
    def weights(self):
        """Trapezoid weights."""
        w = np.full(self.n_points, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def n_interior(self):
        return self.n_points - 2

    def expand(self, v):
        """Interior vector -> full nodal vector with zero ends."""
        v = np.asarray(v)
        out = np.zeros(v.shape[:-1] + (self.n_points,), dtype=v.dtype)
        out[..., 1:-1] = v
        return out

    def integrate(self, f):
        return f @ self.weights

    def validate_for(self, p):
        if self.half_width < p.support_radius:
            raise ValueError(
                f"grid half_width {self.half_width} is smaller than the profile "
                f"support radius {p.support_radius}")


def _operators(grid):
    """Sparse operators acting on interior unknowns.

    Returns (P, D1, D2): prolongation to all nodes, forward differences on
    cells, and the ghost-node second difference at all nodes.
    """
    N, n, h = grid.n_points, grid.n_interior, grid.h
    P = sp.eye(N, n, k=-1, format="csr")
    # forward difference on cell c: (psi_{c+1} - psi_c)/h, c = 0..N-2
    D1_full = sp.diags([-np.ones(N - 1), np.ones(N - 1)], [0, 1], shape=(N - 1, N)) / h
    D1 = (D1_full @ P).tocsr()
    main = -2.0 * np.ones(N)
    off = np.ones(N - 1)
    D2_full = sp.diags([off, main, off], [-1, 0, 1], shape=(N, N)).tolil()
    # mirrored ghost at each end: psi_{-1} = psi_1, psi_N = psi_{N-2}
    D2_full[0, 1] = 2.0
    D2_full[N - 1, N - 2] = 2.0
    D2 = (D2_full.tocsr() @ P).tocsr() / h ** 2
    return P, D1, D2


def _sym(M):
    M = sp.csr_matrix(M)
    return ((M + M.T) * 0.5).tocsr()


@dataclass(frozen=True, eq=False)
class QuadraticForms:
    """K (viscous, includes mu), W (lumped rho'), B (constraint) on interior
    unknowns. ``A(s) = s*K - g*k**2*W``."""

    k: float
    mu: float
    g: float
    grid: Grid1D
    K: sp.csr_matrix
    W: sp.csr_matrix
    B: sp.csr_matrix
    # factors for cancellation-free evaluation of the quadratic forms
    P: sp.csr_matrix = field(repr=False)
    D1: sp.csr_matrix = field(repr=False)
    D2: sp.csr_matrix = field(repr=False)
    rho_nodes: np.ndarray = field(repr=False)
    rho_mid: np.ndarray = field(repr=False)
    drho_nodes: np.ndarray = field(repr=False)
    buoyancy_ratio: float = 0.0

    def A(self, s):
        return (s * self.K - self.g * self.k ** 2 * self.W).tocsr()

    def viscous(self, v):
        """v^T K v as a sum of squares."""
        g = self.grid
        d1 = self.D1 @ v
        lap = self.k ** 2 * (self.P @ v) + self.D2 @ v
        return self.mu * (4 * self.k ** 2 * g.h * (d1 @ d1) + (lap * lap) @ g.weights)

    def buoyancy(self, v):
        """v^T W v."""
        pv = self.P @ v
        return (self.drho_nodes * pv * pv) @ self.grid.weights

    def constraint(self, v):
        """v^T B v."""
        g = self.grid
        pv = self.P @ v
        d1 = self.D1 @ v
        return self.k ** 2 * (self.rho_nodes * pv * pv) @ g.weights + g.h * (self.rho_mid * d1) @ d1

    def energy(self, v, s):
        return s * self.viscous(v) - self.g * self.k ** 2 * self.buoyancy(v)

    def triplets(self):
        """(name, row, col, value) rows for K, W, B; for debugging dumps."""
        rows = []
        for name, M in (("K", self.K), ("W", self.W), ("B", self.B)):
            C = M.tocoo()
            order = np.lexsort((C.col, C.row))
            for i in order:
                rows.append((name, int(C.row[i]), int(C.col[i]), float(C.data[i])))
        return rows


@lru_cache(maxsize=64)
def profile_samples(p, grid):
    """rho at nodes, rho at cell midpoints, rho' at nodes (cached per grid)."""
    return p.rho(grid.nodes), p.rho(grid.midpoints), p.drho(grid.nodes)


def assemble(p, grid, k, mu, g, buoyancy_ratio=None):
    """Assemble the forms for wavenumber ``k``."""
    if not k > 0:
        raise ValueError("wavenumber k must be positive")
    if not mu > 0 or not g > 0:
        raise ValueError("mu and g must be positive")
    grid.validate_for(p)
    P, D1, D2 = _operators(grid)
    w = grid.weights
    h = grid.h
    rho_n, rho_m, drho_n = profile_samples(p, grid)

    lap = k ** 2 * P + D2
    K = mu * (4 * k ** 2 * h * (D1.T @ D1) + lap.T @ sp.diags(w) @ lap)
    W = P.T @ sp.diags(w * drho_n) @ P
    B = k ** 2 * (P.T @ sp.diags(w * rho_n) @ P) + h * (D1.T @ sp.diags(rho_m) @ D1)
    if buoyancy_ratio is None:
        from .profile import sup_buoyancy_ratio
        buoyancy_ratio = sup_buoyancy_ratio(p)
    return QuadraticForms(k=float(k), mu=float(mu), g=float(g), grid=grid,
                          K=_sym(K), W=_sym(W), B=_sym(B), P=P, D1=D1, D2=D2,
                          rho_nodes=rho_n, rho_mid=rho_m, drho_nodes=drho_n,
                          buoyancy_ratio=float(buoyancy_ratio))


def to_banded(M, u=2):
    """Upper banded storage of a symmetric sparse matrix (LAPACK layout)."""
    M = sp.dia_matrix(M)
    n = M.shape[0]
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        diag = M.diagonal(d)
        ab[u - d, d:] = diag
    return ab
