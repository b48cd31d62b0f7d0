"""Finite-difference weights and derivative helpers on uniform grids."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def fd_weights(order, offsets):
    """Weights w with sum_i w_i f(x + offsets_i h) ~ h**order f^(order)(x).

    Solves the Taylor (Vandermonde) system directly; fine for the short
    stencils used here.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.size
    V = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(V, rhs)


def derivative(v, h, order):
    """Second-order accurate ``order``-th derivative of samples ``v`` along
    the last axis.

    Centered stencils in the interior. Nodes too close to an end use a
    shifted one-sided stencil of ``order + 2`` points, which is still second
    order.
    """
    v = np.asarray(v)
    n = v.shape[-1]
    width = order + 1 if order % 2 == 0 else order + 2
    half = width // 2
    edge = order + 2
    if n < max(width, edge) + 1:
        raise ValueError("grid too short for the requested derivative")
    out = np.empty(v.shape, dtype=np.result_type(v, float))
    w = fd_weights(order, tuple(range(-half, half + 1)))
    m = n - 2 * half
    acc = w[0] * v[..., 0:m]
    for i in range(1, width):
        acc = acc + w[i] * v[..., i:i + m]
    out[..., half:n - half] = acc
    left = v[..., :edge]
    right = v[..., n - edge:]
    for j in range(half):
        out[..., j] = left @ fd_weights(order, tuple(range(-j, edge - j)))
        out[..., n - 1 - j] = right @ fd_weights(order, tuple(range(j - edge + 1, j + 1)))
    return out / h ** order
