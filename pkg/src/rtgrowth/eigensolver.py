"""Smallest eigenpair of the pencil (s*K - g*k^2*W, B).

alpha(s) = min over psi of E(psi, s)/J(psi) is the smallest eigenvalue of a
symmetric-definite banded pencil. The banded path is shift-and-invert
Lanczos (ARPACK) from a shift below the spectrum, polished by Rayleigh
quotient iteration and certified by a banded Cholesky: if
A - (alpha - delta) B is positive definite, no eigenvalue lies below
alpha - delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import to_banded

STABLE_TOL = 1e-12
DENSE_MAX_N = 1024


class EigenSolverError(RuntimeError):
    """The eigensolver failed to produce a certified smallest eigenpair."""


@dataclass(frozen=True, eq=False)
class EigenResult:
    alpha: float
    psi: np.ndarray  # interior unknowns, B-normalized
    s: float
    residual_norm: float
    iterations: int = 0
    method: str = "banded"

    @property
    def unstable(self):
        return self.alpha < -STABLE_TOL


def is_positive_definite(M):
    """Banded Cholesky test. ``M`` symmetric sparse pentadiagonal."""
    try:
        la.cholesky_banded(to_banded(M), lower=False, check_finite=False)
    except la.LinAlgError:
        return False
    return True


def alpha_below(forms, s, level):
    """True iff alpha(s) < level, decided by Sylvester inertia."""
    return not is_positive_definite(forms.A(s) - level * forms.B)


def spectrum_lower_bound(forms):
    """alpha >= -g * k^2 * max(w rho' / (k^2 w rho)) >= -g * sup(rho'/rho)."""
    ratio = np.max(np.clip(forms.drho_nodes, 0, None) / forms.rho_nodes)
    return -forms.g * ratio


def rayleigh_quotient(forms, s, trial):
    """E(trial, s) / J(trial). Accepts interior vectors or full nodal vectors
    with zero ends."""
    v = np.asarray(trial, dtype=float)
    n = forms.grid.n_interior
    if v.shape == (n + 2,):
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("trial must vanish at the clamped ends")
        v = v[1:-1]
    elif v.shape != (n,):
        raise ValueError(f"trial has shape {v.shape}, expected ({n},) or ({n + 2},)")
    if not np.any(v):
        raise ValueError("trial vector must be nonzero")
    return forms.energy(v, s) / forms.constraint(v)


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))  # argmax returns the leftmost tie
    return -v if v[i] < 0 else v


def _normalize(forms, v):
    return v / np.sqrt(forms.constraint(v))


def _residual(A, B, v, alpha):
    Bv = B @ v
    return float(np.linalg.norm(A @ v - alpha * Bv) / np.linalg.norm(Bv))


def _full_band(M, u=2):
    """General (l = u) banded storage for ``scipy.linalg.solve_banded``."""
    M = sp.dia_matrix(M)
    n = M.shape[0]
    ab = np.zeros((2 * u + 1, n))
    for d in range(-u, u + 1):
        diag = M.diagonal(d)
        if d >= 0:
            ab[u - d, d:] = diag
        else:
            ab[u - d, :n + d] = diag
    return ab


def _polish(forms, s, A, B, v, max_iter=3, tol=1e-12):
    """Rayleigh quotient iteration; returns (v, alpha, iterations)."""
    alpha = forms.energy(v, s) / forms.constraint(v)
    it = 0
    while it < max_iter and _residual(A, B, v, alpha) > tol:
        it += 1
        try:
            y = la.solve_banded((2, 2), _full_band(A - alpha * B), B @ v, check_finite=False)
        except (la.LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(y)):
            break
        v = _normalize(forms, y)
        alpha = forms.energy(v, s) / forms.constraint(v)
    return v, alpha, it


def _arpack(forms, A, B):
    sigma = spectrum_lower_bound(forms)
    sigma -= 0.05 * max(1.0, abs(sigma))
    v0 = np.ones(A.shape[0])
    vals, vecs = spla.eigsh(A.tocsc(), k=1, M=B.tocsc(), sigma=sigma, which="LM",
                            v0=v0, tol=1e-14, maxiter=5000)
    return vecs[:, 0]


def _dense(A, B):
    vals, vecs = la.eigh(A.toarray(), B.toarray(), subset_by_index=[0, 0])
    return vecs[:, 0]


def _roundoff_scale(A, B, v, alpha):
    """Size of alpha perturbations produced by O(eps) relative entry errors
    in A - alpha*B, seen through v."""
    M = abs(A - alpha * B)
    av = np.abs(v)
    return float(av @ (M @ av)) / float(v @ (B @ v))


def _certified(forms, s, A, B, v, alpha):
    delta = 1e-8 * max(1.0, abs(alpha)) + 64 * np.finfo(float).eps * _roundoff_scale(A, B, v, alpha)
    return not alpha_below(forms, s, alpha - delta)


def min_eig(forms, s, guess=None, method="auto"):
    """Smallest eigenpair of (s K - g k^2 W, B) at rate ``s``.

    ``guess`` (interior vector) warm-starts Rayleigh quotient iteration; the
    result is accepted only if the inertia certificate passes. ``method`` is
    "auto" (banded, dense fallback for small grids), "banded" or "dense".
    """
    if not s > 0:
        raise ValueError("s must be positive")
    A = forms.A(s)
    B = forms.B
    n = A.shape[0]
    attempts = []
    if method == "dense":
        attempts = ["dense"]
    else:
        if guess is not None:
            attempts.append("warm")
        attempts.append("banded")
        if method == "auto" and n <= DENSE_MAX_N:
            attempts.append("dense")
    failures = []
    for how in attempts:
        try:
            if how == "warm":
                v = np.asarray(guess, dtype=float)
            elif how == "banded":
                v = _arpack(forms, A, B)
            else:
                v = _dense(A, B)
        except (spla.ArpackNoConvergence, spla.ArpackError, la.LinAlgError) as exc:
            failures.append(f"{how}: {exc}")
            continue
        v = _normalize(forms, v)
        v, alpha, it = _polish(forms, s, A, B, v, max_iter=6 if how == "warm" else 3)
        res = _residual(A, B, v, alpha)
        if not _certified(forms, s, A, B, v, alpha):
            failures.append(f"{how}: converged to a non-minimal eigenvalue {alpha:.6g}")
            continue
        return EigenResult(alpha=float(alpha), psi=_fix_sign(v), s=float(s),
                           residual_norm=res, iterations=it,
                           method="banded" if how == "warm" else how)
    raise EigenSolverError(
        f"no certified smallest eigenpair at k={forms.k:g}, s={s:g}: " + "; ".join(failures))


def lipschitz_constant(forms, s_values):
    """K-hat = max over ``s_values`` of psi^T K psi for the B-normalized
    minimizer; bounds |alpha(s1) - alpha(s2)| / |s1 - s2| on that bracket."""
    best = 0.0
    guess = None
    for s in sorted(s_values):
        res = min_eig(forms, s, guess=guess)
        guess = res.psi
        best = max(best, float(forms.viscous(res.psi)))
    return best


def gaussian_trial(forms, center=None, width=0.5):
    """Interior samples of exp(-((x - center)/width)^2); centered on the
    largest rho' by default."""
    x = forms.grid.nodes[1:-1]
    if center is None:
        center = float(forms.grid.nodes[int(np.argmax(forms.drho_nodes))])
    return np.exp(-((x - center) / width) ** 2)


def upper_bound_line(forms, trial=None):
    """(c1, c2) with alpha(s) <= -c1 + s*c2 for every s, from one trial:
    c1 = g k^2 (v^T W v)/(v^T B v), c2 = (v^T K v)/(v^T B v)."""
    v = gaussian_trial(forms) if trial is None else np.asarray(trial, dtype=float)
    J = forms.constraint(v)
    return forms.g * forms.k ** 2 * forms.buoyancy(v) / J, forms.viscous(v) / J
