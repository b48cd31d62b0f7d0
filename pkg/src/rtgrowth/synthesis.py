"""Real-valued growing solutions by Fourier synthesis over an annulus of
horizontal frequencies, and their Fourier-side Sobolev norms.

For each sampled frequency xi the normal mode is taken from the radial
computation at r = |xi|; horizontal amplitudes follow from
(phi, theta) = -(xi1, xi2) psi' / k^2. The fields are

    rho(t, x) = -rho'(x3) / (4 pi^2) sum_n w_n f psi e^{lam t} e^{i xi.x'}
    u(t, x)   =  1 / (4 pi^2)        sum_n w_n lam f v e^{lam t} e^{i xi.x'}
    q(t, x)   =  1 / (4 pi^2)        sum_n w_n lam f pi e^{lam t} e^{i xi.x'}

with v = (-i phi, -i theta, psi). Every node set is symmetric under
xi -> -xi, and v(-xi) = conj(v(xi)), so the sums are real up to roundoff.

Two node sets are offered. "polar": Gauss-Legendre in r times trapezoid in
angle. "lattice": the reciprocal lattice of a periodic box, for which the
physical L2 over one period equals the Fourier-side norm exactly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .dispersion import map_growth
from .modes import reconstruct
from .profile import sup_buoyancy_ratio
from .stencils import derivative

FIELDS = ("rho", "u1", "u2", "u3", "q")
NORM_TARGETS = FIELDS + ("u",)
MAX_ORDER = 4
_PLANCHEREL = 1.0 / (4.0 * math.pi ** 2)
_MAGIC = b"RTSNAP1\n"


@dataclass(frozen=True)
class BumpProfile:
    """f(r) = amplitude * exp(-1/((r - R1)(R2 - r))) on (R1, R2), zero outside."""

    R1: float
    R2: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 < self.R1 < self.R2:
            raise ValueError("bump needs 0 < R1 < R2")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError("bump amplitude must be finite and nonnegative")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r > self.R1) & (r < self.R2)
        ri = r[inside]
        out[inside] = self.amplitude * np.exp(-1.0 / ((ri - self.R1) * (self.R2 - ri)))
        return out

    @property
    def nontrivial(self):
        return self.amplitude > 0


def default_bump(R1, R2):
    return BumpProfile(float(R1), float(R2))


@dataclass(frozen=True)
class Box:
    """Horizontal periodic box [-P/2, P/2)^2 sampled at nx * ny points; the
    vertical direction reuses the 1-D grid nodes with stride ``z_stride``."""

    period: float
    nx: int = 64
    ny: int = 64
    z_stride: int = 1

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("box period must be positive")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("box needs at least 2 points per horizontal direction")
        if self.z_stride < 1:
            raise ValueError("box z_stride must be >= 1")

    @property
    def x(self):
        return -0.5 * self.period + self.period / self.nx * np.arange(self.nx)

    @property
    def y(self):
        return -0.5 * self.period + self.period / self.ny * np.arange(self.ny)

    @property
    def spacing(self):
        return 2.0 * math.pi / self.period


def z_indices(n_points, stride):
    idx = np.arange(0, n_points, stride)
    if idx[-1] != n_points - 1:
        idx = np.append(idx, n_points - 1)
    return idx


def _trapezoid_weights(z):
    dz = np.diff(z)
    w = np.zeros_like(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    return w


# -- frequency node sets ---------------------------------------------------

def polar_nodes(R1, R2, n_r=24, n_theta=32):
    """Gauss-Legendre radii in (R1, R2) times n_theta equally spaced angles.

    Returns (radii, xi1, xi2, radius index, weights) sorted by (r, angle).
    """
    if n_r < 1:
        raise ValueError("n_r must be positive")
    if n_theta < 2 or n_theta % 2:
        raise ValueError("n_theta must be even so that -xi is also a node")
    t, wt = np.polynomial.legendre.leggauss(n_r)
    radii = 0.5 * (R2 - R1) * t + 0.5 * (R2 + R1)
    wr = 0.5 * (R2 - R1) * wt
    ang = 2.0 * math.pi * np.arange(n_theta) / n_theta
    ridx = np.repeat(np.arange(n_r), n_theta)
    a = np.tile(ang, n_r)
    r = radii[ridx]
    # exact negation pairs: angle + pi via sign flip of (cos, sin)
    c, s = np.cos(a), np.sin(a)
    half = n_theta // 2
    c = c.reshape(n_r, n_theta)
    s = s.reshape(n_r, n_theta)
    c[:, half:] = -c[:, :half]
    s[:, half:] = -s[:, :half]
    xi1 = r * c.ravel()
    xi2 = r * s.ravel()
    w = (wr * radii)[ridx] * (2.0 * math.pi / n_theta)
    return radii, xi1, xi2, ridx, w


def lattice_nodes(R1, R2, box):
    """Reciprocal-lattice points of ``box`` strictly inside the annulus.

    The box must resolve every node (|a| < nx/2, |b| < ny/2) so that the
    discrete horizontal sums are exact.
    """
    d = box.spacing
    amax = int(math.ceil(R2 / d))
    if amax >= box.nx // 2 or amax >= box.ny // 2:
        raise ValueError(
            f"box with {box.nx}x{box.ny} points and period {box.period:g} cannot resolve "
            f"|xi| up to {R2:g}; increase nx/ny or shrink the period")
    a = np.arange(-amax, amax + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    n2 = (A * A + B * B).ravel()
    A, B = A.ravel(), B.ravel()
    r = d * np.sqrt(n2)
    keep = (r > R1) & (r < R2)
    A, B, n2 = A[keep], B[keep], n2[keep]
    order = np.lexsort((np.arctan2(B, A), n2))
    A, B, n2 = A[order], B[order], n2[order]
    uniq, ridx = np.unique(n2, return_inverse=True)
    radii = d * np.sqrt(uniq.astype(float))
    w = np.full(A.size, d * d)
    return radii, d * A.astype(float), d * B.astype(float), ridx, w


# -- spectral data ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralField:
    """Mode data on a symmetric set of frequency nodes.

    Radial profiles (rows = distinct radii) are stored on the snapshot
    z-nodes together with their x3-derivatives up to ``max_order``:
    ``profiles[name][j]`` is the j-th derivative, name in
    {"rho", "h", "psi", "pi"} where rho-hat = -rho' psi and h = psi'/k.
    """

    radii: np.ndarray
    lam: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    ridx: np.ndarray
    weights: np.ndarray
    f: np.ndarray
    z: np.ndarray
    z_weights: np.ndarray
    profiles: dict = field(repr=False)
    bump: BumpProfile = None
    quadrature: str = "polar"
    Lambda: float = math.nan
    max_order: int = 2
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.xi1.size

    @property
    def lambda_min(self):
        """Smallest rate over nodes carrying weight (f > 0)."""
        active = np.unique(self.ridx[self.f > 0])
        return float(self.lam[active].min()) if active.size else math.nan

    @property
    def lambda_max(self):
        active = np.unique(self.ridx[self.f > 0])
        return float(self.lam[active].max()) if active.size else math.nan

    def bounds(self):
        """(lambda_0, Lambda) used by the growth sandwich: lambda_0 = Lambda / 2
        for a half-rate band, never above the smallest node rate."""
        Lam = self.Lambda if math.isfinite(self.Lambda) else self.lambda_max
        return min(0.5 * Lam, self.lambda_min), max(Lam, self.lambda_max)


def build_spectral_field(p, grid, physics, bump, quadrature="polar", n_r=24, n_theta=32,
                         box=None, Lambda=math.nan, tol=1e-10, jobs=1, max_order=2,
                         z_stride=None):
    """Solve for lambda and psi at every distinct node radius and tabulate the
    radial profiles. Raises ValueError if a radius is not unstable."""
    if max_order < 0 or max_order > MAX_ORDER:
        raise ValueError(f"max_order must lie in [0, {MAX_ORDER}]")
    if quadrature == "polar":
        radii, xi1, xi2, ridx, w = polar_nodes(bump.R1, bump.R2, n_r, n_theta)
    elif quadrature == "lattice":
        if box is None:
            raise ValueError("lattice quadrature needs a box")
        radii, xi1, xi2, ridx, w = lattice_nodes(bump.R1, bump.R2, box)
    else:
        raise ValueError("quadrature must be 'polar' or 'lattice'")
    if xi1.size == 0:
        raise ValueError("the annulus contains no quadrature nodes")
    ratio = sup_buoyancy_ratio(p)
    results = map_growth(p, grid, radii, physics, tol=tol, jobs=jobs, ratio=ratio)
    bad = [r for r in results if not r.unstable]
    if bad:
        raise ValueError(f"no growing mode at |xi| = {bad[0].k:g} ({bad[0].status}); "
                         "the annulus must lie inside the unstable band")
    if z_stride is None:
        z_stride = box.z_stride if box is not None else 1
    zi = z_indices(grid.n_points, z_stride)
    z = grid.nodes[zi]
    h = grid.h
    drho = p.drho(grid.nodes)
    base = {"rho": [], "h": [], "psi": [], "pi": []}
    for res in results:
        m = reconstruct(res.psi, res.lam, (res.k, 0.0), p, grid, physics.mu)
        base["rho"].append(-drho * m.psi)
        base["h"].append(m.dpsi / res.k)
        base["psi"].append(m.psi)
        base["pi"].append(m.pi)
    profiles = {}
    for name, rows in base.items():
        arr = np.array(rows)
        ders = [arr]
        for j in range(1, max_order + 1):
            ders.append(derivative(arr, h, j))
        profiles[name] = [d[:, zi] for d in ders]
    lam = np.array([r.lam for r in results])
    meta = {"quadrature": quadrature, "n_nodes": int(xi1.size), "n_radii": int(radii.size),
            "R1": bump.R1, "R2": bump.R2, "z_stride": int(z_stride)}
    if quadrature == "polar":
        meta.update(n_r=int(n_r), n_theta=int(n_theta))
    else:
        meta.update(period=box.period, nx=box.nx, ny=box.ny)
    return SpectralField(radii=radii, lam=lam, xi1=xi1, xi2=xi2, ridx=ridx, weights=w,
                         f=bump(radii[ridx]), z=z, z_weights=_trapezoid_weights(z),
                         profiles=profiles, bump=bump, quadrature=quadrature,
                         Lambda=float(Lambda), max_order=int(max_order), meta=meta)


def single_mode_field(p, grid, physics, k, angle=0.0, amplitude=1.0, max_order=2):
    """Degenerate node set: one frequency and its negative, unit weights."""
    from .dispersion import growth_rate
    res = growth_rate(p, grid, k, physics)
    if not res.unstable:
        raise ValueError(f"no growing mode at k = {k:g}")
    m = reconstruct(res.psi, res.lam, (k, 0.0), p, grid, physics.mu)
    base = {"rho": -p.drho(grid.nodes) * m.psi, "h": m.dpsi / k, "psi": m.psi, "pi": m.pi}
    profiles = {name: [derivative(v[None, :], grid.h, j) if j else v[None, :]
                       for j in range(max_order + 1)] for name, v in base.items()}
    c, s = math.cos(angle), math.sin(angle)
    xi1 = np.array([k * c, -k * c])
    xi2 = np.array([k * s, -k * s])
    return SpectralField(radii=np.array([float(k)]), lam=np.array([res.lam]), xi1=xi1,
                         xi2=xi2, ridx=np.zeros(2, dtype=int), weights=np.ones(2),
                         f=np.full(2, float(amplitude)), z=grid.nodes,
                         z_weights=grid.weights, profiles=profiles, quadrature="single",
                         Lambda=float(res.lam), max_order=max_order,
                         meta={"quadrature": "single", "k": float(k)})


# -- physical snapshots ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    t: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    fields: dict = field(repr=False)   # name -> array (nz, nx, ny)
    imag_max: float = 0.0

    def __getitem__(self, name):
        return self.fields[name]

    def l2(self, name):
        """Physical L2 norm over one horizontal period and the z-nodes."""
        dx = self.x[1] - self.x[0]
        dy = self.y[1] - self.y[0]
        wz = _trapezoid_weights(self.z)
        if name == "u":
            sq = sum(self.fields[c] ** 2 for c in ("u1", "u2", "u3"))
        else:
            sq = self.fields[name] ** 2
        return math.sqrt(float(wz @ sq.sum(axis=(1, 2))) * dx * dy)

    def divergence_ratio(self):
        """||div u|| / ||grad u||: spectral differences in the periodic
        horizontal directions, second-order differences in x3. Meaningful for
        lattice node sets, whose fields are periodic on the box."""
        nx, ny = self.x.size, self.y.size
        kx = 2 * math.pi * np.fft.fftfreq(nx, self.x[1] - self.x[0])
        ky = 2 * math.pi * np.fft.fftfreq(ny, self.y[1] - self.y[0])
        g1 = np.fft.ifft(1j * kx[None, :, None] * np.fft.fft(self.fields["u1"], axis=1), axis=1).real
        g2 = np.fft.ifft(1j * ky[None, None, :] * np.fft.fft(self.fields["u2"], axis=2), axis=2).real
        g3 = np.gradient(self.fields["u3"], self.z, axis=0, edge_order=2)
        div = g1 + g2 + g3
        grad = math.sqrt(float((g1 ** 2).sum() + (g2 ** 2).sum() + (g3 ** 2).sum()))
        return 0.0 if grad == 0.0 else math.sqrt(float((div ** 2).sum())) / grad


def _coefficients(sf, t):
    """Complex z-profiles c_n(z) of every field at time t, one row per node."""
    r = sf.ridx
    k = sf.radii[r]
    lam = sf.lam[r]
    amp = _PLANCHEREL * sf.weights * sf.f * np.exp(lam * t)
    P = sf.profiles
    hr = P["h"][0][r]
    return {
        "rho": (amp[:, None] * P["rho"][0][r]).astype(complex),
        # -i phi with phi = -xi1 psi'/k^2 = -(xi1/k) h
        "u1": 1j * (amp * lam * sf.xi1 / k)[:, None] * hr,
        "u2": 1j * (amp * lam * sf.xi2 / k)[:, None] * hr,
        "u3": (amp * lam)[:, None] * P["psi"][0][r],
        "q": (amp * lam)[:, None] * P["pi"][0][r],
    }


def synthesize(sf, t, box):
    """Evaluate (rho, u, q) at time t on ``box``; returns a FieldSnapshot with
    the real parts and the relative size of the discarded imaginary parts."""
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    if sf.n_nodes == 0:
        raise ValueError("empty frequency sampling")
    x, y = box.x, box.y
    ex = np.exp(1j * np.outer(sf.xi1, x))   # (n, nx)
    ey = np.exp(1j * np.outer(sf.xi2, y))   # (n, ny)
    coeffs = _coefficients(sf, t)
    nz = sf.z.size
    out = {}
    imag = 0.0
    for name in FIELDS:
        c = coeffs[name]
        A = (c[:, :, None] * ex[:, None, :]).reshape(sf.n_nodes, nz * box.nx)
        F = (A.T @ ey).reshape(nz, box.nx, box.ny)
        re = np.ascontiguousarray(F.real)
        peak = float(np.max(np.abs(re))) if re.size else 0.0
        if peak > 0:
            imag = max(imag, float(np.max(np.abs(F.imag))) / peak)
        out[name] = re
    return FieldSnapshot(t=float(t), x=x, y=y, z=sf.z.copy(), fields=out, imag_max=imag)


# -- Fourier-side norms ----------------------------------------------------

def sobolev_norm(sf, t, order, which="u"):
    """Fourier-side H^order norm of one field at time t:

        sum_j int (1 + |xi|^2)^(order - j) || d3^j r-hat(xi, .) ||^2 dxi

    scaled by 1/(4 pi^2) so that order 0 equals the physical L2 norm.
    """
    if order < 0 or int(order) != order:
        raise ValueError("order must be a nonnegative integer")
    if order > sf.max_order:
        raise ValueError(f"order {order} exceeds the tabulated derivatives ({sf.max_order})")
    if which not in NORM_TARGETS:
        raise ValueError(f"which must be one of {NORM_TARGETS}")
    r = sf.ridx
    k = sf.radii[r]
    lam = sf.lam[r]
    base = sf.weights * sf.f ** 2 * np.exp(2.0 * lam * t)
    if which == "rho":
        parts = [("rho", np.ones_like(k))]
    elif which == "u1":
        parts = [("h", (lam * sf.xi1 / k) ** 2)]
    elif which == "u2":
        parts = [("h", (lam * sf.xi2 / k) ** 2)]
    elif which == "u3":
        parts = [("psi", lam ** 2)]
    elif which == "q":
        parts = [("pi", lam ** 2)]
    else:
        parts = [("h", lam ** 2), ("psi", lam ** 2)]
    total = np.zeros_like(k)
    for name, factor in parts:
        for j in range(order + 1):
            d = sf.profiles[name][j]
            per_radius = (d * d) @ sf.z_weights
            total += factor * per_radius[r] * (1.0 + k * k) ** (order - j)
    return math.sqrt(_PLANCHEREL * float(base @ total))


def sandwich_table(sf, times, orders, targets=NORM_TARGETS):
    """Rows (field, order, t, norm, lower, upper, ok) of the growth sandwich
    e^{lam0 t} ||.(0)|| <= ||.(t)|| <= e^{Lambda t} ||.(0)||."""
    lam0, Lam = sf.bounds()
    rows = []
    for which in targets:
        for order in orders:
            n0 = sobolev_norm(sf, 0.0, order, which)
            for t in times:
                nt = sobolev_norm(sf, t, order, which)
                lower = math.exp(lam0 * t) * n0
                upper = math.exp(Lam * t) * n0
                rows.append({"field": which, "order": int(order), "t": float(t), "norm": nt,
                             "lower": lower, "upper": upper,
                             "ok": bool(lower * (1 - 1e-6) <= nt <= upper * (1 + 1e-6))})
    return rows


# -- export ----------------------------------------------------------------

def write_snapshot(path, snap, extra_header=None):
    """Binary container: magic, uint32 header length, JSON header, then each
    field as row-major little-endian float64 of shape (nz, nx, ny)."""
    header = {
        "dims": [int(snap.z.size), int(snap.x.size), int(snap.y.size)],
        "axes": ["x3", "x1", "x2"],
        "origin": [float(snap.z[0]), float(snap.x[0]), float(snap.y[0])],
        "spacing": [float((snap.z[-1] - snap.z[0]) / max(snap.z.size - 1, 1)),
                    float(snap.x[1] - snap.x[0]), float(snap.y[1] - snap.y[0])],
        "z": [float(v) for v in snap.z],
        "t": snap.t,
        "fields": list(FIELDS),
        "dtype": "<f8",
        "imag_max": snap.imag_max,
    }
    header.update(extra_header or {})
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in FIELDS:
            fh.write(np.ascontiguousarray(snap.fields[name], dtype="<f8").tobytes())


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns (header, {name: array})."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a snapshot file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        shape = tuple(header["dims"])
        size = int(np.prod(shape))
        out = {}
        for name in header["fields"]:
            out[name] = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape)
    return header, out


def slice_rows(snap):
    """Two planar slices as row dicts: horizontal plane nearest x3 = 0 and the
    vertical plane x2 = y[ny // 2]."""
    iz = int(np.argmin(np.abs(snap.z)))
    iy = snap.y.size // 2
    horiz = []
    for i, xv in enumerate(snap.x):
        for j, yv in enumerate(snap.y):
            horiz.append([xv, yv, snap.z[iz]] + [snap.fields[n][iz, i, j] for n in FIELDS])
    vert = []
    for kz, zv in enumerate(snap.z):
        for i, xv in enumerate(snap.x):
            vert.append([xv, snap.y[iy], zv] + [snap.fields[n][kz, i, iy] for n in FIELDS])
    return horiz, vert
