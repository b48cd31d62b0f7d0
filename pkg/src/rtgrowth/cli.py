"""Command line interface: rtgrowth {dispersion, mode, synthesize, verify, profile-check}.

Exit codes: 0 success (stable findings included), 1 invalid config or
arguments, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import oracle as orc
from . import synthesis as syn
from .assembly import Grid1D, assemble
from .config import AUTO, ConfigError, RunConfig
from .dispersion import FAILED, Physics, growth_rate, half_rate_band, k_grid, refine_peak, sweep
from .eigensolver import EigenSolverError
from .modes import mode_norms, reconstruct, residuals, write_mode
from .outputs import write_csv, write_json
from .profile import buoyancy_bound, profile_from_config, sup_buoyancy_ratio

log = logging.getLogger("rtgrowth")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


# -- building blocks from a config ----------------------------------------

def build_profile(cfg):
    return profile_from_config(cfg["profile"])


def build_grid(cfg, p, n_override=None):
    g = cfg["grid"]
    L = p.support_radius + 10.0 if g["L"] == AUTO else float(g["L"])
    if n_override is not None:
        N = int(n_override)
    elif g["h"] is not None:
        N = int(round(2 * L / g["h"])) + 1
    else:
        N = int(g["N"])
    try:
        grid = Grid1D(L, N)
        grid.validate_for(p)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from exc
    return grid


def build_physics(cfg):
    return Physics(float(cfg["physics"]["mu"]), float(cfg["physics"]["g"]))


def _out_dir(cfg, args):
    d = args.out or cfg["output"]["directory"]
    os.makedirs(d, exist_ok=True)
    return d


def _wants(cfg, fmt):
    return fmt in cfg["output"]["formats"]


# -- dispersion -----------------------------------------------------------

def run_dispersion(cfg, jobs=1):
    """Sweep plus peak and half-rate band. Returns (curve, peak, band)."""
    p = build_profile(cfg)
    grid = build_grid(cfg, p)
    phys = build_physics(cfg)
    sw = cfg["sweep"]
    ks = k_grid(sw["k_min"], sw["k_max"], sw["n_k"], sw["spacing"])
    curve = sweep(p, grid, ks, phys, tol=sw["tol"], jobs=jobs)
    peak = band = None
    if curve.Lambda is not None:
        peak = refine_peak(curve, p, grid, phys, tol=sw["tol"])
        band = half_rate_band(curve, p, grid, phys, tol=sw["tol"], peak=peak)
    return curve, peak, band


def cmd_dispersion(cfg, args):
    curve, peak, band = run_dispersion(cfg, jobs=args.jobs)
    out = _out_dir(cfg, args)
    g = curve.g
    rows = []
    for r in curve.results:
        rows.append([r.k, r.lam if r.unstable else math.nan, r.s_star, r.alpha_at_s_star,
                     r.fixed_point_residual, math.sqrt(2 * g * r.k), curve.sup_bound, r.status])
    cols = ["k", "lambda", "s_star", "alpha", "fixed_point_residual", "bound_sqrt_2gk",
            "bound_sup_ratio", "status"]
    if _wants(cfg, "csv"):
        write_csv(os.path.join(out, "dispersion.csv"), cols, rows, cfg.hash)
    summary = {
        "n_k": len(rows),
        "Lambda": peak[1] if peak else None,
        "k_peak": peak[0] if peak else None,
        "Lambda_sweep": curve.Lambda,
        "half_rate_band": [band[0], band[1]] if band else None,
        "bounds_satisfied": curve.bound_checks(),
        "n_unstable": sum(r.unstable for r in curve.results),
        "n_failed": len(curve.failures),
        "failures": [{"k": r.k, "message": r.message} for r in curve.failures],
        "max_fixed_point_residual": max((r.fixed_point_residual for r in curve.results
                                         if r.unstable), default=None),
    }
    if _wants(cfg, "json"):
        write_json(os.path.join(out, "dispersion.json"), summary, cfg.hash)
    log.info("dispersion: %d rows, Lambda=%s", len(rows), summary["Lambda"])
    if curve.failures:
        raise NumericalFailure(f"{len(curve.failures)} wavenumbers failed")
    return EXIT_OK


# -- mode -----------------------------------------------------------------

def cmd_mode(cfg, args):
    p = build_profile(cfg)
    grid = build_grid(cfg, p)
    phys = build_physics(cfg)
    if args.xi is not None:
        xi = tuple(args.xi)
    elif args.k is not None:
        xi = (args.k, 0.0)
    elif cfg["mode"]["xi"] is not None:
        xi = tuple(cfg["mode"]["xi"])
    else:
        xi = (cfg["mode"]["k"], 0.0)
    k = math.hypot(*xi)
    if not k > 0:
        raise ConfigError("mode.xi", "must be nonzero")
    out = _out_dir(cfg, args)
    if args.dump_forms:
        forms = assemble(p, grid, k, phys.mu, phys.g)
        write_csv(os.path.join(out, "forms.txt"), ["matrix", "row", "col", "value"],
                  forms.triplets(), cfg.hash)
    res = growth_rate(p, grid, k, phys, tol=cfg["sweep"]["tol"])
    if res.status == FAILED:
        raise NumericalFailure(res.message)
    summary = {"xi": list(xi), "k": k, "status": res.status}
    if res.unstable:
        m = reconstruct(res.psi, res.lam, xi, p, grid, phys.mu)
        report = residuals(m, p, phys.g)
        summary.update(reconstruct_summary(m, report, res))
        write_mode(os.path.join(out, "mode.txt"), m, report,
                   extra={"config_hash": cfg.hash})
    if _wants(cfg, "json"):
        write_json(os.path.join(out, "mode.json"), summary, cfg.hash)
    return EXIT_OK


def reconstruct_summary(m, report, res):
    return {"lambda": m.lam, "s_star": res.s_star, "fixed_point_residual": res.fixed_point_residual,
            "eigen_residual": res.eigen_residual, "residuals": report, "norms": mode_norms(m)}


# -- synthesize -----------------------------------------------------------

def synthesis_setup(cfg, jobs=1):
    """SpectralField and Box for the synthesis block."""
    p = build_profile(cfg)
    grid = build_grid(cfg, p)
    phys = build_physics(cfg)
    sy = cfg["synthesis"]
    Lam = math.nan
    if sy["R1"] == AUTO:
        curve, peak, band = run_dispersion(cfg, jobs=jobs)
        if band is None:
            raise NumericalFailure("no half-rate band: the profile has no unstable band "
                                   "inside the sweep range")
        R1, R2, Lam = band
    else:
        R1, R2 = float(sy["R1"]), float(sy["R2"])
    if sy["period"] == AUTO:
        spacing = max(R1, R2 / 12.0) if sy["quadrature"] == "lattice" else R1
        period = 2 * math.pi / spacing
    else:
        period = float(sy["period"])
    box = syn.Box(period=period, nx=sy["nx"], ny=sy["ny"], z_stride=sy["z_stride"])
    bump = syn.BumpProfile(R1, R2, amplitude=float(sy["amplitude"]))
    try:
        sf = syn.build_spectral_field(p, grid, phys, bump, quadrature=sy["quadrature"],
                                      n_r=sy["n_r"], n_theta=sy["n_theta"], box=box,
                                      Lambda=Lam, tol=cfg["sweep"]["tol"], jobs=jobs,
                                      max_order=max(sy["orders"]))
    except ValueError as exc:
        raise ConfigError("synthesis", str(exc)) from exc
    return sf, box, p, phys


def cmd_synthesize(cfg, args):
    sf, box, p, phys = synthesis_setup(cfg, jobs=args.jobs)
    sy = cfg["synthesis"]
    out = _out_dir(cfg, args)
    fmt = args.format or cfg["output"]["snapshot_format"]
    times = sy["times"]
    provenance = {"profile": cfg["profile"], "mu": phys.mu, "g": phys.g,
                  "annulus": [sf.bump.R1, sf.bump.R2], "quadrature": sf.meta,
                  "config_hash": cfg.hash}
    parseval = []
    for i, t in enumerate(times):
        snap = syn.synthesize(sf, t, box)
        stem = os.path.join(out, f"snapshot_{i:03d}")
        if fmt == "binary":
            syn.write_snapshot(stem + ".bin", snap, {"config_hash": cfg.hash})
            write_json(stem + ".json", dict(provenance, t=t, imag_max=snap.imag_max))
        else:
            horiz, vert = syn.slice_rows(snap)
            cols = ["x1", "x2", "x3"] + list(syn.FIELDS)
            write_csv(stem + "_horizontal.csv", cols, horiz, cfg.hash)
            write_csv(stem + "_vertical.csv", cols, vert, cfg.hash)
        for which in ("rho", "u", "q"):
            phys_l2 = snap.l2(which)
            four = syn.sobolev_norm(sf, t, 0, which)
            rel = 0.0 if four == 0 else abs(phys_l2 - four) / four
            parseval.append([t, which, phys_l2, four, rel])
    rows = syn.sandwich_table(sf, times, sy["orders"])
    lam0, Lam = sf.bounds()
    if _wants(cfg, "csv"):
        write_csv(os.path.join(out, "norms.csv"),
                  ["field", "order", "t", "norm", "lower_bound", "upper_bound", "ok"],
                  [[r["field"], r["order"], r["t"], r["norm"], r["lower"], r["upper"], r["ok"]]
                   for r in rows], cfg.hash)
        write_csv(os.path.join(out, "parseval.csv"),
                  ["t", "field", "physical_l2", "fourier_l2", "relative_difference"],
                  parseval, cfg.hash)
    summary = dict(provenance, lambda0=lam0, Lambda=Lam, node_lambda_min=sf.lambda_min,
                   node_lambda_max=sf.lambda_max, sandwich_ok=all(r["ok"] for r in rows),
                   parseval_max_relative=max(r[4] for r in parseval),
                   box={"period": box.period, "nx": box.nx, "ny": box.ny,
                        "z_stride": box.z_stride})
    if _wants(cfg, "json"):
        write_json(os.path.join(out, "synthesis.json"), summary)
    return EXIT_OK


# -- verify ---------------------------------------------------------------

def run_verify(cfg, jobs=1):
    p = build_profile(cfg)
    oc = cfg["oracle"]
    grid = build_grid(cfg, p, n_override=oc["N"])
    phys = build_physics(cfg)
    xi = (float(oc["xi"][0]), float(oc["xi"][1]))
    k = math.hypot(*xi)
    res = growth_rate(p, grid, k, phys, tol=cfg["sweep"]["tol"])
    if res.status == FAILED:
        raise NumericalFailure(res.message)
    system = orc.StaggeredSystem(p, grid, xi, phys.mu, phys.g)
    if res.unstable:
        lam = res.lam
        init = system.project(orc.state_from_mode(res.psi, lam, xi, p, grid))
        dt = lam / 100 if oc["dt"] == AUTO else float(oc["dt"])
        T = 10 / lam if oc["T"] == AUTO else float(oc["T"])
    else:
        lam = None
        init = orc.random_state(system, cfg["seed"])
        dt = 0.01 if oc["dt"] == AUTO else float(oc["dt"])
        T = 10.0 if oc["T"] == AUTO else float(oc["T"])
    fit = orc.measure_growth(p, grid, xi, phys.mu, phys.g, init, dt, T, system=system)
    summary = {"fitted_rate": fit.rate, "lambda_predicted": lam, "dt": dt, "T": T,
               "N": grid.n_points, "xi": list(xi), "drift": fit.drift,
               "max_divergence": fit.max_divergence,
               "max_energy_residual": fit.max_energy_residual,
               "relative_error": abs(fit.rate - lam) / lam if lam else None,
               "sup_bound": buoyancy_bound(p, phys.g)}
    if oc["richardson"]:
        fit2 = orc.measure_growth(p, grid, xi, phys.mu, phys.g, init, dt / 2, T, system=system)
        extrap = orc.richardson(fit.rate, fit2.rate)
        summary.update(rate_half_dt=fit2.rate, richardson_rate=extrap,
                       richardson_relative_error=abs(extrap - lam) / lam if lam else None)
    return fit, summary


def cmd_verify(cfg, args):
    fit, summary = run_verify(cfg, jobs=args.jobs)
    out = _out_dir(cfg, args)
    if _wants(cfg, "csv"):
        rows = [[i, fit.t[i], fit.log_norm[i], fit.increment[i - 1] if i else math.nan]
                for i in range(fit.t.size)]
        write_csv(os.path.join(out, "verify.csv"), ["step", "t", "log_norm", "increment"],
                  rows, cfg.hash)
    if _wants(cfg, "json"):
        write_json(os.path.join(out, "verify.json"), summary, cfg.hash)
    return EXIT_OK


# -- profile-check --------------------------------------------------------

def cmd_profile_check(cfg, args):
    p = build_profile(cfg)
    phys = build_physics(cfg)
    checks = p.check()
    S = max(p.support_radius, 1.0)
    x = np.linspace(-S - 1.0, S + 1.0, 200_001)
    summary = {"checks": checks, "support_radius": p.support_radius, "rho_min": p.rho_min,
               "sup_buoyancy_ratio": sup_buoyancy_ratio(p),
               "lambda_upper_bound": buoyancy_bound(p, phys.g),
               "drho_integral": float(np.trapezoid(p.drho(x), x)),
               "rho_limits": [float(p.rho(np.array([-S - 1.0]))[0]),
                              float(p.rho(np.array([S + 1.0]))[0])]}
    out = _out_dir(cfg, args)
    write_json(os.path.join(out, "profile.json"), summary, cfg.hash)
    if not checks["rho_positive"] or not checks["drho_compact"]:
        raise ConfigError("profile", "profile violates positivity or compact support of rho'")
    return EXIT_OK


COMMANDS = {"dispersion": cmd_dispersion, "mode": cmd_mode, "synthesize": cmd_synthesize,
            "verify": cmd_verify, "profile-check": cmd_profile_check}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config (defaults apply when omitted)")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--format", choices=["binary", "csv-slices"],
                        help="snapshot format for synthesize")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="rtgrowth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dispersion", parents=[common], help="sweep lambda(k)")
    m = sub.add_parser("mode", parents=[common], help="reconstruct one growing mode")
    m.add_argument("--k", type=float)
    m.add_argument("--xi", type=float, nargs=2)
    m.add_argument("--dump-forms", action="store_true", help="write K, W, B as triplets")
    sub.add_parser("synthesize", parents=[common], help="Fourier synthesis and norm table")
    sub.add_parser("verify", parents=[common], help="time-stepping check of lambda")
    sub.add_parser("profile-check", parents=[common], help="profile conditions and bound")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, EigenSolverError, orc.SaddleSolveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
