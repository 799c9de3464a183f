"""Batch front end: configuration, pipeline orchestration and file outputs.

Subcommands:

* ``solve``  - fit a jet for one flux and emit the solution artifacts,
* ``scan``   - run the critical-flux scan over a list of fluxes,
* ``oracle`` - regenerate the derived reference values deterministically,
* ``check``  - re-run the invariant suite on a stored solution.

All artifacts are plain CSV (comma separated, header row, LF endings) and
JSON (UTF-8, sorted keys, no timestamps), each carrying a schema-version
field, so repeated runs of the same configuration are byte-identical.
"""

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, freeboundary, minimizer, oned
from .domain import Nozzle, boundary_data, build_domain
from .errors import ConfigError, JetflowError
from .gas import GasModel
from .truncation import TruncatedEnergy
from .upstream import BernoulliProfile, bernoulli_of_stream, solve_upstream

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "gas": {"gamma": "2.0"},
    "upstream": {"profile": "constant", "base": "1.5", "amplitude": "0.0",
                 "bar_height": "2.0", "flux": "0.5", "profile_file": ""},
    "nozzle": {"family": "log", "nozzle_file": ""},
    "domain": {"mu": "2.0", "R": "4.0", "h": "0.0625", "h2": "",
               "ramp_exponent": "0.75"},
    "truncation": {"epsilon": ""},
    "solver": {"tol": "1e-8", "max_sweeps": "30000", "over_relax": "1.85",
               "threads": "1"},
    "shooting": {"fit_tol": "", "max_trials": "40", "warm_start": "true"},
    "scan": {"flux_values": "", "refine": "true"},
    "checks": {"strict": "false"},
}


class RunConfig:
    """Validated run configuration assembled from a key=value INI file."""

    def __init__(self, parser):
        get = parser.get
        self.gamma = parser.getfloat("gas", "gamma")
        self.profile_kind = get("upstream", "profile")
        self.base = parser.getfloat("upstream", "base")
        self.amplitude = parser.getfloat("upstream", "amplitude")
        self.bar_height = parser.getfloat("upstream", "bar_height")
        self.flux = parser.getfloat("upstream", "flux")
        self.profile_file = get("upstream", "profile_file")
        self.nozzle_family = get("nozzle", "family")
        self.nozzle_file = get("nozzle", "nozzle_file")
        self.mu = parser.getfloat("domain", "mu")
        self.R = parser.getfloat("domain", "R")
        self.h = parser.getfloat("domain", "h")
        h2 = get("domain", "h2")
        self.h2 = float(h2) if h2 else None
        self.ramp_exponent = parser.getfloat("domain", "ramp_exponent")
        eps = get("truncation", "epsilon")
        self.epsilon = float(eps) if eps else None
        self.tol = parser.getfloat("solver", "tol")
        self.max_sweeps = parser.getint("solver", "max_sweeps")
        self.over_relax = parser.getfloat("solver", "over_relax")
        self.threads = parser.getint("solver", "threads")
        fit_tol = get("shooting", "fit_tol")
        self.fit_tol = float(fit_tol) if fit_tol else None
        self.max_trials = parser.getint("shooting", "max_trials")
        self.warm_start = parser.getboolean("shooting", "warm_start")
        scan = get("scan", "flux_values").strip()
        self.flux_values = [float(v) for v in scan.split(",") if v.strip()] \
            if scan else []
        self.scan_refine = parser.getboolean("scan", "refine")
        self.strict = parser.getboolean("checks", "strict")
        self._validate()

    def _validate(self):
        if self.gamma <= 1.0:
            raise ConfigError("gas.gamma must exceed 1")
        if self.flux <= 0.0:
            raise ConfigError("upstream.flux must be positive")
        if not 0.5 < self.ramp_exponent < 1.0:
            raise ConfigError("domain.ramp_exponent must lie in (1/2, 1)")
        if self.mu <= 0 or self.R <= 0 or self.h <= 0:
            raise ConfigError("domain.mu, domain.R, domain.h must be positive")
        for key in ("profile_file", "nozzle_file"):
            path = getattr(self, key)
            if path and not Path(path).exists():
                raise ConfigError(f"{key} does not exist: {path}")
        if self.profile_kind not in ("constant", "cosine", "file"):
            raise ConfigError(f"unknown upstream.profile '{self.profile_kind}'")
        if self.nozzle_family not in ("log", "flat_mouth", "file"):
            raise ConfigError(f"unknown nozzle.family '{self.nozzle_family}'")
        if self.profile_kind == "file" and not self.profile_file:
            raise ConfigError("upstream.profile=file requires profile_file")
        if self.nozzle_family == "file" and not self.nozzle_file:
            raise ConfigError("nozzle.family=file requires nozzle_file")

    @classmethod
    def load(cls, path):
        parser = configparser.ConfigParser()
        parser.read_dict(_DEFAULTS)
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
        return cls(parser)

    def echo(self):
        """Fully-resolved configuration embedded in the summary."""
        return {k: v for k, v in sorted(vars(self).items())
                if not k.startswith("_")}

    # -- object assembly -------------------------------------------------

    def make_gas(self):
        return GasModel(self.gamma)

    def make_profile(self):
        if self.profile_kind == "constant":
            return BernoulliProfile.constant(self.base, self.bar_height)
        if self.profile_kind == "cosine":
            return BernoulliProfile.cosine(self.base, self.amplitude,
                                           self.bar_height)
        return BernoulliProfile.from_table(self.profile_file)

    def make_nozzle(self):
        if self.nozzle_family == "log":
            return Nozzle.log_family(self.bar_height)
        if self.nozzle_family == "flat_mouth":
            return Nozzle.flat_mouth_family(self.bar_height)
        return Nozzle.from_table(self.nozzle_file)

    def solver_options(self):
        return minimizer.SolverOptions(tol=self.tol, max_sweeps=self.max_sweeps,
                                       over_relax=self.over_relax)

    def fit_options(self):
        return freeboundary.FitOptions(fit_tol=self.fit_tol,
                                       max_trials=self.max_trials,
                                       s=self.ramp_exponent,
                                       warm_start=self.warm_start)


# ---------------------------------------------------------------------------
# flow reconstruction
# ---------------------------------------------------------------------------

def derive_flow(field, energy, dom):
    """Nodal (rho, u1, u2, mach) from grad psi = (-rho u2, rho u1).

    Requires the subsonic margin to have passed, so the untruncated density
    inversion is valid on the fluid region; nan outside it.
    """
    rep = asymptotics.subsonic_margin(field, energy, dom)
    if not rep.subsonic:
        raise JetflowError(
            "flow reconstruction refused: subsonic margin not attained "
            f"(margin={rep.margin:.4g} > -epsilon={-rep.epsilon:.4g}); "
            "fields would be truncation artifacts")
    psi = field.psi
    gas, bern = energy.gas, energy.bern
    Q = energy.Q
    dx = np.gradient(psi, dom.h1, axis=0)
    dy = np.gradient(psi, dom.h2, axis=1)
    t = dx * dx + dy * dy
    z = np.clip(psi, 0.0, Q)
    b = np.asarray(bern.value(z), dtype=float)
    tc = np.asarray(gas.critical_momentum_sq(b))
    fluid = (dom.mask >= 0) & (psi < Q * (1 - minimizer.THETA_FRAC)) \
        & (t < tc * (1 - 1e-12))
    g = np.full(psi.shape, np.nan)
    g[fluid] = gas.invert_density_g(t[fluid], b[fluid])
    rho = 1.0 / g
    u1 = g * dy
    u2 = -g * dx
    mach = np.sqrt(t) * g / np.asarray(gas.sound_speed(
        np.where(np.isfinite(rho), rho, 1.0)))
    mach[~fluid] = np.nan
    return rho, u1, u2, mach


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schema_version", SCHEMA_VERSION])
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _fmt(x):
    return f"{x:.12g}"


def write_solution_csv(path, field, energy, dom):
    from .kernels import cell_gradient_sq
    psi = field.psi
    tcell = cell_gradient_sq(psi, dom.h1, dom.h2)
    rows = []
    thr = energy.Q * (1 - minimizer.THETA_FRAC)
    for i in range(dom.x1.size):
        for j in range(dom.x2.size):
            m = int(dom.mask[i, j])
            if m < 0:
                continue
            ci = min(max(i - 1, 0), dom.nx - 1)
            cj = min(max(j - 1, 0), dom.ny - 1)
            region = m if m > 0 else (6 if psi[i, j] >= thr else 0)
            rows.append([_fmt(dom.x1[i]), _fmt(dom.x2[j]), _fmt(psi[i, j]),
                         _fmt(tcell[ci, cj]), region])
    _write_csv(path, ["x1", "x2", "psi", "grad_sq", "region"], rows)


def write_grid_csv(path, dom, bd):
    rows = []
    for i in range(dom.x1.size):
        for j in range(dom.x2.size):
            val = bd.values[i, j] if dom.dirichlet[i, j] else np.nan
            rows.append([_fmt(dom.x1[i]), _fmt(dom.x2[j]),
                         int(dom.mask[i, j]),
                         _fmt(val) if np.isfinite(val) else ""])
    _write_csv(path, ["x1", "x2", "mask", "psi_sharp"], rows)


def write_boundary_csv(path, fb):
    x2, up = fb.finite()
    _write_csv(path, ["x2", "upsilon"],
               [[_fmt(a), _fmt(b)] for a, b in zip(x2, up)])


def write_downstream_csv(path, down):
    rows = [[_fmt(y), _fmt(u), _fmt(p)] for y, u, p in
            zip(down.theta_y, down.u_down_y,
                np.asarray(down.psi_down(down.theta_y)))]
    _write_csv(path, ["x2", "u_down", "psi_down"], rows)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def run_solve(cfg, out):
    gas = cfg.make_gas()
    profile = cfg.make_profile()
    nozzle = cfg.make_nozzle()
    upstream = solve_upstream(gas, profile, cfg.flux)
    bern = bernoulli_of_stream(upstream)
    energy = TruncatedEnergy(gas, bern, epsilon=cfg.epsilon)
    dom = build_domain(nozzle, cfg.mu, cfg.R, cfg.h, h2=cfg.h2)

    shot = freeboundary.continuous_fit(
        energy, dom, cfg.flux, opts=cfg.fit_options(),
        solver_opts=cfg.solver_options())
    field = shot.field
    bd = boundary_data(dom, cfg.flux, shot.Lambda_fit, s=cfg.ramp_exponent)
    lam2 = energy.lambda_of_Lambda(shot.Lambda_fit) ** 2

    checks = {}
    checks["fit_converged"] = bool(shot.converged)
    checks["bounds"] = bool(field.psi.min() >= 0.0
                            and field.psi.max() <= cfg.flux * (1 + 1e-12))
    hist = np.asarray(field.energy_history)
    checks["energy_monotone"] = bool(np.all(
        np.diff(hist) <= 1e-11 * np.abs(hist[0]) + 1e-15))
    mono = minimizer.horizontal_monotonicity(field, dom)
    checks["horizontal_monotone"] = bool(mono >= -1e-8 * cfg.flux)

    margin = asymptotics.subsonic_margin(field, energy, dom)
    checks["subsonic"] = bool(margin.subsonic)
    js = freeboundary.jump_check(field, shot.boundary, energy,
                                 shot.Lambda_fit, dom)
    down = None
    plateau_gap = np.nan
    if margin.subsonic:
        try:
            down = asymptotics.downstream_state(upstream, shot.Lambda_fit)
            plateau = freeboundary.plateau_height(field, dom)
            plateau_gap = abs(plateau - down.H_down)
            checks["downstream_height"] = bool(plateau_gap <= 2 * dom.h2)
        except JetflowError:
            checks["downstream_height"] = False
    slope_gap, resolved = freeboundary.smooth_fit_check(shot.boundary, nozzle)
    fluxes = asymptotics.mass_flux_sections(field, energy, dom)
    flux_dev = max(abs(fl - cfg.flux) for _, fl in fluxes) / cfg.flux
    checks["mass_flux_sections"] = bool(flux_dev <= 0.05)

    el = minimizer.euler_residual(field, energy, dom)
    el_norm = float(np.nanmax(np.abs(el))) if np.any(np.isfinite(el)) else np.nan

    summary = {
        "config": cfg.echo(),
        "upstream": {
            "rho_bar": upstream.rho_bar,
            "Q_star": upstream.Q_star,
            "Q_upper": upstream.Q_upper,
            "kappa": profile.kappa,
            "kappa0": bern.kappa0,
            "u_min": upstream.u_min,
        },
        "shooting": {
            "Lambda_fit": shot.Lambda_fit,
            "trials": [{"Lambda": L, "fitgap": g, "energy": e}
                       for L, g, e in shot.history],
            "converged": shot.converged,
            "sign_changes": shot.sign_changes,
        },
        "energy": vars(minimizer.discrete_energy(field, energy, dom, lam2)),
        "solver": {"sweeps": field.sweeps, "max_update": field.max_update,
                   "el_residual_max": el_norm},
        "jump": vars(js),
        "margin": {"value": margin.margin, "epsilon": margin.epsilon,
                   "subsonic": margin.subsonic},
        "smooth_fit": {"slope_gap": slope_gap if np.isfinite(slope_gap) else None,
                       "resolved": resolved},
        "mass_flux": [{"x1": x, "flux": fl} for x, fl in fluxes],
        "plateau_height_gap": plateau_gap if np.isfinite(plateau_gap) else None,
        "checks": checks,
    }
    if down is not None:
        summary["downstream"] = {
            "rho_down": down.rho_down, "H_down": down.H_down,
            "p_exit": down.p_e, "mass_defect": down.mass_defect,
        }
        far = asymptotics.farfield_compare(field, upstream, down, dom)
        summary["farfield"] = {
            "inlet": [{"distance": d, "sup_dev": e} for d, e in
                      zip(far.inlet_dist, far.inlet_dev)],
            "outlet": [{"distance": d, "sup_dev": e} for d, e in
                       zip(far.outlet_dist, far.outlet_dev)],
        }
        try:
            rho, u1, u2, mach = derive_flow(field, energy, dom)
            checks["vertical_velocity"] = bool(
                np.nanmax(u2) <= 1e-8 * cfg.flux / dom.h1)
            checks["subsonic_mach"] = bool(np.nanmax(mach) < 1.0)
        except JetflowError:
            pass

    out.mkdir(parents=True, exist_ok=True)
    write_solution_csv(out / "solution.csv", field, energy, dom)
    write_grid_csv(out / "grid.csv", dom, bd)
    write_boundary_csv(out / "freeboundary.csv", shot.boundary)
    with open(out / "shooting_log.json", "w", encoding="utf-8") as fh:
        json.dump([{"Lambda": L, "fitgap": g, "energy": e}
                   for L, g, e in shot.history], fh, sort_keys=True, indent=1)
        fh.write("\n")
    if down is not None:
        write_downstream_csv(out / "downstream.csv", down)
    _write_json(out / "summary.json", summary)
    ok = all(checks.values()) if cfg.strict else \
        all(checks[k] for k in ("fit_converged", "bounds", "energy_monotone",
                                "horizontal_monotone"))
    return 0 if ok else 1


def run_scan(cfg, out):
    if not cfg.flux_values:
        raise ConfigError("scan requires scan.flux_values")
    gas = cfg.make_gas()
    profile = cfg.make_profile()
    nozzle = cfg.make_nozzle()
    report = asymptotics.critical_flux_scan(
        gas, profile, nozzle, cfg.flux_values,
        mu=cfg.mu, R=cfg.R, h=cfg.h, eps=cfg.epsilon,
        fit_opts=cfg.fit_options(), solver_opts=cfg.solver_options(),
        refine=cfg.scan_refine)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scan.jsonl", "w", encoding="utf-8") as fh:
        for k, Q in enumerate(report.Q_values):
            rec = {"Q": Q, "Lambda_fit": report.lambdas[k],
                   "margin": report.margins[k],
                   "H_down": report.heights[k],
                   "status": report.statuses[k],
                   "surrogate_margin": report.surrogate_margins[k],
                   "schema_version": SCHEMA_VERSION}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _write_json(out / "summary.json", {
        "config": cfg.echo(),
        "Q_c_estimate": report.Q_c_estimate
        if np.isfinite(report.Q_c_estimate) else None,
        "statuses": report.statuses,
    })
    solved = [s == "solved" for s in report.statuses]
    return 0 if any(solved) else 1


def run_oracle(cfg, out):
    """Deterministically regenerate the derived reference values used by the
    test suite (closed forms, quadratures and 1D profiles at pinned inputs)."""
    gas2 = GasModel(2.0)
    gas14 = GasModel(1.4)
    from .upstream import BernoulliOfStream
    bern = BernoulliOfStream.constant(1.5, 1.0)
    en = TruncatedEnergy(gas2, bern)
    prof = dirich = oned.dirichlet_profile(en, 2.0, 1.0, n=2049)
    down = oned.downstream_profile(en, 1.0, 0.9, n=2049)
    values = {
        "enthalpy_gamma14_rho12": gas14.enthalpy(1.2),
        "flux_const_B15_H2_rho12": 2.4 * float(np.sqrt(0.6)),
        "critical_density_gamma14_s25": gas14.critical_density(2.5),
        "invert_t0864_b15": gas2.invert_density_g(0.864, 1.5),
        "Phi_eps005_t05_zQ": float(en.Phi(0.5, 1.0)),
        "lambda_of_0.8": en.lambda_of_Lambda(0.8),
        "dirichlet_top_slope_H2_Q1": dirich.top_slope,
        "downstream_height_Q1_L09": down.height,
        "exit_density_L09_B15": 1.0 / float(gas2.invert_density_g(0.81, 1.5)),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "oracle_values.json", values)
    return 0


def run_check(cfg, out, solution):
    """Invariant suite on a stored field: bounds, monotonicity, boundary
    ordering and the free-boundary graph property."""
    gas = cfg.make_gas()
    profile = cfg.make_profile()
    nozzle = cfg.make_nozzle()
    upstream = solve_upstream(gas, profile, cfg.flux)
    bern = bernoulli_of_stream(upstream)
    energy = TruncatedEnergy(gas, bern, epsilon=cfg.epsilon)
    dom = build_domain(nozzle, cfg.mu, cfg.R, cfg.h, h2=cfg.h2)

    data = np.genfromtxt(solution, delimiter=",", skip_header=2)
    psi = np.full(dom.mask.shape, energy.Q)
    for x1v, x2v, p, _, _ in data:
        i = int(round((x1v - dom.x1[0]) / dom.h1))
        j = int(round(x2v / dom.h2))
        psi[i, j] = p
    field = minimizer.DiscreteField(psi=psi, dom=dom)

    checks = {}
    checks["bounds"] = bool(psi.min() >= -1e-12
                            and psi.max() <= cfg.flux * (1 + 1e-12))
    mono = minimizer.horizontal_monotonicity(field, dom)
    checks["horizontal_monotone"] = bool(mono >= -1e-8 * cfg.flux)
    try:
        fb = freeboundary.extract(field, dom)
        checks["graph"] = True
        checks["no_points_below_strip"] = bool(
            not np.isfinite(fb.l) or fb.l >= 0.0)
    except JetflowError:
        checks["graph"] = False
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "check.json", {"config": cfg.echo(), "checks": checks})
    return 0 if all(checks.values()) else 1


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="jetflow",
        description="Variational free-boundary solver for compressible "
                    "subsonic jets")
    ap.add_argument("command", choices=["solve", "scan", "oracle", "check"])
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=None,
                    help="solver thread budget")
    ap.add_argument("--strict", action="store_true",
                    help="all warnings become failures")
    ap.add_argument("--solution", default=None,
                    help="stored solution.csv (check subcommand)")
    args = ap.parse_args(argv)

    try:
        cfg = RunConfig.load(args.config)
        if args.strict:
            cfg.strict = True
        if args.threads is not None:
            cfg.threads = args.threads
        out = Path(args.out)
        if args.command == "solve":
            return run_solve(cfg, out)
        if args.command == "scan":
            return run_scan(cfg, out)
        if args.command == "oracle":
            return run_oracle(cfg, out)
        if args.command == "check":
            if not args.solution:
                raise ConfigError("check requires --solution")
            return run_check(cfg, out, args.solution)
    except JetflowError as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc)},
               "schema_version": SCHEMA_VERSION}
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(err, fh, sort_keys=True, indent=1)
            fh.write("\n")
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
