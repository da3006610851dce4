"""Command-line driver.

Usage::

    bathdisc COMMAND --config run.yaml [--out DIR] [--precision P] [--deterministic]

Exit status 0 on success, 2 for configuration errors and 3 when a numerical
tolerance could not be met.
"""

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .estimators import discretize
from .evolve import (SingleParticleModel, default_dt, error_series, greens_function,
                     lambda_time_discrete, population, reference_solution, spectrum,
                     tmax_empirical, tmax_predict, tmax_rise)
from .exceptions import ConfigError, GridMismatchError, NumericalError
from .io import (config_hash, read_series, write_bath, write_chain, write_columns,
                 write_manifest, write_series, write_summary)
from .manybody import build_siam, greens_overlap, ground_state
from .mastereq import correlation_functions, gamma_integral, integrate_me, thermal_bsdo
from .orthopoly import chain_from_weight
from .timeseries import TimeGrid, TimeSeries, check_same_grid

log = logging.getLogger("bathdisc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Run:
    """Resolved config plus output helpers shared by the commands."""

    def __init__(self, cfg, raw, out, precision, deterministic, command):
        self.cfg = cfg
        self.raw = raw
        self.out = Path(out)
        self.precision = precision or cfg.precision
        self.deterministic = deterministic
        self.command = command
        self.hash = config_hash(raw)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.cfg_dir = Path(".")

    def provenance(self, **extra):
        prov = {"config_sha256": self.hash, "command": self.command,
                "bathdisc": __version__}
        prov.update({k: v for k, v in extra.items() if v is not None})
        return prov

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def manifest(self, **data):
        data.update(command=self.command, config_sha256=self.hash, config=self.raw,
                    precision=self.precision, deterministic=self.deterministic,
                    bathdisc=__version__, files=sorted(self.files))
        write_manifest(self.out / "manifest.json", data)

    def workers(self, n):
        return 1 if self.deterministic else max(1, min(n, 4))

    def bath(self, J, method, n):
        if n == 0:
            return None
        c = self.cfg.discretization
        return discretize(J, method, n, self.precision, log_lambda=c.log_lambda,
                          x_accum=c.x_accum)

    def grid(self, bath=None):
        t = self.cfg.time
        dt = t.dt
        if dt is None:
            dt = default_dt(bath.energies) if bath is not None else 0.01
        return TimeGrid.until(t.t_end, dt)


def _single(values, name):
    if len(values) != 1:
        raise ConfigError(f"this command takes a single value, got {values}", name)
    return values[0]


def _finite(x):
    return None if not math.isfinite(x) else x


def cmd_discretize(run):
    J = run.cfg.spectral_density()
    entries = []
    for method in run.cfg.methods:
        for n in run.cfg.n_list:
            if n == 0:
                raise ConfigError("discretize needs N_b >= 1", "N_b")
            bath = run.bath(J, method, n)
            prov = run.provenance(method=bath.method, N_b=n)
            write_bath(run.path(f"bath_{method}_N{n}.txt"), bath, prov)
            entry = {"method": bath.method, "N_b": n, "total_weight": bath.total_weight,
                     "dropped": list(bath.dropped)}
            if method == "bsdo":
                chain = chain_from_weight(J, n, run.precision)
                write_chain(run.path(f"chain_{method}_N{n}.txt"), chain, prov)
                entry["chain_precision"] = chain.meta["precision"]
            entries.append(entry)
    run.manifest(runs=entries, density_weight=J.total_weight)


def _evolve_one(run, J, method, n, grid, reference):
    cfg = run.cfg
    bath = run.bath(J, method, n)
    model = SingleParticleModel(cfg.model.epsilon0, bath, cfg.model.geometry)
    if cfg.error.quantity == "population":
        series = population(model, grid)
    else:
        series = greens_function(model, grid, cfg.model.fermi_level)
    err = error_series(reference, series)
    a, b = J.support
    nb = max(n, 1)
    pred = {"bath": tmax_predict(nb, a, b, "bath"), "system": tmax_predict(nb, a, b, "system")}
    if cfg.error.detector == "rise":
        emp = tmax_rise(err, cfg.error.rise_factor, consecutive=cfg.error.consecutive)
    else:
        emp = tmax_empirical(err, cfg.error.threshold, cfg.error.consecutive)
    before = grid.times < pred["system"]
    max_before = float(err.values[before].max()) if np.any(before) else float(err.values[0])
    return {"method": method if bath is None else bath.method, "N_b": n, "bath": bath,
            "model": model, "series": series, "error": err, "t_max_predicted": pred,
            "t_max_empirical": emp, "max_error_before_tmax": max_before}


def _reference(run, J, grid):
    cfg = run.cfg
    return reference_solution(J, cfg.model.epsilon0, grid, cfg.error.N_ref,
                              cfg.error.quantity, cfg.model.fermi_level, cfg.error.tol)


def cmd_evolve(run):
    cfg = run.cfg
    J = run.cfg.spectral_density()
    method = _single(cfg.methods, "method")
    n = _single(cfg.n_list, "N_b")
    grid = run.grid(run.bath(J, method, n))
    reference = _reference(run, J, grid)
    r = _evolve_one(run, J, method, n, grid, reference)
    prov = run.provenance(method=r["method"], N_b=n, geometry=cfg.model.geometry)
    tag = f"{method}_N{n}"
    write_series(run.path(f"{cfg.error.quantity}_{tag}.csv"), r["series"], prov)
    lam = (lambda_time_discrete(r["bath"], grid) if r["bath"] is not None
           else TimeSeries(grid, np.zeros(grid.count, complex), "lambda"))
    write_series(run.path(f"lambda_{tag}.csv"), lam, prov)
    write_series(run.path("reference.csv"), reference,
                 run.provenance(method="linear", N_b=cfg.error.N_ref))
    write_series(run.path(f"error_{tag}.csv"), r["error"], prov)
    if r["bath"] is not None:
        write_bath(run.path(f"bath_{tag}.txt"), r["bath"], prov)
    run.manifest(method=r["method"], N_b=n, grid={"dt": grid.dt, "count": grid.count},
                 t_max_predicted=r["t_max_predicted"],
                 t_max_empirical=_finite(r["t_max_empirical"]),
                 detector=cfg.error.detector,
                 max_error_before_tmax=r["max_error_before_tmax"],
                 reference={"N_ref": cfg.error.N_ref,
                            "certificate": reference.meta["certificate"]})


def cmd_tmax_scan(run):
    cfg = run.cfg
    J = cfg.spectral_density()
    if cfg.time.dt is None:
        raise ConfigError("tmax-scan needs an explicit time.dt (one grid for all runs)",
                          "time.dt")
    grid = run.grid()
    reference = _reference(run, J, grid)
    jobs = [(m, n) for m in cfg.methods for n in cfg.n_list]
    if any(n == 0 for _, n in jobs):
        raise ConfigError("tmax-scan needs N_b >= 1", "N_b")
    with ThreadPoolExecutor(run.workers(len(jobs))) as pool:
        results = list(pool.map(lambda job: _evolve_one(run, J, *job, grid, reference), jobs))
    rows, fits = [], {}
    for r in results:
        rows.append({"method": r["method"], "N_b": r["N_b"],
                     "t_max_empirical": r["t_max_empirical"],
                     "t_max_predicted": r["t_max_predicted"]["system"],
                     "max_error_before_tmax": r["max_error_before_tmax"]})
    for m in cfg.methods:
        pts = [(row["N_b"], row["t_max_empirical"]) for row, (mm, _) in zip(rows, jobs)
               if mm == m and math.isfinite(row["t_max_empirical"])]
        if len(pts) >= 2:
            x, y = np.array(pts).T
            fits[m] = float(np.polyfit(x, y, 1)[0])
    write_summary(run.path("tmax_summary.csv"), rows, run.provenance())
    a, b = J.support
    run.manifest(rows=rows, slope_fit=fits, slope_predicted=4.0 / (b - a),
                 reference={"N_ref": cfg.error.N_ref,
                            "certificate": reference.meta["certificate"]},
                 grid={"dt": grid.dt, "count": grid.count})


def cmd_mastereq(run):
    cfg = run.cfg
    J = cfg.spectral_density()
    me = cfg.mastereq
    beta = me.beta_value
    omega_s = cfg.model.omega_s if cfg.model.omega_s is not None else cfg.model.epsilon0
    method = _single(cfg.methods, "method")
    n = _single(cfg.n_list, "N_b")
    if n == 0:
        raise ConfigError("mastereq needs N_b >= 1", "N_b")
    if method == "bsdo" and me.thermal_rule:
        bath = thermal_bsdo(J, n, beta, run.precision)
    else:
        bath = run.bath(J, method, n)
    dt = cfg.time.dt or 0.01
    grid = TimeGrid.until(cfg.time.t_end, dt)
    cgrid = grid.refine(2)
    prov = run.provenance(method=bath.method, N_b=n, beta=me.beta, coupling=me.coupling)
    corr = correlation_functions(bath, beta, cgrid)
    sol = integrate_me(omega_s, corr, me.coupling, grid, history=me.history)
    gamma = gamma_integral(corr, omega_s, grid)
    _write_me(run, "discrete", sol, corr, gamma, grid, prov)
    a, b = J.support
    info = {"method": bath.method, "N_b": n, "beta": me.beta, "omega_s": omega_s,
            "coupling": me.coupling, "t_max_bath": tmax_predict(n, a, b, "bath"),
            "step_defect": sol.defect, "trace_error": sol.trace_error(),
            "hermiticity_error": sol.hermiticity_error(), "source": corr.source}
    if me.compare_continuous:
        ccorr = correlation_functions(J, beta, cgrid)
        csol = integrate_me(omega_s, ccorr, me.coupling, grid, history=me.history)
        cgamma = gamma_integral(ccorr, omega_s, grid)
        _write_me(run, "continuous", csol, ccorr, cgamma, grid,
                  run.provenance(method="continuous", beta=me.beta, coupling=me.coupling))
        before = grid.times < info["t_max_bath"]
        dg = np.abs(gamma.values - cgamma.values) / np.abs(cgamma.values).max()
        dp = np.abs(sol.population.values - csol.population.values)
        info["gamma_rel_dev_before_tmax"] = float(dg[before].max())
        info["population_dev_before_tmax"] = float(dp[before].max())
        info["gamma_rel_dev_max"] = float(dg.max())
        info["population_dev_max"] = float(dp.max())
    run.manifest(**info)


def _write_me(run, tag, sol, corr, gamma, grid, prov):
    write_series(run.path(f"population_{tag}.csv"), sol.population, prov)
    write_series(run.path(f"coherence_{tag}.csv"), sol.coherence, prov)
    write_series(run.path(f"gamma_{tag}.csv"), gamma, prov)
    write_series(run.path(f"alpha1_{tag}.csv"), corr.alpha1.coarsen(2), prov)
    write_series(run.path(f"alpha2_{tag}.csv"), corr.alpha2.coarsen(2), prov)


def _manybody_g(run, J, method, n, grid):
    cfg = run.cfg
    bath = run.bath(J, method, n) if J is not None else None
    H = build_siam(cfg.model.U, bath, cfg.model.epsilon0, cfg.manybody.budget)
    _, state = ground_state(H, cfg.manybody.sector, cfg.manybody.tol)
    g = greens_overlap(H, grid, state, cfg.manybody.tol, cfg.manybody.kind)
    return bath, state, g


def cmd_manybody(run):
    cfg = run.cfg
    J = cfg.spectral_density() if cfg.density is not None else None
    method = _single(cfg.methods, "method")
    n = _single(cfg.n_list, "N_b")
    if n > 0 and J is None:
        raise ConfigError("manybody with N_b > 0 needs a density section", "density")
    grid = TimeGrid.until(cfg.time.t_end, cfg.time.dt or 0.01)
    bath, state, g = _manybody_g(run, J, method, n, grid)
    prov = run.provenance(method=method if n else "none", N_b=n, U=cfg.model.U,
                          kind=cfg.manybody.kind)
    write_series(run.path(f"greens_U{cfg.model.U:g}_N{n}.csv"), g, prov)
    info = {"N_b": n, "U": cfg.model.U, "method": method, "kind": cfg.manybody.kind,
            "sector": g.meta["sector"], "ground_energy": g.meta["ground_energy"],
            "degeneracy": g.meta["degeneracy"], "krylov_dim_max": g.meta["krylov_dim_max"],
            "krylov_dim_mean": g.meta["krylov_dim_mean"], "norm_drift": g.meta["norm_drift"],
            "abs_G_range": [float(np.abs(g.values).min()), float(np.abs(g.values).max())]}
    if cfg.model.U == 0:
        dev = _compare_single_particle(cfg, bath, state, g, grid)
        info["single_particle_deviation"] = dev
        if dev > cfg.manybody.compare_tol:
            run.manifest(**info)
            raise NumericalError(
                f"U=0 many-body result deviates from single-particle by {dev:.2e}")
    ref_n = cfg.manybody.reference_N_b
    if ref_n is not None and J is not None and ref_n > 0:
        _, _, gref = _manybody_g(run, J, method, ref_n, grid)
        err = error_series(gref, g)
        write_series(run.path(f"error_U{cfg.model.U:g}_N{n}.csv"), err, prov)
        info["proxy_reference_N_b"] = ref_n
        info["proxy_error_max"] = float(err.values.max())
    run.manifest(**info)


def _compare_single_particle(cfg, bath, state, g, grid):
    model = SingleParticleModel(cfg.model.epsilon0, bath)
    if cfg.manybody.kind == "retarded":
        ref = greens_function(model, grid)
    else:
        E, _ = spectrum(model)
        n_up = state.sector[0]
        fermi = E[n_up] if n_up < E.size else math.inf
        ref = greens_function(model, grid, fermi_level=fermi)
    return float(np.max(np.abs(ref.values - g.values)))


def cmd_compare(run):
    c = run.cfg.compare
    if c is None:
        raise ConfigError("compare needs a compare section with files a and b", "compare")
    base = Path(run.cfg_dir)
    paths = [Path(p) if Path(p).is_absolute() else base / p for p in (c.a, c.b)]
    try:
        sa, sb = (read_series(p) for p in paths)
    except OSError as exc:
        raise ConfigError(f"cannot read series: {exc}", "compare") from None
    check_same_grid(sa, sb)
    va, vb = np.abs(sa.values), np.abs(sb.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(vb > 0, va / vb, np.inf)
    write_columns(run.path("compare.csv"),
                  {"t": sa.times, c.label_a: va, c.label_b: vb, "ratio": ratio},
                  run.provenance(a=c.a, b=c.b))
    run.manifest(max_a=float(va.max()), max_b=float(vb.max()),
                 max_ratio=_finite(float(np.max(ratio))))


COMMANDS = {
    "discretize": cmd_discretize,
    "evolve": cmd_evolve,
    "tmax-scan": cmd_tmax_scan,
    "mastereq": cmd_mastereq,
    "manybody": cmd_manybody,
    "compare": cmd_compare,
}


def build_parser():
    p = argparse.ArgumentParser(prog="bathdisc", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR", default=None)
        s.add_argument("--precision", choices=("double", "extended"), default=None)
        s.add_argument("--deterministic", action="store_true",
                       help="serial sweeps (outputs are ordered either way)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, raw = load_config(args.config)
        out = args.out or str(Path(args.config).parent / cfg.output)
        run = _Run(cfg, raw, out, args.precision, args.deterministic, args.command)
        run.cfg_dir = Path(args.config).parent
        COMMANDS[args.command](run)
    except (ConfigError, GridMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
