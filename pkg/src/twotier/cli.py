"""Command-line front end.

Every run writes into ``<out>/<manifest-hash>/`` where the hash covers all
inputs that influence numeric results (not the worker count or output
directory), so reruns with the same inputs land in the same place and
reproduce the same CSV bodies.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from . import _kernels
from .analytic import (FemtoObserver, InsufficientSamples, QuadratureFailure, UnsupportedExponent,
                       cf_inversion_cdf, no_exclusion_ccdf_lb, exclusion_ccdf_lb,
                       femto_cellular_ccdf_lb, femto_levy, femto_outage_lb, macro_outage)
from .channel import estimate_shadow_moments, save_moments
from .contour import (DEFAULT_GRID, SPLIT_CONVENTION, Evaluator, GridMismatch, NonMonotoneOutage,
                      Scenario, baseline_scenario, compare_scenarios, compute_oc,
                      contour_metadata_json, contours_to_csv)
from .geometry import effective_intensities
from .montecarlo import (DegenerateScenario, MacroObserver, ScenarioConfig, empirical_ccdf,
                         sample_interference, simulate_outage)
from .params import ConfigError, SystemParams, load_config, reference_params, validate

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3
KS_LIMIT = 0.02
CF_LIMIT = 1e-3


class ValidationFailure(RuntimeError):
    pass


@dataclass
class RunManifest:
    subcommand: str
    params_hash: str
    seeds: list
    features: dict
    inputs: dict
    version: str = __version__
    outputs: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    backend: str = field(default_factory=_kernels.backend)

    @property
    def hash(self) -> str:
        key = {"subcommand": self.subcommand, "params": self.params_hash, "seeds": self.seeds,
               "features": self.features, "inputs": self.inputs, "version": self.version}
        blob = json.dumps(key, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -----------------------------------------------------------------------------
# argument handling
# -----------------------------------------------------------------------------

def _parse_sets(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--set expects key=value, got {it!r}")
        k, v = (s.strip() for s in it.split("=", 1))
        if not k:
            raise ConfigError(f"--set expects key=value, got {it!r}")
        out[k] = v
    return out


def build_params(args) -> SystemParams:
    overrides = _parse_sets(args.set)
    if args.exclusion is not None:
        overrides["R_f_exc"] = str(args.exclusion)
    if args.tier_selection:
        overrides["tier_selection"] = "true"
    if args.hopping is not None:
        overrides["hopping_mode"] = args.hopping
    base = reference_params()
    if args.config:
        return load_config(args.config, base=base, overrides=overrides)
    return validate(overrides, base=base) if overrides else base


def build_observer(args, params: SystemParams):
    if args.observer == "macro":
        return MacroObserver(args.theta if args.theta is not None else 0.0)
    sectors = 1 if args.omni else args.sectors
    theta = args.theta if args.theta is not None else 2.0 * math.pi / 3.0
    return FemtoObserver(args.R0 * params.R_c, theta, sectors)


def _grid(text: str | None):
    if not text:
        return DEFAULT_GRID
    if ":" in text:
        a, b, s = (float(x) for x in text.split(":"))
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(a + i * s for i in range(n))
    return tuple(float(x) for x in text.split(","))


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value parameter file")
    p.add_argument("--set", action="append", metavar="K=V", help="override one parameter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
    p.add_argument("--out", default="out", help="output root directory")
    p.add_argument("--method", action="append", choices=("analytic", "montecarlo"))
    p.add_argument("--observer", choices=("macro", "femto"), default=None)
    p.add_argument("--R0", type=float, default=0.5, help="femtocell distance as a fraction of R_c")
    p.add_argument("--theta", type=float, default=None, help="sector start angle (rad)")
    p.add_argument("--omni", action="store_true", help="omnidirectional femtocell antenna")
    p.add_argument("--sectors", type=int, default=3, help="femtocell antenna sectors")
    p.add_argument("--exclusion", type=float, default=None, metavar="R",
                   help="femtocell exclusion radius around each macro BS (m)")
    p.add_argument("--tier-selection", action="store_true")
    p.add_argument("--hopping", choices=("joint", "independent"), default=None)
    p.add_argument("--split-baseline", action="store_true")
    p.add_argument("--moments-cache", metavar="DIR", default=None,
                   help="directory for cached shadowing-moment tables")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twotier", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-dist", help="check interference laws against simulation")
    _common(p)
    p.add_argument("--Nc", type=float, default=24.0)
    p.add_argument("--Nf", type=float, default=50.0)
    p.add_argument("--dump-samples", metavar="PATH")

    p = sub.add_parser("outage", help="single-point outage, analytic and simulated")
    _common(p)
    p.add_argument("--Nc", type=float, required=True)
    p.add_argument("--Nf", type=float, required=True)
    p.add_argument("--dump-samples", metavar="PATH")

    p = sub.add_parser("contour", help="operating contour")
    _common(p)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--grid", default=None, help="start:stop:step or comma list of N_c")
    p.add_argument("--nf-max", type=int, default=500)

    p = sub.add_parser("compare", help="contours of several variants on one grid")
    _common(p)
    p.add_argument("--variant", action="append", metavar="NAME:K=V[,K=V]",
                   help="scenario derived from the base parameters")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--nf-max", type=int, default=500)

    p = sub.add_parser("moments", help="build the shadowing-moment cache")
    _common(p)
    return ap


# -----------------------------------------------------------------------------
# output helpers
# -----------------------------------------------------------------------------

class Output:
    def __init__(self, root, manifest: RunManifest):
        self.manifest = manifest
        self.dir = Path(root) / manifest.hash
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.dir / name
        if str(p) not in self.manifest.outputs:
            self.manifest.outputs.append(str(p))
        return p

    def write_csv(self, name: str, body: str) -> Path:
        p = self.path(name)
        p.write_text(f"# manifest {self.manifest.hash}\n" + body)
        return p

    def write_json(self, name: str, obj) -> Path:
        p = self.path(name)
        obj = {"manifest": self.manifest.hash, **obj}
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return p

    def finish(self, t0: float):
        self.manifest.wall_clock_s = round(time.time() - t0, 3)
        (self.dir / "manifest.json").write_text(
            json.dumps(asdict(self.manifest) | {"hash": self.manifest.hash}, indent=2,
                       sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _features(params: SystemParams) -> dict:
    return {"exclusion": params.R_f_exc, "tier_selection": params.tier_selection,
            "hopping_mode": params.hopping_mode}


def _manifest(args, params, **inputs) -> RunManifest:
    return RunManifest(args.command, params.digest(), [args.seed], _features(params), inputs)


def _dump(path, name: str, samples, multi: bool):
    p = Path(path)
    if multi:
        p = p.with_name(f"{p.stem}_{name}{p.suffix or '.csv'}")
    p.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(p, np.asarray(samples, float), fmt="%.12g")
    return p


def _observer_desc(obs) -> dict:
    if isinstance(obs, MacroObserver):
        return {"kind": "macro", "theta": obs.theta}
    return {"kind": "femto", "R_0": obs.R_0, "theta": obs.theta, "sectors": obs.sectors}


def _methods(args):
    return tuple(dict.fromkeys(args.method or ("analytic", "montecarlo")))


# -----------------------------------------------------------------------------
# subcommands
# -----------------------------------------------------------------------------

def _dist_curve(y, cdf_a, lb, emp):
    lines = ["y,cdf_analytic,ccdf_lb,ccdf_empirical"]
    for row in zip(y, cdf_a, lb, emp):
        lines.append(",".join(f"{v:.10g}" for v in row))
    return "\n".join(lines) + "\n"


def cmd_validate_dist(args) -> int:
    params = build_params(args)
    n = args.reps or 20_000
    moments = estimate_shadow_moments(params, seed=args.seed, cache_dir=args.moments_cache)
    femto = FemtoObserver(args.R0 * params.R_c,
                          args.theta if args.theta is not None else 2 * math.pi / 3,
                          1 if args.omni else args.sectors)
    man = _manifest(args, params, n=n, Nc=args.Nc, Nf=args.Nf, observer=_observer_desc(femto))
    out = Output(args.out, man)
    t0 = time.time()
    report = {"checks": {}, "n": n, "params": params.to_dict()}
    base = dict(replications=n, seed=args.seed, workers=args.workers)
    failures = []
    dumps = {}

    # tier-2 interference at the macro sector: stable law and CF cross-check
    x = sample_interference(ScenarioConfig(params, 0.0, args.Nf, **base), "c_f", n)
    dumps["c_f"] = x
    law = femto_levy(params, args.Nf, moments)
    y = np.quantile(x, np.linspace(0.02, 0.98, 49)) if x.any() else np.linspace(0.1, 10, 49)
    y = np.maximum(y, 1e-12)
    emp, se = empirical_ccdf(x, y)
    eff = effective_intensities(params, 0.0, args.Nf)
    if params.alpha == 4.0 and not law.degenerate:
        ks = float(stats.kstest(x, law.cdf).statistic)
        probe = np.quantile(x, [0.1, 0.5, 0.9])
        cf = cf_inversion_cdf(probe, params.delta, eff.eta_f, params.Q_f, moments.moment)
        gap = float(np.max(np.abs(cf - law.cdf(probe))))
        report["checks"]["c_f"] = {"ks": ks, "cf_gap": gap, "kappa": law.kappa,
                                   "pass": ks < KS_LIMIT and gap < CF_LIMIT}
        if not report["checks"]["c_f"]["pass"]:
            failures.append("c_f")
        lb = no_exclusion_ccdf_lb(y, eff.eta_f, params.Q_f, moments)
        out.write_csv("dist_c_f.csv", _dist_curve(y, law.cdf(y), lb, emp))
    else:
        report["checks"]["c_f"] = {"skipped": "no tier-2 interference or alpha != 4"}

    # tier-2 interference at the femtocell sector
    xf = sample_interference(ScenarioConfig(params, 0.0, args.Nf, femto, **base), "f_f", n)
    dumps["f_f"] = xf
    law_f = femto_levy(params, args.Nf, moments, n_sec=femto.sectors)
    if params.alpha == 4.0 and not law_f.degenerate:
        ks = float(stats.kstest(xf, law_f.cdf).statistic)
        report["checks"]["f_f"] = {"ks": ks, "kappa": law_f.kappa, "pass": ks < KS_LIMIT}
        if ks >= KS_LIMIT:
            failures.append("f_f")
        yf = np.maximum(np.quantile(xf, np.linspace(0.02, 0.98, 49)), 1e-12)
        ef, _ = empirical_ccdf(xf, yf)
        out.write_csv("dist_f_f.csv", _dist_curve(yf, law_f.cdf(yf), law_f.ccdf(yf), ef))

    # tier-1 interference at the femtocell: lower bound validity
    if args.Nc > 0:
        xc = sample_interference(ScenarioConfig(params, args.Nc, 0.0, femto, **base), "f_c", n)
        dumps["f_c"] = xc
        yc = np.logspace(-2, 4, 49)
        ec, sc = empirical_ccdf(xc, yc)
        lbc = femto_cellular_ccdf_lb(yc, femto, params, args.Nc, N_f=args.Nf)
        worst = float(np.max(lbc - (ec + 3 * sc)))
        report["checks"]["f_c"] = {"max_violation": worst, "pass": worst <= 0}
        if worst > 0:
            failures.append("f_c")
        out.write_csv("dist_f_c.csv", _dist_curve(yc, np.full_like(yc, np.nan), lbc, ec))

    # exclusion-region bound at the macro sector
    if params.R_f_exc > 0 and eff.eta_f > 0:
        ye = y
        lbe = exclusion_ccdf_lb(ye, params.R_f_exc, eff.eta_f, params.Q_f, moments)
        worst = float(np.max(lbe - (emp + 3 * se)))
        report["checks"]["exclusion"] = {"max_violation": worst, "pass": worst <= 0}
        if worst > 0:
            failures.append("exclusion")
        out.write_csv("dist_exclusion.csv", _dist_curve(ye, 1.0 - lbe, lbe, emp))

    if args.dump_samples:
        for k, v in dumps.items():
            _dump(args.dump_samples, k, v, multi=True)
    report["failures"] = failures
    out.write_json("dist_report.json", report)
    out.finish(t0)
    print(json.dumps({"manifest": man.hash, "dir": str(out.dir), "failures": failures,
                      "checks": report["checks"]}, default=_jsonable))
    if failures:
        raise ValidationFailure(", ".join(failures))
    return EXIT_OK


def cmd_outage(args) -> int:
    params = build_params(args)
    args.observer = args.observer or "macro"
    obs = build_observer(args, params)
    methods = _methods(args)
    n = args.reps or 20_000
    man = _manifest(args, params, n=n, Nc=args.Nc, Nf=args.Nf, observer=_observer_desc(obs),
                    methods=list(methods))
    out = Output(args.out, man)
    t0 = time.time()
    rec = {"observer": _observer_desc(obs), "N_c": args.Nc, "N_f": args.Nf}
    if "analytic" in methods:
        moments = estimate_shadow_moments(params, seed=args.seed, cache_dir=args.moments_cache)
        if isinstance(obs, MacroObserver):
            ev = Evaluator(Scenario("outage", params, FemtoObserver(0.5 * params.R_c),
                                    macro_theta=obs.theta),
                           seed=args.seed, workers=args.workers, moments_cache=args.moments_cache)
            r = macro_outage(params, args.Nf, args.Nc, ev.fit(args.Nc), moments)
        else:
            r = femto_outage_lb(params, args.Nf, args.Nc, obs, moments)
        rec["p_out_analytic"] = r.p_out
        rec["analytic_kind"] = r.method
        rec["flags"] = sorted(r.flags)
    if "montecarlo" in methods:
        cfg = ScenarioConfig(params, args.Nc, args.Nf, obs, replications=n, seed=args.seed,
                             workers=args.workers)
        est = simulate_outage(cfg)
        rec.update(p_out_mc=est.p_hat, ci_halfwidth=est.ci_halfwidth,
                   n_effective=est.n_effective, component_means=est.component_means)
        if args.dump_samples:
            comps = ("c_out", "c_f") if isinstance(obs, MacroObserver) else ("f_f", "f_c")
            for c in comps:
                _dump(args.dump_samples, c, sample_interference(cfg, c, n), multi=True)
    if "p_out_analytic" in rec and "p_out_mc" in rec:
        rec["gap"] = abs(rec["p_out_analytic"] - rec["p_out_mc"])
    line = json.dumps(rec, sort_keys=True, default=_jsonable)
    (out.path("outage.jsonl")).open("a").write(line + "\n")
    cols = ["N_c", "N_f", "p_out_analytic", "p_out_mc", "ci_halfwidth"]
    csv_body = ",".join(cols) + "\n" + ",".join(
        "" if rec.get(c) is None else f"{rec[c]:.10g}" for c in cols) + "\n"
    out.write_csv("outage.csv", csv_body)
    out.finish(t0)
    print(line)
    return EXIT_OK


def _gnuplot_stub(csv_name: str, scenarios) -> str:
    lines = [
        "# gnuplot script; run: gnuplot -p contour.gp",
        "set datafile separator ','",
        "set xlabel 'N_c (tier-1 users per cell site)'",
        "set ylabel 'N_f (femtocells per cell site)'",
        "set key top right",
        "plot \\",
    ]
    plots = [f"  '< grep \"^{s},.*,{m}$\" {csv_name}' using 2:3 with steps title '{s} ({m})'"
             for s, m in scenarios]
    return "\n".join(lines) + "\n" + ", \\\n".join(plots) + "\n"


def _run_contours(args, scenarios, out: Output, eps, grid):
    contours = []
    for sc in scenarios:
        for m in _methods(args) if args.method else ("analytic",):
            ev = Evaluator(sc, m, reps=args.reps or 20_000, seed=args.seed, workers=args.workers,
                           moments_cache=args.moments_cache)
            c = compute_oc(sc, eps, grid, m, N_f_max=args.nf_max, evaluator=ev)
            contours.append(c)
    out.write_csv("contour.csv", contours_to_csv(contours))
    out.path("contour.json").write_text(
        contour_metadata_json(contours, manifest=out.manifest.hash) + "\n")
    names = list(dict.fromkeys((c.name, c.method) for c in contours))
    out.path("contour.gp").write_text(_gnuplot_stub("contour.csv", names))
    return contours


def cmd_contour(args) -> int:
    params = build_params(args)
    if args.observer == "macro":
        raise ConfigError("contour needs a femtocell observer")
    args.observer = "femto"
    obs = build_observer(args, params)
    eps = args.epsilon if args.epsilon is not None else params.epsilon
    grid = _grid(args.grid)
    man = _manifest(args, params, grid=list(grid), epsilon=eps, observer=_observer_desc(obs),
                    methods=list(_methods(args) if args.method else ("analytic",)),
                    split=args.split_baseline, nf_max=args.nf_max, reps=args.reps)
    out = Output(args.out, man)
    t0 = time.time()
    scenarios = [Scenario("shared", params, obs)]
    if args.split_baseline:
        scenarios.append(baseline_scenario(params, obs))
    contours = _run_contours(args, scenarios, out, eps, grid)
    if args.split_baseline:
        for m in dict.fromkeys(c.method for c in contours):
            blk = [c for c in contours if c.method == m]
            cmp = compare_scenarios([blk[1], blk[0]])
            out.write_csv(f"compare_{m}.csv", f"# {SPLIT_CONVENTION}\n" + cmp.to_csv())
    out.finish(t0)
    print(json.dumps({"manifest": man.hash, "dir": str(out.dir),
                      "points": {f"{c.name}/{c.method}": [[p.N_c, p.N_f] for p in c.points]
                                 for c in contours}}))
    return EXIT_OK


def _variant(spec: str, base: SystemParams):
    if ":" not in spec:
        raise ConfigError(f"--variant expects NAME:K=V[,K=V], got {spec!r}")
    name, body = spec.split(":", 1)
    kv = _parse_sets([s for s in body.split(",") if s.strip()])
    return name.strip(), validate(kv, base=base) if kv else base


def cmd_compare(args) -> int:
    params = build_params(args)
    args.observer = "femto"
    obs = build_observer(args, params)
    eps = args.epsilon if args.epsilon is not None else params.epsilon
    grid = _grid(args.grid)
    variants = [("base", params)] + [_variant(v, params) for v in args.variant or []]
    man = _manifest(args, params, grid=list(grid), epsilon=eps, observer=_observer_desc(obs),
                    variants={n: p.digest() for n, p in variants},
                    methods=list(_methods(args) if args.method else ("analytic",)),
                    split=args.split_baseline, nf_max=args.nf_max, reps=args.reps)
    out = Output(args.out, man)
    t0 = time.time()
    scenarios = []
    if args.split_baseline:
        scenarios.append(baseline_scenario(params, obs))
    scenarios += [Scenario(n, p, obs) for n, p in variants]
    contours = _run_contours(args, scenarios, out, eps, grid)
    for m in dict.fromkeys(c.method for c in contours):
        cmp = compare_scenarios([c for c in contours if c.method == m])
        out.write_csv(f"compare_{m}.csv", cmp.to_csv())
    out.finish(t0)
    print(json.dumps({"manifest": man.hash, "dir": str(out.dir)}))
    return EXIT_OK


def cmd_moments(args) -> int:
    params = build_params(args)
    n = args.reps or 1_000_000
    man = _manifest(args, params, n=n)
    out = Output(args.out, man)
    t0 = time.time()
    m = estimate_shadow_moments(params, n_samples=n, seed=args.seed,
                                cache_dir=args.moments_cache)
    save_moments(out.path("moments.npz"), m)
    summary = {"delta": m.delta, "moment": m.moment, "mean_psi": m.mean_psi,
               "sample_count": m.sample_count, "mean_users": m.mean_users}
    out.write_json("moments.json", summary)
    out.finish(t0)
    print(json.dumps({"manifest": man.hash, **summary}))
    return EXIT_OK


COMMANDS = {"validate-dist": cmd_validate_dist, "outage": cmd_outage, "contour": cmd_contour,
            "compare": cmd_compare, "moments": cmd_moments}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as e:
        print(f"validation failed: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureFailure, NonMonotoneOutage, DegenerateScenario, InsufficientSamples,
            UnsupportedExponent, GridMismatch, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
