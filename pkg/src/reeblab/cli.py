"""Command-line front end.

Usage::

    reeblab --config run.json --out results/ [--threads N] [--verbose]

Exit status: 0 success, 2 configuration or precondition error, 3 numerical
failure, 4 inconclusive criterion verdict.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("reeblab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 2, 3, 4

TOP_KEYS = {"command", "model", "params", "seed", "output_dir"}
STOCHASTIC = {"model", "orbits", "rotnum", "criterion", "entropy"}

DEFAULTS = {
    "model": {"n_samples": 1000, "tol": 1e-8, "helicity_samples": 20000},
    "orbits": {"n_seeds": 200, "T_max": 5.0, "tol": 1e-11, "dedup_tol": 1e-4, "K_max": 20},
    "rotnum": {"n_seeds": 50, "T_max": 5.0, "classes": [[0.0, 1.0]], "horizon_periods": 16,
               "tol": 1e-6},
    "linking": {"n_list": [10, 100, 1000], "mesh": None},
    "liouville": {"n_list": [10, 100, 1000], "open_set": True},
    "criterion": {"n_orbits": 50, "n_segments": 20, "segment_duration": 10 * math.pi,
                  "recurrence_window": 1.0, "margin": 1e-4, "negate": False, "scale": 1.0,
                  "levels": [0.0, 1 / 3, 2 / 3], "n_test_points": 100, "t_cap": 10.0},
    "entropy": {"system": "cat_map", "T_list": [x / 2 for x in range(1, 15)],
                "eps_list": [0.4, 0.3, 0.2], "cloud_side": 64, "cloud_size": 400,
                "dt": 0.25, "saturation": 0.1},
    "lift": {"z0": [0.01, 0.0], "eps": 0.05, "n_grid": 41},
}


class ConfigError(ValueError):
    pass


class Inconclusive(Exception):
    def __init__(self, report):
        super().__init__("criterion verdict INCONCLUSIVE")
        self.report = report


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def validate_config(cfg) -> dict:
    """Check keys and fill parameter defaults; raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(cfg) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    cmd = cfg.get("command")
    if cmd not in DEFAULTS:
        raise ConfigError(f"unknown command {cmd!r}; expected one of {sorted(DEFAULTS)}")
    if cmd in STOCHASTIC and "seed" not in cfg:
        raise ConfigError(f"command {cmd!r} needs a seed")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if cmd != "entropy" and cmd != "lift" and "model" not in cfg:
        raise ConfigError(f"command {cmd!r} needs a model")
    params = dict(cfg.get("params") or {})
    bad = sorted(set(params) - set(DEFAULTS[cmd]))
    if bad:
        raise ConfigError(f"unknown parameter(s) for {cmd}: {', '.join(bad)}")
    out = dict(cfg)
    out["params"] = {**DEFAULTS[cmd], **params}
    return out


# -- output helpers ------------------------------------------------------------


class Writer:
    def __init__(self, out_dir: Path, header: dict):
        self.out_dir = out_dir
        self.header = header
        out_dir.mkdir(parents=True, exist_ok=True)

    def json(self, name, payload):
        data = {"header": self.header, **payload}
        (self.out_dir / name).write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")

    def csv(self, name, rows, columns):
        buf = io.StringIO()
        for k in sorted(self.header):
            buf.write(f"# {k}: {self.header[k]}\n")
        w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _plain(r.get(k)) for k in columns})
        (self.out_dir / name).write_text(buf.getvalue())


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# -- commands --------------------------------------------------------------------


def _model(cfg):
    from .geometry import make_model
    return make_model(cfg["model"])


def cmd_model(cfg, P, out, threads):
    from .geometry import helicity, helicity_oracle, verify_contact
    M = _model(cfg)
    rep = verify_contact(M, P["n_samples"], P["tol"], seed=cfg["seed"])
    payload = {"model": M.descriptor(), "verify_contact": rep}
    if M.is_closed:
        est, se = helicity(M, P["helicity_samples"], cfg["seed"])
        payload["helicity"] = {"estimate": est, "standard_error": se, "oracle": helicity_oracle(M)}
    out.json("model.json", payload)
    return EXIT_OK


def _find_orbits(cfg, P, threads):
    from .dynamics import find_periodic_orbits
    M = _model(cfg)
    seeds = M.sample_points(P["n_seeds"], np.random.default_rng(cfg["seed"]))
    return M, find_periodic_orbits(M, seeds, P["T_max"], tol=P.get("tol", 1e-11),
                                   dedup_tol=P.get("dedup_tol", 1e-4),
                                   K_max=P.get("K_max", 20), threads=threads)


def cmd_orbits(cfg, P, out, threads):
    M, orbits = _find_orbits(cfg, {**P}, threads)
    out.json("orbits.json", {"orbits": [o.to_json() for o in orbits], "count": len(orbits),
                             "note": f"nondegeneracy checked up to K_max = {P['K_max']} iterates"})
    return EXIT_OK


def cmd_rotnum(cfg, P, out, threads):
    from .blowup import build_tubular_frame, rotation_number
    M, orbits = _find_orbits(cfg, {**P, "tol": 1e-11}, threads)
    rows = []
    for i, orb in enumerate(orbits):
        fr = build_tubular_frame(M, orb)
        for p, q in P["classes"]:
            res = rotation_number(fr, (p, q), horizon=P["horizon_periods"] * orb.period, tol=P["tol"])
            rows.append(res.to_json(orbit_id=i))
    out.json("rotnum.json", {"rows": rows})
    return EXIT_OK


def cmd_linking(cfg, P, out, threads):
    from .fixtures import hopf_fibers, load_hopf_disk, reference_fiber
    from .measures import WeightedOrbitMeasure, action_linking_report
    from .seifert import SeifertMesh
    M = _model(cfg)
    if M.model_id != "round_sphere":
        raise ConfigError("the linking fixture lives on round_sphere")
    mesh = SeifertMesh.load(P["mesh"]) if P["mesh"] else load_hopf_disk()
    seq = [WeightedOrbitMeasure.uniform(hopf_fibers(n, M)) for n in P["n_list"]]
    rows = action_linking_report(seq, mesh, M, [reference_fiber(M)], labels=P["n_list"])
    out.csv("action_linking.csv", rows, ["n", "quantity", "value", "target", "gap"])
    out.json("action_linking.json", {"rows": rows})
    return EXIT_OK


def cmd_liouville(cfg, P, out, threads):
    from .fixtures import hopf_fibers, open_set_tests, smooth_test_functions
    from .measures import WeightedOrbitMeasure, boundary_mass, max_errors, weakstar_report
    M = _model(cfg)
    if M.model_id != "round_sphere":
        raise ConfigError("the fiber sequences live on round_sphere")
    seq = [WeightedOrbitMeasure.uniform(hopf_fibers(n, M)) for n in P["n_list"]]
    rows = weakstar_report(M, seq, smooth_test_functions(), labels=P["n_list"])
    payload = {"max_error": max_errors(rows)}
    out.csv("weakstar.csv", rows, ["n", "function", "value", "target", "error"])
    if P["open_set"]:
        tests = open_set_tests()
        orows = weakstar_report(M, seq, tests, labels=P["n_list"])
        out.csv("weakstar_open.csv", orows, ["n", "function", "value", "target", "error"])
        payload["open_set_max_error"] = max_errors(orows)
        payload["boundary_mass"] = {t.name: boundary_mass(M, t) for t in tests}
    out.json("weakstar.json", payload)
    return EXIT_OK


def cmd_criterion(cfg, P, out, threads):
    from .fixtures import hopf_fibers, reference_fiber
    from .measures import CohomologyClass, WeightedOrbitMeasure, liouville_sample, make_segments
    from .sfs import INCONCLUSIVE, build_pr_map, check_criterion, dump_lp, search_positive_class
    from .sfs import section_diagnostics
    M = _model(cfg)
    if M.model_id != "round_sphere":
        raise ConfigError("the criterion fixture lives on round_sphere")
    rng = np.random.default_rng(cfg["seed"])
    h = reference_fiber(M)
    y = CohomologyClass.linking_dual(M, [h])
    mus = [WeightedOrbitMeasure.uniform([f]) for f in hopf_fibers(P["n_orbits"], M)]
    segs = make_segments(M, liouville_sample(M, P["n_segments"], rng), P["segment_duration"],
                         recurrence_window=P["recurrence_window"], seed=cfg["seed"])
    yc = (-P["scale"] if P["negate"] else P["scale"]) * y
    rep = check_criterion(M, [h], yc, mus, segs, margin=P["margin"])
    payload = {"report": rep.to_json()}
    lp, _ = search_positive_class(M, [h], [y, -y], mus + segs, margin=P["margin"])
    payload["lp"] = {**lp.to_json(), "certified": lp.certified}
    dump_lp(lp.rows, out.out_dir / "lp_instance.json")
    if rep.verdict != INCONCLUSIVE and not P["negate"]:
        cand = build_pr_map(M, yc, [0.0, 0.0, 1.0, 0.0])
        pts = liouville_sample(M, P["n_test_points"], rng)
        pts = pts[cand.eta.distance_to_link(pts) > 0.05]
        diag = section_diagnostics(M, cand, P["levels"], pts, P["t_cap"], seed=cfg["seed"])
        payload["diagnostics"] = {k: v for k, v in diag.items() if k != "levels"}
    out.json("criterion.json", payload)
    if rep.verdict == INCONCLUSIVE:
        raise Inconclusive(payload)
    return EXIT_OK


def cmd_entropy(cfg, P, out, threads):
    from .entropy import CatMapSuspension, ReebSystem, entropy_estimate
    rng = np.random.default_rng(cfg["seed"])
    if P["system"] == "cat_map":
        system = CatMapSuspension()
        cloud = system.sample_cloud(P["cloud_side"], rng)
    elif P["system"] == "reeb":
        system = ReebSystem(_model(cfg))
        cloud = system.sample_cloud(P["cloud_size"], rng)
    else:
        raise ConfigError(f"unknown entropy system {P['system']!r}")
    est = entropy_estimate(system, P["T_list"], P["eps_list"], cloud, seed=cfg["seed"],
                           dt=P["dt"], saturation=P["saturation"])
    out.csv("entropy.csv", est.csv_rows(), ["T", "eps", "N", "logN_over_T"])
    out.json("entropy.json", est.to_json())
    return EXIT_OK


def cmd_lift(cfg, P, out, threads):
    from .liftaxiom import build_lift, verify_lift
    pert = build_lift(P["z0"], P["eps"])
    rep = verify_lift(pert, n_grid=P["n_grid"])
    out.json("lift.json", rep)
    return EXIT_OK


COMMANDS = {"model": cmd_model, "orbits": cmd_orbits, "rotnum": cmd_rotnum,
            "linking": cmd_linking, "liouville": cmd_liouville, "criterion": cmd_criterion,
            "entropy": cmd_entropy, "lift": cmd_lift}


def _numeric_errors():
    from ._rk import IntegrationError
    from .blowup import FrameError, NotConverged
    from .liftaxiom import LiftError
    from .seifert import UnresolvedCrossing
    from .sfs import LPError
    return (IntegrationError, FrameError, NotConverged, LiftError, UnresolvedCrossing, LPError,
            FloatingPointError, np.linalg.LinAlgError)


def run(cfg: dict, out_dir, threads: int = 1) -> int:
    """Execute a configuration; returns the exit status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    err_writer = Writer(out_dir, {"tool": "reeblab", "version": __version__})
    try:
        cfg = validate_config(cfg)
    except ConfigError as exc:
        err_writer.json("error.json", {"error": "config", "message": str(exc)})
        log.error("%s", exc)
        return EXIT_CONFIG
    env_seed = os.environ.get("REEBLAB_SEED")
    seed_source = "config"
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            err_writer.json("error.json", {"error": "config", "message": "REEBLAB_SEED must be an integer"})
            return EXIT_CONFIG
        seed_source = "REEBLAB_SEED"
        log.warning("seed overridden by REEBLAB_SEED=%s", env_seed)
    header = {"tool": "reeblab", "version": __version__, "command": cfg["command"],
              "config_hash": config_hash(cfg), "seed": cfg.get("seed"), "seed_source": seed_source}
    writer = Writer(out_dir, header)
    try:
        return COMMANDS[cfg["command"]](cfg, cfg["params"], writer, threads)
    except Inconclusive:
        return EXIT_INCONCLUSIVE
    except _numeric_errors() as exc:
        writer.json("error.json", {"error": "numerical", "type": type(exc).__name__, "message": str(exc)})
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        writer.json("error.json", {"error": "precondition", "type": type(exc).__name__,
                                   "message": str(exc)})
        log.error("precondition failure: %s", exc)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reeblab", description=__doc__.split("\n")[0])
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: config output_dir or .)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads for the orbit search")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"reeblab {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        out = Path(args.out or ".")
        Writer(out, {"tool": "reeblab", "version": __version__}).json(
            "error.json", {"error": "config", "message": f"cannot read config: {exc}"})
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    out = args.out or (cfg.get("output_dir") if isinstance(cfg, dict) else None) or "."
    return run(cfg, out, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
