"""Command-line entry point.

Subcommands: ``simulate``, ``bifurcation-1d``, ``map-2d`` and ``gspt``.  Each
reads an optional YAML/JSON config file, applies flag overrides on top of it
and writes CSV/JSON files plus a ``manifest.json`` into the output directory.

Exit codes: 0 ok, 2 bad configuration, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, NumericsError, ParameterError
from .io import config_hash, write_csv, write_json, write_trajectory_csv
from .model import PARAM_NAMES, TABLE1, SystemParams

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_IO = 0, 2, 3, 4
CURVE_KINDS = ("pitchfork", "hopf", "snpo", "homoclinic")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "output_dir": "latchvdp-out",
    "params": {},
    "simulate": {
        "t_end": 1e4,
        "rel_tol": 1e-8,
        "abs_tol": 1e-10,
        "max_step": 5.0,
        "method": "explicit",
        "perturbation": [0.0, 0.0, 1.5, 0.0],
        "initial_state": None,
    },
    "bifurcation_1d": {
        "b_range": [0.0, 3.0],
        "T_homoclinic": 1000.0,
        "hopf_amplitude": 1e-2,
        "double_loop_seeds": [0.3, 0.6, 1.0, 1.5],
        "perturbation": [0.0, 0.0, 1.5, 0.0],
        "max_points": 600,
    },
    "map_2d": {
        "a_range": [-1.7, -1.0],
        "b_range": [0.0, 3.0],
        "grid": [36, 61],
        "t_end": 1e4,
        "perturbation": [0.0, 0.0, 1.5, 0.0],
        "curves": list(CURVE_KINDS),
        "homoclinic_period": 3000.0,
        "reference_a": -1.1,
    },
    "gspt": {},
}

COMMAND_BLOCK = {"simulate": "simulate", "bifurcation-1d": "bifurcation_1d",
                 "map-2d": "map_2d", "gspt": "gspt"}


# ---------------------------------------------------------------------------
# configuration

def _check_keys(given: dict, allowed: dict, where: str):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_config(path) -> dict:
    """Read a YAML or JSON file into a dict (JSON is parsed as YAML)."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    return data


def merge_config(user: dict) -> dict:
    """Defaults overlaid with ``user``; unknown keys are rejected."""
    _check_keys(user, DEFAULTS, "config")
    version = user.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in user.items():
        if isinstance(DEFAULTS[key], dict) and key != "params":
            if not isinstance(val, dict):
                raise ConfigError(f"{key} must be a mapping")
            _check_keys(val, DEFAULTS[key], key)
            cfg[key].update(val)
        else:
            cfg[key] = val
    if not isinstance(cfg["params"], dict):
        raise ConfigError("params must be a mapping")
    _check_keys(cfg["params"], {n: 0 for n in (*PARAM_NAMES, "a", "b", "eps", "k")}, "params")
    return cfg


def params_from(cfg: dict) -> SystemParams:
    try:
        return TABLE1.with_(**{k: float(v) for k, v in cfg["params"].items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameter: {exc}") from exc


def _range(val, name):
    try:
        lo, hi = (float(v) for v in val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair of numbers") from exc
    if not hi > lo:
        raise ConfigError(f"{name} is empty: [{lo}, {hi}]")
    return lo, hi


def _vector4(val, name):
    try:
        v = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be four numbers") from exc
    if v.shape != (4,):
        raise ConfigError(f"{name} must be four numbers")
    return v


def apply_overrides(cfg: dict, args) -> dict:
    """Flags win over the file."""
    for name in ("a", "b", "eps", "k"):
        v = getattr(args, name, None)
        if v is not None:
            cfg["params"][name] = v
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    block = cfg[COMMAND_BLOCK[args.command]]
    if args.command == "simulate":
        if args.t_end is not None:
            block["t_end"] = args.t_end
        if args.perturb_x2 is not None:
            pert = list(block["perturbation"])
            pert[2] = args.perturb_x2
            block["perturbation"] = pert
        if args.method is not None:
            block["method"] = args.method
    elif args.command == "bifurcation-1d":
        if args.b_min is not None:
            block["b_range"] = [args.b_min, block["b_range"][1]]
        if args.b_max is not None:
            block["b_range"] = [block["b_range"][0], args.b_max]
    elif args.command == "map-2d":
        if args.grid is not None:
            block["grid"] = list(args.grid)
        if args.curves is not None:
            block["curves"] = [c for c in args.curves.split(",") if c]
        if args.t_end is not None:
            block["t_end"] = args.t_end
    return cfg


def resolved(cfg: dict, command: str) -> dict:
    """The part of the config a command depends on; this is what gets hashed."""
    return {"schema_version": cfg["schema_version"], "command": command,
            "params": params_from(cfg).as_dict(), command: cfg[COMMAND_BLOCK[command]]}


# ---------------------------------------------------------------------------
# commands

class Run:
    """Output bookkeeping for one command invocation."""

    def __init__(self, cfg: dict, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg["output_dir"])
        self.config = resolved(cfg, command)
        self.hash = config_hash(self.config)
        self.files = []

    @property
    def header(self):
        return [f"latchvdp {__version__} {self.command}", f"config_hash {self.hash}"]

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def manifest(self, extra=None):
        from .integrate import BACKEND

        doc = {"command": self.command, "config_hash": self.hash, "config": self.config,
               "version": __version__, "backend": BACKEND, "outputs": sorted(self.files)}
        if extra:
            doc.update(extra)
        write_json(self.out / "manifest.json", doc)


def cmd_simulate(cfg: dict) -> dict:
    from .classify import classify_trajectory
    from .integrate import SolverOptions, detect_period, integrate
    from .model import symmetric_equilibrium

    run = Run(cfg, "simulate")
    blk = cfg["simulate"]
    p = params_from(cfg)
    try:
        opts = SolverOptions(rel_tol=float(blk["rel_tol"]), abs_tol=float(blk["abs_tol"]),
                             max_step=float(blk["max_step"]), t_end=float(blk["t_end"]),
                             method=str(blk["method"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if blk["initial_state"] is not None:
        s0 = _vector4(blk["initial_state"], "initial_state")
    else:
        s0 = symmetric_equilibrium(p) + _vector4(blk["perturbation"], "perturbation")
    traj = integrate(s0, p, opts)
    cls = classify_trajectory(traj, min_duration=opts.t_end)
    period = None
    for coord in ("x1", "x2"):
        try:
            period = detect_period(traj, coord)
        except NumericsError:
            period = None
        if period is not None:
            break
    write_trajectory_csv(run.path("trajectory.csv"), traj, run.header)
    summary = {"classification": cls.tag, "detail": cls.detail, "amp_x1": cls.amp_x1,
               "amp_x2": cls.amp_x2, "period": period, "final_state": traj.final_state,
               "config_hash": run.hash}
    write_json(run.path("summary.json"), summary)
    run.manifest()
    return summary


def cmd_bifurcation_1d(cfg: dict) -> dict:
    from .continuation.core import PALCOptions
    from .continuation.diagram import bifurcation_diagram
    from .continuation.orbits import OrbitOptions

    run = Run(cfg, "bifurcation-1d")
    blk = cfg["bifurcation_1d"]
    b_range = _range(blk["b_range"], "b_range")
    p = params_from(cfg)
    opts = OrbitOptions(palc=PALCOptions(ds=1e-3, ds_max=5e-2, max_points=int(blk["max_points"])),
                        T_homoclinic=float(blk["T_homoclinic"]))
    dg = bifurcation_diagram(p, b_range, opts, tuple(blk["double_loop_seeds"]),
                             float(blk["hopf_amplitude"]), _vector4(blk["perturbation"], "perturbation"))
    branches = {}
    for label, br in dg.equilibria.items():
        br.to_csv(run.path(f"branch_{label}.csv"), run.header)
        branches[label] = {"type": "equilibrium", "points": len(br.points)}
    for label, br in dg.orbits.items():
        br.to_csv(run.path(f"branch_{label}.csv"), run.header)
        branches[label] = {"type": "periodic", "points": len(br.orbits), "stop_reason": br.stop_reason}
    records = sorted((bp.to_record() for bp in dg.detected),
                     key=lambda r: (r["branch"], r["location"].get("b", 0.0)))
    for r in records:
        r["diagnostics"] = {k: v for k, v in r["diagnostics"].items() if not k.endswith("tangent")}
    doc = {"config_hash": run.hash, "bifurcations": records, "branches": branches, "notes": dg.notes}
    write_json(run.path("bifurcations.json"), doc)
    run.manifest()
    return doc


def cmd_map_2d(cfg: dict) -> dict:
    from .classify import default_threads, sweep
    from .continuation.curves import DEFAULT_BOX
    from .continuation.diagram import overlay_curves
    from .integrate import SolverOptions

    run = Run(cfg, "map-2d")
    blk = cfg["map_2d"]
    a_range = _range(blk["a_range"], "a_range")
    b_range = _range(blk["b_range"], "b_range")
    try:
        na, nb = (int(v) for v in blk["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("grid must be two integers") from exc
    unknown = sorted(set(blk["curves"]) - set(CURVE_KINDS))
    if unknown:
        raise ConfigError(f"unknown curve kind(s): {', '.join(unknown)}")
    p = params_from(cfg)
    pert = _vector4(blk["perturbation"], "perturbation")
    try:
        cmap = sweep(a_range, b_range, (na, nb), SolverOptions(t_end=float(blk["t_end"])), p, pert,
                     threads=default_threads())
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    cmap.to_csv(run.path("map.csv"), run.header)
    curves = {}
    if blk["curves"]:
        box = dict(DEFAULT_BOX, a=a_range, b=b_range)
        found = overlay_curves(p.with_(a=float(blk["reference_a"])), tuple(blk["curves"]), box,
                               float(blk["homoclinic_period"]), perturbation=pert)
        for name, c in found.items():
            if name == "_notes":
                continue
            c.to_csv(run.path(f"curve_{name}.csv"), run.header)
            curves[name] = {"kind": c.kind, "points": len(c.points),
                            "folds": [f["params"] for f in c.folds], "stop_reasons": list(c.stop_reasons)}
        notes = found.get("_notes", [])
    else:
        notes = []
    summary = cmap.summary()
    summary.update({"config_hash": run.hash, "curves": curves, "notes": notes})
    write_json(run.path("map_summary.json"), summary)
    run.manifest()
    return summary


def cmd_gspt(cfg: dict) -> dict:
    from .gspt import CSV_HEADER, find_folded_singularities

    run = Run(cfg, "gspt")
    p = params_from(cfg)
    sing = find_folded_singularities(p)
    write_csv(run.path("folded_singularities.csv"), CSV_HEADER, (s.csv_row() for s in sing), run.header)
    run.manifest()
    return {"count": len(sing), "kinds": [s.kind for s in sing]}


COMMANDS = {"simulate": cmd_simulate, "bifurcation-1d": cmd_bifurcation_1d,
            "map-2d": cmd_map_2d, "gspt": cmd_gspt}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latchvdp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"latchvdp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--output-dir", "-o", help="directory for output files")
        for name in ("a", "b", "eps", "k"):
            sp.add_argument(f"--{name}", type=float, help=f"set {name} for both oscillators")
        return sp

    s = common(sub.add_parser("simulate", help="integrate one trajectory and classify it"))
    s.add_argument("--t-end", type=float)
    s.add_argument("--perturb-x2", type=float, help="x2 offset of the initial state from E0")
    s.add_argument("--method", choices=("explicit", "implicit"))

    s = common(sub.add_parser("bifurcation-1d", help="continuation in b at fixed a"))
    s.add_argument("--b-min", type=float)
    s.add_argument("--b-max", type=float)

    s = common(sub.add_parser("map-2d", help="classification map with bifurcation curves"))
    s.add_argument("--grid", type=int, nargs=2, metavar=("NA", "NB"))
    s.add_argument("--curves", help="comma-separated subset of " + ",".join(CURVE_KINDS) + " (empty for none)")
    s.add_argument("--t-end", type=float)

    common(sub.add_parser("gspt", help="folded singularities of the singular limit"))
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    try:
        user = load_config(args.config) if args.config else {}
        cfg = apply_overrides(merge_config(user), args)
        params_from(cfg)
        result = COMMANDS[args.command](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"command": args.command, "output_dir": str(cfg["output_dir"])}, sort_keys=True))
    return EXIT_OK if result is not None else EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
