"""Command-line surface: configuration ingestion, reproducible exports, and a
run manifest next to every output.

Exit codes: 0 success, 2 configuration error, 3 unreachable or infeasible
request, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .device import ConfigurationError, DeviceConfig, ParticleSpec, coefficients
from .dynamics import InvalidModeError, integrate
from .equilibria import Region, assignable_equilibria, coords_key, locate_roa
from .graph import (
    InternalInvariantError,
    UnreachableError,
    build_basin_graph,
    discover_transit_edges,
    graph_to_dot,
    graph_to_json_dict,
    plan_route,
    scc_decompose,
    scc_to_json_dict,
)
from .localctrl import grid_sweep, sample_sweep, sweep_to_csv, sweep_to_svg
from .relaxation import MixSignal, approximation_error, simulate_mixed

COMMANDS = ("simulate", "equilibria", "graph", "plan", "localctrl", "relax")

DEFAULTS: dict = {
    "device": {
        "channel_height_um": 800.0,
        "viscosity_pa_s": 1.0e-3,
        "acoustic_energy_j_m3": 1.0,
        "radii_um": [1.0, 2.0],
        "contrast_factors": None,
        "explicit_coefficients": None,
        "mode_count": 5,
    },
    "seed": 0,
    "threads": None,
    "out_dir": "out",
    "formats": ["json", "csv", "dot"],
    "simulate": {"x0": [0.3, 0.05], "schedule": [[3, 2.0]], "weights": None, "dt": 1.0e-4},
    "equilibria": {"region": None},
    "graph": {
        "region": None,
        "transit": False,
        "transit_modes": None,
        "horizon": None,
        "refine": True,
    },
    "plan": {"source": None, "target": None, "tolerance": 1.0e-6, "transit": False},
    "localctrl": {
        "sweep": "grid",
        "spacing_um": 5.0,
        "samples": 3000,
        "particle_count": 2,
        "radius_range_um": [1.0, 2.0],
    },
    "relax": {
        "x0": [0.2, 0.3],
        "weights": [0.4, 0.3, 0.3],
        "dt": 1.0e-3,
        "horizon": 0.5,
        "period": 0.02,
        "halvings": 3,
    },
}


class ConfigError(ValueError):
    """Invalid run configuration (bad value, unknown key, broken schema)."""


def _merge(defaults, override, path=""):
    """Defaults updated by override with unknown keys rejected."""
    if not isinstance(override, dict):
        raise ConfigError(f"expected an object at '{path or '<root>'}'")
    out = {}
    for key, dval in defaults.items():
        if key in override and isinstance(dval, dict) and dval:
            out[key] = _merge(dval, override[key], f"{path}{key}.")
        elif key in override:
            out[key] = override[key]
        else:
            out[key] = dval
    unknown = set(override) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key '{path}{sorted(unknown)[0]}'")
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    file_cfg = {}
    if path is not None:
        try:
            file_cfg = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} line {exc.lineno}: {exc.msg}")
    cfg = _merge(DEFAULTS, file_cfg)
    cfg = _merge(cfg, overrides)
    return cfg


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse '{text}' as a rational number")


def parse_region(spec, n: int) -> Region | None:
    """Region grammar: 'lo:hi,lo:hi[,below-diagonal]' with rational bounds."""
    if spec is None:
        return None
    parts = [p.strip() for p in str(spec).split(",")]
    below = False
    if parts and parts[-1] == "below-diagonal":
        below = True
        parts = parts[:-1]
    if len(parts) != n:
        raise ConfigError(f"region needs {n} axis ranges, got {len(parts)}")
    bounds = []
    for part in parts:
        if ":" not in part:
            raise ConfigError(f"malformed region range '{part}' (want lo:hi)")
        lo, hi = part.split(":", 1)
        flo, fhi = parse_fraction(lo), parse_fraction(hi)
        if not flo < fhi:
            raise ConfigError(f"empty region range '{part}'")
        bounds.append((flo, fhi))
    return Region(bounds=tuple(bounds), below_diagonal=below)


def parse_coords(text: str) -> tuple[Fraction, ...]:
    return tuple(parse_fraction(p) for p in str(text).split(","))


def build_device(cfg: dict) -> DeviceConfig:
    d = cfg["device"]
    radii = d["radii_um"]
    contrasts = d["contrast_factors"] or [1.0] * len(radii)
    explicit = d["explicit_coefficients"] or [None] * len(radii)
    if not (len(radii) == len(contrasts) == len(explicit)):
        raise ConfigError("device particle lists must have equal length")
    particles = tuple(
        ParticleSpec(radius_um=float(r), contrast_factor=float(c), explicit_coefficient=e)
        for r, c, e in zip(radii, contrasts, explicit)
    )
    return DeviceConfig(
        channel_height_um=float(d["channel_height_um"]),
        viscosity_pa_s=float(d["viscosity_pa_s"]),
        acoustic_energy_j_m3=float(d["acoustic_energy_j_m3"]),
        particles=particles,
        mode_count=int(d["mode_count"]),
    )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Emitter:
    def __init__(self, out_dir: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text)
        self.written.append(path)
        print(f"wrote {path}")
        return path

    def write_json(self, name: str, payload) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def manifest(self, command: str, cfg: dict, started: float) -> None:
        payload = {
            "tool": {"name": "modegraph", "version": __version__},
            "command": command,
            "config": cfg,
            "seed": cfg.get("seed"),
            "wall_clock_s": time.time() - started,
            "outputs": {p.name: _sha256(p) for p in self.written},
        }
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


def trajectory_csv(traj) -> str:
    n = traj.states.shape[1]
    lines = ["t," + ",".join(f"x{i + 1}" for i in range(n))]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: dict, emit: Emitter) -> int:
    sim = cfg["simulate"]
    device = build_device(cfg)
    A = coefficients(device)
    x0 = np.asarray(sim["x0"], dtype=float)
    if x0.size != device.n:
        raise ConfigError(f"simulate.x0 needs {device.n} coordinates, got {x0.size}")
    if np.any(x0 < 0) or np.any(x0 > 1):
        raise ConfigError("simulate.x0 coordinates must lie in [0, 1]")
    dt = float(sim["dt"])
    if dt <= 0:
        raise ConfigError("simulate.dt must be positive")
    if sim["weights"] is not None:
        weights = [float(w) for w in sim["weights"]]
        horizon = float(sum(d for _, d in sim["schedule"])) if sim["schedule"] else 1.0
        try:
            signal = MixSignal.constant(weights, horizon)
        except ValueError as exc:
            raise ConfigError(f"simulate.weights: {exc}")
        traj = simulate_mixed(x0, signal, A, dt)
    else:
        schedule = []
        for entry in sim["schedule"]:
            try:
                u, dur = entry
            except (TypeError, ValueError):
                raise ConfigError(f"simulate.schedule entries are [mode, duration], got {entry!r}")
            if int(u) != u or u < 1:
                raise ConfigError(f"simulate.schedule: mode must be a positive integer, got {u}")
            if dur < 0:
                raise ConfigError(f"simulate.schedule: durations must be non-negative, got {dur}")
            schedule.append((int(u), float(dur)))
        traj = integrate(x0, schedule, A, dt)
    emit.write_text("trajectory.csv", trajectory_csv(traj))
    emit.write_json(
        "endpoint.json",
        {
            "x0": [float(v) for v in x0],
            "final": [float(v) for v in traj.final_state],
            "samples": int(traj.times.size),
        },
    )
    return 0


def cmd_equilibria(cfg: dict, emit: Emitter) -> int:
    device = build_device(cfg)
    region = parse_region(cfg["equilibria"]["region"], device.n)
    nodes = assignable_equilibria(device.mode_count, device.n, region)
    emit.write_json(
        "equilibria.json",
        {
            "max_mode": device.mode_count,
            "particles": device.n,
            "count": len(nodes),
            "nodes": [
                {
                    "id": node.key,
                    "coords": [str(c) for c in node.coords],
                    "witnesses": sorted([k, list(idx)] for k, idx in node.witnesses),
                }
                for node in nodes
            ],
        },
    )
    return 0


def _graph_from_config(cfg: dict):
    device = build_device(cfg)
    gc = cfg["graph"]
    region = parse_region(gc["region"], device.n)
    g = build_basin_graph(device.mode_count, device.n, region)
    if gc["transit"]:
        A = coefficients(device)
        modes = gc["transit_modes"] or list(range(1, device.mode_count + 1))
        modes = [int(u) for u in modes]
        if any(u < 1 for u in modes):
            raise ConfigError("graph.transit_modes must be positive integers")
        edges = discover_transit_edges(
            g, A, transit_modes=modes, horizon=gc["horizon"], refine=bool(gc["refine"])
        )
        g = g.extended(edges)
    return device, g


def cmd_graph(cfg: dict, emit: Emitter) -> int:
    _, g = _graph_from_config(cfg)
    decomposition = scc_decompose(g)
    formats = cfg["formats"]
    if "dot" in formats:
        emit.write_text("graph.dot", graph_to_dot(g))
    if "json" in formats:
        emit.write_json("graph.json", graph_to_json_dict(g))
        emit.write_json("scc.json", scc_to_json_dict(decomposition))
    print(f"nodes={len(g.nodes)} edges={len(g.edges)} components={decomposition.count}")
    return 0


def cmd_plan(cfg: dict, emit: Emitter) -> int:
    pc = cfg["plan"]
    if pc["source"] is None or pc["target"] is None:
        raise ConfigError("plan needs plan.source and plan.target coordinates")
    cfg = dict(cfg)
    cfg["graph"] = dict(cfg["graph"])
    cfg["graph"]["transit"] = bool(pc["transit"]) or cfg["graph"]["transit"]
    device, g = _graph_from_config(cfg)
    src = parse_coords(pc["source"])
    dst = parse_coords(pc["target"])
    if src not in g.nodes:
        raise ConfigError(f"plan.source {pc['source']} is not a graph node")
    if dst not in g.nodes:
        raise ConfigError(f"plan.target {pc['target']} is not a graph node")
    A = coefficients(device)
    schedule = plan_route(g, src, dst, A, tolerance=float(pc["tolerance"]))
    endpoint = schedule.execute(np.array([float(c) for c in src]), A)
    emit.write_json(
        "schedule.json",
        {
            "source": coords_key(src),
            "target": coords_key(dst),
            "tolerance": schedule.tolerance,
            "steps": [[u, d] for u, d in schedule.steps],
            "endpoint": [float(v) for v in endpoint],
        },
    )
    return 0


def cmd_localctrl(cfg: dict, emit: Emitter) -> int:
    lc = cfg["localctrl"]
    device = build_device(cfg)
    threads = int(cfg["threads"] or 1)
    if lc["sweep"] == "grid":
        result = grid_sweep(device, device.mode_count, float(lc["spacing_um"]), threads=threads)
    elif lc["sweep"] == "sample":
        result = sample_sweep(
            int(lc["particle_count"]),
            device.mode_count,
            int(lc["samples"]),
            seed=int(cfg["seed"]),
            radius_range_um=tuple(float(v) for v in lc["radius_range_um"]),
            threads=threads,
        )
    else:
        raise ConfigError(f"localctrl.sweep must be 'grid' or 'sample', got {lc['sweep']!r}")
    formats = cfg["formats"]
    if "json" in formats:
        emit.write_json("sweep.json", result.summary_dict())
    if "csv" in formats:
        emit.write_text("sweep.csv", sweep_to_csv(result))
    if "svg" in formats and lc["sweep"] == "grid" and device.n == 2:
        emit.write_text("sweep.svg", sweep_to_svg(result))
    print(f"controllable {result.controllable}/{result.total} = {result.percentage:.3f}%")
    return 0


def cmd_relax(cfg: dict, emit: Emitter) -> int:
    rc = cfg["relax"]
    device = build_device(cfg)
    A = coefficients(device)
    x0 = np.asarray(rc["x0"], dtype=float)
    if x0.size != device.n:
        raise ConfigError(f"relax.x0 needs {device.n} coordinates, got {x0.size}")
    try:
        signal = MixSignal.constant([float(w) for w in rc["weights"]], float(rc["horizon"]))
    except ValueError as exc:
        raise ConfigError(f"relax.weights: {exc}")
    dt = float(rc["dt"])
    if dt <= 0:
        raise ConfigError("relax.dt must be positive")
    traj = simulate_mixed(x0, signal, A, dt)
    emit.write_text("mixed_trajectory.csv", trajectory_csv(traj))
    period = float(rc["period"])
    if period <= 0:
        raise ConfigError("relax.period must be positive")
    report = []
    for h in range(int(rc["halvings"]) + 1):
        p = period / 2**h
        err = approximation_error(x0, signal, A, p, dt=min(dt, p / 10.0))
        report.append({"period": p, "sup_error": err})
    emit.write_json("error_vs_period.json", report)
    return 0


HANDLERS = {
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "graph": cmd_graph,
    "plan": cmd_plan,
    "localctrl": cmd_localctrl,
    "relax": cmd_relax,
}


def _flag_overrides(args) -> dict:
    over: dict = {}
    device: dict = {}
    if args.modes is not None:
        device["mode_count"] = args.modes
    if args.particles is not None:
        try:
            device["radii_um"] = [float(v) for v in args.particles.split(",")]
        except ValueError:
            raise ConfigError(f"--particles wants comma-separated radii in um, got {args.particles!r}")
    if device:
        over["device"] = device
    if args.out is not None:
        over["out_dir"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.threads is not None:
        over["threads"] = args.threads
    if args.format is not None:
        over["formats"] = [f.strip() for f in args.format.split(",")]
    if args.spacing is not None:
        over.setdefault("localctrl", {})["spacing_um"] = args.spacing
    if args.samples is not None:
        over.setdefault("localctrl", {})["samples"] = args.samples
    if args.region is not None:
        over.setdefault("graph", {})["region"] = args.region
        over.setdefault("equilibria", {})["region"] = args.region
    return over


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modegraph",
        description="Controllability analysis of 1-D multi-mode acoustic particle manipulation",
    )
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, metavar="INT")
    parser.add_argument("--modes", type=int, metavar="N", help="mode budget N")
    parser.add_argument("--particles", metavar="LIST", help="comma-separated radii in um")
    parser.add_argument("--spacing", type=float, metavar="UM", help="grid spacing in um")
    parser.add_argument("--samples", type=int, metavar="INT")
    parser.add_argument("--region", metavar="SPEC", help="lo:hi,lo:hi[,below-diagonal]")
    parser.add_argument("--format", metavar="LIST", help="comma list from csv,json,dot,svg")
    parser.add_argument("--threads", type=int, metavar="INT",
                        help="worker processes for sweeps (overrides MODEGRAPH_THREADS)")
    parser.add_argument("command", choices=COMMANDS)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config, _flag_overrides(args))
        if cfg["threads"] is None:
            cfg["threads"] = int(os.environ.get("MODEGRAPH_THREADS", "1"))
        bad = [f for f in cfg["formats"] if f not in ("csv", "json", "dot", "svg")]
        if bad:
            raise ConfigError(f"unknown output format {bad[0]!r}")
        emit = Emitter(cfg["out_dir"])
        code = HANDLERS[args.command](cfg, emit)
        emit.manifest(args.command, cfg, started)
        return code
    except (ConfigError, ConfigurationError, InvalidModeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnreachableError as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return 3
    except InternalInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
