"""Command-line entry point.

    interfacemap map-infinite --config problem.json --out out/
    interfacemap validate --seed 3

Traces are written as ``trace.csv`` (``t,interface,u,ux,flux``; one row per time
and interface, interface given by its position in the config's coordinates)
next to a ``diagnostics.json`` sidecar.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .assembly import det_scan
from .closedform import closed_form_trace
from .config import COMMANDS, RunConfig, load_config, parse_times, random_problem
from .contour import ContourSpec, InterfaceTrace, adapt_R, default_spec, enclosed_zeros, interface_map
from .domain import normalize_problem
from .errors import ConfigError, InterfaceMapError
from .fd import FdGrid, compare_traces, fd_solve, write_snapshots_csv

LOGGER = logging.getLogger("interfacemap")

__all__ = ["main", "run", "build_parser", "write_trace_csv"]


def write_trace_csv(path, trace: InterfaceTrace):
    path = Path(path)
    pos = trace.original_positions
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "interface", "u", "ux", "flux"])
        flux = trace.flux
        for i, t in enumerate(trace.times):
            for j, x in enumerate(pos):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(trace.u[i, j])),
                            repr(float(trace.ux[i, j])), repr(float(flux[i, j]))])
    return path


def _write_boundary_csv(path, trace: InterfaceTrace):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "end", "u", "ux"])
        for i, t in enumerate(trace.times):
            for k, end in enumerate(("left", "right")):
                w.writerow([repr(float(t)), end, repr(float(trace.boundary_u[i, k])),
                            repr(float(trace.boundary_ux[i, k]))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _emit(out: Path, trace: InterfaceTrace, extra: dict):
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", trace)
    if trace.boundary_u is not None:
        _write_boundary_csv(out / "boundary.csv", trace)
    diag = {"diagnostics": trace.diagnostics, **extra}
    (out / "diagnostics.json").write_text(json.dumps(_jsonable(diag), indent=2, sort_keys=True) + "\n")


def _map(cfg: RunConfig, kind: str | None = None) -> InterfaceTrace:
    finite = cfg.problem.domain.is_finite
    if kind == "infinite" and finite or kind == "finite" and not finite:
        raise ConfigError(f"map-{kind} needs a {kind} domain")
    return interface_map(cfg.problem, cfg.times, **cfg.contour_overrides())


def _report(name, rep, tol, stream):
    ok = rep.within(tol)
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: worst {rep.worst():.3e} (tolerance {tol:g})", file=stream)
    for line in rep.lines():
        print("    " + line, file=stream)
    return ok


def run(cfg: RunConfig, command: str, out: Path, stream=None) -> int:
    stream = stream or sys.stdout
    out = Path(out)
    if command in ("map-infinite", "map-finite"):
        tr = _map(cfg, command.split("-")[1])
        _emit(out, tr, {"command": command})
    elif command == "closed-form":
        norm = normalize_problem(cfg.problem)
        spec = default_spec(norm, t_min=cfg.t_min)
        tr = closed_form_trace(cfg.problem, cfg.times, spec)
        _emit(out, tr, {"command": command})
    elif command == "oracle":
        snaps, tr = fd_solve(cfg.problem, cfg.grid(), cfg.times)
        _emit(out, tr, {"command": command, "grid": asdict(cfg.grid())})
        write_snapshots_csv(out / "snapshots.csv", snaps, cfg.problem.shift)
    elif command == "validate":
        tr = _map(cfg)
        _, fd = fd_solve(cfg.problem, cfg.grid(), cfg.times)
        ok = _report("map vs finite differences", compare_traces(tr, fd), cfg.tolerances["oracle"], stream)
        try:
            cf = closed_form_trace(cfg.problem, cfg.times)
        except ConfigError:
            cf = None
        if cf is not None:
            ok &= _report("map vs explicit formula", compare_traces(tr, cf), cfg.tolerances["closed_form"], stream)
        _emit(out, tr, {"command": command, "passed": bool(ok)})
        return 0 if ok else 1
    elif command == "det-scan":
        norm = normalize_problem(cfg.problem)
        spec = default_spec(norm, t_min=cfg.t_min)
        spec = ContourSpec(**{**spec.__dict__, **cfg.contour_overrides()}) if cfg.contour else spec
        scan = det_scan(norm, spec)
        info = {
            "min_abs_det": scan.min_abs_det,
            "kappa_at_min": complex(scan.kappa_at_min),
            "zeros_above_contour": enclosed_zeros(norm, spec),
            "certified_R": adapt_R(norm, spec).R,
            "spec": spec.__dict__,
        }
        out.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(info), indent=2, sort_keys=True)
        (out / "det_scan.json").write_text(text + "\n")
        print(text, file=stream)
    else:
        raise ConfigError(f"unknown command {command!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="interfacemap", description="Interface values of layered heat problems.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON problem description")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--times", help="time grid a:b:n")
    ap.add_argument("--R", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--L", type=float)
    ap.add_argument("--density", type=float)
    ap.add_argument("--seed", type=int, help="random two-interface instance (validate)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config_from_args(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.seed is not None:
        rng = np.random.default_rng(args.seed)
        cfg = RunConfig(problem=random_problem(rng, 2), times=parse_times("0.05:1:20"))
    else:
        raise ConfigError("--config is required (or --seed for a random instance)")
    if args.times:
        cfg.times = parse_times(args.times)
    for key in ("R", "delta", "L", "density"):
        v = getattr(args, key)
        if v is not None:
            cfg.contour[key] = v
    bad = ContourSpec(**cfg.contour).violations()
    if bad:
        raise ConfigError(bad)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        out = args.out or Path(cfg.output)
        return run(cfg, args.command, out)
    except InterfaceMapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
