"""JSON run configurations and seeded random problem instances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from jsonschema import Draft202012Validator

from .contour import ContourSpec, T_MIN
from .domain import (
    CompositeDomain,
    InitialData,
    PolyPiece,
    Problem,
    RobinBoundary,
    TimeSignal,
    validate,
)
from .errors import ConfigError
from .fd import FdGrid

__all__ = [
    "COMMANDS",
    "SCHEMA",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize",
    "parse_times",
    "random_problem",
]

COMMANDS = ("map-infinite", "map-finite", "closed-form", "oracle", "validate", "det-scan")

_num = {"type": "number"}
_signal = {
    "type": "object",
    "properties": {
        "breaks": {"type": "array", "items": _num, "minItems": 1},
        "values": {"type": "array", "items": _num, "minItems": 1},
    },
    "required": ["breaks", "values"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "domain": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["infinite", "finite"]},
                "breakpoints": {"type": "array", "items": _num, "minItems": 1},
                "sigmas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
            },
            "required": ["kind", "breakpoints", "sigmas"],
            "additionalProperties": False,
        },
        "initial": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "layer": {"type": "integer", "minimum": 0},
                    "support": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                    "coeffs": {"type": "array", "items": _num, "minItems": 1},
                },
                "required": ["layer", "support", "coeffs"],
                "additionalProperties": False,
            },
        },
        "boundary": {
            "type": "object",
            "properties": {
                "beta": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                "f1": _signal,
                "f2": _signal,
            },
            "required": ["beta"],
            "additionalProperties": False,
        },
        "contour": {
            "type": "object",
            "properties": {
                "R": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "density": {"type": "number", "minimum": 4},
                "rule": {"enum": ["gauss-legendre", "simpson"]},
                "t_min": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "times": {
            "oneOf": [
                {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                {"type": "string", "pattern": r"^[^:]+:[^:]+:[0-9]+$"},
            ]
        },
        "fd": {
            "type": "object",
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "oracle": {"type": "number", "exclusiveMinimum": 0},
                "closed_form": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
    },
    "required": ["domain"],
    "additionalProperties": False,
}

DEFAULT_TIMES = "0.01:1:32"
DEFAULT_TOLERANCES = {"oracle": 2e-3, "closed_form": 1e-6}


@dataclass
class RunConfig:
    problem: Problem
    times: np.ndarray
    contour: dict = field(default_factory=dict)
    fd: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    command: str | None = None
    output: str = "out"

    def contour_overrides(self) -> dict:
        return dict(self.contour)

    def grid(self) -> FdGrid:
        return FdGrid(**self.fd)

    @property
    def t_min(self) -> float:
        return self.contour.get("t_min", T_MIN)


def parse_times(text) -> np.ndarray:
    """``"a:b:n"`` to ``n`` evenly spaced times, or a list passed through."""
    if isinstance(text, str):
        try:
            a, b, n = text.split(":")
            out = np.linspace(float(a), float(b), int(n))
        except ValueError as exc:
            raise ConfigError(f"bad time grid {text!r}; expected a:b:n") from exc
    else:
        out = np.asarray(text, dtype=float)
    if out.size == 0 or np.any(out <= 0) or np.any(np.diff(out) <= 0):
        raise ConfigError("times must be positive and strictly increasing")
    return out


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def parse_config(document) -> RunConfig:
    """Check a JSON document (text or already-decoded) and build a validated config."""
    if isinstance(document, (str, bytes)):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
    else:
        data = document
    errors = sorted(Draft202012Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError([f"{_pointer(e.absolute_path)}: {e.message}" for e in errors])

    d = data["domain"]
    domain = CompositeDomain(d["kind"], d["breakpoints"], d["sigmas"])
    layers = [[] for _ in range(max(domain.n_layers, 0))]
    for i, piece in enumerate(data.get("initial", [])):
        if piece["layer"] >= len(layers):
            raise ConfigError(f"/initial/{i}/layer: no layer {piece['layer']}")
        layers[piece["layer"]].append(PolyPiece(tuple(piece["support"]), piece["coeffs"]))
    bc = None
    if "boundary" in data:
        b = data["boundary"]
        bc = RobinBoundary(
            tuple(b["beta"]),
            TimeSignal(b["f1"]["breaks"], b["f1"]["values"]) if "f1" in b else TimeSignal.zero(),
            TimeSignal(b["f2"]["breaks"], b["f2"]["values"]) if "f2" in b else TimeSignal.zero(),
        )
    problem = validate(domain, InitialData(layers), bc)
    contour = dict(data.get("contour", {}))
    spec_errors = ContourSpec(**contour).violations()
    if spec_errors:
        raise ConfigError([f"/contour: {m}" for m in spec_errors])
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(data.get("tolerances", {}))
    return RunConfig(
        problem=problem,
        times=parse_times(data.get("times", DEFAULT_TIMES)),
        contour=contour,
        fd=dict(data.get("fd", {})),
        tolerances=tol,
        command=data.get("command"),
        output=data.get("output", "out"),
    )


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _signal_dict(f: TimeSignal) -> dict:
    return {"breaks": [float(x) for x in f.breaks], "values": [float(x) for x in f.values]}


def serialize(config: RunConfig) -> str:
    """Inverse of :func:`parse_config` up to default filling."""
    p = config.problem
    d = p.domain
    doc = {
        "domain": {"kind": d.kind, "breakpoints": [float(x) for x in d.breakpoints],
                   "sigmas": [float(s) for s in d.sigmas]},
        "initial": [
            {"layer": j, "support": [float(q.a), float(q.b)], "coeffs": [float(c) for c in q.coeffs]}
            for j, layer in enumerate(p.u0.layers) for q in layer
        ],
        "times": [float(t) for t in config.times],
        "contour": dict(config.contour),
        "fd": dict(config.fd),
        "tolerances": dict(config.tolerances),
        "output": config.output,
    }
    if p.bc is not None:
        doc["boundary"] = {"beta": list(p.bc.beta), "f1": _signal_dict(p.bc.f1), "f2": _signal_dict(p.bc.f2)}
    if config.command is not None:
        doc["command"] = config.command
    return json.dumps(doc, indent=2, sort_keys=True)


def _bump(rng, a, b, degree):
    """Random polynomial vanishing at both ends of ``[a, b]`` so the data is continuous."""
    roots = [a, b] + list(rng.uniform(a, b, degree - 2))
    c = np.polynomial.polynomial.polyfromroots(roots)
    peak = np.max(np.abs(np.polynomial.polynomial.polyval(np.linspace(a, b, 64), c)))
    return c * (rng.uniform(0.5, 1.5) / peak)


def random_problem(rng, n: int, kind: str = "infinite", sigma_range=(0.5, 3.0), continuous: bool = True,
                   max_degree: int = 4) -> Problem:
    """A random ``n``-interface problem: well-separated interfaces and polynomial data.

    With ``continuous`` each layer's data vanishes at its ends. Finite problems
    get random nondegenerate Robin rows and piecewise-constant boundary data.
    """
    sigmas = list(rng.uniform(*sigma_range, n + 1))
    gaps = rng.uniform(0.5, 1.5, n + (1 if kind == "finite" else -1))
    if kind == "finite":
        bp = list(np.r_[0.0, np.cumsum(gaps)])
        edges = bp
    else:
        bp = list(np.r_[0.0, np.cumsum(gaps)]) if n > 1 else [0.0]
        edges = [bp[0] - rng.uniform(0.5, 1.5)] + bp + [bp[-1] + rng.uniform(0.5, 1.5)]
    domain = CompositeDomain(kind, bp, sigmas)
    layers = []
    for j in range(n + 1):
        a, b = edges[j], edges[j + 1]
        deg = int(rng.integers(2, max_degree + 1))
        if continuous:
            layers.append([PolyPiece((a, b), _bump(rng, a, b, deg))])
        else:
            layers.append([PolyPiece((a, b), rng.uniform(-1, 1, deg + 1))])
    bc = None
    if kind == "finite":
        # u_n + h u with h >= 0 along the outward normal: no growing modes
        b_u = rng.uniform(0.0, 1.0, 2)
        b_ux = rng.uniform(0.5, 1.5, 2)
        beta = [float(b_u[0]), -float(b_ux[0]), float(b_u[1]), float(b_ux[1])]
        sig = []
        for _ in range(2):
            tb = float(rng.uniform(0.1, 0.6))
            sig.append(TimeSignal([0.0, tb], list(rng.uniform(-1, 1, 2))))
        bc = RobinBoundary(tuple(beta), sig[0], sig[1])
    return validate(domain, InitialData(layers), bc)
