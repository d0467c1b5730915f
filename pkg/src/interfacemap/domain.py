"""Composite domains, piecewise-polynomial initial data and Robin boundary data.

All types are immutable. Constructors only coerce their inputs; the checks
live in :func:`validate`, which reports every violation at once.

Layers are indexed from 0. For an infinite domain with interfaces
``x_1 < ... < x_n`` layer ``j`` occupies ``(x_j, x_{j+1})`` with
``x_0 = -inf`` and ``x_{n+1} = +inf``; a finite domain stores all of
``x_0 < ... < x_{n+1}`` as breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import inf

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError

__all__ = [
    "MAX_DEGREE",
    "CompositeDomain",
    "PolyPiece",
    "InitialData",
    "TimeSignal",
    "RobinBoundary",
    "Problem",
    "validate",
    "normalize",
    "normalize_problem",
    "mirror_problem",
]

MAX_DEGREE = 12

INFINITE = "infinite"
FINITE = "finite"


@dataclass(frozen=True)
class CompositeDomain:
    kind: str
    breakpoints: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in self.breakpoints))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))

    @classmethod
    def infinite(cls, interfaces, sigmas):
        return cls(INFINITE, interfaces, sigmas)

    @classmethod
    def finite(cls, breakpoints, sigmas):
        return cls(FINITE, breakpoints, sigmas)

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    @property
    def n(self) -> int:
        """Number of interior interfaces."""
        return len(self.breakpoints) - 2 if self.is_finite else len(self.breakpoints)

    @property
    def n_layers(self) -> int:
        return self.n + 1

    @property
    def interfaces(self) -> tuple[float, ...]:
        return self.breakpoints[1:-1] if self.is_finite else self.breakpoints

    @property
    def edges(self) -> tuple[float, ...]:
        """Layer edges including the outer ends (``-inf``/``inf`` when infinite)."""
        if self.is_finite:
            return self.breakpoints
        return (-inf, *self.breakpoints, inf)

    def layer_bounds(self, j: int) -> tuple[float, float]:
        e = self.edges
        return e[j], e[j + 1]

    def shifted(self, dx: float) -> "CompositeDomain":
        return CompositeDomain(self.kind, [x + dx for x in self.breakpoints], self.sigmas)


@dataclass(frozen=True)
class PolyPiece:
    """``p(x) = sum(coeffs[m] * x**m)`` on the closed interval ``support``."""

    support: tuple[float, float]
    coeffs: tuple[float, ...]

    def __post_init__(self):
        a, b = self.support
        object.__setattr__(self, "support", (float(a), float(b)))
        c = tuple(float(v) for v in self.coeffs) or (0.0,)
        object.__setattr__(self, "coeffs", c)

    @property
    def a(self) -> float:
        return self.support[0]

    @property
    def b(self) -> float:
        return self.support[1]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, P.polyval(x, self.coeffs), 0.0)

    def shifted(self, dx: float) -> "PolyPiece":
        # q(x) = p(x - dx)
        q = _compose_affine(self.coeffs, -dx, 1.0)
        return PolyPiece((self.a + dx, self.b + dx), q)

    def mirrored(self) -> "PolyPiece":
        q = _compose_affine(self.coeffs, 0.0, -1.0)
        return PolyPiece((-self.b, -self.a), q)

    def centered(self) -> tuple[float, float, np.ndarray]:
        """Return ``(c, h, q)`` with ``x = c + h*s`` and ``p(x) = q(s)`` for ``s`` in [-1, 1]."""
        c = 0.5 * (self.a + self.b)
        h = 0.5 * (self.b - self.a)
        return c, h, _compose_affine(self.coeffs, c, h)

    def sup_norm(self) -> float:
        s = np.linspace(self.a, self.b, 8 * (self.degree + 2) + 1)
        return float(np.max(np.abs(P.polyval(s, self.coeffs))))


def _compose_affine(coeffs, shift, scale) -> np.ndarray:
    """Coefficients of ``p(shift + scale*s)`` as a polynomial in ``s``."""
    out = np.zeros(1)
    lin = np.array([shift, scale], dtype=float)
    for c in reversed(coeffs):
        out = P.polyadd(P.polymul(out, lin), [c])
    out = np.asarray(out, dtype=float)
    pad = len(coeffs) - len(out)
    return np.concatenate([out, np.zeros(pad)]) if pad > 0 else out[: len(coeffs)]


@dataclass(frozen=True)
class InitialData:
    layers: tuple[tuple[PolyPiece, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))

    @classmethod
    def zero(cls, n_layers: int) -> "InitialData":
        return cls(((),) * n_layers)

    def __len__(self):
        return len(self.layers)

    def pieces(self):
        for layer in self.layers:
            yield from layer

    def is_zero(self) -> bool:
        return all(not any(p.coeffs) for p in self.pieces())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p in self.pieces():
            out = out + p(x)
        return out

    def layer_value(self, j: int, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p in self.layers[j]:
            out = out + p(x)
        return out

    def sup_norm(self) -> float:
        return max((p.sup_norm() for p in self.pieces()), default=0.0)

    def shifted(self, dx: float) -> "InitialData":
        return InitialData([[p.shifted(dx) for p in layer] for layer in self.layers])

    def scaled(self, c: float) -> "InitialData":
        return InitialData(
            [[PolyPiece(p.support, [c * v for v in p.coeffs]) for p in layer] for layer in self.layers]
        )

    def __add__(self, other: "InitialData") -> "InitialData":
        return InitialData([a + b for a, b in zip(self.layers, other.layers)])

    def extent(self) -> tuple[float, float]:
        ends = [x for p in self.pieces() for x in p.support]
        return (min(ends), max(ends)) if ends else (0.0, 0.0)


@dataclass(frozen=True)
class TimeSignal:
    """Boundary forcing: zero, constant, or piecewise constant with ``values[i]`` on ``[breaks[i], breaks[i+1])``."""

    breaks: tuple[float, ...] = (0.0,)
    values: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def zero(cls):
        return cls((0.0,), (0.0,))

    @classmethod
    def constant(cls, c: float):
        return cls((0.0,), (c,))

    @classmethod
    def piecewise(cls, breaks, values):
        return cls(breaks, values)

    @property
    def kind(self) -> str:
        if len(self.values) == 1:
            return "zero" if self.values[0] == 0.0 else "constant"
        return "piecewise_constant"

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, len(self.values) - 1)]

    def left_limit(self, t):
        """``f(t-)``; equals ``f(t)`` away from the breaks."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breaks, t, side="left") - 1
        return np.asarray(self.values)[np.clip(idx, 0, len(self.values) - 1)]

    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values)

    def interior_breaks(self) -> tuple[float, ...]:
        return self.breaks[1:]


@dataclass(frozen=True)
class RobinBoundary:
    """``beta[0] u + beta[1] u_x = f1`` at the left end, ``beta[2] u + beta[3] u_x = f2`` at the right."""

    beta: tuple[float, float, float, float]
    f1: TimeSignal = field(default_factory=TimeSignal.zero)
    f2: TimeSignal = field(default_factory=TimeSignal.zero)

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    @classmethod
    def neumann(cls, f1=None, f2=None):
        return cls((0.0, 1.0, 0.0, 1.0), f1 or TimeSignal.zero(), f2 or TimeSignal.zero())

    @classmethod
    def dirichlet(cls, f1=None, f2=None):
        return cls((1.0, 0.0, 1.0, 0.0), f1 or TimeSignal.zero(), f2 or TimeSignal.zero())

    def mirrored(self) -> "RobinBoundary":
        b1, b2, b3, b4 = self.beta
        return RobinBoundary((b3, -b4, b1, -b2), self.f2, self.f1)


@dataclass(frozen=True)
class Problem:
    """A validated problem; ``shift`` is the translation applied by normalization."""

    domain: CompositeDomain
    u0: InitialData
    bc: RobinBoundary | None = None
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def sigmas(self) -> tuple[float, ...]:
        return self.domain.sigmas

    def is_zero(self) -> bool:
        if not self.u0.is_zero():
            return False
        return self.bc is None or (self.bc.f1.is_zero() and self.bc.f2.is_zero())


def _domain_violations(domain: CompositeDomain) -> list[str]:
    out = []
    if domain.kind not in (INFINITE, FINITE):
        out.append(f"unknown domain kind {domain.kind!r}")
        return out
    bp = domain.breakpoints
    need = 2 if domain.is_finite else 1
    if len(bp) < need:
        out.append(f"{domain.kind} domain needs at least {need} breakpoint(s)")
    if any(not np.isfinite(x) for x in bp):
        out.append("breakpoints must be finite")
    if any(b <= a for a, b in zip(bp, bp[1:])):
        out.append("breakpoints not strictly increasing")
    if len(domain.sigmas) != max(domain.n_layers, 0):
        out.append(f"expected {domain.n_layers} sigmas, got {len(domain.sigmas)}")
    for i, s in enumerate(domain.sigmas):
        if not (s > 0) or not np.isfinite(s):
            out.append(f"nonpositive sigma at layer {i}: {s}")
    return out


def validate(domain: CompositeDomain, u0: InitialData, bc: RobinBoundary | None = None,
             max_degree: int = MAX_DEGREE) -> Problem:
    """Check every invariant and return the problem, or raise ConfigError listing all violations."""
    errors = _domain_violations(domain)
    if len(u0.layers) != domain.n_layers:
        errors.append(f"initial data has {len(u0.layers)} layers, domain has {domain.n_layers}")
    elif not errors:
        for j, layer in enumerate(u0.layers):
            lo, hi = domain.layer_bounds(j)
            spans = []
            for k, p in enumerate(layer):
                tag = f"layer {j} piece {k}"
                if not (np.isfinite(p.a) and np.isfinite(p.b)):
                    errors.append(f"{tag}: support must be finite")
                    continue
                if not p.a < p.b:
                    errors.append(f"{tag}: empty support [{p.a}, {p.b}]")
                if p.degree > max_degree:
                    errors.append(f"{tag}: degree {p.degree} exceeds cap {max_degree}")
                if not all(np.isfinite(p.coeffs)):
                    errors.append(f"{tag}: non-finite coefficient")
                if p.a < lo or p.b > hi:
                    errors.append(f"{tag}: piece crosses interface (support [{p.a}, {p.b}] "
                                  f"outside layer [{lo}, {hi}])")
                spans.append((p.a, p.b))
            spans.sort()
            for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
                if a1 < b0:
                    errors.append(f"layer {j}: overlapping pieces [{a0}, {b0}] and [{a1}, {b1}]")
    if domain.is_finite:
        if bc is None:
            errors.append("finite domain requires Robin boundary data")
        else:
            errors.extend(_robin_violations(bc))
    elif bc is not None:
        errors.append("boundary data given for an infinite domain")
    if errors:
        raise ConfigError(errors)
    return Problem(domain, u0, bc)


def _robin_violations(bc: RobinBoundary) -> list[str]:
    out = []
    if len(bc.beta) != 4 or not all(np.isfinite(bc.beta)):
        return ["Robin coefficients must be four finite reals"]
    b1, b2, b3, b4 = bc.beta
    if b1 == 0 and b2 == 0:
        out.append("degenerate Robin row at left boundary (beta1 = beta2 = 0)")
    if b3 == 0 and b4 == 0:
        out.append("degenerate Robin row at right boundary (beta3 = beta4 = 0)")
    for name, f in (("f1", bc.f1), ("f2", bc.f2)):
        if not f.breaks or f.breaks[0] != 0.0:
            out.append(f"{name}: breaks must start at 0")
        if any(b <= a for a, b in zip(f.breaks, f.breaks[1:])):
            out.append(f"{name}: breaks not strictly increasing")
        if len(f.values) != len(f.breaks):
            out.append(f"{name}: need one value per break")
        if not all(np.isfinite(f.values)):
            out.append(f"{name}: non-finite value")
    return out


def normalize(domain: CompositeDomain) -> tuple[CompositeDomain, float]:
    """Translate so the first breakpoint sits at 0; returns the domain and the shift applied."""
    if not domain.breakpoints:
        return domain, 0.0
    shift = -domain.breakpoints[0]
    if shift == 0.0:
        return domain, 0.0
    return domain.shifted(shift), shift


def normalize_problem(problem: Problem) -> Problem:
    domain, shift = normalize(problem.domain)
    if shift == 0.0:
        return problem
    return Problem(domain, problem.u0.shifted(shift), problem.bc, problem.shift + shift)


def mirror_problem(problem: Problem) -> Problem:
    """Reflect ``x -> -x``; layers, sigmas and pieces are reversed. The result is not normalized."""
    d = problem.domain
    dom = CompositeDomain(d.kind, [-x for x in reversed(d.breakpoints)], list(reversed(d.sigmas)))
    u0 = InitialData([[p.mirrored() for p in reversed(layer)] for layer in reversed(problem.u0.layers)])
    bc = problem.bc.mirrored() if problem.bc is not None else None
    return Problem(dom, u0, bc, 0.0)
