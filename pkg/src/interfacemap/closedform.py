"""Explicit single-interface formulas used as fast paths and as oracles.

For one interface at ``x = 0`` on the whole line, a point source at ``y < 0``
splits into a direct and a reflected Gaussian with reflection coefficient
``(s1 - s2)/(s1 + s2)``. Integrating against ``u0`` gives

    u(0, t) = [I1 + I2] / (sqrt(pi t) (s1 + s2)),
    s1**2 u_x(0, t) = [(s2/s1) J1 + (s1/s2) J2] / (2 t**1.5 sqrt(pi) (s1 + s2)),

with ``I_j = int u0 exp(-y**2/(4 t s_j**2)) dy`` and ``J_j`` the same with an
extra factor ``y``, each over the half-line of layer ``j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import pi, sqrt

import numpy as np
from scipy import integrate

from .contour import ContourSpec, InterfaceTrace, adapt_R, default_spec, nodes
from .domain import InitialData, TimeSignal, normalize_problem
from .errors import ConfigError, NumericalError, PoleProximityError
from .transforms import scaled_time_transform

__all__ = [
    "KernelQuad",
    "n1_interface_values",
    "whole_line_reference",
    "n1_finite_neumann_values",
    "closed_form_trace",
]

DENOM_THRESHOLD = 1e-14


@dataclass(frozen=True)
class KernelQuad:
    """Adaptive quadrature of polynomial times Gaussian over each piece."""

    tol: float = 1e-10
    limit: int = 200

    def integrate(self, fn, a, b, scale=1.0):
        # scale sets the absolute floor so pieces far in the Gaussian tail do not stall
        with warnings.catch_warnings():
            # the error estimate is checked below; scipy's warning would only duplicate it
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, a, b, epsabs=self.tol * scale, epsrel=self.tol, limit=self.limit)
        if err > max(self.tol * abs(val), self.tol * scale):
            raise NumericalError(f"kernel quadrature missed tolerance {self.tol:g}: estimate {err:.2e}")
        return val

    def gauss_moment(self, u0: InitialData, layers, width2: float, order: int, center: float = 0.0,
                     scale: float = 1.0) -> float:
        """``sum over pieces in layers of int (y-c)**order exp(-(y-c)**2/width2) p(y) dy``."""
        total = 0.0
        for j in layers:
            for p in u0.layers[j]:
                # split at the kernel peak and clip to where the Gaussian matters
                reach = sqrt(width2 * 800.0)
                a, b = max(p.a, center - reach), min(p.b, center + reach)
                if a >= b:
                    continue
                cuts = [a] + [c for c in (center,) if a < c < b] + [b]
                fn = (lambda y, p=p: (y - center) ** order * np.exp(-(y - center) ** 2 / width2) * p(y))
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    total += self.integrate(fn, lo, hi, scale * max(hi - lo, 1.0))
        return total


def n1_interface_values(sigma1: float, sigma2: float, u0: InitialData, t, quad: KernelQuad | None = None):
    """Temperature and flux ``sigma1**2 u_x`` at the interface ``x = 0`` of a two-layer line.

    ``u0`` has two layers, the first supported in ``y <= 0``. Vectorized over ``t``.
    """
    quad = quad or KernelQuad()
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    if len(u0.layers) != 2:
        raise ValueError("need initial data for exactly two layers")
    scale = max(u0.sup_norm(), 1e-300)
    u = np.empty(ts.size)
    flux = np.empty(ts.size)
    for i, tt in enumerate(ts):
        w1, w2 = 4 * tt * sigma1 ** 2, 4 * tt * sigma2 ** 2
        i1 = quad.gauss_moment(u0, [0], w1, 0, scale=scale)
        i2 = quad.gauss_moment(u0, [1], w2, 0, scale=scale)
        j1 = quad.gauss_moment(u0, [0], w1, 1, scale=scale)
        j2 = quad.gauss_moment(u0, [1], w2, 1, scale=scale)
        u[i] = (i1 + i2) / (sqrt(pi * tt) * (sigma1 + sigma2))
        flux[i] = (sigma2 / sigma1 * j1 + sigma1 / sigma2 * j2) / (2 * tt ** 1.5 * sqrt(pi) * (sigma1 + sigma2))
    if np.ndim(t) == 0:
        return float(u[0]), float(flux[0])
    return u, flux


def whole_line_reference(u0: InitialData, x, t, sigma: float = 1.0, quad: KernelQuad | None = None):
    """Green's-function solution of ``u_t = sigma**2 u_xx`` on the whole line at ``(x, t)``."""
    quad = quad or KernelQuad()
    if t <= 0:
        raise ValueError("t must be positive")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    w = 4 * sigma ** 2 * t
    scale = max(u0.sup_norm(), 1e-300)
    layers = range(len(u0.layers))
    out = np.array([quad.gauss_moment(u0, layers, w, 0, center=xx, scale=scale) for xx in xs])
    out /= sqrt(pi * w)
    return float(out[0]) if np.ndim(x) == 0 else out


def n1_finite_neumann_values(sigma1: float, sigma2: float, x1: float, x2: float,
                             f1: TimeSignal, f2: TimeSignal, spec: ContourSpec, t):
    """Interface temperature and flux on ``[0, x2]`` with zero initial data and
    Neumann data ``u_x(0, t) = f1``, ``u_x(x2, t) = f2``.

    Evaluates the explicit two-layer contour integrands directly. With
    ``z1 = kappa x1/s1`` and ``z2 = kappa (x2 - x1)/s2`` the trigonometric
    factors are multiplied through by ``exp(i z1) exp(i z2)``, which keeps
    every term bounded for ``Im kappa > 0``.
    """
    if not 0 < x1 < x2:
        raise ValueError("need 0 < x1 < x2")
    spec.check()
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    kappa, w = nodes(spec, float(ts.max()))
    e1 = np.exp(2j * kappa * x1 / sigma1)
    e2 = np.exp(2j * kappa * (x2 - x1) / sigma2)
    s1, c1 = (e1 - 1) / 2j, (e1 + 1) / 2
    s2, c2 = (e2 - 1) / 2j, (e2 + 1) / 2
    h1, h2 = np.exp(1j * kappa * x1 / sigma1), np.exp(1j * kappa * (x2 - x1) / sigma2)
    den = sigma1 * c2 * s1 + sigma2 * c1 * s2
    if np.min(np.abs(den)) < DENOM_THRESHOLD * (sigma1 + sigma2):
        i = int(np.argmin(np.abs(den)))
        raise PoleProximityError(f"denominator vanishes near kappa={kappa[i]:.6g}; increase R")
    u = np.empty(ts.size)
    flux = np.empty(ts.size)
    for i, tt in enumerate(ts):
        g1 = scaled_time_transform(f1, kappa, tt)
        g2 = scaled_time_transform(f2, kappa, tt)
        num_f = -sigma1 * g1 * s2 * h1 - sigma2 * g2 * s1 * h2
        num_u = sigma1 ** 2 * g1 * c2 * h1 - sigma2 ** 2 * g2 * c1 * h2
        flux[i] = (1j * sigma1 * sigma2 / pi * np.sum(w * kappa * num_f / den)).real
        u[i] = (-1j / pi * np.sum(w * num_u / den)).real
    if np.ndim(t) == 0:
        return float(u[0]), float(flux[0])
    return u, flux


def closed_form_trace(problem, times, spec: ContourSpec | None = None) -> InterfaceTrace:
    """Interface trace from the explicit single-interface formulas.

    Covers the infinite two-layer line and the finite two-layer Neumann
    problem with zero initial data; anything else is a ConfigError.
    """
    p = normalize_problem(problem)
    d = p.domain
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    if d.n != 1:
        raise ConfigError("explicit formulas exist only for a single interface")
    s1, s2 = d.sigmas
    if not d.is_finite:
        u, flux = n1_interface_values(s1, s2, p.u0, ts)
    else:
        if p.bc.beta != (0.0, 1.0, 0.0, 1.0) or not p.u0.is_zero():
            raise ConfigError("finite explicit formula needs Neumann ends and zero initial data")
        spec = adapt_R(p, spec or default_spec(p))
        u, flux = n1_finite_neumann_values(s1, s2, d.breakpoints[1], d.breakpoints[2],
                                           p.bc.f1, p.bc.f2, spec, ts)
    return InterfaceTrace(
        times=ts,
        u=np.asarray(u).reshape(-1, 1),
        ux=np.asarray(flux).reshape(-1, 1) / s1 ** 2,
        sigmas_left=np.array([s1]),
        positions=np.asarray(d.interfaces, dtype=float),
        shift=p.shift,
    )
