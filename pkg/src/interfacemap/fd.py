"""Finite-difference oracle for the layered heat equation.

Vertex-centred finite volumes: every node owns the control volume reaching
halfway to its neighbours, and the flux ``s_j**2 (u_{i+1} - u_i)/h`` across each
cell uses that cell's layer. Interfaces sit on nodes, so temperature
continuity and flux continuity are built into the stencil. Time stepping is
Crank-Nicolson, with a few backward-Euler half steps after every
discontinuity in the data (Rannacher start-up) to damp the oscillations
Crank-Nicolson leaves behind non-smooth data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from math import sqrt
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .contour import InterfaceTrace
from .domain import InitialData, Problem
from .errors import ConfigError

__all__ = [
    "FdGrid",
    "FieldSnapshot",
    "fd_solve",
    "layerwise_bvp_solve",
    "flux_jumps",
    "compare_traces",
    "TraceReport",
    "write_snapshots_csv",
]

TAIL_SIGMAS = 10.0   # exp(-TAIL_SIGMAS**2 / 4) < 1e-10
GROWTH_LIMIT = 1e3


@dataclass(frozen=True)
class FdGrid:
    """``h`` is the spacing per unit ``sigma``: layer ``j`` uses about ``h * sigma_j``."""

    h: float = 0.01
    dt: float = 2e-3
    W: float | None = None          # truncation half-width for infinite domains
    scheme: str = "crank-nicolson"
    startup_steps: int = 4
    min_cells: int = 4

    def __post_init__(self):
        bad = []
        if not self.h > 0:
            bad.append("grid spacing must be positive")
        if not self.dt > 0:
            bad.append("time step must be positive")
        if self.scheme != "crank-nicolson":
            bad.append(f"unsupported scheme {self.scheme!r}")
        if bad:
            raise ConfigError(bad)

    def halved(self) -> "FdGrid":
        return replace(self, h=self.h / 2, dt=self.dt / 2)


@dataclass
class FieldSnapshot:
    x: np.ndarray
    u: np.ndarray
    t: float

    def at(self, x):
        return np.interp(x, self.x, self.u)


class _Mesh:
    """Nodes, per-cell diffusivities and the layer boundaries' node indices."""

    def __init__(self, edges, sigmas, grid: FdGrid):
        xs, d, marks = [], [], [0]
        for j, s in enumerate(sigmas):
            a, b = edges[j], edges[j + 1]
            m = max(grid.min_cells, int(np.ceil((b - a) / (grid.h * s))))
            pts = np.linspace(a, b, m + 1)
            xs.append(pts if j == 0 else pts[1:])
            d.append(np.full(m, s * s))
            marks.append(marks[-1] + m)
        self.x = np.concatenate(xs)
        self.D = np.concatenate(d)          # per cell
        self.h = np.diff(self.x)
        self.marks = marks                  # node index of every layer edge
        self.sigmas = np.asarray(sigmas, dtype=float)

    @property
    def size(self):
        return self.x.size

    def volumes(self):
        v = np.zeros(self.size)
        v[:-1] += self.h / 2
        v[1:] += self.h / 2
        return v

    def stiffness(self):
        c = self.D / self.h
        main = np.zeros(self.size)
        main[:-1] += c
        main[1:] += c
        return sparse.diags([-c, main, -c], [-1, 0, 1], format="lil")

    def cell_average(self, u0: InitialData):
        """Exact control-volume averages of piecewise-polynomial data."""
        lo = np.r_[self.x[0], self.x[:-1] + self.h / 2]
        hi = np.r_[self.x[1:] - self.h / 2, self.x[-1]]
        total = np.zeros(self.size)
        for p in u0.pieces():
            anti = np.polynomial.polynomial.polyint(p.coeffs)
            a, b = np.clip(lo, p.a, p.b), np.clip(hi, p.a, p.b)
            total += (np.polynomial.polynomial.polyval(b, anti)
                      - np.polynomial.polynomial.polyval(a, anti))
        return total / (hi - lo)

    def left_derivative(self, u, i):
        """Second-order one-sided derivative at node ``i`` from the cells on its left."""
        h = self.h[i - 1]
        return (3 * u[..., i] - 4 * u[..., i - 1] + u[..., i - 2]) / (2 * h)

    def right_derivative(self, u, i):
        h = self.h[i]
        return (-3 * u[..., i] + 4 * u[..., i + 1] - u[..., i + 2]) / (2 * h)


class _End:
    """Outer condition: ``('dirichlet', g)`` with ``g(t)`` or ``('robin', beta_u, beta_ux, f)``."""

    def __init__(self, kind, *args):
        self.kind = kind
        self.args = args


def _robin_rows(mesh: _Mesh, K, left: _End, right: _End):
    for end, i, nb, sign in ((left, 0, 1, -1.0), (right, mesh.size - 1, mesh.size - 2, 1.0)):
        if end.kind != "robin":
            continue
        ba, bb, _ = end.args
        cell = 0 if i == 0 else -1
        K[i, i] = K[i, i] + sign * mesh.D[cell] * ba / bb


def _forcing(mesh: _Mesh, left: _End, right: _End, t):
    F = np.zeros(mesh.size)
    for end, i, sign in ((left, 0, -1.0), (right, mesh.size - 1, 1.0)):
        if end.kind == "robin":
            ba, bb, f = end.args
            cell = 0 if i == 0 else -1
            F[i] = sign * mesh.D[cell] * float(f(t)) / bb
    return F


def _dirichlet_values(left: _End, right: _End, t):
    out = {}
    if left.kind == "dirichlet":
        out[0] = float(left.args[0](t))
    if right.kind == "dirichlet":
        out[-1] = float(right.args[0](t))
    return out


class _Stepper:
    def __init__(self, mesh: _Mesh, left: _End, right: _End):
        self.mesh, self.left, self.right = mesh, left, right
        K = mesh.stiffness()
        _robin_rows(mesh, K, left, right)
        self.K = K.tocsr()
        self.M = sparse.diags(mesh.volumes(), format="csr")
        self.fixed = [i % mesh.size for i in _dirichlet_values(left, right, 0.0)]
        self._cache = {}

    def _factor(self, dt, theta):
        key = (round(dt, 15), theta)
        if key not in self._cache:
            A = (self.M + theta * dt * self.K).tolil()
            B = (self.M - (1 - theta) * dt * self.K).tolil()
            for i in self.fixed:
                A[i, :] = 0
                A[i, i] = 1.0
                B[i, :] = 0
            self._cache[key] = (splu(A.tocsc()), B.tocsr())
        return self._cache[key]

    def step(self, u, t, dt, theta):
        lu, B = self._factor(dt, theta)
        # data breaks are step boundaries, so the flux data is constant on the open step
        rhs = B @ u + dt * _forcing(self.mesh, self.left, self.right, t + 0.5 * dt)
        for i, v in _dirichlet_values(self.left, self.right, t + dt).items():
            rhs[i % self.mesh.size] = v
        return lu.solve(rhs)


GRADED_LEVELS = 8
GRADED_STEPS = 6


def _graded(r, dt, stop):
    """Points after a restart at ``r``: ``GRADED_STEPS`` steps of ``dt/2**k`` for k = K..1."""
    pts = []
    t = r
    for k in range(GRADED_LEVELS, 0, -1):
        h = dt / 2 ** k
        for _ in range(GRADED_STEPS if k < GRADED_LEVELS else 2 * GRADED_STEPS):
            t += h
            if t >= stop:
                return pts
            pts.append(t)
        if t - r >= dt:
            break
    return pts


def _schedule(times, events, dt):
    """Step boundaries: a uniform grid merged with outputs, data breaks and graded restarts."""
    T = float(np.max(times))
    restarts = [0.0] + [e for e in events if 0 < e < T]
    pts = [np.arange(0.0, T, dt), times, restarts, [T]]
    for r in restarts:
        pts.append(_graded(r, dt, T))
    pts = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pts]))
    must = set(np.round(np.concatenate([times, restarts]), 14))
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] < 1e-9 * dt and round(p, 14) not in must:
            continue
        keep.append(p)
    return np.array(keep), restarts


def _march(stepper: _Stepper, u, times, events, grid: FdGrid, scale):
    """Advance ``u`` from 0, returning the state at each requested time."""
    times = np.asarray(times, dtype=float)
    sched, restarts = _schedule(times, events, grid.dt)
    restarts = {round(r, 14) for r in restarts}
    out = {}
    startup = 0
    for t, t_next in zip(sched[:-1], sched[1:]):
        if round(t, 14) in restarts:
            startup = grid.startup_steps
        theta = 1.0 if startup > 0 else 0.5
        startup -= 1
        u = stepper.step(u, t, t_next - t, theta)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > GROWTH_LIMIT * scale:
            raise ConfigError(f"finite-difference solution unstable near t={t_next:g}; reduce dt or h")
        for tt in times[np.isclose(times, t_next, rtol=0, atol=1e-13)]:
            out[float(tt)] = u.copy()
    return [out[float(tt)] for tt in times]


def _infinite_edges(problem: Problem, grid: FdGrid, t_max):
    d = problem.domain
    lo, hi = problem.u0.extent()
    xs = [x for x in (lo, hi) if np.isfinite(x)] + list(d.interfaces)
    W = grid.W if grid.W is not None else TAIL_SIGMAS * max(d.sigmas) * sqrt(t_max)
    return [min(xs) - W] + list(d.interfaces) + [max(xs) + W]


def _mesh_for(problem: Problem, grid: FdGrid, t_max):
    d = problem.domain
    edges = list(d.breakpoints) if d.is_finite else _infinite_edges(problem, grid, t_max)
    return _Mesh(edges, d.sigmas, grid)


def _outer_ends(problem: Problem):
    if not problem.domain.is_finite:
        zero = (lambda t: 0.0)
        return _End("dirichlet", zero), _End("dirichlet", zero)
    b1, b2, b3, b4 = problem.bc.beta
    bc = problem.bc
    left = _End("robin", b1, b2, bc.f1) if b2 != 0 else _End("dirichlet", lambda t: bc.f1(t) / b1)
    right = _End("robin", b3, b4, bc.f2) if b4 != 0 else _End("dirichlet", lambda t: bc.f2(t) / b3)
    return left, right


def _data_events(problem: Problem):
    if not problem.domain.is_finite:
        return []
    return sorted(set(problem.bc.f1.interior_breaks()) | set(problem.bc.f2.interior_breaks()))


def _data_scale(problem: Problem):
    s = max(problem.u0.sup_norm(), 1.0)
    if problem.bc is not None:
        s = max(s, problem.bc.f1.sup_norm(), problem.bc.f2.sup_norm())
    return s


def fd_solve(problem: Problem, grid: FdGrid | None = None, times=(1.0,)):
    """Solve on the whole composite domain; returns ``(snapshots, trace)``.

    The trace holds the interface temperatures and the one-sided derivative
    from the left layer, matching the map's convention.
    """
    grid = grid or FdGrid()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise ConfigError("output times must be positive")
    mesh = _mesh_for(problem, grid, float(times.max()))
    left, right = _outer_ends(problem)
    stepper = _Stepper(mesh, left, right)
    u = mesh.cell_average(problem.u0)
    for i, v in _dirichlet_values(left, right, 0.0).items():
        u[i % mesh.size] = v
    states = np.array(_march(stepper, u, times, _data_events(problem), grid, _data_scale(problem)))
    snaps = [FieldSnapshot(mesh.x.copy(), s, float(t)) for s, t in zip(states, times)]
    idx = mesh.marks[1:-1]
    n = len(idx)
    tr = InterfaceTrace(
        times=times,
        u=states[:, idx],
        ux=np.stack([mesh.left_derivative(states, i) for i in idx], axis=1) if n else np.zeros((times.size, 0)),
        sigmas_left=mesh.sigmas[:n].copy(),
        positions=np.asarray(problem.domain.interfaces, dtype=float),
        shift=problem.shift,
        diagnostics={"nodes": mesh.size, "h": grid.h, "dt": grid.dt, "x_min": float(mesh.x[0]),
                     "x_max": float(mesh.x[-1])},
    )
    if problem.domain.is_finite:
        tr.boundary_u = states[:, [0, -1]]
        tr.boundary_ux = np.stack([mesh.right_derivative(states, 0),
                                   mesh.left_derivative(states, mesh.size - 1)], axis=1)
        tr.boundary_sigmas = np.array([mesh.sigmas[0], mesh.sigmas[-1]])
    return snaps, tr


def _onset_value(problem: Problem, j):
    """Interface temperature as t -> 0+: the sigma-weighted mean of the one-sided limits."""
    x = problem.domain.interfaces[j]
    s1, s2 = problem.sigmas[j], problem.sigmas[j + 1]
    ul = float(problem.u0.layer_value(j, x))
    ur = float(problem.u0.layer_value(j + 1, x))
    return (s1 * ul + s2 * ur) / (s1 + s2)


def _interface_forcing(times, values, onset, starts):
    """Interpolant of one interface temperature, restarted at every data break.

    Values start like ``a + b sqrt(t - r)`` after each restart ``r``, so each
    segment is a cubic spline in ``sqrt(t - r)``.
    """
    pieces = []
    v0 = onset
    for k, r in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else np.inf
        sel = (times > r) & (times <= stop)
        if not np.any(sel):
            pieces.append((r, lambda s, v0=v0: np.full_like(s, v0)))
            continue
        pc = CubicSpline(np.sqrt(np.r_[0.0, times[sel] - r]), np.r_[v0, values[sel]])
        pieces.append((r, pc))
        v0 = float(pc(np.sqrt(stop - r))) if np.isfinite(stop) else v0

    def f(t):
        k = max(int(np.searchsorted(starts, t, side="left")) - 1, 0)
        r, pc = pieces[k]
        return pc(np.sqrt(np.maximum(t - r, 0.0)))
    return f


def layerwise_bvp_solve(problem: Problem, trace: InterfaceTrace, grid: FdGrid | None = None, times=None,
                        max_gap: float | None = None):
    """Solve every layer on its own with Dirichlet data from ``trace`` at the interfaces.

    Outer ends keep the problem's own conditions (decay for infinite domains).
    Returns one list of :class:`FieldSnapshot` per layer.
    """
    grid = grid or FdGrid()
    times = trace.times if times is None else np.atleast_1d(np.asarray(times, dtype=float))
    if trace.u.shape[1] != problem.n:
        raise ConfigError("trace does not match the number of interfaces")
    # spline forcing needs samples a few steps apart, or a fixed fraction of the time since the last
    # restart (t = 0 or a boundary-data break) where values move slowly
    events = _data_events(problem)
    starts = np.r_[0.0, events]
    last = starts[np.searchsorted(starts, trace.times, side="left") - 1]
    gaps = trace.times - np.maximum(np.r_[0.0, trace.times[:-1]], last)
    limit = np.full(gaps.size, max_gap) if max_gap is not None else np.maximum(8 * grid.dt, 0.5 * (trace.times - last))
    bad = np.nonzero(gaps > limit)[0]
    if bad.size:
        i = int(bad[0])
        raise ConfigError(f"trace spacing {gaps[i]:g} before t={trace.times[i]:g} too coarse for boundary "
                          f"forcing; need spacing <= {limit[i]:g}")
    if np.max(times) > trace.times[-1] + 1e-12:
        raise ConfigError("requested times exceed the trace")

    d = problem.domain
    full = _mesh_for(problem, grid, float(np.max(times)))
    edges = [full.x[0]] + list(d.interfaces) + [full.x[-1]]
    ends = _outer_ends(problem)
    forcing = [_interface_forcing(trace.times, trace.u[:, j], _onset_value(problem, j), starts)
               for j in range(problem.n)]
    out = []
    scale = _data_scale(problem)
    for j in range(d.n_layers):
        mesh = _Mesh(edges[j:j + 2], [d.sigmas[j]], grid)
        left = ends[0] if j == 0 else _End("dirichlet", forcing[j - 1])
        right = ends[1] if j == d.n_layers - 1 else _End("dirichlet", forcing[j])
        stepper = _Stepper(mesh, left, right)
        u0 = InitialData([problem.u0.layers[j]]) if problem.u0.layers[j] else InitialData.zero(1)
        u = mesh.cell_average(u0)
        for i, v in _dirichlet_values(left, right, 0.0).items():
            u[i % mesh.size] = v
        events = _data_events(problem) if j in (0, d.n_layers - 1) else []
        states = _march(stepper, u, times, events, grid, scale)
        out.append([FieldSnapshot(mesh.x.copy(), s, float(t)) for s, t in zip(states, times)])
    return out


def flux_jumps(problem: Problem, layers):
    """``s_j**2 u_x`` from each side of every interface, shape ``(times, n, 2)``."""
    s = problem.sigmas
    T = len(layers[0])
    out = np.zeros((T, problem.n, 2))
    for j in range(problem.n):
        for k in range(T):
            a, b = layers[j][k], layers[j + 1][k]
            xa, xb = a.x, b.x
            ha, hb = xa[-1] - xa[-2], xb[1] - xb[0]
            left = (3 * a.u[-1] - 4 * a.u[-2] + a.u[-3]) / (2 * ha)
            right = (-3 * b.u[0] + 4 * b.u[1] - b.u[2]) / (2 * hb)
            out[k, j] = s[j] ** 2 * left, s[j + 1] ** 2 * right
    return out


@dataclass
class TraceReport:
    max_abs: dict
    rms: dict

    def worst(self) -> float:
        return max(self.max_abs.values(), default=0.0)

    def within(self, tol: float) -> bool:
        return self.worst() <= tol

    def lines(self):
        for k in self.max_abs:
            yield f"{k}: max_abs={self.max_abs[k]:.3e} rms={self.rms[k]:.3e}"


def compare_traces(a: InterfaceTrace, b: InterfaceTrace, include_flux: bool = True) -> TraceReport:
    """Channel-wise max-abs and RMS differences; the time grids must agree."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=1e-12, atol=0):
        raise ConfigError("traces have mismatched time grids")
    if a.u.shape != b.u.shape:
        raise ConfigError("traces have mismatched interface counts")
    mx, rms = {}, {}
    chans = [("u", a.u, b.u), ("ux", a.ux, b.ux)]
    if include_flux:
        chans.append(("flux", a.flux, b.flux))
    for name, x, y in chans:
        for j in range(x.shape[1]):
            d = np.abs(x[:, j] - y[:, j])
            key = f"{name}[{j}]"
            mx[key] = float(np.max(d))
            rms[key] = float(np.sqrt(np.mean(d ** 2)))
    return TraceReport(mx, rms)


def write_snapshots_csv(path, snapshots, shift: float = 0.0):
    """One row per (time, node): ``t,x,u`` in original coordinates."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for s in snapshots:
            for x, u in zip(s.x - shift, s.u):
                w.writerow([repr(float(s.t)), repr(float(x)), repr(float(u))])
    return path
