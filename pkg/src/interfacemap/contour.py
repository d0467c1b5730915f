"""Contour quadrature of the initial-to-interface maps.

The contour runs in along the ray ``arg kappa = 3pi/4 + delta``, over the arc
``|kappa| = R`` through ``iR``, and out along ``arg kappa = pi/4 - delta``.
Tilting the rays by ``delta`` towards the real axis puts them where
``Re(kappa**2) > 0`` so ``exp(-kappa**2 t)`` decays like a Gaussian; the
integrand is analytic between the tilted and untilted rays as long as no zero
of ``det A`` is crossed, which :func:`adapt_R` certifies.

The interface values are

    u(x_j, t)   = (1/(i pi)) * integral kappa * g0_j(kappa) dkappa,
    u_x(x_j, t) = (1/(i pi)) * integral kappa * g1_j(kappa) dkappa,

with ``g0``, ``g1`` the tilted solutions of the per-node systems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from math import pi, sin, sqrt

import numpy as np

from .assembly import (
    SINGULAR_PIVOT,
    _robin_rhs,
    assemble_matrix,
    data_rhs,
    det_scan,
    lu_factor,
    lu_solve,
)
from .domain import Problem, normalize_problem
from .errors import ConfigError, NumericalError, PoleProximityError

__all__ = [
    "T_MIN",
    "DET_THRESHOLD",
    "ContourSpec",
    "InterfaceTrace",
    "default_spec",
    "nodes",
    "evaluate",
    "evaluate_infinite",
    "evaluate_finite",
    "trace",
    "enclosed_zeros",
    "adapt_R",
    "interface_map",
]

LOGGER = logging.getLogger(__name__)

T_MIN = 1e-3
DET_THRESHOLD = 1e-8
TAIL_TOL = 1e-8
GL_POINTS = 16
_TIME_CHUNK = 32


@dataclass(frozen=True)
class ContourSpec:
    R: float = 1.0
    delta: float = pi / 12
    L: float = 0.0              # 0 means "derive from t_min"
    density: float = 8.0        # nodes per unit arclength
    rule: str = "gauss-legendre"
    t_min: float = T_MIN

    def __post_init__(self):
        if self.L <= 0:
            object.__setattr__(self, "L", sqrt(37.0 / (self.t_min * sin(2 * self.delta))))

    def violations(self) -> list[str]:
        out = []
        if not self.R > 0:
            out.append("R must be positive")
        if not 0 < self.delta <= pi / 8 + 1e-15:
            out.append("delta must lie in (0, pi/8]")
        if not self.L > 0:
            out.append("L must be positive")
        if not self.density >= 4:
            out.append("density must be at least 4")
        if self.rule not in ("gauss-legendre", "simpson"):
            out.append(f"unknown quadrature rule {self.rule!r}")
        if not self.t_min > 0:
            out.append("t_min must be positive")
        return out

    def check(self) -> "ContourSpec":
        v = self.violations()
        if v:
            raise ConfigError(v)
        return self


@dataclass
class InterfaceTrace:
    """Interface temperatures and left-layer derivatives over time.

    Finite domains also carry the values at both outer ends in ``boundary_u``
    and ``boundary_ux`` (columns: left end, right end).
    """

    times: np.ndarray
    u: np.ndarray                  # (T, n)
    ux: np.ndarray                 # (T, n)
    sigmas_left: np.ndarray        # sigma of the layer left of each interface
    positions: np.ndarray          # interface positions, normalized coordinates
    shift: float = 0.0
    boundary_u: np.ndarray | None = None
    boundary_ux: np.ndarray | None = None
    boundary_sigmas: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def flux(self) -> np.ndarray:
        return self.sigmas_left ** 2 * self.ux

    @property
    def boundary_flux(self):
        if self.boundary_ux is None:
            return None
        return self.boundary_sigmas ** 2 * self.boundary_ux

    @property
    def original_positions(self) -> np.ndarray:
        return self.positions - self.shift

    def __len__(self):
        return len(self.times)


def default_spec(problem: Problem, t_min: float = T_MIN, delta: float = pi / 12, R: float = 1.0,
                 rule: str = "gauss-legendre") -> ContourSpec:
    """Contour sized for ``problem``: the node density follows the fastest data phase ``|x|/sigma``."""
    rate = 0.0
    d = problem.domain
    lo, hi = problem.u0.extent()
    for j, s in enumerate(d.sigmas):
        a, b = d.layer_bounds(j)
        ends = [x for x in (a, b, lo, hi) if np.isfinite(x)]
        rate = max(rate, max(abs(x) for x in ends) / s)
    widths = [(b - a) / s for j, s in enumerate(d.sigmas)
              for a, b in [d.layer_bounds(j)] if np.isfinite(a) and np.isfinite(b)]
    rate = max(rate, sum(widths))
    density = max(8.0, 3.0 * rate)
    return ContourSpec(R=R, delta=delta, density=density, rule=rule, t_min=t_min).check()


def _segment_rule(length: float, density: float, rule: str):
    """Nodes in [0, length] and weights for one straight or arc segment (in its own parameter)."""
    if rule == "simpson":
        m = max(2, int(np.ceil(length * density)))
        m += m % 2
        s = np.linspace(0.0, length, m + 1)
        w = np.ones(m + 1)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        return s, w * (length / m) / 3.0
    panels = max(1, int(np.ceil(length * density / GL_POINTS)))
    x, wq = np.polynomial.legendre.leggauss(GL_POINTS)
    edges = np.linspace(0.0, length, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    w = (half[:, None] * wq[None, :]).ravel()
    return s, w


GEOMETRIC_PANELS = 24


def _ray_rule(L, r_eff, dense, base, rule, extend=False):
    parts = [_segment_rule(r_eff, dense, rule)]
    if r_eff < L:
        s1, w1 = _segment_rule(L - r_eff, base, rule)
        parts.append((s1 + r_eff, w1))
    if extend:
        # doubling panels past L; only algebraically decaying terms survive there
        x, wq = np.polynomial.legendre.leggauss(GL_POINTS)
        for i in range(GEOMETRIC_PANELS):
            a, b = L * 2.0 ** i, L * 2.0 ** (i + 1)
            parts.append((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * wq))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def nodes(spec: ContourSpec, t_max: float | None = None, extend: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes along the contour in traversal order and weights including ``dkappa``.

    ``t_max`` raises the density where ``exp(-kappa**2 t)`` oscillates: the chirp on
    the rays turns at rate ``~ 2 r t``, the arc at rate ``2 R t`` per unit length.
    ``extend`` continues both rays geometrically to ``R + L 2**24`` for integrands
    (outer-boundary values) that decay only algebraically.
    """
    R, L, d = spec.R, spec.L, spec.delta
    t_max = spec.t_min if t_max is None else max(t_max, spec.t_min)
    ray_density = spec.density + 12.0 * sqrt(t_max)
    # past r_eff the tilt at t_max is below 1e-16, so the chirp needs no resolving there
    r_eff = min(L, sqrt(37.0 / (t_max * sin(2 * d))))
    arc_density = spec.density + 4.0 * R * t_max
    left, right = 3 * pi / 4 + d, pi / 4 - d
    e_in, e_out = np.exp(1j * left), np.exp(1j * right)

    s, w = _ray_rule(L, r_eff, ray_density, spec.density, spec.rule, extend)
    s, w = s[::-1], w[::-1]
    k_in = (R + s) * e_in                       # r decreasing
    w_in = -w * e_in
    arc_len = R * (left - right)
    s, w = _segment_rule(arc_len, arc_density, spec.rule)
    theta = left - s / R
    k_arc = R * np.exp(1j * theta)
    w_arc = w * (-1j) * np.exp(1j * theta)      # dkappa = -i R e^{i theta} dtheta/R * ds
    s, w = _ray_rule(L, r_eff, ray_density, spec.density, spec.rule, extend)
    k_out = (R + s) * e_out
    w_out = w * e_out
    return (np.concatenate([k_in, k_arc, k_out]),
            np.concatenate([w_in, w_arc, w_out]))


def _ray_end_indices(spec: ContourSpec, size: int) -> tuple[int, int]:
    # the incoming ray starts at |kappa| = R + L, the outgoing ray ends there
    return 0, size - 1


def evaluate(problem: Problem, spec: ContourSpec, times, check_pivots: bool = True) -> InterfaceTrace:
    """Interface values at each time by quadrature over the contour.

    One factorization per node serves every time; the right-hand sides are
    tilted by ``exp(-kappa**2 t)`` and solved in chunks of times.
    """
    spec.check()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < spec.t_min * (1 - 1e-12)):
        raise ConfigError(f"times must be >= t_min = {spec.t_min}")
    dom = problem.domain
    if dom.breakpoints and dom.breakpoints[0] != 0.0:
        raise ConfigError("problem must be normalized (first breakpoint at 0)")
    n = dom.n
    finite = dom.is_finite

    kappa, w = nodes(spec, float(times.max()), extend=finite)
    beta = problem.bc.beta if finite else None
    mat, rho = assemble_matrix(dom, beta, kappa)
    scale = np.max(np.abs(mat), axis=-1)
    mat = mat / scale[..., None]
    lu, perm, minpiv = lu_factor(mat)
    if check_pivots and np.min(minpiv) < SINGULAR_PIVOT:
        i = int(np.argmin(minpiv))
        raise PoleProximityError(
            f"contour too close to a zero of det A: pivot {minpiv[i]:.2e} at kappa={kappa[i]:.6g}; "
            f"increase R"
        )
    base = data_rhs(problem, kappa, rho) / scale
    lam = kappa * kappa
    wk = w * kappa / (1j * pi)

    m = mat.shape[-1]
    vals = np.zeros((m, times.size), dtype=complex)
    end_mag = np.zeros((m, times.size))
    absum = np.zeros(times.size)
    resid = 0.0
    i0, i1 = _ray_end_indices(spec, kappa.size)
    for c0 in range(0, times.size, _TIME_CHUNK):
        tc = times[c0:c0 + _TIME_CHUNK]
        with np.errstate(under="ignore"):
            tilt = np.exp(-lam[:, None] * tc[None, :])
        rhs = base[:, :, None] * tilt[:, None, :]
        if finite:
            rhs = rhs + np.stack([_robin_rhs(problem, kappa, t) for t in tc], axis=-1) / scale[..., None]
        x = lu_solve(lu, perm, rhs)
        terms = wk[:, None, None] * x
        vals[:, c0:c0 + tc.size] = np.sum(terms, axis=0)
        absum[c0:c0 + tc.size] = np.max(np.sum(np.abs(terms), axis=0), axis=0)
        r = np.einsum("nij,njk->nik", mat, x) - rhs
        denom = np.max(np.abs(x)) + np.max(np.abs(rhs))
        if denom > 0:
            resid = max(resid, float(np.max(np.abs(r)) / denom))
        # integrand F = kappa X/(i pi); an a/kappa + b/kappa**2 tail past the ray ends
        # integrates to b/kappa_out - b/kappa_in, which this difference measures
        f_in, f_out = (kappa[i] ** 2 * x[i] / (1j * pi) for i in (i0, i1))
        end_mag[:, c0:c0 + tc.size] = np.abs(f_out - f_in)

    tail = end_mag
    if finite:
        inner = np.r_[1:n + 1, n + 3:2 * n + 3]
        # only the temperature channels at Robin/Neumann ends decay fast enough to integrate
        b = problem.bc.beta
        outer = np.array([c for c, b2 in ((0, b[1]), (n + 1, b[3])) if b2 != 0.0], dtype=int)
    else:
        inner, outer = np.arange(2 * n), np.array([], dtype=int)
    g0, g1 = vals[inner[:n]], vals[inner[n:]]
    diag = {
        "R": spec.R, "delta": spec.delta, "L": spec.L, "density": spec.density, "rule": spec.rule,
        "nodes": int(kappa.size),
        "min_pivot": float(np.min(minpiv)),
        "min_abs_det": float(np.min(np.prod(np.abs(np.diagonal(lu, axis1=1, axis2=2)), axis=1))),
        "residual": resid,
        "tail_estimate": float(np.max(tail[inner], initial=0.0)),
        "boundary_tail_estimate": float(np.max(tail[outer], initial=0.0)),
        "max_imag": float(np.max(np.abs(vals[inner].imag), initial=0.0)),
        # cancellation in the sum, large when R**2 t is large on the arc
        "roundoff_estimate": float(np.finfo(float).eps * np.max(absum, initial=0.0)),
    }
    if diag["tail_estimate"] > TAIL_TOL:
        LOGGER.warning("truncation tail estimate %.2e exceeds %.0e", diag["tail_estimate"], TAIL_TOL)
    s = np.asarray(dom.sigmas)
    out = InterfaceTrace(
        times=times,
        u=g0.real.T.copy(),
        ux=g1.real.T.copy(),
        sigmas_left=s[:n].copy(),
        positions=np.asarray(dom.interfaces),
        shift=problem.shift,
        diagnostics=diag,
    )
    if finite:
        out.boundary_u, out.boundary_ux = _boundary_values(problem, vals[[0, n + 1]].real, times)
        out.boundary_sigmas = np.array([s[0], s[-1]])
    return out


def _boundary_values(problem: Problem, g0, times):
    """Outer-end temperature and derivative, completed through the Robin rows.

    The quadrature value is used for ``u`` where ``beta_u_x != 0``; the derivative
    then follows from the boundary condition. At a Dirichlet end ``u`` is the data
    and the derivative integrand does not decay on the contour, so it is NaN.
    """
    b = problem.bc.beta
    u = np.empty((times.size, 2))
    ux = np.empty((times.size, 2))
    for col, (ba, bb, f) in enumerate(((b[0], b[1], problem.bc.f1), (b[2], b[3], problem.bc.f2))):
        ft = np.asarray(f.left_limit(times), dtype=float)
        if bb != 0.0:
            u[:, col] = g0[col]
            ux[:, col] = (ft - ba * g0[col]) / bb
        else:
            u[:, col] = ft / ba
            ux[:, col] = np.nan
    return u, ux


def evaluate_infinite(problem: Problem, spec: ContourSpec, t) -> InterfaceTrace:
    if problem.domain.is_finite:
        raise ConfigError("evaluate_infinite needs an infinite domain")
    return evaluate(problem, spec, t)


def evaluate_finite(problem: Problem, spec: ContourSpec, t) -> InterfaceTrace:
    if not problem.domain.is_finite:
        raise ConfigError("evaluate_finite needs a finite domain")
    return evaluate(problem, spec, t)


def trace(problem: Problem, spec: ContourSpec, times, raise_on_tail: bool = True) -> InterfaceTrace:
    """Evaluate over a time grid; a truncation tail above tolerance is an error naming the times."""
    out = evaluate(problem, spec, times)
    if raise_on_tail and out.diagnostics["tail_estimate"] > TAIL_TOL:
        end = _tail_times(problem, spec, out.times)
        raise NumericalError(f"truncation tail above {TAIL_TOL:g} at time indices {end}; lower t_min")
    return out


def _tail_times(problem, spec, times):
    # per-time recomputation is cheap compared with reporting nothing useful
    bad = []
    for i, t in enumerate(times):
        d = evaluate(problem, spec, [t]).diagnostics
        if d["tail_estimate"] > TAIL_TOL:
            bad.append(i)
    return bad


def _closed_path(spec: ContourSpec, step: float):
    """Sample the contour (truncated at ``R + L``) closed by the outer arc through the upper region."""
    R, L, d = spec.R, spec.L, spec.delta
    left, right = 3 * pi / 4 + d, pi / 4 - d
    big = R + L
    ray = np.arange(0.0, L, step)
    pieces = [
        (big - ray) * np.exp(1j * left),
        R * np.exp(1j * np.arange(left, right, -step / R)),
        (R + ray) * np.exp(1j * right),
        big * np.exp(1j * np.arange(right, left, step / big)),
    ]
    return np.concatenate(pieces + [pieces[0][:1]])


def enclosed_zeros(problem: Problem, spec: ContourSpec, max_rounds: int = 30) -> int:
    """Number of zeros of ``det A`` above the contour (within ``|kappa| < R + L``), by the argument principle."""
    dom = problem.domain
    beta = problem.bc.beta if problem.bc is not None else None
    widths = sum((b - a) / s for s, (a, b) in zip(dom.sigmas, zip(dom.edges[:-1], dom.edges[1:]))
                 if np.isfinite(a) and np.isfinite(b))
    step = 1.0 / max(4.0, 4.0 * widths)
    path = _closed_path(spec, step)

    def phase(k):
        mat, _ = assemble_matrix(dom, beta, k)
        mat = mat / np.max(np.abs(mat), axis=-1)[..., None]
        sign, _ = np.linalg.slogdet(mat)
        return sign

    ph = phase(path)
    for _ in range(max_rounds):
        inc = np.angle(ph[1:] / ph[:-1])
        coarse = np.abs(inc) > pi / 4
        if not np.any(coarse):
            break
        idx = np.nonzero(coarse)[0]
        mid = 0.5 * (path[idx] + path[idx + 1])
        path = np.insert(path, idx + 1, mid)
        ph = np.insert(ph, idx + 1, phase(mid))
    else:
        raise NumericalError("argument-principle sampling did not resolve the determinant phase")
    total = np.sum(np.angle(ph[1:] / ph[:-1]))
    return int(round(total / (2 * pi)))


def adapt_R(problem: Problem, spec: ContourSpec, threshold: float = DET_THRESHOLD,
            cap: float = 2.0 ** 10) -> ContourSpec:
    """Double ``R`` until the contour is certified pole-free.

    Certified means the equilibrated ``|det A|`` stays above ``threshold`` on every
    node and no zero of ``det A`` lies above the contour of radius ``R/2``, which
    keeps zeros a margin away from the nodes actually used.
    """
    R0 = spec.R
    cur = spec
    while cur.R <= cap * R0:
        scan = det_scan(problem, cur)
        if scan.min_abs_det > threshold and enclosed_zeros(problem, replace(cur, R=cur.R / 2)) == 0:
            if cur.R != R0:
                LOGGER.info("adapt_R: R raised from %g to %g", R0, cur.R)
            return cur
        cur = replace(cur, R=2 * cur.R)
    raise PoleProximityError(f"cannot certify pole-free contour up to R = {cap * R0:g}")


def interface_map(problem: Problem, times, raise_on_tail: bool = True, **overrides) -> InterfaceTrace:
    """Normalize, size and certify a contour, then trace the interface values.

    ``overrides`` replace fields of the default :class:`ContourSpec`; ``R`` is
    the starting radius for :func:`adapt_R`.
    """
    norm = normalize_problem(problem)
    base = default_spec(norm, t_min=overrides.pop("t_min", T_MIN))
    spec = replace(base, **overrides).check() if overrides else base
    if "L" not in overrides and spec.delta != base.delta:
        spec = replace(spec, L=0.0)
    spec = adapt_R(norm, spec)
    return trace(norm, spec, times, raise_on_tail=raise_on_tail)
