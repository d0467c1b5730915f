"""Assembly and solution of the per-node linear systems for the interface transforms.

For an infinite domain with ``n`` interfaces the unknowns at a node ``kappa`` are

    X = (g0_1, ..., g0_n, g1_1, ..., g1_n),

the time transforms of the interface temperatures and left-layer derivatives.
Rows ``0..n-1`` are the global relations of layers ``0..n-1`` at ``k = kappa/sigma_j``
and rows ``n..2n-1`` those of layers ``1..n`` at ``k = -kappa/sigma_j``.

For a finite domain the unknowns also include both outer boundary nodes,

    X = (g0 at x_0..x_{n+1}, g1 at x_0..x_{n+1}),

with a Robin row first and last and ``n+1`` relations of each sign in between.

Each relation row carries exponentials ``exp(+-i kappa x / sigma)``. Rows are
stored divided by ``exp(rho)``, ``rho`` the largest real part of the row's
exponents, so nothing overflows; the right-hand side gets the same factor
through the transform ``shift`` argument. ``log_row_scales`` accumulates every
factor removed from a row.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import CompositeDomain, Problem
from .errors import PoleProximityError, SingularStructureError
from .transforms import SpectralPoint, layer_transform, scaled_time_transform

__all__ = [
    "SINGULAR_PIVOT",
    "SpectralSystem",
    "SolveResult",
    "DetScan",
    "system_size",
    "assemble_matrix",
    "data_rhs",
    "build_infinite",
    "build_finite",
    "build",
    "equilibrate",
    "lu_factor",
    "lu_solve",
    "solve_node",
    "equilibrated_det",
    "det_scan",
]

SINGULAR_PIVOT = 1e-14
_RESIDUAL_FLOOR = 1e-280


@dataclass(frozen=True)
class SpectralSystem:
    matrix: np.ndarray          # (N, m, m)
    rhs: np.ndarray             # (N, m) or (N, m, T)
    node: SpectralPoint
    kind: str
    n: int
    log_row_scales: np.ndarray  # (N, m); row i was divided by exp(log_row_scales[i])

    @property
    def row_scales(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_row_scales)

    @property
    def size(self) -> int:
        return self.matrix.shape[-1]


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray               # (N, m) or (N, m, T), tilted interface transforms
    kind: str
    n: int
    residual_norm: float
    min_pivot: float

    @property
    def g0(self) -> np.ndarray:
        """Interface temperature transforms, one column per interior interface."""
        n = self.n
        return self.x[:, :n] if self.kind == "infinite" else self.x[:, 1:n + 1]

    @property
    def g1(self) -> np.ndarray:
        """Left-layer derivative transforms at the interior interfaces."""
        n = self.n
        return self.x[:, n:2 * n] if self.kind == "infinite" else self.x[:, n + 3:2 * n + 3]

    @property
    def boundary_g0(self) -> np.ndarray:
        """Finite domains: temperature transforms at ``x_0`` and ``x_{n+1}``."""
        n = self.n
        return self.x[:, [0, n + 1]]

    @property
    def boundary_g1(self) -> np.ndarray:
        n = self.n
        return self.x[:, [n + 2, 2 * n + 3]]


@dataclass(frozen=True)
class DetScan:
    min_abs_det: float
    kappa_at_min: complex


def system_size(domain: CompositeDomain) -> int:
    return 2 * domain.n + 4 if domain.is_finite else 2 * domain.n


def _relation_rows(domain: CompositeDomain, kappa: np.ndarray):
    """Yield ``(row, layer, sign, entries)``; entries are ``(col, coef, exponent)`` triples.

    Node ``i`` (an interface, or an outer end when finite) owns column ``i`` for
    its temperature transform and column ``g1 + i`` for its derivative.
    """
    s = domain.sigmas
    n = domain.n
    X = domain.breakpoints
    if domain.is_finite:
        g1 = n + 2
        plus = [(1 + j, j, j, j + 1) for j in range(n + 1)]
        minus = [(n + 2 + j, j, j, j + 1) for j in range(n + 1)]
    else:
        g1 = n
        plus = [(j, j, j - 1 if j >= 1 else None, j) for j in range(n)]
        minus = [(n + j - 1, j, j - 1, j if j < n else None) for j in range(1, n + 1)]

    for sign, table in ((1, plus), (-1, minus)):
        for row, j, left, right in table:
            a = 1j * kappa / s[j]
            entries = []
            if right is not None:
                e = -sign * a * X[right]
                entries.append((right, sign * a, e))
                entries.append((g1 + right, np.ones_like(kappa), e))
            if left is not None:
                # derivative continuity; sigma_{-1} := sigma_0 at a finite left end
                ratio = 1.0 if j == 0 else s[j - 1] ** 2 / s[j] ** 2
                e = -sign * a * X[left]
                entries.append((left, -sign * a, e))
                entries.append((g1 + left, np.full_like(kappa, -ratio), e))
            yield row, j, sign, entries


def assemble_matrix(domain: CompositeDomain, beta, kappa, prescale: bool = True):
    """Return ``(matrix, rho)``; with ``prescale`` each row is divided by ``exp(rho)``."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    N, m = kappa.size, system_size(domain)
    mat = np.zeros((N, m, m), dtype=complex)
    rho = np.zeros((N, m))
    for row, _, _, entries in _relation_rows(domain, kappa):
        if prescale:
            rho[:, row] = np.max(np.stack([e.real for _, _, e in entries]), axis=0)
        for c, coef, e in entries:
            with np.errstate(over="ignore", invalid="ignore"):
                mat[:, row, c] = coef * np.exp(e - rho[:, row])
    if domain.is_finite:
        n = domain.n
        b1, b2, b3, b4 = beta
        mat[:, 0, 0], mat[:, 0, n + 2] = b1, b2
        mat[:, m - 1, n + 1], mat[:, m - 1, m - 1] = b3, b4
    if not prescale:
        bad = ~np.isfinite(mat)
        if np.any(bad):
            i, r, _ = np.argwhere(bad)[0]
            raise OverflowError(f"unscaled entry overflows in row {r} at node kappa={kappa[i]:.6g}")
    return mat, rho


def data_rhs(problem: Problem, kappa, rho, t=None) -> np.ndarray:
    """Initial-data part of the right-hand side, ``-u0hat_j(+-kappa/sigma_j) / sigma_j**2``.

    Scaled by ``exp(-rho)`` per row and, when ``t`` is given, tilted by ``exp(-kappa**2 t)``.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    domain = problem.domain
    s = domain.sigmas
    out = np.zeros((kappa.size, system_size(domain)), dtype=complex)
    tilt = 0.0 if t is None else -kappa * kappa * t
    for row, j, sign, _ in _relation_rows(domain, kappa):
        if not problem.u0.layers[j]:
            continue
        out[:, row] = -layer_transform(problem.u0, j, sign * kappa / s[j], tilt - rho[:, row]) / s[j] ** 2
    return out


def _robin_rhs(problem: Problem, kappa, t) -> np.ndarray:
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    out = np.zeros((kappa.size, system_size(problem.domain)), dtype=complex)
    out[:, 0] = scaled_time_transform(problem.bc.f1, kappa, t)
    out[:, -1] = scaled_time_transform(problem.bc.f2, kappa, t)
    return out


def build_infinite(problem: Problem, kappa, t: float, prescale: bool = True) -> SpectralSystem:
    """Assemble the ``2n x 2n`` system and its tilted right-hand side at time ``t``.

    The terms carrying the solution at the final time are never formed; they
    integrate to zero over the contour.
    """
    if problem.domain.is_finite:
        raise ValueError("build_infinite needs an infinite domain")
    node = SpectralPoint.of(np.atleast_1d(kappa))
    mat, rho = assemble_matrix(problem.domain, None, node.kappa, prescale)
    rhs = data_rhs(problem, node.kappa, rho, t)
    if not prescale and not np.all(np.isfinite(rhs)):
        raise OverflowError("unscaled right-hand side overflows")
    return SpectralSystem(mat, rhs, node, "infinite", problem.n, rho)


def build_finite(problem: Problem, kappa, t: float, prescale: bool = True) -> SpectralSystem:
    """Assemble the ``(2n+4)``-square system with Robin rows, boundary signals transformed up to ``t``."""
    if not problem.domain.is_finite:
        raise ValueError("build_finite needs a finite domain")
    node = SpectralPoint.of(np.atleast_1d(kappa))
    mat, rho = assemble_matrix(problem.domain, problem.bc.beta, node.kappa, prescale)
    rhs = data_rhs(problem, node.kappa, rho, t) + _robin_rhs(problem, node.kappa, t)
    if not prescale and not np.all(np.isfinite(rhs)):
        raise OverflowError("unscaled right-hand side overflows")
    return SpectralSystem(mat, rhs, node, "finite", problem.n, rho)


def build(problem: Problem, kappa, t: float) -> SpectralSystem:
    fn = build_finite if problem.domain.is_finite else build_infinite
    return fn(problem, kappa, t)


def equilibrate(system: SpectralSystem) -> SpectralSystem:
    """Divide each row of ``[matrix | rhs]`` by its largest matrix entry magnitude."""
    scale = np.max(np.abs(system.matrix), axis=-1)
    if np.any(scale == 0) or not np.all(np.isfinite(scale)):
        i, r = np.argwhere((scale == 0) | ~np.isfinite(scale))[0]
        raise SingularStructureError(f"row {r} is zero or non-finite at kappa={system.node.kappa[i]:.6g}")
    mat = system.matrix / scale[..., None]
    rhs = system.rhs / (scale[..., None] if system.rhs.ndim == 3 else scale)
    return replace(system, matrix=mat, rhs=rhs, log_row_scales=system.log_row_scales + np.log(scale))


def lu_factor(a: np.ndarray):
    """Batched LU with partial pivoting. Returns ``(lu, perm, min_abs_pivot per batch)``."""
    a = np.array(a, dtype=complex, copy=True)
    N, m, _ = a.shape
    idx = np.arange(N)
    perm = np.tile(np.arange(m), (N, 1))
    minpiv = np.full(N, np.inf)
    for k in range(m):
        p = np.argmax(np.abs(a[:, k:, k]), axis=1) + k
        rk = a[idx, k].copy()
        a[idx, k] = a[idx, p]
        a[idx, p] = rk
        pk = perm[idx, k].copy()
        perm[idx, k] = perm[idx, p]
        perm[idx, p] = pk
        piv = a[:, k, k]
        minpiv = np.minimum(minpiv, np.abs(piv))
        if k < m - 1:
            safe = np.where(piv == 0, 1.0, piv)
            l_ = np.where((piv == 0)[:, None], 0.0, a[:, k + 1:, k] / safe[:, None])
            a[:, k + 1:, k] = l_
            a[:, k + 1:, k + 1:] -= l_[:, :, None] * a[:, k, None, k + 1:]
    return a, perm, minpiv


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    vec = b.ndim == 2
    if vec:
        b = b[..., None]
    N, m, _ = lu.shape
    y = np.take_along_axis(b, perm[:, :, None], axis=1).astype(complex)
    for i in range(1, m):
        y[:, i] -= np.einsum("nj,njk->nk", lu[:, i, :i], y[:, :i])
    for i in range(m - 1, -1, -1):
        if i < m - 1:
            y[:, i] -= np.einsum("nj,njk->nk", lu[:, i, i + 1:], y[:, i + 1:])
        y[:, i] /= lu[:, i, i][:, None]
    return y[..., 0] if vec else y


def solve_node(system: SpectralSystem, check: bool = True) -> SolveResult:
    """Direct solve of every node's system; component ``j`` equals the Cramer ratio ``det(A_j)/det(A)``."""
    lu, perm, minpiv = lu_factor(system.matrix)
    worst = float(np.min(minpiv))
    if check and worst < SINGULAR_PIVOT:
        i = int(np.argmin(minpiv))
        raise PoleProximityError(
            f"contour too close to a zero of det A: pivot {worst:.2e} at kappa={system.node.kappa[i]:.6g}"
        )
    x = lu_solve(lu, perm, system.rhs)
    rhs = system.rhs if system.rhs.ndim == 3 else system.rhs[..., None]
    xx = x if x.ndim == 3 else x[..., None]
    res = np.einsum("nij,njk->nik", system.matrix, xx) - rhs
    norm = np.max(np.abs(xx), axis=1) * np.max(np.abs(system.matrix), axis=(1, 2))[:, None] \
        + np.max(np.abs(rhs), axis=1)
    # floor keeps nodes whose tilt underflowed to subnormals from reading as O(1) residuals
    rel = np.max(np.abs(res), axis=1) / np.maximum(norm, _RESIDUAL_FLOOR)
    return SolveResult(x, system.kind, system.n, float(np.max(rel, initial=0.0)), worst)


def equilibrated_det(domain: CompositeDomain, beta, kappa) -> np.ndarray:
    """Determinant after prescaling and row equilibration; same argument as ``det A``."""
    mat, _ = assemble_matrix(domain, beta, kappa)
    scale = np.max(np.abs(mat), axis=-1)
    return np.linalg.det(mat / scale[..., None])


def det_scan(problem: Problem, contour) -> DetScan:
    """Smallest ``|det|`` of the equilibrated matrix over the contour nodes.

    ``contour`` is a ContourSpec or an array of nodes.
    """
    if hasattr(contour, "R"):
        from .contour import nodes
        kappa, _ = nodes(contour)
    else:
        kappa = np.atleast_1d(np.asarray(contour, dtype=complex))
    beta = problem.bc.beta if problem.bc is not None else None
    d = np.abs(equilibrated_det(problem.domain, beta, kappa))
    i = int(np.argmin(d))
    return DetScan(float(d[i]), complex(kappa[i]))
