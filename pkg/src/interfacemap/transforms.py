"""Exact transforms of polynomial pieces and piecewise-constant boundary signals.

Every function accepts arrays of complex spectral arguments and an optional
``shift`` added to the exponent, so callers can fold row scalings and the
``exp(-kappa**2 t)`` tilt into one overflow-safe exponential.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .domain import InitialData, PolyPiece, TimeSignal

__all__ = [
    "SERIES_THRESHOLD",
    "SpectralPoint",
    "piece_transform",
    "piece_transform_series",
    "piece_transform_closed",
    "layer_transform",
    "scaled_time_transform",
]

# Series branch is used when |k|(b - a) < SERIES_THRESHOLD * (degree + 1).
SERIES_THRESHOLD = 1.0
_SERIES_TERMS = 64
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class SpectralPoint:
    """Contour node ``kappa`` and ``kappa**2``, the common dispersion value of every layer."""

    kappa: np.ndarray
    kappa_sq: np.ndarray

    @classmethod
    def of(cls, kappa) -> "SpectralPoint":
        kappa = np.asarray(kappa, dtype=complex)
        return cls(kappa, kappa * kappa)


def _checked_exp(expo: np.ndarray) -> np.ndarray:
    if expo.size and np.max(expo.real) > _EXP_LIMIT:
        raise OverflowError(
            f"transform exponent {np.max(expo.real):.1f} exceeds the double range "
            f"(|Im k| times the support distance is too large)"
        )
    return np.exp(expo)


def _moments(q: np.ndarray, count: int) -> np.ndarray:
    """``mu[n] = int_{-1}^{1} s**n q(s) ds`` for ``n < count``."""
    mu = np.zeros(count)
    for m, c in enumerate(q):
        n = np.arange(count)
        p = n + m
        mu += np.where(p % 2 == 0, 2.0 * c / (p + 1), 0.0)
    return mu


def piece_transform_series(piece: PolyPiece, k, shift=0.0) -> np.ndarray:
    """Taylor-series evaluation of ``exp(shift) * int_a^b exp(-ikx) p(x) dx``."""
    k = np.asarray(k, dtype=complex)
    c, h, q = piece.centered()
    w = -1j * k * h
    coef = _moments(q, _SERIES_TERMS) / np.array([float(factorial(n)) for n in range(_SERIES_TERMS)])
    acc = np.zeros_like(w)
    for cn in coef[::-1]:
        acc = acc * w + cn
    pref = _checked_exp(np.asarray(shift - 1j * k * c, dtype=complex))
    return h * pref * acc


def piece_transform_closed(piece: PolyPiece, k, shift=0.0) -> np.ndarray:
    """Integration-by-parts closed form; ill-conditioned for small ``|k|(b-a)``."""
    k = np.asarray(k, dtype=complex)
    c, h, q = piece.centered()
    z = k * h
    e_left = _checked_exp(np.asarray(shift - 1j * k * (c - h), dtype=complex))
    e_right = _checked_exp(np.asarray(shift - 1j * k * (c + h), dtype=complex))
    inv = 1.0 / (1j * z)
    acc_l = np.zeros_like(z)
    acc_r = np.zeros_like(z)
    power = inv
    d = q.copy()
    while d.size:
        acc_l = acc_l + np.polynomial.polynomial.polyval(-1.0, d) * power
        acc_r = acc_r + np.polynomial.polynomial.polyval(1.0, d) * power
        power = power * inv
        d = np.polynomial.polynomial.polyder(d) if d.size > 1 else d[:0]
    return h * (acc_l * e_left - acc_r * e_right)


def piece_transform(piece: PolyPiece, k, shift=0.0) -> np.ndarray:
    """``exp(shift) * int_a^b exp(-ikx) p(x) dx`` for complex ``k``.

    Small ``|k|(b-a)`` uses the Taylor series about the midpoint, larger values the
    integration-by-parts closed form. Raises OverflowError rather than saturating.
    """
    k = np.asarray(k, dtype=complex)
    shift = np.broadcast_to(np.asarray(shift, dtype=complex), k.shape)
    out = np.empty(k.shape, dtype=complex)
    small = np.abs(k) * (piece.b - piece.a) < SERIES_THRESHOLD * (piece.degree + 1)
    if np.any(small):
        out[small] = piece_transform_series(piece, k[small], shift[small])
    big = ~small
    if np.any(big):
        out[big] = piece_transform_closed(piece, k[big], shift[big])
    return out


def layer_transform(u0: InitialData, j: int, k, shift=0.0) -> np.ndarray:
    """Sum of :func:`piece_transform` over the pieces of layer ``j``."""
    k = np.asarray(k, dtype=complex)
    out = np.zeros(k.shape, dtype=complex)
    for p in u0.layers[j]:
        out = out + piece_transform(p, k, shift)
    return out


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(exp(z) - 1)/z`` with the removable singularity handled."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    acc = np.zeros_like(zs)
    for n in range(9, 0, -1):
        acc = (acc + 1.0) * zs / (n + 1)
    out[small] = acc + 1.0
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def scaled_time_transform(f: TimeSignal, kappa, t: float) -> np.ndarray:
    """``exp(-kappa**2 t) * int_0^t exp(kappa**2 s) f(s) ds`` for a piecewise-constant ``f``."""
    if t <= 0:
        raise ValueError("t must be positive")
    kappa = np.asarray(kappa, dtype=complex)
    lam = kappa * kappa
    out = np.zeros(kappa.shape, dtype=complex)
    edges = list(f.breaks) + [np.inf]
    for v, a, b in zip(f.values, edges[:-1], edges[1:]):
        if v == 0.0 or a >= t:
            continue
        b = min(b, t)
        # v * int_a^b exp(lam (s - t)) ds = v (b - a) exp(lam (b - t)) phi1(-lam (b - a))
        width = b - a
        out = out + v * width * np.exp(lam * (b - t)) * _phi1(-lam * width)
    return out
