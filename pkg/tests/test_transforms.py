import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from interfacemap.domain import InitialData, PolyPiece, TimeSignal
from interfacemap.transforms import (
    SERIES_THRESHOLD,
    SpectralPoint,
    layer_transform,
    piece_transform,
    piece_transform_closed,
    piece_transform_series,
    scaled_time_transform,
)


def quad_transform(pieces, k):
    """Brute-force real-axis quadrature of int exp(-ikx) p(x) dx."""
    total = 0.0
    for p in pieces:
        re = integrate.quad(lambda x: (np.exp(-1j * k * x) * p(x)).real, p.a, p.b, epsabs=1e-13, epsrel=1e-13)[0]
        im = integrate.quad(lambda x: (np.exp(-1j * k * x) * p(x)).imag, p.a, p.b, epsabs=1e-13, epsrel=1e-13)[0]
        total += re + 1j * im
    return total


def test_unit_piece_examples():
    p = PolyPiece((0.0, 1.0), [1.0])
    assert abs(piece_transform(p, 0.0) - 1.0) < 1e-15
    assert abs(piece_transform(p, 2 * np.pi)) < 1e-14


def test_linear_piece_matches_quadrature():
    p = PolyPiece((0.0, 1.0), [0.0, 1.0])
    k = 1 - 1j
    assert abs(piece_transform(p, k) - quad_transform([p], k)) < 1e-12


def test_layer_transform_examples():
    u0 = InitialData([[], [PolyPiece((0.0, 1.0), [1.0, -2.0]), PolyPiece((1.5, 3.0), [0.5, 0.0, 1.0])]])
    k = np.array([0.3 + 0.1j, -2.0 + 0.5j, 4.0])
    assert np.all(layer_transform(u0, 0, k) == 0)
    one = InitialData([[u0.layers[1][0]]])
    assert np.array_equal(layer_transform(one, 0, k), piece_transform(u0.layers[1][0], k))
    got = layer_transform(u0, 1, k)
    want = np.array([quad_transform(u0.layers[1], kk) for kk in k])
    assert np.max(np.abs(got - want)) < 1e-11


def test_spectral_point():
    sp = SpectralPoint.of([1 + 2j, -0.5 + 3j])
    assert np.array_equal(sp.kappa_sq, sp.kappa * sp.kappa)


def test_shift_folds_into_exponent():
    p = PolyPiece((-2.0, -1.0), [1.0, 3.0])
    k = 40j + 3.0
    # exp(-ikx) on x<0 with Im k large is huge; the shift brings it back
    shift = -40.0 * 2.0
    got = piece_transform(p, k, shift)
    want = quad_transform([p], k) * np.exp(shift)
    assert abs(got - want) < 1e-10 * abs(want)


def test_overflow_is_reported():
    p = PolyPiece((-20.0, -10.0), [1.0])
    with pytest.raises(OverflowError):
        piece_transform(p, -100j)


def test_scaled_time_transform_examples():
    kappa = np.array([1 + 1j, 3.0, 0.2 + 2j])
    assert np.all(scaled_time_transform(TimeSignal.zero(), kappa, 0.5) == 0)
    k = 30.0 * np.exp(0.1j)
    t = 5.0
    c = 2.5
    val = scaled_time_transform(TimeSignal.constant(c), k, t)
    assert abs(val - c / k ** 2) < 1e-10 * abs(c / k ** 2)

    f = TimeSignal.piecewise([0.0, 0.3, 0.55], [1.0, -2.0, 0.5])
    k = 1 + 1j
    t = 0.7
    lam = k * k

    def part(s, fn):
        return fn(np.exp(lam * (s - t)) * f(s))

    opts = dict(epsabs=1e-13, epsrel=1e-13, points=[0.3, 0.55])
    want = integrate.quad(part, 0, t, args=(np.real,), **opts)[0] \
        + 1j * integrate.quad(part, 0, t, args=(np.imag,), **opts)[0]
    assert abs(scaled_time_transform(f, k, t) - want) < 1e-12


@st.composite
def pieces(draw):
    a = draw(st.floats(-3.0, 3.0))
    w = draw(st.floats(0.05, 3.0))
    coeffs = draw(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=6))
    return PolyPiece((a, a + w), coeffs)


complexes = st.builds(complex, st.floats(-8.0, 8.0), st.floats(-3.0, 3.0))


@settings(max_examples=100, deadline=None)
@given(p=pieces(), k=complexes)
def test_conjugate_symmetry(p, k):
    a = piece_transform(p, -np.conj(k))
    b = np.conj(piece_transform(p, k))
    assert abs(a - b) <= 1e-13 * max(1.0, abs(b))


@settings(max_examples=100, deadline=None)
@given(p=pieces(), q=pieces(), k=complexes, alpha=st.floats(-3.0, 3.0))
def test_linearity_in_coefficients(p, q, k, alpha):
    n = max(len(p.coeffs), len(q.coeffs))
    cp = np.pad(p.coeffs, (0, n - len(p.coeffs)))
    cq = np.pad(q.coeffs, (0, n - len(q.coeffs)))
    combo = PolyPiece(p.support, cp + alpha * cq)
    other = PolyPiece(p.support, cq)
    lhs = piece_transform(combo, k)
    rhs = piece_transform(p, k) + alpha * piece_transform(other, k)
    scale = np.sum(np.abs(cp) + abs(alpha) * np.abs(cq)) * np.exp(abs(k.imag) * 6.0) * 6.0
    assert abs(lhs - rhs) <= 1e-13 * scale


@settings(max_examples=100, deadline=None)
@given(p=pieces(), frac=st.floats(0.5, 2.0), angle=st.floats(0.0, 2 * np.pi))
def test_branch_agreement_on_switch_shell(p, frac, angle):
    # switchover shell |k|(b-a) in [0.5, 2] x threshold
    r = frac * SERIES_THRESHOLD * (p.degree + 1) / (p.b - p.a)
    k = r * np.exp(1j * angle)
    s = piece_transform_series(p, k)
    c = piece_transform_closed(p, k)
    ref = max(abs(s), abs(quad_transform([PolyPiece(p.support, np.abs(p.coeffs))], 1j * abs(k.imag))))
    assert abs(s - c) <= 1e-10 * ref


@settings(max_examples=100, deadline=None)
@given(
    values=st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=4),
    r=st.floats(0.0, 50.0), theta=st.floats(-np.pi / 4, np.pi / 4), t=st.floats(1e-3, 5.0),
    flip=st.booleans(),
)
def test_scaled_time_transform_bounded(values, r, theta, t, flip):
    breaks = list(np.linspace(0.0, 2.0, len(values)))
    f = TimeSignal.piecewise(breaks, values)
    k = r * np.exp(1j * theta)
    if flip:
        k = -k  # Re(k**2) >= 0 in both sectors
    sup = max(abs(v) for v in values)
    assert abs(scaled_time_transform(f, k, t)) <= sup * t * (1 + 1e-12) + 1e-300
