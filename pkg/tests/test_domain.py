import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interfacemap.domain import (
    CompositeDomain,
    InitialData,
    PolyPiece,
    RobinBoundary,
    TimeSignal,
    mirror_problem,
    normalize,
    normalize_problem,
    validate,
)
from interfacemap.errors import ConfigError


def test_minimal_instance_accepted():
    d = CompositeDomain.infinite([0.0], [1.0, 2.0])
    u0 = InitialData([[], [PolyPiece((0.0, 1.0), [1.0])]])
    p = validate(d, u0)
    assert p.domain is d and p.n == 1


def test_nonpositive_sigma():
    d = CompositeDomain.infinite([0.0], [1.0, 0.0])
    with pytest.raises(ConfigError, match="nonpositive sigma"):
        validate(d, InitialData.zero(2))


def test_piece_crossing_interface():
    d = CompositeDomain.infinite([0.0], [1.0, 2.0])
    u0 = InitialData([[], [PolyPiece((-1.0, 1.0), [1.0])]])
    with pytest.raises(ConfigError, match="piece crosses interface"):
        validate(d, u0)


def test_all_violations_reported():
    d = CompositeDomain.finite([0.0, 2.0, 1.0], [1.0, -1.0])
    bc = RobinBoundary((0.0, 0.0, 1.0, 0.0))
    with pytest.raises(ConfigError) as exc:
        validate(d, InitialData.zero(2), bc)
    msgs = exc.value.violations
    assert any("strictly increasing" in m for m in msgs)
    assert any("nonpositive sigma" in m for m in msgs)
    assert any("degenerate Robin" in m for m in msgs)


def test_degree_cap():
    d = CompositeDomain.infinite([0.0], [1.0, 1.0])
    u0 = InitialData([[PolyPiece((-1.0, 0.0), np.ones(14))], []])
    with pytest.raises(ConfigError, match="degree 13"):
        validate(d, u0)


def test_finite_needs_boundary():
    d = CompositeDomain.finite([0.0, 1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ConfigError, match="requires Robin"):
        validate(d, InitialData.zero(2))


@pytest.mark.parametrize("kind,bp,expect,shift", [
    ("infinite", [3.0], [0.0], -3.0),
    ("finite", [1.0, 2.0, 4.0], [0.0, 1.0, 3.0], -1.0),
    ("finite", [0.0, 1.0, 3.0], [0.0, 1.0, 3.0], 0.0),
])
def test_normalize_examples(kind, bp, expect, shift):
    d = CompositeDomain(kind, bp, [1.0] * (len(bp) + (1 if kind == "infinite" else -1)))
    out, s = normalize(d)
    assert list(out.breakpoints) == expect
    assert s == shift
    if shift == 0.0:
        assert out == d


def test_normalize_problem_moves_data():
    d = CompositeDomain.infinite([3.0], [1.0, 2.0])
    u0 = InitialData([[PolyPiece((2.0, 3.0), [0.0, 1.0])], []])
    p = normalize_problem(validate(d, u0))
    assert p.shift == -3.0
    x = np.linspace(-1.0, 0.0, 7)
    assert np.allclose(p.u0(x), x + 3.0)


def test_time_signal_left_limit():
    f = TimeSignal.piecewise([0.0, 0.5], [1.0, -2.0])
    assert f(0.5) == -2.0
    assert f.left_limit(0.5) == 1.0
    assert f(0.2) == f.left_limit(0.2) == 1.0


def test_mirror_reverses_layers():
    d = CompositeDomain.infinite([0.0, 1.0], [1.0, 2.0, 3.0])
    u0 = InitialData([[PolyPiece((-1.0, 0.0), [1.0, 1.0])], [], [PolyPiece((1.0, 2.0), [2.0])]])
    m = mirror_problem(validate(d, u0))
    assert m.domain.breakpoints == (-1.0, 0.0)
    assert m.domain.sigmas == (3.0, 2.0, 1.0)
    x = np.linspace(-2, 2, 41)
    assert np.allclose(m.u0(x), u0(-x))
    validate(m.domain, m.u0)


breakpoints = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=6, unique=True).map(sorted)


@settings(max_examples=100, deadline=None)
@given(bp=breakpoints, finite=st.booleans())
def test_normalize_idempotent_and_width_preserving(bp, finite):
    if finite and len(bp) < 2:
        bp = bp + [bp[0] + 1.0]
    kind = "finite" if finite else "infinite"
    nl = len(bp) - 1 if finite else len(bp) + 1
    d = CompositeDomain(kind, bp, list(np.linspace(0.5, 2.0, nl)))
    once, s1 = normalize(d)
    twice, s2 = normalize(once)
    assert twice == once and s2 == 0.0
    assert once.sigmas == d.sigmas
    assert np.allclose(np.diff(once.breakpoints), np.diff(d.breakpoints), rtol=0, atol=1e-12)
    assert once.breakpoints[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(
    sig=st.lists(st.floats(-1.0, 3.0), min_size=2, max_size=4),
    a=st.floats(-3.0, 1.0), w=st.floats(-0.5, 2.0), layer=st.integers(0, 3),
)
def test_validate_accepts_iff_invariants_hold(sig, a, w, layer):
    n_layers = len(sig)
    bp = list(np.arange(n_layers - 1, dtype=float))
    d = CompositeDomain.infinite(bp, sig)
    layer = layer % n_layers
    layers = [[] for _ in range(n_layers)]
    layers[layer].append(PolyPiece((a, a + w), [1.0]))
    edges = [-np.inf] + bp + [np.inf]
    ok = all(s > 0 for s in sig) and a < a + w and edges[layer] <= a and a + w <= edges[layer + 1]
    try:
        validate(d, InitialData(layers))
        accepted = True
    except ConfigError:
        accepted = False
    assert accepted == ok
