from dataclasses import replace
from math import erf, pi, sqrt

import numpy as np
import pytest

from interfacemap.config import random_problem
from interfacemap.contour import (
    TAIL_TOL,
    ContourSpec,
    adapt_R,
    default_spec,
    enclosed_zeros,
    evaluate,
    evaluate_finite,
    evaluate_infinite,
    interface_map,
    nodes,
    trace,
)
from interfacemap.domain import CompositeDomain, InitialData, RobinBoundary, TimeSignal, normalize_problem, validate
from interfacemap.errors import ConfigError, NumericalError, PoleProximityError

from conftest import indicator_problem


def test_spec_invariants():
    assert ContourSpec().violations() == []
    bad = ContourSpec(R=-1.0, delta=0.5, density=2.0, rule="trapezoid")
    v = bad.violations()
    assert len(v) == 4
    with pytest.raises(ConfigError):
        bad.check()
    assert ContourSpec(delta=pi / 12).L == pytest.approx(sqrt(37 / (1e-3 * 0.5)))


@pytest.mark.parametrize("rule", ["gauss-legendre", "simpson"])
def test_nodes_geometry(rule):
    spec = ContourSpec(R=1.5, rule=rule)
    k, w = nodes(spec, t_max=1.0)
    assert np.all(k.imag > 0)
    on_rays = np.abs(k) > spec.R * (1 + 1e-12)
    assert np.all((k[on_rays] ** 2).real > 0)
    assert np.max(np.abs(k)) <= spec.R + spec.L + 1e-9
    # weights include dkappa, so they sum to the chord between the ray ends
    end = spec.R + spec.L
    chord = end * (np.exp(1j * (pi / 4 - spec.delta)) - np.exp(1j * (3 * pi / 4 + spec.delta)))
    tol = 1e-12 if rule == "gauss-legendre" else 1e-6  # Simpson is O(h**4) on the arc
    assert abs(np.sum(w) - chord) < tol * abs(chord)


def test_nodes_integrate_entire_functions():
    spec = ContourSpec(R=1.0)
    k, w = nodes(spec)
    assert np.sum(w * 0.0) == 0
    # kappa exp(-kappa**2): antiderivative -exp(-kappa**2)/2 vanishes at both far ends
    assert abs(np.sum(w * k * np.exp(-k * k))) < 1e-6
    for t in (1e-3, 0.1, 1.0, 5.0):
        k, w = nodes(spec, t_max=t)
        got = np.sum(w * np.exp(-k * k * t))
        assert abs(got - sqrt(pi / t)) < 1e-10 * sqrt(pi / t)


def test_zero_data_gives_zero():
    d = CompositeDomain.infinite([0.0, 1.0], [1.0, 2.0, 0.5])
    p = validate(d, InitialData.zero(3))
    tr = evaluate_infinite(p, ContourSpec(R=2.0), [0.1, 1.0])
    assert np.all(tr.u == 0) and np.all(tr.ux == 0)
    df = CompositeDomain.finite([0.0, 1.0, 2.0], [1.0, 2.0])
    pf = validate(df, InitialData.zero(2), RobinBoundary.neumann())
    tr = evaluate_finite(pf, ContourSpec(R=2.0), [0.1, 1.0])
    assert np.all(tr.u == 0) and np.all(tr.ux == 0)


def test_erf_case():
    p = indicator_problem()
    times = np.array([0.0625, 0.25, 1.0])
    tr = evaluate(p, default_spec(p), times)
    want = np.array([erf(1 / (2 * sqrt(t))) for t in times])
    assert np.max(np.abs(tr.u[:, 0] - want) / want) < 1e-8
    assert np.max(np.abs(tr.ux)) < 1e-12
    assert tr.u[1, 0] == pytest.approx(0.84270079, abs=1e-8)
    assert tr.diagnostics["tail_estimate"] < TAIL_TOL


def test_flux_is_sigma_squared_ux():
    p = normalize_problem(random_problem(np.random.default_rng(3), 2))
    tr = evaluate(p, adapt_R(p, default_spec(p)), [0.2, 0.5])
    assert np.array_equal(tr.flux, np.asarray(p.sigmas[:2]) ** 2 * tr.ux)


def test_density_doubling():
    p = normalize_problem(random_problem(np.random.default_rng(4), 1))
    spec = default_spec(p)
    a = evaluate(p, spec, [0.01, 0.3, 1.0])
    b = evaluate(p, replace(spec, density=2 * spec.density), [0.01, 0.3, 1.0])
    assert np.max(np.abs(a.u - b.u)) < 1e-8
    assert np.max(np.abs(a.ux - b.ux)) < 1e-8


def test_truncation_convergence():
    p = normalize_problem(random_problem(np.random.default_rng(5), 2))
    spec = adapt_R(p, default_spec(p))
    times = [1e-3, 0.05, 1.0]
    a = evaluate(p, spec, times)
    b = evaluate(p, replace(spec, L=2 * spec.L), times)
    bound = max(a.diagnostics["tail_estimate"], 1e-13)
    assert np.max(np.abs(a.u - b.u)) <= bound
    assert np.max(np.abs(a.ux - b.ux)) <= bound * 10 + 1e-12


def test_short_truncation_is_reported():
    p = indicator_problem()
    spec = ContourSpec(R=1.0, L=4.0)
    with pytest.raises(NumericalError, match="time indices"):
        trace(p, spec, [1e-3, 0.5])


def test_evaluate_preconditions():
    p = indicator_problem()
    with pytest.raises(ConfigError, match="t_min"):
        evaluate(p, ContourSpec(), [1e-4])
    shifted = validate(CompositeDomain.infinite([2.0], [1.0, 1.0]), InitialData.zero(2))
    with pytest.raises(ConfigError, match="normalized"):
        evaluate(shifted, ContourSpec(), [0.5])
    with pytest.raises(ConfigError):
        evaluate_finite(p, ContourSpec(), [0.5])


def test_original_coordinates():
    d = CompositeDomain.infinite([3.0], [1.0, 1.0])
    u0 = InitialData([[indicator_problem().u0.layers[0][0].shifted(3.0)],
                      [indicator_problem().u0.layers[1][0].shifted(3.0)]])
    tr = interface_map(validate(d, u0), [0.25])
    assert tr.original_positions[0] == 3.0
    assert tr.u[0, 0] == pytest.approx(erf(1.0), abs=1e-12)


def test_adapt_R_unchanged_for_whole_line():
    p = indicator_problem(1.0, 2.5)
    spec = default_spec(p)
    assert adapt_R(p, spec) == spec


def robin_problem(beta):
    d = CompositeDomain.finite([0.0, 1.0, 2.0], [1.0, 1.5])
    bc = RobinBoundary(beta, TimeSignal.constant(1.0), TimeSignal.zero())
    return validate(d, InitialData.zero(2), bc)


def test_adapt_R_raises_small_radius():
    p = robin_problem((0.3, 1.0, 0.0, 1.0))
    spec = replace(default_spec(p), R=1e-3)
    assert enclosed_zeros(p, spec) >= 1
    out = adapt_R(p, spec)
    assert out.R > spec.R
    assert enclosed_zeros(p, replace(out, R=out.R / 2)) == 0


def test_adapt_R_neumann_terminates():
    p = robin_problem((0.0, 1.0, 0.0, 1.0))
    out = adapt_R(p, default_spec(p))
    assert out.R >= 1.0


def test_adapt_R_cap():
    p = robin_problem((1.0, 1.0, 0.0, 1.0))
    with pytest.raises(PoleProximityError, match="cannot certify pole-free contour"):
        adapt_R(p, replace(default_spec(p), R=1e-3), cap=4.0)


def test_dirichlet_end_values():
    d = CompositeDomain.finite([0.0, 1.0, 2.0], [1.0, 1.5])
    bc = RobinBoundary((1.0, 0.0, 0.0, 1.0), TimeSignal.constant(0.5), TimeSignal.zero())
    p = validate(d, InitialData.zero(2), bc)
    tr = evaluate(p, adapt_R(p, default_spec(p)), [0.1, 0.4])
    assert np.all(tr.boundary_u[:, 0] == 0.5)
    assert np.all(np.isnan(tr.boundary_ux[:, 0]))
    assert np.all(tr.boundary_ux[:, 1] == 0.0)
    assert np.all(np.isfinite(tr.u))
