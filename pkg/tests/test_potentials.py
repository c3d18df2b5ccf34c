"""Potentials, analytic reflection/transmission, beam-splitter calibration."""

import numpy as np
import pytest

from comvib import (
    HarmonicInternal,
    QuadraticExternal,
    SmoothedWell,
    SquareWell,
    analytic_RT,
    calibrate_beam_splitter,
    composite_potential,
    second_derivative,
)


def test_composite_values_inside_and_outside():
    V = SquareWell(2.0, 0.5)
    U = HarmonicInternal(20.25)
    # both constituents inside the well
    assert composite_potential(V, U, 0.0, 0.0) == pytest.approx(-4.0)
    # both outside: only the spring survives
    y = 0.3
    assert composite_potential(V, U, 0.0, y) == pytest.approx(2 * 20.25 * y**2)


def test_composite_quadratic_identity(rng):
    # V quadratic: composite - 2V(Y) - U(y) = 2 c2 y^2 exactly
    V = QuadraticExternal(0.3, -0.7, 1.1)
    U = HarmonicInternal(2.0)
    for _ in range(50):
        Y, y = rng.uniform(-5, 5, size=2)
        lhs = composite_potential(V, U, Y, y) - 2 * V.value(Y) - U.value(y)
        assert lhs == pytest.approx(2 * 1.1 * y**2, abs=1e-12)


def test_composite_even_in_y(rng):
    U = HarmonicInternal(1.0)
    for V in (SquareWell(2.64, 0.5), SmoothedWell(1.32, 0.5, 0.05), QuadraticExternal(0, 1, 2)):
        Y = rng.uniform(-3, 3, size=40)
        y = rng.uniform(-2, 2, size=40)
        a = composite_potential(V, U, Y, y)
        b = composite_potential(V, U, Y, -y)
        assert np.max(np.abs(a - b)) == 0.0


def test_second_derivative_quadratic_and_flat():
    q = QuadraticExternal(1.0, 2.0, 3.0)
    assert float(second_derivative(q, 17.3)) == pytest.approx(6.0)
    sw = SmoothedWell(1.32, 0.5, 0.05)
    # far outside the edges (|x - L/2| = 55 s) the profile is flat; note the
    # well center is only 5 s from each edge, so V'' is NOT small there
    assert abs(float(second_derivative(sw, 3.0))) < 1e-10
    assert abs(float(second_derivative(sw, -3.0))) < 1e-10


def test_second_derivative_matches_finite_difference():
    # oracle: 5-point centered finite difference with step h = s/100
    # (a 3-point stencil at this h has ~8e-6 relative truncation error,
    # above the 1e-6 target; the 5-point stencil is exact to ~1e-10)
    sw = SmoothedWell(1.32, 0.5, 0.05)
    h = sw.s / 100.0
    for x0 in (0.25, 0.25 + 1.317 * 0.05, 0.25 - 0.03, -0.25, -0.22):
        f = sw.value(np.array([x0 - 2 * h, x0 - h, x0, x0 + h, x0 + 2 * h]))
        fd = (-f[4] + 16 * f[3] - 30 * f[2] + 16 * f[1] - f[0]) / (12 * h**2)
        exact = float(second_derivative(sw, x0))
        assert fd == pytest.approx(exact, rel=1e-6)


def test_second_derivative_square_well_raises():
    with pytest.raises(TypeError, match="distributional"):
        second_derivative(SquareWell(1.0, 0.5), 0.25)


def test_smoothed_converges_to_square():
    # a logistic edge decays like exp(-d/s): the 1e-6 pointwise agreement
    # needs d > s*ln(1e6) ~ 14 s, so the excluded band is 15 s per edge
    sq = SquareWell(2.0, 0.5)
    sm = SmoothedWell(2.0, 0.5, 1e-3)
    x = np.linspace(-2, 2, 2001)
    off_edge = (np.abs(np.abs(x) - 0.25) > 15 * sm.s)
    dev = np.abs(sm.value(x[off_edge]) - sq.value(x[off_edge]))
    assert dev.max() < 1e-6 * sq.V0
    # and the deviation vanishes pointwise off-edge as s -> 0
    for s in (1e-2, 1e-3, 1e-4):
        d = abs(float(SmoothedWell(2.0, 0.5, s).value(0.25 + 0.1)) - 0.0)
        assert d <= 2.0 * np.exp(-0.1 / s) * 1.0001


def test_square_well_cell_average_preserves_area(rng):
    sq = SquareWell(2.64, 0.5)
    for n in (512, 1024, 2048):
        x = np.linspace(-60, 60, n, endpoint=False)
        h = x[1] - x[0]
        shift = rng.uniform(0, h)
        area = np.sum(sq.grid_profile(x + shift, h)) * h
        assert area == pytest.approx(-2.64 * 0.5, rel=1e-12)
        # point sampling misses by up to an edge cell; the mean fixes it
        area_pt = np.sum(sq.value(x + shift)) * h
        assert abs(area_pt - (-1.32)) <= 2.64 * h + 1e-12


def test_analytic_RT_reference_point():
    # |R|^2 = 0.5 at the calibrated beam-splitter parameters
    R2, T2 = analytic_RT(1.0, SquareWell(2.64, 0.5), m=1.0)
    assert R2 == pytest.approx(0.5, abs=1e-3)
    assert R2 + T2 == pytest.approx(1.0, abs=1e-12)


def test_analytic_RT_unitarity_random(rng):
    ps = rng.uniform(0.05, 5.0, size=10_000)
    Ls = rng.uniform(0.05, 5.0, size=10_000)
    vs = rng.uniform(0.0, 10.0, size=10_000)
    worst = 0.0
    for p, L, mv0 in zip(ps, Ls, vs):
        R2, T2 = analytic_RT(p, SquareWell(mv0, L), m=1.0)
        worst = max(worst, abs(R2 + T2 - 1.0))
    assert worst <= 1e-12


def test_analytic_RT_limits():
    assert analytic_RT(1.0, SquareWell(0.0, 0.5)) == (0.0, 1.0)
    # transmission resonance: L * ptilde = pi -> |R|^2 = 0 exactly
    p, L = 1.0, 0.5
    mv0 = ((np.pi / L) ** 2 - p**2) / 2.0
    R2, _ = analytic_RT(p, SquareWell(mv0, L))
    assert R2 <= 1e-29
    with pytest.raises(ValueError):
        analytic_RT(-1.0, SquareWell(1.0, 1.0))


def test_calibrate_beam_splitter():
    mv0 = calibrate_beam_splitter(1.0, 0.5, 0.5)
    assert mv0 == pytest.approx(2.64, abs=0.01)
    R2, _ = analytic_RT(1.0, SquareWell(mv0, 0.5))
    assert abs(R2 - 0.5) <= 1e-9
    assert calibrate_beam_splitter(1.0, 0.5, 0.0) == 0.0
    with pytest.raises(ValueError, match="achievable"):
        calibrate_beam_splitter(1.0, 0.5, 0.99)


def test_potential_parameter_validation():
    with pytest.raises(ValueError):
        SquareWell(-1.0, 0.5)
    with pytest.raises(ValueError):
        SquareWell(1.0, 0.0)
    with pytest.raises(ValueError):
        SmoothedWell(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        HarmonicInternal(0.0)
