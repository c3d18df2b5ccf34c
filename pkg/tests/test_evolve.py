"""Split-step evolvers: conservation laws, oracles, convergence order."""

import numpy as np
import pytest

from comvib import (
    BoundaryLeakError,
    EvolutionPlan,
    Grid1D,
    HarmonicInternal,
    SquareWell,
    Wavefunction1D,
    Wavefunction2D,
    energy,
    evolve_1d,
    evolve_1d_parametric,
    evolve_2d,
    make_gaussian_1d,
)
from comvib.potentials import composite_grid
from conftest import discrete_oscillator_hamiltonian


def _plan(dt, n, **kw):
    kw.setdefault("fft_workers", 1)
    return EvolutionPlan(dt=dt, n_steps=n, **kw)


def free_gaussian_width_sq(s0, t):
    # closed-form free spreading of exp(-x^2/(2 s)): s(t) = s0 + t^2/s0
    # (density variance is s(t)/2; mass M = 1)
    return s0 + t**2 / s0


def test_free_spreading_both_axes():
    gY = Grid1D(-60.0, 60.0, 512)
    gy = Grid1D(-30.0, 30.0, 1024)
    sY, sy = 4.0, 1.0
    psi = Wavefunction2D.product(
        make_gaussian_1d(gY, 0.0, sY), make_gaussian_1d(gy, 0.0, sy)
    )
    T, n = 3.0, 600
    traj = evolve_2d(psi, None, None, _plan(T / n, n))
    margY = traj.final.marginal_Y()
    margy = traj.final.marginal_y()
    varY = float(np.sum(gY.x**2 * margY) * gY.dx)
    vary = float(np.sum(gy.x**2 * margy) * gy.dx)
    assert varY == pytest.approx(free_gaussian_width_sq(sY, T) / 2, rel=1e-4)
    assert vary == pytest.approx(free_gaussian_width_sq(sy, T) / 2, rel=1e-4)


def test_internal_ground_state_stationary_2d():
    from comvib import partial_trace_internal

    gY = Grid1D(-60.0, 60.0, 512)
    gy = Grid1D(-2.0, 2.0, 256)
    U = HarmonicInternal(20.25)
    com = make_gaussian_1d(gY, 0.0, 25.0)  # at rest, no well
    intern = make_gaussian_1d(gy, 0.0, 1.0 / 9.0)
    psi = Wavefunction2D.product(com, intern)
    traj = evolve_2d(psi, None, U, _plan(0.0025, 1600))
    # the COM spreads freely; the internal reduced state must stay put
    rho = partial_trace_internal(traj.final)
    vec = intern.amp * np.sqrt(gy.dx)
    fidelity = float(np.real(np.conj(vec) @ rho.rho @ vec))
    assert fidelity >= 1.0 - 1e-8
    # the pointwise marginal carries the O(dt^2) splitting wobble
    assert np.max(np.abs(traj.final.marginal_y() - intern.density())) < 1e-3


def test_1d_parametric_eigenstate_and_ehrenfest():
    g = Grid1D(-4.0, 4.0, 512)
    omega = 9.0
    w = lambda t: np.full_like(np.asarray(t, dtype=float), omega**2)
    ground = make_gaussian_1d(g, 0.0, 1.0 / omega)
    traj = evolve_1d_parametric(ground, w, _plan(5e-5, 20000))
    assert np.max(np.abs(traj.final.density() - ground.density())) < 1e-8

    disp = make_gaussian_1d(g, 0.5, 1.0 / omega)
    traj = evolve_1d_parametric(disp, w, _plan(5e-4, 2000))
    T = 2000 * 5e-4  # one full unit of time
    assert traj.final.position_mean() == pytest.approx(0.5 * np.cos(omega * T), abs=1e-4)


def test_energy_oracles(internal_grid):
    # oracle 1: ground state of the discretized internal Hamiltonian
    k = 20.25
    U = HarmonicInternal(k)
    H = discrete_oscillator_hamiltonian(internal_grid, U.value(internal_grid.x))
    evals, evecs = np.linalg.eigh(H)
    ground = Wavefunction1D(internal_grid, evecs[:, 0]).normalized()
    assert energy(ground, U) == pytest.approx(4.5, abs=1e-6)
    assert energy(ground, U) == pytest.approx(evals[0], abs=1e-10)

    # oracle 2: Gaussian moment integral.  For amp ~ exp(-x^2/(2 s) + i p x),
    # <p^2> = p^2 + 1/(2 s), so KE = p^2/2 + 1/(4 s) = 0.51 at s=25, p=1.
    g = Grid1D(-120.0, 120.0, 2048)
    packet = make_gaussian_1d(g, 0.0, 25.0, momentum=1.0)
    assert energy(packet, None) == pytest.approx(0.5 + 1.0 / (4 * 25.0), abs=1e-6)


def test_free_energy_conservation():
    g = Grid1D(-60.0, 60.0, 512)
    packet = make_gaussian_1d(g, -20.0, 9.0, momentum=1.0)
    traj = evolve_1d(packet, None, _plan(0.01, 1500, record_every=100))
    drift = np.max(np.abs(traj.energies - traj.energies[0]))
    assert drift <= 1e-10 * abs(traj.energies[0])


def test_norm_conservation_per_step():
    g = Grid1D(-60.0, 60.0, 512)
    well = SquareWell(2.64, 0.5)
    packet = make_gaussian_1d(g, -15.0, 9.0, momentum=1.0)
    traj = evolve_1d(packet, well, _plan(0.005, 2000, record_every=1))
    steps = np.diff(np.abs(traj.norms - 1.0))
    assert np.max(np.abs(traj.norms - 1.0)) <= 1e-12
    assert np.max(np.abs(steps)) <= 1e-13


def test_time_reversal():
    gY = Grid1D(-60.0, 60.0, 512)
    gy = Grid1D(-2.0, 2.0, 256)
    well = SquareWell(1.32, 0.5)
    U = HarmonicInternal(20.25)
    com = make_gaussian_1d(gY, -6.0, 4.0, momentum=1.0)
    intern = make_gaussian_1d(gy, 0.1, 1.0 / 9.0)
    psi0 = Wavefunction2D.product(com, intern)
    fwd = evolve_2d(psi0, well, U, _plan(0.005, 800, boundary_tol=1e-6))
    back = evolve_2d(fwd.final.normalized(), well, U, _plan(-0.005, 800, boundary_tol=1e-6))
    fid = abs(back.final.inner(psi0))
    assert fid >= 1.0 - 1e-10


def test_second_order_convergence_in_dt():
    # halving dt must reduce the deviation from a fine reference ~4x
    g = Grid1D(-4.0, 4.0, 512)
    w = lambda t: 81.0 + 30.0 * np.exp(-((np.asarray(t, dtype=float) - 1.0) ** 2))
    psi0 = make_gaussian_1d(g, 0.3, 1.0 / 9.0)
    T = 2.0

    def final_amp(dt):
        n = int(round(T / dt))
        return evolve_1d_parametric(psi0, w, _plan(dt, n)).final.amp

    ref = final_amp(T / 16000)
    errs = []
    for n in (500, 1000, 2000):
        a = final_amp(T / n)
        errs.append(np.sqrt(np.sum(np.abs(a - ref) ** 2) * g.dx))
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    assert 3.6 <= r1 <= 4.4
    assert 3.6 <= r2 <= 4.4


def test_boundary_leak_aborts():
    g = Grid1D(-8.0, 8.0, 256)
    packet = make_gaussian_1d(g, 0.0, 1.0, momentum=3.0)
    with pytest.raises(BoundaryLeakError) as exc:
        evolve_1d(packet, None, _plan(0.01, 1000))
    assert exc.value.t > 0


def test_parity_mirror_of_branches():
    # evolving the mirrored initial state equals mirroring the evolved one
    gY = Grid1D(-60.0, 60.0, 512)
    gy = Grid1D(-2.0, 2.0, 256)
    well = SquareWell(1.32, 0.5)
    U = HarmonicInternal(20.25)
    intern = make_gaussian_1d(gy, 0.1, 1.0 / 9.0)
    a0 = Wavefunction2D.product(make_gaussian_1d(gY, -12.0, 16.0, +1.0), intern)
    b0 = Wavefunction2D.product(make_gaussian_1d(gY, +12.0, 16.0, -1.0), intern)
    plan_kw = dict(boundary_tol=1e-6)
    fa = evolve_2d(a0, well, U, _plan(0.005, 600, **plan_kw)).final
    fb = evolve_2d(b0, well, U, _plan(0.005, 600, **plan_kw)).final
    mirrored = np.roll(fa.amp[::-1, :], 1, axis=0)
    assert np.max(np.abs(mirrored - fb.amp)) <= 1e-12


def test_internal_resolution_precondition():
    gY = Grid1D(-60.0, 60.0, 256)
    gy = Grid1D(-2.0, 2.0, 32)  # 16 points per unit, width 1/3 -> ~5 points
    psi = Wavefunction2D.product(
        make_gaussian_1d(gY, 0.0, 9.0), make_gaussian_1d(gy, 0.0, 1.0 / 9.0)
    )
    with pytest.raises(ValueError, match="internal grid"):
        evolve_2d(psi, None, HarmonicInternal(20.25), _plan(0.005, 10))


def test_coarse_dt_warns():
    g = Grid1D(-4.0, 4.0, 512)
    psi = make_gaussian_1d(g, 0.0, 1.0 / 9.0)
    w = lambda t: np.full_like(np.asarray(t, dtype=float), 81.0)
    with pytest.warns(UserWarning, match="too coarse"):
        evolve_1d_parametric(psi, w, _plan(0.05, 10))
