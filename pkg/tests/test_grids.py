"""Grids, wavefunctions, and the spectral transforms."""

import numpy as np
import pytest

from comvib import (
    Grid1D,
    Wavefunction1D,
    Wavefunction2D,
    from_momentum,
    make_gaussian_1d,
    superpose,
    to_momentum,
)
from conftest import discrete_oscillator_hamiltonian


def test_grid_invariants():
    g = Grid1D(-100.0, 100.0, 2048)
    assert g.dx == pytest.approx(200.0 / 2048)
    assert g.x[0] == -100.0
    assert g.p.min() == pytest.approx(-np.pi / g.dx)
    assert g.p.max() < np.pi / g.dx
    with pytest.raises(ValueError):
        Grid1D(-1.0, 1.0, 100)  # not a power of two
    with pytest.raises(ValueError):
        Grid1D(-1.0, 1.0, 4)  # too few points
    with pytest.raises(ValueError):
        Grid1D(1.0, -1.0, 64)


def test_gaussian_normalization_random_params(rng):
    g = Grid1D(-100.0, 100.0, 2048)
    for _ in range(25):
        center = rng.uniform(-30, 30)
        width_sq = rng.uniform(0.5, 40.0)
        momentum = rng.uniform(-3, 3)
        phase = rng.uniform(0, 2 * np.pi)
        wf = make_gaussian_1d(g, center, width_sq, momentum, phase)
        assert abs(wf.norm() - 1.0) <= 1e-12


def test_gaussian_is_internal_ground_state(internal_grid):
    # oracle: diagonalize the discretized p^2/2 + 2 k y^2 with k = (9/2)^2
    k = (9.0 / 2.0) ** 2
    H = discrete_oscillator_hamiltonian(internal_grid, 2.0 * k * internal_grid.x**2)
    evals, evecs = np.linalg.eigh(H)
    ground = Wavefunction1D(internal_grid, evecs[:, 0]).normalized()
    gauss = make_gaussian_1d(internal_grid, 0.0, 1.0 / 9.0)
    assert abs(gauss.inner(ground)) >= 1.0 - 1e-8
    # mean energy of the omega = 9 oscillator ground state
    assert evals[0] == pytest.approx(4.5, abs=1e-6)


def test_gaussian_tail_and_width_errors():
    g = Grid1D(-10.0, 10.0, 256)
    with pytest.raises(ValueError, match="tail"):
        make_gaussian_1d(g, 0.0, 50.0)  # too wide for the domain
    with pytest.raises(ValueError, match="tail"):
        make_gaussian_1d(g, 9.5, 1.0)  # too close to the edge
    with pytest.raises(ValueError, match="positive"):
        make_gaussian_1d(g, 0.0, -1.0)


def test_superpose_interferometer_input():
    g = Grid1D(-120.0, 120.0, 2048)
    a = make_gaussian_1d(g, -20.0, 25.0, +1.0)
    b = make_gaussian_1d(g, +20.0, 25.0, -1.0)
    s = superpose(a, b, 0.3)
    assert abs(s.norm() - 1.0) <= 1e-12
    # equal weight in both packets
    left = np.sum(s.density()[g.x < 0]) * g.dx
    assert left == pytest.approx(0.5, abs=1e-6)


def test_superpose_identical_and_cancelling():
    g = Grid1D(-10.0, 10.0, 256)
    psi = make_gaussian_1d(g, 0.0, 1.0)
    same = superpose(psi, psi, 0.0)
    assert abs(abs(same.inner(psi)) - 1.0) <= 1e-12
    with pytest.raises(ValueError, match="cancel"):
        superpose(psi, psi, np.pi)
    other = make_gaussian_1d(Grid1D(-10.0, 10.0, 128), 0.0, 1.0)
    with pytest.raises(ValueError, match="grid"):
        superpose(psi, other)


def test_to_momentum_gaussian_width_map():
    # Fourier pair: position width_sq s -> momentum width_sq 1/s
    g = Grid1D(-40.0, 40.0, 1024)
    s = 4.0
    wf = make_gaussian_1d(g, 0.0, s)
    ph = to_momentum(wf)
    expected = make_gaussian_1d(ph.grid, 0.0, 1.0 / s)
    err = np.sqrt(np.sum(np.abs(ph.amp - expected.amp) ** 2) * ph.grid.dx)
    assert err < 1e-8


def test_to_momentum_shift_theorem():
    g = Grid1D(-40.0, 40.0, 1024)
    wf = make_gaussian_1d(g, 0.0, 4.0, momentum=1.0)
    ph = to_momentum(wf)
    peak = ph.grid.x[int(np.argmax(ph.density()))]
    assert peak == pytest.approx(1.0, abs=ph.grid.dx)


def test_momentum_roundtrip_and_parseval(rng):
    g = Grid1D(-40.0, 40.0, 512)
    amp = rng.standard_normal(512) + 1j * rng.standard_normal(512)
    wf = Wavefunction1D(g, amp).normalized()
    ph = to_momentum(wf)
    assert abs(ph.norm() - wf.norm()) <= 1e-12
    back = from_momentum(ph)
    assert back.grid == g
    assert np.max(np.abs(back.amp - wf.amp)) <= 1e-12


def test_momentum_2d_axes(rng):
    gY = Grid1D(-40.0, 40.0, 256)
    gy = Grid1D(-2.0, 2.0, 64)
    com = make_gaussian_1d(gY, 0.0, 9.0, momentum=2.0)
    intern = make_gaussian_1d(gy, 0.0, 0.1)
    psi = Wavefunction2D.product(com, intern)
    for axis in ("Y", "y", "both"):
        ph = to_momentum(psi, axis=axis)
        assert abs(ph.norm() - 1.0) <= 1e-12
        back = from_momentum(ph, axis=axis)
        assert np.max(np.abs(back.amp - psi.amp)) <= 1e-12
    with pytest.raises(ValueError):
        to_momentum(psi, axis="zz")


def test_inner_product_conjugate_symmetry(rng):
    g = Grid1D(-10.0, 10.0, 128)
    a = Wavefunction1D(g, rng.standard_normal(128) + 1j * rng.standard_normal(128))
    b = Wavefunction1D(g, rng.standard_normal(128) + 1j * rng.standard_normal(128))
    assert a.inner(b) == np.conj(b.inner(a))


def test_wavefunctions_are_immutable():
    g = Grid1D(-10.0, 10.0, 128)
    wf = make_gaussian_1d(g, 0.0, 1.0)
    with pytest.raises(ValueError):
        wf.amp[0] = 1.0
    # constructing a view must not freeze the source buffer
    src = np.ones(128, dtype=complex)
    Wavefunction1D(g, src)
    src[0] = 2.0  # still writable
