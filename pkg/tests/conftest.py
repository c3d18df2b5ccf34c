"""Shared fixtures and the acceptance-criteria summary reporter."""

import numpy as np
import pytest
import scipy.fft as sfft

from comvib import Grid1D

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (name, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, passed, detail = ACCEPTANCE_RESULTS[num]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{status}] {name}: {detail}")


@pytest.fixture()
def rng():
    return np.random.default_rng(20250809)


@pytest.fixture(scope="session")
def internal_grid():
    return Grid1D(-2.0, 2.0, 256)


@pytest.fixture(scope="session")
def wide_internal_grid():
    return Grid1D(-4.0, 4.0, 512)


def discrete_oscillator_hamiltonian(grid: Grid1D, potential_values: np.ndarray) -> np.ndarray:
    """Dense spectral Hamiltonian p^2/2 + V on the periodic grid.

    Independent eigensolver oracle: kinetic term built from the DFT matrix,
    not from the evolution code under test.
    """
    n = grid.n
    F = sfft.fft(np.eye(n), axis=0) / np.sqrt(n)
    T = F.conj().T @ np.diag(0.5 * grid.p**2) @ F
    return T + np.diag(potential_values)
