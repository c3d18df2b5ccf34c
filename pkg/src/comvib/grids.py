"""Uniform grids and complex wavefunctions in one and two dimensions.

Dimensionless units throughout: hbar = 1 and total mass M = 1.  Grids are
periodic (FFT-based spectral methods), so domains must be chosen large
enough that no appreciable amplitude reaches the boundary.

Position <-> momentum transforms use the physicist's convention

    psi_hat(p) = (2*pi)^(-1/2) * integral psi(x) exp(-i p x) dx,

discretized so that Parseval holds exactly with the respective grid
measures: sum |psi|^2 dx == sum |psi_hat|^2 dp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid1D",
    "Wavefunction1D",
    "Wavefunction2D",
    "make_gaussian_1d",
    "superpose",
    "to_momentum",
    "from_momentum",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    # freeze a private copy: flipping the flag on the input would lock
    # caller-owned buffers (e.g. an evolver's working array) in place
    if a.flags.writeable or not a.flags.c_contiguous:
        a = np.ascontiguousarray(a).copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic lattice of n points on [x_min, x_max).

    n must be a power of two (>= 8).  The implied momentum lattice has
    spacing 2*pi/(n*dx) and covers [-pi/dx, pi/dx).
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / (self.n * self.dx)

    @cached_property
    def x(self) -> np.ndarray:
        return _readonly(self.x_min + self.dx * np.arange(self.n))

    @cached_property
    def p(self) -> np.ndarray:
        """Momentum lattice in FFT (unshifted) order."""
        return _readonly(2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx))

    def momentum_grid(self) -> "Grid1D":
        """The momentum-space lattice as a Grid1D (ascending order)."""
        pmax = np.pi / self.dx
        return Grid1D(-pmax, pmax, self.n)


@dataclass(frozen=True)
class Wavefunction1D:
    """Complex amplitudes on a Grid1D.  Immutable after construction."""

    grid: Grid1D
    amp: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=np.complex128)
        if amp.shape != (self.grid.n,):
            raise ValueError(f"amp shape {amp.shape} does not match grid n={self.grid.n}")
        object.__setattr__(self, "amp", _readonly(amp))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amp) ** 2) * self.grid.dx))

    def normalized(self) -> "Wavefunction1D":
        n = self.norm()
        if n < 1e-300:
            raise ValueError("cannot normalize a zero-norm wavefunction")
        return Wavefunction1D(self.grid, self.amp / n)

    def inner(self, other: "Wavefunction1D") -> complex:
        """<self|other> with the grid measure."""
        if other.grid != self.grid:
            raise ValueError("grid mismatch in inner product")
        return complex(np.sum(np.conj(self.amp) * other.amp) * self.grid.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def position_mean(self) -> float:
        return float(np.sum(self.grid.x * self.density()) * self.grid.dx)

    def position_var(self) -> float:
        m = self.position_mean()
        return float(np.sum((self.grid.x - m) ** 2 * self.density()) * self.grid.dx)


@dataclass(frozen=True)
class Wavefunction2D:
    """Complex amplitudes on the product lattice grid_Y x grid_y.

    amp[i, j] is the amplitude at (Y_i, y_j).  Normalized to 1 within
    1e-12 when built through `product` or with normalize=True.
    """

    grid_Y: Grid1D
    grid_y: Grid1D
    amp: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=np.complex128)
        if amp.shape != (self.grid_Y.n, self.grid_y.n):
            raise ValueError(
                f"amp shape {amp.shape} does not match grids "
                f"({self.grid_Y.n}, {self.grid_y.n})"
            )
        object.__setattr__(self, "amp", _readonly(amp))

    @property
    def dA(self) -> float:
        return self.grid_Y.dx * self.grid_y.dx

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amp) ** 2) * self.dA))

    def normalized(self) -> "Wavefunction2D":
        n = self.norm()
        if n < 1e-300:
            raise ValueError("cannot normalize a zero-norm wavefunction")
        return Wavefunction2D(self.grid_Y, self.grid_y, self.amp / n)

    def inner(self, other: "Wavefunction2D") -> complex:
        if (other.grid_Y, other.grid_y) != (self.grid_Y, self.grid_y):
            raise ValueError("grid mismatch in inner product")
        return complex(np.sum(np.conj(self.amp) * other.amp) * self.dA)

    def density(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def marginal_Y(self) -> np.ndarray:
        """Probability density along Y (internal coordinate traced out)."""
        return np.sum(self.density(), axis=1) * self.grid_y.dx

    def marginal_y(self) -> np.ndarray:
        return np.sum(self.density(), axis=0) * self.grid_Y.dx

    @classmethod
    def product(cls, com: Wavefunction1D, internal: Wavefunction1D) -> "Wavefunction2D":
        amp = np.outer(com.amp, internal.amp)
        return cls(com.grid, internal.grid, amp).normalized()


def make_gaussian_1d(
    grid: Grid1D,
    center: float,
    width_sq: float,
    momentum: float = 0.0,
    phase: float = 0.0,
    tail_tol: float = 1e-12,
) -> Wavefunction1D:
    """Normalized Gaussian packet exp(-(x-center)^2/(2*width_sq) + i*momentum*x + i*phase).

    The amplitude exponent convention means the probability density has
    variance width_sq/2.  The analytic normalization prefactor is replaced
    by explicit numerical renormalization.

    Raises ValueError if width_sq <= 0 or if the packet's tails at the grid
    boundary exceed tail_tol (the grid is periodic; clipped tails wrap).
    """
    if width_sq <= 0:
        raise ValueError(f"width_sq must be positive, got {width_sq}")
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (2.0 * width_sq) + 1j * (momentum * x + phase))
    wf = Wavefunction1D(grid, psi).normalized()
    dens = wf.density()
    edge = max(dens[0], dens[-1])
    if edge > tail_tol:
        raise ValueError(
            f"gaussian tail at grid boundary is {edge:.3e} > tail_tol={tail_tol:.1e}; "
            "enlarge the domain or narrow the packet"
        )
    return wf


def superpose(a: Wavefunction1D, b: Wavefunction1D, rel_phase: float = 0.0) -> Wavefunction1D:
    """(a + exp(i*rel_phase) * b), renormalized.

    Raises ValueError on grid mismatch or (near-)perfect cancellation:
    silently renormalizing a zero-norm sum would manufacture noise.
    """
    if a.grid != b.grid:
        raise ValueError("superpose requires both wavefunctions on the same grid")
    amp = a.amp + np.exp(1j * rel_phase) * b.amp
    total = float(np.sum(np.abs(amp) ** 2) * a.grid.dx)
    scale = max(float(np.sum(np.abs(a.amp) ** 2) * a.grid.dx), 1e-300)
    if total < 1e-24 * scale:
        raise ValueError("superposition cancels (zero norm); cannot renormalize")
    return Wavefunction1D(a.grid, amp).normalized()


def to_momentum(wf, axis: str | None = None):
    """Unitary transform to momentum space; returns the same shape of object.

    1D: returns a Wavefunction1D on the ascending momentum lattice.
    2D: `axis` selects 'Y', 'y', or 'both'; the transformed axis' grid is
    replaced by its momentum lattice.  Parseval holds to 1e-12.
    """
    if isinstance(wf, Wavefunction1D):
        if axis not in (None, "x"):
            raise ValueError(f"invalid axis {axis!r} for a 1D wavefunction")
        return Wavefunction1D(wf.grid.momentum_grid(), _forward(wf.amp, wf.grid))
    if isinstance(wf, Wavefunction2D):
        if axis not in ("Y", "y", "both"):
            raise ValueError("axis must be 'Y', 'y' or 'both' for a 2D wavefunction")
        amp = wf.amp
        gY, gy = wf.grid_Y, wf.grid_y
        if axis in ("Y", "both"):
            amp = _forward(amp, gY, axis=0)
            gY = gY.momentum_grid()
        if axis in ("y", "both"):
            amp = _forward(amp, gy, axis=1)
            gy = gy.momentum_grid()
        return Wavefunction2D(gY, gy, amp)
    raise TypeError(f"unsupported wavefunction type {type(wf)!r}")


def from_momentum(wf, axis: str | None = None, position_grid=None):
    """Inverse of `to_momentum` (expects ascending momentum lattices).

    `position_grid` restores the original lattice offset; when omitted the
    symmetric domain [-n*dx/2, n*dx/2) implied by the momentum lattice is
    assumed (true for all grids used in this package).
    """
    if isinstance(wf, Wavefunction1D):
        if axis not in (None, "x"):
            raise ValueError(f"invalid axis {axis!r} for a 1D wavefunction")
        g = position_grid if position_grid is not None else _position_grid_of(wf.grid)
        return Wavefunction1D(g, _backward(wf.amp, g))
    if isinstance(wf, Wavefunction2D):
        if axis not in ("Y", "y", "both"):
            raise ValueError("axis must be 'Y', 'y' or 'both' for a 2D wavefunction")
        amp = wf.amp
        gY, gy = wf.grid_Y, wf.grid_y
        pg = position_grid if position_grid is not None else (None, None)
        if axis in ("Y", "both"):
            gY = pg[0] if pg[0] is not None else _position_grid_of(gY)
            amp = _backward(amp, gY, axis=0)
        if axis in ("y", "both"):
            gy = pg[1] if pg[1] is not None else _position_grid_of(gy)
            amp = _backward(amp, gy, axis=1)
        return Wavefunction2D(gY, gy, amp)
    raise TypeError(f"unsupported wavefunction type {type(wf)!r}")


def _forward(amp: np.ndarray, g: Grid1D, axis: int = 0) -> np.ndarray:
    """FFT along `axis`, returned on the ascending (fftshifted) p lattice."""
    phase = np.exp(-1j * g.p * g.x_min)  # accounts for the lattice offset
    shape = [1] * amp.ndim
    shape[axis] = g.n
    out = sfft.fft(amp, axis=axis) * phase.reshape(shape)
    out = sfft.fftshift(out, axes=axis)
    return out * (g.dx / np.sqrt(2.0 * np.pi))


def _backward(amp: np.ndarray, g: Grid1D, axis: int = 0) -> np.ndarray:
    """Inverse of `_forward`; `g` is the target position-space grid."""
    phase = np.exp(+1j * g.p * g.x_min)
    shape = [1] * amp.ndim
    shape[axis] = g.n
    inp = sfft.ifftshift(amp, axes=axis) * phase.reshape(shape)
    out = sfft.ifft(inp, axis=axis)
    return out * (np.sqrt(2.0 * np.pi) / g.dx)


def _position_grid_of(pgrid: Grid1D) -> Grid1D:
    """Recover the position grid whose momentum lattice is `pgrid`.

    Assumes a symmetric domain [-n*dx/2, n*dx/2); the endpoint is snapped
    to 12 significant digits so typical round trips reproduce the exact
    original grid.  Pass position_grid explicitly for offset domains.
    """
    pmax = -pgrid.x_min
    dx = np.pi / pmax
    half = float(f"{pgrid.n * dx / 2.0:.12g}")
    return Grid1D(-half, half, pgrid.n)
