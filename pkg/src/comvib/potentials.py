"""Potential definitions and square-well scattering formulas.

The composite particle consists of two constituents at Y +/- y, each
feeling the external potential V, plus an internal spring U(y) = 2*k*y^2.
The exact composite potential is V(Y+y) + V(Y-y) + U(y); the Taylor form
2V(Y) + V''(Y) y^2 is used only by the parametric-propagator and
observables layers, never by the 2D simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

__all__ = [
    "SquareWell",
    "SmoothedWell",
    "HarmonicInternal",
    "QuadraticExternal",
    "composite_potential",
    "composite_grid",
    "second_derivative",
    "analytic_RT",
    "calibrate_beam_splitter",
]


@dataclass(frozen=True)
class SquareWell:
    """V(x) = -V0 for |x| <= L/2, else 0.  V0 > 0, L > 0."""

    V0: float
    L: float

    def __post_init__(self):
        if self.V0 < 0:
            raise ValueError(f"well depth V0 must be >= 0, got {self.V0}")
        if self.L <= 0:
            raise ValueError(f"well width L must be positive, got {self.L}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.L / 2, -self.V0, 0.0)

    def grid_profile(self, x, h: float):
        """Cell-averaged value over [x-h/2, x+h/2].

        Point sampling of a sharp well misstates its effective area by up
        to +/- h/L depending on edge alignment; the cell mean keeps the
        sampled integral of V exact for any alignment.
        """
        x = np.asarray(x, dtype=float)
        lo = np.maximum(x - h / 2, -self.L / 2)
        hi = np.minimum(x + h / 2, self.L / 2)
        frac = np.clip(hi - lo, 0.0, h) / h
        return -self.V0 * frac


@dataclass(frozen=True)
class SmoothedWell:
    """Square well with logistic edges of scale s; twice differentiable.

    V(x) = -V0 * (sigma((x + L/2)/s) - sigma((x - L/2)/s)),
    sigma(u) = 1/(1 + exp(-u)).  Converges pointwise to SquareWell(V0, L)
    away from the edges as s -> 0.
    """

    V0: float
    L: float
    s: float = 0.05

    def __post_init__(self):
        if self.V0 < 0:
            raise ValueError(f"well depth V0 must be >= 0, got {self.V0}")
        if self.L <= 0 or self.s <= 0:
            raise ValueError("well width L and edge scale s must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return -self.V0 * (expit((x + self.L / 2) / self.s) - expit((x - self.L / 2) / self.s))

    def grid_profile(self, x, h: float):
        return self.value(x)

    def first_derivative(self, x):
        x = np.asarray(x, dtype=float)
        a = expit((x + self.L / 2) / self.s)
        b = expit((x - self.L / 2) / self.s)
        return -self.V0 / self.s * (a * (1 - a) - b * (1 - b))

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        a = expit((x + self.L / 2) / self.s)
        b = expit((x - self.L / 2) / self.s)
        d2a = a * (1 - a) * (1 - 2 * a)
        d2b = b * (1 - b) * (1 - 2 * b)
        return -self.V0 / self.s**2 * (d2a - d2b)


@dataclass(frozen=True)
class HarmonicInternal:
    """Internal spring U(y) = 2*k*y^2; natural frequency omega = sqrt(4k)."""

    k: float

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"spring constant k must be positive, got {self.k}")

    @property
    def omega(self) -> float:
        return 2.0 * np.sqrt(self.k)

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * self.k * y**2


@dataclass(frozen=True)
class QuadraticExternal:
    """V(Y) = c0 + c1*Y + c2*Y^2 (constant curvature: no internal coupling)."""

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.c0 + self.c1 * x + self.c2 * x**2

    def grid_profile(self, x, h: float):
        # cell mean of a quadratic adds the constant h^2/12 curvature term
        return self.value(x) + self.c2 * h**2 / 12.0

    def first_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.c1 + 2.0 * self.c2 * x

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, 2.0 * self.c2)


def composite_potential(V, U: HarmonicInternal | None, Y, y):
    """Exact (non-Taylor) composite potential V(Y+y) + V(Y-y) + U(y)."""
    Y = np.asarray(Y, dtype=float)
    y = np.asarray(y, dtype=float)
    out = V.value(Y + y) + V.value(Y - y)
    if U is not None:
        out = out + U.value(y)
    return out


def composite_grid(V, U, grid_Y, grid_y, cell_average: bool = True) -> np.ndarray:
    """Composite potential sampled on the (Y, y) product lattice.

    With cell_average=True the external terms use the potential's
    grid_profile with the Y-cell width, which keeps sharp wells honestly
    represented on coarse center-of-mass lattices.
    """
    YY = grid_Y.x[:, None]
    yy = grid_y.x[None, :]
    if V is None:
        out = np.zeros((grid_Y.n, grid_y.n))
    elif cell_average and hasattr(V, "grid_profile"):
        h = grid_Y.dx
        out = V.grid_profile(YY + yy, h) + V.grid_profile(YY - yy, h)
    else:
        out = V.value(YY + yy) + V.value(YY - yy)
    if U is not None:
        out = out + U.value(yy)
    return out


def second_derivative(V, Y):
    """Analytic V''(Y) for twice-differentiable external potentials.

    Raises TypeError for a raw SquareWell: its second derivative is
    distributional (delta functions at x = +/- L/2); use SmoothedWell.
    """
    if isinstance(V, SquareWell):
        raise TypeError(
            "V'' of a sharp SquareWell is distributional (supported only at "
            "x = +/- L/2); use SmoothedWell for a differentiable edge"
        )
    try:
        return V.second_derivative(Y)
    except AttributeError:
        raise TypeError(f"potential {type(V).__name__} does not define second_derivative")


def analytic_RT(p: float, well: SquareWell, m: float = 1.0) -> tuple[float, float]:
    """Plane-wave |R|^2, |T|^2 for a particle of mass m and momentum p > 0.

    |R|^2 = 2(mV0)^2 sin^2(L pt) / (2p^4 + 4(mV0)p^2 + 2(mV0)^2 sin^2(L pt))
    |T|^2 = 2p^2 (p^2 + 2mV0) / (same denominator),  pt = sqrt(p^2 + 2mV0).

    The numerators sum to the denominator, so |R|^2 + |T|^2 = 1 identically.
    """
    if p <= 0:
        raise ValueError(f"momentum p must be positive, got {p}")
    mV0 = m * well.V0
    pt = np.sqrt(p**2 + 2.0 * mV0)
    s2 = np.sin(well.L * pt) ** 2
    denom = 2.0 * p**4 + 4.0 * mV0 * p**2 + 2.0 * mV0**2 * s2
    R2 = 2.0 * mV0**2 * s2 / denom
    T2 = 2.0 * p**2 * (p**2 + 2.0 * mV0) / denom
    return float(R2), float(T2)


def _r2_of_mv0(mv0: float, p: float, L: float) -> float:
    pt = np.sqrt(p**2 + 2.0 * mv0)
    s2 = np.sin(L * pt) ** 2
    return 2.0 * mv0**2 * s2 / (2.0 * p**4 + 4.0 * mv0 * p**2 + 2.0 * mv0**2 * s2)


def calibrate_beam_splitter(p: float, L: float, target: float, m: float = 1.0) -> float:
    """Solve |R|^2(mV0) = target on the first monotone branch above mV0 = 0.

    Returns the product mV0.  Root-finding is bracketed Brent to 1e-12 in
    mV0; the residual |R|^2(root) - target is below 1e-9.
    """
    if p <= 0 or L <= 0:
        raise ValueError("p and L must be positive")
    if target == 0.0:
        return 0.0
    # locate the first local maximum of |R|^2; the branch (0, argmax] is
    # monotone increasing from 0.
    hi = (np.pi**2 / L**2 - p**2) / 2.0  # sin^2 returns to 0 here; max is before
    probe = np.linspace(1e-9, max(hi, 1.0), 4001)
    vals = np.array([_r2_of_mv0(v, p, L) for v in probe])
    imax = int(np.argmax(vals))
    branch_max = float(vals[imax])
    if not (0.0 < target < branch_max):
        raise ValueError(
            f"target {target} outside the achievable range (0, {branch_max:.6f}) "
            "on the first reflection branch"
        )
    root = brentq(
        lambda v: _r2_of_mv0(v, p, L) - target,
        1e-12,
        probe[imax],
        xtol=1e-12,
        rtol=8.9e-16,
    )
    return float(root)
