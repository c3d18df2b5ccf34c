"""Normal-ordered propagator of the parametrically driven internal mode.

For a fixed center-of-mass path Y(t), the internal coordinate evolves
under H(t) = p^2/2 + w(t) y^2/2 with w(t) = 4k + 2 V''(Y(t)).  In terms
of unit-frequency ladder operators a = (y + i p)/sqrt(2),

    H(t) = Omega(t) a'a + beta(t) (a^2 + a'^2) + Omega(t)/2,
    Omega = (w + 1)/2,   beta = (Omega - 1)/2 = (w - 1)/4.

The propagator in normal-ordered form is

    U(t) = exp(-i Phi(t)) e^A exp(E a'^2) (1 + D)^{a'a} exp(F a^2),

with Phi = (1/2) int Omega and coefficient ODEs

    i dA/dt = 2 beta E
    i dD/dt = (Omega + 4 beta E)(D + 1)
    i dE/dt = beta + 2 Omega E + 4 beta E^2          (self-contained Riccati)
    i dF/dt = beta (D + 1)^2

all zero at t = 0.  Note the F term multiplies a^2: the quadratic ansatz
for the generating function closes only with an alpha^2 term, whose
coefficient ODE is the (D+1)^2 equation above.  |E| < 1/2 for unitary
evolution, and |e^A|^2 = |1 + D| identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .grids import Grid1D, Wavefunction1D
from .potentials import HarmonicInternal, second_derivative

__all__ = [
    "DrivingProfile",
    "PathSample",
    "PropagatorCoeffs",
    "RiccatiBlowupError",
    "FockTruncationError",
    "solve_riccati",
    "integrate_ADF",
    "apply_propagator",
    "to_fock",
    "from_fock",
    "hermite_matrix",
    "influence_overlap",
    "InfluenceResult",
    "classical_transmitted_path",
    "classical_reflected_path",
]


class RiccatiBlowupError(RuntimeError):
    """|E| approached 1/2: non-unitary/numerically unstable regime."""

    def __init__(self, t: float, absE: float):
        super().__init__(
            f"|E(t)| = {absE:.8f} reached the 1/2 bound at t = {t:.6f}; "
            "the driving profile leaves the unitary normal-ordered regime"
        )
        self.t = t


class FockTruncationError(ValueError):
    """State not representable in the requested number-basis truncation."""


@dataclass(frozen=True)
class DrivingProfile:
    """Time-dependent spring profile w(t) on [0, T].

    w must accept numpy arrays of times.  Omega - 2*beta = 1 holds
    identically by construction.
    """

    w: object
    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("profile horizon T must be positive")

    def w_at(self, t):
        return np.asarray(self.w(np.asarray(t, dtype=float)), dtype=float)

    def omega(self, t):
        return (self.w_at(t) + 1.0) / 2.0

    def beta(self, t):
        return (self.omega(t) - 1.0) / 2.0

    @classmethod
    def constant(cls, w0: float, T: float) -> "DrivingProfile":
        return cls(w=lambda t: np.full_like(np.asarray(t, dtype=float), w0), T=T)

    @classmethod
    def from_path(cls, path: "PathSample", V, U: HarmonicInternal) -> "DrivingProfile":
        """w(t) = 4k + 2 V''(Y(t)) along a sampled center-of-mass path."""
        w_samples = 4.0 * U.k + 2.0 * np.asarray(second_derivative(V, path.Y), dtype=float)
        times = path.times

        def w(t):
            return np.interp(np.asarray(t, dtype=float), times, w_samples)

        return cls(w=w, T=float(times[-1]))


@dataclass(frozen=True)
class PathSample:
    """A fixed center-of-mass trajectory sampled on a uniform time lattice."""

    times: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if times.ndim != 1 or times.shape != Y.shape or len(times) < 2:
            raise ValueError("times and Y must be matching 1D arrays (>= 2 samples)")
        if not np.all(np.isfinite(Y)):
            raise ValueError("path contains non-finite values")
        dts = np.diff(times)
        if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
            raise ValueError("path must be sampled on a uniform lattice")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "Y", Y)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])


def classical_transmitted_path(V, Y_start: float, v0: float, T: float, dt: float) -> PathSample:
    """Newtonian trajectory of the composite center of mass in 2V(Y).

    Velocity-Verlet with force -2 V'(Y) (total mass M = 1).  Requires a
    differentiable potential.
    """
    return _verlet(V, Y_start, v0, T, dt, wall=None)


def classical_reflected_path(
    V, Y_start: float, v0: float, T: float, dt: float, wall: float = 0.0
) -> PathSample:
    """Synthetic reflected branch: Newtonian motion with an elastic bounce.

    A classical particle is never reflected by a well, so the quantum
    reflected branch has no true classical counterpart; this proxy runs
    the same Newtonian dynamics but reverses the velocity at `wall`
    (default: the well center), retracing the approach.
    """
    if not (Y_start < wall and v0 > 0):
        raise ValueError("reflected path synthesis expects approach from the left")
    return _verlet(V, Y_start, v0, T, dt, wall=wall)


def _verlet(V, Y_start, v0, T, dt, wall):
    n = int(np.ceil(T / dt))
    times = np.linspace(0.0, n * dt, n + 1)
    Y = np.empty(n + 1)
    Y[0] = Y_start
    v = v0
    a = -2.0 * float(V.first_derivative(Y[0]))
    for i in range(n):
        y_new = Y[i] + v * dt + 0.5 * a * dt**2
        a_new = -2.0 * float(V.first_derivative(y_new))
        v_new = v + 0.5 * (a + a_new) * dt
        if wall is not None and y_new >= wall and v_new > 0:
            y_new = 2.0 * wall - y_new
            v_new = -v_new
            a_new = -2.0 * float(V.first_derivative(y_new))
        Y[i + 1] = y_new
        v, a = v_new, a_new
    return PathSample(times=times, Y=Y)


@dataclass(frozen=True)
class PropagatorCoeffs:
    """Coefficient series of the normal-ordered propagator on a time lattice.

    phi is the accumulated phase (1/2) int_0^t Omega.  A, D, F are None
    until integrate_ADF has been run.  richardson_err is the endpoint
    |E| difference between the dt and dt/2 Riccati solves.
    """

    times: np.ndarray
    E: np.ndarray
    phi: np.ndarray
    A: np.ndarray | None = None
    D: np.ndarray | None = None
    F: np.ndarray | None = None
    richardson_err: float = 0.0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def index_of(self, t: float) -> int:
        i = int(round(t / self.dt))
        if i < 0 or i >= len(self.times) or abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t = {t} is not on the coefficient lattice")
        return i

    def validate(self, profile: DrivingProfile, ode_tol: float = 1e-6, tol: float = 1e-9) -> dict:
        """Check initial conditions, bounds, the |e^A|^2 = |1+D| identity,
        and 5-point finite-difference residuals of the coefficient ODEs.
        Returns the metrics; raises AssertionError on violation."""
        m: dict = {}
        assert abs(self.E[0]) == 0.0 and self.phi[0] == 0.0
        m["maxE"] = float(np.max(np.abs(self.E)))
        assert m["maxE"] < 0.5
        om = profile.omega(self.times)
        be = profile.beta(self.times)
        m["identity_omega_beta"] = float(np.max(np.abs(om - 2 * be - 1.0)))
        assert m["identity_omega_beta"] <= 1e-12
        m["riccati_residual"] = _fd_residual(
            self.times,
            self.E,
            lambda i: -1j * (be[i] + 2 * om[i] * self.E[i] + 4 * be[i] * self.E[i] ** 2),
        )
        assert m["riccati_residual"] <= ode_tol
        if self.D is not None:
            assert self.A[0] == 0 and self.D[0] == 0 and self.F[0] == 0
            m["one_plus_D_bound"] = float(np.max(np.abs(1 + self.D)) - 1.0)
            assert m["one_plus_D_bound"] <= tol
            m["unitarity_identity"] = float(
                np.max(np.abs(np.abs(np.exp(self.A)) ** 2 - np.abs(1 + self.D)))
            )
            assert m["unitarity_identity"] <= ode_tol
            m["D_residual"] = _fd_residual(
                self.times, self.D, lambda i: -1j * (om[i] + 4 * be[i] * self.E[i]) * (self.D[i] + 1)
            )
            m["F_residual"] = _fd_residual(
                self.times, self.F, lambda i: -1j * be[i] * (self.D[i] + 1) ** 2
            )
            assert m["D_residual"] <= ode_tol and m["F_residual"] <= ode_tol
        return m

    def write_csv(self, path) -> None:
        """Debug/plotting export: t plus Re/Im of E, D, A, F."""
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            f.write("# comvib-csv v1 propagator-coeffs\n")
            wr.writerow(["t", "reE", "imE", "reD", "imD", "reA", "imA", "reF", "imF"])
            zero = np.zeros_like(self.E)
            A = self.A if self.A is not None else zero
            D = self.D if self.D is not None else zero
            F = self.F if self.F is not None else zero
            for i, t in enumerate(self.times):
                wr.writerow(
                    [
                        f"{t:.10g}",
                        f"{self.E[i].real:.12g}",
                        f"{self.E[i].imag:.12g}",
                        f"{D[i].real:.12g}",
                        f"{D[i].imag:.12g}",
                        f"{A[i].real:.12g}",
                        f"{A[i].imag:.12g}",
                        f"{F[i].real:.12g}",
                        f"{F[i].imag:.12g}",
                    ]
                )


def _fd_residual(times, series, rhs_at) -> float:
    """Max |dS/dt - rhs| at spot-checked interior points (5-point stencil)."""
    if len(times) < 5:
        return 0.0
    dt = times[1] - times[0]
    i = np.arange(2, len(times) - 2)
    if len(i) > 200:
        i = i[:: max(1, len(i) // 200)]
    d = (-series[i + 2] + 8 * series[i + 1] - 8 * series[i - 1] + series[i - 2]) / (12 * dt)
    return float(np.max(np.abs(d - rhs_at(i))))


def solve_riccati(
    profile: DrivingProfile, dt: float, richardson: bool = True
) -> PropagatorCoeffs:
    """Integrate i dE/dt = beta + 2 Omega E + 4 beta E^2 with fixed-step RK4.

    Precondition: dt * max Omega <= 0.05 so the fastest scale is resolved.
    Raises RiccatiBlowupError if |E| approaches the 1/2 unitarity bound.
    """
    n = int(np.ceil(profile.T / dt))
    dt = profile.T / n
    times = np.linspace(0.0, profile.T, n + 1)
    om_n = profile.omega(times)
    be_n = profile.beta(times)
    mid = times[:-1] + dt / 2
    om_m = profile.omega(mid)
    be_m = profile.beta(mid)
    max_om = float(np.max(np.abs(np.concatenate([om_n, om_m]))))
    if dt * max_om > 0.05 + 1e-12:
        raise ValueError(
            f"dt*max|Omega| = {dt*max_om:.3f} > 0.05; reduce dt to resolve the driving"
        )

    E = _rk4_riccati(times, dt, om_n, be_n, om_m, be_m)
    rich = 0.0
    if richardson:
        times2 = np.linspace(0.0, profile.T, 2 * n + 1)
        om2 = profile.omega(times2)
        be2 = profile.beta(times2)
        mid2 = times2[:-1] + dt / 4
        E2 = _rk4_riccati(times2, dt / 2, om2, be2, profile.omega(mid2), profile.beta(mid2))
        rich = float(np.max(np.abs(E2[::2] - E)))
    phi = cumulative_simpson(om_n, x=times, initial=0.0) / 2.0
    return PropagatorCoeffs(times=times, E=E, phi=phi, richardson_err=rich)


def _rk4_riccati(times, dt, om_n, be_n, om_m, be_m):
    n = len(times) - 1
    E = np.empty(n + 1, dtype=np.complex128)
    E[0] = 0.0
    bound = 0.5 - 1e-6
    e = 0.0 + 0.0j
    for i in range(n):
        b0, o0 = be_n[i], om_n[i]
        bm, om = be_m[i], om_m[i]
        b1, o1 = be_n[i + 1], om_n[i + 1]
        k1 = -1j * (b0 + 2 * o0 * e + 4 * b0 * e * e)
        e2 = e + 0.5 * dt * k1
        k2 = -1j * (bm + 2 * om * e2 + 4 * bm * e2 * e2)
        e3 = e + 0.5 * dt * k2
        k3 = -1j * (bm + 2 * om * e3 + 4 * bm * e3 * e3)
        e4 = e + dt * k3
        k4 = -1j * (b1 + 2 * o1 * e4 + 4 * b1 * e4 * e4)
        e = e + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(e) >= bound:
            raise RiccatiBlowupError(times[i + 1], abs(e))
        E[i + 1] = e
    return E


def _cumsimp(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative Simpson that handles complex integrands."""
    if np.iscomplexobj(y):
        return cumulative_simpson(y.real, x=x, initial=0.0) + 1j * cumulative_simpson(
            y.imag, x=x, initial=0.0
        )
    return cumulative_simpson(y, x=x, initial=0.0)


def integrate_ADF(coeffs: PropagatorCoeffs, profile: DrivingProfile) -> PropagatorCoeffs:
    """Fill A, D, F from E by cumulative Simpson quadrature:

    A = -2i int beta E,   D = exp(-i int (Omega + 4 beta E)) - 1,
    F = -i int beta exp(-2i int (Omega + 4 beta E)).
    """
    t = coeffs.times
    om = profile.omega(t)
    be = profile.beta(t)
    I2 = _cumsimp(om + 4.0 * be * coeffs.E, t)
    A = -2j * _cumsimp(be * coeffs.E, t)
    D = np.exp(-1j * I2) - 1.0
    F = -1j * _cumsimp(be * np.exp(-2j * I2), t)
    return replace(coeffs, A=A, D=D, F=F)


# ---------------------------------------------------------------------------
# number-basis (Fock) machinery, unit-frequency convention
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def hermite_matrix(grid: Grid1D, n_fock: int) -> np.ndarray:
    """h[n, j] = n-th unit-frequency Hermite function at grid point y_j.

    Stable three-term recurrence on the normalized functions:
    h_0 = pi^(-1/4) exp(-y^2/2), h_n = sqrt(2/n) y h_{n-1} - sqrt((n-1)/n) h_{n-2}.
    """
    y = grid.x
    H = np.zeros((n_fock, grid.n))
    H[0] = np.pi ** (-0.25) * np.exp(-0.5 * y**2)
    if n_fock > 1:
        H[1] = np.sqrt(2.0) * y * H[0]
    for n in range(2, n_fock):
        H[n] = np.sqrt(2.0 / n) * y * H[n - 1] - np.sqrt((n - 1) / n) * H[n - 2]
    return H


def to_fock(psi: Wavefunction1D, n_fock: int) -> tuple[np.ndarray, float]:
    """Project onto the unit-frequency number basis.

    Returns (coefficients, truncation error), where the truncation error
    is the probability weight outside the first n_fock levels.
    """
    H = hermite_matrix(psi.grid, n_fock)
    c = H @ psi.amp * psi.grid.dx
    total = float(np.sum(np.abs(psi.amp) ** 2) * psi.grid.dx)
    trunc = max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)) / total)
    return c, trunc


def from_fock(c: np.ndarray, grid: Grid1D) -> Wavefunction1D:
    H = hermite_matrix(grid, len(c))
    return Wavefunction1D(grid, c @ H)


def _lower2(c: np.ndarray) -> np.ndarray:
    """a^2 c in the number basis: out[n] = sqrt((n+1)(n+2)) c[n+2]."""
    out = np.zeros_like(c)
    n = np.arange(len(c) - 2)
    out[:-2] = np.sqrt((n + 1.0) * (n + 2.0)) * c[2:]
    return out


def _raise2(c: np.ndarray) -> np.ndarray:
    """a'^2 c in the number basis: out[n] = sqrt(n(n-1)) c[n-2]."""
    out = np.zeros_like(c)
    n = np.arange(2, len(c))
    out[2:] = np.sqrt(n * (n - 1.0)) * c[:-2]
    return out


def _exp_quad(c: np.ndarray, coeff: complex, op) -> np.ndarray:
    """exp(coeff * op) c by its terminating power series (op shifts by 2)."""
    out = c.copy()
    term = c
    for j in range(1, len(c) // 2 + 2):
        term = coeff * op(term) / j
        nrm = np.linalg.norm(term)
        if nrm == 0.0:
            break
        out = out + term
        if nrm < 1e-18:
            break
    return out


def _apply_fock(coeffs: PropagatorCoeffs, idx: int, c: np.ndarray) -> np.ndarray:
    """Apply exp(-i Phi) e^A e^{E a'^2} (1+D)^{a'a} e^{F a^2} to coefficients."""
    if coeffs.D is None:
        raise ValueError("coefficients lack A/D/F; run integrate_ADF first")
    E, D, A, phi = coeffs.E[idx], coeffs.D[idx], coeffs.A[idx], coeffs.phi[idx]
    F = coeffs.F[idx]
    v = _exp_quad(c, F, _lower2)
    v = v * (1.0 + D) ** np.arange(len(c))
    v = _exp_quad(v, E, _raise2)
    return v * np.exp(A) * np.exp(-1j * phi)


def apply_propagator(
    coeffs: PropagatorCoeffs,
    t: float,
    psi: Wavefunction1D,
    n_fock: int = 64,
    trunc_tol: float = 1e-5,
) -> Wavefunction1D:
    """Propagate psi to time t using the normal-ordered coefficient series.

    psi is projected onto n_fock unit-frequency number states (projection
    renormalized; raises FockTruncationError if the discarded weight
    exceeds trunc_tol), propagated in the number basis, and reconstructed
    on the original grid.  The output is not renormalized: its norm defect
    measures the combined truncation + integration error.
    """
    idx = coeffs.index_of(t)
    c, trunc = to_fock(psi, n_fock)
    if trunc > trunc_tol:
        raise FockTruncationError(
            f"number-basis truncation error {trunc:.3e} > {trunc_tol:.1e} at "
            f"n_fock={n_fock}; increase n_fock"
        )
    c = c / np.linalg.norm(c)
    v = _apply_fock(coeffs, idx, c)
    return from_fock(v, psi.grid)


@dataclass(frozen=True)
class InfluenceResult:
    """Influence functional for one pair of center-of-mass paths.

    value = phase_factor * overlap is the full functional; overlap_mag =
    |<psi_A|psi_B>| is the decoherence magnitude alone.  The inner product
    is normalized by the evolved norms so that identical paths give
    exactly 1 regardless of basis truncation.
    """

    value: complex
    overlap: complex
    overlap_mag: float
    phase_factor: complex
    coeffs_a: PropagatorCoeffs
    coeffs_b: PropagatorCoeffs
    n_fock: int


def influence_overlap(
    psi_i: Wavefunction1D,
    path_a: PathSample,
    path_b: PathSample,
    V,
    U: HarmonicInternal,
    riccati_dt: float | None = None,
    n_fock: int = 64,
    trunc_tol: float = 1e-5,
) -> InfluenceResult:
    """F = exp(-2i int (V(Y_A) - V(Y_B)) dt) <psi_A(T)|psi_B(T)>.

    psi_i is driven along each path via the Riccati pipeline with
    w(t) = 4k + 2 V''(Y(t)); the number-basis size is doubled until the
    overlap changes by < 1e-8.
    """
    if len(path_a.times) != len(path_b.times) or not np.allclose(
        path_a.times, path_b.times, rtol=1e-12, atol=0.0
    ):
        raise ValueError("paths must share a common time lattice")

    prof_a = DrivingProfile.from_path(path_a, V, U)
    prof_b = DrivingProfile.from_path(path_b, V, U)
    if riccati_dt is None:
        wmax = max(np.max(np.abs(prof_a.w_at(path_a.times))), np.max(np.abs(prof_b.w_at(path_b.times))))
        om_max = (wmax + 1.0) / 2.0
        riccati_dt = min(path_a.dt, 0.05 / om_max)
    ca = integrate_ADF(solve_riccati(prof_a, riccati_dt), prof_a)
    cb = integrate_ADF(solve_riccati(prof_b, riccati_dt), prof_b)

    T = path_a.T
    ia, ib = ca.index_of(T), cb.index_of(T)
    overlap_prev = None
    nf = n_fock
    while True:
        c0, trunc = to_fock(psi_i, nf)
        if trunc > trunc_tol and nf < 1024:
            nf *= 2
            continue
        if trunc > trunc_tol:
            raise FockTruncationError(
                f"initial state truncation {trunc:.3e} > {trunc_tol:.1e} even at n_fock={nf}"
            )
        c0 = c0 / np.linalg.norm(c0)
        va = _apply_fock(ca, ia, c0)
        vb = _apply_fock(cb, ib, c0)
        overlap = complex(np.vdot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))
        if overlap_prev is not None and abs(overlap - overlap_prev) < 1e-8:
            break
        if nf >= 1024:
            break
        overlap_prev = overlap
        nf *= 2

    dV = V.value(path_a.Y) - V.value(path_b.Y)
    phase = complex(np.exp(-2j * simpson(dV, x=path_a.times)))
    return InfluenceResult(
        value=phase * overlap,
        overlap=overlap,
        overlap_mag=abs(overlap),
        phase_factor=phase,
        coeffs_a=ca,
        coeffs_b=cb,
        n_fock=nf,
    )
