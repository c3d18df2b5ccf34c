"""Orchestration of the numerical studies.

run_scattering drives the full interferometer pipeline: build the
two-packet superposition, evolve the joint state with the exact composite
potential until both outgoing packets clear the well, then measure
entanglement (impurity of the reduced internal state), interference
(phase-optimized leftward probability), and the compositeness measure.

The two input branches are parity mirrors of each other (the composite
Hamiltonian commutes with Y -> -Y for any external potential, because it
swaps the two V(Y +/- y) terms), so one 2D evolution suffices: the second
branch is the index-reversed field.  This is exact on the periodic
lattice and is verified against an explicit second evolution in the test
suite; set exploit_mirror=False to force two evolutions.
"""

from __future__ import annotations

import csv
import json
import multiprocessing as mp
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ._version import __version__
from .evolve import EvolutionPlan, evolve_1d_parametric, evolve_2d
from .grids import Grid1D, Wavefunction1D, Wavefunction2D, make_gaussian_1d
from .observables import (
    compositeness,
    impurity,
    leftward_probability,
    optimize_theta,
    partial_trace_internal,
    q_profile,
)
from .parametric import (
    DrivingProfile,
    apply_propagator,
    integrate_ADF,
    solve_riccati,
)
from .potentials import HarmonicInternal, SmoothedWell, SquareWell

__all__ = [
    "ExperimentConfig",
    "ExperimentRecord",
    "run_scattering",
    "scan_xi0",
    "scan_compositeness",
    "riccati_crosscheck",
    "CrosscheckReport",
    "default_battery",
    "internal_eigenstate",
    "write_xi0_csv",
    "write_mc_csv",
    "write_manifest",
]

CSV_SCHEMA_VERSION = "comvib-csv v1"


@dataclass
class ExperimentConfig:
    """All knobs of the scattering experiment and its scans.

    The defaults reproduce the reference configuration: Y0 = 20,
    sigma_Y^2 = 25, p = 1, L = 0.5, mV0 = 2.64, k = (9/2)^2 (omega = 9),
    sigma_y^2 = 1/9 (the internal ground state at xi0 = 0).

    mV0 is the single-particle-equivalent well-strength product (total
    mass M = 1, so it equals the effective well depth seen by the center
    of mass).  Each constituent therefore feels a well of depth mV0/2:
    the composite potential V(Y+y) + V(Y-y) then reduces to the
    calibrated effective well of depth mV0 in the point-particle limit.
    """

    # external well
    mV0: float = 2.64
    L: float = 0.5
    smoothing_s: float = 0.05
    # internal mode
    k: float = 20.25  # (9/2)^2
    xi0: float = 0.0
    sigma_y_sq: float = 1.0 / 9.0
    # center of mass
    Y0: float = 20.0
    sigma_Y_sq: float = 25.0
    p: float = 1.0
    # lattices
    Y_min: float = -120.0
    Y_max: float = 120.0
    n_Y: int = 2048
    y_min: float = -2.0
    y_max: float = 2.0
    n_y: int = 256
    # evolution
    dt: float = 0.005
    t_max: float = 60.0
    stop_radius: float = 5.0
    stop_threshold: float = 1e-4
    check_every: int = 100
    record_every: int = 200
    # sharp-well scattering sheds ~3e-8 of broadband numerical dust onto
    # the boundary ring (measured at the defaults); 1e-7 still catches any
    # genuine packet arrival orders of magnitude before it matters
    boundary_tol: float = 1e-7
    # number-basis pipeline
    n_fock: int = 64
    trunc_tol: float = 1e-5
    # xi0 scan
    xi0_min: float = 0.0
    xi0_max: float = 1.0
    n_xi0: int = 21
    # compositeness maps
    mc_Y0_min: float = -15.0
    mc_Y0_max: float = 15.0
    mc_n_Y0: int = 31
    mc_xi_min: float = -1.0
    mc_xi_max: float = 1.0
    mc_n_xi: int = 21
    mc_L: float = 0.0  # 0 -> use L (the wide-well variant sets 20)
    mc_width_sq: float = 0.0  # 0 -> default widths; the variant sets 1.0
    mc_width_mode: str = "com"  # which width the variant's narrow packet refers to
    # run control
    seed: int = 0
    n_jobs: int = 0  # 0 -> one worker per core
    fft_workers: int = 0  # 0 -> auto (capped at 2); scans force 1 per worker
    exploit_mirror: bool = True
    outdir: str = "out"

    def validate(self) -> None:
        if self.mV0 < 0 or self.L <= 0 or self.smoothing_s <= 0:
            raise ValueError("well parameters must satisfy mV0 >= 0, L > 0, s > 0")
        if self.k <= 0 or self.sigma_y_sq <= 0 or self.sigma_Y_sq <= 0:
            raise ValueError("internal/packet parameters must be positive")
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError("dt and t_max must be positive")
        if self.mc_width_mode not in ("com", "internal"):
            raise ValueError("mc_width_mode must be 'com' or 'internal'")
        self.grid_Y()
        self.grid_y()

    # --- derived builders -------------------------------------------------
    def grid_Y(self) -> Grid1D:
        return Grid1D(self.Y_min, self.Y_max, self.n_Y)

    def grid_y(self) -> Grid1D:
        return Grid1D(self.y_min, self.y_max, self.n_y)

    def effective_well(self) -> SquareWell:
        """The single-particle-equivalent well (mass M = 1, depth mV0)."""
        return SquareWell(V0=self.mV0, L=self.L)

    def constituent_well(self) -> SquareWell:
        """The well felt by each constituent (depth mV0/2)."""
        return SquareWell(V0=self.mV0 / 2.0, L=self.L)

    def constituent_smoothed(self) -> SmoothedWell:
        return SmoothedWell(V0=self.mV0 / 2.0, L=self.L, s=self.smoothing_s)

    def internal(self) -> HarmonicInternal:
        return HarmonicInternal(k=self.k)

    def omega_internal(self) -> float:
        return 2.0 * np.sqrt(self.k)

    def plan(self) -> EvolutionPlan:
        n_steps = int(np.ceil(self.t_max / self.dt))
        return EvolutionPlan(
            dt=self.dt,
            n_steps=n_steps,
            record_every=self.record_every,
            boundary_tol=self.boundary_tol,
            check_every=self.check_every,
            fft_workers=None if self.fft_workers == 0 else self.fft_workers,
        )

    def with_internal_grid_for(self, xi0_max: float) -> "ExperimentConfig":
        """Widen the internal lattice when the displaced state needs room.

        The default [-2, 2) x 256 lattice holds the ground state with
        ~1e-16 edge density, but a displacement beyond ~0.25 pushes the
        oscillating packet's tails over the 1e-8 boundary threshold;
        [-4, 4) x 512 keeps the spacing and restores the margin.
        """
        if abs(xi0_max) <= 0.25 or self.y_max >= abs(xi0_max) + 2.5:
            return self
        return replace(self, y_min=-4.0, y_max=4.0, n_y=512)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ExperimentRecord:
    """One row of a study: inputs echoed plus measured outputs.

    dt_min = 1/(2 M_C) is the energy-time bound on the interaction
    timescale (None when M_C = 0).  `valid` is False when any numerical
    diagnostic exceeded its threshold.
    """

    config: dict
    xi0: float
    impurity: float
    p_max: float
    theta_star: float
    p_left_branch: float
    m_c: float
    dt_min: float | None
    diagnostics: dict = field(default_factory=dict)
    valid: bool = True

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "outputs": {
                "xi0": self.xi0,
                "impurity": self.impurity,
                "p_max": self.p_max,
                "theta_star": self.theta_star,
                "p_left_branch": self.p_left_branch,
                "m_c": self.m_c,
                "dt_min": self.dt_min,
            },
            "diagnostics": self.diagnostics,
            "valid": self.valid,
            "version": __version__,
        }


class _StopWhenCleared:
    """Stop once the central region has been visited and then emptied."""

    def __init__(self, grid_Y: Grid1D, grid_y: Grid1D, radius: float, threshold: float):
        self.mask = np.abs(grid_Y.x) < radius
        self.dA = grid_Y.dx * grid_y.dx
        self.threshold = threshold
        self.arm_level = max(10.0 * threshold, 0.05)
        self.armed = False

    def __call__(self, psi: Wavefunction2D, t: float) -> bool:
        mass = float(np.sum(np.abs(psi.amp[self.mask, :]) ** 2) * self.dA)
        if not self.armed:
            self.armed = mass > self.arm_level
            return False
        return mass < self.threshold


def _mirror_Y(amp: np.ndarray) -> np.ndarray:
    """Parity flip Y -> -Y on the periodic lattice: j -> (n - j) mod n."""
    return np.roll(amp[::-1, :], 1, axis=0)


def branch_fields(config: ExperimentConfig):
    """Evolve the left-incident branch; mirror (or re-evolve) the right one.

    Returns (psi_A_final, psi_B_final, trajectory_of_A).
    """
    gY, gy = config.grid_Y(), config.grid_y()
    com_a = make_gaussian_1d(gY, center=-config.Y0, width_sq=config.sigma_Y_sq, momentum=config.p)
    internal = make_gaussian_1d(gy, center=config.xi0, width_sq=config.sigma_y_sq)
    psi0_a = Wavefunction2D.product(com_a, internal)
    stop = _StopWhenCleared(gY, gy, config.stop_radius, config.stop_threshold)
    traj = evolve_2d(psi0_a, config.constituent_well(), config.internal(), config.plan(), stop_condition=stop)
    psi_a = traj.final
    if config.exploit_mirror:
        psi_b = Wavefunction2D(gY, gy, _mirror_Y(psi_a.amp))
    else:
        com_b = make_gaussian_1d(gY, center=config.Y0, width_sq=config.sigma_Y_sq, momentum=-config.p)
        psi0_b = Wavefunction2D.product(com_b, internal)
        stop_b = _StopWhenCleared(gY, gy, config.stop_radius, config.stop_threshold)
        traj_b = evolve_2d(
            psi0_b, config.constituent_well(), config.internal(), config.plan(), stop_condition=stop_b
        )
        psi_b = traj_b.final
    return psi_a, psi_b, traj


def _superpose_2d(psi_a: Wavefunction2D, psi_b: Wavefunction2D, theta: float) -> Wavefunction2D:
    amp = psi_a.amp + np.exp(1j * theta) * psi_b.amp
    return Wavefunction2D(psi_a.grid_Y, psi_a.grid_y, amp).normalized()


def run_scattering(config: ExperimentConfig) -> ExperimentRecord:
    """Full pipeline: states -> evolve -> stop -> impurity, P_max, M_C."""
    config.validate()
    config = config.with_internal_grid_for(config.xi0)
    psi_a, psi_b, traj = branch_fields(config)

    lw_branch = leftward_probability(psi_a, config.stop_radius, 10 * config.stop_threshold)

    def run(theta: float) -> float:
        return leftward_probability(
            _superpose_2d(psi_a, psi_b, theta), config.stop_radius, 10 * config.stop_threshold
        ).probability

    fit = optimize_theta(run)
    rho = partial_trace_internal(_superpose_2d(psi_a, psi_b, fit.theta_star))
    ent = impurity(rho)

    # compositeness of the initial configuration (single branch packet)
    gY = config.grid_Y()
    phi0 = make_gaussian_1d(gY, center=-config.Y0, width_sq=config.sigma_Y_sq, momentum=config.p)
    psi_int = make_gaussian_1d(config.grid_y(), center=config.xi0, width_sq=config.sigma_y_sq)
    q = q_profile(config.constituent_well(), psi_int, mode="exact", grid_Y=gY)
    m_c = compositeness(q, phi0)
    dt_min = (1.0 / (2.0 * m_c)) if m_c > 0 else None

    diag = {
        "norm_drift": traj.norm_drift,
        "energy_drift": traj.energy_drift,
        "energy_wobble": traj.energy_wobble,
        "boundary_leak_max": traj.boundary_leak_max,
        "t_final": float(traj.times[-1]),
        "n_steps": int(round(traj.times[-1] / config.dt)),
        "cleared": bool(lw_branch.cleared),
        "central_mass": lw_branch.central_mass,
        "theta_fit_offset": fit.a,
        "theta_fit_confirm": fit.p_confirm,
    }
    valid = (
        traj.norm_drift <= 1e-10
        and traj.energy_drift <= 1e-6
        and traj.boundary_leak_max <= config.boundary_tol
        and lw_branch.cleared
    )
    return ExperimentRecord(
        config=config.to_dict(),
        xi0=config.xi0,
        impurity=ent,
        p_max=fit.p_max,
        theta_star=fit.theta_star,
        p_left_branch=lw_branch.probability,
        m_c=m_c,
        dt_min=dt_min,
        diagnostics=diag,
        valid=valid,
    )


def _scan_point(cfg_dict: dict) -> ExperimentRecord:
    return run_scattering(ExperimentConfig(**cfg_dict))


def scan_xi0(config: ExperimentConfig, xi0_values=None) -> list[ExperimentRecord]:
    """One scattering run per initial internal displacement (concurrent).

    Points run in separate processes with fft_workers = 1 each, so results
    are identical whatever n_jobs is; aggregation preserves input order.
    """
    config.validate()
    if xi0_values is None:
        xi0_values = np.linspace(config.xi0_min, config.xi0_max, config.n_xi0)
    xi0_values = np.asarray(xi0_values, dtype=float)
    base = config.with_internal_grid_for(float(np.max(np.abs(xi0_values))))
    cfgs = [replace(base, xi0=float(x), fft_workers=1).to_dict() for x in xi0_values]
    n_jobs = config.n_jobs if config.n_jobs > 0 else min(os.cpu_count() or 1, len(cfgs))
    if n_jobs <= 1:
        return [_scan_point(c) for c in cfgs]
    method = "fork" if "fork" in mp.get_all_start_methods() else None
    with mp.get_context(method).Pool(processes=n_jobs) as pool:
        return pool.map(_scan_point, cfgs)


def write_xi0_csv(records: list[ExperimentRecord], path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {CSV_SCHEMA_VERSION} scan-xi0\n")
        wr = csv.writer(f)
        wr.writerow(["xi0", "impurity", "p_max", "theta_star"])
        for r in records:
            wr.writerow([f"{r.xi0:.10g}", f"{r.impurity:.12g}", f"{r.p_max:.12g}", f"{r.theta_star:.12g}"])


# ---------------------------------------------------------------------------
# compositeness maps
# ---------------------------------------------------------------------------


@dataclass
class CompositenessCell:
    Y0: float
    xi: float
    q_mean: float
    q_sq_mean: float
    m_c: float


def scan_compositeness(config: ExperimentConfig) -> list[CompositenessCell]:
    """M_C and <Q> moments over a (Y0, xi) grid of initial product states.

    Uses the same per-constituent square well as the scattering runs (the
    wide-well variant overrides L via mc_L).  The narrow-packet variant's
    width (mc_width_sq) applies to the center-of-mass packet by default
    (mc_width_mode='com'), which is what makes the two well edges
    separately resolvable; set mc_width_mode='internal' for the other
    reading.
    """
    config.validate()
    L = config.mc_L if config.mc_L > 0 else config.L
    well = SquareWell(V0=config.mV0 / 2.0, L=L)
    width_com = config.sigma_Y_sq
    width_int = config.sigma_y_sq
    if config.mc_width_sq > 0:
        if config.mc_width_mode == "com":
            width_com = config.mc_width_sq
        else:
            width_int = config.mc_width_sq

    span = max(abs(config.mc_Y0_min), abs(config.mc_Y0_max))
    need = span + 8.0 * np.sqrt(width_com) + L
    half = 64.0
    while half < need:
        half *= 2.0
    gY = Grid1D(-half, half, 2048)
    y_half = 4.0
    while y_half < 8.0 * np.sqrt(width_int) + max(abs(config.mc_xi_min), abs(config.mc_xi_max)):
        y_half *= 2.0
    gy = Grid1D(-y_half, y_half, 512)

    Y0s = np.linspace(config.mc_Y0_min, config.mc_Y0_max, config.mc_n_Y0)
    xis = np.linspace(config.mc_xi_min, config.mc_xi_max, config.mc_n_xi)
    cells: list[CompositenessCell] = []
    dx = gY.dx
    for xi in xis:
        psi = make_gaussian_1d(gy, center=float(xi), width_sq=width_int)
        q = q_profile(well, psi, mode="exact", grid_Y=gY)
        for Y0 in Y0s:
            phi = make_gaussian_1d(gY, center=float(Y0), width_sq=width_com)
            dens = phi.density()
            total = dens.sum() * dx
            q_mean = float(np.sum(q.values * dens) * dx / total)
            q_sq = float(np.sum(q.values**2 * dens) * dx / total)
            m_c = float(np.sqrt(max(q_sq - q_mean**2, 0.0)))
            cells.append(CompositenessCell(float(Y0), float(xi), q_mean, q_sq, m_c))
    return cells


def write_mc_csv(cells: list[CompositenessCell], path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {CSV_SCHEMA_VERSION} scan-mc\n")
        wr = csv.writer(f)
        wr.writerow(["Y0", "xi", "q_mean", "q_sq_mean", "m_c"])
        for c in cells:
            wr.writerow(
                [f"{c.Y0:.10g}", f"{c.xi:.10g}", f"{c.q_mean:.12g}", f"{c.q_sq_mean:.12g}", f"{c.m_c:.12g}"]
            )


# ---------------------------------------------------------------------------
# Riccati pipeline cross-validation
# ---------------------------------------------------------------------------


def internal_eigenstate(grid: Grid1D, omega: float, n: int) -> Wavefunction1D:
    """n-th eigenstate of p^2/2 + omega^2 y^2/2 (analytic Hermite form)."""
    y = np.sqrt(omega) * grid.x
    h = np.pi ** (-0.25) * np.exp(-0.5 * y**2)
    if n >= 1:
        h_prev, h = h, np.sqrt(2.0) * y * h
        for m in range(2, n + 1):
            h_prev, h = h, np.sqrt(2.0 / m) * y * h - np.sqrt((m - 1) / m) * h_prev
    return Wavefunction1D(grid, h.astype(complex)).normalized()


@dataclass
class BatteryCase:
    """One driving profile of the cross-validation battery.

    n_fock/grid override the defaults for cases that need them: the pure
    rotation (beta == 0, i.e. w == 1) breathes the omega = 9 states by a
    factor 3 in width, so it needs a wide lattice, and its 1e-8 fidelity
    target sits below the ~1e-7 truncation of those states in 64 number
    states, so it is checked in a larger basis.
    """

    name: str
    profile: DrivingProfile
    threshold: float
    n_fock: int | None = None
    grid: Grid1D | None = None


@dataclass
class CrosscheckRow:
    profile: str
    state: str
    fidelity: float
    threshold: float
    n_fock: int

    @property
    def passed(self) -> bool:
        return self.fidelity >= self.threshold


@dataclass
class CrosscheckReport:
    rows: list[CrosscheckRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[CrosscheckRow]:
        return [r for r in self.rows if not r.passed]


def default_battery(T: float = 2.0) -> list[BatteryCase]:
    """Smooth driving profiles around the reference internal frequency."""
    wide = Grid1D(-16.0, 16.0, 2048)
    return [
        BatteryCase("constant-w81", DrivingProfile.constant(81.0, T), 0.999),
        BatteryCase("beta-zero", DrivingProfile.constant(1.0, T), 1.0 - 1e-8, n_fock=256, grid=wide),
        BatteryCase("gauss-bump", DrivingProfile(lambda t: 81.0 + 10.0 * np.exp(-((t - 1.0) ** 2)), T), 0.999),
        BatteryCase("gauss-dip", DrivingProfile(lambda t: 81.0 - 25.0 * np.exp(-((t - 0.8) ** 2) / 0.02), T), 0.999),
        BatteryCase("slow-ramp", DrivingProfile(lambda t: 81.0 + 19.0 * np.sin(np.pi * t / (2 * T)) ** 2, T), 0.999),
        BatteryCase("oscillatory", DrivingProfile(lambda t: 81.0 + 20.0 * np.sin(3.0 * t), T), 0.999),
    ]


def riccati_crosscheck(
    battery=None,
    grid: Grid1D | None = None,
    n_fock: int = 64,
    grid_dt: float = 2e-4,
    omega_states: float = 9.0,
) -> CrosscheckReport:
    """Fidelity of the normal-ordered propagator against the grid oracle.

    For every (profile, initial state) pair, the state is evolved once by
    evolve_1d_parametric (split-step grid oracle) and once through
    solve_riccati -> integrate_ADF -> apply_propagator; the report lists
    |<psi_grid | psi_fock>| (normalized) per pair.
    """
    if battery is None:
        battery = default_battery()
    if grid is None:
        grid = Grid1D(-4.0, 4.0, 512)
    rows: list[CrosscheckRow] = []
    for case in battery:
        g = case.grid if case.grid is not None else grid
        nf = case.n_fock if case.n_fock is not None else n_fock
        states = [
            ("ground", internal_eigenstate(g, omega_states, 0)),
            ("displaced", make_gaussian_1d(g, center=0.5, width_sq=1.0 / omega_states)),
            ("first-excited", internal_eigenstate(g, omega_states, 1)),
        ]
        profile = case.profile
        om_max = float(np.max(np.abs(profile.omega(np.linspace(0, profile.T, 2001)))))
        r_dt = min(2e-4, 0.04 / om_max)
        coeffs = integrate_ADF(solve_riccati(profile, r_dt), profile)
        n_steps = int(np.ceil(profile.T / grid_dt))
        plan = EvolutionPlan(dt=profile.T / n_steps, n_steps=n_steps, fft_workers=1)
        for sname, psi0 in states:
            ref = evolve_1d_parametric(psi0, profile.w, plan).final
            out = apply_propagator(coeffs, profile.T, psi0, n_fock=nf)
            fid = abs(ref.inner(out)) / (ref.norm() * out.norm())
            rows.append(
                CrosscheckRow(profile=case.name, state=sname, fidelity=float(fid), threshold=case.threshold, n_fock=nf)
            )
    return CrosscheckReport(rows=rows)


def write_manifest(config: ExperimentConfig, path, extra: dict | None = None) -> None:
    """Write the fully resolved configuration (plus diagnostics) as JSON."""
    doc = {"version": __version__, "config": config.to_dict()}
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
