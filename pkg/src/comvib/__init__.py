"""comvib: decoherence of a composite particle by its internal vibration.

A small numpy/scipy library that simulates a two-constituent composite
particle (center of mass Y, internal half-separation y) scattering off a
square-well beam splitter, and quantifies how the internal mode acts as
an onboard environment: entanglement of the reduced internal state,
suppression of two-packet interference, influence-functional overlaps
along fixed center-of-mass paths, and a compositeness measure built from
the variance of the effective coupling operator.

Units are dimensionless with hbar = 1 and total mass M = 1.
"""

from ._version import __version__
from .grids import (
    Grid1D,
    Wavefunction1D,
    Wavefunction2D,
    from_momentum,
    make_gaussian_1d,
    superpose,
    to_momentum,
)
from .potentials import (
    HarmonicInternal,
    QuadraticExternal,
    SmoothedWell,
    SquareWell,
    analytic_RT,
    calibrate_beam_splitter,
    composite_grid,
    composite_potential,
    second_derivative,
)
from .evolve import (
    BoundaryLeakError,
    EvolutionPlan,
    Trajectory,
    energy,
    evolve_1d,
    evolve_1d_parametric,
    evolve_2d,
)
from .parametric import (
    DrivingProfile,
    FockTruncationError,
    InfluenceResult,
    PathSample,
    PropagatorCoeffs,
    RiccatiBlowupError,
    apply_propagator,
    classical_reflected_path,
    classical_transmitted_path,
    from_fock,
    influence_overlap,
    integrate_ADF,
    solve_riccati,
    to_fock,
)
from .observables import (
    LeftwardResult,
    QProfile,
    ReducedDensityMatrix,
    ThetaFit,
    compositeness,
    impurity,
    leftward_probability,
    optimize_theta,
    partial_trace_internal,
    q_profile,
)
from .experiments import (
    CrosscheckReport,
    ExperimentConfig,
    ExperimentRecord,
    default_battery,
    internal_eigenstate,
    riccati_crosscheck,
    run_scattering,
    scan_compositeness,
    scan_xi0,
    write_manifest,
    write_mc_csv,
    write_xi0_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
