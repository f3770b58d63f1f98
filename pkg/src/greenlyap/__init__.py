"""Green bundles and Lyapunov exponents for twisting dynamics.

Two parallel stacks: discrete (symplectic twist maps via generating
functions, :mod:`greenlyap.twistmap` / :mod:`greenlyap.greenbundle`) and
continuous (Tonelli Hamiltonian flows, :mod:`greenlyap.tonelli`), joined
by the shared linear algebra in :mod:`greenlyap.symgeo` and the spectrum
estimators in :mod:`greenlyap.lyap`.  The point of the package is the
cross-validation: Green-bundle gap formulas and QR Lyapunov spectra are
computed along independent code paths and compared, with every hypothesis
(local minimality, monotonicity, convergence) certified rather than
assumed.
"""

from . import greenbundle, lyap, potentials, symgeo, tonelli, twistmap
from .errors import (
    ConjugatePointError,
    DegenerateCocycleError,
    GreenLyapError,
    MonotonicityViolationError,
    NewtonDivergenceError,
    NoGapError,
    NonConvergenceError,
    NonPDDenominatorError,
    NoPositiveEigenvalueError,
    NoPositiveExponentError,
    SaddleDetectedError,
    StepSizeUnderflowError,
)
from .greenbundle import (
    GreenPair,
    Theorem4Result,
    compute_green_bundles,
    compute_green_bundles_periodic,
    riccati_backward_step,
    riccati_forward_step,
    theorem2_sum,
    theorem4_bound,
)
from .lyap import (
    GeneralBoundReport,
    LyapunovSpectrum,
    SubspaceEstimate,
    WeightedOrbitMeasure,
    birkhoff_average,
    cocycle_bound_constant,
    general_bound_check_1d,
    general_bound_check_dd,
    lyapunov_spectrum_flow,
    lyapunov_spectrum_map,
    smallest_positive,
    stable_space_estimate,
    sum_positive,
    unstable_space_estimate,
)
from .potentials import TrigPolynomial, cosine_potential, coupled_cosine_potential, zero_potential
from .symgeo import (
    HeightForm,
    LagrangianFrame,
    SympBlockMat,
    check_symplectic,
    conorm,
    graph_frame,
    graph_transform,
    height_distance,
    height_form,
    q_plus,
    standard_symplectic_matrix,
    subspace_distance,
    vertical_frame,
)
from .tonelli import (
    GreenFlowPair,
    GreenOrbitData,
    Lemma9Report,
    MechanicalHamiltonian,
    OrbitPath,
    Theorem3Result,
    TonelliHamiltonian,
    compute_green_bundles_flow,
    finite_time_graph,
    flat_torus,
    green_bundles_along_orbit,
    lemma9_check,
    pendulum,
    riccati_residual,
    separatrix_energy,
    theorem1_sum,
    theorem3_bound,
    validate_hamiltonian,
)
from .twistmap import (
    BlockTridiagonal,
    GeneratingFunction,
    MinimalityCertificate,
    OrbitSegment,
    PeriodicConfiguration,
    SeparableTwistFamily,
    action,
    coupled_standard_family,
    euler_lagrange_residual,
    find_minimizing_periodic_orbit,
    forward_map,
    hessian,
    inverse_map,
    is_positive_definite,
    iterate_orbit,
    jacobi_propagate,
    periodic_action,
    periodic_gradient,
    periodic_hessian,
    standard_family,
    tangent_map,
    validate_generating_function,
)

__version__ = "0.1.0"
