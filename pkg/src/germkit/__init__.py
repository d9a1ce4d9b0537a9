"""Complex germs on isotropic tori of commuting Hamiltonian flows."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CommutationError,
    ConsistencyError,
    ContainmentError,
    DimensionError,
    DivergenceError,
    GermkitError,
    InvarianceError,
    KreinDegeneracyError,
    LatticeError,
    ModelSpecError,
    PreconditionError,
    RankError,
    RefusalError,
    StabilityError,
    SymplecticityError,
)
from .symcore import (  # noqa: E402
    DEFAULT_TOL,
    QuotientFrame,
    Subspace,
    SymplecticSpace,
    Tolerances,
    classify_subspace,
    form_value,
    is_dissipative,
    is_symplectic,
    krein_value,
    quotient_frame,
    reduce_operator,
    subspace_distance,
)
from .spectral import StabilityClass, classify_stability, krein_signature, spectral_decompose  # noqa: E402
from .pli import joint_decompose, pli_common, pli_witness, uniqueness_check, verify_pli  # noqa: E402
from .monodromy import (  # noqa: E402
    HamiltonianModel,
    integrate_variational,
    involution_check,
    monodromy_matrices,
    period_lattice,
    reduced_monodromy,
)
from .models import CyclicModelSpec, analytic_reduced_monodromy, critical_manifold_check, make_cyclic_model  # noqa: E402
from .germ import analyze, build_germ, germ_exists, second_germ_witness, verify_germ  # noqa: E402
