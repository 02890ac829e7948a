"""Unruh-DeWitt detectors with amplitude and derivative coupling, the dual
switching transform, and entanglement harvesting between static detectors."""

__version__ = "0.1.0"

from .detector import (  # noqa: E402
    CouplingKind,
    DetectorConfig,
    DetectorState,
    GaussianBall,
    Pointlike,
    constant_gap_dual,
    duality_residual_single,
    evaluate_lij,
    excitation_probability,
    excitation_probability_derivative,
    final_state,
)
from .errors import (  # noqa: E402
    AppendixConsistencyError,
    ConfigurationError,
    CrossValidationError,
    DegenerateProbabilityError,
    InvalidRegulatorError,
    InvalidSpecError,
    NumericalError,
    PerturbativeValidityError,
    UDWError,
)
from .field import (  # noqa: E402
    Event,
    FiniteModeCavity,
    MinkowskiVacuum,
    feynman,
    feynman_dtau,
    spectral_weight,
    wightman,
    wightman_dtau,
)
from .harvesting import (  # noqa: E402
    DetectorPair,
    HarvestResult,
    commutator_remnant,
    duality_residual_pair,
    harvest,
    lij,
    m_term,
    m_term_derivative,
    negativity,
    negativity_bruteforce,
    symmetric_pair,
)
from .switching import (  # noqa: E402
    DualSwitching,
    DualSwitchingTransformer,
    Kind,
    SwitchingSpec,
    dual_switching,
    eval_switching,
    l1_relative_distance,
    lower_incomplete_fourier,
    phase_linearity_residual,
    theorem1_residual,
)
