"""Simulation of pre- and post-selected quantum systems in finite dimension."""

from .errors import (
    DimensionError,
    EmptyEnsembleError,
    GridError,
    ImpossibleHistoryError,
    LowStatisticsWarning,
    NumericalError,
    OrthogonalSelectionError,
    ParseError,
    SpectrumError,
    TimeRangeError,
    TwoTimeError,
    ValidationError,
)
from .qcore import (
    HermitianOperator,
    apply,
    as_state,
    inner_product,
    make_projector,
    matexp_hermitian,
    validate,
)
from .scenario import (
    HamiltonianSegment,
    Scenario,
    UnitaryEvent,
    extended_preset,
    pauli_embed,
    propagator,
    solenoid_event,
    solenoid_flip,
    three_boxes_preset,
)
from .twostate import (
    ProjectiveDecomposition,
    TwoTimeState,
    abl_probabilities,
    backward_state,
    deterministic_set,
    forward_state,
    overlap,
    reductio_check,
    theorem_crosscheck,
    weak_value,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "EmptyEnsembleError",
    "GridError",
    "ImpossibleHistoryError",
    "LowStatisticsWarning",
    "NumericalError",
    "OrthogonalSelectionError",
    "ParseError",
    "SpectrumError",
    "TimeRangeError",
    "TwoTimeError",
    "ValidationError",
    "HermitianOperator",
    "apply",
    "as_state",
    "inner_product",
    "make_projector",
    "matexp_hermitian",
    "validate",
    "HamiltonianSegment",
    "Scenario",
    "UnitaryEvent",
    "extended_preset",
    "pauli_embed",
    "propagator",
    "solenoid_event",
    "solenoid_flip",
    "three_boxes_preset",
    "ProjectiveDecomposition",
    "TwoTimeState",
    "abl_probabilities",
    "backward_state",
    "deterministic_set",
    "forward_state",
    "overlap",
    "reductio_check",
    "theorem_crosscheck",
    "weak_value",
]
