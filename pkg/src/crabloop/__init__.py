"""Closed-loop optimization of optical-lattice loading ramps.

Control fields (exponential ramps with trigonometric corrections) are
tuned by a derivative-free simplex loop against a figure of merit measured
on a simulated Bose-Hubbard plant, with a bimodal time-of-flight analysis
pipeline for thermal-fraction figures of merit.
"""

__version__ = "0.1.0"

from .errors import ConfigError, CrabloopError, EvaluationFailedError
from .waveform import (
    ControlField,
    CrabCorrection,
    ExponentialRamp,
    Waveform,
    eval_crab,
    eval_exponential,
    eval_field,
    harmonic_frequencies,
    sample_waveform,
    validate,
)
from .simplex import (
    Bounds,
    OptimizerOptions,
    OptimumReport,
    Termination,
    init_simplex,
    minimize,
    penalty_wrap,
    step,
)
from .plant import (
    Boundary,
    FomSample,
    HubbardConfig,
    PlantProtocol,
    build_hamiltonian,
    depth_to_hubbard,
    evaluate,
    evolve,
    ground_state,
    reference_protocols,
)
