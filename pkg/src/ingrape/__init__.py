"""Gradient-based optimization of open quantum systems with coherent and incoherent controls."""

from .linalg import (
    bloch_from_density,
    cardano_roots,
    density_from_bloch,
    devectorize,
    expm,
    expm_frechet,
    hs_distance_sq,
    vectorize,
)
from .models import (
    ControlledSystem,
    ControlSample,
    IncoherentChannel,
    dissipator_superop,
    liouvillian,
    preset_qubit,
    preset_qutrit_forbidden,
    preset_two_qubit,
)
from .propagator import (
    PWCControls,
    TimeGrid,
    bloch_affine_generator,
    bloch_step_cardano,
    propagate,
    propagate_channel,
    step_propagator,
)
from .objectives import (
    GateOnChannel,
    GateOnStates,
    ObservableMean,
    StateTransfer,
    default_gate_basis,
    evaluate,
    gate_targets,
    gradient,
)
from .optimizer import InitSpec, OptimizerConfig, init_random_controls, optimize
from .landscape import LandscapeConfig, detect_peaks, robustness_scan, run_landscape
from .config import load_model, parse_config

__version__ = "0.1.0"
