"""Certified lower bounds for sigmoid networks via tunable tangent-line relaxations."""
from .dual_verifier import (
    RelaxationState,
    VerifyConfig,
    VerifyResult,
    assemble_linear,
    backward_signs,
    dual_objective,
    relaxed_objective,
    run_alpha_sig,
    tau_compare,
)
from .interval_bounds import ActivationBoundSet, compute_activation_bounds, ibp_layer, input_box
from .model import (
    Layer,
    NeuralNet,
    VerificationProblem,
    forward,
    generate_random,
    load_model,
    objective_eval,
    save_model,
)
from .relaxation import (
    BoundRole,
    SlopeRange,
    anchored_tangent_slope,
    chord_slope,
    intercept_grad,
    intercept_of_slope,
    sigmoid,
    sigmoid_family,
    slope_limits,
)

__version__ = "0.1.0"


def verify(prob, config=None):
    """Interval bounds followed by slope optimization; returns a :class:`VerifyResult`."""
    return run_alpha_sig(prob, compute_activation_bounds(prob), config)
