"""Mixture-of-experts gating as a finite-rate channel.

Exact information measures, Blahut-Arimoto design of rate-limited gates,
and two Monte Carlo studies of information-theoretic generalization bounds.
"""
from .info import (
    LN2,
    binary_entropy,
    channel_mutual_information,
    dpi_gap,
    entropy,
    inv_binary_entropy,
    mutual_information,
)
from .moe import (
    ExpertBank,
    GateParams,
    LabeledDataset,
    MoEModel,
    empirical_risk,
    gate_probs,
    gating_rate_plugin,
    generate_dataset,
    population_risk_estimate,
    sample_model_from_prior,
    sample_route,
)
from .rd import (
    BlahutArimotoGate,
    RDCurve,
    RDInstance,
    RDPoint,
    ba_lagrangian_solve,
    binary_hamming_instance,
    bsc_distortion_rate,
    capacity_check,
    distortion_matrix_from_experts,
    geometric_lambda_grid,
    randomized_response_channel,
    thm2_bound,
    trace_rd_curve,
)
from .thm1 import AlphaMixtureLearner, Thm1Config, run_thm1
from .thm2 import BscConfig, TemperedPosteriorLearner, run_thm2

__version__ = "0.1.0"
