"""Distributed mean estimation with decoder side information.

Modulo / rotated / Wyner-Ziv quantizers, chained decoding across clients,
chain selection heuristics, analytic MSE bounds and a Monte Carlo harness.
"""

from dmesi.bounds import (
    BoundReport,
    baseline_bound,
    corollary_alpha_beta,
    proposed_bound,
    remark1_ratio,
)
from dmesi.chains import (
    Chain,
    DeltaTable,
    algorithm1,
    algorithm2,
    c_t,
    d_value,
    delta_prime,
    region2_check,
    validate_chains,
)
from dmesi.codec import (
    ChainWeights,
    CodecParams,
    Message,
    decode_client,
    derive_codec_params,
    encode_client,
    select_coords,
)
from dmesi.errors import (
    BudgetTooSmall,
    ConditionViolated,
    ConstraintViolation,
    DegenerateLattice,
    DimensionError,
    OrderViolation,
)
from dmesi.protocol import (
    Instance,
    MseReport,
    TrialResult,
    generate_instance,
    monte_carlo,
    run_trial,
)
from dmesi.quantizer import MqParams, mq_decode, mq_encode, mq_oracle
from dmesi.rotation import Rotation, apply_inverse, apply_rotation, fwht, sample_rotation

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "baseline_bound", "corollary_alpha_beta", "proposed_bound", "remark1_ratio",
    "Chain", "DeltaTable", "algorithm1", "algorithm2", "c_t", "d_value", "delta_prime",
    "region2_check", "validate_chains",
    "ChainWeights", "CodecParams", "Message", "decode_client", "derive_codec_params",
    "encode_client", "select_coords",
    "BudgetTooSmall", "ConditionViolated", "ConstraintViolation", "DegenerateLattice",
    "DimensionError", "OrderViolation",
    "Instance", "MseReport", "TrialResult", "generate_instance", "monte_carlo", "run_trial",
    "MqParams", "mq_decode", "mq_encode", "mq_oracle",
    "Rotation", "apply_inverse", "apply_rotation", "fwht", "sample_rotation",
]
