"""Blind calibration of quantum channel decoders over classical feedback.

A sender transmits batches of quantum states through a noisy channel; the
receiver applies a parameterized per-qubit decoder, measures in random Pauli
bases, and reports raw measurement records.  The sender scores each batch
with a single scalar cost, and the receiver updates its decoder parameters
from that scalar alone — it never learns which states were sent.
"""

from .channels import (
    NoiseParams,
    apply_channel_exact,
    apply_channel_sampled,
    bifurcation_length,
    length_to_prob,
)
from .messages import (
    MAGIC,
    BadMagicError,
    CostReport,
    MalformedPayloadError,
    MeasurementReport,
    Terminate,
    TerminateReason,
    TruncatedFrameError,
    UnknownTagError,
    WireFormatError,
    decode_message,
    encode_message,
    iter_messages,
)
from .optimizer import OPTIMIZER_KINDS, AskTellOptimizer, OptimizerConfig, spsa_gains
from .protocol import (
    COST_KINDS,
    CalibrationConfig,
    SessionResult,
    SessionTranscript,
    check_convergence,
    cost_error_rate,
    cost_infidelity,
    run_session,
    sender_next_batch,
)
from .qcore import (
    MAX_QUBITS,
    BellIndex,
    DensityMatrix,
    Unitary,
    bell_measurement,
    bell_state,
    born_probabilities,
    computational_state,
    embed_unitary,
    fidelity,
    ghz_state,
    infidelity,
    maximally_mixed,
    measure_pauli,
    partial_trace,
    random_pure_state,
    rot_unitary,
    trace_distance,
    w_state,
)
from .receiver import Receiver, apply_decoder, decoder_unitaries
from .scenarios import (
    ResultRow,
    ScenarioResult,
    antipodal_partner,
    bb84_states,
    blinded_set,
    scenario_bb84,
    scenario_bb84_shots_sweep,
    scenario_entswap,
    scenario_multipartite,
    scenario_random_states,
    scenario_theorem1,
)
from .seeds import child_seed, make_rng
from .tomography import (
    MeasurementRecord,
    RecordBatch,
    accumulate,
    reconstruct,
    sample_basis,
    sample_records,
)

__version__ = "0.1.0"

__all__ = [
    "MAGIC",
    "MAX_QUBITS",
    "OPTIMIZER_KINDS",
    "COST_KINDS",
    "AskTellOptimizer",
    "BadMagicError",
    "BellIndex",
    "CalibrationConfig",
    "CostReport",
    "DensityMatrix",
    "MalformedPayloadError",
    "MeasurementRecord",
    "MeasurementReport",
    "NoiseParams",
    "OptimizerConfig",
    "Receiver",
    "RecordBatch",
    "ResultRow",
    "ScenarioResult",
    "SessionResult",
    "SessionTranscript",
    "Terminate",
    "TerminateReason",
    "TruncatedFrameError",
    "Unitary",
    "UnknownTagError",
    "WireFormatError",
    "accumulate",
    "antipodal_partner",
    "apply_channel_exact",
    "apply_channel_sampled",
    "apply_decoder",
    "bb84_states",
    "bell_measurement",
    "bell_state",
    "bifurcation_length",
    "blinded_set",
    "born_probabilities",
    "check_convergence",
    "child_seed",
    "computational_state",
    "cost_error_rate",
    "cost_infidelity",
    "decode_message",
    "decoder_unitaries",
    "embed_unitary",
    "encode_message",
    "fidelity",
    "ghz_state",
    "infidelity",
    "iter_messages",
    "length_to_prob",
    "make_rng",
    "maximally_mixed",
    "measure_pauli",
    "partial_trace",
    "random_pure_state",
    "reconstruct",
    "rot_unitary",
    "run_session",
    "sample_basis",
    "sample_records",
    "scenario_bb84",
    "scenario_bb84_shots_sweep",
    "scenario_entswap",
    "scenario_multipartite",
    "scenario_random_states",
    "scenario_theorem1",
    "sender_next_batch",
    "spsa_gains",
    "trace_distance",
    "w_state",
    "__version__",
]
