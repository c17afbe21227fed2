"""Calibration session engine: sender state machine, cost functions, session loop.

One protocol iteration = the sender transmits one batch of N states drawn
i.i.d. uniformly from its calibration set, the receiver decodes and measures
them (random product-Pauli bases) and reports the records, the sender computes
one scalar cost and reports it back, and the receiver's optimizer consumes the
scalar.  The loop ends when the cost history converges (successive absolute
differences below ``epsilon_th`` for ``streak`` steps) or after ``i_max``
iterations.

Blindness boundary: everything the receiver learns passes through
``Receiver.process_state`` (quantum states) and ``Receiver.handle_cost``
(CostReport scalars).  The sender's calibration set, per-transmission state
indices, and cost definition stay on this side of the line.

Two execution modes:

* exact mode — the cost is computed from exact density-matrix evolution (no
  shot noise); no states are transmitted, so measurement reports are empty.
* sampled mode — each batch is simulated shot by shot.  For the common case
  (``NoiseParams`` channel, tomographic-infidelity cost) a vectorised sampler
  groups the batch by (state index, flip pattern, basis) and inverts one
  uniform variate per transmission through the group's Born CDF, which draws
  from exactly the same joint distribution as the literal per-shot path but
  runs hundreds of times faster.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .channels import NoiseParams, apply_channel_exact, apply_channel_sampled, rotation_unitaries
from .messages import (
    CostReport,
    MeasurementReport,
    ProtocolMessage,
    Terminate,
    TerminateReason,
    encode_message,
    iter_messages,
)
from .optimizer import OptimizerConfig
from .qcore import PAULI_BY_LETTER, DensityMatrix, born_probabilities, embed_unitary, infidelity
from .receiver import Receiver, apply_decoder, decoder_unitaries
from .tomography import CODE_TO_LETTER, RecordBatch, accumulate, reconstruct

__all__ = [
    "COST_KINDS",
    "CalibrationConfig",
    "cost_error_rate",
    "cost_infidelity",
    "check_convergence",
    "sender_next_batch",
    "Sender",
    "SessionTranscript",
    "SessionResult",
    "run_session",
]

COST_KINDS = ("infidelity_tomographic", "error_rate")

Channel = Union[NoiseParams, Callable, None]


@dataclass
class CalibrationConfig:
    """Parameter block for one calibration session."""

    calibration_set: tuple[DensityMatrix, ...]
    batch_size: int = 1000
    epsilon_th: float = 1e-7
    i_max: int = 250
    cost_kind: str = "infidelity_tomographic"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    exact_mode: bool = False
    streak: Optional[int] = None  # None -> 1 in exact mode, 5 in sampled mode

    def __post_init__(self):
        self.calibration_set = tuple(self.calibration_set)
        if not self.calibration_set:
            raise ValueError("calibration set must contain at least one state")
        n = self.calibration_set[0].n_qubits
        if any(s.n_qubits != n for s in self.calibration_set):
            raise ValueError("all calibration states must share one qubit count")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")
        if self.epsilon_th < 0.0:
            raise ValueError(f"epsilon_th must be >= 0, got {self.epsilon_th}")
        if self.cost_kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.cost_kind!r}; expected one of {COST_KINDS}")
        if self.streak is not None and self.streak < 1:
            raise ValueError(f"streak must be >= 1, got {self.streak}")

    @property
    def n_qubits(self) -> int:
        return self.calibration_set[0].n_qubits

    @property
    def effective_streak(self) -> int:
        if self.streak is not None:
            return self.streak
        return 1 if self.exact_mode else 5


def cost_error_rate(inputs: Sequence, outputs: Sequence) -> float:
    """Fraction of positions where the two classical symbol vectors disagree."""
    a = np.asarray(inputs)
    b = np.asarray(outputs)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"need equal-length vectors, got shapes {a.shape} and {b.shape}")
    if a.size == 0:
        raise ValueError("error rate of empty vectors is undefined")
    return float(np.mean(a != b))


def cost_infidelity(
    config: CalibrationConfig, records: RecordBatch, states_transmitted: np.ndarray
) -> float:
    """Mean reconstruction infidelity over the calibration set.

    The sender groups the receiver's records by which state it transmitted
    (``record.transmission_index`` indexes into ``states_transmitted``),
    reconstructs each group tomographically, and averages the infidelity to
    the intended state.
    """
    states_transmitted = np.asarray(states_transmitted, dtype=np.int64)
    n_states = len(config.calibration_set)
    if len(records) and records.transmission_indices.max() >= len(states_transmitted):
        raise ValueError("record transmission index out of range for this batch")
    group_of_record = states_transmitted[records.transmission_indices]
    total = 0.0
    for s, target in enumerate(config.calibration_set):
        group = records.select(group_of_record == s)
        if len(group) == 0:
            raise ValueError(
                f"calibration state {s} received zero records; "
                f"batch size {config.batch_size} is too small for {n_states} states"
            )
        estimate = reconstruct(accumulate(group), config.n_qubits)
        total += infidelity(estimate, target)
    return total / n_states


def check_convergence(cost_history: Sequence[float], epsilon_th: float, streak: int) -> bool:
    """True iff the last ``streak`` successive absolute differences are all < epsilon_th."""
    if streak < 1:
        raise ValueError(f"streak must be >= 1, got {streak}")
    if len(cost_history) < streak + 1:
        return False
    tail = np.asarray(cost_history[-(streak + 1):], dtype=float)
    return bool(np.all(np.abs(np.diff(tail)) < epsilon_th))


def sender_next_batch(
    config: CalibrationConfig, rng: np.random.Generator
) -> tuple[list[DensityMatrix], np.ndarray]:
    """Draw one batch: N i.i.d. uniform indices into the calibration set."""
    indices = rng.integers(0, len(config.calibration_set), size=config.batch_size)
    states = [config.calibration_set[int(i)] for i in indices]
    return states, indices


class Sender:
    """Sender state machine: draws batches, computes costs, decides termination."""

    def __init__(self, config: CalibrationConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.iteration = 0
        self.cost_history: list[float] = []
        self._pending_indices: Optional[np.ndarray] = None

    def next_batch(self) -> tuple[list[DensityMatrix], np.ndarray]:
        states, indices = sender_next_batch(self.config, self.rng)
        self._pending_indices = indices
        return states, indices

    def compute_cost(self, report: MeasurementReport) -> CostReport:
        if self.config.cost_kind != "infidelity_tomographic":
            raise ValueError(
                f"built-in cost computation only covers tomographic infidelity, "
                f"not {self.config.cost_kind!r}; supply cost_fn to run_session"
            )
        if self._pending_indices is None:
            raise RuntimeError("compute_cost called before next_batch")
        cost = cost_infidelity(self.config, report.records, self._pending_indices)
        return self.record_cost(cost)

    def record_cost(self, cost: float) -> CostReport:
        report = CostReport(self.iteration, cost)
        self.cost_history.append(cost)
        self.iteration += 1
        self._pending_indices = None
        return report

    def should_terminate(self) -> Optional[TerminateReason]:
        if check_convergence(
            self.cost_history, self.config.epsilon_th, self.config.effective_streak
        ):
            return TerminateReason.CONVERGED
        if self.iteration >= self.config.i_max:
            return TerminateReason.ITERATION_LIMIT
        return None


_DIRECTION_OF = {
    MeasurementReport: "receiver_to_sender",
    CostReport: "sender_to_receiver",
    Terminate: "sender_to_receiver",
}


@dataclass
class SessionTranscript:
    """Complete, replayable classical record of one session."""

    messages: list[tuple[str, ProtocolMessage]]
    cost_history: list[float]
    param_history_length: int

    def to_bytes(self) -> bytes:
        return b"".join(encode_message(m) for _, m in self.messages)

    @classmethod
    def from_messages(cls, messages: Sequence[ProtocolMessage]) -> "SessionTranscript":
        tagged = [(_DIRECTION_OF[type(m)], m) for m in messages]
        costs = [m.cost for _, m in tagged if isinstance(m, CostReport)]
        return cls(tagged, costs, len(costs) + 1)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SessionTranscript":
        return cls.from_messages(list(iter_messages(data)))

    def validate_shape(self):
        """Check the alternation invariant: (report, cost)* then one terminate."""
        msgs = [m for _, m in self.messages]
        if not msgs or not isinstance(msgs[-1], Terminate):
            raise ValueError("transcript must end with a Terminate message")
        body = msgs[:-1]
        if len(body) % 2 != 0:
            raise ValueError("unpaired measurement/cost messages in transcript")
        for i in range(0, len(body), 2):
            mr, cr = body[i], body[i + 1]
            if not isinstance(mr, MeasurementReport) or not isinstance(cr, CostReport):
                raise ValueError(f"iteration {i // 2}: expected report/cost pair")
            if mr.iteration != i // 2 or cr.iteration != i // 2:
                raise ValueError(f"iteration numbering broken at pair {i // 2}")


@dataclass
class SessionResult:
    transcript: SessionTranscript
    cost_history: list[float]
    final_params: np.ndarray
    best_params: np.ndarray
    best_cost: float
    iterations_used: int
    converged: bool
    terminate_reason: TerminateReason


def _channel_exact(channel: Channel, state: DensityMatrix) -> DensityMatrix:
    if channel is None:
        return state
    if isinstance(channel, NoiseParams):
        return apply_channel_exact(state, channel)
    return channel(state)


def _channel_sampled(
    channel: Channel, state: DensityMatrix, rng: np.random.Generator
) -> DensityMatrix:
    if channel is None:
        return state
    if isinstance(channel, NoiseParams):
        return apply_channel_sampled(state, channel, rng)
    return channel(state, rng)


def _exact_infidelity_cost(
    config: CalibrationConfig, channel: Channel, phi: np.ndarray
) -> float:
    total = 0.0
    for state in config.calibration_set:
        decoded = apply_decoder(_channel_exact(channel, state), phi)
        total += infidelity(decoded, state)
    return total / len(config.calibration_set)


class _FastBatchSampler:
    """Vectorised sampled-mode batch: NoiseParams channel + product decoder.

    Precomputes the rotated calibration states once (the rotation part of the
    channel is deterministic per session).  Each batch is grouped by
    (state index, bit-flip mask, phase-flip mask, basis row); each group's
    outcome distribution is one Born vector, and every transmission inverts
    its own uniform variate through its group's CDF.  The per-transmission
    joint law is identical to the literal per-shot path: flips and basis
    letters are sampled independently per transmission, and the unrecorded
    flip coins are marginalised exactly.
    """

    def __init__(self, config: CalibrationConfig, channel: Optional[NoiseParams]):
        self.config = config
        self.n = config.n_qubits
        states = config.calibration_set
        if isinstance(channel, NoiseParams):
            rots = rotation_unitaries(channel)
            full = np.eye(2**self.n, dtype=complex)
            for q, u in enumerate(rots):
                full = embed_unitary(u, [q], self.n) @ full
            self.rotated = [full @ s.data @ full.conj().T for s in states]
            self.p_bit = channel.p_bit
            self.p_phase = channel.p_phase
        else:  # channel is None
            self.rotated = [s.data.copy() for s in states]
            self.p_bit = 0.0
            self.p_phase = 0.0
        # Flip conjugations commute with each other up to global phase, so a
        # mask pair is realised by one Pauli product conjugation.
        self._flip_cache: dict[tuple[int, int, int], np.ndarray] = {}
        self._pauli_embed_cache: dict[tuple[str, int], np.ndarray] = {}

    def _flipped_state(self, state_idx: int, bit_mask: int, phase_mask: int) -> np.ndarray:
        key = (state_idx, bit_mask, phase_mask)
        cached = self._flip_cache.get(key)
        if cached is not None:
            return cached
        data = self.rotated[state_idx]
        if bit_mask or phase_mask:
            op = np.eye(2**self.n, dtype=complex)
            for q in range(self.n):
                if (bit_mask >> q) & 1:
                    op = self._embedded("X", q) @ op
                if (phase_mask >> q) & 1:
                    op = self._embedded("Z", q) @ op
            data = op @ data @ op.conj().T
        self._flip_cache[key] = data
        return data

    def _embedded(self, letter: str, q: int) -> np.ndarray:
        key = (letter, q)
        cached = self._pauli_embed_cache.get(key)
        if cached is None:
            cached = embed_unitary(PAULI_BY_LETTER[letter], [q], self.n)
            self._pauli_embed_cache[key] = cached
        return cached

    def run_batch(
        self,
        phi: np.ndarray,
        indices: np.ndarray,
        channel_rng: np.random.Generator,
        receiver_rng: np.random.Generator,
    ) -> RecordBatch:
        n, count = self.n, len(indices)
        # Channel coins: independent per transmission and per qubit.
        if self.p_bit > 0.0:
            bit_masks = _pack_bits(channel_rng.random((count, n)) < self.p_bit)
        else:
            bit_masks = np.zeros(count, dtype=np.int64)
        if self.p_phase > 0.0:
            phase_masks = _pack_bits(channel_rng.random((count, n)) < self.p_phase)
        else:
            phase_masks = np.zeros(count, dtype=np.int64)
        # Receiver randomness: basis letters and one outcome variate per shot.
        bases = receiver_rng.integers(1, 4, size=(count, n), dtype=np.uint8)
        u = receiver_rng.random(count)

        basis_keys = np.zeros(count, dtype=np.int64)
        for q in range(n):
            basis_keys = basis_keys * 3 + (bases[:, q].astype(np.int64) - 1)
        keys = np.stack([indices.astype(np.int64), bit_masks, phase_masks, basis_keys], axis=1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)

        decoders = decoder_unitaries(phi, n)
        full_dec = np.eye(2**n, dtype=complex)
        for q, d in enumerate(decoders):
            full_dec = embed_unitary(d, [q], n) @ full_dec

        cdfs = np.empty((len(uniq), 2**n))
        decoded_cache: dict[tuple[int, int, int], np.ndarray] = {}
        for g, (s_idx, b_mask, p_mask, b_key) in enumerate(uniq):
            state_key = (int(s_idx), int(b_mask), int(p_mask))
            decoded = decoded_cache.get(state_key)
            if decoded is None:
                raw = self._flipped_state(*state_key)
                decoded = full_dec @ raw @ full_dec.conj().T
                decoded_cache[state_key] = decoded
            letters = _basis_key_to_letters(int(b_key), n)
            cdfs[g] = np.cumsum(born_probabilities(decoded, letters))
        drawn = (cdfs[inverse] < u[:, None]).sum(axis=1)
        shifts = n - 1 - np.arange(n)
        bits = (drawn[:, None] >> shifts) & 1
        outcomes = (1 - 2 * bits).astype(np.int8)
        return RecordBatch(bases, outcomes, np.arange(count, dtype=np.int64))


def _pack_bits(flags: np.ndarray) -> np.ndarray:
    """Pack per-qubit boolean columns into one integer mask per row (bit q = qubit q)."""
    count, n = flags.shape
    masks = np.zeros(count, dtype=np.int64)
    for q in range(n):
        masks |= flags[:, q].astype(np.int64) << q
    return masks


def _basis_key_to_letters(key: int, n: int) -> str:
    digits = []
    for _ in range(n):
        digits.append(key % 3)
        key //= 3
    return "".join(CODE_TO_LETTER[d + 1] for d in reversed(digits))


def _child_rngs(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    seeds = rng.integers(0, 2**63, size=count)
    return [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]


def run_session(
    config: CalibrationConfig,
    channel: Channel,
    rng: np.random.Generator,
    *,
    cost_fn: Optional[Callable[[np.ndarray], float]] = None,
    initial_params: Optional[np.ndarray] = None,
) -> SessionResult:
    """Run one full calibration session and return its result bundle.

    ``channel`` may be a NoiseParams instance, ``None`` (noiseless), or a
    callable — ``channel(state)`` in exact mode (must be deterministic),
    ``channel(state, rng)`` in sampled mode.

    ``cost_fn(params) -> float`` overrides the built-in cost entirely (used by
    scenarios whose figure of merit is not state-reconstruction infidelity,
    e.g. symbol error rates).  With a cost_fn no states are transmitted and
    measurement reports are empty; the function owns all quantum simulation
    for its evaluation.

    ``final_params`` is the optimizer's unperturbed center after the last
    update — the right choice under noisy costs.  ``best_params`` is the
    queried point with the lowest observed cost — the right choice when the
    cost is exact.
    """
    if config.cost_kind == "error_rate" and cost_fn is None:
        raise ValueError("error_rate cost requires an explicit cost_fn")
    sender_rng, channel_rng, receiver_rng = _child_rngs(rng, 3)

    sender = Sender(config, sender_rng)
    receiver = Receiver(config.n_qubits, config.optimizer, receiver_rng, initial_params)

    use_builtin_exact = config.exact_mode and cost_fn is None
    use_fast_batch = (
        not config.exact_mode
        and cost_fn is None
        and (channel is None or isinstance(channel, NoiseParams))
    )
    fast = _FastBatchSampler(config, channel) if use_fast_batch else None

    messages: list[ProtocolMessage] = []
    reason = TerminateReason.ITERATION_LIMIT
    while True:
        phi = receiver.current_params
        iteration = sender.iteration
        if cost_fn is not None:
            records = RecordBatch.empty(config.n_qubits)
            cost_report = sender.record_cost(float(cost_fn(phi)))
        elif use_builtin_exact:
            records = RecordBatch.empty(config.n_qubits)
            cost_report = sender.record_cost(_exact_infidelity_cost(config, channel, phi))
        elif fast is not None:
            _, indices = sender.next_batch()
            records = fast.run_batch(phi, indices, channel_rng, receiver_rng)
            cost_report = sender.compute_cost(MeasurementReport(iteration, records))
        else:
            states, _ = sender.next_batch()
            noisy = (_channel_sampled(channel, s, channel_rng) for s in states)
            records = receiver.process_batch(noisy)
            cost_report = sender.compute_cost(MeasurementReport(iteration, records))

        messages.append(MeasurementReport(iteration, records))
        messages.append(cost_report)
        receiver.handle_cost(cost_report)

        stop = sender.should_terminate()
        if stop is not None:
            reason = stop
            break
    messages.append(Terminate(sender.iteration, reason))

    transcript = SessionTranscript.from_messages(messages)
    return SessionResult(
        transcript=transcript,
        cost_history=list(sender.cost_history),
        final_params=receiver.center,
        best_params=receiver.best_params,
        best_cost=receiver.best_cost,
        iterations_used=sender.iteration,
        converged=(reason == TerminateReason.CONVERGED),
        terminate_reason=reason,
    )
