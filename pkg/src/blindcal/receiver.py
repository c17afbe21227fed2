"""The receiver's side of a calibration session.

The receiver owns the trainable decoder parameters and the optimizer that
updates them.  Its entire classical input is the stream of cost scalars it is
told; its quantum input is the stream of states arriving from the channel.
Nothing in this module may know what states the sender chose, how the cost is
computed, or anything else about the sender's internals — this file imports
only state/measurement machinery on purpose, and the test suite audits that.

Decoder ansatz: one ``rot_unitary(alpha, beta, gamma)`` per qubit, so a
parameter vector of length ``3 * n_qubits`` laid out qubit-major:
``(a0, b0, g0, a1, b1, g1, ...)``.  All-zero parameters give the identity.
"""

from __future__ import annotations

import numpy as np

from .messages import CostReport
from .optimizer import AskTellOptimizer, OptimizerConfig
from .qcore import DensityMatrix, apply_unitary, measure_pauli, rot_unitary
from .tomography import MeasurementRecord, RecordBatch, sample_basis

__all__ = [
    "decoder_unitaries",
    "apply_decoder",
    "decode_and_measure",
    "Receiver",
]


def _check_params(phi: np.ndarray, n_qubits: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (3 * n_qubits,):
        raise ValueError(
            f"decoder for {n_qubits} qubit(s) needs {3 * n_qubits} parameters, "
            f"got shape {phi.shape}"
        )
    return phi


def decoder_unitaries(phi: np.ndarray, n_qubits: int) -> list[np.ndarray]:
    """Per-qubit 2x2 decoder matrices for a qubit-major parameter vector."""
    phi = _check_params(phi, n_qubits)
    return [
        rot_unitary(phi[3 * q], phi[3 * q + 1], phi[3 * q + 2]).data
        for q in range(n_qubits)
    ]


def apply_decoder(rho: DensityMatrix, phi: np.ndarray) -> DensityMatrix:
    """Apply the per-qubit decoder rotations to a state."""
    n = rho.n_qubits
    phi = _check_params(phi, n)
    out = rho
    for q in range(n):
        out = apply_unitary(out, rot_unitary(phi[3 * q], phi[3 * q + 1], phi[3 * q + 2]), [q])
    return out


def decode_and_measure(
    state: DensityMatrix,
    phi: np.ndarray,
    rng: np.random.Generator,
    transmission_index: int = 0,
) -> MeasurementRecord:
    """Decode one incoming state and measure it in a random product-Pauli basis."""
    decoded = apply_decoder(state, phi)
    basis = sample_basis(state.n_qubits, rng)
    outcomes = measure_pauli(decoded, basis, rng)
    return MeasurementRecord(transmission_index, basis, tuple(int(o) for o in outcomes))


class Receiver:
    """Stateful receiver: decode+measure incoming states, learn from cost scalars.

    The decoder parameters in use at any moment are the optimizer's pending
    query; every cost report advances the optimizer by one ask/tell cycle.
    """

    def __init__(
        self,
        n_qubits: int,
        optimizer_config: OptimizerConfig,
        rng: np.random.Generator,
        initial_params: np.ndarray | None = None,
    ):
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
        self.n_qubits = n_qubits
        self.rng = rng
        if initial_params is None:
            initial_params = np.zeros(3 * n_qubits)
        initial_params = _check_params(np.asarray(initial_params, dtype=float), n_qubits)
        self._optimizer = AskTellOptimizer(optimizer_config, initial_params, rng)
        self._params = self._optimizer.ask()
        self.cost_reports_seen = 0

    @property
    def current_params(self) -> np.ndarray:
        """Parameters the decoder is currently using (the pending query)."""
        return self._params.copy()

    @property
    def center(self) -> np.ndarray:
        """The optimizer's unperturbed iterate."""
        return self._optimizer.center

    @property
    def best_params(self) -> np.ndarray:
        return self._optimizer.best_params.copy()

    @property
    def best_cost(self) -> float:
        return self._optimizer.best_cost

    def process_state(self, state: DensityMatrix, transmission_index: int) -> MeasurementRecord:
        if state.n_qubits != self.n_qubits:
            raise ValueError(
                f"receiver configured for {self.n_qubits} qubit(s), got {state.n_qubits}"
            )
        return decode_and_measure(state, self._params, self.rng, transmission_index)

    def process_batch(self, states, first_index: int = 0) -> RecordBatch:
        records = [
            self.process_state(state, first_index + k) for k, state in enumerate(states)
        ]
        if not records:
            return RecordBatch.empty(self.n_qubits)
        return RecordBatch.from_records(records)

    def handle_cost(self, report: CostReport):
        """Consume one cost scalar and move to the next decoder setting."""
        self._optimizer.tell(report.cost)
        self._params = self._optimizer.ask()
        self.cost_reports_seen += 1
