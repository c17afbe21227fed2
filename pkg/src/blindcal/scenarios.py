"""Benchmark scenarios: each runs calibration sessions over a parameter sweep
and emits tabular rows for the CSV writer / plotter.

Common conventions:

* Every scenario takes a root ``seed``; per-(sweep point, trial) child seeds
  are derived with ``seeds.child_seed`` so runs are reproducible and trials
  are independent.  The child seed is recorded in each output row.
* The incoming ``CalibrationConfig`` acts as a settings template: scenarios
  own their calibration sets and replace ``calibration_set`` (the BB84 states,
  freshly drawn random states, the target GHZ/W state, ...).
* Reported metric values are exact figures of merit where the simulation can
  compute them (error probabilities, infidelities); QBER scenarios report
  empirical sifted-key error rates, since finite-key fluctuation is part of
  what they demonstrate.
* Calibrated parameters: sessions with exact costs use the best-seen query;
  sessions with sampled costs use the optimizer's final center (selecting the
  noisy arg-min would bias the metric optimistically).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .channels import NoiseParams, apply_channel_exact, rotation_unitaries
from .protocol import CalibrationConfig, SessionResult, cost_error_rate, run_session
from .qcore import (
    CNOT_MATRIX,
    HADAMARD,
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    bell_state,
    born_probabilities,
    computational_state,
    embed_unitary,
    ghz_state,
    infidelity,
    maximally_mixed,
    partial_trace,
    random_pure_state,
    trace_distance,
    w_state,
)
from .receiver import apply_decoder, decoder_unitaries
from .seeds import child_seed, make_rng
from .tomography import RecordBatch, accumulate, reconstruct, sample_records

__all__ = [
    "ResultRow",
    "ScenarioResult",
    "bb84_states",
    "evaluate_bb84_qber",
    "scenario_random_states",
    "scenario_bb84",
    "scenario_bb84_shots_sweep",
    "SwapEvaluator",
    "scenario_entswap",
    "scenario_multipartite",
    "antipodal_partner",
    "blinded_set",
    "theorem1_adversary_check",
    "scenario_theorem1",
]


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    length_km: float
    trial: int
    metric: str
    value_uncalibrated: float
    value_calibrated: float
    iterations_used: int
    shots: int
    seed: int

    def __post_init__(self):
        for name in ("value_uncalibrated", "value_calibrated"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 1.0 + 1e-9:
                raise ValueError(f"{name}={v} outside [0, 1] for metric {self.metric}")


@dataclass
class ScenarioResult:
    scenario: str
    rows: list[ResultRow]


def _calibrated_params(session: SessionResult, exact_mode: bool) -> np.ndarray:
    return session.best_params if exact_mode else session.final_params


# ---------------------------------------------------------------------------
# Random single-qubit states: infidelity trace over iterations
# ---------------------------------------------------------------------------


def scenario_random_states(
    lengths: Sequence[float],
    config: CalibrationConfig,
    seed: int,
    *,
    mu_rot: float = 0.05,
    mu_bit: float = 0.0,
    mu_phase: float = 0.0,
    n_states: int = 5,
    trials: int = 1,
) -> ScenarioResult:
    """Calibrate against a set of randomly drawn single-qubit states and
    record the cost trace, one row per protocol iteration."""
    rows = []
    for li, length in enumerate(lengths):
        for t in range(trials):
            child = child_seed(seed, li, t)
            rng = make_rng(child)
            states = tuple(random_pure_state(rng) for _ in range(n_states))
            noise = NoiseParams.draw(1, length, mu_rot, mu_bit, mu_phase, rng)
            cfg = replace(config, calibration_set=states)
            session = run_session(cfg, noise, rng)
            shots = 0 if cfg.exact_mode else cfg.batch_size
            initial = session.cost_history[0]
            for i, cost in enumerate(session.cost_history):
                rows.append(
                    ResultRow(
                        "random-states", float(length), t, "infidelity",
                        initial, cost, i, shots, child,
                    )
                )
    return ScenarioResult("random-states", rows)


# ---------------------------------------------------------------------------
# BB84: QBER before/after calibration
# ---------------------------------------------------------------------------


def bb84_states() -> tuple[DensityMatrix, ...]:
    """The four BB84 signal states, ordered (|0>, |1>, |+>, |->).

    Index layout: 2 * basis + bit, with basis 0 = Z and basis 1 = X.
    """
    plus = DensityMatrix(1, np.full((2, 2), 0.5, dtype=complex))
    minus = DensityMatrix(1, np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex))
    return (computational_state([0]), computational_state([1]), plus, minus)


def evaluate_bb84_qber(
    decoders: Sequence[np.ndarray],
    noise: NoiseParams,
    rounds: int,
    rng: np.random.Generator,
) -> tuple[float, ...]:
    """Sifted-key error rate for each decoder, on one shared set of rounds.

    All per-round randomness (sent bit/basis, channel flips, receiver basis,
    and the outcome variate) is drawn once and reused for every decoder, so
    decoder comparisons are paired.  Outcomes are drawn by inverting the
    shared uniform variate through each decoder's Born CDF, which has the
    exact marginal law per decoder.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if noise.n_qubits != 1:
        raise ValueError("BB84 evaluation runs on single-qubit channels")
    states = bb84_states()
    rot = rotation_unitaries(noise)[0]

    sent_bits = rng.integers(0, 2, size=rounds)
    sent_bases = rng.integers(0, 2, size=rounds)
    bit_flips = (rng.random(rounds) < noise.p_bit).astype(np.int64)
    phase_flips = (rng.random(rounds) < noise.p_phase).astype(np.int64)
    recv_bases = rng.integers(0, 2, size=rounds)
    u = rng.random(rounds)

    sifted = sent_bases == recv_bases
    if not np.any(sifted):
        raise ValueError("no rounds survived sifting; increase the round count")

    noisy = {}
    for s in range(4):
        base = rot @ states[s].data @ rot.conj().T
        for bf in (0, 1):
            for pf in (0, 1):
                m = base
                if bf:
                    m = PAULI_X @ m @ PAULI_X
                if pf:
                    m = PAULI_Z @ m @ PAULI_Z
                noisy[(s, bf, pf)] = m

    s_idx = 2 * sent_bases + sent_bits
    combo = ((s_idx * 2 + bit_flips) * 2 + phase_flips) * 2 + recv_bases
    letters = ("Z", "X")

    qbers = []
    for phi in decoders:
        d = decoder_unitaries(phi, 1)[0]
        p_zero = np.empty(32)
        for s in range(4):
            for bf in (0, 1):
                for pf in (0, 1):
                    dec = d @ noisy[(s, bf, pf)] @ d.conj().T
                    for rb in (0, 1):
                        p_zero[((s * 2 + bf) * 2 + pf) * 2 + rb] = born_probabilities(
                            dec, letters[rb]
                        )[0]
        measured_bits = (u >= p_zero[combo]).astype(np.int64)
        errors = measured_bits != sent_bits
        qbers.append(float(np.mean(errors[sifted])))
    return tuple(qbers)


def scenario_bb84(
    lengths: Sequence[float],
    config: CalibrationConfig,
    seed: int,
    *,
    mu_rot: float = 0.05,
    mu_bit: float = 0.0,
    mu_phase: float = 0.0,
    trials: int = 50,
    eval_qubits: int = 1000,
) -> ScenarioResult:
    """Per (length, trial): draw a fresh channel, calibrate blind against the
    four BB84 states, then measure sifted QBER with and without the decoder."""
    base_set = bb84_states()
    rows = []
    for li, length in enumerate(lengths):
        for t in range(trials):
            child = child_seed(seed, li, t)
            rng = make_rng(child)
            noise = NoiseParams.draw(1, length, mu_rot, mu_bit, mu_phase, rng)
            cfg = replace(config, calibration_set=base_set)
            session = run_session(cfg, noise, rng)
            phi_cal = _calibrated_params(session, cfg.exact_mode)
            phi_unc = np.zeros(3)
            q_unc, q_cal = evaluate_bb84_qber([phi_unc, phi_cal], noise, eval_qubits, rng)
            rows.append(
                ResultRow(
                    "bb84", float(length), t, "qber",
                    q_unc, q_cal, session.iterations_used, cfg.batch_size, child,
                )
            )
    return ScenarioResult("bb84", rows)


def scenario_bb84_shots_sweep(
    shot_counts: Sequence[int],
    fixed_length: float,
    config: CalibrationConfig,
    seed: int,
    *,
    mu_rot: float = 0.05,
    mu_bit: float = 0.0,
    mu_phase: float = 0.0,
    trials: int = 10,
    eval_qubits: int = 1000,
) -> ScenarioResult:
    """Final QBER as a function of the per-iteration transmission budget.

    Trials are paired across budgets: trial t uses one channel draw and one
    evaluation round set for every shot count, so budget comparisons (e.g.
    medians across trials) isolate the transmission budget itself.
    """
    base_set = bb84_states()
    rows = []
    for t in range(trials):
        trial_root = child_seed(seed, t)
        noise = NoiseParams.draw(
            1, fixed_length, mu_rot, mu_bit, mu_phase, make_rng(trial_root)
        )
        for ni, shots in enumerate(shot_counts):
            child = child_seed(trial_root, ni)
            cfg = replace(config, calibration_set=base_set, batch_size=int(shots))
            session = run_session(cfg, noise, make_rng(child))
            phi_cal = _calibrated_params(session, cfg.exact_mode)
            q_unc, q_cal = evaluate_bb84_qber(
                [np.zeros(3), phi_cal], noise, eval_qubits,
                make_rng(child_seed(trial_root, len(shot_counts))),
            )
            rows.append(
                ResultRow(
                    "bb84-shots", float(fixed_length), t, "qber_final",
                    q_unc, q_cal, session.iterations_used, int(shots), child,
                )
            )
    return ScenarioResult("bb84-shots", rows)


# ---------------------------------------------------------------------------
# Entanglement swap: midpoint decoder calibration
# ---------------------------------------------------------------------------


class SwapEvaluator:
    """Exact and sampled Bell-index error rates for the 4-qubit swap circuit.

    Register layout: (q0, q1) sender pair, (q2, q3) receiver pair.  q1 and q2
    traverse independent noisy links into the midpoint, which applies the
    trainable per-qubit rotations, Bell-measures (q1, q2), and broadcasts the
    two result bits; the correction X^b2 Z^b1 lands on q3.  The endpoints then
    read out the Bell index of (q0, q3) with the inverse preparation circuit.
    """

    def __init__(self, noise_a: NoiseParams, noise_b: NoiseParams):
        if noise_a.n_qubits != 1 or noise_b.n_qubits != 1:
            raise ValueError("each link carries one qubit")
        self.noise_a = noise_a
        self.noise_b = noise_b
        self._receiver_pair = bell_state((0, 0))
        # Noisy pre-decoder 4-qubit states per sent index and flip pattern.
        rot_a = rotation_unitaries(noise_a)[0]
        rot_b = rotation_unitaries(noise_b)[0]
        self._noisy: dict[tuple[int, int], np.ndarray] = {}
        for s in range(4):
            sent = bell_state((s >> 1, s & 1))
            base = np.kron(sent.data, self._receiver_pair.data)
            rot = embed_unitary(rot_a, [1], 4) @ embed_unitary(rot_b, [2], 4)
            base = rot @ base @ rot.conj().T
            for mask in range(16):
                m = base
                # mask bits: (bit_a, phase_a, bit_b, phase_b); bit flip first.
                if mask & 1:
                    x1 = embed_unitary(PAULI_X, [1], 4)
                    m = x1 @ m @ x1
                if mask & 2:
                    z1 = embed_unitary(PAULI_Z, [1], 4)
                    m = z1 @ m @ z1
                if mask & 4:
                    x2 = embed_unitary(PAULI_X, [2], 4)
                    m = x2 @ m @ x2
                if mask & 8:
                    z2 = embed_unitary(PAULI_Z, [2], 4)
                    m = z2 @ m @ z2
                self._noisy[(s, mask)] = m
        self._bsm_circuit = embed_unitary(HADAMARD, [1], 4) @ embed_unitary(
            CNOT_MATRIX, [1, 2], 4
        )
        self._end_circuit = embed_unitary(HADAMARD, [0], 2) @ embed_unitary(
            CNOT_MATRIX, [0, 1], 2
        )
        idx4 = np.arange(16)
        self._b1_bits = (idx4 >> 2) & 1  # qubit 1 of 4
        self._b2_bits = (idx4 >> 1) & 1  # qubit 2 of 4
        self._corrections = {}
        for b1 in (0, 1):
            for b2 in (0, 1):
                op = np.eye(2, dtype=complex)
                if b1:
                    op = PAULI_Z @ op
                if b2:
                    op = PAULI_X @ op
                self._corrections[(b1, b2)] = embed_unitary(op, [1], 2)

    def _mask_probs(self) -> np.ndarray:
        pa_b, pa_p = self.noise_a.p_bit, self.noise_a.p_phase
        pb_b, pb_p = self.noise_b.p_bit, self.noise_b.p_phase
        probs = np.empty(16)
        for mask in range(16):
            p = 1.0
            p *= pa_b if mask & 1 else 1.0 - pa_b
            p *= pa_p if mask & 2 else 1.0 - pa_p
            p *= pb_b if mask & 4 else 1.0 - pb_b
            p *= pb_p if mask & 8 else 1.0 - pb_p
            probs[mask] = p
        return probs

    def _measured_index_distribution(self, pre_bsm: np.ndarray) -> np.ndarray:
        """P(measured Bell index) for one noisy decoded 4-qubit state."""
        rotated = self._bsm_circuit @ pre_bsm @ self._bsm_circuit.conj().T
        out = np.zeros(4)
        for b1 in (0, 1):
            for b2 in (0, 1):
                sel = (self._b1_bits == b1) & (self._b2_bits == b2)
                branch_p = float(np.real(np.trace(rotated[np.ix_(sel, sel)])))
                if branch_p <= 1e-15:
                    continue
                projected = np.where(np.outer(sel, sel), rotated, 0.0)
                reduced = partial_trace(projected, 4, [0, 3]) / branch_p
                corr = self._corrections[(b1, b2)]
                corrected = corr @ reduced @ corr.conj().T
                final = self._end_circuit @ corrected @ self._end_circuit.conj().T
                out += branch_p * np.clip(np.real(np.diag(final)), 0.0, None)
        return out / out.sum()

    def index_distributions(self, phi: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
        """Measured-index distribution per (sent index, flip mask)."""
        d1, d2 = decoder_unitaries(phi, 2)
        dec = embed_unitary(d1, [1], 4) @ embed_unitary(d2, [2], 4)
        out = {}
        for key, state in self._noisy.items():
            decoded = dec @ state @ dec.conj().T
            out[key] = self._measured_index_distribution(decoded)
        return out

    def exact_error(self, phi: np.ndarray) -> float:
        """Exact probability that the measured Bell index differs from the sent one."""
        mask_probs = self._mask_probs()
        dists = self.index_distributions(phi)
        err = 0.0
        for s in range(4):
            p_correct = 0.0
            for mask in range(16):
                if mask_probs[mask] == 0.0:
                    continue
                p_correct += mask_probs[mask] * dists[(s, mask)][s]
            err += 1.0 - p_correct
        return float(np.clip(err / 4.0, 0.0, 1.0))

    def sampled_error(self, phi: np.ndarray, count: int, rng: np.random.Generator) -> float:
        """Empirical error rate over ``count`` independent transmissions."""
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        sent = rng.integers(0, 4, size=count)
        coins = np.empty((count, 4))
        coins[:, 0] = rng.random(count) < self.noise_a.p_bit
        coins[:, 1] = rng.random(count) < self.noise_a.p_phase
        coins[:, 2] = rng.random(count) < self.noise_b.p_bit
        coins[:, 3] = rng.random(count) < self.noise_b.p_phase
        masks = (coins * (1 << np.arange(4))).sum(axis=1).astype(np.int64)
        u = rng.random(count)
        dists = self.index_distributions(phi)
        keys = sent * 16 + masks
        uniq, inverse = np.unique(keys, return_inverse=True)
        cdfs = np.stack([np.cumsum(dists[(k // 16, k % 16)]) for k in uniq])
        measured = (cdfs[inverse] < u[:, None]).sum(axis=1)
        return cost_error_rate(sent, measured)


def scenario_entswap(
    lengths: Sequence[float],
    config: CalibrationConfig,
    seed: int,
    *,
    mu_rot: float = 0.05,
    mu_bit: float = 0.0,
    mu_phase: float = 0.0,
    trials: int = 10,
) -> ScenarioResult:
    """Calibrate the midpoint decoder of an entanglement swap, per link length."""
    bell_set = tuple(bell_state((b >> 1, b & 1)) for b in range(4))
    rows = []
    for li, length in enumerate(lengths):
        for t in range(trials):
            child = child_seed(seed, li, t)
            rng = make_rng(child)
            noise_a = NoiseParams.draw(1, length, mu_rot, mu_bit, mu_phase, rng)
            noise_b = NoiseParams.draw(1, length, mu_rot, mu_bit, mu_phase, rng)
            evaluator = SwapEvaluator(noise_a, noise_b)
            cfg = replace(config, calibration_set=bell_set, cost_kind="error_rate")
            if cfg.exact_mode:
                cost_fn = evaluator.exact_error
            else:
                cost_rng = make_rng(child_seed(child, 1))
                cost_fn = lambda phi: evaluator.sampled_error(  # noqa: E731
                    phi, cfg.batch_size, cost_rng
                )
            session = run_session(cfg, None, rng, cost_fn=cost_fn)
            phi_cal = _calibrated_params(session, cfg.exact_mode)
            err_unc = evaluator.exact_error(np.zeros(6))
            err_cal = evaluator.exact_error(phi_cal)
            rows.append(
                ResultRow(
                    "entswap", float(length), t, "bell_error_rate",
                    err_unc, err_cal, session.iterations_used,
                    0 if cfg.exact_mode else cfg.batch_size, child,
                )
            )
    return ScenarioResult("entswap", rows)


# ---------------------------------------------------------------------------
# Multipartite GHZ / W distribution
# ---------------------------------------------------------------------------


def scenario_multipartite(
    kind: str,
    n_range: Iterable[int],
    lengths: Sequence[float],
    config: CalibrationConfig,
    seed: int,
    *,
    mu_rot: float = 0.05,
    trials: int = 10,
) -> ScenarioResult:
    """Distribute one n-qubit GHZ or W state through per-qubit rotation noise
    and calibrate the per-qubit decoder; rows carry exact infidelities."""
    if kind not in ("ghz", "w"):
        raise ValueError(f"kind must be 'ghz' or 'w', got {kind!r}")
    n_range = list(n_range)
    if any(n < 2 or n > 5 for n in n_range):
        raise ValueError(f"qubit counts must lie in 2..5, got {n_range}")
    make_state = ghz_state if kind == "ghz" else w_state
    name = f"multipartite-{kind}"
    rows = []
    for n in n_range:
        target = make_state(n)
        for li, length in enumerate(lengths):
            for t in range(trials):
                child = child_seed(seed, n, li, t)
                rng = make_rng(child)
                noise = NoiseParams.draw(n, length, mu_rot, 0.0, 0.0, rng)
                cfg = replace(config, calibration_set=(target,))
                session = run_session(cfg, noise, rng)
                phi_cal = _calibrated_params(session, cfg.exact_mode)
                noisy = apply_channel_exact(target, noise)
                inf_unc = infidelity(noisy, target)
                inf_cal = infidelity(apply_decoder(noisy, phi_cal), target)
                rows.append(
                    ResultRow(
                        name, float(length), t, f"infidelity_n{n}",
                        inf_unc, inf_cal, session.iterations_used,
                        0 if cfg.exact_mode else cfg.batch_size, child,
                    )
                )
    return ScenarioResult(name, rows)


# ---------------------------------------------------------------------------
# Blinded-set tomography limit
# ---------------------------------------------------------------------------


def antipodal_partner(rho: DensityMatrix) -> DensityMatrix:
    """The pure single-qubit state with the opposite Bloch vector."""
    if rho.n_qubits != 1:
        raise ValueError("antipodal partners are defined for single qubits")
    purity = float(np.real(np.trace(rho.data @ rho.data)))
    if purity < 1.0 - 1e-9:
        raise ValueError(f"antipodal partner needs a pure state, purity={purity}")
    return DensityMatrix(1, np.eye(2, dtype=complex) - rho.data)


def blinded_set(base_states: Sequence[DensityMatrix]) -> tuple[DensityMatrix, ...]:
    """Augment a private state set with every antipodal partner."""
    partners = [antipodal_partner(s) for s in base_states]
    return tuple(base_states) + tuple(partners)


def theorem1_adversary_check(
    base_states: Sequence[DensityMatrix],
    shot_counts: Sequence[int],
    rng: np.random.Generator,
) -> list[tuple[int, float]]:
    """Simulate a pooling receiver against the blinded set.

    The receiver ignores transmission order, lumps every record into one
    tomographic estimate, and we report that estimate's trace distance to the
    maximally mixed state for each transmission budget.
    """
    full_set = blinded_set(base_states)
    mixed = maximally_mixed(1)
    out = []
    for count in shot_counts:
        count = int(count)
        if count < 1:
            raise ValueError(f"shot counts must be >= 1, got {count}")
        indices = rng.integers(0, len(full_set), size=count)
        batches = []
        for s, state in enumerate(full_set):
            n_s = int(np.sum(indices == s))
            if n_s:
                batches.append(sample_records(state, n_s, rng))
        pooled = RecordBatch(
            np.concatenate([b.bases for b in batches]),
            np.concatenate([b.outcomes for b in batches]),
            np.arange(count, dtype=np.int64),
        )
        estimate = reconstruct(accumulate(pooled), 1)
        out.append((count, trace_distance(estimate, mixed)))
    return out


def scenario_theorem1(
    shot_counts: Sequence[int],
    seed: int,
    *,
    trials: int = 100,
    base_states: Optional[Sequence[DensityMatrix]] = None,
) -> ScenarioResult:
    """Pooled-tomography distance to the maximally mixed state, per budget and trial."""
    if base_states is None:
        plus = DensityMatrix(1, np.full((2, 2), 0.5, dtype=complex))
        base_states = (computational_state([0]), plus)
    rows = []
    for t in range(trials):
        child = child_seed(seed, t)
        rng = make_rng(child)
        for count, dist in theorem1_adversary_check(base_states, shot_counts, rng):
            rows.append(
                ResultRow(
                    "theorem1", 0.0, t, "trace_distance_to_mixed",
                    dist, dist, 0, count, child,
                )
            )
    return ScenarioResult("theorem1", rows)
