"""Dense density-matrix simulation for registers of up to five qubits.

Conventions used throughout the package:

* Qubit 0 is the leftmost tensor factor; bit strings read left to right,
  so basis index ``i`` has qubit ``q`` equal to ``(i >> (n - 1 - q)) & 1``.
* Rotations follow the Z-Y-Z composition ``RZ(gamma) @ RY(beta) @ RZ(alpha)``
  with ``RZ(t) = diag(exp(-it/2), exp(+it/2))``.
* Measurement outcomes are Pauli eigenvalues in {-1, +1}; the computational
  bit 0 maps to +1.
* Bell pairs are prepared by H on the first qubit then CNOT, so the index
  bits (b1, b2) label (|0 b2> + (-1)^b1 |1 ~b2>)/sqrt(2); the Bell
  measurement is the inverse circuit (CNOT then H) followed by Z readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 5

# Tolerances for state/operator validation.
ATOL_STATE = 1e-9

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI_BY_LETTER = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
# Maps Y eigenstates onto the computational basis (|+i> -> |0>, |-i> -> |1>).
Y_TO_Z = np.array([[1.0, -1.0j], [1.0, 1.0j]], dtype=complex) / math.sqrt(2.0)
CNOT_MATRIX = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ],
    dtype=complex,
)

# Single-qubit frame change that brings each Pauli eigenbasis to Z readout.
MEASUREMENT_FRAMES = {"X": HADAMARD, "Y": Y_TO_Z, "Z": np.eye(2, dtype=complex)}


class BellIndex(NamedTuple):
    """Two classical bits labelling a Bell state."""

    b1: int
    b2: int


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated trace-one Hermitian PSD matrix on ``n_qubits`` qubits."""

    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        mat = np.asarray(self.data, dtype=complex)
        dim = 2**self.n_qubits
        if mat.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)}, got {mat.shape}")
        if abs(np.trace(mat) - 1.0) > ATOL_STATE:
            raise ValueError(f"trace must be 1 within {ATOL_STATE}, got {np.trace(mat)}")
        if not np.allclose(mat, mat.conj().T, atol=ATOL_STATE):
            raise ValueError("matrix is not Hermitian within tolerance")
        eigmin = float(np.linalg.eigvalsh(mat)[0])
        if eigmin < -ATOL_STATE:
            raise ValueError(f"matrix is not PSD: min eigenvalue {eigmin}")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "data", mat)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


@dataclass(frozen=True, eq=False)
class Unitary:
    """Validated unitary operator on ``n_qubits`` qubits."""

    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        mat = np.asarray(self.data, dtype=complex)
        dim = 2**self.n_qubits
        if mat.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)}, got {mat.shape}")
        if not np.allclose(mat @ mat.conj().T, np.eye(dim), atol=1e-9):
            raise ValueError("matrix is not unitary within tolerance")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "data", mat)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rot_unitary(alpha: float, beta: float, gamma: float) -> Unitary:
    """Single-qubit rotation RZ(gamma) @ RY(beta) @ RZ(alpha).

    Angles are reduced mod 2*pi to the representative in (-pi, pi], so
    values already in that interval are used as-is.
    """
    two_pi = 2.0 * math.pi
    a = math.pi - (math.pi - alpha) % two_pi
    b = math.pi - (math.pi - beta) % two_pi
    g = math.pi - (math.pi - gamma) % two_pi
    return Unitary(1, _rz(g) @ _ry(b) @ _rz(a))


def _bit(index: int | np.ndarray, q: int, n: int):
    return (index >> (n - 1 - q)) & 1


def embed_unitary(u: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Expand a k-qubit unitary matrix to the full register.

    ``targets`` are distinct qubit positions; the first target is the most
    significant qubit of ``u``'s own index space.
    """
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits: {targets}")
    if any(not 0 <= t < n_qubits for t in targets):
        raise ValueError(f"targets {targets} out of range for {n_qubits} qubits")
    if u.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {u.shape} does not match {k} targets")
    dim = 2**n_qubits
    rest = [q for q in range(n_qubits) if q not in targets]
    big = np.kron(u, np.eye(2 ** len(rest), dtype=complex))
    # big orders qubits as targets + rest; permute basis indices to match.
    idx = np.arange(dim)
    perm = np.zeros(dim, dtype=np.int64)
    for pos, q in enumerate(targets + rest):
        perm |= _bit(idx, q, n_qubits) << (n_qubits - 1 - pos)
    return big[np.ix_(perm, perm)]


def apply_unitary(rho: DensityMatrix, u: Unitary, targets: Sequence[int]) -> DensityMatrix:
    """Conjugate the state by ``u`` acting on the listed target qubits."""
    if len(targets) != u.n_qubits:
        raise ValueError(f"{u.n_qubits}-qubit operator applied to {len(targets)} targets")
    full = embed_unitary(u.data, targets, rho.n_qubits)
    return DensityMatrix(rho.n_qubits, full @ rho.data @ full.conj().T)


def _check_same_shape(rho: DensityMatrix, sigma: DensityMatrix):
    if rho.n_qubits != sigma.n_qubits:
        raise ValueError(f"qubit count mismatch: {rho.n_qubits} vs {sigma.n_qubits}")


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity Tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2, clipped to [0, 1]."""
    _check_same_shape(rho, sigma)
    w, v = np.linalg.eigh(rho.data)
    w = np.clip(w, 0.0, None)
    sq = (v * np.sqrt(w)) @ v.conj().T
    inner = sq @ sigma.data @ sq
    ev = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(ev)) ** 2)
    return min(max(f, 0.0), 1.0)


def infidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    return 1.0 - fidelity(rho, sigma)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of (rho - sigma)."""
    _check_same_shape(rho, sigma)
    ev = np.linalg.eigvalsh(rho.data - sigma.data)
    return float(0.5 * np.sum(np.abs(ev)))


def pauli_matrix(letters: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis named by ``letters``."""
    if not letters:
        raise ValueError("empty Pauli string")
    out = np.array([[1.0]], dtype=complex)
    for ch in letters:
        try:
            out = np.kron(out, PAULI_BY_LETTER[ch])
        except KeyError:
            raise ValueError(f"invalid Pauli letter {ch!r} in {letters!r}") from None
    return out


def pauli_expectation(rho: DensityMatrix, letters: str) -> float:
    """Real expectation value Tr(P rho) for a Pauli string over I, X, Y, Z."""
    if len(letters) != rho.n_qubits:
        raise ValueError(f"Pauli string {letters!r} does not match {rho.n_qubits} qubits")
    val = np.trace(pauli_matrix(letters) @ rho.data)
    return float(val.real)


def measurement_rotation(letters: str) -> np.ndarray:
    """Frame change bringing a product Pauli basis (no identities) to Z readout."""
    out = np.array([[1.0]], dtype=complex)
    for ch in letters:
        try:
            out = np.kron(out, MEASUREMENT_FRAMES[ch])
        except KeyError:
            raise ValueError(f"basis letter must be X, Y or Z, got {ch!r}") from None
    return out


def born_probabilities(data: np.ndarray, letters: str) -> np.ndarray:
    """Outcome-index probabilities for measuring ``letters`` on a state matrix."""
    m = measurement_rotation(letters)
    probs = np.real(np.einsum("ij,jk,ik->i", m, data, m.conj()))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _bits_to_outcomes(index: int, n: int) -> np.ndarray:
    bits = (index >> (n - 1 - np.arange(n))) & 1
    return (1 - 2 * bits).astype(np.int8)


def measure_pauli(rho: DensityMatrix, basis: str, rng: np.random.Generator) -> np.ndarray:
    """Sample one product-Pauli measurement; returns per-qubit outcomes in {-1, +1}.

    The post-measurement state is discarded.
    """
    if len(basis) != rho.n_qubits:
        raise ValueError(f"basis {basis!r} does not match {rho.n_qubits} qubits")
    if "I" in basis:
        raise ValueError("measurement basis may not contain identity letters")
    probs = born_probabilities(rho.data, basis)
    outcome_index = int(rng.choice(rho.dim, p=probs))
    return _bits_to_outcomes(outcome_index, rho.n_qubits)


def partial_trace(data: np.ndarray, n_qubits: int, keep: Sequence[int]) -> np.ndarray:
    """Trace out all qubits not in ``keep``; kept qubits stay in ascending order."""
    keep = sorted(keep)
    t = data.reshape((2,) * (2 * n_qubits))
    labels = list(range(n_qubits))
    m = n_qubits
    for q in [q for q in range(n_qubits) if q not in keep][::-1]:
        pos = labels.index(q)
        t = np.trace(t, axis1=pos, axis2=m + pos)
        labels.pop(pos)
        m -= 1
    return t.reshape(2**m, 2**m)


def bell_measurement(
    rho: DensityMatrix, q1: int, q2: int, rng: np.random.Generator
) -> tuple[BellIndex, DensityMatrix | None]:
    """Joint Bell measurement of qubits (q1, q2): CNOT(q1->q2), H(q1), Z readout.

    Returns the sampled index and the renormalised state of the remaining
    qubits (None when no qubits remain).
    """
    n = rho.n_qubits
    if q1 == q2:
        raise ValueError("Bell measurement requires two distinct qubits")
    if not (0 <= q1 < n and 0 <= q2 < n):
        raise ValueError(f"qubits ({q1}, {q2}) out of range for {n}-qubit state")
    circuit = embed_unitary(HADAMARD, [q1], n) @ embed_unitary(CNOT_MATRIX, [q1, q2], n)
    rotated = circuit @ rho.data @ circuit.conj().T
    diag = np.clip(np.real(np.diag(rotated)), 0.0, None)
    idx = np.arange(rho.dim)
    b1_bits = _bit(idx, q1, n)
    b2_bits = _bit(idx, q2, n)
    probs = np.zeros(4)
    for b1 in (0, 1):
        for b2 in (0, 1):
            probs[2 * b1 + b2] = diag[(b1_bits == b1) & (b2_bits == b2)].sum()
    probs /= probs.sum()
    outcome = int(rng.choice(4, p=probs))
    b1, b2 = outcome >> 1, outcome & 1
    mask = (b1_bits == b1) & (b2_bits == b2)
    projected = np.where(np.outer(mask, mask), rotated, 0.0)
    keep = [q for q in range(n) if q not in (q1, q2)]
    if not keep:
        return BellIndex(b1, b2), None
    reduced = partial_trace(projected, n, keep)
    reduced = reduced / np.trace(reduced)
    return BellIndex(b1, b2), DensityMatrix(len(keep), reduced)


def computational_state(bits: Sequence[int]) -> DensityMatrix:
    """|b_0 b_1 ... b_{n-1}><...| for a bit sequence."""
    n = len(bits)
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"bit count must be in 1..{MAX_QUBITS}, got {n}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0 or 1, got {list(bits)}")
    index = 0
    for b in bits:
        index = (index << 1) | b
    vec = np.zeros(2**n, dtype=complex)
    vec[index] = 1.0
    return DensityMatrix(n, np.outer(vec, vec.conj()))


def bell_state(index: BellIndex | tuple[int, int]) -> DensityMatrix:
    """Two-qubit Bell state labelled by (b1, b2); (0,0) is (|00>+|11>)/sqrt(2)."""
    b1, b2 = index
    if b1 not in (0, 1) or b2 not in (0, 1):
        raise ValueError(f"Bell index bits must be 0 or 1, got {(b1, b2)}")
    vec = np.zeros(4, dtype=complex)
    vec[b2] = 1.0 / math.sqrt(2.0)
    vec[2 + (1 - b2)] = (-1.0) ** b1 / math.sqrt(2.0)
    return DensityMatrix(2, np.outer(vec, vec.conj()))


def ghz_state(n_qubits: int) -> DensityMatrix:
    """(|0...0> + |1...1>)/sqrt(2)."""
    if not 2 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"GHZ size must be in 2..{MAX_QUBITS}, got {n_qubits}")
    vec = np.zeros(2**n_qubits, dtype=complex)
    vec[0] = vec[-1] = 1.0 / math.sqrt(2.0)
    return DensityMatrix(n_qubits, np.outer(vec, vec.conj()))


def w_state(n_qubits: int) -> DensityMatrix:
    """Equal superposition of all single-excitation basis states."""
    if not 2 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"W size must be in 2..{MAX_QUBITS}, got {n_qubits}")
    vec = np.zeros(2**n_qubits, dtype=complex)
    for q in range(n_qubits):
        vec[1 << (n_qubits - 1 - q)] = 1.0 / math.sqrt(n_qubits)
    return DensityMatrix(n_qubits, np.outer(vec, vec.conj()))


def random_pure_state(rng: np.random.Generator) -> DensityMatrix:
    """Single-qubit pure state drawn uniformly on the Bloch sphere.

    cos(theta) is uniform on [-1, 1] and the azimuth uniform on [0, 2*pi),
    which is the area-uniform (Haar) distribution.
    """
    z = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    theta = math.acos(z)
    vec = np.array(
        [math.cos(theta / 2.0), np.exp(1.0j * phi) * math.sin(theta / 2.0)], dtype=complex
    )
    return DensityMatrix(1, np.outer(vec, vec.conj()))


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    dim = 2**n_qubits
    return DensityMatrix(n_qubits, np.eye(dim, dtype=complex) / dim)
