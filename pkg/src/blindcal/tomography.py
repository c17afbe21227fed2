"""Linear-inversion state tomography from random product-Pauli measurements.

Each transmission is measured in an independently drawn product basis (one
uniform X/Y/Z letter per qubit).  A record taken in basis ``b`` contributes
to every Pauli string obtained by replacing any subset of positions in ``b``
with identity: the estimate for that string is the mean over compatible
records of the product of outcomes at its non-identity positions.  The state
estimate is then

    rho = (1 / 2**n) * sum_s  estimate(s) * P_s

over all 4**n strings ``s``, clipped to the physical set (eigenvalues at 0,
trace renormalised to 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator

import numpy as np

from .qcore import DensityMatrix, born_probabilities, pauli_matrix

log = logging.getLogger(__name__)

BASIS_LETTERS = "XYZ"
# Wire codes for basis letters (also used by the message codec).
LETTER_TO_CODE = {"X": 1, "Y": 2, "Z": 3}
CODE_TO_LETTER = {v: k for k, v in LETTER_TO_CODE.items()}


@dataclass(frozen=True)
class MeasurementRecord:
    """One transmission's measurement: basis letters and per-qubit outcomes."""

    transmission_index: int
    basis: str
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if self.transmission_index < 0:
            raise ValueError(f"transmission_index must be >= 0, got {self.transmission_index}")
        if not self.basis or any(ch not in BASIS_LETTERS for ch in self.basis):
            raise ValueError(f"basis must be non-empty over X/Y/Z, got {self.basis!r}")
        if len(self.outcomes) != len(self.basis):
            raise ValueError(
                f"{len(self.outcomes)} outcomes for {len(self.basis)}-letter basis"
            )
        if any(o not in (-1, 1) for o in self.outcomes):
            raise ValueError(f"outcomes must be +1 or -1, got {self.outcomes}")

    @property
    def n_qubits(self) -> int:
        return len(self.basis)


class RecordBatch:
    """Column-oriented store for many records of the same width.

    Equivalent to a sequence of MeasurementRecord but cheap to build, carry
    in protocol messages, and feed to the estimators.
    """

    __slots__ = ("bases", "outcomes", "transmission_indices")

    def __init__(
        self,
        bases: np.ndarray,
        outcomes: np.ndarray,
        transmission_indices: np.ndarray,
    ):
        bases = np.ascontiguousarray(bases, dtype=np.uint8)
        outcomes = np.ascontiguousarray(outcomes, dtype=np.int8)
        indices = np.ascontiguousarray(transmission_indices, dtype=np.int64)
        if bases.ndim != 2 or bases.shape != outcomes.shape:
            raise ValueError(f"shape mismatch: bases {bases.shape}, outcomes {outcomes.shape}")
        if indices.shape != (bases.shape[0],):
            raise ValueError(f"need one transmission index per record, got {indices.shape}")
        if bases.size and (bases.min() < 1 or bases.max() > 3):
            raise ValueError("basis codes must be 1 (X), 2 (Y) or 3 (Z)")
        if outcomes.size and not np.all(np.abs(outcomes) == 1):
            raise ValueError("outcomes must be +1 or -1")
        if indices.size and indices.min() < 0:
            raise ValueError("transmission indices must be >= 0")
        self.bases = bases
        self.outcomes = outcomes
        self.transmission_indices = indices

    @classmethod
    def empty(cls, n_qubits: int) -> "RecordBatch":
        return cls(
            np.zeros((0, n_qubits), dtype=np.uint8),
            np.zeros((0, n_qubits), dtype=np.int8),
            np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def from_records(cls, records: Iterable[MeasurementRecord]) -> "RecordBatch":
        records = list(records)
        if not records:
            raise ValueError("cannot infer qubit count from zero records; use empty()")
        n = records[0].n_qubits
        if any(r.n_qubits != n for r in records):
            raise ValueError("records mix different qubit counts")
        bases = np.array(
            [[LETTER_TO_CODE[ch] for ch in r.basis] for r in records], dtype=np.uint8
        )
        outcomes = np.array([r.outcomes for r in records], dtype=np.int8)
        indices = np.array([r.transmission_index for r in records], dtype=np.int64)
        return cls(bases, outcomes, indices)

    @property
    def n_qubits(self) -> int:
        return self.bases.shape[1]

    def __len__(self) -> int:
        return self.bases.shape[0]

    def __getitem__(self, i: int) -> MeasurementRecord:
        return MeasurementRecord(
            int(self.transmission_indices[i]),
            "".join(CODE_TO_LETTER[int(c)] for c in self.bases[i]),
            tuple(int(o) for o in self.outcomes[i]),
        )

    def __iter__(self) -> Iterator[MeasurementRecord]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecordBatch):
            return NotImplemented
        if len(self) == 0 and len(other) == 0:
            # Width is not carried on the wire for empty reports.
            return True
        return (
            self.bases.shape == other.bases.shape
            and np.array_equal(self.bases, other.bases)
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.transmission_indices, other.transmission_indices)
        )

    def select(self, mask: np.ndarray) -> "RecordBatch":
        return RecordBatch(
            self.bases[mask], self.outcomes[mask], self.transmission_indices[mask]
        )


def _as_batch(records) -> RecordBatch:
    if isinstance(records, RecordBatch):
        return records
    return RecordBatch.from_records(records)


def sample_basis(n_qubits: int, rng: np.random.Generator) -> str:
    """Uniform independent X/Y/Z letter per qubit."""
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    return "".join(BASIS_LETTERS[i] for i in rng.integers(0, 3, size=n_qubits))


def sample_records(
    rho: DensityMatrix, count: int, rng: np.random.Generator, first_index: int = 0
) -> RecordBatch:
    """Simulate ``count`` transmissions of a fixed state.

    Bases are drawn per transmission (uniform letters), outcomes follow the
    Born distribution in each basis.  Vectorised over the batch: one uniform
    variate per transmission is inverted through the per-basis CDF, which
    draws from exactly the same joint law as measuring shot by shot.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    n = rho.n_qubits
    bases = rng.integers(1, 4, size=(count, n), dtype=np.uint8)
    u = rng.random(count)
    outcomes = np.zeros((count, n), dtype=np.int8)
    if count:
        uniq, inverse = np.unique(bases, axis=0, return_inverse=True)
        cdfs = np.empty((len(uniq), rho.dim))
        for g, row in enumerate(uniq):
            letters = "".join(CODE_TO_LETTER[int(c)] for c in row)
            cdfs[g] = np.cumsum(born_probabilities(rho.data, letters))
        drawn = (cdfs[inverse] < u[:, None]).sum(axis=1)
        shifts = n - 1 - np.arange(n)
        bits = (drawn[:, None] >> shifts) & 1
        outcomes = (1 - 2 * bits).astype(np.int8)
    indices = first_index + np.arange(count, dtype=np.int64)
    return RecordBatch(bases, outcomes, indices)


def accumulate(records) -> dict[str, tuple[float, int]]:
    """Estimate every Pauli string compatible with at least one record.

    Returns a map from Pauli string to (mean outcome product, record count).
    A record in basis ``b`` is compatible with each string formed by setting
    any subset of positions to I; its contribution is the product of outcomes
    at the remaining positions.  The all-identity string therefore gets the
    empty product, exactly 1, from every record.  Merging the sums from two
    disjoint batches gives the same table as one pass over both.
    """
    batch = _as_batch(records)
    if len(batch) == 0:
        return {}
    n = batch.n_qubits
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    uniq, inverse = np.unique(batch.bases, axis=0, return_inverse=True)
    for g, row in enumerate(uniq):
        sub = batch.outcomes[inverse == g].astype(np.float64)
        n_g = sub.shape[0]
        letters = [CODE_TO_LETTER[int(c)] for c in row]
        prods = [None] * (1 << n)
        prods[0] = np.ones(n_g)
        for mask in range(1, 1 << n):
            low = mask & -mask
            # mask bit (n-1-q) selects qubit q, so the lowest set bit maps back
            # to qubit n - bit_length(low)
            qubit = n - low.bit_length()
            prods[mask] = prods[mask ^ low] * sub[:, qubit]
        for mask in range(1 << n):
            key = "".join(
                letters[q] if (mask >> (n - 1 - q)) & 1 else "I" for q in range(n)
            )
            sums[key] = sums.get(key, 0.0) + float(prods[mask].sum())
            counts[key] = counts.get(key, 0) + n_g
    return {key: (sums[key] / counts[key], counts[key]) for key in sums}


@lru_cache(maxsize=8)
def _pauli_strings(n_qubits: int) -> tuple[str, ...]:
    return tuple("".join(p) for p in product("IXYZ", repeat=n_qubits))


@lru_cache(maxsize=4)
def _pauli_stack(n_qubits: int) -> np.ndarray:
    return np.stack([pauli_matrix(s) for s in _pauli_strings(n_qubits)])


def project_to_physical(matrix: np.ndarray) -> DensityMatrix:
    """Clip eigenvalues at zero and renormalise the trace to one."""
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    n = int(mat.shape[0]).bit_length() - 1
    if 2**n != mat.shape[0]:
        raise ValueError(f"dimension {mat.shape[0]} is not a power of two")
    if not np.allclose(mat, mat.conj().T, atol=1e-9):
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("matrix has no positive spectral weight; cannot normalise")
    w /= total
    return DensityMatrix(n, (v * w) @ v.conj().T)


def reconstruct(table: dict[str, tuple[float, int]], n_qubits: int) -> DensityMatrix:
    """Linear-inversion estimate from a Pauli expectation table.

    Strings absent from the table enter as zero (their count is logged);
    the all-identity string must be present.
    """
    strings = _pauli_strings(n_qubits)
    for key in table:
        if len(key) != n_qubits or any(ch not in "IXYZ" for ch in key):
            raise ValueError(f"table key {key!r} does not fit {n_qubits} qubits")
    identity = "I" * n_qubits
    if identity not in table:
        raise ValueError("expectation table lacks the all-identity entry")
    est = np.array([table.get(s, (0.0, 0))[0] for s in strings])
    missing = sum(1 for s in strings if s not in table)
    if missing:
        log.debug("reconstruct: %d of %d Pauli strings unmeasured", missing, len(strings))
    raw = np.einsum("s,sij->ij", est, _pauli_stack(n_qubits)) / (2**n_qubits)
    return project_to_physical(raw)
