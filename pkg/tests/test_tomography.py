"""Measurement records, expectation accumulation, and linear inversion.

The accumulate oracle below recomputes every estimate by brute force over
all Pauli strings and all records; the reconstruction oracle builds
(1/2^n) * sum_s <s> * P_s directly from numpy Pauli literals.
"""

import itertools
import math

import numpy as np
import pytest

from blindcal.qcore import (
    DensityMatrix,
    bell_state,
    computational_state,
    maximally_mixed,
    pauli_expectation,
    trace_distance,
)
from blindcal.seeds import make_rng
from blindcal.tomography import (
    MeasurementRecord,
    RecordBatch,
    accumulate,
    project_to_physical,
    reconstruct,
    sample_basis,
    sample_records,
)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_product(letters: str) -> np.ndarray:
    mat = np.array([[1.0]], dtype=complex)
    for ch in letters:
        mat = np.kron(mat, PAULI[ch])
    return mat


def random_density(n_qubits: int, rng: np.random.Generator) -> DensityMatrix:
    dim = 2**n_qubits
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return DensityMatrix(n_qubits, rho / np.trace(rho).real)


def exact_table(rho: DensityMatrix) -> dict:
    """Expectation table with the exact value for every Pauli string."""
    n = rho.n_qubits
    table = {}
    for letters in itertools.product("IXYZ", repeat=n):
        s = "".join(letters)
        table[s] = (pauli_expectation(rho, s), 1)
    return table


def accumulate_oracle(records: list) -> dict:
    """Brute-force marginalization: scan all strings against all records."""
    n = len(records[0].basis)
    table = {}
    for letters in itertools.product("IXYZ", repeat=n):
        s = "".join(letters)
        total, count = 0.0, 0
        for rec in records:
            if all(si == "I" or si == bi for si, bi in zip(s, rec.basis)):
                prod = 1.0
                for si, out in zip(s, rec.outcomes):
                    if si != "I":
                        prod *= out
                total += prod
                count += 1
        if s == "I" * n:
            table[s] = (1.0, count)
        elif count:
            table[s] = (total / count, count)
    return table


def reconstruct_oracle(table: dict, n: int) -> np.ndarray:
    raw = np.zeros((2**n, 2**n), dtype=complex)
    for letters in itertools.product("IXYZ", repeat=n):
        s = "".join(letters)
        est = table.get(s, (0.0, 0))[0]
        raw += est * pauli_product(s)
    return raw / 2**n


class TestSampleBasis:
    def test_single_qubit_uniform(self):
        rng = make_rng(50)
        draws = 10**5
        counts = {"X": 0, "Y": 0, "Z": 0}
        for _ in range(draws):
            counts[sample_basis(1, rng)] += 1
        sigma = math.sqrt((1 / 3) * (2 / 3) / draws)
        for letter in "XYZ":
            assert abs(counts[letter] / draws - 1 / 3) < 3 * sigma + 1e-9

    def test_two_qubit_nine_strings_equally_likely(self):
        rng = make_rng(51)
        draws = 9 * 10**4
        counts = {}
        for _ in range(draws):
            basis = sample_basis(2, rng)
            counts[basis] = counts.get(basis, 0) + 1
        assert len(counts) == 9
        sigma = math.sqrt((1 / 9) * (8 / 9) / draws)
        for count in counts.values():
            assert abs(count / draws - 1 / 9) < 3.5 * sigma

    def test_fixed_seed_reproducible(self):
        a = [sample_basis(3, make_rng(52)) for _ in range(0, 1)]
        b = [sample_basis(3, make_rng(52)) for _ in range(0, 1)]
        assert a == b

    def test_no_identity_letters(self):
        rng = make_rng(53)
        for _ in range(1000):
            assert "I" not in sample_basis(2, rng)


class TestAccumulate:
    def test_all_z_plus_one(self):
        records = [MeasurementRecord(i, "Z", np.array([1])) for i in range(40)]
        table = accumulate(records)
        est, count = table["Z"]
        assert est == 1.0 and count == 40

    def test_even_split_x(self):
        records = [
            MeasurementRecord(i, "X", np.array([1 if i % 2 else -1])) for i in range(40)
        ]
        est, count = accumulate(records)["X"]
        assert est == 0.0 and count == 40

    def test_xz_marginalization_by_hand(self):
        records = [MeasurementRecord(i, "XZ", np.array([1, 1])) for i in range(10)]
        table = accumulate(records)
        assert table["XZ"][0] == 1.0
        assert table["XI"][0] == 1.0
        assert table["IZ"][0] == 1.0

    def test_all_identity_estimate_is_one(self):
        records = [MeasurementRecord(0, "YX", np.array([-1, 1]))]
        assert accumulate(records)["II"][0] == 1.0

    def test_zero_compatible_strings_absent(self):
        records = [MeasurementRecord(0, "ZZ", np.array([1, 1]))]
        table = accumulate(records)
        assert "XX" not in table
        assert "XI" not in table

    def test_matches_brute_force_oracle_on_random_batches(self):
        rng = make_rng(54)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            records = []
            for i in range(int(rng.integers(1, 60))):
                basis = "".join(rng.choice(list("XYZ")) for _ in range(n))
                outcomes = rng.choice([-1, 1], size=n)
                records.append(MeasurementRecord(i, basis, outcomes))
            got = accumulate(records)
            expected = accumulate_oracle(records)
            assert set(got) == set(expected)
            for s in expected:
                assert abs(got[s][0] - expected[s][0]) < 1e-12, s
                assert got[s][1] == expected[s][1], s

    def test_inconsistent_lengths_rejected(self):
        records = [
            MeasurementRecord(0, "Z", np.array([1])),
            MeasurementRecord(1, "ZZ", np.array([1, 1])),
        ]
        with pytest.raises(ValueError):
            accumulate(records)

    def test_mergeable_over_partitions(self):
        # accumulate(A+B) must agree with shot-weighted merge of the parts.
        rng = make_rng(55)
        records = []
        for i in range(50):
            basis = "".join(rng.choice(list("XYZ")) for _ in range(2))
            records.append(MeasurementRecord(i, basis, rng.choice([-1, 1], size=2)))
        whole = accumulate(records)
        part_a = accumulate(records[:20])
        part_b = accumulate(records[20:])
        for s, (est, count) in whole.items():
            ca = part_a.get(s, (0.0, 0))
            cb = part_b.get(s, (0.0, 0))
            assert count == ca[1] + cb[1]
            if s != "II" and count:
                merged = (ca[0] * ca[1] + cb[0] * cb[1]) / count
                assert abs(est - merged) < 1e-12


class TestProjectToPhysical:
    def test_identity_on_valid_state(self):
        rho = random_density(2, make_rng(56))
        out = project_to_physical(rho.data)
        np.testing.assert_allclose(out.data, rho.data, atol=1e-12)

    def test_clips_negative_eigenvalue(self):
        out = project_to_physical(np.diag([1.1, -0.1]).astype(complex))
        np.testing.assert_allclose(out.data, np.diag([1.0, 0.0]).astype(complex), atol=1e-12)

    def test_renormalizes(self):
        out = project_to_physical(np.diag([0.6, 0.6]).astype(complex))
        np.testing.assert_allclose(out.data, np.diag([0.5, 0.5]).astype(complex), atol=1e-12)

    def test_idempotent(self):
        raw = np.array([[0.9, 0.4], [0.4, -0.1]], dtype=complex)
        once = project_to_physical(raw)
        twice = project_to_physical(once.data)
        np.testing.assert_allclose(once.data, twice.data, atol=1e-12)

    def test_all_negative_rejected(self):
        with pytest.raises(ValueError):
            project_to_physical(np.diag([-0.5, -0.5]).astype(complex))


class TestReconstruct:
    def test_identity_only_table_gives_mixed(self):
        for n in (1, 2):
            table = {"I" * n: (1.0, 1)}
            rho = reconstruct(table, n)
            np.testing.assert_allclose(rho.data, np.eye(2**n) / 2**n, atol=1e-12)

    def test_exact_zero_state(self):
        table = {"I": (1.0, 1), "Z": (1.0, 1)}
        rho = reconstruct(table, 1)
        assert trace_distance(rho, computational_state([0])) < 1e-12

    def test_exact_bell_state(self):
        table = {"II": (1.0, 1), "XX": (1.0, 1), "YY": (-1.0, 1), "ZZ": (1.0, 1)}
        rho = reconstruct(table, 2)
        assert trace_distance(rho, bell_state((0, 0))) < 1e-12

    def test_matches_linear_inversion_oracle(self):
        rng = make_rng(57)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            rho = random_density(n, rng)
            table = exact_table(rho)
            got = reconstruct(table, n)
            expected = reconstruct_oracle(table, n)
            np.testing.assert_allclose(got.data, expected, atol=1e-10)

    def test_round_trip_up_to_three_qubits_200_states(self):
        rng = make_rng(58)
        for _ in range(200):
            n = int(rng.integers(1, 4))
            rho = random_density(n, rng)
            back = reconstruct(exact_table(rho), n)
            assert trace_distance(back, rho) < 1e-10


class TestSampleRecords:
    def test_matches_born_statistics(self):
        # Empirical single-string means agree with exact expectations.
        rng = make_rng(59)
        rho = random_density(1, rng)
        batch = sample_records(rho, 30000, rng)
        table = accumulate(list(batch))
        for letter in "XYZ":
            est, count = table[letter]
            expected = pauli_expectation(rho, letter)
            sigma = math.sqrt(max(1e-12, 1 - expected**2) / count)
            assert abs(est - expected) < 4 * sigma + 1e-6

    def test_transmission_indices_sequential(self):
        rng = make_rng(60)
        batch = sample_records(maximally_mixed(1), 10, rng, first_index=5)
        assert batch.transmission_indices.tolist() == list(range(5, 15))

    def test_statistical_consistency_median_over_50_seeds(self):
        # Median reconstruction error at N=1e5 stays below 0.02.
        draws = 10**5
        distances = []
        for seed in range(50):
            rng = make_rng(1000 + seed)
            rho = DensityMatrix(
                1, np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
            )
            batch = sample_records(rho, draws, rng)
            recon = reconstruct(accumulate(list(batch)), 1)
            distances.append(trace_distance(recon, rho))
        assert float(np.median(distances)) < 0.02

    def test_error_decays_with_shots(self):
        # O(1/sqrt(N)) scaling: quadrupling N should roughly halve the error.
        rho = computational_state([0])
        med = {}
        for draws in (2500, 40000):
            dists = []
            for seed in range(30):
                rng = make_rng(2000 + seed)
                batch = sample_records(rho, draws, rng)
                recon = reconstruct(accumulate(list(batch)), 1)
                dists.append(trace_distance(recon, rho))
            med[draws] = float(np.median(dists))
        assert med[40000] < med[2500]


class TestRecordBatch:
    def test_round_trip_records(self):
        rng = make_rng(61)
        batch = sample_records(maximally_mixed(2), 25, rng)
        rebuilt = RecordBatch.from_records(list(batch))
        assert rebuilt == batch

    def test_empty_batches_equal(self):
        assert RecordBatch.empty(1) == RecordBatch.empty(3)

    def test_select_subset(self):
        rng = make_rng(62)
        batch = sample_records(maximally_mixed(1), 10, rng)
        sub = batch.select(np.array([2, 4, 6]))
        assert sub.transmission_indices.tolist() == [2, 4, 6]
