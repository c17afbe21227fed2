"""Fibre-length noise models: deterministic rotation plus probabilistic flips.

Noise strength grows with fibre length through

    p = 1 - 10**(-mu * L / 10)

for an attenuation-style coefficient ``mu`` (dB/km) and length ``L`` (km).
The same map is used for three independent mechanisms: a deterministic
Bloch rotation (angles scaled by p), a bit-flip channel and a phase-flip
channel (each applied with probability p).  Flip probability crosses 1/2 at
L = 10*log10(2)/mu, about 60.2 km for mu = 0.05, which is where deterministic
flip correction starts to pay off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import (
    MAX_QUBITS,
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    Unitary,
    apply_unitary,
    embed_unitary,
    rot_unitary,
)


def length_to_prob(mu: float, length_km: float) -> float:
    """Error probability for a fibre of ``length_km`` km at coefficient ``mu``."""
    if mu < 0.0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    if length_km < 0.0:
        raise ValueError(f"length must be non-negative, got {length_km}")
    return 1.0 - 10.0 ** (-mu * length_km / 10.0)


def bifurcation_length(mu: float) -> float:
    """Length at which the flip probability crosses 1/2."""
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return 10.0 * math.log10(2.0) / mu


@dataclass(frozen=True)
class NoiseParams:
    """Per-link noise description.

    ``theta_r`` holds one (alpha, beta, gamma) triple per qubit, drawn once
    per channel instance; the rotation actually applied to qubit q is
    rot_unitary(p * alpha_q, p * beta_q, p * gamma_q) with p derived from
    ``mu_rot`` and the length.
    """

    length_km: float
    mu_rot: float
    mu_bit: float
    mu_phase: float
    theta_r: np.ndarray

    def __post_init__(self):
        if self.length_km < 0.0:
            raise ValueError(f"length must be non-negative, got {self.length_km}")
        for name in ("mu_rot", "mu_bit", "mu_phase"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        theta = np.asarray(self.theta_r, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != 3:
            raise ValueError(f"theta_r must have shape (n_qubits, 3), got {theta.shape}")
        if not 1 <= theta.shape[0] <= MAX_QUBITS:
            raise ValueError(f"theta_r qubit count out of range: {theta.shape[0]}")
        if np.any(np.abs(theta) > math.pi + 1e-12):
            raise ValueError("theta_r angles must lie in [-pi, pi]")
        theta = theta.copy()
        theta.flags.writeable = False
        object.__setattr__(self, "theta_r", theta)

    @property
    def n_qubits(self) -> int:
        return self.theta_r.shape[0]

    @property
    def p_rotation(self) -> float:
        return length_to_prob(self.mu_rot, self.length_km)

    @property
    def p_bit(self) -> float:
        return length_to_prob(self.mu_bit, self.length_km)

    @property
    def p_phase(self) -> float:
        return length_to_prob(self.mu_phase, self.length_km)

    @classmethod
    def draw(
        cls,
        n_qubits: int,
        length_km: float,
        mu_rot: float,
        mu_bit: float,
        mu_phase: float,
        rng: np.random.Generator,
        shared_rotation: bool = False,
    ) -> "NoiseParams":
        """Draw rotation axes uniformly from [-pi, pi]^3.

        With ``shared_rotation`` every qubit reuses one triple, modelling
        links that share a physical fibre.
        """
        if shared_rotation:
            triple = rng.uniform(-math.pi, math.pi, size=3)
            theta = np.tile(triple, (n_qubits, 1))
        else:
            theta = rng.uniform(-math.pi, math.pi, size=(n_qubits, 3))
        return cls(length_km, mu_rot, mu_bit, mu_phase, theta)


def rotation_unitaries(params: NoiseParams) -> list[np.ndarray]:
    """Per-qubit 2x2 rotation matrices for this channel instance."""
    p = params.p_rotation
    return [
        rot_unitary(p * a, p * b, p * g).data for a, b, g in params.theta_r
    ]


def rotational_channel(rho: DensityMatrix, params: NoiseParams) -> DensityMatrix:
    """Apply the deterministic length-scaled rotation to every qubit."""
    if rho.n_qubits != params.n_qubits:
        raise ValueError(
            f"state has {rho.n_qubits} qubits but channel expects {params.n_qubits}"
        )
    p = params.p_rotation
    out = rho
    for q, (a, b, g) in enumerate(params.theta_r):
        out = apply_unitary(out, rot_unitary(p * a, p * b, p * g), [q])
    return out


def _flip_exact(data: np.ndarray, n: int, pauli: np.ndarray, prob: float) -> np.ndarray:
    for q in range(n):
        op = embed_unitary(pauli, [q], n)
        data = (1.0 - prob) * data + prob * (op @ data @ op.conj().T)
    return data


def flip_channel_exact(rho: DensityMatrix, p_bit: float, p_phase: float) -> DensityMatrix:
    """Exact mixture form: per-qubit bit flip, then per-qubit phase flip."""
    for name, p in (("p_bit", p_bit), ("p_phase", p_phase)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    data = _flip_exact(rho.data, rho.n_qubits, PAULI_X, p_bit)
    data = _flip_exact(data, rho.n_qubits, PAULI_Z, p_phase)
    return DensityMatrix(rho.n_qubits, data)


def flip_channel_sampled(
    rho: DensityMatrix, p_bit: float, p_phase: float, rng: np.random.Generator
) -> DensityMatrix:
    """One stochastic realisation: coin-flip X then Z on each qubit."""
    for name, p in (("p_bit", p_bit), ("p_phase", p_phase)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    n = rho.n_qubits
    out = rho
    x_gate = Unitary(1, PAULI_X)
    z_gate = Unitary(1, PAULI_Z)
    for q in range(n):
        if rng.random() < p_bit:
            out = apply_unitary(out, x_gate, [q])
    for q in range(n):
        if rng.random() < p_phase:
            out = apply_unitary(out, z_gate, [q])
    return out


def apply_channel_exact(rho: DensityMatrix, params: NoiseParams) -> DensityMatrix:
    """Rotation followed by the exact flip mixtures."""
    return flip_channel_exact(rotational_channel(rho, params), params.p_bit, params.p_phase)


def apply_channel_sampled(
    rho: DensityMatrix, params: NoiseParams, rng: np.random.Generator
) -> DensityMatrix:
    """Rotation followed by one sampled flip realisation."""
    return flip_channel_sampled(
        rotational_channel(rho, params), params.p_bit, params.p_phase, rng
    )


def expected_transmissions(n_states: int, eta: float) -> int:
    """Transmissions needed to land ``n_states`` through a lossy link of rate eta."""
    if n_states < 0:
        raise ValueError(f"n_states must be non-negative, got {n_states}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    return math.ceil(n_states / eta)
