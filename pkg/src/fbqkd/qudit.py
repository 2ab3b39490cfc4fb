"""Frequency-bin qudit states and two-user projection statistics.

Models a maximally entangled d-level state carried by d frequency-mode
pairs, the natural (frequency, Z) and discrete-Fourier (X) measurement
bases, apparatus imperfections of the phase-programmed X analyzer, and the
outcome relabeling that makes correlations diagonal in both bases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Basis",
    "BellStateSpec",
    "MeasurementSetting",
    "OutcomeCorrelation",
    "default_correlation",
    "intrinsic_error_rates",
    "mub_vector",
    "projection_probability",
    "x_joint_distribution",
    "z_joint_distribution",
]


class Basis(Enum):
    """Measurement basis label: natural frequency basis or its Fourier dual."""

    Z = "Z"
    X = "X"


@dataclass(frozen=True)
class BellStateSpec:
    """A d-dimensional frequency-bin Bell state.

    |psi> = (1/sqrt(d)) * sum_l exp(i*phi_l) |l>_A |l>_B, where l indexes the
    d mode pairs of the channel and phi_l are the spectral phases accumulated
    across the comb (one phase per Schmidt term; a global phase is
    irrelevant).

    Attributes
    ----------
    dimension:
        Number of Schmidt terms d >= 2.
    center_mode:
        Comb mode index the channel is centered on (bookkeeping only).
    mode_phases:
        Tuple of d spectral phases in radians.
    """

    dimension: int
    center_mode: int
    mode_phases: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dimension}")
        if len(self.mode_phases) != self.dimension:
            raise ValueError(
                f"need {self.dimension} mode phases, got {len(self.mode_phases)}"
            )
        object.__setattr__(self, "mode_phases", tuple(float(p) for p in self.mode_phases))

    def amplitudes(self) -> np.ndarray:
        """Schmidt-term amplitudes exp(i*phi_l)/sqrt(d) as a complex vector."""
        phases = np.asarray(self.mode_phases, dtype=float)
        return np.exp(1j * phases) / math.sqrt(self.dimension)


@dataclass(frozen=True)
class MeasurementSetting:
    """One projective measurement setting of a single user.

    Z settings address one frequency bin directly; X settings program a
    relabeled Fourier projector with per-step phase 2*pi*k/d. Imperfections:

    phase_error:
        Radians added to the programmed per-step phase of an X projector
        (a constant step offset, the dominant analyzer error). Ignored for Z.
    amplitude_imbalance:
        Optional d relative field amplitudes of the projector (ideal: all
        equal); renormalized internally. Ignored for Z.
    """

    basis: Basis
    outcome_index: int
    phase_error: float = 0.0
    amplitude_imbalance: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.amplitude_imbalance is not None:
            object.__setattr__(
                self,
                "amplitude_imbalance",
                tuple(float(a) for a in self.amplitude_imbalance),
            )

    def vector(self, dimension: int) -> np.ndarray:
        """Normalized projector vector in the frequency-bin basis."""
        if not 0 <= self.outcome_index < dimension:
            raise ValueError(
                f"outcome index {self.outcome_index} out of range for d={dimension}"
            )
        if self.basis is Basis.Z:
            v = np.zeros(dimension, dtype=complex)
            v[self.outcome_index] = 1.0
            return v
        l = np.arange(dimension)
        step = 2.0 * math.pi * self.outcome_index / dimension + self.phase_error
        v = np.exp(1j * step * l)
        if self.amplitude_imbalance is not None:
            if len(self.amplitude_imbalance) != dimension:
                raise ValueError(
                    f"need {dimension} amplitude weights, got "
                    f"{len(self.amplitude_imbalance)}"
                )
            weights = np.asarray(self.amplitude_imbalance, dtype=float)
            if np.any(weights < 0.0):
                raise ValueError("amplitude weights must be non-negative")
            v = v * weights
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("projector vector has zero norm")
        return v / norm


@dataclass(frozen=True)
class OutcomeCorrelation:
    """Bijective relabeling of Bob's outcomes making correlations diagonal."""

    dimension: int
    relabeling: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.relabeling) != list(range(self.dimension)):
            raise ValueError(
                f"relabeling must be a bijection on 0..{self.dimension - 1}, "
                f"got {self.relabeling}"
            )

    def apply(self, outcome: int) -> int:
        return self.relabeling[outcome]


def default_correlation(d: int) -> OutcomeCorrelation:
    """Standard X-basis key map: Bob's outcome k is relabeled to (-k) mod d.

    With it, the ideal X x X support j + k = 0 (mod d) lands on the diagonal,
    so matched symbols mark true coincidences in both bases.
    """
    return OutcomeCorrelation(d, tuple((-k) % d for k in range(d)))


def mub_vector(d: int, basis: Basis, k: int) -> np.ndarray:
    """k-th ideal basis vector of the Z or X basis in dimension d.

    Z: computational unit vectors. X: (1/sqrt(d)) * exp(2*pi*i*k*l/d), the
    discrete-Fourier basis, mutually unbiased with Z.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not 0 <= k < d:
        raise ValueError(f"basis index {k} out of range for d={d}")
    if basis is Basis.Z:
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        return v
    l = np.arange(d)
    return np.exp(2j * math.pi * k * l / d) / math.sqrt(d)


def projection_probability(
    state: BellStateSpec,
    alice: MeasurementSetting,
    bob: MeasurementSetting,
) -> float:
    """Joint probability |<a (x) b | psi>|^2 of one outcome pair.

    Direct complex sum over the d Schmidt terms, including the state's
    spectral phases and both users' setting imperfections.
    """
    d = state.dimension
    va = alice.vector(d)
    vb = bob.vector(d)
    amp = np.sum(np.conj(va) * np.conj(vb) * state.amplitudes())
    return float(np.abs(amp) ** 2)


def z_joint_distribution(state: BellStateSpec) -> np.ndarray:
    """d x d joint outcome distribution for Z x Z measurements.

    Diagonal 1/d regardless of spectral phases: each Schmidt term feeds
    exactly one (l, l) outcome pair and phases cancel in the modulus.
    """
    return np.eye(state.dimension) / state.dimension


def x_joint_distribution(
    state: BellStateSpec,
    alice_template: MeasurementSetting | None = None,
    bob_template: MeasurementSetting | None = None,
    infidelity: float = 0.0,
) -> np.ndarray:
    """d x d joint outcome distribution for X x X measurements (raw labels).

    Optional setting templates carry apparatus imperfections (their
    outcome_index is ignored; one projector per outcome is built from the
    template). ``infidelity`` mixes the result with the uniform distribution,
    modeling residual analyzer mixing error: P -> (1-chi)*P + chi/d^2.
    """
    if not 0.0 <= infidelity < 1.0:
        raise ValueError(f"infidelity must lie in [0, 1), got {infidelity}")
    d = state.dimension
    probs = np.empty((d, d), dtype=float)
    for j in range(d):
        a = _with_outcome(alice_template, j)
        for k in range(d):
            b = _with_outcome(bob_template, k)
            probs[j, k] = projection_probability(state, a, b)
    if infidelity > 0.0:
        probs = (1.0 - infidelity) * probs + infidelity / (d * d)
    return probs


def _with_outcome(template: MeasurementSetting | None, k: int) -> MeasurementSetting:
    if template is None:
        return MeasurementSetting(basis=Basis.X, outcome_index=k)
    return MeasurementSetting(
        basis=Basis.X,
        outcome_index=k,
        phase_error=template.phase_error,
        amplitude_imbalance=template.amplitude_imbalance,
    )


def intrinsic_error_rates(
    state: BellStateSpec,
    x_infidelity: float = 0.0,
    alice_template: MeasurementSetting | None = None,
    bob_template: MeasurementSetting | None = None,
    correlation: OutcomeCorrelation | None = None,
) -> tuple[float, float]:
    """(eps_Z, eps_X): intrinsic symbol error rates of the state + analyzers.

    Errors are the off-diagonal probability mass of the key-mapped joint
    outcome distributions, i.e. what an ideal lossless link would measure.
    eps_Z is exactly 0 for any spectral phases; eps_X grows with the comb's
    phase slope, analyzer phase errors and the d >= 4 mixing infidelity.
    """
    d = state.dimension
    corr = correlation or default_correlation(d)
    pz = z_joint_distribution(state)
    eps_z = 1.0 - float(np.trace(pz) / pz.sum())
    px = x_joint_distribution(
        state, alice_template, bob_template, infidelity=x_infidelity
    )
    mapped = np.empty_like(px)
    for k in range(d):
        mapped[:, corr.apply(k)] = px[:, k]
    eps_x = 1.0 - float(np.trace(mapped) / mapped.sum())
    return eps_z, eps_x
