"""Probe states through the rotating loop.

Two-mode photon number states over the loop polarization modes (H, V).
The loop imprints its phase on the V-occupation; a half-wave plate at
pi/8 mixes the modes before detection.  The two-photon probe is the
path-entangled pair (|2,0> - |0,2>)/sqrt(2), which accumulates phase at
twice the single-photon rate.
"""

import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ProbeKind:
    """Probe family and photon number; phase accumulates n times faster for pairs."""

    name: str
    photons: int

    def __post_init__(self):
        if self.name not in ("single", "noon", "classical"):
            raise ValueError(f"unknown probe kind {self.name!r}")
        if self.name == "single" and self.photons != 1:
            raise ValueError("single-photon probe carries exactly one photon")
        if self.name == "noon" and self.photons < 2:
            raise ValueError("path-entangled probe needs at least two photons")
        if self.name == "classical" and self.photons != 0:
            raise ValueError("classical probe carries no photon number")

    @property
    def enhancement(self):
        """Phase accumulation rate relative to a single photon."""
        return self.photons if self.name == "noon" else 1


SINGLE = ProbeKind("single", 1)
NOON2 = ProbeKind("noon", 2)
CLASSICAL = ProbeKind("classical", 0)


@dataclass(frozen=True)
class TwoModeState:
    """Superposition over occupation pairs (n_h, n_v) with complex amplitudes."""

    basis: tuple
    amplitudes: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.amplitudes):
            raise ValueError("basis and amplitudes differ in length")
        if len(set(self.basis)) != len(self.basis):
            raise ValueError("repeated basis occupation")
        norm = sum(abs(a) ** 2 for a in self.amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state not normalized: |amps|^2 = {norm}")

    def as_array(self):
        return np.array(self.amplitudes, dtype=complex)

    def amplitude(self, occupation):
        for occ, amp in zip(self.basis, self.amplitudes):
            if occ == tuple(occupation):
                return complex(amp)
        return 0.0j

    def probability(self, occupation):
        return abs(self.amplitude(occupation)) ** 2


def noon_state(n=2):
    """(|n,0> - |0,n>)/sqrt(2)."""
    if n < 1:
        raise ValueError("need at least one photon")
    return TwoModeState(((n, 0), (0, n)), (1.0 / _SQRT2, -1.0 / _SQRT2))


def evolve(state, phi_s, n=None):
    """Loop pass: each occupation (n_h, n_v) gains phase n_v * phi_s.

    n, when given, asserts the total photon number of the probe.
    """
    if n is not None and any(sum(occ) != n for occ in state.basis):
        raise ValueError(f"state is not an {n}-photon probe")
    amps = tuple(a * np.exp(1.0j * occ[1] * phi_s)
                 for occ, a in zip(state.basis, state.amplitudes))
    return TwoModeState(state.basis, amps)


def hom_interfere(distinguishability=0.0):
    """Two-photon state leaving the interference beamsplitter.

    distinguishability d = 0 gives the ideal pair (|2,0> - |0,2>)/sqrt(2);
    d = 1 leaves a residual |1,1> amplitude with bunching probabilities
    (1/4, 1/2, 1/4).  Intermediate d interpolates with unit norm.
    """
    d = float(distinguishability)
    if not 0.0 <= d <= 1.0:
        raise ValueError("distinguishability must be in [0, 1]")
    bunched = math.sqrt(2.0 - d * d) / 2.0
    return TwoModeState(((2, 0), (1, 1), (0, 2)),
                        (bunched, -1.0j * d / _SQRT2, -bunched))


def fringe_visibility(distinguishability):
    """Coincidence fringe visibility of a pair with the given distinguishability."""
    d = float(distinguishability)
    if not 0.0 <= d <= 1.0:
        raise ValueError("distinguishability must be in [0, 1]")
    return 1.0 - d


def two_photon_hwp():
    """Half-wave plate at pi/8 on the symmetric two-photon subspace.

    Basis order ((2,0), (1,1), (0,2)).
    """
    return np.array([
        [0.5, 1.0 / _SQRT2, 0.5],
        [1.0 / _SQRT2, 0.0, -1.0 / _SQRT2],
        [0.5, -1.0 / _SQRT2, 0.5],
    ], dtype=complex)


def coincidence_projection(state):
    """Probability of one photon in each output mode."""
    return state.probability((1, 1))


def single_photon_probs(phi_s):
    """(P_a, P_b) = ((1 + cos phi_s)/2, (1 - cos phi_s)/2) at the output ports."""
    p_a = 0.5 * (1.0 + math.cos(phi_s))
    return (p_a, 1.0 - p_a)


def noon_probs(n, phi_s):
    """(P_a, P_b) = ((1 + cos(n phi_s))/2, (1 - cos(n phi_s))/2).

    The n-photon probe sees the loop phase n times.  For n = 2 the P_a
    outcome is the coincidence projection after the output plate.
    """
    if n < 1:
        raise ValueError("need at least one photon")
    p_a = 0.5 * (1.0 + math.cos(n * phi_s))
    return (p_a, 1.0 - p_a)


def coincidence_prob(phi0, phi_s):
    """Two-photon coincidence fringe versus bias phase phi0.

    The pair sees bias and rotation phase doubled:
    P = (1/2)(1 + cos(2 phi0 + 2 phi_s)).
    """
    return 0.5 * (1.0 + math.cos(2.0 * (phi0 + phi_s)))


def output_state_after_hwp(phi_s):
    """Pair state after loop (phase phi_s) and output half-wave plate.

    Amplitudes (sin/sqrt2, -i cos, sin/sqrt2) of the loop phase, in basis
    ((2,0), (1,1), (0,2)), up to a global phase.
    """
    s, c = math.sin(phi_s), math.cos(phi_s)
    return TwoModeState(((2, 0), (1, 1), (0, 2)),
                        (s / _SQRT2, -1.0j * c, s / _SQRT2))
