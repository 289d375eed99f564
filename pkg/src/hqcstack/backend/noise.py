"""Calibration-derived stochastic noise model.

Fidelity complements become Pauli-error insertion probabilities for Monte
Carlo trajectories (the simulator stays pure-state): each gate suffers a
uniform non-identity Pauli on its qubits with probability 1 - F; each
involved qubit dephases (Z) with probability 1 - exp(-duration/T2); each
measured bit flips with probability 1 - f_ro.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .devices import CalibrationSnapshot, DeviceSpec

__all__ = ["NoiseParams", "derive_noise_from_calibration", "noise_for_device"]


@dataclass(frozen=True)
class NoiseParams:
    """Per-event insertion probabilities derived from one calibration."""

    p1: float  # Pauli error per single-qubit gate
    p2: float  # Pauli error per two-qubit gate
    p_readout: float  # bit flip per measured qubit
    dephase_1q: float  # Z per involved qubit, single-qubit gate duration
    dephase_2q: float  # Z per involved qubit, two-qubit gate duration

    @property
    def is_zero(self) -> bool:
        return (
            self.p1 == 0.0
            and self.p2 == 0.0
            and self.p_readout == 0.0
            and self.dephase_1q == 0.0
            and self.dephase_2q == 0.0
        )


def _dephase_probability(duration_ns: float, t2_us: float) -> float:
    if math.isinf(t2_us):
        return 0.0
    return 1.0 - math.exp(-(duration_ns * 1e-3) / t2_us)


def derive_noise_from_calibration(
    cal: CalibrationSnapshot, gate_durations_ns: dict[str, float]
) -> NoiseParams:
    """Map a calibration snapshot to trajectory insertion probabilities."""
    return NoiseParams(
        p1=1.0 - cal.f1,
        p2=1.0 - cal.f2,
        p_readout=1.0 - cal.f_ro,
        dephase_1q=_dephase_probability(gate_durations_ns["single_qubit"], cal.t2_us),
        dephase_2q=_dephase_probability(gate_durations_ns["two_qubit"], cal.t2_us),
    )


def noise_for_device(spec: DeviceSpec) -> NoiseParams:
    return derive_noise_from_calibration(spec.calibration, dict(spec.gate_durations_ns))
