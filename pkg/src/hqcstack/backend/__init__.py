"""Noisy statevector device simulation: kernels, device presets, noise model."""

from .devices import (
    CalibrationSnapshot,
    DeviceSpec,
    UnknownDeviceError,
    DEFAULT_GATE_DURATIONS_NS,
    PRESET_DEVICE_IDS,
    batch_qpu_seconds,
    circuit_wall_seconds,
    device_preset,
    generate_calibration_snapshot,
)
from .noise import NoiseParams, derive_noise_from_calibration, noise_for_device
from .statevector import (
    DEFAULT_QUBIT_CAP,
    QubitCapExceededError,
    SimulationError,
    UntranspiledCircuitError,
    check_transpiled,
    run_statevector,
    sample_counts,
    simulate_ideal,
)
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION

__all__ = [
    "CalibrationSnapshot",
    "DeviceSpec",
    "UnknownDeviceError",
    "DEFAULT_GATE_DURATIONS_NS",
    "PRESET_DEVICE_IDS",
    "batch_qpu_seconds",
    "circuit_wall_seconds",
    "device_preset",
    "generate_calibration_snapshot",
    "NoiseParams",
    "derive_noise_from_calibration",
    "noise_for_device",
    "DEFAULT_QUBIT_CAP",
    "QubitCapExceededError",
    "SimulationError",
    "UntranspiledCircuitError",
    "check_transpiled",
    "run_statevector",
    "sample_counts",
    "simulate_ideal",
    "KERNEL_IMPLEMENTATION",
]
