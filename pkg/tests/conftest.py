import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hqcstack.backend.devices import CalibrationSnapshot, DeviceSpec, device_preset
from hqcstack.circuits import GateOp, QuantumCircuit


@pytest.fixture
def bell() -> QuantumCircuit:
    return QuantumCircuit(
        2,
        (
            GateOp("h", (0,)),
            GateOp("cx", (0, 1)),
            GateOp("measure", (0,)),
            GateOp("measure", (1,)),
        ),
        name="bell",
    )


@pytest.fixture
def helmi() -> DeviceSpec:
    return device_preset("helmi-sim", seed=7)


@pytest.fixture
def qal9000() -> DeviceSpec:
    return device_preset("qal9000-sim", seed=7)


def noiseless_calibration() -> CalibrationSnapshot:
    return CalibrationSnapshot(f1=1.0, f2=1.0, f_ro=1.0, t2_us=float("inf"))


def readout_only_calibration(f_ro: float) -> CalibrationSnapshot:
    return CalibrationSnapshot(f1=1.0, f2=1.0, f_ro=f_ro, t2_us=float("inf"))
