"""hqcstack: a desk-scale hybrid HPC+QC infrastructure.

Project/quota accounting, a workload-manager simulation co-scheduling with a
quantum-device gateway over a REST-style protocol, a noisy statevector
backend with realistic topologies and calibration data, and hybrid
variational workloads plus a workload-replay harness.
"""

__version__ = "0.1.0"
