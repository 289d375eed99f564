"""Pure-NumPy statevector gate kernels (fallback when the compiled extension
is unavailable). Same contract as the Cython module: all functions mutate the
1-D complex128 state in place; qubit 0 is the most significant bit of the
basis index.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "numpy"


def apply_1q(state: np.ndarray, u: np.ndarray, q: int, n: int) -> None:
    """Apply a 2x2 unitary to qubit q."""
    psi = np.moveaxis(state.reshape([2] * n), q, 0)
    a0 = psi[0].copy()
    a1 = psi[1].copy()
    psi[0] = u[0, 0] * a0 + u[0, 1] * a1
    psi[1] = u[1, 0] * a0 + u[1, 1] * a1


def apply_cz(state: np.ndarray, a: int, b: int, n: int) -> None:
    psi = state.reshape([2] * n)
    idx: list = [slice(None)] * n
    idx[a] = 1
    idx[b] = 1
    psi[tuple(idx)] *= -1.0


def apply_cx(state: np.ndarray, control: int, target: int, n: int) -> None:
    psi = state.reshape([2] * n)
    i10: list = [slice(None)] * n
    i10[control] = 1
    i10[target] = 0
    i11: list = [slice(None)] * n
    i11[control] = 1
    i11[target] = 1
    tmp = psi[tuple(i10)].copy()
    psi[tuple(i10)] = psi[tuple(i11)]
    psi[tuple(i11)] = tmp


def apply_swap(state: np.ndarray, a: int, b: int, n: int) -> None:
    psi = state.reshape([2] * n)
    i01: list = [slice(None)] * n
    i01[a] = 0
    i01[b] = 1
    i10: list = [slice(None)] * n
    i10[a] = 1
    i10[b] = 0
    tmp = psi[tuple(i01)].copy()
    psi[tuple(i01)] = psi[tuple(i10)]
    psi[tuple(i10)] = tmp
