# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled statevector gate kernels.

Contract mirrors _kernels_py: in-place mutation of a 1-D complex128 array,
qubit 0 = most significant bit of the basis index.
"""

import numpy as np

cimport numpy as cnp

IMPLEMENTATION = "cython"


def apply_1q(cnp.complex128_t[::1] state, cnp.complex128_t[:, ::1] u, int q, int n):
    cdef Py_ssize_t stride = 1 << (n - 1 - q)
    cdef Py_ssize_t size = 1 << n
    cdef Py_ssize_t block, i
    cdef double complex u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    cdef double complex a0, a1
    for block in range(0, size, 2 * stride):
        for i in range(block, block + stride):
            a0 = state[i]
            a1 = state[i + stride]
            state[i] = u00 * a0 + u01 * a1
            state[i + stride] = u10 * a0 + u11 * a1


def apply_cz(cnp.complex128_t[::1] state, int a, int b, int n):
    cdef Py_ssize_t size = 1 << n
    cdef Py_ssize_t mask = (1 << (n - 1 - a)) | (1 << (n - 1 - b))
    cdef Py_ssize_t i
    for i in range(size):
        if (i & mask) == mask:
            state[i] = -state[i]


def apply_cx(cnp.complex128_t[::1] state, int control, int target, int n):
    cdef Py_ssize_t size = 1 << n
    cdef Py_ssize_t cmask = 1 << (n - 1 - control)
    cdef Py_ssize_t tmask = 1 << (n - 1 - target)
    cdef Py_ssize_t i, j
    cdef double complex tmp
    for i in range(size):
        if (i & cmask) and not (i & tmask):
            j = i | tmask
            tmp = state[i]
            state[i] = state[j]
            state[j] = tmp


def apply_swap(cnp.complex128_t[::1] state, int a, int b, int n):
    cdef Py_ssize_t size = 1 << n
    cdef Py_ssize_t amask = 1 << (n - 1 - a)
    cdef Py_ssize_t bmask = 1 << (n - 1 - b)
    cdef Py_ssize_t i, j
    cdef double complex tmp
    for i in range(size):
        if (i & amask) and not (i & bmask):
            j = (i & ~amask) | bmask
            tmp = state[i]
            state[i] = state[j]
            state[j] = tmp
