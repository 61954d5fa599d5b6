"""Compiled in-place kernels for the dense backend."""

import numba
import numpy as np


@numba.njit(cache=True)
def coupling_inplace(amps, N, q, c, s):
    # exp(i theta X_q X_{q+1}) with c = cos(theta), s = i sin(theta)
    lo = 1 << (N - q - 2)
    for h in range(1 << q):
        base = h * 4 * lo
        for l in range(lo):
            i0 = base + l
            i1 = i0 + lo
            i2 = i1 + lo
            i3 = i2 + lo
            a0 = amps[i0]
            a3 = amps[i3]
            amps[i0] = c * a0 + s * a3
            amps[i3] = c * a3 + s * a0
            a1 = amps[i1]
            a2 = amps[i2]
            amps[i1] = c * a1 + s * a2
            amps[i2] = c * a2 + s * a1


@numba.njit(cache=True)
def phase_by_table_inplace(amps, table, keys):
    for i in range(amps.shape[0]):
        amps[i] *= table[keys[i]]


def warmup():
    a = np.ones(4, dtype=np.complex128)
    coupling_inplace(a, 2, 0, 1.0, 0j)
    phase_by_table_inplace(a, np.ones(3, dtype=np.complex128), np.zeros(4, dtype=np.intp))
