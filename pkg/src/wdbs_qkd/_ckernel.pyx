# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pulse simulation kernel; same contract as ``_pykernel``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline long detect(long state, double u_click, double u_route, double u_bit,
                        double u_flip, const double[::1] p, Py_ssize_t off,
                        double flip, long* multi, long* dark) noexcept nogil:
    cdef double ratio = p[off], pm = p[off + 1], ps = p[off + 2], pd = p[off + 3]
    cdef long diag, bit
    cdef double p0
    if u_click < pm:
        multi[0] += 1
    if u_click < ps:
        diag = 0 if u_route < ratio else 1
        if diag == (1 if state >= 2 else 0):
            p0 = 1.0 - (state & 1)
        else:
            p0 = 0.5
        bit = 0 if u_bit < p0 else 1
        if u_flip < flip:
            bit ^= 1
        return 1 + 2 * diag + bit
    if u_click < ps + pd:
        dark[0] += 1
        diag = 0 if u_route < 0.5 else 1
        bit = 0 if u_bit < 0.5 else 1
        return 1 + 2 * diag + bit
    return 0


def simulate_chunk(u, states, params):
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const cnp.int64_t[::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    counts_arr = np.zeros(100, dtype=np.int64)
    aux_arr = np.zeros(4, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef cnp.int64_t[::1] aux = aux_arr
    cdef Py_ssize_t n = uu.shape[0], k = st.shape[0], i, j
    cdef long alice, eve, bob, slot, incident
    cdef long bmulti = 0, bdark = 0, emulti = 0, edark = 0
    cdef bint eve_on = p[0] != 0.0
    cdef double flip = p[5]
    with nogil:
        for i in range(n):
            j = <Py_ssize_t>(uu[i, 0] * k)
            if j > k - 1:
                j = k - 1
            alice = st[j]
            if eve_on:
                eve = detect(alice, uu[i, 1], uu[i, 2], uu[i, 3], 2.0, p, 1, 0.0, &emulti, &edark)
                if eve == 0:
                    slot = 3
                    incident = 0
                else:
                    slot = 1 if eve <= 2 else 2
                    incident = eve - 1
            else:
                eve = 0
                slot = 0
                incident = alice
            bob = detect(incident, uu[i, 4], uu[i, 5], uu[i, 6], uu[i, 7], p, 6 + 4 * slot,
                         flip, &bmulti, &bdark)
            counts[alice * 25 + eve * 5 + bob] += 1
    aux[0] = bmulti
    aux[1] = bdark
    aux[2] = emulti
    aux[3] = edark
    return counts_arr, aux_arr
