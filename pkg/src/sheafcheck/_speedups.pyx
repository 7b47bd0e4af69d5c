# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the exhaustive sweeps and GF(2) elimination.

Mirrors ``_purepy`` exactly; see that module for the bit conventions.
"""

import sys

from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

cdef extern from *:
    int __builtin_clzll(unsigned long long) nogil
from libc.stdint cimport uint64_t, int64_t


cdef uint64_t* _pack(seq, Py_ssize_t n) except NULL:
    cdef uint64_t* buf = <uint64_t*> malloc((n if n > 0 else 1) * sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = <uint64_t> seq[i]
    return buf


def sat_masks(pos, neg, int nvars):
    cdef Py_ssize_t nc = len(pos)
    cdef uint64_t* P = _pack(pos, nc)
    cdef uint64_t* N = _pack(neg, nc)
    cdef uint64_t full = (<uint64_t> 1 << nvars) - 1
    cdef uint64_t m, nm, end = <uint64_t> 1 << nvars
    cdef Py_ssize_t j
    cdef bint ok
    out = []
    try:
        m = 0
        while m < end:
            nm = ~m & full
            ok = True
            for j in range(nc):
                if ((m & P[j]) | (nm & N[j])) == 0:
                    ok = False
                    break
            if ok:
                out.append(m)
            m += 1
    finally:
        free(P)
        free(N)
    return out


def count_sat(pos, neg, int nvars):
    cdef Py_ssize_t nc = len(pos)
    cdef uint64_t* P = _pack(pos, nc)
    cdef uint64_t* N = _pack(neg, nc)
    cdef uint64_t full = (<uint64_t> 1 << nvars) - 1
    cdef uint64_t m, nm, end = <uint64_t> 1 << nvars
    cdef uint64_t total = 0
    cdef Py_ssize_t j
    cdef bint ok
    try:
        with nogil:
            m = 0
            while m < end:
                nm = ~m & full
                ok = True
                for j in range(nc):
                    if ((m & P[j]) | (nm & N[j])) == 0:
                        ok = False
                        break
                if ok:
                    total += 1
                m += 1
    finally:
        free(P)
        free(N)
    return total


def best_weighted(pos, neg, weights, hard, int nvars):
    cdef Py_ssize_t nc = len(pos)
    cdef uint64_t* P = _pack(pos, nc)
    cdef uint64_t* N = _pack(neg, nc)
    cdef int64_t* W = <int64_t*> malloc((nc if nc > 0 else 1) * sizeof(int64_t))
    cdef char* H = <char*> malloc((nc if nc > 0 else 1) * sizeof(char))
    cdef Py_ssize_t j
    for j in range(nc):
        W[j] = <int64_t> weights[j]
        H[j] = 1 if hard[j] else 0
    cdef uint64_t full = (<uint64_t> 1 << nvars) - 1
    cdef uint64_t m, nm, end = <uint64_t> 1 << nvars
    cdef int64_t w, best_w = -1
    cdef uint64_t best_mask = 0
    cdef bint ok, sat
    try:
        with nogil:
            m = 0
            while m < end:
                nm = ~m & full
                ok = True
                w = 0
                for j in range(nc):
                    sat = ((m & P[j]) | (nm & N[j])) != 0
                    if H[j]:
                        if not sat:
                            ok = False
                            break
                    elif sat:
                        w += W[j]
                if ok and w > best_w:
                    best_w = w
                    best_mask = m
                m += 1
    finally:
        free(P)
        free(N)
        free(W)
        free(H)
    if best_w < 0:
        return -1, 0
    return best_mask, best_w


def gf2_rank(rows, Py_ssize_t ncols):
    cdef Py_ssize_t nrows = len(rows)
    if nrows == 0 or ncols == 0:
        return 0
    cdef Py_ssize_t nw = (ncols + 63) // 64
    cdef uint64_t* M = <uint64_t*> malloc(nrows * nw * sizeof(uint64_t))
    if M == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, k, r, piv, col, w
    cdef bytes buf
    cdef Py_ssize_t nbytes = nw * 8
    mask64 = (1 << 64) - 1
    little = sys.byteorder == "little"
    for i in range(nrows):
        row = rows[i]
        if little:
            buf = row.to_bytes(nbytes, "little")
            memcpy(&M[i * nw], <const char*> buf, nbytes)
        else:
            for k in range(nw):
                M[i * nw + k] = <uint64_t> ((row >> (64 * k)) & mask64)
    cdef Py_ssize_t* piv_row = <Py_ssize_t*> malloc(ncols * sizeof(Py_ssize_t))
    if piv_row == NULL:
        free(M)
        raise MemoryError()
    r = 0
    try:
        with nogil:
            for col in range(ncols):
                piv_row[col] = -1
            # XOR basis keyed by highest set bit; boundary rows stay sparse
            for i in range(nrows):
                w = nw - 1
                while True:
                    while w >= 0 and M[i * nw + w] == 0:
                        w -= 1
                    if w < 0:
                        break
                    col = w * 64 + 63 - __builtin_clzll(M[i * nw + w])
                    piv = piv_row[col]
                    if piv < 0:
                        piv_row[col] = i
                        r += 1
                        break
                    for k in range(w + 1):
                        M[i * nw + k] ^= M[piv * nw + k]
    finally:
        free(piv_row)
        free(M)
    return r
