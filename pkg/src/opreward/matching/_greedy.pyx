# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled inner loop for threshold-gated greedy one-to-one matching.

Semantics are identical to ``_greedy_py.greedy_pairs``: entries below the
threshold are masked out, then the globally best surviving entry is accepted
and its row and column invalidated, repeating until nothing survives.  Ties
resolve to the lowest (row, column) in row-major order.
"""


def greedy_pairs(double[:, ::1] scores, double tau):
    cdef Py_ssize_t m = scores.shape[0]
    cdef Py_ssize_t n = scores.shape[1]
    cdef double[:, ::1] work = scores.copy()
    cdef Py_ssize_t i, j, bi, bj
    cdef double best, v
    # Sentinel below any cosine similarity; tau is never below -1.
    cdef double INVALID = -2.0

    for i in range(m):
        for j in range(n):
            if work[i, j] < tau:
                work[i, j] = INVALID

    pairs = []
    while True:
        best = INVALID
        bi = -1
        bj = -1
        for i in range(m):
            for j in range(n):
                v = work[i, j]
                if v > best:
                    best = v
                    bi = i
                    bj = j
        if bi < 0:
            break
        pairs.append((bi, bj, best))
        for j in range(n):
            work[bi, j] = INVALID
        for i in range(m):
            work[i, bj] = INVALID
    return pairs
