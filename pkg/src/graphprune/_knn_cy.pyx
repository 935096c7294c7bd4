# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled k-nearest-neighbour selection kernel.

Per query row the kernel streams squared distances and keeps a running
sorted top-k via insertion, so the full distance matrix is never
materialized. Ordering contract matches ``_knn_np.knn_select`` exactly:
ascending distance, ties broken by ascending index, self excluded.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()


def knn_select(const double[:, ::1] points, Py_ssize_t k):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    out = np.empty((n, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] ov = out
    cdef double* best_d = <double*> malloc(k * sizeof(double))
    cdef Py_ssize_t* best_i = <Py_ssize_t*> malloc(k * sizeof(Py_ssize_t))
    if best_d == NULL or best_i == NULL:
        free(best_d)
        free(best_i)
        raise MemoryError()
    cdef Py_ssize_t i, j, c, cnt, pos
    cdef double d2, diff
    try:
        for i in range(n):
            cnt = 0
            for j in range(n):
                if j == i:
                    continue
                d2 = 0.0
                for c in range(d):
                    diff = points[i, c] - points[j, c]
                    d2 += diff * diff
                if cnt == k:
                    # j ascends, so an equal distance never displaces the
                    # current worst entry (its index is smaller)
                    if d2 >= best_d[k - 1]:
                        continue
                    pos = k - 1
                else:
                    pos = cnt
                    cnt += 1
                while pos > 0 and best_d[pos - 1] > d2:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d2
                best_i[pos] = j
            for c in range(k):
                ov[i, c] = best_i[c]
    finally:
        free(best_d)
        free(best_i)
    return out
