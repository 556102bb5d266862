# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Twin of ``_numpy.py``: identical IEEE-754 operations in identical order
(coordinate sums accumulate left to right), so masks are bit-identical with
the fallback backend.
"""

import numpy as np

from libc.math cimport fabs, sqrt

BACKEND_NAME = "compiled"


cdef inline double _radial(const double[:, ::1] pts, const double[::1] centre,
                           Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t k
    d = pts[i, 0] - centre[0]
    acc = d * d
    for k in range(1, n):
        d = pts[i, k] - centre[k]
        acc = acc + d * d
    return sqrt(acc)


def annulus_mask(const double[:, ::1] points, const double[::1] centre,
                 double radius, double delta):
    """Strict membership ||y - x| - r| < delta for each row of points."""
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1], i
    out = np.empty(N, dtype=np.bool_)
    cdef unsigned char[::1] mv = out.view(np.uint8)
    with nogil:
        for i in range(N):
            mv[i] = fabs(_radial(points, centre, i, n) - radius) < delta
    return out


def cap_mask(const double[:, ::1] points, const double[::1] centre,
             double radius, double delta, double min_cos):
    """Polar-cap membership: annulus hit and vertical direction cosine > min_cos."""
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1], i
    cdef double rho, vertical
    out = np.empty(N, dtype=np.bool_)
    cdef unsigned char[::1] mv = out.view(np.uint8)
    with nogil:
        for i in range(N):
            rho = _radial(points, centre, i, n)
            vertical = points[i, n - 1] - centre[n - 1]
            mv[i] = (fabs(rho - radius) < delta) and (vertical > min_cos * rho)
    return out


def slab_mask(const double[:, ::1] points, const double[::1] normal,
              double offset, double half_thickness):
    """Non-strict membership |<normal, y> - offset| <= half_thickness."""
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1], i, k
    cdef double acc
    out = np.empty(N, dtype=np.bool_)
    cdef unsigned char[::1] mv = out.view(np.uint8)
    with nogil:
        for i in range(N):
            acc = normal[0] * points[i, 0]
            for k in range(1, n):
                acc = acc + normal[k] * points[i, k]
            mv[i] = fabs(acc - offset) <= half_thickness
    return out


def cap_count(const double[:, ::1] points, const double[:, ::1] centres,
              const double[::1] radii, double delta, double min_cos):
    """Number of polar caps (one per sphere) containing each point."""
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1]
    cdef Py_ssize_t M = centres.shape[0], i, j, k
    cdef double acc, d, rho, vertical
    out = np.zeros(N, dtype=np.int64)
    cdef long long[::1] mv = out
    with nogil:
        for i in range(N):
            for j in range(M):
                d = points[i, 0] - centres[j, 0]
                acc = d * d
                for k in range(1, n):
                    d = points[i, k] - centres[j, k]
                    acc = acc + d * d
                rho = sqrt(acc)
                vertical = points[i, n - 1] - centres[j, n - 1]
                if fabs(rho - radii[j]) < delta and vertical > min_cos * rho:
                    mv[i] += 1
    return out
