# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled semiclassical trajectory integrator (see ``_traj_py`` for the reference)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)


def integrate(double complex[::1] eps, signed char[::1] z, double dt, double delta,
              double kerr, double kappa, double chi, double chi_prime,
              double complex a0, int substeps=1, int iters=3):
    """Implicit-midpoint integration of one conditional trajectory.

    The drive ``eps[k]`` is held on ``[k dt, (k+1) dt)`` and ``z[k]`` selects the
    ground (0) or excited (1) right-hand side on that interval.
    """
    cdef Py_ssize_t m = eps.shape[0]
    out = np.empty(m + 1, dtype=np.complex128)
    cdef double complex[::1] a = out
    cdef double h = dt / substeps
    cdef double complex cur = a0, nxt, mid, L, e
    cdef double w, n2, zk
    cdef Py_ssize_t k, s, it
    a[0] = cur
    with nogil:
        for k in range(m):
            e = eps[k]
            zk = z[k]
            for s in range(substeps):
                mid = cur
                for it in range(iters):
                    n2 = creal(mid) * creal(mid) + cimag(mid) * cimag(mid)
                    w = delta - 2.0 * kerr * n2 - zk * (chi + 2.0 * chi_prime * n2)
                    L = -1j * w - 0.5 * kappa
                    nxt = (cur * (1.0 + 0.5 * h * L) - 1j * h * e) / (1.0 - 0.5 * h * L)
                    mid = 0.5 * (cur + nxt)
                cur = nxt
            a[k + 1] = cur
    return out
