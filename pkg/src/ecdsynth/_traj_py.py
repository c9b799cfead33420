"""Pure-Python trajectory integrator, used when the compiled kernel is unavailable."""
import numpy as np


def integrate(eps, z, dt, delta, kerr, kappa, chi, chi_prime, a0, substeps=1, iters=3):
    """Implicit-midpoint integration of one conditional trajectory.

    The drive ``eps[k]`` is held on ``[k dt, (k+1) dt)`` and ``z[k]`` selects the
    ground (0) or excited (1) right-hand side on that interval.
    """
    eps = np.asarray(eps, dtype=complex)
    z = np.asarray(z)
    m = len(eps)
    out = np.empty(m + 1, dtype=complex)
    h = dt / substeps
    cur = complex(a0)
    out[0] = cur
    for k in range(m):
        e = complex(eps[k])
        zk = float(z[k])
        for _ in range(substeps):
            mid = cur
            for _ in range(iters):
                n2 = mid.real * mid.real + mid.imag * mid.imag
                w = delta - 2.0 * kerr * n2 - zk * (chi + 2.0 * chi_prime * n2)
                L = -1j * w - 0.5 * kappa
                nxt = (cur * (1.0 + 0.5 * h * L) - 1j * h * e) / (1.0 - 0.5 * h * L)
                mid = 0.5 * (cur + nxt)
            cur = nxt
        out[k + 1] = cur
    return out
