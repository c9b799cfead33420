"""Target states and bosonic codes: binomial kitten code and finite-energy GKP.

Logical sets hold two oscillator kets ``zero = |+Z>`` and ``one = |-Z>``;
``hybrid`` versions tensor them with the ancilla in ``|g>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .fock import HilbertConfig, as_config, fock_state, hybrid_ket, normalize

SQRT_PI = np.sqrt(np.pi)

# e^{+Delta^2 n} entries above this are treated as overflow
ENVELOPE_CAP = 1e12


def logical_paulis(zero, one) -> list[np.ndarray]:
    """Embedded I, X, Y, Z built from two logical kets."""
    b = np.stack([np.asarray(zero, complex), np.asarray(one, complex)], axis=1)
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]], complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    return [b @ s @ b.conj().T for s in (np.eye(2), sx, sy, sz)]


def orthonormalize_pair(zero, one):
    """Symmetric (Lowdin) orthonormalization of two nearly orthogonal kets."""
    M = np.stack([np.asarray(zero, complex), np.asarray(one, complex)], axis=1)
    w, V = np.linalg.eigh(M.conj().T @ M)
    M = M @ (V @ np.diag(w ** -0.5) @ V.conj().T)
    return M[:, 0], M[:, 1]


@dataclass
class LogicalSet:
    """Two logical kets and the Pauli operators built from them."""

    zero: np.ndarray
    one: np.ndarray
    name: str = ""

    @property
    def n_osc(self) -> int:
        return len(self.zero)

    @property
    def overlap(self) -> complex:
        """<+Z|-Z>; exactly 0 for the binomial code, small but nonzero for GKP."""
        return complex(np.vdot(self.zero, self.one))

    @property
    def paulis(self) -> list[np.ndarray]:
        return logical_paulis(self.zero, self.one)

    def cardinal(self, label: str) -> np.ndarray:
        """Normalized cardinal state: one of +Z, -Z, +X, -X, +Y, -Y."""
        z, o = self.zero, self.one
        states = {
            "+Z": z,
            "-Z": o,
            "+X": z + o,
            "-X": z - o,
            "+Y": z + 1j * o,
            "-Y": z - 1j * o,
        }
        if label not in states:
            raise ValueError(f"unknown logical label {label!r}")
        return normalize(states[label])

    def hybrid(self, label: str) -> np.ndarray:
        return hybrid_ket(self.cardinal(label), "g")


# -- binomial kitten code -------------------------------------------------------


def _check_binomial(cfg: HilbertConfig):
    if cfg.n_active < 5:
        raise ValueError(f"binomial code needs at least 5 non-guard levels, got {cfg.n_active}")


def binomial_codewords(cfg) -> LogicalSet:
    """|+Z> = (|0> + |4>)/sqrt2, |-Z> = |2>."""
    cfg = as_config(cfg)
    _check_binomial(cfg)
    zero = (fock_state(0, cfg) + fock_state(4, cfg)) / np.sqrt(2)
    return LogicalSet(zero, fock_state(2, cfg), name="binomial")


def binomial_correctable_paulis(cfg):
    """(I_c, X_c, Y_c, Z_c): logical operators after ideal single-loss correction.

    Error words are |+Z>_e = |3> and |-Z>_e = |1>.
    """
    cfg = as_config(cfg)
    _check_binomial(cfg)
    code = binomial_codewords(cfg)
    I0, X0, Y0, Z0 = logical_paulis(code.zero, code.one)
    I1, X1, Y1, Z1 = logical_paulis(fock_state(3, cfg), fock_state(1, cfg))
    return I0 + I1, X0 + X1, Y0 + Y1, Z0 + Z1


# -- finite-energy GKP ---------------------------------------------------------


def envelope_operator(delta, cfg) -> np.ndarray:
    """E_Delta = exp(-Delta^2 a^dag a)."""
    cfg = as_config(cfg)
    if not delta > 0:
        raise ValueError("delta must be positive")
    return np.diag(np.exp(-delta ** 2 * np.arange(cfg.n_osc))).astype(complex)


def envelope_inverse_diag(delta, cfg) -> np.ndarray:
    """Diagonal of the capped inverse envelope: e^{+Delta^2 n} below the guard band, 0 inside it."""
    cfg = as_config(cfg)
    n = np.arange(cfg.n_osc)
    top = delta ** 2 * (cfg.n_active - 1)
    if top > np.log(ENVELOPE_CAP):
        raise OverflowError(
            f"inverse envelope e^{{Delta^2 n}} reaches {np.exp(top):.3g} > cap {ENVELOPE_CAP:g}; "
            "reduce n_osc or increase delta"
        )
    d = np.exp(delta ** 2 * n)
    d[cfg.n_active:] = 0.0
    return d


@lru_cache(maxsize=64)
def _finite_energy_displacement(alpha: complex, delta: float, n_osc: int) -> np.ndarray:
    """E_Delta D(alpha) E_Delta^{-1} = exp(alpha e^{-Delta^2} a^dag - alpha* e^{Delta^2} a).

    The closed-form generator avoids forming e^{+Delta^2 n} explicitly.  It is
    exponentiated in a doubled space and cut back to ``n_osc`` so that the
    columns near the truncation edge stay accurate.
    """
    m = 2 * n_osc
    a = np.diag(np.sqrt(np.arange(1, m, dtype=float)), k=1)
    G = alpha * np.exp(-delta ** 2) * a.T - np.conj(alpha) * np.exp(delta ** 2) * a
    M = expm(G)[:n_osc, :n_osc]
    M.setflags(write=False)
    return M


def gkp_finite_stabilizers(delta, cfg):
    """(S_q, S_p, X, Y, Z) finite-energy operators E D E^{-1} for the square code."""
    cfg = as_config(cfg)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    s = np.sqrt(2 * np.pi)
    h = np.sqrt(np.pi / 2)
    Sq, Sp, X, Z = (np.array(_finite_energy_displacement(a, float(delta), cfg.n_osc))
                    for a in (1j * s, s, h, 1j * h))
    return Sq, Sp, X, 1j * X @ Z, Z


def gkp_fictitious_hamiltonian(delta, cfg) -> np.ndarray:
    """H = -S_q - S_p - Z (non-Hermitian); code state |+Z_Delta> satisfies H|+Z_Delta> = -3|+Z_Delta>."""
    Sq, Sp, _, _, Z = gkp_finite_stabilizers(delta, cfg)
    return -Sq - Sp - Z


def _lattice_state(delta, n_osc, offset):
    """E_Delta applied to sum_s |x = offset + 2 s sqrt(pi)>, in the Fock basis."""
    half = np.sqrt(2.0 * n_osc + 1.0) + 12.0
    smax = int(np.ceil(half / (2 * SQRT_PI))) + 1
    x = offset + 2 * SQRT_PI * np.arange(-smax, smax + 1)
    c = np.exp(-delta ** 2 * np.arange(n_osc)) * hermite_functions(n_osc, x).sum(axis=1)
    return normalize(c.astype(complex))


def gkp_logical_states(delta, cfg) -> LogicalSet:
    """Finite-energy square-GKP code words.

    |+Z_Delta> is the common +1 eigenvector of S_q, S_p and Z_Delta, i.e. the
    eigenvector of the fictitious Hamiltonian -S_q - S_p - Z_Delta with the
    lowest eigenvalue -3.  It is E_Delta applied to the ideal position comb on
    even multiples of sqrt(pi), evaluated directly in the Fock basis.
    |-Z_Delta> = X_Delta|+Z_Delta> (normalized) is the comb shifted by sqrt(pi).
    """
    cfg = as_config(cfg)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    zero = _lattice_state(delta, cfg.n_osc, 0.0)
    one = _lattice_state(delta, cfg.n_osc, SQRT_PI)
    return LogicalSet(zero, one, name=f"gkp(delta={delta:g})")


def delta_to_db(delta) -> float:
    return float(-20.0 * np.log10(delta))


def db_to_delta(db) -> float:
    return float(10.0 ** (-db / 20.0))


def _code_projection(rho, delta, cfg) -> float:
    code = gkp_logical_states(delta, cfg)
    return float(sum(np.real(np.vdot(v, rho @ v)) for v in (code.zero, code.one)))


def gkp_effective_squeezing(rho, cfg, grid=None, refine=True):
    """Delta maximizing Tr(rho P_Delta), P_Delta the finite-energy code-space projector.

    Scans ``grid`` (default 0.20..0.60 in steps of 0.01), then refines with a
    bounded scalar search between the neighbours of the best grid point.
    Returns ``(delta_eff, details)``.
    """
    cfg = as_config(cfg)
    rho = np.asarray(rho, complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    grid = np.round(np.arange(0.20, 0.6001, 0.01), 10) if grid is None else np.asarray(grid, float)
    vals = np.array([_code_projection(rho, d, cfg) for d in grid])
    k = int(np.argmax(vals))
    best, best_val = float(grid[k]), float(vals[k])
    if refine and 0 < k < len(grid) - 1:
        res = minimize_scalar(lambda d: -_code_projection(rho, d, cfg),
                              bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                              options={"xatol": 1e-5})
        if -res.fun >= best_val:
            best, best_val = float(res.x), float(-res.fun)
    return best, {"grid": grid, "projection": vals, "at_boundary": k in (0, len(grid) - 1),
                  "max_projection": best_val}


# -- homodyne marginals ----------------------------------------------------------


def hermite_functions(n: int, x) -> np.ndarray:
    """Oscillator eigenfunctions psi_k(x), k < n, for x with [x, p] = i (shape (n, len(x)))."""
    x = np.asarray(x, float)
    out = np.empty((n, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-x ** 2 / 2)
    if n > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(2, n):
        out[k] = np.sqrt(2.0 / k) * x * out[k - 1] - np.sqrt((k - 1) / k) * out[k - 2]
    return out


def rotate_state(rho, theta):
    """U rho U^dag with U = exp(-i theta a^dag a), so x-statistics of the result are x_theta statistics of rho."""
    rho = np.asarray(rho, complex)
    ph = np.exp(-1j * theta * np.arange(rho.shape[0]))
    if rho.ndim == 1:
        return ph * rho
    return ph[:, None] * rho * ph[None, :].conj()


def quadrature_distribution(rho, x, theta=0.0) -> np.ndarray:
    """P(x) of the generalized quadrature x_theta = (e^{i theta} a^dag + e^{-i theta} a)/sqrt2."""
    rho = np.asarray(rho, complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    r = rotate_state(rho, theta)
    psi = hermite_functions(r.shape[0], x)
    return np.real(np.einsum("mx,mn,nx->x", psi, r, psi))


def _bin_value(x, period):
    """+1 in bins nearest integer multiples of ``period``, -1 nearest the half multiples."""
    frac = np.mod(x / period + 0.25, 1.0)
    return np.where(frac < 0.5, 1.0, -1.0)


def homodyne_logical_expectations(rho, cfg, dx=None, min_points=200):
    """(X_H, Y_H, Z_H) from ideal homodyne marginals with GKP binning.

    Z_H bins x (period 2 sqrt(pi)), X_H bins p (same period).  Y_H bins the
    diagonal quadrature x_{pi/4} with period sqrt(2 pi); on the square code
    the logical Y acts as -exp(-i sqrt(2 pi) x_{pi/4}), so the +1 bins sit at
    the half-period points of that axis.
    """
    cfg = as_config(cfg)
    rho = np.asarray(rho, complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    step = SQRT_PI / 50 if dx is None else dx
    if step > SQRT_PI / 50:
        raise ValueError(f"homodyne grid step {step:g} coarser than sqrt(pi)/50")
    n = rho.shape[0]
    nbar = float(np.real(np.trace(rho * np.arange(n)[None, :])))
    half = max(6.0 * np.sqrt(nbar + 0.5), 8.0)
    m = max(min_points, int(np.ceil(2 * half / step)) + 1)
    x = np.linspace(-half, half, m)
    w = x[1] - x[0]
    out = []
    for theta, period, sign in ((np.pi / 2, 2 * SQRT_PI, 1.0),
                                (np.pi / 4, np.sqrt(2 * np.pi), -1.0),
                                (0.0, 2 * SQRT_PI, 1.0)):
        P = quadrature_distribution(rho, x, theta)
        vals = _bin_value(x, period)
        if sign < 0:
            vals = -vals
        out.append(float(np.sum(P * vals) * w))
    return tuple(out)
