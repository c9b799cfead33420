"""Truncated Fock-space linear algebra.

Operators, kets and density matrices are plain complex ``numpy`` arrays.
Hybrid qubit-oscillator objects use a qubit-major layout: index
``q * n_osc + m`` with ``q = 0`` for ``|g>`` and ``q = 1`` for ``|e>``, so a
hybrid operator is a 2x2 grid of oscillator blocks ``[[gg, ge], [eg, ee]]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class TruncationWarning(UserWarning):
    """Raised when a state or operator leans on the top (guard) Fock levels."""


GUARD_WARN_LEVEL = 1e-6


@dataclass(frozen=True)
class HilbertConfig:
    """Oscillator truncation settings.

    ``guard_levels`` defaults to 20% of ``n_osc``; those top levels carry no
    intended amplitude and are monitored for leakage.
    """

    n_osc: int
    guard_levels: int | None = None
    tol_unitary: float = 1e-8
    guard: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_osc < 2:
            raise ValueError(f"n_osc must be >= 2, got {self.n_osc}")
        guard = int(0.2 * self.n_osc) if self.guard_levels is None else self.guard_levels
        if not 0 <= guard < self.n_osc:
            raise ValueError(f"guard_levels must lie in [0, n_osc), got {guard}")
        if not self.tol_unitary > 0:
            raise ValueError("tol_unitary must be positive")
        object.__setattr__(self, "guard", int(guard))

    @property
    def n_active(self) -> int:
        """Number of non-guard levels."""
        return self.n_osc - self.guard

    @property
    def alpha_max(self) -> float:
        """Largest |alpha| for which displacements are accuracy-guaranteed."""
        return float(np.sqrt(self.n_active / 4.0))


def as_config(cfg) -> HilbertConfig:
    if isinstance(cfg, HilbertConfig):
        return cfg
    return HilbertConfig(int(cfg))


# -- elementary operators ----------------------------------------------------


@lru_cache(maxsize=64)
def _annihilation(n: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)
    a.setflags(write=False)
    return a


def annihilation(cfg) -> np.ndarray:
    """Annihilation operator, sqrt(n) on the first superdiagonal."""
    return _annihilation(as_config(cfg).n_osc).copy()


def creation(cfg) -> np.ndarray:
    return annihilation(cfg).conj().T


def number_op(cfg) -> np.ndarray:
    n = as_config(cfg).n_osc
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def quadratures(cfg) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(q, p)`` with ``q = (a^dag + a)/sqrt2`` and ``p = i(a^dag - a)/sqrt2``."""
    a = annihilation(cfg)
    ad = a.conj().T
    return (ad + a) / np.sqrt(2), 1j * (ad - a) / np.sqrt(2)


def rotation_diag(phi, n: int) -> np.ndarray:
    """Diagonal of exp(i phi a^dag a); ``phi`` may be an array (batched)."""
    phi = np.asarray(phi, dtype=float)
    return np.exp(1j * phi[..., None] * np.arange(n))


# -- displacement ------------------------------------------------------------


class Displacer:
    """Batched displacement operators from a single pre-diagonalization.

    The generator for an imaginary argument, ``i r (a + a^dag)``, is
    diagonalized once (``a + a^dag = U diag(mu) U^T`` with real ``U``).  Any
    other direction follows from a phase-space rotation, which commutes with
    truncation, so

        D(alpha) = R(psi) U diag(exp(i r mu)) U^T R(psi)^dag,
        alpha = i r exp(i psi),  R(psi) = exp(i psi a^dag a).

    This is the exact exponential of the truncated generator.
    """

    def __init__(self, n_osc: int):
        self.n = int(n_osc)
        a = _annihilation(self.n).real
        mu, U = np.linalg.eigh(a + a.T)
        self.mu = mu
        self.U = U
        # a^dag - a in the eigenbasis of (a + a^dag): real antisymmetric
        self.P = U.T @ (a.T - a) @ U
        self.levels = np.arange(self.n)

    @staticmethod
    def polar(alpha):
        """Split ``alpha = i r exp(i psi)`` into ``(r, psi)``."""
        alpha = np.asarray(alpha, dtype=complex)
        return np.abs(alpha), np.angle(alpha) - np.pi / 2

    def matrix(self, alpha) -> np.ndarray:
        """D(alpha) for scalar or array ``alpha`` (shape ``alpha.shape + (n, n)``)."""
        r, psi = self.polar(alpha)
        ph = np.exp(1j * r[..., None] * self.mu)
        core = np.einsum("ik,...k,jk->...ij", self.U, ph, self.U)
        rot = rotation_diag(psi, self.n)
        return rot[..., :, None] * core * rot[..., None, :].conj()

    def apply(self, alpha, vecs, dagger: bool = False) -> np.ndarray:
        """Apply D(alpha) (or its adjoint) to vectors along the last axis.

        ``alpha`` broadcasts against ``vecs.shape[:-1]``.
        """
        r, psi = self.polar(alpha)
        rot = rotation_diag(psi, self.n)
        sign = -1.0 if dagger else 1.0
        ph = np.exp(sign * 1j * r[..., None] * self.mu)
        t = (rot.conj() * vecs) @ self.U
        t = t * ph
        return rot * (t @ self.U.T)

    def to_eigenbasis(self, alpha, vecs) -> np.ndarray:
        """W^dag v with W = R(psi) U, the eigenbasis of the generator at alpha."""
        _, psi = self.polar(alpha)
        rot = rotation_diag(psi, self.n)
        return (rot.conj() * vecs) @ self.U

    def derivative_kernels(self, alpha):
        """Eigenbasis matrices for dD/dRe(alpha) and dD/dIm(alpha).

        Returns ``(Kx, Ky)`` such that ``u^dag (dD/dx) v = (W^dag u)^dag Kx (W^dag v)``
        (Daleckii-Krein divided differences of exp over the generator spectrum).
        """
        r, psi = self.polar(alpha)
        mu = self.mu
        half = 0.5 * r[..., None, None] * (mu[:, None] - mu[None, :])
        F = np.exp(0.5j * r[..., None, None] * (mu[:, None] + mu[None, :])) * np.sinc(half / np.pi)
        c = np.cos(psi)[..., None, None]
        s = np.sin(psi)[..., None, None]
        dmu = np.diag(mu)
        # W^dag (a^dag - a) W and W^dag i(a^dag + a) W
        g1 = c * self.P - 1j * s * dmu
        g2 = 1j * c * dmu + s * self.P
        return g1 * F, g2 * F


@lru_cache(maxsize=32)
def displacer(n_osc: int) -> Displacer:
    return Displacer(n_osc)


def _check_alpha(alpha, cfg: HilbertConfig) -> complex:
    alpha = complex(alpha)
    if not np.isfinite(alpha.real) or not np.isfinite(alpha.imag):
        raise ValueError(f"displacement amplitude must be finite, got {alpha}")
    if abs(alpha) ** 2 > cfg.n_active / 4.0:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds the accuracy bound "
            f"{cfg.n_active / 4.0:.3g} for n_osc={cfg.n_osc}",
            TruncationWarning,
            stacklevel=3,
        )
    return alpha


def displacement(alpha, cfg) -> np.ndarray:
    """D(alpha) = exp(alpha a^dag - alpha* a) on the truncated space."""
    cfg = as_config(cfg)
    alpha = _check_alpha(alpha, cfg)
    return displacer(cfg.n_osc).matrix(alpha)


def expm_antihermitian(G: np.ndarray) -> np.ndarray:
    """exp(G) for anti-Hermitian ``G`` via the Hermitian eigendecomposition of -iG."""
    H = -1j * G
    H = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * w)) @ V.conj().T


def squeeze(zeta, cfg) -> np.ndarray:
    """S(zeta) = exp((zeta* a^2 - zeta a^dag^2)/2)."""
    cfg = as_config(cfg)
    a = annihilation(cfg)
    a2 = a @ a
    G = 0.5 * (np.conj(zeta) * a2 - zeta * a2.conj().T)
    return expm_antihermitian(G)


def squeezing_db(zeta) -> float:
    """Squeezing level 20 log10(e^|zeta|) in dB."""
    return float(20.0 * np.log10(np.exp(abs(zeta))))


def zeta_from_db(db: float) -> float:
    return float(db * np.log(10.0) / 20.0)


# -- states ------------------------------------------------------------------


def guard_population(ket, cfg) -> float:
    """Population in the top ``guard_levels`` Fock levels of an oscillator or hybrid ket."""
    cfg = as_config(cfg)
    if cfg.guard == 0:
        return 0.0
    psi = np.asarray(ket).reshape(-1, cfg.n_osc)
    return float(np.sum(np.abs(psi[:, cfg.n_active:]) ** 2))


def _finish_ket(psi, cfg: HilbertConfig, what: str) -> np.ndarray:
    psi = psi / np.linalg.norm(psi)
    pop = guard_population(psi, cfg)
    if pop > GUARD_WARN_LEVEL:
        warnings.warn(
            f"{what}: guard-band population {pop:.2e} exceeds {GUARD_WARN_LEVEL:g}",
            TruncationWarning,
            stacklevel=3,
        )
    return psi


def fock_state(n: int, cfg) -> np.ndarray:
    cfg = as_config(cfg)
    if not 0 <= n < cfg.n_active:
        raise ValueError(f"Fock level {n} outside the non-guard range [0, {cfg.n_active})")
    psi = np.zeros(cfg.n_osc, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_state(alpha, cfg) -> np.ndarray:
    cfg = as_config(cfg)
    alpha = _check_alpha(alpha, cfg)
    psi = displacer(cfg.n_osc).apply(alpha, fock_state(0, cfg))
    return _finish_ket(psi, cfg, "coherent_state")


def squeezed_vacuum(zeta, cfg) -> np.ndarray:
    cfg = as_config(cfg)
    psi = squeeze(zeta, cfg)[:, 0]
    return _finish_ket(psi, cfg, "squeezed_vacuum")


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def ket2dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def is_density_matrix(rho, atol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -1e-9)


def expect(op, state) -> complex:
    """<op> for a ket (1-d) or density matrix (2-d)."""
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


def state_fidelity(target, rho) -> float:
    """F = <psi_t| rho |psi_t>; ``rho`` may also be given as a ket.

    A density-matrix ``target`` gives the Uhlmann fidelity
    (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2.
    """
    target = np.asarray(target)
    rho = np.asarray(rho)
    if target.shape[0] != rho.shape[0]:
        raise ValueError(f"dimension mismatch: target {target.shape[0]} vs state {rho.shape[0]}")
    if target.ndim == 2:
        if rho.ndim == 1:
            return float(np.real(np.vdot(rho, target @ rho)))
        w, U = np.linalg.eigh(0.5 * (target + target.conj().T))
        s = (U * np.sqrt(np.clip(w, 0, None))) @ U.conj().T
        m = np.linalg.eigvalsh(s @ rho @ s)
        return float(np.sum(np.sqrt(np.clip(m, 0, None))) ** 2)
    if rho.ndim == 1:
        return float(abs(np.vdot(target, rho)) ** 2)
    return float(np.real(np.vdot(target, rho @ target)))


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


# -- hybrid helpers ------------------------------------------------------------


def qubit_ket(label: str) -> np.ndarray:
    return {"g": np.array([1, 0], complex), "e": np.array([0, 1], complex)}[label]


def hybrid_ket(osc, qubit="g") -> np.ndarray:
    """Qubit-major product ket |qubit> (x) |osc>."""
    q = qubit_ket(qubit) if isinstance(qubit, str) else np.asarray(qubit, complex)
    return np.kron(q, np.asarray(osc, dtype=complex))


def project_qubit(rho_joint, n_osc: int, qubit: int = 0):
    """Oscillator state after projecting the qubit on ``|g>`` (0) or ``|e>`` (1).

    Returns ``(rho_osc, probability)``; accepts a hybrid ket or density matrix.
    """
    x = np.asarray(rho_joint)
    sl = slice(qubit * n_osc, (qubit + 1) * n_osc)
    if x.ndim == 1:
        block = np.outer(x[sl], x[sl].conj())
    else:
        block = x[sl, sl]
    p = float(np.real(np.trace(block)))
    if p <= 0:
        return np.zeros((n_osc, n_osc), complex), 0.0
    return block / p, p
