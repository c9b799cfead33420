"""Exact matrix model of the ECD gate set on qubit (x) oscillator.

A circuit of depth ``N`` is

    U = D(beta_{N+1}/2) R_{phi_{N+1}}(theta_{N+1}) ECD(beta_N) R_{phi_N}(theta_N) ... ECD(beta_1) R_{phi_1}(theta_1)

where only the ``N`` ECD gates count towards the quoted depth.  The trailing
rotation and displacement are always carried (``beta_{N+1}`` is often 0).

All hybrid matrices use the qubit-major layout of :mod:`ecdsynth.fock`.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .codes import logical_paulis, orthonormalize_pair  # noqa: F401
from .fock import HilbertConfig, TruncationWarning, as_config, displacement, displacer

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass
class EcdParams:
    """Circuit parameters; each array has length ``N + 1`` (last entry = final layer)."""

    betas: np.ndarray
    phis: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=complex))
        self.phis = np.atleast_1d(np.asarray(self.phis, dtype=float))
        self.thetas = np.atleast_1d(np.asarray(self.thetas, dtype=float))
        if not (self.betas.shape == self.phis.shape == self.thetas.shape) or self.betas.ndim != 1:
            raise ValueError("betas, phis and thetas must be 1-d arrays of equal length N+1")
        if len(self.betas) < 1:
            raise ValueError("a circuit needs at least the final layer (N >= 0)")
        for name in ("betas", "phis", "thetas"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def depth(self) -> int:
        """Number of ECD gates N."""
        return len(self.betas) - 1

    @classmethod
    def identity(cls, depth: int) -> "EcdParams":
        z = np.zeros(depth + 1)
        return cls(z.astype(complex), z.copy(), z.copy())

    def to_json(self) -> dict:
        layers = [
            {"beta_re": float(b.real), "beta_im": float(b.imag), "phi": float(p), "theta": float(t)}
            for b, p, t in zip(self.betas, self.phis, self.thetas)
        ]
        return {"depth": self.depth, "layers": layers[:-1], "final": layers[-1]}

    @classmethod
    def from_json(cls, data: dict) -> "EcdParams":
        layers = list(data["layers"]) + [data["final"]]
        for lay in layers:
            extra = set(lay) - {"beta_re", "beta_im", "phi", "theta"}
            if extra:
                raise ValueError(f"unknown layer keys: {sorted(extra)}")
        betas = [complex(lay["beta_re"], lay["beta_im"]) for lay in layers]
        return cls(betas, [lay["phi"] for lay in layers], [lay["theta"] for lay in layers])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _check_beta(beta, cfg: HilbertConfig, what="ECD"):
    half = abs(beta) / 2
    bound = cfg.alpha_max
    if half > 2 * bound:
        raise ValueError(
            f"{what}: |beta|/2 = {half:.3g} exceeds twice the displacement bound {bound:.3g} "
            f"for n_osc={cfg.n_osc}"
        )
    if half > bound:
        warnings.warn(f"{what}: |beta|/2 = {half:.3g} beyond accurate range {bound:.3g}",
                      TruncationWarning, stacklevel=3)


def rotation_2x2(theta, phi) -> np.ndarray:
    """R_phi(theta) = exp[-i theta/2 (cos(phi) sx + sin(phi) sy)]."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]])


def qubit_rotation(theta, phi, cfg) -> np.ndarray:
    cfg = as_config(cfg)
    return np.kron(rotation_2x2(theta, phi), np.eye(cfg.n_osc))


def ecd_gate(beta, cfg) -> np.ndarray:
    """ECD(beta) = D(beta/2)|e><g| + D(-beta/2)|g><e|."""
    cfg = as_config(cfg)
    _check_beta(beta, cfg)
    n = cfg.n_osc
    U = np.zeros((2 * n, 2 * n), dtype=complex)
    U[n:, :n] = displacement(beta / 2, cfg)
    U[:n, n:] = displacement(-beta / 2, cfg)
    return U


def ecd_block(beta, phi, theta, cfg) -> np.ndarray:
    """One layer ECD(beta) R_phi(theta) assembled from its four oscillator blocks."""
    cfg = as_config(cfg)
    _check_beta(beta, cfg)
    n = cfg.n_osc
    D = displacer(n).matrix(beta / 2)
    Dd = D.conj().T
    Th = theta / 2
    Ph = phi - np.pi / 2
    b = np.empty((2 * n, 2 * n), dtype=complex)
    b[:n, :n] = Dd * (np.exp(1j * Ph) * np.sin(Th))
    b[:n, n:] = Dd * np.cos(Th)
    b[n:, :n] = D * np.cos(Th)
    b[n:, n:] = -D * (np.exp(-1j * Ph) * np.sin(Th))
    return b


def final_layer(beta, phi, theta, cfg) -> np.ndarray:
    """D(beta/2) R_phi(theta) acting on both qubit blocks."""
    cfg = as_config(cfg)
    return np.kron(rotation_2x2(theta, phi), displacer(cfg.n_osc).matrix(beta / 2))


def compose_circuit(params: EcdParams, cfg) -> np.ndarray:
    """Full circuit unitary from block-form layers."""
    cfg = as_config(cfg)
    U = np.eye(2 * cfg.n_osc, dtype=complex)
    for k in range(params.depth):
        U = ecd_block(params.betas[k], params.phis[k], params.thetas[k], cfg) @ U
    return final_layer(params.betas[-1], params.phis[-1], params.thetas[-1], cfg) @ U


def compose_circuit_gates(params: EcdParams, cfg) -> np.ndarray:
    """Same unitary as :func:`compose_circuit`, built gate by gate (independent path)."""
    cfg = as_config(cfg)
    n = cfg.n_osc
    U = np.eye(2 * n, dtype=complex)
    for k in range(params.depth):
        U = qubit_rotation(params.thetas[k], params.phis[k], cfg) @ U
        U = ecd_gate(params.betas[k], cfg) @ U
    U = qubit_rotation(params.thetas[-1], params.phis[-1], cfg) @ U
    return np.kron(np.eye(2), displacement(params.betas[-1] / 2, cfg)) @ U


def apply_circuit(params: EcdParams, psi, cfg) -> np.ndarray:
    """U_ECD |psi> without forming the full unitary."""
    cfg = as_config(cfg)
    n = cfg.n_osc
    d = displacer(n)
    v = np.asarray(psi, dtype=complex).reshape(2, n).copy()
    for k in range(params.depth + 1):
        R = rotation_2x2(params.thetas[k], params.phis[k])
        v = R @ v
        B = params.betas[k] / 2
        if k < params.depth:
            g = d.apply(B, v[1], dagger=True)
            e = d.apply(B, v[0])
            v = np.stack([g, e])
        elif B != 0:
            v = d.apply(B, v)
    return v.reshape(-1)


def state_transfer_fidelity(params: EcdParams, psi_i, psi_t, cfg) -> float:
    """|<psi_t| U_ECD |psi_i>|^2."""
    out = apply_circuit(params, psi_i, cfg)
    return float(min(1.0, abs(np.vdot(psi_t, out)) ** 2))


def unitary_gate_fidelity(U, target, projector=None) -> float:
    """|Tr(P U_target^dag U) / Tr(P)|^2; ``projector=None`` means the full space."""
    U = np.asarray(U)
    target = np.asarray(target)
    if projector is None:
        val = np.trace(target.conj().T @ U) / U.shape[0]
    else:
        P = np.asarray(projector)
        if not np.allclose(P @ P, P, atol=1e-9) or not np.allclose(P, P.conj().T, atol=1e-9):
            raise ValueError("projector must be Hermitian and idempotent")
        val = np.trace(P @ target.conj().T @ U) / np.trace(P).real
    return float(min(1.0, abs(val) ** 2))


def circuit_gate_fidelity(params: EcdParams, target, projector, cfg) -> float:
    return unitary_gate_fidelity(compose_circuit(params, cfg), target, projector)


# -- logical channels ---------------------------------------------------------


def logical_kraus_block(U, zero, one) -> np.ndarray:
    """2x2 matrix <i|U|j> of a unitary on an (orthonormalized) logical pair."""
    z, o = orthonormalize_pair(zero, one)
    basis = np.stack([z, o], axis=1)
    return basis.conj().T @ np.asarray(U) @ basis


def ptm_from_block(A) -> np.ndarray:
    """PTM R_ij = Tr(s_i A s_j A^dag)/2 of the (possibly trace-decreasing) map rho -> A rho A^dag."""
    paulis = (np.eye(2), SIGMA_X, SIGMA_Y, SIGMA_Z)
    A = np.asarray(A)
    R = np.empty((4, 4))
    for j, sj in enumerate(paulis):
        out = A @ sj @ A.conj().T
        for i, si in enumerate(paulis):
            R[i, j] = 0.5 * np.real(np.trace(si @ out))
    return R


def pauli_transfer_matrix(U, zero, one) -> np.ndarray:
    """PTM of ``rho -> U rho U^dag`` restricted to the logical pair, ancilla in |g>.

    ``zero``/``one`` are hybrid kets (already tensored with the qubit state).
    Amplitude that leaves the pair (e.g. into the ancilla ``|e>`` block) shows
    up as a shrunken PTM; see :func:`logical_leakage`.
    """
    return ptm_from_block(logical_kraus_block(U, zero, one))


def logical_leakage(U, zero, one, n_osc: int) -> dict:
    """Average probability of leaving the logical pair and of ending with the ancilla in |e>."""
    z, o = orthonormalize_pair(zero, one)
    out = [np.asarray(U) @ z, np.asarray(U) @ o]
    A = logical_kraus_block(U, zero, one)
    kept = float(np.real(np.trace(A.conj().T @ A)) / 2)
    e_pop = float(np.mean([np.sum(np.abs(v[n_osc:]) ** 2) for v in out]))
    return {"logical_leakage": 1 - kept, "ancilla_e_probability": e_pop}


def average_fidelity(R_target, R_actual) -> float:
    """Average gate fidelity Tr(R_target^T R_actual)/6 + 1/3."""
    return float(np.trace(np.asarray(R_target).T @ np.asarray(R_actual)) / 6 + 1.0 / 3)


def ptm_of_qubit_unitary(u) -> np.ndarray:
    return ptm_from_block(np.asarray(u, dtype=complex))
