"""Multi-start gradient optimization of ECD circuit parameters.

A batch of ``B`` circuits is propagated as vectors (never as full unitaries).
Gradients are obtained by reverse accumulation through the layers; the
displacement derivatives use divided differences over the spectrum of the
pre-diagonalized generator, so they are exact for the truncated model.

Parameters of a batch are stored as a real array ``x`` of shape
``(B, 4, N + 1)`` holding ``Re beta``, ``Im beta``, ``phi`` and ``theta``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import EcdParams, state_transfer_fidelity
from .fock import HilbertConfig, as_config, displacer, hybrid_ket

# below this |B| the divided differences are formed explicitly (see _DispBatch.grad)
_SMALL_R = 2e-2


@dataclass
class StateMap:
    """Weighted list of (initial, target) hybrid kets."""

    initial: list
    target: list
    weights: np.ndarray | None = None

    def __post_init__(self):
        if len(self.initial) == 0 or len(self.initial) != len(self.target):
            raise ValueError("state map needs matching, nonempty initial/target lists")
        self.initial = [np.asarray(v, dtype=complex) for v in self.initial]
        self.target = [np.asarray(v, dtype=complex) for v in self.target]
        for v in self.initial + self.target:
            if abs(np.linalg.norm(v) - 1) > 1e-8:
                raise ValueError("state-map kets must be normalized")
        k = len(self.initial)
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (k,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        self.weights = w

    @property
    def dim(self) -> int:
        return self.initial[0].shape[0]

    @classmethod
    def transfer(cls, psi_i, psi_t) -> "StateMap":
        return cls([psi_i], [psi_t])

    @classmethod
    def prep(cls, osc_target, qubit="g") -> "StateMap":
        """|0>|g> -> |target>|qubit>."""
        n = len(osc_target)
        vac = np.zeros(n, complex)
        vac[0] = 1
        return cls([hybrid_ket(vac, "g")], [hybrid_ket(osc_target, qubit)])


@dataclass
class OptimizerConfig:
    depth: int
    n_osc: int = 40
    batch: int = 500
    learning_rate: float = 1e-3
    steps_per_epoch: int = 100
    max_epochs: int = 50
    target_fidelity: float = 0.99
    seed: int = 0
    beta_radius: float = 1.0
    theta_range: tuple = (0.0, np.pi)
    phi_range: tuple = (-np.pi, np.pi)
    adam_b1: float = 0.9
    adam_b2: float = 0.999
    adam_eps: float = 1e-8
    cost: str = "log"  # "log": sum log(1 - F); "real": -sum_j Re <t_j|U|i_j>
    pin_final_beta: bool = False
    max_seconds: float | None = None
    # stop when the best infidelity improves by less than ``plateau_tol`` (relative)
    # over ``patience`` consecutive epochs; None disables the plateau stop
    patience: int | None = None
    plateau_tol: float = 1e-3

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.target_fidelity < 1:
            raise ValueError("target_fidelity must lie in (0, 1)")
        if self.cost not in ("log", "real"):
            raise ValueError(f"unknown cost {self.cost!r}")
        if self.beta_radius < 0:
            raise ValueError("beta_radius must be >= 0")

    @property
    def hilbert(self) -> HilbertConfig:
        return HilbertConfig(self.n_osc)


@dataclass
class OptimizationResult:
    best_params: EcdParams
    best_fidelity: float
    traces: np.ndarray  # (epochs + 1, B) fidelities, row 0 = initialization
    epochs: int
    seed: int
    termination: str
    best_index: int
    wall_time: float = 0.0
    final_x: np.ndarray | None = field(default=None, repr=False)


# -- parameter packing ---------------------------------------------------------


def pack(betas, phis, thetas) -> np.ndarray:
    betas = np.asarray(betas, complex)
    return np.stack([betas.real, betas.imag, np.asarray(phis, float), np.asarray(thetas, float)], axis=-2)


def unpack(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0, :] + 1j * x[..., 1, :], x[..., 2, :], x[..., 3, :]


def to_params(x_row) -> EcdParams:
    b, p, t = unpack(x_row)
    return EcdParams(b, p, t)


def init_params(cfg: OptimizerConfig) -> np.ndarray:
    """Random batch ``(B, 4, N+1)``; the final displacement starts at zero."""
    rng = np.random.default_rng(cfg.seed)
    B, L = cfg.batch, cfg.depth + 1
    r = cfg.beta_radius * np.sqrt(rng.uniform(size=(B, L)))
    ang = rng.uniform(-np.pi, np.pi, size=(B, L))
    betas = r * np.exp(1j * ang)
    betas[:, -1] = 0
    phis = rng.uniform(*cfg.phi_range, size=(B, L))
    thetas = rng.uniform(*cfg.theta_range, size=(B, L))
    return pack(betas, phis, thetas)


# -- batched forward / reverse pass ----------------------------------------------


def _rot(theta, phi):
    """Entries (c, s_minus, s_plus) of R_phi(theta) with R = [[c, sm], [sp, c]]."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    return c, -1j * np.exp(-1j * phi) * s, -1j * np.exp(1j * phi) * s


def _apply_rot(c, sm, sp, v):
    """v has shape (B, K, 2, n); coefficients are (B,)."""
    c = c[:, None, None]
    sm = sm[:, None, None]
    sp = sp[:, None, None]
    return np.stack([c * v[:, :, 0] + sm * v[:, :, 1], sp * v[:, :, 0] + c * v[:, :, 1]], axis=2)


def _apply_rot_dag(c, sm, sp, v):
    c = c[:, None, None]
    sm = np.conj(sm)[:, None, None]
    sp = np.conj(sp)[:, None, None]
    return np.stack([c * v[:, :, 0] + sp * v[:, :, 1], sm * v[:, :, 0] + c * v[:, :, 1]], axis=2)


def _rot_grads(theta, phi, O):
    """<mu|dR v> for d/dtheta and d/dphi given overlaps O[b, a, c] = sum conj(mu_a) v_c."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    em = np.exp(-1j * phi)
    ep = np.exp(1j * phi)
    dth = -0.5 * s * (O[:, 0, 0] + O[:, 1, 1]) - 0.5j * c * (em * O[:, 0, 1] + ep * O[:, 1, 0])
    dph = s * (-em * O[:, 0, 1] + ep * O[:, 1, 0])
    return dth, dph


def _cis(a):
    out = np.empty(a.shape, dtype=complex)
    np.cos(a, out=out.real)
    np.sin(a, out=out.imag)
    return out


class _DispBatch:
    """Per-layer displacement data for a batch of amplitudes (shape (B,)).

    Vectors carry the batch on axis 0 and the Fock index on the last axis.
    """

    def __init__(self, disp, amp):
        self.d = disp
        self.r, psi = disp.polar(amp)
        self.rot = _cis(psi[:, None] * disp.levels)  # (B, n)
        self.E = _cis(self.r[:, None] * disp.mu)  # (B, n)
        self.cos = np.cos(psi)
        self.sin = np.sin(psi)

    def _bc(self, a, ndim):
        return a.reshape(a.shape[:1] + (1,) * (ndim - 2) + a.shape[1:])

    def eig(self, v):
        """W^dag v with W = R(psi) U."""
        return _mm(self._bc(self.rot.conj(), v.ndim) * v, self.d.Uc)

    def from_eig(self, t):
        return self._bc(self.rot, t.ndim) * _mm(t, self.d.UcT)

    def grad(self, ut, vt):
        """(<u|dD/dRe|v>, <u|dD/dIm|v>) from eigenbasis vectors of shape (B, P, K, n).

        Returns two (B, P) arrays, summed over K.
        """
        d = self.d
        mu = d.mu
        E = self.E[:, None, None, :]
        uc = ut.conj()
        xd = np.einsum("bpkn,bpkn->bp", uc, mu * E * vt)
        xp = np.empty(xd.shape, dtype=complex)
        big = self.r >= _SMALL_R
        if np.any(big):
            u, v, Eb = uc[big], vt[big], E[big]
            # sum_kl u_k* P_kl F_kl v_l with F_kl = (E_k - E_l) / (i r (mu_k - mu_l))
            qv = _mm(np.concatenate([v, Eb * v], axis=1), d.QT)
            P = v.shape[1]
            t1 = np.einsum("bpkn,bpkn->bp", Eb * u, qv[:, :P])
            t2 = np.einsum("bpkn,bpkn->bp", u, qv[:, P:])
            xp[big] = (t1 - t2) / (1j * self.r[big])[:, None]
        small = ~big
        if np.any(small):
            r = self.r[small][:, None, None]
            F = _cis(0.5 * r * (mu[:, None] + mu[None, :])) * np.sinc(r * (mu[:, None] - mu[None, :]) / (2 * np.pi))
            xp[small] = np.einsum("bpki,bij,bpkj->bp", uc[small], d.P * F, vt[small])
        c = self.cos[:, None]
        s = self.sin[:, None]
        return c * xp - 1j * s * xd, 1j * c * xd + s * xp


def _mm(v, M):
    """Right-multiply the last axis by ``M`` as a single 2-d GEMM."""
    sh = v.shape
    return (v.reshape(-1, sh[-1]) @ M).reshape(sh)


def _ensure_q(disp):
    if not hasattr(disp, "QT"):
        disp.Uc = disp.U.astype(complex)
        disp.UcT = np.ascontiguousarray(disp.Uc.T)
        dm = disp.mu[:, None] - disp.mu[None, :]
        np.fill_diagonal(dm, 1.0)
        Q = disp.P / dm
        np.fill_diagonal(Q, 0.0)
        disp.QT = np.ascontiguousarray(Q.T).astype(complex)
    return disp


def forward_backward(x, smap: StateMap, n_osc: int, want_grad=True):
    """Overlaps and their parameter derivatives for a batch.

    Returns ``(z, o, G)`` where ``o[b, k] = <t_k|U_b|i_k>``, ``z = sum_k w_k o[:, k]`` and
    ``G[b, p, l] = dz_b / dx[b, p, l]`` (complex), or ``G = None``.
    Vectors have shape (B, K, 2, n) with axis 2 the qubit (g, e).
    """
    disp = _ensure_q(displacer(n_osc))
    x = np.asarray(x, float)
    Bn, _, L = x.shape
    N = L - 1
    betas, phis, thetas = unpack(x)
    K = len(smap.initial)
    v = np.broadcast_to(np.stack(smap.initial).reshape(1, K, 2, n_osc), (Bn, K, 2, n_osc)).copy()
    vins, chits, rots, dbs = [], [], [], []
    for l in range(L):
        rc = _rot(thetas[:, l], phis[:, l])
        vins.append(v)
        chi = _apply_rot(*rc, v)
        db = _DispBatch(disp, betas[:, l] / 2)
        ct = db.eig(chi)
        E = db.E[:, None, :]
        if l < N:
            # new_g = D^dag chi_e, new_e = D chi_g
            v = db.from_eig(np.stack([E.conj() * ct[:, :, 1], E * ct[:, :, 0]], axis=2))
        else:
            v = db.from_eig(E[:, None] * ct)
        chits.append(ct)
        rots.append(rc)
        dbs.append(db)
    tgt = np.stack(smap.target).reshape(K, 2, n_osc)
    o = np.einsum("kqn,bkqn->bk", tgt.conj(), v)
    z = o @ smap.weights
    if not want_grad:
        return z, o, None

    G = np.zeros((Bn, 4, L), dtype=complex)
    lam = np.broadcast_to((smap.weights[:, None, None] * tgt)[None], v.shape)
    for l in range(N, -1, -1):
        db = dbs[l]
        ct = chits[l]
        lt = db.eig(lam)
        E = db.E[:, None, :]
        if l == N:
            # out = D(B) chi on both qubit blocks
            gx, gy = db.grad(lt.reshape(Bn, 1, 2 * K, n_osc), ct.reshape(Bn, 1, 2 * K, n_osc))
            G[:, 0, l] = 0.5 * gx[:, 0]
            G[:, 1, l] = 0.5 * gy[:, 0]
            mu = db.from_eig(E.conj()[:, None] * lt)
        else:
            # d/dB of <lam_e|D chi_g> + <lam_g|D^dag chi_e>
            ut = np.stack([lt[:, :, 1], ct[:, :, 1]], axis=1)
            vt = np.stack([ct[:, :, 0], lt[:, :, 0]], axis=1)
            gx, gy = db.grad(ut, vt)
            G[:, 0, l] = 0.5 * (gx[:, 0] + np.conj(gx[:, 1]))
            G[:, 1, l] = 0.5 * (gy[:, 0] + np.conj(gy[:, 1]))
            # mu = ECD^dag lam: mu_g = D^dag lam_e, mu_e = D lam_g
            mu = db.from_eig(np.stack([E.conj() * lt[:, :, 1], E * lt[:, :, 0]], axis=2))
        rc = rots[l]
        O = np.einsum("bkan,bkcn->bac", mu.conj(), vins[l])
        dth, dph = _rot_grads(thetas[:, l], phis[:, l], O)
        G[:, 2, l] = dph
        G[:, 3, l] = dth
        lam = _apply_rot_dag(*rc, mu)
    return z, o, G


def fidelities(x, smap: StateMap, n_osc: int) -> np.ndarray:
    z, _, _ = forward_backward(x, smap, n_osc, want_grad=False)
    return np.abs(z) ** 2


def cost_and_gradient(x, smap: StateMap, n_osc: int, cost: str = "log", pin_final_beta=False):
    """Total batch cost and its gradient with respect to ``x`` (same shape).

    ``cost="log"``: C = sum_b log(1 - F_b) with F_b = |sum_k w_k <t_k|U_b|i_k>|^2
    (1 - F clamped at 1e-15).  ``cost="real"``: C = -sum_b sum_k w_k Re <t_k|U_b|i_k>.
    Also returns the per-circuit fidelities.
    """
    z, o, G = forward_backward(x, smap, n_osc)
    F = np.abs(z) ** 2
    if cost == "log":
        inf = np.maximum(1.0 - F, 1e-15)
        C = float(np.sum(np.log(inf)))
        dF = 2.0 * np.real(np.conj(z)[:, None, None] * G)
        grad = -dF / inf[:, None, None]
    elif cost == "real":
        C = float(-np.sum(np.real(z)))
        grad = -np.real(G)
    else:
        raise ValueError(f"unknown cost {cost!r}")
    if pin_final_beta:
        grad[:, :2, -1] = 0
    return C, grad, F


class Adam:
    """Element-wise Adam; each batch row evolves independently."""

    def __init__(self, shape, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, x, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mhat = self.m / (1 - self.b1 ** self.t)
        vhat = self.v / (1 - self.b2 ** self.t)
        return x - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def optimize(smap: StateMap, cfg: OptimizerConfig, x0=None, callback=None) -> OptimizationResult:
    """Adam on the batch cost; stops once any circuit reaches the target (checked per epoch)."""
    n = cfg.n_osc
    if smap.dim != 2 * n:
        raise ValueError(f"state map dimension {smap.dim} does not match 2*n_osc = {2 * n}")
    x = init_params(cfg) if x0 is None else np.array(x0, dtype=float)
    if cfg.pin_final_beta:
        x[:, :2, -1] = 0
    opt = Adam(x.shape, cfg.learning_rate, cfg.adam_b1, cfg.adam_b2, cfg.adam_eps)
    t0 = time.perf_counter()
    traces = [fidelities(x, smap, n)]
    reason = "max_epochs"
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        for _ in range(cfg.steps_per_epoch):
            _, g, _ = cost_and_gradient(x, smap, n, cfg.cost, cfg.pin_final_beta)
            x = opt.step(x, g)
        F = fidelities(x, smap, n)
        traces.append(F)
        if callback is not None:
            callback(epoch, F)
        if F.max() >= cfg.target_fidelity:
            reason = "target_reached"
            break
        if cfg.max_seconds is not None and time.perf_counter() - t0 > cfg.max_seconds:
            reason = "time_limit"
            break
        if cfg.patience is not None and epoch > cfg.patience:
            old = 1 - traces[-1 - cfg.patience].max()
            new = 1 - F.max()
            if old - new <= cfg.plateau_tol * old:
                reason = "plateau"
                break
    F = traces[-1]
    j = int(np.argmax(F))
    return OptimizationResult(
        best_params=to_params(x[j]),
        best_fidelity=float(F[j]),
        traces=np.array(traces),
        epochs=epoch,
        seed=cfg.seed,
        termination=reason,
        best_index=j,
        wall_time=time.perf_counter() - t0,
        final_x=x,
    )


def depth_sweep(smap_factory, cfg: OptimizerConfig, depths, fidelity_threshold=None):
    """Optimize at each depth in order and stop at the first that meets the threshold.

    ``smap_factory(n_osc)`` builds the map.  Returns ``(minimal_N or None, {N: result})``.
    """
    depths = list(depths)
    if not depths:
        raise ValueError("depth range is empty")
    thr = cfg.target_fidelity if fidelity_threshold is None else fidelity_threshold
    results = {}
    for N in depths:
        c = OptimizerConfig(**{**cfg.__dict__, "depth": N, "target_fidelity": thr})
        res = optimize(smap_factory(cfg.n_osc), c)
        results[N] = res
        if res.best_fidelity >= thr:
            return N, results
    return None, results


def verify_fidelity(params: EcdParams, smap: StateMap, n_osc: int) -> float:
    """Map fidelity recomputed through the circuit module (independent code path)."""
    from .circuit import apply_circuit

    z = sum(w * np.vdot(t, apply_circuit(params, i, n_osc))
            for i, t, w in zip(smap.initial, smap.target, smap.weights))
    return float(abs(z) ** 2)


GATE_PHASES = {"I": 0.0, "S": np.pi / 2, "T": np.pi / 4}


def gate_map(logical, gate: str) -> StateMap:
    """Two-state map |+Z>|g> -> |+Z>|g>, |-Z>|g> -> e^{i phase}|-Z>|g> on an orthonormalized pair."""
    from .codes import orthonormalize_pair

    if gate not in GATE_PHASES:
        raise ValueError(f"unknown gate {gate!r}; expected one of {sorted(GATE_PHASES)}")
    z, o = orthonormalize_pair(logical.zero, logical.one)
    zi, oi = hybrid_ket(z, "g"), hybrid_ket(o, "g")
    return StateMap([zi, oi], [zi, np.exp(1j * GATE_PHASES[gate]) * oi])


def logical_average_fidelity(params: EcdParams, logical, gate: str) -> float:
    """Average gate fidelity on the logical pair from the PTM of the full circuit unitary."""
    from .circuit import average_fidelity, compose_circuit, pauli_transfer_matrix, ptm_of_qubit_unitary

    n = logical.n_osc
    U = compose_circuit(params, n)
    R = pauli_transfer_matrix(U, hybrid_ket(logical.zero, "g"), hybrid_ket(logical.one, "g"))
    R_t = ptm_of_qubit_unitary(np.diag([1, np.exp(1j * GATE_PHASES[gate])]))
    return average_fidelity(R_t, R)


def optimize_gkp_gate(gate: str, delta: float, cfg: OptimizerConfig):
    """Optimize a logical S or T gate on the finite-energy GKP code.

    Uses the two-state map of :func:`gate_map` with ``cfg`` as given.  The
    map fidelity is a coherent sum over both logical states, so the relative
    phase is constrained and only the global phase is free.  Returns
    ``(result, F_avg)``.
    """
    from .codes import gkp_logical_states

    logical = gkp_logical_states(delta, cfg.n_osc)
    res = optimize(gate_map(logical, gate), cfg)
    return res, logical_average_fidelity(res.best_params, logical, gate)
