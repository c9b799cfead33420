"""Characteristic-function tomography: forward model, simulated measurement,
post-processing, maximum-likelihood reconstruction and marginal analysis."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.special import eval_genlaguerre, gammaln

from .codes import hermite_functions, quadrature_distribution, rotate_state
from .fock import displacer, expect, number_op, squeeze, state_fidelity, purity


@dataclass
class CharGrid:
    """Samples C(beta) on a set of points (flat arrays).

    ``shots`` is the number of averages per point (None for exact values);
    ``p_g`` is the postselection probability of the first measurement.
    """

    betas: np.ndarray
    values: np.ndarray
    shots: int | None = None
    p_g: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=complex).ravel()
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.betas.shape != self.values.shape:
            raise ValueError("betas and values must have equal length")

    def index_of(self, beta, tol=1e-9) -> int | None:
        d = np.abs(self.betas - beta)
        j = int(np.argmin(d))
        return j if d[j] < tol else None

    def value_at(self, beta) -> complex:
        j = self.index_of(beta)
        if j is None:
            raise KeyError(f"beta={beta} not on the grid")
        return complex(self.values[j])

    def hermiticity_error(self) -> float:
        """max |C(-beta) - C*(beta)| over points whose mirror is present."""
        err = 0.0
        for b, c in zip(self.betas, self.values):
            j = self.index_of(-b)
            if j is not None:
                err = max(err, abs(self.values[j] - np.conj(c)))
        return err

    def to_csv(self, path):
        shots = -1 if self.shots is None else self.shots
        data = np.column_stack([self.betas.real, self.betas.imag, self.values.real,
                                self.values.imag, np.full(len(self.betas), shots)])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="beta_re,beta_im,C_re,C_im,n_shots", comments="")

    @classmethod
    def from_csv(cls, path):
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        shots = int(d[0, 4]) if len(d) and d[0, 4] >= 0 else None
        return cls(d[:, 0] + 1j * d[:, 1], d[:, 2] + 1j * d[:, 3], shots)


# -- grids ---------------------------------------------------------------------------


def default_extent(rho) -> float:
    """max(4, 1.5 * radius) with radius = sqrt(2 <n> + 1)."""
    rho = _as_dm(rho)
    nbar = float(np.real(expect(number_op(rho.shape[0]), rho)))
    return max(4.0, 1.5 * np.sqrt(2 * nbar + 1))


def half_grid(extent: float, n_im: int = 81, n_re: int = 41) -> np.ndarray:
    """Points with Re(beta) >= 0 on an ``n_re`` x ``n_im`` rectangle."""
    re = np.linspace(0, extent, n_re)
    im = np.linspace(-extent, extent, n_im)
    R, I = np.meshgrid(re, im, indexing="ij")
    return (R + 1j * I).ravel()


def full_grid(extent: float, n: int = 81) -> np.ndarray:
    x = np.linspace(-extent, extent, n)
    R, I = np.meshgrid(x, x, indexing="ij")
    return (R + 1j * I).ravel()


# -- forward model ----------------------------------------------------------------


def _as_dm(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    return rho


def displacement_elements(betas, n: int) -> np.ndarray:
    """<m|D(beta)|k> for m, k < n from the Laguerre closed form (no truncation error).

    For m >= k: sqrt(k!/m!) beta^{m-k} e^{-|beta|^2/2} L_k^{(m-k)}(|beta|^2);
    for m < k: (-beta*)^{k-m} with the roles swapped.  Shape (len(betas), n, n).
    """
    b = np.asarray(betas, dtype=complex).ravel()
    x = np.abs(b) ** 2
    out = np.empty((len(b), n, n), dtype=complex)
    env = np.exp(-x / 2)
    m_idx, k_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    lo = np.minimum(m_idx, k_idx)
    d = np.abs(m_idx - k_idx)
    pref = np.exp(0.5 * (gammaln(lo + 1) - gammaln(lo + d + 1)))
    lag = eval_genlaguerre(lo[None], d[None], x[:, None, None])
    pw_lower = b[:, None, None] ** d[None]
    pw_upper = (-np.conj(b))[:, None, None] ** d[None]
    pw = np.where((m_idx >= k_idx)[None], pw_lower, pw_upper)
    out[:] = pref[None] * pw * lag * env[:, None, None]
    return out


def char_function(rho, betas, route: str = "laguerre") -> CharGrid:
    """C(beta) = Tr(D(beta) rho).

    ``route='laguerre'`` uses exact matrix elements; ``route='fock'`` uses the
    truncated displacement matrices of :mod:`ecdsynth.fock`.
    """
    rho = _as_dm(rho)
    n = rho.shape[0]
    betas = np.asarray(betas, dtype=complex).ravel()
    if route == "laguerre":
        vals = np.empty(len(betas), dtype=complex)
        for s in range(0, len(betas), 512):
            D = displacement_elements(betas[s:s + 512], n)
            vals[s:s + 512] = np.einsum("bmk,km->b", D, rho)
    elif route == "fock":
        d = displacer(n)
        vals = np.array([np.trace(d.matrix(b) @ rho) for b in betas])
    else:
        raise ValueError(f"unknown route {route!r}")
    return CharGrid(betas, vals)


# -- simulated measurement --------------------------------------------------------


def simulate_tomography(rho_joint, betas, shots: int | None = 1280, theta_prime_0: float = 0.0,
                        readout_error: float = 0.0, n_osc: int | None = None,
                        rng=None) -> CharGrid:
    """Ramsey-embedded conditional-displacement measurement of C(beta).

    The first qubit measurement is postselected on |g>; the tomography gate
    adds the phase exp(-i |beta|^2 theta'_0).  With finite ``shots`` each of
    <sigma_x> = Re C and <sigma_y> = -Im C is sampled as +-1 outcomes, half of
    the shots with the first pi/2 pulse sign flipped; ``readout_error`` flips
    each recorded outcome.
    """
    rho_joint = _as_dm(rho_joint)
    if n_osc is None:
        n_osc = rho_joint.shape[0] // 2
    if rho_joint.shape[0] == 2 * n_osc:
        blk = rho_joint[:n_osc, :n_osc]
        p_g = float(np.real(np.trace(blk)))
        rho = blk / p_g
    else:
        rho, p_g = rho_joint, 1.0
    betas = np.asarray(betas, dtype=complex).ravel()
    C = char_function(rho, betas).values * np.exp(-1j * np.abs(betas) ** 2 * theta_prime_0)
    if shots is None:
        vals = C * (1 - 2 * readout_error)
        return CharGrid(betas, vals, None, p_g)
    rng = np.random.default_rng(rng)
    sx = _sample(np.real(C), shots, readout_error, rng)
    sy = _sample(-np.imag(C), shots, readout_error, rng)
    return CharGrid(betas, sx - 1j * sy, shots, p_g)


def _sample(expval, shots, readout_error, rng):
    """Mean of +-1 outcomes; the pi/2 sign alternation splits shots in two halves."""
    expval = np.clip(expval, -1, 1)
    h1 = shots // 2
    h2 = shots - h1
    out = 0.0
    for sign, h in ((1, h1), (-1, h2)):
        if h == 0:
            continue
        p_plus = (1 + sign * expval) / 2
        p_plus = p_plus * (1 - readout_error) + (1 - p_plus) * readout_error
        k = rng.binomial(h, p_plus)
        out = out + sign * (2 * k - h)
    return out / shots


# -- post-processing ----------------------------------------------------------------


def postprocess(raw: CharGrid, theta_prime_0: float = 0.0) -> CharGrid:
    """Mirror a Re(beta) >= 0 half grid, undo the tomography phase, scale to C(0) = 1.

    Points on the Re(beta) = 0 axis are replaced by the average of C(beta) and
    C*(-beta) so the output satisfies C(-beta) = C*(beta) exactly.
    """
    j0 = raw.index_of(0)
    if j0 is None:
        raise ValueError("raw grid has no beta = 0 sample")
    b = raw.betas
    v = raw.values * np.exp(1j * np.abs(b) ** 2 * theta_prime_0)
    pts = {}
    for bb, vv in zip(b, v):
        pts[_key(bb)] = (bb, vv)
    out_b, out_v = [], []
    seen = set()
    for k, (bb, vv) in pts.items():
        if k in seen:
            continue
        mk = _key(-bb)
        if mk in pts:
            other = pts[mk][1]
            val = 0.5 * (vv + np.conj(other))
        else:
            val = vv
        out_b.append(bb)
        out_v.append(val)
        seen.add(k)
        if mk != k:
            out_b.append(-bb)
            out_v.append(np.conj(val))
            seen.add(mk)
    out_b = np.array(out_b)
    out_v = np.array(out_v)
    c0 = out_v[np.argmin(np.abs(out_b))].real
    if c0 == 0:
        raise ValueError("C(0) sample is zero; cannot normalize")
    return CharGrid(out_b, out_v / c0, raw.shots, raw.p_g, {"c0_raw": c0, **raw.meta})


def _key(b, ndig=9):
    return (round(float(np.real(b)), ndig) + 0.0, round(float(np.imag(b)), ndig) + 0.0)


# -- reconstruction -----------------------------------------------------------------


@dataclass
class ReconstructionConfig:
    """``basis_zeta`` is the squeezing parameter of the squeezed-Fock basis (0 for Fock)."""

    dims: tuple = (10, 15, 20, 25, 30, 35, 40)
    basis_zeta: float = 0.0
    max_iter: int = 3000
    tol: float = 1e-9
    sweep_tol: float = 2e-3
    rotation_search: bool = False
    max_rotation_deg: float = 5.0
    embed_extra: int = 40

    def __post_init__(self):
        if min(self.dims) < 2:
            raise ValueError("reconstruction dimensions must be >= 2")


@dataclass
class Reconstruction:
    rho: np.ndarray  # Fock basis
    dim: int
    iterations: int
    objective: list
    rotation: float = 0.0
    fidelity: float | None = None
    purity: float = 0.0
    sweep: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"fidelity": self.fidelity, "purity": self.purity, "dimension": self.dim,
                "iterations": self.iterations, "post_rotation_rad": self.rotation,
                "sweep": {str(k): v for k, v in self.sweep.items()}}


def _basis(dim: int, zeta: float, n_big: int) -> np.ndarray:
    """Columns are the first ``dim`` (squeezed-)Fock states in an ``n_big`` Fock space."""
    V = np.zeros((n_big, dim), dtype=complex)
    V[:dim, :dim] = np.eye(dim)
    if zeta:
        V = squeeze(zeta, n_big) @ V
    return V


def _design(betas, dim, zeta, n_big):
    """Rows A[b] with C_b = sum_{mk} A[b, k, m] rho[m, k] in the reduced basis."""
    V = _basis(dim, zeta, n_big)
    rows = []
    for s in range(0, len(betas), 256):
        D = displacement_elements(betas[s:s + 256], n_big)
        rows.append(np.einsum("im,bij,jk->bmk", V.conj(), D, V) if zeta else D[:, :dim, :dim])
    return np.concatenate(rows), V


def _project_density(H):
    """Euclidean projection of a Hermitian matrix onto {rho >= 0, Tr rho = 1}."""
    w, U = np.linalg.eigh(0.5 * (H + H.conj().T))
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(u) + 1) > (css - 1))[0][-1]
    tau = (css[k] - 1) / (k + 1)
    lam = np.maximum(w - tau, 0)
    return (U * lam) @ U.conj().T


def _spectral_norm_sq(M, iters=50, seed=0):
    """Largest eigenvalue of M^H M by power iteration (slightly over-estimated for safety)."""
    v = np.random.default_rng(seed).normal(size=M.shape[1]) + 0j
    lam = 0.0
    for _ in range(iters):
        w = M.conj().T @ (M @ v)
        lam_new = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
        if abs(lam_new - lam) < 1e-6 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return 1.01 * lam


def mle_fit(grid: CharGrid, dim: int, zeta: float = 0.0, max_iter=3000, tol=1e-9,
            n_big: int | None = None, design=None):
    """Least-squares (Gaussian-likelihood) fit over density matrices.

    Minimizes the convex f(rho) = sum_b |C_b - Tr(D_b rho)|^2 over the
    PSD unit-trace set with monotone accelerated projected gradient (step
    1/L, L the gradient Lipschitz constant).  The accepted iterate never
    increases f, so the likelihood is non-decreasing.  Stops when the
    iterate moves by less than ``tol`` (Frobenius norm).  ``design`` may pass
    a precomputed ``(A, V)`` of at least ``dim`` columns.
    """
    n_big = n_big or (dim + 40 if zeta else dim)
    A, V = design if design is not None else _design(grid.betas, dim, zeta, n_big)
    A = np.ascontiguousarray(A[:, :dim, :dim])
    V = V[:, :dim]
    M = A.reshape(len(A), -1)  # C = M @ vec(rho^T)
    y = grid.values
    L = 2 * _spectral_norm_sq(M)

    def fwd(r):
        return M @ r.T.ravel()

    def grad(Mr):
        # gradient with respect to rho (M^H res is the gradient on rho^T)
        return 2 * (M.conj().T @ (Mr - y)).reshape(dim, dim).T

    def fval(Mr):
        res = Mr - y
        return float(np.vdot(res, res).real)

    x = np.eye(dim, dtype=complex) / dim
    Mx = fwd(x)
    fx = fval(Mx)
    x_old, Mx_old = x, Mx
    yk, My, t = x, Mx, 1.0
    obj = [fx]
    it = 0
    for it in range(1, max_iter + 1):
        z = _project_density(yk - grad(My) / L)
        Mz = fwd(z)
        fz = fval(Mz)
        x_old, Mx_old = x, Mx
        if fz <= fx:
            x, Mx, fx = z, Mz, fz
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        c1, c2 = t / t_new, (t - 1) / t_new
        yk = x + c1 * (z - x) + c2 * (x - x_old)
        My = Mx + c1 * (Mz - Mx) + c2 * (Mx - Mx_old)
        t = t_new
        obj.append(fx)
        if fz <= fx and np.linalg.norm(x - x_old) < tol:
            break
    return V @ x @ V.conj().T, it, obj


def mle_reconstruct(grid: CharGrid, cfg: ReconstructionConfig | None = None, target=None) -> Reconstruction:
    """Dimension-swept reconstruction.

    The dimension is the first in ``cfg.dims`` whose fidelity (when a target is
    given) and purity change by less than ``sweep_tol`` at the next size.
    """
    cfg = cfg or ReconstructionConfig()
    dims = sorted(cfg.dims)
    n_big = max(dims) + (cfg.embed_extra if cfg.basis_zeta else 0)
    design = _design(grid.betas, dims[-1], cfg.basis_zeta, n_big)
    results = {}
    chosen = None
    prev = None
    for d in dims:
        rho, it, obj = mle_fit(grid, d, cfg.basis_zeta, cfg.max_iter, cfg.tol, n_big, design)
        F = _fid(target, rho)
        P = purity(rho)
        results[d] = (rho, it, obj, F, P)
        if prev is not None:
            pF, pP = results[prev][3], results[prev][4]
            stable = abs(P - pP) < cfg.sweep_tol and (F is None or abs(F - pF) < cfg.sweep_tol)
            if stable:
                chosen = prev
                break
        prev = d
    if chosen is None:
        chosen = dims[-1]
    rho, it, obj, F, P = results[chosen]
    rot = 0.0
    if cfg.rotation_search and target is not None:
        rot, rho = _best_rotation(rho, target, np.deg2rad(cfg.max_rotation_deg))
        F = _fid(target, rho)
    sweep = {d: {"fidelity": r[3], "purity": r[4], "iterations": r[1]} for d, r in results.items()}
    return Reconstruction(rho, chosen, it, obj, rot, F, purity(rho), sweep)


def _fid(target, rho):
    if target is None:
        return None
    n = rho.shape[0]
    tt = np.asarray(target, dtype=complex)
    m = min(len(tt), n)
    if tt.ndim == 1:
        t = np.zeros(n, dtype=complex)
        t[:m] = tt[:m]
    else:
        t = np.zeros((n, n), dtype=complex)
        t[:m, :m] = tt[:m, :m]
    return state_fidelity(t, rho)


def _best_rotation(rho, target, max_angle):
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda th: -_fid(target, rotate_state(rho, th)),
                          bounds=(-max_angle, max_angle), method="bounded",
                          options={"xatol": 1e-6})
    return float(res.x), rotate_state(rho, res.x)


# -- marginals ----------------------------------------------------------------------------


def _gauss(x, A, mu, s):
    return A * np.exp(-0.5 * ((x - mu) / s) ** 2)


def squeezed_angle(rho) -> float:
    """Rotation theta minimizing the variance of x_theta (analytic covariance)."""
    rho = _as_dm(rho)
    n = rho.shape[0]
    from .fock import annihilation

    a = annihilation(n)
    ea = expect(a, rho)
    ea2 = expect(a @ a, rho)
    # Var(x_theta) = const + Re(e^{-2 i theta} (<a^2> - <a>^2))
    c = ea2 - ea ** 2
    # minimised when e^{-2i theta} c is real negative
    return float(0.5 * (np.angle(c) - np.pi))


def squeezing_from_marginal(rho, align: bool = True, max_align_deg: float | None = None,
                            x=None) -> tuple[float, dict]:
    """Squeezing in dB from a Gaussian fit of the position marginal.

    Returns ``(db, info)`` with db = -10 log10(2 sigma^2) (vacuum variance 1/2).
    """
    rho = _as_dm(rho)
    theta = squeezed_angle(rho) if align else 0.0
    if max_align_deg is not None:
        lim = np.deg2rad(max_align_deg)
        theta = float(np.clip(np.angle(np.exp(1j * theta)), -lim, lim))
    if x is None:
        x = np.linspace(-8, 8, 1601) / np.sqrt(2)
    P = quadrature_distribution(rho, x, theta)
    mu0 = np.sum(x * P) / np.sum(P)
    s0 = np.sqrt(max(np.sum((x - mu0) ** 2 * P) / np.sum(P), 1e-6))
    try:
        with warnings.catch_warnings():
            # exact marginals give a singular covariance; only the optimum is used
            warnings.simplefilter("ignore", OptimizeWarning)
            (A, mu, s), _ = curve_fit(_gauss, x, P, p0=[P.max(), mu0, s0], maxfev=20000)
    except RuntimeError as exc:
        raise RuntimeError(f"Gaussian fit failed: {exc}") from exc
    s = abs(s)
    db = -10 * np.log10(2 * s ** 2)
    return float(db), {"sigma": s, "mu": mu, "amplitude": A, "angle": theta, "x": x, "P": P,
                       "variance_direct": float(s0 ** 2)}


def fisher_information(rho, theta: float = 0.0, x=None, floor: float = 1e-12) -> float:
    """I_c = 2 int (d_x log P)^2 P dx for the x_theta marginal.

    The derivative is taken analytically through the Hermite-function expansion.
    """
    rho = rotate_state(_as_dm(rho), theta)
    n = rho.shape[0]
    if x is None:
        nbar = float(np.real(expect(number_op(n), rho)))
        half = max(8 / np.sqrt(2), 6 * np.sqrt(nbar + 0.5))
        x = np.linspace(-half, half, 4001)
    psi = hermite_functions(n + 1, x)
    k = np.arange(n)
    # psi_k' = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}
    dpsi = -np.sqrt((k + 1) / 2)[:, None] * psi[1:n + 1]
    dpsi[1:] += np.sqrt(k[1:] / 2)[:, None] * psi[:n - 1]
    psi = psi[:n]
    P = np.real(np.einsum("mx,mn,nx->x", psi, rho, psi))
    dP = 2 * np.real(np.einsum("mx,mn,nx->x", dpsi, rho, psi))
    P = np.maximum(P, floor)
    return float(2 * np.trapezoid(dP ** 2 / P, x))


def fisher_from_fit(rho, **kw) -> float:
    """Gaussian shortcut I_c = 2 / sigma^2 using the fitted marginal width."""
    _, info = squeezing_from_marginal(rho, **kw)
    return 2 / info["sigma"] ** 2


def position_variance(rho, theta: float = 0.0) -> float:
    rho = rotate_state(_as_dm(rho), theta)
    n = rho.shape[0]
    from .fock import quadratures

    q, _ = quadratures(n)
    m = np.real(expect(q, rho))
    return float(np.real(expect(q @ q, rho)) - m ** 2)
