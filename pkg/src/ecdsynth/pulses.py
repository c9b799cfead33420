"""Compilation of ECD circuit parameters into sampled drive envelopes.

Units: seconds and angular frequencies (rad/s) throughout.  Drives are held
constant on each ``dt`` sample interval (zero-order hold); a trajectory sampled
on ``M`` drive samples has ``M + 1`` points.

Conditional trajectories are labelled by the qubit state at the *start* of the
sequence: ``alpha_g`` is the branch that begins in |g>.  Each qubit pi pulse
swaps the right-hand side used by a branch.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .circuit import EcdParams
from .kernels import integrate

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class SystemParams:
    """Hamiltonian constants, loss and pulse-shape limits.

    ``delta=None`` selects the symmetric frame ``chi / 2``.
    """

    chi: float = TWO_PI * 32.8e3
    chi_prime: float = TWO_PI * 1.5
    kerr: float = TWO_PI * 0.5  # K_c; the measured 2 K_c / 2pi is 1 Hz
    anharmonicity: float = TWO_PI * 193e6
    delta: float | None = None
    kappa: float = 1 / 436e-6
    drive_max: float = TWO_PI * 400e6
    sigma_d: float = 11e-9
    t_d: float = 44e-9
    sigma_q: float = 6e-9
    t_q: float = 24e-9
    dt: float = 1e-9

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        for name in ("t_d", "t_q"):
            ratio = getattr(self, name) / self.dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(f"{name} must be a positive multiple of dt")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    @property
    def frame_detuning(self) -> float:
        return self.chi / 2 if self.delta is None else self.delta

    @property
    def n_d(self) -> int:
        return int(round(self.t_d / self.dt))

    @property
    def n_q(self) -> int:
        return int(round(self.t_q / self.dt))

    def replace(self, **kw) -> "SystemParams":
        return SystemParams(**{**asdict(self), **kw})

    def linear(self) -> "SystemParams":
        """Same system with the higher-order nonlinearities switched off."""
        return self.replace(chi_prime=0.0, kerr=0.0)

    def to_json(self) -> dict:
        return asdict(self)


def gaussian(sigma: float, length: float, dt: float) -> np.ndarray:
    """Truncated Gaussian sampled at interval midpoints, unit peak."""
    n = int(round(length / dt))
    t = (np.arange(n) + 0.5) * dt - length / 2
    return np.exp(-0.5 * (t / sigma) ** 2)


def displacement_shape(sys: SystemParams) -> np.ndarray:
    return gaussian(sys.sigma_d, sys.t_d, sys.dt)


def qubit_shape(sys: SystemParams) -> np.ndarray:
    return gaussian(sys.sigma_q, sys.t_q, sys.dt)


# -- trajectories -------------------------------------------------------------


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{what}: trajectory diverged (non-finite values)")
    return a


def solve_frame_trajectory(eps, sys: SystemParams, alpha0=0.0, substeps=1) -> np.ndarray:
    """Classical response of the frame, qubit-independent (ground-state right-hand side)."""
    eps = np.ascontiguousarray(eps, dtype=complex)
    z = np.zeros(len(eps), dtype=np.int8)
    a = integrate(eps, z, sys.dt, sys.frame_detuning, sys.kerr, sys.kappa, sys.chi,
                  sys.chi_prime, complex(alpha0), substeps)
    return _check_finite(a, "frame")


@dataclass
class Trajectory:
    t: np.ndarray
    alpha_g: np.ndarray
    alpha_e: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        """gamma = (alpha_g + alpha_e) / 2."""
        return 0.5 * (self.alpha_g + self.alpha_e)

    @property
    def conditional(self) -> np.ndarray:
        """delta = (alpha_g - alpha_e) / 2."""
        return 0.5 * (self.alpha_g - self.alpha_e)

    def at(self, time: float) -> tuple[complex, complex]:
        """Linear interpolation of both branches."""
        return (complex(np.interp(time, self.t, self.alpha_g.real) + 1j * np.interp(time, self.t, self.alpha_g.imag)),
                complex(np.interp(time, self.t, self.alpha_e.real) + 1j * np.interp(time, self.t, self.alpha_e.imag)))


def _z_profile(m: int, flips) -> np.ndarray:
    """0/1 per interval for the branch starting in |g>, toggled at each flip index."""
    z = np.zeros(m, dtype=np.int8)
    for f in sorted(flips):
        if not 0 <= f <= m:
            raise ValueError(f"pi pulse index {f} outside the sequence (0..{m})")
        z[f:] ^= 1
    return z


def solve_conditional_trajectories(eps, pi_indices, sys: SystemParams, start=(0.0, 0.0),
                                   substeps=1) -> Trajectory:
    """Ground/excited semiclassical branches with right-hand sides swapped at each pi pulse.

    ``pi_indices`` are sample indices (time / dt) of instantaneous pi pulses.
    """
    eps = np.ascontiguousarray(eps, dtype=complex)
    m = len(eps)
    zg = _z_profile(m, pi_indices)
    ze = (1 - zg).astype(np.int8)
    args = (sys.dt, sys.frame_detuning, sys.kerr, sys.kappa, sys.chi, sys.chi_prime)
    ag = integrate(eps, zg, *args, complex(start[0]), substeps)
    ae = integrate(eps, ze, *args, complex(start[1]), substeps)
    return Trajectory(np.arange(m + 1) * sys.dt, _check_finite(ag, "ground"), _check_finite(ae, "excited"))


def dispersive_solution(eps, t, sys: SystemParams, branch: str = "g", alpha0=0.0) -> np.ndarray:
    """Closed-form dispersive branch for a zero-order-hold drive (Kerr and chi' ignored).

    Uses alpha(t) = e^{-s t} [alpha0 - i int_0^t e^{s tau} eps(tau) dtau] with
    s = (+-i chi + kappa)/2 measured relative to the frame detuning.
    """
    eps = np.asarray(eps, dtype=complex)
    # rotation rate in the frame: delta for g, delta - chi for e
    w = sys.frame_detuning if branch == "g" else sys.frame_detuning - sys.chi
    s = 1j * w + 0.5 * sys.kappa
    dt = sys.dt
    k = np.arange(len(eps))
    # exact integral of e^{s tau} over each hold interval
    if abs(s) * dt < 1e-12:
        seg = eps * dt
    else:
        seg = eps * (np.exp(s * (k + 1) * dt) - np.exp(s * k * dt)) / s
    acc = np.concatenate([[0.0], np.cumsum(seg)])
    tk = np.arange(len(eps) + 1) * dt
    full = np.exp(-s * tk) * (alpha0 - 1j * acc)
    return np.interp(t, tk, full.real) + 1j * np.interp(t, tk, full.imag)


# -- geometric phase calibration ---------------------------------------------


def geometric_ratio(t_p: float, t_w: float, sys: SystemParams, branch: str | None = None):
    """Middle-pulse ratio that returns both branches to the origin.

    ``branch=None`` gives the lossless closed form cos(chi(3t_p+2t_w)/4) / cos(chi t_p/4).
    ``branch='g'`` or ``'e'`` evaluates the full loss-dependent expression (complex in
    general).
    """
    if branch is None:
        c = math.cos(sys.chi * t_p / 4)
        if abs(c) < 1e-6:
            raise ValueError("chi t_p / 4 is too close to a secant singularity")
        return math.cos(sys.chi * (3 * t_p + 2 * t_w) / 4) / c
    sgn = 1.0 if branch == "g" else -1.0
    s = 0.5 * (sgn * 1j * sys.chi + sys.kappa)
    den = np.exp(s * (t_p + t_w)) + np.exp(s * (2 * t_p + t_w))
    if abs(den) < 1e-6:
        raise ValueError("geometric ratio denominator vanishes")
    return complex((1 + np.exp(s * (3 * t_p + 2 * t_w))) / den)


def geometric_sequence(eps0: complex, r: float, t_w: float, sys: SystemParams) -> np.ndarray:
    """eps0 [g(t) - r g(t - (t_p+t_w)) - r g(t - (2t_p+t_w)) + g(t - (3t_p+2t_w))]."""
    g = displacement_shape(sys)
    nw = _samples(t_w, sys)
    nd = len(g)
    out = np.zeros(4 * nd + 2 * nw, dtype=complex)
    for start, amp in ((0, 1.0), (nd + nw, -r), (2 * nd + nw, -r), (3 * nd + 2 * nw, 1.0)):
        out[start:start + nd] += amp * g
    return eps0 * out


def _samples(t: float, sys: SystemParams) -> int:
    n = t / sys.dt
    if abs(n - round(n)) > 1e-6 or n < -1e-9:
        raise ValueError(f"time {t} is not a non-negative multiple of dt")
    return int(round(n))


# -- qubit phase ---------------------------------------------------------------


def qubit_phase(eps, traj: Trajectory, sys: SystemParams | None = None) -> float:
    """theta' = theta(T) + 2 Im[gamma(T) delta*(T)], theta(T) = -2 int Re[eps* delta] dt.

    The end-point term is written with ``delta*`` so that theta' is invariant
    under a global drive phase, as the gate decomposition is; for real
    ``delta`` it equals Im[gamma delta].  The interval quadrature uses the
    hold value of ``eps`` and the mean of ``delta`` at the interval ends.
    """
    eps = np.asarray(eps, dtype=complex)
    dt = traj.t[1] - traj.t[0] if len(traj.t) > 1 else (sys.dt if sys else 1e-9)
    d = traj.conditional
    dmid = 0.5 * (d[1:] + d[:-1])
    theta = -2 * np.sum(np.real(np.conj(eps) * dmid)) * dt
    g = traj.centroid
    return float(theta + 2 * np.imag(g[-1] * np.conj(d[-1])))


# -- ECD pulse -------------------------------------------------------------------


@dataclass
class EcdPulse:
    """One compiled ECD gate.

    ``eps0`` carries the overall phase; ``ratios`` are the real amplitudes of
    pulses 2-4 relative to pulse 1.  Achieved quantities are recomputed from
    trajectories.
    """

    eps0: complex
    ratios: tuple
    t_w: float
    beta: complex = 0j
    alpha0: float = 0.0
    theta_prime: float = 0.0
    target_beta: complex = 0j
    alpha0_target: float = 0.0
    cost: float = 0.0
    degenerate: bool = False
    max_radius: float = 0.0

    def drive(self, sys: SystemParams) -> np.ndarray:
        return ecd_drive(self.eps0, self.ratios, self.t_w, sys)

    def duration(self, sys: SystemParams) -> float:
        return 4 * sys.t_d + 2 * self.t_w + sys.t_q

    def to_json(self) -> dict:
        return {"eps0_re": self.eps0.real, "eps0_im": self.eps0.imag, "ratios": list(self.ratios),
                "t_w": self.t_w, "beta_re": self.beta.real, "beta_im": self.beta.imag,
                "alpha0": self.alpha0, "theta_prime": self.theta_prime, "cost": self.cost,
                "degenerate": self.degenerate, "max_radius": self.max_radius}


def ecd_layout(t_w: float, sys: SystemParams) -> dict:
    """Sample indices of the four displacement pulses and the mid-gate pi pulse."""
    nd, nq, nw = sys.n_d, sys.n_q, _samples(t_w, sys)
    starts = (0, nd + nw, 2 * nd + nw + nq, 3 * nd + 2 * nw + nq)
    total = 4 * nd + 2 * nw + nq
    return {"starts": starts, "pi_start": 2 * nd + nw, "pi_index": 2 * nd + nw + nq // 2,
            "n": total, "nq": nq}


def ecd_drive(eps0, ratios, t_w, sys: SystemParams) -> np.ndarray:
    lay = ecd_layout(t_w, sys)
    g = displacement_shape(sys)
    out = np.zeros(lay["n"], dtype=complex)
    for start, amp in zip(lay["starts"], (1.0,) + tuple(ratios)):
        out[start:start + len(g)] = amp * g
    return complex(eps0) * out


def ecd_trajectory(pulse_or_eps0, ratios=None, t_w=None, sys: SystemParams = None, substeps=1):
    if isinstance(pulse_or_eps0, EcdPulse):
        p = pulse_or_eps0
        eps0, ratios, t_w = p.eps0, p.ratios, p.t_w
    else:
        eps0 = pulse_or_eps0
    eps = ecd_drive(eps0, ratios, t_w, sys)
    traj = solve_conditional_trajectories(eps, [ecd_layout(t_w, sys)["pi_index"]], sys, substeps=substeps)
    return eps, traj


def ecd_cost(traj: Trajectory, alpha0: float) -> float:
    """Net displacement at T/2 and T plus the radius mismatch at T/4 and 3T/4."""
    T = traj.t[-1]
    s = lambda t: sum(traj.at(t))  # noqa: E731
    return (abs(s(T / 2)) ** 2 + abs(s(T)) ** 2
            + (abs(s(T / 4)) / 2 - alpha0) ** 2 + (abs(s(3 * T / 4)) / 2 - alpha0) ** 2)


def _achieved(eps0, ratios, t_w, sys):
    eps, traj = ecd_trajectory(eps0, ratios, t_w, sys)
    beta = complex(traj.alpha_g[-1] - traj.alpha_e[-1])
    T = traj.t[-1]
    r = 0.25 * (abs(sum(traj.at(T / 4))) + abs(sum(traj.at(3 * T / 4))))
    return eps, traj, beta, r


@dataclass
class PulseOptions:
    """Knobs of the per-gate pulse search."""

    beta_rtol: float = 1e-3
    nm_fatol: float = 1e-8
    nm_xatol: float = 1e-7
    nm_maxiter: int = 4000
    restarts: int = 2
    t_w_max: float = 20e-6
    alpha0_min: float = 1e-3


def _fit_ratios(alpha0, t_w, sys, x0=None, opts=PulseOptions()):
    """Nelder-Mead over (eps0, r2, r3, r4) for a real-positive canonical eps0.

    Returns ``(x, cost)`` with ``x[0]`` scaled so that 1 means
    ``alpha0 / (pulse area)``.
    """
    area = displacement_shape(sys).sum() * sys.dt
    scale = alpha0 / area

    def f(x):
        _, traj = ecd_trajectory(x[0] * scale, x[1:], t_w, sys)
        return ecd_cost(traj, alpha0) / alpha0 ** 2

    x = np.array([1.0, -1.0, -1.0, 1.0]) if x0 is None else np.asarray(x0, dtype=float)
    best = None
    for _ in range(opts.restarts + 1):
        simplex = np.vstack([x, x + 0.1 * np.diag(np.where(np.abs(x) > 1e-3, x, 0.1))])
        res = minimize(f, x, method="Nelder-Mead",
                       options={"xatol": opts.nm_xatol, "fatol": opts.nm_fatol,
                                "maxiter": opts.nm_maxiter, "initial_simplex": simplex})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < opts.nm_fatol * 10:
            break
        x = best.x
    return best.x, float(best.fun)


def _beta_at(alpha0, t_w, sys, opts, x0=None):
    x, cost = _fit_ratios(alpha0, t_w, sys, x0, opts)
    area = displacement_shape(sys).sum() * sys.dt
    eps0 = x[0] * alpha0 / area
    _, traj, beta, r = _achieved(eps0, tuple(x[1:]), t_w, sys)
    return beta, x, cost, r


def optimize_ecd_pulse(target_beta: complex, alpha0_target: float, sys: SystemParams,
                       opts: PulseOptions | None = None) -> EcdPulse:
    """Shortest ECD pulse realizing ``target_beta`` with intermediate radius at most ``alpha0_target``.

    The wait time is searched on the integer sample grid starting from
    ``4 / (chi alpha0)``; the radius is then lowered continuously so the
    achieved |beta| matches the target.  The gate is solved for a real
    positive beta and rotated into place afterwards (all terms are phase
    covariant except the drive).
    """
    opts = opts or PulseOptions()
    target_beta = complex(target_beta)
    if alpha0_target <= 0:
        raise ValueError("alpha0_target must be positive")
    mag = abs(target_beta)
    if mag < 1e-9:
        return EcdPulse(0j, (-1.0, -1.0, 1.0), 0.0, target_beta=target_beta,
                        alpha0_target=alpha0_target, degenerate=True)
    tol = opts.beta_rtol * max(1.0, mag)
    cache = {}

    def beta_of(nw, a0, x0=None):
        key = (nw, round(a0, 12))
        if key not in cache:
            cache[key] = _beta_at(a0, nw * sys.dt, sys, opts, x0)
        return cache[key]

    nw = max(1, int(math.ceil(4 / (sys.chi * alpha0_target) / sys.dt)))
    while abs(beta_of(nw, alpha0_target)[0]) < mag:
        nw *= 2
        if nw * sys.dt > opts.t_w_max or sys.chi * (2 * nw * sys.dt + 4 * sys.t_d + sys.t_q) > TWO_PI:
            raise RuntimeError(f"cannot reach |beta|={mag:.4g} at alpha0={alpha0_target} "
                               f"within t_w <= {opts.t_w_max}")
    # smallest wait (integer samples) whose |beta| reaches the target
    if abs(beta_of(0, alpha0_target)[0]) >= mag:
        nw = 0
    else:
        lo, hi = 0, nw
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if abs(beta_of(mid, alpha0_target, beta_of(hi, alpha0_target)[1])[0]) >= mag:
                hi = mid
            else:
                lo = mid
        nw = hi
    beta, x, cost, r = beta_of(nw, alpha0_target)
    a0 = alpha0_target
    if abs(abs(beta) - mag) > tol:
        xs = [x]

        def resid(a):
            b, xx, _, _ = beta_of(nw, a, xs[-1])
            xs.append(xx)
            return abs(b) - mag

        a0 = brentq(resid, opts.alpha0_min, alpha0_target, xtol=1e-10, rtol=1e-12)
        beta, x, cost, r = beta_of(nw, a0, xs[-1])
    t_w = nw * sys.dt
    area = displacement_shape(sys).sum() * sys.dt
    eps0 = x[0] * a0 / area
    # rotate the canonical solution onto the target phase
    rot = np.exp(1j * (np.angle(target_beta) - np.angle(beta)))
    eps0 = eps0 * rot
    eps, traj, beta, r = _achieved(eps0, tuple(x[1:]), t_w, sys)
    if abs(beta - target_beta) > tol:
        raise RuntimeError(f"pulse search missed beta: got {beta:.6g}, wanted {target_beta:.6g}")
    radius = float(np.max(np.abs(traj.centroid)))
    return EcdPulse(complex(eps0), tuple(float(v) for v in x[1:]), t_w, beta=beta, alpha0=r,
                    theta_prime=qubit_phase(eps, traj), target_beta=target_beta,
                    alpha0_target=alpha0_target, cost=cost, max_radius=radius)


# -- sequences --------------------------------------------------------------------


def qubit_pulse(theta: float, phi: float, sys: SystemParams) -> np.ndarray:
    """Omega(t) samples realizing R_phi(theta) with H_q = Omega* q + Omega q^dag.

    With the qubit-major basis [g, e] and sigma_z = diag(1, -1), the rotation
    angle is 2 int |Omega| dt.
    """
    g = qubit_shape(sys)
    return (theta / 2) * np.exp(1j * phi) * g / (g.sum() * sys.dt)


def displacement_pulse(alpha: complex, sys: SystemParams) -> np.ndarray:
    """Single Gaussian drive that moves the ground-state branch from 0 to ``alpha``."""
    g = displacement_shape(sys).astype(complex)
    if alpha == 0:
        return np.zeros_like(g)
    unit = solve_frame_trajectory(g, sys)[-1]
    eps = g * (alpha / unit)
    # one secant refinement for the (tiny) amplitude-dependent terms
    got = solve_frame_trajectory(eps, sys)[-1]
    return eps * (alpha / got)


@dataclass
class PulseSequence:
    """Sampled drives on a common grid plus per-gate bookkeeping."""

    eps: np.ndarray
    omega: np.ndarray
    dt: float
    segments: list = field(default_factory=list)
    frame_phases: list = field(default_factory=list)
    gates: list = field(default_factory=list)

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=complex)
        self.omega = np.asarray(self.omega, dtype=complex)
        if self.eps.shape != self.omega.shape:
            raise ValueError("eps and omega must have equal length")

    @property
    def n(self) -> int:
        return len(self.eps)

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    def to_csv(self, path):
        """Columns t_ns, eps_re, eps_im, omega_re, omega_im with 17 significant digits."""
        data = np.column_stack([self.t * 1e9, self.eps.real, self.eps.imag,
                                self.omega.real, self.omega.imag])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="t_ns,eps_re,eps_im,omega_re,omega_im", comments="")

    def sidecar(self, sys: SystemParams | None = None) -> dict:
        out = {"dt": self.dt, "n": self.n, "segments": self.segments,
               "frame_phases": list(map(float, self.frame_phases)),
               "gates": [g.to_json() for g in self.gates]}
        if sys is not None:
            out["system"] = sys.to_json()
        return out

    @classmethod
    def from_csv(cls, path, dt=None, meta=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if dt is None:
            dt = (data[1, 0] - data[0, 0]) * 1e-9 if len(data) > 1 else 1e-9
        seq = cls(data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4], dt)
        if meta:
            seq.segments = meta.get("segments", [])
            seq.frame_phases = meta.get("frame_phases", [])
        return seq


def compile_sequence(params: EcdParams, alpha0: float, sys: SystemParams,
                     opts: PulseOptions | None = None, pulses=None) -> PulseSequence:
    """Interleave rotation pulses and compiled ECD gates with qubit-frame tracking.

    Each ECD gate leaves a residual qubit phase exp(-i theta' sigma_z / 2); the
    accumulated frame ``zeta`` is absorbed into every later qubit pulse
    (phi -> phi + zeta), including the mid-gate pi pulses, so the frame simply
    adds up: zeta <- zeta + theta'.  ``pulses`` may supply precompiled
    :class:`EcdPulse` objects (one per gate).
    """
    eps_parts, om_parts, segments, frames, gates = [], [], [], [], []
    nq = sys.n_q
    zeta = 0.0
    pos = 0
    for k in range(params.depth + 1):
        frames.append(zeta)
        if params.thetas[k] != 0 or k == params.depth:
            om_parts.append(qubit_pulse(params.thetas[k], params.phis[k] + zeta, sys))
            eps_parts.append(np.zeros(nq, dtype=complex))
            segments.append({"kind": "rotation", "layer": k, "start": pos, "stop": pos + nq,
                             "theta": float(params.thetas[k]), "phi": float(params.phis[k] + zeta)})
            pos += nq
        if k == params.depth:
            break
        beta = params.betas[k]
        if pulses is not None:
            p = pulses[k]
        else:
            p = optimize_ecd_pulse(beta, alpha0, sys, opts)
        gates.append(p)
        eps = p.drive(sys)
        peak = float(np.max(np.abs(eps))) if len(eps) else 0.0
        if peak > sys.drive_max:
            raise ValueError(f"gate {k} (beta={beta:.4g}) needs |eps|={peak / TWO_PI:.4g} Hz/2pi "
                             f"above drive_max={sys.drive_max / TWO_PI:.4g}")
        lay = ecd_layout(p.t_w, sys)
        om = np.zeros(lay["n"], dtype=complex)
        om[lay["pi_start"]:lay["pi_start"] + nq] = qubit_pulse(np.pi, zeta, sys)
        eps_parts.append(eps)
        om_parts.append(om)
        segments.append({"kind": "ecd", "layer": k, "start": pos, "stop": pos + lay["n"],
                         "pi_index": pos + lay["pi_index"], "beta_re": float(np.real(beta)),
                         "beta_im": float(np.imag(beta)), "theta_prime": p.theta_prime})
        pos += lay["n"]
        zeta = zeta + p.theta_prime
    fb = params.betas[-1] / 2
    if fb != 0:
        d = displacement_pulse(fb, sys)
        eps_parts.append(d)
        om_parts.append(np.zeros(len(d), dtype=complex))
        segments.append({"kind": "displacement", "layer": params.depth, "start": pos,
                         "stop": pos + len(d), "alpha_re": float(fb.real), "alpha_im": float(fb.imag)})
        pos += len(d)
    eps = np.concatenate(eps_parts) if eps_parts else np.zeros(0, complex)
    om = np.concatenate(om_parts) if om_parts else np.zeros(0, complex)
    return PulseSequence(eps, om, sys.dt, segments, frames + [zeta], gates)


# -- analysis -----------------------------------------------------------------------


def duration_model(params, alpha0: float, sys: SystemParams) -> tuple[float, float]:
    """(T_inst, T_constraint): (chi alpha0)^{-1} sum|beta_i| and 2 N t_q + 4 N t_D."""
    betas = params.betas[:-1] if isinstance(params, EcdParams) else np.asarray(params)
    n = len(betas)
    t_inst = float(np.sum(np.abs(betas)) / (sys.chi * alpha0))
    t_con = 2 * n * sys.t_q + 4 * n * sys.t_d
    return t_inst, t_con


def critical_photon_number(j: int, detuning: float, g: float, e_c: float) -> float:
    """n_crit^j = (|Delta - j E_C|^2 / (4 g^2) - j) / (2 j + 1), all in the same units."""
    return ((abs(detuning - j * e_c) ** 2) / (4 * g ** 2) - j) / (2 * j + 1)


QUOTED_N_CRIT = {"g": 2740.0, "e": 910.0}


def speed_limits(sys: SystemParams | None = None, detuning=None, g=None, e_c=None,
                 chi=None, anharmonicity=None) -> dict:
    """Critical photon numbers and the conditional-displacement speed limit.

    Bare parameters give n_crit from the displayed formula; the effective pair
    (chi, K) gives g_eff^max ~ sqrt(chi K / 6).  The quoted reference values are
    reported alongside without reconciliation.
    """
    if sys is not None:
        chi = sys.chi if chi is None else chi
        anharmonicity = sys.anharmonicity if anharmonicity is None else anharmonicity
    out = {"n_crit_quoted_g": QUOTED_N_CRIT["g"], "n_crit_quoted_e": QUOTED_N_CRIT["e"]}
    if detuning is not None and g is not None and e_c is not None:
        out["n_crit_g"] = critical_photon_number(0, detuning, g, e_c)
        out["n_crit_e"] = critical_photon_number(1, detuning, g, e_c)
        chi_pt = 2 * g ** 2 * e_c / (detuning * (detuning - e_c))
        out["chi_perturbative"] = chi_pt
        out["g_eff_max_ncrit"] = math.sqrt(max(out["n_crit_e"], 0.0)) * (chi if chi else chi_pt)
    if chi is not None and anharmonicity is not None:
        out["g_eff_max"] = math.sqrt(chi * anharmonicity / 6)
    return out


def sequence_duration(params: EcdParams, alpha0: float, sys: SystemParams, opts=None) -> float:
    return compile_sequence(params, alpha0, sys, opts).duration


def dumps_sidecar(seq: PulseSequence, sys: SystemParams) -> str:
    return json.dumps(seq.sidecar(sys), indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    warnings.warn(f"cannot serialise {type(o)}")
    return str(o)
