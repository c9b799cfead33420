"""Time the trajectory integrator: compiled kernel vs pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--samples 5000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from ecdsynth import _traj_py
from ecdsynth.pulses import SystemParams

try:
    from ecdsynth import _traj
except ImportError:
    _traj = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--substeps", type=int, default=1)
    args = ap.parse_args()

    s = SystemParams()
    rng = np.random.default_rng(0)
    eps = 2 * np.pi * 1e6 * (rng.normal(size=args.samples) + 1j * rng.normal(size=args.samples))
    z = ((np.arange(args.samples) // 1000) % 2).astype(np.int8)
    call = (eps, z, s.dt, s.frame_detuning, s.kerr, s.kappa, s.chi, s.chi_prime, 0j, args.substeps)

    backends = {"python": _traj_py.integrate}
    if _traj is not None:
        backends["cython"] = _traj.integrate
    else:
        print("compiled kernel not built; timing the fallback only")

    ref = _traj_py.integrate(*call)
    times = {}
    for name, fn in backends.items():
        out = fn(*call)
        err = np.max(np.abs(out - ref))
        t = min(timeit.repeat(lambda: fn(*call), number=1, repeat=args.repeat))
        times[name] = t
        print(f"{name:>7}: {t * 1e3:9.3f} ms for {args.samples} samples "
              f"({t / args.samples * 1e9:7.1f} ns/sample), max |diff| vs python {err:.1e}")
    if "cython" in times:
        print(f"speedup: {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
