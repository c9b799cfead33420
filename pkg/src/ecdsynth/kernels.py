"""Hot-loop kernels: compiled extension when built, pure Python otherwise.

Set ``ECDSYNTH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _traj_py

BACKEND = "python"
integrate = _traj_py.integrate

if os.environ.get("ECDSYNTH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _traj

        integrate = _traj.integrate
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass
