"""ECD control synthesis for a qubit-coupled oscillator."""
__version__ = "0.1.0"

from .circuit import EcdParams, apply_circuit, compose_circuit, state_transfer_fidelity  # noqa: E402
from .codes import binomial_codewords, gkp_logical_states  # noqa: E402
from .dynamics import (DecoherenceRates, SimConfig, error_budget, simulate_master_equation,  # noqa: E402
                       simulate_unitary, table_rates)
from .fock import HilbertConfig, coherent_state, displacement, fock_state  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .optimizer import OptimizerConfig, StateMap, depth_sweep, optimize, optimize_gkp_gate  # noqa: E402
from .pulses import PulseSequence, SystemParams, compile_sequence, optimize_ecd_pulse  # noqa: E402
from .tomography import (CharGrid, ReconstructionConfig, char_function, mle_reconstruct,  # noqa: E402
                         postprocess, simulate_tomography)

__all__ = [
    "BACKEND", "CharGrid", "DecoherenceRates", "EcdParams", "HilbertConfig", "OptimizerConfig",
    "PulseSequence", "ReconstructionConfig", "SimConfig", "StateMap", "SystemParams",
    "apply_circuit", "binomial_codewords", "char_function", "coherent_state", "compile_sequence",
    "compose_circuit", "depth_sweep", "displacement", "error_budget", "fock_state",
    "gkp_logical_states", "mle_reconstruct", "optimize", "optimize_ecd_pulse", "optimize_gkp_gate",
    "postprocess", "simulate_master_equation", "simulate_tomography", "simulate_unitary",
    "state_transfer_fidelity", "table_rates",
]
