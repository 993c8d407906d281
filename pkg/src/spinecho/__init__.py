"""Collective-spin echo simulator and analytic oracle library.

Simulates the scramble / rotate / unscramble protocol for sensing a rotation
about an unknown axis on the symmetric subspace of N spins, and provides the
closed-form ensemble-averaged predictions the Monte Carlo is checked against.
"""

__version__ = "0.1.0"

from .spin_core import (
    SpinSystem,
    make_spin_system,
    spin_operators,
    axis_operator,
    rotation,
    trace_rotation_pair,
    dicke_state,
    coherent_state,
    unit_axis,
    husimi_q,
)
from .ensembles import (
    RngStream,
    OatCircuit,
    haar_unitary,
    random_axis,
    default_twist_strength,
    sample_oat_circuit,
    apply_oat,
    oat_matrix,
    sample_brownian_step,
)
from .echo import (
    EnsembleSpec,
    EchoSweepResult,
    EchoPointStats,
    QfiStats,
    run_echo,
    probe_qfi,
    qfi_convergence,
    echo_sweep,
    sensitivity_from_sweep,
    metrological_gain,
    moment_isotropy_check,
)
from . import analytics, channels, mmse, replica

__all__ = [
    "__version__",
    "SpinSystem",
    "make_spin_system",
    "spin_operators",
    "axis_operator",
    "rotation",
    "trace_rotation_pair",
    "dicke_state",
    "coherent_state",
    "unit_axis",
    "husimi_q",
    "RngStream",
    "OatCircuit",
    "haar_unitary",
    "random_axis",
    "default_twist_strength",
    "sample_oat_circuit",
    "apply_oat",
    "oat_matrix",
    "sample_brownian_step",
    "EnsembleSpec",
    "EchoSweepResult",
    "EchoPointStats",
    "QfiStats",
    "run_echo",
    "probe_qfi",
    "qfi_convergence",
    "echo_sweep",
    "sensitivity_from_sweep",
    "metrological_gain",
    "moment_isotropy_check",
    "analytics",
    "channels",
    "mmse",
    "replica",
]
