"""Simulation and analysis of kink statistics after Trotterized Ising quenches."""

from .batch import BitstringBatch
from .model import (
    BondTerm,
    CumulantSet,
    QuenchSchedule,
    couplings_at,
    cumulants_from_moments,
    kink_count,
    moment_expansion,
)
from .statevector import NoiseModel, StateVector
from .trotter import Circuit, GateOp, TrotterPlan, build_quench_circuit, build_reference_circuit, quench_circuit

__version__ = "0.1.0"
