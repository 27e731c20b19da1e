from .fermion import (FermionModel, bures_gaussian, fermion_flow,
                      fermion_gap_adia, fermion_gap_relax, fermion_ttss_adia,
                      fermion_ttss_relax, propagate_adiabatic_cov,
                      propagate_relax_cov, quadratic_form, rapidities,
                      sqrt_fidelity_gaussian, steady_covariance)
from .qubit import (QubitModel, crossing_coupling, delta_adia_analytic,
                    delta_relevant_analytic, qubit_analytic_spectrum,
                    qubit_delta, qubit_hamiltonian, qubit_schedule)
from .spike import (SpikeModel, collective_ops, spike_closed_system,
                    spike_fvalues, spike_hamiltonian, spike_schedule)

__all__ = [
    "FermionModel", "bures_gaussian", "fermion_flow", "fermion_gap_adia",
    "fermion_gap_relax", "fermion_ttss_adia", "fermion_ttss_relax",
    "propagate_adiabatic_cov", "propagate_relax_cov", "quadratic_form",
    "rapidities", "sqrt_fidelity_gaussian", "steady_covariance",
    "QubitModel", "crossing_coupling", "delta_adia_analytic",
    "delta_relevant_analytic", "qubit_analytic_spectrum", "qubit_delta",
    "qubit_hamiltonian", "qubit_schedule",
    "SpikeModel", "collective_ops", "spike_closed_system", "spike_fvalues",
    "spike_hamiltonian", "spike_schedule",
]
