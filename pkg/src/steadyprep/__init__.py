"""Numerical toolkit for comparing adiabatic steady-state preparation with
fixed-generator relaxation in time-dependent Lindbladian dynamics."""

from .superop import (HamiltonianSpec, Liouvillian, SpectralDensity,
                      build_lindbladian, davies_generator, gibbs_state,
                      ohmic_gamma)
from .spectral import (GapReport, eig_liouvillian, gap_adia, gap_ordering_check,
                       gap_relax, gap_relevant, rescale_scan, steady_state)
from .evolve import (DaviesSchedule, GeneratorSchedule, LinearSchedule,
                     Schedule, Trajectory, propagate_adiabatic, propagate_relax,
                     relax_bound_envelope, trace_norm_distance)
from .ttss import (ScalingEstimate, TTSSRecord, estimate_adia, estimate_relax,
                   fit_power_law, solve_ttss, ttss_adia, ttss_instantaneous,
                   ttss_relax)
from .bounds import (ZeroTBoundReport, adiabatic_B, finite_T_correction,
                     reduced_resolvent, zero_T_eps, zero_T_error_exact,
                     zero_T_report, zero_T_srhop_norm)

__version__ = "0.1.0"
