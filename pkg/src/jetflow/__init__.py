"""Variational free-boundary solver for steady compressible subsonic jet
flows with non-zero vorticity.

The pipeline: solve the upstream state from the Bernoulli profile and mass
flux, build the truncated energy integrand, minimize the discrete functional
on the truncated nozzle domain, fit the free-boundary momentum so the jet
surface leaves the nozzle mouth, and verify the asymptotic states and the
subsonic margin.
"""

from .gas import GasModel
from .upstream import (BernoulliOfStream, BernoulliProfile, UpstreamState,
                       bernoulli_of_stream, flux_of_density, solve_upstream)
from .truncation import Cutoff, TruncatedEnergy
from .domain import (BoundaryData, Nozzle, TruncatedDomain, boundary_data,
                     build_domain, strip_domain)
from .minimizer import (DiscreteField, EnergyReport, SolverOptions,
                        discrete_energy, euler_residual, initial_field,
                        relax_sweep, solve)
from .freeboundary import (FitOptions, FreeBoundary, ShootingResult,
                           continuous_fit, extract, jump_check,
                           plateau_height, smooth_fit_check)
from .asymptotics import (CriticalFluxReport, DownstreamState,
                          critical_flux_scan, downstream_state,
                          exit_pressure_of_Lambda, farfield_compare,
                          mass_flux_sections, subsonic_margin,
                          upstream_margin_1d)
from . import errors, oned

__version__ = "0.1.0"
