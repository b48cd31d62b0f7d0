"""Linear Rayleigh-Taylor growth rates for viscous, variable-density flow.

lambda(|xi|) is computed by constrained minimization of an energy quotient
closed by a fixed point, then turned into full normal modes, Fourier
synthesized growing fields, and checked against a time-stepping oracle.
"""

from .assembly import Grid1D, assemble
from .dispersion import Physics, growth_rate, half_rate_band, refine_peak, sweep
from .eigensolver import min_eig
from .modes import reconstruct, residuals
from .profile import ConstantProfile, MollifiedStep, TabulatedProfile, sup_buoyancy_ratio

__version__ = "0.1.0"

__all__ = ["Grid1D", "assemble", "Physics", "growth_rate", "half_rate_band", "refine_peak",
           "sweep", "min_eig", "reconstruct", "residuals", "ConstantProfile", "MollifiedStep",
           "TabulatedProfile", "sup_buoyancy_ratio"]
