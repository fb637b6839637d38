"""fdrates: a numerical laboratory for sharp fast-diffusion decay rates.

Closed-form exponents and spectra of the linearized fast-diffusion operator,
discretized Hardy-Poincare verification, a radial solver for the rescaled
nonlinear Fokker-Planck flow, and entropy-method instrumentation.
"""

from . import entropy, exponents, flow, numerics, profiles, spectral
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "entropy",
    "exponents",
    "flow",
    "numerics",
    "profiles",
    "spectral",
    "KERNEL_BACKEND",
    "__version__",
]
