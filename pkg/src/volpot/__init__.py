"""Fast volume potentials with truncated Green's functions.

Free-space convolutions ``phi = g * f`` of a smooth density on the unit box
are computed by one zero-padded FFT convolution against the Fourier
transform of a truncated kernel. Solvers for Lippmann-Schwinger scattering
and a Poisson-Boltzmann type dielectric problem are built on top.
"""

from .grid import GridSpec, FreqLattice
from .kernels import KernelSpec, eval_physical, eval_spectral
from .potential import SpectralMultiplier, convolve_direct, precompute_table, convolve_precomputed

__all__ = [
    "GridSpec",
    "FreqLattice",
    "KernelSpec",
    "eval_physical",
    "eval_spectral",
    "SpectralMultiplier",
    "convolve_direct",
    "precompute_table",
    "convolve_precomputed",
]

__version__ = "0.1.0"
