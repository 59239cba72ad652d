"""Numerical toolkit for soliton modulation in the six-dimensional reduced Yang-Mills heat flow.

Submodules
----------
specfun      Bessel functions for the radial heat kernel
radialheat   free heat flow and Duhamel integrals of radial functions
profiles     soliton, zero mode, cutoffs, nonlinearity, initial data families
scalinglaw   modulation law for the soliton scale and its diagnostics
pdesolver    finite-volume IMEX solver of the full radial flow
boundscheck  numerical checks of weighted heat-convolution bounds
cli          ``ymheat`` command-line front end
"""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
