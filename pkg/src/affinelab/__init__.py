"""affinelab: a numerical laboratory for affine jump-diffusions on R+^m x R^n.

Submodules
----------
params      parameter tuples and admissibility validation
linalg      diffusion factorizations, matrix exponentials, drift integrals
levy        jump-measure components, sampling, moments, exponents
riccati     transform ODEs, Laplace/invariant transforms, moment formulas
sde         Euler simulation engine (compiled kernel + Python fallback)
wasserstein ground metrics and exact optimal-transport distances
harness     simulation-versus-theory experiment checks
models      preset model gallery
cli         command-line entry point
"""

__version__ = "0.1.0"
