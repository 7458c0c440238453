"""Numerical verification of Weyl-type spectral asymptotics for singular Green
operators and resolvent differences of elliptic boundary problems."""
import os

# cap BLAS/OpenMP threads before numpy is imported anywhere in the package
if os.environ.get("SGW_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[_var] = os.environ["SGW_THREADS"]

__version__ = "0.1.0"

from . import elliptic, laguerre, lpaley, opcalc, spectra, symbols  # noqa: E402

__all__ = ["elliptic", "laguerre", "lpaley", "opcalc", "spectra", "symbols", "__version__"]
