"""Grand-canonical thermodynamics of the attractive two-mode boson model.

Exact sector spectra, grand partition sums, closed-form mean-field results
and power-law scaling near the divergence of the grand partition function.
"""
from .ensemble import DivergentRegime, EnsembleResult, ModelParams, NotConverged, grand_partition, observables
from .groundstate import GroundStateResult, gs_energy_density, minimize_theta, variational_energy
from .meanfield import asymptotics, lambda_D_of_mu, mu_of_lambda_D
from .spectrum import Spectrum, TridiagonalHamiltonian, build_hamiltonian, eigensystem, eigenvalues

__version__ = "0.1.0"

__all__ = [
    "DivergentRegime",
    "EnsembleResult",
    "ModelParams",
    "NotConverged",
    "grand_partition",
    "observables",
    "GroundStateResult",
    "gs_energy_density",
    "minimize_theta",
    "variational_energy",
    "asymptotics",
    "lambda_D_of_mu",
    "mu_of_lambda_D",
    "Spectrum",
    "TridiagonalHamiltonian",
    "build_hamiltonian",
    "eigensystem",
    "eigenvalues",
]
