"""Grid-based linear Vlasov solver with an emulated quantum power-spectrum estimator."""
__version__ = "0.1.0"

from .errors import DomainError, ForceFileError, KrylovConvergenceError, OracleMismatchError
from .grid import PhaseSpaceGrid
from .forcefield import AnalyticForce, ForceEnsemble, ForceField, read_vqff, sample_analytic, write_vqff
from .hamiltonian import SparseHamiltonian, assemble, verify_oracles
from .propagator import DistributionState, EvolutionReport, evolve
from .initcond import FermiDiracParams, PerturbationField, build_ensemble, compute_C, fermi_dirac_state, maxwell_demo
from .spectrum import analyze, density, fourier, perturbation, shell_power
from .qae import QaeConfig, algorithm1, algorithm1_shell, exact_amplitude, qae_estimate
from .resources import ResourceParams, theorem1_queries, theorem2_totals

__all__ = [
    "DomainError", "ForceFileError", "KrylovConvergenceError", "OracleMismatchError",
    "PhaseSpaceGrid", "AnalyticForce", "ForceEnsemble", "ForceField", "read_vqff", "sample_analytic",
    "write_vqff", "SparseHamiltonian", "assemble", "verify_oracles", "DistributionState",
    "EvolutionReport", "evolve", "FermiDiracParams", "PerturbationField", "build_ensemble", "compute_C",
    "fermi_dirac_state", "maxwell_demo", "analyze", "density", "fourier", "perturbation", "shell_power",
    "QaeConfig", "algorithm1", "algorithm1_shell", "exact_amplitude", "qae_estimate", "ResourceParams",
    "theorem1_queries", "theorem2_totals",
]
