"""Initial distribution states, ensembles, and the normalisation constant C."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .forcefield import read_vqff, write_vqff
from .grid import PhaseSpaceGrid
from .propagator import DistributionState


@dataclass(frozen=True)
class FermiDiracParams:
    """Thermal velocity scale ``v_th = k_B T_nu / m_nu`` (velocity units)."""

    v_th: float

    def __post_init__(self):
        if not self.v_th > 0:
            raise DomainError("v_th must be positive")

    @classmethod
    def from_physical(cls, m_nu: float, t_nu: float, k_b: float = 1.0):
        return cls(k_b * t_nu / m_nu)


def fermi_dirac(speed, v_th: float):
    """Occupation ``1 / (exp(|v| / v_th) + 1)``; overflow-safe for large ``|v|``."""
    z = np.asarray(speed, dtype=float) / v_th
    return np.exp(-np.logaddexp(0.0, z))


@dataclass(frozen=True)
class PerturbationField:
    """Density contrast ``delta`` (n_gr**d,) and bulk velocity ``v_b`` (d, n_gr**d)."""

    delta: np.ndarray
    v_b: np.ndarray

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float).ravel()
        v_b = np.array(self.v_b, dtype=float)
        if v_b.ndim == 1:
            v_b = v_b[None, :]
        if v_b.shape[1] != delta.shape[0]:
            raise DomainError("delta and v_b must cover the same spatial points")
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(v_b))):
            raise DomainError("perturbation values must be finite")
        if abs(delta.mean()) > 1e-12:
            raise DomainError(f"delta must have zero mean, got {delta.mean():.3e}")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "v_b", v_b)

    @classmethod
    def zero(cls, grid: PhaseSpaceGrid):
        return cls(np.zeros(grid.n_spatial), np.zeros((grid.d, grid.n_spatial)))


def maxwell_demo(grid: PhaseSpaceGrid, sigma_v: float) -> DistributionState:
    """Position-independent Maxwellian ``exp(-|u|^2 / 2 sigma^2)`` per velocity axis."""
    if not sigma_v > 0:
        raise DomainError("sigma_v must be positive")
    g = np.exp(-(grid.u**2) / (2 * sigma_v**2)) / math.sqrt(2 * math.pi * sigma_v**2)
    tensor = np.ones((grid.n_gr,) * grid.d)
    for _ in range(grid.d):
        tensor = np.multiply.outer(tensor, g)
    return DistributionState(grid.as_flat(tensor))


def _velocity_offsets(grid: PhaseSpaceGrid, pert: PerturbationField) -> np.ndarray:
    """``|v - v_b(x)|`` as a phase-space tensor."""
    n, d = grid.n_gr, grid.d
    sq = np.zeros(grid.shape)
    for a in range(d):
        vb = pert.v_b[a].reshape((n,) * d, order="F")
        vb = vb.reshape(vb.shape + (1,) * d)
        vel_shape = [1] * (2 * d)
        vel_shape[d + a] = n
        sq = sq + (grid.u.reshape(vel_shape) - vb) ** 2
    return np.sqrt(sq)


def fermi_dirac_state(grid: PhaseSpaceGrid, params: FermiDiracParams, pert: PerturbationField) -> DistributionState:
    if pert.delta.shape[0] != grid.n_spatial or pert.v_b.shape[0] != grid.d:
        raise DomainError("perturbation field does not match the grid")
    one_plus = 1.0 + pert.delta
    if np.any(one_plus < 0):
        raise DomainError("1 + delta < 0 somewhere: unphysical density")
    weight = one_plus.reshape((grid.n_gr,) * grid.d, order="F").reshape((grid.n_gr,) * grid.d + (1,) * grid.d)
    f = weight * fermi_dirac(_velocity_offsets(grid, pert), params.v_th)
    return DistributionState(grid.as_flat(f))


def compute_C(state: DistributionState) -> float:
    """``(sum f)^2 / N_gr / sum |f|^2``; the mean-squared over mean-of-squares ratio."""
    v = state.values
    peak = float(np.max(np.abs(v), initial=0.0))
    if peak == 0:
        raise DomainError("C is undefined for a zero-norm state")
    v = v / peak  # C is scale free; rescaling avoids underflow in the squares
    sq = float(np.sum(np.abs(v) ** 2))
    if sq == 0:
        raise DomainError("C is undefined for a zero-norm state")
    return float(abs(np.sum(v)) ** 2 / v.shape[0] / sq)


def fermi_dirac_square_integral(d: int, v_th: float) -> float:
    """``int_{R^d} F_FD(|v|)^2 dv`` by radial quadrature.

    The radial cutoff is where the integrand drops below 1e-16.
    """
    surface = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[d]
    cutoff = v_th * (math.log(1e16) / 2.0 + (d - 1) * 4.0)
    val, err = integrate.quad(
        lambda r: r ** (d - 1) * float(fermi_dirac(r, v_th)) ** 2, 0.0, cutoff, epsabs=0.0, epsrel=1e-12, limit=200
    )
    if not np.isfinite(val) or err > 1e-8 * abs(val):
        raise RuntimeError(f"quadrature did not converge (value {val}, error {err})")
    return surface * val


def compute_C_semianalytic(
    grid: PhaseSpaceGrid, params: FermiDiracParams, pert: PerturbationField, rho_bar: float | None = None
) -> float:
    """C with the velocity sum of ``F_FD^2`` replaced by its integral over R^d.

    ``rho_bar`` is the mean spatial density fixed by the normalisation of f; by
    default it is taken from the grid's velocity sum.  The grid's velocity
    extent is ``n_gr * dv`` (slightly below 2V).
    """
    if rho_bar is None:
        speeds = _velocity_offsets(grid, pert)
        per_x = fermi_dirac(speeds, params.v_th).reshape(grid.n_spatial, -1, order="F").sum(axis=1)
        rho_bar = float(np.mean((1.0 + pert.delta) * per_x)) * grid.dv**grid.d
    extent = (grid.n_gr * grid.dv) ** grid.d
    numerator = (rho_bar / extent) ** 2
    spatial = float(np.mean((1.0 + pert.delta) ** 2))
    velocity_sum = fermi_dirac_square_integral(grid.d, params.v_th) / grid.dv**grid.d
    denominator = spatial * velocity_sum / grid.n_spatial
    return numerator / denominator


@dataclass(frozen=True)
class EnsembleState:
    """Block vector over ``[N_gr] x [n_IV]`` with block ``i`` equal to ``f_i / sqrt(n_IV)``."""

    blocks: np.ndarray

    @property
    def n_iv(self) -> int:
        return self.blocks.shape[0]

    @property
    def vector(self) -> np.ndarray:
        # realization index is the slowest register
        return self.blocks.ravel()

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    def realization(self, i: int) -> DistributionState:
        return DistributionState(self.blocks[i] * math.sqrt(self.n_iv))

    def realizations(self) -> list[DistributionState]:
        return [self.realization(i) for i in range(self.n_iv)]

    def ket(self) -> np.ndarray:
        """``(1/sqrt(n_IV)) sum_i |f_i>|i>`` with each realization normalised."""
        norms = np.linalg.norm(self.blocks, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise DomainError("zero-norm realization in ensemble")
        return (self.blocks / norms / math.sqrt(self.n_iv)).ravel()


def build_ensemble(states) -> EnsembleState:
    states = list(states)
    n_iv = len(states)
    if n_iv < 1 or n_iv & (n_iv - 1):
        raise DomainError(f"n_IV must be a power of 2, got {n_iv}")
    sizes = {s.values.shape[0] for s in states}
    if len(sizes) != 1:
        raise DomainError(f"states have mismatched sizes {sorted(sizes)}")
    return EnsembleState(np.stack([s.values for s in states]) / math.sqrt(n_iv))


def write_perturbation(path, grid: PhaseSpaceGrid, perts):
    """Store perturbations in a VQFF1 container (n_t = 2 channel layout).

    Slot ``i_t = 0`` holds the bulk-velocity components on its d axis
    channels; slot ``i_t = 1`` holds delta on axis channel 0 and zeros on the
    rest.  One realization per ``i_IV``.
    """
    perts = [perts] if isinstance(perts, PerturbationField) else list(perts)
    values = np.zeros((len(perts), 2, grid.d, grid.n_spatial))
    for k, p in enumerate(perts):
        values[k, 0] = p.v_b
        values[k, 1, 0] = p.delta
    write_vqff(path, values, grid.n_gr)


def load_perturbation(path, grid: PhaseSpaceGrid) -> list[PerturbationField]:
    header, values = read_vqff(path)
    if (header["d"], header["n_gr"]) != (grid.d, grid.n_gr) or header["n_t"] != 2:
        raise DomainError(f"{path}: not a perturbation container for this grid (header {header})")
    if np.any(values[:, 1, 1:] != 0):
        raise DomainError(f"{path}: unused delta channels must be zero")
    return [PerturbationField(v[1, 0], v[0]) for v in values]
