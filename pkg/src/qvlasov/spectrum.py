"""Density, density contrast, Fourier modes and power spectra.

Fourier convention::

    delta~_k = (1 / n_gr**d) * sum_x delta_x * exp(+2 pi i k.x / n_gr)

which is exactly ``numpy.fft.ifftn``.  Wavevector indices are literal DFT
indices in ``[0, n_gr)`` per axis, flattened with the first axis fastest
(the same layout as spatial indices).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import PhaseSpaceGrid
from .propagator import DistributionState


def _values(state) -> np.ndarray:
    return state.values if isinstance(state, DistributionState) else np.asarray(state)


def _phase_matrix(values: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    # rows: spatial flat index, columns: velocity flat index
    return np.asarray(values).reshape(grid.n_spatial, grid.n_spatial, order="F")


def density(state, grid: PhaseSpaceGrid) -> np.ndarray:
    """``rho_x = sum_v f(x, v) * dv**d``; real if the state is real."""
    v = _values(state)
    if v.shape[0] != grid.n_total:
        raise DomainError(f"state has {v.shape[0]} entries, grid expects {grid.n_total}")
    if np.iscomplexobj(v) and not np.any(v.imag):
        v = v.real
    return _phase_matrix(v, grid).sum(axis=1) * grid.dv**grid.d


def perturbation(rho) -> np.ndarray:
    """``delta = rho / mean(rho) - 1``.

    Complex densities (from complex test states) are accepted as long as the
    mean is nonzero.
    """
    rho = np.asarray(rho)
    mean = rho.mean()
    if np.iscomplexobj(rho):
        if abs(mean) == 0:
            raise DomainError("mean density is zero")
    elif not mean > 0:
        raise DomainError(f"mean density must be positive, got {mean!r}")
    return rho / mean - 1.0


def fourier(delta, grid: PhaseSpaceGrid) -> np.ndarray:
    d, n = grid.d, grid.n_gr
    tensor = np.asarray(delta).reshape((n,) * d, order="F")
    return np.fft.ifftn(tensor).reshape(-1, order="F")


def dft_direct(delta, grid: PhaseSpaceGrid) -> np.ndarray:
    """O(n_gr**(2d)) reference transform built from the definition."""
    n, d = grid.n_gr, grid.d
    idx = np.stack([(np.arange(grid.n_spatial) // n**a) % n for a in range(d)])
    phase = np.exp(2j * np.pi * (idx.T @ idx) / n)
    return phase @ np.asarray(delta, dtype=complex) / grid.n_spatial


def wavevector_indices(grid: PhaseSpaceGrid) -> np.ndarray:
    """``(n_gr**d, d)`` literal index tuple of each flattened mode."""
    n = grid.n_gr
    flat = np.arange(grid.n_spatial)
    return np.stack([(flat // n**a) % n for a in range(grid.d)], axis=1)


def wavenumber_norms(grid: PhaseSpaceGrid) -> np.ndarray:
    return (2.0 * np.pi / grid.L) * np.linalg.norm(wavevector_indices(grid), axis=1)


def mode_index(grid: PhaseSpaceGrid, target) -> int:
    """Flat mode index from an int (d = 1) or a d-tuple of literal indices."""
    if np.isscalar(target):
        target = (int(target),) + (0,) * (grid.d - 1)
    return grid.flatten_spatial(target)


def shell_mask(grid: PhaseSpaceGrid, k1: float, k2: float) -> np.ndarray:
    if not 0 <= k1 <= k2:
        raise DomainError(f"need 0 <= k1 <= k2, got ({k1}, {k2})")
    k = wavenumber_norms(grid)
    return (k >= k1) & (k <= k2)


def shell_power(delta_k, grid: PhaseSpaceGrid, k1: float, k2: float) -> float:
    """Sum of ``|delta~|^2`` over modes with ``k1 <= |k| <= k2`` (literal indices)."""
    power = np.abs(np.asarray(delta_k)) ** 2
    return float(np.sum(power[shell_mask(grid, k1, k2)]))


def w_amplitudes(state, grid: PhaseSpaceGrid, norm: float | None = None) -> np.ndarray:
    """Amplitudes ``<k, 0_v| W |f> / |f|`` for every mode k, via FFT.

    W is the QFT on each position register and Hadamards on every velocity
    qubit.  The Hadamard layer maps ``|0_v>`` onto the uniform superposition,
    so the projection is a velocity sum followed by a positive-exponent DFT.
    ``norm`` overrides ``|f|`` (e.g. to keep an evolution's initial norm).
    """
    v = _values(state)
    if norm is None:
        norm = float(np.linalg.norm(v))
    if norm == 0:
        raise DomainError("zero-norm state")
    summed = _phase_matrix(v, grid).sum(axis=1)
    tensor = summed.reshape((grid.n_gr,) * grid.d, order="F")
    # ifftn already carries 1/n**d; the QFT and Hadamard each bring 1/sqrt(n**d)
    return np.fft.ifftn(tensor).reshape(-1, order="F") / norm


def qft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / math.sqrt(n)


def hadamard_matrix(n: int) -> np.ndarray:
    """``H^{(x) lg n}`` in the computational basis."""
    m = int(round(math.log2(n)))
    h = np.array([[1.0]])
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    for _ in range(m):
        h = np.kron(h, h1)
    return h


def apply_w(ket: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    """Apply W to a flat ket by dense per-register matrices."""
    q, h = qft_matrix(grid.n_gr), hadamard_matrix(grid.n_gr)
    t = np.asarray(ket, dtype=complex).reshape(grid.shape, order="F")
    for axis in range(grid.n_axes):
        op = q if axis < grid.d else h
        t = np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1, order="F")


def w_operator_check(state, grid: PhaseSpaceGrid, C: float | None = None) -> float:
    """Largest ``| |<k,0|W|f>|^2 - C |delta~_k|^2 |`` over nonzero k.

    W is applied with explicit matrices, independently of the FFT route.
    """
    v = _values(state)
    nrm = float(np.linalg.norm(v))
    if nrm == 0:
        raise DomainError("zero-norm state")
    if C is None:
        C = float(abs(v.sum()) ** 2 / v.shape[0] / nrm**2)
    out = apply_w(v / nrm, grid)
    amp = out[: grid.n_spatial]  # velocity indices all zero
    dk = fourier(perturbation(density(v, grid)), grid)
    dev = np.abs(np.abs(amp) ** 2 - C * np.abs(dk) ** 2)
    return float(dev[1:].max(initial=0.0))


@dataclass
class SpectrumResult:
    grid: PhaseSpaceGrid
    rho: np.ndarray
    delta: np.ndarray
    delta_k: np.ndarray
    C: float | None = None
    shells: dict = field(default_factory=dict)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.delta_k) ** 2

    @property
    def parseval_residual(self) -> float:
        n_sp = self.delta.shape[0]
        return float(abs(self.power.sum() - np.sum(np.abs(self.delta) ** 2) / n_sp))

    def dominant_mode(self) -> int:
        """Nonzero mode of largest power; near-ties go to the lowest index."""
        p = self.power.copy()
        p[0] = -np.inf
        top = p.max()
        return int(np.flatnonzero(p >= top * (1 - 1e-9))[0])

    def invariants(self, real_state: bool = True, tol: float = 1e-12) -> dict:
        """Zero mode, conjugate symmetry and Parseval residuals with pass flags."""
        out = {
            "zero_mode": float(abs(self.delta_k[0])),
            "parseval": self.parseval_residual,
        }
        if real_state:
            out["conjugate_symmetry"] = conjugate_symmetry_residual(self.delta_k, self.grid)
        out["ok"] = (
            out["zero_mode"] <= tol and out["parseval"] <= 1e-10 and out.get("conjugate_symmetry", 0.0) <= tol
        )
        return out


def conjugate_symmetry_residual(delta_k, grid: PhaseSpaceGrid) -> float:
    idx = wavevector_indices(grid)
    neg = (-idx) % grid.n_gr
    flat = sum(neg[:, a] * grid.n_gr**a for a in range(grid.d))
    dk = np.asarray(delta_k)
    return float(np.max(np.abs(dk[flat] - np.conj(dk))))


def analyze(state, grid: PhaseSpaceGrid, shells=(), C: float | None = None) -> SpectrumResult:
    rho = density(state, grid)
    delta = perturbation(rho)
    dk = fourier(delta, grid)
    res = SpectrumResult(grid, rho, delta, dk, C)
    for k1, k2 in shells:
        res.shells[(float(k1), float(k2))] = shell_power(dk, grid, k1, k2)
    return res


def ensemble_power(ens, grid: PhaseSpaceGrid, C: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode ensemble-averaged power by two routes.

    Returns ``(average_route, amplitude_route)``.  The first averages
    ``|delta~_i|^2`` over realizations.  The second sums the measurement
    probability of ``|k, 0_v, i>`` over the realization register after W acts
    on the superposed ket, then divides by ``C``.  They agree when every
    realization shares the same C.  The zero mode is reported as 0 by both
    routes; its measurement probability is C itself, not ``C |delta~_0|^2``.
    """
    blocks = [ens.realization(i).values for i in range(ens.n_iv)]
    average = np.mean([np.abs(fourier(perturbation(density(b, grid)), grid)) ** 2 for b in blocks], axis=0)
    ket = ens.ket().reshape(ens.n_iv, grid.n_total)
    prob = np.zeros(grid.n_spatial)
    for block in ket:
        # the ket block is already normalised to 1/sqrt(n_IV)
        prob += np.abs(w_amplitudes(block, grid, norm=1.0)) ** 2
    average[0] = prob[0] = 0.0
    return average, prob / C
