"""Piecewise-constant evolution ``f(T) = exp(dt A_{n_t-1}) ... exp(dt A_0) f(0)``.

Since ``H = iA``, ``exp(-i dt H) = exp(dt A)``.  Two backends:

``dense``
    Exact up to rounding.  ``A`` is real antisymmetric, so ``-A^2 = A^T A`` is
    symmetric positive semidefinite with eigenpairs ``(mu^2, q)`` and
    ``exp(tA) = cos(t M) + A sin(t M) / M`` with ``M = sqrt(-A^2)``.  One real
    symmetric eigendecomposition per distinct force slice is cached.
``krylov``
    Lanczos on the Hermitian ``H`` with full reorthogonalisation and adaptive
    step splitting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, KrylovConvergenceError
from .forcefield import ForceField
from .grid import PhaseSpaceGrid
from .hamiltonian import assemble

KRYLOV_MAX_ITER = 200
_MAX_SPLIT_DEPTH = 12


@dataclass(frozen=True)
class DistributionState:
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(v)):
            raise DomainError("state values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @property
    def sum(self) -> complex:
        return complex(np.sum(self.values))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.values.imag), initial=0.0))

    def ket(self) -> np.ndarray:
        nrm = self.norm
        if nrm == 0:
            raise DomainError("zero-norm state has no quantum-state encoding")
        return self.values / nrm


@dataclass
class EvolutionReport:
    norm_drift: list = field(default_factory=list)
    sum_drift: list = field(default_factory=list)
    boundary_fraction: list = field(default_factory=list)
    boundary_mass: list = field(default_factory=list)
    min_real: list = field(default_factory=list)
    max_imag: float = 0.0
    total_norm_drift: float = 0.0
    total_sum_drift: float = 0.0
    backend: str = "dense"
    states: list = field(default_factory=list, repr=False)

    @property
    def max_boundary_fraction(self) -> float:
        return max(self.boundary_fraction, default=0.0)

    @property
    def max_boundary_mass(self) -> float:
        return max(self.boundary_mass, default=0.0)

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "norm_drift": [float(v) for v in self.norm_drift],
            "sum_drift": [float(v) for v in self.sum_drift],
            "boundary_fraction": [float(v) for v in self.boundary_fraction],
            "boundary_mass": [float(v) for v in self.boundary_mass],
            "min_real": [float(v) for v in self.min_real],
            "max_imag": float(self.max_imag),
            "total_norm_drift": float(self.total_norm_drift),
            "total_sum_drift": float(self.total_sum_drift),
        }


class DenseExponential:
    """``exp(tA) v`` from a cached eigendecomposition of ``A^T A``."""

    def __init__(self, a_matrix):
        self.a = a_matrix.tocsr()
        dense = self.a.toarray()
        gram = dense.T @ dense
        lam, self.q = sla.eigh(gram, driver="evd", overwrite_a=True, check_finite=False)
        self.mu = np.sqrt(np.clip(lam, 0.0, None))

    def apply(self, t: float, v: np.ndarray) -> np.ndarray:
        coeff = self.q.T @ v
        cos_part = self.q @ (np.cos(t * self.mu) * coeff)
        sin_part = self.q @ (t * np.sinc(t * self.mu / np.pi) * coeff)
        return cos_part + self.a @ sin_part


def lanczos_expm(h, v: np.ndarray, tau: float, tol_abs: float, max_iter: int = KRYLOV_MAX_ITER):
    """Approximate ``exp(-i tau H) v`` for Hermitian sparse ``h``.

    Returns ``(w, error_estimate, converged)``.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0 or tau == 0:
        return v.copy(), 0.0, True
    n = v.shape[0]
    m_cap = min(max_iter, n)
    basis = np.zeros((m_cap + 1, n), dtype=np.complex128)
    basis[0] = v / beta0
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    err = np.inf
    for j in range(m_cap):
        w = h @ basis[j]
        alpha[j] = np.vdot(basis[j], w).real
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        # full reorthogonalisation, twice is enough
        for _ in range(2):
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        m = j + 1
        breakdown = beta[j] <= 1e-14 * max(1.0, abs(alpha[: m]).max(initial=0.0))
        if breakdown or m == m_cap or m % 4 == 0:
            ev, vec = sla.eigh_tridiagonal(alpha[:m], beta[: m - 1])
            small = vec @ (np.exp(-1j * tau * ev) * vec[0].conj())
            err = 0.0 if breakdown else beta0 * beta[j] * abs(small[-1])
            if err <= tol_abs or m == m_cap:
                return beta0 * (basis[:m].T @ small), err, err <= tol_abs
        basis[j + 1] = w / beta[j]
    raise AssertionError("unreachable")


def _krylov_step(h, v, tau, tol_abs, depth=0, max_iter=KRYLOV_MAX_ITER, max_depth=_MAX_SPLIT_DEPTH):
    w, err, ok = lanczos_expm(h, v, tau, tol_abs, max_iter)
    if ok:
        return w, err
    if depth >= max_depth:
        raise KrylovConvergenceError(
            f"Lanczos did not reach tolerance {tol_abs:.3e} (residual {err:.3e})", residual=err
        )
    half, e1 = _krylov_step(h, v, tau / 2, tol_abs / 2, depth + 1, max_iter, max_depth)
    out, e2 = _krylov_step(h, half, tau / 2, tol_abs / 2, depth + 1, max_iter, max_depth)
    return out, e1 + e2


class Propagator:
    """Caches per-slice generators so repeated runs reuse decompositions."""

    def __init__(self, grid: PhaseSpaceGrid, ff: ForceField, backend: str = "dense",
                 krylov_max_iter: int = KRYLOV_MAX_ITER, max_split_depth: int = _MAX_SPLIT_DEPTH):
        if backend not in ("dense", "krylov"):
            raise DomainError(f"unknown backend {backend!r}")
        ff.check_grid(grid)
        self.grid, self.ff, self.backend = grid, ff, backend
        self.krylov_max_iter, self.max_split_depth = krylov_max_iter, max_split_depth
        self._cache = {}

    def _generator(self, i_t: int):
        key = self.ff.slice(i_t).tobytes()
        if key not in self._cache:
            a = assemble(self.grid, self.ff, i_t).matrix
            self._cache[key] = DenseExponential(a) if self.backend == "dense" else a.tocsr()
        return self._cache[key]

    def step(self, v: np.ndarray, i_t: int, dt: float, tol_abs: float = 0.0) -> np.ndarray:
        gen = self._generator(i_t)
        if self.backend == "dense":
            return gen.apply(dt, v)
        h = (1j * gen).tocsr()
        out, _ = _krylov_step(h, np.asarray(v, dtype=np.complex128), dt, tol_abs, 0,
                              self.krylov_max_iter, self.max_split_depth)
        return out


def boundary_fraction(grid: PhaseSpaceGrid, values: np.ndarray, power: int = 2) -> float:
    """Share of ``sum |f|**power`` on the outermost velocity cells.

    ``power=2`` is the norm fraction; ``power=1`` is the mass fraction, which
    is what bounds the leak of ``sum f`` through the velocity boundary.
    """
    w = np.abs(values) ** power
    total = w.sum()
    return float(w[grid.velocity_boundary_mask()].sum() / total) if total > 0 else 0.0


def evolve(
    state0: DistributionState,
    grid: PhaseSpaceGrid,
    ff: ForceField,
    T: float,
    n_t: int | None = None,
    backend: str = "dense",
    tol: float = 1e-10,
    propagator: Propagator | None = None,
    keep_states: bool = False,
):
    """Evolve ``state0`` over ``[0, T]`` in ``n_t`` piecewise-constant steps.

    For the Krylov backend each step gets the tolerance ``tol * |f| / n_t`` so
    the accumulated error stays below ``tol * |f|``.  With ``keep_states`` the
    report also holds the state at every step boundary, starting at t = 0.
    """
    if n_t is None:
        n_t = ff.n_t
    v = state0.values.copy()
    if grid.n_total != v.shape[0]:
        raise DomainError(f"state has {v.shape[0]} entries, grid expects {grid.n_total}")
    report = EvolutionReport(backend=backend)
    report.boundary_fraction.append(boundary_fraction(grid, v))
    report.boundary_mass.append(boundary_fraction(grid, v, power=1))
    report.min_real.append(float(v.real.min()))
    if keep_states:
        report.states.append(state0)
    if n_t == 0 or T == 0:
        report.max_imag = float(np.abs(v.imag).max(initial=0.0))
        return DistributionState(v, state0.t), report
    if n_t != ff.n_t:
        raise DomainError(f"n_t={n_t} does not match the force field's n_t={ff.n_t}")
    if backend == "krylov" and not tol > 0:
        raise DomainError("krylov backend needs tol > 0")
    prop = propagator or Propagator(grid, ff, backend)
    if prop.grid != grid or prop.ff is not ff or prop.backend != backend:
        raise DomainError("propagator was built for a different run")
    dt = T / n_t
    norm0 = np.linalg.norm(v)
    sum0 = abs(v.sum())
    sum_scale = sum0 if sum0 > 0 else 1.0
    tol_abs = tol * norm0 / n_t
    start_sum = v.sum()
    for i_t in range(n_t):
        prev_norm, prev_sum = np.linalg.norm(v), v.sum()
        v = prop.step(v, i_t, dt, tol_abs)
        report.norm_drift.append(abs(np.linalg.norm(v) - prev_norm) / norm0)
        report.sum_drift.append(abs(v.sum() - prev_sum) / sum_scale)
        report.boundary_fraction.append(boundary_fraction(grid, v))
        report.boundary_mass.append(boundary_fraction(grid, v, power=1))
        report.min_real.append(float(v.real.min()))
        if keep_states:
            report.states.append(DistributionState(v, state0.t + (i_t + 1) * dt))
    report.max_imag = float(np.abs(v.imag).max(initial=0.0))
    report.total_norm_drift = abs(np.linalg.norm(v) - norm0) / norm0
    report.total_sum_drift = abs(v.sum() - start_sum) / sum_scale
    return DistributionState(v, state0.t + T), report


@dataclass
class BoxSizing:
    position_ratio: float
    velocity_ratio: float

    @property
    def position_flag(self) -> bool:
        return self.position_ratio > 1.0

    @property
    def velocity_flag(self) -> bool:
        return self.velocity_ratio > 1.0

    @property
    def messages(self) -> list[str]:
        out = []
        if self.position_flag:
            out.append(f"V*T/L = {self.position_ratio:.3g} > 1: particles may exit the box")
        if self.velocity_flag:
            out.append(f"F_max*T/V = {self.velocity_ratio:.3g} > 1: particles may exit the box")
        return out


def check_box_sizing(grid: PhaseSpaceGrid, ff: ForceField, T: float) -> BoxSizing:
    return BoxSizing(grid.V * T / grid.L, ff.f_max * T / grid.V)
