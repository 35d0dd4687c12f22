"""Sparse antisymmetric generator A(t_i) and its sparse-access oracles.

``df/dt = A f`` with ``A`` built from periodic central differences in
position (coefficient ``u / (2 dx)``) and Dirichlet central differences in
velocity (coefficient ``F / (2 dv)``).  The Hamiltonian is ``H = iA``; only
``A`` is stored.

The oracles follow the fixed displacement order ``k = 2a`` -> ``-e_a`` and
``k = 2a + 1`` -> ``+e_a`` over axes ``a = 0..2d-1`` (position axes first).
A displacement that leaves the velocity range yields the sentinel
``i + N_gr``; position displacements wrap periodically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, OracleMismatchError
from .forcefield import ForceField
from .grid import PhaseSpaceGrid


def _advection_coef(grid: PhaseSpaceGrid) -> np.ndarray:
    return grid.u / (2.0 * grid.dx)


def _forcing_coef(grid: PhaseSpaceGrid, force_slice: np.ndarray) -> np.ndarray:
    return np.asarray(force_slice) / (2.0 * grid.dv)


@dataclass(frozen=True)
class SparseHamiltonian:
    grid: PhaseSpaceGrid
    i_t: int
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def triples(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    @property
    def sparsity(self) -> int:
        rows = np.diff(self.matrix.indptr).max(initial=0)
        cols = np.diff(self.matrix.tocsc().indptr).max(initial=0)
        return int(max(rows, cols))

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max(initial=0.0))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermitian(self) -> sp.csr_matrix:
        return (1j * self.matrix).tocsr()

    def with_entry(self, i: int, j: int, value: float) -> "SparseHamiltonian":
        """Copy with a single entry overwritten (fault injection in tests)."""
        m = self.matrix.tolil(copy=True)
        m[i, j] = value
        return SparseHamiltonian(self.grid, self.i_t, m.tocsr())


def assemble(grid: PhaseSpaceGrid, ff: ForceField, i_t: int = 0) -> SparseHamiltonian:
    ff.check_grid(grid)
    force = ff.slice(i_t)
    n = grid.n_gr
    idx = grid.axis_index_arrays()
    flat = np.arange(grid.n_total)
    spatial = sum(idx[a] * n**a for a in range(grid.d))
    adv = _advection_coef(grid)
    rows, cols, vals = [], [], []
    for a in range(grid.d):
        stride = n**a
        c = adv[idx[grid.d + a]]
        up = flat + (((idx[a] + 1) % n) - idx[a]) * stride
        down = flat + (((idx[a] - 1) % n) - idx[a]) * stride
        rows += [flat, flat]
        cols += [up, down]
        vals += [-c, c]
    for a in range(grid.d):
        axis = grid.d + a
        stride = n**axis
        c = _forcing_coef(grid, force[a])[spatial]
        has_up = idx[axis] < n - 1
        has_down = idx[axis] > 0
        rows += [flat[has_up], flat[has_down]]
        cols += [flat[has_up] + stride, flat[has_down] - stride]
        vals += [-c[has_up], c[has_down]]
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_total, grid.n_total),
    ).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return SparseHamiltonian(grid, i_t, m)


def displacement(grid: PhaseSpaceGrid, k: int) -> tuple[int, int]:
    """``(axis, step)`` of the k-th structural displacement."""
    if not 0 <= k < 4 * grid.d:
        raise DomainError(f"k={k} outside [0, {4 * grid.d})")
    return k // 2, (1 if k % 2 else -1)


def oracle_row(grid: PhaseSpaceGrid, i, k: int):
    """Flat index of the k-th structural neighbour of row ``i`` (or ``i + N_gr``).

    ``i`` may be an integer or an integer array.
    """
    axis, step = displacement(grid, k)
    i = np.asarray(i, dtype=np.int64)
    if np.any((i < 0) | (i >= grid.n_total)):
        raise DomainError("row index out of range")
    n = grid.n_gr
    stride = n**axis
    coord = (i // stride) % n
    if axis < grid.d:
        new = (coord + step) % n
        out = i + (new - coord) * stride
    else:
        new = coord + step
        out = np.where((new < 0) | (new >= n), i + grid.n_total, i + step * stride)
    return int(out) if out.ndim == 0 else out


def oracle_col(grid: PhaseSpaceGrid, k: int, j):
    """Column oracle; the sparsity pattern is symmetric so it mirrors the row oracle."""
    return oracle_row(grid, j, k)


def oracle_entry(grid: PhaseSpaceGrid, ff: ForceField, i_t: int, i, j):
    """Value ``A_ij`` as the sum of per-axis advection and forcing contributions."""
    force = ff.slice(i_t)
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    n = grid.n_gr
    ii = np.stack([(i // n**a) % n for a in range(grid.n_axes)])
    jj = np.stack([(j // n**a) % n for a in range(grid.n_axes)])
    differs = ii != jj
    n_diff = differs.sum(axis=0)
    spatial = sum(ii[a] * n**a for a in range(grid.d))
    adv = _advection_coef(grid)
    total = np.zeros(np.broadcast(i, j).shape)
    for a in range(grid.d):
        only_a = differs[a] & (n_diff == 1)
        delta = (jj[a] - ii[a]) % n
        c = adv[ii[grid.d + a]]
        contrib = np.where(only_a & (delta == 1), -c, 0.0) + np.where(only_a & (delta == n - 1), c, 0.0)
        total = total + contrib
    for a in range(grid.d):
        axis = grid.d + a
        only_a = differs[axis] & (n_diff == 1)
        delta = jj[axis] - ii[axis]
        c = _forcing_coef(grid, force[a])[spatial]
        contrib = np.where(only_a & (delta == 1), -c, 0.0) + np.where(only_a & (delta == -1), c, 0.0)
        total = total + contrib
    return float(total) if total.ndim == 0 else total


@dataclass
class OracleReport:
    n_rows: int
    n_entries: int
    mismatches: list

    @property
    def mismatch_count(self) -> int:
        return len(self.mismatches)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def reconstruct_from_oracles(grid: PhaseSpaceGrid, ff: ForceField, i_t: int) -> sp.csr_matrix:
    rows = np.arange(grid.n_total)
    r, c, v = [], [], []
    for k in range(4 * grid.d):
        j = oracle_row(grid, rows, k)
        valid = j < grid.n_total
        r.append(rows[valid])
        c.append(j[valid])
        v.append(oracle_entry(grid, ff, i_t, rows[valid], j[valid]))
    r, c, v = np.concatenate(r), np.concatenate(c), np.concatenate(v)
    # at n_gr = 2 the +1/-1 neighbours coincide and each reports the full sum
    key = r * grid.n_total + c
    _, first = np.unique(key, return_index=True)
    return sp.csr_matrix((v[first], (r[first], c[first])), shape=(grid.n_total,) * 2)


def verify_oracles(h: SparseHamiltonian, ff: ForceField, raise_on_mismatch: bool = False) -> OracleReport:
    """Compare the oracle-reconstructed matrix with ``h`` entrywise, exactly."""
    grid = h.grid
    rebuilt = reconstruct_from_oracles(grid, ff, h.i_t).tocsr()
    assembled = h.matrix.tocsr()
    rebuilt.eliminate_zeros()
    assembled.eliminate_zeros()
    # for finite floats a - b == 0 exactly iff a == b, so the difference pattern is the mismatch set
    diff = (assembled - rebuilt).tocoo()
    diff.eliminate_zeros()
    order = np.lexsort((diff.col, diff.row))
    mismatches = [
        (int(i), int(j), float(assembled[i, j]), float(rebuilt[i, j]))
        for i, j in zip(diff.row[order], diff.col[order])
    ]
    report = OracleReport(grid.n_total, int(assembled.nnz), mismatches)
    if mismatches and raise_on_mismatch:
        i, j, lhs, rhs = mismatches[0]
        raise OracleMismatchError(
            f"{len(mismatches)} mismatches; first at (i={i}, j={j}): assembled {lhs!r} vs oracle {rhs!r}",
            first=(i, j),
            count=len(mismatches),
        )
    return report


def hmax_bound(grid: PhaseSpaceGrid, ff: ForceField) -> float:
    """``max{V/L, F_max/(2V)} * n_gr/2``, the closed-form max-norm bound."""
    return max(grid.V / grid.L, ff.f_max / (2.0 * grid.V)) * grid.n_gr / 2.0


def hmax_grid_bound(grid: PhaseSpaceGrid, ff: ForceField) -> float:
    """Tight max-norm bound using the actual grid spacings.

    ``max{max|u|/(2 dx), F_max/(2 dv)}``; attained whenever n_gr >= 4.
    """
    return max(float(np.max(np.abs(grid.u))) / (2.0 * grid.dx), ff.f_max / (2.0 * grid.dv))


def dump_matrix_csv(h: SparseHamiltonian, path):
    rows, cols, vals = h.triples()
    with open(path, "w") as fh:
        fh.write("i,j,value\n")
        for a, b, v in zip(rows, cols, vals):
            fh.write(f"{int(a)},{int(b)},{float(v)!r}\n")
