"""Phase-space grid: geometry and the multi-index <-> flat-index bijection.

Flat index convention: ``i = sum_k i_k * n_gr**k`` over the 2d axes, position
axes first and velocity axes after.  A flat state vector therefore reshapes to
an array indexed ``[i_x0, ..., i_x(d-1), i_v0, ..., i_v(d-1)]`` with
``order="F"``; every module goes through :meth:`PhaseSpaceGrid.as_tensor` for
that view.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PhaseSpaceGrid:
    d: int
    n_gr: int
    L: float
    V: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DomainError(f"spatial dimension must be 1, 2 or 3, got {self.d}")
        n = self.n_gr
        if not isinstance(n, (int, np.integer)) or n < 2 or n & (n - 1):
            raise DomainError(f"n_gr must be a power of 2 >= 2, got {n!r}")
        if not (self.L > 0 and self.V > 0):
            raise DomainError("box length L and velocity half-range V must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n_gr

    @property
    def dv(self) -> float:
        return 2.0 * self.V / (self.n_gr + 1)

    @property
    def n_axes(self) -> int:
        return 2 * self.d

    @property
    def n_spatial(self) -> int:
        return self.n_gr**self.d

    @property
    def n_total(self) -> int:
        return self.n_gr ** (2 * self.d)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_gr,) * (2 * self.d)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.arange(self.n_gr) * self.dx
        x.flags.writeable = False
        return x

    @cached_property
    def u(self) -> np.ndarray:
        n = self.n_gr
        half = np.array([-self.V + (i + 1) * self.dv for i in range(n // 2)])
        # mirror the lower half so that u[n-1-i] == -u[i] holds bit-for-bit
        u = np.concatenate([half, -half[::-1]])
        u.flags.writeable = False
        return u

    def flatten(self, multi_index) -> int:
        idx = tuple(int(i) for i in multi_index)
        if len(idx) != self.n_axes:
            raise DomainError(f"expected {self.n_axes} axis indices, got {len(idx)}")
        flat = 0
        for k, i in enumerate(idx):
            if not 0 <= i < self.n_gr:
                raise DomainError(f"axis {k} index {i} outside [0, {self.n_gr})")
            flat += i * self.n_gr**k
        return flat

    def unflatten(self, i: int) -> tuple[int, ...]:
        i = int(i)
        if not 0 <= i < self.n_total:
            raise DomainError(f"flat index {i} outside [0, {self.n_total})")
        out = []
        for _ in range(self.n_axes):
            i, r = divmod(i, self.n_gr)
            out.append(r)
        return tuple(out)

    def flatten_spatial(self, spatial_index) -> int:
        idx = tuple(int(i) for i in spatial_index)
        if len(idx) != self.d or any(not 0 <= i < self.n_gr for i in idx):
            raise DomainError(f"bad spatial index {spatial_index!r}")
        return sum(i * self.n_gr**k for k, i in enumerate(idx))

    def coordinate_values(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per-axis coordinate arrays ``([x, y, ...], [u, v, ...])``."""
        return [self.x] * self.d, [self.u] * self.d

    def as_tensor(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape, order="F")

    def as_flat(self, tensor: np.ndarray) -> np.ndarray:
        return np.asarray(tensor).reshape(-1, order="F")

    def axis_index_arrays(self) -> np.ndarray:
        """``(2d, N_gr)`` integer array of every flat index's axis indices."""
        flat = np.arange(self.n_total)
        return np.stack([(flat // self.n_gr**k) % self.n_gr for k in range(self.n_axes)])

    def velocity_boundary_mask(self) -> np.ndarray:
        """True at grid points with any velocity index equal to 0 or n_gr - 1."""
        idx = self.axis_index_arrays()[self.d :]
        return np.any((idx == 0) | (idx == self.n_gr - 1), axis=0)
