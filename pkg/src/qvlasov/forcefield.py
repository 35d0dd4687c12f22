"""Piecewise-time-constant external force samples on the spatial grid.

The VQFF1 container stores every sample the evolution needs, in the order it
is consumed::

    b"VQFF1\\n"
    u32 d, u32 n_gr, u32 n_t, u32 n_IV          (little endian)
    f64 values[n_IV][n_t][d][n_gr**d]           (little endian, x fastest)

The same container carries initial-condition perturbations (see
:func:`qvlasov.initcond.load_perturbation`).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DomainError, ForceFileError
from .grid import PhaseSpaceGrid

MAGIC = b"VQFF1\n"
_HEADER = struct.Struct("<4I")


@dataclass(frozen=True)
class ForceField:
    """Force samples with shape ``(n_t, d, n_gr**d)``."""

    samples: np.ndarray
    n_gr: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if s.ndim != 3 or s.shape[0] < 1:
            raise DomainError(f"samples must have shape (n_t, d, n_gr**d), got {s.shape}")
        if s.shape[2] != self.n_gr ** s.shape[1]:
            raise DomainError(f"spatial length {s.shape[2]} != n_gr**d for n_gr={self.n_gr}")
        if not np.all(np.isfinite(s)):
            raise DomainError("force samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def n_t(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @cached_property
    def f_max(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    def slice(self, i_t: int) -> np.ndarray:
        if not 0 <= i_t < self.n_t:
            raise DomainError(f"interval index {i_t} outside [0, {self.n_t})")
        return self.samples[i_t]

    def check_grid(self, grid: PhaseSpaceGrid):
        if (self.d, self.n_gr) != (grid.d, grid.n_gr):
            raise DomainError(
                f"force field is (d={self.d}, n_gr={self.n_gr}) but grid is "
                f"(d={grid.d}, n_gr={grid.n_gr})"
            )


@dataclass(frozen=True)
class AnalyticForce:
    """``F_x(x) = amplitude * sin(wavenumber * x)``; other components vanish."""

    amplitude: float
    wavenumber: float

    def __call__(self, x):
        return self.amplitude * np.sin(self.wavenumber * np.asarray(x))


def sample_analytic(force: AnalyticForce, grid: PhaseSpaceGrid, n_t: int = 1) -> ForceField:
    if n_t < 1:
        raise DomainError("n_t must be >= 1")
    spatial = np.arange(grid.n_spatial)
    ix = spatial % grid.n_gr
    one = np.zeros((grid.d, grid.n_spatial))
    one[0] = force(grid.x[ix])
    return ForceField(np.broadcast_to(one, (n_t,) + one.shape), grid.n_gr)


def force_at(ff: ForceField, i_t: int, spatial_index, axis: int) -> float:
    if not 0 <= axis < ff.d:
        raise DomainError(f"axis {axis} outside [0, {ff.d})")
    idx = tuple(int(i) for i in spatial_index)
    if len(idx) != ff.d or any(not 0 <= i < ff.n_gr for i in idx):
        raise DomainError(f"spatial index {spatial_index!r} out of range")
    flat = sum(i * ff.n_gr**k for k, i in enumerate(idx))
    return float(ff.slice(i_t)[axis, flat])


@dataclass(frozen=True)
class ForceEnsemble:
    """Force fields of ``n_IV`` independent realizations sharing one shape."""

    fields: tuple = field(default_factory=tuple)

    def __post_init__(self):
        fields = tuple(self.fields)
        if not fields:
            raise DomainError("an ensemble needs at least one realization")
        shape = (fields[0].d, fields[0].n_gr, fields[0].n_t)
        for k, ff in enumerate(fields):
            if (ff.d, ff.n_gr, ff.n_t) != shape:
                raise DomainError(
                    f"realization {k} has (d, n_gr, n_t)={(ff.d, ff.n_gr, ff.n_t)}, expected {shape}"
                )
        object.__setattr__(self, "fields", fields)

    @property
    def n_iv(self) -> int:
        return len(self.fields)

    def __getitem__(self, i_iv: int) -> ForceField:
        if not 0 <= i_iv < self.n_iv:
            raise DomainError(f"realization index {i_iv} outside [0, {self.n_iv})")
        return self.fields[i_iv]

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return self.n_iv


def ensemble_force_at(ensemble, i_iv: int, i_t: int, spatial_index, axis: int) -> float:
    if not isinstance(ensemble, ForceEnsemble):
        ensemble = ForceEnsemble(tuple(ensemble))
    return force_at(ensemble[i_iv], i_t, spatial_index, axis)


def write_vqff(path, values, n_gr: int):
    """Write ``values`` of shape ``(n_IV, n_t, d, n_gr**d)`` as a VQFF1 file."""
    values = np.asarray(values, dtype="<f8")
    if values.ndim != 4:
        raise DomainError("values must have shape (n_IV, n_t, d, n_gr**d)")
    n_iv, n_t, d, n_sp = values.shape
    if n_sp != n_gr**d:
        raise DomainError(f"last axis {n_sp} != n_gr**d = {n_gr**d}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(d, n_gr, n_t, n_iv))
        fh.write(np.ascontiguousarray(values).tobytes())


def write_force_field(path, ff):
    """Write a :class:`ForceField` or iterable of them (an ensemble)."""
    fields = [ff] if isinstance(ff, ForceField) else list(ff)
    write_vqff(path, np.stack([f.samples for f in fields]), fields[0].n_gr)


def read_vqff(path) -> tuple[dict, np.ndarray]:
    """Parse a VQFF1 file into ``(header, values[n_IV, n_t, d, n_gr**d])``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ForceFileError(f"{path}: bad magic, expected {MAGIC!r}")
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise ForceFileError(f"{path}: truncated header")
    d, n_gr, n_t, n_iv = _HEADER.unpack_from(raw, len(MAGIC))
    header = dict(d=d, n_gr=n_gr, n_t=n_t, n_iv=n_iv)
    if d not in (1, 2, 3) or n_gr < 2 or n_gr & (n_gr - 1) or n_t < 1 or n_iv < 1:
        raise ForceFileError(f"{path}: malformed header {header}")
    count = n_iv * n_t * d * n_gr**d
    body = raw[len(MAGIC) + _HEADER.size :]
    if len(body) != 8 * count:
        raise ForceFileError(
            f"{path}: payload has {len(body)} bytes, header implies {8 * count}"
        )
    values = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(n_iv, n_t, d, n_gr**d)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i_iv, i_t, axis, sp = (int(v) for v in bad[0])
        raise ForceFileError(
            f"{path}: non-finite value at record (i_IV={i_iv}, i_t={i_t}, axis={axis}, spatial={sp})"
        )
    return header, values


def _check_header(path, header, grid, n_t):
    if (header["d"], header["n_gr"]) != (grid.d, grid.n_gr):
        raise ForceFileError(
            f"{path}: dimension mismatch, file has d={header['d']}, n_gr={header['n_gr']} "
            f"but grid has d={grid.d}, n_gr={grid.n_gr}"
        )
    if n_t is not None and header["n_t"] != n_t:
        raise ForceFileError(f"{path}: file has n_t={header['n_t']} but run uses n_t={n_t}")


def load_force_ensemble(path, grid: PhaseSpaceGrid, n_t: int | None = None) -> ForceEnsemble:
    header, values = read_vqff(path)
    _check_header(path, header, grid, n_t)
    return ForceEnsemble(tuple(ForceField(v, grid.n_gr) for v in values))


def load_force_field(path, grid: PhaseSpaceGrid, n_t: int | None = None, realization: int | None = None) -> ForceField:
    ens = load_force_ensemble(path, grid, n_t)
    if realization is None:
        if ens.n_iv != 1:
            raise ForceFileError(
                f"{path}: file holds {ens.n_iv} realizations; pass realization= or use load_force_ensemble"
            )
        realization = 0
    return ens[realization]
