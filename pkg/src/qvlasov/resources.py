"""Unit-constant query and qubit estimates for the quantum solver.

Every big-O constant is set to 1 and every log is natural, so the numbers
are indicative (``unit-constant estimate``) and mainly useful for scaling
comparisons.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError

LABEL = "unit-constant estimate"


@dataclass(frozen=True)
class ResourceParams:
    n_gr: int
    n_t: int
    T: float
    L: float
    V: float
    F_max: float
    eps: float
    d: int = 3
    delta_fail: float = 0.05
    C: float = 1.0
    n_iv: int = 1

    def __post_init__(self):
        for name in ("n_gr", "n_t", "T", "L", "V"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.F_max < 0:
            raise DomainError("F_max must be nonnegative")
        if not 0 < self.eps < 0.5:
            raise DomainError(f"eps must lie in (0, 1/2), got {self.eps}")
        if not 0 < self.delta_fail < 1:
            raise DomainError("delta_fail must lie in (0, 1)")
        if not 0 < self.C <= 1:
            raise DomainError("C must lie in (0, 1]")
        if self.d not in (1, 2, 3) or self.n_iv < 1:
            raise DomainError("d must be 1, 2 or 3 and n_iv >= 1")

    @property
    def crossing_rate(self) -> float:
        """``max{V/L, F_max/V}``: inverse time to cross the box."""
        return max(self.V / self.L, self.F_max / self.V)

    def replace(self, **kw) -> "ResourceParams":
        return ResourceParams(**{**asdict(self), **kw})


def theorem1_queries(p: ResourceParams, eps: float | None = None) -> float:
    """Force-oracle queries to build the evolved state at accuracy ``eps``.

    ``n_gr T max{V/L, F_max/V} + n_t ln(n_t / eps)``.
    """
    eps = p.eps if eps is None else eps
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    return p.n_gr * p.T * p.crossing_rate + p.n_t * math.log(p.n_t / eps)


def simplified_queries(p: ResourceParams, eps: float | None = None) -> float:
    """Same count once ``V T = L`` and ``F_max T = V``: ``n_gr + n_t ln(n_t / eps)``."""
    eps = p.eps if eps is None else eps
    return p.n_gr + p.n_t * math.log(p.n_t / eps)


def working_qubits(p: ResourceParams) -> int:
    """``2 lg N_gr + 5`` with ``N_gr = n_gr**(2d)``."""
    return int(2 * round(2 * p.d * math.log2(p.n_gr)) + 5)


def ancilla_qubits(p: ResourceParams, eps: float | None = None) -> float:
    eps = p.eps if eps is None else eps
    arg = p.n_gr * p.T * p.crossing_rate / eps
    if not arg > 1:
        raise DomainError(f"log argument {arg:.3g} must exceed 1")
    return math.log(arg) ** 2.5


def theorem1_qubits(p: ResourceParams) -> dict:
    anc = ancilla_qubits(p)
    work = working_qubits(p)
    return {"ancilla": anc, "working": work, "total": anc + work, "label": LABEL}


def qae_repetitions(p: ResourceParams) -> float:
    """``(1 / (C eps)) ln(1 / delta)``; also the initial-state oracle count."""
    return math.log(1.0 / p.delta_fail) / (p.C * p.eps)


@dataclass(frozen=True)
class ResourceEstimate:
    params: ResourceParams
    per_build_queries: float
    repetitions: float
    total_queries: float
    initial_state_queries: float
    ancilla_qubits: float
    working_qubits: int
    simplified_per_build: float
    simplified_total: float
    classical_queries: float

    @property
    def total_qubits(self) -> float:
        return self.ancilla_qubits + self.working_qubits

    def as_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "params"}
        out["total_qubits"] = self.total_qubits
        out["inputs"] = asdict(self.params)
        out["label"] = LABEL
        return out


def classical_queries(p: ResourceParams) -> float:
    """Classical grid-update count ``n_t * n_gr**(2d)``."""
    return float(p.n_t) * float(p.n_gr) ** (2 * p.d)


def theorem2_totals(p: ResourceParams) -> ResourceEstimate:
    """Queries to estimate one power-spectrum mode to ``eps`` w.p. ``1 - delta``.

    Each QAE repetition rebuilds the evolved state at accuracy ``C eps / 4``.
    """
    build_eps = p.C * p.eps / 4.0
    per_build = theorem1_queries(p, build_eps)
    reps = qae_repetitions(p)
    return ResourceEstimate(
        params=p,
        per_build_queries=per_build,
        repetitions=reps,
        total_queries=per_build * reps,
        initial_state_queries=reps,
        ancilla_qubits=ancilla_qubits(p, p.C * p.eps),
        working_qubits=working_qubits(p),
        simplified_per_build=simplified_queries(p, build_eps),
        simplified_total=simplified_queries(p, build_eps) * reps,
        classical_queries=classical_queries(p),
    )


def qram_footprint(p: ResourceParams) -> dict:
    """Entry counts of the memories holding the force field and initial data."""
    per_slice = p.n_gr**p.d * p.n_iv
    return {
        "qrams": p.n_t * p.d,
        "entries_per_qram": per_slice,
        "force_entries": p.n_t * p.d * per_slice,
        "delta_entries": p.n_gr**p.d * p.n_iv,
        "bulk_velocity_entries": p.d * p.n_gr**p.d * p.n_iv,
    }


def crossover_n_gr(p: ResourceParams, n_max: int = 2**20):
    """Smallest power-of-two n_gr where the quantum total drops below classical.

    Every other input is held fixed.  Returns None if there is no crossover
    up to ``n_max``.
    """
    n = 2
    while n <= n_max:
        q = p.replace(n_gr=n)
        if theorem2_totals(q).total_queries < classical_queries(q):
            return n
        n *= 2
    return None


def parse_sweep(text: str):
    """``"ngr=16:1024:*2"`` -> ``("n_gr", [16, 32, ..., 1024])``.

    The step is ``*f`` (geometric) or ``+s`` (arithmetic).
    """
    aliases = {"ngr": "n_gr", "nt": "n_t", "tmax": "T", "eps": "eps", "fmax": "F_max"}
    try:
        name, rng = text.split("=", 1)
        start, stop, step = rng.split(":")
    except ValueError:
        raise DomainError(f"bad sweep {text!r}; expected name=start:stop:*factor or +step") from None
    name = aliases.get(name.strip().lower(), name.strip())
    if name not in ResourceParams.__dataclass_fields__:
        raise DomainError(f"unknown sweep parameter {name!r}")
    cast = int if name in ("n_gr", "n_t", "d", "n_iv") else float
    lo, hi = cast(start), cast(stop)
    if step.startswith("*"):
        factor = float(step[1:])
        if factor <= 1:
            raise DomainError("geometric factor must exceed 1")
        advance = lambda v: cast(v * factor)
    elif step.startswith("+"):
        inc = cast(step[1:])
        if not inc > 0:
            raise DomainError("arithmetic step must be positive")
        advance = lambda v: v + inc
    else:
        raise DomainError(f"step {step!r} must start with * or +")
    values = []
    v = lo
    while v <= hi * (1 + 1e-12):
        values.append(v)
        v = advance(v)
    return name, values
