"""Amplitude estimation emulated at the level of measurement statistics.

A Grover power ``k`` applied to a state with good-outcome amplitude
``a = sin^2(theta)`` yields "good" with probability ``sin^2((2k+1) theta)``.
Both schemes sample those outcomes with exact probabilities, estimate theta,
and repeat the whole run ``R`` times, reporting the median.  Oracle calls are
counted as ``sum (2k + 1) * shots`` across all runs.

``sampling-mle``
    Equal shots at powers ``0, 1, 2, 4, ..., 2**m``; maximum likelihood over
    theta.  ``m`` is the smallest power whose Fisher-information standard
    error in ``a`` is at most ``eps / z``, and the shot count is then trimmed
    to the fewest that still meet that bound.
``iterative``
    Interval narrowing with Hoeffding bounds; at each round the largest
    power keeping the interval inside a monotone half-period is chosen.  The
    run stops once the interval in ``a`` is at most ``eps`` wide and returns
    the likelihood maximiser inside it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .forcefield import ForceField
from .grid import PhaseSpaceGrid
from .initcond import compute_C
from .propagator import DistributionState, evolve
from .spectrum import fourier, density, mode_index, perturbation, shell_mask, w_amplitudes

SCHEMES = ("sampling-mle", "iterative")
_SNAP = 1e-12


@dataclass(frozen=True)
class QaeConfig:
    eps: float
    delta_fail: float = 0.05
    seed: int = 0
    scheme: str = "sampling-mle"
    shots: int = 100
    z: float = 2.5  # standard errors per eps for the MLE schedule
    run_failure: float = 0.1  # assumed failure rate of one run, sets the median count

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise DomainError(f"eps must lie in (0, 1/2), got {self.eps}")
        if not 0 < self.delta_fail < 1:
            raise DomainError(f"delta_fail must lie in (0, 1), got {self.delta_fail}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.shots < 1:
            raise DomainError("shots must be >= 1")


@dataclass
class QaeResult:
    estimate: float
    true_value: float
    oracle_calls: int
    eps: float

    @property
    def error(self) -> float:
        return abs(self.estimate - self.true_value)

    @property
    def success(self) -> bool:
        return self.error <= self.eps

    def as_dict(self) -> dict:
        return {
            "estimate": float(self.estimate),
            "true_value": float(self.true_value),
            "oracle_calls": int(self.oracle_calls),
            "eps": float(self.eps),
            "success": bool(self.success),
        }


def median_runs(delta_fail: float, run_failure: float = 0.1) -> int:
    """Smallest odd R with P[at least half of R runs fail] <= delta_fail."""
    r = 1
    while stats.binom.sf((r - 1) // 2, r, run_failure) > delta_fail:
        r += 2
    return r


def _required_information(eps: float, z: float) -> float:
    # worst case over theta: sd(a) = sin(2 theta) * sd(theta) <= 1 / (2 sqrt(info))
    return (z / (2.0 * eps)) ** 2


def mle_schedule(eps: float, shots: int, z: float = 2.5) -> np.ndarray:
    """Powers ``[0, 1, 2, ..., 2**m]`` for the maximum-likelihood scheme.

    ``m`` is the smallest power at which ``shots`` per power reach the
    required Fisher information.
    """
    need = _required_information(eps, z)
    powers = [0]
    while shots * sum((2 * k + 1) ** 2 for k in powers) < need:
        powers.append(1 if powers[-1] == 0 else 2 * powers[-1])
    return np.array(powers)


def mle_shots(eps: float, shots: int, z: float = 2.5) -> int:
    """Shots per power actually used: just enough to meet the information target.

    Trimming below ``shots`` on the final schedule keeps the call count close
    to proportional to ``1 / eps`` instead of jumping at each new power.
    """
    ks = mle_schedule(eps, shots, z)
    return min(shots, math.ceil(_required_information(eps, z) / float(np.sum((2 * ks + 1) ** 2))))


def _good_probability(theta, k):
    p = np.sin((2 * np.asarray(k) + 1) * theta) ** 2
    return np.where(p < _SNAP, 0.0, np.where(p > 1 - _SNAP, 1.0, p))


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _loglik(theta, hits, shots, ks):
    """Log-likelihood with ``theta`` of shape (runs, m); returns (runs, m)."""
    p = np.clip(_good_probability(theta[..., None], ks), 1e-300, 1.0)
    q = np.clip(1.0 - p, 1e-300, 1.0)
    return np.einsum("rgk,rk->rg", np.log(p), hits) + np.einsum("rgk,rk->rg", np.log(q), shots - hits)


def _mle_chunk(hits, shots, ks, lo, hi):
    runs = hits.shape[0]
    g = max(256, 32 * (2 * int(ks.max()) + 1))
    grid = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, g + 1)[None, :]
    ll = _loglik(grid, hits, shots, ks)
    best = np.argmax(ll, axis=1)
    rows = np.arange(runs)
    theta = grid[rows, best]
    interior = (best > 0) & (best < g)
    if not np.any(interior):
        return theta
    idx = rows[interior]
    a = grid[idx, best[interior] - 1]
    b = grid[idx, best[interior] + 1]
    h, s = hits[idx], shots[idx]
    ratio = (math.sqrt(5) - 1) / 2
    for _ in range(50):
        c = b - ratio * (b - a)
        d = a + ratio * (b - a)
        f = _loglik(np.stack([c, d], axis=1), h, s, ks)
        left = f[:, 0] >= f[:, 1]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    refined = (a + b) / 2
    better = _loglik(refined[:, None], h, s, ks)[:, 0] >= ll[idx, best[interior]]
    theta[idx] = np.where(better, refined, theta[idx])
    return theta


def _mle(hits: np.ndarray, shots: np.ndarray, ks: np.ndarray, lo=None, hi=None) -> np.ndarray:
    """Vectorised likelihood maximisation over theta in ``[lo, hi]`` per run.

    A grid fine enough to resolve the fastest oscillation is scanned first and
    the best interior point is refined by golden-section search.  A winning
    endpoint is kept as is, so all-bad data gives exactly 0 and all-good data
    exactly pi/2.
    """
    runs = hits.shape[0]
    lo = np.zeros(runs) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(runs, np.pi / 2) if hi is None else np.asarray(hi, dtype=float)
    g = max(256, 32 * (2 * int(ks.max()) + 1))
    chunk = max(1, 4_000_000 // (g * ks.size))
    out = np.empty(runs)
    for s in range(0, runs, chunk):
        sl = slice(s, s + chunk)
        out[sl] = _mle_chunk(hits[sl], shots[sl], ks, lo[sl], hi[sl])
    return out


def _theta(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"amplitude must lie in [0, 1], got {a}")
    return math.asin(math.sqrt(a))


def _mle_batch(a: float, cfg: QaeConfig, trials, runs: int):
    theta = _theta(a)
    ks = mle_schedule(cfg.eps, cfg.shots, cfg.z)
    n_shots = mle_shots(cfg.eps, cfg.shots, cfg.z)
    probs = _good_probability(theta, ks)
    hits = np.stack([_trial_rng(cfg.seed, t).binomial(n_shots, probs, size=(runs, ks.size)) for t in trials])
    flat = hits.reshape(-1, ks.size).astype(float)
    shots = np.full_like(flat, n_shots)
    est = np.sin(_mle(flat, shots, ks)) ** 2
    calls = runs * n_shots * int(np.sum(2 * ks + 1))
    return est.reshape(len(trials), runs), np.full(len(trials), calls, dtype=np.int64)


def _next_power(k: int, lo: float, hi: float, min_ratio: float = 2.0):
    """Largest ``K = 4k' + 2`` with ``K*[lo, hi]`` inside one half-period of cos."""
    k_cur = 4 * k + 2
    k_max = int(math.pi / (hi - lo)) if hi > lo else 10**9
    k_try = k_max - (k_max - 2) % 4
    while k_try >= min_ratio * k_cur:
        if math.floor(k_try * lo / math.pi) == math.floor(k_try * hi / math.pi):
            return (k_try - 2) // 4
        k_try -= 4
    return k


def _iterative_run(theta: float, cfg: QaeConfig, rng: np.random.Generator):
    eps_theta = cfg.eps / 2.0  # |da/dtheta| <= 1 and the stop rule works on a directly
    max_rounds = max(1, math.ceil(math.log2(math.pi / (8 * eps_theta))))
    alpha = cfg.run_failure
    lo, hi = 0.0, math.pi / 2
    k = 0
    counts = {}
    calls = 0
    for _ in range(100 * max_rounds):
        if math.sin(hi) ** 2 - math.sin(lo) ** 2 <= cfg.eps:
            break
        k = _next_power(k, lo, hi)
        good = int(rng.binomial(cfg.shots, float(_good_probability(theta, k))))
        calls += (2 * k + 1) * cfg.shots
        h, n = counts.get(k, (0, 0))
        counts[k] = (h + good, n + cfg.shots)
        h, n = counts[k]
        half = math.sqrt(math.log(2 * max_rounds / alpha) / (2 * n))
        p_lo, p_hi = max(0.0, h / n - half), min(1.0, h / n + half)
        kk = 4 * k + 2
        j = math.floor(kk * lo / math.pi)
        if j % 2 == 0:
            phi_lo, phi_hi = math.acos(1 - 2 * p_lo), math.acos(1 - 2 * p_hi)
        else:
            phi_lo, phi_hi = math.pi - math.acos(1 - 2 * p_hi), math.pi - math.acos(1 - 2 * p_lo)
        lo = max(lo, (j * math.pi + phi_lo) / kk)
        hi = min(hi, (j * math.pi + phi_hi) / kk)
        if hi < lo:  # inconsistent data; collapse onto the midpoint
            lo = hi = (lo + hi) / 2
    ks = np.array(sorted(counts))
    hits = np.array([[counts[k][0] for k in ks]], dtype=float)
    shots = np.array([[counts[k][1] for k in ks]], dtype=float)
    th = _mle(hits, shots, ks, lo=np.array([lo]), hi=np.array([hi]))[0]
    return math.sin(th) ** 2, calls


def _iterative_batch(a: float, cfg: QaeConfig, trials, runs: int):
    theta = _theta(a)
    est = np.zeros((len(trials), runs))
    calls = np.zeros(len(trials), dtype=np.int64)
    for i, t in enumerate(trials):
        rng = _trial_rng(cfg.seed, t)
        for r in range(runs):
            est[i, r], c = _iterative_run(theta, cfg, rng)
            calls[i] += c
    return est, calls


def qae_estimate_batch(a: float, cfg: QaeConfig, trials=1):
    """Estimates and oracle-call counts for trials ``0..trials-1`` (or the given ids)."""
    trial_ids = list(range(trials)) if isinstance(trials, (int, np.integer)) else list(trials)
    runs = median_runs(cfg.delta_fail, cfg.run_failure)
    fn = _mle_batch if cfg.scheme == "sampling-mle" else _iterative_batch
    est, calls = fn(float(a), cfg, trial_ids, runs)
    return np.clip(np.median(est, axis=1), 0.0, 1.0), calls


def qae_estimate(a: float, cfg: QaeConfig, trial: int = 0) -> QaeResult:
    est, calls = qae_estimate_batch(a, cfg, [trial])
    return QaeResult(float(est[0]), float(a), int(calls[0]), cfg.eps)


def exact_amplitude(state: DistributionState, grid: PhaseSpaceGrid, target) -> float:
    """``|<target, 0_v| W |f>|^2 / |f|^2``, which equals ``C |delta~_target|^2``."""
    idx = mode_index(grid, target)
    if idx == 0:
        raise DomainError("the zero wavevector is excluded")
    return float(abs(w_amplitudes(state, grid)[idx]) ** 2)


@dataclass
class Algorithm1Result:
    estimates: np.ndarray
    exact: float
    amplitude: float
    C: float
    eps: float
    qae_eps: float
    evolution_tol: float
    oracle_calls: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    deterministic: bool = False

    @property
    def estimate(self) -> float:
        return float(self.estimates[0])

    @property
    def successes(self) -> np.ndarray:
        return np.abs(self.estimates - self.exact) <= self.eps

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "exact": float(self.exact),
            "amplitude": float(self.amplitude),
            "C": float(self.C),
            "eps": float(self.eps),
            "qae_eps": float(self.qae_eps),
            "evolution_tol": float(self.evolution_tol),
            "deterministic": self.deterministic,
            "trials": int(self.estimates.size),
            "success_rate": float(np.mean(self.successes)),
            "mean_oracle_calls": float(np.mean(self.oracle_calls)) if self.oracle_calls.size else 0.0,
        }


def _budget(C: float, cfg: QaeConfig, evolution_fraction: float, qae_fraction: float):
    evo_tol = evolution_fraction * C * cfg.eps
    qae_eps = qae_fraction * C * cfg.eps
    if qae_eps >= 0.5:
        warnings.warn(f"QAE accuracy {qae_eps:.3g} >= 1/2 is degenerate; clamped to 0.49", RuntimeWarning)
        qae_eps = 0.49
    return evo_tol, qae_eps


def _estimate_probability(mask, state0, grid, ff, T, n_t, C, cfg, backend, deterministic, trials,
                          evolution_fraction, qae_fraction, propagator=None):
    if C is None:
        C = compute_C(state0)
    evo_tol, qae_eps = _budget(C, cfg, evolution_fraction, qae_fraction)
    final, _ = evolve(state0, grid, ff, T, n_t, backend=backend, tol=evo_tol, propagator=propagator)
    amps = w_amplitudes(final, grid, norm=state0.norm)
    p = float(min(1.0, np.sum(np.abs(amps[mask]) ** 2)))
    exact = float(np.sum(np.abs(fourier(perturbation(density(final, grid)), grid)[mask]) ** 2))
    if deterministic:
        est, calls = np.array([p]), np.zeros(1, dtype=np.int64)
    else:
        qcfg = QaeConfig(qae_eps, cfg.delta_fail, cfg.seed, cfg.scheme, cfg.shots, cfg.z, cfg.run_failure)
        est, calls = qae_estimate_batch(p, qcfg, trials)
    return Algorithm1Result(est / C, exact, p, C, cfg.eps, qae_eps, evo_tol, calls, deterministic)


def algorithm1(state0, grid, ff: ForceField, T, n_t, target, C=None, cfg: QaeConfig | None = None,
               backend="dense", deterministic=False, trials=1, evolution_fraction=0.25, qae_fraction=0.25,
               propagator=None) -> Algorithm1Result:
    """Estimate ``|delta~_target(T)|^2`` by evolution, W, and amplitude estimation.

    The evolution tolerance and the QAE accuracy are each ``C * eps / 4`` by
    default; the QAE output ``p`` is divided by ``C``.  ``exact`` in the
    result is ``|delta~|^2`` of the evolved state via the direct density/DFT
    route.
    """
    cfg = cfg or QaeConfig(0.05)
    idx = mode_index(grid, target)
    if idx == 0:
        raise DomainError("the zero wavevector is excluded")
    mask = np.zeros(grid.n_spatial, dtype=bool)
    mask[idx] = True
    return _estimate_probability(mask, state0, grid, ff, T, n_t, C, cfg, backend, deterministic, trials,
                                 evolution_fraction, qae_fraction, propagator)


def algorithm1_shell(state0, grid, ff: ForceField, T, n_t, k1, k2, C=None, cfg: QaeConfig | None = None,
                     backend="dense", deterministic=False, trials=1, evolution_fraction=0.25,
                     qae_fraction=0.25, propagator=None) -> Algorithm1Result:
    """Shell-integrated variant: QAE on the summed probability of every mode in the shell."""
    cfg = cfg or QaeConfig(0.05)
    mask = shell_mask(grid, k1, k2)
    mask[0] = False
    if not mask.any():
        raise DomainError(f"shell [{k1}, {k2}] holds no nonzero mode")
    return _estimate_probability(mask, state0, grid, ff, T, n_t, C, cfg, backend, deterministic, trials,
                                 evolution_fraction, qae_fraction, propagator)
