"""Bistable chain of coupled particles on a periodic lattice.

The potential is

    V(y) = sum_i U(y_i) + (gamma/4) sum_i (y_{i+1} - y_i)^2,   U(x) = (x^2 - 1)^2 / 4,

with cyclic indices, and the dynamics is dy = -grad V(y) dt + sqrt(2 eps) dW.
All gradient routines return grad V itself; integrators negate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .records import BatchSummary, HitRecord, NumericalAbort, stream, stream_seed

__all__ = [
    "LatticeState",
    "LatticeSpectrum",
    "SdeConfig",
    "Ball",
    "EmResult",
    "potential_energy",
    "potential_gradient",
    "lattice_spectrum",
    "gamma_one",
    "em_simulate",
    "transition_batch",
    "eyring_kramers_time",
    "eyring_kramers_prefactor",
    "rate_functional_lattice",
    "synchronisation_energy",
]

_CHUNK = 1 << 14


@dataclass
class LatticeState:
    y: np.ndarray
    gamma: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.y.size < 2:
            raise ValueError("a lattice needs at least two sites")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def n_sites(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class LatticeSpectrum:
    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray


@dataclass
class SdeConfig:
    """Euler-Maruyama settings.  ``t_max`` defaults to ``1e4 / eps``.

    The explicit scheme carries an O(dt) bias on hitting times.
    """

    eps: float
    dt: float = 1e-3
    t_max: float | None = None
    seed: int = 0
    hit_radius: float = 0.2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.hit_radius > 0:
            raise ValueError("hit_radius must be positive")
        if self.t_max is None:
            self.t_max = 1e4 / self.eps if self.eps > 0 else 1e4


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball used as a hitting set."""

    center: np.ndarray
    radius: float

    def __call__(self, y: np.ndarray) -> bool:
        return bool(np.sum((y - self.center) ** 2) <= self.radius**2)


@dataclass
class EmResult:
    hit: bool
    n_steps: int
    time: float
    final: np.ndarray
    path: np.ndarray | None = None
    path_times: np.ndarray | None = None
    max_energy: float = field(default=float("nan"))


def potential_energy(state: LatticeState) -> float:
    y = state.y
    diff = np.roll(y, -1) - y
    return float(np.sum(0.25 * (y**2 - 1.0) ** 2) + 0.25 * state.gamma * np.sum(diff**2))


def potential_gradient(state: LatticeState) -> np.ndarray:
    y = state.y
    lap = np.roll(y, -1) - 2.0 * y + np.roll(y, 1)
    return -(y - y**3) - 0.5 * state.gamma * lap


def _energy_batch(ys: np.ndarray, gamma: float) -> np.ndarray:
    diff = np.roll(ys, -1, axis=-1) - ys
    return np.sum(0.25 * (ys**2 - 1.0) ** 2, axis=-1) + 0.25 * gamma * np.sum(diff**2, axis=-1)


def _grad_batch(ys: np.ndarray, gamma: float) -> np.ndarray:
    lap = np.roll(ys, -1, axis=-1) - 2.0 * ys + np.roll(ys, 1, axis=-1)
    return -(ys - ys**3) - 0.5 * gamma * lap


def lattice_spectrum(N: int, gamma: float) -> LatticeSpectrum:
    if N < 2:
        raise ValueError("N must be at least 2")
    k = np.arange(N)
    lam = 2.0 * np.sin(k * np.pi / N) ** 2
    lam[0] = 0.0
    return LatticeSpectrum(lam, -1.0 + gamma * lam, 2.0 + gamma * lam)


def gamma_one(N: int) -> float:
    """Coupling above which the origin has a single unstable direction."""
    if N < 2:
        raise ValueError("N must be at least 2")
    return 1.0 / (2.0 * math.sin(math.pi / N) ** 2)


def synchronisation_energy(N: int) -> float:
    """Barrier height V(0) - V(-1, ..., -1)."""
    return N / 4.0


def eyring_kramers_prefactor(N: int, gamma: float) -> float:
    if gamma <= gamma_one(N):
        raise ValueError(
            f"gamma={gamma} must exceed gamma_1({N})={gamma_one(N):.6g}; "
            "below it the origin is not the unique transition state"
        )
    sp = lattice_spectrum(N, gamma)
    log_ratio = math.fsum(np.log(np.abs(sp.mu))) - math.fsum(np.log(sp.nu))
    return 2.0 * math.pi / abs(sp.mu[0]) * math.exp(0.5 * log_ratio)


def eyring_kramers_time(N: int, gamma: float, eps: float) -> float:
    """Predicted mean transition time between the two synchronised minima."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return eyring_kramers_prefactor(N, gamma) * math.exp(synchronisation_energy(N) / eps)


@numba.njit(cache=True)
def _em_ball(y, gamma, eps, dt, noise, center, r2):
    n_sites = y.shape[0]
    s = math.sqrt(2.0 * eps * dt)
    g = np.empty(n_sites)
    for n in range(noise.shape[0]):
        for i in range(n_sites):
            ip = i + 1 if i + 1 < n_sites else 0
            im = i - 1 if i > 0 else n_sites - 1
            yi = y[i]
            g[i] = -(yi - yi * yi * yi) - 0.5 * gamma * (y[ip] - 2.0 * yi + y[im])
        d2 = 0.0
        bad = False
        for i in range(n_sites):
            y[i] = y[i] - g[i] * dt + s * noise[n, i]
            d2 += (y[i] - center[i]) ** 2
            if not math.isfinite(y[i]):
                bad = True
        if bad:
            return -(n + 2)
        if d2 <= r2:
            return n
    return -1


@numba.njit(cache=True)
def _em_record(y, gamma, eps, dt, noise, out):
    n_sites = y.shape[0]
    s = math.sqrt(2.0 * eps * dt)
    g = np.empty(n_sites)
    for n in range(noise.shape[0]):
        for i in range(n_sites):
            ip = i + 1 if i + 1 < n_sites else 0
            im = i - 1 if i > 0 else n_sites - 1
            yi = y[i]
            g[i] = -(yi - yi * yi * yi) - 0.5 * gamma * (y[ip] - 2.0 * yi + y[im])
        for i in range(n_sites):
            y[i] = y[i] - g[i] * dt + s * noise[n, i]
            out[n, i] = y[i]
        for i in range(n_sites):
            if not math.isfinite(y[i]):
                return -(n + 2)
    return -1


def em_simulate(
    state0: LatticeState,
    cfg: SdeConfig,
    stop: Ball | Callable[[np.ndarray], bool] | None = None,
    rng: np.random.Generator | None = None,
    record_every: int = 0,
) -> EmResult:
    """Euler-Maruyama run until ``stop`` holds or ``t_max`` elapses.

    Parameters
    ----------
    stop
        A :class:`Ball` takes the compiled fast path; any other callable on
        the state vector is checked after every step.  ``None`` runs to
        ``t_max``.
    record_every
        If positive, keep every ``record_every``-th state (the initial state
        is always kept).

    Raises
    ------
    NumericalAbort
        If the state becomes non-finite.
    """
    if rng is None:
        rng = stream(cfg.seed, "lattice", 0)
    y = state0.y.copy()
    n_sites = y.size
    max_steps = int(math.ceil(cfg.t_max / cfg.dt))
    done = 0
    keep = [y.copy()] if record_every > 0 else None
    keep_t = [0.0] if record_every > 0 else None
    fast = isinstance(stop, Ball) and record_every <= 0
    buf = np.empty((_CHUNK, n_sites))
    while done < max_steps:
        m = min(_CHUNK, max_steps - done)
        noise = rng.standard_normal((m, n_sites)) if cfg.eps > 0 else np.zeros((m, n_sites))
        if fast:
            code = _em_ball(y, state0.gamma, cfg.eps, cfg.dt, noise, np.asarray(stop.center, float), stop.radius**2)
            if code < -1:
                raise NumericalAbort(f"non-finite lattice state at step {done - code - 2}")
            if code >= 0:
                n = done + code + 1
                return EmResult(True, n, n * cfg.dt, y)
            done += m
            continue
        code = _em_record(y, state0.gamma, cfg.eps, cfg.dt, noise, buf[:m])
        if code < -1:
            raise NumericalAbort(f"non-finite lattice state at step {done - code - 2}")
        seg = buf[:m]
        hit_at = -1
        if stop is not None:
            for j in range(m):
                if stop(seg[j]):
                    hit_at = j
                    break
        upto = m if hit_at < 0 else hit_at + 1
        if keep is not None:
            idx = np.arange(upto)
            sel = (done + idx + 1) % record_every == 0
            keep.extend(seg[:upto][sel].copy())
            keep_t.extend(((done + idx[sel] + 1) * cfg.dt).tolist())
        if hit_at >= 0:
            n = done + hit_at + 1
            return _finish(True, n, cfg, seg[hit_at].copy(), keep, keep_t, state0.gamma)
        done += m
    return _finish(False, done, cfg, y, keep, keep_t, state0.gamma)


def _finish(hit, n, cfg, y, keep, keep_t, gamma):
    if keep is None:
        return EmResult(hit, n, n * cfg.dt, y)
    path = np.array(keep)
    return EmResult(hit, n, n * cfg.dt, y, path, np.array(keep_t), float(_energy_batch(path, gamma).max()))


def transition_batch(
    N: int,
    gamma: float,
    cfg: SdeConfig,
    n_runs: int,
    start: np.ndarray | None = None,
    target: np.ndarray | None = None,
) -> BatchSummary:
    """Independent replicas from ``start`` (default ``-1``) to a ball around ``target`` (default ``+1``).

    Replica ``r`` draws from the stream ``lattice:r`` of ``cfg.seed``.
    """
    start = -np.ones(N) if start is None else np.asarray(start, float)
    target = np.ones(N) if target is None else np.asarray(target, float)
    ball = Ball(target, cfg.hit_radius)
    records = []
    for r in range(n_runs):
        res = em_simulate(LatticeState(start, gamma), cfg, ball, rng=stream(cfg.seed, "lattice", r))
        records.append(
            HitRecord(r, stream_seed(cfg.seed, "lattice", r), res.time if res.hit else float("nan"), not res.hit)
        )
    conf = {
        "N": N,
        "gamma": gamma,
        "eps": cfg.eps,
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "seed": cfg.seed,
        "hit_radius": cfg.hit_radius,
        "n_runs": n_runs,
    }
    return BatchSummary(records, conf)


def rate_functional_lattice(path: np.ndarray, dt: float, gamma: float) -> float:
    """Discretised ``(1/2) int |gamma'(t) + grad V(gamma(t))|^2 dt``.

    ``path`` has shape ``(n_times, N)`` on a uniform grid of spacing ``dt``;
    the velocity uses second-order finite differences and the time integral
    the trapezoidal rule.
    """
    path = np.asarray(path, float)
    if path.ndim != 2 or path.shape[0] < 3:
        raise ValueError("path must have shape (n_times >= 3, N)")
    vel = np.gradient(path, dt, axis=0, edge_order=2)
    r = vel + _grad_batch(path, gamma)
    return float(0.5 * np.trapezoid(np.sum(r**2, axis=1), dx=dt))
