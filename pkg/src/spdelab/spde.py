"""Spectral Galerkin integration of the stochastic Allen-Cahn equation.

The truncated equation on the torus ``(R/LZ)^d``, ``d in {1, 2}``, reads

    d phi = [Delta phi + phi - Pi_N phi^3 + 3 eps C_N phi] dt + sqrt(2 eps) Pi_N dW,

where the counterterm is present only when ``renormalize`` is set (the
default in two dimensions) with ``L^d C_N = sum_{|k|_1 <= N} 1/|lambda_k - 1| + theta``.
Modes use the real basis of :mod:`spdelab.fourier`, so ``phi = +-1`` has
mean-mode coefficient ``+-L^{d/2}``.

The time stepper is exponential Euler: the linear part is integrated exactly
per mode, the cubic term is applied explicitly and the noise increment is the
exact Ornstein-Uhlenbeck increment of the linear part.  The cubic is
evaluated on a grid of ``4N + 1`` points per axis through dense synthesis
matrices; the grid quadrature of ``e_k phi^3`` is then exact, so the
projection ``Pi_N phi^3`` is alias-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .fourier import SpectralField, synthesis_matrix, laplacian_eigenvalues, mode_mask, to_grid, wavenumbers
from .records import BatchSummary, HitRecord, NumericalAbort, stream, stream_seed

__all__ = [
    "SpdeConfig",
    "PathSample",
    "GalerkinAllenCahn",
    "heat_semigroup",
    "heat_bound_constant",
    "sobolev_norm",
    "stochastic_convolution_step",
    "stochastic_convolution_expected_norm",
    "counterterm_CN",
    "potential_field",
    "step_allen_cahn",
    "simulate",
    "deterministic_path",
    "transition_time_experiment",
    "rate_functional_field",
    "committor_1d_quadrature",
    "kramers_1d_quadrature",
    "kramers_1d_asymptotic",
]

BLOWUP_L2 = 1e3
_NOISE_CHUNK = 256


@dataclass
class SpdeConfig:
    """Settings of a Galerkin run.

    ``hit_radius`` bounds ``|phi_0 - L^{d/2}|`` for the target set; the
    transverse part ``(phi - phi_0 e_0) / sqrt(eps)`` must also lie in the
    ``H^s`` ball of radius ``ball_constant * sqrt(log(1/eps))`` with
    ``s = sobolev_s`` (``1/4`` in one dimension, ``-1/4`` in two).
    """

    d: int = 1
    L: float = 1.0
    N: int = 32
    eps: float = 0.1
    dt: float = 0.01
    t_max: float | None = None
    seed: int = 0
    renormalize: bool | None = None
    theta: float = 0.0
    hit_radius: float = 0.2
    sobolev_s: float | None = None
    ball_constant: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.N < 0 or not self.L > 0:
            raise ValueError("need N >= 0 and L > 0")
        if not self.hit_radius > 0:
            raise ValueError("hit_radius must be positive")
        if self.renormalize is None:
            self.renormalize = self.d == 2
        if self.sobolev_s is None:
            self.sobolev_s = 0.25 if self.d == 1 else -0.25
        if self.t_max is None:
            self.t_max = 1e4 / self.eps if self.eps > 0 else 1e4

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class PathSample:
    times: np.ndarray
    coeffs: np.ndarray  # shape (n_times, 2N+1, ..., 2N+1)
    L: float
    d: int

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def N(self) -> int:
        return (self.coeffs.shape[-1] - 1) // 2


# linear building blocks -----------------------------------------------------


def heat_semigroup(f: SpectralField, t: float) -> SpectralField:
    """``e^{t Delta} f``: each mode is multiplied by ``exp(-lambda_k t)``."""
    return SpectralField(f.coeffs * np.exp(-f.eigenvalues() * t), f.L, f.mask)


def heat_bound_constant(s: float, L: float) -> float:
    """``C`` with ``||e^{t Delta} f||_{H^s} <= (1 + C t^{-s/2}) ||f||_{L^2}`` for ``0 <= s <= 2``.

    Uses ``(1 + k^2)^{s/2} <= 1 + |k|^s`` and
    ``sup_k |k|^s exp(-lambda_k t) = (L / 2 pi)^s (s / 2e)^{s/2} t^{-s/2}``.
    """
    if not 0 <= s <= 2:
        raise ValueError("bound derived for 0 <= s <= 2")
    if s == 0:
        return 0.0
    return (L / (2.0 * math.pi)) ** s * (s / (2.0 * math.e)) ** (s / 2.0)


def _k2_int(d: int, N: int) -> np.ndarray:
    return np.broadcast_to(sum(k.astype(float) ** 2 for k in wavenumbers(d, N)), (2 * N + 1,) * d)


def sobolev_norm(f: SpectralField | np.ndarray, s: float, d: int | None = None) -> float | np.ndarray:
    """``(sum_k (1 + |k|^2)^s f_k^2)^{1/2}`` with integer wavevectors ``k``.

    Accepts a field or a coefficient array whose last ``d`` axes are spatial.
    """
    if isinstance(f, SpectralField):
        c, d = f.coeffs, f.d
    else:
        c = np.asarray(f)
        d = c.ndim if d is None else d
    N = (c.shape[-1] - 1) // 2
    w = (1.0 + _k2_int(d, N)) ** s
    axes = tuple(range(c.ndim - d, c.ndim))
    out = np.sqrt(np.sum(w * c**2, axis=axes))
    return float(out) if np.ndim(out) == 0 else out


def _ou_factors(rate: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``exp(r dt)``, ``(exp(r dt) - 1)/r`` and ``(exp(2 r dt) - 1)/(2 r)`` with the ``r = 0`` limits."""
    x = rate * dt
    decay = np.exp(x)
    small = np.abs(x) < 1e-12
    safe = np.where(small, 1.0, rate)
    phi1 = np.where(small, dt, np.expm1(x) / safe)
    var = np.where(small, dt, np.expm1(2.0 * x) / (2.0 * safe))
    return decay, phi1, var


def stochastic_convolution_step(
    f: SpectralField, dt: float, eps: float, rng: np.random.Generator, mass: float = 0.0
) -> SpectralField:
    """Exact Ornstein-Uhlenbeck update of ``d psi = (Delta - mass) psi dt + sqrt(2 eps) dW``."""
    rate = -(f.eigenvalues() + mass)
    decay, _, var = _ou_factors(rate, dt)
    z = rng.standard_normal(f.coeffs.shape)
    new = decay * f.coeffs + np.sqrt(2.0 * eps * var) * z
    return SpectralField(new * f.mask, f.L, f.mask)


def stochastic_convolution_expected_norm(t: float, s: float, N: int, L: float = 1.0, d: int = 1) -> float:
    """``E ||int_0^t e^{(t-u) Delta} dW_u||_{H^s}^2`` for unit-intensity noise on ``|k|_1 <= N``."""
    lam = laplacian_eigenvalues(d, N, L)
    mask = mode_mask(d, N)
    _, _, var = _ou_factors(-lam, t)
    w = (1.0 + _k2_int(d, N)) ** s
    return math.fsum((w * var)[mask])


def counterterm_CN(d: int, N: int, L: float, theta: float = 0.0) -> float:
    """``C_N`` with ``L^d C_N = sum_{|k|_1 <= N} 1/|lambda_k - 1| + theta``."""
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    return (math.fsum(1.0 / np.abs(lam - 1.0)) + theta) / L**d


# nonlinear solver -----------------------------------------------------------


class GalerkinAllenCahn:
    """Precomputed operators for one ``(d, L, N, eps, dt)`` combination."""

    def __init__(self, cfg: SpdeConfig):
        self.cfg = cfg
        d, N, L = cfg.d, cfg.N, cfg.L
        self.mask = mode_mask(d, N)
        self.lam = laplacian_eigenvalues(d, N, L)
        self.M = 4 * N + 1
        self.E = synthesis_matrix(N, L, self.M)
        self.ET = np.ascontiguousarray(self.E.T) * (L / self.M)
        self.C_N = counterterm_CN(d, N, L, cfg.theta) if cfg.renormalize else 0.0
        self.rate = -self.lam + 1.0 + 3.0 * cfg.eps * self.C_N
        decay, phi1, var = _ou_factors(self.rate, cfg.dt)
        self.decay = decay * self.mask
        self.phi1 = phi1 * self.mask
        self.noise_sd = np.sqrt(2.0 * cfg.eps * var) * self.mask
        self.n_modes = int(self.mask.sum())
        self.unit = L ** (d / 2.0)
        self.zero = (N,) * d

    def cubic(self, a: np.ndarray) -> np.ndarray:
        """``Pi_N (phi^3)`` for coefficient arrays with optional leading batch axes."""
        E, ET = self.E, self.ET
        if self.cfg.d == 1:
            g = a @ E.T
            return (g * g * g @ ET.T) * self.mask
        # both axes as single GEMMs over the flattened batch
        n, M = E.shape[1], self.M
        batch = a.shape[:-2]
        g = (a.reshape(-1, n) @ E.T).reshape(-1, n, M).transpose(0, 2, 1).reshape(-1, n) @ E.T
        g = g * g * g
        u = (g @ ET.T).reshape(-1, M, n).transpose(0, 2, 1).reshape(-1, M) @ ET.T
        return u.reshape(batch + (n, n)) * self.mask

    def drift(self, a: np.ndarray) -> np.ndarray:
        """``Delta phi + phi - Pi_N phi^3`` (no counterterm)."""
        return (1.0 - self.lam) * a * self.mask - self.cubic(a)

    def step(self, a: np.ndarray, z: np.ndarray | None) -> np.ndarray:
        out = self.decay * a - self.phi1 * self.cubic(a)
        if z is not None:
            out += self.noise_sd * z
        return out

    def scatter(self, z_modes: np.ndarray) -> np.ndarray:
        out = np.zeros(z_modes.shape[:-1] + self.mask.shape)
        out[..., self.mask] = z_modes
        return out

    def in_target(self, a: np.ndarray, sign: float = 1.0) -> np.ndarray:
        cfg = self.cfg
        mean = a[(Ellipsis,) + self.zero]
        near = np.abs(mean - sign * self.unit) <= cfg.hit_radius
        if cfg.eps <= 0:
            return near
        trans = a.copy()
        trans[(Ellipsis,) + self.zero] = 0.0
        radius = cfg.ball_constant * math.sqrt(max(math.log(1.0 / cfg.eps), 0.0))
        tnorm = sobolev_norm(trans / math.sqrt(cfg.eps), cfg.sobolev_s, cfg.d)
        return near & (tnorm <= radius)


def step_allen_cahn(f: SpectralField, cfg: SpdeConfig, rng: np.random.Generator | None = None) -> SpectralField:
    """One exponential-Euler step (noise drawn from ``rng`` when ``eps > 0``)."""
    op = GalerkinAllenCahn(cfg)
    z = None
    if cfg.eps > 0:
        if rng is None:
            raise ValueError("a generator is required when eps > 0")
        z = op.scatter(rng.standard_normal(op.n_modes))
    new = op.step(f.coeffs, z)
    _check_blowup(new, op)
    return SpectralField(new, f.L, f.mask)


def _check_blowup(a: np.ndarray, op: GalerkinAllenCahn) -> None:
    d = op.cfg.d
    axes = tuple(range(a.ndim - d, a.ndim))
    nrm = np.sqrt(np.sum(a**2, axis=axes))
    if not np.all(np.isfinite(nrm)) or np.any(nrm > BLOWUP_L2):
        raise NumericalAbort(
            f"L2 norm {float(np.max(nrm)):.3g} exceeds {BLOWUP_L2:g}; reduce dt (currently {op.cfg.dt})"
        )


def potential_field(a: np.ndarray | SpectralField, L: float | None = None, d: int | None = None) -> float | np.ndarray:
    """``V(phi) = int [|grad phi|^2/2 - phi^2/2 + phi^4/4 + 1/4] dx`` of a Galerkin field."""
    if isinstance(a, SpectralField):
        L, d, a = a.L, a.d, a.coeffs
    N = (a.shape[-1] - 1) // 2
    lam = laplacian_eigenvalues(d, N, L)
    axes = tuple(range(a.ndim - d, a.ndim))
    quad = 0.5 * np.sum((lam - 1.0) * a**2, axis=axes)
    M = sfft.next_fast_len(4 * N + 1)
    g = to_grid(a, L, M, d)
    quart = 0.25 * np.sum(g**4, axis=axes) * (L / M) ** d
    out = quad + quart + 0.25 * L**d
    return float(out) if np.ndim(out) == 0 else out


class _NoiseStream:
    """Buffered per-replica normals, so draws do not depend on batching."""

    def __init__(self, rng: np.random.Generator, n_modes: int):
        self.rng = rng
        self.n = n_modes
        self.buf = np.empty((0, n_modes))
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos >= self.buf.shape[0]:
            self.buf = self.rng.standard_normal((_NOISE_CHUNK, self.n))
            self.pos = 0
        self.pos += 1
        return self.buf[self.pos - 1]


def simulate(
    f0: SpectralField,
    cfg: SpdeConfig,
    t_end: float,
    record_every: int = 0,
    rng: np.random.Generator | None = None,
) -> tuple[SpectralField, PathSample | None]:
    """Integrate one replica up to ``t_end``, keeping every ``record_every``-th state."""
    op = GalerkinAllenCahn(cfg)
    noise = _NoiseStream(rng if rng is not None else stream(cfg.seed, "spde", 0), op.n_modes)
    a = f0.coeffs * op.mask
    n_steps = int(round(t_end / cfg.dt))
    times, snaps = [0.0], [a.copy()]
    for n in range(1, n_steps + 1):
        z = op.scatter(noise.next()) if cfg.eps > 0 else None
        a = op.step(a, z)
        if n % 64 == 0 or n == n_steps:
            _check_blowup(a, op)
        if record_every > 0 and n % record_every == 0:
            times.append(n * cfg.dt)
            snaps.append(a.copy())
    path = PathSample(np.array(times), np.array(snaps), cfg.L, cfg.d) if record_every > 0 else None
    return SpectralField(a, cfg.L, op.mask), path


def deterministic_path(
    f0: SpectralField, T: float, n_times: int, reverse: bool = False, rtol: float = 1e-11
) -> PathSample:
    """Accurate solution of ``phi' = +-(Delta phi + phi - Pi_N phi^3)`` sampled on a uniform grid.

    ``reverse`` flips the sign of the drift, giving the time-reversed gradient flow.
    """
    cfg = SpdeConfig(d=f0.d, L=f0.L, N=f0.N, eps=0.0, renormalize=False)
    op = GalerkinAllenCahn(cfg)
    shape = f0.coeffs.shape
    sgn = -1.0 if reverse else 1.0

    def rhs(_t, y):
        return sgn * op.drift(y.reshape(shape)).ravel()

    ts = np.linspace(0.0, T, n_times)
    sol = integrate.solve_ivp(rhs, (0.0, T), f0.coeffs.ravel(), method="DOP853", t_eval=ts, rtol=rtol, atol=1e-13)
    if not sol.success:
        raise NumericalAbort(sol.message)
    return PathSample(ts, sol.y.T.reshape((n_times,) + shape), f0.L, f0.d)


def rate_functional_field(path: PathSample, d: int | None = None) -> float:
    """``(1/2) int_0^T ||d_t gamma - Delta gamma - gamma + Pi_N gamma^3||_{L^2}^2 dt``.

    Time derivatives use second-order finite differences on the snapshot
    grid, space integrals are exact via Parseval, and the time integral is
    trapezoidal.
    """
    d = path.d if d is None else d
    cfg = SpdeConfig(d=d, L=path.L, N=path.N, eps=0.0, renormalize=False)
    op = GalerkinAllenCahn(cfg)
    t = path.times
    if t.size < 3:
        raise ValueError("need at least three snapshots")
    vel = np.gradient(path.coeffs, t, axis=0, edge_order=2)
    r = vel - op.drift(path.coeffs)
    axes = tuple(range(1, r.ndim))
    return float(0.5 * np.trapezoid(np.sum(r**2, axis=axes), t))


def transition_time_experiment(cfg: SpdeConfig, n_runs: int, start_sign: float = -1.0) -> BatchSummary:
    """Replicas from ``phi = start_sign`` until the target set around ``-start_sign`` is entered.

    All replicas advance together as one batch; replica ``r`` draws from the
    stream ``spde:r``, so results do not depend on batching.
    """
    op = GalerkinAllenCahn(cfg)
    streams = [_NoiseStream(stream(cfg.seed, "spde", r), op.n_modes) for r in range(n_runs)]
    a = np.zeros((n_runs,) + op.mask.shape)
    a[(slice(None),) + op.zero] = start_sign * op.unit
    active = np.arange(n_runs)
    hit_time = np.full(n_runs, np.nan)
    max_steps = int(math.ceil(cfg.t_max / cfg.dt))
    for n in range(1, max_steps + 1):
        z = None
        if cfg.eps > 0:
            z = op.scatter(np.stack([streams[r].next() for r in active]))
        a = op.step(a, z)
        if n % 64 == 0:
            _check_blowup(a, op)
        done = op.in_target(a, -start_sign)
        if done.any():
            hit_time[active[done]] = n * cfg.dt
            keep = ~done
            active = active[keep]
            a = a[keep]
            if active.size == 0:
                break
    records = [
        HitRecord(r, stream_seed(cfg.seed, "spde", r), float(hit_time[r]), bool(np.isnan(hit_time[r])))
        for r in range(n_runs)
    ]
    conf = cfg.as_dict()
    conf["n_runs"] = n_runs
    conf["C_N"] = op.C_N
    return BatchSummary(records, conf)


# one-dimensional potential theory by quadrature ------------------------------


def committor_1d_quadrature(V: Callable[[float], float], a: float, b: float, eps: float, y: float) -> float:
    """``P_y(tau_a < tau_b) = int_y^b e^{V/eps} / int_a^b e^{V/eps}`` for ``a < y < b``."""
    if not a < b:
        raise ValueError("need a < b")
    if y <= a:
        return 1.0
    if y >= b:
        return 0.0
    xs = np.linspace(a, b, 513)
    vmax = max(float(np.max([V(x) for x in xs])), V(a), V(b))
    f = lambda x: math.exp((V(x) - vmax) / eps)
    num = integrate.quad(f, y, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
    den = integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
    return num / den


def kramers_1d_quadrature(
    V: Callable[[float], float],
    a: float,
    eps: float,
    y: float,
    upper: float = math.inf,
    points: list[float] | None = None,
) -> float:
    """Exact ``E_y[tau_A]`` for ``A = (-inf, a]`` and ``dx = -V'(x) dt + sqrt(2 eps) dW``.

    ``w(y) = (1/eps) int_a^y dy_1 int_{y_1}^upper exp([V(y_1) - V(y_2)] / eps) dy_2``,
    evaluated by nested adaptive quadrature.  ``points`` marks interior
    features (for example the saddle) of the outer integrand.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if y <= a:
        return 0.0
    xs = np.linspace(a, y if math.isinf(upper) else upper, 2049)
    vref = float(np.min([V(x) for x in xs]))

    def inner(y1: float) -> float:
        return integrate.quad(lambda y2: math.exp(-(V(y2) - vref) / eps), y1, upper, limit=400, epsabs=0.0, epsrel=1e-11)[0]

    pts = [p for p in (points or []) if a < p < y]
    outer = integrate.quad(
        lambda y1: math.exp((V(y1) - vref) / eps) * inner(y1), a, y, limit=400, points=pts or None, epsabs=0.0, epsrel=1e-10
    )[0]
    return outer / eps


def kramers_1d_asymptotic(V2_saddle: float, V2_min: float, barrier: float, eps: float) -> float:
    """Kramers' law ``2 pi / sqrt(|V''(z)| V''(x)) exp(barrier / eps)``."""
    return 2.0 * math.pi / math.sqrt(abs(V2_saddle) * V2_min) * math.exp(barrier / eps)
