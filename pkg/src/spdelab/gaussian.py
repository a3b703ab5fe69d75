"""Gaussian calculus: Hermite polynomials, pairings, free fields and diagram constants.

Free fields live on the real Fourier basis of :mod:`spdelab.fourier` with
covariance ``(-Delta + a)^{-1}`` restricted to ``|k|_1 <= N``.  The Green
function of a field is ``G(z) = L^{-d} sum_k g_k exp(2 pi i k.z / L)`` with
``g_k = 1 / (lambda_k + a)``, so that ``G(0) = C_N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numba
import numpy as np
import scipy.fft as sfft

from .fourier import SpectralField, laplacian_eigenvalues, mode_mask

__all__ = [
    "hermite",
    "hermite_coefficients",
    "hermite_generating_check",
    "hermite_binomial_residual",
    "isserlis_moment",
    "gauss_hermite_moment",
    "GffSpec",
    "DiagramConstant",
    "sample_gff",
    "green_coefficients",
    "wick_constant_CN",
    "wick_power_field",
    "wick_integral_variance",
    "green_power_integral",
    "green_power_parseval",
    "sunset_integral",
    "sunset_bruteforce",
    "renorm_constants_3d",
    "sunset_subdivergence_constant",
]


# Hermite polynomials ------------------------------------------------------


def hermite(n: int, x, eps: float = 1.0):
    """``H_n(x; eps)`` via ``H_{n+1} = x H_n - eps n H_{n-1}``."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    if eps < 0:
        raise ValueError("variance must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for m in range(1, n):
        h, h_prev = x * h - eps * m * h_prev, h
    return h if h.ndim else float(h)


def hermite_coefficients(n: int, eps: float = 1.0) -> np.ndarray:
    """Monomial coefficients of ``H_n(.; eps)``, lowest degree first."""
    prev = np.array([1.0])
    if n == 0:
        return prev
    cur = np.array([0.0, 1.0])
    for m in range(1, n):
        nxt = np.zeros(m + 2)
        nxt[1:] = cur
        nxt[: m] -= eps * m * prev
        prev, cur = cur, nxt
    return cur


def hermite_generating_check(t: float, x: float, eps: float, n_terms: int) -> float:
    """``|exp(t x - eps t^2 / 2) - sum_{n < n_terms} t^n / n! H_n(x; eps)|``."""
    partial = math.fsum(t**n / math.factorial(n) * hermite(n, x, eps) for n in range(n_terms))
    return abs(math.exp(t * x - 0.5 * eps * t * t) - partial)


def hermite_binomial_residual(n: int, x: float, y: float, eps1: float, eps2: float) -> float:
    """Residual of ``H_n(x+y; eps1+eps2) = sum_m C(n,m) H_m(x; eps1) H_{n-m}(y; eps2)``."""
    rhs = math.fsum(math.comb(n, m) * hermite(m, x, eps1) * hermite(n - m, y, eps2) for m in range(n + 1))
    return abs(hermite(n, x + y, eps1 + eps2) - rhs)


# Gaussian moments ---------------------------------------------------------


def isserlis_moment(cov: np.ndarray, indices: Sequence[int]) -> float:
    """``E[X_{i_1} ... X_{i_m}]`` for a centred Gaussian vector with covariance ``cov``.

    Sum over perfect pairings, computed by recursion on the first index
    (there are ``(m-1)!!`` pairings).
    """
    cov = np.asarray(cov, float)
    idx = list(indices)
    if len(idx) % 2:
        return 0.0

    def rec(rest: tuple[int, ...]) -> float:
        if not rest:
            return 1.0
        a = rest[0]
        total = 0.0
        for j in range(1, len(rest)):
            c = cov[a, rest[j]]
            if c != 0.0:
                total += c * rec(rest[1:j] + rest[j + 1 :])
        return total

    return rec(tuple(idx))


def gauss_hermite_moment(cov: np.ndarray, indices: Sequence[int], n_nodes: int = 12) -> float:
    """Same moment by tensor Gauss-Hermite quadrature (exact for total degree < 2 n_nodes)."""
    cov = np.asarray(cov, float)
    dim = cov.shape[0]
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / math.sqrt(2.0 * math.pi)
    chol = np.linalg.cholesky(cov + 0.0 * np.eye(dim)) if dim > 1 else np.sqrt(cov)
    total = 0.0
    for nodes in product(range(n_nodes), repeat=dim):
        zz = z[list(nodes)]
        x = chol @ zz
        total += np.prod(w[list(nodes)]) * np.prod(x[list(indices)])
    return float(total)


# Free fields --------------------------------------------------------------


@dataclass(frozen=True)
class GffSpec:
    d: int
    N: int
    L: float = 1.0
    mass_sq: float = 1.0
    zero_mean: bool = False

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        g = laplacian_eigenvalues(self.d, self.N, self.L)[self.mask] + self.mass_sq
        if np.any(g <= 0):
            raise ValueError("lambda_k + mass_sq must be positive on every retained mode")

    @property
    def mask(self) -> np.ndarray:
        return mode_mask(self.d, self.N, include_zero=not self.zero_mean)


@dataclass(frozen=True)
class DiagramConstant:
    name: str
    d: int
    N: int
    L: float
    mass_sq: float
    value: float


def green_coefficients(spec: GffSpec) -> np.ndarray:
    """``1 / (lambda_k + a)`` on the retained modes, zero elsewhere."""
    lam = laplacian_eigenvalues(spec.d, spec.N, spec.L)
    g = np.zeros_like(lam)
    m = spec.mask
    g[m] = 1.0 / (lam[m] + spec.mass_sq)
    return g


def sample_gff(spec: GffSpec, rng: np.random.Generator | int) -> SpectralField:
    """One sample with independent modes ``Z_k / sqrt(lambda_k + a)``."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    g = green_coefficients(spec)
    z = rng.standard_normal(g.shape)
    return SpectralField(np.sqrt(g) * z * spec.mask, spec.L, spec.mask)


def wick_constant_CN(d: int, N: int, L: float = 1.0, mass_sq: float = 1.0, zero_mean: bool = False) -> DiagramConstant:
    """``C_N = L^{-d} sum_k 1 / (lambda_k + a)``, the pointwise field variance."""
    spec = GffSpec(d, N, L, mass_sq, zero_mean)
    g = green_coefficients(spec)
    return DiagramConstant("C_N", d, N, L, mass_sq, math.fsum(g[spec.mask]) / L**d)


def wick_power_field(field: SpectralField, n: int, C: float, M: int | None = None) -> np.ndarray:
    """``:phi^n:`` on a collocation grid, i.e. ``H_n(phi(x); C)`` pointwise."""
    return hermite(n, field.grid(M), C)


def _fft_size(n: int, N: int) -> int:
    return sfft.next_fast_len(n * N + 1, real=True)


def _grid_green(g: np.ndarray, M: int) -> np.ndarray:
    """Grid values ``sum_k g_k omega^{k.j}`` of a symmetric coefficient cube."""
    d = g.ndim
    N = (g.shape[0] - 1) // 2
    big = np.zeros((M,) * d)
    idx = np.arange(-N, N + 1) % M
    big[np.ix_(*([idx] * d))] = g
    return _real_ifft(big)


def _real_ifft(big: np.ndarray) -> np.ndarray:
    # g is even in k, so its transform is real
    return sfft.fftn(big, workers=-1).real


def green_power_integral(d: int, N: int, L: float = 1.0, mass_sq: float = 1.0, n: int = 2, zero_mean: bool = False) -> float:
    """``int_Lambda G(x)^n dx`` from the ``n``-fold convolution of ``g_k``.

    Equals ``L^{d(1-n)} sum_{k_1 + ... + k_n = 0} g_{k_1} ... g_{k_n}``,
    evaluated exactly on an FFT grid of more than ``n N`` points per axis.
    """
    if n not in (2, 3, 4):
        raise ValueError("n must be 2, 3 or 4")
    g = green_coefficients(GffSpec(d, N, L, mass_sq, zero_mean))
    M = _fft_size(n, N)
    vals = _grid_green(g, M)
    return float(np.sum(vals**n) / M**d * L ** (d * (1 - n)))


def green_power_parseval(d: int, N: int, L: float = 1.0, mass_sq: float = 1.0, zero_mean: bool = False) -> float:
    g = green_coefficients(GffSpec(d, N, L, mass_sq, zero_mean))
    return math.fsum((g**2).ravel()) / L**d


def sunset_integral(d: int, N: int, L: float = 1.0, mass_sq: float = 1.0, zero_mean: bool = False) -> float:
    """``int int G(x)^2 G(y)^2 G(x-y)^2 dx dy = L^{-4d} sum_k h_k^3`` with ``h = g * g``."""
    g = green_coefficients(GffSpec(d, N, L, mass_sq, zero_mean))
    M = _fft_size(4, N)
    vals = _grid_green(g, M)
    h = sfft.fftn(vals**2, workers=-1).real / M**d
    return float(np.sum(h**3) / L ** (4 * d))


@numba.njit(parallel=False, cache=True)
def _sunset_direct(G):
    M = G.shape[0]
    G2 = G * G
    total = 0.0
    for x0 in range(M):
        for x1 in range(M):
            for x2 in range(M):
                ax = G2[x0, x1, x2]
                s = 0.0
                for y0 in range(M):
                    z0 = (x0 - y0) % M
                    for y1 in range(M):
                        z1 = (x1 - y1) % M
                        for y2 in range(M):
                            s += G2[y0, y1, y2] * G2[z0, z1, (x2 - y2) % M]
                total += ax * s
    return total


def sunset_bruteforce(N: int, M: int, L: float = 1.0, mass_sq: float = 1.0, zero_mean: bool = False) -> float:
    """Real-space double sum in three dimensions with ``G`` from direct cosine summation.

    The trapezoidal rule is exact here when ``M > 4 N``.
    """
    spec = GffSpec(3, N, L, mass_sq, zero_mean)
    g = green_coefficients(spec)
    x = np.arange(M) * (L / M)
    G = np.zeros((M, M, M))
    X0, X1, X2 = np.meshgrid(x, x, x, indexing="ij")
    for idx in zip(*np.nonzero(spec.mask)):
        k = np.array(idx) - N
        G += g[idx] * np.cos(2 * np.pi * (k[0] * X0 + k[1] * X1 + k[2] * X2) / L)
    G /= L**3
    return float(_sunset_direct(G) * (L / M) ** 6)


def wick_integral_variance(d: int, N: int, n: int, L: float = 1.0, mass_sq: float = 1.0, zero_mean: bool = False) -> float:
    """Exact ``Var[L^{-d} int :phi^n: dx] = n! L^{-d} int G^n``."""
    if n == 1:
        g = green_coefficients(GffSpec(d, N, L, mass_sq, zero_mean))
        return float(g[(N,) * d] / L**d)
    return math.factorial(n) * green_power_integral(d, N, L, mass_sq, n, zero_mean) / L**d


def renorm_constants_3d(N: int, L: float = 1.0, mass_sq: float = -1.0) -> dict[str, DiagramConstant]:
    """Counterterms of the Wick-renormalised cubic potential in three dimensions.

    The Green function is that of ``-Delta - 1`` on nonzero modes.  ``C1`` is
    the tadpole, ``C2 = 3! int G^3``, ``C3 = 4!/(2! 4^2) int G^4`` and
    ``C4 = 2^3/(3! 4^3) C(4,2)^3`` times the sunset diagram.
    """
    args = dict(L=L, mass_sq=mass_sq, zero_mean=True)
    vals = {
        "C1": wick_constant_CN(3, N, **args).value,
        "C2": 6.0 * green_power_integral(3, N, n=3, **args),
        "C3": 24.0 / (2.0 * 16.0) * green_power_integral(3, N, n=4, **args),
        "C4": 8.0 / (6.0 * 64.0) * 6.0**3 * sunset_integral(3, N, **args),
    }
    return {k: DiagramConstant(k, 3, N, L, mass_sq, v) for k, v in vals.items()}


def sunset_subdivergence_constant(N: int, L: float = 1.0, mass_sq: float = -1.0) -> DiagramConstant:
    """Dynamic second-order constant ``(1/2) int G^3`` (spectral cutoff)."""
    v = 0.5 * green_power_integral(3, N, L, mass_sq, 3, zero_mean=True)
    return DiagramConstant("C_delta2", 3, N, L, mass_sq, v)
