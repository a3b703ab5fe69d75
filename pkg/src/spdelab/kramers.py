"""Spectral determinants and Eyring-Kramers predictions for the Allen-Cahn field.

On the torus of side ``L`` the Hessians of the potential at the transition
state ``phi = 0`` and at the minima ``phi = +-1`` have eigenvalues
``mu_k = lambda_k - 1`` and ``nu_k = lambda_k + 2``.  Their ratio is the
Fredholm determinant ``det(1 + 3(-Delta - 1)^{-1}) = prod nu_k / mu_k``, whose
reciprocal is ``det(1 - 3(-Delta + 2)^{-1})``.  In two dimensions the plain
product diverges and the Carleman-Fredholm determinant
``det_2(1 + K) = det(1 + K) exp(-Tr K)`` is used instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from .fourier import laplacian_eigenvalues, mode_mask

__all__ = [
    "EkPrediction",
    "hessian_spectrum_1d",
    "period_function",
    "period_function_closed_form",
    "fredholm_log",
    "fredholm_det_1d",
    "fredholm_closed_form_1d",
    "fredholm_tail_1d",
    "reciprocal_fredholm_det_1d",
    "carleman_fredholm",
    "carleman_fredholm_log",
    "carleman_bound",
    "cf_shift_residual",
    "ek_predict_1d",
    "ek_predict_2d",
    "ek_predict_galerkin",
]


@dataclass(frozen=True)
class EkPrediction:
    """Prediction ``prefactor * exp(exponent_rate / eps)``."""

    prefactor: float
    exponent_rate: float
    eps: float
    value: float
    determinant: float
    truncation_error_estimate: float

    def to_dict(self) -> dict:
        return asdict(self)


def hessian_spectrum_1d(L: float, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Modes ``k = -N..N`` with ``mu_k = (2 k pi / L)^2 - 1`` and ``nu_k = (2 k pi / L)^2 + 2``."""
    k = np.arange(-N, N + 1)
    lam = (2.0 * np.pi * k / L) ** 2
    return k, lam - 1.0, lam + 2.0


def period_function(E: float) -> float:
    """Period of ``q'' = q - q^3``-type oscillations at energy ``E`` in ``(0, 1/4)``.

    ``T(E) = 2 int dq / sqrt(2E - q^2 + q^4/2)`` between the inner turning
    points.  Substituting ``q = q_+ sin(theta)`` removes the endpoint
    singularity and leaves ``4 sqrt(2) int_0^{pi/2} dtheta / sqrt(r_+ - r_- sin^2 theta)``.
    """
    if not 0.0 < E < 0.25:
        raise ValueError("energy must lie in (0, 1/4)")
    root = math.sqrt(1.0 - 4.0 * E)
    r_minus = 4.0 * E / (1.0 + root)  # 1 - root without cancellation
    r_plus = 1.0 + root
    f = lambda th: 1.0 / math.sqrt(r_plus - r_minus * math.sin(th) ** 2)
    val, _ = integrate.quad(f, 0.0, 0.5 * math.pi, limit=400, epsabs=0.0, epsrel=1e-12)
    return 4.0 * math.sqrt(2.0) * val


def period_function_closed_form(E: float) -> float:
    root = math.sqrt(1.0 - 4.0 * E)
    r_minus = 4.0 * E / (1.0 + root)
    r_plus = 1.0 + root
    return 4.0 * math.sqrt(2.0 / r_plus) * special.ellipk(r_minus / r_plus)


def _log_factors(x: np.ndarray) -> tuple[int, float]:
    """Sign and log-magnitude of ``prod x``."""
    if np.any(x == 0):
        raise ValueError("determinant vanishes: a factor is zero")
    sign = -1 if np.count_nonzero(x < 0) % 2 else 1
    return sign, math.fsum(np.log(np.abs(x)))


def fredholm_log(d: int, L: float, N: int, c: float, a: float) -> tuple[int, float]:
    """Sign and log of ``det(1 + c(-Delta + a)^{-1})`` truncated to ``|k|_1 <= N``."""
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    den = lam + a
    if np.any(den == 0):
        raise ValueError("-a is an eigenvalue of -Delta")
    return _log_factors(1.0 + c / den)


def fredholm_tail_1d(L: float, N: int) -> float:
    """Asymptotic log of ``prod_{|k| > N} nu_k / mu_k`` up to ``O(N^{-5})``."""
    s = (L / (2.0 * np.pi)) ** 2
    # log(nu/mu) = 3/x - 3/(2 x^2) + O(x^{-3}) with x = (2 pi k / L)^2
    s2 = float(special.polygamma(1, N + 1))
    s4 = float(special.polygamma(3, N + 1)) / 6.0
    return 2.0 * (3.0 * s * s2 - 1.5 * s * s * s4)


def fredholm_det_1d(L: float, N: int = 512, tail_correction: bool = False) -> float:
    """``prod_{|k| <= N} nu_k / mu_k = det(1 + 3(-Delta - 1)^{-1})``.

    With ``tail_correction`` the asymptotic contribution of the omitted modes
    is included.
    """
    if abs(L / (2.0 * np.pi) - round(L / (2.0 * np.pi))) < 1e-14:
        raise ValueError("L must not be a multiple of 2 pi")
    sign, lg = fredholm_log(1, L, N, 3.0, -1.0)
    if tail_correction:
        lg += fredholm_tail_1d(L, N)
    return sign * math.exp(lg)


def reciprocal_fredholm_det_1d(L: float, N: int = 512, tail_correction: bool = False) -> float:
    """``det(1 - 3(-Delta + 2)^{-1}) = prod mu_k / nu_k``."""
    sign, lg = fredholm_log(1, L, N, -3.0, 2.0)
    if tail_correction:
        lg -= fredholm_tail_1d(L, N)
    return sign * math.exp(lg)


def fredholm_closed_form_1d(L: float) -> float:
    """``-sinh^2(L / sqrt 2) / sin^2(L / 2)``."""
    return -math.sinh(L / math.sqrt(2.0)) ** 2 / math.sin(0.5 * L) ** 2


def carleman_fredholm_log(d: int, L: float, N: int, c: float, b: float) -> tuple[int, float]:
    """Sign and log of ``det_2(1 + c(-Delta + b)^{-1})`` on ``|k|_1 <= N``."""
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    den = lam + b
    if np.any(den == 0):
        raise ValueError("-b is an eigenvalue of -Delta")
    x = c / den
    if np.any(1.0 + x == 0):
        raise ValueError("determinant vanishes: a factor is zero")
    sign = -1 if np.count_nonzero(1.0 + x < 0) % 2 else 1
    terms = np.log(np.abs(1.0 + x)) - x
    return sign, math.fsum(terms)


def carleman_fredholm(d: int, L: float, N: int, c: float, b: float) -> float:
    sign, lg = carleman_fredholm_log(d, L, N, c, b)
    return sign * math.exp(lg)


def carleman_bound(d: int, L: float, N: int, c: float, b: float) -> tuple[float, float, float]:
    """``(exp(-M c^2 / b^2), det_2, exp(M c^2 / b^2))`` with ``M = b^2 sum (lambda_k + b)^{-2}``.

    Valid when every ``|c / (lambda_k + b)| <= 1/2``, which is checked.
    """
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    x = c / (lam + b)
    if np.max(np.abs(x)) > 0.5:
        raise ValueError("bound requires |c / (lambda_k + b)| <= 1/2 on every mode")
    M = b * b * math.fsum((lam + b) ** -2.0)
    r = M * c * c / (b * b)
    return math.exp(-r), carleman_fredholm(d, L, N, c, b), math.exp(r)


def cf_shift_residual(d: int, L: float, N: int, a: float, b: float) -> float:
    """Log-residual of ``CF(a-b; b)^{-1} = CF(b-a; a) exp{(a-b)^2 Tr[(-Delta+a)^{-1}(-Delta+b)^{-1}]}``."""
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    _, lhs = carleman_fredholm_log(d, L, N, a - b, b)
    _, rhs = carleman_fredholm_log(d, L, N, b - a, a)
    tr = math.fsum(1.0 / ((lam + a) * (lam + b)))
    return abs(-lhs - (rhs + (a - b) ** 2 * tr))


def ek_predict_1d(L: float, eps: float, N: int = 512, tail_correction: bool = True) -> EkPrediction:
    """Mean transition time between ``phi = -1`` and ``phi = +1`` on a circle of length ``L``.

    ``2 pi / |mu_0| * exp(L / (4 eps)) / sqrt(|det(1 + 3(-Delta - 1)^{-1})|)``.
    The reported truncation error is the relative change of the prefactor
    between cutoffs ``N / 2`` and ``N``.
    """
    if not 0 < L < 2.0 * math.pi:
        raise ValueError("need 0 < L < 2 pi for a constant transition state")
    if not eps > 0:
        raise ValueError("eps must be positive")
    det = fredholm_det_1d(L, N, tail_correction)
    coarse = fredholm_det_1d(L, max(N // 2, 1), tail_correction)
    err = abs(math.sqrt(abs(det / coarse)) - 1.0)
    pref = 2.0 * math.pi / math.sqrt(abs(det))
    rate = L / 4.0
    return EkPrediction(pref, rate, eps, pref * math.exp(rate / eps), det, err)


def ek_predict_2d(L: float, eps: float, N: int = 256, theta: float = 0.0) -> EkPrediction:
    """Two-dimensional prediction with the Carleman-Fredholm determinant.

    ``2 pi / |mu_0| * exp(-3 theta / 2) * exp(L^2 / (4 eps)) / sqrt(|det_2(1 + 3(-Delta - 1)^{-1})|)``,
    the product running over ``|k|_1 <= N`` including ``k = 0``.  The error
    estimate is the relative change of the prefactor from ``N / 2`` to ``N``.
    """
    if not 0 < L < 2.0 * math.pi:
        raise ValueError("need 0 < L < 2 pi for a constant transition state")
    if not eps > 0:
        raise ValueError("eps must be positive")
    _, lg = carleman_fredholm_log(2, L, N, 3.0, -1.0)
    _, lg_half = carleman_fredholm_log(2, L, max(N // 2, 1), 3.0, -1.0)
    det = -math.exp(lg)
    pref = 2.0 * math.pi * math.exp(-1.5 * theta - 0.5 * lg)
    rate = L * L / 4.0
    err = abs(math.expm1(0.5 * (lg_half - lg)))
    return EkPrediction(pref, rate, eps, pref * math.exp(rate / eps), det, err)


def ek_predict_galerkin(
    d: int, L: float, N: int, eps: float, theta: float = 0.0, renormalize: bool | None = None
) -> EkPrediction:
    """Eyring-Kramers formula for the truncated system at fixed ``N``.

    With ``r = 1 + 3 eps C_N`` (``C_N = 0`` without renormalization) the
    minima are ``phi = +-sqrt(r)``, the barrier is ``L^d r^2 / 4`` and the
    Hessian eigenvalues are ``lambda_k - r`` at ``phi = 0`` and
    ``lambda_k + 2 r`` at the minima, so the mean transition time is
    ``2 pi / |mu_0| * sqrt(|prod mu_k| / prod nu_k) * exp(L^d r^2 / (4 eps))``.
    Unlike :func:`ek_predict_2d` the counterterm enters exactly, including
    its ``k = 0`` contribution, which makes this the relevant comparison for
    simulations at small ``N``.  ``prefactor`` is reported relative to
    ``exp(L^d / (4 eps))``.
    """
    from .spde import counterterm_CN

    if not eps > 0:
        raise ValueError("eps must be positive")
    if renormalize is None:
        renormalize = d == 2
    C = counterterm_CN(d, N, L, theta) if renormalize else 0.0
    r = 1.0 + 3.0 * eps * C
    lam = laplacian_eigenvalues(d, N, L)[mode_mask(d, N)]
    mu = lam - r
    nu = lam + 2.0 * r
    if np.sum(mu < 0) != 1:
        raise ValueError("the constant state is not an index-one saddle at this L")
    log_ratio = float(np.sum(np.log(nu)) - np.sum(np.log(np.abs(mu))))
    rate = L**d / 4.0
    barrier = L**d * r * r / 4.0
    pref = 2.0 * math.pi / r * math.exp(-0.5 * log_ratio + (barrier - rate) / eps)
    return EkPrediction(pref, rate, eps, pref * math.exp(rate / eps), -math.exp(log_ratio), 0.0)
