"""Real trigonometric basis on the periodic box (R/LZ)^d.

One-dimensional basis functions are

    e_0 = 1/sqrt(L),
    e_k = sqrt(2/L) cos(2 pi k x / L)     for k > 0,
    e_k = sqrt(2/L) sin(2 pi |k| x / L)   for k < 0,

and the d-dimensional basis is their tensor product.  Coefficients are held
on the full cube ``[-N, N]^d`` (index ``k + N`` along every axis) together
with a boolean mask selecting the retained modes ``|k_1| + ... + |k_d| <= N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SpectralField",
    "mode_mask",
    "wavenumbers",
    "laplacian_eigenvalues",
    "real_to_complex",
    "complex_to_real",
    "to_grid",
    "from_grid",
    "grid_points",
    "synthesis_matrix",
]


@lru_cache(maxsize=64)
def _mask_cached(d: int, N: int, include_zero: bool) -> np.ndarray:
    ks = np.meshgrid(*([np.arange(-N, N + 1)] * d), indexing="ij")
    l1 = sum(np.abs(k) for k in ks)
    mask = l1 <= N
    if not include_zero:
        mask &= l1 > 0
    mask.setflags(write=False)
    return mask


def mode_mask(d: int, N: int, include_zero: bool = True) -> np.ndarray:
    """Boolean cube marking modes with ``|k|_1 <= N``."""
    if d < 1 or N < 0:
        raise ValueError("need d >= 1 and N >= 0")
    return _mask_cached(int(d), int(N), bool(include_zero))


def wavenumbers(d: int, N: int) -> list[np.ndarray]:
    """Integer wavevector components on the cube, one broadcastable array per axis."""
    k = np.arange(-N, N + 1)
    out = []
    for ax in range(d):
        shape = [1] * d
        shape[ax] = 2 * N + 1
        out.append(k.reshape(shape))
    return out


def laplacian_eigenvalues(d: int, N: int, L: float) -> np.ndarray:
    """Eigenvalues ``(2 pi / L)^2 |k|^2`` of ``-Delta`` on the cube."""
    ks = wavenumbers(d, N)
    k2 = sum(k.astype(float) ** 2 for k in ks)
    return (2.0 * np.pi / L) ** 2 * np.broadcast_to(k2, (2 * N + 1,) * d)


def _axis_r2c(R: np.ndarray, axis: int, N: int, L: float) -> np.ndarray:
    R = np.moveaxis(R, axis, 0)
    a = np.sqrt(2.0 / L)
    C = np.empty(R.shape, dtype=complex)
    neg_idx = np.arange(N - 1, -1, -1)  # positions of -m for m = 1..N
    pos = R[N + 1 :]
    neg = R[neg_idx]
    C[N + 1 :] = 0.5 * a * (pos - 1j * neg)
    C[neg_idx] = 0.5 * a * (pos + 1j * neg)
    C[N] = R[N] / np.sqrt(L)
    return np.moveaxis(C, 0, axis)


def _axis_c2r(C: np.ndarray, axis: int, N: int, L: float) -> np.ndarray:
    C = np.moveaxis(C, axis, 0)
    a = np.sqrt(2.0 / L)
    R = np.empty(C.shape, dtype=complex)
    neg_idx = np.arange(N - 1, -1, -1)
    cp = C[N + 1 :]
    cm = C[neg_idx]
    R[N + 1 :] = (cp + cm) / a
    R[neg_idx] = 1j * (cp - cm) / a
    R[N] = np.sqrt(L) * C[N]
    return np.moveaxis(R, 0, axis)


def _spatial_dim(R: np.ndarray, d: int | None) -> int:
    return R.ndim if d is None else int(d)


def real_to_complex(R: np.ndarray, L: float, d: int | None = None) -> np.ndarray:
    """Map real-basis coefficients to coefficients of ``exp(2 pi i k.x/L)``.

    The last ``d`` axes are spatial (all axes by default); leading axes are
    treated as a batch.
    """
    d = _spatial_dim(R, d)
    N = (R.shape[-1] - 1) // 2
    C = R.astype(complex)
    for ax in range(R.ndim - d, R.ndim):
        C = _axis_r2c(C, ax, N, L)
    return C


def complex_to_real(C: np.ndarray, L: float, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`real_to_complex`; imaginary residue is dropped."""
    d = _spatial_dim(C, d)
    N = (C.shape[-1] - 1) // 2
    R = np.asarray(C, dtype=complex)
    for ax in range(C.ndim - d, C.ndim):
        R = _axis_c2r(R, ax, N, L)
    return R.real


def _embed(C: np.ndarray, M: int, d: int) -> np.ndarray:
    N = (C.shape[-1] - 1) // 2
    if M < 2 * N + 1:
        raise ValueError(f"grid size {M} too small for cutoff {N}")
    batch = C.shape[: C.ndim - d]
    big = np.zeros(batch + (M,) * d, dtype=complex)
    idx = np.arange(-N, N + 1) % M
    big[(Ellipsis,) + np.ix_(*([idx] * d))] = C
    return big


def _extract(big: np.ndarray, N: int, d: int) -> np.ndarray:
    M = big.shape[-1]
    idx = np.arange(-N, N + 1) % M
    return big[(Ellipsis,) + np.ix_(*([idx] * d))]


def to_grid(R: np.ndarray, L: float, M: int | None = None, d: int | None = None) -> np.ndarray:
    """Evaluate a real-basis expansion on the uniform grid ``x_j = j L / M``."""
    d = _spatial_dim(R, d)
    N = (R.shape[-1] - 1) // 2
    if M is None:
        M = 2 * N + 1
    C = real_to_complex(R, L, d)
    axes = tuple(range(R.ndim - d, R.ndim))
    vals = sfft.ifftn(_embed(C, M, d), axes=axes) * M**d
    return vals.real


def from_grid(values: np.ndarray, L: float, N: int, d: int | None = None) -> np.ndarray:
    """Real-basis coefficients (cube of side 2N+1) of grid samples.

    Exact for band-limited data when the grid resolves the band.
    """
    d = _spatial_dim(values, d)
    M = values.shape[-1]
    axes = tuple(range(values.ndim - d, values.ndim))
    C = _extract(sfft.fftn(values, axes=axes) / M**d, N, d)
    return complex_to_real(C, L, d)


def synthesis_matrix(N: int, L: float, M: int) -> np.ndarray:
    """``E[j, k + N] = e_k(j L / M)``, the one-dimensional basis sampled on the grid.

    With ``M >= 2N + 1`` one has ``E.T @ E = (M / L) I``.
    """
    if M < 2 * N + 1:
        raise ValueError(f"grid size {M} too small for cutoff {N}")
    x = np.arange(M) * (L / M)
    k = np.arange(-N, N + 1)
    arg = 2.0 * np.pi * np.outer(x, np.abs(k)) / L
    E = np.where(k > 0, np.cos(arg), np.sin(arg)) * np.sqrt(2.0 / L)
    E[:, N] = 1.0 / np.sqrt(L)
    return E


def grid_points(d: int, M: int, L: float) -> list[np.ndarray]:
    x = np.arange(M) * (L / M)
    return np.meshgrid(*([x] * d), indexing="ij")


@dataclass
class SpectralField:
    """Real-basis coefficients of a periodic field with cutoff ``N``.

    Entries outside ``mask`` are kept at zero.
    """

    coeffs: np.ndarray
    L: float
    mask: np.ndarray

    @property
    def d(self) -> int:
        return self.coeffs.ndim

    @property
    def N(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @classmethod
    def zeros(cls, d: int, N: int, L: float, include_zero: bool = True) -> "SpectralField":
        return cls(np.zeros((2 * N + 1,) * d), float(L), mode_mask(d, N, include_zero))

    @classmethod
    def unit_mode(cls, k: tuple[int, ...], N: int, L: float) -> "SpectralField":
        f = cls.zeros(len(k), N, L)
        f.coeffs[tuple(int(ki) + N for ki in k)] = 1.0
        return f

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy(), self.L, self.mask)

    def items(self):
        """Iterate over ``(k, coefficient)`` for retained modes."""
        N = self.N
        for idx in zip(*np.nonzero(self.mask)):
            yield tuple(int(i) - N for i in idx), float(self.coeffs[idx])

    def eigenvalues(self) -> np.ndarray:
        return laplacian_eigenvalues(self.d, self.N, self.L)

    def grid(self, M: int | None = None) -> np.ndarray:
        return to_grid(self.coeffs, self.L, M)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs[self.mask] ** 2)))

    def mean_mode(self) -> float:
        return float(self.coeffs[(self.N,) * self.d])
