import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.gaussian import (
    GffSpec,
    gauss_hermite_moment,
    green_coefficients,
    green_power_integral,
    green_power_parseval,
    hermite,
    hermite_binomial_residual,
    hermite_coefficients,
    hermite_generating_check,
    isserlis_moment,
    renorm_constants_3d,
    sample_gff,
    sunset_bruteforce,
    sunset_integral,
    sunset_subdivergence_constant,
    wick_constant_CN,
    wick_integral_variance,
    wick_power_field,
)

reals = st.floats(-3, 3, allow_nan=False)
variances = st.floats(0, 2, allow_nan=False)


# Hermite ---------------------------------------------------------------------


def test_hermite_listed_values():
    assert hermite(2, 2.0, 1.0) == 3.0
    assert hermite(4, 1.0, 1.0) == -2.0
    assert hermite(0, 7.3, 0.4) == 1.0
    assert hermite(3, 2.0, 0.5) == pytest.approx(8 - 3 * 0.5 * 2)


@given(st.integers(0, 12), reals)
def test_hermite_zero_variance_is_monomial(n, x):
    assert hermite(n, x, 0.0) == pytest.approx(x**n, rel=1e-12, abs=1e-12)


@given(st.integers(0, 12), reals, variances)
def test_hermite_derivative_recursion(n, x, eps):
    # H_{n+1} = x H_n - eps H_n'
    c = hermite_coefficients(n, eps)
    deriv = np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(c)) if n else 0.0
    assert hermite(n + 1, x, eps) == pytest.approx(x * hermite(n, x, eps) - eps * deriv, rel=1e-9, abs=1e-9)
    assert np.polynomial.polynomial.polyval(x, c) == pytest.approx(hermite(n, x, eps), rel=1e-9, abs=1e-9)


def test_hermite_rejects_bad_arguments():
    with pytest.raises(ValueError):
        hermite(-1, 0.0)
    with pytest.raises(ValueError):
        hermite(2, 0.0, -1.0)


def test_generating_function():
    assert hermite_generating_check(0.0, 1.3, 0.7, 5) == 0.0
    assert hermite_generating_check(0.5, 1.0, 1.0, 20) < 1e-12


@settings(max_examples=200)
@given(st.integers(0, 6), reals, reals, variances, variances)
def test_binomial_identity(n, x, y, e1, e2):
    assert hermite_binomial_residual(n, x, y, e1, e2) <= 1e-10 * max(1.0, (abs(x) + abs(y) + 2) ** n)


def test_hermite_orthogonality_monte_carlo():
    rng = np.random.default_rng(5)
    rho = 0.6
    n_samples = 400_000
    z1, z2 = rng.standard_normal((2, n_samples))
    X, Y = z1, rho * z1 + math.sqrt(1 - rho**2) * z2
    for n in range(5):
        for m in range(5):
            prod = hermite(n, X, 1.0) * hermite(m, Y, 1.0)
            target = math.factorial(n) * rho**n if n == m else 0.0
            se = prod.std() / math.sqrt(n_samples)
            assert abs(prod.mean() - target) <= 3 * se + 1e-12, (n, m)


# Isserlis --------------------------------------------------------------------


def test_isserlis_four_point():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    C = A @ A.T
    exp = C[0, 1] * C[2, 3] + C[0, 2] * C[1, 3] + C[0, 3] * C[1, 2]
    assert isserlis_moment(C, (0, 1, 2, 3)) == pytest.approx(exp, rel=1e-14)


def test_isserlis_odd_and_double_factorial():
    assert isserlis_moment(np.eye(3), (0, 1, 2)) == 0.0
    assert isserlis_moment(np.eye(1), (0,) * 8) == 105.0
    assert gauss_hermite_moment(np.eye(1), (0,) * 8) == pytest.approx(105.0, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 2),
    st.integers(0, 2**31 - 1),
    st.lists(st.integers(0, 1), min_size=1, max_size=8),
)
def test_isserlis_matches_quadrature(dim, seed, idx):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (dim, dim))
    C = A @ A.T + 0.2 * np.eye(dim)
    idx = [i % dim for i in idx]
    a = isserlis_moment(C, idx)
    b = gauss_hermite_moment(C, idx)
    assert a == pytest.approx(b, rel=1e-8, abs=1e-8)


# free field -----------------------------------------------------------------------


def test_gff_spec_validation():
    with pytest.raises(ValueError):
        GffSpec(4, 3)
    with pytest.raises(ValueError):
        GffSpec(1, 3, mass_sq=-1.0)
    GffSpec(1, 3, mass_sq=-1.0, zero_mean=True)  # nonzero modes have lambda > 1 at L = 1


def test_gff_deterministic_and_zero_mean():
    spec = GffSpec(2, 6, zero_mean=True)
    a, b = sample_gff(spec, 3), sample_gff(spec, 3)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    assert a.coeffs[6, 6] == 0.0
    assert not a.mask[6, 6]


def test_gff_mode_variances():
    spec = GffSpec(1, 4, L=2.0, mass_sq=0.5)
    rng = np.random.default_rng(11)
    samples = np.array([sample_gff(spec, rng).coeffs for _ in range(10_000)])
    g = green_coefficients(spec)
    np.testing.assert_allclose(samples.var(axis=0), g, rtol=0.05)
    cov = np.cov(samples.T)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 4 * max(g) / math.sqrt(10_000) * 2


def test_pointwise_variance_equals_CN():
    # E[phi(x)^2] averaged over the box equals L^{-d} sum g_k exactly
    spec = GffSpec(2, 5, L=1.5)
    g = green_coefficients(spec)
    expected = float(np.sum(g)) / spec.L**2
    assert wick_constant_CN(2, 5, 1.5).value == pytest.approx(expected, rel=1e-13)
    rng = np.random.default_rng(2)
    vals = np.array([np.mean(sample_gff(spec, rng).grid(16) ** 2) for _ in range(4000)])
    assert abs(vals.mean() - expected) <= 4 * vals.std() / math.sqrt(vals.size)


def test_CN_asymptotics():
    d2 = [wick_constant_CN(2, N).value for N in (32, 64, 128, 256)]
    band = [c - math.log(N) / (2 * math.pi) for c, N in zip(d2, (32, 64, 128, 256))]
    assert max(band) - min(band) < 0.01
    for a, b in zip(d2, d2[1:]):
        assert (b - a) == pytest.approx(math.log(2) / (2 * math.pi), rel=0.05)
    d1 = [wick_constant_CN(1, N).value for N in (16, 64, 256, 1024)]
    assert max(d1) - min(d1) < 0.01
    d3 = [wick_constant_CN(3, N).value / N for N in (16, 32, 64, 128)]
    assert 0.05 < min(d3) and max(d3) < 1.0


def test_wick_power_properties():
    spec = GffSpec(2, 8)
    C = wick_constant_CN(2, 8).value
    f = sample_gff(spec, 4)
    np.testing.assert_allclose(wick_power_field(f, 1, C, 40), f.grid(40))
    rng = np.random.default_rng(8)
    means = np.array([wick_power_field(sample_gff(spec, rng), 2, C, 33).mean() for _ in range(1000)])
    assert abs(means.mean()) <= 3 * means.std() / math.sqrt(means.size)


def test_wick_integral_variance_monte_carlo():
    spec = GffSpec(2, 6)
    C = wick_constant_CN(2, 6).value
    rng = np.random.default_rng(9)
    for n in (2, 3):
        ints = np.array([wick_power_field(sample_gff(spec, rng), n, C, 32).mean() for _ in range(20_000)])
        exact = wick_integral_variance(2, 6, n)
        var = ints.var(ddof=1)
        kurt = np.mean((ints - ints.mean()) ** 4) / var**2
        se = var * math.sqrt((kurt - 1) / ints.size)
        assert abs(var - exact) <= 3 * se


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_wick_variance_bounded_in_N(n):
    Ns = np.array([16, 32, 64, 128])
    v = [wick_integral_variance(2, int(N), n) for N in Ns]
    assert abs(np.polyfit(np.log2(Ns), v, 1)[0]) < 0.02


# diagrams ------------------------------------------------------------------------


@pytest.mark.parametrize("d,N,a,zm", [(1, 9, 1.0, False), (2, 6, 0.3, False), (3, 4, -1.0, True)])
def test_green_power_two_is_parseval(d, N, a, zm):
    assert green_power_integral(d, N, 1.0, a, 2, zm) == pytest.approx(green_power_parseval(d, N, 1.0, a, zm), rel=1e-10)


def test_green_power_three_direct_convolution():
    d, N = 2, 3
    spec = GffSpec(d, N)
    g = green_coefficients(spec)
    ks = [np.array(i) - N for i in zip(*np.nonzero(spec.mask))]
    gk = {tuple(k): g[tuple(k + N)] for k in ks}
    total = 0.0
    for k1 in gk:
        for k2 in gk:
            k3 = tuple(-(a + b) for a, b in zip(k1, k2))
            total += gk[k1] * gk[k2] * gk.get(k3, 0.0)
    assert green_power_integral(d, N, n=3) == pytest.approx(total, rel=1e-12)


def test_green_power_rejects_order():
    with pytest.raises(ValueError):
        green_power_integral(3, 4, n=5)


def test_growth_signatures_3d():
    args = dict(L=1.0, mass_sq=-1.0, zero_mean=True)
    g3 = [green_power_integral(3, N, n=3, **args) for N in (8, 16, 32, 64)]
    g4 = [green_power_integral(3, N, n=4, **args) for N in (8, 16, 32, 64)]
    inc3 = np.diff(g3)
    inc4 = np.diff(g4)
    assert np.all(inc3 > 0) and np.all(inc4 > 0)
    # logarithmic: equal increments per doubling; linear: increments double
    assert np.all(np.abs(inc3[1:] / inc3[:-1] - 1) < 0.25)
    assert np.all(np.abs(inc4[1:] / inc4[:-1] - 2) < 0.5)


def test_sunset_against_bruteforce():
    args = dict(L=1.0, mass_sq=-1.0, zero_mean=True)
    assert sunset_integral(3, 4, **args) == pytest.approx(sunset_bruteforce(4, 17, **args), rel=1e-8)


def test_renorm_constants_positive_and_monotone():
    prev = None
    for N in (4, 8, 16):
        c = renorm_constants_3d(N)
        vals = {k: v.value for k, v in c.items()}
        assert all(v > 0 for v in vals.values())
        if prev:
            assert all(vals[k] >= prev[k] for k in vals)
        prev = vals
    c = renorm_constants_3d(8)
    assert c["C2"].value == pytest.approx(
        12 * sunset_subdivergence_constant(8).value, rel=1e-14
    )


def test_tadpole_grows_like_inverse_mollifier_scale():
    # C1(N) ~ N: doubling N (halving delta = 1/N) doubles C1 asymptotically
    c = [renorm_constants_3d(N)["C1"].value for N in (16, 32, 64)]
    ratios = [b / a for a, b in zip(c, c[1:])]
    assert all(abs(r - 2) < 0.1 for r in ratios)
