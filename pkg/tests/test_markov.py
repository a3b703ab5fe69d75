import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.markov import (
    ReversibleChain,
    UnitFlow,
    committor,
    dirichlet_form,
    dirichlet_upper_bound,
    flow_dissipation,
    harmonic_unit_flow,
    mc_escape_probability,
    mc_oracle,
    mean_hitting_time,
    parse_edge_list,
    path_walk,
    random_reversible_chain,
    thomson_lower_bound,
    validate_flow,
)


def two_state(p, q):
    return ReversibleChain(np.array([[1 - p, p], [q, 1 - q]]))


def random_sets(n, rng):
    perm = rng.permutation(n)
    a = rng.integers(1, max(2, n // 3) + 1)
    b = rng.integers(1, max(2, n // 3) + 1)
    return perm[:a], perm[a : a + b]


def _reaches(ch, target, avoid):
    """States from which ``target`` can be reached without entering ``avoid``."""
    ok = np.zeros(ch.n_states, bool)
    ok[target] = True
    blocked = np.zeros(ch.n_states, bool)
    blocked[avoid] = True
    changed = True
    while changed:
        new = ok | (~blocked & ((ch.p > 0) @ ok))
        changed = bool((new != ok).any())
        ok = new
    return ok


chains = st.builds(
    lambda n, seed: (random_reversible_chain(n, np.random.default_rng(seed)), np.random.default_rng(seed + 1)),
    st.integers(3, 30),
    st.integers(0, 2**31 - 1),
)


# chain construction --------------------------------------------------------------


def test_stationary_law_is_computed_and_checked():
    ch = two_state(0.3, 0.1)
    np.testing.assert_allclose(ch.pi, [0.25, 0.75], atol=1e-14)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError, match="sum to 1"):
        ReversibleChain(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(ValueError, match="not reversible"):
        cyc = np.array([[0, 0.9, 0.1], [0.1, 0, 0.9], [0.9, 0.1, 0]])
        ReversibleChain(cyc)
    with pytest.raises(ValueError, match="strictly positive"):
        ReversibleChain(np.eye(2), np.array([1.0, 0.0]))


def test_reducible_chain_reported():
    with pytest.raises(ValueError, match="reducible"):
        committor(ReversibleChain(np.eye(3), np.full(3, 1 / 3)), [0], [2])


def test_overlapping_sets_rejected():
    with pytest.raises(ValueError, match="disjoint"):
        committor(path_walk(4), [0, 1], [1, 4])


# committor and capacity ---------------------------------------------------------


def test_gamblers_ruin():
    sol = committor(path_walk(10), [0], [10])
    np.testing.assert_allclose(sol.h, 1 - np.arange(11) / 10, atol=1e-13)
    # each of the 10 edges carries pi p (1/10)^2 = (1/11)(1/2)(1/100)
    assert sol.cap == pytest.approx(0.05 / 11, rel=1e-12)
    np.testing.assert_allclose(sol.nu[sol.A].sum(), 1.0)


def test_committor_is_exact_behind_a_set():
    # states 0, 1 reach B = {4} only through A = {2}
    sol = committor(path_walk(4), [2], [4])
    assert sol.h[0] == 1.0 and sol.h[1] == 1.0
    assert sol.h[3] == pytest.approx(0.5, abs=1e-14)
    back = committor(path_walk(4), [4], [2])
    assert back.h[0] == 0.0 and back.h[1] == 0.0


def test_two_state_capacity():
    p, q = 0.3, 0.2
    sol = committor(two_state(p, q), [0], [1])
    assert sol.e[0] == pytest.approx(p, rel=1e-14)
    assert sol.cap == pytest.approx(p * q / (p + q), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(chains)
def test_potential_solution_invariants(data):
    ch, rng = data
    A, B = random_sets(ch.n_states, rng)
    sol = committor(ch, A, B)
    assert np.all(sol.h >= -1e-12) and np.all(sol.h <= 1 + 1e-12)
    np.testing.assert_array_equal(sol.h[A], 1.0)
    np.testing.assert_array_equal(sol.h[B], 0.0)
    assert np.all(sol.e >= -1e-12)
    assert sol.cap == pytest.approx(float(ch.pi[A] @ sol.e[A]), rel=1e-12)
    assert sol.nu.sum() == pytest.approx(1.0, abs=1e-12)
    # h < 1 exactly where B is reachable avoiding A, and h > 0 symmetrically
    interior = np.setdiff1d(np.arange(ch.n_states), np.union1d(A, B))
    reach_b = _reaches(ch, B, A)
    reach_a = _reaches(ch, A, B)
    for x in interior:
        assert (sol.h[x] < 1) == reach_b[x]
        assert (sol.h[x] > 0) == reach_a[x]
    sol_ba = committor(ch, B, A)
    assert sol_ba.cap == pytest.approx(sol.cap, rel=1e-10)
    np.testing.assert_allclose(sol_ba.h, 1 - sol.h, atol=1e-12)


# Dirichlet form ----------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(chains)
def test_dirichlet_form_identities(data):
    ch, rng = data
    n = ch.n_states
    f, g = rng.standard_normal(n), rng.standard_normal(n)
    assert dirichlet_form(ch, np.full(n, 3.0), np.full(n, 3.0)) == pytest.approx(0.0, abs=1e-14)
    lhs = dirichlet_form(ch, f, g)
    rhs = float(np.sum(ch.pi * f * -(ch.generator @ g)))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
    assert lhs == pytest.approx(dirichlet_form(ch, g, f), rel=1e-12, abs=1e-14)
    assert dirichlet_form(ch, f, f) >= 0
    A, B = random_sets(n, rng)
    sol = committor(ch, A, B)
    assert dirichlet_form(ch, sol.h, sol.h) == pytest.approx(sol.cap, rel=1e-10)


def test_dirichlet_bound_examples():
    ch = path_walk(10)
    sol = committor(ch, [0], [10])
    assert dirichlet_upper_bound(ch, [0], [10], sol.h) == pytest.approx(sol.cap, rel=1e-12)
    lin = 1 - np.arange(11) / 10
    assert dirichlet_upper_bound(ch, [0], [10], lin) == pytest.approx(0.05 / 11, rel=1e-12)
    ind = np.zeros(11)
    ind[[0, 4]] = 1.0
    assert dirichlet_upper_bound(ch, [0], [10], ind) >= sol.cap
    with pytest.raises(ValueError):
        dirichlet_upper_bound(ch, [0], [10], np.zeros(11))


# flows ---------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(chains)
def test_harmonic_flow_is_unit_and_optimal(data):
    ch, rng = data
    A, B = random_sets(ch.n_states, rng)
    flow = harmonic_unit_flow(ch, A, B)
    validate_flow(ch, A, B, flow, tol=1e-10)
    div = flow.divergence()
    assert div[A].sum() == pytest.approx(1.0, abs=1e-10)
    assert div[B].sum() == pytest.approx(-1.0, abs=1e-10)
    cap = committor(ch, A, B).cap
    assert flow_dissipation(ch, flow) == pytest.approx(1 / cap, rel=1e-10)
    assert thomson_lower_bound(ch, A, B, flow) == pytest.approx(cap, rel=1e-10)


def _cycle_flow(n, cycle):
    phi = np.zeros((n, n))
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        phi[a, b] += 1.0
        phi[b, a] -= 1.0
    return phi


def test_perturbed_flow_is_strictly_worse():
    # complete graph: any cycle is a divergence-free perturbation
    rng = np.random.default_rng(3)
    n = 6
    c = rng.uniform(0.2, 1.0, (n, n))
    c = c + c.T
    p = c / c.sum(axis=1, keepdims=True)
    ch = ReversibleChain(p)
    A, B = [0], [5]
    flow = harmonic_unit_flow(ch, A, B)
    cap = committor(ch, A, B).cap
    bumped = UnitFlow(flow.phi + 0.05 * _cycle_flow(n, [1, 2, 3]))
    lower = thomson_lower_bound(ch, A, B, bumped)
    assert lower < cap * (1 - 1e-6)


def test_uniform_split_flow_on_path():
    ch = path_walk(6)
    phi = _cycle_flow(7, list(range(7)))
    phi[6, 0] = phi[0, 6] = 0.0  # open the cycle into a path 0 -> 6
    flow = UnitFlow(phi)
    assert thomson_lower_bound(ch, [0], [6], flow) <= committor(ch, [0], [6]).cap * (1 + 1e-12)


def test_flow_validation_errors():
    ch = path_walk(4)
    good = harmonic_unit_flow(ch, [0], [4])
    with pytest.raises(ValueError, match="antisymmetric"):
        validate_flow(ch, [0], [4], UnitFlow(np.abs(good.phi)))
    with pytest.raises(ValueError, match="unit intensity"):
        validate_flow(ch, [0], [4], UnitFlow(2 * good.phi))
    bad = good.phi.copy()
    bad[0, 3], bad[3, 0] = 0.1, -0.1
    with pytest.raises(ValueError, match="edge"):
        thomson_lower_bound(ch, [0], [4], UnitFlow(bad))


@settings(max_examples=30, deadline=None)
@given(chains, st.floats(0.0, 1.0))
def test_sandwich(data, mix):
    ch, rng = data
    A, B = random_sets(ch.n_states, rng)
    sol = committor(ch, A, B)
    h = sol.h.copy()
    interior = np.setdiff1d(np.arange(ch.n_states), np.union1d(A, B))
    h[interior] = (1 - mix) * h[interior] + mix * rng.random(interior.size)
    upper = dirichlet_upper_bound(ch, A, B, h)
    lower = thomson_lower_bound(ch, A, B, harmonic_unit_flow(ch, A, B))
    assert lower <= sol.cap * (1 + 1e-10)
    assert sol.cap <= upper * (1 + 1e-10)


# hitting times -------------------------------------------------------------------


def test_hitting_time_on_path():
    n = 12
    w = mean_hitting_time(path_walk(n), [0, n])
    x = np.arange(n + 1)
    np.testing.assert_allclose(w, x * (n - x), rtol=1e-12, atol=1e-10)


def test_two_state_hitting_time():
    w = mean_hitting_time(two_state(0.25, 0.6), [1])
    assert w[0] == pytest.approx(4.0, rel=1e-14)
    assert w[1] == 0.0


@settings(max_examples=40, deadline=None)
@given(chains)
def test_magic_formula(data):
    ch, rng = data
    A, B = random_sets(ch.n_states, rng)
    sol = committor(ch, A, B)
    w = mean_hitting_time(ch, B)
    lhs = float(sol.nu @ w)
    rhs = float(ch.pi @ sol.h) / sol.cap
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_large_chain_uses_iterative_solver():
    n = 2400
    ch = path_walk(n - 1)
    w = mean_hitting_time(ch, [0, n - 1])
    x = np.arange(n)
    np.testing.assert_allclose(w, x * (n - 1 - x), rtol=1e-7)


# Monte Carlo oracles ---------------------------------------------------------------


def test_mc_committor_on_path():
    ch = path_walk(10)
    est = mc_oracle(ch, 3, [0], [10], 100_000, seed=1)
    exact = committor(ch, [0], [10]).h[3]
    assert abs(est.committor - exact) <= 3 * est.committor_se


def test_mc_start_in_A():
    est = mc_oracle(path_walk(5), 0, [0], [5], 1000, seed=2)
    assert est.committor == 1.0


def test_mc_two_state_geometric_mean():
    p = 0.2
    est = mc_oracle(two_state(p, 0.5), 0, [0], [1], 50_000, seed=3)
    assert abs(est.mean_time - 1 / p) <= 3 * est.mean_time_se


def test_equilibrium_measure_is_escape_probability():
    ch = random_reversible_chain(12, np.random.default_rng(7))
    A, B = [0, 1], [11]
    sol = committor(ch, A, B)
    for x in A:
        q, se = mc_escape_probability(ch, x, A, B, 100_000, seed=10 + x)
        assert 0 <= sol.e[x] <= 1
        assert abs(q - sol.e[x]) <= 3 * se


# edge-list input ---------------------------------------------------------------------


def test_parse_edge_list():
    text = """# three-state path
    0 0 0.5
    0 1 0.5
    1 0 0.5
    1 2 0.5
    2 1 0.5
    2 2 0.5
    pi
    0 0.3333333333333333
    1 0.3333333333333333
    2 0.3333333333333334
    """
    ch = parse_edge_list(text)
    assert ch.n_states == 3
    assert committor(ch, [0], [2]).cap == pytest.approx(1 / 12, rel=1e-12)
    with pytest.raises(ValueError):
        parse_edge_list("0 1")
