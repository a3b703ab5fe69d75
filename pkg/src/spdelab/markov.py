"""Potential theory for finite reversible Markov chains.

Conventions: ``L = P - I`` is the generator, the committor ``h_AB`` equals 1
on ``A``, 0 on ``B`` and is harmonic elsewhere, ``e_AB = -L h_AB`` on ``A``
is the equilibrium measure and ``cap(A, B) = sum_A pi e_AB``.  Hitting times
``tau_A = inf{n >= 0 : X_n in A}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

__all__ = [
    "ReversibleChain",
    "UnitFlow",
    "PotentialSolution",
    "McEstimate",
    "committor",
    "dirichlet_form",
    "dirichlet_upper_bound",
    "harmonic_unit_flow",
    "flow_dissipation",
    "validate_flow",
    "thomson_lower_bound",
    "mean_hitting_time",
    "mc_oracle",
    "mc_escape_probability",
    "random_reversible_chain",
    "path_walk",
    "parse_edge_list",
]

DENSE_LIMIT = 2000
FLOW_TOL = 1e-9


@dataclass
class ReversibleChain:
    """Row-stochastic ``p`` with reversible stationary law ``pi``.

    If ``pi`` is omitted it is computed as the left Perron vector and
    reversibility is then verified.
    """

    p: np.ndarray
    pi: np.ndarray | None = None
    tol: float = 1e-12

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(p < 0):
            raise ValueError("negative transition probability")
        if not np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=self.tol * p.shape[0]):
            raise ValueError("rows of p must sum to 1")
        self.p = p
        if self.pi is None:
            self.pi = _stationary(p)
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (p.shape[0],) or np.any(pi <= 0):
            raise ValueError("pi must be a strictly positive vector of matching length")
        if abs(pi.sum() - 1.0) > 1e-10:
            raise ValueError("pi must sum to 1")
        flux = pi[:, None] * p
        if np.max(np.abs(flux - flux.T)) > self.tol:
            raise ValueError("chain is not reversible with respect to pi")
        self.pi = pi

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def generator(self) -> np.ndarray:
        return self.p - np.eye(self.n_states)

    def is_irreducible(self) -> bool:
        n, _ = connected_components(sps.csr_matrix(self.p > 0), directed=True, connection="strong")
        return n == 1


def _stationary(p: np.ndarray) -> np.ndarray:
    w, v = sla.eig(p.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, i])
    pi = pi / pi.sum()
    return pi


@dataclass
class UnitFlow:
    phi: np.ndarray

    def divergence(self) -> np.ndarray:
        return self.phi.sum(axis=1)


@dataclass
class PotentialSolution:
    h: np.ndarray
    e: np.ndarray
    cap: float
    nu: np.ndarray
    A: np.ndarray
    B: np.ndarray


@dataclass
class McEstimate:
    committor: float
    committor_se: float
    mean_time: float
    mean_time_se: float
    n_runs: int


def _as_set(S: Iterable[int], n: int, name: str) -> np.ndarray:
    S = np.unique(np.asarray(list(S), dtype=int))
    if S.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if S.min() < 0 or S.max() >= n:
        raise ValueError(f"{name} contains states outside 0..{n - 1}")
    return S


def _solve_interior(chain: ReversibleChain, interior: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I - P)|_interior x = rhs``."""
    if interior.size == 0:
        return np.zeros(0)
    n = chain.n_states
    if n <= DENSE_LIMIT:
        M = np.eye(interior.size) - chain.p[np.ix_(interior, interior)]
        try:
            lu = sla.lu_factor(M, check_finite=True)
        except sla.LinAlgError as exc:
            raise ValueError("singular system: chain is reducible relative to the boundary") from exc
        if np.min(np.abs(np.diag(lu[0]))) < 1e-14:
            raise ValueError("singular system: chain is reducible relative to the boundary")
        return sla.lu_solve(lu, rhs)
    # D^{1/2} (I - P) D^{-1/2} is symmetric for reversible chains
    s = np.sqrt(chain.pi[interior])
    P = sps.csr_matrix(chain.p)[interior][:, interior]
    S = sps.eye(interior.size) - sps.diags(s) @ P @ sps.diags(1.0 / s)
    u, info = spla.cg(S, s * rhs, rtol=1e-12, atol=0.0, maxiter=50 * interior.size)
    if info != 0:
        raise ValueError(f"conjugate gradient did not converge (info={info})")
    return u / s


def _reaches(chain: ReversibleChain, target: np.ndarray, avoid: np.ndarray) -> np.ndarray:
    """Mask of states that can enter ``target`` without passing through ``avoid``."""
    adj = sps.csr_matrix(chain.p > 0)
    ok = np.zeros(chain.n_states, bool)
    ok[target] = True
    open_ = np.ones(chain.n_states, bool)
    open_[avoid] = False
    while True:
        new = ok | (open_ & (adj @ ok.astype(np.int64) > 0))
        if np.array_equal(new, ok):
            return ok
        ok = new


def committor(chain: ReversibleChain, A: Sequence[int], B: Sequence[int]) -> PotentialSolution:
    n = chain.n_states
    A = _as_set(A, n, "A")
    B = _as_set(B, n, "B")
    if np.intersect1d(A, B).size:
        raise ValueError("A and B must be disjoint")
    if not chain.is_irreducible():
        raise ValueError("singular system: chain is reducible")
    h = np.zeros(n)
    h[A] = 1.0
    # states cut off from one set take the boundary value exactly
    h[~_reaches(chain, B, A)] = 1.0
    to_a = _reaches(chain, A, B)
    h[~to_a] = 0.0
    live = np.flatnonzero(to_a & (h == 0.0))
    rhs = chain.p[live] @ h
    h[live] = _solve_interior(chain, live, rhs)
    Lh = chain.p @ h - h
    e = np.zeros(n)
    e[A] = -Lh[A]
    cap = float(np.dot(chain.pi[A], e[A]))
    nu = np.zeros(n)
    nu[A] = chain.pi[A] * e[A] / cap
    return PotentialSolution(h, e, cap, nu, A, B)


def dirichlet_form(chain: ReversibleChain, f: np.ndarray, g: np.ndarray) -> float:
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    df = f[:, None] - f[None, :]
    dg = g[:, None] - g[None, :]
    return float(0.5 * np.sum(chain.pi[:, None] * chain.p * df * dg))


def _check_boundary(h: np.ndarray, A: np.ndarray, B: np.ndarray) -> None:
    if np.any(h < -1e-12) or np.any(h > 1 + 1e-12):
        raise ValueError("test function must take values in [0, 1]")
    if np.any(np.abs(h[A] - 1) > 1e-12) or np.any(np.abs(h[B]) > 1e-12):
        raise ValueError("test function must equal 1 on A and 0 on B")


def dirichlet_upper_bound(chain: ReversibleChain, A, B, h_test: np.ndarray) -> float:
    """``E(h_test)``, an upper bound on ``cap(A, B)``."""
    A = _as_set(A, chain.n_states, "A")
    B = _as_set(B, chain.n_states, "B")
    h_test = np.asarray(h_test, float)
    _check_boundary(h_test, A, B)
    return dirichlet_form(chain, h_test, h_test)


def harmonic_unit_flow(chain: ReversibleChain, A, B) -> UnitFlow:
    sol = committor(chain, A, B)
    h = sol.h
    phi = chain.pi[:, None] * chain.p * (h[:, None] - h[None, :]) / sol.cap
    np.fill_diagonal(phi, 0.0)
    return UnitFlow(phi)


def validate_flow(chain: ReversibleChain, A, B, flow: UnitFlow, tol: float = FLOW_TOL) -> None:
    n = chain.n_states
    A = _as_set(A, n, "A")
    B = _as_set(B, n, "B")
    phi = flow.phi
    if phi.shape != (n, n):
        raise ValueError("flow has the wrong shape")
    if np.max(np.abs(phi + phi.T)) > tol:
        raise ValueError("flow is not antisymmetric")
    off = (chain.p == 0) & ~np.eye(n, dtype=bool)
    if np.any(np.abs(phi[off]) > tol):
        raise ValueError("flow uses an edge with p(x, y) = 0")
    div = flow.divergence()
    interior = np.setdiff1d(np.arange(n), np.union1d(A, B))
    if interior.size and np.max(np.abs(div[interior])) > tol:
        raise ValueError("flow violates Kirchhoff's law off A and B")
    if abs(div[A].sum() - 1) > tol or abs(div[B].sum() + 1) > tol:
        raise ValueError("flow does not have unit intensity")


def flow_dissipation(chain: ReversibleChain, flow: UnitFlow) -> float:
    """``D(phi) = (1/2) sum phi(x,y)^2 / (pi(x) p(x,y))`` over edges."""
    c = chain.pi[:, None] * chain.p
    on = (c > 0) & ~np.eye(chain.n_states, dtype=bool)
    return float(0.5 * np.sum(flow.phi[on] ** 2 / c[on]))


def thomson_lower_bound(chain: ReversibleChain, A, B, flow: UnitFlow) -> float:
    """``1 / D(phi)``, a lower bound on ``cap(A, B)`` for a valid unit flow."""
    validate_flow(chain, A, B, flow)
    return 1.0 / flow_dissipation(chain, flow)


def mean_hitting_time(chain: ReversibleChain, A) -> np.ndarray:
    """``w_A(x) = E_x[tau_A]`` with ``tau_A`` counted from ``n = 0``."""
    n = chain.n_states
    A = _as_set(A, n, "A")
    if not chain.is_irreducible():
        raise ValueError("singular system: chain is reducible")
    w = np.zeros(n)
    interior = np.setdiff1d(np.arange(n), A)
    w[interior] = _solve_interior(chain, interior, np.ones(interior.size))
    return w


def _run_until_B(cum, starts, inA, inB, rng, max_steps):
    n_runs = starts.size
    state = starts.copy()
    hitA = inA[state].copy()
    hitB = inB[state].copy()
    first_A = hitA & ~hitB
    t = np.zeros(n_runs, dtype=np.int64)
    active = ~hitB
    step = 0
    while active.any():
        if step >= max_steps:
            raise RuntimeError("Monte Carlo trajectories did not reach B")
        idx = np.nonzero(active)[0]
        u = rng.random(idx.size)
        nxt = (u[:, None] > cum[state[idx]]).sum(axis=1)
        state[idx] = nxt
        t[idx] += 1
        newA = inA[nxt] & ~hitA[idx]
        hitA[idx] |= inA[nxt]
        first_A[idx[newA]] = True
        arrived = inB[nxt]
        hitB[idx] |= arrived
        active[idx[arrived]] = False
        step += 1
    return first_A, t


def mc_oracle(
    chain: ReversibleChain,
    start: int,
    A,
    B,
    n_runs: int,
    seed: int,
    max_steps: int = 10**7,
) -> McEstimate:
    """Monte Carlo estimates of ``P_start(tau_A < tau_B)`` and ``E_start[tau_B]``."""
    n = chain.n_states
    A = _as_set(A, n, "A")
    B = _as_set(B, n, "B")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(chain.p, axis=1)
    cum[:, -1] = 1.0
    inA = np.zeros(n, bool)
    inA[A] = True
    inB = np.zeros(n, bool)
    inB[B] = True
    first_A, t = _run_until_B(cum, np.full(n_runs, int(start)), inA, inB, rng, max_steps)
    q = first_A.mean()
    return McEstimate(
        float(q),
        float(np.sqrt(q * (1 - q) / n_runs)),
        float(t.mean()),
        float(t.std(ddof=1) / np.sqrt(n_runs)) if n_runs > 1 else float("nan"),
        n_runs,
    )


def mc_escape_probability(chain: ReversibleChain, x: int, A, B, n_runs: int, seed: int) -> tuple[float, float]:
    """Estimate ``P_x(tau+_B < tau+_A)`` (return times counted from ``n >= 1``)."""
    n = chain.n_states
    A = _as_set(A, n, "A")
    B = _as_set(B, n, "B")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(chain.p, axis=1)
    cum[:, -1] = 1.0
    first = (rng.random(n_runs)[:, None] > cum[int(x)]).sum(axis=1)
    inA = np.zeros(n, bool)
    inA[A] = True
    inB = np.zeros(n, bool)
    inB[B] = True
    first_A, _ = _run_until_B(cum, first, inA, inB, rng, 10**7)
    q = 1.0 - first_A.mean()
    return float(q), float(np.sqrt(q * (1 - q) / n_runs))


def random_reversible_chain(n: int, rng: np.random.Generator, density: float = 0.4, laziness: float = 0.1) -> ReversibleChain:
    """Random walk on a connected weighted graph (conductances ``c(x, y) = c(y, x)``)."""
    c = np.zeros((n, n))
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):  # spanning path keeps it connected
        c[a, b] = c[b, a] = rng.uniform(0.1, 1.0)
    extra = np.triu(rng.random((n, n)) < density, 1)
    w = np.triu(rng.uniform(0.1, 1.0, (n, n)), 1) * extra
    c = np.where(c > 0, c, w + w.T)
    c[np.diag_indices(n)] = laziness * c.sum(axis=1)
    cx = c.sum(axis=1)
    p = c / cx[:, None]
    return ReversibleChain(p, cx / cx.sum(), tol=1e-12)


def path_walk(n: int) -> ReversibleChain:
    """Simple random walk on ``{0, ..., n}`` reflected (held) at the ends."""
    m = n + 1
    p = np.zeros((m, m))
    for x in range(m):
        if x > 0:
            p[x, x - 1] = 0.5
        if x < n:
            p[x, x + 1] = 0.5
        p[x, x] = 1.0 - p[x].sum()
    return ReversibleChain(p, np.full(m, 1.0 / m))


def parse_edge_list(text: str) -> ReversibleChain:
    """Parse ``x y p(x,y)`` lines with an optional ``pi`` block.

    States are integers ``0..n-1``.  The ``pi`` block starts with a line
    ``pi`` followed by ``x pi(x)`` lines.  ``#`` starts a comment.
    """
    edges = []
    pis = {}
    in_pi = False
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "pi":
            in_pi = True
            continue
        parts = line.split()
        if in_pi:
            if len(parts) != 2:
                raise ValueError(f"bad pi line: {raw!r}")
            pis[int(parts[0])] = float(parts[1])
        else:
            if len(parts) != 3:
                raise ValueError(f"bad edge line: {raw!r}")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if not edges:
        raise ValueError("no edges given")
    n = 1 + max(max(x, y) for x, y, _ in edges)
    if pis:
        n = max(n, 1 + max(pis))
    p = np.zeros((n, n))
    for x, y, v in edges:
        p[x, y] += v
    pi = None
    if pis:
        if set(pis) != set(range(n)):
            raise ValueError("pi block must list every state")
        pi = np.array([pis[i] for i in range(n)])
    return ReversibleChain(p, pi, tol=1e-9)
