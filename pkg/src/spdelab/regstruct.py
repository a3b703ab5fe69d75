"""Symbolic regularity structure of the cubic Allen-Cahn equation.

Symbols are rooted trees.  A node is a commutative product

    Xi^e * X^k * I(tau_1) * ... * I(tau_m)

stored as ``(e, k, (tau_1, ..., tau_m))`` with the planted children sorted, so
equality is syntactic.  Degrees are pairs ``(a, b)`` meaning ``a + b kappa``
for an infinitesimal ``kappa > 0`` and compare lexicographically.  Space-time
carries the parabolic scaling ``(2, 1, ..., 1)`` (time first), the noise has
degree ``-(d + 2)/2 - kappa`` and ``I`` raises the degree by 2, with
``I(X^k) = 0``.

Elements of the positive side are ``X^k * prod_j J_{k_j}(tau_j)``.  A tensor
sum maps pairs of a symbol and a positive symbol to rational coefficients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from typing import Callable, Iterable

__all__ = [
    "Symbol",
    "PlusSymbol",
    "Structure",
    "AC3",
    "AC2",
    "GroupElement",
    "parse_symbol",
    "REFERENCE_SYMBOLS",
    "REFERENCE_COPRODUCTS",
    "MAC_LINES",
    "expand_axes",
    "parse_plus",
    "reference_symbols",
    "jet_index_report",
    "reference_coproduct",
    "mac_expected",
]

Degree = tuple[Fraction, Fraction]


@dataclass(frozen=True, order=True)
class Symbol:
    xi: int
    poly: tuple[int, ...]
    children: tuple["Symbol", ...]

    def __str__(self) -> str:
        return format_symbol(self)

    __repr__ = __str__

    @property
    def is_poly(self) -> bool:
        return self.xi == 0 and not self.children

    def n_factors(self) -> int:
        return self.xi + len(self.children) + (1 if any(self.poly) else 0)


@dataclass(frozen=True, order=True)
class PlusSymbol:
    """``X^poly * prod J_k(tau)`` with ``jets`` a sorted tuple of ``(k, tau)``."""

    poly: tuple[int, ...]
    jets: tuple[tuple[tuple[int, ...], Symbol], ...]

    def __str__(self) -> str:
        parts = []
        mono = _format_poly(self.poly)
        if mono:
            parts.append(mono)
        for k, tau in self.jets:
            parts.append(f"J[{','.join(map(str, k))}]({format_symbol(tau)})")
        return "*".join(parts) if parts else "1"

    __repr__ = __str__


def _mul(a: Symbol, b: Symbol) -> Symbol:
    return Symbol(
        a.xi + b.xi,
        tuple(x + y for x, y in zip(a.poly, b.poly)),
        tuple(sorted(a.children + b.children)),
    )


def _mul_plus(a: PlusSymbol, b: PlusSymbol) -> PlusSymbol:
    return PlusSymbol(tuple(x + y for x, y in zip(a.poly, b.poly)), tuple(sorted(a.jets + b.jets)))


def _format_poly(k: tuple[int, ...]) -> str:
    out = []
    for i, e in enumerate(k):
        if e == 1:
            out.append(f"X{i}")
        elif e > 1:
            out.append(f"X{i}^{e}")
    return "*".join(out)


def format_symbol(s: Symbol) -> str:
    parts = []
    if s.xi:
        parts.append("Xi" if s.xi == 1 else f"Xi^{s.xi}")
    mono = _format_poly(s.poly)
    if mono:
        parts.append(mono)
    # group equal children as powers
    i = 0
    ch = s.children
    while i < len(ch):
        j = i
        while j < len(ch) and ch[j] == ch[i]:
            j += 1
        base = f"I({format_symbol(ch[i])})"
        parts.append(base if j - i == 1 else f"{base}^{j - i}")
        i = j
    return "*".join(parts) if parts else "1"


# parsing ----------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(Xi|X\d+|I\(|\(|\)|\*|\^|\d+|1)")


def parse_symbol(text: str, dim: int = 3) -> Symbol:
    """Parse the ASCII grammar ``Xi``, ``X0..Xd``, ``I(...)``, ``*``, ``^n`` and ``1``."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse symbol near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    unit = Symbol(0, (0,) * (dim + 1), ())
    it = [0]

    def peek():
        return tokens[it[0]] if it[0] < len(tokens) else None

    def take(expected=None):
        t = peek()
        if t is None or (expected is not None and t != expected):
            raise ValueError(f"expected {expected!r}, got {t!r} in {text!r}")
        it[0] += 1
        return t

    def factor() -> Symbol:
        t = take()
        if t == "Xi":
            base = Symbol(1, unit.poly, ())
        elif t == "1":
            base = unit
        elif t.startswith("X"):
            i = int(t[1:])
            if not 0 <= i <= dim:
                raise ValueError(f"monomial index {i} out of range")
            k = [0] * (dim + 1)
            k[i] = 1
            base = Symbol(0, tuple(k), ())
        elif t == "I(":
            inner = prod_expr()
            take(")")
            if inner.is_poly:
                raise ValueError("I applied to a polynomial vanishes")
            base = Symbol(0, unit.poly, (inner,))
        else:
            raise ValueError(f"unexpected token {t!r}")
        if peek() == "^":
            take("^")
            n = int(take())
            out = unit
            for _ in range(n):
                out = _mul(out, base)
            return out
        return base

    def prod_expr() -> Symbol:
        out = factor()
        while peek() == "*":
            take("*")
            out = _mul(out, factor())
        return out

    s = prod_expr()
    if peek() is not None:
        raise ValueError(f"trailing input in {text!r}")
    return s


# the structure ----------------------------------------------------------------


class TensorSum(dict):
    """Formal sum ``{(left, right): coefficient}`` with zero terms removed."""

    def add(self, key, coeff) -> None:
        if coeff == 0:
            return
        v = self.get(key, 0) + coeff
        if v == 0:
            self.pop(key, None)
        else:
            self[key] = v


@dataclass
class GroupElement:
    """Group-like functional on positive symbols, specified on generators.

    ``x`` holds the values on ``X_0 .. X_d``; ``jet`` returns the value on
    ``J_k(tau)``.  Values extend multiplicatively and ``g(1) = 1``.
    """

    x: tuple
    jet: Callable[[tuple[int, ...], Symbol], object]

    def __call__(self, p: PlusSymbol):
        val = Fraction(1)
        for i, e in enumerate(p.poly):
            if e:
                val = val * self.x[i] ** e
        for k, tau in p.jets:
            val = val * self.jet(k, tau)
        return val


class Structure:
    """Symbol calculus for a given spatial dimension."""

    def __init__(self, dim: int = 3):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self.noise_degree: Degree = (Fraction(-(dim + 2), 2), Fraction(-1))
        self.weights = (2,) + (1,) * dim
        z = (0,) * (dim + 1)
        self.zero_k = z
        self.unit = Symbol(0, z, ())
        self.xi = Symbol(1, z, ())
        self.plus_unit = PlusSymbol(z, ())

    # basic constructors
    def I(self, tau: Symbol) -> Symbol | None:
        """Planted tree ``I(tau)``; ``None`` stands for the zero ``I(X^k)``."""
        if tau.is_poly:
            return None
        return Symbol(0, self.zero_k, (tau,))

    def X(self, k: Iterable[int]) -> Symbol:
        return Symbol(0, tuple(k), ())

    def parse(self, text: str) -> Symbol:
        return parse_symbol(text, self.dim)

    # degrees
    def poly_degree(self, k: tuple[int, ...]) -> int:
        return sum(w * e for w, e in zip(self.weights, k))

    @lru_cache(maxsize=None)
    def degree(self, s: Symbol) -> Degree:
        a = Fraction(self.poly_degree(s.poly)) + s.xi * self.noise_degree[0]
        b = Fraction(s.xi) * self.noise_degree[1]
        for c in s.children:
            da, db = self.degree(c)
            a += da + 2
            b += db
        return (a, b)

    def plus_degree(self, p: PlusSymbol) -> Degree:
        a = Fraction(self.poly_degree(p.poly))
        b = Fraction(0)
        for k, tau in p.jets:
            da, db = self.jet_degree(k, tau)
            a += da
            b += db
        return (a, b)

    def jet_degree(self, k: tuple[int, ...], tau: Symbol) -> Degree:
        da, db = self.degree(tau)
        return (da + 2 - self.poly_degree(k), db)

    def jet_allowed(self, k: tuple[int, ...], tau: Symbol) -> bool:
        return not tau.is_poly and self.jet_degree(k, tau) > (0, 0)

    # generation
    def _multi_indices(self, max_deg: Fraction) -> list[tuple[int, ...]]:
        out = []
        bounds = [int(max_deg // w) if max_deg >= 0 else -1 for w in self.weights]
        for k in iproduct(*[range(b + 1) for b in bounds]):
            if self.poly_degree(k) <= max_deg:
                out.append(tuple(k))
        return out

    def generate(self, cap: Fraction | float | tuple = Fraction(3, 2)) -> list[Symbol]:
        """Symbols of degree ``<= cap`` generated by ``tau -> I(Xi + tau^3) + sum_k X^k``.

        The closure contains ``Xi`` and every product of at most three
        factors drawn from ``U = {X^k} + {I(Xi)} + {I(p)}``, where ``p`` runs
        over such products that are not pure polynomials.  Results are sorted
        by degree, then by printed form.
        """
        cap_deg = cap if isinstance(cap, tuple) else (Fraction(cap), Fraction(0))
        min_u = self.degree(Symbol(0, self.zero_k, (self.xi,)))
        # a factor can only appear if the other two factors are as negative as possible
        u_cap = (cap_deg[0] - 2 * min(min_u[0], 0), cap_deg[1] - 2 * min_u[1] if min_u[0] < 0 else cap_deg[1])
        monos = [k for k in self._multi_indices(u_cap[0]) if (Fraction(self.poly_degree(k)), Fraction(0)) <= u_cap]
        # planted factors I(tau) are stored through tau
        planted = {self.xi}
        while True:
            prods = self._products(planted, monos, (u_cap[0] - 2, u_cap[1]))
            new = {p for p in prods if not p.is_poly} | planted
            if new == planted:
                break
            planted = new
        out = {s for s in self._products(planted, monos, cap_deg)}
        if self.degree(self.xi) <= cap_deg:
            out.add(self.xi)
        return sorted(out, key=lambda s: (self.degree(s), format_symbol(s)))

    def _products(self, planted: set[Symbol], monos: list[tuple[int, ...]], cap: Degree) -> set[Symbol]:
        plist = sorted(planted)
        out = set()
        for k in monos:
            slots = 3 - (1 if any(k) else 0)
            for n in range(slots + 1):
                for combo in _multisets(len(plist), n):
                    s = Symbol(0, k, tuple(sorted(plist[i] for i in combo)))
                    if self.degree(s) <= cap:
                        out.add(s)
        return out

    # coproduct on T
    @lru_cache(maxsize=None)
    def coproduct(self, s: Symbol) -> TensorSum:
        """``Delta tau`` as a tensor sum over ``(symbol, positive symbol)``."""
        res = TensorSum({(self.unit, self.plus_unit): Fraction(1)})
        if s.xi:
            for _ in range(s.xi):
                res = self._tmul(res, TensorSum({(self.xi, self.plus_unit): Fraction(1)}))
        for i, e in enumerate(s.poly):
            for _ in range(e):
                res = self._tmul(res, self._delta_x(i))
        for c in s.children:
            res = self._tmul(res, self._delta_I(c))
        return res

    def _delta_x(self, i: int) -> TensorSum:
        k = [0] * (self.dim + 1)
        k[i] = 1
        k = tuple(k)
        return TensorSum({(Symbol(0, k, ()), self.plus_unit): Fraction(1), (self.unit, PlusSymbol(k, ())): Fraction(1)})

    @lru_cache(maxsize=None)
    def _delta_I(self, tau: Symbol) -> TensorSum:
        out = TensorSum()
        for (t1, t2), c in self.coproduct(tau).items():
            it1 = self.I(t1)
            if it1 is not None:
                out.add((it1, t2), c)
        da, db = self.degree(tau)
        top = da + 2
        for n in self._multi_indices(top):
            if not self.jet_allowed(n, tau):
                continue
            for l in _sub_indices(n):
                m = tuple(a - b for a, b in zip(n, l))
                coef = Fraction(1, _fact(l) * _fact(m))
                out.add((Symbol(0, l, ()), PlusSymbol(m, ((n, tau),))), coef)
        return out

    def _tmul(self, a: TensorSum, b: TensorSum) -> TensorSum:
        out = TensorSum()
        for (l1, r1), c1 in a.items():
            for (l2, r2), c2 in b.items():
                out.add((_mul(l1, l2), _mul_plus(r1, r2)), c1 * c2)
        return out

    # coproduct on the positive side
    @lru_cache(maxsize=None)
    def coproduct_plus(self, p: PlusSymbol) -> TensorSum:
        """Multiplicative ``Delta^+`` on positive symbols.

        ``Delta^+ X_i = X_i (x) 1 + 1 (x) X_i``.  On jets it is obtained from the
        shifted jets ``K_p tau = sum_q X^q / q! J_{p+q} tau``, for which
        ``Delta^+ K_p tau = (K_p (x) Id) Delta tau + sum_l X^l / l! (x) K_{p+l} tau``.
        Every ``J`` must have positive degree.
        """
        res = TensorSum({(self.plus_unit, self.plus_unit): Fraction(1)})
        for i, e in enumerate(p.poly):
            k = [0] * (self.dim + 1)
            k[i] = 1
            xk = PlusSymbol(tuple(k), ())
            gen = TensorSum({(xk, self.plus_unit): Fraction(1), (self.plus_unit, xk): Fraction(1)})
            for _ in range(e):
                res = self._pmul(res, gen)
        for k, tau in p.jets:
            res = self._pmul(res, self._delta_plus_jet(k, tau))
        return res

    def _shifted_jet(self, p: tuple[int, ...], tau: Symbol) -> dict[PlusSymbol, Fraction]:
        """``K_p tau = sum_q X^q / q! J_{p+q} tau`` as a combination of positive symbols."""
        out: dict = {}
        if not self.jet_allowed(p, tau):
            return out
        da, _ = self.jet_degree(p, tau)
        for q in self._multi_indices(da):
            pq = tuple(a + b for a, b in zip(p, q))
            if self.jet_allowed(pq, tau):
                out[PlusSymbol(q, ((pq, tau),))] = Fraction(1, _fact(q))
        return out

    @lru_cache(maxsize=None)
    def _delta_plus_shifted(self, p: tuple[int, ...], tau: Symbol) -> TensorSum:
        """``Delta^+ K_p tau = (K_p (x) Id) Delta tau + sum_l X^l / l! (x) K_{p+l} tau``."""
        out = TensorSum()
        for (t1, t2), c in self.coproduct(tau).items():
            for a, ca in self._shifted_jet(p, t1).items():
                out.add((a, t2), c * ca)
        da, _ = self.jet_degree(p, tau)
        for l in self._multi_indices(da):
            pl = tuple(a + b for a, b in zip(p, l))
            for b, cb in self._shifted_jet(pl, tau).items():
                out.add((PlusSymbol(l, ()), b), cb * Fraction(1, _fact(l)))
        return out

    @lru_cache(maxsize=None)
    def _delta_plus_jet(self, k: tuple[int, ...], tau: Symbol) -> TensorSum:
        # J_k = sum_m (-X)^m / m! K_{k+m}, and Delta^+ is multiplicative
        out = TensorSum()
        da, _ = self.jet_degree(k, tau)
        for m in self._multi_indices(da):
            km = tuple(a + b for a, b in zip(k, m))
            if not self.jet_allowed(km, tau):
                continue
            sign = Fraction((-1) ** sum(m), _fact(m))
            term = self._pmul(self.coproduct_plus(PlusSymbol(m, ())), self._delta_plus_shifted(km, tau))
            for key, c in term.items():
                out.add(key, sign * c)
        return out

    def _pmul(self, a: TensorSum, b: TensorSum) -> TensorSum:
        out = TensorSum()
        for (l1, r1), c1 in a.items():
            for (l2, r2), c2 in b.items():
                out.add((_mul_plus(l1, l2), _mul_plus(r1, r2)), c1 * c2)
        return out

    def coassociativity_defect(self, s: Symbol) -> dict:
        """Terms of ``(Delta (x) Id) Delta s - (Id (x) Delta^+) Delta s``; empty when coassociative."""
        lhs: dict = {}
        rhs: dict = {}
        for (t1, t2), c in self.coproduct(s).items():
            for (u1, u2), d in self.coproduct(t1).items():
                key = (u1, u2, t2)
                lhs[key] = lhs.get(key, 0) + c * d
            for (v1, v2), d in self.coproduct_plus(t2).items():
                key = (t1, v1, v2)
                rhs[key] = rhs.get(key, 0) + c * d
        diff = {}
        for key in set(lhs) | set(rhs):
            v = lhs.get(key, 0) - rhs.get(key, 0)
            if v != 0:
                diff[key] = v
        return diff

    # structure group
    def gamma_action(self, g: GroupElement, s: Symbol) -> dict[Symbol, object]:
        """``Gamma_g s = (Id (x) g) Delta s`` as ``{symbol: coefficient}``."""
        out: dict = {}
        for (t1, t2), c in self.coproduct(s).items():
            v = c * g(t2)
            if v != 0:
                out[t1] = out.get(t1, 0) + v
        return {k: v for k, v in out.items() if v != 0}

    def apply_gamma(self, g: GroupElement, vec: dict[Symbol, object]) -> dict[Symbol, object]:
        out: dict = {}
        for s, c in vec.items():
            for t, v in self.gamma_action(g, s).items():
                out[t] = out.get(t, 0) + c * v
        return {k: v for k, v in out.items() if v != 0}

    def convolve(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """``(g * h)(sigma) = (g (x) h) Delta^+ sigma``, so that ``Gamma_g Gamma_h = Gamma_{g*h}``."""

        def on_plus(p: PlusSymbol):
            return sum((c * g(a) * h(b) for (a, b), c in self.coproduct_plus(p).items()), Fraction(0))

        xs = []
        for i in range(self.dim + 1):
            k = [0] * (self.dim + 1)
            k[i] = 1
            xs.append(on_plus(PlusSymbol(tuple(k), ())))
        return GroupElement(tuple(xs), lambda k, tau: on_plus(PlusSymbol(self.zero_k, ((k, tau),))))

    def jet_indices(self, symbols: Iterable[Symbol]) -> set[tuple[int, ...]]:
        """All ``k`` with ``J_k`` appearing in the coproducts of ``symbols``."""
        out = set()
        for s in symbols:
            for (_, p) in self.coproduct(s):
                for k, _tau in p.jets:
                    out.add(k)
        return out

    # renormalisation
    def _pairs_removed(self, s: Symbol) -> tuple[int, Symbol | None]:
        """Number of ways to remove two ``I(Xi)`` children at the root, and the result."""
        ixi = self.xi
        n = sum(1 for c in s.children if c == ixi)
        if n < 2:
            return 0, None
        ch = list(s.children)
        ch.remove(ixi)
        ch.remove(ixi)
        return n * (n - 1) // 2, Symbol(s.xi, s.poly, tuple(ch))

    def _local_L1(self, s: Symbol) -> dict[Symbol, int]:
        ways, rest = self._pairs_removed(s)
        return {rest: ways} if ways else {}

    def _local_L2(self, s: Symbol) -> dict[Symbol, int]:
        ways, rest = self._pairs_removed(s)
        if not ways:
            return {}
        out: dict = {}
        for j, c in enumerate(rest.children):
            inner_ways, inner_rest = self._pairs_removed(c)
            if not inner_ways:
                continue
            others = rest.children[:j] + rest.children[j + 1 :]
            merged = _mul(Symbol(rest.xi, rest.poly, tuple(sorted(others))), inner_rest)
            out[merged] = out.get(merged, 0) + ways * inner_ways
        return out

    def _everywhere(self, s: Symbol, local) -> dict[Symbol, int]:
        """Apply a local substitution at every node of ``s``, summing over positions."""
        out = dict(local(s))
        for j, c in enumerate(s.children):
            for c_new, mult in self._everywhere(c, local).items():
                planted = self.I(c_new)
                if planted is None:
                    continue
                rest = s.children[:j] + s.children[j + 1 :]
                new = Symbol(s.xi, s.poly, tuple(sorted(rest + planted.children)))
                out[new] = out.get(new, 0) + mult
        return {k: v for k, v in out.items() if v}

    def L1(self, s: Symbol) -> dict[Symbol, int]:
        """Extract ``I(Xi)^2`` in every possible way."""
        return self._everywhere(s, self._local_L1)

    def L2(self, s: Symbol) -> dict[Symbol, int]:
        """Extract ``I(I(Xi)^2) I(Xi)^2`` in every possible way, contracting the inner edge."""
        return self._everywhere(s, self._local_L2)

    def renormalize(self, s: Symbol) -> dict[Symbol, dict[tuple[int, int], Fraction]]:
        """``M s = exp(-c1 L1 - c2 L2) s``.

        Coefficients are polynomials in ``c1, c2`` stored as
        ``{(i, j): coefficient of c1^i c2^j}``.
        """
        total: dict = {s: {(0, 0): Fraction(1)}}
        current: dict = {s: {(0, 0): Fraction(1)}}
        n = 0
        while current:
            n += 1
            nxt: dict = {}
            for t, poly in current.items():
                for op, shift in ((self.L1, (1, 0)), (self.L2, (0, 1))):
                    for u, mult in op(t).items():
                        dst = nxt.setdefault(u, {})
                        for (i, j), c in poly.items():
                            key = (i + shift[0], j + shift[1])
                            dst[key] = dst.get(key, 0) + c * mult
            current = {k: {m: c for m, c in v.items() if c} for k, v in nxt.items()}
            current = {k: v for k, v in current.items() if v}
            factor = Fraction((-1) ** n, math.factorial(n))
            for u, poly in current.items():
                dst = total.setdefault(u, {})
                for m, c in poly.items():
                    dst[m] = dst.get(m, 0) + factor * c
        return {k: {m: c for m, c in v.items() if c} for k, v in total.items() if any(v.values())}


def _multisets(n: int, r: int):
    """Nondecreasing index tuples of length ``r`` from ``range(n)``."""
    if r == 0:
        yield ()
        return

    def rec(start, left):
        if left == 0:
            yield ()
            return
        for i in range(start, n):
            for rest in rec(i, left - 1):
                yield (i,) + rest

    yield from rec(0, r)


def _sub_indices(n: tuple[int, ...]):
    return iproduct(*[range(e + 1) for e in n])


def _fact(k: tuple[int, ...]) -> int:
    out = 1
    for e in k:
        out *= math.factorial(e)
    return out


AC3 = Structure(3)
AC2 = Structure(2)


# reference data -------------------------------------------------------------------
# degree column as (a, b) meaning a + b kappa; X_i stands for the three spatial monomials

REFERENCE_SYMBOLS: list[tuple[str, tuple[Fraction, Fraction]]] = [
    ("Xi", (Fraction(-5, 2), Fraction(-1))),
    ("I(Xi)^3", (Fraction(-3, 2), Fraction(-3))),
    ("I(Xi)^2", (Fraction(-1), Fraction(-2))),
    ("I(I(Xi)^3)*I(Xi)^2", (Fraction(-1, 2), Fraction(-5))),
    ("I(Xi)", (Fraction(-1, 2), Fraction(-1))),
    ("I(I(Xi)^3)*I(Xi)", (Fraction(0), Fraction(-4))),
    ("I(I(Xi)^2)*I(Xi)^2", (Fraction(0), Fraction(-4))),
    ("I(Xi)^2*X_i", (Fraction(0), Fraction(-2))),
    ("1", (Fraction(0), Fraction(0))),
    ("I(I(Xi)^3)", (Fraction(1, 2), Fraction(-3))),
    ("I(I(Xi)^2)*I(Xi)", (Fraction(1, 2), Fraction(-3))),
    ("I(I(Xi))*I(Xi)^2", (Fraction(1, 2), Fraction(-3))),
    ("I(I(Xi)^2)", (Fraction(1), Fraction(-2))),
    ("I(I(Xi))*I(Xi)", (Fraction(1), Fraction(-2))),
    ("X_i", (Fraction(1), Fraction(0))),
    ("I(I(Xi))", (Fraction(3, 2), Fraction(-1))),
]

# coproducts with "i" summed over spatial directions 1..3; entries are
# (coefficient, left, right) with right written as (poly, [(jet index, tau)]).
# The row for I(I(Xi)^2)*I(Xi) carries I(Xi) as left factor of its J_0 term.
REFERENCE_COPRODUCTS: dict[str, list[tuple[str, str]]] = {
    "I(I(Xi)^3)*I(Xi)^2": [("I(I(Xi)^3)*I(Xi)^2", "1"), ("I(Xi)^2", "J0(I(Xi)^3)")],
    "I(I(Xi)^3)*I(Xi)": [("I(I(Xi)^3)*I(Xi)", "1"), ("I(Xi)", "J0(I(Xi)^3)")],
    "I(I(Xi)^2)*I(Xi)^2": [("I(I(Xi)^2)*I(Xi)^2", "1"), ("I(Xi)^2", "J0(I(Xi)^2)")],
    "I(Xi)^2*X_i": [("I(Xi)^2*X_i", "1"), ("I(Xi)^2", "X_i")],
    "I(I(Xi)^3)": [("I(I(Xi)^3)", "1"), ("1", "J0(I(Xi)^3)")],
    "I(I(Xi)^2)*I(Xi)": [("I(I(Xi)^2)*I(Xi)", "1"), ("I(Xi)", "J0(I(Xi)^2)")],
    "I(I(Xi))*I(Xi)^2": [
        ("I(I(Xi))*I(Xi)^2", "1"),
        ("I(Xi)^2", "J0(I(Xi))"),
        ("I(Xi)^2*X_i", "J_i(I(Xi))"),
        ("I(Xi)^2", "X_i*J_i(I(Xi))"),
    ],
    "I(I(Xi)^2)": [("I(I(Xi)^2)", "1"), ("1", "J0(I(Xi)^2)")],
    "I(I(Xi))*I(Xi)": [
        ("I(I(Xi))*I(Xi)", "1"),
        ("I(Xi)", "J0(I(Xi))"),
        ("I(Xi)*X_i", "J_i(I(Xi))"),
        ("I(Xi)", "X_i*J_i(I(Xi))"),
    ],
    "X_i": [("X_i", "1"), ("1", "X_i")],
    "I(I(Xi))": [
        ("I(I(Xi))", "1"),
        ("1", "J0(I(Xi))"),
        ("X_i", "J_i(I(Xi))"),
        ("1", "X_i*J_i(I(Xi))"),
    ],
}

# renormalised images: symbol -> [(coefficient, c1 power, c2 power, symbol)]
MAC_LINES: dict[str, list[tuple[int, int, int, str]]] = {
    "I(Xi)": [(1, 0, 0, "I(Xi)")],
    "I(Xi)^2": [(1, 0, 0, "I(Xi)^2"), (-1, 1, 0, "1")],
    "I(Xi)^3": [(1, 0, 0, "I(Xi)^3"), (-3, 1, 0, "I(Xi)")],
    "I(I(Xi)^2)*I(Xi)^2": [(1, 0, 0, "I(I(Xi)^2)*I(Xi)^2"), (-1, 1, 0, "I(I(Xi)^2)"), (-1, 0, 1, "1")],
    "I(I(Xi)^3)*I(Xi)^2": [
        (1, 0, 0, "I(I(Xi)^3)*I(Xi)^2"),
        (-3, 1, 0, "I(I(Xi))*I(Xi)^2"),
        (-1, 1, 0, "I(I(Xi)^3)"),
        (3, 2, 0, "I(I(Xi))"),
        (-3, 0, 1, "I(Xi)"),
    ],
    "I(I(Xi)^3)*I(Xi)": [(1, 0, 0, "I(I(Xi)^3)*I(Xi)"), (-3, 1, 0, "I(I(Xi))*I(Xi)")],
}


def expand_axes(template: str, dim: int = 3) -> list[str]:
    """Replace the placeholder ``X_i`` / ``J_i`` by each spatial direction."""
    if "_i" not in template:
        return [template]
    return [template.replace("X_i", f"X{i}").replace("J_i", f"J{i}") for i in range(1, dim + 1)]


def reference_symbols(structure: Structure = AC3) -> list[tuple[str, Symbol, Degree]]:
    """Reference rows with placeholders expanded per axis: ``(row, symbol, degree)``."""
    out = []
    for row, deg in REFERENCE_SYMBOLS:
        for text in expand_axes(row, structure.dim):
            out.append((row, structure.parse(text), deg))
    return out


def jet_index_report(structure: Structure, symbols: Iterable[Symbol]) -> dict[Symbol, list[tuple[int, ...]]]:
    """Symbols whose coproduct emits ``J_k`` beyond ``k = 0`` and first-order spatial ``k``."""
    out = {}
    for s in symbols:
        hi = sorted(k for k in structure.jet_indices([s]) if k[0] > 0 or sum(k) > 1)
        if hi:
            out[s] = hi
    return out


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "*" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_plus(text: str, structure: Structure = AC3) -> PlusSymbol:
    """Parse positive symbols such as ``X1*J1(I(Xi))``; ``J0`` has zero index, ``Ji`` the unit vector ``e_i``."""
    dim = structure.dim
    poly = [0] * (dim + 1)
    jets = []
    for part in _split_top(text.strip()):
        if part == "1":
            continue
        m = re.fullmatch(r"J(\d)\((.*)\)", part)
        if m:
            i = int(m.group(1))
            k = [0] * (dim + 1)
            if i > 0:
                k[i] = 1
            tau = structure.parse(m.group(2))
            if not structure.jet_allowed(tuple(k), tau):
                raise ValueError(f"J{i}({m.group(2)}) has non-positive degree")
            jets.append((tuple(k), tau))
            continue
        m = re.fullmatch(r"X(\d)(?:\^(\d+))?", part)
        if not m:
            raise ValueError(f"cannot parse positive factor {part!r}")
        poly[int(m.group(1))] += int(m.group(2) or 1)
    return PlusSymbol(tuple(poly), tuple(sorted(jets)))


def reference_coproduct(row: str, structure: Structure = AC3) -> list[tuple[Symbol, TensorSum]]:
    """Reference coproducts of one row as ``[(symbol, tensor sum)]``.

    Rows whose symbol contains ``X_i`` stand for one entry per axis; in the
    other rows a repeated ``i`` in the terms is summed over the axes.
    """
    dim = structure.dim
    terms = REFERENCE_COPRODUCTS[row]
    out = []
    axes = range(1, dim + 1) if "_i" in row else [None]
    for ax in axes:
        exp = TensorSum()
        for left, right in terms:
            if ax is not None:
                pairs = [(left.replace("X_i", f"X{ax}"), right.replace("X_i", f"X{ax}").replace("J_i", f"J{ax}"))]
            elif "_i" in left or "_i" in right:
                pairs = [
                    (left.replace("X_i", f"X{i}"), right.replace("X_i", f"X{i}").replace("J_i", f"J{i}"))
                    for i in range(1, dim + 1)
                ]
            else:
                pairs = [(left, right)]
            for a, b in pairs:
                exp.add((structure.parse(a), parse_plus(b, structure)), Fraction(1))
        subject = row if ax is None else row.replace("X_i", f"X{ax}")
        out.append((structure.parse(subject), exp))
    return out


def mac_expected(row: str, structure: Structure = AC3) -> dict[Symbol, dict[tuple[int, int], Fraction]]:
    """Reference renormalised image of one line, in the format of :meth:`Structure.renormalize`."""
    out: dict = {}
    for coef, i, j, text in MAC_LINES[row]:
        out.setdefault(structure.parse(text), {})[(i, j)] = Fraction(coef)
    return out
