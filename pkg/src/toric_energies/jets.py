"""Truncated multivariate Taylor arithmetic, vectorised over a batch of points.

A ``Jet`` holds the Taylor coefficients c_alpha of a function around a base
point, for every multi-index with |alpha| <= order.  Coefficients are numpy
arrays over a batch axis, so a single jet evaluates a whole quadrature grid.
The partial derivative D^alpha f equals alpha! * c_alpha.

Arithmetic is carried out in ``np.longdouble``: near the edges of a moment
polytope the metric matrix is badly conditioned and double precision loses
the small eigenvalue.
"""

from __future__ import annotations

import functools
import itertools
from math import factorial, prod
from typing import Sequence

import numpy as np

DTYPE = np.longdouble


@functools.lru_cache(maxsize=None)
def multi_indices(n: int, order: int) -> tuple:
    """All multi-indices of length n with total degree <= order, graded."""
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for c in combo:
                alpha[c] += 1
            out.append(tuple(alpha))
    # within a degree, sort descending so that x0 comes first
    graded = []
    for deg in range(order + 1):
        graded.extend(sorted((a for a in out if sum(a) == deg), reverse=True))
    return tuple(graded)


@functools.lru_cache(maxsize=None)
def _index_of(n: int, order: int) -> dict:
    return {a: i for i, a in enumerate(multi_indices(n, order))}


@functools.lru_cache(maxsize=None)
def _product_table(n: int, order: int) -> tuple:
    """(i, j, k) triples with alpha_i + alpha_j = alpha_k, grouped by k."""
    idx = multi_indices(n, order)
    where = _index_of(n, order)
    table = []
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            c = tuple(p + q for p, q in zip(a, b))
            k = where.get(c)
            if k is not None:
                table.append((i, j, k))
    return tuple(table)


@functools.lru_cache(maxsize=None)
def _derivative_table(n: int, order: int, var: int) -> tuple:
    """(target index in order-1 set, source index, factor) for d/dx_var."""
    low = multi_indices(n, order - 1)
    where = _index_of(n, order)
    rows = []
    for t, a in enumerate(low):
        src = list(a)
        src[var] += 1
        rows.append((t, where[tuple(src)], src[var]))
    return tuple(rows)


class Jet:
    __slots__ = ("n", "order", "c")

    def __init__(self, n: int, order: int, coeffs):
        self.n = n
        self.order = order
        self.c = coeffs  # ndarray shape (ncoef, *batch)

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, n: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=DTYPE)
        c = np.zeros((len(multi_indices(n, order)),) + value.shape, dtype=DTYPE)
        c[0] = value
        return cls(n, order, c)

    @classmethod
    def variables(cls, x, order: int) -> list["Jet"]:
        """Jets of the coordinate functions around the points ``x`` (shape (P, n))."""
        x = np.asarray(x, dtype=DTYPE)
        n = x.shape[-1]
        out = []
        for i in range(n):
            jet = cls.constant(x[..., i], n, order)
            if order >= 1:
                jet.c[1 + i] = 1
            out.append(jet)
        return out

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        return self.c[_index_of(self.n, self.order)[tuple(alpha)]]

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """D^alpha of the underlying function at the base points."""
        return self.coefficient(alpha) * prod(factorial(a) for a in alpha)

    def gradient(self) -> np.ndarray:
        """Shape (*batch, n)."""
        return np.moveaxis(self.c[1:1 + self.n], 0, -1)

    def hessian(self) -> np.ndarray:
        """Shape (*batch, n, n)."""
        n = self.n
        out = np.empty(self.c.shape[1:] + (n, n), dtype=DTYPE)
        for i in range(n):
            for j in range(i, n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                out[..., i, j] = out[..., j, i] = self.partial(alpha)
        return out

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        return Jet(self.n, order, self.c[:len(multi_indices(self.n, order))])

    def derivative(self, var: int) -> "Jet":
        """Jet of d/dx_var; one order lower."""
        if self.order == 0:
            raise ValueError("derivative of an order-0 jet is undetermined")
        rows = _derivative_table(self.n, self.order, var)
        c = np.empty((len(rows),) + self.c.shape[1:], dtype=DTYPE)
        for t, s, f in rows:
            c[t] = f * self.c[s]
        return Jet(self.n, self.order - 1, c)

    # -- arithmetic ---------------------------------------------------------
    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if self.order == other.order:
            return self, other
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.n, a.order, a.c + b.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet(self.n, self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, self.order, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            out = np.zeros_like(a.c)
            for i, j, k in _product_table(a.n, a.order):
                out[k] += a.c[i] * b.c[j]
            return Jet(a.n, a.order, out)
        return Jet(self.n, self.order, self.c * np.asarray(other, dtype=DTYPE))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.n, self.order, self.c / np.asarray(other, dtype=DTYPE))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, e: int):
        if not isinstance(e, (int, np.integer)) or e < 0:
            raise ValueError("jets support nonnegative integer powers only")
        result = Jet.constant(np.ones(self.c.shape[1:]), self.n, self.order)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # -- univariate composition ----------------------------------------------
    def compose(self, derivs: Sequence[np.ndarray]) -> "Jet":
        """f(self) given [f(a0), f'(a0), ..., f^(order)(a0)] at a0 = self.value."""
        h = Jet(self.n, self.order, self.c.copy())
        h.c[0] = 0
        out = Jet.constant(derivs[0], self.n, self.order)
        power = None
        for m in range(1, self.order + 1):
            power = h if power is None else power * h
            out = out + power * (derivs[m] / factorial(m))
        return out

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        a = self.value
        if np.any(a <= 0):
            raise FloatingPointError("log of a jet with nonpositive value")
        derivs = [np.log(a)]
        for m in range(1, self.order + 1):
            derivs.append((-1) ** (m - 1) * factorial(m - 1) / a ** m)
        return self.compose(derivs)

    def log1p(self) -> "Jet":
        a = self.value
        derivs = [np.log1p(a)]
        for m in range(1, self.order + 1):
            derivs.append((-1) ** (m - 1) * factorial(m - 1) / (1 + a) ** m)
        return self.compose(derivs)

    def reciprocal(self) -> "Jet":
        a = self.value
        derivs = [(-1) ** m * factorial(m) / a ** (m + 1) for m in range(self.order + 1)]
        return self.compose(derivs)


def jet_det(rows: list[list[Jet]]) -> Jet:
    """Leibniz expansion of the determinant of a matrix of jets."""
    n = len(rows)
    total = None
    for perm in itertools.permutations(range(n)):
        term = rows[0][perm[0]]
        for i in range(1, n):
            term = term * rows[i][perm[i]]
        if _parity(perm):
            term = -term
        total = term if total is None else total + term
    return total


def _parity(perm) -> int:
    perm = list(perm)
    odd = 0
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            odd ^= 1
    return odd


def hessian_jets(phi: Jet) -> list[list[Jet]]:
    """Matrix of second-derivative jets, two orders below ``phi``."""
    first = [phi.derivative(i) for i in range(phi.n)]
    return [[first[i].derivative(j) for j in range(phi.n)] for i in range(phi.n)]
