"""Torus-invariant Kähler geometry in logarithmic coordinates.

Conventions (fixed once, checked by the calibration tests):

* x_j = log|z_j|^2 on the open torus, angles theta_j in [0, 2 pi).
* A torus-invariant potential Phi(x) gives the Kähler form
  omega = sum_jk Phi_jk dx_j ^ dtheta_k, so the coefficient matrix of
  sqrt(-1) d dbar f is simply the Hessian D^2 f.  The moment map is grad Phi.
* The Ricci form has matrix -D^2 log det D^2 Phi.
* A wedge product of (1,1)-forms with matrices A_1..A_n has density
  n! * mixed_discriminant(A_1, ..., A_n) with respect to dx dtheta.
* On this scale the class 2 pi c_1 corresponds to a moment polytope
  {<a_i, mu> + b_i >= 0} with every facet at lattice distance one from a
  common centre tau, and the symplectic potential is sum_i l_i log l_i.
"""

from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Delaunay

from .errors import ConfigError, NumericalFailure
from .jets import DTYPE, Jet, hessian_jets, jet_det

JET_ORDER = 4
ROUNDTRIP_TOL = 1e-10


# -- small dense linear algebra in extended precision ---------------------------

def det_small(a: np.ndarray) -> np.ndarray:
    """Leibniz determinant of a batch of small matrices, shape (..., n, n)."""
    n = a.shape[-1]
    total = np.zeros(a.shape[:-2], dtype=a.dtype)
    for perm in itertools.permutations(range(n)):
        term = np.ones(a.shape[:-2], dtype=a.dtype)
        for i, j in enumerate(perm):
            term = term * a[..., i, j]
        total = total - term if _odd(perm) else total + term
    return total


def _odd(perm) -> bool:
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2)
                     if perm[i] > perm[j])
    return bool(inversions % 2)


def spd_solve(h: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve h @ s = r for a batch of SPD matrices by unpivoted elimination."""
    h = np.array(h, dtype=DTYPE, copy=True)
    s = np.array(r, dtype=DTYPE, copy=True)
    n = h.shape[-1]
    for k in range(n):
        for i in range(k + 1, n):
            f = h[..., i, k] / h[..., k, k]
            h[..., i, k:] -= f[..., None] * h[..., k, k:]
            s[..., i] -= f * s[..., k]
    for k in range(n - 1, -1, -1):
        acc = s[..., k]
        for j in range(k + 1, n):
            acc = acc - h[..., k, j] * s[..., j]
        s[..., k] = acc / h[..., k, k]
    return s


def spd_inverse(h: np.ndarray) -> np.ndarray:
    n = h.shape[-1]
    cols = [spd_solve(h, np.broadcast_to(np.eye(n, dtype=DTYPE)[j], h.shape[:-1]))
            for j in range(n)]
    return np.stack(cols, axis=-1)


def leading_minors(a: np.ndarray) -> np.ndarray:
    """Leading principal minors, shape (..., n)."""
    n = a.shape[-1]
    return np.stack([det_small(a[..., :k, :k]) for k in range(1, n + 1)], axis=-1)


# -- polytopes ------------------------------------------------------------------

@dataclass(frozen=True)
class Polytope:
    """Delzant polytope {mu : <a_i, mu> + b_i >= 0}."""

    normals: tuple
    offsets: tuple
    vertices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        normals = tuple(tuple(int(c) for c in a) for a in self.normals)
        if any(any(float(c) != float(o) for c, o in zip(a, orig))
               for a, orig in zip(normals, self.normals)):
            raise ConfigError("polytope normals must be integer vectors")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", tuple(float(b) for b in self.offsets))
        if len(normals) != len(self.offsets):
            raise ConfigError("polytope: one offset per normal required")
        n = len(normals[0])
        if any(len(a) != n for a in normals):
            raise ConfigError("polytope normals must share one dimension")
        object.__setattr__(self, "vertices", self._validate())

    @property
    def n(self) -> int:
        return len(self.normals[0])

    @property
    def A(self) -> np.ndarray:
        return np.array(self.normals, dtype=float)

    @property
    def b(self) -> np.ndarray:
        return np.array(self.offsets, dtype=float)

    def _validate(self) -> np.ndarray:
        A, b, n = self.A, self.b, self.n
        m = len(b)
        norms = np.linalg.norm(A, axis=1)
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.c_[-A, norms], b_ub=b,
                      bounds=[(None, None)] * (n + 1), method="highs")
        if res.status == 3:
            raise ConfigError("polytope is unbounded")
        if res.status != 0 or res.x[-1] <= 1e-9:
            raise ConfigError("polytope has empty interior")
        for j in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[j] = -sign
                r = linprog(c, A_ub=-A, b_ub=b, bounds=[(None, None)] * n, method="highs")
                if r.status == 3:
                    raise ConfigError("polytope is unbounded")
        verts = []
        for facets in itertools.combinations(range(m), n):
            sub = A[list(facets)]
            if abs(np.linalg.det(sub)) < 0.5:
                continue
            v = np.linalg.solve(sub, -b[list(facets)])
            if np.all(A @ v + b >= -1e-9) and not any(np.allclose(v, w, atol=1e-9) for w in verts):
                verts.append(v)
        if len(verts) < n + 1:
            raise ConfigError("polytope has too few vertices")
        for v in verts:
            active = np.flatnonzero(np.abs(A @ v + b) < 1e-9)
            if len(active) != n:
                raise ConfigError(f"Delzant condition fails: {len(active)} facets meet at vertex {v.tolist()}")
            d = round(np.linalg.det(A[active]))
            if abs(d) != 1:
                raise ConfigError(f"Delzant condition fails: normals at vertex {v.tolist()} have det {d}")
        return np.array(verts)

    def volume_and_barycenter(self) -> tuple[float, np.ndarray]:
        if self.n == 1:
            lo, hi = float(self.vertices.min()), float(self.vertices.max())
            return hi - lo, np.array([(lo + hi) / 2])
        tri = Delaunay(self.vertices)
        vol = 0.0
        moment = np.zeros(self.n)
        for simplex in tri.simplices:
            pts = self.vertices[simplex]
            v = abs(np.linalg.det(pts[1:] - pts[0])) / factorial(self.n)
            vol += v
            moment += v * pts.mean(axis=0)
        return vol, moment / vol

    def canonical_centre(self) -> Optional[np.ndarray]:
        """tau with <a_i, tau> + b_i = 1 for every facet, if it exists."""
        tau, *_ = np.linalg.lstsq(self.A, 1.0 - self.b, rcond=None)
        if np.max(np.abs(self.A @ tau + self.b - 1.0)) > 1e-9:
            return None
        return tau

    @classmethod
    def simplex(cls, n: int) -> "Polytope":
        """Moment polytope of the Fubini-Study potential (n+1) log(1 + sum e^x)."""
        normals = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        normals.append(tuple([-1] * n))
        return cls(tuple(normals), tuple([0.0] * n + [float(n + 1)]))

    @classmethod
    def blowup_cp2(cls) -> "Polytope":
        """Canonical polytope of CP^2 blown up at one torus-fixed point."""
        return cls(((1, 0), (0, 1), (-1, -1), (1, 1)), (1.0, 1.0, 1.0, 1.0))


# -- potentials -----------------------------------------------------------------

class Potential:
    """A torus-invariant Kähler potential Phi(x) on R^n."""

    n: int
    polytope: Polytope

    def jet(self, x: np.ndarray, order: int = JET_ORDER) -> Jet:
        raise NotImplementedError

    def moment_jets(self, x: np.ndarray, order: int = JET_ORDER) -> list[Jet]:
        """Jets of the moment map grad Phi around the points x."""
        phi = self.jet(x, order + 1)
        return [phi.derivative(i) for i in range(self.n)]

    @property
    def reference(self) -> "Potential":
        """The unperturbed toric potential this one is built on."""
        return self


class FubiniStudy(Potential):
    """Phi = (n+1) log(1 + sum_i e^{x_i}); Kähler-Einstein in the class 2 pi c_1."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError("dimension must be >= 1")
        self.n = n
        self.polytope = Polytope.simplex(n)

    def __repr__(self):
        return f"FubiniStudy({self.n})"

    def _shifted_exps(self, x, order):
        X = Jet.variables(x, order)
        # shift by max(0, x_i) so that every exponential is <= 1 at the base point
        top = np.maximum(0, np.max(np.asarray(x, dtype=DTYPE), axis=-1))
        exps = [(Xi - top).exp() for Xi in X]
        total = sum(exps[1:], exps[0]) + np.exp(-top)
        return top, exps, total

    def jet(self, x, order=JET_ORDER):
        top, _, total = self._shifted_exps(x, order)
        return (total.log() + top) * (self.n + 1)

    def moment_jets(self, x, order=JET_ORDER):
        _, exps, total = self._shifted_exps(x, order)
        inv = total.reciprocal()
        return [e * inv * (self.n + 1) for e in exps]


class Guillemin(Potential):
    """Legendre dual of the symplectic potential g = sum_i l_i log l_i.

    Near a vertex the relevant lengths l_i are as small as e^{-|x|}, far below
    the rounding level of the moment coordinates.  The Newton solve therefore
    finishes in a vertex chart whose unknowns are the lengths of the facets
    through that vertex, so small lengths keep full relative precision.
    """

    def __init__(self, polytope: Polytope, tol: float = 1e-12, max_iter: int = 100):
        self.polytope = polytope
        self.n = polytope.n
        self.tol = tol
        self.max_iter = max_iter
        self._A = np.array(polytope.normals, dtype=DTYPE)
        self._b = np.array(polytope.offsets, dtype=DTYPE)
        self._start = np.asarray(polytope.volume_and_barycenter()[1], dtype=DTYPE)
        self._build_charts()
        self._cache: dict = {}

    def __repr__(self):
        return f"Guillemin({self.polytope.normals}, {self.polytope.offsets})"

    def _build_charts(self):
        A = np.array(self.polytope.normals, dtype=np.int64)
        acts, inverses, Bs, cs, verts = [], [], [], [], []
        for v in self.polytope.vertices:
            act = np.flatnonzero(np.abs(A @ v + self.polytope.b) < 1e-9)
            inv = np.rint(np.linalg.inv(A[act])).astype(np.int64)
            vert = -(inv.astype(DTYPE) @ self._b[act])
            c = self._A @ vert + self._b
            c[act] = 0
            acts.append(act)
            inverses.append(inv)
            Bs.append(A @ inv)
            cs.append(c)
            verts.append(vert)
        self._act = np.array(acts)
        self._Ainv = np.array(inverses, dtype=DTYPE)
        self._B = np.array(Bs, dtype=DTYPE)
        self._c = np.array(cs)
        self._vert = np.array(verts)

    def _lengths(self, mu):
        return mu @ self._A.T + self._b

    def grad_g(self, mu):
        return (np.log(self._lengths(mu)) + 1) @ self._A

    def hess_g(self, mu):
        return self._hess_from_lengths(self._lengths(mu))

    def _hess_from_lengths(self, ell):
        return np.einsum("pi,ij,ik->pjk", 1 / ell, self._A, self._A)

    def _newton(self, ell_of, update, x, state, tol, use_stall, floor=0.0):
        """Damped Newton on grad g = x; ``state`` holds the unknowns in either chart.

        Points whose smallest length drops below ``floor`` are left alone, since
        the moment coordinates can no longer resolve them.
        """
        stalled = np.zeros(len(x), dtype=bool)
        for _ in range(self.max_iter):
            ell = ell_of(state, slice(None))
            err = np.max(np.abs((np.log(ell) + 1) @ self._A - x), axis=-1)
            active = err > tol
            if floor > 0:
                active &= np.min(ell, axis=-1) > floor
            if use_stall:
                active &= ~(stalled & (err <= ROUNDTRIP_TOL))
            if not np.any(active):
                return state, err
            ell = ell[active]
            r = (np.log(ell) + 1) @ self._A - x[active]
            step = -spd_solve(self._hess_from_lengths(ell), r)
            dell = step @ self._A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(dell < 0, -ell / dell, np.inf)
            alpha = np.minimum(1.0, 0.95 * np.min(ratio, axis=-1))
            # backtrack only while the residual grows; the objective is too flat
            # near the boundary to serve as a merit function
            for _ in range(30):
                trial = ell + alpha[:, None] * dell
                worse = np.max(np.abs((np.log(trial) + 1) @ self._A - x[active]), axis=-1) \
                    > err[active]
                worse &= alpha > 1e-6
                if not np.any(worse):
                    break
                alpha = np.where(worse, alpha / 2, alpha)
            update(state, active, alpha[:, None] * step, alpha[:, None] * dell)
            stalled[active] = np.max(np.abs(alpha[:, None] * dell) / ell, axis=-1) < 1e-15
        ell = ell_of(state, slice(None))
        return state, np.max(np.abs((np.log(ell) + 1) @ self._A - x), axis=-1)

    def _solve(self, x):
        """Chart index and active facet lengths of the Legendre preimage of each x."""
        x = np.asarray(x, dtype=DTYPE)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("non-finite evaluation point")

        # phase 1: moment coordinates, from the barycentre, to moderate accuracy
        def mu_update(mu, active, dmu, dell):
            mu[active] += dmu

        mu = np.broadcast_to(self._start, x.shape).copy()
        mu, _ = self._newton(lambda m, sel: self._lengths(m[sel]), mu_update, x, mu,
                             1e-6, True, floor=1e-8)

        # phase 2: the chart of the vertex whose facets are closest
        ell = self._lengths(mu)
        logs = np.log(ell)
        score = np.stack([logs[:, act].sum(axis=-1) for act in self._act], axis=-1)
        chart = np.argmin(score, axis=-1)
        act = self._act[chart]
        lam = np.take_along_axis(ell, act, axis=-1)
        B, c = self._B[chart], self._c[chart]

        def lam_lengths(lam, sel):
            return c[sel] + np.einsum("pmn,pn->pm", B[sel], lam[sel])

        def lam_update(lam, active, dmu, dell):
            lam[active] += np.take_along_axis(dell, act[active], axis=-1)

        lam, err = self._newton(lam_lengths, lam_update, x, lam, self.tol, True)
        bad = np.flatnonzero(err > ROUNDTRIP_TOL)
        if len(bad):
            raise NumericalFailure(
                f"Legendre Newton solve did not converge at x={np.asarray(x[bad[0]], float).tolist()}")
        return chart, lam

    def legendre_point(self, x: np.ndarray) -> np.ndarray:
        """Moment coordinates mu with grad g(mu) = x."""
        chart, lam = self._solve(np.atleast_2d(x))
        return self._vert[chart] + np.einsum("pjk,pk->pj", self._Ainv[chart], lam)

    def roundtrip_residual(self, x: np.ndarray) -> np.ndarray:
        """max_j |grad g(mu(x)) - x|_j, evaluated in the vertex chart."""
        x = np.atleast_2d(np.asarray(x, dtype=DTYPE))
        chart, lam = self._solve(x)
        ell = self._c[chart] + np.einsum("pmn,pn->pm", self._B[chart], lam)
        return np.max(np.abs((np.log(ell) + 1) @ self._A - x), axis=-1)

    def _jets(self, x, order):
        key = (np.asarray(x, dtype=np.float64).tobytes(), np.shape(x), order)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        x = np.asarray(x, dtype=DTYPE)
        n, m = self.n, len(self._b)
        chart, lam0 = self._solve(x)
        B, c = self._B[chart], self._c[chart]
        ell0 = c + np.einsum("pmn,pn->pm", B, lam0)
        hinv = spd_inverse(self._hess_from_lengths(ell0))
        # Newton correction in chart coordinates: d lam = A_v d mu
        M = np.einsum("pjk,pkl->pjl", self._A[self._act[chart]], hinv)
        X = Jet.variables(x, order)
        lam = [Jet.constant(lam0[:, j], n, order) for j in range(n)]

        def lengths(lam):
            out = []
            for i in range(m):
                ell = lam[0] * B[:, i, 0]
                for j in range(1, n):
                    ell = ell + lam[j] * B[:, i, j]
                out.append(ell + c[:, i])
            return out

        # chord iteration on the jets gains one Taylor order per sweep
        for _ in range(order + 1):
            logs = [e.log() + 1 for e in lengths(lam)]
            resid = []
            for j in range(n):
                acc = X[j] * -1
                for i in range(m):
                    if self._A[i, j] != 0:
                        acc = acc + logs[i] * float(self._A[i, j])
                resid.append(acc)
            new = []
            for j in range(n):
                corr = resid[0] * M[:, j, 0]
                for k in range(1, n):
                    corr = corr + resid[k] * M[:, j, k]
                new.append(lam[j] - corr)
            lam = new
        ell = lengths(lam)
        vert, inv = self._vert[chart], self._Ainv[chart]
        mu = []
        for j in range(n):
            acc = lam[0] * inv[:, j, 0]
            for k in range(1, n):
                acc = acc + lam[k] * inv[:, j, k]
            mu.append(acc + vert[:, j])
        g = ell[0] * ell[0].log()
        for e in ell[1:]:
            g = g + e * e.log()
        phi = X[0] * mu[0]
        for j in range(1, n):
            phi = phi + X[j] * mu[j]
        phi = phi - g
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = (phi, mu)
        return phi, mu

    def jet(self, x, order=JET_ORDER):
        return self._jets(x, order)[0]

    def moment_jets(self, x, order=JET_ORDER):
        return self._jets(x, order)[1]


class Perturbed(Potential):
    """Phi_ref + eps * f(mu_ref(x)), f a polynomial in moment coordinates."""

    def __init__(self, base: Potential, f: Callable, eps: float, label: str = "f"):
        self.base = base
        self.f = f
        self.eps = float(eps)
        self.label = label
        self.n = base.n
        self.polytope = base.polytope

    def __repr__(self):
        return f"Perturbed({self.base!r}, {self.label}, eps={self.eps})"

    @property
    def reference(self):
        return self.base.reference

    def perturbation_jet(self, x, order=JET_ORDER) -> Jet:
        mu = self.base.moment_jets(x, order)
        return self.f(mu) * self.eps

    def jet(self, x, order=JET_ORDER):
        return self.base.jet(x, order) + self.perturbation_jet(x, order)


class Translated(Potential):
    """x -> Phi(x + shift): the pull-back of Phi under a real torus flow."""

    def __init__(self, base: Potential, shift: Sequence[float]):
        self.base = base
        self.shift = np.asarray(shift, dtype=float)
        self.n = base.n
        self.polytope = base.polytope

    def __repr__(self):
        return f"Translated({self.base!r}, {self.shift.tolist()})"

    def jet(self, x, order=JET_ORDER):
        return self.base.jet(np.asarray(x, dtype=float) + self.shift, order)

    def moment_jets(self, x, order=JET_ORDER):
        return self.base.moment_jets(np.asarray(x, dtype=float) + self.shift, order)


def potential_jet(spec: Potential, x: np.ndarray, order: int = JET_ORDER) -> Jet:
    """Derivative tensor of Phi up to ``order`` at the points x (shape (P, n))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return spec.jet(x, order)


# -- metric data ----------------------------------------------------------------

@dataclass
class MetricData:
    """Pointwise metric quantities at a batch of points."""

    x: np.ndarray
    phi: Jet          # order 4
    G: np.ndarray     # (P, n, n) matrix of omega
    R: np.ndarray     # (P, n, n) matrix of Ric
    logdet: Jet       # order 2 jet of log det G

    @property
    def n(self) -> int:
        return self.G.shape[-1]

    def volume_density(self) -> np.ndarray:
        return factorial(self.n) * det_small(self.G)


def check_positive(G: np.ndarray, x: np.ndarray, what: str = "omega_phi") -> None:
    minors = leading_minors(G)
    bad = np.flatnonzero(~np.all(minors > 0, axis=-1))
    if len(bad):
        p = np.asarray(x)[bad[0]]
        raise NumericalFailure(f"{what} is not positive at x={np.asarray(p, float).tolist()}")


def metric_from_jet(phi: Jet, x: np.ndarray, what: str = "omega_phi") -> MetricData:
    """Metric and Ricci matrices from a fourth-order jet of the potential."""
    if phi.order < 4:
        raise ValueError("Ricci curvature needs a fourth-order jet")
    G = phi.hessian()
    check_positive(G, x, what)
    det = jet_det(hessian_jets(phi))
    logdet = det.log()
    return MetricData(np.asarray(x), phi, G, -logdet.hessian(), logdet)


def metric_and_ricci(spec: Potential, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    md = metric_from_jet(potential_jet(spec, x), x)
    return md.G, md.R


# -- wedge products -------------------------------------------------------------

def _multiset_permutations(items):
    seen = set()
    for perm in itertools.permutations(items):
        if perm not in seen:
            seen.add(perm)
            yield perm


def wedge_density(factors: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Density of A_1^{e_1} ^ ... ^ A_m^{e_m} relative to dx dtheta.

    Equals prod(e_j!) times the coefficient of prod t_j^{e_j} in
    det(sum_j t_j A_j); computed by expanding the determinant over row
    assignments, which is exact and multilinear.
    """
    factors = [(np.asarray(a), int(e)) for a, e in factors if int(e) != 0]
    if any(e < 0 for _, e in factors):
        raise ValueError("negative exponent in wedge product")
    if not factors:
        raise ValueError("empty wedge product")
    n = factors[0][0].shape[-1]
    if sum(e for _, e in factors) != n:
        raise ValueError(f"exponents must sum to n={n}")
    labels = [j for j, (_, e) in enumerate(factors) for _ in range(e)]
    mats = [a for a, _ in factors]
    batch = np.broadcast_shapes(*(a.shape[:-2] for a in mats))
    dtype = np.result_type(*mats)
    total = np.zeros(batch, dtype=dtype)
    for assign in _multiset_permutations(labels):
        rows = np.stack([np.broadcast_to(mats[assign[i]][..., i, :], batch + (n,))
                         for i in range(n)], axis=-2)
        total = total + det_small(rows)
    mult = 1
    for _, e in factors:
        mult *= factorial(e)
    return total * mult


def generalized_eigenvalues(R: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Eigenvalues of G^{-1/2} R G^{-1/2}, batched, in double precision."""
    G = np.asarray(G, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    L = np.linalg.cholesky(G)
    M = np.linalg.solve(L, R)
    M = np.linalg.solve(L, np.swapaxes(M, -1, -2))
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M)


# -- Ricci potential and u --------------------------------------------------------

def ricci_potential_raw(spec: Potential, x: np.ndarray, md: Optional[MetricData] = None) -> Jet:
    """-log det D^2 Phi - Phi + <tau, x>: a Ricci potential up to a constant."""
    tau = spec.polytope.canonical_centre()
    if tau is None:
        raise ConfigError("the polytope does not represent the class 2 pi c_1")
    if md is None:
        md = metric_from_jet(potential_jet(spec, x), x, "omega")
    X = Jet.variables(np.asarray(x, dtype=float), 2)
    lin = X[0] * float(tau[0])
    for j in range(1, spec.n):
        lin = lin + X[j] * float(tau[j])
    return -md.logdet - md.phi.truncate(2) + lin


@dataclass
class RicciPotential:
    """h with Ric - omega = sqrt(-1) d dbar h and int (e^h - 1) omega^n = 0."""

    evaluator: Callable[[np.ndarray], Jet]
    constant: float

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(x).value, dtype=np.float64)

    def jet(self, x) -> Jet:
        return self.evaluator(x)


def ricci_potential(spec: Potential, grid) -> RicciPotential:
    """Normalised Ricci potential of the metric with potential ``spec``."""
    from .quad import grid_rule, weighted_sum

    pts, wts = grid_rule(spec.n, grid)
    md = metric_from_jet(potential_jet(spec, pts), pts, "omega")
    raw = ricci_potential_raw(spec, pts, md)
    vol_dens = md.volume_density()
    vol = weighted_sum(vol_dens, wts)
    # work relative to the mean so the exponential stays O(1)
    shift = float(weighted_sum(raw.value * vol_dens, wts) / vol)
    avg = weighted_sum(np.exp(raw.value - shift) * vol_dens, wts) / vol
    c = -shift - math.log(avg)

    def evaluator(x, _spec=spec, _c=c):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return ricci_potential_raw(_spec, x) + _c

    return RicciPotential(evaluator, c)


def u_and_h(ref: Potential, target: Potential, grid):
    """u = log(omega_phi^n / omega^n) + phi - h_omega, and the Ricci potential of omega_phi.

    ``ref`` must carry the reference metric omega; ``target`` is omega_phi.
    Returns (u evaluator, h_ref, h_phi) where evaluators map points to
    order-2 jets.
    """
    from .quad import grid_rule, weighted_sum

    h_ref = ricci_potential(ref, grid)

    def u(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        j0 = potential_jet(ref, x)
        j1 = potential_jet(target, x)
        md0 = metric_from_jet(j0, x, "omega")
        md1 = metric_from_jet(j1, x)
        return md1.logdet - md0.logdet + (j1 - j0).truncate(2) - h_ref.jet(x)

    pts, wts = grid_rule(ref.n, grid)
    md1 = metric_from_jet(potential_jet(target, pts), pts)
    vol_dens = md1.volume_density()
    vol = weighted_sum(vol_dens, wts)
    uv = np.asarray(u(pts).value)
    shift = float(weighted_sum(uv * vol_dens, wts) / vol)
    avg = weighted_sum(np.exp(-(uv - shift)) * vol_dens, wts) / vol
    c = shift - math.log(avg)

    def h_phi(x, _c=c):
        return -u(x) + _c

    return u, h_ref, RicciPotential(h_phi, c)


# -- perturbation polynomials -----------------------------------------------------

_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b}


def parse_polynomial(text: str, n: int) -> Callable[[Sequence], object]:
    """Compile a polynomial in mu1..mun, e.g. "mu1*mu2 - 0.5*mu1**2".

    Only numbers, the variables, + - * and nonnegative integer powers are
    accepted.  The result maps a list of n values (floats, arrays or jets)
    to the polynomial's value.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"perturbation f: cannot parse {text!r}") from exc
    names = {f"mu{i + 1}": i for i in range(n)}

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                e = node.right
                if not (isinstance(e, ast.Constant) and isinstance(e.value, int)
                        and not isinstance(e.value, bool) and e.value >= 0):
                    raise ConfigError("perturbation f: exponents must be nonnegative integers")
                check(node.left)
            elif type(node.op) in _BINOPS:
                check(node.left)
                check(node.right)
            else:
                raise ConfigError(f"perturbation f: operator {type(node.op).__name__} not allowed")
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name) and node.id in names:
            pass
        else:
            raise ConfigError(f"perturbation f: unsupported element in {text!r}")

    check(tree)

    def evaluate(node, mu):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, mu)
        if isinstance(node, ast.BinOp):
            left = evaluate(node.left, mu)
            if isinstance(node.op, ast.Pow):
                return left ** node.right.value
            return _BINOPS[type(node.op)](left, evaluate(node.right, mu))
        if isinstance(node, ast.UnaryOp):
            val = evaluate(node.operand, mu)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Constant):
            return float(node.value)
        return mu[names[node.id]]

    def f(mu):
        out = evaluate(tree, mu)
        if not isinstance(out, Jet) and isinstance(mu[0], Jet):
            # constant polynomial: lift to a jet so callers can treat it uniformly
            out = Jet.constant(np.full(np.shape(mu[0].value), out), mu[0].n, mu[0].order)
        return out

    return f
