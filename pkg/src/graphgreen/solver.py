"""Dirichlet problems on finite domains: equilibrium potentials, capacities,
Green vectors and the Green operator.

All solves use the conductance form ``K v = b`` with ``K = diag(mu) - A`` on the
interior, which is a sparse symmetric M-matrix. In that form

* the Green vector ``g(pole, .)`` solves ``K g = e_pole``;
* ``G f`` solves ``K v = mu * f``.
"""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GraphError, ResourceError, SolverError
from .graph import DomainSpec, WeightedGraph

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-10
DEFAULT_MATRIX_THRESHOLD = 20_000


@dataclass
class SolverOptions:
    rtol: float = DEFAULT_RTOL
    maxiter_factor: float = 50.0  # iteration cap = factor * sqrt(interior size)
    matrix_threshold: int = DEFAULT_MATRIX_THRESHOLD

    def maxiter(self, n: int) -> int:
        return max(50, int(self.maxiter_factor * math.sqrt(n)))


@dataclass(frozen=True, eq=False)
class SolveInfo:
    iterations: int
    residual: float  # max-norm residual relative to max |rhs|


@dataclass(frozen=True, eq=False)
class PotentialField:
    """A function on the graph vertices (zero outside interior and boundary)."""

    domain: DomainSpec
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SolverError(f"non-finite values in field {self.label!r}")

    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior]


@dataclass(frozen=True, eq=False)
class GreenSolution:
    """Dirichlet Green vector ``g_Omega(pole, .)`` (zero off the interior)."""

    domain: DomainSpec
    pole: int
    values: np.ndarray
    capacity: float
    residual_norm: float
    iterations: int

    @property
    def graph(self) -> WeightedGraph:
        return self.domain.graph

    @property
    def at_pole(self) -> float:
        return float(self.values[self.pole])


def solve_dirichlet(dom: DomainSpec, rhs: np.ndarray, opts: SolverOptions | None = None,
                    x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveInfo]:
    """Solve ``K x = rhs`` on the interior with Jacobi-preconditioned CG."""
    opts = opts or SolverOptions()
    dom.check_solvable()
    k = dom.dirichlet_matrix
    n = k.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise SolverError(f"rhs has shape {rhs.shape}, expected ({n},)")
    scale = float(np.abs(rhs).max())
    if scale == 0.0:
        return np.zeros(n), SolveInfo(0, 0.0)
    if n == 1:
        x = rhs / k.diagonal()
        return x, SolveInfo(1, 0.0)
    dinv = 1.0 / k.diagonal()
    m = sp.diags(dinv)
    count = [0]

    def _cb(_):
        count[0] += 1

    x, status = spla.cg(k, rhs, x0=x0, rtol=opts.rtol, atol=0.0,
                        maxiter=opts.maxiter(n), M=m, callback=_cb)
    res = float(np.abs(k @ x - rhs).max()) / scale
    if status != 0 and res > opts.rtol * math.sqrt(n):
        raise SolverError(
            f"CG did not converge in {count[0]} iterations (relative residual {res:.3e})"
        )
    return x, SolveInfo(count[0], res)


def _matvec_ext(k: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """``k @ x`` accumulated in extended precision."""
    prod = k.data.astype(np.longdouble) * x[k.indices]
    return np.add.reduceat(prod, k.indptr[:-1])


def solve_dirichlet_refined(dom: DomainSpec, rhs: np.ndarray, opts: SolverOptions | None = None,
                            max_steps: int = 6) -> tuple[np.ndarray, SolveInfo]:
    """``K x = rhs`` with iterative refinement: residuals in extended precision,
    corrections by CG. Returns an extended-precision solution whose small
    components are accurate well below ``eps * max|x|``.

    ``rhs`` may be extended precision."""
    k = dom.dirichlet_matrix
    b = np.asarray(rhs, dtype=np.longdouble)
    x = np.zeros(len(b), dtype=np.longdouble)
    scale = float(np.abs(b).max())
    iters, prev, res = 0, math.inf, 0.0
    for _ in range(max_steps):
        r = b - _matvec_ext(k, x)
        res = float(np.abs(r).max()) / scale if scale else 0.0
        if res == 0.0 or res >= prev * 0.5:
            break
        prev = res
        d, info = solve_dirichlet(dom, r.astype(float), opts)
        iters += info.iterations
        x += d
    return x, SolveInfo(iters, res)


def _scatter(dom: DomainSpec, local: np.ndarray) -> np.ndarray:
    out = np.zeros(dom.graph.n, dtype=local.dtype)
    out[dom.interior] = local
    return out


def equilibrium_potential(g: WeightedGraph, o: int, dom: DomainSpec,
                          opts: SolverOptions | None = None) -> tuple[PotentialField, float]:
    """Harmonic ``phi`` with ``phi(o) = 1`` and ``phi = 0`` off the interior;
    returns ``(phi, Cap(o, complement))``."""
    _check_domain(g, dom, o)
    li = dom.local_index
    po = li[o]
    k = dom.dirichlet_matrix
    keep = np.ones(dom.size, dtype=bool)
    keep[po] = False
    phi_local = np.zeros(dom.size)
    phi_local[po] = 1.0
    info = SolveInfo(0, 0.0)
    if keep.any():
        # Dirichlet data phi(o)=1 moves to the right-hand side
        sub = DomainSpec.from_vertices(g, dom.interior[keep], kind="punctured")
        rhs = -np.asarray(k[keep][:, [po]].todense()).ravel()
        if sub.size:
            x, info = solve_dirichlet(sub, rhs, opts)
            phi_local[keep] = x
    phi = _scatter(dom, phi_local)
    nb, wt = g.neighbors(o)
    cap = float(np.sum(wt * (1.0 - phi[nb])))
    field_ = PotentialField(dom, phi, "equilibrium_potential",
                            {"pole": int(o), "capacity": cap, "residual": info.residual,
                             "iterations": info.iterations})
    return field_, cap


def green_vector(g: WeightedGraph, dom: DomainSpec, pole: int,
                 opts: SolverOptions | None = None) -> GreenSolution:
    """``g_Omega(pole, .)``: solves ``-Delta g = delta_pole / mu(pole)`` on the
    interior with zero boundary values."""
    _check_domain(g, dom, pole)
    rhs = np.zeros(dom.size)
    rhs[dom.local_index[pole]] = 1.0
    x, info = solve_dirichlet(dom, rhs, opts)
    vals = _scatter(dom, x)
    cap = 1.0 / vals[pole]
    return GreenSolution(dom, int(pole), vals, cap, info.residual, info.iterations)


def green_via_capacity(g: WeightedGraph, dom: DomainSpec, pole: int,
                       opts: SolverOptions | None = None) -> GreenSolution:
    """Second route to the Green vector: ``Cap^{-1} * phi``."""
    phi, cap = equilibrium_potential(g, pole, dom, opts)
    return GreenSolution(dom, int(pole), phi.values / cap, cap,
                         phi.meta["residual"], phi.meta["iterations"])


def _check_domain(g: WeightedGraph, dom: DomainSpec, pole: int) -> None:
    if dom.graph is not g:
        raise GraphError("domain belongs to a different graph")
    if not 0 <= pole < g.n:
        raise GraphError(f"pole {pole} not in graph")
    if not dom.mask[pole]:
        raise GraphError(f"pole {pole} is on or outside the boundary")
    if g.orbit_size is not None and g.orbit_size[pole] != 1:
        raise GraphError("on a symmetry quotient the pole must be a fixed point (orbit size 1)")
    dom.check_solvable(pole)


def laplacian(g: WeightedGraph, u: np.ndarray) -> np.ndarray:
    """Normalized graph Laplacian ``Delta u(x) = mu(x)^{-1} sum_y mu_xy (u(y) - u(x))``.

    Values on truncated vertices are meaningless (missing neighbours)."""
    return (g.adjacency @ u) / g.measure - u


def green_operator(dom: DomainSpec, f: np.ndarray, opts: SolverOptions | None = None,
                   ) -> tuple[np.ndarray, SolveInfo]:
    """``G_Omega f`` as a full-length vector: solves ``K v = mu * f`` on the interior.

    ``f`` is a full-length vector; only its interior values are used."""
    g = dom.graph
    rhs = g.measure[dom.interior] * np.asarray(f, dtype=float)[dom.interior]
    x, info = solve_dirichlet(dom, rhs, opts)
    return _scatter(dom, x), info


class GreenProvider:
    """Per-pole Green vectors over one domain, cached; optionally the full matrix.

    The full matrix is materialized only when the interior has at most
    ``opts.matrix_threshold`` vertices.
    """

    def __init__(self, dom: DomainSpec, opts: SolverOptions | None = None, cache_size: int = 64):
        self.domain = dom
        self.opts = opts or SolverOptions()
        self._cache: OrderedDict[int, GreenSolution] = OrderedDict()
        self._cache_size = cache_size
        self._matrix: np.ndarray | None = None

    @property
    def graph(self) -> WeightedGraph:
        return self.domain.graph

    def column(self, pole: int) -> GreenSolution:
        if pole in self._cache:
            self._cache.move_to_end(pole)
            return self._cache[pole]
        gs = green_vector(self.graph, self.domain, pole, self.opts)
        self._cache[pole] = gs
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return gs

    def matrix(self) -> np.ndarray:
        """Dense ``g_Omega(x, y)`` over interior x, y (interior ordering)."""
        if self._matrix is None:
            n = self.domain.size
            if n > self.opts.matrix_threshold:
                raise ResourceError(
                    f"interior of {n} vertices exceeds the Green-matrix threshold "
                    f"{self.opts.matrix_threshold}")
            k = self.domain.dirichlet_matrix.toarray()
            self._matrix = np.linalg.inv(k)
            self._matrix = 0.5 * (self._matrix + self._matrix.T)
        return self._matrix

    def apply(self, f: np.ndarray) -> tuple[np.ndarray, SolveInfo]:
        return green_operator(self.domain, f, self.opts)


def green_operator_apply(provider: GreenProvider, f: PotentialField | np.ndarray) -> PotentialField:
    """``G_Omega f(x) = sum_y g_Omega(x, y) f(y) mu(y)``.

    The result carries the residual of ``-Delta(G f) = f`` on the interior."""
    vals = f.values if isinstance(f, PotentialField) else np.asarray(f, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise SolverError("f must be finite")
    dom = provider.domain
    out, info = provider.apply(vals)
    lap = -laplacian(dom.graph, out)[dom.interior]
    target = vals[dom.interior]
    scale = max(float(np.abs(target).max()), 1e-300)
    res = float(np.abs(lap - target).max()) / scale
    return PotentialField(dom, out, "green_operator",
                          {"residual": res, "iterations": info.iterations})


def heat_kernel_green(g: WeightedGraph, dom: DomainSpec, pole: int, n_steps: int) -> PotentialField:
    """Partial sum ``sum_{n <= N} p_n^Omega(pole, .)`` of the killed heat kernel.

    ``p_n(x, y) = P_n(x, y) / mu(y)`` where ``P_n`` is the n-step transition
    probability of the walk killed on leaving the interior. Validation oracle
    only; convergence to the Green vector is geometric but can be slow.
    """
    if n_steps < 0:
        raise GraphError("n_steps must be >= 0")
    _check_domain(g, dom, pole)
    idx = dom.interior
    mu = g.measure[idx]
    a = g.adjacency[idx][:, idx]
    # row-vector propagation: pi_{n+1}(y) = sum_x pi_n(x) mu_xy / mu(x)
    pt = (sp.diags(1.0 / mu) @ a).T.tocsr()
    pi = np.zeros(dom.size)
    pi[dom.local_index[pole]] = 1.0
    acc = pi / mu
    for _ in range(n_steps):
        pi = pt @ pi
        acc = acc + pi / mu
    return PotentialField(dom, _scatter(dom, acc), "heat_kernel_green",
                          {"pole": int(pole), "n_steps": int(n_steps)})
