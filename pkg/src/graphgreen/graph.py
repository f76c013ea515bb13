"""Weighted graphs, lattice truncations, Dirichlet domains and ball profiles.

Vertices are dense integer indices ``0..n-1``. Lattice-born graphs carry an
integer coordinate table and a ``truncated`` mask marking the outer layer whose
neighbourhoods are incomplete; any query that would read those vertices as if
they were complete is refused.
"""
from __future__ import annotations

import io
import itertools
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    CensoredProfileError,
    EdgeListParseError,
    GraphError,
    ResourceError,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_VERTICES = 6_000_000


def max_vertices() -> int:
    """Vertex cap for builders, overridable through ``GRAPHGREEN_MAX_VERTICES``."""
    raw = os.environ.get("GRAPHGREEN_MAX_VERTICES")
    return int(raw) if raw else DEFAULT_MAX_VERTICES


def _check_cap(count: int, cap: int | None) -> None:
    cap = max_vertices() if cap is None else cap
    if count > cap:
        raise ResourceError(f"{count} vertices exceeds the cap of {cap}")


class WeightedGraph:
    """Undirected graph with symmetric positive conductances.

    Edges are given once each as ``(u, v, w)``; storage is a symmetric CSR
    matrix. ``measure[x]`` is the sum of conductances incident to ``x``.
    """

    def __init__(
        self,
        n: int,
        u: Sequence[int],
        v: Sequence[int],
        w: Sequence[float],
        coords: np.ndarray | None = None,
        *,
        truncated: np.ndarray | None = None,
        orbit_size: np.ndarray | None = None,
        center: int | None = None,
        name: str = "",
        check_connected: bool = True,
    ):
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=float)
        if not (len(u) == len(v) == len(w)):
            raise GraphError("edge arrays differ in length")
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        if len(u) and (u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(u == v):
            raise GraphError("self-loops are not allowed")
        if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
            raise GraphError("nonpositive conductance")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = lo * n + hi
        if len(np.unique(key)) != len(key):
            raise GraphError("duplicate edge")

        self.n = int(n)
        self.edges_u = lo
        self.edges_v = hi
        self.edges_w = w
        a = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
            shape=(n, n),
        ).tocsr()
        a.sort_indices()
        self.adjacency = a
        self.measure = self.recompute_measure()
        self.coords = None if coords is None else np.asarray(coords, dtype=np.int64)
        if self.coords is not None and len(self.coords) != n:
            raise GraphError("coordinate table has wrong length")
        self.truncated = (
            np.zeros(n, dtype=bool) if truncated is None else np.asarray(truncated, dtype=bool)
        )
        self.orbit_size = None if orbit_size is None else np.asarray(orbit_size, dtype=np.int64)
        self.center = center
        self.name = name
        for arr in (self.edges_u, self.edges_v, self.edges_w, self.measure, self.truncated):
            arr.flags.writeable = False
        if self.coords is not None:
            self.coords.flags.writeable = False
        if check_connected and n > 1:
            ncomp, _ = csgraph.connected_components(a, directed=False)
            if ncomp != 1:
                raise GraphError(f"graph is not connected ({ncomp} components)")

    def __repr__(self):
        return f"WeightedGraph({self.name or 'custom'}, n={self.n}, edges={self.num_edges})"

    @property
    def num_edges(self) -> int:
        return len(self.edges_w)

    @property
    def dim(self) -> int | None:
        return None if self.coords is None else self.coords.shape[1]

    @property
    def is_quotient(self) -> bool:
        return self.orbit_size is not None

    def neighbors(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.adjacency
        sl = slice(a.indptr[x], a.indptr[x + 1])
        return a.indices[sl], a.data[sl]

    def conductance(self, x: int, y: int) -> float:
        nb, wt = self.neighbors(x)
        i = np.searchsorted(nb, y)
        if i < len(nb) and nb[i] == y:
            return float(wt[i])
        return 0.0

    def recompute_measure(self) -> np.ndarray:
        m = np.zeros(self.n)
        np.add.at(m, self.edges_u, self.edges_w)
        np.add.at(m, self.edges_v, self.edges_w)
        return m

    def bfs_distances(self, o: int) -> np.ndarray:
        """Hop-count distance from ``o``; ``-1`` where unreachable."""
        return _bfs(self.adjacency, o)

    @cached_property
    def _coord_index(self) -> dict:
        if self.coords is None:
            raise GraphError("graph has no coordinates")
        return {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}

    def index_of(self, coord: Iterable[int]) -> int:
        try:
            return self._coord_index[tuple(int(c) for c in coord)]
        except KeyError:
            raise GraphError(f"no vertex at coordinates {tuple(coord)}") from None

    def euclidean_norm(self) -> np.ndarray:
        """Euclidean |x| from stored coordinates (used where the orthant/Z^d
        weights are defined in terms of |x|)."""
        if self.coords is None:
            raise GraphError("graph has no coordinates")
        return np.sqrt((self.coords.astype(float) ** 2).sum(axis=1))

    def safe_radius(self, o: int) -> float:
        """Largest n such that every vertex within distance ``n`` of ``o`` has its
        full neighbourhood stored; ``inf`` for graphs that are not truncations."""
        if not self.truncated.any():
            return math.inf
        dist = self.bfs_distances(o)
        reach = dist[self.truncated & (dist >= 0)]
        return float(reach.min() - 1) if len(reach) else math.inf


def _bfs(adj: sp.csr_matrix, o: int) -> np.ndarray:
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int64)
    dist[o] = 0
    frontier = np.array([o])
    level = 0
    indptr, indices = adj.indptr, adj.indices
    while len(frontier):
        level += 1
        starts, ends = indptr[frontier], indptr[frontier + 1]
        counts = ends - starts
        if counts.sum() == 0:
            break
        idx = np.repeat(starts - np.cumsum(np.r_[0, counts[:-1]]), counts) + np.arange(counts.sum())
        nb = np.unique(indices[idx])
        nb = nb[dist[nb] < 0]
        dist[nb] = level
        frontier = nb
    return dist


# ---------------------------------------------------------------------------
# Lattice builders


def l1_ball_size(d: int, r: int) -> int:
    """Number of points of Z^d with l1 norm at most r."""
    if r < 0:
        return 0
    return sum(2**k * math.comb(d, k) * math.comb(r, k) for k in range(min(d, r) + 1))


def lattice_ball_volume(d: int, r: int) -> float:
    """mu(B(x, r)) in Z^d with unit conductances (translation invariant)."""
    return 2.0 * d * l1_ball_size(d, r)


def _l1_points(d: int, r: int, _memo: dict | None = None) -> np.ndarray:
    memo = {} if _memo is None else _memo
    if (d, r) in memo:
        return memo[(d, r)]
    if d == 1:
        pts = np.arange(-r, r + 1, dtype=np.int64)[:, None]
    else:
        parts = []
        for x1 in range(-r, r + 1):
            sub = _l1_points(d - 1, r - abs(x1), memo)
            parts.append(np.column_stack([np.full(len(sub), x1, dtype=np.int64), sub]))
        pts = np.concatenate(parts)
    memo[(d, r)] = pts
    return pts


def _encode(points: np.ndarray, lo: np.ndarray, base: int) -> np.ndarray:
    shifted = points - lo
    key = np.zeros(len(points), dtype=np.int64)
    for j in range(points.shape[1]):
        key = key * base + shifted[:, j]
    return key


def _unit_edges(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j) with points[j] = points[i] + e_axis."""
    lo = points.min(axis=0)
    base = int((points.max(axis=0) - lo).max()) + 2
    keys = _encode(points, lo, base)
    order = np.argsort(keys)
    skeys = keys[order]
    us, vs = [], []
    for axis in range(points.shape[1]):
        nb = points.copy()
        nb[:, axis] += 1
        nkeys = _encode(nb, lo, base)
        pos = np.searchsorted(skeys, nkeys)
        pos = np.minimum(pos, len(skeys) - 1)
        hit = skeys[pos] == nkeys
        us.append(np.nonzero(hit)[0])
        vs.append(order[pos[hit]])
    return np.concatenate(us), np.concatenate(vs)


def _graph_from_points(points, truncated, name, center_coord=None, cap=None) -> WeightedGraph:
    _check_cap(len(points), cap)
    u, v = _unit_edges(points)
    g = WeightedGraph(
        len(points), u, v, np.ones(len(u)), points, truncated=truncated, name=name
    )
    if center_coord is not None:
        g.center = g.index_of(center_coord)
    return g


def build_lattice(d: int, radius: int, *, cap: int | None = None) -> WeightedGraph:
    """l1-ball of the given radius in Z^d with unit conductances.

    Vertices on the outer sphere are flagged as truncated: their measure is
    not 2d and they may only serve as Dirichlet boundary.
    """
    if d < 1:
        raise GraphError("dimension must be >= 1")
    if radius < 0:
        raise GraphError("radius must be >= 0")
    _check_cap(l1_ball_size(d, radius), cap)
    pts = _l1_points(d, radius)
    trunc = np.abs(pts).sum(axis=1) == radius
    return _graph_from_points(pts, trunc, f"Z{d}-l1ball-R{radius}", (0,) * d, cap)


def build_box(d: int, radius: int, *, cap: int | None = None) -> WeightedGraph:
    """Cube [-radius, radius]^d of Z^d; the faces are flagged truncated."""
    if d < 1 or radius < 0:
        raise GraphError("need d >= 1 and radius >= 0")
    _check_cap((2 * radius + 1) ** d, cap)
    axes = [np.arange(-radius, radius + 1)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d).astype(np.int64)
    trunc = np.abs(pts).max(axis=1) == radius
    return _graph_from_points(pts, trunc, f"Z{d}-box-R{radius}", (0,) * d, cap)


def build_orthant(d: int, k: int, box: Sequence[int], *, cap: int | None = None):
    """Truncation of the k-orthant {x_1..x_k >= 1} of Z^d.

    Constrained axes i < k cover interior values 1..box[i]; free axes cover
    -box[j]..box[j]. The graph additionally stores the boundary layer
    (x_i = 0 or box[i]+1 on constrained axes, |x_j| = box[j]+1 on free axes).
    Returns ``(graph, domain)``.
    """
    if not 1 <= k <= d:
        raise GraphError(f"invalid k={k} for d={d}")
    box = [int(b) for b in box]
    if len(box) != d:
        raise GraphError("box needs one extent per axis")
    if min(box) < 2:
        raise GraphError("box extents must be >= 2")
    axes = [np.arange(0, box[i] + 2) if i < k else np.arange(-box[i] - 1, box[i] + 2) for i in range(d)]
    size = math.prod(len(a) for a in axes)
    _check_cap(size, cap)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d).astype(np.int64)
    ext = np.array(box)
    inner = np.ones(len(pts), dtype=bool)
    for i in range(d):
        if i < k:
            inner &= (pts[:, i] >= 1) & (pts[:, i] <= ext[i])
        else:
            inner &= np.abs(pts[:, i]) <= ext[i]
    # keep interior plus the vertices adjacent to it (drop box corners of the layer)
    u, v = _unit_edges(pts)
    touches = np.zeros(len(pts), dtype=bool)
    touches[u[inner[v]]] = True
    touches[v[inner[u]]] = True
    keep = inner | touches
    pts = pts[keep]
    inner = inner[keep]
    g = _graph_from_points(pts, ~inner, f"Z{d}-orthant-k{k}-box{'x'.join(map(str, box))}", None, cap)
    dom = DomainSpec.from_vertices(g, np.nonzero(inner)[0], kind="orthant_truncation",
                                   params={"d": d, "k": k, "box": box})
    return g, dom


# ---------------------------------------------------------------------------
# Symmetry quotients


def _orbit_sizes(canon: np.ndarray, k: int) -> np.ndarray:
    """Orbit sizes under permutations of the first k coordinates and signed
    permutations of the remaining ones (canonical form assumed)."""
    n, d = canon.shape
    sizes = np.ones(n, dtype=np.int64)
    for block, signed in ((canon[:, :k], False), (canon[:, k:], True)):
        m = block.shape[1]
        if m == 0:
            continue
        perms = np.full(n, math.factorial(m), dtype=np.int64)
        # divide by multiplicities of equal values
        srt = np.sort(block, axis=1)
        run = np.ones(n, dtype=np.int64)
        for j in range(1, m):
            same = srt[:, j] == srt[:, j - 1]
            run = np.where(same, run + 1, 1)
            perms //= np.where(same, run, 1)
        sizes *= perms
        if signed:
            sizes *= 2 ** (block != 0).sum(axis=1)
    return sizes


def _combos(values, m: int) -> np.ndarray:
    rows = list(itertools.combinations_with_replacement(values.tolist(), m))
    return np.array(rows, dtype=np.int64).reshape(len(rows), m)


def canonicalize(points: np.ndarray, k: int) -> np.ndarray:
    """Canonical orbit representative: constrained block sorted, free block
    replaced by sorted absolute values."""
    pts = np.asarray(points, dtype=np.int64)
    out = np.empty_like(pts)
    out[:, :k] = np.sort(pts[:, :k], axis=1)
    out[:, k:] = np.sort(np.abs(pts[:, k:]), axis=1)
    return out


def build_symmetric_lattice(
    d: int, radius: int, *, k: int = 0, metric: str = "l1", cap: int | None = None
) -> WeightedGraph:
    """Quotient of a lattice truncation by its point-group symmetry.

    With ``k = 0`` the region is the l1 ball (``metric='l1'``) or cube
    (``'linf'``) of Z^d around the origin, quotiented by all signed coordinate
    permutations. With ``k >= 1`` the region is the graph-distance ball around
    the pole ``o = (1,..,1,0,..,0)`` (k ones) inside the k-orthant plus its
    hyperplane layer, quotiented by permutations of the first k axes and signed
    permutations of the rest.

    The result is an ordinary :class:`WeightedGraph` whose vertices are orbits:
    the conductance between two orbits is the total conductance of original
    edges joining them, and vertex measure is orbit size times 2d. For any
    symmetric function, Laplacian, Dirichlet solves, ball volumes and cut
    conductances coincide with those of the full graph, so a pole fixed by the
    group (orbit size 1) gets exactly the same Green values.
    """
    if d < 1 or radius < 0 or not 0 <= k <= d:
        raise GraphError("invalid symmetric lattice parameters")
    if metric not in ("l1", "linf"):
        raise GraphError("metric must be 'l1' or 'linf'")
    if k and metric != "l1":
        raise GraphError("orthant quotients use graph-distance balls")
    o = np.array([1] * k + [0] * (d - k), dtype=np.int64)

    # enumerate canonical representatives
    free_m = d - k
    free_vals = np.arange(radius + 1)
    con_vals = np.arange(0, radius + 2)
    blocks = []

    con = _combos(con_vals, k)
    if metric == "l1":
        con = con[np.abs(con - 1).sum(axis=1) <= radius]
    free = _combos(free_vals, free_m)
    if metric == "l1":
        free = free[free.sum(axis=1) <= radius]
    dist_con = np.abs(con - 1).sum(axis=1)
    for ci, c in enumerate(con):
        if metric == "l1":
            f = free[free.sum(axis=1) <= radius - dist_con[ci]]
        else:
            f = free
        blocks.append(np.column_stack([np.repeat(c[None, :], len(f), axis=0), f]))
    reps = np.concatenate(blocks) if blocks else np.zeros((0, d), dtype=np.int64)
    _check_cap(len(reps), cap)
    if metric == "l1":
        dist = np.abs(reps - o).sum(axis=1)
        trunc = dist == radius
    else:
        trunc = np.abs(reps).max(axis=1) == radius
    if k:
        trunc |= (reps[:, :k] == 0).any(axis=1)
    sizes = _orbit_sizes(reps, k)

    lo = reps.min(axis=0) - 1
    base = int(reps.max() - reps.min()) + 3
    keys = _encode(reps, lo, base)
    order = np.argsort(keys)
    skeys = keys[order]
    acc_u, acc_v, acc_w = [], [], []
    src = np.nonzero(~trunc)[0]  # truncated reps miss neighbours; complete reps see every edge
    for axis in range(d):
        for step in (1, -1):
            nb = reps[src].copy()
            nb[:, axis] += step
            if k:
                ok = (nb[:, :k] >= 0).all(axis=1)
            else:
                ok = np.ones(len(nb), dtype=bool)
            cn = canonicalize(nb[ok], k)
            nkeys = _encode(cn, lo, base)
            pos = np.minimum(np.searchsorted(skeys, nkeys), len(skeys) - 1)
            hit = skeys[pos] == nkeys
            srcs = src[ok][hit]
            acc_u.append(srcs)
            acc_v.append(order[pos[hit]])
            acc_w.append(sizes[srcs].astype(float))
    u = np.concatenate(acc_u)
    v = np.concatenate(acc_v)
    w = np.concatenate(acc_w)
    if np.any(u == v):
        raise GraphError("quotient produced a self-loop")
    n = len(reps)
    m = sp.coo_matrix((w, (u, v)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    mc = m.tocoo()
    uu, vv, ww = mc.row.astype(np.int64), mc.col.astype(np.int64), mc.data
    # an orbit edge between two complete reps is seen from both ends with equal
    # weight; edges complete -> truncated are seen once
    both = ~trunc[uu] & ~trunc[vv]
    if both.any():
        back = np.asarray(m.T.tocsr()[uu[both], vv[both]]).ravel()
        if not np.allclose(back, ww[both], rtol=0, atol=1e-9):
            raise GraphError("quotient conductances are not symmetric")
    keep = (both & (uu < vv)) | ~both
    uu, vv, ww = uu[keep], vv[keep], ww[keep]
    # layer vertices with no complete neighbour never touch the interior
    used = np.zeros(n, dtype=bool)
    used[uu] = used[vv] = True
    used[~trunc] = True
    remap = -np.ones(n, dtype=np.int64)
    remap[used] = np.arange(used.sum())
    g = WeightedGraph(
        int(used.sum()), remap[uu], remap[vv], ww, reps[used],
        truncated=trunc[used], orbit_size=sizes[used],
        name=f"Z{d}-sym-k{k}-{metric}-R{radius}",
    )
    g.center = g.index_of(o)
    return g


# ---------------------------------------------------------------------------
# Edge lists


def load_edge_list(stream, root: int = 0) -> WeightedGraph:
    """Parse ``u v w`` records ('#' comments, 0-based ids).

    Vertices are renumbered in order of first appearance; the returned graph
    is the connected component containing ``root`` (an id from the file).
    """
    if isinstance(stream, os.PathLike):
        with open(stream) as fh:
            return load_edge_list(fh, root)
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    ids: dict[int, int] = {}
    us, vs, ws = [], [], []
    seen = set()
    for lineno, line in enumerate(stream, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise EdgeListParseError(lineno, f"expected 'u v w', got {len(parts)} fields")
        try:
            a, b, wt = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise EdgeListParseError(lineno, str(exc)) from None
        if a < 0 or b < 0:
            raise EdgeListParseError(lineno, "vertex ids must be nonnegative")
        if not wt > 0 or not math.isfinite(wt):
            raise EdgeListParseError(lineno, "nonpositive conductance")
        if a == b:
            raise EdgeListParseError(lineno, "self-loop")
        pair = (min(a, b), max(a, b))
        if pair in seen:
            raise EdgeListParseError(lineno, f"duplicate edge {pair}")
        seen.add(pair)
        for x in (a, b):
            if x not in ids:
                ids[x] = len(ids)
        us.append(ids[a])
        vs.append(ids[b])
        ws.append(wt)
    if root not in ids:
        raise GraphError(f"root {root} is disconnected (appears in no edge)")
    n = len(ids)
    adj = sp.coo_matrix((np.ones(len(us)), (us, vs)), shape=(n, n))
    _, labels = csgraph.connected_components(adj, directed=False)
    comp = labels == labels[ids[root]]
    if not comp.all():
        log.warning("dropping %d vertices outside the root component", int((~comp).sum()))
    remap = -np.ones(n, dtype=np.int64)
    remap[comp] = np.arange(comp.sum())
    us, vs, ws = np.array(us), np.array(vs), np.array(ws)
    keep = comp[us]
    g = WeightedGraph(int(comp.sum()), remap[us[keep]], remap[vs[keep]], ws[keep], name="edge-list")
    g.center = int(remap[ids[root]])
    return g


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Finite Dirichlet domain: interior vertex set and its outer boundary."""

    graph: WeightedGraph
    interior: np.ndarray
    boundary: np.ndarray
    kind: str = "explicit"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_vertices(cls, graph: WeightedGraph, vertices, kind="explicit", params=None):
        interior = np.unique(np.asarray(vertices, dtype=np.int64))
        if len(interior) == 0:
            raise GraphError("empty interior")
        if interior[0] < 0 or interior[-1] >= graph.n:
            raise GraphError("interior vertex out of range")
        bad = interior[graph.truncated[interior]]
        if len(bad):
            raise CensoredProfileError(
                f"{len(bad)} interior vertices lie on the truncation layer (e.g. {int(bad[0])})"
            )
        mask = np.zeros(graph.n, dtype=bool)
        mask[interior] = True
        a = graph.adjacency[interior]
        nb = np.unique(a.indices)
        boundary = nb[~mask[nb]]
        return cls(graph, interior, boundary, kind, dict(params or {}))

    @classmethod
    def ball(cls, graph: WeightedGraph, o: int, radius: int):
        """B(o, R) with boundary S_{R+1}."""
        if radius < 0:
            raise GraphError("radius must be >= 0")
        safe = graph.safe_radius(o)
        if radius > safe:
            raise CensoredProfileError(f"ball radius {radius} exceeds safe radius {safe} at {o}")
        dist = graph.bfs_distances(o)
        return cls.from_vertices(graph, np.nonzero((dist >= 0) & (dist <= radius))[0], "ball",
                                 {"o": int(o), "R": int(radius)})

    @classmethod
    def truncation_interior(cls, graph: WeightedGraph):
        """All complete vertices of a truncation, with its outer layer as boundary
        (for the 1-d lattice of radius R this is the segment [-R, R] with
        endpoints as boundary)."""
        return cls.from_vertices(graph, np.nonzero(~graph.truncated)[0], "box")

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.graph.n, dtype=bool)
        m[self.interior] = True
        return m

    @cached_property
    def local_index(self) -> np.ndarray:
        """Map graph vertex -> position in ``interior`` (``-1`` outside)."""
        idx = -np.ones(self.graph.n, dtype=np.int64)
        idx[self.interior] = np.arange(len(self.interior))
        return idx

    @property
    def size(self) -> int:
        return len(self.interior)

    def contains(self, x: int) -> bool:
        return bool(self.mask[x])

    def is_subdomain_of(self, other: "DomainSpec") -> bool:
        return other.graph is self.graph and bool(other.mask[self.interior].all())

    @cached_property
    def dirichlet_matrix(self) -> sp.csr_matrix:
        """Conductance-form Dirichlet Laplacian on the interior:
        K = diag(mu) - A restricted to interior rows/columns (SPD)."""
        g = self.graph
        sub = g.adjacency[self.interior][:, self.interior]
        k = sp.diags(g.measure[self.interior]) - sub
        return k.tocsr()

    @cached_property
    def boundary_conductance(self) -> np.ndarray:
        """Per interior vertex, total conductance to the boundary."""
        g = self.graph
        a = g.adjacency[self.interior]
        inner = np.asarray(a[:, self.interior].sum(axis=1)).ravel()
        return g.measure[self.interior] - inner

    def check_solvable(self, pole: int | None = None) -> None:
        if len(self.boundary) == 0:
            raise GraphError("domain has empty boundary; Dirichlet problem is singular")
        sub = self.graph.adjacency[self.interior][:, self.interior]
        ncomp, labels = csgraph.connected_components(sub, directed=False)
        touch = np.zeros(ncomp, dtype=bool)
        touch[labels[self.boundary_conductance > 0]] = True
        if not touch.all():
            raise GraphError("an interior component does not reach the boundary")
        if pole is not None and not self.mask[pole]:
            raise GraphError(f"pole {pole} is not an interior vertex")


# ---------------------------------------------------------------------------
# Ball profiles


@dataclass(frozen=True)
class BallProfile:
    center: int
    radii: np.ndarray
    volumes: np.ndarray  # mu(B(o, n))
    sphere_sizes: np.ndarray  # |S_n|
    sphere_measures: np.ndarray  # mu(S_n)
    cut_conductances: np.ndarray  # b_k

    @property
    def r_max(self) -> int:
        return int(self.radii[-1])

    @property
    def partial_cut_sums(self) -> np.ndarray:
        """M_k = sum_{l=1}^{k} b_l (M_0 = 0)."""
        m = np.cumsum(self.cut_conductances)
        return m - self.cut_conductances[0]

    def check_mass_bound(self) -> bool:
        return bool(np.all(self.partial_cut_sums <= self.volumes * (1 + 1e-12)))

    def to_rows(self):
        for n in range(len(self.radii)):
            yield {
                "n": int(self.radii[n]),
                "volume": float(self.volumes[n]),
                "sphere_size": int(self.sphere_sizes[n]),
                "b": float(self.cut_conductances[n]),
                "M": float(self.partial_cut_sums[n]),
            }


def ball_profile(g: WeightedGraph, o: int, r_max: int) -> BallProfile:
    """Exact volumes mu(B(o,n)), sphere sizes and cut conductances b_k for
    0 <= n, k <= r_max. Refuses radii where the truncation would censor the
    result."""
    if not 0 <= o < g.n:
        raise GraphError(f"vertex {o} not in graph")
    if r_max < 0:
        raise GraphError("r_max must be >= 0")
    safe = g.safe_radius(o)
    if r_max > safe:
        raise CensoredProfileError(f"profile radius {r_max} exceeds safe radius {safe} at vertex {o}")
    dist = g.bfs_distances(o)
    radii = np.arange(r_max + 1)
    reach = dist >= 0
    dr = dist[reach]
    sizes = np.bincount(dr, minlength=r_max + 2)[: r_max + 1]
    smeas = np.bincount(dr, weights=g.measure[reach], minlength=r_max + 2)[: r_max + 1]
    du, dv = dist[g.edges_u], dist[g.edges_v]
    lo = np.minimum(du, dv)
    cross = (np.abs(du - dv) == 1) & (lo >= 0) & (lo <= r_max)
    b = np.bincount(lo[cross], weights=g.edges_w[cross], minlength=r_max + 1)[: r_max + 1]
    return BallProfile(o, radii, np.cumsum(smeas), sizes, smeas, b)
