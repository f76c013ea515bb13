"""Unit current of a Green voltage, its path decomposition, and the path-level
estimates built on it (Hardy sums, first exits across metric cuts, the
nonlinear Green energy L_R).

The exterior of the domain is collapsed to one sink vertex. Locally the
interior vertices are numbered ``0..n-1`` in domain order and the sink is ``n``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import FlowError, GraphError
from .graph import BallProfile, ball_profile
from .solver import GreenSolution

FLOW_TOL = 1e-10
ZERO_DROP = 1e-14  # relative to g(o)
CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class UnitFlow:
    """Acyclic unit flow from the pole to the collapsed sink."""

    source: int  # local index of the pole
    sink: int  # == number of interior vertices
    vertices: np.ndarray  # graph vertex id per local interior index
    voltage: np.ndarray  # g_R per local vertex, sink included (= 0)
    distance: np.ndarray  # graph distance from the pole; sink = max + 1
    tail: np.ndarray
    head: np.ndarray
    theta: np.ndarray
    mu: np.ndarray  # conductance of the (collapsed) edge
    dropped: int  # edges discarded for zero voltage drop

    @property
    def n_nodes(self) -> int:
        return self.sink + 1

    @cached_property
    def outflow(self) -> np.ndarray:
        return np.bincount(self.tail, weights=self.theta, minlength=self.n_nodes)

    @cached_property
    def inflow(self) -> np.ndarray:
        return np.bincount(self.head, weights=self.theta, minlength=self.n_nodes)

    @cached_property
    def _out_csr(self):
        order = np.lexsort((self.head, self.tail))
        ptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(ptr, self.tail + 1, 1)
        return order, np.cumsum(ptr)

    @cached_property
    def topological_order(self) -> np.ndarray:
        """Vertices by decreasing voltage, ties broken by index."""
        return np.lexsort((np.arange(self.n_nodes), -self.voltage))

    def invariant_report(self) -> dict:
        th_p, th_m = self.outflow, self.inflow
        inner = np.ones(self.n_nodes, dtype=bool)
        inner[[self.source, self.sink]] = False
        balance = float(np.abs(th_p[inner] - th_m[inner]).max()) if inner.any() else 0.0
        acyclic = bool(np.all(self.voltage[self.tail] > self.voltage[self.head]))
        rep = {
            "source_out": float(th_p[self.source]),
            "source_in": float(th_m[self.source]),
            "sink_in": float(th_m[self.sink]),
            "sink_out": float(th_p[self.sink]),
            "max_interior_imbalance": balance,
            "acyclic": acyclic,
            "edges": int(len(self.theta)),
            "dropped_zero_drop_edges": int(self.dropped),
        }
        rep["ok"] = bool(
            acyclic
            and abs(rep["source_out"] - 1) <= FLOW_TOL
            and rep["source_in"] <= FLOW_TOL
            and abs(rep["sink_in"] - 1) <= FLOW_TOL
            and rep["sink_out"] <= FLOW_TOL
            and balance <= FLOW_TOL
        )
        return rep


def orient_current(gs: GreenSolution, *, tol: float = FLOW_TOL) -> UnitFlow:
    """Collapse the exterior to one sink, orient every edge downhill in the Green
    voltage and return the resulting unit flow ``theta_xy = mu_xy |g(x) - g(y)|``.

    Raises :class:`FlowError` when conservation fails by more than ``tol``.
    """
    dom = gs.domain
    g = dom.graph
    interior = dom.interior
    n = len(interior)
    li = dom.local_index
    volt = np.append(gs.values[interior], 0.0)
    go = gs.at_pole

    inside = dom.mask[g.edges_u] & dom.mask[g.edges_v]
    eu = li[g.edges_u[inside]]
    ev = li[g.edges_v[inside]]
    ew = g.edges_w[inside]
    bc = dom.boundary_conductance
    sink_src = np.nonzero(bc > 0)[0]
    eu = np.concatenate([eu, sink_src])
    ev = np.concatenate([ev, np.full(len(sink_src), n)])
    ew = np.concatenate([ew, bc[sink_src]])

    drop = volt[eu] - volt[ev]
    keep = np.abs(drop) > ZERO_DROP * go
    fwd = drop > 0
    tail = np.where(fwd, eu, ev)[keep]
    head = np.where(fwd, ev, eu)[keep]
    mu = ew[keep]
    theta = mu * np.abs(drop[keep])

    dist = g.bfs_distances(gs.pole)[interior]
    dist = np.append(dist, dist.max() + 1)
    flow = UnitFlow(int(li[gs.pole]), n, interior.copy(), volt, dist, tail, head,
                    theta, mu, int((~keep).sum()))
    rep = flow.invariant_report()
    if not rep["acyclic"]:
        raise FlowError("directed cycle in oriented current (internal inconsistency)")
    if not (abs(rep["source_out"] - 1) <= tol and abs(rep["sink_in"] - 1) <= tol
            and rep["max_interior_imbalance"] <= tol and rep["source_in"] <= tol):
        raise FlowError(f"flow conservation violated beyond {tol}: {rep}")
    return flow


def edge_marginals_exact(flow: UnitFlow) -> np.ndarray:
    """Probability that the sampled path uses each edge, by dynamic programming
    of visit probabilities along the topological order."""
    order, ptr = flow._out_csr
    th_out = flow.outflow
    visit = np.zeros(flow.n_nodes)
    visit[flow.source] = 1.0
    marg = np.zeros(len(flow.theta))
    seen = np.zeros(flow.n_nodes, dtype=bool)
    for x in flow.topological_order:
        seen[x] = True
        lo, hi = ptr[x], ptr[x + 1]
        if hi == lo:
            continue
        e = order[lo:hi]
        if np.any(seen[flow.head[e]]):
            raise FlowError("topological sort failed: edge points backwards")
        m = visit[x] * flow.theta[e] / th_out[x]
        marg[e] = m
        np.add.at(visit, flow.head[e], m)
    return marg


# ---------------------------------------------------------------------------
# Path sampling


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A directed path ``o = x_0, ..., x_m = sink`` with voltages ``V_i``."""

    vertices: np.ndarray  # local ids, sink included
    voltages: np.ndarray
    distances: np.ndarray
    edges: np.ndarray  # edge index per step

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def drops(self) -> np.ndarray:
        return self.voltages[:-1] - self.voltages[1:]

    def first_hit(self, n: int) -> int:
        """tau_n: first index with distance exactly n from the pole."""
        hit = np.nonzero(self.distances == n)[0]
        if not len(hit):
            raise FlowError(f"path never reaches sphere S_{n}")
        return int(hit[0])

    def exit_indices(self, n: int, radius: int) -> np.ndarray:
        """alpha_k^{(n)} for k = n..R: first step at or after tau_n leaving B_k."""
        tau = self.first_hit(n)
        d = self.distances
        out = []
        for k in range(n, radius + 1):
            idx = np.nonzero((d[tau:-1] <= k) & (d[tau + 1:] > k))[0]
            if not len(idx):
                raise FlowError(f"path never exits B_{k}")
            out.append(tau + int(idx[0]))
        return np.array(out)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Many sampled paths, padded with ``-1`` after the sink."""

    flow: UnitFlow
    vertices: np.ndarray  # (samples, max_len + 1)
    edges: np.ndarray  # (samples, max_len)
    lengths: np.ndarray
    seed: int

    def __len__(self):
        return len(self.lengths)

    def path(self, i: int) -> SampledPath:
        m = int(self.lengths[i])
        vs = self.vertices[i, : m + 1]
        return SampledPath(vs, self.flow.voltage[vs], self.flow.distance[vs], self.edges[i, :m])

    def voltages(self) -> np.ndarray:
        """V_i per path; 0 (the sink value) after the end."""
        v = self.vertices
        return np.where(v >= 0, self.flow.voltage[np.maximum(v, 0)], 0.0)

    def distances(self) -> np.ndarray:
        v = self.vertices
        return np.where(v >= 0, self.flow.distance[np.maximum(v, 0)], np.iinfo(np.int64).max)

    def first_hit_voltage(self, n: int) -> np.ndarray:
        d = self.distances()
        hit = d == n
        if not hit.any(axis=1).all():
            raise FlowError(f"some path never reaches sphere S_{n}")
        tau = hit.argmax(axis=1)
        return self.voltages()[np.arange(len(self)), tau]

    def edge_counts(self) -> np.ndarray:
        e = self.edges[self.edges >= 0]
        return np.bincount(e, minlength=len(self.flow.theta))


def _rng(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _sample_chunk(flow: UnitFlow, count: int, rng: np.random.Generator):
    order, ptr = flow._out_csr
    th_out = flow.outflow
    tails = flow.tail[order]
    probs = flow.theta[order] / th_out[tails]
    seg_start = ptr[tails]
    # cumulative probability within each tail's segment, offset by the tail index
    cum = np.cumsum(probs)
    cum_before = np.concatenate([[0.0], cum])[seg_start]
    keys = tails + (cum - cum_before)
    cur = np.full(count, flow.source, dtype=np.int64)
    verts = [cur.copy()]
    edges = []
    active = np.ones(count, dtype=bool)
    steps = 0
    while active.any():
        steps += 1
        if steps > flow.n_nodes:
            raise FlowError("walk did not terminate (cycle)")
        idx = np.nonzero(active)[0]
        x = cur[idx]
        if np.any(ptr[x + 1] == ptr[x]):
            raise FlowError("walk stuck at a vertex with no outgoing current")
        u = rng.random(len(idx))
        j = np.searchsorted(keys, x + u, side="right")
        j = np.clip(j, ptr[x], ptr[x + 1] - 1)
        e = order[j]
        nxt = flow.head[e]
        cur[idx] = nxt
        col_v = np.full(count, -1, dtype=np.int64)
        col_e = np.full(count, -1, dtype=np.int64)
        col_v[idx] = nxt
        col_e[idx] = e
        verts.append(col_v)
        edges.append(col_e)
        active[idx[nxt == flow.sink]] = False
    v = np.stack(verts, axis=1)
    e = np.stack(edges, axis=1) if edges else np.zeros((count, 0), dtype=np.int64)
    lengths = (e >= 0).sum(axis=1)
    return v, e, lengths


def sample_paths(flow: UnitFlow, samples: int, seed: int, workers: int = 1) -> PathBatch:
    """Draw ``samples`` independent source-to-sink paths with transition
    probabilities ``theta_xy / theta^+(x)``.

    Samples are produced in fixed-size chunks, chunk ``c`` drawing from the
    substream ``(seed, c)``, and concatenated in chunk order, so the result is
    bit-identical for any worker count.
    """
    if samples < 1:
        raise GraphError("samples must be >= 1")
    sizes = [min(CHUNK, samples - s) for s in range(0, samples, CHUNK)]

    def run(c):
        return _sample_chunk(flow, sizes[c], _rng(seed, c))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    width = max(p[0].shape[1] for p in parts)
    vs = np.concatenate([np.pad(p[0], ((0, 0), (0, width - p[0].shape[1])), constant_values=-1)
                         for p in parts])
    es = np.concatenate([np.pad(p[1], ((0, 0), (0, width - 1 - p[1].shape[1])), constant_values=-1)
                         for p in parts])
    ls = np.concatenate([p[2] for p in parts])
    return PathBatch(flow, vs, es, ls, int(seed))


def sample_path(flow: UnitFlow, seed: int) -> SampledPath:
    return sample_paths(flow, 1, seed).path(0)


def monte_carlo_marginals(batch: PathBatch) -> tuple[np.ndarray, np.ndarray]:
    """Empirical edge-use frequencies and their binomial standard errors."""
    n = len(batch)
    p = batch.edge_counts() / n
    se = np.sqrt(np.maximum(p * (1 - p), 0.0) / n)
    return p, se


# ---------------------------------------------------------------------------
# Hardy inequalities


def hardy_sequence_check(a) -> tuple[float, float, bool]:
    """``sum 1/a_n >= (1/4) sum n / A_n`` with ``A_n`` the partial sums."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or len(a) == 0:
        raise GraphError("need a nonempty 1-d sequence")
    if np.any(~(a > 0)):
        raise GraphError("sequence entries must be positive")
    lhs = float(np.sum(1.0 / a))
    n = np.arange(1, len(a) + 1)
    rhs = 0.25 * float(np.sum(n / np.cumsum(a)))
    return lhs, rhs, lhs >= rhs * (1 - 1e-12)


def path_hardy_sums(voltages: np.ndarray, q: float) -> tuple[float, float]:
    """Both sides of ``sum V_i^q / delta_i >= (q-1)/4 sum_{j>=1} j V_j^{q-1}``
    for one voltage sequence ``V_0 > ... > V_m = 0``."""
    v = np.asarray(voltages, dtype=float)
    if q <= 1:
        raise GraphError("q must exceed 1")
    if len(v) < 2 or v[-1] != 0.0:
        raise GraphError("malformed path: voltages must end at the sink value 0")
    delta = v[:-1] - v[1:]
    if np.any(~(delta > 0)):
        raise GraphError("malformed path: drops must be positive")
    m = len(delta)
    lhs = float(np.sum(v[:-1] ** q / delta))
    j = np.arange(1, m)
    rhs = (q - 1) / 4 * float(np.sum(j * v[1:m] ** (q - 1)))
    return lhs, rhs


def path_hardy_check(path: SampledPath, q: float) -> tuple[float, float, bool]:
    lhs, rhs = path_hardy_sums(path.voltages, q)
    return lhs, rhs, lhs >= rhs * (1 - 1e-12)


def batch_hardy(batch: PathBatch, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized path Hardy sums over a batch."""
    v = batch.voltages()
    valid = batch.vertices >= 0
    delta = v[:, :-1] - v[:, 1:]
    step = valid[:, 1:]
    safe = np.where(step, delta, 1.0)
    if np.any(step & ~(delta > 0)):
        raise FlowError("path with nonpositive drop")
    lhs = np.sum(np.where(step, v[:, :-1] ** q / safe, 0.0), axis=1)
    j = np.arange(v.shape[1])
    inner = valid & (j >= 1) & (v > 0)
    rhs = (q - 1) / 4 * np.sum(np.where(inner, j * np.where(inner, v, 1.0) ** (q - 1), 0.0), axis=1)
    return lhs, rhs


# ---------------------------------------------------------------------------
# First exits and L_R


def _ball_radius(flow_or_gs) -> int:
    dom = flow_or_gs.domain if isinstance(flow_or_gs, GreenSolution) else None
    if dom is not None and dom.kind == "ball":
        return int(dom.params["R"])
    raise GraphError("operation needs a Green solution on a ball domain B(o, R)")


def parallel_sum_bound(profile: BallProfile, n: int, radius: int) -> float:
    """``(sum_{k=n}^{R} 1/b_k)^{-1}``."""
    if radius > profile.r_max:
        raise GraphError("profile too short for the requested radius")
    b = profile.cut_conductances[n: radius + 1]
    return float(1.0 / np.sum(1.0 / b))


def first_exit_stats(batch: PathBatch, profile: BallProfile, n: int, radius: int) -> dict:
    """Monte Carlo ``E[1/V_{tau_n}]`` against the parallel-sum cut bound.

    Also checks per path that the tail voltage dominates the exit drops,
    ``V_{tau_n} >= sum_k delta_{alpha_k}``, and the moment inequality
    ``mean V^{p} >= (mean V^{-1})^{-p}`` for p = 0.5, 1, 2.
    """
    if not 1 <= n <= radius:
        raise GraphError("need 1 <= n <= R")
    vt = batch.first_hit_voltage(n)
    inv = 1.0 / vt
    mean = float(inv.mean())
    se = float(inv.std(ddof=1) / math.sqrt(len(inv))) if len(inv) > 1 else 0.0
    bound = parallel_sum_bound(profile, n, radius)

    # tail-dominates-exits, vectorized: exit drop for each k is the first step
    # at/after tau_n with d(x_i) <= k < d(x_{i+1})
    d = batch.distances()
    v = batch.voltages()
    tau = (d == n).argmax(axis=1)
    cols = np.arange(d.shape[1] - 1)
    after = cols[None, :] >= tau[:, None]
    exits_sum = np.zeros(len(batch))
    for k in range(n, radius + 1):
        cross = after & (d[:, :-1] <= k) & (d[:, 1:] > k)
        if not cross.any(axis=1).all():
            raise FlowError(f"path never exits B_{k}")
        i = cross.argmax(axis=1)
        rows = np.arange(len(batch))
        exits_sum += v[rows, i] - v[rows, i + 1]
    dominated = int(np.sum(vt < exits_sum * (1 - 1e-12)))

    moments = {}
    for p in (0.5, 1.0, 2.0):  # p = q - 1 for q in {1.5, 2, 3}
        lhs = float(np.mean(vt**p))
        rhs = mean ** (-p)
        moments[str(p)] = {"mean_V_pow": lhs, "reciprocal_bound": rhs, "holds": lhs >= rhs * (1 - 1e-12)}
    return {
        "n": int(n),
        "samples": int(len(batch)),
        "seed": batch.seed,
        "estimate": mean,
        "stderr": se,
        "bound": bound,
        "holds": mean <= bound * (1 + 1e-12) + 3 * se,
        "tail_domination_violations": dominated,
        "moment_checks": moments,
    }


def lr_energy(gs: GreenSolution, q: float, profile: BallProfile | None = None,
              flow: UnitFlow | None = None) -> dict:
    """``L_R = sum_{x in B_R} g_R(x)^q mu(x)`` and the cut-conductance lower bound
    ``(q-1)/4 sum_{n=1}^{R} n (sum_{k=n}^{R} 1/b_k)^{q-1}``.

    With a flow, also reports the exact path mass ``sum_e mu_e g(tail)^q``,
    which sits between the two.
    """
    if q <= 1:
        raise GraphError("q must exceed 1")
    radius = _ball_radius(gs)
    dom = gs.domain
    g = dom.graph
    vals = gs.values[dom.interior]
    lr = float(np.sum(vals**q * g.measure[dom.interior]))
    if profile is None:
        profile = ball_profile(g, gs.pole, radius)
    b = profile.cut_conductances[1: radius + 1]
    tails = np.cumsum((1.0 / b)[::-1])[::-1]  # sum_{k=n}^{R} 1/b_k for n = 1..R
    n = np.arange(1, radius + 1)
    bound = (q - 1) / 4 * float(np.sum(n * tails ** (q - 1)))
    out = {"R": radius, "q": q, "L_R": lr, "lower_bound": bound, "holds": lr >= bound}
    if flow is not None:
        out["path_mass"] = float(np.sum(flow.mu * flow.voltage[flow.tail] ** q))
        out["path_mass_ok"] = bool(bound <= out["path_mass"] * (1 + 1e-12)
                                   and out["path_mass"] <= lr * (1 + 1e-12))
    return out
