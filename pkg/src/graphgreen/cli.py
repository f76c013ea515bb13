"""Command-line entry point: builds graphs, runs one pipeline, writes a JSON
report (plus CSV sidecars) atomically.

Exit codes: 0 ok, 1 a mathematical invariant failed, 2 configuration error,
3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import (PotentialWeight, b_criterion_series, construct_supersolution,
                       g_power_inequality_check, potential_ratio, sample_three_g,
                       tem1_conditions, testing_bound, thm_main_conditions, volume_series)
from .errors import GraphError, GraphGreenError, ResourceError
from .flow import (batch_hardy, edge_marginals_exact, first_exit_stats, lr_energy,
                   monte_carlo_marginals, orient_current, sample_paths)
from .graph import (DomainSpec, WeightedGraph, ball_profile, build_box, build_lattice,
                    build_orthant, build_symmetric_lattice, load_edge_list)
from .lattice import (GreenTable, j_theta_integral, orthant_green_reflection,
                      serrin_sweep, theta_comparator)
from .solver import GreenProvider, SolverOptions, green_via_capacity, green_vector

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
COMMANDS = ("green", "capacity", "flow", "criterion", "serrin", "orthant-green", "jtheta")
CRITERIA = ("volume", "bk", "testing", "ratio", "tem1", "thmmain", "3g", "power")

log = logging.getLogger("graphgreen")


class ConfigError(GraphGreenError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    rtol: float = 1e-10
    maxiter_factor: float = 50.0
    matrix_threshold: int = 20_000
    threads: int | None = None
    out: str | None = None

    def solver_options(self) -> SolverOptions:
        return SolverOptions(self.rtol, self.maxiter_factor, self.matrix_threshold)

    def to_dict(self) -> dict:
        # the output path is where the report goes, not part of the experiment
        d = asdict(self)
        d.pop("out")
        return d


@dataclass
class RunReport:
    config: dict
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> list of row dicts (CSV sidecars)
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__

    def check(self, name: str, ok: bool, **detail) -> bool:
        self.checks.append({"name": name, "ok": bool(ok), **_plain(detail)})
        return bool(ok)

    @property
    def failed(self) -> int:
        return sum(not c["ok"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "config": self.config,
            "invariants": {"passed": len(self.checks) - self.failed, "failed": self.failed,
                           "checks": self.checks},
            "results": _plain(self.results),
            "sidecars": sorted(self.tables),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# Validation


def validate(config: ExperimentConfig) -> list[dict]:
    """Every violated constraint as ``{"level", "field", "message"}``."""
    out = []
    p = config.params

    def err(fld, msg):
        out.append({"level": "error", "field": fld, "message": msg})

    def warn(fld, msg):
        out.append({"level": "warning", "field": fld, "message": msg})

    if config.command not in COMMANDS:
        err("command", f"unknown command {config.command!r}")
        return out
    for i, q in enumerate(p.get("q") or []):
        if not q > 1:
            err(f"params.q[{i}]", "q must exceed 1")
    for key in ("radius", "ball_radius", "box", "samples", "poles", "triples", "pairs"):
        v = p.get(key)
        if v is not None and v < 1:
            err(f"params.{key}", f"{key} must be >= 1")
    for i, r in enumerate(p.get("radii") or []):
        if r < 1:
            err(f"params.radii[{i}]", "radius must be >= 1")
    if p.get("dim") is not None and p["dim"] < 1:
        err("params.dim", "dimension must be >= 1")
    if p.get("alpha") is not None and p["alpha"] < 0:
        err("params.alpha", "alpha must be >= 0")
    if not config.rtol > 0:
        err("rtol", "tolerance must be positive")
    if config.threads is not None and config.threads < 1:
        err("threads", "threads must be >= 1")
    cmd = config.command
    if cmd in ("flow", "jtheta") and config.seed is None and (cmd == "flow" or p.get("random")):
        err("seed", "randomized commands need an explicit --seed")
    if cmd == "criterion":
        if p.get("which") not in CRITERIA:
            err("params.which", f"must be one of {', '.join(CRITERIA)}")
        if p.get("which") == "3g" and config.seed is None:
            err("seed", "randomized commands need an explicit --seed")
        if p.get("which") in ("volume", "bk", "testing", "ratio", "tem1", "thmmain") and not p.get("q"):
            err("params.q", "at least one q is required")
    if cmd == "serrin":
        d, k = p.get("dim", 3), p.get("k", 0)
        if d < 3:
            err("params.dim", "Serrin sweeps need d >= 3")
        if p.get("domain") == "orthant" and not 1 <= k <= d:
            err("params.k", "orthant needs 1 <= k <= d")
        if p.get("domain") == "lattice" and p.get("alpha", 0) >= 2:
            warn("params.alpha", "alpha >= 2 is outside the lattice theorem's hypothesis alpha < 2")
        if len(p.get("radii") or []) < 2:
            err("params.radii", "need at least two radii")
        if not p.get("q"):
            err("params.q", "at least one q is required")
    if cmd == "jtheta":
        if not p.get("random"):
            if not (p.get("beta") or 0) > 0:
                err("params.beta", "beta must be positive")
            if not (p.get("a") or 0) > 0:
                err("params.a", "a must be positive")
            if any(v < 0 for v in p.get("ell") or []):
                err("params.ell", "box lengths must be nonnegative")
        elif not 1 <= p.get("k", 1) <= 4:
            err("params.k", "k must be in 1..4")
    if cmd == "orthant-green" and not p.get("pairs_file"):
        err("params.pairs_file", "--pairs FILE is required")
    if cmd in ("green", "capacity", "flow") and p.get("edges") is None and p.get("dim") is None:
        err("params.dim", "give --dim/--radius or --edges")
    return out


# ---------------------------------------------------------------------------
# Graph setup shared by several commands


def _graph_from_params(p: dict, *, radius_pad: int = 0) -> WeightedGraph:
    if p.get("edges"):
        return load_edge_list(Path(p["edges"]), root=p.get("root", 0))
    d, r = p["dim"], p["radius"] + radius_pad
    if p.get("orthant_k"):
        g, _ = build_orthant(d, p["orthant_k"], [p.get("box") or r] * d)
        return g
    return build_lattice(d, r)


def _pole(g: WeightedGraph, p: dict) -> int:
    pole = p.get("pole")
    if pole is None:
        return g.center
    if g.coords is not None:
        c = list(pole)
        if len(c) == 1 and g.dim and g.dim > 1 and c[0] == 0:
            c = [0] * g.dim
        return g.index_of(c)
    if len(pole) != 1:
        raise ConfigError("edge-list graphs take a single vertex id as --pole")
    return int(pole[0])


def _domain(g: WeightedGraph, pole: int, p: dict) -> DomainSpec:
    if p.get("boundary"):
        bd = set(int(b) for b in p["boundary"])
        return DomainSpec.from_vertices(g, [v for v in range(g.n) if v not in bd], "explicit")
    if p.get("ball_radius") is not None or p.get("domain") == "ball":
        return DomainSpec.ball(g, pole, p.get("ball_radius") or p["radius"])
    return DomainSpec.truncation_interior(g)


def _coord_cols(g: WeightedGraph, x: int) -> list:
    return [] if g.coords is None else [int(c) for c in g.coords[x]]


# ---------------------------------------------------------------------------
# Pipelines


def _run_green(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    g = _graph_from_params(p)
    o = _pole(g, p)
    dom = _domain(g, o, p)
    opts = cfg.solver_options()
    gs = green_vector(g, dom, o, opts)
    alt = green_via_capacity(g, dom, o, opts)
    idx = dom.interior
    agree = float(np.max(np.abs(gs.values[idx] - alt.values[idx])) / gs.at_pole)
    rep.results = {"vertices": g.n, "interior": dom.size, "pole": o, "capacity": gs.capacity,
                   "g_pole": gs.at_pole, "residual": gs.residual_norm, "iterations": gs.iterations,
                   "two_route_max_relative_gap": agree}
    rep.check("two_route_agreement", agree <= 1e-8, gap=agree)
    rep.check("maximum_at_pole", gs.values[idx].max() <= gs.at_pole * (1 + 1e-12))
    rep.check("positive_on_interior", bool(np.all(gs.values[idx] > 0)))
    rep.check("residual", gs.residual_norm <= cfg.rtol * np.sqrt(dom.size) * 10, residual=gs.residual_norm)
    dim = g.dim or 0
    rep.tables["green"] = [
        {"vertex": int(x), **{f"x{i}": c for i, c in enumerate(_coord_cols(g, x))},
         "g": float(gs.values[x])}
        for x in np.sort(np.concatenate([idx, dom.boundary]))
    ] if dim or g.coords is None else []


def _run_capacity(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    radii = sorted(p.get("radii") or [p["radius"]])
    pp = dict(p, radius=max(radii))
    g = _graph_from_params(pp, radius_pad=1) if not p.get("edges") else _graph_from_params(pp)
    o = _pole(g, p)
    opts = cfg.solver_options()
    rows = []
    for r in radii:
        dom = DomainSpec.ball(g, o, r)
        gs = green_vector(g, dom, o, opts)
        rows.append({"R": r, "capacity": gs.capacity, "g_pole": gs.at_pole})
    caps = [r["capacity"] for r in rows]
    rep.results = {"pole": o, "capacities": rows}
    rep.check("capacity_nonincreasing_in_R", all(b <= a * (1 + 1e-10) for a, b in zip(caps, caps[1:])))
    rep.tables["capacity"] = rows


def _run_flow(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    R = p.get("ball_radius") or p["radius"]
    g = load_edge_list(Path(p["edges"]), p.get("root", 0)) if p.get("edges") else build_lattice(p["dim"], R + 1)
    o = _pole(g, p)
    dom = DomainSpec.ball(g, o, R)
    gs = green_vector(g, dom, o, SolverOptions(min(cfg.rtol, 1e-12), cfg.maxiter_factor, cfg.matrix_threshold))
    flow = orient_current(gs)
    inv = flow.invariant_report()
    rep.check("unit_flow", inv["ok"], **{k: v for k, v in inv.items() if k != "ok"})
    exact = edge_marginals_exact(flow)
    dev = float(np.max(np.abs(exact - flow.theta)))
    rep.check("exact_marginals", dev <= 1e-12, max_abs_deviation=dev)
    batch = sample_paths(flow, p["samples"], cfg.seed, workers=cfg.threads or os.cpu_count() or 1)
    mc, se = monte_carlo_marginals(batch)
    z = np.abs(mc - flow.theta) / np.maximum(se, 1e-300)
    z = np.where(se > 0, z, np.where(mc == flow.theta, 0.0, np.inf))
    rep.check("mc_marginals_within_4se", bool(np.all(z <= 4)), max_z=float(z.max()))
    lengths = np.bincount(batch.lengths)
    hardy = []
    prof = ball_profile(g, o, R)
    lr_rows = []
    for q in p.get("q") or [1.5, 2.0, 3.0]:
        lhs, rhs = batch_hardy(batch, q)
        viol = int(np.sum(lhs < rhs * (1 - 1e-12)))
        hardy.append({"q": q, "violations": viol, "min_margin": float(np.min(lhs - rhs))})
        rep.check(f"path_hardy_q{q}", viol == 0, violations=viol)
        lr = lr_energy(gs, q, prof, flow)
        lr_rows.append(lr)
        rep.check(f"current_lower_q{q}", lr["holds"] and lr["path_mass_ok"])
    fe = []
    for n in range(1, R + 1):
        st = first_exit_stats(batch, prof, n, R)
        fe.append({k: st[k] for k in ("n", "estimate", "stderr", "bound", "holds",
                                      "tail_domination_violations")})
        rep.check(f"first_exit_n{n}", st["holds"] and st["tail_domination_violations"] == 0)
    rep.results = {"R": R, "pole": o, "samples": p["samples"], "seed": cfg.seed,
                   "flow": inv, "exact_marginal_max_dev": dev, "mc_max_z": float(z.max()),
                   "path_length_counts": lengths.tolist(), "hardy": hardy,
                   "first_exit": fe, "lr_energy": lr_rows}
    rep.tables["first_exit"] = fe
    rep.tables["lr_energy"] = lr_rows


def _lattice_sigma(p: dict) -> PotentialWeight:
    a = p.get("alpha") or 0.0
    return PotentialWeight.power(a) if a else PotentialWeight.constant()


def _run_criterion(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    which = p["which"]
    d = p.get("dim") or 3
    radii = sorted(p.get("radii") or [p.get("radius") or 20])
    qs = p.get("q") or []
    opts = cfg.solver_options()
    sigma = _lattice_sigma(p)
    out: dict = {"which": which, "dim": d, "radii": radii, "sigma": sigma.describe()}
    if which in ("volume", "bk"):
        N = radii[-1]
        g = build_symmetric_lattice(d, N + 1)
        prof = ball_profile(g, g.center, N)
        fn = volume_series if which == "volume" else b_criterion_series
        series = {}
        for q in qs:
            r = fn(prof, q, N)
            series[str(q)] = r.classification
            rep.tables[f"{which}_q{q}"] = [{"N": lv, "partial_sum": v} for lv, v in zip(r.levels, r.values)]
        out["classification"] = series
        rep.check("mass_bound_M_le_volume", prof.check_mass_bound())
    elif which in ("testing", "ratio", "tem1", "power"):
        g = build_symmetric_lattice(d, radii[-1] + 1)
        o = g.center
        rows = []
        for R in radii:
            dom = DomainSpec.ball(g, o, R)
            for q in qs:
                row = {"R": R, "q": q}
                if which == "testing":
                    gs = green_vector(g, dom, o, opts)
                    row["bound"] = testing_bound(gs, sigma, q)
                elif which == "ratio":
                    res = potential_ratio(g, dom, sigma, q, o, opts)
                    c = res.sup * (1 + p.get("margin", 1e-3))
                    sup = construct_supersolution(g, dom, sigma, q, c, o, opts=opts)
                    row.update(sup_ratio=res.sup, C=c, supersolution=sup.summary())
                    rep.check(f"supersolution_R{R}_q{q}", sup.verified, min_slack=sup.min_slack)
                elif which == "tem1":
                    r = tem1_conditions(g, dom, sigma, q, o, opts=opts)
                    row.update(fitted_C=r.extra["fitted_C"], levels=len(r.levels))
                else:
                    chk = g_power_inequality_check(g, dom, sigma, q, opts)
                    row.update(min_relative_slack=chk["min_relative_slack"], violations=chk["violations"])
                    rep.check(f"power_inequality_R{R}_s{q}", chk["holds"], **chk)
                rows.append(row)
        out["rows"] = rows
        rep.tables[which] = [{k: v for k, v in r.items() if not isinstance(v, dict)} for r in rows]
    elif which == "thmmain":
        N = radii[-1]
        g = build_lattice(d, N + 1)
        rows = []
        for q in qs:
            r = thm_main_conditions(g, g.center, sigma, q, N)
            rows.append({"q": q, "e1_classification": r.classification,
                         "e2_classification": r.extra["e2_classification"],
                         "e1_last": r.values[-1], "e2_last": r.extra["e2_sup"][-1],
                         "tail_remainder": r.extra["tail_remainder"]})
            rep.tables[f"thmmain_q{q}"] = [{"n": n, "e1": a, "e2": b}
                                           for n, a, b in zip(r.levels, r.values, r.extra["e2_sup"])]
        out["rows"] = rows
    elif which == "3g":
        rows = []
        for R in radii:
            g = build_box(d, R)
            dom = DomainSpec.truncation_interior(g)
            prov = GreenProvider(dom, opts, cache_size=p.get("poles", 40))
            res = sample_three_g(prov, p.get("poles", 40), p.get("triples", 100_000), cfg.seed)
            rows.append({"R": R, **res})
        out["rows"] = rows
        rep.tables["3g"] = rows
    rep.results = out


def _run_serrin(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    res = serrin_sweep(p.get("domain", "lattice"), p.get("dim", 3), p.get("alpha", 0.0),
                       p["q"], p["radii"], k=p.get("k", 0), opts=cfg.solver_options())
    rep.results = res.to_dict()
    rep.results["verdicts"] = {str(q): v for q, v in res.verdicts().items()}
    rep.check("classification_monotone_in_q", res.monotone_in_q)
    for r in res.reports:
        rep.check(f"ratio_monotone_in_R_q{r.params['q']}", r.extra["monotone_in_R"])
        rep.tables[f"serrin_q{r.params['q']}"] = [{"R": a, "sup_ratio": b} for a, b in zip(r.levels, r.values)]


def _read_pairs(path: str, d: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            vals = line.replace(",", " ").split()
            if len(vals) != 2 * d:
                raise ConfigError(f"{path}:{lineno}: expected {2 * d} integers")
            rows.append([int(v) for v in vals])
    if not rows:
        raise ConfigError(f"{path}: no pairs")
    return np.array(rows, dtype=np.int64)


def _run_orthant_green(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    d, k = p.get("dim", 3), p.get("k", 1)
    pairs = _read_pairs(p["pairs_file"], d)
    x, y = pairs[:, :d], pairs[:, d:]
    if np.any(x[:, :k] < 1) or np.any(y[:, :k] < 1):
        raise ConfigError("every point must lie in the orthant (first k coordinates >= 1)")
    reach = int(np.max(np.abs(x) + np.abs(y)))
    reach = max(reach, 4)
    table = GreenTable.build(d, reach, opts=cfg.solver_options())
    ga = orthant_green_reflection(table, x, y, k)
    gb = orthant_green_reflection(table, y, x, k)
    th = theta_comparator(x, y, d, k)
    sym = float(np.max(np.abs(ga - gb) / np.abs(ga)))
    rep.check("reflection_symmetry", sym <= 1e-8, max_relative_gap=sym)
    rep.check("positive_in_orthant", bool(np.all(ga > 0)))
    rows = [{**{f"x{i}": int(v) for i, v in enumerate(a)}, **{f"y{i}": int(v) for i, v in enumerate(b)},
             "G_A": float(g_), "Theta": float(t), "ratio": float(g_ / t)}
            for a, b, g_, t in zip(x, y, ga, th)]
    rep.tables["orthant_green"] = rows
    rep.results = {"pairs": len(rows), "table_reach": reach, "table_boxes": list(table.boxes),
                   "table_accuracy": table.accuracy,
                   "ratio_min": float(np.min(ga / th)), "ratio_max": float(np.max(ga / th))}


def _run_jtheta(cfg: ExperimentConfig, rep: RunReport) -> None:
    p = cfg.params
    rows = []
    if p.get("random"):
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        k = p.get("k", 1)
        for _ in range(p["random"]):
            beta = float(rng.uniform(0.1, 5.0))
            a = float(np.exp(rng.uniform(-3, 3)))
            ell = (a * np.exp(rng.uniform(-5, 5, size=k))).tolist()
            rows.append((beta, a, ell))
    else:
        rows.append((p["beta"], p["a"], list(p.get("ell") or [])))
    out = []
    for beta, a, ell in rows:
        r = j_theta_integral(beta, a, ell)
        out.append({"beta": beta, "a": a, "ell": " ".join(f"{v:.17g}" for v in ell), "J": r.value,
                    "closed_form": r.closed_form, "lower": r.lower, "upper": r.upper, "holds": r.holds})
    viol = sum(not r["holds"] for r in out)
    rep.check("j_theta_bounds", viol == 0, violations=viol, instances=len(out))
    rep.results = {"instances": len(out), "violations": viol,
                   "first": out[0] if len(out) == 1 else None}
    rep.tables["jtheta"] = out


PIPELINES = {
    "green": _run_green, "capacity": _run_capacity, "flow": _run_flow,
    "criterion": _run_criterion, "serrin": _run_serrin,
    "orthant-green": _run_orthant_green, "jtheta": _run_jtheta,
}


def run(config: ExperimentConfig) -> RunReport:
    """Execute one configured pipeline. Raises :class:`ConfigError` on invalid
    configuration; library errors propagate."""
    problems = [d for d in validate(config) if d["level"] == "error"]
    if problems:
        raise ConfigError("; ".join(f"{d['field']}: {d['message']}" for d in problems))
    rep = RunReport(config.to_dict())
    PIPELINES[config.command](config, rep)
    return rep


# ---------------------------------------------------------------------------
# Output


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in r.items()})
    return buf.getvalue()


def write_report(rep: RunReport, out: str | None, wall_clock: float | None = None) -> None:
    """Report JSON to ``out`` (stdout if None) plus CSV sidecars. Wall-clock goes
    to ``<stem>.timing.json`` so the report itself stays byte-identical."""
    text = json.dumps(rep.to_dict(), indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    _atomic_write(path, text)
    if wall_clock is not None:
        _atomic_write(path.with_suffix("").with_name(f"{path.stem}.timing.json"),
                      json.dumps({"wall_clock_seconds": wall_clock}) + "\n")
    stem = path.with_suffix("")
    for name, rows in rep.tables.items():
        _atomic_write(stem.with_name(f"{stem.name}.{name}.csv"), _csv_text(_plain(rows)))


# ---------------------------------------------------------------------------
# Argument parsing


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", help="JSON report path (CSV sidecars are written next to it)")
    sp.add_argument("--seed", type=int, help="64-bit RNG seed")
    sp.add_argument("--rtol", type=float, default=1e-10, help="solver relative residual")
    sp.add_argument("--maxiter-factor", type=float, default=50.0, help="CG cap = factor * sqrt(n)")
    sp.add_argument("--matrix-threshold", type=int, default=20_000)
    sp.add_argument("--threads", type=int, help="worker cap (default: machine parallelism)")
    sp.add_argument("-v", "--verbose", action="store_true")


def _graph_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--dim", type=int)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--orthant-k", type=int)
    sp.add_argument("--box", type=int)
    sp.add_argument("--edges", help="edge-list file 'u v w'")
    sp.add_argument("--root", type=int, default=0)
    sp.add_argument("--pole", type=_ints, help="coordinates (lattice) or vertex id")
    sp.add_argument("--domain", choices=("box", "ball"), default="box")
    sp.add_argument("--ball-radius", type=int)
    sp.add_argument("--boundary", type=_ints, help="explicit boundary vertex ids")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="graphgreen", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"graphgreen {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("green", help="Green vector and capacity on a domain")
    _graph_args(sp)
    _common(sp)
    sp = sub.add_parser("capacity", help="Cap(o, B_R^c) over radii")
    _graph_args(sp)
    sp.add_argument("--radii", type=_ints)
    _common(sp)
    sp = sub.add_parser("flow", help="unit current, path sampling and path estimates")
    _graph_args(sp)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--q", type=_floats, default=[1.5, 2.0, 3.0])
    _common(sp)
    sp = sub.add_parser("criterion", help="existence/nonexistence criteria on Z^d")
    sp.add_argument("--which", required=True, choices=CRITERIA)
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--q", type=_floats, default=[])
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--radius", type=_ints, dest="radii", help="comma-separated radii")
    sp.add_argument("--margin", type=float, default=1e-3, help="C = (1+margin) * sup-ratio")
    sp.add_argument("--poles", type=int, default=40)
    sp.add_argument("--triples", type=int, default=100_000)
    _common(sp)
    sp = sub.add_parser("serrin", help="sup-ratio sweep across radii and q")
    sp.add_argument("--domain", choices=("lattice", "orthant"), default="lattice")
    sp.add_argument("--d", "--dim", type=int, dest="dim", default=3)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--q", type=_floats, required=True)
    sp.add_argument("--radii", type=_ints, required=True)
    _common(sp)
    sp = sub.add_parser("orthant-green", help="orthant Green function by reflection")
    sp.add_argument("--d", "--dim", type=int, dest="dim", default=3)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--pairs", dest="pairs_file", help="file of 'x_1..x_d y_1..y_d' rows")
    _common(sp)
    sp = sub.add_parser("jtheta", help="J_beta integral and its bounds")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--ell", type=_floats, default=[])
    sp.add_argument("--random", type=int, help="number of random instances")
    sp.add_argument("--k", type=int, default=1)
    _common(sp)
    sp = sub.add_parser("validate", help="check a command line without running it")
    sp.add_argument("argv", nargs=argparse.REMAINDER)
    return ap


_NON_PARAMS = {"command", "out", "seed", "rtol", "maxiter_factor", "matrix_threshold",
               "threads", "verbose", "argv"}


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    params = {k: v for k, v in vars(ns).items() if k not in _NON_PARAMS and v is not None}
    return ExperimentConfig(ns.command, params, ns.seed, ns.rtol, ns.maxiter_factor,
                            ns.matrix_threshold, ns.threads, ns.out)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if ns.command == "validate":
        if not ns.argv:
            sys.stderr.write("validate: give a command line to check\n")
            return EXIT_CONFIG
        try:
            inner = ap.parse_args(ns.argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        if inner.command == "validate":
            sys.stderr.write("validate: nothing to check\n")
            return EXIT_CONFIG
        diags = validate(config_from_args(inner))
        sys.stdout.write(json.dumps({"diagnostics": diags}, indent=2) + "\n")
        return EXIT_CONFIG if any(d["level"] == "error" for d in diags) else EXIT_OK
    cfg = config_from_args(ns)
    t0 = time.perf_counter()
    try:
        rep = run(cfg)
    except ResourceError as exc:
        sys.stderr.write(f"resource abort: {exc}\n")
        return EXIT_RESOURCE
    except (ConfigError, GraphError, OSError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except GraphGreenError as exc:
        sys.stderr.write(f"invariant failure: {exc}\n")
        return EXIT_INVARIANT
    elapsed = time.perf_counter() - t0
    write_report(rep, cfg.out, elapsed)
    log.info("%s finished in %.3f s", cfg.command, elapsed)
    if rep.failed:
        for c in rep.checks:
            if not c["ok"]:
                sys.stderr.write(f"invariant failed: {c['name']}\n")
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
