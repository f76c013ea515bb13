import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connected_graph
from graphgreen.errors import FlowError, GraphError
from graphgreen.flow import (batch_hardy, edge_marginals_exact, first_exit_stats,
                             hardy_sequence_check, lr_energy, monte_carlo_marginals,
                             orient_current, path_hardy_check, path_hardy_sums, sample_path,
                             sample_paths)
from graphgreen.graph import DomainSpec, WeightedGraph, ball_profile, build_lattice
from graphgreen.solver import SolverOptions, green_vector

TIGHT = SolverOptions(rtol=1e-13)


def ball_flow(d, R):
    g = build_lattice(d, R + 1)
    dom = DomainSpec.ball(g, g.center, R)
    gs = green_vector(g, dom, g.center, TIGHT)
    return g, gs, orient_current(gs)


def spoke_star(m):
    """Pole 0 joined to m interior leaves, each leaf joined to its own boundary vertex."""
    u = [0] * m + list(range(1, m + 1))
    v = list(range(1, m + 1)) + list(range(m + 1, 2 * m + 1))
    g = WeightedGraph(2 * m + 1, u, v, [1.0] * (2 * m))
    dom = DomainSpec.from_vertices(g, range(m + 1))
    return g, dom


class TestOrientation:
    def test_segment_two_arms(self):
        g = build_lattice(1, 3)
        gs = green_vector(g, DomainSpec.truncation_interior(g), g.center, TIGHT)
        flow = orient_current(gs)
        np.testing.assert_allclose(flow.theta, 0.5, atol=1e-12)
        assert len(flow.theta) == 6
        # every edge points away from the pole
        x = np.append(g.coords[flow.vertices, 0], 99)
        assert np.all(np.abs(x[flow.head]) > np.abs(x[flow.tail]))

    def test_star(self):
        m = 7
        g, dom = spoke_star(m)
        flow = orient_current(green_vector(g, dom, 0, TIGHT))
        np.testing.assert_allclose(flow.theta, 1 / m, atol=1e-12)
        np.testing.assert_allclose(edge_marginals_exact(flow), 1 / m, atol=1e-12)

    def test_z2_unit_source(self):
        _, _, flow = ball_flow(2, 10)
        rep = flow.invariant_report()
        assert rep["ok"]
        assert rep["source_out"] == pytest.approx(1, abs=1e-10)
        assert rep["source_in"] == 0.0

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 40), extra=st.integers(0, 60))
    def test_invariants_random_graphs(self, seed, n, extra):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, n, extra)
        dist = g.bfs_distances(0)
        R = int(dist.max()) - 1
        if R < 1:
            return
        dom = DomainSpec.from_vertices(g, np.nonzero(dist <= R)[0])
        gs = green_vector(g, dom, 0, TIGHT)
        flow = orient_current(gs)
        assert flow.invariant_report()["ok"]
        np.testing.assert_allclose(edge_marginals_exact(flow), flow.theta, atol=1e-12)

    def test_sloppy_solve_is_caught(self):
        g = build_lattice(2, 12)
        gs = green_vector(g, DomainSpec.ball(g, g.center, 11), g.center, SolverOptions(rtol=1e-3))
        with pytest.raises(FlowError, match="conservation"):
            orient_current(gs)


class TestSampling:
    def test_segment_arm(self):
        g = build_lattice(1, 6)
        flow = orient_current(green_vector(g, DomainSpec.truncation_interior(g), g.center, TIGHT))
        batch = sample_paths(flow, 4000, seed=3)
        assert np.all(batch.lengths == 6)
        first = g.coords[flow.vertices[batch.vertices[:, 1]], 0]
        assert abs(np.mean(first > 0) - 0.5) < 4 * 0.5 / np.sqrt(4000)

    def test_single_path_graph(self):
        g = WeightedGraph(4, [0, 1, 2], [1, 2, 3], [1.0, 2.0, 3.0])
        flow = orient_current(green_vector(g, DomainSpec.from_vertices(g, [0, 1, 2]), 0, TIGHT))
        paths = {tuple(sample_path(flow, s).vertices) for s in range(20)}
        assert paths == {(0, 1, 2, 3)}

    def test_paths_strictly_decrease_and_drops_match(self):
        _, _, flow = ball_flow(2, 6)
        batch = sample_paths(flow, 500, seed=11)
        for i in range(0, 500, 50):
            p = batch.path(i)
            assert np.all(np.diff(p.voltages) < 0)
            np.testing.assert_allclose(p.drops * flow.mu[p.edges], flow.theta[p.edges], rtol=1e-12)

    def test_bit_identical_across_workers(self):
        _, _, flow = ball_flow(2, 8)
        a = sample_paths(flow, 100_000, seed=7, workers=1)
        b = sample_paths(flow, 100_000, seed=7, workers=4)
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(np.bincount(a.lengths), np.bincount(b.lengths))

    def test_seed_changes_result(self):
        _, _, flow = ball_flow(2, 5)
        assert not np.array_equal(sample_paths(flow, 200, 1).vertices, sample_paths(flow, 200, 2).vertices)

    def test_mc_marginals_within_4se(self):
        _, _, flow = ball_flow(2, 6)
        p, se = monte_carlo_marginals(sample_paths(flow, 100_000, seed=5))
        z = np.abs(p - flow.theta) / np.where(se > 0, se, 1.0)
        assert z.max() <= 4


class TestHardy:
    def test_constant_sequence(self):
        lhs, rhs, ok = hardy_sequence_check(np.ones(10))
        assert (lhs, rhs, ok) == (10.0, 2.5, True)

    def test_linear_sequence(self):
        n = np.arange(1, 11)
        lhs, rhs, ok = hardy_sequence_check(n)
        assert lhs == pytest.approx(2.9289682539682538)
        assert rhs == pytest.approx(0.25 * np.sum(2 / (n + 1)))
        assert ok

    @given(st.lists(st.floats(-6, 6), min_size=1, max_size=60))
    def test_random_sequences(self, logs):
        assert hardy_sequence_check(np.exp(logs))[2]

    def test_rejects_nonpositive(self):
        with pytest.raises(GraphError):
            hardy_sequence_check([1.0, 0.0])

    def test_path_hand_oracle(self):
        assert path_hardy_sums(np.arange(5, -1, -1.0), 2.0) == (55.0, 5.0)

    def test_single_drop(self):
        lhs, rhs = path_hardy_sums(np.array([3.0, 0.0]), 1.5)
        assert rhs == 0.0 and lhs > 0

    @given(st.lists(st.floats(-8, 2), min_size=1, max_size=50), st.sampled_from([1.1, 1.5, 2.0, 3.0, 5.0]))
    def test_random_voltage_sequences(self, logs, q):
        v = np.append(np.cumsum(np.exp(logs))[::-1], 0.0)
        if np.any(np.diff(v) >= 0):
            return
        lhs, rhs = path_hardy_sums(v, q)
        assert lhs >= rhs * (1 - 1e-12)

    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    def test_batch_matches_single(self, q):
        _, _, flow = ball_flow(2, 6)
        batch = sample_paths(flow, 300, seed=2)
        lhs, rhs = batch_hardy(batch, q)
        for i in range(0, 300, 37):
            a, b, ok = path_hardy_check(batch.path(i), q)
            assert ok
            assert lhs[i] == pytest.approx(a, rel=1e-12) and rhs[i] == pytest.approx(b, rel=1e-12)


class TestFirstExit:
    @pytest.mark.parametrize("R", [3, 10, 25])
    def test_z1_equality_case(self, R):
        g, gs, flow = ball_flow(1, R)
        prof = ball_profile(g, g.center, R)
        st_ = first_exit_stats(sample_paths(flow, 200, seed=1), prof, 1, R)
        # V at distance 1 is R/2 on every path, and b_k = 2 gives the bound 2/R
        assert st_["estimate"] == pytest.approx(2 / R, rel=1e-12)
        assert st_["bound"] == pytest.approx(2 / R, rel=1e-12)
        assert st_["stderr"] == pytest.approx(0, abs=1e-15)
        assert st_["holds"]

    def test_z2_all_n(self):
        g, gs, flow = ball_flow(2, 8)
        prof = ball_profile(g, g.center, 8)
        batch = sample_paths(flow, 20_000, seed=9)
        for n in range(1, 9):
            res = first_exit_stats(batch, prof, n, 8)
            assert res["holds"] and res["tail_domination_violations"] == 0
            assert all(m["holds"] for m in res["moment_checks"].values())

    def test_n_out_of_range(self):
        g, gs, flow = ball_flow(2, 4)
        with pytest.raises(GraphError):
            first_exit_stats(sample_paths(flow, 10, 0), ball_profile(g, g.center, 4), 5, 4)


class TestLR:
    def test_z1_closed_form(self):
        # segment with boundary at |x| = 10 is the ball of radius 9
        g, gs, flow = ball_flow(1, 9)
        out = lr_energy(gs, 2.0, flow=flow)
        x = np.arange(-9, 10)
        assert out["L_R"] == pytest.approx(np.sum(((10 - np.abs(x)) / 2) ** 2 * 2), rel=1e-10)
        n = np.arange(1, 10)
        assert out["lower_bound"] == pytest.approx(0.25 * np.sum(n * (10 - n) / 2), rel=1e-12)
        assert out["holds"] and out["path_mass_ok"]

    def test_q_near_one(self):
        _, gs, _ = ball_flow(2, 5)
        out = lr_energy(gs, 1.0 + 1e-9)
        assert out["lower_bound"] < 1e-6 and out["holds"]

    @pytest.mark.parametrize("d,R", [(1, 5), (2, 5), (2, 10), (3, 5), (3, 10)])
    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    def test_grid(self, d, R, q):
        _, gs, flow = ball_flow(d, R)
        out = lr_energy(gs, q, flow=flow)
        assert out["holds"] and out["path_mass_ok"]

    def test_needs_ball(self):
        g = build_lattice(2, 4)
        gs = green_vector(g, DomainSpec.truncation_interior(g), g.center)
        with pytest.raises(GraphError, match="ball"):
            lr_energy(gs, 2.0)
