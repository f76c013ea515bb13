import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connected_graph
from graphgreen.criteria import testing_bound as tbound
from graphgreen.criteria import (BOUNDED, GROWING, INCONCLUSIVE, PotentialWeight, VolumeTail,
                                 b_criterion_series, b_tail_sums, classify, classify_doubling,
                                 construct_supersolution, g_power_inequality_check,
                                 implication_chain, lattice_volume, potential_ratio,
                                 quasi_metric_tail, r_grid, sample_three_g, tem1_conditions,
                                 thm_main_conditions, three_g_constant,
                                 volume_series)
from graphgreen.errors import GraphError
from graphgreen.graph import (DomainSpec, WeightedGraph, ball_profile, build_box, build_lattice,
                              build_symmetric_lattice)
from graphgreen.lattice import region_ball
from graphgreen.solver import GreenProvider, green_vector

ONE = PotentialWeight.constant()


def sym_profile(d, N):
    g = build_symmetric_lattice(d, N + 1)
    return ball_profile(g, g.center, N)


def sym_ball(d, R, k=0):
    g = build_symmetric_lattice(d, R + 1, k=k)
    dom = region_ball(g, g.center, R, k) if k else DomainSpec.ball(g, g.center, R)
    return g, dom


class TestClassify:
    def test_short_series(self):
        assert classify(np.arange(7.0)) == INCONCLUSIVE

    def test_linear_growth(self):
        assert classify(np.arange(1, 50.0)) == GROWING

    def test_geometric_convergence(self):
        assert classify(np.cumsum(0.9 ** np.arange(60))) == BOUNDED

    def test_constant(self):
        assert classify(np.ones(20)) == BOUNDED

    def test_doubling_rule(self):
        assert classify_doubling(1.0, 1.05) == BOUNDED
        assert classify_doubling(1.0, 0.8) == BOUNDED
        assert classify_doubling(1.0, 1.5) == GROWING
        assert classify_doubling(1.0, 1.3) == INCONCLUSIVE
        assert classify_doubling(0.0, 1.0) == INCONCLUSIVE


class TestSeries:
    def test_volume_z2_q2_growing(self):
        assert volume_series(sym_profile(2, 60), 2.0, 60).classification == GROWING

    def test_volume_z3_q4_bounded(self):
        assert volume_series(sym_profile(3, 100), 4.0, 100).classification == BOUNDED

    def test_volume_z3_below_threshold_growing(self):
        prof = sym_profile(3, 100)
        for q in (1.5, 2.0, 2.5):
            assert volume_series(prof, q, 100).classification == GROWING

    def test_b_z1_closed_form(self):
        N, q = 30, 2.5
        res = b_criterion_series(sym_profile(1, N), q, N)
        n = np.arange(1, N + 1)
        expected = [np.sum(n[:M] * ((M - n[:M] + 1) / 2) ** (q - 1)) for M in range(1, N + 1)]
        np.testing.assert_allclose(res.values, expected, rtol=1e-12)
        assert res.classification == GROWING

    def test_b_z3_q4_bounded(self):
        assert b_criterion_series(sym_profile(3, 100), 4.0, 100).classification == BOUNDED

    def test_tail_sums(self):
        b = np.array([9.0, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(b_tail_sums(b, 3), [1.75, 0.75, 0.25])

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_implication_chain(self, d):
        out = implication_chain(sym_profile(d, 100), [1.5, 2.0, 3.0, 4.0], 100)
        assert out["counterexamples"] == 0

    def test_rejects_q_le_1(self):
        with pytest.raises(GraphError, match="q must exceed 1"):
            volume_series(sym_profile(2, 10), 1.0, 10)

    def test_report_is_json(self):
        rep = b_criterion_series(sym_profile(2, 12), 2.0, 12)
        json.dumps(rep.to_dict())
        assert len(list(rep.rows())) == 12


class TestTestingBound:
    def test_z2_decreases(self):
        g, _ = sym_ball(2, 60)
        vals = [tbound(green_vector(g, DomainSpec.ball(g, g.center, R), g.center), ONE, 2.0)
                for R in (10, 20, 40, 60)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_z3_q4_stabilizes(self):
        g, _ = sym_ball(3, 40)
        a, b = (tbound(green_vector(g, DomainSpec.ball(g, g.center, R), g.center), ONE, 4.0)
                for R in (20, 40))
        assert 0 < b < a and b / a > 0.98

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 30), q=st.sampled_from([1.5, 2.0, 3.0]))
    def test_conductance_scaling_invariance(self, seed, n, q):
        # doubling all conductances halves g and doubles mu: the bound is unchanged
        g = random_connected_graph(np.random.default_rng(seed), n, n)
        g2 = WeightedGraph(g.n, g.edges_u, g.edges_v, 2 * g.edges_w)
        inner = list(range(n - max(1, n // 4)))
        b1 = tbound(green_vector(g, DomainSpec.from_vertices(g, inner), 0), ONE, q)
        b2 = tbound(green_vector(g2, DomainSpec.from_vertices(g2, inner), 0), ONE, q)
        assert b2 == pytest.approx(b1, rel=1e-8)


class TestRatioAndSupersolution:
    def test_single_vertex(self):
        g = build_lattice(3, 2)
        dom = DomainSpec.from_vertices(g, [g.center])
        res = potential_ratio(g, dom, ONE, 3.0, g.center)
        assert res.sup == pytest.approx(g.measure[g.center] ** -2, rel=1e-14)

    def test_z3_threshold(self):
        g, _ = sym_ball(3, 40)
        sup = {q: [potential_ratio(g, DomainSpec.ball(g, g.center, R), ONE, q, g.center).sup
                   for R in (20, 40)] for q in (2.0, 4.0)}
        assert classify_doubling(*sup[4.0]) == BOUNDED
        assert classify_doubling(*sup[2.0]) == GROWING

    def test_monotone_under_enlargement(self):
        g, _ = sym_ball(3, 16)
        sups = [potential_ratio(g, DomainSpec.ball(g, g.center, R), ONE, 2.5, g.center).sup
                for R in (4, 8, 12, 16)]
        assert all(b >= a for a, b in zip(sups, sups[1:]))

    @pytest.mark.parametrize("d,k,q,R", [(3, 0, 4.0, 20), (3, 0, 4.0, 40), (3, 1, 3.0, 30), (5, 0, 2.0, 12)])
    def test_supersolution_verifies(self, d, k, q, R):
        g, dom = sym_ball(d, R, k)
        sigma = PotentialWeight.orthant_power(0) if k else PotentialWeight.power(1.0 if d == 5 else 0)
        c = potential_ratio(g, dom, sigma, q, g.center).sup * 1.001
        rep = construct_supersolution(g, dom, sigma, q, c, g.center)
        assert rep.verified and rep.min_slack > 0 and rep.unresolved == 0
        assert rep.min_slack == pytest.approx(1 - 1.001 ** -q, rel=1e-6)

    def test_constant_below_sup_fails_at_argmax(self):
        g, dom = sym_ball(3, 12)
        res = potential_ratio(g, dom, ONE, 4.0, g.center)
        rep = construct_supersolution(g, dom, ONE, 4.0, res.sup * 0.99, g.center, shell_width=0)
        assert not rep.verified
        assert rep.argmin == res.argmax

    def test_verification_implies_ratio_bound(self):
        g, dom = sym_ball(3, 15)
        res = potential_ratio(g, dom, ONE, 3.5, g.center)
        for c in res.sup * np.array([0.9, 0.999, 1.0001, 1.5]):
            rep = construct_supersolution(g, dom, ONE, 3.5, c, g.center, shell_width=0)
            if rep.verified:
                assert res.sup <= c

    def test_supersolution_below_testing_bound(self):
        for R in (10, 20):
            g, dom = sym_ball(3, R)
            c = potential_ratio(g, dom, ONE, 4.0, g.center).sup * 1.001
            u = construct_supersolution(g, dom, ONE, 4.0, c, g.center).field.values[g.center]
            assert u <= tbound(green_vector(g, dom, g.center), ONE, 4.0)


class TestThreeG:
    def test_coincident_points(self):
        # z = x: g(x,z) is the pole value and g(z,y) = g(x,y)
        gxy = np.array([0.2, 0.7])
        out = three_g_constant(gxy, np.array([1.0, 1.0]), gxy)
        assert out["kappa_sum_form"] <= 1 and out["kappa_min_form"] <= 1

    def test_z1_segment_grows(self):
        ks = []
        for R in (10, 20, 40):
            g = build_lattice(1, R)
            ks.append(sample_three_g(GreenProvider(DomainSpec.truncation_interior(g)), 30, 20000, 1)
                      ["kappa_sum_form"])
        assert ks[0] < ks[1] < ks[2]

    def test_z3_box_order_one(self):
        ks = []
        for R in (6, 10, 14):
            g = build_box(3, R)
            ks.append(sample_three_g(GreenProvider(DomainSpec.truncation_interior(g)), 30, 20000, 1)
                      ["kappa_sum_form"])
        assert max(ks) < 100 and max(ks) / min(ks) < 3

    def test_quotient_refused(self):
        g, dom = sym_ball(3, 5)
        with pytest.raises(GraphError, match="non-quotient"):
            sample_three_g(GreenProvider(dom), 5, 10, 0)


class TestLevelSets:
    def test_grid_endpoints(self):
        r = r_grid(0.25, 0.01)
        assert r[0] == 4.0 and r[-1] == pytest.approx(100.0)
        assert np.allclose(r[1:-1] / r[:-2], np.sqrt(2))

    def test_large_r_covers_interior(self):
        g, dom = sym_ball(3, 8)
        gs = green_vector(g, dom, g.center)
        r = 1.01 / gs.values[dom.interior].min()
        rep = tem1_conditions(g, dom, ONE, 2.0, g.center, radii=[r])
        from graphgreen.solver import green_operator
        whole, _ = green_operator(dom, np.ones(g.n))
        assert rep.values[0] == pytest.approx(whole[dom.interior].max(), rel=1e-9)

    def test_pole_level_is_empty(self):
        g, dom = sym_ball(3, 8)
        rep = tem1_conditions(g, dom, ONE, 2.0, g.center)
        assert rep.extra["skipped_empty_r"] == [pytest.approx(1 / green_vector(g, dom, g.center).at_pole)]

    def test_z3_fitted_constant(self):
        g, _ = sym_ball(3, 30)
        fit = {q: [tem1_conditions(g, DomainSpec.ball(g, g.center, R), ONE, q, g.center).extra["fitted_C"]
                   for R in (10, 30)] for q in (2.0, 4.0)}
        assert fit[4.0][1] / fit[4.0][0] < 1.25
        assert fit[2.0][1] / fit[2.0][0] > 2


class TestVolumeModel:
    def test_tail_bookkeeping(self):
        t = VolumeTail(lattice_volume(3), 500)
        m = np.arange(1, 501)
        direct = np.sum(m / lattice_volume(3)(m))
        rem, dfit = t.remainder()
        assert t(1) == pytest.approx(direct + rem, rel=1e-14)
        assert dfit == pytest.approx(3, abs=0.01)

    def test_lattice_volume(self):
        prof = sym_profile(3, 10)
        np.testing.assert_allclose(lattice_volume(3)(np.arange(11)), prof.volumes)

    def test_constant_sigma_matches_volume_series(self):
        g = build_lattice(3, 13)
        for q, expect in ((2.0, GROWING), (4.0, BOUNDED)):
            rep = thm_main_conditions(g, g.center, ONE, q, 12)
            assert rep.classification == expect
        assert thm_main_conditions(g, g.center, ONE, 4.0, 12).extra["e2_classification"] == BOUNDED

    def test_weighted_above_threshold(self):
        g = build_lattice(3, 13)
        rep = thm_main_conditions(g, g.center, PotentialWeight.power(1.0), 3.0, 12)
        assert rep.classification == BOUNDED

    def test_needs_full_lattice(self):
        g, _ = sym_ball(3, 6)
        with pytest.raises(GraphError):
            thm_main_conditions(g, g.center, ONE, 2.0, 4)

    def test_quasi_metric(self):
        t = VolumeTail(lattice_volume(3), 20000)
        assert np.isfinite(1 / t(0))
        d = np.arange(10, 60, 10)
        trend = (1 / t(d)) / d
        assert trend.max() / trend.min() < 1.05
        rng = np.random.default_rng(0)
        a = rng.integers(0, 40, size=(2, 2000))
        out = quasi_metric_tail(t, a[0] + a[1], a[0], a[1])
        assert out["kappa"] <= 1.5


class TestPowerInequality:
    def test_delta_like_sigma(self):
        g = build_lattice(2, 8)
        dom = DomainSpec.ball(g, g.center, 6)
        sig = np.zeros(g.n)
        sig[g.center] = 1.0
        out = g_power_inequality_check(g, dom, sig, 2.0)
        gv = green_vector(g, dom, g.center).values * g.measure[g.center]
        # G sigma = mu(o) g(.,o); G[(G sigma) sigma] = G sigma * (G sigma)(o)
        lhs, rhs = gv**2, 2 * gv * gv[g.center]
        slack = (rhs - lhs)[dom.interior]
        assert out["min_slack"] == pytest.approx(slack.min(), rel=1e-8, abs=1e-12)
        assert out["holds"]

    @pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
    def test_z2_ball(self, s):
        g = build_lattice(2, 16)
        out = g_power_inequality_check(g, DomainSpec.ball(g, g.center, 15), ONE, s)
        assert out["holds"] and out["min_slack"] > 0

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 40), s=st.sampled_from([1.5, 2.0, 3.0]))
    def test_random_graphs(self, seed, n, s):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(rng, n, n)
        inner = rng.choice(n, size=n - max(1, n // 5), replace=False)
        dom = DomainSpec.from_vertices(g, inner)
        sig = rng.exponential(size=n) * (rng.uniform(size=n) < 0.6)
        sig[inner[0]] += 0.1
        assert g_power_inequality_check(g, dom, sig, s)["violations"] == 0

    def test_rejects_negative_sigma(self):
        g = build_lattice(1, 4)
        with pytest.raises(GraphError):
            g_power_inequality_check(g, DomainSpec.truncation_interior(g), -np.ones(g.n), 2.0)


class TestWeights:
    def test_power(self):
        g = build_lattice(2, 3)
        s = PotentialWeight.power(2.0).values(g)
        assert s[g.center] == 1.0 and s[g.index_of([1, 0])] == 0.25

    def test_orthant_power_zero_at_origin(self):
        g = build_lattice(2, 3)
        assert PotentialWeight.orthant_power(1.0).values(g)[g.center] == 0.0

    def test_custom_length(self):
        g = build_lattice(1, 2)
        with pytest.raises(GraphError):
            PotentialWeight.custom([1.0, 2.0]).values(g)

    def test_needs_coordinates(self):
        g = WeightedGraph(2, [0], [1], [1.0])
        with pytest.raises(GraphError, match="coordinates"):
            PotentialWeight.power(1.0).values(g)
