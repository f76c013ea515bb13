import io
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connected_graph
from graphgreen.errors import CensoredProfileError, EdgeListParseError, GraphError, ResourceError
from graphgreen.graph import (DomainSpec, WeightedGraph, ball_profile, build_box, build_lattice,
                              build_orthant, build_symmetric_lattice, l1_ball_size, load_edge_list)


class TestLatticeBuilders:
    def test_path_graph(self):
        g = build_lattice(1, 3)
        assert (g.n, g.num_edges) == (7, 6)
        assert np.all(g.measure[~g.truncated] == 2)

    def test_l1_ball_sizes(self):
        g = build_lattice(2, 1)
        assert g.n == 5
        assert g.measure[g.center] == 4
        assert build_lattice(3, 2).n == 25

    @given(d=st.integers(1, 4), r=st.integers(0, 6))
    def test_ball_size_formula_matches_enumeration(self, d, r):
        pts = [p for p in itertools.product(range(-r, r + 1), repeat=d) if sum(map(abs, p)) <= r]
        assert l1_ball_size(d, r) == len(pts)

    def test_box_is_a_cube(self):
        g = build_box(2, 3)
        assert g.n == 49
        assert g.truncated.sum() == 24

    def test_orthant_halfspace(self):
        g, dom = build_orthant(3, 1, [4, 4, 4])
        inner = g.coords[dom.interior]
        assert inner[:, 0].min() == 1 and inner[:, 0].max() == 4
        assert 0 in set(g.coords[dom.boundary][:, 0])

    def test_orthant_corner(self):
        _, dom = build_orthant(3, 3, [3, 3, 3])
        assert dom.size == 27

    def test_orthant_membership(self):
        g, dom = build_orthant(4, 2, [2, 2, 2, 2])
        assert np.all(g.coords[dom.interior][:, :2] >= 1)

    def test_vertex_cap(self, monkeypatch):
        monkeypatch.setenv("GRAPHGREEN_MAX_VERTICES", "100")
        with pytest.raises(ResourceError):
            build_lattice(3, 10)


class TestInvariants:
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40), extra=st.integers(0, 60))
    def test_symmetry_and_measure_identity(self, seed, n, extra):
        g = random_connected_graph(np.random.default_rng(seed), n, extra)
        for a, b in zip(g.edges_u, g.edges_v):
            assert g.conductance(a, b) == g.conductance(b, a)
        assert np.array_equal(g.recompute_measure(), g.measure)

    def test_rejects_bad_input(self):
        with pytest.raises(GraphError, match="nonpositive"):
            WeightedGraph(2, [0], [1], [0.0])
        with pytest.raises(GraphError, match="self-loop"):
            WeightedGraph(2, [0, 1], [1, 1], [1.0, 1.0])
        with pytest.raises(GraphError, match="connected"):
            WeightedGraph(3, [0], [1], [1.0])
        with pytest.raises(GraphError, match="duplicate"):
            WeightedGraph(2, [0, 1], [1, 0], [1.0, 1.0])


class TestEdgeList:
    def test_path(self):
        g = load_edge_list("0 1 1.0\n1 2 1.0\n")
        assert g.n == 3 and g.num_edges == 2

    def test_negative_weight(self):
        with pytest.raises(EdgeListParseError, match="nonpositive conductance"):
            load_edge_list("0 1 1.0\n1 2 -1\n")

    def test_line_number_reported(self):
        with pytest.raises(EdgeListParseError, match="line 3"):
            load_edge_list("# header\n0 1 1\n1 2\n")

    def test_triangle_measure(self):
        g = load_edge_list(io.StringIO("0 1 1\n1 2 3\n0 2 2\n"))
        assert g.measure.tolist() == [3.0, 4.0, 5.0]

    def test_other_components_dropped(self):
        g = load_edge_list("0 1 1\n2 3 1\n", root=3)
        assert g.n == 2 and g.center == 1

    def test_missing_root(self):
        with pytest.raises(GraphError, match="root"):
            load_edge_list("0 1 1\n", root=5)

    def test_file_path(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("0 1 2.5\n")
        assert load_edge_list(p).measure.tolist() == [2.5, 2.5]


class TestProfile:
    def test_z1(self):
        g = build_lattice(1, 12)
        prof = ball_profile(g, g.center, 10)
        n = np.arange(11)
        assert np.array_equal(prof.volumes, 2 * (2 * n + 1))
        assert np.all(prof.cut_conductances == 2)

    def test_z2_first_ball(self):
        g = build_lattice(2, 3)
        assert ball_profile(g, g.center, 2).volumes[1] == 20

    def test_censored(self):
        g = build_lattice(2, 5)
        with pytest.raises(CensoredProfileError):
            ball_profile(g, g.center, 5)
        with pytest.raises(CensoredProfileError):
            DomainSpec.ball(g, g.center, 5)

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 60), extra=st.integers(0, 80))
    def test_mass_bound_any_graph(self, seed, n, extra):
        g = random_connected_graph(np.random.default_rng(seed), n, extra)
        r = int(g.bfs_distances(0).max())
        assert ball_profile(g, 0, r).check_mass_bound()

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_quotient_matches_full_graph(self, d):
        R = 6
        q = build_symmetric_lattice(d, R + 1)
        full = build_lattice(d, R + 1)
        pq, pf = ball_profile(q, q.center, R), ball_profile(full, full.center, R)
        np.testing.assert_allclose(pq.volumes, pf.volumes)
        np.testing.assert_allclose(pq.cut_conductances, pf.cut_conductances)
        assert q.orbit_size[q.center] == 1
        assert q.orbit_size.sum() == full.n


class TestDomains:
    def test_ball_boundary_is_next_sphere(self):
        g = build_lattice(2, 6)
        dom = DomainSpec.ball(g, g.center, 3)
        dist = g.bfs_distances(g.center)
        assert np.all(dist[dom.interior] <= 3)
        assert np.all(dist[dom.boundary] == 4)

    def test_truncation_layer_refused(self):
        g = build_lattice(1, 3)
        with pytest.raises(CensoredProfileError):
            DomainSpec.from_vertices(g, [0, 1, 2])

    def test_empty_boundary_is_singular(self):
        g = load_edge_list("0 1 1\n1 2 1\n")
        dom = DomainSpec.from_vertices(g, [0, 1, 2])
        with pytest.raises(GraphError, match="empty boundary"):
            dom.check_solvable()

    def test_dirichlet_matrix_is_spd(self):
        g = build_lattice(2, 4)
        k = DomainSpec.truncation_interior(g).dirichlet_matrix.toarray()
        assert np.allclose(k, k.T)
        assert np.linalg.eigvalsh(k).min() > 0
