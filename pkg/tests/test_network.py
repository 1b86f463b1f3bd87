"""Test network graphs, probing paths and routing matrices."""

import json
import itertools

import numpy as np
import pytest
import networkx as nx

import platont

from .conftest import chain, star


def _dfs_path(net, src, dst):
    adjacency = {}
    for link in net.links:
        adjacency.setdefault(link.a, []).append((link.b, link.id))
        adjacency.setdefault(link.b, []).append((link.a, link.id))
    stack = [(src, None, [])]
    while stack:
        node, parent, links = stack.pop()
        if node == dst:
            return links
        for other, link_id in adjacency.get(node, []):
            if other != parent:
                stack.append((other, node, links + [link_id]))
    return None


class TestGenerateRandomTree:
    def test_two_nodes(self):
        net = platont.generate_random_tree(2, seed=42)
        assert net.node_count == 2
        assert [(l.a, l.b) for l in net.links] == [(0, 1)]

    def test_is_tree(self):
        net = platont.generate_random_tree(19, seed=7)
        assert net.link_count == 18
        graph = net.graph()
        assert nx.is_connected(graph)
        assert nx.is_tree(graph)
        net.validate()

    def test_deterministic(self):
        a = platont.generate_random_tree(19, seed=7)
        b = platont.generate_random_tree(19, seed=7)
        assert json.dumps(a.to_data()) == json.dumps(b.to_data())

    def test_too_small(self):
        with pytest.raises(platont.InvalidArgumentError):
            platont.generate_random_tree(1, seed=0)


class TestLoadTopology:
    def test_chain(self, tmp_path):
        path = tmp_path / "topo.json"
        path.write_text(
            json.dumps({"nodes": 3, "links": [
                {"id": 0, "a": 0, "b": 1},
                {"id": 1, "a": 1, "b": 2},
            ]})
        )
        net = platont.load_topology(path)
        assert net.node_count == 3
        assert net.link_count == 2
        assert net.capacities.tolist() == [100.0, 100.0]

    def test_duplicate_link_id(self, tmp_path):
        path = tmp_path / "topo.json"
        path.write_text(
            json.dumps({"nodes": 3, "links": [
                {"id": 0, "a": 0, "b": 1},
                {"id": 0, "a": 1, "b": 2},
            ]})
        )
        with pytest.raises(platont.ValidationError, match="Duplicate link IDs"):
            platont.load_topology(path)

    def test_disconnected(self, tmp_path):
        path = tmp_path / "topo.json"
        path.write_text(
            json.dumps({"nodes": 4, "links": [
                {"id": 0, "a": 0, "b": 1},
                {"id": 1, "a": 2, "b": 3},
            ]})
        )
        with pytest.raises(platont.ValidationError, match=r"\[\[2, 3\]\]"):
            platont.load_topology(path)

    def test_parse_failure(self, tmp_path):
        path = tmp_path / "topo.json"
        path.write_text("{not json")
        with pytest.raises(platont.FormatError):
            platont.load_topology(path)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "topo.json"
        path.write_text(json.dumps({"links": []}))
        with pytest.raises(platont.FormatError):
            platont.load_topology(path)

    def test_save_then_load(self, tmp_path):
        net = platont.generate_random_tree(12, seed=1)
        platont.save_topology(net, tmp_path / "topo.json")
        assert platont.load_topology(tmp_path / "topo.json") == net


class TestEnumeratePaths:
    def test_chain(self):
        paths = platont.enumerate_paths(chain(), [(0, 2)])
        assert paths.paths[0].link_ids == (0, 1)

    def test_star(self):
        paths = platont.enumerate_paths(star(), [(1, 2)])
        assert paths.paths[0].link_ids == (0, 1)

    def test_matches_dfs(self):
        net = platont.generate_random_tree(19, seed=11)
        pairs = list(itertools.combinations(net.leaves(), 2))
        paths = platont.enumerate_paths(net, pairs)
        for path in paths:
            assert list(path.link_ids) == _dfs_path(net, path.src, path.dst)
        paths.validate(net)

    def test_unreachable(self):
        net = platont.Network(
            node_count=3,
            links=[platont.Link(id=0, a=0, b=1), platont.Link(id=1, a=1, b=2)],
            directed=True,
        )
        with pytest.raises(platont.UnreachablePairError, match="node 2 to node 0"):
            platont.enumerate_paths(net, [(2, 0)])

    def test_same_endpoints(self):
        with pytest.raises(platont.InvalidArgumentError):
            platont.enumerate_paths(chain(), [(1, 1)])

    def test_lexicographic_tie_break(self):
        links = [
            platont.Link(id=0, a=0, b=2),
            platont.Link(id=1, a=0, b=1),
            platont.Link(id=2, a=1, b=3),
            platont.Link(id=3, a=2, b=3),
        ]
        net = platont.Network(node_count=4, links=links)
        paths = platont.enumerate_paths(net, [(0, 3)])
        assert paths.paths[0].link_ids == (1, 2)


class TestBuildRoutingMatrix:
    def test_chain(self):
        net = chain()
        routing = platont.build_routing_matrix(
            net, platont.enumerate_paths(net, [(0, 2)])
        )
        assert routing.entries.tolist() == [[1.0, 1.0]]

    def test_star(self):
        net = star()
        paths = platont.enumerate_paths(net, [(1, 2), (1, 3), (2, 3)])
        routing = platont.build_routing_matrix(net, paths)
        np.testing.assert_array_equal(routing.entries.sum(axis=1), [2, 2, 2])
        assert routing.path_index == [(1, 2), (1, 3), (2, 3)]
        assert routing.paths_through(0).tolist() == [0, 1]

    def test_row_sums_are_hop_counts(self):
        net = platont.generate_random_tree(19, seed=2)
        paths = platont.enumerate_paths(net, platont.default_probe_pairs(net))
        routing = platont.build_routing_matrix(net, paths)
        expected = [len(_dfs_path(net, p.src, p.dst)) for p in paths]
        np.testing.assert_array_equal(routing.entries.sum(axis=1), expected)
        assert [p.hop_count for p in paths] == expected
        assert set(np.unique(routing.entries)) <= {0.0, 1.0}


class TestDefaultProbePairs:
    def test_tree_leaf_pairs(self):
        net = star(4)
        pairs = platont.default_probe_pairs(net)
        assert pairs == list(itertools.combinations([1, 2, 3, 4], 2))

    def test_capped_on_general_graph(self):
        links = [
            platont.Link(id=i, a=a, b=b)
            for i, (a, b) in enumerate(itertools.combinations(range(6), 2))
        ]
        net = platont.Network(node_count=6, links=links)
        pairs = platont.default_probe_pairs(net, seed=3, max_paths=5)
        assert len(pairs) == 5
        assert pairs == sorted(pairs)
        assert pairs == platont.default_probe_pairs(net, seed=3, max_paths=5)
