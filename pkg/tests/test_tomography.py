"""Test tomography algorithms and metrics."""

import itertools

import numpy as np
import pytest

import platont
from platont import _tomography

from .conftest import finite_difference, star


def _routing(entries):
    entries = np.asarray(entries, dtype=float)
    return platont.RoutingMatrix(
        entries=entries,
        path_index=[(0, i + 1) for i in range(entries.shape[0])],
        link_index=list(range(entries.shape[1])),
    )


def _tree(edges):
    links = [platont.Link(id=i, a=a, b=b) for i, (a, b) in enumerate(edges)]
    return platont.Network(node_count=len(edges) + 1, links=links)


def _minimum_explanations(routing, congested):
    entries = routing.entries > 0.0
    on_normal = entries[~congested].any(axis=0)
    candidates = [i for i in range(entries.shape[1]) if not on_normal[i]]
    for size in range(len(candidates) + 1):
        found = [
            subset
            for subset in itertools.combinations(candidates, size)
            if np.array_equal(entries[:, list(subset)].any(axis=1), congested)
        ]
        if found:
            return found
    return []


class TestDiagnoseCongestedLinks:
    def test_single_link(self):
        result = platont.diagnose_congested_links([5.0], _routing([[1]]), [1.0])
        assert result.predicted == [0]
        assert result.congested_paths.tolist() == [True]

    def test_shared_link(self):
        net = star(4)
        pairs = list(itertools.combinations([1, 2, 3, 4], 2))
        routing = platont.build_routing_matrix(net, platont.enumerate_paths(net, pairs))
        delays = np.array([3.0 if pair in [(1, 2), (1, 3)] else 1.0 for pair in pairs])
        result = platont.diagnose_congested_links(delays, routing, np.full(6, 2.0))
        assert result.predicted == [0]

    def test_no_congestion(self):
        result = platont.diagnose_congested_links(
            [0.5, 0.5], _routing([[1, 0], [0, 1]]), [1.0, 1.0], truth=[1]
        )
        assert result.predicted == []
        assert result.truth == [1]
        np.testing.assert_array_equal(result.scores, [0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(platont.ShapeError):
            platont.diagnose_congested_links([1.0], _routing([[1], [1]]), [0.0, 0.0])

    def test_unique_minimum_explanation(self):
        checked = 0
        for seed in range(20):
            net = platont.generate_random_tree(20, seed=seed)
            degrees = net.degrees()
            leaves = set(net.leaves())
            # leaf links whose inner end branches, one per inner node
            leaf_links = {}
            for link in net.links:
                leaf, inner = (link.a, link.b) if link.a in leaves else (link.b, link.a)
                if leaf in leaves and degrees[inner] >= 3:
                    leaf_links.setdefault(inner, link.id)
            if len(leaf_links) < 2:
                continue

            paths = platont.enumerate_paths(net, platont.default_probe_pairs(net))
            routing = platont.build_routing_matrix(net, paths)
            rng = np.random.default_rng(seed)
            congested = rng.choice(sorted(leaf_links.values()), size=2, replace=False)
            link_delays = np.ones(net.link_count)
            link_delays[congested] = 100.0
            delays = routing.entries @ link_delays
            thresholds = routing.entries.sum(axis=1) + 50.0
            result = platont.diagnose_congested_links(delays, routing, thresholds)

            explanations = _minimum_explanations(routing, delays > thresholds)
            assert explanations == [tuple(sorted(int(x) for x in congested))]
            assert result.predicted == sorted(int(x) for x in congested)
            checked += 1
        assert checked > 0


class TestSolveLinearInverse:
    def test_identity(self):
        y = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(_tomography.solve_linear_inverse(y, np.eye(3)), y)

    def test_ridge_to_prior(self):
        x = _tomography.solve_linear_inverse(
            [10.0], [[1.0, 1.0]], ridge=1e-8, prior=[6.0, 4.0]
        )
        np.testing.assert_allclose(x, [6.0, 4.0], atol=1e-6)

    def test_singular_without_ridge(self):
        with pytest.raises(platont.RankDeficiencyError, match="positive ridge"):
            _tomography.solve_linear_inverse([10.0], [[1.0, 1.0]])

    def test_nonneg(self):
        x = _tomography.solve_linear_inverse(
            [1.0, -1.0], np.eye(2), ridge=1e-6, nonneg=True
        )
        assert np.all(x >= 0.0)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-5)

    def test_negative_ridge(self):
        with pytest.raises(platont.InvalidArgumentError):
            _tomography.solve_linear_inverse([1.0], [[1.0]], ridge=-1.0)


class TestEstimateOd:
    def test_dedicated_links(self):
        loads = np.array([3.0, 7.0, 1.5])
        estimate = platont.estimate_od(loads, np.eye(3), np.zeros(3), ridge=0.0)
        np.testing.assert_allclose(estimate.flows, loads, atol=1e-8)
        assert estimate.residual == pytest.approx(0.0, abs=1e-8)

    def test_gravity_prior_total(self):
        od_routing = np.array([[1.0, 1.0], [0.0, 1.0]])
        prior = _tomography.gravity_prior(
            np.array([1.0, 2.0, 3.0]),
            [(0, 1), (0, 2)],
            np.array([5.0, 3.0]),
            od_routing,
        )
        # prior flows proportional to (2, 3); implied total load equals 8
        assert prior[1] / prior[0] == pytest.approx(1.5)
        assert float(od_routing.sum(axis=0) @ prior) == pytest.approx(8.0)


class TestInferLinkLoads:
    def test_bottleneck_bound(self):
        routing = np.array([[1.0, 1.0], [0.0, 1.0]])
        loads = platont.infer_link_loads(
            np.array([30.0, 60.0]), routing, np.array([100.0, 100.0])
        )
        np.testing.assert_allclose(loads, [70.0, 40.0])

    def test_untraversed_idle(self):
        routing = np.array([[1.0, 0.0]])
        loads = platont.infer_link_loads(
            np.array([[20.0]]), routing, np.array([100.0, 50.0])
        )
        np.testing.assert_allclose(loads, [[80.0, 0.0]])


class TestTaskSurrogates:
    def test_link_labels_match(self):
        routing = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        surrogate = _tomography.make_task_surrogate("link", routing)
        delays = np.array([[1.0, 3.0, 2.0]])
        out = surrogate.apply([delays, np.zeros_like(delays), np.zeros_like(delays)])
        np.testing.assert_allclose(out, [[1.0, 2.0]], atol=0.02)

    def test_link_backward(self):
        rng = np.random.default_rng(0)
        routing = (rng.uniform(size=(5, 3)) > 0.4).astype(float)
        routing[0] = 1.0
        surrogate = _tomography.make_task_surrogate("link", routing)
        channels = [rng.normal(size=(2, 5)) for _ in range(3)]
        upstream = rng.normal(size=(2, 3))

        def objective():
            return float(np.sum(surrogate.apply(channels) * upstream))

        grads = surrogate.backward(channels, upstream)
        np.testing.assert_allclose(
            grads[0], finite_difference(objective, channels[0]), atol=1e-6
        )
        assert not grads[1].any()

    def test_od_backward(self):
        rng = np.random.default_rng(1)
        routing = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])
        capacities = np.array([100.0, 80.0, 120.0])
        surrogate = _tomography.make_task_surrogate(
            "od", routing, capacities, prior=np.full(3, 10.0)
        )
        channels = [
            rng.normal(size=(2, 3)),
            rng.normal(size=(2, 3)),
            rng.uniform(10.0, 70.0, size=(2, 3)),
        ]
        upstream = rng.normal(size=(2, 3))

        def objective():
            return float(np.sum(surrogate.apply(channels) * upstream))

        grads = surrogate.backward(channels, upstream)
        np.testing.assert_allclose(
            grads[2], finite_difference(objective, channels[2]), atol=1e-5
        )

    def test_topology_unsupported(self):
        with pytest.raises(platont.UnsupportedTaskError):
            _tomography.make_task_surrogate("topo", np.eye(2))


class TestInferTopologyRnj:
    def test_three_leaf_star(self):
        net = _tree([(0, 1), (1, 2), (1, 3), (1, 4)])
        covariance = np.full((3, 3), 2.0)
        np.fill_diagonal(covariance, 5.0)
        predicted = platont.infer_topology_rnj(covariance, [2, 3, 4], root=0)
        truth = _tomography.logical_tree(net, 0, [2, 3, 4])
        assert sorted(predicted.labels) == sorted(truth.labels)
        assert platont.metrics(predicted, truth, "topo")["hamming"] == 0.0

    def test_caterpillar(self):
        net = _tree([(0, 1), (1, 2), (1, 3), (3, 4), (3, 5), (5, 6), (5, 7)])
        receivers = [2, 4, 6, 7]
        variances = np.array([1.0, 0.7, 1.3, 0.4, 0.9, 1.1, 0.6])
        covariance = _tomography.shared_path_covariance(net, 0, receivers, variances)
        predicted = platont.infer_topology_rnj(covariance, receivers, root=0)
        truth = _tomography.logical_tree(net, 0, receivers)
        assert "C6,7" in predicted.labels
        assert "C4,6,7" in predicted.labels
        scores = platont.metrics(predicted, truth, "topo")
        assert scores == {"hamming": 0.0, "frobenius": 0.0}

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_tree_exact(self, seed):
        net = platont.generate_random_tree(19, seed=seed)
        leaves = net.leaves()
        root, receivers = leaves[0], leaves[1:]
        variances = np.random.default_rng(seed).uniform(1.0, 2.0, size=net.link_count)
        covariance = _tomography.shared_path_covariance(net, root, receivers, variances)
        predicted = platont.infer_topology_rnj(covariance, receivers, root=root)
        truth = _tomography.logical_tree(net, root, receivers)
        assert platont.metrics(predicted, truth, "topo")["hamming"] == 0.0

    def test_asymmetric(self):
        with pytest.raises(platont.ValidationError):
            platont.infer_topology_rnj(np.array([[1.0, 0.5], [0.2, 1.0]]), [1, 2])


class TestMetrics:
    def test_link_scores(self):
        scores = platont.metrics([1, 2, 3], [2, 3, 4], "link", link_count=10)
        assert scores["tp"] == 2
        assert scores["precision"] == pytest.approx(2 / 3)
        assert scores["recall"] == pytest.approx(2 / 3)
        assert scores["f1"] == pytest.approx(2 / 3)
        assert scores["fpr"] == pytest.approx(1 / 7)

    def test_empty_prediction_empty_truth(self):
        scores = platont.link_scores([], [], 5)
        assert (scores.precision, scores.recall, scores.f1) == (1.0, 1.0, 1.0)

    def test_scores_add(self):
        total = platont.link_scores([1], [1], 3) + platont.link_scores([2], [], 3)
        assert (total.tp, total.fp, total.fn, total.tn) == (1, 1, 0, 4)

    def test_identical_adjacency(self):
        adjacency = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert platont.metrics(adjacency, adjacency, "topo") == {
            "hamming": 0.0,
            "frobenius": 0.0,
        }

    def test_frobenius(self):
        scores = platont.metrics(np.eye(2), np.zeros((2, 2)), "topo")
        assert scores["frobenius"] == pytest.approx(np.sqrt(2.0))
        assert scores["hamming"] == 0.0

    def test_gap(self):
        scores = platont.metrics(np.array([1.0, 3.0]), np.array([0.0, 0.0]), "gap")
        assert scores == {"mean": 2.0, "std": 1.0}

    def test_unknown_kind(self):
        with pytest.raises(platont.InvalidArgumentError):
            platont.metrics([], [], "nope")
