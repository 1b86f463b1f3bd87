"""Test synthetic network states, measurements, noise and datasets."""

import numpy as np
import pytest

import platont
from platont import _simulation

from .conftest import chain


def _link_state(delay, loss, bandwidth):
    delay = np.asarray(delay, dtype=float)
    return _simulation.LinkState(
        delay=delay,
        loss_rate=np.asarray(loss, dtype=float),
        avail_bandwidth=np.asarray(bandwidth, dtype=float),
        utilization=np.zeros_like(delay),
        congested=np.zeros(delay.shape, dtype=bool),
    )


class TestSimulateStates:
    def test_default_arguments(self):
        net = platont.generate_random_tree(5, seed=0)
        states = platont.simulate_states(net, 4, 3, seed=0)
        assert [s.latent.timestamp for s in states] == [0, 1, 2]
        assert states[0].latent.z_true.shape == (4,)
        assert states[0].links.delay.shape == (net.link_count,)
        assert np.all(np.isfinite(states[0].latent.z_true))

    def test_zero_loading(self):
        net = chain()
        loading = _simulation.LinkLoading(
            weights=np.zeros((2, 1)), biases=np.zeros(2), base_delays=np.ones(2)
        )
        states = platont.simulate_states(net, 1, 1, seed=0, loading=loading)
        assert len(states) == 1
        np.testing.assert_allclose(states[0].links.utilization, 0.5)
        assert not states[0].links.congested.any()

    def test_deterministic(self, small_tree):
        a = platont.simulate_states(small_tree, 4, 10, seed=9)
        b = platont.simulate_states(small_tree, 4, 10, seed=9)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.latent.z_true, y.latent.z_true)
            np.testing.assert_array_equal(x.links.delay, y.links.delay)

    def test_link_domains(self, small_tree):
        for state in platont.simulate_states(small_tree, 4, 20, seed=1):
            assert np.all(state.links.delay > 0.0)
            assert np.all((state.links.loss_rate >= 0) & (state.links.loss_rate <= 1))
            assert np.all(state.links.avail_bandwidth >= 0.0)

    def test_bad_horizon(self, small_tree):
        with pytest.raises(platont.InvalidArgumentError):
            platont.simulate_states(small_tree, 4, 0, seed=1)

    @pytest.mark.slow
    def test_stationary_variance(self):
        states = platont.simulate_states(chain(), 2, 20000, seed=6)
        z = np.stack([s.latent.z_true for s in states])
        expected = 0.01 / (1.0 - 0.81)
        assert z.var(axis=0).mean() == pytest.approx(expected, rel=0.1)


class TestAggregatePath:
    def test_delay_adds(self):
        state = _link_state([2.0, 3.0], [0.0, 0.0], [1.0, 1.0])
        assert _simulation.aggregate_path(state, [0, 1]).delay == pytest.approx(5.0)

    def test_loss_compounds(self):
        state = _link_state([1.0, 1.0], [0.1, 0.2], [1.0, 1.0])
        result = _simulation.aggregate_path(state, [0, 1])
        assert result.loss_rate == pytest.approx(0.28)

    def test_bandwidth_bottleneck(self):
        state = _link_state([1.0, 1.0], [0.0, 0.0], [10.0, 5.0])
        assert _simulation.aggregate_path(state, [0, 1]).bottleneck_bw == 5.0

    def test_loss_matches_packet_drops(self):
        losses = [0.05, 0.2, 0.1]
        state = _link_state([1.0] * 3, losses, [1.0] * 3)
        expected = _simulation.aggregate_path(state, [0, 1, 2]).loss_rate

        packets = 100000
        rng = np.random.default_rng(11)
        delivered = np.ones(packets, dtype=bool)
        for loss in losses:
            delivered &= rng.random(packets) >= loss
        observed = 1.0 - delivered.mean()
        tolerance = 3.0 * np.sqrt(expected * (1.0 - expected) / packets)
        assert abs(observed - expected) < tolerance

    def test_empty(self):
        state = _link_state([1.0], [0.0], [1.0])
        with pytest.raises(platont.InvalidArgumentError):
            _simulation.aggregate_path(state, [])

    def test_vectorised_agrees(self, small_tree):
        paths = platont.enumerate_paths(
            small_tree, platont.default_probe_pairs(small_tree)
        )
        routing = platont.build_routing_matrix(small_tree, paths)
        state = platont.simulate_states(small_tree, 4, 1, seed=2)[0].links
        delay, loss, bandwidth = _simulation.measure_paths(
            state.delay, state.loss_rate, state.avail_bandwidth, routing.entries
        )
        for i, path in enumerate(paths):
            expected = _simulation.aggregate_path(state, path)
            assert delay[0, i] == pytest.approx(expected.delay)
            assert loss[0, i] == pytest.approx(expected.loss_rate)
            assert bandwidth[0, i] == pytest.approx(expected.bottleneck_bw)


class TestInjectNoise:
    @pytest.fixture
    def clean(self):
        rng = np.random.default_rng(0)
        return platont.IndicatorBatch(
            delay=rng.uniform(5.0, 10.0, size=(20, 4)),
            loss=rng.uniform(0.0, 0.1, size=(20, 4)),
            bandwidth=rng.uniform(10.0, 50.0, size=(20, 4)),
            timestamps=np.arange(20),
        )

    def test_small_noise_limit(self, clean):
        noisy = platont.inject_noise(clean, 1e-12, "channel", seed=0)
        for a, b in zip(noisy.channels, clean.channels):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_channel_noise_keeps_zeros(self, clean):
        clean.loss[:, 1] = 0.0
        noisy = platont.inject_noise(clean, 0.2, "channel", seed=2)
        np.testing.assert_array_equal(noisy.loss[:, 1], 0.0)
        assert np.all(noisy.loss[:, 0] != clean.loss[:, 0])

    def test_channel_relative_rms(self):
        rng = np.random.default_rng(3)
        clean = platont.IndicatorBatch(
            delay=rng.uniform(5.0, 10.0, size=(100, 100)),
            loss=rng.uniform(0.01, 0.1, size=(100, 100)),
            bandwidth=rng.uniform(10.0, 50.0, size=(100, 100)),
            timestamps=np.arange(100),
        )
        noisy = platont.inject_noise(clean, 0.1, "channel", seed=8)
        relative = (noisy.delay - clean.delay) / clean.delay
        rms = np.sqrt(np.mean(relative ** 2))
        assert rms == pytest.approx(0.1, abs=3 * 0.1 / np.sqrt(2 * relative.size))

    @pytest.mark.parametrize("kind", ["channel", "random"])
    def test_domains(self, clean, kind):
        noisy = platont.inject_noise(clean, 2.0, kind, seed=1)
        assert np.all(noisy.delay >= 0.0)
        assert np.all((noisy.loss >= 0.0) & (noisy.loss <= 1.0))
        assert np.all(noisy.bandwidth >= 0.0)
        assert noisy.noise_level == 2.0

    def test_row_noise_independent_of_subset(self, clean):
        full = platont.inject_noise(clean, 0.1, "channel", seed=4)
        part = platont.inject_noise(clean.take(slice(5, 10)), 0.1, "channel", seed=4)
        np.testing.assert_array_equal(full.delay[5:10], part.delay)

    def test_workers_agree(self, clean):
        a = platont.inject_noise(clean, 0.1, "channel", seed=4, workers=1)
        b = platont.inject_noise(clean, 0.1, "channel", seed=4, workers=3)
        np.testing.assert_array_equal(a.bandwidth, b.bandwidth)

    def test_unknown_kind(self, clean):
        with pytest.raises(platont.InvalidArgumentError):
            platont.inject_noise(clean, 0.1, "pink", seed=0)

    def test_non_positive_level(self, clean):
        with pytest.raises(platont.InvalidArgumentError):
            platont.inject_noise(clean, 0.0, "channel", seed=0)


class TestOdScenario:
    def test_single_pair_single_link(self):
        net = chain(2)
        paths = platont.enumerate_paths(net, [(0, 1)])
        scenario = _simulation.generate_od_scenario(
            net, paths, seed=0, total_demand=7.0
        )
        assert scenario.flows.tolist() == pytest.approx([7.0])
        assert scenario.link_loads.tolist() == pytest.approx([7.0])

    def test_loads_sum_traversing_flows(self, small_tree):
        paths = platont.enumerate_paths(
            small_tree, platont.default_probe_pairs(small_tree)
        )
        scenario = _simulation.generate_od_scenario(small_tree, paths, seed=4)
        expected = np.zeros(small_tree.link_count)
        for path, flow in zip(paths, scenario.flows):
            for link in path.link_ids:
                expected[link] += flow
        np.testing.assert_allclose(scenario.link_loads, expected)
        assert np.all(scenario.flows >= 0.0)
        assert scenario.flows.sum() == pytest.approx(1000.0)


class TestBuildDataset:
    def test_clean_count(self, small_tree):
        paths = platont.enumerate_paths(
            small_tree, platont.default_probe_pairs(small_tree)
        )
        dataset = platont.build_dataset(small_tree, paths, 100, clean_fraction=0.2)
        assert dataset.clean_mask.sum() == 20
        assert _simulation.clean_count(100, 0.2) == 20

    def test_all_clean(self, small_tree):
        paths = platont.enumerate_paths(
            small_tree, platont.default_probe_pairs(small_tree)
        )
        dataset = platont.build_dataset(small_tree, paths, 10, clean_fraction=1.0)
        assert dataset.clean_mask.all()

    def test_shapes(self, small_dataset):
        paths = len(small_dataset.paths)
        links = small_dataset.network.link_count
        assert small_dataset.size == 48
        assert small_dataset.noisy.delay.shape == (48, paths)
        assert small_dataset.link_delays.shape == (48, links)
        assert small_dataset.od_flows.shape == (48, paths)
        assert small_dataset.indicator_dims == {
            "delay": paths, "loss": paths, "bandwidth": paths
        }

    def test_od_flows_reproduce_loads(self, small_dataset):
        assert np.all(small_dataset.od_flows >= 0.0)
        loads = small_dataset.od_flows @ small_dataset.od_routing.T
        np.testing.assert_allclose(loads, small_dataset.link_loads, rtol=1e-12)

    def test_od_flows_follow_gravity(self, small_dataset):
        flows = small_dataset.od_flows
        shares = flows / flows.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(shares, np.broadcast_to(shares[0], shares.shape))
        assert flows.sum(axis=1).mean() == pytest.approx(1000.0)

    def test_short_horizon(self, small_tree):
        paths = platont.enumerate_paths(small_tree, [(0, 1)])
        with pytest.raises(platont.InvalidArgumentError):
            platont.build_dataset(small_tree, paths, 1)

    def test_save_then_load(self, small_dataset, tmp_path):
        platont.save_dataset(small_dataset, tmp_path / "data.json")
        loaded = platont.load_dataset(tmp_path / "data.json")
        assert loaded.header() == small_dataset.header()
        np.testing.assert_allclose(loaded.noisy.delay, small_dataset.noisy.delay)
        np.testing.assert_array_equal(loaded.clean_mask, small_dataset.clean_mask)
        np.testing.assert_array_equal(
            loaded.link_congested, small_dataset.link_congested
        )

    def test_load_bad_schema(self, small_dataset, tmp_path):
        data = small_dataset.to_data()
        data["header"]["schema_version"] = 99
        platont._common.write_json(tmp_path / "data.json", data)
        with pytest.raises(platont.FormatError, match="schema version"):
            platont.load_dataset(tmp_path / "data.json")

    def test_split(self, small_dataset):
        train, test = small_dataset.split(0.75)
        assert train.size == 36
        assert test.size == 12
        assert test.noisy.timestamps[0] == 36
