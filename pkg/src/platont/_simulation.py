"""Synthetic network states, path measurements, noise and tomography datasets."""

import enum
import math
import pathlib
import logging
import dataclasses
import typing as t

import numpy as np
import scipy.special

from . import _common
from . import _network
from . import _exceptions

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_LATENT_DIM = 16
DEFAULT_THETA_C = 0.7
DEFAULT_CLEAN_FRACTION = 0.2
DEFAULT_TOTAL_DEMAND_MBPS = 1000.0
LATENT_DECAY = 0.9
LATENT_INNOVATION = 0.1

_LATENT_STREAM = 1
_LOADING_STREAM = 2
_NOISE_STREAM = 3
_CLEAN_STREAM = 4
_OD_STREAM = 5
_INITIAL_STREAM = 6


class NoiseKind(str, enum.Enum):
    """Measurement noise form."""

    channel = "channel"
    """Multiplicative: ``x·(1 + σ·g)``."""

    random = "random"
    """Additive, scaled by the batch standard deviation: ``x + σ·std(x)·g``."""


@dataclasses.dataclass
class LinkLoading(_common.Deserialisable, _common.Serialisable):
    """Fixed mapping from latent congestion factors to link utilisation."""

    weights: np.ndarray
    """Unit-norm loading row per link (links by latent dimension)."""

    biases: np.ndarray
    """Utilisation logit offset per link."""

    base_delays: np.ndarray
    """Uncongested link delay (ms)."""

    @property
    def latent_dim(self) -> int:
        """Latent dimension."""
        return self.weights.shape[1]

    @classmethod
    def sample(
        cls,
        link_count: int,
        latent_dim: int,
        seed: int,
        theta_c: float = DEFAULT_THETA_C,
    ) -> "LinkLoading":
        """Draw a seeded loading.

        Biases sit 0.15 to 0.6 logits below the congestion threshold, so
        links are uncongested at the latent mean and congest on excursions.

        Args:
            link_count: number of links
            latent_dim: latent dimension
            seed: random seed
            theta_c: congestion threshold
        """

        rng = _common.make_rng(seed, _LOADING_STREAM)
        weights = rng.normal(size=(link_count, latent_dim))
        weights /= np.linalg.norm(weights, axis=1, keepdims=True)
        biases = scipy.special.logit(theta_c) - rng.uniform(0.15, 0.6, size=link_count)
        base_delays = rng.uniform(1.0, 10.0, size=link_count)
        return cls(weights=weights, biases=biases, base_delays=base_delays)

    @classmethod
    def from_data(cls, data) -> "LinkLoading":
        return cls(
            weights=np.array(data["weights"], dtype=float),
            biases=np.array(data["biases"], dtype=float),
            base_delays=np.array(data["base_delays"], dtype=float),
        )

    def to_data(self):
        return {
            "weights": self.weights,
            "biases": self.biases,
            "base_delays": self.base_delays,
        }


@dataclasses.dataclass
class LatentCongestion:
    """Latent congestion factors at one time step."""

    z_true: np.ndarray
    """Latent vector."""

    timestamp: int
    """Time step."""


@dataclasses.dataclass
class LinkState:
    """Per-link ground truth at one time step, arrays indexed by link ID."""

    delay: np.ndarray
    """Link delay (ms)."""

    loss_rate: np.ndarray
    """Packet loss probability."""

    avail_bandwidth: np.ndarray
    """Available bandwidth (Mbps)."""

    utilization: np.ndarray
    """Utilisation, in (0, 1)."""

    congested: np.ndarray
    """Utilisation exceeds the congestion threshold."""


@dataclasses.dataclass
class NetworkState:
    """Latent state and resulting link ground truth at one time step."""

    latent: LatentCongestion
    """Latent congestion factors."""

    links: LinkState
    """Link ground truth."""


@dataclasses.dataclass
class PathMeasurement:
    """Measured indicators of one path."""

    delay: float
    """End-to-end delay (ms)."""

    loss_rate: float
    """End-to-end loss probability."""

    bottleneck_bw: float
    """Bottleneck available bandwidth (Mbps)."""

    timestamp: int = 0
    """Time step."""

    noise_level: float = 0.0
    """Noise level applied, 0 for clean measurements."""


@dataclasses.dataclass
class IndicatorBatch:
    """Path-level indicators for a batch of time steps.

    Each channel is an array of time steps by paths.
    """

    delay: np.ndarray
    """Path delays (ms)."""

    loss: np.ndarray
    """Path loss probabilities."""

    bandwidth: np.ndarray
    """Path bottleneck available bandwidths (Mbps)."""

    timestamps: np.ndarray
    """Time step of each row."""

    noise_level: float = 0.0
    """Noise level applied, 0 for clean measurements."""

    @property
    def size(self) -> int:
        """Number of rows."""
        return self.delay.shape[0]

    @property
    def channels(self) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Channel arrays, in indicator order."""
        return self.delay, self.loss, self.bandwidth

    def stacked(self) -> np.ndarray:
        """Channels concatenated column-wise."""
        return np.concatenate(self.channels, axis=1)

    def take(self, rows: t.Union[np.ndarray, slice]) -> "IndicatorBatch":
        """Select rows."""
        return IndicatorBatch(
            delay=self.delay[rows],
            loss=self.loss[rows],
            bandwidth=self.bandwidth[rows],
            timestamps=self.timestamps[rows],
            noise_level=self.noise_level,
        )

    def replace(self, channels: t.Sequence[np.ndarray]) -> "IndicatorBatch":
        """Copy with new channel arrays (eg denoised indicators)."""
        delay, loss, bandwidth = channels
        return dataclasses.replace(
            self,
            delay=np.asarray(delay),
            loss=np.asarray(loss),
            bandwidth=np.asarray(bandwidth),
        )

    def clamped(self) -> "IndicatorBatch":
        """Copy with every channel projected into its domain."""
        return self.replace((
            np.clip(self.delay, 0.0, None),
            np.clip(self.loss, 0.0, 1.0),
            np.clip(self.bandwidth, 0.0, None),
        ))

    def to_rows(self) -> t.List[t.Dict[str, t.List[float]]]:
        """Per-row JSON data."""
        columns = zip(self.delay.tolist(), self.loss.tolist(), self.bandwidth.tolist())
        return [{"delay": d, "loss": l, "bandwidth": b} for d, l, b in columns]

    @classmethod
    def from_rows(
        cls,
        rows: t.Sequence[t.Dict[str, t.List[float]]],
        timestamps: np.ndarray,
        noise_level: float = 0.0,
    ) -> "IndicatorBatch":
        """Build from per-row JSON data."""
        return cls(
            delay=np.array([r["delay"] for r in rows], dtype=float),
            loss=np.array([r["loss"] for r in rows], dtype=float),
            bandwidth=np.array([r["bandwidth"] for r in rows], dtype=float),
            timestamps=np.asarray(timestamps, dtype=int),
            noise_level=noise_level,
        )


@dataclasses.dataclass
class OdScenario:
    """Gravity-model origin-destination traffic over the probing pairs."""

    pairs: t.List[t.Tuple[int, int]]
    """Origin-destination pairs, in path order."""

    masses: np.ndarray
    """Node masses."""

    flows: np.ndarray
    """Flow per pair (Mbps)."""

    od_routing: np.ndarray
    """Pair-to-link incidence (links by pairs)."""

    link_loads: np.ndarray
    """Load per link (Mbps)."""


def link_state_from_latent(
    z: np.ndarray,
    loading: LinkLoading,
    capacities: np.ndarray,
    theta_c: float = DEFAULT_THETA_C,
) -> LinkState:
    """Compute link ground truth from a latent vector.

    Args:
        z: latent vector
        loading: latent-to-utilisation mapping
        capacities: link capacities (Mbps)
        theta_c: congestion threshold

    Returns:
        link ground truth
    """

    utilization = scipy.special.expit(loading.weights @ z + loading.biases)
    return LinkState(
        delay=loading.base_delays * (1.0 + 4.0 * utilization ** 2),
        loss_rate=0.001 + 0.3 * np.maximum(0.0, utilization - theta_c) / (1 - theta_c),
        avail_bandwidth=capacities * (1.0 - utilization),
        utilization=utilization,
        congested=utilization > theta_c,
    )


def simulate_states(
    net: _network.Network,
    latent_dim: int,
    horizon: int,
    seed: int,
    theta_c: float = DEFAULT_THETA_C,
    loading: LinkLoading = None,
) -> t.List[NetworkState]:
    """Simulate latent congestion and link ground truth.

    The latent vector follows ``z[t+1] = 0.9·z[t] + 0.1·η[t]``, starting
    from its stationary distribution; innovation ``η[t]`` is drawn from a
    stream keyed by the time step.

    Args:
        net: network
        latent_dim: latent dimension, at least 1
        horizon: number of time steps, at least 1
        seed: random seed
        theta_c: congestion threshold, in (0, 1)
        loading: latent-to-utilisation mapping, sampled from the seed if
            not given

    Returns:
        state per time step

    Raises:
        InvalidArgumentError: parameters out of range
    """

    if latent_dim < 1:
        raise _exceptions.InvalidArgumentError(
            f"Latent dimension must be positive: {latent_dim}"
        )
    if horizon < 1:
        raise _exceptions.InvalidArgumentError(f"Horizon must be positive: {horizon}")
    if not 0.0 < theta_c < 1.0:
        raise _exceptions.InvalidArgumentError(
            f"Congestion threshold not in (0, 1): {theta_c}"
        )
    if loading is None:
        loading = LinkLoading.sample(net.link_count, latent_dim, seed, theta_c=theta_c)
    if loading.weights.shape != (net.link_count, latent_dim):
        raise _exceptions.ShapeError(
            f"Loading shape {loading.weights.shape} does not match "
            f"({net.link_count}, {latent_dim})"
        )

    stationary_std = LATENT_INNOVATION / math.sqrt(1.0 - LATENT_DECAY ** 2)
    capacities = net.capacities
    initial = _common.make_rng(seed, _INITIAL_STREAM).normal(size=latent_dim)
    z = stationary_std * initial
    states = []
    for step in range(horizon):
        if step:
            eta = _common.make_rng(seed, _LATENT_STREAM, step).normal(size=latent_dim)
            z = LATENT_DECAY * z + LATENT_INNOVATION * eta
        links = link_state_from_latent(z, loading, capacities, theta_c=theta_c)
        latent = LatentCongestion(z_true=z.copy(), timestamp=step)
        states.append(NetworkState(latent=latent, links=links))
    return states


def aggregate_path(
    link_state: LinkState,
    path: t.Union[_network.Path, t.Sequence[int]],
    timestamp: int = 0,
) -> PathMeasurement:
    """Aggregate link ground truth along a path.

    Delay adds, loss compounds multiplicatively and bandwidth is the
    bottleneck.

    Args:
        link_state: link ground truth
        path: path, or its link IDs
        timestamp: time step to record

    Returns:
        clean path measurement

    Raises:
        InvalidArgumentError: empty path or unknown link
    """

    link_ids = list(path.link_ids if isinstance(path, _network.Path) else path)
    if not link_ids:
        raise _exceptions.InvalidArgumentError("Cannot aggregate over an empty path")
    link_count = link_state.delay.shape[0]
    unknown = [i for i in link_ids if not 0 <= i < link_count]
    if unknown:
        raise _exceptions.InvalidArgumentError(f"Unknown link IDs on path: {unknown}")

    return PathMeasurement(
        delay=float(np.sum(link_state.delay[link_ids])),
        loss_rate=float(1.0 - np.prod(1.0 - link_state.loss_rate[link_ids])),
        bottleneck_bw=float(np.min(link_state.avail_bandwidth[link_ids])),
        timestamp=timestamp,
    )


def measure_paths(
    delays: np.ndarray,
    loss_rates: np.ndarray,
    avail_bandwidths: np.ndarray,
    routing: np.ndarray,
) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aggregate link ground truth over every path for many time steps.

    Args:
        delays: link delays (time steps by links)
        loss_rates: link loss probabilities (time steps by links)
        avail_bandwidths: link available bandwidths (time steps by links)
        routing: routing matrix entries (paths by links)

    Returns:
        path delays, loss probabilities and bottleneck bandwidths (time
            steps by paths)
    """

    on_path = routing > 0.0
    path_delays = np.atleast_2d(delays) @ routing.T
    path_loss = -np.expm1(np.log1p(-np.atleast_2d(loss_rates)) @ routing.T)
    bandwidths = np.atleast_2d(avail_bandwidths)[:, None, :]
    masked = np.where(on_path[None, :, :], bandwidths, np.inf)
    return path_delays, path_loss, masked.min(axis=2)


def inject_noise(
    clean: IndicatorBatch,
    level: float,
    kind: t.Union[NoiseKind, str],
    seed: int,
    workers: int = 1,
) -> IndicatorBatch:
    """Add measurement noise to clean indicators.

    Each row draws from a stream keyed by its time step, so any subset or
    ordering of rows yields the same per-row noise (for the channel kind).

    Args:
        clean: clean indicators
        level: noise level ``σ``, positive
        kind: noise form
        seed: random seed
        workers: worker thread count for drawing row noise

    Returns:
        noisy indicators, clamped into each channel's domain

    Raises:
        InvalidArgumentError: non-positive level or unknown kind
    """

    if not level > 0.0:
        raise _exceptions.InvalidArgumentError(f"Noise level must be positive: {level}")
    try:
        kind = NoiseKind(kind)
    except ValueError:
        raise _exceptions.InvalidArgumentError(f"Unknown noise kind: {kind}") from None

    width = clean.delay.shape[1]

    def draw(step: int) -> np.ndarray:
        return _common.make_rng(seed, _NOISE_STREAM, step).normal(size=(3, width))

    draws = _common.map_ordered(draw, clean.timestamps.tolist(), workers=workers)
    draws = np.stack(draws, axis=1) if draws else np.zeros((3, 0, width))

    noisy = []
    for values, g in zip(clean.channels, draws):
        if kind == NoiseKind.channel:
            noisy.append(values * (1.0 + level * g))
        else:
            noisy.append(values + level * values.std(axis=0, keepdims=True) * g)
    return dataclasses.replace(clean.replace(noisy).clamped(), noise_level=float(level))


def generate_od_scenario(
    net: _network.Network,
    paths: _network.PathSet,
    seed: int,
    total_demand: float = DEFAULT_TOTAL_DEMAND_MBPS,
) -> OdScenario:
    """Generate gravity-model traffic over the probing pairs.

    Node masses are log-normal; each pair's flow is proportional to the
    product of its endpoint masses, scaled so flows sum to the demand.

    Args:
        net: network
        paths: probing paths, one per origin-destination pair
        seed: random seed
        total_demand: total demand (Mbps)

    Returns:
        origin-destination scenario
    """

    rng = _common.make_rng(seed, _OD_STREAM)
    masses = rng.lognormal(0.0, 0.5, size=net.node_count)
    od_routing = _network.build_routing_matrix(net, paths).entries.T
    pairs = paths.pairs
    weights = np.array([masses[s] * masses[d] for s, d in pairs])
    flows = total_demand * weights / weights.sum() if pairs else weights
    return OdScenario(
        pairs=pairs,
        masses=masses,
        flows=flows,
        od_routing=od_routing,
        link_loads=od_routing @ flows,
    )


@dataclasses.dataclass
class TomographyDataset(_common.Deserialisable, _common.Serialisable):
    """Time-indexed noisy and clean multi-indicator samples with ground truth."""

    network: _network.Network
    """Network."""

    paths: _network.PathSet
    """Probing paths."""

    loading: LinkLoading
    """Latent-to-utilisation mapping used."""

    od_masses: np.ndarray
    """Gravity-model node masses."""

    noisy: IndicatorBatch
    """Noisy path indicators."""

    truth: IndicatorBatch
    """Noise-free path indicators."""

    clean_mask: np.ndarray
    """Rows carrying clean training targets."""

    latent: np.ndarray
    """Latent vector per row."""

    link_delays: np.ndarray
    """Link delays per row (ms)."""

    link_loss: np.ndarray
    """Link loss probabilities per row."""

    link_avail_bandwidth: np.ndarray
    """Link available bandwidths per row (Mbps)."""

    link_congested: np.ndarray
    """Link congestion flags per row."""

    link_loads: np.ndarray
    """Origin-destination traffic load per link per row (Mbps)."""

    od_flows: np.ndarray
    """Origin-destination flows per row (Mbps)."""

    clean_fraction: float
    """Fraction of rows carrying clean targets."""

    noise_kind: NoiseKind
    """Noise form."""

    seed: int
    """Generation seed."""

    theta_c: float = DEFAULT_THETA_C
    """Congestion threshold."""

    @property
    def size(self) -> int:
        """Number of rows."""
        return self.noisy.size

    @property
    def noise_level(self) -> float:
        """Noise level."""
        return self.noisy.noise_level

    @property
    def routing(self) -> _network.RoutingMatrix:
        """Routing matrix shared by every row."""
        return _network.build_routing_matrix(self.network, self.paths)

    @property
    def od_routing(self) -> np.ndarray:
        """Pair-to-link incidence (links by pairs)."""
        return self.routing.entries.T

    @property
    def adjacency(self) -> np.ndarray:
        """Node adjacency ground truth, shared by every row."""
        return self.network.adjacency()

    @property
    def indicator_dims(self) -> t.Dict[str, int]:
        """Dimension of each indicator channel."""
        return {name: len(self.paths) for name in _common.INDICATORS}

    @property
    def clean_indices(self) -> np.ndarray:
        """Row indices carrying clean targets."""
        return np.flatnonzero(self.clean_mask)

    def split(
        self, fraction: float
    ) -> t.Tuple["TomographyDataset", "TomographyDataset"]:
        """Split rows chronologically into two datasets."""
        cut = int(round(fraction * self.size))
        return self.take(slice(0, cut)), self.take(slice(cut, self.size))

    def take(self, rows: t.Union[np.ndarray, slice]) -> "TomographyDataset":
        """Select rows."""
        return dataclasses.replace(
            self,
            noisy=self.noisy.take(rows),
            truth=self.truth.take(rows),
            clean_mask=self.clean_mask[rows],
            latent=self.latent[rows],
            link_delays=self.link_delays[rows],
            link_loss=self.link_loss[rows],
            link_avail_bandwidth=self.link_avail_bandwidth[rows],
            link_congested=self.link_congested[rows],
            link_loads=self.link_loads[rows],
            od_flows=self.od_flows[rows],
        )

    def header(self) -> t.Dict[str, t.Any]:
        """File header."""
        return {
            "schema_version": SCHEMA_VERSION,
            "topology_hash": self.network.topology_hash(),
            "noise": {"level": self.noise_level, "kind": self.noise_kind.value},
            "indicator_dims": self.indicator_dims,
            "clean_fraction": self.clean_fraction,
            "seed": self.seed,
            "theta_c": self.theta_c,
            "latent_dim": self.latent.shape[1],
            "horizon": self.size,
        }

    def to_data(self):
        noisy_rows = self.noisy.to_rows()
        truth_rows = self.truth.to_rows()
        samples = []
        for i in range(self.size):
            samples.append({
                "t": int(self.noisy.timestamps[i]),
                "noisy": noisy_rows[i],
                "clean": truth_rows[i] if self.clean_mask[i] else None,
                "truth": truth_rows[i],
                "latent": self.latent[i].tolist(),
                "links": {
                    "delay": self.link_delays[i].tolist(),
                    "loss": self.link_loss[i].tolist(),
                    "avail_bandwidth": self.link_avail_bandwidth[i].tolist(),
                    "congested": self.link_congested[i].tolist(),
                    "load": self.link_loads[i].tolist(),
                },
                "od": self.od_flows[i].tolist(),
            })
        return {
            "header": self.header(),
            "network": self.network.to_data(),
            "paths": self.paths.to_data()["paths"],
            "adjacency": self.adjacency.tolist(),
            "loading": self.loading.to_data(),
            "od_masses": self.od_masses.tolist(),
            "samples": samples,
        }

    @classmethod
    def from_data(cls, data) -> "TomographyDataset":
        header = data["header"]
        if header["schema_version"] != SCHEMA_VERSION:
            raise _exceptions.FormatError(
                f"Unsupported dataset schema version: {header['schema_version']}"
            )
        network = _network.Network.from_data(data["network"])
        network.validate()
        if network.topology_hash() != header["topology_hash"]:
            raise _exceptions.FormatError("Dataset topology hash mismatch")

        samples = data["samples"]
        timestamps = np.array([s["t"] for s in samples], dtype=int)
        level = float(header["noise"]["level"])

        def links(key: str, dtype: type = float) -> np.ndarray:
            return np.array([s["links"][key] for s in samples], dtype=dtype)

        return cls(
            network=network,
            paths=_network.PathSet.from_data({"paths": data["paths"]}),
            loading=LinkLoading.from_data(data["loading"]),
            od_masses=np.array(data["od_masses"], dtype=float),
            noisy=IndicatorBatch.from_rows(
                [s["noisy"] for s in samples], timestamps, level
            ),
            truth=IndicatorBatch.from_rows([s["truth"] for s in samples], timestamps),
            clean_mask=np.array([s["clean"] is not None for s in samples], dtype=bool),
            latent=np.array([s["latent"] for s in samples], dtype=float),
            link_delays=links("delay"),
            link_loss=links("loss"),
            link_avail_bandwidth=links("avail_bandwidth"),
            link_congested=links("congested", bool),
            link_loads=links("load"),
            od_flows=np.array([s["od"] for s in samples], dtype=float),
            clean_fraction=float(header["clean_fraction"]),
            noise_kind=NoiseKind(header["noise"]["kind"]),
            seed=int(header["seed"]),
            theta_c=float(header["theta_c"]),
        )


def clean_count(horizon: int, clean_fraction: float) -> int:
    """Number of clean-labelled rows: ``⌈clean_fraction·horizon⌉``."""
    return int(math.ceil(round(clean_fraction * horizon, 9)))


def build_dataset(
    net: _network.Network,
    paths: _network.PathSet,
    horizon: int,
    clean_fraction: float = DEFAULT_CLEAN_FRACTION,
    noise_level: float = 0.1,
    noise_kind: t.Union[NoiseKind, str] = NoiseKind.channel,
    seed: int = 0,
    latent_dim: int = DEFAULT_LATENT_DIM,
    theta_c: float = DEFAULT_THETA_C,
    total_demand: float = DEFAULT_TOTAL_DEMAND_MBPS,
    workers: int = 1,
) -> TomographyDataset:
    """Simulate a tomography dataset.

    States are simulated, aggregated into clean path indicators and made
    noisy; a seeded subset of rows is marked clean-labelled. Per-row
    origin-destination flows are the gravity scenario's flows scaled by the
    row's mean link utilisation relative to its mean over the horizon; link
    loads are the flows routed over the pair-to-link incidence.

    Args:
        net: network
        paths: probing paths
        horizon: number of time steps, at least 2
        clean_fraction: fraction of clean-labelled rows, in [0, 1]
        noise_level: noise level
        noise_kind: noise form
        seed: random seed
        latent_dim: latent dimension
        theta_c: congestion threshold
        total_demand: gravity-model total demand (Mbps)
        workers: worker thread count for noise generation

    Returns:
        dataset

    Raises:
        InvalidArgumentError: parameters out of range
    """

    if horizon < 2:
        raise _exceptions.InvalidArgumentError(f"Horizon must be at least 2: {horizon}")
    if not 0.0 <= clean_fraction <= 1.0:
        raise _exceptions.InvalidArgumentError(
            f"Clean fraction not in [0, 1]: {clean_fraction}"
        )

    routing = _network.build_routing_matrix(net, paths)
    loading = LinkLoading.sample(net.link_count, latent_dim, seed, theta_c=theta_c)
    states = simulate_states(
        net, latent_dim, horizon, seed, theta_c=theta_c, loading=loading
    )

    link_delays = np.stack([s.links.delay for s in states])
    link_loss = np.stack([s.links.loss_rate for s in states])
    link_avail = np.stack([s.links.avail_bandwidth for s in states])
    link_util = np.stack([s.links.utilization for s in states])
    timestamps = np.arange(horizon)

    delay, loss, bandwidth = measure_paths(
        link_delays, link_loss, link_avail, routing.entries
    )
    truth = IndicatorBatch(
        delay=delay, loss=loss, bandwidth=bandwidth, timestamps=timestamps
    )
    noisy = inject_noise(truth, noise_level, noise_kind, seed, workers=workers)

    clean_mask = np.zeros(horizon, dtype=bool)
    chosen = _common.make_rng(seed, _CLEAN_STREAM).choice(
        horizon, size=clean_count(horizon, clean_fraction), replace=False
    )
    clean_mask[chosen] = True

    scenario = generate_od_scenario(net, paths, seed, total_demand=total_demand)
    demand = link_util.mean(axis=1)
    od_flows = np.outer(demand / demand.mean(), scenario.flows)
    link_loads = od_flows @ scenario.od_routing.T
    logger.info(
        f"Simulated {horizon} steps over {len(paths)} paths "
        f"({int(clean_mask.sum())} clean-labelled)"
    )

    return TomographyDataset(
        network=net,
        paths=paths,
        loading=loading,
        od_masses=scenario.masses,
        noisy=noisy,
        truth=truth,
        clean_mask=clean_mask,
        latent=np.stack([s.latent.z_true for s in states]),
        link_delays=link_delays,
        link_loss=link_loss,
        link_avail_bandwidth=link_avail,
        link_congested=np.stack([s.links.congested for s in states]),
        link_loads=link_loads,
        od_flows=od_flows,
        clean_fraction=clean_fraction,
        noise_kind=NoiseKind(noise_kind),
        seed=seed,
        theta_c=theta_c,
    )


def save_dataset(dataset: TomographyDataset, path: t.Union[str, pathlib.Path]) -> None:
    """Write a dataset file."""
    _common.write_json(path, dataset.to_data())


def load_dataset(path: t.Union[str, pathlib.Path]) -> TomographyDataset:
    """Read a dataset file.

    Raises:
        FormatError: file is not a valid dataset
    """

    try:
        return TomographyDataset.from_data(_common.read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, _exceptions.PlatontError):
            raise
        raise _exceptions.FormatError(f"Invalid dataset file '{path}': {e}") from None
