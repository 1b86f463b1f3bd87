"""Network graphs, probing paths and routing matrices."""

import pathlib
import itertools
import collections
import dataclasses
import typing as t

import numpy as np
import networkx as nx

from . import _common
from . import _exceptions

DEFAULT_CAPACITY_MBPS = 100.0
MAX_PROBE_PATHS = 512
_PROBE_STREAM = 101


@dataclasses.dataclass(frozen=True)
class Link(_common.Deserialisable, _common.Serialisable):
    """Network link."""

    id: int
    """Link ID, contiguous from 0."""

    a: int
    """First endpoint node index (source, for directed networks)."""

    b: int
    """Second endpoint node index (destination, for directed networks)."""

    capacity_mbps: float = DEFAULT_CAPACITY_MBPS
    """Link capacity (Mbps)."""

    @classmethod
    def from_data(cls, data) -> "Link":
        return cls(
            id=int(data["id"]),
            a=int(data["a"]),
            b=int(data["b"]),
            capacity_mbps=float(data.get("capacity_mbps", DEFAULT_CAPACITY_MBPS)),
        )

    def to_data(self):
        return {
            "id": self.id,
            "a": self.a,
            "b": self.b,
            "capacity_mbps": self.capacity_mbps,
        }


@dataclasses.dataclass
class Network(_common.Deserialisable, _common.Serialisable):
    """Network graph: nodes and capacitated links."""

    node_count: int
    """Number of nodes, indexed from 0."""

    links: t.List[Link]
    """Links, ordered by ID."""

    directed: bool = False
    """Links carry traffic only from ``a`` to ``b``."""

    @classmethod
    def from_data(cls, data) -> "Network":
        return cls(
            node_count=int(data["nodes"]),
            links=[Link.from_data(d) for d in data["links"]],
            directed=bool(data.get("directed", False)),
        )

    def to_data(self):
        data = {"nodes": self.node_count, "links": [l.to_data() for l in self.links]}
        if self.directed:
            data["directed"] = True
        return data

    @property
    def link_count(self) -> int:
        """Number of links."""
        return len(self.links)

    @property
    def capacities(self) -> np.ndarray:
        """Link capacities (Mbps), by link ID."""
        return np.array([l.capacity_mbps for l in self.links], dtype=float)

    @property
    def is_tree(self) -> bool:
        """Network is a tree (connected with one fewer links than nodes)."""
        return self.link_count == self.node_count - 1

    def topology_hash(self) -> str:
        """Content hash of the topology."""
        return _common.digest(self.to_data())

    def graph(self) -> t.Union[nx.Graph, nx.DiGraph]:
        """Build a ``networkx`` graph with link IDs as edge attributes."""
        graph = nx.DiGraph() if self.directed else nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        for link in self.links:
            graph.add_edge(link.a, link.b, link_id=link.id)
        return graph

    def adjacency(self) -> np.ndarray:
        """Binary node adjacency matrix (symmetric for undirected networks)."""
        adjacency = np.zeros((self.node_count, self.node_count))
        for link in self.links:
            adjacency[link.a, link.b] = 1.0
            if not self.directed:
                adjacency[link.b, link.a] = 1.0
        return adjacency

    def degrees(self) -> np.ndarray:
        """Node degrees, counting links in both directions."""
        degrees = np.zeros(self.node_count, dtype=int)
        for link in self.links:
            degrees[link.a] += 1
            degrees[link.b] += 1
        return degrees

    def leaves(self) -> t.List[int]:
        """Degree-1 nodes, ascending."""
        return [int(i) for i in np.flatnonzero(self.degrees() == 1)]

    def validate(self) -> None:
        """Check structural invariants.

        Raises:
            ValidationError: on duplicate or non-contiguous link IDs,
                out-of-range endpoints, self-loops, parallel links,
                non-positive capacities or a disconnected graph
        """

        if self.node_count < 1:
            raise _exceptions.ValidationError(
                f"Node count must be positive: {self.node_count}"
            )

        ids = [l.id for l in self.links]
        duplicate_ids = sorted(i for i, c in collections.Counter(ids).items() if c > 1)
        if duplicate_ids:
            raise _exceptions.ValidationError(f"Duplicate link IDs: {duplicate_ids}")
        if sorted(ids) != list(range(len(ids))):
            raise _exceptions.ValidationError(
                f"Link IDs are not contiguous from 0: {sorted(ids)}"
            )
        if ids != sorted(ids):
            self.links.sort(key=lambda l: l.id)

        seen_edges = set()
        for link in self.links:
            for node in (link.a, link.b):
                if not 0 <= node < self.node_count:
                    raise _exceptions.ValidationError(
                        f"Link {link.id} endpoint {node} out of range "
                        f"[0, {self.node_count})"
                    )
            if link.a == link.b:
                raise _exceptions.ValidationError(
                    f"Link {link.id} is a self-loop on node {link.a}"
                )
            if not link.capacity_mbps > 0.0:
                raise _exceptions.ValidationError(
                    f"Link {link.id} capacity must be positive: {link.capacity_mbps}"
                )
            edge = (link.a, link.b) if self.directed else frozenset((link.a, link.b))
            if edge in seen_edges:
                raise _exceptions.ValidationError(
                    f"Link {link.id} duplicates an existing link between "
                    f"{link.a} and {link.b}"
                )
            seen_edges.add(edge)

        graph = self.graph()
        if self.directed:
            components = list(nx.weakly_connected_components(graph))
        else:
            components = list(nx.connected_components(graph))
        if len(components) > 1:
            components = sorted((sorted(c) for c in components), key=lambda c: c[0])
            raise _exceptions.ValidationError(
                f"Network is disconnected; components not reachable from node "
                f"0: {components[1:]}"
            )


@dataclasses.dataclass(frozen=True)
class Path:
    """Probing path."""

    src: int
    """Source node index."""

    dst: int
    """Destination node index."""

    link_ids: t.Tuple[int, ...]
    """Traversed link IDs, in order from source."""

    @property
    def hop_count(self) -> int:
        """Number of traversed links."""
        return len(self.link_ids)


@dataclasses.dataclass
class PathSet(_common.Deserialisable, _common.Serialisable):
    """Set of probing paths."""

    paths: t.List[Path]
    """Paths, in probing order."""

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def pairs(self) -> t.List[t.Tuple[int, int]]:
        """Source-destination pairs, in path order."""
        return [(p.src, p.dst) for p in self.paths]

    @classmethod
    def from_data(cls, data) -> "PathSet":
        paths = [
            Path(
                src=int(d["src"]),
                dst=int(d["dst"]),
                link_ids=tuple(int(i) for i in d["links"]),
            )
            for d in data["paths"]
        ]
        return cls(paths=paths)

    def to_data(self):
        return {
            "paths": [
                {"src": p.src, "dst": p.dst, "links": list(p.link_ids)}
                for p in self.paths
            ]
        }

    def validate(self, net: Network) -> None:
        """Check the paths are consistent with a network.

        Args:
            net: network the paths run over

        Raises:
            ValidationError: on an empty path, a source equal to its
                destination, a repeated pair, an unknown link, or a link
                sequence that is not a walk from source to destination
        """

        seen = set()
        for path in self.paths:
            if not path.link_ids:
                raise _exceptions.ValidationError(f"Empty path {path.src}->{path.dst}")
            if path.src == path.dst:
                raise _exceptions.ValidationError(
                    f"Path source equals destination: {path.src}"
                )
            if (path.src, path.dst) in seen:
                raise _exceptions.ValidationError(
                    f"Duplicate path pair ({path.src}, {path.dst})"
                )
            seen.add((path.src, path.dst))

            node = path.src
            for link_id in path.link_ids:
                if not 0 <= link_id < net.link_count:
                    raise _exceptions.ValidationError(
                        f"Path ({path.src}, {path.dst}) has unknown link {link_id}"
                    )
                link = net.links[link_id]
                if link.a == node:
                    node = link.b
                elif link.b == node and not net.directed:
                    node = link.a
                else:
                    raise _exceptions.ValidationError(
                        f"Path ({path.src}, {path.dst}) link {link_id} does not "
                        f"leave node {node}"
                    )
            if node != path.dst:
                raise _exceptions.ValidationError(
                    f"Path ({path.src}, {path.dst}) ends at node {node}"
                )


@dataclasses.dataclass
class RoutingMatrix:
    """Binary path-link incidence matrix."""

    entries: np.ndarray
    """Incidence, paths by links: 1 if the link lies on the path, else 0."""

    path_index: t.List[t.Tuple[int, int]]
    """Source-destination pair of each row."""

    link_index: t.List[int]
    """Link ID of each column."""

    @property
    def shape(self) -> t.Tuple[int, int]:
        """Matrix shape: (path count, link count)."""
        return self.entries.shape

    def paths_through(self, link_id: int) -> np.ndarray:
        """Row indices of paths traversing a link."""
        return np.flatnonzero(self.entries[:, self.link_index.index(link_id)])


def generate_random_tree(node_count: int, seed: int) -> Network:
    """Generate a uniformly random labelled tree.

    A Prüfer sequence is drawn from the seeded stream and decoded; links
    are numbered in sorted endpoint order.

    Args:
        node_count: number of nodes, at least 2
        seed: random seed

    Returns:
        tree network with default link capacities

    Raises:
        InvalidArgumentError: fewer than two nodes requested
    """

    if node_count < 2:
        raise _exceptions.InvalidArgumentError(
            f"A tree needs at least 2 nodes: {node_count}"
        )

    if node_count == 2:
        edges = [(0, 1)]
    else:
        rng = _common.make_rng(seed)
        sequence = [int(v) for v in rng.integers(0, node_count, size=node_count - 2)]
        tree = nx.from_prufer_sequence(sequence)
        edges = sorted((min(u, v), max(u, v)) for u, v in tree.edges())

    links = [Link(id=i, a=a, b=b) for i, (a, b) in enumerate(edges)]
    return Network(node_count=node_count, links=links)


def load_topology(path: t.Union[str, pathlib.Path]) -> Network:
    """Load and validate a topology file.

    Args:
        path: topology JSON file

    Returns:
        validated network

    Raises:
        FormatError: file is not valid topology JSON
        ValidationError: network violates its invariants
    """

    try:
        data = _common.read_json(path)
        net = Network.from_data(data)
    except (ValueError, KeyError, TypeError) as e:
        raise _exceptions.FormatError(f"Invalid topology file '{path}': {e}") from None
    net.validate()
    return net


def save_topology(net: Network, path: t.Union[str, pathlib.Path]) -> None:
    """Write a topology file."""
    _common.write_json(path, net.to_data())


def enumerate_paths(net: Network, pairs: t.Sequence[t.Tuple[int, int]]) -> PathSet:
    """Find a shortest path for each source-destination pair.

    Among equal-length shortest paths, the one with the lexicographically
    smallest node sequence is chosen, so routing is deterministic. On trees
    this is the unique path.

    Args:
        net: network to route over
        pairs: source-destination node pairs

    Returns:
        paths, in pair order

    Raises:
        InvalidArgumentError: node out of range, source equals destination,
            or a repeated pair
        UnreachablePairError: no path between a pair
    """

    graph = net.graph()
    to_dst_graph = graph.reverse(copy=False) if net.directed else graph
    distances_by_dst = {}
    seen = set()
    paths = []

    for src, dst in pairs:
        src, dst = int(src), int(dst)
        for node in (src, dst):
            if not 0 <= node < net.node_count:
                raise _exceptions.InvalidArgumentError(
                    f"Node {node} out of range [0, {net.node_count})"
                )
        if src == dst:
            raise _exceptions.InvalidArgumentError(
                f"Pair source equals destination: {src}"
            )
        if (src, dst) in seen:
            raise _exceptions.InvalidArgumentError(f"Duplicate pair ({src}, {dst})")
        seen.add((src, dst))

        if dst not in distances_by_dst:
            distances_by_dst[dst] = nx.single_source_shortest_path_length(
                to_dst_graph, dst
            )
        distances = distances_by_dst[dst]
        if src not in distances:
            raise _exceptions.UnreachablePairError(
                f"No path from node {src} to node {dst}"
            )

        node = src
        link_ids = []
        while node != dst:
            next_node = min(
                v
                for v in graph.neighbors(node)
                if distances.get(v, -1) == distances[node] - 1
            )
            link_ids.append(graph.edges[node, next_node]["link_id"])
            node = next_node
        paths.append(Path(src=src, dst=dst, link_ids=tuple(link_ids)))

    return PathSet(paths=paths)


def build_routing_matrix(net: Network, paths: PathSet) -> RoutingMatrix:
    """Build the routing matrix of a path set.

    Args:
        net: network the paths run over
        paths: probing paths

    Returns:
        path-link incidence matrix

    Raises:
        ValidationError: a path references an unknown link
    """

    entries = np.zeros((len(paths), net.link_count))
    for i, path in enumerate(paths):
        for link_id in path.link_ids:
            if not 0 <= link_id < net.link_count:
                raise _exceptions.ValidationError(
                    f"Path ({path.src}, {path.dst}) has unknown link {link_id}"
                )
            entries[i, link_id] = 1.0
    return RoutingMatrix(
        entries=entries,
        path_index=paths.pairs,
        link_index=list(range(net.link_count)),
    )


def default_probe_pairs(
    net: Network,
    seed: int = 0,
    max_paths: int = MAX_PROBE_PATHS,
) -> t.List[t.Tuple[int, int]]:
    """Choose default probing pairs.

    Trees are probed between every pair of leaves. Other graphs are probed
    between every pair of nodes, subsampled (seeded) to at most
    ``max_paths`` pairs.

    Args:
        net: network to probe
        seed: subsampling seed
        max_paths: pair cap for non-tree graphs

    Returns:
        ascending source-destination pairs with source < destination
    """

    if net.is_tree:
        return list(itertools.combinations(net.leaves(), 2))

    pairs = list(itertools.combinations(range(net.node_count), 2))
    if len(pairs) > max_paths:
        rng = _common.make_rng(seed, _PROBE_STREAM)
        chosen = np.sort(rng.choice(len(pairs), size=max_paths, replace=False))
        pairs = [pairs[i] for i in chosen]
    return pairs
