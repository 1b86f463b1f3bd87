"""Tomography algorithms on path indicators, and their evaluation metrics."""

import enum
import logging
import warnings
import dataclasses
import typing as t

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _common
from . import _network
from . import _exceptions

logger = logging.getLogger(__name__)

OD_RIDGE = 0.01
LINK_RIDGE = 0.01
TOPOLOGY_WINDOW = 64
KKT_TOLERANCE = 1e-8
CALIBRATION_SIGMAS = 2.0


class Task(str, enum.Enum):
    """Downstream tomography task."""

    link = "link"
    """Congested link diagnosis from path delays."""

    od = "od"
    """Origin-destination flow estimation from path bandwidths."""

    topo = "topo"
    """Tree topology inference from path delay covariances."""


@dataclasses.dataclass
class DiagnosisResult:
    """Congested link diagnosis."""

    predicted: t.List[int]
    """Links inferred congested, ascending."""

    scores: np.ndarray
    """Per link: fraction of traversing paths flagged congested."""

    congested_paths: np.ndarray
    """Per path: flagged congested."""

    truth: t.Optional[t.List[int]] = None
    """Links actually congested, ascending, if known."""


@dataclasses.dataclass
class OdEstimate:
    """Origin-destination flow estimate."""

    flows: np.ndarray
    """Flow per pair (Mbps), non-negative."""

    residual: float
    """Norm of the link-load residual ``y - R·x``."""


@dataclasses.dataclass
class InferredTopology:
    """Tree topology over a root leaf, receiver leaves and internal nodes."""

    adjacency: np.ndarray
    """Symmetric binary node adjacency matrix."""

    labels: t.List[str]
    """Node labels: "R<id>" for the root, "L<id>" for receivers and
    "C<ids>" for an internal node, by the receivers below it."""


@dataclasses.dataclass
class LinkScores(_common.Serialisable):
    """Link diagnosis confusion counts and rates."""

    tp: int
    """True positives."""

    fp: int
    """False positives."""

    fn: int
    """False negatives."""

    tn: int
    """True negatives."""

    @property
    def precision(self) -> float:
        """``TP/(TP+FP)``: 1 with no predictions and no true links, else 0."""
        if self.tp + self.fp == 0:
            return 1.0 if self.tp + self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        """``TP/(TP+FN)``, 1 with no true links."""
        if self.tp + self.fn == 0:
            return 1.0
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        """Harmonic mean of precision and recall, 0 when both are 0."""
        precision, recall = self.precision, self.recall
        if precision + recall == 0.0:
            return 0.0
        return 2.0 * precision * recall / (precision + recall)

    @property
    def fpr(self) -> float:
        """``FP/(FP+TN)``, 0 with no negatives."""
        if self.fp + self.tn == 0:
            return 0.0
        return self.fp / (self.fp + self.tn)

    def __add__(self, other: "LinkScores") -> "LinkScores":
        return LinkScores(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )

    def to_data(self):
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
        }


def calibrate_threshold(
    noise_free_delays: np.ndarray,
    sigmas: float = CALIBRATION_SIGMAS,
) -> np.ndarray:
    """Per-path congestion threshold ``μ + 2σ`` from noise-free delays.

    Args:
        noise_free_delays: calibration path delays (time steps by paths)
        sigmas: standard deviations above the mean

    Returns:
        threshold per path
    """

    delays = np.atleast_2d(noise_free_delays)
    return delays.mean(axis=0) + sigmas * delays.std(axis=0)


def diagnose_congested_links(
    path_delays: np.ndarray,
    routing: _network.RoutingMatrix,
    thresholds: np.ndarray,
    truth: t.Sequence[int] = None,
) -> DiagnosisResult:
    """Infer congested links by greedy cover of congested paths.

    A path is congested when its delay exceeds its threshold. Links on no
    normal path are the candidate explanation; the link covering the most
    unexplained congested paths is chosen repeatedly (ties to the smaller
    link ID). Congested paths no candidate can explain are then covered
    from every link on a congested path the same way.

    Args:
        path_delays: delay per path (ms)
        routing: routing matrix
        thresholds: congestion threshold per path
        truth: congested links, to carry into the result

    Returns:
        diagnosis

    Raises:
        ShapeError: measurement length does not match routing rows
    """

    entries = routing.entries > 0.0
    path_delays = np.asarray(path_delays, dtype=float).ravel()
    if path_delays.shape[0] != entries.shape[0]:
        raise _exceptions.ShapeError(
            f"Expected {entries.shape[0]} path delays, got {path_delays.shape[0]}"
        )

    congested = path_delays > np.asarray(thresholds, dtype=float)
    on_normal_path = entries[~congested].any(axis=0)
    uncovered = congested.copy()
    selected = []
    for allowed in (~on_normal_path, np.ones_like(on_normal_path)):
        while uncovered.any():
            coverage = entries[uncovered].sum(axis=0) * allowed
            best = int(np.argmax(coverage))
            if coverage[best] < 1:
                break
            selected.append(best)
            uncovered &= ~entries[:, best]

    traversals = entries.sum(axis=0)
    scores = np.divide(
        entries[congested].sum(axis=0),
        traversals,
        out=np.zeros(entries.shape[1]),
        where=traversals > 0,
    )
    link_ids = routing.link_index
    return DiagnosisResult(
        predicted=sorted(link_ids[i] for i in selected),
        scores=scores,
        congested_paths=congested,
        truth=None if truth is None else sorted(int(i) for i in truth),
    )


def solve_linear_inverse(
    y: np.ndarray,
    r: np.ndarray,
    ridge: float = 0.0,
    nonneg: bool = False,
    prior: np.ndarray = None,
    max_refinements: int = 5000,
) -> np.ndarray:
    """Solve a regularised linear inverse problem.

    Minimises ``‖y - R·x‖² + λ·‖x - x_prior‖²`` through the normal
    equations (Cholesky). With ``nonneg``, the non-negative least-squares
    solution of the stacked system is refined by projected gradient until
    the KKT residual is below 1e-8 (relative to the right-hand side).

    Args:
        y: measurements
        r: system matrix (measurements by unknowns)
        ridge: regularisation strength ``λ``, non-negative
        nonneg: constrain the solution to be non-negative
        prior: prior solution, zero if not given
        max_refinements: projected gradient iteration limit

    Returns:
        solution

    Raises:
        InvalidArgumentError: negative ridge
        ShapeError: inconsistent dimensions
        RankDeficiencyError: singular system with zero ridge
    """

    y = np.asarray(y, dtype=float).ravel()
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if ridge < 0.0:
        raise _exceptions.InvalidArgumentError(f"Ridge must be non-negative: {ridge}")
    if r.shape[0] != y.shape[0]:
        raise _exceptions.ShapeError(
            f"System has {r.shape[0]} rows but {y.shape[0]} measurements"
        )
    n = r.shape[1]
    prior = np.zeros(n) if prior is None else np.asarray(prior, dtype=float).ravel()
    if prior.shape[0] != n:
        raise _exceptions.ShapeError(
            f"Expected prior of length {n}, got {prior.shape[0]}"
        )
    if ridge == 0.0 and np.linalg.matrix_rank(r) < n:
        raise _exceptions.RankDeficiencyError(
            f"System of rank {np.linalg.matrix_rank(r)} < {n} unknowns is singular "
            f"without regularisation; use a positive ridge"
        )

    normal = r.T @ r + ridge * np.eye(n)
    rhs = r.T @ y + ridge * prior
    try:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), rhs)
    except np.linalg.LinAlgError:
        raise _exceptions.RankDeficiencyError(
            "Normal equations are not positive definite; use a positive ridge"
        ) from None
    if not nonneg or np.all(x >= 0.0):
        return x

    stacked = np.vstack([r, np.sqrt(ridge) * np.eye(n)])
    target = np.concatenate([y, np.sqrt(ridge) * prior])
    x, _ = scipy.optimize.nnls(stacked, target)
    logger.debug(f"Refining non-negative solution of {n} unknowns")

    step = 1.0 / np.linalg.norm(normal, ord=2)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    for _ in range(max_refinements):
        gradient = normal @ x - rhs
        if np.max(np.abs(np.minimum(x, gradient))) < KKT_TOLERANCE * scale:
            break
        x = np.maximum(0.0, x - step * gradient)
    else:
        warnings.warn("Non-negative refinement stopped before reaching KKT tolerance")
    return x


def gravity_prior(
    masses: np.ndarray,
    pairs: t.Sequence[t.Tuple[int, int]],
    link_loads: np.ndarray,
    od_routing: np.ndarray,
) -> np.ndarray:
    """Gravity-model flow prior consistent with total link load.

    Flows are proportional to endpoint mass products, scaled so the implied
    total link load equals the measured total.

    Args:
        masses: node masses
        pairs: origin-destination pairs
        link_loads: measured link loads (Mbps)
        od_routing: pair-to-link incidence (links by pairs)

    Returns:
        prior flow per pair (Mbps)
    """

    weights = np.array([masses[s] * masses[d] for s, d in pairs], dtype=float)
    hops = np.asarray(od_routing).sum(axis=0)
    denominator = float(hops @ weights)
    if denominator <= 0.0:
        return np.zeros(len(pairs))
    return float(np.sum(link_loads)) * weights / denominator


def estimate_od(
    link_loads: np.ndarray,
    od_routing: np.ndarray,
    prior: np.ndarray,
    ridge: float = OD_RIDGE,
) -> OdEstimate:
    """Estimate origin-destination flows from link loads.

    Args:
        link_loads: link loads (Mbps)
        od_routing: pair-to-link incidence (links by pairs)
        prior: gravity prior flows
        ridge: regularisation strength towards the prior

    Returns:
        non-negative flow estimate and its load residual
    """

    flows = solve_linear_inverse(
        link_loads, od_routing, ridge=ridge, nonneg=True, prior=prior
    )
    implied = np.asarray(od_routing) @ flows
    residual = float(np.linalg.norm(np.asarray(link_loads) - implied))
    return OdEstimate(flows=flows, residual=residual)


def infer_link_loads(
    bandwidths: np.ndarray,
    routing: np.ndarray,
    capacities: np.ndarray,
) -> np.ndarray:
    """Bound link loads from path bottleneck bandwidths.

    A link's available bandwidth is at least every traversing path's
    bottleneck, so the largest such bottleneck (capped at capacity) is
    taken; links on no path are assumed idle.

    Args:
        bandwidths: path bottleneck bandwidths (paths, or rows by paths)
        routing: routing matrix entries (paths by links)
        capacities: link capacities (Mbps)

    Returns:
        link loads (links, or rows by links)
    """

    bandwidths = np.asarray(bandwidths, dtype=float)
    available = _max_over_paths(np.atleast_2d(bandwidths), routing, capacities)[0]
    loads = np.clip(capacities - available, 0.0, None)
    return loads if bandwidths.ndim == 2 else loads[0]


def _max_over_paths(
    bandwidths: np.ndarray,
    routing: np.ndarray,
    capacities: np.ndarray,
) -> t.Tuple[np.ndarray, np.ndarray]:
    on_path = np.asarray(routing) > 0.0
    masked = np.where(on_path[None, :, :], bandwidths[:, :, None], -np.inf)
    argmax = masked.argmax(axis=1)
    best = np.take_along_axis(masked, argmax[:, None, :], axis=1)[:, 0, :]
    traversed = on_path.any(axis=0)[None, :] & (best < capacities[None, :])
    available = np.where(traversed, best, capacities[None, :])
    return available, np.where(traversed, argmax, -1)


class TaskSurrogate:
    """Differentiable task algorithm mapping denoised indicators to outputs."""

    task: Task

    def apply(self, indicators: t.Sequence[np.ndarray]) -> np.ndarray:
        """Compute task outputs (rows by outputs) from indicator channels."""
        raise NotImplementedError

    def backward(
        self,
        indicators: t.Sequence[np.ndarray],
        grad_output: np.ndarray,
    ) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gradient of a scalar with respect to each indicator channel."""
        raise NotImplementedError


@dataclasses.dataclass
class LinkDelaySurrogate(TaskSurrogate):
    """Link delays by closed-form ridge inversion of path delays."""

    routing: np.ndarray
    """Routing matrix entries (paths by links)."""

    ridge: float = LINK_RIDGE
    """Regularisation strength."""

    task = Task.link

    def __post_init__(self):
        r = np.asarray(self.routing, dtype=float)
        normal = r.T @ r + self.ridge * np.eye(r.shape[1])
        self._solve = scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), r.T)

    def apply(self, indicators):
        return np.asarray(indicators[0]) @ self._solve.T

    def backward(self, indicators, grad_output):
        zeros = np.zeros_like(np.asarray(indicators[0]))
        return grad_output @ self._solve, zeros, zeros.copy()


@dataclasses.dataclass
class OdLoadSurrogate(TaskSurrogate):
    """Flows by ridge inversion of link loads bounded from path bandwidths."""

    routing: np.ndarray
    """Routing matrix entries (paths by links)."""

    capacities: np.ndarray
    """Link capacities (Mbps)."""

    prior: np.ndarray
    """Fixed prior flows (Mbps)."""

    ridge: float = OD_RIDGE
    """Regularisation strength."""

    task = Task.od

    def __post_init__(self):
        od_routing = np.asarray(self.routing, dtype=float).T
        normal = od_routing.T @ od_routing + self.ridge * np.eye(od_routing.shape[1])
        factor = scipy.linalg.cho_factor(normal)
        self._solve = scipy.linalg.cho_solve(factor, od_routing.T)
        prior = self.ridge * np.asarray(self.prior)
        self._offset = scipy.linalg.cho_solve(factor, prior)

    def apply(self, indicators):
        available, _ = _max_over_paths(
            np.asarray(indicators[2]), self.routing, self.capacities
        )
        loads = self.capacities[None, :] - available
        return loads @ self._solve.T + self._offset[None, :]

    def backward(self, indicators, grad_output):
        bandwidths = np.asarray(indicators[2])
        _, argmax = _max_over_paths(bandwidths, self.routing, self.capacities)
        grad_loads = grad_output @ self._solve
        grad_bandwidths = np.zeros_like(bandwidths)
        rows, links = np.nonzero(argmax >= 0)
        np.add.at(
            grad_bandwidths, (rows, argmax[rows, links]), -grad_loads[rows, links]
        )
        zeros = np.zeros_like(np.asarray(indicators[0]))
        return zeros, zeros.copy(), grad_bandwidths


def make_task_surrogate(
    task: t.Union[Task, str],
    routing: np.ndarray,
    capacities: np.ndarray = None,
    prior: np.ndarray = None,
) -> TaskSurrogate:
    """Build the differentiable surrogate of a task.

    Args:
        task: task
        routing: routing matrix entries (paths by links)
        capacities: link capacities, required for the OD task
        prior: prior flows, required for the OD task

    Raises:
        UnsupportedTaskError: task has no differentiable surrogate
    """

    task = Task(task)
    if task == Task.link:
        return LinkDelaySurrogate(routing=routing)
    if task == Task.od:
        return OdLoadSurrogate(routing=routing, capacities=capacities, prior=prior)
    raise _exceptions.UnsupportedTaskError(
        f"Task '{task.value}' has no differentiable surrogate"
    )


def shared_path_covariance(
    net: _network.Network,
    root: int,
    receivers: t.Sequence[int],
    link_variances: np.ndarray,
) -> np.ndarray:
    """Noise-free covariance of root-to-receiver path delays.

    With independent link delays, two paths' covariance is the variance
    summed over their shared links.

    Args:
        net: network
        root: root node
        receivers: receiver nodes
        link_variances: delay variance per link

    Returns:
        covariance matrix over receivers
    """

    paths = _network.enumerate_paths(net, [(root, r) for r in receivers])
    incidence = _network.build_routing_matrix(net, paths).entries
    return (incidence * np.asarray(link_variances)[None, :]) @ incidence.T


def root_path_columns(
    paths: _network.PathSet,
    root: int,
    receivers: t.Sequence[int],
) -> np.ndarray:
    """Column of each root-to-receiver path in the probing path set.

    Raises:
        UnreachablePairError: a root-receiver pair is not probed
    """

    index = {pair: i for i, pair in enumerate(paths.pairs)}
    columns = []
    for receiver in receivers:
        pair = (root, receiver) if (root, receiver) in index else (receiver, root)
        if pair not in index:
            raise _exceptions.UnreachablePairError(
                f"Pair ({root}, {receiver}) is not probed"
            )
        columns.append(index[pair])
    return np.array(columns, dtype=int)


def infer_topology_rnj(
    covariance: np.ndarray,
    receivers: t.Sequence[int],
    root: int = None,
    tolerance: float = None,
) -> InferredTopology:
    """Infer a tree by recursive neighbour joining on shared-path covariance.

    The pair of clusters with the largest covariance is joined under a new
    internal node, together with every cluster whose covariance with the
    first is within ``tolerance`` of it (siblings). Covariances to the new
    node are averages over its children. Joining repeats until one cluster
    remains, which is attached to the root.

    Args:
        covariance: covariance of root-to-receiver path delays (receivers
            by receivers)
        receivers: receiver node IDs, in covariance order
        root: root node ID, for labelling
        tolerance: sibling tolerance, default 1e-6 of the largest entry

    Returns:
        inferred tree; node 0 is the root, nodes 1 to R the receivers in
            order, then internal nodes in creation order

    Raises:
        ValidationError: covariance not square and symmetric, or not
            matching the receivers
    """

    covariance = np.asarray(covariance, dtype=float)
    receivers = [int(r) for r in receivers]
    if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
        raise _exceptions.ValidationError(
            f"Covariance is not square: {covariance.shape}"
        )
    if covariance.shape[0] != len(receivers):
        raise _exceptions.ValidationError(
            f"Covariance has {covariance.shape[0]} rows for {len(receivers)} receivers"
        )
    scale = max(1e-300, float(np.max(np.abs(covariance), initial=0.0)))
    if np.max(np.abs(covariance - covariance.T), initial=0.0) > 1e-9 * scale:
        raise _exceptions.ValidationError("Covariance is not symmetric")
    if tolerance is None:
        tolerance = 1e-6 * scale

    labels = [f"R{root if root is not None else ''}"] + [f"L{r}" for r in receivers]
    clades = [None] + [(r,) for r in receivers]
    edges = []
    clusters = list(range(1, len(receivers) + 1))
    shared = {(i, j): covariance[i - 1, j - 1] for i in clusters for j in clusters}

    while len(clusters) > 1:
        best, first, second = -np.inf, None, None
        for a_index, a in enumerate(clusters):
            for b in clusters[a_index + 1:]:
                if shared[a, b] > best:
                    best, first, second = shared[a, b], a, b
        children = [c for c in clusters if c == first or c == second or (
            c != first and shared[first, c] >= best - tolerance
        )]

        node = len(labels)
        clade = tuple(sorted(r for c in children for r in clades[c]))
        labels.append("C" + ",".join(str(r) for r in clade))
        clades.append(clade)
        edges += [(node, c) for c in children]
        clusters = [c for c in clusters if c not in children]
        for other in clusters:
            value = float(np.mean([shared[c, other] for c in children]))
            shared[node, other] = shared[other, node] = value
        clusters.append(node)

    if clusters:
        edges.append((0, clusters[0]))
    adjacency = np.zeros((len(labels), len(labels)))
    for a, b in edges:
        adjacency[a, b] = adjacency[b, a] = 1.0
    return InferredTopology(adjacency=adjacency, labels=labels)


def logical_tree(
    net: _network.Network,
    root: int,
    receivers: t.Sequence[int],
) -> InferredTopology:
    """Tree seen from a root by its receivers, with pass-through nodes removed.

    Args:
        net: tree network
        root: root node
        receivers: receiver nodes

    Returns:
        logical tree, labelled as :func:`infer_topology_rnj` labels its
            output
    """

    paths = _network.enumerate_paths(net, [(root, r) for r in receivers])
    children = {}
    for path in paths:
        node = path.src
        for link_id in path.link_ids:
            link = net.links[link_id]
            child = link.b if link.a == node else link.a
            children.setdefault(node, set()).add(child)
            node = child

    receiver_set = set(receivers)
    labels = [f"R{root}"]
    edges = []

    def clade(node: int) -> t.Tuple[int, ...]:
        below = {node} & receiver_set
        for child in children.get(node, ()):
            below |= set(clade(child))
        return tuple(sorted(below))

    def visit(node: int, parent: int) -> None:
        kids = sorted(children.get(node, ()))
        while node not in receiver_set and len(kids) == 1:
            node = kids[0]
            kids = sorted(children.get(node, ()))
        if node in receiver_set:
            label = f"L{node}"
        else:
            label = "C" + ",".join(str(r) for r in clade(node))
        index = len(labels)
        labels.append(label)
        edges.append((parent, index))
        for kid in kids:
            visit(kid, index)

    for kid in sorted(children.get(root, ())):
        visit(kid, 0)

    adjacency = np.zeros((len(labels), len(labels)))
    for a, b in edges:
        adjacency[a, b] = adjacency[b, a] = 1.0
    return InferredTopology(adjacency=adjacency, labels=labels)


def align_topologies(
    predicted: InferredTopology,
    truth: InferredTopology,
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Express two topologies over the union of their node labels.

    Returns:
        predicted and true adjacency matrices, rows in sorted label order
    """

    labels = sorted(set(predicted.labels) | set(truth.labels))
    index = {label: i for i, label in enumerate(labels)}

    def expand(topology: InferredTopology) -> np.ndarray:
        expanded = np.zeros((len(labels), len(labels)))
        positions = [index[label] for label in topology.labels]
        expanded[np.ix_(positions, positions)] = topology.adjacency
        return expanded

    return expand(predicted), expand(truth)


def link_scores(
    predicted: t.Iterable[int],
    truth: t.Iterable[int],
    link_count: int,
) -> LinkScores:
    """Confusion counts of a congested link prediction."""
    predicted, truth = set(predicted), set(truth)
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    return LinkScores(tp=tp, fp=fp, fn=fn, tn=link_count - tp - fp - fn)


def topology_distances(
    predicted: np.ndarray,
    truth: np.ndarray,
) -> t.Tuple[float, float]:
    """Hamming and Frobenius distances between adjacency matrices.

    Hamming distance is the fraction of differing off-diagonal entries.

    Raises:
        ShapeError: matrices differ in shape
    """

    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise _exceptions.ShapeError(
            f"Adjacency shapes differ: {predicted.shape} and {truth.shape}"
        )
    n = predicted.shape[0]
    difference = predicted - truth
    off_diagonal = ~np.eye(n, dtype=bool)
    hamming = 0.0
    if n > 1:
        hamming = float(np.count_nonzero(difference[off_diagonal])) / (n * (n - 1))
    return hamming, float(np.sqrt(np.sum(difference ** 2)))


def error_gap(estimate: np.ndarray, reference: np.ndarray) -> t.Tuple[float, float]:
    """Mean and standard deviation of per-entry absolute deviation."""
    estimate = np.asarray(estimate, dtype=float)
    deviation = np.abs(estimate - np.asarray(reference, dtype=float))
    if deviation.size == 0:
        return 0.0, 0.0
    return float(deviation.mean()), float(deviation.std())


def metrics(prediction: t.Any, truth: t.Any, kind: str, **kwargs) -> t.Dict[str, float]:
    """Score a task output against its reference.

    Args:
        prediction: predicted congested links ("link"), adjacency matrix
            or topology ("topo"), or estimate ("gap")
        truth: reference of the same kind
        kind: "link", "topo" or "gap"
        kwargs: ``link_count`` for "link"

    Returns:
        named scores
    """

    if kind == "link":
        return link_scores(prediction, truth, kwargs["link_count"]).to_data()
    if kind == "topo":
        if isinstance(prediction, InferredTopology):
            prediction, truth = align_topologies(prediction, truth)
        hamming, frobenius = topology_distances(prediction, truth)
        return {"hamming": hamming, "frobenius": frobenius}
    if kind == "gap":
        mean, std = error_gap(prediction, truth)
        return {"mean": mean, "std": std}
    raise _exceptions.InvalidArgumentError(f"Unknown metric kind: {kind}")
