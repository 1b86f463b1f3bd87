"""Denoising pipelines, the experiment matrix and its report."""

import csv
import enum
import logging
import pathlib
import platform
import functools
import dataclasses
import importlib.metadata
import typing as t

import numpy as np

from . import _common
from . import _neural
from . import _network
from . import _trainer
from . import _baselines
from . import _exceptions
from . import _objectives
from . import _simulation
from . import _tomography

logger = logging.getLogger(__name__)

DEFAULT_NOISE_LEVELS = (0.05, 0.1, 0.2)
DEFAULT_NOISE_KINDS = ("channel", "random")
DEFAULT_NODE_COUNTS = (19, 24, 30)
DEFAULT_SEEDS = (0, 1, 2)
DEFAULT_HORIZON = 512
TRAIN_FRACTION = 0.75
RESULTS_SCHEMA_VERSION = 1
_CELL_KEYS = ("topology", "seed", "noise_level", "noise_kind", "pipeline")


class Pipeline(str, enum.Enum):
    """Source of the indicators fed to the tomography tasks."""

    clean = "clean"
    """Noise-free indicators (reference)."""

    raw = "raw"
    """Noisy indicators, unprocessed."""

    pca = "pca"
    """Noisy indicators projected onto their principal subspace."""

    cca = "cca"
    """Noisy indicators projected onto pairwise canonical subspaces."""

    platont = "platont"
    """Noisy indicators reconstructed by the trained model."""


ALL_TASKS = (_tomography.Task.link, _tomography.Task.od, _tomography.Task.topo)


@dataclasses.dataclass
class RunConfig(_common.Deserialisable, _common.Serialisable):
    """Experiment matrix configuration."""

    node_counts: t.List[int] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_NODE_COUNTS)
    )
    """Random tree sizes, one scenario each (ignored when topology files
    are given)."""

    topologies: t.List[str] = dataclasses.field(default_factory=list)
    """Topology files, instead of random trees."""

    seeds: t.List[int] = dataclasses.field(default_factory=lambda: list(DEFAULT_SEEDS))
    """Scenario seeds."""

    noise_levels: t.List[float] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_NOISE_LEVELS)
    )
    """Noise levels."""

    noise_kinds: t.List[str] = dataclasses.field(
        default_factory=lambda: list(DEFAULT_NOISE_KINDS)
    )
    """Noise forms."""

    pipelines: t.List[str] = dataclasses.field(
        default_factory=lambda: [p.value for p in Pipeline]
    )
    """Pipelines compared."""

    tasks: t.List[str] = dataclasses.field(
        default_factory=lambda: [x.value for x in ALL_TASKS]
    )
    """Tasks run."""

    horizon: int = DEFAULT_HORIZON
    """Time steps per dataset."""

    clean_fraction: float = _simulation.DEFAULT_CLEAN_FRACTION
    """Fraction of clean-labelled rows."""

    max_paths: int = _network.MAX_PROBE_PATHS
    """Probing pair cap for non-tree topologies."""

    train: _trainer.TrainConfig = dataclasses.field(
        default_factory=_trainer.TrainConfig
    )
    """Model training configuration."""

    loss: _objectives.LossWeights = dataclasses.field(
        default_factory=_objectives.LossWeights
    )
    """Objective weights."""

    model: _neural.ModelConfig = dataclasses.field(default_factory=_neural.ModelConfig)
    """Model architecture."""

    workers: int = 1
    """Cells run concurrently."""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check the configuration.

        Raises:
            ValidationError: non-positive noise level or horizon, unknown
                pipeline, task or noise kind, missing topology file, or no
                scenario
        """

        if any(not level > 0.0 for level in self.noise_levels):
            raise _exceptions.ValidationError(
                f"Noise levels must be positive: {self.noise_levels}"
            )
        if self.horizon < 2:
            raise _exceptions.ValidationError(
                f"Horizon must be at least 2: {self.horizon}"
            )
        try:
            [Pipeline(p) for p in self.pipelines]
            [_tomography.Task(x) for x in self.tasks]
            [_simulation.NoiseKind(k) for k in self.noise_kinds]
        except ValueError as e:
            raise _exceptions.ValidationError(str(e)) from None
        for path in self.topologies:
            if not pathlib.Path(path).is_file():
                raise _exceptions.ValidationError(f"Topology file not found: '{path}'")
        if not self.seeds or not (self.topologies or self.node_counts):
            raise _exceptions.ValidationError("No scenarios: give seeds and topologies")

    @classmethod
    def from_data(cls, data) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise _exceptions.ValidationError(
                f"Unknown run config keys: {sorted(unknown)}"
            )
        kwargs = dict(data)
        if "train" in kwargs:
            kwargs["train"] = _trainer.TrainConfig.from_data(kwargs["train"])
        if "loss" in kwargs:
            kwargs["loss"] = _objectives.LossWeights.from_data(kwargs["loss"])
        if "model" in kwargs:
            kwargs["model"] = _neural.ModelConfig.from_data(kwargs["model"])
        return cls(**kwargs)

    def to_data(self):
        data = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("train", "loss", "model", "workers")
        }
        data["train"] = self.train.to_data()
        data["loss"] = self.loss.to_data()
        data["model"] = self.model.to_data()
        return data


@dataclasses.dataclass
class Scenario:
    """One generated dataset of the experiment matrix."""

    topology: str
    """Topology name."""

    seed: int
    """Scenario seed."""

    noise_level: float
    """Noise level."""

    noise_kind: str
    """Noise form."""

    dataset: t.Optional[_simulation.TomographyDataset] = dataclasses.field(
        default=None, repr=False
    )
    """Data, unset when generation failed."""

    error: t.Optional[t.Dict[str, str]] = None
    """Failure record of dataset generation."""

    @property
    def key(self) -> t.Tuple[str, int, float, str]:
        """Scenario identity."""
        return self.topology, self.seed, self.noise_level, self.noise_kind


def denoise(
    pipeline: t.Union[Pipeline, str],
    train: _simulation.TomographyDataset,
    evaluate: _simulation.TomographyDataset,
    model: _neural.Model = None,
    train_config: _trainer.TrainConfig = None,
    weights: _objectives.LossWeights = None,
    model_config: _neural.ModelConfig = None,
) -> t.List[np.ndarray]:
    """Indicators of the evaluation rows as produced by a pipeline.

    Baselines are fitted, and the model trained (unless given), on the
    training rows' noisy indicators. Outputs are projected into each
    indicator's domain.

    Args:
        pipeline: pipeline
        train: training rows
        evaluate: evaluation rows
        model: trained model, for the "platont" pipeline
        train_config: training configuration, when no model is given
        weights: objective weights, when no model is given
        model_config: architecture, when no model is given

    Returns:
        delay, loss and bandwidth indicators of the evaluation rows
    """

    pipeline = Pipeline(pipeline)
    noisy = evaluate.noisy.channels
    if pipeline == Pipeline.clean:
        channels = evaluate.truth.channels
    elif pipeline == Pipeline.raw:
        channels = noisy
    elif pipeline == Pipeline.pca:
        features = np.concatenate(train.noisy.channels, axis=1)
        pca = _baselines.pca_fit(features)
        denoised = pca.reconstruct(np.concatenate(noisy, axis=1))
        channels = _baselines.split_blocks(denoised, [x.shape[1] for x in noisy])
    elif pipeline == Pipeline.cca:
        cca = _baselines.cca_fit_indicators(train.noisy.channels)
        channels = cca.denoise(noisy)
    else:
        if model is None:
            result = _trainer.train(
                train,
                config=train_config,
                weights=weights,
                model_config=model_config,
            )
            model = result.model
        channels = _neural.forward(model, noisy, record=False).reconstructions
    return list(evaluate.noisy.replace(channels).clamped().channels)


@dataclasses.dataclass
class PipelineResult(_common.Serialisable):
    """Scores of one pipeline on one dataset's evaluation rows."""

    pipeline: Pipeline
    """Pipeline."""

    reconstruction_mse: t.Dict[str, float]
    """Mean squared error to the noise-free indicators, per indicator."""

    link: t.Optional[_tomography.LinkScores] = None
    """Link diagnosis confusion counts, summed over evaluation rows."""

    od_gap_series: t.Optional[t.List[float]] = None
    """Mean OD error gap per evaluation row."""

    od_gap: t.Optional[t.Tuple[float, float]] = None
    """OD error gap mean and standard deviation over all entries."""

    topology: t.Optional[t.Dict[str, float]] = None
    """Mean Hamming and Frobenius distances over covariance windows."""

    def to_data(self):
        data = {
            "pipeline": self.pipeline.value,
            "reconstruction_mse": self.reconstruction_mse,
        }
        if self.link is not None:
            data["link"] = self.link.to_data()
        if self.od_gap is not None:
            data["od"] = {
                "gap_mean": self.od_gap[0],
                "gap_std": self.od_gap[1],
                "gap_series": self.od_gap_series,
            }
        if self.topology is not None:
            data["topo"] = self.topology
        return data


def _diagnose(
    train: _simulation.TomographyDataset,
    evaluate: _simulation.TomographyDataset,
    delays: np.ndarray,
) -> _tomography.LinkScores:
    routing = evaluate.routing
    thresholds = _tomography.calibrate_threshold(train.truth.delay)
    total = _tomography.LinkScores(tp=0, fp=0, fn=0, tn=0)
    for row in range(evaluate.size):
        truth = np.flatnonzero(evaluate.link_congested[row])
        result = _tomography.diagnose_congested_links(
            delays[row], routing, thresholds, truth=truth
        )
        total += _tomography.link_scores(
            result.predicted, result.truth, evaluate.network.link_count
        )
    return total


def _estimate_flows(
    dataset: _simulation.TomographyDataset, bandwidths: np.ndarray
) -> np.ndarray:
    routing = dataset.routing.entries
    od_routing = dataset.od_routing
    capacities = dataset.network.capacities
    loads = _tomography.infer_link_loads(bandwidths, routing, capacities)
    flows = []
    for row in range(loads.shape[0]):
        prior = _tomography.gravity_prior(
            dataset.od_masses, dataset.paths.pairs, loads[row], od_routing
        )
        flows.append(_tomography.estimate_od(loads[row], od_routing, prior).flows)
    return np.array(flows)


def _od_gaps(
    evaluate: _simulation.TomographyDataset,
    bandwidths: np.ndarray,
) -> t.Tuple[t.List[float], t.Tuple[float, float]]:
    estimate = _estimate_flows(evaluate, bandwidths)
    reference = _estimate_flows(evaluate, evaluate.truth.bandwidth)
    series = np.abs(estimate - reference).mean(axis=1)
    return series.tolist(), _tomography.error_gap(estimate, reference)


def _topology_windows(
    evaluate: _simulation.TomographyDataset,
    delays: np.ndarray,
) -> t.Dict[str, float]:
    leaves = evaluate.network.leaves()
    root, receivers = leaves[0], leaves[1:]
    columns = _tomography.root_path_columns(evaluate.paths, root, receivers)
    truth = _tomography.logical_tree(evaluate.network, root, receivers)

    window = _tomography.TOPOLOGY_WINDOW
    starts = list(range(0, evaluate.size - window + 1, window)) or [0]
    hamming, frobenius = [], []
    for start in starts:
        block = delays[start:start + window, columns]
        if block.shape[0] < 2:
            raise _exceptions.InvalidArgumentError(
                "Topology inference needs at least 2 evaluation rows"
            )
        covariance = np.cov(block, rowvar=False)
        inferred = _tomography.infer_topology_rnj(covariance, receivers, root=root)
        scores = _tomography.metrics(inferred, truth, "topo")
        hamming.append(scores["hamming"])
        frobenius.append(scores["frobenius"])
    return {
        "hamming": float(np.mean(hamming)),
        "frobenius": float(np.mean(frobenius)),
        "windows": len(starts),
    }


def evaluate_pipeline(
    dataset: _simulation.TomographyDataset,
    pipeline: t.Union[Pipeline, str],
    tasks: t.Sequence[t.Union[_tomography.Task, str]] = ALL_TASKS,
    model: _neural.Model = None,
    train_config: _trainer.TrainConfig = None,
    weights: _objectives.LossWeights = None,
    model_config: _neural.ModelConfig = None,
) -> PipelineResult:
    """Run one pipeline and the tomography tasks on a dataset.

    The first 75% of rows (chronologically) fit baselines, train the model
    and calibrate the congestion threshold; the rest are evaluated. OD error
    gaps are relative to the same estimator run on noise-free indicators.

    Args:
        dataset: data
        pipeline: pipeline
        tasks: tasks to run
        model: trained model, for the "platont" pipeline
        train_config: training configuration, when no model is given
        weights: objective weights, when no model is given
        model_config: architecture, when no model is given

    Returns:
        scores
    """

    pipeline = Pipeline(pipeline)
    tasks = [_tomography.Task(x) for x in tasks]
    train, evaluate = dataset.split(TRAIN_FRACTION)
    channels = denoise(
        pipeline, train, evaluate, model, train_config, weights, model_config
    )
    mse = {
        name: float(np.mean((x - truth) ** 2))
        for name, x, truth in zip(_common.INDICATORS, channels, evaluate.truth.channels)
    }
    result = PipelineResult(pipeline=pipeline, reconstruction_mse=mse)
    if _tomography.Task.link in tasks:
        result.link = _diagnose(train, evaluate, channels[0])
    if _tomography.Task.od in tasks:
        result.od_gap_series, result.od_gap = _od_gaps(evaluate, channels[2])
    if _tomography.Task.topo in tasks:
        result.topology = _topology_windows(evaluate, channels[0])
    logger.debug(f"Evaluated pipeline '{pipeline.value}': {mse}")
    return result


def _topologies(config: RunConfig) -> t.List[t.Tuple[str, int, t.Union[str, int]]]:
    items = []
    for seed in config.seeds:
        if config.topologies:
            items.extend((pathlib.Path(p).stem, seed, p) for p in config.topologies)
        else:
            items.extend((f"tree-{n}", seed, n) for n in config.node_counts)
    return items


def _build_scenario(
    config: RunConfig,
    item: t.Tuple[str, int, t.Union[str, int], float, str],
) -> Scenario:
    name, seed, source, level, kind = item
    try:
        dataset = _generate(config, source, seed, level, kind)
    except Exception as e:
        logger.warning(f"Scenario {name} seed={seed} noise={level}/{kind} failed: {e}")
        return Scenario(
            topology=name,
            seed=seed,
            noise_level=level,
            noise_kind=kind,
            error=_failure_record(e),
        )
    return Scenario(
        topology=name, seed=seed, noise_level=level, noise_kind=kind, dataset=dataset
    )


def _generate(
    config: RunConfig,
    source: t.Union[str, int],
    seed: int,
    level: float,
    kind: str,
) -> _simulation.TomographyDataset:
    if isinstance(source, (str, pathlib.Path)):
        net = _network.load_topology(source)
    else:
        net = _network.generate_random_tree(int(source), seed)
    pairs = _network.default_probe_pairs(net, seed=seed, max_paths=config.max_paths)
    paths = _network.enumerate_paths(net, pairs)
    return _simulation.build_dataset(
        net,
        paths,
        config.horizon,
        clean_fraction=config.clean_fraction,
        noise_level=level,
        noise_kind=kind,
        seed=seed,
    )


def _failure_record(error: Exception) -> t.Dict[str, str]:
    if isinstance(error, _exceptions.PlatontError):
        return error.to_record()
    return {"code": type(error).__name__, "message": str(error)}


def _run_cell(
    config: RunConfig,
    cell: t.Tuple[Scenario, Pipeline],
) -> t.Dict[str, t.Any]:
    scenario, pipeline = cell
    record = {
        "topology": scenario.topology,
        "seed": scenario.seed,
        "noise_level": scenario.noise_level,
        "noise_kind": scenario.noise_kind,
        "pipeline": pipeline.value,
    }
    if scenario.error is not None:
        record.update(status="failed", error=dict(scenario.error))
        return record
    train_config = dataclasses.replace(config.train, seed=scenario.seed)
    try:
        result = evaluate_pipeline(
            scenario.dataset,
            pipeline,
            config.tasks,
            train_config=train_config,
            weights=config.loss,
            model_config=config.model,
        )
    except Exception as e:
        logger.warning(f"Cell {record} failed: {e}")
        record.update(status="failed", error=_failure_record(e))
        return record
    record.update(status="ok", metrics=result.to_data())
    logger.info(
        f"Cell done: {scenario.topology} seed={scenario.seed} "
        f"noise={scenario.noise_level}/{scenario.noise_kind} {pipeline.value}"
    )
    return record


def run_experiment_matrix(config: RunConfig) -> t.Dict[str, t.Any]:
    """Run every (topology, seed, noise level, noise kind, pipeline) cell.

    A failing cell is recorded with its error and does not stop the others;
    when a scenario cannot be generated, each of its cells records that error.

    Args:
        config: experiment configuration

    Returns:
        results bundle: configuration, per-cell records and summary tables
    """

    items = [
        (name, seed, source, level, kind)
        for name, seed, source in _topologies(config)
        for level in config.noise_levels
        for kind in config.noise_kinds
    ]
    logger.info(f"Generating {len(items)} scenarios")
    scenarios = _common.map_ordered(
        functools.partial(_build_scenario, config), items, workers=config.workers
    )
    cells = [(s, Pipeline(p)) for s in scenarios for p in config.pipelines]
    logger.info(f"Running {len(cells)} cells")
    records = _common.map_ordered(
        functools.partial(_run_cell, config), cells, workers=config.workers
    )
    bundle = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "config": config.to_data(),
        "cells": records,
    }
    bundle["summary"] = summarise(bundle)
    return bundle


def relative_change(value: float, reference: float) -> float:
    """Percentage change of a value from its noise-free reference.

    With a zero reference the change is the difference in percentage
    points.
    """

    if reference == 0.0:
        return 100.0 * (value - reference)
    return 100.0 * (value - reference) / abs(reference)


def _cell_values(record: t.Dict[str, t.Any]) -> t.Dict[str, float]:
    values = {}
    result = record["metrics"]
    for name, mse in result["reconstruction_mse"].items():
        values[f"mse_{name}"] = mse
    if "link" in result:
        for name in ("precision", "recall", "f1", "fpr"):
            values[name] = result["link"][name]
    if "od" in result:
        values["od_gap"] = result["od"]["gap_mean"]
    if "topo" in result:
        values["hamming"] = result["topo"]["hamming"]
        values["frobenius"] = result["topo"]["frobenius"]
    return values


def summarise(bundle: t.Dict[str, t.Any]) -> t.Dict[str, t.Any]:
    """Aggregate cell records into per-topology and total rows.

    Each row holds, per pipeline and metric, the mean and standard deviation
    over seeds of the noise-condition average, and the mean relative change
    from the clean pipeline of the same scenario. Per-noise-level rows are
    also given. The total row per pipeline is the mean of its topology rows.

    Args:
        bundle: results bundle (needs "cells")

    Returns:
        summary with "rows", "levels", "totals", "od_series" and "failed"
    """

    cells = bundle.get("cells", [])
    ok = [c for c in cells if c["status"] == "ok"]
    failed = [c for c in cells if c["status"] != "ok"]
    reference = {
        (c["topology"], c["seed"], c["noise_level"], c["noise_kind"]): _cell_values(c)
        for c in ok
        if c["pipeline"] == Pipeline.clean.value
    }

    grouped: t.Dict[t.Tuple[str, str], t.Dict[int, t.List[t.Dict[str, float]]]] = {}
    levels: t.Dict[t.Tuple[str, str, float], t.List[t.Dict[str, float]]] = {}
    series: t.Dict[str, t.List[t.List[float]]] = {}
    for cell in ok:
        values = _cell_values(cell)
        key = (cell["topology"], cell["seed"], cell["noise_level"], cell["noise_kind"])
        clean = reference.get(key)
        if clean is not None:
            for name in list(values):
                if name in clean:
                    change = relative_change(values[name], clean[name])
                    values[f"change_{name}"] = change
        row_key = (cell["topology"], cell["pipeline"])
        grouped.setdefault(row_key, {}).setdefault(cell["seed"], []).append(values)
        level_key = (cell["topology"], cell["pipeline"], cell["noise_level"])
        levels.setdefault(level_key, []).append(values)
        if "od" in cell["metrics"]:
            gaps = cell["metrics"]["od"]["gap_series"]
            series.setdefault(cell["pipeline"], []).append(gaps)

    rows = []
    for (topology, pipeline), by_seed in sorted(grouped.items()):
        seed_means = [_mean_dicts(v) for _, v in sorted(by_seed.items())]
        row = {"topology": topology, "pipeline": pipeline, "seeds": len(seed_means)}
        row["mean"] = _mean_dicts(seed_means)
        row["std"] = _std_dicts(seed_means)
        rows.append(row)

    totals = []
    for pipeline in sorted({r["pipeline"] for r in rows}):
        pipeline_rows = [r["mean"] for r in rows if r["pipeline"] == pipeline]
        totals.append({"pipeline": pipeline, "mean": _mean_dicts(pipeline_rows)})

    level_rows = [
        {"topology": topology, "pipeline": pipeline, "noise_level": level,
         "mean": _mean_dicts(values)}
        for (topology, pipeline, level), values in sorted(levels.items())
    ]
    od_series = {}
    for pipeline, runs in sorted(series.items()):
        length = min(len(s) for s in runs)
        od_series[pipeline] = np.mean([s[:length] for s in runs], axis=0).tolist()

    return {
        "rows": rows,
        "totals": totals,
        "levels": level_rows,
        "od_series": od_series,
        "failed": [
            {**{k: c[k] for k in _CELL_KEYS}, "error": c["error"]} for c in failed
        ],
    }


def _mean_dicts(dicts: t.Sequence[t.Dict[str, float]]) -> t.Dict[str, float]:
    names = sorted(set().union(*dicts)) if dicts else []
    return {
        name: float(np.mean([d[name] for d in dicts if name in d])) for name in names
    }


def _std_dicts(dicts: t.Sequence[t.Dict[str, float]]) -> t.Dict[str, float]:
    names = sorted(set().union(*dicts)) if dicts else []
    return {
        name: float(np.std([d[name] for d in dicts if name in d])) for name in names
    }


def write_tables(
    bundle: t.Dict[str, t.Any], directory: t.Union[str, pathlib.Path]
) -> None:
    """Write the results bundle and its CSV tables to a directory.

    Files: results.json, link_diagnosis.csv, topology.csv,
    reconstruction.csv, od_error_gap.csv (per-time-slot mean gap per
    pipeline).
    """

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _common.write_json(directory / "results.json", bundle)
    summary = bundle.get("summary") or summarise(bundle)
    tables = {
        "link_diagnosis.csv": ("precision", "recall", "f1", "fpr"),
        "topology.csv": ("hamming", "frobenius"),
        "reconstruction.csv": tuple(f"mse_{n}" for n in _common.INDICATORS),
    }
    for filename, names in tables.items():
        columns = ["topology", "pipeline"]
        for name in names:
            columns += [name, f"{name}_std", f"change_{name}"]
        with open(directory / filename, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in summary["rows"] + [
                dict(total, topology="total", std={}) for total in summary["totals"]
            ]:
                line = [row["topology"], row["pipeline"]]
                for name in names:
                    line.append(_format_csv(row["mean"].get(name)))
                    line.append(_format_csv(row["std"].get(name)))
                    line.append(_format_csv(row["mean"].get(f"change_{name}")))
                writer.writerow(line)

    with open(directory / "od_error_gap.csv", "w", newline="") as f:
        writer = csv.writer(f)
        pipelines = sorted(summary["od_series"])
        writer.writerow(["slot"] + pipelines)
        length = min((len(summary["od_series"][p]) for p in pipelines), default=0)
        for slot in range(length):
            writer.writerow(
                [slot] + [_format_csv(summary["od_series"][p][slot]) for p in pipelines]
            )


def _format_csv(value: t.Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _marked(row: t.Dict[str, t.Any], name: str) -> str:
    value = row["mean"].get(name)
    if value is None:
        return "missing"
    text = f"{value:.4g}"
    change = row["mean"].get(f"change_{name}")
    if change is not None and row["pipeline"] != Pipeline.clean.value:
        marker = "▲" if change > 0 else "▼"
        text += f" {marker}{abs(change):.1f}%"
    return text


def report(bundle: t.Dict[str, t.Any]) -> str:
    """Markdown summary of a results bundle.

    Detection scores carry their relative degradation from the noise-free
    pipeline (▼ for a loss in precision, recall or F1; ▲ for an increase in
    FPR, distances, gaps or errors). Cells with no result read "missing";
    failed cells are listed with their errors.

    Args:
        bundle: results bundle

    Returns:
        report text
    """

    config = bundle.get("config", {})
    lines = ["# PlatoNT results", ""]
    if config:
        levels = ", ".join(str(x) for x in config.get("noise_levels", []))
        kinds = ", ".join(config.get("noise_kinds", []))
        seeds = ", ".join(str(x) for x in config.get("seeds", []))
        lines += [f"Noise levels: {levels}; noise kinds: {kinds}; seeds: {seeds}", ""]
    if not bundle.get("cells"):
        return "\n".join(lines)

    summary = summarise(bundle)
    rows = summary["rows"]
    totals = [dict(r, topology="**Total**") for r in summary["totals"]]
    sections = [
        ("Link diagnosis", ("precision", "recall", "f1", "fpr")),
        ("Topology inference", ("hamming", "frobenius")),
        ("OD estimation", ("od_gap",)),
        ("Reconstruction MSE", tuple(f"mse_{n}" for n in _common.INDICATORS)),
    ]
    for title, names in sections:
        if not any(n in r["mean"] for r in rows for n in names):
            continue
        lines += [f"## {title}", ""]
        lines.append("| Topology | Pipeline | " + " | ".join(names) + " |")
        lines.append("|" + " --- |" * (len(names) + 2))
        for row in rows + totals:
            cells = [_marked(row, name) for name in names]
            cells = [row["topology"], row["pipeline"]] + cells
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")

    if summary["failed"]:
        lines += ["## Failed cells", ""]
        for failure in summary["failed"]:
            error = failure["error"]
            lines.append(
                f"- {failure['topology']} seed {failure['seed']} noise "
                f"{failure['noise_level']}/{failure['noise_kind']} "
                f"{failure['pipeline']}: {error['code']}: {error['message']}"
            )
        lines.append("")
    return "\n".join(lines)


def package_versions() -> t.Dict[str, str]:
    """Versions of Python and of the numerical stack."""
    versions = {"python": platform.python_version()}
    for name in ("platont", "numpy", "scipy", "networkx"):
        try:
            versions[name] = importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(
    path: t.Union[str, pathlib.Path],
    command: str,
    arguments: t.Dict[str, t.Any],
    seeds: t.Sequence[int],
) -> t.Dict[str, t.Any]:
    """Write a run manifest: command, arguments, their hash, seeds and versions."""
    manifest = {
        "command": command,
        "arguments": arguments,
        "config_hash": _common.digest({"command": command, "arguments": arguments}),
        "seeds": list(seeds),
        "versions": package_versions(),
    }
    _common.write_json(path, manifest)
    return manifest
