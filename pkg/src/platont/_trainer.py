"""Joint training of the indicator encoders and decoders."""

import csv
import math
import logging
import pathlib
import warnings
import dataclasses
import typing as t

import numpy as np

from . import _common
from . import _neural
from . import _theory
from . import _exceptions
from . import _objectives
from . import _simulation
from . import _tomography

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "L_align", "L_rec", "L_task", "L_total", "lr")
_SHUFFLE_STREAM = 31
_STEP_STREAM = 32


@dataclasses.dataclass
class TrainConfig(_common.Deserialisable, _common.Serialisable):
    """Training hyperparameters."""

    batch_size: int = 64
    """Rows per batch."""

    epochs: int = 100
    """Passes over the data."""

    base_lr: float = 1e-3
    """Learning rate at the start of each restart cycle."""

    beta1: float = 0.9
    """First-moment decay."""

    beta2: float = 0.999
    """Second-moment decay."""

    eps: float = 1e-8
    """Update denominator offset."""

    weight_decay: float = 1e-4
    """Decoupled weight decay, scaled by the learning rate."""

    restart_period: int = 10
    """First restart cycle length (epochs)."""

    period_mult: int = 2
    """Restart cycle length multiplier."""

    grad_clip: float = 1.0
    """Maximum global gradient norm."""

    seed: int = 0
    """Random seed (initialisation, shuffling and dropout)."""

    task: t.Optional[str] = None
    """Task supervised when the task weight is positive: "link", "od" or
    "topo"."""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check ranges.

        Raises:
            ValidationError: non-positive size, rate or period, or
                moment decays outside [0, 1)
        """

        for name in ("batch_size", "epochs", "base_lr", "eps", "restart_period"):
            if not getattr(self, name) > 0:
                raise _exceptions.ValidationError(
                    f"'{name}' must be positive: {getattr(self, name)}"
                )
        if self.period_mult < 1:
            raise _exceptions.ValidationError(
                f"'period_mult' must be at least 1: {self.period_mult}"
            )
        if not self.grad_clip > 0.0:
            raise _exceptions.ValidationError(
                f"'grad_clip' must be positive: {self.grad_clip}"
            )
        if self.weight_decay < 0.0:
            raise _exceptions.ValidationError(
                f"'weight_decay' must be non-negative: {self.weight_decay}"
            )
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise _exceptions.ValidationError(
                    f"'{name}' must be in [0, 1): {getattr(self, name)}"
                )
        if self.task is not None:
            _tomography.Task(self.task)

    @classmethod
    def from_data(cls, data) -> "TrainConfig":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise _exceptions.ValidationError(
                f"Unknown train config keys: {sorted(unknown)}"
            )
        return cls(**data)

    def to_data(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass
class TrainState:
    """Optimiser state."""

    params: _neural.ModelParams
    """Current parameters."""

    first_moment: _neural.ParamGrads
    """First-moment estimates."""

    second_moment: _neural.ParamGrads
    """Second-moment estimates."""

    step: int = 0
    """Updates applied."""

    epoch: int = 0
    """Completed epochs."""

    best_loss: float = math.inf
    """Lowest epoch-end total loss seen."""

    best_params: t.Optional[_neural.ModelParams] = None
    """Parameters achieving the lowest epoch-end total loss."""

    @classmethod
    def initial(cls, params: _neural.ModelParams) -> "TrainState":
        """Fresh state for some parameters."""
        return cls(
            params={n: v.copy() for n, v in params.items()},
            first_moment=_neural.zeros_like(params),
            second_moment=_neural.zeros_like(params),
        )


@dataclasses.dataclass
class TrainResult:
    """Training outcome."""

    model: _neural.Model
    """Best checkpoint (lowest epoch-end total loss)."""

    log: t.List[t.Dict[str, float]]
    """Per-step log rows."""

    epoch_losses: t.List[_objectives.LossReport]
    """Eval-mode loss before training (index 0) and after each epoch."""

    best_loss: float
    """Total loss of the returned checkpoint."""

    diverged: bool = False
    """Training stopped on a non-finite loss or gradient."""

    task_weight: float = 0.0
    """Task weight actually applied."""


@dataclasses.dataclass
class ObjectiveContext:
    """Data needed by every evaluation of the training objective."""

    weights: _objectives.LossWeights
    """Objective weights (task weight already gated)."""

    surrogate: t.Optional[_tomography.TaskSurrogate] = None
    """Task surrogate, when task supervision is on."""


def load_config(
    path: t.Union[str, pathlib.Path],
) -> t.Tuple[TrainConfig, _objectives.LossWeights, _neural.ModelConfig]:
    """Load training, objective and model configuration.

    The file is a JSON object with optional "train", "loss" and "model"
    sections; absent keys take their defaults.

    Raises:
        ValidationError: unknown section or key, or invalid value
        FormatError: file is not JSON
    """

    try:
        data = _common.read_json(path)
    except ValueError as e:
        raise _exceptions.FormatError(f"Invalid config file '{path}': {e}") from None
    if not isinstance(data, dict):
        raise _exceptions.ValidationError(f"Config must be a JSON object: '{path}'")
    unknown = set(data) - {"train", "loss", "model"}
    if unknown:
        raise _exceptions.ValidationError(f"Unknown config sections: {sorted(unknown)}")
    return (
        TrainConfig.from_data(data.get("train", {})),
        _objectives.LossWeights.from_data(data.get("loss", {})),
        _neural.ModelConfig.from_data(data.get("model", {})),
    )


def lr_schedule(epoch: float, config: TrainConfig = None) -> float:
    """Cosine-annealed learning rate with warm restarts.

    Cycles last ``restart_period``, then ``period_mult`` times longer each
    restart; within a cycle of length ``T`` at position ``τ`` the rate is
    ``base_lr·½(1 + cos(πτ/T))``.

    Args:
        epoch: (fractional) epoch
        config: training configuration, default if not given

    Returns:
        learning rate
    """

    config = config or TrainConfig()
    if epoch < 0:
        raise _exceptions.InvalidArgumentError(f"Epoch must be non-negative: {epoch}")
    position = float(epoch)
    period = float(config.restart_period)
    while position >= period:
        position -= period
        if config.period_mult > 1:
            period *= config.period_mult
    return config.base_lr * 0.5 * (1.0 + math.cos(math.pi * position / period))


def global_norm(grads: _neural.ParamGrads) -> float:
    """L2 norm of all gradients together."""
    return float(math.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values())))


def clip_global_norm(
    grads: _neural.ParamGrads, max_norm: float = 1.0
) -> _neural.ParamGrads:
    """Scale gradients down so their global norm is at most ``max_norm``.

    Raises:
        NumericError: a gradient is not finite
    """

    norm = global_norm(grads)
    if not np.isfinite(norm):
        bad = sorted(n for n, g in grads.items() if not np.all(np.isfinite(g)))
        raise _exceptions.NumericError(f"Non-finite gradients: {bad}")
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}


def optimizer_step(
    state: TrainState,
    grads: _neural.ParamGrads,
    lr: float,
    config: TrainConfig = None,
) -> TrainState:
    """One adaptive-moment update with decoupled weight decay.

    Weight decay shrinks parameters by ``lr·weight_decay`` before the
    bias-corrected moment update.

    Args:
        state: optimiser state
        grads: gradients, shaped like the parameters
        lr: learning rate
        config: training configuration, default if not given

    Returns:
        updated state (the input state is not modified)

    Raises:
        ShapeError: gradient names or shapes do not match the parameters
    """

    config = config or TrainConfig()
    if set(grads) != set(state.params):
        raise _exceptions.ShapeError(
            f"Gradient tensors {sorted(set(grads) ^ set(state.params))} do not match "
            f"the parameters"
        )
    step = state.step + 1
    correction1 = 1.0 - config.beta1 ** step
    correction2 = 1.0 - config.beta2 ** step
    params, first, second = {}, {}, {}
    for name, value in state.params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise _exceptions.ShapeError(
                f"Gradient '{name}' has shape {grad.shape}, parameter {value.shape}"
            )
        first[name] = (
            config.beta1 * state.first_moment[name] + (1.0 - config.beta1) * grad
        )
        second[name] = (
            config.beta2 * state.second_moment[name] + (1.0 - config.beta2) * grad ** 2
        )
        decayed = value * (1.0 - lr * config.weight_decay)
        update = (first[name] / correction1) / (
            np.sqrt(second[name] / correction2) + config.eps
        )
        params[name] = decayed - lr * update
    return dataclasses.replace(
        state, params=params, first_moment=first, second_moment=second, step=step
    )


def task_labels(
    dataset: _simulation.TomographyDataset, task: _tomography.Task
) -> np.ndarray:
    """Per-row task labels of a dataset."""
    if task == _tomography.Task.link:
        return dataset.link_delays
    if task == _tomography.Task.od:
        return dataset.od_flows
    raise _exceptions.UnsupportedTaskError(f"Task '{task.value}' has no per-row labels")


def build_surrogate(
    dataset: _simulation.TomographyDataset,
    task: t.Union[_tomography.Task, str],
) -> _tomography.TaskSurrogate:
    """Differentiable surrogate of a task on a dataset's network.

    The OD surrogate's prior is the gravity prior for the mean link loads.

    Raises:
        UnsupportedTaskError: task has no differentiable surrogate
    """

    task = _tomography.Task(task)
    routing = dataset.routing.entries
    prior = None
    if task == _tomography.Task.od:
        prior = _tomography.gravity_prior(
            dataset.od_masses,
            dataset.paths.pairs,
            dataset.link_loads.mean(axis=0),
            dataset.od_routing,
        )
    return _tomography.make_task_surrogate(
        task, routing, capacities=dataset.network.capacities, prior=prior
    )


def make_context(
    dataset: _simulation.TomographyDataset,
    weights: _objectives.LossWeights,
    task: t.Optional[str] = None,
) -> ObjectiveContext:
    """Prepare task supervision, gating the task weight.

    A positive task weight needs a task with a differentiable surrogate;
    otherwise the weight is set to 0 with a warning.
    """

    if weights.task == 0.0:
        return ObjectiveContext(weights=weights)
    if task is None:
        warnings.warn("Task weight is positive but no task is configured; using 0")
        return ObjectiveContext(weights=dataclasses.replace(weights, task=0.0))
    try:
        surrogate = build_surrogate(dataset, task)
    except _exceptions.UnsupportedTaskError as e:
        warnings.warn(f"{e}; task weight set to 0")
        logger.warning(
            f"Task '{task}' is not differentiable: task supervision disabled"
        )
        return ObjectiveContext(weights=dataclasses.replace(weights, task=0.0))
    return ObjectiveContext(weights=weights, surrogate=surrogate)


def _objective(
    model: _neural.Model,
    batch: _simulation.TomographyDataset,
    context: ObjectiveContext,
    train_mode: bool,
    seed: int,
    gradients: bool,
) -> t.Tuple[
    _objectives.LossReport, t.Optional[_neural.ParamGrads], t.Dict[str, t.Any]
]:
    weights = context.weights
    inputs = batch.noisy.channels
    state = _neural.forward(
        model, inputs, train_mode=train_mode, seed=seed, record=gradients
    )

    align, grad_latents = _objectives.alignment_loss(state.latents, weights.temperature)
    rec = _objectives.reconstruction_loss(
        state.reconstructions,
        inputs,
        batch.truth.channels,
        batch.clean_mask,
        mode=weights.reconstruction,
        huber_delta=weights.huber_delta,
    )

    task_value = 0.0
    grad_task = [np.zeros_like(x) for x in state.reconstructions]
    if context.surrogate is not None:
        rows = batch.clean_indices
        task_value, grads = _objectives.task_loss(
            [x[rows] for x in state.reconstructions],
            task_labels(batch, context.surrogate.task)[rows],
            context.surrogate,
        )
        for channel, grad in enumerate(grads):
            grad_task[channel][rows] = grad

    report = _objectives.total_loss((align, rec.value, task_value), weights, rec.sigmas)
    parts = {"align": grad_latents, "rec": rec.grads, "task": grad_task, "state": state}
    if not gradients:
        return report, None, parts

    grad_reconstructions = [
        weights.rec * g_rec + weights.task * g_task
        for g_rec, g_task in zip(rec.grads, grad_task)
    ]
    param_grads, _ = _neural.backward(
        state, grad_reconstructions, [weights.align * g for g in grad_latents]
    )
    return report, param_grads, parts


def evaluate_loss(
    model: _neural.Model,
    dataset: _simulation.TomographyDataset,
    weights: _objectives.LossWeights = None,
    task: t.Optional[str] = None,
    context: ObjectiveContext = None,
) -> _objectives.LossReport:
    """Eval-mode training objective over a whole dataset.

    Args:
        model: model
        dataset: data
        weights: objective weights, default if not given
        task: supervised task, when the task weight is positive
        context: prepared task supervision, instead of ``weights``/``task``

    Returns:
        loss report
    """

    if context is None:
        context = make_context(dataset, weights or _objectives.LossWeights(), task)
    report, _, _ = _objective(model, dataset, context, False, 0, gradients=False)
    return report


def _batches(size: int, batch_size: int, seed: int, epoch: int) -> t.List[np.ndarray]:
    order = _common.make_rng(seed, _SHUFFLE_STREAM, epoch).permutation(size)
    batches = [order[i:i + batch_size] for i in range(0, size, batch_size)]
    return [b for b in batches if b.size >= 2]


def _step_seed(seed: int, step: int) -> int:
    return int(_common.make_rng(seed, _STEP_STREAM, step).integers(2 ** 63))


def _write_log(
    path: t.Union[str, pathlib.Path], rows: t.List[t.Dict[str, float]]
) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def train(
    dataset: _simulation.TomographyDataset,
    model: _neural.Model = None,
    config: TrainConfig = None,
    weights: _objectives.LossWeights = None,
    model_config: _neural.ModelConfig = None,
    log_path: t.Union[str, pathlib.Path] = None,
) -> TrainResult:
    """Train encoders, attention and decoders jointly.

    Each epoch shuffles rows (seeded by epoch), then for each batch encodes
    every channel, computes the alignment, reconstruction and optional task
    objectives, back-propagates their weighted sum and takes one clipped
    optimiser step. After each epoch the eval-mode objective over the whole
    dataset selects the best checkpoint. A non-finite objective or a zero-norm
    latent row aborts training with a warning, keeping the best checkpoint.

    Args:
        dataset: training data (noisy inputs, clean targets on labelled
            rows)
        model: initial model; if not given one is initialised from
            ``model_config`` with inputs standardised on ``dataset``
        config: training configuration, default if not given
        weights: objective weights, default if not given
        model_config: architecture, when no model is given
        log_path: per-step CSV log file

    Returns:
        best checkpoint and training record

    Raises:
        InvalidArgumentError: fewer rows than one batch
    """

    config = config or TrainConfig()
    weights = weights or _objectives.LossWeights()
    if dataset.size < config.batch_size:
        raise _exceptions.InvalidArgumentError(
            f"Dataset has {dataset.size} rows, fewer than the batch size "
            f"{config.batch_size}"
        )
    if model is None:
        model = _neural.init_model(
            tuple(dataset.indicator_dims.values()),
            model_config,
            seed=config.seed,
            standardizer=_neural.Standardizer.fit(dataset.noisy.channels),
        )

    context = make_context(dataset, weights, config.task)
    state = TrainState.initial(model.params)
    reference = evaluate_loss(model, dataset, context=context)
    state.best_loss = reference.total
    state.best_params = state.params
    epoch_losses = [reference]
    log = []
    diverged = False
    logger.info(
        f"Training {model.parameter_count} parameters on {dataset.size} rows, "
        f"initial loss {reference.total:.6g}"
    )

    for epoch in range(config.epochs):
        batches = _batches(dataset.size, config.batch_size, config.seed, epoch)
        try:
            for index, rows in enumerate(batches):
                lr = lr_schedule(epoch + index / len(batches), config)
                report, grads, _ = _objective(
                    model.with_params(state.params),
                    dataset.take(rows),
                    context,
                    True,
                    _step_seed(config.seed, state.step),
                    gradients=True,
                )
                grads = clip_global_norm(grads, config.grad_clip)
                state = optimizer_step(state, grads, lr, config)
                log.append({
                    "step": state.step,
                    "L_align": report.align,
                    "L_rec": report.rec,
                    "L_task": report.task,
                    "L_total": report.total,
                    "lr": lr,
                })
            current = model.with_params(state.params)
            report = evaluate_loss(current, dataset, context=context)
        except (_exceptions.NumericError, _exceptions.DegenerateEmbeddingError) as e:
            warnings.warn(
                f"Training diverged in epoch {epoch}: {e}; keeping best checkpoint"
            )
            diverged = True
            break

        state.epoch = epoch + 1
        epoch_losses.append(report)
        if report.total < state.best_loss:
            state.best_loss = report.total
            state.best_params = state.params
        logger.info(
            f"Epoch {epoch + 1}/{config.epochs}: loss {report.total:.6g} "
            f"(best {state.best_loss:.6g})"
        )

    if log_path is not None:
        _write_log(log_path, log)
    return TrainResult(
        model=model.with_params(state.best_params),
        log=log,
        epoch_losses=epoch_losses,
        best_loss=state.best_loss,
        diverged=diverged,
        task_weight=context.weights.task,
    )


def _encoder_vector(grads: _neural.ParamGrads) -> np.ndarray:
    names = sorted(n for n in grads if n.startswith("encoder."))
    return np.concatenate([grads[n].ravel() for n in names])


def probe_gradient_bundle(
    model: _neural.Model,
    dataset: _simulation.TomographyDataset,
    weights: _objectives.LossWeights = None,
    task: t.Optional[str] = None,
    epsilon_target: float = _theory.DEFAULT_EPSILON_TARGET,
) -> _theory.GradientBundle:
    """Per-objective encoder gradients of a model, for the gradient bound check.

    Each enabled objective (alignment, reconstruction, and task when
    supervised) is back-propagated alone in eval mode over the whole dataset;
    the encoder-parameter part of its gradient forms one row of the bundle,
    weighted by the objective's weight.

    Returns:
        gradient bundle
    """

    weights = weights or _objectives.LossWeights()
    context = make_context(dataset, weights, task)
    _, _, parts = _objective(model, dataset, context, False, 0, gradients=True)
    state = parts["state"]
    zeros = [np.zeros_like(x) for x in state.reconstructions]

    rows, lambdas = [], []
    grads, _ = _neural.backward(state, zeros, parts["align"])
    rows.append(_encoder_vector(grads))
    lambdas.append(context.weights.align)
    grads, _ = _neural.backward(state, parts["rec"])
    rows.append(_encoder_vector(grads))
    lambdas.append(context.weights.rec)
    if context.surrogate is not None:
        grads, _ = _neural.backward(state, parts["task"])
        rows.append(_encoder_vector(grads))
        lambdas.append(context.weights.task)

    return _theory.GradientBundle(
        gradients=np.stack(rows),
        weights=np.array(lambdas),
        epsilon_target=epsilon_target,
    )
