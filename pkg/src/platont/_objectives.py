"""Training objectives: cross-indicator alignment, reconstruction and task terms.

Every objective returns its value together with its exact gradient with
respect to its inputs (latents or reconstructions), for composition with
:func:`platont.backward`.
"""

import enum
import logging
import warnings
import dataclasses
import typing as t

import numpy as np
import scipy.special

from . import _common
from . import _exceptions
from . import _tomography

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
DEFAULT_TEMPERATURE = 0.7
DEFAULT_HUBER_DELTA = 1.0


class ReconstructionMode(str, enum.Enum):
    """Reconstruction penalty."""

    huber_normalized = "huber-normalized"
    """Per-indicator mean Huber penalty, divided by the batch target scale,
    averaged over indicators."""

    plain_mse = "plain-mse"
    """Sum over indicators of the mean squared error on clean-labelled rows
    plus the mean squared error on the remaining rows."""


@dataclasses.dataclass
class LossWeights(_common.Deserialisable, _common.Serialisable):
    """Objective weights and shape parameters."""

    align: float = 1.0
    """Alignment weight λ1."""

    rec: float = 2.0
    """Reconstruction weight λ2."""

    task: float = 0.0
    """Task weight λ3 (0 disables task supervision)."""

    temperature: float = DEFAULT_TEMPERATURE
    """Alignment similarity temperature τ."""

    huber_delta: float = DEFAULT_HUBER_DELTA
    """Huber transition point."""

    reconstruction: ReconstructionMode = ReconstructionMode.huber_normalized
    """Reconstruction penalty."""

    def __post_init__(self):
        self.reconstruction = ReconstructionMode(self.reconstruction)
        self.validate()

    def validate(self) -> None:
        """Check weight ranges.

        Raises:
            ValidationError: negative weight, or non-positive temperature or
                Huber transition
        """

        for name in ("align", "rec", "task"):
            if not getattr(self, name) >= 0.0:
                raise _exceptions.ValidationError(
                    f"Loss weight '{name}' must be non-negative: {getattr(self, name)}"
                )
        if not self.temperature > 0.0:
            raise _exceptions.ValidationError(
                f"Temperature must be positive: {self.temperature}"
            )
        if not self.huber_delta > 0.0:
            raise _exceptions.ValidationError(
                f"Huber transition must be positive: {self.huber_delta}"
            )

    @property
    def lambdas(self) -> t.Tuple[float, float, float]:
        """Objective weights (λ1, λ2, λ3)."""
        return self.align, self.rec, self.task

    @classmethod
    def from_data(cls, data) -> "LossWeights":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise _exceptions.ValidationError(
                f"Unknown loss config keys: {sorted(unknown)}"
            )
        return cls(**data)

    def to_data(self):
        data = dataclasses.asdict(self)
        data["reconstruction"] = self.reconstruction.value
        return data


@dataclasses.dataclass
class ReconstructionTerms:
    """Reconstruction objective value with its per-indicator parts."""

    value: float
    """Objective value."""

    per_indicator: t.List[float]
    """Contribution of each indicator before combination."""

    sigmas: t.List[float]
    """Target scale used for each indicator (``nan`` in plain-MSE mode)."""

    grads: t.List[np.ndarray] = dataclasses.field(repr=False)
    """Gradient with respect to each indicator's reconstructions."""


@dataclasses.dataclass
class LossReport(_common.Serialisable):
    """Weighted total objective with its components."""

    align: float
    """Alignment value."""

    rec: float
    """Reconstruction value."""

    task: float
    """Task value."""

    total: float
    """Weighted sum ``λ1·align + λ2·rec + λ3·task``."""

    sigmas: t.List[float] = dataclasses.field(default_factory=list)
    """Per-indicator target scales used by the reconstruction term."""

    def to_data(self):
        return {
            "L_align": self.align,
            "L_rec": self.rec,
            "L_task": self.task,
            "L_total": self.total,
            "sigmas": list(self.sigmas),
        }


def _normalise_rows(z: np.ndarray, channel: int) -> t.Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise _exceptions.DegenerateEmbeddingError(
            f"Channel {channel} latent rows {zero.tolist()} have zero norm; "
            f"cosine similarity is undefined"
        )
    return z / norms[:, None], norms


def alignment_loss(
    latents: t.Sequence[np.ndarray],
    temperature: float = DEFAULT_TEMPERATURE,
) -> t.Tuple[float, t.List[np.ndarray]]:
    """Cross-indicator alignment objective.

    For every ordered pair of distinct channels ``(i, j)`` and row ``n``,
    the same-row cosine similarity is contrasted with the log-mean-exp of the
    similarities to every row of channel ``j``. The ``1/N`` stays inside the
    log, so perfectly aligned batches score 0.

    Args:
        latents: per-channel latents, rows aligned by time step
        temperature: similarity temperature

    Returns:
        value, and gradient with respect to each channel's latents

    Raises:
        DegenerateEmbeddingError: a latent row has zero norm
        InvalidArgumentError: fewer than 2 rows or channels
        ShapeError: channel shapes differ
    """

    latents = [np.asarray(z, dtype=float) for z in latents]
    if len(latents) < 2:
        raise _exceptions.InvalidArgumentError("Alignment needs at least 2 channels")
    if len({z.shape for z in latents}) != 1:
        raise _exceptions.ShapeError(
            f"Channel latent shapes differ: {[z.shape for z in latents]}"
        )
    n = latents[0].shape[0]
    if n < 2:
        raise _exceptions.InvalidArgumentError(
            f"Alignment needs at least 2 rows, got {n}"
        )

    units, norms = zip(*(_normalise_rows(z, k) for k, z in enumerate(latents)))
    grad_units = [np.zeros_like(u) for u in units]
    log_n = np.log(n)
    value = 0.0
    for i, u_i in enumerate(units):
        for j, u_j in enumerate(units):
            if i == j:
                continue
            scores = (u_i @ u_j.T) / temperature
            log_mean = scipy.special.logsumexp(scores, axis=1) - log_n
            value -= np.sum(np.diag(scores) - log_mean) / n
            softmax = np.exp(scores - scipy.special.logsumexp(scores, axis=1)[:, None])
            grad_scores = (softmax - np.eye(n)) / (n * temperature)
            grad_units[i] += grad_scores @ u_j
            grad_units[j] += grad_scores.T @ u_i

    grads = []
    for u, norm, grad_u in zip(units, norms, grad_units):
        radial = np.sum(u * grad_u, axis=1, keepdims=True)
        grads.append((grad_u - u * radial) / norm[:, None])
    return float(value), grads


def huber(residuals: np.ndarray, delta: float = DEFAULT_HUBER_DELTA) -> np.ndarray:
    """Elementwise Huber penalty: ``½r²`` within ``delta``, linear beyond."""
    magnitude = np.abs(residuals)
    return np.where(
        magnitude <= delta, 0.5 * residuals ** 2, delta * (magnitude - 0.5 * delta)
    )


def _huber_grad(residuals: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(residuals, -delta, delta)


def reconstruction_loss(
    reconstructions: t.Sequence[np.ndarray],
    noisy: t.Sequence[np.ndarray],
    clean: t.Sequence[np.ndarray],
    clean_mask: np.ndarray,
    mode: t.Union[ReconstructionMode, str] = ReconstructionMode.huber_normalized,
    huber_delta: float = DEFAULT_HUBER_DELTA,
) -> ReconstructionTerms:
    """Hybrid reconstruction objective.

    Clean-labelled rows are compared with their clean targets, the rest with
    their noisy inputs. In Huber-normalised mode each indicator's mean Huber
    value is divided by ``max(σ_k, 1e-6)``, ``σ_k`` being the standard
    deviation of the batch's clean targets (of its noisy inputs when no row is
    clean-labelled), then indicators are averaged.

    Args:
        reconstructions: per-indicator reconstructions (rows by paths)
        noisy: per-indicator noisy inputs
        clean: per-indicator clean targets, rows aligned with the batch
            (only rows in ``clean_mask`` are read)
        clean_mask: rows carrying clean targets
        mode: penalty
        huber_delta: Huber transition point

    Returns:
        value, per-indicator parts, scales and gradients
    """

    mode = ReconstructionMode(mode)
    clean_mask = np.asarray(clean_mask, dtype=bool)
    labelled = clean_mask.sum()
    unlabelled = clean_mask.size - labelled
    count = len(reconstructions)

    per_indicator, sigmas, grads = [], [], []
    for k, (x_hat, x_noisy, x_clean) in enumerate(zip(reconstructions, noisy, clean)):
        x_hat = np.asarray(x_hat, dtype=float)
        targets = np.where(clean_mask[:, None], x_clean, x_noisy)
        residuals = x_hat - targets

        if mode == ReconstructionMode.plain_mse:
            squared = np.sum(residuals ** 2, axis=1)
            value = 0.0
            grad = np.zeros_like(residuals)
            if labelled:
                value += squared[clean_mask].mean()
                grad[clean_mask] = 2.0 * residuals[clean_mask] / labelled
            if unlabelled:
                value += squared[~clean_mask].mean()
                grad[~clean_mask] = 2.0 * residuals[~clean_mask] / unlabelled
            per_indicator.append(float(value))
            sigmas.append(float("nan"))
            grads.append(grad)
            continue

        reference = targets[clean_mask] if labelled else targets
        sigma = float(np.std(reference))
        if sigma < SIGMA_FLOOR:
            warnings.warn(
                f"Indicator '{_common.INDICATORS[k]}' targets are constant in batch; "
                f"scale floored to {SIGMA_FLOOR}"
            )
        scale = max(sigma, SIGMA_FLOOR)
        value = huber(residuals, huber_delta).mean() / scale
        per_indicator.append(float(value))
        sigmas.append(sigma)
        denominator = residuals.size * scale * count
        grads.append(_huber_grad(residuals, huber_delta) / denominator)

    if mode == ReconstructionMode.plain_mse:
        total = float(sum(per_indicator))
    else:
        total = float(np.mean(per_indicator))
    return ReconstructionTerms(
        value=total, per_indicator=per_indicator, sigmas=sigmas, grads=grads
    )


def task_loss(
    denoised: t.Sequence[np.ndarray],
    labels: np.ndarray,
    surrogate: t.Union[_tomography.TaskSurrogate, _tomography.Task, str],
    routing: np.ndarray = None,
    capacities: np.ndarray = None,
    prior: np.ndarray = None,
) -> t.Tuple[float, t.List[np.ndarray]]:
    """Task supervision through a differentiable task surrogate.

    Args:
        denoised: per-indicator reconstructions (rows by paths)
        labels: task labels (rows by task outputs)
        surrogate: task surrogate, or the task to build one for
        routing: routing matrix entries, to build a surrogate
        capacities: link capacities, to build an OD surrogate
        prior: prior flows, to build an OD surrogate

    Returns:
        mean squared error ``mean_n ‖Γ(x̂_n) − y_n‖²`` and its gradient with
        respect to each indicator's reconstructions

    Raises:
        UnsupportedTaskError: task has no differentiable surrogate
    """

    if not isinstance(surrogate, _tomography.TaskSurrogate):
        surrogate = _tomography.make_task_surrogate(
            surrogate, routing, capacities=capacities, prior=prior
        )
    denoised = [np.asarray(x, dtype=float) for x in denoised]
    rows = denoised[0].shape[0]
    if rows == 0:
        return 0.0, [np.zeros_like(x) for x in denoised]

    outputs = surrogate.apply(denoised)
    labels = np.asarray(labels, dtype=float)
    if outputs.shape != labels.shape:
        raise _exceptions.ShapeError(
            f"Task labels have shape {labels.shape}, surrogate outputs {outputs.shape}"
        )
    residuals = outputs - labels
    value = float(np.sum(residuals ** 2) / rows)
    grads = surrogate.backward(denoised, 2.0 * residuals / rows)
    return value, list(grads)


def total_loss(
    parts: t.Sequence[float],
    weights: LossWeights = None,
    sigmas: t.Sequence[float] = (),
) -> LossReport:
    """Weighted total objective.

    A zero weight contributes exactly 0, whatever its part's value.

    Args:
        parts: alignment, reconstruction and task values
        weights: objective weights, default if not given
        sigmas: reconstruction target scales, for the report

    Returns:
        report

    Raises:
        NumericError: a part is not finite
    """

    weights = weights or LossWeights()
    align, rec, task = (float(p) for p in parts)
    for name, value in (("align", align), ("rec", rec), ("task", task)):
        if not np.isfinite(value):
            raise _exceptions.NumericError(
                f"Loss component '{name}' is not finite: {value}"
            )
    total = 0.0
    for weight, value in zip(weights.lambdas, (align, rec, task)):
        if weight != 0.0:
            total += weight * value
    logger.debug(
        f"Loss: align={align:.6g} rec={rec:.6g} task={task:.6g} total={total:.6g}"
    )
    return LossReport(align=align, rec=rec, task=task, total=total, sigmas=list(sigmas))
