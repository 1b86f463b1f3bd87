"""Linear denoising baselines: principal and canonical component projection."""

import logging
import dataclasses
import typing as t

import numpy as np

from . import _theory
from . import _exceptions

logger = logging.getLogger(__name__)

DEFAULT_RANK = 32
CCA_RIDGE = 1e-10
RECONSTRUCTION_RIDGE = 1e-6


def _as_finite(values: np.ndarray, name: str) -> np.ndarray:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(values)):
        raise _exceptions.NumericError(f"{name} has non-finite entries")
    return values


def _scale(values: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    std = values.std(axis=0)
    return values.mean(axis=0), np.where(std > 1e-12, std, 1.0)


def split_blocks(values: np.ndarray, dims: t.Sequence[int]) -> t.List[np.ndarray]:
    """Split concatenated features back into per-indicator blocks."""
    return np.split(values, np.cumsum(dims)[:-1], axis=1)


@dataclasses.dataclass
class PcaModel:
    """Principal subspace of standardised features."""

    mean: np.ndarray
    """Per-feature mean."""

    scale: np.ndarray
    """Per-feature standard deviation (1 where constant)."""

    components: np.ndarray
    """Principal directions as orthonormal columns (features by rank)."""

    explained: np.ndarray
    """Variance along each principal direction (standardised units)."""

    @property
    def rank(self) -> int:
        """Number of principal directions kept."""
        return self.components.shape[1]

    def reconstruct(self, features: np.ndarray) -> np.ndarray:
        """Project features onto the principal subspace.

        Args:
            features: features (rows by features)

        Returns:
            reconstruction, same shape
        """

        features = _as_finite(features, "PCA input")
        if features.shape[1] != self.mean.shape[0]:
            raise _exceptions.ShapeError(
                f"PCA model has {self.mean.shape[0]} features, got {features.shape[1]}"
            )
        centred = (features - self.mean) / self.scale
        projected = (centred @ self.components) @ self.components.T
        return self.mean + self.scale * projected


def default_rank(rows: int, features: int, preferred: int = DEFAULT_RANK) -> int:
    """Largest valid rank not above the preferred rank."""
    return max(1, min(preferred, features, rows - 1))


def pca_fit(features: np.ndarray, k: int = None) -> PcaModel:
    """Fit a principal subspace.

    Features are standardised, then the top-``k`` eigenvectors of their
    covariance span the subspace.

    Args:
        features: training features (rows by features)
        k: rank, default the largest valid rank up to 32

    Returns:
        fitted model

    Raises:
        InvalidArgumentError: ``k`` is below 1, above the feature count, or
            not below the row count
        NumericError: non-finite input
    """

    features = _as_finite(features, "PCA input")
    rows, count = features.shape
    if k is None:
        k = default_rank(rows, count)
    if k < 1 or k > count or k >= rows:
        raise _exceptions.InvalidArgumentError(
            f"PCA rank must satisfy 1 <= k <= {count} and k < {rows}: {k}"
        )

    mean, scale = _scale(features)
    centred = (features - mean) / scale
    covariance = centred.T @ centred / rows
    values, vectors = _theory.symmetric_eigen(0.5 * (covariance + covariance.T))
    logger.debug(f"PCA: kept {k} of {count} directions")
    return PcaModel(
        mean=mean, scale=scale, components=vectors[:, :k], explained=values[:k]
    )


def pca_fit_denoise(
    channels: t.Sequence[np.ndarray],
    k: int = None,
) -> t.Tuple[PcaModel, t.List[np.ndarray]]:
    """Denoise indicators by projection onto their joint principal subspace.

    Args:
        channels: indicator blocks (rows by indicator dimension), fitted on
            their concatenation
        k: rank, default the largest valid rank up to 32

    Returns:
        fitted model and denoised blocks
    """

    blocks = [_as_finite(c, "PCA input") for c in channels]
    features = np.concatenate(blocks, axis=1)
    model = pca_fit(features, k)
    denoised = model.reconstruct(features)
    return model, split_blocks(denoised, [b.shape[1] for b in blocks])


@dataclasses.dataclass
class CcaModel:
    """Canonical correlation projections of two views."""

    means: t.Tuple[np.ndarray, np.ndarray]
    """Per-feature means of each view."""

    scales: t.Tuple[np.ndarray, np.ndarray]
    """Per-feature standard deviations of each view."""

    projection_c: np.ndarray
    """First-view projection ``W_c`` (first-view features by rank), acting
    on standardised features."""

    projection_d: np.ndarray
    """Second-view projection ``W_d`` (second-view features by rank),
    acting on standardised features."""

    correlations: np.ndarray
    """Canonical correlations, descending, in [0, 1]."""

    ridge: float = CCA_RIDGE
    """Covariance regularisation used."""

    @property
    def rank(self) -> int:
        """Number of canonical pairs kept."""
        return self.correlations.shape[0]

    def transform(
        self, view_c: np.ndarray, view_d: np.ndarray
    ) -> t.Tuple[np.ndarray, np.ndarray]:
        """Canonical variates of both views."""
        c = (_as_finite(view_c, "CCA view") - self.means[0]) / self.scales[0]
        d = (_as_finite(view_d, "CCA view") - self.means[1]) / self.scales[1]
        return c @ self.projection_c, d @ self.projection_d


def _inverse_sqrt(covariance: np.ndarray) -> np.ndarray:
    values, vectors = _theory.symmetric_eigen(covariance)
    return (vectors / np.sqrt(np.clip(values, 1e-300, None))) @ vectors.T


def cca_fit(
    view_c: np.ndarray,
    view_d: np.ndarray,
    k: int = None,
    ridge: float = CCA_RIDGE,
) -> CcaModel:
    """Fit canonical correlation projections.

    Each view is standardised and whitened (covariance plus ``ridge·I``);
    canonical directions are the singular directions of the whitened
    cross-covariance ``T``, found by eigen-decomposition of ``T·Tᵀ``.

    Args:
        view_c: first view (rows by features)
        view_d: second view (rows by features)
        k: rank, default ``min(32, p, q)``
        ridge: covariance regularisation

    Returns:
        fitted model

    Raises:
        InvalidArgumentError: rank outside ``[1, min(p, q)]`` or row counts
            differ
        NumericError: non-finite input
    """

    c = _as_finite(view_c, "CCA view")
    d = _as_finite(view_d, "CCA view")
    if c.shape[0] != d.shape[0]:
        raise _exceptions.InvalidArgumentError(
            f"Views have different row counts: {c.shape[0]} and {d.shape[0]}"
        )
    rows, p = c.shape
    q = d.shape[1]
    if k is None:
        k = min(DEFAULT_RANK, p, q)
    if not 1 <= k <= min(p, q):
        raise _exceptions.InvalidArgumentError(
            f"CCA rank must be in [1, {min(p, q)}]: {k}"
        )

    mean_c, scale_c = _scale(c)
    mean_d, scale_d = _scale(d)
    c = (c - mean_c) / scale_c
    d = (d - mean_d) / scale_d
    whiten_c = _inverse_sqrt(c.T @ c / rows + ridge * np.eye(p))
    whiten_d = _inverse_sqrt(d.T @ d / rows + ridge * np.eye(q))
    cross = whiten_c @ (c.T @ d / rows) @ whiten_d

    values, left = _theory.symmetric_eigen(cross @ cross.T)
    _, right_fallback = _theory.symmetric_eigen(cross.T @ cross)
    correlations = np.sqrt(np.clip(values[:k], 0.0, 1.0))
    right = np.empty((q, k))
    for index in range(k):
        if correlations[index] > 1e-10:
            right[:, index] = cross.T @ left[:, index] / correlations[index]
        else:
            right[:, index] = right_fallback[:, index]

    return CcaModel(
        means=(mean_c, mean_d),
        scales=(scale_c, scale_d),
        projection_c=whiten_c @ left[:, :k],
        projection_d=whiten_d @ right,
        correlations=correlations,
        ridge=ridge,
    )


def _reconstruct(
    variates: np.ndarray,
    projection: np.ndarray,
    mean: np.ndarray,
    scale: np.ndarray,
    ridge: float,
) -> np.ndarray:
    gram = projection.T @ projection + ridge * np.eye(projection.shape[1])
    inverse = np.linalg.solve(gram, projection.T)
    return mean + scale * (variates @ inverse)


def cca_denoise(
    model: CcaModel,
    view_c: np.ndarray,
    view_d: np.ndarray,
    ridge: float = RECONSTRUCTION_RIDGE,
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Denoise two views through their canonical spaces.

    Each view is projected onto its top-``k`` canonical variates and mapped
    back with the ridge-regularised pseudo-inverse of its projection.

    Args:
        model: fitted model
        view_c: first view
        view_d: second view
        ridge: pseudo-inverse regularisation

    Returns:
        denoised views, same shapes
    """

    variates_c, variates_d = model.transform(view_c, view_d)
    return (
        _reconstruct(
            variates_c, model.projection_c, model.means[0], model.scales[0], ridge
        ),
        _reconstruct(
            variates_d, model.projection_d, model.means[1], model.scales[1], ridge
        ),
    )


@dataclasses.dataclass
class IndicatorCca:
    """Pairwise canonical models of the delay view with each other view."""

    delay_loss: CcaModel
    """Delay and loss views."""

    delay_bandwidth: CcaModel
    """Delay and bandwidth views."""

    def denoise(
        self,
        channels: t.Sequence[np.ndarray],
        ridge: float = RECONSTRUCTION_RIDGE,
    ) -> t.List[np.ndarray]:
        """Denoise delay, loss and bandwidth indicators.

        The delay view, shared by both pairs, is the mean of its two
        reconstructions.
        """

        delay, loss, bandwidth = channels
        delay_a, loss_hat = cca_denoise(self.delay_loss, delay, loss, ridge)
        delay_b, bandwidth_hat = cca_denoise(
            self.delay_bandwidth, delay, bandwidth, ridge
        )
        return [0.5 * (delay_a + delay_b), loss_hat, bandwidth_hat]


def cca_fit_indicators(
    channels: t.Sequence[np.ndarray],
    k: int = None,
    ridge: float = CCA_RIDGE,
) -> IndicatorCca:
    """Fit pairwise canonical models on delay, loss and bandwidth indicators."""
    delay, loss, bandwidth = channels
    return IndicatorCca(
        delay_loss=cca_fit(delay, loss, k, ridge),
        delay_bandwidth=cca_fit(delay, bandwidth, k, ridge),
    )
