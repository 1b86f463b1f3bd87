"""Symmetric eigensolver and numerical checks of the kernel and gradient results.

Two results are checked numerically:

* PMI kernel shift: any symmetric PMI matrix ``K`` becomes positive
  semi-definite after adding ``C·I`` with ``C = max(0, (N-1)·α - min K_ii)``
  (``α`` the largest off-diagonal magnitude). Under off-diagonal smoothness
  (A1), a diagonal lower bound (A2) and ``ε >= N·|log ρ_min|``, ``K`` itself is
  positive semi-definite.
* Gradient reduction: for task gradients sharing an ``r``-dimensional
  subspace up to relative residual ``ε`` with spectral flatness ``δ``, the
  weighted gradient satisfies
  ``‖Σ λ_i g_i‖² <= (1+η)(1+δ)/r · ‖λ‖² · Σ‖g_i‖²``.

Here ``ε`` is always the smoothness (or residual) parameter, never
measurement noise. The kernel bandwidth of the co-occurrence kernel plays no
part in either check.
"""

import logging
import dataclasses
import typing as t

import numpy as np

from . import _common
from . import _exceptions

logger = logging.getLogger(__name__)

MAX_EIGEN_SIZE = 512
PSD_TOLERANCE = 1e-8
DEFAULT_EPSILON_TARGET = 0.05
_THEOREM_STREAM = 11
_PROPOSITION_STREAM = 12


@dataclasses.dataclass
class PmiMatrix(_common.Serialisable):
    """Symmetric PMI kernel matrix with its smoothness parameters."""

    values: np.ndarray
    """Kernel values ``K``, N by N, symmetric."""

    provenance: str
    """Origin: "counts", "synthetic" or "a1a2"."""

    rho_min: float
    """Minimum co-occurrence probability parameter, in (0, 1]."""

    epsilon: float
    """Off-diagonal smoothness parameter, non-negative."""

    @property
    def size(self) -> int:
        """Matrix dimension N."""
        return self.values.shape[0]

    @property
    def alpha(self) -> float:
        """Largest off-diagonal magnitude."""
        if self.size < 2:
            return 0.0
        off_diagonal = self.values[~np.eye(self.size, dtype=bool)]
        return float(np.max(np.abs(off_diagonal)))

    @classmethod
    def from_values(
        cls, values: np.ndarray, provenance: str = "synthetic"
    ) -> "PmiMatrix":
        """Wrap kernel values, deriving the tightest smoothness parameters.

        ``ρ_min`` is ``exp`` of the smallest off-diagonal value (capped at 1)
        and ``ε`` the smallest width making (A1) hold.

        Args:
            values: symmetric kernel values
            provenance: origin label

        Raises:
            ValidationError: values not square and symmetric to 1e-12
        """

        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise _exceptions.ValidationError(f"Kernel is not square: {values.shape}")
        if not np.all(np.isfinite(values)):
            raise _exceptions.ValidationError("Kernel has non-finite entries")
        if np.max(np.abs(values - values.T), initial=0.0) > 1e-12:
            raise _exceptions.ValidationError("Kernel is not symmetric")

        n = values.shape[0]
        if n < 2:
            return cls(values=values, provenance=provenance, rho_min=1.0, epsilon=0.0)
        off_diagonal = values[~np.eye(n, dtype=bool)]
        log_rho_min = min(0.0, float(np.min(off_diagonal)))
        epsilon = max(0.0, float(np.max(off_diagonal)) - log_rho_min)
        return cls(
            values=values,
            provenance=provenance,
            rho_min=float(np.exp(log_rho_min)),
            epsilon=epsilon,
        )

    def to_data(self):
        return {
            "provenance": self.provenance,
            "size": self.size,
            "rho_min": self.rho_min,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
        }


@dataclasses.dataclass
class Theorem1Report(_common.Serialisable):
    """Result of checking the PMI kernel shift bound on one matrix."""

    c_bound: float
    """Shift constant ``max(0, (N-1)·α - min K_ii)``."""

    min_eigenvalue: float
    """Smallest eigenvalue of ``K``."""

    min_shifted_eigenvalue: float
    """Smallest eigenvalue of ``K + C·I``."""

    a1_holds: bool
    """Off-diagonal entries lie in ``[log ρ_min, log ρ_min + ε]``."""

    a2_holds: bool
    """Diagonal entries are at least ``N·ε + log ρ_min``."""

    epsilon_condition_holds: bool
    """``ε >= N·|log ρ_min|``."""

    @property
    def shift_certified(self) -> bool:
        """``K + C·I`` is positive semi-definite to tolerance."""
        return self.min_shifted_eigenvalue >= -PSD_TOLERANCE

    @property
    def unshifted_applicable(self) -> bool:
        """Preconditions for ``K`` itself being positive semi-definite hold."""
        return self.a1_holds and self.a2_holds and self.epsilon_condition_holds

    @property
    def unshifted_certified(self) -> t.Optional[bool]:
        """``K`` is positive semi-definite, or ``None`` when no claim applies."""
        if not self.unshifted_applicable:
            return None
        return self.min_eigenvalue >= -PSD_TOLERANCE

    def to_data(self):
        return {
            "c_bound": self.c_bound,
            "min_eigenvalue": self.min_eigenvalue,
            "min_shifted_eigenvalue": self.min_shifted_eigenvalue,
            "shift_slack": self.min_shifted_eigenvalue + PSD_TOLERANCE,
            "shift_certified": self.shift_certified,
            "a1_holds": self.a1_holds,
            "a2_holds": self.a2_holds,
            "epsilon_condition_holds": self.epsilon_condition_holds,
            "unshifted_certified": self.unshifted_certified,
        }


@dataclasses.dataclass
class GradientBundle:
    """Per-task gradients and their combination weights."""

    gradients: np.ndarray
    """Task gradients, one row per task (m by p)."""

    weights: np.ndarray
    """Combination weights ``λ`` (m)."""

    epsilon_target: float = DEFAULT_EPSILON_TARGET
    """Largest allowed relative residual outside the shared subspace."""


@dataclasses.dataclass
class Proposition1Report(_common.Serialisable):
    """Result of checking the gradient reduction bound on one bundle."""

    lhs: float
    """Squared norm of the weighted gradient."""

    rhs: float
    """Bound ``(1+η)(1+δ)/r · ‖λ‖² · Σ‖g_i‖²``."""

    holds: bool
    """Bound holds (to relative tolerance 1e-9)."""

    eta: float
    """Residual correction ``2ε·√(r/(1+δ)) + ε²·r/(1+δ)``."""

    delta: float
    """Measured deviation from spectral uniformity."""

    epsilon: float
    """Measured largest relative residual outside the subspace."""

    rank: int
    """Measured shared subspace dimension ``r``."""

    def to_data(self):
        return dataclasses.asdict(self)


def symmetric_eigen(
    matrix: np.ndarray,
    max_sweeps: int = 100,
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix by Jacobi rotations.

    Sweeps apply a round-robin ordering of disjoint rotations, each round
    vectorised over its pivot pairs, until the off-diagonal Frobenius mass
    falls below ``1e-12·‖M‖_F``.

    Args:
        matrix: symmetric matrix, at most 512 by 512
        max_sweeps: sweep limit

    Returns:
        eigenvalues (descending) and orthonormal eigenvectors (as columns,
            largest component positive)

    Raises:
        ShapeError: matrix not square
        InvalidArgumentError: matrix larger than 512 by 512
        NumericError: matrix has non-finite entries
        ValidationError: matrix not symmetric to 1e-10
        ConvergenceError: sweep limit reached
    """

    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise _exceptions.ShapeError(f"Expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_EIGEN_SIZE:
        raise _exceptions.InvalidArgumentError(
            f"Matrix size {n} exceeds eigensolver limit {MAX_EIGEN_SIZE}"
        )
    if not np.all(np.isfinite(a)):
        raise _exceptions.NumericError("Matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10 * scale:
        raise _exceptions.ValidationError("Matrix is not symmetric")
    a = 0.5 * (a + a.T)

    vectors = np.eye(n)
    norm = np.linalg.norm(a)
    rounds = _round_robin_pairs(n)
    off_diagonal = ~np.eye(n, dtype=bool)

    for sweep in range(max_sweeps + 1):
        off = np.sqrt(np.sum(a[off_diagonal] ** 2))
        if off <= 1e-12 * norm:
            break
        if sweep == max_sweeps:
            raise _exceptions.ConvergenceError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps "
                f"(off-diagonal mass {off:.3e})"
            )
        for p, q in rounds:
            a_pq = a[p, q]
            active = a_pq != 0.0
            if not np.any(active):
                continue
            p, q, a_pq = p[active], q[active], a_pq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * a_pq)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            tan = sign / (np.abs(theta) + np.sqrt(theta ** 2 + 1.0))
            cos = 1.0 / np.sqrt(tan ** 2 + 1.0)
            sin = tan * cos

            rows_p, rows_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = cos[:, None] * rows_p - sin[:, None] * rows_q
            a[q, :] = sin[:, None] * rows_p + cos[:, None] * rows_q
            cols_p, cols_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cols_p * cos - cols_q * sin
            a[:, q] = cols_p * sin + cols_q * cos
            a[p, q] = 0.0
            a[q, p] = 0.0

            vecs_p, vecs_q = vectors[:, p].copy(), vectors[:, q].copy()
            vectors[:, p] = vecs_p * cos - vecs_q * sin
            vectors[:, q] = vecs_p * sin + vecs_q * cos
    logger.debug(f"Jacobi converged in {sweep} sweeps (n={n})")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    if n:
        pivots = np.argmax(np.abs(vectors), axis=0)
        signs = np.where(vectors[pivots, np.arange(n)] < 0.0, -1.0, 1.0)
        vectors = vectors * signs
    return values, vectors


def _round_robin_pairs(n: int) -> t.List[t.Tuple[np.ndarray, np.ndarray]]:
    players = list(range(n + n % 2))
    rounds = []
    for _ in range(len(players) - 1):
        half = len(players) // 2
        pairs = [
            (min(players[i], players[-1 - i]), max(players[i], players[-1 - i]))
            for i in range(half)
        ]
        pairs = [(p, q) for p, q in pairs if q < n]
        if pairs:
            rounds.append(
                (np.array([p for p, _ in pairs]), np.array([q for _, q in pairs]))
            )
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def pmi_from_counts(counts: np.ndarray) -> PmiMatrix:
    """Estimate a PMI matrix from co-occurrence counts.

    Every cell gets one pseudo-count before normalising, so no entry is
    ``log 0``.

    Args:
        counts: symmetric non-negative integer co-occurrence counts (N by N)

    Returns:
        PMI matrix ``K_ij = log(p_ij / (p_i· p_·j))``

    Raises:
        InvalidArgumentError: counts negative, non-integer, not square or
            all zero
        ValidationError: counts not symmetric
    """

    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise _exceptions.InvalidArgumentError(
            f"Counts must be square: {counts.shape}"
        )
    if np.any(counts < 0.0) or np.any(counts != np.round(counts)):
        raise _exceptions.InvalidArgumentError(
            "Counts must be non-negative integers"
        )
    if not np.any(counts):
        raise _exceptions.InvalidArgumentError("Counts are all zero")
    if np.any(counts != counts.T):
        raise _exceptions.ValidationError("Co-occurrence counts are not symmetric")

    smoothed = counts + 1.0
    joint = smoothed / smoothed.sum()
    row_marginal = joint.sum(axis=1)
    col_marginal = joint.sum(axis=0)
    values = (
        np.log(joint) - np.log(row_marginal)[:, None] - np.log(col_marginal)[None, :]
    )
    values = 0.5 * (values + values.T)
    return PmiMatrix.from_values(values, provenance="counts")


def theorem1_shift(kernel: PmiMatrix) -> Theorem1Report:
    """Check the PSD shift bound of a PMI matrix.

    Args:
        kernel: PMI matrix

    Returns:
        shift constant, eigenvalue checks and precondition flags
    """

    values = kernel.values
    n = kernel.size
    diagonal = np.diag(values)
    c_bound = max(0.0, (n - 1) * kernel.alpha - float(np.min(diagonal)))

    eigenvalues, _ = symmetric_eigen(values)
    shifted_eigenvalues, _ = symmetric_eigen(values + c_bound * np.eye(n))

    log_rho_min = float(np.log(kernel.rho_min))
    tolerance = 1e-12 * max(1.0, abs(log_rho_min) + kernel.epsilon)
    off_diagonal = values[~np.eye(n, dtype=bool)]
    a1_holds = bool(
        np.all(off_diagonal >= log_rho_min - tolerance)
        and np.all(off_diagonal <= log_rho_min + kernel.epsilon + tolerance)
    )
    a2_holds = bool(np.all(diagonal >= n * kernel.epsilon + log_rho_min - tolerance))
    epsilon_condition_holds = kernel.epsilon >= n * abs(log_rho_min) - tolerance

    return Theorem1Report(
        c_bound=c_bound,
        min_eigenvalue=float(eigenvalues[-1]),
        min_shifted_eigenvalue=float(shifted_eigenvalues[-1]),
        a1_holds=a1_holds,
        a2_holds=a2_holds,
        epsilon_condition_holds=bool(epsilon_condition_holds),
    )


def build_a1a2_instance(
    size: int,
    rho_min: float,
    epsilon: float,
    seed: int,
) -> PmiMatrix:
    """Sample a PMI matrix satisfying the smoothness and diagonal assumptions.

    Args:
        size: matrix dimension N, at least 2
        rho_min: minimum co-occurrence probability, in (0, 1]
        epsilon: smoothness width, non-negative
        seed: random seed

    Returns:
        matrix with off-diagonals uniform in ``[log ρ_min, log ρ_min + ε]``
            and diagonals uniform in ``[N·ε + log ρ_min, N·ε + log ρ_min + 1]``

    Raises:
        InvalidArgumentError: parameters out of range
    """

    if size < 2:
        raise _exceptions.InvalidArgumentError(f"Size must be at least 2: {size}")
    if not 0.0 < rho_min <= 1.0:
        raise _exceptions.InvalidArgumentError(f"rho_min not in (0, 1]: {rho_min}")
    if epsilon < 0.0:
        raise _exceptions.InvalidArgumentError(f"Negative epsilon: {epsilon}")

    rng = _common.make_rng(seed)
    log_rho_min = np.log(rho_min)
    upper = rng.uniform(log_rho_min, log_rho_min + epsilon, size=(size, size))
    values = np.triu(upper, k=1)
    values = values + values.T
    low = size * epsilon + log_rho_min
    values[np.diag_indices(size)] = rng.uniform(low, low + 1.0, size=size)
    return PmiMatrix(values=values, provenance="a1a2", rho_min=rho_min, epsilon=epsilon)


def feature_map(kernel: PmiMatrix, shift: float = 0.0) -> np.ndarray:
    """Factor a (shifted) PSD kernel as feature inner products.

    Args:
        kernel: PMI matrix
        shift: diagonal shift ``C`` applied before factoring

    Returns:
        features ``f = V·Λ^½``, one row per item (feature dimension N), with
            ``f·fᵀ = K + C·I``

    Raises:
        ValidationError: shifted kernel not positive semi-definite
    """

    values, vectors = symmetric_eigen(kernel.values + shift * np.eye(kernel.size))
    if values.size and values[-1] < -PSD_TOLERANCE:
        raise _exceptions.ValidationError(
            f"Kernel is not positive semi-definite (min eigenvalue {values[-1]:.3e})"
        )
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def proposition1_check(bundle: GradientBundle) -> Proposition1Report:
    """Measure subspace structure of task gradients and check the bound.

    The subspace ``U`` is spanned by the top-``r`` left singular directions
    of the gradient matrix, ``r`` being the smallest dimension for which
    every gradient keeps at most ``epsilon_target`` of its norm outside
    ``U``.

    Args:
        bundle: task gradients and weights

    Returns:
        both sides of the bound and the measured constants

    Raises:
        InvalidArgumentError: no gradients, mismatched weights or all
            gradients zero
    """

    gradients = np.atleast_2d(np.asarray(bundle.gradients, dtype=float))
    weights = np.asarray(bundle.weights, dtype=float).ravel()
    if gradients.shape[0] < 1:
        raise _exceptions.InvalidArgumentError("Bundle has no gradients")
    if weights.shape[0] != gradients.shape[0]:
        raise _exceptions.InvalidArgumentError(
            f"Expected {gradients.shape[0]} weights, got {weights.shape[0]}"
        )
    norms_squared = np.sum(gradients ** 2, axis=1)
    total = float(np.sum(norms_squared))
    if total == 0.0:
        raise _exceptions.InvalidArgumentError("All gradients are zero")

    gram = gradients @ gradients.T
    eigenvalues, eigenvectors = symmetric_eigen(gram)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    full_rank = max(1, int(np.sum(eigenvalues > 1e-12 * eigenvalues[0])))

    nonzero = norms_squared > 0.0
    rank, epsilon = full_rank, 0.0
    for r in range(1, full_rank + 1):
        kept = (eigenvectors[:, :r] ** 2) @ eigenvalues[:r]
        residual = np.clip(norms_squared - kept, 0.0, None)
        ratios = np.sqrt(residual[nonzero] / norms_squared[nonzero])
        measured = float(np.max(ratios))
        if measured <= bundle.epsilon_target or r == full_rank:
            rank, epsilon = r, measured
            break

    projected_trace = float(np.sum(eigenvalues[:rank]))
    delta = max(0.0, float(eigenvalues[0]) * rank / projected_trace - 1.0)
    ratio = rank / (1.0 + delta)
    eta = 2.0 * epsilon * np.sqrt(ratio) + epsilon ** 2 * ratio

    lhs = float(np.sum((weights @ gradients) ** 2))
    rhs = float((1.0 + eta) * (1.0 + delta) / rank * np.sum(weights ** 2) * total)
    return Proposition1Report(
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs * (1.0 + 1e-9) + 1e-300,
        eta=float(eta),
        delta=delta,
        epsilon=epsilon,
        rank=rank,
    )


def _random_kernel(rng: np.random.Generator, kind: str) -> PmiMatrix:
    size = int(rng.integers(2, 65))
    if kind == "counts":
        counts = rng.poisson(rng.gamma(1.0, 20.0, size=(size, size)))
        return pmi_from_counts(np.triu(counts) + np.triu(counts, k=1).T)
    if kind == "a1a2":
        rho_min = float(rng.uniform(0.05, 1.0))
        epsilon = size * abs(np.log(rho_min)) * float(rng.uniform(1.0, 1.5))
        return build_a1a2_instance(size, rho_min, epsilon, int(rng.integers(2 ** 31)))
    values = rng.normal(0.0, 1.0, size=(size, size))
    return PmiMatrix.from_values(0.5 * (values + values.T), provenance="synthetic")


def run_theorem1_suite(
    trials: int,
    seed: int,
    workers: int = 1,
) -> t.List[t.Dict[str, t.Any]]:
    """Check the shift bound on seeded random PMI matrices.

    Trials cycle through Gaussian symmetric matrices, count-derived PMI
    matrices and (A1)/(A2) instances meeting the epsilon condition.

    Args:
        trials: number of matrices
        seed: master seed; trial ``i`` uses its own stream
        workers: worker thread count

    Returns:
        per-trial records, in trial order
    """

    kinds = ("synthetic", "counts", "a1a2")

    def run_trial(index: int) -> t.Dict[str, t.Any]:
        rng = _common.make_rng(seed, _THEOREM_STREAM, index)
        kernel = _random_kernel(rng, kinds[index % len(kinds)])
        record = {"trial": index, **kernel.to_data()}
        record.update(theorem1_shift(kernel).to_data())
        return record

    records = _common.map_ordered(run_trial, range(trials), workers=workers)
    certified = sum(r["shift_certified"] for r in records)
    logger.info(f"Shift bound certified in {certified}/{len(records)} trials")
    return records


def planted_gradient_bundle(
    rng: np.random.Generator,
    noise: float = 0.01,
) -> GradientBundle:
    """Sample task gradients sharing a planted low-rank subspace."""
    tasks = int(rng.integers(2, 7))
    dims = int(rng.integers(8, 65))
    rank = int(rng.integers(1, tasks + 1))
    basis, _ = np.linalg.qr(rng.normal(size=(dims, rank)))
    gradients = rng.normal(size=(tasks, rank)) @ basis.T
    gradients += noise * np.linalg.norm(gradients, axis=1, keepdims=True) * (
        rng.normal(size=(tasks, dims)) / np.sqrt(dims)
    )
    weights = rng.uniform(0.1, 2.0, size=tasks)
    return GradientBundle(gradients=gradients, weights=weights)


def run_proposition1_suite(
    trials: int,
    seed: int,
    workers: int = 1,
) -> t.List[t.Dict[str, t.Any]]:
    """Check the gradient reduction bound on planted low-rank bundles.

    Args:
        trials: number of bundles
        seed: master seed; trial ``i`` uses its own stream
        workers: worker thread count

    Returns:
        per-trial records, in trial order
    """

    def run_trial(index: int) -> t.Dict[str, t.Any]:
        rng = _common.make_rng(seed, _PROPOSITION_STREAM, index)
        bundle = planted_gradient_bundle(rng)
        report = proposition1_check(bundle)
        return {
            "trial": index,
            "tasks": bundle.gradients.shape[0],
            "dims": bundle.gradients.shape[1],
            "slack": report.rhs - report.lhs,
            **report.to_data(),
        }

    records = _common.map_ordered(run_trial, range(trials), workers=workers)
    held = sum(r["holds"] for r in records)
    logger.info(f"Gradient bound held in {held}/{len(records)} trials")
    return records
