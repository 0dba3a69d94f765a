"""Closed-form and semi-analytic verification tools.

Multinomial moment identities, the proved multishot MSE formula for
classical shadows (evaluated by Monte Carlo over the unitary ensemble),
the density of Haar-random rank-1 observable overlaps, and empirical
MSE aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, Observable, expectation
from .ensembles import EnsembleSpec, GlobalHaar, RngLike, as_generator, sample_global_haar_batch


@dataclass(frozen=True)
class MseEstimate:
    """A mean squared error with its standard error and sample count."""

    value: float
    std_error: float
    samples: int

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.samples}")
        if self.std_error < 0.0:
            raise ValueError(f"standard error must be >= 0, got {self.std_error}")


def multinomial_moments(
    probabilities: np.ndarray, shots: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact second moments of multinomial frequencies p̂ = f / L.

    Returns the vector E[p̂_k^2] = (p_k + (L-1) p_k^2) / L and the matrix
    E[p̂_k p̂_k'] = (1 - 1/L) p_k p_k' for k != k'; the matrix diagonal is
    filled with the second moments so the matrix is E[p̂ p̂ᵀ] in full.
    """
    p = np.asarray(probabilities, dtype=float)
    if shots < 1:
        raise ValueError(f"shot count must be >= 1, got {shots}")
    second = (p + (shots - 1) * p * p) / shots
    cross = (1.0 - 1.0 / shots) * np.outer(p, p)
    np.fill_diagonal(cross, second)
    return second, cross


def mse_theorem1(
    state: DensityMatrix,
    obs: Observable,
    spec: EnsembleSpec,
    settings: int,
    shots: int,
    ensemble_samples: int,
    rng: RngLike,
    batch_size: int = 4096,
) -> MseEstimate:
    """MSE of the CS estimate of tr(Lambda rho) for M settings x L shots.

    Evaluates the exact per-unitary expression

        (1/(ML)) sum_k (p_k + (L-1) p_k^2) t_k^2
        + ((1-1/L)/M) sum_{k != k'} p_k p_k' t_k t_k'
        - (1/M) (tr(Lambda rho))^2

    with p_k = tr(A_k rho) and t_k = tr(Lambda M^{-1}(A_k)), then
    averages over Monte Carlo draws of the measurement unitary,
    reporting the standard error of that ensemble average. The k != k'
    double sum is folded into (sum p t)^2 - sum p^2 t^2 for O(K) cost.

    Only global-Haar ensembles are supported: the analytic channel
    inverse baked into t_k is specific to that ensemble.
    """
    if not isinstance(spec, GlobalHaar):
        raise ValueError(
            f"unsupported-ensemble: theorem-1 evaluation needs GlobalHaar, "
            f"got {type(spec).__name__}"
        )
    if spec.dim != state.dim or obs.dim != state.dim:
        raise ValueError(
            f"dim-mismatch: ensemble {spec.dim}, state {state.dim}, observable {obs.dim}"
        )
    if ensemble_samples < 2:
        raise ValueError(f"need >= 2 ensemble samples, got {ensemble_samples}")
    if settings < 1 or shots < 1:
        raise ValueError("settings and shots must both be >= 1")

    dim = state.dim
    rho = state.matrix
    lam_matrix = obs.matrix
    trace_lam = float(lam_matrix.trace().real)
    truth = expectation(obs, state)
    generator = as_generator(rng)

    values = np.empty(ensemble_samples)
    filled = 0
    while filled < ensemble_samples:
        batch = min(batch_size, ensemble_samples - filled)
        unitaries = sample_global_haar_batch(dim, batch, generator)
        conj = unitaries.conj()
        p = np.einsum("bki,ij,bkj->bk", unitaries, rho, conj).real
        overlap = np.einsum("bki,ij,bkj->bk", unitaries, lam_matrix, conj).real
        t = (dim + 1) * overlap - trace_lam

        weighted = (p + (shots - 1) * p * p) * t * t
        first = weighted.sum(axis=1) / (settings * shots)
        pt = (p * t).sum(axis=1)
        second = (pt * pt - (p * p * t * t).sum(axis=1)) * (1.0 - 1.0 / shots) / settings
        values[filled : filled + batch] = first + second - truth * truth / settings
        filled += batch

    std_error = float(values.std(ddof=1) / np.sqrt(ensemble_samples))
    return MseEstimate(float(values.mean()), std_error, ensemble_samples)


def random_observable_pdf(lam, dim: int):
    """Density (D-1)(1-lam)^(D-2) of tr(Lambda rho) for a Haar-random
    rank-1 observable against a fixed pure state."""
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    values = np.asarray(lam, dtype=float)
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("overlap values must lie in [0, 1]")
    density = (dim - 1) * (1.0 - values) ** (dim - 2)
    return float(density) if np.isscalar(lam) else density


def random_observable_cdf(lam, dim: int):
    """CDF 1 - (1-lam)^(D-1) matching :func:`random_observable_pdf`."""
    if dim < 2:
        raise ValueError(f"dimension must be >= 2, got {dim}")
    values = np.asarray(lam, dtype=float)
    cdf = 1.0 - (1.0 - values) ** (dim - 1)
    return float(cdf) if np.isscalar(lam) else cdf


def empirical_mse(estimates, truth: float) -> MseEstimate:
    """Mean squared deviation from the ground truth, with standard error."""
    values = np.asarray(estimates, dtype=float)
    if values.size < 2:
        raise ValueError(f"need >= 2 estimates, got {values.size}")
    squared = (values - truth) ** 2
    std_error = float(squared.std(ddof=1) / np.sqrt(squared.size))
    return MseEstimate(float(squared.mean()), std_error, int(squared.size))
