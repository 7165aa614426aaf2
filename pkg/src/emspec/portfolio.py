"""Minimum-variance portfolio experiment under power-mapped correlations.

A synthetic market of N stocks has a block model correlation (industry
sectors) and fixed, randomly drawn volatilities. Returns simulated from
the model covariance are used to estimate sample correlation matrices
over horizons T; the estimated covariance (raw, or entrywise
power-mapped) feeds the analytic minimum-variance weights, and the
achieved true variance is compared to the optimum. The interesting
regime is T < N, where the raw sample estimator is singular but the
power-mapped one still produces usable weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import derive_seed, matrix_sqrt, symmetrize
from .powermap import Deformation, power_map

__all__ = [
    "SingularCovarianceError",
    "PortfolioModel",
    "PortfolioResult",
    "SweepCell",
    "build_model",
    "min_variance_weights",
    "simulate_returns",
    "sample_correlation",
    "power_mapped_covariance",
    "portfolio_trial",
    "run_sweep",
]

RAW_METHOD = "sample-raw"
POWER_METHOD = "power-map"
BEST_METHOD = "power-map-best"


class SingularCovarianceError(ValueError):
    """Covariance is singular or not positive definite; carries diagnostics."""

    def __init__(self, message: str, min_eigenvalue: float, condition: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.condition = condition


@dataclass(frozen=True)
class PortfolioModel:
    """Model market: correlation C0, volatilities, covariance Sigma0 = s C0 s."""

    n_assets: int
    model_correlation: np.ndarray
    volatilities: np.ndarray
    model_covariance: np.ndarray

    @property
    def minimum_variance(self) -> float:
        w = min_variance_weights(self.model_covariance)
        return float(w @ self.model_covariance @ w)

    @property
    def homogeneous_ratio(self) -> float:
        """True variance of the equal-weight portfolio over the optimum."""
        n = self.n_assets
        w = np.full(n, 1.0 / n)
        return float(w @ self.model_covariance @ w) / self.minimum_variance


@dataclass(frozen=True)
class PortfolioResult:
    """One estimated portfolio: horizon, exponent, achieved ratio, weights."""

    horizon: int
    exponent: float
    ratio: float
    weights: np.ndarray


@dataclass(frozen=True)
class SweepCell:
    """Aggregate of one (method, T, q) cell of the sweep."""

    method: str
    horizon: int
    exponent: float | None
    mean_ratio: float
    stderr: float
    n_ok: int
    realizations: int


def build_model(n_assets: int = 100, n_blocks: int = 5, block_coeff: float = 0.5,
                vol_range: tuple[float, float] = (0.1, 0.4),
                vol_seed: int = 2001) -> PortfolioModel:
    """Build the block-sector model with log-uniform volatilities.

    ``n_assets`` must divide evenly into ``n_blocks`` equal sectors; the
    volatilities are drawn once from ``vol_seed`` and then fixed with
    the model.
    """
    if n_assets % n_blocks != 0:
        raise ValueError("n_assets must be divisible by n_blocks")
    if not 0.0 <= block_coeff < 1.0:
        raise ValueError("block_coeff must be in [0, 1)")
    size = n_assets // n_blocks
    corr = np.zeros((n_assets, n_assets))
    for b in range(n_blocks):
        corr[b * size:(b + 1) * size, b * size:(b + 1) * size] = block_coeff
    np.fill_diagonal(corr, 1.0)
    rng = np.random.Generator(np.random.Philox(key=vol_seed))
    lo, hi = vol_range
    vols = np.exp(rng.uniform(np.log(lo), np.log(hi), n_assets))
    cov = symmetrize(corr * np.outer(vols, vols))
    return PortfolioModel(n_assets=n_assets, model_correlation=corr,
                          volatilities=vols, model_covariance=cov)


def min_variance_weights(sigma: np.ndarray) -> np.ndarray:
    """Analytic minimum-variance weights Sigma^{-1} e / (e^t Sigma^{-1} e).

    Solves the linear system rather than forming the inverse. Raises
    :class:`SingularCovarianceError` when Sigma is singular or not
    positive definite, reporting the condition estimate.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(symmetrize(sigma))
        cond = float(np.abs(eigs).max() / max(np.abs(eigs).min(), 1e-300))
        raise SingularCovarianceError(
            f"covariance not positive definite "
            f"(min eigenvalue {eigs[0]:.3e}, condition ~{cond:.3e})",
            min_eigenvalue=float(eigs[0]), condition=cond) from None
    u = np.linalg.solve(sigma, np.ones(n))
    return u / u.sum()


def simulate_returns(model: PortfolioModel, horizon: int, seed: int) -> np.ndarray:
    """Simulate N x T returns with population covariance exactly Sigma0.

    Generated as Sigma0^{1/2} @ (iid standard Gaussians); the symmetric
    square root is recomputed from the model covariance on each call,
    which keeps the function pure.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    root = matrix_sqrt(model.model_covariance)
    rng = np.random.Generator(np.random.Philox(key=seed))
    return root @ rng.standard_normal((model.n_assets, horizon))


def sample_correlation(returns: np.ndarray) -> np.ndarray:
    """Pearson sample correlation of the rows of an N x T return matrix.

    Unit diagonal exact, entries clipped into [-1, 1], exactly symmetric.
    Rank is at most T for T < N. Raises on a zero-variance row.
    """
    x = np.asarray(returns, dtype=float)
    centered = x - x.mean(axis=1, keepdims=True)
    sd = centered.std(axis=1, ddof=1)
    if np.any(sd == 0):
        raise ValueError("zero-variance row: correlation undefined")
    z = centered / sd[:, None]
    corr = symmetrize(z @ z.T) / (x.shape[1] - 1)
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def power_mapped_covariance(samp_corr: np.ndarray, volatilities: np.ndarray,
                            q: float) -> np.ndarray:
    """Covariance sigma_k sigma_l sign(C_kl)|C_kl|^q from a sample correlation.

    The unit diagonal is a fixed point of the map, so the variances
    sigma_k^2 are preserved exactly for every q.
    """
    mapped = power_map(np.asarray(samp_corr, dtype=float), Deformation(q))
    vols = np.asarray(volatilities, dtype=float)
    return symmetrize(mapped * np.outer(vols, vols))


def portfolio_trial(model: PortfolioModel, horizon: int, q: float | None,
                    seed: int) -> PortfolioResult:
    """One realization: simulate, estimate, optimize, evaluate on Sigma0.

    ``q is None`` uses the raw sample covariance; otherwise the sample
    correlation is power-mapped with exponent q before rescaling by the
    sample volatilities. The achieved ratio is w^t Sigma0 w / Omega0^2.
    """
    returns = simulate_returns(model, horizon, seed)
    corr = sample_correlation(returns)
    sample_vols = (returns - returns.mean(axis=1, keepdims=True)).std(axis=1, ddof=1)
    if q is None:
        estimate = symmetrize(corr * np.outer(sample_vols, sample_vols))
        exponent = 1.0
    else:
        estimate = power_mapped_covariance(corr, sample_vols, q)
        exponent = q
    weights = min_variance_weights(estimate)
    achieved = float(weights @ model.model_covariance @ weights)
    return PortfolioResult(horizon=horizon, exponent=exponent,
                           ratio=achieved / model.minimum_variance,
                           weights=weights)


def realization_ratios(model: PortfolioModel, horizon: int, q_grid,
                       seed: int, root: np.ndarray | None = None,
                       minimum: float | None = None) -> dict[float | None, float]:
    """Achieved ratios of every method on one shared simulated sample.

    Returns a map q -> ratio with ``None`` for the raw sample method
    (present only when T > N); cells whose estimate is singular or
    indefinite are reported as NaN. All methods see the same returns, so
    the comparison is paired.
    """
    if root is None:
        root = matrix_sqrt(model.model_covariance)
    if minimum is None:
        minimum = model.minimum_variance
    rng = np.random.Generator(np.random.Philox(key=seed))
    returns = root @ rng.standard_normal((model.n_assets, horizon))
    corr = sample_correlation(returns)
    sample_vols = (returns - returns.mean(axis=1, keepdims=True)).std(axis=1, ddof=1)

    out: dict[float | None, float] = {}

    def ratio_for(estimate: np.ndarray) -> float:
        try:
            w = min_variance_weights(estimate)
        except SingularCovarianceError:
            return float("nan")
        return float(w @ model.model_covariance @ w) / minimum

    if horizon > model.n_assets:
        out[None] = ratio_for(symmetrize(corr * np.outer(sample_vols, sample_vols)))
    for q in q_grid:
        out[float(q)] = ratio_for(power_mapped_covariance(corr, sample_vols, q))
    return out


def sweep_seed(master_seed: int, horizon_index: int, realizations: int,
               realization_index: int) -> int:
    """Substream seed of one sweep realization; independent of scheduling."""
    return derive_seed(master_seed, horizon_index * realizations + realization_index)


def aggregate_sweep(horizons, q_grid, samples, realizations: int) -> list[SweepCell]:
    """Turn per-cell ratio samples into the emitted sweep cells.

    ``samples[(horizon, q)]`` lists the surviving ratios of that cell,
    with ``q = None`` for the raw method. Adds one best-exponent summary
    cell per horizon.
    """
    q_grid = [float(q) for q in q_grid]
    cells: list[SweepCell] = []
    for horizon in horizons:
        def cell_for(method: str, q: float | None) -> SweepCell:
            vals = np.asarray(samples.get((horizon, q), []), dtype=float)
            if vals.size:
                mean = float(vals.mean())
                se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            else:
                mean, se = float("nan"), float("nan")
            return SweepCell(method=method, horizon=horizon, exponent=q,
                             mean_ratio=mean, stderr=se, n_ok=int(vals.size),
                             realizations=realizations)

        cells.append(cell_for(RAW_METHOD, None))
        best: SweepCell | None = None
        for q in q_grid:
            cell = cell_for(POWER_METHOD, q)
            cells.append(cell)
            if cell.n_ok and (best is None or cell.mean_ratio < best.mean_ratio):
                best = cell
        if best is not None:
            cells.append(SweepCell(method=BEST_METHOD, horizon=best.horizon,
                                   exponent=best.exponent,
                                   mean_ratio=best.mean_ratio,
                                   stderr=best.stderr, n_ok=best.n_ok,
                                   realizations=realizations))
    return cells


def run_sweep(model: PortfolioModel, horizons, q_grid, realizations: int,
              master_seed: int) -> list[SweepCell]:
    """Average the achieved-variance ratio per (method, T, q) cell.

    For every horizon the raw sample method runs only when T > N (the
    estimator is singular otherwise and its cell is emitted as missing);
    each exponent in ``q_grid`` gets its own cell, and a best-exponent
    summary cell per horizon reports the minimum mean ratio over the
    grid. Realizations whose estimate is singular or indefinite are
    dropped from their cell (``n_ok`` records how many survived).
    Realization seeds derive from (master_seed, index), so results do
    not depend on scheduling or worker count.
    """
    horizons = list(horizons)
    q_grid = [float(q) for q in q_grid]
    root = matrix_sqrt(model.model_covariance)
    minimum = model.minimum_variance
    samples: dict[tuple[int, float | None], list[float]] = {}
    for hi, horizon in enumerate(horizons):
        for index in range(realizations):
            seed = sweep_seed(master_seed, hi, realizations, index)
            ratios = realization_ratios(model, horizon, q_grid, seed,
                                        root=root, minimum=minimum)
            for q, value in ratios.items():
                if not np.isnan(value):
                    samples.setdefault((horizon, q), []).append(value)
    return aggregate_sweep(horizons, q_grid, samples, realizations)
