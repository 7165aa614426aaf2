"""Seeded generation of Wishart and correlated-Wishart sample matrices.

Conventions
-----------
- A data matrix holds N time series of horizon T as an N x T array of
  independent zero-mean Gaussians with variance sigma^2.
- A plain (uncorrelated) sample matrix is C = A A^t / T.
- A correlated sample is C = xi^{1/2} (B B^t / T) xi^{1/2} for a fixed
  positive-definite population correlation xi, so that the ensemble mean
  of C is sigma^2 * xi.
- All sample matrices are exactly symmetric: the upper triangle is
  computed and mirrored.

Reproducibility
---------------
Draws use numpy's counter-based Philox generator keyed directly by a
64-bit seed; normal deviates come from ``Generator.standard_normal``
(ziggurat). Both are fixed per release so golden outputs are stable.
Substream seeds for realization sweeps derive from
``(master_seed, realization_index)`` through a SplitMix64-style mix
(:func:`derive_seed`), which makes parallel sweeps reproducible
independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EnsembleShape",
    "DataMatrix",
    "PopulationCorrelation",
    "SampleMatrix",
    "derive_seed",
    "sample_gaussian",
    "wishart",
    "cwoe_sample",
    "build_identity",
    "build_one_block",
    "build_block_diagonal",
    "build_banded",
    "matrix_sqrt",
    "rank_tolerance",
    "symmetrize",
]

_MASK64 = (1 << 64) - 1
# SplitMix64 increment and finalizer multipliers (Steele et al.), fixed
# so that derived substream seeds never change between releases.
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MULT1 = 0xBF58476D1CE4E5B9
_SM_MULT2 = 0x94D049BB133111EB


def derive_seed(master_seed: int, index: int) -> int:
    """Derive the 64-bit substream seed for one realization.

    SplitMix64 finalizer applied to ``master_seed + (index+1) * gamma``
    (mod 2^64). Collision-free across indices for a fixed master seed.
    """
    if master_seed < 0 or index < 0:
        raise ValueError("master_seed and index must be non-negative")
    z = (master_seed + (index + 1) * _SM_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SM_MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MULT2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle onto the lower one (exact symmetry)."""
    return np.triu(m) + np.triu(m, 1).T


@dataclass(frozen=True)
class EnsembleShape:
    """Dimensions of the ensemble: N series over horizon T.

    ``kappa = horizon / n_series`` is the aspect ratio; ``kappa < 1`` is
    the singular regime. ``variance`` is the element variance sigma^2 of
    the underlying Gaussians.
    """

    n_series: int
    horizon: int
    variance: float = 1.0

    def __post_init__(self) -> None:
        if self.n_series < 2:
            raise ValueError("n_series must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.variance > 0:
            raise ValueError("variance must be > 0")

    @property
    def kappa(self) -> float:
        return self.horizon / self.n_series


@dataclass(frozen=True)
class DataMatrix:
    """N x T Gaussian data matrix together with its shape and seed."""

    entries: np.ndarray
    shape: EnsembleShape
    seed: int

    def __post_init__(self) -> None:
        n, t = self.entries.shape
        if n != self.shape.n_series or t != self.shape.horizon:
            raise ValueError("entries do not match the declared shape")


@dataclass(frozen=True)
class PopulationCorrelation:
    """Nonrandom population correlation xi with spectrum and square root.

    ``kind`` is one of ``identity``, ``one-block``, ``block-diagonal`` or
    ``banded``. ``blocks`` records the (size, coeff) structure for the
    block kinds; ``decay`` the coefficient of the banded kind.
    """

    kind: str
    matrix: np.ndarray
    spectrum: np.ndarray
    sqrt: np.ndarray
    blocks: tuple[tuple[int, float], ...] | None = None
    decay: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SampleMatrix:
    """Symmetric N x N sample matrix C with its generating context."""

    entries: np.ndarray
    shape: EnsembleShape
    population: PopulationCorrelation = field(repr=False, default=None)  # type: ignore[assignment]


def sample_gaussian(shape: EnsembleShape, seed: int) -> DataMatrix:
    """Draw an N x T matrix of iid zero-mean Gaussians with variance sigma^2.

    Identical ``(shape, seed)`` yield bit-identical entries.
    """
    rng = _rng(seed)
    entries = rng.standard_normal((shape.n_series, shape.horizon))
    if shape.variance != 1.0:
        entries *= np.sqrt(shape.variance)
    return DataMatrix(entries=entries, shape=shape, seed=seed)


def wishart(data: DataMatrix) -> SampleMatrix:
    """Form the sample matrix C = A A^t / T from a data matrix.

    The result is exactly symmetric and positive semi-definite with rank
    at most min(N, T); its population correlation is the identity.
    """
    a = data.entries
    if not np.all(np.isfinite(a)):
        raise ValueError("data matrix contains non-finite entries")
    c = symmetrize(a @ a.T) / data.shape.horizon
    return SampleMatrix(entries=c, shape=data.shape,
                        population=build_identity(data.shape.n_series))


def cwoe_sample(xi: PopulationCorrelation, shape: EnsembleShape,
                seed: int) -> SampleMatrix:
    """Draw a correlated sample C = xi^{1/2} (B B^t / T) xi^{1/2}.

    The 1/T normalization makes the ensemble mean of C equal
    sigma^2 * xi.
    """
    if xi.dim != shape.n_series:
        raise ValueError(
            f"population dimension {xi.dim} != n_series {shape.n_series}")
    b = sample_gaussian(shape, seed).entries
    w = symmetrize(b @ b.T) / shape.horizon
    c = symmetrize(xi.sqrt @ w @ xi.sqrt)
    return SampleMatrix(entries=c, shape=shape, population=xi)


def _spd_sqrt(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral decomposition sqrt of a symmetric positive-definite matrix.

    Returns (spectrum ascending, symmetric square root). Raises if any
    eigenvalue is <= 0.
    """
    values, vectors = np.linalg.eigh(matrix)
    if values[0] <= 0:
        raise ValueError(
            f"matrix is not positive definite (min eigenvalue {values[0]:.3e})")
    root = symmetrize((vectors * np.sqrt(values)) @ vectors.T)
    return values, root


def _build(kind: str, matrix: np.ndarray,
           blocks: tuple[tuple[int, float], ...] | None = None,
           decay: float | None = None) -> PopulationCorrelation:
    matrix = symmetrize(matrix)
    spectrum, root = _spd_sqrt(matrix)
    return PopulationCorrelation(kind=kind, matrix=matrix, spectrum=spectrum,
                                 sqrt=root, blocks=blocks, decay=decay)


def build_identity(n: int) -> PopulationCorrelation:
    """Identity population (the uncorrelated null case)."""
    eye = np.eye(n)
    return PopulationCorrelation(kind="identity", matrix=eye,
                                 spectrum=np.ones(n), sqrt=eye.copy())


def _check_coeff(c: float) -> None:
    if not 0.0 <= c < 1.0:
        raise ValueError(f"correlation coefficient must be in [0, 1), got {c}")


def build_one_block(n: int, c: float) -> PopulationCorrelation:
    """Uniform population xi_jk = delta_jk + (1 - delta_jk) c.

    Spectrum is (1 - c) with multiplicity n-1 plus the collective value
    n*c + 1 - c.
    """
    _check_coeff(c)
    matrix = np.full((n, n), c)
    np.fill_diagonal(matrix, 1.0)
    return _build("one-block", matrix, blocks=((n, c),))


def build_block_diagonal(blocks) -> PopulationCorrelation:
    """Block-diagonal population: within block i the off-diagonals are c_i.

    ``blocks`` is a sequence of (size, coeff) pairs; entries between
    blocks are zero.
    """
    blocks = tuple((int(s), float(c)) for s, c in blocks)
    if not blocks:
        raise ValueError("at least one block required")
    for size, c in blocks:
        if size < 1:
            raise ValueError("block sizes must be >= 1")
        _check_coeff(c)
    n = sum(s for s, _ in blocks)
    matrix = np.zeros((n, n))
    offset = 0
    for size, c in blocks:
        matrix[offset:offset + size, offset:offset + size] = c
        offset += size
    np.fill_diagonal(matrix, 1.0)
    return _build("block-diagonal", matrix, blocks=blocks)


def build_banded(n: int, c: float) -> PopulationCorrelation:
    """Exponentially decaying band population xi_jk = c^{|j-k|}.

    Positive definite for all c in [0, 1); the spectrum approaches
    [(1-c)/(1+c), (1+c)/(1-c)] as n grows.
    """
    _check_coeff(c)
    idx = np.arange(n)
    matrix = c ** np.abs(np.subtract.outer(idx, idx)) if c > 0 else np.eye(n)
    return _build("banded", matrix, decay=c)


def matrix_sqrt(xi) -> np.ndarray:
    """Symmetric square root S with S @ S = xi (spectral decomposition).

    Accepts a PopulationCorrelation (returns a fresh root computed from
    its matrix) or a plain symmetric positive-definite array.
    """
    matrix = xi.matrix if isinstance(xi, PopulationCorrelation) else np.asarray(xi, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    _, root = _spd_sqrt(symmetrize(matrix))
    return root


def rank_tolerance(c: np.ndarray) -> float:
    """Eigenvalue threshold separating numerical zeros from the bulk.

    Scales with the diagonal magnitude and the dimension:
    tol = 1e-10 * max|C_jj| * N.
    """
    n = c.shape[0]
    return 1e-10 * float(np.max(np.abs(np.diag(c)))) * n
