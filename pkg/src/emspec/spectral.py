"""Eigendecomposition, emerging/bulk spectral splits, moments, histograms.

A deformed sample matrix is paired with its undeformed original by
ascending eigenvalue rank. The first max(N - T, 0) corrections form the
emerging part (the lifted zero modes of a singular sample matrix); the
remainder are the bulk corrections. Empirical moments follow the
all-over-N convention: the n-th moment of a part is the mean over
realizations of sum((corrections in part)^n) / N, so that
total = emerging + bulk holds exactly for every order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensembles import SampleMatrix
from .powermap import Deformation, power_map

__all__ = [
    "EigenSolverError",
    "EigenSystem",
    "SpectralSplit",
    "MomentSet",
    "DensityHistogram",
    "eigh",
    "split_spectrum",
    "empirical_moments",
    "histogram",
    "block_overlap",
    "detach_by_largest_gap",
]


class EigenSolverError(RuntimeError):
    """Eigensolver failed to converge; carries condition diagnostics."""


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues ascending, with orthonormal column eigenvectors on demand."""

    values: np.ndarray
    vectors: np.ndarray | None = None


def eigh(matrix: np.ndarray, want_vectors: bool = False) -> EigenSystem:
    """Symmetric eigendecomposition with ascending eigenvalues.

    The input must be exactly symmetric and finite (sample matrices are
    constructed that way). Deterministic for a fixed input.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not exactly symmetric")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    try:
        if want_vectors:
            values, vectors = np.linalg.eigh(m)
            return EigenSystem(values=values, vectors=vectors)
        return EigenSystem(values=np.linalg.eigvalsh(m))
    except np.linalg.LinAlgError as exc:
        scale = float(np.max(np.abs(m)))
        raise EigenSolverError(
            f"eigensolver did not converge (n={m.shape[0]}, max|entry|={scale:.3e})"
        ) from exc


@dataclass(frozen=True)
class SpectralSplit:
    """Rank-paired spectra of C and its deformation, split at index N - T.

    ``corrections[j] = deformed_values[j] - base_values[j]`` with both
    spectra sorted ascending. ``emerging_count`` is max(N - T, 0); the
    boundary is fixed by index, never by value.
    """

    base_values: np.ndarray
    deformed_values: np.ndarray
    emerging_count: int

    @property
    def corrections(self) -> np.ndarray:
        return self.deformed_values - self.base_values

    @property
    def emerging(self) -> np.ndarray:
        return self.corrections[: self.emerging_count]

    @property
    def bulk(self) -> np.ndarray:
        return self.corrections[self.emerging_count:]

    @property
    def n(self) -> int:
        return self.base_values.size


def split_spectrum(sample: SampleMatrix, deformation: Deformation) -> SpectralSplit:
    """Eigendecompose C and its power-mapped image; pair by ascending rank."""
    base = eigh(sample.entries).values
    deformed = eigh(power_map(sample.entries, deformation)).values
    shape = sample.shape
    count = max(shape.n_series - shape.horizon, 0)
    return SpectralSplit(base_values=base, deformed_values=deformed,
                         emerging_count=count)


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of the corrections, split by part.

    Each of ``total``, ``emerging`` and ``bulk`` is an (m1, m2) pair;
    ``standard_errors`` holds the matching six across-realization
    standard errors in the order (total m1, total m2, emerging m1,
    emerging m2, bulk m1, bulk m2).
    """

    total: tuple[float, float]
    emerging: tuple[float, float]
    bulk: tuple[float, float]
    realizations: int
    standard_errors: tuple[float, float, float, float, float, float]

    def to_json(self, indent: int | None = 2) -> str:
        """Moment report as JSON; key order is fixed as documented."""
        se = self.standard_errors
        report = {
            "realizations": self.realizations,
            "total": {"m1": self.total[0], "m2": self.total[1]},
            "emerging": {"m1": self.emerging[0], "m2": self.emerging[1]},
            "bulk": {"m1": self.bulk[0], "m2": self.bulk[1]},
            "standard_errors": {
                "total_m1": se[0], "total_m2": se[1],
                "emerging_m1": se[2], "emerging_m2": se[3],
                "bulk_m1": se[4], "bulk_m2": se[5],
            },
        }
        return json.dumps(report, indent=indent)


def _se(samples: np.ndarray) -> float:
    if samples.size <= 1:
        return 0.0
    return float(samples.std(ddof=1) / np.sqrt(samples.size))


def empirical_moments(splits: list[SpectralSplit]) -> MomentSet:
    """Across-realization moments of the corrections for n = 1, 2.

    All splits must share (N, T). Sums are restricted to the emerging or
    bulk index range but always divided by N, so the parts add up to the
    total exactly.
    """
    if not splits:
        raise ValueError("empty list of spectral splits")
    n = splits[0].n
    count = splits[0].emerging_count
    if any(s.n != n or s.emerging_count != count for s in splits):
        raise ValueError("all splits must share the same (N, T)")

    per = {"total": [], "emerging": [], "bulk": []}
    for s in splits:
        d = s.corrections
        e = d[:count]
        b = d[count:]
        per["total"].append((d.sum() / n, (d ** 2).sum() / n))
        per["emerging"].append((e.sum() / n, (e ** 2).sum() / n))
        per["bulk"].append((b.sum() / n, (b ** 2).sum() / n))

    arr = {k: np.asarray(v) for k, v in per.items()}
    means = {k: (float(a[:, 0].mean()), float(a[:, 1].mean())) for k, a in arr.items()}
    ses = (
        _se(arr["total"][:, 0]), _se(arr["total"][:, 1]),
        _se(arr["emerging"][:, 0]), _se(arr["emerging"][:, 1]),
        _se(arr["bulk"][:, 0]), _se(arr["bulk"][:, 1]),
    )
    return MomentSet(total=means["total"], emerging=means["emerging"],
                     bulk=means["bulk"], realizations=len(splits),
                     standard_errors=ses)


@dataclass(frozen=True)
class DensityHistogram:
    """Histogram scaled so that sum(density * bin width) = normalization.

    Out-of-range values are counted separately (``below``/``above``) and
    do not contribute mass.
    """

    bin_edges: np.ndarray
    density: np.ndarray
    normalization: float
    below: int
    above: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))

    def csv_rows(self):
        """Rows (bin_lo, bin_hi, density) in fixed column order."""
        for lo, hi, d in zip(self.bin_edges[:-1], self.bin_edges[1:], self.density):
            yield float(lo), float(hi), float(d)


def histogram(values, bins: int, value_range: tuple[float, float],
              normalization: float = 1.0) -> DensityHistogram:
    """Bin values on [lo, hi] and rescale mass to ``normalization``."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise ValueError("range must satisfy lo < hi")
    values = np.asarray(values, dtype=float).ravel()
    below = int(np.sum(values < lo))
    above = int(np.sum(values > hi))
    inside = values[(values >= lo) & (values <= hi)]
    counts, edges = np.histogram(inside, bins=bins, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        if normalization != 0.0:
            raise ValueError("no values inside the histogram range")
        density = np.zeros(bins)
    else:
        density = counts * (normalization / total) / np.diff(edges)
    return DensityHistogram(bin_edges=edges, density=density,
                            normalization=normalization,
                            below=below, above=above)


def block_overlap(vectors: np.ndarray, blocks, indices) -> np.ndarray:
    """Squared-amplitude weight of selected eigenvectors inside each block.

    ``blocks`` is a sequence of (size, coeff) pairs (or bare sizes) whose
    sizes must sum to the vector dimension; ``indices`` selects columns
    of ``vectors``. Returns an array of shape (len(indices), n_blocks)
    whose rows sum to one.
    """
    sizes = [int(b[0]) if isinstance(b, (tuple, list)) else int(b) for b in blocks]
    vectors = np.asarray(vectors, dtype=float)
    if sum(sizes) != vectors.shape[0]:
        raise ValueError("block sizes must sum to the vector dimension")
    bounds = np.cumsum([0] + sizes)
    out = np.empty((len(indices), len(sizes)))
    for row, idx in enumerate(indices):
        v = vectors[:, idx]
        weights = np.array([np.sum(v[a:b] ** 2) for a, b in zip(bounds[:-1], bounds[1:])])
        out[row] = weights / weights.sum()
    return out


def detach_by_largest_gap(values: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Diagnostic split of a spectrum: detach the more isolated extreme value.

    Returns (detached value, remaining bulk, edge gap), picking whichever
    of the smallest/largest entries sits further from its neighbour.
    Purely a reporting aid; moments never use it.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size < 3:
        raise ValueError("need at least 3 values to detach one")
    bottom_gap = v[1] - v[0]
    top_gap = v[-1] - v[-2]
    if bottom_gap >= top_gap:
        return float(v[0]), v[1:], float(bottom_gap)
    return float(v[-1]), v[:-1], float(top_gap)
