"""Entrywise power-map deformation of symmetric matrices.

The map raises every entry to a power q >= 1 while conserving its sign:
C_kl -> sign(C_kl) |C_kl|^q. For q close to one, introducing
alpha = q - 1 gives the first-order (linear-response) form
C + (alpha/2) * C * ln(C*C), with the Hadamard product taken entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import symmetrize

__all__ = ["Deformation", "power_map", "linear_response_map"]


@dataclass(frozen=True)
class Deformation:
    """Power-map exponent q >= 1; alpha = q - 1 is the small parameter."""

    q: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.q) or self.q < 1.0:
            raise ValueError(f"exponent below 1 is not supported (q={self.q})")

    @property
    def alpha(self) -> float:
        return self.q - 1.0


def power_map(c: np.ndarray, deformation: Deformation) -> np.ndarray:
    """Apply sign(C_kl) |C_kl|^q entrywise.

    0^q is 0, entries of magnitude one are fixed points, and symmetry is
    preserved bit-exactly (upper triangle computed, then mirrored).
    q == 1 returns an exact copy.
    """
    c = np.asarray(c, dtype=float)
    if deformation.q == 1.0:
        return c.copy()
    out = np.sign(c) * np.abs(c) ** deformation.q
    return symmetrize(out)


def linear_response_map(c: np.ndarray, alpha: float) -> np.ndarray:
    """First-order deformation C + (alpha/2) C ln(C*C), entrywise.

    Zero entries stay zero (the x ln x^2 -> 0 limit), so no NaN leaks in
    from ln 0. Valid as an approximation only for small alpha; the caller
    owns that judgement.
    """
    c = np.asarray(c, dtype=float)
    correction = np.zeros_like(c)
    nz = c != 0.0
    correction[nz] = c[nz] * np.log(c[nz] * c[nz])
    return symmetrize(c + 0.5 * alpha * correction)
