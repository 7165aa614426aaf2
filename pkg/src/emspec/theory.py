"""Closed-form and semi-analytic spectral predictions.

Covers the Marchenko-Pastur law, the correlated-ensemble resolvent and
its density inversion, exact moments of sample-matrix elements, the
first two moments of power-map eigenvalue corrections (exact in T and
large-T asymptotic), the rescaled/shifted Marchenko-Pastur ansatz for
the bulk-correction density with its moment inversion, the closed forms
for a uniformly correlated (one-block) population, and the digamma /
trigamma special functions these formulas need.

Everything here is a pure function of its arguments. Formulas derived in
a linear-response expansion warn (:class:`LinearResponseWarning`) when
alpha * ln(T)^2 > 0.1 or kappa < 0.1, where the expansion degrades.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "C1",
    "C2",
    "TheoryConstants",
    "CONSTANTS",
    "LinearResponseWarning",
    "ConvergenceError",
    "digamma",
    "trigamma",
    "mp_support",
    "mp_density",
    "mp_zero_mass",
    "mp_resolvent",
    "ResolventQuery",
    "cwoe_resolvent",
    "cwoe_density",
    "cwoe_density_grid",
    "element_moment",
    "delta_m1_exact",
    "delta_m2_exact",
    "delta_m_asymptotic",
    "AnsatzParams",
    "ansatz_support",
    "ansatz_density",
    "ansatz_moments",
    "ansatz_invert",
    "ansatz_asymptotic",
    "bulk_moment_extrapolation",
    "emerging_moments",
    "oneblock_support",
    "oneblock_density",
    "oneblock_separated_position",
    "oneblock_delta_moments",
    "oneblock_ansatz_moments",
    "oneblock_ansatz",
    "largest_correction_estimate",
]

EULER_GAMMA = float(np.euler_gamma)
C1 = EULER_GAMMA + math.log(2.0) - 2.0   # -0.729637...
C2 = math.pi ** 2 / 2.0 - 4.0            # 0.934802...


@dataclass(frozen=True)
class TheoryConstants:
    """Constants of the large-T moment asymptotics."""

    c1: float = C1
    c2: float = C2
    gamma_euler: float = EULER_GAMMA


CONSTANTS = TheoryConstants()


class LinearResponseWarning(UserWarning):
    """Raised-as-warning when a linear-response formula leaves its comfort zone."""


class ConvergenceError(RuntimeError):
    """Resolvent fixed point failed; carries residual and iteration count."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _guard_linear_response(alpha: float | None = None, horizon: int | None = None,
                           kappa: float | None = None) -> None:
    # breakdown heuristics: the expansion parameter is alpha * ln(T)^2
    if alpha is not None and horizon is not None and horizon > 1:
        if abs(alpha) * math.log(horizon) ** 2 > 0.1:
            warnings.warn(
                f"linear response unreliable: alpha*ln(T)^2 = "
                f"{abs(alpha) * math.log(horizon) ** 2:.3f} > 0.1",
                LinearResponseWarning, stacklevel=3)
    if kappa is not None and kappa < 0.1:
        warnings.warn(
            f"linear response unreliable at small kappa ({kappa:.3f} < 0.1)",
            LinearResponseWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

# Bernoulli coefficients B_2k/(2k) of the digamma asymptotic series,
# through x^-14; accurate to < 1e-14 absolute once x >= 9.
_PSI_SERIES = (1.0 / 12.0, 1.0 / 120.0, 1.0 / 252.0, 1.0 / 240.0,
               1.0 / 132.0, 691.0 / 32760.0, 1.0 / 12.0)

# Bernoulli coefficients B_2k of the trigamma series, through x^-15.
_PSI1_SERIES = (1.0 / 6.0, 1.0 / 30.0, 1.0 / 42.0, 1.0 / 30.0,
                5.0 / 66.0, 691.0 / 2730.0, 7.0 / 6.0)


def digamma(x: float) -> float:
    """Digamma function psi(x) for x > 0, relative error below 1e-12.

    Recurrence psi(x) = psi(x+1) - 1/x shifts the argument above 9, then
    the de Moivre asymptotic series finishes the job.
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 9.0:
        acc -= 1.0 / x
        x += 1.0
    u = 1.0 / (x * x)
    s = 0.0
    for coeff in reversed(_PSI_SERIES):
        s = u * (coeff - s)
    return acc + math.log(x) - 0.5 / x - s


def trigamma(x: float) -> float:
    """Trigamma function psi'(x) for x > 0, relative error below 1e-12."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"trigamma requires x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc += 1.0 / (x * x)
        x += 1.0
    u = 1.0 / (x * x)
    s = 0.0
    for coeff in reversed(_PSI1_SERIES):
        s = u * (coeff - s)
    # psi'(x) ~ 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
    return acc + 1.0 / x + 0.5 * u + s / x


# ---------------------------------------------------------------------------
# Marchenko-Pastur law
# ---------------------------------------------------------------------------

def mp_support(kappa: float, variance: float = 1.0) -> tuple[float, float]:
    """Bulk endpoints sigma^2 (kappa^{-1/2} -+ 1)^2."""
    a = kappa ** -0.5
    return variance * (a - 1.0) ** 2, variance * (a + 1.0) ** 2


def mp_density(lam, kappa: float, variance: float = 1.0):
    """Marchenko-Pastur bulk density; zero outside the support.

    Normalized to min(kappa, 1); for kappa < 1 the remaining point mass
    at zero is reported by :func:`mp_zero_mass`.
    """
    if not kappa > 0 or not variance > 0:
        raise ValueError("kappa and variance must be > 0")
    lo, hi = mp_support(kappa, variance)
    lam_arr = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam_arr)
    inside = (lam_arr > lo) & (lam_arr < hi)
    lam_in = lam_arr[inside]
    out[inside] = kappa * np.sqrt((hi - lam_in) * (lam_in - lo)) / (
        2.0 * math.pi * variance * lam_in)
    return float(out) if np.isscalar(lam) else out


def mp_zero_mass(kappa: float) -> float:
    """Weight of the zero-eigenvalue point mass, max(1 - kappa, 0)."""
    return max(1.0 - kappa, 0.0)


def mp_resolvent(z: complex, kappa: float, variance: float = 1.0) -> complex:
    """Closed-form Stieltjes transform of the full Marchenko-Pastur law.

    Root of (sigma^2/kappa) z G^2 - (z - sigma^2 (kappa-1)/kappa) G + 1 = 0
    on the Herglotz branch (Im G < 0 for Im z > 0). Used as the exact
    reference for the identity-population reduction of the fixed point.
    """
    z = complex(z)
    a = (variance / kappa) * z
    b = z - variance * (kappa - 1.0) / kappa
    sq = cmath.sqrt(b * b - 4.0 * a)
    g_plus = (b + sq) / (2.0 * a)
    g_minus = (b - sq) / (2.0 * a)
    if z.imag > 0:
        return g_plus if g_plus.imag < 0 else g_minus
    if z.imag < 0:
        return g_plus if g_plus.imag > 0 else g_minus
    raise ValueError("mp_resolvent requires Im(z) != 0")


# ---------------------------------------------------------------------------
# correlated-ensemble resolvent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolventQuery:
    """One evaluation point of the correlated-ensemble resolvent.

    ``z`` is used as-is when it has an imaginary part; a real ``z`` is
    broadened to z + i*epsilon. ``xi_spectrum`` is the population
    spectrum averaged over in the self-consistency equation.
    """

    z: complex
    epsilon: float
    xi_spectrum: np.ndarray
    kappa: float
    variance: float = 1.0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        spec = np.asarray(self.xi_spectrum, dtype=float)
        if spec.size == 0 or np.any(spec <= 0):
            raise ValueError("xi_spectrum must be positive")
        object.__setattr__(self, "xi_spectrum", spec)
        if not self.kappa > 0 or not self.variance > 0:
            raise ValueError("kappa and variance must be > 0")

    @property
    def z_effective(self) -> complex:
        z = complex(self.z)
        return z if z.imag != 0.0 else z + 1j * self.epsilon


def default_broadening(kappa: float, variance: float = 1.0,
                       xi_spectrum=None) -> float:
    """Default epsilon: 1e-4 times the upper-edge scale of the bulk."""
    mean_xi = 1.0 if xi_spectrum is None else float(np.mean(xi_spectrum))
    return 1e-4 * variance * (kappa ** -0.5 + 1.0) ** 2 * mean_xi


_RESOLVENT_TOL = 1e-12
_RESOLVENT_MAXIT = 20000
_RESOLVENT_DAMPING = 0.5


def _self_consistency_residual(g: complex, z: complex, spec: np.ndarray,
                               kappa: float, variance: float) -> float:
    m = (variance / kappa) * (kappa - 1.0 + z * g)
    return abs(complex(np.mean(1.0 / (z - m * spec))) - g)


def cwoe_resolvent(query: ResolventQuery, g0: complex | None = None) -> complex:
    """Solve G(z) = < 1 / (z - (sigma^2/kappa)(kappa - 1 + z G) xi) >.

    The angle brackets average over the population spectrum. Internally
    the equivalent companion form

        Gt = 1 / (z - (sigma^2/kappa) < xi / (1 - sigma^2 Gt xi) >),
        G  = (1 - kappa)/z + kappa Gt,

    is iterated with damping 0.5: that map sends the lower half-plane to
    itself, so the damped iteration converges to the Herglotz root from
    any start, including inside spectral gaps where the direct form is
    attracted to spurious roots. The returned G satisfies the original
    self-consistency to a residual of 1e-10 (relative to max(1, |G|))
    and has Im G < 0 for Im z > 0; ``g0`` warm-starts from a neighbouring
    solution.
    """
    z = query.z_effective
    spec = query.xi_spectrum
    kappa, variance = query.kappa, query.variance
    conj = z.imag < 0
    if conj:       # solve in the upper half-plane, reflect at the end
        z = z.conjugate()
        g0 = None if g0 is None else complex(g0).conjugate()

    gt = (complex(g0) - (1.0 - kappa) / z) / kappa if g0 is not None else 1.0 / z
    if gt.imag >= 0:
        gt = 1.0 / z
    eta = _RESOLVENT_DAMPING
    residual = math.inf
    iterations = _RESOLVENT_MAXIT
    for it in range(_RESOLVENT_MAXIT):
        denom = 1.0 - variance * gt * spec
        target = 1.0 / (z - (variance / kappa) * complex(np.mean(spec / denom)))
        residual = abs(target - gt)
        gt = (1.0 - eta) * gt + eta * target
        if residual <= _RESOLVENT_TOL:
            iterations = it + 1
            break

    g = (1.0 - kappa) / z + kappa * gt
    final = _self_consistency_residual(g, z, spec, kappa, variance)
    if final > 1e-10 * max(1.0, abs(g)) or not g.imag < 0:
        raise ConvergenceError(
            f"resolvent did not converge at z={z:.6g} "
            f"(residual {final:.3e} after {iterations} iterations)",
            residual=final, iterations=iterations)
    return g.conjugate() if conj else g


def cwoe_density(lam: float, template: ResolventQuery,
                 g0: complex | None = None) -> float:
    """Spectral density at lam from the broadened resolvent, -Im G / pi.

    Reported at the template's epsilon; includes the broadened zero-mode
    point mass when kappa < 1.
    """
    query = ResolventQuery(z=complex(lam), epsilon=template.epsilon,
                           xi_spectrum=template.xi_spectrum,
                           kappa=template.kappa, variance=template.variance)
    g = cwoe_resolvent(query, g0=g0)
    return -g.imag / math.pi


def cwoe_density_grid(lams, xi_spectrum, kappa: float, variance: float = 1.0,
                      epsilon: float | None = None,
                      include_zero_modes: bool = True) -> np.ndarray:
    """Density on a grid, warm-starting each point from its neighbour.

    For kappa < 1 the broadened point mass (1 - kappa) at zero is part
    of the full density; ``include_zero_modes=False`` subtracts its
    exact Lorentzian (1-kappa)/pi * eps/(lam^2 + eps^2), leaving the
    bulk alone for comparison against non-zero eigenvalue histograms.
    """
    spec = np.asarray(xi_spectrum, dtype=float)
    eps = default_broadening(kappa, variance, spec) if epsilon is None else epsilon
    out = np.empty(len(lams))
    g = None
    for i, lam in enumerate(lams):
        query = ResolventQuery(z=complex(lam), epsilon=eps, xi_spectrum=spec,
                               kappa=kappa, variance=variance)
        try:
            g = cwoe_resolvent(query, g0=g)
        except ConvergenceError:
            g = cwoe_resolvent(query)  # cold restart before giving up
        out[i] = -g.imag / math.pi
    if not include_zero_modes and kappa < 1.0:
        lam_arr = np.asarray(lams, dtype=float)
        out -= (1.0 - kappa) / math.pi * eps / (lam_arr ** 2 + eps ** 2)
    return out


# ---------------------------------------------------------------------------
# element moments and correction moments
# ---------------------------------------------------------------------------

def element_moment(horizon: int, variance: float, order: int,
                   diagonal: bool) -> float:
    """Exact moment E[(C_jk)^order] of a plain sample-matrix element.

    Diagonal and off-diagonal elements have different laws; odd moments
    of off-diagonal elements vanish by symmetry. Gamma-function ratios
    are evaluated through log-gamma differences so large horizons do not
    overflow.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    t = float(horizon)
    if order % 2 == 0:
        n = order // 2
        if diagonal:
            log_val = order * math.log(2.0 * variance / t) \
                + math.lgamma(2 * n + t / 2.0) - math.lgamma(t / 2.0)
            return math.exp(log_val)
        log_val = order * math.log(variance / t) \
            + math.lgamma(2 * n + 1.0) - math.lgamma(n + 1.0) \
            + math.lgamma(t / 2.0 + n) - math.lgamma(t / 2.0)
        return math.exp(log_val)
    if not diagonal:
        return 0.0
    log_val = order * math.log(2.0 * variance / t) \
        + math.lgamma(order + t / 2.0) - math.lgamma(t / 2.0)
    return math.exp(log_val)


def delta_m1_exact(horizon: int, alpha: float) -> float:
    """First moment of the corrections: alpha [ln(2/T) + psi(1 + T/2)].

    Exact to leading order in alpha for every horizon T.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    _guard_linear_response(alpha=alpha, horizon=horizon)
    if alpha == 0.0:
        return 0.0
    t = float(horizon)
    return alpha * (math.log(2.0 / t) + digamma(1.0 + t / 2.0))


def delta_m2_exact(horizon: int, n_series: int, alpha: float) -> float:
    """Second moment of the corrections, exact in T and N at order alpha^2.

    alpha^2 (1 + 2/T) { (ln(2/T) + psi(2 + T/2))^2 + psi'(2 + T/2) }
      + (alpha^2/kappa)(1 - 1/N) { (-ln T + 1 - gamma/2 + psi(1 + T/2)/2)^2
                                   + psi'(1 + T/2)/4 - 1 + pi^2/8 }.
    """
    if horizon < 1 or n_series < 1:
        raise ValueError("horizon and n_series must be >= 1")
    kappa = horizon / n_series
    _guard_linear_response(alpha=alpha, horizon=horizon, kappa=kappa)
    if alpha == 0.0:
        return 0.0
    t = float(horizon)
    first = alpha ** 2 * (1.0 + 2.0 / t) * (
        (math.log(2.0 / t) + digamma(2.0 + t / 2.0)) ** 2
        + trigamma(2.0 + t / 2.0))
    second = (alpha ** 2 / kappa) * (1.0 - 1.0 / n_series) * (
        (-math.log(t) + 1.0 - EULER_GAMMA / 2.0 + digamma(1.0 + t / 2.0) / 2.0) ** 2
        + trigamma(1.0 + t / 2.0) / 4.0
        - 1.0 + math.pi ** 2 / 8.0)
    return first + second


def delta_m_asymptotic(horizon: int, kappa: float,
                       alpha: float) -> tuple[float, float]:
    """Large-T limits: (alpha/T, (alpha^2/4 kappa)([ln T + c1]^2 + c2))."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    _guard_linear_response(alpha=alpha, horizon=horizon, kappa=kappa)
    if alpha == 0.0:
        return 0.0, 0.0
    t = float(horizon)
    x = (math.log(t) + C1) ** 2 + C2
    return alpha / t, alpha ** 2 / (4.0 * kappa) * x


# ---------------------------------------------------------------------------
# rescaled/shifted Marchenko-Pastur ansatz for the bulk corrections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzParams:
    """Scaling s and shifting r of the bulk-correction density ansatz.

    By convention s < 0 for a deformation exponent above one (the bulk
    corrections push leftward); s > 0 would correspond to an exponent
    below one, which the power map here does not support.
    """

    s: float
    r: float


def ansatz_support(params: AnsatzParams, kappa: float) -> tuple[float, float]:
    """Support endpoints s (kappa^{-1/2} -+ 1)^2 + r, ordered by value.

    The quadratic endpoint map makes the ansatz the exact affine image
    lam -> s*lam + r of the Marchenko-Pastur bulk, which is what fixes
    its normalization and its first two moments. (A linear endpoint map
    would break both.) With s < 0 the naive -+ labels flip, so endpoints
    are ordered by value.
    """
    a = kappa ** -0.5
    e1 = params.s * (a + 1.0) ** 2 + params.r
    e2 = params.s * (a - 1.0) ** 2 + params.r
    return (e1, e2) if e1 <= e2 else (e2, e1)


def ansatz_density(dl, params: AnsatzParams, kappa: float):
    """Bulk-correction density: kappa sqrt((hi-x)(x-lo)) / (2 pi (x-r) s).

    Zero outside the support; normalized to min(kappa, 1). The pole at
    x = r sits outside the open support for every kappa (it touches the
    edge only at kappa = 1, where the density vanishes continuously).
    """
    if params.s == 0.0:
        raise ValueError("ansatz density is degenerate at s = 0")
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    lo, hi = ansatz_support(params, kappa)
    x = np.asarray(dl, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    denom = 2.0 * math.pi * (xi - params.r) * params.s
    if np.any(denom <= 0):
        raise ValueError("evaluation hit the pole of the ansatz density")
    out[inside] = kappa * np.sqrt((hi - xi) * (xi - lo)) / denom
    return float(out) if np.isscalar(dl) else out


def ansatz_moments(params: AnsatzParams, kappa: float) -> tuple[float, float]:
    """Forward map from (s, r) to the first two bulk-correction moments.

    kappa >= 1:  m1 = s + r,        m2 = (1 + 1/kappa) s^2 - r^2 + 2 r m1
    kappa <= 1:  m1 = s + kappa r,  m2 = (1 + 1/kappa) s^2 - kappa r^2 + 2 r m1
    """
    s, r = params.s, params.r
    if kappa >= 1.0:
        m1 = s + r
        m2 = (1.0 + 1.0 / kappa) * s ** 2 - r ** 2 + 2.0 * r * m1
    else:
        m1 = s + kappa * r
        m2 = (1.0 + 1.0 / kappa) * s ** 2 - kappa * r ** 2 + 2.0 * r * m1
    return m1, m2


def _checked_radicand(value: float, scale: float) -> float:
    # tolerate rounding residue of an exact cancellation, nothing more
    if value < 0:
        if value >= -64.0 * np.finfo(float).eps * max(scale, 1e-300):
            return 0.0
        raise ValueError(
            f"negative radicand {value:.3e}: moments incompatible with the "
            "ansatz (linear response breakdown)")
    return value


def ansatz_invert(dm1: float, dm2: float, kappa: float) -> AnsatzParams:
    """Recover (s, r) from moments; the inverse of :func:`ansatz_moments`.

    For kappa >= 1 feed the total correction moments; for kappa <= 1 feed
    the bulk (non-zero-mode) correction moments. A negative radicand
    means the moments are incompatible with the ansatz, which signals a
    linear-response breakdown.
    """
    _guard_linear_response(kappa=kappa)
    if kappa >= 1.0:
        radicand = _checked_radicand((dm2 - dm1 ** 2) * kappa,
                                     (abs(dm2) + dm1 ** 2) * kappa)
        s = -math.sqrt(radicand)
        r = dm1 - s
    else:
        radicand = _checked_radicand(dm2 - dm1 ** 2 / kappa,
                                     abs(dm2) + dm1 ** 2 / kappa)
        s = -math.sqrt(radicand)
        r = (dm1 - s) / kappa
    return AnsatzParams(s=s, r=r)


def ansatz_asymptotic(horizon: int, alpha: float) -> AnsatzParams:
    """Large-T parameters: s = -(alpha/2) sqrt([ln T + c1]^2 + c2), s + r = alpha/T.

    Independent of N, which is what licenses extrapolating them from the
    regular regime into kappa < 1. r is computed as alpha/T - s so that
    the algebraic sum rule s + r = alpha/T holds to rounding accuracy.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    _guard_linear_response(alpha=alpha, horizon=horizon)
    if alpha == 0.0:
        return AnsatzParams(s=0.0, r=0.0)
    t = float(horizon)
    root = math.sqrt((math.log(t) + C1) ** 2 + C2)
    s = -0.5 * alpha * root
    return AnsatzParams(s=s, r=alpha / t - s)


def bulk_moment_extrapolation(dm1: float, dm2: float, s: float,
                              kappa: float) -> tuple[float, float]:
    """Bulk-correction moments from total moments and the extrapolated s.

    m1_bulk = kappa dm1 + s (1 - kappa);
    m2_bulk = kappa dm2 - kappa dm1^2 + m1_bulk^2 / kappa.  (kappa <= 1)
    """
    if kappa > 1.0:
        raise ValueError("extrapolation applies to kappa <= 1 only")
    _guard_linear_response(kappa=kappa)
    m1 = kappa * dm1 + s * (1.0 - kappa)
    m2 = kappa * dm2 - kappa * dm1 ** 2 + m1 ** 2 / kappa
    return m1, m2


def emerging_moments(s: float, kappa: float) -> tuple[float, float]:
    """Large-T emerging-part moments: (-s (1 - kappa), s^2 (1 - kappa))."""
    if kappa > 1.0:
        raise ValueError("emerging moments require kappa <= 1")
    _guard_linear_response(kappa=kappa)
    return -s * (1.0 - kappa), s ** 2 * (1.0 - kappa)


# ---------------------------------------------------------------------------
# uniformly correlated (one-block) population
# ---------------------------------------------------------------------------

def oneblock_support(kappa: float, c: float) -> tuple[float, float]:
    """Bulk endpoints (1 - c)(kappa^{-1/2} -+ 1)^2 of the one-block ensemble."""
    a = kappa ** -0.5
    return (1.0 - c) * (a - 1.0) ** 2, (1.0 - c) * (a + 1.0) ** 2


def oneblock_separated_position(n: int, kappa: float, c: float) -> float | None:
    """Mean position of the separated collective eigenvalue, if present.

    (N c + 1 - c)(N c kappa + 1 - c) / (N c kappa), detached from the
    bulk as long as c >= 1 / (N sqrt(kappa)).
    """
    if c < 1.0 / (n * math.sqrt(kappa)):
        return None
    return (n * c + 1.0 - c) * (n * c * kappa + 1.0 - c) / (n * c * kappa)


def oneblock_density(lam, n: int, kappa: float, c: float):
    """Bulk density of the one-block ensemble plus the separated position.

    The bulk is the Marchenko-Pastur form with the variance replaced by
    (1 - c); returns (density, separated_position_or_None).
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("c must be in [0, 1)")
    lo, hi = oneblock_support(kappa, c)
    x = np.asarray(lam, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = kappa * np.sqrt((hi - xi) * (xi - lo)) / (
        2.0 * math.pi * (1.0 - c) * xi)
    bulk = float(out) if np.isscalar(lam) else out
    return bulk, oneblock_separated_position(n, kappa, c)


def oneblock_delta_moments(horizon: int, kappa: float, c: float,
                           alpha: float) -> tuple[float, float]:
    """Large-T correction moments of the one-block ensemble.

    m1 = alpha (1 - c) ln(1 - c);
    m2 = m1^2 + (alpha^2 (1-c)^2 / 4 kappa)([ln T + c1 - 2 ln(1-c)]^2 + c2).
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("c must be in [0, 1)")
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    _guard_linear_response(alpha=alpha, horizon=horizon, kappa=kappa)
    if alpha == 0.0:
        return 0.0, 0.0
    one_c = 1.0 - c
    m1 = alpha * one_c * math.log(one_c)
    x = (math.log(horizon) + C1 - 2.0 * math.log(one_c)) ** 2 + C2
    m2 = m1 ** 2 + alpha ** 2 * one_c ** 2 / (4.0 * kappa) * x
    return m1, m2


def oneblock_ansatz_moments(params: AnsatzParams, c: float,
                            kappa: float) -> tuple[float, float]:
    """Forward map from (s, r) to bulk-correction moments, one-block case.

    Uses the bulk moments mbar1 = 1 - c and mbar2 = (1-c)^2 (1 + 1/kappa):
    kappa >= 1: m1 = s mbar1 + r,       m2 = mbar2 s^2 + r^2 + 2 s r mbar1
    kappa <= 1: m1 = s mbar1 + kappa r, m2 = mbar2 s^2 + kappa r^2 + 2 s r mbar1
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("c must be in [0, 1)")
    s, r = params.s, params.r
    mbar1 = 1.0 - c
    mbar2 = (1.0 - c) ** 2 * (1.0 + 1.0 / kappa)
    if kappa >= 1.0:
        m1 = s * mbar1 + r
        m2 = mbar2 * s ** 2 + r ** 2 + 2.0 * s * r * mbar1
    else:
        m1 = s * mbar1 + kappa * r
        m2 = mbar2 * s ** 2 + kappa * r ** 2 + 2.0 * s * r * mbar1
    return m1, m2


def oneblock_ansatz(dm1: float, dm2: float, c: float,
                    kappa: float) -> tuple[AnsatzParams, tuple[float, float]]:
    """Invert one-block moments to (s, r) and extrapolate the bulk moments.

    s = -sqrt(kappa [dm2 - dm1^2]) / (1 - c), r = dm1 - s (1 - c); the
    extrapolated bulk moments are kappa dm1 + (1-c) s (1-kappa) and the
    usual second-moment combination. Reduces to :func:`ansatz_invert`
    plus :func:`bulk_moment_extrapolation` at c = 0.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError("c must be in [0, 1)")
    _guard_linear_response(kappa=kappa)
    radicand = _checked_radicand(kappa * (dm2 - dm1 ** 2),
                                 kappa * (abs(dm2) + dm1 ** 2))
    s = -math.sqrt(radicand) / (1.0 - c)
    r = dm1 - s * (1.0 - c)
    bulk1 = kappa * dm1 + (1.0 - c) * s * (1.0 - kappa)
    bulk2 = kappa * dm2 - kappa * dm1 ** 2 + bulk1 ** 2 / kappa
    return AnsatzParams(s=s, r=r), (bulk1, bulk2)


def largest_correction_estimate(lambda_max_mean: float, alpha: float) -> float:
    """Crude estimate alpha * lam * ln(lam^2) / 2 for the top correction.

    Only meaningful when the top eigenvector is concentrated on O(1)
    components; a delocalized collective mode over N entries instead
    follows alpha * lam * ln(lam / N), which can differ in sign.
    """
    if not lambda_max_mean > 0:
        raise ValueError("lambda_max_mean must be > 0")
    return alpha * lambda_max_mean * math.log(lambda_max_mean ** 2) / 2.0
