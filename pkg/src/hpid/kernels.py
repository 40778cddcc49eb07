"""Closed-form Gaussian kernels for the isotropic quadratic potential
V(x) = beta |x|^2 / 2 on the unit time interval.

Two fundamental solutions appear everywhere downstream:

* G_minus(t; x; y): evolves backward from a delta function at time 1,
  so it couples the state x at time t to a terminal point y.
* G_plus(t; x; y): evolves forward from a delta function at time 0.

Both are Gaussians in (x, y), the imaginary-time kernel of a harmonic
oscillator. For beta = 0 they reduce to heat kernels, and that case is a
distinct exact code path (selected when beta < 1e-12) rather than a limit
of the hyperbolic expressions, which would divide 0 by 0.

All values are computed and consumed in log domain; exponentiation only
happens inside downstream log-sum-exp reductions. Quadratic forms reach
~1e4 for d in the thousands, far past float64's exponent range.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

# below this, beta is treated as exactly zero
BETA_ZERO_TOL = 1e-12

_LOG_2 = float(np.log(2.0))
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ScalarBeta:
    """Isotropic potential strength beta (units 1/time^2) and dimension."""

    beta: float
    dim: int

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InputError(f"beta must be finite and >= 0, got {self.beta}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"dim must be a positive integer, got {self.dim}")

    @property
    def is_zero(self) -> bool:
        return self.beta < BETA_ZERO_TOL


@dataclass(frozen=True)
class KernelCoeffs:
    """Quadratic-form coefficients of both kernels at one time t.

    The minus-side coefficients belong to G_minus(t; ., .), the plus-side
    to G_plus(t; ., .). At t = 0 the plus side is a delta function and its
    coefficients are infinite. Log normalizers are per dimension.
    """

    t: float
    a_minus: float
    b_minus: float
    log_c_minus: float
    a_plus: float
    b_plus: float
    log_c_plus: float


def _log_sinh(a):
    """log(sinh(a)) for a > 0 without overflow: a + log(1 - e^(-2a)) - log 2."""
    a = np.asarray(a, dtype=float)
    return a + np.log(-np.expm1(-2.0 * a)) - _LOG_2


def _abc(beta, tau):
    """Coefficients of a horizon-tau Gaussian kernel, elementwise in beta.

    Returns (A, B, logC) with A = sqrt(beta) ctnh(tau sqrt(beta)),
    B = sqrt(beta)/sinh(tau sqrt(beta)), and per-dimension normalizer
    logC = log(2 pi sinh(tau sqrt(beta))/sqrt(beta))/2. Entries with
    beta < BETA_ZERO_TOL use the exact heat-kernel limit A = B = 1/tau,
    logC = log(2 pi tau)/2.
    """
    beta = np.asarray(beta, dtype=float)
    small = beta < BETA_ZERO_TOL
    rb = np.sqrt(np.where(small, 1.0, beta))
    arg = tau * rb
    ls = _log_sinh(np.where(small, 1.0, arg))
    a = np.where(small, 1.0 / tau, rb / np.tanh(arg))
    b = np.where(small, 1.0 / tau, rb * np.exp(-ls))
    log_c = np.where(
        small,
        0.5 * (_LOG_2PI + np.log(tau)),
        0.5 * (_LOG_2PI + ls - np.log(rb)),
    )
    return a, b, log_c


def _h_probe(beta, t):
    """Precision of the y-quadratic in log(G_minus/G_plus(1)), elementwise.

    Equal to sqrt(beta)(ctnh((1-t)sqrt(beta)) - ctnh(sqrt(beta))), but
    computed through the identity ctnh(a) - ctnh(b) =
    sinh(b-a)/(sinh(a) sinh(b)), which has no cancellation:
    h = sqrt(beta) sinh(t sqrt(beta)) / (sinh((1-t)sqrt(beta)) sinh(sqrt(beta))).
    The beta = 0 value is t/(1-t).
    """
    beta = np.asarray(beta, dtype=float)
    small = beta < BETA_ZERO_TOL
    rb = np.sqrt(np.where(small, 1.0, beta))
    if t == 0.0:
        return np.where(small, 0.0, 0.0) + 0.0
    log_h = (
        np.log(rb)
        + _log_sinh(np.where(small, 1.0, t * rb))
        - _log_sinh(np.where(small, 1.0, (1.0 - t) * rb))
        - _log_sinh(np.where(small, 1.0, rb))
    )
    return np.where(small, t / (1.0 - t), np.exp(log_h))


def _validate_t(t, lo, hi, lo_closed, hi_closed):
    if not np.isfinite(t):
        raise DomainError(f"t must be finite, got {t}")
    ok_lo = t >= lo if lo_closed else t > lo
    ok_hi = t <= hi if hi_closed else t < hi
    if not (ok_lo and ok_hi):
        lob = "[" if lo_closed else "("
        hib = "]" if hi_closed else ")"
        raise DomainError(f"t must lie in {lob}{lo}, {hi}{hib}, got {t}")


def _as_points(params: ScalarBeta, name, v):
    """Validate a point array of shape (..., dim); a bare scalar is accepted
    for dim = 1."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape[-1] != params.dim:
        raise InputError(
            f"{name} must have trailing dimension {params.dim}, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


def _sq(v):
    return np.einsum("...i,...i->...", v, v)


def _dot(x, y):
    return np.einsum("...i,...i->...", x, y)


def _ret(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def kernel_coeffs(params: ScalarBeta, t: float) -> KernelCoeffs:
    """All quadratic-form coefficients at time t in [0, 1).

    The plus side diverges at t = 0 (delta initial condition); its entries
    are +inf / -inf there.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    am, bm, lcm = _abc(params.beta, 1.0 - t)
    if t > 0.0:
        ap, bp, lcp = _abc(params.beta, t)
    else:
        ap, bp, lcp = np.inf, np.inf, -np.inf
    return KernelCoeffs(
        t=float(t),
        a_minus=float(am),
        b_minus=float(bm),
        log_c_minus=float(lcm),
        a_plus=float(ap),
        b_plus=float(bp),
        log_c_plus=float(lcp),
    )


def log_g_minus(params: ScalarBeta, t: float, x, y):
    """log G_minus(t; x; y) for t in [0, 1).

    For beta = 0 this is the log density of N(y | x, (1-t) I). x and y may
    carry leading batch axes; shapes broadcast against each other.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    x = _as_points(params, "x", x)
    y = _as_points(params, "y", y)
    a, b, log_c = _abc(params.beta, 1.0 - t)
    out = -0.5 * a * (_sq(x) + _sq(y)) + b * _dot(x, y) - params.dim * log_c
    return _ret(out)


def log_g_plus(params: ScalarBeta, t: float, x, y):
    """log G_plus(t; x; y) for t in (0, 1].

    For beta = 0 this is the log density of N(x | y, t I). Symmetric in
    (x, y).
    """
    _validate_t(t, 0.0, 1.0, False, True)
    x = _as_points(params, "x", x)
    y = _as_points(params, "y", y)
    a, b, log_c = _abc(params.beta, t)
    out = -0.5 * a * (_sq(x) + _sq(y)) + b * _dot(x, y) - params.dim * log_c
    return _ret(out)


def log_kernel_ratio(params: ScalarBeta, t: float, x, y):
    """log[ G_minus(t; x; y) / G_plus(1; y; 0) ] for t in [0, 1).

    Evaluated from the combined closed form, never as a difference of two
    separately exponentiated kernels. As a function of y this is a concave
    quadratic with precision `_h_probe(beta, t)`; the y-independent part
    is -A_minus |x|^2 / 2 plus a normalizer ratio.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    x = _as_points(params, "x", x)
    y = _as_points(params, "y", y)
    am, bm, lcm = _abc(params.beta, 1.0 - t)
    a1, _, lc1 = _abc(params.beta, 1.0)
    h = _h_probe(params.beta, t)  # equals am - a1, computed stably
    out = (
        -0.5 * am * _sq(x)
        - 0.5 * h * _sq(y)
        + bm * _dot(x, y)
        + params.dim * (lc1 - lcm)
    )
    del a1
    return _ret(out)


def drift_prefactors(params: ScalarBeta, t: float) -> tuple[float, float]:
    """(c1, c2) such that the optimal drift is c1 (xhat - c2 x).

    c1 = sqrt(beta)/sinh((1-t)sqrt(beta)), c2 = cosh((1-t)sqrt(beta));
    the beta = 0 limit is (1/(1-t), 1). Note c1 c2 = A_minus.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    if params.is_zero:
        return 1.0 / (1.0 - t), 1.0
    _, b, _ = _abc(params.beta, 1.0 - t)
    c2 = np.cosh((1.0 - t) * np.sqrt(params.beta))
    return float(b), float(c2)
