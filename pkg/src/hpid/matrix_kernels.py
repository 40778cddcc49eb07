"""Gaussian kernels for the general quadratic potential V(x) = x^T B x / 2.

A symmetric positive semi-definite matrix B decouples in its eigenbasis
into independent scalar problems, one per eigenvalue. All matrix functions
(sqrt, sinh, ctnh, log det) are therefore computed spectrally, never by
series: the decomposition is exact and stable for symmetric input, and a
zero eigenvalue simply routes that axis to the exact heat-kernel path.

The per-axis drift prefactors exposed here extend the scalar control
construction to matrix potentials. The closed-form kernels above justify
the extension (the quadratic forms decouple axis by axis); it is a
construction of this package, not a transcription of a known formula.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .kernels import BETA_ZERO_TOL, _abc, _h_probe, _validate_t

_EIG_CLAMP = 1e-12  # eigenvalues above -this are clamped to zero
_EIG_REJECT = -1e-8  # eigenvalues below this reject the matrix
_SYM_TOL = 1e-10


@dataclass(frozen=True)
class MatrixBeta:
    """Spectral form of a symmetric PSD potential matrix."""

    beta_matrix: np.ndarray  # (d, d)
    eigvals: np.ndarray  # (d,), nonnegative, ascending
    eigvecs: np.ndarray  # (d, d), columns are eigenvectors
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", int(self.beta_matrix.shape[0]))

    def to_eigenbasis(self, v):
        """Coordinates of v (..., d) in the eigenbasis."""
        return np.asarray(v, dtype=float) @ self.eigvecs

    def from_eigenbasis(self, v):
        return np.asarray(v, dtype=float) @ self.eigvecs.T

    def potential(self, x):
        """V(x) = x^T B x / 2 for x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.beta_matrix, x)


def decompose(beta_matrix) -> MatrixBeta:
    """Spectral decomposition of a symmetric PSD matrix.

    Rejects asymmetric input and any eigenvalue below -1e-8; eigenvalues in
    (-1e-12, 0) are clamped to zero so that numerically flat axes use the
    exact heat-kernel path.
    """
    m = np.asarray(beta_matrix, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"potential matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("potential matrix contains non-finite values")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > _SYM_TOL * scale:
        raise InputError("potential matrix is not symmetric")
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < _EIG_REJECT * scale:
        raise DomainError(
            f"potential matrix has negative eigenvalue {vals.min():.3e}; "
            "it must be positive semi-definite"
        )
    vals = np.where(vals < _EIG_CLAMP, 0.0, vals)
    return MatrixBeta(beta_matrix=m, eigvals=vals, eigvecs=vecs)


def _log_g_general(params: MatrixBeta, tau: float, x, y):
    """Shared quadratic form: both kernels differ only in the horizon tau."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != params.dim or y.shape[-1] != params.dim:
        raise InputError(
            f"points must have trailing dimension {params.dim}, "
            f"got {x.shape} and {y.shape}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("points contain non-finite values")
    a, b, log_c = _abc(params.eigvals, tau)  # (d,) each
    xe = params.to_eigenbasis(x)
    ye = params.to_eigenbasis(y)
    out = (
        -0.5 * np.einsum("i,...i->...", a, xe * xe + ye * ye)
        + np.einsum("i,...i->...", b, xe * ye)
        - log_c.sum()
    )
    return float(out) if np.ndim(out) == 0 else out


def log_g_minus_general(params: MatrixBeta, t: float, x, y):
    """log G_minus for the matrix potential; same contract as the scalar op."""
    _validate_t(t, 0.0, 1.0, True, False)
    return _log_g_general(params, 1.0 - t, x, y)


def log_g_plus_general(params: MatrixBeta, t: float, x, y):
    """log G_plus for the matrix potential; same contract as the scalar op."""
    _validate_t(t, 0.0, 1.0, False, True)
    return _log_g_general(params, t, x, y)


def log_kernel_ratio_general(params: MatrixBeta, t: float, x, y):
    """log[ G_minus(t; x; y) / G_plus(1; y; 0) ], axiswise stable form."""
    _validate_t(t, 0.0, 1.0, True, False)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    am, bm, lcm = _abc(params.eigvals, 1.0 - t)
    _, _, lc1 = _abc(params.eigvals, 1.0)
    h = _h_probe(params.eigvals, t)  # (d,)
    xe = params.to_eigenbasis(x)
    ye = params.to_eigenbasis(y)
    out = (
        -0.5 * np.einsum("i,...i->...", am, xe * xe)
        - 0.5 * np.einsum("i,...i->...", h, ye * ye)
        + np.einsum("i,...i->...", bm, xe * ye)
        + (lc1 - lcm).sum()
    )
    return float(out) if np.ndim(out) == 0 else out


def general_control_reduction(params: MatrixBeta, t: float):
    """Per-axis drift prefactors (c1_i, c2_i) in the eigenbasis.

    Axis i uses its eigenvalue as a scalar potential strength; zero
    eigenvalues get the heat-kernel values (1/(1-t), 1). The optimal drift
    in the eigenbasis is c1 * (xhat_eig - c2 * x_eig), applied axiswise,
    then rotated back.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    lam = params.eigvals
    small = lam < BETA_ZERO_TOL
    _, b, _ = _abc(lam, 1.0 - t)
    rb = np.sqrt(np.where(small, 1.0, lam))
    c2 = np.where(small, 1.0, np.cosh((1.0 - t) * rb))
    return b, c2
