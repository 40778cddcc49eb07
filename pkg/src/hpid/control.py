"""Drift evaluators for the controlled bridge.

Three interchangeable ways to estimate the optimal drift at (t, x):

* ``uhis_control`` — self-normalized importance sampling against the
  energy-independent Gaussian probe. The N probe points, their weights
  and the weighted state x̂ reduce the drift to u = c1 (x̂ - c2 x).
* ``empirical_control`` — the target is a finite set of ground-truth
  vectors; softmax over per-sample kernel log-ratios replaces IS.
* ``quadrature_control`` — direct fixed-grid integration in 1 or 2
  dimensions; slow, but the reference the other two are tested against.

Evaluator classes at the bottom adapt each to the integrator protocol:
``noise_shape(dim)`` declares per-call standard-normal demand (None for
deterministic evaluators) and ``__call__(t, x, xi=None)`` returns a
ControlOutput. All evaluators accept x with leading batch axes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AccuracyError,
    DegenerateProbeGaussianError,
    InputError,
)
from .kernels import (
    ScalarBeta,
    _as_points,
    _ret,
    _validate_t,
    drift_prefactors,
    log_kernel_ratio,
)
from .matrix_kernels import (
    MatrixBeta,
    general_control_reduction,
    log_kernel_ratio_general,
)
from .rng import normals_from
from .stationary import (
    GeneralProbeGaussian,
    ProbeGaussian,
    legendre_control,
    universal_probe,
    universal_probe_general,
)


@dataclass
class UhisConfig:
    """Importance-sampling settings for the universal-probe drift estimate.

    n_is probe samples per evaluation. rng_stream supplies standard
    normals when the caller does not pass them explicitly (defaults to a
    fresh seed-0 generator, so repeated runs are reproducible).
    reuse_probe_noise shares one block of N draws across every
    trajectory instead of drawing per-trajectory blocks; the path
    integrator redraws the shared block each step, while direct repeated
    calls reuse a single cached block. Off by default because sharing
    correlates trajectories within a step. At t <= t_min, and whenever
    the probe denominator underflows, the probe falls back to
    N(0, wide_sigma2 I).
    """

    n_is: int
    rng_stream: np.random.Generator | None = None
    reuse_probe_noise: bool = False
    t_min: float = 0.0
    wide_sigma2: float = 1.0
    _cached_noise: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_is < 1:
            raise InputError(f"n_is must be >= 1, got {self.n_is}")
        if not (np.isfinite(self.wide_sigma2) and self.wide_sigma2 > 0):
            raise InputError(f"wide_sigma2 must be positive, got {self.wide_sigma2}")

    def _stream(self) -> np.random.Generator:
        if self.rng_stream is None:
            self.rng_stream = np.random.default_rng(0)
        return self.rng_stream


@dataclass(frozen=True)
class EmpiricalTarget:
    """Ground-truth sample set defining the target distribution."""

    samples: np.ndarray  # (count, d)
    count: int = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise InputError(f"samples must be a nonempty (S, d) array, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InputError("samples contain non-finite values")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "count", int(s.shape[0]))

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class ControlOutput:
    """One drift evaluation plus its importance-sampling diagnostics.

    weighted_state is x̂, the weight-averaged target point the drift
    recomposes from (u = c1 (x̂ - c2 x)); None only for opaque
    plain-function controls. ess and max_weight are per-point when x is
    batched.
    """

    drift: np.ndarray
    weighted_state: np.ndarray | None
    ess: float | np.ndarray
    max_weight: float | np.ndarray

    @property
    def low_ess(self):
        return self.ess < 1.5


def _softmax_weights(log_w):
    """Normalized weights from log_w (..., n) plus ESS and max diagnostics."""
    m = np.max(log_w, axis=-1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise AccuracyError(
            "all importance weights vanished; energy is non-finite on every sample"
        )
    w = np.exp(log_w - m)
    w /= w.sum(axis=-1, keepdims=True)
    ess = 1.0 / np.einsum("...n,...n->...", w, w)
    return w, ess, w.max(axis=-1)


def _weighted_state(log_w, ys):
    """Softmax weights of log_w (..., n) and their average of ys (..., n, d)."""
    w, ess, max_w = _softmax_weights(log_w)
    xhat = np.einsum("...n,...nd->...d", w, ys)
    return xhat, ess, max_w


def _probe_or_wide(params, t, x, t_min, wide_sigma2):
    """Universal probe when it exists, else the wide fallback; flags which."""
    if t > t_min:
        try:
            return universal_probe(params, t, x), True
        except DegenerateProbeGaussianError:
            pass
    wide = ProbeGaussian(
        mean=np.zeros_like(x),
        precision_scalar=1.0 / wide_sigma2,
        t=float(t),
        beta=params.beta,
    )
    return wide, False


def _shared_panel(xi):
    """The (n, d) base block when xi broadcasts one panel over the batch.

    Only a true zero-stride broadcast counts: an owned block that merely
    has one row must take the generic path, so a single trajectory stays
    bitwise identical to the same row inside a larger batch.
    """
    if xi.ndim == 3 and xi.strides[0] == 0:
        return xi[0]
    return None


def _draw_noise(cfg: UhisConfig, batch_shape: tuple, dim: int) -> np.ndarray:
    full = batch_shape + (cfg.n_is, dim)
    if cfg.reuse_probe_noise:
        if cfg._cached_noise is None or cfg._cached_noise.shape != (cfg.n_is, dim):
            cfg._cached_noise = normals_from(cfg._stream(), (cfg.n_is, dim))
        return np.broadcast_to(cfg._cached_noise, full)
    return normals_from(cfg._stream(), full)


def uhis_control(
    params: ScalarBeta, cfg: UhisConfig, t: float, x, energy, xi=None
) -> ControlOutput:
    """Importance-sampled optimal drift at (t, x) for an energy target.

    Draws n_is points from the universal probe, weights them by
    exp(-E(y)) times the kernel ratio over the probe density, and
    recomposes the drift from the weighted state. Pass xi (standard
    normals, shape x.shape[:-1] + (n_is, d)) to control the noise
    explicitly; otherwise cfg.rng_stream supplies it.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    x = _as_points(params, "x", x)
    probe, universal = _probe_or_wide(params, t, x, cfg.t_min, cfg.wide_sigma2)
    if xi is None:
        xi = _draw_noise(cfg, x.shape[:-1], params.dim)
    else:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != x.shape[:-1] + (cfg.n_is, params.dim):
            raise InputError(
                f"xi must have shape {x.shape[:-1] + (cfg.n_is, params.dim)}, "
                f"got {xi.shape}"
            )
    panel = _shared_panel(xi) if (universal and x.ndim == 2) else None
    panel_fn = getattr(energy, "panel_logw", None)
    if panel is not None and panel_fn is not None:
        # probe cancels the kernel ratio exactly, so the weights are
        # exp(-E) alone and a shared panel never materializes (B, N, d)
        scale = 1.0 / np.sqrt(probe.precision_scalar)
        log_w = np.asarray(panel_fn(probe.mean, scale, panel), dtype=float)
        w, ess, max_w = _softmax_weights(log_w)
        # einsum, not gemm: its reduction order is independent of the
        # batch shape, keeping rows bitwise stable under batch splits
        xhat = probe.mean + scale * np.einsum("...n,nd->...d", w, panel)
    else:
        ys = probe.draw(xi)
        log_w = log_kernel_ratio(params, t, x[..., None, :], ys) - probe.log_pdf(ys)
        log_w = log_w - np.asarray(energy.value(ys), dtype=float)
        xhat, ess, max_w = _weighted_state(log_w, ys)
    c1, c2 = drift_prefactors(params, t)
    return ControlOutput(
        drift=c1 * (xhat - c2 * x),
        weighted_state=xhat,
        ess=_ret(ess),
        max_weight=_ret(max_w),
    )


def uhis_control_general(
    params: MatrixBeta, cfg: UhisConfig, t: float, x, energy, xi=None
) -> ControlOutput:
    """uhis_control for a matrix potential: per-eigen-axis reduction."""
    _validate_t(t, 0.0, 1.0, True, False)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != params.dim:
        raise InputError(
            f"x must have trailing dimension {params.dim}, got shape {x.shape}"
        )
    probe = None
    if t > cfg.t_min:
        try:
            probe = universal_probe_general(params, t, x)
        except DegenerateProbeGaussianError:
            probe = None
    if probe is None:
        probe = GeneralProbeGaussian(
            mean=np.zeros_like(x),
            precision_eig=np.full(params.dim, 1.0 / cfg.wide_sigma2),
            eigvecs=params.eigvecs,
            t=float(t),
        )
    if xi is None:
        xi = _draw_noise(cfg, x.shape[:-1], params.dim)
    else:
        xi = np.asarray(xi, dtype=float)
    ys = probe.draw(xi)
    log_w = (
        log_kernel_ratio_general(params, t, x[..., None, :], ys)
        - probe.log_pdf(ys)
        - np.asarray(energy.value(ys), dtype=float)
    )
    xhat, ess, max_w = _weighted_state(log_w, ys)
    c1, c2 = general_control_reduction(params, t)  # (d,) each, eigenbasis
    u_eig = c1 * (params.to_eigenbasis(xhat) - c2 * params.to_eigenbasis(x))
    return ControlOutput(
        drift=params.from_eigenbasis(u_eig),
        weighted_state=xhat,
        ess=_ret(ess),
        max_weight=_ret(max_w),
    )


def empirical_control(
    params: ScalarBeta, target: EmpiricalTarget, t: float, x
) -> ControlOutput:
    """Optimal drift when the target is the empirical measure of samples.

    Softmax over the kernel log-ratio at each stored sample; exact (no
    Monte Carlo error) given the sample set.
    """
    _validate_t(t, 0.0, 1.0, True, False)
    x = _as_points(params, "x", x)
    if target.dim != params.dim:
        raise InputError(
            f"target dimension {target.dim} does not match params.dim {params.dim}"
        )
    log_w = log_kernel_ratio(params, t, x[..., None, :], target.samples)
    xhat, ess, max_w = _weighted_state(log_w, target.samples)
    c1, c2 = drift_prefactors(params, t)
    return ControlOutput(
        drift=c1 * (xhat - c2 * x),
        weighted_state=xhat,
        ess=_ret(ess),
        max_weight=_ret(max_w),
    )


@dataclass(frozen=True)
class QuadratureGrid:
    """Fixed Simpson grid on [lo, hi]^d, n points per axis (n forced odd)."""

    lo: float = -12.0
    hi: float = 12.0
    n: int = 1601

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise InputError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 3:
            raise InputError(f"need at least 3 nodes per axis, got {self.n}")
        if self.n % 2 == 0:
            object.__setattr__(self, "n", self.n + 1)


_BOUNDARY_MASS_TOL = 1e-8


def _simpson_weights(n: int, lo: float, hi: float) -> np.ndarray:
    s = np.ones(n)
    s[1:-1:2] = 4.0
    s[2:-1:2] = 2.0
    return s * ((hi - lo) / (n - 1) / 3.0)


def _quadrature_state(params: ScalarBeta, t: float, x, energy, grid: QuadratureGrid):
    """Weighted state by direct integration; 1D/2D reference path."""
    d = params.dim
    if d not in (1, 2):
        raise InputError(f"quadrature reference supports dim 1 or 2, got {d}")
    axis = np.linspace(grid.lo, grid.hi, grid.n)
    s1 = _simpson_weights(grid.n, grid.lo, grid.hi)
    if d == 1:
        ys = axis[:, None]  # (n, 1)
        log_s = np.log(s1)
        boundary = np.zeros(grid.n, dtype=bool)
        boundary[0] = boundary[-1] = True
    else:
        ga, gb = np.meshgrid(axis, axis, indexing="ij")
        ys = np.stack([ga.ravel(), gb.ravel()], axis=1)  # (n*n, 2)
        log_s = np.log(np.outer(s1, s1)).ravel()
        edge = np.zeros((grid.n, grid.n), dtype=bool)
        edge[0, :] = edge[-1, :] = True
        edge[:, 0] = edge[:, -1] = True
        boundary = edge.ravel()
    log_w = (
        log_kernel_ratio(params, t, x, ys)
        - np.asarray(energy.value(ys), dtype=float)
        + log_s
    )
    m = float(log_w.max())
    if not np.isfinite(m):
        raise AccuracyError("integrand is non-finite over the whole grid")
    r = np.exp(log_w - m)
    total = float(r.sum())
    if float(r[boundary].sum()) > _BOUNDARY_MASS_TOL * total:
        raise AccuracyError(
            f"integrand mass at the grid boundary exceeds {_BOUNDARY_MASS_TOL:g} "
            f"of the total; enlarge [{grid.lo}, {grid.hi}]"
        )
    w = r / total
    xhat = w @ ys
    ess = 1.0 / float(w @ w)
    return xhat, ess, float(w.max())


def quadrature_control(
    params: ScalarBeta, t: float, x, energy, grid: QuadratureGrid | None = None
) -> np.ndarray:
    """Reference drift by direct integration over a bounded grid (d <= 2)."""
    _validate_t(t, 0.0, 1.0, True, False)
    x = _as_points(params, "x", x)
    if x.ndim != 1:
        raise InputError(f"x must be a single point, got shape {x.shape}")
    if grid is None:
        grid = QuadratureGrid()
    xhat, _, _ = _quadrature_state(params, t, x, energy, grid)
    c1, c2 = drift_prefactors(params, t)
    return c1 * (xhat - c2 * x)


class UhisControlEvaluator:
    """Integrator adapter around uhis_control (scalar or matrix potential)."""

    def __init__(self, params, energy, cfg: UhisConfig):
        self.params = params
        self.energy = energy
        self.cfg = cfg
        self._general = isinstance(params, MatrixBeta)

    @property
    def reuse_probe_noise(self) -> bool:
        return self.cfg.reuse_probe_noise

    def noise_shape(self, dim: int):
        return (self.cfg.n_is, dim)

    def __call__(self, t, x, xi=None) -> ControlOutput:
        if self._general:
            return uhis_control_general(self.params, self.cfg, t, x, self.energy, xi=xi)
        return uhis_control(self.params, self.cfg, t, x, self.energy, xi=xi)


class EmpiricalControlEvaluator:
    """Integrator adapter around empirical_control; deterministic."""

    def __init__(self, params: ScalarBeta, target: EmpiricalTarget):
        self.params = params
        self.target = target

    def noise_shape(self, dim: int):
        return None

    def __call__(self, t, x, xi=None) -> ControlOutput:
        return empirical_control(self.params, self.target, t, x)


class LegendreControlEvaluator:
    """Deterministic drift from the rescaled non-universal point."""

    def __init__(self, params: ScalarBeta, energy, max_iter: int = 50):
        self.params = params
        self.energy = energy
        self.max_iter = max_iter

    def noise_shape(self, dim: int):
        return None

    def __call__(self, t, x, xi=None) -> ControlOutput:
        u = legendre_control(self.params, t, x, self.energy, max_iter=self.max_iter)
        c1, c2 = drift_prefactors(self.params, t)
        x = np.asarray(x, dtype=float)
        return ControlOutput(
            drift=u, weighted_state=u / c1 + c2 * x, ess=1.0, max_weight=1.0
        )


class QuadratureControlEvaluator:
    """Deterministic reference drift by grid integration (d <= 2)."""

    def __init__(self, params: ScalarBeta, energy, grid: QuadratureGrid | None = None):
        self.params = params
        self.energy = energy
        self.grid = grid if grid is not None else QuadratureGrid()

    def noise_shape(self, dim: int):
        return None

    def __call__(self, t, x, xi=None) -> ControlOutput:
        x = _as_points(self.params, "x", x)
        c1, c2 = drift_prefactors(self.params, t)
        if x.ndim == 1:
            xhat, ess, max_w = _quadrature_state(self.params, t, x, self.energy, self.grid)
            return ControlOutput(
                drift=c1 * (xhat - c2 * x),
                weighted_state=xhat,
                ess=ess,
                max_weight=max_w,
            )
        flat = x.reshape(-1, x.shape[-1])
        xhat = np.empty_like(flat)
        ess = np.empty(flat.shape[0])
        max_w = np.empty(flat.shape[0])
        for i, row in enumerate(flat):
            xhat[i], ess[i], max_w[i] = _quadrature_state(
                self.params, t, row, self.energy, self.grid
            )
        lead = x.shape[:-1]
        xhat = xhat.reshape(x.shape)
        return ControlOutput(
            drift=c1 * (xhat - c2 * x),
            weighted_state=xhat,
            ess=ess.reshape(lead),
            max_weight=max_w.reshape(lead),
        )


class FunctionControlEvaluator:
    """Wrap a plain drift function u(t, x); no IS diagnostics available."""

    def __init__(self, fn):
        self.fn = fn

    def noise_shape(self, dim: int):
        return None

    def __call__(self, t, x, xi=None) -> ControlOutput:
        u = np.asarray(self.fn(t, np.asarray(x, dtype=float)), dtype=float)
        return ControlOutput(drift=u, weighted_state=None, ess=1.0, max_weight=1.0)
