"""Euler-Maruyama integration of the controlled process dx = u dt + dW.

Uniform grid on [0, 1], K steps, x(0) = 0. The drift is always evaluated
at the left endpoint of each step, so the singular time t = 1 is never
queried and the 1/(1-t) growth of the optimal drift is tamed exactly.

Noise comes from counter-based streams keyed by (seed, step, purpose)
with one row per trajectory, so a trajectory's path is bit-identical no
matter how the batch is partitioned or threaded. Each step also
accumulates the two pieces of the path's likelihood ratio against the
uncontrolled reference measure (the Girsanov sum for the drift and the
left-Riemann integral of the quadratic potential); the partition-function
estimator in the sampler is assembled from them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, IntegrationError
from .kernels import ScalarBeta
from .matrix_kernels import MatrixBeta
from .rng import PURPOSE_INCREMENT, PURPOSE_PROBE, normal_rows


@dataclass(frozen=True)
class SdeConfig:
    n_steps: int  # K
    seed: int
    record_every: int = 1
    record_weighted_state: bool = False

    def __post_init__(self):
        if self.n_steps < 2:
            raise InputError(f"n_steps must be >= 2, got {self.n_steps}")
        if not (1 <= self.record_every <= self.n_steps):
            raise InputError(
                f"record_every must be in [1, {self.n_steps}], got {self.record_every}"
            )

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps


@dataclass(frozen=True)
class Trajectory:
    """One recorded path. times hold the drift-evaluation instants; the
    state at t = 1 lives in terminal, after the last step."""

    times: np.ndarray  # (R,)
    states: np.ndarray  # (R, d)
    weighted_states: np.ndarray | None  # (R, d)
    terminal: np.ndarray  # (d,)
    ess_series: np.ndarray  # (R,)
    max_weight_series: np.ndarray  # (R,)
    log_girsanov: float
    potential_integral: float
    terminal_weighted: np.ndarray | None  # x-hat at the last step


@dataclass(frozen=True)
class BatchTrajectories:
    """Trajectories advanced together; recording restricted to record_indices."""

    times: np.ndarray  # (R,)
    record_indices: np.ndarray  # (B_rec,) indices into the batch
    states: np.ndarray | None  # (B_rec, R, d)
    weighted_states: np.ndarray | None  # (B_rec, R, d)
    ess_series: np.ndarray | None  # (B_rec, R)
    max_weight_series: np.ndarray | None  # (B_rec, R)
    terminals: np.ndarray  # (B, d)
    log_girsanov: np.ndarray  # (B,)
    potential_integral: np.ndarray  # (B,)
    terminal_weighted: np.ndarray | None  # (B, d)
    min_ess: float
    ess_min_per: np.ndarray  # (B,) minimum ESS over steps, per trajectory


def _potential_values(params, x):
    if params is None:
        return 0.0
    if isinstance(params, MatrixBeta):
        return params.potential(x)
    if isinstance(params, ScalarBeta):
        return 0.5 * params.beta * np.einsum("...i,...i->...", x, x)
    raise InputError(f"unsupported potential parameters: {type(params).__name__}")


def _resolve_record(record, n_trajectories):
    if record is None or record == "none":
        return np.empty(0, dtype=int)
    if isinstance(record, str):
        if record == "all":
            return np.arange(n_trajectories)
        raise InputError(f"record must be 'none', 'all', or indices, got {record!r}")
    idx = np.asarray(record, dtype=int)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= n_trajectories)):
        raise InputError(f"record indices out of range for batch of {n_trajectories}")
    return idx


def integrate_batch(
    cfg: SdeConfig,
    control,
    dim: int,
    n_trajectories: int,
    first_trajectory: int = 0,
    params=None,
    record="none",
) -> BatchTrajectories:
    """Advance n_trajectories paths together through all K steps.

    first_trajectory offsets the noise rows, so splitting a population of
    paths into consecutive batches reproduces exactly the paths a single
    large batch would produce.
    """
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    if n_trajectories < 1:
        raise InputError(f"n_trajectories must be >= 1, got {n_trajectories}")
    K = cfg.n_steps
    dt = cfg.dt
    sqrt_dt = math.sqrt(dt)
    B = n_trajectories

    noise_shape = control.noise_shape(dim)
    reuse = bool(getattr(control, "reuse_probe_noise", False))
    rec_idx = _resolve_record(record, B)
    rec_steps = sorted({k for k in range(K) if k % cfg.record_every == 0} | {K - 1})
    rec_col = {k: r for r, k in enumerate(rec_steps)}
    R = len(rec_steps)
    n_rec = rec_idx.size

    times = np.array([k * dt for k in rec_steps])
    states = np.empty((n_rec, R, dim)) if n_rec else None
    w_states = (
        np.empty((n_rec, R, dim)) if (n_rec and cfg.record_weighted_state) else None
    )
    ess_series = np.empty((n_rec, R)) if n_rec else None
    maxw_series = np.empty((n_rec, R)) if n_rec else None

    x = np.zeros((B, dim))
    gir = np.zeros(B)
    pot = np.zeros(B)
    min_ess = math.inf
    ess_min_per = np.full(B, math.inf)
    terminal_weighted = None

    for k in range(K):
        t = k * dt
        xi_probe = None
        if noise_shape is not None:
            n_is = int(noise_shape[0])
            width = n_is * dim
            if reuse:
                # one panel per step, shared by the whole batch; keying by
                # step only keeps the paths invariant under batch splits
                block = normal_rows(cfg.seed, k, PURPOSE_PROBE, 0, 1, width)
                xi_probe = np.broadcast_to(block.reshape(n_is, dim), (B, n_is, dim))
            else:
                xi_probe = normal_rows(
                    cfg.seed, k, PURPOSE_PROBE, first_trajectory, B, width
                ).reshape(B, n_is, dim)
        out = control(t, x, xi=xi_probe)
        u = np.asarray(out.drift, dtype=float)
        if u.shape != x.shape:
            raise InputError(
                f"control returned drift of shape {u.shape}, expected {x.shape}"
            )

        ess = np.broadcast_to(np.asarray(out.ess, dtype=float), (B,))
        np.minimum(ess_min_per, ess, out=ess_min_per)
        step_min = float(ess.min())
        if step_min < min_ess:
            min_ess = step_min
        if n_rec and k in rec_col:
            r = rec_col[k]
            states[:, r] = x[rec_idx]  # state at the drift instant
            ess_series[:, r] = ess[rec_idx]
            maxw_series[:, r] = np.broadcast_to(
                np.asarray(out.max_weight, dtype=float), (B,)
            )[rec_idx]
            if w_states is not None:
                if out.weighted_state is None:
                    w_states[:, r] = np.nan
                else:
                    ws = np.broadcast_to(
                        np.asarray(out.weighted_state, dtype=float), (B, dim)
                    )
                    w_states[:, r] = ws[rec_idx]
        if k == K - 1 and out.weighted_state is not None:
            terminal_weighted = np.array(
                np.broadcast_to(np.asarray(out.weighted_state, dtype=float), (B, dim))
            )

        xi = normal_rows(cfg.seed, k, PURPOSE_INCREMENT, first_trajectory, B, dim)
        x_new = x + u * dt + sqrt_dt * xi
        bad = ~np.all(np.isfinite(x_new), axis=1)
        if bad.any():
            i = int(np.argmax(bad))
            raise IntegrationError(
                step=k,
                state_norm=float(np.linalg.norm(x[i])),
                trajectory=first_trajectory + i,
            )
        pot += dt * _potential_values(params, x)
        gir += -sqrt_dt * np.einsum("bd,bd->b", u, xi) - 0.5 * dt * np.einsum(
            "bd,bd->b", u, u
        )
        x = x_new

    return BatchTrajectories(
        times=times,
        record_indices=rec_idx,
        states=states,
        weighted_states=w_states,
        ess_series=ess_series,
        max_weight_series=maxw_series,
        terminals=x,
        log_girsanov=gir,
        potential_integral=pot,
        terminal_weighted=terminal_weighted,
        min_ess=min_ess,
        ess_min_per=ess_min_per,
    )


def integrate(
    cfg: SdeConfig,
    control,
    dim: int,
    params=None,
    trajectory_index: int = 0,
) -> Trajectory:
    """One path; identical to the same row of any batch containing it."""
    b = integrate_batch(
        cfg,
        control,
        dim,
        n_trajectories=1,
        first_trajectory=trajectory_index,
        params=params,
        record="all",
    )
    ws = None
    if b.weighted_states is not None and np.all(np.isfinite(b.weighted_states[0])):
        ws = b.weighted_states[0]
    return Trajectory(
        times=b.times,
        states=b.states[0],
        weighted_states=ws,
        terminal=b.terminals[0],
        ess_series=b.ess_series[0],
        max_weight_series=b.max_weight_series[0],
        log_girsanov=float(b.log_girsanov[0]),
        potential_integral=float(b.potential_integral[0]),
        terminal_weighted=(
            None if b.terminal_weighted is None else b.terminal_weighted[0]
        ),
    )
