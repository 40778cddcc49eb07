"""Post-run diagnostics: the overlap of x(t) and x-hat(t) with the
terminal sample, mode-coverage histograms, and transition-time readouts.

The overlap curves expose the two-phase character of the controlled
process: the weighted state x-hat commits to the final sample early
while the state x only catches up near t = 1. The time at which each
normalized curve first crosses a threshold (0.5 by default) summarizes a
run by two numbers, and their gap is the quantity of interest.

Normalization: each trajectory contributes x(t).x(1) / |x(1)|^2, then
curves are averaged across trajectories; the per-trajectory rows are
kept alongside the averages so resampling tests can work on them.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .sde import BatchTrajectories, Trajectory
from .targets import GaussianMixtureEnergy, assign_modes


@dataclass(frozen=True)
class AutocorrSeries:
    times: np.ndarray  # (R,)
    corr_state: np.ndarray  # (R,) ensemble average
    corr_weighted: np.ndarray  # (R,) ensemble average
    n_trajectories: int
    per_state: np.ndarray  # (n_trajectories, R)
    per_weighted: np.ndarray  # (n_trajectories, R)


def _collect(trajs):
    """(times, states, weighted, terminals) from either input shape."""
    if isinstance(trajs, BatchTrajectories):
        if trajs.states is None or trajs.record_indices.size == 0:
            raise ConfigError("trajectories were integrated without recording")
        if trajs.weighted_states is None:
            raise ConfigError(
                "weighted states were not recorded; set record_weighted_state"
            )
        return (
            trajs.times,
            trajs.states,
            trajs.weighted_states,
            trajs.terminals[trajs.record_indices],
        )
    trajs = list(trajs)
    if not trajs:
        raise InputError("no trajectories given")
    times = trajs[0].times
    for tr in trajs:
        if not isinstance(tr, Trajectory):
            raise InputError(f"expected Trajectory, got {type(tr).__name__}")
        if tr.weighted_states is None:
            raise ConfigError(
                "weighted states were not recorded; set record_weighted_state"
            )
        if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
            raise InputError("trajectories have mismatched recording grids")
    states = np.stack([tr.states for tr in trajs])
    weighted = np.stack([tr.weighted_states for tr in trajs])
    terminals = np.stack([tr.terminal for tr in trajs])
    return times, states, weighted, terminals


def autocorrelation(trajs) -> AutocorrSeries:
    """Normalized overlap of x(t) and x-hat(t) with x(1), averaged over paths."""
    times, states, weighted, terminals = _collect(trajs)
    if not np.all(np.isfinite(weighted)):
        raise ConfigError(
            "weighted states contain non-finite entries; the control used "
            "does not report x-hat"
        )
    den = np.einsum("bd,bd->b", terminals, terminals)
    if np.any(den <= 0):
        raise InputError("a terminal state is exactly zero; cannot normalize")
    per_state = np.einsum("brd,bd->br", states, terminals) / den[:, None]
    per_weighted = np.einsum("brd,bd->br", weighted, terminals) / den[:, None]
    return AutocorrSeries(
        times=times,
        corr_state=per_state.mean(axis=0),
        corr_weighted=per_weighted.mean(axis=0),
        n_trajectories=states.shape[0],
        per_state=per_state,
        per_weighted=per_weighted,
    )


def _first_crossing(times, values, threshold) -> float:
    if values[0] >= threshold:
        return float(times[0])
    for i in range(1, len(values)):
        if values[i] >= threshold:
            t0, t1 = times[i - 1], times[i]
            v0, v1 = values[i - 1], values[i]
            if v1 == v0:
                return float(t1)
            return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))
    return math.nan  # never reaches the threshold


def transition_time(series: AutocorrSeries, threshold: float = 0.5) -> float:
    """First time the averaged weighted-state overlap crosses the threshold.

    Linear interpolation between recorded points; nan if never reached.
    """
    if series.corr_weighted.size == 0:
        raise InputError("empty autocorrelation series")
    return _first_crossing(series.times, series.corr_weighted, threshold)


def transition_times_per(
    series: AutocorrSeries, threshold: float = 0.5, which: str = "weighted"
) -> np.ndarray:
    """Per-trajectory crossing times of the chosen overlap curve."""
    if which == "weighted":
        rows = series.per_weighted
    elif which == "state":
        rows = series.per_state
    else:
        raise InputError(f"which must be 'weighted' or 'state', got {which!r}")
    return np.array(
        [_first_crossing(series.times, row, threshold) for row in rows]
    )


def bootstrap_transition_gap(
    series: AutocorrSeries,
    threshold: float = 0.5,
    n_resamples: int = 1000,
    seed: int = 0,
) -> dict:
    """Bootstrap (over trajectories) of the state-minus-weighted crossing gap.

    Positive gap means the weighted state commits before the state does.
    Returns the observed gap and percentile bounds of the resampled gaps.
    """
    b = series.per_state.shape[0]
    rng = np.random.default_rng(seed)
    gaps = np.empty(n_resamples)
    for r in range(n_resamples):
        idx = rng.integers(0, b, b)
        t_s = _first_crossing(series.times, series.per_state[idx].mean(axis=0), threshold)
        t_w = _first_crossing(
            series.times, series.per_weighted[idx].mean(axis=0), threshold
        )
        gaps[r] = t_s - t_w
    observed = _first_crossing(
        series.times, series.corr_state, threshold
    ) - _first_crossing(series.times, series.corr_weighted, threshold)
    return {
        "gap": observed,
        "p5": float(np.percentile(gaps, 5)),
        "p50": float(np.percentile(gaps, 50)),
        "p95": float(np.percentile(gaps, 95)),
        "n_resamples": n_resamples,
    }


@dataclass(frozen=True)
class ModeHistogram:
    counts: np.ndarray  # (M,)
    expected: np.ndarray  # (M,)
    chi2: float
    assignments: np.ndarray  # (S,)


def mode_assignment(terminals, m: GaussianMixtureEnergy) -> ModeHistogram:
    """Nearest-center counts and the chi-square statistic against weights."""
    t = np.asarray(terminals, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape[0] < 1:
        raise InputError("no terminal samples given")
    idx = assign_modes(m, t)
    counts = np.bincount(idx, minlength=m.weights.shape[0]).astype(float)
    expected = m.weights * t.shape[0]
    chi2 = 0.0
    for c, e in zip(counts, expected):
        if e > 0:
            chi2 += (c - e) ** 2 / e
        elif c > 0:
            chi2 = math.inf
            break
    return ModeHistogram(
        counts=counts, expected=expected, chi2=float(chi2), assignments=idx
    )


def write_autocorr_csv(path: str, series: AutocorrSeries) -> None:
    with open(path, "w") as f:
        f.write("t,corr_state,corr_weighted\n")
        for i in range(series.times.shape[0]):
            f.write(
                f"{series.times[i]:.17g},{series.corr_state[i]:.17g},"
                f"{series.corr_weighted[i]:.17g}\n"
            )


def write_modes_csv(path: str, hist: ModeHistogram) -> None:
    with open(path, "w") as f:
        f.write("mode,count,expected\n")
        for i in range(hist.counts.shape[0]):
            f.write(f"{i},{int(hist.counts[i])},{hist.expected[i]:.17g}\n")


def write_transition_json(
    path: str, series: AutocorrSeries, threshold: float = 0.5, bootstrap: dict | None = None
) -> None:
    doc = {
        "threshold": threshold,
        "n_trajectories": series.n_trajectories,
        "transition_weighted": transition_time(series, threshold),
        "transition_state": _first_crossing(
            series.times, series.corr_state, threshold
        ),
    }
    if bootstrap is not None:
        doc["bootstrap_gap"] = bootstrap
    for k, v in list(doc.items()):
        if isinstance(v, float) and math.isnan(v):
            doc[k] = None  # JSON has no nan; null marks "not reached"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
