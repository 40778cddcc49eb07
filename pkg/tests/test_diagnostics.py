import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hpid.control import EmpiricalControlEvaluator, EmpiricalTarget
from hpid.diagnostics import (
    autocorrelation,
    bootstrap_transition_gap,
    mode_assignment,
    transition_time,
    transition_times_per,
    write_autocorr_csv,
    write_modes_csv,
    write_transition_json,
)
from hpid.errors import ConfigError, InputError
from hpid.kernels import ScalarBeta
from hpid.sde import SdeConfig, Trajectory, integrate_batch
from hpid.targets import GaussianMixtureEnergy


def _traj(times, state_curve, weighted_curve, terminal=2.0):
    # 1-d states scaled so x(t).x(1)/|x(1)|^2 equals the given curve
    sc = np.asarray(state_curve, dtype=float)
    wc = np.asarray(weighted_curve, dtype=float)
    return Trajectory(
        times=np.asarray(times, dtype=float),
        states=(terminal * sc)[:, None],
        weighted_states=(terminal * wc)[:, None],
        terminal=np.array([terminal]),
        ess_series=np.ones(sc.shape[0]),
        max_weight_series=np.ones(sc.shape[0]),
        log_girsanov=0.0,
        potential_integral=0.0,
        terminal_weighted=None,
    )


TIMES = [0.0, 0.25, 0.5, 0.75, 1.0]
CURVE_A = ([0.0, 0.2, 0.4, 0.8, 1.0], [0.6, 0.9, 1.0, 1.0, 1.0])
CURVE_B = ([0.0, 0.0, 0.5, 1.0, 1.0], [0.0, 1.0, 1.0, 1.0, 1.0])


def _series():
    return autocorrelation([_traj(TIMES, *CURVE_A), _traj(TIMES, *CURVE_B)])


def test_autocorrelation_curves_match_construction():
    s = _series()
    assert s.n_trajectories == 2
    assert_allclose(s.per_state[0], CURVE_A[0], atol=1e-15)
    assert_allclose(s.per_weighted[1], CURVE_B[1], atol=1e-15)
    assert_allclose(s.corr_state, np.mean([CURVE_A[0], CURVE_B[0]], axis=0))
    assert_allclose(s.corr_weighted, np.mean([CURVE_A[1], CURVE_B[1]], axis=0))


def test_transition_time_interpolates():
    s = _series()
    # averaged state curve [0, .1, .45, .9, 1]: crosses 0.5 inside (0.5, 0.75)
    t_state = 0.5 + (0.05 / 0.45) * 0.25
    # averaged weighted curve [.3, .95, 1, 1, 1]
    t_weighted = (0.2 / 0.65) * 0.25
    assert transition_time(s) == pytest.approx(t_weighted, rel=1e-12)
    per_s = transition_times_per(s, which="state")
    assert_allclose(per_s, [0.5625, 0.5], atol=1e-12)
    per_w = transition_times_per(s, which="weighted")
    assert_allclose(per_w, [0.0, 0.125], atol=1e-12)
    with pytest.raises(InputError, match="which"):
        transition_times_per(s, which="both")
    # a threshold never reached reports nan
    assert np.isnan(transition_time(s, threshold=2.0))
    # gap between the observed curves
    b = bootstrap_transition_gap(s, n_resamples=64, seed=3)
    assert b["gap"] == pytest.approx(t_state - t_weighted, rel=1e-12)


def test_bootstrap_is_deterministic_and_positive_here():
    s = _series()
    a = bootstrap_transition_gap(s, n_resamples=200, seed=11)
    b = bootstrap_transition_gap(s, n_resamples=200, seed=11)
    assert a == b
    assert set(a) == {"gap", "p5", "p50", "p95", "n_resamples"}
    assert a["n_resamples"] == 200
    # both source rows have the weighted curve committing first, so every
    # resample keeps the gap positive
    assert a["p5"] > 0.3
    assert a["p5"] <= a["p50"] <= a["p95"]


def test_input_validation():
    with pytest.raises(InputError, match="no trajectories"):
        autocorrelation([])
    with pytest.raises(InputError, match="expected Trajectory"):
        autocorrelation([_traj(TIMES, *CURVE_A), 7])
    other = _traj([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
    with pytest.raises(InputError, match="mismatched"):
        autocorrelation([_traj(TIMES, *CURVE_A), other])
    with pytest.raises(InputError, match="zero"):
        autocorrelation([_traj(TIMES, *CURVE_A, terminal=0.0)])
    bad = _traj(TIMES, *CURVE_A)
    bad.weighted_states[2, 0] = np.nan
    with pytest.raises(ConfigError, match="non-finite"):
        autocorrelation([bad])
    no_ws = Trajectory(
        times=bad.times,
        states=bad.states,
        weighted_states=None,
        terminal=bad.terminal,
        ess_series=bad.ess_series,
        max_weight_series=bad.max_weight_series,
        log_girsanov=0.0,
        potential_integral=0.0,
        terminal_weighted=None,
    )
    with pytest.raises(ConfigError, match="weighted states were not recorded"):
        autocorrelation([no_ws])


def test_batch_input_requires_recording():
    target = EmpiricalTarget(np.array([[3.0], [-3.0]]))
    control = EmpiricalControlEvaluator(ScalarBeta(1.0, 1), target)
    cfg = SdeConfig(n_steps=8, seed=0)
    batch = integrate_batch(
        cfg, control, dim=1, n_trajectories=3, params=ScalarBeta(1.0, 1), record="none"
    )
    with pytest.raises(ConfigError, match="without recording"):
        autocorrelation(batch)
    batch = integrate_batch(
        cfg, control, dim=1, n_trajectories=3, params=ScalarBeta(1.0, 1), record="all"
    )
    with pytest.raises(ConfigError, match="record_weighted_state"):
        autocorrelation(batch)


def test_weighted_state_commits_before_state():
    # far-apart targets under confinement: x-hat picks its row early
    # while x only approaches it near the end of the bridge
    target = EmpiricalTarget(np.array([[8.0, 0.0], [-8.0, 0.0]]))
    control = EmpiricalControlEvaluator(ScalarBeta(1.0, 2), target)
    cfg = SdeConfig(
        n_steps=200, seed=21, record_every=2, record_weighted_state=True
    )
    batch = integrate_batch(
        cfg, control, dim=2, n_trajectories=40, params=ScalarBeta(1.0, 2), record="all"
    )
    series = autocorrelation(batch)
    assert series.per_state.shape == (40, batch.times.shape[0])
    t_w = transition_time(series)
    per_state = transition_times_per(series, which="state")
    t_s = float(np.nanmean(per_state))
    assert 0.0 < t_w < t_s < 1.0
    # the state overlap approaches 1 at the end of the run
    assert series.corr_state[-1] > 0.8
    assert series.corr_weighted[-1] > 0.95
    gap = bootstrap_transition_gap(series, n_resamples=300, seed=0)
    assert gap["gap"] > 0
    assert gap["p5"] > 0


def test_mode_assignment_counts():
    m = GaussianMixtureEnergy(
        centers=np.array([[0.0, 0.0], [5.0, 5.0]]),
        sigma2=0.5,
        weights=np.array([0.25, 0.75]),
    )
    pts = np.array([[0.1, -0.2], [4.8, 5.1], [5.2, 4.9], [4.0, 4.0]])
    hist = mode_assignment(pts, m)
    assert_allclose(hist.counts, [1.0, 3.0])
    assert_allclose(hist.expected, [1.0, 3.0])
    assert hist.chi2 == 0.0
    assert hist.assignments.tolist() == [0, 1, 1, 1]
    with pytest.raises(InputError, match="no terminal"):
        mode_assignment(np.empty((0, 2)), m)


def test_mode_assignment_one_dimensional_and_zero_weight():
    m = GaussianMixtureEnergy(
        centers=np.array([[0.0], [4.0]]),
        sigma2=0.5,
        weights=np.array([0.0, 1.0]),
    )
    hist = mode_assignment(np.array([0.1, 3.9, 4.2]), m)
    assert_allclose(hist.counts, [1.0, 2.0])
    # mass observed in a mode the target gives zero weight
    assert hist.chi2 == np.inf


def test_csv_and_json_writers(tmp_path):
    s = _series()
    ac = tmp_path / "autocorr.csv"
    write_autocorr_csv(str(ac), s)
    rows = np.genfromtxt(ac, delimiter=",", names=True)
    assert rows.dtype.names == ("t", "corr_state", "corr_weighted")
    assert_allclose(rows["corr_state"], s.corr_state, rtol=0, atol=0)

    m = GaussianMixtureEnergy(
        centers=np.array([[0.0], [4.0]]),
        sigma2=0.5,
        weights=np.array([0.5, 0.5]),
    )
    hist = mode_assignment(np.array([0.1, 3.9]), m)
    mc = tmp_path / "modes.csv"
    write_modes_csv(str(mc), hist)
    lines = mc.read_text().strip().split("\n")
    assert lines[0] == "mode,count,expected"
    assert lines[1].startswith("0,1,")
    assert len(lines) == 3

    tj = tmp_path / "transition.json"
    boot = bootstrap_transition_gap(s, n_resamples=32, seed=0)
    write_transition_json(str(tj), s, threshold=0.5, bootstrap=boot)
    doc = json.loads(tj.read_text())
    assert doc["threshold"] == 0.5
    assert doc["n_trajectories"] == 2
    assert doc["transition_weighted"] == pytest.approx(transition_time(s))
    assert doc["bootstrap_gap"]["n_resamples"] == 32

    # a threshold that is never reached serializes as null
    write_transition_json(str(tj), s, threshold=2.0)
    doc = json.loads(tj.read_text())
    assert doc["transition_weighted"] is None
    assert doc["transition_state"] is None
    assert "bootstrap_gap" not in doc
