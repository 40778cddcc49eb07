import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

import hpid.sampler as sampler_mod
from hpid.control import EmpiricalTarget, QuadratureGrid, UhisConfig
from hpid.errors import ConfigError, IntegrationError
from hpid.sampler import RunConfig, estimate_z_convergence, run
from hpid.sde import SdeConfig
from hpid.targets import GaussianEnergy, load_dataset


def _gauss_cfg(**kw):
    base = dict(
        n_samples=64,
        sde=SdeConfig(n_steps=20, seed=7),
        beta=0.0,
        energy=GaussianEnergy(dim=2, sigma2=1.0),
        control_mode="uhis",
        uhis=UhisConfig(n_is=128, reuse_probe_noise=True),
    )
    base.update(kw)
    return RunConfig(**base)


def _dataset_cfg(**kw):
    target = EmpiricalTarget(np.array([[1.5, 0.0], [-1.5, 0.5], [0.0, -1.0]]))
    base = dict(
        n_samples=32,
        sde=SdeConfig(n_steps=16, seed=3),
        beta=0.4,
        dataset=target,
        control_mode="empirical",
    )
    base.update(kw)
    return RunConfig(**base)


def test_validation_rules():
    with pytest.raises(ConfigError, match="exactly one"):
        run(RunConfig(n_samples=4, sde=SdeConfig(n_steps=4, seed=0)))
    with pytest.raises(ConfigError, match="exactly one"):
        run(_gauss_cfg(dataset=EmpiricalTarget(np.zeros((2, 2)))))
    with pytest.raises(ConfigError, match="empirical"):
        run(_dataset_cfg(control_mode="uhis"))
    with pytest.raises(ConfigError, match="control_mode"):
        run(_gauss_cfg(control_mode="empirical"))
    with pytest.raises(ConfigError, match="n_samples"):
        run(_gauss_cfg(n_samples=0))
    with pytest.raises(ConfigError, match="dim"):
        run(_gauss_cfg(beta=np.array([0.5, 0.5, 0.5])))
    with pytest.raises(ConfigError, match="uhis"):
        run(_gauss_cfg(beta=np.array([0.5, 0.5]), control_mode="legendre"))


def test_energy_run_estimates_partition():
    # beta=0, target N(0, I): Z = 2 pi in two dimensions
    s = run(_gauss_cfg(n_samples=256))
    assert s.terminals.shape == (256, 2)
    assert np.isfinite(s.terminals).all()
    assert s.z_estimate is not None and s.z_estimate > 0
    assert s.z_stderr > 0
    want = 2.0 * np.pi
    assert abs(s.z_estimate - want) < max(4.0 * s.z_stderr, 0.15 * want)
    assert s.min_ess >= 1.0
    assert s.ess_min.shape == (256,)


def test_dataset_run_has_no_partition_estimate():
    s = run(_dataset_cfg())
    assert s.z_estimate is None and s.z_stderr is None
    assert s.terminals.shape == (32, 2)
    assert np.isfinite(s.terminals).all()


def test_runs_are_reproducible_bitwise():
    a = run(_gauss_cfg())
    b = run(_gauss_cfg())
    assert np.array_equal(a.terminals, b.terminals)
    assert a.z_estimate == b.z_estimate
    assert a.config_hash == b.config_hash


def test_prefix_of_larger_run_is_identical():
    # trajectory i depends only on its own index, so growing the
    # population extends the sample set without disturbing it
    small = run(_gauss_cfg(n_samples=4, uhis=UhisConfig(n_is=64)))
    large = run(_gauss_cfg(n_samples=8, uhis=UhisConfig(n_is=64)))
    assert np.array_equal(large.terminals[:4], small.terminals)


def test_thread_count_does_not_change_outputs():
    cfg1 = _gauss_cfg(n_samples=600, uhis=UhisConfig(n_is=4000, reuse_probe_noise=True))
    cfg3 = _gauss_cfg(
        n_samples=600,
        uhis=UhisConfig(n_is=4000, reuse_probe_noise=True),
        threads=3,
    )
    a = run(cfg1)
    b = run(cfg3)
    # chunking splits 600 trajectories into several batches here
    assert len(range(0, 600, sampler_mod._chunk_size("uhis", cfg1, 2))) > 1
    assert np.array_equal(a.terminals, b.terminals)
    assert a.z_estimate == b.z_estimate


def test_early_exit_returns_weighted_terminals():
    s = run(_dataset_cfg(early_exit=True))
    assert s.early_terminals is not None
    assert s.early_terminals.shape == (32, 2)
    # the weighted state is a convex combination of the stored samples
    lo = np.array([[1.5, 0.0], [-1.5, 0.5], [0.0, -1.0]]).min(axis=0)
    hi = np.array([[1.5, 0.0], [-1.5, 0.5], [0.0, -1.0]]).max(axis=0)
    assert np.all(s.early_terminals >= lo - 1e-9)
    assert np.all(s.early_terminals <= hi + 1e-9)


def test_quadrature_oracle_mode():
    cfg = RunConfig(
        n_samples=8,
        sde=SdeConfig(n_steps=10, seed=5),
        beta=0.3,
        energy=GaussianEnergy(dim=1, sigma2=0.8),
        control_mode="quadrature-oracle",
        quadrature=QuadratureGrid(lo=-10.0, hi=10.0, n=401),
    )
    s = run(cfg)
    assert s.terminals.shape == (8, 1)
    assert s.z_estimate > 0


def test_legendre_mode():
    cfg = RunConfig(
        n_samples=8,
        sde=SdeConfig(n_steps=10, seed=5),
        beta=0.3,
        energy=GaussianEnergy(dim=2, sigma2=0.8),
        control_mode="legendre",
    )
    s = run(cfg)
    assert s.terminals.shape == (8, 2)
    assert np.isfinite(s.terminals).all()


def test_output_directory_contents(tmp_path):
    out = tmp_path / "run"
    s = run(_dataset_cfg(out_dir=str(out), n_record=2))
    doc = json.loads((out / "summary.json").read_text())
    assert doc["status"] == "complete"
    assert doc["n_samples"] == 32 and doc["dim"] == 2
    assert doc["z_estimate"] is None
    assert doc["config_sha256"] == s.config_hash
    assert doc["config"]["sde"]["seed"] == 3
    assert doc["terminals"] == "terminals.bin"
    assert doc["trajectories"] == ["trajectory_0.csv", "trajectory_1.csv"]
    assert 0.0 <= doc["low_ess_fraction"] <= 1.0
    back = load_dataset(str(out / "terminals.bin"))
    assert np.array_equal(back.samples, s.terminals)
    rows = np.genfromtxt(out / "trajectory_0.csv", delimiter=",", names=True)
    assert rows.dtype.names == ("t", "x0", "x1", "xhat0", "xhat1", "ess")
    assert np.all(np.diff(rows["t"]) > 0)
    assert np.isfinite(rows["xhat0"]).all()
    assert np.all(rows["ess"] >= 1.0)


def test_energy_output_manifest(tmp_path):
    out = tmp_path / "run"
    s = run(_gauss_cfg(out_dir=str(out)))
    doc = json.loads((out / "summary.json").read_text())
    assert doc["z_estimate"] == s.z_estimate
    assert doc["min_ess"] == pytest.approx(s.min_ess)
    assert doc["ess_min_median"] >= 1.0
    assert doc["trajectories"] == []


def test_aborted_run_writes_manifest(tmp_path, monkeypatch):
    def explode(*a, **k):
        raise IntegrationError(step=3, state_norm=12.5, trajectory=5)

    monkeypatch.setattr(sampler_mod, "integrate_batch", explode)
    out = tmp_path / "run"
    with pytest.raises(IntegrationError):
        run(_dataset_cfg(out_dir=str(out)))
    doc = json.loads((out / "summary.json").read_text())
    assert doc["status"] == "aborted"
    assert doc["failed_step"] == 3
    assert doc["failed_trajectory"] == 5
    assert "diverged at step 3" in doc["error"]


def test_config_hash_tracks_content():
    a = run(_gauss_cfg(n_samples=2))
    b = run(_gauss_cfg(n_samples=2, sde=SdeConfig(n_steps=20, seed=8)))
    assert a.config_hash != b.config_hash
    assert len(a.config_hash) == 64


def test_convergence_sweep_rows():
    cfg = _gauss_cfg(n_samples=16, uhis=UhisConfig(n_is=64, reuse_probe_noise=True))
    rows = estimate_z_convergence(cfg, steps_list=[8, 16], samples_list=[12], n_repeats=2)
    assert len(rows) == 6
    assert {r["sweep"] for r in rows} == {"steps", "samples"}
    for r in rows:
        assert r["z"] > 0
    # the sweep is seeded deterministically
    again = estimate_z_convergence(cfg, steps_list=[8, 16], samples_list=[12], n_repeats=2)
    assert [r["z"] for r in rows] == [r["z"] for r in again]
    # steps sweep varies n_steps, holding n_samples fixed
    steps_rows = [r for r in rows if r["sweep"] == "steps"]
    assert sorted({r["setting"] for r in steps_rows}) == [8, 16]
    with pytest.raises(ConfigError):
        estimate_z_convergence(cfg, [], [], 2)
    with pytest.raises(ConfigError):
        estimate_z_convergence(cfg, [8], [], 0)
