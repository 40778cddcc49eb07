"""Re-measure acceptance criteria 2 (UHIS leg), 3, and 4 after the
batch-stability change to the shared-panel contraction."""

import time

import numpy as np
from scipy.stats import chi2

from hpid.control import UhisConfig
from hpid.sampler import RunConfig, estimate_z_convergence, run
from hpid.sde import SdeConfig
from hpid.targets import GaussianEnergy, assign_modes, grid_mixture, mixture_partition_oracle


def c2_leg_b():
    t0 = time.perf_counter()
    cfg = RunConfig(
        n_samples=10_000,
        sde=SdeConfig(n_steps=200, seed=1),
        beta=0.0,
        energy=GaussianEnergy(dim=2, sigma2=0.25),
        control_mode="uhis",
        uhis=UhisConfig(n_is=4000, reuse_probe_noise=True),
    )
    s = run(cfg)
    mean = s.terminals.mean(axis=0)
    var = s.terminals.var(axis=0, ddof=1)
    print(f"[c2B] mean={mean} var={var}  ({time.perf_counter()-t0:.1f}s)")
    print(f"[c2B] |mean|<0.015: {np.all(np.abs(mean) < 0.015)}; var in [0.23939,0.26061]: {np.all((var > 0.23939) & (var < 0.26061))}")


def c3():
    m = grid_mixture()
    z_ref = mixture_partition_oracle(m)
    for beta in (0.0, 0.1, 1.0):
        t0 = time.perf_counter()
        cfg = RunConfig(
            n_samples=1000,
            sde=SdeConfig(n_steps=200, seed=314159),
            beta=beta,
            energy=m,
            control_mode="uhis",
            uhis=UhisConfig(n_is=10_000, reuse_probe_noise=True),
        )
        s = run(cfg)
        modes = assign_modes(m, s.terminals)
        counts = np.bincount(modes, minlength=9)
        chi2_stat = float(((counts - 1000 / 9) ** 2 / (1000 / 9)).sum())
        print(
            f"[c3] beta={beta}: min_share={counts.min()/1000:.3f} chi2={chi2_stat:.2f} "
            f"(crit {chi2.ppf(0.99, 8):.2f}) z={s.z_estimate:.4f} zref={z_ref:.4f} "
            f"({time.perf_counter()-t0:.1f}s)"
        )


def c4():
    t0 = time.perf_counter()
    m = grid_mixture()
    base = RunConfig(
        n_samples=500,
        sde=SdeConfig(n_steps=100, seed=20260819),
        beta=0.5,
        energy=m,
        control_mode="uhis",
        uhis=UhisConfig(n_is=1000, reuse_probe_noise=True),
    )
    rows = estimate_z_convergence(
        base, steps_list=[25, 50, 100, 200], samples_list=[250, 500, 1000], n_repeats=10
    )
    z_ref = mixture_partition_oracle(m)
    for sweep, settings in (("steps", [25, 50, 100, 200]), ("samples", [250, 500, 1000])):
        meds, iqrs = [], []
        for v in settings:
            zs = np.array([r["z"] for r in rows if r["sweep"] == sweep and r["setting"] == v])
            meds.append(np.median(zs))
            q1, q3 = np.percentile(zs, [25, 75])
            iqrs.append(q3 - q1)
        err = abs(meds[-1] - z_ref) / z_ref
        print(f"[c4] {sweep}: medians={np.round(meds,4)} iqrs={np.round(iqrs,4)} finest_err={err:.4f}")
        print(f"[c4] {sweep}: iqr endpoints non-increasing: {iqrs[-1] <= iqrs[0]}")
    print(f"[c4] total {time.perf_counter()-t0:.1f}s")


if __name__ == "__main__":
    c2_leg_b()
    c3()
    c4()
