"""Command-line front end.

Subcommands:
  sample-energy     sample a built-in energy target from a manifest file
  sample-empirical  sample toward rows of a dataset file
  estimate-z        repeat runs across step/sample sweeps, tabulate Z
  diagnose          overlap curves and mode coverage for a recorded run
  oracle-check      importance-sampled control vs the quadrature oracle

Exit codes: 0 success; 2 bad configuration, schema, or input file;
3 numerical failure (diverged trajectory, accuracy contract missed).

Worker threads come from --threads, else the HPID_THREADS environment
variable, else the machine's available parallelism. Thread count never
changes results; it only changes wall time.
"""

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import (
    build_run_config,
    config_sha,
    config_text,
    load_config_file,
    resolve,
)
from .control import UhisConfig, quadrature_control, uhis_control
from .diagnostics import (
    autocorrelation,
    bootstrap_transition_gap,
    mode_assignment,
    transition_time,
    write_autocorr_csv,
    write_modes_csv,
    write_transition_json,
)
from .errors import (
    AccuracyError,
    ConfigError,
    DegenerateProbeGaussianError,
    DomainError,
    FormatError,
    InputError,
    IntegrationError,
)
from .kernels import ScalarBeta
from .sampler import estimate_z_convergence, run
from .sde import Trajectory
from .targets import DoubleWellEnergy, GaussianMixtureEnergy, load_dataset


def _threads(flag):
    if flag is not None:
        v = flag
    elif os.environ.get("HPID_THREADS"):
        raw = os.environ["HPID_THREADS"]
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"HPID_THREADS={raw!r} is not an integer") from None
    else:
        v = os.cpu_count() or 1
    if v < 1:
        raise ConfigError(f"threads must be >= 1, got {v}")
    return v


def _int_list(text: str, flag: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(int(part))
        except ValueError:
            raise ConfigError(f"{flag}: {part!r} is not an integer") from None
    return out


def _float_list(text: str, flag: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(float(part))
        except ValueError:
            raise ConfigError(f"{flag}: {part!r} is not a number") from None
    return out


def _inject_echo(out_dir: str, subcommand: str, resolved: dict) -> None:
    """Add the resolved manifest and its hash to the run's summary.json."""
    path = os.path.join(out_dir, "summary.json")
    with open(path) as f:
        doc = json.load(f)
    doc["subcommand"] = subcommand
    doc["cli_config"] = resolved
    doc["cli_config_sha256"] = config_sha(resolved)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)


def _run_manifest(subcommand: str, resolved: dict, threads: int) -> int:
    cfg = build_run_config(resolved, threads=threads)
    if cfg.out_dir is None:
        raise ConfigError(
            "an output directory is required (set [run] out or pass --out)"
        )
    summary = run(cfg)
    _inject_echo(cfg.out_dir, subcommand, resolved)
    s, d = summary.terminals.shape
    print(f"wrote {s} samples (dim {d}) to {cfg.out_dir}")
    if summary.z_estimate is not None:
        print(f"Z estimate: {summary.z_estimate:.6g} +- {summary.z_stderr:.3g}")
    if math.isfinite(summary.min_ess):
        print(f"min ESS: {summary.min_ess:.3g}")
    print(f"config sha256: {config_sha(resolved)}")
    return 0


def _cmd_sample_energy(args) -> int:
    raw = load_config_file(args.config)
    overrides = {
        ("potential", "beta"): args.beta,
        ("run", "steps"): args.steps,
        ("run", "n_is"): args.n_is,
        ("run", "samples"): args.samples,
        ("run", "seed"): args.seed,
        ("run", "out"): args.out,
        ("run", "control"): args.control,
    }
    resolved = resolve(raw, overrides)
    return _run_manifest("sample-energy", resolved, _threads(args.threads))


def _cmd_sample_empirical(args) -> int:
    if not os.path.exists(args.data):
        raise ConfigError(f"dataset file not found: {args.data}")
    raw = {
        "target": {"kind": "dataset", "data": args.data},
        "potential": {"beta": args.beta},
        "run": {
            "samples": str(args.samples),
            "steps": str(args.steps),
            "seed": str(args.seed),
            "out": args.out,
        },
    }
    if args.record_weighted:
        # record every trajectory so overlap diagnostics can be computed
        raw["run"]["record"] = str(args.samples)
        raw["run"]["record_weighted"] = "true"
    resolved = resolve(raw)
    return _run_manifest("sample-empirical", resolved, _threads(args.threads))


def _cmd_estimate_z(args) -> int:
    raw = load_config_file(args.config)
    resolved = resolve(raw)
    cfg = build_run_config(resolved, threads=_threads(args.threads))
    cfg = dataclasses.replace(cfg, out_dir=None, n_record=0)
    steps = _int_list(args.steps_list, "--steps-list")
    samples = _int_list(args.samples_list, "--samples-list")
    rows = estimate_z_convergence(cfg, steps, samples, args.repeats)
    lines = ["sweep,setting,repeat,z"]
    for r in rows:
        lines.append(f"{r['sweep']},{r['setting']},{r['repeat']},{r['z']:.17g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "zsweep.csv")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
        print(f"wrote {len(rows)} rows to {path}")
    else:
        print("\n".join(lines))
    for sweep in ("steps", "samples"):
        settings = sorted({r["setting"] for r in rows if r["sweep"] == sweep})
        for s in settings:
            zs = np.array([r["z"] for r in rows if r["sweep"] == sweep and r["setting"] == s])
            q1, q3 = np.percentile(zs, [25, 75])
            print(
                f"{sweep}={s}: median Z {np.median(zs):.6g}, IQR {q3 - q1:.3g}",
                file=sys.stderr,
            )
    return 0


def _load_run_dir(run_dir: str):
    """(summary doc, terminal array) from a sampled output dir."""
    path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(path):
        raise ConfigError(f"no summary.json in {run_dir}")
    with open(path) as f:
        doc = json.load(f)
    if doc.get("status") != "complete":
        raise ConfigError(f"run in {run_dir} has status {doc.get('status')!r}")
    target = load_dataset(os.path.join(run_dir, doc["terminals"]))
    return doc, target.samples


def _load_trajectories(run_dir: str, doc: dict, terminals: np.ndarray):
    names = doc.get("trajectories") or []
    d = terminals.shape[1]
    trajs = []
    for name in names:
        idx = int(name.rsplit("_", 1)[1].split(".")[0])
        data = np.loadtxt(os.path.join(run_dir, name), delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2 * d + 2:
            raise FormatError(
                f"{name}: expected {2 * d + 2} columns for dim {d}, got {data.shape[1]}"
            )
        trajs.append(
            Trajectory(
                times=data[:, 0],
                states=data[:, 1 : d + 1],
                weighted_states=data[:, d + 1 : 2 * d + 1],
                terminal=terminals[idx],
                ess_series=data[:, -1],
                max_weight_series=np.ones(data.shape[0]),
                log_girsanov=0.0,
                potential_integral=0.0,
                terminal_weighted=None,
            )
        )
    return trajs


def _mixture_from_doc(doc):
    """Rebuild the mixture a run sampled, when the echo identifies one."""
    cli = doc.get("cli_config") or {}
    tgt = cli.get("target") or {}
    if tgt.get("energy") == "gaussian-mixture":
        from .targets import grid_mixture

        return grid_mixture(
            side=int(tgt["side"]),
            spacing=float(tgt["spacing"]),
            sigma2=float(tgt["sigma2"]),
        )
    desc = (doc.get("config") or {}).get("target") or {}
    if desc.get("class") == "GaussianMixtureEnergy":
        return GaussianMixtureEnergy(
            centers=np.asarray(desc["centers"]),
            sigma2=float(desc["sigma2"]),
            weights=np.asarray(desc["weights"]),
        )
    return None


def _cmd_diagnose(args) -> int:
    doc, terminals = _load_run_dir(args.run)
    trajs = _load_trajectories(args.run, doc, terminals)
    mixture = _mixture_from_doc(doc)
    if not trajs and mixture is None:
        raise ConfigError(
            f"run in {args.run} recorded no trajectories and has no mode "
            "structure to report; rerun with record > 0"
        )
    out_dir = args.out or args.run
    os.makedirs(out_dir, exist_ok=True)
    if trajs:
        series = autocorrelation(trajs)
        boot = None
        if args.bootstrap > 0 and series.n_trajectories >= 2:
            boot = bootstrap_transition_gap(
                series, threshold=args.threshold, n_resamples=args.bootstrap
            )
        write_autocorr_csv(os.path.join(out_dir, "autocorr.csv"), series)
        write_transition_json(
            os.path.join(out_dir, "transition.json"),
            series,
            threshold=args.threshold,
            bootstrap=boot,
        )
        t_w = transition_time(series, args.threshold)
        print(f"trajectories: {series.n_trajectories}")
        print(f"weighted-state transition: {t_w:.6g}")
        if boot is not None:
            print(f"state transition: {t_w + boot['gap']:.6g} (gap {boot['gap']:.6g})")
    if mixture is not None:
        hist = mode_assignment(terminals, mixture)
        write_modes_csv(os.path.join(out_dir, "modes.csv"), hist)
        print(f"mode chi-square: {hist.chi2:.4g} over {hist.counts.size} modes")
    print(f"wrote diagnostics to {out_dir}")
    return 0


def _cmd_oracle_check(args) -> int:
    energy = DoubleWellEnergy(1, stiffness=args.stiffness)
    params = ScalarBeta(args.beta, 1)
    ts = _float_list(args.t_list, "--t-list")
    xs = _float_list(args.x_list, "--x-list")
    if not ts or not xs:
        raise ConfigError("--t-list and --x-list must be nonempty")
    cfg = UhisConfig(n_is=args.n_is, rng_stream=np.random.default_rng(args.seed))
    rows = []
    worst_rel = 0.0
    worst_abs = 0.0
    for t in ts:
        for x in xs:
            xv = np.array([x])
            u_q = float(quadrature_control(params, t, xv, energy)[0])
            u_is = float(uhis_control(params, cfg, t, xv, energy).drift[0])
            err = abs(u_is - u_q)
            if abs(u_q) >= 0.05:
                rel = err / abs(u_q)
                worst_rel = max(worst_rel, rel)
            else:
                rel = math.nan
                worst_abs = max(worst_abs, err)
            rows.append((t, x, u_is, u_q, err, rel))
    header = "t,x,u_is,u_quadrature,abs_err,rel_err"
    lines = [header]
    for t, x, u_is, u_q, err, rel in rows:
        lines.append(
            f"{t:g},{x:g},{u_is:.10g},{u_q:.10g},{err:.3g},"
            + (f"{rel:.3g}" if math.isfinite(rel) else "nan")
        )
    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
        print(f"wrote {len(rows)} comparisons to {args.out}")
    else:
        print(text)
    print(f"max relative control error: {worst_rel:.4g}")
    print(f"max absolute error on small controls: {worst_abs:.4g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hpid",
        description="Sample target distributions by controlled diffusion.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    pe = sub.add_parser("sample-energy", help="sample a built-in energy target")
    pe.add_argument("--config", required=True, help="manifest file (or echoed summary.json)")
    pe.add_argument("--beta", help="override [potential] beta (scalar or comma list)")
    pe.add_argument("--steps", type=int, help="override [run] steps")
    pe.add_argument("--n-is", dest="n_is", type=int, help="override [run] n_is")
    pe.add_argument("--samples", type=int, help="override [run] samples")
    pe.add_argument("--seed", type=int, help="override [run] seed")
    pe.add_argument("--out", help="override [run] out")
    pe.add_argument(
        "--control", choices=["uhis", "legendre", "oracle"], help="override [run] control"
    )
    pe.add_argument("--threads", type=int, help="worker threads")
    pe.set_defaults(fn=_cmd_sample_energy)

    pd = sub.add_parser("sample-empirical", help="sample toward dataset rows")
    pd.add_argument("--data", required=True, help="dataset file (.csv or binary)")
    pd.add_argument("--beta", required=True, help="confinement (scalar or comma list)")
    pd.add_argument("--steps", required=True, type=int)
    pd.add_argument("--samples", required=True, type=int)
    pd.add_argument("--seed", required=True, type=int)
    pd.add_argument("--out", required=True)
    pd.add_argument(
        "--record-weighted",
        action="store_true",
        help="record every trajectory's state and weighted state",
    )
    pd.add_argument("--threads", type=int, help="worker threads")
    pd.set_defaults(fn=_cmd_sample_empirical)

    pz = sub.add_parser("estimate-z", help="partition-function sweeps")
    pz.add_argument("--config", required=True)
    pz.add_argument("--steps-list", default="25,50,100,200", help="comma list of K values")
    pz.add_argument("--samples-list", default="", help="comma list of S values")
    pz.add_argument("--repeats", type=int, default=8)
    pz.add_argument("--out", help="directory for zsweep.csv (default: print)")
    pz.add_argument("--threads", type=int, help="worker threads")
    pz.set_defaults(fn=_cmd_estimate_z)

    pg = sub.add_parser("diagnose", help="overlap curves for a recorded run")
    pg.add_argument("--run", required=True, help="output directory of a sample run")
    pg.add_argument("--threshold", type=float, default=0.5)
    pg.add_argument("--out", help="where to write diagnostics (default: run dir)")
    pg.add_argument("--bootstrap", type=int, default=1000, help="0 disables")
    pg.set_defaults(fn=_cmd_diagnose)

    po = sub.add_parser("oracle-check", help="control estimator vs quadrature")
    po.add_argument("--beta", type=float, default=0.5)
    po.add_argument("--stiffness", type=float, default=1.0)
    po.add_argument("--n-is", dest="n_is", type=int, default=100000)
    po.add_argument("--seed", type=int, default=0)
    po.add_argument("--t-list", default="0.05,0.25,0.45,0.65,0.85")
    po.add_argument("--x-list", default="-1.5,-0.5,0.5,1.5")
    po.add_argument("--out", help="CSV path (default: print)")
    po.set_defaults(fn=_cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FormatError, InputError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IntegrationError, AccuracyError, DegenerateProbeGaussianError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
