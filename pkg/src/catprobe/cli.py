"""Command-line experiment runner.

    catprobe run fluctuating-field --delta 1 --gamma 1 --dt 0.01 --trajectories 10000 --seed 42
    catprobe run finite-bath --alpha 0.5 --n-modes 2 --n-max 1 --t-grid 0:10:41
    catprobe run counterexample --overlap 0 --nu 0.7071
    catprobe run synthetic --kind delocalized --n 1000
    catprobe validate experiment.cfg

``run`` may be omitted (``catprobe synthetic ...``).  Every run writes its
outputs into ``--out`` (default ``catprobe_out``) atomically and writes
``manifest.json`` last.  Exit codes: 0 success, 2 invalid configuration,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bath import (
    OhmicBathSpec,
    build_hamiltonian,
    gibbs_ensemble_states,
    occupational_asymmetry,
    populations_and_density,
    prepare_superposed,
    thermal_correlator,
)
from .config import EXPERIMENTS, SCHEMA, ConfigError, build_config, read_config_file, resolve_threads
from .ensemble import (
    MomentAccumulator,
    WeightedEnsemble,
    averaged_density_matrix,
    lift_to_states,
    localization_correlator,
    synthetic_scenario,
)
from .errors import CatprobeError, ConfigurationError, NumericalError
from .field import FieldEnsemble, NoiseProcess, default_dt, default_t_max, run_to_stationarity
from .qstate import CompositeState, TwoLevelState, reduced_density, tensor_embed

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

MOMENTS_JSON = "moments.json"
HISTOGRAM_CSV = "histogram.csv"
RHO_CSV = "rho_t.csv"
CORRELATOR_CSV = "correlator.csv"
COUNTEREXAMPLE_JSON = "counterexample.json"
MANIFEST_JSON = "manifest.json"

HISTOGRAM_HEADER = ("bin_left", "bin_right", "density")
RHO_HEADER = ("t", "rho_LL", "re_rho_LR", "im_rho_LR")
CORRELATOR_HEADER = ("t", "correlator", "n_eff")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["%.17g" % v for v in row])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> str:
    """Write via temp file + rename; returns the sha256 of the content."""
    data = text.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def _moments_block(acc: MomentAccumulator, time_value):
    rep = acc.report(time=time_value)
    doc = rep.to_dict()
    for m in doc["moments"]:
        m["stderr"] = _finite_or_none(m["stderr"])
    doc["ks_critical_1pct"] = _finite_or_none(doc["ks_critical_1pct"])
    return doc, rep


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=complex))):
            raise NumericalError("non-finite values in results")


def run_fluctuating_field(cfg, threads):
    dt = cfg.dt if cfg.dt is not None else default_dt(cfg.delta, cfg.gamma)
    stride = cfg.record_stride if cfg.record_stride is not None else max(1, round(0.5 / dt))
    proc = NoiseProcess(cfg.gamma, dt, cfg.seed)
    psi0 = TwoLevelState.left() if cfg.initial == "left" else TwoLevelState.symmetric()
    ens = FieldEnsemble(cfg.delta, proc, psi0, cfg.n_trajectories, record_stride=stride, threads=threads)
    stationarity = {"searched": cfg.n_steps is None}
    if cfg.n_steps is not None:
        ens.advance(cfg.n_steps)
        t_report = ens.time
        stationarity.update(reached=None, time=None, t_max=None)
    else:
        t_max = cfg.t_max if cfg.t_max is not None else default_t_max(cfg.delta, cfg.gamma)
        res = run_to_stationarity(ens, t_max, k_max=max(cfg.k_max, 1))
        t_report = res.time
        stationarity.update(reached=bool(res.reached), time=res.time, t_max=t_max,
                            drift=[float(x) for x in res.drift],
                            tolerance=[float(x) for x in res.tolerance])
    p_all = ens.p_records()
    times = ens.times
    p_final = p_all[-1]
    _check_finite(p_all)
    acc = MomentAccumulator(k_max=cfg.k_max).add(p_final)
    moments, rep = _moments_block(acc, float(times[-1]))
    wens = WeightedEnsemble.from_samples(p_final)
    c_final = localization_correlator(wens)
    c_err = float(np.std(p_final * (1 - p_final), ddof=1) / math.sqrt(p_final.size))
    rho_LL, rho_LR = ens.mean_density()
    _check_finite(rho_LL, rho_LR)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "fluctuating-field",
        "parameters": {"delta": cfg.delta, "gamma": cfg.gamma, "dt": dt, "record_stride": stride,
                       "n_trajectories": cfg.n_trajectories, "seed": cfg.seed, "initial": cfg.initial},
        "stationarity": stationarity,
        "report": moments,
        "correlator": {"value": c_final, "stderr": c_err, "exact_uniform": 1.0 / 6.0},
        "max_norm_deviation": float(ens.max_norm_deviation().max()),
    }
    corr_rows = ((t, math.fsum(p * (1 - p)) / p.size, p.size) for t, p in zip(times, p_all))
    files = {
        MOMENTS_JSON: _json_text(doc),
        HISTOGRAM_CSV: _csv_text(HISTOGRAM_HEADER, rep.histogram_rows()),
        RHO_CSV: _csv_text(RHO_HEADER, zip(times, rho_LL, rho_LR.real, rho_LR.imag)),
        CORRELATOR_CSV: _csv_text(CORRELATOR_HEADER, corr_rows),
    }
    return files, t_report


def run_finite_bath(cfg, threads):
    spec = OhmicBathSpec(alpha=cfg.alpha, omega_c=cfg.omega_c, n_modes=cfg.n_modes,
                         fock_cutoff=cfg.n_max, beta=cfg.beta, dim_cap=cfg.dim_cap)
    system = build_hamiltonian(spec, cfg.delta, cfg.epsilon)
    gibbs = gibbs_ensemble_states(spec)
    times = cfg.times()
    n_eff = 1.0 / float(np.sum(gibbs.weights ** 2))
    corr_rows, rho_rows = [], []
    wens = None
    for t in times:
        value, wens = thermal_correlator(system, gibbs, float(t))
        rho_LL, rho_LR = populations_and_density(system, gibbs, float(t))
        corr_rows.append((t, value, n_eff))
        rho_rows.append((t, rho_LL, rho_LR.real, rho_LR.imag))
    _check_finite([r[1] for r in corr_rows], [r[1:] for r in rho_rows])
    acc = MomentAccumulator(k_max=cfg.k_max).add(wens.p, wens.weights)
    moments, rep = _moments_block(acc, float(times[-1]))

    t_max = cfg.t_max if cfg.t_max is not None else float(times[-1])
    if t_max <= 0:
        raise ConfigError("must be > 0 (t_grid ends at 0)", field="t_max")
    window = (0.8 * t_max, t_max)
    polarized = [
        occupational_asymmetry(system, tensor_embed(TwoLevelState.left(), gibbs.env_state(n)),
                               window, cfg.asym_samples)
        for n in range(len(gibbs))
    ]
    prepared = None
    if cfg.epsilon == 0:
        t_p = cfg.t_p if cfg.t_p is not None else (math.pi / (2 * cfg.delta) if cfg.delta > 0 else 0.0)
        vacuum = np.zeros(system.dim_env)
        vacuum[0] = 1.0
        prep = prepare_superposed(system, vacuum, t_p)
        overlap = prep.env_overlap()
        prepared = {
            "t_p": t_p,
            "nu_L": prep.nu_L,
            "nu_R": prep.nu_R,
            "env_overlap_abs": abs(overlap),
            "occupational_asymmetry": occupational_asymmetry(system, prep.state, window, cfg.asym_samples),
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "finite-bath",
        "parameters": {"delta": cfg.delta, "epsilon": cfg.epsilon, "alpha": cfg.alpha,
                       "omega_c": cfg.omega_c, "n_modes": cfg.n_modes, "n_max": cfg.n_max,
                       "beta": cfg.beta, "dimension": spec.dimension},
        "gibbs": {"n_states": len(gibbs), "retained_weight": gibbs.retained_weight, "n_eff": n_eff},
        "report": moments,
        "correlator": {"value": corr_rows[-1][1], "time": float(times[-1])},
        "asymmetry": {
            "window": list(window),
            "n_samples": cfg.asym_samples,
            "thermal_polarized": float(math.fsum(w * a for w, a in zip(gibbs.weights, polarized))),
            "prepared": prepared,
        },
    }
    files = {
        MOMENTS_JSON: _json_text(doc),
        HISTOGRAM_CSV: _csv_text(HISTOGRAM_HEADER, rep.histogram_rows()),
        RHO_CSV: _csv_text(RHO_HEADER, rho_rows),
        CORRELATOR_CSV: _csv_text(CORRELATOR_HEADER, corr_rows),
    }
    return files, float(times[-1])


def run_counterexample(cfg, threads):
    nu_L = cfg.nu
    nu_R = math.sqrt(max(0.0, 1.0 - nu_L * nu_L))
    phi_L = np.array([1.0, 0.0])
    phi_R = np.array([cfg.overlap, math.sqrt(1.0 - cfg.overlap ** 2)])
    psi = CompositeState(2, np.concatenate([nu_L * phi_L, nu_R * phi_R]))
    rho = reduced_density(psi)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "counterexample",
        "nu_L": nu_L,
        "nu_R": nu_R,
        "overlap": cfg.overlap,
        "rho_LL": rho.rho_LL,
        "rho_RR": rho.rho_RR,
        "rho_LR_re": rho.rho_LR.real,
        "rho_LR_im": rho.rho_LR.imag,
        "rho_LR_abs": abs(rho.rho_LR),
        "p_left_per_state": psi.p_left,
        "purity": rho.purity(),
    }
    return {COUNTEREXAMPLE_JSON: _json_text(doc)}, None


def run_synthetic(cfg, threads):
    ens = synthetic_scenario(cfg.kind, cfg.n, cfg.seed)
    acc = MomentAccumulator(k_max=cfg.k_max).add(ens.p, ens.weights)
    moments, rep = _moments_block(acc, None)
    rho = averaged_density_matrix(lift_to_states(ens))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "synthetic",
        "kind": cfg.kind,
        "n": cfg.n,
        "seed": cfg.seed,
        "mean": ens.mean(),
        "correlator": localization_correlator(ens),
        "rho_LL": rho.rho_LL,
        "rho_LR_abs": abs(rho.rho_LR),
        "report": moments,
    }
    return {MOMENTS_JSON: _json_text(doc),
            HISTOGRAM_CSV: _csv_text(HISTOGRAM_HEADER, rep.histogram_rows())}, None


RUNNERS = {
    "fluctuating-field": run_fluctuating_field,
    "finite-bath": run_finite_bath,
    "counterexample": run_counterexample,
    "synthetic": run_synthetic,
}


def execute(cfg, out_dir: str, threads: int) -> dict:
    """Run one experiment, write its outputs and the manifest; return the manifest."""
    started = time.perf_counter()
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    files, t_report = RUNNERS[cfg.experiment](cfg, threads)
    os.makedirs(out_dir, exist_ok=True)
    checksums = {name: _atomic_write(os.path.join(out_dir, name), text)
                 for name, text in sorted(files.items())}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "threads": threads,
        "started_utc": stamp,
        "wall_clock_seconds": time.perf_counter() - started,
        "report_time": t_report,
        "outputs": checksums,
    }
    _atomic_write(os.path.join(out_dir, MANIFEST_JSON), _json_text(manifest))
    return manifest


FLAG_HELP = {
    "delta": "tunneling amplitude", "epsilon": "static bias (finite-bath)",
    "gamma": "white-noise strength", "alpha": "ohmic coupling", "omega_c": "bath cutoff",
    "n_modes": "number of bath modes", "n_max": "Fock cutoff per mode", "beta": "inverse temperature",
    "dim_cap": "maximum Hilbert dimension", "initial": "left | symmetric",
    "dt": "time step", "n_steps": "fixed number of steps (skips stationarity search)",
    "record_stride": "steps between recorded samples", "n_trajectories": "number of noise realizations",
    "k_max": "highest moment", "t_grid": "start:stop:num or comma list of times",
    "t_max": "stationarity cap / asymmetry window end", "t_p": "preparation time",
    "asym_samples": "samples in the asymmetry window", "seed": "master seed",
    "kind": "collapsed | delocalized | uniform", "n": "synthetic ensemble size",
    "overlap": "<Phi_L|Phi_R> for the counterexample", "nu": "nu_L for the counterexample",
}
FLAG_NAMES = {"n_trajectories": ["--trajectories", "--n-trajectories"], "k_max": ["--kmax", "--k-max"]}


def _add_common(p: argparse.ArgumentParser, with_config_option: bool = True):
    if with_config_option:
        p.add_argument("--config", "-c", help="flat key = value config file; flags override it")
    for key in SCHEMA:
        if key == "experiment":
            continue
        names = FLAG_NAMES.get(key, ["--" + key.replace("_", "-")])
        p.add_argument(*names, dest=key, default=None, metavar="X", help=FLAG_HELP.get(key))
    p.add_argument("--out", "-o", default="catprobe_out", help="output directory")
    p.add_argument("--threads", default=None, help="worker threads (default $CATPROBE_THREADS or CPU count)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catprobe", description="Wave-function correlator experiments.")
    parser.add_argument("--version", action="version", version=f"catprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment")
    run_sub = run.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        _add_common(run_sub.add_parser(name))
        _add_common(sub.add_parser(name, help=f"alias for 'run {name}'"))
    val = sub.add_parser("validate", help="parse and range-check a config without running")
    val.add_argument("config_path")
    _add_common(val, with_config_option=False)
    return parser


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in SCHEMA if k != "experiment" and getattr(args, k, None) is not None}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = build_config(read_config_file(args.config_path), _overrides(args), source=args.config_path)
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        experiment = args.experiment if args.command == "run" else args.command
        file_values = read_config_file(args.config) if args.config else {}
        if "experiment" in file_values and file_values["experiment"][0] != experiment:
            raise ConfigError(f"config is for {file_values['experiment'][0]!r}, not {experiment!r}",
                              field="experiment", source=args.config, line=file_values["experiment"][1])
        overrides = dict(_overrides(args), experiment=experiment)
        cfg = build_config(file_values, overrides, source=args.config)
        threads = resolve_threads(args.threads)
        manifest = execute(cfg, args.out, threads)
        if cfg.experiment == "counterexample":
            with open(os.path.join(args.out, COUNTEREXAMPLE_JSON), encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
        else:
            sys.stdout.write(f"wrote {', '.join(sorted(manifest['outputs']))} and {MANIFEST_JSON} to {args.out}\n")
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"catprobe: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"catprobe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"catprobe: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except CatprobeError as exc:
        print(f"catprobe: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
