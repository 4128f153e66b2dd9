"""``qcoord`` command line: data generation, training, estimation, benchmarks, coordination.

Every command writes into ``<out>/<command>/``: delimited result tables with a
leading ``#`` metadata block, PNG figures, the resolved configuration
(``config.json``) and ``manifest.csv`` with SHA-256 digests of every file.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

OUT_ENV = "QCOORD_OUT"
EC_LABELS = {"residential": "R", "commercial": "C", "industrial": "I"}
ARCHS = ("qtcn_lstm", "mlp", "tcn", "lstm", "tcn_lstm")

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "network": None,
    "gen_data": {"n_samples": 1024, "ec_types": ["residential", "commercial", "industrial"]},
    "train": {"dataset": None, "arch": "qtcn_lstm", "epochs": 10, "batch_size": 32, "learning_rate": 0.01,
              "noise_level": 0.0, "train_fraction": 0.8, "resume": None},
    "estimate": {"estimator": "qae2", "qubits": 7, "samples": 100000, "shots_per_power": None,
                 "grover_powers": [0, 1, 2, 4, 8]},
    "benchmark": {"mc_samples": [100, 1000, 10000, 100000, 1000000], "qubits": [5, 6, 7, 8, 9, 10],
                  "circuits": [1, 2]},
    "coordinate": {"models": None, "scenarios": 100, "scenario_seed": 1, "max_iter": 25, "eta": 0.05,
                   "alpha": 0.95, "lam": 1.0, "estimator": "mc", "qubits": 7, "samples": None},
    "runtime": {"depths": [0, 1, 10, 100, 1000, 10000], "qubits": [5, 6, 7], "grover_powers": [0, 1, 2, 4, 8]},
}


class CliError(RuntimeError):
    """User-facing failure; exit status 1."""


# --- configuration --------------------------------------------------------------------

def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file {path} does not exist")
        cfg = deep_merge(cfg, json.loads(path.read_text()))
    for key in ("seed", "workers", "network"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    section = args.command.replace("-", "_")
    sec = cfg[section]
    flag_map = {"noise": "noise_level", "estimator": "estimator", "qubits": "qubits", "samples": "samples",
                "dataset": "dataset", "arch": "arch", "epochs": "epochs", "resume": "resume", "models": "models",
                "rows": "n_samples", "max_iter": "max_iter"}
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None and key in sec:
            sec[key] = val
    if section == "estimate" and isinstance(sec["qubits"], list):
        sec["qubits"] = sec["qubits"][0]
    if section == "runtime" and args.qubits is not None:
        sec["qubits"] = [args.qubits]
    if section == "benchmark" and args.qubits is not None:
        sec["qubits"] = [args.qubits]
    return cfg


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "source"


# --- delimited files ------------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_table(path: Path, columns: Sequence[str], rows: Iterable[dict | Sequence], meta: dict) -> Path:
    """Comment block ``# key=value``, header, then comma-separated rows (floats via ``repr``)."""
    lines = [f"# {k}={fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for r in rows:
        vals = [r.get(c) for c in columns] if isinstance(r, dict) else list(r)
        lines.append(",".join(fmt(v) for v in vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path: str | Path) -> tuple[dict, list[dict]]:
    """Inverse of :func:`write_table`; numeric cells come back as ``float``."""
    meta, rows, header = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif header is None:
            header = line.split(",")
        elif line:
            row = {}
            for k, v in zip(header, line.split(",")):
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
            rows.append(row)
    return meta, rows


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, command: str, cfg: dict):
        self.dir = out / command
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create output directory {self.dir}: {exc}") from exc
        if not os.access(self.dir, os.W_OK):
            raise CliError(f"output directory {self.dir} is not writable")
        self.cfg = cfg
        self.meta = {"command": command, "seed": cfg["seed"], "version": package_version(),
                     "numpy": np.__version__, "config_digest": config_digest(cfg)}
        self.files: list[tuple[Path, dict]] = []
        (self.dir / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
        self.files.append((self.dir / "config.json", {}))

    def table(self, name: str, columns, rows, wall_clock: bool = False, **extra) -> Path:
        path = write_table(self.dir / name, columns, rows, {**self.meta, **extra})
        self.files.append((path, {"wall_clock": True} if wall_clock else {}))
        return path

    def add(self, path: Path, **info) -> Path:
        self.files.append((Path(path), info))
        return Path(path)

    def finish(self, extra_cols: Sequence[str] = ()) -> Path:
        rows = []
        for p, info in self.files:
            # wall-clock tables change on every run; they are listed but not digested
            digest = "" if info.get("wall_clock") else sha256(p)
            rows.append({"file": p.name, "sha256": digest, **{k: v for k, v in info.items() if k != "wall_clock"}})
        cols = ["file", "sha256", *extra_cols]
        path = write_table(self.dir / "manifest.csv", cols, rows, self.meta)
        return path


def log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# --- gen-data -------------------------------------------------------------------------

def _gen_one(job):
    from .coordination import default_ec, generate_training_data
    ec_type, n, seed = job
    return generate_training_data(default_ec(ec_type), n, seed=seed)


def cmd_gen_data(cfg: dict, run: Run) -> int:
    sec = cfg["gen_data"]
    types = list(sec["ec_types"])
    bad = [t for t in types if t not in EC_LABELS]
    if bad:
        raise CliError(f"unknown EC types {bad}")
    jobs = [(t, int(sec["n_samples"]), cfg["seed"] + k) for k, t in enumerate(types)]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            datasets = list(pool.map(_gen_one, jobs))
    else:
        datasets = [_gen_one(j) for j in jobs]
    for (t, n, seed), d in zip(jobs, datasets):
        path = run.dir / f"dataset_{t}.csv"
        d.save(path)
        run.add(path, ec_type=t, label=EC_LABELS[t], rows=len(d), seed=seed)
        log(f"wrote {path} ({len(d)} rows)")
    run.finish(("ec_type", "label", "rows", "seed"))
    return 0


# --- train ----------------------------------------------------------------------------

def _save_baseline(path: Path, arch: str, net, scaling, meta: dict) -> None:
    doc = {"format_version": 1, "kind": "baseline", "arch": arch, "scaling": vars(scaling), "meta": meta,
           "state": {k: v.detach().cpu().numpy().tolist() for k, v in net.state_dict().items()}}
    path.write_text(json.dumps(doc, indent=1))


def cmd_train(cfg: dict, run: Run) -> int:
    from . import plotting
    from .coordination import ResponseDataset
    from .qlearn import (QTcnLstmModel, TrainingConfig, count_parameters, evaluate_mse, fit_scaling, train,
                         train_baseline)
    sec = cfg["train"]
    if sec["arch"] not in ARCHS:
        raise CliError(f"unknown architecture {sec['arch']!r}; choose from {ARCHS}")
    ds_path = Path(sec["dataset"]) if sec["dataset"] else run.dir.parent / "gen-data" / "dataset_commercial.csv"
    if not ds_path.is_file():
        raise CliError(f"dataset {ds_path} not found (run gen-data first or pass --dataset)")
    data = ResponseDataset.load(ds_path)
    tr, te = data.split(sec["train_fraction"])
    tc = TrainingConfig(learning_rate=sec["learning_rate"], epochs=max(int(sec["epochs"]), 1),
                        batch_size=sec["batch_size"], noise_level=float(sec["noise_level"]), seed=cfg["seed"])
    ec = data.ec_type or "unknown"
    meta = {"ec_type": ec, "dataset_sha256": sha256(ds_path), "noise_level": tc.noise_level, "seed": cfg["seed"],
            "epochs": int(sec["epochs"]), "arch": sec["arch"]}

    if sec["resume"]:
        if sec["arch"] != "qtcn_lstm":
            raise CliError("--resume supports the quantum model only")
        model = QTcnLstmModel.load(sec["resume"])
        if model.horizon != data.horizon:
            raise CliError(f"model horizon {model.horizon} differs from dataset horizon {data.horizon}")
        if int(sec["epochs"]) == 0:
            mse = evaluate_mse(model, te, model.meta.get("noise_level", 0.0), model.meta.get("seed", 0))
            recorded = model.meta.get("final_test_mse")
            run.table(f"eval_{ec}.csv", ["recorded_test_mse", "reevaluated_test_mse", "abs_diff"],
                      [[recorded, mse, None if recorded is None else abs(mse - recorded)]])
            log(f"re-evaluated test MSE {mse!r} (recorded {recorded!r})")
            run.finish()
            return 0
    if sec["arch"] == "qtcn_lstm":
        model = model if sec["resume"] else QTcnLstmModel.default(data.horizon, cfg["seed"], fit_scaling(tr))
        trained, trace = train(model, tr, tc, te, init_time_bias=not sec["resume"],
                               log=lambda r: log(f"epoch {r[0]:3d} train {r[1]:.6f} test {r[2]:.6f}"))
        trained.meta = {**meta, "final_test_mse": float(trace[-1, 2]), "parameters": count_parameters(trained)}
        path = run.dir / f"model_{ec}.json"
        trained.save(path)
        n_params = count_parameters(trained)
    else:
        net, scaling, trace = train_baseline(sec["arch"], tr, tc, te)
        n_params = count_parameters(net)
        path = run.dir / f"model_{sec['arch']}_{ec}.json"
        _save_baseline(path, sec["arch"], net, scaling, {**meta, "final_test_mse": float(trace[-1, 2]),
                                                          "parameters": n_params})
    run.add(path)
    run.table(f"loss_{ec}.csv", ["epoch", "train_loss", "test_mse"],
              [[int(r[0]), r[1], r[2]] for r in trace], arch=sec["arch"], parameters=n_params,
              noise_level=tc.noise_level)
    run.add(plotting.loss_traces({sec["arch"]: trace}, run.dir / f"loss_{ec}.png"))
    run.finish()
    log(f"final test MSE {trace[-1, 2]:.6f} with {n_params} parameters -> {path}")
    return 0


# --- estimate -------------------------------------------------------------------------

def _estimator(kind: str, qubits: int, samples, cfg_sec: dict, seed: int):
    from .qae import MonteCarloEstimator, QaeConfig, QaeEstimator
    if kind == "mc":
        return MonteCarloEstimator(None if samples in (None, 0) else int(samples), seed)
    if kind in ("qae1", "qae2"):
        qc = QaeConfig(grover_powers=tuple(cfg_sec.get("grover_powers", (0, 1, 2, 4, 8))),
                       shots_per_power=cfg_sec.get("shots_per_power"), seed=seed)
        return QaeEstimator(int(kind[-1]), int(qubits), qc)
    raise CliError(f"unknown estimator {kind!r}")


def cmd_estimate(cfg: dict, run: Run, dump_circuit: bool = False) -> int:
    from .qae import BENCHMARK_COLUMNS, QaeEstimator, RectifiedVoltageTarget, build_oracle, estimate_expectation
    sec = cfg["estimate"]
    target = RectifiedVoltageTarget()
    est = _estimator(sec["estimator"], sec["qubits"], sec["samples"], sec, cfg["seed"])
    n = int(sec["qubits"]) if isinstance(est, QaeEstimator) else 16
    dist, f = target.distribution(n), target.function(n)
    if sec["estimator"] == "mc" and est.samples is None:
        raise CliError("mc estimate needs --samples")
    t0 = time.perf_counter()
    res = estimate_expectation(dist, f, est, truth=target.truth())
    res.sim_runtime_s = res.sim_runtime_s or time.perf_counter() - t0
    if dump_circuit and isinstance(est, QaeEstimator):
        oracle = build_oracle(dist, f, est.circuit)
        p = run.dir / f"circuit_{sec['estimator']}_n{n}.txt"
        p.write_text(oracle.circuit.to_text())
        run.add(p)
    run.table("estimate.csv", BENCHMARK_COLUMNS, [res.row()])
    run.finish()
    log(f"{res.method}/{res.variant}: estimate {res.value:.8f}, truth {res.truth:.8f}, "
        f"error {res.relative_error_pct:.4f}%")
    return 0


# --- benchmark ------------------------------------------------------------------------

def _bench_row(job):
    from .qae import QaeConfig, RectifiedVoltageTarget, benchmark_mc, benchmark_qae
    kind, setting, seed = job
    target = RectifiedVoltageTarget()
    try:
        if kind == "mc":
            res = benchmark_mc(target, [setting], seed=seed)[0]
        else:
            res = benchmark_qae(target, [setting], [kind], QaeConfig(shots_per_power=None, seed=seed))[0]
        return {**res.row(), "error": ""}
    except Exception as exc:  # recorded per row; the sweep continues
        return {"method": "mc" if kind == "mc" else "mlqae", "variant": f"circuit{kind}" if kind != "mc" else "sampling",
                "n_or_samples": setting,
                "error": f"{type(exc).__name__}: {exc}".replace(",", ";")}


def cmd_benchmark(cfg: dict, run: Run) -> int:
    from . import plotting
    from .qae import BENCHMARK_COLUMNS
    sec = cfg["benchmark"]
    jobs = [(int(c), int(n), cfg["seed"]) for n in sec["qubits"] for c in sec["circuits"]]
    jobs += [("mc", int(m), cfg["seed"] + k) for k, m in enumerate(sec["mc_samples"])]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as pool:
            rows = list(pool.map(_bench_row, jobs))
    else:
        rows = []
        for j in jobs:
            rows.append(_bench_row(j))
            r = rows[-1]
            log(f"{r['method']:6s} {r['variant']:9s} {r['n_or_samples']:>8} err% {r.get('rel_error_pct')} {r['error']}")
    # timing columns are wall-clock measurements and are kept out of the deterministic table
    det_cols = [c for c in BENCHMARK_COLUMNS if c != "sim_runtime_s"] + ["error"]
    run.table("benchmark.csv", det_cols, rows)
    run.table("benchmark_timing.csv", ["method", "variant", "n_or_samples", "sim_runtime_s"], rows, wall_clock=True)
    run.add(plotting.benchmark_errors(rows, run.dir / "benchmark.png"))
    run.finish()
    failed = sum(1 for r in rows if r["error"])
    return 3 if failed else 0


# --- coordinate -----------------------------------------------------------------------

def _load_surrogates(case, models_dir):
    from .coordination import GroundTruthSurrogate, default_ec
    from .qlearn import QTcnLstmModel
    surs, kinds = [], []
    for t in case.ec_types:
        path = Path(models_dir) / f"model_{t}.json" if models_dir else None
        if path is not None and path.is_file():
            surs.append(QTcnLstmModel.load(path))
            kinds.append(f"qtcn_lstm:{path.name}")
        elif models_dir:
            raise CliError(f"no surrogate model {path} for EC type {t}")
        else:
            surs.append(GroundTruthSurrogate(default_ec(t)))
            kinds.append("ground_truth")
    return surs, kinds


def _network(cfg: dict):
    from .grid import NetworkCase
    if cfg["network"]:
        p = Path(cfg["network"])
        if not p.is_file():
            raise CliError(f"network file {p} does not exist")
        return NetworkCase.load(p)
    return NetworkCase.default()


def cmd_coordinate(cfg: dict, run: Run) -> int:
    from . import plotting
    from .coordination import (LOG_COLUMNS, CoordinationConfig, DivergenceError, PriceBounds, default_ec,
                               ec_respond, flat_prices, mean_voltage_penalty, run_coordination)
    from .grid import CostConfig, generate_scenarios
    sec = cfg["coordinate"]
    case = _network(cfg)
    scenarios = generate_scenarios(case, int(sec["scenarios"]), seed=int(sec["scenario_seed"]))
    surs, kinds = _load_surrogates(case, sec["models"])
    est = _estimator(sec["estimator"], sec["qubits"], sec["samples"], {}, cfg["seed"])
    cost = CostConfig(alpha=sec["alpha"], lam=sec["lam"])
    config = CoordinationConfig(cost=cost, eta=sec["eta"], max_iter=int(sec["max_iter"]))
    try:
        res = run_coordination(case, scenarios, surs, config, est,
                               log_fn=lambda r: log(f"iter {r['iteration']:3d} obj {r['objective']:.4f} "
                                                    f"pen {r['mean_voltage_penalty']:.4f} |g| {r['grad_norm']:.3g}"))
    except DivergenceError as exc:
        log(f"coordination diverged: {exc}")
        return 2
    truths = [default_ec(t) for t in case.ec_types]
    T = scenarios.horizon
    bounds = PriceBounds()
    flat = flat_prices(bounds, T)
    opt = res.prices.values
    r_flat = np.array([ec_respond(tr, flat) for tr in truths])
    r_opt = np.array([ec_respond(tr, opt) for tr in truths])
    base_pen = mean_voltage_penalty(case, scenarios, r_flat, cost)
    opt_pen = mean_voltage_penalty(case, scenarios, r_opt, cost)
    lo, hi = bounds.arrays(T)
    run.table("prices.csv", ["t", "flat", "coordinated", "lower", "upper"],
              [[t, flat[t], opt[t], lo[t], hi[t]] for t in range(T)])
    cols = ["t"] + [f"{k}_{t}" for t in case.ec_types for k in ("flat", "coordinated", "surrogate")]
    rows = []
    for t in range(T):
        row = [t]
        for i in range(len(truths)):
            row += [r_flat[i, t], r_opt[i, t], res.exchange[i, t]]
        rows.append(row)
    run.table("responses.csv", cols, rows)
    run.table("iterations.csv", [c for c in LOG_COLUMNS if c != "wall_s"], res.log.rows)
    run.table("timing.csv", ["iteration", "wall_s"], res.log.rows, wall_clock=True)
    summary = [
        ["baseline_voltage_penalty", base_pen], ["optimized_voltage_penalty", opt_pen],
        ["penalty_reduction_pct", 100.0 * (1 - opt_pen / base_pen) if base_pen > 0 else 0.0],
        ["iterations", len(res.log) - 1], ["v_alpha", res.v_alpha], ["estimator", sec["estimator"]],
        ["surrogates", ";".join(kinds)], ["price_mean", float(opt.mean())],
    ]
    run.table("summary.csv", ["key", "value"], summary)
    pen_trace = res.log.column("mean_voltage_penalty")
    responses = {EC_LABELS[t]: (r_flat[i], r_opt[i]) for i, t in enumerate(case.ec_types)}
    run.add(plotting.coordination_report(flat, opt, responses, pen_trace, run.dir / "coordination.png"))
    run.finish()
    log(f"mean voltage penalty {base_pen:.4f} (flat) -> {opt_pen:.4f} (coordinated)")
    return 0


# --- runtime --------------------------------------------------------------------------

def cmd_runtime(cfg: dict, run: Run, dump_circuit: bool = False) -> int:
    from . import plotting
    from .qae import RectifiedVoltageTarget, amplified_depth, build_grover, build_oracle
    from .statevector import RuntimeModel, estimate_runtime
    sec = cfg["runtime"]
    model = RuntimeModel()
    depths = [int(d) for d in sec["depths"]]
    run.table("runtime_model.csv", ["depth", "runtime_us"], [[d, estimate_runtime(d, model) * 1e6] for d in depths],
              t_prep_plus_meas_s=model.t_prep_plus_meas, t_gate_s=model.t_gate)
    target = RectifiedVoltageTarget()
    rows = []
    for n in sec["qubits"]:
        for c in (1, 2):
            oracle = build_oracle(target.distribution(int(n)), target.function(int(n)), c)
            q = build_grover(oracle)
            if dump_circuit:
                p = run.dir / f"circuit_qae{c}_n{n}.txt"
                p.write_text(oracle.circuit.to_text())
                run.add(p)
            for k in sec["grover_powers"]:
                d = amplified_depth(oracle, int(k), q)
                rows.append({"variant": f"qae{c}", "n": int(n), "k": int(k), "qubits": oracle.circuit.n_qubits,
                             "depth": d, "runtime_us": estimate_runtime(d, model) * 1e6})
    run.table("runtime_circuits.csv", ["variant", "n", "k", "qubits", "depth", "runtime_us"], rows)
    run.add(plotting.runtime_curve(depths, [estimate_runtime(d, model) * 1e6 for d in depths],
                                   run.dir / "runtime.png"))
    run.finish()
    return 0


# --- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file overriding the defaults")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="process count for independent rows (results do not depend on it)")
    common.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./qcoord_out)")
    common.add_argument("--network", help="network case file (default: shipped 33-bus case)")
    common.add_argument("--dump-circuit", action="store_true", help="write oracle circuits as text")
    common.add_argument("--noise", type=float, help="depolarizing noise level for training")
    common.add_argument("--estimator", choices=("mc", "qae1", "qae2"))
    common.add_argument("--qubits", type=int)
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")

    p = argparse.ArgumentParser(prog="qcoord", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen-data", parents=[common], help="EC incentive-response datasets")
    g.add_argument("--rows", type=int, help="samples per EC type")
    t = sub.add_parser("train", parents=[common], help="train the quantum surrogate or a classical baseline")
    t.add_argument("--dataset")
    t.add_argument("--arch", choices=ARCHS)
    t.add_argument("--epochs", type=int)
    t.add_argument("--resume", help="saved quantum model to continue from (with --epochs 0: re-evaluate only)")
    sub.add_parser("estimate", parents=[common], help="one expectation estimate on the benchmark target")
    sub.add_parser("benchmark", parents=[common], help="MC vs QAE error and runtime table")
    c = sub.add_parser("coordinate", parents=[common], help="CVaR price coordination on the network case")
    c.add_argument("--models", help="directory holding model_<ec_type>.json surrogates")
    c.add_argument("--max-iter", type=int, dest="max_iter")
    sub.add_parser("runtime", parents=[common], help="estimated quantum runtimes from circuit depth")
    return p


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "estimate": cmd_estimate, "benchmark": cmd_benchmark,
            "coordinate": cmd_coordinate, "runtime": cmd_runtime}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg["workers"] is None or cfg["workers"] < 1:
            cfg["workers"] = os.cpu_count() or 1
        out = Path(args.out or os.environ.get(OUT_ENV) or "qcoord_out")
        run = Run(out, args.command, cfg)
        fn = COMMANDS[args.command]
        if args.command in ("estimate", "runtime"):
            return fn(cfg, run, args.dump_circuit)
        return fn(cfg, run)
    except CliError as exc:
        log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
