"""Command-line front end.

Subcommands follow the workflow: ``simulate`` -> ``fit`` -> ``predict`` /
``validate`` -> ``modes`` -> ``design`` -> ``uq``. Every run writes its
outputs, ``<command>_config.json`` (effective configuration) and
``<command>_summary.json`` into ``--out-dir``.

Exit codes: 0 success, 1 validation error, 2 numeric failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import oracles
from .design import (
    Constraint,
    DesignError,
    DesignProblem,
    LossSpec,
    energy_dissipation,
    parameter_value,
    resonant_frequencies,
    signal_power,
    solve_design,
    target_frequency,
)
from .fit import FitConfig, RankError, fit_model, load_model, save_model
from .modal import classify_modes, modal_decomposition, mode_amplitudes
from .observables import ObservableConfig
from .predict import SymmetryError, initial_observables, reconstruct_trajectory, relative_error
from .snapshots import (
    ScalingFactors,
    SnapshotError,
    SnapshotRecord,
    SnapshotSet,
    load_snapshot_set,
    read_matrix,
    save_snapshot_set,
    write_matrix,
)
from .uq import BagConfig, bagged_ensemble, ensemble_statistics

log = logging.getLogger("iddmd")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64

# per-system defaults for `simulate`
SYSTEM_DEFAULTS = {
    "building": {"values": [100.0, 800.0, 3000.0, 5000.0], "horizon": 150.0, "dt": 1 / 64},
    "building-linear": {"values": [1e9, 2e9, 3e9, 3.5e9], "horizon": 8000.0, "dt": 1 / 80},
    "vdp": {
        "values": [
            (0.8, 0.8), (0.8, 1.0), (0.8, 1.2), (0.9, 0.9), (0.9, 1.1), (1.0, 0.8), (1.0, 1.0),
            (1.0, 1.2), (1.1, 0.9), (1.1, 1.1), (1.2, 0.8), (1.2, 1.0), (1.2, 1.2),
        ],
        "horizon": 200.0,
        "dt": 1 / 32,
        "t_start": 30.0,
    },
    "cubic": {"values": [1.0, 10.0, 20.0], "horizon": 200.0, "dt": 1 / 32},
    "burgers": {"values": [0.014, 0.022, 0.030, 0.038, 0.046], "horizon": 1.0, "dt": 0.01},
    "randlin": {"values": None, "horizon": None, "dt": 1.0},
}

NUMERIC_ERRORS = (RankError, SymmetryError, oracles.InstabilityError, np.linalg.LinAlgError, FloatingPointError)
INVALID_ERRORS = (SnapshotError, DesignError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class OutputCollision(Exception):
    pass


# -- helpers -------------------------------------------------------------------------


def _floats(text) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    return [float(t) for t in str(text).replace(";", ",").split(",") if t.strip()]


def _grid(text) -> list[list[float]]:
    """``lo:hi:n`` (per parameter, joined by ``;``) or explicit ``a,b,c`` values."""
    if isinstance(text, list):
        return [list(np.atleast_1d(v).astype(float)) for v in text]
    parts = [p for p in str(text).split(";") if p.strip()]
    axes = []
    for p in parts:
        if ":" in p:
            lo, hi, n = p.split(":")
            axes.append(np.linspace(float(lo), float(hi), int(n)))
        else:
            axes.append(np.array(_floats(p)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).tolist()


class Run:
    """Tracks inputs/outputs of one invocation and writes the audit files."""

    def __init__(self, args):
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.inputs: set[Path] = set()
        self.outputs: list[str] = []
        self.summary: dict = {}
        # fail before doing any work if the audit files would collide
        if not args.force:
            for name in (f"{args.command}_config.json", f"{args.command}_summary.json"):
                if (self.out_dir / name).exists():
                    raise OutputCollision(f"output {self.out_dir / name} exists (use --force to overwrite)")

    def input(self, path) -> Path:
        p = Path(path)
        self.inputs.add(p.resolve())
        return p

    def output(self, name) -> Path:
        p = Path(name)
        if not p.is_absolute():
            p = self.out_dir / p
        rp = p.resolve()
        if rp in self.inputs:
            raise OutputCollision(f"output {p} would overwrite an input")
        if p.exists() and not self.args.force:
            raise OutputCollision(f"output {p} exists (use --force to overwrite)")
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p))
        return p

    def finish(self, effective: dict) -> None:
        cmd = self.args.command
        cfg_path = self.output(f"{cmd}_config.json")
        cfg_path.write_text(json.dumps(effective, indent=2, default=_jsonable), encoding="utf-8")
        summary = {"command": cmd, "outputs": self.outputs, **self.summary}
        sum_path = self.output(f"{cmd}_summary.json")
        sum_path.write_text(json.dumps(summary, indent=2, default=_jsonable), encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    return repr(o)


def _load_ic(run: Run, args, model) -> np.ndarray:
    """Initial state (or delay history) from ``--ic`` file or ``--ic-manifest``."""
    need = 1 if model.observables is None else model.observables.delay_depth + 1
    if args.ic:
        x = read_matrix(run.input(args.ic))
        if model.observables is None:
            return x[:, 0] if x.shape[1] >= 1 and x.shape[0] == model.m else x.reshape(-1)
        return x[:, :need]
    if args.ic_manifest:
        s = load_snapshot_set(run.input(args.ic_manifest))
        rec = s.records[args.ic_record]
        return rec.states[:, 0] if model.observables is None else rec.states[:, :need]
    raise SnapshotError("an initial condition is required (--ic or --ic-manifest)")


# -- subcommands -----------------------------------------------------------------------


def cmd_simulate(run: Run, args) -> dict:
    system = args.system
    d = SYSTEM_DEFAULTS[system]
    horizon = args.horizon if args.horizon is not None else d["horizon"]
    dt = args.dt if args.dt is not None else d["dt"]
    if system == "vdp":
        values = d["values"] if not args.values else [tuple(_floats(v.replace(":", ","))) for v in args.values.split(";")]
    else:
        values = d["values"] if not args.values else _floats(args.values)
    if system == "building":
        snaps = oracles.building_dataset("c_non", values, horizon, dt, "rk4", substeps=args.substeps)
    elif system == "building-linear":
        snaps = oracles.building_dataset("k_s", values, horizon, dt, args.scheme, substeps=args.substeps)
    elif system == "vdp":
        t0 = args.t_start if args.t_start is not None else d["t_start"]
        recs = [
            SnapshotRecord([mu, w], oracles.simulate_vanderpol(mu, w, horizon, dt, t0, substeps=args.substeps))
            for mu, w in values
        ]
        snaps = SnapshotSet(recs, dt, ("mu", "omega_bar"), metadata={"system": "vdp", "t_start": t0})
    elif system == "cubic":
        recs = [SnapshotRecord([c], oracles.simulate_cubic_damped(c, horizon, dt, substeps=args.substeps)) for c in values]
        snaps = SnapshotSet(recs, dt, ("c3",), metadata={"system": "cubic"})
    elif system == "burgers":
        snaps = oracles.burgers_dataset(values, horizon, dt, args.points, args.seed)
    else:
        _, snaps = oracles.simulate_random_parametric_linear(
            args.m, args.params, args.radius, args.seed, n_steps=args.steps
        )
    if args.noise:
        snaps = oracles.inject_noise(snaps, args.noise, args.seed)
    manifest = run.output(args.out or f"{system}.json")
    for idx in range(len(snaps)):
        run.output(f"{manifest.stem}_record{idx:03d}.{args.format}")
    save_snapshot_set(snaps, manifest, args.format)
    run.summary.update({"records": len(snaps), "m": snaps.m, "dt": snaps.dt, "manifest": str(manifest)})
    return {"system": system, "values": values, "horizon": horizon, "dt": dt}


def _fit_config(args) -> FitConfig:
    obs = None
    if args.delay or args.degree > 1 or args.constant:
        obs = "pending"
    rank_z = args.rank_z if args.rank_z is not None else args.rank
    rank_xi = args.rank_xi if args.rank_xi is not None else args.rank
    alpha = ScalingFactors(_floats(args.alpha)) if args.alpha else None
    return FitConfig(rank_z=rank_z, rank_xi=rank_xi, alpha=alpha, observables=obs, rank_tol=args.rank_tol)


def _resolve_obs(cfg: FitConfig, args, snaps: SnapshotSet) -> FitConfig:
    if cfg.observables == "pending":
        cfg.observables = ObservableConfig(snaps.m, args.delay, args.degree, args.constant)
    return cfg


def cmd_fit(run: Run, args) -> dict:
    snaps = load_snapshot_set(run.input(args.manifest))
    cfg = _resolve_obs(_fit_config(args), args, snaps)
    out = run.output(args.out or "model.idmd")
    t0 = time.perf_counter()
    model = fit_model(snaps, cfg)
    elapsed = time.perf_counter() - t0
    digest = save_model(model, out)
    run.summary.update(
        {"model": str(out), "sha256": digest, "ranks": list(model.ranks), "fit_seconds": elapsed, "alpha": model.alpha.alpha}
    )
    return {"manifest": args.manifest, **cfg.to_dict()}


def cmd_predict(run: Run, args) -> dict:
    model = load_model(run.input(args.model))
    eps = _floats(args.eps)
    x1 = _load_ic(run, args, model)
    traj = reconstruct_trajectory(model, eps, x1, args.steps, args.mode_method)
    out = run.output(args.out or "prediction.csv")
    write_matrix(out, traj.states)
    run.summary.update({"trajectory": str(out), "shape": list(traj.states.shape), "eps": eps})
    return {"model": args.model, "eps": eps, "steps": args.steps, "mode_method": args.mode_method}


def cmd_validate(run: Run, args) -> dict:
    pred = read_matrix(run.input(args.pred))
    if args.truth_manifest:
        truth = load_snapshot_set(run.input(args.truth_manifest)).records[args.truth_record].states
        truth = truth[:, args.truth_offset : args.truth_offset + pred.shape[1]]
    else:
        truth = read_matrix(run.input(args.truth))
    eta, total = relative_error(pred, truth)
    out = run.output(args.out or "errors.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "eta"])
        for k, e in enumerate(eta):
            w.writerow([k, repr(float(e))])
    print(f"total relative error {total:.6g}  max {float(eta.max()):.6g}")
    run.summary.update({"total_relative_error": total, "max_relative_error": float(eta.max()), "errors": str(out)})
    return {"pred": args.pred, "truth": args.truth or args.truth_manifest}


def cmd_modes(run: Run, args) -> dict:
    model = load_model(run.input(args.model))
    grid = _grid(args.eps_grid)
    decs = [modal_decomposition(model, e, args.mode_method) for e in grid]
    labels = None
    if len(grid) >= 3:
        labels = classify_modes(model, grid, args.tol, args.mode_method, decs)
    x1 = None
    if args.ic or args.ic_manifest:
        x1 = initial_observables(model, _load_ic(run, args, model))
    out = run.output(args.out or "modes.csv")
    names = list(model.param_names) or [f"eps{i + 1}" for i in range(model.n_params)]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["sigma", "omega", "abs_b", "clamped", "label"])
        for g, (e, dec) in enumerate(zip(grid, decs)):
            b = mode_amplitudes(dec, x1) if x1 is not None else np.full(len(dec), np.nan)
            weight = np.abs(b) * np.linalg.norm(dec.phi, axis=0)
            order = np.argsort(-np.nan_to_num(weight, nan=0.0), kind="stable")
            lab = labels.label_at(g) if labels is not None else {}
            for j in order:
                w.writerow(list(e) + [dec.sigma[j], dec.omega[j], abs(b[j]), int(dec.clamped[j]), lab.get(int(j), "")])
    if labels is not None:
        run.summary["dominant_frequencies"] = labels.dominant_frequencies()
    run.summary["modes"] = str(out)
    return {"model": args.model, "eps_grid": grid, "tol": args.tol, "mode_method": args.mode_method}


def _loss_from_dict(d: dict, dt: float) -> LossSpec:
    kind = d["kind"]

    def steps(key, default=None):
        if key + "_steps" in d:
            return tuple(int(v) for v in d[key + "_steps"])
        if key in d:
            return tuple(int(round(float(v) / dt)) for v in d[key])
        if default is None:
            raise KeyError(f"loss {kind!r} needs {key!r}")
        return default

    if kind == "signal_power":
        return signal_power(d.get("region"), steps("window"))
    if kind == "energy_dissipation":
        return energy_dissipation(d["baseline"], steps("window"), int(d.get("signal", 0)))
    if kind == "target_frequency":
        return target_frequency(d["omega_target"], int(d.get("order", 1)), d.get("max_decay"))
    if kind == "parameter":
        return parameter_value(d["weights"])
    if kind == "param_distance":
        target = np.asarray(d["target"], dtype=float)
        return LossSpec("custom", {"fn": lambda e: float(np.sum((e - target) ** 2)), "needs": "eps", "window": (0, 1)})
    raise KeyError(f"unknown loss kind {kind!r}")


def load_problem(path, dt: float) -> tuple[DesignProblem, dict]:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    loss = _loss_from_dict(spec["loss"], dt)
    cons = [
        Constraint(_loss_from_dict(c["loss"], dt), c.get("sense", "<="), float(c.get("value", 0.0)), float(c.get("tol", 1e-6)))
        for c in spec.get("constraints", [])
    ]
    # grid: {"step": h} | {"points": n} | {"candidates": [[..], ..]}; a bare int is a
    # point count and a bare float a step
    grid = spec.get("grid", 11)
    if isinstance(grid, dict):
        if "candidates" in grid:
            grid = np.asarray(grid["candidates"], dtype=float)
        elif "step" in grid:
            grid = [float(h) for h in np.atleast_1d(grid["step"])]
        elif "points" in grid:
            grid = [int(n) for n in np.atleast_1d(grid["points"])]
        else:
            raise KeyError("grid needs 'step', 'points' or 'candidates'")
    return DesignProblem(spec["bounds"], loss, grid, cons), spec


def cmd_design(run: Run, args) -> dict:
    model = load_model(run.input(args.model))
    problem, spec = load_problem(run.input(args.problem), model.dt)
    ic = None
    if args.ic or args.ic_manifest:
        ic = _load_ic(run, args, model)
    res = solve_design(model, problem, ic, args.mode_method, args.threads)
    out = run.output(args.out or "design.csv")
    names = list(model.param_names) or [f"eps{i + 1}" for i in range(model.n_params)]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["loss"] + [f"constraint{i}" for i in range(len(problem.constraints))] + ["feasible"])
        for row in res.table_rows():
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    print("eps_opt " + " ".join(f"{v:.10g}" for v in res.eps_opt) + f"  loss {res.loss_opt:.6g}")
    run.summary.update({"eps_opt": res.eps_opt, "loss_opt": res.loss_opt, "n_feasible": res.n_feasible, "table": str(out)})
    return {"model": args.model, "problem": spec}


def cmd_uq(run: Run, args) -> dict:
    snaps = load_snapshot_set(run.input(args.manifest))
    cfg = _resolve_obs(_fit_config(args), args, snaps)
    bag = BagConfig(args.runs, args.fraction, args.seed)
    ensemble = bagged_ensemble(snaps, cfg, bag, args.threads)
    if args.problem:
        problem, _ = load_problem(run.input(args.problem), snaps.dt)
        ic = None
        if args.ic or args.ic_manifest:
            ic = _load_ic(run, args, ensemble[0])
        query = lambda m: np.concatenate([solve_design(m, problem, ic).eps_opt])  # noqa: E731
        columns = [f"eps_opt_{n}" for n in snaps.param_names]
    else:
        eps = _floats(args.eps)
        if len(eps) != snaps.n_params:
            raise SnapshotError("--eps (or --problem) is required for the uq query")
        n_freq = args.n_freq
        query = lambda m: resonant_frequencies(modal_decomposition(m, eps))[:n_freq]  # noqa: E731
        columns = [f"omega_{i + 1}" for i in range(n_freq)]
    summary = ensemble_statistics(ensemble, query)
    out = run.output(args.out or "uq.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate"] + columns)
        for i, v in enumerate(summary.values):
            w.writerow([i] + [repr(float(x)) for x in np.atleast_1d(v)])
        for name, stat in (("mean", summary.mean), ("std", summary.std), ("p05", summary.p05), ("p95", summary.p95)):
            w.writerow([name] + [repr(float(x)) for x in np.atleast_1d(stat)])
    run.summary.update(
        {"n_runs": bag.n_runs, "survivors": summary.n, "failures": summary.failures, "mean": summary.mean, "std": summary.std}
    )
    return {"manifest": args.manifest, "fit": cfg.to_dict(), "bag": vars(bag) if hasattr(bag, "__dict__") else str(bag)}


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "validate": cmd_validate,
    "modes": cmd_modes,
    "design": cmd_design,
    "uq": cmd_uq,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with option values (flags override)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--force", action="store_true", help="allow overwriting existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="iddmd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fit_opts(p):
        p.add_argument("--manifest", required=True)
        p.add_argument("--rank", type=int)
        p.add_argument("--rank-z", type=int)
        p.add_argument("--rank-xi", type=int)
        p.add_argument("--rank-tol", type=float, default=1e-10)
        p.add_argument("--alpha", help="comma-separated scaling factors")
        p.add_argument("--delay", type=int, default=0, help="delay depth of the observables")
        p.add_argument("--degree", type=int, default=1, help="max polynomial degree")
        p.add_argument("--constant", action="store_true", help="include a constant observable")

    def ic_opts(p):
        p.add_argument("--ic", help="data file holding the initial state / delay history")
        p.add_argument("--ic-manifest", help="take the initial condition from a record of this manifest")
        p.add_argument("--ic-record", type=int, default=0)

    p = sub.add_parser("simulate", parents=[common], help="generate training data")
    p.add_argument("--system", required=True, choices=sorted(SYSTEM_DEFAULTS))
    p.add_argument("--values", help="parameter values (comma list; vdp: 'mu:w;mu:w')")
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-start", type=float)
    p.add_argument("--scheme", choices=["rk4", "central"], default="rk4")
    p.add_argument("--substeps", type=int, default=1)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--params", type=int, default=1)
    p.add_argument("--radius", type=float, default=0.95)
    p.add_argument("--steps", type=int)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--format", choices=["bin", "csv"], default="bin")
    p.add_argument("--out", help="manifest file name")

    p = sub.add_parser("fit", parents=[common], help="identify a model")
    fit_opts(p)
    p.add_argument("--out", help="model file")

    p = sub.add_parser("predict", parents=[common], help="reconstruct a trajectory")
    p.add_argument("--model", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--mode-method", choices=["exact", "projected"], default="exact")
    ic_opts(p)
    p.add_argument("--out")

    p = sub.add_parser("validate", parents=[common], help="relative error of a prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth")
    p.add_argument("--truth-manifest")
    p.add_argument("--truth-record", type=int, default=0)
    p.add_argument("--truth-offset", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("modes", parents=[common], help="modal table over a parameter grid")
    p.add_argument("--model", required=True)
    p.add_argument("--eps-grid", required=True, help="'lo:hi:n' or comma list; ';' between parameters")
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--mode-method", choices=["exact", "projected"], default="exact")
    ic_opts(p)
    p.add_argument("--out")

    p = sub.add_parser("design", parents=[common], help="grid-search inverse design")
    p.add_argument("--model", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--mode-method", choices=["exact", "projected"], default="exact")
    ic_opts(p)
    p.add_argument("--out")

    p = sub.add_parser("uq", parents=[common], help="bagged ensemble statistics")
    fit_opts(p)
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--problem", help="design problem evaluated per replicate")
    p.add_argument("--eps", help="query resonant frequencies at these parameters")
    p.add_argument("--n-freq", type=int, default=4)
    ic_opts(p)
    p.add_argument("--out")
    return parser


def parse_args(argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` act as defaults that flags override."""
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command is not None:
        conf = json.loads(Path(known.config).read_text(encoding="utf-8"))
        if not isinstance(conf, dict):
            raise UsageError("config file must hold a JSON object")
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        sub = parser._subparsers._group_actions[0].choices[command]  # noqa: SLF001
        actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
        unknown = set(conf) - set(actions)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key in conf:
            actions[key].required = False
        sub.set_defaults(**conf)
    return parser.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"iddmd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"iddmd: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.random.seed(args.seed)
    logging.captureWarnings(True)
    try:
        r = Run(args)
        r.out_dir.mkdir(parents=True, exist_ok=True)
        effective = COMMANDS[args.command](r, args)
        effective = {
            "command": args.command,
            "argv": argv,
            "options": {k: v for k, v in vars(args).items() if k != "command"},
            "resolved": effective,
        }
        r.finish(effective)
    except NUMERIC_ERRORS as exc:
        print(f"iddmd: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OutputCollision as exc:
        print(f"iddmd: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except INVALID_ERRORS as exc:
        print(f"iddmd: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())
