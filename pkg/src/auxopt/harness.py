"""Experiment configuration, run orchestration, sweeps, and CSV persistence."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import problems, theory
from .core import NoiseSpec, OraclePair, RandomToken, stream_fork
from .optimizers import (
    DivergenceError,
    OptimizerConfig,
    Trajectory,
    TrajectoryRow,
    run,
)

SCHEMA_VERSION = 1

CSV_COLUMNS = ("t", "k", "f_value", "grad_norm_sq", "E_t", "Delta_t",
               "calls_f", "calls_h", "calls_fmh")

GRAD_THRESHOLD = 1e-6  # sweep summary: cycles until ||grad f||^2 falls below


class ConfigError(ValueError):
    """Schema violation; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def _check_keys(obj: dict, allowed: set, required: set, path: str):
    _require(isinstance(obj, dict), path, "expected an object")
    unknown = set(obj) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    missing = required - set(obj)
    if missing:
        key = sorted(missing)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")


@dataclass
class ExperimentConfig:
    raw: dict
    problem: dict
    algorithm: OptimizerConfig
    noise: NoiseSpec
    seed: int
    params_mode: str = "manual"
    repeats: int = 1
    output_path: str = "experiment"
    x0: Optional[list[float]] = None
    diagnostics: bool = False


_PROBLEM_TYPES = ("toy", "quadratic_nd", "logistic")


def load_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None

    _check_keys(raw, {"version", "problem", "algorithm", "noise", "seed", "params_mode",
                      "repeats", "output_path", "x0", "diagnostics"},
                {"problem", "algorithm", "seed"}, "")
    if "version" in raw:
        _require(raw["version"] == SCHEMA_VERSION, "version",
                 f"unsupported schema version {raw['version']}")

    problem = raw["problem"]
    _require(isinstance(problem, dict) and len(problem) == 1, "problem",
             f"expected exactly one problem tag out of {_PROBLEM_TYPES}")
    tag = next(iter(problem))
    _require(tag in _PROBLEM_TYPES, f"problem.{tag}", "unknown problem type")
    _validate_problem(tag, problem[tag])

    alg_raw = raw["algorithm"]
    _check_keys(alg_raw, {"name", "eta", "a", "K", "T", "m0_mode", "split_fraction"},
                {"name", "K", "T"}, "algorithm")
    params_mode = raw.get("params_mode", "manual")
    _require(params_mode in ("manual", "theorem"), "params_mode",
             "must be 'manual' or 'theorem'")
    if params_mode == "manual":
        _require("eta" in alg_raw, "algorithm.eta", "required in manual params mode")
    from .optimizers import ALGORITHMS

    _require(alg_raw["name"] in ALGORITHMS, "algorithm.name",
             f"must be one of {ALGORITHMS}")
    _require(isinstance(alg_raw["K"], int) and alg_raw["K"] >= 1,
             "algorithm.K", "must be an integer >= 1")
    _require(isinstance(alg_raw["T"], int) and alg_raw["T"] >= 1,
             "algorithm.T", "must be an integer >= 1")
    eta = alg_raw.get("eta", 1.0)  # placeholder when theorem mode resolves it
    _require(isinstance(eta, (int, float)) and eta > 0, "algorithm.eta",
             "must be positive")
    a = alg_raw.get("a", 1.0)
    _require(isinstance(a, (int, float)) and 0 < a <= 1, "algorithm.a",
             "must lie in (0, 1]")
    try:
        algorithm = OptimizerConfig(
            algorithm=alg_raw["name"],
            eta=eta,
            a=a,
            K=alg_raw["K"],
            T=alg_raw["T"],
            m0_mode=alg_raw.get("m0_mode", "single_sample"),
            split_fraction=alg_raw.get("split_fraction", 0.5),
        )
    except ValueError as exc:
        raise ConfigError("algorithm", str(exc)) from None

    noise_raw = raw.get("noise", {})
    _check_keys(noise_raw, {"sigma_f", "sigma_h", "rho"}, set(), "noise")
    try:
        noise = NoiseSpec(
            sigma_f=noise_raw.get("sigma_f", 0.0),
            sigma_h=noise_raw.get("sigma_h", 0.0),
            rho=noise_raw.get("rho", 0.0),
        )
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from None

    seed = raw["seed"]
    _require(isinstance(seed, int) and seed >= 0, "seed", "must be a nonnegative integer")
    repeats = raw.get("repeats", 1)
    _require(isinstance(repeats, int) and repeats >= 1, "repeats", "must be an integer >= 1")

    return ExperimentConfig(
        raw=raw,
        problem=problem,
        algorithm=algorithm,
        noise=noise,
        seed=seed,
        params_mode=params_mode,
        repeats=repeats,
        output_path=raw.get("output_path", "experiment"),
        x0=raw.get("x0"),
        diagnostics=bool(raw.get("diagnostics", False)),
    )


def _validate_problem(tag: str, body: Any):
    path = f"problem.{tag}"
    if tag == "toy":
        _check_keys(body, {"delta", "zeta"}, {"delta", "zeta"}, path)
        _require(body["delta"] >= 0, f"{path}.delta", "must be nonnegative")
    elif tag == "quadratic_nd":
        _check_keys(body, {"a_f", "a_h", "b_h"}, {"a_f", "a_h", "b_h"}, path)
    else:
        _check_keys(body, {"path", "split", "helper", "l2_reg", "batch_size"},
                    {"path", "helper"}, path)
        helper = body["helper"]
        _check_keys(helper, {"kind", "fraction", "indices"}, {"kind"}, f"{path}.helper")
        _require(helper["kind"] in ("random_labels", "coreset", "subset_batch"),
                 f"{path}.helper.kind", "unknown helper kind")


def load_config_file(path: str) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError("", f"config file not found: {path}")
    return load_config(p.read_text())


def build_oracle(cfg: ExperimentConfig) -> OraclePair:
    """Instantiate the problem named by the config."""
    tag = next(iter(cfg.problem))
    body = cfg.problem[tag]
    if tag == "toy":
        return problems.make_toy_pair(body["delta"], body["zeta"], cfg.noise)
    if tag == "quadratic_nd":
        return problems.make_quadratic_nd(
            np.asarray(body["a_f"]), np.asarray(body["a_h"]), np.asarray(body["b_h"]),
            cfg.noise,
        )
    data_path = Path(body["path"])
    if not data_path.exists():
        raise ConfigError("problem.logistic.path", f"dataset file not found: {data_path}")
    features, labels = problems.parse_libsvm(data_path.read_text())
    task = problems.LogisticTask(
        features.toarray(),
        problems.map_labels_to_pm1(labels),
        l2_reg=body.get("l2_reg", 0.0),
    )
    helper_raw = body["helper"]
    helper = problems.HelperBuild(
        kind=helper_raw["kind"],
        fraction=helper_raw.get("fraction", 1.0),
        indices=helper_raw.get("indices"),
    )
    split = tuple(body.get("split", (1 / 3, 1 / 3, 1 / 3)))
    f_task, h_task, _ = problems.build_semisupervised(
        task, split, helper, RandomToken(cfg.seed)
    )
    gap = 0.0 if helper.kind == "random_labels" and f_task.l2_reg == h_task.l2_reg else None
    return problems.logistic_oracle(
        f_task, h_task, batch_size=body.get("batch_size"), hessian_gap=gap
    )


def theory_params_for(cfg: ExperimentConfig, oracle: OraclePair,
                      x0: np.ndarray) -> theory.TheoryParams:
    if oracle.lipschitz is None or oracle.hessian_gap is None:
        raise ConfigError("params_mode",
                          "theorem mode requires a problem with analytic constants")
    f0 = 0.0
    if oracle.f_value is not None:
        f0 = oracle.f_value(x0) - (oracle.f_star or 0.0)
    return theory.TheoryParams(
        L=oracle.lipschitz,
        delta=oracle.hessian_gap,
        sigma_f=cfg.noise.sigma_f,
        sigma_h=cfg.noise.sigma_h,
        sigma_fmh=math.sqrt(cfg.noise.sigma_fmh_sq),
        F0=max(f0, 0.0),
        K=cfg.algorithm.K,
        T=cfg.algorithm.T,
    )


def resolve_params(cfg: ExperimentConfig, oracle: OraclePair,
                   x0: np.ndarray) -> tuple[OptimizerConfig, dict]:
    """Apply theorem-derived (eta, a) when requested; returns (config, metadata)."""
    meta: dict = {"params_mode": cfg.params_mode}
    if cfg.params_mode != "theorem":
        return cfg.algorithm, meta
    p = theory_params_for(cfg, oracle, x0)
    if cfg.algorithm.algorithm == "AuxMVR":
        eta, a = theory.auxmvr_params(p)
    else:
        eta, a, beta = theory.auxmom_params(p)
        meta["beta"] = beta
    meta.update({"theorem_eta": eta, "theorem_a": a})
    return OptimizerConfig(
        algorithm=cfg.algorithm.algorithm, eta=eta, a=a, K=cfg.algorithm.K,
        T=cfg.algorithm.T, m0_mode=cfg.algorithm.m0_mode,
        split_fraction=cfg.algorithm.split_fraction,
    ), meta


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def trajectory_to_csv(traj: Trajectory) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in traj.rows:
        lines.append(",".join(_fmt(v) for v in (
            r.t, r.k, r.f_value, r.grad_norm_sq, r.E_t, r.Delta_t,
            r.calls_f, r.calls_h, r.calls_fmh,
        )))
    return "\n".join(lines) + "\n"


def trajectory_from_csv(text: str) -> Trajectory:
    lines = text.strip().splitlines()
    if lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError("unexpected CSV header")
    traj = Trajectory()
    for line in lines[1:]:
        cells = line.split(",")
        opt = [None if c == "" else float(c) for c in cells[2:6]]
        traj.rows.append(TrajectoryRow(
            int(cells[0]), int(cells[1]), opt[0], opt[1], opt[2], opt[3],
            int(cells[6]), int(cells[7]), int(cells[8]),
        ))
    return traj


def _aggregate(trajectories: Sequence[Trajectory]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    n_rows = min(len(t.rows) for t in trajectories)
    for i in range(n_rows):
        rows = [t.rows[i] for t in trajectories]
        cells = [str(rows[0].t), str(rows[0].k)]
        for attr in ("f_value", "grad_norm_sq", "E_t", "Delta_t"):
            vals = [getattr(r, attr) for r in rows]
            cells.append("" if any(v is None for v in vals)
                         else format(float(np.mean(vals)), ".17g"))
        for attr in ("calls_f", "calls_h", "calls_fmh"):
            cells.append(format(float(np.mean([getattr(r, attr) for r in rows])), ".17g"))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Experiment execution
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> list[Trajectory]:
    """Run ``repeats`` independent runs with forked seeds and persist CSVs.

    On divergence the partial trajectory is persisted before the error
    propagates.
    """
    oracle = build_oracle(cfg)
    x0 = np.asarray(cfg.x0, dtype=np.float64) if cfg.x0 is not None else np.ones(oracle.dim)
    opt_cfg, resolve_meta = resolve_params(cfg, oracle, x0)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    stem = Path(cfg.output_path).name or "experiment"

    trajectories = []
    root = RandomToken(cfg.seed)
    for r in range(cfg.repeats):
        run_token = stream_fork(root, r)
        try:
            traj = run(oracle, opt_cfg, run_token, diagnostics_on=cfg.diagnostics, x0=x0)
        except DivergenceError as exc:
            if out is not None:
                (out / f"{stem}_rep{r}_partial.csv").write_text(
                    trajectory_to_csv(exc.trajectory))
            raise
        traj.metadata.update(resolve_meta)
        traj.metadata["config"] = copy.deepcopy(cfg.raw)
        traj.metadata["resolved_eta"] = opt_cfg.eta
        traj.metadata["resolved_a"] = opt_cfg.a
        traj.metadata["repeat"] = r
        trajectories.append(traj)
        if out is not None:
            (out / f"{stem}_rep{r}.csv").write_text(trajectory_to_csv(traj))
    if out is not None:
        (out / f"{stem}_aggregate.csv").write_text(_aggregate(trajectories))
    return trajectories


def _get_by_path(obj: dict, path: str):
    cur = obj
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(path, "sweep axis does not name an existing field")
        cur = cur[part]
    return cur


def _set_by_path(obj: dict, path: str, value):
    parts = path.split(".")
    cur = obj
    for part in parts[:-1]:
        cur = cur[part]
    cur[parts[-1]] = value


def run_sweep(
    base_cfg: ExperimentConfig,
    axis: str,
    values: Sequence[float],
    out_dir: Optional[str] = None,
    threshold: float = GRAD_THRESHOLD,
) -> list[dict]:
    """One run_experiment per axis value; returns summary rows.

    Each summary reports the final per-cycle gradient average, the cycles
    needed to push ||grad f||^2 below ``threshold``, and the gradient-call
    budget so same-work comparisons against baselines stay checkable.
    """
    current = _get_by_path(base_cfg.raw, axis)
    if not isinstance(current, (int, float)) or isinstance(current, bool):
        raise ConfigError(axis, "sweep axis must name a numeric field")

    summaries = []
    for value in values:
        raw = copy.deepcopy(base_cfg.raw)
        cast = int(value) if isinstance(current, int) and float(value).is_integer() else value
        _set_by_path(raw, axis, cast)
        cfg = load_config(json.dumps(raw))
        sub_dir = None
        if out_dir is not None:
            sub_dir = str(Path(out_dir) / f"{axis.replace('.', '_')}_{cast}")
        trajs = run_experiment(cfg, sub_dir)
        g_means = [t.cycle_grad_means() for t in trajs]
        final_g = (float(np.mean([g[-1] for g in g_means]))
                   if all(g for g in g_means) else None)
        iters = []
        for traj in trajs:
            hit = next((row.t for row in traj.cycle_ends()
                        if row.grad_norm_sq is not None and row.grad_norm_sq < threshold),
                       None)
            iters.append(hit)
        last = trajs[0].rows[-1]
        summaries.append({
            "value": cast,
            "final_G": final_g,
            "iters_to_threshold": (float(np.mean(iters))
                                   if all(i is not None for i in iters) else None),
            "calls_f": last.calls_f,
            "calls_h": last.calls_h,
            "calls_fmh": last.calls_fmh,
        })
    if out_dir is not None:
        path = Path(out_dir) / "sweep_summary.csv"
        header = ["value", "final_G", "iters_to_threshold", "calls_f", "calls_h", "calls_fmh"]
        lines = [",".join(header)]
        for s in summaries:
            lines.append(",".join(_fmt(s[h]) for h in header))
        path.write_text("\n".join(lines) + "\n")
    return summaries
