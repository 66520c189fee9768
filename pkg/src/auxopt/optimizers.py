"""Cycle-based optimizers: Naive, AuxMOM, AuxMOM-V0, AuxMVR, and baselines.

Each algorithm proceeds in T cycles; a cycle refreshes a momentum estimate of
grad(f - h) (or of grad f for the baselines) from the current snapshot x and
then takes K inner steps driven by gradients of the helper h.  Cycle
functions are pure: state in, new state out.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import Array, OraclePair, RandomToken, as_vector, stream_fork

ALGORITHMS = ("Naive", "AuxMOM", "AuxMOM_V0", "AuxMVR", "SGDm", "MVR", "GD", "FineTune")

# Momentum of f - h (bias correction) vs momentum of f.
_FMH_MOMENTUM = ("AuxMOM", "AuxMVR")
_F_MOMENTUM = ("AuxMOM_V0", "SGDm", "MVR")

DIVERGENCE_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """Raised when an iterate blows up; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str
    eta: float
    a: float = 1.0
    K: int = 1
    T: int = 1
    m0_mode: str = "single_sample"  # zero | single_sample | big_batch
    split_fraction: float = 0.5  # FineTune only: share of the budget spent on h

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.a <= 1:
            raise ValueError("momentum parameter a must lie in (0, 1]")
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")
        if self.m0_mode not in ("zero", "single_sample", "big_batch"):
            raise ValueError(f"unknown m0_mode {self.m0_mode!r}")
        if not 0 <= self.split_fraction <= 1:
            raise ValueError("split_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class OptimizerState:
    x_prev: Array  # snapshot two cycles back (AuxMVR correction point)
    x: Array  # current snapshot
    y: Array  # inner iterate
    m: Array  # momentum
    t: int = 0
    k: int = 0
    calls_f: int = 0
    calls_h: int = 0
    calls_fmh: int = 0


@dataclass(frozen=True)
class CycleResult:
    state: OptimizerState
    inner_iterates: tuple[Array, ...]  # y^t_1 .. y^t_K (or the baseline steps)


@dataclass
class TrajectoryRow:
    t: int
    k: int
    f_value: Optional[float]
    grad_norm_sq: Optional[float]
    E_t: Optional[float]
    Delta_t: Optional[float]
    calls_f: int
    calls_h: int
    calls_fmh: int


@dataclass
class Trajectory:
    rows: list[TrajectoryRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def final_grad_norm_sq(self) -> float:
        return self.rows[-1].grad_norm_sq

    def cycle_ends(self) -> list[TrajectoryRow]:
        by_t: dict[int, TrajectoryRow] = {}
        for row in self.rows:
            if row.t > 0:
                by_t[row.t] = row
        return [by_t[t] for t in sorted(by_t)]

    def cycle_grad_means(self) -> list[float]:
        """G^t: per-cycle mean of ||grad f(y^t_k)||^2 over the inner steps."""
        sums: dict[int, list[float]] = {}
        for row in self.rows:
            if row.t > 0 and row.grad_norm_sq is not None:
                sums.setdefault(row.t, []).append(row.grad_norm_sq)
        return [float(np.mean(sums[t])) for t in sorted(sums)]


def _momentum_target_gradient(oracle: OraclePair, cfg: OptimizerConfig):
    """The stochastic gradient the momentum tracks: g_{f-h} or g_f."""
    if cfg.algorithm in _FMH_MOMENTUM:
        return oracle.grad_f_minus_h, "fmh"
    return oracle.grad_f, "f"


def init_state(
    x0: Array, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> OptimizerState:
    """Initial state; m0 per cfg.m0_mode (zero, one sample, or a T-times batch)."""
    x0 = as_vector(x0, oracle.dim)
    m = np.zeros(oracle.dim)
    calls = {"f": 0, "fmh": 0}
    no_momentum = cfg.algorithm in ("Naive", "GD", "FineTune")
    if cfg.m0_mode != "zero" and not no_momentum:
        grad, kind = _momentum_target_gradient(oracle, cfg)
        init_token = stream_fork(token, 0)
        if cfg.m0_mode == "single_sample":
            m = grad(x0, init_token)
            calls[kind] = 1
        else:  # big_batch: mean of T independent samples
            draws = [grad(x0, stream_fork(init_token, j)) for j in range(cfg.T)]
            m = np.mean(draws, axis=0)
            calls[kind] = cfg.T
    return OptimizerState(
        x_prev=x0.copy(),
        x=x0.copy(),
        y=x0.copy(),
        m=m,
        calls_f=calls["f"],
        calls_fmh=calls["fmh"],
    )


def local_update_step(y: Array, x_snapshot: Array, oracle: OraclePair, eta: float) -> Array:
    """One bias-corrected step y - eta*(grad h(y) - grad h(x) + grad f(x))."""
    if not oracle.has_exact_gradients:
        raise ValueError("local_update_step requires exact gradients")
    d = oracle.exact_grad_h(y) - oracle.exact_grad_h(x_snapshot) + oracle.exact_grad_f(x_snapshot)
    return y - eta * d


def naive_cycle(
    state: OptimizerState, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> CycleResult:
    """One f-gradient step followed by K-1 raw h-gradient steps, no correction."""
    x = state.x
    y = x.copy()
    ys = []
    m = oracle.grad_f(x, stream_fork(token, 0))
    calls_h = 0
    for k in range(cfg.K):
        d = m if k == 0 else oracle.grad_h(y, stream_fork(token, k))
        calls_h += k > 0
        y = y - cfg.eta * d
        ys.append(y)
    new = replace(
        state,
        x_prev=x,
        x=y,
        y=y,
        m=m,
        t=state.t + 1,
        k=cfg.K,
        calls_f=state.calls_f + 1,
        calls_h=state.calls_h + calls_h,
    )
    return CycleResult(new, tuple(ys))


def _inner_loop(x: Array, m: Array, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken):
    y = x.copy()
    ys = []
    for k in range(1, cfg.K + 1):
        gh = oracle.grad_h(y, stream_fork(token, k))
        y = y - cfg.eta * (gh + m)
        ys.append(y)
    return y, ys


def auxmom_cycle(
    state: OptimizerState, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> CycleResult:
    """Classical momentum of g_{f-h} at the snapshot, then K corrected h-steps."""
    x = state.x
    g = oracle.grad_f_minus_h(x, stream_fork(token, 0))
    m = (1.0 - cfg.a) * state.m + cfg.a * g
    y, ys = _inner_loop(x, m, oracle, cfg, token)
    new = replace(
        state,
        x_prev=x,
        x=y,
        y=y,
        m=m,
        t=state.t + 1,
        k=cfg.K,
        calls_h=state.calls_h + cfg.K,
        calls_fmh=state.calls_fmh + 1,
    )
    return CycleResult(new, tuple(ys))


def auxmvr_cycle(
    state: OptimizerState, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> CycleResult:
    """STORM-style momentum of g_{f-h}: same-sample correction at x and x_prev."""
    x, x_prev = state.x, state.x_prev
    tok = stream_fork(token, 0)
    g_now = oracle.grad_f_minus_h(x, tok)
    g_prev = oracle.grad_f_minus_h(x_prev, tok)  # shared sample
    m = (1.0 - cfg.a) * state.m + cfg.a * g_now + (1.0 - cfg.a) * (g_now - g_prev)
    y, ys = _inner_loop(x, m, oracle, cfg, token)
    new = replace(
        state,
        x_prev=x,
        x=y,
        y=y,
        m=m,
        t=state.t + 1,
        k=cfg.K,
        calls_h=state.calls_h + cfg.K,
        calls_fmh=state.calls_fmh + 2,
    )
    return CycleResult(new, tuple(ys))


def auxmom_v0_cycle(
    state: OptimizerState, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> CycleResult:
    """Momentum on f only; inner steps carry an SVRG-style h-difference."""
    x = state.x
    gf = oracle.grad_f(x, stream_fork(token, 0))
    m = (1.0 - cfg.a) * state.m + cfg.a * gf
    y = x.copy()
    ys = []
    for k in range(1, cfg.K + 1):
        tok = stream_fork(token, k)
        d = oracle.grad_h(y, tok) - oracle.grad_h(x, tok) + m  # shared sample
        y = y - cfg.eta * d
        ys.append(y)
    new = replace(
        state,
        x_prev=x,
        x=y,
        y=y,
        m=m,
        t=state.t + 1,
        k=cfg.K,
        calls_f=state.calls_f + 1,
        calls_h=state.calls_h + 2 * cfg.K,
    )
    return CycleResult(new, tuple(ys))


def baseline_cycle(
    state: OptimizerState, oracle: OraclePair, cfg: OptimizerConfig, token: RandomToken
) -> CycleResult:
    """SGDm / MVR / GD take one f-step per cycle; FineTune takes K phase steps."""
    x, x_prev = state.x, state.x_prev
    alg = cfg.algorithm
    if alg == "GD":
        if oracle.exact_grad_f is None:
            raise ValueError("GD requires an exact gradient of f")
        y = x - cfg.eta * oracle.exact_grad_f(x)
        new = replace(state, x_prev=x, x=y, y=y, t=state.t + 1, k=1,
                      calls_f=state.calls_f + 1)
        return CycleResult(new, (y,))
    if alg == "SGDm":
        m = (1.0 - cfg.a) * state.m + cfg.a * oracle.grad_f(x, stream_fork(token, 0))
        y = x - cfg.eta * m
        new = replace(state, x_prev=x, x=y, y=y, m=m, t=state.t + 1, k=1,
                      calls_f=state.calls_f + 1)
        return CycleResult(new, (y,))
    if alg == "MVR":
        tok = stream_fork(token, 0)
        g_now = oracle.grad_f(x, tok)
        g_prev = oracle.grad_f(x_prev, tok)
        m = (1.0 - cfg.a) * state.m + cfg.a * g_now + (1.0 - cfg.a) * (g_now - g_prev)
        y = x - cfg.eta * m
        new = replace(state, x_prev=x, x=y, y=y, m=m, t=state.t + 1, k=1,
                      calls_f=state.calls_f + 2)
        return CycleResult(new, (y,))
    if alg == "FineTune":
        # First split_fraction * (T*K) global steps run SGDm on h, the rest on f.
        # The momentum buffer is reset when the phase flips.
        switch = cfg.split_fraction * cfg.T * cfg.K
        y = x.copy()
        m = state.m
        ys = []
        calls_f = calls_h = 0
        for k in range(1, cfg.K + 1):
            step = state.t * cfg.K + k
            on_h = step <= switch
            if not on_h and state.t * cfg.K + k - 1 <= switch:
                m = np.zeros_like(m)  # phase switch
            tok = stream_fork(token, k)
            g = oracle.grad_h(y, tok) if on_h else oracle.grad_f(y, tok)
            calls_h += on_h
            calls_f += not on_h
            m = (1.0 - cfg.a) * m + cfg.a * g
            y = y - cfg.eta * m
            ys.append(y)
        new = replace(state, x_prev=x, x=y, y=y, m=m, t=state.t + 1, k=cfg.K,
                      calls_f=state.calls_f + calls_f, calls_h=state.calls_h + calls_h)
        return CycleResult(new, tuple(ys))
    raise ValueError(f"{alg} is not a baseline algorithm")


_CYCLE_FNS = {
    "Naive": naive_cycle,
    "AuxMOM": auxmom_cycle,
    "AuxMOM_V0": auxmom_v0_cycle,
    "AuxMVR": auxmvr_cycle,
    "SGDm": baseline_cycle,
    "MVR": baseline_cycle,
    "GD": baseline_cycle,
    "FineTune": baseline_cycle,
}


def run(
    oracle: OraclePair,
    cfg: OptimizerConfig,
    token: RandomToken,
    diagnostics_on: bool = False,
    x0: Optional[Array] = None,
) -> Trajectory:
    """Execute T cycles, recording f(y) and ||grad f(y)||^2 per inner step.

    With diagnostics on (and exact gradients available) also records the
    momentum error E^t = ||m^t - (grad f - grad h)(x^{t-1})||^2 and the
    per-step displacement Delta^t_k = ||y^t_k - x^{t-1}||^2.
    """
    if x0 is None:
        x0 = np.ones(oracle.dim)
    state = init_state(x0, oracle, cfg, token)
    cycle_fn = _CYCLE_FNS[cfg.algorithm]
    exact = oracle.has_exact_gradients

    traj = Trajectory(metadata={"algorithm": cfg.algorithm, "eta": cfg.eta, "a": cfg.a,
                                "K": cfg.K, "T": cfg.T})

    def observe(x: Array):
        f_val = oracle.f_value(x) if oracle.f_value is not None else None
        g_sq = float(np.sum(oracle.exact_grad_f(x) ** 2)) if exact else None
        return f_val, g_sq

    f0, g0 = observe(state.x)
    traj.rows.append(TrajectoryRow(0, 0, f0, g0, None, None,
                                   state.calls_f, state.calls_h, state.calls_fmh))

    for t in range(1, cfg.T + 1):
        result = cycle_fn(state, oracle, cfg, stream_fork(token, t))
        snapshot = state.x
        new = result.state
        e_t = None
        if diagnostics_on and exact and cfg.algorithm in _FMH_MOMENTUM:
            e_t = float(np.sum((new.m - oracle.exact_grad_f_minus_h(snapshot)) ** 2))
        for k, y in enumerate(result.inner_iterates, start=1):
            if not np.all(np.isfinite(y)):
                raise DivergenceError(f"non-finite iterate at cycle {t}, step {k}", traj)
            f_val, g_sq = observe(y)
            if f_val is not None and f_val > DIVERGENCE_LIMIT:
                raise DivergenceError(f"f exceeded {DIVERGENCE_LIMIT:g} at cycle {t}", traj)
            delta = float(np.sum((y - snapshot) ** 2)) if diagnostics_on else None
            traj.rows.append(TrajectoryRow(t, k, f_val, g_sq, e_t, delta,
                                           new.calls_f, new.calls_h, new.calls_fmh))
        state = new

    traj.metadata["final_x"] = state.x.tolist()
    return traj
