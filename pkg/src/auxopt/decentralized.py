"""Multi-helper orchestration: sample S of N helpers, run per-helper momentum
and inner loops, average the returned iterates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Array, OraclePair, RandomToken, rng_from_token, stream_fork
from .optimizers import OptimizerConfig

VARIANTS = ("AuxMOM", "AuxMVR")


@dataclass
class HelperSet:
    """N helper oracles with persistent per-helper momenta.

    Momenta of unsampled helpers are left untouched by a cycle.  Each helper
    draws noise from its own token lane; ``token_labels`` exists so tests can
    force matched noise across helpers.
    """

    oracles: list[OraclePair]
    s: int
    momenta: list[Array] = field(default_factory=list)
    token_labels: Optional[list[int]] = None
    calls_f: int = 0
    calls_h: int = 0
    calls_fmh: int = 0

    def __post_init__(self):
        n = len(self.oracles)
        if n == 0:
            raise ValueError("helper set must be nonempty")
        if not 1 <= self.s <= n:
            raise ValueError(f"S must lie in [1, {n}], got {self.s}")
        dim = self.oracles[0].dim
        if any(o.dim != dim for o in self.oracles):
            raise ValueError("helpers must share the parameter dimension")
        if not self.momenta:
            self.momenta = [np.zeros(dim) for _ in range(n)]
        if self.token_labels is None:
            self.token_labels = list(range(n))

    @property
    def n(self) -> int:
        return len(self.oracles)

    @property
    def dim(self) -> int:
        return self.oracles[0].dim


def sample_helpers(token: RandomToken, n: int, s: int) -> list[int]:
    """Uniform sample of s helper indices without replacement, sorted."""
    rng = rng_from_token(token)
    return sorted(int(i) for i in rng.choice(n, size=s, replace=False))


def decentralized_cycle(
    x: Array,
    helpers: HelperSet,
    cfg: OptimizerConfig,
    token: RandomToken,
    variant: str = "AuxMOM",
    x_prev: Optional[Array] = None,
) -> tuple[Array, list[int]]:
    """One cycle: sampled helpers refresh momenta and run K inner steps from x;
    the next snapshot is the average of their final iterates.

    The f-gradient inside g_{f-h} is shared by all sampled helpers, so the
    cycle is billed one f-minus-h draw (two for the MVR variant) regardless
    of S.  Mutates the sampled helpers' momenta; returns (x', sampled).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "AuxMVR" and x_prev is None:
        x_prev = x
    sampled = sample_helpers(stream_fork(token, 0), helpers.n, helpers.s)
    finals = []
    for i in sampled:
        oracle = helpers.oracles[i]
        htok = stream_fork(stream_fork(token, 1), helpers.token_labels[i])
        mom_tok = stream_fork(htok, 0)
        if variant == "AuxMOM":
            g = oracle.grad_f_minus_h(x, mom_tok)
            m = (1.0 - cfg.a) * helpers.momenta[i] + cfg.a * g
        else:
            g_now = oracle.grad_f_minus_h(x, mom_tok)
            g_prev = oracle.grad_f_minus_h(x_prev, mom_tok)
            m = ((1.0 - cfg.a) * helpers.momenta[i] + cfg.a * g_now
                 + (1.0 - cfg.a) * (g_now - g_prev))
        helpers.momenta[i] = m
        y = x.copy()
        for k in range(1, cfg.K + 1):
            gh = oracle.grad_h(y, stream_fork(htok, k))
            y = y - cfg.eta * (gh + m)
        finals.append(y)
        helpers.calls_h += cfg.K
    helpers.calls_fmh += 1 if variant == "AuxMOM" else 2
    return np.mean(finals, axis=0), sampled


@dataclass
class DecentralizedTrajectory:
    snapshots: list[Array]
    sampled: list[list[int]]


def run_decentralized(
    x0: Array,
    helpers: HelperSet,
    cfg: OptimizerConfig,
    token: RandomToken,
    variant: str = "AuxMOM",
) -> DecentralizedTrajectory:
    """T decentralized cycles; records snapshots and the sampled helper sets."""
    x = np.asarray(x0, dtype=np.float64).copy()
    x_prev = x.copy()
    traj = DecentralizedTrajectory(snapshots=[x.copy()], sampled=[])
    for t in range(1, cfg.T + 1):
        x_new, chosen = decentralized_cycle(
            x, helpers, cfg, stream_fork(token, t), variant=variant, x_prev=x_prev
        )
        x_prev, x = x, x_new
        traj.snapshots.append(x.copy())
        traj.sampled.append(chosen)
    return traj


@dataclass(frozen=True)
class WeakConvexityReport:
    ok: bool
    witness: Optional[tuple[Array, Array]] = None

    def __bool__(self) -> bool:
        return self.ok


def check_weak_convexity(
    oracle: OraclePair,
    delta: float,
    n_points: int = 200,
    radius: float = 2.0,
    token: RandomToken = RandomToken(0),
    tol: float = 1e-9,
) -> WeakConvexityReport:
    """Midpoint-convexity test of f(x) + delta ||x||^2 on random point pairs.

    Returns a falsy report with a witness pair on the first violation.
    """
    if oracle.f_value is None:
        raise ValueError("weak-convexity check needs f values")

    def g(x: Array) -> float:
        return oracle.f_value(x) + delta * float(x @ x)

    rng = rng_from_token(token)
    for _ in range(n_points):
        x = radius * rng.standard_normal(oracle.dim)
        y = radius * rng.standard_normal(oracle.dim)
        mid = g(0.5 * (x + y))
        avg = 0.5 * (g(x) + g(y))
        if mid > avg + tol * max(1.0, abs(avg)):
            return WeakConvexityReport(ok=False, witness=(x, y))
    return WeakConvexityReport(ok=True)
