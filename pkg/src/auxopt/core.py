"""Deterministic randomness, the correlated-noise model, and the gradient-oracle contract.

Parameters, gradients, and momenta are plain 1-D float64 numpy arrays.  All
stochastic draws are keyed by a :class:`RandomToken`, so the same token always
reproduces the same noise realization and independent runs never share RNG
state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Array = np.ndarray

_KEY_MASK = (1 << 128) - 1
_COUNTER_MASK = (1 << 64) - 1


def as_vector(x, dim: Optional[int] = None) -> Array:
    """Validate and return a finite 1-D float64 array of length ``dim``."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


@dataclass(frozen=True)
class RandomToken:
    """Handle into a counter-based random stream.

    The same ``(stream_id, draw_index)`` always reproduces the same noise.
    """

    stream_id: int
    draw_index: int = 0

    def next(self) -> "RandomToken":
        return RandomToken(self.stream_id, self.draw_index + 1)


def rng_from_token(token: RandomToken) -> np.random.Generator:
    """Counter-based generator keyed by (stream_id, draw_index).

    Distinct draw indices use disjoint Philox counter blocks, so draws from
    different indices of the same stream never overlap.
    """
    key = token.stream_id & _KEY_MASK
    counter = (token.draw_index & _COUNTER_MASK) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def stream_fork(parent: RandomToken, label: int) -> RandomToken:
    """Deterministically derive an independent child stream from ``parent``.

    Distinct labels give statistically independent streams; the same
    (parent, label) always gives the same child.
    """
    ss = np.random.SeedSequence(
        entropy=(
            parent.stream_id & _KEY_MASK,
            parent.draw_index & _COUNTER_MASK,
            int(label) & _COUNTER_MASK,
        )
    )
    child_id = int.from_bytes(ss.generate_state(4, np.uint32).tobytes(), "little")
    return RandomToken(child_id, 0)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise levels of the f and h gradient estimates.

    ``rho`` is the per-coordinate cross-correlation between f-noise and
    h-noise drawn under a shared token; positive correlation shrinks the
    variance of the difference estimate below sigma_f^2 + sigma_h^2.
    """

    sigma_f: float = 0.0
    sigma_h: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.sigma_f < 0 or self.sigma_h < 0:
            raise ValueError("noise levels must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"correlation must lie in [-1, 1], got {self.rho}")

    @property
    def sigma_fmh_sq(self) -> float:
        """Implied variance of the difference estimator g_f - g_h."""
        v = self.sigma_f**2 + self.sigma_h**2 - 2.0 * self.rho * self.sigma_f * self.sigma_h
        return max(v, 0.0)

    @property
    def is_deterministic(self) -> bool:
        return self.sigma_f == 0.0 and self.sigma_h == 0.0


def draw_gaussian_noise(
    spec: NoiseSpec, token: RandomToken, dim: int, n: Optional[int] = None
) -> tuple[Array, Array]:
    """Draw a correlated (noise_f, noise_h) pair, deterministic in ``token``.

    Per-coordinate variances are sigma^2/dim so the expected squared norm of
    each vector equals sigma^2.  With ``n`` set, returns ``(n, dim)`` arrays
    of independent paired draws from the same stream.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = rng_from_token(token)
    shape = (dim,) if n is None else (n, dim)
    z1 = rng.standard_normal(shape)
    z2 = rng.standard_normal(shape)
    scale = 1.0 / math.sqrt(dim)
    noise_f = spec.sigma_f * scale * z1
    noise_h = spec.sigma_h * scale * (spec.rho * z1 + math.sqrt(1.0 - spec.rho**2) * z2)
    return noise_f, noise_h


GradFn = Callable[[Array, RandomToken], Array]
ExactGradFn = Callable[[Array], Array]
ValueFn = Callable[[Array], float]


@dataclass(frozen=True)
class OraclePair:
    """Stochastic gradient sources for the target f and the helper h.

    The three stochastic gradients are unbiased.  When ``grad_f`` and
    ``grad_h`` receive the same token their noise realizations are correlated
    per ``noise_spec``.  Analytic constants (smoothness, Hessian gap, bias
    bound, minimum value) are carried when the problem family knows them.
    """

    dim: int
    grad_f: GradFn
    grad_h: GradFn
    grad_f_minus_h: GradFn
    noise_spec: NoiseSpec
    exact_grad_f: Optional[ExactGradFn] = None
    exact_grad_h: Optional[ExactGradFn] = None
    f_value: Optional[ValueFn] = None
    h_value: Optional[ValueFn] = None
    lipschitz: Optional[float] = None
    hessian_gap: Optional[float] = None
    bias_m: Optional[float] = None
    bias_zeta_sq: Optional[float] = None
    f_star: Optional[float] = None

    @property
    def has_exact_gradients(self) -> bool:
        return self.exact_grad_f is not None and self.exact_grad_h is not None

    def exact_grad_f_minus_h(self, x: Array) -> Array:
        if not self.has_exact_gradients:
            raise ValueError("oracle does not expose exact gradients")
        return self.exact_grad_f(x) - self.exact_grad_h(x)


def gaussian_oracle(
    exact_grad_f: ExactGradFn,
    exact_grad_h: ExactGradFn,
    noise_spec: NoiseSpec,
    dim: int,
    **extras,
) -> OraclePair:
    """Build an OraclePair by adding correlated Gaussian noise to exact gradients."""

    def grad_f(x: Array, token: RandomToken) -> Array:
        nf, _ = draw_gaussian_noise(noise_spec, token, dim)
        return exact_grad_f(x) + nf

    def grad_h(x: Array, token: RandomToken) -> Array:
        _, nh = draw_gaussian_noise(noise_spec, token, dim)
        return exact_grad_h(x) + nh

    def grad_f_minus_h(x: Array, token: RandomToken) -> Array:
        nf, nh = draw_gaussian_noise(noise_spec, token, dim)
        return exact_grad_f(x) - exact_grad_h(x) + (nf - nh)

    return OraclePair(
        dim=dim,
        grad_f=grad_f,
        grad_h=grad_h,
        grad_f_minus_h=grad_f_minus_h,
        noise_spec=noise_spec,
        exact_grad_f=exact_grad_f,
        exact_grad_h=exact_grad_h,
        **extras,
    )
