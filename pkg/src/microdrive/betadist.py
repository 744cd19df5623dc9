"""Beta-distribution machinery for bounded continuous control.

Actions live on [-1, 1] per dimension.  Internally each dimension is a Beta
distribution on the unit interval, mapped to the action range by x -> 2x - 1.
All special functions are implemented here so the numeric core has no
external dependency beyond numpy; accuracy targets are checked against
high-precision oracles in the test suite.

Everything in this module is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Network heads can underflow/overflow through softplus; concentrations are
# clamped to this range before a BetaParams is constructed from them.
PARAM_MIN = 1e-3
PARAM_MAX = 1e3

LN2 = math.log(2.0)

# Lanczos approximation, g=7, n=9 (double precision, rel. err ~1e-13).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Asymptotic tail coefficients (Bernoulli numbers B_2n / 2n) for digamma.
_DIGAMMA_TAIL = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def _as_positive_array(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} must be finite and > 0, got {x!r}")
    return arr


def _maybe_scalar(value: np.ndarray, like) -> float | np.ndarray:
    if np.isscalar(like) or (isinstance(like, np.ndarray) and like.ndim == 0):
        return float(value[0])
    return value


def log_gamma(x) -> float | np.ndarray:
    """ln Gamma(x) for x > 0, via the Lanczos series (reflection below 0.5)."""
    arr = _as_positive_array(x, "x")
    small = arr < 0.5
    # Reflection: lgamma(x) = ln(pi / sin(pi x)) - lgamma(1 - x) for x < 0.5.
    z = np.where(small, 1.0 - arr, arr)

    series = np.full_like(z, _LANCZOS_COEF[0])
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        series = series + c / (z - 1.0 + i)
    t = z + _LANCZOS_G - 0.5
    lg = 0.5 * math.log(2.0 * math.pi) + (z - 0.5) * np.log(t) - t + np.log(series)

    if np.any(small):
        refl = np.log(np.pi / np.sin(np.pi * arr[small])) - lg[small]
        lg[small] = refl
    return _maybe_scalar(lg, x)


def digamma(x) -> float | np.ndarray:
    """psi(x) = d/dx ln Gamma(x) for x > 0."""
    arr = _as_positive_array(x, "x")
    z = arr.copy()
    acc = np.zeros_like(z)
    # Shift into the asymptotic regime: psi(x) = psi(x+1) - 1/x.
    while np.any(z < 6.0):
        lo = z < 6.0
        acc[lo] -= 1.0 / z[lo]
        z[lo] += 1.0
    inv2 = 1.0 / (z * z)
    tail = np.zeros_like(z)
    power = inv2.copy()
    for c in _DIGAMMA_TAIL:
        tail += c * power
        power *= inv2
    out = acc + np.log(z) - 0.5 / z - tail
    return _maybe_scalar(out, x)


def trigamma(x) -> float | np.ndarray:
    """psi'(x) for x > 0 (needed for gradients of entropy/KL terms)."""
    arr = _as_positive_array(x, "x")
    z = arr.copy()
    acc = np.zeros_like(z)
    while np.any(z < 6.0):
        lo = z < 6.0
        acc[lo] += 1.0 / (z[lo] * z[lo])
        z[lo] += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    # 1/x + 1/(2x^2) + sum B_2n / x^(2n+1)
    tail = inv + 0.5 * inv2
    power = inv * inv2
    for c in (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0):
        tail += c * power
        power *= inv2
    out = acc + tail
    return _maybe_scalar(out, x)


def log_beta_fn(alpha, beta) -> float | np.ndarray:
    """ln B(alpha, beta) = lgamma(a) + lgamma(b) - lgamma(a+b)."""
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    out = np.asarray(log_gamma(a)) + np.asarray(log_gamma(b)) - np.asarray(log_gamma(a + b))
    if np.isscalar(alpha) and np.isscalar(beta):
        return float(out)
    return out


@dataclass(frozen=True)
class BetaParams:
    """Concentration parameters of one action dimension.

    ``alpha`` is the concentration on 1 and ``beta`` the concentration on 0;
    both must be finite and strictly positive.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError(f"non-finite Beta parameters: {self}")
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError(f"Beta parameters must be > 0: {self}")

    @classmethod
    def from_network(cls, alpha: float, beta: float) -> "BetaParams":
        """Construct with the network-output clamp applied."""
        return cls(
            float(np.clip(alpha, PARAM_MIN, PARAM_MAX)),
            float(np.clip(beta, PARAM_MIN, PARAM_MAX)),
        )

    def mean_unit(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class ActionDist:
    """Two independent Beta dimensions (steer, accel) on scaled support [-1, 1]."""

    steer: BetaParams
    accel: BetaParams

    def dims(self) -> tuple[BetaParams, BetaParams]:
        return (self.steer, self.accel)

    def params_array(self) -> np.ndarray:
        """(alpha_steer, beta_steer, alpha_accel, beta_accel) as float64."""
        return np.array(
            [self.steer.alpha, self.steer.beta, self.accel.alpha, self.accel.beta],
            dtype=np.float64,
        )

    @classmethod
    def from_params_array(cls, arr) -> "ActionDist":
        a = np.asarray(arr, dtype=np.float64).reshape(4)
        return cls(BetaParams(float(a[0]), float(a[1])), BetaParams(float(a[2]), float(a[3])))


def beta_log_pdf(p: BetaParams, x: float) -> float:
    """Log density of Beta(p) at x in the open unit interval."""
    if not (0.0 < x < 1.0):
        raise ValueError(f"x must lie in (0, 1), got {x}")
    return (
        (p.alpha - 1.0) * math.log(x)
        + (p.beta - 1.0) * math.log1p(-x)
        - log_beta_fn(p.alpha, p.beta)
    )


def beta_entropy(p: BetaParams) -> float:
    """Differential entropy on the unit support.

    On the scaled support [-1, 1] the entropy is this value plus ln 2
    (affine change of variables).
    """
    a, b = p.alpha, p.beta
    return float(
        log_beta_fn(a, b)
        - (a - 1.0) * digamma(a)
        - (b - 1.0) * digamma(b)
        + (a + b - 2.0) * digamma(a + b)
    )


def beta_kl(p: BetaParams, q: BetaParams) -> float:
    """KL(p || q) between two Beta distributions.

    Invariant under the shared affine support map, so the value is the same
    on unit and scaled support.
    """
    a1, b1 = p.alpha, p.beta
    a2, b2 = q.alpha, q.beta
    return float(
        log_beta_fn(a2, b2)
        - log_beta_fn(a1, b1)
        + (a1 - a2) * digamma(a1)
        + (b1 - b2) * digamma(b1)
        + (a2 - a1 + b2 - b1) * digamma(a1 + b1)
    )


def beta_mode_unit(p: BetaParams) -> float:
    """Deterministic output on the unit support.

    The mode (alpha-1)/(alpha+beta-2) when both concentrations exceed 1, the
    boundary mode when exactly one does, and the mean when the mode is not
    uniquely defined (bimodal or uniform cases).
    """
    a, b = p.alpha, p.beta
    if a > 1.0 and b > 1.0:
        return (a - 1.0) / (a + b - 2.0)
    if a <= 1.0 and b > 1.0:
        return 0.0
    if a > 1.0 and b <= 1.0:
        return 1.0
    return p.mean_unit()


def unit_to_scaled(x: float) -> float:
    return 2.0 * x - 1.0


def scaled_to_unit(x: float) -> float:
    return 0.5 * (x + 1.0)


def deterministic_action(p: BetaParams) -> float:
    """Deterministic output mapped to the scaled support [-1, 1]."""
    return unit_to_scaled(beta_mode_unit(p))


def _gamma_draw(shape_k: float, rng: np.random.Generator) -> float:
    """One Gamma(shape_k, 1) draw via Marsaglia-Tsang squeeze."""
    if shape_k < 1.0:
        # Boost: Gamma(k) = Gamma(k+1) * U^(1/k)
        u = rng.random()
        return _gamma_draw(shape_k + 1.0, rng) * u ** (1.0 / shape_k)
    d = shape_k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def sample(p: BetaParams, rng: np.random.Generator) -> float:
    """Seed-deterministic draw from Beta(p) on the open unit interval."""
    g1 = _gamma_draw(p.alpha, rng)
    g2 = _gamma_draw(p.beta, rng)
    x = g1 / (g1 + g2)
    # Keep strictly inside (0, 1) so log-densities stay finite.
    eps = 1e-7
    return min(max(x, eps), 1.0 - eps)


def sample_action_unit(dist: ActionDist, rng: np.random.Generator) -> tuple[float, float]:
    """Draw (steer, accel) on unit support; order of draws is fixed."""
    return (sample(dist.steer, rng), sample(dist.accel, rng))


def action_log_prob_unit(dist: ActionDist, steer_u: float, accel_u: float) -> float:
    """Joint log density of a unit-support action pair."""
    return beta_log_pdf(dist.steer, steer_u) + beta_log_pdf(dist.accel, accel_u)


def dist_entropy_scaled(dist: ActionDist) -> float:
    """Summed per-dimension entropy on the scaled support."""
    return beta_entropy(dist.steer) + beta_entropy(dist.accel) + 2.0 * LN2


def dist_kl(p: ActionDist, q: ActionDist) -> float:
    """Summed per-dimension KL(p || q)."""
    return beta_kl(p.steer, q.steer) + beta_kl(p.accel, q.accel)


def deterministic_action_pair(dist: ActionDist) -> tuple[float, float]:
    """Deterministic (steer, accel) on the scaled support."""
    return (deterministic_action(dist.steer), deterministic_action(dist.accel))
