"""Numeric substrate: float64 tensors, counter-based RNG streams, stable primitives.

All array quantities in the pipeline are plain numpy float64 arrays; this
module owns the randomness and the handful of elementary functions whose
numerical behaviour the rest of the code depends on. Dense tensors stay
64-bit throughout: the belief transform differences nearly-equal values,
which 32-bit precision would wash out.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "RngStream",
    "gaussian_sample",
    "softmax_stable",
    "log_softmax_stable",
    "gamma_sample",
    "dirichlet_sample",
    "softplus",
    "softplus_inv",
]


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Backed by the Philox counter-based generator, so streams with distinct
    ids are statistically independent and any (seed, stream_id) pair always
    reproduces the same draw sequence. Parallel workers must each own a
    distinct stream id; a stream itself is stateful and not shareable.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, offset: int) -> "RngStream":
        """Fresh stream at id stream_id + offset, independent of this one.

        Callers allocate offsets from disjoint documented ranges so derived
        streams never collide.
        """
        return RngStream(self.seed, self.stream_id + offset)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def gaussian_sample(mu: float, sigma: float, rng: RngStream) -> float:
    """One draw from N(mu, sigma^2); sigma == 0 returns mu without consuming draws."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return float(mu)
    return float(mu + sigma * rng.normal())


def softmax_stable(logits) -> np.ndarray:
    """Shift-invariant softmax of a rank-1 array; safe for magnitudes ~1e3."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("softmax_stable expects a non-empty rank-1 array")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax_stable requires finite entries")
    e = np.exp(z - z.max())
    # keep entries strictly positive even where exp underflows (|z| ~ 1e3)
    return np.clip(e / e.sum(), 5e-324, 1.0)


def log_softmax_stable(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax for a (n, C) logit matrix."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _gamma_impl(alpha: float, rng: RngStream) -> tuple[float, float]:
    """Marsaglia-Tsang Gamma(alpha, 1) draw, returned as (value, log value).

    alpha < 1 uses the boost transform Gamma(a) = Gamma(a+1) * U^(1/a), with
    the uniform drawn before the recursive call so the draw order is fixed.
    The log value stays finite where the value itself underflows (tiny alpha).
    """
    if alpha < 1.0:
        u = float(rng.uniform())
        value, logvalue = _gamma_impl(alpha + 1.0, rng)
        boost_log = math.log(u) / alpha
        return value * u ** (1.0 / alpha), logvalue + boost_log
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = float(rng.normal())
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = float(rng.uniform())
        if u < 1.0 - 0.0331 * x ** 4 or math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v, math.log(d) + 3.0 * math.log(t)


def gamma_sample(alpha: float, rng: RngStream) -> float:
    """Gamma(alpha, 1) draw via Marsaglia-Tsang (fixed algorithm, fixed draw order)."""
    if alpha <= 0:
        raise ValueError(f"gamma shape must be > 0, got {alpha}")
    return _gamma_impl(float(alpha), rng)[0]


def dirichlet_sample(alpha, rng: RngStream) -> np.ndarray:
    """Dirichlet draw: K independent Gamma(alpha_k, 1) draws normalized by their sum.

    Normalization happens in log space so extreme concentration parameters
    (alpha ~ 1e-6 after positivity clamping) still yield a valid strictly
    positive simplex point instead of 0/0.
    """
    a = np.asarray(alpha, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("alpha must be a non-empty rank-1 array")
    if np.any(a <= 0):
        raise ValueError(f"all Dirichlet parameters must be > 0, got {a}")
    logs = np.array([_gamma_impl(float(ak), rng)[1] for ak in a])
    x = np.exp(logs - logs.max())
    x = np.clip(x / x.sum(), 1e-300, None)
    return x / x.sum()


def softplus(x):
    """log(1 + exp(x)) without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus_inv(y):
    """Inverse of softplus: log(exp(y) - 1), y > 0."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("softplus_inv requires y > 0")
    return y + np.log(-np.expm1(-y))
