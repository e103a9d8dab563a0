"""Kernel primitives: Gaussian kernel, boundary-corrected bandwidths,
circular period distances, and per-week exponential decay weights."""

from dataclasses import dataclass

import numpy as np

INV_SQRT_2PI = 0.3989422804014327

#: Half-hours per day and per week.
PERIODS_PER_DAY = 48
PERIODS_PER_WEEK = 336

#: Kernel support cutoff in bandwidth units; tail mass beyond is < 1e-15.
TRUNCATION = 8.0


@dataclass(frozen=True)
class BandwidthPolicy:
    """Default y-bandwidth plus the floor constant used near the boundaries."""

    h1: float
    epsilon: float = 0.001

    def __post_init__(self):
        if self.h1 <= 0:
            raise ValueError(f"h1 must be positive, got {self.h1}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def gaussian_kernel(u, h):
    """Scaled Gaussian kernel phi(u/h)/h, truncated to 0 beyond |u/h| > 8.

    Accepts scalars or arrays for ``u``.
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    z = np.asarray(u, dtype=np.float64) / h
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(np.abs(z) <= TRUNCATION,
                       np.exp(-0.5 * z * z) * (INV_SQRT_2PI / h), 0.0)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


def boundary_bandwidth(y, policy):
    """Bandwidth at evaluation point y in [0, 1], shrunk near the boundaries.

    Returns max(y, eps) when y < h1, max(1 - y, eps) when y > 1 - h1, and
    h1 otherwise.
    """
    if y < 0.0 or y > 1.0:
        raise ValueError(f"evaluation point must lie in [0, 1], got {y}")
    h1 = policy.h1
    eps = policy.epsilon
    if y < h1:
        return max(y, eps)
    if y > 1.0 - h1:
        return max(1.0 - y, eps)
    return h1


def boundary_bandwidths(ys, policy):
    """Vectorized :func:`boundary_bandwidth` over an array of grid points."""
    ys = np.asarray(ys, dtype=np.float64)
    h1 = policy.h1
    eps = policy.epsilon
    out = np.full_like(ys, h1)
    lo = ys < h1
    out[lo] = np.maximum(ys[lo], eps)
    hi = ~lo & (ys > 1.0 - h1)
    out[hi] = np.maximum(1.0 - ys[hi], eps)
    return out


def circular_distance(j, k, s):
    """Distance between periods j and k on a cycle of length s.

    min(|j - k|, s - |j - k|); periods 1 and s are one step apart. ``j``
    may be an array.
    """
    j = np.asarray(j)
    if np.any(j < 1) or np.any(j > s) or not 1 <= k <= s:
        raise ValueError(f"period indices must lie in [1, {s}]")
    d = np.abs(j - k)
    out = np.minimum(d, s - d)
    if out.ndim == 0:
        return int(out)
    return out


def decay_weight(n, t, lam, s2=PERIODS_PER_WEEK):
    """Exponential decay weight lam ** floor((n - t) / s2).

    Constant within week-aligned blocks counted back from origin n; the
    most recent week gets weight 1.
    """
    if t > n:
        raise ValueError(f"observation index {t} is after origin {n}")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"decay factor must lie in (0, 1], got {lam}")
    return lam ** ((n - t) // s2)


def decay_weights(n, t_indices, lam, s2=PERIODS_PER_WEEK):
    """Vectorized :func:`decay_weight` over an array of observation indices."""
    t_indices = np.asarray(t_indices)
    if np.any(t_indices > n):
        raise ValueError("observation indices must not exceed the origin")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"decay factor must lie in (0, 1], got {lam}")
    ages = (n - t_indices) // s2
    return np.power(lam, ages.astype(np.float64))
