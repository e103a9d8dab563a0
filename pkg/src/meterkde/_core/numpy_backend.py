"""Pure-numpy implementations of the hot kernels.

Mirrors the compiled extension in ``fastcore.pyx``; both backends must
produce results that agree to floating-point roundoff. Used automatically
when the extension is not built.
"""

import numpy as np

NAME = "numpy"

_INV_SQRT_2PI = 0.3989422804014327
# Kernel support truncated at |u/h| > 8; the discarded tail is below 1e-15.
_TRUNCATION = 8.0


def kde_on_grid(values, weights, grid, h_grid):
    """Weighted Gaussian KDE evaluated at every grid point.

    f(g) = sum_t w_t * phi((Y_t - g) / h(g)) / h(g), with a per-grid-point
    bandwidth h(g). Weights are used as given (callers normalize).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    h_grid = np.ascontiguousarray(h_grid, dtype=np.float64)
    u = (values[None, :] - grid[:, None]) / h_grid[:, None]
    mask = np.abs(u) <= _TRUNCATION
    k = np.where(mask, np.exp(-0.5 * u * u), 0.0)
    return (k @ weights) * (_INV_SQRT_2PI / h_grid)


def crps_grid(xs, cdf, obs):
    """CRPS of a piecewise-linear CDF stored on grid nodes.

    The CDF is anchored at (0, 0), takes the stored values at the grid
    points, and is constant 1 beyond the last point. The integration cell
    containing the observation is split so the indicator is handled
    exactly; each linear segment is then integrated in closed form.
    """
    xs = np.asarray(xs, dtype=np.float64)
    cdf = np.asarray(cdf, dtype=np.float64)
    z = np.concatenate(([0.0], xs))
    f = np.concatenate(([0.0], cdf))
    if obs > z[-1]:
        z = np.append(z, obs)
        f = np.append(f, f[-1])
    elif 0.0 < obs < z[-1]:
        i = int(np.searchsorted(z, obs))
        if z[i] != obs:
            fo = f[i - 1] + (f[i] - f[i - 1]) * (obs - z[i - 1]) / (z[i] - z[i - 1])
            z = np.insert(z, i, obs)
            f = np.insert(f, i, fo)
    # Indicator 1(z >= obs) is constant on every segment after the split.
    c = (z[:-1] >= obs).astype(np.float64)
    fa = f[:-1] - c
    fb = f[1:] - c
    seg = (z[1:] - z[:-1]) / 3.0 * (fa * fa + fa * fb + fb * fb)
    return float(seg.sum())


def hwt_filter(y, d_idx, w_idx, alpha, delta, omega, phi,
               level, last_error, intraday, intraweek, err_out):
    """Run the double-seasonal error-correction recursion over a series.

    ``intraday``, ``intraweek`` and ``err_out`` are updated in place;
    returns the final (level, last_error). Seasonal index arrays hold the
    latest value per period slot; ``d_idx``/``w_idx`` are 0-based slots.
    """
    n = y.shape[0]
    for t in range(n):
        d = d_idx[t]
        w = w_idx[t]
        e = y[t] - (level + intraday[d] + intraweek[w] + phi * last_error)
        level += alpha * e
        intraday[d] += delta * e
        intraweek[w] += omega * e
        last_error = e
        err_out[t] = e
    return level, last_error
