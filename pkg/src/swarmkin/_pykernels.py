"""Pure numpy versions of the hot loops.

Arithmetic is kept operation-for-operation identical to ``_ckernels.pyx`` so
that both backends turn the same uniform draws into the same trajectory.
"""
import numpy as np


def abm_advance(x, v, unif, dt, gamma0, b, radius):
    """Advance positions ``x`` and velocities ``v`` in place, one row of ``unif`` per step.

    ``radius < 0`` selects the global kernel. Returns the mean velocity after
    each step and the number of flips in each step.
    """
    n_steps, n = unif.shape
    u_trace = np.empty(n_steps)
    flips = np.empty(n_steps, dtype=np.int64)
    total = int(v.sum(dtype=np.int64))
    for t in range(n_steps):
        vf = v.astype(np.float64)
        if radius < 0.0:
            u_loc = np.full(n, total / n)
        else:
            d = np.abs(x[:, None] - x[None, :])
            d = np.minimum(d, 1.0 - d)
            w = d <= radius
            num = (w * v[None, :]).sum(axis=1, dtype=np.int64)
            den = w.sum(axis=1, dtype=np.int64)
            u_loc = num / den
        diff = vf - u_loc
        rate = gamma0 + b * (diff * diff)
        flip = unif[t] < rate * dt
        k = int(flip.sum())
        if k:
            v[flip] = -v[flip]
            total = int(v.sum(dtype=np.int64))
        xn = x + v * dt
        xn = np.where(xn >= 1.0, xn - 1.0, xn)
        xn = np.where(xn < 0.0, xn + 1.0, xn)
        xn = np.where(xn >= 1.0, 0.0, xn)
        x[:] = xn
        u_trace[t] = total / n
        flips[t] = k
    return u_trace, flips


def window_counts(z, radius, trailing, cdf, plus_prob, upos, uvel):
    """Per replicate, count sampled agents inside the window around ``z`` and sum their velocities.

    Positions come from the piecewise-constant density tabulated by ``cdf``
    (cell edges ``k / M``); an agent in cell ``k`` moves right when its
    velocity draw falls below ``plus_prob[k]``.
    """
    m = plus_prob.shape[0]
    k = np.searchsorted(cdf, upos, side="right") - 1
    np.clip(k, 0, m - 1, out=k)
    lo = cdf[k]
    width = cdf[k + 1] - lo
    frac = np.where(width > 0.0, (upos - lo) / np.where(width > 0.0, width, 1.0), 0.0)
    x = (k + frac) / m
    if trailing:
        d = z - x
        d = np.where(d < 0.0, d + 1.0, d)
    else:
        d = np.abs(x - z)
        d = np.minimum(d, 1.0 - d)
    inside = d <= radius
    vel = np.where(uvel < plus_prob[k], 1, -1)
    counts = inside.sum(axis=1, dtype=np.int64)
    sums = np.where(inside, vel, 0).sum(axis=1, dtype=np.int64)
    return counts, sums
