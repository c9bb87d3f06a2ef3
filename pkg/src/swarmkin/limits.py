"""Monte Carlo checks of the finite-N averages behind the mean-field limit.

For ``N - 1`` agents drawn independently from ``p(x, +-1) = (rho +- j) / 2``,
the kernel-weighted mean velocity at a probe point ``z`` is

    u = sum_m w(z - x_m) v_m / sum_m w(z - x_m)      (u = 0 for an empty window)

and ``Q_N = E[u]``, ``R_N = E[u^2]``. For a 0/1 window with probability mass
``I`` and flux ``K`` the counts are binomial, which gives the exact finite-N
values used alongside the limits::

    Q_N = (K/I) (1 - (1-I)^(N-1))
    R_N = (K/I)^2 (1 - (1-I)^(N-1)) + (1 - (K/I)^2) E[1/k; k >= 1],  k ~ Bin(N-1, I)
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _backend
from .core import DEFAULT_SEED, InteractionKernel, KernelError, make_rng
from .kinetic import eta_closure

__all__ = [
    "SampledPopulation",
    "MCEstimate",
    "ShrinkRow",
    "window_integrals",
    "finite_n_moments",
    "qn_limit",
    "rn_limit",
    "shrink_limit",
    "mc_QN",
    "mc_RN",
    "mc_shrink_limits",
]

# stream tags keep the Q, R and shrinking samplers on disjoint streams
_TAG_Q, _TAG_R, _TAG_SHRINK = 1, 2, 3
_BATCH_DRAWS = 4_000_000


@dataclass(frozen=True, eq=False)
class SampledPopulation:
    """Piecewise-constant ``(rho, j)`` on ``M`` equal cells of the unit circle.

    ``rho`` is a probability density (``sum(rho) / M == 1``) and ``|j| <= rho``.
    """

    rho: np.ndarray
    j: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        j = np.asarray(self.j, dtype=float)
        if rho.ndim != 1 or rho.shape != j.shape or rho.size == 0:
            raise ValueError("rho and j must be 1-d arrays of equal length")
        if np.any(rho < 0.0):
            raise ValueError("rho must be nonnegative")
        if abs(rho.mean() - 1.0) > 1e-9:
            raise ValueError("rho must integrate to 1")
        if np.any(np.abs(j) > rho * (1.0 + 1e-12)):
            raise ValueError("|j| must not exceed rho")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "j", j)

    @classmethod
    def from_functions(cls, rho_fn, j_fn, M: int = 400) -> SampledPopulation:
        """Tabulate at cell centres; both fields are scaled so that ``rho`` integrates to 1."""
        x = (np.arange(M) + 0.5) / M
        rho = np.asarray(rho_fn(x), dtype=float) * np.ones(M)
        j = np.asarray(j_fn(x), dtype=float) * np.ones(M)
        scale = 1.0 / rho.mean()
        return cls(rho * scale, j * scale)

    @classmethod
    def uniform(cls, j: float = 0.0) -> SampledPopulation:
        return cls(np.ones(1), np.full(1, float(j)))

    @property
    def M(self) -> int:
        return self.rho.shape[0]

    @property
    def cdf(self) -> np.ndarray:
        c = np.concatenate(([0.0], np.cumsum(self.rho) / self.M))
        return c / c[-1]

    @property
    def plus_prob(self) -> np.ndarray:
        out = np.full(self.M, 0.5)
        pos = self.rho > 0.0
        out[pos] = (self.rho[pos] + self.j[pos]) / (2.0 * self.rho[pos])
        return out

    def sample(self, n: int, rng: np.random.Generator):
        """Draw ``n`` agents; positions by inverse CDF, then velocities."""
        upos = rng.random(n)
        uvel = rng.random(n)
        return self._place(upos, uvel)

    def _place(self, upos, uvel):
        cdf = self.cdf
        k = np.clip(np.searchsorted(cdf, upos, side="right") - 1, 0, self.M - 1)
        width = cdf[k + 1] - cdf[k]
        frac = np.divide(upos - cdf[k], width, out=np.zeros_like(upos), where=width > 0)
        x = (k + frac) / self.M
        v = np.where(uvel < self.plus_prob[k], 1, -1).astype(np.int8)
        return x, v

    def _primitive(self, values, x):
        """``int_0^x values`` for any real ``x``, continued periodically."""
        cum = np.concatenate(([0.0], np.cumsum(values))) / self.M
        whole = math.floor(x)
        t = (x - whole) * self.M
        k = min(int(t), self.M - 1)
        return whole * cum[-1] + cum[k] + (t - k) * values[k] / self.M

    def integral(self, lo: float, hi: float):
        """``(int rho, int j)`` over ``[lo, hi]`` on the circle, ``hi - lo <= 1``."""
        return (
            self._primitive(self.rho, hi) - self._primitive(self.rho, lo),
            self._primitive(self.j, hi) - self._primitive(self.j, lo),
        )

    def at(self, z: float):
        k = min(int((z % 1.0) * self.M), self.M - 1)
        return float(self.rho[k]), float(self.j[k])


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


@dataclass(frozen=True)
class ShrinkRow:
    n_agents: int
    alpha: float
    q: MCEstimate
    r: MCEstimate
    q_limit: float
    r_limit: float
    q_finite: float
    r_finite: float


def _kernel_window(kernel: InteractionKernel, n_agents: int):
    """``(radius, trailing)`` of a 0/1 kernel; radius 1 covers the whole circle."""
    if kernel.kind == "dirac":
        raise KernelError("the Dirac kernel has no finite-N window")
    r = kernel.radius(n_agents)
    return (1.0, False) if r is None else (float(r), False)


def window_integrals(pop: SampledPopulation, z: float, radius: float, trailing: bool = False):
    """Mass ``I`` and flux ``K`` of the window around ``z``."""
    if radius >= 0.5 and not trailing:
        return pop.integral(0.0, 1.0)
    if trailing:
        return pop.integral(z - min(radius, 1.0), z)
    return pop.integral(z - radius, z + radius)


def finite_n_moments(I: float, m: float, n_agents: int):
    """Exact ``(Q_N, R_N)`` for a window of mass ``I`` and conditional mean velocity ``m``."""
    n = n_agents - 1
    if I <= 0.0 or n < 1:
        return 0.0, 0.0
    p_hit = -math.expm1(n * math.log1p(-I)) if I < 1.0 else 1.0
    k = np.arange(1, n + 1)
    inv_k = float(np.sum(stats.binom.pmf(k, n, I) / k))
    return m * p_hit, m * m * p_hit + (1.0 - m * m) * inv_k


def qn_limit(pop: SampledPopulation, kernel: InteractionKernel, z: float, n_agents: int | None = None) -> float:
    """``(1/I) int w(z - y) j(y) dy``."""
    radius, trailing = _kernel_window(kernel, n_agents or 1)
    I, K = window_integrals(pop, z, radius, trailing)
    if I <= 0.0:
        raise ValueError("Lemma hypothesis violated: I = 0")
    return K / I


def rn_limit(pop: SampledPopulation, kernel: InteractionKernel, z: float, n_agents: int | None = None) -> float:
    return qn_limit(pop, kernel, z, n_agents) ** 2


def shrink_limit(alpha: float, rho_z: float, j_z: float):
    """Limits of ``(Q_N, R_N)`` for the trailing window ``[z - N^-alpha, z]``."""
    if alpha <= 0.0:
        raise ValueError("alpha must be > 0")
    if rho_z <= 0.0:
        raise ValueError("need rho(z) > 0")
    m = j_z / rho_z
    if alpha < 1.0:
        return m, m * m
    if alpha == 1.0:
        return m * -math.expm1(-rho_z), float(eta_closure(rho_z, j_z))
    return 0.0, 0.0


def _u_batch(args):
    pop, z, radius, trailing, n_agents, seed, stream, first, count, backend = args
    kern = _backend.get_kernels(backend)
    n = n_agents - 1
    upos = np.empty((count, n))
    uvel = np.empty((count, n))
    for i in range(count):
        rng = make_rng(seed, *stream, first + i)
        upos[i] = rng.random(n)
        uvel[i] = rng.random(n)
    counts, sums = kern.window_counts(float(z), float(radius), bool(trailing), pop.cdf, pop.plus_prob, upos, uvel)
    u = np.zeros(count)
    hit = counts > 0
    u[hit] = sums[hit] / counts[hit]
    return u


def _sample_u(pop, z, radius, trailing, n_agents, replicates, seed, stream, workers=1, backend=None):
    """One mean-velocity sample per replicate, replicate ``r`` on stream ``(*stream, r)``."""
    if n_agents < 2:
        raise ValueError("n_agents must be >= 2")
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    batch = max(1, _BATCH_DRAWS // (2 * (n_agents - 1)))
    jobs = [
        (pop, z, radius, trailing, n_agents, seed, stream, s, min(batch, replicates - s), backend)
        for s in range(0, replicates, batch)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_u_batch, jobs))
    else:
        parts = [_u_batch(j) for j in jobs]
    return np.concatenate(parts)


def _estimate(values: np.ndarray) -> MCEstimate:
    return MCEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), int(values.size))


def _checked_window(pop, kernel, n_agents, z):
    radius, trailing = _kernel_window(kernel, n_agents)
    I, _ = window_integrals(pop, z, radius, trailing)
    if I <= 0.0:
        raise ValueError("Lemma hypothesis violated: I = 0 for this kernel and population")
    return radius, trailing


def mc_QN(
    pop: SampledPopulation,
    kernel: InteractionKernel,
    n_agents: int,
    z: float,
    replicates: int = 10_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    backend: str | None = None,
) -> MCEstimate:
    """Monte Carlo ``Q_N`` at ``z``; the window holds ``N - 1`` sampled agents."""
    radius, trailing = _checked_window(pop, kernel, n_agents, z)
    u = _sample_u(pop, z, radius, trailing, n_agents, replicates, seed, (_TAG_Q, n_agents), workers, backend)
    return _estimate(u)


def mc_RN(
    pop: SampledPopulation,
    kernel: InteractionKernel,
    n_agents: int,
    z: float,
    replicates: int = 10_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    backend: str | None = None,
) -> MCEstimate:
    """Monte Carlo ``R_N``, the mean of the squared window velocity."""
    radius, trailing = _checked_window(pop, kernel, n_agents, z)
    u = _sample_u(pop, z, radius, trailing, n_agents, replicates, seed, (_TAG_R, n_agents), workers, backend)
    return _estimate(u * u)


def mc_shrink_limits(
    pop: SampledPopulation,
    alpha: float,
    n_list,
    z: float,
    replicates: int = 10_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    backend: str | None = None,
) -> list[ShrinkRow]:
    """``Q_N`` and ``R_N`` for the trailing window ``[z - N^-alpha, z]``.

    Each row carries the limit for ``alpha`` and the exact finite-N values.
    """
    rho_z, j_z = pop.at(z)
    q_lim, r_lim = shrink_limit(alpha, rho_z, j_z)
    rows = []
    for n in n_list:
        n = int(n)
        radius = min(n ** -float(alpha), 1.0)
        I, K = window_integrals(pop, z, radius, trailing=True)
        q_fin, r_fin = finite_n_moments(I, K / I if I > 0 else 0.0, n)
        stream = (_TAG_SHRINK, int(round(alpha * 1000)), n)
        u = _sample_u(pop, z, radius, True, n, replicates, seed, stream, workers, backend)
        rows.append(ShrinkRow(n, float(alpha), _estimate(u), _estimate(u * u), q_lim, r_lim, q_fin, r_fin))
    return rows
