"""N-agent velocity-jump simulation on the periodic unit interval.

Agents move at unit speed and reverse direction at rate
``gamma0 + b * (v_i - u_i_loc)**2``, where ``u_i_loc`` is the kernel-weighted
mean velocity around agent ``i`` (the agent itself included).

Two time discretizations are available. The default ``"fixed"`` mode flips
each agent with probability ``rate * dt`` per step, rates taken from the
pre-step configuration for all agents at once, then transports with the
post-flip velocities. ``"thinning"`` simulates the jump process exactly in
law by thinning a Poisson clock of rate ``N * (gamma0 + 4b)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (
    InteractionKernel,
    KernelError,
    MeanVelocitySeries,
    ModelParams,
    SwarmState,
    make_rng,
    periodic_distance,
    validate_params,
)

__all__ = [
    "StepReport",
    "AbmRun",
    "SwitchingRecord",
    "local_mean_velocity",
    "switch_rate",
    "step",
    "run",
    "run_thinning",
    "u_histogram",
    "switching_times",
    "is_bimodal",
]

_BLOCK = 8192


@dataclass(frozen=True)
class StepReport:
    n_switches: int
    u_after: float


@dataclass
class AbmRun:
    series: MeanVelocitySeries
    final_state: SwarmState
    n_switches: int
    trajectory: list[SwarmState] | None = None


@dataclass(frozen=True)
class SwitchingRecord:
    durations: np.ndarray
    threshold: float

    @property
    def count(self) -> int:
        return int(self.durations.shape[0])

    @property
    def mean(self) -> float:
        return float(self.durations.mean()) if self.count else float("nan")

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return float("nan")
        return float(self.durations.std(ddof=1) / np.sqrt(self.count))


def _radius(kernel: InteractionKernel, n_agents: int) -> float:
    if kernel.kind == "dirac":
        raise KernelError("the Dirac kernel is a PDE closure; it cannot drive the agent model")
    r = kernel.radius(n_agents)
    return -1.0 if r is None else float(r)


def local_mean_velocity(state: SwarmState, kernel: InteractionKernel, i: int | None = None):
    """Kernel-weighted mean velocity seen by agent ``i`` (all agents when ``i`` is None)."""
    r = _radius(kernel, state.n_agents)
    v = state.velocities.astype(float)
    if r < 0:
        u = np.full(state.n_agents, v.mean())
    else:
        d = periodic_distance(state.positions[:, None], state.positions[None, :])
        w = (d <= r).astype(float)
        u = (w @ v) / w.sum(axis=1)
    return u if i is None else float(u[i])


def switch_rate(v, u_loc, p: ModelParams):
    """Reversal rate ``gamma0 + b (1 - u)^2`` for ``v = +1`` and ``gamma0 + b (1 + u)^2`` for ``v = -1``."""
    u_loc = np.asarray(u_loc, dtype=float)
    if np.any(np.abs(u_loc) > 1.0 + 1e-12):
        raise ValueError("local mean velocity must lie in [-1, 1]")
    out = p.gamma0 + p.b * (np.asarray(v, dtype=float) - u_loc) ** 2
    return float(out) if out.ndim == 0 else out


def step(state: SwarmState, p: ModelParams, rng: np.random.Generator, backend: str | None = None):
    """One synchronous fixed-step update. Returns ``(new_state, StepReport)``."""
    validate_params(p)
    kern = _backend.get_kernels(backend)
    x = np.array(state.positions, dtype=np.float64)
    v = np.array(state.velocities, dtype=np.int8)
    unif = rng.random((1, state.n_agents))
    u_trace, flips = kern.abm_advance(x, v, unif, p.dt, p.gamma0, p.b, _radius(p.kernel, state.n_agents))
    new = SwarmState(x, v, state.time + p.dt)
    return new, StepReport(int(flips[0]), float(u_trace[0]))


def run(
    p: ModelParams,
    n_steps: int,
    record_stride: int = 1,
    state_stride: int | None = None,
    initial: SwarmState | None = None,
    replicate: int = 0,
    backend: str | None = None,
) -> AbmRun:
    """Iterate :func:`step` ``n_steps`` times.

    The mean velocity is recorded after every ``record_stride``-th step, and
    a full copy of the state after every ``state_stride``-th step when given.
    The stream is ``make_rng(p.seed, replicate)``; it draws the initial state
    (unless ``initial`` is passed) followed by one uniform per agent per step.
    """
    validate_params(p)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    kern = _backend.get_kernels(backend)
    rng = make_rng(p.seed, replicate)
    radius = _radius(p.kernel, p.n_agents)
    state = initial if initial is not None else SwarmState.random(p.n_agents, rng)
    if state.n_agents != p.n_agents:
        raise ValueError("initial state size does not match n_agents")
    x = np.array(state.positions, dtype=np.float64)
    v = np.array(state.velocities, dtype=np.int8)
    t0 = state.time

    u_parts = []
    trajectory = [] if state_stride else None
    n_switches = 0
    done = 0
    block = _BLOCK if not state_stride else max(1, min(_BLOCK, state_stride))
    while done < n_steps:
        k = min(block, n_steps - done)
        unif = rng.random((k, p.n_agents))
        u_trace, flips = kern.abm_advance(x, v, unif, p.dt, p.gamma0, p.b, radius)
        n_switches += int(flips.sum())
        u_parts.append(u_trace)
        done += k
        if state_stride and done % state_stride == 0:
            trajectory.append(SwarmState(x.copy(), v.copy(), t0 + done * p.dt))
    u_all = np.concatenate(u_parts)
    idx = np.arange(record_stride, n_steps + 1, record_stride)
    series = MeanVelocitySeries(t0 + idx * p.dt, u_all[idx - 1], p.n_agents)
    final = SwarmState(x, v, t0 + n_steps * p.dt)
    return AbmRun(series, final, n_switches, trajectory)


def run_thinning(
    p: ModelParams,
    t_end: float,
    sample_dt: float,
    initial: SwarmState | None = None,
    replicate: int = 0,
) -> AbmRun:
    """Exact-in-law simulation by thinning; ``u`` is sampled every ``sample_dt``.

    Slow pure-Python reference. ``p.dt`` is not used.
    """
    validate_params(p)
    if t_end <= 0 or sample_dt <= 0:
        raise ValueError("t_end and sample_dt must be positive")
    rng = make_rng(p.seed, replicate)
    radius = _radius(p.kernel, p.n_agents)
    state = initial if initial is not None else SwarmState.random(p.n_agents, rng)
    n = state.n_agents
    x = np.array(state.positions, dtype=float)
    v = np.array(state.velocities, dtype=np.int8)
    bound = p.gamma0 + 4.0 * p.b
    sample_times = np.arange(sample_dt, t_end + 0.5 * sample_dt, sample_dt)
    samples = np.empty(sample_times.shape[0])
    t = 0.0
    si = 0
    n_switches = 0
    while si < sample_times.shape[0]:
        wait = rng.exponential(1.0 / (n * bound)) if bound > 0 else np.inf
        t_next = t + wait
        while si < sample_times.shape[0] and sample_times[si] <= t_next:
            samples[si] = v.sum() / n
            si += 1
        if si >= sample_times.shape[0]:
            break
        x = np.mod(x + v * wait, 1.0)
        t = t_next
        i = rng.integers(n)
        if radius < 0:
            u_i = v.sum() / n
        else:
            d = periodic_distance(x[i], x)
            w = d <= radius
            u_i = v[w].sum() / w.sum()
        rate = p.gamma0 + p.b * (v[i] - u_i) ** 2
        if rng.random() * bound < rate:
            v[i] = -v[i]
            n_switches += 1
    x = np.mod(x + v * (t_end - t), 1.0)
    series = MeanVelocitySeries(state.time + sample_times, samples, n)
    return AbmRun(series, SwarmState(x, v, state.time + t_end), n_switches)


def u_histogram(series: MeanVelocitySeries) -> tuple[np.ndarray, np.ndarray]:
    """Probability mass of ``u`` on the lattice ``{-1, -1 + 2/N, ..., 1}``."""
    n = series.n_agents
    idx = np.rint((series.u + 1.0) * n / 2.0).astype(np.int64)
    counts = np.bincount(idx, minlength=n + 1)[: n + 1]
    centers = (2.0 * np.arange(n + 1) - n) / n
    return centers, counts / counts.sum()


def switching_times(series: MeanVelocitySeries, threshold: float = 0.8) -> SwitchingRecord:
    """Durations between alternating visits to ``u >= threshold`` and ``u <= -threshold``.

    Timing starts the first time ``|u| >= threshold``; each duration runs until
    ``u`` first reaches the opposite threshold, which then starts the next one.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if len(series) == 0:
        raise ValueError("empty series")
    u = series.u
    label = np.where(u >= threshold, 1, np.where(u <= -threshold, -1, 0))
    nz = np.flatnonzero(label)
    if nz.size == 0:
        return SwitchingRecord(np.empty(0), threshold)
    lab = label[nz]
    change = np.flatnonzero(lab[1:] != lab[:-1]) + 1
    marks = np.concatenate(([nz[0]], nz[change]))
    return SwitchingRecord(np.diff(series.times[marks]), threshold)


def _smooth(mass: np.ndarray) -> np.ndarray:
    padded = np.concatenate(([mass[0]], mass, [mass[-1]]))
    return 0.25 * padded[:-2] + 0.5 * padded[1:-1] + 0.25 * padded[2:]


def is_bimodal(centers: np.ndarray, mass: np.ndarray, dip: float = 0.8) -> bool:
    """True when the smoothed histogram has maxima on both sides of ``u = 0``.

    Maxima are found from sign changes of the finite differences of the
    smoothed mass (flat runs are skipped). Both outer maxima must also rise
    above ``1 / dip`` times the smallest smoothed mass between them, so that
    a flat histogram with ripples does not count.
    """
    s = _smooth(np.asarray(mass, dtype=float))
    diff = np.diff(s)
    signs = np.sign(diff)
    nonflat = np.flatnonzero(signs)
    peaks = []
    # boundary maxima count when the histogram falls away from the edge
    if nonflat.size and signs[nonflat[0]] < 0:
        peaks.append(0)
    for a, b_ in zip(nonflat[:-1], nonflat[1:]):
        if signs[a] > 0 and signs[b_] < 0:
            peaks.append((a + b_ + 1) // 2)
    if nonflat.size and signs[nonflat[-1]] > 0:
        peaks.append(len(s) - 1)
    left = [k for k in peaks if centers[k] < 0]
    right = [k for k in peaks if centers[k] > 0]
    if not left or not right:
        return False
    lo, hi = max(left, key=lambda k: s[k]), max(right, key=lambda k: s[k])
    valley = s[lo : hi + 1].min()
    return bool(valley < dip * min(s[lo], s[hi]))
