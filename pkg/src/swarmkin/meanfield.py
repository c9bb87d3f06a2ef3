"""Mean-field analysis of the globally coupled model.

With ``w == 1`` the state reduces to the number ``r`` of right-movers, a
birth-death chain on ``{0, ..., N}``. Its diffusion approximation in
``u = (2r - N) / N`` has stationary density ``C exp(-Phi_N(u))`` with

    Phi_N(u) = -N u^2 / 2 + (1 - gamma0 N / b) ln(gamma0 + b (1 - u^2)).

This module evaluates that potential, classifies the noise regime, gives the
Kramers estimate of the switching time, and solves the chain exactly (the
stationary law and mean first-passage times) as an oracle for both.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse

from .core import ModelParams, ParameterError

__all__ = [
    "PotentialProfile",
    "StationaryDensity",
    "regime",
    "potential",
    "potential_second_derivative",
    "curvature_at_zero",
    "ordered_state",
    "potential_profile",
    "stationary_density",
    "lattice_bin_masses",
    "kramers_time",
    "kramers_time_asymptotic",
    "asymptotic_exponent",
    "chain_rates",
    "generator_matrix",
    "master_equation_stationary",
    "master_equation_mfpt",
    "nearest_lattice_state",
]

SMALL_NOISE = "small_noise"
LARGE_NOISE = "large_noise"


@dataclass(frozen=True)
class PotentialProfile:
    u: np.ndarray
    phi: np.ndarray
    regime: str
    u_s: float | None


@dataclass(frozen=True)
class StationaryDensity:
    u: np.ndarray
    density: np.ndarray
    # density = norm * exp(-(Phi - min Phi))
    norm: float


def _need_b(p: ModelParams):
    if p.b <= 0.0:
        raise ParameterError("potential undefined for b=0 (divide by b)")


def regime(p: ModelParams) -> str:
    _need_b(p)
    return SMALL_NOISE if p.gamma0 / p.b < 1.0 + 2.0 / p.n_agents else LARGE_NOISE


def potential(u, p: ModelParams):
    _need_b(p)
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0):
        raise ValueError("u must lie in [-1, 1]")
    n = p.n_agents
    with np.errstate(divide="ignore"):
        out = -0.5 * n * u * u + (1.0 - p.gamma0 * n / p.b) * np.log(p.gamma0 + p.b * (1.0 - u * u))
    return float(out) if out.ndim == 0 else out


def potential_second_derivative(u, p: ModelParams):
    """Analytic ``Phi_N''(u)``."""
    _need_b(p)
    u = np.asarray(u, dtype=float)
    n, g, b = p.n_agents, p.gamma0, p.b
    s = g + b * (1.0 - u * u)
    d2log = -2.0 * b / s - 4.0 * b * b * u * u / (s * s)
    out = -n + (1.0 - g * n / b) * d2log
    return float(out) if out.ndim == 0 else out


def curvature_at_zero(p: ModelParams) -> float:
    g, b, n = p.gamma0, p.b, p.n_agents
    if g + b <= 0.0:
        raise ParameterError("gamma0 + b must be positive")
    return n / (g + b) ** 2 * ((g - b / n) ** 2 - (b + b / n) ** 2)


def ordered_state(p: ModelParams) -> float | None:
    """``u_s = sqrt(1 + 2/N - gamma0/b)`` in the small-noise regime, else None.

    Warns when ``u_s > 1``, which happens for ``N < 2 b / gamma0``.
    """
    _need_b(p)
    arg = 1.0 + 2.0 / p.n_agents - p.gamma0 / p.b
    if arg <= 0.0:
        return None if arg < 0.0 else 0.0
    us = math.sqrt(arg)
    if us > 1.0:
        warnings.warn(f"u_s = {us:.4f} > 1: outside the support of the density (small N)", stacklevel=2)
    return us


def potential_profile(p: ModelParams, n_grid: int = 2001) -> PotentialProfile:
    u = np.linspace(-1.0, 1.0, n_grid)
    reg = regime(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        us = ordered_state(p) if reg == SMALL_NOISE else None
    return PotentialProfile(u, potential(u, p), reg, us)


def stationary_density(p: ModelParams, n_grid: int = 2001) -> StationaryDensity:
    """``p_s`` on a uniform grid, normalized by the trapezoid rule."""
    if n_grid < 3:
        raise ValueError("n_grid must be >= 3")
    u = np.linspace(-1.0, 1.0, n_grid)
    phi = potential(u, p)
    finite = np.isfinite(phi)
    shifted = np.zeros_like(phi)
    shifted[finite] = np.exp(-(phi[finite] - phi[finite].min()))
    z = integrate.trapezoid(shifted, u)
    return StationaryDensity(u, shifted / z, 1.0 / z)


def lattice_bin_masses(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Mass of ``p_s`` in each bin of width ``2/N`` centred on the lattice of ``u``.

    The end bins are halved by the support ``[-1, 1]``.
    """
    n = p.n_agents
    phi_min = potential_profile(p).phi
    phi_min = phi_min[np.isfinite(phi_min)].min()

    def f(x):
        return math.exp(-(potential(x, p) - phi_min))

    centers = (2.0 * np.arange(n + 1) - n) / n
    masses = np.array(
        [integrate.quad(f, max(-1.0, c - 1.0 / n), min(1.0, c + 1.0 / n), epsabs=0.0, epsrel=1e-12)[0] for c in centers]
    )
    return centers, masses / masses.sum()


def kramers_time(p: ModelParams) -> float:
    """Kramers estimate of the mean switching time between ``-u_s`` and ``u_s``::

        N pi / (gamma0 + b) * exp(Phi(0) - Phi(-u_s)) / sqrt(-Phi''(0) Phi''(-u_s))
    """
    if regime(p) != SMALL_NOISE:
        raise ParameterError("no metastable pair: large-noise regime")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        us = ordered_state(p)
    if us > 1.0:
        warnings.warn("u_s > 1; using the minimizer of Phi_N on [-1, 1]", stacklevel=2)
        prof = potential_profile(p, 20001)
        inner = np.abs(prof.u) < 1.0
        us = float(np.abs(prof.u[inner][np.argmin(prof.phi[inner])]))
    c0 = curvature_at_zero(p)
    cs = potential_second_derivative(-us, p)
    barrier = potential(0.0, p) - potential(-us, p)
    return p.n_agents * math.pi / (p.gamma0 + p.b) * math.exp(barrier) / math.sqrt(-c0 * cs)


def asymptotic_exponent(p: ModelParams) -> float:
    """Leading growth rate of ``ln tau_N`` in ``N``: ``(1 - g/b)/2 + (g/b) ln(2g/(g+b))``."""
    g, b = p.gamma0, p.b
    return 0.5 * (1.0 - g / b) + (g / b) * math.log(2.0 * g / (g + b))


def kramers_time_asymptotic(p: ModelParams) -> float:
    """Large-``N`` form of :func:`kramers_time` (requires ``gamma0 < b``)::

        pi / (b - g) * sqrt(g / (g + b)) * (g + b) / (2 g) * exp(N * asymptotic_exponent)

    The relative error is O(1/N).
    """
    g, b, n = p.gamma0, p.b, p.n_agents
    if not 0.0 < g < b:
        raise ParameterError("asymptotic form needs 0 < gamma0 < b")
    prefactor = math.pi / (b - g) * math.sqrt(g / (g + b)) * (g + b) / (2.0 * g)
    return prefactor * math.exp(n * asymptotic_exponent(p))


def chain_rates(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Up (``r -> r+1``) and down (``r -> r-1``) rates of the birth-death chain."""
    n = p.n_agents
    r = np.arange(n + 1, dtype=float)
    u = (2.0 * r - n) / n
    up = (n - r) * (p.gamma0 + p.b * (1.0 + u) ** 2)
    down = r * (p.gamma0 + p.b * (1.0 - u) ** 2)
    return up, down


def generator_matrix(p: ModelParams) -> sparse.csr_matrix:
    """Sparse generator ``L`` with ``dp/dt = L^T p`` (rows sum to zero)."""
    up, down = chain_rates(p)
    n = p.n_agents
    diag = -(up + down)
    return sparse.diags([down[1:], diag, up[:-1]], [-1, 0, 1], shape=(n + 1, n + 1), format="csr")


def master_equation_stationary(p: ModelParams) -> np.ndarray:
    """Exact stationary law of ``r``, from detailed balance in log space.

    The recursion runs outward from the centre and is mirrored, so the
    result is exactly symmetric under ``r <-> N - r``.
    """
    if p.n_agents > 10_000:
        raise ParameterError("n_agents above 10^4 is outside the supported range")
    up, down = chain_rates(p)
    if p.gamma0 <= 0.0 and p.b <= 0.0:
        raise ParameterError("chain is frozen for gamma0 = b = 0")
    n = p.n_agents
    logw = np.zeros(n + 1)
    # for odd N the two central states carry equal weight by symmetry
    start = (n + 1) // 2
    for r in range(start, n):
        logw[r + 1] = logw[r] + math.log(up[r]) - math.log(down[r + 1])
    logw[:start] = logw[n : n - start : -1]
    w = np.exp(logw - logw.max())
    return w / w.sum()


def nearest_lattice_state(u: float, n_agents: int) -> int:
    return int(np.clip(np.rint((u + 1.0) * n_agents / 2.0), 0, n_agents))


def master_equation_mfpt(p: ModelParams, r0: int, r1: int) -> float:
    """Expected hitting time of ``r1`` from ``r0`` for the birth-death chain.

    Uses the exact first-step solution
    ``T = sum_{k=r0}^{r1-1} (1 / (up_k pi_k)) sum_{i<=k} pi_i`` (and its mirror
    for ``r0 > r1``), evaluated in log space.
    """
    n = p.n_agents
    if not (0 <= r0 <= n and 0 <= r1 <= n):
        raise ValueError("states must lie in [0, N]")
    if p.gamma0 <= 0.0 and p.b <= 0.0:
        raise ParameterError("singular first-passage system for gamma0 = b = 0")
    if r0 == r1:
        return 0.0
    up, down = chain_rates(p)
    if r0 > r1:
        # mirror r -> N - r swaps the roles of up and down
        up, down = down[::-1], up[::-1]
        r0, r1 = n - r0, n - r1
    if np.any(up[r0:r1] <= 0.0):
        raise ParameterError("target unreachable: zero up-rate on the path")
    # unnormalized stationary weights of the chain truncated to [0, r1]
    logpi = np.zeros(r1 + 1)
    for r in range(r1):
        if down[r + 1] <= 0.0:
            raise ParameterError("zero down-rate: detailed balance weights undefined")
        logpi[r + 1] = logpi[r] + math.log(up[r]) - math.log(down[r + 1])
    shift = logpi.max()
    cum = np.cumsum(np.exp(logpi - shift))
    k = np.arange(r0, r1)
    terms = cum[k] * np.exp(shift - logpi[k]) / up[k]
    return float(terms.sum())
