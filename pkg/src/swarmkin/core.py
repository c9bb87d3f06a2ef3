"""Shared domain types, kernels, periodic geometry and the RNG contract.

The random number contract: every stochastic routine in the package draws
from ``numpy.random.Generator(PCG64(SeedSequence([seed, *stream])))``.
A ``(seed, stream)`` pair therefore names one reproducible stream, and
independent replicates use distinct ``stream`` tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ParameterError",
    "KernelError",
    "InteractionKernel",
    "ModelParams",
    "SwarmState",
    "MeanVelocitySeries",
    "periodic_distance",
    "kernel_eval",
    "validate_params",
    "make_rng",
    "parse_config",
    "load_config",
    "dump_config",
    "total_variation",
]

DEFAULT_SEED = 1234

_KERNEL_KINDS = ("global", "tophat", "dirac", "shrinking")


class ParameterError(ValueError):
    """Raised when a parameter set violates a model invariant."""


class KernelError(ValueError):
    """Raised when a kernel is used where it has no meaning."""


@dataclass(frozen=True)
class InteractionKernel:
    """Closed family of interaction weights ``w``.

    ``global`` is ``w == 1``, ``tophat`` is the indicator of ``[0, sigma]``,
    ``shrinking`` is the indicator of ``[0, N**-alpha]`` and ``dirac`` is the
    singular local closure, which only exists at the PDE level.
    """

    kind: str
    sigma: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in _KERNEL_KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "tophat":
            if self.sigma is None or not (0.0 < self.sigma <= 0.5):
                raise KernelError(f"tophat radius must lie in (0, 0.5], got {self.sigma}")
        elif self.sigma is not None:
            raise KernelError("sigma is only meaningful for the tophat kernel")
        if self.kind == "shrinking":
            if self.alpha is None or not self.alpha > 0.0:
                raise KernelError(f"shrinking exponent must be > 0, got {self.alpha}")
        elif self.alpha is not None:
            raise KernelError("alpha is only meaningful for the shrinking kernel")

    @classmethod
    def global_(cls) -> InteractionKernel:
        return cls("global")

    @classmethod
    def tophat(cls, sigma: float) -> InteractionKernel:
        return cls("tophat", sigma=float(sigma))

    @classmethod
    def dirac(cls) -> InteractionKernel:
        return cls("dirac")

    @classmethod
    def shrinking(cls, alpha: float) -> InteractionKernel:
        return cls("shrinking", alpha=float(alpha))

    def radius(self, n_agents: int | None = None) -> float | None:
        """Support radius in periodic distance; ``None`` means everything."""
        if self.kind == "global":
            return None
        if self.kind == "tophat":
            return self.sigma
        if self.kind == "shrinking":
            if n_agents is None:
                raise KernelError("shrinking kernel needs n_agents to fix its radius")
            return min(float(n_agents) ** (-self.alpha), 0.5)
        raise KernelError("kernel has no pointwise evaluation")

    def to_string(self) -> str:
        if self.kind == "tophat":
            return f"tophat:{self.sigma!r}"
        if self.kind == "shrinking":
            return f"shrinking:{self.alpha!r}"
        return self.kind

    @classmethod
    def from_string(cls, text: str) -> InteractionKernel:
        name, _, arg = text.strip().partition(":")
        name = name.strip().lower()
        if name == "tophat":
            return cls.tophat(float(arg))
        if name == "shrinking":
            return cls.shrinking(float(arg))
        if arg:
            raise KernelError(f"kernel {name!r} takes no argument")
        return cls(name)


@dataclass(frozen=True)
class ModelParams:
    gamma0: float
    b: float
    n_agents: int
    dt: float = 0.01
    kernel: InteractionKernel = field(default_factory=InteractionKernel.global_)
    seed: int = DEFAULT_SEED

    def replace(self, **changes) -> ModelParams:
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def mean_velocity(self) -> float:
        return float(self.velocities.sum()) / self.n_agents

    @classmethod
    def random(cls, n_agents: int, rng: np.random.Generator) -> SwarmState:
        """Uniform positions and independent fair-coin velocities."""
        x = rng.random(n_agents)
        v = np.where(rng.random(n_agents) < 0.5, 1, -1).astype(np.int8)
        return cls(x, v, 0.0)


@dataclass(frozen=True)
class MeanVelocitySeries:
    times: np.ndarray
    u: np.ndarray
    n_agents: int

    def __len__(self) -> int:
        return self.u.shape[0]


def periodic_distance(x, y):
    """Distance on the unit circle, ``min(|x - y|, 1 - |x - y|)``."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    out = np.minimum(d, 1.0 - d)
    return float(out) if np.ndim(out) == 0 else out


def kernel_eval(k: InteractionKernel, s, n_agents: int | None = None):
    """Evaluate the weight ``w(s)`` at periodic distance ``s``.

    Raises
    ------
    KernelError
        For the Dirac kernel, and for a shrinking kernel without ``n_agents``.
    """
    if k.kind == "dirac":
        raise KernelError("kernel has no pointwise evaluation")
    s = np.asarray(s, dtype=float)
    r = k.radius(n_agents)
    w = np.ones_like(s) if r is None else (s <= r).astype(float)
    return float(w) if w.ndim == 0 else w


def validate_params(p: ModelParams) -> ModelParams:
    """Return ``p`` unchanged if every invariant holds, else raise ParameterError."""
    if not (math.isfinite(p.gamma0) and p.gamma0 >= 0.0):
        raise ParameterError(f"gamma0 must be >= 0, got {p.gamma0}")
    if not (math.isfinite(p.b) and p.b >= 0.0):
        raise ParameterError(f"b must be >= 0, got {p.b}")
    if int(p.n_agents) != p.n_agents or p.n_agents < 1:
        raise ParameterError(f"n_agents must be a positive integer, got {p.n_agents}")
    if not (math.isfinite(p.dt) and p.dt > 0.0):
        raise ParameterError(f"dt must be > 0, got {p.dt}")
    if p.dt * (p.gamma0 + 4.0 * p.b) >= 1.0:
        raise ParameterError(
            f"dt too large: dt*(gamma0+4b) = {p.dt * (p.gamma0 + 4.0 * p.b):g} >= 1"
        )
    if not isinstance(p.kernel, InteractionKernel):
        raise ParameterError("kernel must be an InteractionKernel")
    if not (0 <= int(p.seed) < 2**64):
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {p.seed}")
    return p


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


_CONFIG_KEYS = ("gamma0", "b", "n_agents", "dt", "seed", "kernel")


def parse_config(text: str) -> ModelParams:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are an error."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParameterError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    missing = [k for k in ("gamma0", "b", "n_agents") if k not in values]
    if missing:
        raise ParameterError(f"missing required keys: {', '.join(missing)}")
    kwargs = dict(
        gamma0=float(values["gamma0"]),
        b=float(values["b"]),
        n_agents=int(values["n_agents"]),
    )
    if "dt" in values:
        kwargs["dt"] = float(values["dt"])
    if "seed" in values:
        kwargs["seed"] = int(values["seed"])
    if "kernel" in values:
        kwargs["kernel"] = InteractionKernel.from_string(values["kernel"])
    return ModelParams(**kwargs)


def load_config(path) -> ModelParams:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(p: ModelParams) -> str:
    # repr() of a float round-trips exactly
    return (
        f"gamma0 = {p.gamma0!r}\n"
        f"b = {p.b!r}\n"
        f"n_agents = {p.n_agents}\n"
        f"dt = {p.dt!r}\n"
        f"seed = {p.seed}\n"
        f"kernel = {p.kernel.to_string()}\n"
    )


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())
