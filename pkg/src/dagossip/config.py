"""Trial configuration: network size, seeds, failures and schedule constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FailureSpec:
    """Which nodes are failed before round 1.

    ``mode`` is ``"none"``, ``"uniform"`` (``count`` nodes chosen by a generator
    seeded only with ``(n, adversary_seed)``) or ``"explicit"`` (``nodes`` lists
    node indices).
    """

    mode: str = "none"
    count: int = 0
    adversary_seed: int = 0
    nodes: tuple[int, ...] = ()

    @classmethod
    def uniform(cls, count: int, adversary_seed: int = 0) -> "FailureSpec":
        return cls(mode="uniform", count=int(count), adversary_seed=int(adversary_seed))

    @classmethod
    def explicit(cls, nodes) -> "FailureSpec":
        return cls(mode="explicit", nodes=tuple(int(v) for v in nodes))

    def size(self) -> int:
        if self.mode == "uniform":
            return self.count
        if self.mode == "explicit":
            return len(set(self.nodes))
        return 0


@dataclass(frozen=True)
class ScheduleConstants:
    """Explicit values for every asymptotic constant in the three algorithms.

    Defaults are the committed output of ``scripts/calibrate.py``.  Loop lengths
    are multipliers on ``loglog(n) = max(1, ceil(log2(log2(n))))``.
    """

    # clustering 1
    C: float = 50.0  # singleton leader probability 1 / (C log n)
    C_prime: float = 0.5  # first square size C' log n
    c_sq: float = 1 / 8  # s <- max(s + 1, floor(c_sq s^2))
    # clustering 2 / 3
    C2: float = 0.01  # singleton leader probability 1 / (C2 log^4 n)
    C2_prime: float = 1 / 256  # size set-point C2' log^3 n
    c_sq2: float = 4.0  # s <- max(s + 1, floor(c_sq2 s^2 / log n))
    square_target2: float = 32.0  # square until s > square_target2 sqrt(n) / log^2 n
    grow_deficit2: float = 0.5  # clustering 2 stops a cluster growing by < 2 - deficit
    grow_deficit3: Optional[float] = None  # clustering 3; None means 1 / log n
    bpush_growth: float = 1.1
    C_dprime: float = 8.0  # delta-clustering target size delta / C''
    kappa_delta: float = 3.0  # broadcast loop length kappa log n / log delta
    # loop multipliers
    L_init: int = 3
    L_pull: int = 2
    L_bpush: int = 2

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v > 0:
                raise ConfigError(f"schedule constant {f.name} must be positive, got {v}")
        if self.C_prime / self.C > 0.01 + 1e-12:
            raise ConfigError(f"C'/C must be <= 0.01, got {self.C_prime / self.C:.4g}")


@dataclass(frozen=True)
class TrialConfig:
    n: int
    seed: int = 0
    rumor_bits: Optional[int] = None
    constants: ScheduleConstants = field(default_factory=ScheduleConstants)
    delta: Optional[int] = None
    failure: FailureSpec = field(default_factory=FailureSpec)
    validation: bool = False

    def validate(self) -> None:
        if self.n < 4:
            raise ConfigError(f"n must be >= 4, got {self.n}")
        if self.rumor_bits is not None and self.rumor_bits <= 0:
            raise ConfigError("rumor_bits must be positive")
        if self.delta is not None and not 1 <= self.delta <= self.n:
            raise ConfigError(f"delta must satisfy 1 <= delta <= n, got {self.delta}")
        f = self.failure
        if f.mode not in ("none", "uniform", "explicit"):
            raise ConfigError(f"unknown failure mode {f.mode!r}")
        if f.mode == "uniform" and not 0 <= f.count <= self.n:
            raise ConfigError(f"failure count F={f.count} must satisfy 0 <= F <= n={self.n}")
        if f.mode == "explicit" and any(not 0 <= v < self.n for v in f.nodes):
            raise ConfigError("explicit failure list names a node outside [0, n)")
        self.constants.validate()

    @property
    def b(self) -> int:
        if self.rumor_bits is not None:
            return self.rumor_bits
        return 4 * math.ceil(math.log2(self.n))

    def with_constants(self, **overrides) -> "TrialConfig":
        return replace(self, constants=replace(self.constants, **overrides))


def log2n(n: int) -> float:
    return math.log2(n)


def loglog(n: int) -> int:
    """``ceil(log2 log2 n)``, floored at 1."""
    return max(1, math.ceil(math.log2(max(2.0, math.log2(n)))))
