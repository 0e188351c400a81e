"""Model parameters, the two equivalent rate parametrizations, and seeding.

All types are immutable after construction and safe to share across workers.
Random streams are derived from a (base, stream) pair through numpy's
SeedSequence spawn-key mechanism, which is a pure function of its inputs, so
identical seeds reproduce identical draw sequences on any worker layout.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .periods import InfectiousPeriod, CONSTANT


class ConfigError(ValueError):
    """Raised for invalid parameter values or malformed config files."""


def from_reparam(beta: float, pi_g: float, pi_h_given_gc: float):
    """Map (overall rate, global fraction, household share of local) to rates.

    Returns (beta_h, beta_w, beta_g).  Inverse of to_reparam whenever beta > 0.
    """
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    if not 0 <= pi_g <= 1 or not 0 <= pi_h_given_gc <= 1:
        raise ConfigError("pi_g and pi_h_given_gc must lie in [0, 1]")
    beta_g = beta * pi_g
    local = beta * (1.0 - pi_g)
    return local * pi_h_given_gc, local * (1.0 - pi_h_given_gc), beta_g


def to_reparam(beta_h: float, beta_w: float, beta_g: float):
    """Inverse map to (beta, pi_g, pi_h_given_gc).

    When beta_h + beta_w = 0 the household share is vacuous and is reported
    as 0.5 by convention, keeping the map total on its domain.
    """
    if min(beta_h, beta_w, beta_g) < 0:
        raise ConfigError("rates must be nonnegative")
    beta = beta_h + beta_w + beta_g
    if beta == 0:
        raise ConfigError("at least one rate must be positive")
    local = beta_h + beta_w
    pi_h = beta_h / local if local > 0 else 0.5
    return beta, beta_g / beta, pi_h


@dataclass(frozen=True)
class ModelParams:
    """All model constants.

    h: household size, d: households per workplace (workplace size w = d*h),
    theta: probability an individual is a mover, beta_*: the three contact
    rates, n: population size (simulation only; must be a multiple of w).
    Per-pair rates beta_h/(h-1) and beta_w/(w-1) are derived properties and
    therefore always consistent with the totals.
    """

    h: int
    d: int
    theta: float
    beta_h: float
    beta_w: float
    beta_g: float
    infectious_period: InfectiousPeriod = CONSTANT
    n: int | None = None

    def __post_init__(self):
        if not (isinstance(self.h, (int, np.integer)) and self.h >= 2):
            raise ConfigError("h must be an integer >= 2")
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise ConfigError("d must be an integer >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if min(self.beta_h, self.beta_w, self.beta_g) < 0:
            raise ConfigError("contact rates must be nonnegative")
        if self.n is not None:
            if self.n <= 0 or self.n % self.w != 0:
                raise ConfigError(f"n must be a positive multiple of w={self.w}")

    @property
    def w(self) -> int:
        return self.d * self.h

    @property
    def beta_h_pair(self) -> float:
        return self.beta_h / (self.h - 1)

    @property
    def beta_w_pair(self) -> float:
        return self.beta_w / (self.w - 1)

    @property
    def pi_g(self) -> float:
        return to_reparam(self.beta_h, self.beta_w, self.beta_g)[1]

    def reparam(self):
        return to_reparam(self.beta_h, self.beta_w, self.beta_g)

    def with_n(self, n: int) -> "ModelParams":
        return replace(self, n=n)

    def key(self) -> str:
        """Stable string identifying the model (used for cache keys)."""
        return (f"h={self.h},d={self.d},theta={self.theta!r},"
                f"bh={self.beta_h!r},bw={self.beta_w!r},bg={self.beta_g!r},"
                f"ip={self.infectious_period.spec()}")


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible randomness: (base, stream) -> independent pseudo-random stream.

    The mapping goes through SeedSequence(entropy=base, spawn_key=(stream, *path)),
    a pure function, so distinct stream ids (or distinct sub-paths) give
    statistically independent generators and reruns are bit-identical.
    """

    base: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ConfigError("stream id must be nonnegative")

    def rng(self, *path: int) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.base,
                                     spawn_key=(self.stream, *path))
        return np.random.default_rng(seq)


# stream-id namespaces, so e.g. run streams never collide with table shards
STREAM_POPULATION = 0
STREAM_RUN = 1
STREAM_TABLES = 2


_RATE_KEYS = ("beta_h", "beta_w", "beta_g")
_REPARAM_KEYS = ("beta", "pi_g", "pi_h_given_gc")
_KNOWN_KEYS = {"h", "d", "theta", "n", "seed", "infectious_period",
               *_RATE_KEYS, *_REPARAM_KEYS}


def parse_config_text(text: str):
    """Parse flat key=value config text into (ModelParams, SeedSpec).

    Either (beta, pi_g, pi_h_given_gc) or (beta_h, beta_w, beta_g) is
    accepted; supplying keys from both groups is an error.  Blank lines and
    lines starting with '#' are ignored.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val.strip()

    has_rates = [k for k in _RATE_KEYS if k in values]
    has_reparam = [k for k in _REPARAM_KEYS if k in values]
    if has_rates and has_reparam:
        raise ConfigError("supply either (beta, pi_g, pi_h_given_gc) or "
                          "(beta_h, beta_w, beta_g), not both")
    if not has_rates and not has_reparam:
        raise ConfigError("no contact rates given")

    def need(key):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
        return values[key]

    try:
        h = int(need("h"))
        d = int(need("d"))
        theta = float(need("theta"))
        if has_reparam:
            beta_h, beta_w, beta_g = from_reparam(
                float(need("beta")), float(need("pi_g")),
                float(need("pi_h_given_gc")))
        else:
            beta_h = float(need("beta_h"))
            beta_w = float(need("beta_w"))
            beta_g = float(need("beta_g"))
        ip = InfectiousPeriod.parse(values.get("infectious_period", "constant"))
        n = int(values["n"]) if "n" in values else None
        seed = SeedSpec(int(values.get("seed", "0")))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    params = ModelParams(h=h, d=d, theta=theta, beta_h=beta_h, beta_w=beta_w,
                         beta_g=beta_g, infectious_period=ip, n=n)
    return params, seed


def load_config(path) -> tuple[ModelParams, SeedSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
