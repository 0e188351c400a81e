"""Infectious-period laws, all constrained to unit mean.

Time is measured in units of the mean infectious period, so every admissible
law has mean exactly 1 and the laws differ only in their variance.  A law must
provide both a sampler and a closed-form Laplace transform; the analytics use
the transform, the simulators use the sampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class InfectiousPeriod:
    """Distribution of an individual's infectious period.

    law is one of "constant" (point mass at 1), "exponential" (rate 1) or
    "gamma" (shape k, scale 1/k).  The parametrization keeps the mean pinned
    at 1, so it cannot drift when the shape changes.
    """

    law: str
    shape: float = 1.0

    def __post_init__(self):
        if self.law not in ("constant", "exponential", "gamma"):
            raise ValueError(f"unknown infectious-period law {self.law!r}")
        if self.law == "gamma" and not self.shape > 0:
            raise ValueError("gamma shape must be positive")

    @property
    def is_constant(self) -> bool:
        return self.law == "constant"

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def variance(self) -> float:
        if self.law == "constant":
            return 0.0
        if self.law == "exponential":
            return 1.0
        return 1.0 / self.shape

    def sample(self, rng, size=None):
        """Draw infectious periods; for the constant law this is exactly 1."""
        if self.law == "constant":
            return 1.0 if size is None else np.ones(size)
        if self.law == "exponential":
            return rng.standard_exponential(size)
        return rng.gamma(self.shape, 1.0 / self.shape, size)

    def laplace(self, nu):
        """E[exp(-nu I)] in closed form; nu may be a scalar or array, nu >= 0."""
        nu = np.asarray(nu, dtype=float)
        if self.law == "constant":
            out = np.exp(-nu)
        elif self.law == "exponential":
            out = 1.0 / (1.0 + nu)
        else:
            out = (1.0 + nu / self.shape) ** (-self.shape)
        return out if out.ndim else float(out)

    def spec(self) -> str:
        """Config-file spelling of this law."""
        if self.law == "gamma":
            return f"gamma:{self.shape:g}"
        return self.law

    @classmethod
    def parse(cls, text: str) -> "InfectiousPeriod":
        """Parse "constant", "exponential" or "gamma:<shape>"."""
        text = text.strip().lower()
        if text in ("constant", "exponential"):
            return cls(text)
        if text.startswith("gamma:"):
            try:
                k = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad gamma shape in {text!r}") from None
            return cls("gamma", k)
        raise ValueError(f"unknown infectious-period spec {text!r}")


CONSTANT = InfectiousPeriod("constant")
EXPONENTIAL = InfectiousPeriod("exponential")
