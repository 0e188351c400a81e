import numpy as np
import pytest

from overlapsir import ModelParams, SeedSpec, from_reparam
from overlapsir.periods import InfectiousPeriod


def fig_params(theta, h=4, d=1, n=None, law="constant"):
    """The running example: beta=3, pi_g=0.025, pi_h|gc=0.5."""
    bh, bw, bg = from_reparam(3.0, 0.025, 0.5)
    return ModelParams(h=h, d=d, theta=theta, beta_h=bh, beta_w=bw, beta_g=bg,
                       infectious_period=InfectiousPeriod.parse(law), n=n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def seed():
    return SeedSpec(20240817)
