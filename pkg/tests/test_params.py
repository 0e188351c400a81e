import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlapsir import (ModelParams, SeedSpec, ConfigError, from_reparam,
                        to_reparam, parse_config_text)
from overlapsir.periods import InfectiousPeriod


def test_from_reparam_fig1_rates():
    assert from_reparam(3.0, 0.025, 0.5) == pytest.approx((1.4625, 1.4625, 0.075))


def test_from_reparam_no_global():
    assert from_reparam(3.0, 0.0, 0.5) == (1.5, 1.5, 0.0)


def test_from_reparam_zero_beta():
    assert from_reparam(0.0, 0.5, 0.5) == (0.0, 0.0, 0.0)


def test_to_reparam_inverse_of_fig1():
    assert to_reparam(1.4625, 1.4625, 0.075) == pytest.approx((3.0, 0.025, 0.5))


def test_to_reparam_household_only():
    assert to_reparam(2.0, 0.0, 0.0) == (2.0, 0.0, 1.0)


def test_to_reparam_degenerate_local_split():
    # no local contacts at all: the household share is vacuous, 0.5 by convention
    assert to_reparam(0.0, 0.0, 1.0) == (1.0, 1.0, 0.5)


def test_to_reparam_rejects_all_zero():
    with pytest.raises(ConfigError):
        to_reparam(0.0, 0.0, 0.0)


@given(beta=st.floats(1e-6, 50), pig=st.floats(0, 1), pih=st.floats(0, 1))
def test_reparam_round_trip(beta, pig, pih):
    bh, bw, bg = from_reparam(beta, pig, pih)
    beta2, pig2, pih2 = to_reparam(bh, bw, bg)
    assert math.isclose(beta2, beta, rel_tol=1e-12)
    assert math.isclose(pig2, pig, rel_tol=1e-9, abs_tol=1e-12)
    if pig < 1:  # otherwise the local split is vacuous
        assert math.isclose(pih2, pih, rel_tol=1e-9, abs_tol=1e-12)


def test_pair_rates_consistent():
    p = ModelParams(h=4, d=3, theta=0.3, beta_h=1.2, beta_w=2.4, beta_g=0.1)
    assert p.w == 12
    assert p.beta_h_pair * (p.h - 1) == pytest.approx(p.beta_h, abs=0)
    assert p.beta_w_pair * (p.w - 1) == pytest.approx(p.beta_w, abs=0)


@pytest.mark.parametrize("kwargs", [
    dict(h=1, d=1, theta=0.5, beta_h=1, beta_w=1, beta_g=1),
    dict(h=2, d=0, theta=0.5, beta_h=1, beta_w=1, beta_g=1),
    dict(h=2, d=1, theta=-0.1, beta_h=1, beta_w=1, beta_g=1),
    dict(h=2, d=1, theta=1.5, beta_h=1, beta_w=1, beta_g=1),
    dict(h=2, d=1, theta=0.5, beta_h=-1, beta_w=1, beta_g=1),
    dict(h=2, d=1, theta=0.5, beta_h=1, beta_w=1, beta_g=1, n=7),
])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ConfigError):
        ModelParams(**kwargs)


def test_seed_streams_reproducible():
    a = SeedSpec(42, 3).rng(1, 7).random(5)
    b = SeedSpec(42, 3).rng(1, 7).random(5)
    assert np.array_equal(a, b)


def test_seed_streams_independent():
    a = SeedSpec(42, 3).rng(0).random(5)
    b = SeedSpec(42, 4).rng(0).random(5)
    assert not np.array_equal(a, b)


CONFIG = """
# comment
h=4
d=1
theta=0.4
beta=3
pi_g=0.025
pi_h_given_gc=0.5
infectious_period=constant
n=1000
seed=7
"""


def test_parse_config_reparam_form():
    params, seed = parse_config_text(CONFIG)
    assert (params.h, params.d, params.theta, params.n) == (4, 1, 0.4, 1000)
    assert params.beta_h == pytest.approx(1.4625)
    assert params.beta_g == pytest.approx(0.075)
    assert seed == SeedSpec(7)


def test_parse_config_rate_form():
    text = "h=2\nd=2\ntheta=0\nbeta_h=1\nbeta_w=2\nbeta_g=0.5\n"
    params, _ = parse_config_text(text)
    assert params.beta_w == 2.0 and params.theta == 0.0


def test_parse_config_rejects_both_forms():
    text = CONFIG + "beta_h=1\n"
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("h=2\nd=1\ntheta=0\nbeta_h=1\nbeta_w=1\nbeta_g=0\nwat=1\n")


def test_parse_gamma_period():
    params, _ = parse_config_text(
        "h=2\nd=1\ntheta=0.5\nbeta_h=1\nbeta_w=1\nbeta_g=0\n"
        "infectious_period=gamma:4\n")
    assert params.infectious_period == InfectiousPeriod("gamma", 4.0)
