import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmkin.core import (
    InteractionKernel,
    KernelError,
    ModelParams,
    ParameterError,
    SwarmState,
    dump_config,
    kernel_eval,
    make_rng,
    parse_config,
    periodic_distance,
    total_variation,
    validate_params,
)


@pytest.mark.parametrize("x,y,d", [(0.1, 0.9, 0.2), (0.3, 0.3, 0.0), (0.0, 0.5, 0.5)])
def test_periodic_distance_examples(x, y, d):
    assert periodic_distance(x, y) == pytest.approx(d, abs=1e-15)


unit = st.floats(0.0, 1.0, exclude_max=True)


@given(unit, unit, unit)
def test_periodic_distance_is_a_metric_on_the_circle(x, y, z):
    dxy = periodic_distance(x, y)
    assert dxy == periodic_distance(y, x)
    assert 0.0 <= dxy <= 0.5
    assert dxy <= periodic_distance(x, z) + periodic_distance(z, y) + 1e-12


def test_kernel_eval_examples():
    th = InteractionKernel.tophat(0.2)
    assert kernel_eval(th, 0.1) == 1.0
    assert kernel_eval(th, 0.25) == 0.0
    assert kernel_eval(InteractionKernel.global_(), 0.49) == 1.0
    with pytest.raises(KernelError, match="no pointwise evaluation"):
        kernel_eval(InteractionKernel.dirac(), 0.0)


def test_shrinking_kernel_radius():
    k = InteractionKernel.shrinking(0.5)
    assert k.radius(10_000) == pytest.approx(0.01)
    assert k.radius(2) == 0.5
    with pytest.raises(KernelError):
        k.radius()


@pytest.mark.parametrize("bad", [dict(kind="tophat", sigma=0.0), dict(kind="tophat", sigma=0.6), dict(kind="shrinking", alpha=-1.0), dict(kind="cone")])
def test_kernel_rejects_invalid(bad):
    with pytest.raises(KernelError):
        InteractionKernel(**bad)


def test_kernel_string_roundtrip():
    for k in (InteractionKernel.global_(), InteractionKernel.tophat(0.2), InteractionKernel.dirac(), InteractionKernel.shrinking(1.0)):
        assert InteractionKernel.from_string(k.to_string()) == k


def test_validate_params_examples():
    validate_params(ModelParams(0.3, 1.0, 20, 0.01))
    with pytest.raises(ParameterError, match="dt too large"):
        validate_params(ModelParams(0.3, 1.0, 20, 0.5))
    with pytest.raises(ParameterError):
        validate_params(ModelParams(-0.1, 1.0, 20))
    with pytest.raises(ParameterError):
        validate_params(ModelParams(0.1, 1.0, 0))
    with pytest.raises(ParameterError):
        validate_params(ModelParams(0.1, 1.0, 5, seed=-1))


def test_config_roundtrip_is_exact():
    p = ModelParams(0.1 + 0.2, 1.0 / 3.0, 17, 0.007, InteractionKernel.tophat(0.2), 99)
    assert parse_config(dump_config(p)) == p


def test_config_errors():
    with pytest.raises(ParameterError, match="unknown key"):
        parse_config("gamma0 = 1\nb = 1\nn_agents = 3\nspeed = 2\n")
    with pytest.raises(ParameterError, match="duplicate"):
        parse_config("gamma0 = 1\ngamma0 = 2\nb = 1\nn_agents = 3\n")
    with pytest.raises(ParameterError, match="missing"):
        parse_config("gamma0 = 1  # comment\n")


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(5, 1).random(4)
    assert np.array_equal(a, make_rng(5, 1).random(4))
    assert not np.array_equal(a, make_rng(5, 2).random(4))


def test_random_state_invariants():
    s = SwarmState.random(50, make_rng(1))
    assert np.all((s.positions >= 0) & (s.positions < 1))
    assert set(np.unique(s.velocities)) <= {-1, 1}
    r = int((s.velocities == 1).sum())
    assert s.mean_velocity == pytest.approx((2 * r - 50) / 50)


def test_total_variation():
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == 0.5
    assert math.isclose(total_variation([0.2, 0.8], [0.2, 0.8]), 0.0)
