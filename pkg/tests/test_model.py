import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from osc321 import (
    GAIN,
    LOSS,
    Channel,
    ChannelSet,
    FockTruncation,
    NumberDistribution,
    suggest_truncation,
    validate_channels,
)
from osc321.errors import ChannelError, NegativeRate, NoStabilizingLoss, TruncationUnsafe
from osc321.model import falling

rates = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)


def test_canonical_channels():
    cs = ChannelSet.canonical(3.0, 0.1)
    assert (cs.kappa1, cs.kappa2, cs.kappa3) == (3.0, 1.0, 0.1)
    assert [c.label for c in cs] == ["loss1", "gain2", "loss3"]
    assert [c.shift for c in cs] == [-1, 2, -3]


def test_absolute_rates_are_rescaled():
    cs = ChannelSet.from_absolute(4.0, 2.0, 0.5)
    assert (cs.kappa1, cs.kappa2, cs.kappa3) == (2.0, 1.0, 0.25)


@pytest.mark.parametrize("rate", [-1.0, math.nan, math.inf])
def test_bad_rates_rejected(rate):
    with pytest.raises(NegativeRate):
        validate_channels(ChannelSet.canonical(rate, 0.1))


def test_gain_needs_higher_loss():
    with pytest.raises(NoStabilizingLoss):
        validate_channels(ChannelSet((Channel(1.0, 1, LOSS), Channel(1.0, 2, GAIN))))
    with pytest.raises(NoStabilizingLoss):
        validate_channels(ChannelSet((Channel(1.0, 2, GAIN),)))
    with pytest.raises(NoStabilizingLoss):
        validate_channels(ChannelSet(()))


def test_thermal_and_vdp_are_valid():
    validate_channels(ChannelSet.thermal(0.7))
    validate_channels(ChannelSet.van_der_pol(1.0, 0.5))
    with pytest.raises(NoStabilizingLoss):
        validate_channels(ChannelSet((Channel(1.0, 1, LOSS), Channel(1.0, 1, GAIN))))


def test_channel_power_and_direction_checked():
    with pytest.raises(ChannelError):
        Channel(1.0, 4, LOSS)
    with pytest.raises(ChannelError):
        Channel(1.0, 1, "sideways")


@given(rates, rates, rates)
def test_json_round_trip(k1, k2, k3):
    cs = ChannelSet((Channel(k1, 1, LOSS), Channel(k2, 2, GAIN), Channel(k3, 3, LOSS)))
    back = ChannelSet.from_json(cs.to_json())
    assert back == cs
    assert json.loads(cs.to_json())["channels"][1] == {"rate": k2, "power": 2, "direction": "gain"}


@given(st.integers(0, 50), st.integers(0, 3))
def test_falling_factorial(n, k):
    assert falling(n, k) == math.perm(n, k)


def test_gain_weight_is_truncated():
    c = Channel(1.0, 2, GAIN)
    w = c.occupation_weight(np.arange(11), 10)
    assert w[8] == 90.0 and w[9] == 0.0 and w[10] == 0.0


def test_number_distribution_validation():
    with pytest.raises(ValueError):
        NumberDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        NumberDistribution([1.1, -0.1])
    d = NumberDistribution([1.0, -1e-16])
    assert d.p[1] == 0.0
    with pytest.raises(ValueError):
        d.p[0] = 0.3


def test_tail_check():
    t = FockTruncation(3, 1e-12)
    assert t.check_tail(np.array([1, 0, 0, 1e-13])) == 1e-13
    with pytest.raises(TruncationUnsafe) as ei:
        t.check_tail(np.array([0.9, 0.0, 0.0, 0.1]))
    assert ei.value.tail_mass == 0.1


def test_suggest_truncation_is_tail_safe():
    from osc321 import build_diagonal_generator, solve_steady_state

    for k1, k3 in [(0.1, 0.01), (10**1.25, 0.01), (100, 0.1)]:
        cs = ChannelSet.canonical(k1, k3)
        tr = suggest_truncation(cs)
        p = solve_steady_state(build_diagonal_generator(cs, tr)).p
        assert p[-3:].max() < 1e-12
    assert suggest_truncation(ChannelSet((Channel(1.0, 1, LOSS),))).n_max == 10
