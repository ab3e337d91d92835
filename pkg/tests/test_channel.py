import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lamdrl.channel import (ChannelConfig, WeatherKind, WeatherScenario, free_space_loss, gas_attenuation,
                            link_budget, total_loss)


def test_fspl_examples():
    assert free_space_loss(550.0, 12.0) == pytest.approx(168.84, abs=0.01)
    # Friis form with c in km/s and f in Hz: 20 log10(4 pi d f / c)
    d_m, f_hz = 550e3, 12e9
    friis = 20 * math.log10(4 * math.pi * d_m * f_hz / 299792458.0)
    assert free_space_loss(550.0, 12.0) == pytest.approx(friis, abs=0.01)
    assert free_space_loss(1.0, 1.0) == pytest.approx(92.45)
    assert free_space_loss(1100.0, 12.0) - free_space_loss(550.0, 12.0) == pytest.approx(20 * math.log10(2))


@pytest.mark.parametrize("d,f", [(0.0, 12.0), (-1.0, 12.0), (550.0, 0.0)])
def test_fspl_domain(d, f):
    with pytest.raises(ValueError):
        free_space_loss(d, f)


def test_degenerate_scenario_total_is_fspl():
    zero = WeatherScenario(WeatherKind.NOMINAL, (0.0, 0.0), 0.0)
    parts = total_loss(np.array([600.0, 900.0]), zero, np.random.default_rng(0), margin=0.0)
    np.testing.assert_array_equal(parts["total"], parts["fspl"])


def test_extreme_dominates_nominal():
    d = np.random.default_rng(1).uniform(550, 2000, (4, 10))
    el = np.random.default_rng(2).uniform(10, 90, (4, 10))
    cfg = ChannelConfig()
    nom = link_budget(d, el, cfg.nominal, np.random.default_rng(7), cfg)
    ext = link_budget(d, el, cfg.extreme, np.random.default_rng(7), cfg)
    assert np.all(ext.total_loss > nom.total_loss)


def test_same_seed_same_rain():
    a = total_loss(np.ones(20) * 700, WeatherScenario.extreme(), np.random.default_rng(5))
    b = total_loss(np.ones(20) * 700, WeatherScenario.extreme(), np.random.default_rng(5))
    np.testing.assert_array_equal(a["rain"], b["rain"])


def test_scenario_envelopes():
    with pytest.raises(ValueError):
        WeatherScenario(WeatherKind.NOMINAL, (0.0, 5.0), 0.5)
    with pytest.raises(ValueError):
        WeatherScenario(WeatherKind.EXTREME, (4.0, 20.0), 2.0)
    with pytest.raises(ValueError):
        WeatherScenario(WeatherKind.EXTREME, (10.0, 8.0), 2.0)
    with pytest.raises(ValueError):
        WeatherScenario(WeatherKind.NOMINAL, (0.0, 3.0), -0.1)


def test_gas_cosecant_with_floor():
    assert gas_attenuation(0.5, 90.0) == pytest.approx(0.5)
    assert gas_attenuation(0.5, 30.0) == pytest.approx(1.0)
    assert gas_attenuation(0.5, 2.0) == pytest.approx(0.5 / math.sin(math.radians(10.0)))


@given(d=st.lists(st.floats(300, 3000), min_size=1, max_size=20), seed=st.integers(0, 2**32 - 1),
       el=st.floats(0, 90), extreme=st.booleans())
def test_loss_components(d, seed, el, extreme):
    scen = WeatherScenario.extreme() if extreme else WeatherScenario.nominal()
    parts = total_loss(np.array(d), scen, np.random.default_rng(seed), 3.0, el)
    assert np.all(parts["total"] == parts["fspl"] + parts["gas"] + parts["rain"] + parts["margin"])
    for k in ("fspl", "gas", "rain", "margin"):
        assert np.all(np.isfinite(parts[k])) and np.all(parts[k] >= 0)
    lo, hi = scen.rain_atten_range
    assert np.all((parts["rain"] >= lo) & (parts["rain"] <= hi))


@given(seed=st.integers(0, 2**32 - 1))
def test_total_monotone_in_distance(seed):
    d = np.sort(np.random.default_rng(seed).uniform(500, 3000, 30))
    parts = total_loss(d, WeatherScenario.nominal(), np.random.default_rng(seed))
    fixed = parts["total"] - parts["rain"]
    assert np.all(np.diff(fixed) >= 0)


def test_link_state_view():
    cfg = ChannelConfig()
    lb = link_budget(np.array([[700.0]]), np.array([[45.0]]), cfg.nominal, np.random.default_rng(0), cfg)
    link = lb.link(0, 0)
    assert link.total_loss == pytest.approx(link.fspl + link.gas + link.rain + link.margin)
    assert (link.tx_gain, link.rx_gain) == (30.0, 25.0)
    assert lb.visible[0, 0]
