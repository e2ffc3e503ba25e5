import math

import pytest
from hypothesis import given, strategies as st

from imacsim.device import (
    AP_STATE,
    BiasPoint,
    DeviceError,
    DeviceParams,
    P_STATE,
    ZERO_BIAS,
    base_resistance,
    conductance,
    resistance,
    tmr_at_bias,
)

# Hand-evaluated: 10 / (50*30*pi/4 nm^2 -> um^2) = 10 / 1.1780972450961724e-3
R_BASE_DEFAULT = 8488.263631567752


def test_base_resistance_default_params():
    assert base_resistance(DeviceParams()) == pytest.approx(R_BASE_DEFAULT, rel=1e-12)


def test_base_resistance_unit_area_identity():
    # synthetic ellipse with l*w*pi/4 = 1 um^2 exactly
    side_nm = math.sqrt(4e6 / math.pi)
    params = DeviceParams(ra_product=1.0, mtj_length=side_nm, mtj_width=side_nm)
    assert base_resistance(params) == pytest.approx(1.0, rel=1e-12)


def test_base_resistance_area_scaling():
    small = DeviceParams()
    big = DeviceParams(mtj_length=100.0, mtj_width=60.0)
    assert base_resistance(small) / base_resistance(big) == pytest.approx(4.0, rel=1e-12)


def test_nonpositive_dimensions_rejected():
    with pytest.raises(DeviceError):
        DeviceParams(mtj_length=0.0)
    with pytest.raises(DeviceError):
        DeviceParams(mtj_width=-3.0)
    with pytest.raises(DeviceError):
        DeviceParams(ra_product=0.0)
    with pytest.raises(DeviceError):
        BiasPoint(float("nan"))


def test_tmr_table_points():
    params = DeviceParams()
    assert tmr_at_bias(params, ZERO_BIAS) == 2.0
    assert tmr_at_bias(params, BiasPoint(0.65)) == 1.0
    assert tmr_at_bias(params, BiasPoint(0.325)) == pytest.approx(1.6, rel=1e-12)


def test_resistance_p_state_bias_independent():
    params = DeviceParams()
    for v in (0.0, 0.1, 0.325, 0.65, 1.0):
        assert resistance(params, P_STATE, BiasPoint(v)) == pytest.approx(
            R_BASE_DEFAULT, rel=1e-12
        )


def test_resistance_ap_state_table_points():
    params = DeviceParams()
    assert resistance(params, AP_STATE, ZERO_BIAS) == pytest.approx(
        3 * R_BASE_DEFAULT, rel=1e-12
    )
    assert resistance(params, AP_STATE, BiasPoint(0.65)) == pytest.approx(
        2 * R_BASE_DEFAULT, rel=1e-12
    )


def test_conductance_values():
    params = DeviceParams()
    g_p = conductance(params, P_STATE, ZERO_BIAS)
    g_ap = conductance(params, AP_STATE, ZERO_BIAS)
    assert g_p == pytest.approx(117.80972450961724e-6, rel=1e-12)
    assert g_ap == pytest.approx(39.269908169872414e-6, rel=1e-12)
    assert g_p * resistance(params, P_STATE, ZERO_BIAS) == pytest.approx(1.0, rel=1e-14)


positive = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False)
bias_volts = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


@given(ra=positive, tmr0=positive, v0=positive, length=positive, width=positive, v=bias_volts)
def test_p_state_equals_base_resistance_everywhere(ra, tmr0, v0, length, width, v):
    params = DeviceParams(ra_product=ra, tmr0=tmr0, v0=v0, mtj_length=length, mtj_width=width)
    r_p = resistance(params, P_STATE, BiasPoint(v))
    assert r_p == pytest.approx(base_resistance(params), rel=1e-12)


@given(v=bias_volts)
def test_ap_exceeds_p_whenever_tmr_positive(v):
    params = DeviceParams()
    bias = BiasPoint(v)
    assert tmr_at_bias(params, bias) > 0
    assert resistance(params, AP_STATE, bias) > resistance(params, P_STATE, bias)


@given(v=st.floats(min_value=0.0, max_value=2.0, allow_nan=False))
def test_tmr_even_and_bounded(v):
    params = DeviceParams()
    t_pos = tmr_at_bias(params, BiasPoint(v))
    t_neg = tmr_at_bias(params, BiasPoint(-v))
    assert t_pos == pytest.approx(t_neg, rel=1e-12)
    assert t_pos <= params.tmr0 / 100.0


def test_ap_resistance_strictly_decreasing_in_abs_bias():
    params = DeviceParams()
    values = [resistance(params, AP_STATE, BiasPoint(v)) for v in (0.0, 0.2, 0.4, 0.8, 1.6)]
    assert all(a > b for a, b in zip(values, values[1:]))
