import math

import pytest
from hypothesis import given, strategies as st

from imacsim.circuits import (
    AmplifierParams,
    CircuitError,
    NeuronParams,
    SynapsePair,
    amplifier_output,
    ideal_neuron,
    matched_gain,
    neuron_activation,
    synapse_currents,
)
from imacsim.device import AP_STATE, BiasPoint, DeviceParams, P_STATE, ZERO_BIAS, conductance

DEVICE = DeviceParams()
NEURON = NeuronParams()


def test_synapse_weight_state_rule():
    plus = SynapsePair.from_weight(+1)
    minus = SynapsePair.from_weight(-1)
    assert (plus.plus_state, plus.minus_state) == (P_STATE, AP_STATE)
    assert (minus.plus_state, minus.minus_state) == (AP_STATE, P_STATE)
    assert plus.weight == 1 and minus.weight == -1
    with pytest.raises(CircuitError):
        SynapsePair.from_weight(0)


def test_synapse_currents_zero_input():
    pair = SynapsePair.from_weight(+1)
    assert synapse_currents(pair, 0.0, DEVICE, ZERO_BIAS) == (0.0, 0.0)


def test_synapse_currents_table_values():
    # 0.8 V across G_P = 1/8488.26 ohm and G_AP = 1/25464.79 ohm
    pair = SynapsePair.from_weight(+1)
    i_plus, i_minus = synapse_currents(pair, 0.8, DEVICE, ZERO_BIAS)
    assert i_plus == pytest.approx(94.2477796076938e-6, rel=1e-12)
    assert i_minus == pytest.approx(31.415926535897935e-6, rel=1e-12)


def test_negative_weight_gives_negative_differential():
    pair = SynapsePair.from_weight(-1)
    i_plus, i_minus = synapse_currents(pair, 0.5, DEVICE, ZERO_BIAS)
    assert i_plus - i_minus < 0


@given(v=st.floats(min_value=-2, max_value=2, allow_nan=False))
def test_sign_rule_matches_weight(v):
    bias = BiasPoint(v)
    for w in (+1, -1):
        pair = SynapsePair.from_weight(w)
        g_plus = conductance(DEVICE, pair.plus_state, bias)
        g_minus = conductance(DEVICE, pair.minus_state, bias)
        assert math.copysign(1, g_plus - g_minus) == w


def test_amplifier_sums_and_scales():
    amp = AmplifierParams(transimpedance_gain=1000.0)
    currents = [(94.2477796076938e-6, 31.415926535897935e-6)]
    assert amplifier_output(currents, amp) == pytest.approx(
        1000.0 * 62.831853071795865e-6, rel=1e-12
    )


def test_amplifier_zero_currents_sit_at_reference():
    amp = AmplifierParams(transimpedance_gain=1000.0)
    ref = NEURON.bias_midpoint
    assert amplifier_output([(0.0, 0.0)] * 5, amp, reference=ref) == ref


def test_amplifier_linearity_under_negation():
    amp = AmplifierParams(transimpedance_gain=2500.0)
    currents = [(3e-6, 1e-6), (0.5e-6, 2e-6)]
    negated = [(-p, -m) for p, m in currents]
    assert amplifier_output(negated, amp) == pytest.approx(
        -amplifier_output(currents, amp), rel=1e-12
    )


def test_amplifier_rejects_empty_input():
    amp = AmplifierParams(transimpedance_gain=1.0)
    with pytest.raises(CircuitError):
        amplifier_output([], amp)


def test_amplifier_clips_to_rails():
    amp = AmplifierParams(transimpedance_gain=1e9, output_clip=(0.0, 0.8))
    assert amplifier_output([(1e-3, 0.0)], amp, clip=True) == 0.8
    assert amplifier_output([(0.0, 1e-3)], amp, clip=True) == 0.0


def test_neuron_midpoint_and_extremes():
    assert neuron_activation(NEURON.bias_midpoint, NEURON) == pytest.approx(0.4, abs=1e-12)
    # smooth high-to-low: rails map near the opposite rail
    assert neuron_activation(NEURON.vdd, NEURON) < 0.02
    assert neuron_activation(NEURON.vss, NEURON) > 0.78


def test_neuron_one_slope_unit_above_midpoint():
    v = NEURON.bias_midpoint + 1.0 / NEURON.slope_k
    expected = NEURON.vss + NEURON.swing * 0.2689414213699951
    assert neuron_activation(v, NEURON) == pytest.approx(expected, rel=1e-9)


def test_neuron_strictly_decreasing_within_rails():
    voltages = [NEURON.vss + i * NEURON.swing / 20 for i in range(21)]
    outputs = [neuron_activation(v, NEURON) for v in voltages]
    assert all(a > b for a, b in zip(outputs, outputs[1:]))
    assert all(NEURON.vss < o < NEURON.vdd for o in outputs)


def test_ideal_neuron_table_values():
    assert ideal_neuron(0.0) == 0.5
    assert ideal_neuron(1.0) == pytest.approx(0.26894142, rel=1e-7)
    assert ideal_neuron(800.0) == pytest.approx(0.0, abs=1e-200)


@given(u=st.floats(min_value=-4.0, max_value=4.0, allow_nan=False))
def test_circuit_neuron_matches_ideal_after_normalization(u):
    # within the representable range (|u| <= k*(vdd-b)) the two agree exactly
    v_in = NEURON.bias_midpoint + u / NEURON.slope_k
    lhs = neuron_activation(v_in, NEURON)
    rhs = NEURON.vss + NEURON.swing * float(ideal_neuron(u))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_matched_gain_cancels_chain_scale():
    volts_per_unit = NEURON.swing / 2
    gain = matched_gain(DEVICE, NEURON, ZERO_BIAS, volts_per_unit)
    delta_g = conductance(DEVICE, P_STATE, ZERO_BIAS) - conductance(DEVICE, AP_STATE, ZERO_BIAS)
    assert gain * NEURON.slope_k * delta_g * volts_per_unit == pytest.approx(1.0, rel=1e-12)
