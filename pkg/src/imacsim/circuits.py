"""Analog primitives: the two-cell differential synapse with its shared
amplifier, and the two-cell sigmoidal neuron.

Both exist in two fidelities. Ideal mode works on plain numbers
(``ideal_neuron``); circuit mode works on volts and amperes derived from
device conductances and reproduces the ideal math after affine
normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.special import expit

from .device import BiasPoint, DeviceParams, DeviceState, Orientation, conductance


class CircuitError(ValueError):
    """Invalid circuit input or parameters."""


@dataclass(frozen=True)
class SynapsePair:
    """Two SOT-MRAM cells encoding one binary weight.

    Weight +1 puts the G+ device in P and the G- device in AP; weight -1
    is the mirror image. No other configuration is used.
    """

    plus_state: DeviceState
    minus_state: DeviceState

    @classmethod
    def from_weight(cls, weight: int) -> "SynapsePair":
        if weight == 1:
            return cls(DeviceState(Orientation.P), DeviceState(Orientation.AP))
        if weight == -1:
            return cls(DeviceState(Orientation.AP), DeviceState(Orientation.P))
        raise CircuitError(f"binary weight must be +1 or -1, got {weight!r}")

    @property
    def weight(self) -> int:
        return 1 if self.plus_state.orientation is Orientation.P else -1


@dataclass(frozen=True)
class NeuronParams:
    """Supply rails and transition steepness of the sigmoidal neuron.

    The transfer curve is modeled as a scaled logistic biased around the
    midpoint b = (vdd - vss)/2; slope_k is a fit parameter (1/V), not a
    measured value.
    """

    vdd: float = 0.8
    vss: float = 0.0
    slope_k: float = 10.0

    def __post_init__(self):
        if not self.vdd > self.vss:
            raise CircuitError(f"vdd must exceed vss, got {self.vdd} <= {self.vss}")
        if not self.slope_k > 0:
            raise CircuitError(f"slope_k must be positive, got {self.slope_k}")

    @property
    def bias_midpoint(self) -> float:
        return (self.vdd - self.vss) / 2.0

    @property
    def swing(self) -> float:
        return self.vdd - self.vss


@dataclass(frozen=True)
class AmplifierParams:
    """Shared per-row differential amplifier: V_out = gain * sum(I+ - I-)."""

    transimpedance_gain: float
    output_clip: tuple[float, float] = (0.0, 0.8)

    def __post_init__(self):
        if not self.transimpedance_gain > 0:
            raise CircuitError(
                f"transimpedance gain must be positive, got {self.transimpedance_gain}"
            )
        if not self.output_clip[0] < self.output_clip[1]:
            raise CircuitError(f"degenerate output clip range {self.output_clip!r}")


def synapse_currents(
    pair: SynapsePair,
    input_voltage: float,
    device: DeviceParams,
    bias: BiasPoint,
) -> tuple[float, float]:
    """Currents through the two cells: (x*G+, x*G-)."""
    g_plus = conductance(device, pair.plus_state, bias)
    g_minus = conductance(device, pair.minus_state, bias)
    return input_voltage * g_plus, input_voltage * g_minus


def amplifier_output(
    currents: Sequence[tuple[float, float]],
    amp: AmplifierParams,
    reference: float = 0.0,
    clip: bool = False,
) -> float:
    """Row output voltage: reference + gain * sum of differential currents.

    The crossbar's circuit mode passes the neuron midpoint as reference and
    clips to the supply rails; ideal-mode callers leave both at defaults.
    """
    if len(currents) == 0:
        raise CircuitError("amplifier needs at least one synapse current pair")
    total = math.fsum(i_plus - i_minus for i_plus, i_minus in currents)
    v_out = reference + amp.transimpedance_gain * total
    if clip:
        lo, hi = amp.output_clip
        v_out = min(max(v_out, lo), hi)
    return v_out


def neuron_activation(v_in: float, neuron: NeuronParams) -> float:
    """Voltage transfer curve of the neuron.

    The input is clipped to the supply range, then mapped through a
    falling logistic centered on the bias midpoint:

        vss + (vdd - vss) * sigmoid(-slope_k * (v_in - b))
    """
    v_in = min(max(v_in, neuron.vss), neuron.vdd)
    u = neuron.slope_k * (v_in - neuron.bias_midpoint)
    return neuron.vss + neuron.swing * float(expit(-u))


def ideal_neuron(x):
    """sigmoid(-x); scalar or ndarray. Used by ideal mode and training."""
    return expit(-x)


def matched_gain(
    device: DeviceParams,
    neuron: NeuronParams,
    bias: BiasPoint,
    volts_per_unit: float,
) -> float:
    """Transimpedance gain that makes the circuit chain compute sigmoid(-y)
    exactly (up to rail clipping) for the given input encoding.

    Cancels the encoding scale and the neuron slope:
    gain * slope_k * (G_P - G_AP) * volts_per_unit = 1.
    """
    from .device import AP_STATE, P_STATE  # local to avoid import cycle noise

    delta_g = conductance(device, P_STATE, bias) - conductance(device, AP_STATE, bias)
    if delta_g <= 0:
        raise CircuitError("device TMR must be positive for a usable synapse")
    return 1.0 / (neuron.slope_k * delta_g * volts_per_unit)


def full_scale_gain(
    n_inputs: int,
    device: DeviceParams,
    neuron: NeuronParams,
    bias: BiasPoint,
) -> float:
    """Gain mapping a maximally-active n-input row onto the full output swing:
    (vdd - vss) / (n * vdd * (G_P - G_AP)). Kept for experiments; the matched
    gain is the default because it tracks the ideal math independent of n.
    """
    from .device import AP_STATE, P_STATE

    delta_g = conductance(device, P_STATE, bias) - conductance(device, AP_STATE, bias)
    if delta_g <= 0:
        raise CircuitError("device TMR must be positive for a usable synapse")
    return neuron.swing / (n_inputs * neuron.vdd * delta_g)
