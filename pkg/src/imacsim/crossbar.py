"""One n x m IMAC subarray: row-serial weight programming and single-step
analog inference.

Weights live in an m x (n+1) grid of differential synapse pairs; the extra
always-driven column realizes the binarized bias. Ideal mode evaluates
sigmoid(-(Wx + B)) directly; circuit mode walks the full voltage/current
chain (input encoding -> per-cell currents -> shared amplifier -> neuron
VTC) and normalizes the output voltages back to numbers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .circuits import (
    AmplifierParams,
    NeuronParams,
    SynapsePair,
    matched_gain,
)
from .device import AP_STATE, BiasPoint, DeviceParams, P_STATE, ZERO_BIAS, conductance

MAX_DIM = 512  # one physical 512x512 subarray


class CrossbarError(ValueError):
    """Shape, value, or sequencing error on a subarray."""


class Fidelity(enum.Enum):
    IDEAL = "ideal"
    CIRCUIT = "circuit"


class InputEncoding(enum.Enum):
    """Voltage mapping of numeric inputs in circuit mode.

    UNIPOLAR: [0, 1] -> [vss, vdd] (pixels, inter-layer activations).
    BIPOLAR:  [-1, 1] -> +/-(vdd-vss)/2 about the amplifier reference
              (sign-unit trits at the CPU boundary).
    """

    UNIPOLAR = "unipolar"
    BIPOLAR = "bipolar"


@dataclass(frozen=True)
class SubarrayConfig:
    n_inputs: int
    m_rows: int
    device: DeviceParams = field(default_factory=DeviceParams)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    amp: AmplifierParams | None = None     # None -> matched gain
    fidelity: Fidelity = Fidelity.IDEAL
    encoding: InputEncoding = InputEncoding.UNIPOLAR
    read_bias: BiasPoint = ZERO_BIAS
    drive_bias: bool = True    # False on secondary slices of a split layer

    def __post_init__(self):
        for name, dim in (("n_inputs", self.n_inputs), ("m_rows", self.m_rows)):
            if not 1 <= dim <= MAX_DIM:
                raise CrossbarError(f"{name} must be in [1, {MAX_DIM}], got {dim}")

    @property
    def volts_per_unit(self) -> float:
        if self.encoding is InputEncoding.BIPOLAR:
            return self.neuron.swing / 2.0
        return self.neuron.swing

    def resolved_amp(self) -> AmplifierParams:
        if self.amp is not None:
            return self.amp
        gain = matched_gain(self.device, self.neuron, self.read_bias, self.volts_per_unit)
        return AmplifierParams(
            transimpedance_gain=gain,
            output_clip=(self.neuron.vss, self.neuron.vdd),
        )


def _as_binary(arr, name: str) -> np.ndarray:
    out = np.asarray(arr)
    if not np.all(np.isin(out, (-1, 1))):
        raise CrossbarError(f"{name} entries must be -1 or +1")
    return out.astype(np.int8)


class Subarray:
    """A programmable crossbar slice with its per-row amplifiers and neurons."""

    def __init__(self, config: SubarrayConfig):
        self.config = config
        self.programmed = False
        self._weights: np.ndarray | None = None   # (m, n) int8
        self._biases: np.ndarray | None = None    # (m,) int8
        g_p = conductance(config.device, P_STATE, config.read_bias)
        g_ap = conductance(config.device, AP_STATE, config.read_bias)
        self._g_p, self._g_ap = g_p, g_ap

    # -- configuration phase ------------------------------------------------

    def program(self, weights, biases) -> int:
        """Write the weight grid one row per clock cycle; returns the cycle
        count (== row count)."""
        cfg = self.config
        weights = _as_binary(weights, "weights")
        biases = _as_binary(biases, "biases")
        if weights.shape != (cfg.m_rows, cfg.n_inputs):
            raise CrossbarError(
                f"weights shape {weights.shape} != ({cfg.m_rows}, {cfg.n_inputs})"
            )
        if biases.shape != (cfg.m_rows,):
            raise CrossbarError(f"biases shape {biases.shape} != ({cfg.m_rows},)")
        self._weights = weights
        self._biases = biases
        self.programmed = True
        return cfg.m_rows

    def synapse(self, row: int, col: int) -> SynapsePair:
        """Pair state at (row, col); col == n_inputs addresses the bias column."""
        self._require_programmed()
        if col == self.config.n_inputs:
            return SynapsePair.from_weight(int(self._biases[row]))
        return SynapsePair.from_weight(int(self._weights[row, col]))

    @property
    def weights(self) -> np.ndarray:
        self._require_programmed()
        return self._weights.copy()

    @property
    def biases(self) -> np.ndarray:
        self._require_programmed()
        return self._biases.copy()

    # -- inference phase ----------------------------------------------------

    def forward(self, inputs) -> np.ndarray:
        """m neuron outputs for n inputs, in the active fidelity mode."""
        if self.config.fidelity is Fidelity.CIRCUIT:
            return self.forward_circuit(inputs)
        return self.forward_ideal(inputs)

    def forward_ideal(self, inputs) -> np.ndarray:
        return expit(-self.preactivation_ideal(inputs))

    def forward_circuit(self, inputs) -> np.ndarray:
        currents = self.row_currents(inputs)
        return self.currents_to_outputs(currents)

    def preactivation_ideal(self, inputs) -> np.ndarray:
        """Wx + B, the quantity each row's sigmoid sees in ideal mode."""
        x = self._check_inputs(inputs, validate_range=False)
        y = self._weights @ x
        if self.config.drive_bias:
            y = y + self._biases
        return y

    def row_currents(self, inputs) -> np.ndarray:
        """Summed differential current per row, bias column included (A).

        Exposed so split layers can merge partial sums at the amplifier
        stage before the shared neuron.
        """
        x = self._check_inputs(inputs, validate_range=True)
        volts = self._encode(x)
        # bias column at full-scale input where driven, grounded otherwise
        v_bias = self._encode(np.array([1.0])) if self.config.drive_bias else np.array([0.0])
        v_full = np.append(volts, v_bias)
        delta_g = (self._g_p - self._g_ap) * np.concatenate(
            [self._weights, self._biases[:, None]], axis=1
        )
        return delta_g @ v_full

    def currents_to_outputs(self, currents: np.ndarray) -> np.ndarray:
        """Shared amplifier + neuron stage: differential currents in, normalized
        sigmoid outputs in (0, 1) out. Split layers call this once on merged
        partial-sum currents."""
        neuron = self.config.neuron
        amp = self.config.resolved_amp()
        v_amp = neuron.bias_midpoint + amp.transimpedance_gain * currents
        v_amp = np.clip(v_amp, *amp.output_clip)
        v_out = neuron.vss + neuron.swing * expit(-neuron.slope_k * (v_amp - neuron.bias_midpoint))
        return (v_out - neuron.vss) / neuron.swing

    def forward_fidelity_gap(self, inputs) -> float:
        """Max abs deviation of circuit-mode normalized outputs from ideal."""
        ideal = self.forward_ideal(inputs)
        circuit = self.forward_circuit(inputs)
        return float(np.max(np.abs(circuit - ideal)))

    # -- helpers -------------------------------------------------------------

    def _encode(self, x: np.ndarray) -> np.ndarray:
        neuron = self.config.neuron
        if self.config.encoding is InputEncoding.BIPOLAR:
            return x * (neuron.swing / 2.0)
        return neuron.vss + x * neuron.swing

    def _check_inputs(self, inputs, validate_range: bool) -> np.ndarray:
        self._require_programmed()
        x = np.asarray(inputs, dtype=float)
        if x.shape != (self.config.n_inputs,):
            raise CrossbarError(f"input shape {x.shape} != ({self.config.n_inputs},)")
        if validate_range:
            lo, hi = (-1.0, 1.0) if self.config.encoding is InputEncoding.BIPOLAR else (0.0, 1.0)
            if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
                raise CrossbarError(
                    f"inputs outside the {self.config.encoding.value} range [{lo}, {hi}]"
                )
        return x

    def _require_programmed(self):
        if not self.programmed:
            raise CrossbarError("subarray has not been programmed")
