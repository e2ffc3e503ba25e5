"""Multi-layer IMAC networks: maps trained binary parameters onto physical
512x512 subarrays and runs layer-by-layer analog inference.

Layers wider than one subarray are split into column (input) and row
(output) slices. Column slices of the same row group feed one shared
amplifier stage, so their partial sums merge before the neuron; each
slice occupies its own physical subarray because a crossbar's columns
carry exactly one input vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .circuits import AmplifierParams, NeuronParams
from .crossbar import (
    Fidelity,
    InputEncoding,
    MAX_DIM,
    Subarray,
    SubarrayConfig,
)
from .device import BiasPoint, DeviceParams, ZERO_BIAS

DEFAULT_CAPACITY = 4  # 4 x 512x512 subarrays, the 128KB budget


class MappingError(ValueError):
    """Parameters that do not fit the subarray budget or chain dimensions."""


@dataclass
class TrainedParameters:
    """Per-layer binary weight matrices (m, n) and bias vectors (m,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise MappingError("weights and biases must pair up per layer")
        self.weights = [np.asarray(w, dtype=np.int8) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.int8) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise MappingError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if not np.all(np.isin(w, (-1, 1))) or not np.all(np.isin(b, (-1, 1))):
                raise MappingError(f"layer {i}: entries must be -1 or +1")
        dims = self.layer_dims
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[1] != dims[i]:
                raise MappingError(
                    f"layer {i} input width {self.weights[i].shape[1]} != "
                    f"previous output width {dims[i]}"
                )

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]


@dataclass(frozen=True)
class SliceAssignment:
    subarray_id: int
    rows: tuple[int, int]  # half-open row range within the logical layer
    cols: tuple[int, int]  # half-open input-column range

    @property
    def drives_bias(self) -> bool:
        return self.cols[0] == 0  # bias pair rides on the first column slice


@dataclass
class ImacTopology:
    layer_dims: list[int]
    assignments: list[list[SliceAssignment]] = field(default_factory=list)
    capacity: int = DEFAULT_CAPACITY

    @property
    def subarrays_used(self) -> int:
        return sum(len(a) for a in self.assignments)


def plan_topology(dims: list[int], capacity: int = DEFAULT_CAPACITY) -> ImacTopology:
    """Assign each layer's slices to physical subarrays; raise if over budget."""
    topo = ImacTopology(layer_dims=list(dims), capacity=capacity)
    next_id = 0
    for layer in range(len(dims) - 1):
        n, m = dims[layer], dims[layer + 1]
        slices = []
        for r0 in range(0, m, MAX_DIM):
            r1 = min(r0 + MAX_DIM, m)
            for c0 in range(0, n, MAX_DIM):
                c1 = min(c0 + MAX_DIM, n)
                slices.append(SliceAssignment(next_id, (r0, r1), (c0, c1)))
                next_id += 1
        topo.assignments.append(slices)
    if topo.subarrays_used > capacity:
        raise MappingError(
            f"topology {dims} needs {topo.subarrays_used} subarrays, "
            f"budget is {capacity}"
        )
    return topo


class MappedLayer:
    """One logical FC layer spread over >= 1 programmed subarray slices."""

    def __init__(
        self,
        weights: np.ndarray,
        biases: np.ndarray,
        slices: list[SliceAssignment],
        device: DeviceParams,
        neuron: NeuronParams,
        amp: AmplifierParams | None,
        fidelity: Fidelity,
        encoding: InputEncoding,
        read_bias: BiasPoint,
    ):
        self.weights = weights
        self.biases = biases
        self.slices = slices
        self.neuron = neuron
        self.fidelity = fidelity
        self.encoding = encoding
        self.subarrays: list[Subarray] = []
        self.programming_cycles = 0
        for sl in slices:
            r0, r1 = sl.rows
            c0, c1 = sl.cols
            cfg = SubarrayConfig(
                n_inputs=c1 - c0,
                m_rows=r1 - r0,
                device=device,
                neuron=neuron,
                amp=amp,
                fidelity=fidelity,
                encoding=encoding,
                read_bias=read_bias,
                drive_bias=sl.drives_bias,
            )
            sub = Subarray(cfg)
            # undriven slices still need legal cell states; reuse the row biases
            self.programming_cycles += sub.program(weights[r0:r1, c0:c1], biases[r0:r1])
            self.subarrays.append(sub)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    @property
    def m_rows(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.fidelity is Fidelity.CIRCUIT:
            return self._forward_circuit(x)
        return self._forward_ideal(x)

    def _forward_ideal(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.m_rows)
        for sl, sub in zip(self.slices, self.subarrays):
            r0, r1 = sl.rows
            c0, c1 = sl.cols
            y[r0:r1] += sub.preactivation_ideal(x[c0:c1])
        return expit(-y)

    def _forward_circuit(self, x: np.ndarray) -> np.ndarray:
        # merge column-slice partial sums as currents, then one amp + neuron
        currents = np.zeros(self.m_rows)
        for sl, sub in zip(self.slices, self.subarrays):
            r0, r1 = sl.rows
            c0, c1 = sl.cols
            currents[r0:r1] += sub.row_currents(x[c0:c1])
        reference = self.subarrays[0]
        return reference.currents_to_outputs(currents)


class ImacNetwork:
    """A fully mapped feed-forward stack of IMAC layers."""

    def __init__(self, topology: ImacTopology, layers: list[MappedLayer]):
        self.topology = topology
        self.layers = layers

    @property
    def layer_dims(self) -> list[int]:
        return self.topology.layer_dims

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.layer_dims[0],):
            raise MappingError(f"input shape {x.shape} != ({self.layer_dims[0]},)")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def infer(self, x) -> tuple[np.ndarray, int]:
        """Final-layer scores and the argmax label."""
        scores = self.forward(x)
        return scores, int(np.argmax(scores))

    def infer_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.infer(x)[1] for x in np.asarray(xs, dtype=float)])


def map_network(
    params: TrainedParameters,
    capacity: int = DEFAULT_CAPACITY,
    device: DeviceParams | None = None,
    neuron: NeuronParams | None = None,
    amp: AmplifierParams | list[AmplifierParams] | None = None,
    fidelity: Fidelity = Fidelity.IDEAL,
    first_layer_encoding: InputEncoding = InputEncoding.UNIPOLAR,
    read_bias: BiasPoint = ZERO_BIAS,
) -> ImacNetwork:
    """Program every layer onto subarrays and wire them in sequence.

    Hidden layers always use the unipolar encoding (they receive neuron
    output voltages); the first layer's encoding depends on the source:
    unipolar for pixels, bipolar for sign-unit trits. `amp` may be a
    single parameter set for all layers, one per layer, or None for the
    matched gain.
    """
    device = device or DeviceParams()
    neuron = neuron or NeuronParams()
    topo = plan_topology(params.layer_dims, capacity)
    n_layers = len(topo.assignments)
    if amp is None or isinstance(amp, AmplifierParams):
        amps = [amp] * n_layers
    else:
        amps = list(amp)
        if len(amps) != n_layers:
            raise MappingError(f"got {len(amps)} amplifier sets for {n_layers} layers")
    layers = []
    for i, slices in enumerate(topo.assignments):
        encoding = first_layer_encoding if i == 0 else InputEncoding.UNIPOLAR
        layers.append(
            MappedLayer(
                params.weights[i],
                params.biases[i],
                slices,
                device=device,
                neuron=neuron,
                amp=amps[i],
                fidelity=fidelity,
                encoding=encoding,
                read_bias=read_bias,
            )
        )
    return ImacNetwork(topo, layers)
