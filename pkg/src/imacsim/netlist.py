"""SPICE-style netlist export/parse for mapped IMAC networks.

Line-oriented card grammar, one subcircuit block per logical layer:

    SUBCKT L<k>
    XCELL <row> <col> STATE=P|AP R=<ohms>
    XAMP <row> GAIN=<v_per_a>
    XNEURON <row> K=<slope> B=<bias>
    ENDS
    CONNECT L<k> L<k+1>

Each synapse pair occupies two physical cells: the G+ cell at column 2c
and the G- cell at column 2c+1; pair column n (one past the inputs) is
the bias pair. Resistances are annotated at zero bias. Output is UTF-8
with LF line endings and deterministic ordering, so export -> parse ->
export round-trips byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import AmplifierParams, NeuronParams
from .crossbar import Fidelity, InputEncoding
from .device import AP_STATE, DeviceParams, P_STATE, ZERO_BIAS, resistance
from .network import ImacNetwork, TrainedParameters, map_network


class NetlistError(ValueError):
    """Malformed netlist; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class LayerBlock:
    """Parsed or to-be-rendered contents of one SUBCKT block."""

    index: int
    # (row, col) -> (state "P"/"AP", resistance ohms); col counts cells, not pairs
    cells: dict[tuple[int, int], tuple[str, float]] = field(default_factory=dict)
    amp_gain: dict[int, float] = field(default_factory=dict)
    neuron_kb: dict[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def m_rows(self) -> int:
        return max(r for r, _ in self.cells) + 1

    @property
    def n_inputs(self) -> int:
        # cells span 2*(n+1) columns: n weight pairs plus the bias pair
        return (max(c for _, c in self.cells) + 1) // 2 - 1


@dataclass
class NetlistDoc:
    layers: list[LayerBlock]
    connections: list[tuple[int, int]]


def _fmt(x: float) -> str:
    return repr(float(x))


def network_to_doc(network: ImacNetwork) -> NetlistDoc:
    """Snapshot a mapped network as netlist cards (logical layer view)."""
    layers = []
    for k, layer in enumerate(network.layers):
        sub0 = layer.subarrays[0]
        device = sub0.config.device
        r_p = resistance(device, P_STATE, ZERO_BIAS)
        r_ap = resistance(device, AP_STATE, ZERO_BIAS)
        amp = sub0.config.resolved_amp()
        neuron = sub0.config.neuron

        block = LayerBlock(index=k)
        grid = np.concatenate([layer.weights, layer.biases[:, None]], axis=1)
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                if grid[r, c] == 1:
                    plus, minus = ("P", r_p), ("AP", r_ap)
                else:
                    plus, minus = ("AP", r_ap), ("P", r_p)
                block.cells[(r, 2 * c)] = plus
                block.cells[(r, 2 * c + 1)] = minus
            block.amp_gain[r] = amp.transimpedance_gain
            block.neuron_kb[r] = (neuron.slope_k, neuron.bias_midpoint)
        layers.append(block)
    connections = [(k, k + 1) for k in range(len(layers) - 1)]
    return NetlistDoc(layers=layers, connections=connections)


def render_netlist(doc: NetlistDoc) -> str:
    lines = []
    for block in doc.layers:
        lines.append(f"SUBCKT L{block.index}")
        for (r, c) in sorted(block.cells):
            state, ohms = block.cells[(r, c)]
            lines.append(f"XCELL {r} {c} STATE={state} R={_fmt(ohms)}")
        for r in sorted(block.amp_gain):
            lines.append(f"XAMP {r} GAIN={_fmt(block.amp_gain[r])}")
        for r in sorted(block.neuron_kb):
            k_slope, b = block.neuron_kb[r]
            lines.append(f"XNEURON {r} K={_fmt(k_slope)} B={_fmt(b)}")
        lines.append("ENDS")
    for a, b in doc.connections:
        lines.append(f"CONNECT L{a} L{b}")
    return "\n".join(lines) + "\n"


def export_netlist(network: ImacNetwork) -> str:
    """Deterministic netlist text for a mapped network."""
    return render_netlist(network_to_doc(network))


def _parse_layer_ref(token: str, lineno: int) -> int:
    if not token.startswith("L") or not token[1:].isdigit():
        raise NetlistError(f"bad layer reference {token!r}", lineno)
    return int(token[1:])


def _parse_kv(token: str, key: str, lineno: int) -> str:
    prefix = key + "="
    if not token.startswith(prefix):
        raise NetlistError(f"expected {key}=..., got {token!r}", lineno)
    return token[len(prefix):]


def _parse_float(text: str, what: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise NetlistError(f"bad {what} value {text!r}", lineno) from None


def parse_netlist(text: str) -> NetlistDoc:
    """Parse netlist text back into card form, validating the grammar,
    grid completeness, pair legality, and inter-layer dimension chaining."""
    layers: dict[int, LayerBlock] = {}
    connections: list[tuple[int, int]] = []
    current: LayerBlock | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        card = tokens[0]

        if card == "SUBCKT":
            if current is not None:
                raise NetlistError("nested SUBCKT (missing ENDS)", lineno)
            if len(tokens) != 2:
                raise NetlistError("SUBCKT takes exactly one layer name", lineno)
            index = _parse_layer_ref(tokens[1], lineno)
            if index in layers:
                raise NetlistError(f"duplicate layer L{index}", lineno)
            current = LayerBlock(index=index)
        elif card == "ENDS":
            if current is None:
                raise NetlistError("ENDS outside a SUBCKT block", lineno)
            if not current.cells:
                raise NetlistError(f"layer L{current.index} has no cells", lineno)
            layers[current.index] = current
            current = None
        elif card == "XCELL":
            if current is None:
                raise NetlistError("XCELL outside a SUBCKT block", lineno)
            if len(tokens) != 5:
                raise NetlistError("XCELL takes: row col STATE= R=", lineno)
            r, c = int(tokens[1]), int(tokens[2])
            state = _parse_kv(tokens[3], "STATE", lineno)
            if state not in ("P", "AP"):
                raise NetlistError(f"unknown cell state {state!r}", lineno)
            ohms = _parse_float(_parse_kv(tokens[4], "R", lineno), "resistance", lineno)
            if (r, c) in current.cells:
                raise NetlistError(f"duplicate cell ({r}, {c})", lineno)
            current.cells[(r, c)] = (state, ohms)
        elif card == "XAMP":
            if current is None:
                raise NetlistError("XAMP outside a SUBCKT block", lineno)
            if len(tokens) != 3:
                raise NetlistError("XAMP takes: row GAIN=", lineno)
            r = int(tokens[1])
            current.amp_gain[r] = _parse_float(
                _parse_kv(tokens[2], "GAIN", lineno), "gain", lineno
            )
        elif card == "XNEURON":
            if current is None:
                raise NetlistError("XNEURON outside a SUBCKT block", lineno)
            if len(tokens) != 4:
                raise NetlistError("XNEURON takes: row K= B=", lineno)
            r = int(tokens[1])
            k_slope = _parse_float(_parse_kv(tokens[2], "K", lineno), "slope", lineno)
            b = _parse_float(_parse_kv(tokens[3], "B", lineno), "neuron bias", lineno)
            current.neuron_kb[r] = (k_slope, b)
        elif card == "CONNECT":
            if current is not None:
                raise NetlistError("CONNECT inside a SUBCKT block", lineno)
            if len(tokens) != 3:
                raise NetlistError("CONNECT takes two layer names", lineno)
            connections.append(
                (_parse_layer_ref(tokens[1], lineno), _parse_layer_ref(tokens[2], lineno))
            )
        else:
            raise NetlistError(f"unknown card {card!r}", lineno)

    if current is not None:
        raise NetlistError(
            f"unterminated SUBCKT L{current.index} (missing ENDS)",
            len(text.splitlines()),
        )
    if not layers:
        raise NetlistError("netlist contains no layers")

    ordered = [layers[i] for i in sorted(layers)]
    if sorted(layers) != list(range(len(ordered))):
        raise NetlistError(f"layer indices not contiguous: {sorted(layers)}")
    _validate_blocks(ordered)

    for a, b in connections:
        if a not in layers or b not in layers:
            raise NetlistError(f"CONNECT references missing layer L{a if a not in layers else b}")
        if b != a + 1:
            raise NetlistError(f"CONNECT L{a} L{b} is not a forward chain link")
    expected = [(k, k + 1) for k in range(len(ordered) - 1)]
    if connections != expected:
        raise NetlistError(f"connection list {connections} != expected chain {expected}")
    return NetlistDoc(layers=ordered, connections=connections)


def _validate_blocks(blocks: list[LayerBlock]):
    for block in blocks:
        m, n = block.m_rows, block.n_inputs
        for r in range(m):
            for c in range(n + 1):
                plus = block.cells.get((r, 2 * c))
                minus = block.cells.get((r, 2 * c + 1))
                if plus is None or minus is None:
                    raise NetlistError(
                        f"layer L{block.index}: dangling node at row {r} pair {c}"
                    )
                if {plus[0], minus[0]} != {"P", "AP"}:
                    raise NetlistError(
                        f"layer L{block.index}: illegal pair state ({plus[0]}, {minus[0]}) "
                        f"at row {r} pair {c}"
                    )
            if r not in block.amp_gain:
                raise NetlistError(f"layer L{block.index}: row {r} has no amplifier")
            if r not in block.neuron_kb:
                raise NetlistError(f"layer L{block.index}: row {r} has no neuron")
        extra = set(block.cells) - {(r, c) for r in range(m) for c in range(2 * (n + 1))}
        if extra:
            raise NetlistError(f"layer L{block.index}: dangling cells {sorted(extra)[:3]}")
    for a, b in zip(blocks, blocks[1:]):
        if a.m_rows != b.n_inputs:
            raise NetlistError(
                f"dangling node: L{a.index} drives {a.m_rows} rows but "
                f"L{b.index} expects {b.n_inputs} inputs"
            )


def doc_to_parameters(doc: NetlistDoc) -> TrainedParameters:
    weights, biases = [], []
    for block in doc.layers:
        m, n = block.m_rows, block.n_inputs
        w = np.empty((m, n), dtype=np.int8)
        b = np.empty(m, dtype=np.int8)
        for r in range(m):
            for c in range(n + 1):
                sign = 1 if block.cells[(r, 2 * c)][0] == "P" else -1
                if c == n:
                    b[r] = sign
                else:
                    w[r, c] = sign
        weights.append(w)
        biases.append(b)
    return TrainedParameters(weights=weights, biases=biases)


def network_from_doc(
    doc: NetlistDoc,
    capacity: int | None = None,
    device: DeviceParams | None = None,
    fidelity: Fidelity = Fidelity.IDEAL,
    first_layer_encoding: InputEncoding = InputEncoding.UNIPOLAR,
) -> ImacNetwork:
    """Rebuild an equivalent mapped network from parsed cards.

    The grammar does not carry supply rails, so vss = 0 is assumed and
    vdd recovered from the neuron bias midpoint (vdd = 2B). Amplifier
    gains are taken per layer, so a later export reproduces them. Ideal-
    mode inference depends only on the recovered weights/biases and is
    bit-identical to the exporting network's.
    """
    params = doc_to_parameters(doc)
    kb_values = {kb for block in doc.layers for kb in block.neuron_kb.values()}
    if len(kb_values) != 1:
        raise NetlistError(f"non-uniform neuron parameters across rows: {sorted(kb_values)}")
    k_slope, b = next(iter(kb_values))
    neuron = NeuronParams(vdd=2 * b, vss=0.0, slope_k=k_slope)
    amps = []
    for block in doc.layers:
        gains = set(block.amp_gain.values())
        if len(gains) != 1:
            raise NetlistError(
                f"layer L{block.index}: non-uniform amplifier gains {sorted(gains)}"
            )
        amps.append(
            AmplifierParams(
                transimpedance_gain=next(iter(gains)),
                output_clip=(neuron.vss, neuron.vdd),
            )
        )
    kwargs = {} if capacity is None else {"capacity": capacity}
    return map_network(
        params,
        device=device,
        neuron=neuron,
        amp=amps,
        fidelity=fidelity,
        first_layer_encoding=first_layer_encoding,
        **kwargs,
    )
