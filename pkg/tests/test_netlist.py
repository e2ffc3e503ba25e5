import numpy as np
import pytest

from imacsim.crossbar import InputEncoding
from imacsim.netlist import (
    NetlistError,
    export_netlist,
    network_from_doc,
    parse_netlist,
    render_netlist,
)
from imacsim.network import TrainedParameters, map_network

R_P = "8488.263631567752"
R_AP = "25464.790894703256"


def tiny_network():
    params = TrainedParameters(
        weights=[np.array([[1, -1]], dtype=int)], biases=[np.array([1], dtype=int)]
    )
    return params, map_network(params)


def test_export_counts_for_2x1_net():
    _, net = tiny_network()
    text = export_netlist(net)
    lines = text.splitlines()
    assert lines.count("SUBCKT L0") == 1
    assert sum(1 for l in lines if l.startswith("XCELL")) == 6
    assert sum(1 for l in lines if l.startswith("XAMP")) == 1
    assert sum(1 for l in lines if l.startswith("XNEURON")) == 1
    assert text.endswith("ENDS\n")


def test_export_resistance_annotations_match_device_model():
    _, net = tiny_network()
    text = export_netlist(net)
    assert f"XCELL 0 0 STATE=P R={R_P}" in text
    assert f"XCELL 0 1 STATE=AP R={R_AP}" in text
    # weight -1 at pair column 1 flips the pair
    assert f"XCELL 0 2 STATE=AP R={R_AP}" in text
    assert f"XCELL 0 3 STATE=P R={R_P}" in text


def test_round_trip_is_byte_identical():
    rng = np.random.default_rng(17)
    dims = [5, 4, 3]
    params = TrainedParameters(
        weights=[rng.choice((-1, 1), size=(dims[i + 1], dims[i])) for i in range(2)],
        biases=[rng.choice((-1, 1), size=dims[i + 1]) for i in range(2)],
    )
    net = map_network(params)
    text = export_netlist(net)
    assert render_netlist(parse_netlist(text)) == text


def test_round_trip_through_rebuilt_network():
    rng = np.random.default_rng(23)
    params = TrainedParameters(
        weights=[rng.choice((-1, 1), size=(3, 7))], biases=[rng.choice((-1, 1), size=3)]
    )
    net = map_network(params, first_layer_encoding=InputEncoding.BIPOLAR)
    text = export_netlist(net)
    rebuilt = network_from_doc(parse_netlist(text))
    assert export_netlist(rebuilt) == text
    x = rng.choice((-1.0, 0.0, 1.0), size=7)
    got = rebuilt.forward(x)
    want = net.forward(x)
    assert np.array_equal(got, want)  # bit-for-bit in ideal mode


def test_parse_hand_written_minimal_netlist():
    text = (
        "SUBCKT L0\n"
        f"XCELL 0 0 STATE=P R={R_P}\n"
        f"XCELL 0 1 STATE=AP R={R_AP}\n"
        f"XCELL 0 2 STATE=AP R={R_AP}\n"
        f"XCELL 0 3 STATE=P R={R_P}\n"
        "XAMP 0 GAIN=1000.0\n"
        "XNEURON 0 K=10.0 B=0.4\n"
        "ENDS\n"
    )
    doc = parse_netlist(text)
    assert len(doc.layers) == 1
    assert doc.layers[0].n_inputs == 1
    net = network_from_doc(doc)
    assert net.layers[0].weights.tolist() == [[1]]
    assert net.layers[0].biases.tolist() == [-1]


def test_truncated_file_names_line():
    _, net = tiny_network()
    lines = export_netlist(net).splitlines()
    truncated = "\n".join(lines[:-1])  # drop final ENDS
    with pytest.raises(NetlistError) as excinfo:
        parse_netlist(truncated)
    assert "ENDS" in str(excinfo.value)
    assert excinfo.value.line is not None


def test_unknown_card_rejected_with_line():
    text = "SUBCKT L0\nXWIDGET 0\nENDS\n"
    with pytest.raises(NetlistError) as excinfo:
        parse_netlist(text)
    assert "line 2" in str(excinfo.value)
    assert "XWIDGET" in str(excinfo.value)


def test_dangling_node_detected():
    text = (
        "SUBCKT L0\n"
        f"XCELL 0 0 STATE=P R={R_P}\n"
        f"XCELL 0 1 STATE=AP R={R_AP}\n"
        f"XCELL 0 2 STATE=AP R={R_AP}\n"
        "XAMP 0 GAIN=1000.0\n"
        "XNEURON 0 K=10.0 B=0.4\n"
        "ENDS\n"
    )
    with pytest.raises(NetlistError) as excinfo:
        parse_netlist(text)
    assert "dangling" in str(excinfo.value)


def test_illegal_pair_state_detected():
    text = (
        "SUBCKT L0\n"
        f"XCELL 0 0 STATE=P R={R_P}\n"
        f"XCELL 0 1 STATE=P R={R_P}\n"
        f"XCELL 0 2 STATE=AP R={R_AP}\n"
        f"XCELL 0 3 STATE=P R={R_P}\n"
        "XAMP 0 GAIN=1000.0\n"
        "XNEURON 0 K=10.0 B=0.4\n"
        "ENDS\n"
    )
    with pytest.raises(NetlistError) as excinfo:
        parse_netlist(text)
    assert "illegal pair" in str(excinfo.value)


def test_mismatched_chain_detected():
    rng = np.random.default_rng(5)
    good = TrainedParameters(
        weights=[rng.choice((-1, 1), size=(2, 3)), rng.choice((-1, 1), size=(1, 2))],
        biases=[rng.choice((-1, 1), size=2), rng.choice((-1, 1), size=1)],
    )
    text = export_netlist(map_network(good))
    # widen L1's input grid by renaming a cell into a 3rd pair column -> chain break
    bad = text.replace("SUBCKT L1\nXCELL 0 0", "SUBCKT L1\nXCELL 0 6", 1)
    with pytest.raises(NetlistError):
        parse_netlist(bad)
