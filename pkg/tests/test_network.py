import math

import numpy as np
import pytest

from imacsim.crossbar import Fidelity, InputEncoding
from imacsim.network import (
    DEFAULT_CAPACITY,
    ImacNetwork,
    MappingError,
    TrainedParameters,
    map_network,
    plan_topology,
)


def random_params(rng, dims) -> TrainedParameters:
    weights = [rng.choice((-1, 1), size=(dims[i + 1], dims[i])) for i in range(len(dims) - 1)]
    biases = [rng.choice((-1, 1), size=dims[i + 1]) for i in range(len(dims) - 1)]
    return TrainedParameters(weights=weights, biases=biases)


def composed_oracle(params: TrainedParameters, x):
    """Independent layer-composition reference using plain python."""
    values = list(x)
    for w, b in zip(params.weights, params.biases):
        nxt = []
        for r in range(w.shape[0]):
            y = float(b[r]) + sum(float(w[r, c]) * values[c] for c in range(w.shape[1]))
            nxt.append(1.0 / (1.0 + math.exp(y)) if abs(y) < 700 else (0.0 if y > 0 else 1.0))
        values = nxt
    return np.array(values)


def test_plan_small_net_single_slice():
    topo = plan_topology([4, 2])
    assert topo.subarrays_used == 1
    assert topo.assignments[0][0].cols == (0, 4)
    assert topo.assignments[0][0].rows == (0, 2)


def test_plan_mnist_mlp_splits_wide_layer():
    topo = plan_topology([784, 16, 10])
    assert [len(a) for a in topo.assignments] == [2, 1]
    first = topo.assignments[0]
    assert first[0].cols == (0, 512) and first[1].cols == (512, 784)
    assert first[0].drives_bias and not first[1].drives_bias
    assert topo.subarrays_used == 3 <= DEFAULT_CAPACITY


def test_plan_rejects_over_budget():
    plan_topology([512, 512, 512, 512, 512])  # 4 full subarrays: exactly at budget
    with pytest.raises(MappingError):
        plan_topology([784, 512, 512, 512, 10])  # split first layer pushes to 5
    plan_topology([784, 512, 512, 512, 10], capacity=8)


def test_map_network_programs_all_layers():
    rng = np.random.default_rng(0)
    params = random_params(rng, [4, 2])
    net = map_network(params)
    assert len(net.layers) == 1
    assert net.layers[0].programming_cycles == 2


def test_all_zero_input_bias_plus_one_toy():
    params = TrainedParameters(
        weights=[np.ones((3, 5), dtype=int)], biases=[np.ones(3, dtype=int)]
    )
    net = map_network(params)
    out = net.forward(np.zeros(5))
    assert out == pytest.approx([1 / (1 + math.e)] * 3, rel=1e-12)


def test_two_layer_matches_composition_oracle():
    rng = np.random.default_rng(42)
    params = random_params(rng, [6, 4, 3])
    net = map_network(params)
    for _ in range(20):
        x = rng.uniform(0, 1, size=6)
        scores, label = net.infer(x)
        want = composed_oracle(params, x)
        assert np.max(np.abs(scores - want)) <= 1e-12
        assert label == int(np.argmax(want))


def test_split_invariance_of_ideal_forward():
    # same parameters mapped whole (capacity 1 slice) vs split across slices
    rng = np.random.default_rng(1)
    dims = [700, 8]
    params = random_params(rng, dims)
    net_split = map_network(params)  # 700 -> 512 + 188 split
    assert net_split.topology.subarrays_used == 2

    whole = np.zeros(8)
    x = rng.uniform(0, 1, size=700)
    w, b = params.weights[0], params.biases[0]
    whole = 1 / (1 + np.exp(w @ x + b))
    assert net_split.forward(x) == pytest.approx(whole, rel=1e-12)


def test_split_invariance_circuit_mode():
    rng = np.random.default_rng(2)
    dims = [700, 8]
    params = random_params(rng, dims)
    net = map_network(params, fidelity=Fidelity.CIRCUIT)
    x = rng.uniform(0, 1, size=700)
    ideal = map_network(params).forward(x)
    # matched gain keeps circuit mode at the ideal values up to rail clipping
    got = net.forward(x)
    assert np.max(np.abs(got - ideal)) <= 0.05


def test_infer_validates_input_shape():
    params = TrainedParameters(weights=[np.ones((2, 3), dtype=int)], biases=[np.ones(2, dtype=int)])
    net = map_network(params)
    with pytest.raises(MappingError):
        net.forward(np.zeros(4))


def test_chained_dims_validated():
    with pytest.raises(MappingError):
        TrainedParameters(
            weights=[np.ones((4, 3), dtype=int), np.ones((2, 5), dtype=int)],
            biases=[np.ones(4, dtype=int), np.ones(2, dtype=int)],
        )


def test_bipolar_first_layer_accepts_trits():
    rng = np.random.default_rng(3)
    params = random_params(rng, [9, 4, 2])
    net = map_network(
        params, fidelity=Fidelity.CIRCUIT, first_layer_encoding=InputEncoding.BIPOLAR
    )
    trits = rng.choice((-1.0, 0.0, 1.0), size=9)
    ideal = map_network(params).forward(trits)
    assert np.max(np.abs(net.forward(trits) - ideal)) <= 0.05
