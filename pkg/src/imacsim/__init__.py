"""imacsim: simulator and training toolkit for an SOT-MRAM in-memory
analog computing (IMAC) co-processor.

Subsystems: MTJ device model, analog synapse/neuron circuits, crossbar
subarrays, multi-layer IMAC networks with netlist export, hardware-aware
binarized training, the CPU-IMAC transfer protocol, and an analytical
performance/energy model.
"""

__version__ = "0.1.0"

from .device import (
    AP_STATE,
    BiasPoint,
    DeviceError,
    DeviceParams,
    DeviceState,
    Orientation,
    P_STATE,
    ZERO_BIAS,
    base_resistance,
    conductance,
    resistance,
    tmr_at_bias,
)

__all__ = [
    "__version__",
    "AP_STATE",
    "BiasPoint",
    "DeviceError",
    "DeviceParams",
    "DeviceState",
    "Orientation",
    "P_STATE",
    "ZERO_BIAS",
    "base_resistance",
    "conductance",
    "resistance",
    "tmr_at_bias",
]
