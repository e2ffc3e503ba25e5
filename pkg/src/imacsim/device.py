"""SOT-MRAM/MTJ compact resistance model.

The cell resistance follows the standard angle-dependent form

    R(theta) = 2*R_MTJ*(1 + TMR) / (2 + TMR*(1 + cos(theta)))

with R_MTJ = RA / area and a bias-dependent tunneling magnetoresistance

    TMR(V_b) = (TMR0/100) / (1 + (V_b/V0)^2).

Everything downstream (synapses, crossbars, netlists) obtains its
conductances from this module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class DeviceError(ValueError):
    """Invalid device parameters or bias point."""


class Orientation(enum.Enum):
    """Relative magnetization of the free layer: parallel or antiparallel."""

    P = 0       # theta = 0
    AP = 1      # theta = pi


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the SOT-MRAM cell.

    ra_product   resistance-area product, ohm * um^2
    tmr0         zero-bias TMR constant, stored as a percentage (200 -> 2.0)
    v0           bias fitting parameter, V
    mtj_length   long axis of the elliptical MTJ, nm
    mtj_width    short axis, nm
    hm_dims      heavy-metal l x w x t in nm; provenance only, the read
                 path never uses it
    """

    ra_product: float = 10.0
    tmr0: float = 200.0
    v0: float = 0.65
    mtj_length: float = 50.0
    mtj_width: float = 30.0
    hm_dims: tuple[float, float, float] = (100.0, 50.0, 3.0)

    def __post_init__(self):
        for name in ("ra_product", "tmr0", "v0", "mtj_length", "mtj_width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DeviceError(f"{name} must be strictly positive, got {value!r}")
        if any(not (math.isfinite(d) and d > 0) for d in self.hm_dims):
            raise DeviceError(f"hm_dims must be strictly positive, got {self.hm_dims!r}")

    @property
    def area_um2(self) -> float:
        """Elliptical junction area l*w*pi/4, converted from nm^2 to um^2."""
        return self.mtj_length * self.mtj_width * math.pi / 4.0 * 1e-6


@dataclass(frozen=True)
class DeviceState:
    orientation: Orientation = Orientation.P

    @property
    def theta(self) -> float:
        return 0.0 if self.orientation is Orientation.P else math.pi


@dataclass(frozen=True)
class BiasPoint:
    """Bias voltage across the junction during a read."""

    v_b: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.v_b):
            raise DeviceError(f"bias voltage must be finite, got {self.v_b!r}")


# Convenience singletons for the two legal states.
P_STATE = DeviceState(Orientation.P)
AP_STATE = DeviceState(Orientation.AP)
ZERO_BIAS = BiasPoint(0.0)


def base_resistance(params: DeviceParams) -> float:
    """R_MTJ = RA / area, in ohms (RA in ohm*um^2, dimensions in nm)."""
    return params.ra_product / params.area_um2


def tmr_at_bias(params: DeviceParams, bias: BiasPoint) -> float:
    """Bias-dependent TMR, dimensionless (2.0 at zero bias for TMR0 = 200)."""
    return (params.tmr0 / 100.0) / (1.0 + (bias.v_b / params.v0) ** 2)


def resistance(params: DeviceParams, state: DeviceState, bias: BiasPoint) -> float:
    """Angle-dependent junction resistance in ohms.

    At theta = 0 the TMR terms cancel exactly and the result equals
    base_resistance regardless of bias; at theta = pi it is
    base_resistance * (1 + TMR(V_b)).
    """
    r_mtj = base_resistance(params)
    tmr = tmr_at_bias(params, bias)
    return 2.0 * r_mtj * (1.0 + tmr) / (2.0 + tmr * (1.0 + math.cos(state.theta)))


def conductance(params: DeviceParams, state: DeviceState, bias: BiasPoint) -> float:
    """Reciprocal resistance in siemens, for crossbar current math."""
    return 1.0 / resistance(params, state, bias)
