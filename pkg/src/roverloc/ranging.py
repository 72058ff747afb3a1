"""SDS-TWR ranging simulation: per-node clocks, the four-interval exchange,
time-of-flight recovery, and the empirical noise model of the real link.

Symmetric double-sided two-way ranging cancels clock offset by construction
(only intervals enter) and cancels first-order drift through the
product-over-sum estimator, so no synchronization between nodes is needed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "ClockModel",
    "TwrExchange",
    "RangeQuality",
    "RangeMeasurement",
    "RangeNoiseModel",
    "RangingError",
    "NonPositiveInterval",
    "NegativeTof",
    "sds_twr_tof",
    "simulate_exchange",
    "measure_range",
]

SPEED_OF_LIGHT = 299_792_458.0  # m/s

MAX_DRIFT = 100e-6  # reject clock models drifting worse than 100 ppm


class RangingError(Exception):
    pass


class NonPositiveInterval(RangingError):
    """A TWR interval was zero or negative."""


class NegativeTof(RangingError):
    """The SDS-TWR numerator came out negative: corrupt timestamps."""


@dataclass(frozen=True)
class ClockModel:
    """A free-running node clock: epoch offset plus fractional rate error.

    drift is dimensionless (20 ppm == 20e-6). Intervals measured on this
    clock are scaled by (1 + drift); the offset only shifts epochs and
    cancels whenever intervals are formed.
    """

    offset: float = 0.0
    drift: float = 0.0

    def __post_init__(self):
        if abs(self.drift) > MAX_DRIFT:
            raise ValueError(f"clock drift {self.drift} exceeds {MAX_DRIFT}")


@dataclass(frozen=True)
class TwrExchange:
    """The four intervals of one SDS-TWR round, each on its local clock.

    t_round1, t_reply2 are measured by the tag; t_reply1, t_round2 by the
    anchor.
    """

    t_round1: float
    t_reply1: float
    t_round2: float
    t_reply2: float


class RangeQuality(enum.Enum):
    OK = "ok"
    REJECTED = "rejected"


@dataclass(frozen=True)
class RangeMeasurement:
    """One measured distance to an anchor at a simulation time."""

    anchor_id: str
    distance: float
    timestamp: float
    quality: RangeQuality = RangeQuality.OK


@dataclass(frozen=True)
class RangeNoiseModel:
    """Empirical UWB range error: positive bias, gaussian spread, dropouts.

    Defaults are calibrated so the mean absolute error falls in the
    0.4-0.7 m band observed on the real hardware, with systematic
    overestimation.
    """

    bias: float = 0.50
    sigma: float = 0.10
    dropout_probability: float = 0.02

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.dropout_probability <= 1.0:
            raise ValueError("dropout_probability must be in [0, 1]")


def sds_twr_tof(e: TwrExchange) -> float:
    """Recover time of flight from one SDS-TWR exchange.

    tof = (t_round1 * t_round2 - t_reply1 * t_reply2)
          / (t_round1 + t_round2 + t_reply1 + t_reply2)

    Exact for drift-free clocks; first-order drift errors cancel between
    the two symmetric round trips.

    Raises NonPositiveInterval for non-physical intervals and NegativeTof
    when the numerator is negative (caller should mark the measurement
    rejected).
    """
    intervals = (e.t_round1, e.t_reply1, e.t_round2, e.t_reply2)
    if any(t <= 0.0 for t in intervals):
        raise NonPositiveInterval(f"non-positive interval in {e}")
    numerator = e.t_round1 * e.t_round2 - e.t_reply1 * e.t_reply2
    if numerator < 0.0:
        raise NegativeTof(f"inconsistent timestamps: numerator {numerator}")
    return numerator / sum(intervals)


def simulate_exchange(
    true_distance: float,
    tag_clock: ClockModel,
    anchor_clock: ClockModel,
    reply_delay_tag: float,
    reply_delay_anchor: float,
) -> TwrExchange:
    """Forward-model one SDS-TWR round over a link of the given length.

    Each interval is what the owning node's drifting clock would report:
    the true duration scaled by (1 + drift). Offsets never appear because
    only intervals are formed.
    """
    if true_distance < 0:
        raise ValueError("true_distance must be >= 0")
    if reply_delay_tag <= 0 or reply_delay_anchor <= 0:
        raise ValueError("reply delays must be > 0")
    tof = true_distance / SPEED_OF_LIGHT
    return TwrExchange(
        t_round1=(2.0 * tof + reply_delay_anchor) * (1.0 + tag_clock.drift),
        t_reply1=reply_delay_anchor * (1.0 + anchor_clock.drift),
        t_round2=(2.0 * tof + reply_delay_tag) * (1.0 + anchor_clock.drift),
        t_reply2=reply_delay_tag * (1.0 + tag_clock.drift),
    )


def measure_range(
    true_distance: float,
    noise: RangeNoiseModel,
    rng: np.random.Generator,
    anchor_id: str = "",
    timestamp: float = 0.0,
) -> RangeMeasurement:
    """Corrupt a true distance with the empirical noise model.

    With probability dropout_probability the measurement is rejected;
    otherwise distance = max(0, true + bias + N(0, sigma)).
    """
    if true_distance < 0:
        raise ValueError("true_distance must be >= 0")
    if rng.random() < noise.dropout_probability:
        return RangeMeasurement(anchor_id, 0.0, timestamp, RangeQuality.REJECTED)
    d = true_distance + noise.bias + rng.normal(0.0, noise.sigma)
    return RangeMeasurement(anchor_id, max(0.0, d), timestamp, RangeQuality.OK)
