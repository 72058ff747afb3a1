"""Two-way ranging walkthrough.

Shows why symmetric double-sided TWR works with cheap drifting clocks,
then characterizes the empirical range noise model.

Run from the repository root:

    python3 demos/ranging_demo.py
"""

import numpy as np

from roverloc.ranging import (
    SPEED_OF_LIGHT,
    ClockModel,
    RangeNoiseModel,
    RangeQuality,
    measure_range,
    sds_twr_tof,
    simulate_exchange,
)

rng = np.random.default_rng(42)

# ---------------------------------------------------------------------
# Part 1: clock drift cancellation.
#
# Each node timestamps with its own clock, which runs fast or slow by
# tens of ppm. A naive single-sided exchange turns that drift into
# meters of error; the double-sided formula cancels it to first order.

true_distance = 18.0
true_tof = true_distance / SPEED_OF_LIGHT
print(f"true distance {true_distance} m, time of flight {true_tof * 1e9:.3f} ns")

print(f"{'drift':>12} {'single-sided error':>20} {'double-sided error':>20}")
for drift_ppm in (0.0, 5.0, 20.0):
    tag = ClockModel(offset=0.37, drift=drift_ppm * 1e-6)
    anchor = ClockModel(offset=-1.2, drift=-drift_ppm * 1e-6)
    exchange = simulate_exchange(true_distance, tag, anchor,
                                 reply_delay_tag=0.4e-3,
                                 reply_delay_anchor=0.6e-3)
    # single-sided: tof from one round trip, fully exposed to drift
    naive_tof = (exchange.t_round1 - exchange.t_reply1) / 2.0
    naive_err = abs(naive_tof - true_tof) * SPEED_OF_LIGHT
    tof = sds_twr_tof(exchange)
    err = abs(tof - true_tof) * SPEED_OF_LIGHT
    print(f"  +/-{drift_ppm:4.0f} ppm {naive_err:17.4f} m {err * 1e3:17.2e} mm")

# ---------------------------------------------------------------------
# Part 2: the empirical noise model.
#
# Field behavior: a roughly constant positive bias of half a meter, a
# 10 cm spread, and occasional dropped measurements.

noise = RangeNoiseModel()
samples = [measure_range(true_distance, noise, rng) for _ in range(20000)]
ok = np.array([m.distance for m in samples if m.quality is RangeQuality.OK])
dropped = sum(1 for m in samples if m.quality is not RangeQuality.OK)

errors = ok - true_distance
print()
print(f"{len(ok)} accepted measurements, {dropped} dropped "
      f"({dropped / len(samples):.1%})")
print(f"mean error      {errors.mean():+.3f} m (bias {noise.bias} m)")
print(f"std deviation    {errors.std():.3f} m (sigma {noise.sigma} m)")
print(f"mean abs error   {np.abs(errors).mean():.3f} m "
      "(expected in the 0.4 to 0.7 m band)")
print(f"overestimates    {(errors > 0).mean():.1%} of measurements")
