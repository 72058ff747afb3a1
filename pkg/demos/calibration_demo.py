"""Anchor deployment and frame calibration walkthrough.

Deploys the anchor constellation, runs the L-shaped calibration drive,
and compares the recovered UWB-to-odometry transform with ground truth.
Also prints a coarse dilution-of-precision map of the drive area.

Run from the repository root:

    python3 demos/calibration_demo.py
"""

import math

import numpy as np

from roverloc.geometry import Point2
from roverloc.locate import AnchorMap, gdop
from roverloc.mission import Mission
from roverloc.sim import ScenarioConfig

mission = Mission(ScenarioConfig(seed=7))

# ---------------------------------------------------------------------
# Deployment: one anchor dropped at the start point, four launched.

mission.command_deploy()
print("anchors (world frame):")
for anchor_id, pos in sorted(mission.world.anchors.items()):
    print(f"  {anchor_id}: ({pos.x:7.2f}, {pos.y:7.2f})")

# ---------------------------------------------------------------------
# GDOP over the drive area. Low is good; it degrades toward and beyond
# the hull of the constellation.

anchors = AnchorMap(sorted(mission.world.anchors.items()))
print("\nGDOP map (4 m grid):")
for y in range(12, -13, -4):
    row = []
    for x in range(-12, 13, 4):
        row.append(f"{gdop(anchors, Point2(float(x), float(y))):4.1f}")
    print("  " + " ".join(row))

# ---------------------------------------------------------------------
# Calibration drive: drive an L, collect UWB fixes paired with odometry
# poses, and solve for the rigid transform between the two frames.

mission.run_calibration_drive()
est = mission.alignment.transform
true = mission.true_alignment()

rot_err = abs(math.remainder(est.rotation - true.rotation, 2 * math.pi))
trans_err = est.translation.distance_to(true.translation)
print(f"\ncalibration pairs: {len(mission.calibration_buffer.pairs)}")
print(f"estimated rotation   {est.rotation:+.4f} rad "
      f"(true {true.rotation:+.4f}, error {rot_err:.4f})")
print(f"estimated translation ({est.translation.x:+.3f}, {est.translation.y:+.3f}) m "
      f"(error {trans_err:.3f} m)")
print(f"pair rms residual     {mission.alignment.rms_error:.3f} m")

# The residual spread is what the ranging noise lets through: with a
# 0.5 m bias and 0.1 m sigma on every range, a decimeter-scale rms
# residual on the solved alignment is the expected floor.
fix_errors = np.array([e["true_error"] for e in mission.events
                       if e["type"] == "fix"])
print(f"fix error during drive: mean {fix_errors.mean():.3f} m, "
      f"max {fix_errors.max():.3f} m over {len(fix_errors)} fixes")
