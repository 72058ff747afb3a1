"""Full mission walkthrough: the value of periodic pose resets.

Runs the same three-waypoint survey twice, once accepting the suggested
pose reset at every stop and once skipping them all, and compares the
ground-truth error at each stop. A forced visual-odometry dropout before
each leg puts the rover on drift-prone wheel odometry, which is where
resets matter.

Run from the repository root:

    python3 demos/mission_demo.py
"""

from roverloc.geometry import Point2
from roverloc.mission import Mission
from roverloc.sim import ScenarioConfig

WAYPOINTS = [(8.0, 0.0), (14.0, 6.0), (20.0, 0.0)]


def run(with_resets: bool) -> list:
    mission = Mission(ScenarioConfig(seed=11))
    mission.command_deploy()
    mission.run_calibration_drive()
    errors = []
    for x, y in WAYPOINTS:
        mission.force_visual_dropout(mission.world.sim_time)
        mission.set_waypoint(Point2(x, y))
        if with_resets:
            mission.command_pose_reset()
        else:
            mission.skip_reset()
        true = mission.world.true_pose.position
        believed = mission.odom_pose_in_world().position
        errors.append(true.distance_to(believed))
    return errors


with_resets = run(with_resets=True)
without = run(with_resets=False)

print("ground-truth position error at each stop (m):")
print(f"{'waypoint':>10} {'with resets':>12} {'without':>10}")
for i, (a, b) in enumerate(zip(with_resets, without), 1):
    print(f"{i:>10} {a:>12.2f} {b:>10.2f}")

print("\nWith resets the error returns to the UWB fix accuracy at every")
print("stop; without them wheel slip compounds leg after leg.")
