"""
When is parking the robot arm worth it?
=======================================

A sorting arm that just delivered a box can either hold its working
pose ("standby", cheap to resume, expensive to hold) or fold into the
low-power idle pose (cheap to hold, but the extra fold/unfold moves
cost energy).  Whether parking pays off depends on how long the arm
will wait for the next job.  This demo computes the break-even dwell
from the energy table alone, then verifies it against full simulations
with a fixed arrival rhythm.
"""

from robosmc import (
    EnergyTable,
    EnvSpec,
    RobotSpec,
    SimConfig,
    break_even_dwell,
    build_comparison,
    idle_cycle_penalty,
    simulate_run,
)

table = EnergyTable()

# ---------------------------------------------------------------------------
# Closed form: parking pays once the standby-vs-idle rate difference has
# amortized the three extra moves (to idle, and later idle -> pickup,
# instead of standby -> pickup directly).
# ---------------------------------------------------------------------------
for origin in ("C", "B"):
    dwell = break_even_dwell(table, origin)
    print(f"break-even dwell from standby {origin}: {dwell:7.3f} s")

print()
print("per-cycle energy penalty of parking (positive = parking wastes energy)")
for dwell in (10, 20, 30, 43.87, 60, 80, 120):
    penalty = idle_cycle_penalty(table, dwell, "C")
    print(f"  dwell {dwell:6.2f} s  ->  {penalty:+8.2f} J")

# ---------------------------------------------------------------------------
# Simulation cross-check.  We pin the arrival gap so every cycle has the
# same dwell, route every box to pallet C, and race two arms on the same
# arrivals: arm one always parks (with zero decision latency), arm two
# never parks.  The energy gap per cycle must match the closed form.
# ---------------------------------------------------------------------------
BUSY = 5.0 + 2.0 + 12.0  # travel to pickup + handling + carry to C

print()
print(f"{'dwell':>8} {'analytic':>10} {'simulated':>10}")
for dwell in (20.0, 43.87, 80.0):
    gap = dwell + BUSY
    net = build_comparison(
        robot=RobotSpec(policy="always-idle", idle_latency=0.0),
        robot2=RobotSpec(policy="never-idle"),
        env=EnvSpec(fixed_gap=gap, dest_weights=(0.0, 1.0)))

    def energy_gap(horizon):
        v = simulate_run(net, SimConfig(horizon=horizon, seed=0)).final_state.valuation
        return v["energy"] - v["energy2"]

    # measure 20 steady-state cycles, skipping the start-up transient
    simulated = (energy_gap(25 * gap + 1) - energy_gap(5 * gap + 1)) / 20
    analytic = idle_cycle_penalty(table, dwell, "C")
    print(f"{dwell:8.2f} {analytic:+10.3f} {simulated:+10.3f}")

print()
print("at the break-even dwell the two policies tie; below it the",
      "never-idle arm wins, above it the parking arm wins")
