"""
Predicting slow traffic from the last twenty arrivals
=====================================================

The adaptive arm decides whether to park by watching the conveyor:
every block of 20 inter-arrival gaps is histogrammed into five bands,
and the arm opts into parking exactly when the three slow bands
outnumber the two fast ones.  The same counts become the sampling
weights of the next block, so traffic trends feed back into the model.

This demo drives the window by hand first, then shows the identical
machinery working inside a full simulation.
"""

import numpy as np

from robosmc import (
    Monitor,
    SimConfig,
    Thresholds,
    build_single,
    interval_of,
    make_window,
    record_arrival,
    simulate_run,
)

thresholds = Thresholds.default()
print(f"band edges (s): {thresholds}")
print()

# ---------------------------------------------------------------------------
# Hand-driven window: a fast phase, then a slow phase.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(1)
fast_phase = rng.uniform(5, 60, size=20)     # mostly bands 1-2
slow_phase = rng.uniform(80, 175, size=20)   # bands 3-5

window = make_window()
print(f"start: weights {window.weights}, goIdle {window.go_idle}")
for label, gaps in (("fast", fast_phase), ("slow", slow_phase)):
    for gap in gaps:
        window = record_arrival(window, float(gap))
    d = window.decisions[-1]
    print(f"after a {label} block: counts {d.counts}, "
          f"fast {d.fast_count} vs slow {d.slow_count} -> goIdle {d.go_idle}")

# which band does a single gap land in?
print()
for gap in (12.0, 63.0, 63.5, 140.0):
    print(f"  gap {gap:6.1f} s falls in band {interval_of(gap, thresholds)}")

# ---------------------------------------------------------------------------
# The same predictor inside the simulated cell.  The environment samples
# each gap from the band weights, so after a decision the traffic itself
# drifts toward what the window just saw; goIdle follows along.
# ---------------------------------------------------------------------------
print()
net = build_single()
trace = simulate_run(
    net, SimConfig(horizon=10800.0, seed=41),
    (Monitor("arrivals", "arrivals"), Monitor("goIdle", "goIdle")))

final = trace.final_state
window = final.aux["predictor"]
print(f"three simulated hours: {final.valuation['arrivals']:.0f} arrivals, "
      f"{len(window.decisions)} policy decisions")
for i, d in enumerate(window.decisions, start=1):
    stance = "park between jobs" if d.go_idle else "hold standby"
    print(f"  block {i:2d}: counts {d.counts} -> {stance}")
