"""
A monitored verification sweep over the robot cell
==================================================

Beyond estimating numbers, the checker monitors temporal properties on
every sampled run: invariants (``A[] p``), reachability (``E<> p``),
response ("whenever p, eventually q", written ``p --> q``) and
deadlock freedom.  A falsified property comes back with the index of
the first offending run, which the seeding scheme can regenerate
bit for bit as a standalone trace.

The bundled suite for the comparison model covers pose consistency,
delivery deadlines, responsiveness of the arm, and the energy claims
from the other demos.  We run it here with a reduced budget.
"""

from robosmc import (
    VERIFICATION_QUERIES,
    SimConfig,
    build_comparison,
    evaluate_queries,
    simulate_run,
    trace_to_csv,
)

net = build_comparison()
config = SimConfig(horizon=10800.0, seed=2026)

results = evaluate_queries(
    net, config, VERIFICATION_QUERIES,
    monitored_runs=60,   # the acceptance bar uses 1000; 60 keeps this quick
    epsilon=0.1, alpha=0.1)

width = max(len(r.query) for r in results)
for r in results:
    print(f"{r.query:<{width}}  {r.label()}")

# ---------------------------------------------------------------------------
# The universal comparative claim above is deliberately falsifiable: right
# after a mistimed parking episode the adaptive arm can be behind while
# both arms stand at pallet C.  Pull out its counterexample run.
# ---------------------------------------------------------------------------
bad = next(r for r in results if r.verdict == "falsified")
print(f"\nfirst counterexample for: {bad.query!r}")
print(f"  trial {bad.evidence_trial}, "
      f"{len(bad.evidence.events)} events, "
      f"ends at t={bad.evidence.final_state.time:.0f} s")

# the trial index fully determines the run: regenerating it is exact
again = simulate_run(net, config, trial=bad.evidence_trial)
assert trace_to_csv(again) == trace_to_csv(bad.evidence)
print("  regenerated from (seed, trial) alone: byte-identical")
