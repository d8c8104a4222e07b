"""Statistical evaluation of queries over sampled trajectories.

Estimators never enumerate state spaces; every verdict is a statement
about N sampled runs:

* ``E[<=T; N] (max|min: expr)``: per-run extremum of the expression
  over all observed states, reported as sample mean, standard
  deviation and a two-sided Student-t confidence interval.
* ``Pr[t<=T](<> pred)``: per-run Bernoulli outcome with an exact
  Clopper-Pearson interval.  The run count for a target
  (epsilon, alpha) follows the additive Chernoff-Hoeffding bound
  ``N = ceil(ln(2/alpha) / (2 epsilon^2))``.
* ``A[]`` / ``E<>`` / leads-to / ``A[] not deadlock``: monitored over
  N runs.  A passing safety query reads "passed N runs", never
  "valid"; a violation is reported with the lowest violating trial
  index and its regenerated trace, which is deterministic because
  every trial has its own seed-derived stream.

Leads-to obligations: within a run every antecedent state must be
followed (same state counts) by a consequent state.  An obligation
still open when the run is cut off at the horizon is *censored* by
default rather than counted as a violation: recurring behaviour keeps
an obligation open at almost every horizon, so the strict reading
(``pending='violate'``) falsifies any recurrent model and is only
useful for runs that should quiesce.  Obligations open when a run
deadlocks count as violations under both readings.

Trials are shared: one batch of runs serves every query, query ``k``
consuming trials ``0..N_k-1``.  Results are therefore identical
whether queries are evaluated together, separately, sequentially or
across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import stats

from .automata import Network, compile_observer
from .engine import (
    DEADLOCK,
    STEP_CAP,
    SimConfig,
    Trace,
    run_stream,
    simulate_run,
    trial_rng,
)
from .queries import (
    Always,
    Exists,
    ExpectedValue,
    LeadsTo,
    NoDeadlock,
    Probability,
    Query,
    parse_query,
)

DEFAULT_MONITORED_RUNS = 1000

CENSOR = "censor"
VIOLATE = "violate"


def chernoff_runs(epsilon: float, alpha: float) -> int:
    """Run count for a probability estimate within +-epsilon at level alpha."""
    if not (0 < epsilon < 1 and 0 < alpha < 1):
        raise ValueError(f"epsilon and alpha must be in (0,1): {epsilon}, {alpha}")
    return math.ceil(math.log(2.0 / alpha) / (2.0 * epsilon * epsilon))


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval for k successes in n."""
    if not 0 <= k <= n or n == 0:
        raise ValueError(f"bad counts k={k}, n={n}")
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def student_t_ci(values: np.ndarray, confidence: float) -> tuple[float, float, float, float]:
    """(mean, sample std, ci_lo, ci_hi) for a two-sided t interval."""
    n = len(values)
    if n == 0:
        nan = float("nan")
        return nan, 0.0, nan, nan
    mean = float(np.mean(values))
    if n < 2:
        return mean, 0.0, mean, mean
    std = float(np.std(values, ddof=1))
    half = float(stats.t.ppf((1 + confidence) / 2, n - 1)) * std / math.sqrt(n)
    return mean, std, mean - half, mean + half


@dataclass
class SmcResult:
    query: str
    kind: str  # 'expectation' | 'probability' | 'always' | 'exists' | 'leadsto' | 'no-deadlock'
    verdict: str  # 'estimate' | 'interval' | 'passed' | 'falsified' | 'witness' | 'no-witness'
    runs_used: int
    estimate: float | None = None
    std: float | None = None
    ci: tuple[float, float] | None = None
    confidence: float | None = None
    evidence_trial: int | None = None
    evidence: Trace | None = None
    details: dict = field(default_factory=dict)

    def label(self) -> str:
        """Human-readable result cell for report tables."""
        if self.kind == "expectation":
            return f"{self.estimate:.2f} (std {self.std:.2f}, " \
                   f"CI [{self.ci[0]:.2f}, {self.ci[1]:.2f}], N={self.runs_used})"
        if self.kind == "probability":
            return f"[{self.ci[0]:.6f}, {self.ci[1]:.6f}] " \
                   f"(estimate {self.estimate:.6f}, N={self.runs_used})"
        if self.verdict == "passed":
            extra = ""
            if self.details.get("censored"):
                extra = f", {self.details['censored']} censored at horizon"
            return f"passed {self.runs_used} runs{extra}"
        if self.verdict == "falsified":
            return f"falsified (trial {self.evidence_trial} of {self.runs_used})"
        if self.verdict == "witness":
            return f"witness found (trial {self.evidence_trial} of {self.runs_used})"
        return f"no witness in {self.runs_used} runs"

    def passed(self) -> bool:
        """Whether a monitored query held on every run it watched."""
        if self.kind in ("always", "leadsto", "no-deadlock"):
            return self.verdict == "passed"
        if self.kind == "exists":
            return self.verdict == "witness"
        return True

    def to_dict(self) -> dict:
        doc = {
            "query": self.query,
            "kind": self.kind,
            "verdict": self.verdict,
            "runs_used": self.runs_used,
        }
        if self.estimate is not None:
            doc["estimate"] = self.estimate
        if self.std is not None:
            doc["std"] = self.std
        if self.ci is not None:
            doc["ci"] = list(self.ci)
        if self.confidence is not None:
            doc["confidence"] = self.confidence
        if self.evidence_trial is not None:
            doc["evidence_trial"] = self.evidence_trial
        if self.details:
            doc["details"] = dict(sorted(self.details.items()))
        doc["label"] = self.label()
        return doc


# ---------------------------------------------------------------------------
# Per-trial trackers
# ---------------------------------------------------------------------------

class _Plan:
    """One query compiled against a network, with its run budget."""

    __slots__ = ("query", "kind", "runs", "t_limit", "fns")

    def __init__(self, query: Query, network: Network, monitored_runs: int,
                 probability_runs: int, horizon: float):
        self.query = query
        if isinstance(query, ExpectedValue):
            self.kind = "expectation"
            self.runs = query.runs
            self.t_limit = query.horizon
            self.fns = (compile_observer(network, query.expr),)
        elif isinstance(query, Probability):
            self.kind = "probability"
            self.runs = probability_runs
            self.t_limit = query.horizon
            self.fns = (compile_observer(network, query.pred),)
        elif isinstance(query, Always):
            self.kind = "always"
            self.runs = monitored_runs
            self.t_limit = horizon
            self.fns = (compile_observer(network, query.pred),)
        elif isinstance(query, Exists):
            self.kind = "exists"
            self.runs = monitored_runs
            self.t_limit = horizon
            self.fns = (compile_observer(network, query.pred),)
        elif isinstance(query, LeadsTo):
            self.kind = "leadsto"
            self.runs = monitored_runs
            self.t_limit = horizon
            self.fns = (compile_observer(network, query.antecedent),
                        compile_observer(network, query.consequent))
        elif isinstance(query, NoDeadlock):
            self.kind = "no-deadlock"
            self.runs = monitored_runs
            self.t_limit = horizon
            self.fns = ()
        else:
            raise TypeError(f"unknown query {query!r}")


def _eval_chunk(network: Network, config: SimConfig, queries: list[Query],
                monitored_runs: int, probability_runs: int,
                start: int, stop: int) -> list[list]:
    """Evaluate trials [start, stop) for all queries; returns one atom
    list per query (only for trials inside that query's budget)."""
    plans = [_Plan(q, network, monitored_runs, probability_runs, config.horizon)
             for q in queries]
    atoms: list[list] = [[] for _ in plans]

    for trial in range(start, stop):
        active = [(i, p) for i, p in enumerate(plans) if trial < p.runs]
        if not active:
            break
        sim_horizon = max(p.t_limit for _, p in active)
        cfg = replace(config, horizon=sim_horizon)

        # per-plan mutable cells: [value] for extremum, [flag] for the rest
        cells = []
        for _, p in active:
            if p.kind == "expectation":
                cells.append([None])
            elif p.kind == "leadsto":
                cells.append([False])  # pending
            else:
                cells.append([False])

        watchers = [(p, cell) for (_, p), cell in zip(active, cells)
                    if p.kind != "no-deadlock"]

        def on_event(time, kind, who, detail, state):
            for p, cell in watchers:
                if time > p.t_limit:
                    continue
                k = p.kind
                if k == "expectation":
                    v = p.fns[0](state)
                    best = cell[0]
                    if best is None:
                        cell[0] = v
                    elif p.query.objective == "max":
                        if v > best:
                            cell[0] = v
                    elif v < best:
                        cell[0] = v
                elif k == "always":
                    if not cell[0] and not p.fns[0](state):
                        cell[0] = True
                elif k == "leadsto":
                    if p.fns[1](state):
                        cell[0] = False
                    elif p.fns[0](state):
                        cell[0] = True
                else:  # probability / exists
                    if not cell[0] and p.fns[0](state):
                        cell[0] = True

        rng = trial_rng(config.seed, trial)
        final_state, reason, _ = run_stream(network, cfg, rng, on_event)

        for (i, p), cell in zip(active, cells):
            ended_early = reason if final_state.time < p.t_limit else "horizon"
            if p.kind == "expectation":
                atoms[i].append((cell[0], ended_early == STEP_CAP))
            elif p.kind == "leadsto":
                atoms[i].append((cell[0], ended_early))
            elif p.kind == "no-deadlock":
                atoms[i].append(ended_early == DEADLOCK)
            else:
                atoms[i].append(cell[0])
    return atoms


def _eval_chunk_packed(args):
    return _eval_chunk(*args)


# ---------------------------------------------------------------------------
# Public evaluation
# ---------------------------------------------------------------------------

def evaluate_queries(
    network: Network,
    config: SimConfig,
    queries: list[Query | str],
    *,
    monitored_runs: int = DEFAULT_MONITORED_RUNS,
    epsilon: float = 0.05,
    alpha: float = 0.05,
    confidence: float = 0.95,
    leadsto_pending: str = CENSOR,
    probability_runs: int | None = None,
    workers: int | None = None,
    with_evidence: bool = True,
) -> list[SmcResult]:
    """Evaluate queries over one shared batch of trials.

    ``probability_runs`` overrides the Chernoff-Hoeffding count derived
    from (epsilon, alpha).  ``workers`` > 1 distributes trials across
    processes; because trial ``i`` always uses the stream derived from
    (config.seed, i), the results match the sequential evaluation
    exactly.
    """
    if leadsto_pending not in (CENSOR, VIOLATE):
        raise ValueError(f"leadsto_pending must be 'censor' or 'violate', "
                         f"got {leadsto_pending!r}")
    parsed = [parse_query(q) if isinstance(q, str) else q for q in queries]
    if probability_runs is None:
        probability_runs = chernoff_runs(epsilon, alpha)
    plans = [_Plan(q, network, monitored_runs, probability_runs, config.horizon)
             for q in parsed]
    total = max((p.runs for p in plans), default=0)

    if workers and workers > 1 and total > 1:
        chunk = max(1, math.ceil(total / workers))
        spans = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
        args = [(network, config, parsed, monitored_runs, probability_runs, s, e)
                for s, e in spans]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_eval_chunk_packed, args))
        atoms = [sum((part[i] for part in parts), []) for i in range(len(parsed))]
    else:
        atoms = _eval_chunk(network, config, parsed, monitored_runs,
                            probability_runs, 0, total)

    results = []
    for plan, data in zip(plans, atoms):
        results.append(_aggregate(plan, data, network, config,
                                  alpha, confidence, leadsto_pending, with_evidence))
    return results


def _aggregate(plan: _Plan, data: list, network, config,
               alpha, confidence, leadsto_pending, with_evidence) -> SmcResult:
    q = plan.query
    if plan.kind == "expectation":
        clean = [v for v, capped in data if not capped and v is not None]
        excluded = len(data) - len(clean)
        mean, std, lo, hi = student_t_ci(np.asarray(clean, dtype=float), confidence)
        return SmcResult(
            q.source, plan.kind, "estimate", len(clean),
            estimate=mean, std=std, ci=(lo, hi), confidence=confidence,
            details={"excluded_step_cap": excluded} if excluded else {})

    if plan.kind == "probability":
        k = sum(1 for sat in data if sat)
        n = len(data)
        lo, hi = clopper_pearson(k, n, alpha)
        return SmcResult(
            q.source, plan.kind, "interval", n,
            estimate=k / n, ci=(lo, hi), confidence=1 - alpha,
            details={"successes": k})

    if plan.kind == "exists":
        hits = [i for i, sat in enumerate(data) if sat]
        if hits:
            res = SmcResult(q.source, plan.kind, "witness", len(data),
                            evidence_trial=hits[0],
                            details={"witnesses": len(hits)})
        else:
            res = SmcResult(q.source, plan.kind, "no-witness", len(data))
        return _attach_evidence(res, plan, network, config, with_evidence)

    if plan.kind == "always":
        bad = [i for i, violated in enumerate(data) if violated]
        if bad:
            res = SmcResult(q.source, plan.kind, "falsified", len(data),
                            evidence_trial=bad[0],
                            details={"violations": len(bad)})
        else:
            res = SmcResult(q.source, plan.kind, "passed", len(data))
        return _attach_evidence(res, plan, network, config, with_evidence)

    if plan.kind == "leadsto":
        violated, censored = [], 0
        for i, (pending, end) in enumerate(data):
            if not pending:
                continue
            if end == "horizon" and leadsto_pending == CENSOR:
                censored += 1
            else:
                violated.append(i)
        details = {"censored": censored} if censored else {}
        if violated:
            res = SmcResult(q.source, plan.kind, "falsified", len(data),
                            evidence_trial=violated[0],
                            details={**details, "violations": len(violated)})
        else:
            res = SmcResult(q.source, plan.kind, "passed", len(data), details=details)
        return _attach_evidence(res, plan, network, config, with_evidence)

    # no-deadlock
    bad = [i for i, deadlocked in enumerate(data) if deadlocked]
    if bad:
        res = SmcResult(q.source, plan.kind, "falsified", len(data),
                        evidence_trial=bad[0], details={"deadlocks": len(bad)})
    else:
        res = SmcResult(q.source, plan.kind, "passed", len(data))
    return _attach_evidence(res, plan, network, config, with_evidence)


def _attach_evidence(res: SmcResult, plan: _Plan, network, config,
                     with_evidence) -> SmcResult:
    if with_evidence and res.evidence_trial is not None:
        cfg = replace(config, horizon=plan.t_limit)
        res.evidence = simulate_run(network, cfg, (), trial=res.evidence_trial)
    return res


# ---------------------------------------------------------------------------
# Single-query conveniences
# ---------------------------------------------------------------------------

def estimate_expectation(network: Network, config: SimConfig,
                         query: ExpectedValue | str, *,
                         confidence: float = 0.95,
                         workers: int | None = None) -> SmcResult:
    q = parse_query(query) if isinstance(query, str) else query
    if not isinstance(q, ExpectedValue):
        raise TypeError(f"not an expectation query: {q!r}")
    return evaluate_queries(network, config, [q], confidence=confidence,
                            workers=workers)[0]


def estimate_probability(network: Network, config: SimConfig,
                         query: Probability | str, *,
                         epsilon: float = 0.05, alpha: float = 0.05,
                         runs: int | None = None,
                         workers: int | None = None) -> SmcResult:
    q = parse_query(query) if isinstance(query, str) else query
    if not isinstance(q, Probability):
        raise TypeError(f"not a probability query: {q!r}")
    return evaluate_queries(network, config, [q], epsilon=epsilon, alpha=alpha,
                            probability_runs=runs, workers=workers)[0]


def check_monitored(network: Network, config: SimConfig,
                    query: Query | str, *,
                    runs: int = DEFAULT_MONITORED_RUNS,
                    leadsto_pending: str = CENSOR,
                    workers: int | None = None,
                    with_evidence: bool = True) -> SmcResult:
    q = parse_query(query) if isinstance(query, str) else query
    if not isinstance(q, (Always, Exists, LeadsTo, NoDeadlock)):
        raise TypeError(f"not a monitored query: {q!r}")
    return evaluate_queries(network, config, [q], monitored_runs=runs,
                            leadsto_pending=leadsto_pending, workers=workers,
                            with_evidence=with_evidence)[0]
