"""Forward-only Monte Carlo of prepare -> evolve -> measure -> evolve -> post-select.

This module never touches backward-evolved states: each trial is a textbook
single-state-vector history with Born sampling and projective collapse.
It is therefore an independent check on the two-time predictions of
:mod:`twotime.twostate`.

Randomness
----------
Trial ``i`` of a run seeded with ``seed`` reads its uniforms from the
Philox4x64-10 counter-based generator keyed by ``seed``, at counter blocks
``2*i`` and ``2*i + 1`` (eight doubles per trial).  A trial's draws depend on
nothing but ``(seed, i)``, so results are bit-identical however the trials
are chunked or distributed over workers.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyEnsembleError, LowStatisticsWarning, TimeRangeError, ValidationError
from .scenario import Scenario, evolution, propagator
from .twostate import ProjectiveDecomposition

DRAWS_PER_TRIAL = 8
BLOCKS_PER_TRIAL = 2
MAX_SEED = 2**64 - 1
LOW_STATISTICS = 100
Z_FLAG = 4.0


def trial_uniforms(seed, start, stop):
    """Uniforms in [0, 1) for trials ``start .. stop-1``, shape ``(n, 8)``."""
    bg = np.random.Philox(key=int(seed))
    bg.advance(BLOCKS_PER_TRIAL * int(start))
    return np.random.Generator(bg).random((int(stop) - int(start), DRAWS_PER_TRIAL))


@dataclass(frozen=True)
class MeasurementPlan:
    """A single intermediate projective measurement.

    With ``sequential=True`` the projectors are tested one at a time
    (``{P1, I-P1}``, then ``{P2, I-P2}`` on the survivors, ...), like opening
    boxes one after another.
    """

    time: float
    decomposition: ProjectiveDecomposition
    label: str = ""
    sequential: bool = False


@dataclass(frozen=True)
class RunConfig:
    trials: int
    seed: int
    scenario: Scenario
    plan: Optional[MeasurementPlan] = None

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValidationError("trials must be >= 1")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.plan is not None:
            if not isinstance(self.plan, MeasurementPlan):
                raise ValidationError("only one intermediate measurement is allowed per trial")
            s = self.scenario
            if not s.t_i <= self.plan.time <= s.t_f:
                raise TimeRangeError(f"plan time {self.plan.time} outside [{s.t_i}, {s.t_f}]")
            if self.plan.decomposition.dim != s.dim:
                raise ValidationError("plan decomposition dimension does not match the scenario")
            if self.plan.sequential and len(self.plan.decomposition) > DRAWS_PER_TRIAL:
                raise ValidationError(f"sequential plans support at most {DRAWS_PER_TRIAL} outcomes")


@dataclass(frozen=True)
class ConditionalStats:
    total_trials: int
    postselected: int
    labels: tuple
    outcome_counts: dict
    conditional_probs: dict
    std_errors: dict
    raw_counts: dict = field(default_factory=dict)

    @property
    def rate(self):
        return self.postselected / self.total_trials

    @property
    def rate_stderr(self):
        p = self.rate
        return math.sqrt(p * (1 - p) / self.total_trials)


def _born_index(probs, u):
    # zero-probability outcomes are never selected: cdf is flat across them
    cdf = np.cumsum(probs)
    cdf = cdf / cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def born_sample(state, dec, random01):
    """Draw one outcome of ``dec`` on ``state`` by inverting the cumulative Born weights.

    Returns the outcome index and the collapsed, renormalized state.
    """
    state = np.asarray(state, dtype=complex)
    branches = [p @ state for p in dec.projectors]
    probs = np.array([np.vdot(b, b).real for b in branches])
    k = int(_born_index(probs, np.asarray([random01]))[0])
    b = branches[k]
    return k, b / np.linalg.norm(b)


def _branches(psi, dec):
    """Born weights, and collapsed states (None for empty branches)."""
    probs = []
    states = []
    for p in dec.projectors:
        b = p @ psi
        w = float(np.vdot(b, b).real)
        probs.append(w)
        states.append(b / math.sqrt(w) if w > 0 else None)
    return np.array(probs), states


def _survival(post, u_rest, states):
    q = []
    for st in states:
        if st is None:
            q.append(0.0)
        else:
            q.append(min(1.0, abs(np.vdot(post, u_rest @ st)) ** 2))
    return np.array(q)


class _Kernel:
    """Per-run constants shared by all chunks."""

    def __init__(self, cfg):
        s = cfg.scenario
        plan = cfg.plan
        self.seed = int(cfg.seed)
        if plan is None:
            final = evolution(s, s.t_f) @ s.pre
            self.labels = ("none",)
            self.probs = np.array([1.0])
            self.q = np.array([min(1.0, abs(np.vdot(s.post, final)) ** 2)])
            self.sequential = None
            return
        dec = plan.decomposition
        psi = evolution(s, plan.time) @ s.pre
        u_rest = propagator(s, plan.time, s.t_f)
        self.labels = dec.labels
        self.probs, states = _branches(psi, dec)
        self.q = _survival(s.post, u_rest, states)
        self.sequential = None
        if plan.sequential:
            # conditional probability of finding outcome j given all earlier tests failed
            cond = []
            remaining = 1.0
            for w in self.probs[:-1]:
                cond.append(w / remaining if remaining > 0 else 0.0)
                remaining = max(remaining - w, 0.0)
            self.sequential = np.array(cond)

    def outcomes(self, u):
        n = u.shape[0]
        if self.sequential is None:
            return _born_index(self.probs, u[:, 0])
        k = np.full(n, len(self.labels) - 1)
        open_ = np.ones(n, dtype=bool)
        for j, c in enumerate(self.sequential):
            hit = open_ & (u[:, j] < c)
            k[hit] = j
            open_ &= ~hit
        return k

    def run(self, start, stop):
        u = trial_uniforms(self.seed, start, stop)
        k = self.outcomes(u)
        kept = u[:, -1] < self.q[k]
        m = len(self.labels)
        return np.bincount(k, minlength=m), np.bincount(k[kept], minlength=m)


def run_trials(cfg, workers=1, chunk_size=1 << 16):
    """Simulate ``cfg.trials`` trajectories and tally outcomes among post-selected runs.

    The result depends only on ``cfg``; ``workers`` and ``chunk_size`` change
    how the work is split, never the counts.
    """
    kernel = _Kernel(cfg)
    n = int(cfg.trials)
    bounds = [(a, min(a + chunk_size, n)) for a in range(0, n, chunk_size)]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: kernel.run(*ab), bounds))
    else:
        parts = [kernel.run(a, b) for a, b in bounds]
    raw = sum(p[0] for p in parts)
    kept = sum(p[1] for p in parts)
    total_kept = int(kept.sum())
    if total_kept == 0:
        raise EmptyEnsembleError(n)
    labels = kernel.labels
    probs = {lab: int(c) / total_kept for lab, c in zip(labels, kept)}
    return ConditionalStats(
        total_trials=n,
        postselected=total_kept,
        labels=tuple(labels),
        outcome_counts={lab: int(c) for lab, c in zip(labels, kept)},
        conditional_probs=probs,
        std_errors={lab: math.sqrt(p * (1 - p) / total_kept) for lab, p in probs.items()},
        raw_counts={lab: int(c) for lab, c in zip(labels, raw)},
    )


@dataclass(frozen=True)
class OutcomeComparison:
    label: str
    count: int
    p: float
    stderr: float
    expected: float
    z: float
    flagged: bool


@dataclass(frozen=True)
class ComparisonReport:
    outcomes: tuple
    warnings: tuple = ()

    @property
    def ok(self):
        return not any(o.flagged for o in self.outcomes)

    @property
    def max_abs_z(self):
        return max(abs(o.z) for o in self.outcomes)


def compare_to_abl(stats, abl, tol=1e-12):
    """z-scores of the empirical conditional frequencies against ABL predictions.

    The standard error is the binomial one under the predicted probability,
    ``sqrt(p (1 - p) / n)``.  A deterministic prediction (p = 0 or 1) gives
    z = 0 on an exact match and an infinite z otherwise.
    """
    if isinstance(abl, dict):
        expected = [float(abl[lab]) for lab in stats.labels]
    else:
        expected = [float(x) for x in abl]
        if len(expected) != len(stats.labels):
            raise ValueError("ABL vector length does not match the outcome labels")
    n = stats.postselected
    notes = []
    if n < LOW_STATISTICS:
        msg = f"only {n} post-selected trials; normal approximation unreliable"
        warnings.warn(msg, LowStatisticsWarning, stacklevel=2)
        notes.append(f"LowStatisticsWarning: {msg}")
    rows = []
    for lab, e in zip(stats.labels, expected):
        p = stats.conditional_probs[lab]
        se = math.sqrt(max(e * (1 - e), 0.0) / n)
        diff = p - e
        if abs(diff) <= tol:
            z = 0.0
        elif se == 0.0:
            z = math.copysign(math.inf, diff)
        else:
            z = diff / se
        rows.append(OutcomeComparison(lab, stats.outcome_counts[lab], p, stats.std_errors[lab], e, z, abs(z) > Z_FLAG))
    return ComparisonReport(tuple(rows), tuple(notes))


def _num(x):
    if x is None or not math.isfinite(x):
        return None
    return x


def stats_document(stats, report=None):
    """Plain-data form ``{total_trials, postselected, outcomes: [...]}``."""
    zs = {o.label: o.z for o in report.outcomes} if report else {}
    return {
        "total_trials": stats.total_trials,
        "postselected": stats.postselected,
        "outcomes": [
            {
                "label": lab,
                "count": stats.outcome_counts[lab],
                "p": stats.conditional_probs[lab],
                "stderr": stats.std_errors[lab],
                "z": _num(zs.get(lab)),
            }
            for lab in stats.labels
        ],
    }


def stats_csv(stats):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "count", "p", "stderr"])
    for lab in stats.labels:
        w.writerow([lab, stats.outcome_counts[lab], f"{stats.conditional_probs[lab]:.17g}", f"{stats.std_errors[lab]:.17g}"])
    return buf.getvalue()
