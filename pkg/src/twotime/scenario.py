"""Piecewise-constant Hamiltonian timelines with instantaneous unitary events.

A :class:`Scenario` bundles the pre-selected state at ``t_i``, the
post-selected state at ``t_f`` and the dynamics in between.  Dynamics are a
list of constant-Hamiltonian segments tiling ``[t_i, t_f]`` plus zero-duration
unitary events (for instance the Aharonov-Bohm phase flip).

Event timing rule: an event at time ``tau`` belongs to every query at
``t >= tau``.  Forward evolution to ``t`` therefore includes it, and backward
evolution from ``t_f`` to ``t`` does not.  An event at exactly ``t_i`` acts on
the pre-selected state before anything else happens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.stats import unitary_group

from .errors import DimensionError, TimeRangeError, ValidationError
from .qcore import (
    HermitianOperator,
    UNITARY_TOL,
    as_state,
    is_normalized,
    matexp_hermitian,
    validate,
)

TILING_TOL = 1e-12


@dataclass(frozen=True)
class HamiltonianSegment:
    t_start: float
    t_end: float
    H: HermitianOperator

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValidationError(f"segment needs t_start < t_end, got [{self.t_start}, {self.t_end}]")


@dataclass(frozen=True, eq=False)
class UnitaryEvent:
    time: float
    U: np.ndarray
    label: str = ""

    def __post_init__(self):
        u = np.array(self.U, dtype=complex)
        if not validate(u, "unitary", UNITARY_TOL):
            raise ValidationError(f"event {self.label!r} is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "U", u)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Pre/post-selected system with its timeline.

    ``schedule`` maps names such as ``"t1"`` to times inside ``[t_i, t_f]``.
    Events are kept in time order; simultaneous events keep declaration order.
    """

    dim: int
    epsilon: float
    t_i: float
    t_f: float
    segments: tuple
    pre: np.ndarray
    post: np.ndarray
    events: tuple = ()
    schedule: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.time)))
        object.__setattr__(self, "schedule", dict(self.schedule))
        object.__setattr__(self, "pre", as_state(self.pre))
        object.__setattr__(self, "post", as_state(self.post))
        self._check()

    def _check(self):
        d = self.dim
        if d < 2:
            raise ValidationError("dim must be >= 2")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError("epsilon must be finite and positive")
        if not self.t_i < self.t_f:
            raise ValidationError("t_i must precede t_f")
        for name, v in (("pre", self.pre), ("post", self.post)):
            if v.shape != (d,):
                raise ValidationError(f"{name} has dimension {v.shape[0]}, expected {d}")
            if not is_normalized(v):
                raise ValidationError(f"{name} is not normalized")
        if not self.segments:
            raise ValidationError("at least one Hamiltonian segment is required")
        cursor = self.t_i
        for k, seg in enumerate(self.segments):
            if seg.H.dim != d:
                raise ValidationError(f"segments[{k}] Hamiltonian has dimension {seg.H.dim}, expected {d}")
            if abs(seg.t_start - cursor) > TILING_TOL:
                raise ValidationError(f"segments[{k}] starts at {seg.t_start}, expected {cursor}")
            cursor = seg.t_end
        if abs(cursor - self.t_f) > TILING_TOL:
            raise ValidationError(f"segments end at {cursor}, expected t_f = {self.t_f}")
        for k, ev in enumerate(self.events):
            if ev.U.shape != (d, d):
                raise ValidationError(f"events[{k}] has shape {ev.U.shape}, expected ({d}, {d})")
            if not self.t_i <= ev.time <= self.t_f:
                raise ValidationError(f"events[{k}] time {ev.time} outside [t_i, t_f]")
        for name, t in self.schedule.items():
            if not self.t_i <= t <= self.t_f:
                raise ValidationError(f"schedule time {name}={t} outside [t_i, t_f]")

    def time(self, token):
        """Resolve a schedule name (``t1``, ``tf``, ...) or a number to a time."""
        if isinstance(token, (int, float)):
            return float(token)
        key = str(token).strip()
        if key in self.schedule:
            return float(self.schedule[key])
        if key in ("ti", "t_i"):
            return float(self.t_i)
        if key in ("tf", "t_f"):
            return float(self.t_f)
        try:
            return float(key)
        except ValueError:
            raise TimeRangeError(f"unknown time token {token!r}") from None

    def with_events(self, *events):
        return replace(self, events=self.events + tuple(events))

    def with_states(self, pre=None, post=None):
        return replace(
            self,
            pre=self.pre if pre is None else pre,
            post=self.post if post is None else post,
        )


def pauli_embed(axis, dim=3, block=(0, 1)):
    """Pauli matrix acting on the two boxes in ``block``, zero elsewhere.

    ``axis`` is one of ``"x"``, ``"y"``, ``"z"`` or ``"identity"`` (the
    identity restricted to the block).
    """
    i, j = block
    if i == j or not (0 <= i < dim and 0 <= j < dim):
        raise DimensionError(f"bad block {block} for dim {dim}")
    paulis = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
        "identity": [[1, 0], [0, 1]],
    }
    if axis not in paulis:
        raise ValueError(f"unknown axis {axis!r}")
    s = np.array(paulis[axis], dtype=complex)
    m = np.zeros((dim, dim), dtype=complex)
    idx = [i, j]
    m[np.ix_(idx, idx)] = s
    label = "I'" if axis == "identity" else f"sigma'_{axis}"
    return HermitianOperator(m, label)


def solenoid_flip(dim, block_index=0):
    """Phase flip ``diag(..., -1, ...)`` on one box: the Aharonov-Bohm event."""
    if not 0 <= block_index < dim:
        raise DimensionError(f"flip index {block_index} out of range for dim {dim}")
    d = np.ones(dim, dtype=complex)
    d[block_index] = -1.0
    u = np.diag(d)
    u.setflags(write=False)
    return u


def solenoid_event(dim, time, block_index=0):
    return UnitaryEvent(time, solenoid_flip(dim, block_index), f"solenoid@{time!r}")


def three_boxes_preset(epsilon=1.0):
    """The disappearing-particle setup for three boxes.

    Boxes 1 and 2 tunnel with ``H = epsilon * sigma_x``; box 3 is inert.
    Pre-selection ``(1, i, 1)/sqrt(3)`` at 0, post-selection
    ``(-1, i, 1)/sqrt(3)`` at ``pi/epsilon``.
    """
    return extended_preset(epsilon, 0)


def extended_preset(epsilon=1.0, cycles=0):
    """Three-boxes preset with the post-selection delayed to ``(1 + 2k) pi/epsilon``.

    The schedule gains shifted triplets ``t1@j``, ``t2@j``, ``t3@j`` for
    ``j = 1 .. 2k``, each displaced by ``j * pi/epsilon``.
    """
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValidationError("epsilon must be finite and positive")
    if cycles < 0:
        raise ValidationError("cycles must be non-negative")
    t_f = (1 + 2 * cycles) * math.pi / epsilon
    s3 = math.sqrt(3.0)
    base = {"t1": 0.0, "t2": math.pi / (4 * epsilon), "t3": math.pi / (2 * epsilon)}
    schedule = dict(base)
    for j in range(1, 2 * cycles + 1):
        schedule.update({f"{k}@{j}": v + j * math.pi / epsilon for k, v in base.items()})
    H = HermitianOperator(epsilon * pauli_embed("x", 3).matrix, "H")
    name = "three-boxes" if cycles == 0 else f"three-boxes-k{cycles}"
    return Scenario(
        dim=3,
        epsilon=float(epsilon),
        t_i=0.0,
        t_f=t_f,
        segments=(HamiltonianSegment(0.0, t_f, H),),
        pre=np.array([1, 1j, 1]) / s3,
        post=np.array([-1, 1j, 1]) / s3,
        schedule=schedule,
        name=name,
    )


def _check_range(s, *times):
    for t in times:
        if not (s.t_i - TILING_TOL <= t <= s.t_f + TILING_TOL):
            raise TimeRangeError(f"time {t} outside [{s.t_i}, {s.t_f}]")


def _free_evolution(s, a, b):
    """Segment exponentials over ``[a, b]``, no events."""
    u = np.eye(s.dim, dtype=complex)
    if b <= a:
        return u
    for seg in s.segments:
        lo = max(a, seg.t_start)
        hi = min(b, seg.t_end)
        if hi > lo:
            u = matexp_hermitian(seg.H, hi - lo) @ u
    return u


def propagator(s, t_from, t_to):
    """Unitary from ``t_from`` to ``t_to`` including events in ``(t_from, t_to]``."""
    _check_range(s, t_from, t_to)
    if t_to < t_from:
        raise TimeRangeError(f"t_to={t_to} precedes t_from={t_from}")
    u = np.eye(s.dim, dtype=complex)
    cursor = t_from
    for ev in s.events:
        if t_from < ev.time <= t_to:
            u = ev.U @ _free_evolution(s, cursor, ev.time) @ u
            cursor = ev.time
    u = _free_evolution(s, cursor, t_to) @ u
    u.setflags(write=False)
    return u


def initial_events(s):
    """Product of the events scheduled at exactly ``t_i``."""
    u = np.eye(s.dim, dtype=complex)
    for ev in s.events:
        if ev.time == s.t_i:
            u = ev.U @ u
    return u


def evolution(s, t):
    """Forward map from the pre-selected state to time ``t``."""
    return propagator(s, s.t_i, t) @ initial_events(s)


def random_hermitian(dim, rng, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator(scale * (a + a.conj().T) / 2, "H")


def random_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return as_state(v, normalize=True)


def random_scenario(rng, dim=None, max_segments=3, max_events=2, min_dim=2, max_dim=6):
    """Random timeline for property testing: Gaussian Hamiltonians, Haar events."""
    d = int(dim or rng.integers(min_dim, max_dim + 1))
    t_f = float(rng.uniform(0.5, 3.0))
    n_seg = int(rng.integers(1, max_segments + 1))
    cuts = np.sort(rng.uniform(0.0, t_f, size=n_seg - 1))
    edges = [0.0, *cuts.tolist(), t_f]
    segments = [
        HamiltonianSegment(edges[k], edges[k + 1], random_hermitian(d, rng))
        for k in range(n_seg)
    ]
    events = [
        UnitaryEvent(float(rng.uniform(0.0, t_f)), unitary_group.rvs(d, random_state=rng), f"haar{k}")
        for k in range(int(rng.integers(0, max_events + 1)))
    ]
    return Scenario(
        dim=d,
        epsilon=1.0,
        t_i=0.0,
        t_f=t_f,
        segments=segments,
        events=events,
        pre=random_state(d, rng),
        post=random_state(d, rng),
        name="random",
    )

