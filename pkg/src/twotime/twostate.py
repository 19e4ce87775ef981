"""Two-time states, weak values and the ABL conditional-probability rule.

A :class:`TwoTimeState` evolves its pre-selected ket forward from ``t_i`` and
its post-selected state backward from ``t_f``.  At any intermediate ``t``

    weak value      A_w(t) = <phi(t)|A|psi(t)> / <phi(t)|psi(t)>
    ABL probability P(k)   = |<phi(t)|P_k|psi(t)>|^2 / sum_j |<phi(t)|P_j|psi(t)>|^2

where ``{P_k}`` is the projective decomposition actually measured at ``t``.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    ImpossibleHistoryError,
    OrthogonalSelectionError,
    SpectrumError,
    TimeRangeError,
    ValidationError,
)
from .qcore import (
    HermitianOperator,
    as_state,
    is_normalized,
    make_projector,
    matrix_of,
    spectral_projectors,
)
from .scenario import TILING_TOL, evolution, propagator

DEGENERACY_TOL = 1e-12
IMPOSSIBLE_TOL = 1e-24
REDUCTIO_TOL = 1e-10
EIGEN_TOL = 1e-9
DECOMPOSITION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TwoTimeState:
    """Pre-selected ket at ``t_i`` and post-selected state at ``t_f`` on a timeline.

    ``pre`` and ``post`` default to the scenario's states.  ``post`` is kept as a
    ket; its conjugate transpose is the bra.
    """

    scenario: object
    pre: np.ndarray = None
    post: np.ndarray = None

    def __post_init__(self):
        s = self.scenario
        pre = s.pre if self.pre is None else as_state(self.pre)
        post = s.post if self.post is None else as_state(self.post)
        if pre.shape != (s.dim,) or post.shape != (s.dim,):
            raise DimensionError("pre/post dimension does not match the scenario")
        if not (is_normalized(pre) and is_normalized(post)):
            raise ValidationError("pre and post must be normalized")
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    @classmethod
    def from_scenario(cls, scenario):
        return cls(scenario)

    @property
    def t_i(self):
        return self.scenario.t_i

    @property
    def t_f(self):
        return self.scenario.t_f

    @property
    def dim(self):
        return self.scenario.dim

    def _check(self, t):
        if not (self.t_i - TILING_TOL <= t <= self.t_f + TILING_TOL):
            raise TimeRangeError(f"time {t} outside [{self.t_i}, {self.t_f}]")
        return min(max(t, self.t_i), self.t_f)


def forward_state(tt, t):
    """``|psi(t)>``: the pre-selected ket evolved to ``t`` (events at ``t`` included)."""
    t = tt._check(t)
    return as_state(evolution(tt.scenario, t) @ tt.pre)


def backward_state(tt, t):
    """``|phi(t)>``: the post-selected ket evolved back to ``t``.

    Events at exactly ``t`` are not undone, so ``<phi(t)|psi(t)>`` is the same
    for every ``t``.
    """
    t = tt._check(t)
    return as_state(propagator(tt.scenario, t, tt.t_f).conj().T @ tt.post)


def _pair(tt, t):
    return forward_state(tt, t), backward_state(tt, t)


def overlap(tt, t):
    psi, phi = _pair(tt, t)
    return complex(np.vdot(phi, psi))


@dataclass(frozen=True)
class WeakValueSample:
    t: float
    observable_label: str
    value: complex


def weak_value_from(psi, phi, A):
    """Weak value for raw kets ``psi`` and ``phi`` at a common time.

    Neither vector needs to be normalized; the ratio is invariant under
    rescaling either one.
    """
    return _weak(np.asarray(psi, dtype=complex), np.asarray(phi, dtype=complex), matrix_of(A))


def _weak(psi, phi, a):
    den = np.vdot(phi, psi)
    if abs(den) < DEGENERACY_TOL:
        raise OrthogonalSelectionError(f"|<phi|psi>| = {abs(den):.3e} below {DEGENERACY_TOL}")
    return complex(np.vdot(phi, a @ psi) / den)


def weak_value(tt, A, t):
    a = matrix_of(A)
    if a.shape != (tt.dim, tt.dim):
        raise DimensionError(f"observable shape {a.shape} does not match dim {tt.dim}")
    psi, phi = _pair(tt, t)
    label = A.label if isinstance(A, HermitianOperator) else ""
    return WeakValueSample(float(t), label, _weak(psi, phi, a))


class ProjectiveDecomposition:
    """Complete set of orthogonal projectors with outcome labels."""

    def __init__(self, projectors, labels=None):
        mats = [np.array(matrix_of(p), dtype=complex) for p in projectors]
        if not mats:
            raise ValueError("decomposition needs at least one projector")
        if labels is None:
            labels = [
                p.label if isinstance(p, HermitianOperator) and p.label else f"E{k}"
                for k, p in enumerate(projectors)
            ]
        if len(labels) != len(mats):
            raise ValueError("one label per projector is required")
        d = mats[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for i, p in enumerate(mats):
            if p.shape != (d, d):
                raise DimensionError("projectors must share one dimension")
            if np.max(np.abs(p @ p - p)) > DECOMPOSITION_TOL:
                raise ValueError(f"{labels[i]} is not idempotent")
            if np.max(np.abs(p - p.conj().T)) > DECOMPOSITION_TOL:
                raise ValueError(f"{labels[i]} is not Hermitian")
            for j in range(i):
                if np.max(np.abs(p @ mats[j])) > DECOMPOSITION_TOL:
                    raise ValueError(f"{labels[i]} and {labels[j]} are not orthogonal")
            total += p
        if np.max(np.abs(total - np.eye(d))) > DECOMPOSITION_TOL:
            raise ValueError("projectors do not sum to the identity")
        for p in mats:
            p.setflags(write=False)
        self.projectors = tuple(mats)
        self.labels = tuple(str(x) for x in labels)
        self.dim = d

    def __len__(self):
        return len(self.projectors)

    def __repr__(self):
        return f"ProjectiveDecomposition({list(self.labels)})"

    @classmethod
    def boxes(cls, dim):
        """``{P1, ..., Pd}``: open every box."""
        return cls([make_projector(dim, k) for k in range(dim)])

    @classmethod
    def from_boxes(cls, dim, indices, rest_label="rest"):
        """Projectors onto the listed boxes (0-based) plus the complement if non-empty."""
        indices = list(indices)
        if len(set(indices)) != len(indices):
            raise ValueError("box indices must be distinct")
        projs = [make_projector(dim, k) for k in indices]
        if len(indices) < dim:
            rest = np.eye(dim) - sum(p.matrix for p in projs)
            projs.append(HermitianOperator(rest, rest_label))
        return cls(projs)

    @classmethod
    def binary(cls, P, label=None):
        """``{P, I - P}``."""
        p = matrix_of(P)
        name = label or (P.label if isinstance(P, HermitianOperator) and P.label else "P")
        return cls([p, np.eye(p.shape[0]) - p], [name, f"not {name}"])

    @classmethod
    def spectral(cls, A):
        """Eigenspace projectors of ``A``, labelled by eigenvalue."""
        values, projs = spectral_projectors(A, EIGEN_TOL)
        return cls(projs, [repr(v) for v in values]), values


def abl_amplitudes(psi, phi, dec):
    return np.array([np.vdot(phi, p @ psi) for p in dec.projectors])


def abl_probabilities(tt, dec, t):
    if dec.dim != tt.dim:
        raise DimensionError("decomposition dimension does not match the two-time state")
    psi, phi = _pair(tt, t)
    num = np.abs(abl_amplitudes(psi, phi, dec)) ** 2
    if np.all(num < IMPOSSIBLE_TOL):
        raise ImpossibleHistoryError(f"no outcome of {list(dec.labels)} can be post-selected at t={t}")
    return num / num.sum()


def reductio_check(tt, P, t):
    """Single-vector certainty test for ``P`` at ``t``.

    Removes the ``P`` branch from ``|psi(t)>``, evolves the remainder to
    ``t_f`` and checks that post-selection kills it.
    """
    p = matrix_of(P)
    t = tt._check(t)
    psi = forward_state(tt, t)
    branch = (np.eye(tt.dim) - p) @ psi
    final = propagator(tt.scenario, t, tt.t_f) @ branch
    return bool(abs(np.vdot(tt.post, final)) <= REDUCTIO_TOL)


@dataclass(frozen=True)
class Classification:
    label: str
    kind: str  # "deterministic" | "anomalous" | "indeterminate"
    weak_value: complex
    value: float = None


def _in_spectrum(w, values):
    return [v for v in values if abs(w - v) <= EIGEN_TOL]


def deterministic_set(tt, observables, t):
    """Classify each observable at ``t``.

    deterministic: weak value is an eigenvalue and its eigenspace has ABL
    probability 1; anomalous: weak value is complex or outside the spectral
    range; indeterminate: anything else.
    """
    psi, phi = _pair(tt, t)
    out = []
    for A in observables:
        a = matrix_of(A)
        if a.shape != (tt.dim, tt.dim):
            raise DimensionError("observable dimension does not match the two-time state")
        label = A.label if isinstance(A, HermitianOperator) else ""
        w = _weak(psi, phi, a)
        dec, values = ProjectiveDecomposition.spectral(A)
        num = np.abs(abl_amplitudes(psi, phi, dec)) ** 2
        probs = num / num.sum()
        certain = [
            v for k, v in enumerate(values)
            if abs(w - v) <= EIGEN_TOL and abs(probs[k] - 1.0) <= EIGEN_TOL
        ]
        if certain:
            out.append(Classification(label, "deterministic", w, certain[0]))
        elif abs(w.imag) > EIGEN_TOL or not (values[0] - EIGEN_TOL <= w.real <= values[-1] + EIGEN_TOL):
            out.append(Classification(label, "anomalous", w))
        else:
            out.append(Classification(label, "indeterminate", w))
    return out


@dataclass(frozen=True)
class TheoremReport:
    """Both directions of the certainty/weak-value equivalence for one case."""

    eigenvalues: tuple
    abl: tuple
    weak_value: complex
    certain: bool
    certain_eigenvalue: float
    matched_eigenvalue: float
    residual: float
    violation: bool


def theorem_crosscheck(tt, P, t):
    """Check ``ABL certainty of lambda  <=>  A_w == lambda`` for a dichotomic ``P``."""
    dec, values = ProjectiveDecomposition.spectral(P)
    if len(values) != 2:
        raise SpectrumError(f"operator has {len(values)} distinct eigenvalues, expected 2")
    psi, phi = _pair(tt, t)
    w = _weak(psi, phi, matrix_of(P))
    num = np.abs(abl_amplitudes(psi, phi, dec)) ** 2
    probs = num / num.sum()
    residuals = [abs(w - v) for v in values]
    k_near = int(np.argmin(residuals))
    certain_k = [k for k in range(2) if probs[k] >= 1.0 - EIGEN_TOL]
    matched_k = [k for k in range(2) if residuals[k] <= EIGEN_TOL]
    violation = set(certain_k) != set(matched_k)
    return TheoremReport(
        eigenvalues=tuple(values),
        abl=tuple(float(p) for p in probs),
        weak_value=w,
        certain=bool(certain_k),
        certain_eigenvalue=values[certain_k[0]] if certain_k else None,
        matched_eigenvalue=values[matched_k[0]] if matched_k else None,
        residual=float(residuals[k_near]),
        violation=violation,
    )


def certainty_case(rng, dim=None):
    """Random two-time state with a dichotomic observable whose outcome is certain.

    Draws a random timeline, time ``t`` and eigenspace projector ``P``, then
    picks the post-selected state orthogonal to the evolved ``(I - P)``
    branch so that the eigenvalue of ``P``'s range has ABL probability 1.
    Returns ``(tt, A, t, certain_value)`` with ``A = a P + b (I - P)``.
    """
    from scipy.stats import unitary_group

    from .scenario import random_scenario, random_state

    s = random_scenario(rng, dim=dim)
    d = s.dim
    t = float(rng.uniform(s.t_i, s.t_f))
    basis = unitary_group.rvs(d, random_state=rng)
    rank = int(rng.integers(1, d))
    cols = basis[:, :rank]
    p = cols @ cols.conj().T
    psi_t = evolution(s, t) @ s.pre
    dead = propagator(s, t, s.t_f) @ ((np.eye(d) - p) @ psi_t)
    post = np.array(random_state(d, rng))
    n = np.vdot(dead, dead).real
    if n > 0:
        post = post - dead * (np.vdot(dead, post) / n)
    post = post / np.linalg.norm(post)
    a, b = rng.uniform(-3, 3, size=2)
    while abs(a - b) < 0.1:
        a, b = rng.uniform(-3, 3, size=2)
    A = HermitianOperator(a * p + b * (np.eye(d) - p), "A")
    return TwoTimeState(s.with_states(post=post)), A, t, float(a)


def time_grid(tt, steps):
    """``steps`` evenly spaced times covering ``[t_i, t_f]`` inclusive."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    return np.linspace(tt.t_i, tt.t_f, steps)


def weak_value_sweep(tt, observables: Sequence, times, workers=None):
    """Weak values of every observable at every time, ordered by (time, observable)."""

    def at(t):
        psi, phi = _pair(tt, t)
        return [
            WeakValueSample(
                float(t),
                A.label if isinstance(A, HermitianOperator) else "",
                _weak(psi, phi, matrix_of(A)),
            )
            for A in observables
        ]

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(at, times))
    else:
        rows = [at(t) for t in times]
    return [s for row in rows for s in row]


def sweep_csv(samples):
    """Serialize samples as ``t,observable,re,im`` with 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "observable", "re", "im"])
    for s in samples:
        w.writerow([f"{s.t:.17g}", s.observable_label, f"{s.value.real:.17g}", f"{s.value.imag:.17g}"])
    return buf.getvalue()
