"""Discretized von Neumann pointer for weak measurements.

A Gaussian pointer on a periodic grid couples impulsively to a system
observable through ``exp(-i g A (x) p)``: the eigenbranch of ``A`` with
eigenvalue ``a`` translates the pointer by ``g * a``.  After post-selection
the pointer's conditional mean position and momentum read out, to first order
in ``g``,

    <x> = g Re(A_w),        <p> = 2 g Var(p) Im(A_w).

Translations are applied as exact phase ramps in momentum space, so no
interpolation error enters the g-scaling.

Several pointers may be chained on one trajectory; the joint amplitude array
then has shape ``(dim, points, points, ...)`` with one axis per pointer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GridError, OrthogonalSelectionError, SpectrumError
from .qcore import HermitianOperator, eigh, matrix_of, validate
from .scenario import evolution, propagator

DEFAULT_POINTS = 1024
DEFAULT_LENGTH = 40.0
DEFAULT_SIGMA = 1.0
DEFAULT_G = 0.01
MIN_POINTS = 64
SUPPORT_WIDTHS = 16
MIN_SUCCESS = 1e-18


@dataclass(frozen=True)
class PointerGrid:
    points: int = DEFAULT_POINTS
    length: float = DEFAULT_LENGTH

    def __post_init__(self):
        n = int(self.points)
        if n < MIN_POINTS or n & (n - 1):
            raise GridError(f"points must be a power of two >= {MIN_POINTS}, got {n}")
        if not self.length > 0:
            raise GridError("length must be positive")

    @property
    def spacing(self):
        return self.length / self.points

    @property
    def x(self):
        return (np.arange(self.points) - self.points // 2) * self.spacing

    @property
    def p(self):
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)


@dataclass(frozen=True, eq=False)
class PointerState:
    grid: PointerGrid
    sigma: float
    amplitudes: np.ndarray


@dataclass(frozen=True, eq=False)
class JointState:
    """System (x) pointers; ``amplitudes[s, x1, x2, ...]``."""

    system_dim: int
    grid: PointerGrid
    amplitudes: np.ndarray

    @property
    def pointers(self):
        return self.amplitudes.ndim - 1

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing**self.pointers)


@dataclass(frozen=True)
class CouplingConfig:
    g: float
    observable: HermitianOperator
    time: float = 0.0


def prepare_pointer(grid, sigma=DEFAULT_SIGMA):
    """Centered Gaussian ``exp(-x^2 / (4 sigma^2))`` normalized on the grid."""
    if not sigma > 0:
        raise GridError("sigma must be positive")
    if grid.length < SUPPORT_WIDTHS * sigma:
        raise GridError(f"grid length {grid.length} below {SUPPORT_WIDTHS} sigma = {SUPPORT_WIDTHS * sigma}")
    psi = np.exp(-grid.x**2 / (4 * sigma**2)).astype(complex)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.spacing)
    psi.setflags(write=False)
    return PointerState(grid, float(sigma), psi)


def position_moments(grid, amps):
    """Mean and variance of ``x`` for a 1-D pointer wavefunction."""
    w = np.abs(amps) ** 2
    w = w / w.sum()
    mean = float(np.sum(grid.x * w))
    return mean, float(np.sum((grid.x - mean) ** 2 * w))


def momentum_moments(grid, amps):
    """Mean and variance of ``p`` from the discrete Fourier transform."""
    w = np.abs(np.fft.fft(amps)) ** 2
    w = w / w.sum()
    p = grid.p
    mean = float(np.sum(p * w))
    return mean, float(np.sum((p - mean) ** 2 * w))


def joint_from(sys, ptr):
    sys = np.asarray(sys, dtype=complex)
    return JointState(len(sys), ptr.grid, np.multiply.outer(sys, ptr.amplitudes))


def attach_pointer(joint, ptr):
    """Append another independent pointer axis to ``joint``."""
    if ptr.grid != joint.grid:
        raise GridError("chained pointers must share one grid")
    return JointState(joint.system_dim, joint.grid, np.multiply.outer(joint.amplitudes, ptr.amplitudes))


def evolve_system(joint, u):
    u = np.asarray(u, dtype=complex)
    return JointState(joint.system_dim, joint.grid, np.tensordot(u, joint.amplitudes, axes=(1, 0)))


def weak_couple(sys, ptr, cfg, axis=None):
    """Apply ``exp(-i g A (x) p)`` between the system and one pointer.

    ``sys`` may be a system state (a fresh joint state is built with ``ptr``)
    or an existing :class:`JointState`, in which case ``axis`` selects the
    pointer (default: the last one) and ``ptr`` only supplies the grid check.
    """
    a = matrix_of(cfg.observable)
    if not validate(a, "hermitian", 1e-12):
        raise SpectrumError("coupled observable must be Hermitian")
    joint = sys if isinstance(sys, JointState) else joint_from(sys, ptr)
    if a.shape != (joint.system_dim, joint.system_dim):
        raise DimensionError("observable dimension does not match the system")
    if ptr is not None and ptr.grid != joint.grid:
        raise GridError("pointer grid does not match the joint state")
    ax = joint.pointers if axis is None else int(axis)
    if not 1 <= ax <= joint.pointers:
        raise DimensionError(f"pointer axis {ax} out of range")
    w, v = eigh(a)
    # rotate into the eigenbasis, shift each branch, rotate back
    amps = np.tensordot(v.conj().T, joint.amplitudes, axes=(1, 0))
    k = np.fft.fft(amps, axis=ax)
    shape = [1] * amps.ndim
    shape[0] = len(w)
    shape[ax] = joint.grid.points
    phase = np.exp(-1j * cfg.g * np.multiply.outer(w, joint.grid.p)).reshape(shape)
    amps = np.fft.ifft(k * phase, axis=ax)
    return JointState(joint.system_dim, joint.grid, np.tensordot(v, amps, axes=(1, 0)))


@dataclass(frozen=True)
class Readout:
    mean_x: float
    mean_p: float
    success_prob: float


def postselect(joint, post, evolve_to_final=None):
    """Conditional pointer amplitudes and the post-selection probability."""
    if evolve_to_final is not None:
        joint = evolve_system(joint, evolve_to_final)
    post = np.asarray(post, dtype=complex)
    cond = np.tensordot(post.conj(), joint.amplitudes, axes=(0, 0))
    prob = float(np.sum(np.abs(cond) ** 2) * joint.grid.spacing**joint.pointers)
    if prob < MIN_SUCCESS:
        raise OrthogonalSelectionError(f"post-selection probability {prob:.3e} below {MIN_SUCCESS}")
    return cond / math.sqrt(prob), prob


def _marginal_readout(grid, cond, axis):
    """``<x>`` and ``<p>`` of one pointer axis of a conditional multi-pointer state."""
    others = tuple(i for i in range(cond.ndim) if i != axis)
    wx = np.sum(np.abs(cond) ** 2, axis=others)
    wp = np.sum(np.abs(np.fft.fft(cond, axis=axis)) ** 2, axis=others)
    return float(np.sum(grid.x * wx) / wx.sum()), float(np.sum(grid.p * wp) / wp.sum())


def postselect_readout(joint, post, evolve_to_final=None):
    """Post-select the system and read the (last) pointer's mean position and momentum."""
    cond, prob = postselect(joint, post, evolve_to_final)
    mx, mp = _marginal_readout(joint.grid, cond, cond.ndim - 1)
    return Readout(mx, mp, min(prob, 1.0))


def postselect_readouts(joint, post, evolve_to_final=None):
    """Readouts for every pointer of a chained joint state, in coupling order."""
    cond, prob = postselect(joint, post, evolve_to_final)
    return [Readout(*_marginal_readout(joint.grid, cond, ax), min(prob, 1.0)) for ax in range(cond.ndim)]


def readout_to_weak(readout, g, var_p):
    return complex(readout.mean_x / g, readout.mean_p / (2 * g * var_p))


@dataclass(frozen=True)
class PointerEstimate:
    """Weak-value estimate with diagnostics.

    ``estimate`` is the raw readout at coupling ``g``; ``half`` the readout
    at ``g/2``; ``extrapolated`` their Richardson combination, which removes
    the leading ``g**2`` bias term.
    """

    observable: str
    t: float
    g: float
    sigma: float
    grid_points: int
    mean_x: float
    mean_p: float
    var_p: float
    success_prob: float
    estimate: complex
    half: complex
    extrapolated: complex
    weak_regime: bool

    def document(self):
        return {
            "observable": self.observable,
            "t": self.t,
            "g": self.g,
            "sigma": self.sigma,
            "grid_points": self.grid_points,
            "mean_x": self.mean_x,
            "mean_p": self.mean_p,
            "success_prob": self.success_prob,
            "estimate_re": self.estimate.real,
            "estimate_im": self.estimate.imag,
        }


RICHARDSON_ORDER = 2


def richardson(coarse, fine, order=RICHARDSON_ORDER):
    """Extrapolate values at ``g`` and ``g/2`` assuming error ~ g**order."""
    f = 2**order
    return (f * fine - coarse) / (f - 1)


def spectral_radius(a):
    w, _ = eigh(a)
    return float(np.max(np.abs(w)))


def _single(s, A, t, g, ptr):
    psi_t = evolution(s, t) @ s.pre
    joint = weak_couple(psi_t, ptr, CouplingConfig(g, A, t))
    return postselect_readout(joint, s.post, propagator(s, t, s.t_f))


def estimate_weak_value(s, A, t, g=DEFAULT_G, grid=None, sigma=DEFAULT_SIGMA):
    """Simulated weak measurement of ``A`` at time ``t`` of scenario ``s``.

    The system is coupled after any event scheduled at ``t``, then evolved to
    ``t_f`` and post-selected.
    """
    grid = grid or PointerGrid()
    ptr = prepare_pointer(grid, sigma)
    _, var_p = momentum_moments(grid, ptr.amplitudes)
    r = _single(s, A, t, g, ptr)
    r_half = _single(s, A, t, g / 2, ptr)
    est = readout_to_weak(r, g, var_p)
    half = readout_to_weak(r_half, g / 2, var_p)
    return PointerEstimate(
        observable=A.label if isinstance(A, HermitianOperator) else "",
        t=float(t),
        g=float(g),
        sigma=float(sigma),
        grid_points=grid.points,
        mean_x=r.mean_x,
        mean_p=r.mean_p,
        var_p=var_p,
        success_prob=r.success_prob,
        estimate=est,
        half=half,
        extrapolated=richardson(est, half),
        weak_regime=abs(g) * spectral_radius(matrix_of(A)) <= sigma / 10,
    )


def chained_estimates(s, couplings, g=DEFAULT_G, grid=None, sigma=DEFAULT_SIGMA):
    """Weak values from several pointers coupled along one trajectory.

    ``couplings`` is a list of ``(observable, time)`` pairs in time order;
    each gets its own fresh pointer.  Memory grows as ``points**len(couplings)``
    so keep the grid small (64-128 points) for three pointers.
    """
    grid = grid or PointerGrid(64, 16.0)
    ptr = prepare_pointer(grid, sigma)
    _, var_p = momentum_moments(grid, ptr.amplitudes)
    joint = None
    t_prev = s.t_i
    for A, t in couplings:
        if t < t_prev:
            raise ValueError("couplings must be in time order")
        if joint is None:
            joint = joint_from(evolution(s, t) @ s.pre, ptr)
        else:
            joint = attach_pointer(evolve_system(joint, propagator(s, t_prev, t)), ptr)
        joint = weak_couple(joint, ptr, CouplingConfig(g, A, t))
        t_prev = t
    readouts = postselect_readouts(joint, s.post, propagator(s, t_prev, s.t_f))
    return [readout_to_weak(r, g, var_p) for r in readouts]
