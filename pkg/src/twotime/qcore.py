"""Dense complex linear algebra for small (d <= ~16) quantum systems.

States are 1-D complex ``numpy`` arrays and unitaries are 2-D complex arrays.
Hermitian observables carry a label and are wrapped in
:class:`HermitianOperator`.  Everything returned from this module is
read-only; operations never mutate their inputs.

Time is measured in units where hbar = 1, so ``exp(-i H t)`` is the
propagator of a constant Hamiltonian over an interval of length ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, NumericalError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-11


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def as_state(amps, normalize=False):
    """Return ``amps`` as a read-only complex state vector.

    Parameters
    ----------
    amps : array_like
        Amplitudes in the box basis.
    normalize : bool
        Rescale to unit norm.  Without it the vector is returned as given.
    """
    v = np.array(amps, dtype=complex)
    if v.ndim != 1:
        raise DimensionError(f"state must be one-dimensional, got shape {v.shape}")
    if v.shape[0] < 2:
        raise DimensionError("state dimension must be at least 2")
    if not np.all(np.isfinite(v)):
        raise NumericalError("state has non-finite amplitudes")
    if normalize:
        n = np.linalg.norm(v)
        if n == 0:
            raise NumericalError("cannot normalize the zero vector")
        v = v / n
    return _frozen(v)


def basis_state(dim, index):
    if not 0 <= index < dim:
        raise DimensionError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return as_state(v)


def is_normalized(v, tol=NORM_TOL):
    return abs(np.vdot(v, v).real - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A labelled Hermitian matrix (observable or projector)."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericalError(f"operator {self.label!r} has non-finite entries")
        if not validate(m, "hermitian", HERMITIAN_TOL):
            raise ValueError(f"operator {self.label!r} is not Hermitian within {HERMITIAN_TOL}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __repr__(self):
        return f"HermitianOperator(label={self.label!r}, dim={self.dim})"


Operator = Union[HermitianOperator, np.ndarray]


def matrix_of(op):
    """Underlying array of a :class:`HermitianOperator` or array-like."""
    if isinstance(op, HermitianOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def inner_product(a, b):
    """``<a|b>``, conjugating the first argument."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def apply(m, v):
    m = matrix_of(m)
    v = np.asarray(v, dtype=complex)
    if m.ndim != 2 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot apply {m.shape} matrix to vector of length {v.shape[0]}")
    return _frozen(m @ v)


def validate(m, kind, tol):
    """True iff ``m`` is Hermitian/unitary up to ``tol`` in the max-entry norm."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = matrix_of(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.all(np.isfinite(m)):
        return False
    if kind == "hermitian":
        dev = m - m.conj().T
    elif kind == "unitary":
        dev = m.conj().T @ m - np.eye(m.shape[0])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return bool(np.max(np.abs(dev)) <= tol)


def eigh(h):
    """Eigen-decomposition of a Hermitian matrix with a reconstruction check."""
    h = matrix_of(h)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    err = np.max(np.abs((v * w) @ v.conj().T - h), initial=0.0)
    if not err <= RECONSTRUCTION_TOL * scale:
        raise NumericalError(f"eigendecomposition reconstruction error {err:.3e}")
    return w, v


def matexp_hermitian(h, theta):
    """``exp(-i theta H)`` via the spectral decomposition of ``H``."""
    w, v = eigh(h)
    return _frozen((v * np.exp(-1j * theta * w)) @ v.conj().T)


def make_projector(dim, index, label=None):
    if not 0 <= index < dim:
        raise DimensionError(f"projector index {index} out of range for dim {dim}")
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return HermitianOperator(p, label or f"P{index + 1}")


def identity(dim, label="I"):
    return HermitianOperator(np.eye(dim), label)


def spectral_projectors(op, tol=1e-9):
    """Distinct eigenvalues of ``op`` and the projector onto each eigenspace.

    Eigenvalues closer than ``tol`` are merged into one cluster.
    """
    w, v = eigh(op)
    clusters = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol:
            clusters.append((start, k))
            start = k
    values = []
    projectors = []
    for lo, hi in clusters:
        values.append(float(np.mean(w[lo:hi])))
        vs = v[:, lo:hi]
        projectors.append(_frozen(vs @ vs.conj().T))
    return values, projectors
