"""Qubit states, projective measurement and Shannon quantities.

The four protocol states live on the equator of the Bloch sphere::

    |+x>, |-x> = (|0> +- |1>) / sqrt(2)
    |+y>, |-y> = (|0> +- i|1>) / sqrt(2)

so each is fully described by a relative phase ``basis * pi/2 + bit * pi``.
That phase is also the time-bin phase Alice's interferometer imprints, which
is how :mod:`qkdsim.optics` and this module agree on conventions.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .random_stream import RandomStream

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


class Basis(enum.IntEnum):
    """The two maximally conjugate equatorial bases."""

    X = 0
    Y = 1

    @property
    def phase(self) -> float:
        return self.value * math.pi / 2

    def other(self) -> "Basis":
        return Basis(1 - self.value)


def state_phase(bit: int, basis: Basis) -> float:
    """Relative phase of the eigenstate with sign ``bit`` in ``basis``."""
    return Basis(basis).phase + int(bit) * math.pi


@dataclass(frozen=True)
class QubitState:
    amp0: complex
    amp1: complex

    def __post_init__(self):
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"qubit state not normalized (norm^2 = {norm!r})")

    @classmethod
    def from_amplitudes(cls, amp0, amp1) -> "QubitState":
        """Normalize and build; rejects the zero vector."""
        n = math.sqrt(abs(amp0) ** 2 + abs(amp1) ** 2)
        if n == 0:
            raise ValueError("zero vector is not a state")
        return cls(complex(amp0) / n, complex(amp1) / n)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def inner(self, other: "QubitState") -> complex:
        """<self|other>."""
        return self.amp0.conjugate() * other.amp0 + self.amp1.conjugate() * other.amp1

    def overlap(self, other: "QubitState") -> float:
        return abs(self.inner(other))

    def apply(self, u: "Unitary2") -> "QubitState":
        v = u.matrix @ self.vector
        return QubitState.from_amplitudes(v[0], v[1])

    def orthogonal(self) -> "QubitState":
        """The unique (up to phase) state orthogonal to this one."""
        return QubitState(-self.amp1.conjugate(), self.amp0.conjugate())


def prepare_state(bit: int, basis: Basis) -> QubitState:
    """Eigenstate of ``basis`` with sign ``+`` for bit 0 and ``-`` for bit 1."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    phi = state_phase(bit, basis)
    s = 1 / math.sqrt(2)
    return QubitState(complex(s), s * cmath.exp(1j * phi))


def born_probabilities(state: QubitState, basis: Basis) -> tuple[float, float]:
    """Probabilities of outcomes 0 and 1 when measuring ``state`` in ``basis``."""
    p0 = prepare_state(0, basis).overlap(state) ** 2
    p1 = prepare_state(1, basis).overlap(state) ** 2
    return p0, p1


def measure(state: QubitState, basis: Basis, rng: RandomStream) -> int:
    """Projective measurement; returns the sign bit of the observed eigenstate."""
    norm = abs(state.amp0) ** 2 + abs(state.amp1) ** 2
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError("cannot measure a non-normalized state")
    p0, _ = born_probabilities(state, basis)
    return 0 if rng.uniform() < p0 else 1


@dataclass(frozen=True)
class Unitary2:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m @ m.conj().T - np.eye(2))) > UNITARY_TOL:
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def phase(cls, phi: float) -> "Unitary2":
        return cls(np.diag([1.0, cmath.exp(1j * phi)]))


def random_unitary(rng: RandomStream) -> Unitary2:
    """Haar-distributed 2x2 unitary via QR of a complex Gaussian matrix."""
    z = (rng.normal((2, 2)) + 1j * rng.normal((2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return Unitary2(q * (d / np.abs(d)))


@dataclass(frozen=True)
class TwoQubitState:
    """Amplitudes indexed by ``(a, b)`` with ``a`` the first subsystem."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(2, 2)
        if abs(np.sum(np.abs(a) ** 2) - 1.0) > NORM_TOL:
            raise ValueError("two-qubit state not normalized")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def phi_plus(cls) -> "TwoQubitState":
        return cls(np.array([[1, 0], [0, 1]]) / math.sqrt(2))

    def apply(self, first: Unitary2 | None = None, second: Unitary2 | None = None) -> "TwoQubitState":
        a = self.amplitudes
        if first is not None:
            a = first.matrix @ a
        if second is not None:
            a = a @ second.matrix.T
        return TwoQubitState(a)


def transpose_identity_residual(u: Unitary2) -> float:
    """Norm of ``(U x 1)|Phi+> - (1 x U^T)|Phi+>``, zero for every unitary."""
    if not isinstance(u, Unitary2):
        u = Unitary2(u)
    phi = TwoQubitState.phi_plus()
    left = phi.apply(first=u).amplitudes
    right = phi.apply(second=Unitary2(u.matrix.T)).amplitudes
    return float(np.linalg.norm(left - right))


def binary_entropy(p: float) -> float:
    """Shannon entropy in bits of a Bernoulli(p) variable, h(0) = h(1) = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def mutual_information_bsc(q: float) -> float:
    """I(X;Y) for a binary symmetric channel with error rate ``q`` and uniform input."""
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"error rate must lie in [0, 1/2], got {q!r}")
    return 1.0 - binary_entropy(q)
