"""Spin-s operators, eigenbases along arbitrary directions and transition
probabilities between successive measurement eigenstates.

Matrices are written in the S_z eigenbasis ordered m = s, s-1, ..., -s.
Spins and magnetic quantum numbers are carried as ``twice_s`` / ``twice_m``
integers so that half-integers stay exact; they become floats only when
matrix entries are formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction

import numpy as np

__all__ = [
    "SpinSystem",
    "Direction",
    "build_spin_operators",
    "spin_component",
    "eigenbasis",
    "transition_matrix",
    "transition_prob",
    "batched_rotation",
    "parse_spin",
]

MAX_TWICE_S = 60


@dataclass(frozen=True)
class SpinSystem:
    """A single spin-s particle, stored as ``twice_s = 2s``."""

    twice_s: int

    def __post_init__(self) -> None:
        if isinstance(self.twice_s, bool) or not isinstance(self.twice_s, (int, np.integer)):
            raise TypeError(f"twice_s must be an integer, got {self.twice_s!r}")
        if not 0 <= self.twice_s <= MAX_TWICE_S:
            raise ValueError(f"twice_s must lie in [0, {MAX_TWICE_S}], got {self.twice_s}")
        object.__setattr__(self, "twice_s", int(self.twice_s))

    @classmethod
    def from_spin(cls, s: float | Fraction | str) -> "SpinSystem":
        return parse_spin(s)

    @property
    def s(self) -> float:
        return self.twice_s / 2

    @property
    def dim(self) -> int:
        return self.twice_s + 1

    @property
    def twice_m(self) -> tuple[int, ...]:
        """Twice the eigenvalue ladder, ``(2s, 2s-2, ..., -2s)``."""
        return tuple(range(self.twice_s, -self.twice_s - 1, -2))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array(self.twice_m, dtype=float) / 2

    def index_of(self, twice_m: int) -> int:
        """Row/column index of the eigenvalue ``twice_m / 2``."""
        if (self.twice_s - twice_m) % 2 or abs(twice_m) > self.twice_s:
            raise ValueError(f"2m={twice_m} is not on the ladder of s={self.label}")
        return (self.twice_s - twice_m) // 2

    @property
    def label(self) -> str:
        return str(self.twice_s // 2) if self.twice_s % 2 == 0 else f"{self.twice_s}/2"

    def __str__(self) -> str:
        return f"s={self.label}"


def parse_spin(value: float | Fraction | str) -> SpinSystem:
    """Parse ``"1/2"``, ``"3/2"``, ``"1"``, ``1.5`` ... into a :class:`SpinSystem`.

    Anything that is not a non-negative half-integer raises ``ValueError``.
    """
    try:
        frac = Fraction(str(value).strip()) if isinstance(value, str) else Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse spin {value!r}") from exc
    twice = 2 * frac
    if twice.denominator != 1 or twice < 0:
        raise ValueError(f"spin must be a non-negative half-integer, got {value!r}")
    return SpinSystem(int(twice))


@dataclass(frozen=True)
class Direction:
    """Unit vector given by polar angle ``theta`` in [0, pi] and azimuth ``phi`` in [0, 2pi)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta, phi = float(self.theta), float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise ValueError("direction angles must be finite")
        if not -1e-12 <= theta <= math.pi + 1e-12:
            raise ValueError(f"theta={theta} outside [0, pi]; use Direction.from_angles")
        if not -1e-12 <= phi < 2 * math.pi + 1e-12:
            raise ValueError(f"phi={phi} outside [0, 2pi); use Direction.from_angles")
        object.__setattr__(self, "theta", min(max(theta, 0.0), math.pi))
        object.__setattr__(self, "phi", phi % (2 * math.pi))

    @classmethod
    def from_angles(cls, theta: float, phi: float = 0.0) -> "Direction":
        """Build a direction from arbitrary real angles, folding them into range."""
        theta = math.fmod(theta, 2 * math.pi)
        if theta < 0:
            theta += 2 * math.pi
        if theta > math.pi:
            theta = 2 * math.pi - theta
            phi += math.pi
        phi = math.fmod(phi, 2 * math.pi)
        if phi < 0:
            phi += 2 * math.pi
        if phi >= 2 * math.pi:
            phi = 0.0
        return cls(theta, phi)

    @classmethod
    def in_xz_plane(cls, angle: float) -> "Direction":
        """Direction at ``angle`` from +z, rotating towards +x (coplanar convention)."""
        return cls.from_angles(angle, 0.0)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = (float(c) for c in v)
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("cannot build a direction from a zero or non-finite vector")
        x, y, z = x / norm, y / norm, z / norm
        theta = math.acos(max(-1.0, min(1.0, z)))
        phi = math.atan2(y, x) if (x or y) else 0.0
        return cls.from_angles(theta, phi)

    @classmethod
    def z(cls) -> "Direction":
        return cls(0.0, 0.0)

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def angle_to(self, other: "Direction") -> float:
        c = float(np.dot(self.vector, other.vector))
        return math.acos(max(-1.0, min(1.0, c)))

    def reversed(self) -> "Direction":
        return Direction.from_vector(-self.vector)


@lru_cache(maxsize=None)
def _ladder(twice_s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = twice_s + 1
    m = np.arange(twice_s, -twice_s - 1, -2) / 2
    s = twice_s / 2
    s_plus = np.zeros((dim, dim))
    for k in range(1, dim):
        # <m+1| S+ |m> with m = m[k]
        s_plus[k - 1, k] = math.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sx = ((s_plus + s_plus.T) / 2).astype(complex)
    sy = (s_plus - s_plus.T) / 2j
    sz = np.diag(m).astype(complex)
    for a in (sx, sy, sz):
        a.setflags(write=False)
    return sx, sy, sz


def build_spin_operators(sys: SpinSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return copies of (S_x, S_y, S_z) for ``sys`` as complex dim x dim arrays."""
    sx, sy, sz = _ladder(sys.twice_s)
    return sx.copy(), sy.copy(), sz.copy()


def spin_component(sys: SpinSystem, a: Direction) -> np.ndarray:
    """The operator S . a (Hermitian)."""
    sx, sy, sz = _ladder(sys.twice_s)
    ax, ay, az = a.vector
    return ax * sx + ay * sy + az * sz


@lru_cache(maxsize=None)
def _sy_spectrum(twice_s: int) -> tuple[np.ndarray, np.ndarray]:
    _, sy, _ = _ladder(twice_s)
    w, v = np.linalg.eigh(sy)
    return w, v


@lru_cache(maxsize=8192)
def _rotation(twice_s: int, theta: float, phi: float) -> np.ndarray:
    # R(theta, phi) = exp(-i phi Sz) exp(-i theta Sy)
    if theta == 0.0:
        ry = np.eye(twice_s + 1, dtype=complex)
    else:
        w, v = _sy_spectrum(twice_s)
        ry = (v * np.exp(-1j * theta * w)) @ v.conj().T
    m = np.arange(twice_s, -twice_s - 1, -2) / 2
    r = np.exp(-1j * phi * m)[:, None] * ry
    r.setflags(write=False)
    return r


def eigenbasis(sys: SpinSystem, a: Direction) -> np.ndarray:
    """Columns are |a, m> for m = s ... -s, obtained by rotating the S_z basis.

    The phase convention is fixed by R(theta, phi) = exp(-i phi S_z) exp(-i theta S_y);
    only moduli of overlaps are physically meaningful here.
    """
    return _rotation(sys.twice_s, a.theta, a.phi)


@lru_cache(maxsize=16384)
def _transition(twice_s: int, a: Direction, b: Direction) -> np.ndarray:
    ua = _rotation(twice_s, a.theta, a.phi)
    ub = _rotation(twice_s, b.theta, b.phi)
    t = np.abs(ua.conj().T @ ub) ** 2
    t.setflags(write=False)
    return t


def transition_matrix(sys: SpinSystem, a: Direction, b: Direction) -> np.ndarray:
    """``T[i, j] = |<a, m_i | b, m_j>|^2`` (doubly stochastic, read-only)."""
    return _transition(sys.twice_s, a, b)


def transition_prob(sys: SpinSystem, a: Direction, twice_m: int, b: Direction, twice_m2: int) -> float:
    """Probability of outcome ``twice_m2/2`` along ``b`` right after ``twice_m/2`` along ``a``."""
    t = _transition(sys.twice_s, a, b)
    return float(t[sys.index_of(twice_m), sys.index_of(twice_m2)])


def batched_rotation(sys: SpinSystem, theta, phi=0.0) -> np.ndarray:
    """R(theta, phi) for broadcastable arrays of angles, shape ``(..., dim, dim)``.

    Unlike :class:`Direction`, ``theta`` may be any real number: a negative
    polar angle with phi = 0 is the x-z plane direction on the -x side.
    """
    w, v = _sy_spectrum(sys.twice_s)
    theta = np.asarray(theta, dtype=float)
    ry = (v * np.exp(-1j * theta[..., None, None] * w)) @ v.conj().T
    phi = np.asarray(phi, dtype=float)
    if not phi.any():
        return ry
    m = np.arange(sys.twice_s, -sys.twice_s - 1, -2) / 2
    return np.exp(-1j * phi[..., None, None] * m[:, None]) * ry
