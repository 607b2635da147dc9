"""Joint outcome distributions and correlations for successive projective
spin measurements on a diagonal input state.

Two routes are provided and are meant to check each other:

* brute force -- the full joint distribution over all (2s+1)**n outcome
  sequences is built and summed (``method="enumerate"``); a transfer-matrix
  contraction of the same sum (``method="transfer"``) is used by the
  optimizers for speed;
* closed forms for one, two and three measurements.

The published three-point closed form (``published_closed_three``) does not
agree with brute force for s >= 3/2. ``closed_three`` uses coefficients
re-derived from <a, m|(S.b)^3|a, m> and matches enumeration to rounding.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .spinmath import Direction, SpinSystem, batched_rotation, eigenbasis, transition_matrix

__all__ = [
    "Convention",
    "DiagonalState",
    "NoisyStateSpec",
    "MeasurementChain",
    "OutcomeSequence",
    "EnumerationTooLarge",
    "SpinMismatch",
    "outcome_values",
    "joint_probability",
    "joint_distribution",
    "correlation",
    "batch_correlation",
    "bi_coefficients",
    "ThreePointCoefficients",
    "three_point_coefficients",
    "published_three_point_coefficients",
    "closed_one",
    "closed_two",
    "closed_three",
    "published_closed_three",
    "closed_n_aligned",
    "coplanar_chain",
    "ChainIdentityReport",
    "chain_identities_check",
]

Convention = Literal["physical", "pm_one"]

MAX_ENUMERATION = 10**7
MAX_BRUTE_N = 8


class EnumerationTooLarge(ValueError):
    """Raised when a brute-force sum would exceed the enumeration cap."""


class SpinMismatch(ValueError):
    """State and measurement chain refer to different spins."""


def outcome_values(spin: SpinSystem, convention: Convention = "physical") -> np.ndarray:
    """Numerical value attached to each outcome, ordered m = s ... -s.

    ``"physical"`` uses m itself; ``"pm_one"`` uses 2m and is only defined for s = 1/2.
    """
    if convention == "physical":
        return spin.eigenvalues
    if convention == "pm_one":
        if spin.twice_s != 1:
            raise ValueError("the +-1 eigenvalue convention is only defined for s = 1/2")
        return np.array([1.0, -1.0])
    raise ValueError(f"unknown convention {convention!r}")


def _scale(convention: Convention, spin: SpinSystem, k: int) -> float:
    if convention == "pm_one":
        outcome_values(spin, convention)
        return 2.0**k
    if convention != "physical":
        raise ValueError(f"unknown convention {convention!r}")
    return 1.0


@dataclass(frozen=True)
class DiagonalState:
    """Mixture of eigenstates of S.axis with ``populations`` ordered m = s ... -s."""

    spin: SpinSystem
    populations: tuple[float, ...]
    axis: Direction = field(default_factory=Direction.z)

    def __post_init__(self) -> None:
        pops = tuple(float(p) for p in self.populations)
        if len(pops) != self.spin.dim:
            raise ValueError(f"{self.spin} needs {self.spin.dim} populations, got {len(pops)}")
        if any(not (-1e-15 <= p <= 1 + 1e-15) for p in pops):
            raise ValueError(f"populations must lie in [0, 1]: {pops}")
        if abs(math.fsum(pops) - 1.0) > 1e-12:
            raise ValueError(f"populations must sum to 1 (got {math.fsum(pops)!r})")
        object.__setattr__(self, "populations", tuple(min(max(p, 0.0), 1.0) for p in pops))

    @classmethod
    def pure(cls, spin: SpinSystem, twice_m: int | None = None, axis: Direction | None = None) -> "DiagonalState":
        """Eigenstate |axis, m>; defaults to the top state m = s."""
        twice_m = spin.twice_s if twice_m is None else twice_m
        pops = [0.0] * spin.dim
        pops[spin.index_of(twice_m)] = 1.0
        return cls(spin, tuple(pops), axis or Direction.z())

    @classmethod
    def uniform(cls, spin: SpinSystem, axis: Direction | None = None) -> "DiagonalState":
        return cls(spin, tuple([1.0 / spin.dim] * spin.dim), axis or Direction.z())

    @classmethod
    def extremal(cls, spin: SpinSystem, p_top: float = 1.0, axis: Direction | None = None) -> "DiagonalState":
        """Mixture p_top |s><s| + (1 - p_top) |-s><-s| (maximally violating family)."""
        pops = [0.0] * spin.dim
        pops[0] += p_top
        pops[-1] += 1.0 - p_top
        return cls(spin, tuple(pops), axis or Direction.z())

    @classmethod
    def normalized(cls, spin: SpinSystem, weights: Sequence[float], axis: Direction | None = None) -> "DiagonalState":
        w = np.asarray(weights, dtype=float)
        if w.shape != (spin.dim,) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError(f"need {spin.dim} non-negative weights with positive sum")
        return cls(spin, tuple(w / w.sum()), axis or Direction.z())

    @property
    def p(self) -> np.ndarray:
        return np.array(self.populations)

    @property
    def chi(self) -> float:
        """Second moment sum_m p_m m^2."""
        return float(self.p @ self.spin.eigenvalues**2)

    @property
    def xi(self) -> float:
        """``chi / s^2``."""
        if self.spin.twice_s == 0:
            raise ValueError("xi is undefined for s = 0")
        return self.chi / self.spin.s**2

    @property
    def polarization(self) -> float:
        """sum_m p_m m."""
        return float(self.p @ self.spin.eigenvalues)


@dataclass(frozen=True)
class NoisyStateSpec:
    """White-noise contamination ``(1 - f) rho_max + f I / (2s + 1)`` of an extremal state."""

    base: DiagonalState
    noise_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must lie in [0, 1]")
        p = self.base.p
        if self.base.spin.dim > 2 and p[1:-1].sum() > 1e-12:
            raise ValueError("base state must be supported on m = +-s only")

    def to_state(self) -> DiagonalState:
        f = self.noise_fraction
        d = self.base.spin.dim
        return DiagonalState(self.base.spin, tuple((1 - f) * self.base.p + f / d), self.base.axis)

    @property
    def a_prime(self) -> float:
        s, f = self.base.spin.s, self.noise_fraction
        return (1 - f) * (2 * s - 1) * s

    @property
    def b_prime(self) -> float:
        s, f = self.base.spin.s, self.noise_fraction
        return (1 - f) * s + 2.0 / 3.0 * f * (s + 1) * s


@dataclass(frozen=True)
class MeasurementChain:
    """Ordered measurement directions a_1 ... a_n."""

    directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        dirs = tuple(self.directions)
        if not dirs:
            raise ValueError("a measurement chain needs at least one direction")
        if not all(isinstance(d, Direction) for d in dirs):
            raise TypeError("chain entries must be Direction instances")
        object.__setattr__(self, "directions", dirs)

    @property
    def n(self) -> int:
        return len(self.directions)

    def __len__(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class OutcomeSequence:
    """Outcomes alpha_1 ... alpha_n, stored as twice_m integers."""

    twice_m: tuple[int, ...]

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "OutcomeSequence":
        out = []
        for v in values:
            t = 2 * v
            if abs(t - round(t)) > 1e-12:
                raise ValueError(f"{v} is not a half-integer")
            out.append(int(round(t)))
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.twice_m)


def _check_brute(spin: SpinSystem, n: int) -> None:
    if n > MAX_BRUTE_N:
        raise EnumerationTooLarge(f"brute force limited to n <= {MAX_BRUTE_N} (got n={n})")
    if spin.dim**n > MAX_ENUMERATION:
        raise EnumerationTooLarge(
            f"(2s+1)^n = {spin.dim}^{n} exceeds the enumeration cap {MAX_ENUMERATION:.0e}"
        )


def _transitions(state: DiagonalState, chain: MeasurementChain) -> list[np.ndarray]:
    prev = state.axis
    out = []
    for d in chain.directions:
        out.append(transition_matrix(state.spin, prev, d))
        prev = d
    return out


def joint_probability(state: DiagonalState, chain: MeasurementChain, seq: OutcomeSequence | Sequence[int]) -> float:
    """p(alpha_1, ..., alpha_n) for one outcome sequence (``twice_m`` integers).

    Sum over the input populations of the product of successive transition
    probabilities |<a_{i-1}, alpha_{i-1}|a_i, alpha_i>|^2.
    """
    twice = seq.twice_m if isinstance(seq, OutcomeSequence) else tuple(seq)
    if len(twice) != chain.n:
        raise ValueError(f"sequence length {len(twice)} does not match chain length {chain.n}")
    spin = state.spin
    idx = [spin.index_of(t) for t in twice]
    ts = _transitions(state, chain)
    weights = ts[0][:, idx[0]]
    total = float(state.p @ weights)
    for k in range(1, chain.n):
        total *= ts[k][idx[k - 1], idx[k]]
    return total


def joint_distribution(state: DiagonalState, chain: MeasurementChain) -> np.ndarray:
    """Array of shape ``(dim,) * n`` holding every joint probability."""
    _check_brute(state.spin, chain.n)
    ts = _transitions(state, chain)
    probs = state.p @ ts[0]
    for t in ts[1:]:
        probs = probs[..., :, None] * t
    return probs


def _powers(subset: Mapping[int, int] | Iterable[int], n: int) -> list[int]:
    powers = [0] * n
    items = subset.items() if isinstance(subset, Mapping) else ((i, 1) for i in subset)
    for i, k in items:
        if not 1 <= int(i) <= n:
            raise ValueError(f"measurement index {i} outside 1..{n}")
        if k < 0:
            raise ValueError("powers must be non-negative")
        powers[int(i) - 1] += int(k)
    return powers


def correlation(
    state: DiagonalState,
    chain: MeasurementChain,
    subset: Mapping[int, int] | Iterable[int],
    convention: Convention = "physical",
    method: Literal["enumerate", "transfer"] = "enumerate",
) -> float:
    """<alpha_{i1}^{k1} ... alpha_{ij}^{kj}> over the outcomes of ``chain``.

    ``subset`` is an iterable of 1-based indices (repeats raise the power) or
    a mapping index -> power.
    """
    powers = _powers(subset, chain.n)
    vals = outcome_values(state.spin, convention)
    if method == "enumerate":
        probs = joint_distribution(state, chain)
        weight = np.ones(())
        for k in powers:
            weight = weight[..., None] * vals**k
        return float(np.sum(probs * weight))
    if method == "transfer":
        v = state.p
        for t, k in zip(_transitions(state, chain), powers):
            v = (v @ t) * vals**k
        return float(v.sum())
    raise ValueError(f"unknown method {method!r}")


def batch_correlation(
    state: DiagonalState,
    theta,
    phi=None,
    subset: Mapping[int, int] | Iterable[int] | None = None,
    convention: Convention = "physical",
) -> np.ndarray:
    """Transfer-matrix correlation for many chains at once.

    ``theta`` and ``phi`` have shape ``(..., n)`` and give the measurement
    directions of each chain; ``theta`` may be signed (see
    :func:`~seqspin.spinmath.batched_rotation`). ``subset`` defaults to every step.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    powers = _powers(range(1, n + 1) if subset is None else subset, n)
    vals = outcome_values(state.spin, convention)
    rot = batched_rotation(state.spin, theta, 0.0 if phi is None else phi)
    prev = eigenbasis(state.spin, state.axis)
    v = state.p[None, :]
    for i, k in enumerate(powers):
        cur = rot[..., i, :, :]
        t = np.abs(np.swapaxes(prev.conj(), -1, -2) @ cur) ** 2
        v = (v @ t) * vals**k
        prev = cur
    return v.sum(axis=-1)[..., 0]


def bi_coefficients(state: DiagonalState) -> tuple[float, float]:
    """(A, B) of <a1 a2> = 1/2 cos(t12) [A cos^2(t1) + B]."""
    s = state.spin.s
    chi = state.chi
    return 3 * chi - s * (s + 1), s * (s + 1) - chi


@dataclass(frozen=True)
class ThreePointCoefficients:
    """16 <a1 a2 a3> / cos(t23) = cos(t1) [M1 C + N1] + cos^3(t1) [M3 C + N3], C = cos^2(t12)."""

    m1: float
    n1: float
    m3: float
    n3: float

    def at(self, theta1: float) -> tuple[float, float]:
        """Effective (M, N) at first-step angle ``theta1``."""
        c2 = math.cos(theta1) ** 2
        return self.m1 + self.m3 * c2, self.n1 + self.n3 * c2


def three_point_coefficients(state: DiagonalState) -> ThreePointCoefficients:
    s = state.spin.s
    ss = s * (s + 1)
    m = state.spin.eigenvalues
    p = state.p
    cubic = 5 * m**3 - 3 * ss * m + m
    return ThreePointCoefficients(
        m1=float(p @ (4 * (7 * ss * m - 9 * m**3 - 3 * m))),
        n1=float(p @ (4 * (3 * m**3 + m - ss * m))),
        m3=float(p @ (12 * cubic)),
        n3=float(p @ (-4 * cubic)),
    )


def published_three_point_coefficients(state: DiagonalState) -> tuple[float, float]:
    """The published (M, N); exact only for s <= 1."""
    s = state.spin.s
    ss = s * (s + 1)
    m = state.spin.eigenvalues
    p = state.p
    return float(p @ (m * (9 * m**2 + ss - 3))), float(p @ (m * (-3 * m**2 + 5 * ss + 1)))


def closed_one(state: DiagonalState, theta1: float, convention: Convention = "physical") -> float:
    """<alpha_1> = sum_m p_m m cos(theta1)."""
    return state.polarization * math.cos(theta1) * _scale(convention, state.spin, 1)


def closed_two(state: DiagonalState, theta1: float, theta12: float, convention: Convention = "physical") -> float:
    """<alpha_1 alpha_2> = 1/2 cos(theta12) [A cos^2(theta1) + B]."""
    a, b = bi_coefficients(state)
    val = 0.5 * math.cos(theta12) * (a * math.cos(theta1) ** 2 + b)
    return val * _scale(convention, state.spin, 2)


def closed_three(
    state: DiagonalState, theta1: float, theta12: float, theta23: float, convention: Convention = "physical"
) -> float:
    """<alpha_1 alpha_2 alpha_3> with coefficients that agree with enumeration for every s."""
    m, n = three_point_coefficients(state).at(theta1)
    val = math.cos(theta1) * math.cos(theta23) * (m * math.cos(theta12) ** 2 + n) / 16
    return val * _scale(convention, state.spin, 3)


def published_closed_three(
    state: DiagonalState, theta1: float, theta12: float, theta23: float, convention: Convention = "physical"
) -> float:
    """Three-point correlation from the published (M, N); kept for table reproduction."""
    m, n = published_three_point_coefficients(state)
    val = math.cos(theta1) * math.cos(theta23) * (m * math.cos(theta12) ** 2 + n) / 16
    return val * _scale(convention, state.spin, 3)


def closed_n_aligned(
    spin: SpinSystem,
    n: int,
    theta_first: float,
    theta_middle: float,
    theta_last: float,
    convention: Convention = "physical",
) -> float:
    """<alpha_1 ... alpha_n> for the top state with a_1 ... a_{n-3} parallel to a_0.

    The first n-3 outcomes are then all s, so the result is s**(n-3) times the
    three-point correlation of the last three steps, whose consecutive angles
    are ``theta_first`` (a_{n-3}, a_{n-2}), ``theta_middle`` and ``theta_last``.
    """
    if n < 3:
        raise ValueError("closed_n_aligned needs n >= 3")
    state = DiagonalState.pure(spin)
    val = spin.s ** (n - 3) * closed_three(state, theta_first, theta_middle, theta_last)
    return val * _scale(convention, spin, n)


def coplanar_chain(*angles: float) -> MeasurementChain:
    """Chain in the x-z plane from consecutive relative angles (a_0 = z)."""
    total = 0.0
    dirs = []
    for a in angles:
        total += a
        dirs.append(Direction.in_xz_plane(total))
    return MeasurementChain(tuple(dirs))


@dataclass(frozen=True)
class ChainIdentityReport:
    max_deviation: float
    rows: tuple[tuple[str, float, float], ...]


def chain_identities_check(state: DiagonalState, chain: MeasurementChain) -> ChainIdentityReport:
    """Compare spin-1/2 factorization identities (+-1 values) with enumeration.

    For a suffix alpha_{n-k} ... alpha_n, adjacent pairs from the end each
    contribute cos of their angle; an unpaired leading alpha_{n-k} contributes
    (p+ - p-) times the product of all consecutive cosines from a_0 to a_{n-k}.
    The last pair correlation is also checked to be state independent.
    """
    if state.spin.twice_s != 1:
        raise ValueError("chain identities hold for s = 1/2 only")
    n = chain.n
    dirs = (state.axis,) + chain.directions
    cos = [float(np.dot(dirs[i - 1].vector, dirs[i].vector)) for i in range(1, n + 1)]
    q = state.populations[0] - state.populations[1]
    rows = []
    for k in range(n):
        first = n - k
        pred = 1.0
        i = n
        while i - 1 >= first:
            pred *= cos[i - 1]
            i -= 2
        if i == first:
            pred *= q * math.prod(cos[:first])
        got = correlation(state, chain, range(first, n + 1), convention="pm_one")
        rows.append((f"<a{first}..a{n}>", got, pred))
    if n >= 2:
        other = DiagonalState(state.spin, (0.5, 0.5), state.axis)
        got = correlation(other, chain, (n - 1, n), convention="pm_one")
        rows.append((f"<a{n-1}a{n}> (uniform state)", got, cos[n - 1]))
    dev = max(abs(g - p) for _, g, p in rows)
    return ChainIdentityReport(dev, tuple(rows))
