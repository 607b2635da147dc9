"""Mermin-Klyshko polynomials for successive measurements, Bell-type
inequalities built from them, and their hidden-variable bounds."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Literal

import numpy as np

from .sequential import (
    Convention,
    DiagonalState,
    EnumerationTooLarge,
    MeasurementChain,
    batch_correlation,
    correlation,
    outcome_values,
)
from .spinmath import Direction

__all__ = [
    "MKSettings",
    "MKValue",
    "SvetlichnyValue",
    "HybridReport",
    "HVTBoundReport",
    "mk_polynomial",
    "mk_expectation",
    "mk_expectation_batch",
    "hvt_max",
    "bell_bi",
    "mk_mki",
    "svetlichny",
    "hybrid_inequalities",
    "hvt_bound_check",
    "evaluate_polynomial",
]

Term = tuple[Fraction, tuple[int, ...]]

MAX_TERM_COST = 5 * 10**7


@lru_cache(maxsize=None)
def mk_polynomial(n: int) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    """Expand M_n and M_n' into signed monomials.

    Each monomial is ``(coefficient, pattern)`` where ``pattern[i]`` is 0 for
    alpha_{i+1} and 1 for alpha'_{i+1}. Built from
    M_n = 1/2 M_{n-1} (alpha_n + alpha_n') + 1/2 M'_{n-1} (alpha_n - alpha_n').
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return ((Fraction(1), (0,)),), ((Fraction(1), (1,)),)
    prev, prev_p = mk_polynomial(n - 1)
    acc: dict[tuple[int, ...], Fraction] = {}
    half = Fraction(1, 2)
    for terms, signs in ((prev, (1, 1)), (prev_p, (1, -1))):
        for coef, pat in terms:
            for last, sign in zip((0, 1), signs):
                key = pat + (last,)
                acc[key] = acc.get(key, Fraction(0)) + sign * half * coef
    terms = tuple((c, p) for p, c in acc.items() if c != 0)
    primed = tuple((c, tuple(1 - b for b in p)) for c, p in terms)
    return terms, primed


@dataclass(frozen=True)
class MKSettings:
    """Per-step direction options ``(a_i, a_i')`` plus the input state."""

    pairs: tuple[tuple[Direction, Direction], ...]
    state: DiagonalState
    convention: Convention = "physical"

    def __post_init__(self) -> None:
        pairs = tuple((a, b) for a, b in self.pairs)
        if len(pairs) < 2:
            raise ValueError("MK settings need at least two measurement steps")
        object.__setattr__(self, "pairs", pairs)
        outcome_values(self.state.spin, self.convention)

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def scale(self) -> float:
        """Largest outcome magnitude: s, or 1 in the +-1 convention."""
        return 1.0 if self.convention == "pm_one" else self.state.spin.s

    def chain(self, pattern: tuple[int, ...]) -> MeasurementChain:
        return MeasurementChain(tuple(pair[b] for pair, b in zip(self.pairs, pattern)))

    def swapped(self) -> "MKSettings":
        return MKSettings(tuple((b, a) for a, b in self.pairs), self.state, self.convention)

    @classmethod
    def coplanar(
        cls, angles: list[tuple[float, float]] | tuple, state: DiagonalState, convention: Convention = "physical"
    ) -> "MKSettings":
        """Settings with every direction in the x-z plane, given by absolute angles from +z."""
        pairs = tuple((Direction.in_xz_plane(a), Direction.in_xz_plane(b)) for a, b in angles)
        return cls(pairs, state, convention)


@dataclass(frozen=True)
class MKValue:
    """Quantum expectation ``value`` of M_n, its hidden-variable maximum and eta = |value| / bound."""

    value: float
    hvt_bound: float
    eta: float = field(init=False)

    def __post_init__(self) -> None:
        if self.hvt_bound <= 0:
            raise ValueError("hvt_bound must be positive")
        object.__setattr__(self, "eta", abs(self.value) / self.hvt_bound)

    @property
    def violates(self) -> bool:
        return self.eta > 1.0


def _sum_terms(settings: MKSettings, terms: tuple[Term, ...], method: str) -> float:
    full = tuple(range(1, settings.n + 1))
    total = 0.0
    for coef, pat in terms:
        total += float(coef) * correlation(settings.state, settings.chain(pat), full, settings.convention, method)
    return total


def mk_expectation(
    settings: MKSettings, method: Literal["transfer", "enumerate"] = "transfer"
) -> tuple[float, float]:
    """(<M_n>, <M_n'>) with every monomial evaluated as a sequential correlation."""
    terms, primed = mk_polynomial(settings.n)
    if method == "enumerate" and len(terms) * settings.state.spin.dim ** settings.n > MAX_TERM_COST:
        raise EnumerationTooLarge(
            f"{len(terms)} terms x {settings.state.spin.dim}^{settings.n} outcomes exceeds {MAX_TERM_COST:.0e}"
        )
    return _sum_terms(settings, terms, method), _sum_terms(settings, primed, method)



def mk_expectation_batch(
    state: DiagonalState, theta, phi=None, convention: Convention = "physical"
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (<M_n>, <M_n'>) for many settings at once.

    ``theta``/``phi`` have shape ``(..., n, 2)``; the last axis selects
    (a_i, a_i'). ``phi=None`` means every direction lies in the x-z plane.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.zeros_like(theta) if phi is None else np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
    n = theta.shape[-2]
    steps = np.arange(n)
    terms, primed = mk_polynomial(n)
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def total(ts):
        out = np.zeros(theta.shape[:-2])
        for coef, pat in ts:
            if pat not in cache:
                sel = list(pat)
                cache[pat] = batch_correlation(state, theta[..., steps, sel], phi[..., steps, sel], None, convention)
            out = out + float(coef) * cache[pat]
        return out

    return total(terms), total(primed)


def evaluate_polynomial(terms: tuple[Term, ...], values: np.ndarray) -> np.ndarray:
    """Evaluate monomials on hidden-variable assignments.

    ``values`` has shape ``(N, n, 2)``: ``values[:, i, 0]`` is alpha_{i+1},
    ``values[:, i, 1]`` is alpha'_{i+1}.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape[0])
    steps = np.arange(values.shape[1])
    for coef, pat in terms:
        out += float(coef) * np.prod(values[:, steps, list(pat)], axis=1)
    return out


def _vertices(n: int) -> np.ndarray:
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=2 * n)))
    return corners.reshape(-1, n, 2)


@lru_cache(maxsize=None)
def _unit_hvt_max(n: int) -> float:
    terms, _ = mk_polynomial(n)
    return float(np.max(np.abs(evaluate_polynomial(terms, _vertices(n)))))


def hvt_max(n: int, scale: float = 1.0) -> float:
    """max |M_n| over deterministic assignments in [-scale, scale].

    M_n is multilinear, so the maximum sits on a vertex of the box; it is
    found by enumerating all 2^(2n) vertices.
    """
    return _unit_hvt_max(n) * scale**n


def _mk_value(settings: MKSettings, n: int, method: str) -> MKValue:
    if settings.n != n:
        raise ValueError(f"expected {n} measurement steps, got {settings.n}")
    value, _ = mk_expectation(settings, method)
    return MKValue(value, hvt_max(n, settings.scale))


def bell_bi(settings: MKSettings, method: Literal["transfer", "enumerate"] = "transfer") -> MKValue:
    """Two-measurement Bell combination 1/2 (<a1 a2> + <a1 a2'> + <a1' a2> - <a1' a2'>)."""
    return _mk_value(settings, 2, method)


def mk_mki(settings: MKSettings, method: Literal["transfer", "enumerate"] = "transfer") -> MKValue:
    """Three-measurement Mermin-Klyshko combination; classical bound s^3."""
    return _mk_value(settings, 3, method)


@dataclass(frozen=True)
class SvetlichnyValue:
    value: float
    bound: float
    mki: float
    mki_prime: float

    @property
    def violates(self) -> bool:
        return self.value > self.bound


def svetlichny(settings: MKSettings, method: Literal["transfer", "enumerate"] = "transfer") -> SvetlichnyValue:
    """|<MKI> + <MKI'>| against its classical bound 2 s^3."""
    if settings.n != 3:
        raise ValueError("the Svetlichny combination needs three measurement steps")
    m, mp = mk_expectation(settings, method)
    return SvetlichnyValue(abs(m + mp), 2 * hvt_max(3, settings.scale), m, mp)


PUBLISHED_HYBRID_BOUNDS = ((-5.0, 3.0), (-8.0, 4.0))
_TRIPLE_TERMS = ((1, (0, 0, 1)), (-1, (0, 1, 1)), (-1, (1, 0, 1)), (-1, (1, 1, 0)))


def _hybrid_polynomial(x, y, z, xp, yp, zp, weight):
    triple = x * y * zp - x * yp * zp - xp * y * zp - xp * yp * z
    return triple - weight * (x * yp + x * zp + y * z)


@lru_cache(maxsize=None)
def _hybrid_classical_bounds(scale: float) -> tuple[tuple[float, float], tuple[float, float]]:
    v = np.array(list(itertools.product((-scale, scale), repeat=6))).T
    out = []
    for w in (1, 2):
        vals = _hybrid_polynomial(*v, w)
        out.append((float(vals.min()), float(vals.max())))
    return out[0], out[1]


@dataclass(frozen=True)
class HybridReport:
    """Values of the two mixed two/three-measurement combinations and their bounds."""

    value1: float
    value2: float
    classical_bounds1: tuple[float, float]
    classical_bounds2: tuple[float, float]
    published_bounds1: tuple[float, float] = PUBLISHED_HYBRID_BOUNDS[0]
    published_bounds2: tuple[float, float] = PUBLISHED_HYBRID_BOUNDS[1]

    @staticmethod
    def _outside(v: float, b: tuple[float, float]) -> bool:
        return v < b[0] or v > b[1]

    @property
    def breaks_classical1(self) -> bool:
        return self._outside(self.value1, self.classical_bounds1)

    @property
    def breaks_classical2(self) -> bool:
        return self._outside(self.value2, self.classical_bounds2)

    @property
    def breaks_published1(self) -> bool:
        return self._outside(self.value1, self.published_bounds1)

    @property
    def breaks_published2(self) -> bool:
        return self._outside(self.value2, self.published_bounds2)


def hybrid_inequalities(
    settings: MKSettings,
    marginals: Literal["skip", "embedded"] = "skip",
    method: Literal["transfer", "enumerate"] = "transfer",
) -> HybridReport:
    """Evaluate the two hybrid combinations

    T - (<a1 a2'> + <a1 a3'> + <a2 a3>)  and  T - 2 (<a1 a2'> + <a1 a3'> + <a2 a3>),

    with T = <a1 a2 a3'> - <a1 a2' a3'> - <a1' a2 a3'> - <a1' a2' a3>.

    With ``marginals="skip"`` each pair correlation comes from a two-measurement
    run in which the unlisted step is not performed. With ``"embedded"`` it is
    the marginal of a three-measurement run whose unlisted step uses the
    unprimed direction.

    The classical bounds are the exact extremes of the same polynomial over
    deterministic values in [-scale, scale]; the published intervals are
    reported alongside and apply to +-1 values.
    """
    if settings.n != 3:
        raise ValueError("hybrid inequalities need three measurement steps")
    st, conv = settings.state, settings.convention
    (a1, a1p), (a2, a2p), (a3, a3p) = settings.pairs

    triple = 0.0
    for sign, pat in _TRIPLE_TERMS:
        triple += sign * correlation(st, settings.chain(pat), (1, 2, 3), conv, method)

    def pair(dirs, idx):
        return correlation(st, MeasurementChain(dirs), idx, conv, method)

    if marginals == "skip":
        pairs = pair((a1, a2p), (1, 2)) + pair((a1, a3p), (1, 2)) + pair((a2, a3), (1, 2))
    elif marginals == "embedded":
        pairs = pair((a1, a2p, a3), (1, 2)) + pair((a1, a2, a3p), (1, 3)) + pair((a1, a2, a3), (2, 3))
    else:
        raise ValueError(f"unknown marginals mode {marginals!r}")
    b1, b2 = _hybrid_classical_bounds(settings.scale)
    return HybridReport(triple - pairs, triple - 2 * pairs, b1, b2)


@dataclass(frozen=True)
class HVTBoundReport:
    n: int
    scale: float
    bound: float
    vertex_max: float
    sampled_max: float
    trials: int

    @property
    def exceeded(self) -> bool:
        tol = 1e-12 * max(1.0, self.bound)
        return self.sampled_max > self.bound + tol or self.vertex_max > self.bound + tol

    @property
    def attained(self) -> bool:
        return abs(self.vertex_max - self.bound) <= 1e-12 * max(1.0, self.bound)


def hvt_bound_check(n: int, scale: float, trials: int = 10**6, seed: int = 0, chunk: int = 100_000) -> HVTBoundReport:
    """Sample deterministic assignments uniformly in [-scale, scale]^(2n) and
    compare max |M_n| with the classical bound scale^n; the vertex maximum is
    enumerated exactly."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    terms, _ = mk_polynomial(n)
    rng = np.random.default_rng(seed)
    best = 0.0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        x = rng.uniform(-scale, scale, size=(k, n, 2))
        best = max(best, float(np.max(np.abs(evaluate_polynomial(terms, x)))))
        done += k
    vertex = float(np.max(np.abs(evaluate_polynomial(terms, scale * _vertices(n)))))
    return HVTBoundReport(n, scale, scale**n, vertex, best, trials)
