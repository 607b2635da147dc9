"""Maximisation of the violation ratio eta over measurement directions.

Two independent routes are kept side by side:

* closed forms: after the symmetric angle reduction eta is a function of one
  angle, eta(t) = (sin t + cos t)(A cos^2 t + B) / norm, whose stationary
  points solve the cubic B u^3 + (2A - B) u^2 + (3A + B) u - (A + B) = 0 in
  u = tan t;
* numerics: a 2 degree grid over the reduced angle, then golden-section
  coordinate ascent and a BFGS polish over every coplanar angle, with
  optional random restarts on the full sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .inequalities import PUBLISHED_HYBRID_BOUNDS, MKSettings, hvt_max, mk_expectation_batch
from .sequential import (
    Convention,
    DiagonalState,
    NoisyStateSpec,
    batch_correlation,
    bi_coefficients,
    published_three_point_coefficients,
    three_point_coefficients,
)
from .spinmath import Direction, SpinSystem

__all__ = [
    "CubicCoefficients",
    "OptimizationResult",
    "Maximization",
    "solve_eta_cubic",
    "reduced_eta",
    "maximize_reduced",
    "maximize_bi",
    "maximize_mki",
    "maximize_mk_numeric",
    "maximize_svetlichny",
    "eta_bi_xi",
    "eta_bi_noise",
    "xi_violation_range",
    "noise_threshold",
    "EtaInvariance",
    "eta_n_invariance",
    "HybridSearch",
    "search_hybrid",
    "golden_coordinate_ascent",
]

GRID_POINTS = 10_000
COARSE_STEP = math.radians(2.0)


@dataclass(frozen=True)
class CubicCoefficients:
    """c3 u^3 + c2 u^2 + c1 u + c0 = 0 with u = tan(theta)."""

    c3: float
    c2: float
    c1: float
    c0: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(c) for c in (self.c3, self.c2, self.c1, self.c0)):
            raise ValueError("cubic coefficients must be finite")

    @classmethod
    def from_ab(cls, a: float, b: float) -> "CubicCoefficients":
        """Stationarity condition of (sin t + cos t)(a cos^2 t + b)."""
        return cls(b, 2 * a - b, 3 * a + b, -(a + b))

    def __call__(self, u):
        return ((self.c3 * u + self.c2) * u + self.c1) * u + self.c0

    def trig(self, theta):
        """The cubic multiplied by cos^3(theta); continuous on [-pi/2, pi/2]."""
        s, c = np.sin(theta), np.cos(theta)
        return self.c3 * s**3 + self.c2 * s**2 * c + self.c1 * s * c**2 + self.c0 * c**3

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.c3), abs(self.c2), abs(self.c1), abs(self.c0))


def solve_eta_cubic(coeffs: CubicCoefficients, grid: int = GRID_POINTS, tol: float = 1e-12) -> list[float]:
    """All real roots theta in (-pi/2, pi/2) of the cubic in tan(theta).

    Sign changes of the cos^3-scaled cubic are bracketed on a uniform grid
    and refined with Brent's method; roots of even multiplicity (no sign
    change) are picked up from the companion-matrix roots. Every root is
    kept only if its scaled residual is below 1e-10.
    """
    if coeffs.scale == 1.0 and not any((coeffs.c3, coeffs.c2, coeffs.c1, coeffs.c0)):
        return []
    th = np.linspace(-math.pi / 2, math.pi / 2, grid + 1)[1:-1]
    g = coeffs.trig(th)
    found = list(th[g == 0.0])
    for i in np.nonzero(g[:-1] * g[1:] < 0)[0]:
        found.append(brentq(coeffs.trig, th[i], th[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps))
    poly = np.trim_zeros([coeffs.c3, coeffs.c2, coeffs.c1, coeffs.c0], "f")
    if len(poly) > 1:
        for r in np.roots(poly):
            if abs(r.imag) < 1e-7:
                found.append(math.atan(r.real))
    tol_res = 1e-10 * coeffs.scale
    roots: list[float] = []
    for t in sorted(found):
        if abs(coeffs.trig(t)) > tol_res:
            continue
        if roots and abs(t - roots[-1]) < 1e-9:
            continue
        roots.append(float(t))
    return roots


def reduced_eta(a: float, b: float, norm: float, theta) -> np.ndarray | float:
    """(sin t + cos t)(a cos^2 t + b) / norm."""
    c = np.cos(theta)
    return (np.sin(theta) + c) * (a * c**2 + b) / norm


def _reduced_slope(a: float, b: float, norm: float, theta: float) -> float:
    s, c = math.sin(theta), math.cos(theta)
    return ((c - s) * (a * c * c + b) - 2 * a * (s + c) * c * s) / norm


def maximize_reduced(a: float, b: float, norm: float) -> tuple[float, float, float]:
    """(max |eta|, argmax theta, |d eta / d theta| there) over the reduced angle.

    Candidates are every root of the stationarity cubic plus the boundary
    points 0 and pi/2; exact ties go to the smallest theta.
    """
    cands = solve_eta_cubic(CubicCoefficients.from_ab(a, b)) + [0.0, math.pi / 2]
    best_t, best = None, -1.0
    for t in sorted(cands):
        val = abs(float(reduced_eta(a, b, norm, t)))
        if val > best + 1e-12:
            best_t, best = t, val
    return best, best_t, abs(_reduced_slope(a, b, norm, best_t))


@dataclass(frozen=True)
class OptimizationResult:
    """A maximum of eta with the angles that attain it.

    ``argmax`` lists absolute coplanar polar angles (a_1, a_1', a_2, a_2', ...)
    measured from a_0 in the x-z plane, or (theta, phi) pairs for sphere searches.
    """

    eta_max: float
    argmax: tuple[float, ...]
    method: Literal["closed_form", "numeric", "published"]
    residual: float
    settings: MKSettings | None = None


@dataclass(frozen=True)
class Maximization:
    closed_form: OptimizationResult
    coplanar: OptimizationResult | None = None
    sphere: OptimizationResult | None = None

    @property
    def best(self) -> OptimizationResult:
        runs = [r for r in (self.closed_form, self.coplanar, self.sphere) if r is not None]
        return max(runs, key=lambda r: r.eta_max)


def golden_coordinate_ascent(
    f: Callable[[np.ndarray], float],
    x0,
    width: float = math.pi / 4,
    tol: float = 1e-6,
    max_sweeps: int = 8,
    polish: bool = True,
) -> tuple[np.ndarray, float]:
    """Maximise ``f`` one coordinate at a time with bounded golden-section/Brent
    line searches, then polish jointly with BFGS (gradient tolerance 1e-10)."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    for _ in range(max_sweeps):
        start = fx
        for i in range(x.size):
            y = x.copy()

            def line(t, i=i, y=y):
                y[i] = t
                return -f(y)

            res = minimize_scalar(line, bounds=(x[i] - width, x[i] + width), method="bounded", options={"xatol": tol})
            if -res.fun > fx:
                x[i], fx = res.x, -res.fun
        if fx - start < 1e-9:
            break
    if polish:
        res = minimize(lambda z: -f(z), x, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
        if -res.fun >= fx:
            x, fx = res.x, -res.fun
    return x, fx


def _gradient_norm(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> float:
    g = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g.append((f(x + e) - f(x - e)) / (2 * h))
    return float(np.max(np.abs(g))) if g else 0.0


def _require_z_axis(state: DiagonalState) -> None:
    if state.axis.theta != 0.0:
        raise ValueError("the optimizers assume the state is quantised along +z")


def _coplanar_objective(state: DiagonalState, n: int, convention: Convention, which: str = "mk"):
    bound = hvt_max(n, 1.0 if convention == "pm_one" else state.spin.s)

    def f(x):
        m, mp = mk_expectation_batch(state, np.reshape(x, (n, 2)), None, convention)
        if which == "svetlichny":
            return abs(float(m + mp)) / bound
        return abs(float(m)) / bound

    return f


def _sphere_objective(state: DiagonalState, n: int, convention: Convention, which: str = "mk"):
    bound = hvt_max(n, 1.0 if convention == "pm_one" else state.spin.s)

    def f(x):
        x = np.reshape(x, (n, 2, 2))
        m, mp = mk_expectation_batch(state, x[..., 0], x[..., 1], convention)
        if which == "svetlichny":
            return abs(float(m + mp)) / bound
        return abs(float(m)) / bound

    return f


def _settings_from_coplanar(x, state, convention) -> MKSettings:
    x = np.reshape(x, (-1, 2))
    return MKSettings.coplanar([tuple(r) for r in x], state, convention)


def _settings_from_sphere(x, state, convention) -> MKSettings:
    x = np.reshape(x, (-1, 2, 2))
    pairs = tuple(tuple(Direction.from_angles(t, p) for t, p in pair) for pair in x)
    return MKSettings(pairs, state, convention)


def maximize_mk_numeric(
    state: DiagonalState,
    n: int,
    convention: Convention = "physical",
    starts: list | None = None,
    restarts: int = 8,
    seed: int = 0,
    geometry: Literal["coplanar", "sphere"] = "coplanar",
    which: Literal["mk", "svetlichny"] = "mk",
) -> OptimizationResult:
    """Numeric maximum of |<M_n>| / classical bound (or of the Svetlichny
    combination when ``which="svetlichny"``).

    ``starts`` are coplanar angle vectors of length 2n; ``restarts`` random
    starts are added from a seeded generator. The best local maximum wins,
    ties resolved by start order.
    """
    _require_z_axis(state)
    rng = np.random.default_rng(seed)
    starts = [np.asarray(s, dtype=float) for s in (starts or [])]
    if geometry == "coplanar":
        f = _coplanar_objective(state, n, convention, which)
        starts += [rng.uniform(-math.pi, math.pi, 2 * n) for _ in range(restarts)]
    else:
        f = _sphere_objective(state, n, convention, which)
        lifted = []
        for s in starts:
            if s.size == 2 * n:
                s = np.stack([s, np.zeros_like(s)], axis=-1).ravel()
            lifted.append(s)
        starts = lifted + [
            np.stack([np.arccos(rng.uniform(-1, 1, 2 * n)), rng.uniform(0, 2 * math.pi, 2 * n)], axis=-1).ravel()
            for _ in range(restarts)
        ]
    if not starts:
        raise ValueError("need at least one start")
    best_x, best_f = None, -1.0
    for s in starts:
        x, fx = golden_coordinate_ascent(f, s)
        if fx > best_f + 1e-13:
            best_x, best_f = x, fx
    settings = (
        _settings_from_coplanar(best_x, state, convention)
        if geometry == "coplanar"
        else _settings_from_sphere(best_x, state, convention)
    )
    return OptimizationResult(best_f, tuple(float(v) for v in best_x), "numeric", _gradient_norm(f, best_x), settings)


def _coarse_reduced_start(a: float, b: float, norm: float) -> float:
    grid = np.arange(-math.pi / 2, math.pi / 2 + 1e-12, COARSE_STEP)
    return float(grid[np.argmax(np.abs(reduced_eta(a, b, norm, grid)))])


def bi_angles(theta1: float) -> tuple[float, float, float, float]:
    """Reduced two-measurement settings: a_1' = pi - a_1, a_2 = x, a_2' = z."""
    return theta1, math.pi - theta1, math.pi / 2, 0.0


def mki_angles(theta2: float) -> tuple[float, ...]:
    """Reduced three-measurement settings: a_1 = a_1' = a_0, a_2' = pi - a_2, a_3 = x, a_3' = z."""
    return 0.0, 0.0, theta2, math.pi - theta2, math.pi / 2, 0.0


def maximize_bi(
    state: DiagonalState,
    numeric: bool = True,
    restarts: int = 4,
    sphere_restarts: int = 0,
    seed: int = 0,
) -> Maximization:
    """Largest two-measurement eta for ``state``.

    The closed form uses the reduction a_1 + a_1' = pi, a_2 = x, a_2' = z.
    The numeric search frees all four coplanar angles; ``sphere_restarts``
    adds an unconstrained search over full-sphere directions.
    """
    _require_z_axis(state)
    s = state.spin.s
    if s == 0:
        raise ValueError("spin 0 has no nontrivial correlations")
    a, b = bi_coefficients(state)
    eta, t1, res = maximize_reduced(a, b, 2 * s * s)
    angles = bi_angles(t1)
    closed = OptimizationResult(eta, angles, "closed_form", res, _settings_from_coplanar(angles, state, "physical"))
    coplanar = sphere = None
    if numeric:
        starts = [bi_angles(_coarse_reduced_start(a, b, 2 * s * s)), angles]
        coplanar = maximize_mk_numeric(state, 2, starts=starts, restarts=restarts, seed=seed)
    if sphere_restarts:
        sphere = maximize_mk_numeric(
            state, 2, starts=[angles], restarts=sphere_restarts, seed=seed, geometry="sphere"
        )
    return Maximization(closed, coplanar, sphere)


def mki_coefficients(
    state: DiagonalState, coefficients: Literal["corrected", "published"] = "corrected"
) -> tuple[float, float]:
    """(M, N) of the reduced three-measurement eta at a_1 = a_0."""
    if coefficients == "corrected":
        return three_point_coefficients(state).at(0.0)
    if coefficients == "published":
        return published_three_point_coefficients(state)
    raise ValueError(f"unknown coefficient set {coefficients!r}")


def maximize_mki(
    state: DiagonalState,
    coefficients: Literal["corrected", "published"] = "corrected",
    numeric: bool = True,
    restarts: int = 4,
    sphere_restarts: int = 0,
    seed: int = 0,
) -> Maximization:
    """Largest three-measurement eta for ``state``.

    Closed form: a_1 = a_1' = a_0, a_2' = pi - a_2, a_3 along x and a_3'
    along z, giving eta = (sin t + cos t)(M cos^2 t + N) / (16 s^3). With
    ``coefficients="published"`` the published (M, N) are used instead of the
    corrected ones; the resulting figure is then not a property of the
    quantum correlations for s >= 3/2, so it is labelled ``published``.
    """
    _require_z_axis(state)
    s = state.spin.s
    if s == 0:
        raise ValueError("spin 0 has no nontrivial correlations")
    m, n = mki_coefficients(state, coefficients)
    eta, t2, res = maximize_reduced(m, n, 16 * s**3)
    angles = mki_angles(t2)
    method = "closed_form" if coefficients == "corrected" else "published"
    closed = OptimizationResult(eta, angles, method, res, _settings_from_coplanar(angles, state, "physical"))
    coplanar = sphere = None
    if numeric:
        cm, cn = mki_coefficients(state, "corrected")
        starts = [mki_angles(_coarse_reduced_start(cm, cn, 16 * s**3)), angles]
        coplanar = maximize_mk_numeric(state, 3, starts=starts, restarts=restarts, seed=seed)
    if sphere_restarts:
        sphere = maximize_mk_numeric(
            state, 3, starts=[angles], restarts=sphere_restarts, seed=seed, geometry="sphere"
        )
    return Maximization(closed, coplanar, sphere)


def maximize_svetlichny(
    state: DiagonalState, convention: Convention = "physical", restarts: int = 16, seed: int = 0
) -> OptimizationResult:
    """Numeric maximum of |<MKI> + <MKI'>| / s^3 over coplanar settings.

    The classical bound of the combination is 2 s^3, so values above 2
    would signal a violation.
    """
    _require_z_axis(state)
    m, n = mki_coefficients(state)
    s = state.spin.s
    start = mki_angles(maximize_reduced(m, n, 16 * s**3)[1])
    return maximize_mk_numeric(state, 3, convention, [start], restarts, seed, which="svetlichny")


def _state_with_xi(spin: SpinSystem, xi: float) -> tuple[float, float]:
    s = spin.s
    chi = xi * s * s
    ss = s * (s + 1)
    return 3 * chi - ss, ss - chi


def eta_bi_xi(spin: SpinSystem, xi: float) -> float:
    """Closed-form two-measurement eta_max as a function of xi = chi / s^2.

    eta depends on the populations only through chi, so xi is treated as a
    free parameter in [0, 1]; for half-integer s values below 1/(4 s^2) are
    not reachable by a physical state.
    """
    a, b = _state_with_xi(spin, xi)
    s = spin.s
    return maximize_reduced(a, b, 2 * s * s)[0]


def eta_bi_noise(spin: SpinSystem, f: float) -> float:
    """Closed-form eta_max for the noisy extremal state with noise fraction f."""
    base = DiagonalState.extremal(spin, 1.0)
    spec = NoisyStateSpec(base, f)
    s = spin.s
    return maximize_reduced(spec.a_prime, spec.b_prime, 2 * s * s)[0]


def _crossings(fun: Callable[[float], float], points: int, tol: float) -> tuple[np.ndarray, np.ndarray, list[float]]:
    xs = np.linspace(0.0, 1.0, points)
    ys = np.array([fun(x) for x in xs])
    roots = []
    for i in np.nonzero(ys[:-1] * ys[1:] < 0)[0]:
        roots.append(brentq(fun, xs[i], xs[i + 1], xtol=tol))
    return xs, ys, roots


def xi_violation_range(spin: SpinSystem, points: int = 401, tol: float = 1e-10) -> list[tuple[float, float]]:
    """Maximal xi-intervals inside [0, 1] on which eta_max(xi) > 1."""
    fun = lambda xi: eta_bi_xi(spin, xi) - 1.0  # noqa: E731
    xs, ys, roots = _crossings(fun, points, tol)
    edges = [0.0] + roots + [1.0]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if fun(0.5 * (lo + hi)) > 0:
            if out and abs(out[-1][1] - lo) < 1e-15:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((lo, hi))
    return out


def noise_threshold(spin: SpinSystem, points: int = 201, tol: float = 1e-10) -> float | None:
    """f_max with eta > 1 exactly for f < f_max; ``None`` if every f in [0, 1] violates."""
    fun = lambda f: eta_bi_noise(spin, f) - 1.0  # noqa: E731
    xs, ys, roots = _crossings(fun, points, tol)
    if np.all(ys > 0):
        return None
    if not roots:
        return 0.0
    return roots[0]


@dataclass(frozen=True)
class EtaInvariance:
    """eta_n under the aligned ansatz next to eta_3 from the same numeric search.

    ``eta3_reduced`` is the closed-form value under the symmetric reduction,
    which for s >= 1 lies below the numeric three-measurement optimum.
    """

    spin: SpinSystem
    n: int
    eta3: float
    eta_n: float
    eta3_reduced: float
    eta_n_free: float | None
    argmax: tuple[float, ...]

    @property
    def deviation(self) -> float:
        return abs(self.eta_n - self.eta3)


def eta_n_invariance(
    spin: SpinSystem, n: int, free_restarts: int = 0, seed: int = 0, restarts: int = 2
) -> EtaInvariance:
    """Compare eta_n under the aligned ansatz with eta_3 for the top state.

    a_1 ... a_{n-3} (primed and unprimed) are fixed along a_0 and the last
    three pairs are optimised numerically with the full n-step MK
    polynomial; eta_3 comes from the same search on three steps.
    ``free_restarts > 0`` also runs an unconstrained coplanar search over all
    2n angles; its result is reported, not asserted.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    state = DiagonalState.pure(spin)
    reduced = maximize_mki(state, numeric=False).closed_form
    eta3 = maximize_mk_numeric(state, 3, starts=[reduced.argmax], restarts=restarts, seed=seed)
    k = n - 3
    bound = hvt_max(n, spin.s)
    fixed = np.zeros(2 * k)

    def f(x):
        m, _ = mk_expectation_batch(state, np.reshape(np.concatenate([fixed, x]), (n, 2)))
        return abs(float(m)) / bound

    rng = np.random.default_rng(seed)
    starts = [np.array(reduced.argmax)] + [rng.uniform(-math.pi, math.pi, 6) for _ in range(restarts)]
    best_x, best = None, -1.0
    for s0 in starts:
        x, fx = golden_coordinate_ascent(f, s0)
        if fx > best + 1e-13:
            best_x, best = x, fx
    full = np.concatenate([fixed, best_x])
    free = None
    if free_restarts:
        free = maximize_mk_numeric(state, n, starts=[full], restarts=free_restarts, seed=seed).eta_max
    return EtaInvariance(spin, n, eta3.eta_max, best, reduced.eta_max, free, tuple(float(v) for v in full))


@dataclass(frozen=True)
class HybridSearch:
    weight: int
    value: float
    angles: tuple[float, ...]
    published_bounds: tuple[float, float]
    marginals: str

    @property
    def breaks_published(self) -> bool:
        lo, hi = self.published_bounds
        return self.value > hi or self.value < lo


def _hybrid_batch(state: DiagonalState, ang: np.ndarray, weight: int, marginals: str, convention: Convention):
    a1, a1p, a2, a2p, a3, a3p = (ang[..., i] for i in range(6))

    def c(*dirs, subset=None):
        return batch_correlation(state, np.stack(dirs, axis=-1), None, subset, convention)

    triple = c(a1, a2, a3p) - c(a1, a2p, a3p) - c(a1p, a2, a3p) - c(a1p, a2p, a3)
    if marginals == "skip":
        pairs = c(a1, a2p) + c(a1, a3p) + c(a2, a3)
    else:
        pairs = c(a1, a2p, a3, subset=(1, 2)) + c(a1, a2, a3p, subset=(1, 3)) + c(a1, a2, a3, subset=(2, 3))
    return triple - weight * pairs


def search_hybrid(
    state: DiagonalState,
    weight: int = 1,
    sense: Literal["max", "min"] = "max",
    marginals: Literal["skip", "embedded"] = "skip",
    convention: Convention = "pm_one",
    grid_step_deg: float = 45.0,
    refine_top: int = 8,
    restarts: int = 16,
    seed: int = 0,
) -> HybridSearch:
    """Grid search plus refinement for the extreme value of a hybrid combination.

    The six coplanar angles (a_1, a_1', a_2, a_2', a_3, a_3') run over a
    regular grid; the best ``refine_top`` grid points and ``restarts`` seeded
    random points are refined with coordinate ascent.
    """
    _require_z_axis(state)
    if weight not in (1, 2):
        raise ValueError("weight must be 1 or 2")
    if marginals not in ("skip", "embedded"):
        raise ValueError(f"unknown marginals mode {marginals!r}")
    sign = 1.0 if sense == "max" else -1.0
    grid = np.radians(np.arange(0.0, 360.0, grid_step_deg))
    mesh = np.stack(np.meshgrid(*([grid] * 6), indexing="ij"), axis=-1).reshape(-1, 6)
    vals = np.concatenate(
        [_hybrid_batch(state, mesh[i : i + 65536], weight, marginals, convention) for i in range(0, len(mesh), 65536)]
    )
    order = np.argsort(-sign * vals, kind="stable")[:refine_top]
    f = lambda x: sign * float(_hybrid_batch(state, np.asarray(x), weight, marginals, convention))  # noqa: E731
    rng = np.random.default_rng(seed)
    starts = [mesh[i] for i in order] + [rng.uniform(0, 2 * math.pi, 6) for _ in range(restarts)]
    best_x, best = None, -math.inf
    for s0 in starts:
        x, fx = golden_coordinate_ascent(f, s0)
        if fx > best + 1e-13:
            best_x, best = x, fx
    return HybridSearch(weight, sign * best, tuple(float(v) for v in best_x), PUBLISHED_HYBRID_BOUNDS[weight - 1], marginals)
