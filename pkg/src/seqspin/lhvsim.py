"""Monte Carlo run of the two-cbit classical protocol that reproduces the
correlations of successive spin-1/2 measurements.

Party i outputs alpha_i in {-1, +1}. The parties share unit vectors
lambda_0 ... lambda_{2n} drawn uniformly on the sphere.

    alpha_1 = sgn(a_1 . (lambda_0 + a_0))
    c_{2i-3} = alpha_{i-1} sgn(a_{i-1} . lambda_{2i-3})
    c_{2i-2} = alpha_{i-1} sgn(a_{i-1} . lambda_{2i-2})
    alpha_i = sgn(a_i . (c_{2i-3} lambda_{2i-3} + c_{2i-2} lambda_{2i-2}))

with sgn(0) = +1. Only lambda_0 ... lambda_{2n-2} enter the outputs; the
two trailing vectors are drawn so that the stream layout does not depend
on how many of them a given run uses.

Random numbers come from fixed blocks of ``BLOCK`` samples. Block j uses
PCG64 seeded with ``SeedSequence(seed, spawn_key=(j,))`` and draws, in this
order, the z-coordinates of all (sample, vector) pairs in C order, then
their azimuths, then one uniform per sample for the mixed-state flip. A run
is therefore bit-identical for any number of worker threads.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2_contingency

from .sequential import DiagonalState, MeasurementChain, correlation
from .spinmath import Direction, SpinSystem

__all__ = [
    "BLOCK",
    "sample_unit_sphere",
    "sample_unit_vectors",
    "ProtocolConfig",
    "ProtocolTranscript",
    "run_protocol",
    "estimate_correlations",
    "quantum_correlation",
    "SubsetCheck",
    "VerificationReport",
    "verify_against_quantum",
    "no_signaling_test",
]

BLOCK = 65536


def sample_unit_vectors(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform unit vectors, shape ``size + (3,)``: z ~ U[-1, 1], phi ~ U[0, 2 pi)."""
    size = (size,) if isinstance(size, int) else tuple(size)
    z = rng.uniform(-1.0, 1.0, size)
    phi = rng.uniform(0.0, 2 * math.pi, size)
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def sample_unit_sphere(rng: np.random.Generator) -> Direction:
    """One uniformly distributed direction."""
    return Direction.from_vector(sample_unit_vectors(rng, 1)[0])


def _sgn(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    a0: Direction
    directions: tuple[Direction, ...]
    samples: int
    seed: int = 0
    p_plus: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "directions", tuple(self.directions))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.directions) != self.n:
            raise ValueError(f"expected {self.n} directions, got {len(self.directions)}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0.0 <= self.p_plus <= 1.0:
            raise ValueError("p_plus must lie in [0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def vectors_per_sample(self) -> int:
        return 2 * self.n + 1

    @property
    def mixed(self) -> bool:
        """True when the input is not the pure |a0, +> state (simulated by flipping a0)."""
        return self.p_plus < 1.0


@dataclass(frozen=True)
class ProtocolTranscript:
    """Per-sample record. ``cbits`` and ``lambdas`` are kept only on request."""

    alphas: np.ndarray
    cbits: np.ndarray | None = None
    lambdas: np.ndarray | None = None

    @property
    def samples(self) -> int:
        return self.alphas.shape[0]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(block,))))


def _run_block(cfg: ProtocolConfig, block: int, count: int, keep_cbits: bool, keep_lambdas: bool):
    rng = _block_rng(cfg.seed, block)
    lam = sample_unit_vectors(rng, (count, cfg.vectors_per_sample))
    flip = rng.random(count)
    a0 = np.broadcast_to(cfg.a0.vector, (count, 3))
    if cfg.mixed:
        a0 = np.where((flip >= cfg.p_plus)[:, None], -a0, a0)
    dirs = np.array([d.vector for d in cfg.directions])
    alphas = np.empty((count, cfg.n), dtype=np.int8)
    cbits = np.empty((count, 2 * cfg.n - 2), dtype=np.int8) if keep_cbits else None
    alphas[:, 0] = _sgn((lam[:, 0] + a0) @ dirs[0])
    for i in range(2, cfg.n + 1):
        prev = alphas[:, i - 2]
        l1, l2 = lam[:, 2 * i - 3], lam[:, 2 * i - 2]
        c1 = prev * _sgn(l1 @ dirs[i - 2])
        c2 = prev * _sgn(l2 @ dirs[i - 2])
        alphas[:, i - 1] = _sgn((c1[:, None] * l1 + c2[:, None] * l2) @ dirs[i - 1])
        if keep_cbits:
            cbits[:, 2 * i - 4] = c1
            cbits[:, 2 * i - 3] = c2
    return alphas, cbits, (lam if keep_lambdas else None)


def run_protocol(
    cfg: ProtocolConfig, jobs: int = 1, keep_cbits: bool = False, keep_lambdas: bool = False
) -> ProtocolTranscript:
    """Simulate ``cfg.samples`` rounds of the protocol.

    Work is split into fixed blocks (see module docstring) and mapped over
    ``jobs`` threads; results are concatenated in block order.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    nblocks = -(-cfg.samples // BLOCK)
    counts = [min(BLOCK, cfg.samples - j * BLOCK) for j in range(nblocks)]
    task = lambda j: _run_block(cfg, j, counts[j], keep_cbits, keep_lambdas)  # noqa: E731
    if jobs == 1:
        parts = [task(j) for j in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(task, range(nblocks)))
    alphas = np.concatenate([p[0] for p in parts])
    cbits = np.concatenate([p[1] for p in parts]) if keep_cbits else None
    lambdas = np.concatenate([p[2] for p in parts]) if keep_lambdas else None
    return ProtocolTranscript(alphas, cbits, lambdas)


def estimate_correlations(outputs, subset) -> tuple[float, float]:
    """Sample mean of prod_{i in subset} alpha_i (1-based) and its standard error."""
    alphas = outputs.alphas if isinstance(outputs, ProtocolTranscript) else np.asarray(outputs)
    idx = [int(i) - 1 for i in subset]
    if not idx or min(idx) < 0 or max(idx) >= alphas.shape[1]:
        raise ValueError(f"subset {tuple(subset)} out of range 1..{alphas.shape[1]}")
    prod = np.prod(alphas[:, idx].astype(np.int64), axis=1)
    n = prod.size
    mean = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def quantum_correlation(cfg: ProtocolConfig, subset) -> float:
    """Spin-1/2 sequential-measurement value of <prod alpha_i> (+-1 outcomes)."""
    state = DiagonalState(SpinSystem(1), (cfg.p_plus, 1.0 - cfg.p_plus), cfg.a0)
    return correlation(state, MeasurementChain(cfg.directions), tuple(subset), "pm_one", "enumerate")


@dataclass(frozen=True)
class SubsetCheck:
    subset: tuple[int, ...]
    estimate: float
    stderr: float
    target: float

    @property
    def z(self) -> float:
        diff = abs(self.estimate - self.target)
        if self.stderr == 0.0:
            return 0.0 if diff < 1e-12 else math.inf
        return diff / self.stderr


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[SubsetCheck, ...]
    threshold: float
    samples: int

    @property
    def max_z(self) -> float:
        return max(r.z for r in self.rows)

    @property
    def ok(self) -> bool:
        return self.max_z <= self.threshold


def all_subsets(n: int) -> list[tuple[int, ...]]:
    return [c for k in range(1, n + 1) for c in itertools.combinations(range(1, n + 1), k)]


def verify_against_quantum(
    cfg: ProtocolConfig, jobs: int = 1, threshold: float = 5.0, transcript: ProtocolTranscript | None = None
) -> VerificationReport:
    """Compare every subset correlation of a protocol run with the quantum value."""
    if cfg.n > 5:
        raise ValueError("verification is limited to n <= 5")
    tr = transcript if transcript is not None else run_protocol(cfg, jobs)
    rows = []
    for sub in all_subsets(cfg.n):
        est, se = estimate_correlations(tr, sub)
        rows.append(SubsetCheck(sub, est, se, quantum_correlation(cfg, sub)))
    return VerificationReport(tuple(rows), threshold, tr.samples)


def no_signaling_test(cfg: ProtocolConfig, step: int = 2, jobs: int = 1) -> float:
    """p-value of a chi-squared test that the cbits sent to party ``step`` are
    independent of the output of party ``step - 1``."""
    if not 2 <= step <= cfg.n:
        raise ValueError("step must lie in 2..n")
    tr = run_protocol(cfg, jobs, keep_cbits=True)
    prev = tr.alphas[:, step - 2]
    code = (tr.cbits[:, 2 * step - 4] > 0).astype(int) * 2 + (tr.cbits[:, 2 * step - 3] > 0)
    table = np.array([[np.sum((prev == a) & (code == k)) for k in range(4)] for a in (1, -1)])
    table = table[table.sum(axis=1) > 0]
    if table.shape[0] < 2:
        return 1.0
    return float(chi2_contingency(table)[1])
