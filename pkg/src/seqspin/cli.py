"""``seqspin`` command line: table | correlate | optimize | lhv | hvt-bound.

Exit codes: 0 success, 2 invalid configuration, 3 an internal cross-check
(closed form vs enumeration, protocol vs quantum, sampled vs classical
bound) failed its tolerance. The report is still written in the last case.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources

from . import __version__
from .inequalities import hvt_bound_check
from .lhvsim import ProtocolConfig, all_subsets, estimate_correlations, quantum_correlation, run_protocol
from .optimizer import (
    eta_n_invariance,
    maximize_bi,
    maximize_mk_numeric,
    maximize_mki,
    noise_threshold,
    xi_violation_range,
)
from .report import Report
from .sequential import (
    DiagonalState,
    MeasurementChain,
    NoisyStateSpec,
    closed_one,
    closed_three,
    closed_two,
    correlation,
    published_closed_three,
)
from .spinmath import Direction, SpinSystem, parse_spin

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 2, 3
ORACLE_TOL = 1e-9
LHV_SE = 5.0
TABLE_SPINS = "1/2,1,3/2,2,5/2,3,7/2,4,9/2,5,11/2,6"


class ConfigError(ValueError):
    pass


def _number(text: str, where: str) -> float:
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: cannot parse number {text!r}") from None


def _angle(text: str, radians: bool, where: str) -> float:
    x = _number(text, where)
    if not math.isfinite(x):
        raise ConfigError(f"{where}: angle must be finite")
    return x if radians else math.radians(x)


def parse_direction(text: str, radians: bool = False, where: str = "direction") -> Direction:
    """``theta`` (x-z plane), ``theta,phi`` or a Cartesian triple ``x,y,z``."""
    parts = [p for p in text.split(",")]
    if any(not p.strip() for p in parts):
        raise ConfigError(f"{where}: empty field in {text!r}")
    try:
        if len(parts) == 1:
            return Direction.in_xz_plane(_angle(parts[0], radians, where))
        if len(parts) == 2:
            return Direction.from_angles(_angle(parts[0], radians, where), _angle(parts[1], radians, where))
        if len(parts) == 3:
            return Direction.from_vector([_number(p, f"{where} component {i + 1}") for i, p in enumerate(parts)])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: expected 1, 2 or 3 comma-separated numbers, got {len(parts)}")


def parse_dirs(text: str, radians: bool = False) -> tuple[Direction, ...]:
    entries = [e for e in text.split(";")]
    if not text.strip():
        raise ConfigError("--dirs: no directions given")
    return tuple(parse_direction(e, radians, f"--dirs entry {k}") for k, e in enumerate(entries, 1))


def parse_spin_arg(text: str) -> SpinSystem:
    try:
        return parse_spin(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--spin: {exc}") from None


def parse_state(text: str, spin: SpinSystem, axis: Direction) -> DiagonalState:
    """``pure``, ``pure:2m``, ``uniform``, ``extremal:p_top``, ``noisy:f`` or populations ``p_s,...,p_-s``."""
    text = text.strip()
    kind, _, arg = text.partition(":")
    try:
        if kind == "pure":
            return DiagonalState.pure(spin, int(arg) if arg else None, axis)
        if kind == "uniform":
            return DiagonalState.uniform(spin, axis)
        if kind == "extremal":
            return DiagonalState.extremal(spin, _number(arg or "1", "--state extremal"), axis)
        if kind == "noisy":
            base = DiagonalState.extremal(spin, 1.0, axis)
            return NoisyStateSpec(base, _number(arg, "--state noisy")).to_state()
        pops = [_number(p, f"--state population {i + 1}") for i, p in enumerate(text.split(","))]
        if len(pops) != spin.dim:
            raise ConfigError(f"--state: expected {spin.dim} populations for s={spin.label}, got {len(pops)}")
        return DiagonalState(spin, tuple(pops), axis)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"--state: {exc}") from None


def parse_subset(text: str | None, n: int) -> dict[int, int]:
    """``1,3`` or with powers ``1^2,3``; default every step once."""
    if text is None:
        return {i: 1 for i in range(1, n + 1)}
    out: dict[int, int] = {}
    for k, item in enumerate(text.split(","), 1):
        idx, _, power = item.strip().partition("^")
        try:
            i, p = int(idx), int(power or 1)
        except ValueError:
            raise ConfigError(f"--subset entry {k}: cannot parse {item!r}") from None
        if not 1 <= i <= n:
            raise ConfigError(f"--subset entry {k}: index {i} outside 1..{n}")
        if p < 0:
            raise ConfigError(f"--subset entry {k}: negative power")
        out[i] = out.get(i, 0) + p
    return out


def reference_values() -> list[dict[str, str]]:
    text = resources.files("seqspin").joinpath("data/reference_values.csv").read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def published_value(table: int, spin: str, quantity: str, interval: int | None = None) -> float | None:
    for r in reference_values():
        if int(r["table"]) == table and r["spin"] == spin and r["quantity"] == quantity:
            if interval is not None and r["interval"] and int(r["interval"]) != interval:
                continue
            return float(r["value"]) if r["value"] else None
    return None


def _meta(args, **extra) -> dict:
    meta = {"tool": "seqspin", "version": __version__, "seed": args.seed, "jobs": args.jobs}
    meta.update(extra)
    if not args.no_timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def _deg(x: float, radians: bool) -> float:
    return x if radians else math.degrees(x)


def _dev(a: float | None, b: float | None) -> float | None:
    return None if a is None or b is None else abs(a - b)


def cmd_table(args) -> tuple[Report, int]:
    spins = [parse_spin_arg(s) for s in args.spins.split(",")]
    rep = Report(f"table {args.which}", _meta(args, table=args.which, coefficients=args.coefficients))
    for spin in spins:
        label = spin.label
        if args.which == 1:
            for k, (lo, hi) in enumerate(xi_violation_range(spin), 1):
                row = dict(spin=label, interval=k, xi_low=lo, xi_high=hi, provenance="closed_form")
                if args.compare_paper:
                    plo, phi = published_value(1, label, "xi_low", k), published_value(1, label, "xi_high", k)
                    row.update(published_low=plo, published_high=phi, deviation_low=_dev(lo, plo), deviation_high=_dev(hi, phi))
                rep.add(**row)
            continue
        state = DiagonalState.extremal(spin, 1.0)
        if args.which == 2:
            res = maximize_bi(state, numeric=args.numeric)
            row = dict(spin=label, eta_max=res.closed_form.eta_max, theta1=_deg(res.closed_form.argmax[0], args.radians))
            if args.numeric:
                row["eta_numeric"] = res.coplanar.eta_max
            row["violates"] = res.closed_form.eta_max > 1
            row["provenance"] = "closed_form"
            key = "eta_max"
        elif args.which == 3:
            f = noise_threshold(spin)
            row = dict(spin=label, f_max=f, all_f_violate=f is None, provenance="closed_form")
            key = "f_max"
        else:
            res = maximize_mki(state, args.coefficients, numeric=args.numeric)
            row = dict(spin=label, eta_max=res.closed_form.eta_max, theta2=_deg(res.closed_form.argmax[2], args.radians))
            if args.numeric:
                row["eta_numeric"] = res.coplanar.eta_max
            row["violates"] = res.closed_form.eta_max > 1
            row["provenance"] = "closed_form" if args.coefficients == "corrected" else "published"
            key = "eta_max"
        if args.compare_paper:
            ref = published_value(args.which, label, key)
            row.update(published=ref, deviation=_dev(row[key], ref))
        rep.add(**row)
    return rep, EXIT_OK


def _closed(state, chain, powers, coefficients) -> float:
    n = chain.n
    if any(v != 1 for v in powers.values()) or sorted(powers) != list(range(1, n + 1)) or n > 3:
        raise ConfigError("closed forms cover <a1>, <a1 a2> and <a1 a2 a3> only (full subset, no powers)")
    dirs = (state.axis,) + chain.directions
    th = [dirs[i].angle_to(dirs[i + 1]) for i in range(n)]
    if n == 1:
        return closed_one(state, th[0])
    if n == 2:
        return closed_two(state, th[0], th[1])
    three = closed_three if coefficients == "corrected" else published_closed_three
    return three(state, th[0], th[1], th[2])


def cmd_correlate(args) -> tuple[Report, int]:
    spin = parse_spin_arg(args.spin)
    axis = parse_direction(args.axis, args.radians, "--axis")
    state = parse_state(args.state, spin, axis)
    chain = MeasurementChain(parse_dirs(args.dirs, args.radians))
    powers = parse_subset(args.subset, chain.n)
    if args.convention == "pm_one" and args.engine != "brute":
        raise ConfigError("closed forms are evaluated in the physical convention; use --engine brute")
    rep = Report(
        "correlate",
        _meta(args, spin=spin.label, n=chain.n, subset=args.subset or "all", engine=args.engine, convention=args.convention),
    )
    status = EXIT_OK
    values = {}
    if args.engine in ("closed", "both"):
        values["closed"] = _closed(state, chain, powers, args.coefficients)
        rep.add(quantity="closed", value=values["closed"], provenance="closed_form")
    if args.engine in ("brute", "both"):
        values["brute"] = correlation(state, chain, powers, args.convention, "enumerate")
        rep.add(quantity="brute", value=values["brute"], provenance="brute_force")
    if args.engine == "both":
        gap = abs(values["closed"] - values["brute"])
        ok = gap <= ORACLE_TOL
        rep.add(quantity="discrepancy", value=gap, within_tolerance=ok)
        if not ok:
            status = EXIT_ORACLE
    return rep, status


def cmd_optimize(args) -> tuple[Report, int]:
    spin = parse_spin_arg(args.spin)
    state = parse_state(args.state, spin, Direction.z())
    rep = Report("optimize", _meta(args, spin=spin.label, n=args.n, state=args.state))

    def emit(label, res, provenance):
        angles = ",".join(f"{_deg(a, args.radians):.10g}" for a in res.argmax)
        rep.add(method=label, eta_max=res.eta_max, residual=res.residual, argmax=angles, provenance=provenance)

    if args.n == 2:
        m = maximize_bi(state, True, args.restarts, args.sphere_restarts, args.seed)
    elif args.n == 3:
        m = maximize_mki(state, args.coefficients, True, args.restarts, args.sphere_restarts, args.seed)
    else:
        m = None
    if m is not None:
        emit("closed_form", m.closed_form, "closed_form" if m.closed_form.method == "closed_form" else "published")
        emit("coplanar", m.coplanar, "numeric")
        if m.sphere is not None:
            emit("sphere", m.sphere, "numeric")
        return rep, EXIT_OK
    if state.p[0] == 1.0:
        inv = eta_n_invariance(spin, args.n, args.sphere_restarts, args.seed, args.restarts)
        angles = ",".join(f"{_deg(a, args.radians):.10g}" for a in inv.argmax)
        rep.add(method="aligned", eta_max=inv.eta_n, eta3=inv.eta3, argmax=angles, provenance="numeric")
        if inv.eta_n_free is not None:
            rep.add(method="free", eta_max=inv.eta_n_free, provenance="numeric")
    else:
        emit("coplanar", maximize_mk_numeric(state, args.n, restarts=max(args.restarts, 1), seed=args.seed), "numeric")
    return rep, EXIT_OK


def cmd_lhv(args) -> tuple[Report, int]:
    dirs = parse_dirs(args.dirs, args.radians)
    if args.n is not None and args.n != len(dirs):
        raise ConfigError(f"--n {args.n} does not match {len(dirs)} directions in --dirs")
    if len(dirs) > 5:
        raise ConfigError("the subset report covers n <= 5")
    a0 = parse_direction(args.a0, args.radians, "--a0")
    try:
        cfg = ProtocolConfig(len(dirs), a0, dirs, args.samples, args.seed, args.p_plus)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    meta = _meta(args, n=cfg.n, samples=cfg.samples, p_plus=cfg.p_plus)
    if cfg.mixed:
        meta["note"] = "mixed input simulated by flipping a0 with probability 1 - p_plus"
    rep = Report("lhv", meta)
    tr = run_protocol(cfg, args.jobs)
    status = EXIT_OK
    for sub in all_subsets(cfg.n):
        est, se = estimate_correlations(tr, sub)
        target = quantum_correlation(cfg, sub)
        z = abs(est - target) / se if se > 0 else (0.0 if abs(est - target) < 1e-12 else math.inf)
        ok = z <= LHV_SE
        rep.add(subset=" ".join(map(str, sub)), estimate=est, stderr=se, quantum=target, z=z, within_5se=ok, provenance="monte_carlo")
        if not ok:
            status = EXIT_ORACLE
    return rep, status


def cmd_hvt_bound(args) -> tuple[Report, int]:
    spin = parse_spin_arg(args.spin)
    if args.convention == "pm_one" and spin.twice_s != 1:
        raise ConfigError("the +-1 convention is only defined for s = 1/2")
    if args.n < 2:
        raise ConfigError("--n must be >= 2")
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    scale = 1.0 if args.convention == "pm_one" else spin.s
    if scale == 0:
        raise ConfigError("spin 0 has no outcomes to bound")
    r = hvt_bound_check(args.n, scale, args.trials, args.seed)
    rep = Report("hvt-bound", _meta(args, spin=spin.label, n=args.n, trials=args.trials, convention=args.convention))
    rep.add(
        n=args.n,
        bound=r.bound,
        vertex_max=r.vertex_max,
        sampled_max=r.sampled_max,
        attained=r.attained,
        exceeded=r.exceeded,
        provenance="monte_carlo",
    )
    return rep, EXIT_ORACLE if r.exceeded or not r.attained else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1, help="worker threads for Monte Carlo runs")
    common.add_argument("--radians", action="store_true", help="angles in radians (default degrees)")

    p = argparse.ArgumentParser(prog="seqspin", description="Correlations and Bell-type tests for successive spin measurements.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", parents=[common], help="regenerate one of the four result tables")
    t.add_argument("which", type=int, choices=(1, 2, 3, 4))
    t.add_argument("--spins", default=TABLE_SPINS, help="comma-separated spins, e.g. 1/2,1,3/2")
    t.add_argument("--compare-paper", action="store_true", help="add published values and deviations")
    t.add_argument("--numeric", action="store_true", help="also run the free coplanar numeric search")
    t.add_argument("--coefficients", choices=("corrected", "published"), default="corrected")
    t.set_defaults(func=cmd_table)

    c = sub.add_parser("correlate", parents=[common], help="correlation of successive outcomes")
    c.add_argument("--spin", required=True)
    c.add_argument("--state", default="pure")
    c.add_argument("--axis", default="0", help="quantisation axis of the state")
    c.add_argument("--dirs", required=True, help="'theta[,phi];...' or 'x,y,z;...'")
    c.add_argument("--subset", help="1-based indices, optional powers: 1,2^2,3")
    c.add_argument("--engine", choices=("closed", "brute", "both"), default="both")
    c.add_argument("--convention", choices=("physical", "pm_one"), default="physical")
    c.add_argument("--coefficients", choices=("corrected", "published"), default="corrected")
    c.set_defaults(func=cmd_correlate)

    o = sub.add_parser("optimize", parents=[common], help="maximise the violation ratio")
    o.add_argument("--spin", required=True)
    o.add_argument("--n", type=int, choices=(2, 3, 4, 5), default=2)
    o.add_argument("--state", default="pure")
    o.add_argument("--restarts", type=int, default=4)
    o.add_argument("--sphere-restarts", type=int, default=0)
    o.add_argument("--coefficients", choices=("corrected", "published"), default="corrected")
    o.set_defaults(func=cmd_optimize)

    lv = sub.add_parser("lhv", parents=[common], help="Monte Carlo run of the classical protocol (s = 1/2)")
    lv.add_argument("--n", type=int)
    lv.add_argument("--dirs", required=True)
    lv.add_argument("--a0", default="0")
    lv.add_argument("--samples", type=int, default=10**6)
    lv.add_argument("--p-plus", type=float, default=1.0)
    lv.set_defaults(func=cmd_lhv)

    h = sub.add_parser("hvt-bound", parents=[common], help="sample deterministic hidden-variable assignments")
    h.add_argument("--n", type=int, required=True)
    h.add_argument("--spin", default="1/2")
    h.add_argument("--trials", type=int, default=10**6)
    h.add_argument("--convention", choices=("physical", "pm_one"), default="physical")
    h.set_defaults(func=cmd_hvt_bound)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("seqspin: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, status = args.func(args)
    except ValueError as exc:
        print(f"seqspin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.dumps(args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status == EXIT_ORACLE:
        print("seqspin: internal cross-check exceeded its tolerance", file=sys.stderr)
    return status
