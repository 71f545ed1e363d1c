"""Command-line interface: rate sweeps, finite-key sweeps, simulation, optimization, GHZ check.

Exit codes: 0 success, 1 invalid input, 2 a check failed in ``--check`` mode.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import ghz
from .finite import DegenerateSiftError, finite_key_length
from .montecarlo import SimConfig, generate_events, simulate
from .optimize import optimize_asymptotic, optimize_finite
from .params import ConfigError, ParameterError, SystemParams, load_config, parse_config, reference_params, validate
from .postmatch import write_event_csv
from .rates import asymptotic_rate, nbb84_baseline_rate

log = logging.getLogger("qcka")

SWEEP_HEADER = ("L_km", "n", "lambda", "p_z", "q_z", "e_pair", "e_x_n", "phi_z", "rate", "baseline_rate")
EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """Distance sweep over one or more participant counts.

    ``mode`` is ``asymptotic``, ``compare`` or ``finite``. ``lam`` fixes the
    source parameter; ``None`` optimizes it (and ``p_z`` in finite mode).
    """

    params: SystemParams
    n_values: tuple[int, ...]
    start: float
    stop: float
    step: float
    mode: str = "asymptotic"
    lam: float | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise UsageError(f"sweep step must be > 0 (got {self.step})")
        if self.start > self.stop:
            raise UsageError(f"sweep start {self.start} exceeds stop {self.stop}")
        if self.mode not in ("asymptotic", "compare", "finite"):
            raise UsageError(f"unknown sweep mode {self.mode!r}")
        if not self.n_values or min(self.n_values) < 3:
            raise UsageError("participant counts must be >= 3")

    def distances(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)

    def points(self) -> list[SystemParams]:
        pts = []
        for n in self.n_values:
            base = self.params.with_participants(n)
            for d in self.distances():
                p = base.with_distance(round(float(d), 10))
                if self.lam is not None:
                    p = replace(p, lam=self.lam)
                pts.append(validate(p))
        return pts


@dataclass(frozen=True)
class SweepRow:
    L_km: float
    n: int
    lam: float | None
    p_z: float | None
    q_z: float
    e_pair: float
    e_x_n: float
    phi_z: float | None
    rate: float
    baseline_rate: float | None

    def cells(self) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [fmt(self.L_km), str(self.n), fmt(self.lam), fmt(self.p_z), fmt(self.q_z), fmt(self.e_pair),
                fmt(self.e_x_n), fmt(self.phi_z), fmt(self.rate), fmt(self.baseline_rate)]


def _asymptotic_point(args: tuple[SystemParams, str, bool]) -> SweepRow:
    params, mode, optimize = args
    if optimize and params.source == "spdc":
        params = replace(params, lam=optimize_asymptotic(params).best_lambda)
    conf = asymptotic_rate(params)
    return SweepRow(
        L_km=params.distances_km[0],
        n=params.n_participants,
        lam=params.lam if params.source == "spdc" else None,
        p_z=None,
        q_z=conf.q_z,
        e_pair=conf.e_z_marginal[0],
        e_x_n=conf.e_x_n,
        phi_z=None,
        rate=conf.r_asym,
        baseline_rate=nbb84_baseline_rate(params) if mode == "compare" else None,
    )


def _finite_point(args: tuple[SystemParams, bool]) -> SweepRow:
    params, optimize = args
    if optimize:
        best = optimize_finite(params)
        params = replace(params, lam=best.best_lambda, basis_z_prob=best.best_pz)
    conf = asymptotic_rate(params)
    try:
        fk = finite_key_length(params)
        rate, phi = fk.r_finite, fk.phi_z
    except DegenerateSiftError:
        rate, phi = 0.0, None
    return SweepRow(
        L_km=params.distances_km[0],
        n=params.n_participants,
        lam=params.lam if params.source == "spdc" else None,
        p_z=params.basis_z_prob,
        q_z=conf.q_z,
        e_pair=conf.e_z_marginal[0],
        e_x_n=conf.e_x_n,
        phi_z=phi,
        rate=rate,
        baseline_rate=None,
    )


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    # executor.map preserves input order regardless of completion order.
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def run_rate_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    if spec.mode not in ("asymptotic", "compare"):
        raise UsageError("run_rate_sweep needs mode 'asymptotic' or 'compare'")
    items = [(p, spec.mode, spec.lam is None) for p in spec.points()]
    return _map(_asymptotic_point, items, workers)


def run_finite_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    if spec.mode != "finite":
        raise UsageError("run_finite_sweep needs mode 'finite'")
    items = [(p, spec.lam is None) for p in spec.points()]
    return _map(_finite_point, items, workers)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


# --- argument handling ------------------------------------------------------------

def _int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value parameter file (defaults: published constants)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--out", type=Path, help="write CSV here instead of standard output")
    common.add_argument("--seed", type=_seed, default=0, help="64-bit RNG seed (simulate)")
    common.add_argument("--check", action="store_true", help="exit with status 2 if a built-in check fails")
    common.add_argument("--workers", type=int, default=1, help="process pool size for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def _add_sweep_args(p: argparse.ArgumentParser, finite: bool = False) -> None:
    p.add_argument("--n", type=_int_list, default=None, help="participant counts, e.g. 3,4,5,6 or 3..6")
    p.add_argument("--min", dest="start", type=float, default=0.0, help="first distance in km")
    p.add_argument("--max", dest="stop", type=float, default=400.0, help="last distance in km")
    p.add_argument("--step", type=float, default=5.0, help="distance step in km")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="fix lambda instead of optimizing")
    p.add_argument("--source", choices=("spdc", "perfect"), default=None)
    if finite:
        p.add_argument("--pulses", type=_float_list, default=None,
                       help="pulses per stream; a list writes one CSV per value")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="qcka", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common], help="asymptotic key rate versus distance")
    _add_sweep_args(p)
    p = sub.add_parser("compare", parents=[common], help="asymptotic rate with the GHZ-source baseline column")
    _add_sweep_args(p)
    p = sub.add_parser("finite", parents=[common], help="finite-size key rate versus distance")
    _add_sweep_args(p, finite=True)

    p = sub.add_parser("optimize", parents=[common], help="optimize lambda (and p_z) at one operating point")
    p.add_argument("--finite", action="store_true", help="optimize the finite-size rate over (lambda, p_z)")
    p.add_argument("--distance", type=float, default=None, help="symmetric arm length in km")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo run through the post-matching pipeline")
    p.add_argument("--fidelity", choices=("bit", "click"), default="bit")
    p.add_argument("--pulses", type=float, default=1e6, help="pulses per pair stream")
    p.add_argument("--gain", type=float, default=None, help="bit level: override the per-stream gain")
    p.add_argument("--qber", type=float, default=None, help="bit level: override the per-stream QBER")
    p.add_argument("--events-out", type=Path, default=None, help="also write the raw event log CSV")
    p.add_argument("--inject-mismatch", type=float, default=0.0, help=argparse.SUPPRESS)

    p = sub.add_parser("verify-ghz", parents=[common], help="statevector check of the virtual CNOT circuit")
    p.add_argument("--n", type=_int_list, default=tuple(range(3, 9)), help="e.g. 3..8")
    return parser


def _load_params(args) -> SystemParams:
    base = reference_params()
    params = load_config(args.config, base=base) if args.config else validate(base)
    if args.overrides:
        text = "\n".join(args.overrides)
        if any("=" not in o for o in args.overrides):
            raise UsageError("--set expects KEY=VALUE")
        params = parse_config(text, path="--set", base=params)
    if getattr(args, "source", None):
        params = validate(replace(params, source=args.source))
    return params


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        log.info("wrote %s", out)


def _suffix_path(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}_{tag}{out.suffix}")


def _sweep_checks(rows: Sequence[SweepRow]) -> list[str]:
    problems = []
    for r in rows:
        if not (r.rate >= 0 and math.isfinite(r.rate)):
            problems.append(f"invalid rate {r.rate} at n={r.n}, L={r.L_km}")
    return problems


def _cmd_sweep(args, mode: str) -> int:
    params = _load_params(args)
    n_values = args.n or (params.n_participants,)
    spec_kw = dict(n_values=n_values, start=args.start, stop=args.stop, step=args.step, mode=mode, lam=args.lam)
    problems: list[str] = []
    if mode == "finite":
        pulses = args.pulses or (params.total_pulses,)
        for N in pulses:
            spec = SweepSpec(params=validate(replace(params, total_pulses=N)), **spec_kw)
            rows = run_finite_sweep(spec, args.workers)
            problems += _sweep_checks(rows)
            out = args.out
            if out is not None and len(pulses) > 1:
                out = _suffix_path(out, f"N{N:.0e}".replace("+", ""))
            if out is None and len(pulses) > 1:
                sys.stdout.write(f"# pulses={N:g}\n")
            _emit(rows_to_csv(rows), out)
    else:
        rows = run_rate_sweep(SweepSpec(params=params, **spec_kw), args.workers)
        problems += _sweep_checks(rows)
        _emit(rows_to_csv(rows), args.out)
    for msg in problems:
        log.error(msg)
    return EXIT_CHECK if args.check and problems else EXIT_OK


def _cmd_optimize(args) -> int:
    params = _load_params(args)
    if args.distance is not None:
        params = params.with_distance(args.distance)
    if args.finite:
        res = optimize_finite(params)
    else:
        res = optimize_asymptotic(params)
    print(f"n={params.n_participants} distances_km={list(params.distances_km)} source={params.source}")
    print(f"best_lambda={res.best_lambda!r}")
    if res.best_pz is not None:
        print(f"best_pz={res.best_pz!r}")
    print(f"best_rate={res.best_rate!r}")
    print(f"evaluations={res.evaluations} converged={res.converged}")
    return EXIT_CHECK if args.check and not res.converged else EXIT_OK


def _cmd_simulate(args) -> int:
    params = _load_params(args)
    pulses = int(args.pulses)
    config = SimConfig(params=params, pulses=pulses, seed=args.seed, fidelity=args.fidelity,
                       gain=args.gain, qber=args.qber, analytic_offset=args.inject_mismatch)
    report = simulate(config)
    if args.events_out is not None:
        write_event_csv(generate_events(config), args.events_out)
    _emit(report.to_csv(), args.out)
    summary = report.summary() + f"\nwall-clock {report.wall_clock_s:.2f} s"
    print(summary, file=sys.stdout if args.out is not None else sys.stderr)
    if not report.all_passed:
        log.warning("simulation deviates from the analytic model beyond tolerance")
        if args.check:
            return EXIT_CHECK
    return EXIT_OK


def _cmd_verify_ghz(args) -> int:
    ok = True
    lines = [f"{'n':>3}{'norm':>22}{'GHZ fidelity':>22}{'min <+|rho|+>':>22}  result"]
    for n in args.n:
        r = ghz.verify(n)
        passed = (abs(r["norm"] - 1) < 1e-12 and abs(r["ghz_fidelity"] - 1) < 1e-12
                  and abs(r["min_ancilla_plus_fidelity"] - 1) < 1e-12)
        ok &= passed
        lines.append(f"{n:>3}{r['norm']:>22.16f}{r['ghz_fidelity']:>22.16f}"
                     f"{r['min_ancilla_plus_fidelity']:>22.16f}  {'PASS' if passed else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_CHECK if args.check and not ok else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse reports bad usage with status 2, which is reserved for failed checks here.
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command in ("rate", "compare", "finite"):
            mode = {"rate": "asymptotic", "compare": "compare", "finite": "finite"}[args.command]
            return _cmd_sweep(args, mode)
        if args.command == "optimize":
            return _cmd_optimize(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "verify-ghz":
            return _cmd_verify_ghz(args)
    except (ConfigError, ParameterError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    parser.error(f"unknown command {args.command}")
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
