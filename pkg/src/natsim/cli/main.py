"""Command-line entry point: run, validate, oracle, bench.

Exit codes: 0 success, 1 invalid configuration or failed self-check,
2 runtime abort (integrator divergence, solver failure, I/O error).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from ..experiments.dnp import dnp_oracle, run_dnp
from ..experiments.torus import TorusScenario, run_torus, separatrix_direction
from ..experiments.water import WaterScenario, build_water, run_water, water_projector
from ..geometry.maps import torus_map, torus_point
from ..pullback.mps import DiagonalMPS, MultiplicationCounter
from ..records import IntegrationError
from .config import ConfigError, RunConfig, parse_config, serialize, with_overrides
from .export import FORMATS, export
from .filters import FilterSpec

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_config(path: str | None, **overrides) -> RunConfig:
    text = Path(path).read_text() if path else None
    if text is None:
        raise ConfigError(["--config is required"])
    return with_overrides(parse_config(text), **overrides)


def self_checks(seed: int = 0) -> list[tuple[str, float, float]]:
    """(name, value, tolerance) for the geometry self-checks; pass means value <= tolerance."""
    rng = np.random.default_rng(seed)
    checks = []
    F = torus_map(2.0, 1.0)
    checks.append(("torus Jacobian vs finite differences", F.check_jacobian(torus_point(0.3, 1.1)), 1e-6))
    water = build_water(WaterScenario())
    checks.append(("rigid-body Jacobian vs finite differences",
                   water.metric.F.check_jacobian(water.state.q), 1e-6))
    _, residual, _ = water_projector(WaterScenario())
    checks.append(("water phase-space projector idempotence", residual, 1e-10))
    worst = 0.0
    for n, r in ((2, 2), (3, 2), (4, 3)):
        state = DiagonalMPS.random(n, r, rng)
        v = rng.standard_normal(state.dim_xi)
        J = state.jacobian()
        dense = J.T @ (J @ v)
        worst = max(worst, float(np.abs(state.matvec(v) - dense).max() / np.abs(dense).max()))
    checks.append(("factored metric matvec vs dense", worst, 1e-12))
    imm = DiagonalMPS.random(2, 2, rng).immersion()
    checks.append(("diagonal-state Jacobian vs finite differences",
                   imm.check_jacobian(rng.standard_normal(imm.dim_xi)), 1e-6))
    return checks


def _print_checks(checks) -> bool:
    ok = True
    for name, value, tol in checks:
        passed = value <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tolerance {tol:.0e})")
    return ok


def run_config(config: RunConfig) -> dict:
    """Run a validated configuration, write its outputs, return the summary."""
    out = Path(config.out)
    s = config.scenario
    written = []
    if config.kind == "dnp":
        record, summary = run_dnp(s)
        oracle = dnp_oracle(s)
        omega_c = config.filter_omega_c if config.filter_omega_c is not None else 1.0 / (125.0 * s.T1n)
        filt = FilterSpec(omega_c)
        for p in range(s.n_paths):
            for fmt in config.formats:
                written.append(export(record, fmt, out / f"dnp_path{p:04d}.{fmt}", path_index=p, filt=filt))
        result = {"summary": summary.as_dict(),
                  "oracle": {"rho_e": oracle.rho_e, "rho_n": oracle.rho_n}}
    else:
        record = run_torus(s) if config.kind == "torus" else run_water(s)
        filt = FilterSpec(config.filter_omega_c) if config.filter_omega_c is not None else None
        for fmt in config.formats:
            written.append(export(record, fmt, out / f"{config.kind}.{fmt}", filt=filt))
        result = {"summary": record.meta["summary"]}
    result["config"] = json.loads(serialize(config))
    result["files"] = [str(p) for p in written]
    summary_path = out / "summary.json"
    try:
        summary_path.write_text(json.dumps(_jsonable(result), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {summary_path}: {exc.strerror or exc}") from exc
    return result


def oracle_for(config: RunConfig) -> dict:
    s = config.scenario
    if config.kind == "dnp":
        on, off = dnp_oracle(s), dnp_oracle(s, coupled=False)
        return {"coupled": {"rho_e": on.rho_e, "rho_n": on.rho_n, "degenerate": on.degenerate},
                "decoupled": {"rho_e": off.rho_e, "rho_n": off.rho_n}}
    if config.kind == "torus":
        assert isinstance(s, TorusScenario)
        return {"separatrix_direction": separatrix_direction(s.r1, s.r2),
                "inner_equator_growth_per_turn": float(np.exp(2 * np.pi * np.sqrt((s.r1 - s.r2) / s.r2)))}
    assert isinstance(s, WaterScenario)
    return {"trap_frequency": float(np.sqrt(s.k / (s.m_oxygen + 2 * s.m_hydrogen)))}


def bench(n: int, r: int, repeats: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    state = DiagonalMPS.random(n, r, rng)
    v = rng.standard_normal(state.dim_xi)
    counter = MultiplicationCounter()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        state.matvec(v, counter)
        times.append(time.perf_counter() - t0)
    return {"n": n, "r": r, "best_seconds": min(times), "multiplications": counter.count // repeats}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="natsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--paths", type=int, metavar="N")
        p.add_argument("--validate", action="store_true", default=None,
                       help="run the geometry self-checks first")

    common(sub.add_parser("run", help="run a scenario and export its trajectories"))
    common(sub.add_parser("validate", help="geometry self-checks (and config check with --config)"))
    common(sub.add_parser("oracle", help="dense or analytic reference values for a scenario"))
    b = sub.add_parser("bench", help="time the factored metric matvec")
    b.add_argument("--n", type=int, default=500)
    b.add_argument("--r", type=int, default=100)
    b.add_argument("--repeats", type=int, default=3)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            print(json.dumps(bench(args.n, args.r, args.repeats)))
            return EXIT_OK
        overrides = dict(seed=args.seed, out=args.out, format=args.format, paths=args.paths,
                         validate=args.validate)
        config = load_config(args.config, **overrides) if args.config or args.command != "validate" else None
        if args.command == "validate":
            if config is not None:
                print(f"PASS  configuration ({config.kind})")
            return EXIT_OK if _print_checks(self_checks()) else EXIT_INVALID
        if args.command == "oracle":
            print(json.dumps(_jsonable(oracle_for(config)), indent=2))
            return EXIT_OK
        if config.validate and not _print_checks(self_checks()):
            return EXIT_INVALID
        result = run_config(config)
        print(json.dumps(_jsonable(result["summary"]), indent=2))
        return EXIT_OK
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
