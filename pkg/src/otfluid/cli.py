"""Command-line interface: run, tessellate, study, and toy subcommands."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import diagnostics, dynamics, ot, snapshots, tessellation, testcases
from .errors import ConfigInvalid, IoFailure, OTFluidError

_CONFIG_FIELDS = {f.name for f in fields(testcases.SimConfig)}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfluid",
        description=(
            "Lagrangian particle solver for incompressible flow with an "
            "optimal-transport penalization force"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a testcase and write snapshots")
    run.add_argument("--testcase", choices=testcases.TESTCASES)
    run.add_argument("--config", help="JSON file mirroring the config fields")
    run.add_argument("--n-particles", type=int)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--tau", type=float)
    run.add_argument("--steps", type=int, help="number of steps (sets horizon = steps * tau)")
    run.add_argument("--horizon", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--partition", choices=testcases.PARTITIONS)
    run.add_argument("--snapshot-every", type=int)
    run.add_argument("--output-dir")
    run.add_argument(
        "--scale",
        type=float,
        default=1.0,
        help="shrink the run: N/s particles, epsilon and tau times sqrt(s)",
    )
    run.add_argument("--allow-unstable", action="store_true", default=None)
    run.add_argument("--projection-init", action="store_true", default=None)
    run.add_argument("--rt-eta", type=float)

    tes = sub.add_parser("tessellate", help="build and export an equal-area partition")
    tes.add_argument("--testcase", choices=testcases.TESTCASES, default="beltrami")
    tes.add_argument("--n-particles", type=int, default=100)
    tes.add_argument("--seed", type=int, default=0)
    tes.add_argument("--max-iters", type=int, default=tessellation.LLOYD_DEFAULT_MAX_ITERS)
    tes.add_argument("--move-tol", type=float, default=tessellation.LLOYD_DEFAULT_MOVE_TOL)
    tes.add_argument("--output-dir", default="out")

    study = sub.add_parser("study", help="convergence ladder on the vortex-array case")
    study.add_argument("--ladder", required=True, help="JSON list of [n, epsilon, tau] rows")
    study.add_argument("--horizon", type=float, default=0.5)
    study.add_argument("--output-dir", default="out")

    toy = sub.add_parser("toy", help="validation sweep of the planar toy system")
    toy.add_argument("--h0", type=float, default=0.01)
    toy.add_argument("--h1", type=float, default=0.0)
    toy.add_argument("--epsilon", type=float, default=0.1)
    toy.add_argument("--tau", type=float, nargs="+", default=[1e-3, 2e-4, 1e-4])
    toy.add_argument("--horizon", type=float, default=1.0)
    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config: {path} is not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("config: top level must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigInvalid(f"config: unknown fields {unknown}")
    if "gravity" in data:
        data["gravity"] = tuple(data["gravity"])
    return data


def _resolve_run_config(args) -> testcases.SimConfig:
    file_values = _load_config_file(args.config) if args.config else {}
    name = args.testcase or file_values.get("testcase", "beltrami")
    merged = dict(testcases.PRESETS[name]) if name in testcases.PRESETS else {}
    preset_allows = merged.get("allow_unstable", False)
    merged.update(file_values)
    merged["testcase"] = name
    for key in (
        "n_particles",
        "epsilon",
        "tau",
        "horizon",
        "seed",
        "partition",
        "snapshot_every",
        "output_dir",
        "allow_unstable",
        "projection_init",
        "rt_eta",
    ):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    # A preset's stability waiver covers its own published epsilon/tau pair
    # only; changing either revokes it unless the user opts back in.
    if (
        preset_allows
        and args.allow_unstable is None
        and "allow_unstable" not in file_values
        and (
            args.epsilon is not None
            or args.tau is not None
            or "epsilon" in file_values
            or "tau" in file_values
        )
    ):
        merged["allow_unstable"] = False
    config = testcases.SimConfig(**merged)
    config = testcases.scale_config(config, args.scale)
    if args.steps is not None:
        if args.horizon is not None:
            raise ConfigInvalid("horizon: give either --steps or --horizon, not both")
        config = replace(config, horizon=args.steps * config.tau)
    return config


def _final_solution(domain, state):
    problem = ot.OTProblem(
        state.positions, ot.uniform_targets(domain, state.n_particles), domain
    )
    return ot.solve(problem, state.weights_warm)


def _cmd_run(args) -> int:
    config = _resolve_run_config(args)
    digest = snapshots.config_hash(config)
    num_steps = int(np.floor(config.horizon / config.tau + 1e-9))
    print(
        f"run: {config.testcase} n={config.n_particles} epsilon={config.epsilon:g} "
        f"tau={config.tau:g} steps={num_steps} output={config.output_dir} "
        f"config={digest[:12]}"
    )
    domain, part, state, params, reference = testcases.build_testcase(config)
    os.makedirs(config.output_dir, exist_ok=True)
    diag = diagnostics.DiagnosticsWriter(
        os.path.join(config.output_dir, "diagnostics.csv"), state, params, reference
    )
    snap = snapshots.SnapshotWriter(
        config.output_dir, state, domain, config.snapshot_every, digest
    )
    try:
        final = dynamics.run(state, params, domain, observers=[diag, snap])
        solution = _final_solution(domain, final)
        diag.finalize(solution)
        snap.finalize(solution)
    except OTFluidError:
        diag.finalize(None)
        raise
    print(
        f"done: step={final.step} time={final.time:g} "
        f"snapshots={len(snap.written)} "
        f"diagnostics={os.path.join(config.output_dir, 'diagnostics.csv')}"
    )
    return 0


def _cmd_tessellate(args) -> int:
    domain = testcases.testcase_domain(args.testcase)
    part = tessellation.lloyd_partition(
        domain,
        args.n_particles,
        seed=args.seed,
        max_iters=args.max_iters,
        move_tol=args.move_tol,
    )
    os.makedirs(args.output_dir, exist_ok=True)
    stem = os.path.join(args.output_dir, "partition")
    snapshots.write_partition(part, stem)
    print(
        f"tessellate: n={part.n_cells} h={part.h:.6g} "
        f"iterations={part.iterations} wrote {stem}.csv/.svg/.json"
    )
    return 0


def _parse_ladder(path) -> list:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise IoFailure(f"cannot read ladder {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"ladder: {path} is not valid JSON ({exc})") from exc
    if not isinstance(data, list) or not data:
        raise ConfigInvalid("ladder: expected a non-empty JSON list of rows")
    rows = []
    for i, entry in enumerate(data):
        if isinstance(entry, dict):
            try:
                rows.append(
                    (entry["n_particles"], entry["epsilon"], entry["tau"])
                )
            except KeyError as exc:
                raise ConfigInvalid(
                    f"ladder: row {i} is missing field {exc}"
                ) from exc
        elif isinstance(entry, (list, tuple)) and len(entry) == 3:
            rows.append(tuple(entry))
        else:
            raise ConfigInvalid(
                f"ladder: row {i} must be [n, epsilon, tau] or an object"
            )
    return rows


def _cmd_study(args) -> int:
    ladder = _parse_ladder(args.ladder)
    rows = diagnostics.convergence_study(ladder, horizon=args.horizon)
    os.makedirs(args.output_dir, exist_ok=True)
    out_path = os.path.join(args.output_dir, "study.csv")
    diagnostics.write_study_csv(rows, out_path)
    print(f"{'n':>8} {'h':>12} {'epsilon':>10} {'tau':>10} {'max_E':>14}  error")
    for row in rows:
        energy = "" if row.max_modulated_energy is None else f"{row.max_modulated_energy:.8g}"
        print(
            f"{row.n_particles:>8} {row.h:>12.6g} {row.epsilon:>10.6g} "
            f"{row.tau:>10.6g} {energy:>14}  {row.error or ''}"
        )
    print(f"wrote {out_path}")
    return 0 if any(r.error is None for r in rows) else 3


def _cmd_toy(args) -> int:
    print("tau,max_deviation,deviation_budget")
    worst = 0.0
    for tau in args.tau:
        deviation = diagnostics.toy_integrator_check(
            args.h0, args.h1, args.epsilon, tau, args.horizon
        )
        worst = max(worst, deviation)
        print(f"{tau:g},{deviation:.8g},{0.1 * abs(args.h0):.8g}")
    times = np.linspace(0.0, args.horizon, 257)
    z = dynamics.toy_geodesic_reference(args.h0, args.h1, args.epsilon, times)
    v = diagnostics.toy_geodesic_velocity(args.h0, args.h1, args.epsilon, times)
    energies = diagnostics.toy_modulated_energy(z, v, args.epsilon)
    expected = args.h0**2 / args.epsilon**2 + args.h1**2
    drift = float(np.max(np.abs(energies - expected)))
    print(f"modulated_energy={expected:.8g} max_drift={drift:.3g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "run": _cmd_run,
        "tessellate": _cmd_tessellate,
        "study": _cmd_study,
        "toy": _cmd_toy,
    }
    try:
        return handlers[args.command](args)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OTFluidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
