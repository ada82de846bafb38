"""Command-line front end.

Subcommands: solve, verify, sweep, lemma, explore-m4, serve.  Run
configuration comes from a JSON file (--config) with flag overrides;
human-readable summaries go to stdout and machine JSON to --out.

Exit codes: 0 success/converged, 2 completed but target not met
(not-converged solve, failed certification, gap above tolerance), 1 usage
or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .geometry import (
    CakeConfig,
    division_from_jsonable,
    make_selection,
)
from .preferences import PreferenceModel, model_from_spec
from .sperner import solve_envy_free
from .triangulation import DEFAULT_CELL_CAP
from . import grid_lemma, verifier

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_MET = 2


@dataclass
class RunConfig:
    config: CakeConfig
    players: list[dict]
    schedule: list[int] = field(default_factory=lambda: [1, 2, 4, 8])
    tol: float = 1e-3
    seed: int = 0
    grid: int = 12
    out: str | None = None
    cap: int = DEFAULT_CELL_CAP
    threads: int = 1

    def __post_init__(self) -> None:
        if self.schedule != sorted(set(self.schedule)):
            raise ValueError("schedule must be strictly increasing")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid < 1:
            raise ValueError("grid must be >= 1")

    def models(self) -> dict[int, PreferenceModel]:
        return {i: model_from_spec(s) for i, s in enumerate(self.players)}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    if getattr(args, "cakes", None):
        data["config"] = [int(k) for k in args.cakes.split(",")]
    if getattr(args, "mesh", None):
        data["schedule"] = [int(n) for n in args.mesh.split(",")]
    for key in ("tol", "seed", "grid", "out", "cap", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if "config" not in data:
        raise ValueError("a cake configuration is required (--config or --cakes)")
    return RunConfig(
        config=CakeConfig(tuple(int(k) for k in data["config"])),
        players=list(data.get("players", [])),
        schedule=[int(n) for n in data.get("schedule", [1, 2, 4, 8])],
        tol=float(data.get("tol", 1e-3)),
        seed=int(data.get("seed", 0)),
        grid=int(data.get("grid", 12)),
        out=data.get("out"),
        cap=int(data.get("cap", DEFAULT_CELL_CAP)),
        threads=int(data.get("threads", 1)),
    )


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args: argparse.Namespace) -> int:
    rc = load_run_config(args)
    if len(rc.players) != 2:
        raise ValueError("solve needs exactly two player models")
    report = solve_envy_free(
        rc.config, rc.models(), rc.schedule, rc.tol, cap=rc.cap
    )
    print(
        f"solve {rc.config.pieces_per_cake}: converged={report.converged} "
        f"disjoint={report.disjoint} delta={report.delta} "
        f"mesh={report.mesh_used} cells={report.cells_found} "
        f"flags={report.flags}"
    )
    _emit(report.to_jsonable(), rc.out)
    return EXIT_OK if report.converged else EXIT_NOT_MET


def cmd_verify(args: argparse.Namespace) -> int:
    division_doc = json.loads(Path(args.division).read_text())
    allocation_doc = json.loads(Path(args.allocation).read_text())
    players_doc = json.loads(Path(args.players).read_text())
    config = CakeConfig(tuple(len(r) for r in division_doc))
    division = division_from_jsonable(division_doc, config)
    allocation = {
        int(p): make_selection(config, picks)
        for p, picks in allocation_doc.items()
    }
    models = {i: model_from_spec(s) for i, s in enumerate(players_doc)}
    report = verifier.envy_report(division, allocation, models)
    print(
        f"verify: delta={report.delta} disjoint={report.disjoint} "
        f"pareto={report.pareto}"
    )
    _emit(report.to_jsonable(), getattr(args, "out", None))
    tol = args.tol if args.tol is not None else 1e-9
    return EXIT_OK if report.delta <= tol else EXIT_NOT_MET


def cmd_sweep(args: argparse.Namespace) -> int:
    rc = load_run_config(args)
    if len(rc.players) != 2:
        raise ValueError("sweep needs exactly two player models")
    mode = verifier.COLLECT if args.collect else verifier.CERTIFY_NONE
    models = rc.models()
    cert = verifier.grid_sweep(
        rc.config,
        models,
        rc.grid,
        mode,
        threads=rc.threads,
        cap=rc.cap,
    )
    print(
        f"sweep {rc.config.pieces_per_cake} G={rc.grid}: examined "
        f"{cert.divisions_examined} divisions, {cert.solutions_found} with "
        f"disjoint preferred pairs ({cert.runtime_seconds:.2f}s)"
    )
    if args.csv and cert.examples:
        verifier.sweep_hits_csv(cert, models, args.csv)
    _emit(cert.to_jsonable(), rc.out)
    if mode == verifier.CERTIFY_NONE:
        return EXIT_OK if cert.certified else EXIT_NOT_MET
    return EXIT_OK


def cmd_lemma(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    center_report = grid_lemma.center_cell_report()
    reports = [center_report.to_jsonable()]
    all_passed = center_report.passed
    checked = 0
    worst = 10
    for W in grid_lemma.random_plane_feasible_sets(args.seed, args.count):
        rep = grid_lemma.check_component_bound(W)
        checked += 1
        worst = min(worst, rep.max_component)
        if not rep.passed:
            all_passed = False
            reports.append(rep.to_jsonable())
            if len(reports) > 20:
                break
    payload = {
        "v": 1,
        "center_cell": center_report.to_jsonable(),
        "random_sets_checked": checked,
        "min_max_component": worst,
        "all_passed": all_passed,
        "failures": reports[1:],
        "runtime_seconds": time.perf_counter() - t0,
    }
    print(
        f"lemma: center cell component={center_report.max_component}, "
        f"{checked} random plane-balanced sets, min max-component={worst}, "
        f"all_passed={all_passed}"
    )
    _emit(payload, getattr(args, "out", None))
    return EXIT_OK if all_passed else EXIT_NOT_MET


def cmd_explore_m4(args: argparse.Namespace) -> int:
    from .preferences import poker_model

    config = CakeConfig.of(4, 4, 4, 4)
    models = {0: poker_model("A"), 1: poker_model("B")}
    cert = verifier.grid_sweep(
        config,
        models,
        args.grid,
        verifier.COLLECT,
        threads=args.threads or 1,
        cap=args.cap or verifier.DEFAULT_DIVISION_CAP,
    )
    print(
        f"explore-m4 G={args.grid}: examined {cert.divisions_examined} "
        f"divisions, {cert.solutions_found} with disjoint preferred pairs "
        f"({cert.runtime_seconds:.2f}s)"
    )
    _emit(cert.to_jsonable(), getattr(args, "out", None))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(journal_path=args.journal, static_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multicake",
        description="Envy-free division of multiple linked cakes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="run configuration JSON file")
        p.add_argument("--cakes", help="pieces per cake, e.g. 2,3")
        p.add_argument("--mesh", help="mesh schedule, e.g. 4,8,16")
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--out")
        p.add_argument("--cap", type=int)
        p.add_argument("--threads", type=int)

    p_solve = sub.add_parser("solve", help="search for a disjoint envy-free division")
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="envy-report a division and allocation")
    p_verify.add_argument("division", help="JSON file: array of rows")
    p_verify.add_argument("allocation", help="JSON file: {player: picks}")
    p_verify.add_argument("players", help="JSON file: list of model specs")
    p_verify.add_argument("--tol", type=float, default=None)
    p_verify.add_argument("--out")
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="exhaustive grid certification")
    add_common(p_sweep)
    p_sweep.add_argument("--collect", action="store_true",
                         help="collect hits instead of certifying none")
    p_sweep.add_argument("--csv", help="write one CSV row per collected hit")
    p_sweep.set_defaults(func=cmd_sweep)

    p_lemma = sub.add_parser("lemma", help="component-bound checks on the 4x4x4 grid")
    p_lemma.add_argument("--seed", type=int, default=0)
    p_lemma.add_argument("--count", type=int, default=10000)
    p_lemma.add_argument("--out")
    p_lemma.set_defaults(func=cmd_lemma)

    p_m4 = sub.add_parser(
        "explore-m4",
        help="sweep four cakes of four pieces with poker-hand preferences",
    )
    p_m4.add_argument("--grid", type=int, default=6)
    p_m4.add_argument("--threads", type=int)
    p_m4.add_argument("--cap", type=int)
    p_m4.add_argument("--out")
    p_m4.set_defaults(func=cmd_explore_m4)

    p_serve = sub.add_parser("serve", help="run the interactive session server")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--journal", default=None)
    p_serve.add_argument("--ui", default=None,
                         help="directory of built web UI assets to serve at /ui")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
