"""Command-line interface.

Subcommands: ``solve`` (one scenario, prints the solution and writes the
trace), ``sweep`` (Monte-Carlo sweep to CSV), ``check`` (fast invariant
battery on small instances).  Exit codes: 0 success, 1 validation or usage
error, 2 solver infeasibility.  Output files are byte-identical across runs
with identical inputs; pass --timing to record wall times instead of zeros.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, experiments
from .channel import generate_channels
from .gbd import GlobalInfeasibleError, gbd_solve, trace_csv_rows
from .rates import CommonRateAlloc, overall_rate
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavris", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="solve one scenario")
    solve.add_argument("--config", required=True, help="scenario JSON file")
    solve.add_argument("--seed", type=int, default=None, help="channel seed (default: rng_seed)")
    solve.add_argument("--scheme", default="rsma_bdris", help=f"one of {sorted(baselines.SCHEMES)}")
    solve.add_argument("--out", default=None, help="directory for solution.json and trace.csv")
    solve.add_argument("--timing", action="store_true", help="record wall times in outputs")

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    sweep.add_argument("--config", required=True, help="scenario JSON file")
    sweep.add_argument("--axis", required=True, choices=experiments.AXES)
    sweep.add_argument("--grid", required=True, help="comma-separated grid values")
    sweep.add_argument("--scheme", default="rsma_bdris", help="comma-separated scheme ids")
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0, help="base seed")
    sweep.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    sweep.add_argument("--timing", action="store_true")

    check = sub.add_parser("check", help="run the invariant battery")
    check.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_check(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GlobalInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def _cmd_solve(args) -> int:
    cfg = load_scenario(args.config)
    if args.scheme not in baselines.SCHEMES:
        print(f"error: --scheme must be one of {sorted(baselines.SCHEMES)}", file=sys.stderr)
        return EXIT_VALIDATION
    seed = cfg.rng_seed if args.seed is None else args.seed
    ch = generate_channels(cfg, seed)
    sol = baselines.run_scheme(args.scheme, ch, cfg)
    scheme_cfg, _ = baselines.scheme_config(args.scheme, cfg)
    report = overall_rate(sol.assignment, sol.phases, sol.precoders, sol.alloc, ch, scheme_cfg)
    doc = {
        "scheme": args.scheme,
        "seed": seed,
        "assignment": list(sol.assignment.u),
        "value_bps": sol.value_bps,
        "lower_bound": sol.lower_bound,
        "upper_bound": sol.upper_bound,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "per_user": [
            {
                "group": g,
                "user": k,
                "rate_c": rc,
                "rate_p": rp,
                "common_share": share,
                "contribution_bps": contrib,
            }
            for (g, k, _, _, rc, rp, share, contrib) in report.to_rows(
                CommonRateAlloc(sol.alloc.shares)
            )
        ],
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "solution.json").write_text(text + "\n")
        rows = trace_csv_rows(sol.trace, timing=args.timing)
        (out / "trace.csv").write_text("\n".join(",".join(r) for r in rows) + "\n")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_scenario(args.config)
    try:
        grid = tuple(float(v) for v in args.grid.split(","))
    except ValueError:
        print("error: --grid must be comma-separated numbers", file=sys.stderr)
        return EXIT_VALIDATION
    if args.axis == "ris_cells":
        grid = tuple(int(v) for v in grid)
    spec = experiments.SweepSpec(
        axis=args.axis,
        grid=grid,
        schemes=tuple(args.scheme.split(",")),
        trials=args.trials,
        base_seed=args.seed,
    )
    rows = experiments.run_sweep(spec, cfg)
    text = experiments.sweep_csv(rows, timing=args.timing)
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


# -- the check battery ---------------------------------------------------------


def _cmd_check(args) -> int:
    failures = 0
    for name, fn in _CHECKS:
        try:
            note = fn(args.seed)
        except Exception as exc:  # a failing check must not hide the rest
            print(f"[check] {name}: FAIL ({exc})")
            failures += 1
            continue
        print(f"[check] {name}: PASS" + (f" ({note})" if note else ""))
    return EXIT_OK if failures == 0 else EXIT_VALIDATION


def _check_scenario_roundtrip(seed):
    from . import scenario

    cfg = scenario.desk_scenario()
    again = scenario.load_scenario(scenario.to_json(cfg))
    assert again == cfg, "round-trip changed the config"
    return None


def _check_channel_determinism(seed):
    from . import scenario
    from .channel import cluster_view

    cfg = scenario.desk_scenario()
    a = generate_channels(cfg, seed)
    b = generate_channels(cfg, seed)
    for g in range(cfg.num_groups):
        assert np.array_equal(a.uav_to_ris[g], b.uav_to_ris[g])
        assert np.array_equal(a.ris_to_user[g], b.ris_to_user[g])
        assert np.array_equal(a.uav_to_user[g], b.uav_to_user[g])
    blocks = [cluster_view(a, 0, f, cfg.cluster_size)[0] for f in range(1, cfg.num_clusters + 1)]
    assert np.array_equal(np.vstack(blocks), a.uav_to_ris[0]), "cluster views must tile the surface"
    return None


def _check_kernel_parity(seed):
    from . import _kernels_py, kernels

    rng = np.random.default_rng(seed)
    heff = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    t = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    ours = kernels.stream_rates(heff, t, 1e-3)
    ref = _kernels_py.stream_rates(heff, t, 1e-3)
    for a, b in zip(ours, ref):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-300)
    return f"backend={kernels.BACKEND}"


def _make_phase_problem(seed, mode):
    from . import manifold as mf
    from . import scenario, wmmse
    from .gbd import initial_assignment
    from .rates import identity_phases

    cfg = scenario.desk_scenario(
        num_groups=1, num_clusters=1, num_ris_cells=4, num_antennas=2, ris_mode=mode, bandwidth_hz=8.0
    )
    ch = generate_channels(cfg, seed)
    assignment = initial_assignment(ch, cfg)
    phases = identity_phases(assignment, cfg)
    result = wmmse.wmmse_solve(assignment, phases, ch, cfg, max_iter=3)
    from .gbd import _alloc_from_result

    alloc = _alloc_from_result("rsma", assignment, result, cfg)
    problems = mf.build_phase_problems(assignment, phases, result.precoders, alloc, ch, cfg)
    return problems[0]


def _check_phase_gradient(seed):
    from . import manifold as mf

    worst = 0.0
    for mode in ("block_unitary", "diagonal_circle"):
        problem = _make_phase_problem(seed, mode)
        worst = max(worst, mf.check_gradient(problem))
    assert worst <= 1e-5, f"gradient mismatch {worst:.2e}"
    return f"max rel err {worst:.1e}"


def _check_rcg(seed):
    from . import manifold as mf

    for mode, tol in (("block_unitary", 1e-8), ("diagonal_circle", 1e-10)):
        problem = _make_phase_problem(seed, mode)
        residuals = []
        res = mf.rcg_ascend(
            problem,
            mf.RcgOptions(max_iter=40),
            on_iterate=lambda x: residuals.append(x.feasibility_residual()),
        )
        assert max(residuals) <= tol, "iterate left the manifold"
        objs = [row[1] for row in res.trace]
        assert all(b >= a - 1e-10 for a, b in zip(objs, objs[1:])), "objective decreased"
    return None


def _check_wmmse(seed):
    from . import scenario, wmmse
    from .gbd import initial_assignment
    from .rates import identity_phases

    cfg = scenario.desk_scenario()
    ch = generate_channels(cfg, seed)
    assignment = initial_assignment(ch, cfg)
    result = wmmse.wmmse_solve(assignment, identity_phases(assignment, cfg), ch, cfg)
    for trace in result.traces:
        wsrs = [row[1] for row in trace]
        assert all(b >= a - 1e-10 for a, b in zip(wsrs, wsrs[1:])), "WSR decreased"
    result.precoders.validate(cfg.max_uav_power_w)
    return None


def _check_gbd(seed):
    from . import scenario

    cfg = scenario.desk_scenario(num_groups=2, num_ris_cells=8, num_clusters=2)
    ch = generate_channels(cfg, seed)
    sol = gbd_solve(ch, cfg)
    lbs = [r.lower_bound for r in sol.trace]
    assert all(b >= a for a, b in zip(lbs, lbs[1:])), "LB not monotone"
    for r in sol.trace:
        if np.isfinite(r.lower_bound) and np.isfinite(r.upper_bound):
            assert r.lower_bound <= r.upper_bound + 1e-6 * max(1.0, abs(r.upper_bound)), "LB > UB"
    return f"value {sol.value_bps:.3e} bit/s"


_CHECKS = [
    ("scenario-roundtrip", _check_scenario_roundtrip),
    ("channel-determinism", _check_channel_determinism),
    ("kernel-parity", _check_kernel_parity),
    ("phase-gradient-fd", _check_phase_gradient),
    ("rcg-manifold-monotone", _check_rcg),
    ("wmmse-monotone", _check_wmmse),
    ("gbd-bounds", _check_gbd),
]


if __name__ == "__main__":
    sys.exit(main())
