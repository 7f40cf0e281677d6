"""Command-line harness: simulation, comparison, sweeps, and map exports.

Subcommands: simulate, compare, sweep-k, saturation-study, portrait,
passivity-map, lyapunov-surface. Outputs are CSV files (optionally with SVG
line plots for quick inspection) plus JSON reports; all are byte-identical
across re-runs with the same configuration.

Exit codes: 0 success, 1 runtime (integration/IO) failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import analysis, serialize
from .controllers import critical_gain
from .integrator import IntegrationError, simulate
from .model import (
    ControlLaw,
    ControllerSpec,
    IntegratorKind,
    SimulationConfig,
    State,
    Trajectory,
)

#: log10|x1| fit windows used by the compare report, per law.
LINEAR_FIT_WINDOW = (0.5, 1.5)
NONLINEAR_FIT_WINDOW = (0.05, 0.8)


def _parse_saturation(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("saturation must be a number or 'inf'")
    return value


def _parse_k_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("k list must not be empty")
    return values


def _parse_float_list(text: str) -> List[float]:
    return _parse_k_list(text)


_CONVERTERS = {
    "k": float,
    "d": str,
    "law": str,
    "x1": float,
    "x2": float,
    "s": _parse_saturation,
    "t_end": float,
    "integrator": str,
    "dt": float,
    "rel_tol": float,
    "abs_tol": float,
    "min_step": float,
    "v_stop": float,
    "sample_interval": float,
    "epsilon_reg": float,
    "damping_cap": float,
    "alpha": float,
    "out": str,
    "format": str,
    "k_list": _parse_k_list,
    "radii": _parse_float_list,
    "n_angles": int,
    "grid_extent": float,
    "grid_res": int,
}


def _load_config_file(path: str) -> Dict[str, object]:
    """Flat ``key = value`` file; keys use the flag spellings (e.g. t-end)."""
    values: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            dest = key.strip().replace("-", "_")
            if dest not in _CONVERTERS:
                raise ValueError(f"{path}:{line_no}: unknown key {key.strip()!r}")
            values[dest] = _CONVERTERS[dest](value.strip())
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value file; flags override it")
    parser.add_argument("--k", type=float, default=100.0, help="proportional gain")
    parser.add_argument(
        "--d", default=None,
        help="linear damping coefficient, or 'auto' for the critical value 2*sqrt(k)",
    )
    parser.add_argument(
        "--law", choices=["none", "linear", "nonlinear"], default="nonlinear"
    )
    parser.add_argument("--x1", type=float, default=1.0, help="initial output")
    parser.add_argument("--x2", type=float, default=0.0, help="initial derivative")
    parser.add_argument(
        "--s", type=_parse_saturation, default=math.inf,
        help="control amplitude limit ('inf' for unbounded)",
    )
    parser.add_argument("--t-end", type=float, default=2.0)
    parser.add_argument("--integrator", choices=["rk45", "rk4"], default="rk45")
    parser.add_argument("--dt", type=float, default=1e-5, help="fixed step (rk4)")
    parser.add_argument("--rel-tol", type=float, default=1e-9)
    parser.add_argument("--abs-tol", type=float, default=1e-12)
    parser.add_argument("--min-step", type=float, default=1e-13)
    parser.add_argument("--v-stop", type=float, default=1e-20)
    parser.add_argument("--sample-interval", type=float, default=1e-3)
    parser.add_argument("--epsilon-reg", type=float, default=1e-12)
    parser.add_argument("--damping-cap", type=float, default=1e9)
    parser.add_argument("--alpha", type=float, default=1.0, help="finite-time rate constant")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=["csv", "svg"], default="csv",
                        help="'svg' additionally writes line plots")


def _resolve_d(args: argparse.Namespace, k: float, law: ControlLaw) -> float:
    """Resolve the --d flag; None and 'auto' both pick the critical value."""
    if args.d is None:
        return critical_gain(k) if law is ControlLaw.LINEAR else 0.0
    if isinstance(args.d, str) and args.d.strip().lower() == "auto":
        return critical_gain(k)
    return float(args.d)


def _controller(args: argparse.Namespace, law: Optional[ControlLaw] = None,
                k: Optional[float] = None, saturation: Optional[float] = None,
                d: Optional[float] = None) -> ControllerSpec:
    resolved_law = law if law is not None else ControlLaw(args.law)
    resolved_k = k if k is not None else args.k
    return ControllerSpec(
        law=resolved_law,
        k=resolved_k,
        d=d if d is not None else _resolve_d(args, resolved_k, resolved_law),
        saturation=saturation if saturation is not None else args.s,
        epsilon_reg=args.epsilon_reg,
        damping_cap=args.damping_cap,
    )


def _sim_config(args: argparse.Namespace, **overrides: object) -> SimulationConfig:
    values = dict(
        initial=State(args.x1, args.x2),
        t_end=args.t_end,
        integrator=IntegratorKind(args.integrator),
        dt=args.dt,
        rel_tol=args.rel_tol,
        abs_tol=args.abs_tol,
        min_step=args.min_step,
        v_stop=args.v_stop,
        sample_interval=args.sample_interval,
    )
    values.update(overrides)
    return SimulationConfig(**values)


def _outpath(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _maybe_svg(args: argparse.Namespace, stem: str, trajectories: Sequence[Trajectory],
               labels: Sequence[str]) -> None:
    if args.format != "svg":
        return
    timeseries = [
        (label, [s.t for s in traj.samples], [s.state.x1 for s in traj.samples])
        for label, traj in zip(labels, trajectories)
    ]
    serialize.write_svg_lineplot(_outpath(args, f"{stem}.svg"), timeseries, title=f"{stem}: x1(t)")
    phase = [
        (label, [s.state.x1 for s in traj.samples], [s.state.x2 for s in traj.samples])
        for label, traj in zip(labels, trajectories)
    ]
    serialize.write_svg_lineplot(
        _outpath(args, f"{stem}_phase.svg"), phase, title=f"{stem}: phase plane"
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _controller(args)
    config = _sim_config(args)
    trajectory = simulate(spec, config)
    path = _outpath(args, "simulate.csv")
    serialize.write_trajectory_csv(path, trajectory)
    _maybe_svg(args, "simulate", [trajectory], [spec.law.value])
    print(path)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    linear_d = _resolve_d(args, args.k, ControlLaw.LINEAR)
    linear_spec = _controller(args, law=ControlLaw.LINEAR, d=linear_d)
    nonlinear_spec = _controller(args, law=ControlLaw.NONLINEAR, d=0.0)
    config = _sim_config(args)
    linear_traj = simulate(linear_spec, config)
    nonlinear_traj = simulate(nonlinear_spec, config)

    csv_path = _outpath(args, "compare.csv")
    serialize.write_compare_csv(
        csv_path,
        ["linear", "nonlinear"],
        [linear_traj, nonlinear_traj],
        comments=[f"# k={serialize.fmt(args.k)}", f"# d={serialize.fmt(linear_d)}"],
    )

    def windowed(window: Tuple[float, float]) -> Optional[Tuple[float, float]]:
        lo, hi = window
        return (lo, min(hi, args.t_end)) if min(hi, args.t_end) > lo else None

    linear_report = analysis.analyze(linear_traj, decay_window=windowed(LINEAR_FIT_WINDOW))
    nonlinear_report = analysis.analyze(
        nonlinear_traj, decay_window=windowed(NONLINEAR_FIT_WINDOW)
    )
    report_path = _outpath(args, "compare_report.json")
    serialize.write_report_json(
        report_path,
        {
            "k": args.k,
            "d": linear_d,
            "linear": serialize.report_dict(linear_report),
            "nonlinear": serialize.report_dict(nonlinear_report),
        },
    )
    _maybe_svg(args, "compare", [linear_traj, nonlinear_traj], ["linear", "nonlinear"])
    print(csv_path)
    print(report_path)
    return 0


def cmd_sweep_k(args: argparse.Namespace) -> int:
    trajectories = []
    for k in args.k_list:
        spec = _controller(args, law=ControlLaw.NONLINEAR, k=k, d=0.0)
        trajectories.append((k, simulate(spec, _sim_config(args))))
    summary = ["k,overshoot_count,settling_time,attractor_slope_error"]
    for k, trajectory in trajectories:
        path = _outpath(args, f"sweep_k{k:g}.csv")
        serialize.write_trajectory_csv(path, trajectory)
        report = analysis.analyze(trajectory)
        summary.append(
            ",".join(
                [
                    serialize.fmt(k),
                    str(report.overshoot_count),
                    "" if report.settling_time is None else serialize.fmt(report.settling_time),
                    ""
                    if report.attractor_slope_error is None
                    else serialize.fmt(report.attractor_slope_error),
                ]
            )
        )
    summary_path = _outpath(args, "sweep_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(summary) + "\n")
    _maybe_svg(
        args, "sweep_k",
        [traj for _, traj in trajectories], [f"k={k:g}" for k, _ in trajectories],
    )
    print(summary_path)
    return 0


def cmd_saturation_study(args: argparse.Namespace) -> int:
    runs: List[Tuple[float, float]] = [(k, args.s) for k in args.k_list]
    if args.include_unbounded:
        runs.append((max(args.k_list), math.inf))
    summary = ["k,s,overshoot_count,saturation_exit_time"]
    trajectories = []
    for k, s in runs:
        spec = _controller(args, law=ControlLaw.NONLINEAR, k=k, d=0.0, saturation=s)
        trajectory = simulate(spec, _sim_config(args))
        trajectories.append((k, s, trajectory))
        path = _outpath(args, f"saturation_k{k:g}_s{s:g}.csv")
        serialize.write_trajectory_csv(path, trajectory)
        report = analysis.analyze(trajectory)
        summary.append(
            ",".join(
                [
                    serialize.fmt(k),
                    serialize.fmt(s),
                    str(report.overshoot_count),
                    ""
                    if report.saturation_exit_time is None
                    else serialize.fmt(report.saturation_exit_time),
                ]
            )
        )
    summary_path = _outpath(args, "saturation_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(summary) + "\n")
    _maybe_svg(
        args, "saturation_study",
        [traj for _, _, traj in trajectories],
        [f"k={k:g} s={s:g}" for k, s, _ in trajectories],
    )
    print(summary_path)
    return 0


def cmd_portrait(args: argparse.Namespace) -> int:
    trajectories = []
    for radius in args.radii:
        for index in range(args.n_angles):
            angle = 2.0 * math.pi * index / args.n_angles
            initial = State(radius * math.cos(angle), radius * math.sin(angle))
            spec = _controller(args)
            config = _sim_config(args, initial=initial)
            trajectories.append(simulate(spec, config))
    path = _outpath(args, "portrait.csv")
    serialize.write_portrait_csv(path, trajectories)
    _maybe_svg(
        args, "portrait", trajectories,
        [f"run{i}" for i in range(len(trajectories))],
    )
    print(path)
    return 0


def cmd_passivity_map(args: argparse.Namespace) -> int:
    grid = analysis.GridSpec(
        -args.grid_extent, args.grid_extent, args.grid_res,
        -args.grid_extent, args.grid_extent, args.grid_res,
    )
    pmap = analysis.passivity_map(grid)
    path = _outpath(args, "passivity_map.csv")
    serialize.write_passivity_csv(
        path, pmap,
        comments=[f"# grid_extent={serialize.fmt(args.grid_extent)}",
                  f"# grid_res={args.grid_res}"],
    )
    print(path)
    return 0


def cmd_lyapunov_surface(args: argparse.Namespace) -> int:
    grid = analysis.GridSpec(
        -args.grid_extent, args.grid_extent, args.grid_res,
        -args.grid_extent, args.grid_extent, args.grid_res,
    )
    ftmap = analysis.finite_time_region(grid, args.k, args.alpha, args.epsilon_reg)
    path = _outpath(args, "lyapunov_surface.csv")
    serialize.write_finite_time_csv(
        path, ftmap,
        comments=[
            f"# k={serialize.fmt(args.k)}",
            f"# alpha={serialize.fmt(args.alpha)}",
            f"# grid_extent={serialize.fmt(args.grid_extent)}",
            f"# grid_res={args.grid_res}",
        ],
    )
    print(path)
    return 0


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="nldamp",
        description="Double-integrator set-point control: simulation and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    registry: Dict[str, argparse.ArgumentParser] = {}

    p_sim = sub.add_parser("simulate", help="one closed-loop run to CSV")
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="linear-critical vs nonlinear damping")
    _add_common(p_cmp)
    # Pure-relative tolerance and no energy stop: the nonlinear output decays
    # below 1e-20 energy before t=1, and the comparison and fit windows need
    # the deep tail resolved multiplicatively.
    p_cmp.set_defaults(func=cmd_compare, v_stop=0.0, abs_tol=1e-300)

    p_sweep = sub.add_parser("sweep-k", help="nonlinear runs over a gain list")
    _add_common(p_sweep)
    p_sweep.add_argument("--k-list", type=_parse_k_list, default=[10.0, 100.0, 1000.0])
    p_sweep.set_defaults(func=cmd_sweep_k)

    p_sat = sub.add_parser("saturation-study", help="bounded-control runs over gains")
    _add_common(p_sat)
    p_sat.add_argument("--k-list", type=_parse_k_list, default=[50.0, 100.0, 150.0, 200.0])
    p_sat.add_argument(
        "--include-unbounded", action=argparse.BooleanOptionalAction, default=True,
        help="also run the largest gain without saturation",
    )
    p_sat.set_defaults(func=cmd_saturation_study, s=25.0)

    p_port = sub.add_parser("portrait", help="ring of initial states, one CSV of blocks")
    _add_common(p_port)
    p_port.add_argument("--radii", type=_parse_float_list, default=[1.0, 2.0])
    p_port.add_argument("--n-angles", type=int, default=16)
    p_port.set_defaults(func=cmd_portrait)

    p_pass = sub.add_parser("passivity-map", help="per-cell passivity classes")
    _add_common(p_pass)
    p_pass.add_argument("--grid-extent", type=float, default=2.0)
    p_pass.add_argument("--grid-res", type=int, default=201)
    p_pass.set_defaults(func=cmd_passivity_map)

    p_lyap = sub.add_parser("lyapunov-surface", help="energy-rate vs alpha*sqrt(V) surfaces")
    _add_common(p_lyap)
    p_lyap.add_argument("--grid-extent", type=float, default=2.0)
    p_lyap.add_argument("--grid-res", type=int, default=201)
    p_lyap.set_defaults(func=cmd_lyapunov_surface)

    registry.update(
        {
            "simulate": p_sim,
            "compare": p_cmp,
            "sweep-k": p_sweep,
            "saturation-study": p_sat,
            "portrait": p_port,
            "passivity-map": p_pass,
            "lyapunov-surface": p_lyap,
        }
    )
    return parser, registry


def _apply_config_file(
    argv: Sequence[str],
    parser: argparse.ArgumentParser,
    registry: Dict[str, argparse.ArgumentParser],
) -> argparse.Namespace:
    """Load --config values as subparser defaults so flags still override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        file_values = _load_config_file(known.config)
        for sub_parser in registry.values():
            known_dests = {action.dest for action in sub_parser._actions}  # noqa: SLF001
            sub_parser.set_defaults(
                **{key: value for key, value in file_values.items() if key in known_dests}
            )
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, registry = build_parser()
    try:
        args = _apply_config_file(list(argv), parser, registry)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: integration failed {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
