"""File formats for trajectories, reports, and grid maps.

CSV is the primary output. Floats are written with 17 significant digits so
every value round-trips exactly through decimal text; all writers are
deterministic (no timestamps, no randomness), so re-running a command with
the same configuration reproduces files byte for byte.
"""

from __future__ import annotations

import json
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .analysis import (
    FiniteTimeMap,
    PassivityMap,
    _CODE_TO_CLASS,
)
from .model import (
    AnalysisReport,
    ControllerSpec,
    ControlLaw,
    IntegratorKind,
    Sample,
    SimulationConfig,
    State,
    Trajectory,
)

#: Column layout of a trajectory CSV.
TRAJECTORY_HEADER = "t,x1,x2,v_raw,v,saturated,V,Vdot"


def fmt(value: float) -> str:
    """Decimal text at 17 significant digits (exact double round-trip)."""
    if value == 0.0:
        return "0"  # normalize -0.0
    return f"{value:.17g}"


def _controller_comments(spec: ControllerSpec) -> List[str]:
    return [
        f"# law={spec.law.value}",
        f"# k={fmt(spec.k)}",
        f"# d={fmt(spec.d)}",
        f"# s={fmt(spec.saturation)}",
        f"# epsilon_reg={fmt(spec.epsilon_reg)}",
        f"# damping_cap={fmt(spec.damping_cap)}",
    ]


def _config_comments(config: SimulationConfig) -> List[str]:
    return [
        f"# x1_0={fmt(config.initial.x1)}",
        f"# x2_0={fmt(config.initial.x2)}",
        f"# t_end={fmt(config.t_end)}",
        f"# integrator={config.integrator.value}",
        f"# dt={fmt(config.dt)}",
        f"# rel_tol={fmt(config.rel_tol)}",
        f"# abs_tol={fmt(config.abs_tol)}",
        f"# min_step={fmt(config.min_step)}",
        f"# v_stop={fmt(config.v_stop)}",
        f"# sample_interval={fmt(config.sample_interval)}",
    ]


def _sample_row(sample: Sample) -> str:
    return ",".join(
        [
            fmt(sample.t),
            fmt(sample.state.x1),
            fmt(sample.state.x2),
            fmt(sample.v_raw),
            fmt(sample.v),
            "1" if sample.saturated else "0",
            fmt(sample.V),
            fmt(sample.V_dot),
        ]
    )


def trajectory_csv_lines(trajectory: Trajectory) -> List[str]:
    lines = _controller_comments(trajectory.controller)
    lines += _config_comments(trajectory.config)
    lines.append(TRAJECTORY_HEADER)
    lines += [_sample_row(s) for s in trajectory.samples]
    return lines


def write_trajectory_csv(path: str, trajectory: Trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(trajectory_csv_lines(trajectory)) + "\n")


def _parse_comment(line: str, params: Dict[str, str]) -> None:
    body = line[1:].strip()
    if "=" in body:
        key, _, value = body.partition("=")
        params[key.strip()] = value.strip()


def _trajectory_from_block(lines: Sequence[str]) -> Trajectory:
    params: Dict[str, str] = {}
    rows: List[str] = []
    saw_header = False
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            _parse_comment(stripped, params)
        elif stripped == TRAJECTORY_HEADER:
            saw_header = True
        else:
            rows.append(stripped)
    if not saw_header:
        raise ValueError(f"missing trajectory header line {TRAJECTORY_HEADER!r}")
    spec = ControllerSpec(
        law=ControlLaw(params["law"]),
        k=float(params["k"]),
        d=float(params["d"]),
        saturation=float(params["s"]),
        epsilon_reg=float(params["epsilon_reg"]),
        damping_cap=float(params["damping_cap"]),
    )
    config = SimulationConfig(
        initial=State(float(params["x1_0"]), float(params["x2_0"])),
        t_end=float(params["t_end"]),
        integrator=IntegratorKind(params["integrator"]),
        dt=float(params["dt"]),
        rel_tol=float(params["rel_tol"]),
        abs_tol=float(params["abs_tol"]),
        min_step=float(params["min_step"]),
        v_stop=float(params["v_stop"]),
        sample_interval=float(params["sample_interval"]),
    )
    samples = []
    for row in rows:
        fields = row.split(",")
        if len(fields) != 8:
            raise ValueError(f"malformed sample row: {row!r}")
        samples.append(
            Sample(
                t=float(fields[0]),
                state=State(float(fields[1]), float(fields[2])),
                v_raw=float(fields[3]),
                v=float(fields[4]),
                saturated=fields[5] == "1",
                V=float(fields[6]),
                V_dot=float(fields[7]),
            )
        )
    return Trajectory(controller=spec, config=config, samples=tuple(samples))


def parse_trajectory_csv(path: str) -> Trajectory:
    with open(path, "r", encoding="utf-8") as handle:
        return _trajectory_from_block(handle.read().splitlines())


def write_portrait_csv(path: str, trajectories: Sequence[Trajectory]) -> None:
    """Concatenated per-trajectory blocks, separated by blank lines."""
    chunks = []
    for index, trajectory in enumerate(trajectories):
        lines = [f"# trajectory={index}"] + trajectory_csv_lines(trajectory)
        chunks.append("\n".join(lines))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n\n".join(chunks) + "\n")


def parse_portrait_csv(path: str) -> List[Trajectory]:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    blocks = [block for block in text.split("\n\n") if block.strip()]
    return [_trajectory_from_block(block.splitlines()) for block in blocks]


def write_compare_csv(
    path: str,
    labels: Sequence[str],
    trajectories: Sequence[Trajectory],
    comments: Sequence[str] = (),
) -> None:
    """Aligned-time CSV with one column group per controller.

    Rows cover the regular sample times shared by all trajectories.
    """
    if len(labels) != len(trajectories):
        raise ValueError("labels and trajectories must pair up")
    by_time: List[Dict[float, Sample]] = [
        {s.t: s for s in traj.samples} for traj in trajectories
    ]
    common = set(by_time[0])
    for table in by_time[1:]:
        common &= set(table)
    times = sorted(common)
    columns = ["x1", "x2", "v_raw", "v", "saturated", "V", "Vdot"]
    header = "t," + ",".join(f"{col}_{label}" for label in labels for col in columns)
    lines = list(comments)
    lines.append(header)
    for t in times:
        fields = [fmt(t)]
        for table in by_time:
            s = table[t]
            fields += [
                fmt(s.state.x1),
                fmt(s.state.x2),
                fmt(s.v_raw),
                fmt(s.v),
                "1" if s.saturated else "0",
                fmt(s.V),
                fmt(s.V_dot),
            ]
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def decay_fit_dict(fit) -> Optional[Dict[str, object]]:
    if fit is None:
        return None
    return {
        "model": fit.model.value,
        "coefficients": list(fit.coefficients),
        "r_squared": fit.r_squared,
    }


def report_dict(report: AnalysisReport) -> Dict[str, object]:
    return {
        "overshoot_count": report.overshoot_count,
        "settling_time": report.settling_time,
        "final_V": report.final_V,
        "decay_fit": decay_fit_dict(report.decay_fit),
        "attractor_slope_error": report.attractor_slope_error,
        "saturation_exit_time": report.saturation_exit_time,
    }


def write_report_json(path: str, payload: Dict[str, object]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def write_passivity_csv(path: str, pmap: PassivityMap, comments: Sequence[str] = ()) -> None:
    x1s = pmap.grid.x1_points()
    x2s = pmap.grid.x2_points()
    lines = list(comments)
    lines.append("x1,x2,class")
    for i, x1 in enumerate(x1s):
        for j, x2 in enumerate(x2s):
            cls = _CODE_TO_CLASS[int(pmap.codes[i, j])]
            lines.append(f"{fmt(float(x1))},{fmt(float(x2))},{cls.value}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def write_finite_time_csv(path: str, ftmap: FiniteTimeMap, comments: Sequence[str] = ()) -> None:
    grid = ftmap.mask.grid
    x1s = grid.x1_points()
    x2s = grid.x2_points()
    lines = list(comments)
    lines.append("x1,x2,vdot_magnitude,alpha_sqrt_v,condition_holds")
    for i, x1 in enumerate(x1s):
        for j, x2 in enumerate(x2s):
            lines.append(
                ",".join(
                    [
                        fmt(float(x1)),
                        fmt(float(x2)),
                        fmt(float(ftmap.vdot_magnitude[i, j])),
                        fmt(float(ftmap.alpha_sqrt_v[i, j])),
                        "1" if ftmap.mask.cells[i, j] else "0",
                    ]
                )
            )
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


_SVG_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def write_svg_lineplot(
    path: str,
    series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
    title: str = "",
    width: int = 720,
    height: int = 480,
) -> None:
    """Minimal deterministic SVG polyline plot (a convenience, not data)."""
    margin = 50.0
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="#888"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="25" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for index, (label, xs, ys) in enumerate(series):
        color = _SVG_PALETTE[index % len(_SVG_PALETTE)]
        points = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * index + 12}" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")
