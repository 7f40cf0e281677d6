"""Energy, passivity, convergence, and trajectory metrics.

All operations are pure; grid maps are vectorized with numpy and may be
evaluated cell-by-cell in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import AnalysisReport, DecayFit, FitModel, State, Trajectory

#: |x1| band over which the near-origin phase-slope ratio is measured.
DEFAULT_SLOPE_BAND = (1e-6, 1e-4)

#: Default regularization floor, matching the controller default.
DEFAULT_EPSILON_REG = 1e-12


def lyapunov(state: State, k: float) -> float:
    """Quadratic energy 0.5*x2^2 + 0.5*k*x1^2; zero only at the origin."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    return 0.5 * state.x2 * state.x2 + 0.5 * k * state.x1 * state.x1


def lyapunov_rate(state: State, epsilon_reg: float = DEFAULT_EPSILON_REG) -> float:
    """Energy rate -|x2|^3 / |x1| along the nonlinear closed loop.

    Always <= 0 and even in x2; the proportional gain cancels out of the
    chain rule, so the rate depends on the state alone. The denominator uses
    the same regularization floor as the controller.
    """
    if not epsilon_reg > 0:
        raise ValueError(f"epsilon_reg must be positive, got {epsilon_reg!r}")
    ax2 = abs(state.x2)
    if ax2 == 0.0:
        return 0.0
    return -(ax2 * ax2 * ax2) / max(abs(state.x1), epsilon_reg)


class PassivityClass(Enum):
    PASSIVE = "passive"
    NON_PASSIVE = "nonpassive"
    BOUNDARY = "boundary"


#: Integer codes used in passivity map arrays.
PASSIVITY_CODES = {
    PassivityClass.PASSIVE: 1,
    PassivityClass.BOUNDARY: 0,
    PassivityClass.NON_PASSIVE: -1,
}
_CODE_TO_CLASS = {v: c for c, v in PASSIVITY_CODES.items()}


def classify_passivity(state: State) -> PassivityClass:
    """Side of the power inequality |x2|/|x1| >= sign(x2)*sign(x1) at a state.

    Strict inequality either way classifies Passive/NonPassive; equality is
    Boundary. On the x2-axis the left side is unbounded, so any x1 = 0,
    x2 != 0 state is Passive; on the x1-axis the sign product vanishes and
    |x2|/|x1| = 0, so x2 = 0, x1 != 0 states sit on the Boundary. Quadrants
    II and IV are always Passive.
    """
    x1, x2 = state.x1, state.x2
    if x1 == 0.0 and x2 == 0.0:
        raise ValueError("passivity is undefined at the origin")
    if x1 == 0.0:
        return PassivityClass.PASSIVE
    lhs = abs(x2) / abs(x1)
    sign_product = (1.0 if x2 > 0 else -1.0 if x2 < 0 else 0.0) * (
        1.0 if x1 > 0 else -1.0
    )
    if lhs > sign_product:
        return PassivityClass.PASSIVE
    if lhs < sign_product:
        return PassivityClass.NON_PASSIVE
    return PassivityClass.BOUNDARY


def _axis_points(lo: float, hi: float, n: int) -> np.ndarray:
    """n evenly spaced points on [lo, hi].

    When the range is symmetric (lo == -hi) the lattice is built from a
    mirrored half so that negation maps the point set onto itself exactly
    (and, for odd n, contains 0.0 exactly).
    """
    if lo == -hi and hi > 0:
        if n % 2 == 1:
            half = (n - 1) // 2
            pos = hi * np.arange(1, half + 1, dtype=float) / half
            return np.concatenate([-pos[::-1], [0.0], pos])
        half = n // 2
        pos = hi * (2.0 * np.arange(half, dtype=float) + 1.0) / (n - 1)
        return np.concatenate([-pos[::-1], pos])
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation lattice in the (x1, x2) plane."""

    x1_min: float
    x1_max: float
    n_x1: int
    x2_min: float
    x2_max: float
    n_x2: int

    def __post_init__(self) -> None:
        if not self.x1_min < self.x1_max:
            raise ValueError("x1 range must be strictly ordered")
        if not self.x2_min < self.x2_max:
            raise ValueError("x2 range must be strictly ordered")
        if self.n_x1 < 2 or self.n_x2 < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def x1_points(self) -> np.ndarray:
        return _axis_points(self.x1_min, self.x1_max, self.n_x1)

    def x2_points(self) -> np.ndarray:
        return _axis_points(self.x2_min, self.x2_max, self.n_x2)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1_points(), self.x2_points(), indexing="ij")


def default_grid(extent: float = 2.0, resolution: int = 201) -> GridSpec:
    return GridSpec(-extent, extent, resolution, -extent, extent, resolution)


@dataclass(frozen=True)
class RegionMask:
    """Boolean matrix over a grid; cells[i, j] belongs to (x1_i, x2_j)."""

    grid: GridSpec
    cells: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.grid.n_x1, self.grid.n_x2)
        if self.cells.shape != expected or self.cells.dtype != np.bool_:
            raise ValueError(f"cells must be a boolean array of shape {expected}")


@dataclass(frozen=True)
class PassivityMap:
    """Per-cell passivity classes over a grid, stored as int8 codes."""

    grid: GridSpec
    codes: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.grid.n_x1, self.grid.n_x2)
        if self.codes.shape != expected or self.codes.dtype != np.int8:
            raise ValueError(f"codes must be an int8 array of shape {expected}")

    def class_at(self, i: int, j: int) -> PassivityClass:
        return _CODE_TO_CLASS[int(self.codes[i, j])]


def passivity_map(grid: GridSpec) -> PassivityMap:
    """Classify every grid point; the origin cell is Boundary by convention."""
    x1g, x2g = grid.mesh()
    lhs = np.abs(x2g)
    rhs = np.sign(x2g) * np.sign(x1g) * np.abs(x1g)
    # Compare |x2| against sign(x2)*sign(x1)*|x1|: multiplying the condition
    # through by |x1| > 0 keeps the x2-axis (|x1| = 0, lhs > 0) Passive.
    codes = np.zeros(x1g.shape, dtype=np.int8)
    codes[lhs > rhs] = PASSIVITY_CODES[PassivityClass.PASSIVE]
    codes[lhs < rhs] = PASSIVITY_CODES[PassivityClass.NON_PASSIVE]
    codes[(x1g == 0.0) & (x2g == 0.0)] = PASSIVITY_CODES[PassivityClass.BOUNDARY]
    return PassivityMap(grid=grid, codes=codes)


def attractor_slope(k: float) -> float:
    """Slope -sqrt(k) of the turning-point locus x2 + sqrt(k)*x1 = 0."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    return -math.sqrt(k)


def finite_time_condition(
    state: State, k: float, alpha: float, epsilon_reg: float = DEFAULT_EPSILON_REG
) -> bool:
    """Whether the decay rate dominates alpha*sqrt(V) at this state.

    True iff |x2|^3 / max(|x1|, eps) >= alpha*(sqrt(2)/2)*sqrt(x2^2 + k*x1^2),
    i.e. the energy obeys Vdot + alpha*sqrt(V) <= 0 there. The origin returns
    False by convention (the bound is vacuous at the equilibrium itself).
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    x1, x2 = state.x1, state.x2
    if x1 == 0.0 and x2 == 0.0:
        return False
    lhs = abs(x2) ** 3 / max(abs(x1), epsilon_reg)
    rhs = alpha * (math.sqrt(2.0) / 2.0) * math.sqrt(x2 * x2 + k * x1 * x1)
    return lhs >= rhs


@dataclass(frozen=True)
class FiniteTimeMap:
    """Region mask plus the two surfaces it compares.

    ``vdot_magnitude`` is |Vdot| per cell and ``alpha_sqrt_v`` is
    alpha*sqrt(V); the mask holds where the first dominates the second.
    """

    mask: RegionMask
    vdot_magnitude: np.ndarray
    alpha_sqrt_v: np.ndarray

    def __post_init__(self) -> None:
        shape = self.mask.cells.shape
        if self.vdot_magnitude.shape != shape or self.alpha_sqrt_v.shape != shape:
            raise ValueError("surface arrays must match the mask shape")


def finite_time_region(
    grid: GridSpec, k: float, alpha: float, epsilon_reg: float = DEFAULT_EPSILON_REG
) -> FiniteTimeMap:
    """Evaluate the finite-time dominance condition over a grid."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    x1g, x2g = grid.mesh()
    vdot_mag = np.abs(x2g) ** 3 / np.maximum(np.abs(x1g), epsilon_reg)
    alpha_sqrt_v = alpha * (math.sqrt(2.0) / 2.0) * np.sqrt(x2g * x2g + k * x1g * x1g)
    cells = vdot_mag >= alpha_sqrt_v
    cells[(x1g == 0.0) & (x2g == 0.0)] = False
    return FiniteTimeMap(
        mask=RegionMask(grid=grid, cells=cells),
        vdot_magnitude=vdot_mag,
        alpha_sqrt_v=alpha_sqrt_v,
    )


def convergence_time_bound(v0: float, alpha: float) -> float:
    """Upper bound 2*sqrt(V0)/alpha on the time to reach the origin."""
    if v0 < 0:
        raise ValueError(f"v0 must be >= 0, got {v0!r}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return 2.0 * math.sqrt(v0) / alpha


def saturation_exit_bound(x1_0: float, x2_0: float, saturation: float) -> float:
    """Time after which a positive-saturation episode from (X1, X2) must end.

    Along the saturated parabola x2(t) = X2 + S*t, x1(t) = X1 + X2*t + S*t^2/2
    both terms of the raw control -k*x1 - x2^2/|x1|*sign(x2) are nonpositive
    once x2 >= 0 and x1 >= 0, which forces the raw value below +S. The bound
    is the time by which both hold: max of -X2/S and the larger root of
    x1(t) = 0. For a negative-saturation episode negate both inputs.
    """
    if not saturation > 0 or math.isinf(saturation):
        raise ValueError(f"saturation must be positive and finite, got {saturation!r}")
    t_velocity = -x2_0 / saturation
    disc = x2_0 * x2_0 - 2.0 * saturation * x1_0
    t_position = (-x2_0 + math.sqrt(disc)) / saturation if disc >= 0.0 else 0.0
    return max(0.0, t_velocity, t_position)


@dataclass(frozen=True)
class SaturationEpisode:
    """One maximal run of saturated samples.

    ``start_time``/``start_state`` come from the boundary sample when the
    entry instant was located by the integrator, otherwise from the first
    saturated sample. ``end_time`` is None when the trajectory ends while
    still saturated.
    """

    start_time: float
    start_state: State
    sign: int
    end_time: Optional[float]

    @property
    def duration(self) -> Optional[float]:
        return None if self.end_time is None else self.end_time - self.start_time


def saturation_episodes(trajectory: Trajectory) -> List[SaturationEpisode]:
    """Extract maximal saturated runs with their measured boundaries."""
    s_limit = trajectory.controller.saturation
    samples = trajectory.samples
    episodes: List[SaturationEpisode] = []
    i = 0
    n = len(samples)
    while i < n:
        if not samples[i].saturated:
            i += 1
            continue
        j = i
        while j + 1 < n and samples[j + 1].saturated:
            j += 1
        sign = 1 if samples[i].v_raw > 0 else -1
        start = samples[i]
        if i > 0 and math.isfinite(s_limit):
            prev = samples[i - 1]
            if abs(abs(prev.v_raw) - s_limit) <= 1e-6 * max(1.0, s_limit):
                start = prev  # boundary sample located by the integrator
        end_time = samples[j + 1].t if j + 1 < n else None
        episodes.append(
            SaturationEpisode(
                start_time=start.t, start_state=start.state, sign=sign, end_time=end_time
            )
        )
        i = j + 1
    return episodes


def _window_arrays(
    trajectory: Trajectory, window: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"window must be ordered, got {window!r}")
    ts = np.array([s.t for s in trajectory.samples])
    x1 = np.array([s.state.x1 for s in trajectory.samples])
    mask = (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
    return ts[mask], x1[mask]


def _poly_r_squared(t: np.ndarray, y: np.ndarray, coeffs: np.ndarray) -> float:
    residuals = y - np.polyval(coeffs, t)
    ss_res = float(np.sum(residuals * residuals))
    centered = y - y.mean()
    ss_tot = float(np.sum(centered * centered))
    if ss_tot == 0.0:
        return 1.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def fit_log_poly(
    trajectory: Trajectory, window: Tuple[float, float], degree: int
) -> DecayFit:
    """Least-squares polynomial fit of log10|x1| against t over a window."""
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree!r}")
    ts, x1 = _window_arrays(trajectory, window)
    if len(ts) < degree + 2:
        raise ValueError(f"window {window!r} holds too few samples ({len(ts)})")
    if np.any(x1 == 0.0) or (np.any(x1 > 0) and np.any(x1 < 0)):
        raise ValueError(f"window {window!r} contains a zero or sign change of x1")
    y = np.log10(np.abs(x1))
    coeffs = np.polyfit(ts, y, degree)
    model = FitModel.LINEAR if degree == 1 else FitModel.QUADRATIC
    return DecayFit(
        model=model,
        coefficients=tuple(float(c) for c in coeffs),
        r_squared=_poly_r_squared(ts, y, coeffs),
    )


def fit_log_decay(
    trajectory: Trajectory,
    window: Tuple[float, float],
    improvement_threshold: float = 0.01,
) -> DecayFit:
    """Fit log10|x1| with degree 1 and 2 and pick the better-supported shape.

    Returns the quadratic fit when it improves r_squared by more than the
    threshold, otherwise the linear one; use ``fit_log_poly`` to inspect both.
    """
    linear = fit_log_poly(trajectory, window, 1)
    quadratic = fit_log_poly(trajectory, window, 2)
    if quadratic.r_squared - linear.r_squared > improvement_threshold:
        return quadratic
    return linear


def _overshoot_count(x1_values: Sequence[float]) -> int:
    signs = [1 if v > 0 else -1 for v in x1_values if v != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _default_decay_window(trajectory: Trajectory) -> Optional[Tuple[float, float]]:
    """Largest from-start window over which x1 keeps one strict sign."""
    samples = trajectory.samples
    sign0 = 0
    start = None
    end = None
    for s in samples:
        v = s.state.x1
        if sign0 == 0:
            if v != 0.0:
                sign0 = 1 if v > 0 else -1
                start = s.t
                end = s.t
            continue
        if v == 0.0 or (v > 0) != (sign0 > 0):
            break
        end = s.t
    if start is None or end is None or not end > start:
        return None
    return (start, end)


def analyze(
    trajectory: Trajectory,
    settle_threshold: Optional[float] = None,
    decay_window: Optional[Tuple[float, float]] = None,
    slope_band: Tuple[float, float] = DEFAULT_SLOPE_BAND,
) -> AnalysisReport:
    """Summarize a trajectory into the standard report metrics.

    ``settle_threshold`` defaults to 1e-6 * max(1, |x1(0)|). The overshoot
    count is the number of strict sign changes of x1 across samples. The
    attractor-slope error is the median relative deviation of x2/x1 from
    -sqrt(k) over samples whose |x1| lies inside ``slope_band``. The decay
    fit runs over ``decay_window`` when given, else over the largest
    constant-sign window from the start.
    """
    samples = trajectory.samples
    if not samples:
        raise ValueError("trajectory has no samples")
    k = trajectory.controller.k
    if settle_threshold is None:
        settle_threshold = 1e-6 * max(1.0, abs(samples[0].state.x1))
    if not settle_threshold > 0:
        raise ValueError(f"settle_threshold must be positive, got {settle_threshold!r}")

    x1s = [s.state.x1 for s in samples]
    overshoots = _overshoot_count(x1s)

    settling: Optional[float] = None
    if abs(samples[-1].state.x1) <= settle_threshold:
        # first sample time after which |x1| stays below the threshold
        settling = samples[0].t
        for idx in range(len(samples) - 1, -1, -1):
            if abs(samples[idx].state.x1) > settle_threshold:
                settling = samples[idx + 1].t
                break

    slope = math.sqrt(k)
    deviations = [
        abs(s.state.x2 / s.state.x1 + slope) / slope
        for s in samples
        if slope_band[0] <= abs(s.state.x1) <= slope_band[1]
    ]
    slope_error = float(np.median(deviations)) if deviations else None

    window = decay_window if decay_window is not None else _default_decay_window(trajectory)
    fit: Optional[DecayFit] = None
    if window is not None:
        try:
            fit = fit_log_decay(trajectory, window)
        except ValueError:
            fit = None

    exit_time: Optional[float] = None
    for prev, cur in zip(samples, samples[1:]):
        if prev.saturated and not cur.saturated:
            exit_time = cur.t

    return AnalysisReport(
        overshoot_count=overshoots,
        settling_time=settling,
        final_V=samples[-1].V,
        decay_fit=fit,
        attractor_slope_error=slope_error,
        saturation_exit_time=exit_time,
    )
