"""Monte-Carlo drivers and regressions over the growth and fire processes.

Estimates are deterministic functions of (parameters, base seed, samples):
sample i runs under ``derive_seed(base_seed, i)``, and aggregation is an
order-independent merge, so worker pools do not change results.

Event conventions for the proof events at a boundary site w = (ceil(x)+n, 0)
with rhombus target S = surface(w, n, phi) clipped to the half-plane, and
T = first time w connects to S in the growth process:

* C: T < t_slice, with t_slice = t_c - n^(-3/4+delta);
* D: T in [t_slice, t_c) and w's clock jumps in (T, t_c];
* B: T in [0, t_c) and w's clock jumps in (T, t_c];
* A: first time w connects to the cone in the fire process precedes the
  last jump of w's clock before t_c.

Sample-wise, A implies B, C implies the connection part of B, and
(B and not C) equals D.  Left-side events reduce to right-side events of
the reflected parameters.
"""

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from . import clocks, firesim, percolation
from .clocks import T_C, derive_seed
from .lattice import (ConeRegion, RhombusSurface, Site, TubeRegion, Window,
                      half_plane_neighbors)
from .percolation import (
    BELOW_FLOOR,
    _connection_time_floor,
    first_connection_time,
    is_connected,
    one_arm_indicator,
    sample_configuration,
    window_for_rhombus,
)

DEFAULT_PHI = math.pi / 3
DEFAULT_DELTA = 1.0 / 24.0


class FitError(RuntimeError):
    """Degenerate regression input (e.g. all-zero estimates)."""


@dataclass(frozen=True)
class EstimateResult:
    """Bernoulli point estimate with a Wilson confidence interval."""

    point: float
    n_samples: int
    ci_low: float
    ci_high: float
    successes: int

    def se(self) -> float:
        p = self.point
        return math.sqrt(max(p * (1.0 - p), 1e-12) / self.n_samples)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval by default; robust at few successes."""
    if n <= 0:
        raise ValueError("need n >= 1")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return min(lo, p), max(hi, p)


def make_estimate(successes: int, n: int) -> EstimateResult:
    lo, hi = wilson_interval(successes, n)
    return EstimateResult(successes / n, n, lo, hi, successes)


@dataclass(frozen=True)
class FitResult:
    """Least-squares line with slope uncertainty and transform tags."""

    slope: float
    intercept: float
    slope_se: float
    slope_ci: tuple[float, float]
    r2: float
    residual_norm: float
    n_points: int
    x_transform: str
    y_transform: str
    model: str = "linear"


def linear_fit(x, y, x_transform: str = "id", y_transform: str = "id",
               model: str = "linear", alpha: float = 0.05) -> FitResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        raise FitError("need at least 2 points")
    xb, yb = x.mean(), y.mean()
    sxx = float(((x - xb) ** 2).sum())
    if sxx == 0.0:
        raise FitError("degenerate abscissae")
    slope = float(((x - xb) * (y - yb)).sum() / sxx)
    intercept = yb - slope * xb
    resid = y - (intercept + slope * x)
    sse = float((resid ** 2).sum())
    syy = float(((y - yb) ** 2).sum())
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    if n > 2:
        sigma2 = sse / (n - 2)
        se = math.sqrt(sigma2 / sxx)
        tcrit = float(stats.t.ppf(1.0 - alpha / 2.0, n - 2))
        ci = (slope - tcrit * se, slope + tcrit * se)
    else:
        se, ci = math.nan, (-math.inf, math.inf)
    return FitResult(slope, intercept, se, ci, r2, math.sqrt(sse), n,
                     x_transform, y_transform, model)


def _pmap(pool_map, fn, items):
    return list((pool_map or map)(fn, items))


# ---------------------------------------------------------------------------
# One-arm probabilities and correlation length


def _sample_one_arm(seed: int, n: int, t: float, phi: float,
                    half_plane: bool, engine: str) -> bool:
    return one_arm_indicator(n, t, phi, seed, half_plane, engine)


def estimate_one_arm(n: int, t: float, phi: float, samples: int,
                     half_plane: bool, base_seed: int, engine: str = "auto",
                     pool_map=None) -> EstimateResult:
    """Monte-Carlo one-arm probability with Wilson CI."""
    if samples < 1:
        raise ValueError("need samples >= 1")
    if not 0.0 <= t <= T_C + 1e-12:
        raise ValueError("time must lie in [0, t_c]")
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    fn = partial(_sample_one_arm, n=n, t=t, phi=phi,
                 half_plane=half_plane, engine=engine)
    hits = sum(_pmap(pool_map, fn, seeds))
    return make_estimate(hits, samples)


@dataclass
class XiFit:
    """Correlation-length estimate from a semi-log one-arm decay fit."""

    xi: float
    xi_ci: tuple[float, float]
    fit: FitResult
    points: list[tuple[int, EstimateResult]]
    warnings: list[str] = field(default_factory=list)


def fit_decay(n_values, p_values, model: str = "n_exp") -> FitResult:
    """Semi-log fit of one-arm decay; ``n_exp`` divides out the linear
    prefactor of the upper-bound form, ``exp`` fits a bare exponential."""
    n_arr = np.asarray(n_values, dtype=np.float64)
    p_arr = np.asarray(p_values, dtype=np.float64)
    if (p_arr <= 0).any():
        raise FitError("nonpositive probabilities in decay fit")
    if model == "exp":
        y = np.log(p_arr)
    elif model == "n_exp":
        y = np.log(p_arr / n_arr)
    else:
        raise ValueError(f"unknown decay model {model!r}")
    return linear_fit(n_arr, y, x_transform="id", y_transform="log", model=model)


def xi_from_fit(fit: FitResult) -> tuple[float, tuple[float, float]]:
    if not fit.slope < 0:
        raise FitError("one-arm estimates do not decay")
    xi = -1.0 / fit.slope
    lo, hi = fit.slope_ci
    xi_lo = -1.0 / lo if lo < 0 else math.inf
    xi_hi = -1.0 / hi if hi < 0 else math.inf
    return xi, (xi_lo, xi_hi)


def fit_correlation_length(t: float, phi: float, n_list, samples_per_n: int,
                           base_seed: int, model: str = "n_exp",
                           half_plane: bool = False, engine: str = "auto",
                           pool_map=None) -> XiFit:
    """Correlation length at a subcritical time from one-arm decay."""
    if not t < T_C:
        raise ValueError("correlation length needs t < t_c")
    n_list = sorted(set(int(n) for n in n_list))
    if len(n_list) < 4:
        raise ValueError("need at least 4 rhombus sizes")
    warnings: list[str] = []
    points: list[tuple[int, EstimateResult]] = []
    for i, n in enumerate(n_list):
        est = estimate_one_arm(n, t, phi, samples_per_n, half_plane,
                               derive_seed(base_seed, 10_000 + i), engine, pool_map)
        points.append((n, est))
        if 0 < est.successes < 20:
            warnings.append(f"n={n}: only {est.successes} successes")
    usable = [(n, e.point) for n, e in points if e.successes > 0]
    if len(usable) == 0:
        raise FitError("all one-arm estimates are zero")
    if len(usable) < 3:
        raise FitError("fewer than 3 nonzero one-arm estimates")
    dropped = len(points) - len(usable)
    if dropped:
        warnings.append(f"dropped {dropped} zero-success points from the fit")
    fit = fit_decay([n for n, _ in usable], [p for _, p in usable], model)
    xi, ci = xi_from_fit(fit)
    return XiFit(xi, ci, fit, points, warnings)


def xi_scan_n_list(t: float, multipliers=(0.5, 0.8, 1.2, 1.7, 2.3)) -> list[int]:
    """Deterministic rhombus sizes spanning the expected correlation length.

    The multipliers are relative to the bare power law; the measured decay
    length runs at roughly half of it in this range, so the list probes
    about 1 to 4.5 decay lengths.
    """
    xi_guess = (T_C - t) ** (-4.0 / 3.0)
    ns = sorted({max(3, round(xi_guess * m)) for m in multipliers})
    extra = 1
    while len(ns) < 4:
        ns = sorted(set(ns) | {max(ns) + extra})
        extra += 1
    return ns


@dataclass
class XiScan:
    xis: list[tuple[float, XiFit]]  # (t, fit) pairs
    fit: FitResult                  # log xi against log(t_c - t)


def fit_xi_scan(t_values, xi_values) -> FitResult:
    gaps = np.asarray([T_C - t for t in t_values], dtype=np.float64)
    xis = np.asarray(xi_values, dtype=np.float64)
    if (gaps <= 0).any() or (xis <= 0).any():
        raise FitError("xi scan needs t < t_c and positive xi")
    return linear_fit(np.log(gaps), np.log(xis),
                      x_transform="log", y_transform="log", model="powerlaw")


def scan_xi_exponent(t_list, phi: float, samples_per_n: int, base_seed: int,
                     model: str = "n_exp", pool_map=None) -> XiScan:
    """Divergence exponent of the correlation length approaching t_c."""
    t_list = list(t_list)
    if len(t_list) < 3:
        raise ValueError("need at least 3 times")
    if any(t >= T_C for t in t_list):
        raise ValueError("all times must be < t_c")
    xis = []
    for j, t in enumerate(sorted(t_list)):
        xf = fit_correlation_length(t, phi, xi_scan_n_list(t), samples_per_n,
                                    derive_seed(base_seed, 77_000 + j),
                                    model=model, pool_map=pool_map)
        xis.append((t, xf))
    fit = fit_xi_scan([t for t, _ in xis], [xf.xi for _, xf in xis])
    return XiScan(xis, fit)


# ---------------------------------------------------------------------------
# Proof events


@dataclass(frozen=True)
class EventParams:
    """Geometry and cutoff parameters for the proof events."""

    n: int
    x: float = 0.0
    phi: float = DEFAULT_PHI
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.delta < 1.0 / 12.0:
            raise ValueError("delta must lie in (0, 1/12)")
        if not 0.0 < self.phi < math.pi / 2:
            raise ValueError("phi must lie in (0, pi/2)")
        if not self.slice_time > 0.0:
            raise ValueError(
                f"n={self.n} too small: t_c - n^(-3/4+delta) must be positive")

    @property
    def slice_time(self) -> float:
        return T_C - float(self.n) ** (-0.75 + self.delta)

    @property
    def w_site(self) -> Site:
        return (math.ceil(self.x) + self.n, 0)

    def reflected(self) -> "EventParams":
        return EventParams(self.n, -self.x, self.phi, self.delta)

    def surface(self) -> RhombusSurface:
        return RhombusSurface(self.w_site, self.n, self.phi)

    def cone(self) -> ConeRegion:
        return ConeRegion(self.x, self.phi)

    def window(self) -> Window:
        return window_for_rhombus(self.w_site, self.n, self.phi, half_plane=True)


def _resolve_side(params: EventParams, side: str) -> EventParams:
    if side == "right":
        return params
    if side == "left":
        return params.reflected()
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def _sample_event_c(seed: int, params: EventParams) -> bool:
    config = sample_configuration(params.window(), params.slice_time, seed, True)
    return is_connected(params.w_site, params.surface(), config)


def estimate_event_C(params: EventParams, samples: int, base_seed: int,
                     side: str = "right", pool_map=None) -> EstimateResult:
    """Connection to the rhombus surface before the time slice."""
    params = _resolve_side(params, side)
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    hits = sum(_pmap(pool_map, partial(_sample_event_c, params=params), seeds))
    return make_estimate(hits, samples)


def _sample_event_d(seed: int, params: EventParams) -> bool:
    # A jump of w's clock in (t_slice, t_c] is necessary: with T >= t_slice,
    # any jump in (T, t_c] lies there.  Checking it first skips the
    # expensive connection computation on ~98% of samples at large n.
    if not clocks.jumps_in(seed, params.w_site, params.slice_time, T_C):
        return False
    res = _connection_time_floor(params.w_site, params.surface(), params.window(),
                                 seed, T_C, True, params.slice_time)
    if res is BELOW_FLOOR or res is None:
        return False
    if not res < T_C:
        return False
    return bool(clocks.jumps_in(seed, params.w_site, res, T_C))


def estimate_event_D(params: EventParams, samples: int, base_seed: int,
                     side: str = "right", pool_map=None) -> EstimateResult:
    """Late connection combined with a late jump of w's own clock."""
    params = _resolve_side(params, side)
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    hits = sum(_pmap(pool_map, partial(_sample_event_d, params=params), seeds))
    return make_estimate(hits, samples)


def event_d_components(params: EventParams, seed: int) -> tuple[bool, bool]:
    """The two independent factors of the D upper bound: connection time in
    the slice window, and a jump of w's clock inside the slice."""
    res = _connection_time_floor(params.w_site, params.surface(), params.window(),
                                 seed, T_C, True, params.slice_time)
    conn = res is not BELOW_FLOOR and res is not None and res < T_C
    clock = bool(clocks.jumps_in(seed, params.w_site, params.slice_time, T_C))
    return conn, clock


def _sample_event_b(seed: int, params: EventParams, horizon: float) -> bool:
    if horizon <= 0.0:
        return False
    jumps = clocks.jumps_in(seed, params.w_site, 0.0, horizon)
    if not jumps:
        return False
    t = first_connection_time(params.w_site, params.surface(), params.window(),
                              seed, horizon, True)
    if t is None or not t < horizon:
        return False
    return jumps[-1] > t


def estimate_event_B(params: EventParams, samples: int, base_seed: int,
                     side: str = "right", horizon: float = T_C,
                     pool_map=None) -> EstimateResult:
    """Connection at any time before the horizon with a later w-jump."""
    params = _resolve_side(params, side)
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    hits = sum(_pmap(pool_map, partial(_sample_event_b, params=params,
                                       horizon=horizon), seeds))
    return make_estimate(hits, samples)


class _ConeConnectionObserver:
    """Tracks the set of fire-process sites connected to w's neighborhood
    and records the first time that set reaches distance 1 of the cone."""

    def __init__(self, run_window: Window, w: Site, cone: ConeRegion):
        self.window = run_window
        self.near_cone = percolation.target_mask(run_window, cone, True)
        self.in_R = np.zeros((run_window.n_rows, run_window.n_cols), dtype=bool)
        self.w_neighbors = {run_window.index(y) for y in half_plane_neighbors(w)
                            if run_window.contains(y)}
        self.found_time: float | None = None

    def on_grow(self, ctx, t, site) -> bool:
        idx = self.window.index(site)
        touches = idx in self.w_neighbors
        if not touches:
            r, c = idx
            for dl, dk in firesim._OFFSETS:
                rr, cc = r + dl, c + dk
                if 0 <= rr < ctx.n_rows and 0 <= cc < ctx.n_cols and self.in_R[rr, cc]:
                    touches = True
                    break
        if not touches:
            return False
        # Absorb the whole occupied cluster of the grown site into R.
        stack = [idx]
        self.in_R[idx] = True
        occ = ctx.occ
        while stack:
            r, c = stack.pop()
            if self.near_cone[r, c]:
                self.found_time = t
                return True
            for dl, dk in firesim._OFFSETS:
                rr, cc = r + dl, c + dk
                if (0 <= rr < ctx.n_rows and 0 <= cc < ctx.n_cols
                        and occ[rr, cc] and not self.in_R[rr, cc]):
                    self.in_R[rr, cc] = True
                    stack.append((rr, cc))
        return False

    def on_destroy(self, ctx, t, record) -> bool:
        rows = record.sites[:, 1] - self.window.l_min
        cols = record.sites[:, 0] - self.window.k_min
        self.in_R[rows, cols] = False
        return False


def event_a_window(params: EventParams, cone_height_factor: float = 2.0) -> Window:
    """Half-plane window covering the cone cross-section and the w site."""
    l_top = max(8, math.ceil(cone_height_factor * params.n))
    cone = params.cone()
    y_top = l_top * math.sqrt(3.0) / 2.0
    x_lo = cone.apex_x - cone.half_width_at(y_top) - 3.0
    x_hi = cone.apex_x + cone.half_width_at(y_top) + 3.0
    k_lo = math.floor(x_lo - 0.5 * l_top)
    k_hi = max(math.ceil(x_hi), params.w_site[0] + params.n + 4)
    return Window(k_lo, k_hi, 0, l_top)


def sample_event_a(seed: int, params: EventParams,
                   window: Window | None = None) -> bool:
    """One fire-process sample of the cone-connection event."""
    w = params.w_site
    jumps = clocks.jumps_in(seed, w, 0.0, T_C)
    if not jumps:
        return False
    j_last = jumps[-1]
    win = window if window is not None else event_a_window(params)
    obs = _ConeConnectionObserver(win, w, params.cone())
    firesim.run(win, seed, t_end=j_last, observer=obs)
    return obs.found_time is not None and obs.found_time < j_last


def estimate_event_A(params: EventParams, samples: int, base_seed: int,
                     window: Window | None = None, side: str = "right",
                     pool_map=None) -> EstimateResult:
    """Fire-process cone connection with a later jump of w's clock."""
    params = _resolve_side(params, side)
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    hits = sum(_pmap(pool_map, partial(sample_event_a, params=params,
                                       window=window), seeds))
    return make_estimate(hits, samples)


@dataclass
class CoupledEventStats:
    """Per-sample coupled evaluation of the proof events under one seed."""

    n_samples: int
    estimates: dict[str, EstimateResult]
    violations: dict[str, int]


def _sample_coupled(seed: int, params: EventParams, include_a: bool) -> tuple:
    t = first_connection_time(params.w_site, params.surface(), params.window(),
                              seed, T_C, True)
    jumps = clocks.jumps_in(seed, params.w_site, 0.0, T_C)
    j_last = jumps[-1] if jumps else None
    conn = t is not None and t < T_C
    c_ev = t is not None and t < params.slice_time
    b_ev = conn and j_last is not None and j_last > t
    d_ev = b_ev and t >= params.slice_time
    a_ev = sample_event_a(seed, params) if include_a else False
    return a_ev, b_ev, c_ev, d_ev, conn


def coupled_event_stats(params: EventParams, samples: int, base_seed: int,
                        include_a: bool = True, side: str = "right",
                        pool_map=None) -> CoupledEventStats:
    """Evaluate A, B, C, D on common seeds and count implication failures."""
    params = _resolve_side(params, side)
    seeds = [derive_seed(base_seed, i) for i in range(samples)]
    rows = _pmap(pool_map, partial(_sample_coupled, params=params,
                                   include_a=include_a), seeds)
    counts = {"A": 0, "B": 0, "C": 0, "D": 0}
    violations = {"A=>B": 0, "C=>B": 0, "B&!C=>D": 0}
    for a_ev, b_ev, c_ev, d_ev, conn in rows:
        counts["A"] += a_ev
        counts["B"] += b_ev
        counts["C"] += c_ev
        counts["D"] += d_ev
        if a_ev and not b_ev:
            violations["A=>B"] += 1
        if c_ev and not conn:
            violations["C=>B"] += 1
        if b_ev and not c_ev and not d_ev:
            violations["B&!C=>D"] += 1
    estimates = {k: make_estimate(v, samples) for k, v in counts.items()}
    return CoupledEventStats(samples, estimates, violations)


# ---------------------------------------------------------------------------
# Borel-Cantelli reporting and destruction-height distributions


@dataclass
class BorelCantelliReport:
    ns: list[int]
    partial_sums: list[float]
    partial_sums_upper: list[float]
    slope_fit: FitResult | None
    verdict: str


def borel_cantelli_report(points: list[tuple[int, EstimateResult]]) -> BorelCantelliReport:
    """Cumulative sums of event estimates plus a summability verdict from
    the fitted log-log decay slope (< -1 means a summable trend)."""
    if len(points) < 3:
        raise ValueError("need at least 3 estimates")
    ns = [n for n, _ in points]
    pts = [e.point for _, e in points]
    ups = [e.ci_high for _, e in points]
    sums = list(np.cumsum(pts))
    sums_up = list(np.cumsum(ups))
    nz = [(n, p) for n, p in zip(ns, pts) if p > 0]
    if len(nz) < 2:
        return BorelCantelliReport(ns, sums, sums_up, None, "insufficient")
    fit = linear_fit(np.log([n for n, _ in nz]), np.log([p for _, p in nz]),
                     x_transform="log", y_transform="log", model="powerlaw")
    verdict = "summable-trend" if fit.slope < -1.0 else "not-summable"
    return BorelCantelliReport(ns, sums, sums_up, fit, verdict)


@dataclass
class HeightDistribution:
    """Empirical distribution of destruction heights at one window size."""

    window_height: int
    heights: np.ndarray
    certified: np.ndarray

    @property
    def uncertified_fraction(self) -> float:
        return float(1.0 - self.certified.mean())

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.heights, q, method="inverted_cdf"))

    def quantile_ci(self, q: float, alpha: float = 0.05) -> tuple[float, float]:
        """Distribution-free order-statistic confidence interval."""
        xs = np.sort(self.heights)
        n = xs.size
        lo = int(stats.binom.ppf(alpha / 2.0, n, q))
        hi = int(stats.binom.ppf(1.0 - alpha / 2.0, n, q))
        lo = min(max(lo, 0), n - 1)
        hi = min(max(hi, 0), n - 1)
        return float(xs[lo]), float(xs[hi])

    def cdf_points(self) -> list[tuple[float, float]]:
        xs = np.sort(self.heights)
        n = xs.size
        return [(float(x), (i + 1) / n) for i, x in enumerate(xs)]


def height_window(height: int, width_factor: float = 3.0, center_x: float = 0.0) -> Window:
    half = max(4, math.ceil(width_factor * height))
    c = round(center_x)
    return Window(c - half, c + half, 0, height)


def _sample_height(seed: int, window: Window, region, strict: bool) -> tuple[float, bool]:
    return firesim.certified_height(window, seed, region, strict=strict)


def height_distribution(region, window_heights, samples: int, base_seed: int,
                        width_factor: float = 3.0, strict: bool = False,
                        pool_map=None) -> list[HeightDistribution]:
    """Empirical destruction-height distributions per window size."""
    if isinstance(region, ConeRegion):
        cx = region.apex_x
    elif isinstance(region, TubeRegion):
        cx = region.x
    else:
        raise TypeError(f"unsupported region {region!r}")
    out = []
    for h in window_heights:
        window = height_window(int(h), width_factor, cx)
        seeds = [derive_seed(base_seed, 500_000 + i) for i in range(samples)]
        rows = _pmap(pool_map, partial(_sample_height, window=window,
                                       region=region, strict=strict), seeds)
        heights = np.array([r[0] for r in rows], dtype=np.float64)
        certified = np.array([r[1] for r in rows], dtype=bool)
        out.append(HeightDistribution(int(h), heights, certified))
    return out
