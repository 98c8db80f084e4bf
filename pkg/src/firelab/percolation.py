"""Pure growth process on finite windows and its connectivity queries.

The configuration at time t marks a site occupied iff its clock's first
arrival is <= t; at fixed t this is independent site percolation with
p = 1 - exp(-t).  Connection events follow the convention that a site w is
connected to a region S when some occupied neighbor of w starts a 1-path
ending within Euclidean distance 1 of S; w's own state is ignored.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from . import clocks
from .clocks import T_C
from .lattice import (
    NEIGHBOR_OFFSETS,
    SQRT3_2,
    TRI_STRUCTURE,
    ConeRegion,
    RhombusSurface,
    Site,
    Window,
    embed,
    half_plane_neighbors,
    near_cone_mask,
    near_surface_mask,
    neighbors,
    seg_dist_sq,
)


class WindowTooSmallError(ValueError):
    """The window does not cover the target geometry plus padding."""


@dataclass
class GrowthConfiguration:
    """Occupancy snapshot of the growth process on a window."""

    window: Window
    t: float
    half_plane: bool
    occ: np.ndarray
    seed: int | None = None
    arrivals: np.ndarray | None = field(default=None, repr=False)

    def occupied(self, site: Site) -> bool:
        return bool(self.occ[self.window.index(site)])

    def occupied_fraction(self) -> float:
        return float(self.occ.mean())


def sample_configuration(window: Window, t: float, seed: int,
                         half_plane: bool = True) -> GrowthConfiguration:
    """Deterministic growth snapshot at time t under a run seed."""
    if t < 0.0:
        raise ValueError("time must be >= 0")
    if half_plane and window.l_min != 0:
        raise ValueError("half-plane window must start at l = 0")
    arrivals = clocks.first_arrival_grid(seed, window)
    return GrowthConfiguration(window, t, half_plane, arrivals <= t, seed, arrivals)


def _window_margin_bounds(window: Window, x_min: float, x_max: float,
                          y_min: float, y_max: float, margin: float) -> bool:
    """True when every site within ``margin`` of the bbox fits the window."""
    l_lo = math.floor((y_min - margin) / SQRT3_2)
    l_hi = math.ceil((y_max + margin) / SQRT3_2)
    if window.l_min == 0:
        l_lo = max(l_lo, 0)
    if l_lo < window.l_min or l_hi > window.l_max:
        return False
    k_lo = math.floor(x_min - margin - 0.5 * l_hi)
    k_hi = math.ceil(x_max + margin - 0.5 * min(l_lo, 0))
    return window.k_min <= k_lo and k_hi <= window.k_max


def check_window(window: Window, target, half_plane: bool, pad: int = 2) -> None:
    """Raise :class:`WindowTooSmallError` unless the window extends at least
    ``pad`` sites beyond the dist-1 band of the target geometry."""
    margin = 1.0 + pad
    if isinstance(target, RhombusSurface):
        x0, x1, y0, y1 = target.bounding_box(half_plane)
        if not _window_margin_bounds(window, x0, x1, y0, y1, margin):
            raise WindowTooSmallError(
                f"window {window} too small for rhombus n={target.n} at {target.center}")
    elif isinstance(target, ConeRegion):
        # Infinite region: require sideways coverage up to the window top.
        y_top = SQRT3_2 * window.l_max
        half = target.half_width_at(y_top)
        x0, x1 = target.apex_x - half, target.apex_x + half
        k_lo = math.floor(x0 - margin - 0.5 * window.l_max)
        k_hi = math.ceil(x1 + margin)
        if window.k_min > k_lo or window.k_max < k_hi:
            raise WindowTooSmallError(f"window {window} too narrow for cone {target}")
    else:
        raise TypeError(f"unsupported target {target!r}")


@lru_cache(maxsize=64)
def _cached_target_mask(window: Window, target, half_plane: bool) -> np.ndarray:
    if isinstance(target, RhombusSurface):
        return near_surface_mask(window, target, half_plane)
    if isinstance(target, ConeRegion):
        return near_cone_mask(window, target)
    raise TypeError(f"unsupported target {target!r}")


def target_mask(window: Window, target, half_plane: bool) -> np.ndarray:
    """Grid mask of sites within distance 1 of the target region.

    Cached per (window, target); callers must treat the array as read-only.
    """
    return _cached_target_mask(window, target, half_plane)


def _start_indices(window: Window, w: Site, half_plane: bool) -> list[tuple[int, int]]:
    ys = half_plane_neighbors(w) if half_plane else neighbors(w)
    return [window.index(y) for y in ys if window.contains(y)]


def is_connected(w: Site, target, config: GrowthConfiguration) -> bool:
    """Whether some occupied neighbor of w reaches within distance 1 of the
    target through a 1-path inside the window."""
    check_window(config.window, target, config.half_plane)
    occ = config.occ
    labels, n_lab = ndimage.label(occ, structure=TRI_STRUCTURE)
    if n_lab == 0:
        return False
    start = {labels[idx] for idx in _start_indices(config.window, w, config.half_plane)
             if occ[idx]}
    if not start:
        return False
    tmask = target_mask(config.window, target, config.half_plane) & occ
    if not tmask.any():
        return False
    return bool(np.isin(labels[tmask], sorted(start)).any())


_FLAT_OFFSETS = [(dl, dk) for dk, dl in NEIGHBOR_OFFSETS]

BELOW_FLOOR = object()  # sentinel: connection already present at the floor time


def first_connection_time(w: Site, target, window: Window, seed: int,
                          t_max: float = T_C, half_plane: bool = True) -> float | None:
    """Minimal t <= t_max at which ``is_connected`` holds; None otherwise.

    Equals the minimax (bottleneck) value over admissible paths: insert
    sites in arrival order into a union-find with virtual terminals for the
    w-neighborhood and the target band.
    """
    # Floor 0 never yields the BELOW_FLOOR marker: arrivals are positive.
    return _connection_time_floor(w, target, window, seed, t_max, half_plane, 0.0)


def _connection_time_floor(w: Site, target, window: Window, seed: int,
                           t_max: float, half_plane: bool, floor: float):
    """Like :func:`first_connection_time` but coarse below ``floor``:
    returns BELOW_FLOOR when the connection already holds at time floor."""
    check_window(window, target, half_plane)
    arrivals = clocks.first_arrival_grid(seed, window)
    n_rows, n_cols = arrivals.shape
    n = arrivals.size

    tmask = target_mask(window, target, half_plane).ravel()
    smask = np.zeros(n, dtype=bool)
    for (r, c) in _start_indices(window, w, half_plane):
        smask[r * n_cols + c] = True

    parent = list(range(n + 2))
    vw, vt = n, n + 1

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    flat_arr = arrivals.ravel()
    active_np = np.zeros(n, dtype=np.uint8)

    if floor > 0.0:
        pre = arrivals <= floor
        if pre.any():
            labels, _ = ndimage.label(pre, structure=TRI_STRUCTURE)
            flat_lab = labels.ravel()
            idx = np.flatnonzero(flat_lab)
            # Union each prelabeled component to its first member (vectorized).
            labs = flat_lab[idx]
            _, first_pos = np.unique(labs, return_index=True)
            rep_of = np.zeros(int(labs.max()) + 1, dtype=np.int64)
            rep_of[labs[first_pos]] = idx[first_pos]
            parent_np = np.arange(n + 2, dtype=np.int64)
            parent_np[idx] = rep_of[labs]
            parent = parent_np.tolist()
            active_np[idx] = 1
            for i in np.flatnonzero(pre.ravel() & smask).tolist():
                union(vw, i)
            for i in np.flatnonzero(pre.ravel() & tmask).tolist():
                union(vt, i)
            if find(vw) == find(vt):
                return BELOW_FLOOR

    active = bytearray(active_np.tobytes())

    lo, hi = floor, t_max
    sel = np.flatnonzero((flat_arr > lo) & (flat_arr <= hi))
    if sel.size:
        order = sel[np.lexsort((sel % n_cols, sel // n_cols, flat_arr[sel]))]
        for i in order.tolist():
            active[i] = 1
            r, c = divmod(i, n_cols)
            for dl, dk in _FLAT_OFFSETS:
                rr, cc = r + dl, c + dk
                if 0 <= rr < n_rows and 0 <= cc < n_cols:
                    j = rr * n_cols + cc
                    if active[j]:
                        union(i, j)
            if smask[i]:
                union(vw, i)
            if tmask[i]:
                union(vt, i)
            if find(vw) == find(vt):
                return float(flat_arr[i])
    return None


def window_for_rhombus(center: Site, n: int, phi: float, half_plane: bool,
                       pad: int = 2) -> Window:
    """Smallest axial window covering the rhombus, its dist-1 band and
    ``pad`` extra sites in every direction."""
    surface = RhombusSurface(center, n, phi)
    x0, x1, y0, y1 = surface.bounding_box(half_plane)
    margin = 1.0 + pad
    l_lo = math.floor((y0 - margin) / SQRT3_2)
    if half_plane:
        l_lo = max(l_lo, 0)
    l_hi = math.ceil((y1 + margin) / SQRT3_2)
    k_lo = math.floor(x0 - margin - 0.5 * l_hi)
    k_hi = math.ceil(x1 + margin - 0.5 * min(l_lo, 0))
    return Window(k_lo, k_hi, l_lo, l_hi)


def one_arm_indicator(n: int, t: float, phi: float, seed: int,
                      half_plane: bool = True, engine: str = "auto") -> bool:
    """One Bernoulli sample of the one-arm event for the origin.

    ``engine='grid'`` labels the whole padded window; ``engine='walk'``
    grows the origin cluster lazily (cheap in the subcritical regime).
    Both produce identical indicators for the same seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 0.0:
        raise ValueError("time must be >= 0")
    origin: Site = (0, 0)
    surface = RhombusSurface(origin, n, phi)
    window = window_for_rhombus(origin, n, phi, half_plane)
    if engine == "auto":
        engine = "grid" if t >= T_C - 0.1 else "walk"
    if engine == "grid":
        config = sample_configuration(window, t, seed, half_plane)
        return is_connected(origin, surface, config)
    if engine == "walk":
        return _one_arm_walk(surface, window, t, seed, half_plane)
    raise ValueError(f"unknown engine {engine!r}")


def _one_arm_walk(surface: RhombusSurface, window: Window, t: float,
                  seed: int, half_plane: bool) -> bool:
    """Lazy cluster growth from the origin's neighborhood."""
    segs = surface.segments(half_plane)
    cx, cy = embed(surface.center)
    sin_phi = math.sin(surface.phi)
    cos_phi = math.cos(surface.phi)
    # Coarse necessary condition for dist <= 1 in shear coordinates.
    band = surface.n - (1.0 + 1e-9) / sin_phi

    def near_target(site: Site) -> bool:
        px, py = embed(site)
        v = (py - cy) / sin_phi
        u = (px - cx) - v * cos_phi
        if max(abs(u), abs(v)) < band:
            return False
        return any(seg_dist_sq(px, py, *s) <= 1.0 for s in segs)

    occupied_cache: dict[Site, bool] = {}

    def occupied(site: Site) -> bool:
        val = occupied_cache.get(site)
        if val is None:
            # Same numpy kernel as the grid engine; see clocks._gap.
            val = -float(np.log1p(-clocks.uniform(seed, site, 0))) <= t
            occupied_cache[site] = val
        return val

    queue: deque[Site] = deque()
    seen: set[Site] = set()
    for y in neighbors((0, 0)):
        if (not half_plane or y[1] >= 0) and window.contains(y) and y not in seen:
            seen.add(y)
            if occupied(y):
                queue.append(y)
    while queue:
        s = queue.popleft()
        if near_target(s):
            return True
        for v in neighbors(s):
            if v in seen or not window.contains(v):
                continue
            if half_plane and v[1] < 0:
                continue
            seen.add(v)
            if occupied(v):
                queue.append(v)
    return False


def boundary_crossing_terminals(window: Window, x: float) -> tuple[list[Site], list[Site]]:
    """Boundary-row sites strictly left/right of the abscissa ``x``."""
    left = [(k, 0) for k in range(window.k_min, window.k_max + 1) if k < x]
    right = [(k, 0) for k in range(window.k_min, window.k_max + 1) if k > x]
    return left, right


def disjoint_crossings(x: float, window: Window, t: float, seed: int,
                       path_type: int, config: GrowthConfiguration | None = None) -> int:
    """Maximum number of vertex-disjoint paths of ``path_type`` sites from
    the boundary row left of x to the boundary row right of x."""
    if path_type not in (0, 1):
        raise ValueError("path_type must be 0 or 1")
    if not window.k_min < x < window.k_max:
        raise ValueError("window must straddle x")
    if window.l_min != 0:
        raise ValueError("crossing counts live on half-plane windows")
    if config is None:
        config = sample_configuration(window, t, seed, half_plane=True)
    usable = config.occ == bool(path_type)
    left, right = boundary_crossing_terminals(window, x)
    sources = [window.index(s) for s in left if usable[window.index(s)]]
    sinks = [window.index(s) for s in right if usable[window.index(s)]]
    if not sources or not sinks:
        return 0
    return _max_vertex_disjoint(usable, sources, sinks)


def _max_vertex_disjoint(usable: np.ndarray, sources: list[tuple[int, int]],
                         sinks: list[tuple[int, int]]) -> int:
    """Unit-vertex-capacity max flow via node splitting and BFS augmentation."""
    n_rows, n_cols = usable.shape
    n = usable.size

    def vin(i: int) -> int:
        return 2 * i

    def vout(i: int) -> int:
        return 2 * i + 1

    src, dst = 2 * n, 2 * n + 1
    cap: dict[tuple[int, int], int] = {}
    adj: dict[int, list[int]] = {}

    def add_edge(a: int, b: int, c: int) -> None:
        if (a, b) not in cap:
            cap[(a, b)] = 0
            cap[(b, a)] = 0
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        cap[(a, b)] += c

    flat_usable = usable.ravel()
    for i in np.flatnonzero(flat_usable).tolist():
        add_edge(vin(i), vout(i), 1)
        r, c = divmod(i, n_cols)
        for dl, dk in _FLAT_OFFSETS:
            rr, cc = r + dl, c + dk
            if 0 <= rr < n_rows and 0 <= cc < n_cols:
                j = rr * n_cols + cc
                if flat_usable[j]:
                    add_edge(vout(i), vin(j), 1)
    for (r, c) in sources:
        add_edge(src, vin(r * n_cols + c), 1)
    for (r, c) in sinks:
        add_edge(vout(r * n_cols + c), dst, 1)

    flow = 0
    while True:
        parent = {src: src}
        queue = deque([src])
        while queue and dst not in parent:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in parent and cap[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if dst not in parent:
            return flow
        v = dst
        while v != src:
            u = parent[v]
            cap[(u, v)] -= 1
            cap[(v, u)] += 1
            v = u
        flow += 1
