"""Command-line front end: reproducible experiment runs with manifests.

Subcommands: simulate | onearm | xiscan | events | heights | verify |
defaults.  Configuration is a flat ``key = value`` text file overridden by
CLI flags; every run directory receives the output files plus a
``manifest.json`` with the effective config and per-file digests.

Exit codes: 0 ok, 2 invalid config, 3 runtime failure, 4 degenerate fit,
5 invariant violation.
"""

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__, clocks, estimators, firesim, percolation
from .clocks import T_C
from .estimators import EventParams, FitError
from .lattice import ConeRegion, TubeRegion, Window, outer_boundary

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_FIT = 4
EXIT_INVARIANT = 5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat configuration; the single serialized source of truth."""

    seed: int = 1
    threads: int = 0  # 0: use FIRELAB_THREADS or 1
    out: str = "firelab-out"
    window_width: int = 48   # half-width: window spans k in [-w, w]
    window_height: int = 24  # rows l in [0, h]
    t_end: float = T_C
    t: float = T_C           # one-arm sampling time
    x: float = 0.0
    phi: float = math.pi / 3
    delta: float = 1.0 / 24.0
    n_list: tuple = (8, 16, 32, 64)
    t_list: tuple = (T_C - 0.30, T_C - 0.22, T_C - 0.15, T_C - 0.10)
    samples: int = 1000
    samples_per_n: int = 2000
    half_plane: bool = True
    region: str = "cone"     # cone | tube
    engine: str = "auto"
    model: str = "n_exp"
    heights_list: tuple = (24, 48)
    width_factor: float = 3.0
    synthetic: bool = False
    events_include_a: bool = True
    verify_runs: int = 120
    corrupt_streams: bool = False

    def resolved_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        env = os.environ.get("FIRELAB_THREADS", "")
        if env.strip():
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"bad FIRELAB_THREADS value {env!r}") from exc
        return 1

    def validate(self) -> None:
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.samples_per_n < 1:
            raise ConfigError("samples_per_n must be >= 1")
        if not 0.0 < self.t_end <= T_C + 1e-12:
            raise ConfigError(
                f"t_end must lie in (0, t_c]; the process is capped at "
                f"t_c = log 2 ~ {T_C:.6f}")
        if not 0.0 <= self.t <= T_C + 1e-12:
            raise ConfigError("t must lie in [0, t_c]")
        if self.window_width < 2 or self.window_height < 2:
            raise ConfigError("window dimensions must be >= 2")
        if not 0.0 < self.phi < math.pi / 2:
            raise ConfigError("phi must lie in (0, pi/2)")
        if not 0.0 < self.delta < 1.0 / 12.0:
            raise ConfigError("delta must lie in (0, 1/12)")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list must be nonempty positive integers")
        if any(t >= T_C for t in self.t_list):
            raise ConfigError("t_list values must be < t_c")
        if self.region not in ("cone", "tube"):
            raise ConfigError("region must be cone or tube")
        if self.engine not in ("auto", "grid", "walk"):
            raise ConfigError("engine must be auto, grid or walk")
        if self.model not in ("exp", "n_exp"):
            raise ConfigError("model must be exp or n_exp")
        if not self.heights_list or any(h < 4 for h in self.heights_list):
            raise ConfigError("heights_list entries must be >= 4")
        if self.verify_runs < 1:
            raise ConfigError("verify_runs must be >= 1")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")

    def window(self) -> Window:
        return Window(-self.window_width, self.window_width, 0, self.window_height)

    def cone(self) -> ConeRegion:
        return ConeRegion(self.x, self.phi)

    def tube(self) -> TubeRegion:
        return TubeRegion(self.x, self.phi)


_LIST_FIELDS = {"n_list": int, "t_list": float, "heights_list": int}
_BOOL_FIELDS = {"half_plane", "synthetic", "events_include_a", "corrupt_streams"}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, val)
    return values


def _parse_value(key: str, val: str):
    if key in _LIST_FIELDS:
        conv = _LIST_FIELDS[key]
        try:
            return tuple(conv(part.strip()) for part in val.split(",") if part.strip())
        except ValueError as exc:
            raise ConfigError(f"bad list for {key}: {val!r}") from exc
    if key in _BOOL_FIELDS:
        low = val.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {val!r}")
    target = RunConfig.__dataclass_fields__[key].type
    try:
        if target in (int, "int"):
            return int(val)
        if target in (float, "float"):
            return float(val)
        return val
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {val!r}") from exc


def format_config(config: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(p.read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig(**values)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Output plumbing


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def csv_text(header: list[str], rows: list[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


class RunDirectory:
    """Collects output texts, then writes them plus a manifest atomically."""

    def __init__(self, config: RunConfig, command: str):
        self.config = config
        self.command = command
        self.files: dict[str, str] = {}
        self.started = datetime.now(timezone.utc).isoformat()

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def write(self) -> Path:
        out = Path(self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, text in sorted(self.files.items()):
            data = text.encode("utf-8")
            (out / name).write_bytes(data)
            digests[name] = hashlib.sha256(data).hexdigest()
        manifest = {
            "artifact_version": __version__,
            "command": self.command,
            "config": dataclasses.asdict(self.config),
            "started_utc": self.started,
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": digests,
        }
        (out / "manifest.json").write_text(json_text(manifest), encoding="utf-8")
        return out


def _fit_dict(fit: estimators.FitResult) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "slope_se": fit.slope_se,
        "slope_ci": list(fit.slope_ci),
        "r2": fit.r2,
        "residual_norm": fit.residual_norm,
        "n_points": fit.n_points,
        "x_transform": fit.x_transform,
        "y_transform": fit.y_transform,
        "model": fit.model,
    }


def _estimate_row(n, est) -> tuple:
    return (n, est.point, est.ci_low, est.ci_high, est.n_samples)


class _PoolMap:
    """map() over a process pool; plain map when threads == 1."""

    def __init__(self, threads: int):
        self.threads = threads
        self.pool = Pool(threads) if threads > 1 else None

    def __call__(self, fn, items):
        items = list(items)
        if self.pool is None:
            return list(map(fn, items))
        chunk = max(1, len(items) // (4 * self.threads))
        return self.pool.map(fn, items, chunksize=chunk)

    def close(self):
        if self.pool is not None:
            self.pool.close()
            self.pool.join()


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(config: RunConfig) -> int:
    rundir = RunDirectory(config, "simulate")
    state, records = firesim.run(config.window(), config.seed, config.t_end)
    region = config.cone()
    rows = firesim.destruction_log_rows(records, region)
    rundir.add("destruction_log.csv",
               csv_text(["time", "ignition_k", "cluster_size", "max_im", "in_cone"], rows))
    summary = firesim.run_summary(state, records)
    summary["cone_height"] = firesim.height_of_destruction(records, region, config.t_end)
    summary["seed"] = config.seed
    rundir.add("summary.json", json_text(summary))
    rundir.write()
    return EXIT_OK


def cmd_onearm(config: RunConfig, pool_map) -> int:
    rundir = RunDirectory(config, "onearm")
    rows = []
    points = []
    for i, n in enumerate(config.n_list):
        est = estimators.estimate_one_arm(
            n, config.t, config.phi, config.samples, config.half_plane,
            clocks.derive_seed(config.seed, 1000 + i), config.engine, pool_map)
        rows.append(_estimate_row(n, est))
        points.append((n, est))
    rundir.add("onearm.csv",
               csv_text(["n", "point", "ci_low", "ci_high", "samples"], rows))
    report = {"t": config.t, "phi": config.phi, "half_plane": config.half_plane}
    nz = [(n, e.point) for n, e in points if e.successes > 0]
    if len(nz) >= 2:
        fit = estimators.linear_fit(np.log([n for n, _ in nz]),
                                    np.log([p for _, p in nz]),
                                    x_transform="log", y_transform="log",
                                    model="powerlaw")
        report["loglog_fit"] = _fit_dict(fit)
    else:
        report["loglog_fit"] = None
        report["warning"] = "too few nonzero estimates for a slope fit"
    rundir.add("onearm_fit.json", json_text(report))
    rundir.write()
    return EXIT_OK


def cmd_xiscan(config: RunConfig, pool_map) -> int:
    rundir = RunDirectory(config, "xiscan")
    if config.synthetic:
        gaps = [T_C - t for t in config.t_list]
        xis = [g ** (-4.0 / 3.0) for g in gaps]
        fit = estimators.fit_xi_scan(list(config.t_list), xis)
        rows = [(t, T_C - t, xi, "", "") for t, xi in zip(config.t_list, xis)]
        report = {"synthetic": True, "fit": _fit_dict(fit)}
    else:
        scan = estimators.scan_xi_exponent(
            list(config.t_list), config.phi, config.samples_per_n,
            config.seed, config.model, pool_map)
        rows = [(t, T_C - t, xf.xi, xf.xi_ci[0], xf.xi_ci[1])
                for t, xf in scan.xis]
        report = {
            "synthetic": False,
            "fit": _fit_dict(scan.fit),
            "per_t": [{
                "t": t, "xi": xf.xi, "xi_ci": list(xf.xi_ci),
                "r2": xf.fit.r2, "warnings": xf.warnings,
                "points": [_estimate_row(n, e) for n, e in xf.points],
            } for t, xf in scan.xis],
        }
    rundir.add("xiscan.csv",
               csv_text(["t", "gap", "xi", "xi_ci_low", "xi_ci_high"], rows))
    rundir.add("xiscan_fit.json", json_text(report))
    rundir.write()
    return EXIT_OK


def cmd_events(config: RunConfig, pool_map) -> int:
    rundir = RunDirectory(config, "events")
    rows = []
    d_points = []
    violations = {"A=>B": 0, "C=>B": 0, "B&!C=>D": 0}
    per_n = []
    for i, n in enumerate(config.n_list):
        params = EventParams(n, config.x, config.phi, config.delta)
        stats = estimators.coupled_event_stats(
            params, config.samples, clocks.derive_seed(config.seed, 9000 + i),
            include_a=config.events_include_a, pool_map=pool_map)
        for key in violations:
            violations[key] += stats.violations[key]
        ests = stats.estimates
        rows.append((n, ests["A"].point, ests["B"].point, ests["C"].point,
                     ests["D"].point, config.samples))
        d_points.append((n, ests["D"]))
        per_n.append({"n": n, "slice_time": params.slice_time,
                      "estimates": {k: _estimate_row(n, e)[1:4] for k, e in ests.items()},
                      "violations": stats.violations})
    bc = estimators.borel_cantelli_report(d_points) if len(d_points) >= 3 else None
    report = {
        "violations": violations,
        "include_a": config.events_include_a,
        "per_n": per_n,
    }
    if bc is not None:
        report["borel_cantelli_D"] = {
            "ns": bc.ns,
            "partial_sums": bc.partial_sums,
            "partial_sums_upper": bc.partial_sums_upper,
            "verdict": bc.verdict,
            "fit": _fit_dict(bc.slope_fit) if bc.slope_fit else None,
        }
    rundir.add("events.csv",
               csv_text(["n", "A", "B", "C", "D", "samples"], rows))
    rundir.add("events_report.json", json_text(report))
    rundir.write()
    return EXIT_OK


def cmd_heights(config: RunConfig, pool_map) -> int:
    rundir = RunDirectory(config, "heights")
    region = config.cone() if config.region == "cone" else config.tube()
    dists = estimators.height_distribution(
        region, list(config.heights_list), config.samples, config.seed,
        config.width_factor, pool_map=pool_map)
    rows = []
    summary = []
    for dist in dists:
        for i, (h, ok) in enumerate(zip(dist.heights, dist.certified)):
            rows.append((dist.window_height, i, float(h), int(ok)))
        summary.append({
            "window_height": dist.window_height,
            "samples": int(dist.heights.size),
            "uncertified_fraction": dist.uncertified_fraction,
            "median": dist.quantile(0.5),
            "median_ci": list(dist.quantile_ci(0.5)),
            "p90": dist.quantile(0.9),
            "p90_ci": list(dist.quantile_ci(0.9)),
        })
    rundir.add("heights.csv",
               csv_text(["window_height", "sample", "height", "certified"], rows))
    rundir.add("heights_summary.json", json_text({
        "region": config.region, "x": config.x, "phi": config.phi,
        "per_window": summary,
    }))
    rundir.write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Invariant verification


def _verify_fire_invariants(config: RunConfig) -> dict:
    """Domination, boundary vacancy, growth and destruction provenance."""
    window = Window(-12, 12, 0, 10)
    sigma_shift = 1 if config.corrupt_streams else 0
    failures = []
    n_runs = config.verify_runs
    for i in range(n_runs):
        seed = clocks.derive_seed(config.seed, 40_000 + i)
        ctx_seed = seed + sigma_shift
        state, records = _collected_run(window, seed)
        events = state["events"]
        arrivals = clocks.first_arrival_grid(ctx_seed, window)
        sigma_end = arrivals <= config.t_end
        if (state["occ"].astype(bool) & ~sigma_end).any():
            failures.append(f"run {i}: domination violated at t_end")
            break
        probe_ts = [config.t_end * (j + 1) / 5.0 for j in range(5)]
        for t in probe_ts:
            occ_t = firesim.reconstruct_occupancy(window, events, records, t)
            if occ_t[0, :].any():
                failures.append(f"run {i}: boundary row occupied at t={t:.4f}")
                break
            if (occ_t.astype(bool) & ~(arrivals <= t)).any():
                failures.append(f"run {i}: domination violated at t={t:.4f}")
                break
        if failures:
            break
        for ev in events:
            if ev.kind != "grow":
                continue
            jl = clocks.jumps_in(seed, ev.site, 0.0, config.t_end)
            if ev.site[1] < 1 or ev.time not in jl:
                failures.append(f"run {i}: growth without a clock jump at {ev.site}")
                break
        if failures:
            break
        for rec in records:
            jl = clocks.jumps_in(seed, rec.ignition, 0.0, config.t_end)
            if rec.time not in jl:
                failures.append(f"run {i}: ignition clock silent at t={rec.time:.6f}")
                break
            destroyed = {(int(k), int(l)) for k, l in rec.sites}
            if rec.ignition not in outer_boundary(destroyed, half_plane=True):
                failures.append(f"run {i}: ignition site not on the cluster boundary")
                break
            occ_before = firesim.reconstruct_occupancy(window, events, records,
                                                       rec.time, strict=True)
            for s in destroyed:
                if not occ_before[window.index(s)]:
                    failures.append(f"run {i}: destroyed site {s} was vacant")
                    break
            if failures:
                break
        if failures:
            break
    return {"name": "fire-invariants", "runs": n_runs,
            "ok": not failures, "failures": failures}


def _collected_run(window: Window, seed: int):
    state, records = firesim.run(window, seed, T_C, collect_events=True)
    return {"occ": state.occ, "events": state.events}, records


def _verify_two_state(config: RunConfig) -> dict:
    """Single-interior-site destruction probability against the two-state
    chain: P[>=1 destruction by t] = (1 - exp(-t))^2."""
    window = Window(0, 1, 0, 1)
    mask = np.zeros((2, 2), dtype=bool)
    mask[0, 0] = mask[0, 1] = True   # boundary igniters (0,0), (1,0)
    mask[1, 0] = True                # single interior site (0,1)
    n_runs = max(4000, config.verify_runs * 40)
    hits = 0
    for i in range(n_runs):
        seed = clocks.derive_seed(config.seed, 90_000 + i)
        _, records = firesim.run(window, seed, T_C, mask=mask)
        hits += bool(records)
    p_hat = hits / n_runs
    p_true = (1.0 - math.exp(-T_C)) ** 2
    se = math.sqrt(p_true * (1.0 - p_true) / n_runs)
    ok = abs(p_hat - p_true) <= 4.0 * se
    return {"name": "two-state-oracle", "runs": n_runs, "p_hat": p_hat,
            "p_true": p_true, "ok": bool(ok), "failures":
            [] if ok else [f"|{p_hat:.4f} - {p_true:.4f}| > 4 SE"]}


def _verify_connection_oracle(config: RunConfig) -> dict:
    """Incremental first-connection times against full reconnectivity checks."""
    failures = []
    n_cases = 40
    for i in range(n_cases):
        seed = clocks.derive_seed(config.seed, 70_000 + i)
        n = 3 + (i % 3)
        surface = percolation.RhombusSurface((0, 0), n, config.phi)
        window = percolation.window_for_rhombus((0, 0), n, config.phi, True)
        t_inc = percolation.first_connection_time((0, 0), surface, window, seed)
        t_def = _definitional_connection_time((0, 0), surface, window, seed)
        if t_inc != t_def:
            failures.append(f"case {i}: incremental {t_inc} != definitional {t_def}")
            break
    return {"name": "first-connection-oracle", "cases": n_cases,
            "ok": not failures, "failures": failures}


def _definitional_connection_time(w, target, window, seed):
    arrivals = clocks.first_arrival_grid(seed, window)
    times = sorted(float(t) for t in np.unique(arrivals) if t <= T_C)
    for t in times:
        config = percolation.GrowthConfiguration(window, t, True, arrivals <= t, seed)
        if percolation.is_connected(w, target, config):
            return t
    return None


def _verify_engines(config: RunConfig) -> dict:
    failures = []
    n_cases = 60
    for i in range(n_cases):
        seed = clocks.derive_seed(config.seed, 80_000 + i)
        n = 3 + (i % 5)
        t = 0.3 + 0.05 * (i % 8)
        a = percolation.one_arm_indicator(n, t, config.phi, seed, True, "grid")
        b = percolation.one_arm_indicator(n, t, config.phi, seed, True, "walk")
        if a != b:
            failures.append(f"case {i}: grid={a} walk={b}")
            break
    return {"name": "engine-equivalence", "cases": n_cases,
            "ok": not failures, "failures": failures}


def cmd_verify(config: RunConfig) -> int:
    rundir = RunDirectory(config, "verify")
    checks = [
        _verify_fire_invariants(config),
        _verify_two_state(config),
        _verify_connection_oracle(config),
        _verify_engines(config),
    ]
    ok = all(c["ok"] for c in checks)
    report = {"ok": ok, "checks": checks,
              "corrupt_streams": config.corrupt_streams}
    rundir.add("verify_report.json", json_text(report))
    rundir.write()
    if not ok:
        first = next(c for c in checks if not c["ok"])
        print(f"invariant failure: {first['name']}: {first['failures'][0]}",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firelab",
        description="Forest-fire simulation and percolation estimators on the "
                    "half-plane triangular lattice")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="run seed (u64)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (FIRELAB_THREADS fallback)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--n-list", dest="n_list", type=str, default=None,
                       help="comma-separated rhombus sizes")
        p.add_argument("--t-list", dest="t_list", type=str, default=None,
                       help="comma-separated times")
        p.add_argument("--phi", type=float, default=None)
        p.add_argument("--x", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--t-end", dest="t_end", type=float, default=None)
        p.add_argument("--t", type=float, default=None)
        p.add_argument("--half-plane", dest="half_plane", type=str, default=None)
        p.add_argument("--engine", type=str, default=None)
        p.add_argument("--model", type=str, default=None)
        p.add_argument("--region", type=str, default=None)
        p.add_argument("--heights-list", dest="heights_list", type=str, default=None)
        p.add_argument("--width-factor", dest="width_factor", type=float, default=None)
        p.add_argument("--samples-per-n", dest="samples_per_n", type=int, default=None)
        p.add_argument("--window-width", dest="window_width", type=int, default=None)
        p.add_argument("--window-height", dest="window_height", type=int, default=None)
        p.add_argument("--synthetic", action="store_const", const=True, default=None)
        p.add_argument("--corrupt-streams", dest="corrupt_streams",
                       action="store_const", const=True, default=None)
        p.add_argument("--verify-runs", dest="verify_runs", type=int, default=None)
        p.add_argument("--no-events-a", dest="events_include_a",
                       action="store_const", const=False, default=None)

    for name in ("simulate", "onearm", "xiscan", "events", "heights", "verify"):
        common(sub.add_parser(name))
    sub.add_parser("defaults")
    return parser


def _overrides_from_args(args) -> dict:
    out = {}
    for f in dataclasses.fields(RunConfig):
        if not hasattr(args, f.name):
            continue
        v = getattr(args, f.name)
        if v is None:
            continue
        if f.name in _LIST_FIELDS and isinstance(v, str):
            v = _parse_value(f.name, v)
        if f.name in _BOOL_FIELDS and isinstance(v, str):
            v = _parse_value(f.name, v)
        out[f.name] = v
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(format_config(RunConfig()))
        return EXIT_OK
    try:
        config = load_config(args.config, _overrides_from_args(args))
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    pool_map = _PoolMap(config.resolved_threads())
    try:
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "onearm":
            return cmd_onearm(config, pool_map)
        if args.command == "xiscan":
            return cmd_xiscan(config, pool_map)
        if args.command == "events":
            return cmd_events(config, pool_map)
        if args.command == "heights":
            return cmd_heights(config, pool_map)
        if args.command == "verify":
            return cmd_verify(config)
        raise AssertionError(f"unhandled command {args.command}")
    except FitError as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        pool_map.close()


if __name__ == "__main__":
    sys.exit(main())
