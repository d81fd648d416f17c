"""
Registration metrics and the benchmark runner.

Every trial draws its scene, pair, label noise and solver starts from seeds
derived by hashing (master seed, component name, trial index), so results do
not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .camera import CameraModel, LabeledCloud
from .cost import CostConfig
from .errors import FrustRegError, IoFailure
from .liegroup import RigidTransform, rotation_angle
from .plotting import histogram_figure
from .pnp import PnpConfig, pnp_from_labels
from .scene import NoiseModel, PairProtocol, SceneConfig, corrupt_labels, generate_scene, sample_pair
from .solver import SolverConfig, solve, solver_config_dict

SWEEP_KEYS = ("starts", "points", "tlimit")
METHODS = ("solver", "pnp")
RTE_BINS = (0.0, 10.0, 20)
RRE_BINS = (0.0, 30.0, 20)
RRE_SENTINEL = 180.0


@dataclass(frozen=True)
class RegistrationError:
    rte: float
    rre: float


def registration_error(estimated: RigidTransform, truth: RigidTransform, rre_mode: str = "geodesic") -> RegistrationError:
    """Camera-centre distance in the cloud frame and relative rotation angle (degrees).

    ``rre_mode="euler"`` sums the absolute z-y-x Euler angles of the relative
    rotation instead of taking its geodesic angle.
    """
    rte = float(np.linalg.norm(estimated.center() - truth.center()))
    rel = truth.rotation.T @ estimated.rotation
    if rre_mode == "geodesic":
        rre = math.degrees(rotation_angle(rel))
    elif rre_mode == "euler":
        rre = float(np.sum(np.abs(Rotation.from_matrix(rel).as_euler("zyx", degrees=True))))
    else:
        raise ValueError(f"unknown rre_mode {rre_mode!r}; use 'geodesic' or 'euler'")
    return RegistrationError(rte, rre)


def derive_seed(master: int, *labels) -> int:
    """63-bit sub-seed from the master seed and a label path, e.g. ("scene", 3)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for lab in labels:
        h.update(b"\x1f" + str(lab).encode())
    return int.from_bytes(h.digest(), "little") >> 1


# ---------------------------------------------------------------------------
# suite configuration


@dataclass(frozen=True)
class SuiteConfig:
    trials: int = 10
    seed: int = 0
    method: str = "solver"
    num_points: int = 20480
    max_translation: float = 10.0
    flip_rate: float = 0.0
    boundary_bias: float = 0.5
    grid_scatter: float = 0.0
    scene: SceneConfig = SceneConfig()
    camera: CameraModel = CameraModel()
    cost: CostConfig = CostConfig()
    solver: SolverConfig = SolverConfig()
    pnp: PnpConfig = PnpConfig()
    rre_mode: str = "geodesic"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.num_points < 1:
            raise ValueError("num_points must be at least 1")
        if self.num_points > self.scene.num_points:
            raise ValueError(f"num_points {self.num_points} exceeds the scene size {self.scene.num_points}")
        if self.method == "pnp":
            self.camera.check_grid()
        PairProtocol(max_translation=self.max_translation)
        NoiseModel(self.flip_rate, self.boundary_bias, self.grid_scatter)
        if self.rre_mode not in ("geodesic", "euler"):
            raise ValueError("rre_mode must be 'geodesic' or 'euler'")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["scene"] = asdict(self.scene)
        d["camera"] = self.camera.to_dict()
        d["cost"] = asdict(self.cost)
        d["solver"] = solver_config_dict(self.solver)
        d["pnp"] = asdict(self.pnp)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown suite keys {unknown}; valid keys: {sorted(known)}")
        sub = {"scene": SceneConfig, "cost": CostConfig, "solver": SolverConfig, "pnp": PnpConfig}
        for key, typ in sub.items():
            if key in d:
                valid = {f.name for f in fields(typ)}
                bad = sorted(set(d[key]) - valid)
                if bad:
                    raise ValueError(f"unknown {key} keys {bad}; valid keys: {sorted(valid)}")
                d[key] = typ(**d[key])
        if "camera" in d:
            d["camera"] = CameraModel.from_dict(d["camera"])
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_sweep(spec: str) -> Tuple[str, List[float]]:
    """``"starts=1,10,30,60"`` -> ("starts", [1, 10, 30, 60])."""
    key, sep, values = spec.partition("=")
    key = key.strip()
    if key not in SWEEP_KEYS:
        raise ValueError(f"invalid sweep key {key!r}; valid keys: {', '.join(SWEEP_KEYS)}")
    if not sep or not values.strip():
        raise ValueError(f"sweep {spec!r} needs values, e.g. {key}=1,2,3")
    try:
        vals = [float(v) for v in values.split(",")]
    except ValueError as exc:
        raise ValueError(f"sweep {spec!r}: values must be numbers") from exc
    if key in ("starts", "points"):
        if any(v != int(v) or v < 1 for v in vals):
            raise ValueError(f"sweep {key} values must be positive integers")
        vals = [int(v) for v in vals]
    elif any(not v > 0 for v in vals):
        raise ValueError("sweep tlimit values must be positive")
    return key, vals


def apply_setting(cfg: SuiteConfig, key: Optional[str], value) -> SuiteConfig:
    if key is None:
        return cfg
    if key == "starts":
        return replace(cfg, solver=replace(cfg.solver, num_starts=int(value)))
    if key == "points":
        return replace(cfg, num_points=int(value))
    if key == "tlimit":
        return replace(cfg, max_translation=float(value), solver=replace(cfg.solver, translation_init_radius=float(value)))
    raise ValueError(f"invalid sweep key {key!r}; valid keys: {', '.join(SWEEP_KEYS)}")


# ---------------------------------------------------------------------------
# trials


@dataclass
class TrialResult:
    trial: int
    seed: int
    setting: str
    noise: float
    rte: float
    rre: float
    cost: float
    iterations: int
    status: str
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def key(self) -> tuple:
        """Everything except timing, for determinism comparisons."""
        d = asdict(self)
        d.pop("wall_time")
        return tuple(d.items())


@dataclass(frozen=True)
class TrialCase:
    truth: RigidTransform
    labeled: LabeledCloud


def _subset_labeled(labeled: LabeledCloud, cloud_idx) -> LabeledCloud:
    grid = labeled.grid_labels[cloud_idx] if labeled.has_grid else None
    return LabeledCloud(labeled.cloud.subset(cloud_idx), labeled.frustum_labels[cloud_idx], grid)


def build_case(cfg: SuiteConfig, trial: int) -> TrialCase:
    """Scene -> pair -> label noise -> point subsample for one trial.

    The pair and the noise are drawn on the full cloud, so sweeping
    ``num_points`` only changes which points are kept.
    """
    scene_cfg = replace(cfg.scene, seed=derive_seed(cfg.seed, "scene", trial))
    cloud = generate_scene(scene_cfg)
    proto = PairProtocol(max_translation=cfg.max_translation, seed=derive_seed(cfg.seed, "pair", trial))
    truth, labeled = sample_pair(cloud, cfg.camera, proto, with_grid=cfg.method == "pnp")
    noise = NoiseModel(cfg.flip_rate, cfg.boundary_bias, cfg.grid_scatter, seed=derive_seed(cfg.seed, "noise", trial))
    if noise.flip_rate > 0 or noise.grid_scatter > 0:
        labeled = corrupt_labels(labeled, noise, cfg.camera, truth)
    if cfg.num_points < len(labeled):
        n = len(labeled)
        idx = np.sort(np.random.default_rng(derive_seed(cfg.seed, "points", trial)).choice(n, cfg.num_points, replace=False))
        labeled = _subset_labeled(labeled, idx)
    return TrialCase(truth, labeled)


def _failure(trial, seed, setting, cfg, status, wall) -> TrialResult:
    return TrialResult(trial, seed, setting, cfg.flip_rate, math.nan, math.nan, math.nan, 0, status, wall)


def run_trial(cfg: SuiteConfig, trial: int, starts_prefixes: Sequence[int] = ()) -> List[TrialResult]:
    """One trial; with ``starts_prefixes`` a single solve is reported at several start counts.

    A k-start result is the first k starts of the longer run, which equals a
    k-start run because each start's randomness depends only on its index.
    """
    seed = derive_seed(cfg.seed, "solver", trial)
    t0 = time.perf_counter()
    labels = [f"starts={k}" for k in starts_prefixes] or [""]
    try:
        case = build_case(cfg, trial)
        if cfg.method == "pnp":
            g, mask, _ = pnp_from_labels(case.labeled, cfg.camera, replace(cfg.pnp, seed=seed))
            err = registration_error(g, case.truth, cfg.rre_mode)
            wall = time.perf_counter() - t0
            return [TrialResult(trial, seed, labels[0], cfg.flip_rate, err.rte, err.rre, float(1.0 - mask.mean()), 0, "ok", wall)]
        scfg = replace(cfg.solver, seed=seed)
        if starts_prefixes:
            scfg = replace(scfg, num_starts=max(starts_prefixes))
        report = solve(case.labeled, cfg.camera, cfg.cost, scfg)
        wall = time.perf_counter() - t0
        out = []
        for k, lab in zip(starts_prefixes or [scfg.num_starts], labels):
            rep = report.prefix(k)
            err = registration_error(rep.best_pose, case.truth, cfg.rre_mode)
            its = rep.starts[rep.best_index].iterations
            out.append(TrialResult(trial, seed, lab, cfg.flip_rate, err.rte, err.rre, rep.best_cost, its, "ok", wall))
        return out
    except FrustRegError as exc:
        wall = time.perf_counter() - t0
        return [_failure(trial, seed, lab, cfg, type(exc).__name__, wall) for lab in labels]


# ---------------------------------------------------------------------------
# aggregation


def histogram(values, lo: float, hi: float, bins: int) -> Tuple[np.ndarray, np.ndarray]:
    """Percent per bin; values outside [lo, hi] are counted in the end bins."""
    edges = np.linspace(lo, hi, bins + 1)
    v = np.clip(np.asarray(values, dtype=float), lo, hi)
    counts, _ = np.histogram(v, edges)
    return edges, counts


def _stats(values) -> Dict[str, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": math.nan, "std": math.nan, "median": math.nan, "max": math.nan}
    return {"mean": float(v.mean()), "std": float(v.std()), "median": float(np.median(v)), "max": float(v.max())}


@dataclass
class SettingSummary:
    setting: str
    config: dict
    trials: List[TrialResult]
    rte_bins: Tuple[float, float, int] = RTE_BINS
    rre_bins: Tuple[float, float, int] = RRE_BINS

    @property
    def succeeded(self) -> List[TrialResult]:
        return [t for t in self.trials if t.ok]

    @property
    def failure_rate(self) -> float:
        return 1.0 - len(self.succeeded) / len(self.trials)

    @property
    def mean_rte(self) -> float:
        return _stats([t.rte for t in self.succeeded])["mean"]

    @property
    def mean_rre(self) -> float:
        return _stats([t.rre for t in self.succeeded])["mean"]

    def rte_sentinel(self) -> float:
        return 2.0 * float(self.config.get("max_translation", 10.0))

    def to_dict(self) -> dict:
        ok = self.succeeded
        rte = [t.rte for t in ok]
        rre = [t.rre for t in ok]
        n_fail = len(self.trials) - len(ok)
        with_fail_rte = rte + [self.rte_sentinel()] * n_fail
        with_fail_rre = rre + [RRE_SENTINEL] * n_fail
        e1, c1 = histogram(rte, *self.rte_bins) if rte else (np.linspace(*self.rte_bins[:2], self.rte_bins[2] + 1), np.zeros(self.rte_bins[2], int))
        e2, c2 = histogram(rre, *self.rre_bins) if rre else (np.linspace(*self.rre_bins[:2], self.rre_bins[2] + 1), np.zeros(self.rre_bins[2], int))
        return {
            "setting": self.setting,
            "config": self.config,
            "num_trials": len(self.trials),
            "num_failed": n_fail,
            "failure_rate": self.failure_rate,
            "rte": _stats(rte),
            "rre": _stats(rre),
            "rte_with_failures": _stats(with_fail_rte),
            "rre_with_failures": _stats(with_fail_rre),
            "histograms": {
                "rte": {"edges": e1.tolist(), "counts": c1.tolist()},
                "rre": {"edges": e2.tolist(), "counts": c2.tolist()},
            },
        }


@dataclass
class BenchmarkSummary:
    fingerprint: str
    config: dict
    sweep: Optional[str]
    settings: List[SettingSummary]
    runtime: Dict[str, float] = field(default_factory=dict)

    @property
    def trials(self) -> List[TrialResult]:
        return [t for s in self.settings for t in s.trials]

    def deterministic_dict(self) -> dict:
        """Summary without timing; equal across reruns with the same master seed."""
        return {
            "fingerprint": self.fingerprint,
            "config": self.config,
            "sweep": self.sweep,
            "settings": [s.to_dict() for s in self.settings],
        }

    def to_dict(self) -> dict:
        d = self.deterministic_dict()
        d["runtime"] = dict(self.runtime)
        return d


def default_workers() -> int:
    return max(1, int(os.environ.get("FRUSTREG_THREADS", "1")))


def run_benchmark(
    cfg: SuiteConfig,
    sweep: Optional[Tuple[str, Sequence]] = None,
    workers: Optional[int] = None,
    progress=None,
) -> BenchmarkSummary:
    """Run ``cfg.trials`` trials for every sweep setting (or once without a sweep).

    Results are keyed by (setting, trial index) and sorted, so the summary is
    independent of the worker count.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()
    key, values = sweep if sweep is not None else (None, [None])
    if key is not None and key not in SWEEP_KEYS:
        raise ValueError(f"invalid sweep key {key!r}; valid keys: {', '.join(SWEEP_KEYS)}")

    jobs = []  # (config, trial, starts prefixes)
    setting_cfgs = {}
    if key == "starts" and cfg.method == "solver":
        ks = [int(v) for v in values]
        for k in ks:
            setting_cfgs[f"starts={k}"] = apply_setting(cfg, "starts", k)
        jobs = [(cfg, i, tuple(ks)) for i in range(cfg.trials)]
    else:
        for v in values:
            scfg = apply_setting(cfg, key, v)
            label = "" if key is None else f"{key}={_value_of(scfg, key)}"
            setting_cfgs[label] = scfg
            jobs += [(scfg, i, ()) for i in range(cfg.trials)]

    def work(job):
        scfg, i, prefixes = job
        res = run_trial(scfg, i, prefixes)
        if key is not None and not prefixes:
            res = [replace(r, setting=f"{key}={_value_of(scfg, key)}") for r in res]
        if progress is not None:
            progress(res)
        return res

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = [r for rs in ex.map(work, jobs) for r in rs]
    else:
        results = [r for job in jobs for r in work(job)]

    settings = []
    for label, scfg in setting_cfgs.items():
        trials = sorted((r for r in results if r.setting == label), key=lambda r: r.trial)
        settings.append(SettingSummary(label, scfg.to_dict(), trials))
    wall = time.perf_counter() - t0
    per_trial = [r.wall_time for r in results]
    runtime = {
        "wall_time": wall,
        "trial_time_mean": float(np.mean(per_trial)),
        "trial_time_max": float(np.max(per_trial)),
        "workers": workers,
    }
    return BenchmarkSummary(cfg.fingerprint(), cfg.to_dict(), key, settings, runtime)


def _value_of(cfg: SuiteConfig, key: str):
    if key == "starts":
        return cfg.solver.num_starts
    if key == "points":
        return cfg.num_points
    return cfg.max_translation


# ---------------------------------------------------------------------------
# output


def _guard_io(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_guard_io
def write_summary_json(summary: BenchmarkSummary, path) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, allow_nan=True) + "\n")


@_guard_io
def write_trials_csv(summary: BenchmarkSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting", "trial", "seed", "noise", "rte", "rre", "cost", "iterations", "status"])
        for t in summary.trials:
            w.writerow([t.setting, t.trial, t.seed, repr(t.noise), repr(t.rte), repr(t.rre), repr(t.cost), t.iterations, t.status])


def _histogram_values(source, metric: str) -> List[float]:
    if isinstance(source, BenchmarkSummary):
        source = source.trials
    vals = []
    for t in source:
        if isinstance(t, TrialResult):
            if t.ok:
                vals.append(getattr(t, metric))
        elif isinstance(t, RegistrationError):
            vals.append(getattr(t, metric))
        else:
            vals.append(float(t))
    return vals


@_guard_io
def emit_histogram(source, path, fmt: Optional[str] = None, metric: str = "rte",
                   lo: Optional[float] = None, hi: Optional[float] = None, bins: Optional[int] = None) -> Path:
    """Write a percent-per-bin histogram of ``metric`` as CSV or SVG.

    ``source`` is a summary, a list of trials/errors, or raw values.
    """
    if metric not in ("rte", "rre"):
        raise ValueError("metric must be 'rte' or 'rre'")
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in ("csv", "svg"):
        raise ValueError(f"format must be csv or svg, got {fmt!r}")
    vals = _histogram_values(source, metric)
    if not vals:
        raise ValueError("histogram needs at least one successful trial")
    dlo, dhi, dbins = RTE_BINS if metric == "rte" else RRE_BINS
    edges, counts = histogram(vals, dlo if lo is None else lo, dhi if hi is None else hi, dbins if bins is None else bins)
    pct = 100.0 * counts / counts.sum()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "percentage"])
            for a, b, p in zip(edges[:-1], edges[1:], pct):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(p))])
    else:
        label = "RTE (m)" if metric == "rte" else "RRE (°)"
        histogram_figure(edges, pct, label, path)
    return path
