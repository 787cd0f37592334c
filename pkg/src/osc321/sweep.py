"""Parameter-grid sweeps with a resumable manifest and byte-stable CSV output."""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, Osc321Error, PartialFailure

TASKS = ("steady", "spectrum", "meanfield", "trajectory", "coupled")
MANIFEST = "manifest.json"

COLUMNS = {
    "steady": ["mean_n", "mu2", "class", "tail_mass"],
    "spectrum": ["tau0", "tau1", "tau2", "M_ratio"],
    "meanfield": ["n0_stable", "n_plus", "n_plus_stable", "bistable"],
    "trajectory": ["jumps_loss1", "jumps_gain2", "jumps_loss3", "mean_n_time_avg", "bimodal"],
    "coupled": ["J_over_kappa2", "F2_over_J2", "F4_over_J4", "periodicity_class"],
}
AXES = ["kappa1_over_kappa2", "kappa3_over_kappa2"]


def tool_version() -> str:
    from . import __version__

    return __version__


def _axis(spec, name) -> list[float]:
    if isinstance(spec, (list, tuple)):
        values = [float(v) for v in spec]
    elif isinstance(spec, dict) and "values" in spec:
        values = [float(v) for v in spec["values"]]
    elif isinstance(spec, dict) and {"min", "max"} <= spec.keys():
        num = int(spec.get("num", 41))
        lo, hi = float(spec["min"]), float(spec["max"])
        if not (lo > 0 and hi > 0) or num < 1:
            raise ConfigInvalid(f"axis {name}: bounds must be positive and num >= 1")
        values = np.logspace(math.log10(lo), math.log10(hi), num).tolist()
    elif isinstance(spec, (int, float)):
        values = [float(spec)]
    else:
        raise ConfigInvalid(f"axis {name}: give a number, a list, {{values}} or {{min, max, num}}")
    if not values or any(not (v > 0 and math.isfinite(v)) for v in values):
        raise ConfigInvalid(f"axis {name}: values must be positive and finite")
    return values


@dataclass
class SweepConfig:
    """Grid sweep description; every rate is in units of kappa2.

    JSON form::

        {"axes": {"kappa1_over_kappa2": {"min": 1, "max": 100, "num": 41},
                  "kappa3_over_kappa2": 0.01},
         "tasks": ["steady", "spectrum"],
         "output_dir": "out", "seed": 0, "J_over_kappa2": 0.01}
    """

    kappa1: list
    kappa3: list
    tasks: list
    output_dir: str
    J_over_kappa2: float = 1e-2
    seed: int = 0
    model: str = "canonical"
    n_max: int | None = None
    trajectory: dict = field(default_factory=lambda: {"t_final": 200.0, "burn_in": 10.0, "window": 0.1})

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "SweepConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("sweep config must be a JSON object")
        known = {"axes", "tasks", "output_dir", "J_over_kappa2", "seed", "model", "n_max", "trajectory"}
        extra = set(data) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys: {sorted(extra)}")
        axes = data.get("axes")
        if not isinstance(axes, dict) or set(axes) != set(AXES):
            raise ConfigInvalid(f"axes must define exactly {AXES}")
        tasks = data.get("tasks")
        if not tasks or not isinstance(tasks, list) or any(t not in TASKS for t in tasks):
            raise ConfigInvalid(f"tasks must be a nonempty subset of {list(TASKS)}")
        model = data.get("model", "canonical")
        if model != "canonical":
            raise ConfigInvalid("only the canonical model template is supported")
        out = data.get("output_dir")
        if not isinstance(out, str) or not out:
            raise ConfigInvalid("output_dir must be a nonempty string")
        if base_dir is not None and not os.path.isabs(out):
            out = os.path.join(str(base_dir), out)
        J = float(data.get("J_over_kappa2", 1e-2))
        if not 0 <= J <= 0.1:
            raise ConfigInvalid("J_over_kappa2 must lie in [0, 0.1]")
        n_max = data.get("n_max")
        if n_max is not None and (int(n_max) != n_max or n_max < 10):
            raise ConfigInvalid("n_max must be an integer >= 10")
        traj = {"t_final": 200.0, "burn_in": 10.0, "window": 0.1}
        traj.update(data.get("trajectory", {}))
        if not (traj["t_final"] > traj["burn_in"] >= 0 and traj["window"] > 0):
            raise ConfigInvalid("trajectory needs t_final > burn_in >= 0 and window > 0")
        return cls(
            kappa1=_axis(axes[AXES[0]], AXES[0]),
            kappa3=_axis(axes[AXES[1]], AXES[1]),
            tasks=list(dict.fromkeys(tasks)),
            output_dir=out,
            J_over_kappa2=J,
            seed=int(data.get("seed", 0)),
            model=model,
            n_max=None if n_max is None else int(n_max),
            trajectory=traj,
        )

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read sweep config {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def physics(self) -> dict:
        """Everything that influences results (the output location does not)."""
        d = asdict(self)
        d.pop("output_dir")
        return d

    def hash(self) -> str:
        from .trajectories import config_hash

        return config_hash(self.physics())

    def points(self):
        """``(key, task, i3, i1, kappa1, kappa3)`` in output order."""
        for task in self.tasks:
            for i3, k3 in enumerate(self.kappa3):
                for i1, k1 in enumerate(self.kappa1):
                    yield f"{task}:{i3}:{i1}", task, i3, i1, k1, k3


# ---------------------------------------------------------------------------
# per-point work


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def compute_point(task: str, k1: float, k3: float, cfg: dict, run_id: int) -> dict:
    """Run one task at one grid point and return its CSV fields as strings."""
    from .model import ChannelSet, FockTruncation, suggest_truncation

    cs = ChannelSet.canonical(k1, k3)

    def trunc():
        return FockTruncation(cfg["n_max"]) if cfg["n_max"] else suggest_truncation(cs)

    if task == "meanfield":
        from .meanfield import mf_fixed_points

        s = mf_fixed_points(k1, 1.0, k3)
        vals = [s.stable_n0, s.n_plus, s.stable_n_plus, s.bistable]
    elif task == "steady":
        from .steady import steady_state_report

        r = steady_state_report(cs, trunc())
        vals = [r.mean_n, r.mu2, r.classification, r.tail_mass]
    elif task == "spectrum":
        from .spectral import metastability_ratio, slowest_timescales

        tr = trunc()
        taus = [r.tau for r in slowest_timescales(cs, tr, (0, 1, 2))]
        vals = [*taus, metastability_ratio(cs, tr).ratio]
    elif task == "coupled":
        from .coupled import coupled_report

        J = cfg["J_over_kappa2"]
        rep = coupled_report(cs, trunc(), J)
        f2, f4 = rep.scaled(J) if J > 0 else (0.0, 0.0)
        vals = [J, f2, f4, rep.periodicity]
    elif task == "trajectory":
        from .errors import NotBimodal
        from .trajectories import intermittency_stats, run_trajectory

        tp = cfg["trajectory"]
        rec = run_trajectory(cs, trunc(), tp["t_final"], cfg["seed"], run_id=run_id)
        counts = rec.jump_counts(tp["burn_in"])
        try:
            bimodal = intermittency_stats(rec, tp["window"], t_start=tp["burn_in"]).bimodal
        except NotBimodal:
            bimodal = False
        except ValueError:
            bimodal = None
        vals = [*counts.tolist(), rec.time_average_n(tp["burn_in"]), bimodal]
    else:
        raise ConfigInvalid(f"unknown task {task!r}")
    return dict(zip(AXES + COLUMNS[task], [_fmt(k1), _fmt(k3)] + [_fmt(v) for v in vals]))


def _worker(args):
    key, task, k1, k3, cfg, run_id = args
    try:
        return key, "done", compute_point(task, k1, k3, cfg, run_id), None
    except Osc321Error as exc:
        return key, "failed", None, f"{type(exc).__name__}: {exc}"
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return key, "failed", None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# driver


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_json_atomic(path: Path, data: dict) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def write_task_csv(path: Path, task: str, rows: list[dict]) -> None:
    header = AXES + COLUMNS[task]
    lines = [",".join(header)]
    lines += [",".join(r[h] for h in header) for r in rows]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SweepResult:
    manifest: dict
    computed: int
    failed: list
    csv_paths: dict


def run_sweep(config: SweepConfig, jobs: int | None = None, resume: bool = True) -> SweepResult:
    """Evaluate every (task, grid point) and write one CSV per task.

    Progress is kept in ``manifest.json``. With ``resume`` a rerun of the same
    configuration recomputes only points that are not done; a manifest from a
    different configuration is refused. Workers only compute; the parent
    process is the single writer of the manifest and the CSVs.

    Raises
    ------
    ConfigInvalid
        Output directory not writable or holding another sweep.
    PartialFailure
        Some points failed; CSVs and manifest are still written and the
        result is attached as ``exc.result``.
    """
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigInvalid(f"cannot create output_dir {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigInvalid(f"output_dir {out} is not writable")
    mpath = out / MANIFEST
    h = config.hash()
    manifest = None
    if resume and mpath.exists():
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            manifest = None
        if manifest is not None and manifest.get("config_hash") != h:
            raise ConfigInvalid(
                f"{mpath} belongs to a different configuration; rerun without resume to overwrite"
            )
    if manifest is None:
        manifest = {
            "config_hash": h,
            "config": config.physics(),
            "tool_version": tool_version(),
            "created": _now(),
            "points": {},
        }
    points = manifest["points"]
    cfg = config.physics()
    todo = []
    for idx, (key, task, i3, i1, k1, k3) in enumerate(config.points()):
        if points.get(key, {}).get("status") == "done":
            continue
        points[key] = {"status": "pending"}
        run_id = i3 * len(config.kappa1) + i1
        todo.append((key, task, k1, k3, cfg, run_id))

    jobs = jobs or os.cpu_count() or 1
    last_flush = time.monotonic()

    def record(key, status, row, err):
        nonlocal last_flush
        entry = {"status": status, "finished": _now()}
        if row is not None:
            entry["row"] = row
        if err is not None:
            entry["error"] = err
        points[key] = entry
        if time.monotonic() - last_flush > 1.0:
            manifest["updated"] = _now()
            _write_json_atomic(mpath, manifest)
            last_flush = time.monotonic()

    if todo and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_worker, t) for t in todo]
            for fut in as_completed(futures):
                record(*fut.result())
    else:
        for t in todo:
            record(*_worker(t))

    manifest["updated"] = _now()
    manifest["tool_version"] = tool_version()
    _write_json_atomic(mpath, manifest)

    csv_paths = {}
    for task in config.tasks:
        rows = [
            points[key]["row"]
            for key, t, *_ in config.points()
            if t == task and points[key].get("status") == "done"
        ]
        path = out / f"{task}.csv"
        write_task_csv(path, task, rows)
        csv_paths[task] = path

    failed = sorted(k for k, v in points.items() if v.get("status") == "failed")
    result = SweepResult(manifest, len(todo), failed, csv_paths)
    if failed:
        exc = PartialFailure(f"{len(failed)} of {len(points)} points failed")
        exc.result = result
        raise exc
    return result


def render_sweep_plots(result: SweepResult, scale: str = "linear") -> list[Path]:
    """Heatmap every result column of every task CSV next to the CSV."""
    from .plotting import render_heatmap

    made = []
    for task, path in result.csv_paths.items():
        if len(path.read_text(encoding="utf-8").splitlines()) < 2:
            continue
        for col in COLUMNS[task]:
            if col == "J_over_kappa2":
                continue
            sc = "symlog" if col in ("F2_over_J2", "F4_over_J4") else scale
            made.append(render_heatmap(path, col, path.with_name(f"{task}_{col}.svg"), sc))
    return made
