"""Parameter sweeps: one base config, one swept axis, parallel runs.

A sweep spec is JSON:

    {"axis": "eps", "values": [0.1, 0.05, 0.025],
     "base_config": { ... or a path string ... },
     "parallel_runs": 3}

Each value gets its own run directory under the sweep output root; runs
execute in separate processes (spawn), so results are independent of the
worker count.  The summary CSV orders rows by the given value order and,
for eps sweeps, records the L1 distance between final density fields of
consecutive runs (the regularization-convergence monitor).  For m sweeps
every run directory gets an exponents_certificate.json with whatever part
of the exponent algebra is defined at that m.
"""

from __future__ import annotations

import csv
import json
import multiprocessing as mp
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import exponents as expo
from .config import parse_config
from .errors import ChemoStokesError, ConfigError
from .snapshots import load_manifest, read_field
from .solver import run

_AXES = ("m", "eps", "grid")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    base_config: dict
    parallel_runs: int = 1


def parse_sweep(source) -> SweepSpec:
    """Parse and validate a sweep spec from a dict, JSON string, or path."""
    if isinstance(source, dict):
        raw = source
    else:
        text = source
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source) as fh:
                text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"sweep spec is not valid JSON: {exc.msg} "
                f"(line {exc.lineno}, column {exc.colno})") from None

    axis = raw.get("axis")
    if axis not in _AXES:
        raise ConfigError(f"sweep.axis: must be one of {_AXES}, got {axis!r}")
    values = raw.get("values")
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ConfigError("sweep.values: must be a nonempty list")
    vals = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"sweep.values: entries must be numbers, got {v!r}")
        vals.append(float(v))
    diffs = np.diff(vals)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError(
            f"sweep.values: must be strictly monotone, got {vals}")
    if axis == "grid" and any(v != int(v) or v < 2 for v in vals):
        raise ConfigError(
            f"sweep.values: grid sweeps need integer cell counts >= 2, "
            f"got {vals}")

    base = raw.get("base_config")
    if isinstance(base, str):
        if not os.path.exists(base):
            raise ConfigError(f"sweep.base_config: no such file {base!r}")
        with open(base) as fh:
            base = json.load(fh)
    if not isinstance(base, dict):
        raise ConfigError(
            "sweep.base_config: must be a config object or a path to one")
    parse_config(dict(base))   # validate the base once, up front

    workers = raw.get("parallel_runs", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise ConfigError(
            f"sweep.parallel_runs: must be a positive integer, got {workers!r}")
    return SweepSpec(axis=axis, values=tuple(vals), base_config=base,
                     parallel_runs=workers)


def apply_override(base: dict, axis: str, value: float) -> dict:
    """Deep-copied base config with the swept value substituted."""
    cfg = json.loads(json.dumps(base))
    if axis == "m":
        cfg.setdefault("model", {})["m"] = value
    elif axis == "eps":
        cfg.setdefault("model", {})["eps"] = value
    else:
        dim = len(cfg["grid"]["cells"])
        cfg["grid"]["cells"] = [int(value)] * dim
    return cfg


def _value_tag(axis: str, value: float) -> str:
    return f"run_{axis}_{value:g}".replace(".", "p")


def run_one(task):
    """Worker: execute one sweep member.  Must stay a module-level
    function (spawn start method pickles it by reference)."""
    cfg_dict, run_dir, seed = task
    cfg_dict = dict(cfg_dict)
    cfg_dict.setdefault("output", {})["dir"] = run_dir
    cfg_dict.setdefault("seed", seed)
    summary = {"run_dir": run_dir, "status": "complete", "error": "",
               "steps": 0, "mass_drift_rel": "", "decay_gap_n": "",
               "decay_gap_c": "", "decay_gap_u": "", "checks_passed": ""}
    try:
        result = run(parse_config(cfg_dict))
    except ChemoStokesError as exc:
        summary["status"] = "failed"
        summary["error"] = str(exc)
        return summary
    first, last = result.records[0], result.records[-1]
    summary["steps"] = result.steps_taken
    summary["mass_drift_rel"] = abs(last.mass - first.mass) / abs(first.mass)
    summary["decay_gap_n"] = last.decay_gap_n
    summary["decay_gap_c"] = last.decay_gap_c
    summary["decay_gap_u"] = last.decay_gap_u
    summary["checks_passed"] = (
        f"{sum(c.passed for c in result.checks)}/{len(result.checks)}")
    return summary


def _ladder_json(ladder) -> dict:
    return {
        "kind": ladder.kind, "m": ladder.m, "cap": ladder.cap,
        "terminated_reason": ladder.terminated_reason,
        "final_p": ladder.final_p,
        "entries": [
            {"k": e.k, "p": e.p, "gamma_floor": e.gamma_floor,
             "growth_ok": e.growth_ok,
             "admissible": None if e.certificate is None
             else e.certificate.admissible}
            for e in ladder.entries],
    }


def write_exponent_certificate(run_dir: str, m: float, cap: float = 1e6):
    """Attach whatever exponent evidence is defined at this m."""
    cert: dict = {"m": m, "threshold": asdict(expo.threshold_certificate(m))}
    try:
        cert["linear_ladder"] = _ladder_json(
            expo.run_linear_ladder(m, 1.0, cap))
    except ConfigError as exc:
        cert["linear_ladder"] = {"undefined": str(exc)}
    try:
        cert["psi_ladder"] = _ladder_json(expo.run_psi_ladder(m, cap))
    except ConfigError as exc:
        cert["psi_ladder"] = {"undefined": str(exc)}
    with open(os.path.join(run_dir, "exponents_certificate.json"), "w") as fh:
        json.dump(cert, fh, indent=1)
        fh.write("\n")


def _final_density(run_dir: str):
    manifest = load_manifest(run_dir)
    if manifest["status"] != "complete":
        return None
    entry = manifest["samples"][-1]["files"]["n"]
    arr, _ = read_field(os.path.join(run_dir, entry["path"]),
                        expect_sha256=entry["sha256"])
    return arr


def run_sweep(spec: SweepSpec, out_root: str, workers: int | None = None,
              seed: int = 0):
    """Execute all members; returns (summaries, summary_csv_path)."""
    os.makedirs(out_root, exist_ok=True)
    tasks = []
    for value in spec.values:
        run_dir = os.path.join(out_root, _value_tag(spec.axis, value))
        tasks.append((apply_override(spec.base_config, spec.axis, value),
                      run_dir, seed))

    nworkers = workers if workers is not None else spec.parallel_runs
    nworkers = max(1, min(nworkers, len(tasks)))
    if nworkers == 1:
        summaries = [run_one(t) for t in tasks]
    else:
        ctx = mp.get_context("spawn")
        with ctx.Pool(nworkers) as pool:
            summaries = pool.map(run_one, tasks)

    for value, summary in zip(spec.values, summaries):
        summary["axis"] = spec.axis
        summary["value"] = value
        if spec.axis == "m" and summary["status"] == "complete":
            write_exponent_certificate(summary["run_dir"], value)

    if spec.axis == "eps":
        prev = None
        cell_vol = None
        for summary in summaries:
            summary["l1_distance_to_prev"] = ""
            if summary["status"] != "complete":
                prev = None
                continue
            cfg = parse_config(apply_override(
                spec.base_config, "eps", summary["value"]))
            cell_vol = float(np.prod([e / c for e, c in
                                      zip(cfg.grid_extent, cfg.grid_cells)]))
            cur = _final_density(summary["run_dir"])
            if prev is not None and cur is not None:
                summary["l1_distance_to_prev"] = float(
                    np.sum(np.abs(cur - prev)) * cell_vol)
            prev = cur

    columns = ["axis", "value", "run_dir", "status", "steps",
               "mass_drift_rel", "decay_gap_n", "decay_gap_c",
               "decay_gap_u", "checks_passed"]
    if spec.axis == "eps":
        columns.append("l1_distance_to_prev")
    columns.append("error")
    path = os.path.join(out_root, "sweep_summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for summary in summaries:
            w.writerow([_csv_cell(summary.get(col, "")) for col in columns])
    return summaries, path


def _csv_cell(v):
    return repr(v) if isinstance(v, float) else v
