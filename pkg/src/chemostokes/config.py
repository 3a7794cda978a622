"""Run configuration: dataclasses + JSON parsing with path-named errors.

A configuration is a plain JSON object; parse_config validates it into
typed dataclasses.  Error messages name the offending JSON path
("model.m: must be > 1") so CLI users can fix files without reading code.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass(frozen=True)
class ModelParams:
    """Physical/regularization parameters.

    m: nonlinear diffusion exponent (> 1).
    k_d: diffusivity scale (> 0).
    eps: regularization strength (0 < eps <= 1).
    phi_gradient: constant gradient of the gravitational-type potential,
        one entry per axis; the buoyancy force on the fluid is
        n * phi_gradient.
    """
    m: float
    k_d: float
    eps: float
    phi_gradient: tuple


@dataclass(frozen=True)
class TimeParams:
    t_final: float
    dt_max: float
    sample_every: float | None = None   # None: record only t=0 and t_final
    force_dt: float | None = None       # debug: bypass the stability selector


@dataclass(frozen=True)
class ICSpec:
    """Initial-condition presets; see init_state for the preset registry."""
    n0: dict
    c0: dict
    u0: dict = field(default_factory=lambda: {"preset": "zero"})
    perturb: dict | None = None         # {"amplitude": a}: seeded multiplicative noise on n0


@dataclass(frozen=True)
class DiagnosticsParams:
    kappa: float | None = None      # kinetic-energy weight; None: 0.5*max(c0) + 1
    c1_quasi: float | None = None   # quasi-energy constant; None: running sup max n
    sigma_c: float | None = None    # gradient-energy floor; None: 1e-12*max(c0)
    lp: tuple = (2.0, 4.0, "m")     # Lp norms of n to record ("m" -> model.m)
    window: float = 1.0             # window length for dissipation/quasi checks


@dataclass(frozen=True)
class SimConfig:
    dim: int
    grid_cells: tuple
    grid_extent: tuple
    model: ModelParams
    ic: ICSpec
    time: TimeParams
    output_dir: str | None = None
    seed: int = 0
    diagnostics: DiagnosticsParams = field(default_factory=DiagnosticsParams)


def _req(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}.{key}: missing required key")
    return obj[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: must be a number, got {value!r}")
    return float(value)


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def parse_config(source) -> SimConfig:
    """Parse a config from a dict, a JSON string, or a file path."""
    if isinstance(source, dict):
        raw = source
    else:
        text = source
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source) as fh:
                text = fh.read()
        elif isinstance(text, str) and not text.lstrip().startswith("{"):
            raise ConfigError(f"no such config file: {source}")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config is not valid JSON: {exc.msg} "
                f"(line {exc.lineno}, column {exc.colno})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")

    gr = _req(raw, "grid", "config")
    cells = tuple(int(c) for c in _req(gr, "cells", "grid"))
    _check(len(cells) in (2, 3), f"grid.cells: need 2 or 3 axes, got {cells}")
    _check(all(c >= 2 for c in cells),
           f"grid.cells: need >= 2 cells per axis, got {cells}")
    extent = tuple(_num(e, "grid.extent") for e in _req(gr, "extent", "grid"))
    _check(len(extent) == len(cells),
           f"grid.extent: must have {len(cells)} entries, got {extent}")
    _check(all(e > 0 for e in extent),
           f"grid.extent: must be positive, got {extent}")
    dim = len(cells)

    md = _req(raw, "model", "config")
    m = _num(_req(md, "m", "model"), "model.m")
    _check(m > 1.0, f"model.m: must be > 1 (degenerate diffusion), got {m}")
    k_d = _num(md.get("k_D", md.get("k_d", 1.0)), "model.k_D")
    _check(k_d > 0.0, f"model.k_D: must be > 0, got {k_d}")
    eps = _num(_req(md, "eps", "model"), "model.eps")
    _check(0.0 < eps <= 1.0, f"model.eps: must lie in (0, 1], got {eps}")

    phi = raw.get("phi", {"gradient": [0.0] * dim})
    grad = tuple(_num(g, "phi.gradient") for g in _req(phi, "gradient", "phi"))
    _check(len(grad) == dim,
           f"phi.gradient: must have {dim} entries, got {grad}")
    model = ModelParams(m=m, k_d=k_d, eps=eps, phi_gradient=grad)

    ic_raw = _req(raw, "ic", "config")
    for fld in ("n0", "c0"):
        spec = _req(ic_raw, fld, "ic")
        _check(isinstance(spec, dict) and "preset" in spec,
               f"ic.{fld}: must be an object with a 'preset' key")
    perturb = ic_raw.get("perturb")
    if perturb is not None:
        amp = _num(_req(perturb, "amplitude", "ic.perturb"),
                   "ic.perturb.amplitude")
        _check(0.0 <= amp < 1.0,
               f"ic.perturb.amplitude: must lie in [0, 1), got {amp}")
    ic = ICSpec(n0=dict(ic_raw["n0"]), c0=dict(ic_raw["c0"]),
                u0=dict(ic_raw.get("u0", {"preset": "zero"})),
                perturb=dict(perturb) if perturb else None)

    tm = _req(raw, "time", "config")
    t_final = _num(_req(tm, "t_final", "time"), "time.t_final")
    _check(t_final > 0.0, f"time.t_final: must be > 0, got {t_final}")
    dt_max = _num(_req(tm, "dt_max", "time"), "time.dt_max")
    _check(dt_max > 0.0, f"time.dt_max: must be > 0, got {dt_max}")
    sample_every = tm.get("sample_every")
    if sample_every is not None:
        sample_every = _num(sample_every, "time.sample_every")
        _check(0.0 < sample_every <= t_final,
               f"time.sample_every: must lie in (0, t_final], got {sample_every}")
    force_dt = tm.get("force_dt")
    if force_dt is not None:
        force_dt = _num(force_dt, "time.force_dt")
        _check(force_dt > 0.0, f"time.force_dt: must be > 0, got {force_dt}")
    time = TimeParams(t_final=t_final, dt_max=dt_max,
                      sample_every=sample_every, force_dt=force_dt)

    dg = raw.get("diagnostics", {})
    lp = tuple(dg.get("lp", (2.0, 4.0, "m")))
    lp_resolved = []
    for p in lp:
        if p == "m":
            lp_resolved.append("m")
        else:
            pv = _num(p, "diagnostics.lp")
            _check(pv >= 1.0, f"diagnostics.lp: exponents must be >= 1, got {pv}")
            lp_resolved.append(pv)
    diag = DiagnosticsParams(
        kappa=None if dg.get("kappa") is None else _num(dg["kappa"], "diagnostics.kappa"),
        c1_quasi=None if dg.get("c1_quasi") is None else _num(dg["c1_quasi"], "diagnostics.c1_quasi"),
        sigma_c=None if dg.get("sigma_c") is None else _num(dg["sigma_c"], "diagnostics.sigma_c"),
        lp=tuple(lp_resolved),
        window=_num(dg.get("window", 1.0), "diagnostics.window"),
    )

    output = raw.get("output", {})
    out_dir = output.get("dir")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed: must be an integer, got {seed!r}")

    return SimConfig(dim=dim, grid_cells=cells, grid_extent=extent,
                     model=model, ic=ic, time=time,
                     output_dir=out_dir, seed=seed, diagnostics=diag)


def config_to_dict(cfg: SimConfig) -> dict:
    """Canonical dict form of a config (manifest echo, resume comparison)."""
    return {
        "grid": {"cells": list(cfg.grid_cells),
                 "extent": list(cfg.grid_extent)},
        "model": {"m": cfg.model.m, "k_D": cfg.model.k_d,
                  "eps": cfg.model.eps},
        "phi": {"gradient": list(cfg.model.phi_gradient)},
        "ic": {"n0": cfg.ic.n0, "c0": cfg.ic.c0, "u0": cfg.ic.u0,
               **({"perturb": cfg.ic.perturb} if cfg.ic.perturb else {})},
        "time": {"t_final": cfg.time.t_final, "dt_max": cfg.time.dt_max,
                 **({"sample_every": cfg.time.sample_every}
                    if cfg.time.sample_every is not None else {}),
                 **({"force_dt": cfg.time.force_dt}
                    if cfg.time.force_dt is not None else {})},
        "diagnostics": {
            **({"kappa": cfg.diagnostics.kappa}
               if cfg.diagnostics.kappa is not None else {}),
            **({"c1_quasi": cfg.diagnostics.c1_quasi}
               if cfg.diagnostics.c1_quasi is not None else {}),
            **({"sigma_c": cfg.diagnostics.sigma_c}
               if cfg.diagnostics.sigma_c is not None else {}),
            "lp": list(cfg.diagnostics.lp),
            "window": cfg.diagnostics.window,
        },
        "seed": cfg.seed,
    }
