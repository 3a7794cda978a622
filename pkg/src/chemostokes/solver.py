"""Conservative finite-volume stepper for the regularized system.

Unknowns on a MAC grid: cell density n, attractant c (cell centers),
velocity u (faces), pressure accumulator P (cell centers).  One step of
size dt is a Lie splitting u -> c -> n:

  u:  add the buoyancy force n_face * grad(phi), Helmholtz-project it
      (an exact discrete gradient force is absorbed into pressure here,
      so a buoyancy-balanced rest state stays at rest to round-off),
      implicit viscous solve (I - dt Lap), final projection.  Both
      projections and the viscous solve are exact spectral solves.

  c:  explicit flux-form upwind advection, implicit pointwise consumption
      c/(1 + dt f_eps(n)), implicit diffusion (DCT solve), then a clip of
      negative transform round-off.  Every sub-step is monotone, so
      0 <= c_new and max c is non-increasing by construction.

  n:  single explicit flux-form update with three face fluxes per axis:
      upwind advection u * n_up, upwind chemotactic drift
      n_up chi_eps(n_up) * grad_h c, and degenerate diffusion
      -avg(d_eps(n)) * grad_h n.  Boundary faces carry zero flux, so the
      cell sum telescopes and mass is conserved to round-off.

dt is 0.9 times the tightest of the advective, drift, and diffusive
stability limits (capped at dt_max); each n-update additionally verifies
the per-cell outflow fraction stays below 1, which is what guarantees
positivity, and raises NumericalError naming the first offending cell if
it does not.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig, config_to_dict
from .diagnostics import RunningTallies, resolve_diagnostics, evaluate, \
    standard_checks, write_csv, read_csv, append_csv, ResolvedDiagnostics
from .errors import ConfigError, NumericalError
from .grid import Grid, axslice, divergence, face_avg, face_diff, \
    face_upwind, full_faces, interior
from .regularization import chi_eps, d_eps, f_eps
from .snapshots import load_manifest, load_snapshot, write_manifest, \
    write_snapshot
from .spectral import SpectralCache, face_laplacian, neumann_laplacian, \
    solve_cell_helmholtz, solve_face_helmholtz, solve_neumann_poisson

DIV_TOL = 1e-10      # projection residual contract
SOLVE_TOL = 1e-10    # implicit-solve residual contract


@dataclass
class FieldState:
    """Prognostic fields at one instant.  u[a] is the full face array of
    component a, boundary faces included (and kept at zero)."""
    t: float
    n: np.ndarray
    c: np.ndarray
    u: list
    p: np.ndarray

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.n.copy(), self.c.copy(),
                          [ua.copy() for ua in self.u], self.p.copy())


@dataclass
class StepReport:
    t: float
    dt: float
    cfl_advective: float     # dt * summed advective rate
    cfl_drift: float
    cfl_diffusive: float
    residuals: dict
    n_min: float
    n_max: float
    c_max: float
    div_u_inf: float


# ============================================================
# initial conditions
# ============================================================

_SCALAR_PRESETS = ("constant", "gaussian", "two_bumps", "cosine")


def _build_scalar(grid: Grid, spec: dict, name: str) -> np.ndarray:
    preset = spec.get("preset")
    xs = grid.centers()
    center = [0.5 * e for e in grid.extent]
    if preset == "constant":
        value = float(spec.get("value", 1.0))
        if value < 0.0:
            raise ConfigError(f"ic.{name}: constant value must be >= 0, "
                              f"got {value}")
        return np.full(grid.cells, value)
    if preset == "gaussian":
        amp = float(spec.get("amplitude", 1.0))
        width = float(spec.get("width", 0.1 * min(grid.extent)))
        floor = float(spec.get("floor", 0.0))
        if amp < 0 or floor < 0 or width <= 0:
            raise ConfigError(
                f"ic.{name}: gaussian needs amplitude >= 0, floor >= 0, "
                f"width > 0")
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        return floor + amp * np.exp(-r2 / (2.0 * width * width))
    if preset == "two_bumps":
        amp = float(spec.get("amplitude", 1.0))
        width = float(spec.get("width", 0.1 * min(grid.extent)))
        if amp <= 0 or width <= 0:
            raise ConfigError(
                f"ic.{name}: two_bumps needs amplitude > 0 and width > 0")
        shift = 0.25 * grid.extent[0]
        out = np.zeros(grid.cells)
        for sgn in (-1.0, 1.0):
            r2 = (xs[0] - (center[0] + sgn * shift)) ** 2
            for x, c in zip(xs[1:], center[1:]):
                r2 = r2 + (x - c) ** 2
            out += amp * np.exp(-r2 / (2.0 * width * width))
        mean = spec.get("mean")
        if mean is not None:
            mean = float(mean)
            if mean <= 0:
                raise ConfigError(f"ic.{name}: mean must be > 0, got {mean}")
            out *= mean / (np.sum(out) * grid.cell_volume / grid.volume)
        return out
    if preset == "cosine":
        base = float(spec.get("value", 1.0))
        amp = float(spec.get("amplitude", 0.5))
        axis = int(spec.get("axis", 0))
        mode = int(spec.get("mode", 1))
        if not 0 <= axis < grid.dim:
            raise ConfigError(f"ic.{name}: cosine axis {axis} out of range")
        if base < abs(amp):
            raise ConfigError(
                f"ic.{name}: cosine needs value >= |amplitude| to stay "
                f"nonnegative, got {base} < |{amp}|")
        x = xs[axis]
        return base + amp * np.cos(mode * np.pi * x / grid.extent[axis])
    raise ConfigError(
        f"ic.{name}: unknown preset {preset!r}; known: {_SCALAR_PRESETS}")


def _build_velocity(grid: Grid, spec: dict):
    preset = spec.get("preset", "zero")
    if preset == "zero":
        return grid.zero_velocity()
    if preset == "vortex":
        # streamfunction on corner nodes -> discretely divergence-free
        amp = float(spec.get("amplitude", 1.0))
        nx, ny = grid.cells[0], grid.cells[1]
        hx, hy = grid.h[0], grid.h[1]
        xn = np.arange(nx + 1) * hx
        yn = np.arange(ny + 1) * hy
        psi2 = amp * np.outer(np.sin(np.pi * xn / grid.extent[0]),
                              np.sin(np.pi * yn / grid.extent[1]))
        u = grid.zero_velocity()
        ux = np.diff(psi2, axis=1) / hy           # (nx+1, ny)
        uy = -np.diff(psi2, axis=0) / hx          # (nx, ny+1)
        if grid.dim == 2:
            u[0][...] = ux
            u[1][...] = uy
        else:
            u[0][...] = ux[:, :, None]
            u[1][...] = uy[:, :, None]
            # u_z stays zero; the roll is independent of z
        return u
    raise ConfigError(f"ic.u0: unknown preset {preset!r}; known: "
                      f"('zero', 'vortex')")


def init_state(grid: Grid, model, ic, seed: int = 0,
               cache: SpectralCache | None = None) -> FieldState:
    """Build the initial state: nonnegative n (not identically zero),
    nonnegative c, divergence-free no-slip u, zero pressure.

    The optional multiplicative perturbation of n uses the counter-based
    Philox generator, so a (seed, shape) pair fully determines it.
    """
    n0 = _build_scalar(grid, ic.n0, "n0")
    if np.min(n0) < 0.0:
        raise ConfigError("ic.n0: initial density must be nonnegative")
    if ic.perturb is not None:
        amp = float(ic.perturb["amplitude"])
        rng = np.random.Generator(np.random.Philox(seed))
        n0 = n0 * (1.0 + amp * rng.uniform(-1.0, 1.0, size=n0.shape))
    if float(np.max(n0)) <= 0.0:
        raise ConfigError("ic.n0: initial density must not vanish identically")
    c0 = _build_scalar(grid, ic.c0, "c0")
    if np.min(c0) < 0.0:
        raise ConfigError("ic.c0: initial attractant must be nonnegative")
    u0 = _build_velocity(grid, ic.u0)
    cache = cache if cache is not None else SpectralCache(grid)
    state = FieldState(t=0.0, n=n0, c=c0, u=u0, p=np.zeros(grid.cells))
    _project(grid, cache, state.u)
    return state


# ============================================================
# sub-steps
# ============================================================

def _project(grid: Grid, cache: SpectralCache, faces) -> np.ndarray:
    """Remove the discrete-gradient part of a face field in place.

    Solves the compatible Neumann Poisson problem for div(faces) and
    subtracts grad(phi) on interior faces; boundary faces are untouched
    (they stay zero).  Returns phi.
    """
    div = divergence(grid, faces)
    phi = solve_neumann_poisson(cache, div)
    for a in range(grid.dim):
        interior(faces[a], a)[...] -= face_diff(grid, phi, a)
    return phi


def step_u(grid: Grid, cache: SpectralCache, state: FieldState, model,
           dt: float) -> dict:
    """Forced Stokes update; see the module docstring for the scheme."""
    w = [ua.copy() for ua in state.u]
    for a in range(grid.dim):
        g = model.phi_gradient[a]
        if g != 0.0:
            interior(w[a], a)[...] += dt * g * face_avg(state.n, a)
    phi1 = _project(grid, cache, w)

    visc_rel = 0.0
    for a in range(grid.dim):
        rhs = interior(w[a], a)
        ustar = solve_face_helmholtz(cache, rhs, a, dt)
        new_full = np.zeros(grid.face_shape(a))
        axslice(new_full, a, slice(1, -1))[...] = ustar
        res = ustar - dt * face_laplacian(grid, new_full, a) - rhs
        visc_rel = max(visc_rel, float(np.max(np.abs(res)))
                       / (1.0 + float(np.max(np.abs(rhs)))))
        state.u[a] = new_full
    phi2 = _project(grid, cache, state.u)
    state.p = (phi1 + phi2) / dt

    div_inf = float(np.max(np.abs(divergence(grid, state.u))))
    if div_inf > DIV_TOL:
        raise NumericalError(
            f"projection left ||div u||_inf = {div_inf:.3e} > {DIV_TOL} "
            f"at t = {state.t}")
    if visc_rel > SOLVE_TOL:
        raise NumericalError(
            f"viscous solve residual {visc_rel:.3e} > {SOLVE_TOL} "
            f"at t = {state.t}")
    return {"div_u_inf": div_inf, "viscous_rel": visc_rel}


def step_c(grid: Grid, cache: SpectralCache, state: FieldState, model,
           dt: float) -> dict:
    """Attractant update: upwind advection, implicit consumption,
    implicit diffusion, round-off clip."""
    c = state.c
    max_before = float(np.max(c))

    fluxes = []
    for a in range(grid.dim):
        speed = interior(state.u[a], a)
        fluxes.append(full_faces(
            grid, speed * face_upwind(c, speed, a), a))
    c_adv = c - dt * divergence(grid, fluxes)

    c_cons = c_adv / (1.0 + dt * f_eps(state.n, model.eps))
    c_new = solve_cell_helmholtz(cache, c_cons, dt)

    res = c_new - dt * neumann_laplacian(grid, c_new) - c_cons
    helm_rel = float(np.max(np.abs(res))) / (1.0 + float(np.max(np.abs(c_cons))))
    if helm_rel > SOLVE_TOL:
        raise NumericalError(
            f"attractant diffusion solve residual {helm_rel:.3e} > "
            f"{SOLVE_TOL} at t = {state.t}")

    min_preclip = float(np.min(c_new))
    c_new = np.maximum(c_new, 0.0)
    max_after = float(np.max(c_new))
    if max_after > max_before + 1e-12 * (1.0 + max_before):
        raise NumericalError(
            f"attractant max rose from {max_before} to {max_after} in one "
            f"step at t = {state.t}; monotone sub-steps must be broken")
    state.c = c_new
    return {"c_helmholtz_rel": helm_rel, "c_min_preclip": min_preclip}


def step_n(grid: Grid, state: FieldState, model, dt: float) -> dict:
    """Density update: one conservative flux-form step."""
    n, c = state.n, state.c
    de = d_eps(n, model.eps, model.m, model.k_d)

    fluxes = []
    adv_speeds, drift_speeds, dfaces = [], [], []
    theta_global = 0.0
    for a in range(grid.dim):
        h = grid.h[a]
        adv = interior(state.u[a], a)
        g = face_diff(grid, c, a)
        n_up = face_upwind(n, g, a)
        drift = chi_eps(n_up, model.eps) * g
        dface = face_avg(de, a)
        flux = adv * face_upwind(n, adv, a) + n_up * drift \
            - dface * face_diff(grid, n, a)
        fluxes.append(full_faces(grid, flux, a))
        adv_speeds.append(adv)
        drift_speeds.append(drift)
        dfaces.append(dface)
        theta_global += dt * (
            (float(np.max(np.abs(adv))) if adv.size else 0.0) / h
            + float(np.max(np.abs(drift))) / h
            + 2.0 * float(np.max(dface)) / (h * h))

    if theta_global >= 1.0:
        _audit_outflow(grid, state, adv_speeds, drift_speeds, dfaces, dt)

    n_new = n - dt * divergence(grid, fluxes)
    n_min = float(np.min(n_new))
    if n_min < 0.0:
        idx = np.unravel_index(int(np.argmin(n_new)), n_new.shape)
        raise NumericalError(
            f"density positivity lost at cell {tuple(int(i) for i in idx)} "
            f"(n = {n_min:.3e}) at t = {state.t} with dt = {dt}")
    state.n = n_new
    return {"theta_outflow_bound": theta_global}


def _audit_outflow(grid: Grid, state, adv_speeds, drift_speeds, dfaces, dt):
    """Per-cell outflow fractions; the sharp positivity certificate.

    Only consulted when the cheap global bound is not already below 1.
    Raises if any cell could flux out more than it holds.
    """
    out = np.zeros(grid.cells)
    up, lo = slice(1, None), slice(0, -1)
    for a in range(grid.dim):
        h = grid.h[a]
        adv_full = full_faces(grid, adv_speeds[a], a)
        drf_full = full_faces(grid, drift_speeds[a], a)
        d_full = full_faces(grid, dfaces[a], a)
        out += dt / h * (np.maximum(axslice(adv_full, a, up), 0.0)
                         - np.minimum(axslice(adv_full, a, lo), 0.0)
                         + np.maximum(axslice(drf_full, a, up), 0.0)
                         - np.minimum(axslice(drf_full, a, lo), 0.0))
        out += dt / (h * h) * (axslice(d_full, a, up)
                               + axslice(d_full, a, lo))
    worst = float(np.max(out))
    if worst >= 1.0:
        idx = np.unravel_index(int(np.argmax(out)), out.shape)
        raise NumericalError(
            f"CFL violation: outflow fraction {worst:.3f} >= 1 at cell "
            f"{tuple(int(i) for i in idx)} at t = {state.t} with dt = {dt}; "
            f"lower dt_max")


# ============================================================
# full step and dt selection
# ============================================================

def stability_rates(grid: Grid, state: FieldState, model):
    """Summed per-axis rates of the three explicit mechanisms."""
    r_adv = sum(float(np.max(np.abs(state.u[a]))) / grid.h[a]
                for a in range(grid.dim))
    r_drift = sum(float(np.max(np.abs(face_diff(grid, state.c, a)))) / grid.h[a]
                  for a in range(grid.dim))
    max_d = model.k_d * float(np.max(state.n)) ** (model.m - 1.0) + model.eps
    r_diff = sum(2.0 * max_d / (grid.h[a] * grid.h[a])
                 for a in range(grid.dim))
    return r_adv, r_drift, r_diff


def choose_dt(grid: Grid, state: FieldState, model, dt_max: float,
              force_dt: float | None = None) -> float:
    """0.9 times the tightest stability limit, capped at dt_max."""
    if force_dt is not None:
        return force_dt
    r_adv, r_drift, r_diff = stability_rates(grid, state, model)
    dt = dt_max
    for r in (r_adv, r_drift, r_diff):
        if r > 0.0:
            dt = min(dt, 0.9 / r)
    return dt


def step(grid: Grid, cache: SpectralCache, state: FieldState, model,
         dt: float) -> StepReport:
    """Advance the coupled state by dt (Lie order u -> c -> n)."""
    if dt <= 0.0:
        raise NumericalError(f"nonpositive dt = {dt} at t = {state.t}")
    r_adv, r_drift, r_diff = stability_rates(grid, state, model)
    residuals = {}
    residuals.update(step_u(grid, cache, state, model, dt))
    residuals.update(step_c(grid, cache, state, model, dt))
    residuals.update(step_n(grid, state, model, dt))
    state.t += dt
    return StepReport(
        t=state.t, dt=dt,
        cfl_advective=dt * r_adv, cfl_drift=dt * r_drift,
        cfl_diffusive=dt * r_diff,
        residuals=residuals,
        n_min=float(np.min(state.n)), n_max=float(np.max(state.n)),
        c_max=float(np.max(state.c)), div_u_inf=residuals["div_u_inf"])


# ============================================================
# run driver
# ============================================================

@dataclass
class RunResult:
    config: SimConfig
    grid: Grid
    records: list
    checks: list
    state: FieldState
    steps_taken: int
    run_dir: str | None
    max_residuals: dict = field(default_factory=dict)

    @property
    def all_checks_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def sample_times(t_final: float, sample_every: float | None):
    """Record times: 0, every sample_every, and t_final exactly once."""
    times = [0.0]
    if sample_every is not None:
        k = 1
        while k * sample_every < t_final * (1.0 - 1e-12):
            times.append(k * sample_every)
            k += 1
    times.append(t_final)
    return times


def _diag_to_manifest(diag: ResolvedDiagnostics) -> dict:
    return {"kappa": diag.kappa, "c1_quasi": diag.c1_quasi,
            "sigma_c": diag.sigma_c, "lp": list(diag.lp),
            "window": diag.window, "mean_n0": diag.mean_n0,
            "mass_c0": diag.mass_c0}


def _diag_from_manifest(d: dict) -> ResolvedDiagnostics:
    return ResolvedDiagnostics(
        kappa=d["kappa"], c1_quasi=d["c1_quasi"], sigma_c=d["sigma_c"],
        lp=tuple(d["lp"]), window=d["window"], mean_n0=d["mean_n0"],
        mass_c0=d["mass_c0"])


class _CsvSink:
    """Incremental diagnostics.csv writer (rows appear as samples land)."""

    def __init__(self, path, lp, existing_records=None):
        self.path, self.lp = path, lp
        if path is None:
            return
        # header, plus replayed rows on resume (truncates stale tail rows)
        write_csv(existing_records or [], lp, path)

    def append(self, record):
        if self.path is not None:
            append_csv(self.path, record, self.lp)


def run(cfg: SimConfig, resume: bool = False) -> RunResult:
    """Execute a configured run; optionally resume from its manifest.

    Writes diagnostics.csv incrementally, one snapshot per sample time,
    and a manifest that makes the run resumable bit-for-bit.  On
    NumericalError the partial outputs are finalized with status "failed"
    before the error propagates (CLI exit code 2).
    """
    grid = Grid(cfg.grid_cells, cfg.grid_extent)
    cache = SpectralCache(grid)
    model = cfg.model
    run_dir = cfg.output_dir
    if run_dir:
        os.makedirs(run_dir, exist_ok=True)
    schedule = sample_times(cfg.time.t_final, cfg.time.sample_every)

    if resume:
        if not run_dir:
            raise ConfigError("resume requires an output directory")
        manifest = load_manifest(run_dir)
        if manifest.get("config") != config_to_dict(cfg):
            raise ConfigError(
                "resume: config does not match the manifest echo; "
                "refusing to continue a different run")
        samples = manifest["samples"]
        last = samples[-1]
        t0, fields = load_snapshot(run_dir, last["files"], grid.dim)
        state = FieldState(
            t=t0, n=fields["n"], c=fields["c"],
            u=[fields[f"u{a}"] for a in range(grid.dim)], p=fields["p"])
        tallies = RunningTallies(
            consumed_mass=float.fromhex(last["tallies"]["consumed_mass"]),
            gradc_l2=float.fromhex(last["tallies"]["gradc_l2"]),
            sup_max_n=float.fromhex(last["tallies"]["sup_max_n"]))
        diag = _diag_from_manifest(manifest["resolved_diagnostics"])
        steps_taken = int(last["step_count"])
        all_records = read_csv(os.path.join(run_dir, "diagnostics.csv"))
        records = all_records[:len(samples)]
        manifest["status"] = "running"
        manifest.pop("error", None)
    else:
        state = init_state(grid, model, cfg.ic, seed=cfg.seed, cache=cache)
        tallies = RunningTallies()
        tallies.observe_state(state)
        diag = resolve_diagnostics(cfg.diagnostics, model, grid,
                                   state.n, state.c)
        steps_taken = 0
        records = []
        manifest = {"format": "chemostokes-run", "version": 1,
                    "config": config_to_dict(cfg),
                    "resolved_diagnostics": _diag_to_manifest(diag),
                    "status": "running", "samples": []}

    csv_path = os.path.join(run_dir, "diagnostics.csv") if run_dir else None
    sink = _CsvSink(csv_path, diag.lp, existing_records=records)

    def emit(index):
        rec = evaluate(grid, model, diag, state, tallies)
        records.append(rec)
        sink.append(rec)
        if run_dir:
            files = write_snapshot(run_dir, index, state, grid.dim)
            manifest["samples"].append({
                "index": index, "t": state.t, "step_count": steps_taken,
                "files": files,
                "tallies": {
                    "consumed_mass": float(tallies.consumed_mass).hex(),
                    "gradc_l2": float(tallies.gradc_l2).hex(),
                    "sup_max_n": float(tallies.sup_max_n).hex()}})
            write_manifest(run_dir, manifest)

    max_residuals: dict = {}
    try:
        if not records:
            emit(0)
        start_idx = len(records)   # next schedule index to produce
        for idx in range(start_idx, len(schedule)):
            target = schedule[idx]
            if target <= state.t:
                continue
            while state.t < target:
                dt = choose_dt(grid, state, model, cfg.time.dt_max,
                               cfg.time.force_dt)
                closing = state.t + dt >= target - 1e-12 * max(1.0, target)
                if closing:
                    dt = target - state.t
                report = step(grid, cache, state, model, dt)
                if closing:
                    state.t = target
                tallies.update(grid, model, state, dt)
                steps_taken += 1
                for key, val in report.residuals.items():
                    if key != "c_min_preclip":
                        max_residuals[key] = max(
                            max_residuals.get(key, 0.0), val)
            emit(idx)
    except NumericalError as exc:
        if run_dir:
            manifest["status"] = "failed"
            manifest["error"] = str(exc)
            write_manifest(run_dir, manifest)
        raise

    checks = standard_checks(records, grid, diag)
    if run_dir:
        with open(os.path.join(run_dir, "checks.json"), "w") as fh:
            json.dump([c.to_dict() for c in checks], fh, indent=1)
            fh.write("\n")
        manifest["status"] = "complete"
        write_manifest(run_dir, manifest)
    return RunResult(config=cfg, grid=grid, records=records, checks=checks,
                     state=state, steps_taken=steps_taken, run_dir=run_dir,
                     max_residuals=max_residuals)
