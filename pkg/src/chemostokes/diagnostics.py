"""Diagnostics records, running accumulators, and verification checks.

Everything here is evaluated from sampled states and per-step tallies;
nothing feeds back into the solver.  Conventions:

  * gradients are face-based; |grad f|^2 per cell is the face-average, so
    cell sums equal face sums exactly (see grid.grad_squared_cells),
  * running integrals are right-endpoint Riemann sums accumulated every
    step (dt * integrand at the post-step state), independent of any
    bookkeeping inside the steppers,
  * the entropy uses x log x with 0 log 0 = 0 and is bounded below by
    -|Omega|/e pointwise, which evaluate() asserts.

Checks return CheckResult rows (name, passed, max deviation, worst time)
that run() serializes into checks.json.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .errors import NumericalError
from .grid import Grid, divergence, grad_squared_cells, \
    velocity_dirichlet_energy, velocity_magnitude_squared_cells
from .regularization import d_base, f_eps


@dataclass
class ResolvedDiagnostics:
    """Diagnostics parameters with defaults resolved against the initial state."""
    kappa: float
    c1_quasi: float | None      # None: use running sup of max n
    sigma_c: float
    lp: tuple                   # numeric exponents, resolved and deduped
    window: float
    mean_n0: float              # initial mean density (decay reference)
    mass_c0: float              # initial attractant mass (identity reference)


def resolve_diagnostics(params, model, grid: Grid, n0, c0) -> ResolvedDiagnostics:
    c0max = float(np.max(c0))
    lp = []
    for p in params.lp:
        pv = model.m if p == "m" else float(p)
        if pv not in lp:
            lp.append(pv)
    return ResolvedDiagnostics(
        kappa=params.kappa if params.kappa is not None else 0.5 * c0max + 1.0,
        c1_quasi=params.c1_quasi,
        sigma_c=params.sigma_c if params.sigma_c is not None else 1e-12 * c0max,
        lp=tuple(sorted(lp)),
        window=params.window,
        mean_n0=float(np.sum(n0)) * grid.cell_volume / grid.volume,
        mass_c0=float(np.sum(c0)) * grid.cell_volume,
    )


class RunningTallies:
    """Per-step accumulators: consumed attractant mass, time-integrated
    Dirichlet energy of c, and the running sup of max n."""

    def __init__(self, consumed_mass=0.0, gradc_l2=0.0, sup_max_n=0.0):
        self.consumed_mass = consumed_mass
        self.gradc_l2 = gradc_l2
        self.sup_max_n = sup_max_n

    def observe_state(self, state):
        self.sup_max_n = max(self.sup_max_n, float(np.max(state.n)))

    def update(self, grid: Grid, model, state, dt: float):
        """Right-endpoint update after one completed step of size dt."""
        vol = grid.cell_volume
        self.consumed_mass += dt * float(
            np.sum(f_eps(state.n, model.eps) * state.c)) * vol
        self.gradc_l2 += dt * float(
            np.sum(grad_squared_cells(grid, state.c))) * vol
        self.observe_state(state)


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float                  # sum n * vol
    c_mass: float                # sum c * vol
    c_max: float
    c_l2sq: float                # sum c^2 * vol
    entropy: float               # sum n log n * vol
    grad_c_energy: float         # 0.5 sum |grad c|^2/(c+sigma) * vol
    kinetic: float               # kappa * sum |u|^2 * vol
    e_total: float
    dissipation_n: float         # (2/m)^2 sum |grad n^(m/2)|^2 * vol
    dissipation_c: float         # sum |grad c|^4/(c+sigma)^3 * vol
    dissipation_u: float         # sum |grad u|^2 * vol (no-slip form)
    y_quasi: float
    decay_gap_n: float           # || n - mean_n0 ||_L2
    decay_gap_c: float           # max c + max |grad c|
    decay_gap_u: float           # max |u| over faces
    div_u_inf: float             # max |div u| over cells
    consumed_mass_running: float
    gradc_l2_running: float
    lp_norms: dict               # p -> || n ||_Lp


def evaluate(grid: Grid, model, diag: ResolvedDiagnostics, state,
             tallies: RunningTallies) -> DiagnosticsRecord:
    vol = grid.cell_volume
    n, c, u = state.n, state.c, state.u

    mass = float(np.sum(n)) * vol
    c_mass = float(np.sum(c)) * vol
    c_max = float(np.max(c))
    c_l2sq = float(np.sum(c * c)) * vol

    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(n > 0.0, n * np.log(np.maximum(n, 1e-300)), 0.0)
    entropy = float(np.sum(xlogx)) * vol
    floor = -grid.volume / np.e
    if entropy < floor - 1e-9 * (1.0 + grid.volume):
        raise NumericalError(
            f"entropy {entropy} fell below the pointwise floor {floor} "
            f"at t = {state.t}; density positivity must be broken")

    gc2 = grad_squared_cells(grid, c)
    c_safe = c + diag.sigma_c
    grad_c_energy = 0.5 * float(np.sum(gc2 / c_safe)) * vol
    kinetic = diag.kappa * float(
        np.sum(velocity_magnitude_squared_cells(grid, u))) * vol

    gn2 = grad_squared_cells(grid, np.power(n, 0.5 * model.m))
    dissipation_n = (2.0 / model.m) ** 2 * float(np.sum(gn2)) * vol
    dissipation_c = float(np.sum(gc2 * gc2 / c_safe ** 3)) * vol
    dissipation_u = velocity_dirichlet_energy(grid, u)

    c1 = diag.c1_quasi if diag.c1_quasi is not None else tallies.sup_max_n
    dev = n - diag.mean_n0
    dev_l2sq = float(np.sum(dev * dev)) * vol
    y_quasi = dev_l2sq + c1 * c1 * float(np.sum(gc2)) * vol

    lp_norms = {}
    for p in diag.lp:
        lp_norms[p] = float(np.sum(np.power(n, p)) * vol) ** (1.0 / p)

    return DiagnosticsRecord(
        t=state.t, mass=mass, c_mass=c_mass, c_max=c_max, c_l2sq=c_l2sq,
        entropy=entropy, grad_c_energy=grad_c_energy, kinetic=kinetic,
        e_total=entropy + grad_c_energy + kinetic,
        dissipation_n=dissipation_n, dissipation_c=dissipation_c,
        dissipation_u=dissipation_u, y_quasi=y_quasi,
        decay_gap_n=float(np.sqrt(dev_l2sq)),
        decay_gap_c=c_max + float(np.sqrt(np.max(gc2))),
        decay_gap_u=max(float(np.max(np.abs(ua))) for ua in u),
        div_u_inf=float(np.max(np.abs(divergence(grid, u)))),
        consumed_mass_running=tallies.consumed_mass,
        gradc_l2_running=tallies.gradc_l2,
        lp_norms=dict(lp_norms),
    )


# ============================================================
# checks
# ============================================================

@dataclass
class CheckResult:
    name: str
    passed: bool
    max_deviation: float
    at_time: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "max_deviation": self.max_deviation,
                "at_time": self.at_time, "detail": self.detail}


def check_mass_conservation(records, tol_rel: float = 1e-12) -> CheckResult:
    """|mass(t) - mass(0)| <= tol_rel * mass(0) at every sample."""
    m0 = records[0].mass
    devs = [abs(r.mass - m0) for r in records]
    k = int(np.argmax(devs))
    return CheckResult("mass_conservation", devs[k] <= tol_rel * abs(m0),
                       devs[k] / abs(m0) if m0 else devs[k], records[k].t,
                       f"relative to initial mass {m0!r}")


def check_c_max_monotone(records, tol: float = 1e-12) -> CheckResult:
    """max c non-increasing across samples, up to tol * (1 + max c0)."""
    slack = tol * (1.0 + records[0].c_max)
    worst, at = -np.inf, records[0].t
    for prev, cur in zip(records, records[1:]):
        rise = cur.c_max - prev.c_max
        if rise > worst:
            worst, at = rise, cur.t
    return CheckResult("c_max_monotone", worst <= slack, worst, at,
                       f"largest rise between consecutive samples, slack {slack!r}")


def check_c_mass_identity(records, tol: float = 1e-3) -> CheckResult:
    """|c_mass(t) + consumed_mass_running(t) - c_mass(0)| <= tol (absolute).

    The accumulator is an independent right-endpoint Riemann sum, so the
    deviation is dominated by the O(dt) splitting error of the c-step and
    shrinks roughly linearly under dt halving.
    """
    ref = records[0].c_mass
    worst, at = 0.0, records[0].t
    for r in records:
        dev = abs(r.c_mass + r.consumed_mass_running - ref)
        if dev > worst:
            worst, at = dev, r.t
    return CheckResult("c_mass_identity", worst <= tol, worst, at,
                       f"absolute deviation from initial c-mass {ref!r}")


def check_c_l2_inequality(records, tol_rel: float = 1e-6) -> CheckResult:
    """0.5 c_l2sq(t) + gradc_l2_running(t) <= 0.5 c_l2sq(0) (1 + tol_rel).

    Consumption and upwind advection only dissipate, so the implicit-Euler
    diffusion identity becomes an inequality with margin.
    """
    rhs = 0.5 * records[0].c_l2sq * (1.0 + tol_rel)
    worst, at = -np.inf, records[0].t
    for r in records:
        excess = 0.5 * r.c_l2sq + r.gradc_l2_running - rhs
        if excess > worst:
            worst, at = excess, r.t
    return CheckResult("c_l2_inequality", worst <= 0.0, worst, at,
                       "largest excess over the initial-energy bound")


def check_entropy_floor(records, volume: float) -> CheckResult:
    """entropy(t) >= -|Omega|/e at every sample (pointwise bound, summed)."""
    floor = -volume / np.e
    worst, at = np.inf, records[0].t
    for r in records:
        margin = r.entropy - floor
        if margin < worst:
            worst, at = margin, r.t
    return CheckResult("entropy_floor", worst >= -1e-9 * (1.0 + volume),
                       worst, at, f"smallest margin above -|Omega|/e = {floor!r}")


def check_decay(records, threshold: float = 0.1) -> CheckResult:
    """Endpoint decay gaps: n against its run max, c against its initial
    value, u against its run max; each must drop below `threshold` times
    the reference."""
    last = records[-1]
    ref_n = max(r.decay_gap_n for r in records)
    ref_c = records[0].decay_gap_c
    ref_u = max(r.decay_gap_u for r in records)
    ratios = []
    for gap, ref in ((last.decay_gap_n, ref_n), (last.decay_gap_c, ref_c),
                     (last.decay_gap_u, ref_u)):
        ratios.append(gap / ref if ref > 0.0 else 0.0)
    worst = max(ratios)
    return CheckResult("decay", worst <= threshold, worst, last.t,
                       f"gap ratios n/c/u = {ratios[0]:.3g}/{ratios[1]:.3g}/{ratios[2]:.3g}")


def check_energy_boundedness(records, window: float,
                             skip_windows: int = 2,
                             tol_rel: float = 1e-6) -> CheckResult:
    """E_total stays finite and windowed dissipation integrals are
    non-increasing once the initial transient (skip_windows windows) has
    passed.  Window integrals use the trapezoid rule on sample times."""
    if any(not np.isfinite(r.e_total) for r in records):
        return CheckResult("energy_boundedness", False, np.inf,
                           records[-1].t, "non-finite total energy")
    t0, t1 = records[0].t, records[-1].t
    nwin = int(np.floor((t1 - t0) / window + 1e-9))
    if nwin < skip_windows + 2:
        return CheckResult("energy_boundedness", True, 0.0, t1,
                           f"only {nwin} windows; monotonicity not testable")
    ts = np.array([r.t for r in records])
    diss = np.array([r.dissipation_n + r.dissipation_c + r.dissipation_u
                     for r in records])
    integrals = []
    for j in range(nwin):
        lo, hi = t0 + j * window, t0 + (j + 1) * window
        sel = (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
        if np.count_nonzero(sel) < 2:
            return CheckResult("energy_boundedness", False, np.inf, lo,
                               f"window [{lo}, {hi}] has < 2 samples")
        integrals.append(float(np.trapezoid(diss[sel], ts[sel])))
    worst, at = -np.inf, t0
    scale = max(integrals)
    for j in range(skip_windows, nwin - 1):
        rise = integrals[j + 1] - integrals[j] * (1.0 + tol_rel)
        if rise > worst:
            worst, at = rise, t0 + (j + 1) * window
    return CheckResult("energy_boundedness", worst <= 1e-12 * (1.0 + scale),
                       worst, at,
                       f"largest windowed-dissipation rise after window {skip_windows}")


def check_quasi_energy(records, window: float) -> CheckResult:
    """Empirical short-time quasi-energy constants.

    For each sample time t* with t* + window <= T, the constant
    C(t*) = max_{t in (t*, t*+window]} y(t) / (y(t*) + sup c_l2sq over the
    window) must be finite; the largest one is reported.  This is a
    monitor: it fails only on non-finite values."""
    ts = [r.t for r in records]
    worst, at = 0.0, ts[0]
    for i, r in enumerate(records):
        hi = r.t + window
        in_win = [s for s in records[i + 1:] if s.t <= hi + 1e-12]
        if not in_win or in_win[-1].t < hi - 1e-9:
            break
        denom = r.y_quasi + max(s.c_l2sq for s in in_win)
        c_emp = max(s.y_quasi for s in in_win) / denom if denom > 0.0 else 1.0
        if c_emp > worst:
            worst, at = c_emp, r.t
    return CheckResult("quasi_energy", bool(np.isfinite(worst)), worst, at,
                       "largest empirical window constant")


def standard_checks(records, grid: Grid, diag: ResolvedDiagnostics):
    """The default battery run() writes to checks.json."""
    return [
        check_mass_conservation(records),
        check_c_max_monotone(records),
        check_c_mass_identity(records),
        check_c_l2_inequality(records),
        check_entropy_floor(records, grid.volume),
        check_decay(records),
        check_energy_boundedness(records, diag.window),
        check_quasi_energy(records, diag.window),
    ]


# ============================================================
# CSV round trip
# ============================================================

_SCALAR_FIELDS = [f.name for f in fields(DiagnosticsRecord)
                  if f.name != "lp_norms"]


def _lp_column(p: float) -> str:
    return f"lp_norm_{p:g}"


def csv_header(lp: tuple) -> list:
    return _SCALAR_FIELDS + [_lp_column(p) for p in lp]


def _record_row(r: DiagnosticsRecord, lp: tuple) -> list:
    row = [repr(getattr(r, name)) for name in _SCALAR_FIELDS]
    row += [repr(r.lp_norms[p]) for p in lp]
    return row


def write_csv(records, lp: tuple, path: str):
    """Write records with repr-exact floats (bit-faithful round trip)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(lp))
        for r in records:
            w.writerow(_record_row(r, lp))


def append_csv(path: str, record: DiagnosticsRecord, lp: tuple):
    """Append one record row to an existing CSV (same formatting)."""
    with open(path, "a", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerow(_record_row(record, lp))


def read_csv(path: str):
    """Read a diagnostics CSV back into records (exact float round trip)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    lp = [float(h[len("lp_norm_"):]) for h in header
          if h.startswith("lp_norm_")]
    records = []
    for row in body:
        vals = dict(zip(header, row))
        scalars = {name: float(vals[name]) for name in _SCALAR_FIELDS}
        lp_norms = {p: float(vals[_lp_column(p)]) for p in lp}
        records.append(DiagnosticsRecord(**scalars, lp_norms=lp_norms))
    return records
