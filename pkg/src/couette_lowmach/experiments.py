"""Multi-run studies: low-Mach eps-sweep, decay study, explicit stiffness benchmark."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import Monitor
from .grid import Grid
from .params import PhysicalParams
from .solver import (CouetteModel, ExplicitRK4, ImexCNAB, SolverAbort,
                     SolverConfig, make_initial_data, run)

log = logging.getLogger(__name__)


class SweepError(ValueError):
    pass


def fit_loglog_slope(points):
    """Least-squares line through ``(ln x, ln y)``.

    Returns ``(slope, intercept, max_residual)`` where the residual is
    measured in ``ln y``.
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a slope")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("log-log fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.abs(resid).max())


# ---------------------------------------------------------------------------
# eps sweep

@dataclass
class SweepRow:
    eps: float
    sup_gap_rho: float = math.nan
    sup_gap_u: float = math.nan
    sup_gap_temp: float = math.nan
    sup_l2_phi: float = math.nan
    sup_l2_psi: float = math.nan
    sup_l2_theta: float = math.nan
    runtime_s: float = math.nan
    error: str | None = None

    def cells(self):
        """Deterministic content of the row (wall-clock excluded)."""
        return (self.eps, self.sup_gap_rho, self.sup_gap_u, self.sup_gap_temp,
                self.sup_l2_phi, self.sup_l2_psi, self.sup_l2_theta, self.error)


@dataclass
class SweepTable:
    rows: list
    slopes: dict = field(default_factory=dict)

    @property
    def failed(self):
        return any(r.error for r in self.rows)

    def fit(self):
        if len(self.rows) < 3:
            raise SweepError("at least three rows are required for slope fitting")
        self.slopes = {}
        if self.failed:
            return self.slopes
        for key, attr in (("rho", "sup_gap_rho"), ("u", "sup_gap_u"),
                          ("temp", "sup_gap_temp")):
            pts = [(r.eps, getattr(r, attr)) for r in self.rows]
            if all(v > 0 for _, v in pts):
                self.slopes[key] = fit_loglog_slope(pts)
            else:
                self.slopes[key] = None
        return self.slopes


class _GapTracker:
    def __init__(self, grid, base):
        self.grid = grid
        self.rt = base.rho_t[None, :]
        self.tt = base.temp_t[None, :]
        self.sup = np.zeros(6)

    def __call__(self, state, tend):
        g = self.grid
        l2_psi = math.sqrt(g.integrate(state.psi1 ** 2 + state.psi2 ** 2))
        vals = (g.l2_norm(self.rt + state.phi - 1.0), l2_psi,
                g.l2_norm(self.tt + state.theta - 1.0),
                g.l2_norm(state.phi), l2_psi, g.l2_norm(state.theta))
        self.sup = np.maximum(self.sup, vals)


def _sweep_one(eps, params_template, grid, solver_config, amplitudes):
    row = SweepRow(eps=eps)
    t0 = time.perf_counter()
    try:
        params = params_template.with_eps(eps)
        model = CouetteModel(params, grid, dealias_on=solver_config.dealias_on)
        tracker = _GapTracker(grid, model.base)
        init = make_initial_data(params, grid, amplitudes)
        run(solver_config, params, grid, init, tracker, model=model)
        (row.sup_gap_rho, row.sup_gap_u, row.sup_gap_temp, row.sup_l2_phi,
         row.sup_l2_psi, row.sup_l2_theta) = (float(v) for v in tracker.sup)
    except (SolverAbort, ValueError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        log.error("sweep run at eps=%g failed: %s", eps, row.error)
    row.runtime_s = time.perf_counter() - t0
    return row


def epsilon_sweep(eps_list, params_template: PhysicalParams, grid: Grid,
                  solver_config: SolverConfig, amplitudes=(1.0, 1.0, 1.0),
                  workers: int = 1) -> SweepTable:
    """Run one simulation per ``eps`` and fit the low-Mach convergence rates.

    Gaps are sup-in-time L2 distances of ``(rho, u, T)`` from
    ``(1, u~, 1)`` over the diagnostic records.  Runs are independent; with
    ``workers > 1`` they execute concurrently but the table keeps the
    order of ``eps_list``.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise SweepError("eps_list needs at least three values")
    if any(not 0.0 < e <= 0.5 for e in eps_list):
        raise SweepError("every eps must lie in (0, 0.5]")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise SweepError("eps_list must be strictly decreasing")
    if params_template.chi != 1.0:
        raise SweepError("the low-Mach sweep requires chi = 1")

    def job(e):
        return _sweep_one(e, params_template, grid, solver_config, amplitudes)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, eps_list))
    else:
        rows = [job(e) for e in eps_list]
    table = SweepTable(rows)
    table.fit()
    return table


# ---------------------------------------------------------------------------
# decay study

@dataclass
class DecaySummary:
    initial_weighted: float
    final_weighted: float
    decay_time: float
    monotonicity: float
    initial_linf: float
    final_linf: float
    records: list = field(repr=False, default_factory=list)

    @property
    def ratio(self):
        if self.initial_weighted == 0.0:
            return 0.0
        return self.final_weighted / self.initial_weighted


def monotonicity_score(values, skip=10, rtol=0.0):
    """Fraction of consecutive pairs (after ``skip``) that do not increase."""
    v = np.asarray(values, dtype=float)[skip:]
    if v.size < 2:
        return 1.0
    ok = v[1:] <= v[:-1] * (1.0 + rtol)
    return float(np.mean(ok))


def _decay_time(times, values, fraction=0.1):
    """First time the series drops below ``fraction`` of its start (log-interpolated)."""
    v0 = values[0]
    if v0 == 0.0:
        return 0.0
    target = fraction * v0
    for k in range(1, len(values)):
        if values[k] <= target:
            a, b = values[k - 1], values[k]
            if a <= 0 or b <= 0 or a == b:
                return float(times[k])
            s = math.log(target / a) / math.log(b / a)
            return float(times[k - 1] + s * (times[k] - times[k - 1]))
    return math.inf


def decay_study(params: PhysicalParams, grid: Grid, solver_config: SolverConfig,
                amplitudes=(1.0, 1.0, 1.0), skip=10) -> DecaySummary:
    """Run from scaled initial data and summarize the return to the Couette state.

    The weighted norm is ``|phi|/eps + |psi| + |theta|/eps`` (L2).
    """
    model = CouetteModel(params, grid, dealias_on=solver_config.dealias_on)
    mon = Monitor(params, grid, model.base, model)
    init = make_initial_data(params, grid, amplitudes)
    run(solver_config, params, grid, init, mon, model=model)
    recs = mon.records
    times = [r.time for r in recs]
    w = [r.weighted for r in recs]
    return DecaySummary(
        initial_weighted=w[0],
        final_weighted=w[-1],
        decay_time=_decay_time(times, w),
        monotonicity=monotonicity_score([r.entropy for r in recs], skip),
        initial_linf=max(recs[0].linf),
        final_linf=max(recs[-1].linf),
        records=recs,
    )


# ---------------------------------------------------------------------------
# stiffness benchmark

def energy_norm(U, params, grid):
    g = grid
    return math.sqrt(g.integrate(U[0] ** 2)
                     + params.eps ** 2 * (g.integrate(U[1] ** 2) + g.integrate(U[2] ** 2))
                     + g.integrate(U[3] ** 2) / (params.gamma - 1.0))


def is_stable(integrator, U0, params, grid, steps=200, growth=10.0):
    """True if the energy norm never exceeds ``growth`` times its start."""
    e0 = energy_norm(U0, params, grid)
    U = U0
    for _ in range(steps):
        U = integrator.step(U)
        e = energy_norm(U, params, grid)
        if not math.isfinite(e) or e > growth * e0:
            return False
    return True


@dataclass
class StiffnessRow:
    eps: float
    dt_star: float
    dt_star_scaled: float     # dt_star / (eps * dx2)
    imex_dt: float
    imex_stable: bool
    imex_seconds_per_step: float


@dataclass
class StiffnessTable:
    rows: list
    exponent: tuple = ()


def explicit_threshold(params, grid, steps=200, growth=10.0, rtol=0.01):
    """Largest stable RK4 step on the linearized problem, by bisection."""
    model = CouetteModel(params, grid)
    U0 = make_initial_data(params, grid).as_array()

    def ok(dt):
        return is_stable(ExplicitRK4(model, dt, linear=True, check_cfl=False),
                         U0, params, grid, steps, growth)

    lo = hi = params.eps * grid.dx2
    while not ok(lo):
        lo *= 0.5
    hi = 2.0 * lo
    while ok(hi):
        lo, hi = hi, 2.0 * hi
    while hi / lo > 1.0 + rtol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def stiffness_benchmark(params_template: PhysicalParams, grid: Grid, eps_list,
                        steps=200, growth=10.0, imex_factor=10.0,
                        rtol=0.01) -> StiffnessTable:
    """Measure the explicit RK4 step limit against eps and time CNAB.

    Both integrators advance the linearized problem from the scaled
    initial data; stability means no ``growth``-fold rise of the energy
    norm within ``steps`` steps.  CNAB is run at ``imex_factor*eps*dx2``.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise SweepError("eps_list needs at least three values")
    rows = []
    for eps in eps_list:
        params = params_template.with_eps(eps)
        dt_star = explicit_threshold(params, grid, steps, growth, rtol)
        model = CouetteModel(params, grid)
        dt_imex = imex_factor * eps * grid.dx2
        U0 = make_initial_data(params, grid).as_array()
        integ = ImexCNAB(model, dt_imex, linear=True)
        t0 = time.perf_counter()
        stable = is_stable(integ, U0, params, grid, steps, growth)
        per_step = (time.perf_counter() - t0) / steps
        rows.append(StiffnessRow(eps, dt_star, dt_star / (eps * grid.dx2),
                                 dt_imex, stable, per_step))
    table = StiffnessTable(rows)
    table.exponent = fit_loglog_slope([(r.eps, r.dt_star) for r in rows])
    return table
