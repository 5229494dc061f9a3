"""Quick built-in verification items used by the ``check`` subcommand."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseflow import build_base_flow, steady_residual
from .diagnostics import quadratic_entropy, relative_entropy
from .grid import Grid
from .params import PhysicalParams
from .solver import SolverConfig, make_initial_data, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_steady_residual(params, n2_list=(16, 64), n1=64, tol=1e-11):
    worst = 0.0
    for n2 in n2_list:
        g = Grid(n1, n2)
        worst = max(worst, max(steady_residual(build_base_flow(params, g), params, g)))
    return CheckResult("steady_residual", worst <= tol,
                       f"max residual {worst:.3e} (tol {tol:.0e})")


def ddx2_error_ratio(n2=32, n1=8):
    """Max-norm error ratio of ``ddx2`` on ``sin(pi x2)`` from ``n2`` to ``2 n2``."""
    errs = []
    for m in (n2, 2 * n2):
        g = Grid(n1, m)
        f = np.sin(np.pi * g.mesh[1])
        exact = np.pi * np.cos(np.pi * g.mesh[1])
        errs.append(np.abs(g.ddx2(f) - exact).max())
    return errs[0] / errs[1]


def ddx1_error(n1=64, n2=8):
    """Max error of ``ddx1`` over all resolved modes ``1 <= k < n1/2``."""
    g = Grid(n1, n2)
    x1 = g.mesh[0]
    worst = 0.0
    for k in range(1, n1 // 2):
        f = np.sin(k * x1) + np.cos(k * x1)
        exact = k * (np.cos(k * x1) - np.sin(k * x1))
        worst = max(worst, np.abs(g.ddx1(f) - exact).max() / k)
    return worst


def check_operators():
    ratio = ddx2_error_ratio()
    err = ddx1_error()
    ok = abs(ratio - 4.0) <= 0.5 and err <= 1e-12
    return CheckResult("operators", ok,
                       f"ddx2 error ratio {ratio:.3f} (4 +- 0.5), "
                       f"ddx1 max error {err:.2e} (tol 1e-12)")


def entropy_ratio(params, grid, amplitude):
    base = build_base_flow(params, grid)
    state = make_initial_data(params, grid, (amplitude,) * 3)
    return relative_entropy(state, base, params, grid) / quadratic_entropy(state, params, grid)


def check_entropy(params, grid):
    r = entropy_ratio(params, grid, 1e-3)
    return CheckResult("entropy_comparability", abs(r - 1.0) <= 0.05,
                       f"int eta / Q = {r:.6f} at amplitude 1e-3 (|r-1| <= 0.05)")


def check_mass(params, grid, t_end=0.2, dt=2e-3):
    init = make_initial_data(params, grid)
    final = run(SolverConfig(dt=dt, t_end=t_end, diag_stride=10 ** 9), params, grid, init)
    drift = abs(grid.integrate(final.phi) - grid.integrate(init.phi))
    scale = grid.l2_norm(init.phi)
    bound = 1e-6 * (1.0 + t_end) * scale
    return CheckResult("mass_conservation", drift <= bound,
                       f"drift {drift:.3e} after t={t_end} (bound {bound:.3e})")


def run_checks(params: PhysicalParams, grid: Grid):
    return [
        check_steady_residual(params),
        check_operators(),
        check_entropy(params, grid),
        check_mass(params, grid),
    ]


def summarize(results):
    return all(r.passed for r in results), [r.line() for r in results]

