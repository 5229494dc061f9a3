"""Acceptance criteria 1-10 at their stated tolerances (64x64, defaults).

Each test records one PASS/FAIL line, printed in the terminal summary.
"""
import itertools
import math

import numpy as np
import pytest

from couette_lowmach.baseflow import build_base_flow, steady_residual
from couette_lowmach.checkpoint import decode, encode
from couette_lowmach.diagnostics import quadratic_entropy, relative_entropy
from couette_lowmach.experiments import (decay_study, energy_norm, epsilon_sweep,
                                         is_stable, stiffness_benchmark)
from couette_lowmach.grid import Grid
from couette_lowmach.params import default_params
from couette_lowmach.solver import (CouetteModel, ExplicitRK4, ImexCNAB,
                                    PerturbationState, SolverConfig,
                                    make_initial_data, tendency)
from couette_lowmach.verification import ddx1_error, ddx2_error_ratio

SWEEP_EPS = [0.2, 0.1, 0.05, 0.025]
GRID = Grid(64, 64)


@pytest.fixture(scope="module")
def decay():
    return decay_study(default_params(), GRID, SolverConfig(dt=2e-3, t_end=5.0))


@pytest.fixture(scope="module")
def sweep():
    return epsilon_sweep(SWEEP_EPS, default_params(), GRID, SolverConfig())


def test_c01_steady_state_exactness(verdict):
    p = default_params()
    worst = 0.0
    for n2 in (16, 64):
        g = Grid(64, n2)
        worst = max(worst, max(steady_residual(build_base_flow(p, g), p, g)))
    model = CouetteModel(p, GRID)
    integ = ImexCNAB(model, 2e-3)
    U = np.zeros((4,) + GRID.shape)
    for _ in range(1000):
        U = integ.step(U)
    final = max(GRID.l2_norm(f) for f in U)
    ok = worst <= 1e-11 and final <= 1e-10
    verdict(1, ok, f"steady residual {worst:.2e} (<= 1e-11), "
                   f"zero state after 1000 imex steps {final:.2e} (<= 1e-10)")
    assert ok


def _ibp_defect(n2):
    g = Grid(8, n2)
    X1, X2 = g.mesh
    f = np.exp(X2) * (1 + 0.3 * np.cos(X1))
    h = np.cos(2 * X2) + 0.5 * np.sin(X1)
    boundary = g.dx1 * np.sum(f[:, -1] * h[:, -1] - f[:, 0] * h[:, 0])
    return abs(g.integrate(f * g.ddx2(h)) + g.integrate(h * g.ddx2(f)) - boundary)


def test_c02_operator_order(verdict):
    ratio = ddx2_error_ratio(32)
    err = ddx1_error(64)
    d = [_ibp_defect(n) for n in (32, 64, 128)]
    orders = [math.log2(a / b) for a, b in zip(d, d[1:])]
    ok = (abs(ratio - 4) <= 0.5 and err <= 1e-12
          and all(abs(o - 2) <= 0.5 for o in orders))
    verdict(2, ok, f"ddx2 ratio {ratio:.3f}, ddx1 error {err:.1e}, "
                   f"IBP defect orders {orders[0]:.2f}, {orders[1]:.2f}")
    assert ok


def test_c03_mass_conservation(verdict, decay):
    recs = decay.records
    drift = max(abs(r.mass - recs[0].mass) for r in recs)
    phi0 = GRID.l2_norm(make_initial_data(default_params(), GRID).phi)
    rel = drift / phi0
    ok = rel <= 1e-6
    verdict(3, ok, f"max mass drift / |phi0| = {rel:.2e} over t in [0, 5] (<= 1e-6)")
    assert ok


def test_c04_compatibility(verdict):
    p = default_params()
    base = build_base_flow(p, GRID)
    t = tendency(make_initial_data(p, GRID), base, p, GRID).as_array()
    ratios = {name: np.abs(t[v][:, [0, -1]]).max() / np.abs(t[v][:, 1:-1]).max()
              for name, v in (("psi1", 1), ("psi2", 2), ("theta", 3))}
    worst = max(ratios.values())
    ok = worst <= 1e-10
    verdict(4, ok, "wall/interior tendency ratio "
            + ", ".join(f"{k} {v:.2e}" for k, v in ratios.items()) + " (<= 1e-10)")
    assert ok


def test_c05_entropy_comparability(verdict):
    p = default_params()
    base = build_base_flow(p, GRID)

    def ratio(amps):
        s = make_initial_data(p, GRID, amps)
        return relative_entropy(s, base, p, GRID) / quadratic_entropy(s, p, GRID)

    r_small = ratio((1e-3,) * 3)
    levels = (1e-2, 3e-3, 1e-3, 1e-4)
    spread = [ratio(a) for a in itertools.product(levels, repeat=3)]
    ok = abs(r_small - 1) <= 0.05 and 0.5 <= min(spread) and max(spread) <= 2.0
    verdict(5, ok, f"ratio at 1e-3: {r_small:.5f}; range over amplitudes <= 1e-2: "
                   f"[{min(spread):.5f}, {max(spread):.5f}]")
    assert ok


def test_c06_decay(verdict, decay):
    linf_ratio = decay.final_linf / decay.initial_linf
    ok = decay.ratio <= 0.1 and decay.monotonicity >= 0.98 and linf_ratio <= 0.05
    verdict(6, ok, f"weighted norm ratio {decay.ratio:.2e} (<= 0.1), entropy "
                   f"monotonicity {decay.monotonicity:.3f} (>= 0.98), sup-norm ratio "
                   f"{linf_ratio:.2e} (<= 0.05)")
    assert ok


def test_c07_low_mach_convergence(verdict, sweep):
    s = sweep.slopes
    ok = (not sweep.failed
          and 1.7 <= s["rho"][0] <= 2.3 and 1.7 <= s["temp"][0] <= 2.3
          and 0.7 <= s["u"][0] <= 1.3
          and max(v[2] for v in s.values()) <= 0.15)
    verdict(7, ok, "slopes rho {:.3f}, u {:.3f}, temp {:.3f}; max log-residual {:.2e}".format(
        s["rho"][0], s["u"][0], s["temp"][0], max(v[2] for v in s.values())))
    assert ok


def test_c08_uniform_integrator_stability(verdict):
    table = stiffness_benchmark(default_params(reynolds=1000.0), GRID, SWEEP_EPS)
    # full nonlinear runs at the acceptance parameters, same step rule
    nonlinear_ok = []
    for eps in SWEEP_EPS:
        p = default_params(eps=eps)
        integ = ImexCNAB(CouetteModel(p, GRID), 10 * eps * GRID.dx2)
        nonlinear_ok.append(is_stable(integ, make_initial_data(p, GRID).as_array(), p, GRID))
    slope = table.exponent[0]
    ok = all(r.imex_stable for r in table.rows) and all(nonlinear_ok) \
        and abs(slope - 1.0) <= 0.2
    scaled = ", ".join(f"{r.dt_star_scaled:.3f}" for r in table.rows)
    verdict(8, ok, f"dt* exponent {slope:.3f} (1 +- 0.2), dt*/(eps dx2) = [{scaled}], "
                   f"imex stable at 10 eps dx2: linear {all(r.imex_stable for r in table.rows)}, "
                   f"nonlinear {all(nonlinear_ok)}")
    assert ok


def test_c09_cross_integrator_agreement(verdict):
    p = default_params()
    model = CouetteModel(p, GRID)
    U0 = make_initial_data(p, GRID).as_array()
    d = [np.abs(ImexCNAB(model, dt).step(U0) - ExplicitRK4(model, dt).step(U0)).max()
         for dt in (4e-5, 2e-5, 1e-5)]
    orders = [math.log2(a / b) for a, b in zip(d, d[1:])]
    ok = min(orders) >= 1.8
    verdict(9, ok, f"one-step imex vs rk4 orders {orders[0]:.3f}, {orders[1]:.3f} (>= 1.8)")
    assert ok


def test_c10_determinism_and_persistence(verdict, sweep):
    again = epsilon_sweep(SWEEP_EPS, default_params(), GRID, SolverConfig())
    parallel = epsilon_sweep(SWEEP_EPS, default_params(), GRID, SolverConfig(),
                             workers=len(SWEEP_EPS))
    cells = [r.cells() for r in sweep.rows]
    rerun_ok = cells == [r.cells() for r in again.rows] and sweep.slopes == again.slopes
    par_ok = cells == [r.cells() for r in parallel.rows] and sweep.slopes == parallel.slopes
    s = make_initial_data(default_params(), GRID)
    s.time = 0.123456789
    back = decode(encode(s))
    ckpt_ok = back.time == s.time and back.as_array().tobytes() == s.as_array().tobytes()
    ok = rerun_ok and par_ok and ckpt_ok
    verdict(10, ok, f"sweep rerun identical {rerun_ok}, serial == parallel {par_ok}, "
                    f"checkpoint bitwise {ckpt_ok}")
    assert ok
