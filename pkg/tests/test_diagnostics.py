import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from couette_lowmach.baseflow import build_base_flow
from couette_lowmach.checkpoint import read_checkpoint, write_checkpoint
from couette_lowmach.diagnostics import (CSV_COLUMNS, EnergyAccumulator,
                                         EntropyDomainError, Monitor, _f,
                                         check_uniform_bounds, dissipation_constant,
                                         n_functional, quadratic_entropy, read_csv,
                                         relative_entropy, replay, report, write_csv)
from couette_lowmach.grid import Grid
from couette_lowmach.params import default_params
from couette_lowmach.solver import (CouetteModel, ExplicitRK4, PerturbationState,
                                    SolverConfig, Tendency, make_initial_data, run)


@pytest.mark.parametrize("z", [-0.5, -0.049999, -1e-3, -1e-9, 0.0, 1e-12, 1e-5,
                               0.0499, 0.05, 0.3, 4.0])
def test_f_against_high_precision(z):
    mpmath.mp.dps = 50
    ref = float(mpmath.mpf(z) - mpmath.log1p(mpmath.mpf(z)))
    got = float(_f(np.array([z]))[0])
    assert got == pytest.approx(ref, rel=1e-14, abs=1e-300)


def test_entropy_zero_and_positive(params, grid16):
    base = build_base_flow(params, grid16)
    assert relative_entropy(PerturbationState.zeros(grid16), base, params, grid16) == 0.0


@given(st.floats(1e-6, 0.3), st.integers(0, 3))
def test_entropy_positive_for_nonzero_state(amp, which):
    p, g = default_params(), Grid(8, 8)
    s = PerturbationState.zeros(g)
    field = s.fields()[which]
    field[:, 3] = amp
    assert relative_entropy(s, build_base_flow(p, g), p, g) > 0.0


def test_entropy_quadratic_limit(params, grid64):
    base = build_base_flow(params, grid64)
    s = make_initial_data(params, grid64, (1e-3,) * 3)
    r = relative_entropy(s, base, params, grid64) / quadratic_entropy(s, params, grid64)
    assert abs(r - 1.0) <= 0.05


@given(st.tuples(*(st.floats(1e-4, 1e-2),) * 3))
def test_entropy_comparability(amps):
    p, g = default_params(), Grid(16, 16)
    s = make_initial_data(p, g, amps)
    r = relative_entropy(s, build_base_flow(p, g), p, g) / quadratic_entropy(s, p, g)
    assert 0.5 <= r <= 2.0


@pytest.mark.parametrize("field, value, term", [("phi", -5.0, "density"),
                                                ("theta", -5.0, "temperature")])
def test_entropy_domain_errors(params, grid16, field, value, term):
    s = PerturbationState.zeros(grid16)
    getattr(s, field)[2, 2] = value
    with pytest.raises(EntropyDomainError, match=term):
        relative_entropy(s, build_base_flow(params, grid16), params, grid16)


def test_report_zero_state(params, grid16):
    base = build_base_flow(params, grid16)
    z = PerturbationState.zeros(grid16)
    t = Tendency.from_array(np.zeros((4,) + grid16.shape))
    rep = report(z, t, base, params, grid16, EnergyAccumulator())
    assert rep.l2 == (0, 0, 0) and rep.h3 == (0, 0, 0) and rep.linf == (0, 0, 0)
    assert rep.n_func == 0.0 and rep.mass == 0.0 and rep.entropy == 0.0
    assert check_uniform_bounds(rep, params).passed
    assert check_uniform_bounds(rep, params).measured == (0.0, 0.0)


def test_base_state_limit_gap():
    p, g = default_params(eps=0.1, chi=1.0), Grid(16, 64)
    base = build_base_flow(p, g)
    z = PerturbationState.zeros(g)
    rep = report(z, Tendency.from_array(np.zeros((4,) + g.shape)), base, p, g,
                 EnergyAccumulator())
    c = 0.01 * 0.72 / (2 * 3.5)
    closed = math.sqrt(2 * math.pi) / math.sqrt(30.0) * c
    assert rep.limit_gap[2] == pytest.approx(closed, rel=1e-6)
    assert rep.limit_gap[1] == 0.0
    # rho~ - 1 = -(T~ - 1) / T~ differs at relative order c
    assert rep.limit_gap[0] == pytest.approx(closed, rel=2 * c)


def test_uniform_bound_violation_is_named(params, grid16):
    base = build_base_flow(params, grid16)
    s = make_initial_data(params, grid16)
    t = Tendency.from_array(np.zeros((4,) + grid16.shape))
    rep = report(s, t, base, params, grid16, EnergyAccumulator())
    res = check_uniform_bounds(rep, params, thresholds=(1e-3, 1e3))
    assert not res.passed
    assert len(res.violations) == 1 and res.violations[0].startswith("uniform_l2")
    res = check_uniform_bounds(rep, params, thresholds=(1e3, 1e-3))
    assert res.violations[0].startswith("uniform_grad")


@given(st.lists(st.floats(0, 10), min_size=2, max_size=20))
def test_accumulator_trapezoid(values):
    acc = EnergyAccumulator()
    totals = []
    for k, v in enumerate(values):
        acc.advance(0.5 * k, {"x": v, "lin": 2.0 * 0.5 * k})
        totals.append(acc.integrals["x"])
    assert all(b >= a for a, b in zip(totals, totals[1:]))
    t = 0.5 * (len(values) - 1)
    assert acc.integrals["lin"] == pytest.approx(t * t, rel=1e-12, abs=1e-12)


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    p, g = default_params(), Grid(32, 32)
    m = CouetteModel(p, g)
    mon = Monitor(p, g, m.base, m)
    path = tmp_path_factory.mktemp("traj")
    states = []

    def sink(state, tend):
        mon(state, tend)
        name = path / f"s{len(states):04d}.clmc"
        write_checkpoint(state, name)
        states.append(name)

    run(SolverConfig(dt=4e-3, t_end=1.0, diag_stride=10), p, g,
        make_initial_data(p, g), sink, model=m)
    return p, g, mon.records, states


def test_functionals_monotone_and_consistent(short_run):
    p, _, recs, _ = short_run
    for key in ("a0", "a1", "a2", "a3", "a4", "a5"):
        vals = [getattr(r, key) for r in recs]
        assert all(b >= a for a, b in zip(vals, vals[1:])), key
    for r in recs:
        assert r.n_func == n_functional((r.a0, r.a1, r.a2, r.a3, r.a4, r.a5), p.eps)
        assert r.entropy >= 0 and min(r.l2 + r.h1 + r.h2 + r.h3 + r.linf) >= 0
        parts = r.a2_parts
        assert r.a2 == pytest.approx(parts[3] + parts[0] + parts[1] + parts[2], rel=1e-14)


def test_replay_from_checkpoints(short_run):
    p, g, recs, paths = short_run
    again = replay([read_checkpoint(x) for x in paths], p, g)
    for a, b in zip(recs, again):
        for key in ("a0", "a1", "a2", "a3", "a4", "a5", "n_func"):
            assert getattr(b, key) == pytest.approx(getattr(a, key), rel=1e-10)


def test_dissipation_constant_positive(short_run):
    p, _, recs, _ = short_run
    assert dissipation_constant(recs, p) > 0.0


def test_csv_round_trip(short_run, tmp_path):
    _, _, recs, _ = short_run
    path = tmp_path / "diag.csv"
    write_csv(recs, path)
    header, rows = read_csv(path)
    assert tuple(header) == CSV_COLUMNS and len(rows) == len(recs)
    for rec, row in zip(recs, rows):
        assert tuple(row) == tuple(float(v) for v in rec.csv_row())


def test_second_time_derivative_matches_time_difference():
    p, g = default_params(), Grid(16, 16)
    m = CouetteModel(p, g)
    U = make_initial_data(p, g).as_array()
    dU = m.rhs_constrained(U)
    got = m.second_time_derivative(U, dU)
    delta = 1e-5
    fwd = ExplicitRK4(m, delta).step(U)
    bwd = ExplicitRK4(m, -delta, check_cfl=False).step(U)
    ref = (m.rhs_constrained(fwd) - m.rhs_constrained(bwd)) / (2 * delta)
    assert np.abs(got - ref).max() <= 1e-4 * np.abs(ref).max()


@pytest.mark.parametrize("key, limit", [("a4", 0.3), ("a5", 0.3)])
def test_high_order_functionals_stable_under_refinement(key, limit):
    vals, consts = [], []
    p = default_params()
    for n in (32, 64):
        g = Grid(n, n)
        m = CouetteModel(p, g)
        mon = Monitor(p, g, m.base, m)
        run(SolverConfig(t_end=0.5), p, g, make_initial_data(p, g), mon, model=m)
        vals.append(getattr(mon.last, key))
        consts.append(check_uniform_bounds(mon.last, p).measured)
    assert abs(vals[1] / vals[0] - 1.0) <= limit
    assert consts[1][0] == pytest.approx(consts[0][0], rel=0.05)
    assert consts[1][1] == pytest.approx(consts[0][1], rel=0.05)
