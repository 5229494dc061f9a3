"""Monitored quantities: norms, relative entropy, energy functionals A0..A5, N.

Sup-in-time parts are running maxima over diagnostic records, time
integrals are trapezoid sums over the same records.  Time derivatives come
from the discrete right-hand side at the record instant.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .baseflow import BaseFlow
from .grid import Grid
from .params import PhysicalParams
from .solver import CouetteModel, PerturbationState, Tendency

CSV_COLUMNS = (
    "time", "l2_phi", "l2_psi", "l2_theta", "h1_phi", "h1_psi", "h1_theta",
    "h2_psi", "h2_theta", "linf_phi", "linf_psi", "linf_theta", "entropy",
    "a0", "a1", "a2", "a3", "a4", "a5", "n_func", "mass", "gap_rho", "gap_u",
    "gap_temp",
)


class EntropyDomainError(ValueError):
    pass


def _f(z):
    """``z - log(1 + z)`` without cancellation near ``z = 0``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.05
    zs = z[small]
    # alternating series sum_{n>=2} (-1)**n z**n / n, Horner form
    acc = np.zeros_like(zs)
    for n in range(16, 1, -1):
        acc = (-1) ** n / n + zs * acc
    out[small] = zs * zs * acc
    zl = z[~small]
    out[~small] = zl - np.log1p(zl)
    return out


def entropy_density(state: PerturbationState, base: BaseFlow,
                    params: PhysicalParams):
    rt = base.rho_t[None, :]
    tt = base.temp_t[None, :]
    rho = rt + state.phi
    if not np.all(rho > 0.0):
        raise EntropyDomainError("density term undefined: rho <= 0 somewhere")
    zt = state.theta / tt
    if not np.all(zt > -1.0):
        raise EntropyDomainError("temperature term undefined: T <= 0 somewhere")
    kinetic = 0.5 * params.eps ** 2 * rho * (state.psi1 ** 2 + state.psi2 ** 2) / tt
    thermal = rho / (params.gamma - 1.0) * _f(zt)
    density = rho * _f(-state.phi / rho)
    return kinetic + thermal + density


def relative_entropy(state: PerturbationState, base: BaseFlow,
                     params: PhysicalParams, grid: Grid) -> float:
    """Integral of the relative entropy density over the channel.

    The kinetic term carries the factor one half.
    """
    return grid.integrate(entropy_density(state, base, params))


def quadratic_entropy(state: PerturbationState, params: PhysicalParams,
                      grid: Grid) -> float:
    """``Q = |phi|^2/2 + eps^2 |psi|^2/2 + |theta|^2 / (2 (gamma-1))``."""
    l2 = grid.l2_norm
    return (0.5 * l2(state.phi) ** 2
            + 0.5 * params.eps ** 2 * (l2(state.psi1) ** 2 + l2(state.psi2) ** 2)
            + l2(state.theta) ** 2 / (2.0 * (params.gamma - 1.0)))


@dataclass
class EnergyReport:
    time: float
    l2: tuple
    h1: tuple
    h2: tuple
    h3: tuple
    linf: tuple
    entropy: float
    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    n_func: float
    mass: float
    limit_gap: tuple
    # eps^-4 int |phi|_H1^2, eps^-2 int |d_t phi|^2, int (|psi|_H2^2 + eps^-2 |theta|_H2^2),
    # and eps^-2 sup |grad phi|^2: the four addends of A2
    a2_parts: tuple = ()
    weighted: float = 0.0
    weighted_grad: float = 0.0
    sup_weighted: float = 0.0
    sup_weighted_grad: float = 0.0

    def csv_row(self):
        return (self.time, *self.l2, *self.h1, self.h2[1], self.h2[2],
                *self.linf, self.entropy, self.a0, self.a1, self.a2, self.a3,
                self.a4, self.a5, self.n_func, self.mass, *self.limit_gap)


def n_functional(a, eps):
    a0, a1, a2, a3, a4, a5 = a
    e2 = eps ** 2
    return a0 / e2 + a1 + a2 + e2 * a3 + e2 * a4 + e2 * e2 * a5


@dataclass
class EnergyAccumulator:
    """Running sup / trapezoid state for the energy functionals."""
    sups: dict = field(default_factory=dict)
    integrals: dict = field(default_factory=dict)
    last_time: float | None = None
    last_integrands: dict = field(default_factory=dict)

    def sup(self, key, value):
        self.sups[key] = max(self.sups.get(key, 0.0), value)
        return self.sups[key]

    def advance(self, time, integrands):
        if self.last_time is not None:
            dt = time - self.last_time
            for k, v in integrands.items():
                self.integrals[k] = (self.integrals.get(k, 0.0)
                                     + 0.5 * dt * (v + self.last_integrands[k]))
        else:
            for k in integrands:
                self.integrals.setdefault(k, 0.0)
        self.last_time = time
        self.last_integrands = dict(integrands)


def report(state: PerturbationState, tend: Tendency, base: BaseFlow,
           params: PhysicalParams, grid: Grid, accumulator: EnergyAccumulator,
           second: Tendency | None = None) -> EnergyReport:
    """Evaluate every monitored quantity and update ``accumulator``.

    ``tend`` must be the (wall-constrained) time derivative of ``state``;
    ``second`` its second time derivative, needed only for the integral
    part of A5 (taken as zero when omitted).
    """
    eps2 = params.eps ** 2
    ie2, ie4 = 1.0 / eps2, 1.0 / eps2 ** 2
    sn = grid.seminorms_sq

    phi_s = sn(state.phi, 3)
    psi_s = [a + b for a, b in zip(sn(state.psi1, 3), sn(state.psi2, 3))]
    th_s = sn(state.theta, 3)
    phit_s = sn(tend.dphi, 0)
    psit_s = [a + b for a, b in zip(sn(tend.dpsi1, 1), sn(tend.dpsi2, 1))]
    tht_s = sn(tend.dtheta, 1)
    if second is not None:
        psitt = grid.integrate(second.dpsi1 ** 2) + grid.integrate(second.dpsi2 ** 2)
        thtt = grid.integrate(second.dtheta ** 2)
    else:
        psitt = thtt = 0.0

    def h(s, k):
        return sum(s[:k + 1])

    acc = accumulator
    sup0 = acc.sup("s0", psi_s[0] + ie2 * phi_s[0] + ie2 * th_s[0])
    sup1 = acc.sup("s1", psi_s[1] + ie2 * th_s[1])
    sup2 = acc.sup("s2", ie2 * phi_s[1])
    sup3 = acc.sup("s3", ie2 * phit_s[0] + psit_s[0] + ie2 * tht_s[0])
    sup4 = acc.sup("s4", ie2 * phi_s[2] + psi_s[2] + ie2 * th_s[2])
    sup5 = acc.sup("s5", ie2 * phi_s[3] + psi_s[3] + psit_s[1]
                   + ie2 * (th_s[3] + tht_s[1]))
    acc.advance(state.time, {
        "i0": h(psi_s, 1) + ie2 * h(th_s, 1),
        "i1": psit_s[0] + ie2 * tht_s[0],
        "i2a": ie4 * h(phi_s, 1),
        "i2b": ie2 * phit_s[0],
        "i2c": h(psi_s, 2) + ie2 * h(th_s, 2),
        "i3": psit_s[1] + ie2 * tht_s[1],
        "i4": ie4 * h(phi_s, 2) + h(psi_s, 3) + ie2 * h(th_s, 3),
        "i5": psitt + ie2 * thtt,
    })
    it = acc.integrals
    a2_parts = (it["i2a"], it["i2b"], it["i2c"], sup2)
    a = (sup0 + it["i0"], sup1 + it["i1"], sup2 + it["i2a"] + it["i2b"] + it["i2c"],
         sup3 + it["i3"], sup4 + it["i4"], sup5 + it["i5"])

    eps = params.eps
    l2 = tuple(math.sqrt(s[0]) for s in (phi_s, psi_s, th_s))
    grad = tuple(math.sqrt(s[1]) for s in (phi_s, psi_s, th_s))
    weighted = l2[0] / eps + l2[1] + l2[2] / eps
    weighted_grad = grad[0] / eps + grad[1] + grad[2] / eps
    sup_w = acc.sup("weighted", weighted)
    sup_wg = acc.sup("weighted_grad", weighted_grad)

    rt = base.rho_t[None, :]
    tt = base.temp_t[None, :]
    return EnergyReport(
        time=state.time,
        l2=l2,
        h1=tuple(math.sqrt(h(s, 1)) for s in (phi_s, psi_s, th_s)),
        h2=tuple(math.sqrt(h(s, 2)) for s in (phi_s, psi_s, th_s)),
        h3=tuple(math.sqrt(h(s, 3)) for s in (phi_s, psi_s, th_s)),
        linf=(grid.linf_norm(state.phi),
              grid.linf_norm(np.hypot(state.psi1, state.psi2)),
              grid.linf_norm(state.theta)),
        entropy=relative_entropy(state, base, params, grid),
        a0=a[0], a1=a[1], a2=a[2], a3=a[3], a4=a[4], a5=a[5],
        n_func=n_functional(a, eps),
        mass=grid.integrate(state.phi),
        limit_gap=(grid.l2_norm(rt + state.phi - 1.0),
                   math.sqrt(psi_s[0]),
                   grid.l2_norm(tt + state.theta - 1.0)),
        a2_parts=a2_parts,
        weighted=weighted,
        weighted_grad=weighted_grad,
        sup_weighted=sup_w,
        sup_weighted_grad=sup_wg,
    )


@dataclass
class UniformBoundCheck:
    passed: bool
    measured: tuple
    violations: list


def check_uniform_bounds(rep: EnergyReport, params: PhysicalParams,
                         thresholds=(10.0, 10.0)) -> UniformBoundCheck:
    """Compare the measured eps-weighted sup bounds against ``thresholds``.

    ``measured[0]`` is ``sup(|phi|/eps + |psi| + |theta|/eps) / eps`` and
    ``measured[1]`` the same combination of gradient norms.
    """
    c_l2 = rep.sup_weighted / params.eps
    c_grad = rep.sup_weighted_grad
    violations = []
    for name, value, bound in (("uniform_l2", c_l2, thresholds[0]),
                               ("uniform_grad", c_grad, thresholds[1])):
        if not value <= bound:
            violations.append(f"{name}: measured {value:.6g} exceeds {bound:.6g}")
    return UniformBoundCheck(not violations, (c_l2, c_grad), violations)


class Monitor:
    """Diagnostics sink for :func:`couette_lowmach.solver.run`.

    Keeps every :class:`EnergyReport` in ``records``; when ``model`` is
    given, the second time derivative feeding A5 is evaluated too.
    """

    def __init__(self, params: PhysicalParams, grid: Grid, base: BaseFlow,
                 model: CouetteModel | None = None, linear=False):
        self.params = params
        self.grid = grid
        self.base = base
        self.model = model
        self.linear = linear
        self.accumulator = EnergyAccumulator()
        self.records: list[EnergyReport] = []

    def __call__(self, state: PerturbationState, tend: Tendency):
        second = None
        if self.model is not None:
            U = state.as_array()
            second = Tendency.from_array(self.model.second_time_derivative(
                U, tend.as_array(), self.linear))
        rep = report(state, tend, self.base, self.params, self.grid,
                     self.accumulator, second)
        self.records.append(rep)
        return rep

    @property
    def last(self):
        return self.records[-1]


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for rep in records:
            w.writerow([repr(float(v)) for v in rep.csv_row()])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, [[float(v) for v in row] for row in body]


def report_fields():
    return [f.name for f in fields(EnergyReport)]


def dissipation_constant(records, params: PhysicalParams, tol=0.02):
    """Largest ``c`` keeping ``int eta + c * int_0^t D`` non-increasing within ``tol``.

    ``D = eps^2 |psi|_H1^2 + |theta|_H1^2`` is integrated by the trapezoid
    rule over the record times.  A non-positive result means no admissible
    ``c > 0`` exists.
    """
    eta = np.array([r.entropy for r in records])
    t = np.array([r.time for r in records])
    d = np.array([params.eps ** 2 * r.h1[1] ** 2 + r.h1[2] ** 2 for r in records])
    if eta.size < 2:
        return math.inf
    inc = 0.5 * (d[1:] + d[:-1]) * np.diff(t)
    slack = eta[:-1] * (1.0 + tol) - eta[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(inc > 0.0, slack / inc, np.where(slack >= 0.0, np.inf, -np.inf))
    return float(c.min())


def replay(states, params: PhysicalParams, grid: Grid,
           model: CouetteModel | None = None, linear=False):
    """Recompute every record from a saved trajectory of states."""
    model = model or CouetteModel(params, grid)
    mon = Monitor(params, grid, model.base, model, linear)
    for s in states:
        U = s.as_array()
        mon(s, Tendency.from_array(model.rhs_constrained(U, linear)))
    return mon.records
