"""Time integration of the perturbation around the Couette base state.

The unknowns are the density, velocity and temperature perturbations
``(phi, psi1, psi2, theta)``.  The right-hand side is split as

    d/dt U = L U + N(U)

where ``L`` is the linearization about the base flow (all coefficients
depend on ``x2`` only) and ``N`` collects every term that is at least
quadratic in the perturbation.  Because ``L`` does not couple ``x1`` Fourier
modes, each mode of the implicit problem is a block-tridiagonal system in
``x2`` with one 4x4 block per node.  It is solved as a banded system.

Wall rows of ``psi`` and ``theta`` are Dirichlet rows: the integrators keep
them exactly zero.  ``phi`` carries no boundary condition.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lapack

from .baseflow import BaseFlow, build_base_flow
from .grid import Grid
from .params import PhysicalParams

log = logging.getLogger(__name__)

NVAR = 4
PHI, PSI1, PSI2, THETA = range(NVAR)
SCHEMES = ("imex_cnab", "explicit_rk4")


class SolverAbort(RuntimeError):
    """A simulation cannot continue; ``time`` and ``step`` locate the failure."""

    def __init__(self, message, time=None, step=None):
        super().__init__(message)
        self.time = time
        self.step = step

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg += f" (step {self.step}, t={self.time:.6g})"
        return msg


class PositivityError(SolverAbort):
    pass


class LinearSolveError(SolverAbort):
    pass


class CFLError(SolverAbort):
    pass


@dataclass
class PerturbationState:
    phi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    theta: np.ndarray
    time: float = 0.0
    # (dt, N(U_prev)) kept between multistep calls; never persisted
    history: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def zeros(cls, grid: Grid, time=0.0):
        return cls(*(grid.zeros() for _ in range(NVAR)), time=time)

    @classmethod
    def from_array(cls, arr, time=0.0, history=None):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0].copy(), arr[1].copy(), arr[2].copy(), arr[3].copy(),
                   time=float(time), history=history)

    def as_array(self):
        return np.stack([self.phi, self.psi1, self.psi2, self.theta])

    def fields(self):
        return (self.phi, self.psi1, self.psi2, self.theta)


@dataclass
class Tendency:
    dphi: np.ndarray
    dpsi1: np.ndarray
    dpsi2: np.ndarray
    dtheta: np.ndarray

    @classmethod
    def from_array(cls, arr):
        return cls(arr[0], arr[1], arr[2], arr[3])

    def as_array(self):
        return np.stack([self.dphi, self.dpsi1, self.dpsi2, self.dtheta])


@dataclass
class SolverConfig:
    dt: float = 2e-3
    t_end: float = 5.0
    scheme: str = "imex_cnab"
    dealias_on: bool = True
    diag_stride: int = 25
    c_acoustic: float = 0.5
    c_viscous: float = 0.2

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive (got {self.dt})")
        # t_end == 0 is a no-op run that only emits the initial record
        if self.t_end != 0.0 and self.t_end < self.dt:
            raise ValueError(f"t_end must be 0 or >= dt (got {self.t_end})")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES} (got {self.scheme!r})")
        if self.diag_stride < 1:
            raise ValueError(f"diag_stride must be >= 1 (got {self.diag_stride})")
        if self.c_acoustic <= 0.0 or self.c_viscous <= 0.0:
            raise ValueError("CFL constants must be positive")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


def cfl_limits(params: PhysicalParams, grid: Grid, c_acoustic=0.5, c_viscous=0.2):
    """``(acoustic, viscous)`` step bounds for the explicit integrator."""
    return (c_acoustic * params.eps * grid.dx2,
            c_viscous * params.reynolds * grid.dx2 ** 2)


def wall_mask(grid: Grid):
    """Multiplier that zeroes the Dirichlet rows of ``psi1, psi2, theta``."""
    m = np.ones((NVAR,) + grid.shape)
    m[1:, :, 0] = 0.0
    m[1:, :, -1] = 0.0
    return m


class CouetteModel:
    """Discrete right-hand side of the perturbation system on one grid."""

    def __init__(self, params: PhysicalParams, grid: Grid,
                 base: BaseFlow | None = None, dealias_on: bool = True):
        self.params = params
        self.grid = grid
        self.base = base if base is not None else build_base_flow(params, grid)
        self.dealias_on = dealias_on
        b = self.base
        self.rt = b.rho_t[None, :]
        self.tt = b.temp_t[None, :]
        self.dtt = b.dtemp_t[None, :]
        self.x2 = grid.x2[None, :]
        self.irt = 1.0 / self.rt
        self.mask = wall_mask(grid)
        self._factors = {}

    # -- helpers -----------------------------------------------------------
    def _derivs(self, U):
        g = self.grid
        Uhat = np.fft.rfft(U, axis=1)
        D1 = np.fft.irfft(g._ik[None] * Uhat, n=g.n1, axis=1)
        D11 = np.fft.irfft(-g._k2[None] * Uhat[1:], n=g.n1, axis=1)
        D2 = np.stack([g.ddx2(u) for u in U])
        D22 = np.stack([g.d2dx2(u) for u in U[1:]])
        D12 = np.stack([g.ddx2(D1[PSI1]), g.ddx2(D1[PSI2])])
        return D1, D11, D2, D22, D12

    def check_positive(self, U, time=None, step=None):
        rho = self.rt + U[PHI]
        temp = self.tt + U[THETA]
        for name, f in (("density", rho), ("temperature", temp)):
            bad = ~(f > 0.0)
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise PositivityError(
                    f"{name} non-positive at node (i={i}, j={j}): {f[i, j]:.6g}",
                    time, step)

    # -- the split right-hand side ----------------------------------------
    def _parts(self, U, want_nonlinear=True):
        p = self.params
        g = self.grid
        eps2 = p.eps ** 2
        mu, mup, gm1 = p.mu, p.mu_prime, p.gamma - 1.0
        phi, p1, p2, th = U
        rt, tt, x2, irt = self.rt, self.tt, self.x2, self.irt
        D1, D11, D2, D22, D12 = self._derivs(U)
        d1phi, d1p1, d1p2, d1th = D1
        d11p1, d11p2, d11th = D11
        d2phi, d2p1, d2p2, d2th = D2
        d22p1, d22p2, d22th = D22
        d21p1, d21p2 = D12

        div = d1p1 + d2p2
        # pressure perturbation, linear part: T~ phi + rho~ theta
        grad1_pl = tt * d1phi + rt * d1th
        grad2_pl = g.ddx2(tt * phi + rt * th)
        visc1 = mu * (d11p1 + d22p1) + (mu + mup) * (d11p1 + d21p2)
        visc2 = mu * (d11p2 + d22p2) + (mu + mup) * (d21p1 + d22p2)
        r1 = -grad1_pl / eps2 + visc1
        r2 = -grad2_pl / eps2 + visc2
        shear = d2p1 + d1p2
        s = -div + p.kappa * (d11th + d22th) + 2.0 * eps2 * mu * shear

        lin = np.empty_like(U)
        lin[PHI] = -rt * d1p1 - x2 * d1phi - g.ddx2_flux(rt * p2)
        lin[PSI1] = -x2 * d1p1 - p2 + irt * r1
        lin[PSI2] = -x2 * d1p2 + irt * r2
        lin[THETA] = -x2 * d1th - p2 * self.dtt + gm1 * irt * s
        if not want_nonlinear:
            return lin, None

        rho = rt + phi
        irho = 1.0 / rho
        dirho = -phi * irho * irt  # 1/rho - 1/rho~
        q = phi * th
        d1q = phi * d1th + th * d1phi
        d2q = g.ddx2(q)
        heat = eps2 * (2.0 * mu * (d1p1 ** 2 + d2p2 ** 2 + 0.5 * shear ** 2)
                       + mup * div ** 2)
        pp = tt * phi + rt * th + q

        non = np.empty_like(U)
        non[PHI] = -g.ddx1(phi * p1) - g.ddx2_flux(phi * p2)
        non[PSI1] = -p1 * d1p1 - p2 * d2p1 + dirho * r1 - irho * d1q / eps2
        non[PSI2] = -p1 * d1p2 - p2 * d2p2 + dirho * r2 - irho * d2q / eps2
        non[THETA] = (-p1 * d1th - p2 * d2th + gm1 * dirho * s
                      + gm1 * irho * (-pp * div + heat))
        if self.dealias_on:
            non = self.dealias(non)
        return lin, non

    def dealias(self, U):
        g = self.grid
        Uhat = np.fft.rfft(U, axis=1)
        Uhat[:, g.dealias_cutoff + 1:] = 0.0
        return np.fft.irfft(Uhat, n=g.n1, axis=1)

    def linear(self, U):
        return self._parts(U, want_nonlinear=False)[0]

    def nonlinear(self, U):
        self.check_positive(U)
        return self._parts(U)[1]

    def rhs(self, U, linear=False):
        """Full discrete right-hand side, wall rows left unconstrained."""
        if linear:
            return self.linear(U)
        self.check_positive(U)
        lin, non = self._parts(U)
        return lin + non

    def rhs_constrained(self, U, linear=False):
        return self.rhs(U, linear) * self.mask

    def second_time_derivative(self, U, dU, linear=False):
        """``d2U/dt2 = J(U) dU`` with ``dU = dU/dt`` (constrained).

        ``L dU`` is applied exactly; the nonlinear part is differentiated by
        a central directional difference of ``N``.
        """
        out = self.linear(dU)
        if not linear:
            scale = np.abs(dU).max()
            if scale > 0.0:
                h = 1e-4 * max(np.abs(U).max(), 1e-12) / scale
                out = out + (self.nonlinear(U + h * dU)
                             - self.nonlinear(U - h * dU)) / (2.0 * h)
        return out * self.mask

    # -- implicit operator -------------------------------------------------
    @cached_property
    def linear_blocks(self):
        """Block diagonals of ``L`` for every ``x1`` mode.

        Returns ``(lower, diag, upper)``, each of shape ``(nk, n2+1, 4, 4)``,
        where row block ``j`` couples to node ``j-1``, ``j`` and ``j+1``.
        Dirichlet rows are left as the operator rows; they are replaced in
        :meth:`implicit_factor`.
        """
        p, g = self.params, self.grid
        eps2 = p.eps ** 2
        mu, mup, gm1, kap = p.mu, p.mu_prime, p.gamma - 1.0, p.kappa
        n = g.n2 + 1
        h = g.dx2
        ik = g._ik[:, 0][:, None]          # (nk, 1)
        k2 = g._k2[:, 0][:, None]
        nk = ik.shape[0]
        rt = self.base.rho_t[None, :]
        tt = self.base.temp_t[None, :]
        dtt = self.base.dtemp_t[None, :]
        x2 = g.x2[None, :]
        irt = 1.0 / rt

        lo = np.zeros((nk, n, NVAR, NVAR), complex)
        di = np.zeros_like(lo)
        up = np.zeros_like(lo)

        # stencils as (lower, diag, upper) per node
        c1 = np.zeros((3, n))
        c1[0, 1:-1], c1[2, 1:-1] = -0.5 / h, 0.5 / h
        cf = c1.copy()
        cf[1, 0], cf[2, 0] = -1.0 / h, 1.0 / h
        cf[0, -1], cf[1, -1] = -1.0 / h, 1.0 / h
        c2 = np.zeros((3, n))
        c2[0, 1:-1], c2[1, 1:-1], c2[2, 1:-1] = 1 / h ** 2, -2 / h ** 2, 1 / h ** 2

        def shifted(profile):
            # profile values at nodes j-1, j, j+1 as seen from row j
            prof = np.asarray(profile).reshape(-1)
            out = np.zeros((3, n))
            out[0, 1:] = prof[:-1]
            out[1] = prof
            out[2, :-1] = prof[1:]
            return out

        rt_s = shifted(self.base.rho_t)
        tt_s = shifted(self.base.temp_t)
        blocks = (lo, di, up)

        def put(row, col, stencil):
            for s, blk in enumerate(blocks):
                blk[:, :, row, col] += stencil[s]

        # continuity: -d1(rho~ psi1) - x2 d1 phi - Dflux(rho~ psi2)
        di[:, :, PHI, PHI] += -x2 * ik
        di[:, :, PHI, PSI1] += -rt * ik
        for s in range(3):
            blocks[s][:, :, PHI, PSI2] += -cf[s] * rt_s[s]

        # momentum 1
        di[:, :, PSI1, PSI1] += -x2 * ik + irt * (-(2 * mu + mup) * k2)
        put(PSI1, PSI1, irt[0] * mu * c2)
        di[:, :, PSI1, PSI2] += -1.0
        for s in range(3):
            blocks[s][:, :, PSI1, PSI2] += irt * (mu + mup) * ik * c1[s]
        di[:, :, PSI1, PHI] += -irt * ik * tt / eps2
        di[:, :, PSI1, THETA] += -ik / eps2

        # momentum 2
        di[:, :, PSI2, PSI2] += -x2 * ik + irt * (-mu * k2)
        put(PSI2, PSI2, irt[0] * (2 * mu + mup) * c2)
        for s in range(3):
            blocks[s][:, :, PSI2, PSI1] += irt * (mu + mup) * ik * c1[s]
            blocks[s][:, :, PSI2, PHI] += -irt * c1[s] * tt_s[s] / eps2
            blocks[s][:, :, PSI2, THETA] += -irt * c1[s] * rt_s[s] / eps2

        # energy
        di[:, :, THETA, THETA] += -x2 * ik + gm1 * irt * kap * (-k2)
        put(THETA, THETA, gm1 * irt[0] * kap * c2)
        di[:, :, THETA, PSI1] += -gm1 * irt * ik
        put(THETA, PSI1, gm1 * irt[0] * 2 * eps2 * mu * c1)
        di[:, :, THETA, PSI2] += -dtt + gm1 * irt * 2 * eps2 * mu * ik
        put(THETA, PSI2, -gm1 * irt[0] * c1)
        return lo, di, up

    def implicit_matrix_blocks(self, dt, weight):
        """Blocks of ``I - weight*dt*L`` with Dirichlet rows substituted."""
        lo, di, up = (-weight * dt * b for b in self.linear_blocks)
        di = di + np.eye(NVAR)[None, None]
        for j in (0, -1):
            for v in (PSI1, PSI2, THETA):
                lo[:, j, v, :] = 0.0
                up[:, j, v, :] = 0.0
                di[:, j, v, :] = 0.0
                di[:, j, v, v] = 1.0
        return lo, di, up

    def implicit_factor(self, dt, weight):
        key = (float(dt), float(weight))
        if key not in self._factors:
            self._factors[key] = BandedModeSolver(
                *self.implicit_matrix_blocks(dt, weight))
        return self._factors[key]


KL = KU = 2 * NVAR - 1


def blocks_to_dense(lo, di, up):
    """Dense matrix of one mode, ordered node-major / variable-minor."""
    n = di.shape[0]
    m = NVAR * n
    A = np.zeros((m, m), dtype=di.dtype)
    for j in range(n):
        r = slice(NVAR * j, NVAR * (j + 1))
        A[r, r] = di[j]
        if j > 0:
            A[r, NVAR * (j - 1):NVAR * j] = lo[j]
        if j < n - 1:
            A[r, NVAR * (j + 1):NVAR * (j + 2)] = up[j]
    return A


class BandedModeSolver:
    """LU factorization (partial pivoting) of one block-tridiagonal system per mode.

    Parameters are the block diagonals of shape ``(nk, n, 4, 4)``.
    """

    def __init__(self, lo, di, up):
        nk, n = di.shape[:2]
        m = NVAR * n
        self.nk, self.n, self.m = nk, n, m
        ab = np.zeros((nk, 2 * KL + KU + 1, m), complex)
        jj, rr, cc = np.meshgrid(np.arange(n), np.arange(NVAR), np.arange(NVAR),
                                 indexing="ij")
        for off, blk in ((-1, lo), (0, di), (1, up)):
            valid = (jj + off >= 0) & (jj + off < n)
            row = (NVAR * jj + rr)[valid]
            col = (NVAR * (jj + off) + cc)[valid]
            ab[:, KL + KU + row - col, col] = blk[:, jj[valid], rr[valid], cc[valid]]
        self.factors = []
        for k in range(nk):
            lu, piv, info = lapack.zgbtrf(ab[k], KL, KU)
            if info != 0:
                raise LinearSolveError(
                    f"implicit block system is singular for x1 mode {k} "
                    f"(zgbtrf info={info})")
            self.factors.append((lu, piv))

    def solve(self, rhs_hat):
        """Solve for every mode; ``rhs_hat`` has shape ``(4, nk, n)``."""
        b = rhs_hat.transpose(1, 2, 0).reshape(self.nk, self.m)
        x = np.empty_like(b)
        for k, (lu, piv) in enumerate(self.factors):
            sol, info = lapack.zgbtrs(lu, KL, KU, b[k][:, None], piv)
            if info != 0:
                raise LinearSolveError(f"banded solve failed for mode {k}")
            x[k] = sol[:, 0]
        return x.reshape(self.nk, self.n, NVAR).transpose(2, 0, 1)


# ---------------------------------------------------------------------------
# integrators

class ImexCNAB:
    """Crank-Nicolson on ``L`` with second-order Adams-Bashforth on ``N``.

    The first step (no history) is implicit Euler / explicit Euler.
    """

    def __init__(self, model: CouetteModel, dt: float, linear: bool = False):
        self.model = model
        self.dt = float(dt)
        self.linear = linear
        self.history = None

    def _nonlinear(self, U):
        if self.linear:
            return np.zeros_like(U)
        return self.model.nonlinear(U) * self.model.mask

    def step(self, U):
        m, dt = self.model, self.dt
        nl = self._nonlinear(U)
        if self.history is None:
            weight = 1.0
            rhs = U + dt * nl
        else:
            weight = 0.5
            rhs = U + 0.5 * dt * m.linear(U) + dt * (1.5 * nl - 0.5 * self.history)
        rhs = rhs * m.mask
        solver = m.implicit_factor(dt, weight)
        g = m.grid
        xhat = solver.solve(np.fft.rfft(rhs, axis=1))
        U_new = np.fft.irfft(xhat, n=g.n1, axis=1)
        U_new *= m.mask
        if not np.all(np.isfinite(U_new)):
            raise LinearSolveError("implicit step produced non-finite values")
        if not self.linear:
            m.check_positive(U_new)
        self.history = nl
        return U_new


class ExplicitRK4:
    def __init__(self, model: CouetteModel, dt: float, linear: bool = False,
                 c_acoustic=0.5, c_viscous=0.2, check_cfl=True):
        if check_cfl:
            ac, vi = cfl_limits(model.params, model.grid, c_acoustic, c_viscous)
            if dt > ac or dt > vi:
                raise CFLError(
                    f"dt={dt:.3e} violates the explicit limits: acoustic "
                    f"{ac:.3e}, viscous {vi:.3e}")
        self.model = model
        self.dt = float(dt)
        self.linear = linear

    def step(self, U):
        f = lambda V: self.model.rhs_constrained(V, self.linear)  # noqa: E731
        dt = self.dt
        k1 = f(U)
        k2 = f(U + 0.5 * dt * k1)
        k3 = f(U + 0.5 * dt * k2)
        k4 = f(U + dt * k3)
        return U + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# functional surface

def _model(params, grid, base, dealias_on=True):
    return CouetteModel(params, grid, base, dealias_on)


def tendency(state: PerturbationState, base: BaseFlow, params: PhysicalParams,
             grid: Grid, dealias_on=True, linear=False) -> Tendency:
    """Discrete time derivatives of ``state``.

    Wall rows hold the raw right-hand side (no boundary condition applied),
    so they measure how compatible the state is with the wall conditions.

    Raises
    ------
    PositivityError
        If ``rho~ + phi`` or ``T~ + theta`` is non-positive anywhere.
    """
    m = _model(params, grid, base, dealias_on)
    return Tendency.from_array(m.rhs(state.as_array(), linear))


def step_imex(state: PerturbationState, base: BaseFlow, params: PhysicalParams,
              grid: Grid, dt: float, dealias_on=True, linear=False,
              model: CouetteModel | None = None) -> PerturbationState:
    """One CNAB step.  The returned state carries the multistep history."""
    m = model or _model(params, grid, base, dealias_on)
    integ = ImexCNAB(m, dt, linear)
    if state.history is not None and state.history[0] == float(dt):
        integ.history = state.history[1]
    U = integ.step(state.as_array())
    return PerturbationState.from_array(U, state.time + dt,
                                        history=(float(dt), integ.history))


def step_explicit_rk4(state: PerturbationState, base: BaseFlow,
                      params: PhysicalParams, grid: Grid, dt: float,
                      dealias_on=True, linear=False, c_acoustic=0.5,
                      c_viscous=0.2, check_cfl=True) -> PerturbationState:
    m = _model(params, grid, base, dealias_on)
    integ = ExplicitRK4(m, dt, linear, c_acoustic, c_viscous, check_cfl)
    return PerturbationState.from_array(integ.step(state.as_array()),
                                        state.time + dt)


def make_initial_data(params: PhysicalParams, grid: Grid,
                      amplitudes=(1.0, 1.0, 1.0)) -> PerturbationState:
    """Initial perturbation with the small-Mach scalings of the stability theory.

    ``phi ~ eps**2``, ``psi ~ eps``, ``theta ~ eps**2``.  The density
    perturbation has zero mean, the velocity is the (analytic) curl of the
    stream function ``sin(x1) sin(pi x2)**4`` and so is divergence free, and
    ``psi``/``theta`` vanish to high order at both walls.
    """
    a_phi, a_psi, a_theta = amplitudes
    eps = params.eps
    X1, X2 = grid.mesh
    s = np.sin(np.pi * X2)
    c = np.cos(np.pi * X2)
    phi = eps ** 2 * a_phi * np.cos(X1) * s ** 2
    # stream function sin(x1) sin^4(pi x2): psi = (-d2 Phi, d1 Phi)
    psi1 = -eps * a_psi * np.sin(X1) * 4.0 * np.pi * s ** 3 * c
    psi2 = eps * a_psi * np.cos(X1) * s ** 4
    theta = eps ** 2 * a_theta * np.sin(X1) * s ** 4
    for f in (psi1, psi2, theta):
        f[:, 0] = 0.0
        f[:, -1] = 0.0
    return PerturbationState(phi, psi1, psi2, theta, time=0.0)


def run(config: SolverConfig, params: PhysicalParams, grid: Grid,
        initial: PerturbationState, sink=None, base: BaseFlow | None = None,
        linear=False, model: CouetteModel | None = None) -> PerturbationState:
    """Advance ``initial`` from its own time to ``config.t_end``.

    ``sink(state, tendency)`` is called at step 0, every ``diag_stride``
    steps and after the last step; ``tendency`` is the constrained
    right-hand side at that state.
    """
    m = model or CouetteModel(params, grid, base, config.dealias_on)
    if config.scheme == "imex_cnab":
        integ = ImexCNAB(m, config.dt, linear)
    else:
        integ = ExplicitRK4(m, config.dt, linear, config.c_acoustic,
                            config.c_viscous)
    U = initial.as_array()
    t0 = initial.time
    # t_end is absolute, so a restarted run stops at the same final time
    n_steps = max(0, int(round((config.t_end - t0) / config.dt)))

    def emit(U, t):
        if sink is not None:
            sink(PerturbationState.from_array(U, t),
                 Tendency.from_array(m.rhs_constrained(U, linear)))

    emit(U, t0)
    for n in range(1, n_steps + 1):
        t = t0 + n * config.dt
        try:
            U = integ.step(U)
        except SolverAbort as exc:
            exc.time, exc.step = t, n
            raise
        if n % config.diag_stride == 0 or n == n_steps:
            emit(U, t)
    return PerturbationState.from_array(U, t0 + n_steps * config.dt)
