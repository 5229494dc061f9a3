"""Nondimensional plane Couette steady state and its discrete residual."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .params import PhysicalParams


class BaseFlowError(ValueError):
    pass


@dataclass(frozen=True)
class BaseFlow:
    """Wall-normal profiles sampled at ``grid.x2`` (1-D arrays of length n2+1).

    Derivatives are the analytic ones, never finite differences.
    """
    x2: np.ndarray
    rho_t: np.ndarray
    u1_t: np.ndarray
    temp_t: np.ndarray
    du1_t: np.ndarray
    dtemp_t: np.ndarray
    d2temp_t: np.ndarray
    drho_t: np.ndarray

    def column(self, name):
        """Profile broadcast against an ``(n1, n2 + 1)`` field."""
        return getattr(self, name)[None, :]


def heating_coefficient(params: PhysicalParams) -> float:
    """Amplitude ``eps**2 Pr / (2 Cp)`` of the viscous-heating parabola."""
    return params.eps ** 2 * params.prandtl / (2.0 * params.cp)


def temperature(params: PhysicalParams, x2):
    x2 = np.asarray(x2, dtype=float)
    c = heating_coefficient(params)
    return params.chi + (1.0 - params.chi) * x2 - c * (x2 * x2 - x2)


def temperature_deviation(params: PhysicalParams, x2):
    """``T~ - 1`` sampled directly, free of the rounding of values near 1."""
    x2 = np.asarray(x2, dtype=float)
    c = heating_coefficient(params)
    return (params.chi - 1.0) * (1.0 - x2) - c * (x2 * x2 - x2)


def build_base_flow(params: PhysicalParams, grid: Grid) -> BaseFlow:
    x2 = grid.x2.copy()
    c = heating_coefficient(params)
    temp = temperature(params, x2)
    # exact endpoint values, independent of roundoff in the quadratic
    temp[0] = params.chi
    temp[-1] = 1.0
    if temp.min() <= 0.0:
        raise BaseFlowError(
            f"base temperature is non-positive (min {temp.min():.3g}); "
            f"chi={params.chi} is not admissible")
    dtemp = (1.0 - params.chi) - c * (2.0 * x2 - 1.0)
    rho = 1.0 / temp
    return BaseFlow(
        x2=x2,
        rho_t=rho,
        u1_t=x2.copy(),
        temp_t=temp,
        du1_t=np.ones_like(x2),
        dtemp_t=dtemp,
        d2temp_t=np.full_like(x2, -2.0 * c),
        drho_t=-dtemp / temp ** 2,
    )


def steady_residual(base: BaseFlow, params: PhysicalParams, grid: Grid):
    """L2 norms of the four discrete equation residuals at the base state.

    The full nondimensional system is evaluated with the grid operators on
    the sampled profiles.  The energy residual closes because
    ``kappa * d2T = -eps**2 * mu`` exactly when ``kappa * Pr / Cp == mu``.

    Returns
    -------
    tuple of float
        ``(r_mass, r_mom1, r_mom2, r_energy)``
    """
    ones = np.ones(grid.shape)
    rho = base.rho_t[None, :] * ones
    temp = base.temp_t[None, :] * ones
    u1 = base.u1_t[None, :] * ones
    u2 = np.zeros(grid.shape)
    mu, mup, eps2 = params.mu, params.mu_prime, params.eps ** 2

    # conduction acts on T~ - 1; differencing the O(1) offset only adds roundoff
    dev = temperature_deviation(params, base.x2)[None, :] * ones

    d1 = grid.ddx1
    d2 = grid.ddx2
    p = rho * temp
    div_u = d1(u1) + d2(u2)

    r_mass = d1(rho * u1) + d2(rho * u2)

    lap_u1 = grid.laplacian(u1)
    lap_u2 = grid.laplacian(u2)
    r_mom1 = (rho * (u1 * d1(u1) + u2 * d2(u1)) + d1(p) / eps2
              - mu * lap_u1 - (mu + mup) * d1(div_u))
    r_mom2 = (rho * (u1 * d1(u2) + u2 * d2(u2)) + d2(p) / eps2
              - mu * lap_u2 - (mu + mup) * d2(div_u))

    s11, s22 = d1(u1), d2(u2)
    s12 = 0.5 * (d2(u1) + d1(u2))
    heating = eps2 * (2.0 * mu * (s11 ** 2 + s22 ** 2 + 2.0 * s12 ** 2)
                      + mup * div_u ** 2)
    r_energy = (rho / (params.gamma - 1.0) * (u1 * d1(temp) + u2 * d2(temp))
                + p * div_u - params.kappa * grid.laplacian(dev) - heating)

    return tuple(grid.l2_norm(r) for r in (r_mass, r_mom1, r_mom2, r_energy))
