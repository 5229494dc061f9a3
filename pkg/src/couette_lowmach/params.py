"""Physical parameters of the nondimensional compressible Couette problem.

Only the six raw inputs are free; every coefficient appearing in the
equations is derived here, with the gas constant fixed to ``R = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """Raised when a physical input violates its admissibility constraint."""


@dataclass(frozen=True)
class PhysicalParams:
    gamma: float
    mach: float
    reynolds: float
    prandtl: float
    visc_ratio: float
    chi: float
    eps: float = field(init=False)
    mu: float = field(init=False)
    mu_prime: float = field(init=False)
    kappa: float = field(init=False)
    cp: float = field(init=False)

    def __post_init__(self):
        _validate(self.gamma, self.mach, self.reynolds, self.prandtl,
                  self.visc_ratio, self.chi)
        cp = self.gamma / (self.gamma - 1.0)
        mu = 1.0 / self.reynolds
        object.__setattr__(self, "eps", math.sqrt(self.gamma) * self.mach)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_prime", self.visc_ratio * mu)
        object.__setattr__(self, "cp", cp)
        object.__setattr__(self, "kappa", cp / (self.reynolds * self.prandtl))

    def with_eps(self, eps: float) -> "PhysicalParams":
        """Copy with the Mach number chosen so that ``sqrt(gamma)*mach == eps``."""
        return build_params(self.gamma, eps / math.sqrt(self.gamma),
                            self.reynolds, self.prandtl, self.visc_ratio,
                            self.chi)

    def replace(self, **changes) -> "PhysicalParams":
        raw = dict(gamma=self.gamma, mach=self.mach, reynolds=self.reynolds,
                   prandtl=self.prandtl, visc_ratio=self.visc_ratio,
                   chi=self.chi)
        raw.update(changes)
        return build_params(**raw)


def _validate(gamma, mach, reynolds, prandtl, visc_ratio, chi):
    values = dict(gamma=gamma, mach=mach, reynolds=reynolds, prandtl=prandtl,
                  visc_ratio=visc_ratio, chi=chi)
    for name, value in values.items():
        if not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")
    if gamma <= 1.0:
        raise ParameterError(f"gamma must exceed 1 (got {gamma})")
    if mach <= 0.0:
        raise ParameterError(f"mach must be positive (got {mach})")
    if reynolds <= 0.0:
        raise ParameterError(f"reynolds must be positive (got {reynolds})")
    if prandtl <= 0.0:
        raise ParameterError(f"prandtl must be positive (got {prandtl})")
    if chi <= 0.0:
        raise ParameterError(f"chi must be positive (got {chi})")
    mu = 1.0 / reynolds
    if mu + visc_ratio * mu <= 0.0:
        raise ParameterError(
            f"mu + mu_prime must be positive (visc_ratio={visc_ratio})")


def build_params(gamma, mach, reynolds, prandtl, visc_ratio, chi):
    """Validate the raw inputs and derive ``eps, mu, mu_prime, kappa, cp``.

    Raises
    ------
    ParameterError
        On any violated constraint; the message names the offending input.
    """
    return PhysicalParams(float(gamma), float(mach), float(reynolds),
                          float(prandtl), float(visc_ratio), float(chi))


DEFAULTS = dict(gamma=1.4, reynolds=1.0, prandtl=0.72, visc_ratio=1.0 / 3.0,
                chi=1.0)
DEFAULT_EPS = 0.1


def default_params(eps: float = DEFAULT_EPS, **overrides) -> PhysicalParams:
    """The acceptance parameter set at a given ``eps``."""
    raw = dict(DEFAULTS)
    raw.update(overrides)
    return build_params(mach=eps / math.sqrt(raw["gamma"]), **raw)
