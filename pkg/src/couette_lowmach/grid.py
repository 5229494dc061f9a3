"""Tensor grid on the periodic channel S^1 x (0, 1) and its discrete operators.

Fields are plain ``numpy`` arrays of shape ``(n1, n2 + 1)``: axis 0 is the
periodic direction ``x1`` sampled at ``2*pi*i/n1``, axis 1 the wall-normal
direction ``x2`` sampled at ``j/n2`` with both walls included.

``x1`` derivatives use Fourier collocation, ``x2`` derivatives second-order
finite differences.  Mixed derivatives are always composed ``x1`` first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    n1: int
    n2: int
    dx1: float = field(init=False)
    dx2: float = field(init=False)

    def __post_init__(self):
        if self.n1 < 8 or self.n1 % 2:
            raise GridError(f"n1 must be even and >= 8 (got {self.n1})")
        if self.n2 < 8:
            raise GridError(f"n2 must be >= 8 (got {self.n2})")
        object.__setattr__(self, "dx1", 2.0 * np.pi / self.n1)
        object.__setattr__(self, "dx2", 1.0 / self.n2)

    # -- coordinates -------------------------------------------------------
    @property
    def shape(self):
        return (self.n1, self.n2 + 1)

    @cached_property
    def x1(self):
        return self.dx1 * np.arange(self.n1)

    @cached_property
    def x2(self):
        return np.arange(self.n2 + 1) / self.n2

    @cached_property
    def mesh(self):
        """``(X1, X2)`` node coordinates, each of shape ``self.shape``."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @cached_property
    def wavenumbers(self):
        """Non-negative integer wavenumbers of the real FFT along ``x1``."""
        return np.arange(self.n1 // 2 + 1)

    @cached_property
    def _ik(self):
        ik = 1j * self.wavenumbers.astype(float)
        ik[-1] = 0.0  # Nyquist
        return ik[:, None]

    @cached_property
    def _k2(self):
        return (self.wavenumbers.astype(float) ** 2)[:, None]

    @cached_property
    def trapezoid_weights(self):
        w = np.full(self.n2 + 1, self.dx2)
        w[0] = w[-1] = 0.5 * self.dx2
        return w

    def zeros(self):
        return np.zeros(self.shape)

    def check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridError(f"field shape {f.shape} does not match grid {self.shape}")
        return f

    # -- x1 (spectral) -----------------------------------------------------
    def fft(self, f):
        return np.fft.rfft(f, axis=0)

    def ifft(self, fhat):
        return np.fft.irfft(fhat, n=self.n1, axis=0)

    def ddx1(self, f):
        """Fourier derivative in ``x1``; the Nyquist mode is mapped to zero."""
        return self.ifft(self._ik * self.fft(self.check(f)))

    def d2dx1(self, f):
        """Second Fourier derivative in ``x1`` (``-k**2``, Nyquist kept)."""
        return self.ifft(-self._k2 * self.fft(self.check(f)))

    @cached_property
    def dealias_cutoff(self):
        return self.n1 // 3

    def dealias(self, f):
        """Two-thirds rule: drop ``x1`` modes with ``k > n1/3``.

        Fields with no energy above the cutoff (to roundoff) are returned
        unchanged, which makes the operation bitwise idempotent.
        """
        f = self.check(f)
        fhat = self.fft(f)
        high = fhat[self.dealias_cutoff + 1:]
        scale = np.abs(fhat).max()
        if scale == 0.0 or np.abs(high).max() <= 1e-13 * scale:
            return f.copy()
        fhat[self.dealias_cutoff + 1:] = 0.0
        return self.ifft(fhat)

    # -- x2 (finite differences) ------------------------------------------
    def ddx2(self, f):
        """Central differences inside, second-order one-sided at the walls."""
        f = self.check(f)
        h = self.dx2
        d = np.empty_like(f)
        d[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * h)
        d[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * h)
        d[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / (2.0 * h)
        return d

    def ddx2_flux(self, f):
        """Wall-normal divergence compatible with the trapezoid rule.

        Central inside, first-order one-sided at the walls, so that
        ``integrate(ddx2_flux(g)) == 2*pi*(mean g(x2=1) - mean g(x2=0))``
        holds to roundoff.  Used for the conservative continuity equation.
        """
        f = self.check(f)
        h = self.dx2
        d = np.empty_like(f)
        d[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * h)
        d[:, 0] = (f[:, 1] - f[:, 0]) / h
        d[:, -1] = (f[:, -1] - f[:, -2]) / h
        return d

    def d2dx2(self, f):
        """Three-point second difference inside, four-point one-sided at walls."""
        f = self.check(f)
        h2 = self.dx2 ** 2
        d = np.empty_like(f)
        d[:, 1:-1] = (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / h2
        d[:, 0] = (2.0 * f[:, 0] - 5.0 * f[:, 1] + 4.0 * f[:, 2] - f[:, 3]) / h2
        d[:, -1] = (2.0 * f[:, -1] - 5.0 * f[:, -2] + 4.0 * f[:, -3]
                    - f[:, -4]) / h2
        return d

    def laplacian(self, f):
        return self.d2dx1(f) + self.d2dx2(f)

    # -- quadrature and norms ---------------------------------------------
    def integrate(self, f):
        """Rectangle rule in ``x1`` times trapezoid rule in ``x2``."""
        f = self.check(f)
        return float(self.dx1 * np.sum(f @ self.trapezoid_weights))

    def derivatives(self, f, order):
        """All derivatives ``d2^b d1^a f`` with ``a + b == order``."""
        f = self.check(f)
        out = []
        for a in range(order, -1, -1):
            g = f
            for _ in range(a):
                g = self.ddx1(g)
            for _ in range(order - a):
                g = self.ddx2(g)
            out.append(g)
        return out

    def seminorm_sq(self, f, order):
        """Squared L2 norm of all derivatives of exactly ``order``."""
        return sum(self.integrate(g * g) for g in self.derivatives(f, order))

    def seminorms_sq(self, f, kmax):
        """``[|f|_0**2, ..., |f|_kmax**2]`` sharing the derivative tree."""
        f = self.check(f)
        out = [0.0] * (kmax + 1)
        g1 = f
        for a in range(kmax + 1):
            if a:
                g1 = self.ddx1(g1)
            g = g1
            for b in range(kmax + 1 - a):
                if b:
                    g = self.ddx2(g)
                out[a + b] += self.integrate(g * g)
        return out

    def sobolev_norm(self, f, k):
        """H^k norm: every multi-index of order <= k counted once."""
        if not 0 <= k <= 3:
            raise GridError(f"Sobolev order must be in 0..3 (got {k})")
        return float(np.sqrt(sum(self.seminorms_sq(f, k))))

    def l2_norm(self, f):
        f = self.check(f)
        return float(np.sqrt(self.integrate(f * f)))

    def linf_norm(self, f):
        return float(np.abs(self.check(f)).max())
