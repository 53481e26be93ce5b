"""Discrete exterior calculus on a periodic rectangular grid.

Array layout (all fields are numpy arrays, component axes first):

* site field       ``(..., nx, ny)``
* link field       ``(..., 2, nx, ny)``; index 0 holds x-links ``(i,j)->(i+1,j)``,
  index 1 holds y-links ``(i,j)->(i,j+1)``
* plaquette field  ``(..., nx, ny)``; plaquette ``(i,j)`` has lower-left corner ``(i,j)``

Every inner product carries the cell measure ``hx*hy`` so that norms approximate
L2 norms on the torus. The codifferentials are the exact adjoints of the
forward differences under these inner products.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import NonZeroMean

__all__ = [
    "TorusGrid",
    "d0",
    "d1",
    "codiff",
    "codiff2",
    "laplacian",
    "solve_poisson",
    "site_to_plaquette",
    "plaquette_to_site",
    "inner",
    "norm",
]


@dataclass(frozen=True)
class TorusGrid:
    """Flat rectangular torus ``[0, lx) x [0, ly)`` sampled on ``nx x ny`` sites."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("site counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"need at least 4 sites per direction, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("side lengths must be positive")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def volume(self) -> float:
        return self.lx * self.ly

    @property
    def cell(self) -> float:
        """Quadrature weight of one site, link or plaquette."""
        return self.hx * self.hy

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    def mesh(self):
        """Site coordinates as two ``(nx, ny)`` arrays."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Eigenvalues of ``codiff(d0(.))`` on the FFT modes, shape ``(nx, ny)``."""
        tx = 2 * np.pi * np.fft.fftfreq(self.nx)
        ty = 2 * np.pi * np.fft.fftfreq(self.ny)
        lam_x = (2.0 / self.hx**2) * (1 - np.cos(tx))
        lam_y = (2.0 / self.hy**2) * (1 - np.cos(ty))
        return lam_x[:, None] + lam_y[None, :]

    @cached_property
    def average_symbol(self) -> np.ndarray:
        """``|s(k)|^2`` for the four-point plaquette/site averaging pair."""
        tx = 2 * np.pi * np.fft.fftfreq(self.nx)
        ty = 2 * np.pi * np.fft.fftfreq(self.ny)
        return (np.cos(tx / 2) ** 2)[:, None] * (np.cos(ty / 2) ** 2)[None, :]

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "lx": self.lx, "ly": self.ly}


def _fwd(f, axis):
    return np.roll(f, -1, axis=axis) - f


def _bwd(f, axis):
    return f - np.roll(f, 1, axis=axis)


def d0(f, grid: TorusGrid):
    """Forward-difference gradient of a periodic site field."""
    f = np.asarray(f)
    return np.stack([_fwd(f, -2) / grid.hx, _fwd(f, -1) / grid.hy], axis=-3)


def d1(a, grid: TorusGrid):
    """Discrete curl ``dA_y/dx - dA_x/dy`` of a periodic link field, on plaquettes."""
    a = np.asarray(a)
    ax, ay = a[..., 0, :, :], a[..., 1, :, :]
    return _fwd(ay, -2) / grid.hx - _fwd(ax, -1) / grid.hy


def codiff(a, grid: TorusGrid):
    """Adjoint of :func:`d0` (a backward divergence with a minus sign)."""
    a = np.asarray(a)
    return -(_bwd(a[..., 0, :, :], -2) / grid.hx + _bwd(a[..., 1, :, :], -1) / grid.hy)


def codiff2(p, grid: TorusGrid):
    """Adjoint of :func:`d1`, mapping plaquette fields to link fields."""
    p = np.asarray(p)
    return np.stack([_bwd(p, -1) / grid.hy, -_bwd(p, -2) / grid.hx], axis=-3)


def laplacian(f, grid: TorusGrid):
    """Positive five-point Laplacian ``codiff(d0 f)``."""
    return codiff(d0(f, grid), grid)


def plaquette_to_site(p):
    """Average the four plaquettes touching each site.

    Plaquette ``(i,j)`` is centred at ``(i+1/2, j+1/2)``; the average is
    therefore centred exactly on the site.
    """
    p = np.asarray(p)
    q = p + np.roll(p, 1, axis=-2)
    return 0.25 * (q + np.roll(q, 1, axis=-1))


def site_to_plaquette(f):
    """Adjoint of :func:`plaquette_to_site` (corner average onto plaquettes)."""
    f = np.asarray(f)
    q = f + np.roll(f, -1, axis=-2)
    return 0.25 * (q + np.roll(q, -1, axis=-1))


def inner(f, g, grid: TorusGrid) -> float:
    """Weighted real inner product ``Re sum conj(f) g * hx*hy`` over all axes."""
    return float(np.real(np.vdot(np.asarray(f), np.asarray(g)))) * grid.cell


def norm(f, grid: TorusGrid) -> float:
    return float(np.sqrt(max(inner(f, f, grid), 0.0)))


def spectral_apply(f, symbol):
    """Multiply a real periodic field by a Fourier symbol over the last two axes."""
    out = np.fft.ifft2(np.fft.fft2(f, axes=(-2, -1)) * symbol, axes=(-2, -1))
    return out.real if np.isrealobj(f) else out


def solve_poisson(rho, grid: TorusGrid):
    """Solve ``laplacian(phi) = rho`` for mean-zero ``phi`` by FFT.

    Raises :class:`NonZeroMean` when a component of ``rho`` has a mean larger than
    ``1e-10`` times its RMS magnitude.
    """
    rho = np.asarray(rho)
    flat = rho.reshape(-1, grid.nx, grid.ny)
    for comp in flat:
        scale = np.sqrt(np.mean(np.abs(comp) ** 2))
        if abs(comp.mean()) > 1e-10 * scale:
            raise NonZeroMean(f"mean {comp.mean():.3e} vs rms {scale:.3e}")
    sym = grid.laplacian_symbol.copy()
    sym[0, 0] = 1.0
    inv = 1.0 / sym
    inv[0, 0] = 0.0
    return spectral_apply(rho, inv)
