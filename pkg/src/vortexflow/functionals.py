"""Energies of a pair ``(A, u)``, their exact lattice gradients and the energy identity.

Tangent vectors are tuples ``(da, du)`` with ``da`` a real link field of shape
``(k, 2, nx, ny)`` and ``du`` a complex site field of shape ``(n, nx, ny)``.
"""
from dataclasses import dataclass, asdict

import numpy as np

from . import fields as fl
from . import lattice as lat

__all__ = [
    "EnergyBreakdown",
    "ymh",
    "f_moment",
    "dbar_energy",
    "pairing",
    "energy_identity_defect",
    "grad_f",
    "grad_ymh",
    "tangent_inner",
    "tangent_norm",
    "displace",
    "directional_fd",
    "kempf_ness_potential",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    ymh: float
    f_moment: float
    dbar_energy: float
    pairing: float
    identity_defect: float

    def as_dict(self):
        return asdict(self)


def _sq(x, grid):
    return float(np.sum(np.abs(x) ** 2)) * grid.cell


def ymh(A, u) -> float:
    """``1/2 (|F|^2 + |D u|^2 + |mu|^2)`` with plaquette curvature and forward differences."""
    g = A.grid
    return 0.5 * (_sq(fl.curvature(A), g) + _sq(fl.covariant_d(A, u), g) + _sq(fl.moment(u), g))


def f_moment(A, u) -> float:
    """``1/2 |Phi|^2`` with the site-averaged curvature."""
    return 0.5 * _sq(fl.moment_residual(A, u), A.grid)


def dbar_energy(A, u) -> float:
    """``1/2 sum |D_x u + i D_y u|^2`` with centred differences, i.e. ``2 |dbar u|^2``."""
    return 2.0 * _sq(fl.dbar_residual(A, u), A.grid)


def pairing(A, u) -> float:
    """Lattice version of the topological pairing ``int u^* omega - d<mu, A>``.

    The term is summed as ``sum Im(conj(D_x u) D_y u) - <*F, mu>`` over the
    closed torus so that its failure to be exactly topological stays visible.
    """
    g = A.grid
    dc = fl.centered_covariant_d(A, u)
    area = float(np.sum(np.imag(np.conj(dc[:, 0]) * dc[:, 1]))) * g.cell
    return area - lat.inner(fl.star_curvature(A), fl.moment(u), g)


def energy_identity_defect(A, u) -> EnergyBreakdown:
    e = ymh(A, u)
    f = f_moment(A, u)
    db = dbar_energy(A, u)
    p = pairing(A, u)
    return EnergyBreakdown(e, f, db, p, e - f - db - p)


def grad_f(A, u):
    """Exact gradient of :func:`f_moment`; equals the complex action of ``i Phi``."""
    phi = fl.moment_residual(A, u)
    return fl.complex_infinitesimal_action(A, u, phi)


def grad_ymh(A, u):
    """Exact gradient of :func:`ymh` including the derivative of the compact link phases."""
    g = A.grid
    w = A.spec.weights
    U = fl._link_phases(A)
    seam = u.seam
    du = fl.covariant_d(A, u)
    fwd_x = U[:, 0] * fl._shift(u.u, seam, 1, -2)
    fwd_y = U[:, 1] * fl._shift(u.u, seam, 1, -1)
    cur_x = np.imag(np.conj(du[:, 0]) * fwd_x)
    cur_y = np.imag(np.conj(du[:, 1]) * fwd_y)
    ga = lat.codiff2(fl.curvature(A), g)
    ga += np.stack([np.einsum("aj,jxy->axy", w, cur_x), np.einsum("aj,jxy->axy", w, cur_y)], axis=1)
    mu = fl.moment(u)
    gu = fl.covariant_d_adjoint(A, u, du) + np.einsum("aj,axy->jxy", w, mu) * u.u
    return ga, gu


def tangent_inner(x, y, grid) -> float:
    return lat.inner(x[0], y[0], grid) + lat.inner(x[1], y[1], grid)


def tangent_norm(x, grid) -> float:
    return float(np.sqrt(tangent_inner(x, x, grid)))


def displace(A, u, v, eps=1.0):
    """The pair ``(A + eps v_a, u + eps v_u)``."""
    return A.with_links(A.a + eps * v[0]), u.with_values(u.u + eps * v[1])


def directional_fd(func, A, u, v, eps=1e-5):
    """Fourth-order central difference of ``func`` along the tangent ``v``."""
    vals = [func(*displace(A, u, v, c * eps)) for c in (-2, -1, 1, 2)]
    return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * eps)


def kempf_ness_potential(A0, u0, s) -> float:
    """Closed-form Kempf-Ness value at ``exp(-i s)`` relative to the base pair ``(A0, u0)``.

    Its differential is ``-<Phi(exp(-i s)(A0, u0)), ds>`` and it is convex in ``s``.
    """
    g = A0.grid
    w = A0.spec.weights
    s = np.asarray(s, dtype=float)
    lin = -lat.inner(fl.star_curvature(A0) - A0.spec.tau[:, None, None], s, g)
    quad = 0.5 * _sq(lat.codiff2(lat.site_to_plaquette(s), g), g)
    ws = np.einsum("aj,axy->jxy", w, s)
    pot = 0.25 * float(np.sum(np.abs(u0.u) ** 2 * np.expm1(-2 * ws))) * g.cell
    return lin + quad + pot
