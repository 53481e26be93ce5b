"""Connections, sections and the torus-group actions on them.

Conventions
-----------
The structure group is ``T^k`` acting on ``C^n`` with integer weight matrix
``W`` (shape ``k x n``). The infinitesimal action is
``L_u xi = -i <W_j, xi> u_j`` and ``d_A u = du + L_u A``, so a unitary gauge
transformation ``exp(theta)`` acts by ``a -> a - d0 theta``,
``u_j -> exp(-i <W_j, theta>) u_j``. The moment map is
``mu_a = 1/2 sum_j W_aj |u_j|^2 - tau_a``. With these choices a degree-``d``
background has constant curvature ``+2 pi d / volume`` and the energy identity
closes with pairing ``2 pi <tau, d>``.

The imaginary directions act by ``exp(i s)``: ``u_j -> exp(<W_j, s>) u_j`` and
``a -> a + codiff2(site_to_plaquette(s))``. This is the sign for which
``t -> <Phi(exp(i t xi)(A, u)), xi>`` is nondecreasing.

Degree sectors use a Landau-gauge background ``A_y = B x`` whose jump across
the x-seam is absorbed by the transition phase ``exp(i <W_j, B> lx y)`` on
sections. All dynamical arrays stay strictly periodic.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import lattice as lat
from .exceptions import CocycleError
from .lattice import TorusGrid

__all__ = [
    "ActionSpec",
    "Connection",
    "Section",
    "ComplexGauge",
    "curvature",
    "star_curvature",
    "covariant_d",
    "dbar_residual",
    "moment",
    "moment_residual",
    "infinitesimal_action",
    "infinitesimal_action_adjoint",
    "complex_infinitesimal_action",
    "omega_pairing",
    "apply_complex_gauge",
    "apply_unitary_gauge",
    "theta_section",
    "holomorphic_pair",
]


def _as_matrix(weights):
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if not np.all(np.isfinite(w)) or not np.allclose(w, np.round(w)):
        raise ValueError("weight matrix must be integral")
    return np.round(w)


@dataclass(frozen=True, eq=False)
class ActionSpec:
    """Linear ``T^k`` action on ``C^n`` together with the bundle topology.

    Parameters
    ----------
    weights : array-like, shape (k, n)
        Integer weights; column ``j`` is the weight of coordinate ``u_j``.
    tau : array-like, shape (k,)
        Constant shift in the moment map.
    degrees : array-like of int, shape (k,)
        Bundle degree of each circle factor.
    """

    weights: np.ndarray
    tau: np.ndarray
    degrees: np.ndarray = None
    proper: bool = False

    def __post_init__(self):
        w = _as_matrix(self.weights)
        k, n = w.shape
        tau = np.broadcast_to(np.asarray(self.tau, dtype=float), (k,)).copy()
        deg = np.zeros(k) if self.degrees is None else np.asarray(self.degrees, dtype=float)
        deg = np.broadcast_to(deg, (k,)).copy()
        if not np.allclose(deg, np.round(deg)):
            raise ValueError("degrees must be integers")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "degrees", np.round(deg).astype(int))
        if self.proper and not self.is_proper():
            raise ValueError("moment map is not proper for these weights")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def is_proper(self) -> bool:
        """Whether ``mu`` is proper on ``C^n``.

        That holds exactly when some ``eta`` pairs positively with every weight
        column, i.e. the weights lie in an open half-space; decided by a small LP.
        """
        w = self.weights
        k, n = w.shape
        # maximise t subject to <eta, W_j> >= t, |eta_a| <= 1
        c = np.zeros(k + 1)
        c[-1] = -1.0
        a_ub = np.hstack([-w.T, np.ones((n, 1))])
        bounds = [(-1.0, 1.0)] * k + [(None, 1.0)]
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), bounds=bounds, method="highs")
        return bool(res.status == 0 and -res.fun > 1e-12)

    def min_positive_weight(self) -> float:
        pos = self.weights[self.weights > 0]
        return float(pos.min()) if pos.size else np.inf

    def field_strength(self, grid: TorusGrid) -> np.ndarray:
        """Constant background curvature ``B_a = 2 pi d_a / volume``."""
        return 2 * np.pi * self.degrees / grid.volume

    def seam_phase(self, grid: TorusGrid) -> np.ndarray:
        """Transition phase for crossing the x-seam, shape ``(n, ny)``."""
        b = self.weights.T @ self.field_strength(grid)
        return np.exp(1j * np.outer(b * grid.lx, grid.y))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": self.weights.astype(int).tolist(),
            "tau": self.tau.tolist(),
            "degrees": self.degrees.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Connection:
    """Fixed degree background plus a periodic fluctuation ``a`` of shape ``(k, 2, nx, ny)``."""

    grid: TorusGrid
    spec: ActionSpec
    a: np.ndarray = None

    def __post_init__(self):
        shape = (self.spec.k, 2) + self.grid.shape
        a = np.zeros(shape) if self.a is None else np.asarray(self.a, dtype=float)
        if a.shape != shape:
            raise ValueError(f"link field has shape {a.shape}, expected {shape}")
        object.__setattr__(self, "a", a)

    @property
    def background(self) -> np.ndarray:
        bg = np.zeros((self.spec.k, 2) + self.grid.shape)
        b = self.spec.field_strength(self.grid)
        bg[:, 1] = b[:, None, None] * self.grid.x[None, :, None]
        return bg

    @property
    def total(self) -> np.ndarray:
        return self.background + self.a

    def with_links(self, a) -> "Connection":
        return Connection(self.grid, self.spec, a)


@dataclass(frozen=True, eq=False)
class Section:
    """Values ``u`` of shape ``(n, nx, ny)`` on the fundamental domain."""

    grid: TorusGrid
    spec: ActionSpec
    u: np.ndarray = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        shape = (self.spec.n,) + self.grid.shape
        u = np.zeros(shape, complex) if self.u is None else np.asarray(self.u, dtype=complex)
        if u.shape != shape:
            raise ValueError(f"section has shape {u.shape}, expected {shape}")
        object.__setattr__(self, "u", u)
        if self.check:
            _check_cocycle(self.grid, self.spec)

    @property
    def seam(self) -> np.ndarray:
        return self.spec.seam_phase(self.grid)

    def with_values(self, u) -> "Section":
        return Section(self.grid, self.spec, u, check=False)


def _check_cocycle(grid, spec):
    # winding of the seam phase around the y-cycle must equal the flux
    b = spec.weights.T @ spec.field_strength(grid)
    winding = b * grid.lx * grid.ly
    expected = 2 * np.pi * (spec.weights.T @ spec.degrees)
    if not np.allclose(winding, expected, rtol=1e-12, atol=1e-9):
        raise CocycleError("seam transition does not reproduce the plaquette flux")
    if not np.allclose(np.exp(1j * winding), 1.0, atol=1e-9):
        raise CocycleError("seam transition is not single valued")


@dataclass(frozen=True, eq=False)
class ComplexGauge:
    """Abelian complex gauge element ``exp(i s) exp(theta)``.

    ``s`` is the non-compact part, ``theta`` the compact one; both have shape
    ``(k, nx, ny)``. In the factorisation ``g = exp(-i xi) k`` one has ``xi = -s``.
    """

    s: np.ndarray
    theta: np.ndarray = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        th = np.zeros_like(s) if self.theta is None else np.asarray(self.theta, dtype=float)
        if th.shape != s.shape:
            raise ValueError("s and theta must have the same shape")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "theta", th)

    @classmethod
    def identity(cls, grid: TorusGrid, k: int) -> "ComplexGauge":
        return cls(np.zeros((k,) + grid.shape))

    def __matmul__(self, other: "ComplexGauge") -> "ComplexGauge":
        return ComplexGauge(self.s + other.s, self.theta + other.theta)

    def inverse(self) -> "ComplexGauge":
        return ComplexGauge(-self.s, -self.theta)


# -- section transport -------------------------------------------------------

def _shift(u, seam, step, axis):
    """Neighbouring section values expressed in the frame of each site."""
    out = np.roll(u, -step, axis=axis)
    if axis == -2:
        if step > 0:
            out[..., -1, :] = seam * u[..., 0, :]
        else:
            out[..., 0, :] = np.conj(seam) * u[..., -1, :]
    return out


def _link_phases(A: Connection):
    # (n, 2, nx, ny): exp(-i h <W_j, A>)
    tot = A.total
    w = A.spec.weights
    phase_x = np.einsum("aj,axy->jxy", w, tot[:, 0]) * A.grid.hx
    phase_y = np.einsum("aj,axy->jxy", w, tot[:, 1]) * A.grid.hy
    return np.exp(-1j * np.stack([phase_x, phase_y], axis=1))


def curvature(A: Connection) -> np.ndarray:
    """Plaquette curvature ``*F``, shape ``(k, nx, ny)``; includes the seam jump."""
    g = A.grid
    f = lat.d1(A.total, g)
    jump = A.spec.field_strength(g) * g.lx
    f[:, -1, :] += jump[:, None] / g.hx
    return f


def star_curvature(A: Connection) -> np.ndarray:
    """Curvature averaged from plaquette centres onto sites."""
    return lat.plaquette_to_site(curvature(A))


def covariant_d(A: Connection, u: Section) -> np.ndarray:
    """Forward covariant differences, shape ``(n, 2, nx, ny)``."""
    g = A.grid
    U = _link_phases(A)
    seam = u.seam[:, :]
    dx = (U[:, 0] * _shift(u.u, seam, 1, -2) - u.u) / g.hx
    dy = (U[:, 1] * _shift(u.u, seam, 1, -1) - u.u) / g.hy
    return np.stack([dx, dy], axis=1)


def covariant_d_adjoint(A: Connection, u: Section, v) -> np.ndarray:
    """Adjoint of ``covariant_d(A, .)`` applied to a ``(n, 2, nx, ny)`` field."""
    g = A.grid
    U = _link_phases(A)
    seam = u.seam
    tx = np.conj(U[:, 0]) * v[:, 0]
    ty = np.conj(U[:, 1]) * v[:, 1]
    out = (_shift(tx, seam, -1, -2) - v[:, 0]) / g.hx
    out += (_shift(ty, seam, -1, -1) - v[:, 1]) / g.hy
    return out


def centered_covariant_d(A: Connection, u: Section) -> np.ndarray:
    g = A.grid
    U = _link_phases(A)
    seam = u.seam
    fx = U[:, 0] * _shift(u.u, seam, 1, -2)
    bx = _shift(np.conj(U[:, 0]) * u.u, seam, -1, -2)
    fy = U[:, 1] * _shift(u.u, seam, 1, -1)
    by = _shift(np.conj(U[:, 1]) * u.u, seam, -1, -1)
    return np.stack([(fx - bx) / (2 * g.hx), (fy - by) / (2 * g.hy)], axis=1)


def dbar_residual(A: Connection, u: Section) -> np.ndarray:
    """``(D_x + i D_y) u / 2`` with centred covariant differences, shape ``(n, nx, ny)``."""
    dc = centered_covariant_d(A, u)
    return 0.5 * (dc[:, 0] + 1j * dc[:, 1])


def moment(u: Section) -> np.ndarray:
    """Pointwise ``mu_a = 1/2 sum_j W_aj |u_j|^2 - tau_a``, shape ``(k, nx, ny)``."""
    spec = u.spec
    return 0.5 * np.einsum("aj,jxy->axy", spec.weights, np.abs(u.u) ** 2) - spec.tau[:, None, None]


def moment_residual(A: Connection, u: Section) -> np.ndarray:
    """Site field ``Phi = *F + mu(u)``."""
    return star_curvature(A) + moment(u)


def infinitesimal_action(A: Connection, u: Section, xi):
    """Tangent pair ``(-d0 xi, L_u xi)`` generated by a Lie algebra field ``xi``."""
    xi = np.asarray(xi, dtype=float)
    lu = -1j * np.einsum("aj,axy->jxy", u.spec.weights, xi) * u.u
    return -lat.d0(xi, A.grid), lu


def infinitesimal_action_adjoint(A: Connection, u: Section, tangent):
    """Adjoint of :func:`infinitesimal_action` for the weighted inner products."""
    ahat, uhat = tangent
    im = np.imag(np.conj(u.u) * uhat)
    return -lat.codiff(ahat, A.grid) - np.einsum("aj,jxy->axy", u.spec.weights, im)


def complex_infinitesimal_action(A: Connection, u: Section, xi):
    """Tangent pair generated by ``i xi``; equals ``J`` applied to the real action."""
    xi = np.asarray(xi, dtype=float)
    da = lat.codiff2(lat.site_to_plaquette(xi), A.grid)
    du = np.einsum("aj,axy->jxy", u.spec.weights, xi) * u.u
    return da, du


def omega_pairing(A: Connection, u: Section, xi, tangent) -> float:
    """``omega(L xi, v) = <J L xi, v>``; the moment map identity says this equals ``d<Phi, xi>(v)``."""
    da, du = complex_infinitesimal_action(A, u, xi)
    return lat.inner(da, tangent[0], A.grid) + lat.inner(du, tangent[1], A.grid)


def apply_complex_gauge(g: ComplexGauge, A: Connection, u: Section):
    """Act by ``exp(i s) exp(theta)`` on the pair."""
    grid = A.grid
    w = A.spec.weights
    a = A.a + lat.codiff2(lat.site_to_plaquette(g.s), grid) - lat.d0(g.theta, grid)
    ws = np.einsum("aj,axy->jxy", w, g.s)
    wt = np.einsum("aj,axy->jxy", w, g.theta)
    return A.with_links(a), u.with_values(np.exp(ws - 1j * wt) * u.u)


def apply_unitary_gauge(theta, A: Connection, u: Section):
    return apply_complex_gauge(ComplexGauge(np.zeros_like(theta), theta), A, u)


# -- holomorphic data ---------------------------------------------------------

def theta_section(grid: TorusGrid, spec: ActionSpec, coeffs=None, rng=None, nmax=None):
    """Sampled holomorphic section of the background connection.

    Component ``j`` lives in a line bundle of degree ``m_j = <W_j, d>``. For
    ``m_j > 0`` it is a combination of the ``m_j`` theta-type functions
    ``sum_n c_n exp(i k_n y - b (x - k_n / b)^2 / 2 + ...)``; for ``m_j = 0`` a
    constant; for ``m_j < 0`` only the zero section exists.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    X, Y = grid.mesh()
    m = spec.weights.T @ spec.degrees
    b = spec.weights.T @ spec.field_strength(grid)
    u = np.zeros((spec.n,) + grid.shape, complex)
    for j in range(spec.n):
        mj = int(round(m[j]))
        if mj < 0:
            continue
        if coeffs is not None:
            cj = np.atleast_1d(np.asarray(coeffs[j], dtype=complex))
        else:
            size = max(mj, 1)
            cj = rng.normal(size=size) + 1j * rng.normal(size=size)
        if mj == 0:
            u[j] = cj[0]
            continue
        span = nmax if nmax is not None else 6 * mj + 6
        for n in range(-span, span + 1):
            kn = 2 * np.pi * n / grid.ly
            centre = kn / b[j]
            u[j] += cj[n % mj] * np.exp(1j * kn * Y - 0.5 * b[j] * (X - centre) ** 2)
    return Section(grid, spec, u)


def smooth_random_field(grid: TorusGrid, shape, rng, modes=2, amplitude=1.0):
    """Real periodic field made of the lowest Fourier modes, RMS about ``amplitude``."""
    X, Y = grid.mesh()
    out = np.zeros(tuple(shape) + grid.shape)
    for idx in np.ndindex(*shape):
        f = np.zeros(grid.shape)
        for p in range(-modes, modes + 1):
            for q in range(-modes, modes + 1):
                if p == 0 and q == 0:
                    continue
                c = rng.normal(size=2) / (1 + p * p + q * q)
                ph = 2 * np.pi * (p * X / grid.lx + q * Y / grid.ly)
                f += c[0] * np.cos(ph) + c[1] * np.sin(ph)
        rms = np.sqrt(np.mean(f**2))
        out[idx] = amplitude * f / rms if rms > 0 else f
    return out


def holomorphic_pair(grid: TorusGrid, spec: ActionSpec, rng=None, amplitude=0.3, modes=1, coeffs=None,
                     scale=1.0):
    """Random holomorphic pair: a smooth complex gauge applied to (background, theta section)."""
    rng = np.random.default_rng(0) if rng is None else rng
    A = Connection(grid, spec)
    u = theta_section(grid, spec, coeffs=coeffs, rng=rng)
    u = u.with_values(scale * u.u)
    s = smooth_random_field(grid, (spec.k,), rng, modes=modes, amplitude=amplitude)
    th = smooth_random_field(grid, (spec.k,), rng, modes=modes, amplitude=amplitude)
    return apply_complex_gauge(ComplexGauge(s, th), A, u)
