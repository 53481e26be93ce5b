"""Finite-dimensional analogue: torus actions on ``C^n`` with no base surface.

Everything here has closed forms or cheap ODE solutions, so it doubles as an
oracle for the lattice code. Real coordinates are ``y = (Re x_0, Im x_0, Re x_1, ...)``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .exceptions import (
    DegenerateSamples,
    Inconclusive,
    MaxTimeReached,
    NewtonDiverged,
    NotUnstable,
    RankAmbiguous,
    ViolationDetected,
)
from .fields import ActionSpec

__all__ = [
    "FinitePoint",
    "FiniteFlowResult",
    "ReducedPotential",
    "fd_moment",
    "fd_potential",
    "fd_gradient",
    "fd_hessian",
    "fd_flow",
    "fd_weight",
    "fd_weight_numeric",
    "fd_dominant_weight_bruteforce",
    "fd_reduced_potential",
    "fd_lojasiewicz_probe",
]


@dataclass(frozen=True, eq=False)
class FinitePoint:
    x: np.ndarray
    spec: ActionSpec

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex).reshape(-1)
        if x.shape != (self.spec.n,):
            raise ValueError(f"point has {x.size} coordinates, expected {self.spec.n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point must be finite")
        object.__setattr__(self, "x", x)


def fd_moment(x, spec) -> np.ndarray:
    """``mu_a = 1/2 sum_j W_aj |x_j|^2 - tau_a``."""
    x = np.asarray(x, dtype=complex)
    return 0.5 * spec.weights @ np.abs(x) ** 2 - spec.tau


def _to_real(x):
    x = np.asarray(x, dtype=complex)
    return np.stack([x.real, x.imag], axis=-1).reshape(*x.shape[:-1], -1)


def _to_complex(y):
    y = np.asarray(y, dtype=float)
    y = y.reshape(*y.shape[:-1], -1, 2)
    return y[..., 0] + 1j * y[..., 1]


def _coords(x, spec):
    """Real coordinates from either ``n`` complex or ``2n`` real entries."""
    arr = np.asarray(x)
    if arr.size == spec.n:
        return _to_real(arr.astype(complex))
    if arr.size == 2 * spec.n and not np.iscomplexobj(arr):
        return arr.astype(float)
    raise ValueError(f"expected {spec.n} complex or {2 * spec.n} real coordinates")


def fd_potential(y, spec) -> float:
    """``F = 1/2 |mu|^2`` in real coordinates."""
    mu = fd_moment(_to_complex(y), spec)
    return 0.5 * float(mu @ mu)


def fd_gradient(y, spec) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    mu = fd_moment(_to_complex(y), spec)
    c = np.repeat(spec.weights.T @ mu, 2)
    return c * y


def fd_hessian(y, spec) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    mu = fd_moment(_to_complex(y), spec)
    wrep = np.repeat(spec.weights, 2, axis=1)  # (k, 2n)
    grads = wrep * y  # rows: gradient of mu_a
    return grads.T @ grads + np.diag(wrep.T @ mu)


@dataclass
class FiniteFlowResult:
    t: np.ndarray
    x: np.ndarray
    mu_norm: np.ndarray
    limit: np.ndarray
    converged: bool


def fd_flow(x0, spec, t_max=200.0, tol=1e-10, n_out=400, rtol=1e-11, atol=1e-13, method="DOP853",
            raise_on_tmax=True):
    """Integrate ``x_j' = -<W_j, mu(x)> x_j`` (minus the gradient of ``1/2 |mu|^2``).

    Raises
    ------
    MaxTimeReached
        If ``|grad F| > tol`` at ``t_max``; the partial result is attached.
    """
    x0 = np.asarray(x0, dtype=complex)

    def rhs(t, x):
        return -(spec.weights.T @ fd_moment(x, spec)) * x

    def small(t, x):
        return np.linalg.norm(rhs(t, x)) - tol

    small.terminal = True
    small.direction = -1
    t_eval = np.linspace(0.0, t_max, n_out)
    if np.linalg.norm(rhs(0.0, x0)) <= tol:
        xs = np.repeat(x0[None], 2, axis=0)
        mus = np.linalg.norm(fd_moment(x0, spec)) * np.ones(2)
        return FiniteFlowResult(np.array([0.0, 0.0]), xs, mus, x0.copy(), True)
    sol = solve_ivp(rhs, (0.0, t_max), x0, method=method, t_eval=t_eval, rtol=rtol, atol=atol,
                    events=small)
    ts = sol.t
    xs = sol.y.T
    if sol.t_events[0].size:
        ts = np.append(ts, sol.t_events[0][0])
        xs = np.vstack([xs, sol.y_events[0][0]])
    mus = np.array([np.linalg.norm(fd_moment(x, spec)) for x in xs])
    converged = np.linalg.norm(rhs(0.0, xs[-1])) <= tol * (1 + 1e-6)
    res = FiniteFlowResult(ts, xs, mus, xs[-1].copy(), bool(converged))
    if not converged and raise_on_tmax:
        raise MaxTimeReached(f"|grad F| above {tol:g} at t={t_max}", res)
    return res


def _support(x, tol=0.0):
    return np.abs(np.asarray(x, dtype=complex)) > tol


def fd_weight(x, xi, spec, tol=1e-12) -> float:
    """Closed-form weight: ``+inf`` if ``exp(i t xi)`` expands a supported coordinate,
    otherwise ``<mu(x_plus), xi>`` where ``x_plus`` keeps the coordinates fixed by ``xi``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if np.linalg.norm(xi) == 0:
        raise ValueError("xi must be nonzero")
    x = np.asarray(x, dtype=complex)
    rates = spec.weights.T @ xi
    scale = tol * max(1.0, np.abs(spec.weights).max() * np.linalg.norm(xi))
    supp = _support(x)
    if np.any(supp & (rates > scale)):
        return float("inf")
    xplus = np.where(supp & (np.abs(rates) <= scale), x, 0.0)
    return float(fd_moment(xplus, spec) @ xi)


def fd_weight_numeric(x, xi, spec, t_max=None, tol=1e-14, diverge=1e12):
    """Limit of ``<mu(exp(i t xi) x), xi>`` by doubling ``t`` until it settles.

    ``t_max`` defaults to a horizon long enough for the slowest supported rate
    to decay by ``exp(-60)``. Since the ray is nondecreasing, growth beyond
    ``diverge`` times its starting size counts as ``+inf``.

    Raises
    ------
    Inconclusive
        If the ray has neither settled nor overflowed by ``t_max``.
    """
    xi = np.asarray(xi, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=complex)
    rates = spec.weights.T @ xi
    supp = x != 0
    if t_max is None:
        active = np.abs(rates[supp & (rates != 0)])
        t_max = max(1e3, 60.0 / active.min()) if active.size else 1e3

    def h(t):
        with np.errstate(over="ignore", invalid="ignore"):
            # unsupported coordinates stay zero; avoid 0 * inf
            xt = np.where(supp, np.exp(t * rates) * np.where(supp, x, 1.0), 0.0)
            return float(fd_moment(xt, spec) @ xi)

    t, prev = 1.0, h(1.0)
    start = prev
    while t < t_max:
        t *= 2
        cur = h(t)
        if not np.isfinite(cur) or cur > diverge * (1 + abs(start)):
            return float("inf")
        if abs(cur - prev) <= tol * (1 + abs(cur)):
            return cur
        prev = cur
    raise Inconclusive(f"ray did not settle by t={t:g}")


def _sphere_points(k, n, rng):
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    pts = rng.normal(size=(n, k))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def fd_dominant_weight_bruteforce(x, spec, n_grid=3600, seed=0, tol=1e-9):
    """Maximise ``-w(x, xi)/|xi|`` over the unit sphere (grid search plus local refinement).

    Returns ``(xi_star, value)`` with ``|xi_star| = 1``.

    Raises
    ------
    NotUnstable
        If every finite weight is ``>= -tol``.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=complex)

    def score(v):
        nv = np.linalg.norm(v)
        if nv == 0:
            return -np.inf
        w = fd_weight(x, v / nv, spec)
        return -np.inf if not np.isfinite(w) else -w

    pts = _sphere_points(spec.k, n_grid, rng)
    vals = np.array([score(p) for p in pts])
    best = int(np.argmax(vals))
    xi, val = pts[best], vals[best]
    if spec.k > 1 and np.isfinite(val):
        res = minimize(lambda v: -score(v), xi, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        cand = res.x / np.linalg.norm(res.x)
        if score(cand) >= val:
            xi, val = cand, score(cand)
    if not np.isfinite(val) or val <= tol:
        raise NotUnstable("no destabilising direction: all finite weights are nonnegative")
    return xi, float(val)


@dataclass
class ReducedPotential:
    """Finite-dimensional reduction of ``F`` near a critical point.

    ``kernel`` and ``complement`` are orthonormal bases (columns) of ``K``
    and of its orthogonal complement ``W'``.
    """

    spec: ActionSpec
    center: np.ndarray
    kernel: np.ndarray
    complement: np.ndarray
    eigenvalues: np.ndarray
    newton_tol: float = 1e-12
    info: dict = field(default_factory=dict)

    @property
    def f_center(self) -> float:
        return fd_potential(self.center, self.spec)

    def phi(self, kappa, max_iter=50):
        """Solve ``P_W' grad F(x_c + K kappa + W' c) = 0`` for ``c`` by Newton iteration."""
        base = self.center + self.kernel @ np.asarray(kappa, dtype=float)
        wp = self.complement
        c = np.zeros(wp.shape[1])
        if wp.shape[1] == 0:
            return wp @ c
        res_prev = np.inf
        for _ in range(max_iter):
            y = base + wp @ c
            r = wp.T @ fd_gradient(y, self.spec)
            nr = np.linalg.norm(r)
            if nr <= self.newton_tol:
                return wp @ c
            if nr > 1e3 * res_prev:
                break
            res_prev = nr
            jac = wp.T @ fd_hessian(y, self.spec) @ wp
            c = c - np.linalg.solve(jac, r)
        raise NewtonDiverged(f"Newton residual {res_prev:.3e} after {max_iter} iterations")

    def value(self, kappa) -> float:
        y = self.center + self.kernel @ np.asarray(kappa, dtype=float) + self.phi(kappa)
        return fd_potential(y, self.spec)

    def gradient(self, kappa) -> np.ndarray:
        """``df(kappa) = P_K grad F(x + phi(x))``."""
        y = self.center + self.kernel @ np.asarray(kappa, dtype=float) + self.phi(kappa)
        return self.kernel.T @ fd_gradient(y, self.spec)

    def identity_defect(self, kappa, eps=1e-5) -> float:
        """Max deviation between a central difference of ``f`` and :meth:`gradient`."""
        kappa = np.asarray(kappa, dtype=float)
        g = self.gradient(kappa)
        fd = np.array([
            (self.value(kappa + eps * e) - self.value(kappa - eps * e)) / (2 * eps)
            for e in np.eye(kappa.size)
        ])
        return float(np.max(np.abs(fd - g))) if kappa.size else 0.0


def fd_reduced_potential(x_c, spec, rank_tol=1e-8, crit_tol=1e-10):
    """Split the tangent space at a critical point into ``K = ker Hess F`` and ``W'``.

    Raises
    ------
    ValueError
        If ``x_c`` is not critical.
    RankAmbiguous
        If a Hessian eigenvalue lies within two decades of ``rank_tol``.
    """
    y = _coords(x_c, spec)
    if np.linalg.norm(fd_gradient(y, spec)) > crit_tol:
        raise ValueError("x_c is not a critical point of 1/2 |mu|^2")
    lam, vec = np.linalg.eigh(fd_hessian(y, spec))
    scale = max(1.0, np.abs(lam).max())
    absl = np.abs(lam) / scale
    if np.any((absl > rank_tol / 100) & (absl < rank_tol * 100)):
        raise RankAmbiguous(f"Hessian eigenvalues near the rank tolerance: {lam}")
    ker = absl <= rank_tol
    return ReducedPotential(spec, y, vec[:, ker], vec[:, ~ker], lam)


def fd_lojasiewicz_probe(x_c, spec, radii=None, per_shell=200, n_check=1000, seed=0, safety=0.9):
    """Fit ``|grad F| >= C |F - F_c|^gamma`` on spherical shells around ``x_c``.

    ``gamma`` is the slope of ``log |grad F|`` against ``log |F - F_c|`` over all
    shell samples; ``C`` is ``safety`` times the smallest observed ratio. The pair
    is revalidated on ``n_check`` fresh samples from the probed annulus.

    Returns
    -------
    dict with ``gamma``, ``C``, ``quality`` (R^2 of the regression) and ``check``
    (fraction of fresh samples satisfying the inequality).
    """
    rng = np.random.default_rng(seed)
    y0 = _coords(x_c, spec)
    fc = fd_potential(y0, spec)
    if np.linalg.norm(fd_gradient(y0, spec)) > 1e-10:
        raise ValueError("x_c is not a critical point")
    radii = np.geomspace(1e-1, 1e-3, 8) if radii is None else np.asarray(radii, dtype=float)
    dim = y0.size

    def sample(r, m):
        v = rng.normal(size=(m, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return y0 + np.asarray(r).reshape(-1, 1) * v

    le, lg = [], []
    for r in radii:
        ys = sample(np.full(per_shell, r), per_shell)
        e = np.array([abs(fd_potential(y, spec) - fc) for y in ys])
        g = np.array([np.linalg.norm(fd_gradient(y, spec)) for y in ys])
        if np.all(e <= 1e-300) or np.ptp(e) == 0 and e[0] == 0:
            raise DegenerateSamples(f"F is constant on the shell of radius {r:g}")
        ok = (e > 0) & (g > 0)
        le.append(np.log(e[ok]))
        lg.append(np.log(g[ok]))
    le = np.concatenate(le)
    lg = np.concatenate(lg)
    slope, icpt = np.polyfit(le, lg, 1)
    resid = lg - (slope * le + icpt)
    quality = 1.0 - resid @ resid / np.sum((lg - lg.mean()) ** 2)
    gamma = float(slope)
    c_val = safety * float(np.exp(np.min(lg - gamma * le)))
    if not gamma < 1:
        raise ViolationDetected(f"fitted exponent {gamma:.4f} is not below 1")
    rr = np.exp(rng.uniform(np.log(radii.min()), np.log(radii.max()), n_check))
    ys = sample(rr, n_check)
    e = np.array([abs(fd_potential(y, spec) - fc) for y in ys])
    g = np.array([np.linalg.norm(fd_gradient(y, spec)) for y in ys])
    holds = g >= c_val * e**gamma
    return {"gamma": gamma, "C": c_val, "quality": float(quality), "check": float(holds.mean()),
            "radii": radii.tolist()}
