"""Weights along geodesic rays, the Kempf-Ness functional and limit classification."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import fields as fl
from . import functionals as fn
from . import lattice as lat
from .exceptions import Inconclusive, NotCritical, ViolationDetected
from .flow import FlowConfig, run_flow

__all__ = [
    "WeightResult",
    "StabilityVerdict",
    "ray",
    "weight",
    "kempf_ness",
    "moment_weight_check",
    "smallest_singular_value",
    "classify_limit",
    "ness_uniqueness_test",
    "hypothesis_H_probe",
    "thread_count",
]

INF = float("inf")


def thread_count() -> int:
    env = os.environ.get("VORTEXFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class WeightResult:
    value: float
    times: np.ndarray
    samples: np.ndarray
    error: float
    bounded: bool
    connection_part: float = None
    section_part: float = None
    monotone: bool = True

    @property
    def is_infinite(self) -> bool:
        return self.value == INF

    def as_dict(self):
        return {
            "value": "inf" if self.is_infinite else self.value,
            "error": self.error,
            "bounded": self.bounded,
            "connection_part": self.connection_part,
            "section_part": self.section_part,
            "monotone": self.monotone,
            "times": self.times.tolist(),
            "samples": [("inf" if not np.isfinite(v) else float(v)) for v in self.samples],
        }


@dataclass
class StabilityVerdict:
    label: str
    phi_norm: float
    sigma_min: float
    critical_residual: float
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"label": self.label, "phi_norm": self.phi_norm, "sigma_min": self.sigma_min,
                "critical_residual": self.critical_residual, **self.details}


def ray(A, u, xi, t):
    """The point ``exp(i t xi)(A, u)``."""
    return fl.apply_complex_gauge(fl.ComplexGauge(t * np.asarray(xi, dtype=float)), A, u)


def _ray_terms(A, u, xi, t):
    with np.errstate(over="ignore", invalid="ignore"):
        At, ut = ray(A, u, xi, t)
        g = A.grid
        fa = lat.inner(fl.star_curvature(At), xi, g)
        mu = fl.moment(ut)
        fu = lat.inner(mu, xi, g)
        mu_norm = lat.norm(mu, g)
    return fa, fu, mu_norm


def weight(A, u, xi, t_max=64.0, tol=1e-10, n_samples=40, t_min=1e-2, diverge=1e8):
    """Limit of ``t -> <Phi(exp(i t xi)(A, u)), xi>`` as ``t -> inf``.

    The ray is sampled at ``0`` and geometrically spaced times up to ``t_max``.
    The limit is ``+inf`` when the samples overflow, exceed ``diverge`` or keep a
    non-decaying positive slope; it is finite when the last increment is below
    ``tol``.

    Raises
    ------
    Inconclusive
        If neither criterion is met by ``t_max``.
    """
    xi = np.asarray(xi, dtype=float)
    if lat.norm(xi, A.grid) == 0:
        raise ValueError("xi must be nonzero")
    times = np.concatenate([[0.0], np.geomspace(t_min, t_max, n_samples)])
    parts = np.array([_ray_terms(A, u, xi, t) for t in times])
    fa, fu, mu_norm = parts.T
    samples = fa + fu
    finite = np.isfinite(samples)
    mono = bool(np.all(np.diff(samples[finite]) >= -1e-9 * (1 + np.abs(samples[finite][1:]))))
    if not finite.all() or samples[-1] > diverge:
        return WeightResult(INF, times, samples, 0.0, False, monotone=mono)
    inc = np.diff(samples)
    dts = np.diff(times)
    slope = inc / dts
    last = abs(inc[-1])
    if last <= tol * (1 + abs(samples[-1])):
        bounded = bool(abs(mu_norm[-1] - mu_norm[-2]) <= 1e-6 * (1 + mu_norm[-1]))
        return WeightResult(float(samples[-1]), times, samples, float(last), bounded,
                            float(fa[-1]), float(fu[-1]), mono)
    if slope[-1] > 0 and slope[-1] >= 0.5 * slope[-2]:
        return WeightResult(INF, times, samples, float(last), False, monotone=mono)
    raise Inconclusive(f"ray increment {last:.3e} above tolerance at t_max={t_max}")


def kempf_ness(path, A, u):
    """Trapezoidal integral of ``-<Phi(g^-1 (A, u)), ds>`` along a path of gauges.

    ``path`` is a sequence of :class:`ComplexGauge` starting at the identity;
    only the non-compact parts enter since the one-form is unitary-invariant.
    """
    g = A.grid
    if len(path) and np.any(path[0].s != 0):
        raise ValueError("path must start at the identity")
    vals = [0.0]
    prev_s = None
    prev_phi = None
    for gk in path:
        s = gk.s
        phi = fl.moment_residual(*fl.apply_complex_gauge(gk.inverse(), A, u))
        if prev_s is not None:
            vals.append(vals[-1] - 0.5 * lat.inner(prev_phi + phi, s - prev_s, g))
        prev_s, prev_phi = s, phi
    return np.asarray(vals)


def moment_weight_check(A, u, xi, phi_inf, weight_result=None, tol=2e-3, equality=False,
                        tol_eq=1e-2):
    """Check ``-w/|xi| <= inf |Phi|`` using the terminal ``|Phi|`` of a flow.

    Raises
    ------
    ViolationDetected
        When the inequality fails by more than ``tol``, or equality was
        requested and the two sides differ by more than ``tol_eq``.
    """
    wr = weight(A, u, xi) if weight_result is None else weight_result
    xnorm = lat.norm(xi, A.grid)
    lhs = -INF if wr.is_infinite else -wr.value / xnorm
    out = {"lhs": lhs, "rhs": float(phi_inf), "weight": wr.value, "xi_norm": xnorm,
           "slack": float(phi_inf) - lhs}
    if lhs > phi_inf + tol:
        raise ViolationDetected(f"-w/|xi| = {lhs:.6g} exceeds |Phi_inf| = {phi_inf:.6g}")
    if equality:
        gap = abs(lhs - phi_inf)
        out["gap"] = gap
        if gap > tol_eq:
            raise ViolationDetected(f"equality fails: |{lhs:.6g} - {phi_inf:.6g}| = {gap:.3e}")
    return out


def _operator_normal(A, u):
    """Sparse matrix of ``L^* L = Laplacian (x) I_k + sum_j W_j W_j^T |u_j|^2``."""
    g = A.grid
    k = A.spec.k

    def ring(m, h):
        main = np.full(m, 2.0 / h**2)
        off = np.full(m - 1, -1.0 / h**2)
        mat = sp.diags([main, off, off], [0, 1, -1], format="lil")
        mat[0, m - 1] = mat[m - 1, 0] = -1.0 / h**2
        return mat.tocsr()

    lap = sp.kron(ring(g.nx, g.hx), sp.identity(g.ny)) + sp.kron(sp.identity(g.nx), ring(g.ny, g.hy))
    w = A.spec.weights
    amp = np.abs(u.u) ** 2  # (n, nx, ny)
    blocks = [[None] * k for _ in range(k)]
    for a in range(k):
        for b in range(k):
            diag = np.einsum("j,jxy->xy", w[a] * w[b], amp).ravel()
            blk = sp.diags(diag)
            if a == b:
                blk = blk + lap
            blocks[a][b] = blk
    return sp.bmat(blocks, format="csc")


def smallest_singular_value(A, u) -> float:
    """Smallest singular value of the infinitesimal action at ``(A, u)``."""
    mat = _operator_normal(A, u)
    if mat.shape[0] <= 64:
        lam = np.linalg.eigvalsh(mat.toarray())[0]
    else:
        lam = eigsh(mat, k=1, sigma=-1.0, which="LM", return_eigenvectors=False)[0]
    return float(np.sqrt(max(lam, 0.0)))


def classify_limit(A, u, tol=1e-8, phi_tol=1e-4, sigma_tol=1e-6, orbit_escapes=False):
    """Stability class of a flow limit.

    ``orbit_escapes`` signals that the gauge path diverged while ``Phi -> 0``,
    which separates semistable-only orbits from polystable ones.

    Raises
    ------
    NotCritical
        If the critical-point residual ``|grad f|`` exceeds ``10 tol``.
    """
    g = A.grid
    resid = fn.tangent_norm(fn.grad_f(A, u), g)
    if resid > 10 * tol:
        raise NotCritical(f"critical-point residual {resid:.3e} exceeds {10 * tol:.1e}")
    phi = lat.norm(fl.moment_residual(A, u), g)
    sigma = smallest_singular_value(A, u)
    if phi > phi_tol:
        label = "unstable"
    elif orbit_escapes:
        label = "semistable-only"
    elif sigma > sigma_tol:
        label = "stable"
    else:
        label = "polystable"
    return StabilityVerdict(label, phi, sigma, resid)


def _observables(A, u):
    g = A.grid
    du = fl.covariant_d(A, u)
    dens = 0.5 * (lat.plaquette_to_site(fl.curvature(A) ** 2).sum(axis=0)
                  + (np.abs(du) ** 2).sum(axis=(0, 1)) + (fl.moment(u) ** 2).sum(axis=0))
    return {
        "abs_u2": np.abs(u.u) ** 2,
        "curvature": fl.star_curvature(A),
        "phi": fl.moment_residual(A, u),
        "energy_density": dens,
    }


def _best_shift(ref, other):
    # integer torus translation maximising the correlation of the summed fields
    fa = np.fft.fft2(ref.reshape(-1, *ref.shape[-2:]).sum(axis=0))
    fb = np.fft.fft2(other.reshape(-1, *other.shape[-2:]).sum(axis=0))
    corr = np.fft.ifft2(fa * np.conj(fb)).real
    idx = np.unravel_index(np.argmax(corr), corr.shape)
    return tuple(int(i) for i in idx)


def ness_uniqueness_test(A0, u0, g: fl.ComplexGauge, cfg: FlowConfig = FlowConfig(), align=True):
    """Flow ``(A0, u0)`` and ``g (A0, u0)`` and compare their limits modulo gauge."""
    A1, u1 = fl.apply_complex_gauge(g, A0, u0)
    run_cfg = FlowConfig(**{**cfg.__dict__, "raise_on_tmax": False})
    with ThreadPoolExecutor(max_workers=min(2, thread_count())) as pool:
        futs = [pool.submit(run_flow, A0, u0, run_cfg), pool.submit(run_flow, A1, u1, run_cfg)]
        ra, rb = [f.result() for f in futs]
    oa = _observables(ra.final.A, ra.final.u)
    ob = _observables(rb.final.A, rb.final.u)
    shift = _best_shift(oa["energy_density"], ob["energy_density"]) if align else (0, 0)
    disc = {}
    for key in oa:
        moved = np.roll(ob[key], shift, axis=(-2, -1))
        disc[key] = float(np.max(np.abs(oa[key] - moved)))
    phi_a = float(ra.series["phi_l2"][-1])
    phi_b = float(rb.series["phi_l2"][-1])
    return {
        "discrepancy": max(disc.values()),
        "observables": disc,
        "shift": list(shift),
        "phi_norms": [phi_a, phi_b],
        "phi_gap": abs(phi_a - phi_b),
        "status": [ra.status, rb.status],
        "reports": (ra, rb),
    }


def hypothesis_H_probe(A, u, xi, t_max=64.0, n_samples=40, rtol=1e-6, check_weight=True):
    """Track ``|mu(exp(i t xi) u)|`` along a ray; returns ``bounded``, ``unbounded`` or ``inconclusive``."""
    if check_weight:
        wr = weight(A, u, xi, t_max=t_max)
        if wr.is_infinite:
            raise ValueError("expanding direction: the weight is +inf")
    times = np.concatenate([[0.0], np.geomspace(1e-2, t_max, n_samples)])
    norms = np.array([_ray_terms(A, u, xi, t)[2] for t in times])
    if not np.all(np.isfinite(norms)):
        return {"flag": "unbounded", "times": times, "norms": norms}
    tail = norms[-4:]
    if np.max(np.abs(np.diff(tail))) <= rtol * (1 + tail[-1]):
        flag = "bounded"
    elif tail[-1] > 1e3 * (1 + norms[0]) and np.all(np.diff(tail) > 0):
        flag = "unbounded"
    else:
        flag = "inconclusive"
    return {"flag": flag, "times": times, "norms": norms, "sup": float(norms.max())}
