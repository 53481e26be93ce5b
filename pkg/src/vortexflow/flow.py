"""Negative gradient flow of ``1/2 |Phi|^2`` on the lattice and its diagnostics.

The flow is ``da/dt = -codiff2(S* Phi)``, ``du_j/dt = -<W_j, Phi> u_j``, i.e.
minus the exact gradient of :func:`~vortexflow.functionals.f_moment`. Because
that gradient is the complex infinitesimal action of ``i Phi``, the solution
stays on the complex gauge orbit of the start: ``x(t) = exp(-i s(t)) x0``
with ``ds/dt = Phi``. The tracker integrates ``s`` alongside every scheme.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import fields as fl
from . import functionals as fn
from . import lattice as lat
from .exceptions import BlowUp, InsufficientDecay, MaxTimeReached, NotConverged

__all__ = [
    "FlowConfig",
    "FlowState",
    "ConvergenceReport",
    "initial_state",
    "step",
    "run_flow",
    "track_complex_gauge",
    "cartan_decompose",
    "dominant_weight_estimate",
    "lojasiewicz_fit",
    "sup_u2_bound",
]

SCHEMES = ("explicit-euler", "rk4", "semi-implicit")
SERIES_COLUMNS = ("t", "ymh", "f_moment", "dbar_resid", "phi_l2", "sup_u2", "kn_value")


@dataclass(frozen=True)
class FlowConfig:
    """Integrator settings.

    ``dt0`` is the initial and maximal step, ``dt_min`` the backtracking floor.
    The run stops once ``|grad f| <= tol`` or ``t >= t_max``.
    """

    scheme: str = "semi-implicit"
    dt0: float = 1e-2
    dt_min: float = 1e-9
    t_max: float = 50.0
    tol: float = 1e-8
    snapshot_every: float = 0.0
    record_every: int = 1
    growth: float = 2.0
    blowup_factor: float = 10.0
    keep_gauge: bool = False
    raise_on_tmax: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not (self.dt0 > 0 and self.dt_min > 0 and self.t_max >= 0 and self.tol > 0):
            raise ValueError("dt0, dt_min, tol must be positive and t_max nonnegative")
        if self.growth < 1.0:
            raise ValueError("growth factor must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    A: fl.Connection
    u: fl.Section
    s: np.ndarray
    dt: float
    A0: fl.Connection
    u0: fl.Section
    last_dt: float = 0.0
    f_value: float = None

    @property
    def phi(self):
        return fl.moment_residual(self.A, self.u)

    @property
    def gauge(self) -> fl.ComplexGauge:
        return fl.ComplexGauge(self.s.copy())


@dataclass
class ConvergenceReport:
    series: dict
    status: str
    steps: int
    rejected: int
    final: FlowState
    grad_norm: float
    max_ymh_increase: float
    sup_u2_bound: float
    gauge_times: np.ndarray = None
    gauge_history: np.ndarray = None
    gamma: float = None
    gamma_quality: float = None
    xi_inf: np.ndarray = None

    def column(self, name):
        return np.asarray(self.series[name])

    def summary(self) -> dict:
        last = {k: float(v[-1]) for k, v in self.series.items() if len(v)}
        out = {
            "status": self.status,
            "steps": self.steps,
            "rejected": self.rejected,
            "grad_norm": self.grad_norm,
            "max_ymh_increase": self.max_ymh_increase,
            "sup_u2_bound": self.sup_u2_bound,
            "final": last,
        }
        if self.gamma is not None:
            out["gamma"] = self.gamma
            out["gamma_quality"] = self.gamma_quality
        return out


def sup_u2_bound(spec, u0) -> float:
    """``max(sup |u0|^2, 2 max tau / min positive weight)``."""
    sup0 = float(np.max(np.abs(u0.u) ** 2)) if u0.u.size else 0.0
    wmin = spec.min_positive_weight()
    tau_part = 2 * max(float(np.max(spec.tau)), 0.0) / wmin if np.isfinite(wmin) else 0.0
    return max(sup0, tau_part)


def initial_state(A0, u0, dt=1e-2) -> FlowState:
    s = np.zeros((A0.spec.k,) + A0.grid.shape)
    return FlowState(0.0, A0, u0, s, dt, A0, u0)


def _rhs(A, u):
    phi = fl.moment_residual(A, u)
    ga, gu = fl.complex_infinitesimal_action(A, u, phi)
    return -ga, -gu, phi


def _semi_implicit(state, dt):
    A, u = state.A, state.u
    g = A.grid
    phi = fl.moment_residual(A, u)
    symbol = 1.0 / (1.0 + dt * g.laplacian_symbol * g.average_symbol)
    phit = lat.spectral_apply(phi, symbol)
    # the update is exactly the complex gauge exp(-i dt phit)
    A1, u1 = fl.apply_complex_gauge(fl.ComplexGauge(-dt * phit), A, u)
    return A1, u1, state.s + dt * phit


def _explicit(state, dt):
    ga, gu, phi = _rhs(state.A, state.u)
    A1 = state.A.with_links(state.A.a + dt * ga)
    u1 = state.u.with_values(state.u.u + dt * gu)
    return A1, u1, state.s + dt * phi


def _rk4(state, dt):
    A, u = state.A, state.u
    k1 = _rhs(A, u)
    k2 = _rhs(*fn.displace(A, u, k1[:2], 0.5 * dt))
    k3 = _rhs(*fn.displace(A, u, k2[:2], 0.5 * dt))
    k4 = _rhs(*fn.displace(A, u, k3[:2], dt))
    comb = [(k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) / 6.0 for i in range(3)]
    A1, u1 = fn.displace(A, u, comb[:2], dt)
    return A1, u1, state.s + dt * comb[2]


_STEPPERS = {"semi-implicit": _semi_implicit, "explicit-euler": _explicit, "rk4": _rk4}


def step(state: FlowState, cfg: FlowConfig) -> FlowState:
    """Advance by one accepted step, halving ``dt`` while ``1/2 |Phi|^2`` would increase.

    Raises
    ------
    BlowUp
        If ``sup |u|^2`` leaves ten times the a-priori bound or becomes non-finite.
    """
    stepper = _STEPPERS[cfg.scheme]
    f_old = fn.f_moment(state.A, state.u) if state.f_value is None else state.f_value
    dt = min(state.dt, cfg.dt0)
    bound = sup_u2_bound(state.A.spec, state.u0)
    while True:
        A1, u1, s1 = stepper(state, dt)
        sup = float(np.max(np.abs(u1.u) ** 2)) if u1.u.size else 0.0
        if not np.isfinite(sup) or not np.all(np.isfinite(A1.a)):
            raise BlowUp(f"non-finite fields at t={state.t + dt:.6g}")
        if sup > cfg.blowup_factor * max(bound, 1e-300) and sup > 1e-300:
            raise BlowUp(f"sup|u|^2 = {sup:.4g} exceeds {cfg.blowup_factor} x bound {bound:.4g}")
        f_new = fn.f_moment(A1, u1)
        # summation noise of f dominates the true decrease on a plateau
        if f_new <= f_old + 1e-13 * (1.0 + abs(f_old)) or dt <= cfg.dt_min:
            break
        dt *= 0.5
    next_dt = min(dt * cfg.growth, cfg.dt0)
    return FlowState(state.t + dt, A1, u1, s1, next_dt, state.A0, state.u0, dt, f_new)


def _observe(state):
    A, u = state.A, state.u
    g = A.grid
    phi = fl.moment_residual(A, u)
    return {
        "t": state.t,
        "ymh": fn.ymh(A, u),
        "f_moment": 0.5 * lat.inner(phi, phi, g),
        "dbar_resid": lat.norm(fl.dbar_residual(A, u), g),
        "phi_l2": lat.norm(phi, g),
        "sup_u2": float(np.max(np.abs(u.u) ** 2)) if u.u.size else 0.0,
        "kn_value": fn.kempf_ness_potential(state.A0, state.u0, state.s),
    }


def _checked_grad_norm(state):
    gnorm = _grad_norm(state)
    if not np.isfinite(gnorm):
        raise BlowUp(f"non-finite gradient at t={state.t:.6g}")
    return gnorm


def _grad_norm(state):
    return fn.tangent_norm(fn.grad_f(state.A, state.u), state.A.grid)


def run_flow(A0, u0, cfg: FlowConfig = FlowConfig(), state: FlowState = None, on_record=None,
             on_snapshot=None) -> ConvergenceReport:
    """Integrate from ``(A0, u0)`` (or resume ``state``) until convergence or ``t_max``.

    ``on_record(row)`` receives every recorded row, ``on_snapshot(state)`` fires
    every ``cfg.snapshot_every`` time units when that is positive.

    Raises
    ------
    MaxTimeReached
        With the partial report attached, when ``cfg.raise_on_tmax`` is set.
    BlowUp
        See :func:`step`.
    """
    if state is None:
        state = initial_state(A0, u0, cfg.dt0)
    series = {c: [] for c in SERIES_COLUMNS}
    series["grad_norm"] = []
    series["dt"] = []
    gauge_t, gauge_s = [], []
    bound = sup_u2_bound(state.A.spec, state.u0)

    def record(st, gnorm, dt):
        row = _observe(st)
        row["grad_norm"] = gnorm
        row["dt"] = dt
        for key, val in row.items():
            series[key].append(val)
        if cfg.keep_gauge:
            gauge_t.append(st.t)
            gauge_s.append(st.s.copy())
        if on_record is not None:
            on_record(row)
        return row

    steps = rejected = 0
    gnorm = _checked_grad_norm(state)
    row = record(state, gnorm, 0.0)
    ymh_prev = row["ymh"]
    max_inc = 0.0
    next_snap = state.t + cfg.snapshot_every if cfg.snapshot_every > 0 else np.inf
    status = "converged"
    while gnorm > cfg.tol:
        if state.t >= cfg.t_max - 1e-12:
            status = "max-time"
            break
        trial = replace(state, dt=min(state.dt, cfg.dt0, cfg.t_max - state.t))
        new = step(trial, cfg)
        dt = new.last_dt
        rejected += int(round(np.log2(max(trial.dt / dt, 1.0))))
        steps += 1
        state = new
        gnorm = _checked_grad_norm(state)
        done = gnorm <= cfg.tol or state.t >= cfg.t_max - 1e-12
        if steps % cfg.record_every == 0 or done:
            row = record(state, gnorm, dt)
            max_inc = max(max_inc, row["ymh"] - ymh_prev)
            ymh_prev = row["ymh"]
        if state.t >= next_snap - 1e-12:
            if on_snapshot is not None:
                on_snapshot(state)
            next_snap += cfg.snapshot_every
    report = ConvergenceReport(
        series={k: np.asarray(v) for k, v in series.items()},
        status=status,
        steps=steps,
        rejected=rejected,
        final=state,
        grad_norm=gnorm,
        max_ymh_increase=max_inc,
        sup_u2_bound=bound,
        gauge_times=np.asarray(gauge_t) if cfg.keep_gauge else None,
        gauge_history=np.asarray(gauge_s) if cfg.keep_gauge else None,
    )
    if status == "max-time" and cfg.raise_on_tmax:
        raise MaxTimeReached(f"t_max={cfg.t_max} reached with |grad|={gnorm:.3e}", report)
    return report


def track_complex_gauge(report: ConvergenceReport):
    """Recorded gauge path ``g(t) = exp(i s(t))`` with ``x(t) = g(t)^-1 x0``.

    Returns the recorded times and a list of :class:`ComplexGauge` elements.
    Requires a run with ``keep_gauge=True``.
    """
    if report.gauge_history is None:
        raise ValueError("run the flow with keep_gauge=True to record the gauge path")
    return report.gauge_times, [fl.ComplexGauge(s) for s in report.gauge_history]


def cartan_decompose(g: fl.ComplexGauge):
    """Split ``g = exp(-i xi) k``; returns ``(xi, theta)`` with ``k = exp(theta)``."""
    return -g.s, g.theta


def dominant_weight_estimate(times, xis, rtol=1e-2, atol=1e-6):
    """Estimate ``lim xi(t) / t`` from a path sampled at increasing times.

    The slope is a least-squares fit of ``xi(t) = xi_inf t + c`` over the last
    decade of times, which removes the constant offset that biases ``xi(t)/t``.
    The two halves of the window must agree within ``rtol`` relative (plus
    ``atol``) or :class:`NotConverged` is raised.
    """
    times = np.asarray(times, dtype=float)
    xis = np.asarray(xis, dtype=float)
    t_end = times[-1]
    if t_end <= 0:
        raise NotConverged("path has no positive times")
    mask = times >= 0.1 * t_end
    if mask.sum() < 4:
        raise NotConverged("too few samples in the last decade of times")
    tt = times[mask]
    xx = xis[mask].reshape(mask.sum(), -1)

    def slope(t, x):
        tc = t - t.mean()
        return (tc @ (x - x.mean(axis=0))) / (tc @ tc)

    full = slope(tt, xx)
    half = len(tt) // 2
    a, b = slope(tt[: half + 1], xx[: half + 1]), slope(tt[half:], xx[half:])
    scale = np.sqrt(np.mean(full**2))
    spread = np.sqrt(np.mean((a - b) ** 2))
    if spread > rtol * scale + atol:
        raise NotConverged(f"xi(t)/t not settled: half-window slopes differ by {spread:.3e}")
    return full.reshape(xis.shape[1:])


def _r2(x, y):
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    tot = np.sum((y - y.mean()) ** 2)
    return coef, (1.0 - np.sum(resid**2) / tot) if tot > 0 else 0.0


def lojasiewicz_fit(t, f, f_inf=0.0, grad=None, floor=None):
    """Classify the decay of ``f(t) - f_inf`` and return ``(gamma, quality, info)``.

    Exponential decay gives ``gamma = 1/2``; a power law ``t^p`` gives
    ``gamma = (1 - 1/p) / 2``. The model with the larger R^2 on the tail wins and
    its R^2 is the reported quality. When a gradient-norm series is given,
    ``info["gamma_grad"]`` holds the slope of ``log|grad|`` against ``log(f - f_inf)``.

    Raises
    ------
    InsufficientDecay
        If ``f - f_inf`` does not drop by a factor of at least ``1e3``.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(f, dtype=float) - f_inf
    if floor is None:
        floor = 1e-13 * max(float(np.max(np.abs(f))), 1e-300) + 1e-300
    ok = np.isfinite(g) & (g > floor)
    if ok.sum() < 5:
        raise InsufficientDecay("too few positive samples above the noise floor")
    t, g = t[ok], g[ok]
    if g.max() / g[-1] < 1e3:
        raise InsufficientDecay(f"f - f_inf dropped only by {g.max() / g[-1]:.3g}")
    # tail: after the series first falls below 1e-1 of its peak
    start = int(np.argmax(g <= 0.1 * g.max()))
    tail = slice(start, None)
    tt, lg = t[tail], np.log(g[tail])
    if tt.size < 5:
        tt, lg = t, np.log(g)
    coef_exp, r2_exp = _r2(tt, lg)
    info = {"rate": -coef_exp[0], "r2_exp": r2_exp}
    pos = tt > 0
    if pos.sum() >= 5:
        coef_pow, r2_pow = _r2(np.log(tt[pos]), lg[pos])
    else:
        coef_pow, r2_pow = (np.array([0.0, 0.0]), -np.inf)
    info["power"] = coef_pow[0]
    info["r2_pow"] = r2_pow
    if r2_exp >= r2_pow:
        gamma, quality, info["model"] = 0.5, r2_exp, "exponential"
    else:
        p = coef_pow[0]
        gamma = 0.5 * (1.0 - 1.0 / p) if p != 0 else np.nan
        quality, info["model"] = r2_pow, "power"
    if grad is not None:
        gr = np.asarray(grad, dtype=float)[ok][tail]
        good = gr > 0
        if good.sum() >= 3:
            info["gamma_grad"] = float(np.polyfit(lg[good], np.log(gr[good]), 1)[0])
    return gamma, quality, info
