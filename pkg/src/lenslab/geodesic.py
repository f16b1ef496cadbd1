"""Geodesic integration with boundary events, plus two-point shooting.

The geodesic equation is integrated as the first-order system
(x, v) with dx/dtau = v, dv^k/dtau = -Gamma^k_ij v^i v^j using an embedded
Dormand-Prince 5(4) pair with adaptive steps and the classic quartic dense
output.  Boundary exits are detected by a sign change of the boundary
defining function between accepted nodes (a midpoint probe guards against
shallow dips) and located by bisection on the dense interpolant down to
``event_tol`` in time.  The velocity is renormalized to unit metric norm
whenever the quadratic drift exceeds ``renorm_tol``; the largest drift seen
before renormalization is reported on the trajectory, and exceeding
``energy_tol`` is an integration failure, never silently absorbed.

Trapped verdicts are censored data: a geodesic that has not exited by the
budget is reported as trapped *at that budget*, nothing stronger.

The module also provides the universal-cover model (angle unwrapped to the
real line, metric extended flat outside the chart domain) used by distance
and Busemann computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, IntegrationError, NoConnectionError
from .manifold import (
    GRAZING_TOL,
    BoundaryVector,
    FlatProduct,
    ManifoldSpec,
    PerturbedProduct,
    SurfaceOfRevolution,
    boundary_from_chart,
    boundary_gap,
    boundary_to_chart,
    boundary_type,
    chart_contains,
    default_trapped_budget,
    metric_norm,
)

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)
# dense-output weights for the quartic interpolant
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0

_MIN_STEP = 1e-14
_DEFAULT_RTOL = 1e-10
_DEFAULT_ATOL = 1e-12
_ENERGY_TOL = 1e-9
_RENORM_TOL = 1e-12
_EVENT_TOL = 1e-12


def default_h_max(spec: ManifoldSpec) -> float:
    """Step cap per family; flat charts integrate exactly so may step long."""
    if isinstance(spec, FlatProduct):
        return 0.5
    if isinstance(spec, SurfaceOfRevolution):
        return 0.05
    return 0.025


# ---------------------------------------------------------------------------
# fast per-family right-hand sides and energy forms (cover-compatible: they
# evaluate the naturally extended metric outside the chart domain as well)
# ---------------------------------------------------------------------------

def geodesic_rhs(spec: ManifoldSpec):
    """Return f(y) -> dy/dtau for the state y = [x..., v...] as a flat list."""
    if isinstance(spec, FlatProduct):
        d = spec.dim

        def rhs_flat(y):
            return list(y[d:]) + [0.0] * d

        return rhs_flat

    if isinstance(spec, SurfaceOfRevolution):
        profile = spec.profile

        def rhs_rev(y):
            t, _, vt, va = y
            F = profile.value(t)
            dF = profile.deriv(t)
            return [vt, va, F * dF * va * va, -2.0 * dF / F * vt * va]

        return rhs_rev

    n = spec.base.n
    d = spec.dim
    amp = spec.amplitude
    center = spec.center
    rho2 = spec.radius * spec.radius

    def wgrad(x):
        # w = 1 + amp * b(x) and its gradient, b the radial core bump
        q = 0.0
        diff = [0.0] * n
        for i in range(n):
            diff[i] = x[i] - center[i]
            q += diff[i] * diff[i]
        q /= rho2
        if q >= 1.0:
            return 1.0, None
        b = math.exp(1.0 - 1.0 / (1.0 - q))
        dbdq = -b / ((1.0 - q) * (1.0 - q))
        scale = amp * dbdq * 2.0 / rho2
        return 1.0 + amp * b, [scale * di for di in diff]

    mode = spec.mode
    if mode == "disc":

        def rhs_disc(y):
            x = y[:n]
            v = y[d:]
            w, gw = wgrad(x)
            out = list(v) + [0.0] * d
            if gw is None:
                return out
            vx = v[:n]
            s = sum(gi * vi for gi, vi in zip(gw, vx))
            m2 = sum(vi * vi for vi in vx)
            c = 0.5 / w
            for k in range(n):
                out[d + k] = -c * (2.0 * vx[k] * s - gw[k] * m2)
            return out

        return rhs_disc

    if mode == "fiber":

        def rhs_fiber(y):
            x = y[:n]
            v = y[d:]
            G, gG = wgrad(x)
            out = list(v) + [0.0] * d
            if gG is None:
                return out
            vth = v[n]
            s = sum(gi * vi for gi, vi in zip(gG, v[:n]))
            for k in range(n):
                out[d + k] = 0.5 * gG[k] * vth * vth
            out[d + n] = -s * vth / G
            return out

        return rhs_fiber

    def rhs_all(y):
        x = y[:n]
        v = y[d:]
        w, gw = wgrad(x)
        out = list(v) + [0.0] * d
        if gw is None:
            return out
        s = sum(gi * vi for gi, vi in zip(gw, v[:n]))
        v2 = sum(vi * vi for vi in v)
        c = 0.5 / w
        for k in range(n):
            out[d + k] = -c * (2.0 * v[k] * s - gw[k] * v2)
        out[d + d - 1] = -(s / w) * v[d - 1]
        return out

    return rhs_all


def energy_form(spec: ManifoldSpec):
    """Return q(y) = g(v, v) evaluated fast for the state layout of geodesic_rhs."""
    if isinstance(spec, FlatProduct):
        d = spec.dim

        def q_flat(y):
            return sum(y[i] * y[i] for i in range(d, 2 * d))

        return q_flat

    if isinstance(spec, SurfaceOfRevolution):
        profile = spec.profile

        def q_rev(y):
            F = profile.value(y[0])
            return y[2] * y[2] + F * F * y[3] * y[3]

        return q_rev

    n = spec.base.n
    d = spec.dim
    amp = spec.amplitude
    center = spec.center
    rho2 = spec.radius * spec.radius
    mode = spec.mode

    def q_pert(y):
        qd = 0.0
        for i in range(n):
            di = y[i] - center[i]
            qd += di * di
        qd /= rho2
        p = 0.0 if qd >= 1.0 else amp * math.exp(1.0 - 1.0 / (1.0 - qd))
        m2 = sum(y[d + i] * y[d + i] for i in range(n))
        vth2 = y[2 * d - 1] * y[2 * d - 1]
        if mode == "disc":
            return (1.0 + p) * m2 + vth2
        if mode == "fiber":
            return m2 + (1.0 + p) * vth2
        return (1.0 + p) * (m2 + vth2)

    return q_pert


# ---------------------------------------------------------------------------
# one adaptive Dormand-Prince step
# ---------------------------------------------------------------------------

def _dp_step(f, y, k1, h):
    m = len(y)
    y2 = [y[i] + h * (_A21 * k1[i]) for i in range(m)]
    k2 = f(y2)
    y3 = [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(m)]
    k3 = f(y3)
    y4 = [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(m)]
    k4 = f(y4)
    y5s = [y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
           for i in range(m)]
    k5 = f(y5s)
    y6 = [y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                      + _A65 * k5[i]) for i in range(m)]
    k6 = f(y6)
    ynew = [y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                        + _B6 * k6[i]) for i in range(m)]
    k7 = f(ynew)
    err = [h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                + _E6 * k6[i] + _E7 * k7[i]) for i in range(m)]
    return ynew, err, (k3, k4, k5, k6, k7)


def _dense_coeffs(y, ynew, k1, ks, h):
    k3, k4, k5, k6, k7 = ks
    m = len(y)
    ydiff = [ynew[i] - y[i] for i in range(m)]
    bspl = [h * k1[i] - ydiff[i] for i in range(m)]
    r4 = [ydiff[i] - h * k7[i] - bspl[i] for i in range(m)]
    r5 = [h * (_D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i]
               + _D6 * k6[i] + _D7 * k7[i]) for i in range(m)]
    return ydiff, bspl, r4, r5


def _dense_eval(y, dense, sigma):
    ydiff, bspl, r4, r5 = dense
    om = 1.0 - sigma
    return [y[i] + sigma * (ydiff[i] + om * (bspl[i] + sigma * (r4[i] + om * r5[i])))
            for i in range(len(y))]


# ---------------------------------------------------------------------------
# verdicts and trajectories
# ---------------------------------------------------------------------------

@dataclass
class ExitVerdict:
    """Outcome of tracing a geodesic: exited | trapped | grazing.

    ``trapped`` is censored at the integration budget, it never certifies an
    infinite travel time.  ``grazing`` keeps the convention that a tangential
    start has travel time 0 and scatters to itself.
    """

    status: str
    exit: BoundaryVector | None = None
    travel_time: float = 0.0
    budget: float | None = None

    def to_json_dict(self) -> dict:
        out = {"status": self.status, "travel_time": self.travel_time}
        if self.budget is not None:
            out["budget"] = self.budget
        if self.exit is not None:
            out["exit"] = {"point": list(self.exit.point.coords),
                           "comps": list(self.exit.comps)}
        else:
            out["exit"] = None
        return out


@dataclass
class Trajectory:
    times: np.ndarray | None
    states: np.ndarray | None
    n_steps: int = 0
    n_rejected: int = 0
    max_energy_drift: float = 0.0

    def write_csv(self, path, coord_names):
        if self.times is None:
            raise ValueError("trajectory was not recorded; pass record=True")
        header = ["elapsed"] + list(coord_names) + [f"d{c}" for c in coord_names]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for t, row in zip(self.times, self.states):
                fh.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")


# ---------------------------------------------------------------------------
# main tracer
# ---------------------------------------------------------------------------

def integrate_until_exit(
    spec: ManifoldSpec,
    start,
    budget: float | None = None,
    rtol: float = _DEFAULT_RTOL,
    atol: float = _DEFAULT_ATOL,
    h_max: float | None = None,
    record: bool = False,
    event_tol: float = _EVENT_TOL,
    renorm_tol: float = _RENORM_TOL,
    energy_tol: float = _ENERGY_TOL,
):
    """Trace a unit-speed geodesic until it exits, or until the budget.

    ``start`` is either a canonical BoundaryVector or an interior state
    (position, velocity) in chart coordinates with unit metric norm.
    Returns (ExitVerdict, Trajectory).
    """
    bt = boundary_type(spec)
    if isinstance(start, BoundaryVector):
        nu = bt.nu(start)
        if nu < -GRAZING_TOL:
            raise ContractError("start vector points outward")
        if nu <= GRAZING_TOL:
            verdict = ExitVerdict("grazing", exit=start, travel_time=0.0)
            return verdict, Trajectory(None, None)
        pos, vel, _ = boundary_to_chart(spec, start)
    else:
        pos, vel = (np.asarray(a, dtype=float) for a in start)
        if not chart_contains(spec, pos):
            raise ContractError("interior start position outside chart domain")
        nrm = metric_norm(spec, pos, vel)
        if abs(nrm - 1.0) > 1e-9:
            raise ContractError(f"start velocity is not unit (|v|_g = {nrm!r})")

    if budget is None:
        budget = default_trapped_budget(spec)
    if budget <= 0.0:
        raise ContractError("budget must be positive")
    if h_max is None:
        h_max = default_h_max(spec)

    f = geodesic_rhs(spec)
    qform = energy_form(spec)
    d = spec.dim
    y = list(pos) + list(vel)
    t = 0.0
    h = min(h_max, 1e-2, budget)
    k1 = f(y)
    n_steps = 0
    n_rejected = 0
    max_drift = 0.0
    times = [0.0] if record else None
    states = [list(y)] if record else None

    def gap_of(state) -> float:
        return boundary_gap(spec, state)

    while True:
        remaining = budget - t
        if remaining <= 1e-12 * max(1.0, budget):
            break
        if h < _MIN_STEP * max(1.0, t):
            raise IntegrationError(f"step size underflow at tau = {t!r}")
        h = min(h, remaining, h_max)
        ynew, err, ks = _dp_step(f, y, k1, h)
        scale = 0.0
        for i in range(2 * d):
            s = err[i] / (atol + rtol * max(abs(y[i]), abs(ynew[i])))
            scale += s * s
        errnorm = math.sqrt(scale / (2 * d))
        if errnorm > 1.0:
            n_rejected += 1
            h *= max(0.2, 0.9 * errnorm ** -0.2)
            continue

        n_steps += 1
        dense = _dense_coeffs(y, ynew, k1, ks, h)
        gap_new = gap_of(ynew)
        crossed_at = None
        if gap_new < 0.0:
            crossed_at = 1.0
        else:
            gap_mid = gap_of(_dense_eval(y, dense, 0.5))
            if gap_mid < 0.0:
                crossed_at = 0.5
        if crossed_at is not None:
            lo, hi = 0.0, crossed_at
            while (hi - lo) * h > event_tol:
                mid = 0.5 * (lo + hi)
                if gap_of(_dense_eval(y, dense, mid)) > 0.0:
                    lo = mid
                else:
                    hi = mid
            sigma = 0.5 * (lo + hi)
            y_exit = _dense_eval(y, dense, sigma)
            t_exit = t + sigma * h
            exit_vec = boundary_from_chart(spec, y_exit[:d], y_exit[d:], tol=1e-6)
            if record:
                times.append(t_exit)
                states.append(list(y_exit))
            verdict = ExitVerdict("exited", exit=exit_vec, travel_time=t_exit)
            traj = _finish_traj(times, states, n_steps, n_rejected, max_drift)
            return verdict, traj

        q = qform(ynew)
        drift = abs(q - 1.0)
        if drift > 0.25 * energy_tol:
            # energy is a derived invariant the componentwise estimate can
            # underestimate on steep metric flanks; enforce the unit-speed
            # contract by rejecting the step rather than absorbing the drift
            n_steps -= 1
            n_rejected += 1
            h *= 0.5
            if h < _MIN_STEP * max(1.0, t):
                raise IntegrationError(
                    f"unit-speed drift {drift!r} cannot be controlled at tau = {t!r}"
                )
            continue
        t += h
        y = ynew
        k1 = ks[-1]  # FSAL
        if drift > max_drift:
            max_drift = drift
        if drift > renorm_tol:
            inv = 1.0 / math.sqrt(q)
            for i in range(d, 2 * d):
                y[i] *= inv
            k1 = f(y)
        if record:
            times.append(t)
            states.append(list(y))
        if errnorm == 0.0:
            h = h_max
        else:
            h = h * min(5.0, max(0.2, 0.9 * errnorm ** -0.2))

    verdict = ExitVerdict("trapped", travel_time=budget, budget=budget)
    return verdict, _finish_traj(times, states, n_steps, n_rejected, max_drift)


def _finish_traj(times, states, n_steps, n_rejected, max_drift) -> Trajectory:
    if times is None:
        return Trajectory(None, None, n_steps, n_rejected, max_drift)
    return Trajectory(np.asarray(times), np.asarray(states), n_steps, n_rejected, max_drift)


def flow(spec: ManifoldSpec, pos, vel, time: float, rtol: float = 1e-12,
         atol: float = 1e-13, h_max: float | None = None):
    """Integrate the geodesic flow for a fixed parameter time, no boundary events.

    Works on the naturally extended chart (the metric formulas extend smoothly
    outside the domain), which is what the shooting solver and the
    universal-cover model need.  The velocity need not be unit.
    """
    f = geodesic_rhs(spec)
    d = spec.dim
    y = list(pos) + list(vel)
    if time == 0.0:
        return y
    if h_max is None:
        h_max = default_h_max(spec)
    speed = math.sqrt(sum(c * c for c in vel)) or 1.0
    h_cap = h_max / max(speed, 1e-9)
    t = 0.0
    h = min(h_cap, 1e-2, time)
    k1 = f(y)
    while True:
        remaining = time - t
        if remaining <= 1e-15 * max(1.0, time):
            break
        if h < _MIN_STEP * max(1.0, t):
            raise IntegrationError(f"step size underflow at tau = {t!r}")
        h = min(h, remaining, h_cap)
        ynew, err, ks = _dp_step(f, y, k1, h)
        scale = 0.0
        for i in range(2 * d):
            s = err[i] / (atol + rtol * max(abs(y[i]), abs(ynew[i])))
            scale += s * s
        errnorm = math.sqrt(scale / (2 * d))
        if errnorm > 1.0:
            h *= max(0.2, 0.9 * errnorm ** -0.2)
            continue
        t += h
        y = ynew
        k1 = ks[-1]
        h = h_cap if errnorm == 0.0 else h * min(5.0, max(0.2, 0.9 * errnorm ** -0.2))
    return y


# ---------------------------------------------------------------------------
# two-point boundary problem: shooting with damped Newton + multistart
# ---------------------------------------------------------------------------

@dataclass
class Connection:
    """A geodesic from p to q: unit initial direction and its length."""

    direction: np.ndarray
    length: float
    endpoint_error: float
    n_iterations: int
    start_index: int


def _exp_map(spec, p, w, rtol):
    y = flow(spec, p, w, 1.0, rtol=rtol)
    return np.asarray(y[: spec.dim])


def connect(
    spec: ManifoldSpec,
    p,
    q,
    winding: int = 0,
    pos_tol: float = 1e-10,
    max_iter: int = 30,
    n_starts: int = 8,
    rtol: float = 1e-12,
) -> Connection:
    """Find a geodesic from p to q by shooting on the initial velocity.

    The unknown is the full initial velocity w with the geodesic run for unit
    parameter time, so the length is |w|_g and no direction-sphere chart is
    needed.  ``winding`` fixes the lift of the angle coordinate.  Multistart
    perturbs the straight-chart initial guess; non-convergence raises
    NoConnectionError rather than returning a fabricated answer.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = spec.dim
    period = angle_period(spec)
    q_lift = q.copy()
    q_lift[-1] = q[-1] + winding * period

    w0 = q_lift - p
    if float(np.linalg.norm(w0)) < 1e-13:
        raise ContractError("connect requires distinct endpoints")

    starts = _multistart_directions(w0, n_starts)
    last_err = math.inf
    for si, w in enumerate(starts):
        w = w.copy()
        ok = True
        n_it = 0
        for n_it in range(1, max_iter + 1):
            r = _exp_map(spec, p, w, rtol) - q_lift
            rn = float(np.linalg.norm(r))
            if rn < pos_tol:
                length = metric_norm(spec, p, w)
                return Connection(np.asarray(w) / length, length, rn, n_it, si)
            # finite-difference Jacobian of the endpoint map
            J = np.empty((d, d))
            delta = 1e-7 * max(1.0, float(np.linalg.norm(w)))
            for j in range(d):
                wj = w.copy()
                wj[j] += delta
                J[:, j] = (_exp_map(spec, p, wj, rtol) - q_lift - r) / delta
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                ok = False
                break
            lam = 1.0
            improved = False
            for _ in range(8):
                w_try = w + lam * step
                r_try = _exp_map(spec, p, w_try, rtol) - q_lift
                if float(np.linalg.norm(r_try)) < rn:
                    w = w_try
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                ok = False
                last_err = min(last_err, rn)
                break
        if ok:
            r = _exp_map(spec, p, w, rtol) - q_lift
            rn = float(np.linalg.norm(r))
            last_err = min(last_err, rn)
            if rn < pos_tol:
                length = metric_norm(spec, p, w)
                return Connection(np.asarray(w) / length, length, rn, n_it, si)
    raise NoConnectionError(
        f"shooting did not converge after {len(starts)} starts "
        f"(best endpoint error {last_err!r})"
    )


def angle_period(spec: ManifoldSpec) -> float:
    """Period of the chart angle coordinate."""
    if isinstance(spec, SurfaceOfRevolution):
        return 2.0 * math.pi
    flat = spec if isinstance(spec, FlatProduct) else spec.base
    return flat.circle_length


def _multistart_directions(w0: np.ndarray, n_starts: int) -> list[np.ndarray]:
    starts = [w0]
    d = len(w0)
    nrm = float(np.linalg.norm(w0))
    rng = np.random.default_rng(20339)
    for _ in range(max(0, n_starts - 1)):
        jitter = rng.normal(size=d)
        jitter *= 0.25 * nrm / float(np.linalg.norm(jitter))
        starts.append(w0 + jitter)
    return starts


def distance(spec: ManifoldSpec, p, q, windings=(-1, 0, 1), **kwargs) -> float:
    """Geodesic distance in the compact picture: min of connect over lifts."""
    best = math.inf
    for w in windings:
        conn = connect(spec, p, q, winding=w, **kwargs)
        best = min(best, conn.length)
    return best


def flat_distance(spec: ManifoldSpec, p, q, windings=(-1, 0, 1)) -> float:
    """Closed-form distance on a flat product (straight chart lifts)."""
    if not isinstance(spec, FlatProduct):
        raise ContractError("flat_distance applies to FlatProduct only")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    best = math.inf
    for w in windings:
        dth = q[-1] - p[-1] + w * spec.circle_length
        best = min(best, math.hypot(float(np.linalg.norm(q[:-1] - p[:-1])), dth))
    return best


# ---------------------------------------------------------------------------
# universal-cover model: theta unwrapped to R, flat extension outside the chart
# ---------------------------------------------------------------------------

def cover_flow(spec: ManifoldSpec, base, direction, time: float,
               rtol: float = 1e-12) -> np.ndarray:
    """Point reached after the given parameter time along a cover geodesic.

    Rays are integrated only while they can still meet the curved core; once
    outside with outward radial motion the continuation is a straight chart
    line, which keeps very long rays cheap.
    """
    base = np.asarray(base, dtype=float)
    v = np.asarray(direction, dtype=float)
    if isinstance(spec, FlatProduct):
        return base + time * v

    remaining = time
    pos = base.copy()
    vel = v.copy()
    while remaining > 0.0:
        esc = _core_escape(spec, pos, vel)
        if esc:
            return pos + remaining * vel
        t_leg = min(remaining, 2.0)
        y = flow(spec, pos, vel, t_leg, rtol=rtol)
        pos = np.asarray(y[: spec.dim])
        vel = np.asarray(y[spec.dim:])
        remaining -= t_leg
    return pos


def _core_escape(spec: ManifoldSpec, pos, vel) -> bool:
    """True when the straight continuation can never meet the curved core."""
    if isinstance(spec, SurfaceOfRevolution):
        lo, hi = spec.profile.support()
        t, vt = pos[0], vel[0]
        if lo <= t <= hi:
            return False
        if vt == 0.0:
            return True
        return (t > hi and vt >= 0.0) or (t < lo and vt <= 0.0)
    if isinstance(spec, PerturbedProduct):
        n = spec.base.n
        dx = np.asarray(pos[:n]) - np.asarray(spec.center)
        r = float(np.linalg.norm(dx))
        if r < spec.radius:
            return False
        return float(dx @ np.asarray(vel[:n])) >= 0.0
    return True


def _segment_clears_core(spec: ManifoldSpec, p, q) -> bool:
    if isinstance(spec, FlatProduct):
        return True
    if isinstance(spec, SurfaceOfRevolution):
        lo, hi = spec.profile.support()
        t0, t1 = sorted((p[0], q[0]))
        return t1 < lo or t0 > hi
    n = spec.base.n
    a = np.asarray(p[:n]) - np.asarray(spec.center)
    b = np.asarray(q[:n]) - np.asarray(spec.center)
    seg = b - a
    denom = float(seg @ seg)
    s = 0.0 if denom == 0.0 else float(np.clip(-(a @ seg) / denom, 0.0, 1.0))
    closest = a + s * seg
    return float(np.linalg.norm(closest)) >= spec.radius


def cover_distance(spec: ManifoldSpec, p, q, rtol: float = 1e-12,
                   pos_tol: float = 1e-10) -> float:
    """Distance in the universal-cover model (theta in R, flat exterior).

    A straight chart segment clear of the curved core is already minimizing
    because every supported family has metric >= flat.  Segments through the
    core are resolved by shooting.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if isinstance(spec, FlatProduct) or _segment_clears_core(spec, p, q):
        return float(np.linalg.norm(q - p))
    conn = _cover_connect(spec, p, q, rtol=rtol, pos_tol=pos_tol)
    return conn.length


def _exp_map_cover(spec, p, w, rtol):
    """Endpoint of the cover geodesic with initial velocity w at parameter 1.

    Rescales to a near-unit direction and reuses the escape-aware flow, so
    only the neighborhood of the curved core is actually integrated even for
    very distant endpoints.
    """
    speed = float(np.linalg.norm(w))
    if speed == 0.0:
        return np.asarray(p, dtype=float)
    return cover_flow(spec, p, np.asarray(w) / speed, speed, rtol=rtol)


def _cover_connect(spec, p, q, rtol=1e-12, pos_tol=1e-10, max_iter=30) -> Connection:
    d = spec.dim
    w0 = q - p
    starts = _multistart_directions(w0, 6)
    best = None
    for si, w in enumerate(starts):
        w = w.copy()
        for n_it in range(1, max_iter + 1):
            r = _exp_map_cover(spec, p, w, rtol) - q
            rn = float(np.linalg.norm(r))
            if rn < pos_tol:
                length = metric_norm_cover(spec, p, w)
                cand = Connection(np.asarray(w) / length, length, rn, n_it, si)
                if best is None or cand.length < best.length:
                    best = cand
                break
            J = np.empty((d, d))
            delta = 1e-7 * max(1.0, float(np.linalg.norm(w)))
            for j in range(d):
                wj = w.copy()
                wj[j] += delta
                J[:, j] = (_exp_map_cover(spec, p, wj, rtol) - q - r) / delta
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                break
            lam, improved = 1.0, False
            for _ in range(8):
                w_try = w + lam * step
                if float(np.linalg.norm(_exp_map_cover(spec, p, w_try, rtol) - q)) < rn:
                    w = w_try
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
        if best is not None:
            return best
    raise NoConnectionError("cover shooting did not converge")


def metric_norm_cover(spec: ManifoldSpec, pos, vec) -> float:
    """Metric norm using the naturally extended metric (no domain check)."""
    q = energy_form(spec)(list(pos) + list(vec))
    return math.sqrt(q)
