"""Integration of the continuous dynamics up to spike (finite-time blow-up).

Blow-up is handled in three phases: time-parameterized integration away
from the blow-up, a switch to v as independent variable once the voltage is
safely past the saddle and increasing (dW/dv = eps*(b*v - W)/(F(v) - W + I)),
and an analytic tail estimate beyond the voltage cutoff.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import FocusTooCloseError, NullclineCrossingError
from .model import EquilibriumSet, ModelParams, fixed_points

MAX_ANGLE_STEP = np.pi / 8  # refinement bound for winding samples
R_MIN_FOCUS = 1e-7          # exclusion radius around the focus


@dataclass(frozen=True)
class FlowOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    t_max: float = 1e4
    v_cut: float = 1e3
    v_switch_offset: float = 1.0   # switch to v-parameterization at v_plus + offset
    den_min: float = 1.0           # required F(v)-w+I margin at the switch
    saddle_radius: float = 1e-9    # proximity event radius at the saddle
    manifold_ws: Optional[Sequence[float]] = None  # known stable-manifold hits
    manifold_tol: float = 1e-9


@dataclass(frozen=True)
class SpikeEvent:
    t_star: float          # time at which the v-parameterized phase began
    w_at_spike: float      # lim of w at blow-up
    half_rotations: int    # v-nullcline crossings (half-turns) before the spike
    winding_angle: float   # unwrapped angle, signed
    dw_dw0: float = np.nan  # sensitivity of w_at_spike to w0 (when requested)


@dataclass(frozen=True)
class NonSpiking:
    reason: str            # "saddle" or "tmax"


@dataclass
class Trajectory:
    t: np.ndarray
    v: np.ndarray
    w: np.ndarray
    blow_up: Optional[SpikeEvent] = None
    winding_angle: float = 0.0


def _rhs(params):
    F = params.F
    I = params.I
    eps = params.eps
    b = params.b

    def f(t, y):
        v, w = y[0], y[1]
        return (F(v) - w + I, eps * (b * v - w))

    return f


def _rhs_variational(params):
    F, Fp = params.F, params.Fp
    I, eps, b = params.I, params.eps, params.b

    def f(t, y):
        v, w, sv, sw = y
        return (
            F(v) - w + I,
            eps * (b * v - w),
            Fp(v) * sv - sw,
            eps * (b * sv - sw),
        )

    return f


def _w_of_v_rhs(params, den_min):
    F, I, eps, b = params.F, params.I, params.eps, params.b

    def f(v, y):
        den = F(v) - y[0] + I
        if den <= den_min:
            raise NullclineCrossingError(
                f"denominator {den} <= {den_min} at v={v}"
            )
        return (eps * (b * v - y[0]) / den,)

    return f


def _w_of_v_rhs_with_logderiv(params, den_min):
    F, I, eps, b = params.F, params.I, params.eps, params.b

    def f(v, y):
        den = F(v) - y[0] + I
        if den <= den_min:
            raise NullclineCrossingError(
                f"denominator {den} <= {den_min} at v={v}"
            )
        return (
            eps * (b * v - y[0]) / den,
            eps * (b * v - F(v) - I) / den ** 2,
        )

    return f


def _tail_correction(params, v_cut, w_cut):
    # integral of eps*(b*v - W)/(F(v) - W + I) from v_cut to infinity, with
    # W frozen at w_cut and F ~ v^4; relative error O(1/v_cut) of the estimate
    eps, b = params.eps, params.b
    return eps * b / (2 * v_cut ** 2) - eps * w_cut / (3 * v_cut ** 3)


def integrate_w_of_v(params: ModelParams, w0: float, v_start: float,
                     v_end: float, opts: FlowOptions = FlowOptions()) -> float:
    """Integrate dW/dv in the monotone-v region; raises NullclineCrossingError
    if the denominator F(v) - W + I drops to the safety margin."""
    if v_start == v_end:
        return w0
    # in the far tail the trajectory sits near the nullcline floor; only
    # guard against an actual sign loss
    den_guard = min(opts.den_min, 1e-12)
    sol = solve_ivp(
        _w_of_v_rhs(params, den_guard), (v_start, v_end), [w0],
        method="RK45", rtol=opts.rtol, atol=opts.atol,
    )
    if not sol.success:
        raise NullclineCrossingError(sol.message)
    return float(sol.y[0, -1])


def _unwrap_increments(raw):
    d = np.diff(raw)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d


def winding_angle(v: np.ndarray, w: np.ndarray, focus) -> float:
    """Unwrapped atan2 angle of the trajectory around the focus, accumulated
    sample to sample with each increment mapped into (-pi, pi)."""
    dv = np.asarray(v) - focus[0]
    dw = np.asarray(w) - focus[1]
    r = np.hypot(dv, dw)
    if np.any(r < R_MIN_FOCUS):
        raise FocusTooCloseError(f"min distance to focus {r.min()} < {R_MIN_FOCUS}")
    raw = np.arctan2(dw, dv)
    return float(np.sum(_unwrap_increments(raw)))


NULLCLINE_DT = 0.005


def _nullcline_crossings(params, sol, t_end):
    """Count of transversal v-nullcline crossings (sign changes of dv/dt)
    up to t_end.  This count is constant on continuity intervals of the
    reset line: crossings appear or vanish only across the stable manifold
    (tangency to the nullcline requires passing through an equilibrium),
    which makes it the robust half-rotation counter."""
    ts = np.linspace(0.0, t_end, max(64, int(t_end / NULLCLINE_DT) + 1))
    vv, ww = sol.sol(ts)[:2]
    den = params.F(vv) - ww + params.I
    s = np.sign(den)
    s = s[s != 0]
    if len(s) < 2:
        return 0
    return int(np.sum(s[:-1] * s[1:] < 0))


def _refined_winding(sol, t_end, focus, extra_points=()):
    """Winding over a dense-output solution, bisecting any sample pair whose
    angle increment exceeds MAX_ANGLE_STEP (anti-aliasing near the focus)."""
    ts = list(sol.t[sol.t <= t_end])
    if not ts or ts[-1] < t_end:
        ts.append(t_end)
    ts = np.array(ts)

    def ang(t):
        y = sol.sol(t)
        return math.atan2(y[1] - focus[1], y[0] - focus[0])

    total = 0.0
    angs = np.array([ang(t) for t in ts])
    stack = list(zip(ts[:-1], ts[1:], angs[:-1], angs[1:]))
    while stack:
        t0, t1, a0, a1 = stack.pop()
        d = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
        if abs(d) <= MAX_ANGLE_STEP or t1 - t0 < 1e-12:
            total += d
        else:
            tm = 0.5 * (t0 + t1)
            am = ang(tm)
            stack.append((t0, tm, a0, am))
            stack.append((tm, t1, am, a1))
    # account for the blow-up tail: the direction from the focus tends to 0
    a_end = ang(t_end)
    total += -((a_end + np.pi) % (2 * np.pi) - np.pi)
    return total


def integrate_to_spike(params: ModelParams, w0: float,
                       opts: FlowOptions = FlowOptions(),
                       equilibria: Optional[EquilibriumSet] = None,
                       with_sensitivity: bool = False,
                       return_trajectory: bool = False):
    """Flow (vR, w0) forward until blow-up; returns SpikeEvent or NonSpiking.

    Orbits exactly on the stable manifold are not representable in floating
    point here (the saddle's contraction/expansion ratio makes every double-
    precision neighbor escape), so stable-manifold hits are recognized by
    initial-condition proximity when opts.manifold_ws is supplied; a genuine
    saddle-proximity event is kept as a backup.
    """
    if opts.manifold_ws is not None:
        for wi in opts.manifold_ws:
            if abs(w0 - wi) <= opts.manifold_tol:
                return NonSpiking("saddle")
    eq = equilibria if equilibria is not None else fixed_points(params)
    v_switch = eq.v_plus + opts.v_switch_offset
    saddle = eq.saddle
    focus = eq.focus

    def ev_switch(t, y):
        return min(y[0] - v_switch,
                   params.F(y[0]) - y[1] + params.I - opts.den_min)

    ev_switch.terminal = True
    ev_switch.direction = 1

    def ev_saddle(t, y):
        return math.hypot(y[0] - saddle[0], y[1] - saddle[1]) - opts.saddle_radius

    ev_saddle.terminal = True
    ev_saddle.direction = -1

    rhs = _rhs_variational(params) if with_sensitivity else _rhs(params)
    y0 = [params.vR, w0, 0.0, 1.0] if with_sensitivity else [params.vR, w0]
    sol = solve_ivp(
        rhs, (0.0, opts.t_max), y0, method="RK45",
        rtol=opts.rtol, atol=opts.atol, dense_output=True,
        events=(ev_switch, ev_saddle),
    )
    if not sol.success:
        raise NullclineCrossingError(sol.message)
    if len(sol.t_events[1]):
        return NonSpiking("saddle")
    if not len(sol.t_events[0]):
        return NonSpiking("tmax")

    t_sw = float(sol.t_events[0][0])
    y_sw = sol.y_events[0][0]
    v_sw, w_sw = float(y_sw[0]), float(y_sw[1])

    angle = _refined_winding(sol, t_sw, focus)
    half_rot = _nullcline_crossings(params, sol, t_sw)

    # phase (ii): v as the independent variable, out to the cutoff
    den_guard = 0.5 * opts.den_min
    if with_sensitivity:
        sol2 = solve_ivp(
            _w_of_v_rhs_with_logderiv(params, den_guard),
            (v_sw, opts.v_cut), [w_sw, 0.0],
            method="RK45", rtol=opts.rtol, atol=opts.atol,
        )
    else:
        sol2 = solve_ivp(
            _w_of_v_rhs(params, den_guard), (v_sw, opts.v_cut), [w_sw],
            method="RK45", rtol=opts.rtol, atol=opts.atol,
        )
    if not sol2.success:
        raise NullclineCrossingError(sol2.message)
    w_cut = float(sol2.y[0, -1])
    w_spike = w_cut + _tail_correction(params, opts.v_cut, w_cut)

    dw_dw0 = np.nan
    if with_sensitivity:
        sv, sw = float(y_sw[2]), float(y_sw[3])
        fv, fw = params.field_at(v_sw, w_sw)
        # sensitivity of w at the fixed-v section, then the exponential
        # variational factor of the v-parameterized phase
        s_section = sw - (fw / fv) * sv
        dw_dw0 = s_section * math.exp(float(sol2.y[1, -1]))

    event = SpikeEvent(
        t_star=t_sw,
        w_at_spike=w_spike,
        half_rotations=half_rot,
        winding_angle=angle,
        dw_dw0=dw_dw0,
    )
    if return_trajectory:
        traj = Trajectory(
            t=sol.t, v=sol.y[0], w=sol.y[1], blow_up=event, winding_angle=angle
        )
        return event, traj
    return event
