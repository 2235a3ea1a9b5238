"""Saddle manifolds and the reset-line geometry they induce.

The stable manifold is traced backward in time (arc-length parameterized);
its crossings of {v = vR} give the discontinuity points w_i of the
adaptation map.  The unstable branches are flowed forward through the
blow-up machinery to get the adaptation limits w_lim+-, whose reset images
are alpha and beta.
"""

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    NoSpiralTerminationWarning,
    OnStableManifoldError,
    TangentialCrossingError,
)
from .flow import FlowOptions, NonSpiking, integrate_to_spike
from .model import EquilibriumSet, ModelParams, fixed_points

DELTA_SEED = 1e-7
R_STOP = 1e-4
ARC_LENGTH_CAP = 1e4
H_ARC = 0.01
TANGENTIAL_TOL = 1e-10
ON_MANIFOLD_TOL = 1e-12
DOMAIN_RADIUS = 6.0  # backward traces leaving this box are capped


@dataclass(frozen=True)
class ManifoldTraceOptions:
    delta_seed: float = DELTA_SEED
    r_stop: float = R_STOP
    arc_cap: float = ARC_LENGTH_CAP
    h_arc: float = H_ARC
    rtol: float = 1e-11
    atol: float = 1e-13


@dataclass
class ManifoldTrace:
    branch: str                     # stablePlus | stableMinus | unstablePlus | unstableMinus
    polyline: np.ndarray            # (n, 2) ordered (v, w) samples
    terminal: str                   # focusReached | blowUp | arcLengthCap
    w_lim: Optional[float] = None   # set for blow-up terminals
    _sol: object = None             # dense backward solution, for refinement


def _arclength_rhs(params, sign):
    F, I, eps, b = params.F, params.I, params.eps, params.b

    def f(s, y):
        fv = F(y[0]) - y[1] + I
        fw = eps * (b * y[0] - y[1])
        n = math.hypot(fv, fw)
        return (sign * fv / n, sign * fw / n)

    return f


def _trace_backward(params, eq, seed, branch, opts):
    focus = eq.focus

    def ev_focus(s, y):
        return math.hypot(y[0] - focus[0], y[1] - focus[1]) - opts.r_stop

    ev_focus.terminal = True
    ev_focus.direction = -1

    def ev_domain(s, y):
        return DOMAIN_RADIUS - max(abs(y[0]), abs(y[1]))

    ev_domain.terminal = True
    ev_domain.direction = -1

    sol = solve_ivp(
        _arclength_rhs(params, -1.0), (0.0, opts.arc_cap), seed,
        method="RK45", rtol=opts.rtol, atol=opts.atol, dense_output=True,
        events=(ev_focus, ev_domain), max_step=1.0,
    )
    s_end = sol.t[-1]
    if len(sol.t_events[0]):
        terminal = "focusReached"
        s_end = float(sol.t_events[0][0])
    elif len(sol.t_events[1]):
        terminal = "arcLengthCap"
        s_end = float(sol.t_events[1][0])
    else:
        terminal = "arcLengthCap"
        warnings.warn(
            f"{branch}: arc-length cap hit before the focus",
            NoSpiralTerminationWarning,
        )
    ss = np.arange(0.0, s_end, opts.h_arc)
    ss = np.append(ss, s_end)
    poly = sol.sol(ss).T
    return ManifoldTrace(branch=branch, polyline=poly, terminal=terminal, _sol=sol)


def trace_stable_manifold(
    params: ModelParams,
    opts: ManifoldTraceOptions = ManifoldTraceOptions(),
    equilibria: Optional[EquilibriumSet] = None,
) -> Tuple[ManifoldTrace, ManifoldTrace]:
    """Backward-time traces of both stable branches, seeded at
    saddle +- delta_seed * e_stable.  The minus branch (w decreasing off the
    saddle) spirals into the focus."""
    eq = equilibria if equilibria is not None else fixed_points(params)
    es = eq.saddle_eigen.e_stable
    if es[1] > 0:
        es = -es  # orient so that +es points toward w < w_plus
    seed_minus = eq.saddle + opts.delta_seed * es
    seed_plus = eq.saddle - opts.delta_seed * es
    t_minus = _trace_backward(params, eq, seed_minus, "stableMinus", opts)
    t_plus = _trace_backward(params, eq, seed_plus, "stablePlus", opts)
    return t_minus, t_plus


def unstable_limits(
    params: ModelParams,
    opts: ManifoldTraceOptions = ManifoldTraceOptions(),
    equilibria: Optional[EquilibriumSet] = None,
    flow_opts: FlowOptions = FlowOptions(),
) -> Tuple[float, float]:
    """(w_lim-, w_lim+): adaptation limits along the two unstable branches."""
    eq = equilibria if equilibria is not None else fixed_points(params)
    eu = eq.saddle_eigen.e_unstable
    if eu[0] < 0:
        eu = -eu  # +eu points toward v > v_plus
    lims = {}
    for sign, name in ((1.0, "unstablePlus"), (-1.0, "unstableMinus")):
        seed = eq.saddle + sign * opts.delta_seed * eu
        ev = _spike_from_state(params, seed, eq, flow_opts)
        lims[name] = ev.w_at_spike
    w_minus, w_plus = lims["unstableMinus"], lims["unstablePlus"]
    if not w_minus < w_plus:
        raise ValueError(f"w_lim- {w_minus} not below w_lim+ {w_plus}")
    return w_minus, w_plus


def _spike_from_state(params, state, eq, flow_opts):
    # same machinery as integrate_to_spike but from an arbitrary point
    shifted = replace_vR(params, state[0])
    ev = integrate_to_spike(shifted, state[1], opts=flow_opts, equilibria=eq)
    if isinstance(ev, NonSpiking):
        raise ValueError(f"unstable branch from {state} did not spike: {ev}")
    return ev


def replace_vR(params, vR):
    return ModelParams(
        a=params.a, eps=params.eps, b=params.b, I=params.I, vR=vR,
        gamma=params.gamma, d=params.d, f=params.f, fp=params.fp,
    )


@dataclass(frozen=True)
class ResetLineGeometry:
    wi: Tuple[float, ...]       # ordered stable-manifold intersections
    p: int
    p1: int                     # ceil(p/2): split below/above the v-nullcline
    w_star: float
    w_star_star: float
    w_lim_minus: float
    w_lim_plus: float
    gamma: float
    d: float

    @property
    def alpha(self):
        return self.gamma * self.w_lim_plus + self.d

    @property
    def beta(self):
        return self.gamma * self.w_lim_minus + self.d

    def with_reset(self, gamma=None, d=None):
        return ResetLineGeometry(
            wi=self.wi, p=self.p, p1=self.p1, w_star=self.w_star,
            w_star_star=self.w_star_star, w_lim_minus=self.w_lim_minus,
            w_lim_plus=self.w_lim_plus,
            gamma=self.gamma if gamma is None else gamma,
            d=self.d if d is None else d,
        )

    def interval_index(self, w):
        """Index i of the continuity interval I_i containing w."""
        for wi in self.wi:
            if abs(w - wi) <= ON_MANIFOLD_TOL:
                raise OnStableManifoldError(f"w={w} is on the stable manifold")
        return bisect_right(self.wi, w)

    def to_dict(self):
        return {
            "wi": list(self.wi), "p": self.p, "p1": self.p1,
            "wStar": self.w_star, "wStarStar": self.w_star_star,
            "wLimMinus": self.w_lim_minus, "wLimPlus": self.w_lim_plus,
            "alpha": self.alpha, "beta": self.beta,
        }


FINE_ARC_STEP = 1e-5
FINE_ARC_POINTS_CAP = 2_000_000


def _polyline_crossings(trace, vR):
    sol = trace._sol
    if sol is None:
        return []
    # a spiral loop can dip across the reset line over a tiny arc window,
    # far below the polyline's plotting resolution: sign-scan the dense
    # solution on a fine arc grid instead
    s_end = float(sol.t[-1])
    step = max(FINE_ARC_STEP, s_end / FINE_ARC_POINTS_CAP)
    ss = np.linspace(0.0, s_end, int(s_end / step) + 2)
    vv, ww = sol.sol(ss)
    out = []
    sgn = np.sign(vv - vR)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    for i in idx:
        lo, hi = ss[i], ss[i + 1]
        flo = sol.sol(lo)[0] - vR
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = sol.sol(mid)[0] - vR
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        y = sol.sol(0.5 * (lo + hi))
        out.append(float(y[1]))
    exact = np.nonzero(vv == vR)[0]
    out.extend(float(ww[i]) for i in exact)
    return out


def _refine_wi_by_flow(params, eq, w_rough, window, flow_opts):
    """Polish a crossing to machine precision by bisecting the half-rotation
    count of the forward flow: it steps exactly at the stable-manifold hit."""

    def half_rot(w):
        ev = integrate_to_spike(params, w, opts=flow_opts, equilibria=eq)
        if isinstance(ev, NonSpiking):
            raise ValueError(f"unexpected NonSpiking at w={w}")
        return ev.half_rotations

    lo, hi = w_rough - window, w_rough + window
    rlo, rhi = half_rot(lo), half_rot(hi)
    if rlo == rhi:
        # polyline crossing already machine-accurate, or window too small
        return w_rough
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if half_rot(mid) == rlo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reset_intersections(
    traces: Tuple[ManifoldTrace, ManifoldTrace],
    params: ModelParams,
    equilibria: Optional[EquilibriumSet] = None,
    flow_opts: Optional[FlowOptions] = None,
    refine: bool = True,
) -> List[float]:
    """All transversal crossings of v = vR by the stable manifold, ascending."""
    eq = equilibria if equilibria is not None else fixed_points(params)
    vR = params.vR
    w_star = params.w_star
    rough = []
    for tr in traces:
        rough.extend(_polyline_crossings(tr, vR))
    for w in rough:
        # dv/dt on the reset line is w* - w; tangential iff w == w*
        if abs(w_star - w) < TANGENTIAL_TOL:
            raise TangentialCrossingError(
                f"crossing at w={w} is tangential to the reset line"
            )
    rough = sorted(rough)
    if not refine:
        return rough
    fo = flow_opts if flow_opts is not None else FlowOptions()
    out = []
    for w in rough:
        out.append(_refine_wi_by_flow(params, eq, w, 1e-7, fo))
    return sorted(out)


def build_geometry(
    params: ModelParams,
    opts: ManifoldTraceOptions = ManifoldTraceOptions(),
    equilibria: Optional[EquilibriumSet] = None,
    flow_opts: FlowOptions = FlowOptions(),
) -> ResetLineGeometry:
    """Trace manifolds and assemble the full reset-line geometry."""
    eq = equilibria if equilibria is not None else fixed_points(params)
    traces = trace_stable_manifold(params, opts, equilibria=eq)
    wi = reset_intersections(traces, params, equilibria=eq, flow_opts=flow_opts)
    w_lim_minus, w_lim_plus = unstable_limits(
        params, opts, equilibria=eq, flow_opts=flow_opts
    )
    p = len(wi)
    p1 = (p + 1) // 2
    return ResetLineGeometry(
        wi=tuple(wi), p=p, p1=p1,
        w_star=params.w_star, w_star_star=params.w_star_star,
        w_lim_minus=w_lim_minus, w_lim_plus=w_lim_plus,
        gamma=params.gamma, d=params.d,
    )


def oscillation_count(geometry: ResetLineGeometry, w: float) -> float:
    """Number of small oscillations (half-integer) for a trajectory reset at w."""
    i = geometry.interval_index(w)
    p, p1 = geometry.p, geometry.p1
    if i < p1:
        return float(i)
    if i > p1:
        return (p + 0.5) - i
    if w < geometry.w_star:
        return float(p1)
    return p1 + 0.5 if p % 2 == 0 else p1 - 0.5
