"""The adaptation map: evaluation, derivative, sampling, orbits, signatures.

Phi(w) = gamma * w_spike(w) + d, where w_spike is the adaptation value at
blow-up of the trajectory reset at (vR, w).  w_spike does not depend on the
reset parameters, so a single sampled w_spike table can serve a whole
(d, gamma) scan; `SampledPhi` provides that fast path.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    BisectionFailureError,
    HitStableManifoldError,
    OnStableManifoldError,
)
from .flow import FlowOptions, NonSpiking, integrate_to_spike
from .manifolds import ON_MANIFOLD_TOL, ResetLineGeometry, oscillation_count
from .model import EquilibriumSet, ModelParams, fixed_points

ITERATE_MANIFOLD_TOL = 1e-10
PERIOD_TOL = 1e-8
PERIOD_WINDOW = 200
REFINE_OFFSET_MIN = 1e-9


@dataclass(frozen=True)
class PhiValue:
    value: float
    half_rotations: int


def _check_off_manifold(geometry, w, tol=ON_MANIFOLD_TOL):
    for wi in geometry.wi:
        if abs(w - wi) <= tol:
            raise OnStableManifoldError(
                f"w={w} within {tol} of stable-manifold intersection {wi}"
            )


def raw_phi(params: ModelParams, geometry: ResetLineGeometry, w: float,
            opts: FlowOptions = FlowOptions(),
            equilibria: Optional[EquilibriumSet] = None) -> PhiValue:
    """Reset-parameter-free part of the map: w at blow-up plus winding data."""
    _check_off_manifold(geometry, w)
    ev = integrate_to_spike(params, w, opts=opts, equilibria=equilibria)
    if isinstance(ev, NonSpiking):
        raise OnStableManifoldError(f"trajectory from w={w} did not spike ({ev.reason})")
    return PhiValue(value=ev.w_at_spike, half_rotations=ev.half_rotations)


def phi(params: ModelParams, geometry: ResetLineGeometry, w: float,
        opts: FlowOptions = FlowOptions(),
        equilibria: Optional[EquilibriumSet] = None) -> PhiValue:
    """Phi(w) and the half-rotation count of the underlying trajectory."""
    rp = raw_phi(params, geometry, w, opts=opts, equilibria=equilibria)
    return PhiValue(
        value=geometry.gamma * rp.value + geometry.d,
        half_rotations=rp.half_rotations,
    )


def phi_derivative(params: ModelParams, geometry: ResetLineGeometry, w: float,
                   opts: FlowOptions = FlowOptions(),
                   equilibria: Optional[EquilibriumSet] = None) -> float:
    """dPhi/dw via the variational flow (time phase) composed with the
    exponential sensitivity formula of the v-parameterized phase."""
    _check_off_manifold(geometry, w)
    ev = integrate_to_spike(
        params, w, opts=opts, equilibria=equilibria, with_sensitivity=True
    )
    if isinstance(ev, NonSpiking):
        raise OnStableManifoldError(f"trajectory from w={w} did not spike ({ev.reason})")
    return geometry.gamma * ev.dw_dw0


@dataclass
class SampledAdaptationMap:
    geometry: ResetLineGeometry
    grid: np.ndarray
    values: np.ndarray
    osc_counts: np.ndarray         # half-rotation counts per grid point
    discontinuities: Tuple[float, ...]
    interval: Tuple[float, float]
    evaluator: Callable[[float], float] = None   # Phi(w), exact by default
    monotonicity_violations: int = 0

    @property
    def alpha(self):
        return self.geometry.alpha

    @property
    def beta(self):
        return self.geometry.beta

    @property
    def w1(self):
        interior = [wi for wi in self.geometry.wi
                    if self.beta <= wi <= self.alpha]
        return interior[0] if interior else None

    def with_evaluator(self, fn):
        self.evaluator = fn
        return self


def _refinement_offsets(span):
    # geometric ladder from coarse (relative to span) down to 1e-9 absolute
    hi = max(span * 1e-2, REFINE_OFFSET_MIN)
    n = max(2, int(math.ceil(2 * math.log10(hi / REFINE_OFFSET_MIN))) + 1)
    return np.geomspace(hi, REFINE_OFFSET_MIN, n)


def _audit_monotonicity(geometry, grid, values):
    """Count violations of the up/down-split monotonicity on continuity pieces."""
    bad = 0
    breaks = sorted(set(list(geometry.wi) + [geometry.w_star]))
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        if any(a < br < b for br in breaks):
            continue
        mid = 0.5 * (a + b)
        expect_up = mid < geometry.w_star
        if expect_up and values[i + 1] < values[i]:
            bad += 1
        if not expect_up and values[i + 1] > values[i]:
            bad += 1
    return bad


def sample_map(params: ModelParams, geometry: ResetLineGeometry,
               interval: Tuple[float, float], n: int,
               opts: FlowOptions = FlowOptions(),
               equilibria: Optional[EquilibriumSet] = None,
               evaluator: Optional[Callable[[float], float]] = None
               ) -> SampledAdaptationMap:
    """Sample Phi on an adaptive grid over `interval`, geometrically refined
    near each discontinuity (and near the interval endpoints) down to offset
    1e-9, with a monotonicity audit."""
    lo, hi = interval
    eq = equilibria if equilibria is not None else fixed_points(params)
    pts: List[float] = []
    if n > 0:
        pts.extend(np.linspace(lo, hi, n))
        span = hi - lo
        offs = _refinement_offsets(span)
        anchors = [wi for wi in geometry.wi if lo <= wi <= hi] + [lo, hi]
        for a in anchors:
            pts.extend(a - offs)
            pts.extend(a + offs)
    grid = np.array(sorted(p for p in set(pts) if lo <= p <= hi))
    keep = np.ones(len(grid), dtype=bool)
    for wi in geometry.wi:
        keep &= np.abs(grid - wi) > ON_MANIFOLD_TOL
    grid = grid[keep]

    values = np.empty(len(grid))
    counts = np.empty(len(grid))
    for i, w in enumerate(grid):
        if evaluator is not None:
            values[i] = evaluator(w)
            counts[i] = np.nan
        else:
            pv = phi(params, geometry, float(w), opts=opts, equilibria=eq)
            values[i] = pv.value
            counts[i] = pv.half_rotations

    disc = tuple(wi for wi in geometry.wi if lo < wi < hi)
    default_eval = evaluator if evaluator is not None else (
        lambda w: phi(params, geometry, w, opts=opts, equilibria=eq).value
    )
    return SampledAdaptationMap(
        geometry=geometry, grid=grid, values=values, osc_counts=counts,
        discontinuities=disc, interval=(lo, hi), evaluator=default_eval,
        monotonicity_violations=_audit_monotonicity(geometry, grid, values),
    )


class SampledPhi:
    """Fast interpolated w_spike(w) over an interval, piecewise per
    continuity interval (PCHIP on a grid geometrically refined at the
    discontinuities).  Used by parameter scans; exact evaluation stays the
    library default."""

    def __init__(self, params: ModelParams, geometry: ResetLineGeometry,
                 interval: Tuple[float, float], n: int = 2000,
                 opts: FlowOptions = FlowOptions(),
                 equilibria: Optional[EquilibriumSet] = None):
        self.params = params
        self.geometry = geometry
        self.interval = interval
        eq = equilibria if equilibria is not None else fixed_points(params)
        lo, hi = interval
        breaks = [wi for wi in geometry.wi if lo < wi < hi]
        edges = [lo] + breaks + [hi]
        span = hi - lo
        offs = _refinement_offsets(span)
        self._pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            base = np.linspace(a, b, max(8, int(round(n * (b - a) / span))))
            extra = np.concatenate([a + offs, b - offs])
            g = np.array(sorted(set(np.clip(
                np.concatenate([base, extra]), a + REFINE_OFFSET_MIN * 0.999,
                b - REFINE_OFFSET_MIN * 0.999,
            ))))
            vals = np.empty(len(g))
            cnts = np.empty(len(g), dtype=float)
            for i, w in enumerate(g):
                pv = raw_phi(params, geometry, float(w), opts=opts, equilibria=eq)
                vals[i] = pv.value
                cnts[i] = pv.half_rotations
            self._pieces.append((a, b, g, PchipInterpolator(g, vals), cnts))

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        out = np.empty_like(w)
        for a, b, g, interp, _ in self._pieces:
            m = (w >= a) & (w <= b)
            if m.any():
                out[m] = interp(np.clip(w[m], g[0], g[-1]))
        return float(out[0]) if scalar else out

    def half_rotations(self, w):
        for a, b, g, _, cnts in self._pieces:
            if a <= w <= b:
                i = np.searchsorted(g, w)
                i = min(max(i, 0), len(g) - 1)
                return int(cnts[i])
        raise ValueError(f"w={w} outside sampled interval {self.interval}")

    def phi_evaluator(self, gamma: float, d: float):
        """Phi(w) = gamma * w_spike(w) + d as a vectorized callable."""
        def f(w):
            return gamma * self(w) + d
        return f


@dataclass(frozen=True)
class Signature:
    """MMO signature: blocks (L_k spikes, s_k small oscillations)."""

    blocks: Tuple[Tuple[int, float], ...]
    periodic: Optional[int] = None   # period in blocks, if detected

    @property
    def is_tonic(self):
        return not self.blocks

    def __str__(self):
        if self.is_tonic:
            return "tonic"
        def fmt(s):
            return str(int(s)) if float(s).is_integer() else str(s)
        return " ".join(f"{L}^{fmt(s)}" for L, s in self.blocks)

    def to_dict(self):
        return {
            "blocks": [[L, s] for L, s in self.blocks],
            "periodic": self.periodic,
            "text": str(self),
        }


def blocks_from_counts(counts: Sequence[float]) -> Tuple[Tuple[int, float], ...]:
    """Merge a per-spike oscillation-count sequence into signature blocks:
    a spike followed by zero oscillations joins the next spike's burst."""
    blocks = []
    L = 0
    for c in counts:
        L += 1
        if c > 0:
            blocks.append((L, c))
            L = 0
    # a trailing run of zero-count spikes is an incomplete block: drop it
    return tuple(blocks)


def cyclic_equal(a, b):
    if len(a) != len(b):
        return False
    if not a:
        return True
    return any(tuple(a[i:] + a[:i]) == tuple(b) for i in range(len(a)))


@dataclass
class OrbitRecord:
    w0: float
    iterates: np.ndarray
    half_rotations: np.ndarray
    signature: Signature = None


def iterate_orbit(params: ModelParams, geometry: ResetLineGeometry, w0: float,
                  n_iter: int, opts: FlowOptions = FlowOptions(),
                  equilibria: Optional[EquilibriumSet] = None,
                  evaluator=None) -> OrbitRecord:
    """Iterate Phi from w0, recording per-step oscillation data.

    `evaluator`, when given, replaces the exact integration (scan fast path);
    half rotations then come from the interval partition.
    """
    eq = equilibria if equilibria is not None else fixed_points(params)
    ws = [float(w0)]
    hrs = []
    w = float(w0)
    for k in range(n_iter):
        for wi in geometry.wi:
            if abs(w - wi) <= ITERATE_MANIFOLD_TOL:
                raise HitStableManifoldError(k, w)
        if evaluator is not None:
            nxt = float(evaluator(w))
            hr = int(round(2 * oscillation_count(geometry, w)))
        else:
            pv = phi(params, geometry, w, opts=opts, equilibria=eq)
            nxt, hr = pv.value, pv.half_rotations
        hrs.append(hr)
        ws.append(nxt)
        w = nxt
    rec = OrbitRecord(
        w0=w0, iterates=np.array(ws), half_rotations=np.array(hrs, dtype=int)
    )
    rec.signature = orbit_signature(rec)
    return rec


def detect_period(iterates: np.ndarray, rel_tol: float = PERIOD_TOL,
                  window: int = PERIOD_WINDOW):
    """(start, period) of the eventual periodic tail by first recurrence, or
    None if no recurrence is found within the window."""
    n = len(iterates)
    scale = max(1.0, float(np.max(np.abs(iterates))))
    tail = iterates[-min(window, n):]
    off = n - len(tail)
    last = tail[-1]
    for period in range(1, len(tail)):
        if abs(tail[-1 - period] - last) <= rel_tol * scale:
            # verify one full cycle
            if len(tail) >= 2 * period:
                a = tail[-period:]
                b = tail[-2 * period:-period]
                if np.all(np.abs(a - b) <= rel_tol * scale):
                    return off + len(tail) - 2 * period, period
    return None


def orbit_signature(orbit: OrbitRecord) -> Signature:
    """Canonical signature of the orbit's periodic tail (transient trimmed
    when periodicity is detected; otherwise the full count sequence)."""
    counts = orbit.half_rotations / 2.0
    rec = detect_period(orbit.iterates[:-1]) if len(orbit.iterates) > 2 else None
    periodic = None
    if rec is not None:
        start, period = rec
        tail = list(counts[start:start + period])
        # rotate the cycle so it starts just after an oscillation block
        nz = [i for i, c in enumerate(tail) if c > 0]
        if nz:
            k = (nz[-1] + 1) % period
            tail = tail[k:] + tail[:k]
        counts = tail
        if all(c == 0 for c in counts):
            return Signature(blocks=(), periodic=1)
        periodic = len(blocks_from_counts(counts))
    else:
        counts = list(counts)
        if all(c == 0 for c in counts):
            return Signature(blocks=(), periodic=None)
    return Signature(blocks=blocks_from_counts(counts), periodic=periodic)


def find_fixed_points(evaluator, lo: float, hi: float,
                      skip: Sequence[float] = (), n_scan: int = 400,
                      tol: float = 1e-13) -> List[float]:
    """Fixed points of w -> evaluator(w) in [lo, hi] by sign scan + bisection,
    skipping the listed discontinuities."""
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, n_scan)
    keep = np.ones(len(grid), dtype=bool)
    for s in skip:
        keep &= np.abs(grid - s) > 1e-12
    grid = grid[keep]
    g = np.array([evaluator(w) - w for w in grid])
    roots = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        if any(grid[i] < s < grid[i + 1] for s in skip):
            continue
        a, b = grid[i], grid[i + 1]
        fa = g[i]
        while b - a > tol:
            m = 0.5 * (a + b)
            fm = evaluator(m) - m
            if fm == 0.0:
                a = b = m
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        roots.append(0.5 * (a + b))
    for i in np.nonzero(g == 0.0)[0]:
        roots.append(float(grid[i]))
    return sorted(roots)


def solve_phi_fixed_point(evaluator, lo, hi, tol=1e-13):
    """Single fixed point in a bracketing continuity interval."""
    roots = find_fixed_points(evaluator, lo, hi, tol=tol)
    if not roots:
        raise BisectionFailureError(f"no fixed point of Phi in [{lo}, {hi}]")
    return roots[0]
