"""Designing initial conditions that realize a prescribed transient MMO
signature, via nested preimages of the adaptation map.

The construction follows the preimage recursion: given counts s_1..s_n from
the accessible set S, the designed interval J satisfies
Phi^k(w) in I_{s_k} for k = 1..n and every w in J — i.e. the counts are
realized by iterates 1..n; the initial point's own count is unconstrained.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .adaptation import phi
from .errors import (
    EmptyPreimageError,
    InsufficientIntersectionsError,
    WidthUnderflowError,
)
from .flow import FlowOptions
from .manifolds import ResetLineGeometry, oscillation_count
from .model import EquilibriumSet, ModelParams, fixed_points

WIDTH_MIN = 1e-13
BISECT_TOL = 1e-13
BISECT_DEPTH_CAP = 200
EDGE_MARGIN = 1e-11


@dataclass(frozen=True)
class SignatureTarget:
    sequence: Tuple[float, ...]

    def __post_init__(self):
        if len(self.sequence) < 1:
            raise ValueError("target must have length >= 1")


@dataclass(frozen=True)
class Piece:
    """Monotone continuity sub-piece of the map inside [beta, alpha]."""

    lo: float
    hi: float
    count: float
    increasing: bool


def _interior_pieces(geometry: ResetLineGeometry) -> List[Piece]:
    beta, alpha = geometry.beta, geometry.alpha
    inside = sorted(w for w in geometry.wi if beta <= w <= alpha)
    if len(inside) < 2:
        raise InsufficientIntersectionsError(
            f"need >= 2 stable-manifold intersections in [beta, alpha]; "
            f"found {len(inside)}"
        )
    pieces = []
    w_star = geometry.w_star
    for a, b in zip(inside[:-1], inside[1:]):
        if a < w_star < b:
            sub = [(a, w_star, True), (w_star, b, False)]
        elif b <= w_star:
            sub = [(a, b, True)]
        else:
            sub = [(a, b, False)]
        for lo, hi, inc in sub:
            mid = 0.5 * (lo + hi)
            pieces.append(Piece(lo=lo, hi=hi,
                                count=oscillation_count(geometry, mid),
                                increasing=inc))
    return pieces


def accessible_counts(geometry: ResetLineGeometry) -> List[float]:
    """Sorted oscillation counts available on the continuity intervals
    strictly inside [beta, alpha]."""
    return sorted({p.count for p in _interior_pieces(geometry)})


def _bisect_phi(f, lo, hi, level, tol=BISECT_TOL):
    """Root of f (monotone sign change between lo and hi) by bisection."""
    flo = f(lo)
    for _ in range(BISECT_DEPTH_CAP):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _preimage_in_piece(evaluate, piece: Piece, target: Tuple[float, float],
                       level: int) -> Optional[Tuple[float, float]]:
    """Preimage of the open interval `target` under the restriction of Phi to
    a monotone piece, or None when images miss the target."""
    lo = piece.lo + EDGE_MARGIN
    hi = piece.hi - EDGE_MARGIN
    if hi <= lo:
        return None
    flo, fhi = evaluate(lo), evaluate(hi)
    v_min, v_max = (flo, fhi) if flo <= fhi else (fhi, flo)
    c, d = target
    c_eff, d_eff = max(c, v_min), min(d, v_max)
    if d_eff <= c_eff:
        return None

    def inv(y):
        if piece.increasing:
            if y <= flo:
                return lo
            if y >= fhi:
                return hi
        else:
            if y >= flo:
                return lo
            if y <= fhi:
                return hi
        return _bisect_phi(lambda w: evaluate(w) - y, lo, hi, level)

    a, b = inv(c_eff), inv(d_eff)
    if a > b:
        a, b = b, a
    return (a, b) if b - a > 0 else None


def design_interval(params: ModelParams, geometry: ResetLineGeometry,
                    target: SignatureTarget,
                    opts: FlowOptions = FlowOptions(),
                    equilibria: Optional[EquilibriumSet] = None,
                    evaluator=None) -> Tuple[float, float]:
    """Interval J of initial conditions whose iterates 1..n under Phi land in
    the continuity pieces with the prescribed oscillation counts.

    Backward recursion over monotone pieces; when a count is carried by
    several pieces, pieces below w* (increasing) are preferred.
    """
    eq = equilibria if equilibria is not None else fixed_points(params)
    if evaluator is None:
        def evaluate(w):
            return phi(params, geometry, w, opts=opts, equilibria=eq).value
    else:
        evaluate = evaluator
    pieces = _interior_pieces(geometry)
    counts = accessible_counts(geometry)
    for s in target.sequence:
        if s not in counts:
            raise ValueError(f"count {s} not in accessible set {counts}")

    n = len(target.sequence)
    current: Optional[Tuple[float, float]] = None
    for k in range(n - 1, -1, -1):
        s = target.sequence[k]
        candidates = [p for p in pieces if p.count == s]
        # increasing pieces first, per the component-choice convention
        candidates.sort(key=lambda p: not p.increasing)
        nxt = None
        for p in candidates:
            if current is None:
                nxt = (p.lo + EDGE_MARGIN, p.hi - EDGE_MARGIN)
            else:
                nxt = _preimage_in_piece(evaluate, p, current, n - k)
            if nxt is not None:
                break
        if nxt is None:
            raise EmptyPreimageError(
                f"no preimage for target position {k} (count {s}); "
                f"pending interval {current}"
            )
        if nxt[1] - nxt[0] < WIDTH_MIN:
            raise WidthUnderflowError(achieved_prefix=n - k,
                                      width=nxt[1] - nxt[0])
        current = nxt

    # final step: pull back once more so the counts sit on iterates 1..n;
    # the initial point may live on any monotone piece of [beta, alpha]
    beta, alpha = geometry.beta, geometry.alpha
    inside = sorted(w for w in geometry.wi if beta <= w <= alpha)
    edge_pieces = []
    w_star = geometry.w_star
    for a, b in [(beta, inside[0])] + [(inside[-1], alpha)]:
        if b - a <= 2 * EDGE_MARGIN:
            continue
        if a < w_star < b:
            edge_pieces.append(Piece(a, w_star, math.nan, True))
            edge_pieces.append(Piece(w_star, b, math.nan, False))
        else:
            edge_pieces.append(Piece(a, b, math.nan, b <= w_star))
    all_pieces = [p for p in pieces] + edge_pieces
    all_pieces.sort(key=lambda p: not p.increasing)
    for p in all_pieces:
        j = _preimage_in_piece(evaluate, p, current, n + 1)
        if j is not None and j[1] - j[0] >= WIDTH_MIN:
            return j
    raise EmptyPreimageError(
        f"no initial-condition piece maps onto {current}"
    )


def verify_target(params: ModelParams, geometry: ResetLineGeometry,
                  w0: float, target: SignatureTarget,
                  opts: FlowOptions = FlowOptions(),
                  equilibria: Optional[EquilibriumSet] = None) -> bool:
    """Forward-simulation oracle: counts of iterates 1..n match the target."""
    eq = equilibria if equilibria is not None else fixed_points(params)
    w = float(w0)
    w = phi(params, geometry, w, opts=opts, equilibria=eq).value
    for s in target.sequence:
        pv = phi(params, geometry, w, opts=opts, equilibria=eq)
        if pv.half_rotations / 2.0 != s:
            return False
        w = pv.value
    return True
