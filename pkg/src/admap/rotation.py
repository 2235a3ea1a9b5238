"""Lift of the adaptation map, rotation numbers/intervals, regime labels,
and rotation-to-signature conversion."""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .adaptation import (
    SampledAdaptationMap,
    Signature,
    find_fixed_points,
)
from .errors import (
    BisectionFailureError,
    ConditionViolatedError,
    InvalidRationalError,
    NotMonotoneError,
)

N_DEFAULT = 10_000
Q_MAX = 100
ENVELOPE_SAMPLES = 10_000
ENVELOPE_OFFSET_MIN = 1e-9


def _snap(rho: float, error_bound: float, q_max: int = Q_MAX
          ) -> Optional[Tuple[int, int]]:
    frac = Fraction(rho).limit_denominator(q_max)
    if abs(float(frac) - rho) <= error_bound:
        return frac.numerator, frac.denominator
    return None


@dataclass(frozen=True)
class RotationResult:
    kind: str                       # "number" | "interval"
    rho: Optional[float]
    a_psi: float
    b_psi: float
    rational: Optional[Tuple[int, int]]
    iterations: int
    error_bound: float

    def to_dict(self):
        out = {
            "kind": self.kind,
            "N": self.iterations,
            "errorBound": self.error_bound,
        }
        if self.kind == "number":
            out["rho"] = self.rho
        out["a"] = self.a_psi
        out["b"] = self.b_psi
        if self.rational is not None:
            out["p"], out["q"] = self.rational
        return out


@dataclass(frozen=True)
class RegimeLabel:
    conditions: Dict[str, bool]
    region: str                     # A|B|C|D|E|other
    witnesses: Dict[str, float]
    continuous_lift: bool = False   # Phi(alpha) == Phi(beta) boundary case

    def to_dict(self):
        return {
            "conditions": self.conditions,
            "region": self.region,
            "witnesses": self.witnesses,
            "continuousLift": self.continuous_lift,
        }


@dataclass
class Lift:
    base: SampledAdaptationMap
    theta: float
    w1: float
    alpha: float
    beta: float
    phi_alpha: float
    phi_beta: float
    jump_sign: int
    _phi: Callable[[float], float] = field(repr=False, default=None)

    def _base_value(self, r: float) -> float:
        # r in (beta, alpha]
        if r == self.w1:
            return self.alpha
        if r < self.w1:
            return float(self._phi(r))
        return float(self._phi(r)) + self.theta

    def __call__(self, x: float) -> float:
        k = math.ceil((x - self.alpha) / self.theta)
        r = x - k * self.theta
        # guard against roundoff pushing r just outside (beta, alpha]
        if r <= self.beta:
            r += self.theta
            k -= 1
        elif r > self.alpha:
            r -= self.theta
            k += 1
        return self._base_value(r) + k * self.theta

    @property
    def monotone(self) -> bool:
        return self.jump_sign >= 0

    def iterate(self, x0: float, n: int) -> float:
        x = float(x0)
        for _ in range(n):
            x = self(x)
        return x


def _condition_values(smap: SampledAdaptationMap):
    geo = smap.geometry
    alpha, beta = geo.alpha, geo.beta
    interior = sorted(wi for wi in geo.wi if beta < wi < alpha)
    w1 = interior[0] if interior else None
    above = sorted(wi for wi in geo.wi if wi > (w1 if w1 is not None else beta))
    w2 = above[0] if len(interior) <= 1 and above else (
        interior[1] if len(interior) > 1 else math.inf
    )
    return alpha, beta, w1, w2, interior


def classify_regime(smap: SampledAdaptationMap) -> RegimeLabel:
    """Flags (C1)-(C4') and region A-E with the numeric comparisons used."""
    geo = smap.geometry
    alpha, beta, w1, w2, interior = _condition_values(smap)
    phi_a = float(smap.evaluator(alpha))
    phi_b = float(smap.evaluator(beta))
    w_star = geo.w_star
    c1 = (w1 is not None and len(interior) == 1
          and beta < w1 < alpha < w2)
    c2 = alpha < w_star
    c2p = (w1 is not None) and (w1 < w_star <= alpha)
    c3 = phi_b >= beta and phi_a >= beta
    c4 = c1 and c3 and c2 and phi_a <= phi_b
    c4p = c1 and c3 and (c2 or c2p) and phi_a > phi_b

    region = "other"
    if c4 and w1 is not None:
        if phi_b < w1:
            region = "A"
        elif phi_a < w1 < phi_b:
            region = "B"
        elif w1 < phi_a:
            region = "C"
    elif c4p:
        region = "D" if c2 else ("E" if c2p else "other")

    witnesses = {
        "beta": beta, "w1": w1 if w1 is not None else math.nan,
        "alpha": alpha, "w2": w2, "wStar": w_star,
        "phiAlpha": phi_a, "phiBeta": phi_b,
    }
    return RegimeLabel(
        conditions={"C1": c1, "C2": c2, "C2'": c2p, "C3": c3,
                    "C4": c4, "C4'": c4p},
        region=region,
        witnesses=witnesses,
        continuous_lift=(phi_a == phi_b),
    )


def build_lift(smap: SampledAdaptationMap) -> Lift:
    """Lift of Phi on [beta, alpha], extended to the line by periodicity.

    Requires C1 (single interior discontinuity) and C3 (images of the
    endpoints not below beta)."""
    alpha, beta, w1, w2, interior = _condition_values(smap)
    theta = alpha - beta
    if w1 is None or len(interior) != 1 or not (beta < w1 < alpha < w2):
        raise ConditionViolatedError("C1", {
            "beta": beta, "alpha": alpha, "interiorDiscontinuities": interior,
            "w2": w2,
        })
    phi_a = float(smap.evaluator(alpha))
    phi_b = float(smap.evaluator(beta))
    if not (phi_b >= beta and phi_a >= beta):
        raise ConditionViolatedError("C3", {
            "beta": beta, "phiBeta": phi_b, "phiAlpha": phi_a,
        })
    jump = phi_b - phi_a
    return Lift(
        base=smap, theta=theta, w1=w1, alpha=alpha, beta=beta,
        phi_alpha=phi_a, phi_beta=phi_b,
        jump_sign=(0 if jump == 0 else int(math.copysign(1, jump))),
        _phi=smap.evaluator,
    )


def _rho_of_callable(psi, theta, x0, n):
    x = float(x0)
    for _ in range(n):
        x = psi(x)
    return (x - x0) / (n * theta)


def rotation_number(lift: Lift, w0: Optional[float] = None,
                    n: int = N_DEFAULT) -> RotationResult:
    """(Psi^N(w0) - w0) / (N theta) with a 1/N error bound and a
    continued-fraction rational snap.  Requires a non-decreasing lift."""
    if not lift.monotone:
        raise NotMonotoneError(
            "lift has a negative jump (overlapping case); "
            "use rotation_interval"
        )
    if n < 1:
        raise ValueError("N must be >= 1")
    if w0 is None:
        w0 = 0.5 * (lift.beta + lift.w1)
    rho = _rho_of_callable(lift, lift.theta, w0, n)
    bound = 1.0 / n
    return RotationResult(
        kind="number", rho=rho, a_psi=rho, b_psi=rho,
        rational=_snap(rho, bound), iterations=n, error_bound=bound,
    )


@dataclass(frozen=True)
class Envelope:
    """Monotone piecewise-linear interpolant on one period, extended
    periodically."""

    grid: np.ndarray      # in (beta, alpha]
    values: np.ndarray    # non-decreasing
    theta: float
    alpha: float

    def __call__(self, x):
        k = np.ceil((np.asarray(x, dtype=float) - self.alpha) / self.theta)
        r = x - k * self.theta
        out = np.interp(r, self.grid, self.values) + k * self.theta
        return float(out) if np.ndim(x) == 0 else out


def _period_grid(lift: Lift, n: int = ENVELOPE_SAMPLES) -> np.ndarray:
    beta, alpha, w1 = lift.beta, lift.alpha, lift.w1
    eps = ENVELOPE_OFFSET_MIN
    base = np.linspace(beta + eps, alpha, n)
    offs = np.geomspace(max((alpha - beta) * 1e-2, eps), eps, 16)
    extra = np.concatenate([w1 - offs, w1 + offs, [w1], alpha - offs,
                            beta + offs])
    g = np.unique(np.concatenate([base, extra]))
    return g[(g > beta) & (g <= alpha)]


def envelopes(lift: Lift, n: int = ENVELOPE_SAMPLES) -> Tuple[Envelope, Envelope]:
    """Largest non-decreasing minorant and smallest non-decreasing majorant
    of the lift, from running extrema on a dense one-period sampling."""
    g = _period_grid(lift, n)
    vals = np.array([lift(x) for x in g])
    suffix_min = np.minimum.accumulate(vals[::-1])[::-1]
    prefix_max = np.maximum.accumulate(vals)
    lo = np.minimum(suffix_min, lift.theta + vals.min())
    hi = np.maximum(prefix_max, vals.max() - lift.theta)
    # enforce exact monotonicity after the wrap adjustments
    lo = np.maximum.accumulate(lo)
    hi = np.maximum.accumulate(hi)
    return (
        Envelope(grid=g, values=lo, theta=lift.theta, alpha=lift.alpha),
        Envelope(grid=g, values=hi, theta=lift.theta, alpha=lift.alpha),
    )


def rotation_interval(lift: Lift, n: int = N_DEFAULT,
                      n_samples: int = ENVELOPE_SAMPLES) -> RotationResult:
    """[a(Psi), b(Psi)] as rotation numbers of the two monotone envelopes."""
    psi_l, psi_r = envelopes(lift, n_samples)
    w0 = 0.5 * (lift.beta + lift.w1)
    a = _rho_of_callable(psi_l, lift.theta, w0, n)
    b = _rho_of_callable(psi_r, lift.theta, w0, n)
    bound = 1.0 / n
    rational = None
    if b - a <= 2 * bound:
        rational = _snap(0.5 * (a + b), bound)
    return RotationResult(
        kind="interval", rho=None, a_psi=a, b_psi=b,
        rational=rational, iterations=n, error_bound=bound,
    )


def signature_from_rho(p: int, q: int) -> Signature:
    """Predicted MMBO signature for rotation number p/q: block lengths are
    the cyclic gaps between the indices l in {1,...,q-1} with
    (l p) mod q >= q - p; every block carries one small oscillation."""
    if q <= 0 or p < 0 or p > q:
        raise InvalidRationalError(f"need 0 <= p <= q, q >= 1; got {p}/{q}")
    if p > 0 and math.gcd(p, q) != 1:
        raise InvalidRationalError(f"{p}/{q} is not in lowest terms")
    if p == 0:
        return Signature(blocks=(), periodic=1)          # pure spiking
    if p == q:
        return Signature(blocks=((1, 1),), periodic=1)   # rho = 1
    ls = [l for l in range(1, q) if (l * p) % q >= q - p]
    lengths = [ls[i + 1] - ls[i] for i in range(len(ls) - 1)]
    lengths.append(ls[0] + q - ls[-1])
    return Signature(blocks=tuple((L, 1) for L in lengths), periodic=len(ls))


def detect_period2(smap: SampledAdaptationMap, tol: float = 1e-13):
    """Period-2 orbit straddling w1 under Phi(alpha) < w1 < Phi(beta).

    Returns (True, (w, Phi(w))) or (False, None) when the precondition
    inequalities fail."""
    label = classify_regime(smap)
    if not label.conditions["C4"]:
        raise ConditionViolatedError("C4", label.witnesses)
    w1 = label.witnesses["w1"]
    phi_a, phi_b = label.witnesses["phiAlpha"], label.witnesses["phiBeta"]
    if not (phi_a < w1 < phi_b):
        return False, None
    f = smap.evaluator

    def g(w):
        return float(f(float(f(w)))) - w

    a = label.witnesses["beta"] + 1e-12
    b = w1 - 1e-9
    ga, gb = g(a), g(b)
    if ga * gb > 0:
        raise BisectionFailureError(
            f"no sign change for Phi^2(w)-w on ({a}, {b}): g={ga:.3e},{gb:.3e}"
        )
    while b - a > tol:
        m = 0.5 * (a + b)
        gm = g(m)
        if gm == 0.0:
            a = b = m
            break
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    w = 0.5 * (a + b)
    return True, (w, float(f(w)))


def fixed_point_regime(smap: SampledAdaptationMap) -> Dict[str, object]:
    """Fixed points of Phi on both continuity pieces of [beta, alpha] and
    the resulting orbit-structure label."""
    label = classify_regime(smap)
    if not (label.conditions["C1"] and label.conditions["C3"]):
        raise ConditionViolatedError("C1&C3", label.witnesses)
    beta = label.witnesses["beta"]
    alpha = label.witnesses["alpha"]
    w1 = label.witnesses["w1"]
    f = smap.evaluator
    low = find_fixed_points(f, beta, w1 - 1e-9)
    high = find_fixed_points(f, w1 + 1e-9, alpha)

    # max of Phi on the upper piece: Phi decreasing above w*, increasing
    # below, so sample densely
    g = np.linspace(w1 + 1e-9, alpha, 2001)
    phi_high_max = max(float(f(x)) for x in g)

    if low and high:
        kind = "arbitrary-periods"
        note = "fixed points on both sides of w1: periodic orbits of arbitrary period, MMOs"
    elif low and not high:
        wf = max(low)
        if phi_high_max < wf:
            kind = "no-mmo"
            note = "unique rotation number 0; orbits converge to spiking fixed point"
        else:
            kind = "mixed"
            note = "rho=0 orbits coexist with orbits visiting (w1, alpha]"
    elif high and not low:
        kind = "trivial-rho-1"
        note = "no fixed point below w1; smallest fixed point above w1; asymptotic signature 1^s"
    else:
        kind = "none"
        note = "no fixed point on [beta, alpha]"
    return {
        "kind": kind,
        "note": note,
        "fixedPointsBelow": low,
        "fixedPointsAbove": high,
        "phiMaxUpperPiece": phi_high_max,
        "region": label.region,
        "conditions": label.conditions,
    }
