"""Subthreshold vector field: parameters, equilibria, nullclines.

The continuous dynamics are

    dv/dt = F(v) - w + I
    dw/dt = eps * (b*v - w)

with the quartic nonlinearity F(v) = v**4 + a*v (a is the linear
coefficient; some sources write F = v**4 + 2*c*v with c = a/2, which is the
same map).  After a spike, v is reset to vR and w to gamma*w + d.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateEquilibriumError, NoEquilibriaError

ROOT_SCAN_LO = -10.0
ROOT_SCAN_HI = 10.0
ROOT_SCAN_STEP = 1e-3
ROOT_TOL = 1e-14
DEGENERATE_DET_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Continuous-dynamics and reset parameters.

    `a` is the linear coefficient of the quartic F(v) = v**4 + a*v.
    Custom nonlinearities can be plugged in via `f` / `fp` (value and
    derivative); the quartic is the default and the only one exercised here.
    """

    a: float = 0.2
    eps: float = 0.1
    b: float = 1.0
    I: float = 0.1175
    vR: float = 0.1158
    gamma: float = 1.0
    d: float = 0.0
    f: Optional[Callable[[float], float]] = field(default=None, compare=False)
    fp: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")

    def F(self, v):
        if self.f is not None:
            return self.f(v)
        return v ** 4 + self.a * v

    def Fp(self, v):
        if self.fp is not None:
            return self.fp(v)
        return 4.0 * v ** 3 + self.a

    def field_at(self, v, w):
        """Right-hand side (dv/dt, dw/dt)."""
        return self.F(v) - w + self.I, self.eps * (self.b * v - w)

    def jacobian(self, v):
        return np.array([[self.Fp(v), -1.0], [self.eps * self.b, -self.eps]])

    def with_reset(self, gamma=None, d=None):
        """Copy with new reset parameters; subthreshold part unchanged."""
        return ModelParams(
            a=self.a, eps=self.eps, b=self.b, I=self.I, vR=self.vR,
            gamma=self.gamma if gamma is None else gamma,
            d=self.d if d is None else d,
            f=self.f, fp=self.fp,
        )

    @property
    def w_star(self):
        """Reset-line / v-nullcline intersection F(vR) + I."""
        return self.F(self.vR) + self.I

    @property
    def w_star_star(self):
        """Reset-line / w-nullcline intersection b*vR."""
        return self.b * self.vR


@dataclass(frozen=True)
class SaddleEigenData:
    mu: float                 # contraction rate, stable eigenvalue is -mu
    nu: float                 # expansion rate
    e_stable: np.ndarray      # unit eigenvector of -mu
    e_unstable: np.ndarray    # unit eigenvector of nu

    @property
    def xi(self):
        return self.mu / self.nu


@dataclass(frozen=True)
class EquilibriumSet:
    v_minus: float
    w_minus: float
    v_plus: float
    w_plus: float
    saddle_eigen: SaddleEigenData
    focus_eigen: complex      # eigenvalue with positive imaginary part

    @property
    def focus(self):
        return np.array([self.v_minus, self.w_minus])

    @property
    def saddle(self):
        return np.array([self.v_plus, self.w_plus])


def nullcline_points(params: ModelParams, which: str, v: float) -> float:
    """w value of the requested nullcline at voltage v."""
    if which == "v-nullcline":
        return params.F(v) + params.I
    if which == "w-nullcline":
        return params.b * v
    raise ValueError(f"unknown nullcline {which!r}")


def _equilibrium_roots(params: ModelParams):
    """All real roots of F(v) + I - b*v on the scan window, by bisection."""
    vs = np.arange(ROOT_SCAN_LO, ROOT_SCAN_HI + ROOT_SCAN_STEP, ROOT_SCAN_STEP)
    g = params.F(vs) + params.I - params.b * vs
    roots = []
    sign_change = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    for i in sign_change:
        lo, hi = vs[i], vs[i + 1]
        glo = g[i]
        while hi - lo > ROOT_TOL:
            mid = 0.5 * (lo + hi)
            gm = params.F(mid) + params.I - params.b * mid
            if gm == 0.0:
                lo = hi = mid
                break
            if np.sign(gm) == np.sign(glo):
                lo, glo = mid, gm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    exact = np.nonzero(g == 0.0)[0]
    roots.extend(vs[exact])
    return sorted(roots)


def _unit_eigenvector(J, lam):
    # kernel of J - lam*I for a 2x2 matrix
    row = J - lam * np.eye(2)
    if abs(row[0, 0]) + abs(row[0, 1]) > abs(row[1, 0]) + abs(row[1, 1]):
        v = np.array([-row[0, 1], row[0, 0]])
    else:
        v = np.array([-row[1, 1], row[1, 0]])
    return v / np.hypot(*v)


def fixed_points(params: ModelParams) -> EquilibriumSet:
    """Locate and classify the unstable focus and the saddle.

    Raises NoEquilibriaError unless there are exactly two roots, the left one
    an unstable focus and the right one a saddle; DegenerateEquilibriumError
    near a fold (|det J| below tolerance).
    """
    roots = _equilibrium_roots(params)
    if len(roots) != 2:
        raise NoEquilibriaError(
            f"expected 2 equilibria, found {len(roots)} at {roots}"
        )
    v_minus, v_plus = roots
    for v in roots:
        J = params.jacobian(v)
        if abs(np.linalg.det(J)) < DEGENERATE_DET_TOL:
            raise DegenerateEquilibriumError(f"near-fold equilibrium at v={v}")

    Jm = params.jacobian(v_minus)
    trm, detm = np.trace(Jm), np.linalg.det(Jm)
    discm = trm ** 2 - 4 * detm
    if not (detm > 0 and trm > 0 and discm < 0):
        raise NoEquilibriaError(
            f"left equilibrium is not an unstable focus "
            f"(tr={trm}, det={detm}, disc={discm})"
        )
    focus_eigen = complex(0.5 * trm, 0.5 * np.sqrt(-discm))

    Jp = params.jacobian(v_plus)
    trp, detp = np.trace(Jp), np.linalg.det(Jp)
    if not detp < 0:
        raise NoEquilibriaError(
            f"right equilibrium is not a saddle (tr={trp}, det={detp})"
        )
    disc = np.sqrt(trp ** 2 - 4 * detp)
    lam_plus = 0.5 * (trp + disc)
    lam_minus = 0.5 * (trp - disc)
    eig = SaddleEigenData(
        mu=-lam_minus,
        nu=lam_plus,
        e_stable=_unit_eigenvector(Jp, lam_minus),
        e_unstable=_unit_eigenvector(Jp, lam_plus),
    )
    return EquilibriumSet(
        v_minus=v_minus,
        w_minus=params.F(v_minus) + params.I,
        v_plus=v_plus,
        w_plus=params.F(v_plus) + params.I,
        saddle_eigen=eig,
        focus_eigen=focus_eigen,
    )
