"""The limit finite-dimensional system pinning the tower parameters.

In the variables s_1 = d_1, s_i = d_i/d_{i-1} the system reads

    G_0(s, sigma, xi) = alpha a1 s_1^{n-2} phi(xi)
                        + a3 sum_{i=2..k} s_i^{(n-2)/2} g(sigma_i)
                        - a4 sum_{i=1..k} (2/(2i-1)) |ln s_i|  = 0,
    G_h(s_1, xi)      = (alpha/2) a2  d phi/d xi_h (xi) s_1^{n-2} = 0,

with phi the Robin function.  G_0 is a sum of per-layer balances that do
not couple in these variables: the solver brackets the sign change of each
balance on a log grid (the outermost layer balances the Robin term against
its log, the inner layers balance the interaction term against theirs) and
polishes with damped Newton away from the |ln s| kink at s = 1.  Each
balance is strictly increasing on (0, 1), so the first bracketed root is a
simple zero with positive slope (local degree +1); all bracketed roots are
reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .domain import BallDomain, find_robin_min
from .errors import ParameterError, SolvabilityError, SolverError
from .profiles import Dimension
from .quadrature import QuadSpec, const_a, g_sigma, tabulate_g

__all__ = [
    "ReducedConstants",
    "ReducedState",
    "eval_G",
    "eval_G_eps",
    "layer_balances",
    "bracket_roots",
    "solve_reduced",
    "jacobian_fd",
]


@dataclass
class ReducedConstants:
    """Coefficients and domain evaluators entering the reduced system."""

    dim: Dimension
    a1: float
    a2: float
    a3: float
    a4: float
    g: object                 # callable sigma -> float
    robin: object             # callable xi -> float
    robin_grad: object        # callable xi -> vector

    def __post_init__(self):
        if min(self.a1, self.a2, self.a3, self.a4) <= 0:
            raise ParameterError("all reduced-system coefficients must be positive")

    @classmethod
    def for_ball(cls, dom: BallDomain,
                 spec: QuadSpec | None = None) -> "ReducedConstants":
        """Quadrature-backed constants with the drift kernel cached per |sigma|."""
        dim = dom.dim
        cache: dict = {}

        def g(sigma):
            s = float(np.linalg.norm(np.atleast_1d(sigma)))
            key = round(s, 14)
            if key not in cache:
                cache[key] = g_sigma(dim, np.atleast_1d(sigma), spec)
            return cache[key]

        return cls(dim,
                   const_a(dim, 1, spec), const_a(dim, 2, spec),
                   const_a(dim, 3, spec), const_a(dim, 4, spec),
                   g, dom.robin, dom.robin_grad)


@dataclass
class ReducedState:
    """Unknowns of the reduced system together with its evaluation data."""

    dim: Dimension
    k: int
    s: np.ndarray                     # k positive scale ratios
    sigma: list                       # k-1 drift vectors (innermost drift fixed 0)
    xi: np.ndarray
    Gvalue: np.ndarray = field(default=None)
    jac: np.ndarray = field(default=None)
    # diagnostics
    all_roots: list = field(default_factory=list)   # bracketed roots per layer
    g_extremum: str = ""                            # observed extremum type of g
    jac_smin: float = float("nan")

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        if self.s.shape != (self.k,) or np.any(self.s <= 0):
            raise ParameterError("state needs k positive scale ratios")
        self.xi = np.asarray(self.xi, dtype=float)

    def sigma_full(self):
        """All k drifts with the innermost fixed to zero."""
        return list(self.sigma) + [np.zeros(self.dim.n)]

    @property
    def dbar(self) -> np.ndarray:
        return np.cumprod(self.s)


def layer_balances(state: ReducedState, consts: ReducedConstants) -> np.ndarray:
    """Per-layer balances whose sum is the scalar equation G_0.

    Layer 1:   alpha a1 s_1^{n-2} phi(xi) - 2 a4 |ln s_1|
    Layer i>1: a3 s_i^{(n-2)/2} g(sigma_i) - (2/(2i-1)) a4 |ln s_i|
    """
    dim = state.dim
    n = dim.n
    s = state.s
    sig = state.sigma_full()
    phi = consts.robin(state.xi)
    out = np.empty(state.k)
    out[0] = (dim.alpha * consts.a1 * s[0] ** (n - 2.0) * phi
              - 2.0 * consts.a4 * abs(np.log(s[0])))
    for i in range(2, state.k + 1):
        out[i - 1] = (consts.a3 * s[i - 1] ** ((n - 2.0) / 2.0)
                      * consts.g(sig[i - 1])
                      - (2.0 / (2.0 * i - 1.0)) * consts.a4
                      * abs(np.log(s[i - 1])))
    return out


def eval_G(state: ReducedState, consts: ReducedConstants) -> np.ndarray:
    """The (1+n)-vector [G_0, G_1..G_n] of the limit system."""
    if np.any(state.s <= 0):
        raise ParameterError("scale ratios must be positive")
    dim = state.dim
    G0 = float(np.sum(layer_balances(state, consts)))
    grad = np.asarray(consts.robin_grad(state.xi), dtype=float)
    Gh = (0.5 * dim.alpha * consts.a2 * grad
          * state.s[0] ** (dim.n - 2.0))
    return np.concatenate([[G0], Gh])


def eval_G_eps(state: ReducedState, consts: ReducedConstants,
               eps: float) -> np.ndarray:
    """Diagnostic eps-level evaluation of the projected equations.

    The first row carries the parameter-independent log term
    -(2 k^2/(n-2)^2) a4 eps |ln t| on top of t G_0; it shifts the residual
    but not the location of critical parameters, so it is reported only.
    """
    t = eps / np.log(eps) ** 2
    G = eval_G(state, consts)
    out = t * G
    n = state.dim.n
    out[0] -= (2.0 * state.k**2 / (n - 2.0) ** 2) * consts.a4 * eps \
        * abs(np.log(t))
    return out


def _balance_fn(i: int, state_proto, consts):
    """Scalar balance of layer i as a function of s_i (others fixed)."""
    dim = state_proto.dim
    n = dim.n
    if i == 1:
        phi = consts.robin(state_proto.xi)
        return lambda s: (dim.alpha * consts.a1 * s ** (n - 2.0) * phi
                          - 2.0 * consts.a4 * abs(np.log(s)))
    gval = consts.g(state_proto.sigma_full()[i - 1])
    return lambda s: (consts.a3 * s ** ((n - 2.0) / 2.0) * gval
                      - (2.0 / (2.0 * i - 1.0)) * consts.a4 * abs(np.log(s)))


def bracket_roots(fn, lo: float = 1e-6, hi: float = 1e6,
                  points: int = 97) -> list:
    """All sign changes of ``fn`` on a log grid of [lo, hi], polished by brentq."""
    grid = np.geomspace(lo, hi, points)
    vals = np.array([fn(s) for s in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(float(brentq(fn, a, b, xtol=1e-300, rtol=8.9e-16)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def solve_reduced(dim: Dimension, k: int, consts: ReducedConstants,
                  domain: BallDomain, *, eta: float = 0.1,
                  tol: float = 1e-12) -> ReducedState:
    """Solve the limit system: Robin minimiser, drift extremiser, scale roots.

    Pipeline: the concentration point is the Robin minimiser (driving the
    gradient rows to zero), the drifts sit at the critical point sigma = 0
    of the rotation-invariant kernel g (whose observed extremum type is
    recorded), and each scale ratio is bracketed by the sign change of its
    layer balance on a log grid, then polished by damped Newton on the full
    per-layer system, branch-locked away from the |ln s| kink at s = 1.
    Of several bracketed roots the smallest is returned (the (0,1) root is
    unique and has positive slope, hence nonzero local degree); all roots
    are kept in ``all_roots``.
    """
    if k < 1:
        raise ParameterError("tower depth k must be >= 1")
    half = (domain.radius - eta) / np.sqrt(dim.n)
    box = (domain.center - half, domain.center + half)
    xi = find_robin_min(domain, box)

    _, g_kind = tabulate_g(dim, np.linspace(0.0, 3.0, 7))
    sigma = [np.zeros(dim.n) for _ in range(k - 1)]

    proto = ReducedState(dim, k, np.ones(k), sigma, xi)
    s = np.empty(k)
    all_roots = []
    for i in range(1, k + 1):
        fn = _balance_fn(i, proto, consts)
        roots = bracket_roots(fn)
        if not roots:
            raise SolvabilityError(
                f"no sign change of the layer-{i} balance in [1e-6, 1e6]")
        all_roots.append(roots)
        s[i - 1] = roots[0]

    # damped Newton polish on the per-layer system (diagonal Jacobian),
    # locking each s_i to its side of the |ln s| kink
    state = ReducedState(dim, k, s, sigma, xi)
    for _ in range(100):
        F = layer_balances(state, consts)
        if float(np.max(np.abs(F))) < tol:
            break
        h = 1e-7
        s = state.s
        deriv = np.empty(k)
        for i in range(k):
            hh = min(h * s[i], 0.4 * abs(s[i] - 1.0) + 1e-14)
            sp, sm = s.copy(), s.copy()
            sp[i] += hh
            sm[i] -= hh
            deriv[i] = ((layer_balances(ReducedState(dim, k, sp, sigma, xi),
                                        consts)[i]
                         - layer_balances(ReducedState(dim, k, sm, sigma, xi),
                                          consts)[i]) / (2.0 * hh))
        step = -F / deriv
        lam = 1.0
        base = float(np.max(np.abs(F)))
        while lam > 2.0**-40:
            trial = s + lam * step
            # reject steps crossing the kink or leaving the positive axis
            if np.all(trial > 0) and np.all((trial - 1.0) * (s - 1.0) > 0):
                Ft = layer_balances(
                    ReducedState(dim, k, trial, sigma, xi), consts)
                if float(np.max(np.abs(Ft))) < base:
                    state = ReducedState(dim, k, trial, sigma, xi)
                    break
            lam *= 0.5
        else:
            raise SolverError("scale polish stalled", trace=list(F))
    state.Gvalue = eval_G(state, consts)
    if float(np.max(np.abs(state.Gvalue))) > 1e-10:
        raise SolverError(
            f"reduced residual {np.max(np.abs(state.Gvalue)):.3e} above 1e-10",
            trace=list(state.Gvalue))
    state.all_roots = all_roots
    state.g_extremum = g_kind
    state.jac = jacobian_fd(state, consts)
    state.jac_smin = float(np.linalg.svd(state.jac, compute_uv=False)[-1])
    return state


def jacobian_fd(state: ReducedState, consts: ReducedConstants,
                rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of eval_G in (s_1..s_k, xi_1..xi_n).

    Steps in s_i stay on one side of the |ln s_i| kink; a state too close to
    s_i = 1 for the requested step is rejected.
    """
    dim = state.dim
    k, n = state.k, dim.n
    cols = k + n
    out = np.empty((1 + n, cols))
    for j in range(k):
        h = rel_step * state.s[j]
        if abs(state.s[j] - 1.0) < 2.0 * h:
            raise ParameterError(
                f"s_{j + 1} = {state.s[j]} sits on the |ln s| kink; "
                "finite differences would straddle it")
        sp, sm = state.s.copy(), state.s.copy()
        sp[j] += h
        sm[j] -= h
        Gp = eval_G(ReducedState(dim, k, sp, state.sigma, state.xi), consts)
        Gm = eval_G(ReducedState(dim, k, sm, state.sigma, state.xi), consts)
        out[:, j] = (Gp - Gm) / (2.0 * h)
    for j in range(n):
        h = rel_step * max(1.0, abs(state.xi[j]))
        if h == 0.0:
            raise ParameterError("finite-difference step underflow")
        xp, xm = state.xi.copy(), state.xi.copy()
        xp[j] += h
        xm[j] -= h
        Gp = eval_G(ReducedState(dim, k, state.s, state.sigma, xp), consts)
        Gm = eval_G(ReducedState(dim, k, state.s, state.sigma, xm), consts)
        out[:, k + j] = (Gp - Gm) / (2.0 * h)
    return out
