"""Radial discretisation of the Dirichlet problem on a ball, damped Newton
with a finite-dimensional globalisation stage, the discrete orthogonal
correction, scale extraction, and parameter sweeps.

Discretisation.  Piecewise-linear elements on a geometrically graded radial
grid with the weight r^{n-1}; the stiffness matrix is assembled from exact
cell integrals of r^{n-1} and the load uses lumped weights.  The lumped
weight of the centre node is chosen so that the strong form of the centre
row is consistent with -n u''(0) (the plain element lump is not), while the
stiffness matrix itself stays the exact symmetric element matrix.  With
this pairing, Galerkin solutions satisfy the discrete integration-by-parts
identity u.S u = sum_i w_i u_i f_i exactly.

Globalisation.  At moderate eps the tower ansatz starts a long way from the
discrete solution along the nearly-neutral dilation directions, where plain
damped Newton creeps.  The solve pipeline therefore first moves the
dilation factors by zeroing the multipliers of the orthogonal-correction
decomposition (a small root find) and only then polishes with Newton.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded, solveh_banded

from .domain import BallDomain
from .errors import (NonContractionError, ParameterError, ResolutionError,
                     SolverError, StructureError)
from .profiles import Dimension, f_eps, f_eps_prime
from .projection import project_bubble_radial, project_psi0_radial

__all__ = [
    "RadialGrid",
    "RadialSolution",
    "RadialOperator",
    "geometric_grid",
    "apply_radial_laplacian",
    "newton_solve",
    "LSResult",
    "ls_correction",
    "extract_scales",
    "solve_from_tower",
    "sweep_epsilon",
]


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Increasing nodes from r=0 to the ball radius.

    ``nodes[0]`` must be exactly 0 (symmetry row) and the last node is the
    Dirichlet boundary.
    """

    nodes: np.ndarray
    per_decade: float = float("nan")

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ParameterError("grid must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", nodes)

    def __len__(self):
        return len(self.nodes)

    def nodes_below(self, scale: float) -> int:
        return int(np.sum(self.nodes[1:] < scale))

    def require_resolves(self, scales, min_nodes: int = 10) -> None:
        for mu in np.atleast_1d(scales):
            if self.nodes_below(mu) < min_nodes:
                raise ResolutionError(
                    f"grid has {self.nodes_below(mu)} nodes below scale "
                    f"{mu:.3e}; at least {min_nodes} required")


def geometric_grid(radius: float, rmin: float, per_decade: int = 40) -> RadialGrid:
    """Geometrically graded grid with a uniform core.

    Nodes run geometrically from ``rmin`` to ``radius``; the core [0, rmin]
    is filled with uniform cells matching the first geometric spacing, so
    the cell-size ratio stays smooth everywhere (an abrupt jump at the first
    node would cost the stencil its second-order consistency there).
    """
    if not (0 < rmin < radius):
        raise ParameterError("need 0 < rmin < radius")
    decades = np.log10(radius / rmin)
    m = max(int(np.ceil(decades * per_decade)), 4)
    r = rmin * (radius / rmin) ** np.linspace(0.0, 1.0, m + 1)
    q = (radius / rmin) ** (1.0 / m)
    m_core = max(int(np.round(1.0 / (q - 1.0))), 1)
    core = np.linspace(0.0, rmin, m_core + 1)[:-1]
    return RadialGrid(np.concatenate([core, r]), per_decade=per_decade)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

class RadialOperator:
    """Stiffness/weight assembly for one (dimension, grid) pair."""

    def __init__(self, dim: Dimension, grid: RadialGrid):
        self.dim = dim
        self.grid = grid
        r = grid.nodes
        n = dim.n
        om = dim.sphere_area
        h = np.diff(r)
        cell = (r[1:] ** n - r[:-1] ** n) / n          # exact ∫_cell r^{n-1} dr
        self.kcell = om * cell / h**2                  # element stiffness
        # exact lumped weights ∫ φ_i r^{n-1} dr
        ra, rb = r[:-1], r[1:]
        rising = ((rb ** (n + 1) - ra ** (n + 1)) / (n + 1)
                  - ra * (rb**n - ra**n) / n) / h
        falling = (rb * (rb**n - ra**n) / n
                   - (rb ** (n + 1) - ra ** (n + 1)) / (n + 1)) / h
        w = np.empty(len(r))
        w[0] = om * falling[0]
        w[1:-1] = om * (rising[:-1] + falling[1:])
        w[-1] = om * rising[-1]
        # centre-row consistency: (S u)_0 / w_0 -> -n u''(0) for smooth data
        w[0] = self.kcell[0] * h[0] ** 2 / (2.0 * n)
        self.w = w
        N = len(r) - 1
        self._hb = np.zeros((2, N))                    # for solveh_banded
        diag = np.empty(N)
        diag[0] = self.kcell[0]
        diag[1:] = self.kcell[:-1] + self.kcell[1:]
        self._hb[0, 1:] = -self.kcell[: N - 1]
        self._hb[1, :] = diag
        self._sdiag = diag

    # -- linear algebra ------------------------------------------------------

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        """S u on all nodes (u includes the boundary node)."""
        flux = self.kcell * np.diff(u)
        out = np.empty_like(u)
        out[0] = -flux[0]
        out[1:-1] = flux[:-1] - flux[1:]
        out[-1] = flux[-1]
        return out

    def strong_apply(self, u: np.ndarray) -> np.ndarray:
        """Pointwise discrete (-Laplacian) with an identity Dirichlet row."""
        out = self.stiffness_apply(u)
        out[:-1] /= self.w[:-1]
        out[-1] = u[-1]
        return out

    def poisson_solve(self, rhs_interior: np.ndarray) -> np.ndarray:
        """Solve S u = W rhs with zero Dirichlet data; returns all nodes."""
        free = solveh_banded(self._hb, self.w[:-1] * rhs_interior, lower=False)
        return np.concatenate([free, [0.0]])

    def stiffness_solve(self, load_free: np.ndarray) -> np.ndarray:
        """Solve S u = load on the free nodes (load already weighted)."""
        return solveh_banded(self._hb, load_free, lower=False)

    def jacobian_solve(self, fprime: np.ndarray, rhs_free: np.ndarray) -> np.ndarray:
        """Solve (S - W diag(fprime)) delta = rhs on the free nodes."""
        N = len(self.grid) - 1
        ab = np.zeros((3, N))
        ab[0, 1:] = -self.kcell[: N - 1]
        ab[1, :] = self._sdiag - self.w[:-1] * fprime[:-1]
        ab[2, :-1] = -self.kcell[: N - 1]
        return solve_banded((1, 1), ab, rhs_free)

    # -- norms ----------------------------------------------------------------

    def h1_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Energy inner product of nodal fields (zero boundary assumed)."""
        return float(np.dot(self.kcell * np.diff(u), np.diff(v)))

    def h1_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(self.h1_inner(u, u), 0.0)))

    def l2w(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(self.w, u * v))

    def dual_norm(self, residual_interior: np.ndarray) -> float:
        """Energy-dual norm of a strong residual given on the free nodes."""
        load = self.w[:-1] * residual_interior
        z = self.stiffness_solve(load)
        return float(np.sqrt(max(np.dot(load, z), 0.0)))


def apply_radial_laplacian(dim: Dimension, grid: RadialGrid,
                           values: np.ndarray) -> np.ndarray:
    """Pointwise discrete radial -Laplacian, -u'' - ((n-1)/r) u'.

    Interior rows use the three-point stencil on the nonuniform grid (exact
    for quadratics), the centre row enforces the symmetry condition u'(0)=0
    through a ghost node, giving -n u''(0), and the last row is the
    Dirichlet identity.  This is the pointwise operator used for stencil
    verification; the Galerkin pair of :class:`RadialOperator` drives the
    solver and all energy computations.
    """
    u = np.asarray(values, dtype=float)
    r = grid.nodes
    n = dim.n
    out = np.empty_like(u)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    denom = hm * hp * (hm + hp)
    upp = 2.0 * (hp * u[:-2] - (hm + hp) * u[1:-1] + hm * u[2:]) / denom
    up = (-hp**2 * u[:-2] + (hp**2 - hm**2) * u[1:-1] + hm**2 * u[2:]) / denom
    out[1:-1] = -upp - (n - 1.0) / r[1:-1] * up
    out[0] = -2.0 * n * (u[1] - u[0]) / r[1] ** 2
    out[-1] = u[-1]
    return out


# ---------------------------------------------------------------------------
# Newton solver
# ---------------------------------------------------------------------------

@dataclass
class RadialSolution:
    grid: RadialGrid
    values: np.ndarray
    eps: float
    residual: float
    converged: bool
    newton_iters: int
    scales: list = field(default_factory=list)


def newton_solve(dom: BallDomain, grid: RadialGrid, eps: float,
                 initial: np.ndarray, *, max_iter: int = 80,
                 raise_on_fail: bool = True) -> RadialSolution:
    """Damped Newton for the strong system  -Δ_h u = f_eps(u),  u(R)=0.

    Converged iff ||F||_inf < 1e-9 ||f_eps(u)||_inf + 1e-12 with F the
    strong residual.  The Armijo backtracking works on the l2 norm of the
    strong residual; a failed line search or exhausted budget raises
    :class:`SolverError` carrying the residual trace (or returns the
    non-converged state when ``raise_on_fail`` is false).
    """
    dim = dom.dim
    op = RadialOperator(dim, grid)
    u = np.asarray(initial, dtype=float).copy()
    u[-1] = 0.0

    def strong_residual(u):
        out = op.stiffness_apply(u)[:-1] - op.w[:-1] * f_eps(dim, u, eps)[:-1]
        return out / op.w[:-1]

    F = strong_residual(u)
    trace = []
    it = 0
    for it in range(max_iter):
        res = float(np.max(np.abs(F)))
        tol = 1e-9 * float(np.max(np.abs(f_eps(dim, u, eps)))) + 1e-12
        trace.append(res)
        if res < tol:
            return RadialSolution(grid, u, eps, res, True, it)
        fp = f_eps_prime(dim, u, eps)
        delta = op.jacobian_solve(fp, -F * op.w[:-1])
        base = float(np.linalg.norm(F))
        lam, stepped = 1.0, False
        while lam >= 2.0**-30:
            ut = u.copy()
            ut[:-1] = u[:-1] + lam * delta
            Ft = strong_residual(ut)
            if float(np.linalg.norm(Ft)) <= (1.0 - 0.25 * lam) * base:
                u, F, stepped = ut, Ft, True
                break
            lam *= 0.5
        if not stepped:
            break
    res = float(np.max(np.abs(F)))
    if raise_on_fail:
        raise SolverError(
            f"Newton did not converge after {it + 1} iterations "
            f"(residual {res:.3e})", trace=trace)
    return RadialSolution(grid, u, eps, res, False, it + 1)


# ---------------------------------------------------------------------------
# discrete orthogonal correction
# ---------------------------------------------------------------------------

@dataclass
class LSResult:
    phi: np.ndarray            # nodal correction, boundary node included
    c: np.ndarray              # multipliers of the projected dilation modes
    phi_norm: float            # energy norm of phi
    iterations: int
    converged: bool
    update_ratios: list
    orthogonality: np.ndarray  # pairings <phi, P psi_i> (should be ~0)


def _tower_nodal(dom: BallDomain, r: np.ndarray, params) -> np.ndarray:
    vals = np.zeros_like(r)
    for b in params:
        vals += b.sign * project_bubble_radial(dom, r, b.mu)
    return vals


def ls_correction(dom: BallDomain, grid: RadialGrid, cfg, *,
                  tol: float = 1e-10, max_iter: int = 400,
                  phi0: np.ndarray | None = None,
                  raise_on_stall: bool = True) -> LSResult:
    """Correction orthogonal to the projected dilation modes.

    Solves the discrete analogue of the ansatz-correction equation: find phi
    with <phi, P psi0_i> = 0 for every layer i such that the full field
    V + phi solves the equation up to multiples of the projected dilation
    modes.  Only the dilation modes survive radial symmetry.

    The fixed-point map inverts the full linearisation restricted to the
    orthogonal complement and iterates on the quadratic remainder, with a
    relaxation factor that halves when the update ratio hovers near one.
    Stalls (five consecutive ratios >= 0.95 at the smallest relaxation)
    raise :class:`NonContractionError`.
    """
    dim = dom.dim
    op = RadialOperator(dim, grid)
    r = grid.nodes
    params = list(cfg.params) if hasattr(cfg, "params") else list(cfg)
    eps = cfg.eps
    k = len(params)
    N = len(r) - 1

    V = _tower_nodal(dom, r, params)
    V[-1] = 0.0
    Vf = V[:-1]

    # projected dilation modes and their Gram matrix in the energy product
    B = np.column_stack(
        [project_psi0_radial(dom, r, b.mu)[:-1] for b in params])
    Bfull = np.vstack([B, np.zeros((1, k))])
    SB = np.column_stack(
        [op.stiffness_apply(Bfull[:, j])[:-1] for j in range(k)])
    G = B.T @ SB
    Ginv = np.linalg.inv(G)

    def proj_perp(v):
        return v - B @ (Ginv @ (SB.T @ v))

    fV = f_eps(dim, V, eps)[:-1]
    fpV = f_eps_prime(dim, V, eps)[:-1]

    # dense linearisation L = I - P^perp S^{-1} W f'(V) on the free nodes
    M = solveh_banded(op._hb, np.diag(op.w[:-1] * fpV), lower=False)
    L = np.eye(N) - (M - B @ (Ginv @ (SB.T @ M)))
    lu = lu_factor(L)

    r0 = proj_perp(op.stiffness_solve(op.w[:-1] * fV) - Vf)

    phi = np.zeros(N) if phi0 is None else np.asarray(phi0, float)[:-1].copy()
    omega = 1.0
    prev_update = None
    ratios: list = []
    converged = False
    it = 0
    for it in range(max_iter):
        full = V.copy()
        full[:-1] = Vf + phi
        remainder = (f_eps(dim, full, eps)[:-1] - fV - fpV * phi)
        target = proj_perp(
            lu_solve(lu, r0 + proj_perp(op.stiffness_solve(op.w[:-1] * remainder))))
        phin = (1.0 - omega) * phi + omega * target
        dphi = np.concatenate([phin - phi, [0.0]])
        upd = op.h1_norm(dphi)
        if prev_update is not None and prev_update > 0:
            ratios.append(upd / prev_update)
            if (len(ratios) >= 4 and min(ratios[-4:]) > 0.9 and omega > 0.2):
                omega *= 0.5
        prev_update = upd
        phi = phin
        if upd < tol:
            converged = True
            break
    if not converged and raise_on_stall:
        tail = ratios[-5:]
        if len(tail) == 5 and min(tail) >= 0.95:
            raise NonContractionError(
                f"correction iteration stalled (last ratios {np.round(tail, 4)})")

    phi_full = np.concatenate([phi, [0.0]])
    full = V + phi_full
    resid = (Vf + phi) - op.stiffness_solve(
        op.w[:-1] * f_eps(dim, full, eps)[:-1])
    c = Ginv @ (SB.T @ resid)
    ortho = np.array([op.h1_inner(phi_full, Bfull[:, j]) for j in range(k)])
    return LSResult(phi_full, c, op.h1_norm(phi_full), it + 1,
                    converged, ratios, ortho)


# ---------------------------------------------------------------------------
# scale extraction
# ---------------------------------------------------------------------------

def extract_scales(sol: RadialSolution, dim: Dimension, *,
                   expected_layers: int | None = None):
    """Locate the alternating radial extrema and invert the height map.

    Layer heights follow h_i = alpha mu_i^{-(n-2)/2}; the dilation factors
    divide out the scale schedule at the solution's eps.  Entries are
    returned outermost layer first: (extremum radius, height, mu, d).
    """
    u = sol.values
    r = sol.grid.nodes
    amax = float(np.max(np.abs(u)))
    if amax == 0.0:
        raise StructureError("zero field has no concentration structure")
    s = np.sign(u)
    s[np.abs(u) < 1e-9 * amax] = 0
    idx = np.nonzero(s)[0]
    # split into maximal runs of constant sign
    regions = []
    start = idx[0]
    for a, b in zip(idx[:-1], idx[1:]):
        if s[a] != s[b]:
            regions.append((start, a))
            start = b
    regions.append((start, idx[-1]))
    k = len(regions)
    if expected_layers is not None and k != expected_layers:
        raise StructureError(
            f"expected {expected_layers} sign regions, found {k}")
    t = sol.eps / np.log(sol.eps) ** 2
    out = []
    # innermost region is the deepest layer; report outermost first
    for layer, (a, b) in zip(range(k, 0, -1), regions):
        seg = np.abs(u[a:b + 1])
        j = int(np.argmax(seg))
        height = float(seg[j])
        mu = (dim.alpha / height) ** (2.0 / (dim.n - 2.0))
        d = mu / t ** ((2.0 * layer - 1.0) / (dim.n - 2.0))
        out.append((layer, float(r[a + j]), height, mu, d))
    out.sort(key=lambda row: row[0])
    mus = [row[3] for row in out]
    if np.any(np.diff(mus) >= 0):
        raise StructureError("layer scales do not decrease inward")
    return [(radius, height, mu, d) for _, radius, height, mu, d in out]


def nodal_radii(sol: RadialSolution) -> list:
    """Radii where the solution changes sign (midpoints of the sign flips)."""
    u = sol.values
    r = sol.grid.nodes
    amax = float(np.max(np.abs(u)))
    s = np.sign(u)
    s[np.abs(u) < 1e-9 * amax] = 0
    idx = np.nonzero(s)[0]
    return [0.5 * (r[a] + r[b]) for a, b in zip(idx[:-1], idx[1:])
            if s[a] * s[b] < 0]


# ---------------------------------------------------------------------------
# solve pipeline and sweep
# ---------------------------------------------------------------------------

def _default_grid(dom: BallDomain, mus, per_decade=40) -> RadialGrid:
    return geometric_grid(dom.radius, min(mus) / 50.0, per_decade)


def _adjust_dilations(dom, eps, dbar0, *, per_decade=40, ls_tol=1e-10,
                      max_newton=40):
    """Drive the correction multipliers to zero over the dilation factors.

    Damped finite-difference Newton in log d-space; evaluations whose
    correction iteration does not converge are treated as invalid steps.
    Returns (dbar, grid, correction) at the root.
    """
    from .tower import TowerConfig

    k = len(dbar0)
    ld = np.log(np.asarray(dbar0, dtype=float))

    def c_of(ld_try):
        d = np.exp(ld_try)
        cfg = TowerConfig.centered(dom, k, eps, d)
        grid = _default_grid(dom, [b.mu for b in cfg.params], per_decade)
        ls = ls_correction(dom, grid, cfg, tol=ls_tol, raise_on_stall=False)
        if not ls.converged:
            return None
        return np.asarray(ls.c), (grid, cfg, ls)

    cur = c_of(ld)
    if cur is None:
        # walk the dilations down until the correction converges
        for shrink in np.geomspace(0.5, 1e-3, 12):
            cur = c_of(ld + np.log(shrink))
            if cur is not None:
                ld = ld + np.log(shrink)
                break
        else:
            raise SolverError("correction stage failed for every trial dilation")
    c, ctx = cur
    for _ in range(max_newton):
        nc = float(np.linalg.norm(c))
        if nc < 1e-13:
            break
        h = 1e-4
        J = np.empty((k, k))
        ok = True
        for j in range(k):
            lp, lm = ld.copy(), ld.copy()
            lp[j] += h
            lm[j] -= h
            rp, rm = c_of(lp), c_of(lm)
            if rp is None or rm is None:
                ok = False
                break
            J[:, j] = (rp[0] - rm[0]) / (2.0 * h)
        if not ok:
            break
        try:
            step = np.linalg.solve(J, -c)
        except np.linalg.LinAlgError:
            break
        lam, accepted = 1.0, False
        while lam >= 2.0**-16:
            trial = c_of(ld + lam * step)
            if trial is not None and \
                    float(np.linalg.norm(trial[0])) < (1.0 - 0.25 * lam) * nc:
                ld = ld + lam * step
                c, ctx = trial
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
    grid, cfg, ls = ctx
    return np.exp(ld), grid, cfg, ls


def solve_from_tower(dom: BallDomain, eps: float, dbar, *,
                     per_decade: int = 40, globalize: bool = True,
                     max_iter: int = 80,
                     grid: RadialGrid | None = None) -> RadialSolution:
    """Solve the radial problem starting from the tower ansatz at ``dbar``.

    Plain damped Newton first; if it fails and ``globalize`` is set, the
    dilation factors are re-centred by the multiplier equations and Newton
    restarts from the corrected tower.  A caller-supplied ``grid`` is used
    for the Newton stages (the dilation adjustment builds its own).
    """
    from .tower import TowerConfig

    k = len(dbar)
    cfg = TowerConfig.centered(dom, k, eps, dbar)
    g = grid or _default_grid(dom, [b.mu for b in cfg.params], per_decade)
    V = _tower_nodal(dom, g.nodes, cfg.params)
    sol = newton_solve(dom, g, eps, V, max_iter=max_iter,
                       raise_on_fail=False)
    if sol.converged or not globalize:
        if not sol.converged:
            raise SolverError(
                f"Newton did not converge (residual {sol.residual:.3e})")
        sol.scales = extract_scales(sol, dom.dim)
        return sol
    dstar, lsgrid, cfg, ls = _adjust_dilations(dom, eps, dbar,
                                               per_decade=per_decade)
    if grid is None:
        g = lsgrid
        V = _tower_nodal(dom, g.nodes, cfg.params) + ls.phi
    else:
        g = grid
        V = _tower_nodal(dom, g.nodes, cfg.params) + np.interp(
            g.nodes, lsgrid.nodes, ls.phi)
    sol = newton_solve(dom, g, eps, V, max_iter=max_iter)
    sol.scales = extract_scales(sol, dom.dim)
    return sol


def sweep_epsilon(dom: BallDomain, k: int, eps_grid, *, dbar0=None,
                  per_decade: int = 40, warm_start: bool = True):
    """Continuation over a decreasing eps grid.

    Each point warm-starts from the previous solution re-expressed on the
    new scale schedule (the extracted dilation factors seed the next tower).
    Emits one report row per eps; a non-converged point is recorded and the
    sweep continues from the last good dilations.
    """
    eps_grid = list(eps_grid)
    if any(e2 >= e1 for e1, e2 in zip(eps_grid[:-1], eps_grid[1:])):
        raise ParameterError("eps grid must be strictly decreasing")
    if dbar0 is None:
        from .reduced import ReducedConstants, solve_reduced
        consts = ReducedConstants.for_ball(dom)
        state = solve_reduced(dom.dim, k, consts, dom)
        dbar0 = np.cumprod(state.s)
    dbar = np.asarray(dbar0, dtype=float)
    rows = []
    solutions = []
    for eps in eps_grid:
        try:
            sol = solve_from_tower(dom, eps, dbar, per_decade=per_decade)
            scales = sol.scales
            row = {
                "eps": eps,
                "converged": True,
                "newton_iters": sol.newton_iters,
                "residual": sol.residual,
                "mu": [s[2] for s in scales],
                "d": [s[3] for s in scales],
                "nodal_radii": nodal_radii(sol),
            }
            if warm_start:
                dbar = np.array([s[3] for s in scales])
            solutions.append(sol)
        except (SolverError, StructureError, NonContractionError,
                ParameterError) as exc:
            msg = str(exc)
            if not rows:
                msg += " (first sweep point; consider a larger starting eps)"
            row = {"eps": eps, "converged": False, "newton_iters": 0,
                   "residual": float("nan"), "mu": [float("nan")] * k,
                   "d": [float("nan")] * k, "nodal_radii": [],
                   "error": msg}
            solutions.append(None)
        rows.append(row)
    return rows, solutions
