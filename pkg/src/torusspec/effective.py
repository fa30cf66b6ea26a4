"""Effective Hamiltonians by homogenization of the cell problem.

Two routes are implemented and kept strictly separate so they can be
cross-checked: the one-dimensional closed form built on the action integral
J(E) = (2 pi)^-1 integral sqrt(2(E - V)) dx (flat plateau at max V for
|P| <= J(max V), inverse of J above it), and a grid solver for the cell
problem H(x, P + Du) = Hbar(P) in any dimension.

The grid solver discretises with the monotone Lax-Friedrichs numerical
Hamiltonian, adds a vanishing discount term delta*u, solves each discounted
problem by Newton's method on the sparse system, and extrapolates
-delta*u_delta -> Hbar(P) linearly in delta.
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, sparse
from scipy.sparse.linalg import splu

from .potentials import TWO_PI, FourierPotential, potential_extrema
from .symbols import PhaseSpaceFunction, mechanical_symbol

_MIN_GRID = 32

# interpolation tables for expensive symbols, keyed by the symbol's fn so the
# cache dies with the symbol
_TABLE_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


class CellConvergenceError(RuntimeError):
    """Discounted cell problem failed to reach the residual tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# closed form in one dimension
# ---------------------------------------------------------------------------


def _level_points(pot: FourierPotential, level: float, res: int = 4096):
    xs = np.arange(res) * (TWO_PI / res)
    vals = pot.evaluate(xs) - level
    pts = list(xs[np.nonzero(np.diff(np.sign(vals)) != 0)[0]])
    rep = potential_extrema(pot, res=res)
    pts.append(float(rep.argmax[0]))
    return sorted(p for p in set(pts) if 1e-9 < p < TWO_PI - 1e-9)[:40]


def action_J(pot: FourierPotential, energy: float) -> float:
    """J(E) = (2 pi)^-1 integral_0^2pi sqrt(2 (E - V(x))) dx, for E >= max V.

    Energies within 1e-12 below max V are clamped; anything lower is
    rejected.  The integrand's square-root zeros (argmax of V) are passed to
    the quadrature as known break points.
    """
    if pot.dim != 1:
        raise ValueError("action integral is one-dimensional")
    rep = potential_extrema(pot, res=4096)
    vmax = rep.max_value
    energy = float(energy)
    if energy < vmax - 1e-12:
        raise ValueError(f"energy {energy} below max V = {vmax}")
    energy = max(energy, vmax)

    def integrand(x):
        v = pot.evaluate(np.atleast_1d(x))[0]
        return math.sqrt(max(2.0 * (energy - v), 0.0))

    pts = _level_points(pot, energy)
    val, _ = integrate.quad(integrand, 0.0, TWO_PI, limit=300,
                            epsabs=1e-12, epsrel=1e-12,
                            points=pts if pts else None)
    return float(val) / TWO_PI


def action_threshold(pot: FourierPotential) -> float:
    """J(max V): half-width of the flat plateau of the effective Hamiltonian."""
    vmax = potential_extrema(pot, res=4096).max_value
    return action_J(pot, vmax)


def effective_1d(pot: FourierPotential, P: float,
                 threshold: Optional[float] = None) -> float:
    """Closed-form Hbar(P): max V on the plateau, J^{-1}(|P|) outside.

    The inversion is by root bracketing on the strictly increasing branch;
    the returned energy satisfies |J(E) - |P|| <= 1e-9.
    """
    if pot.dim != 1:
        raise ValueError("closed form is one-dimensional")
    vmax = potential_extrema(pot, res=4096).max_value
    p_abs = abs(float(P))
    if threshold is None:
        threshold = action_J(pot, vmax)
    if p_abs <= threshold + 1e-14:
        return float(vmax)
    hi = vmax + 0.5 * p_abs * p_abs + 1.0
    energy = optimize.brentq(lambda e: action_J(pot, e) - p_abs, vmax, hi,
                             xtol=1e-12, rtol=8.9e-16, maxiter=200)
    if abs(action_J(pot, energy) - p_abs) > 1e-9:
        raise ArithmeticError("action inversion missed its tolerance")
    return float(energy)


# ---------------------------------------------------------------------------
# cell-problem solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellParams:
    """Scheme parameters for the discounted Lax-Friedrichs solve."""

    deltas: tuple = (1e-1, 3e-2, 1e-2)
    tol: float = 1e-6                 # required sup-norm of the discounted residual
    newton_tol: float = 1e-11
    max_iter: int = 100_000
    alpha: Optional[float] = None     # dissipation override (per axis, scalar)
    adaptive_alpha: bool = True       # tighten alpha to the realised gradient range
    alpha_margin: float = 1.2
    e_max: Optional[float] = None     # energy scale entering the probe box
    v_min: Optional[float] = None     # needed for numeric symbols
    v_max: Optional[float] = None
    table_p_pad: float = 2.0          # momentum padding of interpolation tables
    table_p_res: int = 256
    table_p_range: Optional[tuple] = None   # share one table across several P


@dataclass(frozen=True)
class Corrector:
    """Mean-zero corrector of one cell problem on its solver grid."""

    P: np.ndarray
    axes: tuple
    values: np.ndarray
    residual: float       # sup |H_LF(x, P + Du) - Hbar|


@dataclass(frozen=True)
class CellSolution:
    value: float
    corrector: Corrector
    discount_values: tuple
    alphas: tuple
    iterations: int


class _GridSymbol:
    """Evaluator of H and dH/dp_i on the fixed solver x-grid."""

    def __init__(self, H: PhaseSpaceFunction, axes, params: CellParams):
        self.H = H
        self.dim = H.dim
        grids = np.meshgrid(*axes, indexing="ij")
        self.shape = grids[0].shape
        self.xpts = np.stack([g.reshape(-1) for g in grids], axis=-1)
        self.mechanical = H.potential is not None
        self.vgrid = None
        self.spline = None
        if self.mechanical:
            self.vgrid = H.potential.evaluate(self.xpts).reshape(-1)

    def build_table(self, p_lo: float, p_hi: float, params: CellParams):
        """Cubic interpolation in p at every x-node (expensive symbols, 1D).

        The whole (x-node, p-node) product goes through the symbol in one
        batched call; for flow-composed symbols that means a single flow of
        the full table instead of one per p-node.  Tables are cached on the
        symbol so repeated solves (several P, one map) pay once.
        """
        if self.dim != 1:
            raise ValueError("interpolation tables support one dimension")
        nx = self.xpts.shape[0]
        key = (nx, round(p_lo, 9), round(p_hi, 9), params.table_p_res)
        store = _TABLE_CACHE.setdefault(self.H.fn, {})
        if key not in store:
            pg = np.linspace(p_lo, p_hi, params.table_p_res)
            xx = np.tile(self.xpts, (pg.size, 1))
            ee = np.repeat(pg, nx)[:, None]
            vals = np.asarray(self.H.fn(xx, ee)).reshape(pg.size, nx)
            spline = interpolate.CubicSpline(pg, vals, axis=0)
            store[key] = (spline, spline.derivative())
        self.spline, self.spline_d = store[key]
        self.p_range = (p_lo, p_hi)

    def value(self, pargs):
        """H(x_j, p_j) over the grid; pargs has shape (cells, dim)."""
        if self.mechanical:
            return 0.5 * np.sum(pargs ** 2, axis=-1) + self.vgrid
        if self.spline is not None:
            p = np.clip(pargs[:, 0], *self.p_range)
            i = np.clip(np.searchsorted(self.spline.x, p) - 1, 0, self.spline.x.size - 2)
            t = p - self.spline.x[i]
            c = self.spline.c
            cols = np.arange(p.size)
            return ((c[0, i, cols] * t + c[1, i, cols]) * t + c[2, i, cols]) * t + c[3, i, cols]
        return np.asarray(self.H.fn(self.xpts, pargs)).reshape(-1)

    def slope(self, pargs):
        """dH/dp_i at (x_j, p_j), shape (cells, dim)."""
        if self.mechanical:
            return pargs.copy()
        if self.spline is not None:
            p = np.clip(pargs[:, 0], *self.p_range)
            i = np.clip(np.searchsorted(self.spline.x, p) - 1, 0, self.spline.x.size - 2)
            t = p - self.spline.x[i]
            c = self.spline_d.c
            cols = np.arange(p.size)
            out = (c[0, i, cols] * t + c[1, i, cols]) * t + c[2, i, cols]
            return out[:, None]
        step = 1e-6
        out = np.empty_like(pargs)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = step
            hi = np.asarray(self.H.fn(self.xpts, pargs + e)).reshape(-1)
            lo = np.asarray(self.H.fn(self.xpts, pargs - e)).reshape(-1)
            out[:, i] = (hi - lo) / (2 * step)
        return out


def _alpha_box(P, params: CellParams, v_min: float, v_max: float) -> float:
    e_max = params.e_max
    if e_max is None:
        e_max = v_max + 0.5 * float(np.dot(P, P))
    spread = max(e_max - v_min, 0.0)
    return float(np.linalg.norm(P)) + math.sqrt(2.0 * spread) + 1.0


class _CellWorkspace:
    """One grid, one symbol: residual, Jacobian and Newton solve."""

    def __init__(self, sym: _GridSymbol, P, alphas, delta, hs):
        self.sym = sym
        self.P = np.asarray(P, dtype=float)
        self.alphas = np.asarray(alphas, dtype=float)
        self.delta = float(delta)
        self.hs = hs
        self.shape = sym.shape
        self.n = len(self.shape)
        self.size = int(np.prod(self.shape))
        idx = np.arange(self.size).reshape(self.shape)
        self.ip = [np.roll(idx, -1, axis=i).reshape(-1) for i in range(self.n)]
        self.im = [np.roll(idx, 1, axis=i).reshape(-1) for i in range(self.n)]

    def _pargs(self, u):
        cols = []
        for i in range(self.n):
            cols.append(self.P[i] + (u[self.ip[i]] - u[self.im[i]]) / (2 * self.hs[i]))
        return np.stack(cols, axis=-1)

    def residual(self, u):
        pargs = self._pargs(u)
        F = self.delta * u + self.sym.value(pargs)
        for i in range(self.n):
            lap = (u[self.ip[i]] - 2 * u + u[self.im[i]]) / (2 * self.hs[i])
            F -= self.alphas[i] * lap
        return F

    def numerical_hamiltonian(self, u):
        """H_LF(x, P + Du) including the dissipation, as an array."""
        return self.residual(u) - self.delta * u

    def jacobian(self, u):
        pargs = self._pargs(u)
        hp = self.sym.slope(pargs)
        rows = [np.arange(self.size)]
        cols = [np.arange(self.size)]
        diag = np.full(self.size, self.delta + sum(self.alphas[i] / self.hs[i]
                                                   for i in range(self.n)))
        data = [diag]
        for i in range(self.n):
            rows.append(np.arange(self.size))
            cols.append(self.ip[i])
            data.append(hp[:, i] / (2 * self.hs[i]) - self.alphas[i] / (2 * self.hs[i]))
            rows.append(np.arange(self.size))
            cols.append(self.im[i])
            data.append(-hp[:, i] / (2 * self.hs[i]) - self.alphas[i] / (2 * self.hs[i]))
        mat = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size))
        return mat.tocsc()

    def realized_slope(self, u):
        return np.max(np.abs(self.sym.slope(self._pargs(u))), axis=0)

    def newton(self, u0, tol, max_steps=900):
        """Pseudo-transient Newton: (J + I/dt) steps with dt grown as the
        residual falls.  Plain damped Newton crawls here because the sup-norm
        is a poor merit function for transport-dominated residuals."""
        u = u0.copy()
        F = self.residual(u)
        nrm = float(np.max(np.abs(F)))
        dt = 10.0
        eye = sparse.identity(self.size, format="csc")
        steps = 0
        stall = 0
        scale = self.delta + float(np.sum(self.alphas / np.asarray(self.hs)))
        while steps < max_steps:
            steps += 1
            if nrm <= tol:
                break
            lu = splu((self.jacobian(u) + eye / dt).tocsc())
            trial = u - lu.solve(F)
            Ft = self.residual(trial)
            nt = float(np.max(np.abs(Ft)))
            if not np.isfinite(nt) or nt > 2.0 * nrm:
                dt = max(dt / 4.0, 1e-8)
                continue
            # the mean of u is O(1/delta), so residual evaluations carry a
            # rounding floor ~ eps*|u|*alpha/h; treat no-progress steps as a
            # stall only near that floor, otherwise the front is still moving
            floor = np.finfo(float).eps * (1.0 + float(np.max(np.abs(u)))) * scale
            stall = stall + 1 if (nt > 0.9 * nrm and nrm <= 1e3 * floor) else 0
            u, F = trial, Ft
            dt = min(dt * max(nrm / max(nt, 1e-300), 1.5), 1e12)
            nrm = nt
            if stall >= 6:
                break
        return u, nrm, steps

    def march(self, u0, tol, max_steps):
        """Damped fixed-point iteration with the mean solved algebraically."""
        w = u0 - float(np.mean(u0))
        tau = 0.45 * min(self.hs) / (float(np.sum(self.alphas)) + self.delta * min(self.hs))
        steps = 0
        for _ in range(max_steps):
            ham = self.numerical_hamiltonian(w)
            mean_h = float(np.mean(ham))
            res_w = self.delta * w + ham - mean_h
            if float(np.max(np.abs(res_w))) <= tol:
                break
            w = w - tau * res_w
            w -= float(np.mean(w))
            steps += 1
        m = -float(np.mean(self.numerical_hamiltonian(w))) / self.delta
        u = w + m
        return u, float(np.max(np.abs(self.residual(u)))), steps


def _solve_cascade(sym: _GridSymbol, P, alphas, hs, params: CellParams,
                   u_init=None, init_delta=None):
    """All discounted problems for one P and one dissipation choice."""
    c_values = []
    u = u_init
    prev_delta = init_delta
    total_steps = 0
    final = None
    for delta in params.deltas:
        ws = _CellWorkspace(sym, P, alphas, delta, hs)
        if u is None:
            u0 = np.zeros(ws.size)
        else:
            # mean scales like 1/delta, the oscillating part barely moves
            mean = float(np.mean(u))
            u0 = (u - mean) + mean * ((prev_delta or delta) / delta)
        u, res, steps = ws.newton(u0, params.newton_tol)
        total_steps += steps
        if res > params.tol:
            u, res, steps = ws.march(u, params.tol, params.max_iter - total_steps)
            total_steps += steps
        if res > params.tol:
            raise CellConvergenceError(
                f"cell residual {res:.3e} above {params.tol} at delta={delta}", res)
        c_values.append(-delta * float(np.mean(u)))
        prev_delta = delta
        final = (ws, u)
    return c_values, final, total_steps


def cell_problem_solve(H: PhaseSpaceFunction, P, grid: int,
                       params: Optional[CellParams] = None) -> CellSolution:
    """Solve the cell problem for one P on a uniform torus grid.

    Returns the extrapolated Hbar(P) together with the mean-zero corrector
    at the smallest discount and the sup-norm residual of the discrete cell
    equation.  Raises CellConvergenceError if any discounted solve misses
    the residual tolerance within the iteration budget.
    """
    params = params or CellParams()
    n = H.dim
    P = np.atleast_1d(np.asarray(P, dtype=float))
    if P.shape != (n,):
        raise ValueError("P does not match the symbol dimension")
    if np.isscalar(grid):
        shape = (int(grid),) * n
    else:
        shape = tuple(int(g) for g in grid)
    if min(shape) < _MIN_GRID:
        raise ValueError(f"grid below {_MIN_GRID} per axis is rejected")
    axes = [np.arange(m) * (TWO_PI / m) for m in shape]
    hs = [TWO_PI / m for m in shape]

    if H.potential is not None:
        rep = potential_extrema(H.potential, res=2048 if n == 1 else 256)
        v_min, v_max = rep.min_value, rep.max_value
    else:
        if params.v_min is None or params.v_max is None:
            raise ValueError("numeric symbols need v_min/v_max in the scheme parameters")
        v_min, v_max = params.v_min, params.v_max

    sym = _GridSymbol(H, axes, params)
    if H.expensive:
        if params.table_p_range is not None:
            p_lo, p_hi = params.table_p_range
        else:
            box = _alpha_box(P, params, v_min, v_max)
            p_lo = float(np.min(P)) - box - params.table_p_pad
            p_hi = float(np.max(P)) + box + params.table_p_pad
        sym.build_table(p_lo, p_hi, params)

    alpha0 = params.alpha if params.alpha is not None else _alpha_box(P, params, v_min, v_max)
    alphas = np.full(n, float(alpha0))
    total = 0
    u_warm, warm_delta = None, None
    if params.adaptive_alpha and params.alpha is None:
        # presolve the largest discount with the conservative box dissipation,
        # then shrink alpha to the gradient range the solution actually visits
        ws0 = _CellWorkspace(sym, P, alphas, params.deltas[0], hs)
        u_warm, res0, steps = ws0.newton(np.zeros(ws0.size), params.newton_tol)
        total += steps
        if res0 <= params.tol:
            realized = ws0.realized_slope(u_warm)
            alphas = np.maximum(params.alpha_margin * realized + 0.05, 0.5)
            warm_delta = params.deltas[0]
        else:
            u_warm = None
    for attempt in range(3):
        c_values, (ws, u), steps = _solve_cascade(sym, P, alphas, hs, params,
                                                  u_init=u_warm, init_delta=warm_delta)
        total += steps
        # guard: the dissipation must dominate the realised slopes
        realized = ws.realized_slope(u)
        if params.alpha is not None or np.all(realized <= alphas + 1e-9):
            break
        alphas = np.maximum(params.alpha_margin * realized + 0.05, alphas * 1.5)
        u_warm, warm_delta = None, None

    ds = list(params.deltas)
    if len(ds) >= 2:
        d1, d2 = ds[-2], ds[-1]
        c1, c2 = c_values[-2], c_values[-1]
        value = (d1 * c2 - d2 * c1) / (d1 - d2)
    else:
        value = c_values[-1]

    w = u - float(np.mean(u))
    ham = ws.numerical_hamiltonian(w)
    residual = float(np.max(np.abs(ham - value)))
    corr = Corrector(P=P.copy(), axes=tuple(axes), values=w.reshape(shape),
                     residual=residual)
    return CellSolution(value=float(value), corrector=corr,
                        discount_values=tuple(c_values),
                        alphas=tuple(float(a) for a in alphas),
                        iterations=total)


# ---------------------------------------------------------------------------
# tables, certificates, sublevel sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableCertificates:
    convex: bool
    convex_defect: float
    even_defect: float
    bound_defect: float
    tol: float = 1e-6

    def to_dict(self) -> dict:
        return {
            "convex": bool(self.convex),
            "convex_defect": self.convex_defect,
            "even_defect": self.even_defect,
            "bound_defect": self.bound_defect,
        }


@dataclass(frozen=True)
class EffectiveTable:
    """Hbar sampled on a symmetric uniform P-grid, with certificates."""

    dim: int
    axes: tuple                  # per-axis P values, symmetric about 0
    values: np.ndarray
    method: str
    residuals: Optional[np.ndarray]
    certificates: Optional[TableCertificates]
    v_max: float

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)


def _p_axis(p_max: float, dp: float) -> np.ndarray:
    m = int(round(p_max / dp))
    if m < 1 or abs(m * dp - p_max) > 1e-9:
        raise ValueError("P_max must be an integer multiple of the step")
    return dp * np.arange(-m, m + 1)


def _directions(dim: int):
    if dim == 1:
        return [(1,)]
    dirs = []
    for d in itertools.product((-1, 0, 1), repeat=dim):
        if any(d) and (np.sign([v for v in d if v][0]) > 0):
            dirs.append(d)
    return dirs


def compute_certificates(axes, values, v_max: float, tol: float = 1e-6) -> TableCertificates:
    values = np.asarray(values, dtype=float)
    dim = len(axes)
    # midpoint convexity along every grid line (axes and diagonals)
    convex_defect = -math.inf
    for d in _directions(dim):
        lo = values
        for ax, step in enumerate(d):
            if step:
                lo = np.roll(lo, step, axis=ax)
        hi = values
        for ax, step in enumerate(d):
            if step:
                hi = np.roll(hi, -step, axis=ax)
        mid = values - 0.5 * (lo + hi)
        # drop wrapped rows: only interior triples count
        mask = np.ones_like(values, dtype=bool)
        for ax, step in enumerate(d):
            if step:
                sl = [slice(None)] * dim
                sl[ax] = 0
                mask[tuple(sl)] = False
                sl[ax] = -1
                mask[tuple(sl)] = False
        if np.any(mask):
            convex_defect = max(convex_defect, float(np.max(mid[mask])))
    even_defect = float(np.max(np.abs(values - values[tuple(slice(None, None, -1)
                                                            for _ in range(dim))])))
    pts = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    upper = 0.5 * np.sum(pts ** 2, axis=1) + v_max
    flat = values.reshape(-1)
    bound_defect = max(float(np.max(v_max - flat)), float(np.max(flat - upper)))
    bound_defect = max(bound_defect, 0.0)
    convex = (convex_defect <= tol) and (even_defect <= tol) and (bound_defect <= tol)
    return TableCertificates(convex=convex, convex_defect=convex_defect,
                             even_defect=even_defect, bound_defect=bound_defect, tol=tol)


def closed_form_table(pot: FourierPotential, p_max: float, dp: float) -> EffectiveTable:
    """1D table from the action closed form."""
    axis = _p_axis(p_max, dp)
    thr = action_threshold(pot)
    vmax = potential_extrema(pot, res=4096).max_value
    # even by construction: only |P| enters
    values = np.array([effective_1d(pot, abs(p), threshold=thr) for p in axis])
    certs = compute_certificates((axis,), values, vmax)
    return EffectiveTable(dim=1, axes=(axis,), values=values, method="closed-form",
                          residuals=None, certificates=certs, v_max=vmax)


def cell_table(pot: FourierPotential, p_max: float, dp: float, grid: int,
               params: Optional[CellParams] = None) -> EffectiveTable:
    """Table from the cell-problem solver on a mechanical symbol.

    Mechanical Hamiltonians are even in P, so each |P| is solved once and
    mirrored; the certificates then check convexity and bounds honestly.
    """
    H = mechanical_symbol(pot)
    axis = _p_axis(p_max, dp)
    n = pot.dim
    vmax = potential_extrema(pot, res=2048 if n == 1 else 256).max_value
    shape = (axis.size,) * n
    values = np.full(shape, np.nan)
    residuals = np.full(shape, np.nan)
    cache: dict = {}
    for idx in itertools.product(range(axis.size), repeat=n):
        P = np.array([axis[i] for i in idx])
        key = tuple(sorted(np.abs(P)))
        key = tuple(round(v, 12) for v in np.abs(P))
        if key not in cache:
            sol = cell_problem_solve(H, np.abs(P), grid, params)
            cache[key] = (sol.value, sol.corrector.residual)
        values[idx], residuals[idx] = cache[key]
    certs = compute_certificates((axis,) * n, values, vmax)
    return EffectiveTable(dim=n, axes=(axis,) * n, values=values, method="cell-problem",
                          residuals=residuals, certificates=certs, v_max=vmax)


def effective_grid(pot: FourierPotential, p_max: float, dp: float, method: str,
                   grid: int = 0, params: Optional[CellParams] = None) -> EffectiveTable:
    if method == "closed-form":
        if pot.dim != 1:
            raise ValueError("closed form is one-dimensional")
        return closed_form_table(pot, p_max, dp)
    if method == "cell-problem":
        if grid < _MIN_GRID:
            raise ValueError("cell-problem tables need a grid size")
        return cell_table(pot, p_max, dp, grid, params)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SublevelSet:
    points: np.ndarray
    empty: bool
    convex_certified: bool


def sublevel_set(table: EffectiveTable, energy: float) -> SublevelSet:
    """Grid points with Hbar <= E, certified convex as a discrete set.

    The certificate walks every lattice point on every segment between two
    members; a non-member on such a segment voids it.
    """
    energy = float(energy)
    flags = table.values <= energy
    coords = np.argwhere(flags)
    if coords.size == 0:
        return SublevelSet(points=np.empty((0, table.dim)), empty=True,
                           convex_certified=True)
    inside = {tuple(c) for c in coords}
    convex = True
    cl = [tuple(c) for c in coords]
    for a_i in range(len(cl)):
        for b_i in range(a_i + 1, len(cl)):
            a = np.array(cl[a_i])
            bpt = np.array(cl[b_i])
            d = bpt - a
            g = int(np.gcd.reduce(np.abs(d))) if np.any(d) else 1
            if g <= 1:
                continue
            step = d // g
            for k in range(1, g):
                if tuple(a + k * step) not in inside:
                    convex = False
                    break
            if not convex:
                break
        if not convex:
            break
    pts = np.stack([np.asarray(table.axes[i])[coords[:, i]]
                    for i in range(table.dim)], axis=-1)
    return SublevelSet(points=pts, empty=False, convex_certified=convex)


# ---------------------------------------------------------------------------
# variational upper bound and symplectic invariance
# ---------------------------------------------------------------------------


def infsup_upper(H: PhaseSpaceFunction, P, bandwidth: int = 3,
                 iterations: int = 400, res: int = 128, seed: int = 42) -> float:
    """Upper bound inf_v sup_x H(x, P + grad v) over trig polynomials v.

    Derivative-free coordinate descent with a shrinking step over the
    cosine/sine coefficients up to the given bandwidth; the incumbent is
    always returned, so the result is an upper bound for the grid-restricted
    objective whatever the iteration budget.
    """
    if bandwidth < 1 or bandwidth > 4:
        raise ValueError("bandwidth must lie in 1..4")
    n = H.dim
    P = np.atleast_1d(np.asarray(P, dtype=float))
    axis = np.arange(res) * (TWO_PI / res)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)

    qs = []
    for q in itertools.product(range(-bandwidth, bandwidth + 1), repeat=n):
        if any(q) and (q > tuple(-v for v in q)):
            qs.append(np.array(q, dtype=float))
    # precompute the gradient harmonics: d/dx_i of cos(q.x) and sin(q.x)
    phases = [pts @ q for q in qs]
    grad_cos = [-np.sin(ph)[:, None] * q[None, :] for ph, q in zip(phases, qs)]
    grad_sin = [np.cos(ph)[:, None] * q[None, :] for ph, q in zip(phases, qs)]

    def objective(theta):
        g = np.zeros_like(pts)
        for k in range(len(qs)):
            a, bcoef = theta[2 * k], theta[2 * k + 1]
            if a:
                g += a * grad_cos[k]
            if bcoef:
                g += bcoef * grad_sin[k]
        vals = np.asarray(H.fn(pts, g + P[None, :]))
        return float(np.max(vals))

    rng = np.random.default_rng(seed)
    del rng  # descent is deterministic; the seed is kept in the signature
    theta = np.zeros(2 * len(qs))
    best = objective(theta)
    step = 0.5
    sweeps = 0
    while step > 1e-4 and sweeps < iterations:
        improved = False
        for k in range(theta.size):
            for sgn in (1.0, -1.0):
                trial = theta.copy()
                trial[k] += sgn * step
                val = objective(trial)
                if val < best - 1e-14:
                    theta, best = trial, val
                    improved = True
        sweeps += 1
        if not improved:
            step *= 0.5
    return best


@dataclass(frozen=True)
class InvarianceReport:
    p_values: tuple
    base_values: tuple
    mapped_values: tuple
    max_distance: float
    symplectic_defect: float


def invariance_check(H: PhaseSpaceFunction, phi, p_values: Sequence[float],
                     grid: int, params: Optional[CellParams] = None,
                     defect_probes: int = 32) -> InvarianceReport:
    """Hbar of H and of H o phi on the same grid, plus the map's defect.

    The composed symbol goes through the numeric (table-backed) route of the
    cell solver; for an exactly symplectic phi the two columns agree up to
    scheme error.
    """
    from .dynamics import compose_hamiltonian, symplectic_defect

    params = params or CellParams()
    if H.potential is not None and (params.v_min is None or params.v_max is None):
        rep = potential_extrema(H.potential, res=2048 if H.dim == 1 else 256)
        params = replace(params, v_min=rep.min_value, v_max=rep.max_value)
    if params.table_p_range is None and H.dim == 1 and params.v_min is not None:
        # one shared interpolation table across all the requested P; its width
        # only needs the slope bound sqrt(2(E - min V)), not the full LF box,
        # because the solver clips transient arguments into the table range
        pv = np.asarray(list(p_values), dtype=float)
        e_max = params.e_max
        if e_max is None:
            e_max = params.v_max + 0.5 * float(np.max(np.abs(pv))) ** 2
        slope = math.sqrt(max(2.0 * (e_max - params.v_min), 0.0)) + 1.0
        params = replace(params, table_p_range=(float(pv.min()) - slope - params.table_p_pad,
                                                float(pv.max()) + slope + params.table_p_pad))
    composed = compose_hamiltonian(H, phi)
    base_vals = []
    mapped_vals = []
    for p in p_values:
        base_vals.append(cell_problem_solve(H, np.atleast_1d(p), grid, params).value)
        mapped_vals.append(cell_problem_solve(composed, np.atleast_1d(p), grid, params).value)
    dist = float(np.max(np.abs(np.asarray(base_vals) - np.asarray(mapped_vals))))
    defect = symplectic_defect(phi, probes=defect_probes)
    return InvarianceReport(p_values=tuple(float(p) for p in p_values),
                           base_values=tuple(base_vals),
                           mapped_values=tuple(mapped_vals),
                           max_distance=dist,
                           symplectic_defect=defect)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

FLOAT_FMT = "%.12e"


def write_effective_csv(path, table: EffectiveTable) -> None:
    head = ",".join(f"P{i+1}" for i in range(table.dim)) if table.dim > 1 else "P"
    lines = [f"{head},Hbar,method,residual"]
    pts = table.points()
    flat = table.values.reshape(-1)
    res = table.residuals.reshape(-1) if table.residuals is not None else np.zeros(flat.size)
    for i in range(flat.size):
        pcols = ",".join(FLOAT_FMT % v for v in pts[i])
        lines.append(f"{pcols},{FLOAT_FMT % flat[i]},{table.method},{FLOAT_FMT % res[i]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
