"""Nodal solutions w_k of -Lap w + w = w^3 on the unit ball.

w_k is found by shooting on the radial IVP

    u'' + (2/r) u' = u - u^3,   u(0) = a,  u'(0) = 0,

bisecting on the amplitude a until u(1) = 0 with exactly k-1 interior zeros,
then polished by Newton on the discrete boundary value problem so that the
grid profile solves the discretized equation to round-off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import BlowUp, BracketingFailed, InvariantViolated, NoConvergence
from .grid import RadialFunction, RadialGrid, dirichlet_form, laplacian_y, make_grid, nodal_count, bump_decompose

log = logging.getLogger(__name__)

ORIGIN_OFFSET = 1e-4
BLOWUP_GUARD = 1e6
AMPLITUDE_CAP = 1e4
RTOL, ATOL = 1e-10, 1e-12
BOUNDARY_TOL = 1e-10
RESIDUAL_TOL = 1e-10


class Shot(NamedTuple):
    trajectory: RadialFunction
    boundary_value: float
    interior_nodes: int


@dataclass(frozen=True, eq=False)
class ScalarSolution:
    k: int
    amplitude: float
    profile: RadialFunction
    residual_sup: float
    boundary_value: float = 0.0

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    @property
    def n(self) -> int:
        return self.profile.grid.n_interior


def _rhs(r, y):
    u, p = y
    return [p, u - u**3 - 2.0 * p / r]


def _blowup(r, y):
    return abs(y[0]) - BLOWUP_GUARD


_blowup.terminal = True


def _integrate(a: float):
    r0 = ORIGIN_OFFSET
    c = (a - a**3) / 6.0
    sol = solve_ivp(
        _rhs, (r0, 1.0), [a + c * r0**2, 2.0 * c * r0],
        method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True, events=_blowup,
    )
    if sol.status == 1:
        raise BlowUp(f"|u| exceeded {BLOWUP_GUARD:g} at r={sol.t[-1]:.4g} for a={a:g}")
    if sol.status != 0:
        raise NoConvergence(f"IVP integration failed for a={a:g}: {sol.message}")
    return sol


def _sign_changes(u: np.ndarray) -> int:
    s = np.sign(u[u != 0.0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _zeros_up_to_boundary(a: float) -> tuple[int, float]:
    """(zeros of u on (0,1], u(1)); a zero exactly at r=1 is not counted."""
    sol = _integrate(a)
    u = sol.y[0]
    return _sign_changes(u), float(u[-1])


def shoot(a: float, n_steps_hint: int | RadialGrid = 400) -> Shot:
    """Integrate the radial IVP from amplitude ``a`` and resample to a grid."""
    if a <= 0:
        raise ValueError("amplitude must be positive")
    grid = n_steps_hint if isinstance(n_steps_hint, RadialGrid) else make_grid(n_steps_hint)
    sol = _integrate(a)
    r = grid.nodes
    vals = np.empty_like(r)
    near = r < ORIGIN_OFFSET
    vals[near] = a + (a - a**3) * r[near] ** 2 / 6.0
    vals[~near] = sol.sol(r[~near])[0]
    u = sol.y[0]
    # the final sample sits on r=1 and is the boundary value, not a node
    interior = _sign_changes(u[:-1])
    return Shot(RadialFunction(grid, vals), float(u[-1]), interior)


def bracket_amplitude(k: int, a_start: float = 0.5, a_stop: float = AMPLITUDE_CAP,
                      factor: float = 1.05) -> tuple[float, float]:
    """Amplitude window [lo, hi] with k-1 zeros in (0,1] at lo and >= k at hi.

    Scans geometrically from ``a_start`` toward ``a_stop``; a downward scan
    (a_start > a_stop) is allowed and yields an independent bracket.
    """
    def zeros(a):
        return _zeros_up_to_boundary(a)[0]

    up = a_stop > a_start
    step = factor if up else 1.0 / factor
    a = a_start
    z = zeros(a)
    if up and z >= k:
        raise BracketingFailed(f"a_start={a_start:g} already beyond w_{k}")
    if not up and z < k:
        raise BracketingFailed(f"a_start={a_start:g} below w_{k}")
    while True:
        nxt = a * step
        if (up and nxt > a_stop) or (not up and nxt < a_stop):
            raise BracketingFailed(
                f"no amplitude window for k={k} between {a_start:g} and {a_stop:g}"
            )
        zn = zeros(nxt)
        if up and zn >= k:
            lo, hi = a, nxt
            break
        if not up and zn < k:
            lo, hi = nxt, a
            break
        a, z = nxt, zn
    if zeros(lo) != k - 1:
        raise BracketingFailed(f"bracket for k={k} skipped a nodal class; refine factor")
    return lo, hi


def bisect_amplitude(k: int, lo: float, hi: float) -> tuple[float, float]:
    """Bisect on 'at least k zeros in (0,1]' until |u(1)| <= 1e-10."""
    u1 = np.inf
    a = 0.5 * (lo + hi)
    for _ in range(200):
        a = 0.5 * (lo + hi)
        z, u1 = _zeros_up_to_boundary(a)
        if abs(u1) <= BOUNDARY_TOL and z in (k - 1, k):
            break
        if z >= k:
            hi = a
        else:
            lo = a
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    return a, u1


def helmholtz_solve(grid: RadialGrid, rhs_y: np.ndarray) -> np.ndarray:
    """Solve (-y'' + y) = rhs in the y = r*u variable (Dirichlet at both ends)."""
    n, h = grid.n_interior, grid.h
    ab = np.empty((3, n))
    ab[0] = -1.0 / h**2
    ab[1] = 2.0 / h**2 + 1.0
    ab[2] = -1.0 / h**2
    return solve_banded((1, 1), ab, rhs_y)


def scalar_residual(f: RadialFunction) -> np.ndarray:
    """Fixed-point residual u - (-Lap + 1)^{-1} u^3 on the grid."""
    r = f.grid.nodes
    y = f.y
    return (y - helmholtz_solve(f.grid, y**3 / r**2)) / r


def newton_polish(guess: RadialFunction, tol: float = RESIDUAL_TOL, max_iter: int = 50) -> tuple[RadialFunction, float]:
    """Damped Newton on the discrete equation, started from a sampled shot."""
    grid = guess.grid
    n, h, r = grid.n_interior, grid.h, grid.nodes
    y = guess.y.copy()
    ab = np.empty((3, n))
    ab[0] = -1.0 / h**2
    ab[2] = -1.0 / h**2

    def fp_norm(yy):
        return float(np.linalg.norm(yy - helmholtz_solve(grid, yy**3 / r**2)))

    norm = fp_norm(y)
    for _ in range(max_iter):
        F = laplacian_y(y, h) + y - y**3 / r**2
        ab[1] = 2.0 / h**2 + 1.0 - 3.0 * y**2 / r**2
        dy = solve_banded((1, 1), ab, -F)
        t = 1.0
        while True:
            yt = y + t * dy
            nt = fp_norm(yt)
            if np.isfinite(nt) and nt <= (1.0 - 1e-4 * t) * norm:
                break
            t *= 0.5
            if t < 2.0**-20:
                break
        if t < 2.0**-20:
            break
        y, norm = yt, nt
        if np.max(np.abs(t * dy)) <= 1e-14 * np.max(np.abs(y)):
            break
    f = RadialFunction(grid, y / r)
    res = float(np.max(np.abs(scalar_residual(f))))
    if not np.isfinite(res) or res > tol:
        raise NoConvergence(f"Newton polish stalled at residual {res:.3e}")
    return f, res


def find_amplitude(k: int, bracket: tuple[float, float] | None = None) -> tuple[float, float]:
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = bracket if bracket is not None else bracket_amplitude(k)
    return bisect_amplitude(k, lo, hi)


@lru_cache(maxsize=64)
def _find_w_cached(k: int, n: int) -> ScalarSolution:
    a, u1 = find_amplitude(k)
    shot = shoot(a, n)
    profile, res = newton_polish(shot.trajectory)
    sol = ScalarSolution(k=k, amplitude=a, profile=profile, residual_sup=res, boundary_value=u1)
    if nodal_count(profile) != k - 1:
        raise InvariantViolated("nodal_count", f"w_{k} on n={n} has {nodal_count(profile)} nodes")
    if profile.value_at_origin() <= 0:
        raise InvariantViolated("origin_sign", f"w_{k}(0) <= 0")
    log.debug("w_%d: a=%.12g residual=%.2e", k, a, res)
    return sol


def find_w(k: int, n: int = 400) -> ScalarSolution:
    """The nodal solution w_k (k-1 interior zeros, w_k(0) > 0) on an n-node grid."""
    return _find_w_cached(int(k), int(n))


def linearized_diagonal(w: ScalarSolution) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal form of -Lap + 1 - 3 w^2 in the y variable."""
    grid = w.grid
    h = grid.h
    d = 2.0 / h**2 + 1.0 - 3.0 * w.profile.values**2
    e = np.full(grid.n_interior - 1, -1.0 / h**2)
    return d, e


def scalar_morse_index(w: ScalarSolution) -> tuple[int, float]:
    """(number of negative eigenvalues, smallest |eigenvalue|) of -Lap+1-3w^2."""
    d, e = linearized_diagonal(w)
    lower = float(np.min(d)) - 2.0 * abs(e[0]) - 1.0
    neg = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(lower, 0.0))
    index = len(neg)
    lo = max(index - 1, 0)
    near = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(lo, index))
    return index, float(np.min(np.abs(near)))


def bump_identity_check(w: ScalarSolution) -> list[tuple[float, float]]:
    """For each bump b of w: (second variation at w along b, -2 int b^4).

    The gradient term is evaluated as int grad b . grad w, equal to
    int |grad b|^2 in the continuum since b = w on its support.  On the grid
    this accounts for the nodal cut falling between two samples.
    """
    f = w.profile
    q = f.grid.quad_weights
    pairs = []
    for b in bump_decompose(f):
        l2 = float(np.dot(q, b.values**2))
        quad = dirichlet_form(b, f) + l2 - 3.0 * float(np.dot(q, f.values**2 * b.values**2))
        pairs.append((quad, -2.0 * float(np.dot(q, b.values**4))))
    return pairs
