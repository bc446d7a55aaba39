"""The coupled system -Lap u + u = u^3 + beta u v^2, -Lap v + v = v^3 + beta u^2 v.

Unknowns are stored internally as the interleaved vector
Y = (y_u[0], y_v[0], y_u[1], y_v[1], ...) with y = r*u, in which the Jacobian
is a symmetric matrix of bandwidth 2.  The public types carry u and v as
RadialFunctions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvals_banded, solve_banded

from .errors import AllBelowThreshold, AtBifurcation, NoConvergence, PoleAtMinusOne, SingularJacobian
from .grid import RadialFunction, RadialGrid, inner_products, laplacian_y, nodal_count
from .scalar import find_w, helmholtz_solve
from .spectral import moebius, table_for

NEWTON_TOL = 1e-10
MAX_NEWTON = 50
ARMIJO_MIN_STEP = 2.0**-20
BIFURCATION_GUARD = 1e-8


@dataclass(frozen=True, eq=False)
class StatePair:
    beta: float
    u: RadialFunction
    v: RadialFunction

    def __post_init__(self):
        self.u._check(self.v)

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    def sup_norms(self) -> tuple[float, float]:
        return self.u.sup_norm(), self.v.sup_norm()


class NodalSignature(NamedTuple):
    """Nodal numbers of u, v, u+v, u-v; None marks an identically zero function."""

    n_u: int | None
    n_v: int | None
    n_sum: int | None
    n_diff: int | None
    origin_sign: tuple[int, int]

    @property
    def counts(self) -> tuple:
        return (self.n_u, self.n_v, self.n_sum, self.n_diff)


ZERO_FLOOR = 1e-8


def _count_or_none(f: RadialFunction, scale: float, rel_threshold: float) -> int | None:
    # a component this far below the other is Newton round-off, not a profile
    if f.sup_norm() <= ZERO_FLOOR * scale:
        return None
    try:
        return nodal_count(f, rel_threshold)
    except AllBelowThreshold:
        return None


def signature(s: StatePair, rel_threshold: float = 1e-6) -> NodalSignature:
    scale = max(s.u.sup_norm(), s.v.sup_norm(), 1e-300)
    u0, v0 = s.u.value_at_origin(), s.v.value_at_origin()
    return NodalSignature(
        _count_or_none(s.u, scale, rel_threshold),
        _count_or_none(s.v, scale, rel_threshold),
        _count_or_none(s.u + s.v, scale, rel_threshold),
        _count_or_none(s.u - s.v, scale, rel_threshold),
        (int(np.sign(u0)), int(np.sign(v0))),
    )


# -- packing -----------------------------------------------------------------

def pack(s: StatePair) -> np.ndarray:
    Y = np.empty(2 * s.grid.n_interior)
    Y[0::2] = s.u.y
    Y[1::2] = s.v.y
    return Y


def unpack(Y: np.ndarray, beta: float, grid: RadialGrid) -> StatePair:
    r = grid.nodes
    return StatePair(float(beta), RadialFunction(grid, Y[0::2] / r), RadialFunction(grid, Y[1::2] / r))


def strong_F(Y: np.ndarray, beta: float, grid: RadialGrid) -> np.ndarray:
    """Discrete equations in the y variable (r * strong-form residual)."""
    h, r2 = grid.h, grid.nodes**2
    yu, yv = Y[0::2], Y[1::2]
    F = np.empty_like(Y)
    F[0::2] = laplacian_y(yu, h) + yu - (yu**3 + beta * yu * yv**2) / r2
    F[1::2] = laplacian_y(yv, h) + yv - (yv**3 + beta * yu**2 * yv) / r2
    return F


def dF_dbeta(Y: np.ndarray, grid: RadialGrid) -> np.ndarray:
    r2 = grid.nodes**2
    yu, yv = Y[0::2], Y[1::2]
    out = np.empty_like(Y)
    out[0::2] = -yu * yv**2 / r2
    out[1::2] = -yu**2 * yv / r2
    return out


def fixed_point_residual(Y: np.ndarray, beta: float, grid: RadialGrid) -> np.ndarray:
    """Y - (-Lap+1)^{-1} N(Y) in the y variable, interleaved."""
    r2 = grid.nodes**2
    yu, yv = Y[0::2], Y[1::2]
    out = np.empty_like(Y)
    out[0::2] = yu - helmholtz_solve(grid, (yu**3 + beta * yu * yv**2) / r2)
    out[1::2] = yv - helmholtz_solve(grid, (yv**3 + beta * yu**2 * yv) / r2)
    return out


def residual(s: StatePair, kind: str = "fixed_point") -> tuple[RadialFunction, RadialFunction, float]:
    """Componentwise residual of the coupled equations.

    ``kind="fixed_point"`` (default) returns u - (-Lap+1)^{-1}(u^3 + beta u v^2)
    and its v analogue: the residual of the equation in its compact form,
    which is free of the O(eps/h^2) round-off floor of the strong form.
    ``kind="strong"`` returns -Lap u + u - u^3 - beta u v^2 directly.
    """
    grid = s.grid
    r = grid.nodes
    Y = pack(s)
    if kind == "fixed_point":
        R = fixed_point_residual(Y, s.beta, grid)
    elif kind == "strong":
        R = strong_F(Y, s.beta, grid)
    else:
        raise ValueError(f"unknown residual kind {kind!r}")
    ru = RadialFunction(grid, R[0::2] / r)
    rv = RadialFunction(grid, R[1::2] / r)
    return ru, rv, max(ru.sup_norm(), rv.sup_norm())


# -- Jacobian ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoupledJacobian:
    """Linearization at a state; diagonal blocks -Lap+1-a, -Lap+1-b, coupling -c.

    a = 3u^2 + beta v^2, b = 3v^2 + beta u^2, c = 2 beta u v.
    """

    grid: RadialGrid
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n_interior

    def apply(self, du: RadialFunction, dv: RadialFunction) -> tuple[np.ndarray, np.ndarray]:
        """Action on a direction in the u variable (same units as the strong residual)."""
        h, r = self.grid.h, self.grid.nodes
        yu, yv = du.y, dv.y
        ju = laplacian_y(yu, h) + (1.0 - self.a) * yu - self.c * yv
        jv = laplacian_y(yv, h) + (1.0 - self.b) * yv - self.c * yu
        return ju / r, jv / r

    def sym_banded(self) -> np.ndarray:
        """Upper banded storage (3 x 2n) of the symmetric y-form, interleaved."""
        n, h = self.n, self.grid.h
        ab = np.zeros((3, 2 * n))
        ab[2, 0::2] = 2.0 / h**2 + 1.0 - self.a
        ab[2, 1::2] = 2.0 / h**2 + 1.0 - self.b
        ab[1, 1::2] = -self.c
        ab[0, 2:] = -1.0 / h**2
        return ab

    def general_banded(self) -> np.ndarray:
        """(2,2)-banded storage for scipy.linalg.solve_banded."""
        up = self.sym_banded()
        ab = np.zeros((5, up.shape[1]))
        ab[0:3] = up
        ab[3, :-1] = up[1, 1:]
        ab[4, :-2] = up[0, 2:]
        return ab

    def sparse(self) -> sp.csc_matrix:
        up = self.sym_banded()
        N = up.shape[1]
        return sp.diags(
            [up[0, 2:], up[1, 1:], up[2], up[1, 1:], up[0, 2:]], [-2, -1, 0, 1, 2], shape=(N, N), format="csc"
        )

    def dense_symmetric(self) -> np.ndarray:
        return self.sparse().toarray()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((2, 2), self.general_banded(), rhs)

    def _lower_bound(self) -> float:
        up = self.sym_banded()
        return float(np.min(up[2]) - 4.0 / self.grid.h**2 - np.max(np.abs(up[1])) - 1.0)

    def negative_count(self) -> int:
        neg = eigvals_banded(self.sym_banded(), select="v", select_range=(self._lower_bound(), 0.0))
        return len(neg)

    def eigenvalues_near_zero(self) -> np.ndarray:
        m = self.negative_count()
        lo = max(m - 1, 0)
        return eigvals_banded(self.sym_banded(), select="i", select_range=(lo, m))

    def min_singular(self) -> float:
        """Smallest |eigenvalue| of the symmetrized Jacobian (= smallest singular value)."""
        return float(np.min(np.abs(self.eigenvalues_near_zero())))

    def singular_tol(self) -> float:
        # eigenvalues are only resolved to ~eps * ||J|| ~ eps * 4/h^2
        return max(1e-10, 1024.0 * np.finfo(float).eps * 4.0 / self.grid.h**2)


def jacobian(s: StatePair) -> CoupledJacobian:
    u, v, beta = s.u.values, s.v.values, s.beta
    return CoupledJacobian(s.grid, 3 * u**2 + beta * v**2, 3 * v**2 + beta * u**2, 2 * beta * u * v)


# -- reference points --------------------------------------------------------

def synchronized_point(k: int, beta: float, n: int = 400) -> StatePair:
    if beta <= -1.0:
        raise PoleAtMinusOne("synchronized branch exists only for beta > -1")
    w = find_w(k, n).profile
    u = w / math.sqrt(1.0 + beta)
    return StatePair(float(beta), u, u)


def semitrivial_point(k: int, beta: float, n: int = 400) -> StatePair:
    w = find_w(k, n).profile
    return StatePair(float(beta), w, w.grid.zeros())


def circle_solutions(k: int, theta: float, n: int = 400) -> StatePair:
    """(1, cos(theta) w_k, sin(theta) w_k): a solution for every theta at beta = 1."""
    w = find_w(k, n).profile
    return StatePair(1.0, math.cos(theta) * w, math.sin(theta) * w)


# -- Newton ------------------------------------------------------------------

def newton_solve(s0: StatePair, frozen_beta: float | None = None, tol: float = NEWTON_TOL,
                 max_iter: int = MAX_NEWTON, check_singular: bool = True) -> StatePair:
    """Damped Newton at fixed beta (Armijo backtracking on the residual norm)."""
    beta = s0.beta if frozen_beta is None else float(frozen_beta)
    grid = s0.grid
    Y = pack(s0)
    if check_singular:
        J = jacobian(StatePair(beta, s0.u, s0.v))
        sig = J.min_singular()
        if sig <= J.singular_tol():
            raise SingularJacobian(f"smallest singular value {sig:.3e} at beta={beta!r}")
    R = fixed_point_residual(Y, beta, grid)
    res = np.max(np.abs(R[0::2] / grid.nodes)), np.max(np.abs(R[1::2] / grid.nodes))
    norm = np.linalg.norm(R)
    for it in range(max_iter):
        if max(res) <= tol:
            return unpack(Y, beta, grid)
        J = jacobian(unpack(Y, beta, grid))
        try:
            d = J.solve(-strong_F(Y, beta, grid))
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        t = 1.0
        while True:
            Yt = Y + t * d
            Rt = fixed_point_residual(Yt, beta, grid)
            nt = np.linalg.norm(Rt)
            if np.isfinite(nt) and nt <= (1.0 - 1e-4 * t) * norm:
                break
            t *= 0.5
            if t < ARMIJO_MIN_STEP:
                raise NoConvergence(f"line search failed at iteration {it}, residual {norm:.3e}")
        Y, R, norm = Yt, Rt, nt
        res = np.max(np.abs(R[0::2] / grid.nodes)), np.max(np.abs(R[1::2] / grid.nodes))
    if max(res) <= tol:
        return unpack(Y, beta, grid)
    raise NoConvergence(f"no convergence in {max_iter} iterations (residual {max(res):.3e})")


# -- quadratic form and Morse index -----------------------------------------

def h_beta_form(k: int, beta: float, phi: RadialFunction, psi: RadialFunction) -> float:
    """Second variation of the energy at the synchronized solution of branch k."""
    if beta == -1.0:
        raise PoleAtMinusOne("H_beta has a pole at beta = -1")
    w = find_w(k, phi.grid.n_interior).profile
    q = phi.grid.quad_weights
    w2 = w.values**2
    quad = inner_products(phi, phi)[1] + inner_products(psi, psi)[1]
    pot = np.dot(q, w2 * ((beta + 3) / (beta + 1) * (phi.values**2 + psi.values**2)
                          + 4 * beta / (beta + 1) * phi.values * psi.values))
    return float(quad - pot)


def table_covering(k: int, beta: float, n: int):
    """Bifurcation table with enough rows to reach below ``beta``."""
    m = k + 4
    while True:
        table = table_for(k, n, m)
        if beta <= -1.0 or table.betas[-1] < beta or m > 200:
            return table
        m *= 2


def coupled_morse_index(k: int, beta: float, n: int = 400, guard: float = BIFURCATION_GUARD) -> int:
    """Negative eigenvalue count of the Jacobian at the synchronized point."""
    if not -1.0 < beta < 3.0:
        raise ValueError("beta must lie in (-1, 3)")
    table = table_covering(k, beta, n)
    near = np.abs(table.betas - beta) < guard
    if np.any(near):
        i = int(np.flatnonzero(near)[0]) + 1
        raise AtBifurcation(f"beta={beta!r} within {guard:g} of beta_{k},{i}")
    return jacobian(synchronized_point(k, beta, n)).negative_count()


def predicted_morse_index(k: int, beta: float, n: int = 400) -> int:
    """k + #{i : beta_{k,i} > beta}, read off the bifurcation table."""
    table = table_covering(k, beta, n)
    return k + int(np.count_nonzero(table.betas > beta))


# -- symmetry maps -------------------------------------------------------------

def map_T(l: int, s: StatePair) -> StatePair:
    """The four maps conjugating the beta-system to the moebius(beta)-system."""
    if s.beta <= -1.0:
        raise PoleAtMinusOne("T maps are defined for beta > -1")
    c = math.sqrt(1.0 + s.beta) / 2.0
    plus, minus = c * (s.u + s.v), c * (s.u - s.v)
    b = moebius(s.beta)
    if l == 1:
        return StatePair(b, plus, minus)
    if l == 2:
        return StatePair(b, minus, plus)
    if l == 3:
        return StatePair(b, -plus, minus)
    if l == 4:
        return StatePair(b, minus, -plus)
    raise ValueError("l must be one of 1, 2, 3, 4")
