"""Weighted eigenproblem -Lap phi + phi = lam w_k^2 phi and bifurcation tables.

In the y = r*phi variable the problem is the symmetric tridiagonal pencil
K y = lam W y with K = -d^2/dr^2 + 1 (positive definite) and W = diag(w_k^2)
(semi-definite: it vanishes near the zeros of w_k).  Eigenvalues are found by
Sturm-count bisection on K - lam W, eigenvectors by inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh, solve_banded

from .errors import InvariantViolated, PoleAtMinusOne, WeightDegenerate
from .grid import FOUR_PI, RadialFunction, nodal_count
from .scalar import ScalarSolution, find_w

GAP_DELTA = 1e-6
UNIT_TOL = 1e-6


def moebius(beta: float) -> float:
    """f(beta) = (3 - beta) / (1 + beta); an involution on (-1, inf)."""
    if beta == -1.0:
        raise PoleAtMinusOne("moebius map has a pole at beta = -1")
    return (3.0 - beta) / (1.0 + beta)


def beta_from_lambda(lam: float) -> float:
    return 4.0 / (lam + 1.0) - 1.0


def pencil(w: ScalarSolution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(diag K, offdiag K, diag W) in the y variable."""
    h = w.grid.h
    n = w.grid.n_interior
    return (np.full(n, 2.0 / h**2 + 1.0), np.full(n - 1, -1.0 / h**2), w.profile.values**2)


def sturm_count(d: np.ndarray, e: np.ndarray, wt: np.ndarray, lam) -> np.ndarray:
    """Number of eigenvalues of the pencil (tridiag(d, e), diag(wt)) below lam.

    Counts negative pivots of the LDL^T factorization of K - lam W
    (Sylvester inertia).  ``lam`` may be an array; the count is vectorized
    over it.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    e2 = e**2
    tiny = np.finfo(float).tiny
    q = d[0] - lam * wt[0]
    count = (q < 0).astype(int)
    for j in range(1, len(d)):
        q = np.where(q == 0.0, -tiny, q)
        q = d[j] - lam * wt[j] - e2[j - 1] / q
        count += q < 0
    return count


def sturm_bisect(d, e, wt, m: int, rtol: float = 4e-16) -> np.ndarray:
    """The m smallest pencil eigenvalues by simultaneous bisection."""
    hi_bound = 1.0
    while sturm_count(d, e, wt, hi_bound)[0] < m:
        hi_bound *= 2.0
        if hi_bound > 1e300:
            raise WeightDegenerate("fewer than m finite eigenvalues")
    lo = np.zeros(m)
    hi = np.full(m, hi_bound)
    target = np.arange(1, m + 1)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        c = sturm_count(d, e, wt, mid)
        below = c >= target
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        if np.all(hi - lo <= rtol * hi):
            break
    return 0.5 * (lo + hi)


def inverse_iteration(d, e, wt, lam: float, iters: int = 4) -> np.ndarray:
    n = len(d)
    sigma = lam - 1e-9 * max(1.0, abs(lam))
    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[2, :-1] = e
    ab[1] = d - sigma * wt
    x = np.linspace(1.0, 2.0, n)
    for _ in range(iters):
        x = solve_banded((1, 1), ab, wt * x)
        x /= np.sqrt(np.dot(wt, x * x))
    return x


@dataclass(frozen=True, eq=False)
class Spectrum:
    k: int
    eigenvalues: np.ndarray
    eigenfunctions: list[RadialFunction] = field(repr=False)
    nodal_counts: list[int]
    weight: ScalarSolution = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.eigenvalues)


def validate_spectrum(spec: Spectrum) -> None:
    lam = spec.eigenvalues
    k = spec.k
    if np.any(lam <= 0):
        raise InvariantViolated("positivity", f"min eigenvalue {lam.min():.3e}")
    if np.any(np.diff(lam) <= 0):
        raise InvariantViolated("strict_ordering", "eigenvalues not strictly increasing")
    for i, c in enumerate(spec.nodal_counts, start=1):
        if c != i - 1:
            raise InvariantViolated("nodal_counts", f"phi_{k},{i} has {c} sign changes, expected {i - 1}")
    if abs(lam[k - 1] - 1.0) > UNIT_TOL:
        raise InvariantViolated("unit_eigenvalue", f"lambda_{k},{k} = {lam[k - 1]!r}")
    phi = spec.eigenfunctions[k - 1].values
    wk = spec.weight.profile.values
    q = spec.weight.grid.quad_weights
    cos = abs(np.dot(q, phi * wk)) / math.sqrt(np.dot(q, phi * phi) * np.dot(q, wk * wk))
    if cos < 1.0 - 1e-8:
        raise InvariantViolated("unit_eigenfunction", f"phi_{k},{k} not parallel to w_{k} (cos={cos:.12f})")
    inside = (lam > 1.0 + GAP_DELTA) & (lam < 3.0 - GAP_DELTA)
    if np.any(inside):
        raise InvariantViolated("spectral_gap", f"eigenvalue(s) {lam[inside]} inside (1, 3)")
    if len(lam) > k and lam[k] <= 3.0:
        raise InvariantViolated("spectral_gap", f"lambda_{k},{k + 1} = {lam[k]:.6g} <= 3")


def weighted_eigs(w: ScalarSolution, m: int | None = None, validate: bool = True) -> Spectrum:
    """Smallest m eigenpairs of -Lap phi + phi = lam w^2 phi (default m = k+4)."""
    k = w.k
    m = k + 4 if m is None else int(m)
    if m < k + 2:
        raise ValueError(f"need m >= k+2 = {k + 2}")
    d, e, wt = pencil(w)
    if np.count_nonzero(wt > 1e-14 * wt.max()) < m:
        raise WeightDegenerate(f"weight has fewer than {m} nonzero entries")
    lam = sturm_bisect(d, e, wt, m)
    grid = w.grid
    r = grid.nodes
    funcs, counts = [], []
    for val in lam:
        y = inverse_iteration(d, e, wt, val)
        # y is normalized so that sum wt*y^2 = 1; rescale to int w^2 phi^2 = 1
        phi = y / r / math.sqrt(FOUR_PI * grid.h)
        if phi[0] < 0:
            phi = -phi
        f = RadialFunction(grid, phi)
        funcs.append(f)
        counts.append(nodal_count(f))
    spec = Spectrum(k=k, eigenvalues=lam, eigenfunctions=funcs, nodal_counts=counts, weight=w)
    if validate:
        validate_spectrum(spec)
    return spec


def dense_weighted_eigs(w: ScalarSolution, m: int) -> np.ndarray:
    """Oracle: the same pencil by a dense symmetric-definite eigensolver.

    Solves W y = mu K y (K positive definite) and returns lam = 1/mu for the m
    largest mu; independent of the Sturm/bisection path.
    """
    d, e, wt = pencil(w)
    K = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    mu = eigh(np.diag(wt), K, eigvals_only=True)
    mu = np.sort(mu)[::-1][:m]
    return 1.0 / mu


@dataclass(frozen=True)
class BifurcationRow:
    i: int
    lam: float
    beta: float
    beta_tilde: float
    window: str  # for the synchronized family: "left", "right" or "circle"

    @property
    def semitrivial_window(self) -> str:
        return {"left": "right", "right": "left", "circle": "circle"}[self.window]


@dataclass(frozen=True)
class BifurcationTable:
    k: int
    rows: tuple[BifurcationRow, ...]

    def row(self, i: int) -> BifurcationRow:
        return self.rows[i - 1]

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.rows])

    @property
    def beta_tildes(self) -> np.ndarray:
        return np.array([r.beta_tilde for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rows": [
                {"i": r.i, "lambda": r.lam, "beta": r.beta, "beta_tilde": r.beta_tilde, "window": r.window}
                for r in self.rows
            ],
        }


def bifurcation_table(spec: Spectrum) -> BifurcationTable:
    rows = []
    for i, lam in enumerate(spec.eigenvalues, start=1):
        lam = float(lam)
        if i == spec.k:
            # lambda_kk = 1 is exact for the continuous problem; the grid value
            # is 1 to solver accuracy and the table reports the formula value
            lam = 1.0
        beta = beta_from_lambda(lam)
        window = "circle" if i == spec.k else ("left" if i > spec.k else "right")
        rows.append(BifurcationRow(i, lam, beta, moebius(beta), window))
    return BifurcationTable(spec.k, tuple(rows))


@lru_cache(maxsize=128)
def spectrum_for(k: int, n: int, m: int | None = None) -> Spectrum:
    """Cached weighted spectrum of w_k on an n-node grid."""
    return weighted_eigs(find_w(k, n), m)


@lru_cache(maxsize=128)
def table_for(k: int, n: int, m: int | None = None) -> BifurcationTable:
    return bifurcation_table(spectrum_for(k, n, m))
