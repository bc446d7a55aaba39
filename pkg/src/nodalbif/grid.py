"""Radial discretization of the unit ball in R^3.

Functions are sampled at the interior nodes r_j = j*h, j = 1..n, with the
Dirichlet value at r = 1 implied.  The radial Laplacian is discretized through
the substitution y = r*u, under which -u'' - (2/r) u' = -y''/r; the standard
three-point stencil on y with y(0) = 0 folds the regularity condition
u'(0) = 0 into the first row.  In the y variable every operator in this
package is a symmetric tridiagonal matrix, which is what the spectral and
Newton code below works with.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import AllBelowThreshold, GridMismatch

FOUR_PI = 4.0 * np.pi
DEFAULT_REL_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n_interior: int

    def __post_init__(self):
        if self.n_interior < 3:
            raise ValueError("need at least 3 interior nodes")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = self.h * np.arange(1, self.n_interior + 1)
        r.flags.writeable = False
        return r

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = FOUR_PI * self.nodes**2 * self.h
        w.flags.writeable = False
        return w

    @property
    def n(self) -> int:
        return self.n_interior

    def sample(self, fn) -> "RadialFunction":
        return RadialFunction(self, np.asarray(fn(self.nodes), dtype=float))

    def zeros(self) -> "RadialFunction":
        return RadialFunction(self, np.zeros(self.n_interior))

    def __repr__(self):
        return f"RadialGrid(n_interior={self.n_interior})"


@lru_cache(maxsize=32)
def make_grid(n_interior: int) -> RadialGrid:
    """Shared grid instance for ``n_interior`` (grids are immutable)."""
    return RadialGrid(int(n_interior))


@dataclass(frozen=True, eq=False)
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_interior,):
            raise GridMismatch(
                f"expected {self.grid.n_interior} samples, got shape {vals.shape}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "RadialFunction"):
        if other.grid.n_interior != self.grid.n_interior:
            raise GridMismatch(
                f"grids differ: n={self.grid.n_interior} vs n={other.grid.n_interior}"
            )

    def __add__(self, other):
        if isinstance(other, RadialFunction):
            self._check(other)
            return RadialFunction(self.grid, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, RadialFunction):
            self._check(other)
            return RadialFunction(self.grid, self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, RadialFunction):
            self._check(c)
            return RadialFunction(self.grid, self.values * c.values)
        return RadialFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return RadialFunction(self.grid, self.values / float(c))

    def __neg__(self):
        return RadialFunction(self.grid, -self.values)

    def __len__(self):
        return self.grid.n_interior

    # -- norms and point values -------------------------------------------
    @property
    def y(self) -> np.ndarray:
        """Samples of r*f, the variable in which the stencil is symmetric."""
        return self.grid.nodes * self.values

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(np.sqrt(inner_products(self, self)[0]))

    def h1_norm(self) -> float:
        return float(np.sqrt(inner_products(self, self)[1]))

    def value_at_origin(self) -> float:
        """Quadratic extrapolation f(0) with f'(0) = 0."""
        v = self.values
        return float((4.0 * v[0] - v[1]) / 3.0)

    def with_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.concatenate(([0.0], self.grid.nodes, [1.0]))
        v = np.concatenate(([self.value_at_origin()], self.values, [0.0]))
        return r, v

    # -- serialization ----------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(*self.with_endpoints()):
            writer.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RadialFunction":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if not rows or [c.strip() for c in rows[0]] != ["r", "value"]:
            raise ValueError("CSV header must be 'r,value'")
        vals = [float(row[1]) for row in rows[1:] if row]
        # drop the r=0 and r=1 endpoint rows
        inner = vals[1:-1]
        return cls(make_grid(len(inner)), np.array(inner))

    def to_json(self) -> str:
        return json.dumps({"n": self.grid.n_interior, "values": [float(v) for v in self.values]})

    @classmethod
    def from_json(cls, text: str) -> "RadialFunction":
        data = json.loads(text)
        return cls(make_grid(int(data["n"])), np.array(data["values"], dtype=float))


@dataclass(frozen=True, eq=False)
class RadialOperator:
    """Tridiagonal discretization of u -> -u'' - (2/r) u' + c(r) u.

    ``sub[j]`` multiplies u_{j-1}, ``sup[j]`` multiplies u_{j+1}; sub[0] and
    sup[-1] are zero (origin regularity, Dirichlet at r=1).
    """

    grid: RadialGrid
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    c: RadialFunction = field(repr=False)

    def apply(self, f: RadialFunction | np.ndarray) -> np.ndarray:
        u = f.values if isinstance(f, RadialFunction) else np.asarray(f)
        out = self.diag * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def symmetrized(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, off-diagonal) of R A R^{-1}, R = diag(r_j).

        This is the similarity transform to the y = r*u variable; D*A with
        D = diag(r_j^2) equals R (R A R^{-1}) R and is therefore symmetric.
        """
        h = self.grid.h
        return self.diag.copy(), np.full(self.grid.n_interior - 1, -1.0 / h**2)

    def dense(self) -> np.ndarray:
        n = self.grid.n_interior
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return a


def assemble_operator(grid: RadialGrid, c: RadialFunction | np.ndarray | float) -> RadialOperator:
    if isinstance(c, RadialFunction):
        if c.grid.n_interior != grid.n_interior:
            raise GridMismatch("coefficient sampled on a different grid")
        cf = c
    else:
        cf = RadialFunction(grid, np.broadcast_to(np.asarray(c, dtype=float), (grid.n_interior,)))
    r, h = grid.nodes, grid.h
    n = grid.n_interior
    sub = np.zeros(n)
    sup = np.zeros(n)
    sub[1:] = -r[:-1] / (r[1:] * h**2)
    sup[:-1] = -r[1:] / (r[:-1] * h**2)
    diag = 2.0 / h**2 + cf.values
    return RadialOperator(grid, sub, diag, sup, cf)


def laplacian_y(y: np.ndarray, h: float) -> np.ndarray:
    """-y'' by the three-point stencil with y = 0 at both ends."""
    out = 2.0 * y
    out[1:] -= y[:-1]
    out[:-1] -= y[1:]
    return out / h**2


def dirichlet_form(f: RadialFunction, g: RadialFunction) -> float:
    """Discrete integral of grad f . grad g over the ball.

    Uses edge differences of y = r*f, consistent with the operator stencil
    (summation by parts gives <-Lap f, g> exactly).
    """
    h = f.grid.h
    yf = np.concatenate(([0.0], f.y, [0.0]))
    yg = np.concatenate(([0.0], g.y, [0.0]))
    return float(FOUR_PI / h * np.dot(np.diff(yf), np.diff(yg)))


def inner_products(f: RadialFunction, g: RadialFunction) -> tuple[float, float, float]:
    """Return (int f g, int grad f.grad g + f g, int f^4) over B_1."""
    if f.grid.n_interior != g.grid.n_interior:
        raise GridMismatch("inner product of functions on different grids")
    w = f.grid.quad_weights
    l2 = float(np.dot(w, f.values * g.values))
    h1 = dirichlet_form(f, g) + l2
    l4 = float(np.dot(w, f.values**4))
    return l2, h1, l4


def _significant(values: np.ndarray, rel_threshold: float) -> np.ndarray:
    sup = np.max(np.abs(values)) if values.size else 0.0
    if not np.isfinite(sup):
        raise ValueError("non-finite samples")
    if sup == 0.0:
        raise AllBelowThreshold("function is identically zero on the grid")
    return np.abs(values) > rel_threshold * sup


def nodal_count(f: RadialFunction | np.ndarray, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> int:
    """Number of strict sign changes among samples above the amplitude floor."""
    if not 0.0 < rel_threshold < 0.5:
        raise ValueError("rel_threshold must lie in (0, 0.5)")
    vals = f.values if isinstance(f, RadialFunction) else np.asarray(f, dtype=float)
    mask = _significant(vals, rel_threshold)
    s = np.sign(vals[mask])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _nodal_segments(vals: np.ndarray, rel_threshold: float) -> list[tuple[int, int, float]]:
    mask = _significant(vals, rel_threshold)
    idx = np.flatnonzero(mask)
    signs = np.sign(vals[idx])
    segments = []
    start = 0
    for a, b in zip(range(len(idx) - 1), range(1, len(idx))):
        if signs[a] != signs[b]:
            lo, hi = idx[a], idx[b]
            # cut at the first sample already carrying the new sign
            cut = lo + 1 + int(np.argmax(np.sign(vals[lo + 1 : hi + 1]) == signs[b]))
            segments.append((start, cut, float(signs[a])))
            start = cut
    segments.append((start, len(vals), float(signs[-1])))
    return segments


def bump_decompose(f: RadialFunction, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> list[RadialFunction]:
    """Split f into its bumps: one signed piece per nodal annulus.

    The bumps have disjoint supports and sum back to f up to the samples below
    the amplitude floor.
    """
    vals = f.values
    bumps = []
    for start, stop, sign in _nodal_segments(vals, rel_threshold):
        b = np.zeros_like(vals)
        seg = vals[start:stop]
        b[start:stop] = np.where(np.sign(seg) == sign, seg, 0.0)
        bumps.append(RadialFunction(f.grid, b))
    return bumps
