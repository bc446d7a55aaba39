"""Branch switching and pseudo-arclength continuation of bifurcating branches.

A branch point is X = (Y, beta) with Y the interleaved y-vector of (u, v).
Distances use the metric  <X1, X2> = theta * <Y1, Y2>_{L2} + beta1 * beta2
with theta = 1 / ||w_k||^2, so that a unit step moves the profiles by about
their own size or beta by about one unit.

Families: "U" bifurcates from the synchronized curve at beta_{k,i} with
kernel (phi, -phi); "W" bifurcates from the semi-trivial curve (w_k, 0) at
moebius(beta_{k,i}) with kernel (0, phi).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .coupled import (
    NodalSignature,
    StatePair,
    dF_dbeta,
    fixed_point_residual,
    jacobian,
    newton_solve,
    pack,
    residual,
    semitrivial_point,
    signature,
    strong_F,
    table_covering,
    synchronized_point,
    unpack,
)
from .errors import (
    CorrectorStalled,
    NoConvergence,
    SignatureBroken,
    SingularJacobian,
    SwitchFailed,
)
from .grid import FOUR_PI, RadialFunction, RadialGrid, bump_decompose, inner_products, make_grid
from .scalar import find_w, helmholtz_solve
from .spectral import spectrum_for, table_for

log = logging.getLogger(__name__)

DS_MIN, DS_MAX = 1e-5, 0.1
GROW, SHRINK = 1.3, 0.5
EASY_ITERS = 4
MAX_CORRECTOR = 10
CORRECTOR_TOL = 1e-10
POINT_TOL = 1e-8
NORM_OVERFLOW = 1e6
FAMILIES = ("U", "W")


@dataclass(frozen=True)
class Family:
    kind: str
    k: int
    i: int

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.kind!r}")
        if self.k < 1 or self.i < 1:
            raise ValueError("k and i must be >= 1")
        if self.i == self.k:
            raise ValueError("i = k is the circle at beta = 1, not a beta-branch")

    @property
    def label(self) -> str:
        return f"{self.kind}({self.k},{self.i})"

    def expected_counts(self) -> tuple[int, int, int, int]:
        k, i = self.k, self.i
        if self.kind == "U":
            return (k - 1, k - 1, k - 1, i - 1)
        return (k - 1, i - 1, k - 1, k - 1)

    def origin_ok(self, sig: NodalSignature, s: StatePair) -> bool:
        u0, v0 = s.u.value_at_origin(), s.v.value_at_origin()
        if self.kind == "U":
            return u0 > 0 and v0 > 0
        return u0 > abs(v0)

    def matches(self, s: StatePair, rel_threshold: float = 1e-6) -> bool:
        sig = signature(s, rel_threshold)
        return sig.counts == self.expected_counts() and self.origin_ok(sig, s)

    def bifurcation_beta(self, n: int) -> float:
        row = table_for(self.k, n, max(self.k, self.i) + 2).row(self.i)
        return row.beta if self.kind == "U" else row.beta_tilde

    def bifurcation_point(self, n: int) -> StatePair:
        b = self.bifurcation_beta(n)
        if self.kind == "U":
            return synchronized_point(self.k, b, n)
        return semitrivial_point(self.k, b, n)

    def opens_left(self) -> bool:
        """Side of the bifurcation parameter on which the branch lives."""
        if self.kind == "U":
            return self.i > self.k
        return self.i < self.k

    def window(self, n: int, width: float = 1.0) -> tuple[float, float]:
        b = self.bifurcation_beta(n)
        return (b - width, b) if self.opens_left() else (b, b + width)

    def projection_bound(self) -> tuple[float, float]:
        """Interval that must contain every beta on the branch."""
        if self.kind == "U":
            return (-math.inf, 0.0) if self.i > self.k else (1.0, math.inf)
        return (3.0, math.inf) if self.i > self.k else (-math.inf, 1.0)


def _family(family, k=None, i=None) -> Family:
    if isinstance(family, Family):
        return family
    return Family(str(family).upper(), int(k), int(i))


@dataclass
class Branch:
    family: Family
    points: list[StatePair]
    signature: tuple[int, int, int, int]
    meta: dict = field(default_factory=dict)

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points])

    def sup_norms(self) -> np.ndarray:
        return np.array([p.sup_norms() for p in self.points]).reshape(-1, 2)

    def to_dict(self, profiles: bool = True) -> dict:
        pts = []
        for p in self.points:
            su, sv = p.sup_norms()
            d = {"beta": p.beta, "sup_u": su, "sup_v": sv}
            if profiles:
                d["u"] = [float(x) for x in p.u.values]
                d["v"] = [float(x) for x in p.v.values]
            pts.append(d)
        return {
            "family": self.family.kind,
            "k": self.family.k,
            "i": self.family.i,
            "signature": list(self.signature),
            "points": pts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Branch":
        fam = Family(data["family"], int(data["k"]), int(data["i"]))
        pts = []
        for p in data["points"]:
            if "u" not in p or "v" not in p:
                raise ValueError("branch points carry no profiles")
            grid = make_grid(len(p["u"]))
            pts.append(StatePair(float(p["beta"]), RadialFunction(grid, p["u"]), RadialFunction(grid, p["v"])))
        return cls(fam, pts, tuple(int(c) for c in data["signature"]))


# -- metric ------------------------------------------------------------------

class Metric:
    def __init__(self, grid: RadialGrid, k: int):
        w = find_w(k, grid.n_interior).profile
        self.theta = 1.0 / w.l2_norm() ** 2
        # <Y1,Y2>_{L2} = 4 pi h sum y1 y2 in the y variable
        self.wy = self.theta * FOUR_PI * grid.h

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.wy * np.dot(a[:-1], b[:-1]) + a[-1] * b[-1])

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(self.dot(a, a))

    def unit(self, a: np.ndarray) -> np.ndarray:
        return a / self.norm(a)


def _state_vec(s: StatePair) -> np.ndarray:
    return np.append(pack(s), s.beta)


def _to_state(X: np.ndarray, grid: RadialGrid) -> StatePair:
    return unpack(X[:-1], X[-1], grid)


def _fp_sup(X: np.ndarray, grid: RadialGrid) -> float:
    R = fixed_point_residual(X[:-1], X[-1], grid)
    return float(np.max(np.abs(R) / np.repeat(grid.nodes, 2)))


# -- tangent and corrector ---------------------------------------------------

def branch_tangent(k: int, i: int, family="U", n: int = 400) -> StatePair:
    """Kernel direction at the bifurcation point, unit L2 norm, beta part 0.

    U: (phi_{k,i}, -phi_{k,i}) / norm;  W: (0, phi_{k,i}) / norm.
    """
    fam = _family(family, k, i)
    phi = spectrum_for(fam.k, n, max(fam.k, fam.i) + 2).eigenfunctions[fam.i - 1]
    if fam.kind == "U":
        d = StatePair(0.0, phi, -phi)
    else:
        d = StatePair(0.0, phi.grid.zeros(), phi)
    norm = math.sqrt(d.u.l2_norm() ** 2 + d.v.l2_norm() ** 2)
    return StatePair(0.0, d.u / norm, d.v / norm)


def _bordered(X: np.ndarray, grid: RadialGrid, row: np.ndarray) -> sp.csc_matrix:
    J = jacobian(_to_state(X, grid)).sparse()
    col = dF_dbeta(X[:-1], grid)
    return sp.bmat([[J, sp.csc_matrix(col[:, None])], [sp.csr_matrix(row[None, :-1]), sp.csc_matrix([[row[-1]]])]], format="csc")


def correct(Xp: np.ndarray, tau: np.ndarray, anchor: np.ndarray, ds: float, grid: RadialGrid,
            metric: Metric, tol: float = CORRECTOR_TOL, max_iter: int = MAX_CORRECTOR) -> tuple[np.ndarray, int]:
    """Newton on F(X) = 0, <tau, X - anchor> = ds, starting from Xp.

    Returns (X, iterations).  Raises NoConvergence when the corrector fails.
    """
    row = np.append(metric.wy * tau[:-1], tau[-1])
    X = Xp.copy()
    prev = math.inf
    for it in range(1, max_iter + 1):
        F = strong_F(X[:-1], X[-1], grid)
        g = metric.dot(tau, X - anchor) - ds
        try:
            lu = splu(_bordered(X, grid, row))
        except RuntimeError as exc:
            raise NoConvergence(f"singular bordered system: {exc}") from exc
        dX = lu.solve(-np.append(F, g))
        if not np.all(np.isfinite(dX)):
            raise NoConvergence("non-finite corrector update")
        X = X + dX
        step = metric.norm(dX)
        res = _fp_sup(X, grid)
        if not np.isfinite(res) or (it > 2 and res > 10 * prev):
            raise NoConvergence(f"corrector diverging (residual {res:.3e})")
        if res <= tol and step <= 1e-6:
            return X, it
        prev = res
    raise NoConvergence(f"corrector not converged after {max_iter} iterations (residual {res:.3e})")


def switch_branch(k: int, i: int, family="U", ds0: float = 1e-3, n: int = 400,
                  rel_threshold: float = 1e-6) -> StatePair:
    """First point off the trivial curve, on the side of the canonical sign."""
    fam = _family(family, k, i)
    grid = make_grid(n)
    metric = Metric(grid, fam.k)
    X0 = _state_vec(fam.bifurcation_point(n))
    t = branch_tangent(fam.k, fam.i, fam.kind, n)
    tau = metric.unit(np.append(pack(t), 0.0))
    ds = ds0
    tried = []
    for _ in range(6):
        for side in (1.0, -1.0):
            ts = side * tau
            try:
                X, _ = correct(X0 + ds * ts, ts, X0, ds, grid, metric)
            except NoConvergence as exc:
                tried.append(f"ds={ds:g} side={side:+g}: {exc}")
                continue
            s = _to_state(X, grid)
            if fam.matches(s, rel_threshold):
                return s
            tried.append(f"ds={ds:g} side={side:+g}: signature {signature(s, rel_threshold).counts}")
        ds *= SHRINK
    raise SwitchFailed(f"{fam.label}: no side gave the predicted signature; " + "; ".join(tried))


def _land(X_prev: np.ndarray, X_new: np.ndarray, edge: float, grid: RadialGrid) -> StatePair | None:
    """Solution at beta = edge from linear interpolation across the edge."""
    b0, b1 = X_prev[-1], X_new[-1]
    t = (edge - b0) / (b1 - b0)
    guess = _to_state(X_prev + t * (X_new - X_prev), grid)
    try:
        return newton_solve(guess, frozen_beta=edge, check_singular=False)
    except (NoConvergence, SingularJacobian):
        return None


def continue_branch(start: StatePair, family, window: tuple[float, float], max_points: int = 2000,
                    previous: StatePair | None = None, ds: float = 1e-2, ds_min: float = DS_MIN,
                    ds_max: float = DS_MAX, rel_threshold: float = 1e-6,
                    k: int | None = None, i: int | None = None) -> Branch:
    """Pseudo-arclength continuation from ``start`` until beta leaves ``window``.

    The first secant runs from ``previous`` (default: the family's
    bifurcation point) to ``start``.
    """
    fam = _family(family, k, i)
    grid = start.grid
    n = grid.n_interior
    lo, hi = window
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    if not fam.matches(start, rel_threshold):
        raise SignatureBroken(f"{fam.label}: start point has signature {signature(start, rel_threshold).counts}")
    metric = Metric(grid, fam.k)
    prev = previous if previous is not None else fam.bifurcation_point(n)
    X_prev, X = _state_vec(prev), _state_vec(start)
    points = [start]
    stats = {"accepted": 1, "rejected": 0, "signature_rejections": 0, "corrector_iterations": [],
             "ds_min_used": ds, "ds_max_used": ds, "stop": "max_points", "bifurcation_beta": fam.bifurcation_beta(n)}
    easy = 0
    in_window = lo <= start.beta <= hi
    while len(points) < max_points:
        tau = metric.unit(X - X_prev)
        try:
            Xn, iters = correct(X + ds * tau, tau, X, ds, grid, metric)
            sn = _to_state(Xn, grid)
            if not fam.matches(sn, rel_threshold):
                stats["signature_rejections"] += 1
                raise NoConvergence(f"signature {signature(sn, rel_threshold).counts} at beta={Xn[-1]:.6g}")
        except NoConvergence as exc:
            stats["rejected"] += 1
            easy = 0
            if ds * SHRINK < ds_min:
                if stats["signature_rejections"] and "signature" in str(exc):
                    raise SignatureBroken(f"{fam.label}: {exc} persists at ds={ds:.2e}") from exc
                raise CorrectorStalled(f"{fam.label} at beta={X[-1]:.6g}: {exc}") from exc
            ds *= SHRINK
            stats["ds_min_used"] = min(stats["ds_min_used"], ds)
            continue
        stats["corrector_iterations"].append(iters)
        bn = Xn[-1]
        if not lo <= bn <= hi:
            if in_window:
                edge = lo if bn < lo else hi
                landed = _land(X, Xn, edge, grid)
                if landed is not None and fam.matches(landed, rel_threshold):
                    points.append(landed)
                stats["stop"] = f"window_edge:{edge!r}"
                break
        else:
            in_window = True
        points.append(sn)
        X_prev, X = X, Xn
        if max(sn.sup_norms()) > NORM_OVERFLOW:
            stats["stop"] = "norm_overflow"
            break
        easy = easy + 1 if iters <= EASY_ITERS else 0
        if easy >= 3:
            ds = min(ds * GROW, ds_max)
            easy = 0
            stats["ds_max_used"] = max(stats["ds_max_used"], ds)
    stats["accepted"] = len(points)
    return Branch(fam, points, fam.expected_counts(), stats)


def trace_branch(k: int, i: int, family="U", width: float = 1.0, n: int = 400, ds0: float = 1e-3,
                 max_points: int = 2000, window: tuple[float, float] | None = None, **kwargs) -> Branch:
    """switch_branch followed by continue_branch over the predicted window."""
    fam = _family(family, k, i)
    start = switch_branch(fam.k, fam.i, fam.kind, ds0, n)
    win = window if window is not None else fam.window(n, width)
    return continue_branch(start, fam, win, max_points, **kwargs)


# -- checks on finished branches ---------------------------------------------

def max_point_residual(branch: Branch) -> float:
    return max(residual(p)[2] for p in branch.points)


def window_violations(branch: Branch) -> list[float]:
    lo, hi = branch.family.projection_bound()
    return [b for b in branch.betas if not lo < b < hi]


def point_at(branch: Branch, beta: float) -> StatePair:
    """Branch solution at a given beta, refined from the bracketing points."""
    b = branch.betas
    for j in range(len(b) - 1):
        if (b[j] - beta) * (b[j + 1] - beta) <= 0:
            X0, X1 = _state_vec(branch.points[j]), _state_vec(branch.points[j + 1])
            grid = branch.points[0].grid
            t = 0.0 if b[j + 1] == b[j] else (beta - b[j]) / (b[j + 1] - b[j])
            return newton_solve(_to_state(X0 + t * (X1 - X0), grid), frozen_beta=beta, check_singular=False)
    raise ValueError(f"beta={beta} not covered by the branch (range {b.min():.4g}..{b.max():.4g})")


def limit_residual(s: StatePair) -> float:
    """Sup residual of the scaled pair in -Lap U + U = U V^2, -Lap V + V = U^2 V."""
    grid = s.grid
    c = math.sqrt(1.0 + s.beta)
    U, V = c * s.u, c * s.v
    r = grid.nodes
    yu, yv = U.y, V.y
    ru = yu - helmholtz_solve(grid, yu * yv**2 / r**2)
    rv = yv - helmholtz_solve(grid, yu**2 * yv / r**2)
    return float(max(np.max(np.abs(ru / r)), np.max(np.abs(rv / r))))


@dataclass
class AsymptoticsReport:
    betas: list[float]
    scaled_sup: list[float]
    limit_residuals: list[float]
    signatures: list[tuple]

    @property
    def spread(self) -> float:
        a = np.array(self.scaled_sup)
        return float((a.max() - a.min()) / a.max())

    @property
    def residual_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.limit_residuals) < 0))

    def to_dict(self) -> dict:
        return {
            "betas": self.betas,
            "sqrt_beta_sup": self.scaled_sup,
            "spread": self.spread,
            "limit_residuals": self.limit_residuals,
            "residual_decreasing": self.residual_decreasing,
            "signatures": [list(s) for s in self.signatures],
        }


def asymptotics_check(branch: Branch, betas=(20.0, 40.0, 80.0)) -> AsymptoticsReport:
    pts = [point_at(branch, b) for b in betas]
    return AsymptoticsReport(
        betas=[float(b) for b in betas],
        scaled_sup=[math.sqrt(p.beta) * max(p.sup_norms()) for p in pts],
        limit_residuals=[limit_residual(p) for p in pts],
        signatures=[signature(p).counts for p in pts],
    )


# -- nonexistence probe --------------------------------------------------------

def _bump_seed(rng: np.random.Generator, grid: RadialGrid, nodes: int, heights: list[float]) -> np.ndarray:
    """Alternating Gaussian bumps on ``nodes + 1`` random annuli."""
    cuts = np.sort(rng.uniform(0.05, 0.95, nodes))
    edges = np.concatenate(([0.0], cuts, [1.0]))
    r = grid.nodes
    width = rng.uniform(0.15, 0.4)
    scale = rng.uniform(0.25, 1.0)
    sign = rng.choice([-1.0, 1.0])
    out = np.zeros_like(r)
    for j in range(nodes + 1):
        a, b = edges[j], edges[j + 1]
        # the innermost bump is centred at the origin so that u'(0) = 0
        mid, wd = (0.0, 2.0 * width * b) if j == 0 else (0.5 * (a + b), width * (b - a))
        amp = heights[min(j, len(heights) - 1)] * rng.uniform(0.6, 1.4)
        out += sign * (-1.0) ** j * amp * np.exp(-(((r - mid) / wd) ** 2))
    return scale * out * (1.0 - r**2)


def nehari_scale(u: RadialFunction, v: RadialFunction, beta: float) -> tuple[RadialFunction, RadialFunction]:
    """Rescale (u, v) -> (s u, t v) so that each component satisfies its Nehari identity.

    With A = ||.||_{H1}^2, B = int .^4 and C = int u^2 v^2 the identities
    are linear in (s^2, t^2).  Without a positive solution both components
    get the common factor matching the summed identity.
    """
    q = u.grid.quad_weights
    au, av = inner_products(u, u)[1], inner_products(v, v)[1]
    bu, bv = float(np.dot(q, u.values**4)), float(np.dot(q, v.values**4))
    c = float(np.dot(q, u.values**2 * v.values**2))
    det = bu * bv - (beta * c) ** 2
    if det != 0.0:
        S = (au * bv - beta * c * av) / det
        T = (av * bu - beta * c * au) / det
        if S > 0 and T > 0:
            return math.sqrt(S) * u, math.sqrt(T) * v
    s = math.sqrt((au + av) / (bu + bv + 2.0 * beta * c)) if bu + bv + 2.0 * beta * c > 0 else 1.0
    return s * u, s * v


@dataclass
class ProbeReport:
    P: int
    Q: int
    attempts: int
    converged: list[dict]

    @property
    def hits(self) -> int:
        return sum(1 for c in self.converged if (c["n_u"], c["n_v"]) in ((self.P, self.Q), (self.Q, self.P)))

    def to_dict(self) -> dict:
        return {"P": self.P, "Q": self.Q, "attempts": self.attempts, "converged": self.converged, "hits": self.hits}


def nonexistence_probe(P: int, Q: int, beta_window: tuple[float, float] = (3.0, 3.0), attempts: int = 50,
                       n: int = 400, seed: int = 0) -> ProbeReport:
    """Newton from randomized (P, Q)-nodal seeds; report what converges.

    A hit is a converged solution whose components have nodal numbers
    {P, Q}.  Absence of hits is evidence, not proof, of nonexistence.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(n)
    heights = [b.sup_norm() for b in bump_decompose(find_w(max(P, Q) + 1, n).profile)]
    lo, hi = beta_window
    found = []
    for a in range(attempts):
        beta = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        u = RadialFunction(grid, _bump_seed(rng, grid, P, heights))
        v = RadialFunction(grid, _bump_seed(rng, grid, Q, heights))
        u, v = nehari_scale(u, v, beta)
        try:
            s = newton_solve(StatePair(beta, u, v), check_singular=False, max_iter=200)
        except (NoConvergence, SingularJacobian):
            continue
        if max(s.sup_norms()) < 1e-6:
            continue
        sig = signature(s)
        found.append({"attempt": a, "beta": beta, "n_u": sig.n_u, "n_v": sig.n_v,
                      "n_sum": sig.n_sum, "n_diff": sig.n_diff,
                      "sup_u": s.sup_norms()[0], "sup_v": s.sup_norms()[1]})
    return ProbeReport(P, Q, attempts, found)


# -- bifurcation detection along the synchronized curve ----------------------

@dataclass
class DetectedBifurcation:
    i: int
    tabulated: float
    located: float
    min_singular: float
    index_left: int
    index_right: int


def _sync_index(k: int, beta: float, n: int) -> int:
    return jacobian(synchronized_point(k, beta, n)).negative_count()


def detect_bifurcations(k: int, n: int = 400, beta_range: tuple[float, float] = (-0.9, 2.9),
                        samples: int = 96, tol: float = 1e-7) -> list[DetectedBifurcation]:
    """Locate index jumps of the Jacobian along the synchronized curve.

    Each sampling interval with an index change is bisected recursively, so
    several crossings inside one interval are separated.
    """
    table = table_covering(k, beta_range[0], n)
    found: list[DetectedBifurcation] = []

    def split(a: float, b: float, ia: int, ib: int):
        if ia == ib:
            return
        if b - a <= tol:
            loc = 0.5 * (a + b)
            i = int(np.argmin(np.abs(table.betas - loc))) + 1
            sig = jacobian(synchronized_point(k, loc, n)).min_singular()
            found.append(DetectedBifurcation(i, float(table.row(i).beta), float(loc), float(sig), ia, ib))
            return
        mid = 0.5 * (a + b)
        im = _sync_index(k, mid, n)
        split(a, mid, ia, im)
        split(mid, b, im, ib)

    grid_b = np.linspace(beta_range[0], beta_range[1], samples)
    idx = [_sync_index(k, b, n) for b in grid_b]
    for j in range(samples - 1):
        split(grid_b[j], grid_b[j + 1], idx[j], idx[j + 1])
    return found


def branch_separation(a: Branch, b: Branch) -> float:
    """Smallest sup-distance between points of two branches at matching beta.

    Points of ``b`` are compared against ``a`` refined to the same beta, for
    every point of ``b`` whose beta lies inside ``a``'s range.
    """
    ba = a.betas
    lo, hi = ba.min(), ba.max()
    best = math.inf
    for p in b.points:
        if not lo <= p.beta <= hi:
            continue
        q = point_at(a, p.beta)
        d = max((q.u - p.u).sup_norm(), (q.v - p.v).sup_norm())
        # the mirrored images (v, u) are solutions too
        d_swap = max((q.v - p.u).sup_norm(), (q.u - p.v).sup_norm())
        best = min(best, d, d_swap)
    return best
