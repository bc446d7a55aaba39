"""The verification suite behind ``nodalbif verify`` and ``compare-nodal``.

Each criterion returns a CriterionResult whose ``details`` hold only values
computed by the numerical modules, so the JSON report is a function of the
RunConfig alone.  Wall-clock timings go to the human summary, never to JSON.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import continuation as cont
from .config import RunConfig, worker_count
from .coupled import circle_solutions, map_T, residual, signature
from .errors import NodalBifError, SignatureBroken
from .grid import nodal_count
from .scalar import find_w, scalar_morse_index
from .spectral import dense_weighted_eigs, moebius, table_for, weighted_eigs

BRANCH_PAIRS = ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2))
NEHARI_TOL = 1e-6
MORSE_MARGIN = 1e-4
UNIT_TOL = 1e-6
GAP_DELTA = 1e-6
ORACLE_RTOL = 1e-9
MOEBIUS_TOL = 1e-14
DETECT_TOL = 1e-4
MAP_TOL = 1e-12
CIRCLE_TOL = 1e-9
CIRCLE_SAMPLES = 64
SPREAD_TOL = 0.25
ASYMPTOTIC_BETAS = (20.0, 40.0, 80.0)


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    error: str | None = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = {"id": self.id, "name": self.name, "passed": self.passed, "details": self.details}
        if self.error is not None:
            d["error"] = self.error
        return d


def _f(x) -> float | None:
    return None if x is None else float(x)


# -- compare-nodal -------------------------------------------------------------

def cmd_compare_nodal(k: int, i: int, n: int = 2000) -> dict:
    """Nodal numbers of w_k - w_i and w_k + w_i."""
    if not k > i >= 1:
        raise ValueError(f"need k > i >= 1, got k={k}, i={i}")
    wk, wi = find_w(k, n).profile, find_w(i, n).profile
    return {"k": k, "i": i, "n": n, "n_diff": nodal_count(wk - wi), "n_sum": nodal_count(wk + wi),
            "expected": k - 1}


# -- criteria ----------------------------------------------------------------

class Suite:
    """Shared state between criteria (branches are traced once and reused)."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._branches: dict | None = None
        self.workers = worker_count()

    def m_for(self, k: int) -> int:
        return self.config.m if self.config.m is not None else k + self.config.i_extra + 2

    def table(self, k: int):
        return table_for(k, self.config.n, self.m_for(k))

    # 1
    def scalar_solutions(self) -> dict:
        rows, ok = [], True
        for k in self.config.ks:
            w = find_w(k, self.config.n)
            f = w.profile
            q = f.grid.quad_weights
            h1, l4 = f.h1_norm() ** 2, float(np.dot(q, f.values**4))
            rel = abs(h1 - l4) / l4
            nodes = nodal_count(f)
            good = nodes == k - 1 and rel <= NEHARI_TOL
            ok &= good
            rows.append({"k": k, "amplitude": w.amplitude, "nodal_count": nodes, "nehari_rel": rel,
                         "residual": w.residual_sup, "pass": good})
        return {"passed": ok, "rows": rows}

    # 2
    def morse_index(self) -> dict:
        rows, ok = [], True
        for k in self.config.ks:
            idx, gap = scalar_morse_index(find_w(k, self.config.n))
            good = idx == k and gap > MORSE_MARGIN
            ok &= good
            rows.append({"k": k, "index": idx, "min_abs_eigenvalue": gap, "pass": good})
        return {"passed": ok, "rows": rows}

    # 3
    def spectrum_anchors(self) -> dict:
        rows, ok = [], True
        for k in self.config.ks:
            spec = weighted_eigs(find_w(k, self.config.n), self.m_for(k))
            lam = spec.eigenvalues
            in_gap = int(np.count_nonzero((lam > 1 + GAP_DELTA) & (lam < 3 - GAP_DELTA)))
            dense_spec = weighted_eigs(find_w(k, self.config.oracle_n), self.m_for(k))
            dense = dense_weighted_eigs(find_w(k, self.config.oracle_n), self.m_for(k))
            oracle_rel = float(np.max(np.abs(dense_spec.eigenvalues - dense) / dense))
            good = (abs(lam[k - 1] - 1.0) <= UNIT_TOL and in_gap == 0 and lam[k] > 3.0
                    and oracle_rel <= ORACLE_RTOL)
            ok &= good
            rows.append({"k": k, "lambda_kk": float(lam[k - 1]), "lambda_k_k+1": float(lam[k]),
                         "eigenvalues_in_gap": in_gap, "oracle_rel_diff": oracle_rel, "pass": good})
        return {"passed": ok, "rows": rows}

    # 4
    def bifurcation_table(self) -> dict:
        rows, ok = [], True
        for k in self.config.ks:
            t = self.table(k)
            b = t.betas
            mob = max(abs(r.beta_tilde - moebius(r.beta)) for r in t.rows)
            good = (t.row(k).beta == 1.0 and bool(np.all(np.diff(b) < 0))
                    and bool(np.all((b > -1) & (b < 3))) and mob <= MOEBIUS_TOL)
            ok &= good
            rows.append({"k": k, "betas": [float(x) for x in b], "beta_tildes": [float(x) for x in t.beta_tildes],
                         "moebius_max_diff": mob, "pass": good})
        return {"passed": ok, "rows": rows}

    # 5
    def kernel_alignment(self) -> dict:
        rows, ok = [], True
        n = self.config.n
        for k in self.config.branch_ks:
            t = self.table(k)
            i_top = k + self.config.i_extra
            targets = [t.row(i).beta for i in range(1, i_top + 1)]
            lo = max(-0.95, min(targets) - 0.05)
            found = cont.detect_bifurcations(k, n, (lo, 2.95), samples=48, tol=1e-9)
            for i, b in enumerate(targets, start=1):
                near = [d for d in found if abs(d.located - b) <= DETECT_TOL]
                good = len(near) == 1 and near[0].index_left - near[0].index_right == 1
                ok &= good
                d = near[0] if near else None
                rows.append({"k": k, "i": i, "beta": b, "located": _f(d.located) if d else None,
                             "index_jump": (d.index_left - d.index_right) if d else None,
                             "min_singular": _f(d.min_singular) if d else None, "pass": good})
            unmatched = [d.located for d in found if not any(abs(d.located - b) <= DETECT_TOL for b in t.betas)]
            # crossings below the last tabulated row are not attributable; only count those inside it
            unmatched = [x for x in unmatched if x >= t.betas[-1]]
            if unmatched:
                ok = False
                rows.append({"k": k, "unmatched_crossings": unmatched, "pass": False})
        return {"passed": ok, "rows": rows}

    def branches(self) -> dict:
        if self._branches is not None:
            return self._branches
        jobs = [(fam, k, i) for fam in ("U", "W") for (k, i) in BRANCH_PAIRS
                if k in self.config.branch_ks and i <= self.config.branch_k_max]

        def run(job):
            fam, k, i = job
            try:
                return job, cont.trace_branch(k, i, fam, width=self.config.width, n=self.config.n), None
            except NodalBifError as exc:
                return job, None, exc

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        self._branches = {job: (b, err) for job, b, err in results}
        return self._branches

    # 6
    def branch_signatures(self) -> dict:
        rows, ok = [], True
        broken = 0
        for (fam, k, i), (b, err) in self.branches().items():
            if err is not None:
                broken += isinstance(err, SignatureBroken)
                ok = False
                rows.append({"family": fam, "k": k, "i": i, "error": f"{type(err).__name__}: {err}", "pass": False})
                continue
            expected = b.family.expected_counts()
            bad = [p.beta for p in b.points if not b.family.matches(p)]
            worst = cont.max_point_residual(b)
            good = not bad and worst <= self.config.tol
            ok &= good
            rows.append({"family": fam, "k": k, "i": i, "signature": list(expected), "points": len(b.points),
                         "beta_span": [float(b.betas.min()), float(b.betas.max())],
                         "mismatched_points": len(bad), "max_residual": worst,
                         "signature_rejections": b.meta["signature_rejections"], "pass": good})
        ok &= broken == 0
        return {"passed": ok, "signature_broken_events": broken, "rows": rows}

    # 7
    def window_containment(self) -> dict:
        rows, ok = [], True
        for (fam, k, i), (b, err) in self.branches().items():
            if err is not None:
                ok = False
                rows.append({"family": fam, "k": k, "i": i, "error": type(err).__name__, "pass": False})
                continue
            lo, hi = b.family.projection_bound()
            viol = cont.window_violations(b)
            ok &= not viol
            rows.append({"family": fam, "k": k, "i": i, "bound": [_bound(lo), _bound(hi)],
                         "beta_min": float(b.betas.min()), "beta_max": float(b.betas.max()),
                         "violations": len(viol), "pass": not viol})
        return {"passed": ok, "rows": rows}

    # 8
    def symmetry_map(self) -> dict:
        pool = []
        for (fam, k, i), (b, err) in sorted(self.branches().items()):
            if fam == "U" and b is not None:
                pool.extend((b.family, p) for p in b.points if -1.0 < p.beta < 1.0)
        if len(pool) < 20:
            return {"passed": False, "rows": [], "sampled": len(pool), "reason": "fewer than 20 U-points in (-1, 1)"}
        idx = np.linspace(0, len(pool) - 1, 20).round().astype(int)
        rows, ok = [], True
        for j in idx:
            fam, p = pool[j]
            img = map_T(1, p)
            target = cont.Family("W", fam.k, fam.i)
            res = residual(img)[2]
            dbeta = abs(img.beta - moebius(p.beta))
            good = target.matches(img) and res <= self.config.tol and dbeta <= MAP_TOL
            ok &= good
            rows.append({"from": fam.label, "beta": p.beta, "beta_image": img.beta, "residual": res,
                         "signature": list(signature(img).counts), "pass": good})
        return {"passed": ok, "rows": rows}

    # 9
    def circle(self) -> dict:
        rows, ok = [], True
        thetas = np.linspace(0.0, 2.0 * math.pi, CIRCLE_SAMPLES, endpoint=False)
        for k in [k for k in self.config.ks if k <= 3]:
            worst = max(residual(circle_solutions(k, float(t), self.config.n))[2] for t in thetas)
            good = worst <= CIRCLE_TOL
            ok &= good
            rows.append({"k": k, "max_residual": worst, "samples": CIRCLE_SAMPLES, "pass": good})
        return {"passed": ok, "rows": rows}

    # 10
    def nodal_comparison(self) -> dict:
        rows, ok = [], True
        for k in self.config.ks:
            for i in range(1, k):
                r = cmd_compare_nodal(k, i, self.config.n)
                good = r["n_diff"] == r["n_sum"] == k - 1
                ok &= good
                rows.append({**r, "pass": good})
        return {"passed": ok, "rows": rows}

    # 11
    def asymptotics(self) -> dict:
        n = self.config.n
        fam = cont.Family("W", 1, 2)
        b = cont.trace_branch(1, 2, "W", n=n, window=(fam.bifurcation_beta(n), ASYMPTOTIC_BETAS[-1] + 1.0),
                              max_points=20000)
        rep = cont.asymptotics_check(b, ASYMPTOTIC_BETAS)
        good = rep.spread < SPREAD_TOL and rep.residual_decreasing
        return {"passed": good, "points": len(b.points), **rep.to_dict()}

    # 12
    def nonexistence(self) -> dict:
        rows, ok = [], True
        for P, Q in ((0, 1), (1, 2)):
            rep = cont.nonexistence_probe(P, Q, (3.0, 3.0), self.config.probe_attempts, self.config.n,
                                          self.config.seed)
            good = rep.hits == 0
            ok &= good
            sigs = sorted({_sig_key(c) for c in rep.converged})
            rows.append({"P": P, "Q": Q, "attempts": rep.attempts, "converged": len(rep.converged),
                         "hits": rep.hits, "converged_signatures": [list(s) for s in sigs], "pass": good})
        return {"passed": ok, "rows": rows, "note": "absence of hits is evidence, not proof"}


def _sig_key(c: dict) -> tuple:
    return tuple(-1 if c[key] is None else c[key] for key in ("n_u", "n_v", "n_sum", "n_diff"))


def _bound(x: float):
    return None if math.isinf(x) else x


CRITERIA = (
    (1, "scalar solutions", "scalar_solutions"),
    (2, "scalar Morse index", "morse_index"),
    (3, "spectrum anchors", "spectrum_anchors"),
    (4, "bifurcation table", "bifurcation_table"),
    (5, "jacobian kernel alignment", "kernel_alignment"),
    (6, "branch signatures", "branch_signatures"),
    (7, "window containment", "window_containment"),
    (8, "symmetry map", "symmetry_map"),
    (9, "circle at beta=1", "circle"),
    (10, "nodal comparison", "nodal_comparison"),
    (11, "asymptotics", "asymptotics"),
    (12, "nonexistence probe", "nonexistence"),
)


def run_criterion(suite: Suite, cid: int) -> CriterionResult:
    _, name, attr = next(c for c in CRITERIA if c[0] == cid)
    t0 = time.perf_counter()
    try:
        out = getattr(suite, attr)()
        passed = bool(out.pop("passed"))
        res = CriterionResult(cid, name, passed, out)
    except (NodalBifError, ValueError) as exc:
        res = CriterionResult(cid, name, False, {}, f"{type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def cmd_verify(config: RunConfig, only: list[int] | None = None) -> tuple[dict, list[CriterionResult]]:
    """Run the criteria (all, or the ids in ``only``) and assemble the report."""
    suite = Suite(config)
    ids = [c[0] for c in CRITERIA if only is None or c[0] in only]
    results = [run_criterion(suite, cid) for cid in ids]
    first = next((r for r in results if not r.passed), None)
    report = {
        "config": config.to_dict(),
        "criteria": [r.to_dict() for r in results],
        "passed": first is None,
        "first_failure": None if first is None else {"id": first.id, "name": first.name},
    }
    return report, results


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def summary_lines(results: list[CriterionResult]) -> list[str]:
    return [f"[{'PASS' if r.passed else 'FAIL'}] {r.id:2d} {r.name} ({r.seconds:.1f}s)"
            + (f" - {r.error}" if r.error else "") for r in results]
