import json
import math

import numpy as np
import pytest

from nodalbif.continuation import (
    Branch,
    Family,
    asymptotics_check,
    branch_separation,
    branch_tangent,
    continue_branch,
    detect_bifurcations,
    max_point_residual,
    nehari_scale,
    nonexistence_probe,
    point_at,
    switch_branch,
    trace_branch,
    window_violations,
)
from nodalbif.coupled import StatePair, jacobian, map_T, residual, signature
from nodalbif.errors import SignatureBroken
from nodalbif.grid import inner_products
from nodalbif.scalar import find_w
from nodalbif.spectral import moebius, table_for

N = 400


@pytest.fixture(scope="module")
def u12():
    fam = Family("U", 1, 2)
    b = fam.bifurcation_beta(N)
    return trace_branch(1, 2, "U", n=N, window=(b - 0.5, b))


@pytest.fixture(scope="module")
def u12_wide():
    return trace_branch(1, 2, "U", n=N, width=1.0)


@pytest.fixture(scope="module")
def w12():
    return trace_branch(1, 2, "W", n=N, width=80.0)


def test_family_validation():
    with pytest.raises(ValueError):
        Family("V", 1, 2)
    with pytest.raises(ValueError):
        Family("U", 2, 2)
    with pytest.raises(ValueError):
        Family("U", 0, 1)
    assert Family("U", 1, 2).label == "U(1,2)"


@pytest.mark.parametrize("kind,k,i,counts,left,bound", [
    ("U", 1, 2, (0, 0, 0, 1), True, (-math.inf, 0.0)),
    ("U", 2, 1, (1, 1, 1, 0), False, (1.0, math.inf)),
    ("W", 1, 2, (0, 1, 0, 0), False, (3.0, math.inf)),
    ("W", 2, 1, (1, 0, 1, 1), True, (-math.inf, 1.0)),
])
def test_family_predictions(kind, k, i, counts, left, bound):
    fam = Family(kind, k, i)
    assert fam.expected_counts() == counts
    assert fam.opens_left() is left
    assert fam.projection_bound() == bound
    lo, hi = fam.window(N, 2.0)
    assert hi - lo == pytest.approx(2.0)
    assert (hi if left else lo) == fam.bifurcation_beta(N)


@pytest.mark.parametrize("kind,k,i", [("U", 1, 2), ("U", 2, 1), ("U", 2, 3), ("W", 1, 2), ("W", 2, 1)])
def test_tangent_in_kernel(kind, k, i):
    fam = Family(kind, k, i)
    t = branch_tangent(k, i, kind, N)
    l2 = math.sqrt(t.u.l2_norm() ** 2 + t.v.l2_norm() ** 2)
    assert l2 == pytest.approx(1.0, rel=1e-12)
    ju, jv = jacobian(fam.bifurcation_point(N)).apply(t.u, t.v)
    q = t.grid.quad_weights
    assert math.sqrt(np.dot(q, ju**2) + np.dot(q, jv**2)) <= 1e-6 * l2
    if kind == "U":
        np.testing.assert_array_equal(t.u.values, -t.v.values)
    else:
        assert np.all(t.u.values == 0)


@pytest.mark.parametrize("kind,k,i,counts", [
    ("U", 1, 2, (0, 0, 0, 1)),
    ("U", 2, 1, (1, 1, 1, 0)),
    ("W", 1, 2, (0, 1, 0, 0)),
])
def test_switch_examples(kind, k, i, counts):
    s = switch_branch(k, i, kind, n=N)
    fam = Family(kind, k, i)
    assert signature(s).counts == counts
    assert residual(s)[2] <= 1e-8
    b0 = fam.bifurcation_beta(N)
    if fam.opens_left():
        assert s.beta < b0
    else:
        assert s.beta > b0
    if kind == "U":
        assert s.u.value_at_origin() > 0 and s.v.value_at_origin() > 0
    else:
        assert s.u.value_at_origin() > abs(s.v.value_at_origin())
        assert s.beta > b0 > 3


def test_u12_signature_and_bound(u12):
    lo, hi = u12.family.window(N, 0.5)
    assert u12.meta["stop"].startswith("window_edge")
    assert u12.betas.min() == pytest.approx(lo, abs=1e-9)
    assert all(signature(p).counts == (0, 0, 0, 1) for p in u12.points)
    assert max_point_residual(u12) <= 1e-8
    assert window_violations(u12) == []
    sup = u12.sup_norms().max(axis=1)
    assert np.all(np.isfinite(sup)) and sup.max() < 100
    # sup norms grow as beta decreases toward -1
    order = np.argsort(u12.betas)
    assert sup[order[0]] > sup[order[-1]]


def test_u12_crosses_minus_one(u12_wide):
    # nothing singular happens to the bifurcating branch at beta = -1
    assert u12_wide.betas.min() < -1.0
    assert max_point_residual(u12_wide) <= 1e-8
    assert u12_wide.meta["signature_rejections"] == 0


def test_w12_stays_above_three(w12):
    b0 = w12.family.bifurcation_beta(N)
    b = w12.betas
    assert b.max() >= b0 + 5
    assert np.all(b > 3.0)
    assert window_violations(w12) == []
    assert max_point_residual(w12) <= 1e-8


def test_step_statistics(w12):
    m = w12.meta
    assert m["accepted"] == len(w12.points)
    assert 1e-5 <= m["ds_min_used"] and m["ds_max_used"] <= 0.1 + 1e-15
    assert m["bifurcation_beta"] == w12.family.bifurcation_beta(N)


def test_map_consistency(u12_wide):
    fam_w = Family("W", 1, 2)
    pts = [p for p in u12_wide.points if -1 < p.beta < 1]
    assert pts
    for p in pts:
        t = map_T(1, p)
        assert t.beta == pytest.approx(moebius(p.beta), rel=1e-12)
        assert fam_w.matches(t)
        assert residual(t)[2] <= 1e-8


def test_map_at_minus_half(u12_wide):
    p = point_at(u12_wide, -0.5)
    t = map_T(1, p)
    assert t.beta == pytest.approx(7.0)
    assert residual(t)[2] <= 1e-8


def test_asymptotics(w12):
    rep = asymptotics_check(w12)
    assert rep.spread < 0.25
    assert rep.limit_residuals[-1] < rep.limit_residuals[0]
    assert rep.residual_decreasing
    assert all(tuple(s) == (0, 1, 0, 0) for s in rep.signatures)
    json.dumps(rep.to_dict())


def test_point_at_outside_range(u12):
    with pytest.raises(ValueError):
        point_at(u12, 5.0)


def test_branch_separation():
    a = trace_branch(1, 2, "U", n=N, width=0.5)
    b = trace_branch(2, 3, "U", n=N, width=1.0)
    assert branch_separation(b, a) > 1e-3
    assert branch_separation(a, a) <= 1e-8


def test_branch_round_trip(u12):
    d = json.loads(json.dumps(u12.to_dict()))
    assert d["signature"] == [0, 0, 0, 1]
    back = Branch.from_dict(d)
    assert back.family == u12.family
    np.testing.assert_allclose(back.betas, u12.betas, rtol=0, atol=0)
    slim = u12.to_dict(profiles=False)
    assert "u" not in slim["points"][0]
    with pytest.raises(ValueError):
        Branch.from_dict(slim)


def test_continue_rejects_bad_input(u12):
    s = u12.points[0]
    with pytest.raises(ValueError):
        continue_branch(s, Family("U", 1, 2), (0.0, -1.0))
    with pytest.raises(SignatureBroken):
        continue_branch(s, Family("U", 1, 3), (-3.0, 0.0))


def test_max_points_stop():
    b = trace_branch(2, 1, "U", n=N, width=1.0, max_points=5)
    assert len(b.points) == 5
    assert b.meta["stop"] == "max_points"
    assert all(p.beta > b.meta["bifurcation_beta"] for p in b.points)


@pytest.mark.parametrize("k", [1, 2])
def test_detected_bifurcations_match_table(k):
    found = detect_bifurcations(k, N, samples=48)
    table = table_for(k, N, 40)
    listed = [r for r in table.rows if -0.9 < r.beta < 2.9 and r.i != k]
    assert sorted(d.i for d in found if d.i != k) == sorted(r.i for r in listed)
    for d in found:
        assert abs(d.located - d.tabulated) <= 1e-4
        assert abs(d.index_left - d.index_right) == 1


def test_nehari_scale_on_solution():
    w = find_w(1, N).profile
    u, v = nehari_scale(2.0 * w, 0.0 * w, 0.0)
    np.testing.assert_allclose(u.values, w.values, rtol=1e-9)
    u, v = nehari_scale(3.0 * w, 3.0 * w, 1.0)
    _, h1, l4 = inner_products(u, u)
    assert h1 == pytest.approx(l4 + float(np.dot(u.grid.quad_weights, u.values**2 * v.values**2)), rel=1e-9)


def test_probe_near_three_finds_nothing():
    rep = nonexistence_probe(0, 1, (3.0, 3.0), attempts=20, n=N, seed=0)
    assert rep.hits == 0
    assert rep.attempts == 20
    assert len(rep.converged) > 0  # the seeds do reach solutions, just not (0,1) ones


def test_probe_positive_control():
    # away from beta = 3, (0,1) solutions exist on W(2,1); the probe must find some
    rep = nonexistence_probe(0, 1, (-0.4, 0.4), attempts=40, n=N, seed=0)
    assert rep.hits > 0


def test_probe_equal_counts_allowed():
    rep = nonexistence_probe(0, 0, (3.0, 3.0), attempts=10, n=N, seed=1)
    assert rep.hits >= 0
    for c in rep.converged:
        assert c["beta"] == 3.0


def test_probe_reproducible():
    a = nonexistence_probe(0, 1, (2.9, 3.1), attempts=5, n=200, seed=7).to_dict()
    b = nonexistence_probe(0, 1, (2.9, 3.1), attempts=5, n=200, seed=7).to_dict()
    assert a == b
