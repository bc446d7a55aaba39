"""Acceptance criteria at the reference scale (n = 2000).

Each test prints one [PASS]/[FAIL] line.  Tolerances are pinned here,
independently of the constants the verify suite uses internally.
"""

import math

import pytest

from nodalbif.config import RunConfig
from nodalbif.report import CRITERIA, Suite, run_criterion
from nodalbif.spectral import moebius

N = 2000
NEHARI = 1e-6
MORSE_MARGIN = 1e-4
UNIT = 1e-6
GAP = 1e-6
ORACLE = 1e-9
MOEBIUS = 1e-14
DETECT = 1e-4
POINT_RESIDUAL = 1e-8
MAP_BETA = 1e-12
CIRCLE = 1e-9
SPREAD = 0.25
pytestmark = pytest.mark.slow

SIGNATURE_PAIRS = {(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)}


@pytest.fixture(scope="module")
def suite():
    return Suite(RunConfig(n=N))


@pytest.fixture
def outcome(suite, capsys, request):
    cid = request.node.callspec.params["cid"] if hasattr(request.node, "callspec") else request.param
    res = run_criterion(suite, cid)
    with capsys.disabled():
        line = f"[{'PASS' if res.passed else 'FAIL'}] criterion {cid}: {res.name}"
        print("\n" + line + (f" ({res.error})" if res.error else ""))
    return res


def _rows(res):
    assert res.error is None, res.error
    return res.details["rows"]


def _criterion(cid):
    return pytest.mark.parametrize("cid", [cid], ids=[next(c[1] for c in CRITERIA if c[0] == cid)])


@_criterion(1)
def test_scalar_solutions(outcome, cid):
    rows = _rows(outcome)
    assert [r["k"] for r in rows] == [1, 2, 3, 4]
    for r in rows:
        assert r["nodal_count"] == r["k"] - 1
        assert r["nehari_rel"] <= NEHARI
    assert outcome.passed


@_criterion(2)
def test_morse_index(outcome, cid):
    for r in _rows(outcome):
        assert r["index"] == r["k"]
        assert r["min_abs_eigenvalue"] > MORSE_MARGIN
    assert outcome.passed


@_criterion(3)
def test_spectrum_anchors(outcome, cid):
    for r in _rows(outcome):
        assert abs(r["lambda_kk"] - 1.0) <= UNIT
        assert r["eigenvalues_in_gap"] == 0
        assert r["lambda_k_k+1"] > 3.0
        assert r["oracle_rel_diff"] <= ORACLE
    assert outcome.passed


@_criterion(4)
def test_bifurcation_table(outcome, cid):
    for r in _rows(outcome):
        b, bt, k = r["betas"], r["beta_tildes"], r["k"]
        assert b[k - 1] == 1.0
        assert all(x > y for x, y in zip(b, b[1:]))
        assert all(-1 < x < 3 for x in b)
        assert all(abs(t - moebius(x)) <= MOEBIUS * max(1.0, abs(t)) for x, t in zip(b, bt))
    assert outcome.passed


@_criterion(5)
def test_kernel_alignment(outcome, cid):
    rows = _rows(outcome)
    assert {r["k"] for r in rows} == {1, 2, 3}
    for r in rows:
        assert abs(r["located"] - r["beta"]) <= DETECT
        assert r["index_jump"] == 1
    assert outcome.passed


@_criterion(6)
def test_branch_signatures(outcome, cid):
    rows = _rows(outcome)
    assert {(r["k"], r["i"]) for r in rows if r["family"] == "U"} == SIGNATURE_PAIRS
    assert {(r["k"], r["i"]) for r in rows if r["family"] == "W"} == SIGNATURE_PAIRS
    for r in rows:
        assert r["mismatched_points"] == 0
        assert r["max_residual"] <= POINT_RESIDUAL
        # the first point sits one switch step (<= 1e-3) off the bifurcation value
        assert 1.0 - 1e-3 <= r["beta_span"][1] - r["beta_span"][0] <= 1.0 + 1e-9
    assert outcome.details["signature_broken_events"] == 0
    assert outcome.passed


@_criterion(7)
def test_window_containment(outcome, cid):
    for r in _rows(outcome):
        lo = -math.inf if r["bound"][0] is None else r["bound"][0]
        hi = math.inf if r["bound"][1] is None else r["bound"][1]
        expected = {("U", True): (-math.inf, 0.0), ("U", False): (1.0, math.inf),
                    ("W", True): (3.0, math.inf), ("W", False): (-math.inf, 1.0)}[(r["family"], r["i"] > r["k"])]
        assert (lo, hi) == expected
        assert r["violations"] == 0
        assert lo < r["beta_min"] and r["beta_max"] < hi
    assert outcome.passed


@_criterion(8)
def test_symmetry_map(outcome, cid):
    rows = _rows(outcome)
    assert len(rows) == 20
    for r in rows:
        assert r["residual"] <= POINT_RESIDUAL
        assert abs(r["beta_image"] - moebius(r["beta"])) <= MAP_BETA * max(1.0, abs(r["beta_image"]))
    assert outcome.passed


@_criterion(9)
def test_circle(outcome, cid):
    rows = _rows(outcome)
    assert [r["k"] for r in rows] == [1, 2, 3]
    for r in rows:
        assert r["samples"] == 64 and r["max_residual"] <= CIRCLE
    assert outcome.passed


@_criterion(10)
def test_nodal_comparison(outcome, cid):
    rows = _rows(outcome)
    assert {(r["k"], r["i"]) for r in rows} == {(k, i) for k in range(2, 5) for i in range(1, k)}
    for r in rows:
        assert r["n_diff"] == r["n_sum"] == r["k"] - 1
    assert outcome.passed


@_criterion(11)
def test_asymptotics(outcome, cid):
    d = outcome.details
    assert outcome.error is None, outcome.error
    assert d["betas"] == [20.0, 40.0, 80.0]
    assert d["spread"] < SPREAD
    lr = d["limit_residuals"]
    assert lr[0] > lr[1] > lr[2]
    assert outcome.passed


@_criterion(12)
def test_nonexistence(outcome, cid):
    rows = _rows(outcome)
    assert {(r["P"], r["Q"]) for r in rows} == {(0, 1), (1, 2)}
    for r in rows:
        assert r["attempts"] == 50
        assert r["hits"] == 0
    assert outcome.passed
