import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalbif.errors import InvariantViolated, PoleAtMinusOne, WeightDegenerate
from nodalbif.grid import RadialFunction
from nodalbif.scalar import ScalarSolution, find_w
from nodalbif.spectral import (
    beta_from_lambda,
    bifurcation_table,
    dense_weighted_eigs,
    moebius,
    sturm_count,
    pencil,
    spectrum_for,
    table_for,
    validate_spectrum,
    weighted_eigs,
)

# lambda_{2,1} on n=400, recorded from the bisection run and checked against the dense oracle below
LAMBDA_21 = 0.518431


def test_moebius_anchors():
    assert moebius(0.0) == 3.0
    assert moebius(1.0) == 1.0
    assert moebius(3.0) == 0.0
    with pytest.raises(PoleAtMinusOne):
        moebius(-1.0)


@settings(max_examples=200)
@given(st.floats(-0.99, 1e3))
def test_moebius_involution(b):
    # the composition amplifies rounding like (1 + |b|)^2 near the pole's image
    assert moebius(moebius(b)) == pytest.approx(b, rel=1e-10, abs=1e-12)


@settings(max_examples=100)
@given(st.floats(-0.999, 1.0), st.floats(-0.999, 1.0))
def test_moebius_swaps_intervals_and_reverses_order(a, b):
    # (-1, 1) maps onto (1, inf), order-reversing
    fa, fb = moebius(a), moebius(b)
    assert fa >= 1.0 - 1e-12
    if a < b:
        assert fa >= fb


def test_beta_from_lambda_anchors():
    assert beta_from_lambda(1.0) == 1.0
    assert beta_from_lambda(3.0) == 0.0
    assert beta_from_lambda(1e12) == pytest.approx(-1.0, abs=1e-11)
    assert beta_from_lambda(1e12) > -1.0


def test_k1_principal_eigenpair(n_unit):
    spec = weighted_eigs(find_w(1, n_unit), 4)
    assert abs(spec.eigenvalues[0] - 1.0) <= 1e-6
    phi, w = spec.eigenfunctions[0].values, find_w(1, n_unit).profile.values
    assert abs(np.dot(phi, w)) / (np.linalg.norm(phi) * np.linalg.norm(w)) == pytest.approx(1.0, abs=1e-10)


def test_k3_nodal_counts(n_unit):
    spec = weighted_eigs(find_w(3, n_unit), 6)
    assert abs(spec.eigenvalues[2] - 1.0) <= 1e-6
    assert spec.nodal_counts == [0, 1, 2, 3, 4, 5]


def test_k2_first_eigenvalue_below_one(n_unit):
    lam = weighted_eigs(find_w(2, n_unit), 4).eigenvalues
    assert lam[0] < 1.0
    assert lam[0] == pytest.approx(LAMBDA_21, rel=1e-3)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_spectral_gap(k, n_unit):
    lam = weighted_eigs(find_w(k, n_unit)).eigenvalues
    assert np.count_nonzero(lam <= 1.0 + 1e-6) == k
    assert not np.any((lam > 1 + 1e-6) & (lam < 3 - 1e-6))
    assert lam[k] > 3.0
    assert np.all(np.diff(lam) > 0) and np.all(lam > 0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_dense_oracle_agreement(k, n_unit):
    w = find_w(k, n_unit)
    lam = weighted_eigs(w, k + 4).eigenvalues
    dense = dense_weighted_eigs(w, k + 4)
    np.testing.assert_allclose(lam, dense, rtol=1e-9)


def test_sturm_count_matches_dense(n_unit):
    w = find_w(2, n_unit)
    d, e, wt = pencil(w)
    dense = dense_weighted_eigs(w, 10)
    for lam in (0.05, 0.5, 2.0, 5.0, 20.0):
        assert sturm_count(d, e, wt, lam)[0] == np.count_nonzero(dense < lam)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_weighted_orthogonality(k, n_unit):
    spec = weighted_eigs(find_w(k, n_unit), k + 4)
    q = spec.weight.grid.quad_weights * spec.weight.profile.values ** 2
    G = np.array([[np.dot(q, a.values * b.values) for b in spec.eigenfunctions] for a in spec.eigenfunctions])
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-8
    np.testing.assert_allclose(np.diag(G), 1.0, rtol=1e-8)


def test_eigen_equation_residual(n_unit):
    from nodalbif.grid import assemble_operator
    w = find_w(2, n_unit)
    spec = weighted_eigs(w, 5)
    A = assemble_operator(w.grid, 1.0)
    for lam, phi in zip(spec.eigenvalues, spec.eigenfunctions):
        res = A.apply(phi) - lam * w.profile.values**2 * phi.values
        assert np.max(np.abs(res)) <= 1e-7 * lam * np.max(np.abs(w.profile.values**2 * phi.values))


def test_sign_convention(n_unit):
    for f in weighted_eigs(find_w(3, n_unit)).eigenfunctions:
        assert f.values[0] > 0


def test_m_too_small_and_degenerate(n_unit):
    w = find_w(2, n_unit)
    with pytest.raises(ValueError):
        weighted_eigs(w, 3)
    g = w.grid
    vals = np.zeros(g.n_interior)
    vals[:3] = 1.0
    fake = ScalarSolution(k=1, amplitude=1.0, profile=RadialFunction(g, vals), residual_sup=0.0)
    with pytest.raises(WeightDegenerate):
        weighted_eigs(fake, 5)


def test_validation_flags_wrong_weight(n_unit):
    # weight = 2 w_1 shifts every eigenvalue by 1/4; the unit eigenvalue check catches it
    w = find_w(1, n_unit)
    fake = ScalarSolution(k=1, amplitude=2 * w.amplitude, profile=2 * w.profile, residual_sup=0.0)
    with pytest.raises(InvariantViolated) as exc:
        weighted_eigs(fake, 4)
    assert exc.value.invariant == "unit_eigenvalue"
    spec = weighted_eigs(fake, 4, validate=False)
    np.testing.assert_allclose(spec.eigenvalues, weighted_eigs(w, 4).eigenvalues / 4, rtol=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_table_invariants(k, n_unit):
    t = bifurcation_table(weighted_eigs(find_w(k, n_unit)))
    b, bt = t.betas, t.beta_tildes
    assert np.all(np.diff(b) < 0) and np.all((b > -1) & (b < 3))
    assert np.all(np.diff(bt) > 0)
    assert b[k - 1] == 1.0 and bt[k - 1] == 1.0
    assert bt[k] > 3 and b[k] < 0
    for row in t.rows:
        assert abs(row.beta_tilde - moebius(row.beta)) <= 1e-14 * max(1.0, abs(row.beta_tilde))
        assert row.window == ("circle" if row.i == k else "left" if row.i > k else "right")
        assert row.semitrivial_window == {"left": "right", "right": "left", "circle": "circle"}[row.window]


def test_table_dict_schema(n_unit):
    d = table_for(2, n_unit).to_dict()
    assert set(d) == {"k", "rows"}
    assert set(d["rows"][0]) == {"i", "lambda", "beta", "beta_tilde", "window"}
    assert [r["i"] for r in d["rows"]] == list(range(1, 7))


def test_betas_approach_minus_one(n_unit):
    b = bifurcation_table(weighted_eigs(find_w(1, n_unit), 12)).betas
    assert b[-1] < b[3] < b[1]
    assert b[-1] + 1 < 0.05


def test_cached_spectrum(n_unit):
    assert spectrum_for(1, n_unit) is spectrum_for(1, n_unit)
    assert table_for(1, n_unit) is table_for(1, n_unit)


def test_eigenvalues_converge_second_order():
    lam = [weighted_eigs(find_w(2, n), 4).eigenvalues[0] for n in (500, 1000, 2000)]
    p = math.log2(abs(lam[0] - lam[1]) / abs(lam[1] - lam[2]))
    assert 1.8 < p < 2.2
