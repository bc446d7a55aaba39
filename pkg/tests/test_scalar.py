import math

import numpy as np
import pytest

from nodalbif.errors import BracketingFailed, NoConvergence
from nodalbif.grid import inner_products, make_grid, nodal_count
from nodalbif.scalar import (
    bisect_amplitude,
    bracket_amplitude,
    bump_identity_check,
    find_amplitude,
    find_w,
    newton_polish,
    scalar_morse_index,
    scalar_residual,
    shoot,
)

AMPLITUDES = {1: 7.58413919131700, 2: 37.0984691855423, 3: 104.193070374633, 4: 224.28301448027}


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_amplitude_values(k):
    a, u1 = find_amplitude(k)
    assert a == pytest.approx(AMPLITUDES[k], rel=1e-9)
    assert abs(u1) <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_shoot_zero_count(k):
    a = AMPLITUDES[k]
    below, above = shoot(a * (1 - 1e-6), 400), shoot(a * (1 + 1e-6), 400)
    assert below.interior_nodes == k - 1
    # the k-th zero crosses r=1 at the amplitude, flipping the sign of u(1)
    assert np.sign(below.boundary_value) == (-1) ** (k - 1)
    assert np.sign(above.boundary_value) == (-1) ** k
    assert shoot(a * 1.05, 400).interior_nodes == k


def test_shoot_sample_small_amplitude_positive():
    s = shoot(1.0, 100)
    assert s.interior_nodes == 0
    assert np.all(s.trajectory.values > 0)


def test_shoot_rejects_nonpositive():
    with pytest.raises(ValueError):
        shoot(0.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_uniqueness_probe_downward_bracket(k):
    # an independent bracket approached from above lands on the same amplitude
    lo, hi = bracket_amplitude(k, a_start=AMPLITUDES[k] * 1.6, a_stop=1.0, factor=1.03)
    a, _ = bisect_amplitude(k, lo, hi)
    assert a == pytest.approx(AMPLITUDES[k], rel=1e-8)


def test_bracket_failures():
    with pytest.raises(BracketingFailed):
        bracket_amplitude(1, a_start=50.0)
    with pytest.raises(BracketingFailed):
        bracket_amplitude(3, a_start=1.0, a_stop=50.0)
    with pytest.raises(ValueError):
        find_amplitude(0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_find_w_invariants(k, n_unit):
    w = find_w(k, n_unit)
    assert w.k == k and w.n == n_unit
    assert nodal_count(w.profile) == k - 1
    assert w.profile.value_at_origin() > 0
    assert w.residual_sup <= 1e-10
    assert np.max(np.abs(scalar_residual(w.profile))) <= 1e-9
    _, h1, l4 = inner_products(w.profile, w.profile)
    assert h1 == pytest.approx(l4, rel=1e-9)


@pytest.mark.parametrize("k", [1, 2])
def test_amplitude_against_finite_difference_oracle(k):
    # Richardson extrapolation of the grid solution's origin value is an
    # independent estimate of the shooting amplitude
    a1 = find_w(k, 1000).profile.value_at_origin()
    a2 = find_w(k, 2000).profile.value_at_origin()
    rich = (4 * a2 - a1) / 3
    assert rich == pytest.approx(find_w(k, 2000).amplitude, rel=1e-6)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_shooting_vs_grid_second_order(k):
    gaps = []
    for n in (500, 1000, 2000):
        w = find_w(k, n)
        s = shoot(w.amplitude, n).trajectory
        gaps.append(np.max(np.abs(s.values - w.profile.values)) / w.profile.sup_norm())
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(2)]
    assert all(1.8 < p < 2.2 for p in orders), orders


@pytest.mark.slow
def test_shooting_vs_grid_fine():
    w = find_w(1, 4000)
    s = shoot(w.amplitude, 4000).trajectory
    assert np.max(np.abs(s.values - w.profile.values)) <= 1e-6 * w.profile.sup_norm()


def test_newton_polish_from_perturbed_guess(n_unit):
    w = find_w(2, n_unit)
    g = w.profile + 0.02 * w.profile.grid.sample(lambda r: np.sin(np.pi * r))
    f, res = newton_polish(g)
    assert res <= 1e-10
    assert np.max(np.abs(f.values - w.profile.values)) <= 1e-8 * w.profile.sup_norm()


def test_newton_polish_reports_failure():
    g = make_grid(100).sample(lambda r: 3.0 * np.sin(np.pi * r))
    with pytest.raises(NoConvergence):
        newton_polish(g, max_iter=1)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_morse_index_equals_k(k, n_unit):
    idx, gap = scalar_morse_index(find_w(k, n_unit))
    assert idx == k
    assert gap >= 1e-4


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_morse_gap_grid_independent(k):
    gaps = [scalar_morse_index(find_w(k, n))[1] for n in (500, 1000, 2000)]
    assert min(gaps) > 10.0
    assert abs(gaps[-1] - gaps[-2]) < 0.05 * gaps[-1]


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_bump_identity(k, n_unit):
    pairs = bump_identity_check(find_w(k, n_unit))
    assert len(pairs) == k
    for quad, target in pairs:
        assert target < 0
        assert abs(quad - target) <= 1e-6 * abs(target)


def test_bump_identity_negative_control(n_unit):
    # 2w is not a solution; the identity must visibly fail
    w = find_w(2, n_unit)
    fake = type(w)(k=2, amplitude=2 * w.amplitude, profile=2 * w.profile, residual_sup=0.0)
    for quad, target in bump_identity_check(fake):
        assert abs(quad - target) > 1e-2 * abs(target)


def test_cache_returns_same_object(n_unit):
    assert find_w(1, n_unit) is find_w(1, n_unit)
