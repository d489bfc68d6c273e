import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multicz.grid import (
    Ball,
    DivergentQuantityError,
    GridFunction,
    Weight,
    annulus_mask,
    ball_average,
    ball_family,
    ball_mask,
    centered_family,
    fit_growth,
    integrate,
    lp_norm,
    make_grid,
    measure,
    weak_lp_norm,
)


# ---------------------------------------------------------------- make_grid

def test_make_grid_spacing_and_first_coordinate():
    g = make_grid(1, 8, 256)
    assert g.h == 1 / 16
    assert g.axis[0] == -8 + 1 / 32


def test_make_grid_2d_point_count():
    assert len(make_grid(2, 4, 64).points) == 4096


@pytest.mark.parametrize("args", [(1, 8, 100), (3, 8, 64), (1, 0.0, 64), (1, 8, 8)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_lattice_avoids_origin_and_is_antisymmetric():
    g = make_grid(1, 8, 64)
    assert np.all(g.axis != 0)
    assert np.array_equal(g.axis, -g.axis[::-1])


def test_grid_function_rejects_nonfinite_and_wrong_size():
    g = make_grid(1, 1, 16)
    with pytest.raises(ValueError):
        GridFunction(g, np.ones(15))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(16, np.nan))


def test_weight_must_be_positive():
    g = make_grid(1, 1, 16)
    with pytest.raises(ValueError):
        Weight(g, np.zeros(16))


# ---------------------------------------------------------------- integrate

def test_integrate_constant_exact():
    g = make_grid(1, 1, 64)
    assert integrate(GridFunction(g, np.ones(64))) == 2.0


def test_integrate_odd_function_vanishes():
    for g in (make_grid(1, 8, 512), make_grid(2, 3, 64)):
        f = g.sample(lambda x: x if g.n == 1 else x[..., 0] * np.exp(-(x**2).sum(-1)))
        assert abs(integrate(f)) <= 1e-12


def test_integrate_gaussian():
    g = make_grid(1, 8, 1024)
    assert abs(integrate(g.sample(lambda x: np.exp(-(x**2)))) - math.sqrt(math.pi)) < 1e-6


def test_integrate_refinement_is_second_order():
    # smooth nonperiodic integrand on the box: midpoint error ~ h^2
    err = []
    for G in (64, 128, 256):
        g = make_grid(1, 1, G)
        err.append(abs(integrate(g.sample(lambda x: np.exp(x))) - (math.e - 1 / math.e)))
    assert 3.5 < err[0] / err[1] < 4.5 and 3.5 < err[1] / err[2] < 4.5


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_integrate_linear(a, b):
    g = make_grid(1, 4, 64)
    f, k = g.sample(np.sin), g.sample(np.cos)
    assert integrate(a * f + b * k) == pytest.approx(a * integrate(f) + b * integrate(k), abs=1e-11)


def test_integrate_with_mask_and_measure():
    g = make_grid(1, 8, 256)
    mask = ball_mask(g, Ball(0.0, 1.0))
    assert measure(g, mask) == pytest.approx(2.0)
    assert integrate(GridFunction(g, np.ones(256)), mask) == pytest.approx(2.0)
    assert measure(g, np.flatnonzero(mask)) == pytest.approx(2.0)


# ---------------------------------------------------------------- balls

def test_ball_average_constant_and_odd():
    g = make_grid(1, 8, 256)
    assert ball_average(GridFunction(g, np.full(256, 3.5)), Ball(2.0, 1.5)) == pytest.approx(3.5)
    assert abs(ball_average(g.sample(lambda x: x), Ball(0.0, 2.0))) < 1e-12


def test_ball_average_square():
    g = make_grid(1, 8, 1024)
    assert abs(ball_average(g.sample(lambda x: x**2), Ball(0.0, 1.0)) - 1 / 3) < 1e-3


def test_ball_average_misses_grid():
    g = make_grid(1, 1, 16)
    with pytest.raises(ValueError, match="misses"):
        ball_average(GridFunction(g, np.ones(16)), Ball(5.0, 0.5))


@given(st.floats(-6, 6), st.floats(0.2, 4))
def test_ball_average_between_extremes(c, r):
    g = make_grid(1, 8, 128)
    f = g.sample(lambda x: np.sin(3 * x) + x**2 / 10)
    mask = ball_mask(g, Ball(c, r))
    if not mask.any():
        return
    avg = ball_average(f, Ball(c, r))
    assert f.values[mask].min() - 1e-12 <= avg <= f.values[mask].max() + 1e-12


def test_ball_dilation():
    B = Ball((1.0,), 2.0).dilate(3)
    assert B.center == (1.0,) and B.radius == 6.0
    with pytest.raises(ValueError):
        Ball(0.0, 0.0)


# ---------------------------------------------------------------- norms

def test_lp_norm_constant():
    g = make_grid(1, 8, 128)
    assert lp_norm(GridFunction(g, np.ones(128)), 2, Weight.ones(g)) == pytest.approx(4.0)


def test_lp_norm_homogeneous():
    g = make_grid(1, 8, 128)
    f = g.sample(lambda x: np.exp(-(x**2)))
    assert lp_norm(-3 * f, 1.5) == pytest.approx(3 * lp_norm(f, 1.5), rel=1e-13)


def test_lp_norm_quasi_norm_indicator():
    g = make_grid(1, 8, 256)
    chi = g.sample(lambda x: ((x > 0) & (x < 1)).astype(float))
    assert lp_norm(chi, 0.5, Weight(g, np.full(256, 2.0))) == pytest.approx(4.0)


def test_lp_norm_rejects_nonpositive_p():
    g = make_grid(1, 1, 16)
    with pytest.raises(ValueError):
        lp_norm(GridFunction(g, np.ones(16)), 0)


def test_weak_norm_indicator():
    g = make_grid(1, 8, 256)
    chi = g.sample(lambda x: ((x > -1) & (x < 2)).astype(float))
    for p in (0.5, 1, 3):
        assert weak_lp_norm(chi, p) == pytest.approx(3.0 ** (1 / p), rel=1e-8)


def test_weak_norm_zero():
    g = make_grid(1, 2, 32)
    assert weak_lp_norm(GridFunction(g, np.zeros(32)), 1) == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0.3, 4))
def test_weak_below_strong(seed, p):
    r = np.random.default_rng(seed)
    g = make_grid(1, 8, 128)
    f = g.sample(lambda x: r.uniform(0.5, 2) * np.exp(-((x - r.uniform(-3, 3)) ** 2)))
    w = Weight(g, r.uniform(0.1, 3, size=128))
    assert weak_lp_norm(f, p, w) <= lp_norm(f, p, w) * (1 + 1e-12)


def test_weak_norm_brute_force(rng):
    g = make_grid(1, 4, 32)
    f = GridFunction(g, rng.normal(size=32))
    w = rng.uniform(0.5, 2, size=32)
    a = np.abs(f.values)
    lams = np.linspace(0, a.max(), 20001)[1:]
    brute = max(lam * (w[a > lam].sum() * g.h) ** (1 / 1.5) for lam in lams)
    assert weak_lp_norm(f, 1.5, w) == pytest.approx(brute, rel=1e-3)
    assert weak_lp_norm(f, 1.5, w) >= brute


# ---------------------------------------------------------------- families

def test_ball_family_counts():
    g = make_grid(1, 8, 256)
    assert len(ball_family(g, [1, 2], stride=64)) == 8
    assert len(ball_family(g, [1], stride=256)) == 1
    with pytest.raises(ValueError):
        ball_family(g, [])
    with pytest.raises(ValueError):
        ball_family(g, [1], stride=3)


def test_ball_family_default_radii_reach_diameter():
    g = make_grid(1, 8, 64)
    fam = ball_family(g)
    assert fam.radii[0] == g.h and fam.radii[-1] == pytest.approx(16.0)


def test_family_windows_match_masks():
    g = make_grid(1, 4, 64)
    fam = ball_family(g, [0.5, 1.3], stride=8)
    for r in fam.radii:
        for sl, flat, valid in fam.windows(r):
            for c, fl, v in zip(fam.centers[sl], flat, valid):
                ref = np.flatnonzero(ball_mask(g, Ball(c, r)))
                assert np.array_equal(np.sort(fl[v]), ref)


def test_centered_family_default_origin():
    fam = centered_family(make_grid(1, 8, 64), [1, 2])
    assert fam.centers.shape == (1, 1) and len(fam) == 2


# ---------------------------------------------------------------- annuli

def test_annulus_masks():
    g = make_grid(1, 8, 512)
    B = Ball(0.0, 1.0)
    assert np.array_equal(annulus_mask(B, 0, g), ball_mask(g, B))
    assert not np.any(annulus_mask(B, 1, g) & annulus_mask(B, 2, g))
    assert abs(measure(g, annulus_mask(B, 1, g)) - 2.0) <= 2 * g.h
    with pytest.raises(ValueError):
        annulus_mask(B, -1, g)


# ---------------------------------------------------------------- fit_growth

def test_fit_exact_power_law():
    r = [0.5, 1, 2, 4, 8]
    fit = fit_growth([(x, (1 + x) ** 2) for x in r])
    assert fit.theta == pytest.approx(2, abs=1e-6) and fit.C == pytest.approx(1, abs=1e-6)
    assert fit.max_residual == 0


def test_fit_flat_and_zero():
    fit = fit_growth([(x, 3.0) for x in (1, 2, 4)])
    assert fit.theta == 0 and fit.C == 3.0
    zero = fit_growth([(1, 0.0), (2, 0.0)])
    assert (zero.C, zero.theta) == (0.0, 0.0)


def test_fit_noisy_half_power(rng):
    r = 2.0 ** np.arange(-3, 6)
    samples = [(x, (1 + x) ** 0.5 * (1 + 0.01 * rng.uniform(-1, 1))) for x in r for _ in range(5)]
    assert 0.45 <= fit_growth(samples).theta <= 0.55


def test_fit_errors():
    with pytest.raises(DivergentQuantityError):
        fit_growth([(1, 1.0), (2, math.inf)])
    with pytest.raises(ValueError):
        fit_growth([(1, 1.0), (1, 2.0)])


@given(st.lists(st.tuples(st.sampled_from([0.5, 1, 2, 4]), st.floats(0.01, 100)), min_size=4, max_size=20),
       st.lists(st.tuples(st.sampled_from([0.5, 1, 2, 4, 8]), st.floats(0.01, 100)), max_size=10),
       st.floats(0, 2))
def test_fit_envelope_monotone_in_samples(base, extra, theta):
    if len({r for r, _ in base}) < 2:
        return
    a = fit_growth(base, theta=theta)
    b = fit_growth(base + extra, theta=theta)
    assert b.envelope >= a.envelope * (1 - 1e-12)


@given(st.lists(st.tuples(st.sampled_from([0.25, 1, 3, 9]), st.one_of(st.just(0.0), st.floats(1e-6, 50))),
                min_size=2, max_size=30))
def test_fit_envelope_dominates_samples(samples):
    if len({r for r, _ in samples}) < 2:
        return
    fit = fit_growth(samples)
    for r, q in samples:
        assert q <= fit.C * (1 + r) ** fit.theta * (1 + fit.max_residual) * (1 + 1e-12)
