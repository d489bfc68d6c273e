import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multicz.grid import GridFunction, ball_family, make_grid
from multicz.maximal import (
    MaximalParams,
    calM_loc,
    calM_s,
    critical_cover,
    frak_m,
    m_loc,
    m_sharp_loc,
    scalar_loc,
)
from oracles import frak_m_reference, m_loc_reference

G1 = make_grid(1, 8, 128)
FAM = ball_family(G1)
COVER = critical_cover(G1)


def gauss(grid, c, s=1.0, a=1.0):
    return grid.sample(lambda x: a * np.exp(-((x - c) ** 2) / (2 * s * s)))


def reflect(f):
    return GridFunction(f.grid, f.values[::-1])


# ---------------------------------------------------------------- cover

def test_cover_centers_and_coverage():
    assert len(COVER.centers) == 19
    assert np.array_equal(COVER.centers[:, 0], np.arange(-9, 10))
    assert COVER.multiplicity.min() >= 1


def test_cover_overlap_table():
    assert COVER.overlap[2.0] <= 5
    assert COVER.overlap == {1.0: 2, 2.0: 4, 4.0: 8, 8.0: 16}
    assert COVER.overlap_constant == 2.0


def test_dense_cover():
    dense = critical_cover(G1, spacing=0.25)
    assert len(dense.centers) == 73 and dense.multiplicity.min() >= 1
    with pytest.raises(ValueError):
        critical_cover(G1, spacing=1.5)


def test_params_defaults_and_validation():
    p = MaximalParams().resolved(2, G1)
    assert p.N == 4 and p.Kmax == 5 and 2**p.Kmax * p.kappa >= 2 * G1.L
    with pytest.raises(ValueError):
        MaximalParams(kappa=0.5).resolved(2, G1)
    with pytest.raises(ValueError):
        MaximalParams(N=0.0).resolved(2, G1)


# ---------------------------------------------------------------- local maximal

def test_m_loc_of_one():
    assert np.allclose(m_loc(GridFunction(G1, np.ones(128)), 4, FAM).values, 1.0, atol=1e-14)


def test_m_loc_indicator_at_two():
    g = make_grid(1, 8, 512)
    chi = g.sample(lambda x: ((x > 0) & (x < 1)).astype(float))
    fam = ball_family(g, np.arange(1, 33) * g.h * 8)
    i = int(np.argmin(np.abs(g.axis - 2)))
    assert m_loc(chi, 4, fam).values[i] == pytest.approx(0.5, abs=0.05)


def test_m_loc_matches_brute_force(rng):
    g = make_grid(1, 4, 32)
    f = GridFunction(g, rng.normal(size=32))
    radii = [0.25, 0.5, 1.0, 2.0]
    out = m_loc(f, 1.0, ball_family(g, radii))
    for i in (0, 7, 16, 31):
        assert out.values[i] == pytest.approx(m_loc_reference(f.values, 4, 32, i, radii, 1.0), rel=1e-12)


@given(st.floats(0.125, 3), st.floats(0, 3), st.floats(-4, 4))
def test_m_loc_monotone_in_alpha(alpha, dalpha, c):
    f = gauss(G1, c)
    a = m_loc(f, alpha, FAM).values
    b = m_loc(f, alpha + dalpha, FAM).values
    assert np.all(b >= a - 1e-14)


def test_family_too_sparse():
    fam = ball_family(G1, [0.25], stride=64)
    with pytest.raises(ValueError, match="too sparse"):
        m_loc(GridFunction(G1, np.ones(128)), 1, fam)
    with pytest.raises(ValueError):
        m_loc(GridFunction(G1, np.ones(128)), 0.1, fam)


def test_sharp_of_constant():
    assert np.all(m_sharp_loc(GridFunction(G1, np.full(128, -2.5)), 4, FAM).values == 0)


@given(st.floats(-4, 4), st.floats(0.3, 3), st.floats(0.25, 4))
def test_sharp_below_twice_local(c, s, alpha):
    f = gauss(G1, c, s) - 0.3 * gauss(G1, -c, 1)
    assert np.all(m_sharp_loc(f, alpha, FAM).values <= 2 * m_loc(f, alpha, FAM).values + 1e-12)


def test_sharp_of_linear_interior():
    g = make_grid(1, 8, 512)
    fam = ball_family(g, np.arange(1, 33) * 2 / 32)
    out = m_sharp_loc(g.sample(lambda x: x), 2, fam)
    i = int(np.argmin(np.abs(g.axis)))
    assert out.values[i] == pytest.approx(1.0, abs=0.1)


@given(st.floats(-100, 100))
def test_sharp_invariant_under_constants(c):
    f = gauss(G1, 1.0, 0.7)
    base = m_sharp_loc(f, 2, FAM).values
    shifted = m_sharp_loc(GridFunction(G1, f.values + c), 2, FAM).values
    assert np.allclose(shifted, base, rtol=0, atol=1e-12 * (1 + abs(c)))


# ---------------------------------------------------------------- critical maximal

@pytest.mark.parametrize("N,K", [(4.0, 5), (2.0, 3), (1.5, 7)])
def test_frak_m_geometric_series(N, K):
    ones = [GridFunction(G1, np.ones(128))] * 2
    out = frak_m(ones, MaximalParams(N=N, Kmax=K), COVER)
    expect = (1 - 2 ** (-N * (K + 1))) / (1 - 2**-N)
    assert np.max(np.abs(out.values - expect)) <= 1e-10


def test_frak_m_homogeneous():
    fv = [gauss(G1, 1.0), gauss(G1, -2.0, 1.5)]
    base = frak_m(fv, MaximalParams(), COVER).values
    scaled = frak_m([-2.0 * fv[0], 3.0 * fv[1]], MaximalParams(), COVER).values
    assert np.allclose(scaled, 6 * base, rtol=1e-13)


def test_frak_m_brute_force(rng):
    fv = [gauss(G1, 1.0), gauss(G1, -2.0, 1.5)]
    prm = MaximalParams(s=1.5, kappa=2.0, N=3.0, Kmax=4)
    out = frak_m(fv, prm, COVER)
    for i in rng.choice(128, 10, replace=False):
        ref = frak_m_reference([f.values for f in fv], 8, 128, int(i), 3.0, 4, kappa=2.0, s=1.5)
        assert out.values[i] == pytest.approx(ref, rel=1e-10)


def test_frak_m_monotone_in_N():
    fv = [gauss(G1, 3.0), gauss(G1, -3.0)]
    outs = [frak_m(fv, MaximalParams(N=N, Kmax=5), COVER).values for N in (1.0, 2.0, 4.0, 8.0)]
    for a, b in zip(outs, outs[1:]):
        assert np.all(b <= a + 1e-15)


def test_frak_m_truncation_bound():
    fv = [gauss(G1, 0.5, 2, 1.7), gauss(G1, -1.0, 1, 0.8)]
    N, K = 2.0, 3
    a = frak_m(fv, MaximalParams(N=N, Kmax=K), COVER).values
    b = frak_m(fv, MaximalParams(N=N, Kmax=K + 1), COVER).values
    bound = 2 ** (-N * (K + 1)) * np.prod([np.abs(f.values).max() for f in fv])
    assert np.all(b >= a) and np.all(b - a <= bound * (1 + 1e-12))


# ---------------------------------------------------------------- multilinear and local sums

def test_calM_s_of_ones_and_m1():
    ones = GridFunction(G1, np.ones(128))
    assert np.allclose(calM_s([ones, ones], 0.5, FAM).values, 1.0, atol=1e-14)
    f = gauss(G1, 2.0, 0.5)
    assert np.allclose(calM_s([f], 1.0, FAM).values, m_loc(f, max(FAM.radii), FAM).values, rtol=1e-13)
    with pytest.raises(ValueError):
        calM_s([f], 0.0, FAM)


def test_calM_s_homogeneous():
    fv = [gauss(G1, 1.0), gauss(G1, -1.0)]
    base = calM_s(fv, 0.7, FAM).values
    scaled = calM_s([2 * fv[0], -3 * fv[1]], 0.7, FAM).values
    assert np.allclose(scaled, 6 * base, rtol=1e-12)


def test_calM_loc_zero_and_multiplicity():
    zero = GridFunction(G1, np.zeros(128))
    assert np.all(calM_loc([zero, zero], 1.0, COVER, FAM).values == 0)
    ones = GridFunction(G1, np.ones(128))
    out = calM_loc([ones, ones], 1.0, COVER, FAM).values
    assert np.allclose(out, COVER.multiplicity, atol=1e-13)


def test_calM_loc_bounded_by_overlap():
    fv = [gauss(G1, 2.0, 2.0), gauss(G1, -1.0, 0.5)]
    loc = calM_loc(fv, 0.5, COVER, FAM).values
    glob = calM_s(fv, 0.5, FAM).values
    assert np.all(loc <= COVER.overlap[1.0] * glob * (1 + 1e-12))


def test_scalar_loc_is_m1_case():
    f = gauss(G1, 0.3)
    assert np.array_equal(scalar_loc(f, 0.5, COVER, FAM).values, calM_loc([f], 0.5, COVER, FAM).values)


def test_reflection_symmetry():
    # the lattice, cover and family are all symmetric about the origin
    fv = [gauss(G1, 1.3, 0.8), gauss(G1, -2.1, 1.4)]
    rv = [reflect(f) for f in fv]
    prm = MaximalParams(s=0.8)
    pairs = [
        (m_loc(fv[0], 2, FAM), m_loc(rv[0], 2, FAM)),
        (m_sharp_loc(fv[0], 2, FAM), m_sharp_loc(rv[0], 2, FAM)),
        (frak_m(fv, prm, COVER), frak_m(rv, prm, COVER)),
        (calM_s(fv, 0.8, FAM), calM_s(rv, 0.8, FAM)),
        (calM_loc(fv, 0.8, COVER, FAM), calM_loc(rv, 0.8, COVER, FAM)),
    ]
    for a, b in pairs:
        assert np.allclose(a.values, b.values[::-1], rtol=1e-11, atol=1e-14)
