"""Acceptance suite: one test per criterion, each printing a PASS or FAIL line."""
import math
from contextlib import contextmanager

import numpy as np
import pytest

from multicz.czkernel import apply_T, commutator_apply, model_kernel, pure_power_kernel, random_samples, verify_h1, \
    verify_h2
from multicz.grid import Ball, GridFunction, Weight, ball_family, centered_family, fit_growth, make_grid
from multicz.harness import default_config
from multicz.harness.campaign import run_campaign
from multicz.harness.config import CHECK_IDS
from multicz.harness.report import emit_report
from multicz.maximal import MaximalParams, critical_cover, frak_m
from multicz.pseudo import (
    LatticeKernel,
    SymbolSpec,
    apply_Ta,
    constant_symbol,
    lattice_h2_pairs,
    lattice_kernel_samples,
    lp_partition,
    model_symbol,
    truncated_symbol,
)
from multicz.weights import (
    WeightRecipe,
    WeightVector,
    ap_quantity,
    certify,
    multi_ap_quantity,
    nu,
    reverse_holder_quantities,
)
from oracles import apply_T_reference, frak_m_reference

SLACK = 1e-6


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(num, title):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nACCEPTANCE {num:>2} FAIL  {title}")
            raise
        with capsys.disabled():
            print(f"\nACCEPTANCE {num:>2} PASS  {title}")

    return run


def gauss(grid, c, s=1.0):
    return grid.sample(lambda x: np.exp(-((x - c) ** 2) / (2 * s * s)))


def trig(grid, rng, kmax):
    x = grid.axis
    out = np.full(grid.G, rng.normal())
    for k in range(1, kmax):
        w = math.pi * k / grid.L
        out += rng.normal() * np.cos(w * x) + rng.normal() * np.sin(w * x)
    return GridFunction(grid, out)


def random_recipe(rng):
    return WeightRecipe(rng.uniform(0.05, 1.0), (rng.uniform(-3, 3),), rng.uniform(-0.8, 0.8), rng.uniform(0, 1.5))


def random_ball(rng):
    return Ball((rng.uniform(-6, 6),), rng.uniform(0.2, 6))


# ---------------------------------------------------------------- 1

def test_constant_weight_exactness(criterion, rng):
    with criterion(1, "constant-weight exactness (20 draws, 1e-12)"):
        g = make_grid(1, 8, 256)
        one = Weight.ones(g)
        for _ in range(20):
            ps = tuple(rng.uniform(1, 6, size=2))
            B = random_ball(rng)
            assert abs(ap_quantity(one, ps[0], B) - 1) <= 1e-12
            assert abs(multi_ap_quantity(WeightVector((one, one), ps), B) - 1) <= 1e-12


# ---------------------------------------------------------------- 2

def test_closed_form_weight_quantity(criterion):
    with criterion(2, "|x|^(1/2), p = 2, B(0,1) -> sqrt(4/3) within 1%"):
        g = make_grid(1, 2, 2048)
        q = ap_quantity(Weight(g, np.abs(g.axis) ** 0.5), 2, Ball(0.0, 1.0))
        # avg |x|^(1/2) = 2/3, avg |x|^(-1/2) = 2
        assert abs(q / math.sqrt(4 / 3) - 1) <= 1e-2


# ---------------------------------------------------------------- 3

def test_growth_class_separation(criterion):
    with criterion(3, "(1+|x|)^2 growth fit, refinement stability, theta = 0 residual"):
        g = make_grid(1, 8, 1024)
        w = Weight(g, (1 + np.abs(g.axis)) ** 2)
        coarse = certify(w, 2, centered_family(g, [1, 2, 4, 8])).fit
        fine = certify(w, 2, centered_family(g, list(2.0 ** np.arange(0, 3.01, 0.5)))).fit
        assert 0.3 <= coarse.theta <= 0.7 and 0.3 <= fine.theta <= 0.7
        assert abs(fine.C / coarse.C - 1) <= 0.1
        samples = [(r, ap_quantity(w, 2, Ball(0.0, r))) for r in (1, 2, 4, 8)]
        assert fit_growth(samples, theta=0.0).max_residual > 0.5


# ---------------------------------------------------------------- 4

def test_structural_inequalities(criterion, rng):
    with criterion(4, "Jensen, nesting, rescaling, reverse Hoelder, characterization (200 draws)"):
        g = make_grid(1, 8, 256)
        fam = ball_family(g, [0.5, 1, 2, 4], stride=32)
        for _ in range(200):
            w1, w2 = random_recipe(rng).sample(g), random_recipe(rng).sample(g)
            B = random_ball(rng)
            p, dq, r = rng.uniform(1.01, 4), rng.uniform(0, 4), rng.uniform(1, 3)
            ps = tuple(rng.uniform(1.05, 3, size=2))

            q_p = ap_quantity(w1, p, B)
            assert q_p >= 1 - SLACK
            assert ap_quantity(w1, p + dq, B) <= q_p * (1 + SLACK)

            wv = WeightVector((w1, w2), ps)
            Q = multi_ap_quantity(wv, B)
            assert Q >= 1 - SLACK
            assert multi_ap_quantity(WeightVector((w1, w2), (r * ps[0], r * ps[1])), B) <= Q ** (1 / r) * (1 + SLACK)

            # Hoelder: each characterization quantity is at most Q^(1/m)
            m, pv = 2, wv.exponents.p
            assert ap_quantity(nu(wv), m * pv, B) <= Q ** (1 / m) * (1 + SLACK)
            for w, pc in zip(wv.weights, wv.exponents.conjugates):
                dual = Weight(g, w.values ** (1 - pc))
                assert ap_quantity(dual, m * pc, B) <= Q ** (1 / m) * (1 + SLACK)

            rh = reverse_holder_quantities(w1, fam, 0.1)
            assert np.all(np.isfinite(rh)) and rh.min() >= 1 - SLACK
            fit = fit_growth([(rad, v) for rad, row in zip(fam.radii, rh) for v in row])
            curve = fit.C * (1 + np.asarray(fam.radii)) ** fit.theta * (1 + fit.max_residual)
            assert np.all(rh.max(1) <= curve * (1 + SLACK))


# ---------------------------------------------------------------- 5

def test_maximal_exactness(criterion, rng):
    with criterion(5, "frak_m geometric series and brute force (1e-10)"):
        g = make_grid(1, 8, 128)
        cover = critical_cover(g)
        for N, K in [(2.0, 3), (3.0, 5), (1.5, 4)]:
            out = frak_m([GridFunction(g, np.ones(128))] * 2, MaximalParams(N=N, Kmax=K), cover)
            expect = (1 - 2 ** (-N * (K + 1))) / (1 - 2**-N)
            assert np.max(np.abs(out.values - expect)) <= 1e-10
        fv = [gauss(g, 1.0), gauss(g, -2.0, 1.5)]
        out = frak_m(fv, MaximalParams(N=3.0, Kmax=4), cover)
        for i in rng.choice(128, 10, replace=False):
            ref = frak_m_reference([f.values for f in fv], 8, 128, int(i), 3.0, 4)
            assert abs(out.values[i] - ref) <= 1e-10 * abs(ref)


# ---------------------------------------------------------------- 6

def test_operator_oracle_equivalence(criterion, rng):
    with criterion(6, "apply_T vs reference sum (1e-12), constant-symbol commutator (1e-10)"):
        K = model_kernel(2, 1)
        g = make_grid(1, 4, 32)
        f1, f2 = gauss(g, 0.5), gauss(g, -0.7, 1.3)
        out = apply_T(K, [f1, f2])
        for i in rng.choice(32, 5, replace=False):
            ref = apply_T_reference(f1.values, f2.values, 4, 32, g.axis[i])
            assert abs(out.values[i] - ref) <= 1e-12 * abs(ref)
        b = [GridFunction(g, np.full(32, 3.0)), GridFunction(g, np.full(32, -1.25))]
        comm = commutator_apply(K, b, [f1, f2]).values
        assert np.max(np.abs(comm)) <= 1e-10 * np.max(np.abs(out.values)) * 3


# ---------------------------------------------------------------- 7

def test_pseudodifferential_product_law(criterion, rng):
    with criterion(7, "a = 1 product law, single mode, separable multiplier oracle"):
        g = make_grid(1, 4, 32)
        f1, f2 = trig(g, rng, 8), trig(g, rng, 8)
        prod = f1.values * f2.values
        out = apply_Ta(constant_symbol(2, 1), [f1, f2]).values
        assert np.max(np.abs(out - prod)) <= 1e-10 * np.max(np.abs(prod))

        a = model_symbol()
        x = g.axis
        for k1, k2 in [(1, 2), (-3, 5), (0, -7), (6, 6)]:
            w1, w2 = math.pi * k1 / g.L, math.pi * k2 / g.L
            e1, e2 = GridFunction(g, np.exp(1j * w1 * x)), GridFunction(g, np.exp(1j * w2 * x))
            xi = np.broadcast_to(np.array([[w1], [w2]]), (32, 2, 1))
            expect = a(x[:, None], xi) * np.exp(1j * (w1 + w2) * x)
            assert np.max(np.abs(apply_Ta(a, [e1, e2]).values - expect)) <= 1e-12

        mu1 = lambda xi: 1 / (1 + xi**2)
        mu2 = lambda xi: np.cos(xi) + 0.5j * np.sin(2 * xi)
        sep = SymbolSpec(2, 1, lambda x, xi: mu1(xi[..., 0, 0]) * mu2(xi[..., 1, 0]))
        freq = 2 * math.pi * np.fft.fftfreq(32, d=g.h)
        oracle = np.fft.ifft(mu1(freq) * np.fft.fft(f1.values)) * np.fft.ifft(mu2(freq) * np.fft.fft(f2.values))
        got = apply_Ta(sep, [f1, f2]).values
        assert np.max(np.abs(got - oracle)) <= 1e-10 * np.max(np.abs(oracle))


# ---------------------------------------------------------------- 8

def test_littlewood_paley_partition(criterion):
    with criterion(8, "partition telescopes (1e-12), derivative scaling uniform (20%)"):
        part = lp_partition(6)
        r = np.linspace(0, 2.0**6, 4001)
        assert np.max(np.abs(sum(part.phi(k, r) for k in range(7)) - 1)) <= 1e-12
        c = []
        for k in range(1, 7):
            d = 2.0**k * 1e-5
            rr = np.linspace(2.0 ** (k - 1), 2.0 ** (k + 1), 20001)
            c.append(2.0**k * np.max(np.abs(part.phi(k, rr + d) - part.phi(k, rr - d)) / (2 * d)))
        assert max(c) / min(c) <= 1.2


# ---------------------------------------------------------------- 9

def test_symbol_kernel_hypotheses(criterion):
    with criterion(9, "truncated model symbol kernel satisfies H1 (N=2,3,4) and H2 (eps=0.5)"):
        g = make_grid(1, 4, 2048)
        K = LatticeKernel(truncated_symbol(model_symbol(), 8), g, cache=4).spec(0.5)
        r = np.random.default_rng(0)
        y = lattice_kernel_samples(g, 2, [(1024,), (1300,), (700,), (1500,)], 40000, 512, r)
        h1 = verify_h1(K, y, [2, 3, 4])
        assert not h1.any_divergent and all(math.isfinite(v) for v in h1.C.values())
        h2 = verify_h2(K, lattice_h2_pairs(y, g, r), [1, 2], epsilon=0.5)
        assert not h2.any_divergent and all(math.isfinite(v) for v in h2.C.values())


# ---------------------------------------------------------------- 10

OPERATORS = {"kernel": {"kind": "kernel", "name": "model", "scale": 1.0}, "symbol": {"kind": "symbol", "name": "model"}}


def weights_with_b(b):
    return [{"eps0": 0.1, "x0": 1.0, "a": 0.3, "b": b}, {"eps0": 0.1, "x0": -1.0, "a": -0.3, "b": b}]


@pytest.mark.parametrize("b", [0.0, 1.0])
@pytest.mark.parametrize("op", ["kernel", "symbol"])
def test_theorem_campaign(criterion, op, b, tmp_path):
    with criterion(10, f"campaign {op}, b = {b:g}: all {len(CHECK_IDS)} checks PASS"):
        cfg = default_config(operator=OPERATORS[op], weights=weights_with_b(b), checks=list(CHECK_IDS),
                             family={"kind": "gaussian-packet", "count": 20})
        reports = run_campaign(cfg)
        assert [r.check_id for r in reports] == list(CHECK_IDS)
        failed = [r.summary() for r in reports if not r.passed]
        assert not failed, failed


def test_negative_fixture_diverges(criterion, rng):
    with criterion(10, "pure power kernel raises a divergence flag in verify_h1"):
        rep = verify_h1(pure_power_kernel(2, 1), random_samples(2, 1, 20000, 8, rng), [3])
        assert rep.any_divergent


# ---------------------------------------------------------------- 11

def test_determinism(criterion, tmp_path):
    with criterion(11, "rerun with fixed seed gives byte-identical CSV"):
        cfg = dict(operator=OPERATORS["symbol"], checks=["strong", "commutator", "pointwise:P-sharp"],
                   family={"kind": "gaussian-packet", "count": 5}, seed=2024)
        a, _ = emit_report(run_campaign(default_config(**cfg)), tmp_path / "a.csv")
        b, _ = emit_report(run_campaign(default_config(**cfg)), tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes() and len(a.read_bytes().splitlines()) == 4
