import itertools
import math

import numpy as np
import pytest

from fpa.evaluate import (
    atom_decomposition,
    cdf,
    cdf_many,
    epsilon_shift,
    expected_max_value,
    expected_second_value,
    revenue,
    sample_outcomes,
    utility,
    verify_bne,
    welfare,
)
from fpa.model import AuctionInstance, Equilibrium, Segment
from fpa.solver import solve
from fpa.experiments import random_instance

from conftest import dist


@pytest.fixture(scope="module")
def eq21(example21):
    return solve(example21, 1e-10).equilibrium


@pytest.fixture(scope="module")
def eq24(example24):
    return solve(example24, 1e-8).equilibrium


def test_cdf_gap_flat_and_bounds(eq24):
    assert cdf(eq24, 2, 7.0) == pytest.approx(11 / 12, abs=1e-8)
    assert cdf(eq24, 0, 100.0) == 1.0
    assert cdf(eq24, 0, 0.0) == 0.0
    # atom jump at the bottom
    assert cdf(eq24, 0, 1.999999) == 0.0
    assert cdf(eq24, 0, 2.0) == pytest.approx(math.sqrt(77) / (12 * math.sqrt(2)), abs=1e-7)


def test_cdf_atom_at_bottom(eq21):
    assert cdf(eq21, 0, 1.0) == pytest.approx(0.5, abs=1e-9)
    assert cdf(eq21, 0, 0.999999999) == 0.0


def test_cdf_monotone_right_continuous_sweep(eq24):
    xs = np.linspace(0.0, 21.0, 10_000)
    for i in range(4):
        fs = cdf_many(eq24, i, xs)
        assert np.all(np.diff(fs) >= -1e-12)
        assert np.all((fs >= 0) & (fs <= 1 + 1e-12))

    # right-continuity at the atom
    assert cdf(eq24, 0, 2.0) == pytest.approx(
        cdf(eq24, 0, 2.0 + 1e-12), abs=1e-9
    )


def test_utility_examples(eq21, example21):
    u = utility(eq21, example21, 0, 2.0, 1.25)
    assert u == pytest.approx(0.5, abs=1e-8)
    for b in np.linspace(1.0 + 1e-9, 1.5, 7):
        assert utility(eq21, example21, 0, 2.0, float(b)) == pytest.approx(0.5, abs=1e-7)
    # above the opponent's top bid the win is certain
    assert utility(eq21, example21, 0, 2.0, 1.75) == pytest.approx(0.25, abs=1e-7)
    # at the bottom atom, the higher value wins the tied mass (Vickrey)
    assert utility(eq21, example21, 0, 2.0, 1.0) == pytest.approx(0.5, abs=1e-8)
    assert utility(eq21, example21, 0, 1.0, 1.0) == 0.0


def test_utility_random_tie_flag(eq21, example21):
    # with uniform tie-breaking the tied atom mass is shared, so bidding at
    # the atom wins only half of it
    u = utility(eq21, example21, 0, 2.0, 1.0, tie="random")
    assert u == pytest.approx(0.25, abs=1e-8)
    # an epsilon above the atom recovers the full tied mass at epsilon cost
    u_up = utility(eq21, example21, 0, 2.0, 1.0 + 1e-6, tie="random")
    assert u_up == pytest.approx(0.5, abs=1e-5)


def test_epsilon_shift_construction(eq24, example24):
    shifted = epsilon_shift(eq24, example24, 1e-4)
    assert shifted.tie_rule == "random"
    moved = [a for a in shifted.atoms if a[1] > shifted.b_min]
    stayed = [a for a in shifted.atoms if a[1] == shifted.b_min]
    # only types with value above the bottom move up
    decomp = atom_decomposition(eq24, example24)
    want_moved = {i for i, rem in enumerate(decomp)
                  if any(v > eq24.b_min for v in rem)}
    assert {a[0] for a in moved} == want_moved
    total = {i: 0.0 for i in range(4)}
    for b, _, m in shifted.atoms:
        total[b] += m
    for i in range(4):
        assert total[i] == pytest.approx(eq24.atom_mass(i), abs=1e-12)
    assert stayed  # low-value mass stays at the bottom


def test_verify_worked_example(eq24, example24):
    report = verify_bne(eq24, example24, eps=1e-4, grid=2000)
    assert report.passed
    assert report.max_regret <= 1e-4
    assert all(c.regret >= -1e-9 for c in report.cells)


def test_verify_detects_perturbation(eq24, example24):
    shifted_segments = tuple(
        Segment(s.buyer, s.value, s.lo + 0.05, s.hi + 0.05, s.F_lo, s.F_hi, s.lam)
        if s.buyer == 0
        else s
        for s in eq24.segments
    )
    broken = Equilibrium(
        segments=shifted_segments,
        atoms=eq24.atoms,
        b_min=eq24.b_min,
        b_max=eq24.b_max + 0.05,
    )
    report = verify_bne(broken, example24, eps=1e-4, grid=800)
    assert report.max_regret > 1e-3


def test_verify_requires_minimum_grid(eq21, example21):
    from fpa.model import ValidationError

    with pytest.raises(ValidationError):
        verify_bne(eq21, example21, grid=99)


def test_verify_point_masses(point_masses):
    eq = solve(point_masses).equilibrium
    report = verify_bne(eq, point_masses, eps=1e-9, grid=500)
    assert report.max_regret <= 1e-9


# ---------------------------------------------------------------------------
# Welfare and revenue


def enumerate_second_highest(instance):
    """Oracle: full product-support enumeration."""
    total = 0.0
    supports = [list(zip(b.values, b.masses)) for b in instance.buyers]
    for profile in itertools.product(*supports):
        p = 1.0
        vals = []
        for v, m in profile:
            p *= m
            vals.append(v)
        total += p * sorted(vals)[-2]
    return total


def enumerate_max(instance):
    total = 0.0
    supports = [list(zip(b.values, b.masses)) for b in instance.buyers]
    for profile in itertools.product(*supports):
        p = 1.0
        vals = []
        for v, m in profile:
            p *= m
            vals.append(v)
        total += p * max(vals)
    return total


def test_order_statistics_match_enumeration(example24, example21):
    for inst in (example24, example21):
        assert expected_max_value(inst) == pytest.approx(enumerate_max(inst), abs=1e-12)
        assert expected_second_value(inst) == pytest.approx(
            enumerate_second_highest(inst), abs=1e-12
        )


def test_welfare_point_masses(point_masses):
    eq = solve(point_masses).equilibrium
    rep = welfare(eq, point_masses)
    assert rep.wel_f == pytest.approx(5.0, abs=1e-12)
    assert rep.wel_s == pytest.approx(5.0, abs=1e-12)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)
    rev_f, rev_s = revenue(eq, point_masses)
    assert rev_f == pytest.approx(3.0, abs=1e-12)
    assert rev_s == pytest.approx(3.0, abs=1e-12)


def test_welfare_symmetric_is_efficient(eq21, example21):
    rep = welfare(eq21, example21)
    assert rep.ratio == pytest.approx(1.0, abs=1e-7)
    assert rep.wel_f <= rep.wel_s + 1e-9


def test_poa_argmin_ratio(poa_argmin):
    eq = solve(poa_argmin, 1e-8).equilibrium
    rep = welfare(eq, poa_argmin)
    assert rep.wel_s == pytest.approx(5 / 6, abs=1e-12)
    assert rep.ratio == pytest.approx(0.89638, abs=5e-4)


def test_revenue_symmetric_example(eq21, example21):
    rev_f, rev_s = revenue(eq21, example21)
    assert rev_s == pytest.approx(1.25, abs=1e-12)  # enumeration: 1*0.75 + 2*0.25
    assert rev_f == pytest.approx(1.25, abs=1e-7)   # revenue equivalence here


def test_quadrature_vs_monte_carlo(eq21, example21, eq24, example24):
    rng = np.random.default_rng(20240809)
    for eq, inst in ((eq21, example21), (eq24, example24)):
        wel = welfare(eq, inst)
        rev_f, _ = revenue(eq, inst)
        winner_vals, winning_bids = sample_outcomes(eq, inst, rng, 1_000_000)
        se_w = winner_vals.std() / 1000.0
        se_r = winning_bids.std() / 1000.0
        assert wel.wel_f == pytest.approx(winner_vals.mean(), abs=3 * se_w)
        assert rev_f == pytest.approx(winning_bids.mean(), abs=3 * se_r)


def test_indifference_across_pieces(eq24, example24):
    for s in eq24.segments:
        if s.hi - s.lo < 1e-6:
            continue
        xs = np.linspace(s.lo + 1e-9, s.hi - 1e-9, 9)
        us = [utility(eq24, example24, s.buyer, s.value, float(x)) for x in xs]
        ref = us[0]
        for u in us:
            assert u == pytest.approx(ref, rel=1e-7, abs=1e-10)


def test_dominance_off_support():
    inst = random_instance(3, 3, 77)
    eq = solve(inst, 1e-9).equilibrium
    report = verify_bne(eq, inst, eps=1e-6, grid=1500)
    assert report.passed


def test_first_price_never_beats_efficient_welfare():
    for seed in range(10):
        inst = random_instance(2 + seed % 3, 2 + seed % 4, 60_000 + seed)
        eq = solve(inst, 1e-9).equilibrium
        rep = welfare(eq, inst)
        assert rep.wel_f <= rep.wel_s + 1e-9
        assert rep.ratio > 0
