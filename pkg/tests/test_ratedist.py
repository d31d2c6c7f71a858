import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kolmolab.algstats import MaskFamily
from kolmolab.coding import Dist
from kolmolab.measures import binary_entropy
from kolmolab.ratedist import (BudgetError, RDInstance, alpha_oracle, ba_slope, band_fit, blahut_arimoto,
                               brute_force_D, canonical_covering, d_max, floor_pow2, hamming_instance,
                               set_distortion_table, set_distortion_uniform, shannon_fano_rd_binary, sphere,
                               structfn_band, subadditivity_gap)

F = Fraction
INF = math.inf


def ternary_instance():
    src = Dist(("a", "b", "c"), (F(1, 2), F(1, 3), F(1, 6)))
    return RDInstance(src, ("a", "b", "c"), {(x, y): int(x != y) for x in "abc" for y in "abc"})


# --- exact helpers

@pytest.mark.parametrize("e,v", [(F(0), 1), (F(1, 2), 1), (F(1), 2), (F(3, 2), 2), (F(5, 2), 5), (F(10), 1024)])
def test_floor_pow2(e, v):
    assert floor_pow2(e) == v


@given(st.fractions(min_value=0, max_value=30, max_denominator=12))
def test_floor_pow2_bracket(e):
    k = floor_pow2(e)
    # k <= 2^e < k + 1, checked with integer powers
    assert k ** e.denominator <= 2 ** e.numerator < (k + 1) ** e.denominator


def test_instance_validation():
    src = Dist((0, 1), (F(1, 2), F(1, 2)))
    with pytest.raises(ValueError, match="undefined"):
        RDInstance(src, (0,), {(0, 0): 0})
    with pytest.raises(ValueError, match="negative"):
        RDInstance(src, (0,), {(0, 0): 0, (1, 0): -1})
    with pytest.raises(ValueError, match="no finite"):
        RDInstance(src, (0,), {(0, 0): 0, (1, 0): INF})


# --- set distortion

@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("m", [1, 2])
def test_uniform_set_distortion_is_n_minus_R(n, m):
    inst = set_distortion_uniform(n)
    for R in range(n + 1):
        res = brute_force_D(inst, m, R)
        assert res.D == n - R
        assert res.exact


@pytest.mark.parametrize("n", [1, 2])
def test_partition_solver_matches_explicit_table(n):
    table = set_distortion_table(n)
    inst = set_distortion_uniform(n)
    for R in [F(k, 4) for k in range(0, 4 * n + 1)]:
        assert brute_force_D(table, 1, R).D == inst.distortion_rate(1, R).D


def test_partition_witness_is_a_partition():
    inst = set_distortion_uniform(3)
    res = inst.distortion_rate(2, F(3, 2))
    cells = [frozenset(c) for c in res.codebook]
    assert sum(len(c) for c in cells) == 64
    assert frozenset().union(*cells) == frozenset(itertools.product(inst.source.outcomes, repeat=2))


def test_nonuniform_source():
    src = Dist(("00", "01", "10", "11"), (F(1, 2), F(1, 4), F(1, 8), F(1, 8)))
    from kolmolab.ratedist import SetDistortionInstance
    res = SetDistortionInstance(src).distortion_rate(1, 1)
    # two cells: the heavy point alone, the rest together
    assert [len(c) for c in res.codebook] == [1, 3]
    assert res.D == pytest.approx(0.5 * math.log2(3), abs=1e-12)


def test_subadditivity_exhaustive():
    for n in (1, 2):
        inst = set_distortion_uniform(n)
        for a in (1, 2):
            for b in (1, 2):
                for R in [F(k, 2) for k in range(0, 2 * n + 1)]:
                    assert subadditivity_gap(inst, a, b, R) >= 0
    h = hamming_instance(F(1, 4))
    for R in (F(1, 3), F(1, 2)):
        assert subadditivity_gap(h, 1, 2, R) >= 0


def test_budget_guard():
    with pytest.raises(BudgetError):
        brute_force_D(hamming_instance(F(1, 3)), 8, F(1, 2))


# --- distortion spheres

def test_spheres_and_canonical_covering():
    h = hamming_instance(F(1, 2))
    center = (0, 0, 0)
    sizes = [len(sphere(h, center, F(r, 3)).elements) for r in range(4)]
    assert sizes == [1, 3, 3, 1]
    spheres = [sphere(h, c, F(r, 3)) for c in [(0, 0, 0), (1, 1, 1)] for r in range(4)]
    cover = canonical_covering(spheres)
    union = set()
    for s in cover:
        assert not (union & s.elements)
        union |= s.elements
    assert union == set(itertools.product((0, 1), repeat=3))
    # every element sits in a sphere of least possible radius
    for s in cover:
        for x in s.elements:
            assert s.radius == min(sp.radius for sp in spheres if x in sp.elements)


# --- Blahut-Arimoto

def test_objective_is_monotone():
    for inst in (hamming_instance(F(1, 4)), ternary_instance(), set_distortion_table(1)):
        for slope in (0.5, 2.0, 8.0):
            pt = ba_slope(inst, slope)
            hist = pt.objective
            assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


@pytest.mark.parametrize("p", [F(1, 10), F(1, 4), F(2, 5)])
def test_hamming_closed_form(p):
    h = hamming_instance(p)
    for D in (0.02, 0.05, float(p) / 2):
        pt = blahut_arimoto(h, D=D)
        assert pt.D == pytest.approx(D, abs=1e-6)
        assert pt.R == pytest.approx(binary_entropy(p) - binary_entropy(D), abs=1e-6)


@pytest.mark.parametrize("inst", [hamming_instance(F(1, 4)), ternary_instance()], ids=["hamming", "ternary"])
def test_corners(inst):
    hx = -sum(float(q) * math.log2(q) for q in inst.source.probs)
    top = blahut_arimoto(inst, slope=64.0)
    assert top.R == pytest.approx(hx, abs=1e-6)
    assert top.D == pytest.approx(0.0, abs=1e-6)
    zero = blahut_arimoto(inst, rate=0)
    assert zero.R == 0 and zero.D == pytest.approx(d_max(inst), abs=1e-12)
    assert blahut_arimoto(inst, D=d_max(inst) + 0.1).R == 0


def test_rate_target_inverts():
    h = hamming_instance(F(1, 4))
    pt = blahut_arimoto(h, rate=0.3)
    assert pt.R == pytest.approx(0.3, abs=1e-6)


def test_bad_arguments():
    h = hamming_instance(F(1, 4))
    with pytest.raises(ValueError):
        blahut_arimoto(h)
    with pytest.raises(ValueError):
        blahut_arimoto(h, D=0.1, tol=0)


@pytest.mark.parametrize("inst,gaps", [
    (hamming_instance(F(1, 4)), {(1, F(1, 2)): 0.19402, (2, F(1, 2)): 0.06902, (3, F(1, 2)): 0.11069}),
    (ternary_instance(), None),
], ids=["hamming", "ternary"])
def test_ba_below_block_codes(inst, gaps):
    # finite block length cannot beat the information rate-distortion function
    seen = {}
    for m in (1, 2, 3):
        for R in (F(1, 3), F(1, 2)):
            b = brute_force_D(inst, m, R).D
            ba = blahut_arimoto(inst, rate=float(R)).D
            assert float(b) >= ba - 1e-6
            seen[(m, R)] = float(b) - ba
    if gaps:
        for k, v in gaps.items():
            assert seen[k] == pytest.approx(v, abs=1e-4)


# --- binary source with log-loss distortion

@pytest.mark.parametrize("p", [F(k, 10) for k in range(1, 6)])
def test_closed_form_against_alpha_oracle(p):
    h = binary_entropy(p)
    for k in range(0, 21):
        R = F(k, 20)
        if R > h:
            continue
        cf = shannon_fano_rd_binary(p, R=R)
        _, i, c = alpha_oracle(p, R)
        assert i == pytest.approx(float(R), abs=1e-6)
        assert cf.D == pytest.approx(c, abs=1e-6)


def test_closed_form_both_directions():
    pt = shannon_fano_rd_binary(F(1, 2), D=F(1, 4))
    assert pt.R == pytest.approx(0.75)
    assert shannon_fano_rd_binary(F(1, 2), R=2).D == 0
    with pytest.raises(ValueError):
        shannon_fano_rd_binary(0, R=0)


# --- expected structure function versus distortion-rate

def test_band_fit_envelope():
    gaps = {1: 1.0, 2: 2.5, 4: 3.0, 8: 4.0}
    c, b = band_fit(gaps)
    assert all(v <= c + b * math.log2(n) + 1e-12 for n, v in gaps.items())
    assert any(abs(v - (c + b * math.log2(n))) < 1e-12 for n, v in gaps.items())


def test_structfn_band_small():
    rows, c, b = structfn_band(MaskFamily(), range(1, 5))
    for n, rs in rows.items():
        assert [r.R for r in rs] == list(range(n + 1))
        for r in rs:
            assert r.d_star == n - r.R
            assert r.exact and r.right_holds and r.shift is not None
    worst = {n: max(r.shift for r in rs) for n, rs in rows.items()}
    assert all(w <= c + b * math.log2(n) + 1e-9 for n, w in worst.items())
