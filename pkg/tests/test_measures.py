import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

from kolmolab.coding import Dist
from kolmolab.measures import (JointDist, all_maps, binary_entropy, conditional_entropy, data_processing_check,
                               entropy, epsilon_joint, individual_info, joint_entropy, kl_divergence, mutual_info)

F = Fraction
TOL = 1e-9


def H(*ps):
    return scipy_entropy([float(p) for p in ps], base=2)


@st.composite
def joints(draw, max_x=4, max_y=4):
    nx = draw(st.integers(min_value=1, max_value=max_x))
    ny = draw(st.integers(min_value=1, max_value=max_y))
    w = draw(st.lists(st.integers(min_value=0, max_value=9), min_size=nx * ny, max_size=nx * ny))
    if not any(w):
        w[0] = 1
    t = sum(w)
    xs, ys = tuple(f"x{i}" for i in range(nx)), tuple(f"y{j}" for j in range(ny))
    mass = {(x, y): F(w[i * ny + j], t) for i, x in enumerate(xs) for j, y in enumerate(ys)}
    return JointDist(xs, ys, mass)


def random_joint(rng, nx, ny, zeros=True):
    w = [rng.randint(0 if zeros else 1, 6) for _ in range(nx * ny)]
    if not any(w):
        w[0] = 1
    t = sum(w)
    xs, ys = tuple(range(nx)), tuple(range(ny))
    return JointDist(xs, ys, {(x, y): F(w[x * ny + y], t) for x in xs for y in ys})


# --- entropy

@pytest.mark.parametrize("probs,value", [
    ((F(1, 2), F(1, 2)), 1.0),
    ((F(1), F(0)), 0.0),
    ((F(1, 2), F(1, 3), F(1, 6)), 1.4591479170272448),
])
def test_entropy_examples(probs, value):
    assert entropy(Dist(tuple(range(len(probs))), probs)) == pytest.approx(value, abs=TOL)


def test_grouping_axiom():
    lhs = entropy(Dist((0, 1, 2), (F(1, 2), F(1, 3), F(1, 6))))
    rhs = H(F(1, 2), F(1, 2)) + 0.5 * H(F(2, 3), F(1, 3))
    assert abs(lhs - rhs) <= TOL


@settings(max_examples=200)
@given(st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=12).filter(any))
def test_entropy_matches_scipy_and_bounds(w):
    t = sum(w)
    d = Dist(tuple(range(len(w))), tuple(F(x, t) for x in w))
    h = entropy(d)
    assert h == pytest.approx(H(*d.probs), abs=TOL)
    assert -TOL <= h <= math.log2(len(d.support)) + TOL


def _grid_dists(k, den):
    for comp in itertools.product(range(den + 1), repeat=k - 1):
        if sum(comp) <= den:
            yield Dist(tuple(range(k)), tuple(F(c, den) for c in comp) + (F(den - sum(comp), den),))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_uniform_maximal_and_zero_characterization(k):
    top = math.log2(k)
    for d in _grid_dists(k, 6):
        h = entropy(d)
        assert h <= top + TOL
        assert (abs(h - top) <= TOL) == all(p == F(1, k) for p in d.probs)
        assert (h <= TOL) == any(p == 1 for p in d.probs)


# --- conditional entropy

def test_conditional_entropy_examples():
    fair = Dist((0, 1), (F(1, 2), F(1, 2)))
    assert conditional_entropy(JointDist.product(fair, fair)) == pytest.approx(1.0, abs=TOL)
    same = JointDist((0, 1), (0, 1), {(0, 0): F(1, 2), (1, 1): F(1, 2)})
    assert conditional_entropy(same) == pytest.approx(0.0, abs=TOL)
    # H(X|Y) for the eps-example: only the Y=1 branch is uncertain
    j = epsilon_joint(F(1, 10))
    assert conditional_entropy(j.transpose()) == pytest.approx(0.1, abs=TOL)


@settings(max_examples=150)
@given(joints())
def test_chain_rule_and_subadditivity(j):
    hx, hy, hxy = entropy(j.marginal_x()), entropy(j.marginal_y()), joint_entropy(j)
    assert hxy == pytest.approx(hx + conditional_entropy(j), abs=TOL)
    assert conditional_entropy(j) <= hy + TOL
    assert hxy <= hx + hy + TOL
    assert (abs(hxy - hx - hy) <= TOL) == j.is_independent()


# --- KL and mutual information

def test_kl_examples():
    u = Dist((0, 1), (F(1, 2), F(1, 2)))
    pt = Dist((0, 1), (F(1), F(0)))
    assert kl_divergence(u, u) == 0
    assert kl_divergence(pt, u) == pytest.approx(1.0, abs=TOL)
    assert kl_divergence(u, pt) == math.inf


@settings(max_examples=150)
@given(st.lists(st.integers(min_value=0, max_value=20), min_size=2, max_size=6), st.randoms())
def test_information_inequality(w, rng):
    if not any(w):
        w[0] = 1
    v = [rng.randint(0, 20) for _ in w]
    if not any(v):
        v[-1] = 1
    f = Dist(tuple(range(len(w))), tuple(F(x, sum(w)) for x in w))
    g = Dist(tuple(range(len(v))), tuple(F(x, sum(v)) for x in v))
    d = kl_divergence(f, g)
    assert d >= 0
    assert (d == 0) == (f.probs == g.probs)


def test_mutual_info_examples():
    fair = Dist((0, 1), (F(1, 2), F(1, 2)))
    assert mutual_info(JointDist.product(fair, fair)) == pytest.approx(0.0, abs=TOL)
    same = JointDist((0, 1), (0, 1), {(0, 0): F(1, 2), (1, 1): F(1, 2)})
    assert mutual_info(same) == pytest.approx(1.0, abs=TOL)
    j = epsilon_joint(F(1, 10))
    assert mutual_info(j) == pytest.approx(H(F(95, 100), F(5, 100)) - 0.1, abs=TOL)


@settings(max_examples=150)
@given(joints())
def test_mutual_info_identities(j):
    i = mutual_info(j)
    hx, hy, hxy = H(*j.marginal_x().probs), H(*j.marginal_y().probs), H(*j.as_dist().probs)
    assert i == pytest.approx(hx + hy - hxy, abs=TOL)
    assert i == pytest.approx(mutual_info(j.transpose()), abs=TOL)
    prod = JointDist.product(j.marginal_x(), j.marginal_y())
    assert i == pytest.approx(kl_divergence(j.as_dist(), prod.as_dist()), abs=TOL)
    assert i >= -TOL
    assert (i <= TOL) == j.is_independent()


# --- individual information

@pytest.mark.parametrize("eps", [F(1, 10), F(1, 100)])
def test_negative_individual_information(eps):
    j = epsilon_joint(eps, labelled=True)
    v = individual_info(j, 1)
    assert v == pytest.approx(H(eps, 1 - eps) + float(eps) - 1, abs=TOL)
    assert v < 0


def test_epsilon_joint_value_at_one_tenth():
    assert individual_info(epsilon_joint(F(1, 10), labelled=True), 1) == pytest.approx(-0.431004406410719, abs=1e-9)


@pytest.mark.parametrize("eps", [F(1, 10), F(1, 100)])
def test_epsilon_joint_binary_joint_value(eps):
    # with X over {0,1} the Y=0 branch is not recoverable from X
    v = individual_info(epsilon_joint(eps), 1)
    assert v == pytest.approx(H(eps / 2, 1 - eps / 2) - 1, abs=TOL)
    assert v < 0


def test_individual_info_zero_condition():
    j = JointDist((0, 1), (0, 1), {(0, 0): F(1, 2), (1, 0): F(1, 2)})
    with pytest.raises(ValueError):
        individual_info(j, 1)


def test_individual_info_independent_is_zero():
    fair = Dist((0, 1), (F(1, 2), F(1, 2)))
    j = JointDist.product(Dist((0, 1, 2), (F(1, 4), F(1, 4), F(1, 2))), fair)
    for y in (0, 1):
        assert individual_info(j, y) == pytest.approx(0.0, abs=TOL)


@settings(max_examples=100)
@given(joints())
def test_expected_individual_info_is_mi(j):
    i = mutual_info(j)
    ey = sum(float(p) * individual_info(j, y) for y, p in j.marginal_y().items() if p)
    ex = sum(float(p) * individual_info(j.transpose(), x) for x, p in j.marginal_x().items() if p)
    assert ey == pytest.approx(i, abs=TOL)
    assert ex == pytest.approx(i, abs=TOL)


# --- data processing

def test_dpi_identity_and_constant():
    rng = random.Random(3)
    j = random_joint(rng, 3, 4)
    ident = {y: y for y in j.y_alphabet}
    r = data_processing_check(j, ident)
    assert r.lhs == pytest.approx(r.rhs, abs=TOL)
    r = data_processing_check(j, {y: 0 for y in j.y_alphabet})
    assert r.rhs == pytest.approx(0.0, abs=TOL)


def test_dpi_partial_map_rejected():
    j = random_joint(random.Random(4), 2, 3)
    with pytest.raises(ValueError):
        data_processing_check(j, {0: 0})


def test_dpi_exhaustive_small():
    rng = random.Random(2024)
    for _ in range(20):
        j = random_joint(rng, rng.randint(1, 4), rng.randint(1, 4))
        for t in all_maps(j.y_alphabet):
            assert data_processing_check(j, t).holds


def test_binary_entropy_symmetry():
    for k in range(11):
        p = F(k, 10)
        assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=TOL)
        assert binary_entropy(p) == pytest.approx(H(p, 1 - p), abs=TOL)
