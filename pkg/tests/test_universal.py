import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kolmolab.coding import CodingError, DecodeError, Dist, encode_natural, is_prefix_free, natural_length, shannon_fano
from kolmolab.measures import binary_entropy
from kolmolab.universal import (EXPLICIT_LIMIT, BernoulliSource, BinomialCode, FixedLengthCode, MarkovSource,
                                SourceFamily, bernoulli_grid, binomial_decode, binomial_encode, binomial_length,
                                per_string_bound_holds, pack_bits, parse_family, rank_in_class, redundancy_report,
                                universal_decode, universal_encode, universal_two_part, unpack_bits,
                                unrank_in_class)

F = Fraction

MARKOV_FAMILY = """
# two chains and a coin
bernoulli 1/2
markov1 1/2 1/10 9/10
markov1 1/2 9/10 1/10
"""


# --- binomial code

def test_binomial_ten_bits_three_zeros():
    x = "1101110101"
    assert x.count("0") == 3
    # C(10, 3) = 120 needs 7 index bits
    assert binomial_length(x) == natural_length(10) + natural_length(3) + 7
    assert len(binomial_encode(x)) == binomial_length(x)


def test_binomial_all_zeros_has_no_index():
    x = "0" * 64
    assert binomial_encode(x) == binomial_encode(x)[:natural_length(64) * 2]
    assert binomial_length(x) == 2 * natural_length(64)


def test_binomial_near_entropy_bound():
    # n = 1000 with 100 zeros: within 15 bits of n H(0.1)
    rng = random.Random(0)
    pos = set(rng.sample(range(1000), 100))
    x = "".join("0" if i in pos else "1" for i in range(1000))
    n_h = 1000 * binary_entropy(F(1, 10))
    assert binomial_length(x) - n_h <= 15 + natural_length(1000) + natural_length(100)
    assert math.ceil(math.log2(math.comb(1000, 100))) <= n_h


@pytest.mark.parametrize("n", range(0, 9))
def test_rank_matches_enumeration(n):
    for zeros in range(n + 1):
        members = sorted(x for x in ("".join(b) for b in itertools.product("01", repeat=n)) if x.count("0") == zeros)
        for r, x in enumerate(members):
            assert rank_in_class(x) == r
            assert unrank_in_class(n, zeros, r) == x


@settings(max_examples=200)
@given(st.text(alphabet="01", max_size=300))
def test_binomial_roundtrip(x):
    w = binomial_encode(x)
    assert binomial_decode(w + "1") == (x, len(w))


def test_binomial_codewords_prefix_free():
    words = sorted(binomial_encode("".join(b)) for n in range(7) for b in itertools.product("01", repeat=n))
    assert is_prefix_free(words)


@pytest.mark.parametrize("bits", ["", "1000", "10110100"])
def test_binomial_decode_errors(bits):
    with pytest.raises(DecodeError):
        binomial_decode(bits)


def test_binomial_rejects_index_outside_class():
    # n = 3, n0 = 1: C(3,1) = 3 fits in 2 bits, so index 3 is invalid
    head = binomial_encode("011")[:-2]
    with pytest.raises(DecodeError, match="outside"):
        binomial_decode(head + "11")


def test_fixed_length_code():
    c = FixedLengthCode(4)
    assert c.length("0101") == 4 and c.length("01") is None
    assert c.decode(c.encode("0101") + "1", 0) == ("0101", 4)
    assert BinomialCode().length("012") is None


# --- sources

def test_bernoulli_range():
    with pytest.raises(ValueError):
        BernoulliSource(F(3, 2))
    with pytest.raises(ValueError):
        MarkovSource(F(1, 2), F(2), F(0))


def test_families_are_compatible():
    assert bernoulli_grid().check_compatibility(8)
    assert parse_family(MARKOV_FAMILY).check_compatibility(8)


def test_incompatible_family_detected():
    class Broken(BernoulliSource):
        def prob(self, x):
            return F(1, 2) if x else F(1)
    assert not SourceFamily([Broken(F(1, 2))]).check_compatibility(2)


@pytest.mark.parametrize("text,match", [
    ("", "no sources"),
    ("gaussian 0 1", "line 1"),
    ("bernoulli 1/2\nbernoulli 3/2", "line 2"),
    ("markov1 1/2 1/2", "line 1"),
])
def test_parse_family_errors(text, match):
    with pytest.raises(ValueError, match=match):
        parse_family(text)


def test_family_indexing_is_one_based():
    fam = bernoulli_grid()
    assert fam[1].theta == F(1, 10) and fam[9].theta == F(9, 10)
    with pytest.raises(IndexError):
        fam[0]


@pytest.mark.parametrize("src", [BernoulliSource(F(1, 5)), BernoulliSource(F(1, 2)), BernoulliSource(F(7, 10)),
                                 MarkovSource(F(1, 2), F(1, 10), F(9, 10))], ids=str)
@pytest.mark.parametrize("n", [1, 4, 7])
def test_shannon_fano_agrees_with_generic_construction(src, n):
    d = src.dist(n)
    d = Dist(*zip(*[(x, p) for x, p in d.items() if p > 0]))
    ref = shannon_fano(d)
    for x in d.outcomes:
        assert src.sf_encode(x) == ref.encode(x)
        w = src.sf_encode(x)
        assert src.sf_decode(w + "0", 0, n) == (x, len(w))
        assert len(w) == src.codelength(x)


def test_fair_coin_is_identity():
    src = BernoulliSource(F(1, 2))
    for x in ("", "0", "0110", "1" * 40, "0110100110010110" * 4):
        assert src.sf_encode(x) == x


def test_markov_codewords_limited():
    src = MarkovSource(F(1, 2), F(1, 10), F(9, 10))
    with pytest.raises(CodingError):
        src.sf_encode("0" * (EXPLICIT_LIMIT + 1))
    # lengths still work at any n
    assert src.codelength("0" * 100) is not None


# --- universal two-part code

def test_frequency_picks_nearest_parameter():
    x = "0010010100" * 10  # 30% ones
    res = universal_two_part(bernoulli_grid(), x)
    assert res.k == 3


def test_ties_go_to_least_index():
    fam = SourceFamily([BernoulliSource(F(1, 2)), BernoulliSource(F(1, 2))])
    assert universal_two_part(fam, "0101").k == 1


def test_zero_probability_everywhere():
    fam = SourceFamily([BernoulliSource(F(1))])
    with pytest.raises(CodingError):
        universal_two_part(fam, "0")


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="01", max_size=200))
def test_per_string_bound_and_roundtrip_bernoulli(x):
    fam = bernoulli_grid()
    assert per_string_bound_holds(fam, x)
    res = universal_two_part(fam, x)
    best = min(lk + natural_length(k) for k, lk in enumerate(res.per_source, 1))
    assert res.length == best + natural_length(len(x))
    w = universal_encode(fam, x)
    assert universal_decode(fam, w + "01") == (x, len(w))


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="01", max_size=EXPLICIT_LIMIT))
def test_roundtrip_markov(x):
    fam = parse_family(MARKOV_FAMILY)
    w = universal_encode(fam, x)
    assert universal_decode(fam, w) == (x, len(w))
    assert per_string_bound_holds(fam, x)


def test_decode_rejects_bad_index():
    bad = encode_natural(3) + encode_natural(20) + "000"
    with pytest.raises(DecodeError, match="outside"):
        universal_decode(bernoulli_grid(), bad)


def test_expected_length_sandwich():
    fam = bernoulli_grid()
    rep = redundancy_report(fam, ["0101", "0000"], expected_n=[4, 8])
    assert len(rep.expected) == 2 * len(fam)
    for (k, n), (h, el, upper) in rep.expected.items():
        assert h <= el + 1e-9
        assert el <= upper + 1e-9
    assert all(r.bound_holds for r in rep.rows)
    assert rep.total_redundancy == sum(r.length - r.min_lk for r in rep.rows)


def test_report_rejects_empty_corpus():
    with pytest.raises(ValueError):
        redundancy_report(bernoulli_grid(), [])


def test_per_symbol_length_on_long_sample():
    x = BernoulliSource(F(1, 5)).sample(10_000, random.Random(1))
    res = universal_two_part(bernoulli_grid(), x)
    assert abs(res.length / len(x) - binary_entropy(F(1, 5))) < 0.02
    assert len(universal_encode(bernoulli_grid(), x)) == res.length


# --- bitstream files

@given(st.text(alphabet="01", max_size=100))
def test_pack_roundtrip(bits):
    data = pack_bits(bits)
    assert len(data) == 4 + (len(bits) + 7) // 8
    assert unpack_bits(data) == bits


def test_pack_layout():
    assert pack_bits("1") == b"\x01\x00\x00\x00\x80"
    with pytest.raises(DecodeError):
        unpack_bits(b"\x09\x00\x00\x00\xff")
    with pytest.raises(DecodeError):
        unpack_bits(b"\x01")
