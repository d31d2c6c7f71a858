"""Quick invariant suite behind ``kolmolab selftest``.

Each check is small enough that the whole suite runs in well under a minute;
the pytest suite covers the same ground in depth.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Callable

from . import algstats, coding, measures, probstats, ratedist, toyvm, universal

CHECKS: list[tuple[str, Callable[[], None]]] = []


def check(name: str):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn
    return deco


def _random_dist(rng: random.Random, k: int) -> coding.Dist:
    w = [rng.randint(1, 50) for _ in range(k)]
    t = sum(w)
    return coding.Dist(tuple(range(k)), tuple(Fraction(x, t) for x in w))


@check("noiseless-coding-sandwich")
def _sandwich():
    rng = random.Random(11)
    for _ in range(100):
        d = _random_dist(rng, rng.randint(1, 16))
        L = coding.shannon_fano(d).expected_length(d)
        h = measures.entropy(d)
        assert h <= float(L) + 1e-12 and float(L) < h + 1


@check("kraft-roundtrip")
def _kraft():
    rng = random.Random(12)
    for _ in range(100):
        ls = [rng.randint(1, 8) for _ in range(rng.randint(1, 12))]
        if coding.kraft_sum(ls) > 1:
            continue
        code = coding.code_from_lengths(ls)
        assert sorted(code.lengths) == sorted(ls)
        seq = [rng.randrange(len(ls)) for _ in range(20)]
        assert code.decode_stream(code.encode_sequence(seq)) == seq


@check("entropy-grouping")
def _grouping():
    F = Fraction
    lhs = measures.entropy(coding.Dist((0, 1, 2), (F(1, 2), F(1, 3), F(1, 6))))
    rhs = measures.binary_entropy(F(1, 2)) + 0.5 * measures.binary_entropy(F(2, 3))
    assert abs(lhs - rhs) <= 1e-9


@check("kl-and-data-processing")
def _dpi():
    rng = random.Random(13)
    for _ in range(10):
        xs, ys = (0, 1), (0, 1, 2)
        w = {(x, y): rng.randint(0, 5) for x in xs for y in ys}
        w[(0, 0)] += 1
        t = sum(w.values())
        j = measures.JointDist(xs, ys, {k: Fraction(v, t) for k, v in w.items()})
        assert measures.kl_divergence(j.marginal_x(), j.marginal_x()) == 0
        for m in measures.all_maps(ys):
            assert measures.data_processing_check(j, m).holds


@check("negative-individual-information")
def _negative_info():
    for eps in (Fraction(1, 10), Fraction(1, 100)):
        v = measures.individual_info(measures.epsilon_joint(eps, labelled=True), 1)
        target = measures.binary_entropy(eps) + float(eps) - 1
        assert abs(v - target) <= 1e-9 and v < 0


@check("toy-machine-prefix-and-kraft")
def _vm():
    o = toyvm.build_oracle(toyvm.ToyMachine(16, 1000), ["", "0", "01"])
    for c in ("", "0", "01"):
        progs = o.halting_programs(c)
        assert toyvm.is_prefix_free_sorted(progs)
        assert o.kraft_sum(c) <= 1


@check("counting-bound")
def _counting():
    o = toyvm.cached_oracle(20, 1000)
    for n in range(1, 7):
        xs = list(toyvm.all_strings(n, n))
        for m in range(0, n + 1):
            frac = Fraction(sum(1 for x in xs if o.khat(x) <= n - m), len(xs))
            assert frac < Fraction(2) ** (m - n + 1)


@check("bernoulli-sufficiency")
def _suff():
    fam = probstats.bernoulli_family(5)
    assert probstats.check_sufficiency_exact(fam, probstats.statistic("ones")).sufficient
    assert not probstats.check_sufficiency_exact(fam, probstats.statistic("pairs")).sufficient


@check("binary-rate-distortion")
def _sfbinary():
    for p in (Fraction(1, 10), Fraction(3, 10)):
        for R in (Fraction(1, 10), Fraction(3, 10)):
            closed = ratedist.shannon_fano_rd_binary(p, R=R).D
            _, _, d = ratedist.alpha_oracle(p, R)
            assert abs(closed - d) <= 1e-6


@check("set-distortion-brute-force")
def _brute():
    for n in (1, 2, 3):
        inst = ratedist.set_distortion_uniform(n)
        for R in range(n + 1):
            assert ratedist.brute_force_D(inst, 1, R).D == n - R


@check("blahut-arimoto-corners")
def _ba():
    inst = ratedist.hamming_instance(Fraction(1, 4))
    h = measures.binary_entropy(Fraction(1, 4))
    assert abs(ratedist.blahut_arimoto(inst, D=0.0).R - h) <= 1e-6
    assert ratedist.blahut_arimoto(inst, D=ratedist.d_max(inst)).R <= 1e-6


@check("structure-function-lower-bound")
def _lam():
    o = toyvm.cached_oracle(20, 1000)
    fam = algstats.MaskFamily()
    c = algstats.decode_overhead(fam, 6)
    for x in toyvm.all_strings(6, 6):
        k = o.khat(x)
        curve = algstats.structure_functions(x, fam, with_beta=False)
        assert all(s.lam >= k - c for s in curve.samples)


@check("universal-code")
def _ucode():
    rng = random.Random(14)
    fam = universal.bernoulli_grid()
    for _ in range(50):
        x = "".join(rng.choice("01") for _ in range(rng.randint(0, 40)))
        assert universal.binomial_decode(universal.binomial_encode(x))[0] == x
        assert universal.per_string_bound_holds(fam, x)
        assert universal.universal_decode(fam, universal.universal_encode(fam, x))[0] == x


def run(out=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # report, keep going
            ok = False
            out(f"FAIL {name}: {type(exc).__name__}: {exc}")
        else:
            out(f"PASS {name}")
    return ok
