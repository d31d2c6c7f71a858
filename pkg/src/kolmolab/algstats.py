"""Algorithmic statistics over explicit families of finite-set models.

K(S) is replaced by the length of a model code under a per-family prefix
code; every family contains ``{0,1}^n`` and every code determines ``n``. K(x | S) is computed on the toy machine with the canonical
(lexicographic) listing of S on the condition tape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Iterator, Sequence

from .coding import Dist, DecodeError, decode_natural, encode_natural
from .toyvm import ComplexityOracle, literal_overhead, run

INF = math.inf


class NotFound(LookupError):
    """No optimal set within the slack; carries the best two-part length seen."""

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


def ceil_log2(size: int) -> int:
    return (size - 1).bit_length()


def bits(v: int, n: int) -> str:
    return format(v, f"0{n}b") if n else ""


@dataclass(frozen=True)
class FiniteSetModel:
    """A finite set of equal-length strings together with its model code.

    Elements are produced lazily in lexicographic order, so huge sets such as
    ``{0,1}^64`` can be used as models without being materialized.
    """

    n: int
    size: int
    model_code: str
    family: str
    label: str
    member: Callable = field(compare=False, repr=False)
    enumerate_fn: Callable = field(compare=False, repr=False)

    @property
    def model_cost(self) -> int:
        return len(self.model_code)

    @property
    def log_size(self) -> float:
        return math.log2(self.size)

    def __contains__(self, x) -> bool:
        return self.member(x)

    def elements(self) -> Iterator:
        return self.enumerate_fn()

    def listing(self) -> str:
        return "".join(self.elements())

    @property
    def listing_length(self) -> int:
        return self.n * self.size


# ---------------------------------------------------------------------------
# families

def _hamming(a: str, b: str) -> int:
    return sum(c != d for c, d in zip(a, b))


def _ball_size(n: int, r: int) -> int:
    return sum(math.comb(n, i) for i in range(r + 1))


def _neighbors(x: str, r: int) -> list[str]:
    out = []
    n = len(x)
    for d in range(r + 1):
        for pos in combinations(range(n), d):
            y = list(x)
            for i in pos:
                y[i] = "1" if y[i] == "0" else "0"
            out.append("".join(y))
    return sorted(out)


class ModelFamily:
    """Base class. ``models(n)`` enumerates the family; ``containing(x)`` the
    members that contain ``x``, in the same relative order."""

    name = "base"
    description = ""

    def models(self, n: int) -> Iterator[FiniteSetModel]:
        raise NotImplementedError

    def containing(self, x: str) -> Iterator[FiniteSetModel]:
        return (s for s in self.models(len(x)) if x in s)

    def decode(self, code: str) -> FiniteSetModel:
        raise NotImplementedError


class FullFamily(ModelFamily):
    name = "full"
    description = "{0,1}^n, code enc(n)"

    @staticmethod
    def model(n: int) -> FiniteSetModel:
        return FiniteSetModel(
            n, 1 << n, encode_natural(n), "full", f"full({n})",
            lambda x, n=n: len(x) == n and set(x) <= {"0", "1"},
            lambda n=n: (bits(v, n) for v in range(1 << n)),
        )

    def models(self, n):
        yield self.model(n)

    def containing(self, x):
        yield self.model(len(x))

    def decode(self, code):
        n, used = decode_natural(code)
        if used != len(code):
            raise DecodeError("trailing bits after model code", code[:used])
        return self.model(n)


class _WithFullSet(ModelFamily):
    """Adds ``{0,1}^n`` to a family: code ``0·enc(n)`` for the full set and
    ``1·c`` for a member with inner code ``c``."""

    def _models(self, n: int) -> Iterator[FiniteSetModel]:
        raise NotImplementedError

    def _containing(self, x: str) -> Iterator[FiniteSetModel]:
        return (s for s in self._models(len(x)) if x in s)

    def _decode(self, code: str) -> FiniteSetModel:
        raise NotImplementedError

    def _full(self, n: int) -> FiniteSetModel:
        return replace(FullFamily.model(n), model_code="0" + encode_natural(n), family=self.name)

    @staticmethod
    def _tag(s: FiniteSetModel) -> FiniteSetModel:
        return replace(s, model_code="1" + s.model_code)

    def models(self, n):
        yield self._full(n)
        for s in self._models(n):
            yield self._tag(s)

    def containing(self, x):
        yield self._full(len(x))
        for s in self._containing(x):
            yield self._tag(s)

    def decode(self, code):
        if not code:
            raise DecodeError("empty model code", code)
        if code[0] == "0":
            n, used = decode_natural(code, 1)
            if 1 + used != len(code):
                raise DecodeError("trailing bits after model code", code)
            return self._full(n)
        return self._tag(self._decode(code[1:]))


def singleton_model(x: str, code: str | None = None, family: str = "singleton") -> FiniteSetModel:
    n = len(x)
    if code is None:
        code = "0" + encode_natural(n) + x
    return FiniteSetModel(n, 1, code, family, f"{{{x}}}", lambda y, x=x: y == x, lambda x=x: iter((x,)))


class SingletonFamily(_WithFullSet):
    """``{x}`` coded as ``1 x*`` when a shorter machine program exists, else ``0 enc(n) x``."""

    name = "singleton"
    description = "{x}, code 1·x* or 0·enc(n)·x"

    def __init__(self, oracle: ComplexityOracle | None = None):
        self.oracle = oracle

    def _code(self, x: str) -> str:
        literal = "0" + encode_natural(len(x)) + x
        if self.oracle is not None:
            k = self.oracle.khat(x)
            if k is not None and 1 + k < len(literal):
                return "1" + self.oracle.xstar(x)
        return literal

    def _models(self, n):
        for v in range(1 << n):
            x = bits(v, n)
            yield singleton_model(x, self._code(x))

    def _containing(self, x):
        yield singleton_model(x, self._code(x))

    def _decode(self, code):
        if code.startswith("1"):
            steps = self.oracle.machine.steps if self.oracle else 1000
            out = run(code[1:], "", steps)
            if not out.halted:
                raise DecodeError("singleton program does not halt", code)
            return singleton_model(out.output, code)
        n, used = decode_natural(code, 1)
        x = code[1 + used:]
        if len(x) != n:
            raise DecodeError("singleton literal has wrong length", code)
        return singleton_model(x, code)


def mask_model(prefix: str, n: int) -> FiniteSetModel:
    r = len(prefix)
    code = encode_natural(n) + encode_natural(r) + prefix
    return FiniteSetModel(
        n, 1 << (n - r), code, "masks", f"A_{r}({prefix})",
        lambda y, p=prefix, n=n: len(y) == n and y.startswith(p),
        lambda p=prefix, k=n - r: (p + bits(v, k) for v in range(1 << k)),
    )


class MaskFamily(ModelFamily):
    """``A_r = {x_1..x_r y : y in {0,1}^(n-r)}``, code ``enc(n) enc(r) x_1..x_r``."""

    name = "masks"
    description = "prefix masks A_r, code enc(n)·enc(r)·x[:r]"

    def models(self, n):
        for r in range(n + 1):
            for v in range(1 << r):
                yield mask_model(bits(v, r), n)

    def containing(self, x):
        for r in range(len(x) + 1):
            yield mask_model(x[:r], len(x))

    def decode(self, code):
        n, u1 = decode_natural(code)
        r, u2 = decode_natural(code, u1)
        prefix = code[u1 + u2:]
        if len(prefix) != r or r > n:
            raise DecodeError("malformed mask code", code)
        return mask_model(prefix, n)


def _ranked_combinations(n: int, k: int) -> Iterator[str]:
    # lexicographic order of n-bit strings with k ones
    for v in range(1 << n):
        if v.bit_count() == k:
            yield bits(v, n)


def type_class_model(n: int, k: int) -> FiniteSetModel:
    return FiniteSetModel(
        n, math.comb(n, k), encode_natural(n) + encode_natural(k), "types", f"S_{n},{k}",
        lambda y, n=n, k=k: len(y) == n and y.count("1") == k,
        lambda n=n, k=k: _ranked_combinations(n, k),
    )


class TypeClassFamily(_WithFullSet):
    name = "types"
    description = "type classes S_{n,k} (k ones), code enc(n)·enc(k)"

    def _models(self, n):
        for k in range(n + 1):
            yield type_class_model(n, k)

    def _containing(self, x):
        yield type_class_model(len(x), x.count("1"))

    def _decode(self, code):
        n, u1 = decode_natural(code)
        k, u2 = decode_natural(code, u1)
        if u1 + u2 != len(code) or k > n:
            raise DecodeError("malformed type-class code", code)
        return type_class_model(n, k)


def parity_model(n: int, which: int, pattern: str) -> FiniteSetModel:
    """Strings whose positions of one parity equal ``pattern``.

    ``which = 0`` fixes positions 1, 3, 5, ... (1-based), ``which = 1`` fixes 2, 4, ...
    """
    fixed = list(range(which, n, 2))
    free = [i for i in range(n) if i % 2 != which]
    if len(pattern) != len(fixed):
        raise ValueError("pattern length does not match the fixed positions")

    def member(y, fixed=fixed, pattern=pattern, n=n):
        return len(y) == n and all(y[i] == b for i, b in zip(fixed, pattern))

    def enum(fixed=fixed, free=free, pattern=pattern, n=n):
        for v in range(1 << len(free)):
            y = [""] * n
            for i, b in zip(fixed, pattern):
                y[i] = b
            for i, b in zip(free, bits(v, len(free))):
                y[i] = b
            yield "".join(y)

    code = encode_natural(n) + str(which) + pattern
    s = FiniteSetModel(n, 1 << len(free), code, "parity", f"P{which}({pattern})", member, enum)
    return s


class ParityFamily(_WithFullSet):
    name = "parity"
    description = "one parity class of positions fixed, code enc(n)·b·pattern"

    def _models(self, n):
        for which in (0, 1):
            m = len(range(which, n, 2))
            for v in range(1 << m):
                yield parity_model(n, which, bits(v, m))

    def _containing(self, x):
        n = len(x)
        for which in (0, 1):
            yield parity_model(n, which, x[which::2])

    def _decode(self, code):
        n, used = decode_natural(code)
        which = int(code[used])
        pattern = code[used + 1:]
        return parity_model(n, which, pattern)


def hamming_model(center: str, r: int) -> FiniteSetModel:
    n = len(center)
    code = encode_natural(n) + encode_natural(r) + center
    return FiniteSetModel(
        n, _ball_size(n, r), code, "hamming", f"B({center},{r})",
        lambda y, c=center, r=r: len(y) == len(c) and _hamming(y, c) <= r,
        lambda c=center, r=r: iter(_neighbors(c, r)),
    )


class HammingFamily(_WithFullSet):
    """Hamming balls ``B(c, r)`` with ``r <= max_radius``, code ``enc(n) enc(r) c``."""

    name = "hamming"

    def __init__(self, max_radius: int = 2):
        self.max_radius = max_radius
        self.description = f"Hamming balls of radius <= {max_radius}, code enc(n)·enc(r)·center"

    def _models(self, n):
        for r in range(min(self.max_radius, n) + 1):
            for v in range(1 << n):
                yield hamming_model(bits(v, n), r)

    def _containing(self, x):
        for r in range(min(self.max_radius, len(x)) + 1):
            for c in _neighbors(x, r):
                yield hamming_model(c, r)

    def _decode(self, code):
        n, u1 = decode_natural(code)
        r, u2 = decode_natural(code, u1)
        center = code[u1 + u2:]
        if len(center) != n:
            raise DecodeError("malformed Hamming-ball code", code)
        return hamming_model(center, r)


def family_by_name(name: str, oracle: ComplexityOracle | None = None) -> ModelFamily:
    table = {
        "full": FullFamily,
        "singleton": lambda: SingletonFamily(oracle),
        "singletons": lambda: SingletonFamily(oracle),
        "masks": MaskFamily,
        "types": TypeClassFamily,
        "parity": ParityFamily,
        "hamming": HammingFamily,
    }
    try:
        return table[name]()
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(table)}") from None


FAMILY_NAMES = ("full", "singleton", "masks", "types", "parity", "hamming")


def all_families(oracle: ComplexityOracle | None = None) -> list[ModelFamily]:
    return [family_by_name(n, oracle) for n in FAMILY_NAMES]


# ad-hoc models outside the shipped families

def explicit_model(elements: Iterable[str]) -> FiniteSetModel:
    """Any set, coded as ``enc(n) enc(|S|-1)`` followed by its sorted elements."""
    elems = tuple(sorted(set(elements)))
    if not elems:
        raise ValueError("empty set")
    n = len(elems[0])
    if any(len(e) != n for e in elems):
        raise ValueError("elements differ in length")
    code = encode_natural(n) + encode_natural(len(elems) - 1) + "".join(elems)
    es = frozenset(elems)
    return FiniteSetModel(n, len(elems), code, "explicit", "{" + ",".join(elems) + "}",
                          lambda y, es=es: y in es, lambda elems=elems: iter(elems))


def submask_model(y: str) -> FiniteSetModel:
    """``S_y``: strings with 0s wherever ``y`` has 0s; code ``enc(n) y``."""
    n = len(y)
    ones = [i for i, b in enumerate(y) if b == "1"]

    def enum(ones=ones, n=n):
        for v in range(1 << len(ones)):
            z = ["0"] * n
            for i, b in zip(ones, bits(v, len(ones))):
                z[i] = b
            yield "".join(z)

    return FiniteSetModel(n, 1 << len(ones), encode_natural(n) + y, "submask", f"S_y({y})",
                          lambda z, y=y: len(z) == len(y) and all(a <= b for a, b in zip(z, y)),
                          lambda: iter(sorted(enum())))


# ---------------------------------------------------------------------------
# oracles used by the statistics

class TwoPartOracle:
    """Complexity surrogate that also credits two-part descriptions.

    ``K(x) = min(khat(x), min_{S ∋ x} model_cost(S) + ceil(log|S|))`` over the
    given families, and ``K(x | S) = min(khat(x | S), ceil(log|S|))``. Used for
    strings longer than the machine budget covers.
    """

    def __init__(self, vm: ComplexityOracle, families: Sequence[ModelFamily]):
        self.vm = vm
        self.families = list(families)
        self.machine = vm.machine
        self._cache: dict[str, int] = {}

    def khat(self, x: str) -> int:
        k = self._cache.get(x)
        if k is None:
            cands = [self.vm.khat(x)]
            for fam in self.families:
                for s in fam.containing(x):
                    cands.append(s.model_cost + ceil_log2(s.size))
            k = min(c for c in cands if c is not None)
            self._cache[x] = k
        return k

    def khat_given_set(self, x: str, s: FiniteSetModel) -> int:
        vm = self.vm.khat_cond_long(x, s.listing_length, s.listing)
        idx = ceil_log2(s.size)
        return idx if vm is None else min(vm, idx)


def set_conditional(oracle, x: str, s: FiniteSetModel) -> int:
    """``K(x | S)`` with ``S`` given as its canonical listing."""
    if hasattr(oracle, "khat_given_set"):
        return oracle.khat_given_set(x, s)
    k = oracle.khat_cond_long(x, s.listing_length, s.listing)
    if k is None:
        raise LookupError(f"K({x!r} | {s.label}) exceeds the machine budget")
    return k


# ---------------------------------------------------------------------------
# typicality, optimality, sufficiency

def randomness_deficiency(x: str, s: FiniteSetModel, oracle) -> float:
    """``log|S| - K(x|S)`` for ``x`` in ``S``, else ``+inf``. Not clamped."""
    if x not in s:
        return INF
    return s.log_size - set_conditional(oracle, x, s)


def is_typical(x: str, s: FiniteSetModel, beta: float, oracle) -> bool:
    return x in s and randomness_deficiency(x, s, oracle) <= beta


def two_part_length(s: FiniteSetModel) -> float:
    return s.model_cost + s.log_size


def is_optimal(x: str, s: FiniteSetModel, oracle, c: float) -> bool:
    if x not in s:
        return False
    k = oracle.khat(x)
    if k is None:
        raise LookupError(f"{x!r} outside the oracle table")
    return two_part_length(s) <= k + c


def _as_families(families) -> list[ModelFamily]:
    if isinstance(families, ModelFamily):
        return [families]
    return list(families)


def candidates(x: str, families) -> list[FiniteSetModel]:
    out = []
    for fam in _as_families(families):
        out.extend(fam.containing(x))
    return out


def minimal_sufficient_statistic(x: str, families, oracle, c: float) -> FiniteSetModel:
    """Least-cost optimal set; ties go to the earliest in enumeration order."""
    best = None
    best_two_part = INF
    for s in candidates(x, families):
        tp = two_part_length(s)
        best_two_part = min(best_two_part, tp)
        if is_optimal(x, s, oracle, c) and (best is None or s.model_cost < best.model_cost):
            best = s
    if best is None:
        raise NotFound(f"no optimal set for {x!r} at slack {c}", best_two_part)
    return best


# ---------------------------------------------------------------------------
# structure functions

@dataclass(frozen=True)
class StructureSample:
    R: int
    h: float
    lam: float
    beta: float
    h_witness: str | None
    lam_witness: str | None
    beta_witness: str | None


@dataclass
class StructureCurve:
    x: str
    samples: list[StructureSample]

    def h(self, R: int) -> float:
        return self._at(R).h

    def lam(self, R: int) -> float:
        return self._at(R).lam

    def beta(self, R: int) -> float:
        return self._at(R).beta

    def _at(self, R: int) -> StructureSample:
        if R < 0:
            return StructureSample(R, INF, INF, INF, None, None, None)
        if R >= len(self.samples):
            return self.samples[-1]
        return self.samples[R]


def structure_functions(x: str, families, oracle=None, r_max: int | None = None,
                        with_beta: bool = True) -> StructureCurve:
    """``h_x``, ``lambda_x`` and ``beta_x`` on the integer grid ``0..r_max``.

    ``r_max`` defaults to the largest model cost among sets containing ``x``.
    The minimum over an empty set of candidates is ``+inf``.
    """
    cands = candidates(x, families)
    rows = []
    for s in cands:
        d = randomness_deficiency(x, s, oracle) if with_beta else INF
        rows.append((s.model_cost, s.log_size, two_part_length(s), d, s.label))
    if r_max is None:
        r_max = max(r[0] for r in rows)
    rows.sort(key=lambda r: r[0])  # stable: keeps enumeration order among equal costs
    samples = []
    best_h = (INF, None)
    best_l = (INF, None)
    best_b = (INF, None)
    i = 0
    for R in range(r_max + 1):
        while i < len(rows) and rows[i][0] <= R:
            cost, lg, tp, d, label = rows[i]
            if lg < best_h[0]:
                best_h = (lg, label)
            if tp < best_l[0]:
                best_l = (tp, label)
            if d < best_b[0]:
                best_b = (d, label)
            i += 1
        samples.append(StructureSample(R, best_h[0], best_l[0], best_b[0], best_h[1], best_l[1], best_b[1]))
    return StructureCurve(x, samples)


def beta_identity_gaps(curve: StructureCurve, kx: float) -> dict[int, float]:
    """``beta(R) - (h(R) + R - K(x))`` wherever both sides are finite."""
    out = {}
    for s in curve.samples:
        if math.isfinite(s.beta) and math.isfinite(s.h):
            out[s.R] = s.beta - (s.h + s.R - kx)
    return out


def decode_overhead(family: ModelFamily, n: int) -> int:
    """A-priori bound ``c`` with ``lambda_x(R) >= khat(x) - c`` for every ``x`` of length ``n``.

    Every ``x`` has the one-EMIT program of ``n + literal_overhead(n)`` bits,
    and no model in the family has a two-part length below the family
    minimum; the difference is the constant.
    """
    low = min(two_part_length(s) for s in family.models(n))
    return math.ceil(n + literal_overhead(n) - low)


# ---------------------------------------------------------------------------
# set <-> probability models

def set_to_prob(s: FiniteSetModel) -> Dist:
    """Uniform distribution on ``S``."""
    return Dist.uniform(tuple(s.elements()))


def floor_log2_inv(p: Fraction) -> int:
    """``floor(log2(1/p))`` for ``0 < p <= 1``, exactly."""
    q = 1 / Fraction(p)
    a, b = q.numerator, q.denominator
    m = a.bit_length() - b.bit_length()
    if a < (b << m):
        m -= 1
    return m


def prob_to_set(f: Dist, x) -> FiniteSetModel:
    """``S = {y : f(y) > 2^(-m-1)}`` with ``m = floor(log 1/f(x))``; code ``enc(m)`` relative to ``f``."""
    p = f[x]
    if p == 0:
        raise ValueError(f"f({x!r}) = 0")
    m = floor_log2_inv(p)
    thr = Fraction(1, 1 << (m + 1))
    elems = tuple(y for y, q in f.items() if q > thr)
    es = frozenset(elems)
    n = len(x) if isinstance(x, str) else 0
    return FiniteSetModel(n, len(elems), encode_natural(m), "threshold", f"T_{m}",
                          lambda y, es=es: y in es, lambda elems=elems: iter(elems))
