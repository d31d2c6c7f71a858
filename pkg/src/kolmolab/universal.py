"""Universal codes: the binomial (type-class) code and two-part codes over
families of sequential binary sources."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .coding import (CodingError, DecodeError, Dist, ceil_log2_inv, decode_natural, encode_natural,
                     natural_length, shannon_fano)
from .measures import entropy

EXPLICIT_LIMIT = 16  # longest n for which codewords are built by full enumeration


def _check_bits(x: str) -> None:
    if set(x) - {"0", "1"}:
        raise CodingError("expected a string over {0,1}")


def ceil_log2(k: int) -> int:
    return (k - 1).bit_length() if k > 0 else 0


# ---------------------------------------------------------------------------
# binomial code

def _walk(n: int, zeros: int, choose):
    # c tracks C(rest, zeros - 1), the number of completions with a 0 at the current position
    c = math.comb(n - 1, zeros - 1) if n and zeros else 0
    for i in range(n):
        rest = n - i - 1
        b = choose(i, c)
        if rest:
            if b == "0":
                c = c * (zeros - 1) // rest
                zeros -= 1
            else:
                c = c * (rest - zeros + 1) // rest
        elif b == "0":
            zeros -= 1


def rank_in_class(x: str) -> int:
    """Lexicographic rank of ``x`` among strings of its length with the same number of zeros."""
    rank = 0

    def choose(i, c):
        nonlocal rank
        if x[i] == "1":
            rank += c
        return x[i]

    _walk(len(x), x.count("0"), choose)
    return rank


def unrank_in_class(n: int, zeros: int, rank: int) -> str:
    out = []
    left = zeros

    def choose(i, c):
        nonlocal rank, left
        if left > 0 and rank < c:
            left -= 1
            out.append("0")
        else:
            rank -= c
            out.append("1")
        return out[-1]

    _walk(n, zeros, choose)
    return "".join(out)


def binomial_encode(x: str) -> str:
    """``enc(n) enc(n0)`` followed by the ``ceil(log C(n, n0))``-bit rank of ``x`` in its type class."""
    _check_bits(x)
    n, n0 = len(x), x.count("0")
    width = ceil_log2(math.comb(n, n0))
    idx = format(rank_in_class(x), f"0{width}b") if width else ""
    return encode_natural(n) + encode_natural(n0) + idx


def binomial_length(x: str) -> int:
    n, n0 = len(x), x.count("0")
    return natural_length(n) + natural_length(n0) + ceil_log2(math.comb(n, n0))


def binomial_decode(bits: str, pos: int = 0) -> tuple[str, int]:
    """Decode one codeword at ``pos``; returns ``(x, bits consumed)``."""
    n, u1 = decode_natural(bits, pos)
    n0, u2 = decode_natural(bits, pos + u1)
    if n0 > n:
        raise DecodeError("zero count exceeds length", bits[pos:pos + u1 + u2])
    size = math.comb(n, n0)
    width = ceil_log2(size)
    start = pos + u1 + u2
    if start + width > len(bits):
        raise DecodeError("truncated index", bits[pos:])
    r = int(bits[start:start + width], 2) if width else 0
    if r >= size:
        raise DecodeError("index outside the type class", bits[pos:start + width])
    return unrank_in_class(n, n0, r), u1 + u2 + width


class BinomialCode:
    """The binomial code as a length/encode/decode object."""

    def length(self, x):
        if not isinstance(x, str) or set(x) - {"0", "1"}:
            return None
        return binomial_length(x)

    def encode(self, x):
        return binomial_encode(x)

    def decode(self, bits, pos=0):
        x, used = binomial_decode(bits, pos)
        return x, pos + used


class FixedLengthCode:
    """Identity code on strings of one length ``n``."""

    def __init__(self, n: int):
        self.n = n

    def length(self, x):
        return self.n if isinstance(x, str) and len(x) == self.n and not set(x) - {"0", "1"} else None

    def encode(self, x):
        if self.length(x) is None:
            raise CodingError(f"{x!r} not covered")
        return x

    def decode(self, bits, pos=0):
        if pos + self.n > len(bits):
            raise DecodeError("truncated", bits[pos:])
        return bits[pos:pos + self.n], pos + self.n


# ---------------------------------------------------------------------------
# sequential sources

class Source:
    name = "source"

    def prob(self, x: str) -> Fraction:
        raise NotImplementedError

    def codelength(self, x: str) -> int | None:
        p = self.prob(x)
        return None if p == 0 else ceil_log2_inv(p)

    def dist(self, n: int) -> Dist:
        xs = [format(v, f"0{n}b") if n else "" for v in range(1 << n)]
        return Dist(tuple(xs), tuple(self.prob(x) for x in xs))

    def sf_encode(self, x: str) -> str:
        if len(x) > EXPLICIT_LIMIT:
            raise CodingError(f"explicit Shannon-Fano codewords limited to n <= {EXPLICIT_LIMIT}")
        code = shannon_fano(Dist(*zip(*[(y, p) for y, p in self.dist(len(x)).items() if p > 0])))
        return code.encode(x)

    def sf_decode(self, bits: str, pos: int, n: int) -> tuple[str, int]:
        if n > EXPLICIT_LIMIT:
            raise CodingError(f"explicit Shannon-Fano codewords limited to n <= {EXPLICIT_LIMIT}")
        code = shannon_fano(Dist(*zip(*[(y, p) for y, p in self.dist(n).items() if p > 0])))
        return code.decode(bits, pos)

    def sample(self, n: int, rng) -> str:
        out = []
        for _ in range(n):
            p1 = self.next_prob("".join(out[-1:]))
            out.append("1" if rng.random() < float(p1) else "0")
        return "".join(out)

    def next_prob(self, last: str) -> Fraction:
        raise NotImplementedError


@dataclass(frozen=True)
class BernoulliSource(Source):
    theta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "theta", Fraction(self.theta))
        if not 0 <= self.theta <= 1:
            raise ValueError("theta outside [0, 1]")

    @property
    def name(self):
        return f"bernoulli({self.theta})"

    def prob(self, x: str) -> Fraction:
        k = x.count("1")
        return self.theta ** k * (1 - self.theta) ** (len(x) - k)

    def next_prob(self, last: str) -> Fraction:
        return self.theta

    def _classes(self, n: int):
        """Yield ``(ones, class size, numerator)`` in decreasing probability over a common
        denominator ``b^n``; the string probability is ``numerator / b^n``."""
        a, b = self.theta.numerator, self.theta.denominator
        c = b - a
        if a == 0 or c == 0:
            yield (0 if a == 0 else n), 1, b ** n
            return
        if a <= c:
            j, size, num = 0, 1, c ** n
            while j <= n:
                yield j, size, num
                size = size * (n - j) // (j + 1)
                num = num // c * a
                j += 1
        else:
            j, size, num = n, 1, a ** n
            while j >= 0:
                yield j, size, num
                size = size * j // (n - j + 1)
                num = num // a * c
                j -= 1

    @staticmethod
    def _len(num: int, den: int) -> int:
        # smallest l with num * 2^l >= den
        l = max(0, den.bit_length() - num.bit_length())
        while (num << l) < den:
            l += 1
        while l > 0 and (num << (l - 1)) >= den:
            l -= 1
        return l

    def sf_encode(self, x: str) -> str:
        """Shannon-Fano codeword via the class-ordered cumulative probability.

        Matches :func:`coding.shannon_fano` on the full distribution: classes
        have distinct probabilities unless ``theta = 1/2``, where the code is
        the identity.
        """
        n, k = len(x), x.count("1")
        if self.prob(x) == 0:
            raise CodingError("zero-probability string")
        if self.theta == Fraction(1, 2):
            return x
        den = self.theta.denominator ** n
        cum = 0
        for j, size, num in self._classes(n):
            if j == k:
                break
            cum += size * num
        cum += rank_in_class(x) * num
        length = self._len(num, den)
        v = (cum << length) // den
        return format(v, f"0{length}b") if length else ""

    def sf_decode(self, bits: str, pos: int, n: int) -> tuple[str, int]:
        if self.theta == Fraction(1, 2):
            if pos + n > len(bits):
                raise DecodeError("truncated", bits[pos:])
            return bits[pos:pos + n], pos + n
        den = self.theta.denominator ** n
        cum = 0
        for j, size, num in self._classes(n):
            length = self._len(num, den)
            if pos + length <= len(bits):
                v = int(bits[pos:pos + length], 2) if length else 0
                # least r with floor((cum + r num) 2^length / den) >= v
                need = v * den - (cum << length)
                step = num << length
                r = max(0, -(-need // step))
                if r < size and ((cum + r * num) << length) // den == v:
                    return unrank_in_class(n, n - j, r), pos + length
            cum += size * num
        raise DecodeError("no codeword matches", bits[pos:])


@dataclass(frozen=True)
class MarkovSource(Source):
    """Order-1 binary chain: ``P(x1 = 1) = first``, ``P(1 | 0) = p01``, ``P(1 | 1) = p11``."""

    first: Fraction
    p01: Fraction
    p11: Fraction

    def __post_init__(self):
        for f in ("first", "p01", "p11"):
            v = Fraction(getattr(self, f))
            if not 0 <= v <= 1:
                raise ValueError(f"{f} outside [0, 1]")
            object.__setattr__(self, f, v)

    @property
    def name(self):
        return f"markov1({self.first},{self.p01},{self.p11})"

    def next_prob(self, last: str) -> Fraction:
        if last == "":
            return self.first
        return self.p11 if last == "1" else self.p01

    def prob(self, x: str) -> Fraction:
        p = Fraction(1)
        last = ""
        for b in x:
            q = self.next_prob(last)
            p *= q if b == "1" else 1 - q
            if p == 0:
                return p
            last = b
        return p


@dataclass
class SourceFamily:
    sources: list

    def __len__(self):
        return len(self.sources)

    def __getitem__(self, k: int) -> Source:
        """1-based access, matching the index code."""
        if not 1 <= k <= len(self.sources):
            raise IndexError(k)
        return self.sources[k - 1]

    def check_compatibility(self, n: int) -> bool:
        """``sum_b f(x b) = f(x)`` for every source and every ``x`` of length ``< n``."""
        for src in self.sources:
            for m in range(n):
                for v in range(1 << m):
                    x = format(v, f"0{m}b") if m else ""
                    if src.prob(x + "0") + src.prob(x + "1") != src.prob(x):
                        return False
        return True


def bernoulli_grid(denominator: int = 10, include_ends: bool = False) -> SourceFamily:
    lo, hi = (0, denominator) if include_ends else (1, denominator - 1)
    return SourceFamily([BernoulliSource(Fraction(j, denominator)) for j in range(lo, hi + 1)])


def parse_family(text: str) -> SourceFamily:
    """Lines ``bernoulli p`` or ``markov1 first p01 p11`` with rational parameters; ``#`` starts a comment."""
    sources = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "bernoulli" and len(parts) == 2:
                sources.append(BernoulliSource(Fraction(parts[1])))
            elif parts[0] == "markov1" and len(parts) == 4:
                sources.append(MarkovSource(*(Fraction(p) for p in parts[1:])))
            else:
                raise ValueError(f"unrecognised source {line!r}")
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not sources:
        raise ValueError("family file lists no sources")
    return SourceFamily(sources)


# ---------------------------------------------------------------------------
# two-part universal code

@dataclass(frozen=True)
class UniversalResult:
    k: int
    length: int
    per_source: tuple  # L_k(x) or None, k = 1..K


def universal_two_part(family: SourceFamily, x: str) -> UniversalResult:
    """``k*`` minimising ``L_k(x) + |enc(k)|``; the length includes ``|enc(n)|``."""
    _check_bits(x)
    lengths = tuple(src.codelength(x) for src in family.sources)
    best = None
    for k, lk in enumerate(lengths, 1):
        if lk is None:
            continue
        total = lk + natural_length(k)
        if best is None or total < best[1]:
            best = (k, total)
    if best is None:
        raise CodingError("string has probability zero under every source")
    return UniversalResult(best[0], best[1] + natural_length(len(x)), lengths)


def universal_encode(family: SourceFamily, x: str) -> str:
    res = universal_two_part(family, x)
    bits = encode_natural(len(x)) + encode_natural(res.k) + family[res.k].sf_encode(x)
    assert len(bits) == res.length
    return bits


def universal_decode(family: SourceFamily, bits: str, pos: int = 0) -> tuple[str, int]:
    n, u1 = decode_natural(bits, pos)
    k, u2 = decode_natural(bits, pos + u1)
    if not 1 <= k <= len(family):
        raise DecodeError(f"source index {k} outside the family", bits[pos:pos + u1 + u2])
    x, end = family[k].sf_decode(bits, pos + u1 + u2, n)
    return x, end - pos


def per_string_bound_holds(family: SourceFamily, x: str) -> bool:
    """``L~(x) <= L_k(x) + |enc(k)| + |enc(n)|`` for every ``k`` with ``f_k(x) > 0``."""
    res = universal_two_part(family, x)
    n_cost = natural_length(len(x))
    return all(res.length <= lk + natural_length(k) + n_cost
               for k, lk in enumerate(res.per_source, 1) if lk is not None)


@dataclass
class UCodeRow:
    x: str
    length: int
    best_k: int
    min_lk: int
    redundancy: int
    bound_holds: bool
    binomial: int


@dataclass
class UCodeReport:
    rows: list
    expected: dict = field(default_factory=dict)  # (k, n) -> (H, E L~, upper)

    @property
    def total_redundancy(self) -> int:
        return sum(r.redundancy for r in self.rows)


def redundancy_report(family: SourceFamily, corpus: Sequence[str], expected_n: Iterable[int] = ()) -> UCodeReport:
    """Per-string redundancy ``L~ - min_k L_k`` and, for each ``n`` given, the
    expected-length sandwich ``H <= E L~ <= H + |enc(k)| + |enc(n)| + 1`` under every source."""
    if not corpus:
        raise ValueError("empty corpus")
    rows = []
    for x in corpus:
        res = universal_two_part(family, x)
        finite = [lk for lk in res.per_source if lk is not None]
        m = min(finite)
        rows.append(UCodeRow(x, res.length, res.k, m, res.length - m, per_string_bound_holds(family, x), binomial_length(x)))
    rep = UCodeReport(rows)
    for n in expected_n:
        xs = [format(v, f"0{n}b") if n else "" for v in range(1 << n)]
        lt = {x: universal_two_part(family, x).length for x in xs if any(s.prob(x) for s in family.sources)}
        for k, src in enumerate(family.sources, 1):
            d = src.dist(n)
            h = entropy(d)
            el = math.fsum(float(p) * lt[x] for x, p in d.items() if p > 0)
            rep.expected[(k, n)] = (h, el, h + natural_length(k) + natural_length(n) + 1)
    return rep


# ---------------------------------------------------------------------------
# bitstream files

def pack_bits(bits: str) -> bytes:
    """4-byte little-endian bit count followed by the bits, MSB first, zero padded."""
    _check_bits(bits)
    n = len(bits)
    padded = bits + "0" * (-n % 8)
    body = int(padded, 2).to_bytes(len(padded) // 8, "big") if padded else b""
    return struct.pack("<I", n) + body


def unpack_bits(data: bytes) -> str:
    if len(data) < 4:
        raise DecodeError("missing length header")
    (n,) = struct.unpack("<I", data[:4])
    body = data[4:]
    if len(body) * 8 < n:
        raise DecodeError("bitstream shorter than its header")
    s = format(int.from_bytes(body, "big"), f"0{len(body) * 8}b") if body else ""
    return s[:n]
