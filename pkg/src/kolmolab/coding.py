"""Prefix codes: Kraft inequality, canonical construction, Shannon-Fano,
the standard self-delimiting code for naturals and two-part codes.

All probabilities are exact :class:`fractions.Fraction` values. Code word
lengths are compared against probabilities with integer arithmetic only,
so dyadic boundaries are never blurred by floating point.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Protocol, Sequence


class CodingError(ValueError):
    """Raised for invalid code constructions."""


class DecodeError(ValueError):
    """Raised when a bit stream does not start with a valid code word.

    ``consumed`` holds the prefix that was read before failing.
    """

    def __init__(self, message: str, consumed: str = ""):
        super().__init__(f"{message} (consumed {consumed!r})")
        self.consumed = consumed


# ---------------------------------------------------------------------------
# strings <-> naturals

def nat_to_str(n: int) -> str:
    """Map a natural to a binary string: 0 -> '', 1 -> '0', 2 -> '1', 3 -> '00', ..."""
    if n < 0:
        raise ValueError(f"negative natural {n}")
    return bin(n + 1)[3:]


def str_to_nat(s: str) -> int:
    """Inverse of :func:`nat_to_str`."""
    return int("1" + s, 2) - 1


def ceil_log2_inv(p: Fraction) -> int:
    """Smallest integer ``l >= 0`` with ``2**-l <= p``, i.e. ``ceil(log2(1/p))``."""
    if p <= 0 or p > 1:
        raise ValueError(f"probability out of (0, 1]: {p}")
    num, den = p.numerator, p.denominator
    # smallest l with num * 2**l >= den
    l = max(den.bit_length() - num.bit_length(), 0)
    while (num << l) < den:
        l += 1
    while l > 0 and (num << (l - 1)) >= den:
        l -= 1
    return l


def is_dyadic(p: Fraction) -> bool:
    """True iff ``p == 2**-k`` for some integer ``k >= 0``."""
    return p > 0 and p.numerator == 1 and (p.denominator & (p.denominator - 1)) == 0


# ---------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class Dist:
    """Finite probability mass function with exact rational weights."""

    outcomes: tuple
    probs: tuple

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        probs = tuple(Fraction(p) for p in self.probs)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)
        if not outcomes:
            raise ValueError("empty support")
        if len(outcomes) != len(probs):
            raise ValueError("outcomes and probs differ in length")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("duplicate outcomes")
        if any(p < 0 for p in probs):
            raise ValueError("negative probability")
        total = sum(probs, Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "_index", {o: i for i, o in enumerate(outcomes)})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "Dist":
        pairs = list(pairs)
        return cls(tuple(o for o, _ in pairs), tuple(p for _, p in pairs))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "Dist":
        return cls(tuple(mapping), tuple(mapping.values()))

    @classmethod
    def uniform(cls, outcomes: Sequence) -> "Dist":
        outcomes = tuple(outcomes)
        return cls(outcomes, (Fraction(1, len(outcomes)),) * len(outcomes))

    def __len__(self) -> int:
        return len(self.outcomes)

    def __getitem__(self, outcome) -> Fraction:
        i = self._index.get(outcome)
        return Fraction(0) if i is None else self.probs[i]

    def items(self):
        return zip(self.outcomes, self.probs)

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.probs))

    @property
    def support(self) -> tuple:
        return tuple(o for o, p in self.items() if p > 0)

    def is_dyadic(self) -> bool:
        return all(is_dyadic(p) for p in self.probs if p > 0)


# ---------------------------------------------------------------------------
# Kraft

class KraftStatus(enum.Enum):
    VIOLATES = "Violates"
    SATISFIES = "Satisfies"
    COMPLETE = "Complete"


@dataclass(frozen=True)
class KraftResult:
    sum: Fraction
    status: KraftStatus


def _lengths(lengths: Iterable[int]) -> list[int]:
    ls = [int(l) for l in lengths]
    if not ls:
        raise CodingError("no lengths")
    bad = [l for l in ls if l < 1]
    if bad:
        raise CodingError(f"code word lengths must be >= 1, got {bad}")
    return ls


def kraft_sum(lengths: Iterable[int]) -> Fraction:
    return sum((Fraction(1, 1 << l) for l in lengths), Fraction(0))


def kraft_check(lengths: Iterable[int]) -> KraftResult:
    """Exact Kraft sum of a length multiset and its classification.

    Examples
    --------
    >>> kraft_check([1, 2, 3, 3]).status
    <KraftStatus.COMPLETE: 'Complete'>
    >>> kraft_check([1, 1, 1]).sum
    Fraction(3, 2)
    """
    s = kraft_sum(_lengths(lengths))
    if s > 1:
        status = KraftStatus.VIOLATES
    elif s == 1:
        status = KraftStatus.COMPLETE
    else:
        status = KraftStatus.SATISFIES
    return KraftResult(s, status)


# ---------------------------------------------------------------------------
# prefix codes

def is_prefix_free(words: Iterable[str]) -> bool:
    """Pairwise prefix-freeness via one sorted pass.

    In lexicographic order a word that is a prefix of another sorts
    directly before some extension of itself, so adjacent pairs suffice.
    """
    ws = sorted(words)
    for a, b in zip(ws, ws[1:]):
        if b.startswith(a):
            return False
    return True


class LengthCode(Protocol):
    """Anything usable as a member of a two-part code family."""

    def length(self, symbol) -> int | None: ...

    def encode(self, symbol) -> str: ...

    def decode(self, bits: str, pos: int = 0) -> tuple[Hashable, int]: ...


@dataclass(frozen=True)
class PrefixCode:
    """Code word table over an explicit alphabet, checked prefix-free on creation."""

    alphabet: tuple
    codewords: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "codewords", tuple(self.codewords))
        if len(self.alphabet) != len(self.codewords):
            raise CodingError("alphabet and code words differ in length")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise CodingError("duplicate symbols")
        if any(set(w) - {"0", "1"} for w in self.codewords):
            raise CodingError("code words must be ASCII '0'/'1' strings")
        if len(set(self.codewords)) != len(self.codewords) or not is_prefix_free(self.codewords):
            raise CodingError("code word set is not prefix-free")
        object.__setattr__(self, "_enc", dict(zip(self.alphabet, self.codewords)))
        object.__setattr__(self, "_dec", dict(zip(self.codewords, self.alphabet)))

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(w) for w in self.codewords)

    @property
    def kraft_sum(self) -> Fraction:
        return kraft_sum(self.lengths)

    def as_dict(self) -> dict:
        return dict(self._enc)

    def length(self, symbol) -> int | None:
        w = self._enc.get(symbol)
        return None if w is None else len(w)

    def encode(self, symbol) -> str:
        try:
            return self._enc[symbol]
        except KeyError:
            raise CodingError(f"symbol {symbol!r} has no code word") from None

    def encode_sequence(self, symbols: Iterable) -> str:
        return "".join(self.encode(s) for s in symbols)

    def decode(self, bits: str, pos: int = 0) -> tuple:
        """Decode one code word starting at ``pos``; return ``(symbol, new_pos)``."""
        maxlen = max(self.lengths)
        end = pos
        while end <= len(bits) and end - pos <= maxlen:
            sym = self._dec.get(bits[pos:end], _MISSING)
            if sym is not _MISSING:
                return sym, end
            end += 1
        raise DecodeError("no code word matches", bits[pos:end])

    def decode_stream(self, bits: str) -> list:
        out, pos = [], 0
        while pos < len(bits):
            sym, pos = self.decode(bits, pos)
            out.append(sym)
        return out

    def expected_length(self, dist: Dist) -> Fraction:
        return sum((p * len(self.encode(o)) for o, p in dist.items() if p > 0), Fraction(0))


_MISSING = object()


def code_from_lengths(lengths: Sequence[int], alphabet: Sequence | None = None) -> PrefixCode:
    """Canonical prefix code with the given lengths.

    Lengths are scanned in ascending order (stable in input order) and each
    receives the lexicographically least code word still available.
    Code words are returned aligned with ``alphabet`` (default ``0..k-1``).
    """
    ls = _lengths(lengths)
    res = kraft_check(ls)
    if res.status is KraftStatus.VIOLATES:
        raise CodingError(f"Kraft inequality violated: sum = {res.sum}")
    if alphabet is None:
        alphabet = range(len(ls))
    alphabet = tuple(alphabet)
    if len(alphabet) != len(ls):
        raise CodingError("alphabet and lengths differ in length")
    words = [""] * len(ls)
    code, prev = 0, 0
    for i in sorted(range(len(ls)), key=lambda i: ls[i]):
        code <<= ls[i] - prev
        prev = ls[i]
        words[i] = format(code, f"0{prev}b")
        code += 1
    return PrefixCode(alphabet, tuple(words))


def shannon_fano(dist: Dist) -> PrefixCode:
    """Shannon-Fano code: truncate the cumulative probability of each symbol.

    Symbols are ordered by decreasing probability (ties in input order);
    symbol ``r`` gets the first ``ceil(log 1/p_r)`` bits of the binary
    expansion of ``P_r = p_1 + ... + p_{r-1}``.
    """
    if any(p == 0 for p in dist.probs):
        raise CodingError("zero-probability symbol has no Shannon-Fano code word")
    order = sorted(range(len(dist)), key=lambda i: -dist.probs[i])
    words = [""] * len(dist)
    cum = Fraction(0)
    for i in order:
        p = dist.probs[i]
        l = ceil_log2_inv(p)
        if l:
            words[i] = format((cum.numerator << l) // cum.denominator, f"0{l}b")
        cum += p
    return PrefixCode(dist.outcomes, tuple(words))


def shannon_fano_lengths(dist: Dist) -> tuple[int, ...]:
    return tuple(ceil_log2_inv(p) for p in dist.probs)


# ---------------------------------------------------------------------------
# standard prefix code for the naturals

def bar(s: str) -> str:
    """Doubling code: ``1^{l(s)} 0 s``."""
    return "1" * len(s) + "0" + s


def encode_natural(n: int) -> str:
    """Standard self-delimiting code ``x' = bar(l(x)) x`` with ``x`` the string of ``n``.

    >>> encode_natural(0), encode_natural(5)
    ('0', '10110')
    """
    x = nat_to_str(n)
    return bar(nat_to_str(len(x))) + x


def natural_length(n: int) -> int:
    """``len(encode_natural(n))`` without building the string."""
    lx = (n + 1).bit_length() - 1
    return lx + 2 * ((lx + 1).bit_length() - 1) + 1


def decode_natural(bits: str, pos: int = 0) -> tuple[int, int]:
    """Read one code word at ``pos``; return ``(n, consumed_bits)``."""
    i = pos
    while i < len(bits) and bits[i] == "1":
        i += 1
    if i >= len(bits):
        raise DecodeError("stream ended inside the unary length prefix", bits[pos:])
    if bits[i] != "0":
        raise DecodeError(f"unexpected symbol {bits[i]!r}", bits[pos:i + 1])
    k = i - pos
    i += 1
    lx_end = i + k
    if lx_end > len(bits):
        raise DecodeError("stream ended inside the length field", bits[pos:])
    lx = str_to_nat(bits[i:lx_end])
    end = lx_end + lx
    if end > len(bits):
        raise DecodeError("stream ended inside the payload", bits[pos:])
    payload = bits[lx_end:end]
    if set(payload) - {"0", "1"}:
        raise DecodeError("non-binary payload", bits[pos:end])
    return str_to_nat(payload), end - pos


def encode_string(x: str) -> str:
    """Self-delimiting encoding of a binary string (its natural's standard code)."""
    return encode_natural(str_to_nat(x))


def decode_string(bits: str, pos: int = 0) -> tuple[str, int]:
    n, used = decode_natural(bits, pos)
    return nat_to_str(n), used


# ---------------------------------------------------------------------------
# two-part codes

@dataclass(frozen=True)
class TwoPartCodeword:
    index: int
    bits: str

    @property
    def length(self) -> int:
        return len(self.bits)


def two_part_lengths(family: Sequence[LengthCode], x) -> list[int | None]:
    """Total two-part length through each family member (``None`` when not covered)."""
    out = []
    for k, code in enumerate(family, start=1):
        l = code.length(x)
        out.append(None if l is None else natural_length(k) + l)
    return out


def two_part_encode(family: Sequence[LengthCode], x) -> TwoPartCodeword:
    """Encode ``x`` as ``encode_natural(k*) . E_k*(x)`` with ``k*`` minimizing the total.

    Members are indexed from 1; ties go to the least index.
    """
    totals = two_part_lengths(family, x)
    best = None
    for k, t in enumerate(totals, start=1):
        if t is not None and (best is None or t < totals[best - 1]):
            best = k
    if best is None:
        raise CodingError(f"no code in the family covers {x!r}")
    return TwoPartCodeword(best, encode_natural(best) + family[best - 1].encode(x))


def two_part_decode(family: Sequence[LengthCode], bits: str, pos: int = 0) -> tuple:
    k, used = decode_natural(bits, pos)
    if not 1 <= k <= len(family):
        raise DecodeError(f"family index {k} out of range", bits[pos:pos + used])
    return family[k - 1].decode(bits, pos + used)
