"""Plain-text file formats: distributions, joints, code dumps and RD instances.

Probabilities are exact rationals written ``p/q`` (an integer or decimal such
as ``0.25`` is also accepted and read exactly). Fields are tab separated;
blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, TextIO

from .coding import Dist, PrefixCode
from .measures import JointDist


class FormatError(ValueError):
    pass


def _rows(text: str, width: int | None = None, min_width: int | None = None):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if width is not None and len(fields) != width:
            raise FormatError(f"line {lineno}: expected {width} tab-separated fields, got {len(fields)}")
        if min_width is not None and len(fields) < min_width:
            raise FormatError(f"line {lineno}: expected at least {min_width} fields")
        yield lineno, fields


def parse_rational(token: str, lineno: int = 0) -> Fraction:
    try:
        return Fraction(token.strip())
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"line {lineno}: {token!r} is not a rational number") from None


def format_rational(p: Fraction) -> str:
    p = Fraction(p)
    return f"{p.numerator}/{p.denominator}"


def read_dist(text: str) -> Dist:
    """``symbol<TAB>p/q`` lines."""
    pairs = []
    for lineno, (sym, p) in _rows(text, 2):
        pairs.append((sym, parse_rational(p, lineno)))
    if not pairs:
        raise FormatError("no entries")
    try:
        return Dist.from_pairs(pairs)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_dist(d: Dist, fh: TextIO) -> None:
    for o, p in d.items():
        fh.write(f"{o}\t{format_rational(p)}\n")


def read_joint(text: str) -> JointDist:
    """``x<TAB>y<TAB>p/q`` lines; alphabets in order of first appearance."""
    xs, ys, mass = {}, {}, {}
    for lineno, (x, y, p) in _rows(text, 3):
        xs.setdefault(x, None)
        ys.setdefault(y, None)
        if (x, y) in mass:
            raise FormatError(f"line {lineno}: duplicate pair {(x, y)!r}")
        mass[(x, y)] = parse_rational(p, lineno)
    if not mass:
        raise FormatError("no entries")
    try:
        return JointDist(tuple(xs), tuple(ys), mass)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_joint(j: JointDist, fh: TextIO) -> None:
    for x in j.x_alphabet:
        for y in j.y_alphabet:
            if j[(x, y)]:
                fh.write(f"{x}\t{y}\t{format_rational(j[(x, y)])}\n")


def read_code(text: str) -> PrefixCode:
    """``symbol<TAB>bitstring`` lines."""
    syms, words = [], []
    for _, (sym, w) in _rows(text, 2):
        syms.append(sym)
        words.append(w)
    return PrefixCode(tuple(syms), tuple(words))


def write_code(code: PrefixCode, fh: TextIO) -> None:
    for s, w in zip(code.alphabet, code.codewords):
        fh.write(f"{s}\t{w}\n")


def read_lengths(text: str) -> list[int]:
    out = []
    for tok in text.split():
        try:
            out.append(int(tok))
        except ValueError:
            raise FormatError(f"{tok!r} is not an integer length") from None
    return out


def read_rd_instance(text: str):
    """RD instance file.

    ``source<TAB>symbol<TAB>p/q`` lines give the source, one
    ``codewords<TAB>y1<TAB>y2...`` line the reproduction alphabet, and
    ``d<TAB>x<TAB>v1<TAB>v2...`` lines the distortion row of each source
    symbol (rationals or ``inf``).
    """
    from .ratedist import RDInstance

    src, cws, rows = [], None, {}
    for lineno, fields in _rows(text, min_width=2):
        tag = fields[0]
        if tag == "source":
            if len(fields) != 3:
                raise FormatError(f"line {lineno}: source lines have 3 fields")
            src.append((fields[1], parse_rational(fields[2], lineno)))
        elif tag == "codewords":
            if cws is not None:
                raise FormatError(f"line {lineno}: second codewords line")
            cws = tuple(fields[1:])
        elif tag == "d":
            if cws is None:
                raise FormatError(f"line {lineno}: distortion row before the codewords line")
            vals = fields[2:]
            if len(vals) != len(cws):
                raise FormatError(f"line {lineno}: expected {len(cws)} distortions")
            rows[fields[1]] = [math.inf if v.strip() == "inf" else parse_rational(v, lineno) for v in vals]
        else:
            raise FormatError(f"line {lineno}: unknown tag {tag!r}")
    if not src or cws is None:
        raise FormatError("instance needs source lines and a codewords line")
    try:
        source = Dist.from_pairs(src)
        d = {}
        for x in source.outcomes:
            if x not in rows:
                raise FormatError(f"no distortion row for {x!r}")
            for y, v in zip(cws, rows[x]):
                d[(x, y)] = v
        return RDInstance(source, cws, d)
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_rd_instance(inst, fh: TextIO) -> None:
    for x, p in inst.source.items():
        fh.write(f"source\t{x}\t{format_rational(p)}\n")
    fh.write("codewords\t" + "\t".join(map(str, inst.codewords)) + "\n")
    for x in inst.source.outcomes:
        vals = ["inf" if inst.d[(x, y)] == math.inf else format_rational(inst.d[(x, y)]) for y in inst.codewords]
        fh.write(f"d\t{x}\t" + "\t".join(vals) + "\n")


def read_corpus(text: str) -> list[str]:
    """One bit string per line; ``-`` stands for the empty string."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        s = "" if s == "-" else s
        if set(s) - {"0", "1"}:
            raise FormatError(f"line {lineno}: not a bit string")
        out.append(s)
    return out


def fmt(v) -> str:
    """Fixed 9-decimal rendering used by every numeric CLI output."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    f = float(v)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    if math.isnan(f):
        return "nan"
    s = f"{f:.9f}"
    return "0.000000000" if s == "-0.000000000" else s


def csv_lines(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in r))
    return "\n".join(lines) + "\n"
