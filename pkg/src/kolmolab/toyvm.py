"""A small resource-bounded prefix machine and its exhaustive complexity oracle.

Programs are bit strings read left to right. Opcodes are unary-prefixed::

    0      END        close the current block; at top level this halts
    10     EMIT       operand enc(k-1), then k literal bits are appended
    110    COPY       append the condition string
    1110   REPEAT     operand enc(c), then a block run c+2 times
    1111   EXEC       run the condition as a program (empty condition) and
                      append its output; diverges if that run does not halt

``enc`` is the self-delimiting natural-number code from :mod:`kolmolab.coding`.
The grammar is self-delimiting, so the set of programs whose parse ends
exactly at the last bit is prefix-free.

Cost model: every executed instruction (END included) costs one step, every
bit written by EMIT or COPY costs one step, and EXEC additionally costs the
steps of the sub-run.
"""
from __future__ import annotations

import enum
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .coding import DecodeError, decode_natural, encode_natural, natural_length

VERSION = "kvm-1"
MAX_LMAX = 26

OP_END = "0"
OP_EMIT = "10"
OP_COPY = "110"
OP_REPEAT = "1110"
OP_EXEC = "1111"

# template placeholders
COPY = 0
EXEC = 1

COPY_PROGRAM = OP_COPY + OP_END
EXEC_PROGRAM = OP_EXEC + OP_END


class OracleError(ValueError):
    pass


class Status(enum.Enum):
    HALT = "Halt"
    OUT_OF_TIME = "OutOfTime"
    READ_PAST_END = "ReadPastEnd"
    # parse finished before the last bit; the machine never reads the rest
    TRAILING = "Trailing"


@dataclass(frozen=True)
class Outcome:
    status: Status
    output: str | None = None
    steps: int = 0
    consumed: int = 0

    @property
    def halted(self) -> bool:
        return self.status is Status.HALT


@dataclass(frozen=True)
class ToyMachine:
    lmax: int = 20
    steps: int = 1000
    version: str = VERSION

    def __post_init__(self):
        if self.steps < 1:
            raise OracleError("step budget must be positive")
        if self.lmax < 1:
            raise OracleError("L_max must be positive")


# ---------------------------------------------------------------------------
# parsing and direct execution

class _ReadPastEnd(Exception):
    pass


def _parse_block(bits: str, pos: int) -> tuple[list, int]:
    nodes = []
    n = len(bits)
    while True:
        # unary opcode, at most four bits
        ones = 0
        while ones < 4:
            if pos >= n:
                raise _ReadPastEnd
            if bits[pos] == "0":
                pos += 1
                break
            ones += 1
            pos += 1
        if ones == 0:
            return nodes, pos
        if ones == 1:
            try:
                k1, pos = _read_nat(bits, pos)
            except DecodeError:
                raise _ReadPastEnd from None
            k = k1 + 1
            if pos + k > n:
                raise _ReadPastEnd
            nodes.append(("emit", bits[pos:pos + k]))
            pos += k
        elif ones == 2:
            nodes.append(("copy",))
        elif ones == 3:
            try:
                c, pos = _read_nat(bits, pos)
            except DecodeError:
                raise _ReadPastEnd from None
            body, pos = _parse_block(bits, pos)
            nodes.append(("rep", c + 2, body))
        else:
            nodes.append(("exec",))


def _read_nat(bits: str, pos: int) -> tuple[int, int]:
    value, used = decode_natural(bits, pos)
    return value, pos + used


def parse(program: str) -> tuple[list, int]:
    """Parse a program into a node list; returns ``(nodes, bits consumed)``."""
    try:
        return _parse_block(program, 0)
    except _ReadPastEnd:
        raise DecodeError("program ends inside an instruction", program) from None


class _Timeout(Exception):
    pass


def _exec_block(nodes, cond: str, budget: int, out: list, used: list) -> None:
    for node in nodes:
        kind = node[0]
        used[0] += 1
        if kind == "emit":
            used[0] += len(node[1])
            out.append(node[1])
        elif kind == "copy":
            used[0] += len(cond)
            out.append(cond)
        elif kind == "rep":
            for _ in range(node[1]):
                _exec_block(node[2], cond, budget, out, used)
                if used[0] > budget:
                    raise _Timeout
        else:
            if used[0] >= budget:
                raise _Timeout
            sub = run(cond, "", budget - used[0])
            if not sub.halted:
                raise _Timeout
            used[0] += sub.steps
            out.append(sub.output)
        if used[0] > budget:
            raise _Timeout
    used[0] += 1  # END
    if used[0] > budget:
        raise _Timeout


def run(program: str, condition: str = "", steps: int = 1000) -> Outcome:
    """Run ``program`` with ``condition`` on the auxiliary tape for at most ``steps`` steps.

    The empty program reads past its end.
    """
    if steps < 1:
        raise OracleError("step budget must be positive")
    try:
        nodes, consumed = _parse_block(program, 0)
    except _ReadPastEnd:
        return Outcome(Status.READ_PAST_END, consumed=len(program))
    if consumed != len(program):
        return Outcome(Status.TRAILING, consumed=consumed)
    out: list[str] = []
    used = [0]
    try:
        _exec_block(nodes, condition, steps, out, used)
    except _Timeout:
        return Outcome(Status.OUT_OF_TIME, consumed=consumed, steps=steps)
    return Outcome(Status.HALT, "".join(out), used[0], consumed)


# ---------------------------------------------------------------------------
# enumeration by templates

@dataclass(frozen=True)
class Template:
    """Output shape of a program: literals interleaved with COPY/EXEC slots.

    For condition ``c`` with EXEC value ``u`` costing ``t`` steps, the program
    halts iff ``base + ncopy*len(c) + nexec*t <= T``.
    """

    parts: tuple
    base: int
    ncopy: int
    nexec: int

    @property
    def literal_len(self) -> int:
        return sum(len(p) for p in self.parts if isinstance(p, str))

    def fill(self, cond: str, exec_out: str | None) -> str:
        return "".join(p if isinstance(p, str) else (cond if p == COPY else exec_out) for p in self.parts)


def _concat(a: tuple, b: tuple) -> tuple:
    if a and b and isinstance(a[-1], str) and isinstance(b[0], str):
        return a[:-1] + (a[-1] + b[0],) + b[1:]
    return a + b


def _enumerate(lmax: int, budget: int) -> list[tuple[str, Template]]:
    """Every grammar-complete program of length <= lmax with literal cost <= budget."""
    # seqs[l]: blocks (instr* END) of exact length l
    seqs: list[list] = [[] for _ in range(lmax + 1)]
    instrs: list[list] = [[] for _ in range(lmax + 1)]
    for length in range(1, lmax + 1):
        ins = instrs[length]
        for k in range(1, length):
            head = OP_EMIT + encode_natural(k - 1)
            if len(head) + k == length:
                for v in range(1 << k):
                    lit = format(v, f"0{k}b")
                    ins.append((head + lit, (lit,), 1 + k, 0, 0))
        if length == len(OP_COPY):
            ins.append((OP_COPY, (COPY,), 1, 1, 0))
        if length == len(OP_EXEC):
            ins.append((OP_EXEC, (EXEC,), 1, 0, 1))
        c = 0
        while len(OP_REPEAT) + natural_length(c) < length:
            head = OP_REPEAT + encode_natural(c)
            reps = c + 2
            for bits, parts, base, nc, ne in seqs[length - len(head)]:
                cost = 1 + reps * base
                if cost > budget:
                    continue
                expanded: tuple = ()
                for _ in range(reps):
                    expanded = _concat(expanded, parts)
                ins.append((head + bits, expanded, cost, reps * nc, reps * ne))
            c += 1
        out = seqs[length]
        if length == 1:
            out.append((OP_END, (), 1, 0, 0))
        for il in range(1, length):
            for ib, ip, ic, inc, ine in instrs[il]:
                for sb, sp, sc, snc, sne in seqs[length - il]:
                    cost = ic + sc
                    if cost <= budget:
                        out.append((ib + sb, _concat(ip, sp), cost, inc + snc, ine + sne))
    programs = []
    for length in range(1, lmax + 1):
        for bits, parts, base, nc, ne in seqs[length]:
            programs.append((bits, Template(parts, base, nc, ne)))
    return programs


@dataclass
class Entry:
    """Per-output aggregate: shortest length, first shortest program, mass numerator."""

    khat: int
    program: str
    mass: int  # in units of 2**-lmax

    def absorb(self, program: str, mass: int) -> None:
        key = (len(program), program)
        if key < (self.khat, self.program):
            self.khat, self.program = key
        self.mass += mass


def _add(table: dict, x: str, program: str, unit: int) -> None:
    e = table.get(x)
    if e is None:
        table[x] = Entry(len(program), program, unit)
    else:
        e.absorb(program, unit)


@dataclass
class _Group:
    template: Template
    khat: int
    program: str
    mass: int
    programs: list = field(default_factory=list)


def check_budget(lmax: int) -> None:
    if lmax > MAX_LMAX:
        raise OracleError(f"L_max={lmax} exceeds the enumeration limit {MAX_LMAX}")


class ComplexityOracle:
    """Exhaustively enumerated surrogate for K, K(.|.) and the universal distribution.

    Condition-free programs are aggregated once; programs that touch the
    condition tape are grouped by template and filled in per condition.
    """

    def __init__(self, machine: ToyMachine, conditions: Iterable[str] = (), threads: int = 1):
        check_budget(machine.lmax)
        self.machine = machine
        self.unit_den = 1 << machine.lmax
        progs = _enumerate(machine.lmax, machine.steps)
        self.n_programs = len(progs)
        self._base: dict[str, Entry] = {}
        self._base_progs: list[str] = []
        groups: dict[Template, _Group] = {}
        for bits, tpl in progs:
            unit = 1 << (machine.lmax - len(bits))
            if tpl.ncopy == 0 and tpl.nexec == 0:
                _add(self._base, tpl.parts[0] if tpl.parts else "", bits, unit)
                self._base_progs.append(bits)
                continue
            g = groups.get(tpl)
            if g is None:
                groups[tpl] = _Group(tpl, len(bits), bits, unit, [bits])
            else:
                if (len(bits), bits) < (g.khat, g.program):
                    g.khat, g.program = len(bits), bits
                g.mass += unit
                g.programs.append(bits)
        self._groups = sorted(groups.values(), key=lambda g: (g.khat, g.program))
        # index for targeted queries: (literal_len, ncopy, nexec) -> groups
        self._by_shape: dict[tuple, list[_Group]] = {}
        for g in self._groups:
            t = g.template
            self._by_shape.setdefault((t.literal_len, t.ncopy, t.nexec), []).append(g)
        self._tables: dict[str, dict[str, Entry]] = {}
        self._exec_cache: dict[str, Outcome] = {}
        conds = list(dict.fromkeys([""] + list(conditions)))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                built = list(pool.map(self._build_table, conds))
        else:
            built = [self._build_table(c) for c in conds]
        for c, t in zip(conds, built):
            self._tables[c] = t

    # -- condition handling -------------------------------------------------

    def _exec_value(self, cond: str) -> Outcome:
        o = self._exec_cache.get(cond)
        if o is None:
            o = run(cond, "", self.machine.steps) if cond else Outcome(Status.READ_PAST_END)
            self._exec_cache[cond] = o
        return o

    def _group_output(self, g: _Group, cond: str) -> str | None:
        t = g.template
        cost = t.base + t.ncopy * len(cond)
        exec_out = None
        if t.nexec:
            ex = self._exec_value(cond)
            if not ex.halted:
                return None
            cost += t.nexec * ex.steps
            exec_out = ex.output
        if cost > self.machine.steps:
            return None
        return t.fill(cond, exec_out)

    def _build_table(self, cond: str) -> dict[str, Entry]:
        table = {x: Entry(e.khat, e.program, e.mass) for x, e in self._base.items()}
        for g in self._groups:
            x = self._group_output(g, cond)
            if x is None:
                continue
            e = table.get(x)
            if e is None:
                table[x] = Entry(g.khat, g.program, g.mass)
            else:
                if (g.khat, g.program) < (e.khat, e.program):
                    e.khat, e.program = g.khat, g.program
                e.mass += g.mass
        return table

    def table(self, cond: str = "") -> dict[str, Entry]:
        """Full output table under ``cond``; built on first use."""
        t = self._tables.get(cond)
        if t is None:
            t = self._tables[cond] = self._build_table(cond)
        return t

    def _lookup(self, x: str, cond: str) -> Entry | None:
        if cond in self._tables:
            return self._tables[cond].get(x)
        best = self._base.get(x)
        best = Entry(best.khat, best.program, best.mass) if best else None
        ex = self._exec_value(cond)
        ulen = len(ex.output) if ex.halted else None
        for (lit, nc, ne), groups in self._by_shape.items():
            if ne and ulen is None:
                continue
            if lit + nc * len(cond) + ne * (ulen or 0) != len(x):
                continue
            for g in groups:
                if self._group_output(g, cond) != x:
                    continue
                if best is None:
                    best = Entry(g.khat, g.program, g.mass)
                else:
                    if (g.khat, g.program) < (best.khat, best.program):
                        best.khat, best.program = g.khat, g.program
                    best.mass += g.mass
        return best

    # -- public queries -----------------------------------------------------

    def khat(self, x: str) -> int | None:
        e = self.table("").get(x)
        return e.khat if e else None

    def khat_free(self, x: str) -> int | None:
        """Shortest program for ``x`` that never touches the condition tape."""
        e = self._base.get(x)
        return e.khat if e else None

    def khat_cond(self, x: str, cond: str) -> int | None:
        e = self._lookup(x, cond)
        return e.khat if e else None

    def mhat(self, x: str) -> Fraction:
        e = self.table("").get(x)
        return Fraction(e.mass, self.unit_den) if e else Fraction(0)

    def mhat_cond(self, x: str, cond: str) -> Fraction:
        e = self._lookup(x, cond)
        return Fraction(e.mass, self.unit_den) if e else Fraction(0)

    def xstar(self, x: str) -> str:
        """First shortest halting program for ``x`` in length-then-lexicographic order."""
        e = self.table("").get(x)
        if e is None:
            raise OracleError(f"{x!r} has no program within the budget")
        return e.program

    def strings(self, cond: str = "") -> list[str]:
        return sorted(self.table(cond), key=lambda s: (len(s), s))

    def halting_programs(self, cond: str = "") -> list[str]:
        """Every halting program of length <= L_max under ``cond``."""
        progs = list(self._base_progs)
        for g in self._groups:
            if self._group_output(g, cond) is not None:
                progs.extend(g.programs)
        return sorted(progs)

    def kraft_sum(self, cond: str = "") -> Fraction:
        return Fraction(sum(e.mass for e in self.table(cond).values()), self.unit_den)

    def copy_overhead(self) -> int:
        return len(COPY_PROGRAM)

    def khat_cond_long(self, x: str, cond_len: int, cond_fn) -> int | None:
        """``khat_cond`` for a condition that may be too long to materialize.

        A halting run on an empty condition takes at least one step per three
        program bits, so a condition longer than ``3T`` can neither be copied
        nor executed within budget; only condition-free programs count then.
        """
        if cond_len > 3 * self.machine.steps:
            return self.khat_free(x)
        return self.khat_cond(x, cond_fn())


def is_prefix_free_sorted(words: list[str]) -> bool:
    """Prefix-freeness of a lexicographically sorted list by adjacent comparison."""
    return all(not b.startswith(a) for a, b in zip(words, words[1:]))


def literal_overhead(n: int) -> int:
    """Bits added to an ``n``-bit string by the one-EMIT program."""
    return len(OP_EMIT) + natural_length(n - 1) + len(OP_END) if n else len(OP_END)


def build_oracle(machine: ToyMachine, conditions: Iterable[str] = (), threads: int = 1) -> ComplexityOracle:
    return ComplexityOracle(machine, conditions, threads)


# ---------------------------------------------------------------------------
# expected complexity against entropy

def dyadic_model_code(f) -> str:
    """Self-delimiting description of a dyadic distribution on strings.

    ``enc(s)`` for the support size, then ``x'`` and ``enc(log 1/f(x))`` per
    support point in canonical order. Its length stands in for ``K(f)``.
    """
    from .coding import encode_string
    pts = sorted(((x, p) for x, p in f.items() if p), key=lambda t: (len(t[0]), t[0]))
    out = [encode_natural(len(pts))]
    for x, p in pts:
        q = 1 / Fraction(p)
        if q.denominator != 1 or q.numerator & (q.numerator - 1):
            raise OracleError(f"f({x!r}) = {p} is not dyadic")
        out.append(encode_string(x) + encode_natural(q.numerator.bit_length() - 1))
    return "".join(out)


@dataclass(frozen=True)
class SandwichRow:
    entropy: float
    expected_khat: float
    gap: float
    model_length: int


def expected_khat_gap(oracle: ComplexityOracle, f) -> SandwichRow:
    """``sum f(x) khat(x) - H(f)`` for a dyadic ``f`` whose support is in the table."""
    import math
    ek = 0.0
    h = 0.0
    for x, p in f.items():
        if not p:
            continue
        k = oracle.khat(x)
        if k is None:
            raise OracleError(f"{x!r} outside the oracle table")
        ek += float(p) * k
        h += float(p) * math.log2(1 / Fraction(p))
    return SandwichRow(h, ek, ek - h, len(dyadic_model_code(f)))


def random_dyadic(rng, universe: list[str], atoms: int) -> dict[str, Fraction]:
    """Start from a point mass and split a random atom in half ``atoms - 1`` times."""
    pool = list(universe)
    rng.shuffle(pool)
    f = {pool.pop(): Fraction(1)}
    for _ in range(atoms - 1):
        if not pool:
            break
        x = rng.choice(sorted(f))
        f[x] /= 2
        f[pool.pop()] = f[x]
    return f


# ---------------------------------------------------------------------------
# algorithmic mutual information and slack

def alg_mutual_info(oracle: ComplexityOracle, x: str, y: str) -> int:
    """``I(y : x) = khat(x) - khat(x | y*)``."""
    kx = oracle.khat(x)
    if kx is None:
        raise OracleError(f"{x!r} outside the oracle table")
    ystar = oracle.xstar(y)
    kxy = oracle.khat_cond(x, ystar)
    return kx - kxy


def pair(x: str, y: str) -> str:
    """Self-delimiting pair ``<x, y> = x' y``."""
    from .coding import encode_string
    return encode_string(x) + y


@dataclass
class SlackReport:
    identity: str
    gaps: dict
    max_gap: float
    gap_growth: dict
    skipped: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _report(name: str, gaps: dict, length_of, skipped, extra=None) -> SlackReport:
    growth: dict[int, float] = {}
    for key, g in gaps.items():
        n = length_of(key)
        growth[n] = max(growth.get(n, float("-inf")), g)
    mx = max(gaps.values()) if gaps else float("-inf")
    return SlackReport(name, gaps, mx, dict(sorted(growth.items())), skipped, extra or {})


def slack_experiment(oracle: ComplexityOracle, identity: str, universe: Iterable[str]) -> SlackReport:
    """Signed gaps ``lhs - rhs`` for one of the four identities over ``universe``.

    Additivity uses ``|K(x,y) - K(x) - K(y|x*)|``; the others report the
    amount by which the inequality's left side exceeds its right side.
    """
    universe = sorted(set(universe), key=lambda s: (len(s), s))
    for u in universe:
        if oracle.khat(u) is None:
            raise OracleError(f"{u!r} outside the oracle table")
    gaps: dict = {}
    skipped: list = []
    K = oracle.khat
    Kc = oracle.khat_cond
    star = oracle.xstar
    if identity == "Additivity":
        for x in universe:
            for y in universe:
                kxy = K(pair(x, y))
                kyx = Kc(y, star(x))
                if kxy is None or kyx is None:
                    skipped.append((x, y))
                    continue
                gaps[(x, y)] = abs(kxy - (K(x) + kyx))
        return _report(identity, gaps, lambda k: max(len(k[0]), len(k[1])), skipped)
    if identity == "Triangle":
        # K(x|y*) <= K(z|y*) + K(x|z*)
        for x in universe:
            for y in universe:
                for z in universe:
                    a, b, c = Kc(x, star(y)), Kc(z, star(y)), Kc(x, star(z))
                    if None in (a, b, c):
                        skipped.append((x, y, z))
                        continue
                    gaps[(x, y, z)] = a - (b + c)
        return _report(identity, gaps, lambda k: max(map(len, k)), skipped)
    if identity == "DetNonIncrease":
        # z = q(x) with q the identity program: I(z:y) <= I(x:y) + K(q)
        kq = len(EXEC_PROGRAM)
        for x in universe:
            for y in universe:
                gaps[(x, y)] = alg_mutual_info(oracle, x, y) - alg_mutual_info(oracle, x, y) - kq
        return _report(identity, gaps, lambda k: max(map(len, k)), skipped, {"K(q)": kq})
    if identity == "RandNonIncrease":
        # E_{z ~ m(.|x*)} 2^{I(z:y) - I(x:y)}, summed over z in the universe
        expect: dict = {}
        for x in universe:
            xs = star(x)
            for y in universe:
                ixy = alg_mutual_info(oracle, x, y)
                total = Fraction(0)
                for z in universe:
                    w = oracle.mhat_cond(z, xs)
                    if w:
                        total += w * Fraction(2) ** (alg_mutual_info(oracle, z, y) - ixy)
                expect[(x, y)] = total
                gaps[(x, y)] = float(total)
        return _report(identity, gaps, lambda k: max(map(len, k)), skipped, {"expectations": expect})
    raise OracleError(f"unknown identity {identity!r}")


# ---------------------------------------------------------------------------
# persistence

MAGIC = b"KLABORC1"


def save_table(oracle: ComplexityOracle, fh, conds: Iterable[str] = ("",)) -> None:
    """Write ``(string, khat, mhat)`` records for each condition, sorted by string."""
    ver = oracle.machine.version.encode()
    fh.write(MAGIC)
    fh.write(struct.pack("<H", len(ver)) + ver)
    fh.write(struct.pack("<III", oracle.machine.lmax, oracle.machine.steps, 0))
    conds = list(conds)
    fh.write(struct.pack("<I", len(conds)))
    for c in conds:
        cb = c.encode()
        table = oracle.table(c)
        fh.write(struct.pack("<I", len(cb)) + cb)
        fh.write(struct.pack("<I", len(table)))
        for x in sorted(table, key=lambda s: (len(s), s)):
            e = table[x]
            xb = x.encode()
            fh.write(struct.pack("<I", len(xb)) + xb)
            fh.write(struct.pack("<IQQ", e.khat, e.mass, oracle.unit_den))


def load_table(fh) -> dict:
    """Inverse of :func:`save_table`: returns header fields and per-condition records."""
    if fh.read(len(MAGIC)) != MAGIC:
        raise OracleError("not an oracle table file")

    def unpack(fmt):
        size = struct.calcsize(fmt)
        data = fh.read(size)
        if len(data) != size:
            raise OracleError("truncated oracle table")
        return struct.unpack(fmt, data)

    (vl,) = unpack("<H")
    version = fh.read(vl).decode()
    lmax, steps, _ = unpack("<III")
    (nc,) = unpack("<I")
    tables = {}
    for _ in range(nc):
        (cl,) = unpack("<I")
        cond = fh.read(cl).decode()
        (nr,) = unpack("<I")
        recs = {}
        for _ in range(nr):
            (xl,) = unpack("<I")
            x = fh.read(xl).decode()
            k, num, den = unpack("<IQQ")
            recs[x] = (k, Fraction(num, den))
        tables[cond] = recs
    return {"version": version, "lmax": lmax, "steps": steps, "tables": tables}


_MEMO: dict = {}


def cached_oracle(lmax: int = 20, steps: int = 1000) -> ComplexityOracle:
    """Process-wide shared oracle for a given budget (built on first request)."""
    key = (lmax, steps)
    if key not in _MEMO:
        _MEMO[key] = build_oracle(ToyMachine(lmax, steps))
    return _MEMO[key]


def all_strings(max_len: int, min_len: int = 0) -> Iterator[str]:
    for n in range(min_len, max_len + 1):
        for v in range(1 << n):
            yield format(v, f"0{n}b") if n else ""
