"""Command-line interface: one subcommand per operation or experiment.

Numbers print with 9 fixed decimals; tables are CSV. Any library error exits
with status 2 and a one-line JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import pickle
import sys
from fractions import Fraction
from pathlib import Path

from . import algstats, coding, measures, probstats, ratedist, toyvm, universal
from .formats import (FormatError, csv_lines, fmt, format_rational, read_corpus, read_dist, read_joint,
                      read_lengths, read_rd_instance, write_code)

CACHE_ENV = "KOLMOLAB_CACHE"


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from None


def _range(spec: str) -> list[int]:
    """``a..b`` (inclusive) or a comma list."""
    try:
        if ".." in spec:
            a, b = spec.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in spec.split(",") if t]
    except ValueError:
        raise CLIError(f"bad integer range {spec!r}") from None


def _rationals(spec: str) -> list[Fraction]:
    """Comma list of rationals, or ``start:stop:step`` inclusive."""
    try:
        if spec.count(":") == 2:
            a, b, s = (Fraction(t) for t in spec.split(":"))
            if s <= 0:
                raise ValueError
            out, v = [], a
            while v <= b:
                out.append(v)
                v += s
            return out
        return [Fraction(t) for t in spec.split(",") if t]
    except (ValueError, ZeroDivisionError):
        raise CLIError(f"bad rational list {spec!r}") from None


def _bits(s: str) -> str:
    s = "" if s == "-" else s
    if set(s) - {"0", "1"}:
        raise CLIError(f"{s!r} is not a bit string")
    return s


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_rows(args, header, rows) -> None:
    header, rows = list(header), [list(r) for r in rows]
    if getattr(args, "format", "csv") == "json":
        recs = [dict(zip(header, (v if isinstance(v, str) else fmt(v) for v in r))) for r in rows]
        _emit(args, json.dumps(recs, indent=1, sort_keys=False) + "\n")
    else:
        _emit(args, csv_lines(header, rows))


def _oracle(args, conditions=()) -> toyvm.ComplexityOracle:
    """Build, or load from ``$KOLMOLAB_CACHE``, the enumerated oracle."""
    machine = toyvm.ToyMachine(args.lmax, args.steps)
    cache = os.environ.get(CACHE_ENV)
    path = None
    if cache:
        path = Path(cache) / f"oracle-{machine.version}-L{machine.lmax}-T{machine.steps}.pkl"
        if path.exists():
            with path.open("rb") as fh:
                o = pickle.load(fh)
            if isinstance(o, toyvm.ComplexityOracle) and o.machine == machine:
                for c in conditions:
                    o.table(c)
                return o
    o = toyvm.build_oracle(machine, conditions, threads=args.threads)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with tmp.open("wb") as fh:
            pickle.dump(o, fh)
        tmp.replace(path)
    return o


# ---------------------------------------------------------------------------
# coding and measures

def _lengths_arg(args) -> list[int]:
    if args.lengths:
        try:
            return [int(v) for v in args.lengths]
        except ValueError:
            raise CLIError("lengths must be integers") from None
    if args.file:
        return read_lengths(_read_text(args.file))
    raise CLIError("give lengths or --file")


def cmd_kraft(args):
    ls = _lengths_arg(args)
    res = coding.kraft_check(ls)
    _emit(args, f"sum\t{format_rational(res.sum)}\nvalue\t{fmt(res.sum)}\nstatus\t{res.status.name}\n")


def cmd_code_from_lengths(args):
    ls = _lengths_arg(args)
    code = coding.code_from_lengths(ls)
    buf = []
    for s, w in zip(code.alphabet, code.codewords):
        buf.append(f"{s}\t{w}\n")
    _emit(args, "".join(buf))


def cmd_shannon_fano(args):
    d = read_dist(_read_text(args.dist))
    code = coding.shannon_fano(d)
    if args.stats:
        L = code.expected_length(d)
        h = measures.entropy(d)
        _emit(args, f"H\t{fmt(h)}\nL\t{fmt(L)}\nL_exact\t{format_rational(L)}\n")
        return
    import io
    buf = io.StringIO()
    write_code(code, buf)
    _emit(args, buf.getvalue())


def cmd_natural(args):
    if args.decode is not None:
        bits = _bits(args.decode)
        out, pos = [], 0
        while pos < len(bits):
            n, used = coding.decode_natural(bits, pos)
            out.append(str(n))
            pos += used
        _emit(args, "\n".join(out) + ("\n" if out else ""))
        return
    lines = []
    for v in args.numbers:
        n = int(v)
        if n < 0:
            raise CLIError("naturals must be non-negative")
        lines.append(f"{n}\t{coding.encode_natural(n)}")
    _emit(args, "\n".join(lines) + "\n")


def cmd_entropy(args):
    _emit(args, fmt(measures.entropy(read_dist(_read_text(args.dist)))) + "\n")


def cmd_mi(args):
    j = read_joint(_read_text(args.joint))
    if args.y is not None:
        if args.y not in j.y_alphabet:
            raise CLIError(f"{args.y!r} not in the y alphabet")
        _emit(args, fmt(measures.individual_info(j, args.y)) + "\n")
        return
    rows = [("H(X)", measures.entropy(j.marginal_x())), ("H(Y)", measures.entropy(j.marginal_y())),
            ("H(X,Y)", measures.joint_entropy(j)), ("H(Y|X)", measures.conditional_entropy(j)),
            ("I(X;Y)", measures.mutual_info(j))]
    _emit(args, "".join(f"{k}\t{fmt(v)}\n" for k, v in rows))


def cmd_kl(args):
    f = read_dist(_read_text(args.p))
    g = read_dist(_read_text(args.q))
    _emit(args, fmt(measures.kl_divergence(f, g)) + "\n")


def cmd_dpi(args):
    j = read_joint(_read_text(args.joint))
    if len(j.y_alphabet) > 6:
        raise CLIError("exhaustive maps limited to |Y| <= 6")
    rows = []
    for t in measures.all_maps(j.y_alphabet):
        r = measures.data_processing_check(j, t)
        rows.append(("|".join(f"{k}>{v}" for k, v in t.items()), r.lhs, r.rhs, r.holds))
    _emit_rows(args, ("T", "I(X;Y)", "I(X;T(Y))", "holds"), rows)


# ---------------------------------------------------------------------------
# toy machine

def cmd_kolmo_table(args):
    conds = [_bits(c) for c in (args.cond or [""])]
    o = _oracle(args, conds)
    if args.table:
        with open(args.table, "wb") as fh:
            toyvm.save_table(o, fh, conds)
        return
    rows = []
    for c in conds:
        for x in o.strings(c):
            if args.max_len is not None and len(x) > args.max_len:
                continue
            e = o.table(c)[x]
            rows.append((c or "-", x or "-", e.khat, format_rational(Fraction(e.mass, o.unit_den)), e.program))
    _emit_rows(args, ("condition", "x", "khat", "mhat", "program"), rows)


def cmd_slack(args):
    universe = list(toyvm.all_strings(args.max_len))
    o = _oracle(args)
    rep = toyvm.slack_experiment(o, args.identity, universe)
    rows = [("|".join(s or "-" for s in k), g) for k, g in sorted(rep.gaps.items())]
    text = csv_lines(("key", "gap"), rows)
    text += f"# identity={rep.identity} max_gap={fmt(rep.max_gap)} skipped={len(rep.skipped)}\n"
    for n, g in rep.gap_growth.items():
        text += f"# n={n} max_gap={fmt(g)}\n"
    _emit(args, text)


# ---------------------------------------------------------------------------
# statistics

def cmd_structfn(args):
    if args.list_families:
        fams = algstats.all_families()
        _emit(args, "".join(f"{f.name}\t{f.description}\n" for f in fams))
        return
    if args.x is None:
        raise CLIError("--x is required")
    x = _bits(args.x)
    vm = _oracle(args)
    fam = algstats.family_by_name(args.family, vm)
    oracle = algstats.TwoPartOracle(vm, algstats.all_families(vm))
    curve = algstats.structure_functions(x, fam, oracle, r_max=args.r_max)
    rows = [(s.R, s.h, s.lam, s.beta, s.h_witness or "") for s in curve.samples]
    _emit_rows(args, ("R", "h", "lambda", "beta", "witness"), rows)


def cmd_suffstat(args):
    if args.family != "bernoulli":
        raise CLIError("only the bernoulli family is shipped")
    grid = tuple(_rationals(args.grid)) if args.grid else probstats.DEFAULT_GRID
    stat = probstats.statistic(args.stat)
    rows = []
    for n in _range(args.n):
        fam = probstats.bernoulli_family(n, grid)
        ex = probstats.check_sufficiency_exact(fam, stat)
        wit = "" if ex.witness is None else "|".join(str(w) for w in ex.witness)
        rows.append((n, "exact", "", "", ex.sufficient, wit))
        gaps = probstats.check_sufficiency_expectation(fam, stat)
        for t, g in gaps.items():
            rows.append((n, "expectation", str(t), g, g <= probstats.TOL, ""))
        mi = probstats.sufficiency_via_mi(fam, stat)
        worst = max(a - b for a, b in mi)
        rows.append((n, "mutual-information", "", worst, probstats.mi_sufficient(mi), ""))
    _emit_rows(args, ("n", "check", "theta", "gap", "sufficient", "witness"), rows)


def cmd_wiske(args):
    stat = probstats.sequential(args.stat)
    grid = tuple(_rationals(args.grid)) if args.grid else probstats.DEFAULT_GRID
    o = _oracle(args)
    ns = _range(args.n)
    rows = probstats.wiske_experiment(stat, probstats.bernoulli_family(1, grid), o, ns)
    _emit_rows(args, ("n", "theta", "alg_slack", "prob_gap", "c_theta", "holds"),
               [(r.n, str(r.theta), r.alg_slack, r.prob_gap, r.c_theta, r.holds) for r in rows])


# ---------------------------------------------------------------------------
# rate-distortion

def _instance(args):
    if args.set_uniform is not None:
        return ratedist.set_distortion_uniform(args.set_uniform)
    if args.instance:
        return read_rd_instance(_read_text(args.instance))
    raise CLIError("give --instance FILE or --set-uniform N")


def cmd_rd(args):
    kind = args.kind
    if kind == "brute":
        inst = _instance(args)
        rows = []
        for R in _rationals(args.R):
            res = ratedist.brute_force_D(inst, args.m, R)
            rows.append((str(R), res.D, res.mechanism, len(res.codebook), res.exact))
        _emit_rows(args, ("R", "D", "mechanism", "witness_size", "exact"), rows)
    elif kind == "ba":
        inst = _instance(args)
        if isinstance(inst, ratedist.SetDistortionInstance):
            raise CLIError("Blahut-Arimoto needs an explicit instance file")
        rows = []
        targets = [("D", v) for v in _rationals(args.D)] if args.D else []
        targets += [("slope", v) for v in _rationals(args.slope)] if args.slope else []
        targets += [("rate", v) for v in _rationals(args.rate)] if args.rate else []
        if not targets:
            raise CLIError("give --D, --slope or --rate")
        for key, v in targets:
            pt = ratedist.blahut_arimoto(inst, **{key: float(v)}, tol=args.tol)
            rows.append((pt.R, pt.D, pt.mechanism, len(inst.codewords), pt.slope, pt.iterations))
        _emit_rows(args, ("R", "D", "mechanism", "witness_size", "slope", "iterations"), rows)
    elif kind == "sfbinary":
        p = Fraction(args.p)
        rows = []
        for R in _rationals(args.R):
            pt = ratedist.shannon_fano_rd_binary(p, R=R)
            alpha, _, d = ratedist.alpha_oracle(p, R)
            rows.append((pt.R, pt.D, pt.mechanism, "", d, float(alpha)))
        _emit_rows(args, ("R", "D", "mechanism", "witness_size", "oracle_D", "alpha"), rows)
    elif kind == "expstruct":
        fam = algstats.family_by_name(args.family)
        table, c, b = ratedist.structfn_band(fam, range(1, args.n + 1))
        rows = []
        for n, rs in table.items():
            for r in rs:
                rows.append((n, str(r.R), r.expected_h, r.d_star, r.right_holds,
                             "" if r.shift is None else r.shift, r.exact))
        text = csv_lines(("n", "R", "expected_h", "d_star", "right_holds", "shift", "exact"), rows)
        text += f"# band c={fmt(c)} b={fmt(b)}\n"
        _emit(args, text)


# ---------------------------------------------------------------------------
# universal codes

def cmd_ucode(args):
    fam = universal.parse_family(_read_text(args.family))
    if args.action == "encode":
        x = _bits(_read_text(args.input).strip()) if args.input else _bits(args.x or "")
        data = universal.pack_bits(universal.universal_encode(fam, x))
        if not args.out:
            raise CLIError("--out is required for encode")
        Path(args.out).write_bytes(data)
    elif args.action == "decode":
        if not args.input:
            raise CLIError("--in is required for decode")
        bits = universal.unpack_bits(Path(args.input).read_bytes())
        x, used = universal.universal_decode(fam, bits)
        if used != len(bits):
            raise coding.DecodeError("trailing bits after the codeword")
        _emit(args, (x or "-") + "\n")
    else:
        if not args.corpus:
            raise CLIError("--corpus is required for report")
        corpus = read_corpus(_read_text(args.corpus))
        rep = universal.redundancy_report(fam, corpus, _range(args.expected_n) if args.expected_n else ())
        rows = [(r.x or "-", len(r.x), r.length, r.best_k, r.min_lk, r.redundancy, r.bound_holds, r.binomial) for r in rep.rows]
        text = csv_lines(("x", "n", "length", "k", "min_Lk", "redundancy", "bound_holds", "binomial"), rows)
        for (k, n), (h, el, up) in sorted(rep.expected.items(), key=lambda t: (t[0][1], t[0][0])):
            text += f"# expected k={k} n={n} H={fmt(h)} EL={fmt(el)} upper={fmt(up)}\n"
        _emit(args, text)


def cmd_selftest(args):
    from . import selftest
    return 0 if selftest.run() else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kolmolab", description="Coding, information and complexity experiments at desk scale.")
    p.add_argument("--threads", type=int, default=1, help="worker pool size for enumeration")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", help="write output here instead of stdout")
        return sp

    def vm(sp, lmax=20):
        sp.add_argument("--lmax", type=int, default=lmax)
        sp.add_argument("--steps", type=int, default=1000)

    def fmt_opt(sp):
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = add("kraft", cmd_kraft, "Kraft sum of a length multiset")
    sp.add_argument("lengths", nargs="*")
    sp.add_argument("--file")
    sp = add("code-from-lengths", cmd_code_from_lengths, "canonical prefix code for given lengths")
    sp.add_argument("lengths", nargs="*")
    sp.add_argument("--file")
    sp = add("shannon-fano", cmd_shannon_fano, "Shannon-Fano code of a distribution file")
    sp.add_argument("dist")
    sp.add_argument("--stats", action="store_true", help="print H and expected length instead of the code")
    sp = add("natural", cmd_natural, "self-delimiting code for naturals")
    sp.add_argument("numbers", nargs="*")
    sp.add_argument("--decode", help="decode a concatenation of codewords")
    sp = add("entropy", cmd_entropy, "entropy of a distribution file")
    sp.add_argument("dist")
    sp = add("mi", cmd_mi, "entropies and mutual information of a joint file")
    sp.add_argument("joint")
    sp.add_argument("--y", help="individual information of the outcome Y=y about X")
    sp = add("kl", cmd_kl, "Kullback-Leibler divergence D(p||q)")
    sp.add_argument("p")
    sp.add_argument("q")
    sp = add("dpi", cmd_dpi, "data processing over every map T on Y")
    sp.add_argument("joint")
    fmt_opt(sp)

    sp = add("kolmo-table", cmd_kolmo_table, "enumerated complexity table")
    vm(sp)
    sp.add_argument("--cond", action="append", help="condition string (repeatable; '-' for empty)")
    sp.add_argument("--max-len", type=int)
    sp.add_argument("--table", help="write the binary table file here")
    fmt_opt(sp)
    sp = add("slack", cmd_slack, "measured slack of an identity over all strings up to a length")
    vm(sp)
    sp.add_argument("--identity", required=True,
                    choices=("Additivity", "Triangle", "DetNonIncrease", "RandNonIncrease"))
    sp.add_argument("--max-len", type=int, default=3)

    sp = add("structfn", cmd_structfn, "structure functions h, lambda, beta of a string")
    vm(sp)
    sp.add_argument("--x")
    sp.add_argument("--family", default="masks", choices=algstats.FAMILY_NAMES)
    sp.add_argument("--r-max", type=int)
    sp.add_argument("--list-families", action="store_true")
    fmt_opt(sp)
    sp = add("suffstat", cmd_suffstat, "probabilistic sufficiency checks")
    sp.add_argument("--family", default="bernoulli")
    sp.add_argument("--stat", required=True, choices=sorted(probstats.STATISTICS))
    sp.add_argument("--n", default="1..6", help="range a..b or list")
    sp.add_argument("--grid", help="theta grid, e.g. 1/5,1/2 or 1/10:9/10:1/10")
    fmt_opt(sp)
    sp = add("wiske", cmd_wiske, "algorithmic versus probabilistic sufficiency gaps")
    vm(sp)
    sp.add_argument("--stat", default="ones", choices=sorted(probstats.STATISTICS))
    sp.add_argument("--n", default="1..6")
    sp.add_argument("--grid")
    fmt_opt(sp)

    sp = add("rd", cmd_rd, "rate-distortion computations")
    sp.add_argument("kind", choices=("brute", "ba", "sfbinary", "expstruct"))
    sp.add_argument("--instance", help="RD instance file")
    sp.add_argument("--set-uniform", type=int, help="set distortion with a uniform source on {0,1}^N")
    sp.add_argument("--m", type=int, default=1, help="block length")
    sp.add_argument("--R", default="0:1:1/20", help="rates: list or start:stop:step")
    sp.add_argument("--D")
    sp.add_argument("--slope")
    sp.add_argument("--rate")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--p", default="1/4")
    sp.add_argument("--family", default="masks", choices=algstats.FAMILY_NAMES)
    sp.add_argument("--n", type=int, default=8, help="largest n for expstruct")
    fmt_opt(sp)

    sp = add("ucode", cmd_ucode, "two-part universal code over a source family")
    sp.add_argument("action", choices=("encode", "decode", "report"))
    sp.add_argument("--family", required=True, help="family spec file")
    sp.add_argument("--in", dest="input", help="input file")
    sp.add_argument("--x", help="bit string to encode (instead of --in)")
    sp.add_argument("--corpus", help="one bit string per line")
    sp.add_argument("--expected-n", help="lengths for the expected-redundancy sandwich")

    add("selftest", cmd_selftest, "run the invariant suite")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise CLIError("--threads must be positive")
        rc = args.fn(args)
        return rc or 0
    except (CLIError, FormatError, ValueError, LookupError, ArithmeticError, RuntimeError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
