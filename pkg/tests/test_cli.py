import io
import json
import math
from fractions import Fraction

import pytest

from kolmolab.cli import main
from kolmolab.coding import Dist, shannon_fano
from kolmolab.formats import (FormatError, csv_lines, fmt, read_code, read_corpus, read_dist, read_joint,
                              read_rd_instance, write_code, write_dist, write_joint, write_rd_instance)
from kolmolab.measures import binary_entropy, epsilon_joint
from kolmolab.ratedist import hamming_instance

F = Fraction


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


# --- formats

def test_fmt_rendering():
    assert fmt(F(1, 3)) == "0.333333333"
    assert fmt(-0.0) == "0.000000000"
    assert fmt(math.inf) == "inf"
    assert fmt(True) == "true" and fmt(7) == "7" and fmt(None) == ""
    assert csv_lines(("a", "b"), [(1, 0.5), ("x", False)]) == "a,b\n1,0.500000000\nx,false\n"


def test_dist_roundtrip():
    d = Dist(("a", "b", "c"), (F(1, 2), F(1, 3), F(1, 6)))
    buf = io.StringIO()
    write_dist(d, buf)
    assert read_dist(buf.getvalue()) == d


def test_joint_roundtrip():
    j = epsilon_joint(F(1, 10), labelled=True)
    buf = io.StringIO()
    write_joint(j, buf)
    back = read_joint(buf.getvalue())
    want = {(str(x), str(y)): p for (x, y), p in j.mass.items() if p}
    assert {k: p for k, p in back.mass.items() if p} == want


def test_code_roundtrip():
    code = shannon_fano(Dist(tuple("abcd"), (F(2, 5), F(3, 10), F(1, 5), F(1, 10))))
    buf = io.StringIO()
    write_code(code, buf)
    assert read_code(buf.getvalue()).codewords == code.codewords


def test_rd_instance_roundtrip():
    inst = hamming_instance(F(1, 4))
    buf = io.StringIO()
    write_rd_instance(inst, buf)
    back = read_rd_instance(buf.getvalue())
    assert back.source.probs == inst.source.probs
    assert [back.d[(str(x), str(y))] for x in (0, 1) for y in (0, 1)] == [0, 1, 1, 0]


@pytest.mark.parametrize("text", ["a\t1/2\nb\t1/3\n", "a\tx\n", "a\t1/2\tq\n", ""])
def test_bad_dist_files(text):
    with pytest.raises(FormatError):
        read_dist(text)


@pytest.mark.parametrize("text", [
    "codewords\ta\nsource\ta\t1\n",
    "source\ta\t1\ncodewords\ta\nd\ta\t1\t2\n",
    "source\ta\t1\nd\ta\t0\n",
    "bogus\ta\n",
    "source\ta\t1\ncodewords\ta\nd\ta\tinf\n",
])
def test_bad_rd_files(text):
    with pytest.raises(FormatError):
        read_rd_instance(text)


def test_corpus_dash_is_empty():
    assert read_corpus("# c\n-\n0101\n\n") == ["", "0101"]
    with pytest.raises(FormatError):
        read_corpus("012\n")


# --- coding commands

def test_kraft(capsys):
    rc, out, _ = run(capsys, "kraft", "1", "2", "3", "3")
    assert rc == 0
    assert out == "sum\t1/1\nvalue\t1.000000000\nstatus\tCOMPLETE\n"


def test_code_from_lengths(capsys, files):
    rc, out, _ = run(capsys, "code-from-lengths", "--file", files("l.txt", "1 2 3 3\n"))
    assert rc == 0 and out == "0\t0\n1\t10\n2\t110\n3\t111\n"


def test_code_from_lengths_violation(capsys):
    rc, out, err = run(capsys, "code-from-lengths", "1", "1", "1")
    assert rc == 2 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "CodingError" and "3/2" in msg["message"]


def test_shannon_fano_stats(capsys, files):
    p = files("d.txt", "a\t2/5\nb\t3/10\nc\t1/5\nd\t1/10\n")
    rc, out, _ = run(capsys, "shannon-fano", p, "--stats")
    assert rc == 0
    assert out == "H\t1.846439345\nL\t2.400000000\nL_exact\t12/5\n"


def test_natural_roundtrip(capsys):
    rc, out, _ = run(capsys, "natural", "0", "5", "100")
    assert out == "0\t0\n5\t10110\n100\t11011100101\n"
    rc, out, _ = run(capsys, "natural", "--decode", "0" + "10110" + "11011100101")
    assert out == "0\n5\n100\n"


def test_entropy_kl_mi(capsys, files):
    u = files("u.txt", "0\t1/2\n1\t1/2\n")
    pt = files("pt.txt", "0\t1\n1\t0\n")
    assert run(capsys, "entropy", u)[1] == "1.000000000\n"
    assert run(capsys, "kl", pt, u)[1] == "1.000000000\n"
    assert run(capsys, "kl", u, pt)[1] == "inf\n"
    j = files("j.txt", "0\t0\t1/2\n1\t1\t1/2\n")
    out = run(capsys, "mi", j)[1]
    assert "I(X;Y)\t1.000000000" in out


def test_individual_information(capsys, files):
    j = epsilon_joint(F(1, 10), labelled=True)
    buf = io.StringIO()
    write_joint(j, buf)
    p = files("e.txt", buf.getvalue())
    rc, out, _ = run(capsys, "mi", p, "--y", "1")
    assert rc == 0 and out == "-0.431004406\n"


def test_dpi_json(capsys, files):
    j = files("j.txt", "0\ta\t1/4\n0\tb\t1/4\n1\tc\t1/2\n")
    rc, out, _ = run(capsys, "dpi", j, "--format", "json")
    recs = json.loads(out)
    assert len(recs) == 27
    assert all(r["holds"] == "true" for r in recs)


# --- toy machine and statistics

def test_kolmo_table(capsys):
    rc, out, _ = run(capsys, "kolmo-table", "--lmax", "14", "--max-len", "1", "--cond", "-", "--cond", "1")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "condition,x,khat,mhat,program"
    assert any(l.startswith("1,1,4,") for l in lines)


def test_kolmo_table_file(capsys, tmp_path):
    path = tmp_path / "t.bin"
    rc, out, _ = run(capsys, "kolmo-table", "--lmax", "12", "--table", str(path))
    assert rc == 0 and out == ""
    from kolmolab.toyvm import literal_overhead, load_table
    with path.open("rb") as fh:
        data = load_table(fh)
    assert (data["lmax"], data["steps"]) == (12, 1000)
    assert data["tables"][""]["0"][0] == 1 + literal_overhead(1) == 5


def test_cache_reuse(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("KOLMOLAB_CACHE", str(tmp_path))
    first = run(capsys, "kolmo-table", "--lmax", "12", "--max-len", "2")[1]
    assert len(list(tmp_path.glob("oracle-*-L12-T1000.pkl"))) == 1
    assert run(capsys, "kolmo-table", "--lmax", "12", "--max-len", "2")[1] == first


def test_slack(capsys):
    rc, out, _ = run(capsys, "slack", "--identity", "Triangle", "--max-len", "1")
    assert rc == 0 and "# identity=Triangle" in out


def test_structfn(capsys):
    rc, out, _ = run(capsys, "structfn", "--x", "10110100", "--family", "masks")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "R,h,lambda,beta,witness"
    assert lines[1].startswith("0,inf,inf,inf,")
    rc, out, _ = run(capsys, "structfn", "--list-families")
    assert [l.split("\t")[0] for l in out.splitlines()] == ["full", "singleton", "masks", "types", "parity", "hamming"]


def test_suffstat_and_wiske(capsys):
    rc, out, _ = run(capsys, "suffstat", "--stat", "pairs", "--n", "4")
    assert rc == 0
    assert "4,exact,,,false," in out
    rc, out, _ = run(capsys, "wiske", "--n", "1..3")
    rows = out.splitlines()[1:]
    assert len(rows) == 3 * 7 and all(r.endswith(",true") for r in rows)


# --- rate-distortion

def test_rd_brute_set_uniform(capsys):
    rc, out, _ = run(capsys, "rd", "brute", "--set-uniform", "3", "--R", "0,1,2,3")
    assert rc == 0
    ds = [l.split(",")[1] for l in out.splitlines()[1:]]
    assert ds == ["3.000000000", "2.000000000", "1.000000000", "0.000000000"]


def test_rd_ba_instance(capsys, files):
    buf = io.StringIO()
    write_rd_instance(hamming_instance(F(1, 4)), buf)
    p = files("h.txt", buf.getvalue())
    rc, out, _ = run(capsys, "rd", "ba", "--instance", p, "--D", "1/10")
    assert rc == 0
    r, d = out.splitlines()[1].split(",")[:2]
    assert float(d) == pytest.approx(0.1, abs=1e-6)
    assert float(r) == pytest.approx(binary_entropy(F(1, 4)) - binary_entropy(F(1, 10)), abs=1e-6)


def test_rd_sfbinary(capsys):
    rc, out, _ = run(capsys, "rd", "sfbinary", "--p", "1/2", "--R", "0,1/2")
    rows = [l.split(",") for l in out.splitlines()[1:]]
    assert [r[1] for r in rows] == ["1.000000000", "0.500000000"]
    assert all(abs(float(r[1]) - float(r[4])) < 1e-6 for r in rows)


def test_rd_expstruct_deterministic(capsys):
    a = run(capsys, "rd", "expstruct", "--n", "3")[1]
    b = run(capsys, "rd", "expstruct", "--n", "3")[1]
    assert a == b and a.splitlines()[-1].startswith("# band c=")


# --- universal codes

def test_ucode_encode_decode(capsys, files, tmp_path):
    fam = files("fam.txt", "bernoulli 1/5\nbernoulli 1/2\nmarkov1 1/2 1/10 9/10\n")
    enc = tmp_path / "x.bin"
    rc, _, _ = run(capsys, "ucode", "encode", "--family", fam, "--x", "0001000010", "--out", str(enc))
    assert rc == 0
    rc, out, _ = run(capsys, "ucode", "decode", "--family", fam, "--in", str(enc))
    assert rc == 0 and out == "0001000010\n"


def test_ucode_report(capsys, files):
    fam = files("fam.txt", "bernoulli 1/5\nbernoulli 1/2\n")
    corpus = files("c.txt", "-\n0101\n00000000\n")
    rc, out, _ = run(capsys, "ucode", "report", "--family", fam, "--corpus", corpus, "--expected-n", "4")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "x,n,length,k,min_Lk,redundancy,bound_holds,binomial"
    assert lines[1].startswith("-,0,")
    assert sum(l.startswith("# expected") for l in lines) == 2


# --- errors

@pytest.mark.parametrize("argv", [
    ["nosuch"],
    ["entropy", "/nonexistent/file"],
    ["natural", "-3"],
    ["--threads", "0", "kraft", "1"],
    ["rd", "brute"],
    ["structfn"],
    ["kraft"],
    ["kraft", "x"],
])
def test_errors_are_json_with_status_2(capsys, argv):
    rc, out, err = run(capsys, *argv)
    assert rc == 2
    msg = json.loads(err.strip().splitlines()[-1])
    assert set(msg) == {"error", "message"}


def test_out_option(capsys, tmp_path):
    p = tmp_path / "o.txt"
    rc, out, _ = run(capsys, "kraft", "2", "2", "--out", str(p))
    assert rc == 0 and out == "" and p.read_text().startswith("sum\t1/2")


def test_selftest(capsys):
    rc, out, _ = run(capsys, "selftest")
    assert rc == 0
    assert out.count("PASS") == 13 and "FAIL" not in out
