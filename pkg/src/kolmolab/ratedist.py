"""Rate-distortion on finite alphabets.

Exact distortion-rate values by codebook enumeration, the information
rate-distortion function by Blahut-Arimoto, closed forms for Shannon-Fano
distortion, and the expected structure function experiment.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .coding import Dist
from .measures import JointDist, binary_entropy, entropy, mutual_info

INF = math.inf
CODEBOOK_GUARD = 10 ** 7


class BudgetError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class RDInstance:
    """Source, code-word alphabet and distortion table ``d[(x, y)]`` (``inf`` allowed)."""

    source: Dist
    codewords: tuple
    d: dict = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "codewords", tuple(self.codewords))
        table = {}
        for x in self.source.outcomes:
            finite = False
            for y in self.codewords:
                if (x, y) not in self.d:
                    raise ValueError(f"distortion undefined at {(x, y)!r}")
                v = self.d[(x, y)]
                # irrational entries (e.g. log 3) stay as floats
                v = INF if v == INF else (v if isinstance(v, float) else Fraction(v))
                if v < 0:
                    raise ValueError("negative distortion")
                finite |= v != INF
                table[(x, y)] = v
            if not finite:
                raise ValueError(f"no finite distortion for source symbol {x!r}")
        object.__setattr__(self, "d", table)

    def block_source(self, m: int) -> Dist:
        return product_dist(self.source, m)

    def block_distortion(self, xs: tuple, ys: tuple):
        total = Fraction(0)
        for x, y in zip(xs, ys):
            v = self.d[(x, y)]
            if v == INF:
                return INF
            total += v
        return total / len(xs)


def product_dist(f: Dist, m: int) -> Dist:
    outs, probs = [], []
    for combo in itertools.product(f.items(), repeat=m):
        outs.append(tuple(o for o, _ in combo))
        p = Fraction(1)
        for _, q in combo:
            p *= q
        probs.append(p)
    return Dist(tuple(outs), tuple(probs))


def hamming_instance(p) -> RDInstance:
    """Binary source with ``P(1) = p`` and Hamming distortion."""
    p = Fraction(p)
    src = Dist((0, 1), (1 - p, p))
    return RDInstance(src, (0, 1), {(x, y): int(x != y) for x in (0, 1) for y in (0, 1)})


def floor_pow2(e) -> int:
    """``floor(2**e)`` for a rational ``e >= 0``, exactly."""
    e = Fraction(e)
    if e < 0:
        raise ValueError("negative exponent")
    a, b = e.numerator, e.denominator
    target = 1 << a
    # integer b-th root of 2**a
    k = int(2 ** float(e)) if e < 1000 else 1 << (a // b)
    while k ** b > target:
        k -= 1
    while (k + 1) ** b <= target:
        k += 1
    return k


@dataclass(frozen=True)
class BruteResult:
    D: object  # Fraction when exact, float otherwise
    codebook: tuple
    exact: bool = True
    mechanism: str = "BruteForce"


def _guard(count: int) -> None:
    if count > CODEBOOK_GUARD:
        raise BudgetError(f"{count} codebooks exceed the guard of {CODEBOOK_GUARD}")


def brute_force_D(instance, m: int, R) -> BruteResult:
    """Exact ``D*_m(R)`` (per-letter) over codebooks of at most ``floor(2^(mR))`` words."""
    if isinstance(instance, SetDistortionInstance):
        return instance.distortion_rate(m, R)
    size = floor_pow2(Fraction(m) * Fraction(R))
    blocks = list(itertools.product(instance.codewords, repeat=m))
    k = min(size, len(blocks))
    _guard(math.comb(len(blocks), k))
    src = instance.block_source(m)
    rows = [(p, [instance.block_distortion(xs, ys) for ys in blocks]) for xs, p in src.items() if p > 0]
    best = None
    best_cb = None
    for cb in itertools.combinations(range(len(blocks)), k):
        total = Fraction(0)
        for p, dists in rows:
            v = min(dists[i] for i in cb)
            if v == INF:
                total = INF
                break
            total += p * v
            if best is not None and total > best:
                break
        if best is None or total < best:
            best, best_cb = total, cb
    return BruteResult(best, tuple(blocks[i] for i in best_cb))


# ---------------------------------------------------------------------------
# set distortion: code words are sets, d(x, S) = log|S| for x in S

def _log2_exact(k: int):
    """``log2 k`` as a Fraction when ``k`` is a power of two, else a float."""
    if k & (k - 1) == 0:
        return Fraction(k.bit_length() - 1)
    return math.log2(k)


@dataclass(frozen=True)
class SetDistortionInstance:
    """Source over strings; code words are subsets, distortion ``log|S|``.

    Over ``m`` repetitions code words are product sets and the block
    distortion is ``(1/m) log|S_1 x ... x S_m|``.
    """

    source: Dist

    def distortion_rate(self, m: int, R) -> BruteResult:
        """``D*_m(R)`` via the optimal partition of the block space.

        Shrinking a code word to the cell it serves never increases
        distortion, so codebooks reduce to partitions into at most
        ``K = floor(2^(mR))`` cells with cost ``sum f(cell) log|cell|``. By
        rearrangement the optimum uses contiguous runs of the outcomes sorted
        by decreasing probability, solved by dynamic programming. The value
        is exact when the optimal cells are product sets (always the case for
        a uniform source with power-of-two cell sizes, realised as subcubes);
        otherwise it is reported as a lower bound with ``exact=False``.
        """
        src = product_dist(self.source, m)
        K = floor_pow2(Fraction(m) * Fraction(R))
        outs = [o for o, p in sorted(src.items(), key=lambda t: -t[1]) if p > 0]
        probs = [src[o] for o in outs]
        M = len(outs)
        K = min(K, M)
        sizes = _partition_dp([float(p) for p in probs], K)
        # exact value of the witness
        cells, i = [], 0
        for s in sizes:
            cells.append(outs[i:i + s])
            i += s
        uniform = len(set(probs)) == 1
        total = Fraction(0)
        for cell in cells:
            mass = sum((src[o] for o in cell), Fraction(0))
            lg = _log2_exact(len(cell))
            total = total + mass * lg if not isinstance(lg, float) else float(total) + float(mass) * lg
        # exact: the relaxation's optimum is met by a codebook of product sets
        exact = True
        if uniform and all(len(c) & (len(c) - 1) == 0 for c in cells):
            cells = _subcube_cells(src, [len(c) for c in cells])
        elif not all(_is_product(c, m) for c in cells):
            exact = False
        D = total / m
        return BruteResult(D, tuple(tuple(c) for c in cells), exact, "SetPartition")


def _partition_dp(probs: list[float], K: int) -> list[int]:
    """Cell sizes of the optimal contiguous partition into at most ``K`` cells."""
    M = len(probs)
    P = np.concatenate([[0.0], np.cumsum(probs)])
    lg = np.log2(np.arange(1, M + 1, dtype=float))
    dp = np.full(M + 1, np.inf)
    dp[0] = 0.0
    back = np.zeros((K + 1, M + 1), dtype=int)
    layers = [dp]
    for k in range(1, K + 1):
        prev = layers[-1]
        cur = np.full(M + 1, np.inf)
        cur[0] = 0.0
        for j in range(1, M + 1):
            i = np.arange(0, j)
            vals = prev[i] + (P[j] - P[i]) * lg[j - i - 1]
            # keep fewer cells when equal: prefer the previous layer's value
            best = int(np.argmin(vals))
            cur[j] = vals[best]
            back[k, j] = best
            if prev[j] <= cur[j] + 1e-15:
                cur[j] = prev[j]
                back[k, j] = -1
        layers.append(cur)
    sizes = []
    j, k = M, K
    while j > 0:
        b = back[k, j]
        if b == -1:
            k -= 1
            continue
        sizes.append(j - b)
        j, k = b, k - 1
    return sizes[::-1]


def _is_product(cell: Sequence[tuple], m: int) -> bool:
    cs = set(cell)
    axes = [sorted({c[i] for c in cs}) for i in range(m)]
    return math.prod(len(a) for a in axes) == len(cs)


def _subcube_cells(src: Dist, sizes: list[int]) -> list[list]:
    """Partition of the block space into subcubes of the given power-of-two sizes."""
    outs = sorted(src.outcomes, key=lambda t: "".join(t))
    cells, i = [], 0
    for s in sorted(sizes, reverse=True):
        cells.append(outs[i:i + s])
        i += s
    return cells


def set_distortion_uniform(n: int) -> SetDistortionInstance:
    xs = tuple(format(v, f"0{n}b") for v in range(1 << n))
    return SetDistortionInstance(Dist.uniform(xs))


def set_distortion_table(n: int) -> RDInstance:
    """The same distortion as an explicit table over all nonempty subsets (tiny ``n``)."""
    xs = tuple(format(v, f"0{n}b") for v in range(1 << n))
    subsets = []
    for mask in range(1, 1 << len(xs)):
        subsets.append(frozenset(x for i, x in enumerate(xs) if mask >> i & 1))
    d = {}
    for x in xs:
        for s in subsets:
            d[(x, s)] = _log2_exact(len(s)) if x in s else INF
    return RDInstance(Dist.uniform(xs), tuple(subsets), d)


def subadditivity_gap(instance, n: int, m: int, R):
    """``n D*_n + m D*_m - (n+m) D*_{n+m}``; nonnegative when subadditivity holds."""
    a = brute_force_D(instance, n, R).D
    b = brute_force_D(instance, m, R).D
    c = brute_force_D(instance, n + m, R).D
    return n * a + m * b - (n + m) * c


# ---------------------------------------------------------------------------
# distortion spheres

@dataclass(frozen=True)
class DistortionSphere:
    center: tuple
    radius: Fraction
    elements: frozenset


def sphere(instance: RDInstance, center: tuple, radius, m: int | None = None) -> DistortionSphere:
    m = len(center) if m is None else m
    r = Fraction(radius)
    elems = frozenset(xs for xs in itertools.product(instance.source.outcomes, repeat=m)
                      if instance.block_distortion(xs, center) == r)
    return DistortionSphere(tuple(center), r, elems)


def canonical_covering(spheres: Sequence[DistortionSphere]) -> list[DistortionSphere]:
    """Disjoint ``B'`` spheres: overlaps go to the least radius, then least index; empties dropped."""
    order = sorted(range(len(spheres)), key=lambda i: (spheres[i].radius, i))
    taken: set = set()
    out: dict[int, DistortionSphere] = {}
    for i in order:
        s = spheres[i]
        mine = frozenset(s.elements - taken)
        taken |= mine
        if mine:
            out[i] = DistortionSphere(s.center, s.radius, mine)
    return [out[i] for i in sorted(out)]


# ---------------------------------------------------------------------------
# Blahut-Arimoto

@dataclass(frozen=True)
class RDCurvePoint:
    R: float
    D: float
    mechanism: str
    slope: float | None = None
    iterations: int = 0
    objective: tuple = ()


def _matrix(instance: RDInstance):
    p = np.array([float(q) for q in instance.source.probs])
    d = np.array([[float(instance.d[(x, y)]) for y in instance.codewords] for x in instance.source.outcomes])
    return p, d


def ba_slope(instance: RDInstance, slope: float, tol: float = 1e-9, max_iter: int = 100000) -> RDCurvePoint:
    """One point of ``R^(I)(D)`` at Lagrange slope ``slope`` (bits per unit distortion).

    Starts from the uniform output distribution. The objective
    ``-sum_x p(x) log2 Z(x)`` is recorded every iteration and must not increase.
    """
    p, d = _matrix(instance)
    finite = np.isfinite(d)
    w = np.where(finite, np.exp2(-slope * np.where(finite, d, 0.0)), 0.0)
    q = np.full(d.shape[1], 1.0 / d.shape[1])
    history = []
    prev = None
    for it in range(1, max_iter + 1):
        z = w @ q
        obj = float(-(p * np.log2(z)).sum())
        if history and obj > history[-1] + 1e-12:
            raise AssertionError(f"objective increased at iteration {it}: {history[-1]} -> {obj}")
        history.append(obj)
        Q = w * q / z[:, None]
        q_new = p @ Q
        change = float(np.abs(q_new - q).max())
        q = q_new
        if prev is not None and abs(prev - obj) < tol and change < tol:
            break
        prev = obj
    else:
        raise ConvergenceError("Blahut-Arimoto did not converge", (q, history[-1]))
    z = w @ q
    Q = w * q / z[:, None]
    joint = p[:, None] * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, Q / q[None, :], 1.0)
        R = float((joint * np.log2(ratio)).sum())
    D = float((joint * np.where(finite, d, 0.0)).sum())
    if abs(Q.sum(axis=1) - 1).max() > 1e-12:
        raise AssertionError("channel rows not normalized")
    return RDCurvePoint(max(R, 0.0), D, "BA", slope, it, tuple(history))


def d_max(instance: RDInstance) -> float:
    """``min_y E_x d(x, y)``: the smallest distortion reachable at zero rate."""
    p, d = _matrix(instance)
    return float(min((p * d[:, j]).sum() for j in range(d.shape[1])))


def blahut_arimoto(instance: RDInstance, D: float | None = None, slope: float | None = None, rate: float | None = None,
                   tol: float = 1e-9, max_iter: int = 100000, slope_max: float = 64.0) -> RDCurvePoint:
    """``R^(I)(D)`` at a distortion target, a slope, or (inverted) a rate target."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if slope is not None:
        return ba_slope(instance, slope, tol, max_iter)
    if D is not None:
        dm = d_max(instance)
        if D >= dm:
            return RDCurvePoint(0.0, dm, "BA", 0.0)
        hi = ba_slope(instance, slope_max, tol, max_iter)
        if hi.D >= D:
            return hi
        lo_s, hi_s = 0.0, slope_max
        for _ in range(200):
            mid = (lo_s + hi_s) / 2
            pt = ba_slope(instance, mid, tol, max_iter)
            if pt.D > D:
                lo_s = mid
            else:
                hi_s = mid
            if hi_s - lo_s < 1e-12:
                break
        return ba_slope(instance, hi_s, tol, max_iter)
    if rate is not None:
        if rate <= 0:
            return RDCurvePoint(0.0, d_max(instance), "BA", 0.0)
        lo_s, hi_s = 0.0, slope_max
        top = ba_slope(instance, hi_s, tol, max_iter)
        if top.R <= rate:
            return top
        for _ in range(200):
            mid = (lo_s + hi_s) / 2
            pt = ba_slope(instance, mid, tol, max_iter)
            if pt.R < rate:
                lo_s = mid
            else:
                hi_s = mid
            if hi_s - lo_s < 1e-12:
                break
        return ba_slope(instance, lo_s, tol, max_iter)
    raise ValueError("give one of D, slope or rate")


# ---------------------------------------------------------------------------
# Shannon-Fano distortion on a binary source

def shannon_fano_rd_binary(p, R=None, D=None) -> RDCurvePoint:
    """``D*(R) = max(H(p) - R, 0)`` or ``R*(D) = max(H(p) - D, 0)``."""
    p = Fraction(p)
    if not 0 < p < 1:
        raise ValueError("need 0 < p < 1")
    h = binary_entropy(p)
    if R is not None:
        return RDCurvePoint(float(R), max(h - float(R), 0.0), "ClosedForm")
    if D is not None:
        return RDCurvePoint(max(h - float(D), 0.0), float(D), "ClosedForm")
    raise ValueError("give R or D")


def alpha_joint(p, alpha) -> JointDist:
    """``Y_alpha(x) = x`` with probability ``alpha``, else ``1 - x``."""
    p, a = Fraction(p), Fraction(alpha)
    src = Dist((0, 1), (1 - p, p))
    return JointDist.from_channel(src, lambda x: {x: a, 1 - x: 1 - a}, (0, 1))


def alpha_oracle(p, R, grid: int = 100, steps: int = 60) -> tuple[Fraction, float, float]:
    """Find ``alpha`` in ``[0, 1/2]`` with ``I(X; Y_alpha) = R``; returns ``(alpha, I, H(X|Y))``.

    A grid brackets the root and bisection refines it; the mutual information
    falls from ``H(X)`` at ``alpha = 0`` to 0 at ``alpha = 1/2``.
    """
    def info(a):
        j = alpha_joint(p, a)
        i = mutual_info(j)
        return i, entropy(j.marginal_x()) - i

    R = float(R)
    i0, c0 = info(Fraction(0))
    if R >= i0:
        return Fraction(0), i0, c0
    if R <= 0:
        a = Fraction(1, 2)
        i, c = info(a)
        return a, i, c
    pts = [Fraction(k, 2 * grid) for k in range(grid + 1)]
    lo = pts[0]
    hi = pts[-1]
    for a, b in zip(pts, pts[1:]):
        if info(b)[0] <= R:
            lo, hi = a, b
            break
    for _ in range(steps):
        mid = (lo + hi) / 2
        if info(mid)[0] > R:
            lo = mid
        else:
            hi = mid
    i, c = info(hi)
    return hi, i, c


# ---------------------------------------------------------------------------
# expected structure function versus distortion-rate

@dataclass
class ExpStructRow:
    R: Fraction
    expected_h: float  # E (1/m) h(mR)
    d_star: object
    right_holds: bool
    shift: int | None  # least s with E (1/m) h(mR + s) <= D*_m(R)
    exact: bool


def expected_structfn_experiment(family, source: Dist, m: int, R_grid: Iterable, oracle=None,
                                 max_shift: int = 256) -> list[ExpStructRow]:
    """Compare ``E (1/m) h_xbar(mR)`` with ``D*_m(R)`` for the set distortion.

    ``source`` is over ``n``-bit strings; blocks ``xbar`` are concatenations of
    ``m`` outcomes and ``h`` is computed over the family on ``n m`` bits.
    """
    from .algstats import structure_functions

    block = product_dist(source, m)
    inst = SetDistortionInstance(source)
    curves = {}
    for xs, p in block.items():
        if p > 0:
            x = "".join(xs)
            curves[x] = (p, structure_functions(x, family, oracle, with_beta=False))

    def eh(r: int) -> float:
        return math.fsum(float(p) * c.h(r) for p, c in curves.values()) / m

    rows = []
    for R in R_grid:
        R = Fraction(R)
        br = inst.distortion_rate(m, R)
        d = float(br.D)
        mr = math.floor(m * R)
        right = eh(mr)
        shift = None
        for s in range(max_shift + 1):
            if eh(mr + s) <= d + 1e-9:
                shift = s
                break
        rows.append(ExpStructRow(R, right, br.D, d <= right + 1e-9, shift, br.exact))
    return rows


def band_fit(gaps: dict[int, float]) -> tuple[float, float]:
    """Upper envelope ``c + b log2 n`` over per-``n`` maximal gaps.

    ``b`` is the least-squares slope in ``log2 n``; ``c`` is then the smallest
    intercept that puts every point under the line.
    """
    ns = sorted(gaps)
    xs = np.log2(np.array(ns, dtype=float))
    ys = np.array([gaps[n] for n in ns], dtype=float)
    b = float(np.polyfit(xs, ys, 1)[0]) if len(ns) > 1 else 0.0
    b = max(b, 0.0)
    c = float(max(ys - b * xs))
    return c, b


def structfn_band(family, ns: Iterable[int], oracle=None) -> tuple[dict[int, list[ExpStructRow]], float, float]:
    """Per ``n``, compare ``E h_x(R)`` under the uniform source on ``{0,1}^n``
    with ``D*_1(R) = n - R`` at integer ``R = 0..n``.

    Each row records whether ``D* <= E h(R)`` and the least shift ``s`` with
    ``E h(R + s) <= D*(R)``. The band ``(c, b)`` bounds the worst shift per
    ``n`` by ``c + b log2 n``.
    """
    out = {}
    worst: dict[int, float] = {}
    for n in ns:
        src = Dist.uniform(tuple(format(v, f"0{n}b") if n else "" for v in range(1 << n)))
        rows = expected_structfn_experiment(family, src, 1, range(n + 1), oracle)
        out[n] = rows
        worst[n] = max(INF if r.shift is None else r.shift for r in rows)
    c, b = band_fit(worst)
    return out, c, b
