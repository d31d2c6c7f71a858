"""Probabilistic sufficient statistics on finite parameter grids.

Three independent checks of sufficiency are provided (exact conditionals,
expected log-loss against a pooled conditional, and mutual information with
the parameter), together with near-sufficiency gaps for sequential
statistics and the bridge to algorithmic sufficiency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

from .coding import Dist, encode_natural
from .measures import JointDist, entropy, log2q, mutual_info

DEFAULT_GRID = tuple(Fraction(k, 10) for k in range(2, 9))
TOL = 1e-9


def binary_strings(n: int) -> list[str]:
    return [format(v, f"0{n}b") if n else "" for v in range(1 << n)]


@dataclass(frozen=True)
class ParamFamily:
    """Finite grid of parameters with an exact mass function on ``{0,1}^n``."""

    name: str
    theta_grid: tuple
    n: int
    mass_fn: Callable = field(compare=False, repr=False)

    def __post_init__(self):
        if len(self.theta_grid) < 1:
            raise ValueError("empty parameter grid")

    def mass(self, theta, x: str) -> Fraction:
        return self.mass_fn(theta, x)

    def dist(self, theta) -> Dist:
        xs = binary_strings(self.n)
        return Dist(tuple(xs), tuple(self.mass(theta, x) for x in xs))

    def with_n(self, n: int) -> "ParamFamily":
        return ParamFamily(self.name, self.theta_grid, n, self.mass_fn)


def bernoulli_mass(theta, x: str) -> Fraction:
    theta = Fraction(theta)
    k = x.count("1")
    return theta ** k * (1 - theta) ** (len(x) - k)


def bernoulli_family(n: int, grid: Sequence = DEFAULT_GRID) -> ParamFamily:
    return ParamFamily("bernoulli", tuple(Fraction(t) for t in grid), n, bernoulli_mass)


@dataclass(frozen=True)
class Statistic:
    name: str
    fn: Callable = field(compare=False, repr=False)

    def __call__(self, x: str) -> Hashable:
        return self.fn(x)


def ones(x: str) -> int:
    return x.count("1")


def pairs(x: str) -> int:
    """Number of 1s that are followed by a 1."""
    return sum(1 for a, b in zip(x, x[1:]) if a == "1" and b == "1")


STATISTICS: dict[str, Callable] = {
    "ones": ones,
    "pairs": pairs,
    "singleton": lambda x: x,
    "full": lambda x: len(x),
}


def statistic(name: str) -> Statistic:
    try:
        return Statistic(name, STATISTICS[name])
    except KeyError:
        raise ValueError(f"unknown statistic {name!r}; choose from {sorted(STATISTICS)}") from None


def combined(s: Statistic, u: Statistic) -> Statistic:
    return Statistic(f"({s.name},{u.name})", lambda x: (s(x), u(x)))


def _classes(stat: Statistic, xs: Iterable[str]) -> dict:
    cls: dict = {}
    for x in xs:
        cls.setdefault(stat(x), []).append(x)
    return cls


def _conditionals(family: ParamFamily, stat: Statistic, theta) -> dict[str, Fraction]:
    """``f_theta(x | S(x))`` for every ``x``."""
    out = {}
    for s, members in _classes(stat, binary_strings(family.n)).items():
        masses = [family.mass(theta, x) for x in members]
        total = sum(masses, Fraction(0))
        for x, m in zip(members, masses):
            out[x] = m / total if total else None
    return out


@dataclass(frozen=True)
class SufficiencyResult:
    sufficient: bool
    witness: tuple | None = None  # (theta1, theta2, s, x)


def check_sufficiency_exact(family: ParamFamily, stat: Statistic) -> SufficiencyResult:
    """Exact comparison of ``f_theta(x | s)`` across the grid."""
    if len(family.theta_grid) < 2:
        raise ValueError("need at least two parameters")
    grid = family.theta_grid
    ref = _conditionals(family, stat, grid[0])
    for t in grid[1:]:
        cur = _conditionals(family, stat, t)
        for x in binary_strings(family.n):
            if ref[x] != cur[x]:
                return SufficiencyResult(False, (grid[0], t, stat(x), x))
    return SufficiencyResult(True)


def pooled_conditional(family: ParamFamily, stat: Statistic) -> dict[str, Fraction]:
    """``g(x | s)`` from the grid-pooled mass ``sum_theta f_theta``."""
    xs = binary_strings(family.n)
    pooled = {x: sum((family.mass(t, x) for t in family.theta_grid), Fraction(0)) for x in xs}
    out = {}
    for s, members in _classes(stat, xs).items():
        total = sum((pooled[x] for x in members), Fraction(0))
        for x in members:
            out[x] = pooled[x] / total
    return out


def check_sufficiency_expectation(family: ParamFamily, stat: Statistic) -> dict:
    """Per-theta ``sum_x f(x) [log 1/f(x|S(x)) - log 1/g(x|S(x))]`` in absolute value.

    The signed sum is minus an expected divergence, so its magnitude is zero
    exactly when every conditional equals the pooled one.
    """
    g = pooled_conditional(family, stat)
    gaps = {}
    for t in family.theta_grid:
        cond = _conditionals(family, stat, t)
        terms = []
        for x in binary_strings(family.n):
            f = family.mass(t, x)
            if f == 0:
                continue
            terms.append(float(f) * (log2q(g[x]) - log2q(cond[x])))
        gaps[t] = abs(math.fsum(terms))
    return gaps


def expectation_sufficient(gaps: dict) -> bool:
    return all(v <= TOL for v in gaps.values())


def theta_joint(family: ParamFamily, prior: Dist, stat: Statistic | None = None) -> JointDist:
    """Joint of ``(Theta, X)`` or ``(Theta, S(X))``."""
    xs = binary_strings(family.n)
    mass: dict = {}
    for t, w in prior.items():
        if w == 0:
            continue
        for x in xs:
            key = (t, stat(x) if stat else x)
            mass[key] = mass.get(key, Fraction(0)) + w * family.mass(t, x)
    ys = tuple(dict.fromkeys(stat(x) for x in xs)) if stat else tuple(xs)
    return JointDist(prior.outcomes, ys, mass)


def default_priors(grid: Sequence) -> list[Dist]:
    """Uniform, each point mass, half mass on one point with the rest uniform,
    and uniform on each pair of points."""
    grid = tuple(grid)
    k = len(grid)
    priors = [Dist.uniform(grid)]
    for i in range(k):
        priors.append(Dist(grid, tuple(Fraction(1 if j == i else 0) for j in range(k))))
    if k > 1:
        for i in range(k):
            priors.append(Dist(grid, tuple(Fraction(1, 2) if j == i else Fraction(1, 2 * (k - 1)) for j in range(k))))
        for i in range(k):
            for j in range(i + 1, k):
                priors.append(Dist(grid, tuple(Fraction(1, 2) if m in (i, j) else Fraction(0) for m in range(k))))
    return priors


def sufficiency_via_mi(family: ParamFamily, stat: Statistic, priors: Sequence[Dist] | None = None) -> list[tuple[float, float]]:
    """``(I(Theta; X), I(Theta; S(X)))`` for each prior."""
    if priors is None:
        priors = default_priors(family.theta_grid)
    return [(mutual_info(theta_joint(family, p)), mutual_info(theta_joint(family, p, stat))) for p in priors]


def mi_sufficient(values: Sequence[tuple[float, float]]) -> bool:
    return all(abs(a - b) <= TOL for a, b in values)


def mi_strict_drop(values: Sequence[tuple[float, float]], margin: float = 1e-6) -> bool:
    return any(a > b + margin for a, b in values)


# ---------------------------------------------------------------------------
# sequential statistics

class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class SequentialStatistic:
    """Maps each ``x`` to a set ``S(x)`` of strings of the same length.

    ``label`` names the class; ``code(x)`` is a prefix code for the class of
    ``x`` among strings of length ``n`` (``enc(n)`` followed by ``enc`` of the
    class's rank in sorted label order).
    """

    name: str
    label: Callable = field(compare=False, repr=False)

    def classes(self, n: int) -> dict:
        return _classes(Statistic(self.name, self.label), binary_strings(n))

    def sets(self, n: int) -> dict[str, frozenset]:
        out = {}
        for members in self.classes(n).values():
            fs = frozenset(members)
            for x in members:
                out[x] = fs
        return out

    def codes(self, n: int) -> dict[str, str]:
        cls = self.classes(n)
        rank = {lab: i for i, lab in enumerate(sorted(cls, key=repr))}
        head = encode_natural(n)
        return {x: head + encode_natural(rank[lab]) for lab, members in cls.items() for x in members}


def validate_partition(sets: dict[str, frozenset], n: int) -> None:
    """Check membership, shape and the partition property on ``{0,1}^n``."""
    for x in binary_strings(n):
        if x not in sets:
            raise PartitionError(f"S undefined at {x!r}")
        s = sets[x]
        if x not in s:
            raise PartitionError(f"condition x in S(x) fails at {x!r}")
        if any(len(y) != n or set(y) - {"0", "1"} for y in s):
            raise PartitionError(f"condition S(x) subset of {{0,1}}^{n} fails at {x!r}")
        for y in s:
            if sets.get(y) != s:
                raise PartitionError(f"partition condition fails: S({x!r}) and S({y!r}) overlap but differ")


def sequential(name: str) -> SequentialStatistic:
    return SequentialStatistic(name, statistic(name).fn)


def near_sufficiency_gap(family: ParamFamily, stat: SequentialStatistic, n_range: Iterable[int]) -> dict:
    """``|sum_x f(x)[log 1/f(x|S(x)) - log |S(x)|]|`` per ``(theta, n)``; ``g`` is uniform on ``S(x)``."""
    out = {}
    for n in n_range:
        fam = family.with_n(n)
        sets = stat.sets(n)
        validate_partition(sets, n)
        for t in fam.theta_grid:
            cond = _conditionals(fam, Statistic(stat.name, stat.label), t)
            terms = []
            for x in binary_strings(n):
                f = fam.mass(t, x)
                if f:
                    terms.append(float(f) * (-log2q(cond[x]) - math.log2(len(sets[x]))))
            out[(t, n)] = abs(math.fsum(terms))
    return out


@dataclass
class WiskeRow:
    n: int
    theta: Fraction
    alg_slack: float  # gap (i)
    prob_gap: float  # gap (ii)
    c_theta: float
    holds: bool


def wiske_experiment(stat: SequentialStatistic, family: ParamFamily, oracle, n_range: Iterable[int]) -> list[WiskeRow]:
    """Algorithmic slack of ``S`` versus its probabilistic expectation gap.

    (i)  ``max_x model_cost(S(x)) + log|S(x)| - khat(x)``
    (ii) ``sum_x f(x) log|S(x)| - sum_x f(x) log 1/f(x|S(x))``

    Because class codes are prefix-free, ``E model_cost(S) >= H(f(S))``, which
    gives ``(ii) <= (i) + c_theta`` with ``c_theta = max(0, E_f khat - H(f))``.
    """
    rows = []
    for n in n_range:
        fam = family.with_n(n)
        sets = stat.sets(n)
        validate_partition(sets, n)
        codes = stat.codes(n)
        xs = binary_strings(n)
        k = {}
        for x in xs:
            v = oracle.khat(x)
            if v is None:
                raise LookupError(f"{x!r} outside the oracle table")
            k[x] = v
        slack = max(len(codes[x]) + math.log2(len(sets[x])) - k[x] for x in xs)
        for t in fam.theta_grid:
            cond = _conditionals(fam, Statistic(stat.name, stat.label), t)
            f = fam.dist(t)
            terms = []
            ek = []
            for x in xs:
                p = f[x]
                if p:
                    terms.append(float(p) * (math.log2(len(sets[x])) + log2q(cond[x])))
                    ek.append(float(p) * k[x])
            gap2 = math.fsum(terms)
            c = max(0.0, math.fsum(ek) - entropy(f))
            rows.append(WiskeRow(n, t, slack, gap2, c, gap2 <= slack + c + TOL))
    return rows
