"""Shannon information measures over finite joint distributions.

Independence and dyadic tests use exact rationals. Logarithmic values are
floats; identities between them are checked at ``TOL`` bits.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from .coding import Dist

TOL = 1e-9


def log2q(p) -> float:
    """log2 of a positive rational; exact-int logs avoid float underflow."""
    if isinstance(p, Fraction):
        return math.log2(p.numerator) - math.log2(p.denominator)
    return math.log2(p)


def plogp_inv(p) -> float:
    """``p log 1/p`` with ``0 log 1/0 = 0``."""
    if p == 0:
        return 0.0
    return -float(p) * log2q(p)


@dataclass(frozen=True)
class JointDist:
    """Joint mass ``f(x, y)`` on ``x_alphabet x y_alphabet``; missing pairs have mass 0."""

    x_alphabet: tuple
    y_alphabet: tuple
    mass: Mapping

    def __post_init__(self):
        object.__setattr__(self, "x_alphabet", tuple(self.x_alphabet))
        object.__setattr__(self, "y_alphabet", tuple(self.y_alphabet))
        mass = {k: Fraction(v) for k, v in self.mass.items() if Fraction(v) != 0}
        xs, ys = set(self.x_alphabet), set(self.y_alphabet)
        for (x, y), v in mass.items():
            if x not in xs or y not in ys:
                raise ValueError(f"pair {(x, y)!r} outside the alphabets")
            if v < 0:
                raise ValueError("negative mass")
        total = sum(mass.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"joint mass sums to {total}, not 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_table(cls, x_alphabet, y_alphabet, table) -> "JointDist":
        """Build from a nested ``table[i][j]`` indexed like the alphabets."""
        mass = {(x, y): table[i][j] for i, x in enumerate(x_alphabet) for j, y in enumerate(y_alphabet)}
        return cls(x_alphabet, y_alphabet, mass)

    @classmethod
    def from_channel(cls, source: Dist, channel: Callable, y_alphabet) -> "JointDist":
        """``f(x, y) = source(x) * channel(x)(y)`` for a channel given as x -> {y: prob}."""
        mass = {}
        for x, p in source.items():
            for y, q in channel(x).items():
                mass[(x, y)] = mass.get((x, y), Fraction(0)) + p * Fraction(q)
        return cls(source.outcomes, tuple(y_alphabet), mass)

    @classmethod
    def product(cls, fx: Dist, fy: Dist) -> "JointDist":
        return cls(fx.outcomes, fy.outcomes, {(x, y): p * q for x, p in fx.items() for y, q in fy.items()})

    def __getitem__(self, pair) -> Fraction:
        return self.mass.get(pair, Fraction(0))

    def marginal_x(self) -> Dist:
        acc = {x: Fraction(0) for x in self.x_alphabet}
        for (x, _), v in self.mass.items():
            acc[x] += v
        return Dist.from_mapping(acc)

    def marginal_y(self) -> Dist:
        acc = {y: Fraction(0) for y in self.y_alphabet}
        for (_, y), v in self.mass.items():
            acc[y] += v
        return Dist.from_mapping(acc)

    def transpose(self) -> "JointDist":
        return JointDist(self.y_alphabet, self.x_alphabet, {(y, x): v for (x, y), v in self.mass.items()})

    def as_dist(self) -> Dist:
        """The joint as a distribution over pairs."""
        pairs = list(itertools.product(self.x_alphabet, self.y_alphabet))
        return Dist(tuple(pairs), tuple(self[p] for p in pairs))

    def conditional_y(self, x) -> Dist:
        """``f(. | X = x)`` over the y alphabet."""
        px = sum((self[(x, y)] for y in self.y_alphabet), Fraction(0))
        if px == 0:
            raise ValueError(f"P(X={x!r}) = 0")
        return Dist(self.y_alphabet, tuple(self[(x, y)] / px for y in self.y_alphabet))

    def conditional_x(self, y) -> Dist:
        return self.transpose().conditional_y(y)

    def map_y(self, t: Callable | Mapping) -> "JointDist":
        """Joint of ``(X, T(Y))`` for a deterministic map ``T``."""
        fn = t.__getitem__ if isinstance(t, Mapping) else t
        mass: dict = {}
        for (x, y), v in self.mass.items():
            key = (x, fn(y))
            mass[key] = mass.get(key, Fraction(0)) + v
        t_alpha = tuple(dict.fromkeys(fn(y) for y in self.y_alphabet))
        return JointDist(self.x_alphabet, t_alpha, mass)

    def is_independent(self) -> bool:
        """Exact test of ``f(x, y) == f1(x) f2(y)`` for every pair."""
        fx, fy = self.marginal_x().as_dict(), self.marginal_y().as_dict()
        return all(self[(x, y)] == fx[x] * fy[y] for x in self.x_alphabet for y in self.y_alphabet)


def entropy(dist: Dist) -> float:
    """``H = sum p log 1/p`` in bits."""
    return math.fsum(plogp_inv(p) for p in dist.probs)


def joint_entropy(j: JointDist) -> float:
    return math.fsum(plogp_inv(v) for v in j.mass.values())


def conditional_entropy(j: JointDist) -> float:
    """``H(Y | X) = sum_x f1(x) H(Y | X = x)``."""
    fx = j.marginal_x()
    return math.fsum(float(p) * entropy(j.conditional_y(x)) for x, p in fx.items() if p > 0)


def kl_divergence(f: Dist, g: Dist) -> float:
    """``D(f || g)``; ``+inf`` when ``f`` puts mass where ``g`` has none."""
    gd = g.as_dict()
    terms = []
    for x, p in f.items():
        if p == 0:
            continue
        q = gd.get(x, Fraction(0))
        if q == 0:
            return math.inf
        terms.append(float(p) * (log2q(p) - log2q(q)))
    return math.fsum(terms)


def mutual_info(j: JointDist) -> float:
    """``I(X; Y)`` by the double sum over the joint."""
    fx, fy = j.marginal_x().as_dict(), j.marginal_y().as_dict()
    return math.fsum(
        float(v) * (log2q(v) - log2q(fx[x] * fy[y])) for (x, y), v in j.mass.items()
    )


def individual_info(j: JointDist, y) -> float:
    """Information that the single outcome ``Y = y`` carries about ``X``: ``H(X) - H(X | Y = y)``.

    Can be negative; its expectation over ``y`` is ``I(X; Y)``.
    """
    if j.marginal_y()[y] == 0:
        raise ValueError(f"P(Y={y!r}) = 0")
    return entropy(j.marginal_x()) - entropy(j.conditional_x(y))


@dataclass(frozen=True)
class DPIResult:
    lhs: float
    rhs: float
    holds: bool


def data_processing_check(j: JointDist, t: Callable | Mapping) -> DPIResult:
    """Compare ``I(X; Y)`` with ``I(X; T(Y))`` for a deterministic ``T``."""
    if isinstance(t, Mapping):
        missing = [y for y in j.y_alphabet if y not in t]
        if missing:
            raise ValueError(f"T undefined on {missing!r}")
    lhs = mutual_info(j)
    rhs = mutual_info(j.map_y(t))
    return DPIResult(lhs, rhs, lhs >= rhs - TOL)


def all_maps(domain) -> list[dict]:
    """Every function from ``domain`` into itself (``|Y|^|Y|`` maps)."""
    domain = tuple(domain)
    return [dict(zip(domain, img)) for img in itertools.product(domain, repeat=len(domain))]


def binary_entropy(p) -> float:
    return plogp_inv(p) + plogp_inv(1 - p)


def epsilon_joint(eps, labelled: bool = False) -> JointDist:
    """Joint of the negative-individual-information example.

    ``P(Y=1) = eps``, ``P(X=1 | Y=0) = 1``, ``P(X=1 | Y=1) = 1/2``.  With
    ``labelled=True`` the ``Y=0`` branch emits a distinct symbol ``'1*'`` so
    that ``Y`` is recoverable from ``X``; then ``I(Y; X) = H(eps)`` and
    ``I(Y=1 : X) = H(eps) + eps - 1`` hold exactly.  In the plain binary joint
    ``I(Y=1 : X) = H(eps/2) - 1``.
    """
    eps = Fraction(eps)
    one0 = "1*" if labelled else "1"
    xs = ("0", "1", "1*") if labelled else ("0", "1")
    mass = {(one0, 0): 1 - eps, ("1", 1): eps / 2, ("0", 1): eps / 2}
    return JointDist(xs, (0, 1), mass)
