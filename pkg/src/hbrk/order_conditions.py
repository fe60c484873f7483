"""Rooted trees, elementary differentials and Runge-Kutta order conditions.

Trees are stored canonically: children are sorted in descending order of
``(order, children...)`` so structurally equal trees compare equal and print
the same, e.g. ``[[•],•]``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import CapabilityError, IndeterminateOrderError
from .integrate import Field, reference_solve, rk_step
from .tableau import ButcherTableau

__all__ = [
    "RootedTree",
    "LEAF",
    "MAX_TREE_ORDER",
    "TreeCapacityError",
    "parse_tree",
    "enumerate_trees",
    "alpha",
    "tree_density",
    "TensorOracle",
    "linear_oracle",
    "elementary_differential",
    "solution_derivative",
    "elementary_weight",
    "OrderReport",
    "check_order",
    "max_certified_order",
    "measured_order",
]

MAX_TREE_ORDER = 8
ORDER_CONDITION_TOL = 1e-10


class TreeCapacityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RootedTree:
    children: tuple["RootedTree", ...] = ()
    order: int = field(init=False)
    _key: tuple = field(init=False, repr=False)

    def __post_init__(self):
        kids = tuple(sorted(self.children, key=lambda t: t._key, reverse=True))
        object.__setattr__(self, "children", kids)
        object.__setattr__(self, "order", 1 + sum(c.order for c in kids))
        object.__setattr__(self, "_key", (self.order, tuple(c._key for c in kids)))

    def __eq__(self, other):
        if not isinstance(other, RootedTree):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other):
        return self._key < other._key

    def __str__(self):
        if not self.children:
            return "•"
        return "[" + ",".join(str(c) for c in self.children) + "]"

    def __repr__(self):
        return f"RootedTree({self})"

    @property
    def out_degree(self) -> int:
        return max([len(self.children)] + [c.out_degree for c in self.children])


LEAF = RootedTree()


def parse_tree(text: str) -> RootedTree:
    """Inverse of ``str(tree)``; ``*`` is accepted in place of ``•``."""
    s = text.replace(" ", "").replace("*", "•")
    pos = 0

    def node():
        nonlocal pos
        if pos < len(s) and s[pos] == "•":
            pos += 1
            return LEAF
        if pos >= len(s) or s[pos] != "[":
            raise ValueError(f"bad tree notation {text!r} at position {pos}")
        pos += 1
        kids = [node()]
        while pos < len(s) and s[pos] == ",":
            pos += 1
            kids.append(node())
        if pos >= len(s) or s[pos] != "]":
            raise ValueError(f"bad tree notation {text!r}: expected ']' at position {pos}")
        pos += 1
        return RootedTree(tuple(kids))

    tree = node()
    if pos != len(s):
        raise ValueError(f"trailing characters in tree notation {text!r}")
    return tree


@lru_cache(maxsize=None)
def _trees(q: int) -> tuple[RootedTree, ...]:
    if q == 1:
        return (LEAF,)
    pool = [t for n in range(1, q) for t in _trees(n)]

    def forests(total, max_idx):
        # multisets of pool trees with non-increasing pool index, sizes summing to total
        if total == 0:
            yield ()
            return
        for i in range(max_idx, -1, -1):
            t = pool[i]
            if t.order <= total:
                for rest in forests(total - t.order, i):
                    yield (t,) + rest

    return tuple(sorted(RootedTree(f) for f in forests(q - 1, len(pool) - 1)))


def enumerate_trees(q: int) -> tuple[RootedTree, ...]:
    """All non-isomorphic rooted trees with ``q`` nodes, in ascending canonical order."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if q > MAX_TREE_ORDER:
        raise TreeCapacityError(f"q={q} exceeds the enumeration cap {MAX_TREE_ORDER}")
    return _trees(q)


@lru_cache(maxsize=None)
def alpha(tree: RootedTree) -> int:
    """Number of times the elementary differential of ``tree`` occurs in the (|tree|-1)-th derivative of F."""
    num = math.factorial(tree.order - 1)
    den = 1
    for c in tree.children:
        num *= alpha(c)
        den *= math.factorial(c.order)
    for mult in Counter(tree.children).values():
        den *= math.factorial(mult)
    return num // den


@lru_cache(maxsize=None)
def tree_density(tree: RootedTree) -> int:
    out = tree.order
    for c in tree.children:
        out *= tree_density(c)
    return out


# -- elementary differentials ---------------------------------------------------


@dataclass(frozen=True)
class TensorOracle:
    """Access to a vector field and the action of its derivative tensors.

    ``derivative(m, y, dirs)`` must return the m-th derivative of ``field`` at
    ``y`` applied to the ``m`` vectors in ``dirs``; it must be symmetric and
    multilinear in ``dirs``.
    """

    field: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[int, np.ndarray, Sequence[np.ndarray]], np.ndarray]
    max_order: int


def linear_oracle(A) -> TensorOracle:
    A = np.asarray(A, dtype=float)

    def derivative(m, y, dirs):
        if m == 1:
            return A @ np.asarray(dirs[0], dtype=float)
        return np.zeros(A.shape[0])

    return TensorOracle(lambda y: A @ np.asarray(y, dtype=float), derivative, max_order=10**9)


def elementary_differential(tree: RootedTree, oracle: TensorOracle, y, _memo=None) -> np.ndarray:
    if tree.out_degree > oracle.max_order:
        raise CapabilityError(
            f"tree {tree} needs derivative order {tree.out_degree}, oracle supports {oracle.max_order}"
        )
    memo = {} if _memo is None else _memo
    if tree in memo:
        return memo[tree]
    y = np.asarray(y, dtype=float)
    if not tree.children:
        out = np.asarray(oracle.field(y), dtype=float)
    else:
        args = [elementary_differential(c, oracle, y, memo) for c in tree.children]
        out = np.asarray(oracle.derivative(len(args), y, args), dtype=float)
    memo[tree] = out
    return out


def solution_derivative(q: int, oracle: TensorOracle, y) -> np.ndarray:
    """q-th time derivative of the exact flow through ``y``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    memo = {}
    total = None
    for tree in enumerate_trees(q):
        term = alpha(tree) * elementary_differential(tree, oracle, y, memo)
        total = term if total is None else total + term
    return total


# -- order conditions ---------------------------------------------------------------


def _stage_weights(tableau: ButcherTableau, tree: RootedTree, memo) -> np.ndarray:
    if tree in memo:
        return memo[tree]
    u = np.ones(tableau.stages)
    for c in tree.children:
        u = u * (tableau.a @ _stage_weights(tableau, c, memo))
    memo[tree] = u
    return u


def elementary_weight(tableau: ButcherTableau, tree: RootedTree) -> float:
    return float(tableau.b @ _stage_weights(tableau, tree, {}))


class OrderReport(NamedTuple):
    ok: bool
    violations: list

    def __bool__(self):
        return self.ok


def check_order(tableau: ButcherTableau, s: int, tol: float = ORDER_CONDITION_TOL) -> OrderReport:
    """Check every order condition for trees with at most ``s`` nodes.

    ``violations`` holds ``(tree, weight, 1/density)`` for each failed condition.
    """
    memo = {}
    bad = []
    for q in range(1, s + 1):
        for tree in enumerate_trees(q):
            phi = float(tableau.b @ _stage_weights(tableau, tree, memo))
            target = 1.0 / tree_density(tree)
            if abs(phi - target) > tol:
                bad.append((tree, phi, target))
    return OrderReport(not bad, bad)


def max_certified_order(tableau: ButcherTableau, cap: int = MAX_TREE_ORDER) -> int:
    s = 0
    while s < cap and check_order(tableau, s + 1).ok:
        s += 1
    return s


def measured_order(
    tableau: ButcherTableau,
    field: Field,
    y0,
    t_end: float,
    k_range: tuple[int, int] = (3, 8),
    ref_tol: float = 1e-13,
    noise_floor: float = 1e-11,
) -> float:
    """Least-squares slope of log(global error) against log(h) for h = t_end/2**k.

    Samples with error below ``noise_floor`` are dropped.
    """
    ref = reference_solve(field, y0, t_end, tol=ref_tol)
    hs, errs = [], []
    for k in range(k_range[0], k_range[1] + 1):
        n = 2**k
        h = t_end / n
        y = np.asarray(y0, dtype=float)
        for _ in range(n):
            y = rk_step(tableau, field, y, h)
        err = float(np.max(np.abs(y - ref)))
        if err > noise_floor:
            hs.append(h)
            errs.append(err)
    if len(hs) < 2:
        raise IndeterminateOrderError(
            f"only {len(hs)} error samples above the noise floor {noise_floor:g}"
        )
    slope, _ = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(slope)
