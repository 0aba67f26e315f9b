"""Least-squares projection of a label vector onto the order tree.

``adapted_irt`` is the fast path: one descending sort of the leaves followed by
block merging. ``brute_force_projection`` enumerates active constraint sets and is
kept only as an independent check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .types import LabelDistribution, OrderTree

BRUTE_FORCE_MAX_C = 12


@dataclass(frozen=True)
class BlockPartition:
    """Blocks of labels forced to a common value.

    Block ids are the index of the node that opened the block: ``root``,
    ``second`` or the leaf itself for singleton leaves.
    """

    block_of: dict[int, int]
    block_value: dict[int, float]
    block_size: dict[int, int]

    def members(self, block: int) -> list[int]:
        return sorted(k for k, b in self.block_of.items() if b == block)


@dataclass(frozen=True)
class IsotonicResult:
    calibrated: LabelDistribution
    blocks: BlockPartition
    violations_found: int


class _Block:
    """Running block with an exactly rounded sum.

    Keeps Shewchuk partials so ``mean`` is fsum(members) / size no matter the
    insertion order; the merge test and the recovered output use the same bits.
    """

    __slots__ = ("partials", "size")

    def __init__(self, x):
        self.partials = [float(x)]
        self.size = 1

    def add(self, x):
        x = float(x)
        kept = 0
        for y in self.partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                self.partials[kept] = lo
                kept += 1
            x = hi
        del self.partials[kept:]
        self.partials.append(x)
        self.size += 1

    def absorb(self, other: "_Block"):
        for p in other.partials:
            self.add(p)
        self.size += other.size - len(other.partials)

    @property
    def mean(self) -> float:
        return math.fsum(self.partials) / self.size


def _check_dims(soft: LabelDistribution, tree: OrderTree) -> None:
    if len(soft) != tree.size:
        raise ValueError(f"soft label has {len(soft)} entries but the order tree has {tree.size} nodes")


def count_violations(soft: LabelDistribution, tree: OrderTree) -> int:
    _check_dims(soft, tree)
    v = soft.values
    return sum(1 for i, j in tree.edges if v[i] < v[j])


def adapted_irt(soft: LabelDistribution, tree: OrderTree) -> IsotonicResult:
    """Project ``soft`` onto {m : m[root] >= m[second] >= m[leaf] for every leaf}.

    Returns the unique minimizer of the squared error. The output keeps the
    input's space tag; callers normally pass probabilities.
    """
    _check_dims(soft, tree)
    v = soft.values
    root, second = tree.root, tree.second
    leaves = np.asarray(tree.leaves, dtype=np.intp)
    # stable sort on the negated values: ties keep ascending label order
    leaves = leaves[np.argsort(-v[leaves], kind="stable")]
    leaf_vals = v[leaves]
    n_leaves = leaves.shape[0]

    block2 = _Block(v[second])
    i = 0
    while i < n_leaves and block2.mean < leaf_vals[i]:
        block2.add(leaf_vals[i])
        i += 1
    merges = block2.size - 1
    absorbed_by_second = i

    block1 = _Block(v[root])
    merged_top = False
    if block1.mean < block2.mean:
        block1.absorb(block2)
        merges += 1
        merged_top = True
        while i < n_leaves and block1.mean < leaf_vals[i]:
            block1.add(leaf_vals[i])
            i += 1
            merges += 1

    out = v.copy()
    block_of = {k: k for k in range(v.shape[0])}
    block_value = {k: float(v[k]) for k in range(v.shape[0])}
    block_size = dict.fromkeys(range(v.shape[0]), 1)

    if merged_top:
        head, block, members = root, block1, [root, second, *leaves[:i].tolist()]
    else:
        head, block, members = second, block2, [second, *leaves[:absorbed_by_second].tolist()]
    if block.size > 1:
        value = block.mean
        out[members] = value
        for k in members:
            if k != head:
                block_of[k] = head
                del block_value[k], block_size[k]
        block_value[head], block_size[head] = value, block.size

    return IsotonicResult(
        calibrated=LabelDistribution(out, soft.space),
        blocks=BlockPartition(block_of, block_value, block_size),
        violations_found=merges,
    )


def _components(c: int, edges: list[tuple[int, int]]) -> list[int]:
    parent = list(range(c))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return [find(k) for k in range(c)]


def brute_force_projection(soft: LabelDistribution, tree: OrderTree, tol: float = 1e-12) -> LabelDistribution:
    """Exhaustive active-set solve of the same projection.

    Every subset of tree edges is tried as the set of tight constraints. Tight
    edges glue labels into components, each set to its members' mean, and the
    feasible candidate with least squared error wins. Exponential in c.
    """
    _check_dims(soft, tree)
    c = len(soft)
    if c > BRUTE_FORCE_MAX_C:
        raise ValueError(f"brute force projection refuses c={c} > {BRUTE_FORCE_MAX_C}")
    v = soft.values
    edges = tree.edges
    best, best_err = None, np.inf
    for r in range(len(edges) + 1):
        for active in itertools.combinations(edges, r):
            comp = np.asarray(_components(c, list(active)))
            cand = np.empty(c)
            for label in np.unique(comp):
                members = comp == label
                cand[members] = math.fsum(v[members]) / members.sum()
            if any(cand[i] < cand[j] - tol for i, j in edges):
                continue
            err = float(np.sum((cand - v) ** 2))
            if err < best_err:
                best, best_err = cand, err
    return LabelDistribution(best, soft.space)
