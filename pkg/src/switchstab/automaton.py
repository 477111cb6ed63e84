"""Labelled directed multigraphs and the symbolic-dynamics toolbox.

An :class:`Automaton` is an immutable value.  Node ids are strings and
edges are ``(src, dst, label)`` triples with ``label`` in ``1..m``.  The
edge tuple is kept sorted by ``(src, dst, label)`` so every derived
quantity (enumeration order, tie breaking, JSON output) is reproducible.

Cycle convention: :func:`cycles_k` reports *anchored* closed walks, one
per ``(start node, label word)`` pair.  A closed walk of length ``k``
therefore appears once for each of its ``k`` rotations that starts at a
distinct node.  Growth rates are unaffected by the convention; counts are.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .linalg import spectral_radius

Edge = tuple[str, str, int]
Word = tuple[int, ...]

#: Default cap on ``|V| * m**k`` for word/cycle enumeration.
ENUM_BUDGET = 10**7
#: Default cap on the number of nodes a lift may create.
LIFT_NODE_CAP = 10**6

SCHEMA = "automaton/1"


class EnumerationBudgetExceeded(RuntimeError):
    """Enumeration would expand more states than the configured budget."""


class EdgeNotFound(KeyError):
    pass


@dataclass(frozen=True)
class Automaton:
    """Labelled directed multigraph ``G = (V, E)`` over symbols ``1..m``.

    Construction canonicalises: duplicate edges are dropped and nodes and
    edges are sorted.  The degree condition (every node has an incoming
    and an outgoing edge) is *not* enforced here; use
    :func:`validate_and_trim`.
    """

    m: int
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        nodes = tuple(sorted(set(str(v) for v in self.nodes)))
        edges = tuple(sorted({(str(s), str(d), int(l)) for s, d, l in self.edges}))
        known = set(nodes)
        for s, d, l in edges:
            if s not in known or d not in known:
                raise ValueError(f"edge {(s, d, l)} references an unknown node")
            if not 1 <= l <= self.m:
                raise ValueError(f"label {l} outside 1..{self.m}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    # -- construction helpers -------------------------------------------

    @classmethod
    def full_shift(cls, m: int, node: str = "q") -> "Automaton":
        """Single node carrying one self loop per symbol."""
        return cls(m, (node,), tuple((node, node, j) for j in range(1, m + 1)))

    @classmethod
    def from_json(cls, data: dict) -> "Automaton":
        schema = data.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ValueError(f"unsupported automaton schema {schema!r}")
        edges = [tuple(e) for e in data["edges"]]
        for e in edges:
            if len(e) != 3:
                raise ValueError(f"malformed edge {e!r}")
        return cls(int(data["m"]), tuple(data["nodes"]), tuple(edges))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "m": self.m,
            "nodes": list(self.nodes),
            "edges": [list(e) for e in self.edges],
        }

    # -- cached views -----------------------------------------------------

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.nodes)}

    @cached_property
    def out_edges(self) -> dict[str, tuple[Edge, ...]]:
        out = defaultdict(list)
        for e in self.edges:
            out[e[0]].append(e)
        return {v: tuple(out.get(v, ())) for v in self.nodes}

    @cached_property
    def _step(self) -> dict[tuple[str, int], tuple[str, ...]]:
        step = defaultdict(list)
        for s, d, l in self.edges:
            step[(s, l)].append(d)
        return {k: tuple(v) for k, v in step.items()}

    def successors(self, v: str, label: int) -> tuple[str, ...]:
        return self._step.get((v, label), ())

    def adjacency(self) -> np.ndarray:
        """Adjacency matrix; entry ``(i, j)`` counts edges from node i to j."""
        n = len(self.nodes)
        b = np.zeros((n, n))
        for s, d, _ in self.edges:
            b[self.index[s], self.index[d]] += 1.0
        return b

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Cycle:
    """A closed walk: label word plus witness nodes ``v0..vk`` with ``v0 == vk``."""

    word: Word
    nodes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(x) for x in self.word))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.nodes) != len(self.word) + 1 or self.nodes[0] != self.nodes[-1]:
            raise ValueError("witness nodes must close a walk of the word's length")

    @property
    def edges(self) -> list[Edge]:
        return [
            (self.nodes[j], self.nodes[j + 1], self.word[j])
            for j in range(len(self.word))
        ]

    def __len__(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return format_word(self.word)

    def is_realized_in(self, g: Automaton) -> bool:
        edges = set(g.edges)
        return all(e in edges for e in self.edges)


def format_word(word: Sequence[int]) -> str:
    if all(0 <= s <= 9 for s in word):
        return "".join(str(s) for s in word)
    return "-".join(str(s) for s in word)


def parse_word(text: str) -> Word:
    text = text.strip()
    if "-" in text or "," in text:
        return tuple(int(t) for t in text.replace(",", "-").split("-") if t)
    return tuple(int(c) for c in text)


# ---------------------------------------------------------------------------
# structural operations


def validate_and_trim(g: Automaton) -> Automaton:
    """Delete nodes lacking an incoming or outgoing edge, to a fixpoint.

    The result satisfies the degree condition or is empty.
    """
    nodes = set(g.nodes)
    edges = set(g.edges)
    while True:
        has_out = {s for s, _, _ in edges}
        has_in = {d for _, d, _ in edges}
        keep = nodes & has_out & has_in
        if keep == nodes:
            break
        nodes = keep
        edges = {e for e in edges if e[0] in nodes and e[1] in nodes}
    if nodes == set(g.nodes) and len(edges) == len(g.edges):
        return g
    return Automaton(g.m, tuple(nodes), tuple(edges))


def remove_edge(g: Automaton, e: Edge) -> Automaton:
    """``G - e`` followed by trimming."""
    e = (str(e[0]), str(e[1]), int(e[2]))
    if e not in set(g.edges):
        raise EdgeNotFound(e)
    return validate_and_trim(Automaton(g.m, g.nodes, tuple(x for x in g.edges if x != e)))


def remove_edges(g: Automaton, es: Iterable[Edge]) -> Automaton:
    drop = {(str(s), str(d), int(l)) for s, d, l in es}
    missing = drop - set(g.edges)
    if missing:
        raise EdgeNotFound(sorted(missing)[0])
    return validate_and_trim(Automaton(g.m, g.nodes, tuple(x for x in g.edges if x not in drop)))


def is_right_resolving(g: Automaton) -> bool:
    for v in g.nodes:
        labels = [l for _, _, l in g.out_edges[v]]
        if len(labels) != len(set(labels)):
            return False
    return True


def is_irreducible(g: Automaton) -> bool:
    """True iff the graph is a single strongly connected component."""
    if g.is_empty:
        return False
    n_comp, _ = connected_components(g.adjacency(), directed=True, connection="strong")
    return n_comp == 1


def _path_name(parts: Sequence) -> str:
    return "[" + "|".join(str(p) for p in parts) + "]"


def lift(g: Automaton, k: int, node_cap: int = LIFT_NODE_CAP) -> Automaton:
    """Path-dependent lift of degree ``k``.

    Nodes are the length-``k`` paths ``v0 s0 v1 ... s_{k-1} vk`` of ``g``;
    every length-``k+1`` path contributes the edge ``(u-, u+, s_k)``.
    ``lift(g, 0)`` has the same nodes and edges as ``g``.
    """
    if k < 0:
        raise ValueError("lift degree must be nonnegative")
    if k == 0:
        return validate_and_trim(g)
    b = g.adjacency()
    n_paths = float(np.sum(np.linalg.matrix_power(b, k))) if b.size else 0.0
    if n_paths > node_cap:
        raise EnumerationBudgetExceeded(
            f"lift of degree {k} would create {n_paths:.0f} nodes (cap {node_cap})"
        )
    # paths of length k as flat tuples (v0, s0, v1, ..., vk)
    paths: list[tuple] = [(v,) for v in g.nodes]
    for _ in range(k):
        paths = [p + (l, d) for p in paths for (_, d, l) in g.out_edges[p[-1]]]
    names = {p: _path_name(p) for p in paths}
    edges = []
    for p in paths:
        for _, d, l in g.out_edges[p[-1]]:
            q = p[2:] + (l, d)
            edges.append((names[p], names[q], l))
    return validate_and_trim(Automaton(g.m, tuple(names.values()), tuple(edges)))


def edge_shift(g: Automaton) -> Automaton:
    """Automaton on the edges of ``g``; ``(e, f)`` is labelled by ``f``'s symbol."""
    names = {e: _path_name(e) for e in g.edges}
    edges = []
    for e in g.edges:
        for f in g.out_edges[e[1]]:
            edges.append((names[e], names[f], f[2]))
    return Automaton(g.m, tuple(names.values()), tuple(edges))


# ---------------------------------------------------------------------------
# languages


def accepts(g: Automaton, word: Sequence[int]) -> bool:
    """True iff some path of ``g`` carries ``word``."""
    current = set(g.nodes)
    for s in word:
        if not current:
            return False
        current = {d for v in current for d in g.successors(v, s)}
    return bool(current)


def closed_walks(g: Automaton, word: Sequence[int]) -> list[Cycle]:
    """Every closed walk labelled ``word`` (one per start node and path)."""
    word = tuple(word)
    out = []
    for v in g.nodes:
        stack = [(v,)]
        for s in word:
            stack = [p + (d,) for p in stack for d in g.successors(p[-1], s)]
            if not stack:
                break
        out.extend(Cycle(word, p) for p in stack if p[-1] == v)
    return out


def accepts_cycle(g: Automaton, word: Sequence[int]) -> bool:
    """True iff ``word`` labels some closed walk, i.e. its repetition is accepted."""
    for v in g.nodes:
        current = {v}
        for s in word:
            current = {d for u in current for d in g.successors(u, s)}
            if not current:
                break
        if v in current:
            return True
    return False


def _check_budget(g: Automaton, k: int, budget: int) -> None:
    if k < 0:
        raise ValueError("k must be nonnegative")
    if len(g.nodes) * float(g.m) ** k > budget:
        raise EnumerationBudgetExceeded(
            f"|V| m^k = {len(g.nodes)} * {g.m}^{k} exceeds budget {budget}"
        )


def iter_words(g: Automaton, k: int) -> Iterator[tuple[Word, frozenset]]:
    """Yield ``(word, end_nodes)`` for every accepted word of length ``k``.

    Runs the subset construction on the fly, so each word appears once.
    """
    start = frozenset(g.nodes)
    if not start:
        return
    stack = [((), start)]
    while stack:
        w, cur = stack.pop()
        if len(w) == k:
            yield w, cur
            continue
        for s in range(g.m, 0, -1):
            nxt = frozenset(d for v in cur for d in g.successors(v, s))
            if nxt:
                stack.append((w + (s,), nxt))


def words_k(g: Automaton, k: int, budget: int = ENUM_BUDGET) -> set[Word]:
    """The set ``G_k`` of accepted words of length ``k``."""
    _check_budget(g, k, budget)
    return {w for w, _ in iter_words(g, k)}


def count_words(g: Automaton, k: int) -> int:
    """``|G_k|`` by dynamic programming over reachable node subsets."""
    if g.is_empty:
        return 0
    counts = {frozenset(g.nodes): 1}
    for _ in range(k):
        nxt: dict[frozenset, int] = defaultdict(int)
        for cur, c in counts.items():
            for s in range(1, g.m + 1):
                t = frozenset(d for v in cur for d in g.successors(v, s))
                if t:
                    nxt[t] += c
        counts = nxt
    return sum(counts.values())


def iter_closed_walks(g: Automaton, k: int) -> Iterator[Cycle]:
    for v in g.nodes:
        stack = [((), (v,))]
        while stack:
            w, p = stack.pop()
            if len(w) == k:
                if p[-1] == v:
                    yield Cycle(w, p)
                continue
            for _, d, l in reversed(g.out_edges[p[-1]]):
                stack.append((w + (l,), p + (d,)))


def cycles_k(g: Automaton, k: int, budget: int = ENUM_BUDGET) -> list[Cycle]:
    """Anchored cycles of length exactly ``k``, deduplicated by (start, word).

    Sorted by ``(start node, word)``.
    """
    if k < 1:
        raise ValueError("cycle length must be positive")
    _check_budget(g, k, budget)
    seen = {}
    for c in iter_closed_walks(g, k):
        seen.setdefault((c.nodes[0], c.word), c)
    return [seen[key] for key in sorted(seen)]


# ---------------------------------------------------------------------------
# entropy


def perron_root(g: Automaton) -> float:
    """Spectral radius of the adjacency matrix (0 for the empty automaton)."""
    if g.is_empty:
        return 0.0
    return spectral_radius(g.adjacency())


def entropy(g: Automaton, warn: bool = True) -> float:
    """Entropy in bits, ``log2`` of the adjacency Perron root.

    Exact for right-resolving presentations; otherwise an upper bound and a
    ``RuntimeWarning`` is issued.  Reducible graphs are fine: the value is
    the maximum over strong components.  The empty automaton, and any
    automaton whose Perron root is below 1 (no cycles), has entropy 0.
    """
    if warn and not is_right_resolving(g):
        warnings.warn(
            "automaton is not right-resolving; entropy is an upper bound",
            RuntimeWarning,
            stacklevel=2,
        )
    rho = perron_root(g)
    if rho <= 1.0:
        return 0.0
    return math.log2(rho)
