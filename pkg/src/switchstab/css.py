"""Constrained switched systems and bounds on their joint spectral radius.

Products follow the switching order: the word ``s0 s1 ... s_{k-1}`` induces
``A_{s_{k-1}} ... A_{s1} A_{s0}``, so the first symbol is applied first.

Upper bounds ``rho_hat_k`` (largest ``||A_w||^(1/k)`` over accepted words)
and lower bounds ``rho_k`` (largest ``rho(A_c)^(1/k)`` over accepted cycles)
are computed exactly by a batched depth-first branch and bound over the
paths of the automaton.  A prefix ``p`` ending at node ``v`` with ``j``
symbols still to go is discarded when ``||A_p|| * S_j(v)`` cannot beat the
target, where ``S_j(v)`` bounds the norm of every length-``j`` product
readable from ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .automaton import (
    Automaton,
    Cycle,
    EnumerationBudgetExceeded,
    Word,
    accepts,
    format_word,
)
from .linalg import as_matrix, batch_norm2, batch_spectral_radius

#: Default cap on states expanded by one bound computation.
STATE_BUDGET = 10**7
#: ``certify_admissible`` requires ``rho_hat_k < 1 - CERT_TOL``.
CERT_TOL = 1e-9

SCHEMA = "css/1"
_CHUNK = 1 << 14
_LOOKAHEAD = 2


class WordNotAccepted(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Css:
    """``S = <modes, graph>``: ``m`` square ``n x n`` modes and an automaton on ``1..m``."""

    modes: tuple[np.ndarray, ...]
    graph: Automaton
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        modes = tuple(as_matrix(a) for a in self.modes)
        if not modes:
            raise ValueError("a CSS needs at least one mode")
        n = modes[0].shape[0]
        for a in modes:
            if a.shape != (n, n):
                raise ValueError("all modes must be square and share one dimension")
        if self.graph.m != len(modes):
            raise ValueError(
                f"automaton has {self.graph.m} symbols but {len(modes)} modes given"
            )
        for a in modes:
            a.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        if self.names is not None and len(self.names) != len(modes):
            raise ValueError("one name per mode")

    @property
    def n(self) -> int:
        return self.modes[0].shape[0]

    @property
    def m(self) -> int:
        return len(self.modes)

    @property
    def is_empty(self) -> bool:
        return self.graph.is_empty

    def with_graph(self, g: Automaton) -> "Css":
        return Css(self.modes, g, self.names)

    def mode(self, label: int) -> np.ndarray:
        return self.modes[label - 1]

    @classmethod
    def from_json(cls, data: dict) -> "Css":
        schema = data.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ValueError(f"unsupported css schema {schema!r}")
        modes = tuple(np.array(a, dtype=float) for a in data["modes"])
        if "automaton" in data:
            g = Automaton.from_json(data["automaton"])
        else:
            g = Automaton.full_shift(len(modes))
        names = tuple(data["names"]) if data.get("names") else None
        return cls(modes, g, names)

    def to_json(self) -> dict:
        out = {
            "schema": SCHEMA,
            "modes": [a.tolist() for a in self.modes],
            "automaton": self.graph.to_json(),
        }
        if self.names is not None:
            out["names"] = list(self.names)
        return out


@dataclass
class BoundReport:
    k: int
    upper: float
    lower: float
    witness_cycle: Cycle | None = None
    upper_word: Word | None = None

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "upper": self.upper,
            "lower": self.lower,
            "witness_cycle": None if self.witness_cycle is None else str(self.witness_cycle),
            "upper_word": None if self.upper_word is None else format_word(self.upper_word),
        }


@dataclass
class Certificate:
    """Machine-checkable stability evidence: ``rho_hat_k < 1`` in a weighted norm.

    ``weight`` is ``None`` (plain spectral norm), a shared matrix ``T`` for
    the induced norm ``||T A T^-1||_2``, or per-node matrices.
    """

    k: int
    value: float
    weight: object = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"k": self.k, "rho_hat_k": self.value, "weight": weight_to_json(self.weight)}

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        return cls(int(data["k"]), float(data["rho_hat_k"]), weight_from_json(data.get("weight")))


def induced_product(s: Css, word: Sequence[int], check: bool = True) -> np.ndarray:
    """``A_{s_{k-1}} ... A_{s_0}`` for an accepted word."""
    if check and not accepts(s.graph, word):
        raise WordNotAccepted(f"word {format_word(word)} is not accepted")
    out = np.eye(s.n)
    for sym in word:
        out = s.mode(sym) @ out
    return out


def cycle_growth(s: Css, word: Sequence[int]) -> float:
    """``rho(A_c)^(1/k)`` for the cycle word ``c`` (no acceptance check)."""
    from .linalg import spectral_radius

    return spectral_radius(induced_product(s, word, check=False)) ** (1.0 / len(word))


# ---------------------------------------------------------------------------
# weighted norms
#
# A weight is ``None`` (plain spectral norm), one invertible matrix ``T``
# shared by all nodes, or a mapping node -> ``T_v``.  Along an edge
# ``(u, v, s)`` the weighted mode is ``T_v A_s T_u^-1``; products telescope
# to ``T_vk A_w T_v0^-1`` so per-node weights bound the same growth rate.


def node_weights(s: Css, weight) -> dict[str, np.ndarray] | None:
    if weight is None:
        return None
    if isinstance(weight, dict):
        missing = set(s.graph.nodes) - set(weight)
        if missing:
            raise ValueError(f"no weight for nodes {sorted(missing)[:3]}")
        return {v: as_matrix(weight[v]) for v in s.graph.nodes}
    t = as_matrix(weight)
    return {v: t for v in s.graph.nodes}


def edge_matrices(s: Css, edges: Sequence, weight=None) -> np.ndarray:
    """Stack of (weighted) mode matrices, one per edge."""
    if not len(edges):
        return np.zeros((0, s.n, s.n))
    mats = np.stack([s.mode(e[2]) for e in edges])
    w = node_weights(s, weight)
    if w is None:
        return mats
    inv = {v: np.linalg.inv(t) for v, t in w.items()}
    return np.stack([w[e[1]] @ a @ inv[e[0]] for e, a in zip(edges, mats)])


def weight_to_json(weight):
    if weight is None:
        return None
    if isinstance(weight, dict):
        return {"per_node": {v: np.asarray(t).tolist() for v, t in weight.items()}}
    return {"shared": np.asarray(weight).tolist()}


def weight_from_json(data):
    if data is None:
        return None
    if "per_node" in data:
        return {v: np.array(t, dtype=float) for v, t in data["per_node"].items()}
    return np.array(data["shared"], dtype=float)


# ---------------------------------------------------------------------------
# path search engine


class _PathSearch:
    """Batched branch and bound over length-``k`` paths of ``s.graph``."""

    def __init__(self, s: Css, weight=None, budget: int = STATE_BUDGET):
        g = s.graph
        self.g = g
        self.budget = budget
        self.expanded = 0
        self.nv = len(g.nodes)
        idx = g.index
        src = np.array([idx[e[0]] for e in g.edges], dtype=np.int64)
        order = np.argsort(src, kind="stable")
        edges = [g.edges[i] for i in order]
        self.out_dst = np.array([idx[e[1]] for e in edges], dtype=np.int64)
        self.out_lab = np.array([e[2] - 1 for e in edges], dtype=np.int64)
        self.edge_mats = edge_matrices(s, edges, weight)
        deg = np.bincount(src, minlength=self.nv) if len(src) else np.zeros(self.nv, int)
        self.deg = deg.astype(np.int64)
        self.ptr = np.concatenate([[0], np.cumsum(self.deg)[:-1]]).astype(np.int64)
        self.n = s.n
        self._tables: dict[int, np.ndarray] = {}
        self._reach: dict[int, np.ndarray] = {}

    # suffix bounds -------------------------------------------------------

    def _short_paths(self, length: int):
        """All (start, end, product-norm) triples for paths of the given length."""
        starts = np.arange(self.nv)
        nodes = starts.copy()
        prods = np.broadcast_to(np.eye(self.n), (self.nv, self.n, self.n)).copy()
        for _ in range(length):
            rep, nodes, eid = self._children(nodes)
            starts = starts[rep]
            prods = np.matmul(self.edge_mats[eid], prods[rep])
        return starts, nodes, batch_norm2(prods)

    def suffix_table(self, k: int) -> np.ndarray:
        """``S[j, v]`` bounds ``||A_p||`` over length-``j`` paths ``p`` from ``v``."""
        if k in self._tables:
            return self._tables[k]
        table = np.zeros((k + 1, self.nv))
        table[0] = 1.0
        blocks = [self._short_paths(l) for l in range(1, min(_LOOKAHEAD, k) + 1)]
        for j in range(1, k + 1):
            best = np.full(self.nv, np.inf)
            for l, (st, en, nrm) in enumerate(blocks, start=1):
                if l > j:
                    break
                cand = np.zeros(self.nv)
                np.maximum.at(cand, st, nrm * table[j - l][en])
                best = np.minimum(best, cand)
            table[j] = np.where(np.isfinite(best), best, 0.0)
        self._tables[k] = table
        return table

    def reach(self, j: int) -> np.ndarray:
        """Boolean matrix: node ``w`` reaches ``v`` by a walk of exactly ``j`` steps."""
        if j not in self._reach:
            b = np.zeros((self.nv, self.nv), dtype=bool)
            srcs = np.repeat(np.arange(self.nv), self.deg)
            b[srcs, self.out_dst] = True
            r = np.eye(self.nv, dtype=bool)
            for _ in range(j):
                r = (r.astype(np.int64) @ b.astype(np.int64)) > 0
            self._reach[j] = r
        return self._reach[j]

    # expansion -------------------------------------------------------------

    def _children(self, nodes: np.ndarray):
        counts = self.deg[nodes]
        total = int(counts.sum())
        rep = np.repeat(np.arange(len(nodes)), counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        eid = self.ptr[nodes][rep] + offs
        return rep, self.out_dst[eid], eid

    def run(self, k: int, target: float, *, closed: bool, collect: bool,
            stop_at_first: bool, strict: bool):
        """Search length-``k`` paths whose value reaches ``target``.

        The value of an open path is ``||A_p||``; of a closed walk,
        ``rho(A_p)``.  With ``collect`` every hit is returned; otherwise the
        target rises to the incumbent so the maximiser is found.  Returns
        ``(best_value, best_word, best_nodes, hits)``.
        """
        table = self.suffix_table(k)
        best_val, best_word, best_nodes = -1.0, None, None
        hits = []
        n = self.n
        nv = self.nv
        stack = []
        init_nodes = np.arange(nv)
        eye = np.broadcast_to(np.eye(n), (nv, n, n)).copy()
        stack.append((init_nodes.copy(), eye, np.zeros((nv, 0), np.int64),
                      init_nodes[:, None].copy()))
        thr = target

        def beats(vals, t):
            return vals > t if strict else vals >= t

        while stack:
            nodes, prods, words, paths = stack.pop()
            d = words.shape[1]
            if d == k:
                if closed:
                    keep = paths[:, 0] == nodes
                    vals = batch_spectral_radius(prods[keep])
                    words, paths = words[keep], paths[keep]
                else:
                    vals = batch_norm2(prods)
                ok = np.nonzero(beats(vals, thr))[0]
                for i in ok:
                    if collect:
                        hits.append((float(vals[i]), tuple(int(x) + 1 for x in words[i]),
                                     tuple(int(x) for x in paths[i])))
                    if vals[i] > best_val:
                        best_val = float(vals[i])
                        best_word = tuple(int(x) + 1 for x in words[i])
                        best_nodes = tuple(int(x) for x in paths[i])
                if len(ok) and not collect:
                    thr = max(thr, best_val)
                    if stop_at_first:
                        return best_val, best_word, best_nodes, hits
                continue
            rep, child, eid = self._children(nodes)
            self.expanded += len(rep)
            if self.expanded > self.budget:
                raise EnumerationBudgetExceeded(
                    f"expanded more than {self.budget} states at depth {k}"
                )
            if not len(rep):
                continue
            new = np.matmul(self.edge_mats[eid], prods[rep])
            lab = self.out_lab[eid]
            remaining = k - d - 1
            bound = batch_norm2(new) * table[remaining][child]
            keep = bound >= thr * (1 - 1e-12) if (collect or not strict) else bound > thr
            if not collect and best_val >= 0:
                keep &= bound > best_val * (1 + 1e-12)
            if closed:
                keep &= self.reach(remaining)[child, paths[rep, 0]]
            sel = np.nonzero(keep)[0]
            if not len(sel):
                continue
            rep, child, lab, new = rep[sel], child[sel], lab[sel], new[sel]
            nwords = np.concatenate([words[rep], lab[:, None]], axis=1)
            npaths = np.concatenate([paths[rep], child[:, None]], axis=1)
            for lo in range(((len(sel) - 1) // _CHUNK) * _CHUNK, -1, -_CHUNK):
                hi = lo + _CHUNK
                stack.append((child[lo:hi], new[lo:hi], nwords[lo:hi], npaths[lo:hi]))
        return best_val, best_word, best_nodes, hits

    def node_names(self, path: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.g.nodes[i] for i in path)


# ---------------------------------------------------------------------------
# bounds


def max_norm_word(s: Css, k: int, weight=None, budget: int = STATE_BUDGET):
    """``(max ||A_w||, w)`` over accepted words of length ``k``."""
    if k < 1:
        raise ValueError("k must be positive")
    if s.is_empty:
        return 0.0, None
    search = _PathSearch(s, weight, budget)
    val, word, _, _ = search.run(k, 0.0, closed=False, collect=False,
                                 stop_at_first=False, strict=False)
    return max(val, 0.0), word


def rho_hat_k(s: Css, k: int, weight=None, budget: int = STATE_BUDGET) -> float:
    """``max_{w in G_k} ||A_w||^(1/k)``; 0 for the empty system."""
    val, _ = max_norm_word(s, k, weight, budget)
    return val ** (1.0 / k)


def max_cycle(s: Css, k: int, weight=None, budget: int = STATE_BUDGET):
    """Largest ``rho(A_c)`` over anchored cycles of length ``k`` and a witness."""
    if k < 1:
        raise ValueError("k must be positive")
    if s.is_empty:
        return 0.0, None
    search = _PathSearch(s, weight, budget)
    val, word, nodes, _ = search.run(k, 0.0, closed=True, collect=False,
                                     stop_at_first=False, strict=False)
    if word is None:
        return 0.0, None
    return val, Cycle(word, search.node_names(nodes))


def rho_lower_k(s: Css, k: int, weight=None, budget: int = STATE_BUDGET) -> BoundReport:
    """Bound report at depth ``k``: ``rho_k`` with its witness, and ``rho_hat_k``.

    The empty system (or one without length-``k`` cycles) reports
    ``lower = 0`` and no witness.
    """
    val, cyc = max_cycle(s, k, weight, budget)
    up, word = max_norm_word(s, k, weight, budget)
    return BoundReport(k, up ** (1.0 / k), val ** (1.0 / k), cyc, word)


def unstable_cycles(s: Css, k: int, threshold: float, weight=None,
                    budget: int = STATE_BUDGET) -> list[tuple[float, Cycle]]:
    """Every anchored length-``k`` cycle with ``rho(A_c)^(1/k) > threshold``."""
    if s.is_empty:
        return []
    search = _PathSearch(s, weight, budget)
    _, _, _, hits = search.run(k, threshold ** k, closed=True, collect=True,
                               stop_at_first=False, strict=True)
    out = [(v ** (1.0 / k), Cycle(w, search.node_names(p))) for v, w, p in hits]
    out.sort(key=lambda t: (t[1].nodes[0], t[1].word))
    return out


def exceeds(s: Css, k: int, level: float, weight=None, budget: int = STATE_BUDGET):
    """Some accepted length-``k`` word with ``||A_w|| >= level**k``, or ``None``."""
    search = _PathSearch(s, weight, budget)
    val, word, _, _ = search.run(k, level ** k, closed=False, collect=False,
                                 stop_at_first=True, strict=False)
    return None if word is None else (val ** (1.0 / k), word)


def try_certify(s: Css, k: int, weight=None, tol: float = CERT_TOL,
                budget: int = STATE_BUDGET) -> Certificate | None:
    """Certificate at depth ``k`` if ``rho_hat_k < 1 - tol``, else ``None``."""
    if s.is_empty:
        return Certificate(k, 0.0, weight)
    if exceeds(s, k, 1.0 - tol, weight, budget) is not None:
        return None
    value = rho_hat_k(s, k, weight, budget)
    return Certificate(k, value, weight)


def find_certificate(s: Css, k_max: int, weights: Sequence = (None,),
                     tol: float = CERT_TOL, budget: int = STATE_BUDGET) -> Certificate | None:
    """First ``(k, weight)`` with ``rho_hat_k < 1 - tol``, scanning ``k`` outermost."""
    for k in range(1, k_max + 1):
        for w in weights:
            cert = try_certify(s, k, w, tol, budget)
            if cert is not None:
                return cert
    return None


def _auto_weights(s: Css) -> list:
    from .norms import candidate_weights, fit_multinorm

    weights = [None] + [w for w in candidate_weights(s) if w is not None]
    try:
        fitted, value = fit_multinorm(s, init=weights[-1], depth=1)
        if np.isfinite(value):
            weights.append(fitted)
    except EnumerationBudgetExceeded:
        pass
    return weights


def certify_admissible(s: Css, k_max: int, weight="auto", tol: float = CERT_TOL,
                       budget: int = STATE_BUDGET) -> bool:
    """True iff ``rho_hat_k < 1 - tol`` for some ``k <= k_max``.

    ``weight="auto"`` tries the spectral norm, quadratic norms from discrete
    Lyapunov solutions, and a fitted per-node norm; any of them proves
    stability.  ``False`` means "not certified", not "unstable".  Exceeding
    the search budget raises :class:`EnumerationBudgetExceeded`.
    """
    if s.is_empty:
        return True
    weights = _auto_weights(s) if isinstance(weight, str) and weight == "auto" else [weight]
    return find_certificate(s, k_max, weights, tol, budget) is not None


def verify_certificate(s: Css, cert: Certificate, tol: float = CERT_TOL) -> bool:
    """Recompute ``rho_hat_k`` in the certificate's norm and compare with ``1 - tol``."""
    if s.is_empty:
        return True
    return rho_hat_k(s, cert.k, cert.weight) < 1.0 - tol
