"""Layered stability oracle for constrained switched systems.

The oracle answers with a :class:`Verdict`:

* ``STABLE`` with a :class:`~switchstab.css.Certificate` (``rho_hat_k < 1``
  in some induced norm),
* ``UNSTABLE_CYCLE`` with an accepted cycle whose growth
  ``rho(A_c)^(1/k)`` exceeds ``1 - epsilon``,
* ``UNKNOWN`` when every budget ran out.

Strategies run cheapest first: exhaustive short cycles, certification at
increasing depth, exact branch and bound on longer cycles, then a seeded
beam search that extracts closed segments from high-growth walks.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .automaton import Cycle, EnumerationBudgetExceeded, accepts_cycle
from .css import (
    CERT_TOL,
    Certificate,
    Css,
    cycle_growth,
    edge_matrices,
    rho_hat_k,
    try_certify,
    unstable_cycles,
)
from .norms import candidate_weights, fit_multinorm

log = logging.getLogger(__name__)


class Outcome(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE_CYCLE = "UnstableCycle"
    UNKNOWN = "Unknown"


@dataclass
class OracleConfig:
    epsilon: float = 1e-6
    short_cycle_len: int = 3
    k_max: int = 10
    exact_cycle_len: int = 10
    max_cycle_len: int = 40
    beam_width: int = 64
    walk_budget: int = 200_000
    state_budget: int = 2_000_000
    seed: int = 0
    fit_multinorm: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.short_cycle_len < 1 or self.k_max < 0:
            raise ValueError("cycle length and certification depth must be positive")

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Verdict:
    outcome: Outcome
    cycle: Cycle | None = None
    growth: float | None = None
    certificate: Certificate | None = None
    source: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def is_stable(self) -> bool:
        return self.outcome is Outcome.STABLE

    def to_json(self) -> dict:
        out = {"outcome": self.outcome.value, "source": self.source}
        if self.cycle is not None:
            out["cycle"] = str(self.cycle)
            out["cycle_nodes"] = list(self.cycle.nodes)
            out["growth"] = self.growth
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _pick(found: list[tuple[float, Cycle]]) -> tuple[float, Cycle]:
    # largest growth; ties go to the canonical (start node, word) order
    best = max(v for v, _ in found)
    for v, c in found:
        if v >= best * (1 - 1e-12):
            return v, c
    raise AssertionError


def short_cycle_sweep(s: Css, max_len: int, eps: float,
                      budget: int = 10**7) -> list[tuple[float, Cycle]]:
    """Every anchored cycle of length ``<= max_len`` with growth ``> 1 - eps``.

    Returned as ``(growth, cycle)`` pairs ordered by length, then start node
    and word.
    """
    out = []
    for length in range(1, max_len + 1):
        out.extend(unstable_cycles(s, length, 1.0 - eps, budget=budget))
    return out


# ---------------------------------------------------------------------------
# long cycles


def _exact_cycles(s: Css, cfg: OracleConfig, weight, lengths=None) -> tuple[float, Cycle] | None:
    if lengths is None:
        lengths = range(cfg.short_cycle_len + 1, cfg.exact_cycle_len + 1)
    for length in lengths:
        try:
            found = unstable_cycles(s, length, 1.0 - cfg.epsilon, weight,
                                    budget=cfg.state_budget)
        except EnumerationBudgetExceeded:
            log.debug("exact cycle search stopped at length %d", length)
            return None
        if found:
            return _pick(found)
    return None


def _beam_cycles(s: Css, cfg: OracleConfig, weight) -> tuple[float, Cycle] | None:
    g = s.graph
    rng = np.random.default_rng(cfg.seed)
    idx = g.index
    mats = edge_matrices(s, g.edges, weight)
    out_i = [[] for _ in g.nodes]
    for (src, d, l), a in zip(g.edges, mats):
        out_i[idx[src]].append((idx[d], l, a))
    thr = 1.0 - cfg.epsilon
    nv = len(g.nodes)
    # beam entries: (node path list, word list, log-normalised product)
    beam = [([i], [], np.eye(s.n), 0.0) for i in range(nv)]
    steps = 0
    best: tuple[float, Cycle] | None = None
    for depth in range(1, cfg.max_cycle_len + 1):
        cand = []
        for path, word, prod, logscale in beam:
            for d, l, a in out_i[path[-1]]:
                new = a @ prod
                nrm = np.linalg.norm(new, 2)
                if nrm == 0:
                    continue
                steps += 1
                cand.append((path + [d], word + [l], new / nrm, logscale + np.log(nrm)))
        if not cand or steps > cfg.walk_budget:
            break
        score = np.array([c[3] / depth for c in cand])
        score = score + 1e-9 * rng.standard_normal(len(score))
        order = np.argsort(-score, kind="stable")[: cfg.beam_width]
        beam = [cand[i] for i in order]
        for path, word, _, _ in beam:
            last = path[-1]
            # closed segments ending at the current position
            for start in range(len(path) - 2, -1, -1):
                if path[start] != last:
                    continue
                seg = tuple(word[start:])
                if len(seg) <= cfg.short_cycle_len and best is not None:
                    continue
                grow = cycle_growth(s, seg)
                if grow > thr and (best is None or grow > best[0] * (1 + 1e-12)
                                   or (abs(grow - best[0]) <= 1e-12 * grow and len(seg) < len(best[1]))):
                    nodes = tuple(g.nodes[i] for i in path[start:])
                    best = (grow, Cycle(seg, nodes))
        if best is not None:
            return best
    return best


def _checked(s: Css, cfg: OracleConfig, hit):
    if hit is None:
        return None
    grow, cyc = hit
    if cycle_growth(s, cyc.word) > 1.0 - cfg.epsilon and cyc.is_realized_in(s.graph):
        return grow, cyc
    return None


def long_cycle_search(s: Css, cfg: OracleConfig, weight=None,
                      skip_upto: int | None = None) -> tuple[float, Cycle] | None:
    """Look for an unstable cycle longer than ``cfg.short_cycle_len``.

    Exact branch and bound up to ``cfg.exact_cycle_len``, then a beam search
    over walks ranked by ``||A_p||^(1/len)``.  Any cycle returned has been
    re-verified: ``rho(A_c)^(1/k) > 1 - epsilon`` and accepted by the graph.
    Lengths up to ``skip_upto`` are assumed to have been searched already.
    """
    if s.is_empty:
        return None
    lo = max(cfg.short_cycle_len, skip_upto or 0) + 1
    hit = _checked(s, cfg, _exact_cycles(s, cfg, weight, range(lo, cfg.exact_cycle_len + 1)))
    return hit or _checked(s, cfg, _beam_cycles(s, cfg, weight))


# ---------------------------------------------------------------------------


def select_weights(s: Css, cfg: OracleConfig) -> list:
    """Norms to certify with, best first: a fitted per-node norm, then shared ones."""
    shared = candidate_weights(s)
    if not cfg.fit_multinorm:
        return shared
    try:
        fitted, value = fit_multinorm(s, init=shared[0], depth=1)
    except EnumerationBudgetExceeded:
        return shared
    if not np.isfinite(value):
        return shared
    return [fitted] + shared


def _unstable(grow: float, cyc: Cycle, source: str) -> Verdict:
    return Verdict(Outcome.UNSTABLE_CYCLE, cyc, grow, source=source)


def oracle(s: Css, cfg: OracleConfig | None = None) -> Verdict:
    """Return ``Stable`` with a certificate, an unstable cycle, or ``Unknown``."""
    cfg = cfg or OracleConfig()
    if s.is_empty:
        return Verdict(Outcome.STABLE, certificate=Certificate(1, 0.0), source="empty")
    notes = []
    try:
        found = short_cycle_sweep(s, cfg.short_cycle_len, cfg.epsilon, cfg.state_budget)
    except EnumerationBudgetExceeded as exc:
        found = []
        notes.append(f"short sweep: {exc}")
    if found:
        shortest = min(len(c) for _, c in found)
        grow, cyc = _pick([(v, c) for v, c in found if len(c) == shortest])
        return _unstable(grow, cyc, "short_cycle_sweep")

    # Certification depth and exact cycle length grow together: an unstable
    # cycle of length k rules out any certificate, and is cheap to find.
    weights = select_weights(s, cfg)
    searched = cfg.short_cycle_len
    for k in range(1, cfg.k_max + 1):
        for i, w in enumerate(weights):
            try:
                cert = try_certify(s, k, w, CERT_TOL, cfg.state_budget)
            except EnumerationBudgetExceeded:
                notes.append(f"certification budget exhausted at k={k}")
                cert = None
            if cert is not None:
                return Verdict(Outcome.STABLE, certificate=cert, source="certify", notes=notes)
            if i == 0 and searched < k <= cfg.exact_cycle_len:
                searched = k
                hit = _checked(s, cfg, _exact_cycles(s, cfg, weights[0], [k]))
                if hit is not None:
                    return _unstable(*hit, source="long_cycle_search")

    hit = long_cycle_search(s, cfg, weights[0], skip_upto=searched)
    if hit is not None:
        v = _unstable(*hit, source="long_cycle_search")
        v.notes = notes
        return v
    return Verdict(Outcome.UNKNOWN, source="exhausted", notes=notes)


def verify_verdict(s: Css, v: Verdict, eps: float) -> bool:
    """Independent re-check of a verdict's evidence."""
    if v.outcome is Outcome.UNSTABLE_CYCLE:
        return (v.cycle.is_realized_in(s.graph)
                and accepts_cycle(s.graph, v.cycle.word)
                and cycle_growth(s, v.cycle.word) > 1.0 - eps)
    if v.outcome is Outcome.STABLE:
        if s.is_empty:
            return True
        c = v.certificate
        return c is not None and rho_hat_k(s, c.k, c.weight) < 1.0 - CERT_TOL
    return True
