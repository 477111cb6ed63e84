"""Choosing induced norms that make ``rho_hat_k`` bounds tight.

Any induced norm gives a valid upper bound, but the plain spectral norm is
often hopeless: a mode with spectral radius 0.92 may have norm 6.5.  Two
heuristics are provided.  :func:`candidate_weights` tries shared quadratic
norms built from discrete Lyapunov solutions.  :func:`fit_multinorm` fits
one quadratic norm per node by minimising a soft maximum of the weighted
segment norms ``||T_v A T_u^-1||``.  Neither result needs to be trusted:
certificates are always recomputed by the exact path search.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.optimize

from .automaton import EnumerationBudgetExceeded
from .css import Css, rho_hat_k
from .linalg import spectral_radius


def _lyap_factor(p: np.ndarray) -> np.ndarray | None:
    p = 0.5 * (p + p.T)
    try:
        return np.linalg.cholesky(p / np.linalg.norm(p)).T
    except np.linalg.LinAlgError:
        return None


def candidate_weights(s: Css, limit: int = 4) -> list:
    """Shared weights ``T`` ranked by the ``rho_hat`` they give at small depth.

    Candidates: the identity, Cholesky factors of the discrete Lyapunov
    solutions of each stable mode, their sum, and the sum over stable
    length-2 products.
    """
    if s.is_empty:
        return [None]
    n = s.n
    used = sorted({l for _, _, l in s.graph.edges})
    grams = [
        scipy.linalg.solve_discrete_lyapunov(s.mode(l).T, np.eye(n))
        for l in used
        if spectral_radius(s.mode(l)) < 1.0
    ]
    pairs = [
        s.mode(j) @ s.mode(i)
        for i in used
        for j in used
        if spectral_radius(s.mode(j) @ s.mode(i)) < 1.0
    ]
    cands: list = [None]
    cands += [_lyap_factor(p) for p in grams]
    if grams:
        cands.append(_lyap_factor(sum(p / np.linalg.norm(p) for p in grams)))
    if pairs:
        acc = sum(scipy.linalg.solve_discrete_lyapunov(a.T, np.eye(n)) for a in pairs)
        cands.append(_lyap_factor(acc))
    cands = [c for c in cands if c is None or np.all(np.isfinite(c))]
    depth = 2 if len(s.graph.edges) ** 2 < 50_000 else 1
    scored = []
    for i, w in enumerate(cands):
        try:
            scored.append((rho_hat_k(s, depth, w, budget=200_000), i, w))
        except EnumerationBudgetExceeded:
            continue
    scored.sort(key=lambda t: (t[0], t[1]))
    return [w for _, _, w in scored[:limit]] or [None]


def _segments(s: Css, depth: int):
    """``(start index, end index, product)`` for every path of the given length."""
    g = s.graph
    idx = g.index
    segs = [(idx[v], idx[v], np.eye(s.n)) for v in g.nodes]
    for _ in range(depth):
        nxt = []
        for u, v, a in segs:
            for _, d, l in g.out_edges[g.nodes[v]]:
                nxt.append((u, idx[d], s.mode(l) @ a))
        segs = nxt
    return segs


def multinorm_value(s: Css, weights: dict, depth: int = 1) -> float:
    """``max ||T_end A_p T_start^-1||^(1/depth)`` over paths of the given length."""
    segs = _segments(s, depth)
    t = [weights[v] for v in s.graph.nodes]
    inv = [np.linalg.inv(x) for x in t]
    best = 0.0
    for u, v, a in segs:
        best = max(best, np.linalg.norm(t[v] @ a @ inv[u], 2))
    return best ** (1.0 / depth)


def fit_multinorm(s: Css, init=None, depth: int = 1, betas=(8.0, 32.0, 128.0, 512.0),
                  maxiter: int = 300, max_segments: int = 20_000):
    """Fit per-node weights ``T_v`` minimising ``max ||T_v A T_u^-1||`` over segments.

    Segments are the paths of length ``depth``.  The maximum is replaced by
    a log-sum-exp with increasing sharpness ``beta``; each stage is solved
    with L-BFGS using the analytic gradient of the largest singular value.

    Returns ``(weights, value)`` with ``value`` the exact maximum (to the
    power ``1/depth``) for the fitted weights.
    """
    g = s.graph
    if g.is_empty:
        return {}, 0.0
    segs = _segments(s, depth)
    if len(segs) > max_segments:
        raise EnumerationBudgetExceeded(f"{len(segs)} segments exceed {max_segments}")
    nv, n = len(g.nodes), s.n
    us = np.array([u for u, _, _ in segs])
    vs = np.array([v for _, v, _ in segs])
    mats = np.stack([a for _, _, a in segs])
    if init is None:
        t0 = np.broadcast_to(np.eye(n), (nv, n, n)).copy()
    elif isinstance(init, dict):
        t0 = np.stack([np.asarray(init[v], float) for v in g.nodes])
    else:
        t0 = np.broadcast_to(np.asarray(init, float), (nv, n, n)).copy()

    def unpack(x):
        return x.reshape(nv, n, n)

    def evaluate(x, beta):
        t = unpack(x)
        try:
            tinv = np.linalg.inv(t)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(x)
        b = mats @ tinv[us]
        m = t[vs] @ b
        uu, sv, vh = np.linalg.svd(m)
        sig = sv[:, 0]
        if np.any(sig <= 0) or not np.all(np.isfinite(sig)):
            return np.inf, np.zeros_like(x)
        logs = np.log(sig)
        top = logs.max()
        w = np.exp(beta * (logs - top))
        z = w.sum()
        f = top + np.log(z) / beta
        coef = w / z / sig  # d f / d sigma_e
        left = uu[:, :, 0]
        right = vh[:, 0, :]
        grad = np.zeros_like(t)
        gv = np.einsum("e,ei,ej->eij", coef, left, np.einsum("eij,ej->ei", b, right))
        tinv_v = np.einsum("eij,ej->ei", tinv[us], right)
        gu = -np.einsum("e,ei,ej->eij", coef * sig, right, tinv_v)
        np.add.at(grad, vs, gv)
        np.add.at(grad, us, gu)
        # keep overall scale fixed: it does not change any segment norm
        return f, grad.ravel()

    x = t0.ravel().copy()
    for beta in betas:
        res = scipy.optimize.minimize(
            evaluate, x, args=(beta,), jac=True, method="L-BFGS-B",
            options={"maxiter": maxiter},
        )
        if np.all(np.isfinite(res.x)):
            x = res.x
        # renormalise so the weights stay O(1)
        t = unpack(x)
        x = (t / np.mean(np.linalg.norm(t, axis=(1, 2)))).ravel()
    weights = {v: unpack(x)[i].copy() for i, v in enumerate(g.nodes)}
    return weights, multinorm_value(s, weights, depth)
