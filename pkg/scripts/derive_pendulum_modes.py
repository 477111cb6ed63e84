"""Search for the 8-mode pendulum co-simulation set.

The pendulum instance has 8 modes, 3 of them unstable, but only the
unstable ones come with a (method, step, H) description.  Of the 14 admissible
combinations, 6 are unstable and 8 stable under our model.  This script
tries every choice of 3 unstable and 5 stable combinations in a fixed
enumeration order, labels the unstable ones 2, 3, 4 and the stable ones
1, 5, 6, 7, 8, stabilises the degree-1 lift with ``stabilize_impl`` and
records:

* the final Perron root (target 7.2568898),
* whether the cycle word 32645 survives with growth below one,
* whether the self loops 2, 3, 4 are gone while each of those labels
  still occurs in an accepted word.

The first record meeting all three is the frozen map written to
``src/switchstab/data/pendulum_modes.json`` by ``--freeze``.

With ``--named``, labels 3 and 4 are pinned to the two described unstable
configurations that are also unstable in this model (midpoint and forward
Euler, H = 0.2, h = 0.02) and only label 2 and the stable five vary.

Usage: python scripts/derive_pendulum_modes.py out.jsonl [--freeze] [--named]
"""

import argparse
import itertools
import json
import time
from collections import Counter
from pathlib import Path

from switchstab.automaton import Automaton, accepts_cycle, lift, perron_root, remove_edge, words_k
from switchstab.css import Css, cycle_growth
from switchstab.linalg import spectral_radius
from switchstab.models import CosimConfig, cosim_step_matrix, pendulum_candidate_configs, pendulum_pair
from switchstab.oracle import OracleConfig, short_cycle_sweep
from switchstab.stabilizer import OracleUnknown, _argmax, _cycle_key, _rank, stabilize_impl

TARGET = 7.2568898
WORD = (3, 2, 6, 4, 5)
NAMED = {3: CosimConfig(("md", "md"), (0.02, 0.02), 0.2), 4: CosimConfig(("fe", "fe"), (0.02, 0.02), 0.2)}
DATA = Path(__file__).resolve().parents[1] / "src" / "switchstab" / "data" / "pendulum_modes.json"


def prepass_root(s, cfg):
    """Perron root after only the batch short-cycle removals (an upper bound for the final root)."""
    while True:
        found = short_cycle_sweep(s, cfg.short_cycle_len, cfg.epsilon)
        if not found:
            return perron_root(s.graph)
        keys = {_cycle_key(c) for _, c in found}
        cover = Counter(e for key in keys for e in set(key))
        top = max(cover.values())
        e = _argmax(_rank(s.graph, [e for e, n in cover.items() if n == top]), 0.0)
        s = s.with_graph(remove_edge(s.graph, e))


def evaluate(s, cfg):
    s1 = s.with_graph(lift(s.graph, 1))
    rec = {"prepass_root": prepass_root(s1, cfg)}
    if rec["prepass_root"] < TARGET - 1e-6:
        return rec
    try:
        t = stabilize_impl(s1, cfg)
    except OracleUnknown:
        rec["root"] = None
        return rec
    g = t.final.graph
    w3 = words_k(g, 3)
    rec["root"] = t.final_perron_root
    rec["word_accepted"] = accepts_cycle(g, WORD)
    rec["word_growth"] = cycle_growth(s, WORD)
    rec["loops_gone"] = not any(accepts_cycle(g, (l,)) for l in (2, 3, 4))
    rec["labels_used"] = all(any(l in w for w in w3) for l in (2, 3, 4))
    rec["hit"] = (abs(rec["root"] - TARGET) < 1e-6 and rec["word_accepted"]
                  and rec["word_growth"] < 1 and rec["loops_gone"] and rec["labels_used"])
    return rec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--freeze", action="store_true", help="stop at the first hit and write the mode map")
    ap.add_argument("--named", action="store_true", help="pin labels 3 and 4 to the described configurations")
    args = ap.parse_args()
    pair = pendulum_pair()
    cands = pendulum_candidate_configs()
    mats = [cosim_step_matrix(pair, c) for c in cands]
    unstable = [i for i, a in enumerate(mats) if spectral_radius(a) > 1]
    stable = [i for i, a in enumerate(mats) if spectral_radius(a) < 1]
    cfg = OracleConfig()
    if args.named:
        pinned = [cands.index(NAMED[3]), cands.index(NAMED[4])]
        triples = [(u, *pinned) for u in unstable if u not in pinned]
    else:
        triples = list(itertools.combinations(unstable, 3))
    tried = hits = 0
    with open(args.out, "w") as fh:
        for un in triples:
            for st in itertools.combinations(stable, 5):
                order = [st[0], *un, *st[1:]]
                s = Css(tuple(mats[i] for i in order), Automaton.full_shift(8))
                t0 = time.time()
                rec = {"order": order, "labels": [cands[i].label for i in order], **evaluate(s, cfg)}
                rec["seconds"] = time.time() - t0
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
                tried += 1
                if rec.get("hit"):
                    hits += 1
                    if args.freeze:
                        write_map(cands, order, rec, tried, args.named)
                        return


def write_map(cands, order, rec, tried, named):
    data = {
        "schema": "pendulum-modes/1",
        "modes": [cands[i].to_json() for i in order],
        "derivation": {
            "script": "scripts/derive_pendulum_modes.py",
            "candidates": [c.to_json() for c in cands],
            "order": order,
            "selection": ((f"labels 3 and 4 pinned to {NAMED[3].label} and {NAMED[4].label}; "
                           if named else "")
                          + "first choice of 3 unstable + 5 stable candidates, in itertools "
                          "enumeration order, whose degree-1 stabilize_impl run reaches Perron "
                          f"root {TARGET} +- 1e-6, keeps cycle word {''.join(map(str, WORD))} with "
                          "growth below one, forbids self loops 2, 3, 4 and still uses each of "
                          "those labels"),
            "records_tried": tried,
            "final_perron_root": rec["root"],
            "word_growth": rec["word_growth"],
        },
    }
    DATA.write_text(json.dumps(data, indent=2) + "\n")


if __name__ == "__main__":
    main()
