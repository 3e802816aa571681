"""Builds the 4-pair items fixture and its expected task files.

Run from this directory: python3 make_golden.py
"""
import json
import random

classes = [
    ("open door", 1, "a"), ("close door", 1, "b"),
    ("fold towel", 2, "a"), ("unfold towel", 2, "b"),
    ("turn on tap", 3, "a"), ("turn off tap", 3, "b"),
    ("zip bag", 4, "a"), ("unzip bag", 4, "b"),
]
videos_per_class = [4, 4, 3, 5, 4, 4, 5, 3]

items = []
for (label, pair, side), n in zip(classes, videos_per_class):
    slug = label.replace(" ", "-")
    items.append({"id": "t-" + slug, "kind": "text", "class_label": label, "pair_id": pair, "side": side})
    for i in range(n):
        items.append({"id": f"v-{slug}-{i}", "kind": "video", "class_label": label, "pair_id": pair, "side": side})
random.Random(4).shuffle(items)
assert len(items) == 40

with open("items.jsonl", "w") as f:
    for it in items:
        f.write(json.dumps(it, separators=(",", ":")) + "\n")


def task(direction, split):
    qkind = "text" if direction == "t2v" else "video"
    queries = [it for it in items if it["kind"] == qkind]
    gallery = [it for it in items if it["kind"] != qkind]
    out = []
    for q in queries:
        opp = (q["pair_id"], "b" if q["side"] == "a" else "a")
        def is_opp(c):
            return (c["pair_id"], c["side"]) == opp
        if split == "chiral":
            cands = [c for c in gallery if c["class_label"] == q["class_label"] or is_opp(c)]
        elif split == "non_chiral":
            cands = [c for c in gallery if not is_opp(c)]
        else:
            cands = list(gallery)
        rel = [c for c in cands if c["class_label"] == q["class_label"]]
        out.append({"id": q["id"], "candidates": [c["id"] for c in cands], "relevant": [c["id"] for c in rel]})
    return {"direction": direction, "split": split, "gallery": [c["id"] for c in gallery], "queries": out}


for d in ("t2v", "v2t"):
    for s in ("chiral", "non_chiral", "all"):
        with open(f"{d}_{s}.golden.json", "w") as f:
            json.dump(task(d, s), f, indent=2)
            f.write("\n")
