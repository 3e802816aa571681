"""Writes TARAEMB1 fixtures with the standard library only.

cross.emb: 3 x 4, not normalized, values chosen to exercise sign, subnormal and rounding.
mock_video.emb / mock_text.emb: unit rows for the items in ../splits/items.jsonl.

Run from this directory: python3 make_fixture.py
"""
import json
import math
import random
import struct


def write(path, ids, rows, normalized):
    dim = len(rows[0])
    with open(path, "wb") as f:
        f.write(b"TARAEMB1")
        f.write(struct.pack("<IIIBB", 1, len(rows), dim, 0, 1 if normalized else 0))
        f.write(b"\x00\x00")
        for r in rows:
            f.write(struct.pack("<%df" % dim, *r))
    with open(path[: -len(".emb")] + ".manifest.jsonl", "w") as f:
        for i, id_ in enumerate(ids):
            f.write(json.dumps({"row": i, "id": id_}, separators=(",", ":")) + "\n")


write(
    "cross.emb",
    ["alpha", "beta", "gamma"],
    [
        [1.0, -2.0, 0.5, 0.0],
        [0.1, -0.0, 3.4028234663852886e38, 1e-45],
        [-1.5, 1024.0, 0.333333343267, -7.25],
    ],
    False,
)

items = [json.loads(l) for l in open("../splits/items.jsonl")]
rng = random.Random(11)
dim = 16
content = {}
for it in items:
    label = it["class_label"]
    if label not in content:
        content[label] = [rng.gauss(0, 1) for _ in range(dim)]


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


video_ids, video_rows, text_ids, text_rows = [], [], [], []
for it in items:
    base = content[it["class_label"]]
    noise = 0.6 if it["kind"] == "video" else 0.2
    row = unit([b + rng.gauss(0, noise) for b in base])
    if it["kind"] == "video":
        video_ids.append(it["id"])
        video_rows.append(row)
    else:
        text_ids.append(it["id"])
        text_rows.append(row)
write("mock_video.emb", video_ids, video_rows, True)
write("mock_text.emb", text_ids, text_rows, True)
