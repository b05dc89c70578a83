#!/usr/bin/env python3
"""Reference values for the popularity baseline on ML-100K.

Written without reference to the Rust code: reads u.data, splits each user
chronologically, counts popularity over the history windows, recommends the
global top-K to everyone and prints Recall@K, NDCG@K, ARP, ARQ, ARQV and ARR.

Sums are plain left-to-right loops (no math.fsum, no builtin sum) so the
floating-point results are reproducible bit for bit.

usage: popularity_oracle.py [DATA_DIR] [K] [T]
"""

import json
import math
import sys
from collections import defaultdict
from pathlib import Path

MIN_INTERACTIONS = 5
MAX_SEQ_LEN = 50
RATIO = 0.9


def add_all(values):
    total = 0.0
    for v in values:
        total += v
    return total


def mean(values):
    values = list(values)
    if not values:
        return None
    return add_all(values) / len(values)


def main():
    data = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "ml-100k"
    k = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    t = int(sys.argv[3]) if len(sys.argv) > 3 else 10

    events = defaultdict(list)
    max_item = 0
    for line in (data / "u.data").read_text().splitlines():
        if not line.strip():
            continue
        user, item, rating, ts = line.split()
        events[int(user)].append((int(ts), int(item), float(rating)))
        max_item = max(max_item, int(item))
    for line in (data / "u.item").read_bytes().decode("latin-1").splitlines():
        if line.strip():
            max_item = max(max_item, int(line.split("|", 1)[0]))

    users = {}
    for user, seq in events.items():
        if len(seq) < MIN_INTERACTIONS:
            continue
        seq = sorted(seq, key=lambda e: e[0])  # stable: ties keep file order
        n = len(seq)
        cut = math.floor(RATIO * n + 1e-9)
        if cut == 0 or cut >= n:
            continue
        users[user] = (seq[max(0, cut - MAX_SEQ_LEN):cut], seq[cut][1])

    pop = defaultdict(int)
    rating_sum = defaultdict(float)
    for user in sorted(users):
        for _, item, rating in users[user][0]:
            pop[item] += 1
            rating_sum[item] += rating

    def quality(item):
        return rating_sum[item] / pop[item] if pop[item] else None

    top = sorted(range(1, max_item + 1), key=lambda i: (-pop[i], i))[:k]

    per_user = defaultdict(list)
    for user in sorted(users):
        gt = users[user][1]
        runs = [top for _ in range(t)]
        hits = [1.0 if gt in r else 0.0 for r in runs]
        gains = [1.0 / math.log2(r.index(gt) + 2) if gt in r else 0.0 for r in runs]
        arp = [add_all(float(pop[i]) for i in r) / len(r) for r in runs]
        arq, arqv = [], []
        for r in runs:
            qs = [quality(i) for i in r if quality(i) is not None]
            if qs:
                mu = add_all(qs) / len(qs)
                arq.append(mu)
                arqv.append(add_all((q - mu) * (q - mu) for q in qs) / len(qs))
        sets = [set(r) for r in runs]
        rep = 0
        for a in range(t):
            others = set()
            for b in range(t):
                if b != a:
                    others |= sets[b]
            rep += len(sets[a] & others)
        arr = 1.0 if t == 1 else rep / (t * k)
        for name, vals in (("recall", hits), ("ndcg", gains), ("arp", arp), ("arq", arq), ("arqv", arqv)):
            m = mean(vals)
            if m is not None:
                per_user[name].append(m)
        per_user["arr"].append(arr)

    out = {"users": len(users), "top": top}
    for name in ("recall", "ndcg", "arp", "arq", "arqv", "arr"):
        out[name] = mean(per_user[name])
    print(json.dumps(out))


if __name__ == "__main__":
    main()
