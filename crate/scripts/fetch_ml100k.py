#!/usr/bin/env python3
"""Materialize MovieLens-100K in its native layout (u.data + u.item).

The GroupLens download host is not always reachable, so this script pulls the
copy bundled with the RecBole wheel from the package index and rewrites it
into the original tab/pipe separated files. Row order in u.data matches the
GroupLens distribution.

Usage: python3 scripts/fetch_ml100k.py [OUT_DIR]   (default: data/ml-100k)
"""

import glob
import os
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k."


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join("data", "ml-100k")
    os.makedirs(out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call([
            sys.executable, "-m", "pip", "download", "--no-deps", "-q",
            "-d", tmp, "recbole==1.2.1",
        ])
        wheel = glob.glob(os.path.join(tmp, "*.whl"))[0]
        with zipfile.ZipFile(wheel) as zf:
            inter = zf.read(PREFIX + "inter").decode("utf-8").splitlines()
            items = zf.read(PREFIX + "item").decode("utf-8").splitlines()

    with open(os.path.join(out_dir, "u.data"), "w", newline="\n") as fh:
        for line in inter[1:]:
            if not line:
                continue
            user, item, rating, ts = line.split("\t")
            fh.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    with open(os.path.join(out_dir, "u.item"), "wb") as fh:
        for line in items[1:]:
            if not line:
                continue
            item, title, year, classes = (line.split("\t") + ["", "", ""])[:4]
            year = year.strip()
            release = f"01-Jan-{year}" if year else ""
            present = set(classes.split())
            flags = "|".join("1" if g in present else "0" for g in GENRES)
            row = f"{item}|{title}|{release}|||{flags}\n"
            fh.write(row.encode("latin-1", errors="replace"))

    print(f"wrote {len(inter) - 1} ratings and {len(items) - 1} items to {out_dir}")


if __name__ == "__main__":
    main()
