"""Fetch MovieLens 100K and write it as ``data/ml-100k.csv`` (user,item,rating).

Tries the GroupLens archive first. If that host is unreachable, falls back to
the copy bundled in the RecBole wheel on PyPI (``dataset_example/ml-100k``).
MovieLens 1M is not fetched; download ``ml-1m.zip`` from GroupLens by hand and
pass ``ratings.dat`` with ``--format movielens-dat``.
"""

import argparse
import csv
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def _from_grouplens():
    with urllib.request.urlopen(GROUPLENS_URL, timeout=30) as resp:
        blob = resp.read()
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        text = zf.read("ml-100k/u.data").decode()
    for line in text.splitlines():
        user, item, rating, _ = line.split("\t")
        yield user, item, rating


def _from_recbole():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "-d", tmp, "recbole==1.2.1"],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            text = zf.read("recbole/dataset_example/ml-100k/ml-100k.inter").decode()
    lines = text.splitlines()
    for line in lines[1:]:
        user, item, rating, _ = line.split("\t")
        yield user, item, str(int(float(rating)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parents[1] / "data" / "ml-100k.csv",
                        type=Path)
    args = parser.parse_args(argv)
    try:
        rows = list(_from_grouplens())
    except OSError as exc:
        print(f"grouplens unreachable ({exc}); using the RecBole wheel copy", file=sys.stderr)
        rows = list(_from_recbole())
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "rating"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} ratings to {args.out}")


if __name__ == "__main__":
    main()
