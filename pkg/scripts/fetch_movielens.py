"""Fetch MovieLens-100K into data/ml-100k/ratings.tsv.

The GroupLens site is not always reachable, so this pulls the copy of
``ml-100k.inter`` that ships inside the RecBole wheel on PyPI and verifies the
wheel's published sha256 digest. Output columns: user, item, rating, timestamp.

    python scripts/fetch_movielens.py [--out data/ml-100k]
"""

import argparse
import hashlib
import io
import os
import re
import sys
import urllib.parse
import urllib.request
import zipfile

PACKAGE, VERSION = "recbole", "1.2.1"
MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"

INDEX = "https://pypi.org/simple/%s/" % PACKAGE


def wheel_url():
    """Wheel URL and sha256 from the PEP 503 simple index."""
    with urllib.request.urlopen(INDEX, timeout=60) as resp:
        page = resp.read().decode("utf-8")
    pattern = r'href="([^"#]*%s-%s-py3-none-any\.whl)#sha256=([0-9a-f]{64})"' % (PACKAGE, VERSION)
    match = re.search(pattern, page)
    if match is None:
        raise RuntimeError("no wheel published for %s %s" % (PACKAGE, VERSION))
    return urllib.parse.urljoin(INDEX, match.group(1)), match.group(2)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join("data", "ml-100k"))
    args = parser.parse_args(argv)

    target = os.path.join(args.out, "ratings.tsv")
    if os.path.exists(target):
        print(f"{target} already present")
        return 0
    url, digest = wheel_url()
    print(f"downloading {url}")
    with urllib.request.urlopen(url, timeout=300) as resp:
        blob = resp.read()
    if hashlib.sha256(blob).hexdigest() != digest:
        print("sha256 mismatch for downloaded wheel", file=sys.stderr)
        return 2
    text = zipfile.ZipFile(io.BytesIO(blob)).read(MEMBER).decode("utf-8")
    lines = text.splitlines()
    os.makedirs(args.out, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user\titem\trating\ttimestamp\n")
        for line in lines[1:]:
            user, item, rating, ts = line.split("\t")
            fh.write(f"{user}\t{item}\t{rating}\t{int(float(ts))}\n")
    print(f"wrote {len(lines) - 1} interactions to {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
