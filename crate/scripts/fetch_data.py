#!/usr/bin/env python3
"""Materialize the benchmark datasets under data/.

The UCI hosts are often unreachable from build machines, so this script pulls
the same tables from package registries that bundle them:

  concrete  rdatasets (modeldata::concrete, the UCI concrete compressive strength table)
  boston    pydataset (MASS::Boston)
  abalone   scikit-lego (sklego/data/abalone.zip, the UCI abalone table)
  mnist     npm package `mnist-data` (the original 60k-image MNIST training IDX files), gzipped

Usage: python3 scripts/fetch_data.py [OUT_DIR]
"""
import csv
import gzip
import io
import json
import os
import struct
import subprocess
import sys
import tarfile
import tempfile
import urllib.request
import zipfile


def pip_download(pkg, dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", dest, pkg],
        check=True,
    )
    return [os.path.join(dest, f) for f in os.listdir(dest)][0]


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def concrete(out, tmp):
    whl = pip_download("rdatasets==0.2.10", os.path.join(tmp, "rdatasets"))
    site = os.path.join(tmp, "rdatasets-site")
    zipfile.ZipFile(whl).extractall(site)
    sys.path.insert(0, site)
    import rdatasets  # noqa: E402

    df = rdatasets.data("modeldata", "concrete")
    df = df.drop(columns=[c for c in df.columns if c == "rownames"])
    df.to_csv(os.path.join(out, "concrete.csv"), index=False)


def boston(out, tmp):
    sdist = pip_download("pydataset==0.2.0", os.path.join(tmp, "pydataset"))
    with tarfile.open(sdist) as tf:
        inner = tf.extractfile("pydataset-0.2.0/pydataset/resources.tar.gz").read()
    with tarfile.open(fileobj=io.BytesIO(inner)) as tf:
        raw = tf.extractfile("resources/rdata/csv/MASS/Boston.csv").read().decode()
    rows = list(csv.reader(io.StringIO(raw)))
    write_rows(os.path.join(out, "boston.csv"), rows[0][1:], [r[1:] for r in rows[1:]])


def abalone(out, tmp):
    whl = pip_download("scikit-lego==0.9.10", os.path.join(tmp, "sklego"))
    inner = zipfile.ZipFile(whl).read("sklego/data/abalone.zip")
    z = zipfile.ZipFile(io.BytesIO(inner))
    raw = z.read(z.namelist()[0]).decode()
    with open(os.path.join(out, "abalone.csv"), "w") as fh:
        fh.write(raw)


def mnist(out, tmp):
    url = "https://registry.npmjs.org/mnist-data/-/mnist-data-1.2.6.tgz"
    blob = urllib.request.urlopen(url).read()
    with tarfile.open(fileobj=io.BytesIO(blob)) as tf:
        for src, dst in (
            ("package/data/train-images-idx3-ubyte", "mnist-images-idx3-ubyte.gz"),
            ("package/data/train-labels-idx1-ubyte", "mnist-labels-idx1-ubyte.gz"),
        ):
            raw = tf.extractfile(src).read()
            with gzip.GzipFile(os.path.join(out, dst), "wb", mtime=0) as fh:
                fh.write(raw)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data")
    os.makedirs(out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for fetch in (concrete, boston, abalone, mnist):
            fetch(out, tmp)
            print("ok", fetch.__name__)


if __name__ == "__main__":
    main()
