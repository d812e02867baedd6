"""Loading matrices and SAA data files.

Matrices in JSON files may be inline nested lists or a path (relative to the
JSON file) to a plain-text file in one of two layouts:

* dense: whitespace-separated rows, as read by ``numpy.loadtxt``;
* banded: first line ``# banded L U`` followed by ``L + U + 1`` rows of
  length ``n`` in LAPACK band storage, ``ab[U + i - j, j] = a[i, j]``.
"""

from __future__ import annotations

import json
import os
from importlib import resources

import numpy as np


def read_matrix_text(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    tokens = first.lstrip("#").split()
    if first.startswith("#") and tokens and tokens[0].lower() == "banded":
        lower, upper = int(tokens[1]), int(tokens[2])
        ab = np.atleast_2d(np.loadtxt(path, comments="#"))
        if ab.shape[0] != lower + upper + 1:
            raise ValueError(f"banded file needs {lower + upper + 1} rows, found {ab.shape[0]}")
        n = ab.shape[1]
        a = np.zeros((n, n))
        for j in range(n):
            for i in range(max(0, j - upper), min(n, j + lower + 1)):
                a[i, j] = ab[upper + i - j, j]
        return a
    return np.atleast_1d(np.loadtxt(path, comments="#"))


def resolve_array(value, base_dir=".") -> np.ndarray:
    if isinstance(value, str):
        path = value if os.path.isabs(value) else os.path.join(base_dir, value)
        return read_matrix_text(path)
    return np.asarray(value, dtype=float)


BUILTIN_SAA = {"worked": "worked_example.json"}


def load_saa_file(path) -> dict:
    """Read an SAA data file: ``A_bar``, ``b_bar``, ``N`` and optionally
    ``sigma_N``, ``lower``, ``upper`` and ``bandwidth``.

    ``path`` may also name a bundled data set (``worked``).
    """
    if path in BUILTIN_SAA:
        text = resources.files("pwnci").joinpath("data").joinpath(BUILTIN_SAA[path]).read_text()
        base = "."
    else:
        with open(path) as fh:
            text = fh.read()
        base = os.path.dirname(os.path.abspath(path))
    raw = json.loads(text)
    out = {"name": raw.get("name", os.path.basename(str(path))), "N": int(raw["N"])}
    out["A_bar"] = resolve_array(raw["A_bar"], base)
    out["b_bar"] = resolve_array(raw["b_bar"], base).ravel()
    n = out["b_bar"].size
    if "sigma_N" in raw:
        out["sigma_N"] = resolve_array(raw["sigma_N"], base)
    inf = lambda v, d: d if v is None else float(v)
    out["lower"] = np.array([inf(v, -np.inf) for v in raw.get("lower", [0.0] * n)])
    out["upper"] = np.array([inf(v, np.inf) for v in raw.get("upper", [None] * n)])
    out["bandwidth"] = raw.get("bandwidth")
    return out
