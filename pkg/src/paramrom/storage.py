"""On-disk formats: f64le vectors with JSON sidecars, Matrix Market matrices.

Vectors are stored as raw little-endian float64 arrays in ``<name>.f64le``
with a sidecar ``<name>.json`` holding ``{"len": n, "dtype": "f64le"}``.
Matrices use Matrix Market coordinate format (real, general).
"""

from __future__ import annotations

import json
import os

import numpy as np
import scipy.io
import scipy.sparse as sp


def save_vector(path, x):
    """Write a float64 vector as raw little-endian bytes plus a sidecar."""
    path = str(path)
    if not path.endswith(".f64le"):
        path += ".f64le"
    x = np.ascontiguousarray(np.asarray(x, dtype="<f8").ravel())
    x.tofile(path)
    sidecar = os.path.splitext(path)[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"len": int(x.shape[0]), "dtype": "f64le"}, fh)
    return path


def load_vector(path):
    path = str(path)
    if not path.endswith(".f64le"):
        path += ".f64le"
    sidecar = os.path.splitext(path)[0] + ".json"
    with open(sidecar) as fh:
        meta = json.load(fh)
    if meta.get("dtype") != "f64le":
        raise ValueError("unsupported vector dtype %r" % meta.get("dtype"))
    x = np.fromfile(path, dtype="<f8")
    if x.shape[0] != int(meta["len"]):
        raise ValueError(
            "vector length %d does not match sidecar len %d" % (x.shape[0], meta["len"])
        )
    return x


def save_matrix(path, A):
    """Write a sparse matrix in Matrix Market coordinate format."""
    path = str(path)
    if not path.endswith(".mtx"):
        path += ".mtx"
    scipy.io.mmwrite(path, sp.coo_matrix(A))
    return path


def load_matrix(path):
    path = str(path)
    if not path.endswith(".mtx"):
        path += ".mtx"
    return sp.csr_matrix(scipy.io.mmread(path))


def save_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
