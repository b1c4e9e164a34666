"""Binary model snapshots.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"LSPSNAP1"
    offset 8   uint32    n = length of the JSON header in bytes
    offset 12  n bytes   UTF-8 JSON header
    then       arrays    raw little-endian float64 data, in header order

The header is an object with keys ``family`` ("gauss", "cat" or "lda"),
``K``, ``D`` or ``V``, ``alpha``, ``arrays`` (list of [name, shape] pairs
giving the order and shape of the payload arrays) and ``config`` (the
training configuration as a flat object).  Arrays are written with their
exact bits, so a save/load round trip is bit-exact.
"""
import json
import struct

import numpy as np

from .expfam import CategoricalDirichlet, DirichletPosterior, GaussianWishart
from .lda import LdaGlobalState
from .mixture import MixGlobalState

__all__ = ["SnapshotError", "save_snapshot", "load_snapshot", "state_to_arrays", "state_from_arrays"]

MAGIC = b"LSPSNAP1"


class SnapshotError(ValueError):
    """Unreadable or mismatched snapshot file."""


def state_to_arrays(g):
    """(family tag, header fields, ordered dict of arrays) for a global state."""
    if isinstance(g, LdaGlobalState):
        return "lda", {"K": g.K, "V": g.V, "alpha": g.alpha}, {
            "lam": g.topics.lam, "prior_lambda": np.array([g.lambda_bar])}
    if isinstance(g, MixGlobalState):
        arrays = {"theta": g.theta.lam}
        arrays.update(g.family.to_arrays(g.obs))
        dims = {"D": g.family.D} if g.family.name == "gauss" else {"V": g.family.V}
        return g.family.name, dict(K=g.K, alpha=g.alpha, **dims), arrays
    raise TypeError(f"cannot snapshot {type(g).__name__}")


def state_from_arrays(family, header, arrays):
    alpha = float(header["alpha"])
    if family == "lda":
        return LdaGlobalState(DirichletPosterior.from_params(arrays["lam"]), alpha,
                              float(arrays["prior_lambda"][0]))
    if family == "gauss":
        fam, obs = GaussianWishart.from_arrays(arrays)
    elif family == "cat":
        fam, obs = CategoricalDirichlet.from_arrays(arrays)
    else:
        raise SnapshotError(f"unknown model family {family!r}")
    return MixGlobalState(DirichletPosterior.from_params(arrays["theta"]), obs, fam, alpha)


def save_snapshot(path, g, config=None):
    family, fields, arrays = state_to_arrays(g)
    header = {"family": family, **fields,
              "arrays": [[name, list(np.shape(a))] for name, a in arrays.items()],
              "config": config or {}}
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_snapshot(path):
    """(header, arrays) without building a model state."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise SnapshotError(f"{path}: not a model snapshot (bad magic)")
    if len(raw) < 12:
        raise SnapshotError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", raw, 8)
    try:
        header = json.loads(raw[12 : 12 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"{path}: corrupt header ({exc})") from None
    pos = 12 + n
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        end = pos + 8 * count
        if end > len(raw):
            raise SnapshotError(f"{path}: array {name!r} truncated at byte {len(raw)}, need {end}")
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos = end
    if pos != len(raw):
        raise SnapshotError(f"{path}: {len(raw) - pos} trailing bytes")
    return header, arrays


def load_snapshot(path):
    """(global state, header) from a snapshot file."""
    header, arrays = read_snapshot(path)
    return state_from_arrays(header["family"], header, arrays), header
