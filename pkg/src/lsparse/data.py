"""Dataset ingestion, batching and synthetic generators.

File formats
------------
csv    one observation per line, comma-separated decimals.
raw64  16-byte header: b"SMX0", little-endian uint32 n_obs, uint32 D,
       4 reserved zero bytes;
       then n_obs * D little-endian float64 values, row-major.
PGM    binary P5, maxval <= 255.
UCI    bag-of-words: three header lines D, V, NNZ then NNZ lines
       "docID wordID count", ids 1-indexed.
"""
import logging
import math
import struct

import numpy as np

from .corpus import Corpus, Document

__all__ = [
    "DataFormatError",
    "load_dense",
    "write_csv",
    "write_raw64",
    "read_pgm",
    "write_pgm",
    "extract_patches",
    "load_uci_bow",
    "write_uci_bow",
    "completion_split",
    "fixed_partition",
    "Batcher",
    "make_gmm_data",
    "make_patch_images",
    "make_lda_corpus",
    "Corpus",
    "Document",
]

log = logging.getLogger(__name__)

RAW64_MAGIC = b"SMX0"
_RAW64_HEADER = struct.Struct("<4sII4x")


class DataFormatError(ValueError):
    """Malformed input file; the message names the line or byte offset."""


# ---------------------------------------------------------------------------
# dense matrices

def _load_csv(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no observations")
    X = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: non-finite entries")
    return X


def _load_raw64(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _RAW64_HEADER.size:
        raise DataFormatError(f"{path}: truncated header ({len(blob)} of 16 bytes)")
    magic, n, D = _RAW64_HEADER.unpack_from(blob)
    if magic != RAW64_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at byte 0")
    expected = _RAW64_HEADER.size + 8 * n * D
    if len(blob) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes for {n}x{D} matrix, found {len(blob)}")
    X = np.frombuffer(blob, dtype="<f8", offset=_RAW64_HEADER.size).reshape(n, D).astype(np.float64)
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: non-finite entries")
    return X


def load_dense(path, fmt=None):
    """Read an (n_obs, D) float64 matrix from a csv or raw64 file.

    `fmt` defaults to the file suffix ('.raw64' / '.bin' select raw64).
    """
    path = str(path)
    if fmt is None:
        fmt = "raw64" if path.endswith((".raw64", ".bin")) else "csv"
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "raw64":
        return _load_raw64(path)
    raise ValueError(f"unknown dense format {fmt!r}")


def write_csv(path, X):
    np.savetxt(path, np.asarray(X, dtype=np.float64), delimiter=",", fmt="%.17g")


def write_raw64(path, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(_RAW64_HEADER.pack(RAW64_MAGIC, X.shape[0], X.shape[1]))
        fh.write(X.tobytes())


# ---------------------------------------------------------------------------
# images

def _pgm_tokens(blob, count, pos):
    out = []
    while len(out) < count:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataFormatError(f"truncated PGM header at byte {pos}")
        out.append(blob[start:pos])
    return out, pos


def read_pgm(path):
    """Binary (P5) 8-bit greyscale image as a uint8 array of shape (rows, cols)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise DataFormatError(f"{path}: unsupported PGM variant {blob[:2]!r}; only binary P5 is read")
    (w, h, maxval), pos = _pgm_tokens(blob, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise DataFormatError(f"{path}: malformed PGM header") from None
    if maxval > 255 or maxval < 1:
        raise DataFormatError(f"{path}: unsupported maxval {maxval} (16-bit PGM not supported)")
    pos += 1
    need = w * h
    if len(blob) - pos < need:
        raise DataFormatError(f"{path}: expected {need} pixel bytes, found {len(blob) - pos}")
    return np.frombuffer(blob, dtype=np.uint8, count=need, offset=pos).reshape(h, w).copy()


def write_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 image")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(image).tobytes())


def extract_patches(image, patch=8, stride=4, zero_mean=True):
    """All patch x patch windows at offsets (stride*i, stride*j) lying inside the image.

    Returns an (n_patches, patch*patch) float64 matrix, rows in raster order of
    the offsets, each patch flattened row-major and optionally mean-removed.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D greyscale image")
    if img.shape[0] < patch or img.shape[1] < patch:
        raise ValueError(f"image {img.shape} smaller than the {patch}x{patch} patch")
    win = np.lib.stride_tricks.sliding_window_view(img, (patch, patch))[::stride, ::stride]
    X = win.reshape(-1, patch * patch).copy()
    if zero_mean:
        X -= X.mean(axis=1, keepdims=True)
    return X


# ---------------------------------------------------------------------------
# bag-of-words corpora

def load_uci_bow(path):
    """Read a UCI bag-of-words file into a Corpus with 0-indexed ids.

    Documents without any entry are dropped with a warning.
    """
    with open(path) as fh:
        header = []
        lineno = 0
        while len(header) < 3:
            line = fh.readline()
            lineno += 1
            if not line:
                raise DataFormatError(f"{path}:{lineno}: missing header line")
            if line.strip():
                try:
                    header.append(int(line))
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: header must be an integer") from None
        D, V, nnz = header
        rows = []
        for line in fh:
            lineno += 1
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 'docID wordID count'")
            try:
                d, v, c = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric entry") from None
            if not 1 <= d <= D:
                raise DataFormatError(f"{path}:{lineno}: docID {d} outside [1, {D}]")
            if not 1 <= v <= V:
                raise DataFormatError(f"{path}:{lineno}: wordID {v} outside [1, {V}]")
            if not c > 0:
                raise DataFormatError(f"{path}:{lineno}: count must be positive, got {parts[2]}")
            rows.append((d - 1, v - 1, c))
    if len(rows) != nnz:
        raise DataFormatError(f"{path}: header promises {nnz} entries, found {len(rows)}")
    from scipy.sparse import coo_matrix

    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    X = coo_matrix((arr[:, 2], (arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64))), shape=(D, V)).tocsr()
    X.sum_duplicates()
    empty = np.flatnonzero(np.diff(X.indptr) == 0)
    if empty.size:
        log.warning("%s: skipping %d empty documents", path, empty.size)
        X = X[np.flatnonzero(np.diff(X.indptr) > 0)]
    X.sort_indices()
    return Corpus.from_csr(X)


def write_uci_bow(path, corpus):
    def fmt(c):
        return str(int(c)) if float(c).is_integer() else repr(float(c))

    with open(path, "w") as fh:
        fh.write(f"{corpus.n_docs}\n{corpus.V}\n{corpus.word_ids.size}\n")
        for d in range(corpus.n_docs):
            doc = corpus[d]
            for v, c in zip(doc.word_ids, doc.counts):
                fh.write(f"{d + 1} {v + 1} {fmt(c)}\n")


def completion_split(doc, frac_a=0.8, rng=None):
    """Split a document's word types at random: ceil(frac_a * U) types go to part A.

    Part B always keeps at least one type.  Returns (A, B), or None when the
    document has fewer than two types.
    """
    rng = np.random.default_rng(rng)
    U = doc.n_types
    if U < 2:
        return None
    n_a = min(U - 1, math.ceil(frac_a * U))
    perm = rng.permutation(U)
    a, b = np.sort(perm[:n_a]), np.sort(perm[n_a:])
    return (Document(doc.word_ids[a], doc.counts[a]), Document(doc.word_ids[b], doc.counts[b]))


# ---------------------------------------------------------------------------
# batching

def fixed_partition(n, B):
    """B contiguous index ranges covering range(n), sizes differing by at most one."""
    if B < 1:
        raise ValueError("need at least one batch")
    if B > n:
        raise ValueError(f"cannot split {n} units into {B} batches")
    return [np.arange(r[0], r[-1] + 1) for r in np.array_split(np.arange(n), B)]


class Batcher:
    """Batch index iterator.

    mode='fixed_partition' yields (batch_id, indices) over a fixed split, one
    lap per iteration of `lap()`.  mode='sample' draws batches of the same
    size uniformly at random, independently at every step.
    """

    def __init__(self, n, B, mode="fixed_partition", seed=0):
        if mode not in ("fixed_partition", "sample"):
            raise ValueError(f"unknown batching mode {mode!r}")
        self.parts = fixed_partition(n, B)
        self.n = n
        self.B = B
        self.mode = mode
        self.rng = np.random.default_rng(seed)

    def lap(self):
        if self.mode == "fixed_partition":
            yield from enumerate(self.parts)
        else:
            size = self.parts[0].size
            for _ in range(self.B):
                yield None, np.sort(self.rng.choice(self.n, size=size, replace=False))


# ---------------------------------------------------------------------------
# synthetic data

def make_gmm_data(N, D, K, rng, spread=4.0):
    """Samples from a zero-mean Gaussian mixture with random full covariances.

    Returns (X, z, covariances, weights).
    """
    covs = np.empty((K, D, D))
    for k in range(K):
        A = rng.normal(size=(D, D))
        Q, _ = np.linalg.qr(A)
        eig = np.exp(rng.uniform(-np.log(spread), np.log(spread), size=D))
        covs[k] = (Q * eig) @ Q.T
    w = rng.dirichlet(np.full(K, 5.0))
    z = rng.choice(K, size=N, p=w)
    X = np.empty((N, D))
    for k in range(K):
        m = z == k
        X[m] = rng.multivariate_normal(np.zeros(D), covs[k], size=int(m.sum()), method="cholesky")
    return X, z, covs, w


def make_patch_images(n_images, size, rng, n_edges=12):
    """Synthetic 8-bit images: smooth gradients plus random oriented edges and noise."""
    imgs = []
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(n_images):
        img = 128 + 30 * np.sin(xx / rng.uniform(5, 30) + rng.uniform(0, 6)) * np.cos(yy / rng.uniform(5, 30))
        for _ in range(n_edges):
            ang = rng.uniform(0, np.pi)
            off = rng.uniform(0, size)
            side = (np.cos(ang) * xx + np.sin(ang) * yy) > off
            img += rng.uniform(-60, 60) * side
        img += rng.normal(scale=4.0, size=img.shape)
        imgs.append(np.clip(img, 0, 255).astype(np.uint8))
    return imgs


def make_lda_corpus(K, V, n_docs, tokens_per_doc, rng, alpha=0.5, topic_conc=0.05, topics=None):
    """Corpus sampled from LDA with known topics.

    Returns (corpus, topics) with topics an (K, V) row-stochastic matrix.
    """
    if topics is None:
        topics = rng.dirichlet(np.full(V, topic_conc), size=K)
        topics = np.maximum(topics, 1e-12)
        topics /= topics.sum(axis=1, keepdims=True)
    docs = []
    for _ in range(n_docs):
        pi = rng.dirichlet(np.full(K, alpha / K))
        z_counts = rng.multinomial(tokens_per_doc, pi)
        counts = np.zeros(V)
        for k in np.flatnonzero(z_counts):
            counts += rng.multinomial(z_counts[k], topics[k])
        nz = np.flatnonzero(counts)
        docs.append(Document(nz.astype(np.int64), counts[nz]))
    return Corpus.from_documents(docs, V), topics
