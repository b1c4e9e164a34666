"""Sparse-histogram documents and corpora."""
from dataclasses import dataclass

import numpy as np

__all__ = ["Document", "Corpus"]


@dataclass(frozen=True, eq=False)
class Document:
    """Word types present in one document and their (possibly fractional) counts."""

    word_ids: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.word_ids.shape != self.counts.shape:
            raise ValueError("word_ids and counts must align")

    @property
    def n_types(self):
        return self.word_ids.size

    @property
    def n_tokens(self):
        return float(self.counts.sum())


class Corpus:
    """Documents stored back to back in CSR form.

    Parameters
    ----------
    doc_ptr : ndarray of int64, shape (n_docs + 1,)
        Document d owns entries doc_ptr[d]:doc_ptr[d+1].
    word_ids : ndarray of int64
    counts : ndarray of float64
    V : int
        Vocabulary size.
    """

    def __init__(self, doc_ptr, word_ids, counts, V):
        self.doc_ptr = np.ascontiguousarray(doc_ptr, dtype=np.int64)
        self.word_ids = np.ascontiguousarray(word_ids, dtype=np.int64)
        self.counts = np.ascontiguousarray(counts, dtype=np.float64)
        self.V = int(V)
        if self.doc_ptr[0] != 0 or self.doc_ptr[-1] != self.word_ids.size:
            raise ValueError("doc_ptr does not span the token arrays")
        if np.any(np.diff(self.doc_ptr) < 0):
            raise ValueError("doc_ptr must be non-decreasing")
        if self.word_ids.size and (self.word_ids.min() < 0 or self.word_ids.max() >= self.V):
            raise ValueError(f"word ids must lie in [0, {self.V})")
        if np.any(self.counts <= 0):
            raise ValueError("counts must be positive")

    @classmethod
    def from_documents(cls, docs, V):
        lengths = [d.n_types for d in docs]
        ptr = np.zeros(len(docs) + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptr[1:])
        if docs:
            wids = np.concatenate([d.word_ids for d in docs]).astype(np.int64)
            cnts = np.concatenate([d.counts for d in docs]).astype(np.float64)
        else:
            wids, cnts = np.zeros(0, np.int64), np.zeros(0)
        return cls(ptr, wids, cnts, V)

    @classmethod
    def from_csr(cls, X):
        """Build from a scipy sparse document-term matrix (rows are documents)."""
        X = X.tocsr()
        X.sum_duplicates()
        X.eliminate_zeros()
        return cls(X.indptr, X.indices, X.data, X.shape[1])

    def to_csr(self):
        from scipy.sparse import csr_matrix

        return csr_matrix((self.counts, self.word_ids, self.doc_ptr), shape=(self.n_docs, self.V))

    @property
    def n_docs(self):
        return self.doc_ptr.size - 1

    def __len__(self):
        return self.n_docs

    def __getitem__(self, d):
        a, b = self.doc_ptr[d], self.doc_ptr[d + 1]
        return Document(self.word_ids[a:b], self.counts[a:b])

    def __iter__(self):
        for d in range(self.n_docs):
            yield self[d]

    @property
    def n_tokens(self):
        return float(self.counts.sum())

    def subset(self, doc_indices):
        return Corpus.from_documents([self[int(d)] for d in doc_indices], self.V)
