"""Minibatch training: stochastic (SVI), memoized (MVI) and full-batch drivers.

A task object adapts one model family to the drivers.  It exposes
`n_units`, `batch_stats(indices, g, counts)`, `global_step(stats)`,
`interpolate(g, target, rho)`, `elbo(stats, g)` and `heldout(g)`.
Statistics support `+`, `-`, `scaled(c)` and `zeros_like()`.
"""
import json
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from . import mixture as mix
from .counters import OpCounts
from .data import Batcher
from .lda import LdaSuffStats, LocalStepConfig, lda_elbo, lda_global_step, lda_summary, local_step_batch

__all__ = [
    "LearningRateSchedule",
    "MemoCache",
    "MixtureTask",
    "LdaTask",
    "svi_step",
    "mvi_step",
    "Trace",
    "run",
    "tree_reduce",
]


@dataclass(frozen=True)
class LearningRateSchedule:
    """rho_t = (delta + t)^(-kappa), clipped to 1; t counts steps from 0."""

    delta: float = 1.0
    kappa: float = 0.55

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0.5 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0.5, 1]")

    def rho(self, t):
        base = self.delta + t
        if base <= 1.0:
            return 1.0
        return float(base ** -self.kappa)


class MemoCache:
    """Per-batch statistics and their running whole-dataset sum."""

    def __init__(self, B, zero):
        self.B = int(B)
        self.zero = zero
        self.batches = [None] * self.B
        self.aggregate = zero.zeros_like()

    def update(self, b, new):
        if not 0 <= b < self.B:
            raise IndexError(f"unknown batch id {b} (have {self.B})")
        old = self.batches[b]
        agg = self.aggregate + new
        self.aggregate = agg if old is None else agg - old
        self.batches[b] = new
        return self.aggregate

    def reaggregate(self):
        """Recompute the aggregate from the stored batches, removing drift."""
        self.aggregate = tree_reduce([s for s in self.batches if s is not None], self.zero)
        return self.aggregate


def tree_reduce(parts, zero):
    """Pairwise sum in a fixed binary-tree order (bit-reproducible)."""
    parts = list(parts)
    if not parts:
        if zero is None:
            raise ValueError("nothing to reduce")
        return zero.zeros_like()
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


class _Chunked:
    """Shared chunking / reduction for batch statistics."""

    chunk = 1024
    workers = 1
    deterministic = True

    def _reduce_chunks(self, indices, fn):
        idx = np.asarray(indices)
        chunks = [idx[i : i + self.chunk] for i in range(0, idx.size, self.chunk)]
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                if not self.deterministic:
                    # reassociating mode: sum partials in completion order
                    total = None
                    for f in as_completed([pool.submit(fn, c) for c in chunks]):
                        total = f.result() if total is None else total + f.result()
                    return total
                parts = list(pool.map(fn, chunks))
        else:
            parts = [fn(c) for c in chunks]
        return tree_reduce(parts, None)


class MixtureTask(_Chunked):
    """Mixture model over the rows of X."""

    def __init__(self, X, family, alpha, L=None, heldout=None, chunk=2048, workers=1, deterministic=True):
        self.X = X
        self.family = family
        self.alpha = float(alpha)
        self.L = L
        self.heldout_X = heldout
        self.chunk = chunk
        self.workers = workers
        self.deterministic = deterministic

    @property
    def n_units(self):
        return len(self.X)

    def zero_stats(self, g):
        return mix.MixSuffStats.zeros(g.K, self.family)

    def batch_stats(self, indices, g, counts):
        def one(ix):
            c = OpCounts()
            Xb = self.X[ix]
            return _Counted(mix.summary_step(Xb, mix.local_step(Xb, g, self.L, c), self.family), c)

        return _merge_counted(self._reduce_chunks(indices, one), counts)

    def global_step(self, stats):
        return mix.global_step(stats, self.alpha, self.family)

    def interpolate(self, g, target, rho):
        return mix.interpolate(g, target, rho)

    def elbo(self, stats, g):
        return mix.elbo(stats, g)

    def heldout(self, g):
        if self.heldout_X is None:
            return None
        from .evaluation import mixture_heldout

        return mixture_heldout(self.heldout_X, g).score


class LdaTask(_Chunked):
    """LDA over the documents of a corpus.

    With `warm_start` the document-topic counts from the previous visit seed
    the next local step of that document; otherwise every visit starts cold.
    """

    def __init__(self, corpus, alpha, lambda_bar, cfg=LocalStepConfig(), heldout=None, warm_start=False,
                 chunk=256, workers=1, deterministic=True, keep_restart_log=False):
        self.corpus = corpus
        self.alpha = float(alpha)
        self.lambda_bar = float(lambda_bar)
        self.cfg = cfg
        self.heldout_splits = heldout
        self.warm_start = warm_start
        self.warm_counts = None
        self.chunk = chunk
        self.workers = workers
        self.deterministic = deterministic
        self.keep_restart_log = keep_restart_log
        self.restart_log = []

    @property
    def n_units(self):
        return self.corpus.n_docs

    def zero_stats(self, g):
        return LdaSuffStats.zeros(g.K, g.V)

    def batch_stats(self, indices, g, counts):
        if self.warm_start and self.warm_counts is None:
            self.warm_counts = np.full((self.corpus.n_docs, g.K), np.nan)

        def one(ix):
            c = OpCounts()
            sub = self.corpus.subset(ix)
            warm = self.warm_counts[ix] if self.warm_start else None
            res = local_step_batch(sub, g, self.cfg, warm, c)
            if self.warm_start:
                self.warm_counts[ix] = res.N
            if self.keep_restart_log:
                self.restart_log.append({
                    "docs": np.asarray(ix).copy(),
                    "objective_pre": res.objective_pre_restart.copy(),
                    "objective": res.objective.copy(),
                    "deltas": res.restart_deltas.copy(),
                    "accepted": res.restart_accepted.copy(),
                    "tried": res.restart_tried.copy(),
                })
            return _Counted(lda_summary(res), c)

        return _merge_counted(self._reduce_chunks(indices, one), counts)

    def global_step(self, stats):
        return lda_global_step(stats, self.alpha, self.lambda_bar)

    def interpolate(self, g, target, rho):
        from .lda import LdaGlobalState

        return LdaGlobalState.from_lam((1 - rho) * g.topics.lam + rho * target.topics.lam, g.alpha, g.lambda_bar)

    def elbo(self, stats, g):
        return lda_elbo(stats, g)

    def heldout(self, g):
        if self.heldout_splits is None:
            return None
        from .evaluation import doc_completion_score

        return doc_completion_score(self.heldout_splits, g.topic_means(), g.alpha, self.cfg).score


@dataclass
class _Counted:
    stats: object
    counts: OpCounts

    def __add__(self, other):
        return _Counted(self.stats + other.stats, self.counts + other.counts)


def _merge_counted(c, counts):
    if counts is not None:
        for f in ("exp_calls", "comparisons", "restart_proposals", "restart_accepts"):
            setattr(counts, f, getattr(counts, f) + getattr(c.counts, f))
    return c.stats


def svi_step(t, indices, g, task, sched, counts=None):
    """One stochastic natural-gradient step on a sampled batch.

    Returns (new_state, rescaled_batch_stats, rho).
    """
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ValueError("empty batch")
    stats = task.batch_stats(indices, g, counts).scaled(task.n_units / indices.size)
    target = task.global_step(stats)
    rho = sched.rho(t)
    return (target if rho == 1.0 else task.interpolate(g, target, rho)), stats, rho


def mvi_step(b, indices, g, task, cache, counts=None):
    """One memoized step: swap batch b's statistics in the aggregate, then a global step."""
    if not 0 <= b < cache.B:
        raise IndexError(f"unknown batch id {b} (have {cache.B})")
    new = task.batch_stats(indices, g, counts)
    agg = cache.update(b, new)
    return task.global_step(agg), agg


@dataclass
class Trace:
    """Per-lap metrics rows (see FIELDS) plus the final global state."""

    FIELDS = ("lap", "t", "rho", "elapsed_sec", "elbo", "heldout",
              "n_exp_calls", "n_restart_accepts", "n_restart_proposals")
    rows: list = field(default_factory=list)
    state: object = None
    counts: OpCounts = field(default_factory=OpCounts)

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_jsonl(self, path, timings=True):
        """Write one JSON object per lap; with timings=False elapsed_sec is null
        so that deterministic runs give byte-identical files."""
        with open(path, "w") as fh:
            for r in self.rows:
                r = dict(r)
                if not timings:
                    r["elapsed_sec"] = None
                fh.write(json.dumps({k: r[k] for k in self.FIELDS}) + "\n")


def run(task, g0, alg="mvi", batches=1, laps=1, schedule=None, seed=0, on_lap=None, reaggregate_every=10):
    """Train for a fixed number of laps.

    Parameters
    ----------
    task : MixtureTask or LdaTask
    g0 : initial global state
    alg : {'mvi', 'svi', 'full'}
    batches : int
        Number of batches B per lap ('full' forces B=1).
    schedule : LearningRateSchedule, optional
        Used by SVI.
    on_lap : callable, optional
        Called as on_lap(row, state) after every lap.

    Returns
    -------
    Trace
    """
    if alg not in ("mvi", "svi", "full"):
        raise ValueError(f"unknown algorithm {alg!r}")
    if laps < 0:
        raise ValueError("laps must be >= 0")
    if alg == "full":
        batches = 1
    schedule = schedule or LearningRateSchedule()
    batcher = Batcher(task.n_units, batches, "sample" if alg == "svi" else "fixed_partition", seed)
    cache = MemoCache(batches, task.zero_stats(g0)) if alg != "svi" else None
    g = g0
    trace = Trace(state=g0)
    t = 0
    t0 = time.perf_counter()
    for lap in range(1, laps + 1):
        lap_counts = OpCounts()
        rho = None
        last_stats = None
        for b, idx in batcher.lap():
            if alg == "svi":
                g, last_stats, rho = svi_step(t, idx, g, task, schedule, lap_counts)
            else:
                g, last_stats = mvi_step(b, idx, g, task, cache, lap_counts)
            t += 1
        if cache is not None and reaggregate_every and lap % reaggregate_every == 0:
            last_stats = cache.reaggregate()
            g = task.global_step(last_stats)
        elapsed = time.perf_counter() - t0
        row = {
            "lap": lap,
            "t": t,
            "rho": rho,
            "elapsed_sec": elapsed,
            "elbo": task.elbo(last_stats, g),
            "heldout": task.heldout(g),
            "n_exp_calls": lap_counts.exp_calls,
            "n_restart_accepts": lap_counts.restart_accepts,
            "n_restart_proposals": lap_counts.restart_proposals,
        }
        trace.rows.append(row)
        trace.counts = trace.counts + lap_counts
        if on_lap is not None:
            on_lap(row, g)
        # keep evaluation time off the training clock
        t0 += time.perf_counter() - (t0 + elapsed)
    trace.state = g
    return trace
