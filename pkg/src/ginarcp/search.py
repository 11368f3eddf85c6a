"""Island genetic algorithm with annealing-style neighbourhood moves.

A chromosome is a length-``n`` integer vector.  ``genes[t] = p >= 0`` starts a
segment of order ``p`` at ``t`` and ``-1`` means "no change-point here".  Each
segment start is followed by ``min_span(p) - 1`` forced ``-1`` genes.  All
operators that rebuild a gene string do so by a left-to-right scan that only
accepts a change-point once the previous protected run has ended and the new
segment still fits before ``n``.

Randomness is drawn up front by the Python operators and handed to pure scan
kernels, so results depend only on the per-island generator streams.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .estimate import SegmentWindow, as_series, fit_pqml, yule_walker
from .mdl import FeasibilityError, FitCache, MdlScore, Segmentation, _score, min_span

MSPAN = K.MIN_SPAN.astype(np.int64)
MUTATION_FRESH = ("uniform", "parent_points", "random_chromosome")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class GaConfig:
    """Tuning constants of the search.

    ``pi_B`` and ``pi_C`` default to ``10/n`` and ``(n-10)/n``; leave them as
    ``None`` to use those length-dependent values.

    ``mutation_fresh`` chooses where the replacement value of a mutated gene
    comes from. ``"random_chromosome"`` (default) reads it off a freshly
    generated chromosome, so a replaced gene is a new change-point only where
    that chromosome has one, with a uniformly drawn order. ``"uniform"``
    draws an order at every position, which makes almost every free position
    a change-point. ``"parent_points"`` redraws orders only at the parent's
    own change-points.
    """

    P0: int = 20
    pi_B: float | None = None
    pi_C: float | None = None
    pi_cross: float = 0.7
    pi_P: float = 0.3
    pi_N: float = 0.3
    first_pi_P: float = 0.5
    shift_low: int = -10
    shift_high: int = 10
    pi_Ap: float = 0.05
    n_islands: int = 40
    migrate_every: int = 5
    migrate_count: int = 2
    subpop_size: int = 40
    patience: int = 10
    max_generations: int = 150
    seed: int = 0
    rank_weighting: str = "inverse"
    mutation_fresh: str = "random_chromosome"
    anneal: bool = True
    workers: int = 1
    budget_seconds: float | None = None

    def __post_init__(self):
        probs = {k: getattr(self, k) for k in ("pi_B", "pi_C", "pi_cross", "pi_P", "pi_N",
                                               "first_pi_P", "pi_Ap")}
        for k, v in probs.items():
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{k}={v} is not a probability")
        if self.pi_P + self.pi_N > 1.0:
            raise ValueError("pi_P + pi_N must not exceed 1")
        if not 0 <= self.P0 < MSPAN.size:
            raise ValueError(f"P0 must lie in [0, {MSPAN.size - 1}]")
        if self.n_islands < 1:
            raise ValueError("n_islands must be at least 1")
        if self.subpop_size < 2:
            raise ValueError("subpop_size must be at least 2")
        if self.migrate_every < 1 or self.migrate_count < 0:
            raise ValueError("migrate_every must be >= 1 and migrate_count >= 0")
        if self.migrate_count > self.subpop_size:
            raise ValueError("migrate_count cannot exceed subpop_size")
        if self.shift_low > self.shift_high:
            raise ValueError("shift window is empty")
        if self.rank_weighting not in ("inverse", "reversed"):
            raise ValueError("rank_weighting must be 'inverse' or 'reversed'")
        if self.mutation_fresh not in MUTATION_FRESH:
            raise ValueError(f"mutation_fresh must be one of {MUTATION_FRESH}")
        if self.max_generations < 1 or self.patience < 1:
            raise ValueError("max_generations and patience must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    def birth_prob(self, n):
        return 10.0 / n if self.pi_B is None else self.pi_B

    def crossover_prob(self, n):
        return max(n - 10.0, 0.0) / n if self.pi_C is None else self.pi_C

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown GaConfig keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------- encoding


def encode(seg):
    """Gene string of a feasible segmentation."""
    seg.validate(max_order=MSPAN.size - 1)
    genes = np.full(seg.n, -1, dtype=np.int64)
    for s, _, p in seg.segments():
        genes[s] = p
    return genes


def decode(genes, max_order=None):
    genes = np.asarray(genes, dtype=np.int64)
    mo = MSPAN.size - 1 if max_order is None else max_order
    if genes.ndim != 1 or not K.is_valid(genes, MSPAN, mo):
        raise EncodingError("gene string violates the first-gene or minimum-span rules")
    pos = np.flatnonzero(genes >= 0)
    return Segmentation(genes.size, tuple(pos[1:].tolist()), tuple(genes[pos].tolist()))


def _feasible_orders(n, P0):
    return np.flatnonzero(MSPAN[: P0 + 1] <= n)


def _fresh_orders(n, cfg, rng):
    fresh = rng.integers(0, cfg.P0 + 1, size=n)
    feas = _feasible_orders(n, cfg.P0)
    fresh[0] = feas[rng.integers(feas.size)]
    return fresh.astype(np.int64)


def random_chromosome(n, cfg, rng):
    feas = _feasible_orders(n, cfg.P0)
    if feas.size == 0:
        raise FeasibilityError(f"series of length {n} is shorter than every minimum span")
    u = rng.random(n)
    orders = _fresh_orders(n, cfg, rng)
    return K.scan_random(n, u, orders, cfg.birth_prob(n), MSPAN)


# ---------------------------------------------------------------- selection


def rank_weights(size, scheme="inverse"):
    ranks = np.arange(1, size + 1, dtype=float)
    w = 1.0 / ranks if scheme == "inverse" else size - ranks + 1.0
    return w / w.sum()


def _ranked_draw(scores, rng, scheme):
    order = np.argsort(scores, kind="stable")
    cdf = np.cumsum(rank_weights(len(scores), scheme))
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return int(order[min(i, len(order) - 1)])


def roulette_select(scores, rng, scheme="inverse", max_redraws=10):
    """Indices of two parents drawn with probability proportional to rank weights.

    Rank 1 is the lowest MDL.  The second draw is repeated up to
    ``max_redraws`` times while it equals the first; after that the
    duplicate is accepted.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty population")
    a = _ranked_draw(scores, rng, scheme)
    b = _ranked_draw(scores, rng, scheme)
    tries = 0
    while b == a and tries < max_redraws:
        b = _ranked_draw(scores, rng, scheme)
        tries += 1
    return a, b


# ---------------------------------------------------------------- variation


def uniform_crossover(f, m, rng):
    if f.shape != m.shape:
        raise ValueError("parents must have equal length")
    return K.scan_uniform(f, m, rng.random(f.size), MSPAN)


def one_point_crossover(f, m, rng):
    """Splice ``f[:k]`` with ``m[k:]`` and repair the seam.

    ``k`` is uniform over ``{1, ..., n}`` restricted to splice points that do
    not land inside a protected run of ``f``.  The spliced string is rebuilt
    by the acceptance scan, which demotes any change-point of ``m`` falling in
    the run still open at the seam.
    """
    if f.shape != m.shape:
        raise ValueError("parents must have equal length")
    n = f.size
    free = K.unforced_mask(f, MSPAN)
    cands = np.append(np.flatnonzero(free[1:]) + 1, n)
    k = int(cands[rng.integers(cands.size)])
    if k == n:
        return f.copy()
    return K.scan_accept(np.concatenate((f[:k], m[k:])), MSPAN)


def mutate(parent, cfg, rng):
    n = parent.size
    u = rng.random(n)
    if cfg.mutation_fresh == "random_chromosome":
        fresh = random_chromosome(n, cfg, rng)
    else:
        fresh = _fresh_orders(n, cfg, rng)
        if cfg.mutation_fresh == "parent_points":
            fresh = np.where(parent >= 0, fresh, -1)
    return K.scan_mutate(parent, u, fresh, cfg.pi_P, cfg.pi_N, cfg.first_pi_P, MSPAN)


def shift_change_points(seg, shifts):
    """Move change-point ``j`` by ``shifts[j]`` where the result stays feasible.

    Processed left to right, each move is checked against the already-moved
    predecessor and the unmoved successor; a move that breaks a minimum span
    is abandoned and that change-point stays put.
    """
    taus = list(seg.taus)
    b = [0, *taus, seg.n]
    for j in range(seg.m):
        cand = taus[j] + int(shifts[j])
        left = b[j]
        right = b[j + 2]
        if cand - left >= MSPAN[seg.orders[j]] and right - cand >= MSPAN[seg.orders[j + 1]]:
            taus[j] = cand
            b[j + 1] = cand
    return Segmentation(seg.n, tuple(taus), seg.orders)


def anneal_tau(best, cfg, rng):
    seg = decode(best)
    shifts = rng.integers(cfg.shift_low, cfg.shift_high + 1, size=seg.m)
    return encode(shift_change_points(seg, shifts))


def yw_order(window, P0, threshold):
    """Largest lag ``u`` with Yule-Walker coefficient above ``threshold`` (0 if none)."""
    order = min(P0, window.length - 2)
    if order <= 0:
        return 0
    phi = yule_walker(window, order)
    hits = np.flatnonzero(phi > threshold)
    return int(hits[-1] + 1) if hits.size else 0


def anneal_p(best, series, cfg):
    x = as_series(series)
    seg = decode(best)
    orders = list(seg.orders)
    for j, (s, e, p) in enumerate(seg.segments()):
        q = yw_order(SegmentWindow(x, s, e, p), cfg.P0, cfg.pi_Ap)
        if e - s >= MSPAN[q]:
            orders[j] = q
    return encode(Segmentation(seg.n, seg.taus, tuple(orders)))


def score_genes(genes, cache, max_order=None):
    assert K.is_valid(genes, MSPAN, MSPAN.size - 1 if max_order is None else max_order)
    pos = np.flatnonzero(genes >= 0)
    seg = Segmentation(genes.size, tuple(pos[1:].tolist()), tuple(genes[pos].tolist()))
    return _score(cache, seg).total


def anneal_step(best, series, cache, cfg, rng, best_score=None):
    """Best of the incumbent, its change-point shift and its order rewrite.

    Returns ``(chromosome, score, changed)``; ties keep the incumbent.
    """
    inc = best_score if best_score is not None else score_genes(best, cache, cfg.P0)
    cand_tau = anneal_tau(best, cfg, rng)
    cand_p = anneal_p(best, series, cfg)
    out, out_score = best, inc
    for cand in (cand_tau, cand_p):
        if np.array_equal(cand, best):
            continue
        sc = score_genes(cand, cache, cfg.P0)
        if sc < out_score:
            out, out_score = cand, sc
    return out, out_score, out is not best


# ---------------------------------------------------------------- islands


@dataclass
class Island:
    index: int
    genes: list
    scores: np.ndarray
    rng: np.random.Generator
    cache: FitCache
    best_trace: list = field(default_factory=list)
    anneal_tries: int = 0
    anneal_changes: int = 0

    @property
    def best_index(self):
        return int(np.argmin(self.scores))

    @property
    def best_score(self):
        return float(self.scores.min())


def init_island(index, series, cfg, seed_seq, cache):
    rng = np.random.default_rng(seed_seq)
    n = series.size
    genes = [random_chromosome(n, cfg, rng) for _ in range(cfg.subpop_size)]
    scores = np.array([score_genes(g, cache, cfg.P0) for g in genes])
    isl = Island(index, genes, scores, rng, cache)
    isl.best_trace.append(isl.best_score)
    return isl


def _offspring(genes, scores, n, cfg, rng):
    a, b = roulette_select(scores, rng, cfg.rank_weighting)
    if rng.random() < cfg.crossover_prob(n):
        if rng.random() < cfg.pi_cross:
            return uniform_crossover(genes[a], genes[b], rng)
        return one_point_crossover(genes[a], genes[b], rng)
    return mutate(genes[a], cfg, rng)


def evolve_island(island, series, cfg):
    """Advance one island by a generation, in place.

    Offspring replace the whole population; the new best is then passed
    through :func:`anneal_step`, and the worst slot is overwritten by the
    previous generation's best (elitism).  Returns whether annealing changed
    the incumbent.
    """
    rng = island.rng
    n = series.size
    prev_best = island.genes[island.best_index]
    prev_score = island.best_score
    kids = [_offspring(island.genes, island.scores, n, cfg, rng) for _ in range(cfg.subpop_size)]
    scores = np.array([score_genes(g, island.cache, cfg.P0) for g in kids])
    changed = False
    if cfg.anneal:
        i = int(np.argmin(scores))
        new, sc, changed = anneal_step(kids[i], series, island.cache, cfg, rng, scores[i])
        kids[i] = new
        scores[i] = sc
        island.anneal_tries += 1
        island.anneal_changes += int(changed)
    w = int(np.argmax(scores))
    kids[w] = prev_best
    scores[w] = prev_score
    island.genes = kids
    island.scores = scores
    island.best_trace.append(island.best_score)
    return changed


def migrate(islands, count):
    """Ring migration: island ``j`` receives the best ``count`` of island ``j-1``."""
    if count == 0 or len(islands) < 2:
        return
    snap = []
    for isl in islands:
        idx = np.argsort(isl.scores, kind="stable")[:count]
        snap.append([(isl.genes[i].copy(), float(isl.scores[i])) for i in idx])
    for j, isl in enumerate(islands):
        incoming = snap[j - 1]
        worst = np.argsort(-isl.scores, kind="stable")[:count]
        for slot, (g, s) in zip(worst, incoming):
            isl.genes[slot] = g
            isl.scores[slot] = s


@dataclass
class SearchResult:
    segmentation: Segmentation
    score: MdlScore
    fits: list
    diagnostics: dict

    def to_dict(self):
        return {
            "segmentation": self.segmentation.to_dict(),
            "mdl": self.score.to_dict(),
            "segments": [f.to_dict() for f in self.fits],
            "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "records"},
        }


def island_seeds(master, count):
    """Per-island seed sequences; island ``i`` always gets spawn key ``(i,)``."""
    return [np.random.SeedSequence(master, spawn_key=(i,)) for i in range(count)]


def run_auto_pginarm_sa(series, cfg=None, log=None):
    """Minimise MDL over segmentations of ``series`` with the island GA.

    Parameters
    ----------
    series : array_like
        Non-negative counts.
    cfg : GaConfig, optional
    log : file-like, optional
        Receives one JSON record per island and generation.

    Returns
    -------
    SearchResult
        Best segmentation, its MDL breakdown, refitted segments with sandwich
        covariances and run diagnostics.
    """
    cfg = cfg or GaConfig()
    x = as_series(series)
    n = x.size
    if n < min_span(0) or _feasible_orders(n, cfg.P0).size == 0:
        raise FeasibilityError(f"series of length {n} is too short to segment")
    t0 = time.perf_counter()
    shared = FitCache(x) if cfg.workers == 1 else None
    seeds = island_seeds(cfg.seed, cfg.n_islands)
    islands = [
        init_island(i, x, cfg, seeds[i], shared if shared is not None else FitCache(x))
        for i in range(cfg.n_islands)
    ]
    records = []
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def step(isl):
        return evolve_island(isl, x, cfg)

    best = min(isl.best_score for isl in islands)
    global_trace = [best]
    stale = 0
    gen = 0
    truncated = False
    stop_reason = "max_generations"
    try:
        while gen < cfg.max_generations:
            gen += 1
            changed = list(pool.map(step, islands)) if pool else [step(i) for i in islands]
            for isl, ch in zip(islands, changed):
                rec = {"generation": gen, "island": isl.index, "best_mdl": isl.best_score,
                       "anneal_changed": bool(ch)}
                records.append(rec)
                if log is not None:
                    log.write(json.dumps(rec) + "\n")
            if gen % cfg.migrate_every == 0:
                migrate(islands, cfg.migrate_count)
            cur = min(isl.best_score for isl in islands)
            global_trace.append(cur)
            if gen % cfg.migrate_every == 0:
                if cur < best:
                    best = cur
                    stale = 0
                else:
                    stale += 1
                if stale >= cfg.patience:
                    stop_reason = "no_improvement"
                    break
            if cfg.budget_seconds is not None and time.perf_counter() - t0 > cfg.budget_seconds:
                truncated = True
                stop_reason = "budget"
                break
    finally:
        if pool:
            pool.shutdown()

    winner = min(islands, key=lambda isl: (isl.best_score, isl.index))
    genes = winner.genes[winner.best_index]
    seg = decode(genes, cfg.P0)
    score = _score(winner.cache, seg)
    fits = [fit_pqml(SegmentWindow(x, s, e, p)) for s, e, p in seg.segments()]
    diagnostics = {
        "generations": gen,
        "stop_reason": stop_reason,
        "truncated": truncated,
        "anneal_tries": sum(i.anneal_tries for i in islands),
        "anneal_changes": sum(i.anneal_changes for i in islands),
        "best_trace": global_trace,
        "island_traces": [i.best_trace for i in islands],
        "fits_computed": shared.misses if shared is not None else sum(i.cache.misses for i in islands),
        "elapsed_seconds": time.perf_counter() - t0,
        "seed": cfg.seed,
        "records": records,
    }
    return SearchResult(seg, score, fits, diagnostics)
