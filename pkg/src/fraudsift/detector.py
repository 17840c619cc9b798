"""Seeded greedy shaving: spectral seed generation, the peeling loop, and the
driver that returns the best user block with its sink ranking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .contrast import ContrastState, SignalConfig, SignalContext
from .graph import BipartiteGraph, DataError
from .spectral import ConvergenceError, truncated_svd

logger = logging.getLogger(__name__)

SIGNAL_NAMES = ("alpha", "phi", "kappa")


@dataclass(frozen=True)
class DetectorConfig:
    """Detection knobs; ``signals=None`` enables whatever the data supports.

    The SVD settings are deliberately loose: seeding only consumes the
    ordering and rough magnitude of singular-vector entries, so the seeds
    from a partially converged subspace are as good as fully converged ones
    at a fraction of the cost. Raise svd_max_iter / lower svd_tol when the
    vectors themselves matter.
    """

    base: float = 32.0
    num_seeds: int = 10
    signals: tuple[str, ...] | None = None
    time_bin: float = 86400.0
    neutral: tuple[float, ...] | None = None
    cap_exponent: float | None = 1 / 1.6
    smoothing: float = 1e-3
    kappa_norm: str = "evolving"
    significance: float = 0.5
    svd_tol: float = 1e-3
    svd_max_iter: int = 40
    svd_seed: int = 42
    strict_svd: bool = False


def resolve_signals(graph: BipartiteGraph, config: DetectorConfig) -> SignalConfig:
    """Turn the requested signal set into a SignalConfig, validating availability.

    With an explicit request, asking for a signal the data cannot support is
    an error; the default enables every signal the data carries.
    """
    if config.signals is None:
        use_alpha = True
        use_phi = graph.has_timestamps
        use_kappa = graph.has_ratings
    else:
        unknown = set(config.signals) - set(SIGNAL_NAMES)
        if unknown:
            raise DataError(f"unknown signals: {sorted(unknown)}")
        if not config.signals:
            raise DataError("at least one signal must be enabled")
        use_alpha = "alpha" in config.signals
        use_phi = "phi" in config.signals
        use_kappa = "kappa" in config.signals
        if use_phi and not graph.has_timestamps:
            raise DataError("signal 'phi' requires timestamps; matricization requires timestamps")
        if use_kappa and not graph.has_ratings:
            raise DataError("signal 'kappa' requires ratings")
    return SignalConfig(base=config.base, use_alpha=use_alpha, use_phi=use_phi,
                        use_kappa=use_kappa, smoothing=config.smoothing,
                        kappa_norm=config.kappa_norm, significance=config.significance)


@dataclass
class DetectionResult:
    """Best user block found, its objective, and the per-sink ranking scores."""

    users: tuple[str, ...]
    user_indices: np.ndarray
    objective: float
    sink_scores: np.ndarray
    trace: tuple[tuple[int, float], ...]
    meta: dict = field(default_factory=dict)

    def top_objects(self, graph: BipartiteGraph, n: int | None = None):
        order = np.argsort(-self.sink_scores, kind="stable")
        if n is not None:
            order = order[:n]
        return [(graph.object_ids[i], float(self.sink_scores[i])) for i in order]


def greedy_shaving(graph: BipartiteGraph, seed_users,
                   config: DetectorConfig | None = None,
                   context: SignalContext | None = None) -> DetectionResult:
    """Peel minimum-score users off the seed one at a time, returning the prefix
    of the trajectory that maximizes the objective."""
    config = config or DetectorConfig()
    if context is None:
        context = SignalContext(graph, resolve_signals(graph, config))
    state = ContrastState.build(graph, seed_users, context)
    best_obj = state.objective()
    best_removals = 0
    trace: list[tuple[int, float]] = [(state.n_active, best_obj)]
    removal_order: list[int] = []
    while state.n_active > 0:
        r = state.argmin_active_score()
        removal_order.append(r)
        state._remove_local(r)
        if state.n_active == 0:
            break
        obj = state.objective()
        trace.append((state.n_active, obj))
        if obj > best_obj:
            best_obj = obj
            best_removals = len(removal_order)

    keep = np.ones(state.seed_idx.size, dtype=bool)
    keep[removal_order[:best_removals]] = False
    final = ContrastState(graph, context, state.seed_idx, active=keep)
    sink_scores = np.zeros(graph.n_objects, dtype=np.float64)
    sink_scores[final.domain] = final.engagement_from_set() * final.P
    users_idx = state.seed_idx[keep]
    users = tuple(sorted(graph.user_ids[i] for i in users_idx))
    return DetectionResult(
        users=users, user_indices=users_idx, objective=final.objective(),
        sink_scores=sink_scores, trace=tuple(trace),
        meta={"seed_size": int(state.seed_idx.size),
              "kappa_rescales": state.n_rescales})


def svd_seeds(matrix, num_vectors: int, cap_exponent: float | None = 1 / 1.6,
              tol: float = 1e-4, max_iter: int = 150, seed: int = 42,
              strict: bool = False) -> tuple[list[np.ndarray], dict]:
    """Candidate user sets from the top left singular vectors of a users-by-X matrix.

    Per vector, users are ranked by decreasing component and truncated where
    the component falls to 1/sqrt(n_users) or below; an extra ordering on the
    negated vector is tried when the vector carries mass on both signs. The
    optional cap bounds every seed at n_users^cap_exponent entries.
    """
    A = matrix.to_csr() if hasattr(matrix, "to_csr") else matrix
    n_users = A.shape[0]
    k = min(num_vectors, min(A.shape))
    if k < num_vectors:
        logger.warning("rank limits seeds to %d of %d requested vectors", k, num_vectors)
    try:
        U, s, _ = truncated_svd(A, k, tol=tol, max_iter=max_iter, seed=seed)
    except ConvergenceError as exc:
        if strict:
            raise
        logger.warning("using best-effort singular vectors: %s", exc)
        U, s, _ = exc.best

    threshold = 1.0 / math.sqrt(n_users)
    cap = n_users if cap_exponent is None else max(1, int(n_users ** cap_exponent))
    seeds: list[np.ndarray] = []
    seen: set[frozenset] = set()
    sizes: list[int] = []
    for i in range(U.shape[1]):
        vec = U[:, i]
        orderings = [vec]
        if (vec < -threshold).any():
            orderings.append(-vec)
        for v in orderings:
            order = np.argsort(-v, kind="stable")
            n_keep = int((v > threshold).sum())
            idx = np.sort(order[:min(n_keep, cap)])
            if idx.size == 0:
                continue
            key = frozenset(idx.tolist())
            if key in seen:
                continue
            seen.add(key)
            seeds.append(idx)
            sizes.append(int(idx.size))
    return seeds, {"n_vectors": int(U.shape[1]), "seed_sizes": sizes,
                   "singular_values": s.tolist(), "cap": cap}


def default_rating_clusters(scale):
    """Cluster ratings into low / neutral / high around the scale's neutral band."""
    lo = min(scale.neutral)
    hi = max(scale.neutral)

    def cluster(value: float) -> int:
        if value < lo:
            return 0
        if value > hi:
            return 2
        return 1

    return cluster


def matricize(graph: BipartiteGraph, time_bin: float = 86400.0,
              rating_clusters=None, column_weights: np.ndarray | None = None):
    """Flatten events into a users-by-(object, time-bin, rating-cluster) count matrix.

    Only observed triples become columns; each column inherits its object's
    suspiciousness weight when ``column_weights`` is given.
    """
    if not graph.has_timestamps:
        raise DataError("matricization requires timestamps")
    if time_bin <= 0:
        raise DataError("time bin must be positive")
    us, vs, ts, ratings = graph.event_arrays()
    bins = ((ts - ts.min()) / float(time_bin)).astype(np.int64)
    if graph.has_ratings:
        cluster_fn = rating_clusters or default_rating_clusters(graph.scale)
        values = np.unique(ratings)
        lut = {v: int(cluster_fn(float(v))) for v in values}
        clusters = np.asarray([lut[v] for v in ratings], dtype=np.int64)
        n_clusters = max(lut.values()) + 1
    else:
        clusters = np.zeros(us.size, dtype=np.int64)
        n_clusters = 1

    n_bins = int(bins.max()) + 1
    col_key = (vs * n_bins + bins) * n_clusters + clusters
    uniq_cols, col_of_event = np.unique(col_key, return_inverse=True)
    cell_key = us * uniq_cols.size + col_of_event
    uniq_cells, cell_counts = np.unique(cell_key, return_counts=True)
    rows = (uniq_cells // uniq_cols.size).astype(np.int64)
    cols = (uniq_cells % uniq_cols.size).astype(np.int64)
    data = cell_counts.astype(np.float64)

    col_objects = (uniq_cols // n_clusters // n_bins).astype(np.int64)
    col_bins = (uniq_cols // n_clusters % n_bins).astype(np.int64)
    col_clusters = (uniq_cols % n_clusters).astype(np.int64)
    if column_weights is not None:
        data = data * np.asarray(column_weights, dtype=np.float64)[col_objects[cols]]
    m = sp.coo_matrix((data, (rows, cols)),
                      shape=(graph.n_users, uniq_cols.size)).tocsr()
    labels = {"object": col_objects, "time_bin": col_bins, "rating_cluster": col_clusters}
    return m, labels


def fast_greedy(graph: BipartiteGraph, config: DetectorConfig | None = None,
                context: SignalContext | None = None) -> DetectionResult:
    """Run greedy shaving from every spectral seed and keep the best block.

    Seeds come from the flattened attribute matrix when the temporal signal is
    active, from the plain weighted adjacency otherwise.
    """
    config = config or DetectorConfig()
    if graph.n_events == 0:
        raise DataError("empty input")
    if config.neutral is not None and graph.scale is not None:
        from .graph import RatingScale

        graph.scale = RatingScale(graph.scale.values, neutral=config.neutral)
    sig = resolve_signals(graph, config)
    if context is None:
        context = SignalContext(graph, sig)

    if context.use_phi:
        design, _ = matricize(graph, time_bin=config.time_bin,
                              column_weights=context.sigma)
    else:
        design = graph.counts_matrix(weighted=True)

    seeds, seed_meta = svd_seeds(
        design, config.num_seeds, cap_exponent=config.cap_exponent,
        tol=config.svd_tol, max_iter=config.svd_max_iter, seed=config.svd_seed,
        strict=config.strict_svd)
    if not seeds:
        raise DataError("no usable seeds above the truncation threshold")

    best: DetectionResult | None = None
    n_degenerate = 0
    for i, seed in enumerate(seeds):
        try:
            result = greedy_shaving(graph, seed, config, context)
        except DataError as exc:
            n_degenerate += 1
            logger.debug("seed %d degenerate: %s", i, exc)
            continue
        if best is None or result.objective > best.objective:
            best = result
    if best is None:
        raise DataError("all seeds degenerate")
    best.meta.update(seed_meta)
    best.meta["n_degenerate_seeds"] = n_degenerate
    best.meta["signals"] = {"alpha": sig.use_alpha, "phi": context.use_phi,
                            "kappa": context.use_kappa}
    return best
