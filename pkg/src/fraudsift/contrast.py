"""Contrast suspiciousness: dynamic sink scoring against a shrinking user set.

Every sink gets a score in (0, 1] combining three signals, each mapped
through an exponential scale b^(x-1): the involvement ratio of the current
user set in the sink's traffic, the share of in-burst activity the set
contributed, and the balance-weighted divergence between the set's ratings
and everyone else's. ContrastState maintains the per-sink scores, per-user
scores, and the running objective exactly under single-user removals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import temporal
from .graph import BipartiteGraph, DataError, concat_ranges

logger = logging.getLogger(__name__)


def suspicion_scale(x: float, base: float) -> float:
    """Exponential belief scale b^(x-1) mapping [0, 1] onto (1/b, 1]."""
    if base <= 1:
        raise DataError("scaling base must exceed 1")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"signal value {x} outside [0, 1]")
    return float(base ** (x - 1.0))


def involvement_ratio(engaged: float, total: float) -> float:
    """Fraction of a sink's weighted traffic coming from the tracked user set."""
    if total <= 0:
        raise DataError("isolated sink")
    if engaged < 0 or engaged > total * (1 + 1e-12):
        raise ValueError("engagement exceeds the sink total")
    return min(engaged / total, 1.0)


def rating_divergence(counts_set: np.ndarray, counts_rest: np.ndarray,
                      f_set: float, f_rest: float, smoothing: float = 1e-3) -> float:
    """Balance-weighted KL divergence between two non-neutral rating histograms.

    Additive smoothing keeps the divergence finite on disjoint supports; the
    balance factor min(f_set/f_rest, f_rest/f_set) suppresses sinks where one
    side contributes almost nothing. Sinks without ratings score 0.
    """
    nA = np.asarray(counts_set, dtype=np.float64)
    nR = np.asarray(counts_rest, dtype=np.float64)
    if nA.size == 0 or (nA.sum() + nR.sum()) == 0:
        return 0.0
    if f_set <= 0 or f_rest <= 0:
        return 0.0
    c = nA.size
    p = (nA + smoothing) / (nA.sum() + smoothing * c)
    q = (nR + smoothing) / (nR.sum() + smoothing * c)
    kl = float((p * np.log(p / q)).sum())
    balance = min(f_set / f_rest, f_rest / f_set)
    return kl * balance


def contrast_score(alpha, phi, kappa, base: float,
                   use_alpha: bool = True, use_phi: bool = True, use_kappa: bool = True):
    """Joint suspiciousness b^(sum of enabled (signal - 1) terms); signals absent
    from the data contribute a factor of one."""
    expo = np.zeros_like(np.asarray(alpha, dtype=np.float64))
    if use_alpha:
        expo = expo + (np.asarray(alpha, dtype=np.float64) - 1.0)
    if use_phi:
        expo = expo + (np.asarray(phi, dtype=np.float64) - 1.0)
    if use_kappa:
        expo = expo + (np.asarray(kappa, dtype=np.float64) - 1.0)
    return base ** expo


@dataclass(frozen=True)
class SignalConfig:
    """Which signals participate and how they are scaled and normalized."""

    base: float = 32.0
    use_alpha: bool = True
    use_phi: bool = True
    use_kappa: bool = True
    smoothing: float = 1e-3
    kappa_norm: str = "evolving"  # or "initial": freeze the max at seed time
    significance: float = 0.5

    def __post_init__(self):
        if self.base <= 1:
            raise DataError("scaling base must exceed 1")
        if self.kappa_norm not in ("evolving", "initial"):
            raise DataError("kappa_norm must be 'evolving' or 'initial'")


class SignalContext:
    """Graph-wide precompute shared by every shaving run: spike profiles, the
    per-pair burst weights behind the temporal signal, drop-based column
    weights, and per-sink rating tables."""

    def __init__(self, graph: BipartiteGraph, config: SignalConfig | None = None,
                 keep_profiles: bool = False):
        config = config or SignalConfig()
        self.graph = graph
        self.use_phi = config.use_phi and graph.has_timestamps
        self.use_kappa = config.use_kappa and graph.has_ratings
        self.config = config
        nv, npairs = graph.n_objects, graph.n_pairs

        self.sink_event_total = graph.sink_event_counts()
        self.pair_phi_weight = np.zeros(npairs, dtype=np.float64)
        self.sink_phi_total = np.zeros(nv, dtype=np.float64)
        self.profiles: list | None = [] if keep_profiles else None
        self.hists: list | None = [] if keep_profiles else None

        sigma = np.ones(nv, dtype=np.float64)
        if self.use_phi:
            drop_w = np.zeros(nv, dtype=np.float64)
            indptr = graph.sink_event_indptr
            for v in range(nv):
                lo, hi = indptr[v], indptr[v + 1]
                times = graph.sink_event_time[lo:hi]
                hist, profile = temporal.build_profile(times, significance=config.significance)
                if keep_profiles:
                    self.profiles.append(profile)
                    self.hists.append(hist)
                if profile.pairs:
                    w = temporal.burst_event_weights(profile, times.astype(np.float64))
                    self.sink_phi_total[v] = w.sum()
                    np.add.at(self.pair_phi_weight, graph.sink_event_pair[lo:hi], w)
                drop_w[v] = temporal.drop_edge_weight(profile.max_drop)
            sigma = temporal.sigma_from_drop_weights(drop_w)
            self.drop_weights = drop_w
        else:
            self.drop_weights = np.zeros(nv, dtype=np.float64)

        if graph.sink_prior is not None:
            sigma = sigma * graph.sink_prior
        self.sigma = sigma
        graph.set_sigma(sigma)

        if self.use_kappa:
            scale = graph.scale
            if scale is None:
                raise DataError("rating signal requires a declared or inferred scale")
            informative = [v for v in scale.values if v not in scale.neutral]
            self.category_values = np.asarray(informative, dtype=np.float64)
            c = len(informative)
            self.n_categories = c
            cat_of_value = {v: i for i, v in enumerate(informative)}
            ev_rating = graph.event_rating
            ev_cat = np.full(ev_rating.size, -1, dtype=np.int64)
            for value, i in cat_of_value.items():
                ev_cat[ev_rating == value] = i
            self.event_category = ev_cat
            ev_dst = graph._event_dst
            keep = ev_cat >= 0
            if c > 0 and keep.any():
                flat = ev_dst[keep] * c + ev_cat[keep]
                self.sink_cat_counts = np.bincount(
                    flat, minlength=nv * c).reshape(nv, c).astype(np.float64)
            else:
                self.sink_cat_counts = np.zeros((nv, max(c, 1)), dtype=np.float64)
            # per-pair sparse (category, count) rows for incremental updates
            pid_of_event = np.repeat(np.arange(npairs, dtype=np.int64),
                                     graph.pair_count.astype(np.int64))
            pk = pid_of_event[keep] * max(c, 1) + ev_cat[keep]
            uniq, cnts = np.unique(pk, return_counts=True)
            self.pair_cat_pair = (uniq // max(c, 1)).astype(np.int64)
            self.pair_cat_id = (uniq % max(c, 1)).astype(np.int64)
            self.pair_cat_count = cnts.astype(np.float64)
            self.pair_cat_indptr = np.searchsorted(
                self.pair_cat_pair, np.arange(npairs + 1))
        else:
            self.n_categories = 0


class ContrastState:
    """Exact bookkeeping of per-sink contrast scores, per-user scores, and the
    objective for one seed block, under user removals.

    The sink domain is fixed at build time to the sinks adjacent to the seed;
    the objective numerator and denominator sum over that domain.
    """

    def __init__(self, graph, context, seed_idx, active=None, kappa_norm_value=None):
        self.graph = graph
        self.ctx = context
        cfg = context.config
        self.base = cfg.base
        self.use_alpha = cfg.use_alpha
        self.use_phi = context.use_phi
        self.use_kappa = context.use_kappa
        self.kappa_norm = cfg.kappa_norm
        self.smoothing = cfg.smoothing

        seed_idx = np.unique(np.asarray(seed_idx, dtype=np.int64))
        if seed_idx.size == 0:
            raise DataError("empty seed")
        self.seed_idx = seed_idx
        m0 = seed_idx.size

        starts = graph.src_pair_indptr[seed_idx]
        stops = graph.src_pair_indptr[seed_idx + 1]
        pids = concat_ranges(starts, stops)
        if pids.size == 0:
            raise DataError("degenerate seed: no incident edges")
        row_lens = (stops - starts).astype(np.int64)
        cols_global = graph.pair_dst[pids]
        domain = np.unique(cols_global)
        self.domain = domain
        nv = domain.size

        self.row_indptr = np.concatenate(([0], np.cumsum(row_lens))).astype(np.int64)
        self.row_cols = np.searchsorted(domain, cols_global).astype(np.int64)
        self.row_vals = graph.pair_count[pids].astype(np.float64)
        self.row_pids = pids
        row_of_nnz = np.repeat(np.arange(m0, dtype=np.int64), row_lens)
        order = np.lexsort((row_of_nnz, self.row_cols))
        self.col_rows = row_of_nnz[order]
        self.col_vals = self.row_vals[order]
        self.col_indptr = np.searchsorted(self.row_cols[order], np.arange(nv + 1))
        self._sub = sp.csr_matrix((self.row_vals, self.row_cols, self.row_indptr),
                                  shape=(m0, nv))

        self.cnt_total = context.sink_event_total[domain]
        self.sigma_d = context.sigma[domain]
        if self.use_phi:
            self.phi_total = context.sink_phi_total[domain]
        if self.use_kappa:
            self.cat_total = context.sink_cat_counts[domain]

        if active is None:
            self.active = np.ones(m0, dtype=bool)
        else:
            self.active = np.asarray(active, dtype=bool).copy()
            if self.active.shape != (m0,):
                raise DataError("active mask must match the seed size")
        self.n_active = int(self.active.sum())
        self.n_rescales = 0

        act_nnz = self.active[row_of_nnz]
        self.cnt_set = np.bincount(self.row_cols[act_nnz],
                                   weights=self.row_vals[act_nnz], minlength=nv)
        if self.use_phi:
            self.phi_set = np.bincount(
                self.row_cols[act_nnz],
                weights=context.pair_phi_weight[pids[act_nnz]], minlength=nv)
        if self.use_kappa:
            c = max(context.n_categories, 1)
            self.cat_set = np.zeros((nv, c), dtype=np.float64)
            apids = pids[act_nnz]
            acols = self.row_cols[act_nnz]
            ci = context.pair_cat_indptr
            idx = concat_ranges(ci[apids], ci[apids + 1])
            if idx.size:
                reps = (ci[apids + 1] - ci[apids]).astype(np.int64)
                flat = np.repeat(acols, reps) * c + context.pair_cat_id[idx]
                self.cat_set += np.bincount(
                    flat, weights=context.pair_cat_count[idx],
                    minlength=nv * c).reshape(nv, c)

        self.alpha = np.zeros(nv)
        self.phi = np.zeros(nv)
        self.kw = np.zeros(nv)
        self.kappa = np.zeros(nv)
        self.P = np.zeros(nv)
        self._refresh_signals(None)
        if self.use_kappa:
            if kappa_norm_value is not None:
                self.kmax = float(kappa_norm_value)
            else:
                self.kmax = float(self.kw.max()) if nv else 0.0
        else:
            self.kmax = 0.0
        self._refresh_contrast(None)
        self.S = self._sub @ (self.sigma_d * self.P)
        self.num = float((self.sigma_d * self.cnt_set * self.P).sum())
        self.psum = float(self.P.sum())

    # -- construction front door ------------------------------------------

    @classmethod
    def build(cls, graph: BipartiteGraph, seed_users, context: SignalContext,
              active=None, kappa_norm_value=None) -> "ContrastState":
        idx = _user_indices(graph, seed_users)
        return cls(graph, context, idx, active=active, kappa_norm_value=kappa_norm_value)

    # -- signal recomputation ----------------------------------------------

    def _refresh_signals(self, cols) -> None:
        """Recompute alpha/phi/raw-kappa for the given local sinks (None = all)."""
        sel = slice(None) if cols is None else cols
        self.alpha[sel] = np.clip(self.cnt_set[sel] / self.cnt_total[sel], 0.0, 1.0)
        if self.use_phi:
            tot = self.phi_total[sel]
            self.phi[sel] = np.where(
                tot > 0, np.clip(self.phi_set[sel] / np.where(tot > 0, tot, 1.0), 0.0, 1.0),
                0.0)
        if self.use_kappa:
            self.kw[sel] = self._weighted_divergence(sel)

    def _weighted_divergence(self, sel):
        nA = np.atleast_2d(self.cat_set[sel])
        nR = np.atleast_2d(self.cat_total[sel]) - nA
        c = nA.shape[1]
        eps = self.smoothing
        sA = nA.sum(axis=1)
        sR = nR.sum(axis=1)
        p = (nA + eps) / (sA + eps * c)[:, None]
        q = (nR + eps) / (sR + eps * c)[:, None]
        kl = (p * np.log(p / q)).sum(axis=1)
        f_set = self.cnt_set[sel]
        f_rest = self.cnt_total[sel] - f_set
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(f_rest > 0, f_set / np.where(f_rest > 0, f_rest, 1.0), np.inf)
            balance = np.minimum(ratio, np.where(ratio > 0, 1.0 / ratio, 0.0))
        balance = np.where((f_set <= 0) | (f_rest <= 0), 0.0, balance)
        kw = kl * balance
        kw[(sA + sR) == 0] = 0.0  # sinks without any rated events carry no signal
        return kw

    def _refresh_contrast(self, cols) -> None:
        sel = slice(None) if cols is None else cols
        if self.use_kappa:
            self.kappa[sel] = self.kw[sel] / self.kmax if self.kmax > 0 else 0.0
        self.P[sel] = contrast_score(
            self.alpha[sel], self.phi[sel], self.kappa[sel], self.base,
            self.use_alpha, self.use_phi, self.use_kappa)

    # -- removal ------------------------------------------------------------

    def remove_user(self, user) -> None:
        """Drop one user from the active set, updating sinks adjacent to it and
        the scores of users sharing those sinks; exact within float drift."""
        gidx = self.graph.user_index(user) if isinstance(user, str) else int(user)
        local = int(np.searchsorted(self.seed_idx, gidx))
        if local >= self.seed_idx.size or self.seed_idx[local] != gidx:
            raise DataError(f"user {user!r} is not in the tracked set")
        self._remove_local(local)

    def _remove_local(self, r: int) -> None:
        if not self.active[r]:
            raise DataError("user already removed")
        self.active[r] = False
        self.n_active -= 1

        lo, hi = self.row_indptr[r], self.row_indptr[r + 1]
        cols = self.row_cols[lo:hi]
        if cols.size == 0:
            return
        vals = self.row_vals[lo:hi]
        pids = self.row_pids[lo:hi]

        cnt_old = self.cnt_set[cols].copy()
        p_old = self.P[cols].copy()

        self.cnt_set[cols] -= vals
        if self.use_phi:
            self.phi_set[cols] -= self.ctx.pair_phi_weight[pids]
        if self.use_kappa:
            ci = self.ctx.pair_cat_indptr
            idx = concat_ranges(ci[pids], ci[pids + 1])
            if idx.size:
                reps = (ci[pids + 1] - ci[pids]).astype(np.int64)
                c = self.cat_set.shape[1]
                flat = np.repeat(cols, reps) * c + self.ctx.pair_cat_id[idx]
                np.subtract.at(self.cat_set.reshape(-1), flat, self.ctx.pair_cat_count[idx])

        self._refresh_signals(cols)

        rescale = False
        if self.use_kappa and self.kappa_norm == "evolving":
            new_kmax = float(self.kw.max()) if self.kw.size else 0.0
            if new_kmax != self.kmax:
                self.kmax = new_kmax
                rescale = True

        if rescale:
            self._refresh_contrast(None)
            sp_weights = self.sigma_d * self.P
            self.S = self._sub @ sp_weights
            self.num = float((sp_weights * self.cnt_set).sum())
            self.psum = float(self.P.sum())
            self.n_rescales += 1
            return

        self._refresh_contrast(cols)
        p_new = self.P[cols]
        dp = p_new - p_old
        starts, stops = self.col_indptr[cols], self.col_indptr[cols + 1]
        idx = concat_ranges(starts, stops)
        if idx.size:
            per_entry = self.col_vals[idx] * np.repeat(self.sigma_d[cols] * dp,
                                                       stops - starts)
            self.S += np.bincount(self.col_rows[idx], weights=per_entry,
                                  minlength=self.active.size)
        self.num += float((self.sigma_d[cols]
                           * (self.cnt_set[cols] * p_new - cnt_old * p_old)).sum())
        self.psum += float(dp.sum())

    # -- queries --------------------------------------------------------------

    def objective(self) -> float:
        """Expected block density over the contrast distribution; the quantity shaved for."""
        if self.n_active == 0:
            raise DataError("empty set")
        return self.num / (self.n_active + self.psum)

    def argmin_active_score(self) -> int:
        masked = np.where(self.active, self.S, np.inf)
        return int(np.argmin(masked))

    def engagement_from_set(self) -> np.ndarray:
        """Weighted engagement from the active set per domain sink."""
        return self.sigma_d * self.cnt_set

    def engagement_total(self) -> np.ndarray:
        return self.sigma_d * self.cnt_total

    def user_scores(self) -> dict[str, float]:
        ids = self.graph.user_ids
        return {ids[self.seed_idx[r]]: float(self.S[r])
                for r in np.flatnonzero(self.active)}

    def contrast_of(self, obj: str) -> float:
        vi = self.graph.object_index(obj)
        loc = int(np.searchsorted(self.domain, vi))
        if loc >= self.domain.size or self.domain[loc] != vi:
            raise DataError(f"sink {obj!r} is outside the tracked domain")
        return float(self.P[loc])

    def active_user_ids(self) -> list[str]:
        ids = self.graph.user_ids
        return [ids[self.seed_idx[r]] for r in np.flatnonzero(self.active)]


def _user_indices(graph: BipartiteGraph, users) -> np.ndarray:
    if isinstance(users, np.ndarray) and np.issubdtype(users.dtype, np.integer):
        return users.astype(np.int64)
    out = []
    for u in users:
        out.append(int(u) if isinstance(u, (int, np.integer)) else graph.user_index(u))
    return np.asarray(out, dtype=np.int64)
