"""Per-sink timestamp histograms and spike geometry: bursts, drops, involvement."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import DataError

# Histogram recursion and memory guard; only extreme heavy-tail spacings hit it.
MAX_BINS = 65536


@dataclass(frozen=True)
class TimeSeriesHist:
    """Uniform-width histogram of one sink's event timestamps."""

    centers: np.ndarray
    counts: np.ndarray
    bin_width: float

    def __len__(self) -> int:
        return int(self.counts.size)


@dataclass(frozen=True)
class BurstPair:
    """An (awakening, burst) point pair with the rise slope between them."""

    awakening: tuple[float, float]
    burst: tuple[float, float]

    @property
    def altitude(self) -> float:
        return self.burst[1] - self.awakening[1]

    @property
    def slope(self) -> float:
        return self.altitude / (self.burst[0] - self.awakening[0])


@dataclass(frozen=True)
class DropInfo:
    """A (burst, dying) point pair describing one decline."""

    burst: tuple[float, float]
    dying: tuple[float, float]

    @property
    def fall(self) -> float:
        return self.burst[1] - self.dying[1]

    @property
    def slope(self) -> float:
        return self.fall / (self.dying[0] - self.burst[0])


@dataclass(frozen=True)
class SpikeProfile:
    """Significant burst pairs and the maximal drop of one sink's time series."""

    pairs: tuple[BurstPair, ...]
    max_drop: DropInfo | None
    phi_denominator: float


def build_histogram(timestamps: Sequence[int] | np.ndarray) -> TimeSeriesHist:
    """Bin timestamps with the finer of the Sturges and Freedman-Diaconis rules.

    Bin count is max(ceil(log2 n) + 1, ceil(range / (2 * IQR * n^(-1/3)))); a
    zero IQR falls back to Sturges alone, and identical timestamps degenerate
    to a single one-second bin.
    """
    ts = np.asarray(timestamps, dtype=np.float64)
    n = ts.size
    if n == 0:
        raise DataError("cannot build a histogram from zero timestamps")
    lo, hi = float(ts.min()), float(ts.max())
    if lo == hi:
        return TimeSeriesHist(np.array([lo]), np.array([n], dtype=np.int64), 1.0)
    k_sturges = int(np.ceil(np.log2(n))) + 1
    q75, q25 = np.percentile(ts, [75, 25])
    iqr = float(q75 - q25)
    span = hi - lo
    if iqr > 0:
        k_fd = int(np.ceil(span / (2.0 * iqr * n ** (-1.0 / 3.0))))
    else:
        k_fd = 0
    k = min(max(k_sturges, k_fd, 1), MAX_BINS)
    counts, edges = np.histogram(ts, bins=k, range=(lo, hi))
    width = span / k
    centers = edges[:-1] + width / 2.0
    return TimeSeriesHist(centers, counts.astype(np.int64), width)


def _distances_to_line(tx, cx, t0, c0, t1, c1):
    """Perpendicular distance of points (tx, cx) to the line through (t0,c0)-(t1,c1)."""
    num = np.abs((c1 - c0) * tx - (t1 - t0) * cx + t1 * c0 - c1 * t0)
    return num / math.hypot(c1 - c0, t1 - t0)


def _awakening_index(centers, counts, i: int, m: int) -> int | None:
    """Index of the awakening point for the max at m within a window starting at i.

    Candidates run from the window start up to m-1. When every candidate sits
    on the anchor line (zero distance everywhere) the first point after the
    window start is taken, so a perfectly linear rise awakens at its first
    interior point.
    """
    if m - 1 < i:
        return None
    tx = centers[i:m]
    cx = counts[i:m]
    d = _distances_to_line(tx, cx, centers[i], counts[i], centers[m], counts[m])
    best = i + int(np.argmax(d))
    if d[best - i] == 0.0 and i + 1 <= m - 1:
        best = i + 1
    return best


def _dying_index(centers, counts, m: int, j: int) -> int | None:
    """Mirror of the awakening search on the decline from m to the window end j."""
    if m + 1 > j:
        return None
    tx = centers[m + 1:j + 1]
    cx = counts[m + 1:j + 1]
    d = _distances_to_line(tx, cx, centers[m], counts[m], centers[j], counts[j])
    best = m + 1 + int(np.argmax(d))
    if d[best - m - 1] == 0.0 and m + 1 <= j - 1:
        best = j - 1
    return best


def awakening_point(hist: TimeSeriesHist, i: int, j: int) -> tuple[float, float] | None:
    """Awakening point for the maximum inside [i, j], or None for degenerate windows."""
    if j - i < 2:
        raise DataError("window too short")
    counts = np.asarray(hist.counts, dtype=np.float64)
    m = i + int(np.argmax(counts[i:j + 1]))
    a = _awakening_index(hist.centers, counts, i, m)
    if a is None:
        return None
    return (float(hist.centers[a]), float(counts[a]))


def _first_local_min(counts, m: int, j: int) -> int | None:
    """First k > m with counts[k] <= counts[k+1]; plateaus count at their left edge."""
    if m + 1 > j:
        return None
    for k in range(m + 1, j):
        if counts[k] <= counts[k + 1]:
            return k
    return j


def multiburst(hist: TimeSeriesHist, significance: float = 0.5) -> tuple[BurstPair, ...]:
    """Extract all awakening/burst pairs, keeping those whose altitude reaches
    ``significance`` times the largest altitude found."""
    centers = np.asarray(hist.centers, dtype=np.float64)
    counts = np.asarray(hist.counts, dtype=np.float64)
    pairs: list[BurstPair] = []
    stack = [(0, len(counts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        win = counts[i:j + 1]
        if win.max() == win.min():
            continue
        m = i + int(np.argmax(win))
        a = _awakening_index(centers, counts, i, m)
        if a is not None and counts[m] > counts[a]:
            pairs.append(BurstPair((float(centers[a]), float(counts[a])),
                                   (float(centers[m]), float(counts[m]))))
            stack.append((i, a - 1))
        k = _first_local_min(counts, m, j)
        if k is not None:
            stack.append((k, j))
    if not pairs:
        return ()
    top = max(p.altitude for p in pairs)
    kept = tuple(p for p in pairs if p.altitude >= significance * top)
    return tuple(sorted(kept, key=lambda p: p.awakening[0]))


def max_drop(hist: TimeSeriesHist) -> DropInfo | None:
    """The drop with the largest fall, found by the recursive dying-point search."""
    centers = np.asarray(hist.centers, dtype=np.float64)
    counts = np.asarray(hist.counts, dtype=np.float64)
    best: DropInfo | None = None
    stack = [(0, len(counts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        win = counts[i:j + 1]
        if win.max() == win.min():
            continue
        m = i + int(np.argmax(win))
        d = _dying_index(centers, counts, m, j)
        if d is not None:
            if counts[m] > counts[d]:
                cand = DropInfo((float(centers[m]), float(counts[m])),
                                (float(centers[d]), float(counts[d])))
                if best is None or cand.fall > best.fall:
                    best = cand
            stack.append((d, j))
        stack.append((i, m - 1))
    return best


def build_profile(timestamps: Sequence[int] | np.ndarray,
                  significance: float = 0.5) -> tuple[TimeSeriesHist | None, SpikeProfile]:
    """Histogram + spike profile for one sink; sinks with < 3 events get an empty profile."""
    ts = np.asarray(timestamps)
    if ts.size < 3:
        return None, SpikeProfile((), None, 0.0)
    hist = build_histogram(ts)
    if len(hist) < 3:
        return hist, SpikeProfile((), None, 0.0)
    pairs = multiburst(hist, significance=significance)
    drop = max_drop(hist)
    profile = SpikeProfile(pairs, drop, 0.0)
    denom = burst_mass(profile, ts)
    return hist, SpikeProfile(pairs, drop, denom)


def burst_mass(profile: SpikeProfile, timestamps) -> float:
    """Altitude- and slope-weighted count of timestamps falling inside burst windows."""
    ts = np.sort(np.asarray(timestamps, dtype=np.float64))
    total = 0.0
    for p in profile.pairs:
        lo = np.searchsorted(ts, p.awakening[0], side="left")
        hi = np.searchsorted(ts, p.burst[0], side="right")
        total += p.altitude * p.slope * float(hi - lo)
    return total


def burst_event_weights(profile: SpikeProfile, sorted_times: np.ndarray) -> np.ndarray:
    """Per-event burst weight over a time-sorted array; summing gives burst_mass."""
    w = np.zeros(sorted_times.size, dtype=np.float64)
    for p in profile.pairs:
        lo = np.searchsorted(sorted_times, p.awakening[0], side="left")
        hi = np.searchsorted(sorted_times, p.burst[0], side="right")
        w[lo:hi] += p.altitude * p.slope
    return w


def phi_involvement(profile: SpikeProfile, times_subset, times_all) -> float:
    """Share of slope-weighted in-burst activity contributed by a subset of events.

    Returns 0 when the sink has no significant burst mass at all.
    """
    sub = Counter(np.asarray(times_subset, dtype=np.int64).tolist())
    full = Counter(np.asarray(times_all, dtype=np.int64).tolist())
    if sub - full:
        raise DataError("inconsistent timestamp sets: subset is not contained in the full set")
    denom = burst_mass(profile, times_all)
    if denom <= 0.0:
        return 0.0
    return burst_mass(profile, times_subset) / denom


def drop_edge_weight(drop: DropInfo | None) -> float:
    """Log-smoothed fall-times-slope weight of a drop; 0 when absent."""
    if drop is None:
        return 0.0
    return math.log2(1.0 + drop.fall * drop.slope)


def sigma_from_drop_weights(weights: np.ndarray) -> np.ndarray:
    """Sink column weights 1 + w/max(w); all ones when no sink shows a drop."""
    weights = np.asarray(weights, dtype=np.float64)
    top = weights.max() if weights.size else 0.0
    if top <= 0.0:
        return np.ones_like(weights)
    return 1.0 + weights / top


def time_obstruction_bound(n_edges: float, bin_width: float,
                           rise_slope: float, decline_slope: float) -> tuple[float, float]:
    """Minimum time and burst height needed to land n_edges without an abnormal spike.

    An attack of n_edges finished in less than the returned time must show a
    rise steeper than rise_slope or a fall steeper than decline_slope.
    """
    if min(n_edges, bin_width, rise_slope, decline_slope) <= 0:
        raise DataError("all bound inputs must be positive")
    s1, s2 = rise_slope, decline_slope
    tau = math.sqrt(2.0 * n_edges * bin_width * (s1 + s2) / (s1 * s2))
    height = math.sqrt(2.0 * n_edges * bin_width * s1 * s2 / (s1 + s2))
    return tau, height


def simulate_triangle_attack(n_events: float, duration: float, bin_width: float,
                             rise_fraction: float = 0.5) -> np.ndarray:
    """Binned counts of a triangular attack of given total volume and duration.

    The rise climbs linearly to the peak over the first bins and the fall
    returns linearly to zero; bin counts sum exactly to n_events.
    """
    if duration < 2 * bin_width:
        raise DataError("attack duration must span at least two bins")
    n_bins = max(2, int(duration / bin_width))
    n1 = min(max(int(round(rise_fraction * n_bins)), 1), n_bins - 1)
    n2 = n_bins - n1
    height = 2.0 * n_events / n_bins
    rise = height * np.arange(1, n1 + 1) / n1
    fall = height * np.arange(n2 - 1, -1, -1) / n2
    return np.concatenate((rise, fall))


def extreme_slopes(counts: np.ndarray, bin_width: float) -> tuple[float, float]:
    """Steepest adjacent-bin rise and fall of a binned series, in counts per second."""
    diffs = np.diff(np.asarray(counts, dtype=np.float64)) / bin_width
    max_rise = float(diffs.max(initial=0.0))
    max_fall = float((-diffs).max(initial=0.0))
    return max_rise, max_fall


def profile_payload(sink_id: str, hist: TimeSeriesHist | None,
                    profile: SpikeProfile) -> dict:
    """JSON-ready debug dump of one sink's bins, burst pairs, and drop."""
    payload: dict = {"sink": sink_id, "pairs": [], "drop": None,
                     "phi_denominator": profile.phi_denominator}
    if hist is not None:
        payload["bin_width"] = hist.bin_width
        payload["bins"] = [[float(t), int(c)] for t, c in zip(hist.centers, hist.counts)]
    for p in profile.pairs:
        payload["pairs"].append({
            "awakening": list(p.awakening), "burst": list(p.burst),
            "slope": p.slope, "altitude": p.altitude})
    if profile.max_drop is not None:
        d = profile.max_drop
        payload["drop"] = {"burst": list(d.burst), "dying": list(d.dying),
                           "slope": d.slope, "fall": d.fall}
    return payload
