"""Monte Carlo oracle for the Poisson grid.

Rooms around the receiver are built directly from their side-length laws
instead of sampling a large grid and locating the receiver: slab widths along
each axis are i.i.d. exponential, seen from a grid corner (typical room) or
from a fixed point (typical user, where the zero cell is cut into two
exponential halves on every axis).  Bounded building sides use the uniform
spacing law of a Poisson count on a fixed interval.

Given the slabs, the number of BSs of each room is Poisson with mean
``2**(n-1) * sum_k lam_k * width_k``.  Rooms whose attenuation vectors
coincide are merged into one Poisson count, which is exact for independent
Poisson variables and keeps the per-sample cost small.  Rayleigh interference
of ``N`` BSs with common attenuation ``w`` is ``w * Gamma(N, 1)``.

Samples are generated in fixed-size batches; batch ``b`` draws from a Philox
stream keyed by ``(seed, b)``, so estimates do not depend on how batches are
scheduled across workers.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from . import moments
from .errors import ParameterError
from .grid import (ChannelModel, GridParams, GridRealization, attenuation, bs_wall_counts, sample_bs,
                   stream)
from .links import FreeSpaceParams, LinkQuery


Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimateReport:
    point: float
    stderr: float
    samples: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.point - Z95 * self.stderr, self.point + Z95 * self.stderr)

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.point - value) <= k * self.stderr

    @classmethod
    def of_mean(cls, x) -> "EstimateReport":
        x = np.asarray(x, dtype=float)
        n = x.size
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf, n)

    @classmethod
    def of_variance(cls, x) -> "EstimateReport":
        """Sample variance with the delta-method standard error ``sqrt((m4 - s**4)/n)``."""
        x = np.asarray(x, dtype=float)
        n = x.size
        c = x - x.mean()
        var = float(c.var(ddof=1))
        m4 = float(np.mean(c**4))
        return cls(var, math.sqrt(max(m4 - var * var, 0.0) / n), n)

    @classmethod
    def of_covariance(cls, x, y) -> "EstimateReport":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n = x.size
        p = (x - x.mean()) * (y - y.mean())
        cov = float(p.sum() / (n - 1))
        return cls(cov, float(p.std(ddof=1) / math.sqrt(n)), n)

    @classmethod
    def of_proportion(cls, hits, n) -> "EstimateReport":
        """Frequency with a Wilson-score standard error (non-zero even at 0 or n hits)."""
        hits = int(hits)
        p = hits / n
        z2 = Z95 * Z95
        centre = (p + z2 / (2 * n)) / (1 + z2 / n)
        half = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
        return cls(p, max(half / Z95, abs(centre - p) / Z95), n)


# --------------------------------------------------------------------------- layouts


@dataclass
class AxisLayout:
    """Slabs along one axis seen from the receiver.

    ``edge_*`` describe slabs used when this axis is the edge axis (their
    widths carry the BS intensity).  ``room_*`` describe room indices used when
    this axis is transverse; ``room_slab[j] >= 0`` means room ``j`` exists only
    if slab ``room_slab[j]`` has positive width (bounded buildings).
    """

    edge_labels: np.ndarray
    edge_walls: np.ndarray
    room_labels: np.ndarray
    room_walls: np.ndarray
    room_slab: np.ndarray
    sample: Callable[[np.random.Generator, int], np.ndarray]
    sides: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return bool(np.any(self.room_slab >= 0))


def _exp_sampler(mu, count):
    return lambda rng, size: rng.exponential(1.0 / mu, size=(size, count))


def room_axis(mu: float, radius: int, *, lower: int | None = None) -> AxisLayout:
    """Typical-room labelling: slab ``t`` in ``[lower, radius]`` with ``|t|`` walls."""
    lo = -radius if lower is None else lower
    labels = np.arange(lo, radius + 1)
    return AxisLayout(labels, np.abs(labels), labels, np.abs(labels), np.full(labels.size, -1),
                      _exp_sampler(mu, labels.size))


def user_axis(mu: float, radius: int, extent_minus: float = math.inf, extent_plus: float = math.inf,
              cap: int | None = None) -> AxisLayout:
    """Typical-user labelling with optional building boundaries on either side.

    Edge slabs are ``±m`` (``m >= 1``, ``m - 1`` walls); rooms are ``j`` in Z
    with ``|j|`` walls, room 0 being the zero cell.  On a bounded side the
    slabs are the spacings of ``1 + Poisson(mu * extent)`` intervals and room
    ``±j`` exists only if slab ``±(j+1)`` does.
    """
    edge_labels, edge_walls, samplers, sides = [], [], [], {}
    offset = 0
    for sign, extent in ((-1, extent_minus), (1, extent_plus)):
        if math.isinf(extent):
            count = radius + 1
            samplers.append(_exp_sampler(mu, count))
        else:
            mean = mu * extent
            count = cap or int(math.ceil(mean + 12 * math.sqrt(mean) + 12))
            samplers.append(_spacing_sampler(mu, extent, count))
            sides[sign] = (offset, count)
        m = np.arange(1, count + 1)
        edge_labels.append(sign * m)
        edge_walls.append(m - 1)
        offset += count
    room_labels, room_walls, room_slab = [0], [0], [-1]
    offset = 0
    for side, sign in enumerate((-1, 1)):
        count = edge_labels[side].size
        for j in range(1, count):
            room_labels.append(sign * j)
            room_walls.append(j)
            room_slab.append(offset + j if sign in sides else -1)
        offset += count
    lower, upper = samplers

    def sample(rng, size):
        return np.concatenate([lower(rng, size), upper(rng, size)], axis=1)

    return AxisLayout(np.concatenate(edge_labels), np.concatenate(edge_walls), np.array(room_labels),
                      np.array(room_walls), np.array(room_slab), sample, sides)


def _spacing_sampler(mu, extent, count):
    def sample(rng, size):
        walls = 1 + rng.poisson(mu * extent, size=size)
        if np.any(walls > count):
            warnings.warn("bounded-side wall count exceeded the layout cap; extra walls dropped", RuntimeWarning)
        inner = np.minimum(walls - 1, count - 1)
        u = rng.uniform(0.0, extent, size=(size, max(count - 1, 0)))
        u[np.arange(count - 1)[None, :] >= inner[:, None]] = extent
        u.sort(axis=1)
        pts = np.concatenate([np.zeros((size, 1)), u, np.full((size, 1), extent)], axis=1)
        return np.diff(pts, axis=1)

    return sample


# --------------------------------------------------------------------------- engine


def product_weights(k: Sequence[float]):
    kk = np.asarray(k, dtype=float)

    def weights(walls, labels):
        return np.prod(np.power(kk, walls), axis=1)[:, None]

    return weights


@dataclass
class Groups:
    weights: np.ndarray  # (G, P)
    dist: np.ndarray  # (G,)
    mean_rate: np.ndarray  # (G,) expected Poisson mean, infinite layouts only


class CountSampler:
    """Poisson BS counts per attenuation group for a fixed room layout."""

    def __init__(self, params: GridParams, layouts: Sequence[AxisLayout],
                 weight_fn: Callable | None = None, weight_floor: float = 1e-9):
        self.params = params
        self.layouts = list(layouts)
        n = params.n
        if len(self.layouts) != n:
            raise ParameterError("need one layout per axis")
        weight_fn = weight_fn or product_weights(params.k)
        share = params.edge_share
        keys_all = []
        per_axis = []
        for k in range(n):
            if params.lam[k] == 0:
                per_axis.append(None)
                continue
            lists = []
            for q in range(n):
                lay = self.layouts[q]
                if q == k:
                    lists.append(np.arange(lay.edge_labels.size))
                else:
                    lists.append(np.arange(lay.room_labels.size))
            mesh = np.meshgrid(*lists, indexing="ij")
            idx = np.stack([m.ravel() for m in mesh], axis=1)
            walls = np.empty_like(idx)
            labels = np.empty_like(idx)
            for q in range(n):
                lay = self.layouts[q]
                if q == k:
                    walls[:, q] = lay.edge_walls[idx[:, q]]
                    labels[:, q] = lay.edge_labels[idx[:, q]]
                else:
                    walls[:, q] = lay.room_walls[idx[:, q]]
                    labels[:, q] = lay.room_labels[idx[:, q]]
            w = np.atleast_2d(weight_fn(walls, labels))
            if w.shape[0] != idx.shape[0]:
                w = w.T
            keep = w.max(axis=1) >= weight_floor
            idx, walls, w = idx[keep], walls[keep], w[keep]
            dist = walls.sum(axis=1)
            per_axis.append((idx, w, dist))
            keys_all.append(np.column_stack([dist, _log_key(w)]))
        if not keys_all:
            empty = np.zeros((0, n), dtype=np.int64)
            paths = np.atleast_2d(weight_fn(empty, empty)).shape[1]
            self.groups = Groups(np.zeros((0, paths)), np.zeros(0, dtype=np.int64), np.zeros(0))
            self._axes = []
            return
        keys = np.concatenate(keys_all)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        G = uniq.shape[0]
        P = per_axis[next(i for i, a in enumerate(per_axis) if a is not None)][1].shape[1]
        gw = np.zeros((G, P))
        gd = np.zeros(G, dtype=np.int64)
        mean_rate = np.zeros(G)
        self._axes = []
        start = 0
        for k in range(n):
            if per_axis[k] is None:
                continue
            idx, w, dist = per_axis[k]
            gid = inverse[start:start + idx.shape[0]]
            start += idx.shape[0]
            gw[gid] = w
            gd[gid] = dist
            rate = share * params.lam[k]
            slab = idx[:, k]
            valid_cols = []
            for q in range(n):
                if q == k:
                    continue
                col = self.layouts[q].room_slab[idx[:, q]]
                valid_cols.append((q, col))
            bounded = any(np.any(col >= 0) for _, col in valid_cols)
            T = self.layouts[k].edge_labels.size
            onehot = sparse.csr_matrix((np.ones(idx.shape[0]), (slab if not bounded else np.arange(idx.shape[0]),
                                                                 gid)),
                                       shape=(T if not bounded else idx.shape[0], G))
            mean_rate += np.bincount(gid, minlength=G) * rate / params.mu[k]
            self._axes.append((k, rate, bounded, slab, valid_cols, onehot))
        self.groups = Groups(gw, gd, mean_rate)

    def rates(self, lengths: Sequence[np.ndarray]) -> np.ndarray:
        S = lengths[0].shape[0]
        out = np.zeros((S, self.groups.weights.shape[0]))
        for k, rate, bounded, slab, valid_cols, onehot in self._axes:
            if not bounded:
                out += rate * np.asarray(onehot.T @ lengths[k].T).T
            else:
                step = max(1, 4_000_000 // max(S, 1))
                for c0 in range(0, slab.size, step):
                    part = slice(c0, c0 + step)
                    cell = lengths[k][:, slab[part]]
                    for q, col in valid_cols:
                        col = col[part]
                        has = col >= 0
                        if np.any(has):
                            cell[:, has] *= lengths[q][:, col[has]] > 0
                    out += rate * np.asarray(onehot[part].T @ cell.T).T
        return out

    def sample(self, rng: np.random.Generator, size: int):
        lengths = [lay.sample(rng, size) for lay in self.layouts]
        counts = rng.poisson(self.rates(lengths))
        return counts, lengths


def _log_key(w):
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    lw[~np.isfinite(lw)] = -1e6
    return np.round(lw, 9)


def faded_sum(counts: np.ndarray, weights: np.ndarray, channel: ChannelModel, rng) -> np.ndarray:
    """Interference per path: ``(S, P)`` from group counts ``(S, G)`` and weights ``(G, P)``."""
    if channel is ChannelModel.NO_FADING:
        return counts @ weights
    out = np.zeros((counts.shape[0], weights.shape[1]))
    for p in range(weights.shape[1]):
        out[:, p] = rng.standard_gamma(counts.astype(float)) @ weights[:, p]
    return out


# --------------------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SimConfig:
    samples: int = 100_000
    seed: int = 0
    weight_floor: float = 1e-9
    radius: int | None = None
    batch: int = 20_000
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1 or self.batch < 1:
            raise ParameterError("samples and batch must be positive")
        if not 0 < self.weight_floor < 1:
            raise ParameterError("weight_floor must lie in (0, 1)")


def radius_for(k: float, floor: float, extra: int = 0, cap: int = 80) -> int:
    """Smallest slab distance beyond which a single-axis attenuation drops below ``floor``."""
    if k <= 0:
        return extra
    return min(int(math.ceil(math.log(floor) / math.log(k))) + extra, cap)


def _run_batches(cfg: SimConfig, fn):
    nb = -(-cfg.samples // cfg.batch)
    sizes = [min(cfg.batch, cfg.samples - b * cfg.batch) for b in range(nb)]

    def one(b):
        return fn(stream(cfg.seed, 100, b), sizes[b])

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(one, range(nb)))
    else:
        parts = [one(b) for b in range(nb)]
    return parts


def _stack(parts):
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)


# --------------------------------------------------------------------------- scenarios


def infinite_layouts(params: GridParams, perspective: str, cfg: SimConfig, offset=None):
    """Layouts for the infinite grid from the typical room or the typical user."""
    out = []
    for q in range(params.n):
        extra = abs(offset[q]) if offset is not None else 0
        m = cfg.radius if cfg.radius is not None else radius_for(params.k[q], cfg.weight_floor, extra)
        m = max(m, extra)
        if perspective == "room":
            out.append(room_axis(params.mu[q], m))
        elif perspective == "user":
            out.append(user_axis(params.mu[q], m))
        else:
            raise ParameterError(f"unknown perspective {perspective!r}")
    return out


def _check_truncation(sampler: CountSampler, exact_mean: float):
    g = sampler.groups
    included = float(g.mean_rate @ g.weights[:, 0]) if g.weights.size else 0.0
    if exact_mean > 0 and (exact_mean - included) > 1e-3 * exact_mean:
        warnings.warn(
            f"truncation drops {(exact_mean - included) / exact_mean:.2%} of the mean interference; "
            "lower weight_floor", RuntimeWarning)
    return included


@dataclass
class InterferenceSamples:
    values: np.ndarray
    included_mean: float

    def mean(self) -> EstimateReport:
        return EstimateReport.of_mean(self.values)

    def variance(self) -> EstimateReport:
        return EstimateReport.of_variance(self.values)

    def laplace(self, s: float) -> EstimateReport:
        return EstimateReport.of_mean(np.exp(-s * self.values))


def sim_interference(params: GridParams, cfg: SimConfig, channel=ChannelModel.NO_FADING,
                     perspective: str = "room") -> InterferenceSamples:
    """Interference samples at the typical room or the typical user."""
    channel = ChannelModel.parse(channel)
    sampler = CountSampler(params, infinite_layouts(params, perspective, cfg), weight_floor=cfg.weight_floor)
    exact = moments.mean_room(params) if perspective == "room" else moments.mean_user(params)
    included = _check_truncation(sampler, exact)
    W = sampler.groups.weights

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        return faded_sum(counts, W, channel, rng)[:, 0]

    return InterferenceSamples(_stack(_run_batches(cfg, batch)), included)


@dataclass
class PairSamples:
    first: np.ndarray
    second: np.ndarray

    def covariance(self) -> EstimateReport:
        return EstimateReport.of_covariance(self.first, self.second)

    def correlation(self) -> EstimateReport:
        """Sample correlation with the normal-theory standard error ``(1 - rho**2)/sqrt(N)``."""
        n = self.first.size
        if np.std(self.first) == 0 or np.std(self.second) == 0:
            return EstimateReport(math.nan, math.nan, n)
        rho = float(np.corrcoef(self.first, self.second)[0, 1])
        return EstimateReport(rho, (1 - rho * rho) / math.sqrt(n), n)

    def joint_laplace(self, s1: float, s2: float) -> EstimateReport:
        return EstimateReport.of_mean(np.exp(-s1 * self.first - s2 * self.second))


def pair_weights(k, room):
    kk = np.asarray(k, dtype=float)
    off = np.asarray(room)

    def weights(walls, labels):
        w0 = np.prod(np.power(kk, np.abs(labels)), axis=1)
        w1 = np.prod(np.power(kk, np.abs(labels - off)), axis=1)
        return np.column_stack([w0, w1])

    return weights


def sim_pair_interference(params: GridParams, cfg: SimConfig, room: Sequence[int],
                          channel=ChannelModel.NO_FADING) -> PairSamples:
    """Interference in the typical room and in ``room`` on shared realizations."""
    channel = ChannelModel.parse(channel)
    room = tuple(int(v) for v in room)
    if len(room) != params.n:
        raise ParameterError("room index has the wrong dimension")
    sampler = CountSampler(params, infinite_layouts(params, "room", cfg, offset=room),
                           weight_fn=pair_weights(params.k, room), weight_floor=cfg.weight_floor)
    W = sampler.groups.weights

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        if room == (0,) * params.n:
            out = faded_sum(counts, W[:, :1], channel, rng)[:, 0]
            return out, out.copy()
        out = faded_sum(counts, W, channel, rng)
        return out[:, 0], out[:, 1]

    first, second = _stack(_run_batches(cfg, batch))
    return PairSamples(first, second)


# --------------------------------------------------------------------------- SINR events


def sim_success_d2d(params: GridParams, cfg: SimConfig, q: LinkQuery) -> EstimateReport:
    """In-building D2D link from ``q.room`` to the typical room, Rayleigh everywhere."""
    room = q.room or (0,) * params.n
    link = float(np.prod(np.power(params.k, np.abs(room))))
    sampler = CountSampler(params, infinite_layouts(params, "room", cfg), weight_floor=cfg.weight_floor)
    W = sampler.groups.weights

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        interference = faded_sum(counts, W, ChannelModel.RAYLEIGH, rng)[:, 0]
        signal = rng.exponential(size=size) * link / q.nu
        return int(np.count_nonzero(signal > q.theta * (interference + q.sigma2)))

    hits = sum(_run_batches(cfg, batch))
    return EstimateReport.of_proportion(hits, cfg.samples)


def sim_joint_success_d2d(params: GridParams, cfg: SimConfig, theta: float, theta2: float, nu: float,
                          room: Sequence[int], sigma1: float = 0.0, sigma2: float = 0.0) -> EstimateReport:
    """Two in-room D2D links in the typical room and in ``room``.

    Each link has power ``1/nu``; the other link's transmitter leaks into it
    with unit transmit power through the walls separating the rooms.
    """
    room = tuple(int(v) for v in room)
    cross = float(np.prod(np.power(params.k, np.abs(room))))
    sampler = CountSampler(params, infinite_layouts(params, "room", cfg, offset=room),
                           weight_fn=pair_weights(params.k, room), weight_floor=cfg.weight_floor)
    W = sampler.groups.weights

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        ia, ib = faded_sum(counts, W, ChannelModel.RAYLEIGH, rng).T
        h = rng.exponential(size=(4, size))
        ok1 = h[0] / nu > theta * (ia + h[1] * cross + sigma1)
        ok2 = h[2] / nu > theta2 * (ib + h[3] * cross + sigma2)
        return int(np.count_nonzero(ok1 & ok2))

    hits = sum(_run_batches(cfg, batch))
    return EstimateReport.of_proportion(hits, cfg.samples)


def _segment_max(values, counts_per_sample):
    """Per-sample maximum of a ragged flat array (0 for empty samples)."""
    S = counts_per_sample.size
    out = np.zeros(S)
    nz = counts_per_sample > 0
    if not np.any(nz):
        return out
    starts = np.concatenate([[0], np.cumsum(counts_per_sample)[:-1]])
    out[nz] = np.maximum.reduceat(values, starts[nz])
    return out


def sim_coverage(params: GridParams, cfg: SimConfig, thetas, sigma2: float = 0.0, assoc: str = "strongest",
                 explicit_floor: float = 1e-6) -> list[EstimateReport]:
    """Downlink coverage of the typical user under Rayleigh fading.

    ``strongest``: the user picks the BS with the largest instantaneous power.
    Fades are drawn per BS for groups with attenuation at least
    ``explicit_floor``; weaker groups only contribute aggregate interference.
    ``nearest``: the user picks uniformly among BSs at the smallest wall count.
    Common random numbers are shared across the ``thetas`` grid.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    sampler = CountSampler(params, infinite_layouts(params, "user", cfg), weight_floor=cfg.weight_floor)
    W = sampler.groups.weights[:, 0]
    dist = sampler.groups.dist
    if assoc == "nearest" and len(set(params.k)) != 1:
        raise ParameterError("nearest association needs equal penetration losses")
    strong = W >= explicit_floor

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        if assoc == "strongest":
            ce = counts[:, strong]
            per = ce.sum(axis=1)
            flat_w = np.repeat(np.tile(W[strong], size), ce.ravel())
            vals = rng.exponential(size=flat_w.size) * flat_w
            best = _segment_max(vals, per)
            total = np.bincount(np.repeat(np.arange(size), per), weights=vals, minlength=size)
            total = total + rng.standard_gamma(counts[:, ~strong].astype(float)) @ W[~strong]
            interf = total - best
            signal = best
        elif assoc == "nearest":
            has = counts > 0
            dmask = np.where(has, dist[None, :], np.iinfo(np.int64).max)
            dmin = dmask.min(axis=1)
            at = (dist[None, :] == dmin[:, None]) & has
            n_at = (counts * at).sum(axis=1)
            wd = np.where(at, W[None, :], 0).max(axis=1)
            rest = np.where(at, 0, counts)
            interf = rng.standard_gamma(rest.astype(float)) @ W
            interf = interf + wd * rng.standard_gamma(np.maximum(n_at - 1, 0).astype(float))
            signal = wd * rng.exponential(size=size)
            signal[n_at == 0] = 0.0
        else:
            raise ParameterError(f"unknown association rule {assoc!r}")
        return np.array([np.count_nonzero(signal > t * (interf + sigma2)) for t in thetas])

    hits = np.sum(_run_batches(cfg, batch), axis=0)
    return [EstimateReport.of_proportion(h, cfg.samples) for h in hits]


# --------------------------------------------------------------------------- free space


def _outer_tail(a, radius, alpha, terms=40):
    """``int_R^inf rho**2 * a/(a + rho**alpha) drho`` by its convergent series in ``a / R**alpha``."""
    x = a / radius**alpha
    total = np.zeros_like(a)
    for m in range(1, terms + 1):
        total += (-1) ** (m + 1) * x**m / (m * alpha - 3)
    return total * radius**3


def sim_freespace(fs: FreeSpaceParams, cfg: SimConfig, theta: float, mean_points: int = 200) -> EstimateReport:
    """SIR coverage of the nearest BS in a 3-D PPP with Rayleigh fading.

    Points inside a ball holding ``mean_points`` BSs on average are simulated;
    the interference of the PPP outside the ball enters through its exact
    Laplace functional.  Each sample contributes the coverage probability
    conditional on the simulated point positions.
    """
    if not theta > 0:
        raise ParameterError("theta must be positive")
    lam = fs.density
    radius = (3 * mean_points / (4 * math.pi * lam)) ** (1 / 3)

    def batch(rng, size):
        counts = rng.poisson(mean_points, size=size)
        out = np.zeros(size)
        flat = radius * rng.uniform(size=counts.sum()) ** (1 / 3)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        nearest = np.full(size, np.inf)
        nz = counts > 0
        nearest[nz] = np.minimum.reduceat(flat, starts[nz])
        owner = np.repeat(np.arange(size), counts)
        r0 = nearest[owner]
        term = np.where(flat > r0, np.log1p(theta * (r0 / flat) ** fs.alpha), 0.0)
        logp = -np.bincount(owner, weights=term, minlength=size)
        a = theta * nearest[nz] ** fs.alpha
        logp[nz] -= 4 * math.pi * lam * _outer_tail(a, radius, fs.alpha)
        out[nz] = np.exp(logp[nz])
        return out

    return EstimateReport.of_mean(_stack(_run_batches(cfg, batch)))


# --------------------------------------------------------------------------- frozen grid


def sim_conditional_delta0(g: GridRealization, params: GridParams, s: float, samples: int, seed: int = 0,
                           user=None) -> EstimateReport:
    """``E[exp(-s I) | grid, delta = 0]`` by resampling BSs on the frozen walls of ``g``.

    Runs where the user's room holds no BS are discarded; otherwise the user
    picks one in-room BS uniformly and the rest is Rayleigh interference.
    """
    user = np.array([(a + b) / 2 for a, b in g.window]) if user is None else np.asarray(user, dtype=float)
    vals = []
    for run in range(samples):
        axis, edge, pos, room = sample_bs(params, g.window, g.walls, seed=hash_seed(seed, run))
        h = GridRealization(window=g.window, walls=g.walls, bs_axis=axis, bs_edge=edge, bs_pos=pos, bs_room=room)
        if h.num_bs == 0:
            continue
        counts = bs_wall_counts(user, h)
        home = np.flatnonzero(counts.sum(axis=1) == 0)
        if home.size == 0:
            continue
        rng = stream(seed, 300, run)
        gains = attenuation(params.k, counts) * rng.exponential(size=h.num_bs)
        serving = home[rng.integers(home.size)]
        vals.append(math.exp(-s * (gains.sum() - gains[serving])))
    if len(vals) < 2:
        raise ParameterError("too few runs with a BS in the user's room")
    return EstimateReport.of_mean(vals)


def hash_seed(seed: int, run: int) -> int:
    return int(np.random.SeedSequence([int(seed), 301, int(run)]).generate_state(1)[0])


# --------------------------------------------------------------------------- finite structures


def sim_finite_building(params: GridParams, cfg: SimConfig, ext, oob=None) -> InterferenceSamples:
    """Rayleigh interference at a user inside a box building with deterministic OoB power per face."""
    if params.n != 3:
        raise ParameterError("finite buildings are three-dimensional")
    layouts = []
    for q in range(3):
        m = cfg.radius if cfg.radius is not None else radius_for(params.k[q], cfg.weight_floor)
        layouts.append(user_axis(params.mu[q], max(m, 1), ext.side(q, 0), ext.side(q, 1)))
    sampler = CountSampler(params, layouts, weight_floor=cfg.weight_floor)
    W = sampler.groups.weights
    faces = [(q, j) for q in range(3) for j in (0, 1)
             if oob is not None and oob.side(q, j) > 0 and (-1 if j == 0 else 1) in layouts[q].sides]

    def batch(rng, size):
        counts, lengths = sampler.sample(rng, size)
        total = faded_sum(counts, W, ChannelModel.RAYLEIGH, rng)[:, 0]
        for q, j in faces:
            start, count = layouts[q].sides[-1 if j == 0 else 1]
            walls = np.count_nonzero(lengths[q][:, start:start + count] > 0, axis=1)
            total += oob.side(q, j) * params.k[q] ** walls * rng.exponential(size=size)
        return total

    return InterferenceSamples(_stack(_run_batches(cfg, batch)), math.nan)


def window_weights(k, model):
    kk = np.asarray(k, dtype=float)

    def weights(walls, labels):
        direct = np.prod(np.power(kk, np.abs(labels)), axis=1)
        reach = np.abs(labels[:, 1]) + np.abs(labels[:, 2])
        levels = model.levels(int(reach.max()) if reach.size else 0)
        leak = levels[reach] * model.l_w**2 * np.power(kk[0], np.abs(labels[:, 0]))
        return np.column_stack([direct, leak])

    return weights


def sim_window(params: GridParams, cfg: SimConfig, model) -> InterferenceSamples:
    """Rayleigh interference in a window room: direct and OoB paths with independent fades."""
    if params.n != 3:
        raise ParameterError("the window office is three-dimensional")
    layouts = []
    for q in range(3):
        m = cfg.radius
        if m is None:
            m = radius_for(params.k[q], cfg.weight_floor) if q == 0 else _window_reach(params.k[q], model,
                                                                                        cfg.weight_floor)
        layouts.append(room_axis(params.mu[q], max(m, 1), lower=0 if q == 0 else None))
    sampler = CountSampler(params, layouts, weight_fn=window_weights(params.k, model),
                           weight_floor=cfg.weight_floor)
    W = sampler.groups.weights

    def batch(rng, size):
        counts, _ = sampler.sample(rng, size)
        return faded_sum(counts, W, ChannelModel.RAYLEIGH, rng).sum(axis=1)

    return InterferenceSamples(_stack(_run_batches(cfg, batch)), math.nan)


def _window_reach(k, model, floor, cap=60):
    for m in range(cap + 1):
        if max(k**m if k > 0 else float(m == 0), model.l_fn(m) * model.l_w**2) < floor:
            return m
    return cap
