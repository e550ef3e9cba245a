"""Poisson grid geometry, the Cox transmitter process and blockage path gain.

Walls perpendicular to axis ``i`` sit at the points of a homogeneous Poisson
process of rate ``mu[i]``.  Every room edge parallel to axis ``i`` carries
``2**(n-1)`` independent Poisson processes of base stations (rate ``lam[i]``
each), one per adjacent room.  The received power between two points is
``h * prod(K_i ** N_i)`` where ``N_i`` counts the axis-``i`` walls on the open
segment between them.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError

FORMAT_NAME = "poisson-grid-realization"
FORMAT_VERSION = 1


class ChannelModel(enum.Enum):
    NO_FADING = "none"
    RAYLEIGH = "rayleigh"

    @classmethod
    def parse(cls, value) -> "ChannelModel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"none": cls.NO_FADING, "nofading": cls.NO_FADING, "no_fading": cls.NO_FADING,
                   "rayleigh": cls.RAYLEIGH}
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown channel model {value!r}") from None


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Counter-based generator whose stream depends only on ``(seed, *ids)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(i) for i in ids]])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GridParams:
    """Per-axis wall densities ``mu``, edge BS densities ``lam`` and losses ``k``."""

    mu: tuple[float, ...]
    lam: tuple[float, ...]
    k: tuple[float, ...]

    def __post_init__(self):
        mu = tuple(float(v) for v in np.atleast_1d(self.mu))
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "k", k)
        if not (len(mu) == len(lam) == len(k)):
            raise ParameterError("mu, lam and k must have the same length")
        if len(mu) < 2:
            raise ParameterError("dimension n must be at least 2")
        if any(not np.isfinite(m) or m <= 0 for m in mu):
            raise ParameterError(f"wall densities must be positive and finite, got {mu}")
        if any(not np.isfinite(l) or l < 0 for l in lam):
            raise ParameterError(f"BS densities must be non-negative and finite, got {lam}")
        if any(not np.isfinite(x) or x < 0 or x >= 1 for x in k):
            raise ParameterError(f"penetration losses must lie in [0, 1), got {k}")

    @classmethod
    def uniform(cls, n: int, r: float, k: float, mu: float = 1.0) -> "GridParams":
        """Isotropic grid with ``lam_i/mu_i = r`` and ``K_i = k`` on every axis."""
        return cls(mu=(mu,) * n, lam=(r * mu,) * n, k=(k,) * n)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def ratios(self) -> np.ndarray:
        """``r_i = lam_i / mu_i``."""
        return np.asarray(self.lam) / np.asarray(self.mu)

    @property
    def edge_share(self) -> int:
        """Number of rooms meeting at an edge, ``2**(n-1)``."""
        return 2 ** (self.n - 1)

    def scaled(self, c: float) -> "GridParams":
        return GridParams(mu=tuple(c * m for m in self.mu), lam=tuple(c * l for l in self.lam), k=self.k)

    def as_dict(self) -> dict:
        return {"mu": list(self.mu), "lam": list(self.lam), "k": list(self.k)}


def avg_density(params: GridParams) -> float:
    """Mean number of BSs per unit volume."""
    share = params.edge_share
    return float(sum(share * l / m for l, m in zip(params.lam, params.mu)) * np.prod(params.mu))


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class BaseStation:
    axis: int
    edge: tuple[float, ...]
    pos: float
    room: int


@dataclass(frozen=True, eq=False)
class GridRealization:
    """Sampled walls and BSs inside a finite observation window.

    BSs are stored column-wise: ``bs_axis[j]`` is the axis of the edge carrying
    BS ``j``, ``bs_edge[j]`` the coordinates of that edge on the other axes
    (increasing axis order), ``bs_pos[j]`` the coordinate along the edge and
    ``bs_room[j]`` the adjacent-room selector in ``1..2**(n-1)``.  Bit ``b`` of
    ``bs_room - 1`` set means the room lies on the positive side of the wall
    that fixes the ``b``-th edge coordinate.
    """

    window: tuple[tuple[float, float], ...]
    walls: tuple[np.ndarray, ...]
    bs_axis: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    bs_edge: np.ndarray | None = None
    bs_pos: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bs_room: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        n = len(self.window)
        if len(self.walls) != n:
            raise ParameterError("need one wall list per axis")
        win = tuple((float(a), float(b)) for a, b in self.window)
        for a, b in win:
            if not b > a:
                raise ParameterError("observation window intervals must be non-degenerate")
        walls = []
        for (a, b), w in zip(win, self.walls):
            w = np.asarray(w, dtype=float)
            if w.ndim != 1:
                raise ParameterError("wall lists must be one-dimensional")
            if np.any(np.diff(w) <= 0):
                raise ParameterError("wall coordinates must be strictly increasing (no duplicates)")
            if w.size and (w[0] < a or w[-1] > b):
                raise ParameterError("walls must lie inside the window")
            w.setflags(write=False)
            walls.append(w)
        object.__setattr__(self, "window", win)
        object.__setattr__(self, "walls", tuple(walls))
        m = len(np.atleast_1d(self.bs_pos))
        edge = np.zeros((m, n - 1)) if self.bs_edge is None else np.asarray(self.bs_edge, dtype=float)
        object.__setattr__(self, "bs_edge", edge.reshape(m, n - 1))
        object.__setattr__(self, "bs_axis", np.asarray(self.bs_axis, dtype=np.int64).reshape(m))
        object.__setattr__(self, "bs_pos", np.asarray(self.bs_pos, dtype=float).reshape(m))
        object.__setattr__(self, "bs_room", np.asarray(self.bs_room, dtype=np.int64).reshape(m))

    @property
    def n(self) -> int:
        return len(self.window)

    @property
    def num_bs(self) -> int:
        return int(self.bs_pos.size)

    def records(self) -> Iterator[BaseStation]:
        for j in range(self.num_bs):
            yield BaseStation(int(self.bs_axis[j]), tuple(self.bs_edge[j]), float(self.bs_pos[j]),
                              int(self.bs_room[j]))

    def bs_coordinates(self) -> np.ndarray:
        """Full n-dimensional coordinates of every BS, shape ``(num_bs, n)``."""
        out = np.empty((self.num_bs, self.n))
        for i in range(self.n):
            sel = self.bs_axis == i
            others = [q for q in range(self.n) if q != i]
            out[sel, i] = self.bs_pos[sel]
            out[np.ix_(sel, others)] = self.bs_edge[sel]
        return out

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(all(a <= xi <= b for (a, b), xi in zip(self.window, x)))

    def to_json(self) -> str:
        doc = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "n": self.n,
            "window": [list(iv) for iv in self.window],
            "walls": [w.tolist() for w in self.walls],
            "bs": [
                {"axis": r.axis, "edge": list(r.edge), "pos": r.pos, "room": r.room}
                for r in self.records()
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "GridRealization":
        doc = json.loads(text)
        if doc.get("format") != FORMAT_NAME:
            raise ParameterError("not a Poisson grid realization document")
        if doc.get("version") != FORMAT_VERSION:
            raise ParameterError(f"unsupported realization version {doc.get('version')}")
        n = int(doc["n"])
        bs = doc["bs"]
        return cls(
            window=tuple(tuple(iv) for iv in doc["window"]),
            walls=tuple(np.asarray(w, dtype=float) for w in doc["walls"]),
            bs_axis=np.array([b["axis"] for b in bs], dtype=np.int64),
            bs_edge=np.array([b["edge"] for b in bs], dtype=float).reshape(len(bs), n - 1),
            bs_pos=np.array([b["pos"] for b in bs], dtype=float),
            bs_room=np.array([b["room"] for b in bs], dtype=np.int64),
        )


def _check_window(window, n):
    if window is None or len(window) != n:
        raise ParameterError(f"window must give {n} intervals")
    win = tuple((float(a), float(b)) for a, b in window)
    if any(not b > a for a, b in win):
        raise ParameterError("window intervals must be non-degenerate")
    return win


def sample_walls(params: GridParams, window, seed: int) -> tuple[np.ndarray, ...]:
    win = _check_window(window, params.n)
    walls = []
    for i, ((a, b), mu) in enumerate(zip(win, params.mu)):
        rng = stream(seed, 0, i)
        count = rng.poisson(mu * (b - a))
        walls.append(np.sort(rng.uniform(a, b, size=count)))
    return tuple(walls)


def sample_bs(params: GridParams, window, walls: Sequence[np.ndarray], seed: int):
    """Sample the Cox process on the edges defined by ``walls``.

    Returns ``(axis, edge, pos, room)`` arrays; see :class:`GridRealization`.
    """
    win = _check_window(window, params.n)
    n = params.n
    share = params.edge_share
    axes, edges, poss, rooms = [], [], [], []
    for i in range(n):
        lam = params.lam[i]
        others = [q for q in range(n) if q != i]
        if lam == 0 or any(len(walls[q]) == 0 for q in others):
            continue
        rng = stream(seed, 1, i)
        lines = np.array(list(itertools.product(*[walls[q] for q in others])), dtype=float)
        lines = lines.reshape(-1, n - 1)
        a, b = win[i]
        counts = rng.poisson(lam * (b - a), size=(lines.shape[0], share))
        total = int(counts.sum())
        if total == 0:
            continue
        line_idx = np.repeat(np.repeat(np.arange(lines.shape[0]), share), counts.ravel())
        room = np.repeat(np.tile(np.arange(1, share + 1), lines.shape[0]), counts.ravel())
        axes.append(np.full(total, i, dtype=np.int64))
        edges.append(lines[line_idx])
        poss.append(rng.uniform(a, b, size=total))
        rooms.append(room)
    if not axes:
        return (np.zeros(0, dtype=np.int64), np.zeros((0, n - 1)), np.zeros(0), np.zeros(0, dtype=np.int64))
    return (np.concatenate(axes), np.concatenate(edges), np.concatenate(poss), np.concatenate(rooms))


def sample_realization(params: GridParams, window, seed: int) -> GridRealization:
    """Exact sample of walls and BSs restricted to ``window``; deterministic in ``seed``."""
    win = _check_window(window, params.n)
    walls = sample_walls(params, win, seed)
    axis, edge, pos, room = sample_bs(params, win, walls, seed)
    return GridRealization(window=win, walls=walls, bs_axis=axis, bs_edge=edge, bs_pos=pos, bs_room=room)


def _between(walls: np.ndarray, lo, hi):
    """Number of wall coordinates strictly inside ``(lo, hi)`` (vectorised, lo <= hi)."""
    c = np.searchsorted(walls, hi, side="left") - np.searchsorted(walls, lo, side="right")
    return np.maximum(c, 0)


def wall_counts(x, y, g: GridRealization) -> np.ndarray:
    """Per-axis number of walls on the open segment from ``x`` to ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (g.n,) or y.shape != (g.n,):
        raise ParameterError(f"points must have {g.n} coordinates")
    if not (g.contains(x) and g.contains(y)):
        raise ParameterError("points must lie inside the observation window")
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)
    return np.array([int(_between(g.walls[i], lo[i], hi[i])) for i in range(g.n)], dtype=np.int64)


def attenuation(k: Sequence[float], counts) -> np.ndarray:
    """``prod_i K_i ** N_i`` with ``0**0 == 1``; ``counts`` has shape ``(..., n)``."""
    counts = np.asarray(counts)
    return np.prod(np.power(np.asarray(k, dtype=float), counts), axis=-1)


def _fade(ch: ChannelModel, rng: np.random.Generator, size=None):
    if ch is ChannelModel.NO_FADING:
        return np.ones(size) if size is not None else 1.0
    return rng.exponential(1.0, size=size)


def path_gain(x, y, g: GridRealization, params: GridParams, ch: ChannelModel = ChannelModel.NO_FADING,
              seed: int = 0) -> float:
    """Received power at ``y`` from a unit-power transmitter at ``x``."""
    counts = wall_counts(x, y, g)
    h = _fade(ChannelModel.parse(ch), stream(seed, 2))
    return float(h * attenuation(params.k, counts))


def bs_wall_counts(y, g: GridRealization) -> np.ndarray:
    """Wall counts from every BS (treated as inside its adjacent room) to point ``y``.

    Along the edge axis the open-segment rule applies.  Along every other axis
    the BS sits on a wall; that wall is crossed exactly when ``y`` lies strictly
    on the opposite side from the BS's room.
    """
    y = np.asarray(y, dtype=float)
    if not g.contains(y):
        raise ParameterError("receiver must lie inside the observation window")
    n = g.n
    out = np.zeros((g.num_bs, n), dtype=np.int64)
    for i in range(n):
        sel = np.flatnonzero(g.bs_axis == i)
        if sel.size == 0:
            continue
        pos = g.bs_pos[sel]
        out[sel, i] = _between(g.walls[i], np.minimum(pos, y[i]), np.maximum(pos, y[i]))
        others = [q for q in range(n) if q != i]
        bits = g.bs_room[sel] - 1
        for b, q in enumerate(others):
            c = g.bs_edge[sel, b]
            plus = ((bits >> b) & 1).astype(bool)
            count = _between(g.walls[q], np.minimum(c, y[q]), np.maximum(c, y[q]))
            crossed = (plus & (y[q] < c)) | (~plus & (y[q] > c))
            out[sel, q] = count + crossed
    return out


def bs_gains(y, g: GridRealization, params: GridParams, ch: ChannelModel = ChannelModel.NO_FADING,
             seed: int = 0) -> np.ndarray:
    """Received power at ``y`` from every BS of the realization."""
    att = attenuation(params.k, bs_wall_counts(y, g))
    return att * _fade(ChannelModel.parse(ch), stream(seed, 3), size=att.shape)
