"""Continuous imaginary-time worldline sampler for the extended toric code.

The Hamiltonian is ``-mu sum_star prod tau^x - J sum_plaq prod tau^z
- h sum_l tau^x - lam sum_l tau^z`` on unconstrained link spins. In the chosen
product basis one half of it is diagonal; the other half generates flip
events. With ``(d4, d1)`` the diagonal and ``(o4, o1)`` the off-diagonal
couplings of four-body and single-link terms::

    X basis: d4 = mu (stars),      d1 = h,    o4 = J (plaquettes), o1 = lam
    Z basis: d4 = J (plaquettes),  d1 = lam,  o4 = mu (stars),     o1 = h

A worldline is the spin state at tau = 0 plus, per link, the sorted times at
which that link flips. Each time is tagged with the event that produced it:
``-1`` for a single-link event or the index of the four-body object. The
weight is ``o4^n4 * o1^n1 * exp(-S)`` with ``S`` the time integral of the
diagonal energy.

Updates (all Metropolis-Hastings against exact weight ratios):

* pair insertion/removal of single-link events and of four-body events, on an
  arc of length below ``window``;
* split/merge, trading one four-body event for one event on each of its links
  within ``delta`` of it;
* toggle: add or remove one four-body event and, on each of its links, remove
  the nearest single-link event within ``delta`` or insert one, which carries
  single-link excitations across a four-body object;
* time shift of a single event between its neighbours;
* flip of the initial spin of an event-free link;
* global insertion/removal of one event on every four-body object;
* winding flip: invert the whole history of every link on a straight
  non-contractible loop that meets each diagonal four-body object an even
  number of times (a direct-lattice loop in the X basis, a dual one in Z);
* loop shift and loop pair: move, insert or remove one single-link event per
  link of such a loop, close in time, which tunnels between winding sectors.

Split/merge and toggle run with ``delta`` and with a wider window.

Split/merge, toggle and the global move connect worldlines whose per-object event
counts have different parity, which pair moves alone never reach. The
winding flip changes the topological sector, which local moves only reach
through long-lived defect pairs and, at zero single-link coupling, never.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from ..classical import ObservableSeries, _seed
from ..gauge import Basis, GaugeConfig, occupation
from ..lattice import LatticeTopology, build_lattice
from ..percolation import measure

LINK = -1
NEED_GROW = -1

# counter rows: proposed, accepted
(U_LINK_PAIR, U_OBJ_PAIR, U_SPLIT, U_SHIFT, U_SEGMENT, U_GLOBAL, U_WINDING, U_LOOP_SHIFT,
 U_LOOP_PAIR, U_TOGGLE) = range(10)
UPDATE_NAMES = ("link_pair", "fourbody_pair", "split_merge", "timeshift", "segment", "global",
                "winding", "loop_shift", "loop_pair", "toggle")


class QmcBasis(enum.IntEnum):
    X = 0
    Z = 1


@dataclass
class QmcParams:
    L: int
    h: float
    lam: float
    mu: float = 1.0
    J: float = 1.0
    basis: QmcBasis = QmcBasis.X
    beta: float | None = None
    thermalization: int = 200
    sweeps_between: int = 2
    n_samples: int = 1000
    seed: int = 0
    window: float = 2.0
    delta: float = 0.5
    global_updates: bool | None = None
    winding_updates: bool = True
    keep_snapshots: bool = False
    debug: bool = False
    D: int = 2

    def __post_init__(self):
        self.basis = QmcBasis(self.basis)
        if self.D != 2:
            raise ValueError("the quantum model is defined on the square lattice (D=2)")
        if self.L < 2:
            raise ValueError("L must be at least 2")
        if self.beta is None:
            self.beta = float(self.L)
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for name in ("mu", "J", "h", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative (sign-problem-free region)")
        if self.window <= 0 or self.delta <= 0:
            raise ValueError("window and delta must be positive")
        if min(self.thermalization, self.sweeps_between, self.n_samples) < 0:
            raise ValueError("schedule entries must be non-negative")

    @property
    def couplings(self) -> tuple[float, float, float, float]:
        """``(d4, d1, o4, o1)`` for the configured basis."""
        if self.basis is QmcBasis.X:
            return self.mu, self.h, self.J, self.lam
        return self.J, self.lam, self.mu, self.h

    def to_dict(self) -> dict:
        d = asdict(self)
        d["basis"] = self.basis.name
        return d


def basis_objects(topo: LatticeTopology, basis: QmcBasis):
    """Link lists of the diagonal and off-diagonal four-body objects."""
    stars = np.ascontiguousarray(topo.star, dtype=np.int64)
    plaqs = np.ascontiguousarray(topo.plaquettes, dtype=np.int64)
    if basis is QmcBasis.X:
        return stars, plaqs
    return plaqs, stars


def winding_loops(topo: LatticeTopology, basis: QmcBasis) -> np.ndarray:
    """Straight non-contractible link loops, one row per loop (``2 L`` of them)."""
    L = topo.linear_size
    loops = []
    for d in (0, 1):
        for c in range(L):
            row = []
            for t in range(L):
                x = [0, 0]
                if basis is QmcBasis.X:
                    x[d], x[1 - d] = t, c      # links along their own direction
                else:
                    x[d], x[1 - d] = c, t      # links crossing a dual line
                row.append(topo.link_index(topo.site_index(*x), d))
            loops.append(row)
    return np.array(loops, dtype=np.int64)


def _incidence(objects: np.ndarray, n_links: int) -> np.ndarray:
    width = np.bincount(objects.ravel(), minlength=n_links).max()
    out = np.full((n_links, width), -1, dtype=np.int64)
    fill = np.zeros(n_links, dtype=np.int64)
    for o, links in enumerate(objects):
        for l in links:
            out[l, fill[l]] = o
            fill[l] += 1
    return out


@dataclass(eq=False)
class WorldlineConfig:
    """Initial spins plus per-link and per-object sorted event times."""

    topo: LatticeTopology
    basis: QmcBasis
    beta: float
    spins: np.ndarray              # int8 +-1, state at tau = 0
    ltime: np.ndarray              # (n_links, cap) flip times per link
    lkind: np.ndarray              # (n_links, cap) LINK or four-body object id
    lcount: np.ndarray
    otime: np.ndarray              # (n_obj, cap) event times per off-diagonal object
    ocount: np.ndarray
    diag_links: np.ndarray = field(repr=False)
    off_links: np.ndarray = field(repr=False)
    link_diag: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, topo: LatticeTopology, basis: QmcBasis, beta: float, cap: int = 16,
              spins=None) -> "WorldlineConfig":
        diag, off = basis_objects(topo, QmcBasis(basis))
        n = topo.link_count
        s = np.ones(n, dtype=np.int8) if spins is None else np.asarray(spins, dtype=np.int8).copy()
        if s.shape != (n,) or not np.all(np.abs(s) == 1):
            raise ValueError("initial spins must be +-1 per link")
        return cls(
            topo, QmcBasis(basis), float(beta), s,
            np.zeros((n, cap)), np.zeros((n, cap), dtype=np.int64), np.zeros(n, dtype=np.int64),
            np.zeros((len(off), cap)), np.zeros(len(off), dtype=np.int64),
            diag, off, _incidence(diag, n),
        )

    @property
    def state(self):
        return (self.spins, self.ltime, self.lkind, self.lcount, self.otime, self.ocount)

    @state.setter
    def state(self, st):
        self.spins, self.ltime, self.lkind, self.lcount, self.otime, self.ocount = st

    @property
    def n_link_events(self) -> int:
        return int(np.sum(self.lkind[np.arange(self.ltime.shape[1]) < self.lcount[:, None]] == LINK))

    @property
    def n_fourbody_events(self) -> int:
        return int(self.ocount.sum())

    def events(self) -> list[tuple[float, str, int]]:
        """Time-ordered ``(time, kind, id)`` list; kind is ``"link"`` or ``"fourbody"``."""
        out = []
        for l in range(self.topo.link_count):
            for k in range(self.lcount[l]):
                if self.lkind[l, k] == LINK:
                    out.append((float(self.ltime[l, k]), "link", l))
        for o in range(len(self.ocount)):
            for k in range(self.ocount[o]):
                out.append((float(self.otime[o, k]), "fourbody", o))
        return sorted(out)

    def spins_at(self, t: float) -> np.ndarray:
        flips = np.array([np.searchsorted(self.ltime[l, : self.lcount[l]], t, side="right")
                          for l in range(self.topo.link_count)])
        return (self.spins * (1 - 2 * (flips % 2))).astype(np.int8)

    def check(self) -> None:
        """Assert the structural invariants (periodicity, ordering, cross-references)."""
        for l in range(self.topo.link_count):
            t = self.ltime[l, : self.lcount[l]]
            assert self.lcount[l] % 2 == 0, f"link {l} flips an odd number of times"
            assert np.all(np.diff(t) > 0), f"event times on link {l} not strictly increasing"
            assert np.all((t >= 0) & (t < self.beta))
            for tk, kind in zip(t, self.lkind[l, : self.lcount[l]]):
                if kind != LINK:
                    ot = self.otime[kind, : self.ocount[kind]]
                    assert l in self.off_links[kind] and np.any(ot == tk)
        for o in range(len(self.ocount)):
            ot = self.otime[o, : self.ocount[o]]
            assert np.all(np.diff(ot) > 0)
            for tk in ot:
                for l in self.off_links[o]:
                    k = np.searchsorted(self.ltime[l, : self.lcount[l]], tk)
                    assert k < self.lcount[l] and self.ltime[l, k] == tk and self.lkind[l, k] == o

    def copy(self) -> "WorldlineConfig":
        return WorldlineConfig(
            self.topo, self.basis, self.beta, self.spins.copy(), self.ltime.copy(),
            self.lkind.copy(), self.lcount.copy(), self.otime.copy(), self.ocount.copy(),
            self.diag_links, self.off_links, self.link_diag,
        )

    def grow(self) -> None:
        cap = self.ltime.shape[1]
        pad = lambda a: np.concatenate([a, np.zeros((a.shape[0], cap), dtype=a.dtype)], axis=1)
        self.ltime, self.lkind, self.otime = pad(self.ltime), pad(self.lkind), pad(self.otime)


# ---------------------------------------------------------------------------
# numba kernels; ``st`` is the state tuple, ``tp`` the model tuple
#   st = (spins, ltime, lkind, lcount, otime, ocount)
#   tp = (diag_links, off_links, link_diag, d4, d1, o4, o1, beta, window, delta, buf)


@njit(cache=True)
def _link_integral(st, l, beta):
    spins, ltime, _, lcount, _, _ = st
    s = spins[l]
    prev, tot = 0.0, 0.0
    for k in range(lcount[l]):
        t = ltime[l, k]
        tot += s * (t - prev)
        s = -s
        prev = t
    return tot + s * (beta - prev)


@njit(cache=True)
def _object_integral(st, links, beta, buf):
    spins, ltime, _, lcount, _, _ = st
    need = 0
    for i in range(links.shape[0]):
        need += lcount[links[i]]
    if need > buf.shape[0]:
        buf = np.empty(2 * need)
    n = 0
    s = 1
    for i in range(links.shape[0]):
        l = links[i]
        s *= spins[l]
        for k in range(lcount[l]):
            buf[n] = ltime[l, k]
            n += 1
    ts = np.sort(buf[:n])
    prev, tot = 0.0, 0.0
    for t in ts:
        tot += s * (t - prev)
        s = -s
        prev = t
    return tot + s * (beta - prev)


@njit(cache=True)
def local_action(st, tp, links, n_links, joint=True):
    """Part of the diagonal action that changes when ``links[:n_links]`` are flipped together.

    Differences of this quantity before and after a change of those links
    equal differences of the full action. With ``joint`` the links are known to
    flip on one common interval, so objects meeting them an even number of
    times are skipped.
    """
    diag_links, _, link_diag, d4, d1, _, _, beta, _, _, buf = tp
    seen = np.empty(n_links * link_diag.shape[1], dtype=np.int64)
    n_seen = 0
    total = 0.0
    for i in range(n_links):
        l = links[i]
        total -= d1 * _link_integral(st, l, beta)
        for j in range(link_diag.shape[1]):
            o = link_diag[l, j]
            if o < 0:
                continue
            dup = False
            for k in range(n_seen):
                if seen[k] == o:
                    dup = True
                    break
            if dup:
                continue
            seen[n_seen] = o
            n_seen += 1
            # objects meeting the flipped set an even number of times keep their product
            overlap = 0
            for a in diag_links[o]:
                for k in range(n_links):
                    if links[k] == a:
                        overlap += 1
            if d4 != 0.0 and (overlap % 2 == 1 or not joint):
                total -= d4 * _object_integral(st, diag_links[o], beta, buf)
    return total


@njit(cache=True)
def full_action(st, tp):
    diag_links, _, _, d4, d1, _, _, beta, _, _, buf = tp
    total = 0.0
    for l in range(st[0].shape[0]):
        total -= d1 * _link_integral(st, l, beta)
    if d4 != 0.0:
        for o in range(diag_links.shape[0]):
            total -= d4 * _object_integral(st, diag_links[o], beta, buf)
    return total


@njit(cache=True)
def _pos(arr, n, t):
    return np.searchsorted(arr[:n], t)


@njit(cache=True)
def _taken(st, l, t):
    _, ltime, _, lcount, _, _ = st
    k = _pos(ltime[l], lcount[l], t)
    return k < lcount[l] and ltime[l, k] == t


@njit(cache=True)
def _add_link_time(st, l, t, kind):
    _, ltime, lkind, lcount, _, _ = st
    n = lcount[l]
    k = _pos(ltime[l], n, t)
    for m in range(n, k, -1):
        ltime[l, m] = ltime[l, m - 1]
        lkind[l, m] = lkind[l, m - 1]
    ltime[l, k] = t
    lkind[l, k] = kind
    lcount[l] = n + 1


@njit(cache=True)
def _drop_link_time(st, l, t):
    _, ltime, lkind, lcount, _, _ = st
    n = lcount[l]
    k = _pos(ltime[l], n, t)
    kind = lkind[l, k]
    for m in range(k, n - 1):
        ltime[l, m] = ltime[l, m + 1]
        lkind[l, m] = lkind[l, m + 1]
    lcount[l] = n - 1
    return kind


@njit(cache=True)
def _add_object_event(st, off_links, o, t):
    _, _, _, _, otime, ocount = st
    n = ocount[o]
    k = _pos(otime[o], n, t)
    for m in range(n, k, -1):
        otime[o, m] = otime[o, m - 1]
    otime[o, k] = t
    ocount[o] = n + 1
    for l in off_links[o]:
        _add_link_time(st, l, t, o)


@njit(cache=True)
def _drop_object_event(st, off_links, o, t):
    _, _, _, _, otime, ocount = st
    n = ocount[o]
    k = _pos(otime[o], n, t)
    for m in range(k, n - 1):
        otime[o, m] = otime[o, m + 1]
    ocount[o] = n - 1
    for l in off_links[o]:
        _drop_link_time(st, l, t)


@njit(cache=True)
def _room(st, l, extra):
    return st[3][l] + extra <= st[1].shape[1]


@njit(cache=True)
def _links_of(tp, is_obj, idx):
    if is_obj:
        return tp[1][idx].copy()
    out = np.empty(1, dtype=np.int64)
    out[0] = idx
    return out


@njit(cache=True)
def _flip_spins(st, links):
    for l in links:
        st[0][l] = -st[0][l]


@njit(cache=True)
def _link_event_count(st, l):
    _, _, lkind, lcount, _, _ = st
    c = 0
    for k in range(lcount[l]):
        if lkind[l, k] == LINK:
            c += 1
    return c


@njit(cache=True)
def _link_event_time(st, l, j):
    """Time of the ``j``-th single-link event on ``l``."""
    _, ltime, lkind, lcount, _, _ = st
    c = 0
    for k in range(lcount[l]):
        if lkind[l, k] == LINK:
            if c == j:
                return ltime[l, k]
            c += 1
    return -1.0


@njit(cache=True)
def _pair_times(st, tp, is_obj, idx):
    """Times of single-link events on link ``idx`` or events of object ``idx``."""
    if is_obj:
        return st[4][idx, : st[5][idx]].copy()
    n = _link_event_count(st, idx)
    out = np.empty(n)
    for j in range(n):
        out[j] = _link_event_time(st, idx, j)
    return out


@njit(cache=True)
def _count_pairs(times, beta, window):
    """Ordered pairs ``(a, b)`` with forward cyclic distance ``(b - a) mod beta < window``."""
    c = 0
    for i in range(times.shape[0]):
        for j in range(times.shape[0]):
            if i != j and (times[j] - times[i]) % beta < window:
                c += 1
    return c


@njit(cache=True)
def _insert_arc(st, tp, is_obj, idx, t1, t2, wrapped):
    links = _links_of(tp, is_obj, idx)
    if is_obj:
        _add_object_event(st, tp[1], idx, t1)
        _add_object_event(st, tp[1], idx, t2)
    else:
        _add_link_time(st, idx, t1, LINK)
        _add_link_time(st, idx, t2, LINK)
    if wrapped:
        _flip_spins(st, links)


@njit(cache=True)
def _remove_arc(st, tp, is_obj, idx, t1, t2, wrapped):
    links = _links_of(tp, is_obj, idx)
    if is_obj:
        _drop_object_event(st, tp[1], idx, t1)
        _drop_object_event(st, tp[1], idx, t2)
    else:
        _drop_link_time(st, idx, t1)
        _drop_link_time(st, idx, t2)
    if wrapped:
        _flip_spins(st, links)


@njit(cache=True)
def pair_insert(st, tp, is_obj, idx, t1, d, u):
    """Insert two events flipping ``links(idx)`` on the cyclic arc ``[t1, t1 + d)``.

    Returns ``(code, ratio)``; ``code`` is 1 accepted, 0 rejected, -1 when the
    event arrays need to grow (state untouched).
    """
    beta, window = tp[7], tp[8]
    c = tp[5] if is_obj else tp[6]
    if c == 0.0 or not 0.0 < d < window:
        return 0, 0.0
    links = _links_of(tp, is_obj, idx)
    for l in links:
        if not _room(st, l, 2):
            return NEED_GROW, 0.0
    if is_obj and st[5][idx] + 2 > st[4].shape[1]:
        return NEED_GROW, 0.0
    raw = t1 + d
    wrapped = raw >= beta
    t2 = raw - beta if wrapped else raw
    if t2 == t1:
        return 0, 0.0
    for l in links:
        if _taken(st, l, t1) or _taken(st, l, t2):
            return 0, 0.0
    s0 = local_action(st, tp, links, links.shape[0])
    _insert_arc(st, tp, is_obj, idx, t1, t2, wrapped)
    s1 = local_action(st, tp, links, links.shape[0])
    m_after = _count_pairs(_pair_times(st, tp, is_obj, idx), beta, window)
    ratio = c * c * math.exp(-(s1 - s0)) * beta * window / m_after
    if u < ratio:
        return 1, ratio
    _remove_arc(st, tp, is_obj, idx, t1, t2, wrapped)
    return 0, ratio


@njit(cache=True)
def pair_remove(st, tp, is_obj, idx, pick, u):
    """Remove a uniformly chosen close ordered pair; ``pick`` in [0, 1) selects it."""
    beta, window = tp[7], tp[8]
    c = tp[5] if is_obj else tp[6]
    times = _pair_times(st, tp, is_obj, idx)
    m = _count_pairs(times, beta, window)
    if m == 0:
        return 0, 0.0
    target = min(int(pick * m), m - 1)
    t1, t2 = -1.0, -1.0
    k = 0
    for i in range(times.shape[0]):
        for j in range(times.shape[0]):
            if i != j and (times[j] - times[i]) % beta < window:
                if k == target:
                    t1, t2 = times[i], times[j]
                k += 1
    wrapped = t2 < t1
    links = _links_of(tp, is_obj, idx)
    s0 = local_action(st, tp, links, links.shape[0])
    _remove_arc(st, tp, is_obj, idx, t1, t2, wrapped)
    s1 = local_action(st, tp, links, links.shape[0])
    ratio = math.exp(-(s1 - s0)) * m / (c * c * beta * window)
    if u < ratio:
        return 1, ratio
    _insert_arc(st, tp, is_obj, idx, t1, t2, wrapped)
    return 0, ratio


@njit(cache=True)
def time_shift(st, tp, l, pick, v, u):
    """Move one event seen on link ``l`` to a uniform time between its neighbours."""
    _, ltime, lkind, lcount, _, _ = st
    beta = tp[7]
    n = lcount[l]
    if n == 0:
        return 0, 0.0
    k = min(int(pick * n), n - 1)
    t = ltime[l, k]
    kind = lkind[l, k]
    links = _links_of(tp, kind != LINK, kind if kind != LINK else l)
    lo, hi = 0.0, beta
    for a in links:
        j = _pos(ltime[a], lcount[a], t)
        if j > 0:
            lo = max(lo, ltime[a, j - 1])
        if j + 1 < lcount[a]:
            hi = min(hi, ltime[a, j + 1])
    t_new = lo + v * (hi - lo)
    if t_new == t or t_new <= lo or t_new >= hi:
        return 0, 0.0
    s0 = local_action(st, tp, links, links.shape[0])
    if kind != LINK:
        _drop_object_event(st, tp[1], kind, t)
        _add_object_event(st, tp[1], kind, t_new)
    else:
        _drop_link_time(st, l, t)
        _add_link_time(st, l, t_new, LINK)
    s1 = local_action(st, tp, links, links.shape[0])
    ratio = math.exp(-(s1 - s0))
    if u < ratio:
        return 1, ratio
    if kind != LINK:
        _drop_object_event(st, tp[1], kind, t_new)
        _add_object_event(st, tp[1], kind, t)
    else:
        _drop_link_time(st, l, t_new)
        _add_link_time(st, l, t, LINK)
    return 0, ratio


@njit(cache=True)
def segment_flip(st, tp, l, u):
    """Flip the whole worldline of an event-free link."""
    if st[3][l] != 0:
        return 0, 0.0
    links = _links_of(tp, False, l)
    s0 = local_action(st, tp, links, 1)
    st[0][l] = -st[0][l]
    s1 = local_action(st, tp, links, 1)
    ratio = math.exp(-(s1 - s0))
    if u < ratio:
        return 1, ratio
    st[0][l] = -st[0][l]
    return 0, ratio


@njit(cache=True)
def winding_flip(st, tp, links, u):
    """Invert the full history of every link in ``links``; events are kept."""
    s0 = local_action(st, tp, links, links.shape[0])
    _flip_spins(st, links)
    s1 = local_action(st, tp, links, links.shape[0])
    ratio = math.exp(-(s1 - s0))
    if u < ratio:
        return 1, ratio
    _flip_spins(st, links)
    return 0, ratio


@njit(cache=True)
def _nearest_link_event(st, l, t, beta, cut):
    """Single-link event on ``l`` closest to ``t`` in cyclic time, or -1 if none is within ``cut``."""
    _, ltime, lkind, lcount, _, _ = st
    best, bt = cut, -1.0
    for k in range(lcount[l]):
        if lkind[l, k] == LINK:
            d = abs(ltime[l, k] - t)
            d = min(d, beta - d)
            if d < best:
                best, bt = d, ltime[l, k]
    return bt


@njit(cache=True)
def _passes_event(st, l, a, b):
    """True if link ``l`` carries an event strictly between times ``a`` and ``b``."""
    _, ltime, _, lcount, _, _ = st
    lo, hi = min(a, b), max(a, b)
    for k in range(lcount[l]):
        if lo < ltime[l, k] < hi:
            return True
    return False


@njit(cache=True)
def loop_shift(st, tp, loop, pick_link, pick_event, v, u):
    """Shift one single-link event per link of a winding loop by a common offset.

    The group is a chosen event plus, on every other link of the loop, the
    single-link event nearest to it within the window. All members move by
    ``window * (2 v - 1)``; the move is rejected if a member would pass
    another event on its link, leave [0, beta), or if the group seen from the
    moved event differs (which keeps the proposal symmetric).
    """
    beta, window = tp[7], tp[8]
    n_loop = loop.shape[0]
    i0 = min(int(pick_link * n_loop), n_loop - 1)
    n = _link_event_count(st, loop[i0])
    if n == 0:
        return 0, 0.0
    t0 = _link_event_time(st, loop[i0], min(int(pick_event * n), n - 1))
    old = np.empty(n_loop)
    for i in range(n_loop):
        old[i] = t0 if i == i0 else _nearest_link_event(st, loop[i], t0, beta, window)
        if old[i] < 0.0:
            return 0, 0.0
    shift = window * (2.0 * v - 1.0)
    new = old + shift
    for i in range(n_loop):
        if not 0.0 <= new[i] < beta or new[i] == old[i]:
            return 0, 0.0
        if _passes_event(st, loop[i], old[i], new[i]) or _taken(st, loop[i], new[i]):
            return 0, 0.0
    s0 = local_action(st, tp, loop, n_loop, False)
    for i in range(n_loop):
        _drop_link_time(st, loop[i], old[i])
        _add_link_time(st, loop[i], new[i], LINK)
    same = True
    for i in range(n_loop):
        if i != i0 and _nearest_link_event(st, loop[i], new[i0], beta, window) != new[i]:
            same = False
    ratio = 0.0
    if same:
        s1 = local_action(st, tp, loop, n_loop, False)
        ratio = math.exp(-(s1 - s0))
        if u < ratio:
            return 1, ratio
    for i in range(n_loop):
        _drop_link_time(st, loop[i], new[i])
        _add_link_time(st, loop[i], old[i], LINK)
    return 0, ratio


@njit(cache=True)
def _loop_delta(tp):
    return min(tp[9], tp[7] / 8.0)


@njit(cache=True)
def _loop_pair_factor(tp, n_loop, n0):
    """Coupling power times the proposal-density ratio of a loop pair insertion."""
    beta, dl = tp[7], _loop_delta(tp)
    return tp[6] ** (2 * n_loop) * beta * beta * (2.0 * dl) ** (2 * (n_loop - 1)) / (n0 * (n0 - 1))


@njit(cache=True)
def loop_pair_insert(st, tp, loop, t1, d, x, u):
    """Flip a winding loop on an interval by one event pair per loop link.

    The first loop link gets events at ``t1`` and ``t1 + d``; every other
    link gets its two events within ``dl`` of those times, offsets drawn
    from ``x`` (two uniforms per link). The reverse move picks an ordered
    pair of single-link events on the first link and takes, on every other
    link, the nearest event to each within ``dl``.
    """
    beta = tp[7]
    if tp[6] == 0.0:
        return 0, 0.0
    dl = _loop_delta(tp)
    if not 2.0 * dl < d < beta - 2.0 * dl:
        return 0, 0.0
    n_loop = loop.shape[0]
    for i in range(n_loop):
        if not _room(st, loop[i], 2):
            return NEED_GROW, 0.0
    a = np.empty(n_loop)
    b = np.empty(n_loop)
    for i in range(n_loop):
        off1 = 0.0 if i == 0 else dl * (2.0 * x[2 * i - 2] - 1.0)
        off2 = 0.0 if i == 0 else dl * (2.0 * x[2 * i - 1] - 1.0)
        a[i] = _wrap(t1 + off1, beta)[0]
        b[i] = _wrap(t1 + d + off2, beta)[0]
        if a[i] == b[i] or _taken(st, loop[i], a[i]) or _taken(st, loop[i], b[i]):
            return 0, 0.0
    s0 = local_action(st, tp, loop, n_loop, False)
    for i in range(n_loop):
        _insert_arc(st, tp, False, loop[i], a[i], b[i], b[i] < a[i])
    ok = True
    for i in range(1, n_loop):
        if (_nearest_link_event(st, loop[i], a[0], beta, dl) != a[i]
                or _nearest_link_event(st, loop[i], b[0], beta, dl) != b[i]):
            ok = False
    ratio = 0.0
    if ok:
        s1 = local_action(st, tp, loop, n_loop, False)
        n0 = _link_event_count(st, loop[0])
        ratio = math.exp(-(s1 - s0)) * _loop_pair_factor(tp, n_loop, n0)
        if u < ratio:
            return 1, ratio
    for i in range(n_loop):
        _remove_arc(st, tp, False, loop[i], a[i], b[i], b[i] < a[i])
    return 0, ratio


@njit(cache=True)
def loop_pair_remove(st, tp, loop, pick, u):
    """Inverse of :func:`loop_pair_insert`; ``pick`` in [0, 1) selects the ordered pair."""
    beta = tp[7]
    dl = _loop_delta(tp)
    n_loop = loop.shape[0]
    n0 = _link_event_count(st, loop[0])
    if n0 < 2:
        return 0, 0.0
    k = min(int(pick * n0 * (n0 - 1)), n0 * (n0 - 1) - 1)
    i1 = k // (n0 - 1)
    i2 = k % (n0 - 1)
    if i2 >= i1:
        i2 += 1
    a = np.empty(n_loop)
    b = np.empty(n_loop)
    a[0] = _link_event_time(st, loop[0], i1)
    b[0] = _link_event_time(st, loop[0], i2)
    d = (b[0] - a[0]) % beta
    if not 2.0 * dl < d < beta - 2.0 * dl:
        return 0, 0.0
    for i in range(1, n_loop):
        a[i] = _nearest_link_event(st, loop[i], a[0], beta, dl)
        b[i] = _nearest_link_event(st, loop[i], b[0], beta, dl)
        if a[i] < 0.0 or b[i] < 0.0:
            return 0, 0.0
    s0 = local_action(st, tp, loop, n_loop, False)
    for i in range(n_loop):
        _remove_arc(st, tp, False, loop[i], a[i], b[i], b[i] < a[i])
    s1 = local_action(st, tp, loop, n_loop, False)
    ratio = math.exp(-(s1 - s0)) / _loop_pair_factor(tp, n_loop, n0)
    if u < ratio:
        return 1, ratio
    for i in range(n_loop):
        _insert_arc(st, tp, False, loop[i], a[i], b[i], b[i] < a[i])
    return 0, ratio


@njit(cache=True)
def _wrap(x, beta):
    """Fold ``x`` into [0, beta); also report how many periods were removed."""
    f = math.floor(x / beta)
    return x - f * beta, f


@njit(cache=True)
def split(st, tp, o, pick, v, u):
    """Replace one event of object ``o`` by one single-link event per link.

    ``v`` holds one uniform per link; new times are ``t + delta * (2 v - 1)``.
    """
    off_links, beta, delta = tp[1], tp[7], tp[9]
    if tp[6] == 0.0 or tp[5] == 0.0:
        return 0, 0.0
    k_o = st[5][o]
    if k_o == 0:
        return 0, 0.0
    t = st[4][o, min(int(pick * k_o), k_o - 1)]
    links = off_links[o].copy()
    nl = links.shape[0]
    raw = np.empty(nl)
    m_before = np.empty(nl, dtype=np.int64)
    for i in range(nl):
        raw[i] = t + delta * (2.0 * v[i] - 1.0)
        tw, _ = _wrap(raw[i], beta)
        if _taken(st, links[i], tw):
            return 0, 0.0
        m_before[i] = _link_event_count(st, links[i])
    spread = raw.max() - raw.min()
    s0 = local_action(st, tp, links, nl, False)
    _drop_object_event(st, off_links, o, t)
    new_t = np.empty(nl)
    for i in range(nl):
        # moving a flip across tau = 0 toggles the initial spin
        new_t[i], f = _wrap(raw[i], beta)
        _add_link_time(st, links[i], new_t[i], LINK)
        if f != 0:
            st[0][links[i]] = -st[0][links[i]]
    s1 = local_action(st, tp, links, nl, False)
    ratio = (tp[6] ** nl / tp[5]) * math.exp(-(s1 - s0)) * k_o * (2 * delta) ** nl
    ratio /= np.prod(m_before + 1) * (2 * delta - spread)
    if u < ratio:
        return 1, ratio
    for i in range(nl):
        _drop_link_time(st, links[i], new_t[i])
        _, f = _wrap(raw[i], beta)
        if f != 0:
            st[0][links[i]] = -st[0][links[i]]
    _add_object_event(st, off_links, o, t)
    return 0, ratio


@njit(cache=True)
def merge(st, tp, o, picks, v, u):
    """Fuse one single-link event on each link of ``o`` into one event of ``o``."""
    off_links, beta, delta = tp[1], tp[7], tp[9]
    if tp[6] == 0.0 or tp[5] == 0.0:
        return 0, 0.0
    if st[5][o] + 1 > st[4].shape[1]:
        return NEED_GROW, 0.0
    links = off_links[o].copy()
    nl = links.shape[0]
    times = np.empty(nl)
    m = np.empty(nl, dtype=np.int64)
    for i in range(nl):
        m[i] = _link_event_count(st, links[i])
        if m[i] == 0:
            return 0, 0.0
        times[i] = _link_event_time(st, links[i], min(int(picks[i] * m[i]), m[i] - 1))
    # positions relative to the first chosen time, unwrapped onto the short arc
    rel = np.empty(nl)
    for i in range(nl):
        rel[i] = (times[i] - times[0] + 0.5 * beta) % beta - 0.5 * beta
    spread = rel.max() - rel.min()
    if spread >= 2 * delta:
        return 0, 0.0
    off = rel.max() - delta + v * (2 * delta - spread)
    t_raw = times[0] + off
    t_new, _ = _wrap(t_raw, beta)
    for i in range(nl):
        if times[i] != t_new and _taken(st, links[i], t_new):
            return 0, 0.0
    s0 = local_action(st, tp, links, nl, False)
    flipped = np.zeros(nl, dtype=np.bool_)
    for i in range(nl):
        _drop_link_time(st, links[i], times[i])
        flipped[i] = math.floor((times[0] + rel[i]) / beta) != math.floor(t_raw / beta)
        if flipped[i]:
            st[0][links[i]] = -st[0][links[i]]
    _add_object_event(st, off_links, o, t_new)
    s1 = local_action(st, tp, links, nl, False)
    k_after = st[5][o]
    ratio = (tp[5] / tp[6] ** nl) * math.exp(-(s1 - s0)) * np.prod(m) * (2 * delta - spread)
    ratio /= k_after * (2 * delta) ** nl
    if u < ratio:
        return 1, ratio
    _drop_object_event(st, off_links, o, t_new)
    for i in range(nl):
        if flipped[i]:
            st[0][links[i]] = -st[0][links[i]]
        _add_link_time(st, links[i], times[i], LINK)
    return 0, ratio


@njit(cache=True)
def _plan_toggles(st, links, t, v, delta, beta, new_t, ins, wrap):
    """Per link: remove the nearest single-link event within ``delta`` of ``t``, or insert one.

    Fills the target times, the insert flags and whether the short arc between
    ``t`` and the target crosses tau = 0. Returns False on a time collision.
    """
    for i in range(links.shape[0]):
        tl = _nearest_link_event(st, links[i], t, beta, delta)
        if tl >= 0.0:
            new_t[i], ins[i], wrap[i] = tl, False, abs(tl - t) > 0.5 * beta
        else:
            tw, f = _wrap(t + delta * (2.0 * v[i] - 1.0), beta)
            if tw == t or _taken(st, links[i], tw):
                return False
            new_t[i], ins[i], wrap[i] = tw, True, f != 0
    return True


@njit(cache=True)
def _apply_toggles(st, links, new_t, ins, wrap, undo):
    for i in range(links.shape[0]):
        if ins[i] != undo:
            _add_link_time(st, links[i], new_t[i], LINK)
        else:
            _drop_link_time(st, links[i], new_t[i])
        if wrap[i]:
            st[0][links[i]] = -st[0][links[i]]


@njit(cache=True)
def _toggles_reversible(st, links, t, ins, delta, beta):
    # where an event was removed, the reverse move must find none left to remove
    for i in range(links.shape[0]):
        if not ins[i] and _nearest_link_event(st, links[i], t, beta, delta) >= 0.0:
            return False
    return True


@njit(cache=True)
def toggle_insert(st, tp, o, t, v, u):
    """Add an event of object ``o`` at ``t`` and toggle a single-link event on each of its links.

    On every link of ``o`` the single-link event nearest to ``t`` within
    ``delta`` is removed; a link without one gets a new event at
    ``t + delta * (2 v - 1)``. Split and merge are the cases where all links
    insert or all remove; mixed cases move a single-link excitation across a
    four-body object. The reverse is :func:`toggle_remove`.
    """
    off_links, beta, delta = tp[1], tp[7], tp[9]
    if tp[6] == 0.0 or tp[5] == 0.0:
        return 0, 0.0
    links = off_links[o].copy()
    nl = links.shape[0]
    if st[5][o] + 1 > st[4].shape[1]:
        return NEED_GROW, 0.0
    for l in links:
        if not _room(st, l, 2):
            return NEED_GROW, 0.0
        if _taken(st, l, t):
            return 0, 0.0
    new_t = np.empty(nl)
    ins = np.empty(nl, dtype=np.bool_)
    wrap = np.empty(nl, dtype=np.bool_)
    if not _plan_toggles(st, links, t, v, delta, beta, new_t, ins, wrap):
        return 0, 0.0
    s0 = local_action(st, tp, links, nl, False)
    _apply_toggles(st, links, new_t, ins, wrap, False)
    _add_object_event(st, off_links, o, t)
    ratio = 0.0
    if _toggles_reversible(st, links, t, ins, delta, beta):
        s1 = local_action(st, tp, links, nl, False)
        dn = 2 * int(ins.sum()) - nl
        ratio = tp[5] * (tp[6] * 2.0 * delta) ** dn * math.exp(-(s1 - s0)) * beta / st[5][o]
        if u < ratio:
            return 1, ratio
    _drop_object_event(st, off_links, o, t)
    _apply_toggles(st, links, new_t, ins, wrap, True)
    return 0, ratio


@njit(cache=True)
def toggle_remove(st, tp, o, pick, v, u):
    """Inverse of :func:`toggle_insert` for a uniformly chosen event of ``o``."""
    off_links, beta, delta = tp[1], tp[7], tp[9]
    if tp[6] == 0.0 or tp[5] == 0.0:
        return 0, 0.0
    k_o = st[5][o]
    if k_o == 0:
        return 0, 0.0
    links = off_links[o].copy()
    nl = links.shape[0]
    for l in links:
        if not _room(st, l, 1):
            return NEED_GROW, 0.0
    t = st[4][o, min(int(pick * k_o), k_o - 1)]
    new_t = np.empty(nl)
    ins = np.empty(nl, dtype=np.bool_)
    wrap = np.empty(nl, dtype=np.bool_)
    if not _plan_toggles(st, links, t, v, delta, beta, new_t, ins, wrap):
        return 0, 0.0
    s0 = local_action(st, tp, links, nl, False)
    _drop_object_event(st, off_links, o, t)
    _apply_toggles(st, links, new_t, ins, wrap, False)
    ratio = 0.0
    if _toggles_reversible(st, links, t, ins, delta, beta):
        s1 = local_action(st, tp, links, nl, False)
        dn = 2 * int(ins.sum()) - nl
        ratio = (tp[6] * 2.0 * delta) ** dn / tp[5] * math.exp(-(s1 - s0)) * k_o / beta
        if u < ratio:
            return 1, ratio
    _apply_toggles(st, links, new_t, ins, wrap, True)
    _add_object_event(st, off_links, o, t)
    return 0, ratio


@njit(cache=True)
def global_insert(st, tp, times, u):
    """Add one event on every off-diagonal object, object ``o`` at ``times[o]``."""
    off_links, o4, beta = tp[1], tp[5], tp[7]
    n_obj = off_links.shape[0]
    if o4 == 0.0:
        return 0, 0.0
    for o in range(n_obj):
        if st[5][o] + 1 > st[4].shape[1]:
            return NEED_GROW, 0.0
        for l in off_links[o]:
            if not _room(st, l, 2):
                return NEED_GROW, 0.0
            if _taken(st, l, times[o]):
                return 0, 0.0
    for o in range(n_obj):
        for p in range(o):
            if times[p] == times[o]:
                return 0, 0.0
    s0 = full_action(st, tp)
    for o in range(n_obj):
        _add_object_event(st, off_links, o, times[o])
    s1 = full_action(st, tp)
    log_ratio = n_obj * math.log(o4 * beta) - (s1 - s0) - np.sum(np.log(st[5].astype(np.float64)))
    ratio = math.exp(min(log_ratio, 700.0))
    if u < ratio:
        return 1, ratio
    for o in range(n_obj):
        _drop_object_event(st, off_links, o, times[o])
    return 0, ratio


@njit(cache=True)
def global_remove(st, tp, picks, u):
    """Remove one uniformly chosen event from every off-diagonal object."""
    off_links, o4, beta = tp[1], tp[5], tp[7]
    n_obj = off_links.shape[0]
    if o4 == 0.0:
        return 0, 0.0
    times = np.empty(n_obj)
    for o in range(n_obj):
        k = st[5][o]
        if k == 0:
            return 0, 0.0
        times[o] = st[4][o, min(int(picks[o] * k), k - 1)]
    log_k = np.sum(np.log(st[5].astype(np.float64)))
    s0 = full_action(st, tp)
    for o in range(n_obj):
        _drop_object_event(st, off_links, o, times[o])
    s1 = full_action(st, tp)
    log_ratio = log_k - n_obj * math.log(o4 * beta) - (s1 - s0)
    ratio = math.exp(min(log_ratio, 700.0))
    if u < ratio:
        return 1, ratio
    for o in range(n_obj):
        _add_object_event(st, off_links, o, times[o])
    return 0, ratio


@njit(cache=True)
def _grow(st):
    spins, ltime, lkind, lcount, otime, ocount = st
    cap = ltime.shape[1]
    nl = np.zeros((ltime.shape[0], 2 * cap))
    nk = np.zeros((ltime.shape[0], 2 * cap), dtype=np.int64)
    no = np.zeros((otime.shape[0], 2 * cap))
    nl[:, :cap] = ltime
    nk[:, :cap] = lkind
    no[:, :cap] = otime
    return (spins, nl, nk, lcount, no, ocount)


@njit(cache=True)
def _tally(counters, row, code):
    counters[row, 0] += 1
    if code == 1:
        counters[row, 1] += 1


LOOP_REPS = 8  # loop shift / loop pair attempts per loop and sweep
WIDE_DELTA_FACTOR = 3.0


@njit(cache=True)
def sweeps(st, tp, tp_wide, n_sweeps, use_global, loops, counters):
    """Run ``n_sweeps`` sweeps; returns the (possibly reallocated) state tuple.

    One sweep is, in order: ``n_links`` link-pair updates, ``n_obj`` four-body
    pair updates, ``n_obj`` split/merge and ``n_obj`` toggle updates with each of
    ``tp`` and ``tp_wide`` (same model, wider ``delta``), one time shift per event
    incidence present at the start of the block, ``n_links`` segment flips,
    one global update if enabled, one winding flip per loop in ``loops``, then
    ``LOOP_REPS`` rounds of one loop shift and one loop pair update per loop.
    """
    off_links, o4, o1, beta, window = tp[1], tp[5], tp[6], tp[7], tp[8]
    n_links = st[0].shape[0]
    n_obj = off_links.shape[0]
    width = off_links.shape[1]
    v = np.empty(width)
    for _ in range(n_sweeps):
        if o1 != 0.0:
            for _ in range(n_links):
                l = np.random.randint(0, n_links)
                if np.random.random() < 0.5:
                    t1, d, u = np.random.random() * beta, np.random.random() * window, np.random.random()
                    code, _ = pair_insert(st, tp, False, l, t1, d, u)
                    while code == NEED_GROW:
                        st = _grow(st)
                        code, _ = pair_insert(st, tp, False, l, t1, d, u)
                else:
                    code, _ = pair_remove(st, tp, False, l, np.random.random(), np.random.random())
                _tally(counters, U_LINK_PAIR, code)
        if o4 != 0.0:
            for _ in range(n_obj):
                o = np.random.randint(0, n_obj)
                if np.random.random() < 0.5:
                    t1, d, u = np.random.random() * beta, np.random.random() * window, np.random.random()
                    code, _ = pair_insert(st, tp, True, o, t1, d, u)
                    while code == NEED_GROW:
                        st = _grow(st)
                        code, _ = pair_insert(st, tp, True, o, t1, d, u)
                else:
                    code, _ = pair_remove(st, tp, True, o, np.random.random(), np.random.random())
                _tally(counters, U_OBJ_PAIR, code)
        if o4 != 0.0 and o1 != 0.0:
            for k in range(2 * n_obj):
                tq = tp if k < n_obj else tp_wide
                o = np.random.randint(0, n_obj)
                if np.random.random() < 0.5:
                    pick = np.random.random()
                    for i in range(width):
                        v[i] = np.random.random()
                    code, _ = split(st, tq, o, pick, v, np.random.random())
                else:
                    for i in range(width):
                        v[i] = np.random.random()
                    w, u = np.random.random(), np.random.random()
                    code, _ = merge(st, tq, o, v, w, u)
                    while code == NEED_GROW:
                        st = _grow(st)
                        code, _ = merge(st, tq, o, v, w, u)
                _tally(counters, U_SPLIT, code)
            for k in range(2 * n_obj):
                tq = tp if k < n_obj else tp_wide
                o = np.random.randint(0, n_obj)
                for i in range(width):
                    v[i] = np.random.random()
                if np.random.random() < 0.5:
                    t, u = np.random.random() * beta, np.random.random()
                    code, _ = toggle_insert(st, tq, o, t, v, u)
                    while code == NEED_GROW:
                        st = _grow(st)
                        code, _ = toggle_insert(st, tq, o, t, v, u)
                else:
                    pick, u = np.random.random(), np.random.random()
                    code, _ = toggle_remove(st, tq, o, pick, v, u)
                    while code == NEED_GROW:
                        st = _grow(st)
                        code, _ = toggle_remove(st, tq, o, pick, v, u)
                _tally(counters, U_TOGGLE, code)
        n_shift = st[3].sum()
        for _ in range(n_shift):
            l = np.random.randint(0, n_links)
            code, _ = time_shift(st, tp, l, np.random.random(), np.random.random(), np.random.random())
            _tally(counters, U_SHIFT, code)
        for _ in range(n_links):
            code, _ = segment_flip(st, tp, np.random.randint(0, n_links), np.random.random())
            _tally(counters, U_SEGMENT, code)
        if use_global and o4 != 0.0:
            if np.random.random() < 0.5:
                times = np.random.random(n_obj) * beta
                u = np.random.random()
                code, _ = global_insert(st, tp, times, u)
                while code == NEED_GROW:
                    st = _grow(st)
                    code, _ = global_insert(st, tp, times, u)
            else:
                code, _ = global_remove(st, tp, np.random.random(n_obj), np.random.random())
            _tally(counters, U_GLOBAL, code)
        for i in range(loops.shape[0]):
            code, _ = winding_flip(st, tp, loops[i], np.random.random())
            _tally(counters, U_WINDING, code)
        if o1 != 0.0:
            for _ in range(LOOP_REPS):
                for i in range(loops.shape[0]):
                    code, _ = loop_shift(st, tp, loops[i], np.random.random(), np.random.random(),
                                         np.random.random(), np.random.random())
                    _tally(counters, U_LOOP_SHIFT, code)
                for i in range(loops.shape[0]):
                    if np.random.random() < 0.5:
                        t1, d = np.random.random() * beta, np.random.random() * beta
                        x = np.random.random(2 * loops.shape[1])
                        u = np.random.random()
                        code, _ = loop_pair_insert(st, tp, loops[i], t1, d, x, u)
                        while code == NEED_GROW:
                            st = _grow(st)
                            code, _ = loop_pair_insert(st, tp, loops[i], t1, d, x, u)
                    else:
                        code, _ = loop_pair_remove(st, tp, loops[i], np.random.random(), np.random.random())
                    _tally(counters, U_LOOP_PAIR, code)
    return st


@njit(cache=True)
def _uniform():
    return np.random.random()


@njit(cache=True)
def _measure_integrals(st, tp, n_diag):
    """Time-integrated single-link spins (sum) and per-object diagonal products (sum)."""
    diag_links, beta, buf = tp[0], tp[7], tp[10]
    link_sum = 0.0
    for l in range(st[0].shape[0]):
        link_sum += _link_integral(st, l, beta)
    obj_sum = 0.0
    for o in range(n_diag):
        obj_sum += _object_integral(st, diag_links[o], beta, buf)
    return link_sum, obj_sum


# ---------------------------------------------------------------------------
# Python-facing API


def model_tuple(wl: WorldlineConfig, p: QmcParams):
    d4, d1, o4, o1 = p.couplings
    delta = min(p.delta, 0.24 * p.beta)
    window = min(p.window, p.beta)
    buf = np.empty(wl.diag_links.shape[1] * wl.ltime.shape[1])
    return (wl.diag_links, wl.off_links, wl.link_diag, float(d4), float(d1), float(o4), float(o1),
            float(p.beta), float(window), float(delta), buf)


def _widened(tp):
    # second split/merge window for events spread wider than delta
    return tp[:9] + (max(tp[9], min(WIDE_DELTA_FACTOR * tp[9], 0.24 * tp[7])),) + tp[10:]


def qmc_weight(wl: WorldlineConfig, p: QmcParams) -> float:
    """Log-weight of a worldline; ``-inf`` when an event uses a zero coupling."""
    periodic = bool(np.all(wl.lcount % 2 == 0))
    if not periodic:
        raise ValueError("worldline is not periodic in imaginary time")
    _, _, o4, o1 = p.couplings
    n4, n1 = wl.n_fourbody_events, wl.n_link_events
    if (n4 and o4 == 0) or (n1 and o1 == 0):
        return float("-inf")
    logw = -full_action(wl.state, model_tuple(wl, p))
    if n4:
        logw += n4 * math.log(o4)
    if n1:
        logw += n1 * math.log(o1)
    return float(logw)


def _run_kernel(wl, p, fn, *args):
    while True:
        code, ratio = fn(wl.state, model_tuple(wl, p), *args)
        if code != NEED_GROW:
            return bool(code == 1), float(ratio)
        wl.grow()


def update_pair_link(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    l = int(rng.integers(wl.topo.link_count))
    window = min(p.window, p.beta)
    if rng.random() < 0.5:
        return _run_kernel(wl, p, pair_insert, False, l, rng.random() * p.beta,
                           rng.random() * window, rng.random())[0]
    return _run_kernel(wl, p, pair_remove, False, l, rng.random(), rng.random())[0]


def update_pair_fourbody(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    o = int(rng.integers(len(wl.ocount)))
    window = min(p.window, p.beta)
    if rng.random() < 0.5:
        return _run_kernel(wl, p, pair_insert, True, o, rng.random() * p.beta,
                           rng.random() * window, rng.random())[0]
    return _run_kernel(wl, p, pair_remove, True, o, rng.random(), rng.random())[0]


def update_timeshift(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    l = int(rng.integers(wl.topo.link_count))
    return _run_kernel(wl, p, time_shift, l, rng.random(), rng.random(), rng.random())[0]


def update_spin_segment(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator,
                        link: int | None = None) -> bool:
    l = int(rng.integers(wl.topo.link_count)) if link is None else int(link)
    return _run_kernel(wl, p, segment_flip, l, rng.random())[0]


def update_split_merge(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    o = int(rng.integers(len(wl.ocount)))
    width = wl.off_links.shape[1]
    if rng.random() < 0.5:
        return _run_kernel(wl, p, split, o, rng.random(), rng.random(width), rng.random())[0]
    return _run_kernel(wl, p, merge, o, rng.random(width), rng.random(), rng.random())[0]


def update_toggle(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    o = int(rng.integers(len(wl.ocount)))
    v = rng.random(wl.off_links.shape[1])
    if rng.random() < 0.5:
        return _run_kernel(wl, p, toggle_insert, o, rng.random() * p.beta, v, rng.random())[0]
    return _run_kernel(wl, p, toggle_remove, o, rng.random(), v, rng.random())[0]


def update_global(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator) -> bool:
    n = len(wl.ocount)
    if rng.random() < 0.5:
        return _run_kernel(wl, p, global_insert, rng.random(n) * p.beta, rng.random())[0]
    return _run_kernel(wl, p, global_remove, rng.random(n), rng.random())[0]


def update_winding(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator,
                   loop: int | None = None) -> bool:
    loops = winding_loops(wl.topo, wl.basis)
    i = int(rng.integers(len(loops))) if loop is None else int(loop)
    return _run_kernel(wl, p, winding_flip, loops[i], rng.random())[0]


def update_loop_shift(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator,
                      loop: int | None = None) -> bool:
    loops = winding_loops(wl.topo, wl.basis)
    i = int(rng.integers(len(loops))) if loop is None else int(loop)
    return _run_kernel(wl, p, loop_shift, loops[i], rng.random(), rng.random(), rng.random(),
                       rng.random())[0]


def update_loop_pair(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator,
                     loop: int | None = None) -> bool:
    loops = winding_loops(wl.topo, wl.basis)
    i = int(rng.integers(len(loops))) if loop is None else int(loop)
    if rng.random() < 0.5:
        return _run_kernel(wl, p, loop_pair_insert, loops[i], rng.random() * p.beta,
                           rng.random() * p.beta, rng.random(2 * loops.shape[1]), rng.random())[0]
    return _run_kernel(wl, p, loop_pair_remove, loops[i], rng.random(), rng.random())[0]


def sample_slice(wl: WorldlineConfig, p: QmcParams, rng: np.random.Generator | None = None,
                 t: float | None = None) -> GaugeConfig:
    """Equal-time spin state at ``t`` (uniform in [0, beta) when not given)."""
    if t is None:
        t = (rng.random() if rng is not None else _uniform()) * wl.beta
    basis = Basis.X if wl.basis is QmcBasis.X else Basis.Z
    return GaugeConfig.from_tau(wl.topo, wl.spins_at(t), basis)


def estimators(wl: WorldlineConfig, p: QmcParams) -> dict:
    """Energy, mean tau^x, star and plaquette expectations from one worldline."""
    tp = model_tuple(wl, p)
    d4, d1, o4, o1 = p.couplings
    beta = p.beta
    n_links = wl.topo.link_count
    n_diag = len(wl.diag_links)
    n_off = len(wl.off_links)
    link_sum, obj_sum = _measure_integrals(wl.state, tp, n_diag)
    n1, n4 = wl.n_link_events, wl.n_fourbody_events
    energy = -(d4 * obj_sum + d1 * link_sum) / beta - (n1 + n4) / beta
    diag_link = link_sum / (beta * n_links)
    diag_obj = obj_sum / (beta * n_diag)
    # off-diagonal terms: <O> = <n_O> / (beta * coupling); with zero coupling a
    # lone flip can never close, so the expectation vanishes
    off_link = n1 / (beta * o1 * n_links) if o1 > 0 else 0.0
    off_obj = n4 / (beta * o4 * n_off) if o4 > 0 else float("nan")
    if wl.basis is QmcBasis.X:
        return {"energy": energy, "tau_x": diag_link, "tau_z": off_link,
                "star": diag_obj, "plaquette": off_obj}
    return {"energy": energy, "tau_x": off_link, "tau_z": diag_link,
            "star": off_obj, "plaquette": diag_obj}


def fm_contour(topo: LatticeTopology) -> tuple[np.ndarray, np.ndarray]:
    """Square loop of side ``max(1, L // 4)`` at the origin and its first half."""
    a = max(1, topo.linear_size // 4)
    loop = []
    loop += [topo.link_index(topo.site_index(x, 0), 0) for x in range(a)]
    loop += [topo.link_index(topo.site_index(a, y), 1) for y in range(a)]
    loop += [topo.link_index(topo.site_index(x, a), 0) for x in range(a - 1, -1, -1)]
    loop += [topo.link_index(topo.site_index(0, y), 1) for y in range(a - 1, -1, -1)]
    loop = np.array(loop, dtype=np.int64)
    return loop, loop[: len(loop) // 2]


QMC_COLUMNS = ("energy", "tau_x", "tau_z", "star", "plaquette", "n_link_events",
               "n_fourbody_events")
X_COLUMNS = ("percolates", "strength", "largest_cluster", "total_strings", "matter_density")
Z_COLUMNS = ("loop_full", "loop_half")


def run_qmc(p: QmcParams) -> ObservableSeries:
    topo = build_lattice(2, p.L)
    rng = np.random.default_rng(p.seed)
    _seed(int(rng.integers(2**31 - 1)))
    wl = WorldlineConfig.empty(topo, p.basis, p.beta)
    use_global = p.global_updates if p.global_updates is not None else len(wl.ocount) <= 16
    loops = winding_loops(topo, p.basis) if p.winding_updates else np.zeros((0, p.L), dtype=np.int64)
    counters = np.zeros((len(UPDATE_NAMES), 2), dtype=np.int64)

    def advance(n):
        if n == 0:
            return
        tp = model_tuple(wl, p)
        st = sweeps(wl.state, tp, _widened(tp), n, use_global, loops, counters)
        wl.state = st
        if p.debug:
            wl.check()

    t0 = time.perf_counter()
    advance(p.thermalization)
    n = p.n_samples
    extra = X_COLUMNS if p.basis is QmcBasis.X else Z_COLUMNS
    cols = {k: np.zeros(n) for k in QMC_COLUMNS + extra}
    if p.basis is QmcBasis.X:
        cols["percolates"] = np.zeros(n, dtype=bool)
    loop, half = fm_contour(topo)
    snaps = np.zeros((n, topo.link_count), dtype=np.uint8) if p.keep_snapshots else None
    for i in range(n):
        advance(p.sweeps_between)
        est = estimators(wl, p)
        for k, v in est.items():
            cols[k][i] = v
        cols["n_link_events"][i] = wl.n_link_events
        cols["n_fourbody_events"][i] = wl.n_fourbody_events
        cfg = sample_slice(wl, p)
        if p.basis is QmcBasis.X:
            wraps, largest, total = measure(cfg.strings, topo.star, topo.neighbors,
                                            topo.star_crossing, topo.link_ends, True)
            perc = bool(wraps.any())
            cols["percolates"][i] = perc
            cols["strength"][i] = largest / topo.link_count if perc else 0.0
            cols["largest_cluster"][i] = largest
            cols["total_strings"][i] = total
            cols["matter_density"][i] = occupation(cfg).sum() / topo.site_count
        else:
            tau = cfg.tau
            cols["loop_full"][i] = np.prod(tau[loop])
            cols["loop_half"][i] = np.prod(tau[half])
        if snaps is not None:
            snaps[i] = cfg.strings
    elapsed = time.perf_counter() - t0
    meta = {
        "params": p.to_dict(),
        "wall_time": elapsed,
        "acceptance": {name: float(counters[r, 1] / max(counters[r, 0], 1))
                       for r, name in enumerate(UPDATE_NAMES)},
        "proposals": counters.tolist(),
        "global_updates": bool(use_global),
        "basis": p.basis.name,
    }
    return ObservableSeries(cols, meta, snaps)
