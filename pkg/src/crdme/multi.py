"""
CRDME simulation of A + B -> C (or A + B -> 0) with arbitrary copy numbers.

Channels are grouped per voxel: one diffusion channel per voxel (all
species, all directions) and one reaction channel per voxel holding the
A molecules there, with rate ``lam * a_i * sum_j phi[j - i] b_j``. The
channel rates live in the leaves of a binary sum tree, giving O(log M)
updates and sampling. Within a chosen channel the species, direction or
reaction partner is picked by a second categorical draw.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import DIRECTIONS, LatticeSpec, hop_rate
from .parallel import map_replicates
from .stats import ReactionTimeSamples
from .streams import stream

__all__ = [
    "MultiConfig",
    "MultiState",
    "EventLog",
    "MultiResult",
    "PropensityIndexError",
    "reaction_propensity",
    "fire_reaction",
    "place_product",
    "simulate_multi",
    "run_multi_replicates",
    "EVENT_KINDS",
]

EVENT_KINDS = ("hop_A", "hop_B", "hop_C", "react")
AUDIT_INTERVAL = 1_000_000
AUDIT_RTOL = 1e-9

# kernel exit codes
_T_END, _EXHAUSTED, _AUDIT_FAIL, _LOG_FULL, _REACTION_LIMIT = range(5)


class PropensityIndexError(RuntimeError):
    """The incrementally maintained rates drifted from an exact recomputation."""


@dataclass(frozen=True)
class MultiConfig:
    """Parameters of a multiparticle run.

    Give either total counts (``n_A``, ``n_B``, ``n_C``; molecules placed
    independently and uniformly over voxels) or explicit ``initial``
    count fields ``(a, b, c)`` of shape ``(N, N)`` indexed ``[ix, iy]``.
    """

    D_A: float
    D_B: float
    D_C: float
    lattice: LatticeSpec
    lam: float
    rb: float
    product: str = "C"
    n_A: int = 0
    n_B: int = 0
    n_C: int = 0
    initial: tuple | None = None
    t_end: float = math.inf

    def __post_init__(self):
        if self.product not in ("C", "none"):
            raise ValueError(f"product must be 'C' or 'none', got {self.product!r}")
        if min(self.n_A, self.n_B, self.n_C) < 0:
            raise ValueError("counts must be nonnegative")
        if not self.rb > 0 or self.lam < 0:
            raise ValueError("need rb > 0 and lam >= 0")
        if self.initial is not None:
            N = self.lattice.N
            for f in self.initial:
                if np.shape(f) != (N, N) or np.min(f) < 0:
                    raise ValueError("initial fields must be nonnegative (N, N) arrays")

    @property
    def rho(self) -> float:
        return self.rb / self.lattice.h


@dataclass
class MultiState:
    """Per-voxel copy numbers, arrays indexed ``[ix, iy]``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t: float = 0.0

    def totals(self):
        return int(self.a.sum()), int(self.b.sum()), int(self.c.sum())

    def copy(self) -> "MultiState":
        return MultiState(self.a.copy(), self.b.copy(), self.c.copy(), self.t)

    def to_csv(self, path) -> None:
        N = self.a.shape[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ix", "iy", "a", "b", "c"])
            for iy in range(N):
                for ix in range(N):
                    w.writerow([ix, iy, self.a[ix, iy], self.b[ix, iy], self.c[ix, iy]])


@dataclass
class EventLog:
    t: np.ndarray
    kind: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    def __len__(self):
        return len(self.t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "kind", "src_ix", "src_iy", "dst_ix", "dst_iy"])
            for t, k, s, d in zip(self.t, self.kind, self.src, self.dst):
                w.writerow([f"{t:.16e}", EVENT_KINDS[k], s[0], s[1], d[0], d[1]])


@dataclass
class MultiResult:
    log: EventLog | None
    state: MultiState
    n_events: int
    n_reactions: int
    stopped: str


def reaction_propensity(i, j, state: MultiState, table, lam: float) -> float:
    """``lam * phi[j - i] * a_i * b_j`` for an A in voxel ``i`` and a B in ``j``."""
    return lam * table[(j[0] - i[0], j[1] - i[1])] * float(state.a[i[0], i[1]]) * float(state.b[j[0], j[1]])


def place_product(i, r, N: int):
    """Voxel ``i + r``, clamped onto the lattice."""
    return (min(max(i[0] + r[0], 0), N - 1), min(max(i[1] + r[1], 0), N - 1))


def fire_reaction(i, j, state: MultiState, gamma, rng: np.random.Generator,
                  product: str = "C") -> MultiState:
    """Consume an A at ``i`` and a B at ``j``; optionally create a C.

    The C offset ``r`` (relative to ``i``) is drawn from ``gamma[j - i]``;
    a product voxel outside the lattice is clamped to the nearest
    in-domain voxel.
    """
    if state.a[i[0], i[1]] < 1 or state.b[j[0], j[1]] < 1:
        raise ValueError(f"no A at {tuple(i)} or no B at {tuple(j)}")
    new = state.copy()
    new.a[i[0], i[1]] -= 1
    new.b[j[0], j[1]] -= 1
    if product == "C":
        row = gamma.row((j[0] - i[0], j[1] - i[1]))
        if not row:
            raise ValueError(f"no placement distribution for offset {(j[0] - i[0], j[1] - i[1])}")
        offsets = sorted(row)
        cum = np.cumsum([row[r] for r in offsets])
        e = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        r = offsets[min(e, len(offsets) - 1)]
        k = place_product(i, r, new.a.shape[0])
        new.c[k[0], k[1]] += 1
    return new


# ---------------------------------------------------------------- kernel --

@njit(cache=True)
def _tree_set(tree, P, leaf, val):
    i = P + leaf
    tree[i] = val
    i //= 2
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i //= 2


@njit(cache=True)
def _tree_find(tree, P, u):
    i = 1
    while i < P:
        left = tree[2 * i]
        if u < left:
            i = 2 * i
        else:
            u -= left
            i = 2 * i + 1
    return i - P


@njit(cache=True)
def _n_moves_flat(v, N):
    ix = v % N
    iy = v // N
    return (ix > 0) + (ix < N - 1) + (iy > 0) + (iy < N - 1)


@njit(cache=True)
def _hop_leaf(v, N, a, b, c, hA, hB, hC):
    return _n_moves_flat(v, N) * (hA * a[v] + hB * b[v] + hC * c[v])


@njit(cache=True)
def _shift_b(j, delta, N, offx, offy, offphi, S, cnt, a, lam, tree, P, V):
    # B count at voxel j changed by delta: refresh neighborhood sums
    jx = j % N
    jy = j // N
    for q in range(offx.shape[0]):
        vx = jx - offx[q]
        vy = jy - offy[q]
        if 0 <= vx < N and 0 <= vy < N:
            v = vx + N * vy
            cnt[v] += delta
            if cnt[v] == 0:
                S[v] = 0.0
            else:
                S[v] += delta * offphi[q]
            if a[v] > 0:
                _tree_set(tree, P, V + v, lam * a[v] * S[v])


@njit(cache=True)
def _exact_S(N, offx, offy, offphi, b, S, cnt):
    V = N * N
    for v in range(V):
        vx = v % N
        vy = v // N
        s = 0.0
        k = 0
        for q in range(offx.shape[0]):
            jx = vx + offx[q]
            jy = vy + offy[q]
            if 0 <= jx < N and 0 <= jy < N:
                bj = b[jx + N * jy]
                if bj > 0:
                    s += offphi[q] * bj
                    k += bj
        S[v] = s
        cnt[v] = k


@njit(cache=True)
def _rebuild(N, a, b, c, hA, hB, hC, lam, S, tree, P):
    V = N * N
    tree[:] = 0.0
    for v in range(V):
        tree[P + v] = _hop_leaf(v, N, a, b, c, hA, hB, hC)
        tree[P + V + v] = lam * a[v] * S[v]
    for i in range(P - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]


@njit(cache=True)
def _audit(N, a, b, c, hA, hB, hC, lam, offx, offy, offphi, S, cnt, tree, P):
    S2 = np.empty_like(S)
    cnt2 = np.empty_like(cnt)
    _exact_S(N, offx, offy, offphi, b, S2, cnt2)
    V = N * N
    exact = 0.0
    for v in range(V):
        exact += _hop_leaf(v, N, a, b, c, hA, hB, hC) + lam * a[v] * S2[v]
    ok = abs(tree[1] - exact) <= AUDIT_RTOL * max(abs(exact), 1e-300)
    S[:] = S2
    cnt[:] = cnt2
    _rebuild(N, a, b, c, hA, hB, hC, lam, S, tree, P)
    return ok


@njit(cache=True)
def _run(N, hA, hB, hC, lam, offx, offy, offphi, C, g_n, g_rx, g_ry, g_cum, product,
         a, b, c, S, cnt, tree, P, totals, t, t_end, stop_reactions, n_react,
         n_events, audit_every, log_t, log_kind, log_src, log_dst, n_log, record, rng):
    V = N * N
    while True:
        # without a finite end time, stop once no reaction can ever fire
        if t_end == np.inf and (totals[0] == 0 or totals[1] == 0 or lam == 0.0):
            return _EXHAUSTED, t, n_react, n_events, n_log
        total = tree[1]
        if total <= 0.0:
            return _EXHAUSTED, t, n_react, n_events, n_log
        if record == 1 and n_log >= log_t.shape[0]:
            return _LOG_FULL, t, n_react, n_events, n_log
        dt = rng.standard_exponential() / total
        if t + dt >= t_end:
            return _T_END, t_end, n_react, n_events, n_log
        t += dt
        leaf = -1
        while leaf < 0:
            leaf = _tree_find(tree, P, rng.random() * total)
            if leaf >= 2 * V or tree[P + leaf] <= 0.0:
                leaf = -1
        n_events += 1
        if leaf < V:
            v = leaf
            w = rng.random() * (hA * a[v] + hB * b[v] + hC * c[v])
            nm = _n_moves_flat(v, N)
            k = min(int(rng.random() * nm), nm - 1)
            vx = v % N
            vy = v // N
            dst = v
            for d in range(4):
                nx = vx + (d == 1) - (d == 0)
                ny = vy + (d == 3) - (d == 2)
                if 0 <= nx < N and 0 <= ny < N:
                    if k == 0:
                        dst = nx + N * ny
                        break
                    k -= 1
            if w < hA * a[v]:
                kind = 0
                a[v] -= 1
                a[dst] += 1
                _tree_set(tree, P, V + v, lam * a[v] * S[v])
                _tree_set(tree, P, V + dst, lam * a[dst] * S[dst])
            elif w < hA * a[v] + hB * b[v]:
                kind = 1
                b[v] -= 1
                b[dst] += 1
                _shift_b(v, -1, N, offx, offy, offphi, S, cnt, a, lam, tree, P, V)
                _shift_b(dst, 1, N, offx, offy, offphi, S, cnt, a, lam, tree, P, V)
            else:
                kind = 2
                c[v] -= 1
                c[dst] += 1
            _tree_set(tree, P, v, _hop_leaf(v, N, a, b, c, hA, hB, hC))
            _tree_set(tree, P, dst, _hop_leaf(dst, N, a, b, c, hA, hB, hC))
            src = v
        else:
            v = leaf - V
            vx = v % N
            vy = v // N
            # partner voxel j with probability phi[j - v] b_j / S_v
            target = rng.random() * S[v]
            j = -1
            acc = 0.0
            last = -1
            for q in range(offx.shape[0]):
                jx = vx + offx[q]
                jy = vy + offy[q]
                if 0 <= jx < N and 0 <= jy < N:
                    bj = b[jx + N * jy]
                    if bj > 0:
                        last = jx + N * jy
                        acc += offphi[q] * bj
                        if target < acc:
                            j = last
                            break
            if j < 0:
                j = last
            if j < 0:
                # rounding residue in S[v]; repair and redraw
                S[v] = 0.0
                cnt[v] = 0
                _tree_set(tree, P, V + v, 0.0)
                n_events -= 1
                continue
            kind = 3
            a[v] -= 1
            b[j] -= 1
            totals[0] -= 1
            totals[1] -= 1
            _tree_set(tree, P, V + v, lam * a[v] * S[v])
            _shift_b(j, -1, N, offx, offy, offphi, S, cnt, a, lam, tree, P, V)
            _tree_set(tree, P, v, _hop_leaf(v, N, a, b, c, hA, hB, hC))
            _tree_set(tree, P, j, _hop_leaf(j, N, a, b, c, hA, hB, hC))
            if product == 1:
                dx = j % N - vx + C
                dy = j // N - vy + C
                u = rng.random()
                e = 0
                while e < g_n[dx, dy] - 1 and u >= g_cum[dx, dy, e]:
                    e += 1
                kx = min(max(vx + g_rx[dx, dy, e], 0), N - 1)
                ky = min(max(vy + g_ry[dx, dy, e], 0), N - 1)
                kk = kx + N * ky
                c[kk] += 1
                totals[2] += 1
                _tree_set(tree, P, kk, _hop_leaf(kk, N, a, b, c, hA, hB, hC))
            src = v
            dst = j
            n_react += 1
        if record == 1:
            log_t[n_log] = t
            log_kind[n_log] = kind
            log_src[n_log] = src
            log_dst[n_log] = dst
            n_log += 1
        if n_events % audit_every == 0:
            if not _audit(N, a, b, c, hA, hB, hC, lam, offx, offy, offphi, S, cnt, tree, P):
                return _AUDIT_FAIL, t, n_react, n_events, n_log
        if kind == 3 and n_react >= stop_reactions:
            return _REACTION_LIMIT, t, n_react, n_events, n_log


def _gamma_arrays(gamma, C):
    size = 2 * C + 1
    g_n = np.zeros((size, size), dtype=np.int64)
    g_rx = np.zeros((size, size, 4), dtype=np.int64)
    g_ry = np.zeros((size, size, 4), dtype=np.int64)
    g_cum = np.ones((size, size, 4))
    if gamma is None:
        return g_n, g_rx, g_ry, g_cum
    for d, row in gamma.entries.items():
        if abs(d[0]) > C or abs(d[1]) > C:
            continue
        items = sorted(row.items())
        if len(items) > 4:
            raise ValueError("placement rows longer than 4 are not supported")
        acc = 0.0
        dx, dy = d[0] + C, d[1] + C
        g_n[dx, dy] = len(items)
        for e, (r, p) in enumerate(items):
            acc += p
            g_rx[dx, dy, e] = r[0]
            g_ry[dx, dy, e] = r[1]
            g_cum[dx, dy, e] = acc
        g_cum[dx, dy, len(items) - 1] = 1.0
    return g_n, g_rx, g_ry, g_cum


def _initial_state(cfg: MultiConfig, rng) -> MultiState:
    N = cfg.lattice.N
    if cfg.initial is not None:
        a, b, c = (np.array(f, dtype=np.int64) for f in cfg.initial)
        return MultiState(a, b, c)
    fields = []
    for n in (cfg.n_A, cfg.n_B, cfg.n_C):
        f = np.zeros((N, N), dtype=np.int64)
        for _ in range(n):
            ix = min(int(rng.random() * N), N - 1)
            iy = min(int(rng.random() * N), N - 1)
            f[ix, iy] += 1
        fields.append(f)
    return MultiState(*fields)


class _Prepared:
    """Table-derived kernel inputs, reusable across replicates."""

    def __init__(self, cfg: MultiConfig, phi_table, gamma_table):
        if not math.isclose(phi_table.rho, cfg.rho, rel_tol=1e-9):
            raise ValueError(f"phi table built for rho={phi_table.rho}, config has rho={cfg.rho}")
        if cfg.product == "C" and gamma_table is None:
            raise ValueError("product placement needs a gamma table")
        C = phi_table.cutoff
        sup = phi_table.support()
        self.offx = np.array([m[0] for m in sup], dtype=np.int64)
        self.offy = np.array([m[1] for m in sup], dtype=np.int64)
        self.offphi = np.array([phi_table[m] for m in sup])
        self.C = C
        self.gamma = _gamma_arrays(gamma_table if cfg.product == "C" else None, C)
        lat = cfg.lattice
        self.rates = (hop_rate(cfg.D_A, lat), hop_rate(cfg.D_B, lat), hop_rate(cfg.D_C, lat))
        self.cfg = cfg


def _simulate(prep: _Prepared, rng, record_log: bool, stop_after_reactions, log_capacity=4096):
    cfg = prep.cfg
    N = cfg.lattice.N
    V = N * N
    st = _initial_state(cfg, rng)
    a = st.a.ravel(order="F").copy()
    b = st.b.ravel(order="F").copy()
    c = st.c.ravel(order="F").copy()
    S = np.zeros(V)
    cnt = np.zeros(V, dtype=np.int64)
    _exact_S(N, prep.offx, prep.offy, prep.offphi, b, S, cnt)
    P = 1
    while P < 2 * V:
        P *= 2
    tree = np.zeros(2 * P)
    hA, hB, hC = prep.rates
    _rebuild(N, a, b, c, hA, hB, hC, cfg.lam, S, tree, P)
    totals = np.array([a.sum(), b.sum(), c.sum()], dtype=np.int64)
    cap = log_capacity if record_log else 0
    log_t = np.empty(cap)
    log_kind = np.empty(cap, dtype=np.int64)
    log_src = np.empty(cap, dtype=np.int64)
    log_dst = np.empty(cap, dtype=np.int64)
    stop = np.iinfo(np.int64).max if stop_after_reactions is None else int(stop_after_reactions)
    t, n_react, n_events, n_log = 0.0, 0, 0, 0
    g_n, g_rx, g_ry, g_cum = prep.gamma
    while True:
        code, t, n_react, n_events, n_log = _run(
            N, hA, hB, hC, float(cfg.lam), prep.offx, prep.offy, prep.offphi, prep.C,
            g_n, g_rx, g_ry, g_cum, 1 if cfg.product == "C" else 0,
            a, b, c, S, cnt, tree, P, totals, t, float(cfg.t_end), stop, n_react,
            n_events, AUDIT_INTERVAL, log_t, log_kind, log_src, log_dst, n_log,
            1 if record_log else 0, rng,
        )
        if code == _LOG_FULL:
            grow = len(log_t)
            log_t = np.concatenate([log_t, np.empty(grow)])
            log_kind = np.concatenate([log_kind, np.empty(grow, dtype=np.int64)])
            log_src = np.concatenate([log_src, np.empty(grow, dtype=np.int64)])
            log_dst = np.concatenate([log_dst, np.empty(grow, dtype=np.int64)])
            continue
        break
    if code == _AUDIT_FAIL:
        raise PropensityIndexError(
            f"total propensity drifted beyond relative {AUDIT_RTOL} after {n_events} events"
        )
    shape = (N, N)
    state = MultiState(a.reshape(shape, order="F"), b.reshape(shape, order="F"),
                       c.reshape(shape, order="F"), t)
    log = None
    if record_log:
        src = np.stack([log_src[:n_log] % N, log_src[:n_log] // N], axis=1)
        dst = np.stack([log_dst[:n_log] % N, log_dst[:n_log] // N], axis=1)
        log = EventLog(log_t[:n_log].copy(), log_kind[:n_log].copy(), src, dst)
    stopped = {_T_END: "t_end", _EXHAUSTED: "exhausted", _REACTION_LIMIT: "reaction_limit"}[code]
    return MultiResult(log, state, n_events, n_react, stopped)


def simulate_multi(cfg: MultiConfig, tables, master_seed: int = 0, rng=None,
                   record_log: bool = True, stop_after_reactions=None) -> MultiResult:
    """Run one exact SSA trajectory until ``t_end`` or until A or B is used up.

    ``tables`` is ``(phi_table, gamma_table)``; the gamma table may be
    ``None`` when ``cfg.product == "none"``. The event log lists hops as
    (source, destination) voxels and reactions as (A voxel, B voxel).
    """
    phi_table, gamma_table = tables
    prep = _Prepared(cfg, phi_table, gamma_table)
    if rng is None:
        rng = stream(master_seed)
    return _simulate(prep, rng, record_log, stop_after_reactions)


def _first_reaction_sampler(prep, rng):
    res = _simulate(prep, rng, False, 1)
    if res.n_reactions == 0:
        return (res.state.t if math.isfinite(res.state.t) else math.inf), True
    return res.state.t, False


def run_multi_replicates(cfg: MultiConfig, tables, R: int, master_seed: int,
                         workers: int = 1, metadata=None) -> ReactionTimeSamples:
    """Time of the first reaction in ``R`` independent trajectories.

    A trajectory that reaches ``t_end`` without reacting is censored.
    """
    prep = _Prepared(cfg, *tables)
    times, cens = map_replicates(_first_reaction_sampler, prep, R, master_seed, workers)
    meta = {"engine": "multi", "N": cfg.lattice.N, "rho": cfg.rho}
    meta.update(metadata or {})
    return ReactionTimeSamples(times, cens, master_seed=master_seed, metadata=meta)
