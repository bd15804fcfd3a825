"""Exact load planning under the lexicographic objective, plus a brute-force oracle.

Objective, in priority order: maximise the number of loaded containers,
minimise the total length of railcars used, maximise the total length of
loaded containers.

``solve_lpp`` splits the problem in two levels. The outer level walks over
railcar-usage vectors (how many railcars of each type are used; the first
ones of each type by index) in order of increasing used length. The inner
level is a branch-and-bound over per-platform loading patterns for a fixed
set of platforms. Its only container-level branching is the choice of bottom
container under each stacked pair. Every other occupied slot (bottom-only
slots and tops) admits a prefix of the weight-sorted containers of its
length, so whether those slots can be filled is decided exactly by Hall's
condition on nested prefixes.
"""

from __future__ import annotations

import itertools
from bisect import insort
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .fleet import (
    EMPTY,
    LENGTHS,
    ContainerLength,
    Fleet,
    LoadingPattern,
    PlatformType,
    enumerate_patterns,
    pattern_weight_feasible,
)
from .sampling import FullInstance, InstanceSketch

BOTTOM = "bottom"
TOP = "top"


class InvalidInstanceError(ValueError):
    pass


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class LexObjective:
    loaded_containers: int = 0
    used_railcar_length: int = 0
    loaded_container_length: int = 0

    def key(self) -> tuple[int, int, int]:
        """Larger is better, compared lexicographically."""
        return (self.loaded_containers, -self.used_railcar_length, self.loaded_container_length)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.loaded_containers, self.used_railcar_length, self.loaded_container_length)

    def scalarize(self, m: int) -> int:
        return m * m * self.loaded_containers - m * self.used_railcar_length + self.loaded_container_length


def scalarization_constant(sketch: InstanceSketch, fleet: Fleet) -> int:
    """M such that ``M^2*N - M*L + len`` orders solutions exactly like the lexicographic key.

    ``len`` spans at most ``53 * n``; ``M*L + len`` spans less than ``M^2``
    because ``M > L_total`` and ``M > 53 n``.
    """
    l_total = int(np.dot(sketch.railcar_counts, fleet.lengths_per_type))
    m = max(l_total, 53 * sketch.n_containers) + 1
    assert m * m > m * l_total + 53 * sketch.n_containers
    assert m > 53 * sketch.n_containers
    return m


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "exact"
    gap: float = 0.0
    tie_break: str = "canonical-v1"
    node_limit: Optional[int] = None

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "gap"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.gap < 0:
            raise ValueError("gap must be non-negative")
        if self.mode == "exact" and self.gap != 0:
            raise ValueError("exact mode has gap 0")
        if self.tie_break != "canonical-v1":
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")

    @classmethod
    def with_gap(cls, eps: float, node_limit: Optional[int] = None) -> "SolverConfig":
        return cls(mode="gap", gap=eps, node_limit=node_limit) if eps > 0 else cls(node_limit=node_limit)


@dataclass(frozen=True)
class RailcarRef:
    type_id: int
    index: int


@dataclass(frozen=True)
class Placement:
    container_id: int
    railcar: int
    platform: int
    slot: str


@dataclass(frozen=True)
class DetailedSolution:
    """Pattern per platform of every railcar in the instance plus container placements.

    ``railcars`` lists all railcars of the instance in canonical order (type
    id, then index); ``patterns[r][k]`` is the pattern on platform ``k`` of
    railcar ``r``.
    """

    railcars: tuple[RailcarRef, ...]
    patterns: tuple[tuple[LoadingPattern, ...], ...]
    placements: tuple[Placement, ...]
    objective: LexObjective
    optimal: bool = True
    nodes: int = field(default=0, compare=False)

    @property
    def used(self) -> tuple[bool, ...]:
        return tuple(any(p is not EMPTY and p.size > 0 for p in pats) for pats in self.patterns)

    @property
    def loaded_per_length(self) -> tuple[int, int]:
        n40 = sum(
            (p.bottom == ContainerLength.L40) + (p.top == ContainerLength.L40) for pats in self.patterns for p in pats
        )
        n53 = sum(p.n53 for pats in self.patterns for p in pats)
        return (n40, n53)

    def to_dict(self) -> dict:
        return {
            "railcars": [
                {"type": rc.type_id, "index": rc.index, "patterns": [str(p) for p in pats]}
                for rc, pats in zip(self.railcars, self.patterns)
            ],
            "placements": [
                {"container": p.container_id, "railcar": p.railcar, "platform": p.platform, "slot": p.slot}
                for p in self.placements
            ],
            "objective": list(self.objective.as_tuple()),
            "optimal": self.optimal,
        }


def instance_railcars(sketch: InstanceSketch) -> list[RailcarRef]:
    return [RailcarRef(j + 1, i) for j, n in enumerate(sketch.railcar_counts) for i in range(n)]


def _objective_from_patterns(patterns, railcars, fleet) -> LexObjective:
    n = sum(p.size for pats in patterns for p in pats)
    length = sum(
        (0 if p.bottom is None else int(p.bottom)) + (0 if p.top is None else int(p.top))
        for pats in patterns
        for p in pats
    )
    used_len = sum(
        fleet.type(rc.type_id).total_length for rc, pats in zip(railcars, patterns) if any(p.size for p in pats)
    )
    return LexObjective(n, used_len, length)


def _check_instance(instance: FullInstance, fleet: Fleet) -> None:
    try:
        instance.check(fleet)
    except ValueError as exc:
        raise InvalidInstanceError(str(exc)) from exc
    for w in instance.weights:
        if len(w) and not np.all(np.isfinite(w)):
            raise InvalidInstanceError("non-finite container weight")


# --- inner search -------------------------------------------------------------


class _Pools:
    """Containers of one instance sorted by (weight, id) within each length."""

    def __init__(self, instance: FullInstance):
        self.weights: list[list[float]] = []
        self.ids: list[list[int]] = []
        offset = 0
        for w in instance.weights:
            order = sorted(range(len(w)), key=lambda i: (float(w[i]), i))
            self.weights.append([float(w[i]) for i in order])
            self.ids.append([offset + i for i in order])
            offset += len(w)
        # rank of the first container of each identical-weight group, per rank
        self.group_start: list[list[int]] = []
        for ws in self.weights:
            gs = []
            for r, x in enumerate(ws):
                gs.append(r if r == 0 or ws[r - 1] != x else gs[-1])
            self.group_start.append(gs)
        self._fit: dict = {}

    def prefix_fit(self, platform: PlatformType, pattern: LoadingPattern, bottom_weight: Optional[float]) -> int:
        """Number of containers of the constrained slot's length that fit, as a
        prefix of the ascending order. Feasibility is monotone (upper bound) in
        the weight of the bottom-only container and of the top container."""
        key = (platform, pattern, bottom_weight)
        hit = self._fit.get(key)
        if hit is not None:
            return hit
        if pattern.top is None:
            ws = self.weights[LENGTHS.index(pattern.bottom)]

            def ok(x):
                return pattern_weight_feasible(pattern, x, 0.0, platform)
        else:
            ws = self.weights[LENGTHS.index(pattern.top)]

            def ok(x):
                return pattern_weight_feasible(pattern, bottom_weight, x, platform)

        lo, hi = 0, len(ws)
        while lo < hi:
            mid = (lo + hi) // 2
            if ok(ws[mid]):
                lo = mid + 1
            else:
                hi = mid
        self._fit[key] = lo
        return lo


@dataclass
class _InnerResult:
    n: int
    n53: int
    choices: list  # per platform: (pattern, bottom rank or -1)
    complete: bool


def _dfs_pattern_order(patterns: Sequence[LoadingPattern]) -> list[LoadingPattern]:
    # fullest first, 53 ft first; ties in canonical order
    return sorted(patterns, key=lambda p: (-p.size, -p.n53, patterns.index(p)))


@lru_cache(maxsize=256)
def _platform_options(platform: PlatformType) -> tuple[LoadingPattern, ...]:
    return tuple(_dfs_pattern_order(enumerate_patterns(platform)))


@lru_cache(maxsize=128)
def _suffix_bound(platforms: tuple[PlatformType, ...], n40: int, n53: int) -> list:
    """``[i][a][b]``: best packed (loaded, loaded 53) on platforms ``i:`` ignoring
    weights, with ``a`` 40 ft and ``b`` 53 ft containers available."""
    scale = n53 + 1
    cur = np.zeros((n40 + 1, n53 + 1), dtype=np.int64)
    out = [cur]
    for q in reversed(platforms):
        nxt = cur.copy()
        for p in _platform_options(q):
            a = (p.bottom == ContainerLength.L40) + (p.top == ContainerLength.L40)
            b = p.n53
            if p.size == 0 or a > n40 or b > n53:
                continue
            val = p.size * scale + b
            np.maximum(nxt[a:, b:], cur[: n40 + 1 - a, : n53 + 1 - b] + val, out=nxt[a:, b:])
        cur = nxt
        out.append(cur)
    return [t.tolist() for t in reversed(out)]


class _Budget:
    def __init__(self, limit: Optional[int]):
        self.limit = limit
        self.nodes = 0
        self.exhausted = False
        self.inexact = False
        self.milp_calls = 0


def _inner_dfs(
    platforms: Sequence[PlatformType],
    pools: _Pools,
    floor: int,
    budget: _Budget,
    gap: float = 0.0,
    target: Optional[int] = None,
    cap: Optional[int] = None,
) -> tuple[Optional[_InnerResult], bool]:
    """Branch-and-bound for the best packed (loaded, loaded 53) strictly above ``floor``.

    Stops early once ``target`` is reached. Returns the result and whether
    the local node ``cap`` cut the search short.
    """
    nq = len(platforms)
    options = [_platform_options(q) for q in platforms]
    prev_same = []
    last_seen: dict = {}
    for i, q in enumerate(platforms):
        prev_same.append(last_seen.get(q, -1))
        last_seen[q] = i
    n_by_len = [len(pools.weights[0]), len(pools.weights[1])]
    full = [(1 << n_by_len[0]) - 1, (1 << n_by_len[1]) - 1]
    group_start = pools.group_start
    prefix_fit = pools.prefix_fit
    weights = pools.weights

    # (loaded, loaded 53) packed as loaded * scale + loaded 53, which is additive
    scale = n_by_len[1] + 1
    bound = _suffix_bound(tuple(platforms), n_by_len[0], n_by_len[1])
    root = bound[0][n_by_len[0]][n_by_len[1]]
    goal = root if target is None else min(root, target)
    best = [floor]
    if root <= floor:
        return None, False
    local = [0]

    best_choices: list = [None]
    choice_key = [None] * nq
    choices: list = [None] * nq
    ub_slots = ([], [])  # sorted prefix fits of pending upper-bound slots per length
    stop = [False]

    def hall_ok(li: int, free: int) -> bool:
        for j, f in enumerate(ub_slots[li]):
            if (free & ((1 << f) - 1)).bit_count() <= j:
                return False
        return True

    def dfs(i: int, free40: int, free53: int, n: int, n53: int) -> None:
        if stop[0]:
            return
        budget.nodes += 1
        local[0] += 1
        if budget.limit is not None and budget.nodes > budget.limit:
            budget.exhausted = True
            stop[0] = True
            return
        if cap is not None and local[0] > cap:
            stop[0] = True
            return
        avail40 = free40.bit_count() - len(ub_slots[0])
        avail53 = free53.bit_count() - len(ub_slots[1])
        ub = n * scale + n53 + bound[i][avail40][avail53]
        if ub <= best[0]:
            return
        if gap > 0 and best_choices[0] is not None and (1.0 - gap) * ub <= best[0]:
            return
        if i == nq:
            best[0] = n * scale + n53
            best_choices[0] = list(choices)
            if best[0] >= goal:
                stop[0] = True
            return
        q = platforms[i]
        ps = prev_same[i]
        min_key = choice_key[ps] if ps >= 0 else None
        for oi, pat in enumerate(options[i]):
            if min_key is not None and oi < min_key[0]:
                continue
            if pat.bottom is None:
                key = (oi, 0)
                if min_key is not None and key < min_key:
                    continue
                choice_key[i] = key
                choices[i] = (pat, -1)
                dfs(i + 1, free40, free53, n, n53)
                if stop[0]:
                    return
                continue
            bl = 0 if pat.bottom == ContainerLength.L40 else 1
            if pat.top is None:
                key = (oi, 0)
                if min_key is not None and key < min_key:
                    continue
                f = prefix_fit(q, pat, None)
                if f == 0:
                    continue
                slots = ub_slots[bl]
                insort(slots, f)
                free = free40 if bl == 0 else free53
                if hall_ok(bl, free):
                    choice_key[i] = key
                    choices[i] = (pat, -1)
                    dfs(i + 1, free40, free53, n + 1, n53 + bl)
                slots.remove(f)
                if stop[0]:
                    return
                continue
            # stacked pair: branch on the bottom container, heaviest first
            tl = 0 if pat.top == ContainerLength.L40 else 1
            free_b = free40 if bl == 0 else free53
            ws = weights[bl]
            gs = group_start[bl]
            r = n_by_len[bl] - 1
            while r >= 0:
                g0 = gs[r]
                # lowest free rank inside this identical-weight group
                pick = -1
                for rr in range(g0, r + 1):
                    if free_b >> rr & 1:
                        pick = rr
                        break
                r_next = g0 - 1
                if pick < 0:
                    r = r_next
                    continue
                key = (oi, -g0)
                if min_key is not None and key < min_key:
                    r = r_next
                    continue
                f = prefix_fit(q, pat, ws[pick])
                if f > 0:
                    nf40, nf53 = free40, free53
                    if bl == 0:
                        nf40 &= ~(1 << pick)
                    else:
                        nf53 &= ~(1 << pick)
                    slots = ub_slots[tl]
                    insort(slots, f)
                    if hall_ok(0, nf40) and hall_ok(1, nf53):
                        choice_key[i] = key
                        choices[i] = (pat, pick)
                        dfs(i + 1, nf40, nf53, n + 2, n53 + bl + tl)
                    slots.remove(f)
                    if stop[0]:
                        return
                r = r_next

    dfs(0, full[0], full[1], 0, 0)
    cut = cap is not None and local[0] > cap
    if best_choices[0] is None:
        return None, cut
    return _InnerResult(best[0] // scale, best[0] % scale, best_choices[0], complete=not budget.exhausted), cut


def _inner_milp(
    platforms: Sequence[PlatformType], pools: _Pools, tighten: float = 0.0
) -> tuple[Optional[_InnerResult], bool]:
    """Same inner problem as a 0/1 program solved by HiGHS.

    Returns the decoded optimum and whether it passes the exact weight
    checks. ``tighten`` shrinks capacity and balance right-hand sides so that
    solver tolerances cannot admit a slightly infeasible plan.
    """
    n_by_len = [len(pools.weights[0]), len(pools.weights[1])]
    scale = n_by_len[1] + 1
    var = []  # (length index, rank, platform, slot)
    for qi, q in enumerate(platforms):
        pats = enumerate_patterns(q)
        for slot, lens in ((0, {p.bottom for p in pats}), (1, {p.top for p in pats})):
            for li, ln in enumerate(LENGTHS):
                if ln in lens:
                    var.extend((li, r, qi, slot) for r in range(n_by_len[li]))
    nv = len(var)
    if nv == 0:
        return None, True
    li_, rk_, qi_, sl_ = (np.array(c) for c in zip(*var))
    w = np.array([pools.weights[li][r] for li, r in zip(li_, rk_)])
    cid = np.where(li_ == 0, rk_, n_by_len[0] + rk_)
    nq = len(platforms)
    cap = np.array([q.weight_capacity for q in platforms])
    tare = np.array([q.tare * (q.h_tare - q.com_threshold) for q in platforms])
    h_slot = np.array([[q.h_bottom - q.com_threshold, q.h_top - q.com_threshold] for q in platforms])

    cols = np.arange(nv)
    n_cont = n_by_len[0] + n_by_len[1]
    blocks = [
        (cid, np.ones(nv), n_cont, np.ones(n_cont)),  # each container at most once
        (2 * qi_ + sl_, np.ones(nv), 2 * nq, np.ones(2 * nq)),  # each slot at most once
        (qi_, np.where(sl_ == 1, 1.0, -1.0), nq, np.zeros(nq)),  # top needs bottom
        (qi_, w, nq, cap * (1.0 - tighten)),
        (qi_, w * h_slot[qi_, sl_], nq, -tare - tighten * np.abs(tare) - tighten * cap),
    ]
    rows, vals, ub, off = [], [], [], 0
    for r, v, n, u in blocks:
        rows.append(r + off)
        vals.append(v)
        ub.append(u)
        off += n
    a = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.tile(cols, len(blocks)))), shape=(off, nv))
    obj = -(scale + (li_ == 1)).astype(float)
    res = milp(
        obj,
        constraints=LinearConstraint(a, -np.inf, np.concatenate(ub)),
        integrality=np.ones(nv),
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 0.0, "presolve": True},
    )
    if res.x is None:
        return None, True
    x = res.x > 0.5
    slots: list[list[Optional[tuple[int, int]]]] = [[None, None] for _ in platforms]
    for k in np.nonzero(x)[0]:
        slots[qi_[k]][sl_[k]] = (int(li_[k]), int(rk_[k]))
    choices, n, n53, exact = [], 0, 0, True
    for q, (b, u) in zip(platforms, slots):
        pat = LoadingPattern(None if b is None else LENGTHS[b[0]], None if u is None else LENGTHS[u[0]])
        bw = 0.0 if b is None else pools.weights[b[0]][b[1]]
        uw = 0.0 if u is None else pools.weights[u[0]][u[1]]
        if pat not in enumerate_patterns(q) or not pattern_weight_feasible(pat, bw, uw, q):
            exact = False
        choices.append((pat, -1 if u is None else b[1]))
        n += pat.size
        n53 += pat.n53
    return _InnerResult(n, n53, choices, complete=True), exact


# per-call node cap before the 0/1 program settles the optimum
_DFS_NODES = 20000


def _inner(
    platforms: Sequence[PlatformType],
    pools: _Pools,
    floor: tuple[int, int],
    budget: _Budget,
    gap: float = 0.0,
) -> Optional[_InnerResult]:
    """Best (loaded, loaded 53 ft) over the given platforms, if strictly better than ``floor``.

    Among equal values the first plan in search order is returned. If the
    search needs more than ``_DFS_NODES`` nodes, the optimum value comes from
    the 0/1 program and a second search looks for the first plan with that
    value.
    """
    scale = len(pools.weights[1]) + 1
    enc_floor = floor[0] * scale + floor[1]
    if budget.limit is not None:
        return _inner_dfs(platforms, pools, enc_floor, budget, gap)[0]
    res, cut = _inner_dfs(platforms, pools, enc_floor, budget, gap, cap=_DFS_NODES)
    if not cut:
        return res
    budget.milp_calls += 1
    opt, exact = _inner_milp(platforms, pools)
    for tighten in (1e-7, 1e-5, 1e-3):
        if exact:
            break
        # tolerance let a marginally infeasible plan through; the tightened optimum may be lower
        budget.inexact = True
        opt, exact = _inner_milp(platforms, pools, tighten=tighten)
    if not exact:
        opt = None
    if opt is None or opt.n * scale + opt.n53 <= enc_floor:
        return res if res is not None and res.n * scale + res.n53 > enc_floor else None
    value = opt.n * scale + opt.n53
    if res is not None and res.n * scale + res.n53 >= value:
        return res
    again, _ = _inner_dfs(platforms, pools, enc_floor, budget, gap, target=value, cap=_DFS_NODES)
    if again is not None and again.n * scale + again.n53 >= value:
        return again
    return opt


def _assign(platforms: Sequence[PlatformType], choices, pools: _Pools):
    """Container ids for each platform's (bottom, top) following the chosen patterns."""
    free = [set(range(len(pools.weights[0]))), set(range(len(pools.weights[1])))]
    out: list[list[Optional[int]]] = [[None, None] for _ in platforms]
    pending: tuple[list, list] = ([], [])
    for i, (q, (pat, pick)) in enumerate(zip(platforms, choices)):
        if pat.bottom is None:
            continue
        bl = LENGTHS.index(pat.bottom)
        if pat.top is None:
            pending[bl].append((pools.prefix_fit(q, pat, None), i, 0))
        else:
            free[bl].discard(pick)
            out[i][0] = pools.ids[bl][pick]
            tl = LENGTHS.index(pat.top)
            pending[tl].append((pools.prefix_fit(q, pat, pools.weights[bl][pick]), i, 1))
    for li in (0, 1):
        for f, i, s in sorted(pending[li]):
            r = min(x for x in free[li] if x < f)
            free[li].discard(r)
            out[i][s] = pools.ids[li][r]
    return out


# --- outer search -------------------------------------------------------------


_USAGE_CACHE: dict = {}


def _usage_candidates(counts: tuple[int, ...], fleet: Fleet):
    """All railcar-usage vectors with their used length and weight-free capacity
    bounds, ordered by (length, more railcars of lower type ids first)."""
    key = (counts, fleet.hash)
    hit = _USAGE_CACHE.get(key)
    if hit is not None:
        return hit
    if len(_USAGE_CACHE) > 4096:
        _USAGE_CACHE.clear()
    lengths = fleet.lengths_per_type
    slots = 2 * fleet.platforms_per_type
    cap53 = np.array(
        [sum(max(p.n53 for p in enumerate_patterns(q)) for q in t.platforms) for t in fleet.railcar_types],
        dtype=np.int64,
    )
    grid = np.array(list(itertools.product(*[range(c + 1) for c in counts])), dtype=np.int64).reshape(-1, 10)
    used_len = grid @ lengths
    order = np.lexsort(tuple(-grid[:, j] for j in range(9, -1, -1)) + (used_len,))
    grid = grid[order]
    out = (grid, used_len[order], grid @ slots, grid @ cap53)
    _USAGE_CACHE[key] = out
    return out


def _platforms_for(usage: Sequence[int], fleet: Fleet) -> tuple[list[PlatformType], list[tuple[int, int, int]]]:
    platforms, where = [], []
    for j, u in enumerate(usage):
        t = fleet.railcar_types[j]
        for idx in range(int(u)):
            for k, q in enumerate(t.platforms):
                platforms.append(q)
                where.append((j + 1, idx, k))
    return platforms, where


def solve_lpp(instance: FullInstance, fleet: Fleet, config: SolverConfig = SolverConfig()) -> DetailedSolution:
    """Lexicographically optimal load plan (or within ``config.gap`` in gap mode).

    The result is a pure function of (instance, fleet, config): the search
    order is fixed, and among solutions with equal objective the first one
    found in that order is kept. Usage vectors favour lower railcar type ids
    and the first railcars of each type; inside the search, platforms are
    taken in (railcar, platform) order, patterns fullest first, and stacked
    bottoms heaviest first (lowest id among equal weights).
    """
    _check_instance(instance, fleet)
    sketch = instance.sketch
    railcars = instance_railcars(sketch)
    pools = _Pools(instance)
    budget = _Budget(config.node_limit)
    gap = config.gap if config.mode == "gap" else 0.0
    n40, n53 = sketch.container_counts

    all_platforms, _ = _platforms_for(sketch.railcar_counts, fleet)
    top = _inner(all_platforms, pools, (-1, -1), budget, gap)
    n_star = 0 if top is None else top.n
    if n_star == 0:
        pats = tuple(tuple(EMPTY for _ in fleet.type(rc.type_id).platforms) for rc in railcars)
        return DetailedSolution(tuple(railcars), pats, (), LexObjective(), optimal=not budget.exhausted, nodes=budget.nodes)

    grid, used_len, slots, cap53 = _usage_candidates(tuple(sketch.railcar_counts), fleet)
    ub_n = np.minimum(np.minimum(slots, n40 + np.minimum(n53, cap53)), n40 + n53)
    feasible = np.nonzero(ub_n >= n_star)[0]
    full_usage = tuple(sketch.railcar_counts)

    best_res, best_usage, best_len = None, None, None
    for idx in feasible:
        length = int(used_len[idx])
        if best_len is not None and length > best_len:
            break
        usage = tuple(int(x) for x in grid[idx])
        floor53 = -1 if best_res is None else best_res.n53
        if min(n53, int(cap53[idx])) <= floor53:
            continue
        if usage == full_usage and top.n53 > floor53:
            res = top
        else:
            platforms, _ = _platforms_for(usage, fleet)
            res = _inner(platforms, pools, (n_star, floor53), budget, gap)
        if res is None or res.n < n_star:
            continue
        best_res, best_usage, best_len = res, usage, length
        if gap > 0:
            break
        if budget.exhausted:
            break

    if best_res is None:  # node limit hit before a usage vector reached n_star
        best_res, best_usage = top, full_usage
    platforms, where = _platforms_for(best_usage, fleet)
    assigned = _assign(platforms, best_res.choices, pools)

    index_of = {(rc.type_id, rc.index): r for r, rc in enumerate(railcars)}
    pats = [[EMPTY] * len(fleet.type(rc.type_id).platforms) for rc in railcars]
    placements = []
    for (tid, idx, k), (pat, _), (cb, ct) in zip(where, best_res.choices, assigned):
        r = index_of[(tid, idx)]
        pats[r][k] = pat
        if cb is not None:
            placements.append(Placement(cb, r, k, BOTTOM))
        if ct is not None:
            placements.append(Placement(ct, r, k, TOP))
    patterns = tuple(tuple(p) for p in pats)
    return DetailedSolution(
        tuple(railcars),
        patterns,
        tuple(placements),
        _objective_from_patterns(patterns, railcars, fleet),
        optimal=not budget.exhausted and not budget.inexact and gap == 0,
        nodes=budget.nodes,
    )


# --- brute force oracle ---------------------------------------------------------


def brute_force_lpp(
    instance: FullInstance, fleet: Fleet, max_platforms: int = 6, max_containers: int = 10
) -> DetailedSolution:
    """Exhaustive search over every pattern and every container placement.

    Memoised on (platform, set of unplaced containers, current railcar used);
    the objective is additive so the memo does not lose optimality.
    """
    _check_instance(instance, fleet)
    sketch = instance.sketch
    railcars = instance_railcars(sketch)
    plat = []  # (railcar index, platform index, platform type, first platform of railcar, railcar length)
    for r, rc in enumerate(railcars):
        t = fleet.type(rc.type_id)
        for k, q in enumerate(t.platforms):
            plat.append((r, k, q, k == 0, t.total_length))
    conts = instance.containers()
    if len(plat) > max_platforms or len(conts) > max_containers:
        raise InstanceTooLargeError(
            f"brute force limited to {max_platforms} platforms and {max_containers} containers, "
            f"got {len(plat)} and {len(conts)}"
        )
    patterns = [enumerate_patterns(q) for _, _, q, _, _ in plat]
    memo: dict = {}

    def best(i: int, remaining: int, car_used: bool):
        if i == len(plat):
            return (0, 0, 0), None
        key = (i, remaining, car_used)
        if key in memo:
            return memo[key]
        _, _, q, first, car_len = plat[i]
        if first:
            car_used = False
        best_val, best_choice = None, None
        for pat in patterns[i]:
            bottoms = [None] if pat.bottom is None else [c for c in conts if remaining >> c.id & 1 and c.length == pat.bottom]
            for b in bottoms:
                rem_b = remaining if b is None else remaining & ~(1 << b.id)
                tops = [None] if pat.top is None else [c for c in conts if rem_b >> c.id & 1 and c.length == pat.top]
                for u in tops:
                    bw = 0.0 if b is None else b.gross_weight
                    uw = 0.0 if u is None else u.gross_weight
                    if not pattern_weight_feasible(pat, bw, uw, q):
                        continue
                    rem = rem_b if u is None else rem_b & ~(1 << u.id)
                    loads = pat.size > 0
                    sub, _ = best(i + 1, rem, car_used or loads)
                    gain_len = -car_len if (loads and not car_used) else 0
                    clen = (0 if b is None else int(b.length)) + (0 if u is None else int(u.length))
                    val = (sub[0] + pat.size, sub[1] + gain_len, sub[2] + clen)
                    if best_val is None or val > best_val:
                        best_val, best_choice = val, (pat, b, u, rem, car_used or loads)
        memo[key] = (best_val, best_choice)
        return memo[key]

    pats = [[EMPTY] * len(fleet.type(rc.type_id).platforms) for rc in railcars]
    placements = []
    remaining, car_used = (1 << len(conts)) - 1, False
    for i, (r, k, _, first, _) in enumerate(plat):
        if first:
            car_used = False
        _, (pat, b, u, remaining, car_used) = best(i, remaining, car_used)
        pats[r][k] = pat
        if b is not None:
            placements.append(Placement(b.id, r, k, BOTTOM))
        if u is not None:
            placements.append(Placement(u.id, r, k, TOP))
    patterns_t = tuple(tuple(p) for p in pats)
    return DetailedSolution(
        tuple(railcars), patterns_t, tuple(placements), _objective_from_patterns(patterns_t, railcars, fleet)
    )


# --- verification ---------------------------------------------------------------


def verify_solution(instance: FullInstance, fleet: Fleet, solution: DetailedSolution) -> bool:
    """True iff patterns, placements and weight/COM limits are all consistent."""
    try:
        railcars = instance_railcars(instance.sketch)
    except ValueError:
        return False
    if list(solution.railcars) != railcars or len(solution.patterns) != len(railcars):
        return False
    conts = instance.containers()
    seen: set[int] = set()
    at: dict[tuple[int, int, str], int] = {}
    for p in solution.placements:
        if p.container_id in seen or not 0 <= p.container_id < len(conts):
            return False
        seen.add(p.container_id)
        key = (p.railcar, p.platform, p.slot)
        if key in at or p.slot not in (BOTTOM, TOP):
            return False
        at[key] = p.container_id
    for r, (rc, pats) in enumerate(zip(railcars, solution.patterns)):
        t = fleet.type(rc.type_id)
        if len(pats) != len(t.platforms):
            return False
        for k, (q, pat) in enumerate(zip(t.platforms, pats)):
            if pat not in enumerate_patterns(q):
                return False
            b = at.pop((r, k, BOTTOM), None)
            u = at.pop((r, k, TOP), None)
            if (b is None) != (pat.bottom is None) or (u is None) != (pat.top is None):
                return False
            if b is not None and conts[b].length != pat.bottom:
                return False
            if u is not None and conts[u].length != pat.top:
                return False
            bw = 0.0 if b is None else conts[b].gross_weight
            uw = 0.0 if u is None else conts[u].gross_weight
            if not pattern_weight_feasible(pat, bw, uw, q):
                return False
    if at:
        return False
    return _objective_from_patterns(solution.patterns, railcars, fleet) == solution.objective
