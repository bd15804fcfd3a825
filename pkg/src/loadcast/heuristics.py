"""Weight-blind greedy baselines that map a sketch straight to a summary."""

from __future__ import annotations

from dataclasses import dataclass

from .fleet import ContainerLength, Fleet, RailcarType
from .sampling import InstanceSketch
from .summarize import Summary


def heur_v(sketch: InstanceSketch, fleet: Fleet) -> Summary:
    """Fill every railcar's slots in fleet order, alternating 40/53 ft while both remain.

    Only slot counts are respected; lengths, top-53 capability and weights are ignored.
    """
    rem = [sketch.container_counts[0], sketch.container_counts[1]]
    used = [0] * len(sketch.railcar_counts)
    loaded = [0, 0]
    for j, count in enumerate(sketch.railcar_counts):
        slots = len(fleet.railcar_types[j].platforms) * 2
        for _ in range(count):
            if rem[0] + rem[1] == 0:
                break
            nxt = 0
            for _ in range(slots):
                if rem[0] + rem[1] == 0:
                    break
                li = nxt if rem[nxt] else 1 - nxt
                rem[li] -= 1
                loaded[li] += 1
                nxt = 1 - li
            used[j] += 1
    return Summary(tuple(used), (loaded[0], loaded[1]))


@dataclass(frozen=True)
class _Capability:
    slots: int
    fixed53: int  # 53 ft slots usable regardless of what else is loaded
    conditional53: int  # 53 ft tops on 40 ft platforms, usable only over a 40 ft bottom


def _capability(t: RailcarType) -> _Capability:
    fixed = cond = 0
    for q in t.platforms:
        if q.length == ContainerLength.L53:
            fixed += 1 + q.top_53_capable
        elif q.top_53_capable:
            cond += 1
    return _Capability(len(t.platforms) * 2, fixed, cond)


def usable_53_slots(t: RailcarType, remaining_40: int) -> int:
    cap = _capability(t)
    return cap.fixed53 + min(cap.conditional53, remaining_40)


def _pick(cars: list[tuple[int, int, int, int]], demand: int) -> int:
    """Position in ``cars`` of the chosen railcar. Entries are (count, length, type id, index).

    Largest count not exceeding demand, else smallest count; shortest railcar
    among those, then lowest type id and index.
    """
    fitting = [c for c in cars if c[0] <= demand]
    pool = fitting if fitting else cars
    target = max(c[0] for c in pool) if fitting else min(c[0] for c in pool)
    best = min((c[1], c[2], c[3], pos) for pos, c in enumerate(cars) if c[0] == target and c in pool)
    return best[3]


def heur_s(sketch: InstanceSketch, fleet: Fleet) -> Summary:
    """Two-phase greedy that places 53 ft containers on capable slots first.

    A 53 ft top on a 40 ft platform counts as usable only while a 40 ft
    container remains to go underneath; railcars with no usable 53 ft slot
    are not candidates in the first phase.
    """
    rem40, rem53 = sketch.container_counts
    avail = [(j + 1, i) for j, n in enumerate(sketch.railcar_counts) for i in range(n)]
    used = [0] * len(sketch.railcar_counts)
    loaded40 = loaded53 = 0

    while rem53 > 0:
        cands = []
        for tid, idx in avail:
            t = fleet.type(tid)
            u = usable_53_slots(t, rem40)
            if u > 0:
                cands.append((u, t.total_length, tid, idx))
        if not cands:
            break
        u, _, tid, idx = cands[_pick(cands, rem53)]
        cap = _capability(fleet.type(tid))
        m = min(rem53, u)
        on_40_platforms = max(0, m - cap.fixed53)  # each needs a 40 ft bottom
        extra40 = min(rem40 - on_40_platforms, cap.slots - m - on_40_platforms)
        rem53 -= m
        loaded53 += m
        rem40 -= on_40_platforms + extra40
        loaded40 += on_40_platforms + extra40
        used[tid - 1] += 1
        avail.remove((tid, idx))

    while rem40 > 0 and avail:
        cands = []
        for tid, idx in avail:
            t = fleet.type(tid)
            cands.append((len(t.platforms) * 2, t.total_length, tid, idx))
        slots, _, tid, idx = cands[_pick(cands, rem40)]
        m = min(rem40, slots)
        rem40 -= m
        loaded40 += m
        used[tid - 1] += 1
        avail.remove((tid, idx))

    return Summary(tuple(used), (loaded40, loaded53))
