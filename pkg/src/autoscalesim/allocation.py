"""Task-to-cluster placement policies.

Each policy maps a placement request (the FCFS queue of eligible tasks plus
the free slot count of every allocated cluster) to a set of assignments.
Policies never reorder the queue and never assign beyond a cluster's free
slots; tasks they cannot place stay queued for the next dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class PlacementRequest:
    queue: tuple[tuple[int, int], ...]      # (task id, cpus) in FCFS order
    clusters: tuple[tuple[int, int], ...]   # (cluster id, free slots), allocated only


@dataclass(frozen=True)
class Placement:
    assignments: tuple[tuple[int, int], ...]  # (task id, cluster id)


def _most_free(free: dict[int, int]) -> int | None:
    """Cluster id with the most free slots; ties go to the lowest id."""
    best_id, best_free = None, -1
    for cid in sorted(free):
        if free[cid] > best_free:
            best_id, best_free = cid, free[cid]
    return best_id


def fill_worst_fit(request: PlacementRequest) -> Placement:
    """Fill the most-free cluster with the longest queue prefix that fits.

    Repeatedly select the cluster with the most free slots (lowest id on ties)
    and sweep the remaining queue in FCFS order, assigning tasks while they
    fit.  The sweep stops at the first task that does not fit; there is no
    backfilling past it.  Dispatch ends when a sweep places nothing.
    """
    free = {cid: f for cid, f in request.clusters}
    remaining = list(request.queue)
    out: list[tuple[int, int]] = []
    while remaining and free:
        cid = _most_free(free)
        placed = 0
        for tid, cpus in remaining:
            if cpus <= free[cid]:
                free[cid] -= cpus
                out.append((tid, cid))
                placed += 1
            else:
                break
        if placed == 0:
            break
        remaining = remaining[placed:]
    return Placement(tuple(out))


def worst_fit(request: PlacementRequest) -> Placement:
    """Per task, pick the fitting cluster with the most free slots.

    Tasks that fit nowhere are skipped and the sweep continues.
    """
    free = {cid: f for cid, f in request.clusters}
    out: list[tuple[int, int]] = []
    for tid, cpus in request.queue:
        best_id, best_free = None, -1
        for cid in sorted(free):
            if free[cid] >= cpus and free[cid] > best_free:
                best_id, best_free = cid, free[cid]
        if best_id is not None:
            free[best_id] -= cpus
            out.append((tid, best_id))
    return Placement(tuple(out))


def best_fit(request: PlacementRequest) -> Placement:
    """Per task, pick the fitting cluster with the fewest free slots."""
    free = {cid: f for cid, f in request.clusters}
    out: list[tuple[int, int]] = []
    for tid, cpus in request.queue:
        best_id, best_free = None, None
        for cid in sorted(free):
            if free[cid] >= cpus and (best_free is None or free[cid] < best_free):
                best_id, best_free = cid, free[cid]
        if best_id is not None:
            free[best_id] -= cpus
            out.append((tid, best_id))
    return Placement(tuple(out))


ALLOCATORS: dict[str, Callable[[PlacementRequest], Placement]] = {
    "fillworstfit": fill_worst_fit,
    "worstfit": worst_fit,
    "bestfit": best_fit,
}


def get_allocator(name: str) -> Callable[[PlacementRequest], Placement]:
    try:
        return ALLOCATORS[name]
    except KeyError:
        raise ValueError(f"unknown allocator {name!r}; choose from {sorted(ALLOCATORS)}") from None
