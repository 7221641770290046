"""Birth-death lifecycle of clusters and their subpaths.

Every subpath carries a two-state Markov chain (0 = dead, 1 = alive)
stepped once per snapshot. A cluster is the group of subpaths produced by
scatterers at one (side, width); it is alive while any subpath is alive.
A path reborn from the dead state redraws all five MPC parameters from the
currently conditioned distributions; a surviving path keeps its draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import ModelParams, MpcDraw, condition, sample_mpc
from .geometry import Side

# re-exported for callers that think of the matrix as lifecycle machinery
from .distributions import MarkovMatrix  # noqa: F401


@dataclass
class PathState:
    state: int            # 0 dead, 1 alive
    birth: int            # snapshot index of the current episode's birth
    death: int | None = None  # snapshot index of death, if dead

    def __post_init__(self):
        if self.state not in (0, 1):
            raise ValueError("path state must be 0 or 1")
        if self.death is not None and self.death < self.birth:
            raise ValueError("death snapshot precedes birth")


@dataclass
class Subpath:
    draw: MpcDraw
    state: PathState


@dataclass
class Cluster:
    cluster_id: int
    side: Side
    width_m: float
    subpaths: list[Subpath] = field(default_factory=list)


def cluster_key(cluster: Cluster) -> tuple[str, float]:
    return (cluster.side.value, cluster.width_m)


def init_clusters(
    widths,
    params: ModelParams,
    rng: np.random.Generator,
    snapshot: int = 0,
    id_start: int = 0,
) -> list[Cluster]:
    """One fresh cluster per (side, width), all subpaths born alive.

    The subpath count is Poisson(subpath_mean) with a floor of one. Widths
    are visited in sorted order so a fixed seed yields a fixed layout.
    """
    clusters = []
    cid = id_start
    for side, width in sorted(widths, key=lambda sw: (sw[0].value, sw[1])):
        dists = condition(params, width, side)
        n = max(1, int(rng.poisson(params.subpath_mean)))
        subpaths = [
            Subpath(draw=sample_mpc(dists, rng), state=PathState(1, birth=snapshot))
            for _ in range(n)
        ]
        clusters.append(Cluster(cluster_id=cid, side=side, width_m=width, subpaths=subpaths))
        cid += 1
    return clusters


def step_states(
    clusters: list[Cluster],
    params: ModelParams,
    rng: np.random.Generator,
    snapshot: int,
) -> list[Cluster]:
    """Advance every subpath one Markov step; rebirths redraw their parameters."""
    for cluster in clusters:
        matrix = params.markov_for(cluster.side)
        dists = condition(params, cluster.width_m, cluster.side)
        for sp in cluster.subpaths:
            u = rng.random()
            if sp.state.state == 1:
                if u >= matrix.p11:
                    sp.state.state = 0
                    sp.state.death = snapshot
            else:
                if u < matrix.p01:
                    sp.draw = sample_mpc(dists, rng)
                    sp.state = PathState(1, birth=snapshot)
    return clusters


def force_dead(cluster: Cluster, snapshot: int) -> None:
    """Kill every subpath; used when the cluster's width leaves the effective set."""
    for sp in cluster.subpaths:
        if sp.state.state == 1:
            sp.state.state = 0
            sp.state.death = snapshot


def count_alive(cluster: Cluster, t: int | None = None) -> int:
    """Number of alive subpaths, L(t, k)."""
    return sum(sp.state.state for sp in cluster.subpaths)


def birth_decomposition(cluster: Cluster, t: int) -> tuple[int, int]:
    """Alive count split into (newly born at t, survivors born earlier).

    The two-term decomposition must always total count_alive.
    """
    newborn = sum(1 for sp in cluster.subpaths if sp.state.state == 1 and sp.state.birth == t)
    survivors = sum(1 for sp in cluster.subpaths if sp.state.state == 1 and sp.state.birth < t)
    return newborn, survivors


def cluster_state(cluster: Cluster) -> int:
    """Logical OR of subpath states: 1 while any subpath is alive."""
    return 1 if any(sp.state.state == 1 for sp in cluster.subpaths) else 0
