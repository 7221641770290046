"""Log-distance large-scale model with lognormal shadowing.

The signed convention follows the log-distance form used throughout:

    PL(d) = P(d_ref) - 10 * gamma * log10(d / d_ref) + X

so the returned value decreases with distance for gamma > 0 and the
received power is TX power plus this value. Under NLOS the budget composes
two stages through the breakpoint virtual TX: the LOS model from TX to the
breakpoint, then the NLOS model from the breakpoint to RX; the total is
the dB sum of the two stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import LargeScaleParams
from .errors import ConfigError, ModelError
from .geometry import distance


@dataclass(frozen=True)
class LinkBudget:
    pl_db: float           # total budget value (Eq.-style sign, both stages summed)
    shadow_db: float       # total shadowing realization included in pl_db
    stage: str             # "los" or "nlos_two_stage"
    l_los_m: float
    l_nlos_m: float | None = None


def path_loss(d_m: float, ls: LargeScaleParams, rng: np.random.Generator | None = None) -> float:
    """Single-stage log-distance evaluation; rng=None disables shadowing."""
    if d_m < ls.d_ref_m:
        raise ModelError(f"distance {d_m} m below reference distance {ls.d_ref_m} m")
    value = ls.p_ref_db - 10.0 * ls.gamma * math.log10(d_m / ls.d_ref_m)
    if rng is not None and ls.sigma_shadow_db > 0.0:
        value += rng.normal(0.0, ls.sigma_shadow_db)
    return value


def link_budget(
    timeline,
    t: int,
    tx_pos,
    rx_pos,
    los_params: LargeScaleParams,
    nlos_params: LargeScaleParams | None,
    rng: np.random.Generator | None = None,
) -> LinkBudget:
    """Per-snapshot budget; NLOS composes the two stages through the breakpoint."""
    region = timeline.regions[t]
    if region.value != "nlos":
        d = distance(tx_pos, rx_pos)
        det = path_loss(d, los_params)
        total = path_loss(d, los_params, rng)
        return LinkBudget(pl_db=total, shadow_db=total - det, stage="los", l_los_m=d)

    if timeline.breakpoint is None:
        raise ConfigError("NLOS snapshot without a breakpoint in the visibility timeline")
    if nlos_params is None:
        raise ModelError("NLOS snapshot requires largescale_nlos parameters")
    l1 = distance(tx_pos, timeline.breakpoint)
    l2 = distance(timeline.breakpoint, rx_pos)
    det = path_loss(l1, los_params) + path_loss(l2, nlos_params)
    total = path_loss(l1, los_params, rng) + path_loss(l2, nlos_params, rng)
    return LinkBudget(
        pl_db=total, shadow_db=total - det, stage="nlos_two_stage", l_los_m=l1, l_nlos_m=l2
    )
