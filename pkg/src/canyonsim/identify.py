"""Inverse geometry: width assignment and scatterer reconstruction.

A reflected path with delay tau_ref, azimuth theta_ref, and elevation
phi_ref, observed together with the snapshot's minimum-delay (direct)
path, constrains the one-sided canyon width d of its scatterer. With the
azimuth folded to the quadrant angle th = min(theta, 180 - theta) the
predicted horizontal bounce length at a hypothesized width d is

    P(d) = sqrt(d^2 + (L - d*tan(th))^2) + d / cos(th),
    L    = c * tau_dir * sin(phi_dir)

(TX-to-scatterer leg plus scatterer-to-RX leg), and the constraint
residual is (P(d) - c * tau_ref * sin(phi_ref)) / c, in seconds. The
residual vanishes exactly on noiseless single-bounce geometry and is
strictly increasing in d, which makes the width both assignable against a
grid (|residual| <= delta) and recoverable by iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .geometry import SPEED_OF_LIGHT, Side
from .synthesis import Mpc

#: assignment threshold, seconds; the measurement's distance resolution
DEFAULT_DELTA_S = 3e-8

_COS_EPS = 1e-12


def default_width_grid() -> np.ndarray:
    """5 m to 60 m in 5 m steps: half the resolvable-width spacing."""
    return np.arange(5.0, 60.0 + 1e-9, 5.0)


@dataclass(frozen=True)
class SnapshotObservation:
    """All MPCs of one snapshot; the direct path is the minimum-delay one."""

    mpcs: list
    direct: Mpc

    def __post_init__(self):
        if any(m.delay_s < self.direct.delay_s - 1e-15 for m in self.mpcs):
            raise ConfigError("direct path must have the minimum delay of its snapshot")

    @classmethod
    def from_mpcs(cls, mpcs: list) -> "SnapshotObservation":
        if not mpcs:
            raise ConfigError("snapshot observation needs at least one MPC")
        direct = min(mpcs, key=lambda m: m.delay_s)
        return cls(mpcs=mpcs, direct=direct)


@dataclass(frozen=True)
class WidthAssignment:
    mpc_index: int
    side: Side
    width_m: float
    residual_s: float


def _fold_quadrant(aoa_deg: float) -> float:
    """Quadrant angle in [0, 90]: distance of the AoA from the array plane ends."""
    return min(aoa_deg, 180.0 - aoa_deg)


def _geometry_terms(mpc: Mpc, direct: Mpc) -> tuple[float, float, float, float]:
    th = math.radians(_fold_quadrant(mpc.aoa_deg))
    cos_th = math.cos(th)
    if abs(cos_th) < _COS_EPS:
        raise NumericalError(
            f"AoA {mpc.aoa_deg} deg is singular (boresight): width constraint undefined"
        )
    tan_th = math.tan(th)
    sec_th = 1.0 / cos_th
    l_h = SPEED_OF_LIGHT * direct.delay_s * math.sin(math.radians(direct.eoa_deg))
    p_h = SPEED_OF_LIGHT * mpc.delay_s * math.sin(math.radians(mpc.eoa_deg))
    return tan_th, sec_th, l_h, p_h


def constraint_residual(mpc: Mpc, direct: Mpc, d: float) -> float:
    """Width-constraint residual in seconds; zero on exact single-bounce geometry."""
    if d <= 0:
        raise ConfigError(f"hypothesized width must be > 0, got {d}")
    tan_th, sec_th, l_h, p_h = _geometry_terms(mpc, direct)
    predicted = math.hypot(d, l_h - d * tan_th) + d * sec_th
    return (predicted - p_h) / SPEED_OF_LIGHT


def reconstruct_width(
    mpc: Mpc,
    direct: Mpc,
    tol_m: float = 1e-9,
    max_iter: int = 100,
) -> float:
    """Width at which the constraint residual vanishes.

    Fixed-point iteration on d = P / (sqrt(1 + (L/d - tan th)^2) + sec th),
    seeded with the reflected path's horizontal length. Where the fixed
    point converges too slowly, the strictly increasing residual is
    bisected instead.
    """
    tan_th, sec_th, l_h, p_h = _geometry_terms(mpc, direct)
    d = p_h  # numerator's leading scale
    for _ in range(max_iter):
        nxt = p_h / (math.hypot(1.0, l_h / d - tan_th) + sec_th)
        if abs(nxt - d) < tol_m:
            return nxt
        d = nxt

    def residual(dd: float) -> float:
        return math.hypot(dd, l_h - dd * tan_th) + dd * sec_th - p_h

    lo, hi = 1e-9, p_h
    if residual(lo) > 0 or residual(hi) < 0:
        raise NumericalError("width reconstruction failed: no root in (0, path-length]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol_m:
            return 0.5 * (lo + hi)
    raise NumericalError("width reconstruction did not converge")


def reconstruct_longitudinal(mpc: Mpc, direct: Mpc, d: float) -> float:
    """Longitudinal distance of the reflection point from TX along the route."""
    tan_th, _, l_h, _ = _geometry_terms(mpc, direct)
    return l_h - d * tan_th


def assign_clusters(
    obs: SnapshotObservation,
    width_grid=None,
    delta_s: float = DEFAULT_DELTA_S,
) -> list[WidthAssignment]:
    """Assign every non-direct MPC to the grid width minimizing |residual|.

    MPCs whose best residual exceeds delta stay unassigned; singular
    (boresight) angles are skipped. Ties break toward the smaller width.
    Side labels follow the AoA quadrant: left below 90 degrees.
    """
    if delta_s <= 0:
        raise ConfigError("assignment threshold delta must be > 0")
    grid = default_width_grid() if width_grid is None else np.asarray(width_grid, dtype=float)
    if len(grid) == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ConfigError("width grid must be positive and sorted ascending")
    out: list[WidthAssignment] = []
    for idx, m in enumerate(obs.mpcs):
        if m is obs.direct:
            continue
        try:
            tan_th, sec_th, l_h, p_h = _geometry_terms(m, obs.direct)
        except NumericalError:
            continue
        predicted = np.hypot(grid, l_h - grid * tan_th) + grid * sec_th
        residuals = (predicted - p_h) / SPEED_OF_LIGHT
        best = int(np.argmin(np.abs(residuals)))
        if abs(residuals[best]) <= delta_s:
            out.append(
                WidthAssignment(
                    mpc_index=idx,
                    side=Side.LEFT if m.aoa_deg < 90.0 else Side.RIGHT,
                    width_m=float(grid[best]),
                    residual_s=float(residuals[best]),
                )
            )
    return out
