"""Simulation engine: scenario in, MPC log / CIR stream / stats report out.

Per snapshot: propagation distances and the link budget (two-stage through
the breakpoint under NLOS), the effective width set D(t), conditioning and
sampling of new clusters, one birth-death step for surviving ones, and CIR
assembly. Locations update between snapshots; absolute MPC quantities are
recomputed every snapshot from the current reference path.

Everything random flows through a single seeded generator in a fixed
order, so a fixed seed makes every output byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import evolution, io, stats, synthesis
from .distributions import ModelParams
from .errors import ConfigError, ModelError
from .geometry import SPEED_OF_LIGHT, bearing_deg, distance
from .largescale import link_budget
from .scenario import (
    Region,
    ScenarioConfig,
    VisibilityTimeline,
    array_frame_angle,
    classify_visibility,
    effective_width_sets,
    sample_trajectory,
)
from .synthesis import Mpc


@dataclass
class SimOptions:
    seed: int | None = None          # overrides the scenario seed
    shadow: bool = True
    margin_m: float | None = None    # overrides the scenario persistence margin
    include_cir: bool = False
    include_lifecycle: bool = False
    pdp_bin_s: float = stats.DEFAULT_PDP_BIN_S


@dataclass
class SimulationResult:
    scenario: ScenarioConfig
    timeline: VisibilityTimeline
    n_snapshots: int
    log_rows: list[io.LogRow]
    stats_rows: list[tuple]
    cir_stream: bytes | None = None
    lifecycle_rows: list[tuple] = field(default_factory=list)

    def mpc_log_csv(self) -> str:
        return io.write_mpc_log(self.log_rows)

    def stats_csv(self) -> str:
        return io.write_stats_csv(self.stats_rows)

    def lifecycle_csv(self) -> str:
        return io.write_lifecycle_csv(self.lifecycle_rows)

    def region_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.timeline.regions:
            out[r.value] = out.get(r.value, 0) + 1
        return out


def _reference_path(region, tx_pos, rx_pos, heading, breakpoint_pt, power_db) -> Mpc:
    """Direct path under LOS, the virtual-TX minimum-delay path under NLOS."""
    if region is Region.NLOS:
        d_total = distance(tx_pos, breakpoint_pt) + distance(breakpoint_pt, rx_pos)
        bearing = bearing_deg(rx_pos, breakpoint_pt)
        is_direct = False
    else:
        d_total = distance(tx_pos, rx_pos)
        bearing = bearing_deg(rx_pos, tx_pos)
        is_direct = True
    return Mpc(
        power_db=power_db,
        delay_s=d_total / SPEED_OF_LIGHT,
        aoa_deg=array_frame_angle(bearing, heading),
        eoa_deg=90.0,
        phase_rad=0.0,  # redrawn at assembly
        cluster_id=-1,
        is_direct=is_direct,
    )


def run_simulation(
    scenario: ScenarioConfig, params: ModelParams, options: SimOptions | None = None
) -> SimulationResult:
    options = options or SimOptions()
    params.validate()

    timeline = classify_visibility(scenario)
    if any(r is Region.NLOS for r in timeline.regions) and params.largescale_nlos is None:
        raise ModelError("scenario reaches NLOS but params carry no largescale_nlos")

    n = scenario.n_snapshots()
    width_sets = effective_width_sets(scenario, timeline, options.margin_m)
    for ws in width_sets:
        for _, w in ws:
            lo, hi = params.width_range_m
            if not (lo <= w <= hi):
                raise ModelError(
                    f"scenario width {w} m outside the params width range [{lo}, {hi}] m"
                )

    tx_traj = sample_trajectory(scenario.tx, scenario.snapshot_rate_hz, n, scenario.heading_blend_m)
    rx_traj = sample_trajectory(scenario.rx, scenario.snapshot_rate_hz, n, scenario.heading_blend_m)

    seed = scenario.seed if options.seed is None else options.seed
    rng = np.random.default_rng(seed)
    wavelength = scenario.rf.wavelength_m

    clusters: dict[tuple[str, float], evolution.Cluster] = {}
    next_id = 0
    log_rows: list[io.LogRow] = []
    stats_rows: list[tuple] = []
    lifecycle_rows: list[tuple] = []
    cir_parts: list[bytes] = [] if options.include_cir else None

    for t in range(n):
        region = timeline.regions[t]
        budget = link_budget(
            timeline,
            t,
            tx_traj.xy[t],
            rx_traj.xy[t],
            params.largescale_los,
            params.largescale_nlos,
            rng if options.shadow else None,
        )
        reference = _reference_path(
            region,
            tx_traj.xy[t],
            rx_traj.xy[t],
            float(rx_traj.heading_deg[t]),
            timeline.breakpoint,
            scenario.rf.tx_power_dbm + budget.pl_db,
        )

        active = {(side.value, w): (side, w) for side, w in width_sets[t]}
        for key in sorted(set(clusters) - set(active)):
            gone = clusters.pop(key)
            evolution.force_dead(gone, t)
            if options.include_lifecycle:
                for pid, sp in enumerate(gone.subpaths):
                    lifecycle_rows.append((t, gone.cluster_id, pid, 0, gone.side, gone.width_m))
        for key in sorted(active):
            if key in clusters:
                evolution.step_states([clusters[key]], params, rng, t)
            else:
                side, width = active[key]
                (cluster,) = evolution.init_clusters([(side, width)], params, rng, t, next_id)
                next_id += 1
                clusters[key] = cluster

        ordered = [clusters[k] for k in sorted(clusters)]
        mpcs = synthesis.assemble_snapshot(ordered, reference, rng)

        for m in mpcs:
            log_rows.append(
                io.LogRow(
                    snapshot=t,
                    power_db=m.power_db,
                    delay_s=m.delay_s,
                    aoa_deg=m.aoa_deg,
                    eoa_deg=m.eoa_deg,
                    phase_rad=m.phase_rad,
                    cluster_id=m.cluster_id,
                    side=m.side,
                    width_m=m.width_m,
                    is_direct=m.is_direct,
                    region=region.value,
                )
            )
        rms, spread, count = stats.snapshot_stats(mpcs, options.pdp_bin_s)
        stats_rows.append((t, rms, spread, count, region.value))
        if options.include_lifecycle:
            for key in sorted(clusters):
                cl = clusters[key]
                for pid, sp in enumerate(cl.subpaths):
                    lifecycle_rows.append(
                        (t, cl.cluster_id, pid, sp.state.state, cl.side, cl.width_m)
                    )
        if cir_parts is not None:
            cir_parts.append(
                io.pack_cir(synthesis.cir(mpcs, scenario.array, wavelength, snapshot=t))
            )

    return SimulationResult(
        scenario=scenario,
        timeline=timeline,
        n_snapshots=n,
        log_rows=log_rows,
        stats_rows=stats_rows,
        cir_stream=b"".join(cir_parts) if cir_parts is not None else None,
        lifecycle_rows=lifecycle_rows,
    )


@dataclass
class ValidationReport:
    dks_rms_ds: float
    dks_aoa_spread: float
    n_snapshots: int
    model_rms_ds: list[float]
    model_aoa_spread: list[float]
    reference_rms_ds: list[float]
    reference_aoa_spread: list[float]


def per_snapshot_spreads(rows: list[io.LogRow], pdp_bin_s=stats.DEFAULT_PDP_BIN_S):
    """RMS delay spread and AoA spread of every snapshot of an MPC log."""
    rms_list, aoa_list = [], []
    for _, snap_rows in sorted(io.rows_by_snapshot(rows).items()):
        mpcs = [r.to_mpc() for r in snap_rows]
        rms, spread, _ = stats.snapshot_stats(mpcs, pdp_bin_s)
        rms_list.append(rms)
        aoa_list.append(spread)
    return rms_list, aoa_list


def validate_against(
    params: ModelParams,
    scenario: ScenarioConfig,
    reference_rows: list[io.LogRow],
    seed: int | None = None,
) -> ValidationReport:
    """Simulate matched sample counts and compare second-order statistics.

    The model run must produce exactly as many snapshots as the reference
    log; the returned distances are the KS statistics between the two CDFs
    of per-snapshot RMS delay spread and AoA spread.
    """
    if not reference_rows:
        raise ConfigError("reference MPC log is empty")
    ref_snapshots = len(io.rows_by_snapshot(reference_rows))
    n = scenario.n_snapshots()
    if n != ref_snapshots:
        raise ConfigError(
            f"scenario produces {n} snapshots but the reference log has {ref_snapshots}"
        )
    result = run_simulation(scenario, params, SimOptions(seed=seed))
    model_rms, model_aoa = per_snapshot_spreads(result.log_rows)
    ref_rms, ref_aoa = per_snapshot_spreads(reference_rows)
    return ValidationReport(
        dks_rms_ds=stats.ks_statistic(model_rms, ref_rms),
        dks_aoa_spread=stats.ks_statistic(model_aoa, ref_aoa),
        n_snapshots=n,
        model_rms_ds=model_rms,
        model_aoa_spread=model_aoa,
        reference_rms_ds=ref_rms,
        reference_aoa_spread=ref_aoa,
    )


def identify_log(
    rows: list[io.LogRow],
    scenario: ScenarioConfig,
    delta_s: float | None = None,
    width_grid=None,
):
    """Width assignment plus scatterer reconstruction over a whole log.

    Returns (assignment row dicts, scatterer tuples, skipped count). Under
    NLOS the direct reference is shifted to the breakpoint virtual TX.
    """
    from .identify import (
        DEFAULT_DELTA_S,
        SnapshotObservation,
        assign_clusters,
        reconstruct_longitudinal,
        reconstruct_width,
    )

    delta = DEFAULT_DELTA_S if delta_s is None else delta_s
    if not rows:
        raise ConfigError("empty MPC log: nothing to identify")
    snapshots = io.rows_by_snapshot(rows)

    needs_timeline = any(r.region is None for r in rows) or any(
        r.region == Region.NLOS.value for r in rows
    )
    timeline = classify_visibility(scenario) if needs_timeline else None
    bp = timeline.breakpoint if timeline is not None else None
    tx_pos = scenario.tx.waypoints[0]
    l1 = distance(tx_pos, bp) if bp is not None else 0.0

    assignment_rows: list[dict] = []
    scatterers: list[tuple] = []
    for snap, snap_rows in snapshots.items():
        direct = min(snap_rows, key=lambda r: r.delay_s)
        region = next((r.region for r in snap_rows if r.region), None)
        if region is None and timeline is not None:
            region = timeline.regions[min(snap, len(timeline.regions) - 1)].value
        ref_delay = direct.delay_s
        if region == Region.NLOS.value and bp is not None:
            ref_delay = max(direct.delay_s - l1 / SPEED_OF_LIGHT, 1e-12)
        ref = Mpc(
            power_db=direct.power_db,
            delay_s=ref_delay,
            aoa_deg=direct.aoa_deg,
            eoa_deg=direct.eoa_deg,
            phase_rad=direct.phase_rad,
            is_direct=True,
        )
        others = [r for r in snap_rows if r is not direct]
        mpcs = [ref] + [
            Mpc(
                power_db=r.power_db,
                delay_s=(r.delay_s - direct.delay_s) + ref_delay,
                aoa_deg=r.aoa_deg,
                eoa_deg=r.eoa_deg,
                phase_rad=r.phase_rad,
            )
            for r in others
        ]
        obs = SnapshotObservation(mpcs=mpcs, direct=ref)
        assigned = {a.mpc_index: a for a in assign_clusters(obs, width_grid, delta)}

        assignment_rows.append(
            {
                "snapshot": snap,
                "power_db": direct.power_db,
                "delay_s": direct.delay_s,
                "aoa_deg": direct.aoa_deg,
                "eoa_deg": direct.eoa_deg,
                "phase_rad": direct.phase_rad,
                "side": None,
                "width_m": None,
                "residual_s": None,
            }
        )
        for j, r in enumerate(others):
            a = assigned.get(j + 1)
            assignment_rows.append(
                {
                    "snapshot": snap,
                    "power_db": r.power_db,
                    "delay_s": r.delay_s,
                    "aoa_deg": r.aoa_deg,
                    "eoa_deg": r.eoa_deg,
                    "phase_rad": r.phase_rad,
                    "side": a.side if a else None,
                    "width_m": a.width_m if a else None,
                    "residual_s": a.residual_s if a else None,
                }
            )
            if a is not None:
                try:
                    d_hat = reconstruct_width(mpcs[j + 1], ref)
                    l_hat = reconstruct_longitudinal(mpcs[j + 1], ref, d_hat)
                except Exception:
                    continue
                scatterers.append((l_hat, d_hat, a.side))
    return assignment_rows, scatterers, 0
